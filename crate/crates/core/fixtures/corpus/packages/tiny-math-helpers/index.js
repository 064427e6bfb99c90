exports.clamp = (x, lo, hi) => Math.min(hi, Math.max(lo, x));
exports.lerp = (a, b, t) => a + (b - a) * t;
exports.sum = (xs) => xs.reduce((a, b) => a + b, 0);
