exports.parse = (q) => Object.fromEntries(new URLSearchParams(q));
exports.stringify = (o) => new URLSearchParams(o).toString();
