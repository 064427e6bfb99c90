function isObj(x) { return x && typeof x === 'object' && !Array.isArray(x); }
module.exports = function merge(a, b) {
  const out = { ...a };
  for (const [k, v] of Object.entries(b)) out[k] = isObj(v) && isObj(a[k]) ? merge(a[k], v) : v;
  return out;
};
