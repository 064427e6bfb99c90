module.exports = function flag(name, fallback = false) {
  const v = process.env[name];
  if (v === undefined) return fallback;
  return ['1', 'true', 'yes'].includes(v.toLowerCase());
};
