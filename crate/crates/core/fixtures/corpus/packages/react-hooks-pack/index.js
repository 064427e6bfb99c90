const { useState, useEffect } = require('react');
exports.useToggle = (v = false) => {
  const [s, set] = useState(v);
  return [s, () => set((x) => !x)];
};
exports.useMount = (f) => useEffect(f, []);
