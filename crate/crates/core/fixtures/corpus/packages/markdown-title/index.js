module.exports = (md) => {
  const line = md.split('\n').find((l) => l.startsWith('# '));
  return line ? line.slice(2).trim() : null;
};
