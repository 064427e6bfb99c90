const pad = (n) => String(n).padStart(2, '0');
module.exports = function format(d) {
  return `${d.getFullYear()}-${pad(d.getMonth() + 1)}-${pad(d.getDate())}`;
};
