module.exports = function compile(src) {
  const body = 'return `' + src.replace(/`/g, '\\`') + '`;';
  return new Function('data', 'with (data) { ' + body + ' }');
};
