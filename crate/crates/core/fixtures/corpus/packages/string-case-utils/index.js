function camel(s) {
  return s.replace(/[-_ ]+(\w)/g, (_, c) => c.toUpperCase());
}
function kebab(s) {
  return s.replace(/([a-z])([A-Z])/g, '$1-$2').toLowerCase();
}
module.exports = { camel, kebab };
