module.exports = (s) => (s.trim().match(/\S+/g) || []).length;
