module.exports = (s) => s.replace(/\u001b\[[0-9;]*m/g, '');
