module.exports = require('./lib/collect');
