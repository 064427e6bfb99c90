const fs = require('fs');
module.exports = function log(file, msg) {
  fs.appendFileSync(file, new Date().toISOString() + ' ' + msg + '\n');
};
