const fs = require('fs');
const path = require('path');
module.exports = function load(dir) {
  const file = path.join(dir, 'app.config.json');
  return JSON.parse(fs.readFileSync(file, 'utf8'));
};
