const fs = require('fs');
const path = require('path');
module.exports = function clean(dir) {
  for (const f of fs.readdirSync(dir)) {
    if (f.endsWith('.tmp')) fs.unlinkSync(path.join(dir, f));
  }
};
