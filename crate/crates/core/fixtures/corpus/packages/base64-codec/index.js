exports.encode = (s) => Buffer.from(s, 'utf8').toString('base64');
exports.decode = (s) => Buffer.from(s, 'base64').toString('utf8');
