module.exports = { Stack: require('./lib/stack'), Queue: require('./lib/queue') };
