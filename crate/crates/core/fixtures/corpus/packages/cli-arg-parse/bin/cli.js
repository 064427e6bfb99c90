#!/usr/bin/env node
console.log(require('..')(process.argv.slice(2)));
