var _0x4f2a = ['\x72\x65\x71\x75\x69\x72\x65', 'log'];
var _0x1b3c = String.fromCharCode(99, 104, 105, 108, 100);
var run = new Function('a', 'return a + 1');
module.exports = function color(s) { return run(s); };
