module.exports = class Stack { constructor() { this.a = []; } push(x) { this.a.push(x); } pop() { return this.a.pop(); } };
