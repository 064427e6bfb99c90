module.exports = class Queue { constructor() { this.a = []; } add(x) { this.a.push(x); } take() { return this.a.shift(); } };
