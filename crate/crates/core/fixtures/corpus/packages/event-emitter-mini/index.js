class Emitter {
  constructor() { this.handlers = {}; }
  on(e, f) { (this.handlers[e] = this.handlers[e] || []).push(f); return this; }
  emit(e, ...a) { (this.handlers[e] || []).forEach((f) => f(...a)); }
}
module.exports = Emitter;
