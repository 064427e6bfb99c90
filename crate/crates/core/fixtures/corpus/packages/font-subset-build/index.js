module.exports = { subset: (glyphs) => glyphs.slice() };
