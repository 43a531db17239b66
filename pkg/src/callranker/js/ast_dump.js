// AST dump driver: reads a JSON manifest on stdin, parses each listed file
// with the vendored acorn, and writes one JSON result per line on stdout.
//
// Manifest: {"root": "/abs/dir", "files": ["rel.js", ...], "module_type": "commonjs"|"module"}
// Result:   {"file": rel, "ok": true, "source_type": "script"|"module",
//            "ast": <ESTree with byte-offset start/end>, "arrow_tokens": [[start,end],...]}
//        or {"file": rel, "ok": false, "error": "message"}
//
// acorn positions are UTF-16 code-unit indices into the decoded source; they
// are converted to UTF-8 byte offsets here so the Python side can work on
// file bytes directly.

'use strict';

const fs = require('fs');
const path = require('path');
const acorn = require('./acorn.js');

function byteOffsetTable(text, byteLength) {
  // Maps UTF-16 index -> UTF-8 byte offset. Null when the file is pure ASCII.
  if (text.length === byteLength) return null;
  const table = new Uint32Array(text.length + 1);
  let bytes = 0;
  let i = 0;
  while (i < text.length) {
    table[i] = bytes;
    const cp = text.codePointAt(i);
    if (cp < 0x80) {
      bytes += 1;
      i += 1;
    } else if (cp < 0x800) {
      bytes += 2;
      i += 1;
    } else if (cp < 0x10000) {
      bytes += 3;
      i += 1;
    } else {
      // Astral code point: two UTF-16 units, four UTF-8 bytes.
      table[i + 1] = bytes; // mid-surrogate index, never emitted by acorn
      bytes += 4;
      i += 2;
    }
  }
  table[text.length] = bytes;
  return table;
}

function convertOffsets(node, table, seen) {
  if (node === null || typeof node !== 'object' || seen.has(node)) return;
  seen.add(node);
  if (Array.isArray(node)) {
    for (const item of node) convertOffsets(item, table, seen);
    return;
  }
  if (typeof node.start === 'number') node.start = table[node.start];
  if (typeof node.end === 'number') node.end = table[node.end];
  for (const key of Object.keys(node)) {
    if (key === 'start' || key === 'end') continue;
    convertOffsets(node[key], table, seen);
  }
}

function normalizeSharedNodes(node, seen) {
  // acorn reuses node objects (import/export shorthand specifiers) and clones
  // shorthand property keys; both would duplicate one source occurrence in
  // the serialized tree. Keep the first reference, null out the rest.
  if (node === null || typeof node !== 'object') return;
  if (node.type === 'Property' && node.shorthand && node.key && node.value) {
    node.key = null;
  }
  for (const key of Object.keys(node)) {
    const value = node[key];
    if (Array.isArray(value)) {
      for (let i = 0; i < value.length; i++) {
        const item = value[i];
        if (item !== null && typeof item === 'object' && item.type) {
          if (seen.has(item)) {
            value[i] = null;
            continue;
          }
          seen.add(item);
          normalizeSharedNodes(item, seen);
        }
      }
    } else if (value !== null && typeof value === 'object' && value.type) {
      if (seen.has(value)) {
        node[key] = null;
        continue;
      }
      seen.add(value);
      normalizeSharedNodes(value, seen);
    }
  }
}

function parseOne(source, sourceTypeHint) {
  const arrows = [];
  const options = {
    ecmaVersion: 'latest',
    allowHashBang: true,
    onToken: (t) => {
      if (t.type.label === '=>') arrows.push([t.start, t.end]);
    },
  };
  if (sourceTypeHint === 'module') {
    const ast = acorn.parse(source, { ...options, sourceType: 'module' });
    return { ast, arrows, sourceType: 'module' };
  }
  try {
    const ast = acorn.parse(source, {
      ...options,
      sourceType: 'script',
      allowReturnOutsideFunction: true,
    });
    return { ast, arrows, sourceType: 'script' };
  } catch (scriptError) {
    arrows.length = 0;
    try {
      const ast = acorn.parse(source, { ...options, sourceType: 'module' });
      return { ast, arrows, sourceType: 'module' };
    } catch (moduleError) {
      throw scriptError;
    }
  }
}

function sourceTypeHint(relPath, moduleType) {
  const ext = path.extname(relPath);
  if (ext === '.mjs') return 'module';
  if (ext === '.cjs') return 'script';
  return moduleType === 'module' ? 'module' : 'auto';
}

function main() {
  const manifest = JSON.parse(fs.readFileSync(0, 'utf8'));
  const moduleType = manifest.module_type || 'commonjs';
  const out = [];
  for (const relPath of manifest.files) {
    const absPath = path.join(manifest.root, relPath);
    let result;
    try {
      const buf = fs.readFileSync(absPath);
      const source = buf.toString('utf8');
      const { ast, arrows, sourceType } = parseOne(source, sourceTypeHint(relPath, moduleType));
      normalizeSharedNodes(ast, new Set([ast]));
      const table = byteOffsetTable(source, buf.length);
      if (table !== null) {
        convertOffsets(ast, table, new Set());
        for (const tok of arrows) {
          tok[0] = table[tok[0]];
          tok[1] = table[tok[1]];
        }
      }
      result = {
        file: relPath,
        ok: true,
        source_type: sourceType,
        ast: ast,
        arrow_tokens: arrows,
      };
    } catch (err) {
      result = { file: relPath, ok: false, error: String(err.message || err) };
    }
    out.push(JSON.stringify(result));
  }
  process.stdout.write(out.join('\n') + '\n');
}

main();
