import assert from 'node:assert/strict';
import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';
import { test } from 'node:test';

import { pack } from '../pack.js';
import { buildZip, sha256Hex } from '../zip.js';
import { sampleSubmission } from './util.js';

test('zip output is deterministic regardless of entry order', () => {
  const a = buildZip([
    { path: 'b.txt', data: Buffer.from('bee') },
    { path: 'a.txt', data: Buffer.from('ay') },
  ]);
  const b = buildZip([
    { path: 'a.txt', data: Buffer.from('ay') },
    { path: 'b.txt', data: Buffer.from('bee') },
  ]);
  assert.deepEqual(a, b);
  assert.equal(a.readUInt32LE(0), 0x04034b50);
  assert.equal(a.readUInt32LE(a.length - 22), 0x06054b50);
});

test('packing the same directory twice yields the same digest', () => {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'fibench-pack-'));
  try {
    sampleSubmission(dir);
    const first = pack(dir);
    const second = pack(dir);
    assert.equal(first.digest, second.digest);
    assert.equal(first.digest, sha256Hex(first.archive));
    assert.deepEqual(first.archive, second.archive);
  } finally {
    fs.rmSync(dir, { recursive: true, force: true });
  }
});

test('synthesized metadata lands in the archive when the directory has none', () => {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'fibench-pack-'));
  try {
    sampleSubmission(dir);
    fs.rmSync(path.join(dir, 'submission.json'));
    const packed = pack(dir, { method: 'from-config', ensembling: true });
    assert.equal(packed.meta.method, 'from-config');
    assert.ok(packed.archive.includes(Buffer.from('"method":"from-config"')));
    assert.ok(!fs.existsSync(path.join(dir, 'submission.json')));
  } finally {
    fs.rmSync(dir, { recursive: true, force: true });
  }
});
