import * as fs from 'node:fs';
import * as path from 'node:path';

/** Minimal PNG header (signature + IHDR) good enough for header peeks. */
export function fakePng(width: number, height: number, bitDepth = 8, colorType = 2): Buffer {
  const buf = Buffer.alloc(64);
  Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]).copy(buf, 0);
  buf.writeUInt32BE(13, 8);
  buf.write('IHDR', 12, 'latin1');
  buf.writeUInt32BE(width, 16);
  buf.writeUInt32BE(height, 20);
  buf.writeUInt8(bitDepth, 24);
  buf.writeUInt8(colorType, 25);
  return buf;
}

export function writeTree(root: string, files: Record<string, Buffer | string>): void {
  for (const [rel, content] of Object.entries(files)) {
    const abs = path.join(root, rel);
    fs.mkdirSync(path.dirname(abs), { recursive: true });
    fs.writeFileSync(abs, content);
  }
}

/** A syntactically valid two-sequence, one-tier submission layout. */
export function sampleSubmission(root: string, size: [number, number] = [32, 16]): void {
  const files: Record<string, Buffer | string> = {
    'submission.json': JSON.stringify({ method: 'unit-test', ensembling: false }),
  };
  for (const seq of ['seq_0000', 'seq_0001']) {
    for (let t = 1; t <= 7; t++) {
      files[`${seq}/res_${size[0]}x${size[1]}/pred_t${t}.png`] = fakePng(size[0], size[1]);
    }
  }
  writeTree(root, files);
}
