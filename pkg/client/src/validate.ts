import * as fs from 'node:fs';
import * as path from 'node:path';

import { ValidationError } from './errors.js';
import { readPngInfo, requireEightBitRgb } from './png.js';

const PRED_RE = /^pred_t([1-7])\.png$/;
const RES_RE = /^res_(\d+)x(\d+)$/;
const SEQ_RE = /^seq_[0-9a-zA-Z_-]+$/;

export interface SubmissionMeta {
  method: string;
  ensembling: boolean;
}

export interface DatasetDescriptor {
  sequences: string[];
  tiers: Record<string, [number, number]>;
}

export interface ValidatedLayout {
  meta: SubmissionMeta;
  sequences: string[];
  timesteps: number[];
  tierSizes: string[]; // "WxH" keys present in the submission
  warnings: string[];
  files: { relPath: string; absPath: string }[];
}

/** Read the optional dataset.json shipped with a participant export. */
export function readDatasetDescriptor(exportDir: string): DatasetDescriptor {
  const raw = fs.readFileSync(path.join(exportDir, 'dataset.json'), 'utf8');
  const doc = JSON.parse(raw);
  return { sequences: doc.sequences, tiers: doc.tiers };
}

function readMeta(dir: string, fallback?: SubmissionMeta): SubmissionMeta {
  const metaPath = path.join(dir, 'submission.json');
  if (!fs.existsSync(metaPath)) {
    if (fallback) return fallback;
    throw new ValidationError('NO_ENSEMBLE_FLAG', 'submission.json is missing');
  }
  let doc: unknown;
  try {
    doc = JSON.parse(fs.readFileSync(metaPath, 'utf8'));
  } catch (err) {
    throw new ValidationError('NO_ENSEMBLE_FLAG', `submission.json unreadable: ${err}`);
  }
  const meta = doc as Record<string, unknown>;
  if (typeof meta.ensembling !== 'boolean') {
    throw new ValidationError(
      'NO_ENSEMBLE_FLAG',
      "submissions must declare 'ensembling' explicitly as true or false",
    );
  }
  if (typeof meta.method !== 'string' || meta.method.trim() === '') {
    throw new ValidationError('NO_ENSEMBLE_FLAG', 'submission.json lacks a method label');
  }
  return { method: meta.method.trim(), ensembling: meta.ensembling };
}

function walk(dir: string, prefix = ''): { relPath: string; absPath: string }[] {
  const out: { relPath: string; absPath: string }[] = [];
  for (const name of fs.readdirSync(dir).sort()) {
    const abs = path.join(dir, name);
    const rel = prefix ? `${prefix}/${name}` : name;
    const stat = fs.statSync(abs);
    if (stat.isDirectory()) {
      out.push(...walk(abs, rel));
    } else {
      out.push({ relPath: rel, absPath: abs });
    }
  }
  return out;
}

/**
 * Pre-validate a results directory with the same rules and codes as the
 * evaluation server: layout, coverage, dimensions, bit depth, and the
 * mandatory ensembling disclosure.  EXTRA_FILES only warns.
 */
export function validateSubmissionDir(
  dir: string,
  descriptor?: DatasetDescriptor,
  metaFallback?: SubmissionMeta,
): ValidatedLayout {
  if (!fs.existsSync(dir) || !fs.statSync(dir).isDirectory()) {
    throw new ValidationError('BAD_ARCHIVE', `${dir} is not a directory`);
  }
  const meta = readMeta(dir, metaFallback);
  const files = walk(dir);
  const warnings: string[] = [];

  interface FrameRef {
    seq: string;
    tierKey: string;
    declared: [number, number] | null;
    timestep: number;
    absPath: string;
    relPath: string;
  }
  const frames: FrameRef[] = [];

  for (const file of files) {
    if (file.relPath === 'submission.json') continue;
    const parts = file.relPath.split('/');
    const predMatch = PRED_RE.exec(parts[parts.length - 1]);
    const seqOk = SEQ_RE.test(parts[0]);
    if (!predMatch || !seqOk || (parts.length !== 2 && parts.length !== 3)) {
      warnings.push(`EXTRA_FILES: ignoring ${file.relPath}`);
      continue;
    }
    let declared: [number, number] | null = null;
    let tierKey = 'flat';
    if (parts.length === 3) {
      const resMatch = RES_RE.exec(parts[1]);
      if (!resMatch) {
        warnings.push(`EXTRA_FILES: ignoring ${file.relPath}`);
        continue;
      }
      declared = [Number(resMatch[1]), Number(resMatch[2])];
      tierKey = `${declared[0]}x${declared[1]}`;
    }
    frames.push({
      seq: parts[0],
      tierKey,
      declared,
      timestep: Number(predMatch[1]),
      absPath: file.absPath,
      relPath: file.relPath,
    });
  }

  if (frames.length === 0) {
    throw new ValidationError('MISSING_FRAME', 'submission contains no prediction frames');
  }

  // Dimension and bit-depth checks against the declared tier (res_ dirs),
  // the dataset descriptor, or tier peers (flat layout).
  const flatSizes = new Map<string, [number, number]>();
  for (const frame of frames) {
    const head = Buffer.alloc(33);
    const fd = fs.openSync(frame.absPath, 'r');
    try {
      fs.readSync(fd, head, 0, head.length, 0);
    } finally {
      fs.closeSync(fd);
    }
    const context = `${frame.seq} t${frame.timestep} (${frame.tierKey})`;
    const info = readPngInfo(head, context);
    requireEightBitRgb(info, context);
    const expected =
      frame.declared ?? flatSizes.get(frame.tierKey) ?? ([info.width, info.height] as [number, number]);
    if (!frame.declared && !flatSizes.has(frame.tierKey)) {
      flatSizes.set(frame.tierKey, expected);
    }
    if (info.width !== expected[0] || info.height !== expected[1]) {
      throw new ValidationError(
        'BAD_DIMENSIONS',
        `${context}: ${info.width}x${info.height} does not match the ${expected[0]}x${expected[1]} tier`,
      );
    }
    if (descriptor && frame.declared) {
      const known = Object.values(descriptor.tiers).some(
        ([w, h]) => w === frame.declared![0] && h === frame.declared![1],
      );
      if (!known) {
        warnings.push(`EXTRA_FILES: ignoring ${frame.relPath} (unknown tier)`);
      }
    }
  }

  // Coverage: every sequence must provide every (tier, timestep) that any
  // sequence provides; with a descriptor, the dataset's sequence list wins.
  const sequences = descriptor
    ? descriptor.sequences
    : [...new Set(frames.map((f) => f.seq))].sort();
  const tierKeys = [...new Set(frames.map((f) => f.tierKey))].sort();
  const timesteps = [...new Set(frames.map((f) => f.timestep))].sort((a, b) => a - b);
  const have = new Set(frames.map((f) => `${f.seq}|${f.tierKey}|${f.timestep}`));
  for (const seq of sequences) {
    for (const tier of tierKeys) {
      for (const t of timesteps) {
        if (!have.has(`${seq}|${tier}|${t}`)) {
          throw new ValidationError('MISSING_FRAME', `${seq} t${t} (${tier}) is not in the submission`);
        }
      }
    }
  }

  return {
    meta,
    sequences,
    timesteps,
    tierSizes: tierKeys,
    warnings,
    files,
  };
}
