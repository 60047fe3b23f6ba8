import * as fs from 'node:fs';
import * as path from 'node:path';

import { ValidationError } from './errors.js';
import { DatasetDescriptor, SubmissionMeta, validateSubmissionDir } from './validate.js';
import { buildZip, sha256Hex, ZipEntry } from './zip.js';

export interface PackedSubmission {
  archive: Buffer;
  digest: string;
  meta: SubmissionMeta;
  warnings: string[];
}

/**
 * Validate a results directory and build a deterministic archive.
 *
 * Entries are sorted and timestamp-free, so packing the same directory
 * twice yields the same digest on any machine.  When the directory has
 * no submission.json and `meta` is given, a synthesized one goes into
 * the archive (disclosure still has to be explicit somewhere).
 */
export function pack(
  dir: string,
  meta?: SubmissionMeta,
  descriptor?: DatasetDescriptor,
): PackedSubmission {
  const layout = validateSubmissionDir(dir, descriptor, meta);
  if (meta) {
    if (meta.method !== layout.meta.method || meta.ensembling !== layout.meta.ensembling) {
      throw new ValidationError(
        'METADATA_MISMATCH',
        `configured ${meta.method}/${meta.ensembling} but the directory declares ` +
          `${layout.meta.method}/${layout.meta.ensembling}`,
      );
    }
  }

  const entries: ZipEntry[] = layout.files.map((f) => ({
    path: f.relPath,
    data: fs.readFileSync(f.absPath),
  }));
  if (!fs.existsSync(path.join(dir, 'submission.json'))) {
    entries.push({
      path: 'submission.json',
      data: Buffer.from(
        JSON.stringify({ ensembling: layout.meta.ensembling, method: layout.meta.method }) + '\n',
        'utf8',
      ),
    });
  }
  const archive = buildZip(entries);
  return {
    archive,
    digest: sha256Hex(archive),
    meta: layout.meta,
    warnings: layout.warnings,
  };
}
