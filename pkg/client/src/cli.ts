#!/usr/bin/env node
/**
 * fibench-submit --server URL --method NAME --ensemble {true,false} DIR
 *
 * Exit codes mirror the benchmark tooling: 0 success, 2 validation
 * failure, 3 connection/dataset error, 4 evaluation failure.
 */

import * as fs from 'node:fs';

import { uploadAndWait } from './client.js';
import { ConnectionError, ServerError, ValidationError } from './errors.js';
import { pack } from './pack.js';
import { parseReport, printReport } from './report.js';
import { readDatasetDescriptor } from './validate.js';

interface Args {
  server: string;
  method: string;
  ensemble: boolean;
  dir: string;
  dataset?: string;
  out?: string;
  timeout: number;
}

function usage(): never {
  console.error(
    'usage: fibench-submit --server URL --method NAME --ensemble {true,false} ' +
      '[--dataset EXPORT_DIR] [--out REPORT.txt] [--timeout SECONDS] DIR',
  );
  process.exit(2);
}

function parseArgs(argv: string[]): Args {
  const args: Partial<Args> = { timeout: 600 };
  const positional: string[] = [];
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) usage();
      return argv[i];
    };
    if (arg === '--server') args.server = next();
    else if (arg === '--method') args.method = next();
    else if (arg === '--ensemble') {
      const value = next();
      if (value !== 'true' && value !== 'false') usage();
      args.ensemble = value === 'true';
    } else if (arg === '--dataset') args.dataset = next();
    else if (arg === '--out') args.out = next();
    else if (arg === '--timeout') args.timeout = Number(next());
    else if (arg.startsWith('--')) usage();
    else positional.push(arg);
  }
  if (
    positional.length !== 1 ||
    args.server === undefined ||
    args.method === undefined ||
    args.ensemble === undefined
  ) {
    usage();
  }
  args.dir = positional[0];
  return args as Args;
}

async function main(): Promise<number> {
  const args = parseArgs(process.argv.slice(2));
  try {
    const descriptor = args.dataset ? readDatasetDescriptor(args.dataset) : undefined;
    const packed = pack(args.dir, { method: args.method, ensembling: args.ensemble }, descriptor);
    for (const warning of packed.warnings) {
      console.error(warning);
    }
    console.error(`packed ${packed.archive.length} bytes, digest ${packed.digest}`);
    const reportText = await uploadAndWait(
      { server: args.server, method: args.method, ensembling: args.ensemble, timeoutSeconds: args.timeout },
      packed.archive,
    );
    if (args.out) {
      fs.writeFileSync(args.out, reportText);
      console.error(`report written to ${args.out}`);
    }
    process.stdout.write(printReport(parseReport(reportText)));
    return 0;
  } catch (err) {
    if (err instanceof ValidationError) {
      console.error(`validation failure: ${err.message}`);
      return 2;
    }
    if (err instanceof ServerError) {
      if (err.code === 'EVALUATION_FAILED') {
        console.error(`evaluation failed: ${err.message}`);
        return 4;
      }
      console.error(`rejected by server: ${err.message}`);
      return 2;
    }
    if (err instanceof ConnectionError) {
      console.error(`connection error: ${err.message}`);
      return 3;
    }
    throw err;
  }
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(err);
    process.exit(1);
  },
);
