/**
 * End-to-end round trip against the real benchmark tooling: generate a
 * tiny dataset, build a baseline submission, run the submission server,
 * and check that pack + upload + wait reproduces the local evaluation
 * byte for byte.  Requires the Python package to be installed
 * (FIBENCH_PYTHON overrides the interpreter).
 */

import assert from 'node:assert/strict';
import { ChildProcess, spawn, spawnSync } from 'node:child_process';
import * as fs from 'node:fs';
import * as net from 'node:net';
import * as os from 'node:os';
import * as path from 'node:path';
import { after, before, test } from 'node:test';

import { uploadAndWait } from '../client.js';
import { ServerError, ValidationError } from '../errors.js';
import { pack } from '../pack.js';
import { parseReport, printReport } from '../report.js';
import { validateSubmissionDir } from '../validate.js';
import { buildZip, ZipEntry } from '../zip.js';

const PYTHON = process.env.FIBENCH_PYTHON ?? 'python3';

function runPython(args: string[]): void {
  const result = spawnSync(PYTHON, ['-m', 'fibench.cli', ...args], { encoding: 'utf8' });
  assert.equal(result.status, 0, `fibench ${args[0]} failed: ${result.stderr}`);
}

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = net.createServer();
    srv.listen(0, '127.0.0.1', () => {
      const port = (srv.address() as net.AddressInfo).port;
      srv.close((err) => (err ? reject(err) : resolve(port)));
    });
  });
}

function walkEntries(dir: string, prefix = ''): ZipEntry[] {
  const out: ZipEntry[] = [];
  for (const name of fs.readdirSync(dir).sort()) {
    const abs = path.join(dir, name);
    const rel = prefix ? `${prefix}/${name}` : name;
    if (fs.statSync(abs).isDirectory()) out.push(...walkEntries(abs, rel));
    else out.push({ path: rel, data: fs.readFileSync(abs) });
  }
  return out;
}

/** Archive a directory with no validation (for corrupted fixtures). */
function rawArchive(dir: string): Buffer {
  return buildZip(walkEntries(dir));
}

const work = fs.mkdtempSync(path.join(os.tmpdir(), 'fibench-client-'));
const datasetDir = path.join(work, 'dataset');
const submissionDir = path.join(work, 'submission');
const reportFile = path.join(work, 'report.txt');
let server: ChildProcess | null = null;
let serverUrl = '';

before(async () => {
  runPython(['generate', '--preset', 'mini', '--seed', '99', '--count', '2', '--out', datasetDir]);
  runPython(['baseline', '--mode', 'blend', '--dataset', datasetDir, '--out', submissionDir]);
  runPython([
    'evaluate', '--dataset', datasetDir, '--submission', submissionDir, '--out', reportFile,
  ]);

  const port = await freePort();
  serverUrl = `http://127.0.0.1:${port}`;
  server = spawn(
    PYTHON,
    [
      '-m', 'fibench.cli', 'serve',
      '--dataset', datasetDir,
      '--storage', path.join(work, 'storage'),
      '--port', String(port),
    ],
    { stdio: ['ignore', 'pipe', 'pipe'] },
  );
  await new Promise<void>((resolve, reject) => {
    server!.stdout!.once('data', (chunk: Buffer) => {
      chunk.toString().includes('listening') ? resolve() : reject(new Error(chunk.toString()));
    });
    server!.once('exit', (code) => reject(new Error(`server exited early (${code})`)));
  });
});

after(() => {
  server?.kill('SIGTERM');
  fs.rmSync(work, { recursive: true, force: true });
});

test('pack + upload + wait reproduces the local evaluation byte for byte', async () => {
  const packed = pack(submissionDir, { method: 'baseline-blend', ensembling: false });
  const remote = await uploadAndWait(
    { server: serverUrl, method: 'baseline-blend', ensembling: false, timeoutSeconds: 120 },
    packed.archive,
  );
  const local = fs.readFileSync(reportFile, 'utf8');
  assert.equal(remote, local);
  const table = printReport(parseReport(remote));
  assert.match(table, /baseline-blend/);
});

test('identical directories pack to the same digest', () => {
  const a = pack(submissionDir);
  const b = pack(submissionDir);
  assert.equal(a.digest, b.digest);
});

test('server rejection surfaces its code before any retry loop', async () => {
  const broken = path.join(work, 'noflag');
  fs.cpSync(submissionDir, broken, { recursive: true });
  fs.writeFileSync(path.join(broken, 'submission.json'), JSON.stringify({ method: 'x' }));
  await assert.rejects(
    uploadAndWait(
      { server: serverUrl, method: 'x', ensembling: false, timeoutSeconds: 60 },
      rawArchive(broken),
    ),
    (err: unknown) => err instanceof ServerError && err.code === 'NO_ENSEMBLE_FLAG',
  );
});

test('local pre-validation matches server codes on corrupted fixtures', async () => {
  interface Fixture {
    name: string;
    corrupt: (dir: string) => void;
    expected: string;
  }
  const tierDir = (dir: string, seq: string) =>
    path.join(dir, seq, fs.readdirSync(path.join(dir, seq)).filter((n) => n.startsWith('res_'))[0]);

  const fixtures: Fixture[] = [
    {
      name: 'missing frame',
      corrupt: (dir) => fs.rmSync(path.join(tierDir(dir, 'seq_0000'), 'pred_t4.png')),
      expected: 'MISSING_FRAME',
    },
    {
      name: 'wrong resolution',
      corrupt: (dir) => {
        // borrow a frame from a smaller tier
        const seq = path.join(dir, 'seq_0001');
        const tiers = fs.readdirSync(seq).filter((n) => n.startsWith('res_')).sort();
        fs.copyFileSync(
          path.join(seq, tiers[0], 'pred_t2.png'),
          path.join(seq, tiers[1], 'pred_t2.png'),
        );
      },
      expected: 'BAD_DIMENSIONS',
    },
    {
      name: 'wrong bit depth',
      corrupt: (dir) => {
        const occ = fs
          .readdirSync(path.join(datasetDir, 'seq_0000'), { recursive: true })
          .map(String)
          .find((p) => p.endsWith('occ_t3.png'))!;
        fs.copyFileSync(
          path.join(datasetDir, 'seq_0000', occ),
          path.join(tierDir(dir, 'seq_0000'), 'pred_t3.png'),
        );
      },
      expected: 'BAD_BITDEPTH',
    },
    {
      name: 'undisclosed ensembling',
      corrupt: (dir) =>
        fs.writeFileSync(path.join(dir, 'submission.json'), JSON.stringify({ method: 'x' })),
      expected: 'NO_ENSEMBLE_FLAG',
    },
    {
      name: 'stray file',
      corrupt: (dir) => fs.writeFileSync(path.join(dir, 'seq_0000', 'notes.txt'), 'scratch'),
      expected: 'EXTRA_FILES',
    },
  ];

  for (const fixture of fixtures) {
    const dir = path.join(work, `fixture-${fixture.expected}-${fixtures.indexOf(fixture)}`);
    fs.cpSync(submissionDir, dir, { recursive: true });
    fixture.corrupt(dir);

    // Local verdict.
    let localCode = 'OK';
    let localWarnings: string[] = [];
    try {
      localWarnings = validateSubmissionDir(dir).warnings;
    } catch (err) {
      if (!(err instanceof ValidationError)) throw err;
      localCode = err.code;
    }

    // Server verdict on the same bytes.
    const form = new FormData();
    form.append('archive', new Blob([new Uint8Array(rawArchive(dir))]), 'results.zip');
    const resp = await fetch(`${serverUrl}/api/v1/submissions`, { method: 'POST', body: form });
    const doc = (await resp.json()) as { error?: string; warnings?: string[] };

    if (fixture.expected === 'EXTRA_FILES') {
      assert.equal(localCode, 'OK', fixture.name);
      assert.ok(localWarnings.some((w) => w.includes('EXTRA_FILES')), fixture.name);
      assert.ok([200, 201].includes(resp.status), fixture.name);
      assert.ok(doc.warnings!.some((w) => w.includes('EXTRA_FILES')), fixture.name);
    } else {
      assert.equal(localCode, fixture.expected, `local ${fixture.name}`);
      assert.equal(resp.status, 422, `server status ${fixture.name}`);
      assert.equal(doc.error, fixture.expected, `server ${fixture.name}`);
    }
  }
});
