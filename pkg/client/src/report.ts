/** Parse and pretty-print the server's versioned key/value report. */

export interface Report {
  schemaVersion: number;
  method: string;
  ensembling: boolean;
  toolkit: string;
  values: Map<string, number>;
}

export function parseReport(text: string): Report {
  const lines = text.split('\n').filter((ln) => ln.trim() !== '');
  if (lines.length === 0 || !lines[0].startsWith('fibench-report ')) {
    throw new Error('not a fibench report');
  }
  const schemaVersion = Number(lines[0].split(' ')[1]);
  if (schemaVersion !== 1) {
    throw new Error(`unsupported report schema version ${schemaVersion}`);
  }
  const report: Report = {
    schemaVersion,
    method: '',
    ensembling: false,
    toolkit: '',
    values: new Map(),
  };
  for (const line of lines.slice(1)) {
    const sep = line.indexOf(' ');
    const key = line.slice(0, sep);
    const raw = line.slice(sep + 1);
    if (key === 'method') report.method = raw;
    else if (key === 'toolkit') report.toolkit = raw;
    else if (key === 'ensembling') report.ensembling = raw === 'true';
    else report.values.set(key, Number(raw));
  }
  return report;
}

const OCC_COLUMNS = ['all', 'occ0', 'occ1', 'occ2'] as const;

function fmt(value: number | undefined): string {
  return value === undefined ? '-' : value.toFixed(2);
}

/** Human-readable table: one row per tier with the occlusion split. */
export function printReport(report: Report): string {
  const tiers: string[] = [];
  for (const key of report.values.keys()) {
    const tier = key.split('.', 1)[0];
    if (!tiers.includes(tier)) tiers.push(tier);
  }
  const lines: string[] = [];
  lines.push(`method: ${report.method}   ensembling: ${report.ensembling ? 'yes' : 'no'}`);
  lines.push('tier   all      0-occ    1-occ    2-occ');
  const missing: string[] = [];
  for (const tier of tiers) {
    const cells = OCC_COLUMNS.map((col) => report.values.get(`${tier}.single.${col}.psnr_star`));
    if (cells.every((c) => c === undefined)) {
      missing.push(tier);
      continue;
    }
    lines.push(
      `${tier.padEnd(6)} ${cells.map((c) => fmt(c).padEnd(8)).join(' ').trimEnd()}`,
    );
  }
  const multi = [...report.values.keys()].filter((k) => k.includes('.multi.') && k.endsWith('.psnr_star'));
  if (multi.length > 0) {
    const tier = multi[0].split('.', 1)[0];
    const row = multi.map((k) => fmt(report.values.get(k)));
    lines.push(`multi-frame (${tier}): ${row.join(' ')}`);
  }
  if (missing.length > 0) {
    lines.push(`note: no single-frame metrics for tier(s) ${missing.join(', ')}`);
  }
  return lines.join('\n') + '\n';
}
