/**
 * Run manifest: the same JSON sidecar the segmentation CLI writes, so one
 * report format covers extraction and training runs alike.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

export const TOOL_VERSION = '0.1.0';

export interface RunManifest {
  command: string;
  config: Record<string, unknown>;
  inputs: string[];
  outputs: string[];
  seed: number;
  tool_version: string;
  duration_s: number;
}

function sortKeysDeep(value: unknown): unknown {
  if (Array.isArray(value)) {
    return value.map(sortKeysDeep);
  }
  if (value !== null && typeof value === 'object') {
    return Object.fromEntries(
      Object.entries(value as Record<string, unknown>)
        .sort(([a], [b]) => (a < b ? -1 : 1))
        .map(([k, v]) => [k, sortKeysDeep(v)]),
    );
  }
  return value;
}

export function writeRunManifest(
  outDir: string,
  command: string,
  config: Record<string, unknown>,
  inputs: string[],
  outputs: string[],
  seed: number,
  startedMs: number,
): void {
  const manifest: RunManifest = {
    command,
    config,
    inputs: [...inputs].sort(),
    outputs: [...outputs].sort(),
    seed,
    tool_version: TOOL_VERSION,
    duration_s: Math.round(Date.now() - startedMs) / 1000,
  };
  const target = path.join(outDir, 'run_manifest.json');
  const tmp = target + '.tmp';
  fs.mkdirSync(outDir, { recursive: true });
  fs.writeFileSync(tmp, JSON.stringify(sortKeysDeep(manifest), null, 2) + '\n');
  fs.renameSync(tmp, target);
}
