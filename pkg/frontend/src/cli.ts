#!/usr/bin/env node
/**
 * embed-extract: encode a directory of frames into an N x 256 TSM1 matrix.
 *
 *   embed-extract --encoder tactile_resnet50|visual_resnet18_gn \
 *       --in <frame dir> --out <file.tsm1> [--size N] [--batch N] [--seed N]
 */

import * as path from 'node:path';
import { parseArgs } from 'node:util';

import { DEFAULT_BATCH, DEFAULT_SIZE, EmbedJob, runExtraction } from './extract.js';
import { ExtractionError, UsageError } from './images.js';
import { TOOL_VERSION, writeRunManifest } from './manifest.js';
import { EncoderKind, ENCODER_KINDS, WEIGHT_SEED } from './model.js';
import { FormatError } from './tsm.js';

const USAGE = `usage: embed-extract --encoder {${ENCODER_KINDS.join(',')}} --in DIR --out FILE.tsm1
                     [--size N] [--batch N] [--seed N] [--version] [--help]`;

function parsePositive(text: string | undefined, fallback: number, flag: string): number {
  if (text === undefined) {
    return fallback;
  }
  const value = Number(text);
  if (!Number.isInteger(value) || value < 1) {
    throw new UsageError(`${flag} must be a positive integer, got ${text}`);
  }
  return value;
}

export function parseJob(argv: string[]): EmbedJob | 'version' | 'help' {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      options: {
        encoder: { type: 'string' },
        in: { type: 'string' },
        out: { type: 'string' },
        size: { type: 'string' },
        batch: { type: 'string' },
        seed: { type: 'string' },
        version: { type: 'boolean', default: false },
        help: { type: 'boolean', default: false },
      },
      allowPositionals: false,
    });
  } catch (err) {
    throw new UsageError((err as Error).message);
  }
  const v = parsed.values;
  if (v.help) {
    return 'help';
  }
  if (v.version) {
    return 'version';
  }
  if (v.encoder === undefined || v.in === undefined || v.out === undefined) {
    throw new UsageError('--encoder, --in, and --out are required');
  }
  if (!ENCODER_KINDS.includes(v.encoder as EncoderKind)) {
    throw new UsageError(
      `unknown encoder ${v.encoder}; choose from ${ENCODER_KINDS.join(', ')}`,
    );
  }
  return {
    encoder: v.encoder as EncoderKind,
    input: v.in,
    output: v.out,
    size: parsePositive(v.size, DEFAULT_SIZE, '--size'),
    batch: parsePositive(v.batch, DEFAULT_BATCH, '--batch'),
    seed: v.seed === undefined ? WEIGHT_SEED : parsePositive(v.seed, WEIGHT_SEED, '--seed'),
  };
}

export function main(argv: string[]): number {
  const started = Date.now();
  let job: EmbedJob | 'version' | 'help';
  try {
    job = parseJob(argv);
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`embed-extract: ${err.message}`);
      console.error(USAGE);
      return 2;
    }
    throw err;
  }
  if (job === 'help') {
    console.log(USAGE);
    return 0;
  }
  if (job === 'version') {
    console.log(`embed-extract ${TOOL_VERSION}`);
    return 0;
  }
  try {
    const result = runExtraction(job);
    writeRunManifest(
      path.dirname(path.resolve(job.output)),
      'embed-extract',
      {
        encoder: job.encoder,
        size: job.size,
        batch: job.batch,
      },
      [job.input],
      [job.output],
      job.seed,
      started,
    );
    console.log(`wrote ${result.output} (${result.frames} x 256)`);
    return 0;
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`embed-extract: ${err.message}`);
      return 2;
    }
    if (err instanceof ExtractionError || err instanceof FormatError) {
      console.error(`embed-extract: ${err.message}`);
      return 1;
    }
    if (err instanceof Error && 'code' in err) {
      console.error(`embed-extract: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${path.resolve(process.argv[1])}`).href;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
