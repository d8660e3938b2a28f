/**
 * Batch extraction: frames in, one N x 256 TSM1 matrix out.
 */

import * as tf from '@tensorflow/tfjs';

import { decodeFrame, frameToTensor, listFrames } from './images.js';
import { buildEncoder, EMBED_DIM, EncoderKind, WEIGHT_SEED } from './model.js';
import { Matrix, writeMatrix } from './tsm.js';

export const DEFAULT_SIZE = 224;
export const DEFAULT_BATCH = 8;

export interface EmbedJob {
  encoder: EncoderKind;
  input: string;
  output: string;
  /** Frames are resized to size x size before encoding. */
  size: number;
  batch: number;
  seed: number;
}

export interface ExtractResult {
  frames: number;
  output: string;
}

const modelCache = new Map<string, tf.LayersModel>();

/** Build (or reuse) the frozen encoder for one (kind, seed) pair. */
export function encoderFor(kind: EncoderKind, seed: number = WEIGHT_SEED): tf.LayersModel {
  const key = `${kind}:${seed}`;
  let model = modelCache.get(key);
  if (model == null) {
    model = buildEncoder(kind, seed);
    modelCache.set(key, model);
  }
  return model;
}

/** Encode a stack of frames; rows follow the input order. */
export function embedFrames(
  model: tf.LayersModel,
  paths: string[],
  size: number,
  batch: number,
): Float32Array {
  const out = new Float32Array(paths.length * EMBED_DIM);
  for (let start = 0; start < paths.length; start += batch) {
    const chunk = paths.slice(start, start + batch);
    const rows = tf.tidy(() => {
      const frames = chunk.map((p, i) => frameToTensor(decodeFrame(p, start + i), size));
      const stacked = tf.stack(frames) as tf.Tensor4D;
      return model.predict(stacked) as tf.Tensor2D;
    });
    out.set(rows.dataSync() as Float32Array, start * EMBED_DIM);
    rows.dispose();
  }
  return out;
}

export function runExtraction(job: EmbedJob): ExtractResult {
  const paths = listFrames(job.input);
  const model = encoderFor(job.encoder, job.seed);
  const data = embedFrames(model, paths, job.size, job.batch);
  const mat: Matrix = { rows: paths.length, cols: EMBED_DIM, data };
  writeMatrix(job.output, mat);
  return { frames: paths.length, output: job.output };
}
