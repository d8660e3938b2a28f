/**
 * Frame loading: directory listing, PNG/JPEG decoding, tensor conversion.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import * as tf from '@tensorflow/tfjs';
import * as jpeg from 'jpeg-js';
import { PNG } from 'pngjs';

export class ExtractionError extends Error {}
export class UsageError extends Error {}

const IMAGE_EXTS = new Set(['.png', '.jpg', '.jpeg']);
const VIDEO_EXTS = new Set(['.mp4', '.avi', '.mov', '.mkv', '.webm']);

export interface DecodedFrame {
  width: number;
  height: number;
  /** RGBA bytes, 4 per pixel. */
  rgba: Uint8Array;
}

/** Sorted image paths under a directory; rejects video inputs up front. */
export function listFrames(input: string): string[] {
  const stat = fs.statSync(input, { throwIfNoEntry: false });
  if (stat == null) {
    throw new UsageError(`input not found: ${input}`);
  }
  if (stat.isFile()) {
    if (VIDEO_EXTS.has(path.extname(input).toLowerCase())) {
      throw new UsageError(
        `video input is not supported; extract frames to an image directory first: ${input}`,
      );
    }
    throw new UsageError(`input must be a directory of frames: ${input}`);
  }
  const frames = fs
    .readdirSync(input)
    .filter((name) => IMAGE_EXTS.has(path.extname(name).toLowerCase()))
    .sort()
    .map((name) => path.join(input, name));
  if (frames.length === 0) {
    throw new UsageError(`no .png/.jpg/.jpeg frames in ${input}`);
  }
  return frames;
}

export function decodeFrame(filePath: string, frameIndex: number): DecodedFrame {
  let blob: Buffer;
  try {
    blob = fs.readFileSync(filePath);
  } catch (err) {
    throw new ExtractionError(
      `frame ${frameIndex} (${filePath}): ${(err as Error).message}`,
    );
  }
  try {
    if (path.extname(filePath).toLowerCase() === '.png') {
      const png = PNG.sync.read(blob);
      return { width: png.width, height: png.height, rgba: new Uint8Array(png.data) };
    }
    const img = jpeg.decode(blob, { useTArray: true });
    return { width: img.width, height: img.height, rgba: new Uint8Array(img.data) };
  } catch (err) {
    throw new ExtractionError(
      `frame ${frameIndex} (${filePath}) is not decodable: ${(err as Error).message}`,
    );
  }
}

/** RGB tensor in [-1, 1], bilinearly resized to size x size. */
export function frameToTensor(frame: DecodedFrame, size: number): tf.Tensor3D {
  return tf.tidy(() => {
    const { width, height, rgba } = frame;
    const rgb = new Float32Array(width * height * 3);
    for (let p = 0; p < width * height; p++) {
      rgb[p * 3] = rgba[p * 4] / 127.5 - 1;
      rgb[p * 3 + 1] = rgba[p * 4 + 1] / 127.5 - 1;
      rgb[p * 3 + 2] = rgba[p * 4 + 2] / 127.5 - 1;
    }
    const img = tf.tensor3d(rgb, [height, width, 3]);
    if (height === size && width === size) {
      return img;
    }
    return tf.image.resizeBilinear(img, [size, size]);
  });
}
