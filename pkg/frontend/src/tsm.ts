/**
 * TSM1 binary matrix files.
 *
 * Layout (little-endian): magic `TSM1`, u32 rows, u32 cols, u8 dtype code
 * (1 = float32, 2 = float64), then the row-major payload. The segmentation
 * toolkit reads embeddings from this format, so the file is the whole
 * language boundary.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

export const MAGIC = 'TSM1';
export const HEADER_BYTES = 13;

export const DTYPE_FLOAT32 = 1;
export const DTYPE_FLOAT64 = 2;

export class FormatError extends Error {}

export interface Matrix {
  rows: number;
  cols: number;
  /** Row-major values, length rows * cols. */
  data: Float32Array | Float64Array;
}

/** Serialize a row-major matrix; Float32Array input stays float32. */
export function packMatrix(mat: Matrix): Buffer {
  const { rows, cols, data } = mat;
  if (!Number.isInteger(rows) || !Number.isInteger(cols) || rows < 0 || cols < 0) {
    throw new FormatError(`bad shape ${rows}x${cols}`);
  }
  if (data.length !== rows * cols) {
    throw new FormatError(`${data.length} values for ${rows}x${cols} matrix`);
  }
  const isF32 = data instanceof Float32Array;
  const itemBytes = isF32 ? 4 : 8;
  const buf = Buffer.alloc(HEADER_BYTES + rows * cols * itemBytes);
  buf.write(MAGIC, 0, 'ascii');
  buf.writeUInt32LE(rows, 4);
  buf.writeUInt32LE(cols, 8);
  buf.writeUInt8(isF32 ? DTYPE_FLOAT32 : DTYPE_FLOAT64, 12);
  for (let i = 0; i < data.length; i++) {
    if (isF32) {
      buf.writeFloatLE(data[i], HEADER_BYTES + i * 4);
    } else {
      buf.writeDoubleLE(data[i], HEADER_BYTES + i * 8);
    }
  }
  return buf;
}

export function unpackMatrix(blob: Buffer): Matrix {
  if (blob.length < HEADER_BYTES) {
    throw new FormatError('TSM1 blob shorter than header');
  }
  if (blob.toString('ascii', 0, 4) !== MAGIC) {
    throw new FormatError(`bad magic, expected ${MAGIC}`);
  }
  const rows = blob.readUInt32LE(4);
  const cols = blob.readUInt32LE(8);
  const code = blob.readUInt8(12);
  if (code !== DTYPE_FLOAT32 && code !== DTYPE_FLOAT64) {
    throw new FormatError(`unknown dtype code ${code}`);
  }
  const itemBytes = code === DTYPE_FLOAT32 ? 4 : 8;
  const need = HEADER_BYTES + rows * cols * itemBytes;
  if (blob.length !== need) {
    throw new FormatError(`payload size ${blob.length} != expected ${need}`);
  }
  const data =
    code === DTYPE_FLOAT32
      ? new Float32Array(rows * cols)
      : new Float64Array(rows * cols);
  for (let i = 0; i < data.length; i++) {
    data[i] =
      code === DTYPE_FLOAT32
        ? blob.readFloatLE(HEADER_BYTES + i * 4)
        : blob.readDoubleLE(HEADER_BYTES + i * 8);
  }
  return { rows, cols, data };
}

/** Write atomically: temp file in the same directory, then rename. */
export function writeMatrix(filePath: string, mat: Matrix): void {
  const tmp = filePath + '.tmp';
  fs.mkdirSync(path.dirname(path.resolve(filePath)), { recursive: true });
  fs.writeFileSync(tmp, packMatrix(mat));
  fs.renameSync(tmp, filePath);
}

export function readMatrix(filePath: string): Matrix {
  let blob: Buffer;
  try {
    blob = fs.readFileSync(filePath);
  } catch (err) {
    throw new FormatError(`cannot read ${filePath}: ${(err as Error).message}`);
  }
  return unpackMatrix(blob);
}
