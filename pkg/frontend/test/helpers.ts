import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';

import { PNG } from 'pngjs';

/** Deterministic colorful test frame, distinct per index. */
export function writeFrame(dir: string, name: string, size: number, salt: number): string {
  const png = new PNG({ width: size, height: size });
  for (let p = 0; p < size * size; p++) {
    png.data[p * 4] = (p * 7 + salt * 31) % 256;
    png.data[p * 4 + 1] = (p * 13 + salt * 17) % 256;
    png.data[p * 4 + 2] = (p * 3 + salt * 11) % 256;
    png.data[p * 4 + 3] = 255;
  }
  const target = path.join(dir, name);
  fs.writeFileSync(target, PNG.sync.write(png));
  return target;
}

export function writeGrayFrame(dir: string, name: string, size: number): string {
  const png = new PNG({ width: size, height: size });
  png.data.fill(128);
  for (let p = 0; p < size * size; p++) {
    png.data[p * 4 + 3] = 255;
  }
  const target = path.join(dir, name);
  fs.writeFileSync(target, PNG.sync.write(png));
  return target;
}

export function frameDir(prefix: string, count: number, size = 40): string {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), prefix));
  for (let k = 0; k < count; k++) {
    writeFrame(dir, `frame${String(k).padStart(3, '0')}.png`, size, k);
  }
  return dir;
}
