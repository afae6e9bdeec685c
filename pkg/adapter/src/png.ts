import fs from "node:fs";
import { PNG } from "pngjs";

export interface RgbImage {
  width: number;
  height: number;
  /** Row-major RGB bytes, length width * height * 3. */
  data: Uint8Array;
}

export function readPng(path: string): RgbImage {
  const png = PNG.sync.read(fs.readFileSync(path));
  const data = new Uint8Array(png.width * png.height * 3);
  for (let i = 0; i < png.width * png.height; i++) {
    data[i * 3] = png.data[i * 4];
    data[i * 3 + 1] = png.data[i * 4 + 1];
    data[i * 3 + 2] = png.data[i * 4 + 2];
  }
  return { width: png.width, height: png.height, data };
}

export function writePng(path: string, image: RgbImage): void {
  const png = new PNG({ width: image.width, height: image.height });
  for (let i = 0; i < image.width * image.height; i++) {
    png.data[i * 4] = image.data[i * 3];
    png.data[i * 4 + 1] = image.data[i * 3 + 1];
    png.data[i * 4 + 2] = image.data[i * 3 + 2];
    png.data[i * 4 + 3] = 255;
  }
  fs.writeFileSync(path, PNG.sync.write(png));
}

/** Nearest-neighbor resize to size x size, normalized to [0, 1]. */
export function resizeToInput(image: RgbImage, size: number): Float32Array {
  const out = new Float32Array(size * size * 3);
  for (let y = 0; y < size; y++) {
    const sy = Math.min(image.height - 1, Math.floor(((y + 0.5) * image.height) / size));
    for (let x = 0; x < size; x++) {
      const sx = Math.min(image.width - 1, Math.floor(((x + 0.5) * image.width) / size));
      const src = (sy * image.width + sx) * 3;
      const dst = (y * size + x) * 3;
      out[dst] = image.data[src] / 255;
      out[dst + 1] = image.data[src + 1] / 255;
      out[dst + 2] = image.data[src + 2] / 255;
    }
  }
  return out;
}
