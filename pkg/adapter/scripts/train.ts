/**
 * Pretrains the bundled single-object building detector on synthetic
 * street-scene tiles (sky, ground, one boxy structure) and writes the
 * weights to model/. Run once ahead of time; the adapter only loads the
 * result at inference.
 */
import * as tf from "@tensorflow/tfjs";
import { buildNetwork, INPUT_SIZE } from "../src/model";
import { fileSaveHandler } from "../src/modelio";
import { BUNDLED_MODEL_DIR } from "../src/model";

// Deterministic LCG so the training corpus is reproducible.
let seed = 20240817;
function rand(): number {
  seed = (seed * 1103515245 + 12345) % 2147483648;
  return seed / 2147483648;
}
function uniform(lo: number, hi: number): number {
  return lo + (hi - lo) * rand();
}
function pick<T>(items: T[]): T {
  return items[Math.floor(rand() * items.length)];
}

const S = INPUT_SIZE;

type Sample = { pixels: Float32Array; target: number[] };

function fill(
  pixels: Float32Array,
  x0: number,
  y0: number,
  x1: number,
  y1: number,
  rgb: [number, number, number],
): void {
  for (let y = y0; y < y1; y++) {
    for (let x = x0; x < x1; x++) {
      const i = (y * S + x) * 3;
      pixels[i] = rgb[0];
      pixels[i + 1] = rgb[1];
      pixels[i + 2] = rgb[2];
    }
  }
}

function addNoise(pixels: Float32Array, amount: number): void {
  for (let i = 0; i < pixels.length; i++) {
    pixels[i] = Math.min(1, Math.max(0, pixels[i] + uniform(-amount, amount)));
  }
}

const SKY_COLORS: [number, number, number][] = [
  [0.43, 0.63, 0.9], [0.55, 0.7, 0.95], [0.7, 0.78, 0.88], [0.85, 0.88, 0.92],
];
const GROUND_COLORS: [number, number, number][] = [
  [0.24, 0.55, 0.24], [0.35, 0.6, 0.3], [0.45, 0.42, 0.3], [0.5, 0.5, 0.5],
];
const WALL_COLORS: [number, number, number][] = [
  [0.86, 0.08, 0.24], [0.7, 0.2, 0.15], [0.65, 0.5, 0.35],
  [0.55, 0.55, 0.6], [0.8, 0.35, 0.1], [0.3, 0.35, 0.5],
];

function jitter(rgb: [number, number, number]): [number, number, number] {
  return rgb.map((c) => Math.min(1, Math.max(0, c + uniform(-0.08, 0.08)))) as [
    number, number, number,
  ];
}

function background(): Float32Array {
  const pixels = new Float32Array(S * S * 3);
  const horizon = Math.floor(uniform(0.45, 0.75) * S);
  fill(pixels, 0, 0, S, horizon, jitter(pick(SKY_COLORS)));
  fill(pixels, 0, horizon, S, S, jitter(pick(GROUND_COLORS)));
  return pixels;
}

function positive(): Sample {
  const pixels = background();
  const w = Math.floor(uniform(0.15, 0.75) * S);
  const h = Math.floor(uniform(0.2, 0.65) * S);
  const x0 = Math.floor(uniform(0.05, 0.95) * (S - w));
  const y1 = Math.floor(uniform(0.55, 0.95) * S);
  const y0 = Math.max(0, y1 - h);
  fill(pixels, x0, y0, x0 + w, y1, jitter(pick(WALL_COLORS)));
  addNoise(pixels, 0.03);
  const cx = (x0 + w / 2) / S;
  const cy = (y0 + (y1 - y0) / 2) / S;
  return { pixels, target: [1, cx, cy, w / S, (y1 - y0) / S] };
}

function negative(): Sample {
  const kind = rand();
  let pixels: Float32Array;
  if (kind < 0.4) {
    pixels = background();
    addNoise(pixels, 0.03);
  } else if (kind < 0.8) {
    pixels = new Float32Array(S * S * 3);
    const level = pick([0, 0.25, 0.5, 0.75, 1]);
    fill(pixels, 0, 0, S, S, [level, level, level]);
    addNoise(pixels, 0.01);
  } else {
    pixels = new Float32Array(S * S * 3);
    for (let i = 0; i < pixels.length; i++) pixels[i] = rand();
  }
  return { pixels, target: [0, 0.5, 0.5, 0, 0] };
}

function detectionLoss(yTrue: tf.Tensor, yPred: tf.Tensor): tf.Tensor {
  return tf.tidy(() => {
    const objT = tf.slice(yTrue, [0, 0], [-1, 1]);
    const objP = tf.clipByValue(tf.slice(yPred, [0, 0], [-1, 1]), 1e-6, 1 - 1e-6);
    const boxT = tf.slice(yTrue, [0, 1], [-1, 4]);
    const boxP = tf.slice(yPred, [0, 1], [-1, 4]);
    const bce = tf.neg(tf.add(
      tf.mul(objT, tf.log(objP)),
      tf.mul(tf.sub(1, objT), tf.log(tf.sub(1, objP))),
    ));
    // bbox loss only on positives
    const mse = tf.mul(objT, tf.mean(tf.square(tf.sub(boxT, boxP)), 1, true));
    return tf.mean(tf.add(bce, tf.mul(4, mse)));
  });
}

async function main(): Promise<void> {
  const samples: Sample[] = [];
  for (let i = 0; i < 360; i++) samples.push(positive());
  for (let i = 0; i < 180; i++) samples.push(negative());
  // deterministic shuffle
  for (let i = samples.length - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [samples[i], samples[j]] = [samples[j], samples[i]];
  }

  const xsData = new Float32Array(samples.length * S * S * 3);
  const ysData = new Float32Array(samples.length * 5);
  samples.forEach((sample, i) => {
    xsData.set(sample.pixels, i * S * S * 3);
    ysData.set(sample.target, i * 5);
  });
  const xs = tf.tensor4d(xsData, [samples.length, S, S, 3]);
  const ys = tf.tensor2d(ysData, [samples.length, 5]);

  const model = buildNetwork();
  model.compile({ optimizer: tf.train.adam(1e-3), loss: detectionLoss });
  await model.fit(xs, ys, {
    epochs: 12,
    batchSize: 32,
    shuffle: false,
    callbacks: {
      onEpochEnd: (epoch, logs) => {
        process.stderr.write(`epoch ${epoch}: loss ${logs?.loss?.toFixed(4)}\n`);
      },
    },
  });

  await model.save(fileSaveHandler(BUNDLED_MODEL_DIR));
  process.stderr.write(`saved to ${BUNDLED_MODEL_DIR}\n`);

  // sanity check on fresh samples
  for (const [name, sample] of [
    ["positive", positive()],
    ["negative", negative()],
  ] as const) {
    const out = model.predict(
      tf.tensor4d(sample.pixels, [1, S, S, 3]),
    ) as tf.Tensor2D;
    const [obj, cx, cy, w, h] = Array.from(out.dataSync());
    process.stderr.write(
      `${name}: obj=${obj.toFixed(3)} box=(${cx.toFixed(2)},${cy.toFixed(2)},` +
        `${w.toFixed(2)},${h.toFixed(2)}) target=${JSON.stringify(sample.target)}\n`,
    );
  }
}

main().catch((err) => {
  process.stderr.write(`training failed: ${String(err)}\n`);
  process.exit(1);
});
