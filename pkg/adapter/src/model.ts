import path from "node:path";
import * as tf from "@tensorflow/tfjs";
import { fileLoadHandler } from "./modelio";
import { resizeToInput, RgbImage } from "./png";

export const INPUT_SIZE = 24;
export const MODEL_CLASS = "structure";

export interface RawDetection {
  bbox_xywh: [number, number, number, number];
  score: number;
  label: string;
}

export interface DetectionModel {
  name: string;
  detect(image: RgbImage): RawDetection[];
}

export const BUNDLED_MODEL_DIR = path.join(__dirname, "..", "model");

/**
 * Single-object detector head: [objectness, cx, cy, w, h], all sigmoid,
 * bbox normalized to the unit square.
 */
export function buildNetwork(): tf.LayersModel {
  const model = tf.sequential();
  model.add(tf.layers.conv2d({
    inputShape: [INPUT_SIZE, INPUT_SIZE, 3],
    filters: 6, kernelSize: 3, activation: "relu", padding: "same",
  }));
  model.add(tf.layers.maxPooling2d({ poolSize: 2 }));
  model.add(tf.layers.conv2d({
    filters: 12, kernelSize: 3, activation: "relu", padding: "same",
  }));
  model.add(tf.layers.maxPooling2d({ poolSize: 2 }));
  model.add(tf.layers.conv2d({
    filters: 24, kernelSize: 3, activation: "relu", padding: "same",
  }));
  model.add(tf.layers.maxPooling2d({ poolSize: 2 }));
  model.add(tf.layers.flatten());
  model.add(tf.layers.dense({ units: 32, activation: "relu" }));
  model.add(tf.layers.dense({ units: 5, activation: "sigmoid" }));
  return model;
}

export async function loadLocalModel(dir: string): Promise<DetectionModel> {
  const network = await tf.loadLayersModel(fileLoadHandler(dir));
  return {
    name: `local:${path.basename(dir)}`,
    detect(image: RgbImage): RawDetection[] {
      const [obj, cx, cy, w, h] = tf.tidy(() => {
        const input = tf.tensor4d(resizeToInput(image, INPUT_SIZE), [
          1, INPUT_SIZE, INPUT_SIZE, 3,
        ]);
        const out = network.predict(input) as tf.Tensor2D;
        return Array.from(out.dataSync());
      });
      const boxW = w * image.width;
      const boxH = h * image.height;
      let x0 = cx * image.width - boxW / 2;
      let y0 = cy * image.height - boxH / 2;
      x0 = Math.max(0, Math.min(image.width - 1, x0));
      y0 = Math.max(0, Math.min(image.height - 1, y0));
      const bw = Math.max(1, Math.min(image.width - x0, boxW));
      const bh = Math.max(1, Math.min(image.height - y0, boxH));
      return [{
        bbox_xywh: [Math.round(x0), Math.round(y0), Math.round(bw), Math.round(bh)],
        score: obj,
        label: MODEL_CLASS,
      }];
    },
  };
}
