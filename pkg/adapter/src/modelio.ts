import fs from "node:fs";
import path from "node:path";
import * as tf from "@tensorflow/tfjs";

// The browser-oriented tfjs build ships no filesystem IO handlers, so the
// bundled model is stored as model.json (topology + weight specs) next to
// weights.bin and moved through custom save/load handlers.

const MODEL_JSON = "model.json";
const WEIGHTS_BIN = "weights.bin";

export function fileSaveHandler(dir: string): tf.io.IOHandler {
  return {
    async save(artifacts: tf.io.ModelArtifacts): Promise<tf.io.SaveResult> {
      fs.mkdirSync(dir, { recursive: true });
      const weightData = artifacts.weightData as ArrayBuffer;
      fs.writeFileSync(
        path.join(dir, MODEL_JSON),
        JSON.stringify({
          modelTopology: artifacts.modelTopology,
          weightSpecs: artifacts.weightSpecs,
        }),
      );
      fs.writeFileSync(path.join(dir, WEIGHTS_BIN), Buffer.from(weightData));
      return {
        modelArtifactsInfo: {
          dateSaved: new Date(),
          modelTopologyType: "JSON",
        },
      };
    },
  };
}

export function fileLoadHandler(dir: string): tf.io.IOHandler {
  return {
    async load(): Promise<tf.io.ModelArtifacts> {
      const doc = JSON.parse(fs.readFileSync(path.join(dir, MODEL_JSON), "utf8"));
      const weights = fs.readFileSync(path.join(dir, WEIGHTS_BIN));
      return {
        modelTopology: doc.modelTopology,
        weightSpecs: doc.weightSpecs,
        weightData: weights.buffer.slice(
          weights.byteOffset,
          weights.byteOffset + weights.byteLength,
        ),
      };
    },
  };
}
