#!/usr/bin/env node
import { BUNDLED_MODEL_DIR, loadLocalModel } from "./model";
import { defaultConfig, serveStdio } from "./server";

function usage(): never {
  process.stderr.write(
    "usage: building-detector [--model-dir DIR] [--score-threshold T] " +
      "[--allow LABEL[,LABEL...]]\n",
  );
  process.exit(64);
}

async function main(): Promise<void> {
  const config = defaultConfig();
  let modelDir = BUNDLED_MODEL_DIR;

  const argv = process.argv.slice(2);
  for (let i = 0; i < argv.length; i++) {
    switch (argv[i]) {
      case "--model-dir":
        modelDir = argv[++i] ?? usage();
        config.modelName = `local:${modelDir}`;
        break;
      case "--score-threshold": {
        const value = Number(argv[++i]);
        if (!(value >= 0 && value <= 1)) usage();
        config.scoreThreshold = value;
        break;
      }
      case "--allow":
        config.labelAllowlist = (argv[++i] ?? usage()).split(",");
        break;
      default:
        usage();
    }
  }

  let model;
  try {
    model = await loadLocalModel(modelDir);
  } catch (err) {
    process.stderr.write(`model load failed: ${String(err)}\n`);
    process.exit(70);
  }
  await serveStdio(model, config);
}

main().then(
  () => process.exit(0),
  (err) => {
    process.stderr.write(`fatal: ${String(err)}\n`);
    process.exit(70);
  },
);
