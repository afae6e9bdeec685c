import readline from "node:readline";
import { DetectionModel, RawDetection } from "./model";
import { readPng } from "./png";

export const PROTOCOL_VERSION = 1;
export const OUTPUT_LABEL = "building";

export interface AdapterConfig {
  modelName: string;
  scoreThreshold: number;
  labelAllowlist: string[];
}

export const DEFAULT_ALLOWLIST = ["structure", "building", "house"];

export function defaultConfig(): AdapterConfig {
  return {
    modelName: "bundled",
    scoreThreshold: 0.5,
    labelAllowlist: DEFAULT_ALLOWLIST,
  };
}

export function filterDetections(
  raw: RawDetection[],
  config: AdapterConfig,
): RawDetection[] {
  return raw
    .filter(
      (d) => d.score >= config.scoreThreshold &&
        config.labelAllowlist.includes(d.label),
    )
    .map((d) => ({ ...d, label: OUTPUT_LABEL }));
}

/**
 * Serve the newline-delimited JSON detection protocol until input closes.
 * One request at a time; responses carry the request id. Per-request
 * failures answer {"id":n,"error":...} and keep the process alive.
 */
export function serveStdio(
  model: DetectionModel,
  config: AdapterConfig,
  input: NodeJS.ReadableStream = process.stdin as unknown as NodeJS.ReadableStream,
  output: NodeJS.WritableStream = process.stdout,
): Promise<void> {
  const emit = (doc: object) => output.write(JSON.stringify(doc) + "\n");
  emit({ ready: true, protocol: PROTOCOL_VERSION });

  const handle = (line: string) => {
    if (line.trim() === "") return;
    let request: { id?: unknown; image_path?: unknown };
    try {
      request = JSON.parse(line);
    } catch {
      process.stderr.write("skipping unparseable request line\n");
      return;
    }
    const id = request.id;
    if (typeof id !== "number" || typeof request.image_path !== "string") {
      emit({ id: typeof id === "number" ? id : null, error: "malformed request" });
      return;
    }
    try {
      const image = readPng(request.image_path);
      const detections = filterDetections(model.detect(image), config);
      emit({ id, detections });
    } catch (err) {
      emit({ id, error: String(err instanceof Error ? err.message : err) });
    }
  };

  return new Promise((resolve) => {
    const lines = readline.createInterface({ input, crlfDelay: Infinity });
    lines.on("line", handle);
    lines.on("close", resolve);
  });
}
