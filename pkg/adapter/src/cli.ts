/** Startup flag parsing, kept import-safe for tests. */

import { parseArgs } from "node:util";

import { DEFAULT_MODEL_IDS } from "./payloads.js";
import { AdapterConfig, defaultConfig } from "./server.js";

export const USAGE = `usage: uvforge-adapter [options]

  --mode echo|model        echo replays request images (default: echo)
  --host HOST              listen address (default: 127.0.0.1)
  --port PORT              listen port (default: 8484)
  --max-resolution N       reject requests larger than NxN (default: 4096)
  --upstream URL           diffusion API base URL (model mode, required)
  --model-generate ID      ControlNet model per request kind; defaults:
  --model-inpaint ID         generate   ${DEFAULT_MODEL_IDS.generate}
  --model-uv-inpaint ID      inpaint    ${DEFAULT_MODEL_IDS.inpaint}
  --model-uv-hd ID           uv_inpaint ${DEFAULT_MODEL_IDS.uv_inpaint}
                             uv_hd      ${DEFAULT_MODEL_IDS.uv_hd}
`;

export interface StartupConfig extends AdapterConfig {
  host: string;
  port: number;
  help: boolean;
}

export function configFromArgs(argv: string[]): StartupConfig {
  const { values } = parseArgs({
    args: argv,
    options: {
      mode: { type: "string", default: "echo" },
      host: { type: "string", default: "127.0.0.1" },
      port: { type: "string", default: "8484" },
      "max-resolution": { type: "string", default: "4096" },
      upstream: { type: "string" },
      "model-generate": { type: "string" },
      "model-inpaint": { type: "string" },
      "model-uv-inpaint": { type: "string" },
      "model-uv-hd": { type: "string" },
      help: { type: "boolean", default: false },
    },
  });

  if (values.mode !== "echo" && values.mode !== "model") {
    throw new Error(`--mode must be echo or model, got ${JSON.stringify(values.mode)}`);
  }

  const modelFlags = [
    values["model-generate"],
    values["model-inpaint"],
    values["model-uv-inpaint"],
    values["model-uv-hd"],
  ];
  if (values.mode === "echo" && (modelFlags.some((f) => f !== undefined) || values.upstream)) {
    throw new Error("echo mode takes no --upstream or --model-* flags");
  }
  if (values.mode === "model" && !values.upstream) {
    throw new Error("model mode requires --upstream");
  }

  const port = Number(values.port);
  const maxResolution = Number(values["max-resolution"]);
  if (!Number.isInteger(port) || port < 0 || port > 65535) {
    throw new Error(`bad --port ${values.port}`);
  }
  if (!Number.isInteger(maxResolution) || maxResolution < 1) {
    throw new Error(`bad --max-resolution ${values["max-resolution"]}`);
  }

  const config = defaultConfig();
  config.mode = values.mode;
  config.maxResolution = maxResolution;
  config.upstream = values.upstream ?? null;
  config.models = {
    generate: values["model-generate"] ?? config.models.generate,
    inpaint: values["model-inpaint"] ?? config.models.inpaint,
    uv_inpaint: values["model-uv-inpaint"] ?? config.models.uv_inpaint,
    uv_hd: values["model-uv-hd"] ?? config.models.uv_hd,
  };
  return { ...config, host: values.host, port, help: values.help };
}
