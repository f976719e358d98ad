/**
 * HTTP surface: POST /v1/sample speaking uvforge/1.
 *
 * Single-worker by contract: one request in flight, concurrent callers
 * get an immediate 503 and are expected to retry. Statuses: 200 OK,
 * 400 malformed JSON, 422 contract violation (schema, missing images,
 * oversize, unknown kind), 502 upstream failure in model mode, 503 busy.
 */

import express, { Application, NextFunction, Request, Response } from "express";

import { echoImage, EchoError } from "./echo.js";
import { decodePng, encodePng } from "./png.js";
import { buildUpstreamCall, DEFAULT_MODEL_IDS, ModelIds } from "./payloads.js";
import { describeIssues, ErrorBody, sampleRequestSchema, SampleRequest } from "./protocol.js";

export interface AdapterConfig {
  mode: "echo" | "model";
  /** requests wider or taller than this are rejected with 422 */
  maxResolution: number;
  models: ModelIds;
  /** base URL of the diffusion API, model mode only */
  upstream: string | null;
  /** artificial per-request delay, used by tests to provoke the 503 path */
  processingDelayMs?: number;
}

export function defaultConfig(): AdapterConfig {
  return {
    mode: "echo",
    maxResolution: 4096,
    models: { ...DEFAULT_MODEL_IDS },
    upstream: null,
  };
}

export function createApp(config: AdapterConfig): Application {
  const app = express();
  app.use(express.json({ limit: "256mb" }));

  let busy = false;

  app.get("/v1/health", (_req, res) => {
    res.json({ status: "ok", mode: config.mode });
  });

  app.post("/v1/sample", async (req: Request, res: Response) => {
    if (busy) {
      res.status(503).json({ message: "a request is already in flight" } satisfies ErrorBody);
      return;
    }
    busy = true;
    try {
      if (config.processingDelayMs) {
        await sleep(config.processingDelayMs);
      }
      const parsed = sampleRequestSchema.safeParse(req.body);
      if (!parsed.success) {
        res.status(422).json({ message: describeIssues(parsed.error) } satisfies ErrorBody);
        return;
      }
      const request = parsed.data;
      if (request.width > config.maxResolution || request.height > config.maxResolution) {
        res.status(422).json({
          message:
            `${request.width}x${request.height} exceeds the ` +
            `${config.maxResolution} resolution limit`,
        } satisfies ErrorBody);
        return;
      }

      const image =
        config.mode === "echo" ? echoImage(request) : await modelImage(request, config);
      res.json({
        image_b64: Buffer.from(image).toString("base64"),
        backend_id: backendId(config, request),
      });
    } catch (error) {
      if (error instanceof EchoError) {
        res.status(422).json({ message: error.message } satisfies ErrorBody);
      } else if (error instanceof UpstreamError) {
        res.status(502).json({ message: error.message } satisfies ErrorBody);
      } else {
        res.status(500).json({ message: String(error) } satisfies ErrorBody);
      }
    } finally {
      busy = false;
    }
  });

  // express delivers body-parser failures here; everything else has been
  // handled in the route.
  app.use((err: Error & { type?: string }, _req: Request, res: Response, _next: NextFunction) => {
    if (err.type === "entity.parse.failed") {
      res.status(400).json({ message: "malformed JSON body" } satisfies ErrorBody);
      return;
    }
    res.status(500).json({ message: err.message } satisfies ErrorBody);
  });

  return app;
}

class UpstreamError extends Error {}

function backendId(config: AdapterConfig, request: SampleRequest): string {
  if (config.mode === "echo") return "echo:uvforge-adapter";
  return `model:${config.models[request.kind]}`;
}

async function modelImage(request: SampleRequest, config: AdapterConfig): Promise<Uint8Array> {
  if (config.upstream === null) {
    throw new UpstreamError("model mode has no upstream configured");
  }
  let invertedKeep: string | null = null;
  if (request.keep_mask_b64 !== null) {
    invertedKeep = invertMask(request.keep_mask_b64);
  } else if (request.kind === "inpaint" || request.kind === "uv_inpaint") {
    throw new EchoError(`${request.kind} requires keep_mask_b64`);
  }
  if (request.init_image_b64 === null && request.kind !== "generate") {
    throw new EchoError(`${request.kind} requires init_image_b64`);
  }

  const call = buildUpstreamCall(request, config.models, invertedKeep);
  let response: globalThis.Response;
  try {
    response = await fetch(config.upstream.replace(/\/$/, "") + call.path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(call.payload),
    });
  } catch (error) {
    throw new UpstreamError(`upstream unreachable: ${(error as Error).message}`);
  }
  if (!response.ok) {
    throw new UpstreamError(`upstream returned ${response.status}`);
  }
  const body = (await response.json()) as { images?: string[] };
  if (!body.images || body.images.length === 0) {
    throw new UpstreamError("upstream response carries no images");
  }
  return Buffer.from(body.images[0], "base64");
}

/** keep_mask marks pixels to preserve; WebUI masks mark pixels to paint. */
function invertMask(maskB64: string): string {
  const mask = decodePng(Buffer.from(maskB64, "base64"));
  const limit = mask.depth === 8 ? 255 : 65535;
  const data =
    mask.depth === 8 ? new Uint8Array(mask.data.length) : new Uint16Array(mask.data.length);
  for (let i = 0; i < mask.data.length; i++) {
    data[i] = limit - mask.data[i];
  }
  return Buffer.from(encodePng({ ...mask, data })).toString("base64");
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
