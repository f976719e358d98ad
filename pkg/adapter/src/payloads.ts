/**
 * Model mode: translate uvforge/1 requests into Stable Diffusion WebUI
 * API payloads (/sdapi/v1/txt2img and /sdapi/v1/img2img with ControlNet
 * units). Builders are pure so the mapping is unit-testable without a
 * running upstream.
 *
 * Field mapping: strength -> denoising_strength, seed -> seed, the
 * control image -> one ControlNet unit whose module depends on
 * control_kind. Position maps have no off-the-shelf conditioning model,
 * so they ride a tile ControlNet by default; override per kind with the
 * model flags if you have something better.
 */

import { SampleKind, SampleRequest } from "./protocol.js";

export interface ModelIds {
  generate: string;
  inpaint: string;
  uv_inpaint: string;
  uv_hd: string;
}

export const DEFAULT_MODEL_IDS: ModelIds = {
  generate: "control_v11f1p_sd15_depth",
  inpaint: "control_v11p_sd15_inpaint",
  uv_inpaint: "control_v11f1e_sd15_tile",
  uv_hd: "control_v11f1e_sd15_tile",
};

const CONTROL_MODULES: Record<string, string> = {
  depth: "depth_midas",
  position: "tile_resample",
};

interface ControlNetUnit {
  input_image: string;
  module: string;
  model: string;
  weight: number;
  resize_mode: "Just Resize";
}

export interface UpstreamCall {
  /** path under the upstream base URL */
  path: "/sdapi/v1/txt2img" | "/sdapi/v1/img2img";
  payload: Record<string, unknown>;
}

export function buildUpstreamCall(
  request: SampleRequest,
  models: ModelIds,
  invertedKeepB64: string | null,
): UpstreamCall {
  const base: Record<string, unknown> = {
    prompt: request.prompt ?? "",
    negative_prompt: request.negative_prompt ?? "",
    seed: request.seed,
    width: request.width,
    height: request.height,
    steps: 30,
    cfg_scale: 7.5,
    sampler_name: "DPM++ 2M",
    batch_size: 1,
    alwayson_scripts: controlNetScript(request, models),
  };

  if (request.kind === "generate") {
    return { path: "/sdapi/v1/txt2img", payload: base };
  }

  const payload: Record<string, unknown> = {
    ...base,
    init_images: [request.init_image_b64],
    denoising_strength: request.strength,
  };
  if (request.kind === "inpaint" || request.kind === "uv_inpaint") {
    // WebUI masks mark the region to repaint, keep_mask the region to
    // preserve, hence the inversion happens before the builder runs.
    payload.mask = invertedKeepB64;
    payload.mask_blur = 0;
    payload.inpainting_fill = 1;
    payload.inpaint_full_res = false;
  }
  return { path: "/sdapi/v1/img2img", payload };
}

function controlNetScript(
  request: SampleRequest,
  models: ModelIds,
): Record<string, unknown> {
  if (request.control_image_b64 === null || request.control_kind === null) {
    return {};
  }
  const unit: ControlNetUnit = {
    input_image: request.control_image_b64,
    module: CONTROL_MODULES[request.control_kind],
    model: models[request.kind as SampleKind],
    weight: 1.0,
    resize_mode: "Just Resize",
  };
  return { controlnet: { args: [unit] } };
}
