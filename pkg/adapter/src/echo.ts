/**
 * Echo mode: deterministic, model-free responses built purely from the
 * images already inside the request. This keeps the protocol boundary
 * testable end to end without any diffusion stack:
 *
 *   generate    -> the control image unchanged (mid-gray if absent)
 *   inpaint     -> init where keep_mask is set, control (or mid-gray)
 *   uv_inpaint     elsewhere, emitted as 16-bit RGB
 *   uv_hd       -> init re-encoded at its native depth
 *
 * The composite runs in the 16-bit domain; 8-bit samples are promoted by
 * v * 257, which is lossless and maps back to the identical [0, 1] value
 * (v * 257 / 65535 === v / 255), so keep_mask=1 pixels reproduce the init
 * image exactly.
 */

import { decodePng, encodePng, RawImage } from "./png.js";
import { SampleRequest } from "./protocol.js";

export class EchoError extends Error {}

const MID_GRAY_8 = 128;
const MID_GRAY_16 = MID_GRAY_8 * 257;

/** Produce the echo response image as PNG bytes. */
export function echoImage(request: SampleRequest): Uint8Array {
  switch (request.kind) {
    case "generate": {
      if (request.control_image_b64 !== null) {
        const bytes = Buffer.from(request.control_image_b64, "base64");
        checkSize(decodeField(request.control_image_b64, "control_image_b64"), request,
          "control_image_b64");
        return bytes; // passed through untouched
      }
      const gray = new Uint8Array(request.width * request.height * 3).fill(MID_GRAY_8);
      return encodePng({
        width: request.width,
        height: request.height,
        channels: 3,
        depth: 8,
        data: gray,
      });
    }
    case "inpaint":
    case "uv_inpaint": {
      if (request.init_image_b64 === null) {
        throw new EchoError(`${request.kind} requires init_image_b64`);
      }
      if (request.keep_mask_b64 === null) {
        throw new EchoError(`${request.kind} requires keep_mask_b64`);
      }
      const init = decodeField(request.init_image_b64, "init_image_b64");
      const keep = decodeField(request.keep_mask_b64, "keep_mask_b64");
      checkSize(init, request, "init_image_b64");
      checkSize(keep, request, "keep_mask_b64");
      let control: RawImage | null = null;
      if (request.control_image_b64 !== null) {
        control = decodeField(request.control_image_b64, "control_image_b64");
        checkSize(control, request, "control_image_b64");
      }
      return encodePng(composite(init, keep, control));
    }
    case "uv_hd": {
      if (request.init_image_b64 === null) {
        throw new EchoError("uv_hd requires init_image_b64");
      }
      const init = decodeField(request.init_image_b64, "init_image_b64");
      checkSize(init, request, "init_image_b64");
      return encodePng(init);
    }
  }
}

function composite(init: RawImage, keep: RawImage, control: RawImage | null): RawImage {
  const { width, height } = init;
  const initRgb = toRgb16(init);
  const controlRgb = control === null ? null : toRgb16(control);
  const keepThreshold = keep.depth === 8 ? 128 : 32768;

  const out = new Uint16Array(width * height * 3);
  for (let i = 0; i < width * height; i++) {
    const kept = keep.data[i * keep.channels] >= keepThreshold;
    for (let c = 0; c < 3; c++) {
      out[i * 3 + c] = kept
        ? initRgb[i * 3 + c]
        : controlRgb !== null
          ? controlRgb[i * 3 + c]
          : MID_GRAY_16;
    }
  }
  return { width, height, channels: 3, depth: 16, data: out };
}

/** Promote any decoded layout to interleaved 16-bit RGB samples. */
function toRgb16(image: RawImage): Uint16Array {
  const { width, height, channels, depth, data } = image;
  const scale = depth === 8 ? 257 : 1;
  const out = new Uint16Array(width * height * 3);
  const colorChannels = channels >= 3 ? 3 : 1; // 2 and 4 carry alpha, dropped
  for (let i = 0; i < width * height; i++) {
    for (let c = 0; c < 3; c++) {
      const source = colorChannels === 1 ? 0 : c;
      out[i * 3 + c] = data[i * channels + source] * scale;
    }
  }
  return out;
}

function decodeField(b64: string, field: string): RawImage {
  let bytes: Uint8Array;
  try {
    bytes = Buffer.from(b64, "base64");
  } catch (error) {
    throw new EchoError(`${field} is not valid base64`);
  }
  try {
    return decodePng(bytes);
  } catch (error) {
    throw new EchoError(`${field} does not decode as PNG: ${(error as Error).message}`);
  }
}

function checkSize(image: RawImage, request: SampleRequest, field: string): void {
  if (image.width !== request.width || image.height !== request.height) {
    throw new EchoError(
      `${field} is ${image.width}x${image.height}, request says ` +
        `${request.width}x${request.height}`,
    );
  }
}
