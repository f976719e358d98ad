/**
 * Minimal PNG codec for the wire protocol images.
 *
 * Decodes non-interlaced grayscale/RGB/RGBA PNGs at 8 or 16 bits per
 * channel (all five row filters), which covers everything the engine
 * sends: 8-bit RGB init/reference/depth images, 8-bit grayscale masks,
 * 16-bit RGB position maps. Encoding always uses filter 0; pixel data
 * survives a decode/encode round trip bit-exactly, which the echo mode
 * relies on.
 */

import { deflateSync, inflateSync } from "node:zlib";

export interface RawImage {
  width: number;
  height: number;
  /** 1 = gray, 2 = gray+alpha, 3 = RGB, 4 = RGBA */
  channels: number;
  /** bits per channel, 8 or 16 */
  depth: 8 | 16;
  /** row-major, channel-interleaved samples */
  data: Uint8Array | Uint16Array;
}

const SIGNATURE = Uint8Array.from([137, 80, 78, 71, 13, 10, 26, 10]);

const CHANNELS_FOR_COLOR_TYPE: Record<number, number> = {
  0: 1, // grayscale
  2: 3, // RGB
  4: 2, // grayscale + alpha
  6: 4, // RGBA
};

export class PngError extends Error {}

export function decodePng(bytes: Uint8Array): RawImage {
  if (bytes.length < SIGNATURE.length + 12) {
    throw new PngError("truncated PNG");
  }
  for (let i = 0; i < SIGNATURE.length; i++) {
    if (bytes[i] !== SIGNATURE[i]) throw new PngError("bad PNG signature");
  }

  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  let offset = SIGNATURE.length;
  let header: { width: number; height: number; depth: 8 | 16; colorType: number } | null = null;
  const idatParts: Uint8Array[] = [];
  let sawEnd = false;

  while (offset + 8 <= bytes.length && !sawEnd) {
    const length = view.getUint32(offset);
    const type = String.fromCharCode(
      bytes[offset + 4], bytes[offset + 5], bytes[offset + 6], bytes[offset + 7],
    );
    const dataStart = offset + 8;
    if (dataStart + length + 4 > bytes.length) throw new PngError("truncated chunk");
    const data = bytes.subarray(dataStart, dataStart + length);

    if (type === "IHDR") {
      const depth = data[8];
      const colorType = data[9];
      if (depth !== 8 && depth !== 16) throw new PngError(`unsupported bit depth ${depth}`);
      if (!(colorType in CHANNELS_FOR_COLOR_TYPE)) {
        throw new PngError(`unsupported color type ${colorType}`);
      }
      if (data[12] !== 0) throw new PngError("interlaced PNG not supported");
      header = {
        width: view.getUint32(dataStart),
        height: view.getUint32(dataStart + 4),
        depth,
        colorType,
      };
    } else if (type === "IDAT") {
      idatParts.push(data);
    } else if (type === "IEND") {
      sawEnd = true;
    }
    offset = dataStart + length + 4; // skip CRC
  }

  if (header === null) throw new PngError("missing IHDR");
  if (idatParts.length === 0) throw new PngError("missing IDAT");
  const { width, height, depth, colorType } = header;
  if (width === 0 || height === 0) throw new PngError("zero-size image");

  const channels = CHANNELS_FOR_COLOR_TYPE[colorType];
  const bytesPerPixel = channels * (depth / 8);
  const stride = width * bytesPerPixel;
  const raw = inflateSync(concat(idatParts));
  if (raw.length < (stride + 1) * height) throw new PngError("short pixel data");

  const unfiltered = unfilterRows(raw, height, stride, bytesPerPixel);

  if (depth === 8) {
    return { width, height, channels, depth, data: unfiltered };
  }
  const samples = new Uint16Array(width * height * channels);
  for (let i = 0; i < samples.length; i++) {
    samples[i] = (unfiltered[2 * i] << 8) | unfiltered[2 * i + 1];
  }
  return { width, height, channels, depth, data: samples };
}

export function encodePng(image: RawImage): Uint8Array {
  const { width, height, channels, depth, data } = image;
  if (data.length !== width * height * channels) {
    throw new PngError("sample count does not match dimensions");
  }
  const colorType = { 1: 0, 2: 4, 3: 2, 4: 6 }[channels];
  if (colorType === undefined) throw new PngError(`bad channel count ${channels}`);

  const bytesPerPixel = channels * (depth / 8);
  const stride = width * bytesPerPixel;
  const rows = new Uint8Array((stride + 1) * height);
  for (let y = 0; y < height; y++) {
    const rowStart = y * (stride + 1);
    rows[rowStart] = 0; // filter: none
    const sampleStart = y * width * channels;
    if (depth === 8) {
      rows.set((data as Uint8Array).subarray(sampleStart, sampleStart + stride), rowStart + 1);
    } else {
      for (let i = 0; i < width * channels; i++) {
        const v = data[sampleStart + i];
        rows[rowStart + 1 + 2 * i] = v >> 8;
        rows[rowStart + 1 + 2 * i + 1] = v & 0xff;
      }
    }
  }

  const ihdr = new Uint8Array(13);
  const ihdrView = new DataView(ihdr.buffer);
  ihdrView.setUint32(0, width);
  ihdrView.setUint32(4, height);
  ihdr[8] = depth;
  ihdr[9] = colorType;

  return concat([
    SIGNATURE,
    chunk("IHDR", ihdr),
    chunk("IDAT", deflateSync(rows)),
    chunk("IEND", new Uint8Array(0)),
  ]);
}

function unfilterRows(
  raw: Uint8Array,
  height: number,
  stride: number,
  bpp: number,
): Uint8Array {
  const out = new Uint8Array(stride * height);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const src = y * (stride + 1) + 1;
    const dst = y * stride;
    const prev = dst - stride;
    switch (filter) {
      case 0:
        out.set(raw.subarray(src, src + stride), dst);
        break;
      case 1: // sub
        for (let x = 0; x < stride; x++) {
          const left = x >= bpp ? out[dst + x - bpp] : 0;
          out[dst + x] = (raw[src + x] + left) & 0xff;
        }
        break;
      case 2: // up
        for (let x = 0; x < stride; x++) {
          const up = y > 0 ? out[prev + x] : 0;
          out[dst + x] = (raw[src + x] + up) & 0xff;
        }
        break;
      case 3: // average
        for (let x = 0; x < stride; x++) {
          const left = x >= bpp ? out[dst + x - bpp] : 0;
          const up = y > 0 ? out[prev + x] : 0;
          out[dst + x] = (raw[src + x] + ((left + up) >> 1)) & 0xff;
        }
        break;
      case 4: // paeth
        for (let x = 0; x < stride; x++) {
          const left = x >= bpp ? out[dst + x - bpp] : 0;
          const up = y > 0 ? out[prev + x] : 0;
          const upLeft = y > 0 && x >= bpp ? out[prev + x - bpp] : 0;
          out[dst + x] = (raw[src + x] + paeth(left, up, upLeft)) & 0xff;
        }
        break;
      default:
        throw new PngError(`unknown row filter ${filter}`);
    }
  }
  return out;
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

function chunk(type: string, data: Uint8Array): Uint8Array {
  const out = new Uint8Array(12 + data.length);
  const view = new DataView(out.buffer);
  view.setUint32(0, data.length);
  for (let i = 0; i < 4; i++) out[4 + i] = type.charCodeAt(i);
  out.set(data, 8);
  view.setUint32(8 + data.length, crc32(out.subarray(4, 8 + data.length)));
  return out;
}

function concat(parts: Uint8Array[]): Uint8Array {
  let total = 0;
  for (const part of parts) total += part.length;
  const out = new Uint8Array(total);
  let offset = 0;
  for (const part of parts) {
    out.set(part, offset);
    offset += part.length;
  }
  return out;
}

let crcTable: Uint32Array | null = null;

function crc32(bytes: Uint8Array): number {
  if (crcTable === null) {
    crcTable = new Uint32Array(256);
    for (let n = 0; n < 256; n++) {
      let c = n;
      for (let k = 0; k < 8; k++) {
        c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
      }
      crcTable[n] = c >>> 0;
    }
  }
  let crc = 0xffffffff;
  for (let i = 0; i < bytes.length; i++) {
    crc = crcTable[(crc ^ bytes[i]) & 0xff] ^ (crc >>> 8);
  }
  return (crc ^ 0xffffffff) >>> 0;
}
