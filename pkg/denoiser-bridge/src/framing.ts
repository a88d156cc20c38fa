/**
 * Binary frame codec for the denoising service.
 *
 * All integers and floats are little-endian; pixels are row-major float32.
 *
 *   request:  "PNPD" | u32 width | u32 height | f32 sigma | w*h f32 pixels
 *   response: "PNPR" | u32 width | u32 height | w*h f32 pixels
 *   error:    "PNPE" | u32 byte-length | UTF-8 message
 */

export const REQUEST_MAGIC = Buffer.from("PNPD");
export const RESPONSE_MAGIC = Buffer.from("PNPR");
export const ERROR_MAGIC = Buffer.from("PNPE");

const HEADER_BYTES = 16;
/** Upper bound on accepted image size (64 Mpixel); anything beyond is malformed. */
export const MAX_PIXELS = 1 << 26;

export interface DenoiseRequest {
  width: number;
  height: number;
  sigma: number;
  pixels: Float32Array;
}

export class MalformedFrameError extends Error {}

export function encodeRequest(req: DenoiseRequest): Buffer {
  const header = Buffer.alloc(HEADER_BYTES);
  REQUEST_MAGIC.copy(header, 0);
  header.writeUInt32LE(req.width, 4);
  header.writeUInt32LE(req.height, 8);
  header.writeFloatLE(req.sigma, 12);
  return Buffer.concat([header, float32Bytes(req.pixels)]);
}

export function encodeResponse(width: number, height: number, pixels: Float32Array): Buffer {
  const header = Buffer.alloc(12);
  RESPONSE_MAGIC.copy(header, 0);
  header.writeUInt32LE(width, 4);
  header.writeUInt32LE(height, 8);
  return Buffer.concat([header, float32Bytes(pixels)]);
}

export function encodeError(message: string): Buffer {
  const payload = Buffer.from(message, "utf8");
  const header = Buffer.alloc(8);
  ERROR_MAGIC.copy(header, 0);
  header.writeUInt32LE(payload.length, 4);
  return Buffer.concat([header, payload]);
}

function float32Bytes(pixels: Float32Array): Buffer {
  // Ensure little-endian byte order regardless of host endianness.
  const buf = Buffer.alloc(pixels.length * 4);
  for (let i = 0; i < pixels.length; i++) {
    buf.writeFloatLE(pixels[i], i * 4);
  }
  return buf;
}

function pixelsFromBytes(buf: Buffer, count: number): Float32Array {
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    out[i] = buf.readFloatLE(i * 4);
  }
  return out;
}

/**
 * Incremental request parser for one connection's byte stream.
 * Feed chunks as they arrive; complete requests are returned in order.
 * Throws MalformedFrameError on a bad magic or an absurd frame size,
 * after which the stream is unrecoverable and should be closed.
 */
export class RequestParser {
  private pending: Buffer = Buffer.alloc(0);

  feed(chunk: Buffer): DenoiseRequest[] {
    this.pending = this.pending.length === 0 ? chunk : Buffer.concat([this.pending, chunk]);
    const requests: DenoiseRequest[] = [];
    for (;;) {
      if (this.pending.length < HEADER_BYTES) break;
      if (!this.pending.subarray(0, 4).equals(REQUEST_MAGIC)) {
        throw new MalformedFrameError(
          `bad request magic ${JSON.stringify(this.pending.subarray(0, 4).toString("latin1"))}`
        );
      }
      const width = this.pending.readUInt32LE(4);
      const height = this.pending.readUInt32LE(8);
      const sigma = this.pending.readFloatLE(12);
      if (width < 1 || height < 1 || width * height > MAX_PIXELS) {
        throw new MalformedFrameError(`unreasonable frame size ${width}x${height}`);
      }
      const total = HEADER_BYTES + 4 * width * height;
      if (this.pending.length < total) break;
      const pixels = pixelsFromBytes(this.pending.subarray(HEADER_BYTES, total), width * height);
      this.pending = this.pending.subarray(total);
      requests.push({ width, height, sigma, pixels });
    }
    return requests;
  }
}
