/**
 * TCP denoising service. Each connection carries a sequence of request
 * frames answered strictly in order; connections are independent.
 * Malformed frames get an error frame and a clean close; backend failures
 * get an error frame and the connection stays usable.
 */

import { createServer, Server, Socket } from "node:net";
import { Backend, snapToLevels } from "./backends.js";
import {
  MalformedFrameError,
  RequestParser,
  encodeError,
  encodeResponse,
} from "./framing.js";

export interface ServerOptions {
  backend: Backend;
  /** Optional noise-level bank; sigma is snapped to the nearest entry. */
  levels?: number[];
  log?: (line: string) => void;
}

export function createDenoiseServer(options: ServerOptions): Server {
  const log = options.log ?? (() => {});
  const server = createServer((socket: Socket) => {
    const parser = new RequestParser();
    socket.on("error", () => socket.destroy());
    socket.on("data", (chunk: Buffer) => {
      let requests;
      try {
        requests = parser.feed(chunk);
      } catch (err) {
        if (err instanceof MalformedFrameError) {
          log(`malformed frame from peer: ${err.message}`);
          socket.end(encodeError(err.message));
          return;
        }
        throw err;
      }
      for (const req of requests) {
        let sigma = req.sigma;
        if (options.levels && options.levels.length > 0 && sigma > 0) {
          sigma = snapToLevels(sigma, options.levels);
        }
        let pixels: Float32Array;
        try {
          pixels = sigma === 0 ? req.pixels.slice() : options.backend(req.pixels, req.width, req.height, sigma);
          if (pixels.length !== req.pixels.length) {
            throw new Error(`backend changed pixel count ${req.pixels.length} -> ${pixels.length}`);
          }
        } catch (err) {
          const message = err instanceof Error ? err.message : String(err);
          log(`backend failure: ${message}`);
          socket.write(encodeError(`backend failure: ${message}`));
          continue;
        }
        socket.write(encodeResponse(req.width, req.height, pixels));
      }
    });
  });
  return server;
}
