#!/usr/bin/env node
/**
 * Start the denoising service.
 *
 *   denoiser-bridge --listen 127.0.0.1:5151 --backend gaussian
 *   denoiser-bridge --backend learned --model weights.json --levels default
 *
 * Backends: identity-echo | gaussian | learned.
 * --levels takes a comma-separated list of noise levels or "default"
 * for the 25-level bank 1,3,...,49; incoming sigmas are snapped to the
 * nearest level before dispatch.
 */

import { existsSync } from "node:fs";
import {
  Backend,
  DEFAULT_LEVEL_BANK,
  gaussianBackend,
  identityBackend,
  learnedBackend,
  loadConvModel,
} from "./backends.js";
import { createDenoiseServer } from "./server.js";

interface CliConfig {
  host: string;
  port: number;
  backend: Backend;
  backendName: string;
  levels?: number[];
}

export function parseArgs(argv: string[]): CliConfig {
  let listen = "127.0.0.1:5151";
  let backendName = "identity-echo";
  let model: string | undefined;
  let levels: number[] | undefined;
  let blurScale = 0.15;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) throw new Error(`${arg} needs a value`);
      return argv[++i];
    };
    switch (arg) {
      case "--listen":
        listen = next();
        break;
      case "--backend":
        backendName = next();
        break;
      case "--model":
        model = next();
        break;
      case "--blur-scale":
        blurScale = Number(next());
        break;
      case "--levels": {
        const value = next();
        levels = value === "default" ? DEFAULT_LEVEL_BANK : value.split(",").map(Number);
        if (levels.some((v) => !Number.isFinite(v))) {
          throw new Error(`bad --levels value ${value}`);
        }
        break;
      }
      default:
        throw new Error(`unknown argument ${arg}`);
    }
  }
  const colon = listen.lastIndexOf(":");
  if (colon <= 0) throw new Error(`--listen expects host:port, got ${listen}`);
  const host = listen.slice(0, colon);
  const port = Number(listen.slice(colon + 1));
  if (!Number.isInteger(port) || port < 0 || port > 65535) {
    throw new Error(`bad port in ${listen}`);
  }
  let backend: Backend;
  switch (backendName) {
    case "identity-echo":
      backend = identityBackend;
      break;
    case "gaussian":
      backend = gaussianBackend(blurScale);
      break;
    case "learned": {
      if (!model) throw new Error("--backend learned requires --model");
      if (!existsSync(model)) throw new Error(`model file ${model} does not exist`);
      backend = learnedBackend(loadConvModel(model));
      break;
    }
    default:
      throw new Error(`unknown backend ${backendName}`);
  }
  return { host, port, backend, backendName, levels };
}

export function main(argv: string[]): void {
  let config: CliConfig;
  try {
    config = parseArgs(argv);
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    process.exitCode = 2;
    return;
  }
  const server = createDenoiseServer({
    backend: config.backend,
    levels: config.levels,
    log: (line) => console.error(line),
  });
  server.listen(config.port, config.host, () => {
    const addr = server.address();
    const bound = typeof addr === "object" && addr ? `${addr.address}:${addr.port}` : config.host;
    // The parent process scrapes this line to find the bound port.
    console.log(`listening on ${bound} (backend ${config.backendName})`);
  });
}

main(process.argv.slice(2));
