/**
 * Denoising backends. Every backend maps (pixels, width, height, sigma)
 * to new pixels of the same shape; sigma is the assumed noise standard
 * deviation in display units [0, 255] and sigma = 0 must be the identity.
 */

import { readFileSync } from "node:fs";

export type Backend = (
  pixels: Float32Array,
  width: number,
  height: number,
  sigma: number
) => Float32Array;

/** Noise levels of the 25-member bank: 1, 3, ..., 49. */
export const DEFAULT_LEVEL_BANK: number[] = Array.from({ length: 25 }, (_, i) => 1 + 2 * i);

/** Snap sigma to the nearest configured level (ties go to the lower level). */
export function snapToLevels(sigma: number, levels: number[]): number {
  let best = levels[0];
  let bestDist = Math.abs(sigma - best);
  for (const level of levels) {
    const dist = Math.abs(sigma - level);
    if (dist < bestDist) {
      best = level;
      bestDist = dist;
    }
  }
  return best;
}

export const identityBackend: Backend = (pixels) => pixels.slice();

/**
 * Separable Gaussian smoothing with periodic boundaries; the blur width in
 * pixels is blurScale * sigma (matching the reference client's in-process
 * smoothing denoiser).
 */
export function gaussianBackend(blurScale = 0.15): Backend {
  return (pixels, width, height, sigma) => {
    const std = blurScale * sigma;
    if (std <= 0) return pixels.slice();
    const kernel = gaussianKernel(std);
    const tmp = convolveRows(pixels, width, height, kernel);
    return convolveCols(tmp, width, height, kernel);
  };
}

function gaussianKernel(std: number): Float64Array {
  const radius = Math.max(1, Math.round(4 * std));
  const kernel = new Float64Array(2 * radius + 1);
  let sum = 0;
  for (let i = -radius; i <= radius; i++) {
    const v = Math.exp(-(i * i) / (2 * std * std));
    kernel[i + radius] = v;
    sum += v;
  }
  for (let i = 0; i < kernel.length; i++) kernel[i] /= sum;
  return kernel;
}

function convolveRows(
  pixels: Float32Array,
  width: number,
  height: number,
  kernel: Float64Array
): Float32Array {
  const radius = (kernel.length - 1) / 2;
  const out = new Float32Array(pixels.length);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      let acc = 0;
      for (let k = -radius; k <= radius; k++) {
        const xx = ((x + k) % width + width) % width;
        acc += kernel[k + radius] * pixels[y * width + xx];
      }
      out[y * width + x] = acc;
    }
  }
  return out;
}

function convolveCols(
  pixels: Float32Array,
  width: number,
  height: number,
  kernel: Float64Array
): Float32Array {
  const radius = (kernel.length - 1) / 2;
  const out = new Float32Array(pixels.length);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      let acc = 0;
      for (let k = -radius; k <= radius; k++) {
        const yy = ((y + k) % height + height) % height;
        acc += kernel[k + radius] * pixels[yy * width + x];
      }
      out[y * width + x] = acc;
    }
  }
  return out;
}

/**
 * Weights of a small convolutional network stored as JSON:
 * a stack of 3x3 convolutions (zero-padded) with optional ReLU between
 * layers; `residual: true` means the network predicts the noise and the
 * output is input minus prediction. Pixel values are scaled to [0, 1]
 * for inference and back afterwards.
 */
export interface ConvLayer {
  /** [outChannels][inChannels][3][3] */
  weights: number[][][][];
  bias: number[];
}

export interface ConvModel {
  layers: ConvLayer[];
  residual?: boolean;
}

export function loadConvModel(path: string): ConvModel {
  const model = JSON.parse(readFileSync(path, "utf8")) as ConvModel;
  if (!Array.isArray(model.layers) || model.layers.length === 0) {
    throw new Error(`model at ${path} has no layers`);
  }
  let channels = 1;
  for (const [i, layer] of model.layers.entries()) {
    if (layer.weights.length !== layer.bias.length) {
      throw new Error(`layer ${i}: bias/filter count mismatch`);
    }
    for (const filt of layer.weights) {
      if (filt.length !== channels) {
        throw new Error(`layer ${i}: expected ${channels} input channels`);
      }
    }
    channels = layer.weights.length;
  }
  if (channels !== 1) {
    throw new Error("final layer must produce a single channel");
  }
  return model;
}

export function learnedBackend(model: ConvModel): Backend {
  return (pixels, width, height, _sigma) => {
    let activations: Float32Array[] = [scale(pixels, 1 / 255)];
    model.layers.forEach((layer, idx) => {
      const isLast = idx === model.layers.length - 1;
      activations = applyConvLayer(activations, width, height, layer, !isLast);
    });
    const predicted = activations[0];
    const out = new Float32Array(pixels.length);
    for (let i = 0; i < out.length; i++) {
      const value = model.residual ? pixels[i] / 255 - predicted[i] : predicted[i];
      out[i] = value * 255;
    }
    return out;
  };
}

function scale(pixels: Float32Array, factor: number): Float32Array {
  const out = new Float32Array(pixels.length);
  for (let i = 0; i < pixels.length; i++) out[i] = pixels[i] * factor;
  return out;
}

function applyConvLayer(
  channels: Float32Array[],
  width: number,
  height: number,
  layer: ConvLayer,
  relu: boolean
): Float32Array[] {
  const out: Float32Array[] = [];
  for (let o = 0; o < layer.weights.length; o++) {
    const acc = new Float32Array(width * height).fill(layer.bias[o]);
    for (let c = 0; c < channels.length; c++) {
      const kernel = layer.weights[o][c];
      const input = channels[c];
      for (let y = 0; y < height; y++) {
        for (let x = 0; x < width; x++) {
          let v = 0;
          for (let ky = -1; ky <= 1; ky++) {
            const yy = y + ky;
            if (yy < 0 || yy >= height) continue;
            for (let kx = -1; kx <= 1; kx++) {
              const xx = x + kx;
              if (xx < 0 || xx >= width) continue;
              v += kernel[ky + 1][kx + 1] * input[yy * width + xx];
            }
          }
          acc[y * width + x] += v;
        }
      }
    }
    if (relu) {
      for (let i = 0; i < acc.length; i++) acc[i] = Math.max(acc[i], 0);
    }
    out.push(acc);
  }
  return out;
}
