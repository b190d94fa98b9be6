import { z } from 'zod';

import { ComplexGrid, fft2Centered, ifft2Centered, isPow2, roll2 } from './fft.js';
import { Rng } from './rng.js';
import { makeTexture, resizeSquare } from './texture.js';

export const InputMode = z.enum(['dual', 'image_only', 'autocorrelation', 'pupil_only']);
export type InputMode = z.infer<typeof InputMode>;

export const TrainConfigSchema = z
  .object({
    datasetSize: z.number().int().min(1),
    imageSize: z.number().int().min(8),
    apertureRadius: z.number().positive(),
    maxShift: z.number().int().min(0),
    learningRate: z.number().positive().default(1e-3),
    batchSize: z.number().int().min(1).default(32),
    steps: z.number().int().min(1),
    inputMode: InputMode.default('dual'),
    seed: z.number().int().default(0),
  })
  .refine((c) => isPow2(c.imageSize), {
    message: 'imageSize must be a power of two',
  })
  .refine((c) => c.maxShift + c.apertureRadius < c.imageSize / 2, {
    message: 'need maxShift + apertureRadius < imageSize / 2',
  });

export type TrainConfig = z.infer<typeof TrainConfigSchema>;

export function channelsFor(mode: InputMode): number {
  return mode === 'dual' ? 2 : 1;
}

/** Binary disk: 1 where (y-c)^2 + (x-c)^2 <= r^2, center at (n/2, n/2). */
export function diskMask(n: number, radius: number): Float64Array {
  const mask = new Float64Array(n * n);
  const c = n >> 1;
  const r2 = radius * radius;
  for (let y = 0; y < n; y++) {
    for (let x = 0; x < n; x++) {
      if ((y - c) * (y - c) + (x - c) * (x - c) <= r2) mask[y * n + x] = 1;
    }
  }
  return mask;
}

/** Target spectrum prepared once per image so samples only pay for rolls. */
export interface PreparedImage {
  spectrum: ComplexGrid;
}

const PHASE_MAX = Math.PI / 4;

/** Complex target from an amplitude image and a phase image (both [0, 1],
 * each resized to n if needed), then its centered spectrum. */
export function prepareImage(
  amplitude: { data: Float64Array; n: number },
  phase: { data: Float64Array; n: number } | null,
  n: number,
): PreparedImage {
  const amp = amplitude.n === n ? amplitude.data : resizeSquare(amplitude.data, amplitude.n, n);
  const ph = phase === null ? null : phase.n === n ? phase.data : resizeSquare(phase.data, phase.n, n);
  const re = new Float64Array(n * n);
  const im = new Float64Array(n * n);
  for (let i = 0; i < re.length; i++) {
    const theta = ph === null ? 0 : ph[i] * PHASE_MAX;
    re[i] = amp[i] * Math.cos(theta);
    im[i] = amp[i] * Math.sin(theta);
  }
  return { spectrum: fft2Centered({ re, im, n }) };
}

/** Pupil-plane intensity |O(k) M(k - k_j)|^2: the aperture rides the shift. */
export function pupilIntensity(
  spec: ComplexGrid,
  mask: Float64Array,
  kx: number,
  ky: number,
): Float64Array {
  const rolled = roll2(mask, spec.n, ky, kx);
  const out = new Float64Array(spec.n * spec.n);
  for (let i = 0; i < out.length; i++) {
    if (rolled[i] !== 0) out[i] = spec.re[i] * spec.re[i] + spec.im[i] * spec.im[i];
  }
  return out;
}

/** Image-plane intensity |F^-1{ O(k - k_j) M(k) }|^2. */
export function imageIntensity(
  spec: ComplexGrid,
  mask: Float64Array,
  kx: number,
  ky: number,
): Float64Array {
  const n = spec.n;
  const re = roll2(spec.re, n, ky, kx);
  const im = roll2(spec.im, n, ky, kx);
  for (let i = 0; i < re.length; i++) {
    re[i] *= mask[i];
    im[i] *= mask[i];
  }
  const field = ifft2Centered({ re, im, n });
  const out = new Float64Array(n * n);
  for (let i = 0; i < out.length; i++) {
    out[i] = field.re[i] * field.re[i] + field.im[i] * field.im[i];
  }
  return out;
}

/** Scale a raster so its max is exactly 1; all-zero rasters stay zero. */
export function normalizeMax(raster: Float64Array): Float64Array {
  let hi = 0;
  for (let i = 0; i < raster.length; i++) if (raster[i] > hi) hi = raster[i];
  if (hi === 0) return raster.slice();
  const out = new Float64Array(raster.length);
  const inv = 1 / hi;
  for (let i = 0; i < raster.length; i++) out[i] = raster[i] * inv;
  return out;
}

/** |F{I}| of an intensity raster, normalized to max 1 (the autocorrelation
 * magnitude of the pupil-plane field). */
export function autocorrelationChannel(intensity: Float64Array, n: number): Float64Array {
  const spec = fft2Centered({ re: intensity.slice(), im: new Float64Array(n * n), n });
  const mag = new Float64Array(n * n);
  for (let i = 0; i < mag.length; i++) {
    mag[i] = Math.hypot(spec.re[i], spec.im[i]);
  }
  return normalizeMax(mag);
}

/** One model input in HWC layout (channel 0 = normalized pupil intensity,
 * channel 1 = raw image intensity for dual; single channel otherwise). */
export function buildInput(
  raw: { pupil: Float64Array; image: Float64Array },
  n: number,
  mode: InputMode,
): Float64Array {
  const c = channelsFor(mode);
  const out = new Float64Array(n * n * c);
  if (mode === 'dual') {
    const p = normalizeMax(raw.pupil);
    for (let i = 0; i < n * n; i++) {
      out[i * 2] = p[i];
      out[i * 2 + 1] = raw.image[i];
    }
  } else if (mode === 'pupil_only') {
    out.set(normalizeMax(raw.pupil));
  } else if (mode === 'image_only') {
    out.set(raw.image);
  } else {
    out.set(autocorrelationChannel(raw.image, n));
  }
  return out;
}

export function sampleRaw(
  prep: PreparedImage,
  mask: Float64Array,
  kx: number,
  ky: number,
): { pupil: Float64Array; image: Float64Array } {
  return {
    pupil: pupilIntensity(prep.spectrum, mask, kx, ky),
    image: imageIntensity(prep.spectrum, mask, kx, ky),
  };
}

export interface TrainingPairs {
  inputs: Float64Array; // count * H * W * C
  targets: Float64Array; // count * 2, (kx, ky) in pixels
  count: number;
}

/** Materialize `count` (input, k) pairs: each draws an image uniformly and an
 * integer wavevector uniform on [-maxShift, maxShift]^2. Phase comes from the
 * next image in the list so amplitude and phase textures differ. */
export function generateTrainingPairs(
  images: { data: Float64Array; n: number }[],
  cfg: TrainConfig,
  count: number,
  rng: Rng,
): TrainingPairs {
  if (images.length === 0) throw new Error('need at least one image');
  const n = cfg.imageSize;
  const prepped = images.map((img, i) =>
    prepareImage(img, images[(i + 1) % images.length], n),
  );
  const mask = diskMask(n, cfg.apertureRadius);
  const c = channelsFor(cfg.inputMode);
  const inputs = new Float64Array(count * n * n * c);
  const targets = new Float64Array(count * 2);
  for (let s = 0; s < count; s++) {
    const idx = rng.int(0, prepped.length - 1);
    const kx = rng.int(-cfg.maxShift, cfg.maxShift);
    const ky = rng.int(-cfg.maxShift, cfg.maxShift);
    const input = buildInput(sampleRaw(prepped[idx], mask, kx, ky), n, cfg.inputMode);
    inputs.set(input, s * n * n * c);
    targets[s * 2] = kx;
    targets[s * 2 + 1] = ky;
  }
  return { inputs, targets, count };
}

/** Procedural corpus used when no image directory is supplied. */
export function buildCorpus(
  size: number,
  imageSize: number,
  rng: Rng,
): { data: Float64Array; n: number }[] {
  const out = [];
  for (let i = 0; i < size; i++) {
    out.push({ data: makeTexture(imageSize, rng), n: imageSize });
  }
  return out;
}
