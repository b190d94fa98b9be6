import * as fs from 'node:fs';

import { autocorrelationChannel, InputMode, normalizeMax } from './data.js';
import { Dataset } from './dataset.js';
import { KFinderModel } from './model.js';
import { resizeSquare } from './texture.js';

export interface Prediction {
  index: number;
  kx: number;
  ky: number;
}

export interface PredictionFile {
  source: string;
  predictions: Prediction[];
}

export interface PredictOptions {
  /** Allow resizing dataset rasters down/up to the model's input size. */
  resize?: boolean;
}

function channelFromRaster(raster: Float64Array, srcN: number, n: number): Float64Array {
  return srcN === n ? raster : resizeSquare(raster, srcN, n);
}

/** Run the model over every record of a dataset and collect k estimates.
 *
 * Channels are built exactly as in training: pupil intensity normalized to a
 * max of 1, image intensity raw. When the dataset grid is larger than the
 * model input, rasters are block-averaged down and the predicted shifts are
 * scaled back up by the size ratio, then clamped to the scene's representable
 * range so the output always passes the loader's bounds check.
 */
export function predictDataset(
  model: KFinderModel,
  dataset: Dataset,
  opts: PredictOptions = {},
): PredictionFile {
  const n = model.imageSize;
  const sceneN = dataset.gridSize;
  if (sceneN !== n && !opts.resize) {
    throw new Error(
      `dataset grid ${sceneN} does not match model input ${n}; pass --resize to downsample`,
    );
  }
  const scale = sceneN / n;
  const bound = sceneN / 2 - dataset.apertureRadius;
  const mode: InputMode = model.inputMode;
  const c = model.channels;
  const stride = n * n * c;

  const count = dataset.records.length;
  const inputs = new Float64Array(count * stride);
  for (let i = 0; i < count; i++) {
    const rec = dataset.records[i];
    const image = channelFromRaster(rec.image, sceneN, n);
    const out = inputs.subarray(i * stride, (i + 1) * stride);
    if (mode === 'dual') {
      const pupil = normalizeMax(channelFromRaster(rec.pupil, sceneN, n));
      for (let j = 0; j < n * n; j++) {
        out[j * 2] = pupil[j];
        out[j * 2 + 1] = image[j];
      }
    } else if (mode === 'pupil_only') {
      out.set(normalizeMax(channelFromRaster(rec.pupil, sceneN, n)));
    } else if (mode === 'image_only') {
      out.set(image);
    } else {
      out.set(autocorrelationChannel(image, n));
    }
  }

  const predictions: Prediction[] = [];
  for (let off = 0; off < count; off += 32) {
    const b = Math.min(32, count - off);
    const pred = model.forward(inputs.subarray(off * stride, (off + b) * stride), b);
    for (let i = 0; i < b; i++) {
      const clamp = (v: number) => Math.max(-bound, Math.min(bound, v * scale));
      predictions.push({
        index: dataset.records[off + i].index,
        kx: clamp(pred[i * 2]),
        ky: clamp(pred[i * 2 + 1]),
      });
    }
  }
  return { source: 'kfinder', predictions };
}

export function writePredictions(file: PredictionFile, outPath: string): void {
  fs.writeFileSync(outPath, JSON.stringify(file, null, 2) + '\n');
}

/** Euclidean k RMSE of predictions against the dataset's recorded truth. */
export function rmseAgainstTruth(file: PredictionFile, dataset: Dataset): number {
  const truth = new Map(
    dataset.records.filter((r) => r.trueK !== null).map((r) => [r.index, r.trueK!]),
  );
  let sum = 0;
  let count = 0;
  for (const p of file.predictions) {
    const t = truth.get(p.index);
    if (t === undefined) continue;
    sum += (p.kx - t.kx) ** 2 + (p.ky - t.ky) ** 2;
    count += 1;
  }
  if (count === 0) throw new Error('dataset has no ground-truth shifts to compare against');
  return Math.sqrt(sum / count);
}
