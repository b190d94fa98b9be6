import {
  buildCorpus,
  buildInput,
  channelsFor,
  diskMask,
  generateTrainingPairs,
  prepareImage,
  sampleRaw,
  TrainConfig,
  TrainingPairs,
} from './data.js';
import { Adam, KFinderModel } from './model.js';
import { Rng } from './rng.js';

export interface TrainOptions {
  /** Called after every optimizer step with the batch loss. */
  onStep?: (step: number, loss: number) => void;
  /** Held-out pair count for the final RMSE (default 256). */
  heldoutCount?: number;
  /** When set, every step trains on exactly these pairs (capacity checks). */
  fixedPairs?: TrainingPairs;
}

export interface TrainResult {
  model: KFinderModel;
  /** Per-step mean squared error on k, in squared pixels. */
  losses: number[];
  /** Root mean squared Euclidean k error on unseen textures, in pixels. */
  heldoutRmse: number;
}

/** RMSE of the best constant predictor (the mean, (0,0)) when both shift
 * components are uniform integers on [-maxShift, maxShift]: per-axis second
 * moment is s(s+1)/3, and the Euclidean error sums the two axes. */
export function constantPredictorRmse(maxShift: number): number {
  return Math.sqrt((2 * maxShift * (maxShift + 1)) / 3);
}

/** Euclidean k RMSE of model predictions over a materialized pair set. */
export function evaluateRmse(model: KFinderModel, pairs: TrainingPairs): number {
  const n = model.imageSize;
  const c = model.channels;
  const stride = n * n * c;
  let sum = 0;
  for (let off = 0; off < pairs.count; off += 32) {
    const b = Math.min(32, pairs.count - off);
    const pred = model.forward(pairs.inputs.subarray(off * stride, (off + b) * stride), b);
    for (let i = 0; i < b; i++) {
      const dx = pred[i * 2] - pairs.targets[(off + i) * 2];
      const dy = pred[i * 2 + 1] - pairs.targets[(off + i) * 2 + 1];
      sum += dx * dx + dy * dy;
    }
  }
  return Math.sqrt(sum / pairs.count);
}

/** Train a shift regressor on procedural textures.
 *
 * Everything is drawn from one seeded stream in a fixed order (training
 * corpus, held-out textures, held-out pairs, then per-step batches), so a
 * given config reproduces its loss curve exactly. Held-out textures are
 * generated after the corpus and never enter training.
 */
export function train(cfg: TrainConfig, opts: TrainOptions = {}): TrainResult {
  const n = cfg.imageSize;
  const c = channelsFor(cfg.inputMode);
  const rng = new Rng(cfg.seed);

  const corpus = buildCorpus(cfg.datasetSize, n, rng);
  const prepped = corpus.map((img, i) => prepareImage(img, corpus[(i + 1) % corpus.length], n));
  const mask = diskMask(n, cfg.apertureRadius);

  const heldoutCount = opts.heldoutCount ?? 256;
  const heldTextures = buildCorpus(Math.min(cfg.datasetSize, 16), n, rng);
  const heldout = generateTrainingPairs(heldTextures, cfg, heldoutCount, rng);

  const model = new KFinderModel(n, cfg.inputMode, cfg.seed);
  const adam = new Adam(model.params(), cfg.learningRate);

  const fixed = opts.fixedPairs ?? null;
  const batch = fixed ? fixed.count : cfg.batchSize;
  const inputs = fixed ? fixed.inputs : new Float64Array(batch * n * n * c);
  const targets = fixed ? fixed.targets : new Float64Array(batch * 2);
  const dPred = new Float64Array(batch * 2);

  const losses: number[] = [];
  for (let step = 0; step < cfg.steps; step++) {
    if (!fixed) {
      for (let s = 0; s < batch; s++) {
        const idx = rng.int(0, prepped.length - 1);
        const kx = rng.int(-cfg.maxShift, cfg.maxShift);
        const ky = rng.int(-cfg.maxShift, cfg.maxShift);
        const input = buildInput(sampleRaw(prepped[idx], mask, kx, ky), n, cfg.inputMode);
        inputs.set(input, s * n * n * c);
        targets[s * 2] = kx;
        targets[s * 2 + 1] = ky;
      }
    }
    const pred = model.forward(inputs, batch);
    let loss = 0;
    for (let i = 0; i < batch * 2; i++) {
      const d = pred[i] - targets[i];
      loss += d * d;
      dPred[i] = (2 * d) / (batch * 2);
    }
    loss /= batch * 2;
    if (!Number.isFinite(loss)) {
      throw new Error(
        `training diverged: loss=${loss} at step ${step} ` +
          `(lr=${cfg.learningRate}, mode=${cfg.inputMode}); lower the learning rate`,
      );
    }
    model.backward(dPred);
    adam.step();
    losses.push(loss);
    opts.onStep?.(step, loss);
  }

  return { model, losses, heldoutRmse: evaluateRmse(model, heldout) };
}
