#!/usr/bin/env node
import * as fs from 'node:fs';

import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';
import { z } from 'zod';

import { InputMode, TrainConfigSchema } from './data.js';
import { loadDataset } from './dataset.js';
import { CheckpointJson, KFinderModel } from './model.js';
import { predictDataset, rmseAgainstTruth, writePredictions } from './predict.js';
import { constantPredictorRmse, train } from './train.js';

const EXIT_VALIDATION = 1;
const EXIT_IO = 2;

interface TrainArgs {
  out: string;
  log?: string;
  datasetSize: number;
  imageSize: number;
  apertureRadius: number;
  maxShift: number;
  learningRate: number;
  batchSize: number;
  steps: number;
  inputMode: string;
  seed: number;
  quiet: boolean;
}

function cmdTrain(args: TrainArgs): void {
  const cfg = TrainConfigSchema.parse({
    datasetSize: args.datasetSize,
    imageSize: args.imageSize,
    apertureRadius: args.apertureRadius,
    maxShift: args.maxShift,
    learningRate: args.learningRate,
    batchSize: args.batchSize,
    steps: args.steps,
    inputMode: args.inputMode,
    seed: args.seed,
  });
  const started = Date.now();
  const result = train(cfg, {
    onStep: (step, loss) => {
      if (args.quiet || (step + 1) % 10 !== 0) return;
      const rate = ((Date.now() - started) / 1000 / (step + 1)).toFixed(2);
      process.stderr.write(`step ${step + 1}/${cfg.steps} loss ${loss.toFixed(4)} (${rate} s/step)\n`);
    },
  });
  fs.writeFileSync(args.out, JSON.stringify(result.model.toJSON()) + '\n');
  if (args.log) {
    fs.writeFileSync(
      args.log,
      JSON.stringify({ losses: result.losses, heldoutRmse: result.heldoutRmse }, null, 2) + '\n',
    );
  }
  const baseline = constantPredictorRmse(cfg.maxShift);
  console.log(`checkpoint written to ${args.out}`);
  console.log(
    `heldout k RMSE: ${result.heldoutRmse.toFixed(3)} px ` +
      `(constant-predictor baseline ${baseline.toFixed(3)} px)`,
  );
}

interface PredictArgs {
  dataset: string;
  checkpoint: string;
  out: string;
  resize: boolean;
}

function cmdPredict(args: PredictArgs): void {
  const json = JSON.parse(fs.readFileSync(args.checkpoint, 'utf-8')) as CheckpointJson;
  const model = KFinderModel.fromJSON(json);
  const dataset = loadDataset(args.dataset);
  const file = predictDataset(model, dataset, { resize: args.resize });
  writePredictions(file, args.out);
  console.log(`${file.predictions.length} predictions written to ${args.out}`);
  if (dataset.records.some((r) => r.trueK !== null)) {
    console.log(`k RMSE vs recorded truth: ${rmseAgainstTruth(file, dataset).toFixed(3)} px`);
  }
}

export function main(argv: string[]): void {
  yargs(argv)
    .scriptName('kfinder')
    .strict()
    .command(
      'train',
      'train a k-shift regressor on procedural textures',
      (y) =>
        y
          .option('out', { type: 'string', demandOption: true, describe: 'checkpoint path' })
          .option('log', { type: 'string', describe: 'write per-step losses as JSON' })
          .option('dataset-size', { type: 'number', default: 512, describe: 'training textures' })
          .option('image-size', { type: 'number', default: 16 })
          .option('aperture-radius', { type: 'number', default: 2 })
          .option('max-shift', { type: 'number', default: 4 })
          .option('learning-rate', { type: 'number', default: 1e-3 })
          .option('batch-size', { type: 'number', default: 32 })
          .option('steps', { type: 'number', default: 300 })
          .option('input-mode', {
            type: 'string',
            default: 'dual',
            choices: InputMode.options,
          })
          .option('seed', { type: 'number', default: 0 })
          .option('quiet', { type: 'boolean', default: false }),
      (a) => cmdTrain(a as unknown as TrainArgs),
    )
    .command(
      'predict <dataset>',
      'estimate k for every record of a measurement dataset',
      (y) =>
        y
          .positional('dataset', { type: 'string', demandOption: true })
          .option('checkpoint', { type: 'string', demandOption: true })
          .option('out', { type: 'string', demandOption: true, describe: 'prediction JSON path' })
          .option('resize', {
            type: 'boolean',
            default: false,
            describe: 'block-average rasters to the model input size',
          }),
      (a) => cmdPredict(a as unknown as PredictArgs),
    )
    .demandCommand(1)
    .fail((msg, err) => {
      if (err) throw err;
      process.stderr.write(`error: ${msg}\n`);
      process.exit(EXIT_VALIDATION);
    })
    .parseSync();
}

function exitCodeFor(err: unknown): number {
  if (err instanceof z.ZodError) return EXIT_VALIDATION;
  if (err instanceof SyntaxError) return EXIT_IO;
  const code = (err as NodeJS.ErrnoException).code;
  if (code === 'ENOENT' || code === 'EACCES' || code === 'EISDIR') return EXIT_IO;
  if (err instanceof Error && / no manifest\.json|bytes .*found/.test(err.message)) return EXIT_IO;
  return EXIT_VALIDATION;
}

try {
  main(hideBin(process.argv));
} catch (err) {
  const msg =
    err instanceof z.ZodError ? err.issues.map((i) => i.message).join('; ') : String(err instanceof Error ? err.message : err);
  process.stderr.write(`error: ${msg}\n`);
  process.exit(exitCodeFor(err));
}
