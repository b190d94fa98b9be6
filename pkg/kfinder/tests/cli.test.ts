import { execFileSync, spawnSync } from 'node:child_process';
import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';
import { fileURLToPath } from 'node:url';

import { beforeAll, describe, expect, it } from 'vitest';

import { buildCorpus, diskMask, prepareImage, sampleRaw } from '../src/data.js';
import { Rng } from '../src/rng.js';
import { FakeRecord, makeDatasetDir } from './helpers.js';

const ROOT = fileURLToPath(new URL('..', import.meta.url));
const CLI = path.join(ROOT, 'dist', 'cli.js');

function run(args: string[]): { status: number; stdout: string; stderr: string } {
  const res = spawnSync('node', [CLI, ...args], { encoding: 'utf-8' });
  return { status: res.status ?? -1, stdout: res.stdout, stderr: res.stderr };
}

function tinyDataset(): string {
  const rng = new Rng(17);
  const [amp, ph] = buildCorpus(2, 16, rng);
  const prep = prepareImage(amp, ph, 16);
  const mask = diskMask(16, 2);
  const records: FakeRecord[] = [
    [2, -1],
    [0, 3],
  ].map(([kx, ky], i) => {
    const raw = sampleRaw(prep, mask, kx, ky);
    return { index: i, trueK: { kx, ky }, image: raw.image, pupil: raw.pupil };
  });
  return makeDatasetDir(16, 2, records);
}

describe('kfinder CLI', () => {
  let dir: string;
  let ckpt: string;

  beforeAll(() => {
    execFileSync('npx', ['tsc'], { cwd: ROOT }); // exercise the shipped build
    dir = fs.mkdtempSync(path.join(os.tmpdir(), 'kfinder-cli-'));
    ckpt = path.join(dir, 'ckpt.json');
  }, 120_000);

  it('trains a checkpoint and reports the held-out RMSE', () => {
    const res = run([
      'train',
      '--out', ckpt,
      '--log', path.join(dir, 'log.json'),
      '--dataset-size', '2',
      '--image-size', '8',
      '--aperture-radius', '1',
      '--max-shift', '2',
      '--steps', '3',
      '--batch-size', '4',
      '--quiet',
    ]);
    expect(res.stderr).toBe('');
    expect(res.status).toBe(0);
    expect(res.stdout).toMatch(/heldout k RMSE: [\d.]+ px/);
    expect(res.stdout).toMatch(/baseline 2\.000 px/);
    const log = JSON.parse(fs.readFileSync(path.join(dir, 'log.json'), 'utf-8'));
    expect(log.losses).toHaveLength(3);
    expect(log.heldoutRmse).toBeGreaterThan(0);
    const json = JSON.parse(fs.readFileSync(ckpt, 'utf-8'));
    expect(json.format).toBe('kfinder-checkpoint');
    expect(json.imageSize).toBe(8);
  }, 120_000);

  it('predicts over a dataset directory and scores against truth', () => {
    const ds = tinyDataset();
    const out = path.join(dir, 'pred.json');
    const res = run(['predict', ds, '--checkpoint', ckpt, '--out', out, '--resize']);
    expect(res.status).toBe(0);
    expect(res.stdout).toMatch(/2 predictions written/);
    expect(res.stdout).toMatch(/k RMSE vs recorded truth/);
    const file = JSON.parse(fs.readFileSync(out, 'utf-8'));
    expect(file.source).toBe('kfinder');
    expect(file.predictions).toHaveLength(2);
  }, 60_000);

  it('exits 1 when the model and dataset sizes clash without --resize', () => {
    const ds = tinyDataset(); // 16 px vs the 8 px checkpoint
    const res = run(['predict', ds, '--checkpoint', ckpt, '--out', path.join(dir, 'p2.json')]);
    expect(res.status).toBe(1);
    expect(res.stderr).toMatch(/does not match model input/);
  });

  it('exits 1 on an invalid configuration', () => {
    const res = run([
      'train', '--out', path.join(dir, 'x.json'),
      '--image-size', '8', '--aperture-radius', '2', '--max-shift', '3', '--steps', '1',
    ]);
    expect(res.status).toBe(1);
    expect(res.stderr).toMatch(/error:/);
  });

  it('exits 1 on an unknown input mode', () => {
    const res = run([
      'train', '--out', path.join(dir, 'x.json'), '--input-mode', 'telepathy', '--steps', '1',
    ]);
    expect(res.status).toBe(1);
  });

  it('exits 2 when the checkpoint file is missing', () => {
    const ds = tinyDataset();
    const res = run([
      'predict', ds, '--checkpoint', path.join(dir, 'nope.json'),
      '--out', path.join(dir, 'p3.json'),
    ]);
    expect(res.status).toBe(2);
    expect(res.stderr).toMatch(/error:/);
  });

  it('exits 2 on a directory with no manifest', () => {
    const empty = fs.mkdtempSync(path.join(os.tmpdir(), 'kfinder-none-'));
    const res = run(['predict', empty, '--checkpoint', ckpt, '--out', path.join(dir, 'p4.json')]);
    expect(res.status).toBe(2);
    expect(res.stderr).toMatch(/manifest/);
  });
});
