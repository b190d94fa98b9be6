import { Buffer } from 'node:buffer';

import { channelsFor, InputMode } from './data.js';
import { Rng } from './rng.js';

/** Typed-array CNN engine.
 *
 * No JS tensor framework in this environment can train convolutions at a
 * usable speed (the pure-JS tfjs CPU backend measures minutes per batch on
 * these shapes, the wasm backend has no conv backprop kernels, and the
 * native binding's binary host is unreachable), so the fixed architecture
 * is implemented directly: every conv and dense op lowers to one blocked
 * matmul, with im2col staging for the convs. Layout is HWC row-major.
 */

// ---------------------------------------------------------------------------
// matmul kernels, 2 rows x 4 cols register blocking with scalar edge handling

/** C[M,N] = A[M,K] * B[K,N] */
export function mm(
  A: Float64Array,
  B: Float64Array,
  C: Float64Array,
  M: number,
  K: number,
  N: number,
): void {
  const M2 = M & ~1;
  const N4 = N & ~3;
  for (let i = 0; i < M2; i += 2) {
    const a0 = i * K;
    const a1 = a0 + K;
    const c0 = i * N;
    const c1 = c0 + N;
    for (let j = 0; j < N4; j += 4) {
      let s00 = 0, s01 = 0, s02 = 0, s03 = 0;
      let s10 = 0, s11 = 0, s12 = 0, s13 = 0;
      for (let k = 0; k < K; k++) {
        const va0 = A[a0 + k];
        const va1 = A[a1 + k];
        const bk = k * N + j;
        const b0 = B[bk], b1 = B[bk + 1], b2 = B[bk + 2], b3 = B[bk + 3];
        s00 += va0 * b0; s01 += va0 * b1; s02 += va0 * b2; s03 += va0 * b3;
        s10 += va1 * b0; s11 += va1 * b1; s12 += va1 * b2; s13 += va1 * b3;
      }
      C[c0 + j] = s00; C[c0 + j + 1] = s01; C[c0 + j + 2] = s02; C[c0 + j + 3] = s03;
      C[c1 + j] = s10; C[c1 + j + 1] = s11; C[c1 + j + 2] = s12; C[c1 + j + 3] = s13;
    }
    for (let j = N4; j < N; j++) {
      let s0 = 0, s1 = 0;
      for (let k = 0; k < K; k++) {
        const b = B[k * N + j];
        s0 += A[a0 + k] * b;
        s1 += A[a1 + k] * b;
      }
      C[c0 + j] = s0;
      C[c1 + j] = s1;
    }
  }
  for (let i = M2; i < M; i++) {
    const ai = i * K;
    const ci = i * N;
    for (let j = 0; j < N; j++) {
      let s = 0;
      for (let k = 0; k < K; k++) s += A[ai + k] * B[k * N + j];
      C[ci + j] = s;
    }
  }
}

/** C[K,N] = A^T * B with A[M,K], B[M,N] (weight gradients). */
export function mmAtB(
  A: Float64Array,
  B: Float64Array,
  C: Float64Array,
  M: number,
  K: number,
  N: number,
): void {
  C.fill(0);
  const N4 = N & ~3;
  for (let m = 0; m < M; m++) {
    const am = m * K;
    const bm = m * N;
    for (let k = 0; k < K; k++) {
      const a = A[am + k];
      if (a === 0) continue;
      const ck = k * N;
      let j = 0;
      for (; j < N4; j += 4) {
        C[ck + j] += a * B[bm + j];
        C[ck + j + 1] += a * B[bm + j + 1];
        C[ck + j + 2] += a * B[bm + j + 2];
        C[ck + j + 3] += a * B[bm + j + 3];
      }
      for (; j < N; j++) C[ck + j] += a * B[bm + j];
    }
  }
}

/** C[M,K] = A * B^T with A[M,N], B[K,N] (input gradients). */
export function mmABt(
  A: Float64Array,
  B: Float64Array,
  C: Float64Array,
  M: number,
  K: number,
  N: number,
): void {
  const M2 = M & ~1;
  const K4 = K & ~3;
  for (let i = 0; i < M2; i += 2) {
    const a0 = i * N;
    const a1 = a0 + N;
    const c0 = i * K;
    const c1 = c0 + K;
    for (let j = 0; j < K4; j += 4) {
      let s00 = 0, s01 = 0, s02 = 0, s03 = 0;
      let s10 = 0, s11 = 0, s12 = 0, s13 = 0;
      const b0 = j * N, b1 = b0 + N, b2 = b1 + N, b3 = b2 + N;
      for (let k = 0; k < N; k++) {
        const va0 = A[a0 + k];
        const va1 = A[a1 + k];
        const w0 = B[b0 + k], w1 = B[b1 + k], w2 = B[b2 + k], w3 = B[b3 + k];
        s00 += va0 * w0; s01 += va0 * w1; s02 += va0 * w2; s03 += va0 * w3;
        s10 += va1 * w0; s11 += va1 * w1; s12 += va1 * w2; s13 += va1 * w3;
      }
      C[c0 + j] = s00; C[c0 + j + 1] = s01; C[c0 + j + 2] = s02; C[c0 + j + 3] = s03;
      C[c1 + j] = s10; C[c1 + j + 1] = s11; C[c1 + j + 2] = s12; C[c1 + j + 3] = s13;
    }
    for (let j = K4; j < K; j++) {
      let s0 = 0, s1 = 0;
      const bj = j * N;
      for (let k = 0; k < N; k++) {
        const w = B[bj + k];
        s0 += A[a0 + k] * w;
        s1 += A[a1 + k] * w;
      }
      C[c0 + j] = s0;
      C[c1 + j] = s1;
    }
  }
  for (let i = M2; i < M; i++) {
    const ai = i * N;
    const ci = i * K;
    for (let j = 0; j < K; j++) {
      let s = 0;
      const bj = j * N;
      for (let k = 0; k < N; k++) s += A[ai + k] * B[bj + k];
      C[ci + j] = s;
    }
  }
}

// ---------------------------------------------------------------------------

export interface Param {
  value: Float64Array;
  grad: Float64Array;
}

/** 3x3 same-padding convolution (stride 1) with optional ReLU. */
export class Conv3x3 {
  readonly w: Param;
  readonly b: Param;
  private cols: Float64Array = new Float64Array(0);
  private dcols: Float64Array = new Float64Array(0);
  private mask: Uint8Array = new Uint8Array(0);
  private lastBatch = 0;

  constructor(
    readonly cin: number,
    readonly cout: number,
    readonly size: number,
    readonly relu: boolean,
    rng: Rng,
  ) {
    const k = 9 * cin;
    const std = Math.sqrt(2 / k);
    const w = new Float64Array(k * cout);
    for (let i = 0; i < w.length; i++) w[i] = rng.normal() * std;
    this.w = { value: w, grad: new Float64Array(w.length) };
    this.b = { value: new Float64Array(cout), grad: new Float64Array(cout) };
  }

  private im2col(x: Float64Array, batch: number): void {
    const n = this.size;
    const cin = this.cin;
    const K = 9 * cin;
    const rows = batch * n * n;
    if (this.cols.length < rows * K) {
      this.cols = new Float64Array(rows * K);
      this.dcols = new Float64Array(rows * K);
    }
    const cols = this.cols;
    cols.fill(0, 0, rows * K);
    for (let b = 0; b < batch; b++) {
      const xb = b * n * n * cin;
      const rb = b * n * n;
      for (let y = 0; y < n; y++) {
        for (let x0 = 0; x0 < n; x0++) {
          const row = (rb + y * n + x0) * K;
          let t = 0;
          for (let dy = -1; dy <= 1; dy++) {
            const sy = y + dy;
            for (let dx = -1; dx <= 1; dx++, t++) {
              const sx = x0 + dx;
              if (sy < 0 || sy >= n || sx < 0 || sx >= n) continue;
              const src = xb + (sy * n + sx) * cin;
              const dst = row + t * cin;
              for (let c = 0; c < cin; c++) cols[dst + c] = x[src + c];
            }
          }
        }
      }
    }
  }

  forward(x: Float64Array, batch: number, out: Float64Array): void {
    const n = this.size;
    const rows = batch * n * n;
    const K = 9 * this.cin;
    this.im2col(x, batch);
    this.lastBatch = batch;
    mm(this.cols, this.w.value, out, rows, K, this.cout);
    if (this.mask.length < rows * this.cout) this.mask = new Uint8Array(rows * this.cout);
    for (let r = 0; r < rows; r++) {
      const o = r * this.cout;
      for (let c = 0; c < this.cout; c++) {
        let v = out[o + c] + this.b.value[c];
        if (this.relu) {
          this.mask[o + c] = v > 0 ? 1 : 0;
          if (v <= 0) v = 0;
        }
        out[o + c] = v;
      }
    }
  }

  /** dy is modified in place (ReLU gating). Returns grads into this.w/this.b;
   * writes input gradient into dx when provided. */
  backward(dy: Float64Array, dx: Float64Array | null): void {
    const n = this.size;
    const batch = this.lastBatch;
    const rows = batch * n * n;
    const K = 9 * this.cin;
    if (this.relu) {
      for (let i = 0; i < rows * this.cout; i++) if (!this.mask[i]) dy[i] = 0;
    }
    mmAtB(this.cols, dy, this.w.grad, rows, K, this.cout);
    const gb = this.b.grad;
    gb.fill(0);
    for (let r = 0; r < rows; r++) {
      const o = r * this.cout;
      for (let c = 0; c < this.cout; c++) gb[c] += dy[o + c];
    }
    if (dx === null) return;
    mmABt(dy, this.w.value, this.dcols, rows, K, this.cout);
    dx.fill(0, 0, batch * n * n * this.cin);
    const cin = this.cin;
    const dcols = this.dcols;
    for (let b = 0; b < batch; b++) {
      const xb = b * n * n * cin;
      const rb = b * n * n;
      for (let y = 0; y < n; y++) {
        for (let x0 = 0; x0 < n; x0++) {
          const row = (rb + y * n + x0) * K;
          let t = 0;
          for (let dy2 = -1; dy2 <= 1; dy2++) {
            const sy = y + dy2;
            for (let dx2 = -1; dx2 <= 1; dx2++, t++) {
              const sx = x0 + dx2;
              if (sy < 0 || sy >= n || sx < 0 || sx >= n) continue;
              const dst = xb + (sy * n + sx) * cin;
              const src = row + t * cin;
              for (let c = 0; c < cin; c++) dx[dst + c] += dcols[src + c];
            }
          }
        }
      }
    }
  }
}

/** 2x2 max pooling, stride 2. */
export class MaxPool2 {
  private argmax: Int32Array = new Int32Array(0);
  private lastBatch = 0;

  constructor(readonly size: number, readonly channels: number) {}

  get outSize(): number {
    return this.size >> 1;
  }

  forward(x: Float64Array, batch: number, out: Float64Array): void {
    const n = this.size;
    const h = this.outSize;
    const C = this.channels;
    this.lastBatch = batch;
    if (this.argmax.length < batch * h * h * C) this.argmax = new Int32Array(batch * h * h * C);
    for (let b = 0; b < batch; b++) {
      const xb = b * n * n * C;
      const ob = b * h * h * C;
      for (let y = 0; y < h; y++) {
        for (let x0 = 0; x0 < h; x0++) {
          const o = ob + (y * h + x0) * C;
          const i00 = xb + (2 * y * n + 2 * x0) * C;
          const i01 = i00 + C;
          const i10 = i00 + n * C;
          const i11 = i10 + C;
          for (let c = 0; c < C; c++) {
            let best = x[i00 + c];
            let arg = i00 + c;
            if (x[i01 + c] > best) { best = x[i01 + c]; arg = i01 + c; }
            if (x[i10 + c] > best) { best = x[i10 + c]; arg = i10 + c; }
            if (x[i11 + c] > best) { best = x[i11 + c]; arg = i11 + c; }
            out[o + c] = best;
            this.argmax[o + c] = arg;
          }
        }
      }
    }
  }

  backward(dy: Float64Array, dx: Float64Array): void {
    const h = this.outSize;
    const C = this.channels;
    const count = this.lastBatch * h * h * C;
    dx.fill(0, 0, this.lastBatch * this.size * this.size * C);
    for (let i = 0; i < count; i++) dx[this.argmax[i]] += dy[i];
  }
}

/** Fully connected layer with optional ReLU. */
export class Dense {
  readonly w: Param;
  readonly b: Param;
  private x: Float64Array = new Float64Array(0);
  private mask: Uint8Array = new Uint8Array(0);
  private lastBatch = 0;

  constructor(readonly fin: number, readonly fout: number, readonly relu: boolean, rng: Rng) {
    const std = relu ? Math.sqrt(2 / fin) : Math.sqrt(1 / fin);
    const w = new Float64Array(fin * fout);
    for (let i = 0; i < w.length; i++) w[i] = rng.normal() * std;
    this.w = { value: w, grad: new Float64Array(w.length) };
    this.b = { value: new Float64Array(fout), grad: new Float64Array(fout) };
  }

  forward(x: Float64Array, batch: number, out: Float64Array): void {
    this.lastBatch = batch;
    if (this.x.length < batch * this.fin) this.x = new Float64Array(batch * this.fin);
    this.x.set(x.subarray(0, batch * this.fin));
    mm(x, this.w.value, out, batch, this.fin, this.fout);
    if (this.mask.length < batch * this.fout) this.mask = new Uint8Array(batch * this.fout);
    for (let r = 0; r < batch; r++) {
      const o = r * this.fout;
      for (let c = 0; c < this.fout; c++) {
        let v = out[o + c] + this.b.value[c];
        if (this.relu) {
          this.mask[o + c] = v > 0 ? 1 : 0;
          if (v <= 0) v = 0;
        }
        out[o + c] = v;
      }
    }
  }

  backward(dy: Float64Array, dx: Float64Array | null): void {
    const batch = this.lastBatch;
    if (this.relu) {
      for (let i = 0; i < batch * this.fout; i++) if (!this.mask[i]) dy[i] = 0;
    }
    mmAtB(this.x, dy, this.w.grad, batch, this.fin, this.fout);
    const gb = this.b.grad;
    gb.fill(0);
    for (let r = 0; r < batch; r++) {
      const o = r * this.fout;
      for (let c = 0; c < this.fout; c++) gb[c] += dy[o + c];
    }
    if (dx !== null) mmABt(dy, this.w.value, dx, batch, this.fin, this.fout);
  }
}

// ---------------------------------------------------------------------------

export const CONV_CHANNELS = [32, 64, 128] as const;
export const FC_WIDTHS = [64, 32, 16, 2] as const;

/** Shift regressor: three 3x3 convs with increasing channel depth, one max
 * pool after the last conv, then a four-layer head down to (kx, ky). */
export class KFinderModel {
  readonly channels: number;
  readonly conv1: Conv3x3;
  readonly conv2: Conv3x3;
  readonly conv3: Conv3x3;
  readonly pool: MaxPool2;
  readonly fc1: Dense;
  readonly fc2: Dense;
  readonly fc3: Dense;
  readonly fc4: Dense;

  // activation buffers, sized on first forward
  private a1 = new Float64Array(0);
  private a2 = new Float64Array(0);
  private a3 = new Float64Array(0);
  private p = new Float64Array(0);
  private h1 = new Float64Array(0);
  private h2 = new Float64Array(0);
  private h3 = new Float64Array(0);
  private out = new Float64Array(0);
  private g1 = new Float64Array(0);
  private g2 = new Float64Array(0);
  private g3 = new Float64Array(0);
  private gp = new Float64Array(0);
  private gh1 = new Float64Array(0);
  private gh2 = new Float64Array(0);
  private gh3 = new Float64Array(0);
  private lastBatch = 0;

  constructor(
    readonly imageSize: number,
    readonly inputMode: InputMode,
    seed = 0,
  ) {
    if (imageSize % 2 !== 0) throw new Error('imageSize must be even');
    this.channels = channelsFor(inputMode);
    const rng = new Rng(seed);
    const n = imageSize;
    this.conv1 = new Conv3x3(this.channels, CONV_CHANNELS[0], n, true, rng);
    this.conv2 = new Conv3x3(CONV_CHANNELS[0], CONV_CHANNELS[1], n, true, rng);
    this.conv3 = new Conv3x3(CONV_CHANNELS[1], CONV_CHANNELS[2], n, true, rng);
    this.pool = new MaxPool2(n, CONV_CHANNELS[2]);
    const flat = (n >> 1) * (n >> 1) * CONV_CHANNELS[2];
    this.fc1 = new Dense(flat, FC_WIDTHS[0], true, rng);
    this.fc2 = new Dense(FC_WIDTHS[0], FC_WIDTHS[1], true, rng);
    this.fc3 = new Dense(FC_WIDTHS[1], FC_WIDTHS[2], true, rng);
    this.fc4 = new Dense(FC_WIDTHS[2], FC_WIDTHS[3], false, rng);
  }

  params(): Param[] {
    const layers = [this.conv1, this.conv2, this.conv3, this.fc1, this.fc2, this.fc3, this.fc4];
    return layers.flatMap((l) => [l.w, l.b]);
  }

  countParams(): number {
    return this.params().reduce((acc, p) => acc + p.value.length, 0);
  }

  private ensure(batch: number): void {
    const n = this.imageSize;
    const area = n * n;
    const need = batch * area;
    if (this.a1.length >= need * CONV_CHANNELS[0]) return;
    this.a1 = new Float64Array(need * CONV_CHANNELS[0]);
    this.a2 = new Float64Array(need * CONV_CHANNELS[1]);
    this.a3 = new Float64Array(need * CONV_CHANNELS[2]);
    this.p = new Float64Array((need >> 2) * CONV_CHANNELS[2]);
    this.h1 = new Float64Array(batch * FC_WIDTHS[0]);
    this.h2 = new Float64Array(batch * FC_WIDTHS[1]);
    this.h3 = new Float64Array(batch * FC_WIDTHS[2]);
    this.out = new Float64Array(batch * FC_WIDTHS[3]);
    this.g1 = new Float64Array(this.a1.length);
    this.g2 = new Float64Array(this.a2.length);
    this.g3 = new Float64Array(this.a3.length);
    this.gp = new Float64Array(this.p.length);
    this.gh1 = new Float64Array(this.h1.length);
    this.gh2 = new Float64Array(this.h2.length);
    this.gh3 = new Float64Array(this.h3.length);
  }

  /** Predictions for a batch in HWC layout; returns a view valid until the
   * next forward call. */
  forward(x: Float64Array, batch: number): Float64Array {
    const n = this.imageSize;
    if (x.length < batch * n * n * this.channels) {
      throw new Error(
        `input length ${x.length} < batch ${batch} x ${n}x${n}x${this.channels}`,
      );
    }
    this.ensure(batch);
    this.lastBatch = batch;
    this.conv1.forward(x, batch, this.a1);
    this.conv2.forward(this.a1, batch, this.a2);
    this.conv3.forward(this.a2, batch, this.a3);
    this.pool.forward(this.a3, batch, this.p);
    this.fc1.forward(this.p, batch, this.h1);
    this.fc2.forward(this.h1, batch, this.h2);
    this.fc3.forward(this.h2, batch, this.h3);
    this.fc4.forward(this.h3, batch, this.out);
    return this.out.subarray(0, batch * 2);
  }

  /** Backpropagate dL/dPredictions from the latest forward. */
  backward(dPred: Float64Array): void {
    const batch = this.lastBatch;
    this.fc4.backward(dPred, this.gh3);
    this.fc3.backward(this.gh3, this.gh2);
    this.fc2.backward(this.gh2, this.gh1);
    this.fc1.backward(this.gh1, this.gp);
    this.pool.backward(this.gp, this.g3);
    this.conv3.backward(this.g3, this.g2);
    this.conv2.backward(this.g2, this.g1);
    this.conv1.backward(this.g1, null); // input gradient is never needed
  }

  toJSON(): CheckpointJson {
    const enc = (p: Param) => Buffer.from(new Float32Array(p.value).buffer).toString('base64');
    const layer = (l: Conv3x3 | Dense) => ({ w: enc(l.w), b: enc(l.b) });
    return {
      format: 'kfinder-checkpoint',
      version: 1,
      imageSize: this.imageSize,
      inputMode: this.inputMode,
      layers: {
        conv1: layer(this.conv1),
        conv2: layer(this.conv2),
        conv3: layer(this.conv3),
        fc1: layer(this.fc1),
        fc2: layer(this.fc2),
        fc3: layer(this.fc3),
        fc4: layer(this.fc4),
      },
    };
  }

  static fromJSON(json: CheckpointJson): KFinderModel {
    if (json.format !== 'kfinder-checkpoint' || json.version !== 1) {
      throw new Error('not a kfinder checkpoint');
    }
    const model = new KFinderModel(json.imageSize, InputMode.parse(json.inputMode), 0);
    const dec = (s: string, p: Param) => {
      const buf = Buffer.from(s, 'base64');
      const f32 = new Float32Array(buf.buffer, buf.byteOffset, buf.byteLength / 4);
      if (f32.length !== p.value.length) {
        throw new Error(`checkpoint layer size ${f32.length} != expected ${p.value.length}`);
      }
      for (let i = 0; i < f32.length; i++) p.value[i] = f32[i];
    };
    const names = ['conv1', 'conv2', 'conv3', 'fc1', 'fc2', 'fc3', 'fc4'] as const;
    const layers = [model.conv1, model.conv2, model.conv3, model.fc1, model.fc2, model.fc3,
      model.fc4];
    names.forEach((name, i) => {
      dec(json.layers[name].w, layers[i].w);
      dec(json.layers[name].b, layers[i].b);
    });
    return model;
  }
}

export interface CheckpointJson {
  format: string;
  version: number;
  imageSize: number;
  inputMode: string;
  layers: Record<'conv1' | 'conv2' | 'conv3' | 'fc1' | 'fc2' | 'fc3' | 'fc4',
    { w: string; b: string }>;
}

/** Adam with the usual bias correction; hyperparameters fixed apart from the
 * learning rate. */
export class Adam {
  private m: Float64Array[] = [];
  private v: Float64Array[] = [];
  private t = 0;

  constructor(
    readonly params: Param[],
    readonly lr: number,
    readonly beta1 = 0.9,
    readonly beta2 = 0.999,
    readonly eps = 1e-8,
  ) {
    for (const p of params) {
      this.m.push(new Float64Array(p.value.length));
      this.v.push(new Float64Array(p.value.length));
    }
  }

  step(): void {
    this.t += 1;
    const c1 = 1 - Math.pow(this.beta1, this.t);
    const c2 = 1 - Math.pow(this.beta2, this.t);
    for (let i = 0; i < this.params.length; i++) {
      const { value, grad } = this.params[i];
      const m = this.m[i];
      const v = this.v[i];
      for (let j = 0; j < value.length; j++) {
        const g = grad[j];
        m[j] = this.beta1 * m[j] + (1 - this.beta1) * g;
        v[j] = this.beta2 * v[j] + (1 - this.beta2) * g * g;
        value[j] -= (this.lr * (m[j] / c1)) / (Math.sqrt(v[j] / c2) + this.eps);
      }
    }
  }
}
