import { fft2d, fftshift2, isPow2 } from './fft.js';
import { Rng } from './rng.js';

/** Procedural grayscale texture in [0, 1]: seeded white noise low-passed by a
 * Gaussian in k-space. `roughness` sets the spectral std as a fraction of the
 * Nyquist radius; higher keeps more high frequencies. */
export function makeTexture(n: number, rng: Rng, roughness = 0.55): Float64Array {
  if (!isPow2(n)) throw new Error(`texture size must be a power of two, got ${n}`);
  const re = new Float64Array(n * n);
  const im = new Float64Array(n * n);
  for (let i = 0; i < re.length; i++) re[i] = rng.normal();
  fft2d(re, im, n, false);
  fftshift2(re, im, n);
  const c = n / 2;
  const sigma = roughness * c;
  for (let y = 0; y < n; y++) {
    for (let x = 0; x < n; x++) {
      const r2 = (y - c) * (y - c) + (x - c) * (x - c);
      const g = Math.exp(-r2 / (2 * sigma * sigma));
      re[y * n + x] *= g;
      im[y * n + x] *= g;
    }
  }
  fftshift2(re, im, n);
  fft2d(re, im, n, true);
  // real part carries the filtered noise; rescale to [0, 1]
  let lo = Infinity;
  let hi = -Infinity;
  for (let i = 0; i < re.length; i++) {
    if (re[i] < lo) lo = re[i];
    if (re[i] > hi) hi = re[i];
  }
  const span = hi - lo || 1;
  const out = new Float64Array(n * n);
  for (let i = 0; i < re.length; i++) out[i] = (re[i] - lo) / span;
  return out;
}

/** Resize a square grayscale image to size n: box average when shrinking by
 * an integer factor, bilinear otherwise (covers upsampling of small inputs). */
export function resizeSquare(src: Float64Array, srcN: number, n: number): Float64Array {
  if (srcN === n) return src.slice();
  const out = new Float64Array(n * n);
  if (srcN > n && srcN % n === 0) {
    const f = srcN / n;
    const inv = 1 / (f * f);
    for (let y = 0; y < n; y++) {
      for (let x = 0; x < n; x++) {
        let acc = 0;
        for (let dy = 0; dy < f; dy++) {
          const row = (y * f + dy) * srcN + x * f;
          for (let dx = 0; dx < f; dx++) acc += src[row + dx];
        }
        out[y * n + x] = acc * inv;
      }
    }
    return out;
  }
  const scale = srcN / n;
  for (let y = 0; y < n; y++) {
    const fy = Math.min((y + 0.5) * scale - 0.5, srcN - 1);
    const y0 = Math.max(0, Math.floor(fy));
    const y1 = Math.min(srcN - 1, y0 + 1);
    const wy = fy - y0;
    for (let x = 0; x < n; x++) {
      const fx = Math.min((x + 0.5) * scale - 0.5, srcN - 1);
      const x0 = Math.max(0, Math.floor(fx));
      const x1 = Math.min(srcN - 1, x0 + 1);
      const wx = fx - x0;
      const v00 = src[y0 * srcN + x0];
      const v01 = src[y0 * srcN + x1];
      const v10 = src[y1 * srcN + x0];
      const v11 = src[y1 * srcN + x1];
      out[y * n + x] =
        v00 * (1 - wy) * (1 - wx) + v01 * (1 - wy) * wx + v10 * wy * (1 - wx) + v11 * wy * wx;
    }
  }
  return out;
}
