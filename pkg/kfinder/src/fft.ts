/** Radix-2 FFT and the centered unitary 2-D transform pair used by the
 * measurement model. Grids must be powers of two (training runs at 16 or
 * 32; dataset rasters are 64+). The centered convention matches the solver
 * package: DC sits at index (n/2, n/2) and the transform is unitary, so
 * Parseval holds without extra factors. */

export function isPow2(n: number): boolean {
  return n > 0 && (n & (n - 1)) === 0;
}

/** In-place iterative Cooley-Tukey on interleaved re/im arrays of length n. */
export function fft1d(re: Float64Array, im: Float64Array, inverse: boolean): void {
  const n = re.length;
  if (!isPow2(n)) throw new Error(`fft length must be a power of two, got ${n}`);
  // bit-reversal permutation
  for (let i = 1, j = 0; i < n; i++) {
    let bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      const tr = re[i];
      re[i] = re[j];
      re[j] = tr;
      const ti = im[i];
      im[i] = im[j];
      im[j] = ti;
    }
  }
  for (let len = 2; len <= n; len <<= 1) {
    const ang = ((inverse ? 2 : -2) * Math.PI) / len;
    const wr = Math.cos(ang);
    const wi = Math.sin(ang);
    for (let i = 0; i < n; i += len) {
      let cr = 1;
      let ci = 0;
      const half = len >> 1;
      for (let k = 0; k < half; k++) {
        const a = i + k;
        const b = a + half;
        const ur = re[a];
        const ui = im[a];
        const vr = re[b] * cr - im[b] * ci;
        const vi = re[b] * ci + im[b] * cr;
        re[a] = ur + vr;
        im[a] = ui + vi;
        re[b] = ur - vr;
        im[b] = ui - vi;
        const ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

/** 2-D FFT over an n*n row-major grid, rows then columns, no normalization. */
export function fft2d(re: Float64Array, im: Float64Array, n: number, inverse: boolean): void {
  if (re.length !== n * n) throw new Error('fft2d: array length does not match n*n');
  const rowRe = new Float64Array(n);
  const rowIm = new Float64Array(n);
  for (let y = 0; y < n; y++) {
    const off = y * n;
    rowRe.set(re.subarray(off, off + n));
    rowIm.set(im.subarray(off, off + n));
    fft1d(rowRe, rowIm, inverse);
    re.set(rowRe, off);
    im.set(rowIm, off);
  }
  const colRe = new Float64Array(n);
  const colIm = new Float64Array(n);
  for (let x = 0; x < n; x++) {
    for (let y = 0; y < n; y++) {
      colRe[y] = re[y * n + x];
      colIm[y] = im[y * n + x];
    }
    fft1d(colRe, colIm, inverse);
    for (let y = 0; y < n; y++) {
      re[y * n + x] = colRe[y];
      im[y * n + x] = colIm[y];
    }
  }
}

/** Circular shift of an n*n grid by (dy, dx); returns a new array. */
export function roll2(src: Float64Array, n: number, dy: number, dx: number): Float64Array {
  const out = new Float64Array(n * n);
  const sy = ((dy % n) + n) % n;
  const sx = ((dx % n) + n) % n;
  for (let y = 0; y < n; y++) {
    const ty = (y + sy) % n;
    for (let x = 0; x < n; x++) {
      out[ty * n + ((x + sx) % n)] = src[y * n + x];
    }
  }
  return out;
}

/** fftshift == ifftshift for even n: swap quadrants in place. */
export function fftshift2(re: Float64Array, im: Float64Array | null, n: number): void {
  const h = n >> 1;
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < n; x++) {
      const a = y * n + x;
      const b = ((y + h) % n) * n + ((x + h) % n);
      const tr = re[a];
      re[a] = re[b];
      re[b] = tr;
      if (im) {
        const ti = im[a];
        im[a] = im[b];
        im[b] = ti;
      }
    }
  }
}

export interface ComplexGrid {
  re: Float64Array;
  im: Float64Array;
  n: number;
}

/** Centered unitary forward transform: spatial raster -> spectrum with DC at
 * (n/2, n/2). Mirrors fftshift(fft2(ifftshift(x))) / n. */
export function fft2Centered(g: ComplexGrid): ComplexGrid {
  const re = g.re.slice();
  const im = g.im.slice();
  fftshift2(re, im, g.n);
  fft2d(re, im, g.n, false);
  fftshift2(re, im, g.n);
  const s = 1 / g.n;
  for (let i = 0; i < re.length; i++) {
    re[i] *= s;
    im[i] *= s;
  }
  return { re, im, n: g.n };
}

/** Centered unitary inverse transform. */
export function ifft2Centered(g: ComplexGrid): ComplexGrid {
  const re = g.re.slice();
  const im = g.im.slice();
  fftshift2(re, im, g.n);
  fft2d(re, im, g.n, true);
  fftshift2(re, im, g.n);
  const s = 1 / g.n;
  for (let i = 0; i < re.length; i++) {
    re[i] *= s;
    im[i] *= s;
  }
  return { re, im, n: g.n };
}
