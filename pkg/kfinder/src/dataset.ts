import * as fs from 'node:fs';
import * as path from 'node:path';

import { z } from 'zod';

const RecordSchema = z.object({
  index: z.number().int(),
  true_k: z.object({ kx: z.number(), ky: z.number() }).nullable(),
  image: z.string(),
  pupil: z.string(),
});

const ManifestSchema = z.object({
  format: z.literal('rotoptych-dataset'),
  version: z.literal(1),
  config: z.object({
    grid_size: z.number().int().positive(),
    aperture_radius: z.number().positive(),
  }),
  records: z.array(RecordSchema),
});

export interface DatasetRecord {
  index: number;
  trueK: { kx: number; ky: number } | null;
  image: Float64Array;
  pupil: Float64Array;
}

export interface Dataset {
  gridSize: number;
  apertureRadius: number;
  records: DatasetRecord[];
}

/** Raw little-endian float32 raster, row-major, exactly n*n values. */
export function readF32(file: string, n: number): Float64Array {
  const buf = fs.readFileSync(file);
  if (buf.byteLength !== n * n * 4) {
    throw new Error(
      `${path.basename(file)}: expected ${n * n * 4} bytes (${n}x${n} float32), ` +
        `found ${buf.byteLength}`,
    );
  }
  const f32 = new Float32Array(buf.buffer, buf.byteOffset, n * n);
  return Float64Array.from(f32);
}

/** Load a measurement dataset directory written by the simulator. */
export function loadDataset(dir: string): Dataset {
  const manifestPath = path.join(dir, 'manifest.json');
  if (!fs.existsSync(manifestPath)) {
    throw new Error(`${dir}: no manifest.json`);
  }
  const parsed = ManifestSchema.safeParse(JSON.parse(fs.readFileSync(manifestPath, 'utf-8')));
  if (!parsed.success) {
    throw new Error(`${manifestPath}: ${parsed.error.issues[0].message}`);
  }
  const manifest = parsed.data;
  const n = manifest.config.grid_size;
  const records = manifest.records.map((rec) => ({
    index: rec.index,
    trueK: rec.true_k,
    image: readF32(path.join(dir, rec.image), n),
    pupil: readF32(path.join(dir, rec.pupil), n),
  }));
  return { gridSize: n, apertureRadius: manifest.config.aperture_radius, records };
}
