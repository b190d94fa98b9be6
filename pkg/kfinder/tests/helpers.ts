import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';

export interface FakeRecord {
  index: number;
  trueK: { kx: number; ky: number } | null;
  image: Float64Array;
  pupil: Float64Array;
}

/** Write a dataset directory in the simulator's on-disk format. */
export function makeDatasetDir(n: number, radius: number, records: FakeRecord[]): string {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'kfinder-ds-'));
  const meta = records.map((rec, i) => {
    const image = `image_${String(i).padStart(3, '0')}.f32`;
    const pupil = `pupil_${String(i).padStart(3, '0')}.f32`;
    writeF32(path.join(dir, image), rec.image);
    writeF32(path.join(dir, pupil), rec.pupil);
    return {
      index: rec.index,
      angle: { theta_x: 0, theta_y: 0 },
      true_k: rec.trueK,
      image,
      pupil,
    };
  });
  const manifest = {
    format: 'rotoptych-dataset',
    version: 1,
    config: { wavelength: 5e-7, grid_size: n, pixel_pitch: 1e-5, aperture_radius: radius },
    noise: { kind: 'none', sigma: 0, peak: 0 },
    grid_layout: { kind: 'grid', nx: 1, ny: records.length, theta_max: 0.1 },
    records: meta,
  };
  fs.writeFileSync(path.join(dir, 'manifest.json'), JSON.stringify(manifest, null, 2));
  return dir;
}

export function writeF32(file: string, data: Float64Array): void {
  fs.writeFileSync(file, Buffer.from(new Float32Array(data).buffer));
}
