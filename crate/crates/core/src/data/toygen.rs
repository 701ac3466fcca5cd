//! Procedural toy faces: identity-specific geometry and texture, eight mouth shapes and a
//! three-colour hair band.

use std::f32::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{LabelRecord, LABELS_FILE};
use super::pnm::write_image;
use crate::error::{contract, Error, Result};
use crate::nn::Tensor;
use crate::seed::derive;

pub const EXPRESSION_CLASSES: usize = 8;
pub const HAIR_CLASSES: usize = 3;

const HAIR_COLOURS: [[f32; 3]; HAIR_CLASSES] =
    [[-0.85, -0.85, -0.8], [0.55, 0.05, -0.6], [0.85, 0.75, 0.2]];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyFaceSpec {
    pub identities: usize,
    pub per_identity: usize,
    pub size: usize,
    pub seed: u64,
}

impl ToyFaceSpec {
    pub fn new(identities: usize, per_identity: usize, seed: u64) -> Self {
        ToyFaceSpec {
            identities,
            per_identity,
            size: 32,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        contract!(
            self.identities >= 2,
            "need at least 2 identities, got {}",
            self.identities
        );
        contract!(
            self.per_identity >= 2,
            "need at least 2 images per identity, got {}",
            self.per_identity
        );
        contract!(
            self.size >= 16,
            "toy images must be at least 16 pixels, got {}",
            self.size
        );
        Ok(())
    }
}

/// Everything that stays fixed across one person's images.
struct Person {
    hair: usize,
    skin: [f32; 3],
    background: [[f32; 4]; 3],
    centre: (f32, f32),
    axes: (f32, f32),
    eye_gap: f32,
    eye_height: f32,
    texture: (f32, f32, f32, f32),
}

impl Person {
    fn new(seed: u64, identity: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, &[0, identity as u64]));
        let mut background = [[0.0; 4]; 3];
        for ch in &mut background {
            *ch = [
                rng.gen_range(-0.6..0.6),
                rng.gen_range(0.5..2.5),
                rng.gen_range(0.5..2.5),
                rng.gen_range(0.0..2.0 * PI),
            ];
        }
        Person {
            hair: identity % HAIR_CLASSES,
            skin: [
                rng.gen_range(0.0..0.7),
                rng.gen_range(-0.3..0.4),
                rng.gen_range(-0.6..0.2),
            ],
            background,
            centre: (rng.gen_range(-0.08..0.08), rng.gen_range(0.0..0.1)),
            axes: (rng.gen_range(0.48..0.7), rng.gen_range(0.58..0.78)),
            eye_gap: rng.gen_range(0.18..0.34),
            eye_height: rng.gen_range(-0.28..-0.12),
            texture: (
                rng.gen_range(4.0..9.0),
                rng.gen_range(4.0..9.0),
                rng.gen_range(0.0..2.0 * PI),
                rng.gen_range(0.12..0.3),
            ),
        }
    }
}

/// Renders one `3×size×size` face in `[-1, 1]`.
fn render(p: &Person, expression: usize, size: usize, jitter_seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(jitter_seed);
    let curve = (expression as f32 / (EXPRESSION_CLASSES - 1) as f32) * 2.0 - 1.0;
    let mouth_w = 0.22 + 0.03 * (expression % 3) as f32;
    let shift = (rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02));
    let mut img = vec![0.0f32; 3 * size * size];
    let hw = size * size;
    for row in 0..size {
        for col in 0..size {
            // coordinates in [-1, 1]
            let y = (row as f32 + 0.5) / size as f32 * 2.0 - 1.0;
            let x = (col as f32 + 0.5) / size as f32 * 2.0 - 1.0;
            let mut px = [0.0f32; 3];
            for (ch, b) in p.background.iter().enumerate() {
                px[ch] = b[0] + 0.25 * (b[1] * x + b[2] * y + b[3]).sin();
            }
            let fx = (x - p.centre.0 - shift.0) / p.axes.0;
            let fy = (y - p.centre.1 - shift.1) / p.axes.1;
            let r2 = fx * fx + fy * fy;
            if r2 <= 1.0 {
                let (tx, ty, tp, ta) = p.texture;
                let tex = ta * (tx * fx + tp).sin() * (ty * fy).cos();
                px = p.skin.map(|s| s + tex);
                for side in [-1.0f32, 1.0] {
                    let ex = fx - side * p.eye_gap / p.axes.0;
                    let ey = fy - p.eye_height / p.axes.1;
                    if ex * ex + ey * ey < 0.018 / (p.axes.0 * p.axes.1) {
                        px = [-0.9, -0.9, -0.85];
                    }
                }
                let mx = fx * p.axes.0;
                if mx.abs() < mouth_w {
                    let my = 0.38 + curve * 0.12 * (1.0 - (mx / mouth_w).powi(2));
                    if (fy * p.axes.1 - my).abs() < 0.045 {
                        px = [0.6, -0.7, -0.6];
                    }
                }
            }
            if y < -0.62 && r2 > 0.55 || y < -0.78 {
                px = HAIR_COLOURS[p.hair];
            }
            for ch in 0..3 {
                img[ch * hw + row * size + col] = px[ch].clamp(-1.0, 1.0);
            }
        }
    }
    Tensor::new(vec![3, size, size], img).expect("valid image shape")
}

/// Generates the images and their label records in memory.
pub fn toy_faces(spec: &ToyFaceSpec) -> Result<Vec<(LabelRecord, Tensor)>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.identities * spec.per_identity);
    for id in 0..spec.identities {
        let person = Person::new(spec.seed, id);
        for j in 0..spec.per_identity {
            let expression = j % EXPRESSION_CLASSES;
            let jitter = derive(spec.seed, &[1, id as u64, j as u64]);
            let img = render(&person, expression, spec.size, jitter);
            let rec = LabelRecord {
                file: format!("id{id:03}_{j:02}.ppm"),
                identity: id,
                expression,
                hair: person.hair,
            };
            out.push((rec, img));
        }
    }
    Ok(out)
}

/// Writes the dataset as PPM files plus `labels.json` into `dir` (created if missing).
pub fn toygen(spec: &ToyFaceSpec, dir: &Path) -> Result<Vec<LabelRecord>> {
    let faces = toy_faces(spec)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut records = Vec::with_capacity(faces.len());
    for (rec, img) in faces {
        write_image(&dir.join(&rec.file), &img)?;
        records.push(rec);
    }
    let path = dir.join(LABELS_FILE);
    let json = serde_json::to_vec_pretty(&records).map_err(|e| Error::json(&path, e))?;
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(records)
}
