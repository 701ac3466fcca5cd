//! Sharpness (variance of the Laplacian) and re-identification rate.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::data::ImageSet;
use crate::error::{contract, Result};
use crate::ksame::{embed_set, DeidentifiedSet};
use crate::models::ModelParams;
use crate::nn::Tensor;
use crate::par;

pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Row-major `H×W` luminance of a `3×H×W` (or the plane of a `1×H×W`) image.
pub fn luminance(image: &Tensor) -> Result<(Vec<f64>, usize, usize)> {
    let s = image.shape();
    contract!(
        s.len() == 3 && (s[0] == 1 || s[0] == 3),
        "expected a 1×H×W or 3×H×W image, got {s:?}"
    );
    let (h, w) = (s[1], s[2]);
    let d = image.data();
    let gray = if s[0] == 1 {
        d.iter().map(|&v| v as f64).collect()
    } else {
        (0..h * w)
            .map(|i| {
                LUMA[0] * d[i] as f64
                    + LUMA[1] * d[h * w + i] as f64
                    + LUMA[2] * d[2 * h * w + i] as f64
            })
            .collect()
    };
    Ok((gray, h, w))
}

/// Population variance of the 4-neighbour Laplacian over the valid (unpadded) region.
pub fn laplacian_variance(gray: &[f64], h: usize, w: usize) -> Result<f64> {
    contract!(h >= 3 && w >= 3, "image must be at least 3×3, got {h}×{w}");
    contract!(
        gray.len() == h * w,
        "expected {} values, got {}",
        h * w,
        gray.len()
    );
    let at = |r: usize, c: usize| gray[r * w + c];
    let mut resp = Vec::with_capacity((h - 2) * (w - 2));
    for r in 1..h - 1 {
        for c in 1..w - 1 {
            resp.push(at(r - 1, c) + at(r + 1, c) + at(r, c - 1) + at(r, c + 1) - 4.0 * at(r, c));
        }
    }
    let n = resp.len() as f64;
    let mean = resp.iter().sum::<f64>() / n;
    Ok(resp.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
}

pub fn image_laplacian_variance(image: &Tensor) -> Result<f64> {
    let (g, h, w) = luminance(image)?;
    laplacian_variance(&g, h, w)
}

/// Fraction of pairs where `a[i] > b[i]`, ties counting one half.
pub fn win_rate(a: &[f64], b: &[f64]) -> Result<f64> {
    contract!(
        a.len() == b.len() && !a.is_empty(),
        "win rate needs equal, non-empty sets ({} vs {})",
        a.len(),
        b.len()
    );
    let score: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Greater) => 1.0,
            Some(std::cmp::Ordering::Equal) => 0.5,
            _ => 0.0,
        })
        .sum();
    Ok(score / a.len() as f64)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SharpnessRow {
    pub method: String,
    pub k: usize,
    pub mean_var: f64,
    pub median_var: f64,
    /// Share of images where this method is sharper than the baseline at the same `k`.
    pub win_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SharpnessReport {
    pub rows: Vec<SharpnessRow>,
    /// Per-image Laplacian variance keyed by `(method, k)`.
    pub per_image: BTreeMap<(String, usize), Vec<f64>>,
}

impl SharpnessReport {
    pub fn row(&self, method: &str, k: usize) -> Option<&SharpnessRow> {
        self.rows.iter().find(|r| r.method == method && r.k == k)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,k,mean_var,median_var,win_rate\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.method, r.k, r.mean_var, r.median_var, r.win_rate
            ));
        }
        out
    }
}

/// Per-`(method, k)` sharpness aggregates. Every set must hold images aligned by source
/// index; `baseline` names the method the win rate is measured against.
pub fn sharpness_compare(
    sets: &[(String, usize, Vec<Tensor>)],
    baseline: &str,
) -> Result<SharpnessReport> {
    contract!(!sets.is_empty(), "nothing to compare");
    let n = sets[0].2.len();
    contract!(
        sets.iter().all(|s| s.2.len() == n),
        "all sets must have the same number of images"
    );
    let mut per_image = BTreeMap::new();
    for (method, k, images) in sets {
        let vars = par::map_slice(images, image_laplacian_variance)
            .into_iter()
            .collect::<Result<Vec<f64>>>()?;
        contract!(
            per_image.insert((method.clone(), *k), vars).is_none(),
            "duplicate set {method} k={k}"
        );
    }
    let mut rows = Vec::new();
    for ((method, k), vars) in &per_image {
        let base = per_image
            .get(&(baseline.to_string(), *k))
            .ok_or_else(|| crate::Error::Contract(format!("no {baseline} baseline for k={k}")))?;
        rows.push(SharpnessRow {
            method: method.clone(),
            k: *k,
            mean_var: vars.iter().sum::<f64>() / vars.len() as f64,
            median_var: median(vars),
            win_rate: win_rate(vars, base)?,
        });
    }
    rows.sort_by(|a, b| a.k.cmp(&b.k).then_with(|| a.method.cmp(&b.method)));
    Ok(SharpnessReport { rows, per_image })
}

/// Share of probes whose nearest identity mean (Euclidean, ties to the lower id) is
/// their true identity.
pub fn nearest_identity_rate(
    means: &[Vec<f64>],
    probes: &[Vec<f64>],
    truth: &[usize],
) -> Result<f64> {
    contract!(!means.is_empty(), "no identities");
    contract!(
        probes.len() == truth.len() && !probes.is_empty(),
        "need one true identity per probe"
    );
    let hits = probes
        .iter()
        .zip(truth)
        .filter(|(p, &t)| {
            let mut best = (f64::INFINITY, 0);
            for (id, m) in means.iter().enumerate() {
                let d: f64 = m.iter().zip(p.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.0 {
                    best = (d, id);
                }
            }
            best.1 == t
        })
        .count();
    Ok(hits as f64 / probes.len() as f64)
}

/// Re-identification rate of `deid` against the originals with the checkpoint's encoder.
pub fn reid_rate(
    originals: &ImageSet,
    deid: &DeidentifiedSet,
    params: &ModelParams,
) -> Result<f64> {
    contract!(
        deid.len() == originals.len(),
        "{} surrogates for {} originals",
        deid.len(),
        originals.len()
    );
    let net = params.siamese_net();
    let emb = embed_set(originals, &net, &params.siamese)?;
    let means: Vec<Vec<f64>> = (0..originals.identities())
        .map(|id| {
            let members = originals.images_of(id);
            let mut acc = vec![0.0; emb[0].len()];
            for &m in members {
                for (a, v) in acc.iter_mut().zip(&emb[m]) {
                    *a += v;
                }
            }
            acc.iter().map(|a| a / members.len() as f64).collect()
        })
        .collect();
    let surrogate_set = ImageSet::new(
        deid.surrogates
            .iter()
            .map(|s| crate::data::LabeledImage {
                record: originals.images()[s.source].record.clone(),
                pixels: s.pixels.clone(),
            })
            .collect(),
    )?;
    let probes = embed_set(&surrogate_set, &net, &params.siamese)?;
    let truth: Vec<usize> = deid.surrogates.iter().map(|s| s.identity).collect();
    nearest_identity_rate(&means, &probes, &truth)
}
