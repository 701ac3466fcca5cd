//! k-Same grouping: identity distances, nearest-identity clusters, the cluster table,
//! automatic labels, surrogate synthesis and re-identification.
//!
//! Grouping works on identities rather than images, so every image of one person lands in
//! the same group and each group covers at least `k` people.

mod deid;
mod label;

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use crate::data::{ImageSet, LabeledImage};
pub use deid::{
    deidentify_average, deidentify_set, linkage_probabilities, reidentify, synthesize,
    DeidentifiedSet, Surrogate, SURROGATES_FILE, TABLE_FILE,
};
pub use label::{auto_label, LabelScheme};

use crate::error::{contract, Error, Result};
use crate::models::{ParamStore, Siamese};
use crate::par;
use crate::seed::derive;

/// Images per forward pass when embedding or translating a whole set.
pub const INFERENCE_BATCH: usize = 16;

/// Toy images are rendered centred, so alignment is the identity map.
pub fn align(image: &LabeledImage) -> LabeledImage {
    image.clone()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    #[default]
    Siamese,
    Pixel,
}

impl FromStr for DistanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "siamese" => Ok(DistanceMode::Siamese),
            "pixel" => Ok(DistanceMode::Pixel),
            other => Err(Error::Contract(format!(
                "unknown distance mode '{other}' (expected siamese or pixel)"
            ))),
        }
    }
}

/// Symmetric identity-by-identity distance matrix with a zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        contract!(n > 0, "distance matrix is empty");
        contract!(
            rows.iter().all(|r| r.len() == n),
            "distance matrix must be square"
        );
        for (i, row) in rows.iter().enumerate() {
            contract!(row[i] == 0.0, "distance matrix diagonal must be zero");
            for (j, &v) in row.iter().enumerate() {
                contract!(
                    v == rows[j][i] && v >= 0.0,
                    "distance matrix must be symmetric and non-negative at ({i},{j})"
                );
            }
        }
        Ok(DistanceMatrix {
            n,
            data: rows.concat(),
        })
    }

    /// Euclidean distances between per-identity mean vectors.
    pub fn from_means(means: &[Vec<f64>]) -> Result<Self> {
        let n = means.len();
        contract!(n > 0, "no identities");
        let rows = par::map_range(n, |i| {
            (0..n)
                .map(|j| {
                    let (a, b) = if i <= j { (i, j) } else { (j, i) };
                    means[a]
                        .iter()
                        .zip(&means[b])
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        });
        Self::from_rows(rows)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// Per-identity means of per-image feature rows.
fn identity_means(set: &ImageSet, features: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..set.identities())
        .map(|id| {
            let members = set.images_of(id);
            let mut acc = vec![0.0; features[0].len()];
            for &m in members {
                for (a, v) in acc.iter_mut().zip(&features[m]) {
                    *a += v;
                }
            }
            acc.iter().map(|a| a / members.len() as f64).collect()
        })
        .collect()
}

/// Siamese embeddings of every image in the set, in set order.
pub fn embed_set(set: &ImageSet, siamese: &Siamese, params: &ParamStore) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(set.len());
    let idx: Vec<usize> = (0..set.len()).collect();
    for chunk in idx.chunks(INFERENCE_BATCH) {
        let e = siamese.embed_values(params, &set.stack(chunk))?;
        let d = e.shape()[1];
        out.extend(
            e.data()
                .chunks(d)
                .map(|r| r.iter().map(|&v| v as f64).collect::<Vec<f64>>()),
        );
    }
    Ok(out)
}

/// Identity-level distances: between mean embeddings (siamese) or mean images (pixel).
pub fn compute_pairwise_distances(
    set: &ImageSet,
    mode: DistanceMode,
    siamese: Option<(&Siamese, &ParamStore)>,
) -> Result<DistanceMatrix> {
    let features = match mode {
        DistanceMode::Pixel => set
            .images()
            .iter()
            .map(|i| i.pixels.data().iter().map(|&v| v as f64).collect())
            .collect::<Vec<Vec<f64>>>(),
        DistanceMode::Siamese => {
            let Some((net, params)) = siamese else {
                return Err(Error::Contract(
                    "siamese distances need a trained encoder".into(),
                ));
            };
            embed_set(set, net, params)?
        }
    };
    DistanceMatrix::from_means(&identity_means(set, &features))
}

/// The anchor plus its `k − 1` nearest identities; ties go to the lower id. Sorted ascending.
pub fn select_k_cluster(d: &DistanceMatrix, anchor: usize, k: usize) -> Result<Vec<usize>> {
    let pool: Vec<usize> = (0..d.len()).collect();
    select_k_among(d, anchor, k, &pool)
}

/// As [`select_k_cluster`], restricted to identities in `pool` (which must hold the anchor).
pub fn select_k_among(
    d: &DistanceMatrix,
    anchor: usize,
    k: usize,
    pool: &[usize],
) -> Result<Vec<usize>> {
    contract!(
        k >= 1 && k <= pool.len(),
        "k must lie in 1..={}, got {k}",
        pool.len()
    );
    contract!(pool.contains(&anchor), "anchor {anchor} is not available");
    let mut others: Vec<usize> = pool.iter().copied().filter(|&i| i != anchor).collect();
    others.sort_by(|&a, &b| {
        d.get(anchor, a)
            .total_cmp(&d.get(anchor, b))
            .then(a.cmp(&b))
    });
    let mut group: Vec<usize> = std::iter::once(anchor)
        .chain(others.into_iter().take(k - 1))
        .collect();
    group.sort_unstable();
    Ok(group)
}

/// Identity → group assignment with its inverse.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterTable {
    k: usize,
    groups: Vec<Vec<usize>>,
    assignments: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    k: usize,
    groups: BTreeMap<usize, Vec<usize>>,
    assignments: BTreeMap<usize, usize>,
}

impl ClusterTable {
    /// Builds a table from disjoint groups covering identities `0..n`.
    pub fn new(k: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        contract!(k >= 1, "k must be at least 1");
        let n: usize = groups.iter().map(Vec::len).sum();
        let mut assignments = vec![usize::MAX; n];
        for (g, members) in groups.iter().enumerate() {
            for &id in members {
                contract!(id < n, "identity {id} out of range for {n} identities");
                contract!(
                    assignments[id] == usize::MAX,
                    "identity {id} is in two groups"
                );
                assignments[id] = g;
            }
        }
        let floor = k.min(n);
        for (g, members) in groups.iter().enumerate() {
            contract!(
                members.len() >= floor,
                "group {g} has {} identities, fewer than {floor}",
                members.len()
            );
        }
        Ok(ClusterTable {
            k,
            groups,
            assignments,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn members(&self, group: usize) -> Option<&[usize]> {
        self.groups.get(group).map(Vec::as_slice)
    }

    pub fn group_of(&self, identity: usize) -> Option<usize> {
        self.assignments.get(identity).copied()
    }

    pub fn identities(&self) -> usize {
        self.assignments.len()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let t = TableJson {
            k: self.k,
            groups: self.groups.iter().cloned().enumerate().collect(),
            assignments: self.assignments.iter().copied().enumerate().collect(),
        };
        serde_json::to_value(t).expect("table serializes")
    }

    pub fn from_json(v: serde_json::Value) -> Result<Self> {
        let t: TableJson = serde_json::from_value(v)
            .map_err(|e| Error::Contract(format!("malformed cluster table: {e}")))?;
        contract!(
            t.groups.keys().copied().eq(0..t.groups.len()),
            "cluster table group ids must be 0..n"
        );
        let table = Self::new(t.k, t.groups.into_values().collect())?;
        contract!(
            t.assignments.len() == table.assignments.len()
                && t.assignments
                    .iter()
                    .all(|(&id, &g)| table.group_of(id) == Some(g)),
            "cluster table assignments disagree with groups"
        );
        Ok(table)
    }
}

/// Greedy partition: draw a seeded anchor among the unassigned identities, take its `k`
/// nearest unassigned identities, repeat; fewer than `k` leftovers join the last group.
pub fn partition_identities(d: &DistanceMatrix, k: usize, seed: u64) -> Result<ClusterTable> {
    let n = d.len();
    contract!(k >= 1 && k <= n, "k must lie in 1..={n}, got {k}");
    let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, &[2]));
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    while remaining.len() >= k {
        let anchor = remaining[rng.gen_range(0..remaining.len())];
        let group = select_k_among(d, anchor, k, &remaining)?;
        remaining.retain(|i| !group.contains(i));
        groups.push(group);
    }
    if !remaining.is_empty() {
        let last = groups.last_mut().expect("k <= n leaves at least one group");
        last.extend(remaining);
        last.sort_unstable();
    }
    ClusterTable::new(k, groups)
}
