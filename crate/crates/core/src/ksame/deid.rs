use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    auto_label, compute_pairwise_distances, partition_identities, ClusterTable, DistanceMode,
    ImageSet, INFERENCE_BATCH,
};
use crate::data::{read_image, write_image};
use crate::error::{contract, Error, Result};
use crate::models::{Checkpoint, GeneratorInput, ModelParams};
use crate::nn::Tensor;
use crate::seed::derive;

pub const TABLE_FILE: &str = "cluster_table.json";
pub const SURROGATES_FILE: &str = "surrogates.json";

/// One de-identified image, aligned with its source by index.
#[derive(Clone, Debug, PartialEq)]
pub struct Surrogate {
    pub source: usize,
    pub identity: usize,
    pub group: usize,
    pub pixels: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeidentifiedSet {
    /// `"kss-gan"` or `"average"`.
    pub method: String,
    pub k: usize,
    pub seed: u64,
    pub checkpoint_id: Option<String>,
    pub table: ClusterTable,
    pub surrogates: Vec<Surrogate>,
}

#[derive(Serialize, Deserialize)]
struct SurrogateEntry {
    file: String,
    source: usize,
    identity: usize,
    group: usize,
}

#[derive(Serialize, Deserialize)]
struct SurrogatesJson {
    method: String,
    k: usize,
    seed: u64,
    checkpoint: Option<String>,
    surrogates: Vec<SurrogateEntry>,
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(v).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
}

impl DeidentifiedSet {
    pub fn len(&self) -> usize {
        self.surrogates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surrogates.is_empty()
    }

    /// Writes surrogate images (named after their sources), the cluster table and the
    /// surrogate index into `dir`.
    pub fn save(&self, dir: &Path, set: &ImageSet) -> Result<()> {
        contract!(
            self.surrogates.len() == set.len(),
            "de-identified set has {} surrogates for {} images",
            self.surrogates.len(),
            set.len()
        );
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut entries = Vec::with_capacity(self.len());
        for s in &self.surrogates {
            let file = set.images()[s.source].record.file.clone();
            write_image(&dir.join(&file), &s.pixels)?;
            entries.push(SurrogateEntry {
                file,
                source: s.source,
                identity: s.identity,
                group: s.group,
            });
        }
        write_json(&dir.join(TABLE_FILE), &self.table.to_json())?;
        write_json(
            &dir.join(SURROGATES_FILE),
            &SurrogatesJson {
                method: self.method.clone(),
                k: self.k,
                seed: self.seed,
                checkpoint: self.checkpoint_id.clone(),
                surrogates: entries,
            },
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let table = ClusterTable::from_json(read_json(&dir.join(TABLE_FILE))?)?;
        let index: SurrogatesJson = read_json(&dir.join(SURROGATES_FILE))?;
        let mut surrogates = Vec::with_capacity(index.surrogates.len());
        for (i, e) in index.surrogates.into_iter().enumerate() {
            contract!(e.source == i, "surrogates must be listed in source order");
            contract!(
                table.group_of(e.identity) == Some(e.group),
                "surrogate {} claims group {} but the table disagrees",
                e.file,
                e.group
            );
            surrogates.push(Surrogate {
                source: e.source,
                identity: e.identity,
                group: e.group,
                pixels: read_image(&dir.join(&e.file))?,
            });
        }
        Ok(DeidentifiedSet {
            method: index.method,
            k: index.k,
            seed: index.seed,
            checkpoint_id: index.checkpoint,
            table,
            surrogates,
        })
    }
}

/// Per-image noise draw `z ~ U[0,1]^dz`, seeded by `(seed, image index)`.
pub(crate) fn image_noise(seed: u64, index: usize, dz: usize) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, &[3, index as u64]));
    (0..dz).map(|_| rng.gen::<f32>()).collect()
}

/// Translates every image with its label's group block set to its identity's group.
pub fn synthesize(
    set: &ImageSet,
    params: &ModelParams,
    table: &ClusterTable,
    seed: u64,
    checkpoint_id: Option<String>,
) -> Result<DeidentifiedSet> {
    let cfg = &params.config;
    let [c, h, w] = set.image_shape();
    contract!(
        c == cfg.image_channels && h == cfg.image_size && w == cfg.image_size,
        "images are {c}×{h}×{w} but the model expects {0}×{1}×{1}",
        cfg.image_channels,
        cfg.image_size
    );
    let scheme = auto_label(set, table, Some(cfg.labels.group_slots))?;
    let net = params.generator_net();
    let dz = cfg.noise_channels;
    let idx: Vec<usize> = (0..set.len()).collect();
    let mut surrogates = Vec::with_capacity(set.len());
    for chunk in idx.chunks(INFERENCE_BATCH) {
        let noise: Vec<f32> = chunk
            .iter()
            .flat_map(|&i| image_noise(seed, i, dz))
            .collect();
        let input = GeneratorInput::new(
            set.stack(chunk),
            scheme.stack(chunk),
            Tensor::new(vec![chunk.len(), dz], noise)?,
            cfg,
        )?;
        let out = net.apply(&params.generator, &input)?;
        let per = c * h * w;
        for (j, &i) in chunk.iter().enumerate() {
            let identity = set.images()[i].record.identity;
            surrogates.push(Surrogate {
                source: i,
                identity,
                group: table.group_of(identity).expect("labelled above"),
                pixels: Tensor::new(vec![c, h, w], out.data()[j * per..(j + 1) * per].to_vec())?,
            });
        }
    }
    Ok(DeidentifiedSet {
        method: "kss-gan".into(),
        k: table.k(),
        seed,
        checkpoint_id,
        table: table.clone(),
        surrogates,
    })
}

/// Full pipeline: identity distances, greedy `k`-grouping, then generator translation.
pub fn deidentify_set(
    set: &ImageSet,
    ckpt: &Checkpoint,
    k: usize,
    seed: u64,
    mode: DistanceMode,
) -> Result<DeidentifiedSet> {
    contract!(
        k >= 1 && k <= set.identities(),
        "k must lie in 1..={}, got {k}",
        set.identities()
    );
    let params = &ckpt.params;
    let siamese = params.siamese_net();
    let d = compute_pairwise_distances(set, mode, Some((&siamese, &params.siamese)))?;
    let table = partition_identities(&d, k, seed)?;
    synthesize(set, params, &table, seed, Some(ckpt.id.clone()))
}

/// Pixel-averaging baseline: each surrogate is the mean of one image per member identity,
/// choosing each member's image with the same within-identity position as the source.
pub fn deidentify_average(set: &ImageSet, table: &ClusterTable) -> Result<DeidentifiedSet> {
    contract!(
        table.identities() >= set.identities(),
        "cluster table covers {} identities but the set has {}",
        table.identities(),
        set.identities()
    );
    let [c, h, w] = set.image_shape();
    let mut surrogates = Vec::with_capacity(set.len());
    for (i, img) in set.images().iter().enumerate() {
        let id = img.record.identity;
        let pos = set
            .images_of(id)
            .iter()
            .position(|&j| j == i)
            .expect("indexed");
        let group = table.group_of(id).expect("range checked");
        let members = table.members(group).expect("valid group");
        let mut acc = vec![0.0f64; c * h * w];
        for &m in members {
            let imgs = set.images_of(m);
            let src = &set.images()[imgs[pos % imgs.len()]].pixels;
            for (a, v) in acc.iter_mut().zip(src.data()) {
                *a += *v as f64;
            }
        }
        let inv = 1.0 / members.len() as f64;
        let pixels = Tensor::new(
            vec![c, h, w],
            acc.iter().map(|a| (a * inv) as f32).collect(),
        )?;
        surrogates.push(Surrogate {
            source: i,
            identity: id,
            group,
            pixels,
        });
    }
    Ok(DeidentifiedSet {
        method: "average".into(),
        k: table.k(),
        seed: 0,
        checkpoint_id: None,
        table: table.clone(),
        surrogates,
    })
}

/// Candidate identities an adversary holding the cluster table can link a surrogate to.
pub fn reidentify(group: usize, table: &ClusterTable) -> Result<&[usize]> {
    table.members(group).ok_or_else(|| {
        Error::Contract(format!(
            "unknown group {group} (table has {})",
            table.groups().len()
        ))
    })
}

/// Success probability of a uniform guess over [`reidentify`] candidates, per surrogate,
/// by counting the candidates that equal the true source identity.
pub fn linkage_probabilities(deid: &DeidentifiedSet) -> Result<Vec<f64>> {
    deid.surrogates
        .iter()
        .map(|s| {
            let cands = reidentify(s.group, &deid.table)?;
            let hits = cands.iter().filter(|&&c| c == s.identity).count();
            Ok(hits as f64 / cands.len() as f64)
        })
        .collect()
}
