use std::path::Path;

use serde::{Deserialize, Serialize};

use super::pnm::read_image;
use super::toygen::{EXPRESSION_CLASSES, HAIR_CLASSES};
use crate::error::{contract, Error, Result};
use crate::nn::Tensor;

pub const LABELS_FILE: &str = "labels.json";

/// One entry of `labels.json`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub file: String,
    pub identity: usize,
    pub expression: usize,
    pub hair: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImage {
    pub record: LabelRecord,
    /// `3×H×W` in `[-1, 1]`.
    pub pixels: Tensor,
}

/// Images with contiguous identity ids `0..n` and an identity → image index.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageSet {
    images: Vec<LabeledImage>,
    by_identity: Vec<Vec<usize>>,
}

impl ImageSet {
    pub fn new(images: Vec<LabeledImage>) -> Result<Self> {
        contract!(!images.is_empty(), "image set is empty");
        let shape = images[0].pixels.shape().to_vec();
        contract!(
            shape.len() == 3 && shape[0] == 3,
            "images must be 3×H×W, got {shape:?}"
        );
        let n_id = images.iter().map(|i| i.record.identity).max().unwrap() + 1;
        let mut by_identity = vec![Vec::new(); n_id];
        for (idx, img) in images.iter().enumerate() {
            let r = &img.record;
            contract!(
                img.pixels.shape() == shape.as_slice(),
                "{} has shape {:?}, expected {shape:?}",
                r.file,
                img.pixels.shape()
            );
            contract!(
                r.expression < EXPRESSION_CLASSES && r.hair < HAIR_CLASSES,
                "{}: expression {} / hair {} out of range",
                r.file,
                r.expression,
                r.hair
            );
            by_identity[r.identity].push(idx);
        }
        for (id, members) in by_identity.iter().enumerate() {
            contract!(
                !members.is_empty(),
                "identity ids are not contiguous: {id} has no images"
            );
        }
        Ok(ImageSet {
            images,
            by_identity,
        })
    }

    pub fn from_records(records: Vec<(LabelRecord, Tensor)>) -> Result<Self> {
        Self::new(
            records
                .into_iter()
                .map(|(record, pixels)| LabeledImage { record, pixels })
                .collect(),
        )
    }

    /// Loads `labels.json` and every image it lists from `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(LABELS_FILE);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let records: Vec<LabelRecord> =
            serde_json::from_slice(&bytes).map_err(|e| Error::json(&path, e))?;
        let mut images = Vec::with_capacity(records.len());
        for record in records {
            let pixels = read_image(&dir.join(&record.file))?;
            images.push(LabeledImage { record, pixels });
        }
        Self::new(images)
    }

    pub fn images(&self) -> &[LabeledImage] {
        &self.images
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn identities(&self) -> usize {
        self.by_identity.len()
    }

    pub fn images_of(&self, identity: usize) -> &[usize] {
        &self.by_identity[identity]
    }

    pub fn records(&self) -> Vec<LabelRecord> {
        self.images.iter().map(|i| i.record.clone()).collect()
    }

    /// `(C, H, W)` of every image.
    pub fn image_shape(&self) -> [usize; 3] {
        let s = self.images[0].pixels.shape();
        [s[0], s[1], s[2]]
    }

    /// Stacks the given images into an `N×C×H×W` batch.
    pub fn stack(&self, indices: &[usize]) -> Tensor {
        let [c, h, w] = self.image_shape();
        let mut data = Vec::with_capacity(indices.len() * c * h * w);
        for &i in indices {
            data.extend_from_slice(self.images[i].pixels.data());
        }
        Tensor::new(vec![indices.len(), c, h, w], data).expect("uniform image shapes")
    }

    /// Subset by image index, keeping identity ids unchanged.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.images[i].clone()).collect())
    }
}
