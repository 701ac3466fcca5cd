use super::{ClusterTable, ImageSet};
use crate::data::{EXPRESSION_CLASSES, HAIR_CLASSES};
use crate::error::{contract, Result};
use crate::models::LabelLayout;
use crate::nn::Tensor;

/// Per-image conditioning labels: one-hot group ⊕ one-hot expression ⊕ one-hot hair.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelScheme {
    layout: LabelLayout,
    labels: Vec<f32>,
}

impl LabelScheme {
    pub fn layout(&self) -> LabelLayout {
        self.layout
    }

    /// `(name, cardinality)` per block.
    pub fn blocks(&self) -> Vec<(&'static str, usize)> {
        self.layout.blocks()
    }

    pub fn len(&self) -> usize {
        self.labels.len() / self.layout.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, image: usize) -> &[f32] {
        let l = self.layout.dim();
        &self.labels[image * l..(image + 1) * l]
    }

    /// Group block index of an image's label.
    pub fn group(&self, image: usize) -> usize {
        let g = self.layout.group_slots;
        self.label(image)[..g]
            .iter()
            .position(|&v| v == 1.0)
            .expect("one-hot group block")
    }

    /// Labels of the given images, in that order.
    pub fn subset(&self, indices: &[usize]) -> LabelScheme {
        LabelScheme {
            layout: self.layout,
            labels: indices
                .iter()
                .flat_map(|&i| self.label(i).to_vec())
                .collect(),
        }
    }

    /// Stacked `N×L` labels for the given images.
    pub fn stack(&self, indices: &[usize]) -> Tensor {
        let l = self.layout.dim();
        let mut data = Vec::with_capacity(indices.len() * l);
        for &i in indices {
            data.extend_from_slice(self.label(i));
        }
        Tensor::new(vec![indices.len(), l], data).expect("label rows")
    }
}

/// Builds one-hot labels from `table`. `group_slots` widens the group block beyond the
/// number of groups (so one trained generator can serve several `k`); `None` uses exactly
/// one slot per group.
pub fn auto_label(
    set: &ImageSet,
    table: &ClusterTable,
    group_slots: Option<usize>,
) -> Result<LabelScheme> {
    contract!(
        table.identities() >= set.identities(),
        "cluster table covers {} identities but the set has {}",
        table.identities(),
        set.identities()
    );
    let groups = table.groups().len();
    let slots = group_slots.unwrap_or(groups);
    contract!(
        slots >= groups,
        "{groups} groups do not fit in {slots} group slots"
    );
    let layout = LabelLayout::new(slots, EXPRESSION_CLASSES, HAIR_CLASSES);
    let l = layout.dim();
    let mut labels = vec![0.0f32; set.len() * l];
    for (i, img) in set.images().iter().enumerate() {
        let r = &img.record;
        let g = table
            .group_of(r.identity)
            .expect("identity range checked above");
        let row = &mut labels[i * l..(i + 1) * l];
        row[g] = 1.0;
        row[slots + r.expression] = 1.0;
        row[slots + EXPRESSION_CLASSES + r.hair] = 1.0;
    }
    Ok(LabelScheme { layout, labels })
}
