use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionMode {
    Mpt,
    Fp32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BufferCategory {
    Weights,
    Activations,
    Moments,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Buffer {
    name: String,
    category: BufferCategory,
    elements: usize,
}

/// Logical byte accounting of training buffers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MemoryLedger {
    buffers: Vec<Buffer>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryReport {
    pub mode: PrecisionMode,
    pub weights_bytes: u64,
    pub activations_bytes: u64,
    pub moments_bytes: u64,
    pub total_bytes: u64,
}

impl PrecisionMode {
    /// Bytes per registered element.
    ///
    /// Under MPT a weight costs its fp32 master plus a binary16 working copy; activations are
    /// binary16; optimizer moments stay fp32.
    pub fn bytes_per_element(self, category: BufferCategory) -> u64 {
        match (self, category) {
            (PrecisionMode::Fp32, _) => 4,
            (PrecisionMode::Mpt, BufferCategory::Weights) => 4 + 2,
            (PrecisionMode::Mpt, BufferCategory::Activations) => 2,
            (PrecisionMode::Mpt, BufferCategory::Moments) => 4,
        }
    }
}

impl MemoryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, category: BufferCategory, elements: usize) {
        self.buffers.push(Buffer {
            name: name.into(),
            category,
            elements,
        });
    }

    pub fn elements(&self, category: BufferCategory) -> usize {
        self.buffers
            .iter()
            .filter(|b| b.category == category)
            .map(|b| b.elements)
            .sum()
    }

    pub fn buffer_names(&self) -> impl Iterator<Item = &str> {
        self.buffers.iter().map(|b| b.name.as_str())
    }

    pub fn report(&self, mode: PrecisionMode) -> MemoryReport {
        let bytes = |c| self.elements(c) as u64 * mode.bytes_per_element(c);
        let weights_bytes = bytes(BufferCategory::Weights);
        let activations_bytes = bytes(BufferCategory::Activations);
        let moments_bytes = bytes(BufferCategory::Moments);
        MemoryReport {
            mode,
            weights_bytes,
            activations_bytes,
            moments_bytes,
            total_bytes: weights_bytes + activations_bytes + moments_bytes,
        }
    }
}
