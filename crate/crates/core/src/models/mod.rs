//! Toy-scale networks: the conditional generator, the critic with its classification head,
//! and the weight-shared Siamese encoder.

mod checkpoint;
mod critic;
mod generator;
mod siamese;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointEntry, Manifest};
pub use critic::{Critic, CriticOutput};
pub use generator::{Generator, GeneratorInput};
pub use siamese::{contrastive_loss, Siamese};

use crate::error::{contract, Result};
use crate::nn::{Real, Tape, Tensor, Var};

/// Block layout of the conditioning label: group id, then expression, then hair colour.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelLayout {
    pub group_slots: usize,
    pub expression_classes: usize,
    pub hair_classes: usize,
}

impl LabelLayout {
    pub fn new(group_slots: usize, expression_classes: usize, hair_classes: usize) -> Self {
        LabelLayout {
            group_slots,
            expression_classes,
            hair_classes,
        }
    }

    /// `(name, cardinality)` of every block, in label order.
    pub fn blocks(&self) -> Vec<(&'static str, usize)> {
        vec![
            ("group", self.group_slots),
            ("expression", self.expression_classes),
            ("hair", self.hair_classes),
        ]
    }

    pub fn dim(&self) -> usize {
        self.group_slots + self.expression_classes + self.hair_classes
    }

    /// Width of the critic's classification target (attribute blocks only).
    pub fn cls_dim(&self) -> usize {
        self.expression_classes + self.hair_classes
    }

    pub fn cls_blocks(&self) -> Vec<usize> {
        vec![self.expression_classes, self.hair_classes]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub image_size: usize,
    pub image_channels: usize,
    pub labels: LabelLayout,
    pub noise_channels: usize,
    pub embed_dim: usize,
    pub generator_widths: [usize; 2],
    pub critic_widths: [usize; 4],
    pub siamese_widths: [usize; 3],
    pub leaky_slope: f64,
}

impl ModelConfig {
    /// The default 32×32 architecture for a given label layout.
    pub fn toy(labels: LabelLayout) -> Self {
        ModelConfig {
            image_size: 32,
            image_channels: 3,
            labels,
            noise_channels: 4,
            embed_dim: 64,
            generator_widths: [32, 64],
            critic_widths: [16, 32, 64, 64],
            siamese_widths: [16, 32, 32],
            leaky_slope: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        contract!(
            self.image_size >= 16 && self.image_size.is_multiple_of(16),
            "image size must be a positive multiple of 16, got {}",
            self.image_size
        );
        contract!(self.labels.dim() > 0, "label layout is empty");
        contract!(self.embed_dim > 0, "embedding dimension must be positive");
        Ok(())
    }
}

/// Ordered named parameter tensors of one network.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, t: Tensor) {
        self.names.push(name.into());
        self.tensors.push(t);
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.tensors[i])
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn elements(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    /// Replaces every tensor, keeping names. Shapes must match.
    pub fn set_tensors(&mut self, tensors: Vec<Tensor>) -> Result<()> {
        contract!(
            tensors.len() == self.tensors.len()
                && tensors
                    .iter()
                    .zip(&self.tensors)
                    .all(|(a, b)| a.shape() == b.shape()),
            "parameter replacement does not match the existing layout"
        );
        self.tensors = tensors;
        Ok(())
    }

    /// Records the tensors on `tape`, as trainable leaves or as constants.
    pub fn bind<S: Real>(&self, tape: &mut Tape<S>, trainable: bool) -> Vec<Var> {
        bind_tensors(&self.tensors, tape, trainable)
    }
}

pub fn bind_tensors<S: Real>(tensors: &[Tensor], tape: &mut Tape<S>, trainable: bool) -> Vec<Var> {
    tensors
        .iter()
        .map(|t| {
            let v = t.cast::<S>();
            if trainable {
                tape.leaf(v)
            } else {
                tape.constant(v)
            }
        })
        .collect()
}

/// Parameter initializer: uniform ±1/√fan_in for weights and biases.
pub(crate) struct Init<'a> {
    pub rng: &'a mut ChaCha8Rng,
    pub store: ParamStore,
}

impl Init<'_> {
    pub fn uniform(&mut self, name: &str, shape: &[usize], fan_in: usize) {
        let bound = 1.0 / (fan_in as f32).sqrt();
        let t = Tensor::from_fn(shape, |_| self.rng.gen_range(-bound..bound));
        self.store.push(name, t);
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], v: f32) {
        self.store.push(name, Tensor::full(shape, v));
    }
}

/// Inserts a binary16 round-trip at a layer boundary when mixed precision is on.
pub(crate) fn boundary<S: Real>(tape: &mut Tape<S>, x: Var, mpt: bool) -> Var {
    if mpt {
        tape.cast_f16(x)
    } else {
        x
    }
}

pub(crate) fn add_channel_bias<S: Real>(tape: &mut Tape<S>, x: Var, bias: Var) -> Result<Var> {
    let c = tape.shape(bias)[0];
    let b = tape.reshape(bias, &[1, c, 1, 1])?;
    tape.add(x, b)
}

pub(crate) fn dense<S: Real>(tape: &mut Tape<S>, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = tape.matmul(x, w)?;
    let n = tape.shape(b)[0];
    let b = tape.reshape(b, &[1, n])?;
    tape.add(y, b)
}

/// Parameters of all three networks.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub generator: ParamStore,
    pub critic: ParamStore,
    pub siamese: ParamStore,
    pub seed: u64,
}

impl ModelParams {
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let generator = Generator::new(&config).init_params(&mut rng);
        let critic = Critic::new(&config).init_params(&mut rng);
        let siamese = Siamese::new(&config).init_params(&mut rng);
        Ok(ModelParams {
            config,
            generator,
            critic,
            siamese,
            seed,
        })
    }

    pub fn generator_net(&self) -> Generator {
        Generator::new(&self.config)
    }

    pub fn critic_net(&self) -> Critic {
        Critic::new(&self.config)
    }

    pub fn siamese_net(&self) -> Siamese {
        Siamese::new(&self.config)
    }

    pub fn elements(&self) -> usize {
        self.generator.elements() + self.critic.elements() + self.siamese.elements()
    }
}
