use rand_chacha::ChaCha8Rng;

use super::{add_channel_bias, boundary, Init, ModelConfig, ParamStore};
use crate::error::{contract, Result};
use crate::nn::{Real, Tape, Tensor, Var, INSTANCE_NORM_EPS};

/// Image, target label and noise for one generator call.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorInput {
    pub image: Tensor,
    pub label: Tensor,
    pub noise: Tensor,
}

impl GeneratorInput {
    pub fn new(image: Tensor, label: Tensor, noise: Tensor, cfg: &ModelConfig) -> Result<Self> {
        let n = image.shape().first().copied().unwrap_or(0);
        contract!(
            image.shape() == [n, cfg.image_channels, cfg.image_size, cfg.image_size].as_slice(),
            "generator image must be N×{}×{}×{}, got {:?}",
            cfg.image_channels,
            cfg.image_size,
            cfg.image_size,
            image.shape()
        );
        contract!(
            label.shape() == [n, cfg.labels.dim()].as_slice(),
            "label must be {n}×{}, got {:?}",
            cfg.labels.dim(),
            label.shape()
        );
        contract!(
            noise.shape() == [n, cfg.noise_channels].as_slice(),
            "noise must be {n}×{}, got {:?}",
            cfg.noise_channels,
            noise.shape()
        );
        contract!(
            noise.data().iter().all(|&z| (0.0..=1.0).contains(&z)),
            "noise values must lie in [0,1]"
        );
        for row in label.data().chunks(cfg.labels.dim()) {
            let mut off = 0;
            for (name, card) in cfg.labels.blocks() {
                let block = &row[off..off + card];
                let ones = block.iter().filter(|&&v| v == 1.0).count();
                let zeros = block.iter().filter(|&&v| v == 0.0).count();
                contract!(
                    ones == 1 && zeros == card - 1,
                    "label block '{name}' is not one-hot: {block:?}"
                );
                off += card;
            }
        }
        Ok(GeneratorInput {
            image,
            label,
            noise,
        })
    }

    pub fn batch(&self) -> usize {
        self.image.shape()[0]
    }
}

/// Encoder–decoder generator `G(x, c, z)`.
///
/// Two stride-2 down-sampling convs, two same-resolution convs and two transposed convs,
/// instance norm and leaky ReLU after every layer but the last, `tanh` output. The label and
/// the noise are broadcast over the image plane and concatenated as extra input channels.
#[derive(Clone, Debug)]
pub struct Generator {
    cfg: ModelConfig,
}

const DOWN: [&str; 2] = ["down1", "down2"];
const MID: [&str; 2] = ["mid1", "mid2"];

impl Generator {
    pub fn new(cfg: &ModelConfig) -> Self {
        Generator { cfg: cfg.clone() }
    }

    pub fn in_channels(&self) -> usize {
        self.cfg.image_channels + self.cfg.labels.dim() + self.cfg.noise_channels
    }

    pub fn init_params(&self, rng: &mut ChaCha8Rng) -> ParamStore {
        let [w0, w1] = self.cfg.generator_widths;
        let mut init = Init {
            rng,
            store: ParamStore::new(),
        };
        let cin = self.in_channels();
        for (name, (i, o)) in DOWN.iter().zip([(cin, w0), (w0, w1)]) {
            init.uniform(&format!("{name}.weight"), &[o, i, 4, 4], i * 16);
            init.constant(&format!("{name}.gamma"), &[o], 1.0);
            init.constant(&format!("{name}.beta"), &[o], 0.0);
        }
        for name in MID {
            init.uniform(&format!("{name}.weight"), &[w1, w1, 3, 3], w1 * 9);
            init.constant(&format!("{name}.gamma"), &[w1], 1.0);
            init.constant(&format!("{name}.beta"), &[w1], 0.0);
        }
        init.uniform("up1.weight", &[w1, w0, 4, 4], w1 * 16);
        init.constant("up1.gamma", &[w0], 1.0);
        init.constant("up1.beta", &[w0], 0.0);
        let c = self.cfg.image_channels;
        init.uniform("up2.weight", &[w0, c, 4, 4], w0 * 16);
        init.uniform("up2.bias", &[c], w0 * 16);
        init.store
    }

    /// Inference in fp32 on plain tensors.
    pub fn apply(&self, params: &ParamStore, input: &GeneratorInput) -> Result<Tensor> {
        let mut tape = Tape::<f32>::new();
        let p = params.bind(&mut tape, false);
        let x = tape.constant(input.image.clone());
        let c = tape.constant(input.label.clone());
        let z = tape.constant(input.noise.clone());
        let y = self.forward(&mut tape, &p, x, c, z, false)?;
        Ok(tape.value(y).clone())
    }

    /// `image: N×C×H×W`, `label: N×L`, `noise: N×dz`; returns `N×C×H×W` in [-1, 1].
    pub fn forward<S: Real>(
        &self,
        tape: &mut Tape<S>,
        params: &[Var],
        image: Var,
        label: Var,
        noise: Var,
        mpt: bool,
    ) -> Result<Var> {
        contract!(
            params.len() == 17,
            "generator expects 17 parameters, got {}",
            params.len()
        );
        let s = tape.shape(image).to_vec();
        contract!(s.len() == 4, "generator image must be 4-d, got {s:?}");
        let (n, h, w) = (s[0], s[2], s[3]);
        contract!(
            h % 4 == 0 && w % 4 == 0,
            "generator needs spatial extents divisible by 4, got {h}x{w}"
        );
        let ldim = self.cfg.labels.dim();
        contract!(
            tape.shape(label) == [n, ldim].as_slice(),
            "label dimension mismatch: expected {n}x{ldim}, got {:?}",
            tape.shape(label)
        );
        let dz = self.cfg.noise_channels;
        contract!(
            tape.shape(noise) == [n, dz].as_slice(),
            "noise shape mismatch: expected {n}x{dz}, got {:?}",
            tape.shape(noise)
        );
        let slope = self.cfg.leaky_slope;
        let lab = tape.reshape(label, &[n, ldim, 1, 1])?;
        let lab = tape.broadcast_to(lab, &[n, ldim, h, w])?;
        let z = tape.reshape(noise, &[n, dz, 1, 1])?;
        let z = tape.broadcast_to(z, &[n, dz, h, w])?;
        let x = tape.concat(&[image, lab, z], 1)?;
        let mut x = boundary(tape, x, mpt);

        let mut p = params.iter().copied();
        let mut next = || p.next().unwrap();
        for (stride, pad) in [(2, 1), (2, 1), (1, 1), (1, 1)] {
            let (wt, gamma, beta) = (next(), next(), next());
            let y = tape.conv2d(x, wt, stride, pad)?;
            let y = tape.instance_norm(y, gamma, beta, INSTANCE_NORM_EPS)?;
            let y = tape.leaky_relu(y, slope);
            x = boundary(tape, y, mpt);
        }
        let (wt, gamma, beta) = (next(), next(), next());
        let y = tape.conv_transpose(x, wt, 2, 1)?;
        let y = tape.instance_norm(y, gamma, beta, INSTANCE_NORM_EPS)?;
        let y = tape.leaky_relu(y, slope);
        let x = boundary(tape, y, mpt);
        let (wt, bias) = (next(), next());
        let y = tape.conv_transpose(x, wt, 2, 1)?;
        let y = add_channel_bias(tape, y, bias)?;
        let y = tape.tanh(y);
        Ok(boundary(tape, y, mpt))
    }
}
