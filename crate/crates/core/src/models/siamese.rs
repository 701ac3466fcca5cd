use rand_chacha::ChaCha8Rng;

use super::{add_channel_bias, boundary, dense, Init, ModelConfig, ParamStore};
use crate::error::{contract, Result};
use crate::nn::{Real, Tape, Tensor, Var, L2_NORMALIZE_EPS};

/// Shared-weight encoder: three stride-2 convs and a dense projection, rows L2-normalized.
///
/// Both twins are the same parameter set applied twice.
#[derive(Clone, Debug)]
pub struct Siamese {
    cfg: ModelConfig,
}

impl Siamese {
    pub fn new(cfg: &ModelConfig) -> Self {
        Siamese { cfg: cfg.clone() }
    }

    pub fn embed_dim(&self) -> usize {
        self.cfg.embed_dim
    }

    pub fn init_params(&self, rng: &mut ChaCha8Rng) -> ParamStore {
        let mut init = Init {
            rng,
            store: ParamStore::new(),
        };
        let mut cin = self.cfg.image_channels;
        for (i, &c) in self.cfg.siamese_widths.iter().enumerate() {
            init.uniform(&format!("conv{}.weight", i + 1), &[c, cin, 4, 4], cin * 16);
            init.uniform(&format!("conv{}.bias", i + 1), &[c], cin * 16);
            cin = c;
        }
        let e = self.cfg.image_size / 8;
        let flat = cin * e * e;
        init.uniform("fc.weight", &[flat, self.cfg.embed_dim], flat);
        init.uniform("fc.bias", &[self.cfg.embed_dim], flat);
        init.store
    }

    /// `x: N×C×H×W` to unit-norm rows `N×d`.
    pub fn embed<S: Real>(
        &self,
        tape: &mut Tape<S>,
        params: &[Var],
        x: Var,
        mpt: bool,
    ) -> Result<Var> {
        contract!(
            params.len() == 8,
            "siamese expects 8 parameters, got {}",
            params.len()
        );
        let s = tape.shape(x).to_vec();
        contract!(
            s.len() == 4 && s[2].is_multiple_of(8) && s[3].is_multiple_of(8),
            "siamese input must be N×C×H×W with H, W divisible by 8, got {s:?}"
        );
        let mut h = boundary(tape, x, mpt);
        for i in 0..3 {
            let y = tape.conv2d(h, params[2 * i], 2, 1)?;
            let y = add_channel_bias(tape, y, params[2 * i + 1])?;
            let y = tape.leaky_relu(y, self.cfg.leaky_slope);
            h = boundary(tape, y, mpt);
        }
        let hs = tape.shape(h).to_vec();
        let flat = tape.reshape(h, &[hs[0], hs[1] * hs[2] * hs[3]])?;
        let y = dense(tape, flat, params[6], params[7])?;
        let y = tape.l2_normalize(y, L2_NORMALIZE_EPS)?;
        Ok(boundary(tape, y, mpt))
    }

    /// Embeddings of a batch of images as a plain tensor.
    pub fn embed_values(&self, params: &ParamStore, images: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::<f32>::new();
        let p = params.bind(&mut tape, false);
        let x = tape.constant(images.clone());
        let e = self.embed(&mut tape, &p, x, false)?;
        Ok(tape.value(e).clone())
    }
}

/// Mean contrastive loss over pairs of embeddings (`N×d`, or single `d` vectors).
///
/// Same pairs cost `d²`; different pairs cost `max(0, margin − d)²`, with `d` the Euclidean
/// distance between the two embeddings.
pub fn contrastive_loss<S: Real>(
    tape: &mut Tape<S>,
    f1: Var,
    f2: Var,
    same: &[bool],
    margin: f64,
) -> Result<Var> {
    contract!(margin > 0.0, "contrastive margin must be positive");
    contract!(
        tape.shape(f1) == tape.shape(f2),
        "contrastive pair shape mismatch: {:?} vs {:?}",
        tape.shape(f1),
        tape.shape(f2)
    );
    let s = tape.shape(f1).to_vec();
    let (a, b) = if s.len() == 1 {
        (tape.reshape(f1, &[1, s[0]])?, tape.reshape(f2, &[1, s[0]])?)
    } else {
        (f1, f2)
    };
    let n = tape.shape(a)[0];
    contract!(
        same.len() == n,
        "contrastive loss got {} pair flags for {n} pairs",
        same.len()
    );
    let diff = tape.sub(a, b)?;
    let sq = tape.square(diff)?;
    let d2 = tape.sum_to(sq, &[n, 1])?;
    let d = tape.clamp_min(d2, 1e-24);
    let d = tape.powf(d, 0.5);
    let hinge = tape.neg(d);
    let hinge = tape.offset(hinge, margin);
    let hinge = tape.clamp_min(hinge, 0.0);
    let hinge2 = tape.square(hinge)?;
    let pos_mask = Tensor::from_fn(&[n, 1], |i| if same[i] { S::one() } else { S::zero() });
    let neg_mask = pos_mask.map(|v| S::one() - v);
    let pm = tape.constant(pos_mask);
    let nm = tape.constant(neg_mask);
    let pos = tape.mul(d2, pm)?;
    let neg = tape.mul(hinge2, nm)?;
    let per = tape.add(pos, neg)?;
    tape.mean(per)
}
