//! Composite layers built from primitive tape ops.

use serde::{Deserialize, Serialize};

use super::{Real, Tape, Var};
use crate::error::{contract, Result};

pub const INSTANCE_NORM_EPS: f64 = 1e-5;
pub const L2_NORMALIZE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
}

impl<S: Real> Tape<S> {
    pub fn activation(&mut self, x: Var, kind: Activation) -> Result<Var> {
        Ok(match kind {
            Activation::Relu => self.relu(x),
            Activation::LeakyRelu(slope) => {
                contract!(
                    slope > 0.0 && slope < 1.0,
                    "leaky_relu slope must lie in (0,1), got {slope}"
                );
                self.leaky_relu(x, slope)
            }
            Activation::Tanh => self.tanh(x),
        })
    }

    /// Per-sample, per-channel standardization over H×W followed by a `gamma`/`beta` affine.
    pub fn instance_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let s = self.shape(x).to_vec();
        contract!(s.len() == 4, "instance_norm expects N×C×H×W, got {s:?}");
        contract!(eps > 0.0, "instance_norm eps must be positive");
        let (n, c, hw) = (s[0], s[1], s[2] * s[3]);
        contract!(
            self.shape(gamma) == [c] && self.shape(beta) == [c],
            "instance_norm affine parameters must have shape [{c}]"
        );
        let stat = [n, c, 1, 1];
        let sum = self.sum_to(x, &stat)?;
        let mean = self.scale(sum, 1.0 / hw as f64);
        let centered = self.sub(x, mean)?;
        let sq = self.square(centered)?;
        let var = self.sum_to(sq, &stat)?;
        let var = self.scale(var, 1.0 / hw as f64);
        let var = self.offset(var, eps);
        let inv = self.powf(var, -0.5);
        let normed = self.mul(centered, inv)?;
        let g = self.reshape(gamma, &[1, c, 1, 1])?;
        let b = self.reshape(beta, &[1, c, 1, 1])?;
        let scaled = self.mul(normed, g)?;
        self.add(scaled, b)
    }

    /// `v / max(‖v‖₂, eps)` along the last axis (rows of an `N×d` matrix, or a single vector).
    pub fn l2_normalize(&mut self, v: Var, eps: f64) -> Result<Var> {
        contract!(eps > 0.0, "l2_normalize eps must be positive");
        let s = self.shape(v).to_vec();
        contract!(
            s.len() == 1 || s.len() == 2,
            "l2_normalize expects a vector or matrix, got {s:?}"
        );
        let mut target = s.clone();
        *target.last_mut().unwrap() = 1;
        let sq = self.square(v)?;
        let ss = self.sum_to(sq, &target)?;
        // floor inside the sqrt keeps its derivative finite at the origin
        let ss = self.clamp_min(ss, eps * eps);
        let norm = self.powf(ss, 0.5);
        self.div(v, norm)
    }
}
