use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
    /// Linear, rounded to the nearest integer.
    Integer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub scale: Scale,
}

impl Dimension {
    pub fn new(name: &str, lo: f64, hi: f64, scale: Scale) -> Self {
        Dimension {
            name: name.to_string(),
            lo,
            hi,
            scale,
        }
    }

    /// Maps `u ∈ [0, 1]` onto the dimension.
    pub fn from_unit(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self.scale {
            Scale::Linear => self.lo + u * (self.hi - self.lo),
            Scale::Log => (self.lo.ln() + u * (self.hi.ln() - self.lo.ln()))
                .exp()
                .clamp(self.lo, self.hi),
            Scale::Integer => (self.lo + u * (self.hi - self.lo))
                .round()
                .clamp(self.lo, self.hi),
        }
    }

    pub fn to_unit(&self, v: f64) -> f64 {
        let u = match self.scale {
            Scale::Linear | Scale::Integer => (v - self.lo) / (self.hi - self.lo),
            Scale::Log => (v.ln() - self.lo.ln()) / (self.hi.ln() - self.lo.ln()),
        };
        u.clamp(0.0, 1.0)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi && (self.scale != Scale::Integer || v.fract() == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dimensions: Vec<Dimension>,
}

impl SearchSpace {
    pub fn new(dimensions: Vec<Dimension>) -> Result<Self> {
        let s = SearchSpace { dimensions };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        contract!(!self.dimensions.is_empty(), "search space is empty");
        for d in &self.dimensions {
            contract!(
                d.lo.is_finite() && d.hi.is_finite() && d.lo < d.hi,
                "dimension {} needs finite lo < hi, got [{}, {}]",
                d.name,
                d.lo,
                d.hi
            );
            contract!(
                d.scale != Scale::Log || d.lo > 0.0,
                "log dimension {} needs lo > 0",
                d.name
            );
        }
        Ok(())
    }

    /// Learning rate, reconstruction and classification weights, and critic steps.
    pub fn default_training() -> Self {
        SearchSpace {
            dimensions: vec![
                Dimension::new("alpha", 1e-5, 1e-3, Scale::Log),
                Dimension::new("lambda_rec", 1.0, 30.0, Scale::Linear),
                Dimension::new("lambda_cls", 0.1, 10.0, Scale::Log),
                Dimension::new("n_critic", 1.0, 10.0, Scale::Integer),
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.dimensions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dimensions.is_empty()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        self.dimensions
            .iter()
            .zip(u)
            .map(|(d, &x)| d.from_unit(x))
            .collect()
    }

    pub fn to_unit(&self, p: &[f64]) -> Vec<f64> {
        self.dimensions
            .iter()
            .zip(p)
            .map(|(d, &x)| d.to_unit(x))
            .collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.len() && self.dimensions.iter().zip(p).all(|(d, &x)| d.contains(x))
    }
}
