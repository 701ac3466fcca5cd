//! Hyperparameter search with random search, particle swarm and a Parzen-estimator
//! sequential model.

mod solvers;
mod space;

use std::collections::BTreeMap;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use solvers::{
    kde, pso_update, tpe_select, PsoConfig, Solver, TpeConfig, PSO_DEFAULTS, TPE_DEFAULTS,
};
pub use space::{Dimension, Scale, SearchSpace};

use crate::data::ImageSet;
use crate::error::{Error, Result};
use crate::ksame::LabelScheme;
use crate::seed::derive;
use crate::training::{HyperParams, Trainer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Random,
    Pso,
    Tpe,
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Strategy::Random),
            "pso" => Ok(Strategy::Pso),
            "tpe" => Ok(Strategy::Tpe),
            other => Err(Error::Contract(format!(
                "unknown strategy '{other}' (expected random, pso or tpe)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub id: usize,
    pub point: BTreeMap<String, f64>,
    /// Values in search-space order.
    pub values: Vec<f64>,
    /// `None` when the trial failed or produced a non-finite loss.
    pub objective: Option<f64>,
    pub failed: bool,
    pub seed: u64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub strategy: Strategy,
    pub best: TrialRecord,
    /// Best objective after each trial.
    pub best_so_far: Vec<Option<f64>>,
    pub history: Vec<TrialRecord>,
}

/// Runs `trials` sequential trials. `objective(point, seed)` scores one point; errors and
/// non-finite values mark the trial failed.
pub fn tune_loop<F>(
    strategy: Strategy,
    space: &SearchSpace,
    mut objective: F,
    trials: usize,
    seed: u64,
) -> Result<TuneResult>
where
    F: FnMut(&[f64], u64) -> Result<f64>,
{
    space.validate()?;
    if trials == 0 {
        return Err(Error::Contract("need at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, &[6]));
    let mut solver = Solver::new(strategy);
    let mut history: Vec<TrialRecord> = Vec::with_capacity(trials);
    let mut best_so_far = Vec::with_capacity(trials);
    let mut best: Option<f64> = None;
    for id in 0..trials {
        let values = solver.suggest(space, &history, &mut rng)?;
        let trial_seed = derive(seed, &[7, id as u64]);
        let start = Instant::now();
        let objective_value = match objective(&values, trial_seed) {
            Ok(v) if v.is_finite() => Some(v),
            _ => None,
        };
        let record = TrialRecord {
            id,
            point: space
                .dimensions
                .iter()
                .map(|d| d.name.clone())
                .zip(values.iter().copied())
                .collect(),
            values,
            objective: objective_value,
            failed: objective_value.is_none(),
            seed: trial_seed,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        solver.observe(space, &record);
        if let Some(v) = objective_value {
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
        best_so_far.push(best);
        history.push(record);
    }
    let best = history
        .iter()
        .filter(|r| r.objective.is_some())
        .min_by(|a, b| a.objective.unwrap().total_cmp(&b.objective.unwrap()))
        .cloned()
        .ok_or_else(|| Error::NoResult(format!("all {trials} trials failed")))?;
    Ok(TuneResult {
        strategy,
        best,
        best_so_far,
        history,
    })
}

/// `(x − 0.3)² + (y − 0.7)²` over the first two coordinates.
pub fn quadratic_objective(p: &[f64]) -> f64 {
    (p[0] - 0.3).powi(2) + (p[1] - 0.7).powi(2)
}

pub fn quadratic_space() -> SearchSpace {
    SearchSpace {
        dimensions: vec![
            Dimension::new("x", 0.0, 1.0, Scale::Linear),
            Dimension::new("y", 0.0, 1.0, Scale::Linear),
        ],
    }
}

/// Applies named search values onto `base`.
pub fn apply_point(base: &HyperParams, space: &SearchSpace, values: &[f64]) -> Result<HyperParams> {
    let mut hp = base.clone();
    for (d, &v) in space.dimensions.iter().zip(values) {
        match d.name.as_str() {
            "alpha" => hp.alpha = v as f32,
            "beta1" => hp.beta1 = v as f32,
            "beta2" => hp.beta2 = v as f32,
            "lambda_gp" => hp.lambda_gp = v,
            "lambda_rec" => hp.lambda_rec = v,
            "lambda_cls" => hp.lambda_cls = v,
            "n_critic" => hp.n_critic = v.round() as usize,
            other => {
                return Err(Error::Contract(format!(
                    "search dimension '{other}' is not a tunable hyperparameter"
                )))
            }
        }
    }
    hp.validate()?;
    Ok(hp)
}

/// Mean of the last `tail` logged generator losses (every `hp.log_every` iterations) of a
/// `budget`-iteration run. A run too short to log uses its final loss.
pub fn training_objective(
    set: &ImageSet,
    scheme: &LabelScheme,
    hp: &HyperParams,
    budget: u64,
    tail: usize,
) -> Result<f64> {
    if budget == 0 || tail == 0 {
        return Err(Error::Contract(
            "training budget and tail must be at least 1".into(),
        ));
    }
    let mut trainer = Trainer::new(set.clone(), scheme.clone(), hp.clone())?;
    let mut logged = Vec::new();
    let mut last = 0.0;
    for _ in 0..budget {
        let r = trainer.step()?;
        last = r.generator.total;
        if r.iteration % hp.log_every == 0 {
            logged.push(last);
        }
    }
    if logged.is_empty() {
        logged.push(last);
    }
    let tail = tail.min(logged.len());
    Ok(logged[logged.len() - tail..].iter().sum::<f64>() / tail as f64)
}
