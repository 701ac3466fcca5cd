use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::space::SearchSpace;
use super::{Strategy, TrialRecord};
use crate::error::{contract, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsoConfig {
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub swarm: usize,
    /// Initial velocity bound, in unit-cube coordinates.
    pub v0: f64,
}

pub const PSO_DEFAULTS: PsoConfig = PsoConfig {
    inertia: 0.72,
    cognitive: 1.49,
    social: 1.49,
    swarm: 8,
    v0: 0.1,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TpeConfig {
    pub gamma: f64,
    /// Kernel width as a fraction of each dimension's range.
    pub bandwidth: f64,
    pub candidates: usize,
    /// Trials drawn uniformly before the density model takes over.
    pub n_startup: usize,
}

pub const TPE_DEFAULTS: TpeConfig = TpeConfig {
    gamma: 0.25,
    bandwidth: 0.1,
    candidates: 24,
    n_startup: 10,
};

/// `v ← ωv + c₁r₁(pbest − x) + c₂r₂(gbest − x)`, then `x ← clip(x + v)` to the unit cube.
pub fn pso_update(
    x: &mut [f64],
    v: &mut [f64],
    pbest: &[f64],
    gbest: &[f64],
    r: &[(f64, f64)],
    cfg: &PsoConfig,
) {
    for i in 0..x.len() {
        let (r1, r2) = r[i];
        v[i] = cfg.inertia * v[i]
            + cfg.cognitive * r1 * (pbest[i] - x[i])
            + cfg.social * r2 * (gbest[i] - x[i]);
        x[i] = (x[i] + v[i]).clamp(0.0, 1.0);
    }
}

/// Mean of axis-aligned Gaussian kernels of width `bw` centred on `points`, at `x`.
pub fn kde(x: &[f64], points: &[Vec<f64>], bw: f64) -> f64 {
    let norm = (2.0 * std::f64::consts::PI).sqrt() * bw;
    points
        .iter()
        .map(|p| {
            p.iter()
                .zip(x)
                .map(|(a, b)| (-0.5 * ((a - b) / bw).powi(2)).exp() / norm)
                .product::<f64>()
        })
        .sum::<f64>()
        / points.len() as f64
}

/// Index of the candidate maximizing `l(x) / g(x)`; the first wins ties.
pub fn tpe_select(candidates: &[Vec<f64>], good: &[Vec<f64>], bad: &[Vec<f64>], bw: f64) -> usize {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, c) in candidates.iter().enumerate() {
        let l = kde(c, good, bw);
        let g = kde(c, bad, bw).max(f64::MIN_POSITIVE);
        let ratio = l / g;
        if ratio > best.0 {
            best = (ratio, i);
        }
    }
    best.1
}

#[derive(Clone, Debug)]
struct Particle {
    x: Vec<f64>,
    v: Vec<f64>,
    best: Vec<f64>,
    best_f: f64,
}

#[derive(Clone, Debug)]
struct Swarm {
    cfg: PsoConfig,
    particles: Vec<Particle>,
    gbest: Vec<f64>,
    gbest_f: f64,
    next: usize,
}

/// Stateful suggestion source for one strategy. Positions live in the unit cube.
#[derive(Clone, Debug)]
pub enum Solver {
    Random,
    Pso(Box<SwarmState>),
    Tpe(TpeConfig),
}

#[derive(Clone, Debug)]
pub struct SwarmState(Swarm);

fn unit_point(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

impl Solver {
    pub fn new(strategy: Strategy) -> Self {
        match strategy {
            Strategy::Random => Solver::Random,
            Strategy::Pso => Self::pso(PSO_DEFAULTS),
            Strategy::Tpe => Solver::Tpe(TPE_DEFAULTS),
        }
    }

    pub fn pso(cfg: PsoConfig) -> Self {
        Solver::Pso(Box::new(SwarmState(Swarm {
            cfg,
            particles: Vec::new(),
            gbest: Vec::new(),
            gbest_f: f64::INFINITY,
            next: 0,
        })))
    }

    /// Global best objective seen by the swarm, if this is a PSO solver.
    pub fn swarm_best(&self) -> Option<f64> {
        match self {
            Solver::Pso(s) => Some(s.0.gbest_f),
            _ => None,
        }
    }

    /// Next point to evaluate, in the space's own coordinates.
    pub fn suggest(
        &mut self,
        space: &SearchSpace,
        history: &[TrialRecord],
        rng: &mut impl Rng,
    ) -> Result<Vec<f64>> {
        space.validate()?;
        let n = space.len();
        let u = match self {
            Solver::Random => unit_point(n, rng),
            Solver::Pso(s) => {
                let s = &mut s.0;
                if s.particles.len() < s.cfg.swarm {
                    let x = unit_point(n, rng);
                    let v = (0..n)
                        .map(|_| rng.gen_range(-s.cfg.v0..=s.cfg.v0))
                        .collect();
                    s.particles.push(Particle {
                        best: x.clone(),
                        x: x.clone(),
                        v,
                        best_f: f64::INFINITY,
                    });
                    s.next = s.particles.len() - 1;
                    x
                } else {
                    let i = s.next;
                    let r: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen(), rng.gen())).collect();
                    let gbest = s.gbest.clone();
                    let p = &mut s.particles[i];
                    pso_update(&mut p.x, &mut p.v, &p.best, &gbest, &r, &s.cfg);
                    p.x.clone()
                }
            }
            Solver::Tpe(cfg) => tpe_suggest(space, history, rng, cfg)?,
        };
        Ok(space.from_unit(&u))
    }

    /// Feeds the result of the most recent suggestion back into the solver.
    pub fn observe(&mut self, space: &SearchSpace, record: &TrialRecord) {
        if let Solver::Pso(s) = self {
            let s = &mut s.0;
            let f = record.objective.unwrap_or(f64::INFINITY);
            let i = s.next;
            let p = &mut s.particles[i];
            // the evaluated point may differ from p.x after integer rounding
            let u = space.to_unit(&record.values);
            if f < p.best_f {
                p.best_f = f;
                p.best = u.clone();
            }
            if f < s.gbest_f {
                s.gbest_f = f;
                s.gbest = u;
            } else if s.gbest.is_empty() {
                s.gbest = p.best.clone();
            }
            if s.particles.len() >= s.cfg.swarm {
                s.next = (i + 1) % s.cfg.swarm;
            }
        }
    }
}

fn tpe_suggest(
    space: &SearchSpace,
    history: &[TrialRecord],
    rng: &mut impl Rng,
    cfg: &TpeConfig,
) -> Result<Vec<f64>> {
    contract!(
        cfg.gamma > 0.0 && cfg.gamma < 1.0 && cfg.bandwidth > 0.0 && cfg.candidates >= 1,
        "invalid TPE configuration"
    );
    let n = space.len();
    let mut done: Vec<(f64, Vec<f64>)> = history
        .iter()
        .filter_map(|r| r.objective.map(|f| (f, space.to_unit(&r.values))))
        .collect();
    if done.len() < cfg.n_startup.max(2) {
        return Ok(unit_point(n, rng));
    }
    done.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n_good = ((cfg.gamma * done.len() as f64).ceil() as usize).clamp(1, done.len() - 1);
    let good: Vec<Vec<f64>> = done[..n_good].iter().map(|d| d.1.clone()).collect();
    let bad: Vec<Vec<f64>> = done[n_good..].iter().map(|d| d.1.clone()).collect();
    let noise = Normal::new(0.0, cfg.bandwidth).expect("positive bandwidth");
    let candidates: Vec<Vec<f64>> = (0..cfg.candidates)
        .map(|_| {
            let centre = &good[rng.gen_range(0..good.len())];
            centre
                .iter()
                .map(|&c| (c + noise.sample(rng)).clamp(0.0, 1.0))
                .collect()
        })
        .collect();
    Ok(candidates[tpe_select(&candidates, &good, &bad, cfg.bandwidth)].clone())
}
