//! Checks shared by the integration tests and the acceptance runner.

#![allow(dead_code)]

pub mod fd;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kss_core::data::{decode_pnm, encode_pnm, toy_faces, toygen, ImageSet, Pnm, ToyFaceSpec};
use kss_core::evaluation::{reid_rate, sharpness_compare};
use kss_core::hypertune::{quadratic_objective, quadratic_space, tune_loop, Strategy};
use kss_core::ksame::{
    compute_pairwise_distances, deidentify_average, deidentify_set, linkage_probabilities,
    partition_identities, reidentify, select_k_among, DeidentifiedSet, DistanceMatrix,
    DistanceMode, LabelScheme,
};
use kss_core::models::{
    load_checkpoint, save_checkpoint, Checkpoint, LabelLayout, ModelConfig, ModelParams,
};
use kss_core::nn::{AdamConfig, AdamState, Tape, Tensor};
use kss_core::precision::{
    check_finite_and_unscale, f16_bits_to_f32, f32_to_f16_bits, quantize_f16, scaled_backward,
    LossScaler, MasterWeights, PrecisionMode, Unscaled,
};
use kss_core::training::{
    bootstrap_labels, csv_row, memory_ledger, train, HyperParams, Net, Trainer,
};

/// `Ok(detail)` on success, `Err(detail)` on failure.
pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        {
            let holds: bool = $cond;
            if !holds {
                return Err(format!($($fmt)+));
            }
        }
    };
}
#[allow(unused_imports)]
pub(crate) use ensure;

pub fn core<T>(r: kss_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

pub fn toy_set(identities: usize, per_identity: usize, seed: u64) -> ImageSet {
    ImageSet::from_records(toy_faces(&ToyFaceSpec::new(identities, per_identity, seed)).unwrap())
        .unwrap()
}

/// Every file under `dir`, keyed by relative path.
pub fn dir_bytes(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

pub fn bits(ts: &[Tensor]) -> Vec<Vec<u32>> {
    ts.iter()
        .map(|t| t.data().iter().map(|v| v.to_bits()).collect())
        .collect()
}

// ---------------------------------------------------------------- binary16

fn same_f32(a: f32, b: f32) -> bool {
    (a.is_nan() && b.is_nan()) || a.to_bits() == b.to_bits()
}

pub fn f16_oracle(random: usize) -> Check {
    for h in 0..=u16::MAX {
        let ours = f16_bits_to_f32(h);
        let theirs = half::f16::from_bits(h).to_f32();
        ensure!(
            same_f32(ours, theirs),
            "decode {h:#06x}: {ours} vs {theirs}"
        );
        let back = f32_to_f16_bits(ours);
        if ours.is_nan() {
            ensure!(
                f16_bits_to_f32(back).is_nan(),
                "NaN {h:#06x} lost its NaN-ness"
            );
        } else {
            ensure!(back == h, "round trip {h:#06x} -> {ours} -> {back:#06x}");
        }
        ensure!(
            same_f32(quantize_f16(ours), ours),
            "quantize not idempotent at {h:#06x}"
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for i in 0..random {
        // alternate raw bit patterns with values concentrated in the binary16 range
        let x = if i % 2 == 0 {
            f32::from_bits(rng.gen())
        } else {
            rng.gen_range(-70000.0f32..70000.0) * 2f32.powi(rng.gen_range(-30..1))
        };
        let ours = quantize_f16(x);
        let theirs = half::f16::from_f32(x).to_f32();
        ensure!(
            same_f32(ours, theirs),
            "quantize {x:e} ({:#010x}): {ours:e} vs {theirs:e}",
            x.to_bits()
        );
    }
    let cases = [
        (2049.0, 2048.0),
        (2f32.powi(-26), 0.0),
        (65504.0, 65504.0),
        (65519.0, 65504.0),
        (65520.0, f32::INFINITY),
        (1e6, f32::INFINITY),
        (-1e6, f32::NEG_INFINITY),
    ];
    for (x, want) in cases {
        ensure!(
            quantize_f16(x) == want,
            "quantize({x}) = {} want {want}",
            quantize_f16(x)
        );
    }
    Ok(format!("65536 patterns and {random} random values agree"))
}

// ---------------------------------------------------------------- loss scaling

/// Gradient of `w · g` with respect to `w` after fp16 storage under `scale`, unscaled.
fn stored_gradient(g: f32, scale: f32) -> Result<f32, String> {
    let mut tape = Tape::<f32>::new();
    let w = tape.leaf(Tensor::scalar(1.0));
    let c = tape.constant(Tensor::scalar(g));
    let loss = core(tape.mul(w, c))?;
    let mut scaler = core(LossScaler::new(scale, 200))?;
    let grads = core(scaled_backward(&mut tape, loss, &[w], &scaler))?;
    match check_finite_and_unscale(grads, &mut scaler) {
        Unscaled::Finite(g) => Ok(g[0].data()[0]),
        Unscaled::Overflow => Err("unexpected overflow".into()),
    }
}

pub fn loss_scaling_survival() -> Check {
    let tiny = 2f32.powi(-26);
    let scaled = stored_gradient(tiny, 1024.0)?;
    ensure!(
        scaled == tiny,
        "2^-26 through scale 2^10 came back as {scaled:e}"
    );
    let raw = stored_gradient(tiny, 1.0)?;
    ensure!(
        raw == 0.0,
        "2^-26 stored without scaling came back as {raw:e}"
    );

    // Adam with beta1 = beta2 = eps = 0 moves by exactly lr per unit gradient.
    let step = 2f32.powi(-25);
    let cfg = AdamConfig {
        lr: step,
        beta1: 0.0,
        beta2: 0.0,
        eps: 0.0,
    };
    let start = 0.125f32;
    let ulp = 2f32.powi(-13);
    let mut mw = MasterWeights::new(vec![Tensor::scalar(start)]);
    let mut adam = AdamState::new(mw.master());
    let mut pure_fp16 = start;
    let mut first_change = None;
    for n in 1..=4096u32 {
        core(mw.master_update(&[Tensor::scalar(-1.0)], &mut adam, &cfg))?;
        let master = mw.master()[0].data()[0];
        let working = mw.working()[0].data()[0];
        pure_fp16 = quantize_f16(pure_fp16 + step);
        ensure!(
            master == start + n as f32 * step,
            "master after {n} steps is {master:e}, want {:e}",
            start + n as f32 * step
        );
        ensure!(
            working == quantize_f16(master),
            "working copy is not the rounded master"
        );
        if n == 2 {
            ensure!(
                master - start == 2f32.powi(-24),
                "two steps moved the master by {:e}",
                master - start
            );
        }
        if working != start && first_change.is_none() {
            first_change = Some(n);
        }
    }
    ensure!(
        pure_fp16 == start,
        "a pure binary16 weight moved to {pure_fp16:e}"
    );
    // half an ulp is 2048 steps; the exact tie rounds to even, so the copy moves one step later
    ensure!(
        first_change == Some(2049),
        "working copy first moved after {first_change:?} steps"
    );
    ensure!(
        mw.working()[0].data()[0] == start + ulp,
        "working copy skipped a binary16 step"
    );
    Ok(format!(
        "2^-26 survives at scale 2^10 and flushes unscaled; working copy first moves at step {}",
        first_change.unwrap()
    ))
}

// ---------------------------------------------------------------- memory ledger

pub const LEDGER_MPT_BYTES: u64 = 54_543_368;
pub const LEDGER_FP32_BYTES: u64 = 103_882_528;

pub fn default_params(identities: usize) -> ModelParams {
    ModelParams::init(ModelConfig::toy(LabelLayout::new(identities, 8, 3)), 0).unwrap()
}

pub fn mpt_ledger() -> Check {
    let ledger = core(memory_ledger(&default_params(12), 16))?;
    let mpt = ledger.report(PrecisionMode::Mpt);
    let fp32 = ledger.report(PrecisionMode::Fp32);
    let ratio = mpt.total_bytes as f64 / fp32.total_bytes as f64;
    ensure!(
        mpt.total_bytes == LEDGER_MPT_BYTES && fp32.total_bytes == LEDGER_FP32_BYTES,
        "byte counts changed: mpt {} fp32 {}",
        mpt.total_bytes,
        fp32.total_bytes
    );
    ensure!(ratio <= 0.65, "mpt/fp32 = {ratio:.4}");
    Ok(format!(
        "mpt {} B / fp32 {} B = {ratio:.3}",
        mpt.total_bytes, fp32.total_bytes
    ))
}

// ---------------------------------------------------------------- overflow skip

pub fn small_trainer(mpt: bool, seed: u64) -> Trainer {
    let set = toy_set(4, 4, 3);
    let (_, scheme) = bootstrap_labels(&set, 2, seed).unwrap();
    let hp = HyperParams {
        mpt,
        seed,
        batch_size: 4,
        n_critic: 1,
        ..HyperParams::default()
    };
    Trainer::new(set, scheme, hp).unwrap()
}

type Snapshot = (Vec<Vec<u32>>, Vec<Vec<u32>>, Vec<Vec<u32>>, u64);

fn critic_snapshot(t: &Trainer) -> Snapshot {
    let a = t.adam_state(Net::Critic);
    (
        bits(t.params().critic.tensors()),
        bits(&a.m),
        bits(&a.v),
        a.t,
    )
}

pub fn overflow_skip() -> Check {
    let mut t = small_trainer(true, 1);
    // one ordinary step so the moments are non-trivial
    let b = core(t.sample())?;
    core(t.critic_step(&b))?;
    let before = critic_snapshot(&t);
    let gen_before = bits(t.params().generator.tensors());
    let scale = t.scaler().scale();
    let counts = t.critic_steps();
    t.set_critic_hook(Some(Box::new(|g: &mut [Tensor], s: f32| {
        g[0].data_mut()[0] = 2f32.powi(30) * s;
    })));
    let b = core(t.sample())?;
    let r = core(t.critic_step(&b))?;
    ensure!(
        r.outcome == kss_core::precision::StepOutcome::Skipped,
        "injected overflow was applied"
    );
    ensure!(
        critic_snapshot(&t) == before,
        "critic parameters or moments changed"
    );
    ensure!(
        bits(t.params().generator.tensors()) == gen_before,
        "generator changed"
    );
    ensure!(
        t.scaler().scale() == scale / 2.0,
        "scale {} after overflow, want {}",
        t.scaler().scale(),
        scale / 2.0
    );
    ensure!(
        t.critic_steps() == (counts.0, counts.1 + 1),
        "step counters {:?} -> {:?}",
        counts,
        t.critic_steps()
    );
    Ok(format!("skipped; scale {scale} -> {}", t.scaler().scale()))
}

// ---------------------------------------------------------------- k-anonymity

fn brute_best(d: &DistanceMatrix, anchor: usize, k: usize, pool: &[usize]) -> Vec<usize> {
    let others: Vec<usize> = pool.iter().copied().filter(|&i| i != anchor).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 0u32..(1 << others.len()) {
        if mask.count_ones() as usize != k - 1 {
            continue;
        }
        let mut g: Vec<usize> = std::iter::once(anchor)
            .chain(
                (0..others.len())
                    .filter(|b| mask >> b & 1 == 1)
                    .map(|b| others[b]),
            )
            .collect();
        g.sort_unstable();
        let cost: f64 = g.iter().map(|&i| d.get(anchor, i)).sum();
        let better = match &best {
            None => true,
            Some((c, bg)) => cost < *c || (cost == *c && g < *bg),
        };
        if better {
            best = Some((cost, g));
        }
    }
    best.unwrap().1
}

/// Replays the seeded anchor draws with exhaustive selection.
pub fn brute_partition(d: &DistanceMatrix, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(kss_core::seed::derive(seed, &[2]));
    let mut remaining: Vec<usize> = (0..d.len()).collect();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    while remaining.len() >= k {
        let anchor = remaining[rng.gen_range(0..remaining.len())];
        let g = brute_best(d, anchor, k, &remaining);
        remaining.retain(|i| !g.contains(i));
        groups.push(g);
    }
    if let Some(last) = groups.last_mut() {
        last.extend(remaining);
        last.sort_unstable();
    }
    groups
}

pub fn random_distances(n: usize, rng: &mut ChaCha8Rng) -> DistanceMatrix {
    let means: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    DistanceMatrix::from_means(&means).unwrap()
}

pub fn grouping_oracle(cases: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for case in 0..cases {
        let n = rng.gen_range(2..=8);
        let d = random_distances(n, &mut rng);
        let pool: Vec<usize> = (0..n).collect();
        for k in 1..=n {
            for anchor in 0..n {
                let ours = core(select_k_among(&d, anchor, k, &pool))?;
                ensure!(
                    ours == brute_best(&d, anchor, k, &pool),
                    "case {case}: select n={n} k={k} anchor={anchor} gave {ours:?}"
                );
            }
            let seed = rng.gen();
            let table = core(partition_identities(&d, k, seed))?;
            ensure!(
                table.groups() == brute_partition(&d, k, seed).as_slice(),
                "case {case}: partition n={n} k={k} differs from the oracle"
            );
        }
    }
    Ok(format!("{cases} random instances with up to 8 identities"))
}

pub fn check_anonymity(set: &ImageSet, deid: &DeidentifiedSet, k: usize) -> Result<f64, String> {
    let table = &deid.table;
    for (g, members) in table.groups().iter().enumerate() {
        ensure!(
            members.len() >= k,
            "k={k}: group {g} has {} identities",
            members.len()
        );
    }
    for id in 0..set.identities() {
        let groups: Vec<usize> = deid
            .surrogates
            .iter()
            .filter(|s| s.identity == id)
            .map(|s| s.group)
            .collect();
        ensure!(
            groups.len() == set.images_of(id).len(),
            "identity {id} lost images"
        );
        ensure!(
            groups.windows(2).all(|w| w[0] == w[1]),
            "k={k}: identity {id} spans groups {groups:?}"
        );
    }
    // exhaustive linkage: every uniform guess over the candidates, counted directly
    let mut worst = 0.0f64;
    for s in &deid.surrogates {
        let cands = core(reidentify(s.group, table))?;
        let wins = cands.iter().filter(|&&c| c == s.identity).count();
        let p = wins as f64 / cands.len() as f64;
        ensure!(
            wins == 1,
            "k={k}: source {} not among its candidates",
            s.source
        );
        ensure!(p <= 1.0 / k as f64, "k={k}: linkage {p} exceeds 1/k");
        worst = worst.max(p);
    }
    let reported = core(linkage_probabilities(deid))?;
    ensure!(
        reported.iter().all(|&p| p <= 1.0 / k as f64),
        "k={k}: reported linkage above 1/k"
    );
    Ok(worst)
}

pub fn k_anonymity() -> Check {
    let set = toy_set(12, 8, 7);
    let params = default_params(12);
    let net = params.siamese_net();
    let d = core(compute_pairwise_distances(
        &set,
        DistanceMode::Siamese,
        Some((&net, &params.siamese)),
    ))?;
    let mut detail = Vec::new();
    for k in [2, 3, 5] {
        let table = core(partition_identities(&d, k, 9))?;
        let deid = core(deidentify_average(&set, &table))?;
        let worst = check_anonymity(&set, &deid, k)?;
        detail.push(format!("k={k} max linkage {worst:.3}"));
    }
    let oracle = grouping_oracle(60)?;
    Ok(format!("{}; oracle: {oracle}", detail.join(", ")))
}

// ---------------------------------------------------------------- training smoke run

pub const SMOKE_ITERATIONS: u64 = 500;
pub const SMOKE_LIMIT: Duration = Duration::from_secs(30 * 60);

/// Held-out images: one per identity, plus a second image for four identities.
pub fn held_out_split() -> Vec<usize> {
    (0..12)
        .map(|i| i * 8 + i % 8)
        .chain((0..4).map(|i| i * 8 + (i + 4) % 8))
        .collect()
}

pub struct SmokeRun {
    pub full: ImageSet,
    pub checkpoint: Checkpoint,
    pub elapsed: Duration,
    pub s10: f64,
    pub s_final: f64,
    pub non_finite: Vec<String>,
    pub skipped: u64,
}

pub fn smoke_run(dir: &Path) -> Result<SmokeRun, String> {
    let full = toy_set(12, 8, 7);
    let (_, scheme) = core(bootstrap_labels(&full, 3, 0))?;
    let held = held_out_split();
    let train_idx: Vec<usize> = (0..full.len()).filter(|i| !held.contains(i)).collect();
    let train_set = core(full.subset(&train_idx))?;
    let held_set = core(full.subset(&held))?;
    let held_scheme: LabelScheme = scheme.subset(&held);
    let mut t = core(Trainer::new(
        train_set,
        scheme.subset(&train_idx),
        HyperParams::default(),
    ))?;
    let start = Instant::now();
    let mut s10 = f64::NAN;
    let mut non_finite = Vec::new();
    for it in 1..=SMOKE_ITERATIONS {
        let r = core(t.step())?;
        let c = &r.critic.terms;
        let g = &r.generator.terms;
        if ![c.adv, c.gp, c.cls, g.adv, g.cls, g.rec]
            .iter()
            .all(|v| v.is_finite())
        {
            non_finite.push(csv_row(&r));
        }
        if it == 10 {
            s10 = core(t.reconstruction_similarity(&held_set, &held_scheme, 1))?;
        }
    }
    let elapsed = start.elapsed();
    let s_final = core(t.reconstruction_similarity(&held_set, &held_scheme, 1))?;
    core(save_checkpoint(dir, t.params(), SMOKE_ITERATIONS))?;
    let checkpoint = core(load_checkpoint(dir))?;
    Ok(SmokeRun {
        full,
        checkpoint,
        elapsed,
        s10,
        s_final,
        non_finite,
        skipped: t.critic_steps().1,
    })
}

pub fn training_smoke(run: &SmokeRun) -> Check {
    ensure!(
        run.non_finite.is_empty(),
        "non-finite losses: {:?}",
        run.non_finite
    );
    ensure!(run.elapsed <= SMOKE_LIMIT, "took {:?}", run.elapsed);
    ensure!(
        run.s_final < run.s10,
        "held-out similarity {:.4} at 500 is not below {:.4} at 10",
        run.s_final,
        run.s10
    );
    Ok(format!(
        "{}s, S {:.4} -> {:.4}",
        run.elapsed.as_secs(),
        run.s10,
        run.s_final
    ))
}

pub struct DeidPair {
    pub k: usize,
    pub gan: DeidentifiedSet,
    pub average: DeidentifiedSet,
}

pub fn deid_pairs(run: &SmokeRun, ks: &[usize]) -> Result<Vec<DeidPair>, String> {
    ks.iter()
        .map(|&k| {
            let gan = core(deidentify_set(
                &run.full,
                &run.checkpoint,
                k,
                11,
                DistanceMode::Siamese,
            ))?;
            let average = core(deidentify_average(&run.full, &gan.table))?;
            Ok(DeidPair { k, gan, average })
        })
        .collect()
}

fn pixels(d: &DeidentifiedSet) -> Vec<Tensor> {
    d.surrogates.iter().map(|s| s.pixels.clone()).collect()
}

pub fn sharpness_ordering(pairs: &[DeidPair]) -> Check {
    let mut sets = Vec::new();
    for p in pairs {
        sets.push(("kss-gan".to_string(), p.k, pixels(&p.gan)));
        sets.push(("average".to_string(), p.k, pixels(&p.average)));
    }
    let report = core(sharpness_compare(&sets, "average"))?;
    let mut detail = Vec::new();
    for p in pairs {
        let g = report.row("kss-gan", p.k).ok_or("missing row")?;
        let a = report.row("average", p.k).ok_or("missing row")?;
        ensure!(
            g.mean_var > a.mean_var && g.win_rate >= 0.8,
            "k={}: gan mean {:.4} vs average {:.4}, win rate {:.3}",
            p.k,
            g.mean_var,
            a.mean_var,
            g.win_rate
        );
        detail.push(format!("k={} win {:.2}", p.k, g.win_rate));
    }
    Ok(detail.join(", "))
}

pub const REID_K: usize = 3;

pub struct ReidRates {
    pub k: usize,
    pub gan: f64,
    pub average: f64,
}

pub fn reid_rates(run: &SmokeRun, pairs: &[DeidPair]) -> Result<Vec<ReidRates>, String> {
    pairs
        .iter()
        .map(|p| {
            Ok(ReidRates {
                k: p.k,
                gan: core(reid_rate(&run.full, &p.gan, &run.checkpoint.params))?,
                average: core(reid_rate(&run.full, &p.average, &run.checkpoint.params))?,
            })
        })
        .collect()
}

pub fn reidentification(run: &SmokeRun, pairs: &[DeidPair]) -> Check {
    let rates = reid_rates(run, pairs)?;
    for p in pairs {
        check_anonymity(&run.full, &p.gan, p.k)?;
        check_anonymity(&run.full, &p.average, p.k)?;
    }
    let all: Vec<String> = rates
        .iter()
        .map(|r| format!("k={} gan {:.3} avg {:.3}", r.k, r.gan, r.average))
        .collect();
    let r = rates.iter().find(|r| r.k == REID_K).ok_or("no k=3 pair")?;
    ensure!(r.gan >= r.average, "{}", all.join(", "));
    Ok(all.join(", "))
}

// ---------------------------------------------------------------- solvers

pub struct SolverMedians {
    pub random: f64,
    pub pso: f64,
    pub tpe: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn solver_medians(trials: usize, seeds: u64) -> Result<SolverMedians, String> {
    let space = quadratic_space();
    let run = |s: Strategy| -> Result<f64, String> {
        let best: Result<Vec<f64>, String> = (0..seeds)
            .map(|seed| {
                let r = core(tune_loop(
                    s,
                    &space,
                    |p, _| Ok(quadratic_objective(p)),
                    trials,
                    seed,
                ))?;
                r.best.objective.ok_or_else(|| "no objective".to_string())
            })
            .collect();
        Ok(median(best?))
    };
    Ok(SolverMedians {
        random: run(Strategy::Random)?,
        pso: run(Strategy::Pso)?,
        tpe: run(Strategy::Tpe)?,
    })
}

pub fn solver_ordering() -> Check {
    let start = Instant::now();
    let m = solver_medians(30, 20)?;
    let elapsed = start.elapsed();
    let detail = format!(
        "median best random {:.2e} pso {:.2e} tpe {:.2e} in {:.2}s",
        m.random,
        m.pso,
        m.tpe,
        elapsed.as_secs_f64()
    );
    ensure!(m.pso <= m.random && m.tpe <= m.random, "{detail}");
    ensure!(elapsed < Duration::from_secs(5), "{detail}");
    Ok(detail)
}

// ---------------------------------------------------------------- determinism

pub fn train_to(dir: &Path, data: &ImageSet, hp: &HyperParams) -> Result<(), String> {
    let (_, scheme) = core(bootstrap_labels(data, hp.k, hp.seed))?;
    let mut t = core(Trainer::new(data.clone(), scheme, hp.clone()))?;
    core(train(&mut t, dir))?;
    Ok(())
}

pub fn determinism(root: &Path) -> Check {
    let spec = ToyFaceSpec::new(4, 4, 21);
    let (a, b) = (root.join("toy-a"), root.join("toy-b"));
    core(toygen(&spec, &a))?;
    core(toygen(&spec, &b))?;
    ensure!(dir_bytes(&a) == dir_bytes(&b), "toygen output differs");

    let data = core(ImageSet::load(&a))?;
    let hp = HyperParams {
        iterations: 3,
        batch_size: 4,
        n_critic: 2,
        checkpoint_every: 2,
        log_every: 1,
        seed: 5,
        k: 2,
        ..HyperParams::default()
    };
    let (ta, tb) = (root.join("train-a"), root.join("train-b"));
    train_to(&ta, &data, &hp)?;
    train_to(&tb, &data, &hp)?;
    ensure!(dir_bytes(&ta) == dir_bytes(&tb), "checkpoints differ");

    let ckpt = core(load_checkpoint(&ta))?;
    let (da, db) = (root.join("deid-a"), root.join("deid-b"));
    for dir in [&da, &db] {
        let d = core(deidentify_set(&data, &ckpt, 2, 3, DistanceMode::Siamese))?;
        core(d.save(dir, &data))?;
    }
    ensure!(dir_bytes(&da) == dir_bytes(&db), "deid output differs");
    Ok("toygen, train and deid outputs byte-identical".into())
}

// ---------------------------------------------------------------- image IO

pub fn random_pnm(rng: &mut ChaCha8Rng, channels: usize) -> Pnm {
    let (w, h) = (rng.gen_range(1..20), rng.gen_range(1..20));
    Pnm {
        width: w,
        height: h,
        channels,
        samples: (0..w * h * channels).map(|_| rng.gen()).collect(),
    }
}

/// `(bytes, offset)` pairs every decoder must reject at that offset.
pub fn malformed_headers() -> Vec<(&'static [u8], usize)> {
    vec![
        (b"" as &[u8], 0),
        (b"P3\n1 1\n255\n000", 1),
        (b"Q6\n1 1\n255\n\0\0\0", 0),
        (b"P6\nx 1\n255\n\0\0\0", 3),
        (b"P6\n1 1\n65535\n\0\0\0", 7),
        (b"P6\n1 1\n255\n\0\0", 13),
        (b"P6\n1 1\n255\n\0\0\0\0", 14),
        (b"P5\n0 1\n255\n", 3),
    ]
}

pub fn pnm_io() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for i in 0..200 {
        let img = random_pnm(&mut rng, if i % 2 == 0 { 1 } else { 3 });
        let bytes = core(encode_pnm(&img))?;
        let back = core(decode_pnm(&bytes, "mem"))?;
        ensure!(back == img, "decode(encode) changed image {i}");
        ensure!(
            core(encode_pnm(&back))? == bytes,
            "re-encoding changed bytes of image {i}"
        );
    }
    let commented = b"P5\n# made by hand\n2 1 # width height\n255\n\x01\xfe";
    let img = core(decode_pnm(commented, "mem"))?;
    ensure!(img.samples == [1, 254], "comment handling");
    for (bytes, want) in malformed_headers() {
        match decode_pnm(bytes, "bad.ppm") {
            Ok(_) => return Err(format!("accepted {:?}", String::from_utf8_lossy(bytes))),
            Err(kss_core::Error::Parse { offset, .. }) => ensure!(
                offset == want,
                "{:?} rejected at {offset}, want {want}",
                String::from_utf8_lossy(bytes)
            ),
            Err(e) => return Err(format!("wrong error kind: {e}")),
        }
    }
    Ok("200 P5/P6 round trips byte-identical; 8 malformed inputs rejected at their offsets".into())
}

// ---------------------------------------------------------------- gradients

pub fn gradient_suite() -> Check {
    let start = Instant::now();
    let outcomes = core(fd::run(fd::all_cases()))?;
    let bad: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.ok())
        .map(|o| format!("{} {:.2e} > {:.0e}", o.name, o.err, o.tol))
        .collect();
    let cast = core(fd::cast_f16_is_straight_through())?;
    let elapsed = start.elapsed();
    ensure!(bad.is_empty(), "{}", bad.join("; "));
    ensure!(cast == 0.0, "cast_f16 backward off by {cast:e}");
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    let worst = outcomes.iter().map(|o| o.err).fold(0.0, f64::max);
    Ok(format!(
        "{} checks, worst rel err {worst:.1e}, {:.1}s",
        outcomes.len() + 1,
        elapsed.as_secs_f64()
    ))
}
