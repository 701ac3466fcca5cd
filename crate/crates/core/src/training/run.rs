use std::fmt::Write as _;
use std::path::Path;

use super::{
    critic_objective, generator_objective, GeneratorVars, HyperParams, IterationReport, Trainer,
};
use crate::data::ImageSet;
use crate::error::{Error, Result};
use crate::ksame::{
    auto_label, compute_pairwise_distances, partition_identities, ClusterTable, DistanceMode,
    LabelScheme,
};
use crate::models::{save_checkpoint, ModelParams};
use crate::nn::{Tape, Tensor};
use crate::precision::{BufferCategory, MemoryLedger};

pub const LOG_FILE: &str = "loss_log.csv";
pub const LOG_HEADER: &str = "iter,d_adv,d_gp,d_cls,g_adv,g_cls,g_rec,scale,skipped";

/// Training labels before any encoder exists: pixel-distance `k`-grouping, with one group
/// slot per identity so the trained generator accepts any later grouping.
pub fn bootstrap_labels(
    set: &ImageSet,
    k: usize,
    seed: u64,
) -> Result<(ClusterTable, LabelScheme)> {
    let d = compute_pairwise_distances(set, DistanceMode::Pixel, None)?;
    let table = partition_identities(&d, k.min(set.identities()), seed)?;
    let scheme = auto_label(set, &table, Some(set.identities()))?;
    Ok((table, scheme))
}

fn one_hot_rows(n: usize, blocks: &[usize]) -> Tensor {
    let l: usize = blocks.iter().sum();
    let mut t = Tensor::zeros(&[n, l]);
    for r in 0..n {
        let mut off = 0;
        for &b in blocks {
            t.data_mut()[r * l + off + r % b] = 1.0;
            off += b;
        }
    }
    t
}

/// Logical training-state buffers at batch size `batch`: the weights of all three networks,
/// Adam's two moments per weight, and the larger of the critic-step and generator-step
/// graphs (every non-leaf value recorded during forward and backward).
pub fn memory_ledger(params: &ModelParams, batch: usize) -> Result<MemoryLedger> {
    let cfg = &params.config;
    let layout = cfg.labels;
    let s = cfg.image_size;
    let img = Tensor::zeros(&[batch, cfg.image_channels, s, s]);
    let labels = one_hot_rows(
        batch,
        &layout.blocks().iter().map(|b| b.1).collect::<Vec<_>>(),
    );
    let cls_target = one_hot_rows(batch, &layout.cls_blocks());
    let hp = HyperParams::default();
    let w = hp.weights();

    let mut tape = Tape::<f32>::new();
    let d = params.critic.bind(&mut tape, true);
    let x = tape.constant(img.clone());
    let xf = tape.constant(img.clone());
    let eps = vec![0.5; batch];
    let obj = critic_objective(
        &mut tape,
        &params.critic_net(),
        &d,
        (x, xf),
        &cls_target,
        &layout,
        &eps,
        hp.adv,
        &w,
        false,
    )?;
    tape.grad(obj.total, &d)?;
    let critic_graph = tape.intermediate_elements();

    let mut tape = Tape::<f32>::new();
    let g = params.generator.bind(&mut tape, true);
    let d = params.critic.bind(&mut tape, false);
    let sv = params.siamese.bind(&mut tape, false);
    let vars = GeneratorVars {
        x: tape.constant(img),
        target: tape.constant(labels.clone()),
        original: tape.constant(labels),
        noise: tape.constant(Tensor::full(&[batch, cfg.noise_channels], 0.5)),
    };
    let obj = generator_objective(
        &mut tape,
        params,
        [&g, &d, &sv],
        vars,
        &cls_target,
        hp.adv,
        &w,
        false,
    )?;
    tape.grad(obj.total, &g)?;
    let generator_graph = tape.intermediate_elements();

    let mut ledger = MemoryLedger::new();
    for (name, store) in [
        ("generator", &params.generator),
        ("critic", &params.critic),
        ("siamese", &params.siamese),
    ] {
        ledger.register(
            format!("{name}.weights"),
            BufferCategory::Weights,
            store.elements(),
        );
        ledger.register(
            format!("{name}.adam"),
            BufferCategory::Moments,
            2 * store.elements(),
        );
    }
    ledger.register(
        "activations",
        BufferCategory::Activations,
        critic_graph.max(generator_graph),
    );
    Ok(ledger)
}

pub fn csv_row(r: &IterationReport) -> String {
    let c = &r.critic.terms;
    let g = &r.generator.terms;
    format!(
        "{},{},{},{},{},{},{},{},{}",
        r.iteration, c.adv, c.gp, c.cls, g.adv, g.cls, g.rec, r.scale, r.skipped
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSummary {
    pub iterations: u64,
    pub critic_applied: u64,
    pub critic_skipped: u64,
    pub checkpoint_id: String,
    pub final_scale: f32,
    pub logged: Vec<IterationReport>,
}

fn write_log(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs `hp.iterations` generator iterations, logging every `hp.log_every` iterations to
/// `loss_log.csv` and checkpointing into `out` every `hp.checkpoint_every` iterations and
/// at the end.
pub fn train(trainer: &mut Trainer, out: &Path) -> Result<TrainSummary> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let log_path = out.join(LOG_FILE);
    let mut log = format!("{LOG_HEADER}\n");
    write_log(&log_path, &log)?;
    let hp = trainer.hyper_params().clone();
    let mut logged = Vec::new();
    let mut id = None;
    for _ in 0..hp.iterations {
        let r = trainer.step()?;
        if r.iteration % hp.log_every == 0 {
            writeln!(log, "{}", csv_row(&r)).expect("string write");
            write_log(&log_path, &log)?;
            logged.push(r);
        }
        if r.iteration % hp.checkpoint_every == 0 {
            id = Some(save_checkpoint(out, trainer.params(), r.iteration)?);
        }
    }
    let iterations = trainer.generator_iterations();
    if hp.iterations == 0 || !iterations.is_multiple_of(hp.checkpoint_every) {
        id = Some(save_checkpoint(out, trainer.params(), iterations)?);
    }
    let (critic_applied, critic_skipped) = trainer.critic_steps();
    Ok(TrainSummary {
        iterations,
        critic_applied,
        critic_skipped,
        checkpoint_id: id.expect("checkpoint written"),
        final_scale: trainer.scaler().scale(),
        logged,
    })
}
