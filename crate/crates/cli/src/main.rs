use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kss_core::data::{toygen, ImageSet, ToyFaceSpec};
use kss_core::evaluation::{reid_rate, sharpness_compare};
use kss_core::hypertune::{
    apply_point, quadratic_objective, training_objective, tune_loop, SearchSpace, Strategy,
};
use kss_core::ksame::{
    compute_pairwise_distances, deidentify_average, deidentify_set, linkage_probabilities,
    partition_identities, DeidentifiedSet, DistanceMode,
};
use kss_core::losses::AdvMode;
use kss_core::models::{load_checkpoint, LabelLayout, ModelConfig, ModelParams};
use kss_core::precision::PrecisionMode;
use kss_core::training::{bootstrap_labels, memory_ledger, train, HyperParams, Trainer};
use kss_core::{Error, Result};

/// k-Same face de-identification with a Siamese-guided conditional GAN.
#[derive(Parser)]
#[command(name = "kss", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the procedural toy-face dataset.
    Toygen(ToygenArgs),
    /// Train the generator, critic and Siamese encoder.
    Train(TrainArgs),
    /// Build a k-anonymous surrogate set.
    Deid(DeidArgs),
    /// Hyperparameter search.
    Tune(TuneArgs),
    /// Memory, sharpness and re-identification reports.
    #[command(subcommand)]
    Metrics(Metrics),
}

#[derive(Args)]
struct ToygenArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 12)]
    identities: usize,
    /// Images per identity.
    #[arg(long, default_value_t = 8)]
    per_id: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Image side length in pixels.
    #[arg(long, default_value_t = 32)]
    size: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum AdvArg {
    Wgan,
    #[value(name = "eq4")]
    Saturating,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory with labels.json.
    #[arg(long)]
    data: PathBuf,
    /// JSON file of hyperparameters; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Generator iterations (overrides the config).
    #[arg(long)]
    iters: Option<u64>,
    /// Emulated mixed-precision training.
    #[arg(long, value_enum)]
    mpt: Option<OnOff>,
    /// Adversarial objective.
    #[arg(long, value_enum)]
    adv: Option<AdvArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Checkpoint directory; also receives loss_log.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    Average,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistanceArg {
    Siamese,
    Pixel,
}

#[derive(Args)]
struct DeidArgs {
    #[arg(long)]
    data: PathBuf,
    /// Trained checkpoint directory. Optional only for `--baseline average --distance pixel`.
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Minimum number of identities per group.
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Produce pixel-averaging surrogates instead of generator output.
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
    /// Identity distance used for grouping.
    #[arg(long, value_enum, default_value = "siamese")]
    distance: DistanceArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Random,
    Pso,
    Tpe,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    /// Mean generator loss over the tail of a short training run.
    Training,
    /// Closed-form (x − 0.3)² + (y − 0.7)² on the first two dimensions.
    Quadratic,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 30)]
    trials: usize,
    /// Generator iterations per trial.
    #[arg(long, default_value_t = 200)]
    budget_iters: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Search space JSON (`{"dimensions":[{"name","lo","hi","scale"}]}`); default space if omitted.
    #[arg(long)]
    space: Option<PathBuf>,
    /// Trial history output.
    #[arg(long)]
    out: PathBuf,
    /// Dataset for training trials; a default toy set is generated if omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "training")]
    objective: ObjectiveArg,
    /// Training hyperparameters the search starts from.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Mpt,
    Fp32,
    Both,
}

#[derive(Subcommand)]
enum Metrics {
    /// Logical training-memory ledger of the default architecture.
    MptReport {
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
        #[arg(long, default_value_t = 16)]
        batch: usize,
        /// Group slots of the label (one per training identity).
        #[arg(long, default_value_t = 12)]
        identities: usize,
        /// Take the architecture from a checkpoint instead.
        #[arg(long)]
        ckpt: Option<PathBuf>,
    },
    /// Variance-of-Laplacian sharpness of `<method>-k<k>` subdirectories.
    Blur {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-identification rate of a surrogate set.
    Reid {
        #[arg(long)]
        orig: PathBuf,
        #[arg(long)]
        deid: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_hp(config: Option<&Path>) -> Result<HyperParams> {
    match config {
        Some(p) => read_json(p),
        None => Ok(HyperParams::default()),
    }
}

fn run_toygen(a: ToygenArgs) -> Result<()> {
    let spec = ToyFaceSpec {
        identities: a.identities,
        per_identity: a.per_id,
        size: a.size,
        seed: a.seed,
    };
    let records = toygen(&spec, &a.out)?;
    println!("wrote {} images to {}", records.len(), a.out.display());
    Ok(())
}

fn run_train(a: TrainArgs) -> Result<()> {
    let mut hp = load_hp(a.config.as_deref())?;
    if let Some(n) = a.iters {
        hp.iterations = n;
    }
    if let Some(m) = a.mpt {
        hp.mpt = matches!(m, OnOff::On);
    }
    if let Some(adv) = a.adv {
        hp.adv = match adv {
            AdvArg::Wgan => AdvMode::Wgan,
            AdvArg::Saturating => AdvMode::Saturating,
        };
    }
    if let Some(s) = a.seed {
        hp.seed = s;
    }
    hp.validate()?;
    let set = ImageSet::load(&a.data)?;
    let (_, scheme) = bootstrap_labels(&set, hp.k, hp.seed)?;
    let mut trainer = Trainer::new(set, scheme, hp)?;
    let summary = train(&mut trainer, &a.out)?;
    println!(
        "trained {} iterations ({} critic steps applied, {} skipped); checkpoint {} in {}",
        summary.iterations,
        summary.critic_applied,
        summary.critic_skipped,
        summary.checkpoint_id,
        a.out.display()
    );
    Ok(())
}

fn run_deid(a: DeidArgs) -> Result<()> {
    let set = ImageSet::load(&a.data)?;
    if a.k == 0 || a.k > set.identities() {
        return Err(Error::Contract(format!(
            "k must lie in 1..={} for this dataset, got {}",
            set.identities(),
            a.k
        )));
    }
    let mode = match a.distance {
        DistanceArg::Siamese => DistanceMode::Siamese,
        DistanceArg::Pixel => DistanceMode::Pixel,
    };
    let ckpt = match (&a.ckpt, a.baseline, mode) {
        (Some(p), _, _) => Some(load_checkpoint(p)?),
        (None, Some(Baseline::Average), DistanceMode::Pixel) => None,
        (None, _, _) => {
            return Err(Error::Contract(
                "--ckpt is required unless --baseline average --distance pixel".into(),
            ))
        }
    };
    let deid: DeidentifiedSet = match a.baseline {
        None => deidentify_set(&set, ckpt.as_ref().expect("checked"), a.k, a.seed, mode)?,
        Some(Baseline::Average) => {
            let d = match &ckpt {
                Some(c) => {
                    let net = c.params.siamese_net();
                    compute_pairwise_distances(&set, mode, Some((&net, &c.params.siamese)))?
                }
                None => compute_pairwise_distances(&set, mode, None)?,
            };
            let table = partition_identities(&d, a.k, a.seed)?;
            let mut out = deidentify_average(&set, &table)?;
            out.seed = a.seed;
            out
        }
    };
    deid.save(&a.out, &set)?;
    let worst = linkage_probabilities(&deid)?
        .into_iter()
        .fold(0.0, f64::max);
    println!(
        "wrote {} {} surrogates in {} groups to {} (max linkage probability {worst:.4})",
        deid.len(),
        deid.method,
        deid.table.groups().len(),
        a.out.display()
    );
    Ok(())
}

fn run_tune(a: TuneArgs) -> Result<()> {
    let strategy = match a.strategy {
        StrategyArg::Random => Strategy::Random,
        StrategyArg::Pso => Strategy::Pso,
        StrategyArg::Tpe => Strategy::Tpe,
    };
    let space: SearchSpace = match &a.space {
        Some(p) => read_json(p)?,
        None => match a.objective {
            ObjectiveArg::Training => SearchSpace::default_training(),
            ObjectiveArg::Quadratic => kss_core::hypertune::quadratic_space(),
        },
    };
    space.validate()?;
    let result = match a.objective {
        ObjectiveArg::Quadratic => {
            if space.len() < 2 {
                return Err(Error::Contract(
                    "the quadratic objective needs at least two dimensions".into(),
                ));
            }
            tune_loop(
                strategy,
                &space,
                |p, _| Ok(quadratic_objective(p)),
                a.trials,
                a.seed,
            )?
        }
        ObjectiveArg::Training => {
            let base = load_hp(a.config.as_deref())?;
            apply_point(&base, &space, &space.from_unit(&vec![0.5; space.len()]))?;
            let set = match &a.data {
                Some(d) => ImageSet::load(d)?,
                None => ImageSet::from_records(kss_core::data::toy_faces(&ToyFaceSpec::new(
                    12, 8, a.seed,
                ))?)?,
            };
            let (_, scheme) = bootstrap_labels(&set, base.k, base.seed)?;
            tune_loop(
                strategy,
                &space,
                |p, seed| {
                    let mut hp = apply_point(&base, &space, p)?;
                    hp.seed = seed;
                    training_objective(&set, &scheme, &hp, a.budget_iters, 10)
                },
                a.trials,
                a.seed,
            )?
        }
    };
    let json = serde_json::to_string_pretty(&result).expect("result serializes");
    write_text(&a.out, &json)?;
    println!(
        "best objective {:.6} at trial {} ({:?})",
        result.best.objective.unwrap_or(f64::NAN),
        result.best.id,
        result.best.point
    );
    Ok(())
}

/// Parses `<method>-k<k>`.
fn parse_set_dir(name: &str) -> Option<(String, usize)> {
    let (method, k) = name.rsplit_once("-k")?;
    Some((method.to_string(), k.parse().ok()?))
}

fn run_metrics(m: Metrics) -> Result<()> {
    match m {
        Metrics::MptReport {
            mode,
            batch,
            identities,
            ckpt,
        } => {
            let params = match ckpt {
                Some(p) => load_checkpoint(&p)?.params,
                None => ModelParams::init(ModelConfig::toy(LabelLayout::new(identities, 8, 3)), 0)?,
            };
            if batch == 0 {
                return Err(Error::Contract("batch must be at least 1".into()));
            }
            let ledger = memory_ledger(&params, batch)?;
            let modes: Vec<PrecisionMode> = match mode {
                ModeArg::Mpt => vec![PrecisionMode::Mpt],
                ModeArg::Fp32 => vec![PrecisionMode::Fp32],
                ModeArg::Both => vec![PrecisionMode::Mpt, PrecisionMode::Fp32],
            };
            let reports: Vec<_> = modes.into_iter().map(|m| ledger.report(m)).collect();
            let value = if reports.len() == 1 {
                serde_json::to_value(&reports[0])
            } else {
                serde_json::to_value(&reports)
            }
            .expect("report serializes");
            println!("{}", serde_json::to_string_pretty(&value).expect("json"));
            Ok(())
        }
        Metrics::Blur { input, out } => {
            let mut sets = Vec::new();
            let entries = std::fs::read_dir(&input).map_err(|e| Error::io(&input, e))?;
            let mut dirs: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_dir())
                .collect();
            dirs.sort();
            for dir in dirs {
                let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default();
                let Some((method, k)) = parse_set_dir(name) else {
                    continue;
                };
                let deid = DeidentifiedSet::load(&dir)?;
                let images = deid.surrogates.into_iter().map(|s| s.pixels).collect();
                sets.push((method, k, images));
            }
            if sets.is_empty() {
                return Err(Error::Contract(format!(
                    "no <method>-k<k> directories under {}",
                    input.display()
                )));
            }
            let report = sharpness_compare(&sets, "average")?;
            let csv = report.to_csv();
            write_text(&out, &csv)?;
            print!("{csv}");
            Ok(())
        }
        Metrics::Reid { orig, deid, ckpt } => {
            let set = ImageSet::load(&orig)?;
            let d = DeidentifiedSet::load(&deid)?;
            let c = load_checkpoint(&ckpt)?;
            let rate = reid_rate(&set, &d, &c.params)?;
            let out = serde_json::json!({
                "reid_rate": rate,
                "k": d.k,
                "linkage_bound": 1.0 / d.k as f64,
            });
            println!("{out}");
            Ok(())
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("KSS_THREADS") else {
        return Ok(());
    };
    let n: usize = v.parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
        Error::Contract(format!("KSS_THREADS must be a positive integer, got '{v}'"))
    })?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Contract(format!("cannot size the thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Toygen(a) => run_toygen(a),
        Command::Train(a) => run_train(a),
        Command::Deid(a) => run_deid(a),
        Command::Tune(a) => run_tune(a),
        Command::Metrics(m) => run_metrics(m),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_contract() { 1 } else { 2 })
        }
    }
}
