//! `mograsp` command-line tool: scene generation, data collection, training,
//! grasp checks and decluttering benchmarks.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mograsp::bench::{compute_metrics, logs_to_jsonl, rows_to_csv, run_bench, run_declutter, BenchModels, Method};
use mograsp::config::Config;
use mograsp::geometry::ConvexPolygon;
use mograsp::mognet::{
    collect_dataset, histogram_entropy, label_histogram, samples_from_jsonl, samples_to_jsonl, split_holdout,
    train_ensemble, CollectMode, MogNet,
};
use mograsp::planning::{condition_report, necessary_conds_proba, GraspAction, ObjectGroup};
use mograsp::rng::derive_seed;
use mograsp::scene::{generate_scene, Scene, SceneSpec};
use mograsp::GraspError;

#[derive(Parser, Debug)]
#[command(name = "mograsp", version, about = "Multi-object grasp planning and decluttering simulator")]
struct Cli {
    /// TOML configuration file; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed, overriding the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate random scenes as JSON files.
    GenScenes(GenScenesArgs),
    /// Collect a self-labelled grasp dataset as JSONL.
    CollectData(CollectArgs),
    /// Train a grasp-count model and report held-out accuracy.
    Train(TrainArgs),
    /// Report the necessary conditions and robustness of one grasp.
    CheckGrasp(CheckArgs),
    /// Declutter one scene with one method.
    Declutter(DeclutterArgs),
    /// Run methods over a range of scene seeds and write a metrics CSV.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct GenScenesArgs {
    /// Number of scenes; seeds run from --seed upward.
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CollectArgs {
    #[arg(long, default_value = "necessary_conditions")]
    mode: CollectMode,
    /// Number of samples, overriding the config file.
    #[arg(long)]
    samples: Option<usize>,
    /// Friction coefficient used for planning and physics.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// JSONL dataset.
    #[arg(long)]
    data: PathBuf,
    /// Extra JSONL dataset whose held-out part joins the evaluation set.
    #[arg(long)]
    eval_with: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Scene JSON file.
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    #[arg(long, allow_hyphen_values = true)]
    y: f64,
    /// Grasp angle in radians.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    theta: f64,
    /// Comma-separated object indices; defaults to every object.
    #[arg(long, value_delimiter = ',')]
    group: Vec<usize>,
    #[arg(long)]
    mu: Option<f64>,
}

#[derive(Args, Debug)]
struct DeclutterArgs {
    /// Scene JSON file; a scene is generated from the seed when omitted.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Model JSON file for learned methods.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value = "mognet")]
    method: Method,
    #[arg(long)]
    mu: Option<f64>,
    /// Episode log JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Number of scenes; seeds run from --seed upward.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    /// Comma-separated methods; defaults to all.
    #[arg(long = "method", value_delimiter = ',')]
    methods: Vec<Method>,
    /// Model trained on filtered data.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Model trained on random-mode data.
    #[arg(long)]
    rand_model: Option<PathBuf>,
    #[arg(long)]
    mu: Option<f64>,
    /// Metrics CSV.
    #[arg(long)]
    out: PathBuf,
    /// Optional JSONL file of full episode logs.
    #[arg(long)]
    logs: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            eprint!("{e}");
            report_error("usage", &e.kind().to_string());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e
                .chain()
                .find_map(|c| c.downcast_ref::<GraspError>())
                .map_or("other", GraspError::kind);
            report_error(kind, &format!("{e:#}"));
            ExitCode::FAILURE
        }
    }
}

/// One machine-parsable line on stderr.
fn report_error(kind: &str, message: &str) {
    let quoted = serde_json::to_string(message).expect("string serializes");
    eprintln!("error kind={kind} message={quoted}");
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .context("building thread pool")?;
    pool.install(|| match cli.command {
        Command::GenScenes(a) => gen_scenes(cfg, a),
        Command::CollectData(a) => collect(cfg, a),
        Command::Train(a) => train(cfg, a),
        Command::CheckGrasp(a) => check_grasp(cfg, a),
        Command::Declutter(a) => declutter(cfg, a),
        Command::Bench(a) => bench(cfg, a),
    })
}

fn apply_mu(cfg: Config, mu: Option<f64>) -> anyhow::Result<Config> {
    Ok(match mu {
        Some(mu) => cfg.with_mu(mu)?,
        None => cfg,
    })
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path)
        .map_err(GraspError::from)
        .with_context(|| format!("reading {}", path.display()))
}

/// Write `contents` to `path` through a temporary file in the same directory.
fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)
        .map_err(GraspError::from)
        .with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(GraspError::from)?;
    tmp.write_all(contents.as_bytes()).map_err(GraspError::from)?;
    tmp.persist(path)
        .map_err(|e| GraspError::from(e.error))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Record the effective configuration next to an output artifact.
fn write_config_sidecar(artifact: &Path, cfg: &Config) -> anyhow::Result<()> {
    let mut name = artifact.as_os_str().to_owned();
    name.push(".config.toml");
    write_atomic(Path::new(&name), &cfg.to_toml())
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn gen_scenes(cfg: Config, a: GenScenesArgs) -> anyhow::Result<()> {
    for seed in cfg.seed..cfg.seed + a.count {
        let objects = generate_scene(&SceneSpec { seed, ..cfg.scene })?;
        let path = a.out.join(format!("scene-{seed}.json"));
        write_atomic(&path, &Scene { seed, objects }.to_json())?;
        println!("{}", path.display());
    }
    write_atomic(&a.out.join("config.toml"), &cfg.to_toml())
}

fn collect(cfg: Config, a: CollectArgs) -> anyhow::Result<()> {
    let mut cfg = apply_mu(cfg, a.mu)?;
    if let Some(n) = a.samples {
        cfg.collect.samples = n;
        cfg.validate()?;
    }
    let samples = collect_dataset(&cfg.collect_config(), a.mode, cfg.seed)?;
    write_atomic(&a.out, &samples_to_jsonl(&samples))?;
    write_config_sidecar(&a.out, &cfg)?;
    let hist = label_histogram(&samples);
    println!("samples {}", samples.len());
    println!("histogram {hist:?}");
    println!("entropy {:.4}", histogram_entropy(&hist));
    Ok(())
}

fn train(cfg: Config, a: TrainArgs) -> anyhow::Result<()> {
    let data = samples_from_jsonl(&read_text(&a.data)?).with_context(|| format!("parsing {}", a.data.display()))?;
    let split_seed = derive_seed(cfg.seed, &[0]);
    let (train_set, mut held_out) = split_holdout(&data, cfg.model.holdout_fraction, split_seed)?;
    if let Some(p) = &a.eval_with {
        let extra = samples_from_jsonl(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))?;
        held_out.extend(split_holdout(&extra, cfg.model.holdout_fraction, split_seed)?.1);
    }
    let (model, summaries) = train_ensemble(&train_set, &cfg.train_params(cfg.seed), cfg.model.input_scale)?;
    write_atomic(&a.out, &model.to_json())?;
    write_config_sidecar(&a.out, &cfg)?;
    println!("train {} held_out {}", train_set.len(), held_out.len());
    for (s, acc) in summaries.iter().zip(model.class_accuracies(&held_out)) {
        let acc = acc.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        let status = if s.trained { "trained" } else { "prior" };
        println!("class {} {status} positives {} binary_accuracy {acc}", s.class_id, s.positives);
    }
    println!("accuracy {:.4}", model.accuracy(&held_out));
    Ok(())
}

#[derive(Serialize)]
struct CheckOutput {
    group: Vec<usize>,
    mu: f64,
    areas: Vec<f64>,
    d_star: Vec<f64>,
    h_star: f64,
    h0: Option<f64>,
    area_ok: bool,
    width_ok: bool,
    admissible: bool,
    gamma: f64,
}

fn check_grasp(cfg: Config, a: CheckArgs) -> anyhow::Result<()> {
    let cfg = apply_mu(cfg, a.mu)?;
    let scene = Scene::from_json(&read_text(&a.scene)?).with_context(|| format!("parsing {}", a.scene.display()))?;
    let members = if a.group.is_empty() {
        (0..scene.objects.len()).collect()
    } else {
        a.group
    };
    let group = ObjectGroup::new(members)?;
    let action = GraspAction::new(a.x, a.y, a.theta);
    let p = &cfg.planner;
    let r = condition_report(&scene.objects, &group, &action, &p.spec, p.friction, p.n_s)?;
    let noise = mograsp::planning::NoiseModel {
        seed: cfg.seed,
        ..p.noise
    };
    let gamma = necessary_conds_proba(&scene.objects, &group, &action, &p.spec, p.friction, p.n_s, &noise)?;
    print_json(&CheckOutput {
        group: group.members().to_vec(),
        mu: p.friction.mu(),
        admissible: r.admissible(),
        areas: r.areas,
        d_star: r.d_star,
        h_star: r.h_star,
        h0: r.h0,
        area_ok: r.area_ok,
        width_ok: r.width_ok,
        gamma,
    })
}

fn load_model(path: &Path) -> anyhow::Result<MogNet> {
    MogNet::from_json(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn declutter(cfg: Config, a: DeclutterArgs) -> anyhow::Result<()> {
    let cfg = apply_mu(cfg, a.mu)?;
    let (seed, objects): (u64, Vec<ConvexPolygon>) = match &a.scene {
        Some(p) => {
            let s = Scene::from_json(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))?;
            (s.seed, s.objects)
        }
        None => (cfg.seed, generate_scene(&SceneSpec { seed: cfg.seed, ..cfg.scene })?),
    };
    if a.method == Method::RandNet && a.model.is_none() {
        bail!(GraspError::Config("rand_net needs --model".into()));
    }
    let model = a.model.as_deref().map(load_model).transpose()?;
    let models = match a.method {
        Method::RandNet => BenchModels {
            mognet: None,
            rand_net: model,
        },
        _ => BenchModels {
            mognet: model,
            rand_net: None,
        },
    };
    let bc = cfg.bench_config();
    let log = run_declutter(&objects, seed, a.method, &bc, &models)?;
    write_atomic(&a.out, &(serde_json::to_string_pretty(&log)? + "\n"))?;
    write_config_sidecar(&a.out, &cfg)?;
    print_json(&compute_metrics(&log, bc.motion_time))
}

fn bench(cfg: Config, a: BenchArgs) -> anyhow::Result<()> {
    let cfg = apply_mu(cfg, a.mu)?;
    let methods = if a.methods.is_empty() {
        Method::ALL.to_vec()
    } else {
        a.methods
    };
    let models = BenchModels {
        mognet: a.model.as_deref().map(load_model).transpose()?,
        rand_net: a.rand_model.as_deref().map(load_model).transpose()?,
    };
    let seeds: Vec<u64> = (cfg.seed..cfg.seed + a.seeds).collect();
    let results = run_bench(&seeds, &methods, &cfg.bench_config(), &models)?;
    let (rows, logs): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    write_atomic(&a.out, &rows_to_csv(&rows)?)?;
    write_config_sidecar(&a.out, &cfg)?;
    if let Some(p) = &a.logs {
        write_atomic(p, &logs_to_jsonl(&logs))?;
    }
    for m in &methods {
        let mean = |f: fn(&mograsp::bench::BenchRow) -> f64| mograsp::bench::method_mean(&rows, *m, f);
        println!(
            "{m} grasped_objs {:.3} pick_attempts {:.1} cleared {:.1} pph {:.1}",
            mean(|r| r.grasped_objs),
            mean(|r| r.pick_attempts as f64),
            mean(|r| r.cleared),
            mean(|r| r.pph),
        );
    }
    Ok(())
}
