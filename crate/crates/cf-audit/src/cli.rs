//! Command-line front end: train → explain → audit pipelines over a TOML
//! run configuration, emitting CSV/JSON reports and plot data.
//!
//! Exit codes: 0 success, 2 usage/config error, 3 data error, 4 audit
//! error. Output files embed the effective config, seed and library
//! version so equal configs produce bit-identical files; wall-clock
//! timings go to stderr only.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{
    accuracy, train_forest, train_knn, train_logreg, train_rbf_svm, train_tree, BlackBox,
    ForestParams, SvmParams, TrainedModel, TreeParams,
};
use crate::data::{self, Dataset, DatasetManifest, TargetRule};
use crate::error::{AuditError, Result};
use crate::generators::{generator_by_name, Generator};
use crate::geometry::Point;
use crate::lra::{self, LraParams};
use crate::ve::{self, VeParams};

pub const ENV_DATA_DIR: &str = "CF_AUDIT_DATA_DIR";

#[derive(Parser, Debug)]
#[command(name = "cf-audit", version, about = "Counterfactual justification auditor")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Run configuration file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the per-ball sample count.
    #[arg(long)]
    pub n: Option<usize>,
    /// Override the number of repeated runs per instance.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Override the risk-ratio filter threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Override the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model and report train/test accuracy.
    Train(CommonArgs),
    /// Local Risk Assessment over the test split.
    Lra(CommonArgs),
    /// Vulnerability Evaluation of the configured generators.
    Ve(CommonArgs),
    /// Decision grid of a 2-D model for external plotting.
    Grid(CommonArgs),
    /// Convenience chain: train, then LRA, then VE, one output directory.
    Audit(CommonArgs),
}

/// Everything a run needs; the effective (post-override) value is embedded
/// in every output file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub audit: AuditConfig,
    pub grid: GridConfig,
    pub seed: u64,
    pub train_frac: f64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetConfig::default(),
            model: ModelConfig::default(),
            audit: AuditConfig::default(),
            grid: GridConfig::default(),
            seed: 42,
            train_frac: 0.7,
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// "halfmoons", "iris2d", or a name resolved through the manifest.
    pub name: String,
    /// Half-moons size and noise.
    pub size: usize,
    pub noise_std: f64,
    /// Manifest file, resolved against the data directory.
    pub manifest: PathBuf,
    /// Iris one-vs-rest positive class and feature subset.
    pub iris_positive: String,
    pub iris_features: Vec<String>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            name: "halfmoons".into(),
            size: 400,
            noise_std: 0.2,
            manifest: PathBuf::from("datasets.toml"),
            iris_positive: "versicolor".into(),
            iris_features: vec!["petal_length".into(), "petal_width".into()],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// "tree", "forest", "knn", "logreg" or "svm".
    pub family: String,
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub k: usize,
    pub learning_rate: f64,
    pub iters: usize,
    pub c: f64,
    pub gamma: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            family: "forest".into(),
            n_trees: 200,
            max_depth: None,
            k: 1,
            learning_rate: 0.1,
            iters: 2000,
            c: 1.0,
            gamma: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    pub n: usize,
    pub runs: usize,
    pub threshold: f64,
    pub max_layers: usize,
    pub layer_cap_factor: f64,
    pub stall_window: f64,
    pub generators: Vec<String>,
    /// Cap on audited test instances (deterministic prefix of the split).
    pub max_instances: Option<usize>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            n: 2000,
            runs: 10,
            threshold: 0.25,
            max_layers: 50,
            layer_cap_factor: 10.0,
            stall_window: 1.0,
            generators: vec!["gs".into(), "hcls".into(), "lore".into()],
            max_instances: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// x min, x max, y min, y max.
    pub bounds: [f64; 4],
    pub resolution: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            bounds: [-2.5, 2.5, -2.5, 2.5],
            resolution: 100,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AuditError::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| AuditError::InvalidConfig(format!("bad config: {e}")))
    }

    pub fn apply_overrides(&mut self, args: &CommonArgs) {
        if let Some(seed) = args.seed {
            self.seed = seed;
        }
        if let Some(n) = args.n {
            self.audit.n = n;
        }
        if let Some(runs) = args.runs {
            self.audit.runs = runs;
        }
        if let Some(t) = args.threshold {
            self.audit.threshold = t;
        }
        if let Some(out) = &args.out {
            self.out = out.clone();
        }
    }

    fn lra_params(&self) -> LraParams {
        LraParams {
            n: self.audit.n,
            max_layers: self.audit.max_layers,
            layer_cap_factor: self.audit.layer_cap_factor,
            stall_window: self.audit.stall_window,
        }
    }

    fn ve_params(&self) -> VeParams {
        VeParams {
            n: self.audit.n,
            max_layers: self.audit.max_layers,
            layer_cap_factor: self.audit.layer_cap_factor,
            stall_window: self.audit.stall_window,
        }
    }
}

/// Map an error to the process exit code.
pub fn exit_code(err: &AuditError) -> i32 {
    match err {
        AuditError::InvalidConfig(_) => 2,
        AuditError::Data(_) | AuditError::Io(_) | AuditError::Csv(_) => 3,
        _ => 4,
    }
}

pub fn data_dir() -> PathBuf {
    std::env::var_os(ENV_DATA_DIR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

/// Standardized train/test split plus the trained-on data, shared by every
/// command.
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
}

pub fn prepare_dataset(config: &RunConfig) -> Result<Prepared> {
    let dir = data_dir();
    let raw = match config.dataset.name.as_str() {
        "halfmoons" => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            data::make_half_moons(config.dataset.size, config.dataset.noise_std, &mut rng)
        }
        "iris2d" => {
            let mut ds = data::load_csv(
                &dir.join("iris.csv"),
                "species",
                &TargetRule::OneVsRest(config.dataset.iris_positive.clone()),
            )?;
            ds = ds.select_features(&config.dataset.iris_features)?;
            ds.name = "iris2d".into();
            ds
        }
        name => {
            let manifest = DatasetManifest::load(&dir.join(&config.dataset.manifest))?;
            manifest.load_dataset(name, &dir)?
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let (train, test) = data::split(&raw, config.train_frac, &mut rng)?;
    let (train, test, _) = data::standardize(&train, &test);
    Ok(Prepared { train, test })
}

pub fn train_model(config: &RunConfig, train: &Dataset) -> Result<TrainedModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(2));
    let m = &config.model;
    let model = match m.family.as_str() {
        "tree" => TrainedModel::Tree(train_tree(
            &train.points,
            &train.labels,
            &TreeParams {
                max_depth: m.max_depth,
                ..TreeParams::default()
            },
            &mut rng,
        )?),
        "forest" => TrainedModel::Forest(train_forest(
            &train.points,
            &train.labels,
            &ForestParams {
                n_trees: m.n_trees,
                max_depth: m.max_depth,
                ..ForestParams::default()
            },
            &mut rng,
        )?),
        "knn" => TrainedModel::Knn(train_knn(&train.points, &train.labels, m.k)?),
        "logreg" => TrainedModel::LogReg(train_logreg(
            &train.points,
            &train.labels,
            m.learning_rate,
            m.iters,
        )?),
        "svm" => TrainedModel::RbfSvm(train_rbf_svm(
            &train.points,
            &train.labels,
            &SvmParams {
                c: m.c,
                gamma: m.gamma,
                ..SvmParams::default()
            },
            &mut rng,
        )?),
        other => {
            return Err(AuditError::InvalidConfig(format!(
                "unknown model family '{other}' (expected tree, forest, knn, logreg or svm)"
            )))
        }
    };
    Ok(model)
}

fn provenance_header(config: &RunConfig) -> String {
    let cfg = serde_json::to_string(config).expect("config serializes");
    format!("# version: {}\n# seed: {}\n# config: {}\n", crate::VERSION, config.seed, cfg)
}

fn write_output(path: &Path, body: &str, config: &RunConfig) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, format!("{}{}", provenance_header(config), body))?;
    Ok(())
}

fn test_instances(config: &RunConfig, test: &Dataset) -> Vec<Point> {
    let cap = config.audit.max_instances.unwrap_or(usize::MAX);
    test.points.iter().take(cap).cloned().collect()
}

#[derive(Serialize)]
struct TrainReport<'a> {
    version: &'a str,
    seed: u64,
    config: &'a RunConfig,
    dataset: &'a str,
    train_size: usize,
    test_size: usize,
    train_accuracy: f64,
    test_accuracy: f64,
}

pub fn cmd_train(config: &RunConfig) -> Result<()> {
    let started = Instant::now();
    let prepared = prepare_dataset(config)?;
    let model = train_model(config, &prepared.train)?;
    std::fs::create_dir_all(&config.out)?;
    model.save(&config.out.join("model.json"))?;
    let report = TrainReport {
        version: crate::VERSION,
        seed: config.seed,
        config,
        dataset: &prepared.train.name,
        train_size: prepared.train.len(),
        test_size: prepared.test.len(),
        train_accuracy: accuracy(&model, &prepared.train.points, &prepared.train.labels),
        test_accuracy: accuracy(&model, &prepared.test.points, &prepared.test.labels),
    };
    std::fs::write(
        config.out.join("train_report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    eprintln!(
        "trained {} on {}: train acc {:.4}, test acc {:.4} ({:.2?})",
        config.model.family,
        report.dataset,
        report.train_accuracy,
        report.test_accuracy,
        started.elapsed()
    );
    Ok(())
}

fn load_or_train(config: &RunConfig, train: &Dataset) -> Result<TrainedModel> {
    let path = config.out.join("model.json");
    if path.exists() {
        TrainedModel::load(&path)
    } else {
        train_model(config, train)
    }
}

pub fn cmd_lra(config: &RunConfig) -> Result<()> {
    let started = Instant::now();
    let prepared = prepare_dataset(config)?;
    let model = load_or_train(config, &prepared.train)?;
    let instances = test_instances(config, &prepared.test);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(3));
    let report = lra::aggregate(
        &instances,
        &model,
        &prepared.train.points,
        &prepared.train.labels,
        &config.lra_params(),
        config.audit.runs,
        &mut rng,
    )?;

    let mut body = String::from("instance,mean_s,mean_r,mean_epsilon,mean_layers,empty_ball_runs\n");
    for row in &report.rows {
        writeln!(
            body,
            "{},{},{},{},{},{}",
            row.instance, row.mean_s, row.mean_r, row.mean_epsilon, row.mean_layers, row.empty_ball_runs
        )
        .unwrap();
    }
    write_output(&config.out.join("lra.csv"), &body, config)?;

    let agg = format!(
        "dataset,instances,runs,s_bar,r_bar,r_std\n{},{},{},{},{},{}\n",
        prepared.train.name,
        report.rows.len(),
        report.runs,
        report.s_bar,
        report.r_bar,
        report.r_std
    );
    write_output(&config.out.join("lra_aggregate.csv"), &agg, config)?;
    eprintln!(
        "lra over {} instances x {} runs: S_bar {:.4}, R_bar {:.4} +/- {:.4} ({:.2?})",
        report.rows.len(),
        report.runs,
        report.s_bar,
        report.r_bar,
        report.r_std,
        started.elapsed()
    );
    Ok(())
}

pub fn cmd_ve(config: &RunConfig) -> Result<()> {
    let started = Instant::now();
    let prepared = prepare_dataset(config)?;
    let model = load_or_train(config, &prepared.train)?;
    let instances = test_instances(config, &prepared.test);
    let generators: Vec<Box<dyn Generator>> = config
        .audit
        .generators
        .iter()
        .map(|name| generator_by_name(name))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(4));
    let bench = ve::ve_benchmark(
        &instances,
        &model,
        &prepared.train.points,
        &prepared.train.labels,
        &generators,
        &config.lra_params(),
        &config.ve_params(),
        config.audit.threshold,
        config.audit.runs,
        &mut rng,
    )?;

    let mut body = String::from("dataset,generator,instances_kept,j_bar,failure_rate,mean_queries\n");
    if bench.n_kept == 0 {
        // explicit marker: the risk filter kept nothing
        writeln!(body, "{},none_above_threshold,0,,,", prepared.train.name).unwrap();
    } else {
        for s in &bench.summaries {
            writeln!(
                body,
                "{},{},{},{},{},{}",
                prepared.train.name,
                s.generator,
                s.n_instances,
                s.j_bar.map_or(String::new(), |v| v.to_string()),
                s.failure_rate,
                s.mean_queries.map_or(String::new(), |v| v.to_string()),
            )
            .unwrap();
        }
    }
    write_output(&config.out.join("ve.csv"), &body, config)?;
    eprintln!(
        "ve kept {}/{} instances above R_x > {} ({:.2?})",
        bench.n_kept,
        bench.n_candidates,
        bench.threshold,
        started.elapsed()
    );
    Ok(())
}

pub fn cmd_grid(config: &RunConfig) -> Result<()> {
    let prepared = prepare_dataset(config)?;
    if prepared.train.dim() != 2 {
        return Err(AuditError::InvalidConfig(format!(
            "decision grid needs a 2-D dataset, got {} features",
            prepared.train.dim()
        )));
    }
    let model = load_or_train(config, &prepared.train)?;
    let [x0, x1, y0, y1] = config.grid.bounds;
    let res = config.grid.resolution;
    if res < 2 || x1 <= x0 || y1 <= y0 {
        return Err(AuditError::InvalidConfig("bad grid bounds/resolution".into()));
    }
    let mut body = String::from("x,y,label\n");
    for i in 0..res {
        let x = x0 + (x1 - x0) * i as f64 / (res - 1) as f64;
        for j in 0..res {
            let y = y0 + (y1 - y0) * j as f64 / (res - 1) as f64;
            let label = model.predict(&Point(vec![x, y]));
            writeln!(body, "{x},{y},{label}").unwrap();
        }
    }
    write_output(&config.out.join("grid.csv"), &body, config)?;
    eprintln!("grid {}x{} written", res, res);
    Ok(())
}

pub fn cmd_audit(config: &RunConfig) -> Result<()> {
    cmd_train(config)?;
    cmd_lra(config)?;
    cmd_ve(config)
}

/// Entry point shared by the binary and the CLI tests.
pub fn run(cli: Cli) -> Result<()> {
    let args = match &cli.command {
        Command::Train(a) | Command::Lra(a) | Command::Ve(a) | Command::Grid(a) | Command::Audit(a) => {
            a.clone()
        }
    };
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.apply_overrides(&args);
    match cli.command {
        Command::Train(_) => cmd_train(&config),
        Command::Lra(_) => cmd_lra(&config),
        Command::Ve(_) => cmd_ve(&config),
        Command::Grid(_) => cmd_grid(&config),
        Command::Audit(_) => cmd_audit(&config),
    }
}
