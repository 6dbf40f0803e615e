//! Experiment runner behind the `softdice` binary.
//!
//! Every subcommand is also callable as a function so tests and the
//! acceptance harness can drive runs without spawning processes.

pub mod config;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use softdice::analysis::{run_suite, SuiteOptions, SuiteReport};
use softdice::baselines::{bc_train, valuedice_train};
use softdice::diffcore::Tensor;
use softdice::envs::{
    evaluate_policy, generate_demos, point_mass_normalized_score, read_demos, write_demos, ActionPolicy,
    ContinuousEnv, Controller, ControllerPolicy, EvalStats, Pendulum1D, PendulumExpert, PointMass2D,
    PointMassExpert, RewardEnv, Trajectory, UniformRandomPolicy,
};
use softdice::nets::{Checkpoint, TanhGaussianPolicy};
use softdice::replay::DemoBuffer;
use softdice::softdice::{eval_seed, train, CsvMetrics, TrainEnvs};

pub use config::{parse_sweep, AlgoParams, Algorithm, EnvName, ExperimentConfig, ResolvedConfig};

/// Exit status for usage errors (bad flags, bad config, missing files).
pub const EXIT_USAGE: i32 = 2;
/// Exit status for failed verification or training.
pub const EXIT_FAILURE: i32 = 1;

/// Monte Carlo samples per state for the summary's entropy estimate.
const ENTROPY_SAMPLES: usize = 64;
/// Stream of the per-seed generator used to subsample demonstrations.
const SUBSAMPLE_STREAM: u64 = 7;
const ENTROPY_STREAM: u64 = 8;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => m,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Failure(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<softdice::Error> for CliError {
    fn from(e: softdice::Error) -> Self {
        match e {
            softdice::Error::InvalidConfig(_) | softdice::Error::Precondition(_) => CliError::Usage(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "softdice", version, about = "Imitation learning with SoftDICE and baselines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roll out the scripted expert and write a JSON Lines demo file.
    GenDemos(GenDemosArgs),
    /// Train one or more seeds from a config file and/or flags.
    Train(TrainArgs),
    /// Evaluate a policy checkpoint, the expert or the random policy.
    Eval(EvalArgs),
    /// Run the numerical verification suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct GenDemosArgs {
    #[arg(long, value_enum)]
    pub env: EnvName,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_traj: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Gaussian action noise; defaults to 0 on point_mass and 0.05 on pendulum.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    /// JSON experiment file; the flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub algorithm: Option<Algorithm>,
    #[arg(long, value_enum)]
    pub env: Option<EnvName>,
    #[arg(long)]
    pub demos: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_traj: Option<u64>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override one algorithm parameter, `key=value` with a JSON value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Repeat the run once per value, `key=v1,v2,...`, under `out/key=v`.
    #[arg(long)]
    pub sweep: Option<String>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("policy").required(true).args(["checkpoint", "expert", "random"])))]
pub struct EvalArgs {
    /// Policy checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Evaluate the scripted expert.
    #[arg(long)]
    pub expert: bool,
    /// Evaluate the uniform-random policy.
    #[arg(long)]
    pub random: bool,
    #[arg(long, value_enum, default_value = "point_mass")]
    pub env: EnvName,
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sample actions instead of using the mean action.
    #[arg(long)]
    pub stochastic: bool,
}

#[derive(Debug, Args, Default)]
pub struct VerifyArgs {
    /// Run a single row.
    #[arg(long)]
    pub only: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
    /// Negative control: misapply the discount in the telescoping row.
    #[arg(long, hide = true)]
    pub corrupt_gamma: bool,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32, CliError> {
    let mut out = std::io::stdout().lock();
    match cmd {
        Command::GenDemos(a) => {
            let report = cmd_gen_demos(&a)?;
            writeln!(out, "{}", serde_json::to_string(&report)?)?;
            Ok(0)
        }
        Command::Train(a) => {
            let summaries = cmd_train(&a)?;
            for s in &summaries {
                writeln!(out, "{}", serde_json::to_string(s)?)?;
            }
            Ok(0)
        }
        Command::Eval(a) => {
            let report = cmd_eval(&a)?;
            writeln!(out, "{}", serde_json::to_string(&report)?)?;
            Ok(0)
        }
        Command::Verify(a) => {
            let report = cmd_verify(&a)?;
            if a.json {
                writeln!(out, "{}", serde_json::to_string_pretty(&report.rows)?)?;
            } else {
                write!(out, "{}", report.table())?;
            }
            Ok(if report.all_passed() { 0 } else { EXIT_FAILURE })
        }
    }
}

fn make_env(env: EnvName) -> Box<dyn RewardEnv + Send> {
    match env {
        EnvName::PointMass => Box::new(PointMass2D::default()),
        EnvName::Pendulum => Box::new(Pendulum1D::default()),
    }
}

fn make_expert(env: EnvName) -> Box<dyn Controller> {
    match env {
        EnvName::PointMass => Box::new(PointMassExpert::default()),
        EnvName::Pendulum => Box::new(PendulumExpert::default()),
    }
}

fn normalized(env: EnvName, mean_return: f64) -> Option<f64> {
    (env == EnvName::PointMass).then(|| point_mass_normalized_score(mean_return))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenDemosReport {
    pub trajectories: usize,
    pub transitions: usize,
    pub mean_return: f64,
}

pub fn cmd_gen_demos(a: &GenDemosArgs) -> Result<GenDemosReport, CliError> {
    let noise = a.noise.unwrap_or(match a.env {
        EnvName::PointMass => 0.0,
        EnvName::Pendulum => 0.05,
    });
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(CliError::Usage(format!("noise must be a finite non-negative number, got {noise}")));
    }
    let mut env = make_env(a.env);
    let expert = make_expert(a.env);
    let trajs = generate_demos(env.as_mut(), expert.as_ref(), a.n_traj as usize, noise, a.seed)?;
    let file = File::create(&a.out).map_err(|e| CliError::Failure(format!("cannot create {}: {e}", a.out.display())))?;
    write_demos(BufWriter::new(file), &trajs)?;
    let returns: Vec<f64> = trajs
        .iter()
        .map(|t| t.transitions.iter().map(|tr| env.reward(&tr.s, &tr.a, &tr.s_next)).sum())
        .collect();
    Ok(GenDemosReport {
        trajectories: trajs.len(),
        transitions: trajs.iter().map(Trajectory::len).sum(),
        mean_return: returns.iter().sum::<f64>() / returns.len() as f64,
    })
}

pub fn load_demos(path: &Path) -> Result<Vec<Trajectory>, CliError> {
    let file = File::open(path).map_err(|e| CliError::Usage(format!("cannot open demos {}: {e}", path.display())))?;
    Ok(read_demos(BufReader::new(file))?)
}

/// Final numbers for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub final_return: f64,
    pub final_return_std: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub normalized_score: Option<f64>,
    pub policy_entropy: f64,
    pub n_trajectories: usize,
    pub n_transitions: usize,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub env: EnvName,
    /// Keyed by seed.
    pub seeds: std::collections::BTreeMap<String, SeedSummary>,
    /// Mean and sample standard deviation of the final returns across seeds.
    pub mean: f64,
    pub std: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub normalized_mean: Option<f64>,
    pub out_dir: PathBuf,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (mean, std)
}

pub fn cmd_train(a: &TrainArgs) -> Result<Vec<RunSummary>, CliError> {
    let mut cfg = experiment_from_args(a)?;
    for kv in &a.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Usage(format!("--set `{kv}` is not key=value")))?;
        cfg.set_param(k, v)?;
    }
    match &a.sweep {
        None => Ok(vec![run_experiment(&cfg.resolve()?)?]),
        Some(spec) => {
            let (key, values) = parse_sweep(spec)?;
            // resolve everything first so a bad value fails before any training
            let resolved: Vec<ResolvedConfig> = values
                .iter()
                .map(|v| {
                    let mut c = cfg.clone();
                    c.set_param(&key, v)?;
                    c.out_dir = cfg.out_dir.join(format!("{key}={v}"));
                    c.resolve()
                })
                .collect::<Result<_, _>>()?;
            resolved.iter().map(run_experiment).collect()
        }
    }
}

fn experiment_from_args(a: &TrainArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => {
            let missing = |f: &str| CliError::Usage(format!("--{f} is required without --config"));
            ExperimentConfig {
                algorithm: a.algorithm.ok_or_else(|| missing("algorithm"))?,
                env: a.env.ok_or_else(|| missing("env"))?,
                demos: a.demos.clone().ok_or_else(|| missing("demos"))?,
                n_traj: None,
                seeds: vec![0],
                out_dir: a.out.clone().ok_or_else(|| missing("out"))?,
                params: serde_json::json!({}),
            }
        }
    };
    if let Some(v) = a.algorithm {
        if v != cfg.algorithm {
            // the old block belongs to another schema
            cfg.params = serde_json::json!({});
        }
        cfg.algorithm = v;
    }
    if let Some(v) = a.env {
        cfg.env = v;
    }
    if let Some(v) = &a.demos {
        cfg.demos = v.clone();
    }
    if let Some(v) = a.n_traj {
        cfg.n_traj = Some(v as usize);
    }
    if let Some(v) = &a.seeds {
        cfg.seeds = v.clone();
    }
    if let Some(v) = &a.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = a.iterations {
        cfg.set_param("iterations", &v.to_string())?;
    }
    Ok(cfg)
}

/// Trains every seed of `cfg` into `cfg.out_dir` and writes `summary.json`.
///
/// A diverged seed keeps its partial `metrics.csv`; the run then fails once
/// all seeds have finished.
pub fn run_experiment(cfg: &ResolvedConfig) -> Result<RunSummary, CliError> {
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join("resolved-config.json"), serde_json::to_string_pretty(cfg)?)?;
    let demos = DemoBuffer::from_trajectories(&load_demos(&cfg.demos)?)?;
    let results: Vec<(u64, Result<SeedSummary, CliError>)> =
        cfg.seeds.par_iter().map(|&seed| (seed, run_seed(cfg, &demos, seed))).collect();

    let mut seeds = std::collections::BTreeMap::new();
    let mut failures = Vec::new();
    for (seed, r) in results {
        match r {
            Ok(s) => {
                seeds.insert(seed.to_string(), s);
            }
            Err(e) => failures.push(format!("seed {seed}: {}", e.message())),
        }
    }
    if !failures.is_empty() {
        return Err(CliError::Failure(format!("training failed ({})", failures.join("; "))));
    }
    let finals: Vec<f64> = seeds.values().map(|s| s.final_return).collect();
    let (mean, std) = mean_std(&finals);
    let summary = RunSummary {
        algorithm: cfg.algo.algorithm(),
        env: cfg.env,
        seeds,
        mean,
        std,
        normalized_mean: normalized(cfg.env, mean),
        out_dir: cfg.out_dir.clone(),
    };
    fs::write(cfg.out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

pub fn seed_dir(out_dir: &Path, seed: u64) -> PathBuf {
    out_dir.join(format!("seed_{seed}"))
}

fn run_seed(cfg: &ResolvedConfig, demos: &DemoBuffer, seed: u64) -> Result<SeedSummary, CliError> {
    let dir = seed_dir(&cfg.out_dir, seed);
    fs::create_dir_all(&dir)?;
    let buffer = match cfg.n_traj {
        Some(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(SUBSAMPLE_STREAM);
            demos.subsample_trajectories(n, &mut rng)?
        }
        None => demos.clone(),
    };
    let mut eval_env = make_env(cfg.env);
    let mut online_env = make_env(cfg.env);
    let algo = cfg.algo.with_seed(seed);
    let mut sink = CsvMetrics::new(BufWriter::new(File::create(dir.join("metrics.csv"))?))?;

    let trained = match &algo {
        AlgoParams::Softdice(c) => {
            let envs = TrainEnvs {
                eval: Some(eval_env.as_mut() as &mut dyn RewardEnv),
                online: c.online.as_ref().map(|_| online_env.as_mut() as &mut dyn ContinuousEnv),
            };
            train(c, &buffer, envs, &mut sink).map(|s| (s.policy, Some(s.critic)))
        }
        AlgoParams::Valuedice(c) => {
            let envs = TrainEnvs {
                eval: Some(eval_env.as_mut() as &mut dyn RewardEnv),
                online: (c.alpha > 0.0).then(|| online_env.as_mut() as &mut dyn ContinuousEnv),
            };
            valuedice_train(c, &buffer, envs, &mut sink).map(|s| (s.policy, Some(s.critic)))
        }
        AlgoParams::Bc(c) => {
            bc_train(c, &buffer, TrainEnvs::eval_only(eval_env.as_mut()), &mut sink).map(|s| (s.policy, None))
        }
    };
    // flush whatever was logged, even for a diverged run
    let mut file = sink.into_inner()?;
    file.flush()?;
    let (policy, critic) = trained?;

    policy.to_checkpoint().save(dir.join("policy.json"))?;
    if let Some(c) = critic {
        c.to_checkpoint().save(dir.join("critic.json"))?;
    }
    let stats = evaluate_policy(eval_env.as_mut(), &policy, algo.eval_episodes(), eval_seed(seed), true)?;
    let states: Vec<&[f64]> = buffer.transitions().iter().map(|t| t.s.as_slice()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ENTROPY_STREAM);
    let policy_entropy = policy.entropy_estimate(&Tensor::from_rows(&states).map_err(softdice::Error::from)?, ENTROPY_SAMPLES, &mut rng)?;
    Ok(SeedSummary {
        final_return: stats.mean,
        final_return_std: stats.std,
        normalized_score: normalized(cfg.env, stats.mean),
        policy_entropy,
        n_trajectories: buffer.n_trajectories(),
        n_transitions: buffer.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub mean: f64,
    pub std: f64,
    pub std_error: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub normalized_score: Option<f64>,
}

pub fn cmd_eval(a: &EvalArgs) -> Result<EvalReport, CliError> {
    if a.episodes == 0 {
        return Err(CliError::Usage("--episodes must be at least 1".into()));
    }
    let mut env = make_env(a.env);
    let policy: Box<dyn ActionPolicy> = if let Some(path) = &a.checkpoint {
        let ckpt = Checkpoint::load(path)
            .map_err(|e| CliError::Usage(format!("cannot load checkpoint {}: {e}", path.display())))?;
        let policy = TanhGaussianPolicy::from_checkpoint(&ckpt)?;
        if policy.state_dim() != env.state_dim() || policy.action_dim() != env.action_dim() {
            return Err(CliError::Failure(format!(
                "checkpoint maps {}-dim states to {}-dim actions but {:?} has {} and {}",
                policy.state_dim(),
                policy.action_dim(),
                a.env,
                env.state_dim(),
                env.action_dim()
            )));
        }
        Box::new(policy)
    } else if a.expert {
        let action_dim = env.action_dim();
        match a.env {
            EnvName::PointMass => Box::new(ControllerPolicy { controller: PointMassExpert::default(), action_dim }),
            EnvName::Pendulum => Box::new(ControllerPolicy { controller: PendulumExpert::default(), action_dim }),
        }
    } else {
        Box::new(UniformRandomPolicy { action_dim: env.action_dim() })
    };
    let stats: EvalStats = evaluate_policy(env.as_mut(), policy.as_ref(), a.episodes, a.seed, !a.stochastic)?;
    Ok(EvalReport {
        episodes: a.episodes,
        mean: stats.mean,
        std: stats.std,
        std_error: stats.std_error(),
        normalized_score: normalized(a.env, stats.mean),
    })
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<SuiteReport, CliError> {
    let opts = SuiteOptions { only: a.only.clone(), seed: a.seed, corrupt_gamma: a.corrupt_gamma };
    Ok(run_suite(&opts)?)
}
