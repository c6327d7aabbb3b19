mod config;
mod experiments;
mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::{Experiment, ExperimentConfig};
use manifest::{check_outputs, record, Manifest, MANIFEST_NAME, PRNG};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
    Io(String),
    Verify(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) | CliError::Verify(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid configuration: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Verify(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<qbohm::Error> for CliError {
    fn from(e: qbohm::Error) -> Self {
        use qbohm::Error as E;
        match e {
            E::ProbeExited(_) | E::VertexCaptured { .. } | E::RankDeficient | E::ProposalTooLoose(_) => {
                CliError::Numerical(e.to_string())
            }
            E::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "qbohm", version, about = "Run and verify pilot-wave experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file and/or parameter flags.
    ///
    /// Parameter flags follow the experiment name as `--key value`, e.g.
    /// `qbohm run rankine --eps 1.0 --tau-max 8`.
    Run {
        /// JSON config: {"experiment", "parameters", "seed", "output_dir"}.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Experiment name (optional with --config), then parameter flags.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "EXPERIMENT PARAMS")]
        args: Vec<String>,
    },
    /// Check output checksums against a manifest.
    Verify {
        manifest: PathBuf,
        /// Also rerun the recorded configuration and compare its outputs.
        #[arg(long)]
        rerun: bool,
    },
    /// List the available experiments.
    ListExperiments,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("QBOHM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Validation(format!("QBOHM_THREADS: expected a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Validation(format!("QBOHM_THREADS: {e}")))
}

fn split_experiment(args: &[String]) -> Result<(Option<Experiment>, &[String]), CliError> {
    match args.first() {
        Some(first) if !first.starts_with("--") => {
            let exp = Experiment::ALL
                .into_iter()
                .find(|e| e.name() == first)
                .ok_or_else(|| CliError::Validation(format!("experiment: unknown '{first}'")))?;
            Ok((Some(exp), &args[1..]))
        }
        _ => Ok((None, args)),
    }
}

/// Pulls `--seed` and `--output-dir` out of the parameter flags.
fn split_globals(cfg: &mut ExperimentConfig, params: &[String]) -> Result<Vec<String>, CliError> {
    let mut rest = Vec::new();
    let mut it = params.iter();
    while let Some(a) = it.next() {
        let (key, inline) = match a.split_once('=') {
            Some((k, v)) => (k, Some(v.to_owned())),
            None => (a.as_str(), None),
        };
        if !matches!(key, "--seed" | "--output-dir" | "--config") {
            rest.push(a.clone());
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it.next().cloned().ok_or_else(|| CliError::Validation(format!("{key} needs a value")))?,
        };
        match key {
            "--seed" => {
                cfg.seed = Some(value.parse().map_err(|_| CliError::Validation(format!("seed: not a u64: {value}")))?)
            }
            "--output-dir" => cfg.output_dir = Some(PathBuf::from(value)),
            _ => return Err(CliError::Validation("--config must come before parameter flags".into())),
        }
    }
    Ok(rest)
}

fn resolve(
    experiment: Option<Experiment>,
    config: Option<&Path>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    params: &[String],
) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let cfg = ExperimentConfig::from_json(&text)?;
            if let Some(e) = experiment {
                if e != cfg.experiment {
                    return Err(CliError::Validation(format!(
                        "experiment: config says {} but {} was requested",
                        cfg.experiment.name(),
                        e.name()
                    )));
                }
            }
            cfg
        }
        None => ExperimentConfig {
            experiment: experiment
                .ok_or_else(|| CliError::Validation("experiment: name one or pass --config".into()))?,
            parameters: Default::default(),
            seed: None,
            output_dir: None,
        },
    };
    if seed.is_some() {
        cfg.seed = seed;
    }
    if output_dir.is_some() {
        cfg.output_dir = output_dir;
    }
    let rest = split_globals(&mut cfg, params)?;
    cfg.apply_flags(&rest)?;
    experiments::validate(&cfg)?;
    Ok(cfg)
}

fn run(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let outcome = experiments::run(cfg)?;
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("qbohm-out").join(cfg.experiment.name()));
    fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut outputs = Vec::new();
    for a in &outcome.artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        outputs.push(record(&a.name, &a.bytes));
    }
    let manifest = Manifest {
        tool: "qbohm".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        prng: PRNG.into(),
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs,
        results: outcome.results,
    };
    let path = dir.join(MANIFEST_NAME);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    println!("wrote {} files and {}", outcome.artifacts.len(), path.display());
    match outcome.failure {
        Some(msg) => Err(CliError::Numerical(msg)),
        None => Ok(()),
    }
}

fn verify(path: &Path, rerun: bool) -> Result<(), CliError> {
    let manifest = Manifest::read(path)?;
    let mut bad = check_outputs(&manifest, &Manifest::dir(path));
    if rerun {
        let fresh = experiments::run(&manifest.config)?;
        for out in &manifest.outputs {
            match fresh.artifacts.iter().find(|a| a.name == out.file) {
                Some(a) if record(&a.name, &a.bytes) == *out => {}
                Some(_) => bad.push((out.file.clone(), "rerun differs".into())),
                None => bad.push((out.file.clone(), "not produced by rerun".into())),
            }
        }
    }
    if bad.is_empty() {
        println!("ok: {} outputs match{}", manifest.outputs.len(), if rerun { " (rerun identical)" } else { "" });
        return Ok(());
    }
    for (file, why) in &bad {
        eprintln!("{file}: {why}");
    }
    let files: Vec<&str> = bad.iter().map(|(f, _)| f.as_str()).collect();
    Err(CliError::Verify(files.join(", ")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| match cli.command {
        Command::Run { config, seed, output_dir, args } => split_experiment(&args)
            .and_then(|(exp, params)| resolve(exp, config.as_deref(), seed, output_dir, params))
            .and_then(|cfg| run(&cfg)),
        Command::Verify { manifest, rerun } => verify(&manifest, rerun),
        Command::ListExperiments => {
            for e in Experiment::ALL {
                let seed = if e.stochastic() { " (seed required)" } else { "" };
                println!("{:<14} {}{seed}", e.name(), e.summary());
            }
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qbohm: {e}");
            ExitCode::from(e.code())
        }
    }
}
