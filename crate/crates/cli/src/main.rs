use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use optlab::backends::{BackendError, BackendSpec, ReplayBackend};
use optlab::experiments::{run_experiment, write_output, ExperimentConfig, ExperimentError, Protocol};
use optlab::oracle::{brute_force_tsp, exact_tsp, OracleError};
use optlab::reporting::{regenerate, ReportError, SUMMARY_FILE};
use optlab::tsp::load_instance;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_MISSING_KEY: u8 = 3;

#[derive(Parser)]
#[command(name = "optlab", version, about = "Run generator-driven optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment config end to end.
    Run(RunArgs),
    /// Exact TSP oracles.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Output-distribution probes.
    #[command(subcommand)]
    Probe(ProbeCommand),
    /// Rebuild summary.csv and plotdata/ from a run directory.
    Report { run_dir: PathBuf },
    /// Re-execute a run directory from its recorded transcripts.
    Replay(ReplayArgs),
    /// Check a config's schema and invariants without running it.
    ValidateConfig { config: PathBuf },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Print the optimal tour and its length for an instance file.
    Tsp {
        instance: PathBuf,
        /// Use exhaustive enumeration instead of Held-Karp.
        #[arg(long)]
        brute_force: bool,
    },
}

#[derive(Subcommand)]
enum ProbeCommand {
    /// Monte Carlo sampling probe from a `sampling_probe` config.
    Sampling(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Output directory (default: `out/<config name>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the repeat count.
    #[arg(long)]
    repeats: Option<usize>,
    /// Override the backend: a JSON object, a kind name such as
    /// `random_search`, or `scripted:<policy>`.
    #[arg(long)]
    backend: Option<String>,
    /// Overwrite an existing completed run.
    #[arg(long)]
    force: bool,
    /// Maximum concurrent runs.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
}

#[derive(Args)]
struct ReplayArgs {
    run_dir: PathBuf,
    /// Output directory (default: `<run_dir>/replay`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
    #[arg(long, default_value_t = 1)]
    parallel: usize,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl fmt::Display) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.to_string(),
        }
    }

    fn other(message: impl fmt::Display) -> Self {
        Self {
            code: EXIT_FAILURE,
            message: message.to_string(),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Backend(BackendError::MissingApiKey(_)) => Self {
                code: EXIT_MISSING_KEY,
                message: e.to_string(),
            },
            e if e.is_config_error() => Self::config(e),
            e => Self::other(e),
        }
    }
}

impl From<BackendError> for Failure {
    fn from(e: BackendError) -> Self {
        ExperimentError::from(e).into()
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        Self::other(e)
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        Self::other(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(args) => run(args, false),
        Command::Probe(ProbeCommand::Sampling(args)) => run(args, true),
        Command::Oracle(OracleCommand::Tsp {
            instance,
            brute_force,
        }) => oracle(&instance, brute_force),
        Command::Report { run_dir } => {
            let rows = regenerate(&run_dir)?;
            println!("{}: {} summary rows", run_dir.join(SUMMARY_FILE).display(), rows.len());
            Ok(())
        }
        Command::Replay(args) => replay(args),
        Command::ValidateConfig { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            cfg.backend.validate()?;
            println!("{}: valid {} config", config.display(), cfg.protocol.name());
            Ok(())
        }
    }
}

/// Reads `--backend`: a JSON object, a bare kind, or `scripted:<policy>`.
fn parse_backend(text: &str) -> Result<BackendSpec, Failure> {
    let trimmed = text.trim();
    let json = if trimmed.starts_with('{') {
        trimmed.to_owned()
    } else if let Some(policy) = trimmed.strip_prefix("scripted:") {
        format!(r#"{{"kind":"scripted","policy":"{policy}"}}"#)
    } else {
        format!(r#"{{"kind":"{trimmed}"}}"#)
    };
    let spec: BackendSpec =
        serde_json::from_str(&json).map_err(|e| Failure::config(format!("invalid --backend `{text}`: {e}")))?;
    spec.validate()?;
    Ok(spec)
}

fn prepare_out(dir: &Path, force: bool) -> Result<(), Failure> {
    if dir.join(SUMMARY_FILE).exists() {
        if !force {
            return Err(Failure::other(format!(
                "{} already holds a completed run; pass --force to overwrite",
                dir.display()
            )));
        }
        for sub in ["runs", "probes", "plotdata"] {
            let p = dir.join(sub);
            if p.exists() {
                fs::remove_dir_all(&p).map_err(|e| Failure::other(format!("{}: {e}", p.display())))?;
            }
        }
    }
    fs::create_dir_all(dir).map_err(|e| Failure::other(format!("{}: {e}", dir.display())))
}

fn run(args: RunArgs, probe_only: bool) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(r) = args.repeats {
        cfg.repeats = r;
    }
    if let Some(b) = &args.backend {
        cfg.backend = parse_backend(b)?;
    }
    cfg.validate()?;
    if probe_only && !matches!(cfg.protocol, Protocol::SamplingProbe(_)) {
        return Err(Failure::config(format!(
            "invalid config field `protocol`: `probe sampling` needs a sampling_probe protocol, got {}",
            cfg.protocol.name()
        )));
    }
    let out = args.out.clone().unwrap_or_else(|| {
        let stem = args.config.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
        PathBuf::from("out").join(if cfg.name.is_empty() { stem } else { cfg.name.clone() })
    });
    // Builds the backend (and checks API keys) before touching the output.
    let backend = cfg.backend.build()?;
    prepare_out(&out, args.force)?;
    log::info!(
        "running {} with {} ({} repeats) into {}",
        cfg.protocol.name(),
        backend.name(),
        cfg.repeats,
        out.display()
    );
    let output = run_experiment(&cfg, backend.as_ref(), args.parallel)?;
    write_output(&out, &output)?;
    println!("{}", out.join(SUMMARY_FILE).display());
    Ok(())
}

fn replay(args: ReplayArgs) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::load(&args.run_dir.join("config.json"))?;
    let backend = ReplayBackend::from_dir(&args.run_dir)?.expecting_hash(cfg.hash_without_backend());
    cfg.backend = BackendSpec::Replay {
        dir: args.run_dir.clone(),
    };
    let out = args.out.unwrap_or_else(|| args.run_dir.join("replay"));
    prepare_out(&out, args.force)?;
    let output = run_experiment(&cfg, &backend, args.parallel)?;
    for w in backend.warnings() {
        eprintln!("warning: {w}");
    }
    write_output(&out, &output)?;
    println!("{}", out.join(SUMMARY_FILE).display());
    Ok(())
}

fn oracle(path: &Path, brute_force: bool) -> Result<(), Failure> {
    let instance = load_instance(path).map_err(Failure::config)?;
    let result = if brute_force {
        brute_force_tsp(&instance)?
    } else {
        exact_tsp(&instance)?
    };
    println!("length: {:?}", result.optimal_length);
    println!(
        "tour: {}",
        result
            .optimal_tour
            .order()
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(" ")
    );
    Ok(())
}
