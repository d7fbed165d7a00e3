//! Command-line experiment runner.
//!
//! `run` parses the arguments, loads and validates a versioned JSON config,
//! runs one pipeline on a dedicated rayon pool and writes `report.json`,
//! `config.json` and CSV tables into the output directory.
//!
//! Exit codes: 0 success, 1 a numerical step failed at run time, 2 usage,
//! config, schema or budget error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

pub mod commands;
pub mod config;

use config::{Command, ExperimentConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("run failed: {0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Run(_) => 1,
            CliError::Config(_) | CliError::Budget(_) => 2,
        }
    }

    /// Classifies a core error raised while running a pipeline.
    pub fn from_core(context: &str, e: hitlab_core::Error) -> Self {
        use hitlab_core::Error as E;
        let msg = format!("{context}: {e}");
        match e {
            E::Budget(_) => CliError::Budget(msg),
            E::Domain(_) | E::Precondition(_) | E::Shape(_) | E::Parse(_) | E::Json(_) | E::Overlap(_) => {
                CliError::Config(msg)
            }
            _ => CliError::Run(msg),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hitlab", version, about = "Hitting-probability experiments for fBm with drift")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Simulate a path ensemble and summarise its variance profile.
    Simulate(Common),
    /// Box-counting dimension of a point cloud.
    Dimension(Common),
    /// Discrete capacity over a truncation ladder.
    Capacity(Common),
    /// Build a Cantor-type set and export its leaves.
    ConstructSet(Common),
    /// Monte Carlo hitting probability with grid and tolerance ladders.
    Hitting(Common),
    /// Critical-dimension dichotomy between a null and a positive-capacity set.
    Polarity(Common),
    /// Sharpness experiment with frozen rough drifts.
    Sharpness(Common),
    /// Kernel expectation: Monte Carlo against quadrature.
    KernelCheck(Common),
    /// Lebesgue measure of the path image over a voxel ladder.
    ImageMeasure(Common),
    /// Validate a config without running it.
    Validate(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Validate and print the execution plan without computing.
    #[arg(long)]
    dry_run: bool,
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (wanted, common) = match cli.command {
        Sub::Simulate(c) => (Some(Command::Simulate), c),
        Sub::Dimension(c) => (Some(Command::Dimension), c),
        Sub::Capacity(c) => (Some(Command::Capacity), c),
        Sub::ConstructSet(c) => (Some(Command::ConstructSet), c),
        Sub::Hitting(c) => (Some(Command::Hitting), c),
        Sub::Polarity(c) => (Some(Command::Polarity), c),
        Sub::Sharpness(c) => (Some(Command::Sharpness), c),
        Sub::KernelCheck(c) => (Some(Command::KernelCheck), c),
        Sub::ImageMeasure(c) => (Some(Command::ImageMeasure), c),
        Sub::Validate(c) => (None, c),
    };
    match execute(wanted, &common) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("hitlab: {e}");
            e.exit_code()
        }
    }
}

fn execute(wanted: Option<Command>, common: &Common) -> Result<(), CliError> {
    if common.threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    let cfg = ExperimentConfig::load(&common.config, common.seed)?;
    let command = cfg.block.command();
    if let Some(w) = wanted {
        if w != command {
            return Err(CliError::Config(format!(
                "`{}` needs a `{}` block, the config holds `{}`",
                w.name(),
                w.key(),
                command.key()
            )));
        }
    }
    cfg.block.validate().map_err(|e| CliError::Config(format!("{}: {e}", command.key())))?;
    let Some(command) = wanted else {
        println!("ok: {} config is valid", command.name());
        return Ok(());
    };
    if common.dry_run {
        print!("{}", commands::plan(&cfg, common.threads, &common.out));
        return Ok(());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads)
        .build()
        .map_err(|e| CliError::Run(format!("thread pool: {e}")))?;
    let output = pool.install(|| commands::execute(&cfg))?;
    write_outputs(&common.out, &cfg, command, common.threads, output)
}

/// What a pipeline hands back: the report body and named CSV tables.
pub struct Output {
    pub result: Value,
    pub tables: Vec<(String, String)>,
    pub summary: String,
}

/// The report is a pure function of the resolved config, seed, code version
/// and thread count, so equal inputs give equal bytes.
pub fn report_value(cfg: &ExperimentConfig, command: Command, threads: usize, result: Value) -> Value {
    let mut m = serde_json::Map::new();
    m.insert("tool".into(), Value::from("hitlab"));
    m.insert("version".into(), Value::from(hitlab_core::VERSION));
    m.insert("command".into(), Value::from(command.name()));
    m.insert("schema_version".into(), Value::from(cfg.version));
    m.insert("seed".into(), Value::from(cfg.seed));
    m.insert("threads".into(), Value::from(threads));
    m.insert("config".into(), cfg.to_value());
    m.insert("result".into(), result);
    Value::Object(m)
}

fn write_outputs(dir: &Path, cfg: &ExperimentConfig, command: Command, threads: usize, out: Output) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Run(format!("writing {}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let report = report_value(cfg, command, threads, out.result);
    let pretty = |v: &Value| serde_json::to_string_pretty(v).expect("report serializes") + "\n";
    std::fs::write(dir.join("report.json"), pretty(&report)).map_err(io)?;
    std::fs::write(dir.join("config.json"), pretty(&cfg.to_value())).map_err(io)?;
    for (name, body) in &out.tables {
        std::fs::write(dir.join(name), body).map_err(io)?;
    }
    println!("{}", out.summary);
    Ok(())
}
