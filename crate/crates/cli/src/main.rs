use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use truncperc::harness::{
    rows_to_csv, run_explorations, run_sweep, run_verification_suite, with_workers, workers_from_env, AutoK,
    ExperimentConfig, KSpec, Model, OutputFormat, WORKERS_ENV,
};
use truncperc::renorm::{domination_report, ComparisonMode, StopReason};
use truncperc::Error;

/// Truncated long-range oriented percolation experiments.
#[derive(Parser, Debug)]
#[command(name = "truncperc", version, about, after_help = format!("Set {WORKERS_ENV} to fix the worker count."))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Survival sweep for the truncated percolation model.
    Perc(Common),
    /// Block explorations: traces, parameters and the domination report.
    Renorm(Common),
    /// Survival sweep for the induced anisotropic model.
    Aniso(Common),
    /// Survival sweep for the long-range contact process.
    Contact(Common),
    /// Sweep of the model named in the config file.
    Sweep(Common),
    /// Verification suite; exit code 0 pass, 1 fail, 3 no data.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Fraction of edge states to flip after sampling.
        #[arg(long)]
        sabotage: Option<f64>,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Comma-separated increasing ranges, or `auto`.
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn parse_k(text: &str) -> Result<KSpec, Error> {
    if text.trim() == "auto" {
        return Ok(KSpec::Auto(AutoK::Auto));
    }
    text.split(',')
        .map(|s| s.trim().parse::<u64>())
        .collect::<Result<Vec<_>, _>>()
        .map(KSpec::List)
        .map_err(|e| Error::Config {
            path: "--k".into(),
            reason: e.to_string(),
        })
}

fn build_config(common: &Common, model: Option<Model>) -> Result<ExperimentConfig, Error> {
    let mut c = match (&common.config, model) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(m)) => ExperimentConfig::default_for(m),
        (None, None) => {
            return Err(Error::Config {
                path: "--config".into(),
                reason: "required for this subcommand".into(),
            })
        }
    };
    if let Some(m) = model {
        c.model = m;
    }
    if let Some(s) = common.seed {
        c.seed0 = s;
    }
    if let Some(n) = common.replicas {
        c.replicas = n;
    }
    if let Some(h) = common.horizon {
        c.horizon = h;
    }
    if let Some(k) = &common.k {
        c.k = parse_k(k)?;
    }
    if let Some(o) = &common.out {
        c.out = Some(o.clone());
    }
    if let Some(f) = common.format {
        c.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    c.validate()?;
    Ok(c)
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn sweep(config: &ExperimentConfig) -> Result<i32, Error> {
    let out = run_sweep(config)?;
    if out.files.is_empty() {
        match config.format {
            OutputFormat::Csv => print!("{}", rows_to_csv(&out.rows)?),
            OutputFormat::Json => println!("{}", json(&out.rows)),
        }
    } else {
        for f in &out.files {
            eprintln!("wrote {}", f.display());
        }
    }
    Ok(0)
}

fn renorm(config: &ExperimentConfig) -> Result<i32, Error> {
    let (params, traces) = run_explorations(config)?;
    let reached = traces.iter().filter(|t| t.stop == StopReason::LevelReached).count();
    let domination = if traces.is_empty() {
        None
    } else {
        Some(domination_report(
            &traces,
            params.delta,
            config.verify.mode.unwrap_or(ComparisonMode::Independent),
            config.confidence,
        )?)
    };
    let summary = serde_json::json!({
        "params": params,
        "explorations": traces.len(),
        "level_reached": reached,
        "j_max": config.j_max,
        "domination": domination,
    });
    if let Some(dir) = &config.out {
        let tdir = dir.join("traces");
        std::fs::create_dir_all(&tdir)?;
        for (i, t) in traces.iter().enumerate() {
            std::fs::write(tdir.join(format!("trace_{:05}.txt", i + 1)), t.to_text())?;
        }
        std::fs::write(dir.join("renorm.json"), json(&summary) + "\n")?;
        eprintln!("wrote {} traces and renorm.json to {}", traces.len(), dir.display());
    } else {
        println!("{}", json(&summary));
    }
    Ok(if domination.is_none() { 3 } else { 0 })
}

fn verify(config: &ExperimentConfig) -> Result<i32, Error> {
    let (report, path) = run_verification_suite(config)?;
    match path {
        Some(p) => eprintln!("wrote {}", p.display()),
        None => println!("{}", json(&report)),
    }
    for c in &report.checks {
        eprintln!("{:<36} {:?}", c.name, c.status);
    }
    Ok(report.exit_code())
}

fn run(cli: Cli) -> Result<i32, Error> {
    let workers = workers_from_env()?;
    let (config, action): (ExperimentConfig, fn(&ExperimentConfig) -> Result<i32, Error>) = match &cli.command {
        Command::Perc(c) => (build_config(c, Some(Model::Perc))?, sweep),
        Command::Aniso(c) => (build_config(c, Some(Model::Aniso))?, sweep),
        Command::Contact(c) => (build_config(c, Some(Model::Contact))?, sweep),
        Command::Renorm(c) => (build_config(c, Some(Model::Renorm))?, renorm),
        Command::Sweep(c) => (build_config(c, None)?, sweep),
        Command::Verify { common, sabotage } => {
            let mut c = match &common.config {
                Some(_) => build_config(common, None)?,
                None => build_config(common, Some(Model::Renorm))?,
            };
            if let Some(s) = sabotage {
                c.verify.sabotage = *s;
                c.validate()?;
            }
            (c, verify)
        }
    };
    with_workers(workers, || action(&config))?
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config { .. } | Error::InvalidParameter { .. } | Error::InvalidTruncation(_) | Error::DimensionMismatch { .. }
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_config_error(&e) { 2 } else { 1 })
        }
    }
}
