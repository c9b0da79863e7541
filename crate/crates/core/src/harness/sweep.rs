//! Survival sweeps over the truncation range.

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plot::{plot_data, render_svg};
use super::{Coupling, ExperimentConfig, Model, OutputFormat};
use crate::aniso::aniso_survival;
use crate::contact::contact_survival;
use crate::error::{Error, Result};
use crate::lattice::{truncate, Truncation};
use crate::renorm::{derive_parameters, explore_field, ExplorationTrace, RenormParams, StopReason};
use crate::rng::{replica_seed, tag, KeyHasher};
use crate::sampler::{estimate_survival_at, SeededConfig, SurvivalEstimate};

/// One sweep point. Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: Model,
    pub k: u64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "N")]
    pub n: u64,
    pub theta_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub seed0: u64,
    /// Seconds; empty unless timing is enabled.
    pub wall_time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub files: Vec<PathBuf>,
}

/// Base seed used for the `index`-th range of the sweep.
pub fn sweep_seed(config: &ExperimentConfig, k: u64) -> u64 {
    match config.coupling {
        Coupling::Coupled => config.seed0,
        Coupling::Independent => KeyHasher::new(config.seed0).absorb(tag::INDEPENDENT).absorb(k).finish(),
    }
}

/// Block explorations for replicas `1..=replicas` on the family truncated at
/// `k_star`, in replica order.
pub fn run_explorations(config: &ExperimentConfig) -> Result<(RenormParams, Vec<ExplorationTrace>)> {
    let family = config.family()?;
    let params = derive_parameters(
        &family,
        config.epsilon.unwrap_or(0.45),
        config.delta.unwrap_or(0.2),
    )?;
    let truncated = truncate(family, params.k_star)?;
    let traces = (1..=config.replicas)
        .into_par_iter()
        .map(|i| {
            let field = SeededConfig::new(replica_seed(config.seed0, i), truncated.clone());
            explore_field(&field, &params, config.j_max)
        })
        .collect();
    Ok((params, traces))
}

/// Fraction of block explorations on the `k`-truncated family whose good
/// set reaches coarse level `j_max`.
fn renorm_point(config: &ExperimentConfig, k: u64, seed0: u64) -> Result<SurvivalEstimate> {
    let family = config.family()?;
    let params = derive_parameters(
        &family,
        config.epsilon.unwrap_or_default(),
        config.delta.unwrap_or_default(),
    )?;
    let truncated = truncate(family, k)?;
    let n = config.replicas;
    if n == 0 {
        return Err(Error::NoReplicas);
    }
    let hits = (1..=n)
        .into_par_iter()
        .filter(|&i| {
            let field = SeededConfig::new(replica_seed(seed0, i), truncated.clone());
            explore_field(&field, &params, config.j_max).stop == StopReason::LevelReached
        })
        .count() as u64;
    SurvivalEstimate::from_counts(hits, n, config.j_max as f64, Truncation::Finite(k), seed0, config.confidence)
}

/// Runs the configured pipeline at a single range.
pub fn sweep_point(config: &ExperimentConfig, k: u64) -> Result<SweepRow> {
    let start = Instant::now();
    let seed = sweep_seed(config, k);
    let est = match config.model {
        Model::Perc => estimate_survival_at(
            &truncate(config.family()?, k)?,
            config.layers(),
            config.replicas,
            seed,
            config.confidence,
        )?,
        Model::Renorm => renorm_point(config, k, seed)?,
        Model::Aniso => {
            let aniso = config.aniso_config(Truncation::Finite(k))?;
            aniso_survival(&aniso, config.layers(), config.replicas, seed, config.confidence)?.0
        }
        Model::Contact => {
            contact_survival(
                &config.rates()?,
                k,
                config.horizon,
                config.replicas,
                seed,
                config.window()?,
                config.confidence,
            )?
            .estimate
        }
    };
    Ok(SweepRow {
        model: config.model,
        k,
        horizon: est.horizon,
        n: est.n_samples,
        theta_hat: est.theta_hat,
        ci_lo: est.ci_lo,
        ci_hi: est.ci_hi,
        seed0: seed,
        wall_time: config.timing.then(|| start.elapsed().as_secs_f64()),
    })
}

pub fn rows_to_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn write_file(path: PathBuf, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let mut f = File::create(&path)?;
    f.write_all(contents.as_bytes())?;
    f.flush()?;
    files.push(path);
    Ok(())
}

fn write_outputs(config: &ExperimentConfig, rows: &[SweepRow]) -> Result<Vec<PathBuf>> {
    let Some(dir) = &config.out else {
        return Ok(Vec::new());
    };
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    match config.format {
        OutputFormat::Csv => write_file(dir.join("sweep.csv"), &rows_to_csv(rows)?, &mut files)?,
        OutputFormat::Json => {
            let text = serde_json::to_string_pretty(rows).map_err(|e| Error::Io(e.to_string()))?;
            write_file(dir.join("sweep.json"), &(text + "\n"), &mut files)?;
        }
    }
    write_file(dir.join("sweep_plot.dat"), &plot_data(rows), &mut files)?;
    if config.svg {
        write_file(dir.join("sweep.svg"), &render_svg(rows), &mut files)?;
    }
    Ok(files)
}

/// Runs every range of the sweep in order. Completed rows are written out
/// after each point, so an error leaves the partial results on disk.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutput> {
    config.validate()?;
    let ks = config.resolve_ks()?;
    let mut rows = Vec::with_capacity(ks.len());
    let mut files = Vec::new();
    for k in ks {
        match sweep_point(config, k) {
            Ok(row) => rows.push(row),
            Err(e) => {
                write_outputs(config, &rows)?;
                return Err(e);
            }
        }
        files = write_outputs(config, &rows)?;
    }
    Ok(SweepOutput { rows, files })
}
