//! Empirical checks that the exploration's good/bad field dominates a
//! Bernoulli site field on `G*`.
//!
//! These are observations, not proofs: the pooled conditional good-frequency
//! is compared with `1 - delta`, and the fraction of explorations reaching a
//! coarse level is compared with a simulated comparison field.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::renorm::explore::ExplorationTrace;
use crate::rng::{replica_seed, tag, KeyHasher};
use crate::sampler::SurvivalEstimate;
use crate::stats::{binomial_se, wilson, z_for_level};

/// Slack subtracted from `1 - delta` before comparing with the Wilson lower bound.
pub const DOMINATION_SLACK: f64 = 0.01;

/// Dependence structure of the comparison site field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComparisonMode {
    /// Independent Bernoulli(1 - delta) sites.
    Independent,
    /// Sites `(i,j)` open iff `w(i,j)` and `w(i+2,j)` with `w` iid
    /// Bernoulli(sqrt(1 - delta)): density `1 - delta`, horizontal
    /// dependence range one. Used for the induced anisotropic and contact
    /// models, whose coarse fields are only one-dependent.
    OneDependent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub level: i64,
    pub steps: u64,
    pub good: u64,
    pub frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub traces: usize,
    pub steps: u64,
    pub good: u64,
    pub frequency: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub threshold: f64,
    pub pass: bool,
    pub mode: ComparisonMode,
    /// Breakdown by coarse level `j` of the examined vertex.
    pub by_level: Vec<LevelRow>,
    pub note: String,
}

/// Pools every exploration step and compares the good-frequency's Wilson
/// lower bound with `1 - delta - 0.01`.
pub fn domination_report(
    traces: &[ExplorationTrace],
    delta: f64,
    mode: ComparisonMode,
    confidence: f64,
) -> Result<DominationReport> {
    if traces.is_empty() {
        return Err(Error::Empty("no traces"));
    }
    let mut levels: BTreeMap<i64, (u64, u64)> = BTreeMap::new();
    for tr in traces {
        for st in &tr.steps {
            let e = levels.entry(st.vertex.j).or_default();
            e.0 += 1;
            e.1 += st.good as u64;
        }
    }
    let steps: u64 = levels.values().map(|v| v.0).sum();
    let good: u64 = levels.values().map(|v| v.1).sum();
    if steps == 0 {
        return Err(Error::Empty("traces contain no steps"));
    }
    let ci = wilson(good, steps, z_for_level(confidence)?);
    let threshold = 1.0 - delta - DOMINATION_SLACK;
    let note = match mode {
        ComparisonMode::Independent => "compared with independent Bernoulli site percolation".to_string(),
        ComparisonMode::OneDependent => {
            "one-dependent induced model: compared with a one-dependent field; empirical observation only".to_string()
        }
    };
    Ok(DominationReport {
        traces: traces.len(),
        steps,
        good,
        frequency: good as f64 / steps as f64,
        ci_lo: ci.lo,
        ci_hi: ci.hi,
        threshold,
        pass: ci.lo >= threshold,
        mode,
        by_level: levels
            .into_iter()
            .map(|(level, (s, g))| LevelRow {
                level,
                steps: s,
                good: g,
                frequency: g as f64 / s as f64,
            })
            .collect(),
        note,
    })
}

fn site_open(seed: u64, i: i64, j: i64, density: f64, mode: ComparisonMode) -> bool {
    let w = |i: i64, p: f64| {
        KeyHasher::new(seed)
            .absorb(tag::COMPARISON)
            .absorb_i64(i)
            .absorb_i64(j)
            .uniform()
            < p
    };
    match mode {
        ComparisonMode::Independent => w(i, density),
        ComparisonMode::OneDependent => {
            let r = density.sqrt();
            w(i, r) && w(i + 2, r)
        }
    }
}

/// Whether the open site cluster of the origin on `G*` reaches `level`.
pub fn site_cluster_reaches(seed: u64, density: f64, level: i64, mode: ComparisonMode) -> bool {
    if !site_open(seed, 0, 0, density, mode) {
        return false;
    }
    let mut row: Vec<i64> = vec![0];
    for j in 1..=level {
        let mut next: Vec<i64> = row
            .iter()
            .flat_map(|&i| [i - 1, i + 1])
            .filter(|&i| site_open(seed, i, j, density, mode))
            .collect();
        next.sort_unstable();
        next.dedup();
        if next.is_empty() {
            return false;
        }
        row = next;
    }
    true
}

/// Monte Carlo probability that the comparison cluster reaches `level`.
pub fn comparison_survival(
    density: f64,
    level: i64,
    n: u64,
    seed0: u64,
    mode: ComparisonMode,
    confidence: f64,
) -> Result<SurvivalEstimate> {
    if n == 0 {
        return Err(Error::NoReplicas);
    }
    let hits = (1..=n)
        .into_par_iter()
        .filter(|&i| site_cluster_reaches(replica_seed(seed0, i), density, level, mode))
        .count() as u64;
    SurvivalEstimate::from_counts(
        hits,
        n,
        level as f64,
        crate::lattice::Truncation::Untruncated,
        seed0,
        confidence,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelComparison {
    pub level: i64,
    pub explorations: u64,
    pub reached: u64,
    pub fraction: f64,
    pub comparison: f64,
    pub comparison_n: u64,
    pub pooled_se: f64,
    pub pass: bool,
}

/// Fraction of traces whose good set reaches `level`, against the comparison
/// field's survival minus three pooled standard errors.
pub fn compare_level_reach(
    traces: &[ExplorationTrace],
    level: i64,
    comparison: &SurvivalEstimate,
) -> Result<LevelComparison> {
    if traces.is_empty() {
        return Err(Error::Empty("no traces"));
    }
    let n = traces.len() as u64;
    let reached = traces.iter().filter(|t| t.reached_level(level)).count() as u64;
    let fraction = reached as f64 / n as f64;
    let pooled_se = (binomial_se(fraction, n).powi(2) + comparison.standard_error().powi(2)).sqrt();
    Ok(LevelComparison {
        level,
        explorations: n,
        reached,
        fraction,
        comparison: comparison.theta_hat,
        comparison_n: comparison.n_samples,
        pooled_se,
        pass: fraction >= comparison.theta_hat - 3.0 * pooled_se,
    })
}
