//! Lazily sampled percolation configurations, finite-horizon cluster
//! exploration and Monte Carlo survival estimates.
//!
//! The state of an edge is `uniform_for(seed, edge) < p^k_y`. Because the
//! uniform does not depend on `k`, raising the truncation range can only open
//! more edges: configurations at different `k` sharing a seed are coupled
//! monotonically, edge by edge.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{OrientedEdge, Point, Truncation, TruncatedFamily, Vertex};
use crate::rng::{replica_seed, KeyHasher};
use crate::stats::{wilson, z_for_level, DEFAULT_CONFIDENCE};

/// Default cap on the number of vertices in one cluster slice.
pub const DEFAULT_FRONTIER_CAP: usize = 10_000_000;

/// Keyed uniform of an edge: absorbs seed, `from.x`, `from.t`, then the
/// displacement, in that order.
#[inline]
pub fn uniform_for(seed: u64, edge: &OrientedEdge) -> f64 {
    edge_uniform(seed, &edge.from.x, edge.from.t, &edge.displacement)
}

#[inline]
pub(crate) fn edge_uniform(seed: u64, x: &[i64], t: u64, y: &[i64]) -> f64 {
    KeyHasher::new(seed)
        .absorb_all(x)
        .absorb(t)
        .absorb_all(y)
        .uniform()
}

/// A 1d oriented bond field on `Z x Z_+`, queried lazily.
///
/// Implemented by the plain percolation configuration and by the induced
/// fields of the anisotropic and contact models, so the renormalization
/// engine runs unchanged on all three.
pub trait EdgeField: Sync {
    /// State of `<(x,t), (x+y,t+1)>`.
    fn is_open_1d(&self, x: i64, t: u64, y: i64) -> bool;

    /// Largest displacement norm the field can ever open.
    fn range(&self) -> Truncation;
}

impl<F: EdgeField + ?Sized> EdgeField for &F {
    fn is_open_1d(&self, x: i64, t: u64, y: i64) -> bool {
        (**self).is_open_1d(x, t, y)
    }

    fn range(&self) -> Truncation {
        (**self).range()
    }
}

/// Field wrapper that flips a keyed fraction of edge states after sampling.
/// Used as a negative control for soundness checks.
#[derive(Clone, Debug)]
pub struct Sabotaged<F> {
    pub inner: F,
    pub seed: u64,
    pub rate: f64,
}

impl<F: EdgeField> EdgeField for Sabotaged<F> {
    fn is_open_1d(&self, x: i64, t: u64, y: i64) -> bool {
        let flip = KeyHasher::new(self.seed)
            .absorb(crate::rng::tag::SABOTAGE)
            .absorb_i64(x)
            .absorb(t)
            .absorb_i64(y)
            .uniform()
            < self.rate;
        self.inner.is_open_1d(x, t, y) ^ flip
    }

    fn range(&self) -> Truncation {
        self.inner.range()
    }
}

/// A percolation configuration: seed plus truncated family.
#[derive(Clone, Debug)]
pub struct SeededConfig {
    pub seed: u64,
    pub family: TruncatedFamily,
}

impl SeededConfig {
    pub fn new(seed: u64, family: TruncatedFamily) -> Self {
        Self { seed, family }
    }

    pub fn is_open(&self, edge: &OrientedEdge) -> Result<bool> {
        let d = self.family.d();
        if edge.from.x.len() != d || edge.displacement.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: edge.displacement.len().max(edge.from.x.len()),
            });
        }
        Ok(self.open_unchecked(&edge.from.x, edge.from.t, &edge.displacement))
    }

    #[inline]
    pub(crate) fn open_unchecked(&self, x: &[i64], t: u64, y: &[i64]) -> bool {
        let p = self.family.p_unchecked(y);
        if p <= 0.0 {
            return false;
        }
        if p >= 1.0 {
            return true;
        }
        edge_uniform(self.seed, x, t, y) < p
    }
}

pub fn is_open(config: &SeededConfig, edge: &OrientedEdge) -> Result<bool> {
    config.is_open(edge)
}

impl EdgeField for SeededConfig {
    fn is_open_1d(&self, x: i64, t: u64, y: i64) -> bool {
        self.open_unchecked(&[x], t, &[y])
    }

    fn range(&self) -> Truncation {
        self.family.k()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSlice {
    pub t: u64,
    /// Sorted, deduplicated positions `x` with `origin ~> (x, t)`.
    pub reached: Vec<Point>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Exploration {
    /// Non-empty slices from `t = origin.t` onwards; exploration stops at the
    /// first empty layer.
    pub slices: Vec<ClusterSlice>,
    pub survived: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct ExploreOptions {
    pub frontier_cap: usize,
    pub keep_slices: bool,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        Self {
            frontier_cap: DEFAULT_FRONTIER_CAP,
            keep_slices: true,
        }
    }
}

/// Explores the open cluster of `origin` for `horizon` layers.
pub fn explore(config: &SeededConfig, horizon: u64, origin: &Vertex) -> Result<Exploration> {
    explore_with(config, horizon, origin, ExploreOptions::default())
}

pub fn explore_with(
    config: &SeededConfig,
    horizon: u64,
    origin: &Vertex,
    opts: ExploreOptions,
) -> Result<Exploration> {
    let d = config.family.d();
    if origin.x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: origin.x.len(),
        });
    }
    let support = config.family.support()?;
    let mut current: Vec<Point> = vec![origin.x.clone()];
    let mut slices = Vec::new();
    if opts.keep_slices {
        slices.push(ClusterSlice {
            t: origin.t,
            reached: current.clone(),
        });
    }
    let mut next: Vec<Point> = Vec::new();
    for t in origin.t..origin.t + horizon {
        next.clear();
        for x in &current {
            for y in &support {
                if config.open_unchecked(x, t, y) {
                    next.push(x.iter().zip(y).map(|(a, b)| a + b).collect());
                }
            }
        }
        next.sort_unstable();
        next.dedup();
        if next.len() > opts.frontier_cap {
            return Err(Error::FrontierOverflow {
                size: next.len(),
                cap: opts.frontier_cap,
                layer: t + 1,
            });
        }
        if next.is_empty() {
            return Ok(Exploration {
                slices,
                survived: false,
            });
        }
        std::mem::swap(&mut current, &mut next);
        if opts.keep_slices {
            slices.push(ClusterSlice {
                t: t + 1,
                reached: current.clone(),
            });
        }
    }
    Ok(Exploration {
        slices,
        survived: true,
    })
}

/// Whether `origin` reaches layer `origin.t + horizon`; no slices retained.
pub fn survives(config: &SeededConfig, horizon: u64, origin: &Vertex) -> Result<bool> {
    explore_with(
        config,
        horizon,
        origin,
        ExploreOptions {
            keep_slices: false,
            ..ExploreOptions::default()
        },
    )
    .map(|e| e.survived)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEstimate {
    pub theta_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_samples: u64,
    pub successes: u64,
    pub horizon: f64,
    pub k: Truncation,
    pub seed0: u64,
}

impl SurvivalEstimate {
    pub fn from_counts(
        successes: u64,
        n: u64,
        horizon: f64,
        k: Truncation,
        seed0: u64,
        confidence: f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::NoReplicas);
        }
        let ci = wilson(successes, n, z_for_level(confidence)?);
        Ok(Self {
            theta_hat: successes as f64 / n as f64,
            ci_lo: ci.lo,
            ci_hi: ci.hi,
            n_samples: n,
            successes,
            horizon,
            k,
            seed0,
        })
    }

    pub fn standard_error(&self) -> f64 {
        crate::stats::binomial_se(self.theta_hat, self.n_samples)
    }
}

/// Per-replica survival indicators for replicas `1..=n`, in index order.
pub fn survival_indicators(
    family: &TruncatedFamily,
    horizon: u64,
    n: u64,
    seed0: u64,
) -> Result<Vec<bool>> {
    if n == 0 {
        return Err(Error::NoReplicas);
    }
    // Resolve the support once so a bad family fails before fanning out.
    family.support()?;
    let origin = Vertex::origin(family.d());
    (1..=n)
        .into_par_iter()
        .map(|i| {
            let config = SeededConfig::new(replica_seed(seed0, i), family.clone());
            survives(&config, horizon, &origin)
        })
        .collect()
}

/// Monte Carlo estimate of `P^k(origin ~> layer T)` with a Wilson interval.
pub fn estimate_survival(
    family: &TruncatedFamily,
    horizon: u64,
    n: u64,
    seed0: u64,
) -> Result<SurvivalEstimate> {
    estimate_survival_at(family, horizon, n, seed0, DEFAULT_CONFIDENCE)
}

pub fn estimate_survival_at(
    family: &TruncatedFamily,
    horizon: u64,
    n: u64,
    seed0: u64,
    confidence: f64,
) -> Result<SurvivalEstimate> {
    let hits = survival_indicators(family, horizon, n, seed0)?
        .into_iter()
        .filter(|&s| s)
        .count() as u64;
    SurvivalEstimate::from_counts(hits, n, horizon as f64, family.k(), seed0, confidence)
}
