//! Anisotropic oriented percolation on the quadrant with unit vertical bonds
//! (open with probability `sigma`) and long horizontal bonds of length `n`
//! (open with probability `q_n`), and the induced bond model on the 1d
//! oriented lattice.
//!
//! The induced edge `<(x,y), (x+n,y+1)>` is open iff the horizontal bond
//! `<(x,y), (x+n,y)>` and the vertical bond `<(x+n,y), (x+n,y+1)>` are both
//! open. Each bond's state is keyed by the bond's own coordinates, so induced
//! edges that share an end vertex share its vertical bond and are correlated
//! exactly as the model dictates.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{support_above, ConnectionFamily, Truncation};
use crate::renorm::params::{derive_with, BinomialCondition};
use crate::renorm::RenormParams;
use crate::rng::{replica_seed, tag, KeyHasher};
use crate::sampler::{EdgeField, SurvivalEstimate};

#[derive(Clone, Debug)]
pub struct AnisoConfig {
    pub sigma: f64,
    /// One-sided 1d family of horizontal bond probabilities `q_n`.
    pub q: ConnectionFamily,
    pub k: Truncation,
}

impl AnisoConfig {
    pub fn new(sigma: f64, q: ConnectionFamily, k: Truncation) -> Result<Self> {
        if !(0.0..=1.0).contains(&sigma) {
            return Err(invalid("sigma", format!("{sigma} not in [0,1]")));
        }
        if q.d() != 1 || !q.is_one_sided() {
            return Err(invalid("q", "horizontal family must be one-sided 1d"));
        }
        if k == Truncation::Finite(0) {
            return Err(Error::InvalidTruncation(0));
        }
        Ok(Self { sigma, q, k })
    }

    pub fn with_range(&self, k: Truncation) -> Self {
        Self { k, ..self.clone() }
    }

    /// Truncated `q^k_n`.
    pub fn q_k(&self, n: i64) -> f64 {
        if n < 1 || !self.k.admits(n as u64) {
            0.0
        } else {
            self.q.p_unchecked(&[n])
        }
    }

    /// Horizontal lengths with `q^k_n > 0`, ascending.
    pub fn support(&self) -> Result<Vec<i64>> {
        Ok(self.q.support_within(self.k)?.into_iter().map(|y| y[0]).collect())
    }
}

/// A bond of the quadrant lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Bond {
    /// `<(x,y), (x,y+1)>`.
    Vertical { x: i64, y: i64 },
    /// `<(x,y), (x+n,y)>`, `n >= 1`.
    Horizontal { x: i64, y: i64, n: i64 },
}

fn bond_uniform(seed: u64, bond: Bond) -> f64 {
    let h = KeyHasher::new(seed);
    match bond {
        Bond::Vertical { x, y } => h.absorb(tag::ANISO_VERTICAL).absorb_i64(x).absorb_i64(y),
        Bond::Horizontal { x, y, n } => h
            .absorb(tag::ANISO_HORIZONTAL)
            .absorb_i64(x)
            .absorb_i64(y)
            .absorb_i64(n),
    }
    .uniform()
}

pub fn aniso_bond_open(seed: u64, config: &AnisoConfig, bond: Bond) -> Result<bool> {
    let p = match bond {
        Bond::Vertical { .. } => config.sigma,
        Bond::Horizontal { n, .. } => {
            if n < 1 {
                return Err(invalid("n", format!("horizontal length {n} must be at least 1")));
            }
            config.q_k(n)
        }
    };
    Ok(bond_uniform(seed, bond) < p)
}

/// Induced edge `<(x,y), (x+n,y+1)>`.
pub fn induced_is_open(seed: u64, config: &AnisoConfig, x: i64, y: i64, n: i64) -> Result<bool> {
    Ok(aniso_bond_open(seed, config, Bond::Horizontal { x, y, n })?
        && aniso_bond_open(seed, config, Bond::Vertical { x: x + n, y })?)
}

/// The induced model as a lazily sampled 1d field.
#[derive(Clone, Debug)]
pub struct AnisoField {
    pub seed: u64,
    pub config: AnisoConfig,
}

impl EdgeField for AnisoField {
    fn is_open_1d(&self, x: i64, t: u64, y: i64) -> bool {
        y >= 1 && induced_is_open(self.seed, &self.config, x, t as i64, y).unwrap_or(false)
    }

    fn range(&self) -> Truncation {
        self.config.k
    }
}

/// Lifts an induced path, given as `(x, t, n)` steps, to quadrant bonds:
/// each step becomes its horizontal bond followed by its vertical bond.
pub fn lift_path(steps: &[(i64, u64, i64)]) -> Vec<Bond> {
    steps
        .iter()
        .flat_map(|&(x, t, n)| {
            [
                Bond::Horizontal { x, y: t as i64, n },
                Bond::Vertical { x: x + n, y: t as i64 },
            ]
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnisoOutcome {
    pub survived: bool,
    /// Induced path `(x, t, n)` from the origin to layer `T`, when it exists.
    pub induced_path: Option<Vec<(i64, u64, i64)>>,
    /// Lifted bond list (horizontal, vertical, horizontal, ...).
    pub certificate: Option<Vec<Bond>>,
    /// Every lifted bond re-checked open in the quadrant model, and the bond
    /// list forms an oriented path from the origin.
    pub certificate_valid: bool,
}

/// Cluster exploration of a 1d field over the given displacements, keeping
/// the first discovered parent of every reached vertex.
pub fn explore_with_parents<F: EdgeField + ?Sized>(
    field: &F,
    support: &[i64],
    horizon: u64,
) -> Option<Vec<(i64, u64, i64)>> {
    let mut layers: Vec<Vec<(i64, usize, i64)>> = vec![vec![(0, 0, 0)]];
    for t in 0..horizon {
        let cur = &layers[t as usize];
        let mut next: Vec<(i64, usize, i64)> = Vec::new();
        for (pi, &(x, _, _)) in cur.iter().enumerate() {
            for &n in support {
                if field.is_open_1d(x, t, n) {
                    next.push((x + n, pi, n));
                }
            }
        }
        // Stable sort keeps the first-found parent for each target.
        next.sort_by_key(|e| e.0);
        next.dedup_by_key(|e| e.0);
        if next.is_empty() {
            return None;
        }
        layers.push(next);
    }
    let mut path = Vec::with_capacity(horizon as usize);
    let mut idx = 0usize;
    for t in (1..=horizon as usize).rev() {
        let (x, parent, n) = layers[t][idx];
        path.push((x - n, t as u64 - 1, n));
        idx = parent;
    }
    path.reverse();
    Some(path)
}

/// Checks that `bonds` is an open oriented path in the quadrant from the origin.
pub fn validate_certificate(seed: u64, config: &AnisoConfig, bonds: &[Bond]) -> bool {
    let mut pos = (0i64, 0i64);
    for &b in bonds {
        let (start, end) = match b {
            Bond::Vertical { x, y } => ((x, y), (x, y + 1)),
            Bond::Horizontal { x, y, n } => ((x, y), (x + n, y)),
        };
        if start != pos || !aniso_bond_open(seed, config, b).unwrap_or(false) {
            return false;
        }
        pos = end;
    }
    true
}

/// Explores the induced model to layer `horizon` using `field` (normally the
/// true [`AnisoField`]) and certifies survival in the quadrant model.
pub fn explore_aniso_on<F: EdgeField + ?Sized>(
    field: &F,
    seed: u64,
    config: &AnisoConfig,
    horizon: u64,
) -> Result<AnisoOutcome> {
    if horizon < 1 {
        return Err(invalid("horizon", "must be at least 1"));
    }
    let support = config.support()?;
    let induced_path = explore_with_parents(field, &support, horizon);
    let certificate = induced_path.as_deref().map(lift_path);
    let certificate_valid = certificate
        .as_deref()
        .map_or(true, |c| validate_certificate(seed, config, c));
    Ok(AnisoOutcome {
        survived: induced_path.is_some(),
        induced_path,
        certificate,
        certificate_valid,
    })
}

pub fn explore_aniso(seed: u64, config: &AnisoConfig, horizon: u64) -> Result<AnisoOutcome> {
    let field = AnisoField {
        seed,
        config: config.clone(),
    };
    explore_aniso_on(&field, seed, config, horizon)
}

/// Survival estimate of the induced model to layer `horizon` over replicas `1..=n`.
pub fn aniso_survival(
    config: &AnisoConfig,
    horizon: u64,
    n: u64,
    seed0: u64,
    confidence: f64,
) -> Result<(SurvivalEstimate, Vec<bool>)> {
    use rayon::prelude::*;
    if n == 0 {
        return Err(Error::NoReplicas);
    }
    let support = config.support()?;
    let flags: Vec<bool> = (1..=n)
        .into_par_iter()
        .map(|i| {
            let field = AnisoField {
                seed: replica_seed(seed0, i),
                config: config.clone(),
            };
            explore_with_parents(&field, &support, horizon).is_some()
        })
        .collect();
    let hits = flags.iter().filter(|&&f| f).count() as u64;
    let est = SurvivalEstimate::from_counts(hits, n, horizon as f64, config.k, seed0, confidence)?;
    Ok((est, flags))
}

/// Block-construction parameters for the induced family `p_n = sigma q_n`.
pub fn derive_aniso_parameters(config: &AnisoConfig, epsilon: f64, delta: f64) -> Result<RenormParams> {
    if config.sigma <= epsilon {
        return Err(Error::InsufficientSupport {
            found: 0,
            wanted: 1,
            threshold: epsilon,
            bound: config.q.scan_bound(),
        });
    }
    let threshold = epsilon / config.sigma;
    derive_with(epsilon, delta, BinomialCondition::DryLattice, |m| {
        support_above(&config.q, threshold, m)
    })
}
