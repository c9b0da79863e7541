//! Good-vertex exploration of the coarse lattice.
//!
//! Coarse vertices are examined in increasing `(j, i)` order from the
//! exterior boundary of the good set `A`, skipping the bad set `B`. Each
//! examined vertex `(i,j)` is anchored at the leftmost fine vertex of
//! `I_{i,j}` already known to be reached from the origin; the anchor's half
//! of the interval picks the seed event (`T+` for the left half including
//! the midpoint, `T-` for the right half) so that both target segments land
//! inside the children's intervals.
//!
//! Only edges examined by seed events are ever sampled, and the set of
//! reached fine vertices is grown from those edges alone.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ConnectionFamily, Sign, TruncatedFamily};
use crate::renorm::coarse::{interval_at, z_unchecked, CoarseVertex};
use crate::renorm::events::evaluate;
use crate::renorm::{derive_parameters, RenormParams};
use crate::sampler::{EdgeField, SeededConfig};

pub const DEFAULT_J_MAX: i64 = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    FrontierExhausted,
    LevelReached,
    OriginBad,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::FrontierExhausted => "frontier-exhausted",
            StopReason::LevelReached => "level-reached",
            StopReason::OriginBad => "origin-bad",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "frontier-exhausted" => Some(StopReason::FrontierExhausted),
            "level-reached" => Some(StopReason::LevelReached),
            "origin-bad" => Some(StopReason::OriginBad),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub n: u64,
    pub vertex: CoarseVertex,
    pub anchor: Option<i64>,
    pub sign: Sign,
    pub good: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplorationTrace {
    pub steps: Vec<TraceStep>,
    pub good: BTreeSet<CoarseVertex>,
    pub bad: BTreeSet<CoarseVertex>,
    pub stop: StopReason,
    pub j_max: i64,
    pub edges_queried: u64,
}

impl ExplorationTrace {
    /// Rebuilds `A` and `B` from the step flags.
    pub fn from_steps(steps: Vec<TraceStep>, stop: StopReason, j_max: i64) -> Self {
        let mut good = BTreeSet::new();
        let mut bad = BTreeSet::new();
        for s in &steps {
            if s.good {
                good.insert(s.vertex);
            } else {
                bad.insert(s.vertex);
            }
        }
        Self {
            steps,
            good,
            bad,
            stop,
            j_max,
            edges_queried: 0,
        }
    }

    pub fn max_good_level(&self) -> Option<i64> {
        self.good.iter().map(|v| v.j).max()
    }

    pub fn reached_level(&self, level: i64) -> bool {
        self.max_good_level().map_or(false, |j| j >= level)
    }

    /// Line-oriented text form: comment header, then `n i j u sign good`
    /// per step (`u` is `-` when absent, `good` is 0/1).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# truncperc-trace v1");
        let _ = writeln!(s, "# stop={} j_max={}", self.stop.as_str(), self.j_max);
        let _ = writeln!(s, "# n i j u sign good");
        for st in &self.steps {
            let u = st.anchor.map_or_else(|| "-".to_string(), |u| u.to_string());
            let _ = writeln!(
                s,
                "{} {} {} {} {} {}",
                st.n,
                st.vertex.i,
                st.vertex.j,
                u,
                st.sign.symbol(),
                st.good as u8
            );
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut steps = Vec::new();
        let mut stop = None;
        let mut j_max = DEFAULT_J_MAX;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |reason: String| Error::TraceFormat { line: idx + 1, reason };
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                for tok in comment.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("stop=") {
                        stop = Some(StopReason::parse(v).ok_or_else(|| err(format!("bad stop `{v}`")))?);
                    } else if let Some(v) = tok.strip_prefix("j_max=") {
                        j_max = v.parse().map_err(|_| err(format!("bad j_max `{v}`")))?;
                    }
                }
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 6 {
                return Err(err(format!("expected 6 fields, got {}", f.len())));
            }
            let int = |s: &str, what: &str| -> Result<i64> {
                s.parse().map_err(|_| err(format!("bad {what} `{s}`")))
            };
            let n = int(f[0], "n")?;
            let vertex = CoarseVertex::new(int(f[1], "i")?, int(f[2], "j")?)
                .map_err(|e| err(e.to_string()))?;
            let anchor = if f[3] == "-" { None } else { Some(int(f[3], "u")?) };
            let sign = match f[4] {
                "-" => Sign::Minus,
                "+" => Sign::Plus,
                other => return Err(err(format!("bad sign `{other}`"))),
            };
            let good = match f[5] {
                "0" => false,
                "1" => true,
                other => return Err(err(format!("bad good flag `{other}`"))),
            };
            if n < 0 || n as usize != steps.len() {
                return Err(err(format!("step index {n} out of sequence")));
            }
            steps.push(TraceStep { n: n as u64, vertex, anchor, sign, good });
        }
        let stop = match stop {
            Some(s) => s,
            None => match steps.first() {
                Some(s) if !s.good => StopReason::OriginBad,
                _ => StopReason::FrontierExhausted,
            },
        };
        Ok(Self::from_steps(steps, stop, j_max))
    }
}

/// Fine vertices known to be reached from the origin, per layer.
#[derive(Default, Debug)]
pub(crate) struct ReachedSet {
    layers: BTreeMap<u64, BTreeSet<i64>>,
}

impl ReachedSet {
    pub fn insert(&mut self, x: i64, t: u64) -> bool {
        self.layers.entry(t).or_default().insert(x)
    }

    pub fn contains(&self, x: i64, t: u64) -> bool {
        self.layers.get(&t).map_or(false, |s| s.contains(&x))
    }

    pub fn leftmost_in(&self, lo: i64, hi: i64, t: u64) -> Option<i64> {
        self.layers.get(&t)?.range(lo..=hi).next().copied()
    }
}

/// Runs the exploration on an arbitrary 1d field. The field should be
/// truncated at `params.k_star`; events never query longer edges anyway.
pub fn explore_field<F: EdgeField + ?Sized>(
    field: &F,
    params: &RenormParams,
    j_max: i64,
) -> ExplorationTrace {
    let mut good: BTreeSet<CoarseVertex> = BTreeSet::new();
    let mut bad: BTreeSet<CoarseVertex> = BTreeSet::new();
    let mut frontier: BTreeSet<CoarseVertex> = BTreeSet::new();
    let mut reached = ReachedSet::default();
    let mut steps = Vec::new();
    let mut edges_queried = 0u64;
    reached.insert(0, 0);

    let mut next = Some((CoarseVertex::ORIGIN, 0i64, Sign::Minus));
    let stop = loop {
        let Some((x, u, sign)) = next.take() else {
            break StopReason::FrontierExhausted;
        };
        let t = 2 * x.j as u64;
        let outcome = evaluate(field, u, t, sign, params);
        edges_queried += outcome.queried.len() as u64;
        for (e, open) in &outcome.queried {
            if *open && reached.contains(e.x, e.t) {
                let (tx, tt) = e.target();
                reached.insert(tx, tt);
            }
        }
        let n = steps.len() as u64;
        steps.push(TraceStep {
            n,
            vertex: x,
            anchor: Some(u),
            sign,
            good: outcome.occurred,
        });
        if outcome.occurred {
            good.insert(x);
            for c in x.children() {
                if !good.contains(&c) && !bad.contains(&c) {
                    frontier.insert(c);
                }
            }
            if x.j >= j_max {
                break StopReason::LevelReached;
            }
        } else {
            bad.insert(x);
            if n == 0 {
                break StopReason::OriginBad;
            }
        }
        if let Some(v) = frontier.pop_first() {
            let z = z_unchecked(params, v);
            let iv = interval_at(params, v, z);
            let u = reached
                .leftmost_in(iv.lo, iv.hi, iv.layer)
                .expect("frontier vertices have a reached vertex in their interval");
            let sign = if u <= z { Sign::Plus } else { Sign::Minus };
            next = Some((v, u, sign));
        }
    };
    ExplorationTrace {
        steps,
        good,
        bad,
        stop,
        j_max,
        edges_queried,
    }
}

/// Derives parameters for `family`, truncates it at `k_star` and explores
/// with the given seed.
pub fn explore_renormalized(
    seed: u64,
    family: &ConnectionFamily,
    epsilon: f64,
    delta: f64,
    j_max: i64,
) -> Result<(RenormParams, ExplorationTrace)> {
    let params = derive_parameters(family, epsilon, delta)?;
    let config = SeededConfig::new(
        seed,
        TruncatedFamily::untruncated(family.clone()).truncate(params.k_star)?,
    );
    let trace = explore_field(&config, &params, j_max);
    Ok((params, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_open_reaches_level() {
        let fam = ConnectionFamily::dense(1.0).unwrap();
        let (_, tr) = explore_renormalized(1, &fam, 0.5, 0.3, 4).unwrap();
        assert_eq!(tr.stop, StopReason::LevelReached);
        assert!(tr.bad.is_empty());
        assert_eq!(tr.max_good_level(), Some(4));
        // Levels 0..=3 fully explored (1+2+3+4 vertices), then the leftmost level-4 vertex.
        assert_eq!(tr.steps.len(), 11);
    }

    #[test]
    fn all_closed_origin_bad() {
        let zero = ConnectionFamily::table_1d(&[(1, 0.0)]).unwrap();
        let params = derive_parameters(&ConnectionFamily::dense(0.6).unwrap(), 0.5, 0.3).unwrap();
        let cfg = SeededConfig::new(0, TruncatedFamily::untruncated(zero));
        let tr = explore_field(&cfg, &params, 10);
        assert_eq!(tr.stop, StopReason::OriginBad);
        assert_eq!(tr.steps.len(), 1);
        assert!(!tr.steps[0].good);
        assert_eq!(tr.steps[0].vertex, CoarseVertex::ORIGIN);
    }

    #[test]
    fn steps_follow_order_and_text_roundtrips() {
        let fam = ConnectionFamily::dense(0.5).unwrap();
        let (_, tr) = explore_renormalized(42, &fam, 0.45, 0.2, 6).unwrap();
        let text = tr.to_text();
        let back = ExplorationTrace::from_text(&text).unwrap();
        assert_eq!(back.steps, tr.steps);
        assert_eq!(back.good, tr.good);
        assert_eq!(back.bad, tr.bad);
        assert_eq!(back.stop, tr.stop);
        assert!(tr.good.is_disjoint(&tr.bad));
    }

    #[test]
    fn trace_parse_errors() {
        assert!(matches!(
            ExplorationTrace::from_text("0 0 0 0 - 1\n1 1 1 5 * 1\n"),
            Err(Error::TraceFormat { line: 2, .. })
        ));
        assert!(ExplorationTrace::from_text("0 1 0 0 - 1\n").is_err());
        assert!(ExplorationTrace::from_text("1 0 0 0 - 1\n").is_err());
    }
}
