//! Independent re-check of an exploration trace against the field it was
//! produced from.
//!
//! The verifier replays the recorded steps, re-evaluating each seed event at
//! the recorded anchor while logging every edge it examines, and checks after
//! every step:
//!
//! * the good set `A_n` is connected from the origin in `G*`;
//! * `B_n` lies in the exterior boundary of `A_n` and is disjoint from it;
//! * no fine edge is examined by two different steps;
//! * every vertex of `(boundary A_n) \ B_n` has an open path from the origin
//!   into its interval, using examined open edges only;
//! * each step picks the minimal boundary vertex, anchors inside its interval
//!   at a reached vertex, steers by the anchor's half, and records the event
//!   outcome faithfully;
//! * examined displacements never exceed `k_star`.
//!
//! Interval disjointness is checked once over every coarse vertex the trace
//! touches.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lattice::Sign;
use crate::renorm::coarse::{exterior_boundary, interval_at, is_connected_from_origin, z_unchecked, CoarseVertex};
use crate::renorm::events::{evaluate, EdgeKey};
use crate::renorm::explore::{ExplorationTrace, ReachedSet};
use crate::renorm::RenormParams;
use crate::sampler::EdgeField;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// (a) `A_n` connected.
    Connected,
    /// (b) `B_n` inside the exterior boundary of `A_n`, disjoint from `A_n`.
    BadInBoundary,
    /// (c) no edge examined at two steps.
    EdgeFreshness,
    /// (d) reachability of every open boundary vertex's interval.
    Reachability,
    /// Step vertex is the minimal open boundary vertex.
    Ordering,
    /// Anchor lies in the interval, is reached, and the sign matches its half.
    Anchor,
    /// Recorded good flag disagrees with the re-evaluated event.
    EventMismatch,
    IntervalOverlap,
    RangeExceeded,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::Connected => "connected",
            Condition::BadInBoundary => "bad-in-boundary",
            Condition::EdgeFreshness => "edge-freshness",
            Condition::Reachability => "reachability",
            Condition::Ordering => "ordering",
            Condition::Anchor => "anchor",
            Condition::EventMismatch => "event-mismatch",
            Condition::IntervalOverlap => "interval-overlap",
            Condition::RangeExceeded => "range-exceeded",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub step: u64,
    pub condition: Condition,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub steps_checked: u64,
    pub edges_checked: u64,
    pub violations: Vec<Violation>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first(&self) -> Option<&Violation> {
        self.violations.iter().min_by_key(|v| v.step)
    }

    pub fn count(&self, c: Condition) -> usize {
        self.violations.iter().filter(|v| v.condition == c).count()
    }
}

/// Open examined edges and the vertices they connect to the origin.
#[derive(Default)]
struct OpenGraph {
    out: HashMap<(i64, u64), Vec<(i64, u64)>>,
    reached: ReachedSet,
}

impl OpenGraph {
    fn new() -> Self {
        let mut g = Self::default();
        g.reached.insert(0, 0);
        g
    }

    fn add(&mut self, e: EdgeKey) {
        let from = (e.x, e.t);
        let to = e.target();
        self.out.entry(from).or_default().push(to);
        if self.reached.contains(from.0, from.1) {
            let mut stack = vec![to];
            while let Some(v) = stack.pop() {
                if self.reached.insert(v.0, v.1) {
                    if let Some(next) = self.out.get(&v) {
                        stack.extend(next.iter().copied());
                    }
                }
            }
        }
    }
}

pub fn verify_trace<F: EdgeField + ?Sized>(
    trace: &ExplorationTrace,
    field: &F,
    params: &RenormParams,
) -> VerificationReport {
    let mut report = VerificationReport::default();
    let mut push = |step: u64, condition: Condition, detail: String| {
        report.violations.push(Violation { step, condition, detail });
    };
    let mut good: BTreeSet<CoarseVertex> = BTreeSet::new();
    let mut bad: BTreeSet<CoarseVertex> = BTreeSet::new();
    let mut log: HashMap<EdgeKey, u64> = HashMap::new();
    let mut graph = OpenGraph::new();
    let mut touched: HashSet<CoarseVertex> = HashSet::new();
    let mut edges_checked = 0u64;

    for st in &trace.steps {
        let n = st.n;
        let x = st.vertex;
        touched.insert(x);

        // Which vertex should be examined now.
        let expected = if n == 0 {
            Some(CoarseVertex::ORIGIN)
        } else {
            let open: BTreeSet<CoarseVertex> =
                exterior_boundary(&good).difference(&bad).copied().collect();
            open.first().copied()
        };
        if expected != Some(x) {
            push(n, Condition::Ordering, format!("examined {x}, expected {expected:?}"));
        }

        let z = z_unchecked(params, x);
        let iv = interval_at(params, x, z);
        let Some(u) = st.anchor else {
            push(n, Condition::Anchor, "missing anchor".into());
            continue;
        };
        if n == 0 {
            if u != 0 || st.sign != Sign::Minus {
                push(n, Condition::Anchor, format!("origin step must anchor at 0 with T-, got {u} {}", st.sign.symbol()));
            }
        } else {
            if !iv.contains(u) {
                push(n, Condition::Anchor, format!("anchor {u} outside [{}, {}]", iv.lo, iv.hi));
            } else if !graph.reached.contains(u, iv.layer) {
                push(n, Condition::Reachability, format!("anchor ({u},{}) not reached by examined open edges", iv.layer));
            }
            let want = if u <= z { Sign::Plus } else { Sign::Minus };
            if st.sign != want {
                push(n, Condition::Anchor, format!("anchor {u} vs midpoint {z} needs sign {}", want.symbol()));
            }
        }

        let outcome = evaluate(field, u, iv.layer, st.sign, params);
        edges_checked += outcome.queried.len() as u64;
        for (e, open) in &outcome.queried {
            if e.y.unsigned_abs() > params.k_star {
                push(n, Condition::RangeExceeded, format!("edge {e:?} longer than k_star {}", params.k_star));
            }
            if let Some(prev) = log.insert(*e, n) {
                push(n, Condition::EdgeFreshness, format!("edge {e:?} already examined at step {prev}"));
            }
            if *open {
                graph.add(*e);
            }
        }
        if outcome.occurred != st.good {
            push(n, Condition::EventMismatch, format!("recorded good={} but event occurred={}", st.good, outcome.occurred));
        }

        if st.good {
            good.insert(x);
        } else {
            bad.insert(x);
        }

        if !is_connected_from_origin(&good) {
            push(n, Condition::Connected, "good set not connected from the origin".into());
        }
        let boundary = exterior_boundary(&good);
        // A bad origin ends the recursion with A empty; (b) only constrains later steps.
        let origin_bad = n == 0 && !st.good;
        if let Some(b) = bad
            .iter()
            .find(|b| !origin_bad && (!boundary.contains(b) || good.contains(b)))
        {
            push(n, Condition::BadInBoundary, format!("bad vertex {b} outside the exterior boundary"));
        }
        for v in boundary.difference(&bad) {
            touched.insert(*v);
            let vi = interval_at(params, *v, z_unchecked(params, *v));
            if graph.reached.leftmost_in(vi.lo, vi.hi, vi.layer).is_none() {
                push(n, Condition::Reachability, format!("no open path from the origin into I{v}"));
            }
        }
        report.steps_checked += 1;
    }

    let mut by_layer: HashMap<i64, Vec<i64>> = HashMap::new();
    for v in &touched {
        by_layer.entry(v.j).or_default().push(z_unchecked(params, *v));
    }
    let r = params.r as i64;
    for (j, mut zs) in by_layer {
        zs.sort_unstable();
        for w in zs.windows(2) {
            if w[0] + r >= w[1] - r {
                push(0, Condition::IntervalOverlap, format!("intervals at z={} and z={} on level {j} overlap", w[0], w[1]));
            }
        }
    }
    report.edges_checked = edges_checked;
    report.violations.sort_by_key(|v| v.step);
    report
}
