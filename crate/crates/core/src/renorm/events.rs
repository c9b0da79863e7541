//! Two-layer seed events `T-` and `T+`.
//!
//! From a base `(x, t)`, an index `i` in the scan range contributes through
//! the first edge `(x,t) -> (x+i,t+1)`; from there `R_i` needs the short hop
//! `a_1` and `S_i` the long hop `a_{L2}`. The event occurs when some `R_i`
//! and some `S_i` hold. `T-` scans `i in [1, a_{L1}]`, `T+` scans
//! `i in [a_{L1}+1, a_{2L1}]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Sign, Vertex};
use crate::renorm::RenormParams;
use crate::sampler::EdgeField;

/// A 1d edge `<(x,t), (x+y,t+1)>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeKey {
    pub x: i64,
    pub t: u64,
    pub y: i64,
}

impl EdgeKey {
    pub fn target(&self) -> (i64, u64) {
        (self.x + self.y, self.t + 1)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventOutcome {
    pub occurred: bool,
    /// Layer `t+2` positions reached through some `R_i`.
    pub short_hits: Vec<i64>,
    /// Layer `t+2` positions reached through some `S_i`.
    pub long_hits: Vec<i64>,
    /// Every edge examined, with its state, in query order.
    pub queried: Vec<(EdgeKey, bool)>,
}

impl EventOutcome {
    /// All reached layer `t+2` positions.
    pub fn witnesses(&self) -> impl Iterator<Item = i64> + '_ {
        self.short_hits.iter().chain(&self.long_hits).copied()
    }
}

/// Index range scanned by the event of the given sign.
pub fn scan_range(params: &RenormParams, sign: Sign) -> std::ops::RangeInclusive<u64> {
    match sign {
        Sign::Minus => 1..=params.a_l1(),
        Sign::Plus => params.a_l1() + 1..=params.a_2l1(),
    }
}

/// Target segments `([lo, hi], [lo, hi])` on layer `t+2` guaranteed by the event.
pub fn target_segments(params: &RenormParams, x: i64, sign: Sign) -> ((i64, i64), (i64, i64)) {
    let a1 = params.a1() as i64;
    let al1 = params.a_l1() as i64;
    let a2l1 = params.a_2l1() as i64;
    let al2 = params.a_l2() as i64;
    match sign {
        Sign::Minus => ((x + 2 * a1, x + a1 + al1), (x + a1 + al2, x + al1 + al2)),
        Sign::Plus => ((x + a1 + al1, x + a1 + a2l1), (x + al2 + al1, x + al2 + a2l1)),
    }
}

/// Evaluates the event at `(x, t)`. Second-layer edges out of `(x+i, t+1)`
/// are examined only when the first edge is open.
pub fn evaluate<F: EdgeField + ?Sized>(
    field: &F,
    x: i64,
    t: u64,
    sign: Sign,
    params: &RenormParams,
) -> EventOutcome {
    let a1 = params.a1() as i64;
    let al2 = params.a_l2() as i64;
    let mut out = EventOutcome::default();
    for i in scan_range(params, sign) {
        let i = i as i64;
        let first = EdgeKey { x, t, y: i };
        let open = field.is_open_1d(x, t, i);
        out.queried.push((first, open));
        if !open {
            continue;
        }
        let mid = x + i;
        for (hop, hits) in [(a1, &mut out.short_hits), (al2, &mut out.long_hits)] {
            let e = EdgeKey { x: mid, t: t + 1, y: hop };
            let o = field.is_open_1d(mid, t + 1, hop);
            out.queried.push((e, o));
            if o {
                hits.push(mid + hop);
            }
        }
    }
    out.occurred = !out.short_hits.is_empty() && !out.long_hits.is_empty();
    out
}

/// Event `T-` or `T+` at a 1d base vertex.
pub fn event_t<F: EdgeField + ?Sized>(
    field: &F,
    base: &Vertex,
    sign: Sign,
    params: &RenormParams,
) -> Result<EventOutcome> {
    if base.x.len() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: base.x.len(),
        });
    }
    Ok(evaluate(field, base.x[0], base.t, sign, params))
}
