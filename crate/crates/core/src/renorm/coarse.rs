//! The coarse lattice `G*`: vertices `(i, j)` with `i + j` even, oriented
//! edges to `(i -+ 1, j + 1)`, and the fine-lattice intervals they stand for.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::renorm::RenormParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoarseVertex {
    pub i: i64,
    pub j: i64,
}

impl CoarseVertex {
    pub fn new(i: i64, j: i64) -> Result<Self> {
        if j < 0 || (i + j).rem_euclid(2) != 0 {
            return Err(Error::Parity { i, j });
        }
        Ok(Self { i, j })
    }

    pub const ORIGIN: CoarseVertex = CoarseVertex { i: 0, j: 0 };

    pub fn children(self) -> [CoarseVertex; 2] {
        [
            CoarseVertex { i: self.i - 1, j: self.j + 1 },
            CoarseVertex { i: self.i + 1, j: self.j + 1 },
        ]
    }

    pub fn parents(self) -> [CoarseVertex; 2] {
        [
            CoarseVertex { i: self.i - 1, j: self.j - 1 },
            CoarseVertex { i: self.i + 1, j: self.j - 1 },
        ]
    }
}

/// `(i1,j1) < (i2,j2)` iff `j1 < j2`, or `j1 = j2` and `i1 < i2`.
impl Ord for CoarseVertex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.j.cmp(&other.j).then(self.i.cmp(&other.i))
    }
}

impl PartialOrd for CoarseVertex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for CoarseVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

/// Closed fine interval `[lo, hi] x {layer}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FineInterval {
    pub lo: i64,
    pub hi: i64,
    pub layer: u64,
}

impl FineInterval {
    pub fn contains(&self, x: i64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// `z_{i,j} = j a_{L1} + (i+j)/2 a_{L2} + (j-i)/2 a_1`.
pub fn z_coordinate(params: &RenormParams, v: CoarseVertex) -> Result<i64> {
    let v = CoarseVertex::new(v.i, v.j)?;
    Ok(z_unchecked(params, v))
}

pub(crate) fn z_unchecked(params: &RenormParams, v: CoarseVertex) -> i64 {
    v.j * params.a_l1() as i64
        + (v.i + v.j) / 2 * params.a_l2() as i64
        + (v.j - v.i) / 2 * params.a1() as i64
}

/// `I_{i,j} = [z - R, z + R] x {2j}`.
pub fn interval_of(params: &RenormParams, v: CoarseVertex) -> Result<FineInterval> {
    let z = z_coordinate(params, v)?;
    Ok(interval_at(params, v, z))
}

pub(crate) fn interval_at(params: &RenormParams, v: CoarseVertex, z: i64) -> FineInterval {
    let r = params.r as i64;
    FineInterval {
        lo: z - r,
        hi: z + r,
        layer: 2 * v.j as u64,
    }
}

/// `{(i,j) not in S : (i-1,j-1) in S or (i+1,j-1) in S}`.
pub fn exterior_boundary(set: &BTreeSet<CoarseVertex>) -> BTreeSet<CoarseVertex> {
    set.iter()
        .flat_map(|v| v.children())
        .filter(|c| !set.contains(c))
        .collect()
}

/// Whether every vertex of `set` is reachable from the origin by oriented
/// coarse edges inside `set` (empty sets count as connected).
pub fn is_connected_from_origin(set: &BTreeSet<CoarseVertex>) -> bool {
    if set.is_empty() {
        return true;
    }
    if !set.contains(&CoarseVertex::ORIGIN) {
        return false;
    }
    // Ascending j order visits parents before children.
    let mut seen = BTreeSet::new();
    seen.insert(CoarseVertex::ORIGIN);
    for v in set.iter().skip_while(|v| **v == CoarseVertex::ORIGIN) {
        if v.parents().iter().any(|p| seen.contains(p)) {
            seen.insert(*v);
        } else if *v != CoarseVertex::ORIGIN {
            return false;
        }
    }
    true
}
