//! The oriented lattice `Z^d x Z_+`, connection-probability families and
//! their truncations.
//!
//! A family is described by a [`FamilySpec`] (the serialized, key-value form)
//! and validated into a [`ConnectionFamily`]. Truncation wraps a family with a
//! range `k`; the untruncated case is an explicit tag rather than a large
//! number so that coupling code can branch on it exactly.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{invalid, Error, Result};

/// Spatial coordinate vector; inline for d <= 4.
pub type Point = SmallVec<[i64; 4]>;

/// Default per-axis bound for support scans of families without an analytic
/// support guarantee.
pub const DEFAULT_SCAN_BOUND: u64 = 1_000_000;

pub fn point(coords: &[i64]) -> Point {
    Point::from_slice(coords)
}

pub fn sup_norm(y: &[i64]) -> u64 {
    y.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vertex {
    pub x: Point,
    pub t: u64,
}

impl Vertex {
    pub fn new(x: &[i64], t: u64) -> Self {
        Self { x: point(x), t }
    }

    pub fn origin(d: usize) -> Self {
        Self {
            x: Point::from_elem(0, d),
            t: 0,
        }
    }
}

/// Edge `<(x,t), (x+y,t+1)>`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrientedEdge {
    pub from: Vertex,
    pub displacement: Point,
}

impl OrientedEdge {
    pub fn new(from: Vertex, displacement: &[i64]) -> Self {
        Self {
            from,
            displacement: point(displacement),
        }
    }

    pub fn to(&self) -> Vertex {
        let x = self
            .from
            .x
            .iter()
            .zip(&self.displacement)
            .map(|(a, b)| a + b)
            .collect();
        Vertex {
            x,
            t: self.from.t + 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub y: Vec<i64>,
    pub p: f64,
}

/// Shape of a displacement profile. Values are probabilities for
/// [`ConnectionFamily`] and rates for contact-process rate families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    /// Constant `level` on every admissible displacement.
    DenseEpsilon { level: f64 },
    /// `level` on displacements whose coordinates are all multiples of `stride`.
    SparseSupport { stride: u64, level: f64 },
    /// `c / |y|_inf^s`, capped at 1 for probability families.
    PowerLaw { c: f64, s: f64 },
    /// Explicit finite map; absent displacements have value 0.
    ExplicitTable { entries: Vec<TableEntry> },
}

/// Serialized family description.
///
/// `one_sided` (1d only) zeroes every displacement `n <= 0`; it defaults to
/// true when `d = 1`. `include_zero` admits the `y = 0` displacement for the
/// analytic shapes (tables list it explicitly instead).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(flatten)]
    pub shape: Shape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub one_sided: Option<bool>,
    #[serde(default)]
    pub include_zero: bool,
    #[serde(default = "default_scan_bound")]
    pub scan_bound: u64,
}

fn default_d() -> usize {
    1
}

fn default_scan_bound() -> u64 {
    DEFAULT_SCAN_BOUND
}

impl FamilySpec {
    pub fn one_sided(shape: Shape) -> Self {
        Self {
            d: 1,
            shape,
            one_sided: Some(true),
            include_zero: false,
            scan_bound: DEFAULT_SCAN_BOUND,
        }
    }
}

/// Validated displacement profile shared by probability and rate families.
#[derive(Clone, Debug)]
pub(crate) struct Profile {
    pub d: usize,
    pub shape: Shape,
    pub one_sided: bool,
    pub include_zero: bool,
    pub scan_bound: u64,
    pub cap_at_one: bool,
    table: HashMap<Point, f64>,
}

impl Profile {
    pub fn from_spec(spec: &FamilySpec, cap_at_one: bool) -> Result<Self> {
        if spec.d == 0 {
            return Err(invalid("d", "dimension must be at least 1"));
        }
        let one_sided = spec.one_sided.unwrap_or(spec.d == 1);
        if one_sided && spec.d != 1 {
            return Err(invalid("one_sided", "only available for d = 1"));
        }
        if spec.scan_bound == 0 {
            return Err(invalid("scan_bound", "must be positive"));
        }
        let upper = if cap_at_one { 1.0 } else { f64::INFINITY };
        let check = |name: &'static str, v: f64| -> Result<()> {
            if v.is_nan() || v < 0.0 || v > upper {
                Err(invalid(name, format!("{v} outside [0, {upper}]")))
            } else {
                Ok(())
            }
        };
        let mut table = HashMap::new();
        match &spec.shape {
            Shape::DenseEpsilon { level } => check("level", *level)?,
            Shape::SparseSupport { stride, level } => {
                check("level", *level)?;
                if *stride == 0 {
                    return Err(invalid("stride", "must be positive"));
                }
            }
            Shape::PowerLaw { c, s } => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(invalid("c", format!("{c} must be finite and non-negative")));
                }
                if !s.is_finite() {
                    return Err(invalid("s", "must be finite"));
                }
            }
            Shape::ExplicitTable { entries } => {
                for e in entries {
                    if e.y.len() != spec.d {
                        return Err(Error::DimensionMismatch {
                            expected: spec.d,
                            got: e.y.len(),
                        });
                    }
                    check("p", e.p)?;
                    if table.insert(point(&e.y), e.p).is_some() {
                        return Err(invalid("entries", format!("duplicate displacement {:?}", e.y)));
                    }
                }
            }
        }
        Ok(Self {
            d: spec.d,
            shape: spec.shape.clone(),
            one_sided,
            include_zero: spec.include_zero,
            scan_bound: spec.scan_bound,
            cap_at_one,
            table,
        })
    }

    pub fn spec(&self) -> FamilySpec {
        FamilySpec {
            d: self.d,
            shape: self.shape.clone(),
            one_sided: Some(self.one_sided),
            include_zero: self.include_zero,
            scan_bound: self.scan_bound,
        }
    }

    fn admissible(&self, y: &[i64]) -> bool {
        if self.one_sided && y[0] <= 0 {
            return false;
        }
        let zero = y.iter().all(|&c| c == 0);
        !zero || self.include_zero || matches!(self.shape, Shape::ExplicitTable { .. })
    }

    /// Untruncated value at `y`; `y` must have length `d`.
    pub fn value(&self, y: &[i64]) -> f64 {
        if !self.admissible(y) {
            return 0.0;
        }
        match &self.shape {
            Shape::DenseEpsilon { level } => *level,
            Shape::SparseSupport { stride, level } => {
                let s = *stride as i64;
                if y.iter().all(|c| c % s == 0) {
                    *level
                } else {
                    0.0
                }
            }
            Shape::PowerLaw { c, s } => {
                let n = sup_norm(y);
                let v = if n == 0 { f64::INFINITY } else { c / (n as f64).powf(*s) };
                if self.cap_at_one {
                    v.min(1.0)
                } else {
                    v
                }
            }
            Shape::ExplicitTable { .. } => self.table.get(y).copied().unwrap_or(0.0),
        }
    }

    /// Whether the set `{y : value(y) > 0}` is infinite.
    pub fn has_infinite_support(&self) -> bool {
        match &self.shape {
            Shape::DenseEpsilon { level } | Shape::SparseSupport { level, .. } => *level > 0.0,
            Shape::PowerLaw { c, .. } => *c > 0.0,
            Shape::ExplicitTable { .. } => false,
        }
    }

    /// Displacements with positive value and `|y|_inf <= k`, sorted by norm
    /// then lexicographically.
    pub fn support_within(&self, k: Option<u64>) -> Result<Vec<Point>> {
        let mut out: Vec<Point> = match (&self.shape, k) {
            (Shape::ExplicitTable { entries }, _) => entries
                .iter()
                .filter(|e| e.p > 0.0 && k.map_or(true, |k| sup_norm(&e.y) <= k))
                .map(|e| point(&e.y))
                .filter(|y| self.admissible(y))
                .collect(),
            (_, None) => {
                if self.has_infinite_support() {
                    return Err(Error::UnboundedSupport);
                }
                Vec::new()
            }
            (_, Some(k)) => {
                let k = k as i64;
                let lo = if self.one_sided { 1 } else { -k };
                let stride = match self.shape {
                    Shape::SparseSupport { stride, .. } => stride as i64,
                    _ => 1,
                };
                let mut pts = Vec::new();
                let mut cur: Point = Point::from_elem(0, self.d);
                box_points(self.d, lo, k, stride, 0, &mut cur, &mut pts);
                pts.into_iter().filter(|y| self.value(y) > 0.0).collect()
            }
        };
        out.sort_by(|a, b| sup_norm(a).cmp(&sup_norm(b)).then_with(|| a.cmp(b)));
        Ok(out)
    }

    /// First `m` indices `n >= 1` with `value(n) > threshold` (1d one-sided).
    pub fn indices_above(&self, threshold: f64, m: usize) -> Result<Vec<u64>> {
        if self.d != 1 || !self.one_sided {
            return Err(invalid("family", "support scans need a one-sided 1d family"));
        }
        let insufficient = |found: usize| Error::InsufficientSupport {
            found,
            wanted: m,
            threshold,
            bound: self.scan_bound,
        };
        match &self.shape {
            Shape::DenseEpsilon { level } => {
                if *level > threshold {
                    Ok((1..=m as u64).collect())
                } else {
                    Err(insufficient(0))
                }
            }
            Shape::SparseSupport { stride, level } => {
                if *level > threshold {
                    Ok((1..=m as u64).map(|n| n * stride).collect())
                } else {
                    Err(insufficient(0))
                }
            }
            Shape::PowerLaw { .. } => {
                let mut out = Vec::with_capacity(m);
                for n in 1..=self.scan_bound {
                    if out.len() == m {
                        break;
                    }
                    if self.value(&[n as i64]) > threshold {
                        out.push(n);
                    }
                }
                if out.len() == m {
                    Ok(out)
                } else {
                    Err(insufficient(out.len()))
                }
            }
            Shape::ExplicitTable { entries } => {
                let mut idx: Vec<u64> = entries
                    .iter()
                    .filter(|e| e.y[0] >= 1 && e.p > threshold && e.y[0] as u64 <= self.scan_bound)
                    .map(|e| e.y[0] as u64)
                    .collect();
                idx.sort_unstable();
                if idx.len() >= m {
                    idx.truncate(m);
                    Ok(idx)
                } else {
                    Err(insufficient(idx.len()))
                }
            }
        }
    }
}

fn box_points(
    d: usize,
    lo_first: i64,
    k: i64,
    stride: i64,
    axis: usize,
    cur: &mut Point,
    out: &mut Vec<Point>,
) {
    if axis == d {
        out.push(cur.clone());
        return;
    }
    let lo = if axis == 0 { lo_first } else { -k };
    let start = lo.div_euclid(stride) * stride;
    let mut c = if start < lo { start + stride } else { start };
    while c <= k {
        cur[axis] = c;
        box_points(d, lo_first, k, stride, axis + 1, cur, out);
        c += stride;
    }
}

/// A family `(p_y)` of connection probabilities on `Z^d`.
#[derive(Clone, Debug)]
pub struct ConnectionFamily {
    profile: Profile,
}

impl ConnectionFamily {
    pub fn from_spec(spec: &FamilySpec) -> Result<Self> {
        Ok(Self {
            profile: Profile::from_spec(spec, true)?,
        })
    }

    pub fn dense(level: f64) -> Result<Self> {
        Self::from_spec(&FamilySpec::one_sided(Shape::DenseEpsilon { level }))
    }

    pub fn sparse(stride: u64, level: f64) -> Result<Self> {
        Self::from_spec(&FamilySpec::one_sided(Shape::SparseSupport { stride, level }))
    }

    pub fn power_law(c: f64, s: f64) -> Result<Self> {
        Self::from_spec(&FamilySpec::one_sided(Shape::PowerLaw { c, s }))
    }

    /// One-sided 1d table from `(n, p_n)` pairs.
    pub fn table_1d(entries: &[(i64, f64)]) -> Result<Self> {
        Self::from_spec(&FamilySpec::one_sided(Shape::ExplicitTable {
            entries: entries
                .iter()
                .map(|&(n, p)| TableEntry { y: vec![n], p })
                .collect(),
        }))
    }

    /// Family that is identically zero.
    pub fn zero(d: usize) -> Result<Self> {
        Self::from_spec(&FamilySpec {
            d,
            shape: Shape::ExplicitTable { entries: Vec::new() },
            one_sided: Some(d == 1),
            include_zero: false,
            scan_bound: DEFAULT_SCAN_BOUND,
        })
    }

    pub fn d(&self) -> usize {
        self.profile.d
    }

    pub fn shape(&self) -> &Shape {
        &self.profile.shape
    }

    pub fn is_one_sided(&self) -> bool {
        self.profile.one_sided
    }

    pub fn scan_bound(&self) -> u64 {
        self.profile.scan_bound
    }

    pub fn spec(&self) -> FamilySpec {
        self.profile.spec()
    }

    /// Untruncated `p_y`.
    pub fn p(&self, y: &[i64]) -> Result<f64> {
        self.check_dim(y.len())?;
        Ok(self.profile.value(y))
    }

    pub(crate) fn p_unchecked(&self, y: &[i64]) -> f64 {
        self.profile.value(y)
    }

    pub fn has_infinite_support(&self) -> bool {
        self.profile.has_infinite_support()
    }

    /// Positive-probability displacements with `|y|_inf <= k`, in increasing norm order.
    pub fn support_within(&self, k: Truncation) -> Result<Vec<Point>> {
        self.profile.support_within(k.finite())
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.profile.d {
            Err(Error::DimensionMismatch {
                expected: self.profile.d,
                got,
            })
        } else {
            Ok(())
        }
    }
}

/// Truncation range: a finite `k >= 1` or the untruncated tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Truncation {
    Finite(u64),
    Untruncated,
}

impl Truncation {
    pub fn finite(self) -> Option<u64> {
        match self {
            Truncation::Finite(k) => Some(k),
            Truncation::Untruncated => None,
        }
    }

    pub fn admits(self, norm: u64) -> bool {
        match self {
            Truncation::Finite(k) => norm <= k,
            Truncation::Untruncated => true,
        }
    }

    pub fn min(self, other: Truncation) -> Truncation {
        match (self, other) {
            (Truncation::Finite(a), Truncation::Finite(b)) => Truncation::Finite(a.min(b)),
            (Truncation::Finite(a), _) | (_, Truncation::Finite(a)) => Truncation::Finite(a),
            _ => Truncation::Untruncated,
        }
    }
}

impl fmt::Display for Truncation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truncation::Finite(k) => write!(f, "{k}"),
            Truncation::Untruncated => write!(f, "inf"),
        }
    }
}

/// `p^k_y = p_y` if `|y|_inf <= k`, else 0.
#[derive(Clone, Debug)]
pub struct TruncatedFamily {
    base: Arc<ConnectionFamily>,
    k: Truncation,
}

impl TruncatedFamily {
    pub fn untruncated(base: ConnectionFamily) -> Self {
        Self {
            base: Arc::new(base),
            k: Truncation::Untruncated,
        }
    }

    pub fn base(&self) -> &ConnectionFamily {
        &self.base
    }

    pub fn k(&self) -> Truncation {
        self.k
    }

    pub fn d(&self) -> usize {
        self.base.d()
    }

    /// Further truncation; composes as the minimum of the two ranges.
    pub fn truncate(&self, k: u64) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidTruncation(k));
        }
        Ok(Self {
            base: Arc::clone(&self.base),
            k: self.k.min(Truncation::Finite(k)),
        })
    }

    /// Same base family with a different range; shares the base allocation.
    pub fn with_range(&self, k: Truncation) -> Result<Self> {
        if let Truncation::Finite(0) = k {
            return Err(Error::InvalidTruncation(0));
        }
        Ok(Self {
            base: Arc::clone(&self.base),
            k,
        })
    }

    pub fn probability_of(&self, y: &[i64]) -> Result<f64> {
        self.base.check_dim(y.len())?;
        Ok(self.p_unchecked(y))
    }

    #[inline]
    pub(crate) fn p_unchecked(&self, y: &[i64]) -> f64 {
        if self.k.admits(sup_norm(y)) {
            self.base.p_unchecked(y)
        } else {
            0.0
        }
    }

    pub fn support(&self) -> Result<Vec<Point>> {
        self.base.support_within(self.k)
    }
}

pub fn truncate(family: ConnectionFamily, k: u64) -> Result<TruncatedFamily> {
    TruncatedFamily::untruncated(family).truncate(k)
}

/// Increasing enumeration `a_1 < a_2 < ... < a_m` of the indices with `p_i > epsilon`.
pub fn support_above(family: &ConnectionFamily, epsilon: f64, m: usize) -> Result<Vec<u64>> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid("epsilon", format!("{epsilon} not in (0,1)")));
    }
    if m == 0 {
        return Err(invalid("m", "must be at least 1"));
    }
    family.profile.indices_above(epsilon, m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "-")]
    Minus,
    #[serde(rename = "+")]
    Plus,
}

impl Sign {
    pub fn factor(self) -> i64 {
        match self {
            Sign::Minus => -1,
            Sign::Plus => 1,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Minus => '-',
            Sign::Plus => '+',
        }
    }
}

/// Witness map from projected index `m` to a displacement `y` with
/// `y_axis = sign * m` realizing `q_m`.
#[derive(Clone, Debug, PartialEq)]
pub enum Representatives {
    /// `y = sign * m * e_axis`.
    AxisAligned,
    Table(BTreeMap<u64, Point>),
}

#[derive(Clone, Debug)]
pub struct Projection {
    pub family: ConnectionFamily,
    pub axis: usize,
    pub sign: Sign,
    pub representatives: Representatives,
    d: usize,
}

impl Projection {
    pub fn representative(&self, m: u64) -> Option<Point> {
        match &self.representatives {
            Representatives::AxisAligned => {
                let mut y = Point::from_elem(0, self.d);
                y[self.axis - 1] = self.sign.factor() * m as i64;
                Some(y)
            }
            Representatives::Table(map) => map.get(&m).cloned(),
        }
    }

    /// Checks that every projected index with `q_m > epsilon` (up to
    /// `limit`) has a representative `y` with `y_axis = sign*m` and
    /// `p_y = q_m`.
    pub fn witness_holds(&self, original: &ConnectionFamily, epsilon: f64, limit: u64) -> bool {
        (1..=limit).all(|m| {
            let q = self.family.p_unchecked(&[m as i64]);
            if q <= epsilon {
                return true;
            }
            match self.representative(m) {
                Some(y) => {
                    y[self.axis - 1] == self.sign.factor() * m as i64
                        && original.p_unchecked(&y) == q
                }
                None => false,
            }
        })
    }
}

/// Projects a d-dimensional family onto one half-axis, giving a one-sided 1d
/// family `q_m = max{p_y : y_axis = sign*m}`.
pub fn project_family(
    family: &ConnectionFamily,
    axis: usize,
    sign: Sign,
    epsilon: f64,
) -> Result<Projection> {
    let d = family.d();
    if axis == 0 || axis > d {
        return Err(invalid("axis", format!("{axis} not in 1..={d}")));
    }
    let no_projection = || Error::NoInfiniteProjection {
        axis,
        sign: sign.symbol(),
        threshold: epsilon,
    };
    let profile = &family.profile;
    if d == 1 && profile.one_sided {
        if sign == Sign::Minus {
            return Err(no_projection());
        }
        return Ok(Projection {
            family: family.clone(),
            axis,
            sign,
            representatives: Representatives::AxisAligned,
            d,
        });
    }
    let analytic = |shape: Shape| -> Result<Projection> {
        let out = ConnectionFamily::from_spec(&FamilySpec {
            scan_bound: profile.scan_bound,
            ..FamilySpec::one_sided(shape)
        })?;
        Ok(Projection {
            family: out,
            axis,
            sign,
            representatives: Representatives::AxisAligned,
            d,
        })
    };
    match &profile.shape {
        Shape::DenseEpsilon { level } if *level > epsilon => analytic(profile.shape.clone()),
        Shape::SparseSupport { level, .. } if *level > epsilon => analytic(profile.shape.clone()),
        Shape::PowerLaw { c, s } if *s <= 0.0 && c.min(1.0) > epsilon => {
            analytic(profile.shape.clone())
        }
        Shape::ExplicitTable { entries } => {
            let mut best: BTreeMap<u64, (f64, Point)> = BTreeMap::new();
            for e in entries {
                let coord = e.y[axis - 1] * sign.factor();
                if coord < 1 || coord as u64 > profile.scan_bound || !profile.admissible(&e.y) {
                    continue;
                }
                let slot = best.entry(coord as u64).or_insert((f64::NEG_INFINITY, Point::new()));
                if e.p > slot.0 || (e.p == slot.0 && point(&e.y) < slot.1) {
                    *slot = (e.p, point(&e.y));
                }
            }
            if !best.values().any(|(p, _)| *p > epsilon) {
                return Err(no_projection());
            }
            let out = ConnectionFamily::from_spec(&FamilySpec {
                scan_bound: profile.scan_bound,
                ..FamilySpec::one_sided(Shape::ExplicitTable {
                    entries: best
                        .iter()
                        .map(|(&m, (p, _))| TableEntry {
                            y: vec![m as i64],
                            p: *p,
                        })
                        .collect(),
                })
            })?;
            Ok(Projection {
                family: out,
                axis,
                sign,
                representatives: Representatives::Table(
                    best.into_iter().map(|(m, (_, y))| (m, y)).collect(),
                ),
                d,
            })
        }
        _ => Err(no_projection()),
    }
}

/// Tries every axis and sign in order, returning the first projection that exists.
pub fn find_projection(family: &ConnectionFamily, epsilon: f64) -> Result<Projection> {
    let mut last = None;
    for axis in 1..=family.d() {
        for sign in [Sign::Plus, Sign::Minus] {
            match project_family(family, axis, sign, epsilon) {
                Ok(p) => return Ok(p),
                Err(e) => last = Some(e),
            }
        }
    }
    Err(last.unwrap_or(Error::NoInfiniteProjection {
        axis: 0,
        sign: '+',
        threshold: epsilon,
    }))
}
