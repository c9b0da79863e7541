use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{support_above, ConnectionFamily};
use crate::stats::binomial_tail_at_least;

/// Which pair of binomial conditions fixes `L0` and `L1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinomialCondition {
    /// `P(Bin(L0,e) >= 1) > 1 - d/3` and `P(Bin(L1,e) >= L0) > 1 - d/3`
    /// (plain oriented percolation).
    DryLattice,
    /// `P(Bin(L0,e) > 0) > 1 - d/8` and `P(Bin(L1,e) > L0) > 1 - d/8`
    /// (slab-discretized contact process).
    Contact,
}

impl BinomialCondition {
    fn slack(self, delta: f64) -> f64 {
        match self {
            BinomialCondition::DryLattice => delta / 3.0,
            BinomialCondition::Contact => delta / 8.0,
        }
    }

    /// Minimum success count required of `Bin(L1, e)` given `L0`.
    fn l1_threshold(self, l0: u64) -> u64 {
        match self {
            BinomialCondition::DryLattice => l0,
            BinomialCondition::Contact => l0 + 1,
        }
    }
}

/// Constants of the block construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenormParams {
    pub epsilon: f64,
    pub delta: f64,
    pub condition: BinomialCondition,
    pub l0: u64,
    pub l1: u64,
    pub l2: u64,
    pub r: u64,
    /// Support prefix `a_1 < ... < a_{L2}`.
    pub a: Vec<u64>,
    /// Induced truncation range `a_{L2}`.
    pub k_star: u64,
}

impl RenormParams {
    /// `a_n`, 1-based.
    pub fn a(&self, n: u64) -> u64 {
        self.a[(n - 1) as usize]
    }

    pub fn a1(&self) -> u64 {
        self.a[0]
    }

    pub fn a_l1(&self) -> u64 {
        self.a(self.l1)
    }

    pub fn a_2l1(&self) -> u64 {
        self.a(2 * self.l1)
    }

    pub fn a_l2(&self) -> u64 {
        self.a(self.l2)
    }

    /// Builds parameters from an explicit support sequence, with `l0` and `l1`
    /// already chosen. `a` must contain at least the first `L2` terms.
    pub fn from_support(
        epsilon: f64,
        delta: f64,
        condition: BinomialCondition,
        l0: u64,
        l1: u64,
        a: &[u64],
    ) -> Result<Self> {
        if a.windows(2).any(|w| w[0] >= w[1]) || a.first().map_or(true, |&a1| a1 == 0) {
            return Err(invalid("a", "support sequence must be positive and strictly increasing"));
        }
        if (a.len() as u64) < 2 * l1 {
            return Err(invalid("a", format!("need at least 2*L1 = {} terms", 2 * l1)));
        }
        let a_l1 = a[(l1 - 1) as usize];
        let a_2l1 = a[(2 * l1 - 1) as usize];
        let r = a_l1.max(a_2l1 - a_l1);
        let bound = a[0] + 3 * r;
        let idx = a
            .iter()
            .position(|&v| v > bound)
            .ok_or_else(|| invalid("a", format!("no term exceeds a_1 + 3R = {bound}")))?;
        let l2 = idx as u64 + 1;
        Ok(Self {
            epsilon,
            delta,
            condition,
            l0,
            l1,
            l2,
            r,
            a: a[..idx + 1].to_vec(),
            k_star: a[idx],
        })
    }
}

/// Minimal `n >= lo` with `P(Bin(n, e) >= m) > target`; the tail is
/// non-decreasing in `n`, so gallop then bisect.
fn minimal_n(lo: u64, m: u64, epsilon: f64, target: f64) -> Result<u64> {
    let ok = |n: u64| -> Result<bool> { Ok(binomial_tail_at_least(n, m, epsilon)? > target) };
    let lo = lo.max(m).max(1);
    if ok(lo)? {
        return Ok(lo);
    }
    let mut bad = lo;
    let mut step = 1u64;
    let mut good = lo + step;
    while !ok(good)? {
        bad = good;
        step *= 2;
        good = lo + step;
        if step > (1 << 40) {
            return Err(invalid("epsilon", "binomial condition cannot be met"));
        }
    }
    while good - bad > 1 {
        let mid = bad + (good - bad) / 2;
        if ok(mid)? {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(good)
}

/// Minimal `(L0, L1)` for the chosen binomial conditions.
pub fn binomial_levels(epsilon: f64, delta: f64, condition: BinomialCondition) -> Result<(u64, u64)> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid("epsilon", format!("{epsilon} not in (0,1)")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("{delta} not in (0,1)")));
    }
    let target = 1.0 - condition.slack(delta);
    let l0 = minimal_n(1, 1, epsilon, target)?;
    let l1 = minimal_n(1, condition.l1_threshold(l0), epsilon, target)?;
    Ok((l0, l1))
}

/// Collects support terms until one exceeds `a_1 + 3R`.
pub(crate) fn derive_with(
    epsilon: f64,
    delta: f64,
    condition: BinomialCondition,
    support: impl Fn(usize) -> Result<Vec<u64>>,
) -> Result<RenormParams> {
    let (l0, l1) = binomial_levels(epsilon, delta, condition)?;
    let mut m = (2 * l1) as usize;
    loop {
        let a = support(m)?;
        let a_l1 = a[l1 as usize - 1];
        let r = a_l1.max(a[2 * l1 as usize - 1] - a_l1);
        if *a.last().expect("non-empty") > a[0] + 3 * r {
            return RenormParams::from_support(epsilon, delta, condition, l0, l1, &a);
        }
        m *= 2;
    }
}

/// Parameters for the one-sided 1d family at level `epsilon` and slack `delta`.
pub fn derive_parameters(family: &ConnectionFamily, epsilon: f64, delta: f64) -> Result<RenormParams> {
    derive_with(epsilon, delta, BinomialCondition::DryLattice, |m| {
        support_above(family, epsilon, m)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn levels_for_half() {
        // 0.5^3 = 0.125 >= 0.1 > 0.0625 = 0.5^4.
        // P(Bin(11,.5) >= 4) = 1 - 232/2048 = 0.8867; P(Bin(12,.5) >= 4) = 3797/4096 = 0.9270.
        assert_eq!(binomial_levels(0.5, 0.3, BinomialCondition::DryLattice).unwrap(), (4, 12));
    }

    #[test]
    fn dense_and_sparse_examples() {
        let dense = ConnectionFamily::dense(0.6).unwrap();
        let p = derive_parameters(&dense, 0.5, 0.3).unwrap();
        assert_eq!((p.l0, p.l1, p.r, p.l2, p.k_star), (4, 12, 12, 38, 38));

        let sparse = ConnectionFamily::sparse(5, 0.7).unwrap();
        let p = derive_parameters(&sparse, 0.5, 0.3).unwrap();
        assert_eq!((p.l0, p.l1, p.r, p.l2, p.k_star), (4, 12, 60, 38, 190));
        assert_eq!((p.a_l1(), p.a_2l1()), (60, 120));
    }

    #[test]
    fn invariants_hold() {
        for (eps, delta) in [(0.3, 0.1), (0.45, 0.05), (0.2, 0.5), (0.1, 0.01)] {
            let p = derive_parameters(&ConnectionFamily::dense(0.9).unwrap(), eps, delta).unwrap();
            let target = 1.0 - delta / 3.0;
            assert!(binomial_tail_at_least(p.l0, 1, eps).unwrap() > target);
            assert!(binomial_tail_at_least(p.l0 - 1, 1, eps).unwrap() <= target || p.l0 == 1);
            assert!(binomial_tail_at_least(p.l1, p.l0, eps).unwrap() > target);
            assert!(p.l1 == p.l0 || binomial_tail_at_least(p.l1 - 1, p.l0, eps).unwrap() <= target);
            assert_eq!(p.r, p.a_l1().max(p.a_2l1() - p.a_l1()));
            assert!(p.a_l2() > p.a1() + 3 * p.r);
            assert!(p.a(p.l2 - 1) <= p.a1() + 3 * p.r);
            assert!(p.a.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn contact_levels_use_strict_counts() {
        let (l0, l1) = binomial_levels(0.3, 0.2, BinomialCondition::Contact).unwrap();
        let target = 1.0 - 0.2 / 8.0;
        assert!(binomial_tail_at_least(l0, 1, 0.3).unwrap() > target);
        assert!(binomial_tail_at_least(l1, l0 + 1, 0.3).unwrap() > target);
        assert!(binomial_tail_at_least(l1 - 1, l0 + 1, 0.3).unwrap() <= target);
    }

    #[test]
    fn insufficient_support_propagates() {
        let pl = ConnectionFamily::power_law(1.0, 2.0).unwrap();
        assert!(matches!(
            derive_parameters(&pl, 0.1, 0.3),
            Err(Error::InsufficientSupport { .. })
        ));
    }
}
