//! Binomial tails and score intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};

pub const DEFAULT_CONFIDENCE: f64 = 0.95;

/// `ln C(n, i) + i ln p + (n-i) ln(1-p)` for `0 < p < 1`.
fn ln_pmf(n: u64, i: u64, ln_p: f64, ln_q: f64, ln_n_fact: f64) -> f64 {
    ln_n_fact - ln_gamma(i as f64 + 1.0) - ln_gamma((n - i) as f64 + 1.0)
        + i as f64 * ln_p
        + (n - i) as f64 * ln_q
}

/// Neumaier-compensated sum of `exp(l - shift)` over `logs`.
fn sum_exp(logs: impl Iterator<Item = f64>, shift: f64) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for l in logs {
        let v = (l - shift).exp();
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Exact `P(Bin(n, p) >= m)` by log-space summation of the mass function.
///
/// Sums whichever tail is shorter relative to the mean so the result keeps
/// full relative precision on small tails.
pub fn binomial_tail_at_least(n: u64, m: u64, p: f64) -> Result<f64> {
    if m > n {
        return Err(Error::BinomialRange { n, m });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("p", format!("{p} not in [0,1]")));
    }
    if m == 0 || p == 1.0 {
        return Ok(1.0);
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let ln_n_fact = ln_gamma(n as f64 + 1.0);
    let mean = n as f64 * p;
    let upper = m as f64 > mean;
    let range: Vec<u64> = if upper { (m..=n).collect() } else { (0..m).collect() };
    let logs: Vec<f64> = range
        .iter()
        .map(|&i| ln_pmf(n, i, ln_p, ln_q, ln_n_fact))
        .collect();
    let shift = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s = sum_exp(logs.into_iter(), shift) * shift.exp();
    let tail = if upper { s } else { 1.0 - s };
    Ok(tail.clamp(0.0, 1.0))
}

/// Two-sided normal quantile for a confidence level, e.g. 1.95996 at 0.95.
pub fn z_for_level(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid("confidence", format!("{level} not in (0,1)")));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(0.5 + level / 2.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Wilson score interval for `successes` out of `n` trials.
pub fn wilson(successes: u64, n: u64, z: f64) -> Interval {
    if n == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let nf = n as f64;
    let phat = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (phat + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (phat * (1.0 - phat) / nf + z2 / (4.0 * nf * nf)).sqrt();
    Interval {
        lo: (center - half).clamp(0.0, phat),
        hi: (center + half).clamp(phat, 1.0),
    }
}

/// Binomial standard error `sqrt(p(1-p)/n)`.
pub fn binomial_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact tail by rational arithmetic for p = 1/2.
    fn half_tail(n: u64, m: u64) -> f64 {
        let mut c = 1u128;
        let mut below = 0u128;
        for i in 0..m {
            below += c;
            c = c * (n - i) as u128 / (i + 1) as u128;
        }
        1.0 - below as f64 / (1u128 << n) as f64
    }

    #[test]
    fn tail_examples() {
        assert!((binomial_tail_at_least(3, 1, 0.5).unwrap() - 0.875).abs() < 1e-15);
        let exact = 3797.0 / 4096.0;
        assert_eq!(half_tail(12, 4), exact);
        assert!((binomial_tail_at_least(12, 4, 0.5).unwrap() - exact).abs() < 1e-14);
        for n in [0, 5, 100] {
            assert_eq!(binomial_tail_at_least(n, 0, 0.3).unwrap(), 1.0);
        }
        assert_eq!(
            binomial_tail_at_least(3, 4, 0.5),
            Err(Error::BinomialRange { n: 3, m: 4 })
        );
    }

    #[test]
    fn tail_matches_exact_half_for_moderate_n() {
        for n in [10u64, 31, 64, 100] {
            for m in (0..=n).step_by(3) {
                let got = binomial_tail_at_least(n, m, 0.5).unwrap();
                assert!((got - half_tail(n, m)).abs() < 1e-12, "n={n} m={m}");
            }
        }
    }

    #[test]
    fn tail_large_n_matches_recurrence() {
        // Independent route: forward pmf recurrence in plain f64.
        let (n, p) = (10_000u64, 0.3);
        let mut pmf = vec![0.0f64; n as usize + 1];
        let ln0 = n as f64 * (1.0f64 - p).ln();
        // Start from the log of pmf(0) and walk in log space to avoid underflow.
        let mut l = ln0;
        for i in 0..=n {
            pmf[i as usize] = l.exp();
            if i < n {
                l += ((n - i) as f64 / (i + 1) as f64).ln() + (p / (1.0 - p)).ln();
            }
        }
        for m in [2900u64, 3000, 3100, 3300] {
            let oracle: f64 = pmf[m as usize..].iter().sum();
            let got = binomial_tail_at_least(n, m, p).unwrap();
            assert!((got - oracle).abs() < 1e-10, "m={m}: {got} vs {oracle}");
        }
    }

    #[test]
    fn degenerate_p() {
        assert_eq!(binomial_tail_at_least(5, 2, 0.0).unwrap(), 0.0);
        assert_eq!(binomial_tail_at_least(5, 5, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn wilson_contains_estimate_and_shrinks() {
        let z = z_for_level(0.95).unwrap();
        assert!((z - 1.959_963_984_540_054).abs() < 1e-9);
        let a = wilson(30, 100, z);
        let b = wilson(300, 1000, z);
        assert!(a.lo <= 0.3 && 0.3 <= a.hi);
        assert!(b.hi - b.lo < a.hi - a.lo);
        let zero = wilson(0, 50, z);
        assert_eq!(zero.lo, 0.0);
        assert!(zero.hi > 0.0 && zero.hi < 0.1);
        let one = wilson(50, 50, z);
        assert_eq!(one.hi, 1.0);
        assert!(one.lo > 0.9);
    }
}
