//! Time-slab discretization of the graphical representation.
//!
//! The bond `<(x,n), (x+y,n+1)>` is open when slab `[tau n, tau (n+1)]`
//! holds no death mark at `x` or at `x+y` and at least one birth along
//! `x -> x+y`. For `y = 0` an empty death slab at `x` suffices.

use super::graphical::{birth_key, death_key, GraphicalSample};
use super::RateFamily;
use crate::error::{invalid, Error, Result};
use crate::lattice::Truncation;
use crate::rng::PoissonStream;
use crate::sampler::EdgeField;

pub fn slab_bounds(tau: f64, n: u64) -> (f64, f64) {
    (tau * n as f64, tau * (n + 1) as f64)
}

fn any_in(times: &[f64], a: f64, b: f64) -> bool {
    let i = times.partition_point(|&t| t < a);
    i < times.len() && times[i] <= b
}

/// Bond states read off a finite sample.
#[derive(Clone, Copy, Debug)]
pub struct Discretized<'a> {
    pub sample: &'a GraphicalSample,
    pub tau: f64,
    pub k: u64,
}

pub fn discretize(sample: &GraphicalSample, tau: f64, k: u64) -> Result<Discretized<'_>> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(invalid("tau", format!("{tau} must be positive")));
    }
    if k == 0 {
        return Err(Error::InvalidTruncation(0));
    }
    if k > sample.k {
        return Err(invalid("k", format!("{k} exceeds the sampled range {}", sample.k)));
    }
    Ok(Discretized { sample, tau, k })
}

impl Discretized<'_> {
    /// Number of complete slabs inside the sample horizon.
    pub fn slabs(&self) -> u64 {
        let mut n = (self.sample.horizon / self.tau).floor() as u64;
        while n > 0 && slab_bounds(self.tau, n - 1).1 > self.sample.horizon {
            n -= 1;
        }
        n
    }

    pub fn bond_open(&self, x: i64, n: u64, y: i64) -> Result<bool> {
        let (a, b) = slab_bounds(self.tau, n);
        if b > self.sample.horizon {
            return Err(Error::SlabOutOfRange {
                slab: n,
                horizon: self.sample.horizon,
            });
        }
        let w = self.sample.window;
        if !w.contains(x) || !w.contains(x + y) {
            return Err(Error::OutOfWindow(format!("bond from {x} by {y}")));
        }
        if y.unsigned_abs() > self.k || any_in(self.sample.deaths_at(x)?, a, b) {
            return Ok(false);
        }
        if y == 0 {
            return Ok(true);
        }
        Ok(!any_in(self.sample.deaths_at(x + y)?, a, b) && any_in(self.sample.births_between(x, x + y), a, b))
    }
}

impl EdgeField for Discretized<'_> {
    fn is_open_1d(&self, x: i64, t: u64, y: i64) -> bool {
        self.bond_open(x, t, y).unwrap_or(false)
    }

    fn range(&self) -> Truncation {
        Truncation::Finite(self.k)
    }
}

/// The same bond states computed lazily from the keyed streams, with no window.
#[derive(Clone, Debug)]
pub struct ContactField {
    pub seed: u64,
    pub rates: RateFamily,
    pub k: u64,
    pub tau: f64,
}

impl ContactField {
    pub fn new(seed: u64, rates: RateFamily, k: u64, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(invalid("tau", format!("{tau} must be positive")));
        }
        if k == 0 {
            return Err(Error::InvalidTruncation(0));
        }
        Ok(Self { seed, rates, k, tau })
    }

    fn hits(stream: PoissonStream, a: f64, b: f64) -> bool {
        stream.take_while(|&t| t <= b).any(|t| t >= a)
    }

    pub fn bond_open(&self, x: i64, n: u64, y: i64) -> bool {
        if y.unsigned_abs() > self.k {
            return false;
        }
        let (a, b) = slab_bounds(self.tau, n);
        let death = self.rates.death_rate();
        if Self::hits(PoissonStream::new(death_key(self.seed, x), death), a, b) {
            return false;
        }
        if y == 0 {
            return true;
        }
        let rate = self.rates.rate(y);
        rate > 0.0
            && !Self::hits(PoissonStream::new(death_key(self.seed, x + y), death), a, b)
            && Self::hits(PoissonStream::new(birth_key(self.seed, x, x + y), rate), a, b)
    }
}

impl EdgeField for ContactField {
    fn is_open_1d(&self, x: i64, t: u64, y: i64) -> bool {
        self.bond_open(x, t, y)
    }

    fn range(&self) -> Truncation {
        Truncation::Finite(self.k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::graphical::{k_connected, sample_graphical, SiteWindow};
    use crate::contact::{choose_tau, RateFamily};
    use crate::lattice::Shape;

    fn rates() -> RateFamily {
        RateFamily::one_sided(Shape::DenseEpsilon { level: 2.0 }).unwrap()
    }

    #[test]
    fn empty_sample_closes_moving_bonds() {
        let r = RateFamily::zero().unwrap().with_death_rate(0.0).unwrap();
        let s = sample_graphical(0, &r, 3, SiteWindow::new(0, 10).unwrap(), 1.0).unwrap();
        let d = discretize(&s, 0.1, 3).unwrap();
        for n in 0..d.slabs() {
            for x in 0..8 {
                assert!(d.bond_open(x, n, 0).unwrap());
                for y in 1..=2 {
                    assert!(!d.bond_open(x, n, y).unwrap());
                }
            }
        }
    }

    #[test]
    fn death_in_slab_closes_outgoing_bonds() {
        let s = sample_graphical(2, &rates(), 3, SiteWindow::new(0, 12).unwrap(), 2.0).unwrap();
        let d = discretize(&s, 0.2, 3).unwrap();
        let t = s.deaths_at(4).unwrap()[0];
        let n = (t / 0.2).floor() as u64;
        if n < d.slabs() {
            for y in 0..=3 {
                assert!(!d.bond_open(4, n, y).unwrap());
            }
        }
    }

    #[test]
    fn slabs_past_horizon_are_rejected() {
        let s = sample_graphical(2, &rates(), 2, SiteWindow::new(0, 5).unwrap(), 1.0).unwrap();
        let d = discretize(&s, 0.3, 2).unwrap();
        assert_eq!(d.slabs(), 3);
        assert!(matches!(d.bond_open(0, 3, 1), Err(Error::SlabOutOfRange { .. })));
    }

    #[test]
    fn open_bonds_are_certified() {
        let tau = choose_tau(0.2).unwrap() * 8.0;
        for seed in 0..50 {
            let s = sample_graphical(seed, &rates(), 3, SiteWindow::new(0, 15).unwrap(), 2.0).unwrap();
            let d = discretize(&s, tau, 3).unwrap();
            for n in 0..d.slabs() {
                let (a, b) = slab_bounds(tau, n);
                for x in 0..12 {
                    for y in 1..=3 {
                        if d.bond_open(x, n, y).unwrap() {
                            assert!(k_connected(&s, (x, a), (x + y, b), 3).unwrap());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn lazy_field_matches_sample() {
        let tau = 0.15;
        for seed in 0..30 {
            let s = sample_graphical(seed, &rates(), 3, SiteWindow::new(-2, 14).unwrap(), 1.5).unwrap();
            let d = discretize(&s, tau, 3).unwrap();
            let lazy = ContactField::new(seed, rates(), 3, tau).unwrap();
            for n in 0..d.slabs() {
                for x in 0..10 {
                    for y in 0..=3 {
                        assert_eq!(d.bond_open(x, n, y).unwrap(), lazy.bond_open(x, n, y), "{seed} {x} {n} {y}");
                    }
                }
            }
        }
    }
}
