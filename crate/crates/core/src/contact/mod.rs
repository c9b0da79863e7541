//! Long-range contact process on `Z` through its graphical representation.
//!
//! Deaths at a site arrive at rate 1 (scalable for tests), births along the
//! ordered pair `(x, x+y)` at rate `lambda_y`. Each Poisson process is drawn
//! from its own keyed stream, so raising the range `k` only adds processes.
//! [`discretize`] maps a sample onto the oriented lattice through time slabs
//! of length `tau`, and [`derive_contact_parameters`] prepares the block
//! construction for the resulting induced model.

pub mod discretize;
pub mod graphical;

pub use discretize::{discretize, slab_bounds, ContactField, Discretized};
pub use graphical::{
    contact_survival, k_connected, occupancy_at, parse_event_list, sample_graphical,
    sample_graphical_capped, BirthProcess, ContactSurvival, GraphicalEvent, GraphicalSample,
    OccupancySnapshot, ReplicaOutcome, SiteWindow, DEFAULT_EVENT_CAP,
};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{FamilySpec, Profile, Shape, DEFAULT_SCAN_BOUND};
use crate::renorm::params::{derive_with, BinomialCondition};
use crate::renorm::RenormParams;

/// Safety factor applied to the closed-form slab length.
pub const TAU_SAFETY: f64 = 0.99;

/// Serialized rate family: a displacement profile plus the self rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSpec {
    #[serde(flatten)]
    pub family: FamilySpec,
    #[serde(default)]
    pub lambda_zero: f64,
}

/// Birth rates `lambda_y` on `Z`, with `lambda_0` set separately.
#[derive(Clone, Debug)]
pub struct RateFamily {
    profile: Profile,
    lambda_zero: f64,
    death_rate: f64,
}

impl RateFamily {
    pub fn from_spec(spec: &RateSpec) -> Result<Self> {
        if spec.family.d != 1 {
            return Err(invalid("d", "contact rates are supported in d = 1 only"));
        }
        if !(spec.lambda_zero.is_finite() && spec.lambda_zero >= 0.0) {
            return Err(invalid("lambda_zero", format!("{} must be finite and non-negative", spec.lambda_zero)));
        }
        Ok(Self {
            profile: Profile::from_spec(&spec.family, false)?,
            lambda_zero: spec.lambda_zero,
            death_rate: 1.0,
        })
    }

    fn from_shape(shape: Shape, one_sided: bool) -> Result<Self> {
        Self::from_spec(&RateSpec {
            family: FamilySpec {
                d: 1,
                shape,
                one_sided: Some(one_sided),
                include_zero: false,
                scan_bound: DEFAULT_SCAN_BOUND,
            },
            lambda_zero: 0.0,
        })
    }

    /// Rates on `y >= 1` only.
    pub fn one_sided(shape: Shape) -> Result<Self> {
        Self::from_shape(shape, true)
    }

    /// Rates on every `y != 0`.
    pub fn two_sided(shape: Shape) -> Result<Self> {
        Self::from_shape(shape, false)
    }

    pub fn zero() -> Result<Self> {
        Self::two_sided(Shape::ExplicitTable { entries: Vec::new() })
    }

    pub fn with_lambda_zero(mut self, lambda_zero: f64) -> Result<Self> {
        if !(lambda_zero.is_finite() && lambda_zero >= 0.0) {
            return Err(invalid("lambda_zero", format!("{lambda_zero} must be finite and non-negative")));
        }
        self.lambda_zero = lambda_zero;
        Ok(self)
    }

    /// Scales the death rate; `0` switches deaths off.
    pub fn with_death_rate(mut self, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(invalid("death_rate", format!("{rate} must be finite and non-negative")));
        }
        self.death_rate = rate;
        Ok(self)
    }

    pub fn death_rate(&self) -> f64 {
        self.death_rate
    }

    pub fn lambda_zero(&self) -> f64 {
        self.lambda_zero
    }

    pub fn is_one_sided(&self) -> bool {
        self.profile.one_sided
    }

    pub fn spec(&self) -> RateSpec {
        RateSpec {
            family: self.profile.spec(),
            lambda_zero: self.lambda_zero,
        }
    }

    pub fn rate(&self, y: i64) -> f64 {
        if y == 0 {
            self.lambda_zero
        } else {
            self.profile.value(&[y])
        }
    }

    /// First `m` displacements `n >= 1` with `lambda_n > threshold`.
    pub fn indices_above(&self, threshold: f64, m: usize) -> Result<Vec<u64>> {
        let mut positive = self.profile.clone();
        positive.one_sided = true;
        positive.indices_above(threshold, m)
    }
}

/// Slab length `0.99 * (-ln(1 - delta/4))`, so that a slab holds a death
/// mark at a given site with probability below `delta/4`.
pub fn choose_tau(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("{delta} not in (0,1)")));
    }
    Ok(TAU_SAFETY * -(-delta / 4.0).ln_1p())
}

/// Lower bound `(1 - delta/4)^2 (1 - exp(-lambda tau))` on the probability of
/// a discretized bond whose rate exceeds `lambda`.
pub fn contact_epsilon(delta: f64, lambda_lower: f64) -> Result<f64> {
    let tau = choose_tau(delta)?;
    let keep = 1.0 - delta / 4.0;
    Ok(keep * keep * -(-lambda_lower * tau).exp_m1())
}

/// Block-construction parameters for the discretized model, using the
/// `delta/8` binomial conditions.
pub fn derive_contact_parameters(rates: &RateFamily, lambda_lower: f64, delta: f64) -> Result<RenormParams> {
    if !(lambda_lower.is_finite() && lambda_lower > 0.0) {
        return Err(invalid("lambda_lower", format!("{lambda_lower} must be positive")));
    }
    let epsilon = contact_epsilon(delta, lambda_lower)?;
    derive_with(epsilon, delta, BinomialCondition::Contact, |m| {
        rates.indices_above(lambda_lower, m)
    })
}
