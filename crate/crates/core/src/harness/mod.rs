//! Experiment configuration, sweeps over the truncation range, the
//! verification suite and report writers.

pub mod plot;
pub mod suite;
pub mod sweep;

pub use suite::{run_verification_suite, CheckResult, CheckStatus, SuiteReport};
pub use sweep::{rows_to_csv, run_explorations, run_sweep, SweepOutput, SweepRow};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aniso::{derive_aniso_parameters, AnisoConfig};
use crate::contact::{derive_contact_parameters, RateFamily, RateSpec, SiteWindow};
use crate::error::{Error, Result};
use crate::lattice::{ConnectionFamily, FamilySpec, Shape, Truncation};
use crate::renorm::{derive_parameters, ComparisonMode};
use crate::stats::DEFAULT_CONFIDENCE;

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "TRUNCPERC_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Perc,
    Renorm,
    Aniso,
    Contact,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Perc => "perc",
            Model::Renorm => "renorm",
            Model::Aniso => "aniso",
            Model::Contact => "contact",
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Truncation ranges: an explicit increasing list, or `"auto"` for the
/// derived `k_star`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KSpec {
    List(Vec<u64>),
    Auto(AutoK),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoK {
    Auto,
}

impl Default for KSpec {
    fn default() -> Self {
        KSpec::Auto(AutoK::Auto)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    /// Every k shares the base seed, so edge uniforms are reused across k.
    #[default]
    Coupled,
    /// Each k gets its own base seed.
    Independent,
}

/// Settings for the verification suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    pub traces: u64,
    /// Fraction of edge states flipped after sampling (negative control).
    pub sabotage: f64,
    pub aniso_seeds: u64,
    pub contact_realizations: u64,
    pub monotone_seeds: u64,
    pub mode: Option<ComparisonMode>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            traces: 100,
            sabotage: 0.0,
            aniso_seeds: 100,
            contact_realizations: 200,
            monotone_seeds: 200,
            mode: None,
        }
    }
}

/// A full experiment description, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Model,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<RateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_lower: Option<f64>,
    #[serde(default)]
    pub k: KSpec,
    /// Layers for the discrete models, continuous time for `contact`.
    pub horizon: f64,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default = "default_seed")]
    pub seed0: u64,
    #[serde(default = "default_j_max")]
    pub j_max: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<SiteWindow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub coupling: Coupling,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    /// Fill `wall_time`; off by default so outputs are reproducible.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub svg: bool,
    #[serde(default)]
    pub verify: VerifyOptions,
}

fn default_replicas() -> u64 {
    1000
}

fn default_seed() -> u64 {
    1
}

fn default_j_max() -> i64 {
    crate::renorm::explore::DEFAULT_J_MAX
}

fn default_confidence() -> f64 {
    DEFAULT_CONFIDENCE
}

/// Profile tables are flattened into tagged enums, where serde cannot reject
/// unknown keys, so they are checked by hand.
fn check_profile_keys(section: &str, table: &toml::Table) -> Result<()> {
    let shape_keys: &[&str] = match table.get("kind").and_then(|v| v.as_str()) {
        Some("dense-epsilon") => &["level"],
        Some("sparse-support") => &["stride", "level"],
        Some("power-law") => &["c", "s"],
        Some("explicit-table") => &["entries"],
        _ => return Ok(()),
    };
    let common = ["kind", "d", "one_sided", "include_zero", "scan_bound"];
    let extra: &[&str] = if section == "rates" { &["lambda_zero"] } else { &[] };
    for key in table.keys() {
        let k = key.as_str();
        if !common.contains(&k) && !shape_keys.contains(&k) && !extra.contains(&k) {
            return Err(config_error(&format!("{section}.{key}"), "unknown field"));
        }
    }
    Ok(())
}

fn config_error(path: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    /// Dense family at level 0.5, derived at `epsilon = 0.45`, `delta = 0.2`.
    pub fn default_for(model: Model) -> Self {
        let mut c = Self {
            model,
            family: Some(FamilySpec::one_sided(Shape::DenseEpsilon { level: 0.5 })),
            rates: None,
            sigma: None,
            epsilon: Some(0.45),
            delta: Some(0.2),
            lambda_lower: None,
            k: KSpec::List(vec![1, 2, 4, 8]),
            horizon: 50.0,
            replicas: 1000,
            seed0: 1,
            j_max: 20,
            window: None,
            out: None,
            format: OutputFormat::Csv,
            coupling: Coupling::Coupled,
            confidence: DEFAULT_CONFIDENCE,
            timing: false,
            svg: false,
            verify: VerifyOptions::default(),
        };
        match model {
            Model::Perc => {}
            Model::Renorm => c.k = KSpec::default(),
            Model::Aniso => {
                c.sigma = Some(0.8);
                c.family = Some(FamilySpec::one_sided(Shape::DenseEpsilon { level: 0.6 }));
            }
            Model::Contact => {
                c.family = None;
                c.rates = Some(RateSpec {
                    family: FamilySpec::one_sided(Shape::PowerLaw { c: 1.0, s: 1.5 }),
                    lambda_zero: 0.0,
                });
                c.horizon = 5.0;
                c.lambda_lower = Some(0.05);
                c.window = Some(SiteWindow::new(-20, 200).expect("valid window"));
            }
        }
        c
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::parse(text, "<config>")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| config_error(&name, e.to_string()))?;
        Self::parse(&text, &name)
    }

    fn parse(text: &str, name: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| {
            let at = e
                .span()
                .map(|s| format!(" (byte {})", s.start))
                .unwrap_or_default();
            config_error(name, format!("{}{at}", e.message()))
        })?;
        let table: toml::Table = toml::from_str(text).map_err(|e| config_error(name, e.message().to_string()))?;
        for section in ["family", "rates"] {
            if let Some(toml::Value::Table(t)) = table.get(section) {
                check_profile_keys(section, t)?;
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every field the chosen model reads.
    pub fn validate(&self) -> Result<()> {
        let prob = |path: &str, v: Option<f64>, open: bool| -> Result<()> {
            match v {
                Some(x) if open && !(x > 0.0 && x < 1.0) => Err(config_error(path, format!("{x} not in (0,1)"))),
                Some(x) if !(0.0..=1.0).contains(&x) => Err(config_error(path, format!("{x} not in [0,1]"))),
                _ => Ok(()),
            }
        };
        prob("epsilon", self.epsilon, true)?;
        prob("delta", self.delta, true)?;
        prob("sigma", self.sigma, false)?;
        prob("verify.sabotage", Some(self.verify.sabotage), false)?;
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(config_error("confidence", format!("{} not in (0,1)", self.confidence)));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(config_error("horizon", "must be finite and non-negative"));
        }
        if self.model != Model::Contact && self.horizon.fract() != 0.0 {
            return Err(config_error("horizon", "must be a whole number of layers"));
        }
        if self.j_max < 1 {
            return Err(config_error("j_max", "must be at least 1"));
        }
        if let KSpec::List(ks) = &self.k {
            if ks.is_empty() {
                return Err(config_error("k", "list is empty"));
            }
            if ks[0] == 0 {
                return Err(config_error("k", "ranges must be at least 1"));
            }
            if ks.windows(2).any(|w| w[0] >= w[1]) {
                return Err(config_error("k", "list must be strictly increasing"));
            }
        }
        match self.model {
            Model::Perc | Model::Renorm | Model::Aniso => {
                self.family()?;
            }
            Model::Contact => {
                self.rates()?;
                self.window()?;
            }
        }
        if self.model == Model::Renorm {
            self.require("epsilon", self.epsilon)?;
            self.require("delta", self.delta)?;
        }
        if self.model == Model::Aniso {
            self.aniso_config(Truncation::Untruncated)?;
        }
        if self.k == KSpec::default() {
            match self.model {
                Model::Perc | Model::Aniso => {
                    self.require("epsilon", self.epsilon)?;
                    self.require("delta", self.delta)?;
                }
                Model::Contact => {
                    self.require("delta", self.delta)?;
                    self.require("lambda_lower", self.lambda_lower)?;
                }
                Model::Renorm => {}
            }
        }
        Ok(())
    }

    fn require(&self, path: &str, v: Option<f64>) -> Result<f64> {
        v.ok_or_else(|| config_error(path, format!("required for model {}", self.model)))
    }

    pub fn family(&self) -> Result<ConnectionFamily> {
        let spec = self
            .family
            .as_ref()
            .ok_or_else(|| config_error("family", format!("required for model {}", self.model)))?;
        ConnectionFamily::from_spec(spec).map_err(|e| config_error("family", e.to_string()))
    }

    pub fn rates(&self) -> Result<RateFamily> {
        let spec = self
            .rates
            .as_ref()
            .ok_or_else(|| config_error("rates", "required for model contact"))?;
        RateFamily::from_spec(spec).map_err(|e| config_error("rates", e.to_string()))
    }

    pub fn window(&self) -> Result<SiteWindow> {
        let w = self.window.unwrap_or(SiteWindow { lo: -100, hi: 100 });
        if w.lo > 0 || w.hi < 0 {
            return Err(config_error("window", "must contain the origin"));
        }
        SiteWindow::new(w.lo, w.hi).map_err(|e| config_error("window", e.to_string()))
    }

    pub fn aniso_config(&self, k: Truncation) -> Result<AnisoConfig> {
        let sigma = self.require("sigma", self.sigma)?;
        AnisoConfig::new(sigma, self.family()?, k).map_err(|e| config_error("family", e.to_string()))
    }

    pub fn layers(&self) -> u64 {
        self.horizon as u64
    }

    /// The truncation ranges of the sweep.
    pub fn resolve_ks(&self) -> Result<Vec<u64>> {
        if let KSpec::List(ks) = &self.k {
            return Ok(ks.clone());
        }
        let at = |e: Error| config_error("k", format!("cannot derive k_star: {e}"));
        let params = match self.model {
            Model::Perc | Model::Renorm => derive_parameters(
                &self.family()?,
                self.require("epsilon", self.epsilon)?,
                self.require("delta", self.delta)?,
            ),
            Model::Aniso => derive_aniso_parameters(
                &self.aniso_config(Truncation::Untruncated)?,
                self.require("epsilon", self.epsilon)?,
                self.require("delta", self.delta)?,
            ),
            Model::Contact => derive_contact_parameters(
                &self.rates()?,
                self.require("lambda_lower", self.lambda_lower)?,
                self.require("delta", self.delta)?,
            ),
        }
        .map_err(at)?;
        Ok(vec![params.k_star])
    }
}

/// Worker count from the environment, if set.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .map(Some)
            .ok_or_else(|| config_error(WORKERS_ENV, format!("`{v}` is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

/// Runs `f` on a dedicated pool with the given number of workers, or on the
/// global pool when `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| config_error(WORKERS_ENV, e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}
