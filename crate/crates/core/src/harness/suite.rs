//! Machine-readable PASS/FAIL report over the library's checkable invariants.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, KSpec, Model};
use crate::aniso::{explore_aniso_on, AnisoConfig, AnisoField};
use crate::contact::{
    choose_tau, contact_survival, discretize, k_connected, sample_graphical, slab_bounds, RateFamily,
    SiteWindow,
};
use crate::error::{Error, Result};
use crate::lattice::{truncate, ConnectionFamily, Shape, Truncation};
use crate::renorm::{
    compare_level_reach, comparison_survival, derive_parameters, domination_report, explore_field,
    verify_trace, ComparisonMode, ExplorationTrace, RenormParams,
};
use crate::rng::replica_seed;
use crate::sampler::{survival_indicators, EdgeField, Sabotaged, SeededConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum CheckStatus {
    Pass,
    Fail,
    NoData,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    /// Items examined (traces, seeds, bonds, ...).
    pub count: u64,
    pub failures: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci: Option<(f64, f64)>,
    pub detail: String,
}

impl CheckResult {
    fn counted(name: &str, count: u64, failures: u64, detail: String) -> Self {
        let status = if count == 0 {
            CheckStatus::NoData
        } else if failures == 0 {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        Self {
            name: name.into(),
            status,
            count,
            failures,
            estimate: None,
            ci: None,
            detail,
        }
    }

    fn no_data(name: &str, detail: &str) -> Self {
        Self::counted(name, 0, 0, detail.into())
    }

    fn errored(name: &str, e: &Error) -> Self {
        Self {
            name: name.into(),
            status: CheckStatus::Fail,
            count: 0,
            failures: 1,
            estimate: None,
            ci: None,
            detail: format!("error: {e}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub status: CheckStatus,
    pub sabotage: f64,
    pub notes: Vec<String>,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    fn new(sabotage: f64, checks: Vec<CheckResult>, notes: Vec<String>) -> Self {
        let status = if checks.iter().any(|c| c.status == CheckStatus::Fail) {
            CheckStatus::Fail
        } else if checks.iter().any(|c| c.status == CheckStatus::NoData) {
            CheckStatus::NoData
        } else {
            CheckStatus::Pass
        };
        Self {
            status,
            sabotage,
            notes,
            checks,
        }
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// 0 all pass, 1 any failure, 3 no failure but missing data.
    pub fn exit_code(&self) -> i32 {
        match self.status {
            CheckStatus::Pass => 0,
            CheckStatus::Fail => 1,
            CheckStatus::NoData => 3,
        }
    }
}

fn sabotage<F: EdgeField>(inner: F, seed: u64, rate: f64) -> Sabotaged<F> {
    Sabotaged { inner, seed, rate }
}

fn trace_checks(config: &ExperimentConfig, family: &ConnectionFamily, params: &RenormParams) -> Result<Vec<CheckResult>> {
    let n = config.verify.traces;
    let rate = config.verify.sabotage;
    let truncated = truncate(family.clone(), params.k_star)?;
    let results: Vec<(ExplorationTrace, u64, String)> = (1..=n)
        .into_par_iter()
        .map(|i| {
            let truth = SeededConfig::new(replica_seed(config.seed0, i), truncated.clone());
            let trace = if rate > 0.0 {
                explore_field(&sabotage(truth.clone(), truth.seed, rate), params, config.j_max)
            } else {
                explore_field(&truth, params, config.j_max)
            };
            let rep = verify_trace(&trace, &truth, params);
            let first = rep.first().map(|v| format!("{} at step {}", v.condition, v.step)).unwrap_or_default();
            (trace, rep.violations.len() as u64, first)
        })
        .collect();
    let bad = results.iter().filter(|r| r.1 > 0).count() as u64;
    let first = results.iter().find(|r| r.1 > 0).map(|r| r.2.clone());
    let mut out = vec![CheckResult::counted(
        "trace-invariants",
        n,
        bad,
        first.map_or_else(
            || format!("{n} traces, no violations"),
            |f| format!("{bad} of {n} traces violate; first: {f}"),
        ),
    )];
    let traces: Vec<ExplorationTrace> = results.into_iter().map(|r| r.0).collect();
    if traces.is_empty() {
        out.push(CheckResult::no_data("domination", "no data: empty trace list"));
        out.push(CheckResult::no_data("level-reach", "no data: empty trace list"));
        return Ok(out);
    }
    let mode = config.verify.mode.unwrap_or(ComparisonMode::Independent);
    let dom = domination_report(&traces, params.delta, mode, config.confidence)?;
    out.push(CheckResult {
        name: "domination".into(),
        status: if dom.pass { CheckStatus::Pass } else { CheckStatus::Fail },
        count: dom.steps,
        failures: dom.steps - dom.good,
        estimate: Some(dom.frequency),
        ci: Some((dom.ci_lo, dom.ci_hi)),
        detail: format!("threshold {:.4}; {}", dom.threshold, dom.note),
    });
    let level = config.j_max;
    let comparison = comparison_survival(
        1.0 - params.delta,
        level,
        config.verify.traces.max(1000),
        config.seed0,
        mode,
        config.confidence,
    )?;
    let cmp = compare_level_reach(&traces, level, &comparison)?;
    out.push(CheckResult {
        name: "level-reach".into(),
        status: if cmp.pass { CheckStatus::Pass } else { CheckStatus::Fail },
        count: cmp.explorations,
        failures: cmp.explorations - cmp.reached,
        estimate: Some(cmp.fraction),
        ci: None,
        detail: format!(
            "comparison field reaches level {level} with frequency {:.4} over {} runs; pooled SE {:.4}",
            cmp.comparison, cmp.comparison_n, cmp.pooled_se
        ),
    });
    Ok(out)
}

fn monotone_check(name: &str, runs: Vec<Vec<bool>>) -> CheckResult {
    let seeds = runs.first().map_or(0, |r| r.len()) as u64;
    let mut bad = 0u64;
    for s in 0..seeds as usize {
        if runs.windows(2).any(|w| w[0][s] && !w[1][s]) {
            bad += 1;
        }
    }
    CheckResult::counted(name, seeds, bad, format!("{} ranges, {seeds} shared seeds", runs.len()))
}

fn ks_for_monotonicity(config: &ExperimentConfig) -> Vec<u64> {
    match &config.k {
        KSpec::List(ks) if ks.len() >= 2 => ks.clone(),
        _ => vec![1, 2, 4, 8],
    }
}

fn aniso_defaults(config: &ExperimentConfig) -> Result<AnisoConfig> {
    if config.model == Model::Aniso {
        config.aniso_config(Truncation::Finite(4))
    } else {
        AnisoConfig::new(0.8, ConnectionFamily::dense(0.7)?, Truncation::Finite(4))
    }
}

fn contact_defaults(config: &ExperimentConfig) -> Result<RateFamily> {
    if config.model == Model::Contact {
        config.rates()
    } else {
        RateFamily::one_sided(Shape::DenseEpsilon { level: 1.0 })
    }
}

fn aniso_lift_check(config: &ExperimentConfig) -> Result<CheckResult> {
    let aniso = aniso_defaults(config)?;
    let rate = config.verify.sabotage;
    let horizon = 20;
    let outcomes: Vec<(bool, bool)> = (1..=config.verify.aniso_seeds)
        .into_par_iter()
        .map(|i| {
            let seed = replica_seed(config.seed0, i);
            let truth = AnisoField { seed, config: aniso.clone() };
            let out = if rate > 0.0 {
                explore_aniso_on(&sabotage(truth, seed, rate), seed, &aniso, horizon)
            } else {
                explore_aniso_on(&truth, seed, &aniso, horizon)
            }?;
            Ok((out.survived, out.certificate_valid))
        })
        .collect::<Result<_>>()?;
    let survived = outcomes.iter().filter(|o| o.0).count() as u64;
    let invalid = outcomes.iter().filter(|o| o.0 && !o.1).count() as u64;
    Ok(CheckResult::counted(
        "aniso-lift-soundness",
        survived,
        invalid,
        format!("{survived} surviving seeds to layer {horizon}; {invalid} certificates fail re-validation"),
    ))
}

fn contact_soundness_check(config: &ExperimentConfig) -> Result<CheckResult> {
    let rates = contact_defaults(config)?;
    let rate = config.verify.sabotage;
    let k = 3u64;
    let tau = choose_tau(config.delta.unwrap_or(0.2))?;
    let window = SiteWindow::new(0, 20)?;
    let slabs = 20u64;
    let horizon = slab_bounds(tau, slabs - 1).1;
    let counts: Vec<(u64, u64)> = (1..=config.verify.contact_realizations)
        .into_par_iter()
        .map(|i| {
            let seed = replica_seed(config.seed0, i);
            let sample = sample_graphical(seed, &rates, k, window, horizon)?;
            let d = discretize(&sample, tau, k)?;
            let field = sabotage(d, seed, rate);
            let (mut open, mut bad) = (0u64, 0u64);
            for n in 0..slabs {
                let (a, b) = slab_bounds(tau, n);
                for x in window.lo..=window.hi - k as i64 {
                    for y in 1..=k as i64 {
                        if field.is_open_1d(x, n, y) {
                            open += 1;
                            bad += !k_connected(&sample, (x, a), (x + y, b), k)? as u64;
                        }
                    }
                }
            }
            Ok((open, bad))
        })
        .collect::<Result<_>>()?;
    let open: u64 = counts.iter().map(|c| c.0).sum();
    let bad: u64 = counts.iter().map(|c| c.1).sum();
    Ok(CheckResult::counted(
        "contact-discretization-soundness",
        open,
        bad,
        format!("{open} open bonds with y != 0 at tau {tau:.5}; {bad} not certified"),
    ))
}

fn monotone_checks(config: &ExperimentConfig, family: &ConnectionFamily) -> Result<Vec<CheckResult>> {
    let ks = ks_for_monotonicity(config);
    let n = config.verify.monotone_seeds;
    if n == 0 {
        return Ok(vec![CheckResult::no_data("coupling-monotonicity", "no seeds")]);
    }
    let perc = ks
        .iter()
        .map(|&k| survival_indicators(&truncate(family.clone(), k)?, 30, n, config.seed0))
        .collect::<Result<Vec<_>>>()?;
    let aniso_base = aniso_defaults(config)?;
    let aniso = ks
        .iter()
        .map(|&k| {
            crate::aniso::aniso_survival(&aniso_base.with_range(Truncation::Finite(k)), 20, n, config.seed0, config.confidence)
                .map(|r| r.1)
        })
        .collect::<Result<Vec<_>>>()?;
    let rates = contact_defaults(config)?;
    let contact = ks
        .iter()
        .map(|&k| {
            contact_survival(&rates, k, 2.0, n, config.seed0, SiteWindow::new(-10, 60)?, config.confidence)
                .map(|r| r.outcomes.iter().map(|o| o.survived).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(vec![
        monotone_check("coupling-monotonicity-perc", perc),
        monotone_check("coupling-monotonicity-aniso", aniso),
        monotone_check("coupling-monotonicity-contact", contact),
    ])
}

fn push_or_fail(checks: &mut Vec<CheckResult>, name: &str, r: Result<Vec<CheckResult>>) {
    match r {
        Ok(v) => checks.extend(v),
        Err(e) => checks.push(CheckResult::errored(name, &e)),
    }
}

/// Runs every check and, when an output directory is configured, writes
/// `verify.json` there.
pub fn run_verification_suite(config: &ExperimentConfig) -> Result<(SuiteReport, Option<PathBuf>)> {
    config.validate()?;
    let mut checks = Vec::new();
    let mut notes = vec![
        "sweeps couple ranges by sharing per-edge uniforms across k unless coupling = independent".to_string(),
        "domination and level-reach compare against a simulated site field; they are observations, not proofs".to_string(),
    ];
    if config.verify.sabotage > 0.0 {
        notes.push(format!(
            "sabotage: {} of edge states flipped after sampling; soundness checks are expected to fail",
            config.verify.sabotage
        ));
    }
    let renorm_family = match config.model {
        Model::Perc | Model::Renorm => config.family()?,
        _ => ConnectionFamily::dense(0.5)?,
    };
    let eps = config.epsilon.unwrap_or(0.45);
    let delta = config.delta.unwrap_or(0.2);
    match derive_parameters(&renorm_family, eps, delta) {
        Ok(params) => push_or_fail(&mut checks, "trace-invariants", trace_checks(config, &renorm_family, &params)),
        Err(e) => checks.push(CheckResult::errored("trace-invariants", &e)),
    }
    push_or_fail(&mut checks, "aniso-lift-soundness", aniso_lift_check(config).map(|c| vec![c]));
    push_or_fail(
        &mut checks,
        "contact-discretization-soundness",
        contact_soundness_check(config).map(|c| vec![c]),
    );
    let perc_family = match config.model {
        Model::Perc | Model::Renorm => config.family()?,
        _ => ConnectionFamily::dense(0.5)?,
    };
    push_or_fail(&mut checks, "coupling-monotonicity", monotone_checks(config, &perc_family));
    if config.model == Model::Aniso || config.model == Model::Contact {
        notes.push("induced models are one-dependent; set verify.mode = \"one-dependent\" for the matching comparison field".into());
    }
    let report = SuiteReport::new(config.verify.sabotage, checks, notes);
    let path = match &config.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let p = dir.join("verify.json");
            let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
            std::fs::write(&p, text + "\n")?;
            Some(p)
        }
        None => None,
    };
    Ok((report, path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::default_for(Model::Renorm);
        c.j_max = 6;
        c.verify.traces = 20;
        c.verify.aniso_seeds = 40;
        c.verify.contact_realizations = 30;
        c.verify.monotone_seeds = 40;
        c
    }

    #[test]
    fn default_suite_passes() {
        let (rep, _) = run_verification_suite(&small()).unwrap();
        for c in &rep.checks {
            assert_eq!(c.status, CheckStatus::Pass, "{c:?}");
        }
        assert_eq!(rep.exit_code(), 0);
    }

    #[test]
    fn sabotage_breaks_soundness() {
        let mut c = small();
        c.verify.sabotage = 0.01;
        let (rep, _) = run_verification_suite(&c).unwrap();
        assert_eq!(rep.exit_code(), 1);
        for name in ["trace-invariants", "aniso-lift-soundness", "contact-discretization-soundness"] {
            assert_eq!(rep.check(name).unwrap().status, CheckStatus::Fail, "{name}");
        }
    }

    #[test]
    fn no_traces_is_no_data() {
        let mut c = small();
        c.verify.traces = 0;
        let (rep, _) = run_verification_suite(&c).unwrap();
        assert_eq!(rep.check("trace-invariants").unwrap().status, CheckStatus::NoData);
        assert!(rep.check("domination").unwrap().detail.contains("no data"));
        assert_eq!(rep.exit_code(), 3);
    }
}
