//! Poisson graphical samples on a finite window and infection paths through them.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RateFamily;
use crate::error::{invalid, Error, Result};
use crate::lattice::Truncation;
use crate::rng::{replica_seed, tag, KeyHasher, PoissonStream};
use crate::sampler::SurvivalEstimate;

/// Default cap on the number of Poisson events held by one sample.
pub const DEFAULT_EVENT_CAP: usize = 20_000_000;

/// Sites `lo..=hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteWindow {
    pub lo: i64,
    pub hi: i64,
}

impl SiteWindow {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(invalid("window", format!("lo {lo} exceeds hi {hi}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn centered(half_width: u64) -> Self {
        let w = half_width as i64;
        Self { lo: -w, hi: w }
    }

    pub fn width(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn contains(&self, x: i64) -> bool {
        self.lo <= x && x <= self.hi
    }

    fn index(&self, x: i64) -> usize {
        (x - self.lo) as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GraphicalEvent {
    Death { site: i64, time: f64 },
    Birth { from: i64, to: i64, time: f64 },
}

impl GraphicalEvent {
    pub fn time(&self) -> f64 {
        match *self {
            GraphicalEvent::Death { time, .. } | GraphicalEvent::Birth { time, .. } => time,
        }
    }

    // Deaths sort before births at equal times.
    fn order_key(&self) -> (u8, i64, i64) {
        match *self {
            GraphicalEvent::Death { site, .. } => (0, site, site),
            GraphicalEvent::Birth { from, to, .. } => (1, from, to),
        }
    }

    fn cmp_events(a: &Self, b: &Self) -> Ordering {
        a.time()
            .total_cmp(&b.time())
            .then_with(|| a.order_key().cmp(&b.order_key()))
    }
}

/// Event times of the birth process along `from -> to`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirthProcess {
    pub from: i64,
    pub to: i64,
    pub times: Vec<f64>,
}

/// Realized death and birth marks on a site window over `[0, horizon]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphicalSample {
    pub seed: u64,
    pub window: SiteWindow,
    pub horizon: f64,
    pub k: u64,
    /// Death times per site, indexed from `window.lo`.
    pub deaths: Vec<Vec<f64>>,
    /// Non-empty birth processes with both ends in the window and
    /// `|to - from| <= k`, sorted by `(from, to)`.
    pub births: Vec<BirthProcess>,
    events: Vec<GraphicalEvent>,
}

pub(crate) fn death_key(seed: u64, x: i64) -> KeyHasher {
    KeyHasher::new(seed).absorb(tag::DEATH).absorb_i64(x)
}

pub(crate) fn birth_key(seed: u64, from: i64, to: i64) -> KeyHasher {
    KeyHasher::new(seed).absorb(tag::BIRTH).absorb_i64(from).absorb_i64(to)
}

pub fn sample_graphical(seed: u64, rates: &RateFamily, k: u64, window: SiteWindow, horizon: f64) -> Result<GraphicalSample> {
    sample_graphical_capped(seed, rates, k, window, horizon, DEFAULT_EVENT_CAP)
}

pub fn sample_graphical_capped(
    seed: u64,
    rates: &RateFamily,
    k: u64,
    window: SiteWindow,
    horizon: f64,
    cap: usize,
) -> Result<GraphicalSample> {
    if k == 0 {
        return Err(Error::InvalidTruncation(0));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(invalid("horizon", format!("{horizon} must be finite and non-negative")));
    }
    let ki = k as i64;
    let width = window.width();
    let offsets: Vec<(i64, f64)> = (-ki..=ki)
        .map(|y| (y, rates.rate(y)))
        .filter(|&(_, r)| r > 0.0)
        .collect();
    let rate_sum: f64 = offsets.iter().map(|&(_, r)| r).sum::<f64>() + rates.death_rate();
    let expected = width as f64 * rate_sum * horizon;
    if expected > cap as f64 {
        return Err(Error::WindowTooLarge {
            events: expected.min(usize::MAX as f64) as usize,
            cap,
        });
    }
    let too_many = |events: usize| Error::WindowTooLarge { events, cap };

    let mut total = 0usize;
    let mut deaths = Vec::with_capacity(width);
    for x in window.lo..=window.hi {
        let times: Vec<f64> = PoissonStream::new(death_key(seed, x), rates.death_rate())
            .take_while(|&t| t <= horizon)
            .collect();
        total += times.len();
        if total > cap {
            return Err(too_many(total));
        }
        deaths.push(times);
    }
    let mut births = Vec::new();
    for from in window.lo..=window.hi {
        for &(y, r) in &offsets {
            let to = from + y;
            if !window.contains(to) {
                continue;
            }
            let times: Vec<f64> = PoissonStream::new(birth_key(seed, from, to), r)
                .take_while(|&t| t <= horizon)
                .collect();
            if times.is_empty() {
                continue;
            }
            total += times.len();
            if total > cap {
                return Err(too_many(total));
            }
            births.push(BirthProcess { from, to, times });
        }
    }

    let mut events = Vec::with_capacity(total);
    for (i, times) in deaths.iter().enumerate() {
        let site = window.lo + i as i64;
        events.extend(times.iter().map(|&time| GraphicalEvent::Death { site, time }));
    }
    for b in &births {
        events.extend(b.times.iter().map(|&time| GraphicalEvent::Birth {
            from: b.from,
            to: b.to,
            time,
        }));
    }
    events.sort_by(GraphicalEvent::cmp_events);
    Ok(GraphicalSample {
        seed,
        window,
        horizon,
        k,
        deaths,
        births,
        events,
    })
}

impl GraphicalSample {
    /// All events sorted by time, deaths first at equal times.
    pub fn events(&self) -> &[GraphicalEvent] {
        &self.events
    }

    pub fn deaths_at(&self, x: i64) -> Result<&[f64]> {
        if !self.window.contains(x) {
            return Err(Error::OutOfWindow(format!("site {x}")));
        }
        Ok(&self.deaths[self.window.index(x)])
    }

    /// Birth times along `from -> to`; empty when the process is not sampled.
    pub fn births_between(&self, from: i64, to: i64) -> &[f64] {
        self.births
            .binary_search_by(|b| (b.from, b.to).cmp(&(from, to)))
            .map_or(&[][..], |i| &self.births[i].times)
    }

    /// One event per line: `death <site> <time>` or `birth <from> <to> <time>`.
    pub fn to_event_list(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            match *e {
                GraphicalEvent::Death { site, time } => writeln!(out, "death {site} {time:?}"),
                GraphicalEvent::Birth { from, to, time } => writeln!(out, "birth {from} {to} {time:?}"),
            }
            .expect("writing to a string");
        }
        out
    }

    fn check_point(&self, x: i64, t: f64) -> Result<()> {
        if !self.window.contains(x) || !(0.0..=self.horizon).contains(&t) {
            return Err(Error::OutOfWindow(format!(
                "({x}, {t}) outside sites [{}, {}] x [0, {}]",
                self.window.lo, self.window.hi, self.horizon
            )));
        }
        Ok(())
    }

    fn check_range(&self, k: u64) -> Result<()> {
        if k == 0 {
            return Err(Error::InvalidTruncation(0));
        }
        if k > self.k {
            return Err(invalid("k", format!("{k} exceeds the sampled range {}", self.k)));
        }
        Ok(())
    }
}

pub fn parse_event_list(text: &str) -> Result<Vec<GraphicalEvent>> {
    let bad = |line: usize, reason: &str| Error::TraceFormat {
        line,
        reason: reason.to_string(),
    };
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let f: Vec<&str> = raw.split_whitespace().collect();
        if f.is_empty() {
            continue;
        }
        let int = |s: &str| s.parse::<i64>().map_err(|_| bad(line, "bad site"));
        let time = |s: &str| s.parse::<f64>().map_err(|_| bad(line, "bad time"));
        let e = match (f[0], f.len()) {
            ("death", 3) => GraphicalEvent::Death {
                site: int(f[1])?,
                time: time(f[2])?,
            },
            ("birth", 4) => GraphicalEvent::Birth {
                from: int(f[1])?,
                to: int(f[2])?,
                time: time(f[3])?,
            },
            _ => return Err(bad(line, "expected `death x t` or `birth x y t`")),
        };
        out.push(e);
    }
    Ok(out)
}

/// Occupied sites of the range-`k` process started from a set of sites.
struct Occupancy {
    lo: i64,
    occupied: Vec<bool>,
    count: usize,
}

impl Occupancy {
    fn new(window: SiteWindow, start: &[i64]) -> Self {
        let mut o = Self {
            lo: window.lo,
            occupied: vec![false; window.width()],
            count: 0,
        };
        for &x in start {
            o.add(x);
        }
        o
    }

    fn is_set(&self, x: i64) -> bool {
        self.occupied[(x - self.lo) as usize]
    }

    fn add(&mut self, x: i64) -> bool {
        let slot = &mut self.occupied[(x - self.lo) as usize];
        let fresh = !*slot;
        *slot = true;
        self.count += fresh as usize;
        fresh
    }

    fn remove(&mut self, x: i64) {
        let slot = &mut self.occupied[(x - self.lo) as usize];
        self.count -= *slot as usize;
        *slot = false;
    }

    /// Applies one event; returns the site that became occupied, if any.
    fn apply(&mut self, e: &GraphicalEvent, k: u64) -> Option<i64> {
        match *e {
            GraphicalEvent::Death { site, .. } => {
                self.remove(site);
                None
            }
            GraphicalEvent::Birth { from, to, .. } => {
                if from.abs_diff(to) <= k && self.is_set(from) && self.add(to) {
                    Some(to)
                } else {
                    None
                }
            }
        }
    }

    fn sites(&self) -> Vec<i64> {
        (0..self.occupied.len())
            .filter(|&i| self.occupied[i])
            .map(|i| self.lo + i as i64)
            .collect()
    }
}

/// Events with time in `[s, t]`.
fn events_in(sample: &GraphicalSample, s: f64, t: f64) -> &[GraphicalEvent] {
    let ev = &sample.events;
    let a = ev.partition_point(|e| e.time() < s);
    let b = ev.partition_point(|e| e.time() <= t);
    &ev[a..b.max(a)]
}

/// Whether `(x, s)` infects `(y, t)` using births of range at most `k`.
pub fn k_connected(sample: &GraphicalSample, from: (i64, f64), to: (i64, f64), k: u64) -> Result<bool> {
    let ((x, s), (y, t)) = (from, to);
    sample.check_point(x, s)?;
    sample.check_point(y, t)?;
    sample.check_range(k)?;
    if s > t {
        return Err(invalid("times", format!("start {s} after end {t}")));
    }
    let mut occ = Occupancy::new(sample.window, &[x]);
    for e in events_in(sample, s, t) {
        occ.apply(e, k);
        if occ.count == 0 {
            return Ok(false);
        }
    }
    Ok(occ.is_set(y))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancySnapshot {
    pub t: f64,
    pub occupied: Vec<i64>,
}

/// Sites infected at time `t` from `(0, 0)`.
pub fn occupancy_at(sample: &GraphicalSample, k: u64, t: f64) -> Result<OccupancySnapshot> {
    sample.check_point(0, 0.0)?;
    sample.check_point(0, t)?;
    sample.check_range(k)?;
    let mut occ = Occupancy::new(sample.window, &[0]);
    for e in events_in(sample, 0.0, t) {
        occ.apply(e, k);
    }
    Ok(OccupancySnapshot { t, occupied: occ.sites() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicaOutcome {
    /// The process restricted to the window is alive at every time up to the horizon.
    pub survived: bool,
    /// Some occupied site had a positive-rate birth leaving the window.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactSurvival {
    /// Estimate over unflagged replicas.
    pub estimate: SurvivalEstimate,
    pub flagged: u64,
    /// Per replica `1..=n`, in index order.
    pub outcomes: Vec<ReplicaOutcome>,
}

fn leaks(rates: &RateFamily, k: u64, window: SiteWindow) -> Vec<bool> {
    let ki = k as i64;
    (window.lo..=window.hi)
        .map(|x| (-ki..=ki).any(|y| !window.contains(x + y) && rates.rate(y) > 0.0))
        .collect()
}

fn run_replica(sample: &GraphicalSample, k: u64, leaks: &[bool]) -> ReplicaOutcome {
    let mut occ = Occupancy::new(sample.window, &[0]);
    let mut flagged = leaks[sample.window.index(0)];
    for e in &sample.events {
        if let Some(v) = occ.apply(e, k) {
            flagged |= leaks[sample.window.index(v)];
        }
        if occ.count == 0 {
            return ReplicaOutcome { survived: false, flagged };
        }
    }
    ReplicaOutcome { survived: true, flagged }
}

/// Estimates the probability that the range-`k` process from `{0}` stays
/// non-empty on `[0, horizon]`, over replicas `1..=n`.
pub fn contact_survival(
    rates: &RateFamily,
    k: u64,
    horizon: f64,
    n: u64,
    seed0: u64,
    window: SiteWindow,
    confidence: f64,
) -> Result<ContactSurvival> {
    if n == 0 {
        return Err(Error::NoReplicas);
    }
    if !window.contains(0) {
        return Err(Error::OutOfWindow("origin".into()));
    }
    let leaks = leaks(rates, k, window);
    let outcomes = (1..=n)
        .into_par_iter()
        .map(|i| {
            let sample = sample_graphical(replica_seed(seed0, i), rates, k, window, horizon)?;
            Ok(run_replica(&sample, k, &leaks))
        })
        .collect::<Result<Vec<_>>>()?;
    let kept = outcomes.iter().filter(|o| !o.flagged).count() as u64;
    let hits = outcomes.iter().filter(|o| !o.flagged && o.survived).count() as u64;
    if kept == 0 {
        return Err(Error::Empty("every replica touched the window boundary"));
    }
    let estimate = SurvivalEstimate::from_counts(hits, kept, horizon, Truncation::Finite(k), seed0, confidence)?;
    Ok(ContactSurvival {
        estimate,
        flagged: n - kept,
        outcomes,
    })
}
