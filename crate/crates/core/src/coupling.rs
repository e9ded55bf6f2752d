//! Grand monotone coupling and the estimators built on it.
//!
//! All replicas read the same stream of `(time, site, u)` rings. Since the
//! heat-bath threshold is monotone in the configuration, replicas that
//! start ordered stay ordered, and replicas that meet stay together.
//! The extremal pair started from the empty (`-`) and full (`+`)
//! configurations therefore brackets every other start, so
//! `P(eta+(t) != eta-(t))` and `E sum_x (eta+_x(t) - eta-_x(t))` both bound
//! the worst-start total variation distance.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::configuration::Configuration;
use crate::dynamics::{
    apply_rule, check_boundary, resample_range, ActiveSites, EventStream, HeatBath, Schedule, UpdateRule,
};
use crate::equilibrium::sample_config;
use crate::error::{contract, Error, Result};
use crate::laws::KernelTable;
use crate::rng::trial_stream;
use crate::stats::{batch_means, quantile, wilson, Estimate, MeanVar, Z95};

/// `1 / (2e)`, the customary mixing threshold.
pub const MIXING_THRESHOLD: f64 = 0.183_939_720_585_721_15;

/// One replica of a coupled ensemble.
#[derive(Debug, Clone)]
pub struct ReplicaSpec {
    pub init: Configuration,
    pub boundary: Option<Configuration>,
}

impl ReplicaSpec {
    pub fn free(init: Configuration) -> Self {
        Self { init, boundary: None }
    }

    fn below(&self, other: &ReplicaSpec) -> bool {
        let boundary_ok = match (&self.boundary, &other.boundary) {
            (Some(a), Some(b)) => a.is_below(b),
            (None, None) => true,
            _ => false,
        };
        boundary_ok && self.init.is_below(&other.init)
    }
}

/// Outcome of [`coupled_simulate`].
#[derive(Debug, Clone)]
pub struct CoupledRecord {
    pub finals: Vec<Configuration>,
    /// Replica pairs `(i, j)` with spec `i <= j`, whose order was checked.
    pub ordered_pairs: Vec<(usize, usize)>,
    /// First time replicas `0` and `last` coincided, if they did.
    pub coalescence: Option<f64>,
    pub observation_times: Vec<f64>,
    /// Hamming distance between replicas `0` and `last` at each observation.
    pub distances: Vec<usize>,
    pub order_checks: u64,
    pub order_violations: u64,
}

/// Runs all replicas on one shared event stream, checking the order of
/// every comparable pair at each update and at each observation time.
#[allow(clippy::too_many_arguments)]
pub fn coupled_simulate<R: Rng>(
    replicas: &[ReplicaSpec],
    rates: &HeatBath,
    rule: UpdateRule,
    schedule: &Schedule,
    horizon: f64,
    observation_times: &[f64],
    rng: R,
) -> Result<CoupledRecord> {
    if replicas.is_empty() {
        return contract("no replicas");
    }
    for r in replicas {
        if r.init.len() != rates.len() {
            return contract("replica length differs from the rates");
        }
        check_boundary(&r.init, r.boundary.as_ref(), schedule)?;
    }
    let mut configs: Vec<Configuration> = replicas.iter().map(|r| r.init.clone()).collect();
    let last = configs.len() - 1;
    let ordered_pairs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|i| (0..configs.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && replicas[i].below(&replicas[j]))
        .collect();
    let mut times: Vec<f64> = observation_times.iter().copied().filter(|t| *t <= horizon).collect();
    times.sort_by(|a, b| a.total_cmp(b));
    let mut rec = CoupledRecord {
        finals: Vec::new(),
        ordered_pairs,
        coalescence: (configs[0] == configs[last]).then_some(0.0),
        observation_times: times.clone(),
        distances: Vec::with_capacity(times.len()),
        order_checks: 0,
        order_violations: 0,
    };
    let mut distance = configs[0].hamming(&configs[last]);
    let mut next_obs = 0;
    let mut observe = |upto: f64, configs: &[Configuration], distance: usize, rec: &mut CoupledRecord| {
        while next_obs < times.len() && times[next_obs] <= upto {
            for &(i, j) in &rec.ordered_pairs {
                rec.order_checks += 1;
                rec.order_violations += u64::from(!configs[i].is_below(&configs[j]));
            }
            rec.distances.push(distance);
            next_obs += 1;
        }
    };
    if let Some((lo, hi)) = schedule.span(rates.len()) {
        let mut stream = EventStream::new(rng, lo, hi);
        loop {
            let e = stream.next_event();
            observe(e.time.min(horizon), &configs, distance, &mut rec);
            if e.time > horizon {
                break;
            }
            if !schedule.is_active(e.time, e.site) {
                continue;
            }
            let x = e.site;
            let before = configs[0].contains(x) != configs[last].contains(x);
            for c in configs.iter_mut() {
                apply_rule(c, rates, rule, x, e.u);
            }
            if rule == UpdateRule::MirroredCreation {
                distance = configs[0].hamming(&configs[last]);
            } else {
                let after = configs[0].contains(x) != configs[last].contains(x);
                distance = distance + usize::from(after) - usize::from(before);
            }
            for &(i, j) in &rec.ordered_pairs {
                rec.order_checks += 1;
                rec.order_violations += u64::from(configs[i].contains(x) && !configs[j].contains(x));
            }
            if distance == 0 && rec.coalescence.is_none() {
                rec.coalescence = Some(e.time);
            }
        }
    }
    observe(horizon, &configs, distance, &mut rec);
    rec.finals = configs;
    Ok(rec)
}

/// Path of the extremal `(-, +)` pair.
#[derive(Debug, Clone)]
pub struct PairRun {
    /// First time the two replicas agreed, if before the time limit.
    pub coalescence: Option<f64>,
    /// Hamming distance at times `0, dt, 2 dt, ...` until coalescence or
    /// the time limit; zero afterwards.
    pub distances: Vec<u32>,
    pub order_violations: u64,
}

impl PairRun {
    pub fn distance_at(&self, k: usize) -> u32 {
        self.distances.get(k).copied().unwrap_or(0)
    }
}

/// Runs the empty and full starts on one stream until they meet or
/// `max_time` passes.
pub fn run_extremal_pair<R: Rng>(rates: &HeatBath, schedule: &Schedule, dt: f64, max_time: f64, rng: R) -> PairRun {
    let len = rates.len();
    let mut lower = Configuration::empty(len);
    let mut upper = Configuration::full(len);
    let mut distance = (len - 1) as u32;
    let mut distances = Vec::new();
    let mut order_violations = 0;
    let Some((lo, hi)) = schedule.span(len) else {
        let steps = (max_time / dt).floor() as usize + 1;
        return PairRun {
            coalescence: (distance == 0).then_some(0.0),
            distances: vec![distance; steps],
            order_violations,
        };
    };
    if distance == 0 {
        return PairRun { coalescence: Some(0.0), distances: vec![], order_violations };
    }
    let mut stream = EventStream::new(rng, lo, hi);
    let mut next_grid = 0.0;
    loop {
        let e = stream.next_event();
        while next_grid <= e.time.min(max_time) {
            distances.push(distance);
            next_grid = distances.len() as f64 * dt;
        }
        if e.time > max_time {
            return PairRun { coalescence: None, distances, order_violations };
        }
        if !schedule.is_active(e.time, e.site) {
            continue;
        }
        let x = e.site;
        let before = lower.contains(x) != upper.contains(x);
        // The threshold is monotone, so the lower replica can only be
        // occupied if the upper one is.
        let p_low = rates.conditional(&lower, x);
        let p_up = rates.conditional(&upper, x);
        lower.set(x, e.u < p_low);
        upper.set(x, e.u < p_up);
        order_violations += u64::from(lower.contains(x) && !upper.contains(x));
        let after = lower.contains(x) != upper.contains(x);
        distance = distance + u32::from(after) - u32::from(before);
        if distance == 0 {
            return PairRun { coalescence: Some(e.time), distances, order_violations };
        }
    }
}

/// Runs `trials` independent extremal pairs in parallel. Trial `i` uses the
/// stream derived from `(seed, cell, i)`, so results do not depend on
/// thread scheduling.
pub fn run_pairs(
    rates: &HeatBath,
    schedule: &Schedule,
    dt: f64,
    max_time: f64,
    trials: usize,
    seed: u64,
    cell: u64,
) -> Vec<PairRun> {
    (0..trials)
        .into_par_iter()
        .map(|i| run_extremal_pair(rates, schedule, dt, max_time, trial_stream(seed, cell, i as u64)))
        .collect()
}

/// Wilson interval for `P(eta+(t) != eta-(t))`.
pub fn estimate_tv_upper(
    rates: &HeatBath,
    schedule: &Schedule,
    t: f64,
    trials: usize,
    seed: u64,
    cell: u64,
) -> Estimate {
    let runs = run_pairs(rates, schedule, t.max(1e-9), t, trials, seed, cell);
    let apart = runs.iter().filter(|r| r.coalescence.is_none()).count();
    wilson(apart as u64, trials as u64, Z95)
}

/// Options for [`estimate_mixing_time`].
#[derive(Debug, Clone, Copy)]
pub struct MixingOptions {
    pub threshold: f64,
    pub trials: usize,
    /// Grid spacing of the recorded discrepancy path.
    pub dt: f64,
    /// Trials still apart after this time are censored.
    pub max_time: f64,
    pub batches: usize,
    pub seed: u64,
    pub cell: u64,
}

impl Default for MixingOptions {
    fn default() -> Self {
        Self { threshold: MIXING_THRESHOLD, trials: 200, dt: 0.05, max_time: 1e4, batches: 10, seed: 0, cell: 0 }
    }
}

/// Mixing-time estimates from the extremal pair.
#[derive(Debug, Clone, Serialize)]
pub struct MixingEstimate {
    pub len: usize,
    pub lambda: f64,
    pub trials: usize,
    pub threshold: f64,
    /// Median coalescence time.
    pub coalescence_median: Estimate,
    /// `(q, quantile)` of the coalescence time for `q` in 0.1, 0.25, 0.5, 0.75, 0.9.
    pub coalescence_quantiles: Vec<(f64, f64)>,
    /// First `t` with `P(eta+ != eta-) <= threshold`.
    pub coupling_time: Estimate,
    /// First `t` with `E sum_x (eta+_x - eta-_x) <= threshold`.
    pub discrepancy_time: Estimate,
    /// Trials that had not coalesced by the time limit.
    pub censored: usize,
    pub order_violations: u64,
}

impl MixingEstimate {
    pub fn is_censored(&self) -> bool {
        self.censored > 0
    }
}

fn coalescence_times(runs: &[PairRun]) -> Vec<f64> {
    runs.iter().map(|r| r.coalescence.unwrap_or(f64::INFINITY)).collect()
}

/// First grid time at which the mean discrepancy falls to `threshold`,
/// linearly interpolated between grid points.
fn discrepancy_crossing(runs: &[PairRun], dt: f64, threshold: f64) -> f64 {
    let steps = runs.iter().map(|r| r.distances.len()).max().unwrap_or(0);
    let n = runs.len() as f64;
    let mut prev = f64::INFINITY;
    for k in 0..=steps {
        let mean = runs.iter().map(|r| r.distance_at(k) as f64).sum::<f64>() / n;
        let censored_apart = k == steps && runs.iter().any(|r| r.coalescence.is_none());
        if mean <= threshold && !censored_apart {
            if k == 0 || !prev.is_finite() {
                return k as f64 * dt;
            }
            return dt * ((k - 1) as f64 + (prev - threshold) / (prev - mean));
        }
        prev = mean;
    }
    f64::INFINITY
}

/// Estimates the mixing time from `opts.trials` extremal pairs.
pub fn estimate_mixing_time(rates: &HeatBath, schedule: &Schedule, opts: &MixingOptions) -> Result<MixingEstimate> {
    if !(opts.threshold > 0.0 && opts.threshold < 0.5) {
        return Err(Error::Domain(format!("threshold {} outside (0, 1/2)", opts.threshold)));
    }
    if opts.trials == 0 || !(opts.dt > 0.0) {
        return Err(Error::Domain("need at least one trial and a positive grid step".into()));
    }
    let runs = run_pairs(rates, schedule, opts.dt, opts.max_time, opts.trials, opts.seed, opts.cell);
    let times = coalescence_times(&runs);
    let censored = runs.iter().filter(|r| r.coalescence.is_none()).count();
    let q = |data: &[PairRun], p: f64| quantile(&coalescence_times(data), p);
    let batches = opts.batches.min(opts.trials);
    let to_nan = |v: f64| if v.is_finite() { v } else { f64::NAN };
    let finite = |mut e: Estimate| {
        e.value = to_nan(e.value);
        e.ci_low = to_nan(e.ci_low);
        e.ci_high = to_nan(e.ci_high);
        e
    };
    Ok(MixingEstimate {
        len: rates.len(),
        lambda: rates.params().lambda(),
        trials: opts.trials,
        threshold: opts.threshold,
        coalescence_median: finite(batch_means(&runs, batches, |b| q(b, 0.5))),
        coalescence_quantiles: [0.1, 0.25, 0.5, 0.75, 0.9].iter().map(|&p| (p, to_nan(quantile(&times, p)))).collect(),
        coupling_time: finite(batch_means(&runs, batches, |b| q(b, 1.0 - opts.threshold))),
        discrepancy_time: finite(batch_means(&runs, batches, |b| discrepancy_crossing(b, opts.dt, opts.threshold))),
        censored,
        order_violations: runs.iter().map(|r| r.order_violations).sum(),
    })
}

/// Path-coupling contraction diagnostic on the window `lo..=hi`.
#[derive(Debug, Clone, Serialize)]
pub struct Contraction {
    /// Largest mean Hamming distance over the flipped sites.
    pub max_mean_distance: f64,
    pub worst_site: usize,
    /// Mean distance for each flipped site of the window.
    pub per_site: Vec<(usize, f64)>,
}

/// Starts two copies that differ at a single site of the window, runs
/// them coupled for time `t` with the outside frozen, and reports the
/// mean Hamming distance, maximized over the flipped site.
///
/// The outside configuration is `boundary` when given, otherwise an exact
/// equilibrium sample; the window content is resampled from equilibrium
/// given the outside for every trial.
#[allow(clippy::too_many_arguments)]
pub fn kantorovich_contraction(
    table: &KernelTable,
    len: usize,
    window: (usize, usize),
    boundary: Option<&Configuration>,
    t: f64,
    trials: usize,
    seed: u64,
    cell: u64,
) -> Result<Contraction> {
    let (lo, hi) = window;
    if lo == 0 || hi >= len || lo > hi {
        return Err(Error::Domain(format!("window {lo}..={hi} not inside the interior of [0, {len}]")));
    }
    let rates = HeatBath::new(*table.params(), len);
    let schedule = Schedule::Always(ActiveSites::Range { lo, hi });
    let per_site: Vec<(usize, f64)> = (lo..=hi)
        .into_par_iter()
        .map(|x| {
            let mut acc = MeanVar::default();
            for trial in 0..trials {
                let mut rng = trial_stream(seed, cell, ((x as u64) << 32) | trial as u64);
                let mut sigma = match boundary {
                    Some(b) => b.clone(),
                    None => sample_config(len, table, &mut rng)?,
                };
                resample_range(&mut sigma, lo, hi, &rates, &mut rng);
                let mut other = sigma.clone();
                other.set(x, !sigma.contains(x));
                let (a, b) = if sigma.is_below(&other) { (sigma, other) } else { (other, sigma) };
                let rec = coupled_simulate(
                    &[ReplicaSpec::free(a), ReplicaSpec::free(b)],
                    &rates,
                    UpdateRule::HeatBath,
                    &schedule,
                    t,
                    &[],
                    rng,
                )?;
                acc.push(rec.finals[0].hamming(&rec.finals[1]) as f64);
            }
            Ok((x, acc.mean()))
        })
        .collect::<Result<_>>()?;
    let (worst_site, max_mean_distance) =
        per_site.iter().copied().fold((lo, f64::NEG_INFINITY), |m, (x, d)| if d > m.1 { (x, d) } else { m });
    Ok(Contraction { max_mean_distance, worst_site, per_site })
}
