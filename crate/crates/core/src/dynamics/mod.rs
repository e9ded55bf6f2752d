//! The continuous-time heat-bath chain.
//!
//! Every interior site carries a unit-rate Poisson clock. When the clock of
//! `x` rings, `eta_x` is resampled from equilibrium given the rest of the
//! configuration, which only depends on the two neighboring particles
//! `a < x < b`:
//!
//! `p(a, x, b) = lambda K(x-a) K(b-x) / (lambda K(x-a) K(b-x) + K(b-a))`.
//!
//! The update draws a uniform `u` and sets `eta_x = 1[u < p]`. Because `p`
//! is increasing in the configuration, feeding the same `(x, u)` to several
//! replicas preserves their order.

mod block;
mod schedule;
mod simulate;

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::configuration::Configuration;
use crate::error::{contract, Result};
use crate::laws::KernelParams;

pub use block::{block_bounds, block_pattern_weights, block_resample, resample_range};
pub use schedule::{ActiveSites, CensoringPlan, Schedule, Window};
pub use simulate::{check_boundary, simulate, Observer, Recorder, RunSummary, TrajectoryRecord};

/// Equilibrium conditional occupation law for one `(rho, lambda, L)`.
#[derive(Debug, Clone)]
pub struct HeatBath {
    params: KernelParams,
    log_k: Arc<[f64]>,
    log_lambda: f64,
    len: usize,
}

impl HeatBath {
    pub fn new(params: KernelParams, len: usize) -> Self {
        let log_k: Arc<[f64]> = (0..=len).map(|j| params.log_k(j)).collect();
        Self { params, log_k, log_lambda: params.lambda().ln(), len }
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// `log(K(b-a) / (lambda K(x-a) K(b-x)))`.
    #[inline]
    fn log_odds_against(&self, a: usize, x: usize, b: usize) -> f64 {
        self.log_k[b - a] - self.log_k[b - x] - self.log_k[x - a] - self.log_lambda
    }

    /// Probability that `x` is occupied given particles at `a` and `b` and
    /// nothing strictly between them other than possibly `x`.
    #[inline]
    pub fn occupation_probability(&self, a: usize, x: usize, b: usize) -> f64 {
        debug_assert!(a < x && x < b && b <= self.len);
        1.0 / (1.0 + self.log_odds_against(a, x, b).exp())
    }

    /// `1 - occupation_probability`, computed without cancellation.
    #[inline]
    pub fn vacancy_probability(&self, a: usize, x: usize, b: usize) -> f64 {
        1.0 / (1.0 + (-self.log_odds_against(a, x, b)).exp())
    }

    /// Heat-bath occupation probability of `x` given the rest of `config`.
    #[inline]
    pub fn conditional(&self, config: &Configuration, x: usize) -> f64 {
        self.occupation_probability(config.predecessor(x), x, config.successor(x))
    }

    /// Rate at which the empty site `x` becomes occupied.
    pub fn creation_rate(&self, config: &Configuration, x: usize) -> Result<f64> {
        self.check_interior(x)?;
        if config.contains(x) {
            return contract(format!("creation rate asked for occupied site {x}"));
        }
        Ok(self.conditional(config, x))
    }

    /// Rate at which the particle at `x` is removed.
    pub fn destruction_rate(&self, config: &Configuration, x: usize) -> Result<f64> {
        self.check_interior(x)?;
        if !config.contains(x) {
            return contract(format!("destruction rate asked for empty site {x}"));
        }
        Ok(self.vacancy_probability(config.predecessor(x), x, config.successor(x)))
    }

    /// Rate of the single flip at `x`, whichever direction it goes.
    pub fn flip_rate(&self, config: &Configuration, x: usize) -> Result<f64> {
        if config.contains(x) {
            self.destruction_rate(config, x)
        } else {
            self.creation_rate(config, x)
        }
    }

    fn check_interior(&self, x: usize) -> Result<()> {
        if x == 0 || x >= self.len {
            contract(format!("site {x} is frozen or outside [0, {}]", self.len))
        } else {
            Ok(())
        }
    }
}

/// A ring of the clock at `site`, carrying the uniform threshold `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateEvent {
    pub time: f64,
    pub site: usize,
    pub u: f64,
}

/// How an update at a site acts on the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateRule {
    /// Resample `eta_x` from its equilibrium conditional.
    #[default]
    HeatBath,
    /// Creation only, mirrored: an empty `x` with `u < p` receives a
    /// particle together with `L - x`. Particles are never destroyed.
    MirroredCreation,
}

/// Applies a heat-bath update; returns whether the configuration changed.
#[inline]
pub fn apply_update(config: &mut Configuration, rates: &HeatBath, site: usize, u: f64) -> bool {
    let p = rates.conditional(config, site);
    config.set(site, u < p)
}

/// Applies an update under `rule`; returns whether the configuration changed.
#[inline]
pub fn apply_rule(config: &mut Configuration, rates: &HeatBath, rule: UpdateRule, site: usize, u: f64) -> bool {
    match rule {
        UpdateRule::HeatBath => apply_update(config, rates, site, u),
        UpdateRule::MirroredCreation => {
            if config.contains(site) || u >= rates.conditional(config, site) {
                return false;
            }
            config.set(site, true);
            let mirror = config.len() - site;
            if mirror != site {
                config.set(mirror, true);
            }
            true
        }
    }
}

/// Poisson stream of clock rings, uniform over the sites `lo..=hi`.
#[derive(Debug, Clone)]
pub struct EventStream<R> {
    rng: R,
    time: f64,
    lo: usize,
    hi: usize,
}

impl<R: Rng> EventStream<R> {
    pub fn new(rng: R, lo: usize, hi: usize) -> Self {
        assert!(lo <= hi, "empty site range {lo}..={hi}");
        Self { rng, time: 0.0, lo, hi }
    }

    /// Total ring rate.
    pub fn rate(&self) -> f64 {
        (self.hi - self.lo + 1) as f64
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn next_event(&mut self) -> UpdateEvent {
        let rate = self.rate();
        loop {
            let dt: f64 = Exp1.sample(&mut self.rng);
            let t = self.time + dt / rate;
            if t > self.time {
                self.time = t;
                break;
            }
        }
        let site = self.rng.random_range(self.lo..=self.hi);
        let u = self.rng.random::<f64>();
        UpdateEvent { time: self.time, site, u }
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::enumerate_measure;
    use approx::assert_relative_eq;

    fn rates(lambda: f64, len: usize) -> HeatBath {
        HeatBath::new(KernelParams::new(0.5, lambda).unwrap(), len)
    }

    #[test]
    fn two_site_rates() {
        let r = rates(1.0, 2);
        let empty = Configuration::empty(2);
        let full = Configuration::full(2);
        let c = r.creation_rate(&empty, 1).unwrap();
        let d = r.destruction_rate(&full, 1).unwrap();
        assert_relative_eq!(c, 0.519_85, epsilon = 1e-5);
        assert_relative_eq!(d, 0.480_15, epsilon = 1e-5);
        assert!((c + d - 1.0).abs() < 1e-14);
        assert!(r.creation_rate(&full, 1).is_err());
        assert!(r.destruction_rate(&empty, 1).is_err());
        assert!(r.destruction_rate(&full, 2).is_err());
    }

    #[test]
    fn creation_is_symmetric_in_the_gap() {
        let r = rates(2.0, 30);
        for x in 1..30 {
            assert_relative_eq!(
                r.occupation_probability(0, x, 30),
                r.occupation_probability(0, 30 - x, 30),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn destruction_vanishes_for_large_lambda() {
        let cfg = Configuration::from_sites(10, [4]).unwrap();
        let d: Vec<f64> =
            [1.0, 1e3, 1e6, 1e9].iter().map(|&l| rates(l, 10).destruction_rate(&cfg, 4).unwrap()).collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]));
        assert!(d[3] < 1e-8);
    }

    #[test]
    fn threshold_extremes_and_idempotence() {
        let r = rates(0.5, 50);
        let mut cfg = Configuration::from_sites(50, [10, 30]).unwrap();
        apply_update(&mut cfg, &r, 20, 0.0);
        assert!(cfg.contains(20));
        apply_update(&mut cfg, &r, 20, 1.0 - f64::EPSILON);
        assert!(!cfg.contains(20));
        let before = cfg.clone();
        apply_update(&mut cfg, &r, 25, 0.3);
        let once = cfg.clone();
        apply_update(&mut cfg, &r, 25, 0.3);
        assert_eq!(cfg, once);
        assert!(cfg.hamming(&before) <= 1);
    }

    fn flip(cfg: &Configuration, x: usize) -> Configuration {
        let mut c = cfg.clone();
        c.set(x, !cfg.contains(x));
        c
    }

    #[test]
    fn detailed_balance_on_small_systems() {
        for len in 2..=10 {
            for lambda in [0.5, 1.0, 4.0] {
                let r = rates(lambda, len);
                let mu = enumerate_measure(len, r.params()).unwrap();
                for (cfg, p) in mu.iter() {
                    for x in 1..len {
                        let other = flip(&cfg, x);
                        let lhs = p * r.flip_rate(&cfg, x).unwrap();
                        let rhs = mu.prob(&other) * r.flip_rate(&other, x).unwrap();
                        assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(rhs), "L={len} lambda={lambda}");
                    }
                }
            }
        }
    }

    #[test]
    fn heat_bath_identity() {
        let r = rates(3.0, 40);
        let cfg = Configuration::from_sites(40, [3, 17, 22]).unwrap();
        for x in (1..40).filter(|x| !cfg.contains(*x)) {
            let mut occ = cfg.clone();
            occ.set(x, true);
            let s = r.creation_rate(&cfg, x).unwrap() + r.destruction_rate(&occ, x).unwrap();
            assert!((s - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn rates_are_monotone_in_the_configuration() {
        for len in 2..=10usize {
            let r = rates(1.0, len);
            let states = 1u64 << (len - 1);
            for lo in 0..states {
                let small = Configuration::from_mask(len, lo);
                // Every superset of `lo`.
                let free = !lo & (states - 1);
                let mut extra = free;
                loop {
                    let big = Configuration::from_mask(len, lo | extra);
                    for x in 1..len {
                        let (s, b) = (small.contains(x), big.contains(x));
                        if !s && !b {
                            assert!(r.creation_rate(&small, x).unwrap() <= r.creation_rate(&big, x).unwrap() + 1e-15);
                        }
                        if s && b {
                            assert!(
                                r.destruction_rate(&small, x).unwrap() + 1e-15 >= r.destruction_rate(&big, x).unwrap()
                            );
                        }
                    }
                    if extra == 0 {
                        break;
                    }
                    extra = (extra - 1) & free;
                }
            }
        }
    }

    #[test]
    fn mirrored_rule_only_creates_symmetric_pairs() {
        let r = rates(4.0, 20);
        let mut cfg = Configuration::empty(20);
        let mut stream = EventStream::new(crate::rng::stream(3, 0), 1, 19);
        for _ in 0..500 {
            let e = stream.next_event();
            let before = cfg.clone();
            apply_rule(&mut cfg, &r, UpdateRule::MirroredCreation, e.site, e.u);
            assert!(before.is_below(&cfg));
            assert!(cfg.interior().all(|x| cfg.contains(20 - x)));
        }
    }

    #[test]
    fn event_times_increase() {
        let mut s = EventStream::new(crate::rng::stream(1, 1), 1, 9);
        let mut last = 0.0;
        for _ in 0..10_000 {
            let e = s.next_event();
            assert!(e.time > last && (1..=9).contains(&e.site) && (0.0..1.0).contains(&e.u));
            last = e.time;
        }
    }
}
