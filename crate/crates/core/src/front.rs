//! Fragmentation fronts.
//!
//! Starting from the empty configuration in the localized phase, particles
//! invade the system from the frozen endpoints by heavy-tailed jumps. Three
//! models of this are provided:
//!
//! * the renewal front `f(k)`, whose increments follow the law `Q` built
//!   from the coarse-grained creation probability
//!   `K~(x) = c0 lambda / (lambda + 1 / K((x + 1) ell))`;
//! * the filling process `zeta~` on the coarse lattice, which `f` is the
//!   rightmost occupied point of, and its counterpart `zeta` read off a
//!   censored trajectory;
//! * the creation-only mirrored chain and the pure-jump walk `y(t)` with
//!   rates `C / x^(1 + rho)` that dominates its front.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson, Zeta};
use rayon::prelude::*;
use serde::Serialize;

use crate::configuration::Configuration;
use crate::dynamics::{CensoringPlan, HeatBath, Observer, Schedule};
use crate::error::{contract, domain, Result};
use crate::laws::KernelParams;
use crate::rng::trial_stream;
use crate::stats::{log_log_fit, LinearFit};

/// Default number of tabulated increments of `Q`.
pub const DEFAULT_TRUNCATION: usize = 1 << 20;

/// `T(n, ell) = floor(n^rho ell^(1+rho))`.
pub fn t_scale(n: u64, ell: u64, rho: f64) -> u64 {
    ((n as f64).powf(rho) * (ell as f64).powf(1.0 + rho)).floor() as u64
}

/// Increment law `Q` of the renewal front.
#[derive(Debug, Clone)]
pub struct FrontLaw {
    params: KernelParams,
    ell: usize,
    c0: f64,
    truncation: usize,
    /// `log_a[j] = log A(j) = sum_{i >= j} log(1 - K~(i))` for `1 <= j <= N + 1`.
    log_a: Vec<f64>,
}

impl FrontLaw {
    pub fn new(params: KernelParams, ell: usize, c0: f64) -> Result<Self> {
        Self::with_truncation(params, ell, c0, DEFAULT_TRUNCATION)
    }

    pub fn with_truncation(params: KernelParams, ell: usize, c0: f64, truncation: usize) -> Result<Self> {
        if ell == 0 {
            return domain("ell must be positive");
        }
        if !(0.0..=1.0).contains(&c0) {
            return domain(format!("c0 = {c0} outside [0, 1]"));
        }
        if truncation < 16 {
            return domain("truncation too short");
        }
        let mut law = Self { params, ell, c0, truncation, log_a: vec![0.0; truncation + 2] };
        law.log_a[truncation + 1] = law.log_tail(truncation + 1);
        for j in (1..=truncation).rev() {
            law.log_a[j] = law.log_a[j + 1] + (-law.k_tilde(j)).ln_1p();
        }
        law.log_a[0] = f64::NAN;
        Ok(law)
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// `K~(x)`, the chance the coarse site at distance `x` from the front is
    /// reached in one step.
    pub fn k_tilde(&self, x: usize) -> f64 {
        let lk = self.params.lambda() * self.params.k((x + 1) * self.ell);
        self.c0 * lk / (lk + 1.0)
    }

    /// Prefactor `B` of `K~(i) ~ B (i + 1)^-(1+rho)`.
    fn tail_prefactor(&self) -> f64 {
        self.c0 * self.params.lambda() * self.params.norm() * (self.ell as f64).powf(-self.params.exponent())
    }

    /// `log A(m)` past the table: `-B sum_{x >= m + 1} x^-s` by
    /// Euler–Maclaurin. The neglected `K~^2` terms are below `1e-20` there.
    fn log_tail(&self, m: usize) -> f64 {
        let s = self.params.exponent();
        let big_m = (m + 1) as f64;
        let hurwitz = big_m.powf(1.0 - s) / (s - 1.0) + 0.5 * big_m.powf(-s) + s * big_m.powf(-s - 1.0) / 12.0;
        -self.tail_prefactor() * hurwitz
    }

    /// `log A(j)` for `j >= 1`.
    pub fn log_survival(&self, j: usize) -> f64 {
        debug_assert!(j >= 1);
        self.log_a.get(j).copied().unwrap_or_else(|| self.log_tail(j))
    }

    /// `Q(j)`.
    pub fn jump_probability(&self, j: usize) -> f64 {
        if j == 0 {
            self.log_survival(1).exp()
        } else {
            self.k_tilde(j) * self.log_survival(j + 1).exp()
        }
    }

    /// `sum_{j > N} Q(j) = 1 - A(N + 1)`.
    pub fn tail_mass(&self) -> f64 {
        -self.log_a[self.truncation + 1].exp_m1()
    }

    /// Smallest `j` with `A(j + 1) > u`, i.e. the inverse CDF of `Q`.
    fn invert(&self, u: f64) -> usize {
        let lu = u.ln();
        let table = &self.log_a[1..];
        if lu < table[table.len() - 1] {
            // First index i with table[i] > lu; A(i + 1) = table[i].
            return table.partition_point(|&v| v <= lu);
        }
        // Solve B (M - 1/2)^-rho / rho < -log u for the integer M = j + 2.
        let rho = self.params.rho();
        let m = (self.tail_prefactor() / (rho * -lu)).powf(1.0 / rho) + 0.5;
        ((m.floor() as usize).saturating_sub(1)).max(self.truncation + 1)
    }

    /// One increment of the front.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.invert(rng.random::<f64>())
    }

    /// One increment conditioned to be positive.
    pub fn sample_positive<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let q0 = self.jump_probability(0);
        let u = q0 + (1.0 - q0) * rng.random::<f64>();
        self.invert(u).max(1)
    }
}

/// `Q(j)`.
pub fn front_jump_law(j: usize, law: &FrontLaw) -> f64 {
    law.jump_probability(j)
}

/// `f(steps)` for one renewal front. Zero increments are skipped in bulk:
/// the number of positive ones is binomial.
pub fn front_position<R: Rng + ?Sized>(law: &FrontLaw, steps: u64, rng: &mut R) -> u64 {
    let p = 1.0 - law.jump_probability(0);
    let jumps = if p <= 0.0 { 0 } else { Binomial::new(steps, p.min(1.0)).expect("valid binomial").sample(rng) };
    (0..jumps).map(|_| law.sample_positive(rng) as u64).sum()
}

/// `trials` independent samples of `f(steps)`.
pub fn simulate_front_renewal(law: &FrontLaw, steps: u64, trials: usize, seed: u64, cell: u64) -> Vec<u64> {
    (0..trials).into_par_iter().map(|i| front_position(law, steps, &mut trial_stream(seed, cell, i as u64))).collect()
}

/// Exact `P(f(steps) in (n/4, 3n/4))` by truncated convolution powers of
/// `Q`, exact because increments are nonnegative.
pub fn front_window_probability_exact(law: &FrontLaw, n: u64, steps: u64) -> f64 {
    let top = (3 * n).div_ceil(4) as usize;
    let q: Vec<f64> = (0..=top).map(|j| law.jump_probability(j)).collect();
    let convolve =
        |a: &[f64], b: &[f64]| -> Vec<f64> { (0..=top).map(|k| (0..=k).map(|i| a[i] * b[k - i]).sum()).collect() };
    let mut result = vec![0.0; top + 1];
    result[0] = 1.0;
    let mut base = q;
    let mut e = steps;
    while e > 0 {
        if e & 1 == 1 {
            result = convolve(&result, &base);
        }
        base = convolve(&base, &base);
        e >>= 1;
    }
    let (lo, hi) = (n as f64 / 4.0, 3.0 * n as f64 / 4.0);
    result.iter().enumerate().filter(|(x, _)| (*x as f64) > lo && (*x as f64) < hi).map(|(_, p)| p).sum()
}

/// Empirical `P(f(T) in (n/4, 3n/4))` with `T = T(n, ell)`.
pub fn front_window_probability(law: &FrontLaw, n: u64, trials: usize, seed: u64, cell: u64) -> f64 {
    let steps = t_scale(n, law.ell() as u64, law.params().rho());
    let (lo, hi) = (n as f64 / 4.0, 3.0 * n as f64 / 4.0);
    let hits = simulate_front_renewal(law, steps, trials, seed, cell)
        .iter()
        .filter(|&&f| (f as f64) > lo && (f as f64) < hi)
        .count();
    hits as f64 / trials as f64
}

/// `L(mu) = sum_j Q(j) exp(-mu j)`, summed over the table; increments
/// past it contribute `exp(-mu j) < exp(-mu N)`, bounded by the tail mass.
pub fn front_laplace_transform(mu: f64, law: &FrontLaw) -> Result<f64> {
    if !(mu > 0.0) {
        return domain("mu must be positive");
    }
    let mut loss = 0.0;
    for j in 1..=law.truncation() {
        let w = -(-mu * j as f64).exp_m1();
        loss += law.jump_probability(j) * w;
    }
    let tail_weight = -(-mu * (law.truncation() + 1) as f64).exp_m1();
    Ok(1.0 - loss - law.tail_mass() * tail_weight)
}

/// Log-log fit of `1 - L(mu)` against `mu`.
pub fn laplace_exponent_fit(law: &FrontLaw, mus: &[f64]) -> Result<LinearFit> {
    let ys = mus.iter().map(|&m| front_laplace_transform(m, law).map(|l| 1.0 - l)).collect::<Result<Vec<_>>>()?;
    log_log_fit(mus, &ys).ok_or_else(|| crate::error::Error::Domain("need at least two distinct mu".into()))
}

/// `2^(2+rho) lambda C_K`, which dominates the mirrored front's jump rates.
pub fn default_rate_constant(params: &KernelParams) -> f64 {
    2f64.powf(1.0 + params.exponent()) * params.lambda() * params.norm()
}

/// Pure-jump walk with rate `C x^-(1+rho)` for a jump of size `x`.
#[derive(Debug, Clone, Copy)]
pub struct DominationWalk {
    pub rho: f64,
    pub rate_constant: f64,
}

impl DominationWalk {
    pub fn new(rho: f64, rate_constant: f64) -> Result<Self> {
        if !(rate_constant > 0.0) {
            return domain("rate constant must be positive");
        }
        if !(rho > 0.0 && rho < 1.0) {
            return domain("rho must lie in (0, 1)");
        }
        Ok(Self { rho, rate_constant })
    }

    /// `C zeta(1 + rho)`.
    pub fn total_rate(&self) -> f64 {
        self.rate_constant / crate::laws::zeta_norm(self.rho).expect("rho validated")
    }

    fn sizes(&self) -> Zeta<f64> {
        Zeta::new(1.0 + self.rho).expect("exponent above 1")
    }

    /// `y(t)` from `y(0) = 0`.
    pub fn value_at<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> u64 {
        if t <= 0.0 {
            return 0;
        }
        let jumps = Poisson::new(t * self.total_rate()).expect("positive mean").sample(rng) as u64;
        let sizes = self.sizes();
        (0..jumps).map(|_| sizes.sample(rng) as u64).sum()
    }

    /// Jump times and values up to `horizon`, stopped once `cap` is reached.
    pub fn path<R: Rng + ?Sized>(&self, horizon: f64, cap: u64, rng: &mut R) -> Vec<(f64, u64)> {
        let mut path = vec![(0.0, 0)];
        let (mut t, mut y) = (0.0, 0u64);
        let sizes = self.sizes();
        let rate = self.total_rate();
        while y < cap {
            t += -rng.random::<f64>().ln_1p_neg() / rate;
            if t > horizon {
                break;
            }
            y = (y + sizes.sample(rng) as u64).min(cap);
            path.push((t, y));
        }
        path
    }
}

trait LnOneMinus {
    fn ln_1p_neg(self) -> f64;
}

impl LnOneMinus for f64 {
    /// `ln(1 - self)`.
    fn ln_1p_neg(self) -> f64 {
        (-self).ln_1p()
    }
}

/// `y(t)` with the rate constant `C`, capped at `cap`.
pub fn simulate_domination_walk<R: Rng + ?Sized>(
    params: &KernelParams,
    rate_constant: f64,
    horizon: f64,
    cap: u64,
    rng: &mut R,
) -> Result<Vec<(f64, u64)>> {
    Ok(DominationWalk::new(params.rho(), rate_constant)?.path(horizon, cap, rng))
}

/// `trials` samples of `y(n^rho) / n`.
pub fn domination_walk_scaled(walk: &DominationWalk, n: u64, trials: usize, seed: u64, cell: u64) -> Vec<f64> {
    let t = (n as f64).powf(walk.rho);
    (0..trials)
        .into_par_iter()
        .map(|i| walk.value_at(t, &mut trial_stream(seed, cell, i as u64)) as f64 / n as f64)
        .collect()
}

/// Front of the mirrored creation-only chain coupled under the walk.
#[derive(Debug, Clone, Serialize)]
pub struct CoupledFront {
    pub times: Vec<f64>,
    pub front: Vec<u64>,
    pub walk: Vec<u64>,
}

/// Runs the front `f~` of the mirrored creation-only chain on `[0, len]`
/// jointly with the walk `y`: every walk proposal of size `x` moves the
/// front by `x` with probability `rate(f~, x) / (C x^-(1+rho))`, so
/// `f~ <= y` holds along the whole path. Fails if `C` does not dominate.
pub fn coupled_mirrored_front<R: Rng + ?Sized>(
    params: &KernelParams,
    rate_constant: f64,
    len: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<CoupledFront> {
    let walk = DominationWalk::new(params.rho(), rate_constant)?;
    let rates = HeatBath::new(*params, len);
    let half = len / 2;
    let sizes = walk.sizes();
    let total = walk.total_rate();
    let (mut t, mut f, mut y) = (0.0, 0usize, 0u64);
    let mut out = CoupledFront { times: vec![0.0], front: vec![0], walk: vec![0] };
    loop {
        t += -rng.random::<f64>().ln_1p_neg() / total;
        if t > horizon {
            return Ok(out);
        }
        let x = sizes.sample(rng) as u64;
        y += x;
        let u: f64 = rng.random();
        let target = f as u64 + x;
        if target <= half as u64 {
            let site = target as usize;
            let copies = if 2 * site == len { 1.0 } else { 2.0 };
            let rate = copies * rates.occupation_probability(f, site, len - f);
            let bound = rate_constant * (x as f64).powf(-params.exponent());
            if rate > bound * (1.0 + 1e-12) {
                return contract(format!("rate constant {rate_constant} does not dominate the jump {f} -> {site}"));
            }
            if u < rate / bound {
                f = site;
            }
        }
        out.times.push(t);
        out.front.push(f as u64);
        out.walk.push(y);
    }
}

/// Reads `zeta_j(T_k)` off a censored trajectory: coarse site `j` becomes
/// 1 at `T_k` if `y_j` was occupied at `T_{k-1} + 1`, and stays 1.
#[derive(Debug, Clone)]
pub struct ZetaObserver {
    plan: CensoringPlan,
    points: Vec<usize>,
    steps: usize,
    /// `rows[k][j]` for `j = 0..=r+1`.
    rows: Vec<Vec<bool>>,
}

impl ZetaObserver {
    /// Observes `steps` periods of the censored `schedule`.
    pub fn new(schedule: &Schedule, len: usize, steps: usize) -> Result<Self> {
        let Schedule::Censored(plan) = schedule else {
            return contract("the zeta observer needs a censored schedule");
        };
        let points = plan.observation_points(len);
        let r = points.len();
        let mut first = vec![false; r + 2];
        first[0] = true;
        first[r + 1] = true;
        Ok(Self { plan: *plan, points, steps, rows: vec![first] })
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }

    /// First `k` at which every `zeta_j` is 1.
    pub fn filling_step(&self) -> Option<usize> {
        self.rows.iter().position(|row| row.iter().all(|&z| z))
    }
}

impl Observer for ZetaObserver {
    fn next_time(&self) -> Option<f64> {
        let k = self.rows.len() - 1;
        (k < self.steps).then(|| self.plan.time(k) + 1.0)
    }

    fn observe(&mut self, _t: f64, config: &Configuration) {
        let mut row = self.rows.last().expect("initial row").clone();
        for (j, &y) in self.points.iter().enumerate() {
            row[j + 1] |= config.contains(y);
        }
        self.rows.push(row);
    }
}

/// Runs the coarse filling process `zeta~` on `{0, ..., r}` (no particle
/// at the right end) until all of `1..=r` is occupied; returns the step.
pub fn zeta_tilde_filling_step<R: Rng + ?Sized>(
    law: &FrontLaw,
    r: usize,
    max_steps: usize,
    rng: &mut R,
) -> Option<usize> {
    let mut zeta = vec![false; r + 1];
    zeta[0] = true;
    let mut missing = r;
    for k in 1..=max_steps {
        let prev = zeta.clone();
        let mut h = 0;
        for j in 1..=r {
            if prev[j] {
                h = j;
            } else if rng.random::<f64>() < law.k_tilde(j - h) {
                zeta[j] = true;
                missing -= 1;
            }
        }
        if missing == 0 {
            return Some(k);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    fn params(lambda: f64) -> KernelParams {
        KernelParams::new(0.5, lambda).unwrap()
    }

    #[test]
    fn time_scale_example() {
        assert_eq!(t_scale(4, 10, 0.5), 63);
    }

    #[test]
    fn q_is_normalized_and_telescopes() {
        let law = FrontLaw::with_truncation(params(4.0), 32, 1.0, 1 << 16).unwrap();
        let head: f64 = (0..=law.truncation()).map(|j| law.jump_probability(j)).sum();
        assert!((head + law.tail_mass() - 1.0).abs() < 1e-8);
        for j in [1, 5, 100, 5000] {
            let a = |i: usize| law.log_survival(i).exp();
            assert_relative_eq!(law.jump_probability(j), a(j + 1) - a(j), max_relative = 1e-8);
        }
    }

    #[test]
    fn table_tail_matches_extension() {
        // A shorter table closed by the Euler–Maclaurin tail agrees with a
        // longer one summed term by term.
        let short = FrontLaw::with_truncation(params(4.0), 16, 1.0, 1 << 12).unwrap();
        let long = FrontLaw::with_truncation(params(4.0), 16, 1.0, 1 << 20).unwrap();
        assert_relative_eq!(short.log_survival(1), long.log_survival(1), max_relative = 1e-9);
    }

    #[test]
    fn vanishing_c0_freezes_the_front() {
        let law = FrontLaw::with_truncation(params(4.0), 8, 0.0, 1024).unwrap();
        assert_eq!(law.jump_probability(0), 1.0);
        assert_eq!(front_position(&law, 1000, &mut stream(1, 0)), 0);
    }

    #[test]
    fn sampler_matches_q() {
        let law = FrontLaw::with_truncation(params(4.0), 2, 1.0, 1 << 14).unwrap();
        let mut rng = stream(2, 0);
        let n = 200_000;
        let mut counts = [0usize; 6];
        for _ in 0..n {
            let j = law.sample(&mut rng);
            if j < 6 {
                counts[j] += 1;
            }
        }
        for (j, c) in counts.iter().enumerate() {
            let p = law.jump_probability(j);
            assert!((*c as f64 / n as f64 - p).abs() < 5.0 * (p * (1.0 - p) / n as f64).sqrt() + 1e-9, "j={j}");
        }
    }

    #[test]
    fn monte_carlo_window_probability_matches_convolution() {
        let law = FrontLaw::with_truncation(params(4.0), 2, 1.0, 1 << 14).unwrap();
        let exact = front_window_probability_exact(&law, 64, 30);
        let steps = 30;
        let samples = simulate_front_renewal(&law, steps, 40_000, 3, 0);
        let hits = samples.iter().filter(|&&f| f > 16 && f < 48).count() as f64 / 40_000.0;
        assert!((hits - exact).abs() < 5.0 * (exact * (1.0 - exact) / 40_000.0).sqrt() + 1e-4, "{hits} vs {exact}");
    }

    #[test]
    fn laplace_transform_basics() {
        let law = FrontLaw::with_truncation(params(4.0), 16, 1.0, 1 << 16).unwrap();
        let small = front_laplace_transform(1e-12, &law).unwrap();
        assert!((small - 1.0).abs() < 1e-5);
        let vals: Vec<f64> =
            [1e-4, 1e-3, 1e-2, 1e-1].iter().map(|&m| front_laplace_transform(m, &law).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
        assert!(front_laplace_transform(0.0, &law).is_err());
    }

    #[test]
    fn walk_basics() {
        let p = params(4.0);
        let walk = DominationWalk::new(0.5, default_rate_constant(&p)).unwrap();
        assert_eq!(walk.value_at(0.0, &mut stream(1, 0)), 0);
        assert_relative_eq!(walk.total_rate() * p.norm(), walk.rate_constant, max_relative = 1e-12);
        let path = simulate_domination_walk(&p, walk.rate_constant, 50.0, 1000, &mut stream(1, 1)).unwrap();
        assert!(path.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
        assert!(path.last().unwrap().1 <= 1000);
    }

    #[test]
    fn mirrored_front_stays_below_the_walk() {
        let p = params(4.0);
        for seed in 0..20 {
            let run = coupled_mirrored_front(&p, default_rate_constant(&p), 2000, 100.0, &mut stream(seed, 0)).unwrap();
            assert!(run.front.iter().zip(&run.walk).all(|(f, y)| f <= y));
            assert!(*run.front.last().unwrap() <= 1000);
        }
        assert!(coupled_mirrored_front(&p, 0.01, 2000, 100.0, &mut stream(0, 0)).is_err());
    }

    #[test]
    fn zeta_observer_needs_censoring_and_is_monotone() {
        assert!(ZetaObserver::new(&Schedule::full(), 64, 5).is_err());
        let plan = CensoringPlan::new(4, 3.0).unwrap();
        let schedule = Schedule::Censored(plan);
        let mut obs = ZetaObserver::new(&schedule, 64, 40).unwrap();
        let rates = HeatBath::new(params(4.0), 64);
        crate::dynamics::simulate(
            Configuration::empty(64),
            None,
            &rates,
            crate::dynamics::UpdateRule::HeatBath,
            &schedule,
            plan.time(40) + 2.0,
            stream(4, 0),
            &mut [&mut obs],
        )
        .unwrap();
        let rows = obs.rows();
        assert_eq!(rows.len(), 41);
        let r = plan.observation_points(64).len();
        for w in rows.windows(2) {
            assert!(w[0][0] && w[0][r + 1]);
            assert!(w[0].iter().zip(&w[1]).all(|(a, b)| !a || *b));
        }
    }

    #[test]
    fn zeta_tilde_eventually_fills() {
        let law = FrontLaw::with_truncation(params(4.0), 2, 1.0, 1024).unwrap();
        let k = zeta_tilde_filling_step(&law, 10, 100_000, &mut stream(6, 0));
        assert!(k.is_some());
    }
}
