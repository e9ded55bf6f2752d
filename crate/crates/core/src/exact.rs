//! Exact linear algebra for small systems.
//!
//! States are interior bit masks (bit `x - 1` is site `x`), so the chain on
//! `{0, ..., L}` has `2^(L-1)` states and every transition flips one bit.
//! The generator is stored as one rate per `(state, site)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::configuration::Configuration;
use crate::dynamics::HeatBath;
use crate::equilibrium::{enumerate_measure, sample_config, EnumeratedMeasure};
use crate::error::{domain, Error, Result};
use crate::laws::{KernelParams, KernelTable};
use crate::rng::trial_stream;
use crate::stats::{batch_means, Estimate, MeanVar};

/// Largest system length for which the generator is built.
pub const GENERATOR_MAX_LEN: usize = 14;
/// Largest dimension handled by the dense eigensolver.
const DENSE_MAX_DIM: usize = 2048;
/// Poisson tail mass dropped by uniformization.
const UNIFORMIZATION_TAIL: f64 = 1e-10;

/// Continuous-time generator of the heat-bath chain.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    len: usize,
    dim: usize,
    sites: usize,
    /// `rates[s * sites + (x - 1)]` is the rate of flipping `x` from `s`.
    rates: Vec<f64>,
    exit: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Off-diagonal rate from `state` to `state ^ (1 << (x - 1))`.
    #[inline]
    pub fn rate(&self, state: usize, x: usize) -> f64 {
        self.rates[state * self.sites + x - 1]
    }

    /// Total exit rate of `state`; the diagonal entry is its negative.
    pub fn exit_rate(&self, state: usize) -> f64 {
        self.exit[state]
    }

    /// Largest `|row sum|`.
    pub fn row_sum_residual(&self) -> f64 {
        (0..self.dim)
            .map(|s| {
                let off: f64 = (1..=self.sites).map(|x| self.rate(s, x)).sum();
                (off - self.exit[s]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `max_s |(pi Q)(s)|`.
    pub fn stationarity_residual(&self, pi: &[f64]) -> f64 {
        (0..self.dim)
            .map(|s| {
                let inflow: f64 =
                    (1..=self.sites).map(|x| pi[s ^ (1 << (x - 1))] * self.rate(s ^ (1 << (x - 1)), x)).sum();
                (inflow - pi[s] * self.exit[s]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `max |pi(s) q(s, t) - pi(t) q(t, s)|` over single flips.
    pub fn detailed_balance_residual(&self, pi: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for s in 0..self.dim {
            for x in 1..=self.sites {
                let t = s ^ (1 << (x - 1));
                worst = worst.max((pi[s] * self.rate(s, x) - pi[t] * self.rate(t, x)).abs());
            }
        }
        worst
    }

    /// Dense generator, row-stochastic-derivative convention `(Q f)(s)`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(self.dim, self.dim);
        for s in 0..self.dim {
            q[(s, s)] = -self.exit[s];
            for x in 1..=self.sites {
                q[(s, s ^ (1 << (x - 1)))] = self.rate(s, x);
            }
        }
        q
    }

    /// `D^(1/2) Q D^(-1/2)` with `D = diag(pi)`; symmetric by reversibility.
    pub fn symmetrized(&self, pi: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for s in 0..self.dim {
            m[(s, s)] = -self.exit[s];
            for x in 1..=self.sites {
                let t = s ^ (1 << (x - 1));
                m[(s, t)] = (pi[s] / pi[t]).sqrt() * self.rate(s, x);
            }
        }
        m
    }

    /// Applies the symmetrized generator to `v`.
    fn symmetrized_apply(&self, sqrt_ratio: &[f64], v: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().for_each(|(s, o)| {
            let mut acc = -self.exit[s] * v[s];
            for x in 1..=self.sites {
                let t = s ^ (1 << (x - 1));
                acc += sqrt_ratio[s * self.sites + x - 1] * v[t];
            }
            *o = acc;
        });
    }

    /// One step of the uniformized jump kernel `P = I + Q / rate`.
    fn jump(&self, mu: &[f64], rate: f64, out: &mut [f64]) {
        out.par_iter_mut().enumerate().for_each(|(t, o)| {
            let mut acc = mu[t] * (1.0 - self.exit[t] / rate);
            for x in 1..=self.sites {
                let s = t ^ (1 << (x - 1));
                acc += mu[s] * self.rate(s, x) / rate;
            }
            *o = acc;
        });
    }

    /// Dirichlet form `(1/2) sum pi(s) q(s,t) (f(t) - f(s))^2`.
    pub fn dirichlet_form(&self, pi: &[f64], f: &[f64]) -> f64 {
        let mut acc = 0.0;
        for s in 0..self.dim {
            for x in 1..=self.sites {
                let t = s ^ (1 << (x - 1));
                acc += pi[s] * self.rate(s, x) * (f[t] - f[s]).powi(2);
            }
        }
        0.5 * acc
    }
}

/// Generator of the chain on `{0, ..., len}`.
pub fn build_generator(len: usize, params: &KernelParams) -> Result<GeneratorMatrix> {
    if len == 0 {
        return domain("system length must be positive");
    }
    if len > GENERATOR_MAX_LEN {
        return Err(Error::Resource(format!("generator for L = {len} exceeds L <= {GENERATOR_MAX_LEN}")));
    }
    let hb = HeatBath::new(*params, len);
    let dim = 1usize << (len - 1);
    let sites = len - 1;
    let mut rates = vec![0.0; dim * sites];
    let mut exit = vec![0.0; dim];
    rates.par_chunks_mut(sites.max(1)).zip(exit.par_iter_mut()).enumerate().for_each(|(s, (row, e))| {
        let cfg = Configuration::from_mask(len, s as u64);
        for x in 1..len {
            row[x - 1] = hb.flip_rate(&cfg, x).expect("interior site");
        }
        *e = row.iter().sum();
    });
    if sites == 0 {
        rates.clear();
    }
    Ok(GeneratorMatrix { len, dim, sites, rates, exit })
}

/// Spectral gap with its relaxation time.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectralGap {
    pub gap: f64,
    pub t_rel: f64,
}

fn sqrt_ratios(q: &GeneratorMatrix, pi: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; q.dim * q.sites];
    for s in 0..q.dim {
        for x in 1..=q.sites {
            let t = s ^ (1 << (x - 1));
            w[s * q.sites + x - 1] = (pi[s] / pi[t]).sqrt() * q.rate(s, x);
        }
    }
    w
}

/// Largest eigenvalue of the symmetrized generator on the complement of
/// `sqrt(pi)`, by Lanczos with full reorthogonalization.
fn lanczos_gap(q: &GeneratorMatrix, pi: &[f64], max_iter: usize) -> f64 {
    let dim = q.dim;
    let w = sqrt_ratios(q, pi);
    let top: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
    let project = |v: &mut [f64]| {
        let c: f64 = v.iter().zip(&top).map(|(a, b)| a * b).sum();
        v.iter_mut().zip(&top).for_each(|(a, b)| *a -= c * b);
    };
    let normalize = |v: &mut [f64]| {
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= n);
        n
    };
    // Deterministic start with components in every direction.
    let mut v: Vec<f64> = (0..dim).map(|i| ((i as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5).collect();
    project(&mut v);
    normalize(&mut v);
    let mut basis: Vec<Vec<f64>> = vec![v];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut out = vec![0.0; dim];
    let mut previous = f64::NEG_INFINITY;
    for k in 0..max_iter.min(dim - 1) {
        q.symmetrized_apply(&w, &basis[k], &mut out);
        let a: f64 = out.iter().zip(&basis[k]).map(|(x, y)| x * y).sum();
        alpha.push(a);
        for b in &basis {
            let c: f64 = out.iter().zip(b).map(|(x, y)| x * y).sum();
            out.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        project(&mut out);
        let t = DMatrix::from_fn(alpha.len(), alpha.len(), |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let ritz = t.symmetric_eigenvalues().max();
        let norm = out.iter().map(|a| a * a).sum::<f64>().sqrt();
        if (ritz - previous).abs() <= 1e-13 * ritz.abs() || norm < 1e-12 {
            return -ritz;
        }
        previous = ritz;
        beta.push(norm);
        let mut next = out.clone();
        next.iter_mut().for_each(|a| *a /= norm);
        basis.push(next);
    }
    -previous
}

/// Exact spectral gap from the symmetrized generator: a dense symmetric
/// eigensolve up to dimension 2048, Lanczos above.
pub fn spectral_gap_of(q: &GeneratorMatrix, pi: &[f64]) -> f64 {
    if q.dim == 1 {
        return f64::INFINITY;
    }
    if q.dim <= DENSE_MAX_DIM {
        let mut eig: Vec<f64> = q.symmetrized(pi).symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        -eig[1]
    } else {
        lanczos_gap(q, pi, 400)
    }
}

pub fn spectral_gap_exact(len: usize, params: &KernelParams) -> Result<SpectralGap> {
    let q = build_generator(len, params)?;
    let mu = enumerate_measure(len, params)?;
    let gap = spectral_gap_of(&q, mu.probs());
    Ok(SpectralGap { gap, t_rel: 1.0 / gap })
}

/// `Var_pi(f)`.
pub fn variance(pi: &[f64], f: &[f64]) -> f64 {
    let mean: f64 = pi.iter().zip(f).map(|(p, v)| p * v).sum();
    pi.iter().zip(f).map(|(p, v)| p * (v - mean).powi(2)).sum()
}

/// Rayleigh quotients `E(f, f) / Var(f)` for `count` random functions;
/// every one of them bounds the gap from above.
pub fn random_rayleigh_quotients<R: Rng + ?Sized>(
    q: &GeneratorMatrix,
    pi: &[f64],
    count: usize,
    rng: &mut R,
) -> Vec<f64> {
    (0..count)
        .map(|_| {
            let f: Vec<f64> = (0..q.dim).map(|_| rng.random::<f64>() - 0.5).collect();
            q.dirichlet_form(pi, &f) / variance(pi, &f)
        })
        .collect()
}

/// Total variation distance.
pub fn total_variation(mu: &[f64], nu: &[f64]) -> f64 {
    0.5 * mu.iter().zip(nu).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Total variation between the projections onto the sites of `window`.
pub fn total_variation_windowed(mu: &[f64], nu: &[f64], window: &[usize]) -> f64 {
    let key = |s: usize| window.iter().enumerate().fold(0usize, |k, (i, &x)| k | ((s >> (x - 1) & 1) << i));
    let mut a = vec![0.0; 1 << window.len()];
    let mut b = vec![0.0; 1 << window.len()];
    for s in 0..mu.len() {
        a[key(s)] += mu[s];
        b[key(s)] += nu[s];
    }
    total_variation(&a, &b)
}

/// Evolves `init` to every time of the increasing `times` by
/// uniformization at rate `L - 1`, which bounds every exit rate.
pub fn evolve(q: &GeneratorMatrix, init: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let rate = (q.sites as f64).max(1.0);
    let mut current = init.to_vec();
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    let mut scratch = vec![0.0; q.dim];
    for &t in times {
        if t < now {
            return domain("time grid must be nondecreasing");
        }
        let mean = rate * (t - now);
        if mean > 0.0 {
            let mut acc = vec![0.0; q.dim];
            let mut term = current.clone();
            let mut log_w = -mean;
            let mut mass = 0.0;
            let limit = (mean + 20.0 * mean.sqrt() + 50.0) as usize * 4;
            let mut n = 0;
            loop {
                let w = log_w.exp();
                acc.iter_mut().zip(&term).for_each(|(a, v)| *a += w * v);
                mass += w;
                if 1.0 - mass <= UNIFORMIZATION_TAIL && n as f64 >= mean {
                    break;
                }
                n += 1;
                if n > limit {
                    return Err(Error::Resource(format!("uniformization did not converge at t = {t}")));
                }
                q.jump(&term, rate, &mut scratch);
                std::mem::swap(&mut term, &mut scratch);
                log_w += mean.ln() - (n as f64).ln();
            }
            current = acc;
        }
        now = t;
        out.push(current.clone());
    }
    Ok(out)
}

/// `||mu_t - pi||` along `times` from the initial law `init`.
pub fn tv_curve_exact(q: &GeneratorMatrix, pi: &[f64], init: &[f64], times: &[f64]) -> Result<Vec<f64>> {
    Ok(evolve(q, init, times)?.iter().map(|mu| total_variation(mu, pi)).collect())
}

/// Point mass at `state`.
pub fn point_mass(dim: usize, state: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[state] = 1.0;
    v
}

/// Worst-start distance `max_s ||P_t(s, .) - pi||` at each time.
pub fn worst_start_tv(q: &GeneratorMatrix, pi: &[f64], times: &[f64]) -> Result<Vec<f64>> {
    let per_start: Vec<Vec<f64>> = (0..q.dim)
        .into_par_iter()
        .map(|s| tv_curve_exact(q, pi, &point_mass(q.dim, s), times))
        .collect::<Result<_>>()?;
    Ok((0..times.len()).map(|i| per_start.iter().map(|c| c[i]).fold(0.0, f64::max)).collect())
}

/// First time the worst-start distance drops to `threshold`, to within
/// `tol`, by doubling and bisection.
pub fn t_mix_exact(q: &GeneratorMatrix, pi: &[f64], threshold: f64, tol: f64) -> Result<f64> {
    let d = |t: f64| -> Result<f64> { Ok(worst_start_tv(q, pi, &[t])?[0]) };
    if d(0.0)? <= threshold {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while d(hi)? > threshold {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Resource("mixing time beyond 1e6".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if d(mid)? > threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Exact small-system summary used by the sandwich check
/// `T_rel <= t_mix <= log(2e / pi_min) T_rel`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExactMixing {
    pub gap: SpectralGap,
    pub t_mix: f64,
    pub pi_min: f64,
}

impl ExactMixing {
    pub fn upper_bound(&self) -> f64 {
        (2.0 * std::f64::consts::E / self.pi_min).ln() * self.gap.t_rel
    }

    pub fn sandwich_holds(&self) -> bool {
        self.gap.t_rel <= self.t_mix && self.t_mix <= self.upper_bound()
    }
}

pub fn exact_mixing(len: usize, params: &KernelParams, threshold: f64) -> Result<ExactMixing> {
    let q = build_generator(len, params)?;
    let mu = enumerate_measure(len, params)?;
    let gap = spectral_gap_of(&q, mu.probs());
    let t_mix = t_mix_exact(&q, mu.probs(), threshold, 1e-6)?;
    let pi_min = mu.probs().iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ExactMixing { gap: SpectralGap { gap, t_rel: 1.0 / gap }, t_mix, pi_min })
}

/// Upper bound on the gap from the particle-count test function.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct VariationalBound {
    pub bound: f64,
    /// `E[sum_x eta_x d_x(eta)]`, the Dirichlet form of the particle count.
    pub dirichlet: f64,
    pub variance: f64,
    pub ci: Estimate,
    /// Zero for the exact evaluation.
    pub samples: usize,
}

/// `sum over particles of their destruction rates`, from consecutive gaps.
pub fn total_destruction_rate(config: &Configuration, rates: &HeatBath) -> f64 {
    let sites: Vec<usize> = config.sites().collect();
    sites.windows(3).map(|w| rates.vacancy_probability(w[0], w[1], w[2])).sum()
}

fn bound_from_measure(mu: &EnumeratedMeasure, rates: &HeatBath) -> Result<VariationalBound> {
    let (mut d, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (cfg, p) in mu.iter() {
        let n = cfg.particle_count() as f64;
        d += p * total_destruction_rate(&cfg, rates);
        m1 += p * n;
        m2 += p * n * n;
    }
    let var = m2 - m1 * m1;
    if !(var > 0.0) {
        return domain("the particle count is constant, so the quotient is undefined");
    }
    let bound = d / var;
    Ok(VariationalBound { bound, dirichlet: d, variance: var, ci: Estimate::exact(bound), samples: 0 })
}

/// `E(f, f) / Var(f)` for `f` the particle count: exact by enumeration
/// when `samples == 0` (L <= 16), otherwise from exact equilibrium samples
/// with a batch-means interval.
pub fn variational_gap_bound(
    len: usize,
    table: &KernelTable,
    samples: usize,
    seed: u64,
    cell: u64,
) -> Result<VariationalBound> {
    let rates = HeatBath::new(*table.params(), len);
    if samples == 0 {
        return bound_from_measure(&enumerate_measure(len, table.params())?, &rates);
    }
    let draws: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_stream(seed, cell, i as u64);
            let cfg = sample_config(len, table, &mut rng)?;
            Ok((total_destruction_rate(&cfg, &rates), cfg.particle_count() as f64))
        })
        .collect::<Result<_>>()?;
    let ratio = |chunk: &[(f64, f64)]| {
        let d: MeanVar = chunk.iter().map(|p| p.0).collect();
        let n: MeanVar = chunk.iter().map(|p| p.1).collect();
        d.mean() / n.variance()
    };
    let d: MeanVar = draws.iter().map(|p| p.0).collect();
    let n: MeanVar = draws.iter().map(|p| p.1).collect();
    if !(n.variance() > 0.0) {
        return domain("sampled particle count has zero variance");
    }
    let ci = batch_means(&draws, 20, ratio);
    Ok(VariationalBound { bound: ci.value, dirichlet: d.mean(), variance: n.variance(), ci, samples })
}

/// `(pi Q)` and detailed-balance residuals against enumeration.
pub fn reversibility_residuals(len: usize, params: &KernelParams) -> Result<(f64, f64)> {
    let q = build_generator(len, params)?;
    let mu = enumerate_measure(len, params)?;
    Ok((q.detailed_balance_residual(mu.probs()), q.stationarity_residual(mu.probs())))
}

/// Largest entry of `S - S^T` for the symmetrized generator `S`.
pub fn symmetry_residual(q: &GeneratorMatrix, pi: &[f64]) -> f64 {
    let m = q.symmetrized(pi);
    (&m - m.transpose()).amax()
}

/// Applies the dense generator to a function, for cross-checks.
pub fn apply_dense(q: &GeneratorMatrix, f: &[f64]) -> Vec<f64> {
    (q.to_dense() * DVector::from_column_slice(f)).iter().copied().collect()
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
    fn two_state_chain() {
        for lambda in [0.5, 1.0, 4.0] {
            let q = build_generator(2, &params(lambda)).unwrap();
            assert_eq!(q.dim(), 2);
            assert_relative_eq!(q.rate(0, 1) + q.rate(1, 1), 1.0, epsilon = 1e-14);
            let g = spectral_gap_exact(2, &params(lambda)).unwrap();
            assert_relative_eq!(g.gap, 1.0, epsilon = 1e-12);
        }
        let q = build_generator(2, &params(1.0)).unwrap();
        assert_relative_eq!(q.rate(0, 1), 0.519_85, epsilon = 1e-5);
    }

    #[test]
    fn residuals_vanish() {
        for len in 2..=10 {
            for lambda in [0.5, 1.0, 4.0] {
                let q = build_generator(len, &params(lambda)).unwrap();
                let mu = enumerate_measure(len, &params(lambda)).unwrap();
                assert!(q.row_sum_residual() <= 1e-13);
                assert!(q.detailed_balance_residual(mu.probs()) <= 1e-12);
                assert!(q.stationarity_residual(mu.probs()) <= 1e-12);
                if len <= 8 {
                    assert!(symmetry_residual(&q, mu.probs()) <= 1e-12);
                }
            }
        }
        assert!(matches!(build_generator(15, &params(1.0)), Err(Error::Resource(_))));
    }

    #[test]
    fn dense_generator_kills_constants() {
        let q = build_generator(6, &params(2.0)).unwrap();
        assert!(apply_dense(&q, &vec![1.0; q.dim()]).iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn gap_is_below_every_rayleigh_quotient() {
        let p = params(1.0);
        let q = build_generator(8, &p).unwrap();
        let mu = enumerate_measure(8, &p).unwrap();
        let gap = spectral_gap_of(&q, mu.probs());
        let quotients = random_rayleigh_quotients(&q, mu.probs(), 100, &mut stream(2, 0));
        assert!(quotients.iter().all(|r| gap <= r + 1e-12));
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let p = params(1.0);
        let q = build_generator(10, &p).unwrap();
        let mu = enumerate_measure(10, &p).unwrap();
        let dense = spectral_gap_of(&q, mu.probs());
        let lanczos = lanczos_gap(&q, mu.probs(), 400);
        assert_relative_eq!(dense, lanczos, max_relative = 1e-9);
    }

    #[test]
    fn gap_decreases_with_length_at_criticality() {
        let gaps: Vec<f64> = (6..=10).map(|l| spectral_gap_exact(l, &params(1.0)).unwrap().gap).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    }

    #[test]
    fn tv_curves_start_right_and_decrease() {
        let p = params(1.0);
        let len = 6;
        let q = build_generator(len, &p).unwrap();
        let mu = enumerate_measure(len, &p).unwrap();
        let plus = (1 << (len - 1)) - 1;
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.3).collect();
        let curve = tv_curve_exact(&q, mu.probs(), &point_mass(q.dim(), plus), &times).unwrap();
        assert_relative_eq!(curve[0], 1.0 - mu.probs()[plus], epsilon = 1e-14);
        assert!(curve.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(curve[49] < 1e-3);
        let windowed = total_variation_windowed(&point_mass(q.dim(), plus), mu.probs(), &[2, 3]);
        assert!(windowed <= curve[0] + 1e-15);
    }

    #[test]
    fn sandwich_on_small_systems() {
        for lambda in [0.5, 1.0, 4.0] {
            let m = exact_mixing(5, &params(lambda), crate::coupling::MIXING_THRESHOLD).unwrap();
            assert!(m.sandwich_holds(), "{m:?}");
        }
    }

    #[test]
    fn variational_bound_exact_and_sampled_agree() {
        let table = KernelTable::build(params(1.0), 12).unwrap();
        let exact = variational_gap_bound(12, &table, 0, 0, 0).unwrap();
        let sampled = variational_gap_bound(12, &table, 40_000, 5, 0).unwrap();
        assert!((sampled.bound - exact.bound).abs() < 4.0 * (sampled.ci.ci_high - sampled.ci.ci_low) / 2.0 + 1e-3);
        let gap = spectral_gap_exact(12, &params(1.0)).unwrap().gap;
        assert!(gap <= exact.bound);
        // L = 1 has no interior site, so the particle count is constant.
        let one = KernelTable::build(params(1.0), 1).unwrap();
        assert!(variational_gap_bound(1, &one, 0, 0, 0).is_err());
    }
}
