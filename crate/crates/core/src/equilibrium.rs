//! Exact equilibrium: sequential renewal sampling, closed-form marginals
//! and a brute-force enumeration oracle.
//!
//! The Gibbs weight of a configuration with particles
//! `0 = x_0 < ... < x_{n+1} = L` is `lambda^n prod K(x_{i+1} - x_i)`, and
//! its normalization is the partition function `Z_L` stored in the
//! [`KernelTable`]. Conditioning on the first gap gives
//! `P(gap = j | m) = lambda^{1[j<m]} K(j) Z_{m-j} / Z_m`, so a sample is
//! built gap by gap without any Markov chain.

use rand::Rng;

use crate::configuration::Configuration;
use crate::error::{domain, Error, Result};
use crate::laws::{KernelParams, KernelTable};

/// Largest system length accepted by [`enumerate_measure`].
pub const ENUMERATION_MAX_LEN: usize = 16;

fn check_len(len: usize, table: &KernelTable) -> Result<()> {
    if len > table.l_max() {
        Err(Error::TableExtension { requested: len, available: table.l_max() })
    } else {
        Ok(())
    }
}

fn log_gap_unchecked(j: usize, m: usize, table: &KernelTable) -> f64 {
    let log_z = table.log_z_slice();
    let reward = if j < m { table.params().lambda().ln() } else { 0.0 };
    reward + table.log_k(j) + log_z[m - j] - log_z[m]
}

/// Log of the probability that the next gap is `j` when `m` sites remain.
pub fn log_gap_conditional(j: usize, m: usize, table: &KernelTable) -> Result<f64> {
    if j == 0 || j > m {
        return domain(format!("gap {j} outside [1, {m}]"));
    }
    check_len(m, table)?;
    Ok(log_gap_unchecked(j, m, table))
}

/// Probability that the next gap is `j` when `m` sites remain.
pub fn gap_conditional(j: usize, m: usize, table: &KernelTable) -> Result<f64> {
    log_gap_conditional(j, m, table).map(f64::exp)
}

/// Draws one gap by scanning the conditional law from both ends at once.
///
/// Low gaps own `[0, low_mass)` and high gaps own `[1 - high_mass, 1)`, so
/// the result is the inverse CDF of `u` regardless of where the scan meets.
/// The cost is the distance of the result to the nearer end, which keeps
/// the big middle gap of the delocalized phase cheap.
fn draw_gap(m: usize, u: f64, table: &KernelTable) -> usize {
    let (mut lo, mut hi) = (1usize, m);
    let (mut low_mass, mut high_mass) = (0.0f64, 0.0f64);
    loop {
        if lo >= hi {
            return lo.min(m);
        }
        low_mass += log_gap_unchecked(lo, m, table).exp();
        if u < low_mass {
            return lo;
        }
        lo += 1;
        if lo >= hi {
            return hi;
        }
        high_mass += log_gap_unchecked(hi, m, table).exp();
        if u >= 1.0 - high_mass {
            return hi;
        }
        hi -= 1;
    }
}

/// Particles strictly inside `(a, b)` drawn from equilibrium on `[a, b]`
/// with particles frozen at both ends.
pub fn sample_between<R: Rng + ?Sized>(a: usize, b: usize, table: &KernelTable, rng: &mut R) -> Result<Vec<usize>> {
    if b <= a {
        return domain(format!("empty interval [{a}, {b}]"));
    }
    check_len(b - a, table)?;
    let mut sites = Vec::new();
    let mut cursor = a;
    while cursor < b {
        let gap = draw_gap(b - cursor, rng.random::<f64>(), table);
        cursor += gap;
        if cursor < b {
            sites.push(cursor);
        }
    }
    Ok(sites)
}

/// Exact sample of the equilibrium measure on `{0, ..., len}`.
pub fn sample_config<R: Rng + ?Sized>(len: usize, table: &KernelTable, rng: &mut R) -> Result<Configuration> {
    let sites = sample_between(0, len, table, rng)?;
    Configuration::from_sites(len, sites)
}

/// Unnormalized log weight `n log(lambda) + sum log K(gap)`.
pub fn gibbs_log_weight(config: &Configuration, params: &KernelParams) -> f64 {
    let n = config.particle_count() as f64;
    n * params.lambda().ln() + config.gaps().map(|g| params.log_k(g)).sum::<f64>()
}

/// `log pi(config)` from the Gibbs weight and `Z_L`.
pub fn gibbs_log_prob(config: &Configuration, table: &KernelTable) -> Result<f64> {
    Ok(gibbs_log_weight(config, table.params()) - table.log_z(config.len())?)
}

/// Log probability the sequential sampler assigns to `config`: the sum of
/// the conditional gap log probabilities along its gaps.
pub fn sequential_log_prob(config: &Configuration, table: &KernelTable) -> Result<f64> {
    check_len(config.len(), table)?;
    let mut remaining = config.len();
    let mut total = 0.0;
    for gap in config.gaps() {
        total += log_gap_unchecked(gap, remaining, table);
        remaining -= gap;
    }
    Ok(total)
}

/// `pi(eta_x = 1) = lambda Z_x Z_{L-x} / Z_L`.
pub fn marginal_occupancy(x: usize, len: usize, table: &KernelTable) -> Result<f64> {
    if x == 0 || x >= len {
        return domain(format!("site {x} is not interior to [0, {len}]"));
    }
    check_len(len, table)?;
    let z = table.log_z_slice();
    Ok((table.params().lambda().ln() + z[x] + z[len - x] - z[len]).exp())
}

/// `pi(eta_b = 1 | eta_a = eta_d = 1) = lambda Z_{b-a} Z_{d-b} / Z_{d-a}`.
pub fn three_point_conditional(a: usize, b: usize, d: usize, table: &KernelTable) -> Result<f64> {
    if !(a < b && b < d) {
        return domain(format!("need a < b < d, got ({a}, {b}, {d})"));
    }
    marginal_occupancy(b - a, d - a, table)
}

/// Full equilibrium distribution for small systems, indexed by the interior
/// bit mask (bit `x - 1` is site `x`).
#[derive(Debug, Clone)]
pub struct EnumeratedMeasure {
    len: usize,
    probs: Vec<f64>,
}

impl EnumeratedMeasure {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn states(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, config: &Configuration) -> f64 {
        self.probs[config.interior_mask() as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Configuration, f64)> + '_ {
        self.probs.iter().enumerate().map(|(mask, &p)| (Configuration::from_mask(self.len, mask as u64), p))
    }

    pub fn marginal(&self, x: usize) -> f64 {
        let bit = 1usize << (x - 1);
        self.probs.iter().enumerate().filter(|(m, _)| m & bit != 0).map(|(_, p)| p).sum()
    }

    pub fn mean_particle_count(&self) -> f64 {
        self.probs.iter().enumerate().map(|(m, p)| p * (m as u64).count_ones() as f64).sum()
    }
}

/// Enumerates all `2^(L-1)` configurations and normalizes their Gibbs
/// weights by direct summation. Independent of the partition-function
/// recursion on purpose.
pub fn enumerate_measure(len: usize, params: &KernelParams) -> Result<EnumeratedMeasure> {
    if len == 0 {
        return domain("system length must be positive");
    }
    if len > ENUMERATION_MAX_LEN {
        return Err(Error::Resource(format!("enumeration of L = {len} exceeds the limit L <= {ENUMERATION_MAX_LEN}")));
    }
    let states = 1usize << (len - 1);
    let log_w: Vec<f64> =
        (0..states).map(|m| gibbs_log_weight(&Configuration::from_mask(len, m as u64), params)).collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(EnumeratedMeasure { len, probs: w.into_iter().map(|v| v / total).collect() })
}
