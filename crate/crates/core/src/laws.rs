//! Power-law inter-arrival laws, their tilted versions, the renewal mass
//! function and the pinning partition function.
//!
//! Everything that can grow or shrink exponentially in the system size is
//! kept in log space. Infinite series over the power law are summed
//! directly up to a cut-off and closed with an Euler–Maclaurin tail.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_ur};

use crate::error::{domain, Error, Result};

/// Direct terms summed before switching to the Euler–Maclaurin tail.
const SERIES_CUTOFF: usize = 256;

/// Parameters of the inter-arrival law `K(j) = C_K j^-(1+rho)` and the
/// pinning reward `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    rho: f64,
    lambda: f64,
    norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Delocalized,
    Critical,
    Localized,
}

impl KernelParams {
    pub fn new(rho: f64, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return domain(format!("lambda must be positive and finite, got {lambda}"));
        }
        let norm = zeta_norm(rho)?;
        Ok(Self { rho, lambda, norm })
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return domain(format!("lambda must be positive and finite, got {lambda}"));
        }
        Ok(Self { lambda, ..*self })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `C_K`.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Tail exponent `1 + rho`.
    pub fn exponent(&self) -> f64 {
        1.0 + self.rho
    }

    pub fn phase(&self) -> Phase {
        if self.lambda < 1.0 {
            Phase::Delocalized
        } else if self.lambda > 1.0 {
            Phase::Localized
        } else {
            Phase::Critical
        }
    }

    /// `log K(j)`; `-inf` at `j = 0`.
    pub fn log_k(&self, j: usize) -> f64 {
        if j == 0 {
            f64::NEG_INFINITY
        } else {
            self.norm.ln() - self.exponent() * (j as f64).ln()
        }
    }

    pub fn k(&self, j: usize) -> f64 {
        self.log_k(j).exp()
    }
}

/// `sum_{j >= 1} exp(-decay * j) * j^-s` for `s > 1`, `decay >= 0`.
pub fn power_law_series(s: f64, decay: f64) -> f64 {
    let head: f64 = (1..SERIES_CUTOFF)
        .map(|j| {
            let x = j as f64;
            (-decay * x - s * x.ln()).exp()
        })
        .sum();
    head + power_law_tail(s, decay, SERIES_CUTOFF as f64)
}

/// Euler–Maclaurin estimate of `sum_{j >= j0} exp(-decay j) j^-s`.
fn power_law_tail(s: f64, decay: f64, j0: f64) -> f64 {
    let integral = if decay == 0.0 {
        j0.powf(1.0 - s) / (s - 1.0)
    } else {
        let y = decay * j0;
        // Gamma(1-s, y) through Gamma(a, y) = (Gamma(a+1, y) - y^a e^-y) / a, a = 1-s.
        let a = 1.0 - s;
        let upper = gamma_ur(a + 1.0, y) * gamma(a + 1.0);
        let inc = (upper - (a * y.ln() - y).exp()) / a;
        decay.powf(s - 1.0) * inc
    };
    let g = (-decay * j0 - s * j0.ln()).exp();
    let h1 = -decay - s / j0;
    let h2 = s / (j0 * j0);
    let h3 = -2.0 * s / (j0 * j0 * j0);
    let d1 = g * h1;
    let d3 = g * (h1 * h1 * h1 + 3.0 * h1 * h2 + h3);
    integral + 0.5 * g - d1 / 12.0 + d3 / 720.0
}

/// Normalizing constant `C_K = 1 / zeta(1 + rho)`.
pub fn zeta_norm(rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return domain(format!("rho must lie in (0, 1), got {rho}"));
    }
    Ok(1.0 / power_law_series(1.0 + rho, 0.0))
}

/// `lim L^(1-rho) Z_L` at `lambda = 1`, i.e. `rho sin(pi rho) / (pi C_K)`,
/// from the renewal theorem for infinite-mean power-law gaps.
pub fn critical_partition_constant(rho: f64) -> Result<f64> {
    let pi = std::f64::consts::PI;
    Ok(rho * (pi * rho).sin() / (pi * zeta_norm(rho)?))
}

/// Free energy of the localized phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergy {
    pub value: f64,
    /// Set when `lambda < 1`: there is no tilt and `K_lambda = lambda K` is defective.
    pub defective: bool,
}

/// `lambda * sum_j exp(-f j) K(j) - 1`, decreasing in `f`.
pub fn tilt_residual(params: &KernelParams, f: f64) -> f64 {
    params.lambda * params.norm * power_law_series(params.exponent(), f) - 1.0
}

/// Root `F >= 0` of `lambda * sum_j exp(-F j) K(j) = 1`, by bisection on
/// `[0, log(lambda) + 1]`.
pub fn free_energy(params: &KernelParams) -> FreeEnergy {
    let lambda = params.lambda;
    if lambda < 1.0 {
        return FreeEnergy { value: 0.0, defective: true };
    }
    if lambda == 1.0 {
        return FreeEnergy { value: 0.0, defective: false };
    }
    let (mut lo, mut hi) = (0.0_f64, lambda.ln() + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = tilt_residual(params, mid);
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.max(1e-300) {
            break;
        }
    }
    FreeEnergy { value: 0.5 * (lo + hi), defective: false }
}

/// `log K_lambda(j)` given a precomputed free energy.
fn log_tilted(params: &KernelParams, f: f64, j: usize) -> f64 {
    params.lambda.ln() - f * j as f64 + params.log_k(j)
}

/// `log K_lambda(j)`: tilted and normalized for `lambda >= 1`, the
/// defective `lambda K(j)` for `lambda < 1`.
pub fn log_tilted_gap_law(j: usize, params: &KernelParams) -> Result<f64> {
    if j == 0 {
        return domain("gap length must be at least 1");
    }
    Ok(log_tilted(params, free_energy(params).value, j))
}

pub fn tilted_gap_law(j: usize, params: &KernelParams) -> Result<f64> {
    log_tilted_gap_law(j, params).map(f64::exp)
}

/// Renewal mass `P_lambda(n)` for `n = 0..=n_max` by forward recursion.
pub fn renewal_mass_table(k_lambda: &[f64], n_max: usize) -> Vec<f64> {
    let mut p = vec![0.0; n_max + 1];
    p[0] = 1.0;
    for n in 1..=n_max {
        let mut acc = 0.0;
        for y in 1..=n {
            acc += k_lambda[y] * p[n - y];
        }
        p[n] = acc;
    }
    p
}

/// `log Z_m` for `m = 0..=l` from the first-renewal decomposition
/// `Z_m = K(m) + sum_{x<m} lambda K(x) Z_{m-x}`, summed with log-sum-exp.
pub fn log_partition(l: usize, params: &KernelParams) -> Vec<f64> {
    let log_k: Vec<f64> = (0..=l).map(|j| params.log_k(j)).collect();
    log_partition_from(&log_k, params.lambda.ln(), l)
}

fn log_partition_from(log_k: &[f64], log_lambda: f64, l: usize) -> Vec<f64> {
    let mut log_z = vec![0.0; l + 1];
    let interior: Vec<f64> = log_k.iter().map(|v| v + log_lambda).collect();
    let mut terms = Vec::with_capacity(l);
    for m in 1..=l {
        terms.clear();
        terms.push(log_k[m]);
        for x in 1..m {
            terms.push(interior[x] + log_z[m - x]);
        }
        log_z[m] = log_sum_exp(&terms);
    }
    log_z
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Precomputed laws for fixed `(rho, lambda)` up to length `l_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    params: KernelParams,
    l_max: usize,
    free_energy: FreeEnergy,
    log_k: Vec<f64>,
    log_k_lambda: Vec<f64>,
    p_lambda: Vec<f64>,
    r_lambda: Option<Vec<f64>>,
    log_z: Vec<f64>,
}

impl KernelTable {
    pub fn build(params: KernelParams, l_max: usize) -> Result<Self> {
        if l_max == 0 {
            return domain("l_max must be positive");
        }
        let free_energy = free_energy(&params);
        let log_k: Vec<f64> = (0..=l_max).map(|j| params.log_k(j)).collect();
        let log_k_lambda: Vec<f64> = (0..=l_max)
            .map(|j| if j == 0 { f64::NEG_INFINITY } else { log_tilted(&params, free_energy.value, j) })
            .collect();
        let k_lambda: Vec<f64> = log_k_lambda.iter().map(|v| v.exp()).collect();
        let p_lambda = renewal_mass_table(&k_lambda, l_max);
        let log_z = log_partition_from(&log_k, params.lambda.ln(), l_max);
        Ok(Self::assemble(params, l_max, free_energy, log_k, log_k_lambda, p_lambda, log_z))
    }

    fn assemble(
        params: KernelParams,
        l_max: usize,
        free_energy: FreeEnergy,
        log_k: Vec<f64>,
        log_k_lambda: Vec<f64>,
        p_lambda: Vec<f64>,
        log_z: Vec<f64>,
    ) -> Self {
        let r_lambda = (params.lambda < 1.0).then(|| {
            let mut acc = 0.0;
            p_lambda
                .iter()
                .map(|p| {
                    acc += p;
                    (1.0 - params.lambda) * acc
                })
                .collect()
        });
        Self { params, l_max, free_energy, log_k, log_k_lambda, p_lambda, r_lambda, log_z }
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn free_energy(&self) -> FreeEnergy {
        self.free_energy
    }

    pub fn log_k(&self, j: usize) -> f64 {
        self.log_k.get(j).copied().unwrap_or_else(|| self.params.log_k(j))
    }

    pub fn log_k_table(&self) -> &[f64] {
        &self.log_k
    }

    pub fn log_k_lambda(&self, j: usize) -> f64 {
        self.log_k_lambda.get(j).copied().unwrap_or_else(|| log_tilted(&self.params, self.free_energy.value, j))
    }

    pub fn k_lambda(&self, j: usize) -> f64 {
        self.log_k_lambda(j).exp()
    }

    fn check(&self, n: usize) -> Result<()> {
        if n > self.l_max {
            Err(Error::TableExtension { requested: n, available: self.l_max })
        } else {
            Ok(())
        }
    }

    /// `P_lambda(n in renewal set)`.
    pub fn renewal_mass(&self, n: usize) -> Result<f64> {
        self.check(n)?;
        Ok(self.p_lambda[n])
    }

    pub fn renewal_mass_slice(&self) -> &[f64] {
        &self.p_lambda
    }

    /// Probability that the transient renewal has no point after `n`
    /// (delocalized phase only).
    pub fn survival(&self, n: usize) -> Result<f64> {
        self.check(n)?;
        match &self.r_lambda {
            Some(r) => Ok(r[n]),
            None => domain("survival function exists only for lambda < 1"),
        }
    }

    pub fn log_z(&self, m: usize) -> Result<f64> {
        self.check(m)?;
        Ok(self.log_z[m])
    }

    pub fn log_z_slice(&self) -> &[f64] {
        &self.log_z
    }

    /// Greens-function ratio `P_lambda(n) (1-lambda)^2 / K_lambda(n)`.
    pub fn greens_ratio(&self, n: usize) -> Result<f64> {
        if self.params.lambda >= 1.0 {
            return domain("greens ratio is defined for lambda < 1");
        }
        let p = self.renewal_mass(n)?;
        Ok(p * (1.0 - self.params.lambda).powi(2) / self.k_lambda(n))
    }

    pub fn cache_file_name(params: &KernelParams, l_max: usize) -> String {
        format!(
            "kernel-{:016x}-{:016x}-{}-v{}.bin",
            params.rho.to_bits(),
            params.lambda.to_bits(),
            l_max,
            CACHE_VERSION
        )
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        for v in [self.params.rho, self.params.lambda] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.l_max as u64).to_le_bytes())?;
        w.write_all(&self.free_energy.value.to_le_bytes())?;
        for arr in [&self.log_k_lambda, &self.p_lambda, &self.log_z] {
            for v in arr.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Invalid("not a kernel cache file".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != CACHE_VERSION {
            return Err(Error::Invalid("kernel cache format version mismatch".into()));
        }
        let mut b8 = [0u8; 8];
        let mut next = |r: &mut dyn Read| -> Result<[u8; 8]> {
            r.read_exact(&mut b8)?;
            Ok(b8)
        };
        let rho = f64::from_le_bytes(next(&mut r)?);
        let lambda = f64::from_le_bytes(next(&mut r)?);
        let l_max = u64::from_le_bytes(next(&mut r)?) as usize;
        let f = f64::from_le_bytes(next(&mut r)?);
        let params = KernelParams::new(rho, lambda)?;
        let mut arrays = Vec::with_capacity(3);
        for _ in 0..3 {
            let mut v = Vec::with_capacity(l_max + 1);
            for _ in 0..=l_max {
                v.push(f64::from_le_bytes(next(&mut r)?));
            }
            arrays.push(v);
        }
        let log_z = arrays.pop().unwrap();
        let p_lambda = arrays.pop().unwrap();
        let log_k_lambda = arrays.pop().unwrap();
        let log_k = (0..=l_max).map(|j| params.log_k(j)).collect();
        let free_energy = FreeEnergy { value: f, defective: lambda < 1.0 };
        Ok(Self::assemble(params, l_max, free_energy, log_k, log_k_lambda, p_lambda, log_z))
    }

    /// Loads the table from `dir` when a matching cache file exists, else
    /// builds it and writes the cache.
    pub fn load_or_build(params: KernelParams, l_max: usize, dir: Option<&Path>) -> Result<Self> {
        let Some(dir) = dir else {
            return Self::build(params, l_max);
        };
        let path: PathBuf = dir.join(Self::cache_file_name(&params, l_max));
        if let Ok(bytes) = fs::read(&path) {
            if let Ok(table) = Self::read_from(bytes.as_slice()) {
                return Ok(table);
            }
        }
        let table = Self::build(params, l_max)?;
        fs::create_dir_all(dir)?;
        let tmp = path.with_extension("tmp");
        let mut buf = Vec::new();
        table.write_to(&mut buf)?;
        fs::write(&tmp, buf)?;
        fs::rename(tmp, path)?;
        Ok(table)
    }
}

const CACHE_MAGIC: &[u8; 4] = b"PFKT";
pub const CACHE_VERSION: u32 = 1;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Partial sum to `n` terms plus the two integral tail bounds.
    fn zeta_bracket(s: f64, n: usize) -> (f64, f64) {
        let head: f64 = (1..=n).rev().map(|j| (j as f64).powf(-s)).sum();
        let lo = head + ((n + 1) as f64).powf(1.0 - s) / (s - 1.0);
        let hi = head + (n as f64).powf(1.0 - s) / (s - 1.0);
        (lo, hi)
    }

    #[test]
    fn zeta_norm_matches_bracketed_partial_sums() {
        let (lo, hi) = zeta_bracket(1.5, 10_000_000);
        let ck = zeta_norm(0.5).unwrap();
        assert!(1.0 / hi <= ck + 1e-15 && ck <= 1.0 / lo + 1e-15, "{ck} vs [{}, {}]", 1.0 / hi, 1.0 / lo);
        // The quoted seven-digit value is itself rounded loosely; agree to 1e-6.
        assert_relative_eq!(ck, 0.382_792_9, epsilon = 1e-6);
        for rho in [0.2, 0.7, 0.9] {
            let (lo, hi) = zeta_bracket(1.0 + rho, 1_000_000);
            let z = 1.0 / zeta_norm(rho).unwrap();
            assert!(z >= lo - 1e-12 && z <= hi + 1e-12, "rho={rho}");
        }
    }

    #[test]
    fn critical_partition_approaches_renewal_theorem_constant() {
        for (rho, tol) in [(0.5, 1e-3), (0.7, 5e-2)] {
            let p = KernelParams::new(rho, 1.0).unwrap();
            let len = 10_000;
            let log_z = log_partition(len, &p);
            let scaled = log_z[len].exp() * (len as f64).powf(1.0 - rho);
            assert_relative_eq!(scaled, critical_partition_constant(rho).unwrap(), max_relative = tol);
        }
    }

    #[test]
    fn zeta_norm_rejects_out_of_range() {
        assert!(zeta_norm(0.0).is_err());
        assert!(zeta_norm(1.0).is_err());
        assert!(zeta_norm(-0.3).is_err());
    }

    #[test]
    fn k_ratio_is_free_of_normalization() {
        let p = KernelParams::new(0.5, 1.0).unwrap();
        assert_relative_eq!(p.k(2) / p.k(1), 2f64.powf(-1.5), epsilon = 1e-15);
    }

    #[test]
    fn kernel_sums_to_one() {
        let p = KernelParams::new(0.5, 1.0).unwrap();
        assert_relative_eq!(p.norm() * power_law_series(1.5, 0.0), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn tilted_series_matches_direct_summation() {
        // Direct summation converges geometrically for a decay of 0.05.
        let direct: f64 = (1..200_000).map(|j| (-0.05 * j as f64).exp() * (j as f64).powf(-1.5)).sum();
        assert_relative_eq!(power_law_series(1.5, 0.05), direct, max_relative = 1e-13);
        let direct: f64 = (1..5_000_000).map(|j| (-1e-4 * j as f64).exp() * (j as f64).powf(-1.3)).sum();
        assert_relative_eq!(power_law_series(1.3, 1e-4), direct, max_relative = 1e-12);
    }

    #[test]
    fn free_energy_solves_tilt_equation() {
        let p = KernelParams::new(0.5, 4.0).unwrap();
        let f = free_energy(&p);
        assert!(!f.defective && f.value > 0.0 && f.value < 4f64.ln());
        // Independent residual: direct summation, geometric tail negligible.
        let direct: f64 = (1..20_000).map(|j| (-f.value * j as f64).exp() * p.k(j)).sum();
        assert!((4.0 * direct - 1.0).abs() <= 1e-10);
        assert_eq!(free_energy(&p.with_lambda(1.0).unwrap()).value, 0.0);
        let deloc = free_energy(&p.with_lambda(0.5).unwrap());
        assert!(deloc.defective && deloc.value == 0.0);
    }

    #[test]
    fn tilted_law_examples() {
        let p = KernelParams::new(0.5, 0.5).unwrap();
        assert_relative_eq!(tilted_gap_law(1, &p).unwrap(), 0.5 * zeta_norm(0.5).unwrap(), epsilon = 1e-15);
        assert_relative_eq!(tilted_gap_law(1, &p).unwrap(), 0.191_396_4, epsilon = 1e-6);
        let crit = p.with_lambda(1.0).unwrap();
        for j in [1, 7, 100] {
            assert_relative_eq!(tilted_gap_law(j, &crit).unwrap(), crit.k(j), max_relative = 1e-14);
        }
        let loc = p.with_lambda(4.0).unwrap();
        let f = free_energy(&loc).value;
        let total = 4.0 * loc.norm() * power_law_series(1.5, f);
        assert_relative_eq!(total, 1.0, epsilon = 1e-10);
        assert!(tilted_gap_law(0, &loc).is_err());
    }

    #[test]
    fn renewal_mass_small_values() {
        let p = KernelParams::new(0.5, 0.5).unwrap();
        let t = KernelTable::build(p, 50).unwrap();
        assert_eq!(t.renewal_mass(0).unwrap(), 1.0);
        assert_relative_eq!(t.renewal_mass(1).unwrap(), 0.5 * p.k(1), max_relative = 1e-14);
        assert!(matches!(t.renewal_mass(51), Err(Error::TableExtension { .. })));
    }

    #[test]
    fn renewal_recursion_is_order_independent() {
        let p = KernelParams::new(0.5, 4.0).unwrap();
        let t = KernelTable::build(p, 400).unwrap();
        let pl = t.renewal_mass_slice();
        for n in 1..=400 {
            let rev: f64 = (1..=n).rev().map(|y| t.k_lambda(y) * pl[n - y]).sum();
            assert_relative_eq!(pl[n], rev, max_relative = 1e-12);
        }
    }

    #[test]
    fn survival_tends_to_one_and_mass_to_inverse_gap() {
        let p = KernelParams::new(0.5, 0.5).unwrap();
        let t = KernelTable::build(p, 20_000).unwrap();
        let total: f64 = t.renewal_mass_slice().iter().sum();
        // Remaining tail ~ sum_{y>N} P(y) ~ 4 K_lambda-like decay, well below 2%.
        assert!((total - 2.0).abs() < 0.02, "{total}");
        assert!(t.survival(20_000).unwrap() > 0.98);
        assert!(t.survival(0).unwrap() - 0.5 < 1e-15);
    }

    #[test]
    fn partition_small_values() {
        let p = KernelParams::new(0.5, 1.0).unwrap();
        let lz = log_partition(2, &p);
        assert_eq!(lz[0], 0.0);
        assert_relative_eq!(lz[1].exp(), p.k(1), max_relative = 1e-14);
        assert_relative_eq!(lz[2].exp(), p.k(2) + p.k(1).powi(2), max_relative = 1e-14);
        assert_relative_eq!(lz[2].exp(), 0.281_869, epsilon = 1e-6);
    }

    #[test]
    fn partition_matches_renewal_identity() {
        // Z_m = exp(F m) P_lambda(m) / lambda ties the two recursions together.
        for lambda in [0.5, 1.0, 4.0] {
            let p = KernelParams::new(0.5, lambda).unwrap();
            let t = KernelTable::build(p, 300).unwrap();
            let f = t.free_energy().value;
            for m in 1..=300 {
                let via_renewal = f * m as f64 + t.renewal_mass(m).unwrap().ln() - lambda.ln();
                assert_relative_eq!(t.log_z(m).unwrap(), via_renewal, epsilon = 1e-10, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn cache_round_trip() {
        let p = KernelParams::new(0.4, 2.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let built = KernelTable::load_or_build(p, 64, Some(dir.path())).unwrap();
        let file = dir.path().join(KernelTable::cache_file_name(&p, 64));
        assert!(file.exists());
        let loaded = KernelTable::load_or_build(p, 64, Some(dir.path())).unwrap();
        assert_eq!(built, loaded);
    }
}
