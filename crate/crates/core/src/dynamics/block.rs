//! Block heat-bath update: resample a whole window from equilibrium given
//! everything outside it.
//!
//! With `a` the last particle left of the block and `b` the first one to
//! its right, a block pattern with particles `z_1 < ... < z_k` has weight
//! `lambda^k K(z_1 - a) K(z_2 - z_1) ... K(b - z_k)`, and `K(b - a)` when
//! empty. A backward pass computes, for every block site `s`, the total
//! weight of the continuations from `s` to `b`, after which the pattern is
//! drawn particle by particle. This costs `O(|block|^2)` instead of the
//! `2^|block|` of enumeration.

use rand::Rng;

use super::HeatBath;
use crate::configuration::Configuration;
use crate::error::{domain, Error, Result};
use crate::laws::log_sum_exp;

/// Largest block accepted by the enumeration oracle.
const ENUMERATION_MAX_SITES: usize = 24;

/// `(lo, hi, a, b)`: the block `[lo, hi]` around `center` clipped to the
/// interior, and the nearest particles `a < lo`, `b > hi` outside it.
pub fn block_bounds(config: &Configuration, center: usize, half_width: usize) -> Result<(usize, usize, usize, usize)> {
    let len = config.len();
    if center == 0 || center >= len {
        return domain(format!("block center {center} is not interior to [0, {len}]"));
    }
    let lo = center.saturating_sub(half_width).max(1);
    let hi = (center + half_width).min(len - 1);
    Ok((lo, hi, config.last_at_or_before(lo - 1), config.first_at_or_after(hi + 1)))
}

/// Replaces the block around `center` with an exact sample of the
/// equilibrium measure conditioned on the configuration outside it.
pub fn block_resample<R: Rng + ?Sized>(
    config: &mut Configuration,
    center: usize,
    half_width: usize,
    rates: &HeatBath,
    rng: &mut R,
) -> Result<()> {
    let (lo, hi, _, _) = block_bounds(config, center, half_width)?;
    resample_range(config, lo, hi, rates, rng);
    Ok(())
}

/// Replaces the interior sites `lo..=hi` with an exact sample of the
/// equilibrium measure conditioned on the configuration outside them.
pub fn resample_range<R: Rng + ?Sized>(
    config: &mut Configuration,
    lo: usize,
    hi: usize,
    rates: &HeatBath,
    rng: &mut R,
) {
    assert!(lo >= 1 && lo <= hi && hi < config.len(), "range {lo}..={hi} is not interior");
    let a = config.last_at_or_before(lo - 1);
    let b = config.first_at_or_after(hi + 1);
    let log_k = &rates.log_k;
    let log_lambda = rates.log_lambda;
    // tail[s - lo] = log of the total weight from a particle at s to b.
    let n = hi - lo + 1;
    let mut tail = vec![0.0f64; n];
    let mut terms = Vec::with_capacity(n + 1);
    let continuation = |s: usize, tail: &[f64], terms: &mut Vec<f64>| -> f64 {
        terms.clear();
        terms.push(log_k[b - s]);
        for y in (s + 1).max(lo)..=hi {
            terms.push(log_lambda + log_k[y - s] + tail[y - lo]);
        }
        log_sum_exp(terms)
    };
    for s in (lo..=hi).rev() {
        tail[s - lo] = continuation(s, &tail, &mut terms);
    }
    for x in lo..=hi {
        config.set(x, false);
    }
    let mut cursor = a;
    let mut total = continuation(cursor, &tail, &mut terms);
    loop {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = None;
        for y in (cursor + 1).max(lo)..=hi {
            acc += (log_lambda + log_k[y - cursor] + tail[y - lo] - total).exp();
            if u < acc {
                next = Some(y);
                break;
            }
        }
        match next {
            Some(y) => {
                config.set(y, true);
                cursor = y;
                total = tail[y - lo];
            }
            None => return,
        }
    }
}

/// Normalized probabilities of all block patterns, indexed by the bit mask
/// over `lo..=hi` (bit `i` is site `lo + i`). Brute force, for checking
/// [`block_resample`].
pub fn block_pattern_weights(
    config: &Configuration,
    center: usize,
    half_width: usize,
    rates: &HeatBath,
) -> Result<Vec<f64>> {
    let (lo, hi, a, b) = block_bounds(config, center, half_width)?;
    let n = hi - lo + 1;
    if n > ENUMERATION_MAX_SITES {
        return Err(Error::Resource(format!("block of {n} sites is too large to enumerate")));
    }
    let params = rates.params();
    let log_w: Vec<f64> = (0u64..1 << n)
        .map(|mask| {
            let mut prev = a;
            let mut w = 0.0;
            for i in 0..n {
                if mask >> i & 1 == 1 {
                    let z = lo + i;
                    w += params.lambda().ln() + params.log_k(z - prev);
                    prev = z;
                }
            }
            w + params.log_k(b - prev)
        })
        .collect();
    let norm = log_sum_exp(&log_w);
    Ok(log_w.into_iter().map(|w| (w - norm).exp()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::enumerate_measure;
    use crate::laws::KernelParams;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    fn rates(lambda: f64, len: usize) -> HeatBath {
        HeatBath::new(KernelParams::new(0.5, lambda).unwrap(), len)
    }

    #[test]
    fn empty_block_weight_is_direct_gap() {
        let r = rates(2.0, 20);
        let cfg = Configuration::from_sites(20, [3, 15]).unwrap();
        let w = block_pattern_weights(&cfg, 9, 2, &r).unwrap();
        // Unnormalized weight of the empty pattern is K(15 - 3).
        let p = r.params();
        let mut z = 0.0;
        for mask in 0u64..32 {
            let mut prev = 3;
            let mut v = 1.0;
            for i in 0..5 {
                if mask >> i & 1 == 1 {
                    v *= p.lambda() * p.k(7 + i - prev);
                    prev = 7 + i;
                }
            }
            z += v * p.k(15 - prev);
        }
        assert_relative_eq!(w[0], p.k(12) / z, max_relative = 1e-12);
    }

    #[test]
    fn dp_sampler_matches_enumeration() {
        let r = rates(1.5, 30);
        let cfg = Configuration::from_sites(30, [2, 5, 20, 26]).unwrap();
        let (lo, hi, ..) = block_bounds(&cfg, 12, 3).unwrap();
        let w = block_pattern_weights(&cfg, 12, 3, &r).unwrap();
        let mut counts = vec![0usize; w.len()];
        let mut rng = stream(11, 0);
        let trials = 200_000;
        for _ in 0..trials {
            let mut c = cfg.clone();
            block_resample(&mut c, 12, 3, &r, &mut rng).unwrap();
            let mask = (lo..=hi).enumerate().fold(0usize, |m, (i, x)| m | (usize::from(c.contains(x)) << i));
            counts[mask] += 1;
            assert!(c.contains(5) && c.contains(20) && !c.contains(6));
        }
        for (cnt, p) in counts.iter().zip(&w) {
            let sd = (p * (1.0 - p) / trials as f64).sqrt();
            assert!((*cnt as f64 / trials as f64 - p).abs() < 5.0 * sd + 1e-6);
        }
    }

    #[test]
    fn whole_interior_block_is_the_equilibrium() {
        let r = rates(1.0, 7);
        let mu = enumerate_measure(7, r.params()).unwrap();
        let w = block_pattern_weights(&Configuration::empty(7), 3, 10, &r).unwrap();
        for (mask, p) in mu.probs().iter().enumerate() {
            assert_relative_eq!(w[mask], *p, max_relative = 1e-12);
        }
    }

    #[test]
    fn repeated_block_updates_preserve_equilibrium() {
        let len = 10;
        let r = rates(1.0, len);
        let mu = enumerate_measure(len, r.params()).unwrap();
        let mut rng = stream(12, 0);
        let mut c = Configuration::full(len);
        let steps = 200_000;
        let mut occ = vec![0usize; len];
        for step in 0..steps + 1000 {
            let center = rng.random_range(1..len);
            block_resample(&mut c, center, 2, &r, &mut rng).unwrap();
            if step >= 1000 {
                for x in c.interior() {
                    occ[x] += 1;
                }
            }
        }
        for (x, count) in occ.iter().enumerate().skip(1) {
            let p = mu.marginal(x);
            assert!((*count as f64 / steps as f64 - p).abs() < 0.01, "x={x}");
        }
    }
}
