//! Statistical and structural properties of the equilibrium measure.

use pinfrag::equilibrium::{
    gibbs_log_prob, marginal_occupancy, sample_config, sequential_log_prob, three_point_conditional,
};
use pinfrag::laws::{log_sum_exp, KernelParams, KernelTable};
use pinfrag::rng::stream;
use pinfrag::stats::linear_fit;
use pinfrag::Configuration;
use proptest::prelude::*;

/// Exact `pi(no particle in [lo, hi])`: sum over the particles `u < lo`
/// and `v > hi` that bracket the window.
fn empty_window_probability(lo: usize, hi: usize, table: &KernelTable, len: usize) -> f64 {
    let p = table.params();
    let log_lambda = p.lambda().ln();
    let log_z = table.log_z_slice();
    let mut terms = Vec::new();
    for u in 0..lo {
        for v in hi + 1..=len {
            let lu = if u > 0 { log_lambda } else { 0.0 };
            let lv = if v < len { log_lambda } else { 0.0 };
            terms.push(log_z[u] + lu + p.log_k(v - u) + lv + log_z[len - v]);
        }
    }
    (log_sum_exp(&terms) - log_z[len]).exp()
}

#[test]
fn empty_windows_are_exponentially_rare_when_localized() {
    let len = 2048;
    let table = KernelTable::build(KernelParams::new(0.5, 4.0).unwrap(), len).unwrap();
    let widths = [5usize, 10, 20, 40];
    let logs: Vec<f64> = widths
        .iter()
        .map(|&w| {
            let lo = len / 2 - w / 2;
            empty_window_probability(lo, lo + w - 1, &table, len).ln()
        })
        .collect();
    assert!(logs.windows(2).all(|p| p[1] < p[0]), "{logs:?}");
    let xs: Vec<f64> = widths.iter().map(|&w| w as f64).collect();
    let fit = linear_fit(&xs, &logs).unwrap();
    assert!(fit.slope < -0.1, "slope {}", fit.slope);

    // The exact formula agrees with 10^5 samples where counts are large.
    let mut rng = stream(1, 0);
    let samples = 100_000;
    let (w2, w5) = (len / 2 - 1..=len / 2, len / 2 - 2..=len / 2 + 2);
    let mut counts = [0usize; 2];
    for _ in 0..samples {
        let cfg = sample_config(len, &table, &mut rng).unwrap();
        counts[0] += usize::from(w2.clone().all(|x| !cfg.contains(x)));
        counts[1] += usize::from(w5.clone().all(|x| !cfg.contains(x)));
    }
    for (count, (lo, hi)) in counts.iter().zip([(*w2.start(), *w2.end()), (*w5.start(), *w5.end())]) {
        let p = empty_window_probability(lo, hi, &table, len);
        let freq = *count as f64 / samples as f64;
        assert!((freq - p).abs() < 5.0 * (p * (1.0 - p) / samples as f64).sqrt() + 1e-5, "{freq} vs {p}");
    }
}

#[test]
fn delocalized_particle_count_has_a_geometric_tail() {
    let len = 1000;
    let table = KernelTable::build(KernelParams::new(0.5, 0.5).unwrap(), len).unwrap();
    let mut rng = stream(2, 0);
    let samples = 100_000;
    let mut tail = [0usize; 8];
    for _ in 0..samples {
        let n = sample_config(len, &table, &mut rng).unwrap().particle_count();
        for (k, t) in tail.iter_mut().enumerate() {
            *t += usize::from(n > k);
        }
    }
    let logs: Vec<f64> = tail.iter().map(|&t| (t as f64 / samples as f64).ln()).collect();
    assert!(logs.windows(2).all(|p| p[1] < p[0]), "{logs:?}");
    let xs: Vec<f64> = (1..=8).map(f64::from).collect();
    let fit = linear_fit(&xs, &logs).unwrap();
    assert!(fit.slope < -0.3, "slope {}", fit.slope);
    // Log-linear: residuals stay small against the fitted line.
    for (x, y) in xs.iter().zip(&logs) {
        assert!((fit.intercept + fit.slope * x - y).abs() < 0.5, "{x}: {y}");
    }
}

#[test]
fn correlations_decay_exponentially_when_localized() {
    let len = 2048;
    let table = KernelTable::build(KernelParams::new(0.5, 4.0).unwrap(), len).unwrap();
    let b = len / 2;
    let base = marginal_occupancy(b, len, &table).unwrap();
    let spans = [1usize, 2, 4, 8, 12];
    let logs: Vec<f64> =
        spans.iter().map(|&m| (three_point_conditional(b - m, b, b + m, &table).unwrap() - base).abs().ln()).collect();
    assert!(logs.windows(2).all(|p| p[1] < p[0]), "{logs:?}");
    let xs: Vec<f64> = spans.iter().map(|&m| m as f64).collect();
    assert!(linear_fit(&xs, &logs).unwrap().slope < -0.3);
}

#[test]
fn partition_growth_rate_is_the_free_energy() {
    let len = 5000;
    let table = KernelTable::build(KernelParams::new(0.5, 4.0).unwrap(), len).unwrap();
    let step = table.log_z(len).unwrap() - table.log_z(len - 1).unwrap();
    assert!((step - table.free_energy().value).abs() < 1e-3);
}

#[test]
fn mean_particle_count_increases_with_lambda() {
    let len = 300;
    let means: Vec<f64> = [0.5, 1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|&l| {
            let table = KernelTable::build(KernelParams::new(0.5, l).unwrap(), len).unwrap();
            (1..len).map(|x| marginal_occupancy(x, len, &table).unwrap()).sum()
        })
        .collect();
    assert!(means.windows(2).all(|m| m[1] > m[0]), "{means:?}");
}

fn config_strategy(max_len: usize) -> impl Strategy<Value = Configuration> {
    (2..max_len).prop_flat_map(|len| {
        proptest::collection::vec(any::<bool>(), len - 1)
            .prop_map(move |bits| Configuration::from_sites(len, (1..len).filter(|&x| bits[x - 1])).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampler_path_probability_is_the_gibbs_probability(
        cfg in config_strategy(200),
        lambda in prop::sample::select(vec![0.5, 1.0, 4.0]),
    ) {
        let table = KernelTable::build(KernelParams::new(0.5, lambda).unwrap(), cfg.len()).unwrap();
        let a = sequential_log_prob(&cfg, &table).unwrap();
        let b = gibbs_log_prob(&cfg, &table).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{} vs {}", a, b);
    }
}
