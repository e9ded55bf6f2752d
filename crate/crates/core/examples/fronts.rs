//! The three front models: the renewal front with its exact window
//! probability, the Laplace exponent of its increment law, and the
//! mirrored creation-only front running under its dominating walk.

use pinfrag::front::{
    coupled_mirrored_front, default_rate_constant, front_window_probability, front_window_probability_exact,
    laplace_exponent_fit, t_scale, FrontLaw,
};
use pinfrag::rng::stream;
use pinfrag::{KernelParams, Result};

pub fn run_example() -> Result<()> {
    let params = KernelParams::new(0.5, 4.0)?;
    for ell in [32, 64] {
        let law = FrontLaw::new(params, ell, 1.0)?;
        for n in [64, 256] {
            let steps = t_scale(n, ell as u64, 0.5);
            let mc = front_window_probability(&law, n, 10_000, 3, n);
            let exact = front_window_probability_exact(&law, n, steps);
            println!(
                "ell={ell} n={n} T={steps} P(f(T) in (n/4, 3n/4)) = {mc:.4} (exact {exact:.5}) Q(0)={:.4}",
                law.jump_probability(0)
            );
        }
    }
    let law = FrontLaw::new(params, 128, 1.0)?;
    let mus: Vec<f64> = (0..=8).map(|i| 1e-4 * 10f64.powf(i as f64 / 4.0)).collect();
    let fit = laplace_exponent_fit(&law, &mus)?;
    println!("Laplace exponent at ell=128: {:.4} +- {:.4}", fit.slope, fit.slope_stderr);

    let c = default_rate_constant(&params);
    let run = coupled_mirrored_front(&params, c, 4096, 30.0, &mut stream(9, 0))?;
    let last = run.times.len() - 1;
    println!(
        "mirrored front at t={:.1}: f={} <= y={} after {} walk jumps",
        run.times[last], run.front[last], run.walk[last], last
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
