//! Coupling estimates of the mixing time from the extremal pair, and the
//! log-log slope against system size in both phases. Pass a larger
//! maximum size as the first argument for a longer study.

use pinfrag::coupling::{estimate_mixing_time, MixingOptions};
use pinfrag::dynamics::{HeatBath, Schedule};
use pinfrag::stats::log_log_fit;
use pinfrag::{KernelParams, Result};

pub fn run_example() -> Result<()> {
    let max_len: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1024);
    let lengths: Vec<usize> = (6..).map(|k| 1usize << k).take_while(|&l| l <= max_len).collect();
    for lambda in [0.5, 4.0] {
        let mut times = Vec::new();
        for (cell, &len) in lengths.iter().enumerate() {
            let rates = HeatBath::new(KernelParams::new(0.5, lambda)?, len);
            let opts =
                MixingOptions { trials: 64, dt: 0.5, max_time: 1e5, seed: 11, cell: cell as u64, ..Default::default() };
            let est = estimate_mixing_time(&rates, &Schedule::full(), &opts)?;
            let d = est.discrepancy_time;
            println!(
                "lambda={lambda} L={len:>5} discrepancy={:.2} [{:.2}, {:.2}] coupling={:.2} log L={:.2}",
                d.value,
                d.ci_low,
                d.ci_high,
                est.coupling_time.value,
                (len as f64).ln()
            );
            times.push(d.value);
        }
        let xs: Vec<f64> = lengths.iter().map(|&l| l as f64).collect();
        if let Some(fit) = log_log_fit(&xs, &times) {
            println!("lambda={lambda} slope={:.3} +- {:.3}", fit.slope, fit.slope_stderr);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
