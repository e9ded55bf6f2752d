//! A trajectory from the empty configuration in the localized phase:
//! particle count and the two invasion fronts over time, then the same
//! run under a censoring plan that freezes every fourth site between
//! short full-update windows.

use pinfrag::dynamics::{simulate, CensoringPlan, HeatBath, Recorder, Schedule, UpdateRule};
use pinfrag::rng::stream;
use pinfrag::{Configuration, KernelParams, Result};

pub fn run_example() -> Result<()> {
    let len = 512;
    let horizon = 40.0;
    let rates = HeatBath::new(KernelParams::new(0.5, 4.0)?, len);
    let censored = Schedule::Censored(CensoringPlan::new(4, 5.0)?);
    for (label, schedule) in [("free", Schedule::full()), ("censored", censored)] {
        let mut recorder = Recorder::even(horizon, 5, vec![len / 2]);
        let summary = simulate(
            Configuration::empty(len),
            None,
            &rates,
            UpdateRule::HeatBath,
            &schedule,
            horizon,
            stream(1, 0),
            &mut [&mut recorder],
        )?;
        let rec = recorder.into_record();
        println!("{label}: {} rings, {} applied, {} flips", summary.proposed, summary.applied, summary.flips);
        for (i, t) in rec.times.iter().enumerate() {
            println!(
                "  t={t:>5.1} n={:>4} left_front={:>4} right_front={:>4}",
                rec.particle_counts[i], rec.left_fronts[i], rec.right_fronts[i]
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
