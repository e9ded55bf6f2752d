//! Exact equilibrium samples and their agreement with the closed-form
//! one-site marginals, in each phase.

use pinfrag::equilibrium::{marginal_occupancy, sample_config};
use pinfrag::rng::stream;
use pinfrag::{KernelParams, KernelTable, Result};

pub fn run_example() -> Result<()> {
    let len = 400;
    let samples = 2000;
    for lambda in [0.5, 1.0, 4.0] {
        let params = KernelParams::new(0.5, lambda)?;
        let table = KernelTable::build(params, len)?;
        let mut rng = stream(7, 0);
        let mut mean = 0.0;
        let mut middle = 0.0;
        for _ in 0..samples {
            let cfg = sample_config(len, &table, &mut rng)?;
            mean += cfg.particle_count() as f64 / samples as f64;
            middle += f64::from(u8::from(cfg.contains(len / 2))) / samples as f64;
        }
        let exact_mean: f64 = (1..len).map(|x| marginal_occupancy(x, len, &table)).sum::<Result<f64>>()?;
        println!(
            "lambda={lambda:<4} phase={:?} free_energy={:.4} mean_particles={mean:.2} (exact {exact_mean:.2}) \
             P(mid occupied)={middle:.3} (exact {:.3})",
            params.phase(),
            table.free_energy().value,
            marginal_occupancy(len / 2, len, &table)?,
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
