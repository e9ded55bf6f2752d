//! Partition functions and the renewal mass function against their
//! power-law asymptotics.

use pinfrag::{KernelParams, KernelTable, Result};

pub fn run_example() -> Result<()> {
    let critical = KernelTable::build(KernelParams::new(0.5, 1.0)?, 10_000)?;
    let target = pinfrag::laws::critical_partition_constant(0.5)?;
    for len in [100, 1000, 10_000] {
        let scaled = critical.log_z(len)?.exp() * (len as f64).sqrt();
        println!("lambda=1 L={len:>6} Z_L sqrt(L) = {scaled:.6} (limit {target:.6})");
    }
    let delocalized = KernelTable::build(KernelParams::new(0.5, 0.5)?, 20_000)?;
    for n in [100, 2000, 20_000] {
        println!("lambda=0.5 N={n:>6} greens ratio = {:.5}", delocalized.greens_ratio(n)?);
    }
    let localized = KernelTable::build(KernelParams::new(0.5, 4.0)?, 2000)?;
    let f = localized.free_energy().value;
    let slope = (localized.log_z(2000)? - localized.log_z(1000)?) / 1000.0;
    println!("lambda=4 free energy {f:.6}, growth rate of log Z {slope:.6}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
