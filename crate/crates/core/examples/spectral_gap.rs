//! Exact spectra of small chains: the gap, the worst-start mixing time and
//! the sandwich between them, and the particle-count variational bound
//! that continues the gap to large systems.

use pinfrag::coupling::MIXING_THRESHOLD;
use pinfrag::exact::{exact_mixing, variational_gap_bound};
use pinfrag::{KernelParams, KernelTable, Result};

pub fn run_example() -> Result<()> {
    let params = KernelParams::new(0.5, 1.0)?;
    for len in [4, 6, 8, 10] {
        let m = exact_mixing(len, &params, MIXING_THRESHOLD)?;
        let bound = variational_gap_bound(len, &KernelTable::build(params, len)?, 0, 0, 0)?;
        println!(
            "L={len:>2} gap={:.4} bound={:.4} t_rel={:.3} <= t_mix={:.3} <= {:.3}: {}",
            m.gap.gap,
            bound.bound,
            m.gap.t_rel,
            m.t_mix,
            m.upper_bound(),
            m.sandwich_holds()
        );
    }
    for len in [256, 1024] {
        let b = variational_gap_bound(len, &KernelTable::build(params, len)?, 4000, 5, len as u64)?;
        println!("L={len:>4} sampled bound={:.4} [{:.4}, {:.4}]", b.bound, b.ci.ci_low, b.ci.ci_high);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
