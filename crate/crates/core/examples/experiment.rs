//! A small experiment grid run through the harness: it journals cells as
//! they finish, then writes a sorted CSV and a JSON summary with fitted
//! slopes. Rerunning resumes from the journal.

use pinfrag::harness::{run_experiment, ExperimentSpec, RunOptions};
use pinfrag::Result;

const SPEC: &str = r#"
name = "localized-mixing"
kind = "mix-scaling"
rho = 0.5
lambdas = [4.0]
lengths = [64, 128, 256, 512]
trials = 48
seed = 2024

[tolerance]
slope = [0.2, 0.9]
"#;

pub fn run_example() -> Result<()> {
    let spec = ExperimentSpec::from_toml(SPEC)?;
    let dir = std::env::temp_dir().join("pinfrag-example");
    let opts = RunOptions { out_dir: Some(dir), ..RunOptions::default() };
    let report = run_experiment(&spec, &opts)?;
    for fit in &report.summary.fits {
        println!("{}: slope {:.3} +- {:.3} pass={}", fit.name, fit.slope, fit.stderr, fit.pass);
    }
    println!("computed {} cells; csv at {}", report.computed, report.csv.display());
    let again = run_experiment(&spec, &opts)?;
    println!("rerun computed {} cells", again.computed);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
