use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pinfrag::coupling::{estimate_mixing_time, MixingOptions};
use pinfrag::dynamics::{simulate, CensoringPlan, HeatBath, Recorder, Schedule, UpdateRule};
use pinfrag::equilibrium::sample_config;
use pinfrag::exact::{spectral_gap_exact, variational_gap_bound, GENERATOR_MAX_LEN};
use pinfrag::front::{
    default_rate_constant, front_laplace_transform, simulate_front_renewal, t_scale, DominationWalk, FrontLaw,
    ZetaObserver,
};
use pinfrag::harness::{load_specs, run_experiment, RunOptions};
use pinfrag::rng::{stream, trial_stream};
use pinfrag::{Configuration, KernelParams, KernelTable, Result};

#[derive(Parser)]
#[command(name = "pinfrag", version, about = "Heat-bath dynamics for the pinning model")]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, env = "PINFRAG_CACHE")]
    kernel_cache: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Model {
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
}

impl Model {
    fn params(&self) -> Result<KernelParams> {
        KernelParams::new(self.rho, self.lambda)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Init {
    Empty,
    Full,
    Equilibrium,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    HeatBath,
    Mirrored,
}

#[derive(Clone, Copy, ValueEnum)]
enum FrontMode {
    Renewal,
    Walk,
    Laplace,
    Observe,
}

#[derive(Subcommand)]
enum Command {
    /// Exact equilibrium samples.
    Sample {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        len: usize,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One trajectory, recorded on an even time grid.
    Run {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        len: usize,
        #[arg(long)]
        horizon: f64,
        #[arg(long, value_enum, default_value = "empty")]
        init: Init,
        #[arg(long, value_enum, default_value = "heat-bath")]
        rule: Rule,
        /// Schedule file with `t_start t_end sites:<spec>` lines.
        #[arg(long, conflicts_with = "censor")]
        schedule: Option<PathBuf>,
        /// Censoring plan as `SPACING,PERIOD`.
        #[arg(long)]
        censor: Option<String>,
        #[arg(long, default_value_t = 101)]
        records: usize,
        /// Sites whose occupation is recorded.
        #[arg(long, value_delimiter = ',')]
        sites: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coupling estimates of the mixing time.
    Mix {
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        lengths: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        lambdas: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0.5)]
        dt: f64,
        #[arg(long, default_value_t = 1e5)]
        max_time: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectral gap: exact for small systems, variational bound always.
    Gap {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        len: usize,
        /// Equilibrium samples for the bound; 0 enumerates.
        #[arg(long, default_value_t = 0)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Front models.
    Front {
        #[arg(long, value_enum)]
        mode: FrontMode,
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value_t = 256)]
        n: u64,
        #[arg(long, default_value_t = 32)]
        ell: usize,
        #[arg(long, default_value_t = 1.0)]
        c0: f64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Censoring period for `observe`.
        #[arg(long, default_value_t = 4.0)]
        period: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Renewal mass function against its asymptotics.
    Greens {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs experiment spec files; exits nonzero unless all pass.
    Experiment { specs: Vec<PathBuf> },
}

fn output(out_dir: Option<&Path>, out: Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => {
            let path = match out_dir {
                Some(d) if p.is_relative() => {
                    std::fs::create_dir_all(d)?;
                    d.join(p)
                }
                _ => p,
            };
            Box::new(BufWriter::new(File::create(path)?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<bool> {
    if cli.jobs > 0 {
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global();
    }
    let dir = cli.out_dir.as_deref();
    let cache = cli.kernel_cache.as_deref();
    let seed = cli.seed;
    match cli.command {
        Command::Sample { model, len, count, out } => {
            let table = KernelTable::load_or_build(model.params()?, len, cache)?;
            let mut w = output(dir, out)?;
            writeln!(w, "seed_index,n,particles_rle")?;
            for i in 0..count {
                let cfg = sample_config(len, &table, &mut stream(seed, i as u64))?;
                writeln!(w, "{i},{},{}", cfg.particle_count(), cfg.run_length())?;
            }
            w.flush()?;
        }
        Command::Run { model, len, horizon, init, rule, schedule, censor, records, sites, out } => {
            let params = model.params()?;
            let mut rng = stream(seed, 0);
            let start = match init {
                Init::Empty => Configuration::empty(len),
                Init::Full => Configuration::full(len),
                Init::Equilibrium => sample_config(len, &KernelTable::load_or_build(params, len, cache)?, &mut rng)?,
            };
            let schedule = match (schedule, censor) {
                (Some(path), _) => Schedule::parse(&std::fs::read_to_string(path)?)?,
                (None, Some(plan)) => {
                    let bad = || pinfrag::Error::Invalid(format!("--censor expects SPACING,PERIOD, got {plan:?}"));
                    let (s, p) = plan.split_once(',').ok_or_else(bad)?;
                    let spacing = s.trim().parse().map_err(|_| bad())?;
                    let period = p.trim().parse().map_err(|_| bad())?;
                    Schedule::Censored(CensoringPlan::new(spacing, period)?)
                }
                (None, None) => Schedule::full(),
            };
            let rule = match rule {
                Rule::HeatBath => UpdateRule::HeatBath,
                Rule::Mirrored => UpdateRule::MirroredCreation,
            };
            let rates = HeatBath::new(params, len);
            let mut recorder = Recorder::even(horizon, records, sites);
            simulate(start, None, &rates, rule, &schedule, horizon, stream(seed, 1), &mut [&mut recorder])?;
            let mut w = output(dir, out)?;
            recorder.into_record().write_csv(&mut w)?;
            w.flush()?;
        }
        Command::Mix { rho, lengths, lambdas, trials, dt, max_time, out } => {
            let mut w = output(dir, out)?;
            writeln!(w, "L,lambda,estimator,estimate,ci_low,ci_high,trials")?;
            let mut cell = 0;
            for &lambda in &lambdas {
                for &len in &lengths {
                    let rates = HeatBath::new(KernelParams::new(rho, lambda)?, len);
                    let opts = MixingOptions { trials, dt, max_time, seed, cell, ..MixingOptions::default() };
                    let est = estimate_mixing_time(&rates, &Schedule::full(), &opts)?;
                    for (name, e) in [
                        ("discrepancy", est.discrepancy_time),
                        ("coupling", est.coupling_time),
                        ("coalescence_median", est.coalescence_median),
                    ] {
                        writeln!(w, "{len},{lambda},{name},{},{},{},{trials}", e.value, e.ci_low, e.ci_high)?;
                    }
                    cell += 1;
                }
            }
            w.flush()?;
        }
        Command::Gap { model, len, samples, out } => {
            let params = model.params()?;
            let table = KernelTable::load_or_build(params, len, cache)?;
            let bound = variational_gap_bound(len, &table, samples, seed, 0)?;
            let exact = (len <= GENERATOR_MAX_LEN).then(|| spectral_gap_exact(len, &params)).transpose()?;
            let json = serde_json::json!({
                "gap": exact.map(|g| g.gap),
                "t_rel": exact.map(|g| g.t_rel),
                "bound": bound.bound,
                "ci": [bound.ci.ci_low, bound.ci.ci_high],
            });
            let mut w = output(dir, out)?;
            writeln!(w, "{}", serde_json::to_string_pretty(&json)?)?;
            w.flush()?;
        }
        Command::Front { mode, model, n, ell, c0, trials, period, out } => {
            let params = model.params()?;
            let mut w = output(dir, out)?;
            match mode {
                FrontMode::Renewal => {
                    let law = FrontLaw::new(params, ell, c0)?;
                    let steps = t_scale(n, ell as u64, params.rho());
                    writeln!(w, "trial,steps,front,scaled")?;
                    for (i, f) in simulate_front_renewal(&law, steps, trials, seed, 0).iter().enumerate() {
                        writeln!(w, "{i},{steps},{f},{}", *f as f64 / n as f64)?;
                    }
                }
                FrontMode::Walk => {
                    let walk = DominationWalk::new(params.rho(), default_rate_constant(&params))?;
                    let t = (n as f64).powf(params.rho());
                    writeln!(w, "trial,time,value,scaled")?;
                    for i in 0..trials {
                        let y = walk.value_at(t, &mut trial_stream(seed, 0, i as u64));
                        writeln!(w, "{i},{t},{y},{}", y as f64 / n as f64)?;
                    }
                }
                FrontMode::Laplace => {
                    let law = FrontLaw::new(params, ell, c0)?;
                    writeln!(w, "mu,laplace,one_minus")?;
                    for i in 0..=16 {
                        let mu = 1e-4 * 10f64.powf(i as f64 / 8.0);
                        let l = front_laplace_transform(mu, &law)?;
                        writeln!(w, "{mu},{l},{}", 1.0 - l)?;
                    }
                }
                FrontMode::Observe => {
                    let len = n as usize;
                    let plan = CensoringPlan::new(ell, period)?;
                    let schedule = Schedule::Censored(plan);
                    let steps = trials;
                    let mut obs = ZetaObserver::new(&schedule, len, steps)?;
                    let rates = HeatBath::new(params, len);
                    let horizon = plan.time(steps) + 1.0;
                    let empty = Configuration::empty(len);
                    simulate(
                        empty,
                        None,
                        &rates,
                        UpdateRule::HeatBath,
                        &schedule,
                        horizon,
                        stream(seed, 0),
                        &mut [&mut obs],
                    )?;
                    writeln!(w, "k,j,zeta")?;
                    for (k, row) in obs.rows().iter().enumerate() {
                        for (j, z) in row.iter().enumerate() {
                            writeln!(w, "{k},{j},{}", u8::from(*z))?;
                        }
                    }
                }
            }
            w.flush()?;
        }
        Command::Greens { model, n, out } => {
            let table = KernelTable::load_or_build(model.params()?, n, cache)?;
            let mut w = output(dir, out)?;
            writeln!(w, "N,lambda,renewal_mass,ratio")?;
            writeln!(w, "{n},{},{},{}", model.lambda, table.renewal_mass(n)?, table.greens_ratio(n)?)?;
            w.flush()?;
        }
        Command::Experiment { specs } => {
            let opts =
                RunOptions { out_dir: cli.out_dir.clone(), jobs: cli.jobs, kernel_cache: cli.kernel_cache.clone() };
            let mut all = true;
            for path in &specs {
                for spec in load_specs(path)? {
                    let report = run_experiment(&spec, &opts)?;
                    eprintln!(
                        "{}: {} ({} cells, {} computed) -> {}",
                        spec.name,
                        if report.passed() { "pass" } else { "FAIL" },
                        report.summary.cells.len(),
                        report.computed,
                        report.summary_path.display()
                    );
                    all &= report.passed();
                }
            }
            return Ok(all);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
