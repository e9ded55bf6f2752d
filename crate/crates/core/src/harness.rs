//! Experiment orchestration: parameter grids, reproducible seeding,
//! resumable execution and reports.
//!
//! An experiment is a grid of cells. Each cell derives all of its
//! randomness from `(seed, cell index, trial index)`, so results do not
//! depend on scheduling. Finished cells are appended to a JSON-lines
//! journal as they complete; a rerun skips cells already journaled under
//! the same spec. At the end the cells are written, sorted, to a CSV and
//! a JSON summary with log-log fits and pass flags.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{estimate_mixing_time, MixingOptions};
use crate::dynamics::{HeatBath, Schedule};
use crate::equilibrium::{enumerate_measure, marginal_occupancy, sample_config, sequential_log_prob};
use crate::error::{Error, Result};
use crate::exact::{reversibility_residuals, spectral_gap_exact, variational_gap_bound};
use crate::front::{front_window_probability_exact, laplace_exponent_fit, t_scale, FrontLaw};
use crate::laws::{critical_partition_constant, KernelParams, KernelTable};
use crate::rng::trial_stream;
use crate::stats::{log_log_fit, wilson, Estimate, MeanVar, Z95};

/// Version of the CSV and summary layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Largest length for the exact generator checks.
const REVERSIBILITY_MAX_LEN: usize = 10;
/// Largest length for the sampler-versus-enumeration check.
const SAMPLER_CHECK_MAX_LEN: usize = 12;
/// Largest length for the exact spectral gap in gap-scaling cells.
const EXACT_GAP_MAX_LEN: usize = 12;
/// Largest `n` for the exact front window probability.
const EXACT_FRONT_MAX_N: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    MixScaling,
    GapScaling,
    FrontScaling,
    EquilibriumChecks,
    GreensCheck,
}

/// Acceptance tolerances. Unset entries fall back to per-kind defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Tolerance {
    /// Accepted range of every fitted slope.
    pub slope: Option<[f64; 2]>,
    /// Lower bound on front window probabilities.
    pub floor: Option<f64>,
    /// Accepted `|ratio - 1|` in greens checks.
    pub ratio: Option<f64>,
    /// Accepted residuals in equilibrium checks.
    pub residual: Option<f64>,
}

/// One experiment: a kind, a parameter grid and its budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: ExperimentKind,
    #[serde(default = "defaults::rho")]
    pub rho: f64,
    /// System sizes `L`, or `N` for greens checks and `n` for fronts.
    #[serde(default)]
    pub lengths: Vec<usize>,
    #[serde(default)]
    pub lambdas: Vec<f64>,
    /// Coarse-graining lengths, front-scaling only.
    #[serde(default)]
    pub ells: Vec<usize>,
    #[serde(default = "defaults::trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::c0")]
    pub c0: f64,
    /// Grid step of the recorded discrepancy path.
    #[serde(default = "defaults::dt")]
    pub dt: f64,
    /// Coupling runs still apart after this time are censored.
    #[serde(default = "defaults::max_time")]
    pub max_time: f64,
    /// Cells with smaller lengths are reported but left out of the fits.
    #[serde(default)]
    pub fit_min_length: usize,
    #[serde(default)]
    pub tolerance: Tolerance,
    /// Output directory, overridden by [`RunOptions::out_dir`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

mod defaults {
    pub fn rho() -> f64 {
        0.5
    }
    pub fn trials() -> usize {
        200
    }
    pub fn c0() -> f64 {
        1.0
    }
    pub fn dt() -> f64 {
        0.5
    }
    pub fn max_time() -> f64 {
        1e5
    }
}

/// File layout accepted by [`load_specs`]: `[[experiment]]` sections.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    experiment: Vec<ExperimentSpec>,
}

impl ExperimentSpec {
    /// Parses one spec, or the first of several, from TOML text.
    pub fn from_toml(text: &str) -> Result<Self> {
        parse_toml(text)?.into_iter().next().ok_or_else(|| Error::Invalid("no experiment in file".into()))
    }

    /// Lists every offending field, or returns `Ok`.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            bad.push("name: must be a nonempty file-name-safe string".to_string());
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            bad.push(format!("rho: {} outside (0, 1)", self.rho));
        }
        if self.lengths.is_empty() {
            bad.push("lengths: empty grid".into());
        }
        if self.lambdas.is_empty() {
            bad.push("lambdas: empty grid".into());
        }
        if self.lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            bad.push("lambdas: entries must be positive and finite".into());
        }
        let max_len = match self.kind {
            ExperimentKind::MixScaling => 1 << 20,
            ExperimentKind::GapScaling | ExperimentKind::EquilibriumChecks => 1 << 16,
            ExperimentKind::FrontScaling => 1 << 24,
            ExperimentKind::GreensCheck => 100_000,
        };
        let min_len = if self.kind == ExperimentKind::FrontScaling { 1 } else { 2 };
        if self.lengths.iter().any(|&l| l < min_len || l > max_len) {
            bad.push(format!("lengths: entries must lie in [{min_len}, {max_len}]"));
        }
        if self.trials > 10_000_000 {
            bad.push(format!("trials: {} exceeds the budget of 10^7", self.trials));
        }
        let needs_trials = matches!(self.kind, ExperimentKind::MixScaling | ExperimentKind::FrontScaling);
        if needs_trials && self.trials == 0 {
            bad.push("trials: must be positive".into());
        }
        match self.kind {
            ExperimentKind::FrontScaling => {
                if self.ells.is_empty() {
                    bad.push("ells: empty grid".into());
                }
                if self.ells.contains(&0) {
                    bad.push("ells: entries must be positive".into());
                }
                if !(0.0..=1.0).contains(&self.c0) {
                    bad.push(format!("c0: {} outside [0, 1]", self.c0));
                }
            }
            _ if !self.ells.is_empty() => bad.push("ells: only used by front-scaling".into()),
            _ => {}
        }
        if self.kind == ExperimentKind::MixScaling {
            if !(self.dt > 0.0) {
                bad.push("dt: must be positive".into());
            }
            if !(self.max_time > self.dt) || self.max_time / self.dt > 1e7 {
                bad.push("max-time: must exceed dt by at most 10^7 grid steps".into());
            }
        }
        if let Some([lo, hi]) = self.tolerance.slope {
            if !(lo <= hi) {
                bad.push("tolerance.slope: lower end above upper end".into());
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(format!("experiment spec: {}", bad.join("; "))))
        }
    }

    /// Grid cells in canonical order.
    pub fn cells(&self) -> Vec<CellParams> {
        let ells: Vec<Option<usize>> = if self.kind == ExperimentKind::FrontScaling {
            self.ells.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        let mut cells = Vec::new();
        for &lambda in &self.lambdas {
            for &ell in &ells {
                for &len in &self.lengths {
                    cells.push(CellParams { index: cells.len(), lambda, len, ell });
                }
            }
        }
        cells
    }

    /// Hash of everything that affects results, i.e. the spec without its
    /// output location.
    pub fn fingerprint(&self) -> String {
        let mut echo = self.clone();
        echo.out_dir = None;
        let text = serde_json::to_string(&echo).expect("spec serializes");
        // FNV-1a.
        let hash =
            text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3));
        format!("{hash:016x}")
    }
}

fn parse_toml(text: &str) -> Result<Vec<ExperimentSpec>> {
    let parse_err = |e: toml::de::Error| {
        let line = e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(0);
        Error::Parse { line, message: e.message().to_string() }
    };
    if text.lines().any(|l| l.trim_start().starts_with("[[experiment]]")) {
        Ok(toml::from_str::<SpecFile>(text).map_err(parse_err)?.experiment)
    } else {
        Ok(vec![toml::from_str(text).map_err(parse_err)?])
    }
}

/// Reads experiments from a TOML file (`[[experiment]]` sections or a
/// single bare spec) or, for `.json`, a spec object or array of them.
pub fn load_specs(path: &Path) -> Result<Vec<ExperimentSpec>> {
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let value: serde_json::Value = serde_json::from_str(&text)?;
        return Ok(if value.is_array() {
            serde_json::from_value(value)?
        } else {
            vec![serde_json::from_value(value)?]
        });
    }
    parse_toml(&text)
}

/// One grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub index: usize,
    pub lambda: f64,
    pub len: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<usize>,
}

/// A named estimate. Non-finite values are stored as `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub name: String,
    pub value: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl Measurement {
    fn new(name: &str, e: Estimate) -> Self {
        Self { name: name.into(), value: finite(e.value), ci_low: finite(e.ci_low), ci_high: finite(e.ci_high) }
    }

    fn exact(name: &str, v: f64) -> Self {
        Self::new(name, Estimate::exact(v))
    }
}

/// Outcome of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub params: CellParams,
    pub estimates: Vec<Measurement>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CellResult {
    pub fn estimate(&self, name: &str) -> Option<&Measurement> {
        self.estimates.iter().find(|m| m.name == name)
    }
}

/// A log-log slope across one line of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub name: String,
    pub slope: f64,
    pub stderr: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub spec: ExperimentSpec,
    pub cells: Vec<CellResult>,
    pub fits: Vec<FitResult>,
    pub pass: bool,
}

/// Execution settings that do not affect results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Takes precedence over the spec's `out-dir`.
    pub out_dir: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    pub jobs: usize,
    pub kernel_cache: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub summary: Summary,
    pub csv: PathBuf,
    pub summary_path: PathBuf,
    pub journal: PathBuf,
    /// Cells computed in this run, as opposed to taken from the journal.
    pub computed: usize,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.summary.pass
    }
}

#[derive(Serialize, Deserialize)]
struct JournalEntry {
    fingerprint: String,
    cell: CellResult,
}

fn read_journal(path: &Path, fingerprint: &str) -> Vec<CellResult> {
    let Ok(file) = File::open(path) else {
        return Vec::new();
    };
    // A line cut short by an interruption simply fails to parse.
    BufReader::new(file)
        .lines()
        .map_while(|l| l.ok())
        .filter_map(|l| serde_json::from_str::<JournalEntry>(&l).ok())
        .filter(|e| e.fingerprint == fingerprint)
        .map(|e| e.cell)
        .collect()
}

/// Runs (or resumes) an experiment and writes `<name>.jsonl`,
/// `<name>.csv` and `<name>.summary.json` to the output directory.
pub fn run_experiment(spec: &ExperimentSpec, opts: &RunOptions) -> Result<ExperimentReport> {
    spec.validate()?;
    let dir = opts.out_dir.clone().or_else(|| spec.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    let journal_path = dir.join(format!("{}.jsonl", spec.name));
    let fingerprint = spec.fingerprint();
    let cells = spec.cells();

    let mut done: BTreeMap<usize, CellResult> = BTreeMap::new();
    for cell in read_journal(&journal_path, &fingerprint) {
        if cells.get(cell.params.index) == Some(&cell.params) {
            done.insert(cell.params.index, cell);
        }
    }
    let finished: HashSet<usize> = done.keys().copied().collect();
    let pending: Vec<CellParams> = cells.iter().filter(|c| !finished.contains(&c.index)).copied().collect();

    let journal = Mutex::new(OpenOptions::new().create(true).append(true).open(&journal_path)?);
    // Drop any partial last line so appended entries start fresh.
    journal.lock().expect("journal lock").write_all(b"\n")?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| Error::Resource(format!("thread pool: {e}")))?;
    let fresh: Vec<CellResult> = pool.install(|| {
        pending
            .par_iter()
            .map(|params| {
                let cell = run_cell(spec, *params, opts.kernel_cache.as_deref());
                let line =
                    serde_json::to_string(&JournalEntry { fingerprint: fingerprint.clone(), cell: cell.clone() })?;
                let mut file = journal.lock().expect("journal lock");
                writeln!(file, "{line}")?;
                file.flush()?;
                Ok(cell)
            })
            .collect::<Result<_>>()
    })?;
    let computed = fresh.len();
    for cell in fresh {
        done.insert(cell.params.index, cell);
    }

    let results: Vec<CellResult> = done.into_values().collect();
    let fits = fit_lines(spec, &results);
    let pass = results.iter().all(|c| c.pass) && fits.iter().all(|f| f.pass);
    let summary = Summary { schema_version: SCHEMA_VERSION, spec: spec.clone(), cells: results, fits, pass };

    let csv = dir.join(format!("{}.csv", spec.name));
    let mut out = Vec::new();
    write_csv(&summary, &mut out)?;
    fs::write(&csv, out)?;
    let summary_path = dir.join(format!("{}.summary.json", spec.name));
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(ExperimentReport { summary, csv, summary_path, journal: journal_path, computed })
}

/// Header comment with the schema version and the full spec, the column
/// row, then one row per cell and estimate.
pub fn write_csv(summary: &Summary, mut w: impl Write) -> Result<()> {
    writeln!(w, "# schema-version={}; spec={}", summary.schema_version, serde_json::to_string(&summary.spec)?)?;
    writeln!(w, "cell,lambda,len,ell,estimator,value,ci_low,ci_high,pass")?;
    let show = |x: Option<f64>| x.map_or_else(|| "nan".to_string(), |v| v.to_string());
    for cell in &summary.cells {
        let p = &cell.params;
        let ell = p.ell.map_or_else(String::new, |e| e.to_string());
        if let Some(err) = &cell.error {
            writeln!(
                w,
                "{},{},{},{},error,nan,nan,nan,false # {}",
                p.index,
                p.lambda,
                p.len,
                ell,
                err.replace(',', ";")
            )?;
        }
        for m in &cell.estimates {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                p.index,
                p.lambda,
                p.len,
                ell,
                m.name,
                show(m.value),
                show(m.ci_low),
                show(m.ci_high),
                cell.pass
            )?;
        }
    }
    Ok(())
}

fn fit_target(kind: ExperimentKind) -> Option<&'static str> {
    match kind {
        ExperimentKind::MixScaling => Some("discrepancy_time"),
        ExperimentKind::GapScaling => Some("variational_bound"),
        _ => None,
    }
}

fn fit_lines(spec: &ExperimentSpec, cells: &[CellResult]) -> Vec<FitResult> {
    let Some(target) = fit_target(spec.kind) else {
        return Vec::new();
    };
    let mut fits = Vec::new();
    for &lambda in &spec.lambdas {
        let points: Vec<(f64, f64)> = cells
            .iter()
            .filter(|c| c.params.lambda == lambda && c.params.len >= spec.fit_min_length)
            .filter_map(|c| Some((c.params.len as f64, c.estimate(target)?.value?)))
            .collect();
        let name = format!("{target}@lambda={lambda}");
        let (xs, ys): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        match log_log_fit(&xs, &ys) {
            Some(fit) => {
                let pass = spec.tolerance.slope.is_none_or(|[lo, hi]| (lo..=hi).contains(&fit.slope));
                fits.push(FitResult { name, slope: fit.slope, stderr: fit.slope_stderr, pass });
            }
            None => {
                fits.push(FitResult { name, slope: f64::NAN, stderr: f64::NAN, pass: spec.tolerance.slope.is_none() })
            }
        }
    }
    fits
}

fn run_cell(spec: &ExperimentSpec, params: CellParams, cache: Option<&Path>) -> CellResult {
    let outcome = KernelParams::new(spec.rho, params.lambda).and_then(|kernel| match spec.kind {
        ExperimentKind::MixScaling => mix_cell(spec, params, kernel),
        ExperimentKind::GapScaling => gap_cell(spec, params, kernel, cache),
        ExperimentKind::FrontScaling => front_cell(spec, params, kernel),
        ExperimentKind::EquilibriumChecks => equilibrium_cell(spec, params, kernel, cache),
        ExperimentKind::GreensCheck => greens_cell(spec, params, kernel, cache),
    });
    match outcome {
        Ok((estimates, pass)) => CellResult { params, estimates, pass, error: None },
        Err(e) => CellResult { params, estimates: Vec::new(), pass: false, error: Some(e.to_string()) },
    }
}

type CellOutcome = Result<(Vec<Measurement>, bool)>;

fn mix_cell(spec: &ExperimentSpec, params: CellParams, kernel: KernelParams) -> CellOutcome {
    let rates = HeatBath::new(kernel, params.len);
    let opts = MixingOptions {
        trials: spec.trials,
        dt: spec.dt,
        max_time: spec.max_time,
        seed: spec.seed,
        cell: params.index as u64,
        ..MixingOptions::default()
    };
    let est = estimate_mixing_time(&rates, &Schedule::full(), &opts)?;
    let estimates = vec![
        Measurement::new("discrepancy_time", est.discrepancy_time),
        Measurement::new("coupling_time", est.coupling_time),
        Measurement::new("coalescence_median", est.coalescence_median),
        Measurement::exact("censored", est.censored as f64),
        Measurement::exact("order_violations", est.order_violations as f64),
    ];
    Ok((estimates, !est.is_censored() && est.order_violations == 0))
}

fn gap_cell(spec: &ExperimentSpec, params: CellParams, kernel: KernelParams, cache: Option<&Path>) -> CellOutcome {
    let table = KernelTable::load_or_build(kernel, params.len, cache)?;
    let samples = if params.len <= crate::equilibrium::ENUMERATION_MAX_LEN { 0 } else { spec.trials.max(1) };
    let bound = variational_gap_bound(params.len, &table, samples, spec.seed, params.index as u64)?;
    let mut estimates = vec![Measurement::new("variational_bound", bound.ci)];
    let mut pass = bound.bound.is_finite();
    if params.len <= EXACT_GAP_MAX_LEN {
        let gap = spectral_gap_exact(params.len, &kernel)?;
        estimates.push(Measurement::exact("exact_gap", gap.gap));
        pass &= gap.gap <= bound.bound * (1.0 + 1e-9);
    }
    Ok((estimates, pass))
}

fn front_cell(spec: &ExperimentSpec, params: CellParams, kernel: KernelParams) -> CellOutcome {
    let ell = params.ell.expect("front cells carry ell");
    let law = FrontLaw::new(kernel, ell, spec.c0)?;
    let n = params.len as u64;
    let steps = t_scale(n, ell as u64, spec.rho);
    let (lo, hi) = (n as f64 / 4.0, 3.0 * n as f64 / 4.0);
    let hits = crate::front::simulate_front_renewal(&law, steps, spec.trials, spec.seed, params.index as u64)
        .iter()
        .filter(|&&f| (f as f64) > lo && (f as f64) < hi)
        .count();
    let prob = wilson(hits as u64, spec.trials as u64, Z95);
    let mut estimates = vec![Measurement::exact("steps", steps as f64), Measurement::new("window_probability", prob)];
    if n <= EXACT_FRONT_MAX_N {
        estimates.push(Measurement::exact("window_probability_exact", front_window_probability_exact(&law, n, steps)));
    }
    let mus: Vec<f64> = (0..=8).map(|i| 1e-4 * 10f64.powf(i as f64 / 4.0)).collect();
    let fit = laplace_exponent_fit(&law, &mus)?;
    estimates.push(Measurement::new(
        "laplace_slope",
        Estimate {
            value: fit.slope,
            ci_low: fit.slope - Z95 * fit.slope_stderr,
            ci_high: fit.slope + Z95 * fit.slope_stderr,
        },
    ));
    let floor = spec.tolerance.floor.unwrap_or(0.05);
    Ok((estimates, prob.value >= floor))
}

fn equilibrium_cell(
    spec: &ExperimentSpec,
    params: CellParams,
    kernel: KernelParams,
    cache: Option<&Path>,
) -> CellOutcome {
    let len = params.len;
    let tol = spec.tolerance.residual.unwrap_or(1e-12);
    let table = KernelTable::load_or_build(kernel, len, cache)?;
    let mut estimates = Vec::new();
    let mut pass = true;
    if len <= REVERSIBILITY_MAX_LEN {
        let (balance, stationarity) = reversibility_residuals(len, &kernel)?;
        estimates.push(Measurement::exact("detailed_balance_residual", balance));
        estimates.push(Measurement::exact("stationarity_residual", stationarity));
        pass &= balance <= tol && stationarity <= tol;
    }
    if len <= SAMPLER_CHECK_MAX_LEN {
        let mu = enumerate_measure(len, &kernel)?;
        let mut worst = 0.0f64;
        for (cfg, p) in mu.iter() {
            let q = sequential_log_prob(&cfg, &table)?.exp();
            worst = worst.max((q - p).abs() / p);
        }
        estimates.push(Measurement::exact("sampler_relative_error", worst));
        pass &= worst <= 1e-10;
    }
    let mean: f64 = (1..len).map(|x| marginal_occupancy(x, len, &table)).sum::<Result<f64>>()?;
    estimates.push(Measurement::exact("mean_particles", mean));
    if spec.trials > 1 {
        let counts: Vec<f64> = (0..spec.trials)
            .into_par_iter()
            .map(|i| {
                let mut rng = trial_stream(spec.seed, params.index as u64, i as u64);
                Ok(sample_config(len, &table, &mut rng)?.particle_count() as f64)
            })
            .collect::<Result<_>>()?;
        let acc: MeanVar = counts.into_iter().collect();
        let sampled = acc.estimate(Z95);
        estimates.push(Measurement::new("sampled_mean_particles", sampled));
        let se = acc.std_err();
        pass &= (acc.mean() - mean).abs() <= 5.0 * se + 1e-9 * mean.abs().max(1.0);
    }
    Ok((estimates, pass))
}

fn greens_cell(spec: &ExperimentSpec, params: CellParams, kernel: KernelParams, cache: Option<&Path>) -> CellOutcome {
    let n = params.len;
    let tol = spec.tolerance.ratio.unwrap_or(0.05);
    let table = KernelTable::load_or_build(kernel, n, cache)?;
    let rho = spec.rho;
    let (name, ratio) = if kernel.lambda() < 1.0 {
        ("greens_ratio", table.greens_ratio(n)?)
    } else if kernel.lambda() == 1.0 {
        let predicted = critical_partition_constant(rho)? * (n as f64).powf(rho - 1.0);
        ("critical_partition_ratio", table.log_z(n)?.exp() / predicted)
    } else {
        return Err(Error::Domain("greens checks need lambda <= 1".into()));
    };
    Ok((vec![Measurement::exact(name, ratio)], (ratio - 1.0).abs() <= tol))
}
