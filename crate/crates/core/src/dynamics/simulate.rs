//! Event-driven simulation with observers.

use std::io::Write;

use rand::Rng;
use serde::Serialize;

use super::{apply_rule, EventStream, HeatBath, Schedule, UpdateRule};
use crate::configuration::Configuration;
use crate::error::{contract, Result};

/// Callback invoked at requested times during a run.
pub trait Observer {
    /// Next time this observer wants to see the configuration.
    fn next_time(&self) -> Option<f64>;
    /// Called with the configuration as it is at time `t`.
    fn observe(&mut self, t: f64, config: &Configuration);
}

/// Counts of a finished run together with the final configuration.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub final_config: Configuration,
    /// Clock rings inside the schedule span.
    pub proposed: u64,
    /// Rings at sites active at their time.
    pub applied: u64,
    /// Applied rings that flipped a site.
    pub flips: u64,
}

/// Fires every observer whose next time is at most `limit`, in time order.
pub(crate) fn fire_observers(observers: &mut [&mut dyn Observer], limit: f64, config: &Configuration) {
    loop {
        let due = observers
            .iter()
            .enumerate()
            .filter_map(|(i, o)| o.next_time().map(|t| (i, t)))
            .filter(|&(_, t)| t <= limit)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match due {
            Some((i, t)) => observers[i].observe(t, config),
            None => return,
        }
    }
}

/// Checks that `init` agrees with `boundary` on every site the schedule
/// never updates.
pub fn check_boundary(init: &Configuration, boundary: Option<&Configuration>, schedule: &Schedule) -> Result<()> {
    let Some(b) = boundary else { return Ok(()) };
    if b.len() != init.len() {
        return contract(format!("boundary length {} differs from system length {}", b.len(), init.len()));
    }
    for x in 1..init.len() {
        if !schedule.ever_active(x) && init.contains(x) != b.contains(x) {
            return contract(format!("initial configuration disagrees with the boundary at frozen site {x}"));
        }
    }
    Ok(())
}

/// Runs the chain from `init` up to `horizon`.
///
/// Clock rings are a single Poisson stream over the schedule's site span;
/// a ring at a site that is inactive at its time is discarded, which is a
/// thinning of the per-site clocks and leaves the active ones at rate 1.
#[allow(clippy::too_many_arguments)]
pub fn simulate<R: Rng>(
    init: Configuration,
    boundary: Option<&Configuration>,
    rates: &HeatBath,
    rule: UpdateRule,
    schedule: &Schedule,
    horizon: f64,
    rng: R,
    observers: &mut [&mut dyn Observer],
) -> Result<RunSummary> {
    if init.len() != rates.len() {
        return contract(format!("configuration length {} but rates built for {}", init.len(), rates.len()));
    }
    check_boundary(&init, boundary, schedule)?;
    let mut config = init;
    let (mut proposed, mut applied, mut flips) = (0u64, 0u64, 0u64);
    if let Some((lo, hi)) = schedule.span(config.len()) {
        let mut stream = EventStream::new(rng, lo, hi);
        loop {
            let e = stream.next_event();
            fire_observers(observers, e.time.min(horizon), &config);
            if e.time > horizon {
                break;
            }
            proposed += 1;
            if schedule.is_active(e.time, e.site) {
                applied += 1;
                flips += u64::from(apply_rule(&mut config, rates, rule, e.site, e.u));
            }
        }
    }
    fire_observers(observers, horizon, &config);
    Ok(RunSummary { final_config: config, proposed, applied, flips })
}

/// Recorded observables of one trajectory.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub particle_counts: Vec<usize>,
    /// Rightmost particle in `[0, L/2]`.
    pub left_fronts: Vec<usize>,
    /// Leftmost particle in `[L/2, L]`.
    pub right_fronts: Vec<usize>,
    pub site_grid: Vec<usize>,
    /// One row per time, one entry per grid site.
    pub occupancy: Vec<Vec<bool>>,
}

impl TrajectoryRecord {
    /// Long-format CSV: `t,observable,value`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,observable,value")?;
        for (i, t) in self.times.iter().enumerate() {
            writeln!(w, "{t},n,{}", self.particle_counts[i])?;
            writeln!(w, "{t},left_front,{}", self.left_fronts[i])?;
            writeln!(w, "{t},right_front,{}", self.right_fronts[i])?;
            for (x, occ) in self.site_grid.iter().zip(&self.occupancy[i]) {
                writeln!(w, "{t},occ:{x},{}", u8::from(*occ))?;
            }
        }
        Ok(())
    }
}

/// Observer recording a [`TrajectoryRecord`] on a fixed time grid.
#[derive(Debug, Clone)]
pub struct Recorder {
    grid: Vec<f64>,
    next: usize,
    record: TrajectoryRecord,
}

impl Recorder {
    pub fn new(mut times: Vec<f64>, site_grid: Vec<usize>) -> Self {
        times.sort_by(|a, b| a.total_cmp(b));
        Self { grid: times, next: 0, record: TrajectoryRecord { site_grid, ..Default::default() } }
    }

    /// `count` evenly spaced times in `[0, horizon]`.
    pub fn even(horizon: f64, count: usize, site_grid: Vec<usize>) -> Self {
        let count = count.max(2);
        let times = (0..count).map(|i| horizon * i as f64 / (count - 1) as f64).collect();
        Self::new(times, site_grid)
    }

    pub fn record(&self) -> &TrajectoryRecord {
        &self.record
    }

    pub fn into_record(self) -> TrajectoryRecord {
        self.record
    }
}

impl Observer for Recorder {
    fn next_time(&self) -> Option<f64> {
        self.grid.get(self.next).copied()
    }

    fn observe(&mut self, t: f64, config: &Configuration) {
        self.next += 1;
        let half = config.len() / 2;
        let r = &mut self.record;
        r.times.push(t);
        r.particle_counts.push(config.particle_count());
        r.left_fronts.push(config.last_at_or_before(half));
        r.right_fronts.push(config.first_at_or_after(half));
        r.occupancy.push(r.site_grid.iter().map(|&x| config.contains(x)).collect());
    }
}
