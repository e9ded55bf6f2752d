//! Which sites may update at which times.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A set of interior sites allowed to update.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActiveSites {
    All,
    None,
    /// Inclusive range.
    Range {
        lo: usize,
        hi: usize,
    },
    /// Sorted explicit list.
    List(Vec<usize>),
    /// Everything except a sorted list.
    Except(Vec<usize>),
    /// Everything except the positive multiples of the spacing.
    ExceptMultiples(usize),
}

impl ActiveSites {
    pub fn list(mut sites: Vec<usize>) -> Self {
        sites.sort_unstable();
        sites.dedup();
        Self::List(sites)
    }

    pub fn except(mut sites: Vec<usize>) -> Self {
        sites.sort_unstable();
        sites.dedup();
        Self::Except(sites)
    }

    /// Membership for an interior site `x` of `[0, len]`.
    #[inline]
    pub fn contains(&self, x: usize) -> bool {
        match self {
            Self::All => true,
            Self::None => false,
            Self::Range { lo, hi } => (*lo..=*hi).contains(&x),
            Self::List(v) => v.binary_search(&x).is_ok(),
            Self::Except(v) => v.binary_search(&x).is_err(),
            Self::ExceptMultiples(s) => !x.is_multiple_of(*s),
        }
    }

    /// Smallest range holding every active interior site, if any.
    pub fn span(&self, len: usize) -> Option<(usize, usize)> {
        let interior = (1, len.checked_sub(1)?);
        if interior.1 < 1 {
            return None;
        }
        let clip = |lo: usize, hi: usize| {
            let (lo, hi) = (lo.max(1), hi.min(len - 1));
            (lo <= hi).then_some((lo, hi))
        };
        match self {
            Self::None => None,
            Self::Range { lo, hi } => clip(*lo, *hi),
            Self::List(v) => {
                let inside: Vec<_> = v.iter().filter(|&&x| x >= 1 && x < len).collect();
                Some((**inside.first()?, **inside.last()?))
            }
            Self::All | Self::Except(_) | Self::ExceptMultiples(_) => Some(interior),
        }
    }
}

impl fmt::Display for ActiveSites {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            Self::All => write!(f, "all"),
            Self::None => write!(f, "none"),
            Self::Range { lo, hi } => write!(f, "{lo}..{hi}"),
            Self::List(v) => write!(f, "{}", join(v)),
            Self::Except(v) => write!(f, "!{}", join(v)),
            Self::ExceptMultiples(s) => write!(f, "!mult:{s}"),
        }
    }
}

impl FromStr for ActiveSites {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad site '{t}': {e}"));
        let nums = |t: &str| t.split(',').map(num).collect::<std::result::Result<Vec<_>, _>>();
        match s {
            "all" => return Ok(Self::All),
            "none" => return Ok(Self::None),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("!mult:") {
            let spacing = num(rest)?;
            if spacing == 0 {
                return Err("spacing must be positive".into());
            }
            return Ok(Self::ExceptMultiples(spacing));
        }
        if let Some(rest) = s.strip_prefix('!') {
            return Ok(Self::except(nums(rest)?));
        }
        if let Some((lo, hi)) = s.split_once("..") {
            let (lo, hi) = (num(lo)?, num(hi)?);
            if lo > hi {
                return Err(format!("empty range {s}"));
            }
            return Ok(Self::Range { lo, hi });
        }
        Ok(Self::list(nums(s)?))
    }
}

/// Sites active during `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub start: f64,
    pub end: f64,
    pub sites: ActiveSites,
}

/// Periodic censoring: during `[T_k, T_k + 1)` every site updates, during
/// `[T_k + 1, T_{k+1})` the observation points `y_j = j * spacing` are
/// frozen. `T_k = k * period`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CensoringPlan {
    pub spacing: usize,
    pub period: f64,
}

impl CensoringPlan {
    pub fn new(spacing: usize, period: f64) -> Result<Self> {
        if spacing == 0 || !(period > 1.0) {
            return Err(Error::Invalid(format!(
                "censoring needs spacing >= 1 and period > 1, got {spacing}, {period}"
            )));
        }
        Ok(Self { spacing, period })
    }

    /// The default plan for system length `len`: spacing
    /// `floor((log L)^(1+beta))` and period `1 + spacing^(4+rho)`.
    pub fn standard(len: usize, rho: f64, beta: f64) -> Result<Self> {
        let spacing = ((len as f64).ln().powf(1.0 + beta).floor() as usize).max(1);
        let alpha = 3.0 + rho;
        Self::new(spacing, 1.0 + (spacing as f64).powf(alpha + 1.0))
    }

    /// `T_k`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.period
    }

    /// Observation points `y_1 < ... < y_r`, all strictly inside `(0, len)`.
    pub fn observation_points(&self, len: usize) -> Vec<usize> {
        (1..).map(|j| j * self.spacing).take_while(|&y| y < len).collect()
    }

    #[inline]
    pub fn is_active(&self, t: f64, x: usize) -> bool {
        t - (t / self.period).floor() * self.period < 1.0 || !x.is_multiple_of(self.spacing)
    }
}

/// Update schedule: which sites listen to their clocks at which times.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    /// The same active set at all times.
    Always(ActiveSites),
    /// Consecutive windows starting at 0; nothing updates after the last.
    Windows(Vec<Window>),
    Censored(CensoringPlan),
}

impl Schedule {
    pub fn full() -> Self {
        Self::Always(ActiveSites::All)
    }

    pub fn frozen() -> Self {
        Self::Always(ActiveSites::None)
    }

    pub fn windows(windows: Vec<Window>) -> Result<Self> {
        let mut t = 0.0;
        for (i, w) in windows.iter().enumerate() {
            if w.start != t {
                return Err(Error::Invalid(format!(
                    "window {i} starts at {} but the previous one ends at {t}",
                    w.start
                )));
            }
            if !(w.end > w.start) {
                return Err(Error::Invalid(format!("window {i} is empty: [{}, {})", w.start, w.end)));
            }
            t = w.end;
        }
        Ok(Self::Windows(windows))
    }

    #[inline]
    pub fn is_active(&self, t: f64, x: usize) -> bool {
        match self {
            Self::Always(s) => s.contains(x),
            Self::Windows(ws) => {
                let i = ws.partition_point(|w| w.end <= t);
                ws.get(i).is_some_and(|w| w.start <= t && w.sites.contains(x))
            }
            Self::Censored(plan) => plan.is_active(t, x),
        }
    }

    /// Whether `x` can ever update.
    pub fn ever_active(&self, x: usize) -> bool {
        match self {
            Self::Always(s) => s.contains(x),
            Self::Windows(ws) => ws.iter().any(|w| w.sites.contains(x)),
            Self::Censored(_) => true,
        }
    }

    /// Smallest site range containing every site that can ever update.
    pub fn span(&self, len: usize) -> Option<(usize, usize)> {
        match self {
            Self::Always(s) => s.span(len),
            Self::Windows(ws) => {
                ws.iter().filter_map(|w| w.sites.span(len)).reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
            }
            Self::Censored(_) => ActiveSites::All.span(len),
        }
    }

    /// Parses the line format `t_start t_end sites:<spec>`; `#` starts a
    /// comment. Site specs: `all`, `none`, `LO..HI`, `x,y,z`, `!x,y,z`,
    /// `!mult:S`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut windows = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: i + 1, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [start, end, sites] = fields.as_slice() else {
                return Err(err(format!("expected 3 fields, found {}", fields.len())));
            };
            let start: f64 = start.parse().map_err(|e| err(format!("t_start: {e}")))?;
            let end: f64 = end.parse().map_err(|e| err(format!("t_end: {e}")))?;
            let spec =
                sites.strip_prefix("sites:").ok_or_else(|| err("third field must start with 'sites:'".into()))?;
            let sites = spec.parse().map_err(err)?;
            windows.push(Window { start, end, sites });
        }
        Self::windows(windows)
    }

    /// Inverse of [`Schedule::parse`] for window schedules.
    pub fn to_text(&self) -> Option<String> {
        let Self::Windows(ws) = self else { return None };
        Some(ws.iter().map(|w| format!("{} {} sites:{}\n", w.start, w.end, w.sites)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn site_specs_parse() {
        assert_eq!("all".parse::<ActiveSites>().unwrap(), ActiveSites::All);
        assert_eq!("3..9".parse::<ActiveSites>().unwrap(), ActiveSites::Range { lo: 3, hi: 9 });
        assert_eq!("9,3,3".parse::<ActiveSites>().unwrap(), ActiveSites::List(vec![3, 9]));
        assert_eq!("!4,2".parse::<ActiveSites>().unwrap(), ActiveSites::Except(vec![2, 4]));
        assert_eq!("!mult:5".parse::<ActiveSites>().unwrap(), ActiveSites::ExceptMultiples(5));
        assert!("9..3".parse::<ActiveSites>().is_err());
        assert!("x".parse::<ActiveSites>().is_err());
    }

    #[test]
    fn schedule_file_round_trip() {
        let text = "# warmup\n0 1 sites:all\n1 5.5 sites:!mult:4\n\n5.5 9 sites:2..6\n";
        let s = Schedule::parse(text).unwrap();
        assert!(s.is_active(0.5, 4));
        assert!(!s.is_active(2.0, 8) && s.is_active(2.0, 7));
        assert!(s.is_active(6.0, 2) && !s.is_active(6.0, 7));
        assert!(!s.is_active(9.0, 3));
        assert_eq!(Schedule::parse(&s.to_text().unwrap()).unwrap(), s);
        assert_eq!(s.span(20), Some((1, 19)));
    }

    #[test]
    fn schedule_errors_carry_line_numbers() {
        match Schedule::parse("0 1 sites:all\n2 3 sites:all") {
            Err(Error::Invalid(_)) => {}
            other => panic!("{other:?}"),
        }
        match Schedule::parse("0 1 all") {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn censoring_freezes_observation_points_between_openings() {
        let plan = CensoringPlan::new(8, 10.0).unwrap();
        assert_eq!(plan.observation_points(30), vec![8, 16, 24]);
        assert!(plan.is_active(0.5, 8) && plan.is_active(20.9, 16));
        assert!(!plan.is_active(1.5, 8) && !plan.is_active(19.99, 24));
        assert!(plan.is_active(5.0, 9));
        let std = CensoringPlan::standard(8192, 0.5, 1.0).unwrap();
        assert_eq!(std.spacing, 81);
        assert_eq!(std.time(2), 2.0 * (1.0 + 81f64.powf(4.5)));
    }
}
