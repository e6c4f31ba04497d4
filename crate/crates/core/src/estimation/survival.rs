use std::fmt::Write as _;
use std::path::Path;

use crate::coupling::TrialOutcome;
use crate::error::{Error, Result};
use crate::real::Real;

pub const SURVIVAL_HEADER: &str = "t,survivors,survival,log_survival";

/// Empirical tail `P[τ > t]` on the integer grid `t = 0..=t_max`.
///
/// Censored trials count as survivors at every grid point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurvivalCurve {
    survivors: Vec<u64>,
    total: u64,
    censored: u64,
}

impl SurvivalCurve {
    pub fn from_outcomes(outcomes: &[TrialOutcome]) -> Self {
        let t_max = outcomes
            .iter()
            .filter_map(|o| o.coupling_time())
            .max()
            .unwrap_or(0) as usize;
        // histogram of event times, then a reverse cumulative sum
        let mut events = vec![0u64; t_max + 1];
        let mut censored = 0u64;
        for o in outcomes {
            match o {
                TrialOutcome::Coupled(t) => events[*t as usize] += 1,
                TrialOutcome::Censored(_) => censored += 1,
            }
        }
        let mut survivors = vec![0u64; t_max + 1];
        let mut acc = censored;
        for t in (0..=t_max).rev() {
            survivors[t] = acc;
            acc += events[t];
        }
        Self {
            survivors,
            total: outcomes.len() as u64,
            censored,
        }
    }

    /// Builds a curve from raw columns, checking the invariants.
    pub fn from_parts(survivors: Vec<u64>, total: u64, censored: u64) -> Result<Self> {
        if survivors.is_empty() {
            return Err(Error::InvalidInput("survival curve needs at least one grid point".into()));
        }
        if survivors.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidInput("survivor counts must be non-increasing".into()));
        }
        if survivors[0] > total {
            return Err(Error::InvalidInput(format!(
                "{} survivors at t = 0 exceed {total} trials",
                survivors[0]
            )));
        }
        if *survivors.last().unwrap() < censored {
            return Err(Error::InvalidInput("fewer survivors than censored trials".into()));
        }
        Ok(Self {
            survivors,
            total,
            censored,
        })
    }

    pub fn survivors(&self) -> &[u64] {
        &self.survivors
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn censored(&self) -> u64 {
        self.censored
    }

    /// Last grid point.
    pub fn t_max(&self) -> usize {
        self.survivors.len() - 1
    }

    pub fn survival(&self, t: usize) -> f64 {
        self.survivors.get(t).copied().unwrap_or(self.censored) as f64 / self.total as f64
    }

    /// `survivors / total` on the whole grid.
    pub fn fractions<T: Real>(&self) -> Vec<T> {
        let n = T::lit(self.total as f64);
        self.survivors.iter().map(|&s| T::lit(s as f64) / n).collect()
    }

    /// Renders the curve as `survival.csv` text.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * self.survivors.len() + 64);
        out.push_str(SURVIVAL_HEADER);
        out.push('\n');
        for (t, &s) in self.survivors.iter().enumerate() {
            let frac = s as f64 / self.total as f64;
            // writing into a String cannot fail
            let _ = writeln!(out, "{t},{s},{frac},{}", frac.ln());
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Parses `survival.csv` text. The trial count is recovered from the
    /// `survivors`/`survival` columns; `censored` is not stored in the file and
    /// is reported as 0.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == SURVIVAL_HEADER => {}
            Some((_, h)) => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header `{SURVIVAL_HEADER}`, found `{h}`"),
                })
            }
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "empty file".into(),
                })
            }
        }
        let mut survivors = Vec::new();
        let mut total: Option<u64> = None;
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: i + 1, message };
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(parse_err(format!("expected 4 columns, found {}", cols.len())));
            }
            let t: usize = cols[0]
                .parse()
                .map_err(|_| parse_err(format!("bad t `{}`", cols[0])))?;
            if t != survivors.len() {
                return Err(parse_err(format!("expected t = {}, found {t}", survivors.len())));
            }
            let s: u64 = cols[1]
                .parse()
                .map_err(|_| parse_err(format!("bad survivors `{}`", cols[1])))?;
            let frac: f64 = cols[2]
                .parse()
                .map_err(|_| parse_err(format!("bad survival `{}`", cols[2])))?;
            if total.is_none() && s > 0 && frac > 0.0 {
                total = Some((s as f64 / frac).round() as u64);
            }
            survivors.push(s);
        }
        let total = total.ok_or_else(|| Error::Parse {
            line: 2,
            message: "cannot recover the trial count: no positive survival".into(),
        })?;
        Self::from_parts(survivors, total, 0)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(&path, e))?;
        Self::from_csv(&text)
    }
}
