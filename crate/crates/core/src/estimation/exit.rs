use crate::error::{Error, Result};

/// Finite union of closed intervals on the line.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSet {
    intervals: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        if let Some(&(lo, hi)) = intervals.iter().find(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::InvalidInput(format!("interval [{lo}, {hi}] is empty")));
        }
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= x && x <= hi)
    }

    pub fn intersects(&self, other: &IntervalSet) -> bool {
        self.intervals.iter().any(|&(a, b)| {
            other
                .intervals
                .iter()
                .any(|&(c, d)| a <= d && c <= b)
        })
    }
}

/// Periodic sequence of disjoint set pairs `(A_t, B_t)`; `t` indexes the
/// pair cyclically.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitSpec {
    pairs: Vec<(IntervalSet, IntervalSet)>,
}

impl ExitSpec {
    pub fn new(pairs: Vec<(IntervalSet, IntervalSet)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidInput("exit spec needs a period of at least 1".into()));
        }
        for (t, (a, b)) in pairs.iter().enumerate() {
            if a.intersects(b) {
                return Err(Error::InvalidInput(format!("A_{t} and B_{t} overlap")));
            }
        }
        Ok(Self { pairs })
    }

    pub fn period(&self) -> usize {
        self.pairs.len()
    }

    #[inline]
    pub fn sets_at(&self, t: u64) -> (&IntervalSet, &IntervalSet) {
        let (a, b) = &self.pairs[(t % self.pairs.len() as u64) as usize];
        (a, b)
    }
}
