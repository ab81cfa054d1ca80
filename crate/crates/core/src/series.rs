use serde::Serialize;

use crate::error::{Error, Result};

/// Where a survival curve came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesSource {
    Quantum,
    Classical,
    Rmt,
    Synthetic,
}

/// Sampled survival probabilities `P(t)`.
///
/// `times` are elapsed times since the start of the run (not absolute
/// driving phase), in the same units as `T_ω`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalSeries {
    pub source: SeriesSource,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl SurvivalSeries {
    pub fn new(source: SeriesSource, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Degenerate(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Degenerate(
                "times must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            source,
            times,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Value at the sample closest to `t`.
    pub fn at(&self, t: f64) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.values)
            .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
            .map(|(_, v)| *v)
    }

    /// Iterator over `(t, P)` pairs with `lo <= t <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times
            .iter()
            .zip(&self.values)
            .filter(move |(t, _)| **t >= lo && **t <= hi)
            .map(|(t, v)| (*t, *v))
    }
}
