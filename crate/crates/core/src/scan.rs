//! Resonance scans: survival at fixed times across a range of `ω / ω_B`.
//!
//! The static force is varied at fixed `ω`, so the driving is identical for
//! every scan point. Peak profiles are fitted on the ratio axis with the
//! centre pinned at 1; widths are therefore relative (`Δω / ω_B`).

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{fit_peak_profile, fit_width_scaling, PeakFit, WidthScalingFit};
use crate::classical::StripBounds;
use crate::error::{invalid, Result};
use crate::model::{static_force_for_ratio, LatticeParams};
use crate::quantum::{
    reference_packet, survival_probability, MomentumGrid, Propagator, PropagatorSettings,
};

pub const DEFAULT_SCAN_POINTS: usize = 41;
pub const DEFAULT_SCAN_RANGE: (f64, f64) = (0.998, 1.002);

/// Evenly spaced ratios over `[lo, hi]`, both ends included.
pub fn ratio_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(invalid(
            "ratios",
            format!("need 0 < lo < hi and >= 2 points, got [{lo}, {hi}] x {points}"),
        ));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|i| lo + step * i as f64).collect())
}

/// The 41-point scan over `[0.998, 1.002]`.
pub fn default_ratios() -> Vec<f64> {
    ratio_grid(
        DEFAULT_SCAN_RANGE.0,
        DEFAULT_SCAN_RANGE.1,
        DEFAULT_SCAN_POINTS,
    )
    .expect("valid default range")
}

/// One scan point. `survival[i]` belongs to the `i`-th requested time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanPoint {
    pub ratio: f64,
    pub f0: f64,
    pub survival: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonanceScan {
    /// Evaluation times in driving periods, ascending.
    pub periods: Vec<usize>,
    pub points: Vec<ScanPoint>,
}

impl ResonanceScan {
    /// Successful `(ratio, P)` pairs at the `i`-th evaluation time.
    pub fn profile(&self, i: usize) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter(|p| p.error.is_none())
            .map(|p| (p.ratio, p.survival[i]))
            .collect()
    }
}

/// Survival at each of `periods` for every ratio. Points run in parallel on
/// the current rayon pool and are returned in input order; a failing point is
/// recorded and the rest proceed.
pub fn resonance_scan(
    base: &LatticeParams,
    ratios: &[f64],
    periods: &[usize],
    grid: MomentumGrid,
    settings: PropagatorSettings,
    strip: &StripBounds,
) -> Result<ResonanceScan> {
    if ratios.is_empty() || ratios.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(invalid("ratios", "need at least one finite positive ratio"));
    }
    let mut periods = periods.to_vec();
    periods.sort_unstable();
    periods.dedup();
    if periods.is_empty() {
        return Err(invalid("periods", "need at least one evaluation time"));
    }
    grid.check_strip(strip)?;
    let points = ratios
        .par_iter()
        .map(|&ratio| {
            let f0 = static_force_for_ratio(ratio, base.omega, base.hbar).unwrap_or(f64::NAN);
            match scan_point(&base.with_f0(f0), &periods, grid, settings, strip) {
                Ok(survival) => ScanPoint {
                    ratio,
                    f0,
                    survival,
                    error: None,
                },
                Err(e) => ScanPoint {
                    ratio,
                    f0,
                    survival: vec![f64::NAN; periods.len()],
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(ResonanceScan { periods, points })
}

fn scan_point(
    params: &LatticeParams,
    periods: &[usize],
    grid: MomentumGrid,
    settings: PropagatorSettings,
    strip: &StripBounds,
) -> Result<Vec<f64>> {
    let mut prop = Propagator::new(*params, grid, settings)?;
    let mut state = reference_packet(grid, *params)?;
    let mut done = 0;
    let mut out = Vec::with_capacity(periods.len());
    for &target in periods {
        prop.evolve_periods(&mut state, target - done)?;
        done = target;
        out.push(survival_probability(&state, strip));
    }
    Ok(out)
}

/// Peak fits per evaluation time and the width scaling across them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanFits {
    /// `(periods, fit or error message)`.
    pub peaks: Vec<(usize, std::result::Result<PeakFit, String>)>,
    pub scaling: std::result::Result<WidthScalingFit, String>,
}

pub fn fit_scan(scan: &ResonanceScan) -> ScanFits {
    let peaks: Vec<_> = scan
        .periods
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            (
                n,
                fit_peak_profile(&scan.profile(i), 1.0).map_err(|e| e.to_string()),
            )
        })
        .collect();
    let widths: Vec<(f64, f64)> = peaks
        .iter()
        .filter_map(|(n, f)| f.as_ref().ok().map(|f| (*n as f64, f.delta_omega)))
        .collect();
    let scaling = fit_width_scaling(&widths).map_err(|e| e.to_string());
    ScanFits { peaks, scaling }
}
