//! Fits and distribution comparisons for survival data and amplitude samples.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::rmt::{chi2_cdf, chi2_density, survival_closed, EnsembleClass, RmtSpec};
use crate::series::SurvivalSeries;

/// Least squares line `y = slope x + intercept`, with rms residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(invalid("data", "x and y lengths differ"));
    }
    if xs.len() < 2 {
        return Err(Error::TooFewSamples {
            got: xs.len(),
            need: 2,
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all abscissae equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    Ok(LineFit {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
    })
}

/// `P ≈ ((t − t_shift)/T_H)^{−q}/(q+1)` fitted on a log-log scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub t_heisenberg: f64,
    pub t_shift: f64,
    pub fit_window: (f64, f64),
    /// rms of natural-log residuals.
    pub residual: f64,
    /// Nearest channel number, used for the `(q+1)` normalization.
    pub q: u32,
    /// Window spans less than a decade in `t − t_shift`.
    pub low_confidence: bool,
}

fn positive_window(series: &SurvivalSeries, lo: f64, hi: f64) -> Result<Vec<(f64, f64)>> {
    if !(lo < hi) {
        return Err(invalid("window", format!("need lo < hi, got ({lo}, {hi})")));
    }
    let pts: Vec<(f64, f64)> = series.window(lo, hi).collect();
    if pts.len() < 2 {
        return Err(Error::TooFewSamples {
            got: pts.len(),
            need: 2,
        });
    }
    if let Some(&(time, value)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::NonPositive { time, value });
    }
    Ok(pts)
}

pub fn fit_power_tail(
    series: &SurvivalSeries,
    t_shift: f64,
    window: (f64, f64),
) -> Result<PowerLawFit> {
    let (lo, hi) = window;
    if lo <= t_shift {
        return Err(invalid("window", "window must start after t_shift"));
    }
    let pts = positive_window(series, lo, hi)?;
    let xs: Vec<f64> = pts.iter().map(|(t, _)| (t - t_shift).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, p)| p.ln()).collect();
    let line = fit_line(&xs, &ys)?;
    let exponent = -line.slope;
    if !exponent.is_finite() || exponent <= 0.0 {
        return Err(Error::Degenerate(format!(
            "non-decaying tail, exponent {exponent}"
        )));
    }
    let q = exponent.round().max(1.0) as u32;
    let t_heisenberg = ((line.intercept + f64::from(q + 1).ln()) / exponent).exp();
    let first = pts.first().unwrap().0 - t_shift;
    let last = pts.last().unwrap().0 - t_shift;
    Ok(PowerLawFit {
        exponent,
        t_heisenberg,
        t_shift,
        fit_window: (lo, hi),
        residual: line.residual,
        q,
        low_confidence: last / first < 10.0,
    })
}

/// Default tail window: the last decade of the data, starting no earlier
/// than `t_shift + 2 T_H(estimate)`.
pub fn default_power_window(series: &SurvivalSeries, t_shift: f64, th_estimate: f64) -> (f64, f64) {
    let t_end = *series.times.last().unwrap_or(&0.0);
    ((t_end / 10.0).max(t_shift + 2.0 * th_estimate), t_end)
}

/// Power-law fit with the default window, refining the `T_H` estimate used
/// to place the window until it settles.
pub fn fit_power_tail_auto(
    series: &SurvivalSeries,
    t_shift: f64,
    th_guess: f64,
) -> Result<PowerLawFit> {
    let t_end = *series.times.last().unwrap_or(&0.0);
    let mut th = th_guess;
    let mut fit = None;
    for _ in 0..10 {
        let (lo, hi) = default_power_window(series, t_shift, th);
        // Keep at least a fifth of the run inside the window.
        let lo = lo.min(t_end - 0.2 * (t_end - t_shift));
        let f = fit_power_tail(series, t_shift, (lo, hi))?;
        let settled = (f.t_heisenberg - th).abs() < 1e-3 * th;
        th = f.t_heisenberg;
        fit = Some(f);
        if settled {
            break;
        }
    }
    Ok(fit.expect("loop runs at least once"))
}

/// `P = e^{−ν t}` fitted on a log scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentialFit {
    pub rate: f64,
    pub window: (f64, f64),
    pub prefactor: f64,
    pub residual: f64,
}

pub fn fit_exponential(series: &SurvivalSeries, window: (f64, f64)) -> Result<ExponentialFit> {
    let pts = positive_window(series, window.0, window.1)?;
    let xs: Vec<f64> = pts.iter().map(|(t, _)| *t).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, p)| p.ln()).collect();
    let line = fit_line(&xs, &ys)?;
    Ok(ExponentialFit {
        rate: -line.slope,
        window,
        prefactor: line.intercept.exp(),
        residual: line.residual,
    })
}

/// rms of `log₁₀(P_sim / P_RMT)` over `window`, with the RMT curve evaluated at
/// `t − t_shift`.
pub fn rmt_overlay_rms(
    series: &SurvivalSeries,
    spec: &RmtSpec,
    t_shift: f64,
    window: (f64, f64),
) -> Result<f64> {
    let pts = positive_window(series, window.0, window.1)?;
    let mut ss = 0.0;
    for (t, p) in &pts {
        let model = survival_closed((t - t_shift).max(0.0), spec)?;
        ss += (p / model).log10().powi(2);
    }
    Ok((ss / pts.len() as f64).sqrt())
}

/// Histogram of `log₁₀ x` with the matching χ²_ν curves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogHistogram {
    pub centers: Vec<f64>,
    /// Density per unit `log₁₀ x`.
    pub density: Vec<f64>,
    /// `x ln10 W_ν(x)` at the bin centers, for GOE, GUE, GSE.
    pub reference: Vec<[f64; 3]>,
    /// Samples outside the binned range.
    pub outside: usize,
}

pub const HIST_BINS: usize = 40;
pub const HIST_RANGE: (f64, f64) = (-3.0, 1.0);

pub fn log_histogram(x: &[f64]) -> LogHistogram {
    let (lo, hi) = HIST_RANGE;
    let width = (hi - lo) / HIST_BINS as f64;
    let mut counts = vec![0usize; HIST_BINS];
    let mut outside = 0;
    for v in x {
        let l = v.log10();
        if l.is_finite() && l >= lo && l < hi {
            counts[((l - lo) / width) as usize] += 1;
        } else {
            outside += 1;
        }
    }
    let n = x.len().max(1) as f64;
    let centers: Vec<f64> = (0..HIST_BINS)
        .map(|i| lo + (i as f64 + 0.5) * width)
        .collect();
    let reference = centers
        .iter()
        .map(|c| {
            let xv = 10f64.powf(*c);
            EnsembleClass::ALL
                .map(|cls| xv * std::f64::consts::LN_10 * chi2_density(xv, cls).unwrap_or(f64::NAN))
        })
        .collect();
    LogHistogram {
        centers,
        density: counts.iter().map(|c| *c as f64 / (n * width)).collect(),
        reference,
        outside,
    }
}

/// KS distances of the rescaled samples `x = s/s̄` against each `χ²_ν`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionComparison {
    pub distances: [(EnsembleClass, f64); 3],
    pub best: EnsembleClass,
    pub samples: usize,
    pub histogram: LogHistogram,
}

impl DistributionComparison {
    pub fn distance(&self, class: EnsembleClass) -> f64 {
        self.distances
            .iter()
            .find(|(c, _)| *c == class)
            .map(|(_, d)| *d)
            .expect("all classes present")
    }
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Rescales by the sample mean and ranks GOE/GUE/GSE by KS distance. Accepts
/// either raw densities or already normalized `s_n`.
pub fn compare_distributions(samples: &[f64]) -> Result<DistributionComparison> {
    use crate::quantum::MIN_AMPLITUDE_SAMPLES;
    if samples.len() < MIN_AMPLITUDE_SAMPLES {
        return Err(Error::TooFewSamples {
            got: samples.len(),
            need: MIN_AMPLITUDE_SAMPLES,
        });
    }
    if samples.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
        return Err(invalid("samples", "must be finite and non-negative"));
    }
    let first = samples[0];
    if samples.iter().all(|s| *s == first) {
        return Err(Error::Degenerate("all samples equal".into()));
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let x: Vec<f64> = samples.iter().map(|s| s / mean).collect();
    let distances = EnsembleClass::ALL.map(|c| (c, ks_distance(&x, |v| chi2_cdf(v, c))));
    let best = distances
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(c, _)| *c)
        .unwrap();
    Ok(DistributionComparison {
        distances,
        best,
        samples: x.len(),
        histogram: log_histogram(&x),
    })
}

/// `P(ω) = a / √((ω − ω_B)² + 3Δω²) + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakFit {
    pub a: f64,
    pub b: f64,
    pub delta_omega: f64,
    pub center: f64,
    /// rms of absolute residuals.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl PeakFit {
    pub fn model(&self, omega: f64) -> f64 {
        peak_model(omega, self.center, self.a, self.b, self.delta_omega)
    }

    /// `a/(√3 Δω) + b`.
    pub fn peak_value(&self) -> f64 {
        self.a / (3f64.sqrt() * self.delta_omega) + self.b
    }
}

pub fn peak_model(omega: f64, center: f64, a: f64, b: f64, delta_omega: f64) -> f64 {
    let d = omega - center;
    a / (d * d + 3.0 * delta_omega * delta_omega).sqrt() + b
}

pub const PEAK_MAX_ITERATIONS: usize = 500;
pub const MIN_PEAK_POINTS: usize = 10;

/// Initial guess: background from the far wings, width from the half-maximum
/// crossing (`HWHM = 3Δω` for this profile), amplitude from the maximum.
fn peak_initial_guess(scan: &[(f64, f64)], center: f64) -> (f64, f64, f64) {
    let mut by_distance: Vec<&(f64, f64)> = scan.iter().collect();
    by_distance.sort_by(|x, y| (x.0 - center).abs().total_cmp(&(y.0 - center).abs()));
    let wing = (scan.len() / 5).max(2);
    let b = by_distance[scan.len() - wing..]
        .iter()
        .map(|(_, p)| *p)
        .sum::<f64>()
        / wing as f64;
    let (_, p_max) = scan
        .iter()
        .copied()
        .fold((0.0, f64::MIN), |m, v| if v.1 > m.1 { v } else { m });
    let half = b + 0.5 * (p_max - b);
    let hwhm = by_distance
        .iter()
        .find(|(_, p)| *p < half)
        .map(|(w, _)| (w - center).abs())
        .unwrap_or_else(|| (by_distance[scan.len() - 1].0 - center).abs());
    let span = scan.iter().map(|(w, _)| *w).fold(f64::MIN, f64::max)
        - scan.iter().map(|(w, _)| *w).fold(f64::MAX, f64::min);
    let dw = (hwhm / 3.0).max(span * 1e-3);
    let a = ((p_max - b) * 3f64.sqrt() * dw).max(f64::MIN_POSITIVE);
    (a, b.max(0.0), dw)
}

/// Levenberg-damped Gauss-Newton fit of `(a, b, Δω)` with `ω_B` fixed.
pub fn fit_peak_profile(scan: &[(f64, f64)], omega_b: f64) -> Result<PeakFit> {
    if scan.len() < MIN_PEAK_POINTS {
        return Err(Error::TooFewSamples {
            got: scan.len(),
            need: MIN_PEAK_POINTS,
        });
    }
    let lo = scan.iter().map(|s| s.0).fold(f64::MAX, f64::min);
    let hi = scan.iter().map(|s| s.0).fold(f64::MIN, f64::max);
    if !(lo <= omega_b && omega_b <= hi) {
        return Err(invalid(
            "scan",
            format!("[{lo}, {hi}] does not bracket omega_B = {omega_b}"),
        ));
    }
    let cost = |a: f64, b: f64, w: f64| -> f64 {
        scan.iter()
            .map(|(om, p)| (peak_model(*om, omega_b, a, b, w) - p).powi(2))
            .sum()
    };
    let (mut a, mut b, mut w) = peak_initial_guess(scan, omega_b);
    let mut c = cost(a, b, w);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < PEAK_MAX_ITERATIONS {
        iterations += 1;
        // Normal equations JᵀJ δ = −Jᵀr.
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (om, p) in scan {
            let d = om - omega_b;
            let root = (d * d + 3.0 * w * w).sqrt();
            let r = a / root + b - p;
            let jac = [1.0 / root, 1.0, -3.0 * a * w / root.powi(3)];
            for i in 0..3 {
                jtr[i] += jac[i] * r;
                for k in 0..3 {
                    jtj[i][k] += jac[i] * jac[k];
                }
            }
        }
        let mut accepted = false;
        let mut step = [0.0; 3];
        for _ in 0..60 {
            let mut m = jtj;
            for i in 0..3 {
                m[i][i] += lambda * jtj[i][i].max(1e-300);
            }
            let Some(delta) = solve3(m, [-jtr[0], -jtr[1], -jtr[2]]) else {
                lambda *= 10.0;
                continue;
            };
            let (na, nb, nw) = (a + delta[0], b + delta[1], (w + delta[2]).abs());
            let nc = cost(na, nb, nw);
            if nc.is_finite() && nc <= c {
                step = [na - a, nb - b, nw - w];
                a = na;
                b = nb;
                w = nw;
                c = nc;
                lambda = (lambda * 0.3).max(1e-15);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        let rel = (step[0] / a)
            .abs()
            .max((step[1] / b.abs().max(1e-300)).abs())
            .max((step[2] / w).abs());
        if !accepted || rel < 1e-10 {
            converged = true;
            break;
        }
    }
    let fit = PeakFit {
        a,
        b,
        delta_omega: w,
        center: omega_b,
        residual: (c / scan.len() as f64).sqrt(),
        iterations,
        converged,
    };
    if !fit.converged {
        return Err(Error::FitNotConverged {
            iterations,
            residual: fit.residual,
        });
    }
    Ok(fit)
}

fn solve3(m: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if !d.is_normal() {
        return None;
    }
    let mut out = [0.0; 3];
    for (col, o) in out.iter_mut().enumerate() {
        let mut mc = m;
        for row in 0..3 {
            mc[row][col] = rhs[row];
        }
        *o = det(&mc) / d;
    }
    Some(out)
}

/// `Δω ∼ t^{−γ}` from a log-log regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WidthScalingFit {
    pub gamma: f64,
    pub prefactor: f64,
    pub residual: f64,
}

pub fn fit_width_scaling(widths: &[(f64, f64)]) -> Result<WidthScalingFit> {
    if widths.len() < 4 {
        return Err(Error::TooFewSamples {
            got: widths.len(),
            need: 4,
        });
    }
    if let Some(&(time, value)) = widths.iter().find(|(t, w)| !(*w > 0.0) || !(*t > 0.0)) {
        return Err(Error::NonPositive { time, value });
    }
    let xs: Vec<f64> = widths.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = widths.iter().map(|(_, w)| w.ln()).collect();
    let line = fit_line(&xs, &ys)?;
    Ok(WidthScalingFit {
        gamma: -line.slope,
        prefactor: line.intercept.exp(),
        residual: line.residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::SeriesSource;
    use approx::assert_relative_eq;

    fn series(f: impl Fn(f64) -> f64, ts: impl Iterator<Item = f64>) -> SurvivalSeries {
        let times: Vec<f64> = ts.collect();
        let values = times.iter().map(|t| f(*t)).collect();
        SurvivalSeries::new(SeriesSource::Synthetic, times, values).unwrap()
    }

    #[test]
    fn power_tail_round_trip() {
        let s = series(|t| (t / 50.0).powi(-2) / 3.0, (1..=2000).map(f64::from));
        let fit = fit_power_tail(&s, 0.0, (100.0, 2000.0)).unwrap();
        assert_relative_eq!(fit.exponent, 2.0, epsilon = 1e-10);
        assert_relative_eq!(fit.t_heisenberg, 50.0, epsilon = 1e-8);
        assert_eq!(fit.q, 2);
        assert!(!fit.low_confidence);
        assert!(fit.residual < 1e-10);
    }

    #[test]
    fn power_tail_errors() {
        let s = series(|t| 1.0 - t / 10.0, (1..=20).map(f64::from));
        assert!(matches!(
            fit_power_tail(&s, 0.0, (2.0, 20.0)),
            Err(Error::NonPositive { .. })
        ));
        let short = series(|t| t.powi(-1), (1..=20).map(f64::from));
        assert!(
            fit_power_tail(&short, 0.0, (5.0, 20.0))
                .unwrap()
                .low_confidence
        );
    }

    #[test]
    fn exponential_round_trip() {
        let s = series(|t| (-0.01 * t).exp(), (0..500).map(f64::from));
        let fit = fit_exponential(&s, (10.0, 400.0)).unwrap();
        assert_relative_eq!(fit.rate, 0.01, epsilon = 1e-12);
        let flat = series(|_| 0.3, (0..50).map(f64::from));
        assert!(fit_exponential(&flat, (0.0, 49.0)).unwrap().rate.abs() < 1e-12);
    }

    #[test]
    fn peak_round_trip() {
        let (a, b, dw) = (1e-3, 1e-4, 0.002);
        let scan: Vec<(f64, f64)> = (0..41)
            .map(|i| {
                let om = 0.98 + 0.001 * i as f64;
                (om, peak_model(om, 1.0, a, b, dw))
            })
            .collect();
        let fit = fit_peak_profile(&scan, 1.0).unwrap();
        assert_relative_eq!(fit.a, a, max_relative = 1e-3);
        assert_relative_eq!(fit.b, b, max_relative = 1e-3);
        assert_relative_eq!(fit.delta_omega, dw, max_relative = 1e-3);
        assert!(fit.residual < 1e-10);
        assert_relative_eq!(
            fit.model(1.0),
            a / (3f64.sqrt() * fit.delta_omega) + fit.b,
            epsilon = 1e-15
        );
    }

    #[test]
    fn peak_preconditions() {
        let scan: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 1.0)).collect();
        assert!(fit_peak_profile(&scan, 2.0).is_err());
        let scan: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 1.0)).collect();
        assert!(fit_peak_profile(&scan, 50.0).is_err());
    }

    #[test]
    fn width_scaling_round_trip() {
        let w: Vec<(f64, f64)> = [75.0f64, 150.0, 300.0, 600.0]
            .iter()
            .map(|t| (*t, 0.01 * t.powf(-1.45)))
            .collect();
        let fit = fit_width_scaling(&w).unwrap();
        assert_relative_eq!(fit.gamma, 1.45, epsilon = 1e-12);
        assert_relative_eq!(fit.prefactor, 0.01, max_relative = 1e-12);
        let fourier: Vec<(f64, f64)> = [1.0f64, 2.0, 4.0, 8.0]
            .iter()
            .map(|t| (*t, 3.0 / t))
            .collect();
        assert_relative_eq!(
            fit_width_scaling(&fourier).unwrap().gamma,
            1.0,
            epsilon = 1e-12
        );
        assert!(fit_width_scaling(&w[..3]).is_err());
    }

    #[test]
    fn ks_rejects_degenerate() {
        assert!(compare_distributions(&[1.0; 100]).is_err());
        assert!(compare_distributions(&[1.0; 10]).is_err());
    }

    #[test]
    fn uniform_samples_have_unit_x() {
        let h = log_histogram(&[1.0; 64]);
        let total: f64 = h.density.iter().sum::<f64>() * 0.1;
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }
}
