//! Classical trajectories and tangent maps of `H = p²/2 + cos x + F(t) x`.
//!
//! Equations of motion: `ẋ = p`, `ṗ = sin x − F(t)`; tangent flow
//! `δẋ = δp`, `δṗ = cos x δx`. Integration is a kick-drift-kick splitting
//! with the force evaluated at the step midpoint, so every substep of the
//! tangent map has unit determinant.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::LatticeParams;
use crate::series::{SeriesSource, SurvivalSeries};

/// Default number of integration steps per driving period.
pub const DEFAULT_STEPS_PER_PERIOD: usize = 2048;

/// Monodromy norm below which an ensemble candidate counts as regular.
pub const ISLAND_NORM_THRESHOLD: f64 = 1e2;

/// Candidates are screened over this many periods.
pub const SCREEN_PERIODS: usize = 6;

/// Trajectories more than this far below `p₁` at a stroboscopic sample are
/// treated as escaped for good.
pub const RETIRE_MARGIN: f64 = 4.0;

pub const MIN_ENSEMBLE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseState {
    pub x: f64,
    pub p: f64,
    pub t: f64,
}

impl PhaseState {
    pub fn new(x: f64, p: f64, t: f64) -> Self {
        Self { x, p, t }
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.p.is_finite()
    }
}

/// Double-double value `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    const fn new(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    #[inline]
    fn quick(s: f64, e: f64) -> Self {
        let hi = s + e;
        Self {
            hi,
            lo: e - (hi - s),
        }
    }

    #[inline]
    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }

    #[inline]
    fn add(self, o: Self) -> Self {
        let (s, e) = Self::two_sum(self.hi, o.hi);
        Self::quick(s, e + self.lo + o.lo)
    }

    #[inline]
    fn mul_f64(self, k: f64) -> Self {
        let p = self.hi * k;
        let e = self.hi.mul_add(k, -p);
        Self::quick(p, e + self.lo * k)
    }

    #[inline]
    fn mul(self, o: Self) -> Self {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Self::quick(p, e + self.hi * o.lo + self.lo * o.hi)
    }

    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// `∂(x, p)_t / ∂(x, p)_0`, row-major.
///
/// Entries are accumulated in double-double precision. Every substep is an
/// exact shear, so `det M = 1` survives norms far beyond `1/√ε`, where plain
/// f64 accumulation would lose it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monodromy {
    m: [[Dd; 2]; 2],
}

impl Default for Monodromy {
    fn default() -> Self {
        Self::identity()
    }
}

impl Monodromy {
    pub fn identity() -> Self {
        Self::from_matrix([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn from_matrix(m: [[f64; 2]; 2]) -> Self {
        Self {
            m: m.map(|row| row.map(Dd::new)),
        }
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        self.m.map(|row| row.map(Dd::value))
    }

    pub fn det(&self) -> f64 {
        let [[a, b], [c, d]] = self.m;
        a.mul(d).add(b.mul(c).neg()).value()
    }

    /// Largest singular value.
    pub fn norm(&self) -> f64 {
        monodromy_norm(self)
    }

    fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.hi.is_finite())
    }

    /// `δp += k δx`.
    #[inline]
    fn kick(&mut self, k: f64) {
        self.m[1][0] = self.m[1][0].add(self.m[0][0].mul_f64(k));
        self.m[1][1] = self.m[1][1].add(self.m[0][1].mul_f64(k));
    }

    /// `δx += h δp`.
    #[inline]
    fn drift(&mut self, h: f64) {
        self.m[0][0] = self.m[0][0].add(self.m[1][0].mul_f64(h));
        self.m[0][1] = self.m[0][1].add(self.m[1][1].mul_f64(h));
    }
}

impl Serialize for Monodromy {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        self.matrix().serialize(serializer)
    }
}

/// Spectral norm of a 2×2 matrix in closed form:
/// `σ² = (S + √(S² − 4 det²)) / 2` with `S` the squared Frobenius norm.
pub fn monodromy_norm(m: &Monodromy) -> f64 {
    let [[a, b], [c, d]] = m.matrix();
    let s = a * a + b * b + c * c + d * d;
    let det = m.det().abs();
    let disc = ((s - 2.0 * det) * (s + 2.0 * det)).max(0.0);
    (0.5 * (s + disc.sqrt())).sqrt()
}

/// Momentum window `(p₁, p₂)` of the chaotic strip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StripBounds {
    pub p1: f64,
    pub p2: f64,
}

impl StripBounds {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        if !(p1 < p2) || !p1.is_finite() || !p2.is_finite() {
            return Err(invalid("strip", format!("need p1 < p2, got ({p1}, {p2})")));
        }
        Ok(Self { p1, p2 })
    }

    /// `p₁ = −5`, `p₂ = 7`, used for the survival probability.
    pub fn reference() -> Self {
        Self { p1: -5.0, p2: 7.0 }
    }

    pub fn contains(&self, p: f64) -> bool {
        p > self.p1 && p < self.p2
    }
}

/// Fixed-step integrator for one parameter set.
#[derive(Debug, Clone)]
pub struct Integrator {
    params: LatticeParams,
    dt: f64,
    potential: bool,
    force_on: bool,
    /// `F` at step midpoints `t₀ + (m + ½) dt` for one period.
    midpoint_forces: Vec<f64>,
}

impl Integrator {
    /// `dt` must be at most `T_ω/256`. When it divides the period, midpoint
    /// forces are tabulated for steps aligned with `t₀`.
    pub fn new(params: LatticeParams, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || dt > params.t_omega / 256.0 + 1e-15 {
            return Err(invalid(
                "dt",
                format!(
                    "need 0 < dt <= T/256 = {}, got {dt}",
                    params.t_omega / 256.0
                ),
            ));
        }
        let spp = params.t_omega / dt;
        let midpoint_forces = if (spp - spp.round()).abs() < 1e-9 {
            (0..spp.round() as usize)
                .map(|m| params.total_force(params.t0 + (m as f64 + 0.5) * dt))
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            params,
            dt,
            potential: true,
            force_on: true,
            midpoint_forces,
        })
    }

    pub fn with_steps_per_period(params: LatticeParams, steps: usize) -> Result<Self> {
        Self::new(params, params.t_omega / steps as f64)
    }

    pub fn reference(params: LatticeParams) -> Self {
        Self::with_steps_per_period(params, DEFAULT_STEPS_PER_PERIOD).expect("default dt is valid")
    }

    /// Test hook: free particle (no potential, no force).
    pub fn free_particle(mut self) -> Self {
        self.potential = false;
        self.force_on = false;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn params(&self) -> &LatticeParams {
        &self.params
    }

    #[inline]
    fn force_at_midpoint(&self, t: f64, h: f64) -> f64 {
        if !self.force_on {
            return 0.0;
        }
        if h > 0.0 && !self.midpoint_forces.is_empty() {
            let m = (t - self.params.t0) / h;
            let mr = m.round();
            if (m - mr).abs() < 1e-6 {
                let n = self.midpoint_forces.len() as i64;
                let idx = (mr as i64).rem_euclid(n) as usize;
                return self.midpoint_forces[idx];
            }
        }
        self.params.total_force(t + 0.5 * h)
    }

    #[inline]
    fn step(&self, s: &mut PhaseState, mono: Option<&mut Monodromy>, h: f64) {
        let f = self.force_at_midpoint(s.t, h);
        let half = 0.5 * h;
        match mono {
            Some(mono) => {
                let (sx, cx) = if self.potential {
                    s.x.sin_cos()
                } else {
                    (0.0, 0.0)
                };
                s.p += half * (sx - f);
                mono.kick(half * cx);
                s.x += h * s.p;
                mono.drift(h);
                let (sx, cx) = if self.potential {
                    s.x.sin_cos()
                } else {
                    (0.0, 0.0)
                };
                s.p += half * (sx - f);
                mono.kick(half * cx);
            }
            None => {
                let sx = if self.potential { s.x.sin() } else { 0.0 };
                s.p += half * (sx - f);
                s.x += h * s.p;
                let sx = if self.potential { s.x.sin() } else { 0.0 };
                s.p += half * (sx - f);
            }
        }
        s.t += h;
    }

    /// Advances by `duration` (negative runs the integrator backward). The
    /// duration must be a whole number of steps.
    pub fn propagate(
        &self,
        state: &mut PhaseState,
        mut monodromy: Option<&mut Monodromy>,
        duration: f64,
    ) -> Result<()> {
        let steps = duration / self.dt;
        let n = steps.abs().round();
        if (steps.abs() - n).abs() > 1e-6 {
            return Err(invalid(
                "duration",
                format!("{duration} is not a multiple of dt = {}", self.dt),
            ));
        }
        let n = n as usize;
        let h = self.dt.copysign(duration);
        let t_start = state.t;
        let check_every = self.midpoint_forces.len().max(256);
        for k in 0..n {
            self.step(state, monodromy.as_deref_mut(), h);
            // Re-anchor time to avoid drift in the table lookup.
            state.t = t_start + (k + 1) as f64 * h;
            if (k + 1) % check_every == 0 || k + 1 == n {
                let mono_ok = monodromy.as_deref().is_none_or(Monodromy::is_finite);
                if !state.is_finite() || !mono_ok {
                    return Err(Error::NonFinite { time: state.t });
                }
            }
        }
        Ok(())
    }
}

/// Free-function form of [`Integrator::propagate`].
pub fn propagate(
    state: PhaseState,
    monodromy: Monodromy,
    duration: f64,
    params: &LatticeParams,
    dt: f64,
) -> Result<(PhaseState, Monodromy)> {
    let integ = Integrator::new(*params, dt)?;
    let (mut s, mut m) = (state, monodromy);
    integ.propagate(&mut s, Some(&mut m), duration)?;
    Ok((s, m))
}

/// Initial-condition grid for [`monodromy_map`]. Positions cover `[0, 2π)`
/// without the endpoint; momenta include both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseGrid {
    pub nx: usize,
    pub np: usize,
    pub p_min: f64,
    pub p_max: f64,
}

impl PhaseGrid {
    pub fn new(nx: usize, np: usize, p_min: f64, p_max: f64) -> Result<Self> {
        if nx == 0 || np == 0 {
            return Err(invalid("grid", "need at least one point per axis"));
        }
        if np > 1 && !(p_min < p_max) {
            return Err(invalid("grid", "need p_min < p_max"));
        }
        Ok(Self {
            nx,
            np,
            p_min,
            p_max,
        })
    }

    /// `x ∈ [0, 2π)`, `p ∈ [−8, 8]`.
    pub fn reference(nx: usize, np: usize) -> Self {
        Self::new(nx, np, -8.0, 8.0).expect("valid")
    }

    pub fn x(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.nx as f64
    }

    pub fn p(&self, j: usize) -> f64 {
        if self.np == 1 {
            self.p_min
        } else {
            self.p_min + (self.p_max - self.p_min) * j as f64 / (self.np - 1) as f64
        }
    }
}

/// `log₁₀‖M‖` on a phase-space grid, `p` outer, `x` inner.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonodromyMap {
    pub grid: PhaseGrid,
    pub horizon: f64,
    pub log10_norm: Vec<f64>,
    /// `|det M − 1|` per point (sentinel for failed trajectories).
    pub det_error: Vec<f64>,
}

/// Value recorded for trajectories that blew up.
pub const NON_FINITE_SENTINEL: f64 = f64::INFINITY;

impl MonodromyMap {
    pub fn at(&self, ix: usize, jp: usize) -> f64 {
        self.log10_norm[jp * self.grid.nx + ix]
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.log10_norm
            .chunks(self.grid.nx)
            .enumerate()
            .map(|(j, row)| (self.grid.p(j), row))
    }

    pub fn max_det_error(&self) -> f64 {
        self.det_error.iter().copied().fold(0.0, f64::max)
    }

    /// Fraction of each `p` row above `log10_threshold`.
    pub fn row_fractions(&self, log10_threshold: f64) -> Vec<(f64, f64)> {
        self.rows()
            .map(|(p, row)| {
                let hi = row.iter().filter(|v| **v > log10_threshold).count();
                (p, hi as f64 / row.len() as f64)
            })
            .collect()
    }

    /// Lowest row whose fraction of high-norm points exceeds `min_fraction`,
    /// i.e. the lower edge of the chaotic band.
    pub fn band_lower_edge(&self, log10_threshold: f64, min_fraction: f64) -> Option<f64> {
        self.row_fractions(log10_threshold)
            .into_iter()
            .find(|(_, f)| *f > min_fraction)
            .map(|(p, _)| p)
    }

    /// Highest such row.
    pub fn band_upper_edge(&self, log10_threshold: f64, min_fraction: f64) -> Option<f64> {
        self.row_fractions(log10_threshold)
            .into_iter()
            .rev()
            .find(|(_, f)| *f > min_fraction)
            .map(|(p, _)| p)
    }

    pub fn median(&self) -> f64 {
        let mut v = self.log10_norm.clone();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }
}

/// Norm of the monodromy matrix after `horizon` for every grid point, starting
/// at `t₀`.
pub fn monodromy_map(grid: &PhaseGrid, horizon: f64, integ: &Integrator) -> Result<MonodromyMap> {
    let t0 = integ.params().t0;
    let points: Vec<(usize, usize)> = (0..grid.np)
        .flat_map(|j| (0..grid.nx).map(move |i| (i, j)))
        .collect();
    let cells: Vec<(f64, f64)> = points
        .par_iter()
        .map(|&(i, j)| {
            let mut s = PhaseState::new(grid.x(i), grid.p(j), t0);
            let mut m = Monodromy::identity();
            match integ.propagate(&mut s, Some(&mut m), horizon) {
                Ok(()) => (m.norm().log10(), (m.det() - 1.0).abs()),
                Err(_) => (NON_FINITE_SENTINEL, NON_FINITE_SENTINEL),
            }
        })
        .collect();
    let (log10_norm, det_error) = cells.into_iter().unzip();
    Ok(MonodromyMap {
        grid: *grid,
        horizon,
        log10_norm,
        det_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectionPoint {
    pub orbit: usize,
    pub period: usize,
    pub x: f64,
    pub p: f64,
}

/// Stroboscopic samples `(x mod 2π, p)` at `t₀ + k T_ω`, `k = 0..=n_periods`.
/// Initial states are taken as given (their `t` is ignored and reset to `t₀`).
pub fn stroboscopic_section(
    initial: &[PhaseState],
    n_periods: usize,
    integ: &Integrator,
) -> Result<Vec<SectionPoint>> {
    let params = integ.params();
    if params.f0 != 0.0 {
        return Err(invalid("f0", "stroboscopic sections require F0 = 0"));
    }
    let orbits: Vec<Result<Vec<SectionPoint>>> = initial
        .par_iter()
        .enumerate()
        .map(|(orbit, s0)| {
            let mut s = PhaseState::new(s0.x, s0.p, params.t0);
            let mut pts = Vec::with_capacity(n_periods + 1);
            for k in 0..=n_periods {
                if k > 0 {
                    integ.propagate(&mut s, None, params.t_omega)?;
                }
                pts.push(SectionPoint {
                    orbit,
                    period: k,
                    x: s.x.rem_euclid(2.0 * PI),
                    p: s.p,
                });
            }
            Ok(pts)
        })
        .collect();
    let mut out = Vec::new();
    for o in orbits {
        out.extend(o?);
    }
    Ok(out)
}

/// Ensemble survival with its construction metadata.
#[derive(Debug, Clone, Serialize)]
pub struct ClassicalSurvival {
    pub series: SurvivalSeries,
    pub accepted: usize,
    pub rejected: usize,
    pub island_threshold: f64,
}

/// Survival in the momentum window for an ensemble drawn uniformly in
/// `[0, 2π) × (p₁, p₂)`, rejecting candidates whose monodromy norm after six
/// periods stays below [`ISLAND_NORM_THRESHOLD`]. Sampled once per period.
pub fn classical_survival(
    ensemble_size: usize,
    periods: usize,
    strip: &StripBounds,
    integ: &Integrator,
    seed: u64,
) -> Result<ClassicalSurvival> {
    if ensemble_size < MIN_ENSEMBLE {
        return Err(Error::TooFewSamples {
            got: ensemble_size,
            need: MIN_ENSEMBLE,
        });
    }
    let params = *integ.params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted: Vec<Vec<bool>> = Vec::with_capacity(ensemble_size);
    let mut rejected = 0usize;
    let mut draws = 0usize;
    while accepted.len() < ensemble_size {
        let batch: Vec<(f64, f64)> = (0..ensemble_size)
            .map(|_| {
                (
                    rng.gen_range(0.0..2.0 * PI),
                    rng.gen_range(strip.p1..strip.p2),
                )
            })
            .collect();
        draws += batch.len();
        if draws > 100 * ensemble_size {
            return Err(Error::Degenerate(
                "island rejection discards almost every candidate".into(),
            ));
        }
        let results: Vec<Result<Option<Vec<bool>>>> = batch
            .par_iter()
            .map(|&(x, p)| member_history(x, p, periods, strip, integ))
            .collect();
        for r in results {
            if accepted.len() == ensemble_size {
                break;
            }
            match r? {
                Some(h) => accepted.push(h),
                None => rejected += 1,
            }
        }
    }
    let n = accepted.len() as f64;
    let times: Vec<f64> = (0..=periods).map(|k| k as f64 * params.t_omega).collect();
    let values = (0..=periods)
        .map(|k| accepted.iter().filter(|h| h[k]).count() as f64 / n)
        .collect();
    Ok(ClassicalSurvival {
        series: SurvivalSeries::new(SeriesSource::Classical, times, values)?,
        accepted: accepted.len(),
        rejected,
        island_threshold: ISLAND_NORM_THRESHOLD,
    })
}

/// In-window flags at each period, or `None` for a rejected (regular) seed.
fn member_history(
    x: f64,
    p: f64,
    periods: usize,
    strip: &StripBounds,
    integ: &Integrator,
) -> Result<Option<Vec<bool>>> {
    let params = integ.params();
    let mut s = PhaseState::new(x, p, params.t0);
    let mut m = Monodromy::identity();
    let mut inside = Vec::with_capacity(periods + 1);
    inside.push(strip.contains(s.p));
    let screen = SCREEN_PERIODS;
    let mut retired = false;
    for k in 1..=periods.max(screen) {
        if k <= screen {
            integ.propagate(&mut s, Some(&mut m), params.t_omega)?;
            if k == screen && m.norm() < ISLAND_NORM_THRESHOLD {
                return Ok(None);
            }
        } else if !retired {
            integ.propagate(&mut s, None, params.t_omega)?;
        }
        if s.p < strip.p1 - RETIRE_MARGIN {
            retired = true;
        }
        if k <= periods {
            inside.push(!retired && strip.contains(s.p));
        }
    }
    Ok(Some(inside))
}
