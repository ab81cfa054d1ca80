//! Split-operator wavepacket propagation in the Kramers-Henneberger frame.
//!
//! The Hamiltonian is `(p − F₀ s)²/2 + cos(x − K_ω(t))` where `s = t − t₀` is the
//! time elapsed since the phase origin `t₀`. At `t₀` (and every period after it)
//! `K_ω = G_ω = 0`, so the frame coincides with the lab frame up to the dc gauge
//! shift and `p − F₀ s` is the lab momentum.
//!
//! Amplitudes live on a momentum lattice whose spacing divides ħ, so the
//! conjugate position box spans a whole number of lattice periods and the
//! potential step is exact under the discrete Fourier transform. Because the
//! canonical momentum of the escaping part stays put while the strip drifts
//! upward at rate F₀, the stored window follows the kinetic momentum: whenever
//! `F₀ s` crosses a multiple of `dp` the window is re-indexed by one cell. No
//! interpolation is involved; the cell that leaves the bottom of the window is
//! booked as absorbed.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::classical::StripBounds;
use crate::error::{invalid, Error, Result};
use crate::model::LatticeParams;
use crate::series::{SeriesSource, SurvivalSeries};

/// Fraction of the window (at the bottom) covered by the absorbing ramp.
pub const ABSORBER_FRACTION: f64 = 0.15;

/// Ledger tolerance beyond which propagation aborts.
pub const LEDGER_ABORT: f64 = 1e-6;

/// Cells per ħ on the default grid. Each residue class of the grid index is
/// one quasimomentum fiber; the packet's survival is the average over them.
pub const REFERENCE_CELLS_PER_HBAR: usize = 24;
const REFERENCE_P_MAX: f64 = 12.0;
const REFERENCE_P_FLOOR: f64 = -22.0;

/// Uniform momentum grid `p_j = p_min + j dp`, `dp = (p_max − p_min)/n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentumGrid {
    pub p_min: f64,
    pub p_max: f64,
    pub n: usize,
}

impl MomentumGrid {
    pub fn new(p_min: f64, p_max: f64, n: usize) -> Result<Self> {
        if !n.is_power_of_two() || n < 16 {
            return Err(invalid(
                "grid.n",
                format!("must be a power of two >= 16, got {n}"),
            ));
        }
        if !(p_min < p_max) || !p_min.is_finite() || !p_max.is_finite() {
            return Err(invalid(
                "grid",
                format!("need p_min < p_max, got [{p_min}, {p_max}]"),
            ));
        }
        Ok(Self { p_min, p_max, n })
    }

    /// Grid with `dp = ħ / cells_per_hbar`, ending at `p_max`.
    pub fn commensurate(p_max: f64, n: usize, hbar: f64, cells_per_hbar: usize) -> Result<Self> {
        if cells_per_hbar < 2 {
            return Err(invalid("cells_per_hbar", "need at least 2 cells per hbar"));
        }
        let dp = hbar / cells_per_hbar as f64;
        Self::new(p_max - n as f64 * dp, p_max, n)
    }

    /// Default grid: `dp = ħ/24`, top at `p = 12`, and the smallest power of
    /// two `n` reaching down to `p = −22` (`n = 8192` at `ħ = 0.1`).
    pub fn reference(hbar: f64) -> Self {
        Self::with_cells(hbar, REFERENCE_CELLS_PER_HBAR)
    }

    /// Like [`MomentumGrid::reference`] with a different number of cells per ħ.
    pub fn with_cells(hbar: f64, cells_per_hbar: usize) -> Self {
        let needed = (REFERENCE_P_MAX - REFERENCE_P_FLOOR) * cells_per_hbar as f64 / hbar;
        let n = (needed.ceil() as usize).next_power_of_two().max(16);
        Self::commensurate(REFERENCE_P_MAX, n, hbar, cells_per_hbar)
            .expect("reference grid is valid")
    }

    /// Same spacing, twice the extent, extended downward.
    pub fn doubled_downward(&self) -> Self {
        let extent = self.p_max - self.p_min;
        Self {
            p_min: self.p_min - extent,
            p_max: self.p_max,
            n: self.n * 2,
        }
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / self.n as f64
    }

    pub fn momentum(&self, j: usize) -> f64 {
        self.p_min + j as f64 * self.dp()
    }

    /// `ħ / dp` if it is an integer.
    pub fn cells_per_hbar(&self, hbar: f64) -> Option<usize> {
        let k = hbar / self.dp();
        let kr = k.round();
        ((k - kr).abs() < 1e-9 * k.max(1.0) && kr >= 1.0).then_some(kr as usize)
    }

    /// Top of the absorbing ramp.
    pub fn absorber_top(&self) -> f64 {
        self.p_min + ABSORBER_FRACTION * (self.p_max - self.p_min)
    }

    /// Checks the strip fits inside the grid and clears the absorber by 4.
    pub fn check_strip(&self, strip: &StripBounds) -> Result<()> {
        if strip.p1 - 4.0 < self.absorber_top() {
            return Err(Error::PacketOutsideGrid(format!(
                "absorber top {} must lie at or below p1 - 4 = {}",
                self.absorber_top(),
                strip.p1 - 4.0
            )));
        }
        if strip.p2 >= self.p_max {
            return Err(Error::PacketOutsideGrid(format!(
                "strip top {} not below grid top {}",
                strip.p2, self.p_max
            )));
        }
        Ok(())
    }

    fn absorber_mask(&self) -> Vec<f64> {
        let width = self.absorber_top() - self.p_min;
        (0..self.n)
            .map(|j| {
                let u = (self.momentum(j) - self.p_min) / width;
                if u >= 1.0 {
                    1.0
                } else {
                    (0.5 * PI * (1.0 - u)).cos().powi(2)
                }
            })
            .collect()
    }
}

/// Wavefunction amplitudes `ψ(p_j)` plus the absorbed-probability ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct WavepacketState {
    pub amplitudes: Vec<Complex64>,
    pub grid: MomentumGrid,
    /// Absolute time (the run starts at `t₀`).
    pub t: f64,
    pub absorbed: f64,
    pub params: LatticeParams,
    /// Cells the window has moved along the canonical momentum lattice.
    offset: i64,
}

impl WavepacketState {
    /// Time elapsed since `t₀`.
    pub fn elapsed(&self) -> f64 {
        self.t - self.params.t0
    }

    /// Difference between kinetic and grid momentum, in `(−dp, dp)`.
    pub fn frame_shift(&self) -> f64 {
        self.offset as f64 * self.grid.dp() - self.params.f0 * self.elapsed()
    }

    /// Kinetic momentum `p − F₀ s` of cell `j`.
    pub fn kinetic_momentum(&self, j: usize) -> f64 {
        self.grid.momentum(j) + self.frame_shift()
    }

    pub fn momenta(&self) -> Vec<f64> {
        let shift = self.frame_shift();
        (0..self.grid.n)
            .map(|j| self.grid.momentum(j) + shift)
            .collect()
    }

    /// `Σ |ψ|² dp`.
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dp()
    }

    pub fn ledger_deviation(&self) -> f64 {
        self.norm() + self.absorbed - 1.0
    }

    pub fn densities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Minimum-uncertainty packet `ψ(p) ∝ exp(−(p−p₀)²/(4σ²)) exp(−i p x₀/ħ)`,
/// normalized so `Σ|ψ|²dp = 1`. `sigma_p` is the standard deviation of `|ψ|²`.
pub fn init_gaussian(
    x0: f64,
    p0: f64,
    sigma_p: f64,
    grid: MomentumGrid,
    params: LatticeParams,
) -> Result<WavepacketState> {
    if !(sigma_p > 0.0) {
        return Err(invalid(
            "sigma_p",
            format!("must be positive, got {sigma_p}"),
        ));
    }
    let (lo, hi) = (p0 - 4.0 * sigma_p, p0 + 4.0 * sigma_p);
    if lo <= grid.absorber_top() || hi >= grid.p_max {
        return Err(Error::PacketOutsideGrid(format!(
            "packet support [{lo}, {hi}] must lie in ({}, {})",
            grid.absorber_top(),
            grid.p_max
        )));
    }
    let mut amplitudes: Vec<Complex64> = (0..grid.n)
        .map(|j| {
            let p = grid.momentum(j);
            let envelope = (-(p - p0).powi(2) / (4.0 * sigma_p * sigma_p)).exp();
            Complex64::from_polar(envelope, -p * x0 / params.hbar)
        })
        .collect();
    let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * grid.dp();
    let scale = 1.0 / norm.sqrt();
    amplitudes.iter_mut().for_each(|a| *a *= scale);
    Ok(WavepacketState {
        amplitudes,
        grid,
        t: params.t0,
        absorbed: 0.0,
        params,
        offset: 0,
    })
}

/// The reference initial packet: `x₀ = π`, `p₀ = 0`, `σ_p = 0.28`.
pub fn reference_packet(grid: MomentumGrid, params: LatticeParams) -> Result<WavepacketState> {
    init_gaussian(PI, 0.0, 0.28, grid, params)
}

/// Numerical settings for [`Propagator`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropagatorSettings {
    pub steps_per_period: usize,
    pub absorber: bool,
    /// Test hook: drop the lattice potential.
    pub potential: bool,
}

impl Default for PropagatorSettings {
    fn default() -> Self {
        Self {
            steps_per_period: 1024,
            absorber: true,
            potential: true,
        }
    }
}

/// Strang split-step propagator bound to one grid and parameter set.
pub struct Propagator {
    params: LatticeParams,
    grid: MomentumGrid,
    settings: PropagatorSettings,
    dt: f64,
    fft_forward: Arc<dyn Fft<f64>>,
    fft_inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    cos_x: Vec<f64>,
    sin_x: Vec<f64>,
    mask: Option<Vec<f64>>,
    /// Potential phases for each step of one period, valid while runs stay on
    /// the step lattice `t₀ + m dt`.
    potential_table: Vec<Complex64>,
}

impl std::fmt::Debug for Propagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Propagator")
            .field("grid", &self.grid)
            .field("settings", &self.settings)
            .field("dt", &self.dt)
            .finish_non_exhaustive()
    }
}

impl Propagator {
    pub fn new(
        params: LatticeParams,
        grid: MomentumGrid,
        settings: PropagatorSettings,
    ) -> Result<Self> {
        if settings.steps_per_period < 512 {
            return Err(invalid(
                "steps_per_period",
                format!("need dt <= T/512, got T/{}", settings.steps_per_period),
            ));
        }
        if grid.cells_per_hbar(params.hbar).is_none() {
            return Err(invalid(
                "grid",
                format!("dp = {} must divide hbar = {}", grid.dp(), params.hbar),
            ));
        }
        if grid.dp() > params.hbar / 2.0 {
            return Err(invalid("grid", "dp must not exceed hbar/2"));
        }
        let n = grid.n;
        let mut planner = FftPlanner::new();
        let fft_forward = planner.plan_fft_forward(n);
        let fft_inverse = planner.plan_fft_inverse(n);
        let scratch_len = fft_forward
            .get_inplace_scratch_len()
            .max(fft_inverse.get_inplace_scratch_len());
        // Position box spans 2π ħ/dp, a whole number of lattice periods.
        let dx = 2.0 * PI * params.hbar / (n as f64 * grid.dp());
        let (sin_x, cos_x): (Vec<f64>, Vec<f64>) =
            (0..n).map(|l| (l as f64 * dx).sin_cos()).unzip();
        let mask = settings.absorber.then(|| grid.absorber_mask());
        let dt = params.t_omega / settings.steps_per_period as f64;
        let mut prop = Self {
            params,
            grid,
            settings,
            dt,
            fft_forward,
            fft_inverse,
            scratch: vec![Complex64::default(); scratch_len],
            cos_x,
            sin_x,
            mask,
            potential_table: Vec::new(),
        };
        if settings.potential {
            prop.potential_table = (0..settings.steps_per_period)
                .flat_map(|m| {
                    let t_mid = params.t0 + (m as f64 + 0.5) * dt;
                    prop.potential_phases(t_mid)
                })
                .collect();
        }
        Ok(prop)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn params(&self) -> &LatticeParams {
        &self.params
    }

    pub fn settings(&self) -> &PropagatorSettings {
        &self.settings
    }

    /// `exp(−i cos(x − K(t)) dt/ħ) / n` on the position grid; the `1/n`
    /// completes the inverse transform.
    fn potential_phases(&self, t_mid: f64) -> Vec<Complex64> {
        let (sk, ck) = self.params.displacement(t_mid).sin_cos();
        let scale = 1.0 / self.grid.n as f64;
        let c = self.dt / self.params.hbar;
        self.cos_x
            .iter()
            .zip(&self.sin_x)
            .map(|(cx, sx)| {
                let v = cx * ck + sx * sk;
                Complex64::from_polar(scale, -v * c)
            })
            .collect()
    }

    fn kinetic(&self, state: &mut WavepacketState, fraction: f64) {
        let c = fraction * self.dt / (2.0 * self.params.hbar);
        let shift = state.frame_shift();
        let (p_min, dp) = (self.grid.p_min, self.grid.dp());
        for (j, a) in state.amplitudes.iter_mut().enumerate() {
            let p = p_min + j as f64 * dp + shift;
            let (s, co) = (-(p * p) * c).sin_cos();
            *a *= Complex64::new(co, s);
        }
    }

    fn potential(&mut self, state: &mut WavepacketState, step_index: Option<usize>) {
        if !self.settings.potential {
            return;
        }
        let n = self.grid.n;
        self.fft_inverse
            .process_with_scratch(&mut state.amplitudes, &mut self.scratch);
        match step_index {
            Some(m) => {
                let row = &self.potential_table[m * n..(m + 1) * n];
                for (a, ph) in state.amplitudes.iter_mut().zip(row) {
                    *a *= ph;
                }
            }
            None => {
                let phases = self.potential_phases(state.t + 0.5 * self.dt);
                for (a, ph) in state.amplitudes.iter_mut().zip(&phases) {
                    *a *= ph;
                }
            }
        }
        self.fft_forward
            .process_with_scratch(&mut state.amplitudes, &mut self.scratch);
    }

    fn absorb(&self, state: &mut WavepacketState) {
        if let Some(mask) = &self.mask {
            let dp = self.grid.dp();
            let mut removed = 0.0;
            for (a, m) in state.amplitudes.iter_mut().zip(mask) {
                if *m < 1.0 {
                    let before = a.norm_sqr();
                    *a *= *m;
                    removed += before - a.norm_sqr();
                }
            }
            state.absorbed += removed * dp;
        }
    }

    /// Moves the window so that `|frame_shift| < dp`.
    fn reindex(&self, state: &mut WavepacketState) {
        let dp = self.grid.dp();
        let target = (self.params.f0 * state.elapsed() / dp).floor() as i64;
        while state.offset < target {
            let dropped = state.amplitudes[0].norm_sqr() * dp;
            state.absorbed += dropped;
            state.amplitudes.rotate_left(1);
            *state.amplitudes.last_mut().unwrap() = Complex64::default();
            state.offset += 1;
        }
        while state.offset > target {
            let dropped = state.amplitudes.last().unwrap().norm_sqr() * dp;
            state.absorbed += dropped;
            state.amplitudes.rotate_right(1);
            state.amplitudes[0] = Complex64::default();
            state.offset -= 1;
        }
    }

    fn step_index(&self, state: &WavepacketState) -> Option<usize> {
        let m = state.elapsed() / self.dt;
        let mr = m.round();
        if (m - mr).abs() < 1e-6 && mr >= 0.0 {
            Some(mr as usize % self.settings.steps_per_period)
        } else {
            None
        }
    }

    fn check_ledger(&self, state: &WavepacketState) -> Result<()> {
        let norm = state.norm();
        let deviation = norm + state.absorbed - 1.0;
        if !deviation.is_finite() || deviation.abs() > LEDGER_ABORT {
            return Err(Error::LedgerBroken {
                time: state.t,
                norm,
                absorbed: state.absorbed,
                deviation,
            });
        }
        Ok(())
    }

    /// Advances `state` by `duration`, which must be a whole number of steps.
    pub fn evolve(&mut self, state: &mut WavepacketState, duration: f64) -> Result<()> {
        if state.grid != self.grid || state.params != self.params {
            return Err(invalid(
                "state",
                "state was built for a different grid or parameter set",
            ));
        }
        let steps = duration / self.dt;
        let nsteps = steps.round();
        if duration < 0.0 || (steps - nsteps).abs() > 1e-6 {
            return Err(invalid(
                "duration",
                format!(
                    "{duration} is not a non-negative multiple of dt = {}",
                    self.dt
                ),
            ));
        }
        let nsteps = nsteps as usize;
        if nsteps == 0 {
            return Ok(());
        }
        let t_start = state.t;
        let start_index = self.step_index(state);
        self.kinetic(state, 0.5);
        for m in 0..nsteps {
            let idx = start_index.map(|i| (i + m) % self.settings.steps_per_period);
            self.potential(state, idx);
            state.t = t_start + (m + 1) as f64 * self.dt;
            self.reindex(state);
            let fraction = if m + 1 == nsteps { 0.5 } else { 1.0 };
            self.kinetic(state, fraction);
            self.absorb(state);
            if (m + 1) % self.settings.steps_per_period == 0 {
                self.check_ledger(state)?;
            }
        }
        self.check_ledger(state)
    }

    /// Advances by whole driving periods.
    pub fn evolve_periods(&mut self, state: &mut WavepacketState, periods: usize) -> Result<()> {
        for _ in 0..periods {
            self.evolve(state, self.params.t_omega)?;
        }
        Ok(())
    }
}

/// Convenience wrapper building a throwaway propagator with the given `dt`.
pub fn evolve(state: &WavepacketState, duration: f64, dt: f64) -> Result<WavepacketState> {
    let spp = state.params.t_omega / dt;
    if (spp - spp.round()).abs() > 1e-9 {
        return Err(invalid("dt", "must divide the driving period"));
    }
    let settings = PropagatorSettings {
        steps_per_period: spp.round() as usize,
        ..PropagatorSettings::default()
    };
    let mut prop = Propagator::new(state.params, state.grid, settings)?;
    let mut out = state.clone();
    prop.evolve(&mut out, duration)?;
    Ok(out)
}

/// `∫_{p₁}^{p₂} |ψ|² dp` by the midpoint rule over kinetic momentum.
pub fn survival_probability(state: &WavepacketState, strip: &StripBounds) -> f64 {
    let dp = state.grid.dp();
    let shift = state.frame_shift();
    state
        .amplitudes
        .iter()
        .enumerate()
        .filter(|(j, _)| {
            let p = state.grid.momentum(*j) + shift;
            p > strip.p1 && p < strip.p2
        })
        .map(|(_, a)| a.norm_sqr())
        .sum::<f64>()
        * dp
}

/// Normalized probabilities inside the strip.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplitudeSamples {
    pub momenta: Vec<f64>,
    /// `s_n = |ψ_n|² / Σ|ψ|²`, summing to one.
    pub s: Vec<f64>,
    /// `x_n = s_n / s̄`, unit mean.
    pub x: Vec<f64>,
}

pub const MIN_AMPLITUDE_SAMPLES: usize = 50;

pub fn amplitude_samples(
    state: &WavepacketState,
    strip: &StripBounds,
    decimation: usize,
) -> Result<AmplitudeSamples> {
    if decimation == 0 {
        return Err(invalid("decimation", "must be at least 1"));
    }
    let (momenta, dens): (Vec<f64>, Vec<f64>) = state
        .momenta()
        .into_iter()
        .zip(state.amplitudes.iter().map(|a| a.norm_sqr()))
        .filter(|(p, _)| *p > strip.p1 && *p < strip.p2)
        .step_by(decimation)
        .unzip();
    normalized_samples(momenta, dens)
}

/// Builds the `s`/`x` sets from raw densities.
pub fn normalized_samples(momenta: Vec<f64>, densities: Vec<f64>) -> Result<AmplitudeSamples> {
    if densities.len() < MIN_AMPLITUDE_SAMPLES {
        return Err(Error::TooFewSamples {
            got: densities.len(),
            need: MIN_AMPLITUDE_SAMPLES,
        });
    }
    let total: f64 = densities.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate(
            "zero probability in sample window".into(),
        ));
    }
    let s: Vec<f64> = densities.iter().map(|d| d / total).collect();
    let mean = 1.0 / s.len() as f64;
    let x = s.iter().map(|v| v / mean).collect();
    Ok(AmplitudeSamples { momenta, s, x })
}

/// One `|ψ(p, t)|` snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensitySnapshot {
    /// Elapsed time since `t₀`.
    pub t: f64,
    pub momenta: Vec<f64>,
    pub abs_psi: Vec<f64>,
}

impl DensitySnapshot {
    pub fn capture(state: &WavepacketState) -> Self {
        Self {
            t: state.elapsed(),
            momenta: state.momenta(),
            abs_psi: state.amplitudes.iter().map(|a| a.norm()).collect(),
        }
    }

    /// Same midpoint rule as [`survival_probability`].
    pub fn survival(&self, strip: &StripBounds, dp: f64) -> f64 {
        self.momenta
            .iter()
            .zip(&self.abs_psi)
            .filter(|(p, _)| **p > strip.p1 && **p < strip.p2)
            .map(|(_, a)| a * a)
            .sum::<f64>()
            * dp
    }
}

/// Evolves for `n_periods`, capturing a snapshot at `t = 0` and every
/// `stride` periods after.
pub fn momentum_density_series(
    prop: &mut Propagator,
    state: &mut WavepacketState,
    n_periods: usize,
    stride: usize,
) -> Result<Vec<DensitySnapshot>> {
    if stride == 0 {
        return Err(invalid("stride", "must be at least one period"));
    }
    let mut out = vec![DensitySnapshot::capture(state)];
    for k in 1..=n_periods {
        prop.evolve(state, prop.params.t_omega)?;
        if k % stride == 0 {
            out.push(DensitySnapshot::capture(state));
        }
    }
    Ok(out)
}

/// Result of a full survival run.
#[derive(Debug, Clone)]
pub struct QuantumRun {
    /// `P` once per period, starting at `t = 0`.
    pub series: SurvivalSeries,
    /// Snapshots requested by period index, in request order.
    pub snapshots: Vec<(usize, WavepacketState)>,
    pub final_state: WavepacketState,
}

/// Propagates the reference packet for `periods` and records the survival
/// probability once per period. States at the periods listed in
/// `keep_states` are returned as well.
pub fn run_survival(
    params: LatticeParams,
    grid: MomentumGrid,
    settings: PropagatorSettings,
    strip: &StripBounds,
    periods: usize,
    keep_states: &[usize],
) -> Result<QuantumRun> {
    grid.check_strip(strip)?;
    let mut prop = Propagator::new(params, grid, settings)?;
    let mut state = reference_packet(grid, params)?;
    let mut times = Vec::with_capacity(periods + 1);
    let mut values = Vec::with_capacity(periods + 1);
    let mut pending: VecDeque<usize> = {
        let mut k = keep_states.to_vec();
        k.sort_unstable();
        k.into()
    };
    let mut snapshots = Vec::new();
    for k in 0..=periods {
        if k > 0 {
            prop.evolve(&mut state, params.t_omega)?;
        }
        times.push(k as f64 * params.t_omega);
        values.push(survival_probability(&state, strip));
        while pending.front() == Some(&k) {
            pending.pop_front();
            snapshots.push((k, state.clone()));
        }
    }
    Ok(QuantumRun {
        series: SurvivalSeries::new(SeriesSource::Quantum, times, values)?,
        snapshots,
        final_state: state,
    })
}
