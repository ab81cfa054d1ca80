use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;

use serde_json::{json, Value};
use wannier_decay::analysis::{compare_distributions, fit_exponential, fit_power_tail_auto};
use wannier_decay::classical::{
    classical_survival, monodromy_map, stroboscopic_section, Integrator, PhaseGrid, PhaseState,
    StripBounds, DEFAULT_STEPS_PER_PERIOD, ISLAND_NORM_THRESHOLD, MIN_ENSEMBLE,
};
use wannier_decay::config::{parse_key_values, ParamFile};
use wannier_decay::csv::CsvTable;
use wannier_decay::model::{static_force_for_ratio, LatticeParams};
use wannier_decay::quantum::{
    amplitude_samples, run_survival, DensitySnapshot, MomentumGrid, PropagatorSettings,
    WavepacketState, REFERENCE_CELLS_PER_HBAR,
};
use wannier_decay::rmt::{survival_closed, EnsembleClass, RmtSpec};
use wannier_decay::scan::{fit_scan, ratio_grid, resonance_scan, ResonanceScan, ScanFits};
use wannier_decay::series::SurvivalSeries;

use crate::args::{Cli, Experiment, ScanArgs};
use crate::error::CliError;
use crate::output::{fit_value, Outputs};

/// Reference parameter set used when no config file is given.
const DEFAULT_CONFIG: &str = "hbar=0.1\nomega=1\nepsilon=3\nq=1\n";

/// Monodromy band threshold (log₁₀‖M‖) and row fraction.
const BAND_THRESHOLD: f64 = 2.0;
const BAND_FRACTION: f64 = 0.5;

/// Power-tail window seed, in driving periods.
const TH_GUESS_PERIODS: f64 = 30.0;

const WIDTH_SCALING_TIMES: [usize; 5] = [75, 106, 150, 212, 300];

/// Everything an experiment needs, validated before any compute.
struct Resolved {
    params: LatticeParams,
    seed: u64,
    strip: StripBounds,
    periods: usize,
    dt_div: usize,
    grid: MomentumGrid,
    map_cells: usize,
}

impl Resolved {
    fn quantum_settings(&self) -> PropagatorSettings {
        let base = PropagatorSettings::default();
        PropagatorSettings {
            steps_per_period: base.steps_per_period * self.dt_div,
            ..base
        }
    }

    fn integrator(&self, params: LatticeParams) -> Result<Integrator, CliError> {
        Ok(Integrator::with_steps_per_period(
            params,
            DEFAULT_STEPS_PER_PERIOD * self.dt_div,
        )?)
    }

    fn block(&self, experiment: &Experiment) -> Vec<String> {
        let p = &self.params;
        let g = &self.grid;
        vec![
            format!("experiment={}", experiment.name()),
            format!("version={}", env!("CARGO_PKG_VERSION")),
            format!("hbar={}", p.hbar),
            format!("omega={}", p.omega),
            format!("epsilon={}", p.epsilon),
            format!("a_omega={}", p.a_omega),
            format!("f0={}", p.f0),
            format!("q={}", p.q),
            format!("r={}", p.r),
            format!("omega_over_omega_b={}", p.omega / p.bloch_frequency()),
            format!("t0={}", p.t0),
            format!("t_omega={}", p.t_omega),
            format!("strip_p1={}", self.strip.p1),
            format!("strip_p2={}", self.strip.p2),
            format!("seed={}", self.seed),
            format!("periods={}", self.periods),
            format!("dt_div={}", self.dt_div),
            format!("grid_p_min={}", g.p_min),
            format!("grid_p_max={}", g.p_max),
            format!("grid_n={}", g.n),
            format!("map_cells={}", self.map_cells),
        ]
    }
}

fn resolve(cli: &Cli) -> Result<Resolved, CliError> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?,
        None => DEFAULT_CONFIG.to_string(),
    };
    let mut map: BTreeMap<String, String> = parse_key_values(&text)?;
    if let Some(q) = cli.q {
        map.insert("q".into(), q.to_string());
    }
    if let Some(seed) = cli.seed {
        map.insert("seed".into(), seed.to_string());
    }
    let file = ParamFile::from_map(&map)?;
    let mut params = file.params;
    if let Some(ratio) = cli.ratio {
        params = params.with_f0(static_force_for_ratio(ratio, params.omega, params.hbar)?);
    }
    let reference = StripBounds::reference();
    let strip = StripBounds::new(
        cli.p1.unwrap_or(reference.p1),
        cli.p2.unwrap_or(reference.p2),
    )?;
    let periods = cli
        .periods
        .unwrap_or_else(|| cli.experiment.default_periods());
    let dt_div = cli.dt_div.unwrap_or(1);
    if dt_div == 0 {
        return Err(CliError::config("dt-div must be at least 1"));
    }
    if cli.workers == Some(0) {
        return Err(CliError::config("workers must be at least 1"));
    }
    let cells = cli.cells.unwrap_or(REFERENCE_CELLS_PER_HBAR);
    let wavepacket = matches!(
        cli.experiment,
        Experiment::QuantumDecay { .. }
            | Experiment::AmpStats { .. }
            | Experiment::ResonanceScan(_)
            | Experiment::WidthScaling(_)
    );
    let grid = match (cli.grid_n, wavepacket) {
        (Some(n), true) => MomentumGrid::commensurate(12.0, n, params.hbar, cells)?,
        _ => MomentumGrid::with_cells(params.hbar, cells),
    };
    if wavepacket {
        grid.check_strip(&strip)?;
    }
    let map_cells = match (cli.grid_n, &cli.experiment) {
        (Some(n), Experiment::MonodromyMap) => n,
        _ => 100,
    };
    if map_cells == 0 {
        return Err(CliError::config("grid-n must be positive"));
    }
    match &cli.experiment {
        Experiment::Strobe { orbits } if *orbits == 0 => {
            return Err(CliError::config("orbits must be positive"))
        }
        Experiment::ClassicalDecay { members } if *members < MIN_ENSEMBLE => {
            return Err(CliError::config(format!(
                "members must be at least {MIN_ENSEMBLE}, got {members}"
            )))
        }
        Experiment::QuantumDecay {
            snapshot_stride: Some(0),
            ..
        } => return Err(CliError::config("snapshot-stride must be positive")),
        Experiment::AmpStats {
            sample_lo,
            sample_hi,
        } => {
            StripBounds::new(*sample_lo, *sample_hi)?;
        }
        Experiment::RmtCurve { th, step } => {
            if !(*th > 0.0 && th.is_finite()) {
                return Err(CliError::config(format!("th must be positive, got {th}")));
            }
            if !(*step > 0.0 && step.is_finite()) {
                return Err(CliError::config(format!(
                    "step must be positive, got {step}"
                )));
            }
        }
        Experiment::ResonanceScan(s) | Experiment::WidthScaling(s) => {
            if s.t_star.contains(&0) {
                return Err(CliError::config("t-star values must be positive"));
            }
            ratio_grid(s.lo, s.hi, s.points)?;
        }
        _ => {}
    }
    if periods == 0 && !matches!(cli.experiment, Experiment::Strobe { .. }) {
        return Err(CliError::config("periods must be positive"));
    }
    Ok(Resolved {
        params,
        seed: file.seed,
        strip,
        periods,
        dt_div,
        grid,
        map_cells,
    })
}

/// Validates, runs one experiment and returns the written file names.
pub fn run(cli: Cli) -> Result<Vec<String>, CliError> {
    let res = resolve(&cli)?;
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("workers: {e}")))?;
    }
    let mut out = Outputs::create(cli.out.clone(), res.block(&cli.experiment))?;
    match &cli.experiment {
        Experiment::Strobe { orbits } => strobe(&res, *orbits, &mut out)?,
        Experiment::MonodromyMap => map(&res, &mut out)?,
        Experiment::ClassicalDecay { members } => classical(&res, *members, &mut out)?,
        Experiment::QuantumDecay {
            t_shift,
            snapshot_stride,
            split_snapshots,
        } => quantum(&res, *t_shift, *snapshot_stride, *split_snapshots, &mut out)?,
        Experiment::AmpStats {
            sample_lo,
            sample_hi,
        } => amp_stats(&res, (*sample_lo, *sample_hi), &mut out)?,
        Experiment::RmtCurve { th, step } => rmt_curve(&res, *th, *step, &mut out)?,
        Experiment::ResonanceScan(s) => {
            let times = scan_times(s, &cli, &[300]);
            scan(&res, s, cli.ratio, &times, false, &mut out)?
        }
        Experiment::WidthScaling(s) => {
            let times = scan_times(s, &cli, &WIDTH_SCALING_TIMES);
            scan(&res, s, cli.ratio, &times, true, &mut out)?
        }
    }
    out.finish()
}

fn series_table(series: &SurvivalSeries, t_omega: f64) -> CsvTable {
    let mut t = CsvTable::new(["t_over_T_omega", "P"]);
    for (time, p) in series.times.iter().zip(&series.values) {
        t.row(vec![time / t_omega, *p]);
    }
    t
}

fn strobe(res: &Resolved, orbits: usize, out: &mut Outputs) -> Result<(), CliError> {
    let params = res.params.with_f0(0.0);
    let integ = res.integrator(params)?;
    let (p1, p2) = (res.strip.p1, res.strip.p2);
    let seeds: Vec<PhaseState> = (0..orbits)
        .map(|i| {
            PhaseState::new(
                PI,
                p1 + (i as f64 + 0.5) * (p2 - p1) / orbits as f64,
                params.t0,
            )
        })
        .collect();
    let points = stroboscopic_section(&seeds, res.periods, &integ)?;
    let mut t = CsvTable::new(["orbit", "period", "x", "p"]);
    for pt in points {
        t.row(vec![pt.orbit as f64, pt.period as f64, pt.x, pt.p]);
    }
    out.csv("strobe.csv", &t, &["f0_forced=0".into()])?;
    Ok(())
}

fn map(res: &Resolved, out: &mut Outputs) -> Result<(), CliError> {
    let integ = res.integrator(res.params)?;
    let grid = PhaseGrid::reference(res.map_cells, res.map_cells);
    let m = monodromy_map(&grid, res.periods as f64 * res.params.t_omega, &integ)?;
    let mut t = CsvTable::new(["x", "p", "log10_norm"]);
    for j in 0..grid.np {
        for i in 0..grid.nx {
            t.row(vec![grid.x(i), grid.p(j), m.at(i, j)]);
        }
    }
    out.csv("monodromy_map.csv", &t, &[])?;
    let record = json!({
        "horizon_periods": res.periods,
        "max_det_error": m.max_det_error(),
        "median_log10_norm": m.median(),
        "band_threshold_log10": BAND_THRESHOLD,
        "band_row_fraction": BAND_FRACTION,
        "band_lower_edge": m.band_lower_edge(BAND_THRESHOLD, BAND_FRACTION),
        "band_upper_edge": m.band_upper_edge(BAND_THRESHOLD, BAND_FRACTION),
    });
    out.json("monodromy_map.json", &["monodromy_map.csv"], record)
}

/// Last decade of a run, in time units.
fn last_decade(res: &Resolved) -> (f64, f64) {
    let end = res.periods as f64 * res.params.t_omega;
    (end / 10.0, end)
}

fn classical(res: &Resolved, members: usize, out: &mut Outputs) -> Result<(), CliError> {
    let integ = res.integrator(res.params)?;
    let run = classical_survival(members, res.periods, &res.strip, &integ, res.seed)?;
    let extra = [
        format!("members={members}"),
        format!("accepted={}", run.accepted),
        format!("rejected={}", run.rejected),
        format!("island_threshold={ISLAND_NORM_THRESHOLD}"),
    ];
    out.csv(
        "classical_survival.csv",
        &series_table(&run.series, res.params.t_omega),
        &extra,
    )?;
    let record = json!({
        "accepted": run.accepted,
        "rejected": run.rejected,
        "island_threshold": run.island_threshold,
        "exponential": fit_value(fit_exponential(&run.series, last_decade(res))),
        "t_omega": res.params.t_omega,
    });
    out.json("classical_fit.json", &["classical_survival.csv"], record)
}

fn quantum(
    res: &Resolved,
    t_shift: f64,
    stride: Option<usize>,
    split: bool,
    out: &mut Outputs,
) -> Result<(), CliError> {
    let keep: Vec<usize> = stride
        .map(|s| (s..=res.periods).step_by(s).collect())
        .unwrap_or_default();
    let run = run_survival(
        res.params,
        res.grid,
        res.quantum_settings(),
        &res.strip,
        res.periods,
        &keep,
    )?;
    let tw = res.params.t_omega;
    out.csv("quantum_survival.csv", &series_table(&run.series, tw), &[])?;
    if !keep.is_empty() {
        write_snapshots(&run.snapshots, split, tw, out)?;
    }
    let state = &run.final_state;
    let record = json!({
        "t_shift_periods": t_shift,
        "power_tail": fit_value(fit_power_tail_auto(&run.series, t_shift * tw, TH_GUESS_PERIODS * tw)),
        "exponential": fit_value(fit_exponential(&run.series, last_decade(res))),
        "final_norm": state.norm(),
        "absorbed": state.absorbed,
        "ledger_deviation": state.ledger_deviation(),
        "t_omega": tw,
    });
    out.json("quantum_fit.json", &["quantum_survival.csv"], record)
}

fn write_snapshots(
    snaps: &[(usize, WavepacketState)],
    split: bool,
    tw: f64,
    out: &mut Outputs,
) -> Result<(), CliError> {
    let header = ["t_over_T_omega", "p", "abs_psi"];
    let mut long = CsvTable::new(header);
    for (period, state) in snaps {
        let snap = DensitySnapshot::capture(state);
        let mut table = CsvTable::new(header);
        let target = if split { &mut table } else { &mut long };
        for (p, a) in snap.momenta.iter().zip(&snap.abs_psi) {
            target.row(vec![snap.t / tw, *p, *a]);
        }
        if split {
            out.csv(&format!("quantum_density_{period:05}.csv"), &table, &[])?;
        }
    }
    if !split {
        out.csv("quantum_density.csv", &long, &[])?;
    }
    Ok(())
}

fn amp_stats(res: &Resolved, window: (f64, f64), out: &mut Outputs) -> Result<(), CliError> {
    let sample_strip = StripBounds::new(window.0, window.1)?;
    let run = run_survival(
        res.params,
        res.grid,
        res.quantum_settings(),
        &res.strip,
        res.periods,
        &[res.periods],
    )?;
    let (_, state) = &run.snapshots[0];
    let samples = amplitude_samples(state, &sample_strip, 1)?;
    let cmp = compare_distributions(&samples.x)?;
    let extra = [
        format!("sample_p_lo={}", window.0),
        format!("sample_p_hi={}", window.1),
    ];
    let mut t = CsvTable::new(["p", "s", "x"]);
    for ((p, s), x) in samples.momenta.iter().zip(&samples.s).zip(&samples.x) {
        t.row(vec![*p, *s, *x]);
    }
    out.csv("amp_samples.csv", &t, &extra)?;
    let h = &cmp.histogram;
    let mut t = CsvTable::new(["log10_x", "density", "goe", "gue", "gse"]);
    for ((c, d), r) in h.centers.iter().zip(&h.density).zip(&h.reference) {
        t.row(vec![*c, *d, r[0], r[1], r[2]]);
    }
    out.csv("amp_histogram.csv", &t, &extra)?;
    let distances: serde_json::Map<String, Value> = EnsembleClass::ALL
        .iter()
        .map(|c| (c.name().to_string(), json!(cmp.distance(*c))))
        .collect();
    let record = json!({
        "sample_window": [window.0, window.1],
        "samples": cmp.samples,
        "ks_distance": distances,
        "best": cmp.best.name(),
        "histogram_outside": h.outside,
    });
    out.json(
        "amp_stats.json",
        &["amp_samples.csv", "amp_histogram.csv"],
        record,
    )
}

fn rmt_curve(res: &Resolved, th: f64, step: f64, out: &mut Outputs) -> Result<(), CliError> {
    let tw = res.params.t_omega;
    let spec = RmtSpec::new(res.params.q, th * tw)?;
    let mut t = CsvTable::new(["t_over_T_omega", "P"]);
    let n = (res.periods as f64 / step).floor() as usize;
    for i in 0..=n {
        let tt = i as f64 * step;
        t.row(vec![tt, survival_closed(tt * tw, &spec)?]);
    }
    out.csv(
        "rmt_curve.csv",
        &t,
        &[format!("rmt_q={}", spec.q), format!("th_over_T_omega={th}")],
    )?;
    Ok(())
}

fn scan_times(s: &ScanArgs, cli: &Cli, default: &[usize]) -> Vec<usize> {
    if !s.t_star.is_empty() {
        s.t_star.clone()
    } else if let Some(p) = cli.periods {
        vec![p]
    } else {
        default.to_vec()
    }
}

fn scan(
    res: &Resolved,
    s: &ScanArgs,
    single: Option<f64>,
    times: &[usize],
    scaling: bool,
    out: &mut Outputs,
) -> Result<(), CliError> {
    let ratios = match single {
        Some(r) => vec![r],
        None => ratio_grid(s.lo, s.hi, s.points)?,
    };
    let result: ResonanceScan = resonance_scan(
        &res.params,
        &ratios,
        times,
        res.grid,
        res.quantum_settings(),
        &res.strip,
    )?;
    let mut header = vec!["ratio".to_string(), "f0".to_string()];
    header.extend(result.periods.iter().map(|n| format!("P_{n}T")));
    let mut t = CsvTable::new(header);
    let mut failures = Vec::new();
    for p in &result.points {
        let mut row = vec![p.ratio, p.f0];
        row.extend(&p.survival);
        t.row(row);
        if let Some(e) = &p.error {
            failures.push(format!("failed ratio={} reason={e}", p.ratio));
        }
    }
    out.csv("resonance_scan.csv", &t, &failures)?;
    let fits: ScanFits = fit_scan(&result);
    let peaks: Vec<Value> = fits
        .peaks
        .iter()
        .map(|(n, f)| {
            let peak = f.as_ref().map(|f| f.peak_value()).ok();
            json!({ "t_star_periods": n, "fit": fit_value(f.clone()), "peak_value": peak })
        })
        .collect();
    let failed: Vec<Value> = result
        .points
        .iter()
        .filter_map(|p| {
            p.error
                .as_ref()
                .map(|e| json!({ "ratio": p.ratio, "error": e }))
        })
        .collect();
    let record = json!({
        "axis": "omega/omega_B, centre fixed at 1",
        "peaks": peaks,
        "failed_points": failed,
    });
    out.json("peak_fits.json", &["resonance_scan.csv"], record)?;
    if scaling {
        let mut t = CsvTable::new(["t_over_T_omega", "delta"]);
        for (n, f) in &fits.peaks {
            if let Ok(f) = f {
                t.row(vec![*n as f64, f.delta_omega]);
            }
        }
        out.csv("width_scaling.csv", &t, &[])?;
        out.json(
            "width_scaling.json",
            &["width_scaling.csv", "resonance_scan.csv"],
            json!({ "scaling": fit_value(fits.scaling.clone()), "fourier_gamma": 1.0 }),
        )?;
    }
    Ok(())
}
