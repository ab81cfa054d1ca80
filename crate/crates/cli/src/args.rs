use std::path::PathBuf;

use clap::{Parser, Subcommand};

/// Classical and quantum decay experiments for the ac-dc driven Wannier-Stark
/// lattice. Every run writes CSV data, JSON fits and a manifest into `--out`.
#[derive(Debug, Parser)]
#[command(name = "wsdecay", version)]
pub struct Cli {
    /// key=value parameter file (hbar, omega, epsilon, q, r, f0, seed).
    /// Without it the reference set hbar=0.1, omega=1, epsilon=3, q=1 is used.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Worker threads for ensembles, maps and scans.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Ensemble seed (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Resonance order q in q ω = r ω_B (overrides the config file).
    #[arg(long, global = true)]
    pub q: Option<u32>,

    /// Sets F₀ from ω/ω_B at fixed ω, replacing the resonance condition.
    /// For scans it selects a single scan point.
    #[arg(long, global = true)]
    pub ratio: Option<f64>,

    /// Run length (or map horizon) in driving periods.
    #[arg(long, global = true)]
    pub periods: Option<usize>,

    /// Momentum grid size for wavepacket runs; cells per axis for the
    /// monodromy map.
    #[arg(long = "grid-n", global = true)]
    pub grid_n: Option<usize>,

    /// Momentum cells per ħ for wavepacket runs.
    #[arg(long, global = true)]
    pub cells: Option<usize>,

    /// Divides the default time step.
    #[arg(long = "dt-div", global = true)]
    pub dt_div: Option<usize>,

    /// Lower edge p₁ of the survival window.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub p1: Option<f64>,

    /// Upper edge p₂ of the survival window.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub p2: Option<f64>,

    #[command(subcommand)]
    pub experiment: Experiment,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Experiment {
    /// Stroboscopic section at F₀ = 0.
    Strobe {
        /// Orbits seeded at x = π, evenly across the survival window.
        #[arg(long, default_value_t = 24)]
        orbits: usize,
    },
    /// log₁₀ of the monodromy norm over x ∈ [0, 2π), p ∈ [−8, 8].
    MonodromyMap,
    /// Classical ensemble survival in the momentum window.
    ClassicalDecay {
        #[arg(long, default_value_t = 2000)]
        members: usize,
    },
    /// Wavepacket survival in the momentum window.
    QuantumDecay {
        /// Offset of the power-law fit, in driving periods.
        #[arg(long, default_value_t = 8.0)]
        t_shift: f64,
        /// Write |ψ(p)| every this many periods.
        #[arg(long)]
        snapshot_stride: Option<usize>,
        /// One snapshot file per stride instead of one long-format file.
        #[arg(long)]
        split_snapshots: bool,
    },
    /// Amplitude statistics against χ²_ν in a momentum sub-window.
    AmpStats {
        #[arg(long, default_value_t = -4.0, allow_hyphen_values = true)]
        sample_lo: f64,
        #[arg(long, default_value_t = 6.0, allow_hyphen_values = true)]
        sample_hi: f64,
    },
    /// Random-matrix survival curve.
    RmtCurve {
        /// Heisenberg time in driving periods.
        #[arg(long)]
        th: f64,
        /// Time step of the table in driving periods.
        #[arg(long, default_value_t = 1.0)]
        step: f64,
    },
    /// Survival at fixed times across ω/ω_B, with peak fits.
    ResonanceScan(ScanArgs),
    /// Resonance scan at several times and the width scaling Δω ∼ t^{−γ}.
    WidthScaling(ScanArgs),
}

#[derive(Debug, Clone, clap::Args)]
pub struct ScanArgs {
    /// Evaluation times in driving periods, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub t_star: Vec<usize>,
    #[arg(long, default_value_t = 41)]
    pub points: usize,
    #[arg(long, default_value_t = 0.998)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.002)]
    pub hi: f64,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Strobe { .. } => "strobe",
            Self::MonodromyMap => "monodromy-map",
            Self::ClassicalDecay { .. } => "classical-decay",
            Self::QuantumDecay { .. } => "quantum-decay",
            Self::AmpStats { .. } => "amp-stats",
            Self::RmtCurve { .. } => "rmt-curve",
            Self::ResonanceScan(_) => "resonance-scan",
            Self::WidthScaling(_) => "width-scaling",
        }
    }

    pub fn default_periods(&self) -> usize {
        match self {
            Self::Strobe { .. } => 300,
            Self::MonodromyMap => 6,
            Self::AmpStats { .. } => 100,
            Self::ResonanceScan(_) | Self::WidthScaling(_) => 300,
            _ => 200,
        }
    }
}
