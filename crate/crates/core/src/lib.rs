//! Classical and quantum decay in an ac-dc driven Wannier-Stark lattice.
//!
//! * [`model`]: parameters, driving force, Kramers-Henneberger displacement.
//! * [`classical`]: symplectic trajectories, monodromy maps, ensemble survival.
//! * [`quantum`]: split-operator wavepacket propagation with an absorber.
//! * [`rmt`]: random-matrix amplitude, width and decay laws.
//! * [`analysis`]: power-law, exponential and peak fits, KS comparisons.
//! * [`scan`]: resonance scans over `ω / ω_B`.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod classical;
pub mod config;
pub mod csv;
pub mod error;
pub mod model;
pub mod quad;
pub mod quantum;
pub mod rmt;
pub mod scan;
pub mod series;

pub use classical::{Monodromy, PhaseState, StripBounds};
pub use error::{Error, Result};
pub use model::{LatticeParams, ResonanceSpec};
pub use quantum::{MomentumGrid, WavepacketState};
pub use series::{SeriesSource, SurvivalSeries};
