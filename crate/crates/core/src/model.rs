//! System parameters and closed-form driving of the ac-dc Wannier-Stark lattice.
//!
//! The Hamiltonian is `H = p²/2 + cos x + F(t) x` with lattice period `d = 2π`
//! and force `F(t) = F₀ + A_ω (cos ωt + sin 2ωt)`. In the Kramers-Henneberger
//! frame the ac part becomes a periodic displacement `K_ω(t)` of the potential.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Lattice period. The potential is `cos x`, so this is fixed.
pub const LATTICE_PERIOD: f64 = 2.0 * PI;

/// All physical parameters of the driven lattice, in scaled units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeParams {
    pub hbar: f64,
    pub omega: f64,
    /// Scaled driving amplitude `A_ω / ω²`.
    pub epsilon: f64,
    pub a_omega: f64,
    pub f0: f64,
    pub q: u32,
    pub r: u32,
    /// Phase origin where `2 sin ωt₀ = cos 2ωt₀`.
    pub t0: f64,
    pub t_omega: f64,
    pub d: f64,
}

impl LatticeParams {
    /// Parameters tuned to the resonance `q ω = r ω_B`.
    pub fn resonant(hbar: f64, omega: f64, epsilon: f64, q: u32, r: u32) -> Result<Self> {
        let f0 = resonant_static_force(q, r, omega, hbar)?;
        Self::with_static_force(hbar, omega, epsilon, f0, q, r)
    }

    /// Parameters with an explicit static force. `q` and `r` are kept as the
    /// nominal channel numbers; [`LatticeParams::resonance`] reports whether the
    /// force actually satisfies the resonance.
    pub fn with_static_force(
        hbar: f64,
        omega: f64,
        epsilon: f64,
        f0: f64,
        q: u32,
        r: u32,
    ) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(invalid("hbar", format!("must be positive, got {hbar}")));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(invalid("omega", format!("must be positive, got {omega}")));
        }
        if !epsilon.is_finite() {
            return Err(invalid("epsilon", "must be finite"));
        }
        if !f0.is_finite() {
            return Err(invalid("f0", "must be finite"));
        }
        if q == 0 {
            return Err(invalid("q", "must be at least 1"));
        }
        if r == 0 {
            return Err(invalid("r", "must be at least 1"));
        }
        Ok(Self {
            hbar,
            omega,
            epsilon,
            a_omega: epsilon * omega * omega,
            f0,
            q,
            r,
            t0: solve_t0(omega),
            t_omega: 2.0 * PI / omega,
            d: LATTICE_PERIOD,
        })
    }

    /// The parameter set used throughout the decay study: ħ = 0.1, ω = 1, ε = 3,
    /// tuned to `q ω = ω_B`.
    pub fn reference(q: u32) -> Result<Self> {
        Self::resonant(0.1, 1.0, 3.0, q, 1)
    }

    /// Same driving, different static force.
    pub fn with_f0(&self, f0: f64) -> Self {
        Self { f0, ..*self }
    }

    /// Bloch frequency `ω_B = d F₀ / ħ`.
    pub fn bloch_frequency(&self) -> f64 {
        self.d * self.f0 / self.hbar
    }

    pub fn resonance(&self) -> ResonanceSpec {
        ResonanceSpec::classify(self)
    }

    /// Oscillating part of the force, `A_ω (cos ωt + sin 2ωt)`.
    pub fn driving_force(&self, t: f64) -> f64 {
        let wt = self.omega * t;
        self.a_omega * (wt.cos() + (2.0 * wt).sin())
    }

    /// Total force `F₀ + F_ω(t)`.
    pub fn total_force(&self, t: f64) -> f64 {
        self.f0 + self.driving_force(t)
    }

    /// `G_ω(t) = ∫_{t₀}^t F_ω`. Zero time-average by the choice of `t₀`.
    pub fn momentum_shift(&self, t: f64) -> f64 {
        let w = self.omega;
        let (wt, wt0) = (w * t, w * self.t0);
        self.a_omega / w * (wt.sin() - wt0.sin())
            - self.a_omega / (2.0 * w) * ((2.0 * wt).cos() - (2.0 * wt0).cos())
    }

    /// Kramers-Henneberger displacement
    /// `K_ω(t) = −(ε/4)(4 cos ωt + sin 2ωt − 4 cos ωt₀ − sin 2ωt₀)`.
    pub fn displacement(&self, t: f64) -> f64 {
        let (wt, wt0) = (self.omega * t, self.omega * self.t0);
        -0.25
            * self.epsilon
            * (4.0 * wt.cos() + (2.0 * wt).sin() - 4.0 * wt0.cos() - (2.0 * wt0).sin())
    }
}

/// Frequency ratio classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RatioKind {
    /// `q ω = r ω_B`.
    Rational { q: u32, r: u32 },
    /// `ω / ω_B` not matching the declared `(q, r)`.
    Irrational { omega_over_omega_b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonanceSpec {
    pub ratio_kind: RatioKind,
    pub omega_b: f64,
}

impl ResonanceSpec {
    pub fn classify(params: &LatticeParams) -> Self {
        let omega_b = params.bloch_frequency();
        let lhs = f64::from(params.q) * params.omega;
        let rhs = f64::from(params.r) * omega_b;
        let ratio_kind = if gcd(params.q, params.r) == 1 && ((lhs - rhs) / lhs).abs() < 1e-12 {
            RatioKind::Rational {
                q: params.q,
                r: params.r,
            }
        } else {
            RatioKind::Irrational {
                omega_over_omega_b: params.omega / omega_b,
            }
        };
        Self {
            ratio_kind,
            omega_b,
        }
    }
}

pub fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Force value `A_ω (cos ωt + sin 2ωt)` for a bare parameter set.
pub fn driving_force(t: f64, params: &LatticeParams) -> f64 {
    params.driving_force(t)
}

/// Smallest positive root of `2 sin ωt₀ = cos 2ωt₀`.
///
/// With `s = sin ωt₀` the condition is `2s = 1 − 2s²`, so `s = (√3 − 1)/2`.
pub fn solve_t0(omega: f64) -> f64 {
    let s = (3f64.sqrt() - 1.0) / 2.0;
    s.asin() / omega
}

/// Static force placing the system on the resonance `q ω = r ω_B`.
pub fn resonant_static_force(q: u32, r: u32, omega: f64, hbar: f64) -> Result<f64> {
    if q == 0 || r == 0 {
        return Err(invalid(
            "q/r",
            format!("must be at least 1, got q={q} r={r}"),
        ));
    }
    let g = gcd(q, r);
    if g != 1 {
        return Err(Error::NotCoprime { q, r, gcd: g });
    }
    if !(omega > 0.0) {
        return Err(invalid("omega", format!("must be positive, got {omega}")));
    }
    if !(hbar > 0.0) {
        return Err(invalid("hbar", format!("must be positive, got {hbar}")));
    }
    Ok(f64::from(q) * omega * hbar / (f64::from(r) * LATTICE_PERIOD))
}

/// Static force for an arbitrary ratio `ω / ω_B`.
pub fn static_force_for_ratio(omega_over_omega_b: f64, omega: f64, hbar: f64) -> Result<f64> {
    if !(omega_over_omega_b > 0.0 && omega_over_omega_b.is_finite()) {
        return Err(invalid(
            "ratio",
            format!("must be positive and finite, got {omega_over_omega_b}"),
        ));
    }
    Ok(omega * hbar / (omega_over_omega_b * LATTICE_PERIOD))
}

/// `ħ = 4 √(E_R / V₀)` in scaled units.
pub fn hbar_from_lattice_depth(depth_ratio: f64) -> Result<f64> {
    if !(depth_ratio > 0.0 && depth_ratio.is_finite()) {
        return Err(invalid(
            "depth_ratio",
            format!("V0/E_R must be positive, got {depth_ratio}"),
        ));
    }
    Ok(4.0 / depth_ratio.sqrt())
}
