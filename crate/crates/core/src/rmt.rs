//! Random-matrix reference laws.
//!
//! * `χ²_ν` amplitude statistics for GOE/GUE/GSE (`ν = 1, 2, 4`).
//! * Width distribution of the `q`-channel circular unitary ensemble.
//! * Decay law `P⁽ᑫ⁾(τ)` for perfect coupling, by quadrature and by
//!   hypergeometric closed form, and its algebraic asymptote `τ^{−q}/(q+1)`.

use serde::Serialize;
use statrs::function::gamma::{gamma, gamma_lr};

use crate::error::{invalid, Error, Result};
use crate::quad::integrate;

/// Absolute tolerance used for every special-function evaluation here.
pub const SPECIAL_TOL: f64 = 1e-10;

/// Gaussian ensemble class, labelled by the χ² degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EnsembleClass {
    Goe,
    Gue,
    Gse,
}

impl EnsembleClass {
    pub const ALL: [EnsembleClass; 3] = [Self::Goe, Self::Gue, Self::Gse];

    pub fn from_nu(nu: u32) -> Result<Self> {
        match nu {
            1 => Ok(Self::Goe),
            2 => Ok(Self::Gue),
            4 => Ok(Self::Gse),
            _ => Err(invalid("nu", format!("must be 1, 2 or 4, got {nu}"))),
        }
    }

    pub fn nu(self) -> u32 {
        match self {
            Self::Goe => 1,
            Self::Gue => 2,
            Self::Gse => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Goe => "GOE",
            Self::Gue => "GUE",
            Self::Gse => "GSE",
        }
    }
}

/// `W_ν(s) = (ν/2)^{ν/2} s^{ν/2−1} e^{−νs/2} / Γ(ν/2)`; unit mean and norm.
pub fn chi2_density(s: f64, class: EnsembleClass) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(invalid("s", format!("must be non-negative, got {s}")));
    }
    let nu = f64::from(class.nu());
    let half = 0.5 * nu;
    if s == 0.0 {
        return match class {
            EnsembleClass::Goe => Err(Error::Degenerate("GOE density diverges at s = 0".into())),
            EnsembleClass::Gue => Ok(1.0),
            EnsembleClass::Gse => Ok(0.0),
        };
    }
    Ok(half.powf(half) * s.powf(half - 1.0) * (-half * s).exp() / gamma(half))
}

/// Cumulative distribution of [`chi2_density`].
pub fn chi2_cdf(s: f64, class: EnsembleClass) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let half = 0.5 * f64::from(class.nu());
    gamma_lr(half, half * s)
}

/// Regularized lower incomplete gamma `P(n, a)` for integer `n ≥ 1`,
/// computed without cancellation for the ranges used by [`width_density`].
fn lower_gamma_regularized_int(n: u32, a: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let nf = f64::from(n);
    if a < nf + 1.0 {
        // e^{−a} Σ_{j≥n} a^j / j!, all terms positive.
        let ln_first = -a + nf * a.ln() - ln_factorial(n);
        let mut term = ln_first.exp();
        let mut sum = term;
        let mut j = nf;
        loop {
            j += 1.0;
            term *= a / j;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum
    } else {
        // 1 − e^{−a} Σ_{j<n} a^j / j!; the head is small here.
        let mut term = (-a).exp();
        let mut head = term;
        for j in 1..n {
            term *= a / f64::from(j);
            head += term;
        }
        1.0 - head
    }
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| f64::from(k).ln()).sum()
}

/// Width distribution of the `q`-channel CUE at scaled width `Γ_s = πΓ/Δ`.
///
/// Uses `Π(Γ) = (2^q Γ^{q−1}/(q−1)!) ∫₀¹ u^q e^{−2Γu} du`, which equals
/// `q P(q+1, 2Γ) / (2Γ²)` with `P` the regularized lower incomplete gamma.
pub fn width_density(gamma_s: f64, q: u32) -> Result<f64> {
    if q == 0 {
        return Err(invalid("q", "must be at least 1"));
    }
    if !(gamma_s >= 0.0) {
        return Err(invalid(
            "gamma_s",
            format!("must be non-negative, got {gamma_s}"),
        ));
    }
    if gamma_s == 0.0 {
        return Ok(if q == 1 { 1.0 } else { 0.0 });
    }
    let p = lower_gamma_regularized_int(q + 1, 2.0 * gamma_s);
    Ok(f64::from(q) * p / (2.0 * gamma_s * gamma_s))
}

/// Channel count and Heisenberg time of the decay law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RmtSpec {
    pub q: u32,
    pub t_heisenberg: f64,
    pub delta: Option<f64>,
}

impl RmtSpec {
    pub fn new(q: u32, t_heisenberg: f64) -> Result<Self> {
        if q == 0 {
            return Err(invalid("q", "must be at least 1"));
        }
        if !(t_heisenberg > 0.0 && t_heisenberg.is_finite()) {
            return Err(invalid(
                "t_heisenberg",
                format!("must be positive, got {t_heisenberg}"),
            ));
        }
        Ok(Self {
            q,
            t_heisenberg,
            delta: None,
        })
    }

    /// From the mean level spacing: `T_H = 2πħ/Δ`.
    pub fn from_spacing(q: u32, delta: f64, hbar: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(invalid("delta", "must be positive"));
        }
        let mut spec = Self::new(q, 2.0 * std::f64::consts::PI * hbar / delta)?;
        spec.delta = Some(delta);
        Ok(spec)
    }

    pub fn tau(&self, t: f64) -> f64 {
        t / self.t_heisenberg
    }
}

/// `P⁽ᑫ⁾` by direct quadrature of the one-dimensional form
/// `∫ (τ+u)/(2τ) ((1+u)/(1+2τ+u))^q du` over `u ∈ [max(−1, 1−2τ), 1]`.
pub fn survival_quadrature(t: f64, spec: &RmtSpec) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(invalid("t", format!("must be non-negative, got {t}")));
    }
    let tau = spec.tau(t);
    if tau == 0.0 {
        return Ok(1.0);
    }
    Ok(survival_quadrature_tau(tau, spec.q))
}

pub fn survival_quadrature_tau(tau: f64, q: u32) -> f64 {
    let qi = q as i32;
    let lo = (1.0 - 2.0 * tau).max(-1.0);
    let f = |u: f64| (tau + u) / (2.0 * tau) * ((1.0 + u) / (1.0 + 2.0 * tau + u)).powi(qi);
    integrate(f, lo, 1.0, 1e-13).0
}

/// Branch selector for [`survival_closed`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Below,
    Above,
}

/// `P⁽ᑫ⁾ = (1+τ)^{−q} f(τ)` with the hypergeometric `f_<` (τ < 1) or `f_>`
/// (τ ≥ 1) kernel.
pub fn survival_closed(t: f64, spec: &RmtSpec) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(invalid("t", format!("must be non-negative, got {t}")));
    }
    let tau = spec.tau(t);
    let branch = if tau < 1.0 {
        Branch::Below
    } else {
        Branch::Above
    };
    survival_closed_branch(tau, spec.q, branch)
}

/// Evaluates one branch explicitly. Each branch is valid on its own side of
/// `τ = 1` and both are finite at `τ = 1`.
pub fn survival_closed_branch(tau: f64, q: u32, branch: Branch) -> Result<f64> {
    let qi = i64::from(q);
    let qf = f64::from(q);
    let f = match branch {
        Branch::Below => {
            let z = tau / (1.0 + tau);
            let mut sum = 0.0;
            let mut binom = 1.0;
            let mut pow = 1.0;
            for k in 0..=qi {
                let kf = k as f64;
                let first = (1.0 + tau) / (kf + 1.0) * hyp2f1(qi, k + 1, k + 2, z)?;
                let second = 2.0 * tau / (kf + 2.0) * hyp2f1(qi, k + 2, k + 3, z)?;
                sum += binom * pow * (first - second);
                binom *= (qf - kf) / (kf + 1.0);
                pow *= -tau;
            }
            sum
        }
        Branch::Above => {
            if tau <= 0.0 {
                return Err(invalid("tau", "the upper branch needs tau > 0"));
            }
            let z = 1.0 / (1.0 + tau);
            (1.0 + 1.0 / tau) / (qf + 1.0) * hyp2f1(qi, 1, qi + 2, z)?
                - (2.0 / tau) / ((qf + 1.0) * (qf + 2.0)) * hyp2f1(qi, 2, qi + 3, z)?
        }
    };
    Ok(f / (1.0 + tau).powi(q as i32))
}

/// Asymptote `τ^{−q}/(q+1)`.
pub fn survival_asymptote(t: f64, spec: &RmtSpec) -> Result<f64> {
    let tau = spec.tau(t);
    if !(tau > 0.0) {
        return Err(invalid("t", "asymptote needs t > 0"));
    }
    Ok(tau.powi(-(spec.q as i32)) / f64::from(spec.q + 1))
}

pub const HYP2F1_MAX_TERMS: usize = 10_000;

/// Gauss hypergeometric `₂F₁(a, b; c; z)` for integer parameters and
/// `0 ≤ z < 1`, by direct power series.
pub fn hyp2f1(a: i64, b: i64, c: i64, z: f64) -> Result<f64> {
    if c <= 0 {
        return Err(invalid("c", format!("must be a positive integer, got {c}")));
    }
    if !(0.0..1.0).contains(&z) {
        return Err(invalid("z", format!("series needs 0 <= z < 1, got {z}")));
    }
    let (a, b, c) = (a as f64, b as f64, c as f64);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..HYP2F1_MAX_TERMS {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum += term;
        if term == 0.0 || term.abs() < 1e-15 * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::NoConvergence {
        terms: HYP2F1_MAX_TERMS,
    })
}
