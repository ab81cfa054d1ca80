use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use wannier_decay::classical::*;
use wannier_decay::model::LatticeParams;

fn reference_params() -> LatticeParams {
    LatticeParams::with_static_force(0.1, 1.0, 3.0, 0.016, 1, 1).unwrap()
}

#[test]
fn tangent_map_stays_symplectic() {
    let params = reference_params();
    let integ = Integrator::reference(params);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let mut s = PhaseState::new(
            rng.gen_range(0.0..2.0 * PI),
            rng.gen_range(-8.0..8.0),
            params.t0,
        );
        let mut m = Monodromy::identity();
        integ
            .propagate(&mut s, Some(&mut m), 1e4 * integ.dt())
            .unwrap();
        assert!(
            (m.det() - 1.0).abs() < 1e-9,
            "det {} norm {}",
            m.det(),
            m.norm()
        );
    }
}

/// Strang splitting is second order: successive step halvings shrink the
/// endpoint change by four.
#[test]
fn halving_the_step_converges_at_second_order() {
    let params = reference_params();
    let horizon = 6.0 * params.t_omega;
    let integ = |div: usize| {
        Integrator::with_steps_per_period(params, DEFAULT_STEPS_PER_PERIOD * div).unwrap()
    };
    let (i1, i2, i4) = (integ(1), integ(2), integ(4));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let start = PhaseState::new(
            rng.gen_range(0.0..2.0 * PI),
            rng.gen_range(-3.0..5.0),
            params.t0,
        );
        let run = |i: &Integrator| {
            let mut s = start;
            i.propagate(&mut s, None, horizon).unwrap();
            s
        };
        let (a, b, c) = (run(&i1), run(&i2), run(&i4));
        let d1 = (a.x - b.x).hypot(a.p - b.p);
        let d2 = (b.x - c.x).hypot(b.p - c.p);
        let ratio = d1 / d2;
        assert!(
            (3.0..5.0).contains(&ratio),
            "{start:?}: ratio {ratio} ({d1:e}, {d2:e})"
        );
    }
}

#[test]
fn forward_then_backward_returns_home() {
    let params = reference_params();
    let integ = Integrator::reference(params);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let start = PhaseState::new(
            rng.gen_range(0.0..2.0 * PI),
            rng.gen_range(-4.0..6.0),
            params.t0,
        );
        let mut s = start;
        integ.propagate(&mut s, None, 2.0 * params.t_omega).unwrap();
        integ
            .propagate(&mut s, None, -2.0 * params.t_omega)
            .unwrap();
        assert!((s.x - start.x).abs() < 1e-6 && (s.p - start.p).abs() < 1e-6);
        assert!((s.t - start.t).abs() < 1e-12);
    }
}

#[test]
fn ensembles_are_reproducible() {
    let params = reference_params();
    let integ = Integrator::reference(params);
    let strip = StripBounds::reference();
    let a = classical_survival(120, 10, &strip, &integ, 42).unwrap();
    let b = classical_survival(120, 10, &strip, &integ, 42).unwrap();
    assert_eq!(a.series, b.series);
    assert_eq!(a.accepted, 120);
    let bits = |s: &ClassicalSurvival| {
        s.series
            .values
            .iter()
            .map(|v| v.to_bits())
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn undriven_pendulum_map_is_tame_compared_to_the_driven_one() {
    let grid = PhaseGrid::new(20, 20, -2.5, 2.5).unwrap();
    let driven = reference_params();
    let still = LatticeParams::with_static_force(0.1, 1.0, 0.0, 0.0, 1, 1).unwrap();
    let horizon = 6.0 * driven.t_omega;
    let a = monodromy_map(&grid, horizon, &Integrator::reference(driven)).unwrap();
    let b = monodromy_map(&grid, horizon, &Integrator::reference(still)).unwrap();
    assert!(b.median() < a.median(), "{} vs {}", b.median(), a.median());
}
