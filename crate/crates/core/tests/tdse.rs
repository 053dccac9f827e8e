use floquet_delta::tdseoracle::{evolve, survival_decay, Boundary, GridState, RecordOptions};
use floquet_delta::{Complex64, FloquetError, InitialWavefunction, ModelParams};

fn packet(x: f64) -> Complex64 {
    Complex64::from_polar((-(x - 1.0).powi(2)).exp(), 2.0 * x)
}

#[test]
fn reflecting_box_conserves_mass_with_and_without_drive() {
    for params in [
        ModelParams::well(2.0, 0.0).unwrap(),
        ModelParams::well(2.0, 0.5).unwrap(),
        ModelParams::barrier(3.0, 0.2).unwrap(),
    ] {
        let mut state = GridState::new(10.0, 0.05, 2e-3, Boundary::Reflecting).unwrap().with_fn(packet);
        let m0 = state.mass();
        let rec = RecordOptions { stride: 100, contamination: f64::INFINITY, ..Default::default() };
        let traj = evolve(&mut state, &params, 2.0, &rec).unwrap();
        assert!(traj.max_step_drift <= 1e-10, "{params:?}: {:e}", traj.max_step_drift);
        assert!((state.mass() - m0).abs() <= 1e-8 * m0);
    }
}

#[test]
fn bound_state_persists_without_drive() {
    let params = ModelParams::well(2.0, 0.0).unwrap();
    let psi0 = InitialWavefunction::truncated_exponential(1.0, 20.0).unwrap();
    let mut state = GridState::new(40.0, 0.05, 2.5e-3, Boundary::default_absorbing(40.0)).unwrap().with_initial(&psi0).unwrap();
    let traj = evolve(&mut state, &params, 20.0, &RecordOptions { stride: 40, ..Default::default() }).unwrap();
    let a0 = traj.origin[0].norm();
    let drift = traj.origin.iter().map(|v| (v.norm() - a0).abs()).fold(0.0, f64::max);
    assert!(drift <= 1e-3, "{drift:e}");
    let fit = survival_decay(&traj, (2.0, 20.0)).unwrap();
    assert!(fit.rate.abs() <= 1e-4, "rate {:e}", fit.rate);
}

#[test]
fn bound_state_phase_rotates_at_unit_energy() {
    let params = ModelParams::well(2.0, 0.0).unwrap();
    let psi0 = InitialWavefunction::truncated_exponential(1.0, 15.0).unwrap();
    let mut state = GridState::new(20.0, 0.02, 2e-4, Boundary::default_absorbing(20.0)).unwrap().with_initial(&psi0).unwrap();
    let traj = evolve(&mut state, &params, 1.0, &RecordOptions { stride: usize::MAX, ..Default::default() }).unwrap();
    // psi(0, t) = e^{i t}
    let end = *traj.origin.last().unwrap();
    let expected = Complex64::from_polar(1.0, 1.0);
    assert!((end - expected).norm() <= 2e-3, "{end} vs {expected}");
}

#[test]
fn barrier_at_small_r_has_no_exponential_window() {
    let params = ModelParams::barrier(2.0, 0.1).unwrap();
    let psi0 = InitialWavefunction::poly_bump(1.0).unwrap();
    let mut state = GridState::new(40.0, 0.05, 2.5e-3, Boundary::default_absorbing(40.0)).unwrap().with_initial(&psi0).unwrap();
    let traj = evolve(&mut state, &params, 20.0, &RecordOptions { stride: 40, ..Default::default() }).unwrap();
    let fit = survival_decay(&traj, (1.0, 15.0)).unwrap();
    assert!(!fit.exponential, "R^2 {}", fit.r_squared);
    let last = *traj.survival.last().unwrap();
    assert!(last < 0.2 * traj.survival[0], "survival {last} of {}", traj.survival[0]);
}

#[test]
fn absorbing_layer_survives_box_doubling() {
    // fast components scattered by the delta are only partly absorbed by the
    // ramp, so the check is at the percent level, not at round-off
    let params = ModelParams::well(2.0, 0.3).unwrap();
    let psi0 = InitialWavefunction::poly_bump(1.0).unwrap();
    let run = |l: f64| {
        let mut state = GridState::new(l, 0.05, 2.5e-3, Boundary::default_absorbing(l)).unwrap().with_initial(&psi0).unwrap();
        evolve(&mut state, &params, 20.0, &RecordOptions { stride: 400, ..Default::default() }).unwrap()
    };
    let a = run(40.0);
    let b = run(80.0);
    let peak = b.origin.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let gap = a.origin.iter().zip(&b.origin).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    assert!(gap <= 1e-2 * peak, "{gap:e}");
}

#[test]
fn snapshots_keep_the_origin_node() {
    let params = ModelParams::well(2.0, 0.1).unwrap();
    let psi0 = InitialWavefunction::poly_bump(1.0).unwrap();
    let mut state = GridState::new(10.0, 0.05, 2.5e-3, Boundary::default_absorbing(10.0)).unwrap().with_initial(&psi0).unwrap();
    let rec = RecordOptions { stride: 100, snapshot_stride: Some(10), ..Default::default() };
    let traj = evolve(&mut state, &params, 1.0, &rec).unwrap();
    assert_eq!(traj.snapshots.len(), traj.t.len());
    for ((t, nodes), (t2, origin)) in traj.snapshots.iter().zip(traj.t.iter().zip(&traj.origin)) {
        assert_eq!(t, t2);
        let at0 = nodes.iter().find(|(x, _)| *x == 0.0).unwrap();
        assert_eq!(at0.1, *origin);
        assert!(nodes.iter().all(|(x, _)| ((x / 0.5).round() * 0.5 - x).abs() < 1e-9));
    }
}

#[test]
fn grid_validation() {
    assert!(matches!(GridState::new(10.0, 0.05, 0.01, Boundary::Reflecting), Err(FloquetError::Unstable(_))));
    assert!(GridState::new(10.0, 0.03, 1e-4, Boundary::Reflecting).is_err());
    assert!(GridState::new(10.0, 0.05, 1e-3, Boundary::Absorbing { width: 12.0, strength: 5.0 }).is_err());
    assert!(GridState::new(-1.0, 0.05, 1e-3, Boundary::Reflecting).is_err());
}

#[test]
fn wall_contamination_is_detected() {
    let params = ModelParams::well(2.0, 0.0).unwrap();
    let mut state = GridState::new(4.0, 0.05, 2.5e-3, Boundary::Reflecting).unwrap().with_fn(packet);
    let err = evolve(&mut state, &params, 5.0, &RecordOptions::default()).unwrap_err();
    assert!(matches!(err, FloquetError::Unstable(_)), "{err}");
}
