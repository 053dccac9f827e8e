use std::f64::consts::PI;

use proptest::prelude::*;

use floquet_delta::barriermap::{apply_again, to_well_frame};
use floquet_delta::branchcut::{h_n, sqrt_on_sheet, Sheet};
use floquet_delta::modesolver::solve_modes;
use floquet_delta::resonances::{find_resonances, FindOptions};
use floquet_delta::selftest::wronskian_instance;
use floquet_delta::tdseoracle::{evolve, Boundary, GridState, RecordOptions};
use floquet_delta::wronskian::{wronskian, wronskian_with, SolutionMethod, WronskianOptions};
use floquet_delta::{Complex64, InitialWavefunction, ModelParams, SheetConfig};

fn complex(scale: f64) -> impl Strategy<Value = Complex64> {
    (-scale..scale, -scale..scale).prop_map(|(a, b)| Complex64::new(a, b))
}

fn sheet() -> impl Strategy<Value = SheetConfig> {
    (
        prop_oneof![Just(PI), (PI - 0.4..PI + 0.4)],
        any::<bool>(),
        proptest::collection::btree_set(-3i64..3, 0..3),
    )
        .prop_map(|(theta, second, flips)| {
            let mut cfg = SheetConfig::usual().with_cut_angle(theta).unwrap();
            if second {
                cfg = cfg.all_flipped();
            }
            for n in flips {
                cfg = cfg.with_flip(n);
            }
            cfg
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn sqrt_squares_back(w in complex(1e3), cfg in sheet(), n in -5i64..5) {
        prop_assume!(w.norm() > 1e-300);
        let s = sqrt_on_sheet(w, &cfg, n);
        prop_assert!((s * s - w).norm() <= 1e-14 * w.norm());
    }

    #[test]
    fn sheets_are_negatives(w in complex(10.0), theta in PI - 0.4..PI + 0.4, n in -5i64..5) {
        let a = SheetConfig::usual().with_cut_angle(theta).unwrap();
        let b = a.with_override(n, Sheet::Second);
        prop_assert_eq!(sqrt_on_sheet(w, &a, n) + sqrt_on_sheet(w, &b, n), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn h_is_periodic_under_strip_shift(z in complex(2.0), n in -6i64..6, omega in 0.3f64..5.0, cfg in sheet()) {
        let a = h_n(z, n, omega, &cfg);
        let b = h_n(z - Complex64::new(0.0, omega), n + 1, omega, &cfg.shifted(1));
        prop_assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()), "{} vs {}", a, b);
    }

    #[test]
    fn h_dominates_far_modes(z in complex(1.0), r in 0.0f64..1.5, omega in 0.3f64..5.0) {
        let cfg = SheetConfig::usual();
        // |h_n| ~ sqrt(|n| omega) - 1 once |1 + n omega| is large
        let big = ((2.0 * r + 2.0 + z.norm()).powi(2) + 2.0) / omega;
        for n in [big.ceil() as i64, -(big.ceil() as i64) - 1] {
            prop_assert!(h_n(z, n, omega, &cfg).norm() > 2.0 * r);
        }
    }

    #[test]
    fn sheet_id_round_trips(cfg in sheet()) {
        let again = SheetConfig::parse(&cfg.id()).unwrap();
        let w = Complex64::new(-0.3, 0.7);
        for n in -4..4 {
            prop_assert_eq!(sqrt_on_sheet(w, &cfg, n), sqrt_on_sheet(w, &again, n));
        }
    }

    #[test]
    fn barrier_transform_is_an_involution(omega in 0.3f64..5.0, r in 0.0f64..2.0, cfg in sheet()) {
        let params = ModelParams::barrier(omega, r).unwrap();
        let frame = to_well_frame(&params, &cfg);
        let back = apply_again(&frame);
        prop_assert_eq!(back.params, params);
        prop_assert_eq!(&back.sheet, &cfg);
        let well = ModelParams::well(omega, r).unwrap();
        prop_assert_eq!(apply_again(&to_well_frame(&well, &cfg)).params, well);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wronskian_spread_and_methods(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, d in 0.0f64..1.0) {
        let (z, params) = wronskian_instance(a, b, c, d).unwrap();
        let cfg = SheetConfig::usual();
        let cf = wronskian(z, &params, &cfg).unwrap();
        let it = wronskian_with(z, &params, &cfg, &WronskianOptions { method: SolutionMethod::Iteration, ..Default::default() }).unwrap();
        prop_assert!(cf.relative_spread() <= 1e-8, "spread {:e}", cf.relative_spread());
        prop_assert!((cf.w - it.w).norm() <= 1e-10 * cf.w.norm());
    }

    #[test]
    fn truncated_solve_residual(z in complex(0.6), r in 0.01f64..1.0, omega in 0.5f64..4.0, support in 0.5f64..3.0) {
        let params = ModelParams::well(omega, r).unwrap();
        let psi0 = InitialWavefunction::poly_bump(support).unwrap();
        let z = Complex64::new(z.re.abs() + 0.05, z.im);
        let sol = solve_modes(z, &params, &psi0, &SheetConfig::usual(), 48).unwrap();
        prop_assert!(sol.diagnostics.residual_inf <= 1e-10, "{:e}", sol.diagnostics.residual_inf);
        prop_assert!(sol.y.weighted_norm().is_finite());
    }

    #[test]
    fn zeros_and_visibility_are_reproducible(r in 0.05f64..1.2) {
        let params = ModelParams::well(2.0, r).unwrap();
        let a = find_resonances(&params, &SheetConfig::usual(), &FindOptions::default()).unwrap();
        let b = find_resonances(&params, &SheetConfig::usual(), &FindOptions::default()).unwrap();
        prop_assert_eq!(a.resonances, b.resonances);
        prop_assert!(a.consistent);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn crank_nicolson_is_unitary(r in 0.0f64..1.5, omega in 0.5f64..4.0, k in -3.0f64..3.0, barrier in any::<bool>()) {
        let params = if barrier { ModelParams::barrier(omega, r) } else { ModelParams::well(omega, r) }.unwrap();
        let mut state = GridState::new(8.0, 0.05, 2.5e-3, Boundary::Reflecting)
            .unwrap()
            .with_fn(|x| Complex64::from_polar((-(x - 0.5).powi(2)).exp(), k * x));
        let rec = RecordOptions { stride: 50, contamination: f64::INFINITY, ..Default::default() };
        let traj = evolve(&mut state, &params, 0.5, &rec).unwrap();
        prop_assert!(traj.max_step_drift <= 1e-10, "{:e}", traj.max_step_drift);
    }
}
