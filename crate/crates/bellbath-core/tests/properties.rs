use bellbath_core::device::{
    build_hamiltonian, drive_frequencies, Branch, DeviceParams, DispersiveParams, DriveParams,
    Frame, SystemOps, Target,
};
use bellbath_core::experiments::{map_point, MapOptions};
use bellbath_core::lindblad::{default_channels, lindblad_rhs, CollapseChannel};
use bellbath_core::observables::{
    bell_fidelities, fidelity, partial_trace, tomography_roundtrip, Bell, TwoQubitState,
};
use bellbath_core::rates::{
    evolve_rates, propagate_exact, steady_state_rates, Populations, RateModel,
};
use bellbath_core::space::{
    destroy_matrix, embed_matrix, hermiticity_error, max_abs, HilbertSpace, State,
};
use bellbath_core::{CMat, C64};
use proptest::prelude::*;
use std::f64::consts::PI;

fn cmat(n: usize, v: &[f64]) -> CMat {
    CMat::from_fn(n, n, |i, j| {
        C64::new(v[2 * (i * n + j)], v[2 * (i * n + j) + 1])
    })
}

fn density(n: usize, v: &[f64]) -> CMat {
    let a = cmat(n, v);
    let r = &a * a.adjoint();
    let t = r.trace();
    r / t
}

fn entries(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 2 * n * n)
        .prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn embed_respects_products(a in entries(3), b in entries(3), slot in 0usize..3) {
        let sp = HilbertSpace::new(vec![2, 3, 3], vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let d = sp.dims()[slot];
        let (a, b) = (cmat(d, &a), cmat(d, &b));
        let lhs = embed_matrix(&(&a * &b), slot, &sp).unwrap();
        let rhs = embed_matrix(&a, slot, &sp).unwrap() * embed_matrix(&b, slot, &sp).unwrap();
        prop_assert!(max_abs(&(lhs - rhs)) < 1e-12);
    }

    #[test]
    fn disjoint_embeddings_commute(a in entries(2), b in entries(3)) {
        let sp = HilbertSpace::new(vec![2, 3], vec!["a".into(), "b".into()]).unwrap();
        let x = embed_matrix(&cmat(2, &a), 0, &sp).unwrap();
        let y = embed_matrix(&cmat(3, &b), 1, &sp).unwrap();
        prop_assert!(max_abs(&(&x * &y - &y * &x)) < 1e-12);
    }

    #[test]
    fn destroy_is_nilpotent(d in 2usize..7) {
        let a = destroy_matrix(d).unwrap();
        let mut p = CMat::identity(d, d);
        for _ in 0..d {
            p = &p * &a;
        }
        prop_assert!(max_abs(&p) == 0.0);
    }

    #[test]
    fn rhs_is_traceless_and_hermitian(v in entries(16), wd in 6.4f64..6.8, eps in 0.0f64..0.1, phi in 0.0f64..6.3) {
        let ops = SystemOps::new(1).unwrap();
        let dev = DeviceParams::default();
        let h = build_hamiltonian(&dev, &DriveParams::balanced(wd, eps, phi), Frame::DriveRotating, &ops).unwrap().into_matrix();
        let rho = density(16, &v);
        let d = lindblad_rhs(&h, &default_channels(&dev, &ops), &rho).unwrap();
        let scale = max_abs(&d).max(1.0);
        prop_assert!(d.trace().norm() / scale < 1e-12);
        prop_assert!(hermiticity_error(&d) / scale < 1e-12);
    }

    #[test]
    fn hamiltonian_commutes_with_swap(wd in 6.4f64..6.8, eps in 0.0f64..0.1, g in 0.05f64..0.12) {
        let ops = SystemOps::new(2).unwrap();
        let dev = DeviceParams { g_a: g, g_b: g, ..DeviceParams::default() };
        // A symmetric drive keeps the exchange symmetry.
        let h = build_hamiltonian(&dev, &DriveParams::balanced(wd, eps, 0.0), Frame::DriveRotating, &ops).unwrap().into_matrix();
        let p = ops.swap();
        prop_assert!(max_abs(&(&p * &h - &h * &p)) < 1e-12);
    }

    #[test]
    fn fidelity_is_linear(a in entries(4), b in entries(4), lam in 0.0f64..1.0) {
        let (r1, r2) = (density(4, &a), density(4, &b));
        let mix = &r1 * C64::new(lam, 0.0) + &r2 * C64::new(1.0 - lam, 0.0);
        let (s1, s2, sm) = (TwoQubitState::new(r1).unwrap(), TwoQubitState::new(r2).unwrap(), TwoQubitState::new(mix).unwrap());
        for b in Bell::ALL {
            let t = b.vector();
            let f = lam * fidelity(&s1, &t).unwrap() + (1.0 - lam) * fidelity(&s2, &t).unwrap();
            prop_assert!((fidelity(&sm, &t).unwrap() - f).abs() < 1e-12);
        }
    }

    #[test]
    fn bell_fidelities_sum_to_one(a in entries(4)) {
        let f = bell_fidelities(&density(4, &a));
        prop_assert!((f.sum() - 1.0).abs() < 1e-9);
        for v in [f.s, f.t0, f.t_minus, f.t_plus] {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
        }
    }

    #[test]
    fn partial_trace_composes(a in entries(12)) {
        let sp = HilbertSpace::new(vec![3, 2, 2], vec!["c".into(), "a".into(), "b".into()]).unwrap();
        let st = State::from_density(sp, density(12, &a)).unwrap();
        let once = partial_trace(&st, &[0, 1]).unwrap();
        let twice = partial_trace(&once, &[0, 1]).unwrap();
        prop_assert!(max_abs(&(once.density() - twice.density())) < 1e-14);
        prop_assert!((once.trace().re - 1.0).abs() < 1e-12);
        let nested = partial_trace(&once, &[1]).unwrap();
        let direct = partial_trace(&st, &[1]).unwrap();
        prop_assert!(max_abs(&(nested.density() - direct.density())) < 1e-13);
    }

    #[test]
    fn tomography_roundtrip_is_exact(a in entries(4)) {
        let s = TwoQubitState::new(density(4, &a)).unwrap();
        let r = tomography_roundtrip(&s);
        prop_assert!(max_abs(&(r.density() - s.density())) < 1e-10);
    }

    #[test]
    fn rate_populations_are_conserved_and_bounded(
        r in prop::array::uniform4(0.0f64..2e-4),
        p in prop::array::uniform4(0.0f64..1.0),
    ) {
        let total: f64 = p.iter().sum();
        prop_assume!(total > 1e-3);
        let p0 = Populations::from_array(p.map(|x| x / total));
        let m = RateModel::from_array(r);
        let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.5).collect();
        let tr = evolve_rates(&p0, &m, &times).unwrap();
        for q in &tr.pops {
            let a = q.to_array();
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for v in a {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
            }
        }
        let ex = propagate_exact(&p0, &m, &times);
        for (x, y) in tr.pops.iter().zip(&ex) {
            for (u, v) in x.to_array().iter().zip(y.to_array()) {
                prop_assert!((u - v).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rate_steady_state_is_null_vector(r in prop::array::uniform4(1e-6f64..2e-4)) {
        let m = RateModel::from_array(r);
        let ss = steady_state_rates(&m).unwrap();
        let long = propagate_exact(&ss, &m, &[200.0]);
        for (u, v) in ss.to_array().iter().zip(long[0].to_array()) {
            prop_assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn drive_frequencies_flip_only_delta(shift in -0.01f64..0.01, delta in 0.0005f64..0.003) {
        let dp = DispersiveParams::bare(6.97 + shift, 7.25, 6.18, delta);
        for b in Branch::ALL {
            let s = drive_frequencies(&dp, Target::S, b);
            let t = drive_frequencies(&dp, Target::T0, b);
            prop_assert!((s - t - dp.delta).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn map_is_periodic_in_phase(phi in 0.0f64..(2.0 * PI), wd in 6.566f64..6.576) {
        let ops = SystemOps::new(1).unwrap();
        let dev = DeviceParams::default();
        let ch: Vec<CollapseChannel> = default_channels(&dev, &ops);
        let o = MapOptions { tau: 2.0, ..MapOptions::default() };
        let a = map_point(&dev, &ops, &ch, phi, wd, &o).unwrap();
        let b = map_point(&dev, &ops, &ch, phi + 2.0 * PI, wd, &o).unwrap();
        prop_assert!((a.s - b.s).abs() < 1e-9 && (a.t0 - b.t0).abs() < 1e-9);
    }
}

#[test]
fn entanglement_surrogate_over_rate_grid() {
    let g1 = 1.59e-5;
    for kp in [5.0, 8.0, 20.0, 100.0] {
        for kpp in [0.0, 0.05, 0.1, 0.2] {
            for kf in [0.0, 0.1, 0.2] {
                let m = RateModel {
                    gamma_p: kp * g1,
                    gamma_p_prime: kpp * g1,
                    gamma_1: g1,
                    gamma_phi: kf * g1,
                };
                assert!(m.hierarchy_ok());
                let p = steady_state_rates(&m).unwrap();
                assert!(p.p_target > 0.5, "{m:?} -> {p:?}");
            }
        }
    }
}

#[test]
fn strong_leakage_breaks_the_surrogate() {
    // γp = 5γ1, γp' = 0.9γ1, γφ = 0: p_target = 1 / (1 + 0.45 + 0.45 + 0.29).
    let g1 = 1.0e-5;
    let m = RateModel {
        gamma_p: 5.0 * g1,
        gamma_p_prime: 0.9 * g1,
        gamma_1: g1,
        gamma_phi: 0.0,
    };
    assert!(m.hierarchy_ok());
    let p = steady_state_rates(&m).unwrap();
    assert!((p.p_target - 1.0 / 2.19).abs() < 1e-9, "{p:?}");
}
