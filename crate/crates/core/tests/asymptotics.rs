use ep_berry::asymptotics::{
    correction_direct, correction_spectral, divergence_scan, epsilon_sweep, identity_resolution_residual,
    jordan_reconstruction_residual, spectators,
};
use ep_berry::eppoint::jordan_chains;
use ep_berry::hamiltonians::{builtin, circle_loop, BuiltinOptions, LoopShape, ParameterLoop};
use ep_berry::numerics::c64;
use ep_berry::EpError;

fn unit(shape: LoopShape) -> ParameterLoop {
    ParameterLoop::new(vec![0.0, 0.0], (0, 1), shape, 1.0, 64).unwrap()
}

fn ellipse() -> LoopShape {
    LoopShape::Ellipse { semi_axes: [3.0, 1.0] }
}

fn opts(seed: u64) -> BuiltinOptions {
    BuiltinOptions {
        seed,
        ..BuiltinOptions::default()
    }
}

#[test]
fn resolvent_and_spectral_forms_agree() {
    for name in ["gen3", "gen4"] {
        for seed in [7, 8, 9, 10] {
            let f = builtin(name, &opts(seed)).unwrap();
            let jd = jordan_chains(&f, &[0.0, 0.0], c64(0.0, 0.0)).unwrap();
            for shape in [LoopShape::Circle, ellipse()] {
                let d = correction_direct(&f, &jd, &unit(shape.clone()), 256).unwrap();
                let s = correction_spectral(&f, &jd, &unit(shape), 256).unwrap();
                let gap = (d.value - s.total.value).norm();
                assert!(gap <= 1e-8 * (1.0 + d.value.norm()), "{name} seed {seed}: {gap}");
                let sum: num_complex::Complex64 = s.per_level.iter().map(|l| l.contribution).sum();
                assert!((sum - s.total.value).norm() < 1e-10);
            }
        }
    }
}

#[test]
fn correction_scales_with_enclosed_area() {
    // a is the loop integral of a bilinear form in (X, dX): only the area survives.
    let f = builtin("gen3", &BuiltinOptions::default()).unwrap();
    let jd = jordan_chains(&f, &[0.0, 0.0], c64(0.0, 0.0)).unwrap();
    let circle = correction_direct(&f, &jd, &unit(LoopShape::Circle), 2048).unwrap().value;
    let ell = correction_direct(&f, &jd, &unit(ellipse()), 2048).unwrap().value;
    let star = correction_direct(&f, &jd, &unit(LoopShape::Star { lobes: 4, amplitude: 0.5 }), 2048)
        .unwrap()
        .value;
    assert!((circle - ell).norm() > 1e-6);
    assert!((ell / circle - 3.0).norm() < 1e-5, "{}", ell / circle);
    assert!((star / circle - 1.125).norm() < 1e-5, "{}", star / circle);
}

#[test]
fn correction_is_gauge_invariant() {
    let f = builtin("gen4", &BuiltinOptions::default()).unwrap();
    let jd = jordan_chains(&f, &[0.0, 0.0], c64(0.0, 0.0)).unwrap();
    let g = jd.with_gauge(c64(0.4, 1.3), c64(-2.0, 0.5));
    let lp = unit(ellipse());
    let a = correction_direct(&f, &jd, &lp, 256).unwrap().value;
    let b = correction_direct(&f, &g, &lp, 256).unwrap().value;
    let c = correction_spectral(&f, &g, &lp, 256).unwrap().total.value;
    assert!((a - b).norm() < 1e-8 * (1.0 + a.norm()));
    assert!((a - c).norm() < 1e-8 * (1.0 + a.norm()));
}

#[test]
fn null_correction_for_two_level_and_symmetric_families() {
    for (name, x_ep) in [("gen2", [0.0, 0.0]), ("sym3", [0.0, 0.0]), ("sym2", [0.0, 1.0])] {
        let f = builtin(name, &BuiltinOptions::default()).unwrap();
        let jd = jordan_chains(&f, &x_ep, c64(0.0, 0.0)).unwrap();
        for shape in [LoopShape::Circle, ellipse()] {
            let lp = ParameterLoop::new(x_ep.to_vec(), (0, 1), shape, 1.0, 64).unwrap();
            let d = correction_direct(&f, &jd, &lp, 256).unwrap().value;
            let s = correction_spectral(&f, &jd, &lp, 256).unwrap().total.value;
            assert!(d.norm() <= 1e-8 && s.norm() <= 1e-8, "{name}: {d} {s}");
        }
    }
}

#[test]
fn two_level_family_has_no_spectators() {
    let f = builtin("gen2", &BuiltinOptions::default()).unwrap();
    let jd = jordan_chains(&f, &[0.0, 0.0], c64(0.0, 0.0)).unwrap();
    let s = correction_spectral(&f, &jd, &unit(LoopShape::Circle), 64).unwrap();
    assert!(s.per_level.is_empty());
    assert_eq!(s.total.value, c64(0.0, 0.0));
}

#[test]
fn structural_identities_hold() {
    for name in ["gen2", "sym3", "gen3", "gen4"] {
        let f = builtin(name, &BuiltinOptions::default()).unwrap();
        let jd = jordan_chains(&f, &[0.0, 0.0], c64(0.0, 0.0)).unwrap();
        let spec = spectators(&f, &jd).unwrap();
        assert_eq!(spec.len(), f.dim() - 2);
        assert!(identity_resolution_residual(&jd, &spec) <= 1e-9, "{name}");
        assert!(jordan_reconstruction_residual(&f, &jd, &spec) <= 1e-9, "{name}");
    }
}

#[test]
fn per_level_terms_remove_exactly() {
    let o = BuiltinOptions {
        delta2: c64(0.3, 0.2).into(),
        ..BuiltinOptions::default()
    };
    let f = builtin("gen4", &o).unwrap();
    let jd = jordan_chains(&f, &[0.0, 0.0], c64(0.0, 0.0)).unwrap();
    let s = correction_spectral(&f, &jd, &unit(LoopShape::Circle), 256).unwrap();
    assert_eq!(s.per_level.len(), 2);
    let near = s.per_level.iter().min_by(|a, b| a.energy.norm().total_cmp(&b.energy.norm())).unwrap();
    let far = s.per_level.iter().max_by(|a, b| a.energy.norm().total_cmp(&b.energy.norm())).unwrap();
    assert!(near.contribution.norm() > 10.0 * far.contribution.norm());
    let without_far = s.total.value - far.contribution;
    assert!((without_far - near.contribution).norm() < 1e-12);
}

#[test]
fn sweep_follows_the_quadratic_law() {
    for (name, lower) in [("gen3", 0), ("gen4", 1)] {
        let f = builtin(name, &BuiltinOptions::default()).unwrap();
        let jd = jordan_chains(&f, &[0.0, 0.0], c64(0.0, 0.0)).unwrap();
        let lp = unit(LoopShape::Circle);
        let a = correction_direct(&f, &jd, &lp, 1024).unwrap().value;
        let sw = epsilon_sweep(&f, &jd, &lp, lower, &[0.02, 0.04, 0.08, 0.16], 1024).unwrap();
        let p = sw.fitted_exponent.unwrap();
        let c = sw.fitted_coefficient.unwrap();
        assert!((p - 2.0).abs() <= 0.1, "{name}: exponent {p}");
        assert!((c - a).norm() <= 0.05 * a.norm(), "{name}: {c} vs {a}");
        assert!(!sw.is_flat());
        let csv = sw.to_csv();
        assert_eq!(csv.lines().count(), 5);
    }
}

#[test]
fn symmetric_sweep_is_flat() {
    let f = builtin("sym3", &BuiltinOptions::default()).unwrap();
    let jd = jordan_chains(&f, &[0.0, 0.0], c64(0.0, 0.0)).unwrap();
    let sw = epsilon_sweep(&f, &jd, &unit(LoopShape::Circle), 0, &[0.02, 0.04, 0.08], 512).unwrap();
    assert!(sw.is_flat());
    assert!(sw.fitted_exponent.is_none());
    assert!(sw.entries.iter().all(|e| e.deviation.norm() <= 1e-6));
}

#[test]
fn empty_sweep_is_rejected() {
    let f = builtin("gen3", &BuiltinOptions::default()).unwrap();
    let jd = jordan_chains(&f, &[0.0, 0.0], c64(0.0, 0.0)).unwrap();
    let err = epsilon_sweep(&f, &jd, &unit(LoopShape::Circle), 0, &[], 512).unwrap_err();
    assert!(!err.is_numerical());
}

#[test]
fn divergence_near_triple_degeneracy() {
    let lp = circle_loop(vec![0.0, 0.0], (0, 1), 1.0, 64).unwrap();
    let r = divergence_scan(&BuiltinOptions::default(), &[1.0, 0.5, 0.25, 0.125, 0.0625], &lp, 256).unwrap();
    let slope = r.slope.unwrap();
    assert!((-3.3..=-2.7).contains(&slope), "{slope}");

    let far = divergence_scan(&BuiltinOptions::default(), &[2.0, 50.0], &lp, 256).unwrap();
    let a2 = far.entries[0].1.norm();
    let a50 = far.entries[1].1.norm();
    assert!(a50 <= a2 * (2.0f64 / 50.0).powi(2) * 10.0, "{a50} vs {a2}");
}

#[test]
fn spectator_at_ep_energy_is_refused() {
    let o = BuiltinOptions {
        delta: c64(5e-4, 0.0).into(),
        ..BuiltinOptions::default()
    };
    let f = builtin("gen3", &o).unwrap();
    match jordan_chains(&f, &[0.0, 0.0], c64(0.0, 0.0)) {
        Err(e) => assert!(matches!(e, EpError::NotSimpleEp(_)), "{e}"),
        Ok(jd) => assert!(matches!(spectators(&f, &jd), Err(EpError::NearTripleDegeneracy(_)))),
    }
    let lp = circle_loop(vec![0.0, 0.0], (0, 1), 1.0, 64).unwrap();
    assert!(divergence_scan(&BuiltinOptions::default(), &[1e-3], &lp, 64).is_err());
}
