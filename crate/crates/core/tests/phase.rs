use std::f64::consts::PI;

use ep_berry::eppoint::jordan_chains;
use ep_berry::hamiltonians::{builtin, circle_loop, BuiltinOptions, HamiltonianFamily, LoopShape, ParameterLoop};
use ep_berry::numerics::c64;
use ep_berry::phase::{
    dynamical_phase, phase_decomposition, phase_distance, phase_double_cycle, phase_versal, phase_winding_symmetric,
    principal, wrap_angle,
};
use ep_berry::spectral::track_pair;
use ep_berry::EpError;
use num_complex::Complex64;
use proptest::prelude::*;

fn fam(name: &str) -> HamiltonianFamily {
    builtin(name, &BuiltinOptions::default()).unwrap()
}

fn pi() -> Complex64 {
    c64(PI, 0.0)
}

fn shaped(center: &[f64], shape: LoopShape, eps: f64, n: usize) -> ParameterLoop {
    ParameterLoop::new(center.to_vec(), (0, 1), shape, eps, n).unwrap()
}

#[test]
fn methods_agree_on_every_builtin() {
    let cases = [
        ("sym2", vec![0.0, 1.0], 0.5, 0),
        ("gen2", vec![0.0, 0.0], 0.3, 0),
        ("sym3", vec![0.0, 0.0], 0.1, 0),
        ("gen3", vec![0.0, 0.0], 0.1, 0),
        ("gen4", vec![0.0, 0.0], 0.1, 1),
    ];
    for (name, center, eps, lower) in cases {
        let f = fam(name);
        let lp = circle_loop(center, (0, 1), eps, 1024).unwrap();
        let d = phase_double_cycle(&f, &lp, lower).unwrap();
        let v = phase_versal(&f, &lp, lower, None).unwrap();
        let tol = 1e-6f64.max(d.discretization_error).max(v.discretization_error);
        assert!(phase_distance(d.gamma, v.gamma) <= tol, "{name}: {} vs {}", d.gamma, v.gamma);
        if f.is_symmetric() {
            let w = phase_winding_symmetric(&f, &lp, lower).unwrap();
            assert!(phase_distance(d.gamma, w.gamma) <= tol.max(w.discretization_error), "{name}");
            assert_eq!(w.winding.map(i64::abs), Some(1));
        }
    }
}

#[test]
fn two_level_phase_is_pi_for_any_shape() {
    let f = fam("gen2");
    let shapes = [
        LoopShape::Circle,
        LoopShape::Ellipse { semi_axes: [3.0, 1.0] },
        LoopShape::Star { lobes: 5, amplitude: 0.4 },
        LoopShape::Points { points: vec![[1.0, -0.5], [0.2, 1.0], [-1.0, 0.3], [-0.4, -1.2]] },
    ];
    for shape in shapes {
        for eps in [0.3, 1.0] {
            let lp = shaped(&[0.0, 0.0], shape.clone(), eps, 1024);
            let g = phase_double_cycle(&f, &lp, 0).unwrap().gamma;
            assert!(phase_distance(g, pi()) < 1e-6, "{shape:?} {eps}: {g}");
        }
    }
}

#[test]
fn symmetric_phase_is_pi_for_star_loop() {
    let f = fam("sym3");
    let lp = shaped(&[0.0, 0.0], LoopShape::Star { lobes: 3, amplitude: 0.3 }, 0.1, 2048);
    let g = phase_double_cycle(&f, &lp, 0).unwrap().gamma;
    assert!(phase_distance(g, pi()) < 1e-6, "{g}");
}

#[test]
fn reversed_orientation_conjugates_the_correction() {
    let f = fam("gen3");
    let lp = circle_loop(vec![0.0, 0.0], (0, 1), 0.1, 1024).unwrap();
    let fwd = phase_double_cycle(&f, &lp, 0).unwrap().gamma;
    let bwd = phase_double_cycle(&f, &lp.reversed(), 0).unwrap().gamma;
    // gamma -> -gamma: the real part stays at pi, the correction flips sign.
    assert!(phase_distance(bwd, -fwd) < 1e-8, "{fwd} {bwd}");
    assert!(fwd.im.abs() > 1e-5);
    let vf = phase_versal(&f, &lp, 0, None).unwrap();
    let vb = phase_versal(&f, &lp.reversed(), 0, None).unwrap();
    assert!((vf.residual.unwrap() + vb.residual.unwrap()).norm() < 1e-8);
    assert_eq!(vf.winding, vb.winding.map(|w| -w));
}

#[test]
fn double_cycle_converges_at_second_order() {
    let f = fam("gen3");
    let base = circle_loop(vec![0.0, 0.0], (0, 1), 0.1, 64).unwrap();
    let reference = phase_double_cycle(&f, &base.with_samples(8192), 0).unwrap().gamma;
    let errs: Vec<f64> = [128usize, 256, 512]
        .iter()
        .map(|&n| phase_distance(phase_double_cycle(&f, &base.with_samples(n), 0).unwrap().gamma, reference))
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 1.8, "{errs:?}");
    }
}

#[test]
fn decomposition_reduces_to_single_cycle_formula() {
    let f = fam("gen3");
    let jd = jordan_chains(&f, &[0.0, 0.0], c64(0.0, 0.0)).unwrap();
    let lp = circle_loop(vec![0.0, 0.0], (0, 1), 0.1, 1024).unwrap();
    let d = phase_decomposition(&f, &lp, 0, Some(&jd)).unwrap();
    let v = phase_versal(&f, &lp, 0, Some(&jd)).unwrap();
    assert!((d.i1.norm() - PI).abs() < 1e-6, "{}", d.i1);
    assert!(d.i2.norm() < 1e-6, "{}", d.i2);
    assert!((d.i3 - 2.0 * d.i3_first_cycle).norm() < 1e-8);
    assert!((d.i3 - v.residual.unwrap()).norm() < 1e-8);
    assert!(phase_distance(d.total(), v.gamma) < 1e-8);

    let g2 = fam("gen2");
    let lp2 = circle_loop(vec![0.0, 0.0], (0, 1), 1.0, 512).unwrap();
    let d2 = phase_decomposition(&g2, &lp2, 0, None).unwrap();
    assert!((d2.i1.norm() - PI).abs() < 1e-10);
    assert!(d2.i2.norm() < 1e-6 && d2.i3.norm() < 1e-6);

    let s3 = fam("sym3");
    let d3 = phase_decomposition(&s3, &lp, 0, None).unwrap();
    assert!(d3.i2.norm() < 1e-6 && d3.i3.norm() < 1e-6);
}

#[test]
fn non_enclosing_loop_has_trivial_phase() {
    let cases = [("gen2", vec![0.5, 0.5], 0.3), ("sym2", vec![0.5, 0.0], 0.3), ("sym3", vec![0.3, 0.3], 0.1)];
    for (name, center, eps) in cases {
        let f = fam(name);
        let lp = circle_loop(center, (0, 1), eps, 512).unwrap();
        let r = phase_double_cycle(&f, &lp, 0).unwrap();
        assert_eq!(r.cycles, 1, "{name}");
        assert!(phase_distance(r.gamma, c64(0.0, 0.0)) < 1e-6, "{name}: {}", r.gamma);
    }
}

#[test]
fn non_enclosing_phase_of_general_family_scales_with_area() {
    // Away from the EP the complex connection of gen3 has nonzero curvature.
    let f = fam("gen3");
    let lp = circle_loop(vec![0.3, 0.3], (0, 1), 0.04, 512).unwrap();
    let big = phase_double_cycle(&f, &lp, 0).unwrap();
    let small = phase_double_cycle(&f, &lp.with_epsilon(0.02), 0).unwrap();
    assert_eq!(big.cycles, 1);
    let ratio = big.gamma / small.gamma;
    assert!((ratio - 4.0).norm() < 0.1, "{ratio}");
}

#[test]
fn winding_is_refused_for_general_families() {
    let f = fam("gen3");
    let lp = circle_loop(vec![0.0, 0.0], (0, 1), 0.1, 64).unwrap();
    assert!(matches!(phase_winding_symmetric(&f, &lp, 0), Err(EpError::NotSymmetric(_))));
}

#[test]
fn dynamical_phase_of_two_level_model() {
    // E(t) = -exp(i pi t) on the lower branch of p = exp(2 pi i t).
    let f = fam("gen2");
    let lp = circle_loop(vec![0.0, 0.0], (0, 1), 1.0, 1024).unwrap();
    let one = track_pair(&f, &lp, 0, 1).unwrap();
    let delta = dynamical_phase(&one, 1.0, 1.0);
    assert!((delta - c64(0.0, 2.0 / PI)).norm() < 1e-5, "{delta}");
    let two = track_pair(&f, &lp, 0, 2).unwrap();
    assert!(dynamical_phase(&two, 1.0, 1.0).norm() < 1e-12);
    let scaled = dynamical_phase(&one, 3.0, 0.5);
    assert!((scaled - delta * 6.0).norm() < 1e-10);
}

#[test]
fn principal_value_convention() {
    assert_eq!(principal(c64(-PI, 0.0)).re, PI);
    assert!((principal(c64(-PI + 1e-15, 0.0)).re - PI).abs() < 1e-14);
    assert!((principal(c64(3.0 * PI, 1.0)) - c64(PI, 1.0)).norm() < 1e-14);
    assert!(phase_distance(c64(PI, 0.0), c64(-PI, 0.0)) < 1e-15);
}

proptest! {
    #[test]
    fn wrap_angle_lands_in_principal_interval(x in -100.0f64..100.0) {
        let w = wrap_angle(x);
        prop_assert!(w > -PI && w <= PI);
        let k = ((x - w) / (2.0 * PI)).round();
        prop_assert!((x - w - 2.0 * PI * k).abs() < 1e-12);
    }
}
