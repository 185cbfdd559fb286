use ep_berry::eppoint::{ep_tangent, expansion_ratio, jordan_chains, locate_ep, mu_at};
use ep_berry::hamiltonians::{builtin, BuiltinOptions, HamiltonianFamily};
use ep_berry::numerics::{c64, eig_general, sandwich};
use ep_berry::EpError;
use num_complex::Complex64;

fn fam(name: &str) -> HamiltonianFamily {
    builtin(name, &BuiltinOptions::default()).unwrap()
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = xs.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// `(E_b - E_a)^2 / 4` for the two eigenvalues nearest `e`.
fn p_near(f: &HamiltonianFamily, x: &[f64], e: Complex64) -> Complex64 {
    let mut v: Vec<Complex64> = eig_general(&f.evaluate(x)).unwrap().iter().map(|t| t.value).collect();
    v.sort_by(|a, b| (a - e).norm().total_cmp(&(b - e).norm()));
    let d = v[1] - v[0];
    d * d / 4.0
}

#[test]
fn gen3_and_gen4_locate_from_nearby_guess() {
    for (name, lower) in [("gen3", 0), ("gen4", 1)] {
        let f = fam(name);
        let loc = locate_ep(&f, &[0.05, -0.03], lower, (0, 1)).unwrap();
        assert!(loc.x[0].abs() < 1e-9 && loc.x[1].abs() < 1e-9, "{name}: {:?}", loc.x);
        assert!(loc.energy.norm() < 1e-7, "{name}");
        assert!(loc.iterations <= 10);
    }
}

#[test]
fn newton_converges_quadratically() {
    let f = fam("gen3");
    let loc = locate_ep(&f, &[0.2, 0.1], 0, (0, 1)).unwrap();
    let h = &loc.history;
    let mut checked = 0;
    for w in h.windows(2) {
        if w[0] < 1e-2 && w[1] > 1e-12 {
            // |p_{k+1}| ~ C |p_k|^2
            assert!(w[1] < 10.0 * w[0] * w[0], "{h:?}");
            checked += 1;
        }
    }
    assert!(checked >= 1, "{h:?}");
}

#[test]
fn mu_is_first_order_of_p() {
    for (name, e) in [("gen3", c64(0.0, 0.0)), ("gen4", c64(0.0, 0.0)), ("sym3", c64(0.0, 0.0))] {
        let f = fam(name);
        let jd = jordan_chains(&f, &[0.0, 0.0], e).unwrap();
        let dir = [0.6, -0.8];
        let radii = [1e-2, 5e-3, 2.5e-3];
        let errs: Vec<f64> = radii
            .iter()
            .map(|r| {
                let x = [r * dir[0], r * dir[1]];
                (p_near(&f, &x, e) - mu_at(&jd, &x)).norm()
            })
            .collect();
        let s = slope(&radii, &errs);
        assert!((s - 2.0).abs() < 0.2, "{name}: slope {s}, {errs:?}");
    }
}

#[test]
fn chain_normalizations_hold() {
    for name in ["gen2", "sym3", "gen3", "gen4"] {
        let f = fam(name);
        let jd = jordan_chains(&f, &[0.0, 0.0], c64(0.0, 0.0)).unwrap();
        let r = &jd.residuals;
        for v in [r.right_eigen, r.right_chain, r.left_eigen, r.left_chain] {
            assert!(v < 1e-9, "{name}: {r:?}");
        }
        for v in [r.orthogonality, r.norm_10, r.norm_01, r.norm_11] {
            assert!(v < 1e-8, "{name}: {r:?}");
        }
    }
}

#[test]
fn mu_gradient_is_gauge_invariant() {
    let f = fam("gen4");
    let jd = jordan_chains(&f, &[0.0, 0.0], c64(0.0, 0.0)).unwrap();
    let g = jd.with_gauge(c64(1.5, -2.0), c64(0.3, 0.7));
    for j in 0..2 {
        let d = f.derivative(&[0.0, 0.0], j);
        let mu = sandwich(&g.left0, &d, &g.chi0);
        assert!((mu - jd.mu_grad[j]).norm() < 1e-12);
    }
    assert!((g.eigen_projector() - jd.eigen_projector()).norm() < 1e-12);
}

#[test]
fn expansion_ratio_tends_to_one_on_symmetric_families() {
    for (name, x_ep) in [("sym2", vec![0.0, 1.0]), ("sym3", vec![0.0, 0.0])] {
        let f = fam(name);
        let jd = jordan_chains(&f, &x_ep, c64(0.0, 0.0)).unwrap();
        let radii = [1e-2, 1e-3, 1e-4];
        let errs: Vec<f64> = radii
            .iter()
            .map(|r| {
                let x = [x_ep[0] + 0.6 * r, x_ep[1] + 0.8 * r];
                (expansion_ratio(&f, &jd, &x).unwrap() - 1.0).norm()
            })
            .collect();
        let s = slope(&radii, &errs);
        assert!(s >= 0.5, "{name}: exponent {s}, {errs:?}");
        assert!(errs[2] < 1e-2, "{name}: {errs:?}");
    }
}

#[test]
fn tangent_of_inert_parameter() {
    let f = fam("gen3").with_inert_params(1);
    let jd = jordan_chains(&f, &[0.0, 0.0, 0.0], c64(0.0, 0.0)).unwrap();
    let t = ep_tangent(&jd).unwrap();
    assert_eq!(t.len(), 1);
    assert!((t[0][2].abs() - 1.0).abs() < 1e-10);
    let loc = locate_ep(&f, &[0.04, 0.02, 0.5], 0, (0, 1)).unwrap();
    assert!((loc.x[2] - 0.5).abs() < 1e-15);
}

#[test]
fn far_guess_fails_numerically() {
    let f = fam("sym2");
    let err = locate_ep(&f, &[0.5, 0.0], 0, (0, 1)).unwrap_err();
    assert!(err.is_numerical());
}

#[test]
fn near_triple_degeneracy_is_not_simple() {
    let opts = BuiltinOptions {
        delta: c64(1e-5, 0.0).into(),
        ..BuiltinOptions::default()
    };
    let f = builtin("gen3", &opts).unwrap();
    let err = jordan_chains(&f, &[0.0, 0.0], c64(0.0, 0.0)).unwrap_err();
    assert!(matches!(err, EpError::NotSimpleEp(_)), "{err}");
}
