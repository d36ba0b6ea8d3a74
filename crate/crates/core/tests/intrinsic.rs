use willmore4::geometry::{MetricField, PAIRS};
use willmore4::immersions::random_points;
use willmore4::intrinsic::*;
use willmore4::jets::Jet;

fn coords(order: usize, base: [f64; 4]) -> [Jet; 4] {
    std::array::from_fn(|i| Jet::variable(order, i, base[i]))
}

/// A smooth conformal factor depending on a seed.
fn lambda(seed: u64, order: usize, base: [f64; 4]) -> Jet {
    let x = coords(order, base);
    let a = 0.1 + 0.05 * seed as f64;
    &(&x[0].sin().scale(a) + &(&x[1] * &x[2]).scale(0.2)) + &(&x[3].cos() * &x[(seed % 4) as usize]).scale(0.25)
}

fn test_function(order: usize, base: [f64; 4]) -> Jet {
    let x = coords(order, base);
    &(&x[0] * &x[1]).exp() + &(&(&x[2] * &x[2]) * &x[3])
}

/// Polynomial perturbation of δ.
fn bumpy_metric(base: [f64; 4], order: usize, amp: f64) -> MetricField {
    metric_from_fn(base, order, |x| {
        std::array::from_fn(|q| {
            let (i, j) = PAIRS[q];
            let diag = if i == j { 1.0 } else { 0.0 };
            let quad = (&x[i] * &x[j]).scale(amp);
            let mixed = (&x[(i + j) % 4] * &x[(i + 2 * j + 1) % 4]).scale(amp * (q as f64 - 4.5) / 15.0);
            &Jet::constant(order, diag) + &(&quad + &mixed)
        })
    })
    .unwrap()
}

#[test]
fn round_sphere_values() {
    for b in random_points(1, 4, 0.8) {
        let g = round_sphere_metric(b, 4);
        let f = intrinsic_frame(&g).unwrap();
        assert!((f.curvature.scalar.value() - 12.0).abs() < 1e-11);
        assert!((q_curvature(&g).unwrap() - 6.0).abs() < 1e-8);
        assert!((f.q.unwrap() - 6.0).abs() < 1e-8);
        let gv = g.values();
        for (q, &(i, j)) in PAIRS.iter().enumerate() {
            assert!((f.curvature.ricci[q].value() - 3.0 * gv[i][j]).abs() < 1e-11);
        }
        assert!(f.weyl.iter().all(|w| w.value().abs() < 1e-10));
        assert!(bach_tensor(&g).unwrap().norm < 1e-8);
    }
}

#[test]
fn flat_metric_is_trivial() {
    let g = MetricField::flat([0.1; 4], 4);
    assert_eq!(q_curvature(&g).unwrap(), 0.0);
    assert_eq!(bach_tensor(&g).unwrap().norm, 0.0);
    let u = test_function(4, [0.1; 4]);
    let lap = g.laplacian(&u).unwrap();
    let lap2 = g.laplacian(&lap).unwrap().value();
    assert!((paneitz_apply(&g, &u).unwrap() + lap2).abs() < 1e-12 * lap2.abs());
}

#[test]
fn conformally_flat_metrics_have_no_weyl_or_bach() {
    for seed in 0..4 {
        let b = random_points(seed + 10, 1, 0.5)[0];
        let g = MetricField::flat(b, 4).conformal(&lambda(seed, 4, b));
        let f = intrinsic_frame(&g).unwrap();
        let riem = (0..4)
            .flat_map(|a| (0..4).map(move |c| (a, c)))
            .map(|(a, c)| f.curvature.riemann(a, c, a, c).value().abs())
            .fold(0.0, f64::max);
        let w = f.weyl.iter().map(|w| w.value().abs()).fold(0.0, f64::max);
        assert!(riem > 1e-2);
        assert!(w <= 1e-8 * riem, "{w:e}");
        assert!(bach_tensor(&g).unwrap().norm <= 1e-8);
    }
}

#[test]
fn weyl_and_bach_are_trace_free_on_generic_metrics() {
    for (k, b) in random_points(20, 3, 0.4).into_iter().enumerate() {
        let g = bumpy_metric(b, 4, 0.2 + 0.1 * k as f64);
        let f = intrinsic_frame(&g).unwrap();
        assert!(f.weyl_trace_residual() < 1e-9);
        let r = bach_tensor(&g).unwrap();
        assert!(r.norm > 1e-4);
        assert!(r.trace <= 1e-8 * r.norm, "{:e}", r.trace);
        assert!(r.asymmetry <= 1e-10 * r.norm, "{:e}", r.asymmetry);
    }
}

#[test]
fn bach_homogeneity() {
    let b = [0.1, 0.2, -0.1, 0.3];
    let g = bumpy_metric(b, 4, 0.3);
    let base = bach_tensor(&g).unwrap();
    for c in [0.5, 2.0, 3.0] {
        let gc = MetricField::new(b, std::array::from_fn(|q| g.g[q].scale(c))).unwrap();
        let bc = bach_tensor(&gc).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((bc.b[i][j] - base.b[i][j] / c).abs() <= 1e-10 * base.norm);
            }
        }
    }
    // conformal weight −2 in four dimensions
    let lam = lambda(1, 4, b);
    let gl = g.conformal(&lam);
    let bl = bach_tensor(&gl).unwrap();
    let w = (-2.0 * lam.value()).exp();
    for i in 0..4 {
        for j in 0..4 {
            assert!((bl.b[i][j] - w * base.b[i][j]).abs() <= 1e-9 * base.norm);
        }
    }
}

#[test]
fn paneitz_covariance() {
    for seed in 0..5 {
        let b = random_points(seed + 30, 1, 0.5)[0];
        let u = test_function(4, b);
        let lam = lambda(seed, 4, b);
        for g0 in [MetricField::flat(b, 4), bumpy_metric(b, 4, 0.3)] {
            for sign in [PaneitzSign::Literal, PaneitzSign::Positive] {
                assert!(paneitz_covariance_residual(&g0, &lam, &u, sign).unwrap() <= 1e-7);
                // acting on the conformal factor itself
                assert!(paneitz_covariance_residual(&g0, &lam, &lam, sign).unwrap() <= 1e-7);
            }
        }
    }
}

#[test]
fn paneitz_kills_constants() {
    let b = [0.0, 0.1, 0.2, 0.3];
    let g = bumpy_metric(b, 4, 0.3);
    assert_eq!(paneitz_apply(&g, &Jet::constant(4, 2.5)).unwrap(), 0.0);
}

#[test]
fn paneitz_equation_holds_for_the_positive_sign() {
    for seed in 0..5 {
        let b = random_points(seed + 40, 1, 0.5)[0];
        let lam = lambda(seed, 4, b);
        for g0 in [MetricField::flat(b, 4), bumpy_metric(b, 4, 0.3)] {
            let r = paneitz_equation_residual(&g0, &lam, PaneitzSign::Positive).unwrap();
            assert!(r <= 1e-6, "{r:e}");
        }
    }
}

#[test]
fn displayed_paneitz_sign_fails_the_paneitz_equation() {
    // P_{g₀}λ + Q_{g₀} = e^{4λ}Q is linear in λ at leading order, so flipping the
    // sign of P leaves a residual of order one
    let b = [0.2, -0.1, 0.3, 0.1];
    let r = paneitz_equation_residual(&MetricField::flat(b, 4), &lambda(0, 4, b), PaneitzSign::Literal).unwrap();
    assert!(r > 0.5);
}

#[test]
fn orders_are_checked() {
    let g = MetricField::flat([0.0; 4], 3);
    assert!(q_curvature(&g).is_err());
    assert!(bach_tensor(&g).is_err());
    assert!(paneitz_apply(&g, &test_function(3, [0.0; 4])).is_err());
    assert!(paneitz_apply(&g, &test_function(4, [0.0; 4])).is_ok());
}
