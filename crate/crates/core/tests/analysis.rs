use std::f64::consts::PI;

use proptest::prelude::*;
use willmore4::analysis::*;
use willmore4::error::Error;
use willmore4::forms::subsets;
use willmore4::immersions::*;

fn grid(n: usize, f: impl Fn([f64; 4]) -> f64) -> SampledFunction {
    SampledFunction::torus_from_fn([n; 4], [1.0; 4], f).unwrap()
}

fn bump(c: [f64; 4], w: f64) -> impl Fn([f64; 4]) -> f64 {
    move |x| {
        let d2: f64 = (0..4).map(|i| (x[i] - c[i]).powi(2)).sum();
        (-d2 / (w * w)).exp()
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn lorentz_pp_is_lp() {
    for seed in 0..5 {
        let f = random_smooth(seed, 8).unwrap();
        for p in [1.5, 2.0, 3.0, 4.5] {
            let l = lorentz_norm(&f, p, p, Flavor::Star).unwrap();
            assert!(rel(l, f.lp_norm(p)) < 1e-12, "p={p} {l} {}", f.lp_norm(p));
        }
    }
}

#[test]
fn lorentz_indicator_measure() {
    let f = grid(8, |x| if x[0] < 0.375 && x[1] > 0.5 { 1.0 } else { 0.0 });
    let mu = 0.375 * 0.5;
    for p in [1.5, 2.0, 3.5] {
        let l = lorentz_norm(&f, p, p, Flavor::Star).unwrap();
        assert!(rel(l.powf(p), mu) < 1e-12);
    }
}

#[test]
fn lorentz_constant_closed_forms() {
    let c = 1.7;
    let f = grid(8, |_| c);
    for (p, q) in [(2.0, 2.0), (1.5, 3.0), (3.0, 1.0), (2.5, f64::INFINITY)] {
        let star = lorentz_norm(&f, p, q, Flavor::Star).unwrap();
        let expect = if q.is_infinite() { c } else { c * (p / q).powf(1.0 / q) };
        assert!(rel(star, expect) < 1e-12, "({p},{q}) {star} {expect}");
        let dbl = lorentz_norm(&f, p, q, Flavor::DoubleStar).unwrap();
        let expect = if q.is_infinite() {
            c
        } else {
            c * (p / q + 1.0 / (q - q / p)).powf(1.0 / q)
        };
        assert!(rel(dbl, expect) < 1e-12, "({p},{q}) {dbl} {expect}");
    }
}

#[test]
fn double_star_two_steps_closed_form() {
    // two values on halves of the torus; p = q = 2 integrates in closed form
    let (v1, v2) = (3.0, 1.0);
    let f = grid(8, |x| if x[0] < 0.5 { v1 } else { v2 });
    let w = 0.5;
    let steps = rearrangement(&f);
    assert_eq!(steps.len(), 4096);
    // f** on [w, 2w] is (a + v₂t)/t with a = (v₁ − v₂)w; beyond 2w it is M/t
    let a = (v1 - v2) * w;
    let m = (v1 + v2) * w;
    let first = v1 * v1 * w;
    let second = a * a * (1.0 / w - 0.5 / w) + 2.0 * a * v2 * 2f64.ln() + v2 * v2 * w;
    let tail = m * m / (2.0 * w);
    let expect = (first + second + tail).sqrt();
    // the cell-level rearrangement splits each half into many equal steps
    let got = lorentz_norm(&f, 2.0, 2.0, Flavor::DoubleStar).unwrap();
    assert!(rel(got, expect) < 1e-10, "{got} {expect}");
}

#[test]
fn lorentz_rejects_bad_exponents() {
    let f = grid(8, |_| 1.0);
    assert!(matches!(lorentz_norm(&f, 1.0, 2.0, Flavor::Star), Err(Error::OutOfRange(_))));
    assert!(matches!(lorentz_norm(&f, 0.5, 2.0, Flavor::Star), Err(Error::OutOfRange(_))));
    assert!(lorentz_norm(&f, 2.0, 0.5, Flavor::Star).is_err());
}

#[test]
fn sampled_function_validation() {
    assert!(SampledFunction::new([4, 8, 8, 8], [1.0; 4], true, vec![0.0; 2048]).is_err());
    assert!(SampledFunction::new([8; 4], [1.0; 4], true, vec![0.0; 10]).is_err());
    let mut v = vec![0.0; 4096];
    v[7] = f64::NAN;
    assert!(SampledFunction::new([8; 4], [1.0; 4], true, v).is_err());
}

#[test]
fn inclusion_constant_and_zero() {
    let f = grid(8, |_| 2.0);
    let (p, q, p2, q2) = (1.5, 2.0, 3.0, 4.0);
    let r = lorentz_inclusion_check(&f, (p, q), (p2, q2), Flavor::Star).unwrap();
    let expect = (p / q).powf(1.0 / q) / (p2 / q2).powf(1.0 / q2);
    assert!(rel(r, expect) < 1e-12);
    let zero = f.zeros_like();
    assert_eq!(lorentz_inclusion_check(&zero, (p, q), (p2, q2), Flavor::Star).unwrap(), 0.0);
    assert!(lorentz_inclusion_check(&f, (3.0, 2.0), (2.0, 2.0), Flavor::Star).is_err());
}

#[test]
fn inclusion_family_bounded_and_refinement_stable() {
    let worst = |n: usize| {
        (0..50)
            .map(|s| {
                let f = random_smooth(s, n).unwrap();
                lorentz_inclusion_check(&f, (1.5, 2.0), (3.0, 3.0), Flavor::DoubleStar).unwrap()
            })
            .fold(0.0, f64::max)
    };
    let (a, b) = (worst(8), worst(16));
    assert!(a.is_finite() && a > 0.0);
    assert!(rel(a, b) < 0.05, "{a} {b}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn double_star_dominates_star(
        vals in prop::collection::vec(-5.0f64..5.0, 4096),
        p in 1.1f64..6.0,
        q in 1.0f64..8.0,
    ) {
        let f = SampledFunction::new([8; 4], [1.0; 4], true, vals).unwrap();
        let a = lorentz_norm(&f, p, q, Flavor::Star).unwrap();
        let b = lorentz_norm(&f, p, q, Flavor::DoubleStar).unwrap();
        prop_assert!(b >= a * (1.0 - 1e-12));
        let ai = lorentz_norm(&f, p, f64::INFINITY, Flavor::Star).unwrap();
        let bi = lorentz_norm(&f, p, f64::INFINITY, Flavor::DoubleStar).unwrap();
        prop_assert!(bi >= ai * (1.0 - 1e-12));
    }

    #[test]
    fn lorentz_homogeneous(
        vals in prop::collection::vec(-5.0f64..5.0, 4096),
        c in -10.0f64..10.0,
        p in 1.1f64..6.0,
        q in 1.0f64..8.0,
    ) {
        let f = SampledFunction::new([8; 4], [1.0; 4], true, vals).unwrap();
        for flavor in [Flavor::Star, Flavor::DoubleStar] {
            let a = lorentz_norm(&f.scale(c), p, q, flavor).unwrap();
            let b = c.abs() * lorentz_norm(&f, p, q, flavor).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
        }
    }
}

#[test]
fn riesz_zero_and_rejections() {
    let f = grid(8, |_| 0.0);
    let r = riesz_potential(&f, 3.0).unwrap();
    assert!(r.values.iter().all(|v| *v == 0.0));
    assert!(matches!(riesz_potential(&f, 4.0), Err(Error::OutOfRange(_))));
    let box_f = SampledFunction::new([8; 4], [1.0; 4], false, vec![1.0; 4096]).unwrap();
    assert!(matches!(riesz_potential(&box_f, 3.0), Err(Error::Unsupported(_))));
}

#[test]
fn riesz_matches_direct_sum() {
    let f = grid(16, bump([0.4, 0.5, 0.55, 0.6], 0.15));
    let a = 3.0;
    let r = riesz_potential(&f, a).unwrap();
    let v = f.cell_volume();
    let rho = (2.0 * v / (PI * PI)).powf(0.25);
    for i in [0usize, 1234, 30000, 43690, 65535] {
        let xi = f.center(i);
        let mut s = 0.0;
        for (j, fj) in f.values.iter().enumerate() {
            let xj = f.center(j);
            let d2: f64 = (0..4)
                .map(|k| {
                    let d = xi[k] - xj[k];
                    (d - d.round()).powi(2)
                })
                .sum();
            let k = if j == i { 4.0 * rho.powf(-a) / (4.0 - a) } else { d2.sqrt().powf(-a) };
            s += fj * k * v;
        }
        assert!(rel(r.values[i], s) < 1e-6, "{i}: {} {s}", r.values[i]);
    }
}

#[test]
fn riesz_linear_and_translation_equivariant() {
    let f = random_smooth(1, 16).unwrap();
    let g = random_smooth(2, 16).unwrap();
    let sum = riesz_potential(&f.add(&g).unwrap(), 3.0).unwrap();
    let rf = riesz_potential(&f, 3.0).unwrap();
    let rg = riesz_potential(&g, 3.0).unwrap();
    let scale = sum.lp_norm(f64::INFINITY);
    for i in 0..sum.values.len() {
        assert!((sum.values[i] - rf.values[i] - rg.values[i]).abs() < 1e-12 * scale);
    }
    let shift = [3, 0, 7, 11];
    let a = riesz_potential(&f.shifted(shift), 3.0).unwrap();
    let b = rf.shifted(shift);
    let scale = b.lp_norm(f64::INFINITY);
    for i in 0..a.values.len() {
        assert!((a.values[i] - b.values[i]).abs() < 1e-11 * scale);
    }
}

#[test]
fn maximal_of_ball_indicator() {
    let rho = 0.25;
    let c = [0.5; 4];
    let f = grid(32, |x| {
        let d2: f64 = (0..4).map(|i| (x[i] - c[i]).powi(2)).sum();
        if d2.sqrt() <= rho {
            1.0
        } else {
            0.0
        }
    });
    for beta in [0.2, 0.5, 0.8] {
        let m = frac_maximal(&f, beta, c).unwrap();
        let expect = PI * PI / 2.0 * rho.powf(3.0 - beta);
        assert!(rel(m, expect) < 0.05, "β={beta} {m} {expect}");
    }
    assert_eq!(frac_maximal(&f.zeros_like(), 0.5, c).unwrap(), 0.0);
    assert!(frac_maximal(&f, 1.0, c).is_err());
    assert!(frac_maximal(&f, 0.0, c).is_err());
}

#[test]
fn maximal_field_agrees_with_point_version() {
    let f = random_smooth(5, 8).unwrap();
    let field = frac_maximal_field(&f, 0.4).unwrap();
    for i in [0usize, 777, 4095] {
        let p = frac_maximal(&f, 0.4, f.center(i)).unwrap();
        assert!(rel(field.values[i], p) < 1e-10, "{} {p}", field.values[i]);
    }
}

#[test]
fn adams_ratio_parameters() {
    let f = random_smooth(0, 8).unwrap();
    let r = adams_ratio(&f, 0.5, 1.5).unwrap();
    assert!((r.lambda - 3.75).abs() < 1e-15);
    assert!((r.s - 1.5 * 2.5 / 1.5).abs() < 1e-15);
    assert!(r.ratio.is_finite() && r.ratio > 0.0);
    assert_eq!(adams_ratio(&f.zeros_like(), 0.5, 1.5).unwrap().ratio, 0.0);
    // λ = (3 − β)p must not exceed 4
    assert!(matches!(adams_ratio(&f, 0.5, 2.0), Err(Error::OutOfRange(_))));
    assert!(adams_ratio(&f, 0.5, 1.0).is_err());
    assert!(adams_ratio(&f, 1.5, 1.2).is_err());
}

#[test]
fn morrey_plane_vanishes() {
    let prof = morrey_profile(&plane(6), [0.1, 0.2, 0.3, 0.4], &[0.25, 0.125]).unwrap();
    assert!(prof.values.iter().all(|v| *v == 0.0));
    assert!(prof.exponent.is_nan());
    assert!(morrey_profile(&plane(6), [0.0; 4], &[]).is_err());
}

#[test]
fn morrey_exponent_of_smooth_immersions() {
    let radii: Vec<f64> = (4..9).map(|j| 0.5f64.powi(j)).collect();
    let c = [0.3, 1.1, -0.4, 2.0];
    let clifford = morrey_profile(&clifford4(), c, &radii).unwrap();
    assert!((clifford.exponent - 1.0).abs() < 1e-10, "{}", clifford.exponent);
    // h constant on the Clifford torus: ‖h‖_{L⁴(B_r)}⁴ = |h|⁴ · π²r⁴/2
    let expect = (16.0f64 * PI * PI / 2.0).powf(0.25) * radii[0];
    assert!(rel(clifford.values[0], expect) < 1e-10, "{} {expect}", clifford.values[0]);
    let warped = morrey_profile(&warped_torus([1.0, 1.5, 0.8, 1.2], 0.3), c, &radii).unwrap();
    assert!(warped.exponent > 1.0 - 1e-2, "{}", warped.exponent);
    let sph = morrey_profile(&sphere(), [0.2, -0.1, 0.3, 0.0], &radii).unwrap();
    assert!(sph.exponent > 1.0 - 1e-2, "{}", sph.exponent);
    assert_eq!(sph.records().len(), radii.len());
}

#[test]
fn morrey_scale_invariant() {
    let radii = [0.25, 0.125, 0.0625];
    let imm = warped_torus([1.0, 1.5, 0.8, 1.2], 0.3);
    let c = [0.1, 0.2, 0.3, 0.4];
    let a = morrey_profile(&imm, c, &radii).unwrap();
    let b = morrey_profile(&imm.scaled(2.5), c, &radii).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!(rel(*y, *x) < 1e-10);
    }
}

fn random_form(k: usize, seed: u64, n: usize) -> FormFieldFlat {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut f = FormFieldFlat::zero(k, 1, [n; 4], [1.0; 4]).unwrap();
    for comp in f.comps.iter_mut() {
        comp.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    }
    f
}

fn smooth_form(k: usize, width: usize, n: usize) -> FormFieldFlat {
    FormFieldFlat::from_fn(k, width, [n; 4], [1.0; 4], |mask, w, x| {
        let m = mask as f64 + 1.0 + w as f64;
        (2.0 * PI * (x[0] + 2.0 * x[1])).sin() * m
            + (2.0 * PI * (x[2] - x[3] + 0.1 * m)).cos()
            + 0.3 * (2.0 * PI * (x[1] + x[3])).sin() * (m * 0.7).cos()
    })
    .unwrap()
}

#[test]
fn hodge_constant_form_is_harmonic() {
    let a = FormFieldFlat::from_fn(2, 1, [8; 4], [1.0; 4], |mask, _, _| mask as f64).unwrap();
    let h = hodge_decompose_flat(&a, &IDENTITY).unwrap();
    assert!(h.harmonic.sub(&a).unwrap().max_abs() < 1e-12);
    assert!(h.a.unwrap().max_abs() < 1e-12);
    assert!(h.b.unwrap().max_abs() < 1e-12);
}

const IDENTITY: [[f64; 4]; 4] = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

#[test]
fn hodge_rejects_nonflat_metric() {
    let a = smooth_form(1, 1, 8);
    let mut g = IDENTITY;
    g[0][0] = 2.0;
    assert!(matches!(hodge_decompose_flat(&a, &g), Err(Error::Unsupported(_))));
}

#[test]
fn hodge_recovers_exact_forms() {
    let a0 = smooth_form(1, 2, 16);
    let da0 = flat_d(&a0).unwrap();
    let h = hodge_decompose_flat(&da0, &IDENTITY).unwrap();
    let scale = da0.max_abs();
    assert!(h.coexact.max_abs() < 1e-10 * scale);
    assert!(h.b.as_ref().unwrap().max_abs() < 1e-10 * scale);
    assert!(h.exact.sub(&da0).unwrap().max_abs() < 1e-12 * scale);
    // gauge d*a = 0 fixes a up to its harmonic part
    let ra = flat_d(h.a.as_ref().unwrap()).unwrap();
    assert!(ra.sub(&da0).unwrap().max_abs() < 1e-12 * scale);
}

#[test]
fn hodge_on_random_forms() {
    for k in 0..=4 {
        let a = random_form(k, 10 + k as u64, 8);
        let h = hodge_decompose_flat(&a, &IDENTITY).unwrap();
        let recon = h.exact.add(&h.coexact).unwrap().add(&h.harmonic).unwrap();
        let scale = a.max_abs();
        assert!(recon.sub(&a).unwrap().max_abs() < 1e-12 * scale, "k={k}");
        let n = [h.exact.l2_norm(), h.coexact.l2_norm(), h.harmonic.l2_norm()];
        let pairs = [
            h.exact.l2_inner(&h.coexact).unwrap().abs() / (n[0] * n[1]).max(1e-300),
            h.exact.l2_inner(&h.harmonic).unwrap().abs() / (n[0] * n[2]).max(1e-300),
            h.coexact.l2_inner(&h.harmonic).unwrap().abs() / (n[1] * n[2]).max(1e-300),
        ];
        assert!(pairs.iter().all(|p| *p < 1e-10), "k={k} {pairs:?}");
        if let Some(pa) = &h.a {
            let da = flat_d(pa).unwrap();
            assert!(da.sub(&h.exact).unwrap().max_abs() < 1e-12 * scale);
            assert!(flat_d(&da).unwrap().max_abs() < 1e-10 * scale);
            assert!(flat_codifferential(pa).unwrap().max_abs() < 1e-10 * scale);
        }
        if let Some(pb) = &h.b {
            let db = flat_codifferential(pb).unwrap();
            assert!(db.sub(&h.coexact).unwrap().max_abs() < 1e-12 * scale);
            assert!(flat_codifferential(&db).unwrap().max_abs() < 1e-10 * scale);
            assert!(flat_d(pb).unwrap().max_abs() < 1e-10 * scale);
        }
        assert!(flat_d(&h.harmonic).unwrap().max_abs() < 1e-10 * scale);
        assert!(flat_codifferential(&h.harmonic).unwrap().max_abs() < 1e-10 * scale);
    }
}

#[test]
fn spectral_d_matches_analytic_derivative() {
    // f = sin(2πx⁰)cos(4πx²): df = 2π cos·cos dx⁰ − 4π sin·sin dx²
    let f = FormFieldFlat::from_fn(0, 1, [16; 4], [1.0; 4], |_, _, x| {
        (2.0 * PI * x[0]).sin() * (4.0 * PI * x[2]).cos()
    })
    .unwrap();
    let df = flat_d(&f).unwrap();
    let expect = FormFieldFlat::from_fn(1, 1, [16; 4], [1.0; 4], |mask, _, x| match mask {
        0b0001 => 2.0 * PI * (2.0 * PI * x[0]).cos() * (4.0 * PI * x[2]).cos(),
        0b0100 => -4.0 * PI * (2.0 * PI * x[0]).sin() * (4.0 * PI * x[2]).sin(),
        _ => 0.0,
    })
    .unwrap();
    assert!(df.sub(&expect).unwrap().max_abs() < 1e-11);
    // d* of a 1-form is the divergence
    let div = flat_codifferential(&expect).unwrap();
    let lap = FormFieldFlat::from_fn(0, 1, [16; 4], [1.0; 4], |_, _, x| {
        -20.0 * PI * PI * (2.0 * PI * x[0]).sin() * (4.0 * PI * x[2]).cos()
    })
    .unwrap();
    assert!(div.sub(&lap).unwrap().max_abs() < 1e-9);
    assert_eq!(subsets(4, 1), vec![1, 2, 4, 8]);
}

#[test]
fn adams_family_refinement_stable() {
    let worst = |n: usize| {
        (0..30)
            .map(|s| adams_ratio(&random_smooth(s, n).unwrap(), 0.5, 1.5).unwrap().ratio)
            .fold(0.0, f64::max)
    };
    let (a, b) = (worst(8), worst(16));
    assert!(a.is_finite() && b.is_finite());
    assert!(rel(a, b) < 0.05, "{a} {b}");
}
