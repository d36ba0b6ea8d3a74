//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! `acceptance_criteria` evaluates all ten criteria and asserts the ones the
//! implementation is expected to meet. Criteria 7 and 8 are evaluated against
//! the operators exactly as displayed and are known to fail; their strict
//! forms are the ignored tests at the end of this file, and running them with
//! `--ignored` shows the failure.
//!
//! Run with `cargo test -p willmore4 --test acceptance`.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use willmore4::analysis::{adams_ratio, hodge_decompose_flat, lorentz_norm, random_smooth, Flavor, FormFieldFlat};
use willmore4::energies::*;
use willmore4::flow::{clifford_with_noise, descend, FlowOptions, FlowProblem};
use willmore4::geometry::{frame, MetricField};
use willmore4::immersions::*;
use willmore4::intrinsic::*;
use willmore4::jets::Jet;
use willmore4::quadrature::Chart;
use willmore4::variational::*;

/// Criteria expected to fail with the literal operators.
const KNOWN_RED: [usize; 2] = [7, 8];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn vec_rel(a: &[f64], b: &[f64]) -> f64 {
    let d = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let s = a.iter().chain(b).map(|x| x.abs()).fold(0.0, f64::max);
    if d == 0.0 {
        0.0
    } else {
        d / s
    }
}

fn criterion_1() -> Verdict {
    let t = Instant::now();
    let spec = ImmersionSpec::new(clifford4(), Chart::periodic(16)).unwrap();
    let r = integrate(&spec, [0.0; 4]).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let err = rel(r.e_a, 3.0 * PI.powi(4));
    verdict(
        err <= 1e-9 && secs <= 60.0,
        format!("E_A = {:.12} rel err {err:.2e} (≤ 1e-9), {secs:.1} s (≤ 60 s)", r.e_a),
    )
}

fn criterion_2() -> Verdict {
    let spec = ImmersionSpec::new(sphere(), Chart::sphere(16)).unwrap();
    let r = integrate(&spec, [0.0; 4]).unwrap();
    let err = rel(r.e_a, 8.0 * PI * PI);
    verdict(err <= 1e-6, format!("E_A = {:.10} rel err {err:.2e} (≤ 1e-6)", r.e_a))
}

fn criterion_3() -> Verdict {
    let spec = ImmersionSpec::new(clifford4(), Chart::periodic(16)).unwrap();
    let mut center = vec![0.0; 8];
    center[0] = 5.0;
    let transforms = [
        Conformal::Dilation(2.0),
        Conformal::Linear(random_rotation(5, 8)),
        Conformal::Translation(vec![0.3, -1.0, 2.0, 0.0, 0.5, 0.1, 0.0, -0.7]),
        // the image lies on the sphere of radius 2, so the center is 3 away
        Conformal::Inversion { center, radius: 1.5 },
    ];
    let exact = 3.0 * PI.powi(4);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for t in &transforms {
        let r = conformal_invariance_check(&spec, t, 3.0).unwrap();
        let e = rel(r.after.e_a, exact);
        worst = worst.max(e);
        parts.push(format!("{} {e:.1e}", t.id()));
    }
    verdict(worst <= 1e-5, format!("{} (≤ 1e-5)", parts.join(", ")))
}

fn criterion_4() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for seed in 0..250 {
        let imm = PolynomialGraph::random(seed, 5, 3, 0.5).immersion("graph");
        for x in random_points(seed + 1000, 4, 0.5) {
            let q = density(&PointDerivs::from_point(&imm.point(x, 3).unwrap()).unwrap())
                .unwrap()
                .quartics;
            worst = worst
                .max((q[0] - q[1]).abs() / q[0].abs().max(f64::MIN_POSITIVE))
                .max((q[2] - q[3]).abs() / q[2].abs().max(f64::MIN_POSITIVE));
            count += 1;
        }
    }
    verdict(
        count == 1000 && worst <= 1e-12,
        format!("{count} codim-1 jets, max pairwise rel err {worst:.2e} (≤ 1e-12)"),
    )
}

fn criterion_5() -> Verdict {
    let mut worst = [0.0f64; IDENTITIES.len()];
    for seed in 0..100 {
        let imm = random_polynomial(seed);
        for x in random_points(seed + 500, 3, 0.3) {
            let p = imm.point(x, 4).unwrap();
            for (w, name) in worst.iter_mut().zip(IDENTITIES) {
                *w = w.max(identity_at(name, &p).unwrap());
            }
        }
    }
    let max = worst.iter().copied().fold(0.0, f64::max);
    let parts: Vec<_> = IDENTITIES.iter().zip(&worst).map(|(n, w)| format!("{n} {w:.1e}")).collect();
    verdict(
        max <= 1e-8,
        format!("100 immersions in ℝ⁶: {} (≤ 1e-8)", parts.join(", ")),
    )
}

fn criterion_6() -> Verdict {
    let (mut normal, mut equiv, mut homog, mut minimal): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    let lambda: f64 = 1.7;
    for seed in 0..5 {
        let imm = random_polynomial(seed);
        let rot = random_rotation(seed + 50, 6);
        let turned = imm.transformed(&Conformal::Linear(rot.clone()));
        let scaled = imm.scaled(lambda);
        for x in random_points(seed + 60, 2, 0.3) {
            let p = imm.point(x, 6).unwrap();
            let el = willmore_operator(&p).unwrap();
            let t = tangential_part(&frame(&p.truncated(3)).unwrap(), &el.w);
            normal = normal.max(t.iter().map(|v| v * v).sum::<f64>().sqrt() / el.norm());
            let b = willmore_operator(&turned.point(x, 6).unwrap()).unwrap();
            let rw: Vec<f64> = rot.iter().map(|row| row.iter().zip(&el.w).map(|(a, v)| a * v).sum()).collect();
            equiv = equiv.max(vec_rel(&rw, &b.w));
            let s = willmore_operator(&scaled.point(x, 6).unwrap()).unwrap();
            let expected: Vec<f64> = el.w.iter().map(|v| v * lambda.powi(-5)).collect();
            homog = homog.max(vec_rel(&expected, &s.w));
        }
    }
    for x in random_points(70, 4, 0.5) {
        let el = willmore_operator(&catenoid_product().point(x, 6).unwrap()).unwrap();
        for t in &el.terms {
            minimal = t.iter().map(|v| v.abs()).fold(minimal, f64::max);
        }
    }
    verdict(
        normal <= 1e-8 && equiv <= 1e-10 && homog <= 1e-9 && minimal <= 1e-12,
        format!(
            "tangential {normal:.1e} (≤ 1e-8), rotation {equiv:.1e} (≤ 1e-10), degree −5 {homog:.1e} (≤ 1e-9), minimal product termwise {minimal:.1e}"
        ),
    )
}

fn bases() -> Vec<Immersion> {
    vec![
        product_torus([1.0, 1.5, 0.8, 1.2]),
        warped_torus([1.0, 1.5, 0.8, 1.2], 0.2),
    ]
}

/// Variations in the first two circles depending on (x¹, x²) only.
fn variations() -> Vec<Immersion> {
    (0..5)
        .map(|k| {
            Immersion::new(format!("phi{k}"), 8, move |x| {
                let o = x[0].order();
                let one = Jet::constant(o, 1.0);
                let mut v = vec![Jet::zero(o); 8];
                let (c1, s1, c2, s2) = (x[0].cos(), x[0].sin(), x[1].cos(), x[1].sin());
                match k {
                    0 => {
                        v[0] = c1;
                        v[1] = s1;
                    }
                    1 => {
                        let a = &one.scale(0.5) + &c2;
                        v[0] = &a * &c1;
                        v[1] = &a * &s1;
                    }
                    2 => {
                        let a = &one + &s1.scale(0.3);
                        v[2] = &a * &c2;
                        v[3] = &a * &s2;
                    }
                    3 => {
                        let a = &c2 * &c2;
                        v[0] = &a * &c1;
                        v[1] = &(&a * &s1) + &c1.scale(0.2);
                    }
                    _ => {
                        v[0] = (&c1 * &s2).scale(0.7);
                        v[1] = &(&s1 * &c2) + &c1;
                        v[2] = (&c2 * &c1).scale(0.4);
                        v[3] = s2.scale(0.3);
                    }
                }
                Ok(v)
            })
        })
        .collect()
}

struct Consistency {
    constants: Vec<f64>,
    orders: Vec<f64>,
}

impl Consistency {
    fn spread(&self) -> f64 {
        let c0 = self.constants[0];
        self.constants.iter().map(|c| (c - c0).abs() / c0.abs()).fold(0.0, f64::max)
    }

    fn order_error(&self) -> f64 {
        self.orders.iter().map(|p| (p - 2.0).abs()).fold(0.0, f64::max)
    }
}

fn consistency(weights: [f64; 11]) -> Consistency {
    let opts = ConsistencyOptions {
        invariant_axes: [false, false, true, true],
        term_weights: weights,
        ..ConsistencyOptions::default()
    };
    let mut out = Consistency {
        constants: Vec::new(),
        orders: Vec::new(),
    };
    for base in bases() {
        let spec = ImmersionSpec::new(base, Chart::PeriodicBox { n: [16, 16, 8, 8] }).unwrap();
        for phi in variations() {
            let r = variational_consistency(&spec, &phi, &opts).unwrap();
            out.constants.push(r.extrapolated_ratio);
            out.orders.push(r.observed_order);
        }
    }
    out
}

fn sphere_criticality() -> f64 {
    random_points(2, 5, 0.8)
        .into_iter()
        .map(|x| {
            let el = willmore_operator(&sphere().point(x, 6).unwrap()).unwrap();
            el.norm() / el.scale()
        })
        .fold(0.0, f64::max)
}

fn criterion_7() -> Verdict {
    let literal = consistency(LITERAL_WEIGHTS);
    let fitted = consistency(FITTED_WEIGHTS);
    let sphere = sphere_criticality();
    let c_min = literal.constants.iter().copied().fold(f64::INFINITY, f64::min);
    let c_max = literal.constants.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    verdict(
        literal.spread() <= 1e-3 && literal.order_error() < 0.05 && sphere <= 1e-6,
        format!(
            "literal W: c ∈ [{c_min:.4}, {c_max:.4}], spread {:.1e} (≤ 1e-3), |order − 2| {:.1e}; W(S⁴)/scale {sphere:.1e} (≤ 1e-6); data: fitted term-4 weight gives c = {:.6}, spread {:.1e}",
            literal.spread(),
            literal.order_error(),
            fitted.constants[0],
            fitted.spread()
        ),
    )
}

fn coords(order: usize, base: [f64; 4]) -> [Jet; 4] {
    std::array::from_fn(|i| Jet::variable(order, i, base[i]))
}

fn conformal_factor(seed: u64, base: [f64; 4]) -> Jet {
    let x = coords(4, base);
    let a = 0.1 + 0.05 * seed as f64;
    &(&x[0].sin().scale(a) + &(&x[1] * &x[2]).scale(0.2)) + &(&x[3].cos() * &x[(seed % 4) as usize]).scale(0.25)
}

fn test_function(base: [f64; 4]) -> Jet {
    let x = coords(4, base);
    &(&x[0] * &x[1]).exp() + &(&(&x[2] * &x[2]) * &x[3])
}

struct Intrinsic {
    q: f64,
    covariance: f64,
    equation_literal: f64,
    equation_positive: f64,
    bach: f64,
}

fn intrinsic_measurements() -> Intrinsic {
    let mut m = Intrinsic {
        q: 0.0,
        covariance: 0.0,
        equation_literal: 0.0,
        equation_positive: 0.0,
        bach: 0.0,
    };
    for b in random_points(1, 4, 0.8) {
        let g = round_sphere_metric(b, 4);
        m.q = m.q.max((q_curvature(&g).unwrap() - 6.0).abs());
        m.bach = m.bach.max(bach_tensor(&g).unwrap().norm);
    }
    for seed in 0..10 {
        let b = random_points(seed + 30, 1, 0.5)[0];
        let g0 = MetricField::flat(b, 4);
        let lam = conformal_factor(seed, b);
        let u = test_function(b);
        m.covariance = m
            .covariance
            .max(paneitz_covariance_residual(&g0, &lam, &u, PaneitzSign::Literal).unwrap());
        m.equation_literal = m
            .equation_literal
            .max(paneitz_equation_residual(&g0, &lam, PaneitzSign::Literal).unwrap());
        m.equation_positive = m
            .equation_positive
            .max(paneitz_equation_residual(&g0, &lam, PaneitzSign::Positive).unwrap());
        m.bach = m.bach.max(bach_tensor(&g0.conformal(&lam)).unwrap().norm);
    }
    m
}

fn criterion_8() -> Verdict {
    let m = intrinsic_measurements();
    verdict(
        m.q <= 1e-8 && m.covariance <= 1e-7 && m.equation_literal <= 1e-6 && m.bach <= 1e-8,
        format!(
            "|Q(S⁴) − 6| {:.1e} (≤ 1e-8), covariance {:.1e} (≤ 1e-7), equation (displayed sign) {:.1e} (≤ 1e-6), Bach {:.1e} (≤ 1e-8); data: equation with opposite sign {:.1e}",
            m.q, m.covariance, m.equation_literal, m.bach, m.equation_positive
        ),
    )
}

fn random_two_form(seed: u64) -> FormFieldFlat {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut f = FormFieldFlat::zero(2, 1, [8; 4], [1.0; 4]).unwrap();
    for comp in f.comps.iter_mut() {
        comp.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    }
    f
}

fn adams_family_max(n: usize) -> f64 {
    (0..30)
        .map(|s| adams_ratio(&random_smooth(s, n).unwrap(), 0.5, 1.5).unwrap().ratio)
        .fold(0.0, f64::max)
}

fn criterion_9() -> Verdict {
    let mut lorentz: f64 = 0.0;
    for seed in 0..10 {
        let f = random_smooth(seed, 8).unwrap();
        for p in [1.5, 2.0, 3.0, 4.0] {
            let lp = f.lp_norm(p);
            lorentz = lorentz.max(rel(lorentz_norm(&f, p, p, Flavor::Star).unwrap(), lp));
        }
    }
    let identity: [[f64; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| if i == j { 1.0 } else { 0.0 }));
    let (mut recon, mut orth): (f64, f64) = (0.0, 0.0);
    for seed in 0..5 {
        let a = random_two_form(seed);
        let h = hodge_decompose_flat(&a, &identity).unwrap();
        let sum = h.exact.add(&h.coexact).unwrap().add(&h.harmonic).unwrap();
        recon = recon.max(sum.sub(&a).unwrap().max_abs() / a.max_abs());
        let n2 = a.l2_norm().powi(2);
        for (x, y) in [(&h.exact, &h.coexact), (&h.exact, &h.harmonic), (&h.coexact, &h.harmonic)] {
            orth = orth.max(x.l2_inner(y).unwrap().abs() / n2);
        }
    }
    let (a16, a32) = (adams_family_max(16), adams_family_max(32));
    let change = rel(a16, a32);
    verdict(
        lorentz <= 1e-12 && recon <= 1e-12 && orth <= 1e-10 && a16.is_finite() && a32.is_finite() && change < 0.05,
        format!(
            "L^(p,p) vs L^p {lorentz:.1e} (≤ 1e-12), Hodge reconstruction {recon:.1e} (≤ 1e-12), orthogonality {orth:.1e} (≤ 1e-10), Adams max {a16:.4} (16⁴) → {a32:.4} (32⁴), change {:.1}% (< 5%)",
            100.0 * change
        ),
    )
}

fn criterion_10() -> Verdict {
    let t = Instant::now();
    let family = clifford_with_noise(2, 0.05, 24, 0).unwrap();
    let problem = FlowProblem::new(family, Chart::periodic(12), [0.1; 4]).unwrap();
    let opts = FlowOptions {
        max_steps: 50,
        ..FlowOptions::default()
    };
    let trace = descend(&problem, &opts).unwrap();
    let replay = descend(
        &problem,
        &FlowOptions {
            max_steps: 3,
            ..opts.clone()
        },
    )
    .unwrap();
    let secs = t.elapsed().as_secs_f64();
    let replayed = replay.steps[..] == trace.steps[..3] && replay.records()[..4] == trace.records()[..4];
    let decreasing = trace.strictly_decreasing();
    verdict(
        trace.steps.len() >= 50 && decreasing && replayed && secs <= 600.0,
        format!(
            "{} accepted steps, strictly decreasing {decreasing}, energy {:.6} → {:.6}, replay of first 3 steps identical {replayed}, {secs:.0} s (≤ 600 s)",
            trace.steps.len(),
            trace.initial_energy,
            trace.steps.last().map_or(trace.initial_energy, |s| s.energy),
        ),
    )
}

const CRITERIA: [fn() -> Verdict; 10] = [
    criterion_1,
    criterion_2,
    criterion_3,
    criterion_4,
    criterion_5,
    criterion_6,
    criterion_7,
    criterion_8,
    criterion_9,
    criterion_10,
];

/// Written to stderr directly so the lines appear even when the harness
/// captures output of passing tests.
fn report(line: &str) {
    let _ = writeln!(std::io::stderr(), "{line}");
}

#[test]
fn acceptance_criteria() {
    let mut unexpected = Vec::new();
    for (i, c) in CRITERIA.iter().enumerate() {
        let n = i + 1;
        let v = c();
        report(&format!("criterion {n:>2}: {} {}", if v.pass { "PASS" } else { "FAIL" }, v.detail));
        if !v.pass && !KNOWN_RED.contains(&n) {
            unexpected.push(n);
        }
    }
    assert!(unexpected.is_empty(), "criteria failed: {unexpected:?}");
}

#[test]
#[ignore = "red: the displayed coefficient of π_n∇_j(H∇^j|H|²) in W is twice the energy-consistent one"]
fn criterion_7_strict() {
    let v = criterion_7();
    report(&format!("criterion  7 (strict): {}", v.detail));
    assert!(v.pass);
}

#[test]
#[ignore = "red: the Paneitz equation holds only for the operator with the opposite overall sign"]
fn criterion_8_strict() {
    let v = criterion_8();
    report(&format!("criterion  8 (strict): {}", v.detail));
    assert!(v.pass);
}
