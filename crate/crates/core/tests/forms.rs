//! Form calculus against a brute-force oracle that expands every component
//! into a full antisymmetric tensor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use willmore4::forms::*;
use willmore4::geometry::{frame, MetricField, PAIRS};
use willmore4::immersions::clifford4;
use willmore4::jets::{Jet, MultiIndex};

fn perms(n: usize) -> Vec<(Vec<usize>, f64)> {
    if n == 0 {
        return vec![(vec![], 1.0)];
    }
    let mut out = Vec::new();
    for (p, s) in perms(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            // moving the new largest element from the end to `pos`
            let sign = if (p.len() - pos) % 2 == 0 { s } else { -s };
            out.push((q, sign));
        }
    }
    out
}

fn fact(n: usize) -> f64 {
    (1..=n).product::<usize>() as f64
}

fn tuples(base: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..base).map(move |i| {
                    let mut u = t.clone();
                    u.push(i);
                    u
                })
            })
            .collect();
    }
    out
}

fn levi(idx: &[usize]) -> f64 {
    match sort_sign(idx) {
        Some((_, s)) => s,
        None => 0.0,
    }
}

/// Full (uncompressed) antisymmetric tensor with parameter and ambient slots.
#[derive(Clone)]
struct Full {
    p: usize,
    q: usize,
    m: usize,
    data: std::collections::HashMap<(Vec<usize>, Vec<usize>), f64>,
}

impl Full {
    fn from_form(f: &MultivectorForm) -> Full {
        let mut data = std::collections::HashMap::new();
        for pi in tuples(4, f.p) {
            for ai in tuples(f.m, f.q) {
                data.insert((pi.clone(), ai.clone()), f.get(&pi, &ai).value());
            }
        }
        Full {
            p: f.p,
            q: f.q,
            m: f.m,
            data,
        }
    }

    fn at(&self, pi: &[usize], ai: &[usize]) -> f64 {
        self.data[&(pi.to_vec(), ai.to_vec())]
    }

    fn max_diff(&self, other: &Full) -> (f64, f64) {
        let mut d: f64 = 0.0;
        let mut s: f64 = 0.0;
        for (k, v) in &self.data {
            d = d.max((v - other.data[k]).abs());
            s = s.max(v.abs());
        }
        (d, s)
    }
}

/// Ambient product of two full ambient tuples' values, as a map over output tuples.
fn ambient_full(
    m: usize,
    qa: usize,
    qb: usize,
    op: AmbientProduct,
    a: &dyn Fn(&[usize]) -> f64,
    b: &dyn Fn(&[usize]) -> f64,
) -> Vec<(Vec<usize>, f64)> {
    match op {
        AmbientProduct::Wedge => {
            let q = qa + qb;
            tuples(m, q)
                .into_iter()
                .map(|t| {
                    let mut s = 0.0;
                    for (perm, sg) in perms(q) {
                        let pt: Vec<usize> = perm.iter().map(|&i| t[i]).collect();
                        s += sg * a(&pt[..qa]) * b(&pt[qa..]);
                    }
                    (t, s / (fact(qa) * fact(qb)))
                })
                .collect()
        }
        AmbientProduct::Dot => {
            if qa == 0 || qb == 0 {
                let q = qa.max(qb);
                tuples(m, q)
                    .into_iter()
                    .map(|t| {
                        let v = if qa == 0 { a(&[]) * b(&t) } else { a(&t) * b(&[]) };
                        (t, v)
                    })
                    .collect()
            } else {
                let s: f64 = tuples(m, qa).iter().map(|t| a(t) * b(t)).sum();
                vec![(vec![], s / fact(qa))]
            }
        }
    }
}

fn out_q(qa: usize, qb: usize, op: AmbientProduct) -> usize {
    match op {
        AmbientProduct::Wedge => qa + qb,
        AmbientProduct::Dot => {
            if qa == 0 || qb == 0 {
                qa.max(qb)
            } else {
                0
            }
        }
    }
}

fn full_wedge(a: &Full, b: &Full, op: AmbientProduct) -> Full {
    let p = a.p + b.p;
    let mut data = std::collections::HashMap::new();
    for t in tuples(4, p) {
        for (perm, sg) in perms(p) {
            let pt: Vec<usize> = perm.iter().map(|&i| t[i]).collect();
            let (i1, i2) = (pt[..a.p].to_vec(), pt[a.p..].to_vec());
            let vals = ambient_full(a.m, a.q, b.q, op, &|x| a.at(&i1, x), &|x| b.at(&i2, x));
            for (amb, v) in vals {
                *data.entry((t.clone(), amb)).or_insert(0.0) += sg * v / (fact(a.p) * fact(b.p));
            }
        }
    }
    Full {
        p,
        q: out_q(a.q, b.q, op),
        m: a.m,
        data,
    }
}

fn raise_first(a: &Full, ginv: &[[f64; 4]; 4], r: usize, up: &[usize], rest: &[usize], amb: &[usize]) -> f64 {
    // A^{up}_{rest}
    let mut s = 0.0;
    for k in tuples(4, r) {
        let mut w = 1.0;
        for (x, y) in up.iter().zip(&k) {
            w *= ginv[*x][*y];
        }
        if w == 0.0 {
            continue;
        }
        let mut idx = k.clone();
        idx.extend_from_slice(rest);
        s += w * a.at(&idx, amb);
    }
    s
}

fn full_interior(a: &Full, b: &Full, ginv: &[[f64; 4]; 4], op: AmbientProduct) -> Full {
    let r = b.p;
    let p = a.p - r;
    let mut data = std::collections::HashMap::new();
    for j in tuples(4, p) {
        for i in tuples(4, r) {
            let vals = ambient_full(
                a.m,
                a.q,
                b.q,
                op,
                &|x| raise_first(a, ginv, r, &i, &j, x),
                &|x| b.at(&i, x),
            );
            for (amb, v) in vals {
                *data.entry((j.clone(), amb)).or_insert(0.0) += v / fact(r);
            }
        }
    }
    Full {
        p,
        q: out_q(a.q, b.q, op),
        m: a.m,
        data,
    }
}

fn full_first_order(a: &Full, b: &Full, ginv: &[[f64; 4]; 4], op: AmbientProduct) -> Full {
    let mut data = std::collections::HashMap::new();
    for j in tuples(4, b.p) {
        for s in 0..b.p {
            for i in 0..4 {
                let mut moved = j.clone();
                moved[s] = i;
                let vals = ambient_full(
                    a.m,
                    a.q,
                    b.q,
                    op,
                    &|x| raise_first(a, ginv, 1, &[i], &[j[s]], x),
                    &|x| b.at(&moved, x),
                );
                for (amb, v) in vals {
                    *data.entry((j.clone(), amb)).or_insert(0.0) += v;
                }
            }
        }
    }
    if b.p == 0 {
        for amb in tuples(a.m, out_q(a.q, b.q, op)) {
            data.insert((vec![], amb), 0.0);
        }
    }
    Full {
        p: b.p,
        q: out_q(a.q, b.q, op),
        m: a.m,
        data,
    }
}

fn lower(f: &Full, g: &[[f64; 4]; 4]) -> Full {
    let mut data = std::collections::HashMap::new();
    for k in tuples(4, f.p) {
        for amb in tuples(f.m, f.q) {
            let mut s = 0.0;
            for i in tuples(4, f.p) {
                let mut w = 1.0;
                for (x, y) in k.iter().zip(&i) {
                    w *= g[*x][*y];
                }
                s += w * f.at(&i, &amb);
            }
            data.insert((k.clone(), amb), s);
        }
    }
    Full { data, ..f.clone() }
}

fn full_odot(a: &Full, b: &Full, g: &[[f64; 4]; 4], ginv: &[[f64; 4]; 4], op: AmbientProduct) -> Full {
    let q = out_q(a.q, b.q, op);
    let mut data = std::collections::HashMap::new();
    for t in tuples(4, 2) {
        let (i1, i2) = (t[0], t[1]);
        let mut acc: std::collections::HashMap<Vec<usize>, f64> = Default::default();
        for j in 0..4 {
            // A^{i2 j} B_j^{i1} − A^{i1 j} B_j^{i2}
            for (first, second, sign) in [(i2, i1, 1.0), (i1, i2, -1.0)] {
                let aup = |x: &[usize]| {
                    let mut s = 0.0;
                    for k in 0..4 {
                        for l in 0..4 {
                            s += ginv[first][k] * ginv[j][l] * a.at(&[k, l], x);
                        }
                    }
                    s
                };
                let bmix = |x: &[usize]| {
                    let mut s = 0.0;
                    for k in 0..4 {
                        s += b.at(&[j, k], x) * ginv[k][second];
                    }
                    s
                };
                for (amb, v) in ambient_full(a.m, a.q, b.q, op, &aup, &bmix) {
                    *acc.entry(amb).or_insert(0.0) += sign * v;
                }
            }
        }
        for (amb, v) in acc {
            data.insert((t.clone(), amb), v);
        }
    }
    lower(
        &Full {
            p: 2,
            q,
            m: a.m,
            data,
        },
        g,
    )
}

fn full_hodge(a: &Full, g: &[[f64; 4]; 4], vol: f64) -> Full {
    let mut data = std::collections::HashMap::new();
    for i in tuples(4, 4 - a.p) {
        for amb in tuples(a.m, a.q) {
            let mut s = 0.0;
            for j in tuples(4, a.p) {
                let mut idx = i.clone();
                idx.extend_from_slice(&j);
                s += levi(&idx) * a.at(&j, &amb);
            }
            data.insert((i.clone(), amb), s / (vol * fact(a.p)));
        }
    }
    lower(
        &Full {
            p: 4 - a.p,
            q: a.q,
            m: a.m,
            data,
        },
        g,
    )
}

fn full_inner(a: &Full, b: &Full, ginv: &[[f64; 4]; 4]) -> f64 {
    let mut s = 0.0;
    for i in tuples(4, a.p) {
        for amb in tuples(a.m, a.q) {
            s += a.at(&i, &amb) * raise_first(b, ginv, b.p, &i, &[], &amb);
        }
    }
    s / (fact(a.p) * fact(a.q))
}

fn random_form(rng: &mut ChaCha8Rng, p: usize, q: usize, m: usize) -> MultivectorForm {
    MultivectorForm::from_fn(p, q, m, |_, _| Jet::constant(0, rng.gen_range(-1.0..1.0)))
}

fn random_metric(rng: &mut ChaCha8Rng) -> [[f64; 4]; 4] {
    let mut a = [[0.0; 4]; 4];
    for row in a.iter_mut() {
        for v in row.iter_mut() {
            *v = rng.gen_range(-0.5..0.5);
        }
    }
    let mut g = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            g[i][j] = (0..4).map(|k| a[i][k] * a[j][k]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
        }
    }
    g
}

fn inverse(g: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let met = FormMetric::constant(*g).unwrap();
    let mut out = [[0.0; 4]; 4];
    for (q, &(i, j)) in PAIRS.iter().enumerate() {
        out[i][j] = met.ginv[q].value();
        out[j][i] = met.ginv[q].value();
    }
    out
}

fn assert_close(name: &str, prod: &MultivectorForm, oracle: &Full, tol: f64) {
    let (d, s) = oracle.max_diff(&Full::from_form(prod));
    assert!(d <= tol * s.max(1.0), "{name}: diff {d:e} scale {s:e}");
}

#[test]
fn pairings_agree_with_full_tensor_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..6 {
        let m = 5 + trial % 2;
        let g = random_metric(&mut rng);
        let gi = inverse(&g);
        let met = FormMetric::constant(g).unwrap();
        let vol = met.volume.value();
        for pa in 0..=4usize {
            for qa in 0..=(4 - pa).min(2) {
                let a = random_form(&mut rng, pa, qa, m);
                let fa = Full::from_form(&a);

                assert_close("hodge", &hodge_star(&a, &met).unwrap(), &full_hodge(&fa, &g, vol), 1e-12);
                let a2 = random_form(&mut rng, pa, qa, m);
                let ip = inner_product(&a, &a2, &met).unwrap().value();
                let ip_full = full_inner(&fa, &Full::from_form(&a2), &gi);
                assert!((ip - ip_full).abs() <= 1e-12 * ip_full.abs().max(1.0));

                for pb in 0..=(4 - pa) {
                    for qb in 0..=(4 - pa - pb).min(2) {
                        if pa + qa + pb + qb > 4 {
                            continue;
                        }
                        let b = random_form(&mut rng, pb, qb, m);
                        let fb = Full::from_form(&b);
                        for op in [AmbientProduct::Wedge, AmbientProduct::Dot] {
                            if op == AmbientProduct::Dot && qa != qb && qa * qb != 0 {
                                assert!(wedge_param(&a, &b, op).is_err());
                                continue;
                            }
                            assert_close(
                                "wedge",
                                &wedge_param(&a, &b, op).unwrap(),
                                &full_wedge(&fa, &fb, op),
                                1e-12,
                            );
                            if pb <= pa {
                                assert_close(
                                    "interior",
                                    &interior_mult(&a, &b, &met, op).unwrap(),
                                    &full_interior(&fa, &fb, &gi, op),
                                    1e-12,
                                );
                            }
                            if pa == 2 {
                                assert_close(
                                    "first-order",
                                    &first_order_contraction(&a, &b, &met, op).unwrap(),
                                    &full_first_order(&fa, &fb, &gi, op),
                                    1e-12,
                                );
                            }
                            if pa == 2 && pb == 2 {
                                assert_close(
                                    "odot",
                                    &odot(&a, &b, &met, op).unwrap(),
                                    &full_odot(&fa, &fb, &g, &gi, op),
                                    1e-12,
                                );
                            }
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn inner_product_is_symmetric_and_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let met = FormMetric::constant(random_metric(&mut rng)).unwrap();
    for p in 0..=4 {
        let a = random_form(&mut rng, p, 1, 6);
        let b = random_form(&mut rng, p, 1, 6);
        let ab = inner_product(&a, &b, &met).unwrap().value();
        let ba = inner_product(&b, &a, &met).unwrap().value();
        assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0));
        assert!(inner_product(&a, &a, &met).unwrap().value() >= 0.0);
    }
}

#[test]
fn double_star_sign() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let met = FormMetric::constant(random_metric(&mut rng)).unwrap();
    for p in 0..=4usize {
        let a = random_form(&mut rng, p, 1, 5);
        let ss = hodge_star(&hodge_star(&a, &met).unwrap(), &met).unwrap();
        let sign = if (p * (4 - p)) % 2 == 0 { 1.0 } else { -1.0 };
        for (x, y) in ss.comps.iter().zip(&a.comps) {
            assert!((x.value() - sign * y.value()).abs() < 1e-12);
        }
    }
}

#[test]
fn wedge_component_convention() {
    let a = MultivectorForm::scalar_form(1, 5, |i| Jet::constant(0, [1.0, 2.0, 3.0, 4.0][i[0]]));
    let b = MultivectorForm::scalar_form(1, 5, |i| Jet::constant(0, [-1.0, 0.5, 2.0, 1.0][i[0]]));
    let ab = wedge_param(&a, &b, AmbientProduct::Dot).unwrap();
    assert_eq!(ab.get(&[0, 1], &[]).value(), 1.0 * 0.5 - 2.0 * -1.0);
}

#[test]
fn first_order_contraction_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let met = FormMetric::constant(random_metric(&mut rng)).unwrap();
    let a = random_form(&mut rng, 2, 0, 5);
    let s = random_form(&mut rng, 0, 0, 5);
    let r = first_order_contraction(&a, &s, &met, AmbientProduct::Dot).unwrap();
    assert!(r.comps.iter().all(|c| c.value() == 0.0));
    let b = random_form(&mut rng, 1, 0, 5);
    let x = first_order_contraction(&a, &b, &met, AmbientProduct::Dot).unwrap();
    let y = interior_mult(&a, &b, &met, AmbientProduct::Dot).unwrap();
    for (u, v) in x.comps.iter().zip(&y.comps) {
        assert!((u.value() - v.value()).abs() < 1e-14);
    }
    assert!(first_order_contraction(&b, &b, &met, AmbientProduct::Dot).is_err());
}

#[test]
fn first_order_contraction_leibniz() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let met = FormMetric::constant(random_metric(&mut rng)).unwrap();
    let a = random_form(&mut rng, 2, 0, 5);
    for (pb, pc) in [(1, 1), (1, 2), (2, 1), (1, 3)] {
        let b = random_form(&mut rng, pb, 0, 5);
        let c = random_form(&mut rng, pc, 0, 5);
        let op = AmbientProduct::Dot;
        let bc = wedge_param(&b, &c, op).unwrap();
        let lhs = first_order_contraction(&a, &bc, &met, op).unwrap();
        let t1 = wedge_param(&first_order_contraction(&a, &b, &met, op).unwrap(), &c, op).unwrap();
        let t2 = wedge_param(&first_order_contraction(&a, &c, &met, op).unwrap(), &b, op).unwrap();
        let sign = if (pb * pc) % 2 == 0 { 1.0 } else { -1.0 };
        let rhs = t1.add(&t2.scale(sign)).unwrap();
        for (x, y) in lhs.comps.iter().zip(&rhs.comps) {
            assert!((x.value() - y.value()).abs() <= 1e-12 * y.value().abs().max(1.0));
        }
    }
}

#[test]
fn odot_is_bilinear() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let met = FormMetric::constant(random_metric(&mut rng)).unwrap();
    let a = random_form(&mut rng, 2, 0, 5);
    let b = random_form(&mut rng, 2, 0, 5);
    let x = odot(&a.scale(2.5), &b, &met, AmbientProduct::Dot).unwrap();
    let y = odot(&a, &b, &met, AmbientProduct::Dot).unwrap().scale(2.5);
    for (u, v) in x.comps.iter().zip(&y.comps) {
        assert!((u.value() - v.value()).abs() < 1e-13);
    }
    // hand contraction with g = δ: A = e¹∧e², B = e²∧e³
    let flat = FormMetric::flat(0);
    let e = |i: usize, j: usize| {
        MultivectorForm::scalar_form(2, 5, move |t| {
            Jet::constant(0, if t == [i, j] { 1.0 } else { 0.0 })
        })
    };
    let c = odot(&e(0, 1), &e(1, 2), &flat, AmbientProduct::Dot).unwrap();
    // C^{i1 i2} = A^{i2 j}B_j^{i1} − A^{i1 j}B_j^{i2}; only (i1,i2) = (0,2) survives
    // through A^{0 1}B_1^{2} = 1, giving C^{02} = −1
    for (t, v) in [([0, 2], -1.0), ([0, 1], 0.0), ([1, 2], 0.0), ([2, 3], 0.0)] {
        assert_eq!(c.get(&t, &[]).value(), v, "{t:?}");
    }
}

fn poly_jet(rng: &mut ChaCha8Rng, x: [f64; 4], order: usize) -> Jet {
    let terms: Vec<(MultiIndex, f64)> = willmore4::jets::multi_indices(3)
        .iter()
        .map(|&a| (a, rng.gen_range(-1.0..1.0)))
        .collect();
    willmore4::jets::polynomial_jet(&terms, x, order)
}

fn poly_metric(rng: &mut ChaCha8Rng, x: [f64; 4], order: usize) -> MetricField {
    let g: [Jet; 10] = std::array::from_fn(|p| {
        let (i, j) = PAIRS[p];
        let base = Jet::constant(order, if i == j { 1.0 } else { 0.0 });
        base + poly_jet(rng, x, order).scale(0.1)
    });
    MetricField::new(x, g).unwrap()
}

#[test]
fn d_and_codifferential_square_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let x = [0.1, -0.2, 0.3, 0.05];
    let mf = poly_metric(&mut rng, x, 4);
    let met = FormMetric::from_metric_field(&mf).unwrap();
    for p in 0..=4usize {
        let a = MultivectorForm::from_fn(p, 1, 5, |_, _| poly_jet(&mut rng, x, 4));
        if p <= 2 {
            let dd = exterior_d(&exterior_d(&a).unwrap()).unwrap();
            assert!(dd.comps.iter().all(|c| c.max_abs() < 1e-10), "d² on {p}-forms");
        }
        if p >= 2 {
            let cc = codifferential(&codifferential(&a, &met).unwrap(), &met).unwrap();
            let scale = a.max_abs();
            assert!(
                cc.comps.iter().all(|c| c.value().abs() < 1e-10 * scale.max(1.0)),
                "(d*)² on {p}-forms"
            );
        }
    }
}

#[test]
fn codifferential_matches_star_d_star() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let x = [0.2, 0.1, -0.3, 0.4];
    let mf = poly_metric(&mut rng, x, 3);
    let met = FormMetric::from_metric_field(&mf).unwrap();
    for p in 1..=4usize {
        let a = MultivectorForm::from_fn(p, 1, 5, |_, _| poly_jet(&mut rng, x, 3));
        let direct = codifferential(&a, &met).unwrap();
        let via = hodge_star(&exterior_d(&hodge_star(&a, &met).unwrap()).unwrap(), &met)
            .unwrap()
            .scale(-1.0);
        for (u, v) in direct.comps.iter().zip(&via.comps) {
            assert!((u.value() - v.value()).abs() <= 1e-11 * v.value().abs().max(1.0), "p = {p}");
        }
    }
}

#[test]
fn d_and_codifferential_are_adjoint_up_to_sign_on_flat_torus() {
    use std::f64::consts::PI;
    // trigonometric 1-form A and 2-form B on the flat torus
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let modes: Vec<([f64; 4], f64, f64)> = (0..6)
        .map(|_| {
            let k: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-2i32..=2) as f64);
            (k, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
        .collect();
    let field = |x: &[Jet; 4], shift: usize| -> Jet {
        let mut acc = Jet::zero(x[0].order());
        for (n, (k, a, b)) in modes.iter().enumerate() {
            let mut th = Jet::zero(x[0].order());
            for d in 0..4 {
                th.add_scaled(k[d], &x[d]);
            }
            let (ps, pc) = ((shift * 7 + n * 3) as f64).sin_cos();
            acc.add_scaled(a * pc - b * ps, &th.cos());
            acc.add_scaled(a * ps + b * pc, &th.sin());
        }
        acc
    };
    let flat = FormMetric::flat(1);
    let n = 8;
    let h = 2.0 * PI / n as f64;
    let (mut lhs, mut rhs, mut norm) = (0.0, 0.0, 0.0);
    for i0 in 0..n {
        for i1 in 0..n {
            for i2 in 0..n {
                for i3 in 0..n {
                    let x = [i0 as f64 * h, i1 as f64 * h, i2 as f64 * h, i3 as f64 * h];
                    let v: [Jet; 4] = std::array::from_fn(|d| Jet::variable(1, d, x[d]));
                    let mut c = 0;
                    let a = MultivectorForm::scalar_form(1, 5, |_| {
                        c += 1;
                        field(&v, c)
                    });
                    let b = MultivectorForm::scalar_form(2, 5, |_| {
                        c += 1;
                        field(&v, c)
                    });
                    let da = exterior_d(&a).unwrap();
                    let db = codifferential(&b, &flat).unwrap();
                    lhs += inner_product(&da, &b.truncated(0), &flat).unwrap().value();
                    rhs += inner_product(&a.truncated(0), &db, &flat).unwrap().value();
                    norm += b.max_abs() * a.max_abs();
                }
            }
        }
    }
    assert!((lhs + rhs).abs() <= 1e-8 * norm, "{lhs} {rhs}");
    assert!(lhs.abs() > 1e-3 * norm, "{lhs} {norm}");
}

#[test]
fn eta_from_double_wedge_on_clifford_torus() {
    let f = frame(&clifford4().point([0.4, 1.1, -0.3, 2.0], 3).unwrap()).unwrap();
    let dphi = MultivectorForm::dphi(&f);
    let eta = wedge_ambient(&dphi, &dphi).unwrap().scale(0.5);
    for i in 0..4 {
        for j in 0..4 {
            for a in 0..8 {
                for b in 0..8 {
                    let direct = f.tangents[i][a].value() * f.tangents[j][b].value()
                        - f.tangents[i][b].value() * f.tangents[j][a].value();
                    let got = eta.get(&[i, j], &[a, b]).value();
                    assert!((got - direct).abs() < 1e-15);
                }
            }
        }
    }
}

#[test]
fn fault_injection_flips_double_star_on_one_forms() {
    let met = FormMetric::flat(0);
    let a = MultivectorForm::scalar_form(1, 5, |i| Jet::constant(0, 1.0 + i[0] as f64));
    set_hodge_sign_fault(true);
    let ss = hodge_star(&hodge_star(&a, &met).unwrap(), &met).unwrap();
    set_hodge_sign_fault(false);
    for (x, y) in ss.comps.iter().zip(&a.comps) {
        assert_eq!(x.value(), y.value());
    }
}
