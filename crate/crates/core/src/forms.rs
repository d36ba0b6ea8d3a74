//! Parameter-space forms with values in exterior powers of the ambient space.
//!
//! A form of parameter degree `p` and ambient degree `q` stores one jet per
//! pair (increasing parameter tuple, increasing ambient tuple). Tuples are
//! bit masks enumerated in colexicographic order, so the rank of a tuple is
//! `Σ_t C(s_t, t+1)`.
//!
//! Conventions:
//! * wedge: `(A∧B)_{I} = Σ_shuffles sign · A_{I₁} B_{I₂}`, i.e. the scaled
//!   antisymmetrization `(p+q)!/(p!q!) A_{[i…}B_{j…]}`;
//! * interior multiplication contracts the leading indices of `A`:
//!   `(A⨽B)_J = (1/r!) A^{i₁…i_r}{}_J B_{i₁…i_r}`;
//! * Hodge star `(⋆A)^{I} = (1/p!) ε^{IJ} A_J` with `ε^{1234} = |g|^{-1/2}`,
//!   returned with lowered indices;
//! * `d*A = ∇^j A_{jI}` (component formula, Levi-Civita connection).

use crate::error::{Error, Result};
use crate::geometry::{sym, Christoffel, GeometryFrame, MetricField, PAIRS};
use crate::jets::Jet;
use std::sync::atomic::{AtomicBool, Ordering};

static HODGE_SIGN_FAULT: AtomicBool = AtomicBool::new(false);

/// Negative control for the identity suite: while enabled, the Hodge star
/// uses the reversed orientation on forms of degree below 2, which flips
/// the sign of `⋆⋆` on odd forms.
pub fn set_hodge_sign_fault(enabled: bool) {
    HODGE_SIGN_FAULT.store(enabled, Ordering::SeqCst);
}

pub fn hodge_sign_fault() -> bool {
    HODGE_SIGN_FAULT.load(Ordering::SeqCst)
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Increasing `k`-tuples of `0..n` as bit masks, in rank order.
pub fn subsets(n: usize, k: usize) -> Vec<u32> {
    (0u32..(1u32 << n))
        .filter(|m| m.count_ones() as usize == k)
        .collect()
}

/// Rank of a tuple mask among masks of the same size.
pub fn rank(mask: u32) -> usize {
    let mut r = 0;
    let mut t = 0;
    let mut bits = mask;
    while bits != 0 {
        let s = bits.trailing_zeros() as usize;
        r += binomial(s, t + 1);
        t += 1;
        bits &= bits - 1;
    }
    r
}

pub fn mask_indices(mask: u32) -> Vec<usize> {
    (0..32).filter(|&i| mask & (1 << i) != 0).collect()
}

pub fn mask_of(idx: &[usize]) -> u32 {
    idx.iter().fold(0, |m, &i| m | (1 << i))
}

/// Sign of the shuffle placing the tuple `a` before the disjoint tuple `b`.
pub fn shuffle_sign(a: u32, b: u32) -> f64 {
    let mut inversions = 0;
    let mut bits = a;
    while bits != 0 {
        let s = bits.trailing_zeros();
        inversions += (b & ((1u32 << s) - 1)).count_ones();
        bits &= bits - 1;
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Sorts an index list; returns the mask and permutation sign, or `None`
/// when an index repeats.
pub fn sort_sign(idx: &[usize]) -> Option<(u32, f64)> {
    let mut mask = 0u32;
    let mut inversions = 0;
    for (a, &i) in idx.iter().enumerate() {
        if mask & (1 << i) != 0 {
            return None;
        }
        mask |= 1 << i;
        inversions += idx[..a].iter().filter(|&&j| j > i).count();
    }
    Some((mask, if inversions % 2 == 0 { 1.0 } else { -1.0 }))
}

/// How ambient values combine in a bilinear operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AmbientProduct {
    /// Exterior product of multivectors (`∧` on values).
    Wedge,
    /// Euclidean inner product of equal-degree multivectors; a scalar on
    /// either side multiplies.
    Dot,
}

struct AmbientTable {
    entries: Vec<(usize, usize, usize, f64)>,
    q: usize,
}

fn ambient_table(m: usize, qa: usize, qb: usize, op: AmbientProduct) -> Result<AmbientTable> {
    let sa = subsets(m, qa);
    let sb = subsets(m, qb);
    let mut entries = Vec::new();
    match op {
        AmbientProduct::Wedge => {
            if qa + qb > m {
                return Ok(AmbientTable { entries, q: qa + qb });
            }
            for (ia, &a) in sa.iter().enumerate() {
                for (ib, &b) in sb.iter().enumerate() {
                    if a & b == 0 {
                        entries.push((ia, ib, rank(a | b), shuffle_sign(a, b)));
                    }
                }
            }
            Ok(AmbientTable {
                entries,
                q: qa + qb,
            })
        }
        AmbientProduct::Dot => {
            if qa == 0 || qb == 0 {
                let q = qa.max(qb);
                for i in 0..binomial(m, q) {
                    if qa == 0 {
                        entries.push((0, i, i, 1.0));
                    } else {
                        entries.push((i, 0, i, 1.0));
                    }
                }
                return Ok(AmbientTable { entries, q });
            }
            if qa != qb {
                return Err(Error::DegreeMismatch(format!(
                    "ambient inner product of degrees {qa} and {qb}"
                )));
            }
            for i in 0..sa.len() {
                entries.push((i, i, 0, 1.0));
            }
            Ok(AmbientTable { entries, q: 0 })
        }
    }
}

/// Metric data needed by the metric-dependent operations.
#[derive(Clone, Debug)]
pub struct FormMetric {
    pub g: [Jet; 10],
    pub ginv: [Jet; 10],
    pub volume: Jet,
    pub christoffel: Christoffel,
}

impl FormMetric {
    pub fn flat(order: usize) -> Self {
        let mf = MetricField::flat([0.0; 4], order);
        FormMetric {
            g: mf.g.clone(),
            ginv: mf.g,
            volume: Jet::constant(order, 1.0),
            christoffel: Christoffel::zero(order.saturating_sub(1)),
        }
    }

    /// A constant metric given by its values.
    pub fn constant(g: [[f64; 4]; 4]) -> Result<Self> {
        let gj: [Jet; 10] = std::array::from_fn(|p| Jet::constant(0, g[PAIRS[p].0][PAIRS[p].1]));
        let mf = MetricField::new([0.0; 4], gj)?;
        let (ginv, vol) = mf.inverse_and_volume()?;
        Ok(FormMetric {
            g: mf.g,
            ginv,
            volume: vol,
            christoffel: Christoffel::zero(0),
        })
    }

    pub fn from_metric_field(mf: &MetricField) -> Result<Self> {
        let (ginv, volume) = mf.inverse_and_volume()?;
        let christoffel = if mf.order() >= 1 {
            mf.christoffel()?
        } else {
            Christoffel::zero(0)
        };
        Ok(FormMetric {
            g: mf.g.clone(),
            ginv,
            volume,
            christoffel,
        })
    }

    pub fn from_frame(f: &GeometryFrame) -> Self {
        FormMetric {
            g: f.metric.clone(),
            ginv: f.metric_inv.clone(),
            volume: f.volume.clone(),
            christoffel: f.christoffel.clone(),
        }
    }

    fn ginv_at(&self, i: usize, j: usize) -> &Jet {
        &self.ginv[sym(i, j)]
    }
}

/// `det M[rows, cols]` for a symmetric 4×4 jet matrix (Laplace expansion).
fn minor(mat: &[Jet; 10], rows: &[usize], cols: &[usize]) -> Jet {
    match rows.len() {
        0 => Jet::constant(mat[0].order(), 1.0),
        1 => mat[sym(rows[0], cols[0])].clone(),
        _ => {
            let mut acc = Jet::zero(mat[0].order());
            let sub_rows = &rows[1..];
            for (c, &col) in cols.iter().enumerate() {
                let rest: Vec<usize> = cols
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != c)
                    .map(|(_, &v)| v)
                    .collect();
                let term = &mat[sym(rows[0], col)] * &minor(mat, sub_rows, &rest);
                acc.add_scaled(if c % 2 == 0 { 1.0 } else { -1.0 }, &term);
            }
            acc
        }
    }
}

/// Matrix of `r×r` minors between increasing `r`-tuples of `0..4`.
fn minor_table(mat: &[Jet; 10], r: usize) -> Vec<Vec<Jet>> {
    let tuples = subsets(4, r);
    tuples
        .iter()
        .map(|&a| {
            let ra = mask_indices(a);
            tuples
                .iter()
                .map(|&b| minor(mat, &ra, &mask_indices(b)))
                .collect()
        })
        .collect()
}

/// A `p`-form on the parameter space with ambient `q`-vector values.
#[derive(Clone, Debug, PartialEq)]
pub struct MultivectorForm {
    pub p: usize,
    pub q: usize,
    pub m: usize,
    pub comps: Vec<Jet>,
    /// Set when the form is the conventional zero produced by a degree overflow.
    pub overflow: bool,
}

impl MultivectorForm {
    pub fn zero(p: usize, q: usize, m: usize, order: usize) -> Self {
        MultivectorForm {
            p,
            q,
            m,
            comps: vec![Jet::zero(order); binomial(4, p) * binomial(m, q)],
            overflow: false,
        }
    }

    /// Build from a function of (parameter tuple, ambient tuple) in increasing order.
    pub fn from_fn<F>(p: usize, q: usize, m: usize, mut f: F) -> Self
    where
        F: FnMut(&[usize], &[usize]) -> Jet,
    {
        let pt = subsets(4, p);
        let at = subsets(m, q);
        let mut comps = Vec::with_capacity(pt.len() * at.len());
        for &pm in &pt {
            let pi = mask_indices(pm);
            for &am in &at {
                comps.push(f(&pi, &mask_indices(am)));
            }
        }
        MultivectorForm {
            p,
            q,
            m,
            comps,
            overflow: false,
        }
    }

    /// Scalar-valued form.
    pub fn scalar_form<F>(p: usize, m: usize, mut f: F) -> Self
    where
        F: FnMut(&[usize]) -> Jet,
    {
        Self::from_fn(p, 0, m, |i, _| f(i))
    }

    /// Vector-valued 1-form `dΦ` from the tangents of a frame.
    pub fn dphi(frame: &GeometryFrame) -> Self {
        Self::from_fn(1, 1, frame.ambient_dim, |i, a| frame.tangents[i[0]][a[0]].clone())
    }

    /// Vector-valued 0-form from ambient jets.
    pub fn vector(v: &[Jet]) -> Self {
        Self::from_fn(0, 1, v.len(), |_, a| v[a[0]].clone())
    }

    /// Vector-valued 1-form from four ambient vectors `v_i`.
    pub fn vector_one_form(v: &[Vec<Jet>; 4]) -> Self {
        Self::from_fn(1, 1, v[0].len(), |i, a| v[i[0]][a[0]].clone())
    }

    pub fn width(&self) -> usize {
        binomial(self.m, self.q)
    }

    pub fn order(&self) -> usize {
        self.comps.iter().map(|c| c.order()).min().unwrap_or(0)
    }

    /// Component for increasing tuples given as masks.
    pub fn at_mask(&self, pmask: u32, amask: u32) -> &Jet {
        &self.comps[rank(pmask) * self.width() + rank(amask)]
    }

    /// Component for arbitrary index lists (antisymmetry applied).
    pub fn get(&self, pidx: &[usize], aidx: &[usize]) -> Jet {
        match (sort_sign(pidx), sort_sign(aidx)) {
            (Some((pm, ps)), Some((am, asg))) => self.at_mask(pm, am).scale(ps * asg),
            _ => Jet::zero(self.order()),
        }
    }

    fn param_block(&self, pi: usize) -> &[Jet] {
        let w = self.width();
        &self.comps[pi * w..(pi + 1) * w]
    }

    pub fn scale(&self, s: f64) -> Self {
        MultivectorForm {
            comps: self.comps.iter().map(|c| c.scale(s)).collect(),
            ..self.clone()
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(MultivectorForm {
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a + b).collect(),
            ..self.clone()
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(MultivectorForm {
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a - b).collect(),
            ..self.clone()
        })
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if (self.p, self.q, self.m) != (other.p, other.q, other.m) {
            return Err(Error::DegreeMismatch(format!(
                "forms of shape ({},{},{}) and ({},{},{})",
                self.p, self.q, self.m, other.p, other.q, other.m
            )));
        }
        Ok(())
    }

    pub fn truncated(&self, order: usize) -> Self {
        MultivectorForm {
            comps: self.comps.iter().map(|c| c.truncated(order)).collect(),
            ..self.clone()
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0, |m, c| m.max(c.value().abs()))
    }

    pub fn values(&self) -> Vec<f64> {
        self.comps.iter().map(|c| c.value()).collect()
    }
}

fn check_m(a: &MultivectorForm, b: &MultivectorForm) -> Result<()> {
    if a.m != b.m {
        return Err(Error::DegreeMismatch(format!(
            "ambient dimensions {} and {}",
            a.m, b.m
        )));
    }
    Ok(())
}

/// Parameter wedge with the given ambient product.
pub fn wedge_param(a: &MultivectorForm, b: &MultivectorForm, op: AmbientProduct) -> Result<MultivectorForm> {
    check_m(a, b)?;
    let table = ambient_table(a.m, a.q, b.q, op)?;
    let order = a.order().min(b.order());
    let p = a.p + b.p;
    if p > 4 || table.q > a.m {
        let mut z = MultivectorForm::zero(p.min(4), table.q.min(a.m), a.m, order);
        z.overflow = true;
        return Ok(z);
    }
    let mut out = MultivectorForm::zero(p, table.q, a.m, order);
    let w = out.width();
    for (pi, &pm) in subsets(4, p).iter().enumerate() {
        // split pm into (S, pm \ S) with |S| = a.p
        for &s in subsets(4, a.p).iter().filter(|&&s| s & pm == s) {
            let t = pm & !s;
            let sign = shuffle_sign(s, t);
            let ab = a.param_block(rank(s));
            let bb = b.param_block(rank(t));
            for &(ia, ib, io, sg) in &table.entries {
                let prod = &ab[ia] * &bb[ib];
                out.comps[pi * w + io].add_scaled(sign * sg, &prod);
            }
        }
    }
    Ok(out)
}

/// The mixed product `∧∧`: wedge on parameter indices and ambient values.
pub fn wedge_ambient(a: &MultivectorForm, b: &MultivectorForm) -> Result<MultivectorForm> {
    wedge_param(a, b, AmbientProduct::Wedge)
}

/// Raise all indices of an `r`-form: `B^K = Σ_L det(g^{-1}[K, L]) B_L`.
fn raise_all(b: &MultivectorForm, metric: &FormMetric) -> MultivectorForm {
    let r = b.p;
    let minors = minor_table(&metric.ginv, r);
    let n = binomial(4, r);
    let w = b.width();
    let mut out = MultivectorForm::zero(r, b.q, b.m, b.order().min(metric.ginv[0].order()));
    for k in 0..n {
        for l in 0..n {
            for c in 0..w {
                let t = &minors[k][l] * &b.comps[l * w + c];
                out.comps[k * w + c] += &t;
            }
        }
    }
    out
}

/// Lower all indices: `A_K = Σ_I det(g[K, I]) A^I`.
fn lower_all(a: &MultivectorForm, metric: &FormMetric) -> MultivectorForm {
    let r = a.p;
    let minors = minor_table(&metric.g, r);
    let n = binomial(4, r);
    let w = a.width();
    let mut out = MultivectorForm::zero(r, a.q, a.m, a.order().min(metric.g[0].order()));
    for k in 0..n {
        for l in 0..n {
            for c in 0..w {
                let t = &minors[k][l] * &a.comps[l * w + c];
                out.comps[k * w + c] += &t;
            }
        }
    }
    out
}

/// Interior multiplication `(A⨽B)_J = (1/r!) A^{I}{}_J B_I` for an `r`-form `B`,
/// `r ≤ p`, contracting the leading indices of `A`.
pub fn interior_mult(
    a: &MultivectorForm,
    b: &MultivectorForm,
    metric: &FormMetric,
    op: AmbientProduct,
) -> Result<MultivectorForm> {
    check_m(a, b)?;
    if b.p > a.p {
        return Err(Error::DegreeMismatch(format!(
            "cannot contract a {}-form into a {}-form",
            b.p, a.p
        )));
    }
    let table = ambient_table(a.m, a.q, b.q, op)?;
    let bu = raise_all(b, metric);
    let p_out = a.p - b.p;
    let order = a.order().min(bu.order());
    if table.q > a.m {
        let mut z = MultivectorForm::zero(p_out, a.m, a.m, order);
        z.overflow = true;
        return Ok(z);
    }
    let mut out = MultivectorForm::zero(p_out, table.q, a.m, order);
    let w = out.width();
    for (ji, &jm) in subsets(4, p_out).iter().enumerate() {
        for (ki, &km) in subsets(4, b.p).iter().enumerate() {
            if km & jm != 0 {
                continue;
            }
            let sign = shuffle_sign(km, jm);
            let ab = a.param_block(rank(km | jm));
            let bb = bu.param_block(ki);
            for &(ia, ib, io, sg) in &table.entries {
                let prod = &ab[ia] * &bb[ib];
                out.comps[ji * w + io].add_scaled(sign * sg, &prod);
            }
        }
    }
    Ok(out)
}

/// Mixed index `A^i{}_j = g^{ik} A_{kj}` of a 2-form, per ambient component.
fn mixed(a: &MultivectorForm, metric: &FormMetric) -> Vec<[[Jet; 4]; 4]> {
    let order = a.order().min(metric.ginv[0].order());
    (0..a.width())
        .map(|c| {
            std::array::from_fn(|i| {
                std::array::from_fn(|j| {
                    let mut acc = Jet::zero(order);
                    for k in 0..4 {
                        let t = metric.ginv_at(i, k) * &component(a, &[k, j], c);
                        acc += &t;
                    }
                    acc
                })
            })
        })
        .collect()
}

fn component(a: &MultivectorForm, pidx: &[usize], c: usize) -> Jet {
    match sort_sign(pidx) {
        Some((pm, s)) => a.comps[rank(pm) * a.width() + c].scale(s),
        None => Jet::zero(a.order()),
    }
}

/// First-order contraction `A•B` of a 2-form with a `q`-form:
/// `(A•B)_{j₁…j_q} = Σ_s A^i{}_{j_s} B_{j₁…i…j_q}` (the derivation extending `A⨽B`).
pub fn first_order_contraction(
    a: &MultivectorForm,
    b: &MultivectorForm,
    metric: &FormMetric,
    op: AmbientProduct,
) -> Result<MultivectorForm> {
    check_m(a, b)?;
    if a.p != 2 {
        return Err(Error::DegreeMismatch(format!(
            "first-order contraction needs a 2-form, got degree {}",
            a.p
        )));
    }
    let table = ambient_table(a.m, a.q, b.q, op)?;
    let am = mixed(a, metric);
    let order = b.order().min(am[0][0][0].order());
    let mut out = MultivectorForm::zero(b.p, table.q, a.m, order);
    let w = out.width();
    let wb = b.width();
    for (ji, &jm) in subsets(4, b.p).iter().enumerate() {
        let jidx = mask_indices(jm);
        for s in 0..jidx.len() {
            for i in 0..4 {
                let mut moved = jidx.clone();
                moved[s] = i;
                let Some((bm, bsign)) = sort_sign(&moved) else {
                    continue;
                };
                let bi = rank(bm);
                for &(ia, ib, io, sg) in &table.entries {
                    let prod = &am[ia][i][jidx[s]] * &b.comps[bi * wb + ib];
                    out.comps[ji * w + io].add_scaled(bsign * sg, &prod);
                }
            }
        }
    }
    Ok(out)
}

/// `(A⊙B)^{i₁i₂} = A^{i₂j}B_j{}^{i₁} − A^{i₁j}B_j{}^{i₂}`, returned lowered.
pub fn odot(
    a: &MultivectorForm,
    b: &MultivectorForm,
    metric: &FormMetric,
    op: AmbientProduct,
) -> Result<MultivectorForm> {
    check_m(a, b)?;
    if a.p != 2 || b.p != 2 {
        return Err(Error::DegreeMismatch(format!(
            "⊙ needs two 2-forms, got degrees {} and {}",
            a.p, b.p
        )));
    }
    let table = ambient_table(a.m, a.q, b.q, op)?;
    let order = a.order().min(b.order()).min(metric.g[0].order());
    let wa = a.width();
    let wb = b.width();
    // A^{ij} and B_j^{i} per ambient component
    let aup: Vec<[[Jet; 4]; 4]> = (0..wa)
        .map(|c| {
            std::array::from_fn(|i| {
                std::array::from_fn(|j| {
                    let mut acc = Jet::zero(order);
                    for k in 0..4 {
                        for l in 0..4 {
                            let t = &(metric.ginv_at(i, k) * metric.ginv_at(j, l)) * &component(a, &[k, l], c);
                            acc += &t;
                        }
                    }
                    acc
                })
            })
        })
        .collect();
    let bmix: Vec<[[Jet; 4]; 4]> = (0..wb)
        .map(|c| {
            std::array::from_fn(|j| {
                std::array::from_fn(|i| {
                    let mut acc = Jet::zero(order);
                    for k in 0..4 {
                        let t = &component(b, &[j, k], c) * metric.ginv_at(k, i);
                        acc += &t;
                    }
                    acc
                })
            })
        })
        .collect();
    let mut up = MultivectorForm::zero(2, table.q, a.m, order);
    let w = up.width();
    for (pi, &pm) in subsets(4, 2).iter().enumerate() {
        let idx = mask_indices(pm);
        let (i1, i2) = (idx[0], idx[1]);
        for &(ia, ib, io, sg) in &table.entries {
            let mut acc = Jet::zero(order);
            for j in 0..4 {
                acc += &(&aup[ia][i2][j] * &bmix[ib][j][i1]);
                acc -= &(&aup[ia][i1][j] * &bmix[ib][j][i2]);
            }
            up.comps[pi * w + io].add_scaled(sg, &acc);
        }
    }
    Ok(lower_all(&up, metric))
}

/// Hodge star with lowered output indices.
pub fn hodge_star(a: &MultivectorForm, metric: &FormMetric) -> Result<MultivectorForm> {
    let p = a.p;
    let inv_vol = metric.volume.recip()?;
    let order = a.order().min(inv_vol.order());
    let mut up = MultivectorForm::zero(4 - p, a.q, a.m, order);
    let w = a.width();
    let flip = if hodge_sign_fault() && p < 2 { -1.0 } else { 1.0 };
    for (ii, &im) in subsets(4, 4 - p).iter().enumerate() {
        let jm = 0b1111 & !im;
        let sign = shuffle_sign(im, jm) * flip;
        let src = a.param_block(rank(jm));
        for c in 0..w {
            let t = &src[c] * &inv_vol;
            up.comps[ii * w + c].add_scaled(sign, &t);
        }
    }
    Ok(lower_all(&up, metric))
}

/// Exterior derivative `(dA)_{i₀…i_p} = Σ_s (−1)^s ∂_{i_s} A_{…î_s…}`.
pub fn exterior_d(a: &MultivectorForm) -> Result<MultivectorForm> {
    let order = a.order();
    if order == 0 {
        return Err(Error::OrderExhausted {
            needed: 1,
            available: 0,
        });
    }
    if a.p == 4 {
        return Ok(zero_top(a, order - 1));
    }
    let mut out = MultivectorForm::zero(a.p + 1, a.q, a.m, order - 1);
    let w = a.width();
    for (oi, &om) in subsets(4, a.p + 1).iter().enumerate() {
        let idx = mask_indices(om);
        for (s, &i) in idx.iter().enumerate() {
            let rest = om & !(1 << i);
            let src = a.param_block(rank(rest));
            let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
            for c in 0..w {
                out.comps[oi * w + c].add_scaled(sign, &src[c].partial(i)?);
            }
        }
    }
    Ok(out)
}

// d of a top-degree form: no 5-forms in four variables.
fn zero_top(a: &MultivectorForm, order: usize) -> MultivectorForm {
    MultivectorForm {
        p: 4,
        q: a.q,
        m: a.m,
        comps: vec![Jet::zero(order); a.width()],
        overflow: true,
    }
}

/// Codifferential `(d*A)_{I} = ∇^j A_{jI}` with the Levi-Civita connection.
pub fn codifferential(a: &MultivectorForm, metric: &FormMetric) -> Result<MultivectorForm> {
    let order = a.order();
    if order == 0 {
        return Err(Error::OrderExhausted {
            needed: 1,
            available: 0,
        });
    }
    if a.p == 0 {
        let mut z = MultivectorForm::zero(0, a.q, a.m, order - 1);
        z.overflow = true;
        return Ok(z);
    }
    let w = a.width();
    let out_order = (order - 1)
        .min(metric.christoffel.order())
        .min(metric.ginv[0].order());
    let mut out = MultivectorForm::zero(a.p - 1, a.q, a.m, out_order);
    // partial derivatives of every stored component
    let partials: Vec<Vec<Jet>> = (0..4)
        .map(|k| a.comps.iter().map(|c| c.partial(k).unwrap()).collect())
        .collect();
    let comp_of = |idx: &[usize], c: usize| -> Option<(usize, f64)> {
        sort_sign(idx).map(|(m, s)| (rank(m) * w + c, s))
    };
    let gamma = &metric.christoffel;
    for (oi, &om) in subsets(4, a.p - 1).iter().enumerate() {
        let iidx = mask_indices(om);
        for c in 0..w {
            let mut acc = Jet::zero(out_order);
            for j in 0..4 {
                let mut full = vec![j];
                full.extend_from_slice(&iidx);
                for k in 0..4 {
                    let gjk = metric.ginv_at(j, k);
                    if gjk.is_zero() {
                        continue;
                    }
                    // ∇_k A_{j I}
                    let mut cov = Jet::zero(out_order);
                    if let Some((slot, s)) = comp_of(&full, c) {
                        cov.add_scaled(s, &partials[k][slot]);
                    }
                    for pos in 0..full.len() {
                        for l in 0..4 {
                            let gk = gamma.get(l, k, full[pos]);
                            if gk.is_zero() {
                                continue;
                            }
                            let mut moved = full.clone();
                            moved[pos] = l;
                            if let Some((slot, s)) = comp_of(&moved, c) {
                                let t = gk * &a.comps[slot];
                                cov.add_scaled(-s, &t);
                            }
                        }
                    }
                    let t = gjk * &cov;
                    acc += &t;
                }
            }
            out.comps[oi * w + c] = acc;
        }
    }
    Ok(out)
}

/// Pointwise inner product `⟨A, B⟩_g = Σ_I A_I · B^I` (ambient Euclidean).
pub fn inner_product(a: &MultivectorForm, b: &MultivectorForm, metric: &FormMetric) -> Result<Jet> {
    if (a.p, a.q, a.m) != (b.p, b.q, b.m) {
        return Err(Error::DegreeMismatch("inner product of different shapes".into()));
    }
    let bu = raise_all(b, metric);
    let mut acc = Jet::zero(a.order().min(bu.order()));
    for (x, y) in a.comps.iter().zip(&bu.comps) {
        let t = x * y;
        acc += &t;
    }
    Ok(acc)
}
