//! Truncated multivariate Taylor arithmetic in four variables.
//!
//! A [`Jet`] of order `K` stores the Taylor coefficients of a scalar
//! function around a base point, i.e. `∂^α f / α!` for every multi-index
//! `|α| ≤ K`. Coefficients are laid out in graded lexicographic order, so a
//! jet of order `k < K` is a prefix of the order-`K` layout and truncation is
//! a slice operation.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::OnceLock;

use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Number of variables of the parameter space.
pub const NVARS: usize = 4;

/// Highest supported jet order.
pub const MAX_ORDER: usize = 8;

/// Default order: six derivatives of the immersion feed the sixth-order operator.
pub const DEFAULT_ORDER: usize = 6;

/// Exponents of a monomial `x1^a1 x2^a2 x3^a3 x4^a4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub [u8; NVARS]);

impl MultiIndex {
    pub const ZERO: MultiIndex = MultiIndex([0; NVARS]);

    pub fn new(exponents: [u8; NVARS]) -> Self {
        MultiIndex(exponents)
    }

    /// Unit multi-index along `direction` (0-based).
    pub fn unit(direction: usize) -> Self {
        let mut e = [0u8; NVARS];
        e[direction] = 1;
        MultiIndex(e)
    }

    pub fn order(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    /// `α! = Π αᵢ!`
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&e| (1..=e as u64).product::<u64>() as f64)
            .product()
    }

    /// Multi-index for a list of (0-based) differentiation directions.
    pub fn from_directions(dirs: &[usize]) -> Self {
        let mut e = [0u8; NVARS];
        for &d in dirs {
            e[d] += 1;
        }
        MultiIndex(e)
    }

    /// Position in the graded lexicographic layout.
    pub fn position(&self) -> usize {
        let t = tables();
        t.position(self).expect("multi-index order exceeds MAX_ORDER")
    }
}

/// `binomial(k + 4, 4)`: number of coefficients of an order-`k` jet.
pub fn coeff_count(order: usize) -> usize {
    let k = order;
    (k + 1) * (k + 2) * (k + 3) * (k + 4) / 24
}

struct Tables {
    indices: Vec<MultiIndex>,
    // dense lookup over exponent cube (MAX_ORDER+1)^4
    lookup: Vec<u16>,
    // rows[i][j] = position of indices[i] + indices[j]; row i is as long as
    // the number of indices of order ≤ MAX_ORDER − |indices[i]|
    rows: Vec<Vec<u16>>,
    degree: Vec<u8>,
    // successor[d][i] = position of indices[i] + e_d, for |indices[i]| < MAX_ORDER
    successor: [Vec<u16>; NVARS],
    factorials: Vec<f64>,
}

impl Tables {
    fn cube_slot(e: &[u8; NVARS]) -> usize {
        let b = MAX_ORDER + 1;
        ((e[0] as usize * b + e[1] as usize) * b + e[2] as usize) * b + e[3] as usize
    }

    fn position(&self, m: &MultiIndex) -> Option<usize> {
        if m.order() > MAX_ORDER {
            return None;
        }
        Some(self.lookup[Self::cube_slot(&m.0)] as usize)
    }

    fn build() -> Tables {
        let mut indices = Vec::with_capacity(coeff_count(MAX_ORDER));
        for total in 0..=MAX_ORDER {
            let mut level = Vec::new();
            for a in 0..=total {
                for b in 0..=(total - a) {
                    for c in 0..=(total - a - b) {
                        let d = total - a - b - c;
                        level.push(MultiIndex([a as u8, b as u8, c as u8, d as u8]));
                    }
                }
            }
            // descending lexicographic within a degree: x1-heavy first
            level.sort_by(|x, y| y.0.cmp(&x.0));
            indices.extend(level);
        }
        let b = MAX_ORDER + 1;
        let mut lookup = vec![u16::MAX; b * b * b * b];
        for (i, m) in indices.iter().enumerate() {
            lookup[Self::cube_slot(&m.0)] = i as u16;
        }
        let rows = indices
            .iter()
            .map(|x| {
                indices[..coeff_count(MAX_ORDER - x.order())]
                    .iter()
                    .map(|y| {
                        let mut s = [0u8; NVARS];
                        for v in 0..NVARS {
                            s[v] = x.0[v] + y.0[v];
                        }
                        lookup[Self::cube_slot(&s)]
                    })
                    .collect()
            })
            .collect();
        let degree = indices.iter().map(|m| m.order() as u8).collect();
        let successor = std::array::from_fn(|d| {
            indices
                .iter()
                .take(coeff_count(MAX_ORDER - 1))
                .map(|m| {
                    let mut e = m.0;
                    e[d] += 1;
                    lookup[Self::cube_slot(&e)]
                })
                .collect()
        });
        let factorials = indices.iter().map(|m| m.factorial()).collect();
        Tables {
            indices,
            lookup,
            rows,
            degree,
            successor,
            factorials,
        }
    }
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(Tables::build)
}

/// Multi-indices of all coefficients of an order-`order` jet, in storage order.
pub fn multi_indices(order: usize) -> &'static [MultiIndex] {
    &tables().indices[..coeff_count(order)]
}

type Coeffs = SmallVec<[f64; 15]>;

/// Truncated Taylor expansion of a scalar function of four variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    order: usize,
    coeffs: Coeffs,
}

impl Jet {
    pub fn zero(order: usize) -> Jet {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        Jet {
            order,
            coeffs: SmallVec::from_elem(0.0, coeff_count(order)),
        }
    }

    pub fn constant(order: usize, value: f64) -> Jet {
        let mut j = Jet::zero(order);
        j.coeffs[0] = value;
        j
    }

    /// Jet of the coordinate function `x^direction` at `base` (0-based direction).
    pub fn variable(order: usize, direction: usize, base: f64) -> Jet {
        let mut j = Jet::constant(order, base);
        if order > 0 {
            j.coeffs[1 + direction] = 1.0;
        }
        j
    }

    pub fn from_coeffs(order: usize, coeffs: &[f64]) -> Result<Jet> {
        if coeffs.len() != coeff_count(order) {
            return Err(Error::InvalidInput(format!(
                "order-{order} jet needs {} coefficients, got {}",
                coeff_count(order),
                coeffs.len()
            )));
        }
        Ok(Jet {
            order,
            coeffs: SmallVec::from_slice(coeffs),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Value at the base point.
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Taylor coefficient `∂^α f / α!`; zero beyond the stored order.
    pub fn coeff(&self, alpha: MultiIndex) -> f64 {
        if alpha.order() > self.order {
            return 0.0;
        }
        self.coeffs[alpha.position()]
    }

    /// Raw mixed partial derivative `∂^α f` at the base point.
    pub fn derivative(&self, alpha: MultiIndex) -> f64 {
        self.coeff(alpha) * alpha.factorial()
    }

    pub fn set_coeff(&mut self, alpha: MultiIndex, value: f64) {
        assert!(alpha.order() <= self.order);
        self.coeffs[alpha.position()] = value;
    }

    /// Drop all coefficients above `order`.
    pub fn truncated(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet {
            order,
            coeffs: SmallVec::from_slice(&self.coeffs[..coeff_count(order)]),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `self += s * other` over the common order (result keeps the lower order).
    pub fn add_scaled(&mut self, s: f64, other: &Jet) {
        if other.order < self.order {
            *self = self.truncated(other.order);
        }
        for (a, b) in self.coeffs.iter_mut().zip(other.coeffs.iter()) {
            *a += s * b;
        }
    }

    fn mul_into(a: &[f64], b: &[f64], order: usize) -> Coeffs {
        let mut out: Coeffs = SmallVec::from_elem(0.0, coeff_count(order));
        mul_acc(&mut out, a, b, order);
        out
    }

    /// Partial derivative along `direction` (0-based); the order drops by one.
    pub fn partial(&self, direction: usize) -> Result<Jet> {
        if self.order == 0 {
            return Err(Error::OrderExhausted {
                needed: 1,
                available: 0,
            });
        }
        let t = tables();
        let order = self.order - 1;
        let n = coeff_count(order);
        let mut coeffs: Coeffs = SmallVec::with_capacity(n);
        for i in 0..n {
            let s = t.successor[direction][i] as usize;
            let e = t.indices[i].0[direction] as f64 + 1.0;
            coeffs.push(self.coeffs[s] * e);
        }
        Ok(Jet { order, coeffs })
    }

    /// Composition `f ∘ self` where `taylor[n] = f⁽ⁿ⁾(a₀)/n!` at the base value `a₀`.
    ///
    /// Horner evaluation on the deviation `self − a₀`, which has no constant
    /// term, so `order + 1` series terms are exact.
    pub fn compose(&self, taylor: &[f64]) -> Jet {
        let k = self.order;
        let mut dev = self.clone();
        dev.coeffs[0] = 0.0;
        let top = k.min(taylor.len().saturating_sub(1));
        let mut acc = Jet::constant(k, taylor.get(top).copied().unwrap_or(0.0));
        for n in (0..top).rev() {
            acc = Jet {
                order: k,
                coeffs: Self::mul_into(&acc.coeffs, &dev.coeffs, k),
            };
            acc.coeffs[0] += taylor[n];
        }
        acc
    }

    pub fn recip(&self) -> Result<Jet> {
        let a0 = self.value();
        if a0 == 0.0 || !a0.is_finite() {
            return Err(Error::Singular(format!(
                "reciprocal of a jet with constant term {a0}"
            )));
        }
        // solve a·r = 1 coefficient by coefficient in graded order: every
        // contribution to slot p comes from slots of lower degree
        let t = tables();
        let n = COUNTS[self.order];
        let inv = 1.0 / a0;
        let mut acc = vec![0.0; n];
        let mut r: Coeffs = SmallVec::from_elem(0.0, n);
        for p in 0..n {
            let rhs = if p == 0 { 1.0 } else { 0.0 };
            r[p] = (rhs - acc[p]) * inv;
            let len = COUNTS[self.order - t.degree[p] as usize];
            for (&k, &aj) in t.rows[p][1..len].iter().zip(&self.coeffs[1..len]) {
                acc[k as usize] += aj * r[p];
            }
        }
        Ok(Jet {
            order: self.order,
            coeffs: r,
        })
    }

    /// `self^p` for real `p`, requiring a positive constant term.
    pub fn powf(&self, p: f64) -> Result<Jet> {
        let a0 = self.value();
        if a0 <= 0.0 {
            return Err(Error::Singular(format!(
                "real power of a jet with constant term {a0}"
            )));
        }
        let mut series = Vec::with_capacity(self.order + 1);
        let mut c = a0.powf(p);
        for n in 0..=self.order {
            series.push(c);
            c *= (p - n as f64) / ((n + 1) as f64 * a0);
        }
        Ok(self.compose(&series))
    }

    pub fn sqrt(&self) -> Result<Jet> {
        self.powf(0.5)
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let mut series = Vec::with_capacity(self.order + 1);
        let mut c = e;
        for n in 0..=self.order {
            series.push(c);
            c /= (n + 1) as f64;
        }
        self.compose(&series)
    }

    pub fn ln(&self) -> Result<Jet> {
        let a0 = self.value();
        if a0 <= 0.0 {
            return Err(Error::Singular(format!("log of jet with constant term {a0}")));
        }
        let mut series = vec![a0.ln()];
        for n in 1..=self.order {
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            series.push(sign / (n as f64 * a0.powi(n as i32)));
        }
        Ok(self.compose(&series))
    }

    pub fn cos(&self) -> Jet {
        self.compose(&trig_series(self.value(), self.order, false))
    }

    pub fn sin(&self) -> Jet {
        self.compose(&trig_series(self.value(), self.order, true))
    }
}

/// Taylor series of sin (or cos) at `a`.
fn trig_series(a: f64, order: usize, sine: bool) -> Vec<f64> {
    let (s, c) = a.sin_cos();
    // derivatives cycle through sin, cos, -sin, -cos
    let cycle = if sine { [s, c, -s, -c] } else { [c, -s, -c, s] };
    let mut fact = 1.0;
    (0..=order)
        .map(|n| {
            if n > 0 {
                fact *= n as f64;
            }
            cycle[n % 4] / fact
        })
        .collect()
}

fn check_orders(a: &Jet, b: &Jet) -> Result<()> {
    if a.order != b.order {
        return Err(Error::OrderMismatch {
            left: a.order,
            right: b.order,
        });
    }
    Ok(())
}

/// Coefficientwise sum of two jets of the same order.
pub fn jet_add(a: &Jet, b: &Jet) -> Result<Jet> {
    check_orders(a, b)?;
    Ok(a + b)
}

/// Truncated Cauchy product of two jets of the same order.
pub fn jet_mul(a: &Jet, b: &Jet) -> Result<Jet> {
    check_orders(a, b)?;
    Ok(a * b)
}

pub fn jet_recip(a: &Jet) -> Result<Jet> {
    a.recip()
}

/// `f ∘ a` from the normalized Taylor coefficients of `f` at `a`'s constant term.
pub fn jet_univariate_compose(f_taylor: &[f64], a: &Jet) -> Result<Jet> {
    if f_taylor.len() != a.order + 1 {
        return Err(Error::InvalidInput(format!(
            "expected {} Taylor coefficients, got {}",
            a.order + 1,
            f_taylor.len()
        )));
    }
    Ok(a.compose(f_taylor))
}

/// `∂a/∂x^direction` with a 1-based direction.
pub fn jet_partial(a: &Jet, direction: usize) -> Result<Jet> {
    if !(1..=NVARS).contains(&direction) {
        return Err(Error::InvalidInput(format!(
            "direction {direction} outside 1..=4"
        )));
    }
    a.partial(direction - 1)
}

// Operators act on the common (lower) order: a jet known to order a times
// one known to order b is known to order min(a, b).

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let n = COUNTS[order];
        let mut coeffs: Coeffs = SmallVec::from_slice(&self.coeffs[..n]);
        for (c, r) in coeffs.iter_mut().zip(&rhs.coeffs[..n]) {
            *c += r;
        }
        Jet { order, coeffs }
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let n = COUNTS[order];
        let mut coeffs: Coeffs = SmallVec::from_slice(&self.coeffs[..n]);
        for (c, r) in coeffs.iter_mut().zip(&rhs.coeffs[..n]) {
            *c -= r;
        }
        Jet { order, coeffs }
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let order = self.order.min(rhs.order);
        Jet {
            order,
            coeffs: Jet::mul_into(&self.coeffs, &rhs.coeffs, order),
        }
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        self.add_scaled(1.0, rhs);
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        self.add_scaled(-1.0, rhs);
    }
}

/// `self += a * b` without materializing the product at a higher order.
pub fn fma_into(acc: &mut Jet, a: &Jet, b: &Jet) {
    let order = acc.order.min(a.order).min(b.order);
    if order < acc.order {
        *acc = acc.truncated(order);
    }
    mul_acc(&mut acc.coeffs, &a.coeffs, &b.coeffs, order);
}

const COUNTS: [usize; MAX_ORDER + 1] = [1, 5, 15, 35, 70, 126, 210, 330, 495];

// out += a * b truncated at `order`; zero coefficients of `a` are skipped,
// which pays off for the many sparse jets (coordinates, constants).
#[inline]
fn mul_acc(out: &mut [f64], a: &[f64], b: &[f64], order: usize) {
    let t = tables();
    let out = &mut out[..COUNTS[order]];
    for i in 0..COUNTS[order] {
        let ai = a[i];
        if ai == 0.0 {
            continue;
        }
        let len = COUNTS[order - t.degree[i] as usize];
        let row = &t.rows[i][..len];
        for (&k, &bj) in row.iter().zip(&b[..len]) {
            out[k as usize] += ai * bj;
        }
    }
}

/// Dot product of two ambient vectors of jets.
pub fn dot(a: &[Jet], b: &[Jet]) -> Jet {
    let order = a
        .iter()
        .chain(b.iter())
        .map(|j| j.order)
        .min()
        .unwrap_or(0);
    let mut acc = Jet::zero(order);
    for (x, y) in a.iter().zip(b) {
        fma_into(&mut acc, x, y);
    }
    acc
}

/// Jet of a polynomial `Σ c_β x^β` expanded around `base`.
pub fn polynomial_jet(terms: &[(MultiIndex, f64)], base: [f64; NVARS], order: usize) -> Jet {
    let vars: [Jet; NVARS] = std::array::from_fn(|d| Jet::variable(order, d, base[d]));
    let mut out = Jet::zero(order);
    for (beta, c) in terms {
        let mut mono = Jet::constant(order, *c);
        for d in 0..NVARS {
            for _ in 0..beta.0[d] {
                mono = &mono * &vars[d];
            }
        }
        out += &mono;
    }
    out
}

/// Factorial of `α`, cached per storage slot.
pub fn factorial_at(position: usize) -> f64 {
    tables().factorials[position]
}
