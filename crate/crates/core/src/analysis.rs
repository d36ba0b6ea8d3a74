//! Harmonic-analysis diagnostics on uniform 4-dimensional grids: Lorentz
//! norms through the decreasing rearrangement, the Riesz potential and the
//! fractional maximal function on the torus, the Adams ratio, local Morrey
//! profiles of an immersion, and the Hodge decomposition of forms on a flat
//! torus.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::energies::{density, PointDerivs};
use crate::error::{Error, Result};
use crate::forms::{binomial, mask_indices, mask_of, sort_sign, subsets};
use crate::immersions::Immersion;
use crate::quadrature::gauss_legendre;

/// Values on the cell centers of a uniform grid over `[0, L₀) × … × [0, L₃)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledFunction {
    pub n: [usize; 4],
    pub lengths: [f64; 4],
    /// Whether the grid is a torus (needed by convolutions).
    pub periodic: bool,
    pub values: Vec<f64>,
}

fn grid_len(n: [usize; 4]) -> usize {
    n.iter().product()
}

fn unflatten(mut flat: usize, n: [usize; 4]) -> [usize; 4] {
    let mut idx = [0; 4];
    for a in (0..4).rev() {
        idx[a] = flat % n[a];
        flat /= n[a];
    }
    idx
}

fn validate_grid(n: [usize; 4], lengths: [f64; 4]) -> Result<()> {
    if n.iter().any(|&k| k < 8) {
        return Err(Error::InvalidInput(format!("grid {n:?} needs at least 8 nodes per axis")));
    }
    if lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidInput(format!("bad side lengths {lengths:?}")));
    }
    Ok(())
}

impl SampledFunction {
    pub fn new(n: [usize; 4], lengths: [f64; 4], periodic: bool, values: Vec<f64>) -> Result<Self> {
        validate_grid(n, lengths)?;
        if values.len() != grid_len(n) {
            return Err(Error::InvalidInput(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid_len(n)
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at cell {i}")));
        }
        Ok(SampledFunction {
            n,
            lengths,
            periodic,
            values,
        })
    }

    /// Sample `f` at the cell centers of a torus grid.
    pub fn torus_from_fn(n: [usize; 4], lengths: [f64; 4], f: impl Fn([f64; 4]) -> f64) -> Result<Self> {
        validate_grid(n, lengths)?;
        let values = (0..grid_len(n)).map(|i| f(cell_center(unflatten(i, n), n, lengths))).collect();
        SampledFunction::new(n, lengths, true, values)
    }

    pub fn zeros_like(&self) -> Self {
        SampledFunction {
            values: vec![0.0; self.values.len()],
            ..self.clone()
        }
    }

    pub fn spacing(&self) -> [f64; 4] {
        std::array::from_fn(|a| self.lengths[a] / self.n[a] as f64)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// `|U|`.
    pub fn measure(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn center(&self, flat: usize) -> [f64; 4] {
        cell_center(unflatten(flat, self.n), self.n, self.lengths)
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        let v = self.cell_volume();
        if p.is_infinite() {
            return self.values.iter().fold(0.0, |m, x| m.max(x.abs()));
        }
        (self.values.iter().map(|x| x.abs().powf(p)).sum::<f64>() * v).powf(1.0 / p)
    }

    pub fn scale(&self, c: f64) -> Self {
        SampledFunction {
            values: self.values.iter().map(|x| c * x).collect(),
            ..self.clone()
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n || self.lengths != other.lengths {
            return Err(Error::InvalidInput("grids differ".into()));
        }
        Ok(SampledFunction {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
            ..self.clone()
        })
    }

    /// Cyclic shift by whole cells: `g(x) = f(x − shift·h)`.
    pub fn shifted(&self, shift: [usize; 4]) -> Self {
        let mut values = vec![0.0; self.values.len()];
        for (i, v) in self.values.iter().enumerate() {
            let idx = unflatten(i, self.n);
            let moved: [usize; 4] = std::array::from_fn(|a| (idx[a] + shift[a]) % self.n[a]);
            values[flatten(moved, self.n)] = *v;
        }
        SampledFunction {
            values,
            ..self.clone()
        }
    }

    fn require_periodic(&self) -> Result<()> {
        if self.periodic {
            Ok(())
        } else {
            Err(Error::Unsupported("operation needs a periodic grid".into()))
        }
    }
}

fn flatten(idx: [usize; 4], n: [usize; 4]) -> usize {
    ((idx[0] * n[1] + idx[1]) * n[2] + idx[2]) * n[3] + idx[3]
}

fn cell_center(idx: [usize; 4], n: [usize; 4], lengths: [f64; 4]) -> [f64; 4] {
    std::array::from_fn(|a| (idx[a] as f64 + 0.5) * lengths[a] / n[a] as f64)
}

/// Minimal-image displacement on one periodic axis.
fn wrap(d: f64, l: f64) -> f64 {
    d - l * (d / l).round()
}

// ----------------------------------------------------------------------------
// Lorentz norms

/// Which maximal function enters the Lorentz norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flavor {
    /// `‖t^{1/p} f*‖_{L^q(dt/t)}`, a quasi-norm.
    Star,
    /// `‖t^{1/p} f**‖_{L^q(dt/t)}` with `f**(t) = t⁻¹∫₀ᵗ f*`.
    DoubleStar,
}

/// Decreasing rearrangement as steps `(value, measure)`.
pub fn rearrangement(f: &SampledFunction) -> Vec<(f64, f64)> {
    let w = f.cell_volume();
    let mut v: Vec<f64> = f.values.iter().map(|x| x.abs()).filter(|x| *x > 0.0).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v.into_iter().map(|x| (x, w)).collect()
}

fn check_exponents(p: f64, q: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::OutOfRange(format!("Lorentz exponent p = {p} must lie in (1, ∞)")));
    }
    if !(q >= 1.0) {
        return Err(Error::OutOfRange(format!("Lorentz exponent q = {q} must be ≥ 1")));
    }
    Ok(())
}

pub fn lorentz_norm(f: &SampledFunction, p: f64, q: f64, flavor: Flavor) -> Result<f64> {
    check_exponents(p, q)?;
    let steps = rearrangement(f);
    Ok(match flavor {
        Flavor::Star => star_norm(&steps, p, q),
        Flavor::DoubleStar => double_star_norm(&steps, p, q),
    })
}

fn star_norm(steps: &[(f64, f64)], p: f64, q: f64) -> f64 {
    let mut t0 = 0.0;
    if q.is_infinite() {
        let mut best: f64 = 0.0;
        for &(v, w) in steps {
            t0 += w;
            best = best.max(v * t0.powf(1.0 / p));
        }
        return best;
    }
    let e = q / p;
    let mut acc = 0.0;
    for &(v, w) in steps {
        let t1 = t0 + w;
        acc += v.powf(q) * (t1.powf(e) - t0.powf(e)) / e;
        t0 = t1;
    }
    acc.powf(1.0 / q)
}

const GL_POINTS: usize = 8;

fn double_star_norm(steps: &[(f64, f64)], p: f64, q: f64) -> f64 {
    if steps.is_empty() {
        return 0.0;
    }
    let (gx, gw) = gauss_legendre(GL_POINTS, 0.0, 1.0);
    let mut t0 = 0.0;
    let mut mass = 0.0;
    if q.is_infinite() {
        // t^{1/p}f** = t^{1/p−1}(a + v t) on each step, a = mass − v t₀
        let mut best: f64 = 0.0;
        for &(v, w) in steps {
            let t1 = t0 + w;
            let a = mass - v * t0;
            let g = |t: f64| t.powf(1.0 / p - 1.0) * (a + v * t);
            if t0 > 0.0 {
                best = best.max(g(t0));
            }
            best = best.max(g(t1));
            let crit = a * (p - 1.0) / v;
            if crit > t0 && crit < t1 {
                best = best.max(g(crit));
            }
            mass += v * w;
            t0 = t1;
        }
        return best;
    }
    let e = q / p;
    let mut acc = 0.0;
    for (k, &(v, w)) in steps.iter().enumerate() {
        let t1 = t0 + w;
        if k == 0 {
            // f** = v on the first step
            acc += v.powf(q) * t1.powf(e) / e;
        } else {
            let a = mass - v * t0;
            for (x, wx) in gx.iter().zip(&gw) {
                let t = t0 + w * x;
                let fss = (a + v * t) / t;
                acc += w * wx * t.powf(e - 1.0) * fss.powf(q);
            }
        }
        mass += v * w;
        t0 = t1;
    }
    // tail: f** = mass / t beyond the support
    acc += mass.powf(q) * t0.powf(e - q) / (q - e);
    acc.powf(1.0 / q)
}

/// `‖f‖_{p,q} / (|U|^{(p'−p)/(p'p)} ‖f‖_{p',q'})`; zero for `f = 0`.
pub fn lorentz_inclusion_check(
    f: &SampledFunction,
    (p, q): (f64, f64),
    (p2, q2): (f64, f64),
    flavor: Flavor,
) -> Result<f64> {
    if !(p < p2) {
        return Err(Error::OutOfRange(format!("inclusion needs p < p' (got {p}, {p2})")));
    }
    let num = lorentz_norm(f, p, q, flavor)?;
    let den = lorentz_norm(f, p2, q2, flavor)?;
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(num / (f.measure().powf((p2 - p) / (p2 * p)) * den))
}

// ----------------------------------------------------------------------------
// Spectral convolution on the torus

struct Fft4 {
    n: [usize; 4],
    forward: [Arc<dyn Fft<f64>>; 4],
    inverse: [Arc<dyn Fft<f64>>; 4],
}

impl Fft4 {
    fn new(n: [usize; 4]) -> Self {
        let mut planner = FftPlanner::new();
        Fft4 {
            n,
            forward: std::array::from_fn(|a| planner.plan_fft_forward(n[a])),
            inverse: std::array::from_fn(|a| planner.plan_fft_inverse(n[a])),
        }
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let strides = [n[1] * n[2] * n[3], n[2] * n[3], n[3], 1];
        for axis in 0..4 {
            let plan = if inverse { &self.inverse[axis] } else { &self.forward[axis] };
            let len = n[axis];
            let stride = strides[axis];
            let mut line = vec![Complex64::new(0.0, 0.0); len];
            for start in 0..data.len() {
                // visit each line once, from the cell whose axis index is 0
                if (start / stride) % len != 0 {
                    continue;
                }
                for k in 0..len {
                    line[k] = data[start + k * stride];
                }
                plan.process(&mut line);
                for k in 0..len {
                    data[start + k * stride] = line[k];
                }
            }
        }
        if inverse {
            let s = 1.0 / data.len() as f64;
            data.iter_mut().for_each(|z| *z *= s);
        }
    }

    fn transform(&self, values: &[f64]) -> Vec<Complex64> {
        let mut d: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.run(&mut d, false);
        d
    }

    fn real_inverse(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.run(&mut spec, true);
        spec.into_iter().map(|z| z.re).collect()
    }
}

/// `(f ⊛ k)(xᵢ) = Σⱼ f(xⱼ) k(xᵢ − xⱼ) · cell volume` for a kernel sampled on
/// minimal-image displacements.
fn periodic_convolution(f: &SampledFunction, kernel: &[f64], fft: &Fft4) -> Vec<f64> {
    let a = fft.transform(&f.values);
    let b = fft.transform(kernel);
    let v = f.cell_volume();
    fft.real_inverse(a.iter().zip(&b).map(|(x, y)| x * y * v).collect())
}

/// Displacement of cell `flat` from cell 0, reduced to the fundamental cell.
fn displacement(f: &SampledFunction, flat: usize) -> [f64; 4] {
    let idx = unflatten(flat, f.n);
    let h = f.spacing();
    std::array::from_fn(|a| wrap(idx[a] as f64 * h[a], f.lengths[a]))
}

fn norm4(x: [f64; 4]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Default exponent of the Riesz kernel `|x|^{−a}`; `a = 3` is the order-one
/// potential in four dimensions.
pub const DEFAULT_RIESZ_EXPONENT: f64 = 3.0;

/// The sampled kernel `|x|^{−a}` on minimal-image displacements. The
/// singular cell holds the average of `|x|^{−a}` over the ball of equal
/// volume, `4ρ^{−a}/(4 − a)`.
pub fn riesz_kernel(f: &SampledFunction, a: f64) -> Result<Vec<f64>> {
    if !(a >= 0.0 && a < 4.0) {
        return Err(Error::OutOfRange(format!(
            "kernel |x|^-{a} is not locally integrable in four dimensions"
        )));
    }
    let rho = (2.0 * f.cell_volume() / (PI * PI)).powf(0.25);
    Ok((0..f.values.len())
        .map(|i| {
            if i == 0 {
                4.0 * rho.powf(-a) / (4.0 - a)
            } else {
                norm4(displacement(f, i)).powf(-a)
            }
        })
        .collect())
}

/// Periodic convolution of `f` with `|x|^{−a}` truncated to the fundamental cell.
pub fn riesz_potential(f: &SampledFunction, a: f64) -> Result<SampledFunction> {
    f.require_periodic()?;
    let kernel = riesz_kernel(f, a)?;
    let fft = Fft4::new(f.n);
    Ok(SampledFunction {
        values: periodic_convolution(f, &kernel, &fft),
        ..f.clone()
    })
}

/// Dyadic radii `2^{−j} < 1` between one cell diagonal and half the shortest side.
pub fn dyadic_radii(f: &SampledFunction) -> Vec<f64> {
    let h = f.spacing().iter().cloned().fold(0.0, f64::max);
    let top = 0.5 * f.lengths.iter().cloned().fold(f64::INFINITY, f64::min);
    (1..60)
        .map(|j| 0.5f64.powi(j))
        .filter(|&r| r < 1.0 && r <= top && r >= h)
        .collect()
}

/// `‖f‖_{L¹(B_r(center))}` summing cells whose centers lie in the ball.
pub fn ball_l1(f: &SampledFunction, center: [f64; 4], r: f64) -> f64 {
    let v = f.cell_volume();
    let mut s = 0.0;
    for (i, x) in f.values.iter().enumerate() {
        let c = f.center(i);
        let d: [f64; 4] = std::array::from_fn(|a| {
            let d = c[a] - center[a];
            if f.periodic {
                wrap(d, f.lengths[a])
            } else {
                d
            }
        });
        if norm4(d) <= r {
            s += x.abs();
        }
    }
    s * v
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::OutOfRange(format!("β = {beta} must lie in (0, 1)")));
    }
    Ok(())
}

/// `sup_r r^{−1−β}‖f‖_{L¹(B_r(center))}` over the dyadic ladder.
pub fn frac_maximal(f: &SampledFunction, beta: f64, center: [f64; 4]) -> Result<f64> {
    check_beta(beta)?;
    Ok(dyadic_radii(f)
        .into_iter()
        .map(|r| r.powf(-1.0 - beta) * ball_l1(f, center, r))
        .fold(0.0, f64::max))
}

/// The fractional maximal function at every cell center of a torus grid.
pub fn frac_maximal_field(f: &SampledFunction, beta: f64) -> Result<SampledFunction> {
    check_beta(beta)?;
    f.require_periodic()?;
    let fft = Fft4::new(f.n);
    let abs = SampledFunction {
        values: f.values.iter().map(|x| x.abs()).collect(),
        ..f.clone()
    };
    let fa = fft.transform(&abs.values);
    let v = f.cell_volume();
    let mut out: Vec<f64> = vec![0.0; f.values.len()];
    for r in dyadic_radii(f) {
        let ball: Vec<f64> = (0..f.values.len())
            .map(|i| if norm4(displacement(f, i)) <= r { 1.0 } else { 0.0 })
            .collect();
        let fb = fft.transform(&ball);
        let conv = fft.real_inverse(fa.iter().zip(&fb).map(|(x, y)| x * y * v).collect());
        let w = r.powf(-1.0 - beta);
        for (o, c) in out.iter_mut().zip(conv) {
            *o = f64::max(*o, w * f64::max(c, 0.0));
        }
    }
    Ok(SampledFunction {
        values: out,
        ..f.clone()
    })
}

/// Pieces of the Adams ratio.
#[derive(Clone, Debug)]
pub struct AdamsReport {
    pub beta: f64,
    pub p: f64,
    /// `λ = (3 − β)p`.
    pub lambda: f64,
    /// `s = p(3 − β)/(2 − β)`.
    pub s: f64,
    pub riesz_norm: f64,
    pub maximal_sup: f64,
    pub lp_norm: f64,
    pub ratio: f64,
}

/// `‖I f‖_{L^s} / (‖M f‖_∞^{p/λ} ‖f‖_p^{1−p/λ})` on the torus, with the
/// default Riesz exponent.
pub fn adams_ratio(f: &SampledFunction, beta: f64, p: f64) -> Result<AdamsReport> {
    check_beta(beta)?;
    let lambda = (3.0 - beta) * p;
    if !(p > 1.0 && p < lambda && lambda <= 4.0) {
        return Err(Error::OutOfRange(format!(
            "need 1 < p < λ ≤ 4 with λ = (3 − β)p (p = {p}, λ = {lambda})"
        )));
    }
    let s = p * (3.0 - beta) / (2.0 - beta);
    let riesz_norm = riesz_potential(f, DEFAULT_RIESZ_EXPONENT)?.lp_norm(s);
    let maximal_sup = frac_maximal_field(f, beta)?.lp_norm(f64::INFINITY);
    let lp_norm = f.lp_norm(p);
    let den = maximal_sup.powf(p / lambda) * lp_norm.powf(1.0 - p / lambda);
    Ok(AdamsReport {
        beta,
        p,
        lambda,
        s,
        riesz_norm,
        maximal_sup,
        lp_norm,
        ratio: if den == 0.0 { 0.0 } else { riesz_norm / den },
    })
}

// ----------------------------------------------------------------------------
// Morrey profiles

/// `r ↦ ‖h‖_{L⁴(B_r)} + ‖π_n dH‖_{L²(B_r)}` on coordinate balls of the chart.
#[derive(Clone, Debug)]
pub struct MorreyProfile {
    pub immersion: String,
    pub center: [f64; 4],
    pub radii: Vec<f64>,
    pub h_l4: Vec<f64>,
    pub dh_l2: Vec<f64>,
    pub values: Vec<f64>,
    /// Least-squares slope of `log value` against `log r`.
    pub exponent: f64,
}

impl MorreyProfile {
    pub fn records(&self) -> Vec<String> {
        self.radii
            .iter()
            .zip(&self.values)
            .map(|(r, v)| {
                format!(
                    "record=morrey immersion={} r={r:.6e} value={v:.12e} exponent={:.6}",
                    self.immersion, self.exponent
                )
            })
            .collect()
    }
}

/// Quadrature on the coordinate ball of radius `r`: Gauss in `ρ` (weight
/// `ρ³`) and in `t = sin²a`, trapezoid in the two Hopf angles.
pub fn ball_nodes(center: [f64; 4], r: f64, radial: usize, angular: usize) -> Vec<([f64; 4], f64)> {
    let (rx, rw) = gauss_legendre(radial, 0.0, r);
    let (tx, tw) = gauss_legendre(radial, 0.0, 1.0);
    let dphi = 2.0 * PI / angular as f64;
    let mut out = Vec::with_capacity(radial * radial * angular * angular);
    for (rho, wr) in rx.iter().zip(&rw) {
        for (t, wt) in tx.iter().zip(&tw) {
            let (c1, c2) = ((1.0 - t).sqrt(), t.sqrt());
            for b in 0..angular {
                let (sb, cb) = (b as f64 * dphi).sin_cos();
                for c in 0..angular {
                    let (sc, cc) = ((c as f64 + 0.5) * dphi).sin_cos();
                    let x = [
                        center[0] + rho * c1 * cb,
                        center[1] + rho * c1 * sb,
                        center[2] + rho * c2 * cc,
                        center[3] + rho * c2 * sc,
                    ];
                    out.push((x, wr * rho.powi(3) * 0.5 * wt * dphi * dphi));
                }
            }
        }
    }
    out
}

pub fn morrey_profile(imm: &Immersion, center: [f64; 4], radii: &[f64]) -> Result<MorreyProfile> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidInput("radii must be positive".into()));
    }
    let mut h_l4 = Vec::with_capacity(radii.len());
    let mut dh_l2 = Vec::with_capacity(radii.len());
    for &r in radii {
        let (mut a, mut b) = (0.0, 0.0);
        for (x, w) in ball_nodes(center, r, 8, 12) {
            let d = density(&PointDerivs::from_point(&imm.point(x, 3)?)?)?;
            a += d.h_sq * d.h_sq * d.volume * w;
            b += d.dh_sq * d.volume * w;
        }
        h_l4.push(a.powf(0.25));
        dh_l2.push(b.sqrt());
    }
    let values: Vec<f64> = h_l4.iter().zip(&dh_l2).map(|(a, b)| a + b).collect();
    let exponent = log_slope(radii, &values);
    Ok(MorreyProfile {
        immersion: imm.id().to_string(),
        center,
        radii: radii.to_vec(),
        h_l4,
        dh_l2,
        values,
        exponent,
    })
}

/// Least-squares slope of `log y` against `log x` (NaN if any `y ≤ 0`).
pub fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    if x.len() < 2 || y.iter().any(|v| !(*v > 0.0)) {
        return f64::NAN;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

// ----------------------------------------------------------------------------
// Hodge decomposition on the flat torus

/// A `k`-form on a periodic grid with `width` real values per component.
/// Components follow increasing index sets `{i₁ < … < i_k}` in mask order;
/// `comps[c * width + w]` holds the grid of component `c`, value slot `w`.
#[derive(Clone, Debug, PartialEq)]
pub struct FormFieldFlat {
    pub k: usize,
    pub width: usize,
    pub n: [usize; 4],
    pub lengths: [f64; 4],
    pub comps: Vec<Vec<f64>>,
}

impl FormFieldFlat {
    pub fn zero(k: usize, width: usize, n: [usize; 4], lengths: [f64; 4]) -> Result<Self> {
        if k > 4 || width == 0 {
            return Err(Error::InvalidInput(format!("no {k}-forms of width {width}")));
        }
        validate_grid(n, lengths)?;
        Ok(FormFieldFlat {
            k,
            width,
            n,
            lengths,
            comps: vec![vec![0.0; grid_len(n)]; binomial(4, k) * width],
        })
    }

    /// Sample `f(component mask, value slot, x)` at cell centers.
    pub fn from_fn(
        k: usize,
        width: usize,
        n: [usize; 4],
        lengths: [f64; 4],
        f: impl Fn(u32, usize, [f64; 4]) -> f64,
    ) -> Result<Self> {
        let mut out = FormFieldFlat::zero(k, width, n, lengths)?;
        for (c, mask) in subsets(4, k).into_iter().enumerate() {
            for w in 0..width {
                let grid = &mut out.comps[c * width + w];
                for (i, v) in grid.iter_mut().enumerate() {
                    *v = f(mask, w, cell_center(unflatten(i, n), n, lengths));
                }
            }
        }
        Ok(out)
    }

    fn cell_volume(&self) -> f64 {
        (0..4).map(|a| self.lengths[a] / self.n[a] as f64).product()
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(FormFieldFlat {
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect(),
            ..self.clone()
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(FormFieldFlat {
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect(),
            ..self.clone()
        })
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.k != other.k || self.width != other.width || self.n != other.n || self.lengths != other.lengths {
            return Err(Error::InvalidInput("forms of different shape".into()));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `∫⟨A, B⟩` with the flat metric, summing over increasing index sets.
    pub fn l2_inner(&self, other: &Self) -> Result<f64> {
        self.same_shape(other)?;
        let s: f64 = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum();
        Ok(s * self.cell_volume())
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_inner(self).unwrap().sqrt()
    }
}

/// Spectral data of a form: one complex grid per (component, slot).
struct Spectral {
    k: usize,
    width: usize,
    comps: Vec<Vec<Complex64>>,
}

/// Angular wave numbers per axis; the Nyquist mode gets 0 so that spectral
/// derivatives of real data stay real.
fn wave_numbers(n: usize, l: f64) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let k = if j < n / 2 {
                j as i64
            } else if 2 * j == n {
                0
            } else {
                j as i64 - n as i64
            };
            2.0 * PI * k as f64 / l
        })
        .collect()
}

fn mode_vector(flat: usize, n: [usize; 4], xi: &[Vec<f64>; 4]) -> [f64; 4] {
    let idx = unflatten(flat, n);
    std::array::from_fn(|a| xi[a][idx[a]])
}

/// `ξ ∧ A` on one mode; `a` indexed by masks of degree `k`.
fn wedge_xi(xi: [f64; 4], a: &[Complex64], k: usize) -> Vec<Complex64> {
    let src = subsets(4, k);
    let dst = subsets(4, k + 1);
    dst.iter()
        .map(|&mask| {
            let idx = mask_indices(mask);
            let mut acc = Complex64::new(0.0, 0.0);
            for (s, &i) in idx.iter().enumerate() {
                let rest = mask & !(1 << i);
                let pos = src.iter().position(|&m| m == rest).unwrap();
                let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
                acc += a[pos] * (sign * xi[i]);
            }
            acc
        })
        .collect()
}

/// `ι_ξ A`, contracting the first slot: `(ι_ξ A)_J = Σ_j ξ_j A_{jJ}`.
fn interior_xi(xi: [f64; 4], a: &[Complex64], k: usize) -> Vec<Complex64> {
    if k == 0 {
        return Vec::new();
    }
    let src = subsets(4, k);
    subsets(4, k - 1)
        .iter()
        .map(|&mask| {
            let rest = mask_indices(mask);
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..4 {
                if mask & (1 << j) != 0 {
                    continue;
                }
                let mut full = vec![j];
                full.extend_from_slice(&rest);
                let (m, sign) = sort_sign(&full).expect("distinct indices");
                let pos = src.iter().position(|&x| x == m).unwrap();
                acc += a[pos] * (sign * xi[j]);
            }
            acc
        })
        .collect()
}

fn to_spectral(a: &FormFieldFlat, fft: &Fft4) -> Spectral {
    Spectral {
        k: a.k,
        width: a.width,
        comps: a.comps.iter().map(|g| fft.transform(g)).collect(),
    }
}

fn from_spectral(s: Spectral, like: &FormFieldFlat, fft: &Fft4) -> FormFieldFlat {
    FormFieldFlat {
        k: s.k,
        width: s.width,
        n: like.n,
        lengths: like.lengths,
        comps: s.comps.into_iter().map(|g| fft.real_inverse(g)).collect(),
    }
}

/// Apply a per-mode linear map `(ξ, components of one slot) ↦ components`.
fn per_mode(
    a: &Spectral,
    n: [usize; 4],
    xi: &[Vec<f64>; 4],
    out_k: usize,
    f: impl Fn([f64; 4], &[Complex64]) -> Vec<Complex64>,
) -> Spectral {
    let nc = binomial(4, a.k);
    let oc = binomial(4, out_k);
    let len = grid_len(n);
    let mut comps = vec![vec![Complex64::new(0.0, 0.0); len]; oc * a.width];
    let mut buf = vec![Complex64::new(0.0, 0.0); nc];
    for w in 0..a.width {
        for m in 0..len {
            for c in 0..nc {
                buf[c] = a.comps[c * a.width + w][m];
            }
            let v = f(mode_vector(m, n, xi), &buf);
            for (c, z) in v.into_iter().enumerate() {
                comps[c * a.width + w][m] = z;
            }
        }
    }
    Spectral {
        k: out_k,
        width: a.width,
        comps,
    }
}

fn xi_of(a: &FormFieldFlat) -> [Vec<f64>; 4] {
    std::array::from_fn(|ax| wave_numbers(a.n[ax], a.lengths[ax]))
}

/// Spectral exterior derivative, `(dA)^ = i ξ ∧ Â`.
pub fn flat_d(a: &FormFieldFlat) -> Result<FormFieldFlat> {
    if a.k == 4 {
        return FormFieldFlat::zero(4, a.width, a.n, a.lengths);
    }
    let fft = Fft4::new(a.n);
    let xi = xi_of(a);
    let s = per_mode(&to_spectral(a, &fft), a.n, &xi, a.k + 1, |x, v| {
        wedge_xi(x, v, a.k).into_iter().map(|z| z * Complex64::i()).collect()
    });
    let mut out = from_spectral(s, a, &fft);
    out.k = a.k + 1;
    Ok(out)
}

/// Spectral divergence on the first slot, `(d*A)^ = i ι_ξ Â`, matching
/// `(d*A)_J = ∂^j A_{jJ}` of the forms module.
pub fn flat_codifferential(a: &FormFieldFlat) -> Result<FormFieldFlat> {
    if a.k == 0 {
        return FormFieldFlat::zero(0, a.width, a.n, a.lengths);
    }
    let fft = Fft4::new(a.n);
    let xi = xi_of(a);
    let s = per_mode(&to_spectral(a, &fft), a.n, &xi, a.k - 1, |x, v| {
        interior_xi(x, v, a.k).into_iter().map(|z| z * Complex64::i()).collect()
    });
    let mut out = from_spectral(s, a, &fft);
    out.k = a.k - 1;
    Ok(out)
}

/// `A = da + d*b + ω` with `d*a = 0`, `db = 0` and `ω` harmonic.
#[derive(Clone, Debug)]
pub struct HodgeDecomposition {
    /// `(k−1)`-form potential (absent for `k = 0`).
    pub a: Option<FormFieldFlat>,
    /// `(k+1)`-form potential (absent for `k = 4`).
    pub b: Option<FormFieldFlat>,
    pub exact: FormFieldFlat,
    pub coexact: FormFieldFlat,
    /// Zero mode, plus modes whose wave vector vanishes after the Nyquist
    /// convention.
    pub harmonic: FormFieldFlat,
}

/// Hodge decomposition on a torus whose metric is the constant matrix
/// `metric`; only the identity is supported.
pub fn hodge_decompose_flat(a: &FormFieldFlat, metric: &[[f64; 4]; 4]) -> Result<HodgeDecomposition> {
    for i in 0..4 {
        for j in 0..4 {
            let id = if i == j { 1.0 } else { 0.0 };
            if metric[i][j] != id {
                return Err(Error::Unsupported(
                    "Hodge decomposition is implemented for the flat torus metric only".into(),
                ));
            }
        }
    }
    let fft = Fft4::new(a.n);
    let xi = xi_of(a);
    let spec = to_spectral(a, &fft);
    let k = a.k;
    let zero = |z: usize| vec![Complex64::new(0.0, 0.0); binomial(4, z)];
    let xi2 = |x: [f64; 4]| x.iter().map(|v| v * v).sum::<f64>();
    let exact = per_mode(&spec, a.n, &xi, k, |x, v| {
        let q = xi2(x);
        if q == 0.0 || k == 0 {
            return zero(k);
        }
        wedge_xi(x, &interior_xi(x, v, k), k - 1).into_iter().map(|z| z / q).collect()
    });
    let coexact = per_mode(&spec, a.n, &xi, k, |x, v| {
        let q = xi2(x);
        if q == 0.0 || k == 4 {
            return zero(k);
        }
        interior_xi(x, &wedge_xi(x, v, k), k + 1).into_iter().map(|z| z / q).collect()
    });
    let harmonic = per_mode(&spec, a.n, &xi, k, |x, v| if xi2(x) == 0.0 { v.to_vec() } else { zero(k) });
    let pot_a = (k > 0).then(|| {
        per_mode(&spec, a.n, &xi, k - 1, |x, v| {
            let q = xi2(x);
            if q == 0.0 {
                return zero(k - 1);
            }
            interior_xi(x, v, k).into_iter().map(|z| z * Complex64::new(0.0, -1.0 / q)).collect()
        })
    });
    let pot_b = (k < 4).then(|| {
        per_mode(&spec, a.n, &xi, k + 1, |x, v| {
            let q = xi2(x);
            if q == 0.0 {
                return zero(k + 1);
            }
            wedge_xi(x, v, k).into_iter().map(|z| z * Complex64::new(0.0, -1.0 / q)).collect()
        })
    });
    let shaped = |s: Spectral| {
        let kk = s.k;
        let mut f = from_spectral(s, a, &fft);
        f.k = kk;
        f
    };
    Ok(HodgeDecomposition {
        a: pot_a.map(shaped),
        b: pot_b.map(shaped),
        exact: shaped(exact),
        coexact: shaped(coexact),
        harmonic: shaped(harmonic),
    })
}

/// Mask of a component for callers building forms by index lists.
pub fn component_mask(idx: &[usize]) -> u32 {
    mask_of(idx)
}

/// A smooth random function on the unit torus: a few low Fourier modes with
/// seeded amplitudes and phases, plus a positive offset bump.
pub fn random_smooth(seed: u64, n: usize) -> Result<SampledFunction> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<([f64; 4], f64, f64)> = (0..6)
        .map(|_| {
            let k: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-2i32..=2) as f64);
            (k, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    let c: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
    let width = rng.gen_range(0.1..0.3);
    SampledFunction::torus_from_fn([n; 4], [1.0; 4], |x| {
        let mut v: f64 = modes
            .iter()
            .map(|(k, a, ph)| a * (2.0 * PI * (0..4).map(|i| k[i] * x[i]).sum::<f64>() + ph).cos())
            .sum();
        let d2: f64 = (0..4).map(|i| wrap(x[i] - c[i], 1.0).powi(2)).sum();
        v += 2.0 * (-d2 / (width * width)).exp();
        v
    })
}
