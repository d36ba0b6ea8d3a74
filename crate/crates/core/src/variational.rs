//! The sixth-order Euler–Lagrange operator `W` of `E_A`, the explicit pieces
//! of its Noether field, and pointwise checks of the structural identities
//! satisfied by immersions.

use crate::energies::{density, PointDerivs};
use crate::error::{Error, Result};
use crate::forms::{
    codifferential, exterior_d, interior_mult, subsets, mask_indices, wedge_param, AmbientProduct,
    FormMetric, MultivectorForm,
};
use crate::geometry::{
    frame_with, riemann, sym, FrameOptions, GeometryFrame, ImmersionPoint, VecJet, PAIRS,
};
use crate::immersions::{Immersion, ImmersionSpec};
use crate::jets::{dot, Jet};
use crate::quadrature::{pairwise_sum, Chart};

/// Names of the stored summands of `W`, in order.
pub const TERM_LABELS: [&str; 11] = [
    "half_normal_bilaplacian_H",
    "half_normal_laplacian_Hhh",
    "normal_laplacian_H2H",
    "div_H_grad_H2",
    "div_Hh_dH",
    "h_dot_lapH_h",
    "dH_dot_dH_h",
    "HhHh_h",
    "HhhH_dot_h_h",
    "H2_Hh_h",
    "density_trace_h",
];

/// Every summand with its displayed coefficient.
pub const LITERAL_WEIGHTS: [f64; 11] = [1.0; 11];

/// Summand weights that make `∫⟨W, φ⟩` the first variation of `E_A` up to
/// sign: the `π_n∇_j(H∇ʲ|H|²)` term enters with coefficient 4 instead of 8.
/// Found by regressing central differences of `E_A` on the per-term pairings
/// over 36 Fourier variations of a doubly warped torus.
pub const FITTED_WEIGHTS: [f64; 11] = [1.0, 1.0, 1.0, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];

/// `W` at a point together with its summands.
#[derive(Clone, Debug)]
pub struct ELValue {
    pub w: Vec<f64>,
    pub terms: Vec<Vec<f64>>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl ELValue {
    pub fn norm(&self) -> f64 {
        norm(&self.w)
    }

    /// `Σ wₖ termₖ`.
    pub fn weighted(&self, weights: &[f64; 11]) -> Vec<f64> {
        let mut out = vec![0.0; self.w.len()];
        for (t, wk) in self.terms.iter().zip(weights) {
            for (o, x) in out.iter_mut().zip(t) {
                *o += wk * x;
            }
        }
        out
    }

    /// Largest summand norm; the natural size against which `W` is small.
    pub fn scale(&self) -> f64 {
        self.terms.iter().map(|t| norm(t)).fold(0.0, f64::max)
    }
}

fn trunc(v: &[Jet], k: usize) -> VecJet {
    v.iter().map(|c| c.truncated(k)).collect()
}

fn weight(q: usize) -> f64 {
    let (i, j) = PAIRS[q];
    if i == j {
        1.0
    } else {
        2.0
    }
}

/// `Aⁱʲ = gⁱᵃ A_ab gᵇʲ` for symmetric scalar tensors.
fn raise2(ginv: &[Jet; 10], a: &[Jet; 10]) -> [Jet; 10] {
    let order = ginv[0].order().min(a[0].order());
    let mut half = [[(); 4]; 4].map(|r| r.map(|_| Jet::zero(order)));
    // half[i][b] = gⁱᵃ A_ab
    for (i, row) in half.iter_mut().enumerate() {
        for (b, out) in row.iter_mut().enumerate() {
            for k in 0..4 {
                crate::jets::fma_into(out, &ginv[sym(i, k)], &a[sym(k, b)]);
            }
        }
    }
    std::array::from_fn(|q| {
        let (i, j) = PAIRS[q];
        let mut acc = Jet::zero(order);
        for b in 0..4 {
            crate::jets::fma_into(&mut acc, &half[i][b], &ginv[sym(b, j)]);
        }
        acc
    })
}

fn matrix(v: &[f64; 10]) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    for (q, &(i, j)) in PAIRS.iter().enumerate() {
        m[i][j] = v[q];
        m[j][i] = v[q];
    }
    m
}

fn raise_values(ginv: &[[f64; 4]; 4], a: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut s = 0.0;
            for k in 0..4 {
                for l in 0..4 {
                    s += ginv[i][k] * a[k][l] * ginv[l][j];
                }
            }
            out[i][j] = s;
        }
    }
    out
}

fn options_el() -> FrameOptions {
    FrameOptions {
        curvature: false,
        ..FrameOptions::default()
    }
}

/// Evaluate `W` at a point whose jets have order at least 6.
pub fn willmore_operator(p: &ImmersionPoint) -> Result<ELValue> {
    if p.order() < 6 {
        return Err(Error::OrderExhausted {
            needed: 6,
            available: p.order(),
        });
    }
    let f = frame_with(&p.truncated(6), &options_el())?;
    willmore_from_frame(&f)
}

/// `W` from a frame built with `K ≥ 6` and normal Laplacians enabled.
pub fn willmore_from_frame(f: &GeometryFrame) -> Result<ELValue> {
    let lap2 = f.normal_bilaplacian_h.as_ref().ok_or(Error::OrderExhausted {
        needed: 6,
        available: f.order,
    })?;
    let lap = f.normal_laplacian_h.as_ref().expect("order ≥ 6 implies Δ⊥H");
    let ngrad = f.normal_grad_h.as_ref().expect("order ≥ 6 implies π_n dH");
    let m = f.ambient_dim;

    // ⟨H·h, h⟩ and |H|²H to order 2, then Δ⊥
    let ginv2: [Jet; 10] = std::array::from_fn(|q| f.metric_inv[q].truncated(2));
    let h2: [VecJet; 10] = std::array::from_fn(|q| trunc(&f.second_form[q], 2));
    let hv2 = trunc(&f.mean_curvature, 2);
    let hh: [Jet; 10] = std::array::from_fn(|q| dot(&hv2, &h2[q]));
    let hh_up = raise2(&ginv2, &hh);
    let y: VecJet = (0..m)
        .map(|c| {
            let mut acc = Jet::zero(2);
            for q in 0..10 {
                let t = &hh_up[q] * &h2[q][c];
                acc.add_scaled(weight(q), &t);
            }
            acc
        })
        .collect();
    let hsq = dot(&hv2, &hv2);
    let z: VecJet = hv2.iter().map(|c| &hsq * c).collect();
    let lap_y = f.normal_laplacian_unchecked(&y)?;
    let lap_z = f.normal_laplacian_unchecked(&z)?;

    // divergence terms to order 1
    let ginv1: [Jet; 10] = std::array::from_fn(|q| f.metric_inv[q].truncated(1));
    let hv1 = trunc(&f.mean_curvature, 1);
    let dhsq: [Jet; 4] = std::array::from_fn(|k| hsq.partial(k).unwrap());
    let x4: [VecJet; 4] = std::array::from_fn(|j| {
        let mut up = Jet::zero(1);
        for k in 0..4 {
            crate::jets::fma_into(&mut up, &ginv1[sym(j, k)], &dhsq[k]);
        }
        hv1.iter().map(|c| c * &up).collect()
    });
    let div4 = f.project_normal(&f.divergence(&x4));
    let hh1: [Jet; 10] = std::array::from_fn(|q| hh[q].truncated(1));
    let hh1_up = raise2(&ginv1, &hh1);
    let ng1: [VecJet; 4] = std::array::from_fn(|i| trunc(&ngrad[i], 1));
    let x5: [VecJet; 4] = std::array::from_fn(|j| {
        (0..m)
            .map(|c| {
                let mut acc = Jet::zero(1);
                for i in 0..4 {
                    crate::jets::fma_into(&mut acc, &hh1_up[sym(j, i)], &ng1[i][c]);
                }
                acc
            })
            .collect()
    });
    let div5 = f.project_normal(&f.divergence(&x5));

    // algebraic terms from values
    let gi = f.metric_inv_values();
    let h: Vec<Vec<f64>> = (0..10).map(|q| f.second_form[q].iter().map(|c| c.value()).collect()).collect();
    let hm = |i: usize, j: usize| &h[sym(i, j)];
    let hv: Vec<f64> = f.mean_curvature_value();
    let dl: Vec<f64> = lap.iter().map(|c| c.value()).collect();
    let dn: Vec<Vec<f64>> = ngrad.iter().map(|v| v.iter().map(|c| c.value()).collect()).collect();
    let dotv = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let b_low = matrix(&std::array::from_fn(|q| dotv(&hv, &h[q])));
    let b_up = raise_values(&gi, &b_low);
    let yv: Vec<f64> = y.iter().map(|c| c.value()).collect();
    let yh_up = raise_values(&gi, &matrix(&std::array::from_fn(|q| dotv(&yv, &h[q]))));
    let lh_up = raise_values(&gi, &matrix(&std::array::from_fn(|q| dotv(&dl, &h[q]))));
    let dd_up = raise_values(
        &gi,
        &matrix(&std::array::from_fn(|q| {
            let (i, j) = PAIRS[q];
            dotv(&dn[i], &dn[j])
        })),
    );
    // (H·h^{ik})(H·h^j_k) = Σ_k b_up[i][k] (g^{jl} b_low[l][k])
    let mut quad = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut s = 0.0;
            for k in 0..4 {
                let mix: f64 = (0..4).map(|l| gi[j][l] * b_low[l][k]).sum();
                s += b_up[i][k] * mix;
            }
            quad[i][j] = s;
        }
    }
    let contract = |coef: &[[f64; 4]; 4], s: f64| -> Vec<f64> {
        let mut out = vec![0.0; m];
        for i in 0..4 {
            for j in 0..4 {
                let c = s * coef[i][j];
                for (o, x) in out.iter_mut().zip(hm(i, j)) {
                    *o += c * x;
                }
            }
        }
        out
    };
    let h2v = dotv(&hv, &hv);
    let grad2: f64 = (0..4).map(|i| (0..4).map(|j| gi[i][j] * dotv(&dn[i], &dn[j])).sum::<f64>()).sum();
    let hdoth: f64 = (0..4).map(|i| (0..4).map(|j| b_up[i][j] * b_low[i][j]).sum::<f64>()).sum();
    let dens = grad2 - hdoth + 7.0 * h2v * h2v;

    let vals = |v: &[Jet], s: f64| -> Vec<f64> { v.iter().map(|c| s * c.value()).collect() };
    let terms = vec![
        vals(lap2, 0.5),
        vals(&lap_y, 0.5),
        vals(&lap_z, -7.0),
        vals(&div4, 8.0),
        vals(&div5, 4.0),
        contract(&lh_up, 0.5),
        contract(&dd_up, -2.0),
        contract(&quad, 2.0),
        contract(&yh_up, 0.5),
        contract(&b_up, -7.0 * h2v),
        hv.iter().map(|x| 4.0 * dens * x).collect(),
    ];
    let mut w = vec![0.0; m];
    for t in &terms {
        for (o, x) in w.iter_mut().zip(t) {
            *o += x;
        }
    }
    Ok(ELValue { w, terms })
}

/// Tangential part of an ambient vector at the frame's base point.
pub fn tangential_part(f: &GeometryFrame, v: &[f64]) -> Vec<f64> {
    let p = f.normal_projector();
    (0..v.len())
        .map(|a| v[a] - (0..v.len()).map(|b| p[a][b] * v[b]).sum::<f64>())
        .collect()
}

/// Central-difference first variation of `E_A` against `∫⟨W, φ⟩`.
#[derive(Clone, Debug)]
pub struct ConsistencyReport {
    pub steps: Vec<f64>,
    /// `D(t) = [E_A(Φ+tφ) − E_A(Φ−tφ)] / 2t`.
    pub differences: Vec<f64>,
    /// `P = ∫⟨W, φ⟩ dvol_g`.
    pub pairing: f64,
    /// `D(t)/P` per step (NaN when `P = 0`).
    pub ratios: Vec<f64>,
    /// Richardson extrapolation of the last two differences.
    pub extrapolated_difference: f64,
    pub extrapolated_ratio: f64,
    /// Observed order of `D(t) → D(0)` from the last three steps.
    pub observed_order: f64,
}

#[derive(Clone, Debug)]
pub struct ConsistencyOptions {
    /// Decreasing steps, each half the previous one.
    pub steps: Vec<f64>,
    /// Periodic axes along which both `Φ` and `φ` are invariant up to ambient
    /// isometries; the integrand is then constant there and one node suffices.
    pub invariant_axes: [bool; 4],
    /// Weights applied to the stored summands of `W` before pairing.
    pub term_weights: [f64; 11],
}

impl Default for ConsistencyOptions {
    fn default() -> Self {
        ConsistencyOptions {
            steps: vec![1e-2, 5e-3, 2.5e-3],
            invariant_axes: [false; 4],
            term_weights: LITERAL_WEIGHTS,
        }
    }
}

fn consistency_nodes(chart: &Chart, axes: [bool; 4]) -> Result<Vec<([f64; 4], f64)>> {
    if axes == [false; 4] {
        return Ok(chart.nodes());
    }
    let Chart::PeriodicBox { n } = chart else {
        return Err(Error::Unsupported(
            "invariant axes need a periodic chart".into(),
        ));
    };
    let reduced: [usize; 4] = std::array::from_fn(|a| if axes[a] { 1 } else { n[a] });
    let nodes = Chart::PeriodicBox { n: reduced }.nodes();
    Ok(nodes)
}

fn energy_ea(imm: &Immersion, nodes: &[([f64; 4], f64)]) -> Result<f64> {
    let mut v = Vec::with_capacity(nodes.len());
    for (x, w) in nodes {
        let d = density(&PointDerivs::from_point(&imm.point(*x, 3)?)?)?;
        v.push(d.ea * d.volume * w);
    }
    Ok(pairwise_sum(&v))
}

/// `∫⟨W, φ⟩ dvol_g` over the given nodes.
pub fn pairing(
    base: &Immersion,
    variation: &Immersion,
    nodes: &[([f64; 4], f64)],
    weights: &[f64; 11],
) -> Result<f64> {
    let mut v = Vec::with_capacity(nodes.len());
    for (x, w) in nodes {
        let f = frame_with(&base.point(*x, 6)?, &options_el())?;
        let el = willmore_from_frame(&f)?;
        let phi = variation.value(*x)?;
        let s: f64 = el.weighted(weights).iter().zip(&phi).map(|(a, b)| a * b).sum();
        v.push(s * f.volume.value() * w);
    }
    Ok(pairwise_sum(&v))
}

pub fn variational_consistency(
    spec: &ImmersionSpec,
    variation: &Immersion,
    opts: &ConsistencyOptions,
) -> Result<ConsistencyReport> {
    if opts.steps.len() < 2 {
        return Err(Error::InvalidInput("need at least two steps".into()));
    }
    if let Some(&t) = opts.steps.iter().find(|&&t| !(t > 1e-7)) {
        return Err(Error::OutOfRange(format!("step {t:e} below the roundoff floor")));
    }
    let nodes = consistency_nodes(&spec.chart, opts.invariant_axes)?;
    let base = &spec.immersion;
    let mut differences = Vec::with_capacity(opts.steps.len());
    for &t in &opts.steps {
        let plus = energy_ea(&base.plus_scaled(t, variation)?, &nodes)?;
        let minus = energy_ea(&base.plus_scaled(-t, variation)?, &nodes)?;
        differences.push((plus - minus) / (2.0 * t));
    }
    let p = pairing(base, variation, &nodes, &opts.term_weights)?;
    let ratios = differences.iter().map(|d| if p == 0.0 { f64::NAN } else { d / p }).collect();
    let n = differences.len();
    let (d1, d2) = (differences[n - 2], differences[n - 1]);
    let extrapolated_difference = (4.0 * d2 - d1) / 3.0;
    let observed_order = if n >= 3 {
        let e1 = differences[n - 3] - d1;
        let e2 = d1 - d2;
        (e1 / e2).abs().log2()
    } else {
        f64::NAN
    };
    Ok(ConsistencyReport {
        steps: opts.steps.clone(),
        differences,
        pairing: p,
        ratios,
        extrapolated_difference,
        extrapolated_ratio: if p == 0.0 { f64::NAN } else { extrapolated_difference / p },
        observed_order,
    })
}

// ----------------------------------------------------------------------------
// Identities

/// Largest residual of one identity over the sampled points of a chart.
#[derive(Clone, Debug)]
pub struct IdentityReport {
    pub name: String,
    pub immersion: String,
    pub points: usize,
    pub max_residual: f64,
}

impl IdentityReport {
    pub fn record(&self) -> String {
        format!(
            "record=identity name={} max_residual={:.3e} points={} immersion={}",
            self.name, self.max_residual, self.points, self.immersion
        )
    }
}

/// Relative residual `|lhs − rhs| / max(|lhs|, |rhs|, floor)` in the max norm.
pub fn relative_residual(lhs: &[f64], rhs: &[f64], floor: f64) -> f64 {
    let mut d: f64 = 0.0;
    let mut s: f64 = floor;
    for (a, b) in lhs.iter().zip(rhs) {
        d = d.max((a - b).abs());
        s = s.max(a.abs()).max(b.abs());
    }
    if d == 0.0 {
        0.0
    } else {
        d / s
    }
}

/// `|h|²_g` at the base point.
fn h_norm2(f: &GeometryFrame) -> f64 {
    let gi = f.metric_inv_values();
    let mut s = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                for l in 0..4 {
                    let w = gi[i][k] * gi[j][l];
                    if w != 0.0 {
                        let a = f.h_value(i, j);
                        let b = f.h_value(k, l);
                        s += w * a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>();
                    }
                }
            }
        }
    }
    s
}

fn values(v: &[Jet]) -> Vec<f64> {
    v.iter().map(|c| c.value()).collect()
}

/// `Δ_g Φ = 4H` (needs `K ≥ 2`).
pub fn residual_laplacian_phi(p: &ImmersionPoint, f: &GeometryFrame) -> Result<f64> {
    let lhs = values(&f.laplacian_vector(&p.components)?);
    let rhs: Vec<f64> = f.mean_curvature_value().iter().map(|x| 4.0 * x).collect();
    Ok(relative_residual(&lhs, &rhs, h_norm2(f).sqrt()))
}

/// `𝔥_a = h_aⁱ ∧ ∇_iΦ` as a 1-form with 2-vector values.
pub fn frakh(f: &GeometryFrame) -> MultivectorForm {
    let m = f.ambient_dim;
    let low = f.second_form[0][0].order();
    // h_aⁱ = gⁱᵏ h_ak
    let mixed: Vec<Vec<VecJet>> = (0..4)
        .map(|a| {
            (0..4)
                .map(|i| {
                    (0..m)
                        .map(|c| {
                            let mut acc = Jet::zero(low);
                            for k in 0..4 {
                                crate::jets::fma_into(&mut acc, &f.metric_inv[sym(i, k)], &f.second_form[sym(a, k)][c]);
                            }
                            acc
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    MultivectorForm::from_fn(1, 2, m, |pi, ai| {
        let a = pi[0];
        let (b, c) = (ai[0], ai[1]);
        let mut acc = Jet::zero(low);
        for i in 0..4 {
            let t1 = &mixed[a][i][b] * &f.tangents[i][c];
            let t2 = &mixed[a][i][c] * &f.tangents[i][b];
            acc += &t1;
            acc -= &t2;
        }
        acc
    })
}

fn wedge_values(u: &[f64], v: &[f64], b: usize, c: usize) -> f64 {
    u[b] * v[c] - u[c] * v[b]
}

/// `d*𝔥 = 4 π_n ∇ⁱH ∧ ∇_iΦ` (needs `K ≥ 3`).
pub fn residual_frakh_codifferential(f: &GeometryFrame) -> Result<f64> {
    let met = FormMetric::from_frame(f);
    let lhs = codifferential(&frakh(f), &met)?;
    let dn = f.normal_grad_h.as_ref().ok_or(Error::OrderExhausted {
        needed: 3,
        available: f.order,
    })?;
    let gi = f.metric_inv_values();
    let dnv: Vec<Vec<f64>> = dn.iter().map(|v| values(v)).collect();
    let up: Vec<Vec<f64>> = (0..4)
        .map(|i| (0..f.ambient_dim).map(|c| (0..4).map(|k| gi[i][k] * dnv[k][c]).sum()).collect())
        .collect();
    let tv: Vec<Vec<f64>> = f.tangents.iter().map(|v| values(v)).collect();
    let rhs = MultivectorForm::from_fn(0, 2, f.ambient_dim, |_, ai| {
        let s: f64 = (0..4).map(|i| 4.0 * wedge_values(&up[i], &tv[i], ai[0], ai[1])).sum();
        Jet::constant(0, s)
    });
    Ok(relative_residual(&lhs.values(), &rhs.values(), h_norm2(f)))
}

/// `(d𝔥)_ab = −R_ab^{ij} ∇_iΦ ∧ ∇_jΦ + 2 h_bⁱ ∧ h_ai` with the curvature sign
/// fixed by `Ric(S⁴) = 3g` (needs `K ≥ 3`).
pub fn residual_frakh_exterior(f: &GeometryFrame) -> Result<f64> {
    let (lhs, rhs) = frakh_exterior_sides(f)?;
    Ok(relative_residual(&lhs.values(), &rhs.values(), h_norm2(f)))
}

/// Both sides of the `d𝔥` identity; the right side is returned as
/// `(curvature part, quadratic part)` summed with the sign above.
pub fn frakh_exterior_sides(f: &GeometryFrame) -> Result<(MultivectorForm, MultivectorForm)> {
    let lhs = exterior_d(&frakh(f).truncated(1))?;
    let (r_part, q_part) = frakh_exterior_parts(f)?;
    Ok((lhs, q_part.sub(&r_part)?))
}

/// `R_ab^{ij} ∇_iΦ ∧ ∇_jΦ` and `2 h_bⁱ ∧ h_ai` separately.
pub fn frakh_exterior_parts(f: &GeometryFrame) -> Result<(MultivectorForm, MultivectorForm)> {
    let curv = riemann(f)?;
    let m = f.ambient_dim;
    let gi = f.metric_inv_values();
    let tv: Vec<Vec<f64>> = f.tangents.iter().map(|v| values(v)).collect();
    let h: Vec<Vec<f64>> = (0..10).map(|q| values(&f.second_form[q])).collect();
    let r_part = MultivectorForm::from_fn(2, 2, m, |pi, ai| {
        let (a, b) = (pi[0], pi[1]);
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let mut rup = 0.0;
                for k in 0..4 {
                    for l in 0..4 {
                        rup += gi[i][k] * gi[j][l] * curv.riemann(a, b, k, l).value();
                    }
                }
                s += rup * wedge_values(&tv[i], &tv[j], ai[0], ai[1]);
            }
        }
        Jet::constant(0, s)
    });
    let q_part = MultivectorForm::from_fn(2, 2, m, |pi, ai| {
        let (a, b) = (pi[0], pi[1]);
        let mut s = 0.0;
        for i in 0..4 {
            // h_bⁱ = gⁱᵏ h_bk
            let hb: Vec<f64> = (0..m).map(|c| (0..4).map(|k| gi[i][k] * h[sym(b, k)][c]).sum()).collect();
            s += 2.0 * wedge_values(&hb, &h[sym(a, i)], ai[0], ai[1]);
        }
        Jet::constant(0, s)
    });
    Ok((r_part, q_part))
}

fn dh2_form(f: &GeometryFrame) -> Result<MultivectorForm> {
    let hsq = dot(&f.mean_curvature, &f.mean_curvature);
    let d = MultivectorForm::scalar_form(1, f.ambient_dim, |i| hsq.partial(i[0]).unwrap());
    let dphi = MultivectorForm::dphi(f);
    let a = wedge_param(&d, &dphi, AmbientProduct::Wedge)?;
    codifferential(&a, &FormMetric::from_frame(f))
}

/// `⅓ d*(d|H|² ∧∧ dΦ) ⨽· dΦ = Δ_g|H|²` (needs `K ≥ 4`).
pub fn residual_trace_dh2(f: &GeometryFrame) -> Result<f64> {
    let b = dh2_form(f)?;
    let lhs = interior_mult(&b, &MultivectorForm::dphi(f), &FormMetric::from_frame(f), AmbientProduct::Dot)?
        .scale(1.0 / 3.0);
    let hsq = dot(&f.mean_curvature, &f.mean_curvature);
    let rhs = f.laplacian_scalar(&hsq)?.value();
    Ok(relative_residual(&lhs.values(), &[rhs], h_norm2(f).powi(2)))
}

/// `⅓ d*(d|H|² ∧∧ dΦ) ⨽∧ dΦ = ⅓ ∇_i(|H|²(hⁱʲ − 4H gⁱʲ) ∧ ∇_jΦ)` (needs `K ≥ 4`).
pub fn residual_wedge_dh2(f: &GeometryFrame) -> Result<f64> {
    let m = f.ambient_dim;
    let b = dh2_form(f)?;
    let lhs = interior_mult(&b, &MultivectorForm::dphi(f), &FormMetric::from_frame(f), AmbientProduct::Wedge)?
        .scale(1.0 / 3.0);
    // Zⁱ as 2-vector components with one upper parameter index, order 1
    let hv = trunc(&f.mean_curvature, 1);
    let hsq = dot(&hv, &hv);
    let ginv1: [Jet; 10] = std::array::from_fn(|q| f.metric_inv[q].truncated(1));
    let h1: [VecJet; 10] = std::array::from_fn(|q| trunc(&f.second_form[q], 1));
    let hup: Vec<VecJet> = (0..10)
        .map(|q| {
            let (i, j) = PAIRS[q];
            (0..m)
                .map(|c| {
                    let mut acc = Jet::zero(1);
                    for k in 0..4 {
                        for l in 0..4 {
                            let gg = &ginv1[sym(i, k)] * &ginv1[sym(j, l)];
                            crate::jets::fma_into(&mut acc, &gg, &h1[sym(k, l)][c]);
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let pairs = subsets(m, 2);
    let z: [VecJet; 4] = std::array::from_fn(|i| {
        pairs
            .iter()
            .map(|&mask| {
                let idx = mask_indices(mask);
                let (bb, cc) = (idx[0], idx[1]);
                let mut acc = Jet::zero(1);
                for j in 0..4 {
                    let q = sym(i, j);
                    let u_b = &hup[q][bb] - &(&hv[bb] * &ginv1[q]).scale(4.0);
                    let u_c = &hup[q][cc] - &(&hv[cc] * &ginv1[q]).scale(4.0);
                    let t1 = &u_b * &f.tangents[j][cc];
                    let t2 = &u_c * &f.tangents[j][bb];
                    acc += &t1;
                    acc -= &t2;
                }
                &acc * &hsq
            })
            .collect()
    });
    let rhs: Vec<f64> = f.divergence(&z).iter().map(|c| c.value() / 3.0).collect();
    Ok(relative_residual(&lhs.values(), &rhs, h_norm2(f).powi(2)))
}

/// `Δ_gH = Δ⊥H − (H·hⁱʲ)h_ij + 2∇_i(|H|²gⁱʲ − H·hⁱʲ)∇_jΦ` (needs `K ≥ 4`).
pub fn residual_conversion(f: &GeometryFrame) -> Result<f64> {
    let m = f.ambient_dim;
    let lhs = values(&f.laplacian_vector(&f.mean_curvature)?);
    let lap = f.normal_laplacian_h.as_ref().ok_or(Error::OrderExhausted {
        needed: 4,
        available: f.order,
    })?;
    let mut rhs = values(lap);
    let gi = f.metric_inv_values();
    let hv = f.mean_curvature_value();
    let h: Vec<Vec<f64>> = (0..10).map(|q| values(&f.second_form[q])).collect();
    let b_up = raise_values(
        &gi,
        &matrix(&std::array::from_fn(|q| hv.iter().zip(&h[q]).map(|(a, b)| a * b).sum())),
    );
    for i in 0..4 {
        for j in 0..4 {
            for c in 0..m {
                rhs[c] -= b_up[i][j] * h[sym(i, j)][c];
            }
        }
    }
    // Tⁱʲ = |H|²gⁱʲ − H·hⁱʲ to order 1, then ∇_i Tⁱʲ
    let hv1 = trunc(&f.mean_curvature, 1);
    let hsq = dot(&hv1, &hv1);
    let ginv1: [Jet; 10] = std::array::from_fn(|q| f.metric_inv[q].truncated(1));
    let hh: [Jet; 10] = std::array::from_fn(|q| dot(&hv1, &trunc(&f.second_form[q], 1)));
    let hh_up = raise2(&ginv1, &hh);
    let t: [Jet; 10] = std::array::from_fn(|q| &(&hsq * &ginv1[q]) - &hh_up[q]);
    let field: [VecJet; 4] = std::array::from_fn(|j| (0..4).map(|i| t[sym(i, j)].clone()).collect());
    // divergence on the first index: |g|^{-1/2}∂_i(|g|^{1/2}Tⁱʲ) + Γʲ_ik Tⁱᵏ
    let mut div_j = [0.0; 4];
    for (j, dj) in div_j.iter_mut().enumerate() {
        let col: [VecJet; 4] = std::array::from_fn(|i| vec![field[j][i].clone()]);
        *dj = f.divergence(&col)[0].value();
        for i in 0..4 {
            for k in 0..4 {
                *dj += f.christoffel.get(j, i, k).value() * t[sym(i, k)].value();
            }
        }
    }
    for j in 0..4 {
        for c in 0..m {
            rhs[c] += 2.0 * div_j[j] * f.tangents[j][c].value();
        }
    }
    Ok(relative_residual(&lhs, &rhs, h_norm2(f).powf(1.5)))
}

/// Gauss equation `R_abij = h_ai·h_bj − h_aj·h_bi` (needs `K ≥ 3`).
pub fn residual_gauss(f: &GeometryFrame) -> Result<f64> {
    let curv = riemann(f)?;
    let mut lhs = Vec::with_capacity(256);
    let mut rhs = Vec::with_capacity(256);
    let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    for a in 0..4 {
        for b in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    lhs.push(curv.riemann(a, b, i, j).value());
                    rhs.push(
                        d(&f.h_value(a, i), &f.h_value(b, j)) - d(&f.h_value(a, j), &f.h_value(b, i)),
                    );
                }
            }
        }
    }
    Ok(relative_residual(&lhs, &rhs, h_norm2(f)))
}

/// Codazzi equation: `(∇⊥_k h)_ij = π_n ∂_k h_ij − Γˡ_ki h_lj − Γˡ_kj h_il` is
/// symmetric in `k, i` (needs `K ≥ 3`).
pub fn residual_codazzi(f: &GeometryFrame) -> Result<f64> {
    let m = f.ambient_dim;
    let pn = f.normal_projector();
    let h: Vec<Vec<f64>> = (0..10).map(|q| values(&f.second_form[q])).collect();
    let mut nabla = vec![vec![0.0; m]; 64];
    for k in 0..4 {
        for i in 0..4 {
            for j in 0..4 {
                let dh: Vec<f64> = f.second_form[sym(i, j)]
                    .iter()
                    .map(|c| c.partial(k).map(|d| d.value()))
                    .collect::<Result<_>>()?;
                let out = &mut nabla[(k * 4 + i) * 4 + j];
                for (a, o) in out.iter_mut().enumerate() {
                    *o = (0..m).map(|b| pn[a][b] * dh[b]).sum();
                }
                for l in 0..4 {
                    let (gi, gj) = (f.christoffel.get(l, k, i).value(), f.christoffel.get(l, k, j).value());
                    for (a, o) in out.iter_mut().enumerate() {
                        *o -= gi * h[sym(l, j)][a] + gj * h[sym(i, l)][a];
                    }
                }
            }
        }
    }
    let mut lhs = Vec::with_capacity(64 * m);
    let mut rhs = Vec::with_capacity(64 * m);
    for k in 0..4 {
        for i in 0..4 {
            for j in 0..4 {
                lhs.extend_from_slice(&nabla[(k * 4 + i) * 4 + j]);
                rhs.extend_from_slice(&nabla[(i * 4 + k) * 4 + j]);
            }
        }
    }
    Ok(relative_residual(&lhs, &rhs, h_norm2(f)))
}

/// Pointwise identities of the suite, by name.
pub const IDENTITIES: [&str; 8] = [
    "codazzi",
    "laplacian_phi",
    "frakh_codifferential",
    "frakh_exterior",
    "trace_dh2",
    "wedge_dh2",
    "conversion",
    "gauss",
];

/// Evaluate one named identity at a point (jets of order ≥ 4).
pub fn identity_at(name: &str, p: &ImmersionPoint) -> Result<f64> {
    let needs_curvature = matches!(name, "frakh_exterior" | "gauss");
    let f = frame_with(
        &p.truncated(4),
        &FrameOptions {
            curvature: needs_curvature,
            ..FrameOptions::default()
        },
    )?;
    match name {
        "laplacian_phi" => residual_laplacian_phi(&p.truncated(4), &f),
        "frakh_codifferential" => residual_frakh_codifferential(&f),
        "frakh_exterior" => residual_frakh_exterior(&f),
        "trace_dh2" => residual_trace_dh2(&f),
        "wedge_dh2" => residual_wedge_dh2(&f),
        "conversion" => residual_conversion(&f),
        "gauss" => residual_gauss(&f),
        "codazzi" => residual_codazzi(&f),
        other => Err(Error::InvalidInput(format!("unknown identity `{other}`"))),
    }
}

fn sample_nodes(chart: &Chart, max_points: usize) -> Vec<[f64; 4]> {
    let nodes = chart.nodes();
    let stride = nodes.len().div_ceil(max_points.max(1)).max(1);
    // an odd stride avoids sampling only along one lattice plane
    let stride = if stride > 1 && stride % 2 == 0 { stride + 1 } else { stride };
    nodes.iter().step_by(stride).map(|(x, _)| *x).collect()
}

/// Run named identities over up to `max_points` chart nodes.
pub fn identity_report(spec: &ImmersionSpec, names: &[&str], max_points: usize) -> Result<Vec<IdentityReport>> {
    let pts = sample_nodes(&spec.chart, max_points);
    let mut out = Vec::new();
    for name in names {
        let mut worst: f64 = 0.0;
        for x in &pts {
            let p = spec.immersion.point(*x, 4)?;
            worst = worst.max(identity_at(name, &p)?);
        }
        out.push(IdentityReport {
            name: name.to_string(),
            immersion: spec.immersion.id().to_string(),
            points: pts.len(),
            max_residual: worst,
        });
    }
    Ok(out)
}

/// Both `𝔥` identities.
pub fn identity_frakh(spec: &ImmersionSpec, max_points: usize) -> Result<Vec<IdentityReport>> {
    identity_report(spec, &["frakh_codifferential", "frakh_exterior"], max_points)
}

/// The trace identity and the `⨽∧` divergence identity for `d|H|² ∧∧ dΦ`.
pub fn identity_trace_dh2(spec: &ImmersionSpec, max_points: usize) -> Result<Vec<IdentityReport>> {
    identity_report(spec, &["trace_dh2", "wedge_dh2"], max_points)
}

// ----------------------------------------------------------------------------
// Noether field

/// Explicit leading pieces of the Noether field at a point.
#[derive(Clone, Debug)]
pub struct NoetherPieces {
    /// `Cʲ = −2(hⁱʲ·∇_iH)H + 2(H·hⁱʲ)π_n∇_iH`.
    pub c: [Vec<f64>; 4],
    /// `−½ Δ⊥H gⁱʲ` (symmetric storage).
    pub f_leading: [Vec<f64>; 10],
    /// `½hⁱʲ·Δ⊥H`, `|π_n∇H|² gⁱʲ`, `−2∇ʲH·π_n∇ⁱH` (full 4×4).
    pub g_leading: [[[f64; 4]; 4]; 3],
    /// `η_ij = ∂_iΦ ∧ ∂_jΦ`.
    pub eta: MultivectorForm,
    /// `𝔥_a = h_aⁱ ∧ ∇_iΦ`.
    pub frakh: MultivectorForm,
}

pub fn noether_pieces(p: &ImmersionPoint) -> Result<NoetherPieces> {
    if p.order() < 4 {
        return Err(Error::OrderExhausted {
            needed: 4,
            available: p.order(),
        });
    }
    let f = frame_with(&p.truncated(4), &options_el())?;
    let m = f.ambient_dim;
    let gi = f.metric_inv_values();
    let hv = f.mean_curvature_value();
    let h: Vec<Vec<f64>> = (0..10).map(|q| values(&f.second_form[q])).collect();
    let grad: Vec<Vec<f64>> = f.mean_curvature_grad.as_ref().unwrap().iter().map(|v| values(v)).collect();
    let ng: Vec<Vec<f64>> = f.normal_grad_h.as_ref().unwrap().iter().map(|v| values(v)).collect();
    let lap = values(f.normal_laplacian_h.as_ref().unwrap());
    let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let up = |v: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        (0..4)
            .map(|i| (0..m).map(|c| (0..4).map(|k| gi[i][k] * v[k][c]).sum()).collect())
            .collect()
    };
    let hup: Vec<Vec<Vec<f64>>> = (0..4)
        .map(|i| {
            (0..4)
                .map(|j| {
                    (0..m)
                        .map(|c| {
                            let mut s = 0.0;
                            for k in 0..4 {
                                for l in 0..4 {
                                    s += gi[i][k] * gi[j][l] * h[sym(k, l)][c];
                                }
                            }
                            s
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let c: [Vec<f64>; 4] = std::array::from_fn(|j| {
        let mut out = vec![0.0; m];
        for i in 0..4 {
            let a = -2.0 * d(&hup[i][j], &grad[i]);
            let b = 2.0 * d(&hv, &hup[i][j]);
            for x in 0..m {
                out[x] += a * hv[x] + b * ng[i][x];
            }
        }
        out
    });
    let f_leading: [Vec<f64>; 10] = std::array::from_fn(|q| {
        let (i, j) = PAIRS[q];
        lap.iter().map(|x| -0.5 * x * gi[i][j]).collect()
    });
    let grad_up = up(&grad);
    let ng_up = up(&ng);
    let dn2: f64 = (0..4).map(|i| d(&ng[i], &ng_up[i])).sum();
    let mut g_leading = [[[0.0; 4]; 4]; 3];
    for i in 0..4 {
        for j in 0..4 {
            g_leading[0][i][j] = 0.5 * d(&hup[i][j], &lap);
            g_leading[1][i][j] = dn2 * gi[i][j];
            g_leading[2][i][j] = -2.0 * d(&grad_up[j], &ng_up[i]);
        }
    }
    let dphi = MultivectorForm::dphi(&f);
    let eta = crate::forms::wedge_ambient(&dphi, &dphi)?.scale(0.5);
    Ok(NoetherPieces {
        c,
        f_leading,
        g_leading,
        eta,
        frakh: frakh(&f),
    })
}
