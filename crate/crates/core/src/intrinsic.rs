//! Intrinsic conformal geometry of a metric on a 4-dimensional chart: Weyl
//! and Bach tensors, the Paneitz operator and Q-curvature.
//!
//! Curvature conventions are those of [`crate::geometry`]: `Ric(S⁴) = 3g`,
//! `R(S⁴) = 12`. The Laplacian `Δ_g = |g|^{-1/2}∂_i(|g|^{1/2}gⁱʲ∂_j)` is
//! non-positive. With these choices `Q(S⁴) = 6`.

use crate::error::{Error, Result};
use crate::geometry::{
    covariant_derivative, invert_symmetric, sym, Christoffel, CovTensor, Curvature, MetricField,
    PAIRS,
};
use crate::jets::{fma_into, Jet};

/// Curvature data of a metric at the chart base point.
#[derive(Clone, Debug)]
pub struct IntrinsicFrame {
    pub order: usize,
    pub ginv: [Jet; 10],
    pub volume: Jet,
    pub christoffel: Christoffel,
    pub curvature: Curvature,
    /// `P = ½(Ric − R g / 6)`.
    pub schouten: [Jet; 10],
    /// `W_abij`, index `((a·4 + b)·4 + i)·4 + j`.
    pub weyl: Vec<Jet>,
    /// Present when the metric has jets of order ≥ 4.
    pub bach: Option<[[f64; 4]; 4]>,
    pub q: Option<f64>,
}

impl IntrinsicFrame {
    pub fn weyl(&self, a: usize, b: usize, i: usize, j: usize) -> &Jet {
        &self.weyl[((a * 4 + b) * 4 + i) * 4 + j]
    }

    /// `Ricⁱʲ` at the base point.
    pub fn ricci_up(&self) -> [[f64; 4]; 4] {
        let gi = values10(&self.ginv);
        let ric = values10(&self.curvature.ricci);
        raise(&gi, &ric)
    }

    /// Largest `g`-trace of the Weyl tensor over all index pairs, relative to
    /// its largest component (0 when Weyl vanishes).
    pub fn weyl_trace_residual(&self) -> f64 {
        let gi = values10(&self.ginv);
        let scale = self.weyl.iter().map(|w| w.value().abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for b in 0..4 {
            for j in 0..4 {
                let mut t = 0.0;
                for a in 0..4 {
                    for i in 0..4 {
                        t += gi[a][i] * self.weyl(a, b, i, j).value();
                    }
                }
                worst = worst.max(t.abs());
            }
        }
        worst / scale
    }
}

fn values10(s: &[Jet; 10]) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    for (q, &(i, j)) in PAIRS.iter().enumerate() {
        m[i][j] = s[q].value();
        m[j][i] = m[i][j];
    }
    m
}

fn raise(gi: &[[f64; 4]; 4], a: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                for l in 0..4 {
                    out[i][j] += gi[i][k] * a[k][l] * gi[l][j];
                }
            }
        }
    }
    out
}

fn trunc10(s: &[Jet; 10], order: usize) -> [Jet; 10] {
    std::array::from_fn(|q| s[q].truncated(order))
}

pub fn intrinsic_frame(g: &MetricField) -> Result<IntrinsicFrame> {
    let order = g.order();
    if order < 2 {
        return Err(Error::OrderExhausted {
            needed: 2,
            available: order,
        });
    }
    let (ginv, volume) = g.inverse_and_volume()?;
    let christoffel = g.christoffel()?;
    let curvature = g.curvature()?;
    let k = curvature.order();
    let gk = trunc10(&g.g, k);
    let scalar = &curvature.scalar;
    let schouten: [Jet; 10] =
        std::array::from_fn(|q| (&curvature.ricci[q] - &(scalar * &gk[q]).scale(1.0 / 6.0)).scale(0.5));
    let mut weyl = vec![Jet::zero(k); 256];
    for a in 0..4 {
        for b in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    let p = |x: usize, y: usize| &schouten[sym(x, y)];
                    let m = |x: usize, y: usize| &gk[sym(x, y)];
                    let mut w = curvature.riemann(a, b, i, j).clone();
                    w -= &(p(a, i) * m(b, j));
                    w -= &(m(a, i) * p(b, j));
                    w += &(p(a, j) * m(b, i));
                    w += &(m(a, j) * p(b, i));
                    weyl[((a * 4 + b) * 4 + i) * 4 + j] = w;
                }
            }
        }
    }
    let mut frame = IntrinsicFrame {
        order,
        ginv,
        volume,
        christoffel,
        curvature,
        schouten,
        weyl,
        bach: None,
        q: None,
    };
    if order >= 4 {
        frame.bach = Some(bach_from(&frame)?);
        let r = frame.curvature.scalar.clone();
        let lap_r = g.laplacian(&r)?.value();
        let ric_up = frame.ricci_up();
        let ric = values10(&frame.curvature.ricci);
        let ric2: f64 = (0..4).map(|i| (0..4).map(|j| ric_up[i][j] * ric[i][j]).sum::<f64>()).sum();
        let rv = r.value();
        frame.q = Some(-lap_r / 6.0 - 0.5 * ric2 + rv * rv / 6.0);
    }
    Ok(frame)
}

/// `B_ij = ∇ᵏ∇ˡ W_ikjl + ½ Rᵏˡ W_ikjl`.
fn bach_from(f: &IntrinsicFrame) -> Result<[[f64; 4]; 4]> {
    let w = CovTensor::new(4, 1, f.weyl.clone())?;
    let dw = covariant_derivative(&f.christoffel, &w)?;
    let ddw = covariant_derivative(&f.christoffel, &dw)?;
    let gi = values10(&f.ginv);
    let ric_up = f.ricci_up();
    let mut b = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut s = 0.0;
            for k in 0..4 {
                for l in 0..4 {
                    s += 0.5 * ric_up[k][l] * f.weyl(i, k, j, l).value();
                    for q in 0..4 {
                        for p in 0..4 {
                            let c = gi[k][q] * gi[l][p];
                            if c != 0.0 {
                                s += c * ddw.get(&[q, p, i, k, j, l], 0).value();
                            }
                        }
                    }
                }
            }
            b[i][j] = s;
        }
    }
    Ok(b)
}

/// The Bach tensor with its symmetry and trace defects.
#[derive(Clone, Debug)]
pub struct BachReport {
    pub b: [[f64; 4]; 4],
    /// `max |B_ij − B_ji|`.
    pub asymmetry: f64,
    /// `|gⁱʲ B_ij|`.
    pub trace: f64,
    /// `max |B_ij|`.
    pub norm: f64,
}

pub fn bach_tensor(g: &MetricField) -> Result<BachReport> {
    if g.order() < 4 {
        return Err(Error::OrderExhausted {
            needed: 4,
            available: g.order(),
        });
    }
    let f = intrinsic_frame(g)?;
    let b = f.bach.expect("order ≥ 4");
    let gi = values10(&f.ginv);
    let mut asymmetry: f64 = 0.0;
    let mut trace = 0.0;
    let mut norm: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            asymmetry = asymmetry.max((b[i][j] - b[j][i]).abs());
            trace += gi[i][j] * b[i][j];
            norm = norm.max(b[i][j].abs());
        }
    }
    Ok(BachReport {
        b,
        asymmetry,
        trace: trace.abs(),
        norm,
    })
}

pub fn q_curvature(g: &MetricField) -> Result<f64> {
    if g.order() < 4 {
        return Err(Error::OrderExhausted {
            needed: 4,
            available: g.order(),
        });
    }
    let (ginv, vol) = g.inverse_and_volume()?;
    let curvature = g.curvature()?;
    let r = &curvature.scalar;
    let lap_r = divergence_of_flux(&ginv, &vol, r, None)?.value();
    let gi = values10(&ginv);
    let ric = values10(&curvature.ricci);
    let ric_up = raise(&gi, &ric);
    let ric2: f64 = (0..4).map(|i| (0..4).map(|j| ric_up[i][j] * ric[i][j]).sum::<f64>()).sum();
    Ok(-lap_r / 6.0 - 0.5 * ric2 + r.value() * r.value() / 6.0)
}

/// `|g|^{-1/2} ∂_j(|g|^{1/2} Tʲᵏ ∂_k u)` with `T = g⁻¹` when `tensor` is `None`.
fn divergence_of_flux(ginv: &[Jet; 10], vol: &Jet, u: &Jet, tensor: Option<&[Jet; 10]>) -> Result<Jet> {
    let t = tensor.unwrap_or(ginv);
    let du: Vec<Jet> = (0..4).map(|k| u.partial(k)).collect::<Result<_>>()?;
    let order = du[0].order().min(vol.order()).min(t[0].order());
    if order == 0 {
        return Err(Error::OrderExhausted {
            needed: 2,
            available: u.order(),
        });
    }
    let inv_vol = vol.truncated(order - 1).recip()?;
    let mut div = Jet::zero(order - 1);
    for j in 0..4 {
        let mut flux = Jet::zero(order);
        for k in 0..4 {
            fma_into(&mut flux, &t[sym(j, k)], &du[k]);
        }
        let flux = &flux * vol;
        div += &flux.partial(j)?;
    }
    Ok(&div * &inv_vol)
}

/// Sign of the Paneitz operator relative to the bi-Laplacian.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PaneitzSign {
    /// `P u = −Δ²u + ∇ⁱ(((2/3)R g − 2Ric)_ij ∇ʲu)`, as displayed.
    Literal,
    /// `P u = Δ²u − ∇ⁱ(((2/3)R g − 2Ric)_ij ∇ʲu)`; the sign for which
    /// `P_{g₀}λ + Q_{g₀} = e^{4λ} Q_{e^{2λ}g₀}` holds with the displayed `Q`.
    Positive,
}

/// Jet of `P_g u` (order `min(K_u − 4, K_g − 3)`).
pub fn paneitz_jet(g: &MetricField, u: &Jet, sign: PaneitzSign) -> Result<Jet> {
    if u.order() < 4 || g.order() < 3 {
        return Err(Error::OrderExhausted {
            needed: 4,
            available: u.order().min(g.order() + 1),
        });
    }
    let (ginv, vol) = g.inverse_and_volume()?;
    let lap = divergence_of_flux(&ginv, &vol, u, None)?;
    let lap2 = divergence_of_flux(&ginv, &vol, &lap, None)?;
    let curvature = g.curvature()?;
    let k = curvature.order();
    let ginv_k = trunc10(&ginv, k);
    // Ricⁱʲ
    let ric_up: [Jet; 10] = std::array::from_fn(|q| {
        let (i, j) = PAIRS[q];
        let mut acc = Jet::zero(k);
        for a in 0..4 {
            for b in 0..4 {
                let t = &ginv_k[sym(i, a)] * &curvature.ricci[sym(a, b)];
                fma_into(&mut acc, &t, &ginv_k[sym(b, j)]);
            }
        }
        acc
    });
    let t: [Jet; 10] = std::array::from_fn(|q| {
        &(&curvature.scalar * &ginv_k[q]).scale(2.0 / 3.0) - &ric_up[q].scale(2.0)
    });
    let div = divergence_of_flux(&ginv, &vol, u, Some(&t))?;
    let p = &div - &lap2;
    Ok(match sign {
        PaneitzSign::Literal => p,
        PaneitzSign::Positive => -&p,
    })
}

/// `P_g u` at the base point with the displayed sign.
pub fn paneitz_apply(g: &MetricField, u: &Jet) -> Result<f64> {
    Ok(paneitz_jet(g, u, PaneitzSign::Literal)?.value())
}

/// `|P_{e^{2λ}g₀}u − e^{−4λ}P_{g₀}u|` relative to `|P_{g₀}u|`.
pub fn paneitz_covariance_residual(g0: &MetricField, lambda: &Jet, u: &Jet, sign: PaneitzSign) -> Result<f64> {
    let g = g0.conformal(lambda);
    let lhs = paneitz_jet(&g, u, sign)?.value();
    let rhs = (-4.0 * lambda.value()).exp() * paneitz_jet(g0, u, sign)?.value();
    Ok((lhs - rhs).abs() / rhs.abs().max(lhs.abs()).max(f64::MIN_POSITIVE))
}

/// `|P_{g₀}λ + Q_{g₀} − e^{4λ}Q_{e^{2λ}g₀}|` relative to the largest of the three terms.
pub fn paneitz_equation_residual(g0: &MetricField, lambda: &Jet, sign: PaneitzSign) -> Result<f64> {
    let p = paneitz_jet(g0, lambda, sign)?.value();
    let q0 = q_curvature(g0)?;
    let q = q_curvature(&g0.conformal(lambda))?;
    let rhs = (4.0 * lambda.value()).exp() * q;
    let scale = p.abs().max(q0.abs()).max(rhs.abs()).max(f64::MIN_POSITIVE);
    Ok((p + q0 - rhs).abs() / scale)
}

/// Metric of the unit round `S⁴` in stereographic coordinates,
/// `4 / (1 + |x|²)² δ`, as jets at `base`.
pub fn round_sphere_metric(base: [f64; 4], order: usize) -> MetricField {
    let x: [Jet; 4] = std::array::from_fn(|i| Jet::variable(order, i, base[i]));
    let r2 = crate::jets::dot(&x, &x);
    let one = Jet::constant(order, 1.0);
    // λ = ln 2 − ln(1 + |x|²)
    let lambda = &Jet::constant(order, std::f64::consts::LN_2) - &(&one + &r2).ln().expect("positive");
    MetricField::flat(base, order).conformal(&lambda)
}

/// A metric `g_ij(x)` given by a closure over jet coordinates.
pub fn metric_from_fn<F>(base: [f64; 4], order: usize, f: F) -> Result<MetricField>
where
    F: Fn(&[Jet; 4]) -> [Jet; 10],
{
    let x: [Jet; 4] = std::array::from_fn(|i| Jet::variable(order, i, base[i]));
    let g = f(&x);
    invert_symmetric(&g)?;
    MetricField::new(base, g)
}
