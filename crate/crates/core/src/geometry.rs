//! Extrinsic and intrinsic geometry of an immersion at a point.
//!
//! Everything is carried as jets so downstream operators can keep
//! differentiating. Orders drop as derivatives are taken: for an immersion
//! jet of order `K`, the metric is known to order `K−1`, the second
//! fundamental form and mean curvature to `K−2`, `π_n dH` to `K−3`,
//! `Δ⊥H` to `K−4` and `Δ⊥²H` to `K−6`.
//!
//! Conventions: `H = ¼ gⁱʲ h_ij`, so that `Δ_g Φ = 4H`. Curvature follows
//! `R_abij = g_aρ (∂_i Γ^ρ_jb − ∂_j Γ^ρ_ib + Γ^ρ_iλ Γ^λ_jb − Γ^ρ_jλ Γ^λ_ib)`,
//! `Ric_bj = gᵃⁱ R_abij`, which gives `Ric = 3g` and `R = 12` on the unit
//! four-sphere and the Gauss equation `R_abij = h_ai·h_bj − h_aj·h_bi`.

use crate::error::{Error, Result};
use crate::jets::{dot, fma_into, Jet, NVARS};

/// Unordered index pairs `(i ≤ j)` in storage order of symmetric tensors.
pub const PAIRS: [(usize, usize); 10] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 1),
    (1, 2),
    (1, 3),
    (2, 2),
    (2, 3),
    (3, 3),
];

const SYM_TABLE: [[usize; 4]; 4] = [[0, 1, 2, 3], [1, 4, 5, 6], [2, 5, 7, 8], [3, 6, 8, 9]];

/// Storage slot of the symmetric pair `(i, j)`.
#[inline]
pub fn sym(i: usize, j: usize) -> usize {
    SYM_TABLE[i][j]
}

/// Relative Gram-determinant floor: `det g ≥ floor · (tr g / 4)⁴`.
pub const DEFAULT_RANK_FLOOR: f64 = 1e-10;

/// Ambient vector whose components are jets.
pub type VecJet = Vec<Jet>;

/// The `m` component jets of an immersion at a base point.
#[derive(Clone, Debug)]
pub struct ImmersionPoint {
    pub base: [f64; NVARS],
    pub components: Vec<Jet>,
}

impl ImmersionPoint {
    pub fn new(base: [f64; NVARS], components: Vec<Jet>) -> Result<Self> {
        if components.len() < 5 {
            return Err(Error::InvalidInput(format!(
                "ambient dimension {} < 5",
                components.len()
            )));
        }
        let order = components[0].order();
        if components.iter().any(|c| c.order() != order) {
            return Err(Error::InvalidInput(
                "immersion components must share one jet order".into(),
            ));
        }
        Ok(ImmersionPoint { base, components })
    }

    pub fn order(&self) -> usize {
        self.components[0].order()
    }

    pub fn ambient_dim(&self) -> usize {
        self.components.len()
    }

    pub fn value(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.value()).collect()
    }

    pub fn truncated(&self, order: usize) -> ImmersionPoint {
        ImmersionPoint {
            base: self.base,
            components: self.components.iter().map(|c| c.truncated(order)).collect(),
        }
    }
}

/// Values of a 4×4 symmetric matrix from its 10 stored entries.
pub fn sym_values(s: &[Jet; 10]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = s[sym(i, j)].value();
        }
    }
    out
}

/// Inverse and determinant of a symmetric 4×4 jet matrix (cofactor expansion
/// through 2×2 minors).
pub fn invert_symmetric(g: &[Jet; 10]) -> Result<([Jet; 10], Jet)> {
    let a = |i: usize, j: usize| &g[sym(i, j)];
    let m2 = |p: &Jet, q: &Jet, r: &Jet, s: &Jet| &(p * q) - &(r * s);
    let s0 = m2(a(0, 0), a(1, 1), a(1, 0), a(0, 1));
    let s1 = m2(a(0, 0), a(1, 2), a(1, 0), a(0, 2));
    let s2 = m2(a(0, 0), a(1, 3), a(1, 0), a(0, 3));
    let s3 = m2(a(0, 1), a(1, 2), a(1, 1), a(0, 2));
    let s4 = m2(a(0, 1), a(1, 3), a(1, 1), a(0, 3));
    let s5 = m2(a(0, 2), a(1, 3), a(1, 2), a(0, 3));
    let c5 = m2(a(2, 2), a(3, 3), a(3, 2), a(2, 3));
    let c4 = m2(a(2, 1), a(3, 3), a(3, 1), a(2, 3));
    let c3 = m2(a(2, 1), a(3, 2), a(3, 1), a(2, 2));
    let c2 = m2(a(2, 0), a(3, 3), a(3, 0), a(2, 3));
    let c1 = m2(a(2, 0), a(3, 2), a(3, 0), a(2, 2));
    let c0 = m2(a(2, 0), a(3, 1), a(3, 0), a(2, 1));
    let mut det = &s0 * &c5;
    det -= &(&s1 * &c4);
    det += &(&s2 * &c3);
    det += &(&s3 * &c2);
    det -= &(&s4 * &c1);
    det += &(&s5 * &c0);
    let inv_det = det.recip()?;
    let lin = |t: [(&Jet, &Jet, f64); 3]| {
        let mut acc = Jet::zero(det.order());
        for (x, y, s) in t {
            acc.add_scaled(s, &(x * y));
        }
        &acc * &inv_det
    };
    // only the upper triangle is needed for a symmetric inverse
    let b00 = lin([(a(1, 1), &c5, 1.0), (a(1, 2), &c4, -1.0), (a(1, 3), &c3, 1.0)]);
    let b01 = lin([(a(0, 1), &c5, -1.0), (a(0, 2), &c4, 1.0), (a(0, 3), &c3, -1.0)]);
    let b02 = lin([(a(3, 1), &s5, 1.0), (a(3, 2), &s4, -1.0), (a(3, 3), &s3, 1.0)]);
    let b03 = lin([(a(2, 1), &s5, -1.0), (a(2, 2), &s4, 1.0), (a(2, 3), &s3, -1.0)]);
    let b11 = lin([(a(0, 0), &c5, 1.0), (a(0, 2), &c2, -1.0), (a(0, 3), &c1, 1.0)]);
    let b12 = lin([(a(3, 0), &s5, -1.0), (a(3, 2), &s2, 1.0), (a(3, 3), &s1, -1.0)]);
    let b13 = lin([(a(2, 0), &s5, 1.0), (a(2, 2), &s2, -1.0), (a(2, 3), &s1, 1.0)]);
    let b22 = lin([(a(3, 0), &s4, 1.0), (a(3, 1), &s2, -1.0), (a(3, 3), &s0, 1.0)]);
    let b23 = lin([(a(2, 0), &s4, -1.0), (a(2, 1), &s2, 1.0), (a(2, 3), &s0, -1.0)]);
    let b33 = lin([(a(2, 0), &s3, 1.0), (a(2, 1), &s1, -1.0), (a(2, 2), &s0, 1.0)]);
    Ok(([b00, b01, b02, b03, b11, b12, b13, b22, b23, b33], det))
}

/// Christoffel symbols of the second kind `Γ^k_ij`.
#[derive(Clone, Debug)]
pub struct Christoffel {
    gamma: Vec<Jet>,
}

impl Christoffel {
    /// Vanishing symbols (flat coordinates).
    pub fn zero(order: usize) -> Self {
        Christoffel {
            gamma: vec![Jet::zero(order); 40],
        }
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> &Jet {
        &self.gamma[k * 10 + sym(i, j)]
    }

    pub fn order(&self) -> usize {
        self.gamma[0].order()
    }
}

/// Riemann tensor (all indices down), Ricci tensor and scalar curvature.
#[derive(Clone, Debug)]
pub struct Curvature {
    riemann: Vec<Jet>,
    pub ricci: [Jet; 10],
    pub scalar: Jet,
}

impl Curvature {
    #[inline]
    pub fn riemann(&self, a: usize, b: usize, i: usize, j: usize) -> &Jet {
        &self.riemann[((a * 4 + b) * 4 + i) * 4 + j]
    }

    pub fn order(&self) -> usize {
        self.scalar.order()
    }
}

/// A Riemannian metric on a chart, given by the jets of its 10 entries.
#[derive(Clone, Debug)]
pub struct MetricField {
    pub base: [f64; NVARS],
    pub g: [Jet; 10],
}

impl MetricField {
    pub fn new(base: [f64; NVARS], g: [Jet; 10]) -> Result<Self> {
        let order = g[0].order();
        if g.iter().any(|c| c.order() != order) {
            return Err(Error::InvalidInput("metric entries must share one order".into()));
        }
        let mf = MetricField { base, g };
        let c0 = mf.ellipticity();
        if !(c0 > 0.0) {
            return Err(Error::NotImmersed { gram_det: c0 });
        }
        Ok(mf)
    }

    /// Flat metric `δ` as order-`order` jets.
    pub fn flat(base: [f64; NVARS], order: usize) -> Self {
        let g = std::array::from_fn(|p| {
            let (i, j) = PAIRS[p];
            Jet::constant(order, if i == j { 1.0 } else { 0.0 })
        });
        MetricField { base, g }
    }

    /// `e^{2λ} g` for a conformal factor given as a jet.
    pub fn conformal(&self, lambda: &Jet) -> Self {
        let factor = lambda.scale(2.0).exp();
        MetricField {
            base: self.base,
            g: std::array::from_fn(|p| &self.g[p] * &factor),
        }
    }

    pub fn order(&self) -> usize {
        self.g[0].order()
    }

    pub fn values(&self) -> [[f64; 4]; 4] {
        sym_values(&self.g)
    }

    /// Ellipticity constant `c₀` with `c₀ δ ≤ g ≤ δ / c₀` at the base point
    /// (non-positive when `g` is not positive definite).
    pub fn ellipticity(&self) -> f64 {
        let eig = symmetric_eigenvalues(self.values());
        let lo = eig[0];
        let hi = eig[3];
        if lo <= 0.0 {
            return lo;
        }
        lo.min(1.0 / hi)
    }

    /// Inverse metric and `|g|^{1/2}` to the metric's order.
    pub fn inverse_and_volume(&self) -> Result<([Jet; 10], Jet)> {
        let (inv, det) = invert_symmetric(&self.g)?;
        Ok((inv, det.sqrt()?))
    }

    pub fn christoffel(&self) -> Result<Christoffel> {
        let order = self.order();
        if order == 0 {
            return Err(Error::OrderExhausted {
                needed: 1,
                available: 0,
            });
        }
        let trunc: [Jet; 10] = std::array::from_fn(|p| self.g[p].truncated(order - 1));
        let (ginv, _) = invert_symmetric(&trunc)?;
        christoffel_from(&self.g, &ginv)
    }

    pub fn curvature(&self) -> Result<Curvature> {
        let order = self.order();
        if order < 2 {
            return Err(Error::OrderExhausted {
                needed: 2,
                available: order,
            });
        }
        let gamma = self.christoffel()?;
        curvature_from(&self.g, &gamma)
    }

    /// `Δ_g u = |g|^{-1/2} ∂_i (|g|^{1/2} gⁱʲ ∂_j u)`.
    pub fn laplacian(&self, u: &Jet) -> Result<Jet> {
        if u.order() < 2 || self.order() < 1 {
            return Err(Error::OrderExhausted {
                needed: 2,
                available: u.order().min(self.order() + 1),
            });
        }
        let (ginv, vol) = self.inverse_and_volume()?;
        Ok(divergence_laplacian(&ginv, &vol, u))
    }
}

fn divergence_laplacian(ginv: &[Jet; 10], vol: &Jet, u: &Jet) -> Jet {
    let du: Vec<Jet> = (0..4).map(|k| u.partial(k).unwrap()).collect();
    let order = du[0].order().min(vol.order());
    let mut div = Jet::zero(order.saturating_sub(1));
    for j in 0..4 {
        let mut flux = Jet::zero(order);
        for k in 0..4 {
            fma_into(&mut flux, &ginv[sym(j, k)], &du[k]);
        }
        let flux = &flux * vol;
        div += &flux.partial(j).unwrap();
    }
    let inv = vol.truncated(div.order()).recip().unwrap();
    &div * &inv
}

fn christoffel_from(g: &[Jet; 10], ginv: &[Jet; 10]) -> Result<Christoffel> {
    let dg: Vec<[Jet; 10]> = (0..4)
        .map(|l| std::array::from_fn(|p| g[p].partial(l).unwrap()))
        .collect();
    // first kind: Γ_lij = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
    let mut first = Vec::with_capacity(40);
    for l in 0..4 {
        for &(i, j) in &PAIRS {
            let mut s = &dg[i][sym(j, l)] + &dg[j][sym(i, l)];
            s -= &dg[l][sym(i, j)];
            first.push(s.scale(0.5));
        }
    }
    let order = first[0].order();
    let mut gamma = Vec::with_capacity(40);
    for k in 0..4 {
        for p in 0..10 {
            let mut acc = Jet::zero(order);
            for l in 0..4 {
                fma_into(&mut acc, &ginv[sym(k, l)], &first[l * 10 + p]);
            }
            gamma.push(acc);
        }
    }
    Ok(Christoffel { gamma })
}

fn curvature_from(g: &[Jet; 10], gamma: &Christoffel) -> Result<Curvature> {
    if gamma.order() == 0 {
        return Err(Error::OrderExhausted {
            needed: 2,
            available: 1,
        });
    }
    let order = gamma.order() - 1;
    let dgamma: Vec<Vec<Jet>> = (0..4)
        .map(|mu| gamma.gamma.iter().map(|x| x.partial(mu).unwrap()).collect())
        .collect();
    let dg = |mu: usize, rho: usize, i: usize, j: usize| &dgamma[mu][rho * 10 + sym(i, j)];
    // R^ρ_{σμν}
    let mut up = vec![Jet::zero(order); 256];
    for rho in 0..4 {
        for sigma in 0..4 {
            for mu in 0..4 {
                for nu in (mu + 1)..4 {
                    let mut r = dg(mu, rho, nu, sigma) - dg(nu, rho, mu, sigma);
                    for lam in 0..4 {
                        fma_into(&mut r, gamma.get(rho, mu, lam), gamma.get(lam, nu, sigma));
                        let t = gamma.get(rho, nu, lam) * gamma.get(lam, mu, sigma);
                        r -= &t;
                    }
                    let neg = -&r;
                    up[((rho * 4 + sigma) * 4 + nu) * 4 + mu] = neg;
                    up[((rho * 4 + sigma) * 4 + mu) * 4 + nu] = r;
                }
            }
        }
    }
    let mut riemann = vec![Jet::zero(order); 256];
    for a in 0..4 {
        for b in 0..4 {
            for i in 0..4 {
                for j in (i + 1)..4 {
                    let mut acc = Jet::zero(order);
                    for rho in 0..4 {
                        fma_into(&mut acc, &g[sym(a, rho)], &up[((rho * 4 + b) * 4 + i) * 4 + j]);
                    }
                    riemann[((a * 4 + b) * 4 + j) * 4 + i] = -&acc;
                    riemann[((a * 4 + b) * 4 + i) * 4 + j] = acc;
                }
            }
        }
    }
    let gt: [Jet; 10] = std::array::from_fn(|p| g[p].truncated(order + 1));
    let (ginv, _) = invert_symmetric(&gt)?;
    let ricci: [Jet; 10] = std::array::from_fn(|p| {
        let (b, j) = PAIRS[p];
        let mut acc = Jet::zero(order);
        for a in 0..4 {
            for i in 0..4 {
                fma_into(&mut acc, &ginv[sym(a, i)], &riemann[((a * 4 + b) * 4 + i) * 4 + j]);
            }
        }
        acc
    });
    let mut scalar = Jet::zero(order);
    for b in 0..4 {
        for j in 0..4 {
            fma_into(&mut scalar, &ginv[sym(b, j)], &ricci[sym(b, j)]);
        }
    }
    Ok(Curvature {
        riemann,
        ricci,
        scalar,
    })
}

/// Eigenvalues (ascending) of a symmetric 4×4 matrix by cyclic Jacobi sweeps.
pub fn symmetric_eigenvalues(mut a: [[f64; 4]; 4]) -> [f64; 4] {
    for _ in 0..64 {
        let mut off = 0.0;
        for i in 0..4 {
            for j in (i + 1)..4 {
                off += a[i][j] * a[i][j];
            }
        }
        let scale: f64 = (0..4).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * scale.max(1e-300) {
            break;
        }
        for p in 0..4 {
            for q in (p + 1)..4 {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..4 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..4 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut e = [a[0][0], a[1][1], a[2][2], a[3][3]];
    e.sort_by(|x, y| x.partial_cmp(y).unwrap());
    e
}

/// All pointwise geometric quantities of an immersion.
#[derive(Clone, Debug)]
pub struct GeometryFrame {
    pub base: [f64; NVARS],
    pub ambient_dim: usize,
    /// Order of the immersion jets the frame was built from.
    pub order: usize,
    /// `∂_iΦ`, order `K−1`.
    pub tangents: [VecJet; 4],
    /// `∂_ijΦ` (symmetric storage), order `K−2`.
    pub hessian: [VecJet; 10],
    /// `g_ij`, order `K−1`.
    pub metric: [Jet; 10],
    /// `gⁱʲ`, order `K−2`.
    pub metric_inv: [Jet; 10],
    /// `|g|^{1/2}`, order `K−2`.
    pub volume: Jet,
    /// `gˡᵏ ∂_kΦ`, order `K−2`; `π_T v = Σ_l (∂_lΦ·v) gˡᵏ∂_kΦ`.
    pub dual_tangents: [VecJet; 4],
    pub christoffel: Christoffel,
    /// `h_ij = π_n ∂_ijΦ`, order `K−2`.
    pub second_form: [VecJet; 10],
    /// Largest relative discrepancy between `π_n ∂_ijΦ` and `∂_ijΦ − Γ^k_ij ∂_kΦ`.
    pub second_form_residual: f64,
    /// `h⁰_ij = h_ij − g_ij H`, order `K−2`.
    pub traceless: [VecJet; 10],
    /// `H = ¼ gⁱʲ h_ij`, order `K−2`.
    pub mean_curvature: VecJet,
    /// `∂_i H`, order `K−3`.
    pub mean_curvature_grad: Option<[VecJet; 4]>,
    /// `π_n ∂_i H`, order `K−3`.
    pub normal_grad_h: Option<[VecJet; 4]>,
    /// `Δ⊥H`, order `K−4`.
    pub normal_laplacian_h: Option<VecJet>,
    /// `Δ⊥²H`, order `K−6`.
    pub normal_bilaplacian_h: Option<VecJet>,
    /// Intrinsic curvature from metric jets, order `K−3`.
    pub curvature: Option<Curvature>,
}

/// What to compute beyond the extrinsic core of a frame.
#[derive(Clone, Copy, Debug)]
pub struct FrameOptions {
    pub rank_floor: f64,
    /// Intrinsic curvature from metric jets (needs `K ≥ 3`).
    pub curvature: bool,
    /// `Δ⊥H` and `Δ⊥²H` when the order allows.
    pub normal_laplacians: bool,
}

impl Default for FrameOptions {
    fn default() -> Self {
        FrameOptions {
            rank_floor: DEFAULT_RANK_FLOOR,
            curvature: true,
            normal_laplacians: true,
        }
    }
}

/// Build the frame from immersion jets.
pub fn frame(p: &ImmersionPoint) -> Result<GeometryFrame> {
    frame_with(p, &FrameOptions::default())
}

pub fn frame_with_floor(p: &ImmersionPoint, rank_floor: f64) -> Result<GeometryFrame> {
    frame_with(
        p,
        &FrameOptions {
            rank_floor,
            ..FrameOptions::default()
        },
    )
}

pub fn frame_with(p: &ImmersionPoint, opts: &FrameOptions) -> Result<GeometryFrame> {
    let rank_floor = opts.rank_floor;
    let order = p.order();
    if order < 2 {
        return Err(Error::OrderExhausted {
            needed: 2,
            available: order,
        });
    }
    let m = p.ambient_dim();
    let tangents: [VecJet; 4] = std::array::from_fn(|i| {
        p.components.iter().map(|c| c.partial(i).unwrap()).collect()
    });
    let metric: [Jet; 10] = std::array::from_fn(|q| {
        let (i, j) = PAIRS[q];
        dot(&tangents[i], &tangents[j])
    });
    let gv = sym_values(&metric);
    let det0 = det4(gv);
    let tr = (gv[0][0] + gv[1][1] + gv[2][2] + gv[3][3]) / 4.0;
    let rel = det0 / (tr * tr * tr * tr);
    if !(rel >= rank_floor) {
        return Err(Error::NotImmersed { gram_det: rel });
    }
    let low = order - 2;
    let metric_low: [Jet; 10] = std::array::from_fn(|q| metric[q].truncated(low));
    let (metric_inv, det) = invert_symmetric(&metric_low)?;
    let volume = det.sqrt()?;
    let hessian: [VecJet; 10] = std::array::from_fn(|q| {
        let (i, j) = PAIRS[q];
        tangents[i].iter().map(|c| c.partial(j).unwrap()).collect()
    });
    let dual_tangents: [VecJet; 4] = std::array::from_fn(|l| {
        (0..m)
            .map(|c| {
                let mut acc = Jet::zero(low);
                for k in 0..4 {
                    fma_into(&mut acc, &metric_inv[sym(l, k)], &tangents[k][c]);
                }
                acc
            })
            .collect()
    });
    let metric_field = MetricField {
        base: p.base,
        g: metric.clone(),
    };
    let christoffel = christoffel_from(&metric, &metric_inv)?;
    let second_form: [VecJet; 10] =
        std::array::from_fn(|q| project_normal_raw(&tangents, &dual_tangents, &hessian[q]));
    // Christoffel route, compared at the base point
    let mut residual: f64 = 0.0;
    for (q, &(i, j)) in PAIRS.iter().enumerate() {
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for c in 0..m {
            let mut alt = hessian[q][c].value();
            for k in 0..4 {
                alt -= christoffel.get(k, i, j).value() * tangents[k][c].value();
            }
            num = num.max((alt - second_form[q][c].value()).abs());
            den = den.max(alt.abs()).max(hessian[q][c].value().abs());
        }
        if den > 0.0 {
            residual = residual.max(num / den);
        }
    }
    let mean_curvature: VecJet = (0..m)
        .map(|c| {
            let mut acc = Jet::zero(low);
            for (q, &(i, j)) in PAIRS.iter().enumerate() {
                let w = if i == j { 0.25 } else { 0.5 };
                let t = &metric_inv[q] * &second_form[q][c];
                acc.add_scaled(w, &t);
            }
            acc
        })
        .collect();
    let traceless: [VecJet; 10] = std::array::from_fn(|q| {
        (0..m)
            .map(|c| {
                let t = &metric_low[q] * &mean_curvature[c];
                &second_form[q][c] - &t
            })
            .collect()
    });
    let mut fr = GeometryFrame {
        base: p.base,
        ambient_dim: m,
        order,
        tangents,
        hessian,
        metric,
        metric_inv,
        volume,
        dual_tangents,
        christoffel,
        second_form,
        second_form_residual: residual,
        traceless,
        mean_curvature,
        mean_curvature_grad: None,
        normal_grad_h: None,
        normal_laplacian_h: None,
        normal_bilaplacian_h: None,
        curvature: None,
    };
    if order >= 3 {
        let grad: [VecJet; 4] = std::array::from_fn(|i| {
            fr.mean_curvature
                .iter()
                .map(|c| c.partial(i).unwrap())
                .collect()
        });
        let ngrad: [VecJet; 4] = std::array::from_fn(|i| fr.project_normal(&grad[i]));
        fr.mean_curvature_grad = Some(grad);
        fr.normal_grad_h = Some(ngrad);
        if opts.curvature {
            fr.curvature = Some(metric_field.curvature()?);
        }
    }
    if order >= 4 && opts.normal_laplacians {
        let lap = fr.normal_laplacian_unchecked(&fr.mean_curvature)?;
        if order >= 6 {
            fr.normal_bilaplacian_h = Some(fr.normal_laplacian_unchecked(&lap)?);
        }
        fr.normal_laplacian_h = Some(lap);
    }
    Ok(fr)
}

fn project_normal_raw(tangents: &[VecJet; 4], dual: &[VecJet; 4], v: &[Jet]) -> VecJet {
    let mut out: VecJet = v.to_vec();
    for l in 0..4 {
        let coef = dot(&tangents[l], v);
        for (o, d) in out.iter_mut().zip(&dual[l]) {
            let t = d * &coef;
            *o -= &t;
        }
    }
    out
}

pub fn det4(a: [[f64; 4]; 4]) -> f64 {
    let s0 = a[0][0] * a[1][1] - a[1][0] * a[0][1];
    let s1 = a[0][0] * a[1][2] - a[1][0] * a[0][2];
    let s2 = a[0][0] * a[1][3] - a[1][0] * a[0][3];
    let s3 = a[0][1] * a[1][2] - a[1][1] * a[0][2];
    let s4 = a[0][1] * a[1][3] - a[1][1] * a[0][3];
    let s5 = a[0][2] * a[1][3] - a[1][2] * a[0][3];
    let c5 = a[2][2] * a[3][3] - a[3][2] * a[2][3];
    let c4 = a[2][1] * a[3][3] - a[3][1] * a[2][3];
    let c3 = a[2][1] * a[3][2] - a[3][1] * a[2][2];
    let c2 = a[2][0] * a[3][3] - a[3][0] * a[2][3];
    let c1 = a[2][0] * a[3][2] - a[3][0] * a[2][2];
    let c0 = a[2][0] * a[3][1] - a[3][0] * a[2][1];
    s0 * c5 - s1 * c4 + s2 * c3 + s3 * c2 - s4 * c1 + s5 * c0
}

impl GeometryFrame {
    /// `π_n v`; the result order is capped at `K−2`.
    pub fn project_normal(&self, v: &[Jet]) -> VecJet {
        project_normal_raw(&self.tangents, &self.dual_tangents, v)
    }

    /// `π_T v`.
    pub fn project_tangent(&self, v: &[Jet]) -> VecJet {
        let n = self.project_normal(v);
        v.iter().zip(&n).map(|(a, b)| a - b).collect()
    }

    /// Values of `π_n` as an `m×m` matrix at the base point.
    pub fn normal_projector(&self) -> Vec<Vec<f64>> {
        let m = self.ambient_dim;
        let mut p = vec![vec![0.0; m]; m];
        for a in 0..m {
            p[a][a] = 1.0;
            for b in 0..m {
                for l in 0..4 {
                    p[a][b] -= self.dual_tangents[l][a].value() * self.tangents[l][b].value();
                }
            }
        }
        p
    }

    pub fn metric_values(&self) -> [[f64; 4]; 4] {
        sym_values(&self.metric)
    }

    pub fn metric_inv_values(&self) -> [[f64; 4]; 4] {
        sym_values(&self.metric_inv)
    }

    /// Value of `gⁱʲ` at the base point.
    #[inline]
    pub fn ginv(&self, i: usize, j: usize) -> f64 {
        self.metric_inv[sym(i, j)].value()
    }

    /// Value of `h_ij` at the base point.
    pub fn h_value(&self, i: usize, j: usize) -> Vec<f64> {
        self.second_form[sym(i, j)].iter().map(|c| c.value()).collect()
    }

    pub fn mean_curvature_value(&self) -> Vec<f64> {
        self.mean_curvature.iter().map(|c| c.value()).collect()
    }

    /// Divergence `∇_j Yʲ = |g|^{-1/2} ∂_j(|g|^{1/2} Yʲ)` of an ambient-vector
    /// valued field with one upper parameter index.
    pub fn divergence(&self, field: &[VecJet; 4]) -> VecJet {
        let m = field[0].len();
        let order = field[0][0].order().min(self.volume.order());
        let mut out: VecJet = vec![Jet::zero(order.saturating_sub(1)); m];
        for j in 0..4 {
            for c in 0..m {
                let weighted = &field[j][c] * &self.volume;
                out[c] += &weighted.partial(j).unwrap();
            }
        }
        let inv = self.volume.truncated(out[0].order()).recip().unwrap();
        out.iter().map(|c| c * &inv).collect()
    }

    /// Raise the index of a covector-valued field: `Yʲ = gʲᵏ Y_k`.
    pub fn raise(&self, lower: &[VecJet; 4]) -> [VecJet; 4] {
        let m = lower[0].len();
        let order = lower[0][0].order().min(self.metric_inv[0].order());
        std::array::from_fn(|j| {
            (0..m)
                .map(|c| {
                    let mut acc = Jet::zero(order);
                    for k in 0..4 {
                        fma_into(&mut acc, &self.metric_inv[sym(j, k)], &lower[k][c]);
                    }
                    acc
                })
                .collect()
        })
    }

    /// `Δ⊥v = π_n ∇_j π_n ∇ʲ v` without checking that `v` is normal.
    pub fn normal_laplacian_unchecked(&self, v: &[Jet]) -> Result<VecJet> {
        let order = v.iter().map(|c| c.order()).min().unwrap_or(0);
        if order < 2 {
            return Err(Error::OrderExhausted {
                needed: 2,
                available: order,
            });
        }
        let dv: [VecJet; 4] =
            std::array::from_fn(|k| v.iter().map(|c| c.partial(k).unwrap()).collect());
        let ndv: [VecJet; 4] = std::array::from_fn(|k| self.project_normal(&dv[k]));
        let up = self.raise(&ndv);
        let div = self.divergence(&up);
        Ok(self.project_normal(&div))
    }

    /// Scalar Laplace–Beltrami operator.
    pub fn laplacian_scalar(&self, u: &Jet) -> Result<Jet> {
        if u.order() < 2 {
            return Err(Error::OrderExhausted {
                needed: 2,
                available: u.order(),
            });
        }
        Ok(divergence_laplacian(&self.metric_inv, &self.volume, u))
    }

    /// Laplace–Beltrami operator applied componentwise to an ambient vector.
    pub fn laplacian_vector(&self, v: &[Jet]) -> Result<VecJet> {
        v.iter().map(|c| self.laplacian_scalar(c)).collect()
    }
}

/// `Δ⊥v` for a normal field; inputs with a tangential part above
/// `tolerance · |v|` at the base point are rejected.
pub fn normal_laplacian(frame: &GeometryFrame, v: &[Jet], tolerance: f64) -> Result<VecJet> {
    let t = frame.project_tangent(v);
    let tn = t.iter().map(|c| c.value().powi(2)).sum::<f64>().sqrt();
    let vn = v.iter().map(|c| c.value().powi(2)).sum::<f64>().sqrt();
    if tn > tolerance * vn.max(f64::MIN_POSITIVE) && tn > 0.0 {
        return Err(Error::ContractViolation(format!(
            "normal Laplacian input has tangential part {tn:e} (|v| = {vn:e})"
        )));
    }
    frame.normal_laplacian_unchecked(v)
}

/// Intrinsic curvature of the frame's metric.
pub fn riemann(frame: &GeometryFrame) -> Result<Curvature> {
    match &frame.curvature {
        Some(c) => Ok(c.clone()),
        None if frame.order >= 3 => MetricField {
            base: frame.base,
            g: frame.metric.clone(),
        }
        .curvature(),
        None => Err(Error::OrderExhausted {
            needed: 3,
            available: frame.order,
        }),
    }
}

/// Covariant tensor with ambient-vector values: `width` components per index tuple.
#[derive(Clone, Debug)]
pub struct CovTensor {
    pub rank: usize,
    pub width: usize,
    pub data: Vec<Jet>,
}

impl CovTensor {
    pub fn new(rank: usize, width: usize, data: Vec<Jet>) -> Result<Self> {
        if data.len() != 4usize.pow(rank as u32) * width {
            return Err(Error::InvalidInput(format!(
                "rank-{rank} tensor of width {width} needs {} jets",
                4usize.pow(rank as u32) * width
            )));
        }
        Ok(CovTensor { rank, width, data })
    }

    pub fn scalar(f: Jet) -> Self {
        CovTensor {
            rank: 0,
            width: 1,
            data: vec![f],
        }
    }

    pub fn from_symmetric(s: &[Jet; 10]) -> Self {
        let mut data = Vec::with_capacity(16);
        for i in 0..4 {
            for j in 0..4 {
                data.push(s[sym(i, j)].clone());
            }
        }
        CovTensor {
            rank: 2,
            width: 1,
            data,
        }
    }

    pub fn slot(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * 4 + i) * self.width
    }

    pub fn get(&self, idx: &[usize], c: usize) -> &Jet {
        &self.data[self.slot(idx) + c]
    }

    pub fn order(&self) -> usize {
        self.data.iter().map(|j| j.order()).min().unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, j| m.max(j.value().abs()))
    }
}

fn index_tuple(mut flat: usize, rank: usize) -> Vec<usize> {
    let mut idx = vec![0; rank];
    for s in (0..rank).rev() {
        idx[s] = flat % 4;
        flat /= 4;
    }
    idx
}

/// `(∇T)_{k i₁…i_r} = ∂_k T_{i₁…i_r} − Σ_s Γ^l_{k i_s} T_{…l…}`; the new index comes first.
pub fn covariant_derivative(christoffel: &Christoffel, t: &CovTensor) -> Result<CovTensor> {
    let order = t.order();
    if order == 0 {
        return Err(Error::OrderExhausted {
            needed: 1,
            available: 0,
        });
    }
    let out_order = (order - 1).min(christoffel.order());
    let n = 4usize.pow(t.rank as u32);
    let mut data = Vec::with_capacity(4 * n * t.width);
    for k in 0..4 {
        for flat in 0..n {
            let idx = index_tuple(flat, t.rank);
            for c in 0..t.width {
                let mut acc = t.data[flat * t.width + c].partial(k)?.truncated(out_order);
                for s in 0..t.rank {
                    let mut moved = idx.clone();
                    for l in 0..4 {
                        moved[s] = l;
                        let src = t.get(&moved, c);
                        let prod = christoffel.get(l, k, idx[s]) * src;
                        acc -= &prod;
                    }
                }
                data.push(acc);
            }
        }
    }
    Ok(CovTensor {
        rank: t.rank + 1,
        width: t.width,
        data,
    })
}

impl GeometryFrame {
    pub fn covariant_derivative(&self, t: &CovTensor) -> Result<CovTensor> {
        covariant_derivative(&self.christoffel, t)
    }
}

/// Euclidean norm of a vector of jet values.
pub fn value_norm(v: &[Jet]) -> f64 {
    v.iter().map(|c| c.value().powi(2)).sum::<f64>().sqrt()
}

pub fn values(v: &[Jet]) -> Vec<f64> {
    v.iter().map(|c| c.value()).collect()
}
