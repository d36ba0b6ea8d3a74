//! The energy `E_A` and the four quartic invariants of `h₀`, pointwise and
//! integrated.
//!
//! Two independent evaluation paths exist. The jet path reads everything off
//! a [`GeometryFrame`]. The fast path works on plain derivative values
//! `∂Φ, ∂²Φ, ∂³Φ` at a point and is what quadrature uses; tests compare the
//! two.

use crate::error::{Error, Result};
use crate::geometry::{sym, GeometryFrame, ImmersionPoint, DEFAULT_RANK_FLOOR, PAIRS};
use crate::immersions::{Conformal, ImmersionSpec};
use crate::jets::MultiIndex;
use crate::quadrature::pairwise_sum;

/// Default weight of each quartic invariant in the total energy.
pub const DEFAULT_BETA: f64 = 1.0 / 12.0 + 0.01;

/// Sorted triples `i ≤ j ≤ k` in storage order of third derivatives.
pub const TRIPLES: [(usize, usize, usize); 20] = {
    let mut out = [(0, 0, 0); 20];
    let mut n = 0;
    let mut i = 0;
    while i < 4 {
        let mut j = i;
        while j < 4 {
            let mut k = j;
            while k < 4 {
                out[n] = (i, j, k);
                n += 1;
                k += 1;
            }
            j += 1;
        }
        i += 1;
    }
    out
};

const TRI_TABLE: [[[usize; 4]; 4]; 4] = {
    let mut t = [[[0; 4]; 4]; 4];
    let mut n = 0;
    while n < 20 {
        let (i, j, k) = TRIPLES[n];
        t[i][j][k] = n;
        t[i][k][j] = n;
        t[j][i][k] = n;
        t[j][k][i] = n;
        t[k][i][j] = n;
        t[k][j][i] = n;
        n += 1;
    }
    t
};

/// Storage slot of the unordered triple `(i, j, k)`.
#[inline]
pub fn tri(i: usize, j: usize, k: usize) -> usize {
    TRI_TABLE[i][j][k]
}

/// First, second and third partial derivatives of `Φ` at one point.
///
/// Layout: `d1[i*m + a]`, `d2[sym(i,j)*m + a]`, `d3[tri(i,j,k)*m + a]`.
#[derive(Clone, Debug)]
pub struct PointDerivs {
    pub m: usize,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
}

impl PointDerivs {
    pub fn zeros(m: usize) -> Self {
        PointDerivs {
            m,
            d1: vec![0.0; 4 * m],
            d2: vec![0.0; 10 * m],
            d3: vec![0.0; 20 * m],
        }
    }

    pub fn from_point(p: &ImmersionPoint) -> Result<Self> {
        if p.order() < 3 {
            return Err(Error::OrderExhausted {
                needed: 3,
                available: p.order(),
            });
        }
        let m = p.ambient_dim();
        let mut out = PointDerivs::zeros(m);
        for (a, c) in p.components.iter().enumerate() {
            for i in 0..4 {
                out.d1[i * m + a] = c.derivative(MultiIndex::unit(i));
            }
            for (q, &(i, j)) in PAIRS.iter().enumerate() {
                out.d2[q * m + a] = c.derivative(MultiIndex::from_directions(&[i, j]));
            }
            for (q, &(i, j, k)) in TRIPLES.iter().enumerate() {
                out.d3[q * m + a] = c.derivative(MultiIndex::from_directions(&[i, j, k]));
            }
        }
        Ok(out)
    }
}

/// Pointwise densities (without the volume weight) and the volume density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Density {
    pub ea: f64,
    /// `|h₀|⁴`, `⟨h₀⁴⟩`, `|h₀²|²`, `Tr(h₀⁴)`.
    pub quartics: [f64; 4],
    /// `|g|^{1/2}`.
    pub volume: f64,
    /// `|h|²_g`.
    pub h_sq: f64,
    /// `|π_n dH|²_g`.
    pub dh_sq: f64,
}

fn dotm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cholesky factor `L` of an SPD 4×4 matrix and its inverse.
fn cholesky(g: &[[f64; 4]; 4]) -> Option<([[f64; 4]; 4], [[f64; 4]; 4])> {
    let mut l = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..=i {
            let mut s = g[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut li = [[0.0; 4]; 4];
    for c in 0..4 {
        for i in 0..4 {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i][k] * li[k][c];
            }
            li[i][c] = s / l[i][i];
        }
    }
    Some((l, li))
}

/// `E_A` density from `gⁱʲ`, `h_ij`, `H` and `π_n ∂_i H` (flat slices, `m`
/// ambient components each).
fn ea_kernel(m: usize, ginv: &[[f64; 4]; 4], h: &[f64], hv: &[f64], dhn: &[f64]) -> f64 {
    let mut grad = 0.0;
    for k in 0..4 {
        for l in 0..4 {
            grad += ginv[k][l] * dotm(&dhn[k * m..(k + 1) * m], &dhn[l * m..(l + 1) * m]);
        }
    }
    let mut hh = [[0.0; 4]; 4];
    for (q, &(i, j)) in PAIRS.iter().enumerate() {
        let v = dotm(hv, &h[q * m..(q + 1) * m]);
        hh[i][j] = v;
        hh[j][i] = v;
    }
    // |H·h|² = tr((g⁻¹ A)²) with A_ij = H·h_ij
    let mut ga = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            ga[i][j] = (0..4).map(|k| ginv[i][k] * hh[k][j]).sum();
        }
    }
    let mut hdoth = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            hdoth += ga[i][j] * ga[j][i];
        }
    }
    let h2 = dotm(hv, hv);
    grad - hdoth + 7.0 * h2 * h2
}

/// The four quartic invariants of `h₀` given `g` and `h₀_ij`.
fn quartic_kernel(m: usize, g: &[[f64; 4]; 4], h0: &[f64]) -> Option<[f64; 4]> {
    let (_, li) = cholesky(g)?;
    // ĥ_ab = (L⁻¹)_ai h0_ij (L⁻¹)_bj, orthonormal components
    let mut hat = vec![0.0; 16 * m];
    for a in 0..4 {
        for b in 0..4 {
            let out = &mut hat[(a * 4 + b) * m..(a * 4 + b + 1) * m];
            for i in 0..=a {
                for j in 0..=b {
                    let w = li[a][i] * li[b][j];
                    if w == 0.0 {
                        continue;
                    }
                    let src = &h0[sym(i, j) * m..(sym(i, j) + 1) * m];
                    for (o, s) in out.iter_mut().zip(src) {
                        *o += w * s;
                    }
                }
            }
        }
    }
    let mut gram = [[0.0; 16]; 16];
    for x in 0..16 {
        for y in x..16 {
            let v = dotm(&hat[x * m..(x + 1) * m], &hat[y * m..(y + 1) * m]);
            gram[x][y] = v;
            gram[y][x] = v;
        }
    }
    let at = |i: usize, j: usize, k: usize, l: usize| gram[i * 4 + j][k * 4 + l];
    let norm2: f64 = (0..16).map(|x| gram[x][x]).sum();
    let q1 = norm2 * norm2;
    let q2: f64 = gram.iter().flatten().map(|v| v * v).sum();
    let mut q3 = 0.0;
    let mut q4 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let mij: f64 = (0..4).map(|k| at(i, k, k, j)).sum();
            q3 += mij * mij;
            for k in 0..4 {
                for l in 0..4 {
                    q4 += at(i, j, k, l) * at(i, l, k, j);
                }
            }
        }
    }
    Some([q1, q2, q3, q4])
}

/// Densities at a point from derivative values.
pub fn density(d: &PointDerivs) -> Result<Density> {
    density_with_floor(d, DEFAULT_RANK_FLOOR)
}

pub fn density_with_floor(d: &PointDerivs, rank_floor: f64) -> Result<Density> {
    let m = d.m;
    let t = |i: usize| &d.d1[i * m..(i + 1) * m];
    let s = |q: usize| &d.d2[q * m..(q + 1) * m];
    let u = |q: usize| &d.d3[q * m..(q + 1) * m];

    let mut g = [[0.0; 4]; 4];
    for &(i, j) in PAIRS.iter() {
        let v = dotm(t(i), t(j));
        g[i][j] = v;
        g[j][i] = v;
    }
    let tr = (g[0][0] + g[1][1] + g[2][2] + g[3][3]) / 4.0;
    let det = crate::geometry::det4(g);
    if !det.is_finite() {
        // non-finite derivatives: let the caller report the poisoned node
        return Ok(Density {
            ea: f64::NAN,
            quartics: [f64::NAN; 4],
            volume: f64::NAN,
            h_sq: f64::NAN,
            dh_sq: f64::NAN,
        });
    }
    if !(det >= rank_floor * tr.powi(4)) || tr <= 0.0 {
        return Err(Error::NotImmersed {
            gram_det: det / tr.powi(4),
        });
    }
    let (l, li) = cholesky(&g).ok_or(Error::NotImmersed {
        gram_det: det / tr.powi(4),
    })?;
    let volume = l[0][0] * l[1][1] * l[2][2] * l[3][3];
    let mut ginv = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            ginv[i][j] = (0..4).map(|k| li[k][i] * li[k][j]).sum();
        }
    }

    // Γ_{l,ij} = ∂_lΦ·∂_ijΦ and Γ^k_ij
    let mut gam_low = [[0.0; 4]; 10];
    let mut gam = [[0.0; 4]; 10];
    for q in 0..10 {
        for l in 0..4 {
            gam_low[q][l] = dotm(t(l), s(q));
        }
        for k in 0..4 {
            gam[q][k] = (0..4).map(|l| ginv[k][l] * gam_low[q][l]).sum();
        }
    }
    // h_ij = ∂_ijΦ − Γ^k_ij ∂_kΦ
    let mut h = vec![0.0; 10 * m];
    for q in 0..10 {
        let out = &mut h[q * m..(q + 1) * m];
        out.copy_from_slice(s(q));
        for k in 0..4 {
            let c = gam[q][k];
            for (o, tk) in out.iter_mut().zip(t(k)) {
                *o -= c * tk;
            }
        }
    }
    let mut hv = vec![0.0; m];
    for (q, &(i, j)) in PAIRS.iter().enumerate() {
        let w = if i == j { ginv[i][j] } else { 2.0 * ginv[i][j] } * 0.25;
        for (o, x) in hv.iter_mut().zip(&h[q * m..(q + 1) * m]) {
            *o += w * x;
        }
    }

    // π_n ∂_k H = ¼(∂_k gⁱʲ h_ij + gⁱʲ π_n ∂_k h_ij),
    // π_n ∂_k h_ij = π_n ∂_ijkΦ − h_ka Γ^a_ij,
    // ∂_k gⁱʲ = −gⁱᵃ (Γ_{a,kb} + Γ_{b,ka}) gᵇʲ
    let mut dhn = vec![0.0; 4 * m];
    let mut tmp = vec![0.0; m];
    for k in 0..4 {
        let mut dg = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                dg[a][b] = gam_low[sym(k, b)][a] + gam_low[sym(k, a)][b];
            }
        }
        let mut dginv = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = 0.0;
                for a in 0..4 {
                    for b in 0..4 {
                        acc -= ginv[i][a] * dg[a][b] * ginv[b][j];
                    }
                }
                dginv[i][j] = acc;
            }
        }
        // v = gⁱʲ ∂_ijkΦ (projected below), plus gⁱʲ(−h_ka Γ^a_ij) and ∂_k gⁱʲ h_ij
        tmp.iter_mut().for_each(|x| *x = 0.0);
        for (_, &(i, j)) in PAIRS.iter().enumerate() {
            let w = if i == j { 1.0 } else { 2.0 };
            let wu = w * ginv[i][j];
            for (o, x) in tmp.iter_mut().zip(u(tri(i, j, k))) {
                *o += wu * x;
            }
        }
        // π_n of tmp
        let tl: [f64; 4] = std::array::from_fn(|l| dotm(t(l), &tmp));
        for a in 0..4 {
            let c: f64 = (0..4).map(|l| ginv[a][l] * tl[l]).sum();
            for (o, x) in tmp.iter_mut().zip(t(a)) {
                *o -= c * x;
            }
        }
        for (q, &(i, j)) in PAIRS.iter().enumerate() {
            let w = if i == j { 1.0 } else { 2.0 };
            let wd = w * dginv[i][j];
            for (o, x) in tmp.iter_mut().zip(&h[q * m..(q + 1) * m]) {
                *o += wd * x;
            }
            let wg = w * ginv[i][j];
            for a in 0..4 {
                let c = wg * gam[q][a];
                if c == 0.0 {
                    continue;
                }
                let hka = &h[sym(k, a) * m..(sym(k, a) + 1) * m];
                for (o, x) in tmp.iter_mut().zip(hka) {
                    *o -= c * x;
                }
            }
        }
        for (o, x) in dhn[k * m..(k + 1) * m].iter_mut().zip(&tmp) {
            *o = 0.25 * x;
        }
    }

    let ea = ea_kernel(m, &ginv, &h, &hv, &dhn);
    let mut h_sq = 0.0;
    let mut dh_sq = 0.0;
    for i in 0..4 {
        for k in 0..4 {
            dh_sq += ginv[i][k] * dotm(&dhn[i * m..(i + 1) * m], &dhn[k * m..(k + 1) * m]);
            for j in 0..4 {
                for l in 0..4 {
                    let w = ginv[i][k] * ginv[j][l];
                    let (a, b) = (sym(i, j), sym(k, l));
                    h_sq += w * dotm(&h[a * m..(a + 1) * m], &h[b * m..(b + 1) * m]);
                }
            }
        }
    }
    let mut h0 = h;
    for (q, &(i, j)) in PAIRS.iter().enumerate() {
        for (o, x) in h0[q * m..(q + 1) * m].iter_mut().zip(&hv) {
            *o -= g[i][j] * x;
        }
    }
    let quartics = quartic_kernel(m, &g, &h0).ok_or(Error::NotImmersed {
        gram_det: det / tr.powi(4),
    })?;
    Ok(Density {
        ea,
        quartics,
        volume,
        h_sq,
        dh_sq,
    })
}

fn flat_values(v: &[Vec<crate::jets::Jet>]) -> Vec<f64> {
    v.iter().flat_map(|x| x.iter().map(|c| c.value())).collect()
}

/// `|π_n dH|² − |H·h|² + 7|H|⁴` from a frame built with `K ≥ 3`.
pub fn integrand_ea(frame: &GeometryFrame) -> Result<f64> {
    let dhn = frame.normal_grad_h.as_ref().ok_or(Error::OrderExhausted {
        needed: 3,
        available: frame.order,
    })?;
    Ok(ea_kernel(
        frame.ambient_dim,
        &frame.metric_inv_values(),
        &flat_values(&frame.second_form),
        &frame.mean_curvature_value(),
        &flat_values(dhn),
    ))
}

/// `|h₀|⁴`, `⟨h₀⁴⟩`, `|h₀²|²`, `Tr(h₀⁴)` from a frame.
pub fn integrand_h0_quartics(frame: &GeometryFrame) -> Result<[f64; 4]> {
    quartic_kernel(
        frame.ambient_dim,
        &frame.metric_values(),
        &flat_values(&frame.traceless),
    )
    .ok_or(Error::NotImmersed { gram_det: 0.0 })
}

/// Integrated energies over a chart, with the per-node fields kept.
#[derive(Clone, Debug)]
pub struct EnergyReport {
    pub immersion: String,
    pub e_a: f64,
    pub quartics: [f64; 4],
    pub beta: [f64; 4],
    /// `E_A + Σ βᵢ E₀ᵢ`.
    pub total: f64,
    pub rule: String,
    pub resolution: [usize; 4],
    pub node_count: usize,
    pub nodes: Vec<[f64; 4]>,
    /// Chart quadrature weights (Jacobian included, `|g|^{1/2}` excluded).
    pub weights: Vec<f64>,
    pub densities: Vec<Density>,
}

impl EnergyReport {
    /// One `key=value` record per energy.
    pub fn records(&self) -> Vec<String> {
        let res = self
            .resolution
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join("x");
        let names = ["E_A", "E0_h0_sq_sq", "E0_h0_fourth", "E0_h0_square_sq", "E0_trace_h0_fourth"];
        let mut values = vec![self.e_a];
        values.extend_from_slice(&self.quartics);
        let mut out: Vec<String> = names
            .iter()
            .zip(&values)
            .map(|(n, v)| {
                format!(
                    "record=energy name={n} value={v:.15e} immersion={} resolution={res} rule={} nodes={}",
                    self.immersion, self.rule, self.node_count
                )
            })
            .collect();
        out.push(format!(
            "record=energy name=total value={:.15e} beta={},{},{},{} immersion={} resolution={res} rule={} nodes={}",
            self.total, self.beta[0], self.beta[1], self.beta[2], self.beta[3], self.immersion, self.rule, self.node_count
        ));
        out
    }
}

/// Integrate densities supplied by `f` over the chart of `spec`.
pub fn integrate_with<F>(spec: &ImmersionSpec, beta: [f64; 4], f: F) -> Result<EnergyReport>
where
    F: Fn([f64; 4]) -> Result<Density>,
{
    spec.chart.validate()?;
    let nodes_w = spec.chart.nodes();
    let mut nodes = Vec::with_capacity(nodes_w.len());
    let mut weights = Vec::with_capacity(nodes_w.len());
    let mut densities = Vec::with_capacity(nodes_w.len());
    for (n, (x, w)) in nodes_w.into_iter().enumerate() {
        let d = f(x)?;
        if !d.ea.is_finite() || !d.volume.is_finite() || d.quartics.iter().any(|q| !q.is_finite()) {
            return Err(Error::PoisonedIntegrand { node: n, coords: x });
        }
        nodes.push(x);
        weights.push(w);
        densities.push(d);
    }
    let sum = |sel: &dyn Fn(&Density) -> f64| -> f64 {
        let v: Vec<f64> = densities
            .iter()
            .zip(&weights)
            .map(|(d, w)| sel(d) * d.volume * w)
            .collect();
        pairwise_sum(&v)
    };
    let e_a = sum(&|d| d.ea);
    let quartics: [f64; 4] = std::array::from_fn(|i| sum(&|d| d.quartics[i]));
    let total = e_a + (0..4).map(|i| beta[i] * quartics[i]).sum::<f64>();
    Ok(EnergyReport {
        immersion: spec.immersion.id().to_string(),
        e_a,
        quartics,
        beta,
        total,
        rule: spec.chart.rule_id().to_string(),
        resolution: spec.chart.resolution(),
        node_count: nodes.len(),
        nodes,
        weights,
        densities,
    })
}

/// Integrate `E_A` and the quartic energies of a closed-form immersion.
pub fn integrate(spec: &ImmersionSpec, beta: [f64; 4]) -> Result<EnergyReport> {
    integrate_with(spec, beta, |x| {
        let p = spec.immersion.point(x, 3)?;
        density(&PointDerivs::from_point(&p)?)
    })
}

/// Energies before and after a conformal transform of the ambient space.
#[derive(Clone, Debug)]
pub struct InvarianceReport {
    pub transform: String,
    pub before: EnergyReport,
    pub after: EnergyReport,
    /// Relative discrepancy of `E_A`.
    pub residual_ea: f64,
    /// Discrepancy of each quartic energy relative to `max(|E₀ᵢ|, |E_A|)`.
    pub residual_quartics: [f64; 4],
    /// Largest pointwise discrepancy of the weighted `E_A` density, relative
    /// to the largest density (recorded as data).
    pub pointwise_ea: f64,
}

/// Minimum distance between an inversion center and the image, by default.
pub const DEFAULT_INVERSION_CLEARANCE: f64 = 1.0;

pub fn conformal_invariance_check(
    spec: &ImmersionSpec,
    transform: &Conformal,
    clearance: f64,
) -> Result<InvarianceReport> {
    if let Conformal::Inversion { center, .. } = transform {
        for (x, _) in spec.chart.nodes() {
            let y = spec.immersion.value(x)?;
            let d2: f64 = y.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2.sqrt() < clearance {
                return Err(Error::RejectedTransform(format!(
                    "inversion center within {:.3e} of the image at x = {x:?}",
                    d2.sqrt()
                )));
            }
        }
    }
    let beta = [DEFAULT_BETA; 4];
    let before = integrate(spec, beta)?;
    let after = integrate(&spec.with_immersion(spec.immersion.transformed(transform)), beta)?;
    let rel = |a: f64, b: f64, scale: f64| (a - b).abs() / scale.max(f64::MIN_POSITIVE);
    let residual_ea = rel(after.e_a, before.e_a, before.e_a.abs());
    let residual_quartics = std::array::from_fn(|i| {
        rel(
            after.quartics[i],
            before.quartics[i],
            before.quartics[i].abs().max(before.e_a.abs()),
        )
    });
    let mut pointwise: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (a, b) in after.densities.iter().zip(&before.densities) {
        pointwise = pointwise.max((a.ea * a.volume - b.ea * b.volume).abs());
        scale = scale.max((b.ea * b.volume).abs());
    }
    Ok(InvarianceReport {
        transform: transform.id(),
        residual_ea,
        residual_quartics,
        pointwise_ea: pointwise / scale.max(f64::MIN_POSITIVE),
        before,
        after,
    })
}
