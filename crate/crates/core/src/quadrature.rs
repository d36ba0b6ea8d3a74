//! One-dimensional rules and tensor-product charts used for integration.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wt = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = mid - half * z;
        x[n - 1 - i] = mid + half * z;
        w[i] = half * wt;
        w[n - 1 - i] = half * wt;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Periodic trapezoid rule on `[0, 2π)`.
pub fn trapezoid_periodic(n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = 2.0 * PI / n as f64;
    ((0..n).map(|i| i as f64 * h).collect(), vec![h; n])
}

/// Integration domains for immersions.
#[derive(Clone, Debug, PartialEq)]
pub enum Chart {
    /// `[0, 2π)⁴` with the periodic trapezoid rule on each axis.
    PeriodicBox { n: [usize; 4] },
    /// Stereographic chart of the whole sphere in radial-angular coordinates
    /// `x = tan(u/2)·ω`, `u ∈ [0, π)`, `ω ∈ S³` in Hopf coordinates.
    /// Gauss–Legendre in `u` and in the Hopf latitude, trapezoid in the two
    /// Hopf angles.
    SphereChart { n: [usize; 4] },
    /// Box `[lo, hi]` with Gauss–Legendre on each axis (open pieces).
    Box { lo: [f64; 4], hi: [f64; 4], n: [usize; 4] },
}

impl Chart {
    pub fn periodic(n: usize) -> Chart {
        Chart::PeriodicBox { n: [n; 4] }
    }

    pub fn sphere(n: usize) -> Chart {
        Chart::SphereChart { n: [n; 4] }
    }

    pub fn resolution(&self) -> [usize; 4] {
        match self {
            Chart::PeriodicBox { n } | Chart::SphereChart { n } | Chart::Box { n, .. } => *n,
        }
    }

    pub fn rule_id(&self) -> &'static str {
        match self {
            Chart::PeriodicBox { .. } => "trapezoid-periodic",
            Chart::SphereChart { .. } => "stereo-radial-gauss-legendre",
            Chart::Box { .. } => "gauss-legendre-box",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution().iter().any(|&k| k < 8) {
            return Err(Error::InvalidInput(format!(
                "resolution {:?} below 8 nodes per axis",
                self.resolution()
            )));
        }
        Ok(())
    }

    /// Chart points with their quadrature weights (chart Jacobian included,
    /// metric volume density excluded).
    pub fn nodes(&self) -> Vec<([f64; 4], f64)> {
        match self {
            Chart::PeriodicBox { n } => {
                let axes: Vec<_> = n.iter().map(|&k| trapezoid_periodic(k)).collect();
                product(&axes)
            }
            Chart::Box { lo, hi, n } => {
                let axes: Vec<_> = (0..4).map(|a| gauss_legendre(n[a], lo[a], hi[a])).collect();
                product(&axes)
            }
            Chart::SphereChart { n } => {
                let (us, uw) = gauss_legendre(n[0], 0.0, PI);
                let (es, ew) = gauss_legendre(n[1], 0.0, PI / 2.0);
                let (x1, w1) = trapezoid_periodic(n[2]);
                let (x2, w2) = trapezoid_periodic(n[3]);
                let mut out = Vec::with_capacity(n.iter().product());
                for (&u, &wu) in us.iter().zip(&uw) {
                    let r = (0.5 * u).tan();
                    let radial = wu * r * r * r * 0.5 * (1.0 + r * r);
                    for (&eta, &we) in es.iter().zip(&ew) {
                        let (se, ce) = eta.sin_cos();
                        let angular = we * se * ce;
                        for (&a, &wa) in x1.iter().zip(&w1) {
                            for (&b, &wb) in x2.iter().zip(&w2) {
                                let x = [
                                    r * ce * a.cos(),
                                    r * ce * a.sin(),
                                    r * se * b.cos(),
                                    r * se * b.sin(),
                                ];
                                out.push((x, radial * angular * wa * wb));
                            }
                        }
                    }
                }
                out
            }
        }
    }
}

fn product(axes: &[(Vec<f64>, Vec<f64>)]) -> Vec<([f64; 4], f64)> {
    let mut out = Vec::with_capacity(axes.iter().map(|a| a.0.len()).product());
    for (a, wa) in axes[0].0.iter().zip(&axes[0].1) {
        for (b, wb) in axes[1].0.iter().zip(&axes[1].1) {
            for (c, wc) in axes[2].0.iter().zip(&axes[2].1) {
                for (d, wd) in axes[3].0.iter().zip(&axes[3].1) {
                    out.push(([*a, *b, *c, *d], wa * wb * wc * wd));
                }
            }
        }
    }
    out
}

/// Deterministic pairwise sum (fixed binary tree over the input order).
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}
