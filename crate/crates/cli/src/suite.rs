//! The identity suite behind `verify`.
//!
//! Each check returns its worst residual over the sampled inputs; a check
//! passes when that residual is at most its tolerance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use willmore4::analysis::{self, Flavor, FormFieldFlat};
use willmore4::error::Result;
use willmore4::forms::{exterior_d, hodge_star, FormMetric, MultivectorForm};
use willmore4::geometry::{frame, MetricField};
use willmore4::immersions::{by_id, random_points, random_polynomial, ImmersionSpec};
use willmore4::intrinsic::{
    bach_tensor, intrinsic_frame, paneitz_covariance_residual, q_curvature, round_sphere_metric, PaneitzSign,
};
use willmore4::jets::{multi_indices, polynomial_jet, Jet};
use willmore4::variational::{identity_report, tangential_part, willmore_operator, IDENTITIES};

pub struct Check {
    pub name: &'static str,
    pub module: &'static str,
    pub tolerance: f64,
    run: Box<dyn Fn(u64, usize) -> Result<f64>>,
}

pub struct Outcome {
    pub name: &'static str,
    pub module: &'static str,
    pub tolerance: f64,
    pub max_residual: f64,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.max_residual <= self.tolerance
    }

    pub fn record(&self) -> String {
        format!(
            "record=identity name={} module={} max_residual={:.3e} tolerance={:.1e} status={}",
            self.name,
            self.module,
            self.max_residual,
            self.tolerance,
            if self.passed() { "pass" } else { "fail" }
        )
    }
}

impl Check {
    pub fn run(&self, seed: u64, points: usize) -> Result<Outcome> {
        Ok(Outcome {
            name: self.name,
            module: self.module,
            tolerance: self.tolerance,
            max_residual: (self.run)(seed, points)?,
        })
    }
}

/// All checks in suite order.
pub fn checks() -> Vec<Check> {
    let mut out = vec![
        Check {
            name: "double_star",
            module: "forms",
            tolerance: 1e-12,
            run: Box::new(double_star),
        },
        Check {
            name: "d_squared",
            module: "forms",
            tolerance: 1e-10,
            run: Box::new(d_squared),
        },
    ];
    out.extend(IDENTITIES.iter().map(|&name| Check {
        name,
        module: "variational",
        tolerance: 1e-8,
        run: Box::new(move |seed, points| polynomial_identity(name, seed, points)),
    }));
    out.extend([
        Check {
            name: "el_normal",
            module: "variational",
            tolerance: 1e-8,
            run: Box::new(el_normal),
        },
        Check {
            name: "q_sphere",
            module: "intrinsic",
            tolerance: 1e-8,
            run: Box::new(q_sphere),
        },
        Check {
            name: "weyl_conformally_flat",
            module: "intrinsic",
            tolerance: 1e-10,
            run: Box::new(weyl_conformally_flat),
        },
        Check {
            name: "bach_conformally_flat",
            module: "intrinsic",
            tolerance: 1e-8,
            run: Box::new(bach_conformally_flat),
        },
        Check {
            name: "paneitz_covariance",
            module: "intrinsic",
            tolerance: 1e-7,
            run: Box::new(paneitz_covariance),
        },
        Check {
            name: "lorentz_lp",
            module: "analysis",
            tolerance: 1e-12,
            run: Box::new(lorentz_lp),
        },
        Check {
            name: "hodge_reconstruction",
            module: "analysis",
            tolerance: 1e-12,
            run: Box::new(hodge_reconstruction),
        },
        Check {
            name: "hodge_orthogonality",
            module: "analysis",
            tolerance: 1e-10,
            run: Box::new(hodge_orthogonality),
        },
    ]);
    out
}

fn rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ salt)
}

fn random_spd(rng: &mut ChaCha8Rng) -> [[f64; 4]; 4] {
    let a: [[f64; 4]; 4] = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-0.5..0.5)));
    std::array::from_fn(|i| {
        std::array::from_fn(|j| (0..4).map(|k| a[i][k] * a[j][k]).sum::<f64>() + if i == j { 1.0 } else { 0.0 })
    })
}

fn random_cubic(rng: &mut ChaCha8Rng, x: [f64; 4], order: usize) -> Jet {
    let terms: Vec<_> = multi_indices(3).iter().map(|&a| (a, rng.gen_range(-1.0..1.0))).collect();
    polynomial_jet(&terms, x, order)
}

fn double_star(seed: u64, _: usize) -> Result<f64> {
    let mut rng = rng(seed, 1);
    let mut worst: f64 = 0.0;
    for _ in 0..4 {
        let met = FormMetric::constant(random_spd(&mut rng))?;
        for p in 0..=4usize {
            let a = MultivectorForm::from_fn(p, 1, 5, |_, _| Jet::constant(0, rng.gen_range(-1.0..1.0)));
            let ss = hodge_star(&hodge_star(&a, &met)?, &met)?;
            let sign = if (p * (4 - p)) % 2 == 0 { 1.0 } else { -1.0 };
            for (x, y) in ss.comps.iter().zip(&a.comps) {
                worst = worst.max((x.value() - sign * y.value()).abs());
            }
        }
    }
    Ok(worst)
}

fn d_squared(seed: u64, _: usize) -> Result<f64> {
    let mut rng = rng(seed, 2);
    let mut worst: f64 = 0.0;
    for x in random_points(seed, 3, 0.5) {
        for p in 0..=2usize {
            let a = MultivectorForm::from_fn(p, 1, 5, |_, _| random_cubic(&mut rng, x, 4));
            let dd = exterior_d(&exterior_d(&a)?)?;
            worst = dd.comps.iter().map(Jet::max_abs).fold(worst, f64::max);
        }
    }
    Ok(worst)
}

fn polynomial_identity(name: &str, seed: u64, points: usize) -> Result<f64> {
    let (_, chart) = by_id("poly", seed)?;
    let spec = ImmersionSpec::new(random_polynomial(seed), chart)?;
    let r = identity_report(&spec, &[name], points)?;
    Ok(r[0].max_residual)
}

fn el_normal(seed: u64, points: usize) -> Result<f64> {
    let imm = random_polynomial(seed);
    let mut worst: f64 = 0.0;
    for x in random_points(seed, points.clamp(1, 4), 0.3) {
        let p = imm.point(x, 6)?;
        let el = willmore_operator(&p)?;
        let t = tangential_part(&frame(&p.truncated(3))?, &el.w);
        let tn = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(tn / el.norm().max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

fn q_sphere(seed: u64, _: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for b in random_points(seed, 4, 0.8) {
        worst = worst.max((q_curvature(&round_sphere_metric(b, 4))? - 6.0).abs());
    }
    Ok(worst)
}

/// A smooth conformal factor with seeded coefficients.
fn conformal_factor(rng: &mut ChaCha8Rng, b: [f64; 4], order: usize) -> Jet {
    let x: [Jet; 4] = std::array::from_fn(|i| Jet::variable(order, i, b[i]));
    let a: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-0.3..0.3));
    let s = &x[0].sin().scale(a[0]) + &(&x[1] * &x[2]).scale(a[1]);
    &s + &(&x[3].cos() * &x[0]).scale(a[2])
}

fn conformally_flat(seed: u64, salt: u64) -> Vec<MetricField> {
    let mut rng = rng(seed, salt);
    random_points(seed + salt, 3, 0.5)
        .into_iter()
        .map(|b| MetricField::flat(b, 4).conformal(&conformal_factor(&mut rng, b, 4)))
        .collect()
}

fn weyl_conformally_flat(seed: u64, _: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for g in conformally_flat(seed, 3) {
        let f = intrinsic_frame(&g)?;
        worst = f.weyl.iter().map(|w| w.value().abs()).fold(worst, f64::max);
    }
    Ok(worst)
}

fn bach_conformally_flat(seed: u64, _: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for g in conformally_flat(seed, 4) {
        worst = worst.max(bach_tensor(&g)?.norm);
    }
    for b in random_points(seed, 2, 0.8) {
        worst = worst.max(bach_tensor(&round_sphere_metric(b, 4))?.norm);
    }
    Ok(worst)
}

fn paneitz_covariance(seed: u64, _: usize) -> Result<f64> {
    let mut rng = rng(seed, 5);
    let mut worst: f64 = 0.0;
    for b in random_points(seed + 5, 3, 0.5) {
        let lam = conformal_factor(&mut rng, b, 4);
        // a cubic alone has vanishing bi-Laplacian on the flat base
        let u = random_cubic(&mut rng, b, 4).scale(0.5).exp();
        let g0 = MetricField::flat(b, 4);
        for sign in [PaneitzSign::Literal, PaneitzSign::Positive] {
            worst = worst.max(paneitz_covariance_residual(&g0, &lam, &u, sign)?);
        }
    }
    Ok(worst)
}

fn lorentz_lp(seed: u64, _: usize) -> Result<f64> {
    let f = analysis::random_smooth(seed, 8)?;
    let mut worst: f64 = 0.0;
    for p in [1.5, 2.0, 3.0] {
        let lp = f.lp_norm(p);
        let l = analysis::lorentz_norm(&f, p, p, Flavor::Star)?;
        worst = worst.max((l - lp).abs() / lp);
    }
    Ok(worst)
}

fn random_two_form(seed: u64) -> Result<FormFieldFlat> {
    let fields: Vec<_> = (0..6)
        .map(|c| analysis::random_smooth(seed.wrapping_mul(7).wrapping_add(c), 8))
        .collect::<Result<_>>()?;
    let masks = willmore4::forms::subsets(4, 2);
    FormFieldFlat::from_fn(2, 1, [8; 4], [1.0; 4], |mask, _, x| {
        let c = masks.iter().position(|&m| m == mask).unwrap_or(0);
        let h = 1.0 / 8.0;
        let i: [usize; 4] = std::array::from_fn(|a| ((x[a] / h) as usize).min(7));
        fields[c].values[((i[0] * 8 + i[1]) * 8 + i[2]) * 8 + i[3]]
    })
}

const IDENTITY: [[f64; 4]; 4] = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

fn hodge_reconstruction(seed: u64, _: usize) -> Result<f64> {
    let a = random_two_form(seed)?;
    let h = analysis::hodge_decompose_flat(&a, &IDENTITY)?;
    let sum = h.exact.add(&h.coexact)?.add(&h.harmonic)?;
    Ok(sum.sub(&a)?.max_abs() / a.max_abs())
}

fn hodge_orthogonality(seed: u64, _: usize) -> Result<f64> {
    let a = random_two_form(seed)?;
    let h = analysis::hodge_decompose_flat(&a, &IDENTITY)?;
    let n2 = a.l2_norm().powi(2);
    let parts = [&h.exact, &h.coexact, &h.harmonic];
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in i + 1..3 {
            worst = worst.max(parts[i].l2_inner(parts[j])?.abs() / n2);
        }
    }
    Ok(worst)
}
