//! Built-in immersions, ambient conformal maps and immersion specs.
//!
//! An immersion is a map acting on the four coordinate jets of a point, so
//! its components come out as jets of whatever order the caller requests.

use crate::error::{Error, Result};
use crate::geometry::ImmersionPoint;
use crate::jets::{dot, Jet, MultiIndex, NVARS};
use crate::quadrature::Chart;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

type JetMap = dyn Fn(&[Jet; NVARS]) -> Result<Vec<Jet>> + Send + Sync;

/// A smooth map `Ω⁴ → ℝᵐ` evaluated on coordinate jets.
#[derive(Clone)]
pub struct Immersion {
    id: String,
    ambient_dim: usize,
    map: Arc<JetMap>,
}

impl std::fmt::Debug for Immersion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Immersion({}, m={})", self.id, self.ambient_dim)
    }
}

impl Immersion {
    pub fn new<F>(id: impl Into<String>, ambient_dim: usize, map: F) -> Self
    where
        F: Fn(&[Jet; NVARS]) -> Result<Vec<Jet>> + Send + Sync + 'static,
    {
        Immersion {
            id: id.into(),
            ambient_dim,
            map: Arc::new(map),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Apply the map to arbitrary coordinate jets.
    pub fn eval(&self, x: &[Jet; NVARS]) -> Result<Vec<Jet>> {
        let out = (self.map)(x)?;
        if out.len() != self.ambient_dim {
            return Err(Error::InvalidInput(format!(
                "{} produced {} components, expected {}",
                self.id,
                out.len(),
                self.ambient_dim
            )));
        }
        Ok(out)
    }

    /// Components as jets of the given order at a chart point.
    pub fn jets(&self, x: [f64; NVARS], order: usize) -> Result<Vec<Jet>> {
        let vars: [Jet; NVARS] = std::array::from_fn(|d| Jet::variable(order, d, x[d]));
        self.eval(&vars)
    }

    pub fn point(&self, x: [f64; NVARS], order: usize) -> Result<ImmersionPoint> {
        ImmersionPoint::new(x, self.jets(x, order)?)
    }

    pub fn value(&self, x: [f64; NVARS]) -> Result<Vec<f64>> {
        Ok(self.jets(x, 0)?.iter().map(|j| j.value()).collect())
    }

    /// `σ ∘ Φ` for an ambient conformal map `σ`.
    pub fn transformed(&self, t: &Conformal) -> Immersion {
        let inner = self.clone();
        let t2 = t.clone();
        Immersion::new(
            format!("{}|{}", self.id, t.id()),
            self.ambient_dim,
            move |x| t2.apply(&inner.eval(x)?),
        )
    }

    /// `Φ + s·φ` for a vector field `φ` with the same ambient dimension.
    pub fn plus_scaled(&self, s: f64, field: &Immersion) -> Result<Immersion> {
        if field.ambient_dim != self.ambient_dim {
            return Err(Error::InvalidInput("ambient dimensions differ".into()));
        }
        let a = self.clone();
        let b = field.clone();
        Ok(Immersion::new(
            format!("{}+({s})*{}", self.id, field.id),
            self.ambient_dim,
            move |x| {
                let u = a.eval(x)?;
                let v = b.eval(x)?;
                Ok(u.iter()
                    .zip(&v)
                    .map(|(p, q)| {
                        let mut r = p.clone();
                        r.add_scaled(s, q);
                        r
                    })
                    .collect())
            },
        ))
    }

    /// `λΦ`.
    pub fn scaled(&self, lambda: f64) -> Immersion {
        self.transformed(&Conformal::Dilation(lambda))
    }
}

/// Flat 4-plane `x ↦ (x, 0)` in `ℝᵐ`.
pub fn plane(m: usize) -> Immersion {
    Immersion::new("plane", m, move |x| {
        let order = x[0].order();
        let mut v: Vec<Jet> = x.to_vec();
        v.resize(m, Jet::zero(order));
        Ok(v)
    })
}

/// Product of four circles of the given radii in `ℝ⁸`.
pub fn product_torus(radii: [f64; 4]) -> Immersion {
    let id = if radii == [1.0; 4] {
        "clifford4".to_string()
    } else {
        format!("torus{:?}", radii)
    };
    Immersion::new(id, 8, move |x| {
        let mut v = Vec::with_capacity(8);
        for a in 0..4 {
            v.push(x[a].cos().scale(radii[a]));
            v.push(x[a].sin().scale(radii[a]));
        }
        Ok(v)
    })
}

/// `Φ = (cos x¹, sin x¹, …, cos x⁴, sin x⁴)`.
pub fn clifford4() -> Immersion {
    product_torus([1.0; 4])
}

/// Product torus whose first circle radius is modulated by the second angle:
/// `r₁(x²) = R₁ (1 + ε cos x²)`.
pub fn warped_torus(radii: [f64; 4], eps: f64) -> Immersion {
    Immersion::new(format!("warped{:?}/{eps}", radii), 8, move |x| {
        let mut v = Vec::with_capacity(8);
        let r1 = (&x[1].cos().scale(eps) + &Jet::constant(x[1].order(), 1.0)).scale(radii[0]);
        v.push(&r1 * &x[0].cos());
        v.push(&r1 * &x[0].sin());
        for a in 1..4 {
            v.push(x[a].cos().scale(radii[a]));
            v.push(x[a].sin().scale(radii[a]));
        }
        Ok(v)
    })
}

/// Inverse stereographic projection onto the unit `S⁴ ⊂ ℝ⁵`:
/// `x ↦ (2x, |x|² − 1) / (1 + |x|²)`.
pub fn sphere() -> Immersion {
    Immersion::new("sphere", 5, |x| {
        let order = x[0].order();
        let r2 = dot(x, x);
        let one = Jet::constant(order, 1.0);
        let inv = (&one + &r2).recip()?;
        let mut v: Vec<Jet> = x.iter().map(|c| (c * &inv).scale(2.0)).collect();
        v.push(&(&r2 - &one) * &inv);
        Ok(v)
    })
}

/// Product of two catenoids in `ℝ³ × ℝ³`; minimal, hence `H ≡ 0`.
pub fn catenoid_product() -> Immersion {
    Immersion::new("catenoid2", 6, |x| {
        let mut v = Vec::with_capacity(6);
        for pair in [(0, 1), (2, 3)] {
            let (u, w) = (&x[pair.0], &x[pair.1]);
            let ch = (&w.exp() + &w.scale(-1.0).exp()).scale(0.5);
            v.push(&ch * &u.cos());
            v.push(&ch * &u.sin());
            v.push(w.clone());
        }
        Ok(v)
    })
}

/// A graph `x ↦ (x, p₅(x), …, p_m(x))` with polynomial heights.
#[derive(Clone, Debug)]
pub struct PolynomialGraph {
    pub heights: Vec<Vec<(MultiIndex, f64)>>,
}

impl PolynomialGraph {
    /// Random quadratic-plus-cubic heights with coefficients uniform in
    /// `[−amp, amp]`.
    pub fn random(seed: u64, m: usize, degree: usize, amp: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let monomials: Vec<MultiIndex> = crate::jets::multi_indices(degree)
            .iter()
            .copied()
            .filter(|a| a.order() >= 2)
            .collect();
        let heights = (4..m)
            .map(|_| {
                monomials
                    .iter()
                    .map(|&a| (a, rng.gen_range(-amp..=amp)))
                    .collect()
            })
            .collect();
        PolynomialGraph { heights }
    }

    pub fn immersion(&self, id: impl Into<String>) -> Immersion {
        let heights = self.heights.clone();
        let m = 4 + heights.len();
        Immersion::new(id, m, move |x| {
            let mut v: Vec<Jet> = x.to_vec();
            for terms in &heights {
                v.push(eval_polynomial(terms, x));
            }
            Ok(v)
        })
    }
}

fn eval_polynomial(terms: &[(MultiIndex, f64)], x: &[Jet; NVARS]) -> Jet {
    let order = x[0].order();
    let mut acc = Jet::zero(order);
    for (alpha, c) in terms {
        let mut mono = Jet::constant(order, *c);
        for d in 0..NVARS {
            for _ in 0..alpha.0[d] {
                mono = &mono * &x[d];
            }
        }
        acc += &mono;
    }
    acc
}

/// Random polynomial immersion of degree ≤ 3 in `ℝ⁶`: graph part plus a
/// small random linear mixing so that no coordinate is distinguished.
pub fn random_polynomial(seed: u64) -> Immersion {
    random_polynomial_in(seed, 6)
}

pub fn random_polynomial_in(seed: u64, m: usize) -> Immersion {
    let graph = PolynomialGraph::random(seed, m, 3, 0.5);
    let rot = random_rotation(seed ^ 0x9e37_79b9_7f4a_7c15, m);
    graph
        .immersion(format!("poly{seed}"))
        .transformed(&Conformal::Linear(rot))
}

/// Random sample points in `[−r, r]⁴`.
pub fn random_points(seed: u64, count: usize, r: f64) -> Vec<[f64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| std::array::from_fn(|_| rng.gen_range(-r..=r)))
        .collect()
}

/// Random orthogonal `m×m` matrix (Gram–Schmidt on a Gaussian-like sample).
pub fn random_rotation(seed: u64, m: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(m);
    while q.len() < m {
        let mut v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..2 {
            for u in &q {
                let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                for (a, b) in v.iter_mut().zip(u) {
                    *a -= d * b;
                }
            }
        }
        let n: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-3 {
            q.push(v.into_iter().map(|a| a / n).collect());
        }
    }
    q
}

/// Givens rotation by `angle` in the ambient `(i, j)` plane.
pub fn givens(m: usize, i: usize, j: usize, angle: f64) -> Vec<Vec<f64>> {
    let mut r: Vec<Vec<f64>> = (0..m)
        .map(|a| (0..m).map(|b| if a == b { 1.0 } else { 0.0 }).collect())
        .collect();
    let (s, c) = angle.sin_cos();
    r[i][i] = c;
    r[j][j] = c;
    r[i][j] = -s;
    r[j][i] = s;
    r
}

/// Ambient conformal maps of `ℝᵐ`.
#[derive(Clone, Debug, PartialEq)]
pub enum Conformal {
    Translation(Vec<f64>),
    /// Orthogonal matrix, applied as `y ↦ R y`.
    Linear(Vec<Vec<f64>>),
    Dilation(f64),
    /// `y ↦ c + ρ² (y − c) / |y − c|²`.
    Inversion { center: Vec<f64>, radius: f64 },
}

impl Conformal {
    pub fn id(&self) -> String {
        match self {
            Conformal::Translation(_) => "translate".into(),
            Conformal::Linear(_) => "rotate".into(),
            Conformal::Dilation(s) => format!("dilate{s}"),
            Conformal::Inversion { radius, .. } => format!("invert{radius}"),
        }
    }

    pub fn apply(&self, y: &[Jet]) -> Result<Vec<Jet>> {
        let m = y.len();
        match self {
            Conformal::Translation(t) => {
                check_len(t.len(), m)?;
                Ok(y.iter()
                    .zip(t)
                    .map(|(c, s)| c + &Jet::constant(c.order(), *s))
                    .collect())
            }
            Conformal::Linear(r) => {
                check_len(r.len(), m)?;
                Ok((0..m)
                    .map(|a| {
                        let mut acc = Jet::zero(y[0].order());
                        for b in 0..m {
                            acc.add_scaled(r[a][b], &y[b]);
                        }
                        acc
                    })
                    .collect())
            }
            Conformal::Dilation(s) => Ok(y.iter().map(|c| c.scale(*s)).collect()),
            Conformal::Inversion { center, radius } => {
                check_len(center.len(), m)?;
                let d: Vec<Jet> = y
                    .iter()
                    .zip(center)
                    .map(|(c, s)| c - &Jet::constant(c.order(), *s))
                    .collect();
                let r2 = dot(&d, &d);
                if r2.value() == 0.0 {
                    return Err(Error::RejectedTransform(
                        "point coincides with inversion center".into(),
                    ));
                }
                let f = r2.recip()?.scale(radius * radius);
                Ok(d.iter()
                    .zip(center)
                    .map(|(c, s)| &(c * &f) + &Jet::constant(c.order(), *s))
                    .collect())
            }
        }
    }

    pub fn apply_point(&self, y: &[f64]) -> Result<Vec<f64>> {
        let jets: Vec<Jet> = y.iter().map(|&v| Jet::constant(0, v)).collect();
        Ok(self.apply(&jets)?.iter().map(|j| j.value()).collect())
    }
}

fn check_len(got: usize, m: usize) -> Result<()> {
    if got != m {
        return Err(Error::InvalidInput(format!(
            "transform dimension {got} does not match ambient dimension {m}"
        )));
    }
    Ok(())
}

/// An immersion together with the chart and quadrature it is integrated on.
#[derive(Clone, Debug)]
pub struct ImmersionSpec {
    pub immersion: Immersion,
    pub chart: Chart,
}

impl ImmersionSpec {
    pub fn new(immersion: Immersion, chart: Chart) -> Result<Self> {
        chart.validate()?;
        Ok(ImmersionSpec { immersion, chart })
    }

    pub fn with_immersion(&self, immersion: Immersion) -> ImmersionSpec {
        ImmersionSpec {
            immersion,
            chart: self.chart.clone(),
        }
    }
}

/// Catalog lookup used by the command line front end.
pub fn by_id(id: &str, seed: u64) -> Result<(Immersion, Chart)> {
    match id {
        "plane" => Ok((
            plane(5),
            Chart::Box {
                lo: [-1.0; 4],
                hi: [1.0; 4],
                n: [8; 4],
            },
        )),
        "clifford4" => Ok((clifford4(), Chart::periodic(16))),
        "sphere" => Ok((sphere(), Chart::sphere(16))),
        "catenoid2" => Ok((
            catenoid_product(),
            Chart::Box {
                lo: [0.0, -1.0, 0.0, -1.0],
                hi: [2.0 * std::f64::consts::PI, 1.0, 2.0 * std::f64::consts::PI, 1.0],
                n: [8; 4],
            },
        )),
        "poly" | "random" => Ok((
            random_polynomial(seed),
            Chart::Box {
                lo: [-0.5; 4],
                hi: [0.5; 4],
                n: [8; 4],
            },
        )),
        other => Err(Error::InvalidInput(format!("unknown immersion id `{other}`"))),
    }
}

pub const CATALOG: &[&str] = &["plane", "clifford4", "sphere", "catenoid2", "poly"];
