//! Gradient descent of `E = E_A + Σ βᵢ E₀ᵢ` over Fourier-parameterized
//! immersions of the 4-torus.
//!
//! A [`FourierImmersion`] is a base immersion plus a perturbation whose `m`
//! components are real trigonometric polynomials with every frequency in
//! `[−F, F]`. Coefficients are stored component by component; within one
//! component the wave vectors `k` run in lexicographic order over the half
//! space (first nonzero entry positive, preceded by `k = 0`), each with a
//! cosine coefficient followed by a sine coefficient (`k = 0` has only the
//! cosine).
//!
//! Coefficient file format (plain text, `#` starts a comment line):
//!
//! ```text
//! # base=clifford4
//! 8 2
//! 0.0
//! 0.013
//! ...
//! ```
//!
//! The first non-comment line holds `m F`; every following line holds one
//! coefficient in storage order. The optional `# base=<id>` comment names
//! the catalog base immersion (default `clifford4`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energies::{density_with_floor, Density, PointDerivs, TRIPLES};
use crate::error::{Error, Result};
use crate::geometry::PAIRS;
use crate::immersions::{by_id, Conformal, Immersion};
use crate::jets::{Jet, NVARS};
use crate::quadrature::{pairwise_sum, Chart};
use crate::variational::pairing;

/// Relative Gram-determinant floor below which an evaluation node counts as
/// degenerate.
pub const GRAM_FLOOR: f64 = 1e-8;

/// One real Fourier mode `cos(k·x)` or `sin(k·x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mode {
    pub k: [i32; 4],
    pub sine: bool,
}

/// The real modes of band `F` in storage order.
pub fn band_modes(band: usize) -> Vec<Mode> {
    let f = band as i32;
    let mut out = vec![Mode { k: [0; 4], sine: false }];
    for a in -f..=f {
        for b in -f..=f {
            for c in -f..=f {
                for d in -f..=f {
                    let k = [a, b, c, d];
                    if k.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0) {
                        out.push(Mode { k, sine: false });
                        out.push(Mode { k, sine: true });
                    }
                }
            }
        }
    }
    out
}

impl Mode {
    /// Value and derivatives up to order three at `x`, in the layout of
    /// [`PointDerivs`] for a single component: `[v, d1(4), d2(10), d3(20)]`.
    fn derivs(&self, x: [f64; 4]) -> [f64; 35] {
        let k: [f64; 4] = std::array::from_fn(|i| self.k[i] as f64);
        let phase: f64 = (0..4).map(|i| k[i] * x[i]).sum();
        let (s, c) = phase.sin_cos();
        // derivatives of cos cycle through (c, −s, −c, s), of sin through (s, c, −s, −c)
        let cyc = if self.sine { [s, c, -s, -c] } else { [c, -s, -c, s] };
        let mut out = [0.0; 35];
        out[0] = cyc[0];
        for i in 0..4 {
            out[1 + i] = k[i] * cyc[1];
        }
        for (q, &(i, j)) in PAIRS.iter().enumerate() {
            out[5 + q] = k[i] * k[j] * cyc[2];
        }
        for (q, &(i, j, l)) in TRIPLES.iter().enumerate() {
            out[15 + q] = k[i] * k[j] * k[l] * cyc[3];
        }
        out
    }

    fn jet(&self, x: &[Jet; NVARS]) -> Jet {
        let order = x[0].order();
        let mut phase = Jet::constant(order, 0.0);
        for i in 0..4 {
            if self.k[i] != 0 {
                phase += &x[i].scale(self.k[i] as f64);
            }
        }
        if self.sine {
            phase.sin()
        } else {
            phase.cos()
        }
    }
}

/// Base immersion plus a band-limited trigonometric perturbation.
#[derive(Clone, Debug)]
pub struct FourierImmersion {
    pub base_id: String,
    pub base: Immersion,
    pub m: usize,
    pub band: usize,
    pub coeffs: Vec<f64>,
}

impl FourierImmersion {
    /// Zero perturbation of a catalog immersion.
    pub fn new(base_id: &str, band: usize) -> Result<Self> {
        if band == 0 || band > 4 {
            return Err(Error::OutOfRange(format!("band {band} outside 1..=4")));
        }
        let (base, _) = by_id(base_id, 0)?;
        let m = base.ambient_dim();
        Ok(FourierImmersion {
            base_id: base_id.to_string(),
            base,
            m,
            band,
            coeffs: vec![0.0; m * band_modes(band).len()],
        })
    }

    pub fn modes_per_component(&self) -> usize {
        band_modes(self.band).len()
    }

    /// `(component, mode)` of a storage index.
    pub fn locate(&self, index: usize) -> (usize, Mode) {
        let modes = band_modes(self.band);
        (index / modes.len(), modes[index % modes.len()])
    }

    pub fn index_of(&self, component: usize, mode: Mode) -> Option<usize> {
        let modes = band_modes(self.band);
        let pos = modes.iter().position(|m| *m == mode)?;
        (component < self.m).then_some(component * modes.len() + pos)
    }

    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != self.coeffs.len() {
            return Err(Error::InvalidInput(format!(
                "{} coefficients for a family of {}",
                coeffs.len(),
                self.coeffs.len()
            )));
        }
        Ok(FourierImmersion {
            coeffs,
            ..self.clone()
        })
    }

    /// Indices of the nonzero coefficients.
    pub fn support(&self) -> Vec<usize> {
        (0..self.coeffs.len()).filter(|&j| self.coeffs[j] != 0.0).collect()
    }

    /// The perturbation alone, as a jet-evaluable map.
    pub fn perturbation(&self) -> Immersion {
        let modes = band_modes(self.band);
        let m = self.m;
        let terms: Vec<(usize, Mode, f64)> = self
            .support()
            .into_iter()
            .map(|j| (j / modes.len(), modes[j % modes.len()], self.coeffs[j]))
            .collect();
        Immersion::new(format!("fourier-perturbation/F{}", self.band), m, move |x| {
            let order = x[0].order();
            let mut v = vec![Jet::constant(order, 0.0); m];
            for (c, mode, a) in &terms {
                v[*c] += &mode.jet(x).scale(*a);
            }
            Ok(v)
        })
    }

    /// Base plus perturbation, as a jet-evaluable map.
    pub fn immersion(&self) -> Immersion {
        let base = self.base.clone();
        let pert = self.perturbation();
        Immersion::new(format!("{}+fourier/F{}", self.base_id, self.band), self.m, move |x| {
            let a = base.eval(x)?;
            let b = pert.eval(x)?;
            Ok(a.iter().zip(&b).map(|(u, v)| u + v).collect())
        })
    }

    /// The same family after `y ↦ R y` on the base and on every coefficient.
    pub fn rotated(&self, r: &[Vec<f64>]) -> Result<Self> {
        if r.len() != self.m || r.iter().any(|row| row.len() != self.m) {
            return Err(Error::InvalidInput("rotation size differs from m".into()));
        }
        let per = self.modes_per_component();
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for a in 0..self.m {
            for b in 0..self.m {
                for q in 0..per {
                    coeffs[a * per + q] += r[a][b] * self.coeffs[b * per + q];
                }
            }
        }
        let base = self.base.transformed(&Conformal::Linear(r.to_vec()));
        Ok(FourierImmersion {
            base,
            base_id: format!("{}/rotated", self.base_id),
            coeffs,
            ..self.clone()
        })
    }

    pub fn write_coefficients(&self) -> String {
        let mut s = format!("# base={}\n{} {}\n", self.base_id, self.m, self.band);
        for c in &self.coeffs {
            s.push_str(&format!("{c:.17e}\n"));
        }
        s
    }

    pub fn read_coefficients(text: &str) -> Result<Self> {
        let mut base_id = "clifford4".to_string();
        let mut lines = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(id) = comment.trim().strip_prefix("base=") {
                    base_id = id.trim().to_string();
                }
            } else {
                lines.push(line);
            }
        }
        let bad = |msg: String| Error::InvalidInput(format!("coefficient file: {msg}"));
        let header = lines.first().ok_or_else(|| bad("missing `m F` header".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let [m, band] = parts[..] else {
            return Err(bad(format!("header `{header}` is not `m F`")));
        };
        let m: usize = m.parse().map_err(|_| bad(format!("bad m `{m}`")))?;
        let band: usize = band.parse().map_err(|_| bad(format!("bad F `{band}`")))?;
        let fam = FourierImmersion::new(&base_id, band)?;
        if fam.m != m {
            return Err(bad(format!("m = {m} but base `{base_id}` lives in ℝ^{}", fam.m)));
        }
        let coeffs = lines[1..]
            .iter()
            .map(|l| l.parse::<f64>().map_err(|_| bad(format!("bad coefficient `{l}`"))))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(c) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(bad(format!("non-finite coefficient {c}")));
        }
        fam.with_coeffs(coeffs)
    }
}

/// The Clifford torus plus `count` seeded random modes of band `F`, scaled
/// so that the coefficient magnitudes sum to `amplitude` (a pointwise bound
/// on the perturbation). Constant modes are skipped.
pub fn clifford_with_noise(band: usize, amplitude: f64, count: usize, seed: u64) -> Result<FourierImmersion> {
    let mut fam = FourierImmersion::new("clifford4", band)?;
    let per = fam.modes_per_component();
    let total = fam.coeffs.len();
    if count == 0 || count > total - fam.m {
        return Err(Error::OutOfRange(format!("noise mode count {count}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(count);
    while chosen.len() < count {
        let j = rng.gen_range(0..total);
        if j % per != 0 && !chosen.contains(&j) {
            chosen.push(j);
        }
    }
    let raw: Vec<f64> = chosen.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm: f64 = raw.iter().map(|v: &f64| v.abs()).sum();
    for (j, v) in chosen.iter().zip(&raw) {
        fam.coeffs[*j] = amplitude * v / norm;
    }
    Ok(fam)
}

/// Objective value, or the barrier sentinel when the family degenerates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Objective {
    Value(f64),
    /// `+∞`: the node where the Gram determinant fell below the floor.
    Barrier { node: usize, gram_det: f64 },
}

impl Objective {
    pub fn value(&self) -> f64 {
        match self {
            Objective::Value(v) => *v,
            Objective::Barrier { .. } => f64::INFINITY,
        }
    }
}

/// A Fourier family evaluated on a fixed chart, with cached base derivatives.
pub struct FlowProblem {
    pub family: FourierImmersion,
    pub chart: Chart,
    pub beta: [f64; 4],
    nodes: Vec<([f64; 4], f64)>,
    base: Vec<PointDerivs>,
}

fn add_mode(d: &mut PointDerivs, comp: usize, md: &[f64; 35], s: f64) {
    let m = d.m;
    for i in 0..4 {
        d.d1[i * m + comp] += s * md[1 + i];
    }
    for q in 0..10 {
        d.d2[q * m + comp] += s * md[5 + q];
    }
    for q in 0..20 {
        d.d3[q * m + comp] += s * md[15 + q];
    }
}

impl FlowProblem {
    pub fn new(family: FourierImmersion, chart: Chart, beta: [f64; 4]) -> Result<Self> {
        chart.validate()?;
        let nodes = chart.nodes();
        let base = nodes
            .iter()
            .map(|(x, _)| PointDerivs::from_point(&family.base.point(*x, 3)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(FlowProblem {
            family,
            chart,
            beta,
            nodes,
            base,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn check_len(&self, c: &[f64]) -> Result<()> {
        if c.len() != self.family.coeffs.len() {
            return Err(Error::InvalidInput(format!(
                "{} coefficients for a family of {}",
                c.len(),
                self.family.coeffs.len()
            )));
        }
        Ok(())
    }

    fn derivs_at(&self, node: usize, support: &[(usize, Mode, f64)]) -> PointDerivs {
        let mut d = self.base[node].clone();
        let x = self.nodes[node].0;
        for (comp, mode, a) in support {
            add_mode(&mut d, *comp, &mode.derivs(x), *a);
        }
        d
    }

    fn support_of(&self, c: &[f64]) -> Vec<(usize, Mode, f64)> {
        let modes = band_modes(self.family.band);
        (0..c.len())
            .filter(|&j| c[j] != 0.0)
            .map(|j| (j / modes.len(), modes[j % modes.len()], c[j]))
            .collect()
    }

    fn weighted(&self, d: &Density) -> f64 {
        d.volume * (d.ea + (0..4).map(|i| self.beta[i] * d.quartics[i]).sum::<f64>())
    }

    fn node_density(&self, node: usize, d: &PointDerivs) -> Result<std::result::Result<Density, f64>> {
        match density_with_floor(d, GRAM_FLOOR) {
            Ok(den) => {
                if !den.ea.is_finite() || den.quartics.iter().any(|q| !q.is_finite()) {
                    return Err(Error::PoisonedIntegrand {
                        node,
                        coords: self.nodes[node].0,
                    });
                }
                Ok(Ok(den))
            }
            Err(Error::NotImmersed { gram_det }) => Ok(Err(gram_det)),
            Err(e) => Err(e),
        }
    }

    /// `E_A + Σ βᵢ E₀ᵢ` on the chart quadrature.
    pub fn objective(&self, c: &[f64]) -> Result<Objective> {
        self.check_len(c)?;
        let support = self.support_of(c);
        let mut v = Vec::with_capacity(self.nodes.len());
        for node in 0..self.nodes.len() {
            let d = self.derivs_at(node, &support);
            match self.node_density(node, &d)? {
                Ok(den) => v.push(self.weighted(&den) * self.nodes[node].1),
                Err(gram_det) => return Ok(Objective::Barrier { node, gram_det }),
            }
        }
        Ok(Objective::Value(pairwise_sum(&v)))
    }

    /// Central differences in the coefficients listed in `active` (all other
    /// entries are zero), with step `h·max(1, |cⱼ|)`. Fails with
    /// [`Error::NotImmersed`] inside the barrier region. The difference is
    /// taken node by node and then summed, which equals the difference of
    /// the two objective values up to rounding.
    pub fn gradient(&self, c: &[f64], active: &[usize], h: f64) -> Result<Vec<f64>> {
        self.check_len(c)?;
        if !(h > 0.0) {
            return Err(Error::InvalidInput(format!("difference step {h}")));
        }
        let modes = band_modes(self.family.band);
        let per = modes.len();
        if let Some(&j) = active.iter().find(|&&j| j >= c.len()) {
            return Err(Error::InvalidInput(format!("active index {j} out of range")));
        }
        let support = self.support_of(c);
        let steps: Vec<f64> = active.iter().map(|&j| h * c[j].abs().max(1.0)).collect();
        let mut parts = vec![Vec::with_capacity(self.nodes.len()); active.len()];
        for node in 0..self.nodes.len() {
            let (x, w) = self.nodes[node];
            let mut d = self.derivs_at(node, &support);
            if let Err(gram_det) = self.node_density(node, &d)? {
                return Err(Error::NotImmersed { gram_det });
            }
            for (a, &j) in active.iter().enumerate() {
                let (comp, mode) = (j / per, modes[j % per]);
                let md = mode.derivs(x);
                let hj = steps[a];
                let side = |s: f64, d: &mut PointDerivs| -> Result<f64> {
                    add_mode(d, comp, &md, s);
                    let r = self.node_density(node, d);
                    add_mode(d, comp, &md, -s);
                    match r? {
                        Ok(den) => Ok(self.weighted(&den)),
                        Err(gram_det) => Err(Error::NotImmersed { gram_det }),
                    }
                };
                let plus = side(hj, &mut d)?;
                let minus = side(-hj, &mut d)?;
                parts[a].push(w * (plus - minus) / (2.0 * hj));
            }
        }
        let mut g = vec![0.0; c.len()];
        for (a, &j) in active.iter().enumerate() {
            g[j] = pairwise_sum(&parts[a]);
        }
        Ok(g)
    }

    /// `∫⟨W, φ_δc⟩` at the coefficients `c`, where `φ_δc` is the ambient
    /// variation induced by `δc` (`E_A` part only).
    pub fn el_pairing(&self, c: &[f64], dc: &[f64], weights: &[f64; 11]) -> Result<f64> {
        self.check_len(c)?;
        self.check_len(dc)?;
        let base = self.family.with_coeffs(c.to_vec())?.immersion();
        let var = self.family.with_coeffs(dc.to_vec())?.perturbation();
        pairing(&base, &var, &self.nodes, weights)
    }
}

/// Line-search and stopping parameters.
#[derive(Clone, Debug)]
pub struct FlowOptions {
    pub max_steps: usize,
    pub grad_tol: f64,
    /// Armijo sufficient-decrease fraction.
    pub armijo: f64,
    pub initial_step: f64,
    pub min_step: f64,
    /// Relative finite-difference step.
    pub fd_step: f64,
    /// Coefficients the descent moves; `None` means the support of the start.
    pub active: Option<Vec<usize>>,
    /// Energy below which the run counts as divergent.
    pub divergence_energy: f64,
    /// Largest coefficient magnitude before the run counts as divergent.
    pub divergence_coefficient: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            max_steps: 100,
            grad_tol: 1e-8,
            armijo: 1e-4,
            initial_step: 1.0,
            min_step: 1e-14,
            fd_step: 1e-4,
            active: None,
            divergence_energy: -1e6,
            divergence_coefficient: 1e3,
        }
    }
}

/// One accepted step of the descent.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowStep {
    pub step: usize,
    /// Energy after the step.
    pub energy: f64,
    /// Gradient norm before the step.
    pub grad_norm: f64,
    pub step_size: f64,
    /// Step sizes rejected before acceptance.
    pub backtracks: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// Gradient norm fell below the tolerance.
    Converged,
    MaxSteps,
    /// No step above the minimum size decreased the energy enough.
    Stalled,
    /// Energy or coefficients left the configured bounds.
    Diverged,
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxSteps => "max-steps",
            Termination::Stalled => "stalled",
            Termination::Diverged => "diverged",
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowTrace {
    pub initial_energy: f64,
    pub steps: Vec<FlowStep>,
    pub final_grad_norm: f64,
    pub termination: Termination,
    pub coeffs: Vec<f64>,
    pub active: Vec<usize>,
}

impl FlowTrace {
    pub fn records(&self) -> Vec<String> {
        let mut out = vec![format!(
            "record=flow step=0 energy={:.15e} active={}",
            self.initial_energy,
            self.active.len()
        )];
        for s in &self.steps {
            out.push(format!(
                "record=flow step={} energy={:.15e} grad_norm={:.6e} step_size={:.6e} backtracks={} outcome=accepted",
                s.step, s.energy, s.grad_norm, s.step_size, s.backtracks
            ));
        }
        out.push(format!(
            "record=flow_end steps={} energy={:.15e} grad_norm={:.6e} termination={}",
            self.steps.len(),
            self.steps.last().map_or(self.initial_energy, |s| s.energy),
            self.final_grad_norm,
            self.termination.label()
        ));
        out
    }

    /// Whether every accepted step lowered the energy.
    pub fn strictly_decreasing(&self) -> bool {
        let mut prev = self.initial_energy;
        self.steps.iter().all(|s| {
            let ok = s.energy < prev;
            prev = s.energy;
            ok
        })
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Backtracking gradient descent from `problem.family.coeffs`.
pub fn descend(problem: &FlowProblem, opts: &FlowOptions) -> Result<FlowTrace> {
    let mut c = problem.family.coeffs.clone();
    let active = opts.active.clone().unwrap_or_else(|| problem.family.support());
    let mut energy = match problem.objective(&c)? {
        Objective::Value(v) => v,
        Objective::Barrier { gram_det, .. } => return Err(Error::NotImmersed { gram_det }),
    };
    let initial_energy = energy;
    let mut steps = Vec::new();
    let mut alpha = opts.initial_step;
    let mut trial = c.clone();
    let termination = loop {
        let g = problem.gradient(&c, &active, opts.fd_step)?;
        let gn = norm(&g);
        if gn < opts.grad_tol {
            break (Termination::Converged, gn);
        }
        if steps.len() >= opts.max_steps {
            break (Termination::MaxSteps, gn);
        }
        let mut backtracks = 0;
        let accepted = loop {
            if alpha < opts.min_step {
                break None;
            }
            for &j in &active {
                trial[j] = c[j] - alpha * g[j];
            }
            match problem.objective(&trial)? {
                Objective::Value(e) if e <= energy - opts.armijo * alpha * gn * gn && e < energy => break Some(e),
                _ => {
                    alpha *= 0.5;
                    backtracks += 1;
                }
            }
        };
        let Some(e) = accepted else {
            break (Termination::Stalled, gn);
        };
        c.copy_from_slice(&trial);
        energy = e;
        steps.push(FlowStep {
            step: steps.len() + 1,
            energy: e,
            grad_norm: gn,
            step_size: alpha,
            backtracks,
        });
        if e < opts.divergence_energy || c.iter().any(|v| v.abs() > opts.divergence_coefficient) {
            break (Termination::Diverged, gn);
        }
        alpha = (2.0 * alpha).min(opts.initial_step);
    };
    Ok(FlowTrace {
        initial_energy,
        steps,
        final_grad_norm: termination.1,
        termination: termination.0,
        coeffs: c,
        active,
    })
}

/// Directional consistency of the finite-difference gradient with the
/// Euler–Lagrange operator: `⟨∇E, δc⟩` against `c_W ∫⟨W, φ_δc⟩` (`β = 0`).
#[derive(Clone, Debug)]
pub struct GradientCheck {
    pub directional: f64,
    pub pairing: f64,
    /// `directional / pairing`.
    pub ratio: f64,
}

pub fn gradient_check(problem: &FlowProblem, dc: &[f64], weights: &[f64; 11]) -> Result<GradientCheck> {
    if problem.beta != [0.0; 4] {
        return Err(Error::InvalidInput("the Euler–Lagrange check needs β = 0".into()));
    }
    let c = &problem.family.coeffs;
    let active: Vec<usize> = (0..dc.len()).filter(|&j| dc[j] != 0.0).collect();
    let g = problem.gradient(c, &active, 1e-4)?;
    let directional: f64 = active.iter().map(|&j| g[j] * dc[j]).sum();
    let p = problem.el_pairing(c, dc, weights)?;
    Ok(GradientCheck {
        directional,
        pairing: p,
        ratio: directional / p,
    })
}
