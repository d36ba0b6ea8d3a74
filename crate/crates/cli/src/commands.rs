//! Subcommand bodies. Each returns its records and an exit status.

use willmore4::analysis::{self, Flavor, FormFieldFlat, SampledFunction};
use willmore4::energies::{density, integrate_with, PointDerivs, DEFAULT_BETA};
use willmore4::error::Error;
use willmore4::flow::{clifford_with_noise, descend, FlowOptions, FlowProblem, FourierImmersion, Termination};
use willmore4::immersions::{by_id, ImmersionSpec, CATALOG};
use willmore4::quadrature::Chart;

use crate::config::{RunConfig, UsageError};
use crate::suite;

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_STALL: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

/// What a command produced.
pub struct Run {
    pub records: Vec<String>,
    pub status: i32,
    /// Message for stderr when `status != 0`.
    pub message: Option<String>,
}

impl Run {
    fn ok(records: Vec<String>) -> Self {
        Run {
            records,
            status: 0,
            message: None,
        }
    }
}

pub enum Failure {
    Usage(UsageError),
    Library(Error),
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Library(e)
    }
}

type Outcome = Result<Run, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(UsageError(msg.into()))
}

/// `β` as one value for all four quartic energies or four comma-separated values.
fn beta(cfg: &mut RunConfig) -> Result<[f64; 4], UsageError> {
    let raw = cfg.string("beta", &DEFAULT_BETA.to_string());
    let parts: Vec<f64> = raw
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| UsageError(format!("invalid value `{raw}` for --beta")))?;
    let out = match parts[..] {
        [b] => [b; 4],
        [a, b, c, d] => [a, b, c, d],
        _ => return Err(UsageError(format!("--beta takes 1 or 4 values, got {}", parts.len()))),
    };
    if out.iter().any(|b| !b.is_finite()) {
        return Err(UsageError(format!("non-finite --beta `{raw}`")));
    }
    cfg.resolve("beta", raw);
    Ok(out)
}

fn read_family(path: &str) -> Result<FourierImmersion, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {path}: {e}")))?;
    Ok(FourierImmersion::read_coefficients(&text)?)
}

fn with_resolution(chart: Chart, n: usize) -> Chart {
    match chart {
        Chart::PeriodicBox { .. } => Chart::PeriodicBox { n: [n; 4] },
        Chart::SphereChart { .. } => Chart::SphereChart { n: [n; 4] },
        Chart::Box { lo, hi, .. } => Chart::Box { lo, hi, n: [n; 4] },
    }
}

pub fn energy(cfg: &mut RunConfig) -> Outcome {
    let order = cfg.order(3)?;
    cfg.resolve("order", order);
    let beta = beta(cfg)?;
    let seed: u64 = cfg.parse("seed", 0)?;
    cfg.resolve("seed", seed);
    let spec = if let Some(path) = cfg.raw("coefficients").map(str::to_string) {
        if cfg.raw("immersion").is_some() {
            return Err(usage("--immersion and --coefficients are exclusive"));
        }
        let fam = read_family(&path)?;
        cfg.resolve("coefficients", fam.write_coefficients());
        let res = cfg.resolution(16)?;
        cfg.resolve("res", res);
        ImmersionSpec::new(fam.immersion(), Chart::periodic(res))?
    } else {
        let id = cfg.string("immersion", "clifford4");
        if !CATALOG.contains(&id.as_str()) {
            return Err(usage(format!("unknown immersion `{id}`; known: {}", CATALOG.join(", "))));
        }
        cfg.resolve("immersion", &id);
        let (imm, chart) = by_id(&id, seed)?;
        let chart = match cfg.raw("res") {
            Some(_) => {
                let res = cfg.resolution(16)?;
                with_resolution(chart, res)
            }
            None => chart,
        };
        ImmersionSpec::new(imm, chart)?
    };
    let report = integrate_with(&spec, beta, |x| density(&PointDerivs::from_point(&spec.immersion.point(x, order)?)?))?;
    Ok(Run::ok(report.records()))
}

pub fn verify(cfg: &mut RunConfig) -> Outcome {
    let seed: u64 = cfg.parse("seed", 0)?;
    cfg.resolve("seed", seed);
    let points: usize = cfg.parse("points", 20)?;
    if points == 0 {
        return Err(usage("--points must be positive"));
    }
    cfg.resolve("points", points);
    let all = suite::checks();
    let selected: Vec<&suite::Check> = match cfg.raw("only") {
        None => all.iter().collect(),
        Some(list) => {
            let mut out = Vec::new();
            for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let c = all.iter().find(|c| c.name == name).ok_or_else(|| {
                    let known: Vec<_> = all.iter().map(|c| c.name).collect();
                    usage(format!("unknown identity `{name}`; known: {}", known.join(", ")))
                })?;
                if !out.iter().any(|o: &&suite::Check| o.name == name) {
                    out.push(c);
                }
            }
            out
        }
    };
    if cfg.raw("inject-fault").is_some() {
        match cfg.string("inject-fault", "").as_str() {
            "hodge-sign" => willmore4::forms::set_hodge_sign_fault(true),
            other => return Err(usage(format!("unknown fault `{other}`"))),
        }
    }
    let mut records = Vec::new();
    let mut failed = Vec::new();
    for check in selected {
        let outcome = check.run(seed, points)?;
        if !outcome.passed() {
            failed.push(outcome.name);
        }
        records.push(outcome.record());
    }
    records.push(format!(
        "record=verify_end identities={} failed={} status={}",
        records.len(),
        if failed.is_empty() { "none".to_string() } else { failed.join(",") },
        if failed.is_empty() { "pass" } else { "fail" }
    ));
    let status = if failed.is_empty() { 0 } else { EXIT_FAILURE };
    Ok(Run {
        records,
        status,
        message: (!failed.is_empty()).then(|| format!("identity check failed: {}", failed.join(", "))),
    })
}

pub fn flow(cfg: &mut RunConfig) -> Outcome {
    let beta = match cfg.raw("beta") {
        None => [DEFAULT_BETA; 4],
        Some(_) => beta(cfg)?,
    };
    let steps: usize = cfg.parse("steps", 100)?;
    let res = cfg.resolution(8)?;
    let tol: f64 = cfg.parse("tol", FlowOptions::default().grad_tol)?;
    for (k, v) in [("steps", steps.to_string()), ("res", res.to_string()), ("tol", tol.to_string())] {
        cfg.resolve(k, v);
    }
    let family = if let Some(path) = cfg.raw("coefficients").map(str::to_string) {
        if cfg.raw("start").is_some() {
            return Err(usage("--start and --coefficients are exclusive"));
        }
        let fam = read_family(&path)?;
        cfg.resolve("coefficients", fam.write_coefficients());
        fam
    } else {
        let start = cfg.string("start", "clifford4+noise");
        let band: usize = cfg.parse("band", 2)?;
        cfg.resolve("start", &start);
        cfg.resolve("band", band);
        match start.strip_suffix("+noise") {
            Some("clifford4") => {
                let modes: usize = cfg.parse("noise-modes", 24)?;
                let amplitude: f64 = cfg.parse("amplitude", 0.05)?;
                let seed: u64 = cfg.parse("seed", 0)?;
                for (k, v) in [
                    ("noise-modes", modes.to_string()),
                    ("amplitude", amplitude.to_string()),
                    ("seed", seed.to_string()),
                ] {
                    cfg.resolve(k, v);
                }
                clifford_with_noise(band, amplitude, modes, seed)?
            }
            Some(other) => return Err(usage(format!("noise is only defined around clifford4, not `{other}`"))),
            None => {
                if !CATALOG.contains(&start.as_str()) {
                    return Err(usage(format!("unknown start `{start}`")));
                }
                FourierImmersion::new(&start, band)?
            }
        }
    };
    let problem = FlowProblem::new(family.clone(), Chart::periodic(res), beta)?;
    let opts = FlowOptions {
        max_steps: steps,
        grad_tol: tol,
        ..FlowOptions::default()
    };
    let trace = descend(&problem, &opts)?;
    if let Some(path) = cfg.raw("save") {
        let out = family.with_coeffs(trace.coeffs.clone())?;
        std::fs::write(path, out.write_coefficients()).map_err(|e| usage(format!("cannot write {path}: {e}")))?;
    }
    let (status, message) = match trace.termination {
        Termination::Stalled => (EXIT_STALL, Some("line search stalled".to_string())),
        Termination::Diverged => (EXIT_DIVERGENCE, Some("flow diverged".to_string())),
        Termination::Converged | Termination::MaxSteps => (0, None),
    };
    Ok(Run {
        records: trace.records(),
        status,
        message,
    })
}

fn flavor(cfg: &mut RunConfig) -> Result<Flavor, UsageError> {
    let raw = cfg.string("flavor", "star");
    cfg.resolve("flavor", &raw);
    match raw.as_str() {
        "star" => Ok(Flavor::Star),
        "double-star" | "doublestar" => Ok(Flavor::DoubleStar),
        other => Err(UsageError(format!("unknown flavor `{other}` (star, double-star)"))),
    }
}

/// The built-in samples on the unit torus.
fn sample(cfg: &mut RunConfig, res: usize) -> Result<SampledFunction, Failure> {
    let name = cfg.string("sample", "smooth");
    let seed: u64 = cfg.parse("seed", 0)?;
    cfg.resolve("sample", &name);
    cfg.resolve("seed", seed);
    Ok(match name.as_str() {
        "smooth" => analysis::random_smooth(seed, res)?,
        "ball" => SampledFunction::torus_from_fn([res; 4], [1.0; 4], |x| {
            let d2: f64 = x.iter().map(|v| (v - 0.5).powi(2)).sum();
            if d2 <= 0.25 * 0.25 {
                1.0
            } else {
                0.0
            }
        })?,
        other => return Err(usage(format!("unknown sample `{other}` (smooth, ball)"))),
    })
}

fn fmt_point(x: [f64; 4]) -> String {
    x.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
}

pub fn analysis(cfg: &mut RunConfig) -> Outcome {
    let op = cfg.string("op", "lorentz");
    cfg.resolve("op", &op);
    let res = cfg.resolution(16)?;
    cfg.resolve("res", res);
    let p: f64 = cfg.parse("p", 2.0)?;
    let records = match op.as_str() {
        "lorentz" => {
            let q: f64 = cfg.parse("q", p)?;
            let fl = flavor(cfg)?;
            let f = sample(cfg, res)?;
            let v = analysis::lorentz_norm(&f, p, q, fl)?;
            vec![format!(
                "record=analysis op=lorentz p={p} q={q} flavor={} value={v:.15e} lp_norm={:.15e}",
                cfg.string("flavor", ""),
                f.lp_norm(p)
            )]
        }
        "inclusion" => {
            let q: f64 = cfg.parse("q", p)?;
            let p2: f64 = cfg.parse("p2", 2.0 * p)?;
            let q2: f64 = cfg.parse("q2", p2)?;
            let fl = flavor(cfg)?;
            let f = sample(cfg, res)?;
            let r = analysis::lorentz_inclusion_check(&f, (p, q), (p2, q2), fl)?;
            vec![format!(
                "record=analysis op=inclusion p={p} q={q} p2={p2} q2={q2} flavor={} ratio={r:.15e}",
                cfg.string("flavor", "")
            )]
        }
        "riesz" => {
            let a: f64 = cfg.parse("a", analysis::DEFAULT_RIESZ_EXPONENT)?;
            let f = sample(cfg, res)?;
            let u = analysis::riesz_potential(&f, a)?;
            vec![format!(
                "record=analysis op=riesz a={a} l2={:.15e} sup={:.15e}",
                u.lp_norm(2.0),
                u.lp_norm(f64::INFINITY)
            )]
        }
        "maximal" => {
            let b: f64 = cfg.parse("beta", 0.5)?;
            let f = sample(cfg, res)?;
            let m = analysis::frac_maximal_field(&f, b)?;
            vec![format!(
                "record=analysis op=maximal beta={b} sup={:.15e} l2={:.15e}",
                m.lp_norm(f64::INFINITY),
                m.lp_norm(2.0)
            )]
        }
        "adams" => {
            let b: f64 = cfg.parse("beta", 0.5)?;
            let p: f64 = cfg.parse("p", 1.5)?;
            let f = sample(cfg, res)?;
            let r = analysis::adams_ratio(&f, b, p)?;
            vec![format!(
                "record=analysis op=adams beta={b} p={p} lambda={} s={} riesz_norm={:.15e} maximal_sup={:.15e} lp_norm={:.15e} ratio={:.15e}",
                r.lambda, r.s, r.riesz_norm, r.maximal_sup, r.lp_norm, r.ratio
            )]
        }
        "morrey" => {
            let id = cfg.string("immersion", "clifford4");
            if !CATALOG.contains(&id.as_str()) {
                return Err(usage(format!("unknown immersion `{id}`")));
            }
            let seed: u64 = cfg.parse("seed", 0)?;
            cfg.resolve("immersion", &id);
            let (imm, _) = by_id(&id, seed)?;
            let center = [0.3, 0.2, 0.1, 0.4];
            let radii: Vec<f64> = (0..5).map(|k| 0.4 * 0.5f64.powi(k)).collect();
            let prof = analysis::morrey_profile(&imm, center, &radii)?;
            let mut out = prof.records();
            out.push(format!(
                "record=analysis op=morrey immersion={id} center={} exponent={:.6}",
                fmt_point(center),
                prof.exponent
            ));
            out
        }
        "hodge" => {
            let k: usize = cfg.parse("degree", 2)?;
            if k > 4 {
                return Err(usage("--degree must be at most 4"));
            }
            let f = sample(cfg, res)?;
            let a = FormFieldFlat::from_fn(k, 1, [res; 4], [1.0; 4], |mask, _, x| {
                let i = f.values.len();
                let shift = (mask as usize * 7919) % i;
                let h = 1.0 / res as f64;
                let idx: [usize; 4] = std::array::from_fn(|a| ((x[a] / h) as usize).min(res - 1));
                f.values[((((idx[0] * res + idx[1]) * res + idx[2]) * res + idx[3]) + shift) % i]
            })?;
            let identity = std::array::from_fn(|i| std::array::from_fn(|j| if i == j { 1.0 } else { 0.0 }));
            let h = analysis::hodge_decompose_flat(&a, &identity)?;
            let recon = h.exact.add(&h.coexact)?.add(&h.harmonic)?.sub(&a)?.max_abs();
            let n2 = a.l2_norm().powi(2);
            let orth = [
                h.exact.l2_inner(&h.coexact)?,
                h.exact.l2_inner(&h.harmonic)?,
                h.coexact.l2_inner(&h.harmonic)?,
            ]
            .iter()
            .map(|v| v.abs() / n2)
            .fold(0.0, f64::max);
            vec![format!(
                "record=analysis op=hodge degree={k} reconstruction={:.3e} orthogonality={orth:.3e} exact_l2={:.15e} coexact_l2={:.15e} harmonic_l2={:.15e}",
                recon / a.max_abs(),
                h.exact.l2_norm(),
                h.coexact.l2_norm(),
                h.harmonic.l2_norm()
            )]
        }
        other => {
            return Err(usage(format!(
                "unknown op `{other}` (lorentz, inclusion, riesz, maximal, adams, morrey, hodge)"
            )))
        }
    };
    cfg.resolve("p", p);
    Ok(Run::ok(records))
}
