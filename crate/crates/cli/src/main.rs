//! `willmore4`: batch front end for the immersion laboratory.
//!
//! Every subcommand prints line-delimited `key=value` records; each record
//! ends with `config=<hash>` identifying the settings that produced it.

mod commands;
mod config;
mod suite;

use std::collections::BTreeMap;
use std::io::Write;
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{Arg, ArgAction, ArgMatches, Command};

use commands::{Failure, EXIT_FAILURE, EXIT_USAGE};
use config::RunConfig;

fn opt(name: &'static str, help: &'static str) -> Arg {
    Arg::new(name).long(name).value_name("VALUE").allow_negative_numbers(true).help(help)
}

fn shared(cmd: Command) -> Command {
    cmd.arg(opt("config", "key=value file; flags given on the command line take precedence"))
        .arg(opt("output", "write records to this file instead of stdout"))
}

fn cli() -> Command {
    Command::new("willmore4")
        .about("Energies, identities, analysis tools and gradient flow for immersed 4-manifolds")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(shared(
            Command::new("energy")
                .about("Integrate E_A and the quartic energies of an immersion")
                .arg(opt("immersion", "catalog id: plane, clifford4, sphere, catenoid2, poly"))
                .arg(opt("coefficients", "Fourier coefficient file instead of a catalog id"))
                .arg(opt("res", "nodes per axis (power of two, 8..64)"))
                .arg(opt("order", "jet order K (3, 4 or 6)"))
                .arg(opt("beta", "quartic weights: one value or four comma-separated"))
                .arg(opt("seed", "seed for the random polynomial immersion")),
        ))
        .subcommand(shared(
            Command::new("verify")
                .about("Run the identity suite")
                .arg(opt("seed", "seed for random inputs"))
                .arg(opt("points", "sample points per pointwise identity"))
                .arg(
                    Arg::new("only")
                        .long("only")
                        .value_name("NAMES")
                        .action(ArgAction::Append)
                        .help("run only these identities (comma-separated or repeated)"),
                )
                .arg(Arg::new("inject-fault").long("inject-fault").value_name("FAULT").hide(true)),
        ))
        .subcommand(shared(
            Command::new("flow")
                .about("Gradient descent of E_A + β·E₀ over a Fourier family")
                .arg(opt("start", "start point: clifford4+noise or a catalog id"))
                .arg(opt("coefficients", "start from a coefficient file"))
                .arg(opt("beta", "quartic weights: one value or four comma-separated"))
                .arg(opt("steps", "maximum accepted steps"))
                .arg(opt("res", "nodes per axis (power of two, 8..64)"))
                .arg(opt("band", "frequency band F"))
                .arg(opt("noise-modes", "number of perturbed modes"))
                .arg(opt("amplitude", "sum of perturbation coefficient magnitudes"))
                .arg(opt("seed", "noise seed"))
                .arg(opt("tol", "gradient-norm tolerance"))
                .arg(opt("save", "write the final coefficients to this file")),
        ))
        .subcommand(shared(
            Command::new("analysis")
                .about("Lorentz norms, potentials, maximal functions, Morrey profiles, Hodge decomposition")
                .arg(opt("op", "lorentz, inclusion, riesz, maximal, adams, morrey or hodge"))
                .arg(opt("p", "exponent p"))
                .arg(opt("q", "exponent q"))
                .arg(opt("p2", "target exponent p for inclusion"))
                .arg(opt("q2", "target exponent q for inclusion"))
                .arg(opt("flavor", "star or double-star"))
                .arg(opt("beta", "fractional order β"))
                .arg(opt("a", "Riesz exponent"))
                .arg(opt("degree", "form degree for hodge"))
                .arg(opt("sample", "built-in sample: smooth or ball"))
                .arg(opt("immersion", "catalog id for morrey"))
                .arg(opt("seed", "sample seed"))
                .arg(opt("res", "nodes per axis (power of two, 8..64)")),
        ))
}

/// Flags actually given on the command line, keyed by long name.
fn given(m: &ArgMatches) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for id in m.ids() {
        let id = id.as_str();
        if m.value_source(id) != Some(ValueSource::CommandLine) {
            continue;
        }
        if let Some(vals) = m.get_many::<String>(id) {
            out.insert(id.to_string(), vals.cloned().collect::<Vec<_>>().join(","));
        }
    }
    out
}

fn main() -> ExitCode {
    let app = cli();
    let matches = app.clone().get_matches();
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let allowed: Vec<&str> = app
        .find_subcommand(name)
        .expect("known subcommand")
        .get_arguments()
        .map(|a| a.get_id().as_str())
        .collect();
    let mut cfg = match RunConfig::merge(name, given(sub), &allowed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    let result = match name {
        "energy" => commands::energy(&mut cfg),
        "verify" => commands::verify(&mut cfg),
        "flow" => commands::flow(&mut cfg),
        "analysis" => commands::analysis(&mut cfg),
        _ => unreachable!("clap rejects unknown subcommands"),
    };
    let run = match result {
        Ok(run) => run,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
        Err(Failure::Library(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILURE as u8);
        }
    };
    let hash = cfg.hash();
    let mut text = String::new();
    for r in &run.records {
        text.push_str(&format!("{r} config={hash}\n"));
    }
    let written = match cfg.raw("output") {
        Some(path) => std::fs::write(path, &text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(EXIT_FAILURE as u8);
    }
    if let Some(msg) = &run.message {
        eprintln!("{msg}");
    }
    ExitCode::from(run.status as u8)
}
