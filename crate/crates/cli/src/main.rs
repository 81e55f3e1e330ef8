//! `boolperc`: command-line runner for Boolean percolation experiments.

mod commands;
mod config;
mod error;
mod merge;
mod output;

use clap::{Arg, ArgAction, ArgMatches, Args, Command, FromArgMatches};
use config::Params;
use error::CliError;
use std::path::PathBuf;

fn cli() -> Command {
    let mut cmd = Command::new("boolperc")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Monte Carlo experiments for Poisson Boolean percolation with power-law radii")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for op in commands::OPS {
        let sub = if op == "merge" {
            Command::new(op)
                .about("Pool the rows of several runs into one table")
                .arg(Arg::new("inputs").num_args(0..).value_parser(clap::value_parser!(PathBuf)))
                .arg(Arg::new("out").long("out").required(true).value_parser(clap::value_parser!(PathBuf)))
        } else {
            let base = Command::new(op).arg(
                Arg::new("config")
                    .long("config")
                    .action(ArgAction::Set)
                    .value_parser(clap::value_parser!(PathBuf))
                    .help("TOML file of parameters; flags override it"),
            );
            Params::augment_args(base).about(commands::about(op))
        };
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn resolve(m: &ArgMatches) -> Result<Params, CliError> {
    let flags = Params::from_arg_matches(m).map_err(|e| CliError::Config(e.to_string()))?;
    let file = match m.get_one::<PathBuf>("config") {
        Some(path) => Params::from_file(path)?,
        None => Params::default(),
    };
    flags.over(file).with_env_seed()
}

#[cfg(feature = "parallel")]
fn set_threads(n: Option<usize>) -> Result<(), CliError> {
    match n {
        Some(0) => Err(CliError::Config("threads must be at least 1".into())),
        Some(1) => {
            boolperc::par::set_mode(boolperc::par::Mode::Sequential);
            Ok(())
        }
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Other(e.to_string())),
        None => Ok(()),
    }
}

#[cfg(not(feature = "parallel"))]
fn set_threads(n: Option<usize>) -> Result<(), CliError> {
    match n {
        Some(0) => Err(CliError::Config("threads must be at least 1".into())),
        _ => Ok(()),
    }
}

fn run(matches: &ArgMatches) -> Result<(), CliError> {
    let (op, m) = matches.subcommand().expect("a subcommand is required");
    if op == "merge" {
        let inputs: Vec<PathBuf> = m.get_many::<PathBuf>("inputs").map(|v| v.cloned().collect()).unwrap_or_default();
        let out = m.get_one::<PathBuf>("out").expect("required");
        return merge::merge(&inputs, out);
    }
    let params = resolve(m)?;
    set_threads(params.threads)?;
    let out = params.out.clone().unwrap_or_else(|| PathBuf::from(format!("{op}.csv")));
    commands::run(op, &params, &out)
}

fn main() {
    let matches = cli().get_matches();
    if let Err(e) = run(&matches) {
        eprintln!("boolperc: {e}");
        std::process::exit(e.exit_code());
    }
}
