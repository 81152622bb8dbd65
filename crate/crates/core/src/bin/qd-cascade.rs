use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use qd_cascade::config::{RunConfig, KEYS};
use qd_cascade::pipeline::{self, FitKind, Outcome, Provenance};
use qd_cascade::Error;

const USAGE: u8 = 2;
const INPUT: u8 = 3;
const NON_CONVERGENCE: u8 = 4;

fn cli() -> Command {
    let mut cmd = Command::new("qd-cascade")
        .about("Simulate and analyze polarization-entangled photon pairs from a quantum-dot cascade")
        .subcommand_required(true)
        .arg(Arg::new("config").long("config").global(true).value_name("FILE").help("flat key = value config file"))
        .arg(
            Arg::new("deterministic")
                .long("deterministic")
                .global(true)
                .action(ArgAction::SetTrue)
                .help("omit timestamps from output headers"),
        )
        .subcommand(Command::new("simulate").about("simulate one time-tag file per projection setting"))
        .subcommand(Command::new("correlate").about("histogram delays between two channels of a tag file"))
        .subcommand(Command::new("tomo").about("assemble the 36-panel tomogram from nine tag files"))
        .subcommand(Command::new("negativity").about("negativity versus delay from a tomogram"))
        .subcommand(
            Command::new("fit")
                .about("fit a CSV input")
                .arg(Arg::new("kind").required(true).value_parser(FitKind::ALL.map(FitKind::name))),
        )
        .subcommand(Command::new("hyper-map").about("band-integrate a hyperspectral cube"))
        .subcommand(Command::new("report").about("full analysis of simulated or measured tag files"));
    for key in KEYS {
        let default = if key.default.is_empty() { String::new() } else { format!(" [default: {}]", key.default) };
        cmd = cmd.arg(
            Arg::new(key.name)
                .long(key.name)
                .global(true)
                .value_name("VALUE")
                .help(format!("{}{default}", key.help))
                .help_heading("Config keys"),
        );
    }
    cmd
}

fn resolve(matches: &ArgMatches) -> Result<RunConfig, (u8, String)> {
    let file = matches.get_one::<String>("config").map(PathBuf::from);
    let mut config = RunConfig::resolve(file.as_deref(), []).map_err(|e| (INPUT, format!("config file: {e}")))?;
    for key in KEYS {
        if let Some(value) = matches.get_one::<String>(key.name) {
            config.set(key.name, value).map_err(|e| (USAGE, e.to_string()))?;
        }
    }
    Ok(config)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NonConvergence { .. } => NON_CONVERGENCE,
        _ => INPUT,
    }
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let config = match resolve(sub) {
        Ok(c) => c,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(code);
        }
    };
    let command = match name {
        "fit" => format!("fit {}", sub.get_one::<String>("kind").expect("required")),
        other => other.to_string(),
    };
    let provenance = Provenance::new(&command, &config, sub.get_flag("deterministic"));
    let result: qd_cascade::Result<Outcome> = match name {
        "simulate" => pipeline::cmd_simulate(&config, &provenance),
        "correlate" => pipeline::cmd_correlate(&config, &provenance),
        "tomo" => pipeline::cmd_tomo(&config, &provenance),
        "negativity" => pipeline::cmd_negativity(&config, &provenance),
        "fit" => sub
            .get_one::<String>("kind")
            .expect("required")
            .parse()
            .and_then(|kind| pipeline::cmd_fit(kind, &config, &provenance)),
        "hyper-map" => pipeline::cmd_hyper_map(&config, &provenance),
        "report" => pipeline::cmd_report(&config, &provenance),
        _ => unreachable!("clap rejects unknown subcommands"),
    };
    match result {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            for file in &outcome.files {
                eprintln!("wrote {}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
