//! `bob-lab`: command-line driver for the BOB laboratory.

mod commands;
mod config;

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};

use bob_core::Error;
use config::RunConfig;

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;
const EXIT_ASSERT: u8 = 4;

const SUBCOMMANDS: &[(&str, &str)] = &[
    ("solve", "Integrate the equation and write the trajectory, norms and energy balance"),
    ("sweep-epsilon", "Measure the distance to the inviscid solution across viscosities"),
    ("verify-linear", "Ratio studies for the free and inhomogeneous estimates and the multiplier kernel"),
    ("verify-bilinear", "Ratio studies for the dyadic and full bilinear estimates"),
    ("norms", "Norms of the configured data or of a stored trajectory"),
    ("picard", "Picard iteration with its contraction ratios"),
    ("print-config", "Print every configuration key with its resolved value"),
];

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn cli() -> Command {
    let mut cmd = Command::new("bob-lab")
        .about("Pseudospectral laboratory for the Benjamin-Ono-Burgers equation")
        .subcommand_required(true)
        .arg(Arg::new("config").long("config").global(true).value_name("FILE").help("Configuration file (key = value lines)"));
    for &(key, doc) in RunConfig::KEYS {
        let name: &'static str = Box::leak(flag_name(key).into_boxed_str());
        cmd = cmd.arg(Arg::new(key).long(name).global(true).value_name("VALUE").help(doc.trim()).action(ArgAction::Set));
    }
    for &(name, about) in SUBCOMMANDS {
        cmd = cmd.subcommand(Command::new(name).about(about));
    }
    cmd
}

fn resolve(command: &str, m: &ArgMatches) -> bob_core::Result<RunConfig> {
    let mut cfg = match m.get_one::<String>("config") {
        Some(path) => RunConfig::load(Path::new(path))?,
        None => RunConfig::default(),
    };
    for &(key, _) in RunConfig::KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    if command != "print-config" && command != "norms" && cfg.points < 8 {
        return Err(Error::Config("points must be at least 8".into()));
    }
    Ok(cfg)
}

fn write_once(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
    let path = dir.join(name);
    let mut f = OpenOptions::new().write(true).create_new(true).open(&path)?;
    f.write_all(bytes)?;
    Ok(path)
}

fn summary_text(command: &str, cfg: &RunConfig, outcome: &commands::Outcome) -> String {
    let mut s = format!("# bob-lab {command}\n# resolved configuration\n");
    s.push_str(&cfg.to_text());
    s.push_str("# results\n");
    for (k, v) in &outcome.results {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    if let Some(d) = &outcome.diverged {
        s.push_str(&format!("# diverged: {d}\n"));
    }
    for f in &outcome.failures {
        s.push_str(&format!("# check failed: {f}\n"));
    }
    s
}

fn run(command: &str, cfg: &RunConfig) -> Result<ExitCode, (u8, String)> {
    if cfg.workers > 0 {
        // the global pool can only be configured once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build_global();
    }
    let outcome = match command {
        "solve" => commands::solve(cfg),
        "sweep-epsilon" => commands::sweep_epsilon(cfg),
        "verify-linear" => commands::verify_linear(cfg),
        "verify-bilinear" => commands::verify_bilinear(cfg),
        "norms" => commands::norms(cfg),
        "picard" => commands::picard(cfg),
        other => Err(Error::Config(format!("unknown command '{other}'"))),
    }
    .map_err(|e| {
        let code = match e {
            Error::Divergence(_) => EXIT_DIVERGENCE,
            Error::Io(_) => 1,
            _ => EXIT_CONFIG,
        };
        (code, e.to_string())
    })?;
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir).map_err(|e| (1, format!("cannot create {}: {e}", dir.display())))?;
    let summary = summary_text(command, cfg, &outcome);
    for (name, bytes) in outcome.files.iter().map(|(n, b)| (n.as_str(), b.as_slice())).chain([("summary.cfg", summary.as_bytes())]) {
        let path = write_once(&dir, name, bytes).map_err(|e| (1, format!("cannot write {}: {e}", dir.join(name).display())))?;
        println!("wrote {}", path.display());
    }
    for (k, v) in &outcome.results {
        println!("{k} = {v}");
    }
    if let Some(d) = &outcome.diverged {
        return Err((EXIT_DIVERGENCE, d.clone()));
    }
    for f in &outcome.failures {
        eprintln!("check failed: {f}");
    }
    if cfg.assert && !outcome.failures.is_empty() {
        return Ok(ExitCode::from(EXIT_ASSERT));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let (command, sub) = matches.subcommand().expect("subcommand is required");
    // global arguments are visible on the subcommand matches
    let cfg = match resolve(command, sub) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if command == "print-config" {
        print!("{}", cfg.documented());
        return ExitCode::SUCCESS;
    }
    match run(command, &cfg) {
        Ok(code) => code,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
