use std::path::PathBuf;
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{Arg, ArgAction, ArgMatches, Command};
use conc_lab::config::{Format, ParamSpec};
use conc_lab::{config_from_flags, emit_report, has_failures, run_experiment, EXPERIMENTS};
use conc_lab_core::budget::Budget;

/// Exit codes: clean run, violated or errored rows, bad usage, I/O failure.
const EXIT_FAILURES: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

const COMMON: &[(&str, &str)] = &[
    ("seed", "master seed (default 20130601)"),
    ("trials", "Monte Carlo trials (default 10000)"),
    ("config", "key=value file; command-line flags override it"),
    ("output", "report path (default stdout)"),
    ("format", "csv or json (default csv)"),
    ("jobs", "worker threads (default: all cores)"),
    ("budget", "enumeration budget: N or enum=N,dp=M"),
];

fn common_args(cmd: Command) -> Command {
    let cmd = COMMON.iter().fold(cmd, |c, (name, help)| {
        c.arg(Arg::new(*name).long(*name).value_name("VALUE").help(*help))
    });
    cmd.arg(
        Arg::new("timing")
            .long("timing")
            .action(ArgAction::SetTrue)
            .help("record wall time per row in the ms column (breaks byte-identical reruns)"),
    )
}

fn param_help(p: &ParamSpec) -> String {
    let mut s = p.help.to_string();
    if let Some(r) = p.range {
        s += &format!("; {}", r.hint);
    }
    match p.default {
        Some(d) => s += &format!(" [default: {d}]"),
        None => s += " [required]",
    }
    if p.list {
        s += " (comma list expands to a grid)";
    }
    s
}

fn cli() -> Command {
    let mut cmd = Command::new("conc-lab")
        .about("Checks concentration bounds against exact and Monte Carlo oracles")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .after_help(
            "Each experiment checks one bound against one oracle; comma lists expand to grids.\n\
             Monte Carlo seeds: derive(seed, stream_id(experiment), stream_id(param_json)).\n\
             Exit status: 0 clean, 1 a violated or errored row, 2 usage error, 3 I/O error.",
        );
    for e in EXPERIMENTS {
        let mut sub = Command::new(e.id).about(e.pairing);
        for p in e.params {
            let long = p.name.replace('_', "-");
            let mut arg = Arg::new(p.name)
                .long(long)
                .value_name("VALUE")
                .help(param_help(p));
            if p.name.contains('_') {
                arg = arg.alias(p.name);
            }
            sub = sub.arg(arg);
        }
        cmd = cmd.subcommand(common_args(sub));
    }
    cmd.subcommand(common_args(
        Command::new("all").about("Run every experiment with its default grid"),
    ))
}

fn command_line_flags(
    m: &ArgMatches,
    names: impl Iterator<Item = &'static str>,
) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for name in names {
        if m.value_source(name) != Some(ValueSource::CommandLine) {
            continue;
        }
        if name == "timing" {
            out.push((name.to_string(), m.get_flag(name).to_string()));
        } else if let Some(v) = m.get_one::<String>(name) {
            out.push((name.to_string(), v.clone()));
        }
    }
    out
}

fn common_names() -> impl Iterator<Item = &'static str> {
    COMMON.iter().map(|(n, _)| *n).chain(["timing"])
}

fn usage_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    eprintln!("run `conc-lab --help` for usage");
    ExitCode::from(EXIT_USAGE)
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let (id, sub) = matches.subcommand().expect("a subcommand is required");
    let ids: Vec<&'static str> = if id == "all" {
        EXPERIMENTS.iter().map(|e| e.id).collect()
    } else {
        vec![
            EXPERIMENTS
                .iter()
                .find(|e| e.id == id)
                .expect("registered")
                .id,
        ]
    };
    let mut configs = Vec::new();
    for exp_id in &ids {
        let exp = EXPERIMENTS
            .iter()
            .find(|e| e.id == *exp_id)
            .expect("registered");
        let names = common_names().chain(
            if id == "all" {
                None
            } else {
                Some(exp.params.iter().map(|p| p.name))
            }
            .into_iter()
            .flatten(),
        );
        match config_from_flags(exp_id, &command_line_flags(sub, names)) {
            Ok(c) => configs.push(c),
            Err(e) => return usage_error(e),
        }
    }
    let first = &configs[0];
    if let Some(spec) = &first.budget {
        match Budget::parse(spec) {
            Ok(b) => {
                b.install();
            }
            Err(e) => return usage_error(format!("--budget: {e}")),
        }
    }
    let mut rows = Vec::new();
    for c in &configs {
        match run_experiment(c) {
            Ok(r) => rows.extend(r),
            Err(e) => return usage_error(e),
        }
    }
    let (format, output): (Format, Option<PathBuf>) = (first.format, first.output.clone());
    if let Err(e) = emit_report(&rows, format, output.as_deref()) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_IO);
    }
    if has_failures(&rows) {
        let n = rows.iter().filter(|r| r.verdict.is_failure()).count();
        eprintln!("{n} row(s) violated or errored");
        return ExitCode::from(EXIT_FAILURES);
    }
    ExitCode::SUCCESS
}
