//! `calibrank` command-line tool.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};

use calibrank::bvn::{read_policy, write_policy};
use calibrank::harness::files::{read_matrix, read_problem};
use calibrank::harness::{
    benchmark, calibrate, decompose_matrix, run_sweep, timings_path, validate_inputs, Method, PipelineOptions,
    SweepConfig, ValidateRequest,
};
use calibrank::lp::{LpBackend, LpOptions};

fn config_args(cmd: Command) -> Command {
    let cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_parser(value_parser!(PathBuf))
            .help("TOML configuration file"),
    );
    SweepConfig::KEYS
        .iter()
        .filter(|k| **k != "seed")
        .fold(cmd, |cmd, key| {
            cmd.arg(
                Arg::new(*key)
                    .long(*key)
                    .value_name("VALUE")
                    .help(format!("override config key `{key}`"))
                    .help_heading("Config overrides"),
            )
        })
}

fn cli() -> Command {
    Command::new("calibrank")
        .about("Calibrated re-ranking with LP relaxations and Birkhoff-von Neumann policies")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("seed")
                .long("seed")
                .global(true)
                .value_parser(value_parser!(u64))
                .help("seed for every random choice (default: config value, else 0)"),
        )
        .arg(
            Arg::new("verbose")
                .short('v')
                .long("verbose")
                .global(true)
                .action(ArgAction::Count)
                .help("more log output (repeat for debug)"),
        )
        .subcommand(config_args(Command::new("sweep").about("sweep λ for every method and write a trade-off CSV")))
        .subcommand(config_args(Command::new("bench").about("time every method per user and print a runtime table")))
        .subcommand(
            Command::new("calibrate")
                .about("solve one problem file, print a sampled ranking, and optionally save the policy")
                .arg(Arg::new("problem").long("problem").required(true).value_parser(value_parser!(PathBuf)))
                .arg(Arg::new("lambda").long("lambda").value_parser(value_parser!(f64)))
                .arg(Arg::new("method").long("method").default_value("lp_reduced"))
                .arg(Arg::new("backend").long("backend").default_value("colgen"))
                .arg(Arg::new("alpha").long("alpha").default_value("0.01").value_parser(value_parser!(f64)))
                .arg(Arg::new("policy_out").long("policy-out").value_parser(value_parser!(PathBuf))),
        )
        .subcommand(
            Command::new("decompose")
                .about("decompose a matrix file into a policy file")
                .arg(Arg::new("matrix").long("matrix").required(true).value_parser(value_parser!(PathBuf)))
                .arg(Arg::new("output").long("output").value_parser(value_parser!(PathBuf)))
                .arg(
                    Arg::new("residual_tolerance")
                        .long("residual-tolerance")
                        .value_parser(value_parser!(f64))
                        .default_value("1e-9"),
                ),
        )
        .subcommand(
            Command::new("sample")
                .about("draw a ranking from a saved policy file")
                .arg(Arg::new("policy").long("policy").required(true).value_parser(value_parser!(PathBuf))),
        )
        .subcommand(
            Command::new("validate")
                .about("check input files and report every violation")
                .arg(Arg::new("ratings").long("ratings").value_parser(value_parser!(PathBuf)))
                .arg(Arg::new("catalog").long("catalog").value_parser(value_parser!(PathBuf)))
                .arg(Arg::new("scores").long("scores").value_parser(value_parser!(PathBuf)))
                .arg(Arg::new("categories").long("categories").value_parser(value_parser!(PathBuf)))
                .arg(Arg::new("problem").long("problem").value_parser(value_parser!(PathBuf)))
                .arg(Arg::new("matrix").long("matrix").value_parser(value_parser!(PathBuf)))
                .arg(
                    Arg::new("positive_threshold")
                        .long("positive-threshold")
                        .value_parser(value_parser!(f64))
                        .default_value("3.5"),
                )
                .arg(
                    Arg::new("min_interactions")
                        .long("min-interactions")
                        .value_parser(value_parser!(usize))
                        .default_value("5"),
                ),
        )
}

fn load_config(m: &ArgMatches) -> Result<SweepConfig> {
    let mut config = match m.get_one::<PathBuf>("config") {
        Some(path) => SweepConfig::load(path).with_context(|| format!("reading config {}", path.display()))?,
        None => SweepConfig::default(),
    };
    for key in SweepConfig::KEYS.iter().filter(|k| **k != "seed") {
        if let Some(value) = m.get_one::<String>(key) {
            config.set(key, value).with_context(|| format!("--{key}"))?;
        }
    }
    if let Some(seed) = m.get_one::<u64>("seed") {
        config.seed = *seed;
    }
    config.validate()?;
    Ok(config)
}

fn seed(m: &ArgMatches) -> u64 {
    m.get_one::<u64>("seed").copied().unwrap_or(0)
}

fn print_ranking(order: &[usize]) -> Result<()> {
    let line: Vec<String> = order.iter().map(|i| i.to_string()).collect();
    let mut out = io::stdout().lock();
    writeln!(out, "{}", line.join(" "))?;
    Ok(())
}

fn run(matches: &ArgMatches) -> Result<ExitCode> {
    match matches.subcommand() {
        Some(("sweep", m)) => {
            let config = load_config(m)?;
            let points = run_sweep(&config)?;
            eprintln!(
                "wrote {} rows to {} (timings in {})",
                points.len(),
                config.output.display(),
                timings_path(&config.output).display()
            );
        }
        Some(("bench", m)) => {
            let config = load_config(m)?;
            let report = benchmark(&config)?;
            print!("{report}");
        }
        Some(("calibrate", m)) => {
            let lambda = m.get_one::<f64>("lambda").copied();
            let problem_path = m.get_one::<PathBuf>("problem").expect("required");
            let problem = read_problem(problem_path, lambda)?;
            let method: Method = m.get_one::<String>("method").expect("defaulted").parse()?;
            let backend: LpBackend = m.get_one::<String>("backend").expect("defaulted").parse()?;
            let options = PipelineOptions {
                lp: LpOptions::with_backend(backend),
                alpha: *m.get_one::<f64>("alpha").expect("defaulted"),
                ..PipelineOptions::default()
            };
            let result = calibrate(&problem, method, seed(m), &options)?;
            print_ranking(result.ranking.top(problem.k()))?;
            if let Some(path) = m.get_one::<PathBuf>("policy_out") {
                write_policy(BufWriter::new(File::create(path)?), &result.policy)?;
                eprintln!("policy with {} components written to {}", result.policy.len(), path.display());
            }
        }
        Some(("decompose", m)) => {
            let matrix = read_matrix(m.get_one::<PathBuf>("matrix").expect("required"))?;
            let tol = *m.get_one::<f64>("residual_tolerance").expect("defaulted");
            let policy = decompose_matrix(&matrix, tol)?;
            match m.get_one::<PathBuf>("output") {
                Some(path) => write_policy(BufWriter::new(File::create(path)?), &policy)?,
                None => write_policy(io::stdout().lock(), &policy)?,
            }
        }
        Some(("sample", m)) => {
            let path = m.get_one::<PathBuf>("policy").expect("required");
            let policy = read_policy(BufReader::new(File::open(path)?), path)?;
            print_ranking(calibrank::bvn::sample(&policy, seed(m)).order())?;
        }
        Some(("validate", m)) => {
            let path = |k: &str| m.get_one::<PathBuf>(k).cloned();
            let req = ValidateRequest {
                ratings: path("ratings"),
                catalog: path("catalog"),
                scores: path("scores"),
                category_file: path("categories"),
                problem: path("problem"),
                matrix: path("matrix"),
                positive_threshold: *m.get_one::<f64>("positive_threshold").expect("defaulted"),
                min_interactions: *m.get_one::<usize>("min_interactions").expect("defaulted"),
            };
            if [&req.ratings, &req.catalog, &req.scores, &req.category_file, &req.problem, &req.matrix]
                .iter()
                .all(|p| p.is_none())
            {
                bail!("nothing to validate: pass at least one file");
            }
            let violations = validate_inputs(&req);
            if violations.is_empty() {
                println!("ok");
            } else {
                for v in &violations {
                    println!("{v}");
                }
                return Ok(ExitCode::FAILURE);
            }
        }
        _ => unreachable!("subcommand required"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let level = match matches.get_count("verbose") {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&matches) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
