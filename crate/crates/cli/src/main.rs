use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use horolab::experiments::{list_experiments, list_experiments_json, run, ExperimentConfig};
use horolab::Error;

/// Runs one horolab experiment from a JSON config and writes a CSV table and a JSON report.
#[derive(Parser, Debug)]
#[command(name = "horolab", version)]
struct Args {
    /// Experiment config (JSON).
    #[arg(long, required_unless_present = "list")]
    config: Option<PathBuf>,

    /// Print the experiment catalog and exit.
    #[arg(long)]
    list: bool,

    /// Machine-readable output: JSON catalog with --list, JSON report on stdout otherwise.
    #[arg(long)]
    json: bool,

    /// Output directory; overrides the config.
    #[arg(long, env = "HOROLAB_OUT")]
    out: Option<PathBuf>,

    #[arg(long)]
    seed_override: Option<u64>,

    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if args.list {
        if args.json {
            match list_experiments_json() {
                Ok(s) => println!("{s}"),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            }
        } else {
            print!("{}", list_experiments());
        }
        return ExitCode::SUCCESS;
    }
    if let Some(n) = args.jobs {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("invalid config: --jobs must be a positive thread count");
            return ExitCode::from(2);
        }
    }
    let path = args.config.expect("clap enforces --config without --list");
    let mut cfg = match ExperimentConfig::from_file(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    if let Some(s) = args.seed_override {
        cfg.override_seed(s);
    }
    // --out beats the config, which beats HOROLAB_OUT; clap folds the env var into `out`,
    // so look at the flag itself to keep the config in the middle
    let flag_out = std::env::args().any(|a| a == "--out" || a.starts_with("--out="));
    let dir = match (&args.out, &cfg.output.dir) {
        (Some(o), _) if flag_out => o.clone(),
        (_, Some(d)) => PathBuf::from(d),
        (Some(o), None) => o.clone(),
        (None, None) => PathBuf::from("horolab-out"),
    };
    let outcome = match run(&cfg) {
        Ok(o) => o,
        Err(e @ Error::Config(_)) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let (csv, json) = match outcome.write(&dir) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error writing artifacts: {e}");
            return ExitCode::from(1);
        }
    };
    if args.json {
        match outcome.to_json() {
            Ok(s) => println!("{s}"),
            Err(e) => eprintln!("error: {e}"),
        }
    } else {
        let lines: usize = outcome.reports.iter().map(|r| r.lines.len()).sum();
        println!("{}: {} checks, {}", outcome.experiment, lines, if outcome.passed { "all passed" } else { "FAILED" });
        for (k, v) in &outcome.summary {
            println!("  {k} = {v}");
        }
        println!("wrote {} and {}", csv.display(), json.display());
    }
    match outcome.first_violation {
        None => ExitCode::SUCCESS,
        Some(v) => {
            eprintln!("violated bound: {v}");
            ExitCode::from(1)
        }
    }
}
