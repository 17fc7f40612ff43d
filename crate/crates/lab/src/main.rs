use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use robin_lab_cli::{run_scenario, run_suite, RunOptions, Scenario, ScenarioReport, CATALOG};

#[derive(Parser)]
#[command(
    name = "lab",
    version,
    about = "Run verification scenarios for the Robin parabolic laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory.
    #[arg(long, global = true, default_value = "lab-out")]
    out: PathBuf,
    /// Seed for random panels; overrides the scenario files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run { config: PathBuf },
    /// Run every `*.toml` scenario in a directory.
    Suite { dir: PathBuf },
    /// List the check names a scenario may use.
    ListChecks,
}

fn print_report(r: &ScenarioReport) {
    let status = if r.passed() { "PASS" } else { "FAIL" };
    println!("{status} {} (seed {})", r.name, r.seed);
    if let Some(e) = &r.error {
        println!("  error: {e}");
    }
    for o in &r.outcomes {
        let mark = if o.passed { "ok  " } else { "FAIL" };
        println!(
            "  {mark} {:<24} {:>12.4e} vs {:<12.4e} {}",
            o.check, o.measured, o.limit, o.detail
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let opts = RunOptions {
        out: cli.out,
        seed: cli.seed,
    };
    let start = Instant::now();
    match cli.command {
        Command::ListChecks => {
            for (name, about) in CATALOG {
                println!("{name:<24} {about}");
            }
            ExitCode::SUCCESS
        }
        Command::Run { config } => {
            let scenario = match Scenario::load(&config) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return ExitCode::from(2);
                }
            };
            let report = run_scenario(&scenario, &opts);
            print_report(&report);
            println!(
                "finished in {:.2}s, output in {}",
                start.elapsed().as_secs_f64(),
                opts.out.display()
            );
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::Suite { dir } => match run_suite(&dir, &opts) {
            Ok(suite) => {
                for r in &suite.scenarios {
                    print_report(r);
                }
                let passed = suite.scenarios.iter().filter(|s| s.passed()).count();
                println!(
                    "{passed} of {} scenarios passed in {:.2}s; summary in {}",
                    suite.scenarios.len(),
                    start.elapsed().as_secs_f64(),
                    opts.out.join("suite.csv").display()
                );
                if suite.passed() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::FAILURE
                }
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
    }
}
