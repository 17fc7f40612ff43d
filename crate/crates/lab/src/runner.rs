//! Scenario and suite execution.

use std::cell::OnceCell;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use rayon::prelude::*;
use robin_lab::{
    assemble, solve_parabolic, AssembledSystem, Signal, Target, TimeStepping, Trajectory,
};

use crate::checks::CheckOutcome;
use crate::config::Scenario;

/// Seed used when neither the scenario nor the command line sets one.
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Root of the output tree; each scenario writes to `<out>/<name>/`.
    pub out: PathBuf,
    /// Overrides the scenario seed.
    pub seed: Option<u64>,
}

/// Everything a check can read. The trajectory is computed on first use.
pub struct Context<'a> {
    pub scenario: &'a Scenario,
    pub system: AssembledSystem,
    pub u0: Vec<f64>,
    pub f: Signal,
    pub g: Signal,
    pub seed: u64,
    pub out_dir: PathBuf,
    trajectory: OnceCell<Trajectory>,
}

impl Context<'_> {
    pub fn trajectory(&self) -> Result<&Trajectory> {
        if let Some(t) = self.trajectory.get() {
            return Ok(t);
        }
        let time = self
            .scenario
            .time
            .as_ref()
            .context("scenario has no [time] section")?;
        let mut opts = TimeStepping::new(time.t_end, time.dt).theta(time.theta);
        if time.lumped {
            opts = opts.lumped();
        }
        let traj = solve_parabolic(&self.system, &self.u0, &self.f, &self.g, opts)?;
        Ok(self.trajectory.get_or_init(|| traj))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub name: String,
    pub seed: u64,
    pub outcomes: Vec<CheckOutcome>,
    /// Set when the scenario could not be loaded or solved.
    pub error: Option<String>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.outcomes.iter().all(|o| o.passed)
    }

    fn failed(name: String, seed: u64, err: anyhow::Error) -> ScenarioReport {
        ScenarioReport {
            name,
            seed,
            outcomes: Vec::new(),
            error: Some(format!("{err:#}")),
        }
    }
}

fn write_report(dir: &Path, report: &ScenarioReport) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("report.csv"))?;
    w.write_record(["check", "passed", "measured", "limit", "detail"])?;
    for o in &report.outcomes {
        w.write_record([
            o.check.clone(),
            o.passed.to_string(),
            o.measured.to_string(),
            o.limit.to_string(),
            o.detail.clone(),
        ])?;
    }
    w.write_record(["seed", "true", &report.seed.to_string(), "", ""])?;
    w.flush()?;
    Ok(())
}

/// Solves the scenario, runs its checks and writes CSV output. Check
/// failures and check errors are recorded in the report, not returned.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> ScenarioReport {
    let seed = opts.seed.or(scenario.seed).unwrap_or(DEFAULT_SEED);
    match execute(scenario, opts, seed) {
        Ok(r) => r,
        Err(e) => ScenarioReport::failed(scenario.name.clone(), seed, e),
    }
}

fn execute(scenario: &Scenario, opts: &RunOptions, seed: u64) -> Result<ScenarioReport> {
    let out_dir = opts.out.join(&scenario.name);
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mesh = scenario.build_mesh()?;
    let system = assemble(mesh, &scenario.coefficient_set()?, 4)?;
    let u0 = system.interpolate(&scenario.initial_field()?);
    let cx = Context {
        scenario,
        u0,
        f: scenario.signal(Target::Volume)?,
        g: scenario.signal(Target::Boundary)?,
        seed,
        out_dir: out_dir.clone(),
        system,
        trajectory: OnceCell::new(),
    };
    if scenario.time.is_some() {
        let traj = cx.trajectory()?;
        traj.write_summary_csv(
            &cx.system,
            BufWriter::new(File::create(out_dir.join("summary.csv"))?),
        )?;
        if scenario.output.trajectory {
            let every = scenario.output.every;
            let mut thin = traj.clone();
            let last = traj.len() - 1;
            let keep: Vec<usize> = (0..traj.len())
                .filter(|k| k % every == 0 || *k == last)
                .collect();
            thin.times = keep.iter().map(|&k| traj.times[k]).collect();
            thin.states = keep.iter().map(|&k| traj.states[k].clone()).collect();
            thin.record_every *= every;
            let mut w = BufWriter::new(File::create(out_dir.join("trajectory.csv"))?);
            thin.write_csv(&mut w)?;
            w.flush()?;
        }
    }
    let outcomes = scenario
        .checks
        .iter()
        .enumerate()
        .map(|(i, check)| {
            check.run(&cx, i).unwrap_or_else(|e| CheckOutcome {
                check: check.name().to_string(),
                passed: false,
                measured: f64::NAN,
                limit: f64::NAN,
                detail: format!("error: {e:#}"),
            })
        })
        .collect();
    let report = ScenarioReport {
        name: scenario.name.clone(),
        seed,
        outcomes,
        error: None,
    };
    write_report(&out_dir, &report)?;
    Ok(report)
}

/// Aggregate of a suite run, sorted by scenario name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuiteReport {
    pub scenarios: Vec<ScenarioReport>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.scenarios.iter().all(|s| s.passed())
    }

    /// `scenario,check,passed,measured,limit,detail`, one row per check and
    /// one row for each scenario that failed before its checks ran.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["scenario", "check", "passed", "measured", "limit", "detail"])?;
        for s in &self.scenarios {
            if let Some(err) = &s.error {
                w.write_record([s.name.as_str(), "", "false", "", "", err.as_str()])?;
            }
            for o in &s.outcomes {
                w.write_record([
                    s.name.clone(),
                    o.check.clone(),
                    o.passed.to_string(),
                    o.measured.to_string(),
                    o.limit.to_string(),
                    o.detail.clone(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs every `*.toml` file of `dir` in the worker pool. A file that does
/// not parse becomes a failed entry named after the file stem.
pub fn run_suite(dir: &Path, opts: &RunOptions) -> Result<SuiteReport> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    files.sort();
    let mut scenarios: Vec<ScenarioReport> = files
        .par_iter()
        .map(|path| match Scenario::load(path) {
            Ok(s) => run_scenario(&s, opts),
            Err(e) => {
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                ScenarioReport::failed(stem, opts.seed.unwrap_or(DEFAULT_SEED), e)
            }
        })
        .collect();
    scenarios.sort_by(|a, b| a.name.cmp(&b.name));
    let report = SuiteReport { scenarios };
    fs::create_dir_all(&opts.out)?;
    report.write_csv(BufWriter::new(File::create(opts.out.join("suite.csv"))?))?;
    Ok(report)
}
