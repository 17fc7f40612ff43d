//! Scenario files.
//!
//! A scenario is a TOML document. Unknown keys are rejected, and every
//! semantic error names the offending field together with the line it sits on.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use robin_lab::{
    build_interval_mesh, build_polygon_mesh, CoefficientSet, Field, Mesh, Signal, Target, Temporal,
};
use serde::Deserialize;

use crate::checks::CheckSpec;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Seed for random panels; `--seed` overrides it.
    #[serde(default)]
    pub seed: Option<u64>,
    pub mesh: MeshSpec,
    #[serde(default = "default_preset")]
    pub coefficients: String,
    /// Expression in `x` (and `y`) for the initial datum.
    #[serde(default = "default_initial")]
    pub initial: String,
    #[serde(default)]
    pub volume: Vec<TermSpec>,
    #[serde(default)]
    pub boundary: Vec<TermSpec>,
    #[serde(default)]
    pub time: Option<TimeSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, rename = "check")]
    pub checks: Vec<CheckSpec>,
    #[serde(skip)]
    pub source: Option<PathBuf>,
}

fn default_preset() -> String {
    "laplacian".into()
}

fn default_initial() -> String {
    "0".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    Interval {
        cells: usize,
    },
    Polygon {
        vertices: Vec<[f64; 2]>,
        h: f64,
    },
    /// Mesh text file, relative to the scenario file.
    File {
        path: PathBuf,
    },
}

/// One separable term `profile(x) * temporal(t)`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub profile: String,
    #[serde(default = "default_temporal")]
    pub temporal: String,
}

fn default_temporal() -> String {
    "constant".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "one")]
    pub theta: f64,
    #[serde(default)]
    pub lumped: bool,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Write `trajectory.csv`.
    #[serde(default = "yes")]
    pub trajectory: bool,
    /// Stride between written states, in steps.
    #[serde(default = "one_usize")]
    pub every: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            trajectory: true,
            every: 1,
        }
    }
}

fn yes() -> bool {
    true
}

fn one_usize() -> usize {
    1
}

/// Line (1-based) of `key = ...` inside the `nth` occurrence of `[table]`
/// (or `[[table]]`), falling back to the header line.
fn locate(src: &str, table: &str, nth: usize, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut seen = 0;
    let mut header = None;
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            current = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == table {
                seen += 1;
                if seen == nth + 1 {
                    header = Some(i + 1);
                }
            }
            continue;
        }
        if current == table && seen == nth + 1 {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

fn field_error(src: &str, table: &str, key: &str, reason: impl std::fmt::Display) -> anyhow::Error {
    nth_field_error(src, table, 0, key, reason)
}

fn nth_field_error(
    src: &str,
    table: &str,
    nth: usize,
    key: &str,
    reason: impl std::fmt::Display,
) -> anyhow::Error {
    let path = if table.is_empty() {
        key.to_string()
    } else {
        format!("{table}.{key}")
    };
    match locate(src, table, nth, key) {
        Some(line) => anyhow!("field `{path}` (line {line}): {reason}"),
        None => anyhow!("field `{path}`: {reason}"),
    }
}

impl Scenario {
    pub fn parse(src: &str) -> Result<Scenario> {
        let scenario: Scenario = toml::from_str(src).map_err(|e| anyhow!("{e}"))?;
        scenario.validate(src)?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let src =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut s = Scenario::parse(&src).with_context(|| format!("in {}", path.display()))?;
        s.source = Some(path.to_path_buf());
        Ok(s)
    }

    fn validate(&self, src: &str) -> Result<()> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(field_error(
                src,
                "",
                "name",
                "use letters, digits, `_` or `-`",
            ));
        }
        match &self.mesh {
            MeshSpec::Interval { cells } if *cells == 0 => {
                return Err(field_error(src, "mesh", "cells", "must be positive"));
            }
            MeshSpec::Polygon { vertices, h } => {
                if vertices.len() < 3 {
                    return Err(field_error(
                        src,
                        "mesh",
                        "vertices",
                        "need at least three vertices",
                    ));
                }
                if !(*h > 0.0) {
                    return Err(field_error(src, "mesh", "h", "must be positive"));
                }
            }
            _ => {}
        }
        CoefficientSet::preset(&self.coefficients)
            .map_err(|e| field_error(src, "", "coefficients", e))?;
        Field::parse(&self.initial).map_err(|e| field_error(src, "", "initial", e))?;
        for (table, terms) in [("volume", &self.volume), ("boundary", &self.boundary)] {
            for (i, t) in terms.iter().enumerate() {
                Field::parse(&t.profile)
                    .map_err(|e| nth_field_error(src, table, i, "profile", e))?;
                parse_temporal(&t.temporal)
                    .map_err(|e| nth_field_error(src, table, i, "temporal", e))?;
            }
        }
        if let Some(time) = &self.time {
            if !(time.t_end > 0.0 && time.t_end.is_finite()) {
                return Err(field_error(
                    src,
                    "time",
                    "t_end",
                    format!("must be positive, got {}", time.t_end),
                ));
            }
            if !(time.dt > 0.0) {
                return Err(field_error(
                    src,
                    "time",
                    "dt",
                    format!("must be positive, got {}", time.dt),
                ));
            }
            if time.dt > time.t_end {
                return Err(field_error(src, "time", "dt", "must not exceed t_end"));
            }
            if !(0.5..=1.0).contains(&time.theta) {
                return Err(field_error(src, "time", "theta", "must lie in [0.5, 1]"));
            }
        }
        if self.output.every == 0 {
            return Err(field_error(src, "output", "every", "must be at least 1"));
        }
        for (i, check) in self.checks.iter().enumerate() {
            if let Err(issue) = check.validate() {
                let reason = format!("{} (check `{}`)", issue.message, check.name());
                return Err(nth_field_error(src, "check", i, issue.field, reason));
            }
            if check.needs_trajectory() && self.time.is_none() {
                return Err(anyhow!("check `{}` needs a [time] section", check.name()));
            }
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        Ok(match &self.mesh {
            MeshSpec::Interval { cells } => build_interval_mesh(*cells)?,
            MeshSpec::Polygon { vertices, h } => build_polygon_mesh(vertices, *h)?,
            MeshSpec::File { path } => {
                let full = match self.source.as_deref().and_then(Path::parent) {
                    Some(dir) => dir.join(path),
                    None => path.clone(),
                };
                let text = std::fs::read_to_string(&full)
                    .with_context(|| format!("reading {}", full.display()))?;
                Mesh::from_text(&text)?
            }
        })
    }

    pub fn coefficient_set(&self) -> Result<CoefficientSet> {
        Ok(CoefficientSet::preset(&self.coefficients)?)
    }

    pub fn initial_field(&self) -> Result<Field> {
        Ok(Field::parse(&self.initial)?)
    }

    pub fn signal(&self, target: Target) -> Result<Signal> {
        let terms = match target {
            Target::Volume => &self.volume,
            Target::Boundary => &self.boundary,
        };
        let mut s = Signal::zero(target);
        for t in terms {
            s = s.with(Field::parse(&t.profile)?, parse_temporal(&t.temporal)?);
        }
        Ok(s)
    }
}

/// Parses `constant`, `cos(f[, phase])`, `sin(f)`, `decay(rate)`,
/// `window(start, end)`, `square(period, duty)`, `hat(left, peak, right)`
/// and products of these joined by `*`.
pub fn parse_temporal(src: &str) -> Result<Temporal> {
    let mut factors = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, c) in src.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            '*' if depth == 0 => {
                factors.push(&src[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    factors.push(&src[start..]);
    let mut out: Option<Temporal> = None;
    for f in factors {
        let t = parse_factor(f.trim())?;
        out = Some(match out {
            None => t,
            Some(prev) => prev.times(t),
        });
    }
    out.ok_or_else(|| anyhow!("empty temporal factor"))
}

fn parse_factor(src: &str) -> Result<Temporal> {
    let (name, args) = match src.find('(') {
        Some(open) => {
            let Some(inner) = src[open + 1..].strip_suffix(')') else {
                bail!("missing `)` in `{src}`");
            };
            let args = inner
                .split(',')
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .map_err(|_| anyhow!("bad number `{}` in `{src}`", a.trim()))
                })
                .collect::<Result<Vec<f64>>>()?;
            (src[..open].trim(), args)
        }
        None => (src, Vec::new()),
    };
    let arity = |n: &[usize]| {
        if n.contains(&args.len()) {
            Ok(())
        } else {
            Err(anyhow!(
                "`{name}` takes {n:?} arguments, got {}",
                args.len()
            ))
        }
    };
    Ok(match name {
        "constant" => {
            arity(&[0])?;
            Temporal::Constant
        }
        "cos" => {
            arity(&[1, 2])?;
            Temporal::Cos {
                freq: args[0],
                phase: args.get(1).copied().unwrap_or(0.0),
            }
        }
        "sin" => {
            arity(&[1])?;
            Temporal::sin(args[0])
        }
        "decay" => {
            arity(&[1])?;
            Temporal::Decay { rate: args[0] }
        }
        "window" => {
            arity(&[2])?;
            Temporal::Window {
                start: args[0],
                end: args[1],
            }
        }
        "square" => {
            arity(&[2])?;
            if !(args[0] > 0.0 && (0.0..=1.0).contains(&args[1])) {
                bail!("square needs period > 0 and duty in [0, 1]");
            }
            Temporal::Square {
                period: args[0],
                duty: args[1],
            }
        }
        "hat" => {
            arity(&[3])?;
            if !(args[0] < args[1] && args[1] < args[2]) {
                bail!("hat needs left < peak < right");
            }
            Temporal::Hat {
                left: args[0],
                peak: args[1],
                right: args[2],
            }
        }
        _ => bail!("unknown temporal factor `{name}`"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
name = "demo"

[mesh]
kind = "interval"
cells = 8

[time]
t_end = 0.1
dt = 0.01
"#;

    #[test]
    fn minimal_scenario_parses() {
        let s = Scenario::parse(BASE).unwrap();
        assert_eq!(s.coefficients, "laplacian");
        assert!(s.checks.is_empty());
        assert_eq!(s.build_mesh().unwrap().n_cells(), 8);
    }

    #[test]
    fn negative_dt_names_field_and_line() {
        let src = BASE.replace("dt = 0.01", "dt = -0.01");
        let err = Scenario::parse(&src).unwrap_err().to_string();
        assert!(err.contains("time.dt"), "{err}");
        assert!(err.contains("line 10"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let src = BASE.replace("cells = 8", "cells = 8\nspacing = 2");
        let err = Scenario::parse(&src).unwrap_err().to_string();
        assert!(err.contains("spacing"), "{err}");
    }

    #[test]
    fn temporal_grammar() {
        assert!(
            (parse_temporal("decay(1) * cos(2)").unwrap().eval(0.5) - (-0.5f64).exp() * 1f64.cos())
                .abs()
                < 1e-15
        );
        assert_eq!(parse_temporal("square(1, 0.5)").unwrap().eval(0.75), -1.0);
        assert!(parse_temporal("cos(1, 2, 3)").is_err());
        assert!(parse_temporal("wobble(1)").is_err());
        assert!(parse_temporal("hat(1, 0, 2)").is_err());
    }

    #[test]
    fn bad_expression_reported() {
        let src = BASE.replace("name = \"demo\"", "name = \"demo\"\ninitial = \"cos(\"");
        let err = Scenario::parse(&src).unwrap_err().to_string();
        assert!(err.contains("`initial`"), "{err}");
    }
}
