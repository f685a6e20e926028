//! Run configuration files.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use annulus_core::boundary::make_trace;
use annulus_core::navier_stokes::SweepParameter;
use annulus_core::oracle::{AmickProfile, ProfileShape, SpiralParams};
use annulus_core::{BoundarySpec, BoundaryTrace, Method, PolarGrid, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_r: usize,
    pub n_theta: usize,
    #[serde(default = "one")]
    pub r_inner: f64,
    #[serde(default = "two")]
    pub r_outer: f64,
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

/// Solver settings; viscosity lives at the top level of [`RunConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub method: Method,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub lambda: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            method: d.method,
            tol: d.tol,
            max_iter: d.max_iter,
            damping: d.damping,
            lambda: d.lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// Exact flow to compare against (NS oracles) or to dump (all of them).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSpec {
    Couette { omega1: f64, omega2: f64 },
    RadialSource { flux: f64 },
    Spiral { flux: f64, amplitude: f64 },
    Amick { lambda0: f64, profile: ProfileShape },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![Format::Json, Format::Csv],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub nu: f64,
    pub boundary: BoundarySpec,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub oracle: Option<OracleSpec>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// A parsed configuration with everything the commands need already built.
pub struct Prepared {
    pub config: RunConfig,
    pub grid: Arc<PolarGrid>,
    pub trace: BoundaryTrace,
    pub solver: SolverConfig,
}

/// Line of the first occurrence of `"key"` in the raw text.
fn line_of(raw: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    raw.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

fn invalid(raw: &str, key: &str, msg: impl std::fmt::Display) -> CliError {
    match line_of(raw, key) {
        Some(line) => CliError::Config(format!("line {line}: {key}: {msg}")),
        None => CliError::Config(format!("{key}: {msg}")),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Prepared, CliError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&raw)
    }

    /// Parses and validates every precondition before any computation.
    pub fn parse(raw: &str) -> Result<Prepared, CliError> {
        let config: RunConfig = serde_json::from_str(raw).map_err(|e| CliError::Config(e.to_string()))?;
        config.prepare(raw)
    }

    fn prepare(self, raw: &str) -> Result<Prepared, CliError> {
        let g = &self.grid;
        let grid = PolarGrid::new(g.n_r, g.n_theta, g.r_inner, g.r_outer).map_err(|e| invalid(raw, "grid", e))?;
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(invalid(raw, "nu", format!("must be positive and finite, got {}", self.nu)));
        }
        let s = &self.solver;
        let solver = SolverConfig {
            nu: self.nu,
            lambda: s.lambda,
            method: s.method,
            tol: s.tol,
            max_iter: s.max_iter,
            damping: s.damping,
        };
        solver.validate().map_err(|e| invalid(raw, "solver", e))?;
        let trace = make_trace(&self.boundary, g.r_inner, g.r_outer, self.nu).map_err(|e| invalid(raw, "boundary", e))?;
        trace.ensure_fits(&grid).map_err(|e| invalid(raw, "boundary", e))?;
        if let Some(sw) = &self.sweep {
            check_sweep(sw).map_err(|m| invalid(raw, "values", m))?;
        }
        if let Some(o) = &self.oracle {
            check_oracle(o, g, self.nu).map_err(|m| invalid(raw, "oracle", m))?;
        }
        if self.output.formats.is_empty() {
            return Err(invalid(raw, "formats", "at least one output format is required"));
        }
        Ok(Prepared {
            grid,
            trace,
            solver,
            config: self,
        })
    }
}

fn check_sweep(sw: &SweepConfig) -> Result<(), String> {
    let v = &sw.values;
    if v.is_empty() {
        return Err("sweep needs at least one value".into());
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err("sweep values must be finite".into());
    }
    let up = v.windows(2).all(|p| p[1] > p[0]);
    let down = v.windows(2).all(|p| p[1] < p[0]);
    if !(up || down) {
        return Err("sweep values must be strictly monotone".into());
    }
    if sw.parameter == SweepParameter::Lambda && v.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err("lambda values must lie in [0, 1]".into());
    }
    Ok(())
}

fn check_oracle(o: &OracleSpec, g: &GridConfig, nu: f64) -> Result<(), String> {
    match o {
        OracleSpec::Couette { omega1, omega2 } if !(omega1.is_finite() && omega2.is_finite()) => {
            Err("angular velocities must be finite".into())
        }
        OracleSpec::RadialSource { flux } if !flux.is_finite() => Err("flux must be finite".into()),
        OracleSpec::Spiral { flux, amplitude } => SpiralParams::new(*flux, *amplitude, nu, g.r_inner)
            .map(|_| ())
            .map_err(|e| e.to_string()),
        OracleSpec::Amick { lambda0, profile } => AmickProfile::new(profile.clone(), *lambda0, g.r_inner, g.r_outer)
            .map(|_| ())
            .map_err(|e| e.to_string()),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const COUETTE: &str = r#"{
  "grid": {"n_r": 16, "n_theta": 8},
  "nu": 1.0,
  "boundary": {"preset": "couette", "omega1": 1.0, "omega2": -0.5}
}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let p = RunConfig::parse(COUETTE).unwrap();
        assert_eq!(p.config.grid.r_outer, 2.0);
        assert_eq!(p.solver.method, Method::Newton);
        assert_eq!(p.config.output.formats, vec![Format::Json, Format::Csv]);
        assert_eq!(p.grid.n_r(), 16);
    }

    #[test]
    fn errors_name_the_line() {
        let bad = COUETTE.replace("\"nu\": 1.0", "\"nu\": -1.0");
        match RunConfig::parse(&bad) {
            Err(CliError::Config(m)) => assert!(m.starts_with("line 3: nu"), "{m}"),
            _ => panic!(),
        }
        let syntax = COUETTE.replace("\"nu\": 1.0,", "\"nu\": 1.0");
        match RunConfig::parse(&syntax) {
            Err(CliError::Config(m)) => assert!(m.contains("line 4"), "{m}"),
            _ => panic!(),
        }
    }

    #[test]
    fn rejects_bad_sections() {
        let cases = [
            COUETTE.replace("\"n_r\": 16", "\"n_r\": 2"),
            COUETTE.replace("\"nu\": 1.0", "\"nu\": 1.0, \"solver\": {\"lambda\": 2.0}"),
            COUETTE.replace("\"nu\": 1.0", "\"nu\": 1.0, \"sweep\": {\"parameter\": \"flux\", \"values\": [0, 2, 1]}"),
            COUETTE.replace("\"nu\": 1.0", "\"nu\": 1.0, \"oracle\": {\"kind\": \"spiral\", \"flux\": 12.566370614359172, \"amplitude\": 1.0}"),
            COUETTE.replace("\"nu\": 1.0", "\"nu\": 1.0, \"colour\": 3"),
            COUETTE.replace("\"nu\": 1.0", "\"nu\": 1.0, \"output\": {\"formats\": []}"),
        ];
        for c in cases {
            assert!(matches!(RunConfig::parse(&c), Err(CliError::Config(_))), "{c}");
        }
    }
}
