//! The `solve`, `sweep` and `diagnose` commands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use annulus_core::diagnostics::field_record;
use annulus_core::fields::flux_inner;
use annulus_core::navier_stokes::{self, sweep, ContinuationTrace};
use annulus_core::oracle::{amick_flow, couette, radial_source, spiral_flow, AmickProfile, OracleFlow};
use annulus_core::{DiagnosticsRecord, PolarGrid, SolveReport};
use serde::Serialize;
use std::sync::Arc;

use crate::config::{Format, OracleSpec, Prepared, RunConfig};
use crate::fields_io::read_fields;
use crate::{io_error, CliError, EXIT_NOT_CONVERGED, EXIT_OK};

#[derive(Serialize)]
struct OracleSummary {
    kind: &'static str,
    /// L² distance to the computed velocity; absent for Euler profiles.
    velocity_l2_error: Option<f64>,
    flux: f64,
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    config: &'a RunConfig,
    report: &'a SolveReport,
    oracle: Option<OracleSummary>,
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    config: &'a RunConfig,
    trace: &'a ContinuationTrace,
}

#[derive(Serialize)]
struct Meta {
    command: &'static str,
    version: &'static str,
    started_unix: f64,
    elapsed_seconds: f64,
    threads: usize,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_error(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| io_error(path, e))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| io_error(path, e))
}

fn out_dir(config: &RunConfig, over: Option<&Path>) -> Result<PathBuf, CliError> {
    let dir = over.map_or_else(|| config.output.directory.clone(), Path::to_path_buf);
    fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    Ok(dir)
}

fn write_meta(dir: &Path, command: &'static str, started_unix: f64, clock: Instant) -> Result<(), CliError> {
    let meta = Meta {
        command,
        version: env!("CARGO_PKG_VERSION"),
        started_unix,
        elapsed_seconds: clock.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
    };
    write_json(&dir.join("meta.json"), &meta)
}

fn oracle_flow(spec: &OracleSpec, grid: &Arc<PolarGrid>, nu: f64) -> Result<OracleFlow, CliError> {
    Ok(match spec {
        OracleSpec::Couette { omega1, omega2 } => couette(grid, *omega1, *omega2),
        OracleSpec::RadialSource { flux } => radial_source(grid, *flux, nu),
        OracleSpec::Spiral { flux, amplitude } => spiral_flow(grid, *flux, *amplitude, nu)?,
        OracleSpec::Amick { lambda0, profile } => {
            let prof = AmickProfile::new(profile.clone(), *lambda0, grid.r_inner(), grid.r_outer())?;
            amick_flow(grid, &prof)?
        }
    })
}

fn oracle_kind(spec: &OracleSpec) -> &'static str {
    match spec {
        OracleSpec::Couette { .. } => "couette",
        OracleSpec::RadialSource { .. } => "radial_source",
        OracleSpec::Spiral { .. } => "spiral",
        OracleSpec::Amick { .. } => "amick",
    }
}

/// Solves the configured problem and writes `report.json`, `fields.csv`
/// and `meta.json`. A configured oracle is compared against and dumped to
/// `oracle_fields.csv`.
pub fn cmd_solve(prep: &Prepared, over: Option<&Path>, quiet: bool) -> Result<i32, CliError> {
    let (started, clock) = (unix_now(), Instant::now());
    let cfg = &prep.config;
    let dir = out_dir(cfg, over)?;
    let report = navier_stokes::solve(&prep.grid, &prep.trace, &prep.solver)?;

    let mut oracle = None;
    if let Some(spec) = &cfg.oracle {
        let flow = oracle_flow(spec, &prep.grid, cfg.nu)?;
        let exact = !matches!(spec, OracleSpec::Amick { .. });
        oracle = Some(OracleSummary {
            kind: oracle_kind(spec),
            velocity_l2_error: exact.then(|| report.u.sub(&flow.velocity).l2_norm()),
            flux: flux_inner(&flow.velocity),
        });
        if cfg.output.wants(Format::Csv) {
            let path = dir.join("oracle_fields.csv");
            flow.velocity
                .write_csv(Some(&flow.pressure), create(&path)?)
                .map_err(|e| io_error(&path, e))?;
        }
    }

    if cfg.output.wants(Format::Json) {
        let out = SolveOutput {
            config: cfg,
            report: &report,
            oracle,
        };
        write_json(&dir.join("report.json"), &out)?;
    }
    if cfg.output.wants(Format::Csv) {
        let path = dir.join("fields.csv");
        report
            .u
            .write_csv(Some(&report.p), create(&path)?)
            .map_err(|e| io_error(&path, e))?;
    }
    write_meta(&dir, "solve", started, clock)?;
    if !quiet {
        let last = report.residual_history.last().copied().unwrap_or(f64::NAN);
        println!(
            "{} after {} iterations, residual {last:.3e}, J = {:.6e}, flux error {:.3e}",
            if report.converged { "converged" } else { "NOT converged" },
            report.iterations,
            report.j,
            report.flux_error
        );
        println!("wrote {}", dir.display());
    }
    Ok(if report.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// Runs the configured continuation and writes `trace.csv`, `sweep.json`
/// and `meta.json`.
pub fn cmd_sweep(prep: &Prepared, over: Option<&Path>, quiet: bool) -> Result<i32, CliError> {
    let (started, clock) = (unix_now(), Instant::now());
    let cfg = &prep.config;
    let sw = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep: section missing from configuration".into()))?;
    let dir = out_dir(cfg, over)?;
    let trace = sweep(&prep.grid, &prep.trace, &prep.solver, sw.parameter, &sw.values)?;

    if cfg.output.wants(Format::Csv) {
        let path = dir.join("trace.csv");
        let mut w = csv::Writer::from_writer(create(&path)?);
        let err = |e: csv::Error| io_error(&path, e);
        w.write_record(["parameter", "value", "J", "converged", "iterations"]).map_err(err)?;
        for p in &trace.points {
            w.write_record([
                trace.parameter.name().to_string(),
                format!("{:e}", p.value),
                format!("{:.16e}", p.j),
                p.converged.to_string(),
                p.iterations.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| io_error(&path, e))?;
    }
    if cfg.output.wants(Format::Json) {
        write_json(&dir.join("sweep.json"), &SweepOutput { config: cfg, trace: &trace })?;
    }
    write_meta(&dir, "sweep", started, clock)?;
    if !quiet {
        for p in &trace.points {
            println!(
                "{} = {:>10.4}  J = {:.6e}  {}{}",
                trace.parameter.name(),
                p.value,
                p.j,
                if p.converged { "converged" } else { "FAILED" },
                if p.bisection { " (bisection)" } else { "" }
            );
        }
        if let Some(i) = trace.first_failure {
            println!("first failure at point {i}");
        }
    }
    Ok(if trace.all_converged() { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// Diagnostics of a stored field pair, taken as already normalized; `flux`
/// selects the carrier used as extension in the identities.
pub fn cmd_diagnose(
    fields: &Path,
    lambda: f64,
    nu: f64,
    flux: f64,
    out: &Path,
    quiet: bool,
) -> Result<i32, CliError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(CliError::Config(format!("lambda must be finite and non-negative, got {lambda}")));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(CliError::Config(format!("nu must be positive and finite, got {nu}")));
    }
    if !flux.is_finite() {
        return Err(CliError::Config(format!("flux must be finite, got {flux}")));
    }
    let dump = read_fields(fields)?;
    let record: DiagnosticsRecord = field_record(&dump.velocity, &dump.pressure, lambda, nu, flux)?;
    fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
    let path = out.join("diagnostics.json");
    write_json(&path, &record)?;
    if !quiet {
        println!(
            "p1 = {:.6e}, p2 = {:.6e}, max principle {} (margin {:.3e}), bernoulli {:.3e}",
            record.p1,
            record.p2,
            if record.max_principle_ok { "ok" } else { "VIOLATED" },
            record.max_principle_margin,
            record.bernoulli_deviation
        );
        println!("wrote {}", path.display());
    }
    Ok(EXIT_OK)
}
