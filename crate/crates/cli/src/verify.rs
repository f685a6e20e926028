//! Oracle and identity checks run by `annulus-flux verify`.

use std::f64::consts::PI;
use std::fmt::Write;
use std::sync::Arc;

use annulus_core::boundary::{make_trace, solenoidal_extension, AngularSeries, CircleData};
use annulus_core::diagnostics::{
    bernoulli_deviation, boundary_pressures, head_pressure, identity_37, identity_energy, max_principle_check,
    normalize,
};
use annulus_core::fields::{flux_inner, stream_function};
use annulus_core::navier_stokes::{self, sweep, SweepParameter};
use annulus_core::oracle::{
    amick_flow, amick_pressure_drop, couette, radial_source, spiral_flow, AmickProfile, OracleFlow, ProfileShape,
};
use annulus_core::stokes::stokes_solve;
use annulus_core::{BoundarySpec, BoundaryTrace, PolarGrid, Result, ScalarField, SolveReport, SolverConfig, VelocityField};

pub const DEFAULT_N_R: usize = 32;
pub const DEFAULT_N_THETA: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    /// `value ≤ tolerance`.
    AtMost,
    /// `value > tolerance`.
    Above,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub bound: Bound,
}

impl Check {
    fn new(name: &str, value: f64, bound: Bound, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            tolerance,
            bound,
        }
    }

    pub fn pass(&self) -> bool {
        match self.bound {
            Bound::AtMost => self.value <= self.tolerance,
            Bound::Above => self.value > self.tolerance,
        }
    }

    /// Distance to the threshold, positive when passing.
    pub fn margin(&self) -> f64 {
        match self.bound {
            Bound::AtMost => self.tolerance - self.value,
            Bound::Above => self.value - self.tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub n_r: usize,
    pub n_theta: usize,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(Check::pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "verify on {}x{} grid", self.n_r, self.n_theta);
        let _ = writeln!(
            s,
            "{:<38} {:>11}    {:>9} {:>11}  result",
            "check", "value", "tolerance", "margin"
        );
        for c in &self.checks {
            let op = match c.bound {
                Bound::AtMost => "<=",
                Bound::Above => "> ",
            };
            let _ = writeln!(
                s,
                "{:<38} {:>11.3e} {op} {:>9.1e} {:>11.3e}  {}",
                c.name,
                c.value,
                c.tolerance,
                c.margin(),
                if c.pass() { "PASS" } else { "FAIL" }
            );
        }
        let failed = self.checks.iter().filter(|c| !c.pass()).count();
        let _ = writeln!(s, "{} checks, {} failed", self.checks.len(), failed);
        s
    }
}

/// Couette rotation with non-axisymmetric wall motion; flux is set per use.
pub fn sweep_datum() -> BoundaryTrace {
    BoundaryTrace::new_unchecked(
        1.0,
        2.0,
        CircleData {
            normal: AngularSeries {
                mean: 0.0,
                cos: vec![0.1, 0.0, 0.05],
                sin: vec![0.0, -0.2],
            },
            tangential: AngularSeries {
                mean: 1.0,
                cos: vec![0.0, 0.3],
                sin: vec![0.1],
            },
        },
        CircleData {
            normal: AngularSeries {
                mean: 0.0,
                cos: vec![],
                sin: vec![0.2, 0.0, 0.1],
            },
            tangential: AngularSeries {
                mean: -0.5,
                cos: vec![0.2],
                sin: vec![],
            },
        },
    )
}

pub fn preset_profiles() -> Vec<ProfileShape> {
    vec![
        ProfileShape::SinSquared { amplitude: 1.0 },
        ProfileShape::PolyBump { k: 4, amplitude: 1.0 },
        ProfileShape::PolyBump { k: 8, amplitude: 1.0 },
        ProfileShape::LocalBump {
            center: 1.5,
            half_width: 0.3,
            k: 4,
            amplitude: 1.0,
        },
    ]
}

/// Bump supported in (1.9, 2.0).
pub fn concentrated_profile() -> ProfileShape {
    ProfileShape::LocalBump {
        center: 1.95,
        half_width: 0.05,
        k: 4,
        amplitude: 1.0,
    }
}

struct Suite {
    grid: Arc<PolarGrid>,
    checks: Vec<Check>,
    /// Flux errors of oracles and converged solves.
    flux_errors: Vec<f64>,
    /// Max-principle margin / scale of converged solves.
    solve_margins: Vec<f64>,
}

fn amick(grid: &Arc<PolarGrid>, shape: ProfileShape) -> Result<(AmickProfile, OracleFlow)> {
    let prof = AmickProfile::new(shape, 1.0, 1.0, 2.0)?;
    let flow = amick_flow(grid, &prof)?;
    Ok((prof, flow))
}

fn radial_bernoulli(flow: &OracleFlow) -> Result<f64> {
    let u = &flow.velocity;
    let remainder = u.sub(&annulus_core::boundary::flux_carrier(u.grid(), flux_inner(u)));
    let psi = stream_function(&remainder)?;
    Ok(bernoulli_deviation(&head_pressure(u, &flow.pressure, 1.0), &psi)?.deviation)
}

impl Suite {
    fn push(&mut self, name: &str, value: Result<f64>, bound: Bound, tol: f64) {
        self.checks.push(Check::new(name, value.unwrap_or(f64::NAN), bound, tol));
    }

    fn record_solve(&mut self, rep: &SolveReport) {
        if rep.converged {
            self.flux_errors.push(rep.flux_error);
            let mp = max_principle_check(&head_pressure(&rep.u, &rep.p, rep.lambda));
            self.solve_margins.push(mp.margin / mp.scale);
        }
    }

    fn solve(&mut self, trace: &BoundaryTrace) -> Result<SolveReport> {
        let rep = navier_stokes::solve(&self.grid, trace, &SolverConfig::default())?;
        self.record_solve(&rep);
        Ok(rep)
    }

    fn stokes(&mut self) {
        let exact = couette(&self.grid, 1.0, -0.5);
        let a = make_trace(&BoundarySpec::Couette { omega1: 1.0, omega2: -0.5 }, 1.0, 2.0, 1.0);
        let err = a.and_then(|a| stokes_solve(&self.grid, &a, 1.0)).map(|s| {
            s.velocity.sub(&exact.velocity).l2_norm() / exact.velocity.l2_norm()
        });
        self.push("stokes_couette_rel_l2", err, Bound::AtMost, 1e-10);
        self.flux_errors.push(flux_inner(&exact.velocity).abs());
    }

    fn nonlinear_oracles(&mut self) {
        let cases: [(&str, BoundarySpec, Result<OracleFlow>); 2] = [
            (
                "ns_radial_source",
                BoundarySpec::PureFlux { flux: 2.0 * PI },
                Ok(radial_source(&self.grid, 2.0 * PI, 1.0)),
            ),
            (
                "ns_spiral",
                BoundarySpec::Spiral {
                    flux: 2.0 * PI,
                    amplitude: 1.0,
                },
                spiral_flow(&self.grid, 2.0 * PI, 1.0, 1.0),
            ),
        ];
        for (name, spec, exact) in cases {
            let rep = make_trace(&spec, 1.0, 2.0, 1.0).and_then(|a| self.solve(&a));
            let err = match (&rep, &exact) {
                (Ok(r), Ok(e)) if r.converged => Ok(r.u.sub(&e.velocity).l2_norm()),
                _ => Ok(f64::NAN),
            };
            if let Ok(e) = &exact {
                self.flux_errors.push((flux_inner(&e.velocity) - 2.0 * PI).abs());
            }
            self.push(&format!("{name}_l2_error"), err, Bound::AtMost, 1e-8);
            let iters = rep.as_ref().map(|r| if r.converged { r.iterations as f64 } else { f64::NAN });
            self.push(&format!("{name}_newton_iterations"), iters.map_err(Clone::clone), Bound::AtMost, 8.0);
            if name == "ns_spiral" {
                let dev = rep.map(|r| if r.converged { r.diagnostics.bernoulli_deviation } else { f64::NAN });
                self.push("bernoulli_spiral_solve", dev, Bound::AtMost, 1e-6);
            }
        }
    }

    fn identities(&mut self) {
        let g = Arc::clone(&self.grid);
        let base = amick(&g, ProfileShape::SinSquared { amplitude: 1.0 });
        let normalized = base.as_ref().map_err(Clone::clone).and_then(|(_, f)| normalize(&f.velocity, &f.pressure));
        for flux in [0.0, 1.0, 2.0] {
            let defect = normalized.as_ref().map_err(Clone::clone).and_then(|nz| {
                let ext = solenoidal_extension(&g, &sweep_datum().with_flux(flux))?.field;
                self.flux_errors.push((flux_inner(&ext) - flux).abs());
                let bp = boundary_pressures(&nz.p_hat);
                Ok(identity_energy(&nz.w_hat, &ext, 1.0, 1.0, bp.p1, bp.p2, flux).identity.defect)
            });
            self.push(&format!("energy_identity_flux_{flux}"), defect, Bound::AtMost, 1e-8);
        }
        let defect = normalized.as_ref().map_err(Clone::clone).map(|nz| {
            let bp = boundary_pressures(&nz.p_hat);
            identity_37(&head_pressure(&nz.w_hat, &nz.p_hat, 1.0), bp.p1, bp.p2, &g).identity.defect
        });
        self.push("head_integral_identity", defect, Bound::AtMost, 1e-8);
    }

    /// Profiles of limited smoothness converge algebraically, so the
    /// axisymmetric pair is evaluated with twice the radial resolution.
    fn pressure_drop(&mut self) {
        let g = match PolarGrid::new(2 * self.grid.n_r(), self.grid.n_theta(), 1.0, 2.0) {
            Ok(g) => g,
            Err(e) => return self.push("pressure_drop_quadrature_vs_boundary", Err(e), Bound::AtMost, 1e-10),
        };
        let mut min_drop = f64::INFINITY;
        let mut worst = 0.0_f64;
        let mut failed = false;
        for shape in preset_profiles().into_iter().chain([concentrated_profile()]) {
            let concentrated = shape == concentrated_profile();
            match amick(&g, shape) {
                Ok((prof, flow)) => {
                    let drop = amick_pressure_drop(&prof);
                    min_drop = min_drop.min(drop);
                    self.flux_errors.push(flux_inner(&flow.velocity).abs());
                    if !concentrated {
                        let bp = boundary_pressures(&flow.pressure);
                        worst = worst.max((bp.p1 - bp.p2 - drop).abs());
                    }
                }
                Err(_) => failed = true,
            }
        }
        let fail_nan = |v: f64| if failed { f64::NAN } else { v };
        self.push("pressure_drop_min", Ok(fail_nan(min_drop)), Bound::Above, 0.0);
        self.push("pressure_drop_quadrature_vs_boundary", Ok(fail_nan(worst)), Bound::AtMost, 1e-10);
    }

    fn maximum_principle(&mut self) {
        let flagged = amick(&self.grid, concentrated_profile()).map(|(_, f)| {
            let mp = max_principle_check(&head_pressure(&f.velocity, &f.pressure, 1.0));
            mp.margin / mp.scale
        });
        self.push("max_principle_concentrated_margin", flagged, Bound::Above, 0.01);
    }

    fn bernoulli(&mut self) {
        let g = Arc::clone(&self.grid);
        let flows = [
            Ok(couette(&g, 1.0, -0.5)),
            Ok(radial_source(&g, 2.0 * PI, 1.0)),
            spiral_flow(&g, 2.0 * PI, 1.0, 1.0),
            amick(&g, ProfileShape::SinSquared { amplitude: 1.0 }).map(|p| p.1),
        ];
        let mut worst: Result<f64> = Ok(0.0);
        for f in flows {
            worst = worst.and_then(|w| Ok(w.max(radial_bernoulli(&f?)?)));
        }
        self.push("bernoulli_radial_oracles", worst, Bound::AtMost, 1e-8);

        // u_θ = r sin θ with its formal Φ = |u|²/2 and ψ = −r² sin θ / 2
        let u = VelocityField::from_fn(&g, |_, _| 0.0, |r, t| r * t.sin());
        let psi = ScalarField::from_fn(&g, |r, t| -0.5 * r * r * t.sin());
        let counter = bernoulli_deviation(&u.speed_squared().scale(0.5), &psi).map(|b| b.deviation);
        self.push("bernoulli_counter_case", counter, Bound::Above, 0.1);
    }

    fn sweeps(&mut self) {
        let datum = sweep_datum();
        for (name, values) in [
            ("flux_sweep_outflow_failures", vec![0.0, 0.5, 1.0, 2.0, 5.0]),
            ("flux_sweep_small_inflow_failures", vec![-0.05, -0.1]),
        ] {
            let trace = sweep(&self.grid, &datum, &SolverConfig::default(), SweepParameter::Flux, &values);
            let failures = trace.map(|t| t.points.iter().filter(|p| !p.converged).count() as f64);
            self.push(name, failures, Bound::AtMost, 0.0);
        }
        // flux and maximum principle at every sweep point
        for flux in [0.0, 0.5, 1.0, 2.0, 5.0, -0.05, -0.1] {
            let _ = self.solve(&datum.with_flux(flux));
        }
    }

    fn convergence_order(&mut self, n_r: usize, n_theta: usize) {
        let err = |n: usize| -> Result<f64> {
            let g = PolarGrid::new(n, n_theta, 1.0, 2.0)?;
            let a = make_trace(&BoundarySpec::Spiral { flux: 2.0 * PI, amplitude: 1.0 }, 1.0, 2.0, 1.0)?;
            let rep = navier_stokes::solve(&g, &a, &SolverConfig::default())?;
            let exact = spiral_flow(&g, 2.0 * PI, 1.0, 1.0)?;
            Ok(rep.u.sub(&exact.velocity).l2_norm())
        };
        let ratio = err(n_r / 2).and_then(|coarse| Ok(coarse / err(n_r)?));
        self.push("spiral_error_ratio_half_to_full_n_r", ratio, Bound::Above, 100.0);
    }
}

/// Runs every check on an `n_r × n_theta` grid over the (1, 2)-annulus.
pub fn run_verify(n_r: usize, n_theta: usize) -> Result<VerifyReport> {
    let grid = PolarGrid::new(n_r, n_theta, 1.0, 2.0)?;
    let mut s = Suite {
        grid,
        checks: Vec::new(),
        flux_errors: Vec::new(),
        solve_margins: Vec::new(),
    };
    s.stokes();
    s.nonlinear_oracles();
    s.identities();
    s.pressure_drop();
    s.maximum_principle();
    s.bernoulli();
    s.sweeps();
    let _ = s.solve(&make_trace(&BoundarySpec::Couette { omega1: 1.0, omega2: -0.5 }, 1.0, 2.0, 1.0)?);
    let worst_margin = s.solve_margins.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    s.push("max_principle_converged_solves", Ok(worst_margin), Bound::AtMost, 1e-8);
    let worst_flux = s.flux_errors.iter().fold(0.0_f64, |a, &b| a.max(b));
    s.push("flux_exactness", Ok(worst_flux), Bound::AtMost, 1e-10);
    s.convergence_order(n_r, n_theta);
    Ok(VerifyReport {
        n_r,
        n_theta,
        checks: s.checks,
    })
}
