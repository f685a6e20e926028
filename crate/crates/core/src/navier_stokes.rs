//! Picard and Newton iteration for the steady problem along the convection
//! homotopy `−νΔu + λ(u·∇)u + ∇p = 0`, `λ ∈ [0, 1]`, and continuation in
//! `λ` or in the flux.
//!
//! Iterates are stored as stream-function/vorticity states of the full
//! velocity `u = u_F + curl Ψ`; the flux carrier is never touched. The
//! convergence residual is the Dirichlet norm of the velocity of
//! `S⁻¹F(x)`, the defect of the Picard fixed-point map, where `S` is the
//! Stokes operator and `F` the collocation residual. Newton corrections
//! solve `S⁻¹J δ = S⁻¹F` by restarted GMRES; `J` is only applied, never
//! assembled.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryTrace;
use crate::collocation::StreamOperator;
use crate::diagnostics::{solution_record, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::fields::{dirichlet_norm, flux_inner, stream_function, trilinear, ScalarField, VelocityField};
use crate::grid::PolarGrid;
use crate::krylov::gmres;
use crate::stokes::{fit_pressure, stokes_solve, weak_residual, PressureFit, StokesSolution};

const NEWTON_RTOL: f64 = 1e-13;
const NEWTON_ACCEPT: f64 = 1e-8;
const GMRES_RESTART: usize = 60;
const GMRES_MAX_ITER: usize = 600;
/// Growth of the residual over its initial value that ends a diverging run.
const BLOW_UP: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Picard,
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub nu: f64,
    pub lambda: f64,
    pub method: Method,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nu: 1.0,
            lambda: 1.0,
            method: Method::Newton,
            tol: 1e-10,
            max_iter: 200,
            damping: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return bad(format!("nu must be positive and finite, got {}", self.nu));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad(format!("damping must lie in (0, 1], got {}", self.damping));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        Ok(())
    }
}

/// Outcome of [`FlowProblem::solve`]. Fields are skipped in serialization;
/// the scalar summary and diagnostics are kept.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub u: VelocityField,
    #[serde(skip)]
    pub w: VelocityField,
    #[serde(skip)]
    pub p: ScalarField,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "F")]
    pub flux: f64,
    pub lambda: f64,
    pub nu: f64,
    pub method: Method,
    pub converged: bool,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    /// Damped Picard took over after a singular Newton Jacobian.
    pub picard_fallback: bool,
    /// `|flux_inner(u) − 𝓕|`.
    pub flux_error: f64,
    /// Weak-form residual against the solenoidal test basis.
    pub weak_residual: f64,
    /// `|∫(u·∇)w·w|`.
    pub energy_cancellation: f64,
    /// Relative non-gradient part of the momentum forcing.
    pub pressure_defect: f64,
    pub diagnostics: DiagnosticsRecord,
}

/// A boundary datum with its Stokes extension, ready for nonlinear solves.
pub struct FlowProblem {
    trace: BoundaryTrace,
    stokes: StokesSolution,
    op: StreamOperator,
    base: DMatrix<f64>,
}

impl FlowProblem {
    pub fn new(grid: &Arc<PolarGrid>, a: &BoundaryTrace, nu: f64) -> Result<Self> {
        let stokes = stokes_solve(grid, a, nu)?;
        let op = StreamOperator::new(grid, nu, a.flux(), &a.stream_data(grid)?)?;
        let base = op.solve_stokes()?;
        Ok(Self {
            trace: a.clone(),
            stokes,
            op,
            base,
        })
    }

    pub fn grid(&self) -> &Arc<PolarGrid> {
        self.op.grid()
    }

    pub fn trace(&self) -> &BoundaryTrace {
        &self.trace
    }

    pub fn nu(&self) -> f64 {
        self.op.nu()
    }

    pub fn flux(&self) -> f64 {
        self.op.flux()
    }

    /// The Stokes extension `U`.
    pub fn stokes(&self) -> &StokesSolution {
        &self.stokes
    }

    fn check_nu(&self, cfg: &SolverConfig) -> Result<()> {
        cfg.validate()?;
        if (cfg.nu - self.nu()).abs() > 1e-15 * self.nu() {
            return Err(Error::InvalidConfig(format!(
                "config viscosity {} differs from the problem's {}",
                cfg.nu,
                self.nu()
            )));
        }
        Ok(())
    }

    /// State of `u = U + w`; `w` must have zero flux and zero trace.
    fn state_of(&self, w: &VelocityField) -> Result<DMatrix<f64>> {
        if !w.grid().same_as(self.grid()) {
            return Err(Error::GridMismatch);
        }
        let psi_w = stream_function(w)?;
        let n = self.grid().n_r();
        let psi = self.base.rows(0, n) + psi_w.coefficients();
        Ok(self.op.state_from_psi(&psi))
    }

    fn perturbation(&self, state: &DMatrix<f64>) -> VelocityField {
        self.op.velocity(state).sub(&self.stokes.velocity)
    }

    fn picard_defect(&self, state: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
        self.op.solve_blocks(&self.op.residual(state, lambda))
    }

    /// Solves `S⁻¹J δ = S⁻¹F` by GMRES from the Picard guess `δ = S⁻¹F`.
    /// Stagnation is reported as a singular Jacobian.
    fn newton_correction(&self, state: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
        let d = self.picard_defect(state, lambda)?;
        self.newton_from_defect(state, &d, lambda)
    }

    fn newton_from_defect(&self, state: &DMatrix<f64>, d: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
        let apply = |v: &DMatrix<f64>| self.op.solve_blocks(&self.op.linearized(state, v, lambda));
        let out = gmres(apply, d, d.clone(), NEWTON_RTOL, GMRES_RESTART, GMRES_MAX_ITER)?;
        if !(out.relative_residual <= NEWTON_ACCEPT) || out.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularJacobian {
                lambda,
                flux: self.flux(),
            });
        }
        Ok(out.x)
    }

    /// One step of the explicit fixed-point map: the Stokes problem with the
    /// convective terms evaluated at `w`, relaxed by `cfg.damping`.
    pub fn picard_step(&self, w: &VelocityField, cfg: &SolverConfig) -> Result<VelocityField> {
        self.check_nu(cfg)?;
        let x = self.state_of(w)?;
        let d = self.picard_defect(&x, cfg.lambda)?;
        Ok(self.perturbation(&(x - d * cfg.damping)))
    }

    /// One full Newton step (both convective slots linearized).
    pub fn newton_step(&self, w: &VelocityField, cfg: &SolverConfig) -> Result<VelocityField> {
        self.check_nu(cfg)?;
        let x = self.state_of(w)?;
        let dx = self.newton_correction(&x, cfg.lambda)?;
        Ok(self.perturbation(&(x - dx)))
    }

    /// `‖S⁻¹F(U + w)‖_H`, the quantity driven below `tol` by [`solve`](Self::solve).
    pub fn residual_norm(&self, w: &VelocityField, lambda: f64) -> Result<f64> {
        let x = self.state_of(w)?;
        Ok(self.op.stream_norm(&self.picard_defect(&x, lambda)?))
    }

    /// `‖J⁻¹F(U + w)‖_H`, the size of the Newton correction at `w`.
    pub fn newton_correction_norm(&self, w: &VelocityField, lambda: f64) -> Result<f64> {
        let x = self.state_of(w)?;
        Ok(self.op.stream_norm(&self.newton_correction(&x, lambda)?))
    }

    /// Iterates from `w = 0` (or `warm`) until the residual drops below
    /// `cfg.tol`. Non-convergence is reported through `converged = false`.
    pub fn solve(&self, cfg: &SolverConfig, warm: Option<&VelocityField>) -> Result<SolveReport> {
        self.check_nu(cfg)?;
        let lambda = cfg.lambda;
        let mut x = match warm {
            Some(w) => self.state_of(w)?,
            None => self.base.clone(),
        };
        let mut history = Vec::new();
        let mut converged = false;
        let mut fallback = false;
        let mut iterations = 0;
        loop {
            let d = self.picard_defect(&x, lambda)?;
            let res = self.op.stream_norm(&d);
            history.push(res);
            if res < cfg.tol {
                converged = true;
                break;
            }
            let blown_up = res > BLOW_UP * history[0].max(1.0);
            if !res.is_finite() || blown_up || iterations >= cfg.max_iter {
                break;
            }
            iterations += 1;
            if cfg.method == Method::Newton && !fallback {
                match self.newton_from_defect(&x, &d, lambda) {
                    Ok(dx) => {
                        x -= dx * cfg.damping;
                        continue;
                    }
                    Err(Error::SingularJacobian { .. }) => fallback = true,
                    Err(e) => return Err(e),
                }
            }
            let damping = if fallback { cfg.damping.min(0.5) } else { cfg.damping };
            x -= d * damping;
        }
        self.report(x, cfg, converged, iterations, history, fallback)
    }

    fn report(
        &self,
        x: DMatrix<f64>,
        cfg: &SolverConfig,
        converged: bool,
        iterations: usize,
        residual_history: Vec<f64>,
        picard_fallback: bool,
    ) -> Result<SolveReport> {
        let u = self.op.velocity(&x);
        let w = u.sub(&self.stokes.velocity);
        let j = dirichlet_norm(&w);
        let post = fit_pressure(&u, cfg.lambda, cfg.nu).and_then(|fit| {
            let rec = solution_record(&u, &w, &self.stokes.velocity, &fit.pressure, cfg.lambda, cfg.nu)?;
            Ok((fit, rec))
        });
        // a diverged iterate may be too large for the post-processing
        let (fit, diagnostics) = match post {
            Ok(v) => v,
            Err(_) if !converged => (
                PressureFit {
                    pressure: ScalarField::constant(self.grid(), f64::NAN),
                    defect: f64::NAN,
                },
                DiagnosticsRecord::undefined(),
            ),
            Err(e) => return Err(e),
        };
        Ok(SolveReport {
            flux_error: (flux_inner(&u) - self.flux()).abs(),
            weak_residual: weak_residual(&u, Some((cfg.lambda, cfg.nu))),
            energy_cancellation: trilinear(&u, &w, &w).abs(),
            pressure_defect: fit.defect,
            j,
            flux: self.flux(),
            lambda: cfg.lambda,
            nu: cfg.nu,
            method: cfg.method,
            converged,
            iterations,
            residual_history,
            picard_fallback,
            diagnostics,
            u,
            w,
            p: fit.pressure,
        })
    }
}

/// Convenience wrapper: build the problem for `a` and solve from `w = 0`.
pub fn solve(grid: &Arc<PolarGrid>, a: &BoundaryTrace, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    FlowProblem::new(grid, a, cfg.nu)?.solve(cfg, None)
}

/// `‖−νΔu + λ(u·∇)u + ∇p‖_{L²}` plus `‖div u‖_{L²}`.
pub fn momentum_residual(u: &VelocityField, p: &ScalarField, lambda: f64, nu: f64) -> f64 {
    let grad = VelocityField {
        u_r: p.dr(),
        u_theta: p.dtheta().scale_radial(|r| 1.0 / r),
    };
    let res = u
        .vector_laplacian()
        .scale(-nu)
        .add(&VelocityField::advect(u, u).scale(lambda))
        .add(&grad);
    res.l2_norm() + crate::fields::divergence(u).l2_norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Lambda,
    Flux,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lambda => "lambda",
            Self::Flux => "flux",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationPoint {
    pub value: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Midpoint inserted after a failed step.
    pub bisection: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationTrace {
    pub parameter: SweepParameter,
    pub points: Vec<ContinuationPoint>,
    /// Index into `points` of the first unrecovered failure.
    pub first_failure: Option<usize>,
}

impl ContinuationTrace {
    pub fn all_converged(&self) -> bool {
        self.first_failure.is_none()
    }
}

/// Warm-started continuation over strictly monotone `values`. A failed step
/// is retried once through the midpoint from the last converged value;
/// if that also fails the point is recorded as diverged.
pub fn sweep(
    grid: &Arc<PolarGrid>,
    a: &BoundaryTrace,
    cfg: &SolverConfig,
    parameter: SweepParameter,
    values: &[f64],
) -> Result<ContinuationTrace> {
    cfg.validate()?;
    if values.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one value".into()));
    }
    let increasing = values.windows(2).all(|p| p[1] > p[0]);
    let decreasing = values.windows(2).all(|p| p[1] < p[0]);
    if !(increasing || decreasing) || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("sweep values must be strictly monotone".into()));
    }

    let attempt = |value: f64, warm: Option<&VelocityField>| -> Result<SolveReport> {
        let mut c = cfg.clone();
        let trace = match parameter {
            SweepParameter::Lambda => {
                c.lambda = value;
                c.validate()?;
                a.clone()
            }
            SweepParameter::Flux => a.with_flux(value),
        };
        FlowProblem::new(grid, &trace, c.nu)?.solve(&c, warm)
    };
    let point = |value: f64, r: &SolveReport, bisection: bool| ContinuationPoint {
        value,
        j: r.j,
        converged: r.converged,
        iterations: r.iterations,
        bisection,
    };

    let mut points = Vec::new();
    let mut first_failure = None;
    let mut last: Option<(f64, VelocityField)> = None;
    for &value in values {
        let warm = last.as_ref().map(|(_, w)| w);
        let report = attempt(value, warm)?;
        if report.converged {
            points.push(point(value, &report, false));
            last = Some((value, report.w));
            continue;
        }
        let mut recovered = false;
        if let Some((prev, w_prev)) = &last {
            let mid = 0.5 * (prev + value);
            let half = attempt(mid, Some(w_prev))?;
            points.push(point(mid, &half, true));
            if half.converged {
                let retry = attempt(value, Some(&half.w))?;
                points.push(point(value, &retry, false));
                if retry.converged {
                    recovered = true;
                    last = Some((value, retry.w));
                }
            } else {
                points.push(point(value, &report, false));
            }
        } else {
            points.push(point(value, &report, false));
        }
        if !recovered && first_failure.is_none() {
            first_failure = Some(points.len() - 1);
        }
    }
    Ok(ContinuationTrace {
        parameter,
        points,
        first_failure,
    })
}
