//! Linear solvers: the auxiliary Stokes problem for the boundary datum and
//! the pressure Poisson problem, both per angular Fourier mode.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::boundary::BoundaryTrace;
use crate::collocation::StreamOperator;
use crate::error::{Error, Result};
use crate::fields::{
    divergence, solenoidal_test_fields, w12_norm, ScalarField, VelocityField,
};
use crate::grid::PolarGrid;

/// Relative size of the non-gradient part tolerated by
/// [`pressure_from_momentum`].
pub const PRESSURE_DEFECT_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct StokesSolution {
    /// `U = u_F + curl ψ̃`.
    pub velocity: VelocityField,
    /// Mean-zero Stokes pressure.
    pub pressure: ScalarField,
    /// Stream function of `U − u_F`.
    pub stream: ScalarField,
    /// Largest nodal mismatch with the boundary datum.
    pub trace_error: f64,
    /// `max_η |∫∇U:∇η| / ‖η‖_H` over the solenoidal test basis.
    pub weak_residual: f64,
    /// `‖U‖_{W^{1,2}} / ‖a‖` (zero for zero data).
    pub bound_ratio: f64,
}

/// Solves `−νΔU + ∇p = 0`, `div U = 0`, `U = a` on the boundary.
pub fn stokes_solve(grid: &Arc<PolarGrid>, a: &BoundaryTrace, nu: f64) -> Result<StokesSolution> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::InvalidConfig(format!("viscosity must be positive, got {nu}")));
    }
    a.check_admissible()?;
    let data = a.stream_data(grid)?;
    let op = StreamOperator::new(grid, nu, a.flux(), &data)?;
    let coeffs = op.solve_stokes()?;
    let velocity = op.velocity(&coeffs);
    let stream = ScalarField::from_coefficients(grid, op.psi(&coeffs));
    let pressure = fit_pressure(&velocity, 0.0, nu)?.pressure;
    let weak_residual = weak_residual(&velocity, None);
    let proxy = a.trace_norm_proxy();
    let bound_ratio = if proxy > 0.0 { w12_norm(&velocity) / proxy } else { 0.0 };
    Ok(StokesSolution {
        trace_error: a.trace_error(&velocity),
        velocity,
        pressure,
        stream,
        weak_residual,
        bound_ratio,
    })
}

/// `max_η |ν∫∇u:∇η + λ∫(u·∇)u·η| / ‖η‖_H` over the solenoidal test basis;
/// `convection = Some((λ, ν))` adds the convective term and scales the
/// viscous one.
pub(crate) fn weak_residual(u: &VelocityField, convection: Option<(f64, f64)>) -> f64 {
    let grid = u.grid();
    let adv = convection.map(|(lambda, _)| VelocityField::advect(u, u).scale(lambda));
    let nu = convection.map_or(1.0, |(_, nu)| nu);
    solenoidal_test_fields(grid)
        .iter()
        .map(|eta| {
            let mut v = nu * u.gradient_inner(eta);
            if let Some(adv) = &adv {
                v += adv.dot_integral(eta);
            }
            v.abs() / eta.gradient_inner(eta).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Solves `−Δp = div[(w·∇)w]` with `p = p1` on Γ₁ and `p = p2` on Γ₂.
pub fn pressure_poisson(grid: &Arc<PolarGrid>, w: &VelocityField, p1: f64, p2: f64) -> Result<ScalarField> {
    if !w.grid().same_as(grid) {
        return Err(Error::GridMismatch);
    }
    let div = divergence(w).l2_norm();
    if div > 1e-8 {
        return Err(Error::NotSolenoidal { residual: div });
    }
    let n = grid.n_r();
    let source = divergence(&VelocityField::advect(w, w));
    let s_hat = source.coefficients();
    let d1 = grid.d1();
    let inv_r = DMatrix::from_diagonal(&grid.radial_vector(|r| 1.0 / r));
    let inv_r2 = DMatrix::from_diagonal(&grid.radial_vector(|r| 1.0 / (r * r)));
    let base = grid.d2() + &inv_r * d1;
    let mut coeffs = DMatrix::zeros(n, grid.n_theta());
    for col in 0..grid.n_theta() {
        let k = grid.wavenumber(col);
        let mut a = &base - &inv_r2 * (k * k) as f64;
        let mut rhs = -s_hat.column(col).into_owned();
        a.row_mut(0).fill(0.0);
        a[(0, 0)] = 1.0;
        a.row_mut(n - 1).fill(0.0);
        a[(n - 1, n - 1)] = 1.0;
        rhs[0] = if col == 0 { p2 } else { 0.0 };
        rhs[n - 1] = if col == 0 { p1 } else { 0.0 };
        let x = a.lu().solve(&rhs).ok_or(Error::LinearSolve { mode: k })?;
        coeffs.set_column(col, &x);
    }
    let mut values = grid.inverse(&coeffs);
    values.row_mut(0).fill(p2);
    values.row_mut(n - 1).fill(p1);
    Ok(ScalarField::new(grid, values))
}

/// Pressure fit together with its non-gradient defect.
#[derive(Debug, Clone)]
pub struct PressureFit {
    pub pressure: ScalarField,
    /// `‖∇p − G‖ / max(1, ‖G‖)` with `G = νΔu − λ(u·∇)u`.
    pub defect: f64,
}

/// Least-squares fit of `∇p` to `νΔu − λ(u·∇)u`, mean zero over Ω.
pub fn fit_pressure(u: &VelocityField, lambda: f64, nu: f64) -> Result<PressureFit> {
    let grid = u.grid();
    let n = grid.n_r();
    let mut force = u.vector_laplacian().scale(nu);
    if lambda != 0.0 {
        force = force.sub(&VelocityField::advect(u, u).scale(lambda));
    }
    let gr = force.u_r.coefficients();
    let gt = force.u_theta.coefficients();
    let d1 = grid.d1();
    let r = grid.r();
    let mut coeffs = DMatrix::zeros(n, grid.n_theta());

    let lsq = |a: DMatrix<f64>, b: DVector<f64>, mode: usize| -> Result<DVector<f64>> {
        let svd = a.svd(true, true);
        let tol = 1e-12 * svd.singular_values.max();
        svd.solve(&b, tol).map_err(|_| Error::LinearSolve { mode })
    };

    let p0 = lsq(d1.clone(), gr.column(0).into_owned(), 0)?;
    coeffs.set_column(0, &p0);
    for k in 1..=grid.max_mode() {
        let kf = k as f64;
        let (ca, cb) = (2 * k - 1, 2 * k);
        // cos coefficient a: ∂_r a = G_r,cos and −k a / r = G_θ,sin
        // sin coefficient b: ∂_r b = G_r,sin and  k b / r = G_θ,cos
        for (col, sign, tcol) in [(ca, -1.0, cb), (cb, 1.0, ca)] {
            let mut a = DMatrix::zeros(2 * n, n);
            let mut b = DVector::zeros(2 * n);
            a.view_mut((0, 0), (n, n)).copy_from(d1);
            for i in 0..n {
                a[(n + i, i)] = sign * kf / r[i];
                b[i] = gr[(i, col)];
                b[n + i] = gt[(i, tcol)];
            }
            coeffs.set_column(col, &lsq(a, b, k)?);
        }
    }
    let p = ScalarField::from_coefficients(grid, coeffs);
    let mean = p.integrate() / grid.area();
    let pressure = p.map(|v| v - mean);

    let grad = VelocityField {
        u_r: pressure.dr(),
        u_theta: pressure.dtheta().scale_radial(|r| 1.0 / r),
    };
    let defect = grad.sub(&force).l2_norm() / force.l2_norm().max(1.0);
    Ok(PressureFit { pressure, defect })
}

/// Pressure of a (numerical) solution of the λ-family momentum balance.
/// Fails with [`Error::NonIntegrable`] when the momentum forcing has a
/// non-gradient part above [`PRESSURE_DEFECT_TOL`].
pub fn pressure_from_momentum(u: &VelocityField, lambda: f64, nu: f64) -> Result<ScalarField> {
    let fit = fit_pressure(u, lambda, nu)?;
    if !(fit.defect <= PRESSURE_DEFECT_TOL) {
        return Err(Error::NonIntegrable { defect: fit.defect });
    }
    Ok(fit.pressure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{make_trace, BoundarySpec};
    use crate::oracle;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid(n_r: usize, n_theta: usize) -> Arc<PolarGrid> {
        PolarGrid::new(n_r, n_theta, 1.0, 2.0).unwrap()
    }

    #[test]
    fn couette_is_reproduced() {
        let g = grid(32, 16);
        let a = make_trace(&BoundarySpec::Couette { omega1: 1.0, omega2: 0.0 }, 1.0, 2.0, 1.0).unwrap();
        let sol = stokes_solve(&g, &a, 1.0).unwrap();
        let exact = oracle::couette(&g, 1.0, 0.0);
        let err = sol.velocity.sub(&exact.velocity).l2_norm() / exact.velocity.l2_norm();
        assert!(err < 1e-10, "{err}");
        assert!(sol.trace_error < 1e-9);
        assert!(sol.weak_residual < 1e-8, "{}", sol.weak_residual);
    }

    #[test]
    fn pure_flux_gives_carrier() {
        let g = grid(24, 16);
        let a = make_trace(&BoundarySpec::PureFlux { flux: 2.0 * PI }, 1.0, 2.0, 1.0).unwrap();
        let sol = stokes_solve(&g, &a, 1.0).unwrap();
        let exact = oracle::radial_source(&g, 2.0 * PI, 1.0);
        assert!(sol.velocity.sub(&exact.velocity).l2_norm() < 1e-10);
        assert!(sol.pressure.abs_max() < 1e-9);
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = grid(16, 8);
        let sol = stokes_solve(&g, &BoundaryTrace::zero(1.0, 2.0), 1.0).unwrap();
        assert_eq!(sol.velocity.abs_max(), 0.0);
        assert_eq!(sol.bound_ratio, 0.0);
    }

    #[test]
    fn poisson_harmonic_and_trivial() {
        let g = grid(24, 8);
        let zero = VelocityField::zeros(&g);
        assert!(pressure_poisson(&g, &zero, 0.0, 0.0).unwrap().abs_max() < 1e-14);
        let p = pressure_poisson(&g, &zero, 1.0, 0.0).unwrap();
        let exact = ScalarField::radial(&g, |r| r.ln() / 2f64.ln());
        assert!(p.sub(&exact).abs_max() < 1e-10);
        let last = g.n_r() - 1;
        for j in 0..8 {
            assert_eq!(p.at(last, j), 1.0);
            assert!(p.at(0, j).abs() < 1e-15);
        }
    }

    #[test]
    fn momentum_pressure_examples() {
        let g = grid(32, 16);
        let f = 2.0 * PI;
        let src = oracle::radial_source(&g, f, 1.0);
        let p = pressure_from_momentum(&src.velocity, 1.0, 1.0).unwrap();
        assert!(p.sub(&src.pressure).abs_max() < 1e-9);

        let cou = oracle::couette(&g, 1.0, 0.0);
        let p = pressure_from_momentum(&cou.velocity, 1.0, 1.0).unwrap();
        assert!(p.sub(&cou.pressure).abs_max() < 1e-9);

        let zero = VelocityField::zeros(&g);
        assert_eq!(pressure_from_momentum(&zero, 1.0, 1.0).unwrap().abs_max(), 0.0);
    }

    #[test]
    fn non_solution_is_rejected() {
        let g = grid(24, 16);
        let u = VelocityField::from_fn(&g, |_, _| 0.0, |r, t| r * t.sin());
        assert!(matches!(
            pressure_from_momentum(&u, 1.0, 1.0),
            Err(Error::NonIntegrable { .. })
        ));
    }

    #[test]
    fn stokes_is_linear() {
        let g = grid(24, 16);
        let a1 = make_trace(&BoundarySpec::Couette { omega1: 0.3, omega2: -1.0 }, 1.0, 2.0, 1.0).unwrap();
        let a2 = make_trace(&BoundarySpec::PureFlux { flux: 1.5 }, 1.0, 2.0, 1.0).unwrap();
        let s1 = stokes_solve(&g, &a1, 1.0).unwrap();
        let s2 = stokes_solve(&g, &a2, 1.0).unwrap();
        let s12 = stokes_solve(&g, &a1.add(&a2), 1.0).unwrap();
        let diff = s12.velocity.sub(&s1.velocity.add(&s2.velocity)).abs_max();
        assert!(diff < 1e-9, "{diff}");
        let scaled = stokes_solve(&g, &a1.scale(3.0), 1.0).unwrap();
        assert_relative_eq!(
            scaled.velocity.l2_norm(),
            3.0 * s1.velocity.l2_norm(),
            max_relative = 1e-10
        );
    }
}
