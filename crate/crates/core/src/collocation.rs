//! Stream-function/vorticity collocation system shared by the Stokes and
//! Navier–Stokes solvers.
//!
//! The velocity is written `u = u_F + curl Ψ` with `u_F` the flux carrier
//! and `ω = −ΔΨ`. Per angular coefficient column the unknowns are the radial
//! nodal values of `Ψ_k` followed by those of `ω_k`; the state matrix has
//! `2 n_r` rows and the Nyquist column is pinned to zero. Unknown vectors
//! use the column-major layout `col·2n_r + row`.
//!
//! Rows per column (`n = n_r`):
//! * `0`: `Ψ_k(R₂)`;
//! * `1..n−1`: `L_k Ψ_k + ω_k = 0`;
//! * `n−1`: `Ψ_k(R₁)` for `k ≥ 1`; for `k = 0` the mean azimuthal momentum
//!   `−ν ω₀' + λ ⟨(u·∇u)_θ⟩` tested against the bubble `(r − R₂)(R₁ − r)`,
//!   which fixes the free constant of `Ψ` on Γ₁ (single-valued pressure);
//! * `n`, `2n−1`: `Ψ_k'(R₂)`, `Ψ_k'(R₁)`;
//! * `n+1..2n−1`: `ν L_k ω_k − λ [(u·∇)ω]_k = 0`.
//!
//! Second-order blocks keep the roundoff growth at `O(n⁴)` rather than the
//! `O(n⁸)` of the squared operator.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use rayon::prelude::*;

use crate::boundary::StreamBoundaryData;
use crate::error::{Error, Result};
use crate::fields::{curl_of_stream, dirichlet_norm, ScalarField, VelocityField};
use crate::grid::PolarGrid;

pub(crate) struct StreamOperator {
    grid: Arc<PolarGrid>,
    nu: f64,
    flux: f64,
    blocks: Vec<DMatrix<f64>>,
    lu: Vec<LU<f64, Dyn, Dyn>>,
    moment: DVector<f64>,
    targets: DMatrix<f64>,
}

/// Nodal quantities of the current iterate that enter the convective terms.
struct State {
    u_r: DMatrix<f64>,
    u_t: DMatrix<f64>,
    u_t_r: DMatrix<f64>,
    u_t_t: DMatrix<f64>,
    w_r: DMatrix<f64>,
    w_t: DMatrix<f64>,
}

impl StreamOperator {
    pub(crate) fn new(grid: &Arc<PolarGrid>, nu: f64, flux: f64, data: &StreamBoundaryData) -> Result<Self> {
        let n = grid.n_r();
        let d1 = grid.d1();
        let inv_r = DMatrix::from_diagonal(&grid.radial_vector(|r| 1.0 / r));
        let inv_r2 = DMatrix::from_diagonal(&grid.radial_vector(|r| 1.0 / (r * r)));
        let base = grid.d2() + &inv_r * d1;
        let (r2, r1) = (grid.r_inner(), grid.r_outer());
        let moment = DVector::from_iterator(
            n,
            grid.r()
                .iter()
                .zip(grid.radial_weights())
                .map(|(&r, &w)| w * r * (r - r2) * (r1 - r)),
        );
        let moment_row = (moment.transpose() * d1) * (-nu);

        let mut blocks = Vec::new();
        let mut lu = Vec::new();
        for k in 0..=grid.max_mode() {
            let lk = &base - &inv_r2 * (k * k) as f64;
            let mut a = DMatrix::zeros(2 * n, 2 * n);
            a[(0, 0)] = 1.0;
            for i in 1..n - 1 {
                a.view_mut((i, 0), (1, n)).copy_from(&lk.row(i));
                a[(i, n + i)] = 1.0;
                a.view_mut((n + i, n), (1, n)).copy_from(&(lk.row(i) * nu));
            }
            if k == 0 {
                a.view_mut((n - 1, n), (1, n)).copy_from(&moment_row);
            } else {
                a[(n - 1, n - 1)] = 1.0;
            }
            a.view_mut((n, 0), (1, n)).copy_from(&d1.row(0));
            a.view_mut((2 * n - 1, 0), (1, n)).copy_from(&d1.row(n - 1));
            let fact = a.clone().lu();
            if !fact.is_invertible() {
                return Err(Error::LinearSolve { mode: k });
            }
            blocks.push(a);
            lu.push(fact);
        }

        let cols = grid.n_theta();
        let mut targets = DMatrix::zeros(2 * n, cols);
        for col in 0..cols - 1 {
            targets[(0, col)] = data.inner_value[col];
            if col != 0 {
                targets[(n - 1, col)] = data.outer_value[col];
            }
            targets[(n, col)] = data.inner_slope[col];
            targets[(2 * n - 1, col)] = data.outer_slope[col];
        }

        Ok(Self {
            grid: Arc::clone(grid),
            nu,
            flux,
            blocks,
            lu,
            moment,
            targets,
        })
    }

    pub(crate) fn grid(&self) -> &Arc<PolarGrid> {
        &self.grid
    }

    pub(crate) fn flux(&self) -> f64 {
        self.flux
    }

    pub(crate) fn nu(&self) -> f64 {
        self.nu
    }

    fn columns(&self) -> usize {
        self.grid.n_theta() - 1
    }

    pub(crate) fn zero_state(&self) -> DMatrix<f64> {
        DMatrix::zeros(2 * self.grid.n_r(), self.grid.n_theta())
    }

    /// Stream-function rows of a state.
    pub(crate) fn psi(&self, state: &DMatrix<f64>) -> DMatrix<f64> {
        state.rows(0, self.grid.n_r()).into_owned()
    }

    /// State whose `Ψ` rows are `psi` and `ω = −ΔΨ`.
    pub(crate) fn state_from_psi(&self, psi: &DMatrix<f64>) -> DMatrix<f64> {
        let g = &self.grid;
        let n = g.n_r();
        let lap = g.dr2(psi)
            + g.scale_rows(&g.dr(psi), |r| 1.0 / r)
            + g.scale_rows(&g.coeff_dtheta2(psi), |r| 1.0 / (r * r));
        let mut s = self.zero_state();
        s.view_mut((0, 0), (n, g.n_theta())).copy_from(psi);
        s.view_mut((n, 0), (n, g.n_theta())).copy_from(&(-lap));
        s.column_mut(g.n_theta() - 1).fill(0.0);
        s
    }

    fn linear_residual(&self, state: &DMatrix<f64>) -> DMatrix<f64> {
        let mut res = self.zero_state();
        for col in 0..self.columns() {
            let k = self.grid.wavenumber(col);
            let r = &self.blocks[k] * state.column(col) - self.targets.column(col);
            res.set_column(col, &r);
        }
        res
    }

    /// Applies the inverse of the λ = 0 operator column by column; the
    /// per-mode solves run on the rayon pool.
    pub(crate) fn solve_blocks(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let solved: Vec<Result<DVector<f64>>> = (0..self.columns())
            .into_par_iter()
            .map(|col| {
                let k = self.grid.wavenumber(col);
                self.lu[k]
                    .solve(&rhs.column(col).into_owned())
                    .filter(|x| x.iter().all(|v| v.is_finite()))
                    .ok_or(Error::LinearSolve { mode: k })
            })
            .collect();
        let mut out = self.zero_state();
        for (col, x) in solved.into_iter().enumerate() {
            out.set_column(col, &x?);
        }
        Ok(out)
    }

    /// Stokes state: all rows linear, boundary targets as data.
    pub(crate) fn solve_stokes(&self) -> Result<DMatrix<f64>> {
        self.solve_blocks(&self.targets)
    }

    fn nodal_state(&self, state: &DMatrix<f64>, flux: f64) -> State {
        let g = &self.grid;
        let n = g.n_r();
        let psi = state.rows(0, n).into_owned();
        let omega = state.rows(n, n).into_owned();
        let carrier = g.radial_field(|r| -flux / (2.0 * std::f64::consts::PI * r));
        let dpsi_t = g.coeff_dtheta(&psi);
        State {
            u_r: carrier + g.scale_rows(&g.inverse(&dpsi_t), |r| 1.0 / r),
            u_t: -g.inverse(&g.dr(&psi)),
            u_t_r: -g.inverse(&g.dr2(&psi)),
            u_t_t: -g.inverse(&g.dr(&dpsi_t)),
            w_r: g.inverse(&g.dr(&omega)),
            w_t: g.inverse(&g.coeff_dtheta(&omega)),
        }
    }

    /// `(a·∇)ω_b` at the nodes.
    fn advection(&self, a: &State, b: &State) -> DMatrix<f64> {
        a.u_r.component_mul(&b.w_r) + self.grid.scale_rows(&a.u_t.component_mul(&b.w_t), |r| 1.0 / r)
    }

    /// `((a·∇)u_b)_θ` at the nodes.
    fn azimuthal_momentum(&self, a: &State, b: &State) -> DMatrix<f64> {
        a.u_r.component_mul(&b.u_t_r)
            + self.grid.scale_rows(
                &(a.u_t.component_mul(&b.u_t_t) + a.u_r.component_mul(&b.u_t)),
                |r| 1.0 / r,
            )
    }

    fn subtract_convection(&self, res: &mut DMatrix<f64>, adv: &DMatrix<f64>, tmom: &DMatrix<f64>, lambda: f64) {
        let g = &self.grid;
        let n = g.n_r();
        let adv_hat = g.forward(adv);
        let tmom_hat = g.forward(tmom);
        for col in 0..self.columns() {
            for i in 1..n - 1 {
                res[(n + i, col)] -= lambda * adv_hat[(i, col)];
            }
        }
        res[(n - 1, 0)] += lambda * self.moment.dot(&tmom_hat.column(0));
    }

    /// Full residual of the λ-family at `state`.
    pub(crate) fn residual(&self, state: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
        let mut res = self.linear_residual(state);
        if lambda == 0.0 {
            return res;
        }
        let s = self.nodal_state(state, self.flux);
        let adv = self.advection(&s, &s);
        let tmom = self.azimuthal_momentum(&s, &s);
        self.subtract_convection(&mut res, &adv, &tmom, lambda);
        res
    }

    /// Jacobian of [`residual`](Self::residual) at `state` applied to `dir`.
    pub(crate) fn linearized(&self, state: &DMatrix<f64>, dir: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
        let mut out = self.zero_state();
        for col in 0..self.columns() {
            let k = self.grid.wavenumber(col);
            out.set_column(col, &(&self.blocks[k] * dir.column(col)));
        }
        if lambda == 0.0 {
            return out;
        }
        let s = self.nodal_state(state, self.flux);
        let d = self.nodal_state(dir, 0.0);
        let adv = self.advection(&s, &d) + self.advection(&d, &s);
        let tmom = self.azimuthal_momentum(&s, &d) + self.azimuthal_momentum(&d, &s);
        self.subtract_convection(&mut out, &adv, &tmom, lambda);
        out
    }

    /// Velocity `u_F + curl Ψ` of a state.
    pub(crate) fn velocity(&self, state: &DMatrix<f64>) -> VelocityField {
        let psi = ScalarField::from_coefficients(&self.grid, self.psi(state));
        crate::boundary::flux_carrier(&self.grid, self.flux).add(&curl_of_stream(&psi))
    }

    /// `‖curl Ψ‖_H` of a state (no carrier).
    pub(crate) fn stream_norm(&self, state: &DMatrix<f64>) -> f64 {
        let psi = ScalarField::from_coefficients(&self.grid, self.psi(state));
        dirichlet_norm(&curl_of_stream(&psi))
    }
}
