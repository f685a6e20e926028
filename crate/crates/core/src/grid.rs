//! Tensor-product collocation grid for the annulus `R₂ < r < R₁`.
//!
//! Radial direction: Chebyshev–Gauss–Lobatto points mapped affinely onto
//! `[R₂, R₁]`, ordered from the inner circle outwards. Angular direction:
//! `n_theta` equispaced points `θ_j = 2πj/n_theta`.
//!
//! Nodal data live in `n_r × n_theta` matrices (row = radius, column = angle).
//! Angular Fourier coefficients use the real layout
//! `[c₀, a₁, b₁, …, a_K, b_K, a_N]` with `K = n_theta/2 − 1` and the Nyquist
//! cosine `a_N` last, so that
//! `f(θ) = c₀ + Σ (a_k cos kθ + b_k sin kθ) + a_N cos(Nθ)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Discretization of the annulus with precomputed operators.
pub struct PolarGrid {
    n_r: usize,
    n_theta: usize,
    r_inner: f64,
    r_outer: f64,
    r: Vec<f64>,
    theta: Vec<f64>,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
    cc_weights: Vec<f64>,
    cumulative: DMatrix<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for PolarGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PolarGrid")
            .field("n_r", &self.n_r)
            .field("n_theta", &self.n_theta)
            .field("r_inner", &self.r_inner)
            .field("r_outer", &self.r_outer)
            .finish()
    }
}

impl PolarGrid {
    /// Builds the grid and all differentiation / quadrature operators.
    pub fn new(n_r: usize, n_theta: usize, r_inner: f64, r_outer: f64) -> Result<Arc<Self>> {
        if n_r < 8 {
            return Err(Error::InvalidGrid(format!("n_r = {n_r} is below the minimum of 8")));
        }
        if n_theta < 2 || !n_theta.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "n_theta = {n_theta} must be even and at least 2"
            )));
        }
        if !(r_inner.is_finite() && r_outer.is_finite()) {
            return Err(Error::InvalidGrid("radii must be finite".into()));
        }
        if r_inner < 1.0 {
            return Err(Error::InvalidGrid(format!(
                "r_inner = {r_inner} must be at least 1 (the inner body contains the unit disk)"
            )));
        }
        if r_inner >= r_outer {
            return Err(Error::InvalidGrid(format!(
                "r_inner = {r_inner} must be smaller than r_outer = {r_outer}"
            )));
        }

        let half = 0.5 * (r_outer - r_inner);
        let mid = 0.5 * (r_outer + r_inner);
        let m = n_r - 1;
        let angles: Vec<f64> = (0..n_r).map(|i| i as f64 * PI / m as f64).collect();
        let x: Vec<f64> = angles.iter().map(|a| -a.cos()).collect();
        let r: Vec<f64> = x.iter().map(|x| mid + half * x).collect();
        let theta: Vec<f64> = (0..n_theta)
            .map(|j| 2.0 * PI * j as f64 / n_theta as f64)
            .collect();

        let dx = cheb_diff_matrix(&angles);
        let d1 = dx.scale(1.0 / half);
        let d2 = &d1 * &d1;
        let cc_weights = clenshaw_curtis(n_r).into_iter().map(|w| w * half).collect();
        let cumulative = cheb_cumulative_matrix(&x).scale(half);

        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n_theta);
        let ifft = planner.plan_fft_inverse(n_theta);

        Ok(Arc::new(Self {
            n_r,
            n_theta,
            r_inner,
            r_outer,
            r,
            theta,
            d1,
            d2,
            cc_weights,
            cumulative,
            fft,
            ifft,
        }))
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn r_inner(&self) -> f64 {
        self.r_inner
    }

    pub fn r_outer(&self) -> f64 {
        self.r_outer
    }

    /// Radial nodes, ascending; `r[0] = R₂`, `r[n_r-1] = R₁`.
    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Highest resolved angular wavenumber below Nyquist.
    pub fn max_mode(&self) -> usize {
        self.n_theta / 2 - 1
    }

    /// First radial differentiation matrix.
    pub fn d1(&self) -> &DMatrix<f64> {
        &self.d1
    }

    /// Second radial differentiation matrix.
    pub fn d2(&self) -> &DMatrix<f64> {
        &self.d2
    }

    /// Clenshaw–Curtis weights for `∫_{R₂}^{R₁} g(r) dr` (no Jacobian).
    pub fn radial_weights(&self) -> &[f64] {
        &self.cc_weights
    }

    /// Matrix mapping nodal values of `g` to `∫_{R₂}^{r_i} g(t) dt`.
    pub fn cumulative_matrix(&self) -> &DMatrix<f64> {
        &self.cumulative
    }

    /// Area weight of node `(i, ·)`: `w_i r_i Δθ`.
    pub fn area_weight(&self, i: usize) -> f64 {
        self.cc_weights[i] * self.r[i] * 2.0 * PI / self.n_theta as f64
    }

    /// `|Ω| = π(R₁² − R₂²)`.
    pub fn area(&self) -> f64 {
        PI * (self.r_outer * self.r_outer - self.r_inner * self.r_inner)
    }

    /// `|Ω₁| = πR₁²`, the region bounded by the outer circle.
    pub fn area_outer_disk(&self) -> f64 {
        PI * self.r_outer * self.r_outer
    }

    /// `|Ω₂| = πR₂²`, the inner body.
    pub fn area_inner_disk(&self) -> f64 {
        PI * self.r_inner * self.r_inner
    }

    /// Quadrature of nodal data over the annulus.
    pub fn integrate_nodal(&self, values: &DMatrix<f64>) -> f64 {
        (0..self.n_r)
            .map(|i| self.area_weight(i) * values.row(i).iter().sum::<f64>())
            .sum()
    }

    /// `∫_{R₂}^{R₁} g(r) dr` for nodal radial data.
    pub fn integrate_radial(&self, g: &[f64]) -> f64 {
        g.iter().zip(&self.cc_weights).map(|(g, w)| g * w).sum()
    }

    pub(crate) fn same_as(&self, other: &PolarGrid) -> bool {
        std::ptr::eq(self, other)
            || (self.n_r == other.n_r
                && self.n_theta == other.n_theta
                && self.r_inner == other.r_inner
                && self.r_outer == other.r_outer)
    }

    /// Real angular Fourier coefficients of each row of `values`.
    pub fn forward(&self, values: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n_theta;
        let mut out = DMatrix::zeros(values.nrows(), n);
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for i in 0..values.nrows() {
            for j in 0..n {
                buf[j] = Complex::new(values[(i, j)], 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            let inv = 1.0 / n as f64;
            out[(i, 0)] = buf[0].re * inv;
            for k in 1..n / 2 {
                out[(i, 2 * k - 1)] = 2.0 * buf[k].re * inv;
                out[(i, 2 * k)] = -2.0 * buf[k].im * inv;
            }
            out[(i, n - 1)] = buf[n / 2].re * inv;
        }
        out
    }

    /// Inverse of [`forward`](Self::forward).
    pub fn inverse(&self, coeffs: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n_theta;
        let mut out = DMatrix::zeros(coeffs.nrows(), n);
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.ifft.get_inplace_scratch_len()];
        for i in 0..coeffs.nrows() {
            buf.iter_mut().for_each(|b| *b = Complex::new(0.0, 0.0));
            buf[0] = Complex::new(coeffs[(i, 0)], 0.0);
            for k in 1..n / 2 {
                let c = Complex::new(0.5 * coeffs[(i, 2 * k - 1)], -0.5 * coeffs[(i, 2 * k)]);
                buf[k] = c;
                buf[n - k] = c.conj();
            }
            buf[n / 2] += Complex::new(coeffs[(i, n - 1)], 0.0);
            self.ifft.process_with_scratch(&mut buf, &mut scratch);
            for j in 0..n {
                out[(i, j)] = buf[j].re;
            }
        }
        out
    }

    /// Angular derivative in coefficient space. The Nyquist cosine has a
    /// sine partner that is not representable, so it is dropped.
    pub fn coeff_dtheta(&self, coeffs: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n_theta;
        let mut out = DMatrix::zeros(coeffs.nrows(), n);
        for i in 0..coeffs.nrows() {
            for k in 1..n / 2 {
                let kf = k as f64;
                out[(i, 2 * k - 1)] = kf * coeffs[(i, 2 * k)];
                out[(i, 2 * k)] = -kf * coeffs[(i, 2 * k - 1)];
            }
        }
        out
    }

    /// Second angular derivative in coefficient space.
    pub fn coeff_dtheta2(&self, coeffs: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n_theta;
        let mut out = coeffs.clone();
        for i in 0..coeffs.nrows() {
            out[(i, 0)] = 0.0;
            for k in 1..n / 2 {
                let k2 = (k * k) as f64;
                out[(i, 2 * k - 1)] *= -k2;
                out[(i, 2 * k)] *= -k2;
            }
            let nyq = (n / 2) as f64;
            out[(i, n - 1)] *= -nyq * nyq;
        }
        out
    }

    /// Angular derivative of nodal data.
    pub fn dtheta(&self, values: &DMatrix<f64>) -> DMatrix<f64> {
        self.inverse(&self.coeff_dtheta(&self.forward(values)))
    }

    /// Second angular derivative of nodal data.
    pub fn dtheta2(&self, values: &DMatrix<f64>) -> DMatrix<f64> {
        self.inverse(&self.coeff_dtheta2(&self.forward(values)))
    }

    /// Radial derivative of nodal (or coefficient) data.
    pub fn dr(&self, values: &DMatrix<f64>) -> DMatrix<f64> {
        &self.d1 * values
    }

    /// Second radial derivative of nodal (or coefficient) data.
    pub fn dr2(&self, values: &DMatrix<f64>) -> DMatrix<f64> {
        &self.d2 * values
    }

    /// Wavenumber carried by coefficient column `col`.
    pub fn wavenumber(&self, col: usize) -> usize {
        if col == 0 {
            0
        } else if col == self.n_theta - 1 {
            self.n_theta / 2
        } else {
            col.div_ceil(2)
        }
    }

    /// Evaluates a nodal radial profile `g` at the grid radii and broadcasts it.
    pub fn radial_field(&self, g: impl Fn(f64) -> f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_r, self.n_theta, |i, _| g(self.r[i]))
    }

    /// Evaluates `f(r, θ)` on the nodes.
    pub fn nodal(&self, f: impl Fn(f64, f64) -> f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_r, self.n_theta, |i, j| f(self.r[i], self.theta[j]))
    }

    /// Multiplies row `i` of `m` by `g(r_i)`.
    pub fn scale_rows(&self, m: &DMatrix<f64>, g: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut out = m.clone();
        for i in 0..m.nrows() {
            let s = g(self.r[i]);
            out.row_mut(i).iter_mut().for_each(|v| *v *= s);
        }
        out
    }

    pub(crate) fn radial_vector(&self, g: impl Fn(f64) -> f64) -> DVector<f64> {
        DVector::from_iterator(self.n_r, self.r.iter().map(|&r| g(r)))
    }
}

/// Chebyshev–Gauss–Lobatto differentiation matrix on `x_i = −cos(a_i)`,
/// barycentric form with the negative-sum diagonal.
fn cheb_diff_matrix(angles: &[f64]) -> DMatrix<f64> {
    let n = angles.len();
    let weight = |j: usize| {
        let s = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
        if j == 0 || j == n - 1 {
            0.5 * s
        } else {
            s
        }
    };
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            // x_i − x_j = 2 sin((a_i + a_j)/2) sin((a_i − a_j)/2), cancellation-free
            let diff = 2.0 * (0.5 * (angles[i] + angles[j])).sin() * (0.5 * (angles[i] - angles[j])).sin();
            let v = weight(j) / weight(i) / diff;
            d[(i, j)] = v;
            diag -= v;
        }
        d[(i, i)] = diag;
    }
    d
}

/// Clenshaw–Curtis weights on the `n` Chebyshev–Gauss–Lobatto points of `[-1, 1]`.
fn clenshaw_curtis(n: usize) -> Vec<f64> {
    let m = n - 1;
    let mut w = vec![0.0; n];
    let theta: Vec<f64> = (0..n).map(|i| i as f64 * PI / m as f64).collect();
    if m.is_multiple_of(2) {
        let end = 1.0 / (m * m - 1) as f64;
        w[0] = end;
        w[m] = end;
        for i in 1..m {
            let mut v = 1.0;
            for k in 1..m / 2 {
                v -= 2.0 * (2.0 * k as f64 * theta[i]).cos() / (4 * k * k - 1) as f64;
            }
            v -= (m as f64 * theta[i]).cos() / (m * m - 1) as f64;
            w[i] = 2.0 * v / m as f64;
        }
    } else {
        let end = 1.0 / (m * m) as f64;
        w[0] = end;
        w[m] = end;
        for i in 1..m {
            let mut v = 1.0;
            for k in 1..=(m - 1) / 2 {
                v -= 2.0 * (2.0 * k as f64 * theta[i]).cos() / (4 * k * k - 1) as f64;
            }
            w[i] = 2.0 * v / m as f64;
        }
    }
    w
}

/// Spectral indefinite integral `∫_{-1}^{x_i}` on the Chebyshev points `x`.
fn cheb_cumulative_matrix(x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let m = n - 1;
    // values -> Chebyshev coefficients (discrete cosine transform, type I)
    let cheb_t = |k: usize, x: f64| (k as f64 * x.clamp(-1.0, 1.0).acos()).cos();
    let mut to_coeff = DMatrix::zeros(n, n);
    for k in 0..n {
        let ck = if k == 0 || k == m { 2.0 } else { 1.0 };
        for j in 0..n {
            let cj = if j == 0 || j == m { 2.0 } else { 1.0 };
            to_coeff[(k, j)] = 2.0 / (m as f64 * ck * cj) * cheb_t(k, x[j]);
        }
    }
    // integrate coefficients: degree n result
    let mut integ = DMatrix::zeros(n + 1, n);
    for k in 0..n {
        match k {
            0 => integ[(1, 0)] += 1.0,
            1 => integ[(2, 1)] += 0.25,
            _ => {
                integ[(k + 1, k)] += 1.0 / (2.0 * (k + 1) as f64);
                integ[(k - 1, k)] -= 1.0 / (2.0 * (k - 1) as f64);
            }
        }
    }
    // evaluate at nodes minus value at x = -1
    let mut eval = DMatrix::zeros(n, n + 1);
    for i in 0..n {
        for k in 0..=n {
            let at_left = if k % 2 == 0 { 1.0 } else { -1.0 };
            eval[(i, k)] = cheb_t(k, x[i]) - at_left;
        }
    }
    eval * integ * to_coeff
}
