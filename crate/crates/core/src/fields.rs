//! Scalar and velocity fields on a [`PolarGrid`], with the vector calculus
//! needed by the solvers and diagnostics.
//!
//! Sign convention for stream functions: `u_r = (1/r) ∂ψ/∂θ`,
//! `u_θ = −∂ψ/∂r`. In Cartesian terms `∇ψ = (−u₂, u₁)` and the vorticity is
//! `ω = −Δψ`.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::PolarGrid;

/// Nodal values on the grid; angular coefficients are computed lazily.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<PolarGrid>,
    values: DMatrix<f64>,
    coeffs: OnceLock<DMatrix<f64>>,
}

impl ScalarField {
    pub fn new(grid: &Arc<PolarGrid>, values: DMatrix<f64>) -> Self {
        assert_eq!(values.shape(), (grid.n_r(), grid.n_theta()), "nodal shape");
        Self {
            grid: Arc::clone(grid),
            values,
            coeffs: OnceLock::new(),
        }
    }

    pub fn zeros(grid: &Arc<PolarGrid>) -> Self {
        Self::new(grid, DMatrix::zeros(grid.n_r(), grid.n_theta()))
    }

    pub fn constant(grid: &Arc<PolarGrid>, c: f64) -> Self {
        Self::new(grid, DMatrix::from_element(grid.n_r(), grid.n_theta(), c))
    }

    pub fn from_fn(grid: &Arc<PolarGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::new(grid, grid.nodal(f))
    }

    pub fn radial(grid: &Arc<PolarGrid>, f: impl Fn(f64) -> f64) -> Self {
        Self::new(grid, grid.radial_field(f))
    }

    /// Builds a field from angular coefficients in the grid layout.
    pub fn from_coefficients(grid: &Arc<PolarGrid>, coeffs: DMatrix<f64>) -> Self {
        let values = grid.inverse(&coeffs);
        let field = Self::new(grid, values);
        let _ = field.coeffs.set(coeffs);
        field
    }

    pub fn grid(&self) -> &Arc<PolarGrid> {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Angular Fourier coefficients per radius (cached).
    pub fn coefficients(&self) -> &DMatrix<f64> {
        self.coeffs.get_or_init(|| self.grid.forward(&self.values))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn with_values(&self, values: DMatrix<f64>) -> Self {
        Self::new(&self.grid, values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        self.with_values(self.values.map(f))
    }

    pub fn scale(&self, c: f64) -> Self {
        self.with_values(&self.values * c)
    }

    pub fn add(&self, other: &ScalarField) -> Self {
        self.with_values(&self.values + &other.values)
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        self.with_values(&self.values - &other.values)
    }

    pub fn mul(&self, other: &ScalarField) -> Self {
        self.with_values(self.values.component_mul(&other.values))
    }

    pub fn dr(&self) -> Self {
        self.with_values(self.grid.dr(&self.values))
    }

    pub fn dtheta(&self) -> Self {
        let c = self.grid.coeff_dtheta(self.coefficients());
        Self::from_coefficients(&self.grid, c)
    }

    pub fn dtheta2(&self) -> Self {
        let c = self.grid.coeff_dtheta2(self.coefficients());
        Self::from_coefficients(&self.grid, c)
    }

    /// Multiplies by `g(r)`.
    pub fn scale_radial(&self, g: impl Fn(f64) -> f64) -> Self {
        self.with_values(self.grid.scale_rows(&self.values, g))
    }

    /// Scalar Laplacian `ψ_rr + ψ_r/r + ψ_θθ/r²`.
    pub fn laplacian(&self) -> Self {
        let rr = self.grid.dr2(&self.values);
        let r1 = self.grid.scale_rows(&self.grid.dr(&self.values), |r| 1.0 / r);
        let tt = self.grid.scale_rows(self.dtheta2().values(), |r| 1.0 / (r * r));
        self.with_values(rr + r1 + tt)
    }

    /// `∫_Ω f dx`.
    pub fn integrate(&self) -> f64 {
        self.grid.integrate_nodal(&self.values)
    }

    /// `(∫_Ω f² dx)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.mul(self).integrate().max(0.0).sqrt()
    }

    pub fn max(&self) -> f64 {
        self.values.max()
    }

    pub fn min(&self) -> f64 {
        self.values.min()
    }

    pub fn abs_max(&self) -> f64 {
        self.values.amax()
    }

    /// Values along the inner circle `r = R₂`.
    pub fn inner_trace(&self) -> Vec<f64> {
        self.values.row(0).iter().copied().collect()
    }

    /// Values along the outer circle `r = R₁`.
    pub fn outer_trace(&self) -> Vec<f64> {
        self.values.row(self.grid.n_r() - 1).iter().copied().collect()
    }

    /// Writes `r,theta,value` rows, radial index outermost, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "r,theta,value")?;
        for (i, r) in self.grid.r().iter().enumerate() {
            for (j, t) in self.grid.theta().iter().enumerate() {
                writeln!(out, "{r:.16e},{t:.16e},{:.16e}", self.values[(i, j)])?;
            }
        }
        Ok(())
    }
}

/// Velocity in polar physical components.
#[derive(Debug, Clone)]
pub struct VelocityField {
    pub u_r: ScalarField,
    pub u_theta: ScalarField,
}

/// Polar components of the velocity gradient tensor:
/// `[∂_r u_r, (∂_θ u_r − u_θ)/r; ∂_r u_θ, (∂_θ u_θ + u_r)/r]`.
#[derive(Debug, Clone)]
pub struct VelocityGradient {
    pub rr: ScalarField,
    pub rt: ScalarField,
    pub tr: ScalarField,
    pub tt: ScalarField,
}

impl VelocityField {
    pub fn new(u_r: ScalarField, u_theta: ScalarField) -> Result<Self> {
        u_r.ensure_same_grid(&u_theta)?;
        Ok(Self { u_r, u_theta })
    }

    pub fn zeros(grid: &Arc<PolarGrid>) -> Self {
        Self {
            u_r: ScalarField::zeros(grid),
            u_theta: ScalarField::zeros(grid),
        }
    }

    pub fn from_fn(
        grid: &Arc<PolarGrid>,
        u_r: impl Fn(f64, f64) -> f64,
        u_theta: impl Fn(f64, f64) -> f64,
    ) -> Self {
        Self {
            u_r: ScalarField::from_fn(grid, u_r),
            u_theta: ScalarField::from_fn(grid, u_theta),
        }
    }

    pub fn grid(&self) -> &Arc<PolarGrid> {
        self.u_r.grid()
    }

    pub fn ensure_same_grid(&self, other: &VelocityField) -> Result<()> {
        self.u_r.ensure_same_grid(&other.u_r)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            u_r: self.u_r.scale(c),
            u_theta: self.u_theta.scale(c),
        }
    }

    pub fn add(&self, other: &VelocityField) -> Self {
        Self {
            u_r: self.u_r.add(&other.u_r),
            u_theta: self.u_theta.add(&other.u_theta),
        }
    }

    pub fn sub(&self, other: &VelocityField) -> Self {
        Self {
            u_r: self.u_r.sub(&other.u_r),
            u_theta: self.u_theta.sub(&other.u_theta),
        }
    }

    /// `|u|²`.
    pub fn speed_squared(&self) -> ScalarField {
        self.u_r.mul(&self.u_r).add(&self.u_theta.mul(&self.u_theta))
    }

    /// `∫_Ω u·v dx`.
    pub fn dot_integral(&self, other: &VelocityField) -> f64 {
        self.u_r.mul(&other.u_r).add(&self.u_theta.mul(&other.u_theta)).integrate()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot_integral(self).max(0.0).sqrt()
    }

    /// Largest nodal component magnitude.
    pub fn abs_max(&self) -> f64 {
        self.u_r.abs_max().max(self.u_theta.abs_max())
    }

    pub fn gradient(&self) -> VelocityGradient {
        let inv_r = |r: f64| 1.0 / r;
        VelocityGradient {
            rr: self.u_r.dr(),
            rt: self.u_r.dtheta().sub(&self.u_theta).scale_radial(inv_r),
            tr: self.u_theta.dr(),
            tt: self.u_theta.dtheta().add(&self.u_r).scale_radial(inv_r),
        }
    }

    /// `∫_Ω ∇u : ∇v dx`.
    pub fn gradient_inner(&self, other: &VelocityField) -> f64 {
        let a = self.gradient();
        let b = other.gradient();
        a.rr.mul(&b.rr)
            .add(&a.rt.mul(&b.rt))
            .add(&a.tr.mul(&b.tr))
            .add(&a.tt.mul(&b.tt))
            .integrate()
    }

    /// Scalar vorticity `(1/r)∂_r(r u_θ) − (1/r)∂_θ u_r`.
    pub fn vorticity(&self) -> ScalarField {
        let g = self.gradient();
        // ∂_r u_θ + u_θ/r − ∂_θ u_r / r = tr − rt
        g.tr.sub(&g.rt)
    }

    /// Polar components of `(a·∇)b`.
    pub fn advect(a: &VelocityField, b: &VelocityField) -> VelocityField {
        let inv_r = |r: f64| 1.0 / r;
        let br_t = b.u_r.dtheta();
        let bt_t = b.u_theta.dtheta();
        let r_comp = a
            .u_r
            .mul(&b.u_r.dr())
            .add(&a.u_theta.mul(&br_t.sub(&b.u_theta)).scale_radial(inv_r));
        let t_comp = a
            .u_r
            .mul(&b.u_theta.dr())
            .add(&a.u_theta.mul(&bt_t.add(&b.u_r)).scale_radial(inv_r));
        VelocityField {
            u_r: r_comp,
            u_theta: t_comp,
        }
    }

    /// Vector Laplacian in polar components.
    pub fn vector_laplacian(&self) -> VelocityField {
        let inv_r2 = |r: f64| 1.0 / (r * r);
        let r_comp = self
            .u_r
            .laplacian()
            .sub(&self.u_r.add(&self.u_theta.dtheta().scale(2.0)).scale_radial(inv_r2));
        let t_comp = self
            .u_theta
            .laplacian()
            .sub(&self.u_theta.sub(&self.u_r.dtheta().scale(2.0)).scale_radial(inv_r2));
        VelocityField {
            u_r: r_comp,
            u_theta: t_comp,
        }
    }

    /// Writes `r,theta,u_r,u_theta[,p]` rows, radial index outermost.
    pub fn write_csv<W: Write>(&self, pressure: Option<&ScalarField>, mut out: W) -> io::Result<()> {
        let grid = self.grid();
        if pressure.is_some() {
            writeln!(out, "r,theta,u_r,u_theta,p")?;
        } else {
            writeln!(out, "r,theta,u_r,u_theta")?;
        }
        for (i, r) in grid.r().iter().enumerate() {
            for (j, t) in grid.theta().iter().enumerate() {
                write!(
                    out,
                    "{r:.16e},{t:.16e},{:.16e},{:.16e}",
                    self.u_r.at(i, j),
                    self.u_theta.at(i, j)
                )?;
                if let Some(p) = pressure {
                    write!(out, ",{:.16e}", p.at(i, j))?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

/// `(1/r)∂(r u_r)/∂r + (1/r)∂u_θ/∂θ`.
pub fn divergence(u: &VelocityField) -> ScalarField {
    let inv_r = |r: f64| 1.0 / r;
    let r_ur = u.u_r.scale_radial(|r| r);
    r_ur.dr().add(&u.u_theta.dtheta()).scale_radial(inv_r)
}

/// Velocity of a stream function: `u_r = (1/r)∂ψ/∂θ`, `u_θ = −∂ψ/∂r`.
pub fn curl_of_stream(psi: &ScalarField) -> VelocityField {
    VelocityField {
        u_r: psi.dtheta().scale_radial(|r| 1.0 / r),
        u_theta: psi.dr().scale(-1.0),
    }
}

/// `∮_{r=r_i} u·ê_r ds` through the circle at radial node `i`.
pub fn flux_through_circle(u: &VelocityField, i: usize) -> f64 {
    let g = u.grid();
    let dtheta = 2.0 * PI / g.n_theta() as f64;
    g.r()[i] * dtheta * u.u_r.values().row(i).iter().sum::<f64>()
}

/// Flux through the inner circle with the normal pointing out of the fluid
/// domain (`n = −ê_r` on `r = R₂`).
pub fn flux_inner(u: &VelocityField) -> f64 {
    -flux_through_circle(u, 0)
}

/// `(∫_Ω |∇w|² dx)^{1/2}` with the full polar gradient.
pub fn dirichlet_norm(w: &VelocityField) -> f64 {
    w.gradient_inner(w).max(0.0).sqrt()
}

/// `(∫_Ω |w|² + |∇w|² dx)^{1/2}`.
pub fn w12_norm(w: &VelocityField) -> f64 {
    (w.dot_integral(w) + w.gradient_inner(w)).max(0.0).sqrt()
}

/// `∫_Ω (v·∇)w · z dx`.
pub fn trilinear(v: &VelocityField, w: &VelocityField, z: &VelocityField) -> f64 {
    VelocityField::advect(v, w).dot_integral(z)
}

/// Divergence-free fields with zero trace, `curl(φ(r) b(θ))` for
/// `φ = r^m (r − R₂)²(R₁ − r)²`, `m ∈ {0, 1}`, and `b ∈ {1, cos kθ, sin kθ}`
/// up to `k = min(3, K)`.
pub fn solenoidal_test_fields(grid: &Arc<PolarGrid>) -> Vec<VelocityField> {
    let (r2, r1) = (grid.r_inner(), grid.r_outer());
    let kmax = grid.max_mode().min(3);
    let mut out = Vec::new();
    for m in 0..2 {
        let phi = move |r: f64| r.powi(m) * (r - r2).powi(2) * (r1 - r).powi(2);
        for k in 0..=kmax {
            let kf = k as f64;
            let shapes: Vec<fn(f64) -> f64> = if k == 0 {
                vec![|_| 1.0]
            } else {
                vec![f64::cos, f64::sin]
            };
            for b in shapes {
                let psi = ScalarField::from_fn(grid, |r, t| phi(r) * b(kf * t));
                out.push(curl_of_stream(&psi));
            }
        }
    }
    out
}

/// Stream function of a zero-flux solenoidal field, normalized to vanish at
/// the node `(R₂, θ = 0)`.
pub fn stream_function(w: &VelocityField) -> Result<ScalarField> {
    let grid = w.grid();
    let flux = flux_inner(w);
    if flux.abs() > 1e-10 {
        return Err(Error::MultivaluedStream { flux });
    }
    let div = divergence(w).l2_norm();
    if div > 1e-8 {
        return Err(Error::NotSolenoidal { residual: div });
    }
    // ψ(r, θ) = ψ(R₂, θ) − ∫_{R₂}^r u_θ dt, with ∂_θ ψ(R₂, θ) = R₂ u_r(R₂, θ)
    let radial = -(grid.cumulative_matrix() * w.u_theta.values());
    let edge_coeffs = grid.forward(&(w.u_r.values().rows(0, 1) * grid.r_inner()));
    let mut anti = DMatrix::zeros(1, grid.n_theta());
    for k in 1..grid.n_theta() / 2 {
        let kf = k as f64;
        // ∫ (a cos kθ + b sin kθ) dθ = (a/k) sin kθ − (b/k) cos kθ
        anti[(0, 2 * k - 1)] = -edge_coeffs[(0, 2 * k)] / kf;
        anti[(0, 2 * k)] = edge_coeffs[(0, 2 * k - 1)] / kf;
    }
    let edge = grid.inverse(&anti);
    let mut values = radial;
    for i in 0..grid.n_r() {
        for j in 0..grid.n_theta() {
            values[(i, j)] += edge[(0, j)];
        }
    }
    let shift = values[(0, 0)];
    values.iter_mut().for_each(|v| *v -= shift);
    Ok(ScalarField::new(grid, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn canonical(n_r: usize, n_theta: usize) -> Arc<PolarGrid> {
        PolarGrid::new(n_r, n_theta, 1.0, 2.0).unwrap()
    }

    fn source(g: &Arc<PolarGrid>, flux: f64) -> VelocityField {
        VelocityField::from_fn(g, move |r, _| -flux / (2.0 * PI * r), |_, _| 0.0)
    }

    #[test]
    fn divergence_examples() {
        let g = canonical(32, 16);
        assert!(divergence(&source(&g, 1.0)).abs_max() < 1e-12);
        let couette = VelocityField::from_fn(&g, |_, _| 0.0, |r, _| r);
        assert!(divergence(&couette).abs_max() < 1e-12);
        let expand = VelocityField::from_fn(&g, |r, _| r, |_, _| 0.0);
        assert!(divergence(&expand).values().iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn curl_examples() {
        let g = canonical(24, 16);
        let zero = curl_of_stream(&ScalarField::constant(&g, 3.0));
        assert!(zero.abs_max() < 1e-12);
        let rigid = curl_of_stream(&ScalarField::radial(&g, |r| -0.5 * r * r));
        assert!(rigid.u_r.abs_max() < 1e-14);
        let err = rigid.u_theta.sub(&ScalarField::radial(&g, |r| r)).abs_max();
        assert!(err < 1e-12);
        let wavy = curl_of_stream(&ScalarField::from_fn(&g, |r, t| t.sin() * (r - 1.0).powi(2) * r.exp()));
        assert!(divergence(&wavy).abs_max() < 1e-12);
    }

    #[test]
    fn flux_examples() {
        let g = canonical(16, 16);
        assert_relative_eq!(flux_inner(&source(&g, 1.0)), 1.0, epsilon = 1e-12);
        let couette = VelocityField::from_fn(&g, |_, _| 0.0, |r, _| 0.3 * r + 0.7 / r);
        assert!(flux_inner(&couette).abs() < 1e-15);
        let harmonic = VelocityField::from_fn(&g, |r, t| t.cos() / r, |_, _| 0.0);
        assert!(flux_inner(&harmonic).abs() < 1e-14);
    }

    #[test]
    fn solenoidal_flux_is_radius_independent() {
        let g = canonical(20, 16);
        let psi = ScalarField::from_fn(&g, |r, t| (2.0 * t).cos() * r.powi(3) + r * r);
        let u = source(&g, 0.7).add(&curl_of_stream(&psi));
        let f0 = flux_through_circle(&u, 0);
        for i in 1..g.n_r() {
            assert!((flux_through_circle(&u, i) - f0).abs() < 1e-10);
        }
        assert_relative_eq!(f0, -0.7, epsilon = 1e-12);
    }

    #[test]
    fn rigid_rotation_dirichlet_norm() {
        // u = (−y, x): |∇u|² = 2 pointwise, so J² = 2·3π
        let g = canonical(32, 16);
        let rigid = VelocityField::from_fn(&g, |_, _| 0.0, |r, _| r);
        assert_relative_eq!(dirichlet_norm(&rigid), (6.0 * PI).sqrt(), max_relative = 1e-12);
        assert_eq!(dirichlet_norm(&VelocityField::zeros(&g)), 0.0);
        assert_relative_eq!(
            dirichlet_norm(&rigid.scale(-2.5)),
            2.5 * dirichlet_norm(&rigid),
            max_relative = 1e-12
        );
    }

    #[test]
    fn stream_function_examples() {
        let g = canonical(24, 16);
        let rigid = VelocityField::from_fn(&g, |_, _| 0.0, |r, _| r);
        let psi = stream_function(&rigid).unwrap();
        let exact = ScalarField::radial(&g, |r| -(r * r - 1.0) / 2.0);
        assert!(psi.sub(&exact).abs_max() < 1e-12);
        assert!(matches!(
            stream_function(&source(&g, 1.0)),
            Err(Error::MultivaluedStream { .. })
        ));
    }

    #[test]
    fn stream_function_round_trip() {
        let g = canonical(24, 16);
        let psi = ScalarField::from_fn(&g, |r, t| (t.sin() + 0.5 * (3.0 * t).cos()) * r.ln() + r * r);
        let back = stream_function(&curl_of_stream(&psi)).unwrap();
        let diff = back.sub(&psi);
        let shift = diff.at(0, 0);
        assert!(diff.map(|v| v - shift).abs_max() < 1e-8);
    }

    #[test]
    fn skew_symmetry_of_trilinear_form() {
        let g = canonical(24, 16);
        // v: zero normal trace, solenoidal; w arbitrary smooth
        let bump = |r: f64| (r - 1.0).powi(2) * (2.0 - r).powi(2);
        let v = curl_of_stream(&ScalarField::from_fn(&g, move |r, t| bump(r) * (1.0 + t.cos())));
        let w = VelocityField::from_fn(&g, |r, t| r * t.sin() + 1.0, |r, t| r * r * (2.0 * t).cos());
        let value = trilinear(&v, &w, &w);
        let scale = v.l2_norm() * dirichlet_norm(&w) * w.l2_norm();
        assert!(value.abs() < 1e-8 * scale, "{value}");
    }

    #[test]
    fn vector_laplacian_of_source_vanishes() {
        let g = canonical(32, 8);
        let lap = source(&g, 2.0 * PI).vector_laplacian();
        assert!(lap.abs_max() < 1e-9);
    }

    #[test]
    fn csv_layout() {
        let g = PolarGrid::new(8, 2, 1.0, 2.0).unwrap();
        let mut buf = Vec::new();
        VelocityField::zeros(&g).write_csv(None, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "r,theta,u_r,u_theta");
        assert_eq!(lines.len(), 1 + 16);
        assert!(lines[1].starts_with("1.0000000000000000e0,0.0000000000000000e0"));
    }
}
