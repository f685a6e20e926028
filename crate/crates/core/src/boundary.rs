//! Boundary data on the two circles, compatibility, the flux carrier and a
//! divergence-free extension into the annulus.
//!
//! Normal components are taken with respect to the normal pointing out of
//! the fluid: `n = ê_r` on the outer circle Γ₁, `n = −ê_r` on the inner
//! circle Γ₂. Tangential components are measured along `ê_θ` on both circles.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{w12_norm, ScalarField, VelocityField};
use crate::grid::PolarGrid;
use crate::oracle::SpiralParams;

/// Truncated real Fourier series `mean + Σ cos[k-1] cos kθ + sin[k-1] sin kθ`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AngularSeries {
    #[serde(default)]
    pub mean: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl AngularSeries {
    pub fn constant(mean: f64) -> Self {
        Self {
            mean,
            ..Self::default()
        }
    }

    /// Coefficients `(a_k, b_k)` of `cos kθ`, `sin kθ`; `k = 0` gives `(mean, 0)`.
    pub fn mode(&self, k: usize) -> (f64, f64) {
        if k == 0 {
            return (self.mean, 0.0);
        }
        (
            self.cos.get(k - 1).copied().unwrap_or(0.0),
            self.sin.get(k - 1).copied().unwrap_or(0.0),
        )
    }

    /// Highest wavenumber with a nonzero coefficient.
    pub fn max_mode(&self) -> usize {
        let last = |v: &[f64]| v.iter().rposition(|c| *c != 0.0).map_or(0, |p| p + 1);
        last(&self.cos).max(last(&self.sin))
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let mut v = self.mean;
        for k in 1..=self.max_mode() {
            let (a, b) = self.mode(k);
            let kt = k as f64 * theta;
            v += a * kt.cos() + b * kt.sin();
        }
        v
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            mean: self.mean * c,
            cos: self.cos.iter().map(|v| v * c).collect(),
            sin: self.sin.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.max_mode().max(other.max_mode());
        let (cos, sin) = (1..=n)
            .map(|k| {
                let (a1, b1) = self.mode(k);
                let (a2, b2) = other.mode(k);
                (a1 + a2, b1 + b2)
            })
            .unzip();
        Self {
            mean: self.mean + other.mean,
            cos,
            sin,
        }
    }

    /// `Σ_{k∈ℤ} (1+|k|) |ĉ_k|²` for the complex coefficients of the series.
    fn half_norm_squared(&self) -> f64 {
        let mut s = self.mean * self.mean;
        for k in 1..=self.max_mode() {
            let (a, b) = self.mode(k);
            s += (1.0 + k as f64) * 0.5 * (a * a + b * b);
        }
        s
    }

    /// Series of nodal data on equispaced angles (Nyquist content dropped).
    pub fn from_samples(grid: &PolarGrid, samples: &[f64]) -> Self {
        let row = DMatrix::from_row_slice(1, samples.len(), samples);
        let c = grid.forward(&row);
        let k_max = grid.max_mode();
        Self {
            mean: c[(0, 0)],
            cos: (1..=k_max).map(|k| c[(0, 2 * k - 1)]).collect(),
            sin: (1..=k_max).map(|k| c[(0, 2 * k)]).collect(),
        }
    }
}

/// Normal and tangential data on one circle.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CircleData {
    #[serde(default)]
    pub normal: AngularSeries,
    #[serde(default)]
    pub tangential: AngularSeries,
}

impl CircleData {
    fn scale(&self, c: f64) -> Self {
        Self {
            normal: self.normal.scale(c),
            tangential: self.tangential.scale(c),
        }
    }

    fn add(&self, other: &Self) -> Self {
        Self {
            normal: self.normal.add(&other.normal),
            tangential: self.tangential.add(&other.tangential),
        }
    }
}

/// Named boundary-data presets, as they appear in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySpec {
    /// Radial outflow through the inner circle only.
    PureFlux { flux: f64 },
    /// Rigid rotation of each circle: `omega1` on the outer, `omega2` on the inner.
    Couette { omega1: f64, omega2: f64 },
    /// Source/sink with swirl; traces of the exact spiral flow.
    Spiral { flux: f64, amplitude: f64 },
    /// Explicit coefficient lists.
    Fourier { outer: CircleData, inner: CircleData },
}

/// Boundary datum `a` on Γ₁ (outer) and Γ₂ (inner).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTrace {
    pub r_inner: f64,
    pub r_outer: f64,
    pub outer: CircleData,
    pub inner: CircleData,
}

impl BoundaryTrace {
    /// Builds a trace without checking compatibility.
    pub fn new_unchecked(r_inner: f64, r_outer: f64, outer: CircleData, inner: CircleData) -> Self {
        Self {
            r_inner,
            r_outer,
            outer,
            inner,
        }
    }

    /// Builds a trace and rejects data violating the zero total flux condition.
    pub fn new(r_inner: f64, r_outer: f64, outer: CircleData, inner: CircleData) -> Result<Self> {
        let trace = Self::new_unchecked(r_inner, r_outer, outer, inner);
        trace.check_admissible()?;
        Ok(trace)
    }

    pub fn zero(r_inner: f64, r_outer: f64) -> Self {
        Self::new_unchecked(r_inner, r_outer, CircleData::default(), CircleData::default())
    }

    /// `∮_{Γ₂} a·n dS`.
    pub fn flux(&self) -> f64 {
        2.0 * PI * self.r_inner * self.inner.normal.mean
    }

    /// `∮_{Γ₁} a·n dS`.
    pub fn outer_flux(&self) -> f64 {
        2.0 * PI * self.r_outer * self.outer.normal.mean
    }

    pub fn check_admissible(&self) -> Result<()> {
        let inner = self.flux();
        let outer = self.outer_flux();
        if !(inner.is_finite() && outer.is_finite()) || (inner + outer).abs() > 1e-10 {
            return Err(Error::Inadmissible { inner, outer });
        }
        Ok(())
    }

    /// Same tangential data and angular structure, net flux replaced by `flux`.
    pub fn with_flux(&self, flux: f64) -> Self {
        let mut t = self.clone();
        t.inner.normal.mean = flux / (2.0 * PI * self.r_inner);
        t.outer.normal.mean = -flux / (2.0 * PI * self.r_outer);
        t
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new_unchecked(self.r_inner, self.r_outer, self.outer.scale(c), self.inner.scale(c))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new_unchecked(
            self.r_inner,
            self.r_outer,
            self.outer.add(&other.outer),
            self.inner.add(&other.inner),
        )
    }

    /// Trace of a velocity field on its grid.
    pub fn from_velocity(u: &VelocityField) -> Self {
        let g = u.grid();
        let last = g.n_r() - 1;
        let row = |f: &ScalarField, i: usize| f.values().row(i).iter().copied().collect::<Vec<_>>();
        let inner_ur: Vec<f64> = row(&u.u_r, 0).into_iter().map(|v| -v).collect();
        Self::new_unchecked(
            g.r_inner(),
            g.r_outer(),
            CircleData {
                normal: AngularSeries::from_samples(g, &row(&u.u_r, last)),
                tangential: AngularSeries::from_samples(g, &row(&u.u_theta, last)),
            },
            CircleData {
                normal: AngularSeries::from_samples(g, &inner_ur),
                tangential: AngularSeries::from_samples(g, &row(&u.u_theta, 0)),
            },
        )
    }

    fn max_mode(&self) -> usize {
        [&self.outer, &self.inner]
            .iter()
            .map(|c| c.normal.max_mode().max(c.tangential.max_mode()))
            .max()
            .unwrap_or(0)
    }

    /// Checks that the trace sits on the grid's circles and is resolved by it.
    pub fn ensure_fits(&self, grid: &PolarGrid) -> Result<()> {
        if self.r_inner != grid.r_inner() || self.r_outer != grid.r_outer() {
            return Err(Error::InvalidBoundary(format!(
                "trace radii ({}, {}) differ from grid radii ({}, {})",
                self.r_inner,
                self.r_outer,
                grid.r_inner(),
                grid.r_outer()
            )));
        }
        let max = grid.max_mode();
        let mode = self.max_mode();
        if mode > max {
            return Err(Error::UnresolvedTrace { mode, max });
        }
        Ok(())
    }

    /// Polar velocity components `(u_r, u_θ)` of the datum on each circle.
    fn polar(&self, outer: bool) -> (AngularSeries, AngularSeries) {
        if outer {
            (self.outer.normal.clone(), self.outer.tangential.clone())
        } else {
            (self.inner.normal.scale(-1.0), self.inner.tangential.clone())
        }
    }

    /// Prescribed `(u_r, u_θ)` at boundary node `θ`.
    pub fn velocity_at(&self, outer: bool, theta: f64) -> (f64, f64) {
        let (ur, ut) = self.polar(outer);
        (ur.eval(theta), ut.eval(theta))
    }

    /// `(Σ_circles 2πR Σ_k (1+|k|)|ĉ_k|²)^{1/2}` over both components.
    pub fn trace_norm_proxy(&self) -> f64 {
        let circle = |c: &CircleData, r: f64| {
            2.0 * PI * r * (c.normal.half_norm_squared() + c.tangential.half_norm_squared())
        };
        (circle(&self.outer, self.r_outer) + circle(&self.inner, self.r_inner)).sqrt()
    }

    /// Boundary values and slopes of the stream function of `a − u_F`.
    pub fn stream_data(&self, grid: &PolarGrid) -> Result<StreamBoundaryData> {
        self.ensure_fits(grid)?;
        let n = grid.n_theta();
        let mut data = StreamBoundaryData {
            inner_value: vec![0.0; n],
            inner_slope: vec![0.0; n],
            outer_value: vec![0.0; n],
            outer_slope: vec![0.0; n],
        };
        for (outer, radius) in [(false, self.r_inner), (true, self.r_outer)] {
            let (ur, ut) = self.polar(outer);
            let (value, slope) = if outer {
                (&mut data.outer_value, &mut data.outer_slope)
            } else {
                (&mut data.inner_value, &mut data.inner_slope)
            };
            // u_θ = −ψ_r on every mode; u_r = ψ_θ / R on nonzero modes
            slope[0] = -ut.mean;
            for k in 1..=grid.max_mode() {
                let (alpha, beta) = ur.mode(k);
                let (ta, tb) = ut.mode(k);
                let kf = k as f64;
                value[2 * k - 1] = -radius * beta / kf;
                value[2 * k] = radius * alpha / kf;
                slope[2 * k - 1] = -ta;
                slope[2 * k] = -tb;
            }
        }
        Ok(data)
    }

    /// Largest nodal mismatch between `u` and the datum on both circles.
    pub fn trace_error(&self, u: &VelocityField) -> f64 {
        let g = u.grid();
        let last = g.n_r() - 1;
        let mut err: f64 = 0.0;
        for (j, &t) in g.theta().iter().enumerate() {
            for (outer, i) in [(false, 0), (true, last)] {
                let (ur, ut) = self.velocity_at(outer, t);
                err = err
                    .max((u.u_r.at(i, j) - ur).abs())
                    .max((u.u_theta.at(i, j) - ut).abs());
            }
        }
        err
    }
}

/// Stream-function boundary data per angular coefficient column (grid layout).
/// The mode-0 outer value is not fixed by the datum; it is left at zero here.
#[derive(Debug, Clone)]
pub struct StreamBoundaryData {
    pub inner_value: Vec<f64>,
    pub inner_slope: Vec<f64>,
    pub outer_value: Vec<f64>,
    pub outer_slope: Vec<f64>,
}

/// Builds the trace named by `spec`. `nu` is only used by the spiral preset.
pub fn make_trace(spec: &BoundarySpec, r_inner: f64, r_outer: f64, nu: f64) -> Result<BoundaryTrace> {
    let constant = |normal: f64, tangential: f64| CircleData {
        normal: AngularSeries::constant(normal),
        tangential: AngularSeries::constant(tangential),
    };
    match spec {
        BoundarySpec::PureFlux { flux } => BoundaryTrace::new(
            r_inner,
            r_outer,
            constant(-flux / (2.0 * PI * r_outer), 0.0),
            constant(flux / (2.0 * PI * r_inner), 0.0),
        ),
        BoundarySpec::Couette { omega1, omega2 } => BoundaryTrace::new(
            r_inner,
            r_outer,
            constant(0.0, omega1 * r_outer),
            constant(0.0, omega2 * r_inner),
        ),
        BoundarySpec::Spiral { flux, amplitude } => {
            let params = SpiralParams::new(*flux, *amplitude, nu, r_inner)?;
            BoundaryTrace::new(
                r_inner,
                r_outer,
                constant(params.radial(r_outer), params.swirl(r_outer)),
                constant(-params.radial(r_inner), params.swirl(r_inner)),
            )
        }
        BoundarySpec::Fourier { outer, inner } => {
            BoundaryTrace::new(r_inner, r_outer, outer.clone(), inner.clone())
        }
    }
}

/// `u_F = −(F/2π)(1/r) ê_r`: solenoidal, irrotational, flux `F` through Γ₂.
pub fn flux_carrier(grid: &Arc<PolarGrid>, flux: f64) -> VelocityField {
    VelocityField {
        u_r: ScalarField::radial(grid, |r| -flux / (2.0 * PI * r)),
        u_theta: ScalarField::zeros(grid),
    }
}

/// Divergence-free extension together with its empirical bound ratio.
#[derive(Debug, Clone)]
pub struct Extension {
    pub field: VelocityField,
    /// `‖A‖_{W^{1,2}} / ‖a‖_{trace proxy}` (zero for zero data).
    pub bound_ratio: f64,
}

/// Quintic Hermite blend on `[0, 1]` with zero second derivatives at both
/// ends. Returns the value and the `t`-derivative.
fn quintic_blend(t: f64, v0: f64, s0: f64, s1: f64, v1: f64) -> (f64, f64) {
    let (t2, t3, t4, t5) = (t * t, t * t * t, t.powi(4), t.powi(5));
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let dh0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
    let dh1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
    let dh4 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
    let dh5 = 30.0 * t2 - 60.0 * t3 + 30.0 * t4;
    (
        v0 * h0 + s0 * h1 + s1 * h4 + v1 * h5,
        v0 * dh0 + s0 * dh1 + s1 * dh4 + v1 * dh5,
    )
}

/// `A = u_F + curl ψ_ext`, with `ψ_ext` a quintic blend per angular mode of
/// the boundary stream data of the zero-flux remainder.
pub fn solenoidal_extension(grid: &Arc<PolarGrid>, a: &BoundaryTrace) -> Result<Extension> {
    a.check_admissible()?;
    let data = a.stream_data(grid)?;
    let h = grid.r_outer() - grid.r_inner();
    let n = grid.n_theta();
    let mut psi = DMatrix::zeros(grid.n_r(), n);
    let mut psi_r = DMatrix::zeros(grid.n_r(), n);
    for col in 0..n - 1 {
        let v0 = data.inner_value[col];
        let s0 = data.inner_slope[col];
        let s1 = data.outer_slope[col];
        let v1 = if col == 0 {
            // mode 0 is free on Γ₁; trapezoid rule keeps the blend monotone in the slopes
            v0 + 0.5 * h * (s0 + s1)
        } else {
            data.outer_value[col]
        };
        for (i, &r) in grid.r().iter().enumerate() {
            let t = (r - grid.r_inner()) / h;
            let (val, dval) = quintic_blend(t, v0, h * s0, h * s1, v1);
            psi[(i, col)] = val;
            psi_r[(i, col)] = dval / h;
        }
    }
    let u_r = grid.scale_rows(&grid.inverse(&grid.coeff_dtheta(&psi)), |r| 1.0 / r);
    let u_theta = -grid.inverse(&psi_r);
    let field = flux_carrier(grid, a.flux()).add(&VelocityField {
        u_r: ScalarField::new(grid, u_r),
        u_theta: ScalarField::new(grid, u_theta),
    });
    let proxy = a.trace_norm_proxy();
    let bound_ratio = if proxy > 0.0 { w12_norm(&field) / proxy } else { 0.0 };
    Ok(Extension { field, bound_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{divergence, flux_inner};
    use approx::assert_relative_eq;

    fn grid() -> Arc<PolarGrid> {
        PolarGrid::new(24, 16, 1.0, 2.0).unwrap()
    }

    fn wavy() -> BoundaryTrace {
        BoundaryTrace::new(
            1.0,
            2.0,
            CircleData {
                normal: AngularSeries {
                    mean: -0.25 / PI,
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
                    mean: 0.5 / PI,
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
        .unwrap()
    }

    #[test]
    fn pure_flux_trace() {
        let t = make_trace(&BoundarySpec::PureFlux { flux: 1.0 }, 1.0, 2.0, 1.0).unwrap();
        assert_relative_eq!(t.inner.normal.mean, 1.0 / (2.0 * PI), epsilon = 1e-15);
        assert_relative_eq!(t.flux(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(t.outer_flux(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn couette_trace_has_no_flux() {
        let t = make_trace(&BoundarySpec::Couette { omega1: 1.0, omega2: 0.0 }, 1.0, 2.0, 1.0).unwrap();
        assert_eq!(t.flux(), 0.0);
        assert_eq!(t.outer.tangential.mean, 2.0);
    }

    #[test]
    fn incompatible_fourier_data_rejected() {
        let spec = BoundarySpec::Fourier {
            outer: CircleData::default(),
            inner: CircleData {
                normal: AngularSeries::constant(1.0 / (2.0 * PI)),
                tangential: AngularSeries::default(),
            },
        };
        match make_trace(&spec, 1.0, 2.0, 1.0) {
            Err(Error::Inadmissible { inner, outer }) => {
                assert_relative_eq!(inner, 1.0, epsilon = 1e-12);
                assert_eq!(outer, 0.0);
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn carrier_examples() {
        let g = grid();
        assert_eq!(flux_carrier(&g, 0.0).abs_max(), 0.0);
        let u = flux_carrier(&g, 2.0 * PI);
        assert!(u.u_r.sub(&ScalarField::radial(&g, |r| -1.0 / r)).abs_max() < 1e-15);
        assert_relative_eq!(flux_inner(&u), 2.0 * PI, epsilon = 1e-12);
        for f in [-3.0, 0.5, 7.0] {
            let u = flux_carrier(&g, f);
            assert!(u.vorticity().abs_max() < 1e-12);
            assert!(divergence(&u).abs_max() < 1e-12);
        }
    }

    #[test]
    fn extension_of_pure_flux_is_carrier() {
        let g = grid();
        let t = make_trace(&BoundarySpec::PureFlux { flux: 1.0 }, 1.0, 2.0, 1.0).unwrap();
        let ext = solenoidal_extension(&g, &t).unwrap();
        assert!(ext.field.sub(&flux_carrier(&g, 1.0)).abs_max() < 1e-15);
    }

    #[test]
    fn extension_of_zero_is_zero() {
        let g = grid();
        let ext = solenoidal_extension(&g, &BoundaryTrace::zero(1.0, 2.0)).unwrap();
        assert_eq!(ext.field.abs_max(), 0.0);
        assert_eq!(ext.bound_ratio, 0.0);
    }

    #[test]
    fn extension_matches_trace_and_is_solenoidal() {
        let g = grid();
        for t in [
            make_trace(&BoundarySpec::Couette { omega1: 1.0, omega2: -0.5 }, 1.0, 2.0, 1.0).unwrap(),
            make_trace(&BoundarySpec::Spiral { flux: 2.0 * PI, amplitude: 1.0 }, 1.0, 2.0, 1.0).unwrap(),
            wavy(),
        ] {
            let ext = solenoidal_extension(&g, &t).unwrap();
            assert!(divergence(&ext.field).abs_max() < 1e-10);
            assert!(t.trace_error(&ext.field) < 1e-10);
            assert_relative_eq!(flux_inner(&ext.field), t.flux(), epsilon = 1e-10);
            assert!(ext.bound_ratio.is_finite() && ext.bound_ratio > 0.0);
        }
    }

    #[test]
    fn extension_is_linear() {
        let g = grid();
        let a1 = wavy();
        let a2 = make_trace(&BoundarySpec::Spiral { flux: -1.0, amplitude: 0.5 }, 1.0, 2.0, 1.0).unwrap();
        let sum = solenoidal_extension(&g, &a1.add(&a2)).unwrap().field;
        let parts = solenoidal_extension(&g, &a1)
            .unwrap()
            .field
            .add(&solenoidal_extension(&g, &a2).unwrap().field);
        assert!(sum.sub(&parts).abs_max() < 1e-10);
    }

    #[test]
    fn unresolved_trace_rejected() {
        let g = PolarGrid::new(16, 8, 1.0, 2.0).unwrap();
        let mut t = wavy();
        t.outer.tangential.cos = vec![0.0, 0.0, 0.0, 1.0];
        assert!(matches!(t.stream_data(&g), Err(Error::UnresolvedTrace { mode: 4, max: 3 })));
    }

    #[test]
    fn trace_round_trip_through_velocity() {
        let g = grid();
        let ext = solenoidal_extension(&g, &wavy()).unwrap();
        let back = BoundaryTrace::from_velocity(&ext.field);
        let diff = back.add(&wavy().scale(-1.0));
        assert!(diff.trace_norm_proxy() < 1e-12);
    }
}
