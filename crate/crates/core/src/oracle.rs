//! Closed-form reference flows.
//!
//! * Couette flow between rotating circles (Stokes and Navier–Stokes).
//! * The radial source/sink `u = −(F/2π) r⁻¹ ê_r` (Navier–Stokes for every ν).
//! * Spiral flow `u_r = c/r`, `u_θ = A/r + B r^{1+c/ν}` (Navier–Stokes, λ = 1).
//! * Rotational Euler flows `ŵ = f(r) ê_θ` with zero boundary velocity and
//!   unequal pressure constants on the two circles.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{ScalarField, VelocityField};
use crate::grid::PolarGrid;

/// Velocity and pressure of an exact solution.
#[derive(Debug, Clone)]
pub struct OracleFlow {
    pub velocity: VelocityField,
    pub pressure: ScalarField,
}

fn mean_zero(p: ScalarField) -> ScalarField {
    let mean = p.integrate() / p.grid().area();
    p.map(|v| v - mean)
}

/// Couette constants `(A, B)` of `u_θ = A r + B / r`.
pub fn couette_constants(r_inner: f64, r_outer: f64, omega1: f64, omega2: f64) -> (f64, f64) {
    let (r1s, r2s) = (r_outer * r_outer, r_inner * r_inner);
    let a = (omega1 * r1s - omega2 * r2s) / (r1s - r2s);
    let b = (omega2 - omega1) * r1s * r2s / (r1s - r2s);
    (a, b)
}

/// Couette flow with the outer circle at angular velocity `omega1` and the
/// inner one at `omega2`; pressure from `∂p/∂r = u_θ²/r`, mean zero.
pub fn couette(grid: &Arc<PolarGrid>, omega1: f64, omega2: f64) -> OracleFlow {
    let (a, b) = couette_constants(grid.r_inner(), grid.r_outer(), omega1, omega2);
    let velocity = VelocityField {
        u_r: ScalarField::zeros(grid),
        u_theta: ScalarField::radial(grid, |r| a * r + b / r),
    };
    let pressure = ScalarField::radial(grid, |r| {
        0.5 * a * a * r * r + 2.0 * a * b * r.ln() - 0.5 * b * b / (r * r)
    });
    OracleFlow {
        velocity,
        pressure: mean_zero(pressure),
    }
}

/// Radial source carrying flux `flux` through the inner circle.
pub fn radial_source(grid: &Arc<PolarGrid>, flux: f64, _nu: f64) -> OracleFlow {
    let velocity = VelocityField {
        u_r: ScalarField::radial(grid, |r| -flux / (2.0 * PI * r)),
        u_theta: ScalarField::zeros(grid),
    };
    let pressure = ScalarField::radial(grid, |r| -flux * flux / (8.0 * PI * PI * r * r));
    OracleFlow {
        velocity,
        pressure: mean_zero(pressure),
    }
}

/// Parameters of the spiral flow; `A` is chosen so that `u_θ(R₂) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpiralParams {
    /// `c = −F/2π`.
    pub c: f64,
    /// Swirl exponent `1 + c/ν`.
    pub exponent: f64,
    /// Coefficient of the potential vortex.
    pub a: f64,
    /// Coefficient of the power-law branch.
    pub b: f64,
}

impl SpiralParams {
    pub fn new(flux: f64, amplitude: f64, nu: f64, r_inner: f64) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::InvalidConfig(format!("viscosity must be positive, got {nu}")));
        }
        let c = -flux / (2.0 * PI);
        if (c / nu + 2.0).abs() < 1e-12 {
            return Err(Error::SpiralResonance);
        }
        let exponent = 1.0 + c / nu;
        let a = -amplitude * r_inner.powf(exponent + 1.0);
        Ok(Self {
            c,
            exponent,
            a,
            b: amplitude,
        })
    }

    pub fn radial(&self, r: f64) -> f64 {
        self.c / r
    }

    pub fn swirl(&self, r: f64) -> f64 {
        self.a / r + self.b * r.powf(self.exponent)
    }

    /// Pressure up to a constant: `∫ u_θ²/r dr − c²/(2r²)`.
    pub fn pressure(&self, r: f64) -> f64 {
        let m = self.exponent;
        // (r^m − 1)/m, continuous through m = 0
        let power_over = |m: f64| {
            if m.abs() < 1e-14 {
                r.ln()
            } else {
                (m * r.ln()).exp_m1() / m
            }
        };
        -0.5 * self.a * self.a / (r * r)
            + 2.0 * self.a * self.b * power_over(m - 1.0)
            + self.b * self.b * power_over(2.0 * m)
            - 0.5 * self.c * self.c / (r * r)
    }
}

/// Spiral flow with flux `flux` and swirl amplitude `amplitude`.
pub fn spiral_flow(grid: &Arc<PolarGrid>, flux: f64, amplitude: f64, nu: f64) -> Result<OracleFlow> {
    let s = SpiralParams::new(flux, amplitude, nu, grid.r_inner())?;
    let velocity = VelocityField {
        u_r: ScalarField::radial(grid, |r| s.radial(r)),
        u_theta: ScalarField::radial(grid, |r| s.swirl(r)),
    };
    Ok(OracleFlow {
        velocity,
        pressure: mean_zero(ScalarField::radial(grid, |r| s.pressure(r))),
    })
}

/// Radial profile shapes for rotational Euler flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileShape {
    /// `A sin²(π (r − R₂)/(R₁ − R₂))`.
    SinSquared { amplitude: f64 },
    /// `A [(r − R₂)(R₁ − r) / (h/2)²]^k`, peak `A` at mid-gap.
    PolyBump { k: u32, amplitude: f64 },
    /// `A (1 − ((r − center)/half_width)²)^k` on `|r − center| < half_width`, zero elsewhere.
    LocalBump {
        center: f64,
        half_width: f64,
        k: u32,
        amplitude: f64,
    },
}

/// Swirl profile `f` of `ŵ = f(r) ê_θ` together with `λ₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmickProfile {
    pub shape: ProfileShape,
    pub lambda0: f64,
    pub r_inner: f64,
    pub r_outer: f64,
}

impl AmickProfile {
    pub fn new(shape: ProfileShape, lambda0: f64, r_inner: f64, r_outer: f64) -> Result<Self> {
        let prof = Self {
            shape,
            lambda0,
            r_inner,
            r_outer,
        };
        prof.validate()?;
        Ok(prof)
    }

    /// The canonical `sin²(π(r − 1))` profile on the `(1, 2)` annulus.
    pub fn sin_squared(lambda0: f64) -> Self {
        Self {
            shape: ProfileShape::SinSquared { amplitude: 1.0 },
            lambda0,
            r_inner: 1.0,
            r_outer: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda0) {
            return Err(Error::InvalidProfile(format!("lambda0 = {} outside [0, 1]", self.lambda0)));
        }
        if !(self.r_inner < self.r_outer) {
            return Err(Error::InvalidProfile("radii out of order".into()));
        }
        match self.shape {
            ProfileShape::PolyBump { k, .. } | ProfileShape::LocalBump { k, .. } if k == 0 => {
                return Err(Error::InvalidProfile("bump exponent must be positive".into()));
            }
            ProfileShape::LocalBump {
                center, half_width, ..
            } if !(half_width > 0.0)
                || center - half_width < self.r_inner - 1e-12
                || center + half_width > self.r_outer + 1e-12 =>
            {
                return Err(Error::InvalidProfile(format!(
                    "bump support ({}, {}) leaves the annulus",
                    center - half_width,
                    center + half_width
                )));
            }
            _ => {}
        }
        let ends = self.f(self.r_inner).abs().max(self.f(self.r_outer).abs());
        if ends > 1e-12 {
            return Err(Error::InvalidProfile(format!("profile does not vanish at the walls ({ends:e})")));
        }
        Ok(())
    }

    pub fn f(&self, r: f64) -> f64 {
        let h = self.r_outer - self.r_inner;
        match self.shape {
            ProfileShape::SinSquared { amplitude } => {
                amplitude * (PI * (r - self.r_inner) / h).sin().powi(2)
            }
            ProfileShape::PolyBump { k, amplitude } => {
                let s = (r - self.r_inner) * (self.r_outer - r) / (0.25 * h * h);
                amplitude * s.powi(k as i32)
            }
            ProfileShape::LocalBump {
                center,
                half_width,
                k,
                amplitude,
            } => {
                let s = (r - center) / half_width;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - s * s).powi(k as i32)
                }
            }
        }
    }

    /// Same shape with the amplitude multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        match &mut out.shape {
            ProfileShape::SinSquared { amplitude }
            | ProfileShape::PolyBump { amplitude, .. }
            | ProfileShape::LocalBump { amplitude, .. } => *amplitude *= c,
        }
        out
    }

    /// Points where the profile is not smooth, plus the end points.
    fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![self.r_inner];
        if let ProfileShape::LocalBump {
            center, half_width, ..
        } = self.shape
        {
            for p in [center - half_width, center + half_width] {
                if p > self.r_inner && p < self.r_outer {
                    pts.push(p);
                }
            }
        }
        pts.push(self.r_outer);
        pts
    }
}

/// `ŵ_r = 0`, `ŵ_θ = f(r)`, `p̂(r) = λ₀ ∫_{R₂}^r f²(t)/t dt` (spectral quadrature).
pub fn amick_flow(grid: &Arc<PolarGrid>, prof: &AmickProfile) -> Result<OracleFlow> {
    prof.validate()?;
    if prof.r_inner != grid.r_inner() || prof.r_outer != grid.r_outer() {
        return Err(Error::InvalidProfile("profile radii differ from grid radii".into()));
    }
    let integrand = grid.radial_vector(|r| prof.f(r).powi(2) / r);
    let cumulative = grid.cumulative_matrix() * integrand;
    let pressure = ScalarField::new(
        grid,
        nalgebra::DMatrix::from_fn(grid.n_r(), grid.n_theta(), |i, _| prof.lambda0 * cumulative[i]),
    );
    let velocity = VelocityField {
        u_r: ScalarField::zeros(grid),
        u_theta: ScalarField::radial(grid, |r| prof.f(r)),
    };
    Ok(OracleFlow { velocity, pressure })
}

/// `p̂₁ − p̂₂ = λ₀ ∫_{R₂}^{R₁} f²(t)/t dt`, by composite Gauss–Legendre
/// quadrature split at the profile's breakpoints.
pub fn amick_pressure_drop(prof: &AmickProfile) -> f64 {
    let integrand = |t: f64| prof.f(t).powi(2) / t;
    let pts = prof.breakpoints();
    let total: f64 = pts
        .windows(2)
        .map(|w| gauss_legendre_composite(integrand, w[0], w[1], 64, 16))
        .sum();
    prof.lambda0 * total
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn gauss_legendre_composite(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = a + (p as f64 + 0.5) * h;
            x.iter().zip(&w).map(|(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
        })
        .sum()
}
