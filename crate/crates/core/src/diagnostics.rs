//! Quantities of the blow-up argument: normalization `ŵ = w/J`,
//! `p̂ = p/J²`, the head pressure `Φ = p + (λ/2)|u|²`, Bernoulli constancy
//! along streamlines, boundary pressure constants, the one-sided maximum
//! principle for `Φ`, the energy and integral identities, and the Euler
//! residual of a normalized pair.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::boundary::flux_carrier;
use crate::error::{Error, Result};
use crate::fields::{
    dirichlet_norm, divergence, flux_inner, stream_function, trilinear, ScalarField, VelocityField,
};
use crate::grid::PolarGrid;

/// Number of ψ-bands used by [`bernoulli_deviation`].
pub const BERNOULLI_BANDS: usize = 64;
/// Nodes with `|∇ψ|` below this fraction of its maximum count as critical.
pub const CRITICAL_FRACTION: f64 = 1e-6;
/// Relative tolerance of [`max_principle_check`].
pub const MAX_PRINCIPLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Normalized {
    pub w_hat: VelocityField,
    pub p_hat: ScalarField,
    pub j: f64,
}

/// `(w/J, p/J², J)` with `J = ‖w‖_H`.
pub fn normalize(w: &VelocityField, p: &ScalarField) -> Result<Normalized> {
    let j = dirichlet_norm(w);
    if !(j > 0.0) {
        return Err(Error::ZeroNorm);
    }
    Ok(Normalized {
        w_hat: w.scale(1.0 / j),
        p_hat: p.scale(1.0 / (j * j)),
        j,
    })
}

/// `Φ = p + (λ/2)(u_r² + u_θ²)`.
pub fn head_pressure(u: &VelocityField, p: &ScalarField, lambda: f64) -> ScalarField {
    p.add(&u.speed_squared().scale(0.5 * lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bernoulli {
    pub deviation: f64,
    /// ψ was constant; `deviation` is the spread of Φ over the whole domain.
    pub degenerate: bool,
    /// Bands that contained nodes and no critical point.
    pub bands_used: usize,
}

/// Variation of Φ along the level sets of ψ.
///
/// Nodes are binned into [`BERNOULLI_BANDS`] uniform ψ-bands; bands holding
/// a critical node of ψ are skipped. On a closed level curve of length `L`
/// the spread of Φ is at most `(L/2)·max|∂_sΦ|`; each band contributes
/// `max π r |∂_sΦ|` over its nodes, with `∂_sΦ = (∇Φ × ∇ψ)/|∇ψ|`.
pub fn bernoulli_deviation(phi: &ScalarField, psi: &ScalarField) -> Result<Bernoulli> {
    phi.ensure_same_grid(psi)?;
    let grid = phi.grid();
    let (lo, hi) = (psi.min(), psi.max());
    if !(hi - lo > 1e-14 * psi.abs_max().max(1.0)) {
        return Ok(Bernoulli {
            deviation: phi.max() - phi.min(),
            degenerate: true,
            bands_used: 0,
        });
    }
    let inv_r = |r: f64| 1.0 / r;
    let psi_r = psi.dr();
    let psi_t = psi.dtheta().scale_radial(inv_r);
    let phi_r = phi.dr();
    let phi_t = phi.dtheta().scale_radial(inv_r);
    let (n_r, n_t) = (grid.n_r(), grid.n_theta());
    let grad = |i: usize, j: usize| psi_r.at(i, j).hypot(psi_t.at(i, j));
    let mut gmax: f64 = 0.0;
    for i in 0..n_r {
        for j in 0..n_t {
            gmax = gmax.max(grad(i, j));
        }
    }
    let band = |v: f64| (((v - lo) / (hi - lo) * BERNOULLI_BANDS as f64) as usize).min(BERNOULLI_BANDS - 1);
    let mut critical = [false; BERNOULLI_BANDS];
    let mut spread = [None::<f64>; BERNOULLI_BANDS];
    for i in 0..n_r {
        let r = grid.r()[i];
        for j in 0..n_t {
            let b = band(psi.at(i, j));
            let g = grad(i, j);
            if g < CRITICAL_FRACTION * gmax {
                critical[b] = true;
                continue;
            }
            let ds = (phi_r.at(i, j) * psi_t.at(i, j) - phi_t.at(i, j) * psi_r.at(i, j)) / g;
            let s = PI * r * ds.abs();
            spread[b] = Some(spread[b].map_or(s, |v: f64| v.max(s)));
        }
    }
    let mut deviation: f64 = 0.0;
    let mut bands_used = 0;
    for b in 0..BERNOULLI_BANDS {
        if let (false, Some(s)) = (critical[b], spread[b]) {
            deviation = deviation.max(s);
            bands_used += 1;
        }
    }
    Ok(Bernoulli {
        deviation,
        degenerate: false,
        bands_used,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPressures {
    /// Angular mean on Γ₁ (outer circle).
    pub p1: f64,
    /// Angular mean on Γ₂ (inner circle).
    pub p2: f64,
    /// Largest deviation from the mean on either circle.
    pub deviation: f64,
}

pub fn boundary_pressures(p: &ScalarField) -> BoundaryPressures {
    let stats = |v: Vec<f64>| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let dev = v.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
        (mean, dev)
    };
    let (p1, d1) = stats(p.outer_trace());
    let (p2, d2) = stats(p.inner_trace());
    BoundaryPressures {
        p1,
        p2,
        deviation: d1.max(d2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxPrinciple {
    pub ok: bool,
    /// `sup_interior Φ − max(sup_Γ₁ Φ, sup_Γ₂ Φ)`.
    pub margin: f64,
    /// `max(1, sup|Φ|)`.
    pub scale: f64,
    pub interior_sup: f64,
    pub boundary_sup: f64,
}

/// One-sided maximum principle with nodal suprema.
pub fn max_principle_check(phi: &ScalarField) -> MaxPrinciple {
    let n = phi.grid().n_r();
    let v = phi.values();
    let row_max = |i: usize| v.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let boundary_sup = row_max(0).max(row_max(n - 1));
    let interior_sup = (1..n - 1).map(row_max).fold(f64::NEG_INFINITY, f64::max);
    let margin = interior_sup - boundary_sup;
    let scale = phi.abs_max().max(1.0);
    MaxPrinciple {
        ok: margin <= MAX_PRINCIPLE_TOL * scale,
        margin,
        scale,
        interior_sup,
        boundary_sup,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Identity {
    pub lhs: f64,
    pub rhs: f64,
    pub defect: f64,
}

impl Identity {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            defect: (lhs - rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyIdentity {
    /// `λ₀∫(ŵ·∇)ŵ·U` against `𝓕(p₁ − p₂)`.
    pub identity: Identity,
    /// `|λ₀∫(ŵ·∇)ŵ·U − ν|`.
    pub nu_defect: f64,
}

pub fn identity_energy(
    w_hat: &VelocityField,
    u_ext: &VelocityField,
    lambda0: f64,
    nu: f64,
    p1: f64,
    p2: f64,
    flux: f64,
) -> EnergyIdentity {
    let lhs = lambda0 * trilinear(w_hat, w_hat, u_ext);
    EnergyIdentity {
        identity: Identity::new(lhs, flux * (p1 - p2)),
        nu_defect: (lhs - nu).abs(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeadIntegral {
    /// `∫_Ω Φ̂` against `p₁|Ω₁| − p₂|Ω₂|`.
    pub identity: Identity,
    /// `∫_Ω Φ̂ ≤ max(p₁, p₂)|Ω|`.
    pub bound_ok: bool,
    pub bound: f64,
}

/// `|Ω₁|`, `|Ω₂|` are the areas of the disks bounded by Γ₁ and Γ₂.
pub fn identity_37(phi_hat: &ScalarField, p1: f64, p2: f64, grid: &Arc<PolarGrid>) -> HeadIntegral {
    let lhs = phi_hat.integrate();
    let rhs = p1 * grid.area_outer_disk() - p2 * grid.area_inner_disk();
    let bound = p1.max(p2) * grid.area();
    HeadIntegral {
        identity: Identity::new(lhs, rhs),
        bound_ok: lhs <= bound + 1e-12 * bound.abs().max(1.0),
        bound,
    }
}

/// `‖λ₀(ŵ·∇)ŵ + ∇p̂‖_{L²} + ‖div ŵ‖_{L²}`.
pub fn euler_residual(w_hat: &VelocityField, p_hat: &ScalarField, lambda0: f64) -> f64 {
    let grad = VelocityField {
        u_r: p_hat.dr(),
        u_theta: p_hat.dtheta().scale_radial(|r| 1.0 / r),
    };
    VelocityField::advect(w_hat, w_hat)
        .scale(lambda0)
        .add(&grad)
        .l2_norm()
        + divergence(w_hat).l2_norm()
}

/// Serialized diagnostics block of a report.
///
/// `p1`, `p2`, `phi_*`, `max_principle_*` and `bernoulli_deviation` refer to
/// the fields as given; the identity and Euler entries use the normalized
/// pair `(ŵ, p̂)` and are zero when `normalized` is false.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub p1: f64,
    pub p2: f64,
    pub boundary_pressure_deviation: f64,
    pub phi_interior_sup: f64,
    pub phi_boundary_sup: f64,
    pub max_principle_ok: bool,
    pub max_principle_margin: f64,
    pub bernoulli_deviation: f64,
    pub bernoulli_degenerate: bool,
    pub identity26_lhs: f64,
    pub identity26_rhs: f64,
    pub identity32_lhs: f64,
    pub identity32_rhs: f64,
    pub identity37_lhs: f64,
    pub identity37_rhs: f64,
    pub identity36_bound_ok: bool,
    pub euler_residual: f64,
    pub normalized: bool,
}

impl DiagnosticsRecord {
    /// Every number NaN and every flag false; stands in when the fields
    /// could not be post-processed.
    pub fn undefined() -> Self {
        let n = f64::NAN;
        Self {
            p1: n,
            p2: n,
            boundary_pressure_deviation: n,
            phi_interior_sup: n,
            phi_boundary_sup: n,
            max_principle_ok: false,
            max_principle_margin: n,
            bernoulli_deviation: n,
            bernoulli_degenerate: false,
            identity26_lhs: n,
            identity26_rhs: n,
            identity32_lhs: n,
            identity32_rhs: n,
            identity37_lhs: n,
            identity37_rhs: n,
            identity36_bound_ok: false,
            euler_residual: n,
            normalized: false,
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.p1,
            self.p2,
            self.boundary_pressure_deviation,
            self.phi_interior_sup,
            self.phi_boundary_sup,
            self.max_principle_margin,
            self.bernoulli_deviation,
            self.identity26_lhs,
            self.identity26_rhs,
            self.identity32_lhs,
            self.identity32_rhs,
            self.identity37_lhs,
            self.identity37_rhs,
            self.euler_residual,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Entries that depend only on `(u, p)`: boundary constants, head pressure,
/// maximum principle and Bernoulli.
fn base_record(u: &VelocityField, p: &ScalarField, lambda: f64) -> Result<DiagnosticsRecord> {
    let phi = head_pressure(u, p, lambda);
    let mp = max_principle_check(&phi);
    let bp = boundary_pressures(p);
    let remainder = u.sub(&flux_carrier(u.grid(), flux_inner(u)));
    let psi = stream_function(&remainder)?;
    let bern = bernoulli_deviation(&phi, &psi)?;
    Ok(DiagnosticsRecord {
        p1: bp.p1,
        p2: bp.p2,
        boundary_pressure_deviation: bp.deviation,
        phi_interior_sup: mp.interior_sup,
        phi_boundary_sup: mp.boundary_sup,
        max_principle_ok: mp.ok,
        max_principle_margin: mp.margin,
        bernoulli_deviation: bern.deviation,
        bernoulli_degenerate: bern.degenerate,
        identity36_bound_ok: true,
        ..Default::default()
    })
}

fn fill_identities(
    rec: &mut DiagnosticsRecord,
    w_hat: &VelocityField,
    p_hat: &ScalarField,
    u_ext: &VelocityField,
    lambda: f64,
    nu: f64,
    inv_j: f64,
) {
    let g = w_hat.grid();
    let flux = flux_inner(u_ext);
    let bp = boundary_pressures(p_hat);
    let energy = identity_energy(w_hat, u_ext, lambda, nu, bp.p1, bp.p2, flux);
    rec.identity26_lhs = nu * w_hat.gradient_inner(w_hat);
    rec.identity26_rhs = energy.identity.lhs + inv_j * lambda * trilinear(u_ext, w_hat, u_ext);
    rec.identity32_lhs = energy.identity.lhs;
    rec.identity32_rhs = energy.identity.rhs;
    let h = identity_37(&head_pressure(w_hat, p_hat, lambda), bp.p1, bp.p2, g);
    rec.identity37_lhs = h.identity.lhs;
    rec.identity37_rhs = h.identity.rhs;
    rec.identity36_bound_ok = h.bound_ok;
    rec.euler_residual = euler_residual(w_hat, p_hat, lambda);
    rec.normalized = true;
}

/// Diagnostics of a solution `u = U + w` with pressure `p`. Identity entries
/// use `(w/J, p/J²)` and the finite-`J` form of the energy identity.
pub fn solution_record(
    u: &VelocityField,
    w: &VelocityField,
    u_ext: &VelocityField,
    p: &ScalarField,
    lambda: f64,
    nu: f64,
) -> Result<DiagnosticsRecord> {
    let mut rec = base_record(u, p, lambda)?;
    match normalize(w, p) {
        Ok(nz) => fill_identities(&mut rec, &nz.w_hat, &nz.p_hat, u_ext, lambda, nu, 1.0 / nz.j),
        Err(Error::ZeroNorm) => {}
        Err(e) => return Err(e),
    }
    Ok(rec)
}

/// Diagnostics of a stored pair taken as already normalized, e.g. an Euler
/// limit `(ŵ, p̂)`; the extension in the identities is the flux carrier of
/// `flux`.
pub fn field_record(
    w_hat: &VelocityField,
    p_hat: &ScalarField,
    lambda: f64,
    nu: f64,
    flux: f64,
) -> Result<DiagnosticsRecord> {
    w_hat.u_r.ensure_same_grid(p_hat)?;
    let mut rec = base_record(w_hat, p_hat, lambda)?;
    let carrier = flux_carrier(w_hat.grid(), flux);
    fill_identities(&mut rec, w_hat, p_hat, &carrier, lambda, nu, 0.0);
    Ok(rec)
}
