//! Specific-energy potentials built from local speed components.
//!
//! ```text
//! U_gradP = Σ ½(u_i² − u₀²)      U_F = Σ ½(u_i² + u₀²)
//! U_P     = u₁u₂ + u₂u₃ + u₃u₁
//! U_0     = ((u₁+u₂)² + (u₂+u₃)² + (u₃+u₁)²) / 2  =  U_F + U_gradP + U_P
//! ```
//!
//! The last equality is pure algebra and is checked to round-off.

use serde::{Deserialize, Serialize};

use super::{AuditError, ClaimResult, LevelResidual, Table};
use crate::fields::{ScalarField, VectorField};

/// All four potentials at one point, J/kg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialBreakdown {
    pub u_f: f64,
    pub u_grad_p: f64,
    pub u_p: f64,
    /// Computed from the pairwise-sum form, independently of the others.
    pub u_0: f64,
}

impl PotentialBreakdown {
    pub fn of(u: [f64; 3], u0: f64) -> Self {
        let sq = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
        let (a, b, c) = (u[0] + u[1], u[1] + u[2], u[2] + u[0]);
        Self {
            u_f: 0.5 * sq + 1.5 * u0 * u0,
            u_grad_p: 0.5 * sq - 1.5 * u0 * u0,
            u_p: u[0] * u[1] + u[1] * u[2] + u[2] * u[0],
            u_0: 0.5 * (a * a + b * b + c * c),
        }
    }

    /// `|U_0 − (U_F + U_gradP + U_P)|`.
    pub fn identity_residual(&self) -> f64 {
        (self.u_0 - (self.u_f + self.u_grad_p + self.u_p)).abs()
    }
}

/// Potentials over a whole field.
#[derive(Debug, Clone)]
pub struct BreakdownField {
    pub u_f: ScalarField,
    pub u_grad_p: ScalarField,
    pub u_p: ScalarField,
    pub u_0: ScalarField,
    /// Largest identity residual over the nodes.
    pub identity_residual: f64,
    /// Largest `|(P₀ − P)/ρ − ½(|u|² − u₀²)|`, with `P₀` the pressure at
    /// the node whose speed is closest to `u₀`.
    pub bernoulli_residual: f64,
    pub p0: f64,
}

pub fn potential_breakdown(v: &VectorField, p: &ScalarField, u0: f64, rho: f64) -> Result<BreakdownField, AuditError> {
    if !u0.is_finite() || !(rho > 0.0) {
        return Err(AuditError::Input(format!(
            "need finite u0 and rho > 0, got u0={u0}, rho={rho}"
        )));
    }
    if v.grid() != p.grid() {
        return Err(AuditError::Input("velocity and pressure grids differ".into()));
    }
    let parts: Vec<PotentialBreakdown> = v.values().iter().map(|u| PotentialBreakdown::of(*u, u0)).collect();
    let identity_residual = parts.iter().fold(0.0f64, |m, b| m.max(b.identity_residual()));
    let speeds = v.magnitude();
    let anchor = speeds
        .values()
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - u0).abs().total_cmp(&(b.1 - u0).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let p0 = p.values()[anchor];
    let bernoulli_residual = speeds.values().iter().zip(p.values()).fold(0.0f64, |m, (s, q)| {
        m.max(((p0 - q) / rho - 0.5 * (s * s - u0 * u0)).abs())
    });
    let field =
        |f: fn(&PotentialBreakdown) -> f64| ScalarField::new(v.grid().clone(), parts.iter().map(f).collect(), "J/kg");
    Ok(BreakdownField {
        u_f: field(|b| b.u_f)?,
        u_grad_p: field(|b| b.u_grad_p)?,
        u_p: field(|b| b.u_p)?,
        u_0: field(|b| b.u_0)?,
        identity_residual,
        bernoulli_residual,
        p0,
    })
}

/// Checks the algebraic identity on every node of each named field.
pub(crate) fn audit_potential_identity(
    cases: &[(&str, &VectorField, &ScalarField, f64)],
    rho: f64,
    tolerance: f64,
) -> Result<ClaimResult, AuditError> {
    let mut result = ClaimResult::new(
        "potential_identity",
        "U_0 = U_F + U_gradP + U_P (pairwise-sum form)",
        tolerance,
    );
    let mut table = Table::new(&["case", "nodes", "identity_max", "relative", "bernoulli_max"]);
    let mut worst = 0.0f64;
    let mut worst_abs = 0.0f64;
    let mut dims = Vec::new();
    let mut h = 0.0;
    for (k, (name, v, p, u0)) in cases.iter().enumerate() {
        let b = potential_breakdown(v, p, *u0, rho)?;
        let scale = b.u_0.max_abs();
        let rel = if scale > 0.0 {
            b.identity_residual / scale
        } else {
            b.identity_residual
        };
        worst = worst.max(rel);
        worst_abs = worst_abs.max(b.identity_residual);
        dims = v.grid().dims().to_vec();
        h = v.grid().min_spacing();
        table.push(vec![
            k as f64,
            v.grid().node_count() as f64,
            b.identity_residual,
            rel,
            b.bernoulli_residual,
        ]);
        result.input(&format!("case{k}"), name);
        result.note(format!(
            "{name}: identity residual {:e}; (P₀ − P)/ρ differs from ½(|u|² − u₀²) by at most {:e} (u₀ = {u0}, P₀ = {})",
            b.identity_residual, b.bernoulli_residual, b.p0
        ));
    }
    result.note("the component sums give U_gradP + U_F = |u|², independent of u₀; U_gradP alone carries −3u₀²/2, not the −u₀²/2 of a Bernoulli balance on the speed");
    result.table = table;
    result.conclude(vec![LevelResidual {
        dims,
        h,
        max: worst_abs,
        l2: worst_abs,
        metric: worst,
    }]);
    Ok(result)
}
