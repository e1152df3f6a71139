//! `(u·∇)u = ∇U_p − u (∇·u)` with `U_p = u₁u₂ + u₂u₃ + u₃u₁`.

use super::{AuditError, ClaimResult, LevelResidual, Table};
use crate::fields::{divergence, gradient, ResidualStats, ScalarField, VectorField};

/// `(u·∇)u` from component gradients.
pub fn advective_term(v: &VectorField) -> Result<VectorField, AuditError> {
    let grads = [
        gradient(&v.component(0))?,
        gradient(&v.component(1))?,
        gradient(&v.component(2))?,
    ];
    let values = v
        .values()
        .iter()
        .enumerate()
        .map(|(n, u)| {
            let mut out = [0.0; 3];
            for (i, o) in out.iter_mut().enumerate() {
                let g = grads[i].values()[n];
                *o = u[0] * g[0] + u[1] * g[1] + u[2] * g[2];
            }
            out
        })
        .collect();
    Ok(VectorField::new(v.grid().clone(), values, format!("{}2/m", v.unit()))?)
}

/// `∇(u₁u₂ + u₂u₃ + u₃u₁)`.
pub fn grad_up(v: &VectorField) -> Result<VectorField, AuditError> {
    let up = ScalarField::new(
        v.grid().clone(),
        v.values()
            .iter()
            .map(|u| u[0] * u[1] + u[1] * u[2] + u[2] * u[0])
            .collect(),
        "m2/s2",
    )?;
    Ok(gradient(&up)?)
}

/// `Σ_j ∂(u_i u_j)/∂x_j − u_i (∇·u)`, the index reading under which the
/// identity is a true product rule.
fn flux_form(v: &VectorField) -> Result<VectorField, AuditError> {
    let g = v.grid().clone();
    let div = divergence(v)?;
    let mut out = vec![[0.0; 3]; g.node_count()];
    for i in 0..3 {
        let flux = VectorField::new(
            g.clone(),
            v.values()
                .iter()
                .map(|u| [u[i] * u[0], u[i] * u[1], u[i] * u[2]])
                .collect(),
            "m2/s2",
        )?;
        let d = divergence(&flux)?;
        for (n, o) in out.iter_mut().enumerate() {
            o[i] = d.values()[n] - v.values()[n][i] * div.values()[n];
        }
    }
    Ok(VectorField::new(g, out, "m/s2")?)
}

/// Audits the identity on the same flow sampled on successively finer grids.
///
/// The verdict metric is the max residual over the larger of the two sides'
/// max norms. `probe`, when given, adds the residual magnitude at that
/// point for every level.
pub fn audit_theorem1(
    levels: &[VectorField],
    probe: Option<[f64; 3]>,
    tolerance: f64,
) -> Result<ClaimResult, AuditError> {
    let mut result = ClaimResult::new(
        "theorem1",
        "(u·∇)u = ∇U_p − u(∇·u),  U_p = u₁u₂ + u₂u₃ + u₃u₁",
        tolerance,
    );
    if levels.is_empty() {
        return Err(AuditError::Input("no field to audit".into()));
    }
    let mut table = Table::new(&[
        "level",
        "nodes",
        "h",
        "max",
        "l2",
        "relative",
        "probe_residual",
        "flux_form_max",
    ]);
    let mut out = Vec::new();
    for (k, v) in levels.iter().enumerate() {
        let lhs = advective_term(v)?;
        let div = divergence(v)?;
        let gu = grad_up(v)?;
        let rhs_values = gu
            .values()
            .iter()
            .zip(v.values())
            .zip(div.values())
            .map(|((g, u), d)| [g[0] - u[0] * d, g[1] - u[1] * d, g[2] - u[2] * d])
            .collect();
        let rhs = VectorField::new(v.grid().clone(), rhs_values, gu.unit())?;
        let stats = ResidualStats::from_difference(&lhs, &rhs)?;
        let scale = lhs.max_norm().max(rhs.max_norm());
        let metric = if scale > 0.0 { stats.max / scale } else { stats.max };
        let probe_value = match (probe, &stats.field) {
            (Some(p), Some(f)) => f.sample(p)?,
            _ => f64::NAN,
        };
        let alt = ResidualStats::from_difference(&lhs, &flux_form(v)?)?;
        table.push(vec![
            k as f64,
            v.grid().dim(0) as f64,
            v.grid().min_spacing(),
            stats.max,
            stats.l2,
            metric,
            probe_value,
            alt.max,
        ]);
        out.push(LevelResidual {
            dims: v.grid().dims().to_vec(),
            h: v.grid().min_spacing(),
            max: stats.max,
            l2: stats.l2,
            metric,
        });
        if k + 1 == levels.len() {
            let at = v.grid().position(stats.argmax);
            result.note(format!(
                "largest residual {:e} at ({}, {}, {})",
                stats.max, at[0], at[1], at[2]
            ));
            if let Some(p) = probe {
                result.input("probe", format!("{}, {}, {}", p[0], p[1], p[2]));
                result.note(format!("residual magnitude at probe: {probe_value:e}"));
            }
            result.note(format!(
                "U_p is the scalar u₁u₂ + u₂u₃ + u₃u₁ and the sum over j is read as its gradient; \
                 the alternative reading Σ_j ∂(u_i u_j)/∂x_j − u_i(∇·u) leaves a residual of {:e} (a product rule, expected to vanish with h)",
                alt.max
            ));
        }
    }
    result.input("levels", levels.len());
    result.input(
        "grids",
        levels
            .iter()
            .map(|v| v.grid().dim(0).to_string())
            .collect::<Vec<_>>()
            .join(" "),
    );
    result.table = table;
    result.conclude(out);
    Ok(result)
}
