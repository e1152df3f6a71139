//! `du/dt − ∂u/∂t = ∇U_p` measured from solver snapshots.
//!
//! The material derivative is taken along short straight trajectories:
//! `[u(t+τ, x + u τ) − u(t−τ, x − u τ)] / 2τ`, with the departure and
//! arrival values read by cubic interpolation. The partial derivative is the
//! central difference at fixed nodes.

use super::theorem1::{advective_term, grad_up};
use super::{AuditError, ClaimResult, LevelResidual, Table};
use crate::fields::{FieldError, VectorField};

/// Equally spaced snapshots of one run.
#[derive(Debug, Clone)]
pub struct SnapshotSeries {
    pub states: Vec<VectorField>,
    pub dt: f64,
}

struct Lhs {
    values: Vec<Option<[f64; 3]>>,
    skipped: usize,
}

/// Material minus partial derivative at snapshot `k` using snapshots
/// `k ± stride`.
fn lhs_at(series: &SnapshotSeries, k: usize, stride: usize) -> Result<Lhs, AuditError> {
    let (prev, mid, next) = (
        &series.states[k - stride],
        &series.states[k],
        &series.states[k + stride],
    );
    let tau = series.dt * stride as f64;
    let grid = mid.grid();
    let mut skipped = 0;
    let mut values = Vec::with_capacity(grid.node_count());
    for n in 0..grid.node_count() {
        let x = grid.position(n);
        let u = mid.values()[n];
        let fwd = [x[0] + u[0] * tau, x[1] + u[1] * tau, x[2] + u[2] * tau];
        let back = [x[0] - u[0] * tau, x[1] - u[1] * tau, x[2] - u[2] * tau];
        let (a, b) = match (next.sample_cubic(fwd), prev.sample_cubic(back)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(FieldError::OutOfDomain(_)), _) | (_, Err(FieldError::OutOfDomain(_))) => {
                skipped += 1;
                values.push(None);
                continue;
            }
            (Err(e), _) | (_, Err(e)) => return Err(e.into()),
        };
        let (pn, pp) = (next.values()[n], prev.values()[n]);
        let mut out = [0.0; 3];
        for c in 0..3 {
            out[c] = ((a[c] - b[c]) - (pn[c] - pp[c])) / (2.0 * tau);
        }
        values.push(Some(out));
    }
    Ok(Lhs { values, skipped })
}

fn stats(lhs: &Lhs, other: &VectorField) -> (f64, f64, f64) {
    let (mut max, mut sum, mut count, mut scale) = (0.0f64, 0.0, 0usize, 0.0f64);
    for (l, o) in lhs.values.iter().zip(other.values()) {
        if let Some(l) = l {
            let d = ((l[0] - o[0]).powi(2) + (l[1] - o[1]).powi(2) + (l[2] - o[2]).powi(2)).sqrt();
            max = max.max(d);
            sum += d * d;
            count += 1;
            let ln = (l[0] * l[0] + l[1] * l[1] + l[2] * l[2]).sqrt();
            scale = scale.max(ln).max((o[0] * o[0] + o[1] * o[1] + o[2] * o[2]).sqrt());
        }
    }
    let l2 = if count > 0 { (sum / count as f64).sqrt() } else { 0.0 };
    (max, l2, scale)
}

/// Audits the vector-line equation on snapshot series from successively
/// finer grids (coarse first). Each series needs at least 3 snapshots; with
/// 5 or more a time-convergence order of the trajectory estimate is
/// reported too.
pub fn audit_vector_line(levels: &[SnapshotSeries], tolerance: f64) -> Result<ClaimResult, AuditError> {
    let mut result = ClaimResult::new("vector_line", "du/dt − ∂u/∂t = ∇U_p", tolerance);
    if levels.is_empty() {
        return Err(AuditError::Input("no snapshot series".into()));
    }
    let mut table = Table::new(&[
        "level",
        "nodes",
        "h",
        "dt",
        "max",
        "l2",
        "relative",
        "consistency_max",
        "skipped",
    ]);
    let mut out = Vec::new();
    let mut consistency = Vec::new();
    for (k, series) in levels.iter().enumerate() {
        let n = series.states.len();
        if n < 3 {
            return Err(AuditError::InsufficientSnapshots(n));
        }
        if !(series.dt > 0.0) {
            return Err(AuditError::Input(format!(
                "snapshot spacing must be positive, got {}",
                series.dt
            )));
        }
        let mid = (n - 1) / 2;
        let lhs = lhs_at(series, mid, 1)?;
        let u = &series.states[mid];
        let rhs = grad_up(u)?;
        let adv = advective_term(u)?;
        let (max, l2, scale) = stats(&lhs, &rhs);
        let (cmax, _, _) = stats(&lhs, &adv);
        let metric = if scale > 0.0 { max / scale } else { max };
        consistency.push(cmax);
        table.push(vec![
            k as f64,
            u.grid().dim(0) as f64,
            u.grid().min_spacing(),
            series.dt,
            max,
            l2,
            metric,
            cmax,
            lhs.skipped as f64,
        ]);
        out.push(LevelResidual {
            dims: u.grid().dims().to_vec(),
            h: u.grid().min_spacing(),
            max,
            l2,
            metric,
        });
        if k + 1 == levels.len() {
            if lhs.skipped > 0 {
                result.note(format!("{} nodes skipped: trajectory left the domain", lhs.skipped));
            }
            if n >= 5 && mid >= 2 && mid + 2 < n {
                let wide = lhs_at(series, mid, 2)?;
                let (cwide, _, _) = stats(&wide, &adv);
                if cmax > 0.0 && cwide > 0.0 {
                    result.note(format!(
                        "time order of the trajectory estimate (against (u·∇)u): {:.2}",
                        (cwide / cmax).log2()
                    ));
                }
            }
        }
    }
    if let [.., a, b] = consistency.as_slice() {
        if *a > 0.0 && *b > 0.0 {
            let ratio = levels[levels.len() - 2].states[0].grid().min_spacing()
                / levels[levels.len() - 1].states[0].grid().min_spacing();
            result.note(format!(
                "du/dt − ∂u/∂t agrees with (u·∇)u to {b:e}, space-time order {:.2}",
                (a / b).ln() / ratio.ln()
            ));
        }
    }
    result.input("levels", levels.len());
    result.input("snapshots", levels[0].states.len());
    result.table = table;
    result.conclude(out);
    Ok(result)
}
