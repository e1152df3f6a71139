//! Claim experiments and their verdicts.
//!
//! Every audit produces a [`ClaimResult`]: residuals per grid level, an
//! observed convergence order where one exists, and a verdict. A verdict of
//! [`ClaimVerdict::Fails`] is only issued for a residual that stays put under
//! refinement (less than 10% change over the last refinement) and exceeds
//! twice the tolerance; a single resolution can never fail a claim.

mod decay;
mod eq12;
mod poiseuille;
mod potential;
mod report;
mod settings;
mod theorem1;
mod vector_line;

pub use decay::{audit_decay, estimate_dp_du, estimate_vortex_viscosity, DecaySetup, VortexViscosity};
pub use eq12::{audit_eq12_consistency, TubeLevel};
pub use poiseuille::{audit_poiseuille, ChannelSetup};
pub use potential::{potential_breakdown, BreakdownField, PotentialBreakdown};
pub use report::{render_report, Report, REPORT_FILE};
pub use settings::{run_claims, AuditSettings, Claim, Theorem1Field};
pub use theorem1::{advective_term, audit_theorem1, grad_up};
pub use vector_line::{audit_vector_line, SnapshotSeries};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::FlowError;
use crate::config::ConfigError;
use crate::density::DensityError;
use crate::fields::FieldError;
use crate::solution::SolutionError;
use crate::solver::SolverError;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Solution(#[from] SolutionError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("need at least 3 snapshots for time differencing, got {0}")]
    InsufficientSnapshots(usize),
    #[error("invalid audit input: {0}")]
    Input(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClaimVerdict {
    Holds,
    Fails,
    NotApplicable,
}

/// Residual of one claim on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelResidual {
    pub dims: Vec<usize>,
    pub h: f64,
    /// Largest pointwise residual, in the claim's own units.
    pub max: f64,
    /// RMS residual over the nodes used.
    pub l2: f64,
    /// Dimensionless quantity the verdict is decided on.
    pub metric: f64,
}

/// Rows for the per-claim CSV file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimResult {
    pub id: String,
    /// The identity or prediction under test, in formula form.
    pub statement: String,
    pub inputs: BTreeMap<String, String>,
    pub levels: Vec<LevelResidual>,
    /// Finest-level max residual.
    pub max: Option<f64>,
    /// Finest-level RMS residual.
    pub l2: Option<f64>,
    /// Observed order of the max residual over the last refinement.
    pub order: Option<f64>,
    /// Finest-level verdict metric.
    pub metric: Option<f64>,
    pub tolerance: f64,
    pub verdict: ClaimVerdict,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub table: Table,
}

impl ClaimResult {
    pub fn new(id: &str, statement: &str, tolerance: f64) -> Self {
        Self {
            id: id.to_string(),
            statement: statement.to_string(),
            inputs: BTreeMap::new(),
            levels: Vec::new(),
            max: None,
            l2: None,
            order: None,
            metric: None,
            tolerance,
            verdict: ClaimVerdict::NotApplicable,
            notes: Vec::new(),
            table: Table::default(),
        }
    }

    pub fn input(&mut self, key: &str, value: impl ToString) {
        self.inputs.insert(key.to_string(), value.to_string());
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Fills the summary fields from `levels` and decides the verdict.
    pub fn conclude(&mut self, levels: Vec<LevelResidual>) {
        self.levels = levels;
        if let Some(last) = self.levels.last() {
            self.max = finite(last.max);
            self.l2 = finite(last.l2);
            self.metric = finite(last.metric);
        }
        self.order = last_order(&self.levels);
        let metrics: Vec<f64> = self.levels.iter().map(|l| l.metric).collect();
        let (verdict, why) = convergence_verdict(&metrics, self.tolerance);
        self.verdict = verdict;
        self.note(why);
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Order of the max residual between the last two levels, when both are
/// positive and the grid was actually refined.
fn last_order(levels: &[LevelResidual]) -> Option<f64> {
    let [.., a, b] = levels else {
        return None;
    };
    if !(a.max > 0.0 && b.max > 0.0 && a.h > b.h) {
        return None;
    }
    finite((a.max / b.max).ln() / (a.h / b.h).ln())
}

/// Relative change below which a residual counts as grid-converged.
pub const STABLE_CHANGE: f64 = 0.1;

/// Decides a verdict from the verdict metric on successively finer grids.
pub fn convergence_verdict(metrics: &[f64], tolerance: f64) -> (ClaimVerdict, String) {
    let Some(&finest) = metrics.last() else {
        return (ClaimVerdict::NotApplicable, "no residual was computed".into());
    };
    if metrics.iter().any(|m| !m.is_finite()) {
        return (ClaimVerdict::NotApplicable, "residual is not finite".into());
    }
    if finest <= tolerance {
        return (
            ClaimVerdict::Holds,
            format!("finest residual {finest:e} is within tolerance {tolerance:e}"),
        );
    }
    if metrics.len() < 2 {
        return (
            ClaimVerdict::NotApplicable,
            format!(
                "residual {finest:e} exceeds tolerance on a single grid; refinement is needed before failing the claim"
            ),
        );
    }
    let prev = metrics[metrics.len() - 2];
    let change = (finest - prev).abs() / finest.max(prev);
    if change < STABLE_CHANGE && finest >= 2.0 * tolerance {
        (
            ClaimVerdict::Fails,
            format!(
                "residual {finest:e} is grid-converged (change {:.2}% over the last refinement) and at least twice the tolerance {tolerance:e}",
                100.0 * change
            ),
        )
    } else if change >= STABLE_CHANGE {
        (
            ClaimVerdict::NotApplicable,
            format!(
                "residual {finest:e} above tolerance still moves {:.1}% under refinement; not grid-converged",
                100.0 * change
            ),
        )
    } else {
        (
            ClaimVerdict::NotApplicable,
            format!("residual {finest:e} lies between the tolerance and twice the tolerance"),
        )
    }
}
