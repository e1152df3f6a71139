//! Evaluator for the parametric velocity formula
//!
//! ```text
//! u = (1/ω₀) [ P_L (θ₁/|ρ_L| − θ₂/ρ_S) − ϑ μ_rot ] − θ₃
//! ```
//!
//! together with its singular regimes, the split `u = u_L + u_0` and the
//! finite stop-time expression for unforced flow.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::DensityStructure;
use crate::fields::norm3;

#[derive(Debug, Error, PartialEq)]
pub enum SolutionError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("singular density structure: {0:?}")]
    Singular(RegimeVerdict),
    #[error("stop-time formula is singular: |mu_rot| = 0")]
    FormulaSingularity,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("need at least two states, got {0}")]
    TooFewStates(usize),
}

type Vec3 = [f64; 3];

/// Every coefficient of the parametric solution, in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionParams {
    /// Natural oscillation frequency of the medium, rad/s.
    pub omega0: f64,
    /// Pressure drop over the segment, Pa.
    pub p_l: f64,
    /// Tube taper vector dS/dL, m.
    pub theta1: Vec3,
    /// Tube direction vector with magnitude exactly 1/2.
    pub theta2: Vec3,
    /// Kinematic viscosity, m²/s.
    pub vartheta: f64,
    /// Vortex-viscosity vector, 1/(m·s).
    pub mu_rot: Vec3,
    /// Pressure-change velocity, m/s.
    pub theta3: Vec3,
    /// Segment length `L`, m; only needed for the vortex resistance.
    pub segment_length: Option<f64>,
}

const THETA2_TOL: f64 = 1e-12;

impl SolutionParams {
    pub fn validate(&self) -> Result<(), SolutionError> {
        if !(self.omega0 > 0.0) {
            return Err(SolutionError::InvalidParams(format!(
                "omega0 must be > 0, got {}",
                self.omega0
            )));
        }
        if !(self.vartheta >= 0.0) {
            return Err(SolutionError::InvalidParams(format!(
                "vartheta must be >= 0, got {}",
                self.vartheta
            )));
        }
        let t2 = norm3(self.theta2);
        if (t2 - 0.5).abs() > THETA2_TOL {
            return Err(SolutionError::InvalidParams(format!("|theta2| must be 1/2, got {t2}")));
        }
        if let Some(l) = self.segment_length {
            if !(l > 0.0) {
                return Err(SolutionError::InvalidParams(format!(
                    "segment length must be > 0, got {l}"
                )));
            }
        }
        let all = [self.p_l]
            .into_iter()
            .chain(self.theta1)
            .chain(self.mu_rot)
            .chain(self.theta3);
        if all.into_iter().any(|x| !x.is_finite()) {
            return Err(SolutionError::InvalidParams("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// Vortex resistance magnitude `κ = P_L / (2L)`, Pa/m.
    pub fn kappa(&self) -> Option<f64> {
        self.segment_length.map(|l| self.p_l / (2.0 * l))
    }

    /// `θ₀ = 1/ω₀`.
    pub fn theta0(&self) -> f64 {
        1.0 / self.omega0
    }
}

/// Scales `direction` to the magnitude 1/2 required of θ₂.
pub fn theta2_along(direction: Vec3) -> Result<Vec3, SolutionError> {
    let n = norm3(direction);
    if !(n > 0.0) || !n.is_finite() {
        return Err(SolutionError::InvalidParams("theta2 direction must be non-zero".into()));
    }
    Ok([0.5 * direction[0] / n, 0.5 * direction[1] / n, 0.5 * direction[2] / n])
}

/// θ₃ from the pressure gradient along the tube: `ζ (dP/dL) / (ρ ω₀)`.
pub fn theta3_from_pressure_gradient(zeta: Vec3, dp_dl: f64, rho: f64, omega0: f64) -> Vec3 {
    let k = dp_dl / (rho * omega0);
    [zeta[0] * k, zeta[1] * k, zeta[2] * k]
}

/// θ₃ from the pressure/speed sensitivity: `ζ (dP/du) / ρ`.
pub fn theta3_from_dp_du(zeta: Vec3, dp_du: f64, rho: f64) -> Vec3 {
    let k = dp_du / rho;
    [zeta[0] * k, zeta[1] * k, zeta[2] * k]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Laminar,
    /// `|ρ_L| → 0`: longitudinal rupture of streamlines.
    TurbulenceOnset,
    /// `ρ_S → 0`: transverse rupture of continuity.
    ShockOnset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    LinearDensity,
    SurfaceDensity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeVerdict {
    pub regime: Regime,
    /// Every quantity at or below its threshold, linear density first.
    pub offending: Vec<(Quantity, f64)>,
}

/// Cut-offs below which a density counts as vanished.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub rho_l: f64,
    pub rho_s: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            rho_l: 1e-9,
            rho_s: 1e-9,
        }
    }
}

pub fn classify_regime(ds: &DensityStructure, thresholds: &Thresholds) -> Result<RegimeVerdict, SolutionError> {
    if !(thresholds.rho_l > 0.0 && thresholds.rho_s > 0.0) {
        return Err(SolutionError::InvalidParams("thresholds must be positive".into()));
    }
    let rl = ds.rho_l_magnitude();
    let mut offending = Vec::new();
    if rl <= thresholds.rho_l {
        offending.push((Quantity::LinearDensity, rl));
    }
    if ds.rho_s <= thresholds.rho_s {
        offending.push((Quantity::SurfaceDensity, ds.rho_s));
    }
    let regime = match offending.first() {
        None => Regime::Laminar,
        Some((Quantity::LinearDensity, _)) => Regime::TurbulenceOnset,
        Some((Quantity::SurfaceDensity, _)) => Regime::ShockOnset,
    };
    Ok(RegimeVerdict { regime, offending })
}

/// Returns `(u_L, u_0)` with `u_0 = −θ₃`.
pub fn split_velocity(
    p: &SolutionParams,
    ds: &DensityStructure,
    thresholds: &Thresholds,
) -> Result<(Vec3, Vec3), SolutionError> {
    p.validate()?;
    let verdict = classify_regime(ds, thresholds)?;
    if verdict.regime != Regime::Laminar {
        return Err(SolutionError::Singular(verdict));
    }
    let rl = ds.rho_l_magnitude();
    let mut u_l = [0.0; 3];
    let mut u_0 = [0.0; 3];
    for c in 0..3 {
        let drive = p.p_l * (p.theta1[c] / rl - p.theta2[c] / ds.rho_s);
        u_l[c] = (drive - p.vartheta * p.mu_rot[c]) / p.omega0;
        u_0[c] = -p.theta3[c];
    }
    Ok((u_l, u_0))
}

pub fn evaluate_velocity(
    p: &SolutionParams,
    ds: &DensityStructure,
    thresholds: &Thresholds,
) -> Result<Vec3, SolutionError> {
    let (u_l, u_0) = split_velocity(p, ds, thresholds)?;
    Ok([u_l[0] + u_0[0], u_l[1] + u_0[1], u_l[2] + u_0[2]])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StopTime {
    /// Positive stop time, s.
    Finite(f64),
    /// The formula yields `t₀ <= 0`; the medium counts as already at rest.
    AlreadyStopped(f64),
}

impl StopTime {
    pub fn value(&self) -> f64 {
        match self {
            StopTime::Finite(t) | StopTime::AlreadyStopped(t) => *t,
        }
    }
}

/// `t₀ = |ζ| |dP/du| / (ρ ϑ |μ_rot|) − 1/ω₀` for unforced flow (`P_L = 0`).
///
/// The vector quotient of the original expression is read as magnitudes
/// along the unit direction `zeta`.
pub fn decay_time(p: &SolutionParams, rho: f64, dp_du: f64, zeta: Vec3) -> Result<StopTime, SolutionError> {
    p.validate()?;
    if p.p_l != 0.0 {
        return Err(SolutionError::Precondition(format!(
            "stop time applies to unforced flow (P_L = 0), got P_L = {}",
            p.p_l
        )));
    }
    if dp_du > 0.0 {
        return Err(SolutionError::Precondition(format!("need dP/du <= 0, got {dp_du}")));
    }
    if !(rho > 0.0) {
        return Err(SolutionError::InvalidParams("density must be positive".into()));
    }
    let zeta_norm = norm3(zeta);
    if !(zeta_norm > 0.0) {
        return Err(SolutionError::InvalidParams("zeta must be non-zero".into()));
    }
    let resistance = rho * p.vartheta * norm3(p.mu_rot);
    if resistance == 0.0 {
        return Err(SolutionError::FormulaSingularity);
    }
    let t0 = zeta_norm * dp_du.abs() / resistance - 1.0 / p.omega0;
    Ok(if t0 > 0.0 {
        StopTime::Finite(t0)
    } else {
        StopTime::AlreadyStopped(t0)
    })
}

/// One state in a Bernoulli chain: speed, surface density, linear density
/// magnitude and pressure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub speed: f64,
    pub rho_s: f64,
    pub rho_l: f64,
    pub pressure: f64,
}

impl From<(f64, f64, f64, f64)> for ChainState {
    fn from(t: (f64, f64, f64, f64)) -> Self {
        Self {
            speed: t.0,
            rho_s: t.1,
            rho_l: t.2,
            pressure: t.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChainQuantity {
    SurfaceDensity,
    LinearDensity,
    Pressure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChainVerdict {
    Pass,
    Fail {
        /// Index of the first state of the violating adjacent pair.
        pair: usize,
        quantity: ChainQuantity,
    },
}

/// Checks that along the sequence `ρ_S` moves with the speed while `|ρ_L|`
/// and the pressure move against it. Changes within `tolerance` (relative to
/// the larger of the two values) count as flat and never violate.
pub fn bernoulli_chain_audit(states: &[ChainState], tolerance: f64) -> Result<ChainVerdict, SolutionError> {
    if states.len() < 2 {
        return Err(SolutionError::TooFewStates(states.len()));
    }
    let trend = |a: f64, b: f64| -> i8 {
        let scale = a.abs().max(b.abs());
        if (b - a).abs() <= tolerance * scale {
            0
        } else if b > a {
            1
        } else {
            -1
        }
    };
    for (k, w) in states.windows(2).enumerate() {
        let du = trend(w[0].speed, w[1].speed);
        let checks = [
            (ChainQuantity::SurfaceDensity, trend(w[0].rho_s, w[1].rho_s), 1),
            (ChainQuantity::LinearDensity, trend(w[0].rho_l, w[1].rho_l), -1),
            (ChainQuantity::Pressure, trend(w[0].pressure, w[1].pressure), -1),
        ];
        for (q, d, sense) in checks {
            if d * du * sense < 0 {
                return Ok(ChainVerdict::Fail { pair: k, quantity: q });
            }
        }
    }
    Ok(ChainVerdict::Pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> SolutionParams {
        SolutionParams {
            omega0: 1.0,
            p_l: 1.0,
            theta1: [1.0, 0.0, 0.0],
            theta2: [0.5, 0.0, 0.0],
            vartheta: 0.0,
            mu_rot: [0.0; 3],
            theta3: [0.0; 3],
            segment_length: Some(2.0),
        }
    }

    fn ds(rl: f64, rs: f64) -> DensityStructure {
        DensityStructure {
            rho_l: [rl, 0.0, 0.0],
            rho_s: rs,
            rho: 1.0,
        }
    }

    #[test]
    fn hand_substitution() {
        let t = Thresholds::default();
        assert_eq!(evaluate_velocity(&base(), &ds(0.5, 1.0), &t).unwrap(), [1.5, 0.0, 0.0]);
        let shifted = SolutionParams {
            theta3: [0.5, 0.0, 0.0],
            ..base()
        };
        assert_eq!(evaluate_velocity(&shifted, &ds(0.5, 1.0), &t).unwrap(), [1.0, 0.0, 0.0]);
        let off = SolutionParams { p_l: 0.0, ..base() };
        assert_eq!(evaluate_velocity(&off, &ds(0.5, 1.0), &t).unwrap(), [0.0; 3]);
        assert_eq!(base().kappa(), Some(0.25));
    }

    #[test]
    fn split_without_theta3() {
        let t = Thresholds::default();
        let (ul, u0) = split_velocity(&base(), &ds(0.5, 1.0), &t).unwrap();
        assert_eq!(u0, [0.0; 3]);
        assert_eq!(ul, evaluate_velocity(&base(), &ds(0.5, 1.0), &t).unwrap());
    }

    #[test]
    fn theta2_magnitude_enforced() {
        let bad = SolutionParams {
            theta2: [0.6, 0.0, 0.0],
            ..base()
        };
        assert!(matches!(bad.validate(), Err(SolutionError::InvalidParams(_))));
        let t2 = theta2_along([3.0, 4.0, 0.0]).unwrap();
        assert!((norm3(t2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn regimes() {
        let t = Thresholds {
            rho_l: 1e-6,
            rho_s: 1e-6,
        };
        assert_eq!(classify_regime(&ds(10.0, 10.0), &t).unwrap().regime, Regime::Laminar);
        assert_eq!(
            classify_regime(&ds(1e-9, 10.0), &t).unwrap().regime,
            Regime::TurbulenceOnset
        );
        assert_eq!(classify_regime(&ds(10.0, 1e-9), &t).unwrap().regime, Regime::ShockOnset);
        let both = classify_regime(&ds(0.0, 0.0), &t).unwrap();
        assert_eq!(both.regime, Regime::TurbulenceOnset);
        assert_eq!(both.offending.len(), 2);
        assert!(classify_regime(&ds(1.0, 1.0), &Thresholds { rho_l: 0.0, rho_s: 1.0 }).is_err());
    }

    #[test]
    fn singular_structure_rejected_with_verdict() {
        match evaluate_velocity(&base(), &ds(0.0, 1.0), &Thresholds::default()) {
            Err(SolutionError::Singular(v)) => assert_eq!(v.regime, Regime::TurbulenceOnset),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn theta3_constructors_agree() {
        // dP/du = (dP/dL)(dL/du) = (dP/dL)/ω₀
        let zeta = [0.0, 0.6, 0.8];
        let (dp_dl, rho, omega0) = (-3.0, 2.0, 5.0);
        let a = theta3_from_pressure_gradient(zeta, dp_dl, rho, omega0);
        let b = theta3_from_dp_du(zeta, dp_dl / omega0, rho);
        for c in 0..3 {
            assert!((a[c] - b[c]).abs() < 1e-15);
        }
    }

    fn unforced(mu: f64, omega0: f64) -> SolutionParams {
        SolutionParams {
            omega0,
            p_l: 0.0,
            vartheta: 1.0,
            mu_rot: [mu, 0.0, 0.0],
            ..base()
        }
    }

    #[test]
    fn stop_time_examples() {
        let z = [1.0, 0.0, 0.0];
        assert_eq!(
            decay_time(&unforced(1.0, 1.0), 1.0, -2.0, z).unwrap(),
            StopTime::Finite(1.0)
        );
        assert_eq!(
            decay_time(&unforced(1.0, 1.0), 1.0, 0.0, z).unwrap(),
            StopTime::AlreadyStopped(-1.0)
        );
        let a = decay_time(&unforced(1.0, 1e300), 1.0, -2.0, z).unwrap().value();
        let b = decay_time(&unforced(1.0, 1e300), 2.0, -2.0, z).unwrap().value();
        assert_eq!(a / 2.0, b);
        assert_eq!(
            decay_time(&unforced(0.0, 1.0), 1.0, -2.0, z),
            Err(SolutionError::FormulaSingularity)
        );
        assert!(matches!(
            decay_time(&base(), 1.0, -2.0, z),
            Err(SolutionError::Precondition(_))
        ));
        assert!(matches!(
            decay_time(&unforced(1.0, 1.0), 1.0, 2.0, z),
            Err(SolutionError::Precondition(_))
        ));
    }

    #[test]
    fn bernoulli_chain_examples() {
        let ok: Vec<ChainState> = vec![(1.0, 1.0, 2.0, 10.0).into(), (2.0, 2.0, 1.0, 5.0).into()];
        assert_eq!(bernoulli_chain_audit(&ok, 0.0).unwrap(), ChainVerdict::Pass);
        let bad: Vec<ChainState> = vec![(1.0, 1.0, 2.0, 10.0).into(), (2.0, 0.5, 1.0, 5.0).into()];
        assert_eq!(
            bernoulli_chain_audit(&bad, 0.0).unwrap(),
            ChainVerdict::Fail {
                pair: 0,
                quantity: ChainQuantity::SurfaceDensity
            }
        );
        assert_eq!(
            bernoulli_chain_audit(&ok[..1], 0.0),
            Err(SolutionError::TooFewStates(1))
        );
    }
}
