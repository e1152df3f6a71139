//! Closed-form flows and the structural laws built on them.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::fields::{FieldError, GridSpec, ScalarField, VectorField};

#[derive(Debug, Error, PartialEq)]
pub enum FlowError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("radial offset {r} lies outside |r| <= {radius}")]
    OutsideProfile { r: f64, radius: f64 },
    #[error("gyration centre reached: r0 {sign} r = {arm} <= 0")]
    GyrationCentre { sign: char, arm: f64 },
    #[error("vortex curvature law is singular at r = 0")]
    Pole,
}

/// Pressure-driven parabolic profile of a straight segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoiseuilleParams {
    /// Pressure drop over the segment, Pa.
    pub pressure_drop: f64,
    /// Dynamic viscosity, Pa·s.
    pub viscosity: f64,
    /// Segment length, m.
    pub length: f64,
    /// Distance from the maximum-speed line to the nearest wall, m.
    pub radius: f64,
}

impl PoiseuilleParams {
    pub fn new(pressure_drop: f64, viscosity: f64, length: f64, radius: f64) -> Result<Self, FlowError> {
        let p = Self {
            pressure_drop,
            viscosity,
            length,
            radius,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        if !(self.viscosity > 0.0 && self.length > 0.0 && self.radius > 0.0) || !self.pressure_drop.is_finite() {
            return Err(FlowError::InvalidParams(format!(
                "need mu > 0, L > 0, R > 0 and finite P_L (got mu={}, L={}, R={}, P_L={})",
                self.viscosity, self.length, self.radius, self.pressure_drop
            )));
        }
        Ok(())
    }
}

/// Pipe-form Poiseuille speed `P_L (R² − r²) / (4 μ L)`.
pub fn poiseuille_speed(p: &PoiseuilleParams, r: f64) -> Result<f64, FlowError> {
    p.validate()?;
    if !(r.abs() <= p.radius) {
        return Err(FlowError::OutsideProfile { r, radius: p.radius });
    }
    Ok(p.pressure_drop * (p.radius * p.radius - r * r) / (4.0 * p.viscosity * p.length))
}

/// Profile curvature `−d²u/dr² = P_L / (2 μ L)`, independent of `r`.
pub fn poiseuille_curvature(p: &PoiseuilleParams) -> Result<f64, FlowError> {
    p.validate()?;
    Ok(p.pressure_drop / (2.0 * p.viscosity * p.length))
}

/// Which side of the gyration centre a streamline lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Outer,
    Inner,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Outer => 1.0,
            Side::Inner => -1.0,
        }
    }
}

/// Angular velocity about the gyration centre of a bent streamtube:
/// the straight-segment speed divided by the arm `r0 ± r`.
pub fn bent_tube_angular_velocity(p: &PoiseuilleParams, r0: f64, side: Side, r: f64) -> Result<f64, FlowError> {
    let arm = r0 + side.sign() * r;
    if !(arm > 0.0) {
        return Err(FlowError::GyrationCentre {
            sign: if side == Side::Outer { '+' } else { '-' },
            arm,
        });
    }
    Ok(poiseuille_speed(p, r)? / arm)
}

/// Two-region vortex curvature law parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VortexParams {
    /// Viscosity-dependent proportionality constant; supplied, never derived.
    pub k_mu: f64,
    /// Vortex radius, m.
    pub radius: f64,
    /// Curvature radius of the gyration centre line, m.
    pub r0: f64,
    /// Boundary between inner (flat) and outer (cubic) regions, m.
    pub x0: f64,
}

impl VortexParams {
    pub fn validate(&self) -> Result<(), FlowError> {
        if !(self.radius > 0.0) || !(self.r0 >= 0.0) || !(self.x0.abs() < self.radius) || !self.k_mu.is_finite() {
            return Err(FlowError::InvalidParams(format!(
                "need R > 0, r0 >= 0, |x0| < R (got R={}, r0={}, x0={})",
                self.radius, self.r0, self.x0
            )));
        }
        Ok(())
    }
}

/// `∂²ω/∂r² = k_μ R² / r³` for `r > x0`, zero for `r <= x0`.
pub fn vortex_curvature(p: &VortexParams, r: f64) -> Result<f64, FlowError> {
    p.validate()?;
    if r == 0.0 {
        return Err(FlowError::Pole);
    }
    if !(r.abs() <= p.radius) {
        return Err(FlowError::OutsideProfile { r, radius: p.radius });
    }
    if r > p.x0 {
        Ok(p.k_mu * p.radius * p.radius / (r * r * r))
    } else {
        Ok(0.0)
    }
}

/// Plane-channel Poiseuille profile `G (R² − y²) / (2 μ)` for a channel of
/// half-width `R` driven by pressure gradient `G`.
pub fn channel_speed(gradient: f64, viscosity: f64, half_width: f64, y: f64) -> f64 {
    gradient * (half_width * half_width - y * y) / (2.0 * viscosity)
}

/// Two-dimensional Taylor–Green vortex on the periodic square `[0, 2π)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorGreenParams {
    /// Kinematic viscosity, m²/s.
    pub nu: f64,
    /// Initial speed scale, m/s.
    pub amplitude: f64,
}

impl TaylorGreenParams {
    pub fn new(nu: f64, amplitude: f64) -> Result<Self, FlowError> {
        if !(nu > 0.0) || !amplitude.is_finite() {
            return Err(FlowError::InvalidParams(format!("need nu > 0, got {nu}")));
        }
        Ok(Self { nu, amplitude })
    }

    pub fn velocity_at(&self, p: [f64; 3], t: f64) -> [f64; 3] {
        let decay = (-2.0 * self.nu * t).exp();
        let a = self.amplitude * decay;
        [a * p[0].sin() * p[1].cos(), -a * p[0].cos() * p[1].sin(), 0.0]
    }

    pub fn pressure_at(&self, p: [f64; 3], t: f64, rho: f64) -> f64 {
        0.25 * rho
            * self.amplitude
            * self.amplitude
            * ((2.0 * p[0]).cos() + (2.0 * p[1]).cos())
            * (-4.0 * self.nu * t).exp()
    }

    /// Domain-mean kinetic energy per unit volume.
    pub fn energy(&self, t: f64, rho: f64) -> f64 {
        0.25 * rho * self.amplitude * self.amplitude * (-4.0 * self.nu * t).exp()
    }

    pub fn energy_ratio(&self, t: f64) -> f64 {
        (-4.0 * self.nu * t).exp()
    }

    pub fn grid(n: usize) -> Result<GridSpec, FieldError> {
        GridSpec::periodic_2d(n, 2.0 * PI)
    }

    pub fn velocity(&self, grid: &GridSpec, t: f64) -> Result<VectorField, FieldError> {
        VectorField::from_fn(grid.clone(), "m/s", |p| self.velocity_at(p, t))
    }

    pub fn pressure(&self, grid: &GridSpec, t: f64, rho: f64) -> Result<ScalarField, FieldError> {
        ScalarField::from_fn(grid.clone(), "Pa", |p| self.pressure_at(p, t, rho))
    }
}

/// Sampled Taylor–Green velocity on an `n × n` periodic `[0, 2π)²` grid.
pub fn taylor_green(p: &TaylorGreenParams, n: usize, t: f64) -> Result<VectorField, FlowError> {
    if !(t >= 0.0) {
        return Err(FlowError::InvalidParams(format!("time must be non-negative, got {t}")));
    }
    let grid = TaylorGreenParams::grid(n).map_err(|e| FlowError::InvalidParams(e.to_string()))?;
    p.velocity(&grid, t)
        .map_err(|e| FlowError::InvalidParams(e.to_string()))
}

/// Planar sink flow `u = −q (x, y) / (x² + y²)`: an inviscid, divergence-free
/// converging channel whose speed grows as `q / r` toward the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergingFlow {
    /// Sink strength, m²/s.
    pub strength: f64,
    /// Far-field stagnation pressure for the Bernoulli pressure, Pa.
    pub total_pressure: f64,
    pub rho: f64,
}

impl ConvergingFlow {
    pub fn velocity_at(&self, p: [f64; 3]) -> [f64; 3] {
        let r2 = p[0] * p[0] + p[1] * p[1];
        [-self.strength * p[0] / r2, -self.strength * p[1] / r2, 0.0]
    }

    pub fn speed_at(&self, p: [f64; 3]) -> f64 {
        self.strength.abs() / (p[0] * p[0] + p[1] * p[1]).sqrt()
    }

    pub fn pressure_at(&self, p: [f64; 3]) -> f64 {
        let s = self.speed_at(p);
        self.total_pressure - 0.5 * self.rho * s * s
    }

    /// Wedge-shaped sampling window `[x0, x1] × [−half, half]` with `x0 > 0`.
    pub fn grid(n: usize, x_span: (f64, f64), half_height: f64) -> Result<GridSpec, FieldError> {
        GridSpec::clamped_2d(n, n, x_span, (-half_height, half_height))
    }

    pub fn velocity(&self, grid: &GridSpec) -> Result<VectorField, FieldError> {
        VectorField::from_fn(grid.clone(), "m/s", |p| self.velocity_at(p))
    }

    pub fn pressure(&self, grid: &GridSpec) -> Result<ScalarField, FieldError> {
        ScalarField::from_fn(grid.clone(), "Pa", |p| self.pressure_at(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::divergence;

    fn unit() -> PoiseuilleParams {
        PoiseuilleParams::new(4.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn poiseuille_hand_values() {
        assert_eq!(poiseuille_speed(&unit(), 0.0).unwrap(), 1.0);
        assert_eq!(poiseuille_speed(&unit(), 1.0).unwrap(), 0.0);
        assert_eq!(poiseuille_speed(&unit(), -1.0).unwrap(), 0.0);
        let p = PoiseuilleParams::new(8.0, 2.0, 1.0, 2.0).unwrap();
        assert_eq!(poiseuille_speed(&p, 1.0).unwrap(), 3.0);
        assert!(matches!(
            poiseuille_speed(&unit(), 1.5),
            Err(FlowError::OutsideProfile { .. })
        ));
        assert!(PoiseuilleParams::new(1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn curvature_constant() {
        assert_eq!(poiseuille_curvature(&unit()).unwrap(), 2.0);
        let still = PoiseuilleParams::new(0.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(poiseuille_curvature(&still).unwrap(), 0.0);
    }

    #[test]
    fn bent_tube_examples() {
        let p = unit();
        let w = bent_tube_angular_velocity(&p, 2.0, Side::Outer, 0.5).unwrap();
        assert!((w - 0.3).abs() < 1e-15);
        assert_eq!(bent_tube_angular_velocity(&p, 2.0, Side::Inner, 1.0).unwrap(), 0.0);
        for r in [-0.9, -0.3, 0.0, 0.4, 0.99] {
            let r0 = 1e12;
            let w = bent_tube_angular_velocity(&p, r0, Side::Outer, r).unwrap();
            let u = poiseuille_speed(&p, r).unwrap();
            assert!(((r0 + r) * w - u).abs() <= 1e-9 * u.abs().max(1e-300));
        }
        assert!(matches!(
            bent_tube_angular_velocity(&p, 0.5, Side::Inner, 0.5),
            Err(FlowError::GyrationCentre { .. })
        ));
    }

    #[test]
    fn vortex_curvature_regions() {
        let p = VortexParams {
            k_mu: 1.0,
            radius: 2.0,
            r0: 0.0,
            x0: 0.0,
        };
        assert_eq!(vortex_curvature(&p, 1.0).unwrap(), 4.0);
        assert_eq!(vortex_curvature(&p, -1.0).unwrap(), 0.0);
        assert_eq!(vortex_curvature(&p, 0.0), Err(FlowError::Pole));
        let q = VortexParams { radius: 1.0, ..p };
        assert_eq!(vortex_curvature(&q, 0.5).unwrap(), 8.0);
        assert_eq!(vortex_curvature(&q, 1.0).unwrap(), 1.0);
        let shifted = VortexParams { x0: 0.6, ..q };
        assert_eq!(vortex_curvature(&shifted, 0.5).unwrap(), 0.0);
        assert!(VortexParams { x0: 1.0, ..q }.validate().is_err());
    }

    #[test]
    fn taylor_green_peak_and_decay() {
        let p = TaylorGreenParams::new(0.1, 1.0).unwrap();
        let v = p.velocity_at([PI / 2.0, 0.0, 0.0], 0.0);
        assert!((v[0] - 1.0).abs() < 1e-15 && v[1].abs() < 1e-15);
        assert!((p.energy_ratio(1.0) - (-0.4f64).exp()).abs() < 1e-15);
        assert!((p.energy_ratio(1.0) - 0.6703).abs() < 5e-5);
        let field = taylor_green(&p, 32, 0.0).unwrap();
        assert!((field.max_norm() - 1.0).abs() < 1e-12);
        assert!(divergence(&field).unwrap().max_abs() < 1e-12);
        assert!(taylor_green(&p, 32, -1.0).is_err());
    }

    #[test]
    fn converging_flow_is_divergence_free_and_accelerates() {
        let f = ConvergingFlow {
            strength: 1.0,
            total_pressure: 10.0,
            rho: 1.0,
        };
        let g = ConvergingFlow::grid(64, (1.0, 3.0), 1.0).unwrap();
        let div = divergence(&f.velocity(&g).unwrap()).unwrap();
        let h = g.h(0);
        assert!(div.max_abs() < 5.0 * h * h, "{}", div.max_abs());
        assert!(f.speed_at([1.0, 0.0, 0.0]) > f.speed_at([2.0, 0.0, 0.0]));
        assert!(f.pressure_at([1.0, 0.0, 0.0]) < f.pressure_at([2.0, 0.0, 0.0]));
    }
}
