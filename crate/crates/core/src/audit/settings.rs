//! Audit configuration and the driver that runs a set of claims.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::potential::audit_potential_identity;
use super::{
    audit_decay, audit_eq12_consistency, audit_poiseuille, audit_theorem1, audit_vector_line, AuditError, ChannelSetup,
    ClaimResult, DecaySetup, SnapshotSeries, TubeLevel,
};
use crate::analytic::{ConvergingFlow, TaylorGreenParams};
use crate::config::Config;
use crate::density::{extract_density_structure, ExtractOptions};
use crate::fields::{GridSpec, VectorField};
use crate::solution::{SolutionParams, Thresholds};
use crate::solver::{step, BoundaryKind, Forcing, SolverConfig, SolverState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Claim {
    Theorem1,
    VectorLine,
    Poiseuille,
    Decay,
    Eq12,
    Potential,
}

impl Claim {
    pub const ALL: [Claim; 6] = [
        Claim::Theorem1,
        Claim::VectorLine,
        Claim::Poiseuille,
        Claim::Decay,
        Claim::Eq12,
        Claim::Potential,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Claim::Theorem1 => "theorem1",
            Claim::VectorLine => "vector-line",
            Claim::Poiseuille => "poiseuille",
            Claim::Decay => "decay",
            Claim::Eq12 => "eq12",
            Claim::Potential => "potential",
        }
    }
}

impl fmt::Display for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Claim {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Claim::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown claim `{s}`"))
    }
}

/// Flow sampled for the `theorem1` audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem1Field {
    /// `u = (x, −y, 0)` on `[−1, 1]²`.
    Strain,
    /// `u = (y, 0, 0)` on `[−1, 1]²`.
    Shear,
    /// Taylor–Green velocity on `[0, 2π)²`.
    TaylorGreen,
}

impl FromStr for Theorem1Field {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strain" => Ok(Self::Strain),
            "shear" => Ok(Self::Shear),
            "taylor_green" => Ok(Self::TaylorGreen),
            _ => Err(format!("unknown field `{s}` (strain, shear, taylor_green)")),
        }
    }
}

impl Theorem1Field {
    /// The field on refinement level `k` of a base grid with `n` cells.
    pub fn sample(&self, n: usize, k: usize) -> Result<VectorField, AuditError> {
        Ok(match self {
            Self::Strain | Self::Shear => {
                let grid = GridSpec::clamped_2d(n + 1, n + 1, (-1.0, 1.0), (-1.0, 1.0))?.refined(1 << k)?;
                let shear = *self == Self::Shear;
                VectorField::from_fn(
                    grid,
                    "m/s",
                    |p| if shear { [p[1], 0.0, 0.0] } else { [p[0], -p[1], 0.0] },
                )?
            }
            Self::TaylorGreen => {
                let grid = TaylorGreenParams::grid(n << k)?;
                TaylorGreenParams::new(0.1, 1.0)?.velocity(&grid, 0.0)?
            }
        })
    }

    pub fn probe(&self) -> Option<[f64; 3]> {
        match self {
            Self::Strain | Self::Shear => Some([1.0, 1.0, 0.0]),
            Self::TaylorGreen => None,
        }
    }
}

/// Everything an audit run depends on. Its JSON form is hashed into the
/// report, so field order is part of the format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSettings {
    pub grid: usize,
    pub refinements: usize,
    pub rho: f64,
    pub nu: f64,
    pub amplitude: f64,
    pub omega0: f64,
    pub k_gh: f64,
    pub stop_threshold: f64,
    pub theorem1_field: Theorem1Field,
    pub tol_theorem1: f64,
    pub tol_vector_line: f64,
    pub vector_line_steps: usize,
    pub channel_g: f64,
    pub channel_nu: f64,
    pub channel_half_width: f64,
    pub channel_nx: usize,
    pub channel_max_steps: usize,
    pub tol_poiseuille: f64,
    pub tol_decay_oracle: f64,
    pub sink_strength: f64,
    pub sink_total_pressure: f64,
    pub sink_x0: f64,
    pub sink_x1: f64,
    pub sink_half_height: f64,
    pub tube_flux: f64,
    pub tube_step: f64,
    pub slab_time: f64,
    pub seeds: Vec<[f64; 2]>,
    pub p_l: f64,
    pub tol_eq12: f64,
    pub threshold_rho_l: f64,
    pub threshold_rho_s: f64,
    pub tol_potential: f64,
}

impl Default for AuditSettings {
    fn default() -> Self {
        Self {
            grid: 32,
            refinements: 3,
            rho: 1.0,
            nu: 0.1,
            amplitude: 1.0,
            omega0: 1e6,
            k_gh: 0.0,
            stop_threshold: 1e-6,
            theorem1_field: Theorem1Field::Strain,
            tol_theorem1: 0.01,
            tol_vector_line: 0.01,
            vector_line_steps: 4,
            channel_g: 1.0,
            channel_nu: 1.0,
            channel_half_width: 0.5,
            channel_nx: 8,
            channel_max_steps: 5_000_000,
            tol_poiseuille: 0.01,
            tol_decay_oracle: 0.03,
            sink_strength: 1.0,
            sink_total_pressure: 10.0,
            sink_x0: 0.5,
            sink_x1: 2.0,
            sink_half_height: 0.5,
            tube_flux: 1e-3,
            tube_step: 0.01,
            slab_time: 1.0,
            seeds: vec![[1.9, -0.3], [1.9, -0.15], [1.9, 0.0], [1.9, 0.15], [1.9, 0.3]],
            p_l: 1.0,
            tol_eq12: 0.01,
            threshold_rho_l: 1e-9,
            threshold_rho_s: 1e-9,
            tol_potential: 1e-14,
        }
    }
}

impl AuditSettings {
    /// Defaults overridden by any matching keys of `cfg`. Keys are consumed,
    /// so `cfg.finish()` afterwards reports the ones nobody understood.
    pub fn from_config(cfg: &Config) -> Result<Self, AuditError> {
        let d = Self::default();
        let field = match cfg.str("theorem1_field") {
            None => d.theorem1_field,
            Some(s) => s.parse().map_err(|msg| crate::config::ConfigError::Value {
                key: "theorem1_field".into(),
                msg,
            })?,
        };
        let s = Self {
            grid: cfg.usize_or("grid", d.grid)?,
            refinements: cfg.usize_or("refinements", d.refinements)?,
            rho: cfg.f64_or("rho", d.rho)?,
            nu: cfg.f64_or("nu", d.nu)?,
            amplitude: cfg.f64_or("amplitude", d.amplitude)?,
            omega0: cfg.f64_or("omega0", d.omega0)?,
            k_gh: cfg.f64_or("k_gh", d.k_gh)?,
            stop_threshold: cfg.f64_or("stop_threshold", d.stop_threshold)?,
            theorem1_field: field,
            tol_theorem1: cfg.f64_or("tol_theorem1", d.tol_theorem1)?,
            tol_vector_line: cfg.f64_or("tol_vector_line", d.tol_vector_line)?,
            vector_line_steps: cfg.usize_or("vector_line_steps", d.vector_line_steps)?,
            channel_g: cfg.f64_or("channel_g", d.channel_g)?,
            channel_nu: cfg.f64_or("channel_nu", d.channel_nu)?,
            channel_half_width: cfg.f64_or("channel_half_width", d.channel_half_width)?,
            channel_nx: cfg.usize_or("channel_nx", d.channel_nx)?,
            channel_max_steps: cfg.usize_or("channel_max_steps", d.channel_max_steps)?,
            tol_poiseuille: cfg.f64_or("tol_poiseuille", d.tol_poiseuille)?,
            tol_decay_oracle: cfg.f64_or("tol_decay_oracle", d.tol_decay_oracle)?,
            sink_strength: cfg.f64_or("sink_strength", d.sink_strength)?,
            sink_total_pressure: cfg.f64_or("sink_total_pressure", d.sink_total_pressure)?,
            sink_x0: cfg.f64_or("sink_x0", d.sink_x0)?,
            sink_x1: cfg.f64_or("sink_x1", d.sink_x1)?,
            sink_half_height: cfg.f64_or("sink_half_height", d.sink_half_height)?,
            tube_flux: cfg.f64_or("tube_flux", d.tube_flux)?,
            tube_step: cfg.f64_or("tube_step", d.tube_step)?,
            slab_time: cfg.f64_or("slab_time", d.slab_time)?,
            seeds: cfg.points2("seeds")?.unwrap_or(d.seeds),
            p_l: cfg.f64_or("p_l", d.p_l)?,
            tol_eq12: cfg.f64_or("tol_eq12", d.tol_eq12)?,
            threshold_rho_l: cfg.f64_or("threshold_rho_l", d.threshold_rho_l)?,
            threshold_rho_s: cfg.f64_or("threshold_rho_s", d.threshold_rho_s)?,
            tol_potential: cfg.f64_or("tol_potential", d.tol_potential)?,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), AuditError> {
        let bad = |m: &str| Err(AuditError::Input(m.to_string()));
        if self.grid < 8 {
            return bad("grid must be at least 8");
        }
        if self.refinements == 0 {
            return bad("refinements must be at least 1");
        }
        if self.vector_line_steps < 2 {
            return bad("vector_line_steps must be at least 2");
        }
        if !(self.sink_x0 > 0.0 && self.sink_x1 > self.sink_x0 && self.sink_half_height > 0.0) {
            return bad("sink window needs 0 < sink_x0 < sink_x1 and sink_half_height > 0");
        }
        if self.seeds.is_empty() {
            return bad("need at least one seed");
        }
        Ok(())
    }

    /// Canonical JSON used for the report's configuration hash.
    pub fn canonical_json(&self) -> Result<String, AuditError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            rho_l: self.threshold_rho_l,
            rho_s: self.threshold_rho_s,
        }
    }

    fn sink(&self) -> ConvergingFlow {
        ConvergingFlow {
            strength: self.sink_strength,
            total_pressure: self.sink_total_pressure,
            rho: self.rho,
        }
    }

    fn sink_grid(&self, n: usize) -> Result<GridSpec, AuditError> {
        Ok(ConvergingFlow::grid(
            n,
            (self.sink_x0, self.sink_x1),
            self.sink_half_height,
        )?)
    }

    /// Parameters of the parametric formula used by the consistency audit.
    pub fn eq12_params(&self) -> SolutionParams {
        SolutionParams {
            omega0: self.omega0,
            p_l: self.p_l,
            theta1: [0.0; 3],
            theta2: [0.5, 0.0, 0.0],
            vartheta: self.nu,
            mu_rot: [0.0; 3],
            theta3: [0.0; 3],
            segment_length: None,
        }
    }
}

fn run_theorem1(s: &AuditSettings) -> Result<Vec<ClaimResult>, AuditError> {
    let levels = (0..s.refinements)
        .map(|k| s.theorem1_field.sample(s.grid, k))
        .collect::<Result<Vec<_>, _>>()?;
    let mut r = audit_theorem1(&levels, s.theorem1_field.probe(), s.tol_theorem1)?;
    r.input(
        "field",
        serde_json::to_value(s.theorem1_field)?.as_str().unwrap_or_default(),
    );
    Ok(vec![r])
}

fn run_vector_line(s: &AuditSettings) -> Result<Vec<ClaimResult>, AuditError> {
    let tg = TaylorGreenParams::new(s.nu, s.amplitude)?;
    let mut levels = Vec::new();
    for k in 0..s.refinements {
        let mut state = SolverState::taylor_green(&tg, s.grid << k, s.rho)?;
        let grid = state.velocity.grid().clone();
        let dt = SolverConfig::stable_dt(&grid, s.nu, s.amplitude.abs(), 0.5);
        let cfg = SolverConfig::new(grid, s.nu, s.rho, dt, Forcing::None, BoundaryKind::Periodic)?;
        let mut states = vec![state.velocity.clone()];
        for _ in 0..s.vector_line_steps {
            state = step(&state, &cfg)?;
            states.push(state.velocity.clone());
        }
        levels.push(SnapshotSeries { states, dt });
    }
    let mut r = audit_vector_line(&levels, s.tol_vector_line)?;
    r.input("flow", "taylor_green (reference solver)");
    r.input("nu", s.nu);
    Ok(vec![r])
}

fn run_poiseuille(s: &AuditSettings) -> Result<Vec<ClaimResult>, AuditError> {
    let setup = ChannelSetup {
        g: s.channel_g,
        nu: s.channel_nu,
        rho: s.rho,
        half_width: s.channel_half_width,
        nx: s.channel_nx,
        ny: s.grid + 1,
        max_steps: s.channel_max_steps,
        tolerance: s.tol_poiseuille,
    };
    Ok(vec![audit_poiseuille(&setup)?])
}

fn run_decay(s: &AuditSettings) -> Result<Vec<ClaimResult>, AuditError> {
    let setup = DecaySetup {
        nu: s.nu,
        rho: s.rho,
        amplitude: s.amplitude,
        grid: s.grid,
        levels: s.refinements.min(2),
        omega0: s.omega0,
        k_gh: s.k_gh,
        stop_threshold: s.stop_threshold,
        oracle_tolerance: s.tol_decay_oracle,
    };
    Ok(vec![audit_decay(&setup)?])
}

fn run_eq12(s: &AuditSettings) -> Result<Vec<ClaimResult>, AuditError> {
    let flow = s.sink();
    let opts = ExtractOptions {
        step: s.tube_step,
        slab_time: s.slab_time,
        ..ExtractOptions::default()
    };
    let seeds: Vec<[f64; 3]> = s.seeds.iter().map(|p| [p[0], p[1], 0.0]).collect();
    let mut levels = Vec::new();
    for k in 0..s.refinements.min(2) {
        let grid = s.sink_grid((2 * s.grid) << k)?;
        let v = flow.velocity(&grid)?;
        let tubes = extract_density_structure(&v, s.rho, &seeds, s.tube_flux, &opts)?;
        levels.push(TubeLevel {
            tubes,
            pressure: flow.pressure(&grid)?,
        });
    }
    let mut out = audit_eq12_consistency(&levels, &s.eq12_params(), &s.thresholds(), s.tol_eq12)?;
    for r in &mut out {
        r.input("flow", "converging sink (analytic)");
        r.input("tube_flux", s.tube_flux);
        r.input("slab_time", s.slab_time);
    }
    Ok(out)
}

fn run_potential(s: &AuditSettings) -> Result<Vec<ClaimResult>, AuditError> {
    let tg = TaylorGreenParams::new(s.nu, s.amplitude)?;
    let tg_grid = TaylorGreenParams::grid(s.grid)?;
    let (tv, tp) = (tg.velocity(&tg_grid, 0.0)?, tg.pressure(&tg_grid, 0.0, s.rho)?);
    let flow = s.sink();
    let sg = s.sink_grid(s.grid)?;
    let (sv, sp) = (flow.velocity(&sg)?, flow.pressure(&sg)?);
    let u0 = sv.magnitude().values().iter().copied().fold(f64::INFINITY, f64::min);
    let cases = [("taylor_green", &tv, &tp, 0.0), ("converging_sink", &sv, &sp, u0)];
    Ok(vec![audit_potential_identity(&cases, s.rho, s.tol_potential)?])
}

fn run_one(claim: Claim, s: &AuditSettings) -> Result<Vec<ClaimResult>, AuditError> {
    match claim {
        Claim::Theorem1 => run_theorem1(s),
        Claim::VectorLine => run_vector_line(s),
        Claim::Poiseuille => run_poiseuille(s),
        Claim::Decay => run_decay(s),
        Claim::Eq12 => run_eq12(s),
        Claim::Potential => run_potential(s),
    }
}

/// Runs the requested claims concurrently; results come back in request
/// order regardless of scheduling.
pub fn run_claims(settings: &AuditSettings, claims: &[Claim]) -> Result<Vec<ClaimResult>, AuditError> {
    settings.validate()?;
    let per_claim = claims
        .par_iter()
        .map(|c| run_one(*c, settings))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(per_claim.into_iter().flatten().collect())
}
