//! Pressure-driven channel flow against the parabolic laws.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{AuditError, ClaimResult, LevelResidual, Table};
use crate::analytic::channel_speed;
use crate::fields::{Boundary, GridSpec};
use crate::solver::{run_to_steady, steady_residual, BoundaryKind, Forcing, SolverConfig, SolverState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSetup {
    /// Driving pressure gradient magnitude `G = P_L / L`, Pa/m.
    pub g: f64,
    pub nu: f64,
    pub rho: f64,
    pub half_width: f64,
    /// Nodes along the periodic streamwise axis.
    pub nx: usize,
    /// Nodes across the channel, walls included.
    pub ny: usize,
    pub max_steps: usize,
    pub tolerance: f64,
}

impl ChannelSetup {
    pub fn grid(&self) -> Result<GridSpec, AuditError> {
        let lx = 2.0 * self.half_width;
        Ok(GridSpec::new(
            &[self.nx, self.ny],
            &[lx / self.nx as f64, 2.0 * self.half_width / (self.ny - 1) as f64],
            &[0.0, -self.half_width],
            &[Boundary::Periodic, Boundary::Clamped],
        )?)
    }
}

/// Least-squares `u ≈ a + b y + c y²`.
fn fit_parabola(ys: &[f64], us: &[f64]) -> Result<[f64; 3], AuditError> {
    let a = DMatrix::from_fn(ys.len(), 3, |i, j| ys[i].powi(j as i32));
    let b = DVector::from_column_slice(us);
    let coef = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| AuditError::Input(format!("parabola fit failed: {e}")))?;
    Ok([coef[0], coef[1], coef[2]])
}

/// Runs the reference solver to steady state and compares the profile with
/// the plane-channel law `u = G (R² − y²) / (2μ)`.
///
/// The verdict metric is the larger of the max profile deviation (relative
/// to the centerline speed) and the relative curvature error against `G/μ`.
/// The pipe-law curvature constant `P_L/(2μL) = G/(2μ)` is reported next to
/// it so the factor between the two geometries is explicit.
pub fn audit_poiseuille(setup: &ChannelSetup) -> Result<ClaimResult, AuditError> {
    let mut result = ClaimResult::new(
        "poiseuille",
        "u(r) = P_L (R² − r²)/(4μL);  −d²u/dr² = P_L/(2μL)",
        setup.tolerance,
    );
    if setup.ny < 5 || setup.ny.is_multiple_of(2) {
        return Err(AuditError::Input(format!(
            "channel needs an odd ny >= 5 so the centerline is a node, got {}",
            setup.ny
        )));
    }
    let mu = setup.rho * setup.nu;
    let grid = setup.grid()?;
    let center = channel_speed(setup.g, mu, setup.half_width, 0.0);
    let dt = SolverConfig::stable_dt(&grid, setup.nu, center, 0.8);
    let cfg = SolverConfig::new(
        grid.clone(),
        setup.nu,
        setup.rho,
        dt,
        Forcing::Uniform([setup.g / setup.rho, 0.0]),
        BoundaryKind::Channel,
    )?;
    let (state, steps) = run_to_steady(&cfg, SolverState::at_rest(&grid), 100, 1e-8, setup.max_steps)?;

    let (nx, ny) = (grid.dim(0), grid.dim(1));
    let ys: Vec<f64> = (0..ny).map(|j| grid.position(grid.index(0, j, 0))[1]).collect();
    let us: Vec<f64> = (0..ny)
        .map(|j| {
            (0..nx)
                .map(|i| state.velocity.values()[grid.index(i, j, 0)][0])
                .sum::<f64>()
                / nx as f64
        })
        .collect();
    let coef = fit_parabola(&ys, &us)?;
    let curvature = -2.0 * coef[2];
    let plane = setup.g / mu;
    let pipe = setup.g / (2.0 * mu);

    let mut table = Table::new(&["y", "u", "u_exact", "deviation"]);
    let mut max_dev = 0.0f64;
    let mut sum = 0.0;
    for (y, u) in ys.iter().zip(&us) {
        let exact = channel_speed(setup.g, mu, setup.half_width, *y);
        let d = (u - exact).abs();
        max_dev = max_dev.max(d);
        sum += d * d;
        table.push(vec![*y, *u, exact, u - exact]);
    }
    let centre_measured = us[ny / 2];
    let curvature_error = (curvature / plane - 1.0).abs();
    let profile_error = max_dev / center;
    let metric = profile_error.max(curvature_error);

    result.input("G", setup.g);
    result.input("nu", setup.nu);
    result.input("rho", setup.rho);
    result.input("half_width", setup.half_width);
    result.input("grid", format!("{nx} x {ny}"));
    result.input("dt", dt);
    result.note(format!("steady after {steps} steps (change < 1e-8 over 100 steps)"));
    result.note(format!(
        "centerline {centre_measured:e} vs G R²/(2μ) = {center:e} (relative error {:e})",
        (centre_measured / center - 1.0).abs()
    ));
    result.note(format!(
        "fitted curvature −u'' = {curvature:e}; plane-channel G/μ = {plane:e} (relative error {curvature_error:e})"
    ));
    result.note(format!(
        "pipe-law constant P_L/(2μL) = G/(2μ) = {pipe:e}; measured/pipe = {:.6}: the pipe constant describes an axisymmetric pipe, the plane channel carries twice that curvature",
        curvature / pipe
    ));
    result.note(format!(
        "steady momentum residual (relative to G/ρ): {:e}",
        steady_residual(&state, &cfg)
    ));
    result.table = table;
    result.conclude(vec![LevelResidual {
        dims: grid.dims().to_vec(),
        h: grid.h(1),
        max: max_dev,
        l2: (sum / ny as f64).sqrt(),
        metric,
    }]);
    Ok(result)
}
