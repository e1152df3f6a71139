//! Small 2D incompressible Navier–Stokes solver used as a trusted oracle.
//!
//! Collocated nodes, explicit Euler advection/diffusion, then a projection
//! that makes the central-difference divergence vanish at every active node.
//! The projection solves `D G φ = D u*` with the same wide stencils the
//! [`crate::fields`] operators use, by conjugate gradients in a fixed
//! iteration order. In channel mode the wall rows are no-slip and carry no
//! unknowns.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

use crate::analytic::TaylorGreenParams;
use crate::fields::{
    norm3, read_snapshot, write_snapshot, Boundary, FieldError, GridSpec, ScalarField, Snapshot, VectorField,
};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("CFL number {cfl:.3} exceeds 0.5; need dt <= {required_dt:e}")]
    Cfl { cfl: f64, required_dt: f64 },
    #[error("diffusion number {number:.3} exceeds 0.5; need dt <= {required_dt:e}")]
    Diffusion { number: f64, required_dt: f64 },
    #[error("pressure solve did not converge: relative residual {residual:e} after {iterations} iterations")]
    Poisson { residual: f64, iterations: usize },
    #[error("projection left max |div u| = {divergence:e} above bound {bound:e}")]
    Divergence { divergence: f64, bound: f64 },
    #[error("no steady state after {steps} steps (relative change {change:e})")]
    NotSteady { steps: usize, change: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    /// Doubly periodic box.
    Periodic,
    /// Periodic in x, no-slip walls at the first and last y rows.
    Channel,
}

/// Body force per unit mass, m/s².
#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    None,
    Uniform([f64; 2]),
    Field(VectorField),
}

impl Forcing {
    fn at(&self, idx: usize) -> [f64; 2] {
        match self {
            Forcing::None => [0.0; 2],
            Forcing::Uniform(f) => *f,
            Forcing::Field(v) => {
                let x = v.values()[idx];
                [x[0], x[1]]
            }
        }
    }

    fn magnitude(&self) -> f64 {
        match self {
            Forcing::None => 0.0,
            Forcing::Uniform(f) => (f[0] * f[0] + f[1] * f[1]).sqrt(),
            Forcing::Field(v) => v.max_norm(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub grid: GridSpec,
    /// Kinematic viscosity, m²/s.
    pub nu: f64,
    /// Density, kg/m³.
    pub rho: f64,
    pub dt: f64,
    pub forcing: Forcing,
    pub bc: BoundaryKind,
    /// Relative residual at which the pressure solve stops.
    pub poisson_tol: f64,
    pub max_poisson_iters: usize,
    /// Post-step bound on max |div u| relative to max |u| / h.
    pub divergence_tol: f64,
}

impl SolverConfig {
    pub fn new(
        grid: GridSpec,
        nu: f64,
        rho: f64,
        dt: f64,
        forcing: Forcing,
        bc: BoundaryKind,
    ) -> Result<Self, SolverError> {
        let cfg = Self {
            grid,
            nu,
            rho,
            dt,
            forcing,
            bc,
            poisson_tol: 1e-10,
            max_poisson_iters: 100_000,
            divergence_tol: 1e-8,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.grid.ndim() != 2 {
            return Err(SolverError::Config("the reference solver is 2D only".into()));
        }
        let want = match self.bc {
            BoundaryKind::Periodic => [Boundary::Periodic, Boundary::Periodic],
            BoundaryKind::Channel => [Boundary::Periodic, Boundary::Clamped],
        };
        if self.grid.boundary() != want {
            return Err(SolverError::Config(format!(
                "{:?} mode needs grid boundaries {want:?}, got {:?}",
                self.bc,
                self.grid.boundary()
            )));
        }
        if !(self.dt > 0.0) || !(self.nu >= 0.0) || !(self.rho > 0.0) {
            return Err(SolverError::Config(format!(
                "need dt > 0, nu >= 0, rho > 0 (got dt={}, nu={}, rho={})",
                self.dt, self.nu, self.rho
            )));
        }
        if let Forcing::Field(f) = &self.forcing {
            if f.grid() != &self.grid {
                return Err(SolverError::Config("forcing field lives on a different grid".into()));
            }
        }
        Ok(())
    }

    /// Largest stable step for speed scale `max_speed`, with safety factor.
    pub fn stable_dt(grid: &GridSpec, nu: f64, max_speed: f64, safety: f64) -> f64 {
        let h = grid.min_spacing();
        let inv = (0..grid.ndim()).map(|a| 1.0 / (grid.h(a) * grid.h(a))).sum::<f64>();
        let diff = if nu > 0.0 { 0.5 / (nu * inv) } else { f64::INFINITY };
        let adv = if max_speed > 0.0 {
            0.5 * h / max_speed
        } else {
            f64::INFINITY
        };
        safety * diff.min(adv)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub t: f64,
    pub velocity: VectorField,
    pub pressure: ScalarField,
}

impl SolverState {
    pub fn at_rest(grid: &GridSpec) -> Self {
        Self {
            t: 0.0,
            velocity: VectorField::zeros(grid.clone(), "m/s"),
            pressure: ScalarField::zeros(grid.clone(), "Pa"),
        }
    }

    pub fn taylor_green(p: &TaylorGreenParams, n: usize, rho: f64) -> Result<Self, FieldError> {
        let grid = TaylorGreenParams::grid(n)?;
        Ok(Self {
            t: 0.0,
            velocity: p.velocity(&grid, 0.0)?,
            pressure: p.pressure(&grid, 0.0, rho)?,
        })
    }

    /// Writes `velocity.field` and `pressure.field` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), SolverError> {
        std::fs::create_dir_all(dir)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("velocity.field"))?);
        write_snapshot(&mut f, &Snapshot::Vector(self.velocity.clone()), Some(self.t))?;
        f.flush()?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("pressure.field"))?);
        write_snapshot(&mut f, &Snapshot::Scalar(self.pressure.clone()), Some(self.t))?;
        f.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, SolverError> {
        let open = |name: &str| -> Result<_, SolverError> {
            Ok(std::io::BufReader::new(std::fs::File::open(dir.join(name))?))
        };
        let (v, tv) = read_snapshot(open("velocity.field")?)?;
        let (p, tp) = read_snapshot(open("pressure.field")?)?;
        let velocity = v.into_vector()?;
        let pressure = p.into_scalar()?;
        if velocity.grid() != pressure.grid() {
            return Err(SolverError::Config("snapshot fields live on different grids".into()));
        }
        let t = tv.or(tp).unwrap_or(0.0);
        if tp.is_some() && tv != tp {
            return Err(SolverError::Config("snapshot time stamps disagree".into()));
        }
        Ok(Self { t, velocity, pressure })
    }
}

/// Diagnostics of one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub poisson_iterations: usize,
    /// Max |div u| over active nodes after projection.
    pub divergence: f64,
}

/// Precomputed neighbour indices and the active-node mask.
struct Layout {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    east: Vec<usize>,
    west: Vec<usize>,
    north: Vec<usize>,
    south: Vec<usize>,
    active: Vec<bool>,
}

impl Layout {
    fn new(cfg: &SolverConfig) -> Self {
        let g = &cfg.grid;
        let (nx, ny) = (g.dim(0), g.dim(1));
        let n = nx * ny;
        let mut l = Layout {
            nx,
            ny,
            hx: g.h(0),
            hy: g.h(1),
            east: vec![0; n],
            west: vec![0; n],
            north: vec![0; n],
            south: vec![0; n],
            active: vec![true; n],
        };
        for j in 0..ny {
            for i in 0..nx {
                let idx = i + nx * j;
                l.east[idx] = (i + 1) % nx + nx * j;
                l.west[idx] = (i + nx - 1) % nx + nx * j;
                match cfg.bc {
                    BoundaryKind::Periodic => {
                        l.north[idx] = i + nx * ((j + 1) % ny);
                        l.south[idx] = i + nx * ((j + ny - 1) % ny);
                    }
                    BoundaryKind::Channel => {
                        l.north[idx] = i + nx * (j + 1).min(ny - 1);
                        l.south[idx] = i + nx * j.saturating_sub(1);
                        l.active[idx] = j > 0 && j + 1 < ny;
                    }
                }
            }
        }
        l
    }

    fn len(&self) -> usize {
        self.nx * self.ny
    }

    /// Wide gradient of `phi` at active nodes; zero on walls.
    fn gradient(&self, phi: &[f64], gx: &mut [f64], gy: &mut [f64]) {
        let (cx, cy) = (0.5 / self.hx, 0.5 / self.hy);
        for idx in 0..self.len() {
            if self.active[idx] {
                let val = |m: usize| if self.active[m] { phi[m] } else { 0.0 };
                gx[idx] = (val(self.east[idx]) - val(self.west[idx])) * cx;
                gy[idx] = (val(self.north[idx]) - val(self.south[idx])) * cy;
            } else {
                gx[idx] = 0.0;
                gy[idx] = 0.0;
            }
        }
    }

    /// Central divergence at active nodes, reading zero velocity on walls.
    fn divergence(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        let (cx, cy) = (0.5 / self.hx, 0.5 / self.hy);
        for idx in 0..self.len() {
            out[idx] = if self.active[idx] {
                (u[self.east[idx]] - u[self.west[idx]]) * cx + (v[self.north[idx]] - v[self.south[idx]]) * cy
            } else {
                0.0
            };
        }
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for idx in 0..self.len() {
            if self.active[idx] {
                s += a[idx] * b[idx];
            }
        }
        s
    }
}

/// Scratch buffers reused across projection solves.
struct Workspace {
    gx: Vec<f64>,
    gy: Vec<f64>,
    ap: Vec<f64>,
    r: Vec<f64>,
    p: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            gx: vec![0.0; n],
            gy: vec![0.0; n],
            ap: vec![0.0; n],
            r: vec![0.0; n],
            p: vec![0.0; n],
        }
    }
}

/// Applies `−D G` (symmetric positive semi-definite on active nodes).
fn apply_neg_operator(l: &Layout, phi: &[f64], ws_gx: &mut [f64], ws_gy: &mut [f64], out: &mut [f64]) {
    l.gradient(phi, ws_gx, ws_gy);
    l.divergence(ws_gx, ws_gy, out);
    for (idx, o) in out.iter_mut().enumerate() {
        *o = if l.active[idx] { -*o } else { 0.0 };
    }
}

/// Solves `−D G φ = rhs` by conjugate gradients, starting from `phi`.
fn solve_projection(
    l: &Layout,
    rhs: &[f64],
    phi: &mut [f64],
    ws: &mut Workspace,
    tol: f64,
    max_iters: usize,
) -> Result<usize, SolverError> {
    let b_norm = l.dot(rhs, rhs).sqrt();
    if b_norm == 0.0 {
        phi.iter_mut().for_each(|x| *x = 0.0);
        return Ok(0);
    }
    apply_neg_operator(l, phi, &mut ws.gx, &mut ws.gy, &mut ws.ap);
    for idx in 0..l.len() {
        ws.r[idx] = if l.active[idx] { rhs[idx] - ws.ap[idx] } else { 0.0 };
        ws.p[idx] = ws.r[idx];
    }
    let mut rr = l.dot(&ws.r, &ws.r);
    let target = tol * b_norm;
    let mut iters = 0;
    while rr.sqrt() > target {
        if iters >= max_iters {
            return Err(SolverError::Poisson {
                residual: rr.sqrt() / b_norm,
                iterations: iters,
            });
        }
        apply_neg_operator(l, &ws.p, &mut ws.gx, &mut ws.gy, &mut ws.ap);
        let pap = l.dot(&ws.p, &ws.ap);
        if !(pap > 0.0) {
            // search direction fell into the null space; residual is as small as it gets
            break;
        }
        let alpha = rr / pap;
        for idx in 0..l.len() {
            if l.active[idx] {
                phi[idx] += alpha * ws.p[idx];
                ws.r[idx] -= alpha * ws.ap[idx];
            }
        }
        let rr_new = l.dot(&ws.r, &ws.r);
        let beta = rr_new / rr;
        for idx in 0..l.len() {
            if l.active[idx] {
                ws.p[idx] = ws.r[idx] + beta * ws.p[idx];
            }
        }
        rr = rr_new;
        iters += 1;
    }
    if rr.sqrt() > 1e3 * target {
        return Err(SolverError::Poisson {
            residual: rr.sqrt() / b_norm,
            iterations: iters,
        });
    }
    Ok(iters)
}

/// Removes the mean of `p` on every decoupled sub-lattice of the wide
/// stencil (periodic mode only, where those means are arbitrary).
fn normalize_pressure(l: &Layout, p: &mut [f64]) {
    let kx = if l.nx.is_multiple_of(2) { 2 } else { 1 };
    let ky = if l.ny.is_multiple_of(2) { 2 } else { 1 };
    let mut sums = [0.0f64; 4];
    let mut counts = [0usize; 4];
    let class = |idx: usize| (idx % l.nx) % kx + 2 * ((idx / l.nx) % ky);
    for (idx, v) in p.iter().enumerate() {
        sums[class(idx)] += v;
        counts[class(idx)] += 1;
    }
    for (idx, v) in p.iter_mut().enumerate() {
        let c = class(idx);
        *v -= sums[c] / counts[c] as f64;
    }
}

fn components(v: &VectorField) -> (Vec<f64>, Vec<f64>) {
    (
        v.values().iter().map(|x| x[0]).collect(),
        v.values().iter().map(|x| x[1]).collect(),
    )
}

/// Rejects steps that violate the advective or diffusive limit.
pub fn check_stability(state: &SolverState, cfg: &SolverConfig, dt: f64) -> Result<(), SolverError> {
    let h = cfg.grid.min_spacing();
    let umax = state.velocity.max_norm();
    let cfl = umax * dt / h;
    if cfl > 0.5 {
        return Err(SolverError::Cfl {
            cfl,
            required_dt: 0.5 * h / umax,
        });
    }
    let inv = 1.0 / (cfg.grid.h(0) * cfg.grid.h(0)) + 1.0 / (cfg.grid.h(1) * cfg.grid.h(1));
    let number = cfg.nu * dt * inv;
    if number > 0.5 {
        return Err(SolverError::Diffusion {
            number,
            required_dt: 0.5 / (cfg.nu * inv),
        });
    }
    Ok(())
}

pub fn step(state: &SolverState, cfg: &SolverConfig) -> Result<SolverState, SolverError> {
    step_with_stats(state, cfg, cfg.dt).map(|(s, _)| s)
}

/// Advances one step of length `dt` and reports solver diagnostics.
pub fn step_with_stats(
    state: &SolverState,
    cfg: &SolverConfig,
    dt: f64,
) -> Result<(SolverState, StepStats), SolverError> {
    cfg.validate()?;
    if state.velocity.grid() != &cfg.grid || state.pressure.grid() != &cfg.grid {
        return Err(SolverError::Config("state and configuration grids differ".into()));
    }
    check_stability(state, cfg, dt)?;
    let l = Layout::new(cfg);
    let n = l.len();
    let (u, v) = components(&state.velocity);
    let (cx, cy) = (0.5 / l.hx, 0.5 / l.hy);
    let (ix2, iy2) = (1.0 / (l.hx * l.hx), 1.0 / (l.hy * l.hy));

    let mut us = vec![0.0; n];
    let mut vs = vec![0.0; n];
    for idx in 0..n {
        if !l.active[idx] {
            continue;
        }
        let (e, w, no, so) = (l.east[idx], l.west[idx], l.north[idx], l.south[idx]);
        let (uc, vc) = (u[idx], v[idx]);
        let adv_u = uc * (u[e] - u[w]) * cx + vc * (u[no] - u[so]) * cy;
        let adv_v = uc * (v[e] - v[w]) * cx + vc * (v[no] - v[so]) * cy;
        let lap_u = (u[e] - 2.0 * uc + u[w]) * ix2 + (u[no] - 2.0 * uc + u[so]) * iy2;
        let lap_v = (v[e] - 2.0 * vc + v[w]) * ix2 + (v[no] - 2.0 * vc + v[so]) * iy2;
        let f = cfg.forcing.at(idx);
        us[idx] = uc + dt * (-adv_u + cfg.nu * lap_u + f[0]);
        vs[idx] = vc + dt * (-adv_v + cfg.nu * lap_v + f[1]);
    }

    // −D G φ = −D u*,  u = u* − G φ,  p = ρ φ / dt
    let mut rhs = vec![0.0; n];
    l.divergence(&us, &vs, &mut rhs);
    rhs.iter_mut().for_each(|x| *x = -*x);
    let scale = dt / cfg.rho;
    let mut phi: Vec<f64> = state
        .pressure
        .values()
        .iter()
        .zip(&l.active)
        .map(|(p, a)| if *a { p * scale } else { 0.0 })
        .collect();
    let mut ws = Workspace::new(n);
    let iterations = solve_projection(&l, &rhs, &mut phi, &mut ws, cfg.poisson_tol, cfg.max_poisson_iters)?;
    l.gradient(&phi, &mut ws.gx, &mut ws.gy);
    for idx in 0..n {
        if l.active[idx] {
            us[idx] -= ws.gx[idx];
            vs[idx] -= ws.gy[idx];
        }
    }
    let mut div = vec![0.0; n];
    l.divergence(&us, &vs, &mut div);
    let divergence = div.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let umax = us
        .iter()
        .zip(&vs)
        .fold(0.0f64, |m, (a, b)| m.max((a * a + b * b).sqrt()));
    let bound = cfg.divergence_tol * umax / cfg.grid.min_spacing();
    if divergence > bound && divergence > 1e-13 {
        return Err(SolverError::Divergence { divergence, bound });
    }

    let mut p: Vec<f64> = phi.iter().map(|x| x / scale).collect();
    match cfg.bc {
        BoundaryKind::Periodic => normalize_pressure(&l, &mut p),
        BoundaryKind::Channel => {
            // wall rows copy the adjacent interior row
            for idx in 0..n {
                if !l.active[idx] {
                    let j = idx / l.nx;
                    let src = if j == 0 { l.north[idx] } else { l.south[idx] };
                    p[idx] = p[src];
                }
            }
        }
    }
    let velocity = VectorField::new(
        cfg.grid.clone(),
        us.iter().zip(&vs).map(|(a, b)| [*a, *b, 0.0]).collect(),
        "m/s",
    )?;
    let pressure = ScalarField::new(cfg.grid.clone(), p, "Pa")?;
    Ok((
        SolverState {
            t: state.t + dt,
            velocity,
            pressure,
        },
        StepStats {
            poisson_iterations: iterations,
            divergence,
        },
    ))
}

/// Grid mean of `ρ |u|² / 2`, J/m³.
pub fn kinetic_energy(state: &SolverState, rho: f64) -> f64 {
    let v = state.velocity.values();
    0.5 * rho * v.iter().map(|x| x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sum::<f64>() / v.len() as f64
}

/// Largest |div u| over the solver's active nodes.
pub fn max_divergence(state: &SolverState, cfg: &SolverConfig) -> f64 {
    let l = Layout::new(cfg);
    let (u, v) = components(&state.velocity);
    let mut div = vec![0.0; l.len()];
    l.divergence(&u, &v, &mut div);
    div.iter().fold(0.0f64, |m, d| m.max(d.abs()))
}

/// Residual of the steady momentum balance
/// `ν Δu + f − (u·∇)u − ∇p/ρ`, max over active nodes, relative to |f|
/// (or absolute when unforced).
pub fn steady_residual(state: &SolverState, cfg: &SolverConfig) -> f64 {
    let l = Layout::new(cfg);
    let (u, v) = components(&state.velocity);
    let p = state.pressure.values();
    let (cx, cy) = (0.5 / l.hx, 0.5 / l.hy);
    let (ix2, iy2) = (1.0 / (l.hx * l.hx), 1.0 / (l.hy * l.hy));
    let mut worst = 0.0f64;
    for idx in 0..l.len() {
        if !l.active[idx] {
            continue;
        }
        let (e, w, no, so) = (l.east[idx], l.west[idx], l.north[idx], l.south[idx]);
        let pv = |m: usize| if l.active[m] { p[m] } else { p[idx] };
        let f = cfg.forcing.at(idx);
        let ru = cfg.nu * ((u[e] - 2.0 * u[idx] + u[w]) * ix2 + (u[no] - 2.0 * u[idx] + u[so]) * iy2) + f[0]
            - u[idx] * (u[e] - u[w]) * cx
            - v[idx] * (u[no] - u[so]) * cy
            - (pv(e) - pv(w)) * cx / cfg.rho;
        let rv = cfg.nu * ((v[e] - 2.0 * v[idx] + v[w]) * ix2 + (v[no] - 2.0 * v[idx] + v[so]) * iy2) + f[1]
            - u[idx] * (v[e] - v[w]) * cx
            - v[idx] * (v[no] - v[so]) * cy
            - (pv(no) - pv(so)) * cy / cfg.rho;
        worst = worst.max((ru * ru + rv * rv).sqrt());
    }
    let scale = cfg.forcing.magnitude();
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub energy: f64,
    pub max_speed: f64,
    pub probes: Vec<[f64; 2]>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: Vec<Sample>,
    pub snapshots: Vec<SolverState>,
    pub final_state: SolverState,
}

fn sample(state: &SolverState, cfg: &SolverConfig, probes: &[[f64; 2]]) -> Result<Sample, SolverError> {
    let probes = probes
        .iter()
        .map(|p| state.velocity.sample([p[0], p[1], 0.0]).map(|u| [u[0], u[1]]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Sample {
        t: state.t,
        energy: kinetic_energy(state, cfg.rho),
        max_speed: state.velocity.values().iter().fold(0.0, |m, x| f64::max(m, norm3(*x))),
        probes,
    })
}

/// Integrates from `initial` to `t_end`, sampling after every step and
/// keeping a snapshot every `snapshot_every` steps (and the initial state)
/// when requested. The last step is shortened to land on `t_end`.
pub fn run(
    cfg: &SolverConfig,
    initial: SolverState,
    t_end: f64,
    probes: &[[f64; 2]],
    snapshot_every: Option<usize>,
) -> Result<RunOutput, SolverError> {
    if !(t_end > initial.t) {
        return Err(SolverError::Config(format!(
            "t_end {t_end} must exceed the start time {}",
            initial.t
        )));
    }
    let mut series = vec![sample(&initial, cfg, probes)?];
    let mut snapshots = Vec::new();
    if snapshot_every.is_some() {
        snapshots.push(initial.clone());
    }
    let mut state = initial;
    let mut k = 0usize;
    while state.t < t_end {
        let remaining = t_end - state.t;
        let dt = if remaining < cfg.dt * (1.0 + 1e-9) {
            remaining
        } else {
            cfg.dt
        };
        let (next, _) = step_with_stats(&state, cfg, dt)?;
        state = next;
        if remaining == dt {
            state.t = t_end;
        }
        k += 1;
        series.push(sample(&state, cfg, probes)?);
        if let Some(every) = snapshot_every {
            if every > 0 && k.is_multiple_of(every) {
                snapshots.push(state.clone());
            }
        }
    }
    Ok(RunOutput {
        series,
        snapshots,
        final_state: state,
    })
}

/// Steps until the max-norm change over `window` steps, relative to the
/// max speed, drops below `tol`.
pub fn run_to_steady(
    cfg: &SolverConfig,
    initial: SolverState,
    window: usize,
    tol: f64,
    max_steps: usize,
) -> Result<(SolverState, usize), SolverError> {
    let mut state = initial;
    let mut reference = state.velocity.clone();
    let mut steps = 0;
    let mut change = f64::INFINITY;
    while steps < max_steps {
        state = step(&state, cfg)?;
        steps += 1;
        if steps % window == 0 {
            let diff = state.velocity.linear_combination(1.0, &reference, -1.0)?.max_norm();
            let scale = state.velocity.max_norm();
            change = if scale > 0.0 { diff / scale } else { diff };
            if change < tol {
                return Ok((state, steps));
            }
            reference = state.velocity.clone();
        }
    }
    Err(SolverError::NotSteady { steps, change })
}

pub fn write_series_csv<W: Write>(out: &mut W, series: &[Sample]) -> std::io::Result<()> {
    let n_probes = series.first().map(|s| s.probes.len()).unwrap_or(0);
    let mut header = String::from("t,energy,max_speed");
    for k in 0..n_probes {
        header.push_str(&format!(",probe{k}_u,probe{k}_v"));
    }
    writeln!(out, "{header}")?;
    for s in series {
        let mut row = format!("{},{},{}", s.t, s.energy, s.max_speed);
        for p in &s.probes {
            row.push_str(&format!(",{},{}", p[0], p[1]));
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn periodic_cfg(n: usize, nu: f64, dt: f64) -> SolverConfig {
        SolverConfig::new(
            TaylorGreenParams::grid(n).unwrap(),
            nu,
            1.0,
            dt,
            Forcing::None,
            BoundaryKind::Periodic,
        )
        .unwrap()
    }

    #[test]
    fn rest_is_a_fixed_point() {
        let cfg = periodic_cfg(16, 0.1, 0.01);
        let s0 = SolverState::at_rest(&cfg.grid);
        let s1 = step(&s0, &cfg).unwrap();
        assert_eq!(s1.velocity.max_norm(), 0.0);
        assert!((s1.t - 0.01).abs() < 1e-15);
    }

    #[test]
    fn uniform_energy_value() {
        let cfg = periodic_cfg(8, 0.1, 0.01);
        let mut s = SolverState::at_rest(&cfg.grid);
        s.velocity = VectorField::from_fn(cfg.grid.clone(), "m/s", |_| [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(kinetic_energy(&s, 2.0), 1.0);
        s.velocity = s.velocity.linear_combination(2.0, &s.velocity.clone(), 0.0).unwrap();
        assert_eq!(kinetic_energy(&s, 2.0), 4.0);
    }

    #[test]
    fn taylor_green_initial_energy() {
        let p = TaylorGreenParams::new(0.1, 1.0).unwrap();
        let s = SolverState::taylor_green(&p, 32, 1.0).unwrap();
        assert!((kinetic_energy(&s, 1.0) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn cfl_violation_reports_required_step() {
        let cfg = periodic_cfg(16, 0.0, 1.0);
        let p = TaylorGreenParams::new(0.1, 1.0).unwrap();
        let s = SolverState::taylor_green(&p, 16, 1.0).unwrap();
        match step(&s, &cfg) {
            Err(SolverError::Cfl { required_dt, .. }) => {
                assert!((required_dt - 0.5 * cfg.grid.h(0) / s.velocity.max_norm()).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn projection_removes_divergence() {
        let cfg = periodic_cfg(32, 0.05, 0.01);
        let mut s = SolverState::at_rest(&cfg.grid);
        // compressive perturbation on top of a vortex
        s.velocity = VectorField::from_fn(cfg.grid.clone(), "m/s", |p| {
            [
                p[0].sin() * p[1].cos() + 0.3 * p[0].sin(),
                -p[0].cos() * p[1].sin(),
                0.0,
            ]
        })
        .unwrap();
        let (s1, stats) = step_with_stats(&s, &cfg, cfg.dt).unwrap();
        assert!(stats.poisson_iterations > 0);
        let bound = 1e-8 * s1.velocity.max_norm() / cfg.grid.h(0);
        assert!(max_divergence(&s1, &cfg) <= bound);
        assert!(crate::fields::divergence(&s1.velocity).unwrap().max_abs() <= bound);
    }

    #[test]
    fn channel_requires_clamped_walls() {
        let g = TaylorGreenParams::grid(8).unwrap();
        assert!(SolverConfig::new(g, 0.1, 1.0, 0.01, Forcing::None, BoundaryKind::Channel).is_err());
    }

    #[test]
    fn snapshot_restart_round_trip() {
        let cfg = periodic_cfg(16, 0.1, 0.02);
        let p = TaylorGreenParams::new(0.1, 1.0).unwrap();
        let s = step(&SolverState::taylor_green(&p, 16, 1.0).unwrap(), &cfg).unwrap();
        let dir = std::env::temp_dir().join(format!("flowaudit-solver-{}", std::process::id()));
        s.save(&dir).unwrap();
        let back = SolverState::load(&dir).unwrap();
        assert_eq!(back, s);
        std::fs::remove_dir_all(&dir).ok();
    }
}
