use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use flowaudit::analytic::{ConvergingFlow, TaylorGreenParams};
use flowaudit::audit::{render_report, run_claims, AuditSettings, Claim, ClaimVerdict};
use flowaudit::config::{self, Config};
use flowaudit::density::{extract_density_structure, write_tube_csv, DensityStructure, ExtractOptions};
use flowaudit::fields::{read_snapshot, Boundary, GridSpec};
use flowaudit::solution::{classify_regime, split_velocity};
use flowaudit::solver::{run, write_series_csv, BoundaryKind, Forcing, SolverConfig, SolverState};

#[derive(Parser)]
#[command(name = "flowaudit", version, about = "Numerical audits of closed-form flow claims")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run claim audits and write report.json plus CSV tables.
    Audit(AuditArgs),
    /// Run the reference solver.
    Simulate(SimulateArgs),
    /// Trace streamtubes and export their density structure.
    TubeExtract(TubeArgs),
    /// Evaluate the parametric velocity formula for one density structure.
    EvalEq12(EvalArgs),
}

#[derive(Args)]
struct AuditArgs {
    /// all, theorem1, vector-line, poiseuille, decay, eq12 or potential.
    claims: Vec<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base grid size.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, default_value = "audit-out")]
    out: PathBuf,
    /// Number of grid levels.
    #[arg(long)]
    refinements: Option<usize>,
    /// Energy fraction below which the flow counts as stopped.
    #[arg(long)]
    threshold_stop: Option<f64>,
    #[arg(long)]
    threshold_rho_l: Option<f64>,
    #[arg(long)]
    threshold_rho_s: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides both nx and ny.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, default_value = "sim-out")]
    out: PathBuf,
    /// Continue from a saved state directory.
    #[arg(long)]
    restart: Option<PathBuf>,
}

#[derive(Args)]
struct TubeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, default_value = "tubes-out")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    threshold_rho_l: Option<f64>,
    #[arg(long)]
    threshold_rho_s: Option<f64>,
}

fn load(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(Config::default()),
    }
}

fn audit(args: AuditArgs) -> Result<()> {
    let mut cfg = load(args.config.as_deref())?;
    if let Some(g) = args.grid {
        cfg.set("grid", g);
    }
    if let Some(k) = args.refinements {
        cfg.set("refinements", k);
    }
    if let Some(t) = args.threshold_stop {
        cfg.set("stop_threshold", t);
    }
    if let Some(t) = args.threshold_rho_l {
        cfg.set("threshold_rho_l", t);
    }
    if let Some(t) = args.threshold_rho_s {
        cfg.set("threshold_rho_s", t);
    }
    let settings = AuditSettings::from_config(&cfg)?;
    cfg.finish()?;
    let mut claims = Vec::new();
    if args.claims.is_empty() {
        bail!("name the claims to audit, or `all`");
    }
    for name in &args.claims {
        if name == "all" {
            claims.extend(Claim::ALL);
        } else {
            claims.push(name.parse::<Claim>().map_err(anyhow::Error::msg)?);
        }
    }
    claims.sort();
    claims.dedup();
    let results = run_claims(&settings, &claims)?;
    let path = render_report(&results, &settings.canonical_json()?, &args.out)?;
    let mut stdout = std::io::stdout().lock();
    for r in &results {
        let verdict = match r.verdict {
            ClaimVerdict::Holds => "HOLDS",
            ClaimVerdict::Fails => "FAILS",
            ClaimVerdict::NotApplicable => "NOT_APPLICABLE",
        };
        let metric = r.metric.map(|m| format!("{m:e}")).unwrap_or_else(|| "-".into());
        writeln!(
            stdout,
            "{:<22} {:<15} metric {metric} (tolerance {:e})",
            r.id, verdict, r.tolerance
        )?;
    }
    writeln!(stdout, "report: {}", path.display())?;
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let cfg = load(Some(&args.config))?;
    let bc: BoundaryKind = match cfg.str("bc").unwrap_or("periodic") {
        "periodic" => BoundaryKind::Periodic,
        "channel" => BoundaryKind::Channel,
        other => bail!("bc must be periodic or channel, got `{other}`"),
    };
    let n_default = args.grid.unwrap_or(64);
    let nx = args.grid.map_or(cfg.usize_or("nx", n_default), Ok)?;
    let ny = args.grid.map_or(cfg.usize_or("ny", n_default), Ok)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    let lx = cfg.f64_or("lx", two_pi)?;
    let ly = cfg.f64_or("ly", two_pi)?;
    let nu = cfg.f64_req("nu")?;
    let rho = cfg.f64_or("rho", 1.0)?;
    let forcing = match cfg.array::<2>("forcing")? {
        Some(f) => Forcing::Uniform(f),
        None => Forcing::None,
    };
    let initial = cfg.str("initial").unwrap_or("rest").to_string();
    let amplitude = cfg.f64_or("amplitude", 1.0)?;
    let t_end = cfg.f64_req("t_end")?;
    let probes = cfg.points2("probes")?.unwrap_or_default();
    let snapshot_every = cfg.usize_opt("snapshot_every")?;
    let dt_given = cfg.f64("dt")?;
    cfg.finish()?;

    let grid = match bc {
        BoundaryKind::Periodic => GridSpec::new(
            &[nx, ny],
            &[lx / nx as f64, ly / ny as f64],
            &[0.0, 0.0],
            &[Boundary::Periodic; 2],
        )?,
        BoundaryKind::Channel => GridSpec::new(
            &[nx, ny],
            &[lx / nx as f64, ly / (ny - 1) as f64],
            &[0.0, -0.5 * ly],
            &[Boundary::Periodic, Boundary::Clamped],
        )?,
    };
    let state = match (&args.restart, initial.as_str()) {
        (Some(dir), _) => SolverState::load(dir)?,
        (None, "rest") => SolverState::at_rest(&grid),
        (None, "taylor_green") => {
            if bc != BoundaryKind::Periodic || (lx - two_pi).abs() > 1e-12 || (ly - two_pi).abs() > 1e-12 || nx != ny {
                bail!("taylor_green needs a periodic square 2π box");
            }
            SolverState::taylor_green(&TaylorGreenParams::new(nu, amplitude)?, nx, rho)?
        }
        (None, other) => bail!("initial must be rest or taylor_green, got `{other}`"),
    };
    let dt = match dt_given {
        Some(dt) => dt,
        None => {
            let scale = state.velocity.max_norm().max(amplitude.abs());
            SolverConfig::stable_dt(state.velocity.grid(), nu, scale, 0.5)
        }
    };
    let cfg = SolverConfig::new(state.velocity.grid().clone(), nu, rho, dt, forcing, bc)?;
    let out = run(&cfg, state, t_end, &probes, snapshot_every)?;
    std::fs::create_dir_all(&args.out)?;
    let mut series = std::io::BufWriter::new(std::fs::File::create(args.out.join("series.csv"))?);
    write_series_csv(&mut series, &out.series)?;
    series.flush()?;
    for (k, s) in out.snapshots.iter().enumerate() {
        s.save(&args.out.join(format!("snapshot_{k:04}")))?;
    }
    out.final_state.save(&args.out.join("final"))?;
    println!(
        "t = {} after {} samples; final energy {:e}; output in {}",
        out.final_state.t,
        out.series.len(),
        out.series.last().map(|s| s.energy).unwrap_or(0.0),
        args.out.display()
    );
    Ok(())
}

fn tube_extract(args: TubeArgs) -> Result<()> {
    let cfg = load(Some(&args.config))?;
    let rho = cfg.f64_or("rho", 1.0)?;
    let flux = cfg.f64_req("tube_flux")?;
    let seeds = cfg.points2("seeds")?.context("missing required key `seeds`")?;
    let opts = ExtractOptions {
        step: cfg.f64_or("tube_step", 0.01)?,
        slab_time: cfg.f64_or("slab_time", 1.0)?,
        max_stations: cfg.usize_or("max_stations", 10_000)?,
        ..ExtractOptions::default()
    };
    let velocity = match (
        cfg.str("velocity").map(str::to_string),
        cfg.str("flow").map(str::to_string),
    ) {
        (Some(path), None) => {
            let file = std::fs::File::open(&path).with_context(|| format!("opening {path}"))?;
            read_snapshot(std::io::BufReader::new(file))?.0.into_vector()?
        }
        (None, Some(flow)) if flow == "converging" => {
            let sink = ConvergingFlow {
                strength: cfg.f64_or("sink_strength", 1.0)?,
                total_pressure: cfg.f64_or("sink_total_pressure", 0.0)?,
                rho,
            };
            let n = args.grid.map_or(cfg.usize_or("grid", 128), Ok)?;
            let grid = ConvergingFlow::grid(
                n,
                (cfg.f64_or("sink_x0", 0.5)?, cfg.f64_or("sink_x1", 2.0)?),
                cfg.f64_or("sink_half_height", 0.5)?,
            )?;
            sink.velocity(&grid)?
        }
        _ => bail!("give exactly one of `velocity = <snapshot file>` or `flow = converging`"),
    };
    cfg.finish()?;
    let seeds: Vec<[f64; 3]> = seeds.iter().map(|p| [p[0], p[1], 0.0]).collect();
    let tubes = extract_density_structure(&velocity, rho, &seeds, flux, &opts)?;
    std::fs::create_dir_all(&args.out)?;
    for (k, tube) in tubes.iter().enumerate() {
        let mut f = std::io::BufWriter::new(std::fs::File::create(args.out.join(format!("tube_{k:03}.csv")))?);
        write_tube_csv(&mut f, tube)?;
        f.flush()?;
        println!("tube {k}: {} stations, {:?}", tube.stations.len(), tube.termination);
    }
    Ok(())
}

fn eval_eq12(args: EvalArgs) -> Result<()> {
    let mut cfg = load(Some(&args.config))?;
    if let Some(t) = args.threshold_rho_l {
        cfg.set("threshold_rho_l", t);
    }
    if let Some(t) = args.threshold_rho_s {
        cfg.set("threshold_rho_s", t);
    }
    let params = config::solution_params(&cfg)?;
    let thresholds = config::thresholds(&cfg)?;
    let rho_l = cfg.array::<3>("rho_l")?.context("missing required key `rho_l`")?;
    let rho_s = cfg.f64_req("rho_s")?;
    let rho = cfg.f64_or("rho", 1.0)?;
    cfg.finish()?;
    let ds = DensityStructure::new(rho_l, rho_s, rho)?;
    let regime = classify_regime(&ds, &thresholds)?;
    let out = match split_velocity(&params, &ds, &thresholds) {
        Ok((u_l, u_0)) => serde_json::json!({
            "regime": regime.regime,
            "u": [u_l[0] + u_0[0], u_l[1] + u_0[1], u_l[2] + u_0[2]],
            "u_l": u_l,
            "u_0": u_0,
        }),
        Err(e) => serde_json::json!({ "regime": regime.regime, "error": e.to_string() }),
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Audit(a) => audit(a),
        Command::Simulate(a) => simulate(a),
        Command::TubeExtract(a) => tube_extract(a),
        Command::EvalEq12(a) => eval_eq12(a),
    }
}
