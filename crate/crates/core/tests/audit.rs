use flowaudit::analytic::{ConvergingFlow, TaylorGreenParams};
use flowaudit::audit::{
    audit_eq12_consistency, audit_poiseuille, audit_theorem1, audit_vector_line, convergence_verdict, AuditError,
    ChannelSetup, ClaimVerdict, SnapshotSeries, TubeLevel,
};
use flowaudit::density::{extract_density_structure, ExtractOptions};
use flowaudit::fields::{GridSpec, ScalarField, VectorField};
use flowaudit::solution::{SolutionParams, Thresholds};
use flowaudit::solver::{step, BoundaryKind, Forcing, SolverConfig, SolverState};

fn square(n: usize) -> GridSpec {
    GridSpec::clamped_2d(n, n, (-1.0, 1.0), (-1.0, 1.0)).unwrap()
}

fn levels(f: impl Fn([f64; 3]) -> [f64; 3] + Copy) -> Vec<VectorField> {
    [9, 17, 33]
        .iter()
        .map(|&n| VectorField::from_fn(square(n), "m/s", f).unwrap())
        .collect()
}

#[test]
fn theorem1_holds_on_degenerate_inputs() {
    let r = audit_theorem1(&levels(|_| [2.0, -1.0, 0.5]), None, 0.01).unwrap();
    assert_eq!(r.verdict, ClaimVerdict::Holds);
    let r = audit_theorem1(&levels(|p| [p[1], 0.0, 0.0]), None, 0.01).unwrap();
    assert_eq!(r.verdict, ClaimVerdict::Holds);
    assert!(r.max.unwrap() < 1e-12);
}

#[test]
fn theorem1_strain_fails_with_converged_residual() {
    let r = audit_theorem1(&levels(|p| [p[0], -p[1], 0.0]), Some([1.0, 1.0, 0.0]), 0.01).unwrap();
    assert_eq!(r.verdict, ClaimVerdict::Fails);
    for row in &r.table.rows {
        assert!((row[6] - 2.0 * 2f64.sqrt()).abs() < 1e-9);
    }
}

fn tg_series(n: usize, count: usize) -> SnapshotSeries {
    let p = TaylorGreenParams::new(0.1, 1.0).unwrap();
    let mut s = SolverState::taylor_green(&p, n, 1.0).unwrap();
    let cfg = SolverConfig::new(
        s.velocity.grid().clone(),
        0.1,
        1.0,
        0.01,
        Forcing::None,
        BoundaryKind::Periodic,
    )
    .unwrap();
    let mut states = vec![s.velocity.clone()];
    for _ in 1..count {
        s = step(&s, &cfg).unwrap();
        states.push(s.velocity.clone());
    }
    SnapshotSeries { states, dt: 0.01 }
}

#[test]
fn vector_line_needs_three_snapshots() {
    match audit_vector_line(&[tg_series(16, 2)], 0.01) {
        Err(AuditError::InsufficientSnapshots { .. }) => {}
        other => panic!("expected insufficient snapshots, got {other:?}"),
    }
}

#[test]
fn vector_line_uniform_flow_has_zero_sides() {
    let grid = GridSpec::periodic_2d(16, 1.0).unwrap();
    let u = VectorField::from_fn(grid, "m/s", |_| [1.0, 0.5, 0.0]).unwrap();
    let series = SnapshotSeries {
        states: vec![u.clone(); 3],
        dt: 0.1,
    };
    let r = audit_vector_line(&[series], 0.01).unwrap();
    assert!(r.max.unwrap() < 1e-12, "{:?}", r.max);
}

#[test]
fn vector_line_on_taylor_green_reports_orders() {
    let r = audit_vector_line(&[tg_series(16, 5), tg_series(32, 5), tg_series(64, 5)], 0.01).unwrap();
    assert!(r.order.is_some());
    assert_eq!(r.levels.len(), 3);
    assert_ne!(r.verdict, ClaimVerdict::Holds);
}

#[test]
fn poiseuille_reports_non_convergence() {
    let setup = ChannelSetup {
        g: 1.0,
        nu: 1.0,
        rho: 1.0,
        half_width: 0.5,
        nx: 8,
        ny: 17,
        max_steps: 50,
        tolerance: 0.01,
    };
    assert!(audit_poiseuille(&setup).is_err());
}

#[test]
fn poiseuille_surfaces_pipe_factor() {
    let setup = ChannelSetup {
        g: 2.0,
        nu: 0.5,
        rho: 1.0,
        half_width: 0.5,
        nx: 8,
        ny: 17,
        max_steps: 1_000_000,
        tolerance: 0.01,
    };
    let r = audit_poiseuille(&setup).unwrap();
    assert_eq!(r.verdict, ClaimVerdict::Holds);
    assert!(r.notes.iter().any(|n| n.contains("twice")), "{:?}", r.notes);
}

#[test]
fn stop_threshold_semantics() {
    // ν = 10 with t₀ = 1 leaves exp(−40) of the energy
    let tiny = (-40.0f64).exp();
    assert_eq!(convergence_verdict(&[tiny, tiny], 1e-6).0, ClaimVerdict::Holds);
    let ratio = (-0.4f64).exp();
    assert_eq!(convergence_verdict(&[ratio, ratio], 1e-6).0, ClaimVerdict::Fails);
    assert_eq!(convergence_verdict(&[ratio], 1e-6).0, ClaimVerdict::NotApplicable);
}

fn eq12_params() -> SolutionParams {
    SolutionParams {
        omega0: 1.0,
        p_l: 1.0,
        theta1: [1.0, 0.0, 0.0],
        theta2: [0.5, 0.0, 0.0],
        vartheta: 0.0,
        mu_rot: [0.0; 3],
        theta3: [0.0; 3],
        segment_length: None,
    }
}

fn level_for(v: VectorField, p: ScalarField, seeds: &[[f64; 3]]) -> TubeLevel {
    let opts = ExtractOptions {
        step: 0.02,
        ..ExtractOptions::default()
    };
    let tubes = extract_density_structure(&v, 1.0, seeds, 1e-3, &opts).unwrap();
    TubeLevel { tubes, pressure: p }
}

#[test]
fn eq12_uniform_flow_is_reproduced() {
    let grid = square(33);
    let v = VectorField::from_fn(grid.clone(), "m/s", |_| [-0.7, 0.0, 0.0]).unwrap();
    let p = ScalarField::from_fn(grid, "Pa", |_| 3.0).unwrap();
    let level = level_for(v, p, &[[0.9, 0.0, 0.0], [0.9, 0.5, 0.0]]);
    let r = audit_eq12_consistency(&[level], &eq12_params(), &Thresholds::default(), 0.01).unwrap();
    assert_eq!(r[0].verdict, ClaimVerdict::Holds);
    assert!(r[0].max.unwrap() < 1e-10);
}

#[test]
fn eq12_converging_flow_chain_holds() {
    let flow = ConvergingFlow {
        strength: 1.0,
        total_pressure: 10.0,
        rho: 1.0,
    };
    let mk = |n| {
        let grid = ConvergingFlow::grid(n, (0.5, 2.0), 0.5).unwrap();
        level_for(
            flow.velocity(&grid).unwrap(),
            flow.pressure(&grid).unwrap(),
            &[[1.9, 0.1, 0.0], [1.9, -0.2, 0.0]],
        )
    };
    let r = audit_eq12_consistency(&[mk(64), mk(128)], &eq12_params(), &Thresholds::default(), 0.01).unwrap();
    assert_eq!(r[1].id, "eq12_bernoulli_chain");
    assert_eq!(r[1].verdict, ClaimVerdict::Holds);
}

#[test]
fn eq12_counts_skipped_singular_stations() {
    let flow = ConvergingFlow {
        strength: 1.0,
        total_pressure: 10.0,
        rho: 1.0,
    };
    let grid = ConvergingFlow::grid(64, (0.5, 2.0), 0.5).unwrap();
    let level = level_for(
        flow.velocity(&grid).unwrap(),
        flow.pressure(&grid).unwrap(),
        &[[1.9, 0.0, 0.0]],
    );
    let mut rl: Vec<f64> = level.tubes[0]
        .stations
        .iter()
        .map(|s| s.structure.rho_l_magnitude())
        .collect();
    rl.sort_by(f64::total_cmp);
    // the faster half of the tube falls below the linear-density cut-off
    let th = Thresholds {
        rho_l: rl[rl.len() / 2],
        rho_s: 1e-9,
    };
    let r = audit_eq12_consistency(std::slice::from_ref(&level), &eq12_params(), &th, 0.01).unwrap();
    assert!(r[0].notes.iter().any(|n| n.contains("skipped")), "{:?}", r[0].notes);

    let th = Thresholds {
        rho_l: 1e3,
        rho_s: 1e-9,
    };
    assert!(audit_eq12_consistency(&[level], &eq12_params(), &th, 0.01).is_err());
}
