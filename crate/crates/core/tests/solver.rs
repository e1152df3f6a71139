use flowaudit::analytic::{channel_speed, TaylorGreenParams};
use flowaudit::fields::GridSpec;
use flowaudit::solver::{
    kinetic_energy, max_divergence, run, run_to_steady, steady_residual, step, step_with_stats, BoundaryKind, Forcing,
    SolverConfig, SolverState,
};

fn tg_ratio(n: usize, dt: f64) -> f64 {
    let p = TaylorGreenParams::new(0.1, 1.0).unwrap();
    let s0 = SolverState::taylor_green(&p, n, 1.0).unwrap();
    let cfg = SolverConfig::new(
        s0.velocity.grid().clone(),
        0.1,
        1.0,
        dt,
        Forcing::None,
        BoundaryKind::Periodic,
    )
    .unwrap();
    let e0 = kinetic_energy(&s0, 1.0);
    let out = run(&cfg, s0, 1.0, &[], None).unwrap();
    kinetic_energy(&out.final_state, 1.0) / e0
}

#[test]
fn taylor_green_decay_64() {
    let r = tg_ratio(64, 0.01);
    let exact = (-0.4f64).exp();
    assert!((r / exact - 1.0).abs() < 0.02, "ratio {r} vs {exact}");
}

#[test]
fn channel_reaches_parabolic_steady_state() {
    let (g, nu, r) = (1.0, 1.0, 0.5);
    let grid = GridSpec::new(
        &[8, 33],
        &[1.0 / 8.0, 2.0 * r / 32.0],
        &[0.0, -r],
        &[
            flowaudit::fields::Boundary::Periodic,
            flowaudit::fields::Boundary::Clamped,
        ],
    )
    .unwrap();
    let dt = SolverConfig::stable_dt(&grid, nu, 0.2, 0.8);
    let cfg = SolverConfig::new(
        grid.clone(),
        nu,
        1.0,
        dt,
        Forcing::Uniform([g, 0.0]),
        BoundaryKind::Channel,
    )
    .unwrap();
    let (state, _) = run_to_steady(&cfg, SolverState::at_rest(&grid), 100, 1e-8, 200_000).unwrap();
    let center = state.velocity.values()[16 * 8][0];
    let exact = channel_speed(g, nu, r, 0.0);
    assert!((center / exact - 1.0).abs() < 1e-6, "{center} vs {exact}");
    assert!(steady_residual(&state, &cfg) < 1e-6);
    for i in 0..8 {
        for j in 0..16 {
            let (a, b) = (
                state.velocity.values()[j * 8 + i][0],
                state.velocity.values()[(32 - j) * 8 + i][0],
            );
            assert!((a - b).abs() <= 1e-9 * exact, "row {j}: {a} vs {b}");
        }
    }
}

#[test]
fn restart_reproduces_continuation() {
    let p = TaylorGreenParams::new(0.05, 1.0).unwrap();
    let s0 = SolverState::taylor_green(&p, 16, 1.0).unwrap();
    let cfg = SolverConfig::new(
        s0.velocity.grid().clone(),
        0.05,
        1.0,
        0.02,
        Forcing::None,
        BoundaryKind::Periodic,
    )
    .unwrap();
    let mid = step(&step(&s0, &cfg).unwrap(), &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    mid.save(dir.path()).unwrap();
    let reloaded = SolverState::load(dir.path()).unwrap();
    let a = run(&cfg, mid, 0.2, &[[1.0, 2.0]], None).unwrap();
    let b = run(&cfg, reloaded, 0.2, &[[1.0, 2.0]], None).unwrap();
    assert_eq!(a.series, b.series);
    assert_eq!(a.final_state, b.final_state);
}

/// Amplitude decay rate of one velocity component between two states.
fn component_rate(a: &SolverState, b: &SolverState, c: usize) -> f64 {
    let rms = |s: &SolverState| s.velocity.component(c).rms();
    (rms(a) / rms(b)).ln() / (b.t - a.t)
}

#[test]
fn taylor_green_component_decay_rates() {
    let nu = 0.1;
    for (n, dt, tol) in [(64, 0.01, 0.02), (128, 0.005, 0.005)] {
        let p = TaylorGreenParams::new(nu, 1.0).unwrap();
        let s0 = SolverState::taylor_green(&p, n, 1.0).unwrap();
        let cfg = SolverConfig::new(
            s0.velocity.grid().clone(),
            nu,
            1.0,
            dt,
            Forcing::None,
            BoundaryKind::Periodic,
        )
        .unwrap();
        let out = run(&cfg, s0.clone(), 1.0, &[], None).unwrap();
        for c in 0..2 {
            let rate = component_rate(&s0, &out.final_state, c);
            assert!((rate / (2.0 * nu) - 1.0).abs() < tol, "{n}²: component {c} rate {rate}");
        }
    }
}

#[test]
fn unforced_energy_never_grows_and_divergence_stays_bounded() {
    let p = TaylorGreenParams::new(0.02, 1.0).unwrap();
    let mut s = SolverState::taylor_green(&p, 32, 1.0).unwrap();
    let cfg = SolverConfig::new(
        s.velocity.grid().clone(),
        0.02,
        1.0,
        0.02,
        Forcing::None,
        BoundaryKind::Periodic,
    )
    .unwrap();
    let mut e = kinetic_energy(&s, 1.0);
    for _ in 0..200 {
        let (next, stats) = step_with_stats(&s, &cfg, cfg.dt).unwrap();
        let bound = cfg.divergence_tol * next.velocity.max_norm() / cfg.grid.min_spacing();
        assert!(stats.divergence <= bound);
        assert!(max_divergence(&next, &cfg) <= bound);
        let e1 = kinetic_energy(&next, 1.0);
        assert!(e1 <= e + 1e-12, "energy grew from {e} to {e1}");
        e = e1;
        s = next;
    }
}
