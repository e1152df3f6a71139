//! Parametric velocity formula and the Bernoulli density chain along
//! extracted streamtubes.

use nalgebra::{DMatrix, DVector};

use super::{AuditError, ClaimResult, LevelResidual, Table};
use crate::density::ExtractedTube;
use crate::fields::ScalarField;
use crate::solution::{
    bernoulli_chain_audit, classify_regime, ChainQuantity, ChainState, ChainVerdict, Regime, SolutionParams, Thresholds,
};

/// Tubes extracted from one grid, with the pressure on that grid.
#[derive(Debug, Clone)]
pub struct TubeLevel {
    pub tubes: Vec<ExtractedTube>,
    pub pressure: ScalarField,
}

/// Relative tolerance below which neighbouring chain values count as equal.
const CHAIN_FLAT: f64 = 1e-9;

struct Fit {
    coef: [f64; 3],
    errors: Vec<(usize, usize, f64, f64, f64)>,
    skipped: usize,
}

/// Fits `|u| ≈ a/|ρ_L| + b/ρ_S + c` over all laminar stations.
fn fit_level(level: &TubeLevel, thresholds: &Thresholds) -> Result<Fit, AuditError> {
    let mut rows = Vec::new();
    let mut skipped = 0;
    for (t, tube) in level.tubes.iter().enumerate() {
        for (s, st) in tube.stations.iter().enumerate() {
            let verdict = classify_regime(&st.structure, thresholds)?;
            if verdict.regime != Regime::Laminar {
                skipped += 1;
                continue;
            }
            rows.push((
                t,
                s,
                1.0 / st.structure.rho_l_magnitude(),
                1.0 / st.structure.rho_s,
                st.speed,
            ));
        }
    }
    if rows.is_empty() {
        return Err(AuditError::Input("no laminar stations to fit".into()));
    }
    let a = DMatrix::from_fn(rows.len(), 3, |i, j| match j {
        0 => rows[i].2,
        1 => rows[i].3,
        _ => 1.0,
    });
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.4));
    let svd = a.clone().svd(true, true);
    let eps = 1e-12 * svd.singular_values.max();
    let coef = svd
        .solve(&b, eps)
        .map_err(|e| AuditError::Input(format!("least-squares fit failed: {e}")))?;
    let pred = &a * &coef;
    let errors = rows
        .iter()
        .zip(pred.iter())
        .map(|(r, p)| (r.0, r.1, r.4, *p, (p - r.4).abs() / r.4.abs().max(f64::MIN_POSITIVE)))
        .collect();
    Ok(Fit {
        coef: [coef[0], coef[1], coef[2]],
        errors,
        skipped,
    })
}

fn chain_states(tube: &ExtractedTube, pressure: &ScalarField) -> Result<Vec<ChainState>, AuditError> {
    tube.stations
        .iter()
        .map(|s| {
            Ok(ChainState {
                speed: s.speed,
                rho_s: s.structure.rho_s,
                rho_l: s.structure.rho_l_magnitude(),
                pressure: pressure.sample(s.position)?,
            })
        })
        .collect()
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    sorted[((sorted.len() - 1) as f64 * q).round() as usize]
}

/// Two sub-claims on the same tubes, from successively finer grids:
///
/// * `eq12_prediction`: the formula with globally fitted coefficients
///   back-predicts the station speeds (metric: max relative error).
/// * `eq12_bernoulli_chain`: along every tube `ρ_S` rises with `|u|` while
///   `|ρ_L|` and `P` fall (metric: fraction of tubes violating it).
///
/// Stations classified as singular are skipped and counted.
pub fn audit_eq12_consistency(
    levels: &[TubeLevel],
    p: &SolutionParams,
    thresholds: &Thresholds,
    tolerance: f64,
) -> Result<Vec<ClaimResult>, AuditError> {
    if levels.is_empty() || levels.iter().any(|l| l.tubes.is_empty()) {
        return Err(AuditError::Input("every level needs at least one tube".into()));
    }
    p.validate()?;
    let mut pred = ClaimResult::new(
        "eq12_prediction",
        "|u| = |(1/ω₀)[P_L(θ₁/|ρ_L| − θ₂/ρ_S) − ϑμ_rot] − θ₃| with global coefficients",
        tolerance,
    );
    let mut chain = ClaimResult::new(
        "eq12_bernoulli_chain",
        "u→max ∪ ρ_S→max ∪ |ρ_L|→min ∪ P→min along a tube",
        0.0,
    );
    let mut pred_table = Table::new(&["level", "tube", "station", "speed", "predicted", "relative_error"]);
    let mut chain_table = Table::new(&["level", "tube", "stations", "pass", "pair", "quantity"]);
    let mut pred_levels = Vec::new();
    let mut chain_levels = Vec::new();
    for (k, level) in levels.iter().enumerate() {
        let grid = level.pressure.grid();
        let fit = fit_level(level, thresholds)?;
        let mut errs: Vec<f64> = fit.errors.iter().map(|e| e.4).collect();
        for e in &fit.errors {
            pred_table.push(vec![k as f64, e.0 as f64, e.1 as f64, e.2, e.3, e.4]);
        }
        errs.sort_by(f64::total_cmp);
        let max = errs.last().copied().unwrap_or(0.0);
        let l2 = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
        pred_levels.push(LevelResidual {
            dims: grid.dims().to_vec(),
            h: grid.min_spacing(),
            max,
            l2,
            metric: max,
        });
        let mut failing = 0usize;
        for (t, tube) in level.tubes.iter().enumerate() {
            let states = chain_states(tube, &level.pressure)?;
            let (pass, pair, q) = if states.len() < 2 {
                (f64::NAN, f64::NAN, f64::NAN)
            } else {
                match bernoulli_chain_audit(&states, CHAIN_FLAT)? {
                    ChainVerdict::Pass => (1.0, f64::NAN, f64::NAN),
                    ChainVerdict::Fail { pair, quantity } => {
                        failing += 1;
                        let code = match quantity {
                            ChainQuantity::SurfaceDensity => 0.0,
                            ChainQuantity::LinearDensity => 1.0,
                            ChainQuantity::Pressure => 2.0,
                        };
                        (0.0, pair as f64, code)
                    }
                }
            };
            chain_table.push(vec![k as f64, t as f64, states.len() as f64, pass, pair, q]);
        }
        let fraction = failing as f64 / level.tubes.len() as f64;
        chain_levels.push(LevelResidual {
            dims: grid.dims().to_vec(),
            h: grid.min_spacing(),
            max: fraction,
            l2: fraction,
            metric: fraction,
        });
        if k + 1 == levels.len() {
            let [a, b, c] = fit.coef;
            pred.note(format!(
                "fitted |u| = {a:e}/|ρ_L| + {b:e}/ρ_S + {c:e} over {} stations, {} singular stations skipped",
                errs.len(),
                fit.skipped
            ));
            pred.note(format!(
                "relative error quantiles: median {:e}, 90% {:e}, max {max:e}",
                quantile(&errs, 0.5),
                quantile(&errs, 0.9)
            ));
            if p.p_l != 0.0 {
                pred.note(format!(
                    "implied |θ₁| = a ω₀/P_L = {:e}; implied |θ₂| = −b ω₀/P_L = {:e} (the formula fixes |θ₂| = 1/2)",
                    a * p.omega0 / p.p_l,
                    -b * p.omega0 / p.p_l
                ));
            }
            pred.note("with station densities |ρ_L| = ρQ/|u| and ρ_S = ρ|u|τ on equal-flux tubes, 1/|ρ_L| is proportional to |u|; the fit is informative through the coefficients, not the residual alone");
            chain.note(format!(
                "{failing} of {} tubes violate the chain (quantity codes: 0 = ρ_S, 1 = |ρ_L|, 2 = P)",
                level.tubes.len()
            ));
        }
    }
    let stations: usize = levels
        .last()
        .map(|l| l.tubes.iter().map(|t| t.stations.len()).sum())
        .unwrap_or(0);
    for r in [&mut pred, &mut chain] {
        r.input("levels", levels.len());
        r.input("tubes", levels[0].tubes.len());
        r.input("stations_finest", stations);
        r.input("omega0", p.omega0);
        r.input("p_l", p.p_l);
    }
    pred.table = pred_table;
    chain.table = chain_table;
    pred.conclude(pred_levels);
    chain.conclude(chain_levels);
    Ok(vec![pred, chain])
}
