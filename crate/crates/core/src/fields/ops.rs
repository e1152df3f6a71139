use serde::{Deserialize, Serialize};

use super::{Boundary, FieldError, GridSpec, ScalarField, VectorField};

/// First derivative along `axis`: central in the interior, wrapped at
/// periodic ends, one-sided second order at clamped ends.
pub(crate) fn diff1(grid: &GridSpec, values: &[f64], axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    if axis >= grid.ndim() {
        return out;
    }
    let n = grid.dim(axis);
    let h = grid.h(axis);
    let stride = axis_stride(grid, axis);
    let inv2h = 0.5 / h;
    let periodic = grid.boundary_of(axis) == Boundary::Periodic;
    for (idx, o) in out.iter_mut().enumerate() {
        let c = grid.coords(idx)[axis];
        let base = idx - c * stride;
        let at = |m: usize| values[base + m * stride];
        *o = if c > 0 && c + 1 < n {
            (at(c + 1) - at(c - 1)) * inv2h
        } else if periodic {
            let next = (c + 1) % n;
            let prev = (c + n - 1) % n;
            (at(next) - at(prev)) * inv2h
        } else if c == 0 {
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) * inv2h
        } else {
            (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) * inv2h
        };
    }
    out
}

/// Second derivative along `axis`: three-point in the interior, four-point
/// one-sided second order at clamped ends.
pub(crate) fn diff2(grid: &GridSpec, values: &[f64], axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    if axis >= grid.ndim() {
        return out;
    }
    let n = grid.dim(axis);
    let h = grid.h(axis);
    let stride = axis_stride(grid, axis);
    let inv_h2 = 1.0 / (h * h);
    let periodic = grid.boundary_of(axis) == Boundary::Periodic;
    for (idx, o) in out.iter_mut().enumerate() {
        let c = grid.coords(idx)[axis];
        let base = idx - c * stride;
        let at = |m: usize| values[base + m * stride];
        *o = if c > 0 && c + 1 < n {
            (at(c + 1) - 2.0 * at(c) + at(c - 1)) * inv_h2
        } else if periodic {
            let next = (c + 1) % n;
            let prev = (c + n - 1) % n;
            (at(next) - 2.0 * at(c) + at(prev)) * inv_h2
        } else if c == 0 {
            (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) * inv_h2
        } else {
            (2.0 * at(n - 1) - 5.0 * at(n - 2) + 4.0 * at(n - 3) - at(n - 4)) * inv_h2
        };
    }
    out
}

fn axis_stride(grid: &GridSpec, axis: usize) -> usize {
    match axis {
        0 => 1,
        1 => grid.dim(0),
        _ => grid.dim(0) * grid.dim(1),
    }
}

fn component(v: &VectorField, c: usize) -> Vec<f64> {
    v.values().iter().map(|x| x[c]).collect()
}

fn finite_scalar(s: &ScalarField) -> Result<(), FieldError> {
    super::check_finite(s.grid(), s.values().iter(), 1)
}

fn finite_vector(v: &VectorField) -> Result<(), FieldError> {
    super::check_finite(v.grid(), v.values().iter().flatten(), 3)
}

pub fn gradient(s: &ScalarField) -> Result<VectorField, FieldError> {
    finite_scalar(s)?;
    let g = s.grid();
    let d: Vec<Vec<f64>> = (0..3).map(|a| diff1(g, s.values(), a)).collect();
    let values = (0..g.node_count()).map(|n| [d[0][n], d[1][n], d[2][n]]).collect();
    Ok(VectorField::from_raw(g.clone(), values, format!("{}/m", s.unit())))
}

pub fn divergence(v: &VectorField) -> Result<ScalarField, FieldError> {
    finite_vector(v)?;
    let g = v.grid();
    let mut out = vec![0.0; g.node_count()];
    for a in 0..g.ndim() {
        let d = diff1(g, &component(v, a), a);
        out.iter_mut().zip(d).for_each(|(o, x)| *o += x);
    }
    Ok(ScalarField::from_raw(g.clone(), out, format!("{}/m", v.unit())))
}

pub fn curl(v: &VectorField) -> Result<VectorField, FieldError> {
    finite_vector(v)?;
    let g = v.grid();
    let (u, w, z) = (component(v, 0), component(v, 1), component(v, 2));
    let dz_dy = diff1(g, &z, 1);
    let dw_dz = diff1(g, &w, 2);
    let du_dz = diff1(g, &u, 2);
    let dz_dx = diff1(g, &z, 0);
    let dw_dx = diff1(g, &w, 0);
    let du_dy = diff1(g, &u, 1);
    let values = (0..g.node_count())
        .map(|n| [dz_dy[n] - dw_dz[n], du_dz[n] - dz_dx[n], dw_dx[n] - du_dy[n]])
        .collect();
    Ok(VectorField::from_raw(g.clone(), values, format!("{}/m", v.unit())))
}

pub fn vector_laplacian(v: &VectorField) -> Result<VectorField, FieldError> {
    finite_vector(v)?;
    let g = v.grid();
    let mut values = vec![[0.0; 3]; g.node_count()];
    for c in 0..3 {
        let comp = component(v, c);
        for a in 0..g.ndim() {
            let d = diff2(g, &comp, a);
            values.iter_mut().zip(d).for_each(|(o, x)| o[c] += x);
        }
    }
    Ok(VectorField::from_raw(g.clone(), values, format!("{}/m2", v.unit())))
}

/// Residual statistics of a pointwise vector discrepancy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualStats {
    /// Largest pointwise residual norm.
    pub max: f64,
    /// Root-mean-square residual norm over nodes.
    pub l2: f64,
    /// Node index of the largest residual.
    pub argmax: usize,
    #[serde(skip)]
    pub field: Option<ScalarField>,
}

impl ResidualStats {
    pub fn from_difference(a: &VectorField, b: &VectorField) -> Result<Self, FieldError> {
        let diff = a.linear_combination(1.0, b, -1.0)?;
        Ok(Self::from_magnitude(diff.magnitude()))
    }

    pub fn from_magnitude(mag: ScalarField) -> Self {
        let (argmax, max) = mag
            .values()
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(im, m), (i, v)| if *v > m { (i, *v) } else { (im, m) });
        Self {
            max,
            l2: mag.rms(),
            argmax,
            field: Some(mag),
        }
    }
}

/// Residual of `Δv − (∇(∇·v) − ∇×∇×v)`.
pub fn check_laplacian_identity(v: &VectorField) -> Result<ResidualStats, FieldError> {
    let lap = vector_laplacian(v)?;
    let grad_div = gradient(&divergence(v)?)?;
    let curl_curl = curl(&curl(v)?)?;
    let rhs = grad_div.linear_combination(1.0, &curl_curl, -1.0)?;
    let mut stats = ResidualStats::from_difference(&lap, &rhs)?;
    if let Some(f) = stats.field.as_mut() {
        f.unit = lap.unit().to_string();
    }
    Ok(stats)
}

/// Observed orders `log(e_i / e_{i+1}) / log(ratio)` for successive refinements.
pub fn convergence_orders(errors: &[f64], ratio: f64) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).ln() / ratio.ln()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit_square(n: usize) -> GridSpec {
        GridSpec::clamped_2d(n, n, (0.0, 1.0), (0.0, 1.0)).unwrap()
    }

    fn max_abs_diff(a: &[f64], b: impl Fn(usize) -> f64) -> f64 {
        a.iter().enumerate().fold(0.0, |m, (i, v)| m.max((v - b(i)).abs()))
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let s = ScalarField::from_fn(unit_square(8), "Pa", |_| 3.5).unwrap();
        assert!(gradient(&s).unwrap().max_norm() < 1e-12);
    }

    #[test]
    fn gradient_of_linear_field_is_exact() {
        let s = ScalarField::from_fn(unit_square(16), "m", |p| p[0]).unwrap();
        let g = gradient(&s).unwrap();
        for v in g.values() {
            assert!((v[0] - 1.0).abs() < 1e-12 && v[1].abs() < 1e-12 && v[2] == 0.0);
        }
    }

    #[test]
    fn gradient_of_sine_is_second_order() {
        let g = GridSpec::periodic_2d(64, 2.0 * PI).unwrap();
        let s = ScalarField::from_fn(g.clone(), "1", |p| p[0].sin()).unwrap();
        let grad = gradient(&s).unwrap();
        let h = 2.0 * PI / 64.0;
        let err = (0..g.node_count()).fold(0.0f64, |m, n| {
            let p = g.position(n);
            let v = grad.values()[n];
            m.max((v[0] - p[0].cos()).abs()).max(v[1].abs())
        });
        assert!(err < h * h, "err {err}");
    }

    #[test]
    fn divergence_of_linear_fields() {
        let g = unit_square(16);
        let a = VectorField::from_fn(g.clone(), "m/s", |p| [p[0], -p[1], 0.0]).unwrap();
        assert!(divergence(&a).unwrap().max_abs() < 1e-12);
        let b = VectorField::from_fn(g, "m/s", |p| [p[0], p[1], 0.0]).unwrap();
        let d = divergence(&b).unwrap();
        assert!(max_abs_diff(d.values(), |_| 2.0) < 1e-12);
    }

    #[test]
    fn curl_hand_examples() {
        let g = unit_square(8);
        let a = VectorField::from_fn(g.clone(), "m/s", |p| [p[1], 0.0, 0.0]).unwrap();
        for v in curl(&a).unwrap().values() {
            assert!(v[0].abs() < 1e-12 && v[1].abs() < 1e-12 && (v[2] + 1.0).abs() < 1e-12);
        }
        let b = VectorField::from_fn(g, "m/s", |p| [0.0, 0.0, -2.0 * p[1]]).unwrap();
        for v in curl(&b).unwrap().values() {
            assert!((v[0] + 2.0).abs() < 1e-12 && v[1].abs() < 1e-12 && v[2].abs() < 1e-12);
        }
    }

    #[test]
    fn curl_in_three_dimensions() {
        let g = GridSpec::new(&[6, 6, 6], &[0.2; 3], &[0.0; 3], &[Boundary::Clamped; 3]).unwrap();
        // v = (z, x, y) has curl (1, 1, 1)
        let v = VectorField::from_fn(g, "m/s", |p| [p[2], p[0], p[1]]).unwrap();
        for c in curl(&v).unwrap().values() {
            for x in c {
                assert!((x - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn laplacian_examples() {
        let g = unit_square(12);
        let lin = VectorField::from_fn(g.clone(), "m/s", |p| [p[0] - 2.0 * p[1], 3.0 * p[1], 1.0]).unwrap();
        assert!(vector_laplacian(&lin).unwrap().max_norm() < 1e-10);
        let quad = VectorField::from_fn(g, "m/s", |p| [p[1] * p[1], 0.0, 0.0]).unwrap();
        for v in vector_laplacian(&quad).unwrap().values() {
            assert!((v[0] - 2.0).abs() < 1e-10 && v[1].abs() < 1e-10);
        }
    }

    #[test]
    fn laplacian_of_sine_product_is_eigenfunction() {
        let n = 32;
        let g = GridSpec::periodic_2d(n, 2.0 * PI).unwrap();
        let f = |p: [f64; 3]| p[0].sin() * p[1].sin();
        let v = VectorField::from_fn(g.clone(), "m/s", |p| [f(p), 2.0 * f(p), 0.0]).unwrap();
        let lap = vector_laplacian(&v).unwrap();
        let h = 2.0 * PI / n as f64;
        let mut worst = 0.0f64;
        for (n, l) in lap.values().iter().enumerate() {
            let want = v.values()[n];
            for c in 0..2 {
                worst = worst.max((l[c] + 2.0 * want[c]).abs());
            }
        }
        // leading error is h²/12 per axis times the fourth derivative
        assert!(worst / 2.0 < h * h / 6.0 + 1e-12, "worst {worst}");
    }

    #[test]
    fn laplacian_identity_on_quadratic_shear() {
        let g = unit_square(10);
        let v = VectorField::from_fn(g, "m/s", |p| [p[1] * p[1], 0.0, 0.0]).unwrap();
        assert!(check_laplacian_identity(&v).unwrap().max < 1e-9);
        let cc = curl(&curl(&v).unwrap()).unwrap();
        for c in cc.values() {
            assert!((c[0] + 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn laplacian_identity_on_linear_field() {
        let v = VectorField::from_fn(unit_square(8), "m/s", |p| [2.0 * p[0] + p[1], -p[0], 0.5]).unwrap();
        assert!(check_laplacian_identity(&v).unwrap().max < 1e-12);
    }

    #[test]
    fn operators_reject_non_finite_input() {
        let g = unit_square(6);
        let mut v = VectorField::zeros(g, "m/s");
        v.values[7][1] = f64::INFINITY;
        assert!(matches!(divergence(&v), Err(FieldError::NonFinite { index: 7, .. })));
        assert!(matches!(curl(&v), Err(FieldError::NonFinite { index: 7, .. })));
    }

    #[test]
    fn orders_from_error_sequence() {
        let o = convergence_orders(&[1.0, 0.25, 0.0625], 2.0);
        assert!((o[0] - 2.0).abs() < 1e-14 && (o[1] - 2.0).abs() < 1e-14);
    }
}
