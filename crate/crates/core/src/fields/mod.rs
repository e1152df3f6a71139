//! Sampled scalar and vector fields on uniform grids, with second-order
//! finite-difference operators and a plain-text snapshot format.

mod grid;
mod io;
mod ops;

pub use grid::{Boundary, GridSpec, MIN_NODES};
pub use io::{read_snapshot, write_snapshot, Snapshot};
pub use ops::{
    check_laplacian_identity, convergence_orders, curl, divergence, gradient, vector_laplacian, ResidualStats,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("non-finite value {value} at node {index} (position {position:?})")]
    NonFinite {
        index: usize,
        position: [f64; 3],
        value: f64,
    },
    #[error("grids differ")]
    GridMismatch,
    #[error("point {0:?} lies outside the grid")]
    OutOfDomain([f64; 3]),
    #[error("snapshot format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
    unit: String,
}

/// One 3-vector per grid node. On 2D grids the third component is carried
/// along but never differentiated (it is constant in z).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    values: Vec<[f64; 3]>,
    unit: String,
}

fn check_finite<'a>(grid: &GridSpec, values: impl Iterator<Item = &'a f64>, stride: usize) -> Result<(), FieldError> {
    for (n, v) in values.enumerate() {
        if !v.is_finite() {
            let index = n / stride;
            return Err(FieldError::NonFinite {
                index,
                position: grid.position(index),
                value: *v,
            });
        }
    }
    Ok(())
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>, unit: impl Into<String>) -> Result<Self, FieldError> {
        if values.len() != grid.node_count() {
            return Err(FieldError::Length {
                expected: grid.node_count(),
                got: values.len(),
            });
        }
        check_finite(&grid, values.iter(), 1)?;
        Ok(Self {
            grid,
            values,
            unit: unit.into(),
        })
    }

    pub fn zeros(grid: GridSpec, unit: impl Into<String>) -> Self {
        let n = grid.node_count();
        Self {
            grid,
            values: vec![0.0; n],
            unit: unit.into(),
        }
    }

    /// Samples `f(position)` at every node.
    pub fn from_fn(grid: GridSpec, unit: impl Into<String>, f: impl Fn([f64; 3]) -> f64) -> Result<Self, FieldError> {
        let values = (0..grid.node_count()).map(|n| f(grid.position(n))).collect();
        Self::new(grid, values, unit)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>, unit: impl Into<String>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        Self {
            grid,
            values,
            unit: unit.into(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Root mean square over nodes.
    pub fn rms(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn linear_combination(&self, a: f64, other: &ScalarField, b: f64) -> Result<Self, FieldError> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self::from_raw(self.grid.clone(), values, self.unit.clone()))
    }

    /// Multilinear interpolation.
    pub fn sample(&self, p: [f64; 3]) -> Result<f64, FieldError> {
        let stencil = interp_stencil(&self.grid, p)?;
        Ok(stencil.iter().map(|(idx, w)| w * self.values[*idx]).sum())
    }
}

impl VectorField {
    pub fn new(grid: GridSpec, values: Vec<[f64; 3]>, unit: impl Into<String>) -> Result<Self, FieldError> {
        if values.len() != grid.node_count() {
            return Err(FieldError::Length {
                expected: grid.node_count(),
                got: values.len(),
            });
        }
        check_finite(&grid, values.iter().flatten(), 3)?;
        Ok(Self {
            grid,
            values,
            unit: unit.into(),
        })
    }

    pub fn zeros(grid: GridSpec, unit: impl Into<String>) -> Self {
        let n = grid.node_count();
        Self {
            grid,
            values: vec![[0.0; 3]; n],
            unit: unit.into(),
        }
    }

    pub fn from_fn(
        grid: GridSpec,
        unit: impl Into<String>,
        f: impl Fn([f64; 3]) -> [f64; 3],
    ) -> Result<Self, FieldError> {
        let values = (0..grid.node_count()).map(|n| f(grid.position(n))).collect();
        Self::new(grid, values, unit)
    }

    pub(crate) fn from_raw(grid: GridSpec, values: Vec<[f64; 3]>, unit: impl Into<String>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        Self {
            grid,
            values,
            unit: unit.into(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[[f64; 3]] {
        &self.values
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn into_values(self) -> Vec<[f64; 3]> {
        self.values
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField::from_raw(
            self.grid.clone(),
            self.values.iter().map(|v| v[c]).collect(),
            self.unit.clone(),
        )
    }

    pub fn from_components(components: [&ScalarField; 3], unit: impl Into<String>) -> Result<Self, FieldError> {
        let grid = components[0].grid.clone();
        if components.iter().any(|c| c.grid != grid) {
            return Err(FieldError::GridMismatch);
        }
        let values = (0..grid.node_count())
            .map(|n| {
                [
                    components[0].values[n],
                    components[1].values[n],
                    components[2].values[n],
                ]
            })
            .collect();
        Ok(Self::from_raw(grid, values, unit))
    }

    /// Pointwise Euclidean norm.
    pub fn magnitude(&self) -> ScalarField {
        ScalarField::from_raw(
            self.grid.clone(),
            self.values.iter().map(|v| norm3(*v)).collect(),
            self.unit.clone(),
        )
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(norm3(*v)))
    }

    pub fn linear_combination(&self, a: f64, other: &VectorField, b: f64) -> Result<Self, FieldError> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| [a * x[0] + b * y[0], a * x[1] + b * y[1], a * x[2] + b * y[2]])
            .collect();
        Ok(Self::from_raw(self.grid.clone(), values, self.unit.clone()))
    }

    /// Multilinear interpolation of all three components.
    pub fn sample(&self, p: [f64; 3]) -> Result<[f64; 3], FieldError> {
        let stencil = interp_stencil(&self.grid, p)?;
        let mut out = [0.0; 3];
        for (idx, w) in stencil.iter() {
            let v = self.values[*idx];
            for c in 0..3 {
                out[c] += w * v[c];
            }
        }
        Ok(out)
    }

    /// Tensor-product Catmull-Rom interpolation. Exact for quadratics away
    /// from clamped ends; near clamped ends the stencil indices are clamped.
    pub fn sample_cubic(&self, p: [f64; 3]) -> Result<[f64; 3], FieldError> {
        let g = &self.grid;
        let mut axis_nodes = [[(0usize, 1.0f64); 4]; 3];
        for (a, nodes) in axis_nodes.iter_mut().enumerate() {
            if a >= g.ndim() {
                *nodes = [(0, 1.0), (0, 0.0), (0, 0.0), (0, 0.0)];
                continue;
            }
            let (base, t) = locate(g, a, p[a]).ok_or(FieldError::OutOfDomain(p))?;
            let w = catmull_rom_weights(t);
            for (m, slot) in nodes.iter_mut().enumerate() {
                let idx = base as isize + m as isize - 1;
                *slot = (wrap_or_clamp(g, a, idx), w[m]);
            }
        }
        let mut out = [0.0; 3];
        for &(k, wk) in &axis_nodes[2] {
            if wk == 0.0 {
                continue;
            }
            for &(j, wj) in &axis_nodes[1] {
                for &(i, wi) in &axis_nodes[0] {
                    let w = wi * wj * wk;
                    let v = self.values[g.index(i, j, k)];
                    for c in 0..3 {
                        out[c] += w * v[c];
                    }
                }
            }
        }
        Ok(out)
    }
}

#[inline]
pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

fn wrap_or_clamp(g: &GridSpec, axis: usize, idx: isize) -> usize {
    let n = g.dim(axis) as isize;
    match g.boundary_of(axis) {
        Boundary::Periodic => idx.rem_euclid(n) as usize,
        Boundary::Clamped => idx.clamp(0, n - 1) as usize,
    }
}

/// Cell index and fractional offset of coordinate `x` along `axis`.
fn locate(g: &GridSpec, axis: usize, x: f64) -> Option<(usize, f64)> {
    let s = (x - g.origin()[axis]) / g.h(axis);
    if !s.is_finite() {
        return None;
    }
    let n = g.dim(axis);
    match g.boundary_of(axis) {
        Boundary::Periodic => {
            let s = s.rem_euclid(n as f64);
            let base = (s.floor() as usize).min(n - 1);
            Some((base, s - base as f64))
        }
        Boundary::Clamped => {
            let eps = 1e-9;
            if s < -eps || s > (n - 1) as f64 + eps {
                return None;
            }
            let s = s.clamp(0.0, (n - 1) as f64);
            let base = (s.floor() as usize).min(n - 2);
            Some((base, s - base as f64))
        }
    }
}

fn interp_stencil(g: &GridSpec, p: [f64; 3]) -> Result<Vec<(usize, f64)>, FieldError> {
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    let mut t = [0.0; 3];
    for a in 0..g.ndim() {
        let (base, frac) = locate(g, a, p[a]).ok_or(FieldError::OutOfDomain(p))?;
        lo[a] = base;
        hi[a] = wrap_or_clamp(g, a, base as isize + 1);
        t[a] = frac;
    }
    let corners = 1usize << g.ndim();
    let mut out = Vec::with_capacity(corners);
    for c in 0..corners {
        let mut ijk = [0usize; 3];
        let mut w = 1.0;
        for a in 0..g.ndim() {
            if c >> a & 1 == 1 {
                ijk[a] = hi[a];
                w *= t[a];
            } else {
                ijk[a] = lo[a];
                w *= 1.0 - t[a];
            }
        }
        out.push((g.index(ijk[0], ijk[1], ijk[2]), w));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_degenerate_grids() {
        assert!(GridSpec::periodic_2d(3, 1.0).is_err());
        assert!(GridSpec::new(&[8, 8], &[0.0, 1.0], &[0.0, 0.0], &[Boundary::Clamped; 2]).is_err());
        assert!(GridSpec::new(&[8], &[1.0], &[0.0], &[Boundary::Clamped]).is_err());
    }

    #[test]
    fn non_finite_values_are_located() {
        let g = GridSpec::clamped_2d(4, 4, (0.0, 3.0), (0.0, 3.0)).unwrap();
        let mut v = vec![0.0; 16];
        v[g.index(2, 1, 0)] = f64::NAN;
        match ScalarField::new(g, v, "Pa") {
            Err(FieldError::NonFinite { index, position, .. }) => {
                assert_eq!(index, 6);
                assert_eq!(position, [2.0, 1.0, 0.0]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bilinear_sampling_is_exact_on_bilinear_data() {
        let g = GridSpec::clamped_2d(5, 6, (0.0, 1.0), (-1.0, 1.0)).unwrap();
        let f = |p: [f64; 3]| 1.0 + 2.0 * p[0] - p[1] + 0.5 * p[0] * p[1];
        let s = ScalarField::from_fn(g, "1", f).unwrap();
        for p in [[0.13, 0.77, 0.0], [1.0, 1.0, 0.0], [0.0, -1.0, 0.0]] {
            assert!((s.sample(p).unwrap() - f(p)).abs() < 1e-13);
        }
        assert!(s.sample([1.5, 0.0, 0.0]).is_err());
    }

    #[test]
    fn cubic_sampling_reproduces_quadratics_on_periodic_grid() {
        let g = GridSpec::periodic_2d(16, 16.0).unwrap();
        // quadratic in a region away from the wrap seam
        let f = |p: [f64; 3]| [p[0] * p[0] - 3.0 * p[1], p[0] * p[1], 0.0];
        let v = VectorField::from_fn(g, "m/s", f).unwrap();
        let p = [6.3, 7.8, 0.0];
        let got = v.sample_cubic(p).unwrap();
        let want = f(p);
        for c in 0..2 {
            assert!((got[c] - want[c]).abs() < 1e-11, "{got:?} vs {want:?}");
        }
    }
}
