use serde::{Deserialize, Serialize};
use std::fmt;

use super::FieldError;

/// Boundary treatment along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Values wrap; node `n` coincides with node `0`.
    Periodic,
    /// Nodes span both ends; derivatives use one-sided stencils at the ends.
    Clamped,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Periodic => f.write_str("periodic"),
            Boundary::Clamped => f.write_str("clamped"),
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = FieldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "clamped" => Ok(Boundary::Clamped),
            other => Err(FieldError::Format(format!("unknown boundary flag `{other}`"))),
        }
    }
}

/// A uniform structured grid in 2 or 3 dimensions.
///
/// `dims` counts nodes per axis. Node `(i, j, k)` sits at
/// `origin + (i, j, k) * spacing`. Storage is x-fastest:
/// `index = i + nx * (j + ny * k)`. For 2D grids the third axis has a single
/// node and carries no derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    ndim: usize,
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    boundary: [Boundary; 3],
}

pub const MIN_NODES: usize = 4;

impl GridSpec {
    pub fn new(dims: &[usize], spacing: &[f64], origin: &[f64], boundary: &[Boundary]) -> Result<Self, FieldError> {
        let ndim = dims.len();
        if !(2..=3).contains(&ndim) {
            return Err(FieldError::InvalidGrid(format!(
                "grid must be 2D or 3D, got {ndim} axes"
            )));
        }
        if spacing.len() != ndim || origin.len() != ndim || boundary.len() != ndim {
            return Err(FieldError::InvalidGrid(
                "dims, spacing, origin and boundary must have equal length".into(),
            ));
        }
        let mut g = GridSpec {
            ndim,
            dims: [1; 3],
            spacing: [1.0; 3],
            origin: [0.0; 3],
            boundary: [Boundary::Periodic; 3],
        };
        for a in 0..ndim {
            if dims[a] < MIN_NODES {
                return Err(FieldError::InvalidGrid(format!(
                    "axis {a} has {} nodes, need at least {MIN_NODES}",
                    dims[a]
                )));
            }
            if !(spacing[a] > 0.0) || !spacing[a].is_finite() {
                return Err(FieldError::InvalidGrid(format!(
                    "axis {a} spacing {} must be positive and finite",
                    spacing[a]
                )));
            }
            if !origin[a].is_finite() {
                return Err(FieldError::InvalidGrid(format!("axis {a} origin is not finite")));
            }
            g.dims[a] = dims[a];
            g.spacing[a] = spacing[a];
            g.origin[a] = origin[a];
            g.boundary[a] = boundary[a];
        }
        Ok(g)
    }

    /// Doubly periodic square `[0, length)²` with `n` nodes per side.
    pub fn periodic_2d(n: usize, length: f64) -> Result<Self, FieldError> {
        let h = length / n as f64;
        Self::new(&[n, n], &[h, h], &[0.0, 0.0], &[Boundary::Periodic; 2])
    }

    /// Clamped rectangle whose `nx × ny` nodes include both ends of each span.
    pub fn clamped_2d(nx: usize, ny: usize, x_span: (f64, f64), y_span: (f64, f64)) -> Result<Self, FieldError> {
        if nx < 2 || ny < 2 {
            return Err(FieldError::InvalidGrid("need at least two nodes per axis".into()));
        }
        let hx = (x_span.1 - x_span.0) / (nx - 1) as f64;
        let hy = (y_span.1 - y_span.0) / (ny - 1) as f64;
        Self::new(&[nx, ny], &[hx, hy], &[x_span.0, y_span.0], &[Boundary::Clamped; 2])
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims[..self.ndim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.ndim]
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin[..self.ndim]
    }

    pub fn boundary(&self) -> &[Boundary] {
        &self.boundary[..self.ndim]
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.dims[axis]
    }

    pub fn h(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    pub fn boundary_of(&self, axis: usize) -> Boundary {
        self.boundary[axis]
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn node_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Physical extent covered by the nodes along `axis`. For periodic axes
    /// this is the full period.
    pub fn extent(&self, axis: usize) -> f64 {
        match self.boundary[axis] {
            Boundary::Periodic => self.dims[axis] as f64 * self.spacing[axis],
            Boundary::Clamped => (self.dims[axis] - 1) as f64 * self.spacing[axis],
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let rest = idx / self.dims[0];
        [i, rest % self.dims[1], rest / self.dims[1]]
    }

    /// Physical position of a node; the unused third coordinate of a 2D grid is 0.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let mut p = [0.0; 3];
        for a in 0..self.ndim {
            p[a] = self.origin[a] + c[a] as f64 * self.spacing[a];
        }
        p
    }

    /// Same grid with `factor` times as many cells per axis over the same extent.
    pub fn refined(&self, factor: usize) -> Result<Self, FieldError> {
        let mut dims = Vec::with_capacity(self.ndim);
        let mut spacing = Vec::with_capacity(self.ndim);
        for a in 0..self.ndim {
            match self.boundary[a] {
                Boundary::Periodic => dims.push(self.dims[a] * factor),
                Boundary::Clamped => dims.push((self.dims[a] - 1) * factor + 1),
            }
            spacing.push(self.spacing[a] / factor as f64);
        }
        Self::new(&dims, &spacing, self.origin(), self.boundary())
    }

    /// Whether `p` lies inside the sampled region along every clamped axis.
    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..self.ndim).all(|a| match self.boundary[a] {
            Boundary::Periodic => p[a].is_finite(),
            Boundary::Clamped => {
                let lo = self.origin[a];
                let hi = lo + self.extent(a);
                p[a] >= lo && p[a] <= hi
            }
        })
    }
}
