//! Plain-text field snapshots.
//!
//! ```text
//! flowaudit-field 1
//! kind vector
//! dims 16 16
//! spacing 6.2500000000000000e-2 6.2500000000000000e-2
//! origin 0.0000000000000000e0 0.0000000000000000e0
//! boundary periodic clamped
//! unit m/s
//! time 5.0000000000000000e-1      (optional)
//! data
//! <one node per line, x-fastest; 1 value for scalars, 3 for vectors>
//! ```
//!
//! Reals are written with 17 significant digits so that a write/read cycle
//! reproduces every value bit for bit.

use std::io::{BufRead, Write};

use super::{Boundary, FieldError, GridSpec, ScalarField, VectorField};

const MAGIC: &str = "flowaudit-field 1";

#[derive(Debug, Clone, PartialEq)]
pub enum Snapshot {
    Scalar(ScalarField),
    Vector(VectorField),
}

impl Snapshot {
    pub fn grid(&self) -> &GridSpec {
        match self {
            Snapshot::Scalar(s) => s.grid(),
            Snapshot::Vector(v) => v.grid(),
        }
    }

    pub fn into_scalar(self) -> Result<ScalarField, FieldError> {
        match self {
            Snapshot::Scalar(s) => Ok(s),
            Snapshot::Vector(_) => Err(FieldError::Format("expected a scalar field".into())),
        }
    }

    pub fn into_vector(self) -> Result<VectorField, FieldError> {
        match self {
            Snapshot::Vector(v) => Ok(v),
            Snapshot::Scalar(_) => Err(FieldError::Format("expected a vector field".into())),
        }
    }
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn join<T>(items: impl Iterator<Item = T>, f: impl Fn(T) -> String) -> String {
    items.map(f).collect::<Vec<_>>().join(" ")
}

pub fn write_snapshot<W: Write>(out: &mut W, snap: &Snapshot, time: Option<f64>) -> Result<(), FieldError> {
    let grid = snap.grid();
    let (kind, unit) = match snap {
        Snapshot::Scalar(s) => ("scalar", s.unit()),
        Snapshot::Vector(v) => ("vector", v.unit()),
    };
    if unit.chars().any(char::is_whitespace) {
        return Err(FieldError::Format(format!("unit tag `{unit}` contains whitespace")));
    }
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "kind {kind}")?;
    writeln!(out, "dims {}", join(grid.dims().iter(), |d| d.to_string()))?;
    writeln!(out, "spacing {}", join(grid.spacing().iter(), |x| real(*x)))?;
    writeln!(out, "origin {}", join(grid.origin().iter(), |x| real(*x)))?;
    writeln!(out, "boundary {}", join(grid.boundary().iter(), |b| b.to_string()))?;
    writeln!(out, "unit {}", if unit.is_empty() { "1" } else { unit })?;
    if let Some(t) = time {
        writeln!(out, "time {}", real(t))?;
    }
    writeln!(out, "data")?;
    match snap {
        Snapshot::Scalar(s) => {
            for v in s.values() {
                writeln!(out, "{}", real(*v))?;
            }
        }
        Snapshot::Vector(v) => {
            for x in v.values() {
                writeln!(out, "{} {} {}", real(x[0]), real(x[1]), real(x[2]))?;
            }
        }
    }
    Ok(())
}

fn parse_list<T: std::str::FromStr>(rest: &str, what: &str) -> Result<Vec<T>, FieldError> {
    rest.split_whitespace()
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| FieldError::Format(format!("bad {what} entry `{t}`")))
        })
        .collect()
}

/// Reads a snapshot and its optional time stamp.
pub fn read_snapshot<R: BufRead>(input: R) -> Result<(Snapshot, Option<f64>), FieldError> {
    let mut lines = input.lines();
    let mut next = || -> Result<String, FieldError> {
        lines
            .next()
            .ok_or_else(|| FieldError::Format("unexpected end of file".into()))?
            .map_err(FieldError::from)
    };
    if next()?.trim() != MAGIC {
        return Err(FieldError::Format("missing `flowaudit-field 1` header".into()));
    }
    let mut kind = None;
    let mut dims: Option<Vec<usize>> = None;
    let mut spacing: Option<Vec<f64>> = None;
    let mut origin: Option<Vec<f64>> = None;
    let mut boundary: Option<Vec<Boundary>> = None;
    let mut unit = String::from("1");
    let mut time = None;
    loop {
        let line = next()?;
        let line = line.trim();
        if line == "data" {
            break;
        }
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        match key {
            "kind" => kind = Some(rest.trim().to_string()),
            "dims" => dims = Some(parse_list(rest, "dims")?),
            "spacing" => spacing = Some(parse_list(rest, "spacing")?),
            "origin" => origin = Some(parse_list(rest, "origin")?),
            "boundary" => boundary = Some(parse_list(rest, "boundary")?),
            "unit" => unit = rest.trim().to_string(),
            "time" => {
                time = Some(
                    rest.trim()
                        .parse::<f64>()
                        .map_err(|_| FieldError::Format(format!("bad time `{rest}`")))?,
                )
            }
            other => return Err(FieldError::Format(format!("unknown header key `{other}`"))),
        }
    }
    let missing = |k: &str| FieldError::Format(format!("header lacks `{k}`"));
    let grid = GridSpec::new(
        &dims.ok_or_else(|| missing("dims"))?,
        &spacing.ok_or_else(|| missing("spacing"))?,
        &origin.ok_or_else(|| missing("origin"))?,
        &boundary.ok_or_else(|| missing("boundary"))?,
    )?;
    let width = match kind.as_deref() {
        Some("scalar") => 1,
        Some("vector") => 3,
        Some(k) => return Err(FieldError::Format(format!("unknown kind `{k}`"))),
        None => return Err(missing("kind")),
    };
    let n = grid.node_count();
    let mut flat = Vec::with_capacity(n * width);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = parse_list(&line, "value")?;
        if row.len() != width {
            return Err(FieldError::Format(format!(
                "node {} has {} values, expected {width}",
                flat.len() / width,
                row.len()
            )));
        }
        flat.extend(row);
    }
    if flat.len() != n * width {
        return Err(FieldError::Length {
            expected: n,
            got: flat.len() / width,
        });
    }
    let snap = if width == 1 {
        Snapshot::Scalar(ScalarField::new(grid, flat, unit)?)
    } else {
        let values = flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Snapshot::Vector(VectorField::new(grid, values, unit)?)
    };
    Ok((snap, time))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn vector_snapshot_round_trips_bitwise() {
        let g = GridSpec::new(
            &[5, 4],
            &[0.1, 1.0 / 3.0],
            &[-0.25, 1e-3],
            &[Boundary::Periodic, Boundary::Clamped],
        )
        .unwrap();
        let v = VectorField::from_fn(g, "m/s", |p| [p[0].sin() / 7.0, p[1].exp(), 1e-300 * p[0]]).unwrap();
        let snap = Snapshot::Vector(v);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &snap, Some(0.1 + 0.2)).unwrap();
        let (back, t) = read_snapshot(Cursor::new(&buf)).unwrap();
        assert_eq!(t, Some(0.1 + 0.2));
        assert_eq!(back, snap);
        let mut again = Vec::new();
        write_snapshot(&mut again, &back, t).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn truncated_data_is_rejected() {
        let g = GridSpec::periodic_2d(4, 1.0).unwrap();
        let snap = Snapshot::Scalar(ScalarField::zeros(g, "Pa"));
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &snap, None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text
            .lines()
            .take(text.lines().count() - 1)
            .collect::<Vec<_>>()
            .join("\n");
        assert!(matches!(
            read_snapshot(Cursor::new(cut)),
            Err(FieldError::Length { expected: 16, got: 15 })
        ));
    }
}
