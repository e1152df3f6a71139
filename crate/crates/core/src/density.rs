//! Density structure of a moving medium: linear density along streamtubes,
//! surface density across flow slabs, and the product law that ties them to
//! the bulk density.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

use crate::fields::{divergence, norm3, FieldError, VectorField};

#[derive(Debug, Error)]
pub enum DensityError {
    #[error("degenerate tangent at station {0}: repeated centerline points")]
    DegenerateTangent(usize),
    #[error("station {index} out of range (tube has {len})")]
    Station { index: usize, len: usize },
    #[error("invalid tube: {0}")]
    InvalidTube(String),
    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),
    #[error("field is not divergence-free enough: max |div u| = {max_div:e} > {threshold:e}")]
    NotDivergenceFree { max_div: f64, threshold: f64 },
    #[error("seed {0:?} lies outside the sampled domain")]
    SeedOutside([f64; 3]),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Linear density vector (kg/m), surface density (kg/m²) and bulk density
/// (kg/m³) of a tube station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityStructure {
    pub rho_l: [f64; 3],
    pub rho_s: f64,
    pub rho: f64,
}

impl DensityStructure {
    pub fn new(rho_l: [f64; 3], rho_s: f64, rho: f64) -> Result<Self, DensityError> {
        if !(rho > 0.0) || !(rho_s >= 0.0) || rho_l.iter().any(|x| !x.is_finite()) {
            return Err(DensityError::InvalidTube(format!(
                "need rho > 0, rho_S >= 0 and finite rho_L (got rho={rho}, rho_S={rho_s})"
            )));
        }
        Ok(Self { rho_l, rho_s, rho })
    }

    pub fn rho_l_magnitude(&self) -> f64 {
        norm3(self.rho_l)
    }
}

/// A discretised streamtube: centerline points with the cross-section area
/// at each station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamTube {
    pub centerline: Vec<[f64; 3]>,
    pub areas: Vec<f64>,
    /// Carried mass, kg.
    pub mass: f64,
    /// Medium density, kg/m³.
    pub rho: f64,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

impl StreamTube {
    pub fn new(centerline: Vec<[f64; 3]>, areas: Vec<f64>, mass: f64, rho: f64) -> Result<Self, DensityError> {
        if centerline.len() < 2 {
            return Err(DensityError::InvalidTube("need at least two stations".into()));
        }
        if areas.len() != centerline.len() {
            return Err(DensityError::InvalidTube(format!(
                "{} areas for {} stations",
                areas.len(),
                centerline.len()
            )));
        }
        if areas.iter().any(|a| !(*a > 0.0)) {
            return Err(DensityError::InvalidTube("areas must be positive".into()));
        }
        if !(rho > 0.0) {
            return Err(DensityError::InvalidTube("density must be positive".into()));
        }
        let tube = Self {
            centerline,
            areas,
            mass,
            rho,
        };
        if !(tube.arclength() > 0.0) {
            return Err(DensityError::InvalidTube("zero arclength".into()));
        }
        Ok(tube)
    }

    pub fn arclength(&self) -> f64 {
        self.centerline.windows(2).map(|w| norm3(sub(w[1], w[0]))).sum()
    }

    /// Unit tangent from neighbouring centerline points (one-sided at the ends).
    pub fn tangent(&self, index: usize) -> Result<[f64; 3], DensityError> {
        let n = self.centerline.len();
        if index >= n {
            return Err(DensityError::Station { index, len: n });
        }
        let c = &self.centerline;
        let d = if index == 0 {
            sub(c[1], c[0])
        } else if index == n - 1 {
            sub(c[n - 1], c[n - 2])
        } else {
            sub(c[index + 1], c[index - 1])
        };
        let len = norm3(d);
        if !(len > 0.0) {
            return Err(DensityError::DegenerateTangent(index));
        }
        Ok([d[0] / len, d[1] / len, d[2] / len])
    }

    pub fn reversed(&self) -> Self {
        let mut t = self.clone();
        t.centerline.reverse();
        t.areas.reverse();
        t
    }
}

/// Linear density vector at a station: magnitude `ρ · area`, direction of the
/// local centerline tangent.
pub fn rho_l_at_station(tube: &StreamTube, index: usize) -> Result<[f64; 3], DensityError> {
    let t = tube.tangent(index)?;
    let mag = tube.rho * tube.areas[index];
    Ok([mag * t[0], mag * t[1], mag * t[2]])
}

/// Splitting of a body of mass `M` into `m` tubes (lengths `L_j`) and `m`
/// slabs (areas `S_i`), each carrying `M / m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeDecomposition {
    pub total_mass: f64,
    pub tube_lengths: Vec<f64>,
    pub slab_areas: Vec<f64>,
}

impl TubeDecomposition {
    pub fn new(total_mass: f64, tube_lengths: Vec<f64>, slab_areas: Vec<f64>) -> Result<Self, DensityError> {
        let d = Self {
            total_mass,
            tube_lengths,
            slab_areas,
        };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<(), DensityError> {
        if self.tube_lengths.is_empty() || self.slab_areas.is_empty() {
            return Err(DensityError::InvalidDecomposition("empty decomposition".into()));
        }
        if self.tube_lengths.len() != self.slab_areas.len() {
            return Err(DensityError::InvalidDecomposition(format!(
                "{} tubes but {} slabs",
                self.tube_lengths.len(),
                self.slab_areas.len()
            )));
        }
        if !(self.total_mass > 0.0) {
            return Err(DensityError::InvalidDecomposition("total mass must be positive".into()));
        }
        if self.tube_lengths.iter().chain(&self.slab_areas).any(|x| !(*x > 0.0)) {
            return Err(DensityError::InvalidDecomposition(
                "tube lengths and slab areas must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Builds the decomposition for which the product law holds exactly:
    /// equal tubes of length `tube_length` and equal slabs with
    /// `S · L = V / 2`, `V = M / ρ`.
    pub fn consistent(total_mass: f64, rho: f64, m: usize, tube_length: f64) -> Result<Self, DensityError> {
        if m == 0 || !(rho > 0.0) || !(tube_length > 0.0) {
            return Err(DensityError::InvalidDecomposition(
                "need m >= 1, rho > 0 and a positive tube length".into(),
            ));
        }
        let volume = total_mass / rho;
        let area = volume / (2.0 * tube_length);
        Self::new(total_mass, vec![tube_length; m], vec![area; m])
    }

    pub fn count(&self) -> usize {
        self.tube_lengths.len()
    }

    pub fn element_mass(&self) -> f64 {
        self.total_mass / self.count() as f64
    }

    /// Magnitude of the linear density of tube `j`: `(M/m) / L_j`.
    pub fn rho_l_of_tube(&self, j: usize) -> Result<f64, DensityError> {
        let len = self.count();
        let l = self
            .tube_lengths
            .get(j)
            .ok_or(DensityError::Station { index: j, len })?;
        Ok(self.element_mass() / l)
    }
}

/// Surface density of slab `i`: `(M/m) / S_i`.
pub fn rho_s_of_slab(decomp: &TubeDecomposition, i: usize) -> Result<f64, DensityError> {
    let len = decomp.count();
    let s = decomp
        .slab_areas
        .get(i)
        .ok_or(DensityError::Station { index: i, len })?;
    Ok(decomp.element_mass() / s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductInvariantReport {
    /// `(ρ_S)_i · |ρ_L|_j`, slab-major (`i * m + j`).
    pub products: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// `max / min − 1`.
    pub spread: f64,
    pub mean: f64,
    /// `2 M ρ / m²`.
    pub expected: f64,
    pub value_error: f64,
    /// Largest relative deviation of `S_i L_j` from `V / 2`, the geometric
    /// condition under which the common value equals `2 M ρ / m²`.
    pub geometry_deviation: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

/// Evaluates every slab/tube product and checks it is constant and equal to
/// `2 M ρ / m²` within `tolerance` (relative).
pub fn product_invariant(
    decomp: &TubeDecomposition,
    rho: f64,
    tolerance: f64,
) -> Result<ProductInvariantReport, DensityError> {
    decomp.validate()?;
    if !(rho > 0.0) {
        return Err(DensityError::InvalidDecomposition("density must be positive".into()));
    }
    let m = decomp.count();
    let mut products = Vec::with_capacity(m * m);
    for i in 0..m {
        let rs = rho_s_of_slab(decomp, i)?;
        for j in 0..m {
            products.push(rs * decomp.rho_l_of_tube(j)?);
        }
    }
    let min = products.iter().copied().fold(f64::INFINITY, f64::min);
    let max = products.iter().copied().fold(0.0, f64::max);
    let mean = products.iter().sum::<f64>() / products.len() as f64;
    let spread = max / min - 1.0;
    let expected = 2.0 * decomp.total_mass * rho / (m * m) as f64;
    let value_error = products
        .iter()
        .map(|p| (p - expected).abs() / expected)
        .fold(0.0, f64::max);
    let half_volume = 0.5 * decomp.total_mass / rho;
    let geometry_deviation = decomp
        .slab_areas
        .iter()
        .flat_map(|s| {
            decomp
                .tube_lengths
                .iter()
                .map(move |l| (s * l - half_volume).abs() / half_volume)
        })
        .fold(0.0, f64::max);
    let verdict = if spread < tolerance && value_error < tolerance {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(ProductInvariantReport {
        products,
        min,
        max,
        spread,
        mean,
        expected,
        value_error,
        geometry_deviation,
        tolerance,
        verdict,
    })
}

/// Options for streamtube extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractOptions {
    /// Arclength between stations, m.
    pub step: f64,
    pub max_stations: usize,
    /// Tubes end where the local speed drops below this, m/s.
    pub stagnation_speed: f64,
    /// Slab residence time used for the station surface density, s.
    pub slab_time: f64,
    /// Reject fields whose max |div u| exceeds this.
    pub max_divergence: Option<f64>,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            step: 0.01,
            max_stations: 10_000,
            stagnation_speed: 1e-9,
            slab_time: 1.0,
            max_divergence: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    Stagnation,
    Exit,
    MaxStations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub arclength: f64,
    pub position: [f64; 3],
    pub tangent: [f64; 3],
    pub area: f64,
    pub speed: f64,
    pub structure: DensityStructure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedTube {
    pub seed: [f64; 3],
    pub stations: Vec<Station>,
    pub termination: Termination,
}

impl ExtractedTube {
    /// Centerline/area view of the tube; the carried mass is `ρ ∫ A ds`.
    pub fn to_stream_tube(&self) -> Result<StreamTube, DensityError> {
        let rho = self.stations.first().map(|s| s.structure.rho).unwrap_or(1.0);
        let mass = rho
            * self
                .stations
                .windows(2)
                .map(|w| 0.5 * (w[0].area + w[1].area) * (w[1].arclength - w[0].arclength))
                .sum::<f64>();
        StreamTube::new(
            self.stations.iter().map(|s| s.position).collect(),
            self.stations.iter().map(|s| s.area).collect(),
            mass,
            rho,
        )
    }
}

enum Probe {
    Ok([f64; 3], f64),
    Stagnant,
    Outside,
}

fn probe(v: &VectorField, p: [f64; 3], stagnation: f64) -> Probe {
    if !v.grid().contains(p) {
        return Probe::Outside;
    }
    match v.sample(p) {
        Ok(u) => {
            let s = norm3(u);
            if s < stagnation {
                Probe::Stagnant
            } else {
                Probe::Ok([u[0] / s, u[1] / s, u[2] / s], s)
            }
        }
        Err(_) => Probe::Outside,
    }
}

fn station(
    arclength: f64,
    position: [f64; 3],
    tangent: [f64; 3],
    speed: f64,
    rho: f64,
    flux: f64,
    slab_time: f64,
) -> Station {
    let area = flux / speed;
    let mag = rho * area;
    Station {
        arclength,
        position,
        tangent,
        area,
        speed,
        structure: DensityStructure {
            rho_l: [mag * tangent[0], mag * tangent[1], mag * tangent[2]],
            // slab of thickness |u| τ: ρ_S = dM/dS = ρ |u| τ
            rho_s: rho * speed * slab_time,
            rho,
        },
    }
}

fn trace(v: &VectorField, rho: f64, seed: [f64; 3], flux: f64, opts: &ExtractOptions) -> ExtractedTube {
    let h = opts.step;
    let mut stations = Vec::new();
    let (mut tangent, mut speed) = match probe(v, seed, opts.stagnation_speed) {
        Probe::Ok(t, s) => (t, s),
        Probe::Stagnant => {
            return ExtractedTube {
                seed,
                stations,
                termination: Termination::Stagnation,
            }
        }
        Probe::Outside => {
            return ExtractedTube {
                seed,
                stations,
                termination: Termination::Exit,
            }
        }
    };
    let mut x = seed;
    let mut s = 0.0;
    stations.push(station(s, x, tangent, speed, rho, flux, opts.slab_time));
    let axpy = |x: [f64; 3], a: f64, d: [f64; 3]| [x[0] + a * d[0], x[1] + a * d[1], x[2] + a * d[2]];
    let termination = loop {
        if stations.len() >= opts.max_stations {
            break Termination::MaxStations;
        }
        // classical RK4 on dx/ds = u / |u|
        let k1 = tangent;
        let mut ks = [k1; 4];
        let mut stop = None;
        for (stage, frac) in [(1, 0.5), (2, 0.5), (3, 1.0)] {
            match probe(v, axpy(x, frac * h, ks[stage - 1]), opts.stagnation_speed) {
                Probe::Ok(t, _) => ks[stage] = t,
                Probe::Stagnant => {
                    stop = Some(Termination::Stagnation);
                    break;
                }
                Probe::Outside => {
                    stop = Some(Termination::Exit);
                    break;
                }
            }
        }
        if let Some(t) = stop {
            break t;
        }
        let mut next = x;
        for c in 0..3 {
            next[c] += h / 6.0 * (ks[0][c] + 2.0 * ks[1][c] + 2.0 * ks[2][c] + ks[3][c]);
        }
        match probe(v, next, opts.stagnation_speed) {
            Probe::Ok(t, sp) => {
                tangent = t;
                speed = sp;
            }
            Probe::Stagnant => break Termination::Stagnation,
            Probe::Outside => break Termination::Exit,
        }
        s += h;
        x = next;
        stations.push(station(s, x, tangent, speed, rho, flux, opts.slab_time));
    };
    ExtractedTube {
        seed,
        stations,
        termination,
    }
}

/// Traces one streamtube per seed and assigns each station its area from
/// flux conservation (`A = flux / |u|`) and its density structure.
pub fn extract_density_structure(
    v: &VectorField,
    rho: f64,
    seeds: &[[f64; 3]],
    flux: f64,
    opts: &ExtractOptions,
) -> Result<Vec<ExtractedTube>, DensityError> {
    if !(rho > 0.0) || !(flux > 0.0) || !(opts.step > 0.0) {
        return Err(DensityError::InvalidTube("need rho > 0, flux > 0 and step > 0".into()));
    }
    if let Some(threshold) = opts.max_divergence {
        let max_div = divergence(v)?.max_abs();
        if max_div > threshold {
            return Err(DensityError::NotDivergenceFree { max_div, threshold });
        }
    }
    if let Some(seed) = seeds.iter().find(|s| !v.grid().contains(**s)) {
        return Err(DensityError::SeedOutside(*seed));
    }
    Ok(seeds.par_iter().map(|seed| trace(v, rho, *seed, flux, opts)).collect())
}

/// Column order of the tube CSV export.
pub const TUBE_CSV_HEADER: &str = "arclength,x,y,z,tx,ty,tz,area,rho_l,rho_s,speed";

pub fn write_tube_csv<W: Write>(out: &mut W, tube: &ExtractedTube) -> Result<(), DensityError> {
    writeln!(out, "{TUBE_CSV_HEADER}")?;
    for s in &tube.stations {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            s.arclength,
            s.position[0],
            s.position[1],
            s.position[2],
            s.tangent[0],
            s.tangent[1],
            s.tangent[2],
            s.area,
            s.structure.rho_l_magnitude(),
            s.structure.rho_s,
            s.speed
        )?;
    }
    Ok(())
}
