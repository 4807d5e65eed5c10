//! Beamformed AP field on the IRS, per-point scattered spectra and the
//! end-to-end transfer function.

use std::io::Write;

use num_complex::{Complex32, Complex64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{IrsGrid, SceneGeometry};
use crate::numeric::{cis, pairwise_sum};
use crate::spectrum::SignalSpectrum;
use crate::SPEED_OF_LIGHT;

/// `1/√(4π)`.
pub(crate) const ISOTROPIC_GAIN: f64 = 0.282_094_791_773_878_14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubBand {
    pub lo: f64,
    pub hi: f64,
    /// Frequency the steering matrix is computed for.
    pub tuned: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BeamMode {
    /// Steering follows the signal frequency, no beam split.
    Ideal,
    /// Steering fixed at the carrier.
    Central,
    /// Steering fixed per sub-band.
    Hybrid(Vec<SubBand>),
}

/// AP beamformer. The beam target is always the IRS center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamformerSpec {
    pub mode: BeamMode,
}

impl BeamformerSpec {
    pub fn central() -> Self {
        Self {
            mode: BeamMode::Central,
        }
    }

    pub fn ideal() -> Self {
        Self {
            mode: BeamMode::Ideal,
        }
    }

    /// Checks that hybrid sub-bands are disjoint, contain their tuned
    /// frequency and cover every in-band sample of `spec`.
    pub fn validate(&self, spec: &SignalSpectrum) -> Result<()> {
        let BeamMode::Hybrid(bands) = &self.mode else {
            return Ok(());
        };
        if bands.is_empty() {
            return Err(Error::Beamformer(
                "hybrid mode needs at least one sub-band".into(),
            ));
        }
        let mut sorted = bands.clone();
        sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        for (i, b) in sorted.iter().enumerate() {
            if !(b.hi > b.lo) || b.tuned < b.lo || b.tuned > b.hi {
                return Err(Error::Beamformer(format!(
                    "sub-band [{}, {}] must be non-empty and contain its tuned frequency {}",
                    b.lo, b.hi, b.tuned
                )));
            }
            if i > 0 && b.lo <= sorted[i - 1].hi {
                return Err(Error::Beamformer("hybrid sub-bands overlap".into()));
            }
        }
        for (&f, &inside) in spec.freqs().iter().zip(spec.mask()) {
            if inside && !bands.iter().any(|b| f >= b.lo && f <= b.hi) {
                return Err(Error::Beamformer(format!(
                    "in-band frequency {f} is not covered by any hybrid sub-band"
                )));
            }
        }
        Ok(())
    }

    /// `u(f)`: the frequency the steering matrix is tuned to for signal
    /// frequency `f`.
    pub fn tuned_frequency(&self, f: f64, f0: f64) -> f64 {
        match &self.mode {
            BeamMode::Ideal => f,
            BeamMode::Central => f0,
            BeamMode::Hybrid(bands) => bands
                .iter()
                .find(|b| f >= b.lo && f <= b.hi)
                .or_else(|| {
                    bands.iter().min_by(|a, b| {
                        let da = (a.tuned - f).abs();
                        let db = (b.tuned - f).abs();
                        da.total_cmp(&db)
                    })
                })
                .map_or(f0, |b| b.tuned),
        }
    }
}

/// `W(x, y, f)` at one IRS point given the element distances to that point
/// and to the beam target.
pub fn field_sample(distances: &[f64], target_distances: &[f64], f: f64, tuned: f64) -> Complex64 {
    let k = std::f64::consts::TAU / SPEED_OF_LIGHT;
    let mut acc = Complex64::new(0.0, 0.0);
    for (&rho, &rho_t) in distances.iter().zip(target_distances) {
        acc += cis(k * (rho * f - rho_t * tuned)) * (ISOTROPIC_GAIN / rho);
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum FieldStorage {
    F32(Vec<Complex32>),
    F64(Vec<Complex64>),
}

/// Sampled `W(p, f)` over grid points × frequency samples, point-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidentField {
    n_points: usize,
    freqs: Vec<f64>,
    storage: FieldStorage,
    key: String,
    /// Beamformer and carrier the field was computed for; absent for
    /// synthetic fields.
    source: Option<(BeamformerSpec, f64)>,
}

impl IncidentField {
    pub(crate) fn from_storage(
        n_points: usize,
        freqs: Vec<f64>,
        storage: FieldStorage,
        key: String,
    ) -> Result<Self> {
        let len = match &storage {
            FieldStorage::F32(v) => v.len(),
            FieldStorage::F64(v) => v.len(),
        };
        if len != n_points * freqs.len() {
            return Err(Error::GridMismatch {
                expected: n_points * freqs.len(),
                actual: len,
            });
        }
        Ok(Self {
            n_points,
            freqs,
            storage,
            key,
            source: None,
        })
    }

    pub(crate) fn with_source(mut self, bf: BeamformerSpec, f0: f64) -> Self {
        self.source = Some((bf, f0));
        self
    }

    pub fn beamformer(&self) -> Option<&BeamformerSpec> {
        self.source.as_ref().map(|(bf, _)| bf)
    }

    /// `W(p, f)` at an arbitrary frequency. Evaluated exactly when the
    /// field knows its beamformer; otherwise `f` must be a grid sample.
    pub fn sample_at(&self, scene: &SceneGeometry, p: usize, f: f64) -> Result<Complex64> {
        match &self.source {
            Some((bf, f0)) => Ok(field_sample(
                scene.ap_distances(p),
                scene.target_distances(),
                f,
                bf.tuned_frequency(f, *f0),
            )),
            None => {
                let k = self.grid_index(f).ok_or_else(|| {
                    Error::OutOfRange(format!(
                        "frequency {f} is not a sample of a synthetic field"
                    ))
                })?;
                Ok(self.get(p, k))
            }
        }
    }

    /// Index of the sample equal to `f` up to `1e-12` relative.
    pub fn grid_index(&self, f: f64) -> Option<usize> {
        self.freqs
            .iter()
            .position(|&g| (g - f).abs() <= 1e-12 * f.abs())
    }

    /// Builds a field from explicit samples (point-major), mainly for
    /// synthetic inputs.
    pub fn from_samples(n_points: usize, freqs: Vec<f64>, samples: Vec<Complex64>) -> Result<Self> {
        Self::from_storage(n_points, freqs, FieldStorage::F64(samples), String::new())
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_freqs(&self) -> usize {
        self.freqs.len()
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn precision(&self) -> Precision {
        match self.storage {
            FieldStorage::F32(_) => Precision::F32,
            FieldStorage::F64(_) => Precision::F64,
        }
    }

    pub(crate) fn storage(&self) -> &FieldStorage {
        &self.storage
    }

    #[inline]
    pub fn get(&self, p: usize, k: usize) -> Complex64 {
        let i = p * self.freqs.len() + k;
        match &self.storage {
            FieldStorage::F32(v) => Complex64::new(v[i].re as f64, v[i].im as f64),
            FieldStorage::F64(v) => v[i],
        }
    }

    /// All frequency samples at grid point `p`.
    pub fn at_point(&self, p: usize) -> Vec<Complex64> {
        (0..self.freqs.len()).map(|k| self.get(p, k)).collect()
    }
}

/// Stable digest of everything `W` depends on.
pub fn field_key(
    scene: &SceneGeometry,
    bf: &BeamformerSpec,
    spec: &SignalSpectrum,
    precision: Precision,
) -> String {
    let payload = serde_json::json!({
        "ap": scene.ap,
        "irs": scene.irs,
        "ue": [scene.ue.x, scene.ue.y, scene.ue.z],
        "beamformer": bf,
        "f0": spec.f0(),
        "freqs": spec.freqs(),
        "precision": precision,
    });
    hex::encode(Sha256::digest(payload.to_string().as_bytes()))
}

pub fn incident_field(
    scene: &SceneGeometry,
    bf: &BeamformerSpec,
    spec: &SignalSpectrum,
) -> Result<IncidentField> {
    incident_field_with_precision(scene, bf, spec, Precision::F64)
}

pub fn incident_field_with_precision(
    scene: &SceneGeometry,
    bf: &BeamformerSpec,
    spec: &SignalSpectrum,
    precision: Precision,
) -> Result<IncidentField> {
    bf.validate(spec)?;
    let f0 = spec.f0();
    let freqs = spec.freqs().to_vec();
    let tuned: Vec<f64> = freqs.iter().map(|&f| bf.tuned_frequency(f, f0)).collect();
    let target = scene.target_distances();
    let rows: Vec<Vec<Complex64>> = (0..scene.num_points())
        .into_par_iter()
        .map(|p| {
            let d = scene.ap_distances(p);
            freqs
                .iter()
                .zip(&tuned)
                .map(|(&f, &u)| field_sample(d, target, f, u))
                .collect()
        })
        .collect();
    let flat = rows.into_iter().flatten();
    let storage = match precision {
        Precision::F64 => FieldStorage::F64(flat.collect()),
        Precision::F32 => FieldStorage::F32(
            flat.map(|c| Complex32::new(c.re as f32, c.im as f32))
                .collect(),
        ),
    };
    Ok(IncidentField::from_storage(
        scene.num_points(),
        freqs,
        storage,
        field_key(scene, bf, spec, precision),
    )?
    .with_source(bf.clone(), f0))
}

/// Controllable IRS phase `φ(x, y)` on the scene grid, radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMap {
    pub nx: usize,
    pub ny: usize,
    values: Vec<f64>,
}

impl PhaseMap {
    pub fn zeros(grid: &IrsGrid) -> Self {
        Self {
            nx: grid.nx(),
            ny: grid.ny(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn new(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != nx * ny {
            return Err(Error::GridMismatch {
                expected: nx * ny,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Undefined(
                "phase map contains non-finite values".into(),
            ));
        }
        Ok(Self { nx, ny, values })
    }

    pub fn from_grid(grid: &IrsGrid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid.nx(), grid.ny(), values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn center_index(&self) -> usize {
        (self.ny / 2) * self.nx + self.nx / 2
    }

    /// Shifts the map so the center cell is zero.
    pub fn pinned(mut self) -> Self {
        let c = self.values[self.center_index()];
        for v in &mut self.values {
            *v -= c;
        }
        self
    }

    pub fn shifted(mut self, offset: f64) -> Self {
        for v in &mut self.values {
            *v += offset;
        }
        self
    }

    /// CSV with header `x,y,phi`, one row per grid point.
    pub fn write_csv<W: Write>(&self, grid: &IrsGrid, mut out: W) -> Result<()> {
        writeln!(out, "x,y,phi")?;
        for (p, v) in self.values.iter().enumerate() {
            let (x, y) = grid.coords(p);
            writeln!(out, "{x:.9e},{y:.9e},{v:.15e}")?;
        }
        Ok(())
    }

    /// Binary dump: magic `IRSPHAS1`, `nx`, `ny` as little-endian u64, then
    /// row-major little-endian f64 values.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(b"IRSPHAS1")?;
        out.write_all(&(self.nx as u64).to_le_bytes())?;
        out.write_all(&(self.ny as u64).to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 24 || &bytes[..8] != b"IRSPHAS1" {
            return Err(Error::Cache("not a phase map dump".into()));
        }
        let nx = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let ny = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
        let body = &bytes[24..];
        if body.len() != nx * ny * 8 {
            return Err(Error::Cache("phase map dump has the wrong length".into()));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Self::new(nx, ny, values)
    }
}

/// `ζ̃(f)` sampled on the frequency grid; identical for every element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncontrollableResponse(pub Vec<Complex64>);

impl UncontrollableResponse {
    pub fn unit(n_freqs: usize) -> Self {
        Self(vec![Complex64::new(1.0, 0.0); n_freqs])
    }

    /// Linear interpolation of `(frequency, response)` pairs onto `freqs`,
    /// held constant beyond the table ends.
    pub fn from_table(freqs: &[f64], table: &[(f64, Complex64)]) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::Undefined("empty IRS response table".into()));
        }
        let mut t = table.to_vec();
        t.sort_by(|a, b| a.0.total_cmp(&b.0));
        let samples = freqs
            .iter()
            .map(|&f| match t.iter().position(|&(x, _)| x >= f) {
                None => t[t.len() - 1].1,
                Some(0) => t[0].1,
                Some(i) => {
                    let (x0, y0) = t[i - 1];
                    let (x1, y1) = t[i];
                    if x1 == x0 {
                        y1
                    } else {
                        y0 + (y1 - y0) * ((f - x0) / (x1 - x0))
                    }
                }
            })
            .collect();
        Ok(Self(samples))
    }

    /// Response at an arbitrary frequency by linear interpolation between
    /// grid samples.
    pub fn at_frequency(&self, freqs: &[f64], f: f64) -> Complex64 {
        let table: Vec<(f64, Complex64)> =
            freqs.iter().copied().zip(self.0.iter().copied()).collect();
        Self::from_table(&[f], &table).map_or(Complex64::new(1.0, 0.0), |r| r.0[0])
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self(self.0.iter().map(|z| z * factor).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrsResponse {
    pub uncontrollable: UncontrollableResponse,
    pub phase: PhaseMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    pub h: Vec<Complex64>,
    /// `Z(f) = S(f)·H(f)`, zero outside the support.
    pub z: Vec<Complex64>,
    pub received_power: f64,
}

impl TransferFunction {
    /// Completes `Z` and `P_RX` from `H` using the spectrum.
    pub fn from_response(h: Vec<Complex64>, spec: &SignalSpectrum) -> Result<Self> {
        if h.len() != spec.len() {
            return Err(Error::GridMismatch {
                expected: spec.len(),
                actual: h.len(),
            });
        }
        let z: Vec<Complex64> = h
            .iter()
            .enumerate()
            .map(|(k, hk)| hk * spec.amplitude(k))
            .collect();
        let power: Vec<f64> = z.iter().map(|v| v.norm_sqr()).collect();
        let received_power = spec.band_integral(&power)?;
        Ok(Self {
            h,
            z,
            received_power,
        })
    }

    pub fn power_response(&self) -> Vec<f64> {
        self.h.iter().map(|v| v.norm_sqr()).collect()
    }
}

fn check_shapes(field: &IncidentField, resp: &IrsResponse, scene: &SceneGeometry) -> Result<()> {
    if field.n_points() != scene.num_points() {
        return Err(Error::GridMismatch {
            expected: scene.num_points(),
            actual: field.n_points(),
        });
    }
    if resp.phase.len() != field.n_points() {
        return Err(Error::GridMismatch {
            expected: field.n_points(),
            actual: resp.phase.len(),
        });
    }
    if resp.uncontrollable.len() != field.n_freqs() {
        return Err(Error::GridMismatch {
            expected: field.n_freqs(),
            actual: resp.uncontrollable.len(),
        });
    }
    Ok(())
}

/// Per-frequency factor `e^{j2πρ^UE f/c} / (√(4π) ρ^UE)` of point `p`.
#[inline]
pub(crate) fn ue_factor(scene: &SceneGeometry, p: usize, f: f64) -> Complex64 {
    let rho = scene.ue_distance(p);
    cis(std::f64::consts::TAU * rho * f / SPEED_OF_LIGHT) * (ISOTROPIC_GAIN / rho)
}

/// Integrand of `H(f)` at grid point `p`, before the cell-area weight.
pub fn scattered_component(
    field: &IncidentField,
    resp: &IrsResponse,
    scene: &SceneGeometry,
    p: usize,
) -> Result<Vec<Complex64>> {
    check_shapes(field, resp, scene)?;
    if p >= field.n_points() {
        return Err(Error::OutOfRange(format!(
            "grid point {p} outside a grid of {}",
            field.n_points()
        )));
    }
    let rot = cis(resp.phase.values()[p]);
    Ok(field
        .freqs()
        .iter()
        .enumerate()
        .map(|(k, &f)| resp.uncontrollable.0[k] * rot * ue_factor(scene, p, f) * field.get(p, k))
        .collect())
}

/// `H(f)` summed over the grid in row-major order with pairwise reduction.
pub fn transfer_function(
    field: &IncidentField,
    resp: &IrsResponse,
    scene: &SceneGeometry,
    spec: &SignalSpectrum,
) -> Result<TransferFunction> {
    check_shapes(field, resp, scene)?;
    if field.freqs() != spec.freqs() {
        return Err(Error::GridMismatch {
            expected: spec.len(),
            actual: field.n_freqs(),
        });
    }
    let area = scene.cell_area();
    let rot: Vec<Complex64> = resp.phase.values().iter().map(|&v| cis(v)).collect();
    let h: Vec<Complex64> = field
        .freqs()
        .par_iter()
        .enumerate()
        .map(|(k, &f)| {
            let terms: Vec<Complex64> = (0..field.n_points())
                .map(|p| rot[p] * ue_factor(scene, p, f) * field.get(p, k))
                .collect();
            pairwise_sum(&terms) * resp.uncontrollable.0[k] * area
        })
        .collect();
    TransferFunction::from_response(h, spec)
}

/// `H(f)` at a single, possibly off-grid, frequency.
pub fn transfer_at(
    field: &IncidentField,
    resp: &IrsResponse,
    scene: &SceneGeometry,
    f: f64,
) -> Result<Complex64> {
    check_shapes(field, resp, scene)?;
    let zeta = resp.uncontrollable.at_frequency(field.freqs(), f);
    let terms = (0..field.n_points())
        .map(|p| {
            let w = field.sample_at(scene, p, f)?;
            Ok(cis(resp.phase.values()[p]) * ue_factor(scene, p, f) * w)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(&terms) * zeta * scene.cell_area())
}
