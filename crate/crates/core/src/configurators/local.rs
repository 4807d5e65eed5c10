//! Per-point frequency maps and the Snell gradients they induce.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configurators::narrowband::snell_gradient_at;
use crate::error::{Error, Result};
use crate::geometry::SceneGeometry;
use crate::spectrum::SignalSpectrum;
use crate::wavefield::{IncidentField, ISOTROPIC_GAIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencySource {
    Slo,
    Alo,
    Constant,
}

/// `f(x, y)`, the frequency each IRS point is tuned to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyMap {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
    pub source: FrequencySource,
}

impl FrequencyMap {
    pub fn constant(scene: &SceneGeometry, f: f64) -> Self {
        let grid = scene.grid();
        Self {
            nx: grid.nx(),
            ny: grid.ny(),
            values: vec![f; grid.len()],
            source: FrequencySource::Constant,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|f| f * factor).collect(),
            ..self.clone()
        }
    }
}

/// Sliding-window argmax of the locally received power.
///
/// `Q_w(p, ν)` sums `|S|²|W|²` with the spectrum's quadrature weights over
/// the samples within `w/2` of `ν`; `ν` runs over the in-band samples.
/// Near-ties (within `1e-12` relative) go to the `ν` nearest `f0`, then to
/// the lower `ν`.
pub fn freq_slo(
    field: &IncidentField,
    spec: &SignalSpectrum,
    scene: &SceneGeometry,
    window: f64,
) -> Result<FrequencyMap> {
    if !(window > 0.0 && window <= spec.bandwidth() * (1.0 + 1e-12)) {
        return Err(Error::OutOfRange(format!(
            "window {window} must lie in (0, B = {}]",
            spec.bandwidth()
        )));
    }
    if field.freqs() != spec.freqs() || field.n_points() != scene.num_points() {
        return Err(Error::GridMismatch {
            expected: spec.len(),
            actual: field.n_freqs(),
        });
    }
    let freqs = spec.freqs();
    let f0 = spec.f0();
    let half = window / 2.0 * (1.0 + 1e-12);
    let candidates: Vec<usize> = (0..freqs.len()).filter(|&k| spec.mask()[k]).collect();
    let windows: Vec<Vec<usize>> = candidates
        .iter()
        .map(|&c| {
            (0..freqs.len())
                .filter(|&k| (freqs[k] - freqs[c]).abs() <= half && spec.weights()[k] > 0.0)
                .collect()
        })
        .collect();
    let power: Vec<f64> = spec
        .weights()
        .iter()
        .zip(spec.density())
        .map(|(w, s)| w * s)
        .collect();

    let values = (0..field.n_points())
        .into_par_iter()
        .map(|p| {
            let q: Vec<f64> = windows
                .iter()
                .map(|win| {
                    win.iter()
                        .map(|&k| power[k] * field.get(p, k).norm_sqr())
                        .sum()
                })
                .collect();
            let q_max = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut best: Option<f64> = None;
            for (i, &c) in candidates.iter().enumerate() {
                if q[i] < q_max - 1e-12 * q_max.abs() {
                    continue;
                }
                let nu = freqs[c];
                best = match best {
                    Some(b) if (b - f0).abs() <= (nu - f0).abs() => Some(b),
                    _ => Some(nu),
                };
            }
            best.unwrap_or(f0)
        })
        .collect();
    let grid = scene.grid();
    Ok(FrequencyMap {
        nx: grid.nx(),
        ny: grid.ny(),
        values,
        source: FrequencySource::Slo,
    })
}

/// Closed-form maximizer of the second-order expansion of `|W(p, f)|²`
/// under central beamforming towards the IRS center, before clamping.
///
/// Written as a weighted covariance of element distances at `p` and at the
/// center, which equals the pairwise-difference form and avoids its
/// cancellation. Returns `f0` when all distances at `p` coincide.
pub fn alo_frequency_at(distances: &[f64], target_distances: &[f64], f0: f64) -> f64 {
    let eta: Vec<f64> = distances.iter().map(|r| ISOTROPIC_GAIN / r).collect();
    let total: f64 = eta.iter().sum();
    let a_mean = eta.iter().zip(distances).map(|(e, a)| e * a).sum::<f64>() / total;
    let b_mean = eta
        .iter()
        .zip(target_distances)
        .map(|(e, b)| e * b)
        .sum::<f64>()
        / total;
    let mut num = 0.0;
    let mut den = 0.0;
    for ((e, a), b) in eta.iter().zip(distances).zip(target_distances) {
        let da = a - a_mean;
        num += e * da * (b - b_mean);
        den += e * da * da;
    }
    if !(den > 1e-20 * total * a_mean * a_mean) {
        return f0;
    }
    f0 * num / den
}

/// ALO frequency map, clamped to the nearest point of the spectrum support.
pub fn freq_alo(scene: &SceneGeometry, spec: &SignalSpectrum) -> FrequencyMap {
    let f0 = spec.f0();
    let target = scene.target_distances();
    let values = (0..scene.num_points())
        .into_par_iter()
        .map(|p| {
            spec.bands
                .nearest(alo_frequency_at(scene.ap_distances(p), target, f0))
        })
        .collect();
    let grid = scene.grid();
    FrequencyMap {
        nx: grid.nx(),
        ny: grid.ny(),
        values,
        source: FrequencySource::Alo,
    }
}

/// Target phase gradient `(φ_x, φ_y)` per grid point, rad/m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientField {
    pub nx: usize,
    pub ny: usize,
    /// Grid spacing, m.
    pub spacing: f64,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl GradientField {
    pub fn new(nx: usize, ny: usize, spacing: f64, gx: Vec<f64>, gy: Vec<f64>) -> Result<Self> {
        if gx.len() != nx * ny || gy.len() != nx * ny {
            return Err(Error::GridMismatch {
                expected: nx * ny,
                actual: gx.len().min(gy.len()),
            });
        }
        if !(spacing > 0.0) {
            return Err(Error::OutOfRange(format!(
                "grid spacing {spacing} must be positive"
            )));
        }
        if gx.iter().chain(&gy).any(|g| !g.is_finite()) {
            return Err(Error::OutOfRange(
                "gradient field has non-finite entries".into(),
            ));
        }
        Ok(Self {
            nx,
            ny,
            spacing,
            gx,
            gy,
        })
    }

    /// Samples an analytic field `g(x, y)` on a centered `nx × ny` grid.
    pub fn sample(
        nx: usize,
        ny: usize,
        spacing: f64,
        g: impl Fn(f64, f64) -> (f64, f64),
    ) -> Result<Self> {
        let (mut gx, mut gy) = (Vec::with_capacity(nx * ny), Vec::with_capacity(nx * ny));
        for iy in 0..ny {
            for ix in 0..nx {
                let x = (ix as f64 + 0.5) * spacing - nx as f64 * spacing / 2.0;
                let y = (iy as f64 + 0.5) * spacing - ny as f64 * spacing / 2.0;
                let (a, b) = g(x, y);
                gx.push(a);
                gy.push(b);
            }
        }
        Self::new(nx, ny, spacing, gx, gy)
    }
}

/// Generalized-Snell gradient at every point, using the local angles of
/// the array center and the UE and the frequency from `fmap`.
pub fn snell_gradient(scene: &SceneGeometry, fmap: &FrequencyMap) -> Result<GradientField> {
    let grid = scene.grid();
    if fmap.values.len() != grid.len() {
        return Err(Error::GridMismatch {
            expected: grid.len(),
            actual: fmap.values.len(),
        });
    }
    let (gx, gy): (Vec<f64>, Vec<f64>) = (0..grid.len())
        .map(|p| snell_gradient_at(fmap.values[p], &scene.ap_angles(p), &scene.ue_angles(p)))
        .unzip();
    GradientField::new(grid.nx(), grid.ny(), grid.cell, gx, gy)
}
