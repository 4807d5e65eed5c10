//! Per-frequency phase alignment: the unattainable upper bound on `|H(f)|`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::SceneGeometry;
use crate::numeric::pairwise_sum_real;
use crate::wavefield::{ue_factor, IncidentField, PhaseMap, UncontrollableResponse};
use crate::SPEED_OF_LIGHT;

pub(crate) fn check_zeta(field: &IncidentField, zeta: &UncontrollableResponse) -> Result<()> {
    if zeta.len() != field.n_freqs() {
        return Err(Error::GridMismatch {
            expected: field.n_freqs(),
            actual: zeta.len(),
        });
    }
    Ok(())
}

/// `|H_UB(f)|` on the field's frequency grid.
pub fn upper_bound_envelope(
    field: &IncidentField,
    zeta: &UncontrollableResponse,
    scene: &SceneGeometry,
) -> Result<Vec<f64>> {
    check_zeta(field, zeta)?;
    let area = scene.cell_area();
    Ok((0..field.n_freqs())
        .into_par_iter()
        .map(|k| {
            let f = field.freqs()[k];
            let terms: Vec<f64> = (0..field.n_points())
                .map(|p| (ue_factor(scene, p, f) * field.get(p, k)).norm())
                .collect();
            pairwise_sum_real(&terms) * zeta.0[k].norm() * area
        })
        .collect())
}

/// `|H_UB(f)|` at an arbitrary frequency.
pub fn upper_bound_at(
    field: &IncidentField,
    zeta: &UncontrollableResponse,
    scene: &SceneGeometry,
    f: f64,
) -> Result<f64> {
    check_zeta(field, zeta)?;
    let z = zeta.at_frequency(field.freqs(), f).norm();
    let terms = (0..field.n_points())
        .map(|p| Ok((ue_factor(scene, p, f) * field.sample_at(scene, p, f)?).norm()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum_real(&terms) * z * scene.cell_area())
}

/// `φ_UB(x, y, f) = -2πρ^UE f/c - arg{ζ̃(f) W(x, y, f)}`, pinned at the
/// center cell. Aligns every scattered component at frequency `f`.
pub fn upper_bound_phase(
    field: &IncidentField,
    zeta: &UncontrollableResponse,
    scene: &SceneGeometry,
    f: f64,
) -> Result<PhaseMap> {
    check_zeta(field, zeta)?;
    let z: Complex64 = zeta.at_frequency(field.freqs(), f);
    let values = (0..field.n_points())
        .map(|p| {
            let w = field.sample_at(scene, p, f)?;
            Ok(-std::f64::consts::TAU * scene.ue_distance(p) * f / SPEED_OF_LIGHT - (z * w).arg())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PhaseMap::from_grid(scene.grid(), values)?.pinned())
}
