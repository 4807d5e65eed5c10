//! Narrowband configurations tuned to a single frequency.

use crate::configurators::bound::upper_bound_phase;
use crate::error::{Error, Result};
use crate::geometry::SceneGeometry;
use crate::wavefield::{IncidentField, PhaseMap, UncontrollableResponse};
use crate::SPEED_OF_LIGHT;

/// Exact (near-field) alignment of all scattered components at `f_nb`.
pub fn configure_nb(
    field: &IncidentField,
    zeta: &UncontrollableResponse,
    scene: &SceneGeometry,
    f_nb: f64,
) -> Result<PhaseMap> {
    let freqs = field.freqs();
    let (lo, hi) = (freqs[0], freqs[freqs.len() - 1]);
    if !(f_nb >= lo && f_nb <= hi) {
        return Err(Error::OutOfRange(format!(
            "narrowband frequency {f_nb} outside the grid [{lo}, {hi}]"
        )));
    }
    upper_bound_phase(field, zeta, scene, f_nb)
}

/// In-plane phase gradient from the generalized Snell law at frequency `f`
/// for the given AP-center and UE directions.
pub(crate) fn snell_gradient_at(
    f: f64,
    ap: &crate::geometry::Spherical,
    ue: &crate::geometry::Spherical,
) -> (f64, f64) {
    let k = std::f64::consts::TAU * f / SPEED_OF_LIGHT;
    let (ux, uy) = ue.tangential();
    let (ax, ay) = ap.tangential();
    (k * (ux + ax), k * (uy + ay))
}

/// Far-field linear phase plane steering the IRS center's incident
/// direction towards the UE at `f_nb`.
pub fn configure_nbf(scene: &SceneGeometry, f_nb: f64) -> Result<PhaseMap> {
    let (ap, ue) = scene.angles_at(0.0, 0.0);
    let (gx, gy) = snell_gradient_at(f_nb, &ap, &ue);
    let grid = scene.grid();
    let values = (0..grid.len())
        .map(|p| {
            let (x, y) = grid.coords(p);
            gx * x + gy * y
        })
        .collect();
    Ok(PhaseMap::from_grid(grid, values)?.pinned())
}
