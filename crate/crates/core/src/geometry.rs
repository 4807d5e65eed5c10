//! Scene geometry: AP planar array, IRS element grid and UE position.
//!
//! The IRS lies in the `z = 0` plane of the global frame with its center at
//! the origin. The AP array lives in the `x'-z'` plane of its local frame,
//! which is placed at `origin` and oriented by bearing, downtilt and slant.
//! All distances between AP elements, IRS grid points and the UE are computed
//! exactly (no far-field approximation) and cached at construction.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Rotation from the AP local frame to the global frame.
///
/// Composition is `Rz(bearing) · Ry(downtilt) · Rx(slant)`. The bearing and
/// downtilt factors are the usual right-handed rotations. The slant factor
/// uses the opposite sign, so that a positive slant tilts the array broadside
/// (local `y'`) towards `-z`, the same "positive is down" sense as a 3GPP
/// mechanical downtilt.
pub fn rotation_matrix(bearing: f64, downtilt: f64, slant: f64) -> Matrix3<f64> {
    let (sa, ca) = bearing.sin_cos();
    let (sb, cb) = downtilt.sin_cos();
    let (sg, cg) = slant.sin_cos();
    #[rustfmt::skip]
    let rz = Matrix3::new(
        ca, -sa, 0.0,
        sa,  ca, 0.0,
        0.0, 0.0, 1.0,
    );
    #[rustfmt::skip]
    let ry = Matrix3::new(
         cb, 0.0, sb,
        0.0, 1.0, 0.0,
        -sb, 0.0, cb,
    );
    #[rustfmt::skip]
    let rx = Matrix3::new(
        1.0, 0.0, 0.0,
        0.0,  cg,  sg,
        0.0, -sg,  cg,
    );
    rz * ry * rx
}

/// Spherical coordinates: radial distance, zenith angle from `+z`, azimuth
/// from `+x` in the `x-y` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spherical {
    pub rho: f64,
    pub theta: f64,
    pub psi: f64,
}

impl Spherical {
    pub fn from_cartesian(v: &Vec3) -> Self {
        let rho = v.norm();
        let theta = if rho > 0.0 {
            (v.z / rho).clamp(-1.0, 1.0).acos()
        } else {
            0.0
        };
        Self {
            rho,
            theta,
            psi: v.y.atan2(v.x),
        }
    }

    pub fn to_cartesian(&self) -> Vec3 {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.psi.sin_cos();
        Vec3::new(self.rho * st * cp, self.rho * st * sp, self.rho * ct)
    }

    /// In-plane components of the unit direction: `(sinθ cosψ, sinθ sinψ)`.
    pub fn tangential(&self) -> (f64, f64) {
        let st = self.theta.sin();
        (st * self.psi.cos(), st * self.psi.sin())
    }
}

/// Uniform planar array at the access point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApArraySpec {
    pub rows: usize,
    pub cols: usize,
    /// Element spacing in meters.
    pub spacing: f64,
    /// Array center in the global frame, meters.
    pub origin: [f64; 3],
    pub bearing: f64,
    pub downtilt: f64,
    pub slant: f64,
}

impl ApArraySpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Geometry(
                "AP array needs at least one row and column".into(),
            ));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::Geometry(format!(
                "AP element spacing must be positive, got {}",
                self.spacing
            )));
        }
        if self.origin.iter().any(|c| !c.is_finite())
            || ![self.bearing, self.downtilt, self.slant]
                .iter()
                .all(|a| a.is_finite())
        {
            return Err(Error::Geometry("AP pose must be finite".into()));
        }
        Ok(())
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rotation_matrix(self.bearing, self.downtilt, self.slant)
    }

    pub fn num_elements(&self) -> usize {
        self.rows * self.cols
    }

    /// Coordinates of element `(m, n)` in the array's own frame.
    pub fn local_position(&self, m: usize, n: usize) -> Result<Vec3> {
        if m >= self.rows || n >= self.cols {
            return Err(Error::OutOfRange(format!(
                "element ({m}, {n}) outside a {}x{} array",
                self.rows, self.cols
            )));
        }
        let x = (n as f64 - (self.cols as f64 - 1.0) / 2.0) * self.spacing;
        let z = (m as f64 - (self.rows as f64 - 1.0) / 2.0) * self.spacing;
        Ok(Vec3::new(x, 0.0, z))
    }

    /// Global coordinates `a_G + R·a_mn`.
    pub fn element_position(&self, m: usize, n: usize) -> Result<Vec3> {
        let local = self.local_position(m, n)?;
        Ok(Vec3::from(self.origin) + self.rotation() * local)
    }

    /// All element positions, row-major over `(m, n)`.
    pub fn element_positions(&self) -> Vec<Vec3> {
        let rot = self.rotation();
        let origin = Vec3::from(self.origin);
        let mut out = Vec::with_capacity(self.num_elements());
        for m in 0..self.rows {
            for n in 0..self.cols {
                // indices are in range by construction
                let local = self.local_position(m, n).expect("index in range");
                out.push(origin + rot * local);
            }
        }
        out
    }
}

/// Rectangular IRS of `lx × ly` meters populated with elements at `pitch`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrsGridSpec {
    pub lx: f64,
    pub ly: f64,
    pub pitch: f64,
    /// Keep every `decimation`-th element along each axis.
    pub decimation: usize,
}

impl IrsGridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lx > 0.0 && self.ly > 0.0) {
            return Err(Error::Geometry(format!(
                "IRS extent must be positive, got {} x {}",
                self.lx, self.ly
            )));
        }
        if !(self.pitch > 0.0 && self.pitch.is_finite()) {
            return Err(Error::Geometry(format!(
                "IRS element pitch must be positive, got {}",
                self.pitch
            )));
        }
        if self.decimation == 0 {
            return Err(Error::Geometry("decimation must be at least 1".into()));
        }
        let (nx, ny) = self.full_counts();
        if nx == 0 || ny == 0 {
            return Err(Error::Geometry(
                "IRS extent smaller than one element pitch".into(),
            ));
        }
        Ok(())
    }

    /// Element counts of the undecimated grid; partial elements are dropped.
    pub fn full_counts(&self) -> (usize, usize) {
        let count = |len: f64| ((len / self.pitch) * (1.0 + 1e-12)).floor() as usize;
        (count(self.lx), count(self.ly))
    }

    /// Element-center coordinates along one axis of the undecimated grid.
    fn full_axis(&self, len: f64, count: usize) -> Vec<f64> {
        (0..count)
            .map(|i| (i as f64 + 0.5) * self.pitch - len / 2.0)
            .collect()
    }

    pub fn grid(&self) -> Result<IrsGrid> {
        self.validate()?;
        let (nx_full, ny_full) = self.full_counts();
        let xs: Vec<f64> = self
            .full_axis(self.lx, nx_full)
            .into_iter()
            .step_by(self.decimation)
            .collect();
        let ys: Vec<f64> = self
            .full_axis(self.ly, ny_full)
            .into_iter()
            .step_by(self.decimation)
            .collect();
        Ok(IrsGrid {
            xs,
            ys,
            cell: self.pitch * self.decimation as f64,
        })
    }
}

/// Sampled IRS grid. Points are indexed row-major: `p = iy * nx + ix`.
#[derive(Debug, Clone, PartialEq)]
pub struct IrsGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Side of the square cell each sample represents (`d·Δ`).
    pub cell: f64,
}

impl IrsGrid {
    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn ny(&self) -> usize {
        self.ys.len()
    }

    pub fn len(&self) -> usize {
        self.xs.len() * self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx() + ix
    }

    pub fn coords(&self, p: usize) -> (f64, f64) {
        (self.xs[p % self.nx()], self.ys[p / self.nx()])
    }

    /// The cell whose phase is pinned to zero.
    pub fn center_index(&self) -> usize {
        self.index(self.nx() / 2, self.ny() / 2)
    }
}

/// Fully evaluated scene; immutable after construction.
#[derive(Debug, Clone)]
pub struct SceneGeometry {
    pub ap: ApArraySpec,
    pub irs: IrsGridSpec,
    pub ue: Vec3,
    grid: IrsGrid,
    elements: Vec<Vec3>,
    /// `ρ^AP_mn(p)`, point-major with `num_elements` entries per point.
    ap_distances: Vec<f64>,
    ue_distances: Vec<f64>,
    /// Array center and UE as seen from each grid point.
    ap_angles: Vec<Spherical>,
    ue_angles: Vec<Spherical>,
    /// `ρ^AP_mn` at the IRS center, the beam target.
    target_distances: Vec<f64>,
}

pub fn build_scene(ap: ApArraySpec, irs: IrsGridSpec, ue: [f64; 3]) -> Result<SceneGeometry> {
    ap.validate()?;
    let grid = irs.grid()?;
    let ue = Vec3::from(ue);
    if !ue.iter().all(|c| c.is_finite()) {
        return Err(Error::Geometry("UE position must be finite".into()));
    }
    if ue.z == 0.0 {
        return Err(Error::Geometry("UE lies on the IRS plane z = 0".into()));
    }
    let elements = ap.element_positions();
    if elements
        .iter()
        .any(|e| e.z == 0.0 && e.x.abs() <= irs.lx / 2.0 && e.y.abs() <= irs.ly / 2.0)
    {
        return Err(Error::Geometry(
            "an AP element lies on the IRS surface".into(),
        ));
    }
    let center = Vec3::from(ap.origin);
    let n_el = elements.len();

    let per_point: Vec<(Vec<f64>, f64, Spherical, Spherical)> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let (x, y) = grid.coords(p);
            let pos = Vec3::new(x, y, 0.0);
            let dists = elements.iter().map(|e| (pos - e).norm()).collect();
            let to_ue = ue - pos;
            (
                dists,
                to_ue.norm(),
                Spherical::from_cartesian(&(center - pos)),
                Spherical::from_cartesian(&to_ue),
            )
        })
        .collect();

    let mut ap_distances = Vec::with_capacity(grid.len() * n_el);
    let mut ue_distances = Vec::with_capacity(grid.len());
    let mut ap_angles = Vec::with_capacity(grid.len());
    let mut ue_angles = Vec::with_capacity(grid.len());
    for (d, u, a, b) in per_point {
        ap_distances.extend(d);
        ue_distances.push(u);
        ap_angles.push(a);
        ue_angles.push(b);
    }
    if ap_distances.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Geometry(
            "an AP element coincides with an IRS grid point".into(),
        ));
    }
    let target_distances = element_distances(&elements, &Vec3::zeros());

    Ok(SceneGeometry {
        ap,
        irs,
        ue,
        grid,
        elements,
        ap_distances,
        ue_distances,
        ap_angles,
        ue_angles,
        target_distances,
    })
}

fn element_distances(elements: &[Vec3], point: &Vec3) -> Vec<f64> {
    elements.iter().map(|e| (point - e).norm()).collect()
}

impl SceneGeometry {
    pub fn grid(&self) -> &IrsGrid {
        &self.grid
    }

    pub fn num_points(&self) -> usize {
        self.grid.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[Vec3] {
        &self.elements
    }

    /// Quadrature weight of one grid sample, `(d·Δ)²`.
    pub fn cell_area(&self) -> f64 {
        self.grid.cell * self.grid.cell
    }

    pub fn point(&self, p: usize) -> Vec3 {
        let (x, y) = self.grid.coords(p);
        Vec3::new(x, y, 0.0)
    }

    pub fn ap_distances(&self, p: usize) -> &[f64] {
        let n = self.num_elements();
        &self.ap_distances[p * n..(p + 1) * n]
    }

    pub fn ue_distance(&self, p: usize) -> f64 {
        self.ue_distances[p]
    }

    pub fn ap_angles(&self, p: usize) -> Spherical {
        self.ap_angles[p]
    }

    pub fn ue_angles(&self, p: usize) -> Spherical {
        self.ue_angles[p]
    }

    /// Element distances to the beam target (the IRS center).
    pub fn target_distances(&self) -> &[f64] {
        &self.target_distances
    }

    /// Element distances to an arbitrary point on the IRS plane.
    pub fn distances_to(&self, x: f64, y: f64) -> Vec<f64> {
        element_distances(&self.elements, &Vec3::new(x, y, 0.0))
    }

    /// Array center and UE angles as seen from an arbitrary IRS point.
    pub fn angles_at(&self, x: f64, y: f64) -> (Spherical, Spherical) {
        let pos = Vec3::new(x, y, 0.0);
        (
            Spherical::from_cartesian(&(Vec3::from(self.ap.origin) - pos)),
            Spherical::from_cartesian(&(self.ue - pos)),
        )
    }
}
