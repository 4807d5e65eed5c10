//! Least-squares phase reconstruction from a target gradient.
//!
//! Every pair of horizontally or vertically adjacent samples forms an edge.
//! The edge's target increment is the spacing times the mean of the target
//! gradient at its two endpoints, which is exact for quadratic phases. The
//! minimizer of the summed squared edge mismatches solves a graph Laplacian
//! system (a discrete Poisson problem with natural boundaries), solved here
//! by conjugate gradients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configurators::local::GradientField;
use crate::error::{Error, Result};
use crate::wavefield::PhaseMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsqOptions {
    /// Target `‖r‖ / ‖b‖`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LsqOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 100_000,
        }
    }
}

/// Right-hand side `h·Dᵀt` of the normal equations, where `D` maps a grid
/// function to its edge differences and `t` holds the edge targets.
pub fn normal_rhs(grad: &GradientField) -> Vec<f64> {
    let (nx, ny, h) = (grad.nx, grad.ny, grad.spacing);
    let mut b = vec![0.0; nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            let p = iy * nx + ix;
            if ix + 1 < nx {
                let t = h * 0.5 * (grad.gx[p] + grad.gx[p + 1]);
                b[p + 1] += t;
                b[p] -= t;
            }
            if iy + 1 < ny {
                let t = h * 0.5 * (grad.gy[p] + grad.gy[p + nx]);
                b[p + nx] += t;
                b[p] -= t;
            }
        }
    }
    b
}

/// `DᵀD φ`: the grid-graph Laplacian with natural boundaries.
pub fn apply_laplacian(nx: usize, ny: usize, phi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; nx * ny];
    out.par_chunks_mut(nx).enumerate().for_each(|(iy, row)| {
        for (ix, o) in row.iter_mut().enumerate() {
            let p = iy * nx + ix;
            let c = phi[p];
            let mut acc = 0.0;
            if ix > 0 {
                acc += c - phi[p - 1];
            }
            if ix + 1 < nx {
                acc += c - phi[p + 1];
            }
            if iy > 0 {
                acc += c - phi[p - nx];
            }
            if iy + 1 < ny {
                acc += c - phi[p + nx];
            }
            *o = acc;
        }
    });
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Phase map whose edge differences best match `grad` in the least-squares
/// sense, pinned to zero at the center cell.
pub fn fit_phase_lsq(grad: &GradientField, opts: &LsqOptions) -> Result<PhaseMap> {
    let (nx, ny) = (grad.nx, grad.ny);
    if nx < 2 || ny < 2 {
        return Err(Error::OutOfRange(format!(
            "least-squares fit needs at least a 2x2 grid, got {nx}x{ny}"
        )));
    }
    let mut b = normal_rhs(grad);
    remove_mean(&mut b);
    let b_norm = dot(&b, &b).sqrt();
    let mut phi = vec![0.0; nx * ny];
    if b_norm > 0.0 {
        let mut r = b.clone();
        let mut d = r.clone();
        let mut rr = dot(&r, &r);
        let mut iterations = 0;
        while rr.sqrt() >= opts.tolerance * b_norm {
            if iterations == opts.max_iterations {
                return Err(Error::NotConverged {
                    iterations,
                    residual: rr.sqrt() / b_norm,
                });
            }
            let ld = apply_laplacian(nx, ny, &d);
            let alpha = rr / dot(&d, &ld);
            phi.iter_mut().zip(&d).for_each(|(x, di)| *x += alpha * di);
            r.iter_mut().zip(&ld).for_each(|(ri, li)| *ri -= alpha * li);
            remove_mean(&mut r);
            let rr_next = dot(&r, &r);
            let beta = rr_next / rr;
            d.iter_mut()
                .zip(&r)
                .for_each(|(di, ri)| *di = ri + beta * *di);
            rr = rr_next;
            iterations += 1;
        }
        log::debug!("phase fit converged in {iterations} CG iterations");
    }
    Ok(PhaseMap::new(nx, ny, phi)?.pinned())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplacian_annihilates_constants() {
        let v = vec![3.5; 12];
        assert!(apply_laplacian(4, 3, &v).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn recovers_a_plane() {
        let h = 0.1;
        let g = GradientField::sample(7, 5, h, |_, _| (2.0, -1.0)).unwrap();
        let phi = fit_phase_lsq(&g, &LsqOptions::default()).unwrap();
        for iy in 0..5 {
            for ix in 0..7 {
                let expect = 2.0 * (ix as f64 - 3.0) * h - (iy as f64 - 2.0) * h;
                assert!((phi.values()[iy * 7 + ix] - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_degenerate_grids() {
        let g = GradientField::sample(1, 4, 0.1, |_, _| (0.0, 0.0)).unwrap();
        assert!(fit_phase_lsq(&g, &LsqOptions::default()).is_err());
    }

    #[test]
    fn reports_non_convergence() {
        let g = GradientField::sample(20, 20, 0.1, |x, y| (x * y, x + y * y)).unwrap();
        let opts = LsqOptions {
            tolerance: 1e-14,
            max_iterations: 2,
        };
        assert!(matches!(
            fit_phase_lsq(&g, &opts),
            Err(Error::NotConverged { .. })
        ));
    }
}
