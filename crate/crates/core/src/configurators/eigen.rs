//! Eigenvector-based configuration.
//!
//! With `Z̃(p, f)` the scattered component of point `p` for zero IRS phase,
//! the received power for a phase map `φ` is `‖A e^{jφ}‖²` where
//! `A[f, p] = √w_f · |S(f)| · Δ² · Z̃(p, f)` and `w_f` are the frequency
//! quadrature weights. The kernel `T = AᴴA` is Hermitian positive
//! semidefinite; its principal eigenvector is found by power iteration
//! without forming `T`, and only its phase is kept.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configurators::bound::check_zeta;
use crate::error::{Error, Result};
use crate::geometry::SceneGeometry;
use crate::numeric::pairwise_sum;
use crate::spectrum::SignalSpectrum;
use crate::wavefield::{ue_factor, IncidentField, PhaseMap, UncontrollableResponse};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdOptions {
    /// Stop when the relative change of the Rayleigh quotient drops below
    /// this value.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Seed for the random restart used when the all-ones start vector is
    /// annihilated by the kernel.
    pub seed: u64,
}

impl Default for EdOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 500,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdOutcome {
    pub iterations: usize,
    pub converged: bool,
    pub eigenvalue: f64,
    pub used_random_start: bool,
    pub rayleigh_history: Vec<f64>,
}

/// Matrix-free view of the received-power kernel.
#[derive(Debug, Clone)]
pub struct EdKernel {
    n_points: usize,
    /// Rows of `A` for frequencies with nonzero weight, frequency-major.
    rows: Vec<Vec<Complex64>>,
}

impl EdKernel {
    /// Kernel for arbitrary per-sample power weights `w_f·|S(f)|²`.
    pub fn with_weights(
        field: &IncidentField,
        zeta: &UncontrollableResponse,
        scene: &SceneGeometry,
        power_weights: &[f64],
    ) -> Result<Self> {
        check_zeta(field, zeta)?;
        if power_weights.len() != field.n_freqs() {
            return Err(Error::GridMismatch {
                expected: field.n_freqs(),
                actual: power_weights.len(),
            });
        }
        let area = scene.cell_area();
        let rows = (0..field.n_freqs())
            .into_par_iter()
            .filter(|&k| power_weights[k] > 0.0)
            .map(|k| {
                let f = field.freqs()[k];
                let scale = zeta.0[k] * (power_weights[k].sqrt() * area);
                (0..field.n_points())
                    .map(|p| scale * ue_factor(scene, p, f) * field.get(p, k))
                    .collect()
            })
            .collect();
        Ok(Self {
            n_points: field.n_points(),
            rows,
        })
    }

    pub fn new(
        field: &IncidentField,
        zeta: &UncontrollableResponse,
        scene: &SceneGeometry,
        spec: &SignalSpectrum,
    ) -> Result<Self> {
        let weights: Vec<f64> = spec
            .weights()
            .iter()
            .zip(spec.density())
            .map(|(w, s)| w * s)
            .collect();
        Self::with_weights(field, zeta, scene, &weights)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// `A v`.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.rows
            .par_iter()
            .map(|row| {
                let terms: Vec<Complex64> = row.iter().zip(v).map(|(a, x)| a * x).collect();
                pairwise_sum(&terms)
            })
            .collect()
    }

    /// `Aᴴ u`.
    pub fn apply_adjoint(&self, u: &[Complex64]) -> Vec<Complex64> {
        (0..self.n_points)
            .into_par_iter()
            .map(|p| {
                self.rows
                    .iter()
                    .zip(u)
                    .fold(Complex64::new(0.0, 0.0), |acc, (row, x)| {
                        acc + row[p].conj() * x
                    })
            })
            .collect()
    }

    /// `T v = Aᴴ(A v)`.
    pub fn apply_kernel(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.apply_adjoint(&self.apply(v))
    }

    /// `e^{-jφ}ᵀ T e^{jφ}`, equal to the received power for phase map `φ`.
    pub fn quadratic_form(&self, phase: &[f64]) -> f64 {
        let v: Vec<Complex64> = phase
            .iter()
            .map(|&p| Complex64::from_polar(1.0, p))
            .collect();
        self.apply(&v).iter().map(|z| z.norm_sqr()).sum()
    }

    /// Dense `T`, row-major `n_points × n_points`. Only for small grids.
    pub fn dense_kernel(&self) -> Vec<Complex64> {
        let n = self.n_points;
        let mut t = vec![Complex64::new(0.0, 0.0); n * n];
        for row in &self.rows {
            for i in 0..n {
                let ai = row[i].conj();
                for j in 0..n {
                    t[i * n + j] += ai * row[j];
                }
            }
        }
        t
    }

    /// Power iteration for the principal eigenvector.
    pub fn principal_eigenvector(&self, opts: &EdOptions) -> (Vec<Complex64>, EdOutcome) {
        let n = self.n_points;
        let mut v = vec![Complex64::new(1.0 / (n as f64).sqrt(), 0.0); n];
        let mut used_random_start = false;
        let mut w = self.apply_kernel(&v);
        if norm(&w) == 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            v = (0..n)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let s = norm(&v);
            v.iter_mut().for_each(|x| *x /= s);
            w = self.apply_kernel(&v);
            used_random_start = true;
        }

        let mut history = vec![rayleigh(&v, &w)];
        let mut converged = false;
        let mut iterations = 0;
        while iterations < opts.max_iterations {
            let s = norm(&w);
            if s == 0.0 {
                // zero kernel: every direction is principal
                converged = true;
                break;
            }
            v = w.iter().map(|x| x / s).collect();
            w = self.apply_kernel(&v);
            iterations += 1;
            let r = rayleigh(&v, &w);
            let prev = *history.last().expect("non-empty");
            history.push(r);
            if (r - prev).abs() <= opts.tolerance * r.abs() {
                converged = true;
                break;
            }
        }
        let eigenvalue = *history.last().expect("non-empty");
        (
            v,
            EdOutcome {
                iterations,
                converged,
                eigenvalue,
                used_random_start,
                rayleigh_history: history,
            },
        )
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn rayleigh(v: &[Complex64], tv: &[Complex64]) -> f64 {
    v.iter().zip(tv).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Phase of the principal eigenvector of the received-power kernel.
pub fn configure_ed(
    field: &IncidentField,
    zeta: &UncontrollableResponse,
    scene: &SceneGeometry,
    spec: &SignalSpectrum,
    opts: &EdOptions,
) -> Result<(PhaseMap, EdOutcome)> {
    let kernel = EdKernel::new(field, zeta, scene, spec)?;
    phase_from_kernel(&kernel, scene, opts)
}

pub fn phase_from_kernel(
    kernel: &EdKernel,
    scene: &SceneGeometry,
    opts: &EdOptions,
) -> Result<(PhaseMap, EdOutcome)> {
    let (v, outcome) = kernel.principal_eigenvector(opts);
    if !outcome.converged {
        log::warn!(
            "ED power iteration stopped after {} iterations without converging",
            outcome.iterations
        );
    }
    let values = v.iter().map(|z| z.arg()).collect();
    Ok((PhaseMap::from_grid(scene.grid(), values)?.pinned(), outcome))
}
