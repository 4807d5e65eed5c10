//! Transmitted power spectrum `|S(f)|²`, its band support and the shared
//! frequency quadrature.
//!
//! Every technique and metric samples frequency on one uniform grid spanning
//! `[f0 - B/2, f0 + B/2]` endpoints included. Band gaps are carried by a mask;
//! the trapezoidal rule only integrates across segments whose two endpoints
//! are both in band, so gaps contribute nothing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Support of the spectrum as disjoint closed intervals inside the enclosing
/// band `[f0 - B/2, f0 + B/2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSet {
    pub f0: f64,
    pub bandwidth: f64,
    intervals: Vec<(f64, f64)>,
}

impl BandSet {
    pub fn new(f0: f64, bandwidth: f64, mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) || !(f0 > 0.0 && f0.is_finite()) {
            return Err(Error::Spectrum(format!(
                "need positive f0 and bandwidth, got f0 = {f0}, B = {bandwidth}"
            )));
        }
        if intervals.is_empty() {
            return Err(Error::Spectrum("band set is empty".into()));
        }
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (lo, hi) = (f0 - bandwidth / 2.0, f0 + bandwidth / 2.0);
        let slack = 1e-12 * bandwidth;
        for (i, &(a, b)) in intervals.iter().enumerate() {
            if !(b > a) {
                return Err(Error::Spectrum(format!("empty band [{a}, {b}]")));
            }
            if a < lo - slack || b > hi + slack {
                return Err(Error::Spectrum(format!(
                    "band [{a}, {b}] leaves the enclosing interval [{lo}, {hi}]"
                )));
            }
            if i > 0 && a <= intervals[i - 1].1 {
                return Err(Error::Spectrum("bands overlap".into()));
            }
        }
        Ok(Self {
            f0,
            bandwidth,
            intervals,
        })
    }

    /// `count` equal-width bands centered in the enclosing interval, each
    /// pair separated by a gap of `gap_fraction · B`.
    pub fn equal_split(f0: f64, bandwidth: f64, count: usize, gap_fraction: f64) -> Result<Self> {
        if !(1..=3).contains(&count) {
            return Err(Error::Spectrum(format!(
                "sub-band count must be 1, 2 or 3, got {count}"
            )));
        }
        if !(0.0..1.0 / count as f64).contains(&gap_fraction) {
            return Err(Error::Spectrum(format!(
                "gap fraction {gap_fraction} must lie in [0, 1/{count})"
            )));
        }
        let gap = if count == 1 {
            0.0
        } else {
            gap_fraction * bandwidth
        };
        let width = (bandwidth - (count - 1) as f64 * gap) / count as f64;
        let start = f0 - bandwidth / 2.0;
        let intervals = (0..count)
            .map(|k| {
                let a = start + k as f64 * (width + gap);
                let b = if k + 1 == count {
                    f0 + bandwidth / 2.0
                } else {
                    a + width
                };
                (a, b)
            })
            .collect();
        Self::new(f0, bandwidth, intervals)
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn enclosing(&self) -> (f64, f64) {
        (
            self.f0 - self.bandwidth / 2.0,
            self.f0 + self.bandwidth / 2.0,
        )
    }

    pub fn total_width(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    /// Membership with a `1e-12·B` tolerance so grid samples computed on
    /// a band edge count as in band.
    pub fn contains(&self, f: f64) -> bool {
        let eps = 1e-12 * self.bandwidth;
        self.intervals
            .iter()
            .any(|&(a, b)| f >= a - eps && f <= b + eps)
    }

    /// Nearest point of the support to `f` (itself when in band).
    pub fn nearest(&self, f: f64) -> f64 {
        let mut best = f64::NAN;
        let mut best_dist = f64::INFINITY;
        for &(a, b) in &self.intervals {
            let c = f.clamp(a, b);
            let d = (c - f).abs();
            if d < best_dist {
                best = c;
                best_dist = d;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpectrumShape {
    Flat,
    /// `|S(f)|² = 4|f - f0| / B²`, zero at the carrier.
    TriangularNotch,
    /// `(frequency Hz, power density)` pairs, linearly interpolated.
    Tabulated(Vec<(f64, f64)>),
}

pub fn triangular_notch_density(f: f64, f0: f64, bandwidth: f64) -> f64 {
    4.0 * (f - f0).abs() / (bandwidth * bandwidth)
}

fn interpolate(table: &[(f64, f64)], f: f64) -> f64 {
    match table.iter().position(|&(x, _)| x >= f) {
        None => table.last().map_or(0.0, |&(_, v)| v),
        Some(0) => table[0].1,
        Some(i) => {
            let (x0, y0) = table[i - 1];
            let (x1, y1) = table[i];
            if x1 == x0 {
                y1
            } else {
                y0 + (y1 - y0) * (f - x0) / (x1 - x0)
            }
        }
    }
}

/// `|S(f)|²` sampled on the common frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpectrum {
    pub bands: BandSet,
    pub shape: SpectrumShape,
    freqs: Vec<f64>,
    mask: Vec<bool>,
    weights: Vec<f64>,
    density: Vec<f64>,
}

pub fn make_spectrum(
    f0: f64,
    bandwidth: f64,
    shape: SpectrumShape,
    sub_band_count: usize,
    gap_fraction: f64,
    samples: usize,
) -> Result<SignalSpectrum> {
    let bands = BandSet::equal_split(f0, bandwidth, sub_band_count, gap_fraction)?;
    SignalSpectrum::from_bands(bands, shape, samples)
}

impl SignalSpectrum {
    pub fn from_bands(bands: BandSet, shape: SpectrumShape, samples: usize) -> Result<Self> {
        if samples < 2 {
            return Err(Error::Spectrum(format!(
                "need at least 2 samples, got {samples}"
            )));
        }
        let (lo, hi) = bands.enclosing();
        let step = (hi - lo) / (samples - 1) as f64;
        let freqs: Vec<f64> = (0..samples)
            .map(|k| {
                if k + 1 == samples {
                    hi
                } else {
                    lo + k as f64 * step
                }
            })
            .collect();
        let mask: Vec<bool> = freqs.iter().map(|&f| bands.contains(f)).collect();
        let eps = 1e-12 * bands.bandwidth;
        for &(a, b) in bands.intervals() {
            let inside = freqs
                .iter()
                .filter(|&&f| f >= a - eps && f <= b + eps)
                .count();
            if inside < 2 {
                return Err(Error::Spectrum(format!(
                    "band [{a:.6e}, {b:.6e}] holds {inside} frequency samples, need at least 2"
                )));
            }
        }
        let weights = trapezoid_weights(&freqs, &mask);
        let density = freqs
            .iter()
            .zip(&mask)
            .map(|(&f, &inside)| {
                if !inside {
                    return 0.0;
                }
                match &shape {
                    SpectrumShape::Flat => 1.0,
                    SpectrumShape::TriangularNotch => {
                        triangular_notch_density(f, bands.f0, bands.bandwidth)
                    }
                    SpectrumShape::Tabulated(t) => interpolate(t, f).max(0.0),
                }
            })
            .collect();
        let mut spec = Self {
            bands,
            shape,
            freqs,
            mask,
            weights,
            density,
        };
        spec.renormalize()?;
        Ok(spec)
    }

    /// Scale `|S|²` so the transmitted power is one.
    pub fn renormalize(&mut self) -> Result<()> {
        let p = self.transmit_power();
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::Spectrum("spectrum carries no power in band".into()));
        }
        for d in &mut self.density {
            *d /= p;
        }
        Ok(())
    }

    pub fn f0(&self) -> f64 {
        self.bands.f0
    }

    pub fn bandwidth(&self) -> f64 {
        self.bands.bandwidth
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Per-sample trapezoidal weights restricted to the in-band mask.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `|S(f)|²` per sample.
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// `|S(f)|` per sample; the phase of `S` is taken as zero.
    pub fn amplitude(&self, k: usize) -> f64 {
        self.density[k].sqrt()
    }

    pub fn transmit_power(&self) -> f64 {
        dot(&self.weights, &self.density)
    }

    pub fn band_integral(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.freqs.len() {
            return Err(Error::GridMismatch {
                expected: self.freqs.len(),
                actual: values.len(),
            });
        }
        Ok(dot(&self.weights, values))
    }

    /// Power-weighted mean frequency.
    pub fn barycenter(&self) -> Result<f64> {
        let p = self.transmit_power();
        if !(p > 0.0) {
            return Err(Error::Undefined(
                "barycenter of a zero-power spectrum".into(),
            ));
        }
        let fs: Vec<f64> = self
            .freqs
            .iter()
            .zip(&self.density)
            .map(|(f, s)| f * s)
            .collect();
        Ok(self.band_integral(&fs)? / p)
    }

    /// Index of the grid sample nearest to `f`.
    pub fn nearest_index(&self, f: f64) -> usize {
        let (lo, _) = self.bands.enclosing();
        let step = self.freqs[1] - self.freqs[0];
        let k = ((f - lo) / step).round();
        (k.max(0.0) as usize).min(self.freqs.len() - 1)
    }
}

fn trapezoid_weights(freqs: &[f64], mask: &[bool]) -> Vec<f64> {
    let mut w = vec![0.0; freqs.len()];
    for k in 0..freqs.len().saturating_sub(1) {
        if mask[k] && mask[k + 1] {
            let h = 0.5 * (freqs[k + 1] - freqs[k]);
            w[k] += h;
            w[k + 1] += h;
        }
    }
    w
}

/// Compensated (Neumaier) dot product.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for (x, y) in a.iter().zip(b) {
        let v = x * y;
        let t = sum + v;
        carry += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + carry
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const F0: f64 = 100e9;

    #[test]
    fn flat_single_band_is_one_over_b() {
        let b = 0.4 * F0;
        let s = make_spectrum(F0, b, SpectrumShape::Flat, 1, 0.0, 100).unwrap();
        assert_eq!(s.len(), 100);
        for &d in s.density() {
            assert_relative_eq!(d, 1.0 / b, max_relative = 1e-12);
        }
        assert_relative_eq!(s.transmit_power(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(
            s.band_integral(&vec![1.0; 100]).unwrap(),
            b,
            max_relative = 1e-12
        );
        assert_relative_eq!(s.barycenter().unwrap(), F0, max_relative = 1e-12);
    }

    #[test]
    fn two_band_mask_has_central_gap() {
        let b = 0.4 * F0;
        let s = make_spectrum(F0, b, SpectrumShape::Flat, 2, 0.05, 100).unwrap();
        let gap = (F0 - 0.025 * b, F0 + 0.025 * b);
        for (k, &f) in s.freqs().iter().enumerate() {
            let in_gap = f > gap.0 && f < gap.1;
            assert_eq!(s.mask()[k], !in_gap, "sample {k} at {f}");
            if in_gap {
                assert_eq!(s.density()[k], 0.0);
            }
        }
        assert!(s.mask().iter().filter(|m| !**m).count() >= 4);
        let bands = s.bands.intervals();
        assert_eq!(bands.len(), 2);
        assert_relative_eq!(
            bands[0].1 - bands[0].0,
            bands[1].1 - bands[1].0,
            max_relative = 1e-12
        );
        assert_relative_eq!(s.transmit_power(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn sub_band_width_bookkeeping() {
        let b = 0.3 * F0;
        for k in 1..=3 {
            let bands = BandSet::equal_split(F0, b, k, 0.05).unwrap();
            let expected = b * (1.0 - 0.05 * (k - 1) as f64);
            assert_relative_eq!(bands.total_width(), expected, max_relative = 1e-12);
            // masked quadrature measure differs by at most one grid step per band edge
            let s = SignalSpectrum::from_bands(bands, SpectrumShape::Flat, 400).unwrap();
            let measure = s.band_integral(&vec![1.0; 400]).unwrap();
            let step = b / 399.0;
            assert!((measure - expected).abs() <= 2.0 * k as f64 * step);
        }
    }

    #[test]
    fn triangular_notch_endpoints() {
        let b = 0.2 * F0;
        assert_eq!(triangular_notch_density(F0, F0, b), 0.0);
        assert_relative_eq!(
            triangular_notch_density(F0 + b / 2.0, F0, b),
            2.0 / b,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            triangular_notch_density(F0 - b / 2.0, F0, b),
            2.0 / b,
            max_relative = 1e-12
        );
        let s = make_spectrum(F0, b, SpectrumShape::TriangularNotch, 1, 0.0, 100).unwrap();
        assert_relative_eq!(s.transmit_power(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(s.barycenter().unwrap(), F0, max_relative = 1e-12);
    }

    #[test]
    fn barycenter_of_upper_half_band() {
        let b = 0.4 * F0;
        let bands = BandSet::new(F0, b, vec![(F0, F0 + b / 2.0)]).unwrap();
        // odd sample count puts f0 on the grid, so the band edges are samples
        let s = SignalSpectrum::from_bands(bands, SpectrumShape::Flat, 101).unwrap();
        assert_relative_eq!(s.barycenter().unwrap(), F0 + b / 4.0, max_relative = 1e-12);
    }

    #[test]
    fn band_integral_of_linear_moment_matches_antiderivative() {
        // asymmetric band [f0 - B/2, f0 + B/4]; flat density 1/w
        let b = 0.4 * F0;
        let (lo, hi) = (F0 - b / 2.0, F0 + b / 4.0);
        let bands = BandSet::new(F0, b, vec![(lo, hi)]).unwrap();
        // grid step B/(n-1) with n = 81 lands exactly on hi (lo + 60 steps)
        let s = SignalSpectrum::from_bands(bands, SpectrumShape::Flat, 81).unwrap();
        let g: Vec<f64> = s
            .freqs()
            .iter()
            .zip(s.density())
            .map(|(f, d)| f * d)
            .collect();
        let w = hi - lo;
        let exact = (hi * hi - lo * lo) / 2.0 / w;
        assert_relative_eq!(s.band_integral(&g).unwrap(), exact, max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_layouts() {
        assert!(make_spectrum(F0, 0.0, SpectrumShape::Flat, 1, 0.0, 100).is_err());
        assert!(make_spectrum(F0, 0.4 * F0, SpectrumShape::Flat, 4, 0.0, 100).is_err());
        assert!(make_spectrum(F0, 0.4 * F0, SpectrumShape::Flat, 2, 0.5, 100).is_err());
        assert!(make_spectrum(F0, 0.4 * F0, SpectrumShape::Flat, 1, 0.0, 1).is_err());
        // bands too narrow to hold a sample
        assert!(make_spectrum(F0, 0.4 * F0, SpectrumShape::Flat, 3, 0.33, 5).is_err());
        let s = make_spectrum(F0, 0.4 * F0, SpectrumShape::Flat, 1, 0.0, 10).unwrap();
        assert!(matches!(
            s.band_integral(&[1.0; 9]),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn nearest_point_of_support() {
        let bands = BandSet::equal_split(F0, 0.4 * F0, 3, 0.05).unwrap();
        let iv = bands.intervals().to_vec();
        let mid_gap = 0.5 * (iv[0].1 + iv[1].0);
        let f = bands.nearest(mid_gap - 1.0);
        assert_eq!(f, iv[0].1);
        assert_eq!(bands.nearest(0.5 * F0), iv[0].0);
        assert_eq!(bands.nearest(F0), F0);
    }

    proptest! {
        #[test]
        fn renormalization_is_idempotent(rel in 0.05..0.5f64, k in 1usize..=3, tri in any::<bool>()) {
            let shape = if tri { SpectrumShape::TriangularNotch } else { SpectrumShape::Flat };
            let s = make_spectrum(F0, rel * F0, shape, k, 0.05, 100).unwrap();
            let mut again = s.clone();
            again.renormalize().unwrap();
            for (a, b) in s.density().iter().zip(again.density()) {
                prop_assert!((a - b).abs() <= 1e-15 * a.abs());
            }
            let c = s.barycenter().unwrap();
            let (lo, hi) = (s.bands.intervals()[0].0, s.bands.intervals().last().unwrap().1);
            prop_assert!(c >= lo && c <= hi);
        }
    }
}
