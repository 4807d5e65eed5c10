//! Received power, spectral distortion and their normalized forms.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::configurators::Technique;
use crate::error::{Error, Result};
use crate::spectrum::SignalSpectrum;
use crate::wavefield::TransferFunction;

/// Average received power spectral density `𝒫 = P_RX / B`.
pub fn avg_psd(tf: &TransferFunction, bandwidth: f64) -> f64 {
    tf.received_power / bandwidth
}

/// `σ = √(∫ |S|⁴ (|H|² − P_RX/P_TX)² df / B)`.
pub fn spectral_std(tf: &TransferFunction, spec: &SignalSpectrum) -> Result<f64> {
    let p_tx = spec.transmit_power();
    if !(p_tx > 0.0) {
        return Err(Error::Undefined(
            "spectral deviation of a zero-power spectrum".into(),
        ));
    }
    let mean_gain = tf.received_power / p_tx;
    let integrand: Vec<f64> =
        tf.h.iter()
            .zip(spec.density())
            .map(|(h, s2)| {
                let dev = h.norm_sqr() - mean_gain;
                s2 * s2 * dev * dev
            })
            .collect();
    Ok((spec.band_integral(&integrand)? / spec.bandwidth())
        .max(0.0)
        .sqrt())
}

/// `CV = σ / 𝒫`; `None` when the mean power is zero.
pub fn coefficient_of_variation(sigma: f64, psd: f64) -> Option<f64> {
    (psd > 0.0).then(|| sigma / psd)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub technique: Technique,
    /// Identifies the scene and spectrum the report was computed on.
    pub key: String,
    pub received_power: f64,
    pub avg_psd: f64,
    pub spectral_std: f64,
    pub cv: Option<f64>,
    /// `|Z(f)|²` per frequency sample.
    pub power_spectrum: Vec<f64>,
    pub avg_psd_norm: Option<f64>,
    pub cv_norm: Option<f64>,
    pub power_spectrum_norm: Option<Vec<f64>>,
}

impl MetricReport {
    pub fn evaluate(
        technique: Technique,
        key: impl Into<String>,
        tf: &TransferFunction,
        spec: &SignalSpectrum,
    ) -> Result<Self> {
        let psd = avg_psd(tf, spec.bandwidth());
        let sigma = spectral_std(tf, spec)?;
        Ok(Self {
            technique,
            key: key.into(),
            received_power: tf.received_power,
            avg_psd: psd,
            spectral_std: sigma,
            cv: coefficient_of_variation(sigma, psd),
            power_spectrum: tf.z.iter().map(|z| z.norm_sqr()).collect(),
            avg_psd_norm: None,
            cv_norm: None,
            power_spectrum_norm: None,
        })
    }

    /// Report for the upper bound from its envelope `|H_UB(f)|`.
    pub fn upper_bound(
        key: impl Into<String>,
        envelope: &[f64],
        spec: &SignalSpectrum,
    ) -> Result<Self> {
        let h = envelope.iter().map(|&a| Complex64::new(a, 0.0)).collect();
        let tf = TransferFunction::from_response(h, spec)?;
        Self::evaluate(Technique::UB, key, &tf, spec)
    }

    /// Fills the normalized fields relative to the upper-bound report.
    pub fn normalize(mut self, ub: &MetricReport) -> Result<Self> {
        if self.key != ub.key {
            return Err(Error::Scenario(format!(
                "cannot normalize a report for {} against an upper bound for {}",
                self.key, ub.key
            )));
        }
        if self.power_spectrum.len() != ub.power_spectrum.len() {
            return Err(Error::GridMismatch {
                expected: ub.power_spectrum.len(),
                actual: self.power_spectrum.len(),
            });
        }
        self.avg_psd_norm = (ub.avg_psd > 0.0).then(|| self.avg_psd / ub.avg_psd);
        self.cv_norm = match (self.cv, ub.cv) {
            (Some(a), Some(b)) if b > 0.0 => Some(a / b),
            _ => None,
        };
        let peak = ub.power_spectrum.iter().cloned().fold(0.0, f64::max);
        self.power_spectrum_norm =
            (peak > 0.0).then(|| self.power_spectrum.iter().map(|v| v / peak).collect());
        Ok(self)
    }
}
