//! IRS phase configuration techniques.

pub mod bound;
pub mod eigen;
pub mod local;
pub mod lsq;
pub mod narrowband;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bound::{upper_bound_at, upper_bound_envelope, upper_bound_phase};
pub use eigen::{configure_ed, EdKernel, EdOptions, EdOutcome};
pub use local::{
    alo_frequency_at, freq_alo, freq_slo, snell_gradient, FrequencyMap, FrequencySource,
    GradientField,
};
pub use lsq::{fit_phase_lsq, LsqOptions};
pub use narrowband::{configure_nb, configure_nbf};

use crate::error::{Error, Result};
use crate::geometry::SceneGeometry;
use crate::spectrum::SignalSpectrum;
use crate::wavefield::{BeamMode, IncidentField, PhaseMap, UncontrollableResponse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Technique {
    UB,
    NB,
    NBF,
    ED,
    SLO,
    ALO,
}

impl Technique {
    pub const ALL: [Technique; 6] = [
        Technique::UB,
        Technique::NB,
        Technique::NBF,
        Technique::ED,
        Technique::SLO,
        Technique::ALO,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Technique::UB => "UB",
            Technique::NB => "NB",
            Technique::NBF => "NBF",
            Technique::ED => "ED",
            Technique::SLO => "SLO",
            Technique::ALO => "ALO",
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Technique::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Scenario(format!("unknown technique {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfigureOptions {
    /// SLO window as a fraction of the bandwidth.
    pub slo_window_fraction: f64,
    /// Narrowband tuning frequency; the spectrum barycenter when absent.
    pub f_nb: Option<f64>,
    pub ed: EdOptions,
    pub lsq: LsqOptions,
}

impl Default for ConfigureOptions {
    fn default() -> Self {
        Self {
            slo_window_fraction: 0.1,
            f_nb: None,
            ed: EdOptions::default(),
            lsq: LsqOptions::default(),
        }
    }
}

/// Output of one configurator. `phase` is absent for UB, which is a
/// per-frequency bound rather than a single phase map.
#[derive(Debug, Clone)]
pub struct Configuration {
    pub technique: Technique,
    pub phase: Option<PhaseMap>,
    pub ed: Option<EdOutcome>,
    pub frequency_map: Option<FrequencyMap>,
}

/// SLO: sliding-window frequency map, Snell gradients, least-squares fit.
pub fn configure_slo(
    field: &IncidentField,
    scene: &SceneGeometry,
    spec: &SignalSpectrum,
    window: f64,
    lsq: &LsqOptions,
) -> Result<(PhaseMap, FrequencyMap)> {
    let fmap = freq_slo(field, spec, scene, window)?;
    let phase = fit_phase_lsq(&snell_gradient(scene, &fmap)?, lsq)?;
    Ok((phase, fmap))
}

/// ALO: closed-form frequency map, Snell gradients, least-squares fit.
pub fn configure_alo(
    scene: &SceneGeometry,
    spec: &SignalSpectrum,
    lsq: &LsqOptions,
) -> Result<(PhaseMap, FrequencyMap)> {
    let fmap = freq_alo(scene, spec);
    let phase = fit_phase_lsq(&snell_gradient(scene, &fmap)?, lsq)?;
    Ok((phase, fmap))
}

pub fn configure(
    technique: Technique,
    field: &IncidentField,
    zeta: &UncontrollableResponse,
    scene: &SceneGeometry,
    spec: &SignalSpectrum,
    opts: &ConfigureOptions,
) -> Result<Configuration> {
    let mut out = Configuration {
        technique,
        phase: None,
        ed: None,
        frequency_map: None,
    };
    let f_nb = || opts.f_nb.map_or_else(|| spec.barycenter(), Ok);
    match technique {
        Technique::UB => {}
        Technique::NB => out.phase = Some(configure_nb(field, zeta, scene, f_nb()?)?),
        Technique::NBF => out.phase = Some(configure_nbf(scene, f_nb()?)?),
        Technique::ED => {
            let (phase, outcome) = configure_ed(field, zeta, scene, spec, &opts.ed)?;
            out.phase = Some(phase);
            out.ed = Some(outcome);
        }
        Technique::SLO => {
            let window = opts.slo_window_fraction * spec.bandwidth();
            let (phase, fmap) = configure_slo(field, scene, spec, window, &opts.lsq)?;
            out.phase = Some(phase);
            out.frequency_map = Some(fmap);
        }
        Technique::ALO => {
            if !matches!(field.beamformer().map(|b| &b.mode), Some(BeamMode::Central)) {
                log::warn!("ALO assumes central beamforming; the frequency map ignores the actual beamformer");
            }
            let (phase, fmap) = configure_alo(scene, spec, &opts.lsq)?;
            out.phase = Some(phase);
            out.frequency_map = Some(fmap);
        }
    }
    Ok(out)
}
