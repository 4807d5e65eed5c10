//! Declarative scenario files (TOML, schema version 1).
//!
//! Lengths are in meters, angles in degrees and frequencies in multiples of
//! the carrier `f0`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::configurators::{ConfigureOptions, EdOptions, LsqOptions, Technique};
use crate::error::{Error, Result};
use crate::geometry::{build_scene, ApArraySpec, IrsGridSpec, SceneGeometry};
use crate::spectrum::{make_spectrum, BandSet, SignalSpectrum, SpectrumShape};
use crate::wavefield::{BeamMode, BeamformerSpec, Precision, SubBand, UncontrollableResponse};
use crate::SPEED_OF_LIGHT;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub carrier: Carrier,
    pub ap: ApSection,
    pub irs: IrsSection,
    pub ue: UeSection,
    #[serde(default)]
    pub beamformer: BeamformerSection,
    pub spectrum: SpectrumSection,
    pub sweep: SweepSection,
    pub configurators: ConfiguratorSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Carrier {
    pub f0_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApSection {
    pub rows: usize,
    pub cols: usize,
    /// Element spacing; half a carrier wavelength when absent.
    pub spacing_m: Option<f64>,
    pub position_m: [f64; 3],
    #[serde(default)]
    pub bearing_deg: f64,
    #[serde(default)]
    pub downtilt_deg: f64,
    #[serde(default)]
    pub slant_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrsSection {
    pub lx_m: f64,
    pub ly_m: f64,
    /// Element pitch; half a carrier wavelength when absent.
    pub pitch_m: Option<f64>,
    #[serde(default = "default_decimation")]
    pub decimation: usize,
    /// Uncontrollable response as `[f/f0, re, im]` rows; unity when absent.
    #[serde(default)]
    pub uncontrollable: Vec<[f64; 3]>,
}

fn default_decimation() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeSection {
    pub position_m: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeamformerKind {
    #[default]
    Central,
    Ideal,
    Hybrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridBand {
    pub lo: f64,
    pub hi: f64,
    pub tuned: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamformerSection {
    #[serde(default)]
    pub mode: BeamformerKind,
    /// Hybrid sub-bands in multiples of `f0`.
    #[serde(default)]
    pub sub_bands: Vec<HybridBand>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Flat,
    Triangular,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub shape: ShapeKind,
    #[serde(default = "one")]
    pub sub_bands: usize,
    /// Width of each gap as a fraction of `B`.
    #[serde(default = "default_gap")]
    pub gap_fraction: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// `[f/f0, |S|²]` rows for the tabulated shape.
    #[serde(default)]
    pub table: Vec<[f64; 2]>,
}

fn one() -> usize {
    1
}

fn default_gap() -> f64 {
    0.05
}

fn default_samples() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// Per-frequency `|Z_norm|²` at each bandwidth.
    Spectrum,
    /// Scalar metrics against bandwidth.
    Bandwidth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub kind: SweepKind,
    /// Bandwidths `B/f0`.
    #[serde(default)]
    pub bandwidths: Vec<f64>,
    /// `[start, stop, step]` in `B/f0`, expanded inclusively.
    pub range: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfiguratorSection {
    pub techniques: Vec<Technique>,
    #[serde(default = "default_window")]
    pub slo_window_fraction: f64,
    /// Narrowband tuning frequency in multiples of `f0`; the barycenter when
    /// absent.
    pub nb_frequency: Option<f64>,
    #[serde(default = "default_ed_tol")]
    pub ed_tolerance: f64,
    #[serde(default = "default_ed_iter")]
    pub ed_max_iterations: usize,
    #[serde(default = "default_lsq_tol")]
    pub lsq_tolerance: f64,
    #[serde(default = "default_lsq_iter")]
    pub lsq_max_iterations: usize,
}

fn default_window() -> f64 {
    0.1
}

fn default_ed_tol() -> f64 {
    EdOptions::default().tolerance
}

fn default_ed_iter() -> usize {
    EdOptions::default().max_iterations
}

fn default_lsq_tol() -> f64 {
    LsqOptions::default().tolerance
}

fn default_lsq_iter() -> usize {
    LsqOptions::default().max_iterations
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory, relative to the working directory.
    pub dir: Option<String>,
    #[serde(default)]
    pub precision: Precision,
    /// Also write each technique's phase map as CSV.
    #[serde(default)]
    pub phase_maps: bool,
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let scenario = parse_scenario(&text)?;
    let diagnostics = scenario.validate();
    if !diagnostics.is_empty() {
        return Err(Error::Scenario(diagnostics.join("; ")));
    }
    Ok(scenario)
}

/// Schema violations in the file at `path`; empty when it is valid.
pub fn validate_scenario(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(match parse_scenario(&text) {
        Ok(s) => s.validate(),
        Err(e) => vec![e.to_string()],
    })
}

fn expand_range([start, stop, step]: [f64; 3]) -> Vec<f64> {
    if !(step > 0.0) || !(stop >= start) {
        return Vec::new();
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

impl Scenario {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier.f0_hz
    }

    /// Bandwidths `B/f0` to run: the explicit list followed by the range.
    pub fn bandwidths(&self) -> Vec<f64> {
        let mut out = self.sweep.bandwidths.clone();
        if let Some(r) = self.sweep.range {
            out.extend(expand_range(r));
        }
        out
    }

    pub fn validate(&self) -> Vec<String> {
        let mut d = Vec::new();
        if self.version != SCHEMA_VERSION {
            d.push(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.version
            ));
        }
        if !(self.carrier.f0_hz > 0.0 && self.carrier.f0_hz.is_finite()) {
            d.push("carrier.f0_hz must be positive".into());
        }
        if self.ap.rows == 0 || self.ap.cols == 0 {
            d.push("ap.rows and ap.cols must be at least 1".into());
        }
        if matches!(self.ap.spacing_m, Some(s) if !(s > 0.0)) {
            d.push("ap.spacing_m must be positive".into());
        }
        if !(self.irs.lx_m > 0.0) {
            d.push(format!("irs.lx_m must be positive, got {}", self.irs.lx_m));
        }
        if !(self.irs.ly_m > 0.0) {
            d.push(format!("irs.ly_m must be positive, got {}", self.irs.ly_m));
        }
        if matches!(self.irs.pitch_m, Some(p) if !(p > 0.0)) {
            d.push("irs.pitch_m must be positive".into());
        }
        if self.irs.decimation == 0 {
            d.push("irs.decimation must be at least 1".into());
        }
        if self.ue.position_m[2] == 0.0 {
            d.push("ue.position_m must not lie on the IRS plane (z = 0)".into());
        }
        if self.beamformer.mode == BeamformerKind::Hybrid && self.beamformer.sub_bands.is_empty() {
            d.push("hybrid beamformer needs beamformer.sub_bands".into());
        }
        if !(1..=3).contains(&self.spectrum.sub_bands) {
            d.push("spectrum.sub_bands must be 1, 2 or 3".into());
        }
        let gap_limit = 1.0 / self.spectrum.sub_bands.max(1) as f64;
        if !(self.spectrum.gap_fraction >= 0.0 && self.spectrum.gap_fraction < gap_limit) {
            d.push(format!(
                "spectrum.gap_fraction must lie in [0, {gap_limit})"
            ));
        }
        if self.spectrum.samples < 2 {
            d.push("spectrum.samples must be at least 2".into());
        }
        if self.spectrum.shape == ShapeKind::Tabulated && self.spectrum.table.len() < 2 {
            d.push("tabulated spectrum needs at least two spectrum.table rows".into());
        }
        let bandwidths = self.bandwidths();
        if bandwidths.is_empty() {
            d.push("sweep needs at least one bandwidth".into());
        }
        for b in &bandwidths {
            if !(*b > 0.0 && *b <= 0.5) {
                d.push(format!("bandwidth {b} f0 outside (0, 0.5] f0"));
            }
        }
        if self.configurators.techniques.is_empty() {
            d.push("configurators.techniques must not be empty".into());
        }
        if !(self.configurators.slo_window_fraction > 0.0
            && self.configurators.slo_window_fraction <= 1.0)
        {
            d.push("configurators.slo_window_fraction must lie in (0, 1]".into());
        }
        if !(self.configurators.lsq_tolerance > 0.0) || !(self.configurators.ed_tolerance > 0.0) {
            d.push("solver tolerances must be positive".into());
        }
        d
    }

    pub fn ap_spec(&self) -> ApArraySpec {
        ApArraySpec {
            rows: self.ap.rows,
            cols: self.ap.cols,
            spacing: self.ap.spacing_m.unwrap_or(self.wavelength() / 2.0),
            origin: self.ap.position_m,
            bearing: self.ap.bearing_deg.to_radians(),
            downtilt: self.ap.downtilt_deg.to_radians(),
            slant: self.ap.slant_deg.to_radians(),
        }
    }

    pub fn irs_spec(&self) -> IrsGridSpec {
        IrsGridSpec {
            lx: self.irs.lx_m,
            ly: self.irs.ly_m,
            pitch: self.irs.pitch_m.unwrap_or(self.wavelength() / 2.0),
            decimation: self.irs.decimation,
        }
    }

    pub fn scene(&self) -> Result<SceneGeometry> {
        build_scene(self.ap_spec(), self.irs_spec(), self.ue.position_m)
    }

    pub fn spectrum(&self, relative_bandwidth: f64) -> Result<SignalSpectrum> {
        let f0 = self.carrier.f0_hz;
        let b = relative_bandwidth * f0;
        let shape = match self.spectrum.shape {
            ShapeKind::Flat => SpectrumShape::Flat,
            ShapeKind::Triangular => SpectrumShape::TriangularNotch,
            ShapeKind::Tabulated => SpectrumShape::Tabulated(
                self.spectrum
                    .table
                    .iter()
                    .map(|[f, s]| (f * f0, *s))
                    .collect(),
            ),
        };
        if self.spectrum.sub_bands == 1 {
            return make_spectrum(f0, b, shape, 1, 0.0, self.spectrum.samples);
        }
        let bands =
            BandSet::equal_split(f0, b, self.spectrum.sub_bands, self.spectrum.gap_fraction)?;
        SignalSpectrum::from_bands(bands, shape, self.spectrum.samples)
    }

    pub fn beamformer(&self) -> BeamformerSpec {
        let f0 = self.carrier.f0_hz;
        let mode = match self.beamformer.mode {
            BeamformerKind::Central => BeamMode::Central,
            BeamformerKind::Ideal => BeamMode::Ideal,
            BeamformerKind::Hybrid => BeamMode::Hybrid(
                self.beamformer
                    .sub_bands
                    .iter()
                    .map(|s| SubBand {
                        lo: s.lo * f0,
                        hi: s.hi * f0,
                        tuned: s.tuned * f0,
                    })
                    .collect(),
            ),
        };
        BeamformerSpec { mode }
    }

    pub fn uncontrollable(&self, spec: &SignalSpectrum) -> Result<UncontrollableResponse> {
        if self.irs.uncontrollable.is_empty() {
            return Ok(UncontrollableResponse::unit(spec.len()));
        }
        let f0 = self.carrier.f0_hz;
        let table: Vec<_> = self
            .irs
            .uncontrollable
            .iter()
            .map(|[f, re, im]| (f * f0, num_complex::Complex64::new(*re, *im)))
            .collect();
        UncontrollableResponse::from_table(spec.freqs(), &table)
    }

    pub fn configure_options(&self) -> ConfigureOptions {
        let c = &self.configurators;
        ConfigureOptions {
            slo_window_fraction: c.slo_window_fraction,
            f_nb: c.nb_frequency.map(|f| f * self.carrier.f0_hz),
            ed: EdOptions {
                tolerance: c.ed_tolerance,
                max_iterations: c.ed_max_iterations,
                seed: self.seed,
            },
            lsq: LsqOptions {
                tolerance: c.lsq_tolerance,
                max_iterations: c.lsq_max_iterations,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEFAULT: &str = r#"
version = 1
name = "t"

[carrier]
f0_hz = 100e9

[ap]
rows = 64
cols = 4
position_m = [0.0, -2.0, 1.0]
slant_deg = 60.0

[irs]
lx_m = 0.2
ly_m = 1.0

[ue]
position_m = [0.0, 1.0, 2.0]

[spectrum]
shape = "flat"

[sweep]
kind = "spectrum"
bandwidths = [0.4]

[configurators]
techniques = ["UB", "NB", "NBF", "ED", "SLO", "ALO"]
"#;

    #[test]
    fn default_file_has_no_diagnostics() {
        let s = parse_scenario(DEFAULT).unwrap();
        assert!(s.validate().is_empty(), "{:?}", s.validate());
        assert_eq!(s.irs.decimation, 4);
        assert_eq!(s.spectrum.samples, 100);
        let (nx, ny) = s.irs_spec().full_counts();
        assert_eq!((nx, ny), (133, 667));
    }

    #[test]
    fn negative_extent_gives_one_diagnostic() {
        let s = parse_scenario(&DEFAULT.replace("lx_m = 0.2", "lx_m = -0.2")).unwrap();
        assert_eq!(s.validate().len(), 1);
    }

    #[test]
    fn oversized_bandwidth_is_flagged() {
        let s = parse_scenario(&DEFAULT.replace("[0.4]", "[0.6]")).unwrap();
        let d = s.validate();
        assert_eq!(d.len(), 1);
        assert!(d[0].contains("outside"));
    }

    #[test]
    fn empty_technique_list_is_flagged() {
        let text = DEFAULT.replace(r#"["UB", "NB", "NBF", "ED", "SLO", "ALO"]"#, "[]");
        assert_eq!(parse_scenario(&text).unwrap().validate().len(), 1);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_scenario(&DEFAULT.replace("[ue]", "[ue]\nspeed = 3")).is_err());
    }

    #[test]
    fn range_expands_inclusively() {
        assert_eq!(expand_range([0.1, 0.4, 0.05]).len(), 7);
        let r = expand_range([0.1, 0.4, 0.025]);
        assert_eq!(r.len(), 13);
        assert!((r[12] - 0.4).abs() < 1e-12);
    }
}
