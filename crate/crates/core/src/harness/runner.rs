//! Executes a scenario and writes its CSV and JSON artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configurators::{configure, upper_bound_envelope, EdOutcome, Technique};
use crate::error::{Error, Result};
use crate::geometry::SceneGeometry;
use crate::harness::cache::FieldCache;
use crate::harness::scenario::{Scenario, SweepKind};
use crate::harness::{sha256_hex, write_atomic};
use crate::metrics::MetricReport;
use crate::wavefield::{
    incident_field_with_precision, transfer_function, IncidentField, IrsResponse, PhaseMap,
    Precision,
};

/// Command-line overrides applied on top of the scenario file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub decimation: Option<usize>,
    pub precision: Option<Precision>,
    /// Replaces the scenario's bandwidth list (`B/f0`).
    pub bandwidths: Option<Vec<f64>>,
    /// Forces the metric-vs-bandwidth layout.
    pub sweep: bool,
    pub cache: Option<FieldCache>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub bandwidth: f64,
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdStats {
    pub bandwidth: f64,
    pub iterations: usize,
    pub converged: bool,
    pub eigenvalue: f64,
    pub used_random_start: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub bandwidth: f64,
    pub technique: Technique,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: String,
    pub schema_version: u32,
    pub config_hash: String,
    pub crate_version: String,
    pub threads: usize,
    pub grid: [usize; 2],
    pub precision: Precision,
    pub total_seconds: f64,
    pub timings: Vec<Timing>,
    pub ed: Vec<EdStats>,
    pub failures: Vec<Failure>,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub reports: Vec<BandReports>,
}

impl RunSummary {
    /// True when every phase fit converged.
    pub fn converged(&self) -> bool {
        self.manifest.failures.is_empty()
    }
}

/// Normalized reports for one bandwidth, in the scenario's technique order.
#[derive(Debug, Clone, Serialize)]
pub struct BandReports {
    pub bandwidth: f64,
    #[serde(skip)]
    pub freqs: Vec<f64>,
    #[serde(skip)]
    pub mask: Vec<bool>,
    pub reports: Vec<(Technique, Option<MetricReport>)>,
    #[serde(skip)]
    pub phases: Vec<(Technique, PhaseMap)>,
}

impl BandReports {
    pub fn report(&self, t: Technique) -> Option<&MetricReport> {
        self.reports
            .iter()
            .find(|(u, _)| *u == t)
            .and_then(|(_, r)| r.as_ref())
    }
}

struct BandOutcome {
    reports: BandReports,
    timings: Vec<Timing>,
    ed: Option<EdStats>,
    failures: Vec<Failure>,
}

fn load_or_compute_field(
    scenario: &Scenario,
    scene: &SceneGeometry,
    spec: &crate::spectrum::SignalSpectrum,
    cache: Option<&FieldCache>,
) -> Result<IncidentField> {
    let bf = scenario.beamformer();
    let precision = scenario.output.precision;
    let key = crate::wavefield::field_key(scene, &bf, spec, precision);
    if let Some(cache) = cache {
        match cache.load(&key) {
            Ok(Some(field)) => {
                log::info!("field cache hit {}", &key[..12]);
                return Ok(field.with_source(bf, spec.f0()));
            }
            Ok(None) => {}
            Err(e) => log::warn!("ignoring unreadable cache entry: {e}"),
        }
    }
    let field = incident_field_with_precision(scene, &bf, spec, precision)?;
    if let Some(cache) = cache {
        if let Err(e) = cache.store(&field) {
            log::warn!("could not write field cache: {e}");
        }
    }
    Ok(field)
}

fn run_bandwidth(
    scenario: &Scenario,
    scene: &SceneGeometry,
    rel_b: f64,
    cache: Option<&FieldCache>,
) -> Result<BandOutcome> {
    let mut timings = Vec::new();
    let mut stamp = |stage: &str, start: Instant| {
        timings.push(Timing {
            bandwidth: rel_b,
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        })
    };

    let spec = scenario.spectrum(rel_b)?;
    let start = Instant::now();
    let field = load_or_compute_field(scenario, scene, &spec, cache)?;
    stamp("field", start);
    let zeta = scenario.uncontrollable(&spec)?;
    let key = field.key().to_string();

    let start = Instant::now();
    let envelope = upper_bound_envelope(&field, &zeta, scene)?;
    let ub = MetricReport::upper_bound(key.clone(), &envelope, &spec)?;
    stamp("UB", start);

    let opts = scenario.configure_options();
    let outcomes: Vec<(Technique, Result<Option<Configured>>, f64)> = scenario
        .configurators
        .techniques
        .par_iter()
        .map(|&t| {
            let start = Instant::now();
            let result = (|| {
                if t == Technique::UB {
                    return Ok(None);
                }
                let cfg = configure(t, &field, &zeta, scene, &spec, &opts)?;
                let phase = cfg.phase.expect("phase map for a non-UB technique");
                let resp = IrsResponse {
                    uncontrollable: zeta.clone(),
                    phase,
                };
                let tf = transfer_function(&field, &resp, scene, &spec)?;
                let report = MetricReport::evaluate(t, key.clone(), &tf, &spec)?.normalize(&ub)?;
                Ok(Some((report, resp.phase, cfg.ed)))
            })();
            (t, result, start.elapsed().as_secs_f64())
        })
        .collect();

    let mut reports = Vec::new();
    let mut phases = Vec::new();
    let mut failures = Vec::new();
    let mut ed = None;
    for (t, result, seconds) in outcomes {
        match result {
            Ok(None) => reports.push((t, Some(ub.clone().normalize(&ub)?))),
            Ok(Some((report, phase, outcome))) => {
                if let Some(o) = outcome {
                    ed = Some(EdStats {
                        bandwidth: rel_b,
                        iterations: o.iterations,
                        converged: o.converged,
                        eigenvalue: o.eigenvalue,
                        used_random_start: o.used_random_start,
                    });
                }
                reports.push((t, Some(report)));
                phases.push((t, phase));
            }
            Err(e @ Error::NotConverged { .. }) => {
                log::error!("{t} at B = {rel_b} f0: {e}");
                failures.push(Failure {
                    bandwidth: rel_b,
                    technique: t,
                    message: e.to_string(),
                });
                reports.push((t, None));
            }
            Err(e) => return Err(e),
        }
        if t != Technique::UB {
            timings.push(Timing {
                bandwidth: rel_b,
                stage: t.to_string(),
                seconds,
            });
        }
    }
    Ok(BandOutcome {
        reports: BandReports {
            bandwidth: rel_b,
            freqs: spec.freqs().to_vec(),
            mask: spec.mask().to_vec(),
            reports,
            phases,
        },
        timings,
        ed,
        failures,
    })
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.9e}"))
}

type Configured = (MetricReport, PhaseMap, Option<EdOutcome>);

pub fn bandwidth_label(rel_b: f64) -> String {
    format!("{rel_b:.3}")
}

/// `f/f0` followed by `|Z_norm|²` per technique; out-of-band rows omitted.
pub fn spectrum_csv(band: &BandReports, f0: f64) -> String {
    let mut s = String::from("f/f0");
    for (t, _) in &band.reports {
        let _ = write!(s, ",{t}");
    }
    s.push('\n');
    for (k, f) in band.freqs.iter().enumerate() {
        if !band.mask[k] {
            continue;
        }
        let _ = write!(s, "{:.6}", f / f0);
        for (_, r) in &band.reports {
            let v = r
                .as_ref()
                .and_then(|r| r.power_spectrum_norm.as_ref())
                .map(|z| z[k]);
            let _ = write!(s, ",{}", fmt_value(v));
        }
        s.push('\n');
    }
    s
}

/// `B/f0` followed by `P_norm` and `CV_norm` per technique.
pub fn sweep_csv(bands: &[BandReports]) -> String {
    let mut s = String::from("B/f0");
    if let Some(first) = bands.first() {
        for (t, _) in &first.reports {
            let _ = write!(s, ",P_norm_{t},CV_norm_{t}");
        }
    }
    s.push('\n');
    for band in bands {
        let _ = write!(s, "{:.6}", band.bandwidth);
        for (_, r) in &band.reports {
            let _ = write!(
                s,
                ",{},{}",
                fmt_value(r.as_ref().and_then(|r| r.avg_psd_norm)),
                fmt_value(r.as_ref().and_then(|r| r.cv_norm))
            );
        }
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct MetricsEntry<'a> {
    technique: Technique,
    received_power: f64,
    avg_psd: f64,
    spectral_std: f64,
    cv: Option<f64>,
    avg_psd_norm: Option<f64>,
    cv_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    failed: Option<&'a str>,
}

fn metrics_json(bands: &[BandReports]) -> Result<String> {
    let doc: Vec<serde_json::Value> = bands
        .iter()
        .map(|band| {
            let entries: Vec<serde_json::Value> = band
                .reports
                .iter()
                .map(|(t, r)| {
                    let e = match r {
                        Some(r) => MetricsEntry {
                            technique: *t,
                            received_power: r.received_power,
                            avg_psd: r.avg_psd,
                            spectral_std: r.spectral_std,
                            cv: r.cv,
                            avg_psd_norm: r.avg_psd_norm,
                            cv_norm: r.cv_norm,
                            failed: None,
                        },
                        None => MetricsEntry {
                            technique: *t,
                            received_power: f64::NAN,
                            avg_psd: f64::NAN,
                            spectral_std: f64::NAN,
                            cv: None,
                            avg_psd_norm: None,
                            cv_norm: None,
                            failed: Some("phase fit did not converge"),
                        },
                    };
                    serde_json::to_value(e).expect("serializable")
                })
                .collect();
            serde_json::json!({ "bandwidth": band.bandwidth, "techniques": entries })
        })
        .collect();
    Ok(serde_json::to_string_pretty(&doc).map_err(|e| Error::Scenario(e.to_string()))? + "\n")
}

fn resolve(scenario: &Scenario, opts: &RunOptions) -> Result<(Scenario, PathBuf)> {
    let mut s = scenario.clone();
    if let Some(d) = opts.decimation {
        s.irs.decimation = d;
    }
    if let Some(p) = opts.precision {
        s.output.precision = p;
    }
    if let Some(b) = &opts.bandwidths {
        s.sweep.bandwidths = b.clone();
        s.sweep.range = None;
    }
    if opts.sweep {
        s.sweep.kind = SweepKind::Bandwidth;
    }
    let diagnostics = s.validate();
    if !diagnostics.is_empty() {
        return Err(Error::Scenario(diagnostics.join("; ")));
    }
    let out = opts
        .out_dir
        .clone()
        .or_else(|| s.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| {
            PathBuf::from("out").join(if s.name.is_empty() { "run" } else { &s.name })
        });
    Ok((s, out))
}

struct ArtifactWriter<'a> {
    dir: &'a Path,
    artifacts: Vec<Artifact>,
}

impl ArtifactWriter<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.artifacts.push(Artifact {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }
}

/// Runs every bandwidth and technique of the scenario and writes
/// `spectrum_<B>.csv`, `sweep.csv`, `metrics.json` and `manifest.json`
/// into the output directory. Phase-fit failures are recorded and the
/// remaining outputs are still written.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunSummary> {
    let total = Instant::now();
    let (scenario, out_dir) = resolve(scenario, opts)?;
    let config_json =
        serde_json::to_string(&scenario).map_err(|e| Error::Scenario(e.to_string()))?;
    let config_hash = sha256_hex(config_json.as_bytes());

    let start = Instant::now();
    let scene = scenario.scene()?;
    let mut timings = vec![Timing {
        bandwidth: 0.0,
        stage: "scene".into(),
        seconds: start.elapsed().as_secs_f64(),
    }];
    let cache = opts.cache.clone().or_else(FieldCache::from_env);

    let mut bands = Vec::new();
    let mut ed = Vec::new();
    let mut failures = Vec::new();
    for rel_b in scenario.bandwidths() {
        log::info!("running B = {rel_b} f0");
        let outcome = run_bandwidth(&scenario, &scene, rel_b, cache.as_ref())?;
        timings.extend(outcome.timings);
        ed.extend(outcome.ed);
        failures.extend(outcome.failures);
        bands.push(outcome.reports);
    }

    std::fs::create_dir_all(&out_dir)?;
    let mut writer = ArtifactWriter {
        dir: &out_dir,
        artifacts: Vec::new(),
    };
    let f0 = scenario.carrier.f0_hz;
    if scenario.sweep.kind == SweepKind::Spectrum {
        for band in &bands {
            let name = format!("spectrum_{}.csv", bandwidth_label(band.bandwidth));
            writer.write(&name, spectrum_csv(band, f0).as_bytes())?;
        }
    }
    writer.write("sweep.csv", sweep_csv(&bands).as_bytes())?;
    writer.write("metrics.json", metrics_json(&bands)?.as_bytes())?;
    if scenario.output.phase_maps {
        for band in &bands {
            for (t, phase) in &band.phases {
                let mut buf = Vec::new();
                phase.write_csv(scene.grid(), &mut buf)?;
                let name = format!("phase_{t}_{}.csv", bandwidth_label(band.bandwidth));
                writer.write(&name, &buf)?;
            }
        }
    }

    let manifest = Manifest {
        scenario: scenario.name.clone(),
        schema_version: scenario.version,
        config_hash,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        threads: rayon::current_num_threads(),
        grid: [scene.grid().nx(), scene.grid().ny()],
        precision: scenario.output.precision,
        total_seconds: total.elapsed().as_secs_f64(),
        timings,
        ed,
        failures,
        artifacts: writer.artifacts,
    };
    let text =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Scenario(e.to_string()))?;
    write_atomic(&out_dir.join("manifest.json"), (text + "\n").as_bytes())?;
    Ok(RunSummary {
        out_dir,
        manifest,
        reports: bands,
    })
}
