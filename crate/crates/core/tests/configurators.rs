use irs_core::configurators::eigen::phase_from_kernel;
use irs_core::configurators::{
    configure_alo, configure_nb, configure_nbf, configure_slo, freq_alo, freq_slo, EdKernel,
    EdOptions, LsqOptions,
};
use irs_core::numeric::wrap_phase;
use irs_core::*;
use num_complex::Complex64;

const F0: f64 = 100e9;

fn pitch() -> f64 {
    SPEED_OF_LIGHT / F0 / 2.0
}

fn ap(origin: [f64; 3]) -> ApArraySpec {
    ApArraySpec {
        rows: 64,
        cols: 4,
        spacing: pitch(),
        origin,
        bearing: 0.0,
        downtilt: 0.0,
        slant: 60f64.to_radians(),
    }
}

fn irs(lx: f64, ly: f64, decimation: usize) -> IrsGridSpec {
    IrsGridSpec {
        lx,
        ly,
        pitch: pitch(),
        decimation,
    }
}

fn table1() -> SceneGeometry {
    build_scene(ap([0.0, -2.0, 1.0]), irs(0.2, 1.0, 4), [0.0, 1.0, 2.0]).unwrap()
}

fn far_field(n: usize) -> SceneGeometry {
    let side = (n as f64 + 0.5) * pitch();
    build_scene(
        ap([0.0, -2000.0, 1000.0]),
        irs(side, side, 1),
        [0.0, 1000.0, 2000.0],
    )
    .unwrap()
}

fn flat(rel: f64, samples: usize) -> SignalSpectrum {
    make_spectrum(F0, rel * F0, SpectrumShape::Flat, 1, 0.0, samples).unwrap()
}

fn rms_phase_gap(a: &PhaseMap, b: &PhaseMap) -> f64 {
    let n = a.len() as f64;
    (a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| wrap_phase(x - y).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
}

fn power(
    field: &IncidentField,
    scene: &SceneGeometry,
    spec: &SignalSpectrum,
    phase: PhaseMap,
) -> f64 {
    let resp = IrsResponse {
        uncontrollable: UncontrollableResponse::unit(spec.len()),
        phase,
    };
    transfer_function(field, &resp, scene, spec)
        .unwrap()
        .received_power
}

#[test]
fn nbf_matches_nb_in_the_far_field() {
    let scene = far_field(16);
    let spec = flat(0.4, 20);
    let field = incident_field(&scene, &BeamformerSpec::central(), &spec).unwrap();
    let zeta = UncontrollableResponse::unit(spec.len());
    let nb = configure_nb(&field, &zeta, &scene, F0).unwrap();
    let nbf = configure_nbf(&scene, F0).unwrap();
    let gap = rms_phase_gap(&nb, &nbf);
    assert!(gap < 1e-3, "rms gap {gap}");
}

#[test]
fn nbf_departs_from_nb_in_the_near_field() {
    let scene = table1();
    let spec = flat(0.4, 20);
    let field = incident_field(&scene, &BeamformerSpec::central(), &spec).unwrap();
    let zeta = UncontrollableResponse::unit(spec.len());
    let nb = configure_nb(&field, &zeta, &scene, F0).unwrap();
    let nbf = configure_nbf(&scene, F0).unwrap();
    let max = nb
        .values()
        .iter()
        .zip(nbf.values())
        .map(|(a, b)| wrap_phase(a - b).abs())
        .fold(0.0, f64::max);
    assert!(max > 0.1, "max gap {max}");
}

#[test]
fn single_frequency_ed_is_nb() {
    let scene = table1();
    let spec = flat(0.4, 21);
    let field = incident_field(&scene, &BeamformerSpec::central(), &spec).unwrap();
    let zeta = UncontrollableResponse::unit(spec.len());
    let k = 13;
    let mut weights = vec![0.0; spec.len()];
    weights[k] = 1.0;
    let kernel = EdKernel::with_weights(&field, &zeta, &scene, &weights).unwrap();
    let (ed, outcome) = phase_from_kernel(&kernel, &scene, &EdOptions::default()).unwrap();
    assert!(outcome.converged);
    let nb = configure_nb(&field, &zeta, &scene, spec.freqs()[k]).unwrap();
    let max = ed
        .values()
        .iter()
        .zip(nb.values())
        .map(|(a, b)| wrap_phase(a - b).abs())
        .fold(0.0, f64::max);
    assert!(max < 1e-9, "max gap {max}");
}

#[test]
fn local_optimizers_reduce_to_the_plane_for_narrow_bands() {
    let scene = far_field(16);
    let spec = flat(1e-4, 21);
    let field = incident_field(&scene, &BeamformerSpec::central(), &spec).unwrap();
    let nbf = configure_nbf(&scene, spec.barycenter().unwrap()).unwrap();
    let lsq = LsqOptions::default();
    let (slo, _) = configure_slo(&field, &scene, &spec, spec.bandwidth() / 10.0, &lsq).unwrap();
    let (alo, _) = configure_alo(&scene, &spec, &lsq).unwrap();
    assert!(rms_phase_gap(&slo, &nbf) < 1e-3);
    assert!(rms_phase_gap(&alo, &nbf) < 1e-3);
}

#[test]
fn slo_frequency_follows_the_field_peak() {
    let scene = table1();
    let spec = flat(0.4, 100);
    let field = incident_field(&scene, &BeamformerSpec::central(), &spec).unwrap();
    let window = spec.bandwidth() / 10.0;
    let fmap = freq_slo(&field, &spec, &scene, window).unwrap();
    let k = spec.nearest_index(1.1 * F0);
    let p = (0..scene.num_points())
        .max_by(|&a, &b| field.get(a, k).norm().total_cmp(&field.get(b, k).norm()))
        .unwrap();
    let gap = (fmap.values[p] - spec.freqs()[k]).abs();
    assert!(
        gap <= window,
        "f_SLO {} vs {}",
        fmap.values[p],
        spec.freqs()[k]
    );
}

#[test]
fn slo_and_alo_deliver_similar_power() {
    let scene = table1();
    let spec = flat(0.4, 100);
    let field = incident_field(&scene, &BeamformerSpec::central(), &spec).unwrap();
    let zeta = UncontrollableResponse::unit(spec.len());
    let lsq = LsqOptions::default();
    let (slo, _) = configure_slo(&field, &scene, &spec, spec.bandwidth() / 10.0, &lsq).unwrap();
    let (alo, _) = configure_alo(&scene, &spec, &lsq).unwrap();
    let nb = configure_nb(&field, &zeta, &scene, spec.barycenter().unwrap()).unwrap();
    let p_slo = power(&field, &scene, &spec, slo);
    let p_alo = power(&field, &scene, &spec, alo);
    let p_nb = power(&field, &scene, &spec, nb);
    assert!((p_slo - p_alo).abs() / p_slo < 0.15);
    assert!(p_slo >= p_nb);
}

#[test]
fn frequency_maps_stay_in_band() {
    let scene = table1();
    let spec = make_spectrum(F0, 0.4 * F0, SpectrumShape::Flat, 3, 0.05, 100).unwrap();
    let field = incident_field(&scene, &BeamformerSpec::central(), &spec).unwrap();
    let slo = freq_slo(&field, &spec, &scene, spec.bandwidth() / 10.0).unwrap();
    for f in &slo.values {
        let k = spec
            .freqs()
            .iter()
            .position(|g| g == f)
            .expect("SLO picks a sample");
        assert!(spec.mask()[k]);
    }
    for f in freq_alo(&scene, &spec).values {
        assert!(spec.bands.contains(f), "{f} outside the band set");
    }
}

/// One point, `|W|` flat across the band: every window ties.
fn constant_field(spec: &SignalSpectrum) -> (SceneGeometry, IncidentField) {
    let scene = build_scene(
        ap([0.0, -2.0, 1.0]),
        irs(1.5 * pitch(), 1.5 * pitch(), 1),
        [0.0, 1.0, 2.0],
    )
    .unwrap();
    let samples = vec![Complex64::new(0.5, 0.0); spec.len()];
    let field = IncidentField::from_samples(1, spec.freqs().to_vec(), samples).unwrap();
    (scene, field)
}

#[test]
fn slo_ties_go_to_the_sample_nearest_the_carrier() {
    let spec = flat(0.4, 100);
    let (scene, field) = constant_field(&spec);
    let fmap = freq_slo(&field, &spec, &scene, spec.bandwidth() / 10.0).unwrap();
    let nearest = spec
        .freqs()
        .iter()
        .copied()
        .filter(|&f| {
            (f - F0).abs() <= (spec.freqs()[spec.nearest_index(F0)] - F0).abs() * (1.0 + 1e-12)
        })
        .fold(f64::INFINITY, f64::min);
    assert_eq!(fmap.values[0], nearest);
}

#[test]
fn slo_finds_an_isolated_peak() {
    let spec = flat(0.4, 100);
    let (scene, _) = constant_field(&spec);
    let peak = 71;
    let mut samples = vec![Complex64::new(0.0, 0.0); spec.len()];
    samples[peak] = Complex64::new(0.0, 1.0);
    let field = IncidentField::from_samples(1, spec.freqs().to_vec(), samples).unwrap();
    let spacing = spec.freqs()[1] - spec.freqs()[0];
    let fmap = freq_slo(&field, &spec, &scene, spacing / 2.0).unwrap();
    assert_eq!(fmap.values[0], spec.freqs()[peak]);
}
