use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use irs_core::configurators::{
    configure_alo, freq_slo, EdKernel, EdOptions, GradientField, LsqOptions,
};
use irs_core::*;

const F0: f64 = 100e9;

fn scene(decimation: usize) -> SceneGeometry {
    let pitch = SPEED_OF_LIGHT / F0 / 2.0;
    let ap = ApArraySpec {
        rows: 64,
        cols: 4,
        spacing: pitch,
        origin: [0.0, -2.0, 1.0],
        bearing: 0.0,
        downtilt: 0.0,
        slant: 60f64.to_radians(),
    };
    let irs = IrsGridSpec {
        lx: 0.2,
        ly: 1.0,
        pitch,
        decimation,
    };
    build_scene(ap, irs, [0.0, 1.0, 2.0]).unwrap()
}

fn spectrum() -> SignalSpectrum {
    make_spectrum(F0, 0.4 * F0, SpectrumShape::Flat, 1, 0.0, 100).unwrap()
}

fn field(c: &mut Criterion) {
    let spec = spectrum();
    let mut group = c.benchmark_group("incident_field");
    group.sample_size(10);
    for d in [8, 4] {
        let scene = scene(d);
        group.bench_with_input(BenchmarkId::from_parameter(d), &scene, |b, scene| {
            b.iter(|| incident_field(scene, &BeamformerSpec::central(), &spec).unwrap())
        });
    }
    group.finish();
}

fn configurators(c: &mut Criterion) {
    let spec = spectrum();
    let scene = scene(4);
    let field = incident_field(&scene, &BeamformerSpec::central(), &spec).unwrap();
    let zeta = UncontrollableResponse::unit(spec.len());
    let mut group = c.benchmark_group("configurators");
    group.sample_size(10);
    group.bench_function("ed", |b| {
        b.iter(|| configure_ed(&field, &zeta, &scene, &spec, &EdOptions::default()).unwrap())
    });
    group.bench_function("slo_frequency_map", |b| {
        b.iter(|| freq_slo(&field, &spec, &scene, spec.bandwidth() / 10.0).unwrap())
    });
    group.bench_function("alo", |b| {
        b.iter(|| configure_alo(&scene, &spec, &LsqOptions::default()).unwrap())
    });
    group.bench_function("ed_kernel_apply", |b| {
        let kernel = EdKernel::new(&field, &zeta, &scene, &spec).unwrap();
        let v = vec![num_complex::Complex64::new(1.0, 0.0); kernel.n_points()];
        b.iter(|| kernel.apply_kernel(&v))
    });
    group.finish();
}

fn least_squares(c: &mut Criterion) {
    let mut group = c.benchmark_group("lsq");
    group.sample_size(10);
    for n in [34usize, 134] {
        let grad = GradientField::sample(n, 5 * n, 1e-3, |x, y| {
            (40.0 * x + 5.0 * y, 200.0 * y - 3.0 * x)
        })
        .unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &grad, |b, g| {
            b.iter(|| fit_phase_lsq(g, &LsqOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, field, configurators, least_squares);
criterion_main!(benches);
