use std::sync::OnceLock;

use irs_core::configurators::lsq::{apply_laplacian, normal_rhs};
use irs_core::configurators::{freq_alo, EdKernel, EdOptions, GradientField, LsqOptions};
use irs_core::*;
use proptest::prelude::*;

const F0: f64 = 100e9;

struct Fixture {
    scene: SceneGeometry,
    spec: SignalSpectrum,
    field: IncidentField,
    envelope: Vec<f64>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
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
            ly: 0.3,
            pitch,
            decimation: 6,
        };
        let scene = build_scene(ap, irs, [0.0, 1.0, 2.0]).unwrap();
        let spec = make_spectrum(F0, 0.4 * F0, SpectrumShape::Flat, 2, 0.05, 40).unwrap();
        let field = incident_field(&scene, &BeamformerSpec::central(), &spec).unwrap();
        let envelope =
            upper_bound_envelope(&field, &UncontrollableResponse::unit(spec.len()), &scene)
                .unwrap();
        Fixture {
            scene,
            spec,
            field,
            envelope,
        }
    })
}

fn transfer(phase: Vec<f64>) -> TransferFunction {
    let fx = fixture();
    let resp = IrsResponse {
        uncontrollable: UncontrollableResponse::unit(fx.spec.len()),
        phase: PhaseMap::from_grid(fx.scene.grid(), phase).unwrap(),
    };
    transfer_function(&fx.field, &resp, &fx.scene, &fx.spec).unwrap()
}

fn phases() -> impl Strategy<Value = Vec<f64>> {
    let n = fixture().scene.num_points();
    prop::collection::vec(-std::f64::consts::PI..std::f64::consts::PI, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn global_phase_offset_leaves_power_unchanged(phase in phases(), offset in -10.0f64..10.0) {
        let a = transfer(phase.clone()).received_power;
        let b = transfer(phase.iter().map(|p| p + offset).collect()).received_power;
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
    }

    #[test]
    fn no_phase_map_beats_the_upper_bound(phase in phases()) {
        let fx = fixture();
        let tf = transfer(phase);
        for k in 0..fx.spec.len() {
            prop_assert!(tf.h[k].norm() <= fx.envelope[k] * (1.0 + 1e-9));
        }
    }

    #[test]
    fn rayleigh_quotient_never_decreases(seed in 0u64..1000) {
        let fx = fixture();
        let kernel = EdKernel::new(&fx.field, &UncontrollableResponse::unit(fx.spec.len()), &fx.scene, &fx.spec).unwrap();
        let opts = EdOptions { seed, ..EdOptions::default() };
        let (_, outcome) = kernel.principal_eigenvector(&opts);
        for pair in outcome.rayleigh_history.windows(2) {
            prop_assert!(pair[1] >= pair[0] * (1.0 - 1e-12));
        }
    }

    #[test]
    fn least_squares_residual_is_divergence_free(
        gx in prop::collection::vec(-50.0f64..50.0, 42),
        gy in prop::collection::vec(-50.0f64..50.0, 42),
    ) {
        let grad = GradientField::new(6, 7, 0.01, gx, gy).unwrap();
        let phi = fit_phase_lsq(&grad, &LsqOptions { tolerance: 1e-12, ..LsqOptions::default() }).unwrap();
        let b = normal_rhs(&grad);
        let lphi = apply_laplacian(6, 7, phi.values());
        let scale = b.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
        let div = b.iter().zip(&lphi).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        prop_assert!(div <= 1e-9 * scale, "divergence {div} vs {scale}");
    }

    #[test]
    fn alo_frequencies_lie_in_the_band_set(rel in 0.05f64..0.6, bands in 1usize..4) {
        let fx = fixture();
        let spec = make_spectrum(F0, rel * F0, SpectrumShape::Flat, bands, 0.05, 40).unwrap();
        for f in freq_alo(&fx.scene, &spec).values {
            prop_assert!(spec.bands.contains(f));
        }
    }
}
