use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;

use bandgap_delay::delay::delay_report;
use bandgap_delay::experiment::standard_mirror;
use bandgap_delay::hom::{coincidence_rate, locate_dip, ConstantBarrier, PhotonPairSpectrum, StackBarrier};
use bandgap_delay::stack::{air_reference, build_quarter_wave_stack};
use bandgap_delay::tmm::{amplitudes_at, TwoPort};
use bandgap_delay::{angular_frequency, FirstLayer, Layer, LayerStack, OperatingPoint, Polarization, SpectralShape};

fn layer() -> impl Strategy<Value = Layer> {
    (1.0..=3.0f64, 10.0..=500.0f64).prop_map(|(n, d)| Layer::lossless(n, d).unwrap())
}

fn stack() -> impl Strategy<Value = LayerStack> {
    prop::collection::vec(layer(), 1..=20).prop_map(|layers| LayerStack::new(layers).unwrap())
}

fn polarization() -> impl Strategy<Value = Polarization> {
    prop_oneof![Just(Polarization::P), Just(Polarization::S)]
}

fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
    (a - b).norm() <= rel * a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn lossless_stacks_conserve_energy(s in stack(), nm in 300.0..2000.0f64, deg in 0.0..89.5f64, pol in polarization()) {
        let a = amplitudes_at(&s, angular_frequency(nm), deg.to_radians(), pol);
        prop_assert!((a.transmittance + a.reflectance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_stack_transmits_identically(s in stack(), nm in 300.0..2000.0f64, deg in 0.0..80.0f64, pol in polarization()) {
        let omega = angular_frequency(nm);
        let fwd = amplitudes_at(&s, omega, deg.to_radians(), pol).t;
        let back = amplitudes_at(&s.reversed(), omega, deg.to_radians(), pol).t;
        prop_assert!(close(fwd, back, 1e-12), "{fwd} vs {back}");
    }

    #[test]
    fn concatenation_matches_cascade(a in stack(), b in stack(), nm in 300.0..2000.0f64, deg in 0.0..80.0f64, pol in polarization()) {
        let k0 = angular_frequency(nm) / bandgap_delay::SPEED_OF_LIGHT;
        let beta = Complex64::new(deg.to_radians().sin(), 0.0);
        let joined = TwoPort::of_stack(&a.concat(&b), k0, beta, pol);
        let cascaded = TwoPort::of_stack(&a, k0, beta, pol).cascade(&TwoPort::of_stack(&b, k0, beta, pol));
        prop_assert!(close(joined.s21, cascaded.s21, 1e-10));
        prop_assert!(close(joined.s11, cascaded.s11, 1e-10));
        prop_assert!(close(joined.s22, cascaded.s22, 1e-10));
    }

    #[test]
    fn polarizations_coincide_at_normal_incidence(s in stack(), nm in 300.0..2000.0f64) {
        let omega = angular_frequency(nm);
        let p = amplitudes_at(&s, omega, 0.0, Polarization::P);
        let s_ = amplitudes_at(&s, omega, 0.0, Polarization::S);
        prop_assert!(close(p.t, s_.t, 1e-12));
        prop_assert!(close(p.r, s_.r, 1e-12));
    }

    #[test]
    fn air_reference_is_idempotent(s in stack()) {
        let once = air_reference(&s);
        let twice = air_reference(&once);
        prop_assert_eq!(once.traversal_length(), twice.traversal_length());
        prop_assert!(twice.is_empty());
    }

    #[test]
    fn quarter_wave_layers_have_quarter_wave_optical_thickness(
        lambda0 in 300.0..1500.0f64, nh in 1.5..3.0f64, nl in 1.0..1.5f64, count in 1usize..30,
    ) {
        let s = build_quarter_wave_stack(lambda0, nh, nl, count, FirstLayer::Low).unwrap();
        prop_assert_eq!(s.len(), count);
        for (j, l) in s.layers.iter().enumerate() {
            prop_assert_eq!(l.refractive_index.re, if j % 2 == 0 { nl } else { nh });
            prop_assert!((l.optical_thickness() - lambda0 / 4.0).abs() < 1e-12 * lambda0);
        }
    }

    #[test]
    fn transparent_barrier_dip_is_symmetric(tau in 0.0..60.0f64, tc in 5.0..40.0f64) {
        let spectrum = PhotonPairSpectrum::centered(702.0, tc).unwrap();
        let barrier = ConstantBarrier::unit();
        let plus = coincidence_rate(&spectrum, &barrier, tau).unwrap();
        let minus = coincidence_rate(&spectrum, &barrier, -tau).unwrap();
        prop_assert_eq!(plus, minus);
    }
}

#[test]
fn delay_reports_coincide_for_both_polarizations_at_normal_incidence() {
    let mirror = standard_mirror(692.0).unwrap();
    for nm in [560.0, 650.0, 702.0, 800.0] {
        let p = delay_report(&mirror, &OperatingPoint::new(nm, 0.0, Polarization::P).unwrap()).unwrap();
        let s = delay_report(&mirror, &OperatingPoint::new(nm, 0.0, Polarization::S).unwrap()).unwrap();
        for (a, b) in [
            (p.transmittance, s.transmittance),
            (p.group_delay, s.group_delay),
            (p.transverse_shift, s.transverse_shift),
            (p.larmor_out_of_plane, s.larmor_out_of_plane),
            (p.larmor_time, s.larmor_time),
            (p.air_time, s.air_time),
            (p.relative_group_delay, s.relative_group_delay),
        ] {
            assert!((a - b).abs() <= 1e-9, "{nm} nm: {a} vs {b}");
        }
    }
}

#[test]
fn index_matched_barrier_has_no_relative_delay() {
    let vacuum = build_quarter_wave_stack(692.0, 1.0, 1.0, 11, FirstLayer::High).unwrap();
    for deg in [0.0, 20.0, 45.0, 70.0] {
        for pol in [Polarization::P, Polarization::S] {
            let r = delay_report(&vacuum, &OperatingPoint::from_degrees(702.0, deg, pol).unwrap()).unwrap();
            assert!(r.relative_group_delay.abs() < 1e-9, "{deg}: {}", r.relative_group_delay);
            assert!(r.larmor_out_of_plane.abs() < 1e-9, "{deg}: {}", r.larmor_out_of_plane);
        }
    }
}

#[test]
fn plateau_is_normalized_far_from_the_dip() {
    for shape in [SpectralShape::Gaussian, SpectralShape::Sinc2] {
        let spectrum = PhotonPairSpectrum::centered(702.0, 15.0).unwrap().with_shape(shape);
        for barrier in [ConstantBarrier::unit(), ConstantBarrier(Complex64::new(0.316, 0.0))] {
            for tau in [-150.0, 150.0] {
                let rate = coincidence_rate(&spectrum, &barrier, tau).unwrap();
                assert!((rate - 1.0).abs() < 1e-6, "{shape:?} {tau}: {rate}");
            }
        }
    }
}

#[test]
fn transparent_barrier_gives_full_visibility() {
    let spectrum = PhotonPairSpectrum::default();
    let rate = coincidence_rate(&spectrum, &ConstantBarrier::unit(), 0.0).unwrap();
    assert!(rate.abs() < 1e-12);
    let attenuated = coincidence_rate(&spectrum, &ConstantBarrier(Complex64::new(0.316, 0.0)), 0.0).unwrap();
    assert_relative_eq!(attenuated, rate, epsilon = 1e-12);
}

#[test]
fn dip_converges_to_group_delay_with_narrowing_bandwidth() {
    let mirror = standard_mirror(692.0).unwrap();
    let point = OperatingPoint::new(702.0, 0.0, Polarization::P).unwrap();
    let target = delay_report(&mirror, &point).unwrap().relative_group_delay;
    let barrier = StackBarrier::relative_to_air(&mirror, 0.0, Polarization::P);
    let errors: Vec<f64> = [15.0, 30.0, 60.0, 120.0]
        .iter()
        .map(|&tc| (locate_dip(&PhotonPairSpectrum::centered(702.0, tc).unwrap(), &barrier).unwrap() - target).abs())
        .collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    assert!(errors[3] < 0.01, "{errors:?}");
}
