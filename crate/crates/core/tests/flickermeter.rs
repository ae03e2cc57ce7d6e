use flickersim::conformance::weighting_peak;
use flickersim::flicker::compliance::{
    rectangular_pst, sinusoidal_max_pinst, COMPLIANCE_TOLERANCE, RECTANGULAR_PST_UNITY, SINUSOIDAL_PINST_UNITY,
};
use flickersim::flicker::{calibrate_pinst_gain, WeightingCascade, WeightingConstants, PINST_GAIN};
use flickersim::signal::{modulate, synthesize_carrier, synthesize_modulating};
use flickersim::{measure_pst, CarrierSpec, FlickermeterConfig, ModulatingSpec, Shape};

const FS: f64 = 20_000.0;

fn short_config() -> FlickermeterConfig {
    FlickermeterConfig {
        window: 60.0,
        settle: 30.0,
        ..FlickermeterConfig::default()
    }
}

fn pst_of(carrier: CarrierSpec, modulating: ModulatingSpec) -> f64 {
    let config = short_config();
    let seconds = config.settle + config.window;
    let c = synthesize_carrier(&carrier, FS, seconds).unwrap();
    let m = synthesize_modulating(&modulating, FS, seconds).unwrap();
    let u = modulate(&c, &m, modulating.depth).unwrap();
    measure_pst(&u, &config).unwrap().pst
}

#[test]
fn pinst_gain_reproduces_stored_constant() {
    let gain = calibrate_pinst_gain(FS).unwrap();
    assert!((gain / PINST_GAIN - 1.0).abs() < 1e-3, "{gain}");
}

#[test]
fn weighting_peak_and_ripple_rejection() {
    let cascade = WeightingCascade::new(FS, &WeightingConstants::LAMP_230V_50HZ).unwrap();
    let peak = weighting_peak(&cascade, FS);
    assert!((peak - 8.8).abs() <= 0.3, "{peak}");
    let db = 20.0 * (cascade.magnitude(8.8, FS) / cascade.magnitude(100.0, FS)).log10();
    assert!(db >= 40.0, "{db}");
}

#[test]
fn sinusoidal_compliance_rows() {
    for &(f, depth) in SINUSOIDAL_PINST_UNITY {
        let p = sinusoidal_max_pinst(f, depth, FS).unwrap();
        assert!((p - 1.0).abs() <= COMPLIANCE_TOLERANCE, "{f} Hz: {p}");
    }
}

#[test]
fn rectangular_compliance_rows() {
    for &(cpm, depth) in RECTANGULAR_PST_UNITY {
        let p = rectangular_pst(cpm, depth, FS).unwrap().pst;
        assert!((p - 1.0).abs() <= COMPLIANCE_TOLERANCE, "{cpm} cpm: {p}");
    }
}

#[test]
fn unmodulated_carrier_reads_below_floor() {
    for m_c in [1.0, 0.8, 0.1] {
        let p = pst_of(CarrierSpec::lv(m_c).unwrap(), ModulatingSpec::new(Shape::Rectangular, 8.8, 0.0).unwrap());
        assert!(p < 0.05, "m_c={m_c}: {p}");
    }
}

#[test]
fn input_scale_does_not_change_pst() {
    let modulating = ModulatingSpec::new(Shape::Sinusoidal, 8.8, 0.5).unwrap();
    let a = pst_of(CarrierSpec::new(50.0, 230.0, 0.8).unwrap(), modulating);
    let b = pst_of(CarrierSpec::new(50.0, 23.0, 0.8).unwrap(), modulating);
    assert!(a > 0.5);
    assert!((a / b - 1.0).abs() < 0.01, "{a} vs {b}");
}

#[test]
fn modulating_phase_does_not_change_pst() {
    let base = ModulatingSpec::new(Shape::Trapezoidal, 5.0, 1.0).unwrap();
    let a = pst_of(CarrierSpec::default(), base);
    let b = pst_of(CarrierSpec::default(), base.with_phase(0.37));
    assert!((a / b - 1.0).abs() < 0.01, "{a} vs {b}");
}

#[test]
fn rate_mismatch_is_rejected() {
    let c = synthesize_carrier(&CarrierSpec::default(), 10_000.0, 100.0).unwrap();
    assert!(measure_pst(&c, &short_config()).is_err());
}
