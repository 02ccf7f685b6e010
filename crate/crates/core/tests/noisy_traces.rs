//! Fits of noisy traces at realistic noise levels.

use nvmag::estimators::{fit_echo, fit_precession, FrequencyGrid, ParamTable};
use nvmag::signal_synth::{add_shot_noise, linspace, synth_echo, synth_precession, EchoModel, PrecessionModel};

/// Dwell that gives per-point relative noise `rel` at unit intensity.
fn dwell_for(rel: f64, rate: f64) -> f64 {
    1.0 / (rate * rel * rel)
}

#[test]
fn precession_at_measured_contrast_noise() {
    let m = PrecessionModel { i0: 1.0, ic: 0.3, omega_l: 0.1632, t0: 156.0 };
    // Per-point noise δI = 0.045·Ic over a trace of 2·T0.
    let rec = synth_precession(&m, &linspace(0.0, 312.0, 300)).unwrap();
    let dwell = dwell_for(0.045 * m.ic, 3.0e4);
    for seed in 0..20 {
        let fit =
            fit_precession(&add_shot_noise(&rec, 3.0e4, dwell, seed).unwrap(), FrequencyGrid::new(0.01, 0.5)).unwrap();
        assert!((fit.param("omega_l") - 0.1632).abs() < 3e-4, "seed {seed}: {}", fit.param("omega_l"));
        assert!(fit.sigma("omega_l") <= 3e-4);
        assert!((fit.param("t0") - 156.0).abs() < 5.0 * fit.sigma("t0"));
    }
}

#[test]
fn echo_revival_time_to_sixty_nanoseconds() {
    let m = EchoModel { tau_c: 8.0, tau_re: 24.27, a: 0.6, b: 0.7, omega1: 0.1632, omega2: 3.03 };
    let rec = synth_echo(&m, &linspace(0.0, 40.0, 801)).unwrap();
    let init: ParamTable =
        [("tau_c", 8.5), ("tau_re", 23.0), ("a", 0.55), ("b", 0.65), ("omega1", 0.17), ("omega2", 3.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
    // Echo signal sits near 0.5, so 2% noise at that level.
    let dwell = 0.5 * dwell_for(0.02, 3.0e4);
    let trials = 40;
    let mut within = 0;
    for seed in 0..trials {
        let fit = fit_echo(&add_shot_noise(&rec, 3.0e4, dwell, seed).unwrap(), &init).unwrap();
        assert!(fit.sigma("tau_re") < 0.06, "seed {seed}: sigma {}", fit.sigma("tau_re"));
        if (fit.param("tau_re") - 24.27).abs() < 0.06 {
            within += 1;
        }
    }
    assert!(within as f64 >= 0.8 * trials as f64, "{within}/{trials} within 0.06 us");
}
