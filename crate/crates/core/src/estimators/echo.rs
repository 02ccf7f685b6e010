use std::f64::consts::PI;

use super::nlls::{nlls_solve, CurveModel, FitResult, NllsOptions, ParamTable};
use super::FitError;
use crate::signal_synth::{EchoModel, MeasurementRecord, RecordKind};

/// Spin-echo collapse/revival model, parameters
/// (tau_c, tau_re, a, b, omega1, omega2).
pub struct EchoCurve;

pub const ECHO_PARAMS: [&str; 6] = ["tau_c", "tau_re", "a", "b", "omega1", "omega2"];

fn as_model(p: &[f64]) -> EchoModel {
    EchoModel { tau_c: p[0], tau_re: p[1], a: p[2], b: p[3], omega1: p[4], omega2: p[5] }
}

impl CurveModel for EchoCurve {
    fn param_names(&self) -> &[&'static str] {
        &ECHO_PARAMS
    }

    fn eval(&self, tau: f64, p: &[f64]) -> f64 {
        as_model(p).eval(tau)
    }

    fn gradient(&self, tau: f64, p: &[f64], grad: &mut [f64]) {
        let (tc, tre, a, b, w1, w2) = (p[0], p[1], p[2], p[3], p[4], p[5]);
        let x = tau / tc;
        let y = (tau - tre) / tc;
        let ex = (-x.powi(4)).exp();
        let ey = (-y.powi(4)).exp();
        let env = ex + b * ey;
        let (s1, c1) = (PI * w1 * tau).sin_cos();
        let (s2, c2) = (PI * w2 * tau).sin_cos();
        let modulation = 1.0 - a * s1 * s1 * s2 * s2;

        let d_env_tc = 4.0 * (ex * x.powi(4) + b * ey * y.powi(4)) / tc;
        let d_env_tre = 4.0 * b * ey * y.powi(3) / tc;
        grad[0] = 0.5 * d_env_tc * modulation;
        grad[1] = 0.5 * d_env_tre * modulation;
        grad[2] = -0.5 * env * s1 * s1 * s2 * s2;
        grad[3] = 0.5 * ey * modulation;
        grad[4] = -0.5 * env * a * 2.0 * s1 * c1 * PI * tau * s2 * s2;
        grad[5] = -0.5 * env * a * 2.0 * s2 * c2 * PI * tau * s1 * s1;
    }
}

fn ssr(rec: &MeasurementRecord, p: &[f64]) -> f64 {
    rec.axis.iter().zip(&rec.values).map(|(&t, &y)| (y - EchoCurve.eval(t, p)).powi(2)).sum()
}

/// Relative half-width of the frequency window searched around the initial
/// ω₁, ω₂ before the local fit.
const FREQ_WINDOW: f64 = 0.1;

/// Fits the echo model. The landscape is multimodal in the two modulation
/// frequencies, so they are first located on a grid within ±10% of `init`
/// (spacing a quarter of the Fourier resolution) before all six parameters
/// are refined together.
pub fn fit_echo(rec: &MeasurementRecord, init: &ParamTable) -> Result<FitResult, FitError> {
    if rec.kind != RecordKind::Echo {
        return Err(FitError::WrongKind { expected: RecordKind::Echo, got: rec.kind });
    }
    let mut p = Vec::with_capacity(6);
    for name in ECHO_PARAMS {
        let v = *init.get(name).ok_or_else(|| FitError::MissingParameter(name.into()))?;
        p.push(v);
    }
    let in_bounds = p[0] > 0.0
        && p[1] > 0.0
        && (0.0..=1.0).contains(&p[2])
        && (0.0..=1.0).contains(&p[3])
        && p[4] > 0.0
        && p[5] > 0.0;
    if !in_bounds {
        return Err(FitError::InitOutOfBounds("echo init needs τ_c, τ_re, ω₁, ω₂ > 0 and a, b in [0, 1]".into()));
    }
    if rec.len() <= ECHO_PARAMS.len() {
        return Err(FitError::InsufficientData { points: rec.len(), params: ECHO_PARAMS.len() });
    }

    if p[2] > 0.0 {
        let span = rec.axis[rec.len() - 1] - rec.axis[0];
        let step = 0.25 / span;
        let grid = |center: f64| -> Vec<f64> {
            let half = (FREQ_WINDOW * center / step).ceil() as i64;
            (-half..=half).map(|k| center + step * k as f64).filter(|w| *w > 0.0).collect()
        };
        let (g1, g2) = (grid(p[4]), grid(p[5]));
        let mut best = (f64::INFINITY, p[4], p[5]);
        let mut trial = p.clone();
        for &w1 in &g1 {
            for &w2 in &g2 {
                trial[4] = w1;
                trial[5] = w2;
                let s = ssr(rec, &trial);
                if s < best.0 {
                    best = (s, w1, w2);
                }
            }
        }
        p[4] = best.1;
        p[5] = best.2;
    }

    let start: ParamTable = ECHO_PARAMS.iter().zip(&p).map(|(k, v)| (k.to_string(), *v)).collect();
    let opts = NllsOptions::default()
        .bound("tau_c", 1e-9, f64::INFINITY)
        .bound("tau_re", 1e-9, f64::INFINITY)
        .bound("a", 0.0, 1.0)
        .bound("b", 0.0, 1.0)
        .bound("omega1", 0.0, f64::INFINITY)
        .bound("omega2", 0.0, f64::INFINITY);
    let fit = nlls_solve(&EchoCurve, rec, &start, &opts)?;
    if !fit.converged {
        return Err(FitError::MaxIterations(Box::new(fit)));
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_finite_differences() {
        struct Fd;
        impl CurveModel for Fd {
            fn param_names(&self) -> &[&'static str] {
                &ECHO_PARAMS
            }
            fn eval(&self, t: f64, p: &[f64]) -> f64 {
                EchoCurve.eval(t, p)
            }
        }
        let p = [8.0, 24.27, 0.6, 0.7, 0.163, 3.03];
        let mut analytic = [0.0; 6];
        let mut numeric = [0.0; 6];
        for t in [0.7, 5.3, 12.1, 22.0, 25.9, 31.4] {
            EchoCurve.gradient(t, &p, &mut analytic);
            Fd.gradient(t, &p, &mut numeric);
            for k in 0..6 {
                assert!((analytic[k] - numeric[k]).abs() < 1e-5 * (1.0 + analytic[k].abs()), "t={t} k={k}");
            }
        }
    }

    #[test]
    fn init_bounds_checked() {
        let rec = MeasurementRecord::new(RecordKind::Echo, (0..20).map(f64::from).collect(), vec![0.5; 20]);
        let mut init: ParamTable =
            ECHO_PARAMS.iter().zip([8.0, 24.0, 0.5, 0.5, 0.16, 3.0]).map(|(k, v)| (k.to_string(), v)).collect();
        init["a"] = 1.5;
        assert!(matches!(fit_echo(&rec, &init), Err(FitError::InitOutOfBounds(_))));
    }
}
