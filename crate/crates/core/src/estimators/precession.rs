use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::nlls::{nlls_solve, CurveModel, FitResult, NllsOptions, ParamTable};
use super::FitError;
use crate::signal_synth::{MeasurementRecord, PrecessionModel, RecordKind};

/// I0 + Ic·cos(2π ω_L t)·exp(−t/T0).
pub struct DampedCosine;

pub const PRECESSION_PARAMS: [&str; 4] = ["i0", "ic", "omega_l", "t0"];

impl CurveModel for DampedCosine {
    fn param_names(&self) -> &[&'static str] {
        &PRECESSION_PARAMS
    }

    fn eval(&self, t: f64, p: &[f64]) -> f64 {
        p[0] + p[1] * (2.0 * PI * p[2] * t).cos() * (-t / p[3]).exp()
    }

    fn gradient(&self, t: f64, p: &[f64], grad: &mut [f64]) {
        let (ic, w, t0) = (p[1], p[2], p[3]);
        let (s, c) = (2.0 * PI * w * t).sin_cos();
        let e = (-t / t0).exp();
        grad[0] = 1.0;
        grad[1] = c * e;
        grad[2] = -ic * 2.0 * PI * t * s * e;
        grad[3] = ic * c * e * t / (t0 * t0);
    }
}

/// Frequency search range for the periodogram, MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub min: f64,
    pub max: f64,
    /// Grid spacing; defaults to 0.5/T_span.
    #[serde(default)]
    pub step: Option<f64>,
}

impl FrequencyGrid {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max, step: None }
    }
}

/// |Σ (y − ȳ)·exp(−2πi f t)|² on each grid frequency.
pub fn periodogram(rec: &MeasurementRecord, freqs: &[f64]) -> Vec<f64> {
    let mean = rec.values.iter().sum::<f64>() / rec.len() as f64;
    freqs
        .iter()
        .map(|&f| {
            let (mut re, mut im) = (0.0, 0.0);
            for (&t, &y) in rec.axis.iter().zip(&rec.values) {
                let (s, c) = (2.0 * PI * f * t).sin_cos();
                re += (y - mean) * c;
                im -= (y - mean) * s;
            }
            re * re + im * im
        })
        .collect()
}

/// Fits I0 + Ic·cos(2π ω_L t)·e^{−t/T0}: periodogram peak over `grid`,
/// then damped Gauss–Newton refinement of all four parameters.
pub fn fit_precession(rec: &MeasurementRecord, grid: FrequencyGrid) -> Result<FitResult, FitError> {
    if rec.kind != RecordKind::Precession {
        return Err(FitError::WrongKind { expected: RecordKind::Precession, got: rec.kind });
    }
    if rec.len() < 5 {
        return Err(FitError::InsufficientData { points: rec.len(), params: 4 });
    }
    if !(grid.min > 0.0) || !(grid.max > grid.min) {
        return Err(FitError::InvalidGrid);
    }
    let t_start = rec.axis[0];
    let span = rec.axis[rec.len() - 1] - t_start;
    if span * grid.min < 2.0 {
        return Err(FitError::InsufficientSpan { span, periods: span * grid.min });
    }
    let step = grid.step.unwrap_or(0.5 / span);
    if !(step > 0.0) {
        return Err(FitError::InvalidGrid);
    }
    let count = ((grid.max - grid.min) / step).floor() as usize + 1;
    let freqs: Vec<f64> = (0..count).map(|k| grid.min + step * k as f64).collect();
    let power = periodogram(rec, &freqs);
    let peak = power.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(k, _)| k).expect("grid is nonempty");
    if peak == 0 || peak == count - 1 {
        return Err(FitError::GridTooCoarse { frequency: freqs[peak] });
    }
    // Parabolic interpolation of the peak.
    let (a, b, c) = (power[peak - 1], power[peak], power[peak + 1]);
    let denom = a - 2.0 * b + c;
    let offset = if denom < 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    let omega = freqs[peak] + offset.clamp(-0.5, 0.5) * step;

    let t0 = 0.5 * span.max(f64::MIN_POSITIVE);
    let mean = rec.values.iter().sum::<f64>() / rec.len() as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for (&t, &y) in rec.axis.iter().zip(&rec.values) {
        let template = (2.0 * PI * omega * t).cos() * (-t / t0).exp();
        num += (y - mean) * template;
        den += template * template;
    }
    let ic = (num / den).abs().max(1e-9 * mean.abs().max(1e-300));

    let mut init = ParamTable::new();
    init.insert("i0".into(), mean);
    init.insert("ic".into(), ic);
    init.insert("omega_l".into(), omega);
    init.insert("t0".into(), t0);
    let opts = NllsOptions::default().bound("ic", 0.0, f64::INFINITY).bound("t0", 1e-12 * span, f64::INFINITY);
    nlls_solve(&DampedCosine, rec, &init, &opts)
}

/// Fits only ω_L with I0, Ic and T0 held at calibrated values. This is the
/// readout used when the trace is a short probe window around one delay.
pub fn fit_precession_frequency(rec: &MeasurementRecord, calibrated: &PrecessionModel) -> Result<FitResult, FitError> {
    if rec.kind != RecordKind::Precession {
        return Err(FitError::WrongKind { expected: RecordKind::Precession, got: rec.kind });
    }
    let mut init = ParamTable::new();
    init.insert("i0".into(), calibrated.i0);
    init.insert("ic".into(), calibrated.ic);
    init.insert("omega_l".into(), calibrated.omega_l);
    init.insert("t0".into(), calibrated.t0);
    let opts = NllsOptions::default().fix("i0").fix("ic").fix("t0");
    nlls_solve(&DampedCosine, rec, &init, &opts)
}
