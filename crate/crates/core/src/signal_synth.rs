//! Synthetic measurement records: ODMR spectra, nuclear free precession and
//! electron spin echo, plus photon counting noise.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::fmt_sig9;
use crate::spin_model::{exact_transitions, FieldVector, NvParameters, SpinModelError};

/// Name of the generator recorded in noise provenance.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha), seed_from_u64";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("sweep needs at least two points and a finite increasing range")]
    BadSweep,
    #[error("no transition falls inside the sweep window")]
    EmptySweep,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Spin(#[from] SpinModelError),
    #[error("record I/O: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Odmr,
    Precession,
    Echo,
}

impl RecordKind {
    pub fn axis_label(self) -> &'static str {
        match self {
            RecordKind::Odmr => "frequency_mhz",
            RecordKind::Precession | RecordKind::Echo => "time_us",
        }
    }
}

impl std::str::FromStr for RecordKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "odmr" => Ok(RecordKind::Odmr),
            "precession" => Ok(RecordKind::Precession),
            "echo" => Ok(RecordKind::Echo),
            other => Err(format!("unknown record kind '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProvenance {
    pub photon_rate: f64,
    pub dwell: f64,
    pub seed: u64,
    pub rng: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RecordMeta {
    pub generator: String,
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseProvenance>,
}

/// A sampled signal: frequency sweep (MHz) or time trace (μs) with
/// normalized intensity values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub kind: RecordKind,
    pub axis: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: RecordMeta,
}

impl MeasurementRecord {
    pub fn new(kind: RecordKind, axis: Vec<f64>, values: Vec<f64>) -> Self {
        Self { kind, axis, values, meta: RecordMeta::default() }
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    /// Checks the record invariants: matching lengths, strictly increasing
    /// axis, finite values.
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.axis.len() != self.values.len() {
            return Err(SynthError::InvalidArgument("axis and values differ in length".into()));
        }
        if self.axis.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SynthError::InvalidArgument("axis must be strictly increasing".into()));
        }
        if self.values.iter().chain(&self.axis).any(|v| !v.is_finite()) {
            return Err(SynthError::InvalidArgument("non-finite sample".into()));
        }
        Ok(())
    }

    /// Multiplies every value by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// Two-column CSV with a header naming the axis units.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SynthError> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| SynthError::Io(e.to_string());
        w.write_record([self.kind.axis_label(), "value"]).map_err(io)?;
        for (x, y) in self.axis.iter().zip(&self.values) {
            w.write_record([fmt_sig9(*x), fmt_sig9(*y)]).map_err(io)?;
        }
        w.flush().map_err(|e| SynthError::Io(e.to_string()))
    }

    /// Reads the CSV written by [`write_csv`](Self::write_csv). The kind
    /// cannot always be recovered from the header, so the caller supplies it.
    pub fn read_csv<R: Read>(input: R, kind: RecordKind) -> Result<Self, SynthError> {
        let mut r = csv::Reader::from_reader(input);
        let io = |e: csv::Error| SynthError::Io(e.to_string());
        let header = r.headers().map_err(io)?.clone();
        if header.len() != 2 || &header[0] != kind.axis_label() {
            return Err(SynthError::Io(format!(
                "expected header '{},value', got '{}'",
                kind.axis_label(),
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut axis = Vec::new();
        let mut values = Vec::new();
        for row in r.records() {
            let row = row.map_err(io)?;
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| SynthError::Io(format!("bad number '{s}': {e}")));
            axis.push(parse(&row[0])?);
            values.push(parse(&row[1])?);
        }
        let rec = Self::new(kind, axis, values);
        rec.validate()?;
        Ok(rec)
    }
}

/// Frequency sweep, MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Sweep {
    pub fn new(start: f64, stop: f64, points: usize) -> Self {
        Self { start, stop, points }
    }

    pub fn samples(&self) -> Result<Vec<f64>, SynthError> {
        if self.points < 2 || !(self.stop > self.start) || !self.start.is_finite() {
            return Err(SynthError::BadSweep);
        }
        Ok(linspace(self.start, self.stop, self.points))
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.start && f <= self.stop
    }
}

pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![start];
    }
    let step = (stop - start) / (n - 1) as f64;
    (0..n).map(|i| start + step * i as f64).collect()
}

/// Unit-peak Lorentzian with full width at half maximum `fwhm`.
pub fn lorentzian(f: f64, center: f64, fwhm: f64) -> f64 {
    let u = 2.0 * (f - center) / fwhm;
    1.0 / (1.0 + u * u)
}

/// ODMR spectrum with dips at explicit line centers: 1 − contrast·Σ L(f; c_k, w).
pub fn synth_odmr_lines(
    centers: &[f64],
    sweep: Sweep,
    linewidth: f64,
    contrast: f64,
) -> Result<MeasurementRecord, SynthError> {
    if !(linewidth > 0.0) {
        return Err(SynthError::InvalidArgument("linewidth must be positive".into()));
    }
    if !(0.0..1.0).contains(&contrast) {
        return Err(SynthError::InvalidArgument("contrast must lie in [0, 1)".into()));
    }
    let axis = sweep.samples()?;
    let inside: Vec<f64> = centers.iter().copied().filter(|c| sweep.contains(*c)).collect();
    if inside.is_empty() {
        return Err(SynthError::EmptySweep);
    }
    let values = axis
        .iter()
        .map(|&f| 1.0 - contrast * inside.iter().map(|&c| lorentzian(f, c, linewidth)).sum::<f64>())
        .collect();
    let mut rec = MeasurementRecord::new(RecordKind::Odmr, axis, values);
    rec.meta.generator = "odmr".into();
    rec.meta.params.insert("linewidth".into(), linewidth);
    rec.meta.params.insert("contrast".into(), contrast);
    for (k, c) in inside.iter().enumerate() {
        rec.meta.params.insert(format!("line{k}"), *c);
    }
    Ok(rec)
}

/// ODMR spectrum of the exact transitions at field `b`.
pub fn synth_odmr(
    b: &FieldVector,
    p: &NvParameters,
    sweep: Sweep,
    linewidth: f64,
    contrast: f64,
) -> Result<MeasurementRecord, SynthError> {
    let lines = exact_transitions(b, p)?;
    let mut rec = synth_odmr_lines(&lines.frequencies(), sweep, linewidth, contrast)?;
    rec.meta.params.insert("bx".into(), b.bx);
    rec.meta.params.insert("by".into(), b.by);
    rec.meta.params.insert("bz".into(), b.bz);
    Ok(rec)
}

/// I(t) = I0 + Ic·cos(2π ω_L t)·exp(−t/T0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecessionModel {
    pub i0: f64,
    pub ic: f64,
    /// MHz.
    pub omega_l: f64,
    /// μs.
    pub t0: f64,
}

impl PrecessionModel {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.ic >= 0.0) || !(self.t0 > 0.0) || !self.i0.is_finite() || !self.omega_l.is_finite() {
            return Err(SynthError::InvalidArgument("precession model needs Ic ≥ 0, T0 > 0".into()));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.i0 + self.ic * (2.0 * PI * self.omega_l * t).cos() * (-t / self.t0).exp()
    }
}

pub fn synth_precession(model: &PrecessionModel, times: &[f64]) -> Result<MeasurementRecord, SynthError> {
    model.validate()?;
    if times.is_empty() {
        return Err(SynthError::InvalidArgument("no sample times".into()));
    }
    let values = times.iter().map(|&t| model.eval(t)).collect();
    let mut rec = MeasurementRecord::new(RecordKind::Precession, times.to_vec(), values);
    rec.meta.generator = "precession".into();
    for (k, v) in [("i0", model.i0), ("ic", model.ic), ("omega_l", model.omega_l), ("t0", model.t0)] {
        rec.meta.params.insert(k.into(), v);
    }
    Ok(rec)
}

/// Echo signal with ¹³C collapse/revival envelope and ¹⁵N modulation:
///
/// S = ½ + ½(e^{−(τ/τ_c)⁴} + b·e^{−((τ−τ_re)/τ_c)⁴})·[1 − a·sin²(πω₁τ)·sin²(πω₂τ)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EchoModel {
    pub tau_c: f64,
    pub tau_re: f64,
    pub a: f64,
    pub b: f64,
    pub omega1: f64,
    pub omega2: f64,
}

impl EchoModel {
    pub fn validate(&self) -> Result<(), SynthError> {
        let ok = self.tau_c > 0.0
            && self.tau_re > 0.0
            && (0.0..=1.0).contains(&self.a)
            && (0.0..=1.0).contains(&self.b)
            && self.omega1.is_finite()
            && self.omega2.is_finite();
        if !ok {
            return Err(SynthError::InvalidArgument("echo model needs τ_c, τ_re > 0 and a, b in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn envelope(&self, tau: f64) -> f64 {
        let x = tau / self.tau_c;
        let y = (tau - self.tau_re) / self.tau_c;
        (-x.powi(4)).exp() + self.b * (-y.powi(4)).exp()
    }

    pub fn modulation(&self, tau: f64) -> f64 {
        let s1 = (PI * self.omega1 * tau).sin();
        let s2 = (PI * self.omega2 * tau).sin();
        1.0 - self.a * s1 * s1 * s2 * s2
    }

    pub fn eval(&self, tau: f64) -> f64 {
        0.5 + 0.5 * self.envelope(tau) * self.modulation(tau)
    }

    /// Largest envelope value on `[0, tau_max]`, sampled finely. Above 1 the
    /// signal can leave [0, 1], which happens when the collapse and the
    /// revival overlap.
    pub fn envelope_peak(&self, tau_max: f64) -> f64 {
        let n = 4000;
        (0..=n).map(|k| self.envelope(tau_max * k as f64 / n as f64)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn envelope_exceeds_one(&self, tau_max: f64) -> bool {
        self.envelope_peak(tau_max) > 1.0 + 1e-12
    }
}

pub fn synth_echo(model: &EchoModel, taus: &[f64]) -> Result<MeasurementRecord, SynthError> {
    model.validate()?;
    if taus.is_empty() {
        return Err(SynthError::InvalidArgument("no sample delays".into()));
    }
    let values = taus.iter().map(|&t| model.eval(t)).collect();
    let mut rec = MeasurementRecord::new(RecordKind::Echo, taus.to_vec(), values);
    rec.meta.generator = "echo".into();
    for (k, v) in [
        ("tau_c", model.tau_c),
        ("tau_re", model.tau_re),
        ("a", model.a),
        ("b", model.b),
        ("omega1", model.omega1),
        ("omega2", model.omega2),
    ] {
        rec.meta.params.insert(k.into(), v);
    }
    Ok(rec)
}

/// Replaces each value v by Poisson(v·rate·dwell)/(rate·dwell).
pub fn add_shot_noise(
    rec: &MeasurementRecord,
    photon_rate: f64,
    dwell: f64,
    seed: u64,
) -> Result<MeasurementRecord, SynthError> {
    let rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = add_shot_noise_with(rec, photon_rate, dwell, rng)?;
    out.meta.noise = Some(NoiseProvenance { photon_rate, dwell, seed, rng: RNG_ALGORITHM.into() });
    Ok(out)
}

/// Same as [`add_shot_noise`] but drawing from a caller-supplied generator,
/// for pipelines that derive per-item streams themselves.
pub fn add_shot_noise_with<R: rand::Rng>(
    rec: &MeasurementRecord,
    photon_rate: f64,
    dwell: f64,
    mut rng: R,
) -> Result<MeasurementRecord, SynthError> {
    if !(photon_rate > 0.0) || !(dwell > 0.0) {
        return Err(SynthError::InvalidArgument("photon rate and dwell must be positive".into()));
    }
    let scale = photon_rate * dwell;
    let mut out = rec.clone();
    for v in out.values.iter_mut() {
        let mean = *v * scale;
        *v = if mean > 0.0 {
            let dist =
                Poisson::new(mean).map_err(|e| SynthError::InvalidArgument(format!("counting mean {mean}: {e}")))?;
            dist.sample(&mut rng) / scale
        } else {
            0.0
        };
    }
    Ok(out)
}
