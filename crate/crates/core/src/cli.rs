//! The `nvmag` command line.
//!
//! Exit status is 0 on success, 1 on usage errors (bad flags, unreadable or
//! invalid config, bad input files) and 2 on numerical failures (fits that do
//! not converge, inconsistent inversion inputs, fields outside the model's
//! range).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{fit_echo, fit_odmr_doublet, fit_precession, FitError, FitResult, FrequencyGrid, ParamTable};
use crate::format::{fmt_sig9, to_json_sig9};
use crate::inversion::{
    candidate_rings, default_tolerance, disambiguate, field_magnitude_from_revival, invert_branch,
    invert_odmr_only_with_noise, revival_time, AxialTransverse, CalibratedField, CalibratedMeasurement, CandidateSet,
    InversionError,
};
use crate::scan::{run_scan, write_maps, ScanConfig, ScanError, CONFIG_VERSION};
use crate::sensitivity::{report, NoiseBudget, SensitivityError, SensitivityReport};
use crate::signal_synth::{
    add_shot_noise, linspace, synth_echo, synth_odmr, synth_precession, EchoModel, MeasurementRecord, PrecessionModel,
    RecordKind, Sweep, SynthError,
};
use crate::spin_model::{larmor_frequency, Branch, FieldVector, NvParameters, SpinModelError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<SpinModelError> for CliError {
    fn from(e: SpinModelError) -> Self {
        match e {
            SpinModelError::InvalidParameters(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Spin(s) => s.into(),
            SynthError::EmptySweep => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::WrongKind { .. }
            | FitError::MissingParameter(_)
            | FitError::InvalidGrid
            | FitError::InitOutOfBounds(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<InversionError> for CliError {
    fn from(e: InversionError) -> Self {
        match e {
            InversionError::InvalidInput(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SensitivityError> for CliError {
    fn from(e: SensitivityError) -> Self {
        match e {
            SensitivityError::InvalidBudget(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ScanError> for CliError {
    fn from(e: ScanError) -> Self {
        match e {
            ScanError::TooClose { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "nvmag", version, about = "NV-center vector magnetometry: simulate, fit, invert, scan")]
pub struct Cli {
    /// JSON configuration document.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for photon counting noise; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (directory for `scan`); standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthetic ODMR spectrum of the exact transitions.
    SimulateOdmr(FieldArgs),
    /// Synthetic ¹⁵N free-precession trace.
    SimulatePrecession(FieldArgs),
    /// Synthetic spin-echo trace.
    SimulateEcho(FieldArgs),
    /// Fit a measurement record.
    Fit(FitArgs),
    /// Field magnitudes from fitted frequencies.
    Invert(InvertArgs),
    /// Full field vector from calibrated-field measurements.
    Disambiguate,
    /// Analytic error budget.
    Sensitivity(SensitivityArgs),
    /// Grid scan of a dipole magnet through the full pipeline.
    Scan,
}

/// Field overrides in the NV frame.
#[derive(Debug, Args)]
pub struct FieldArgs {
    /// Axial field, mT.
    #[arg(long, allow_negative_numbers = true)]
    pub bz: Option<f64>,
    /// Transverse field magnitude, mT.
    #[arg(long)]
    pub bperp: Option<f64>,
    /// Transverse azimuth, degrees.
    #[arg(long, allow_negative_numbers = true)]
    pub azimuth: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_parser = parse_kind)]
    pub kind: RecordKind,
    /// Record to fit, CSV (`axis,value`) or JSON.
    #[arg(long)]
    pub input: PathBuf,
}

fn parse_kind(s: &str) -> Result<RecordKind, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    /// Zeeman shift of the lower ODMR branch, MHz.
    #[arg(long, allow_negative_numbers = true)]
    pub dw_minus: Option<f64>,
    /// Zeeman shift of the upper ODMR branch, MHz.
    #[arg(long, allow_negative_numbers = true)]
    pub dw_plus: Option<f64>,
    /// m_s = 0 ¹⁵N Larmor frequency, MHz.
    #[arg(long)]
    pub omega_l: Option<f64>,
    /// 1σ of the Larmor frequency (or of the branch sum for the ODMR-only route), MHz.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    /// First echo revival time, μs; adds the revival |B| cross-check.
    #[arg(long)]
    pub tau_re: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    /// Operating-point axial field, mT.
    #[arg(long, default_value_t = 3.129)]
    pub bz: f64,
    /// Operating-point transverse field, mT.
    #[arg(long, default_value_t = 2.426)]
    pub bperp: f64,
}

/// Frequency sweep and line shape for `simulate-odmr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdmrSection {
    pub sweep: Sweep,
    pub linewidth: f64,
    pub contrast: f64,
}

impl Default for OdmrSection {
    fn default() -> Self {
        Self { sweep: Sweep::new(2780.0, 2792.0, 241), linewidth: 0.8, contrast: 0.15 }
    }
}

/// Uniform sample points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Samples {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Samples {
    fn values(&self) -> Result<Vec<f64>, CliError> {
        if self.points < 1 || !(self.stop >= self.start) || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(CliError::Usage("samples need points ≥ 1 and start ≤ stop".into()));
        }
        if self.points > 1 && self.stop == self.start {
            return Err(CliError::Usage("samples with several points need start < stop".into()));
        }
        Ok(linspace(self.start, self.stop, self.points))
    }
}

/// `simulate-precession` model. ω_L defaults to the Larmor frequency of the
/// configured field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrecessionSection {
    pub i0: f64,
    pub ic: f64,
    pub omega_l: Option<f64>,
    pub t0: f64,
    pub times: Samples,
    /// Periodogram range used by `fit --kind precession`.
    pub grid: FrequencyGrid,
}

impl Default for PrecessionSection {
    fn default() -> Self {
        Self {
            i0: 1.0,
            ic: 0.3,
            omega_l: None,
            t0: 156.0,
            times: Samples { start: 0.0, stop: 312.0, points: 600 },
            grid: FrequencyGrid::new(0.01, 0.5),
        }
    }
}

/// `simulate-echo` model, also the initial guess for `fit --kind echo`.
/// τ_re defaults to the ¹³C revival of the configured field and ω₁ to its
/// ¹⁵N Larmor frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EchoSection {
    pub tau_c: f64,
    pub tau_re: Option<f64>,
    pub a: f64,
    pub b: f64,
    pub omega1: Option<f64>,
    pub omega2: f64,
    pub taus: Samples,
}

impl Default for EchoSection {
    fn default() -> Self {
        Self {
            tau_c: 8.0,
            tau_re: None,
            a: 0.6,
            b: 0.7,
            omega1: None,
            omega2: 3.03,
            taus: Samples { start: 0.0, stop: 40.0, points: 801 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// Counts per second at unit intensity.
    pub photon_rate: f64,
    /// Seconds per sample point.
    pub dwell: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Magnitudes {
    pub bz_abs: f64,
    pub b_perp: f64,
}

impl From<Magnitudes> for AxialTransverse {
    fn from(m: Magnitudes) -> Self {
        AxialTransverse::new(m.bz_abs, m.b_perp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibratedInput {
    /// Known field, NV frame, mT.
    pub field: [f64; 3],
    /// Reconstruction of the total field with `field` applied.
    pub measured: Magnitudes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisambiguateSection {
    pub base: Magnitudes,
    #[serde(default)]
    pub calibrated: Vec<CalibratedInput>,
    /// Matching tolerance, mT. Defaults to three times the magnitude sigma.
    #[serde(default)]
    pub tol: Option<f64>,
    /// 1σ of the reconstructed |B_z| and B_⊥, mT.
    #[serde(default)]
    pub sigma_bz: f64,
    #[serde(default)]
    pub sigma_bperp: f64,
}

/// Configuration document for every subcommand except `scan`, which reads a
/// scan document (see [`ScanConfig`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub version: u32,
    #[serde(default)]
    pub nv: NvParameters,
    /// NV-frame field, mT.
    #[serde(default = "default_field")]
    pub field: FieldVector,
    #[serde(default)]
    pub odmr: OdmrSection,
    #[serde(default)]
    pub precession: PrecessionSection,
    #[serde(default)]
    pub echo: EchoSection,
    #[serde(default)]
    pub noise: Option<NoiseSection>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub budget: NoiseBudget,
    #[serde(default)]
    pub disambiguate: Option<DisambiguateSection>,
}

fn default_field() -> FieldVector {
    FieldVector::from_axial_transverse(3.129, 2.426, 0.0)
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            nv: NvParameters::default(),
            field: default_field(),
            odmr: OdmrSection::default(),
            precession: PrecessionSection::default(),
            echo: EchoSection::default(),
            noise: None,
            seed: 0,
            budget: NoiseBudget::default(),
            disambiguate: None,
        }
    }
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: SimConfig = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        if cfg.version != CONFIG_VERSION {
            return Err(CliError::Usage(format!(
                "config: unsupported version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        cfg.nv.validate().map_err(|e| CliError::Usage(format!("config: {e}")))?;
        Ok(cfg)
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_sim_config(cli: &Cli) -> Result<SimConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => SimConfig::from_json(&read_text(path)?)?,
        None => SimConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Usage(format!("cannot write output: {e}")))
        }
    }
}

fn json<T: Serialize + ?Sized>(value: &T) -> Result<String, CliError> {
    to_json_sig9(value).map_err(|e| CliError::Numerical(format!("serializing output: {e}")))
}

fn field_with_overrides(cfg: &SimConfig, args: &FieldArgs) -> FieldVector {
    let f = cfg.field;
    if args.bz.is_none() && args.bperp.is_none() && args.azimuth.is_none() {
        return f;
    }
    FieldVector::from_axial_transverse(
        args.bz.unwrap_or(f.bz),
        args.bperp.unwrap_or(f.b_perp()),
        args.azimuth.unwrap_or(f.azimuth_deg()),
    )
}

fn with_noise(rec: MeasurementRecord, cfg: &SimConfig) -> Result<MeasurementRecord, CliError> {
    match &cfg.noise {
        Some(n) => Ok(add_shot_noise(&rec, n.photon_rate, n.dwell, cfg.seed)?),
        None => Ok(rec),
    }
}

fn record_output(rec: &MeasurementRecord, format: OutputFormat) -> Result<String, CliError> {
    match format {
        OutputFormat::Json => json(rec),
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            rec.write_csv(&mut buf)?;
            String::from_utf8(buf).map_err(|e| CliError::Numerical(e.to_string()))
        }
    }
}

/// Precession model of the configured section at field `b`.
pub fn precession_model(
    section: &PrecessionSection,
    b: &FieldVector,
    p: &NvParameters,
) -> Result<PrecessionModel, CliError> {
    let omega_l = match section.omega_l {
        Some(w) => w,
        None => larmor_frequency(b, p)?,
    };
    Ok(PrecessionModel { i0: section.i0, ic: section.ic, omega_l, t0: section.t0 })
}

/// Echo model of the configured section at field `b`.
pub fn echo_model(section: &EchoSection, b: &FieldVector, p: &NvParameters) -> Result<EchoModel, CliError> {
    let tau_re = match section.tau_re {
        Some(t) => t,
        None => revival_time(b.magnitude(), p),
    };
    let omega1 = match section.omega1 {
        Some(w) => w,
        None => larmor_frequency(b, p)?,
    };
    Ok(EchoModel { tau_c: section.tau_c, tau_re, a: section.a, b: section.b, omega1, omega2: section.omega2 })
}

fn simulate(cli: &Cli, kind: RecordKind, args: &FieldArgs) -> Result<(), CliError> {
    let cfg = load_sim_config(cli)?;
    let b = field_with_overrides(&cfg, args);
    let p = &cfg.nv;
    let rec = match kind {
        RecordKind::Odmr => synth_odmr(&b, p, cfg.odmr.sweep, cfg.odmr.linewidth, cfg.odmr.contrast)?,
        RecordKind::Precession => {
            let model = precession_model(&cfg.precession, &b, p)?;
            model.validate()?;
            synth_precession(&model, &cfg.precession.times.values()?)?
        }
        RecordKind::Echo => {
            let model = echo_model(&cfg.echo, &b, p)?;
            synth_echo(&model, &cfg.echo.taus.values()?)?
        }
    };
    let rec = with_noise(rec, &cfg)?;
    emit(cli.out.as_deref(), &record_output(&rec, cli.format.unwrap_or(OutputFormat::Csv))?)
}

fn read_record(path: &Path, kind: RecordKind) -> Result<MeasurementRecord, CliError> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let rec = if is_json {
        let rec: MeasurementRecord =
            serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        rec.validate().map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        rec
    } else {
        let file = fs::File::open(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        MeasurementRecord::read_csv(file, kind).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
    };
    if rec.kind != kind {
        return Err(CliError::Usage(format!("{} holds a {:?} record, not {kind:?}", path.display(), rec.kind)));
    }
    Ok(rec)
}

fn fit_output(fit: &FitResult, format: OutputFormat) -> Result<String, CliError> {
    match format {
        OutputFormat::Json => json(fit),
        OutputFormat::Csv => {
            let mut s = format!(
                "# converged={} iterations={} residual_norm={}\nparameter,value,sigma\n",
                fit.converged,
                fit.iterations,
                fmt_sig9(fit.residual_norm)
            );
            for (name, value) in &fit.params {
                s.push_str(&format!("{name},{},{}\n", fmt_sig9(*value), fmt_sig9(fit.sigma(name))));
            }
            Ok(s)
        }
    }
}

fn fit(cli: &Cli, args: &FitArgs) -> Result<(), CliError> {
    let cfg = load_sim_config(cli)?;
    let rec = read_record(&args.input, args.kind)?;
    let result = match args.kind {
        RecordKind::Odmr => fit_odmr_doublet(&rec)?,
        RecordKind::Precession => fit_precession(&rec, cfg.precession.grid)?,
        RecordKind::Echo => {
            let m = echo_model(&cfg.echo, &cfg.field, &cfg.nv)?;
            let init: ParamTable = [
                ("tau_c", m.tau_c),
                ("tau_re", m.tau_re),
                ("a", m.a),
                ("b", m.b),
                ("omega1", m.omega1),
                ("omega2", m.omega2),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
            fit_echo(&rec, &init)?
        }
    };
    if !result.converged {
        return Err(CliError::Numerical(format!("fit did not converge in {} iterations", result.iterations)));
    }
    emit(cli.out.as_deref(), &fit_output(&result, cli.format.unwrap_or(OutputFormat::Json))?)
}

#[derive(Debug, Serialize)]
struct InversionOutput {
    route: &'static str,
    bz_abs: f64,
    b_perp: f64,
    theta: f64,
    magnitude: f64,
    iterations: usize,
    warnings: Vec<crate::inversion::InversionWarning>,
    #[serde(skip_serializing_if = "Option::is_none")]
    revival_magnitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    revival_discrepancy: Option<f64>,
}

fn invert(cli: &Cli, args: &InvertArgs) -> Result<(), CliError> {
    let cfg = load_sim_config(cli)?;
    let p = &cfg.nv;
    let (route, at) = match (args.omega_l, args.dw_minus, args.dw_plus) {
        (Some(w), Some(dm), None) => ("larmor", invert_branch(dm, Branch::Minus, w, args.sigma, p)?),
        (Some(w), None, Some(dp)) => ("larmor", invert_branch(dp, Branch::Plus, w, args.sigma, p)?),
        (None, Some(dm), Some(dp)) => ("odmr_only", invert_odmr_only_with_noise(dp, dm, args.sigma, p)?),
        _ => {
            return Err(CliError::Usage(
                "invert needs --omega-l with one of --dw-minus/--dw-plus, or both --dw-minus and --dw-plus".into(),
            ))
        }
    };
    let revival = args.tau_re.map(|t| field_magnitude_from_revival(t, p)).transpose()?;
    let out = InversionOutput {
        route,
        bz_abs: at.bz_abs,
        b_perp: at.b_perp,
        theta: at.theta,
        magnitude: at.magnitude(),
        iterations: at.iterations,
        warnings: at.warnings.clone(),
        revival_magnitude: revival,
        revival_discrepancy: revival.map(|r| (at.magnitude() - r) / r),
    };
    let text = match cli.format.unwrap_or(OutputFormat::Json) {
        OutputFormat::Json => json(&out)?,
        OutputFormat::Csv => {
            let mut s = String::from("bz_abs_mt,b_perp_mt,theta_deg,magnitude_mt,revival_magnitude_mt\n");
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_sig9(out.bz_abs),
                fmt_sig9(out.b_perp),
                fmt_sig9(out.theta),
                fmt_sig9(out.magnitude),
                out.revival_magnitude.map(fmt_sig9).unwrap_or_default()
            ));
            s
        }
    };
    emit(cli.out.as_deref(), &text)
}

fn candidates_output(set: &CandidateSet, format: OutputFormat) -> Result<String, CliError> {
    match format {
        OutputFormat::Json => json(set),
        OutputFormat::Csv => {
            let mut s = format!("# stage={:?} tolerance={}\n", set.stage, fmt_sig9(set.tolerance)).to_lowercase();
            s.push_str("item,bx_mt,by_mt,bz_mt,ring_z_mt,ring_r_mt\n");
            for v in &set.vectors {
                s.push_str(&format!("vector,{},{},{},,\n", fmt_sig9(v.bx), fmt_sig9(v.by), fmt_sig9(v.bz)));
            }
            for r in &set.rings {
                s.push_str(&format!("ring,,,,{},{}\n", fmt_sig9(r.z), fmt_sig9(r.r)));
            }
            Ok(s)
        }
    }
}

fn run_disambiguate(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_sim_config(cli)?;
    let section = cfg
        .disambiguate
        .ok_or_else(|| CliError::Usage("disambiguate needs a 'disambiguate' section in --config".into()))?;
    let base: AxialTransverse = section.base.into();
    let tol = section.tol.unwrap_or_else(|| default_tolerance(section.sigma_bz, section.sigma_bperp));
    let format = cli.format.unwrap_or(OutputFormat::Json);
    let set = if section.calibrated.is_empty() {
        CandidateSet { tolerance: tol, ..candidate_rings(&base) }
    } else {
        let cals: Vec<CalibratedMeasurement> = section
            .calibrated
            .iter()
            .map(|c| CalibratedMeasurement { field: CalibratedField::new(c.field.into()), measured: c.measured.into() })
            .collect();
        if let Some(c) = cals.iter().find(|c| c.field.is_degenerate(tol)) {
            eprintln!(
                "warning: calibrated field {:?} is parallel or perpendicular to the NV axis",
                c.field.vector.as_array()
            );
        }
        match disambiguate(&base, &cals, tol) {
            Ok(set) => set,
            Err(InversionError::AmbiguityRemains(set)) => {
                eprintln!("note: calibrated fields leave the field ambiguous; reporting remaining candidates");
                *set
            }
            Err(e) => return Err(e.into()),
        }
    };
    emit(cli.out.as_deref(), &candidates_output(&set, format)?)
}

fn sensitivity_output(r: &SensitivityReport, format: OutputFormat) -> Result<String, CliError> {
    match format {
        OutputFormat::Json => json(r),
        OutputFormat::Csv => {
            let rows = [
                ("delta_bz_odmr", r.delta_bz_odmr, "mT"),
                ("delta_omega_l", r.delta_omega_l, "MHz"),
                ("delta_bperp_precession", r.delta_bperp_precession, "mT"),
                ("delta_bperp_precession_full", r.delta_bperp_precession_full, "mT"),
                ("delta_bperp_odmr_only", r.delta_bperp_odmr_only, "mT"),
                ("temperature_sum_shift", r.temperature_sum_shift, "MHz"),
                ("temperature_error_odmr_only", r.temperature_error_odmr_only, "mT"),
                ("larmor_temperature_shift", r.larmor_temperature_shift, "MHz"),
            ];
            let mut s =
                format!("# bz_abs={} mT b_perp={} mT\nquantity,value,unit\n", fmt_sig9(r.bz_abs), fmt_sig9(r.b_perp));
            for (name, v, unit) in rows {
                s.push_str(&format!("{name},{},{unit}\n", fmt_sig9(v)));
            }
            Ok(s)
        }
    }
}

fn sensitivity(cli: &Cli, args: &SensitivityArgs) -> Result<(), CliError> {
    let cfg = load_sim_config(cli)?;
    let r = report(&cfg.budget, args.bz.abs(), args.bperp, &cfg.nv)?;
    emit(cli.out.as_deref(), &sensitivity_output(&r, cli.format.unwrap_or(OutputFormat::Csv))?)
}

fn scan(cli: &Cli) -> Result<(), CliError> {
    let dir = cli.out.as_deref().ok_or_else(|| CliError::Usage("scan needs --out DIR".into()))?;
    let mut cfg = match &cli.config {
        Some(path) => ScanConfig::from_json(&read_text(path)?)?,
        None => ScanConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let result = run_scan(&cfg)?;
    let paths = write_maps(&result, &cfg, dir).map_err(|e| CliError::Usage(e.to_string()))?;
    let flagged = result.points.iter().filter(|p| !p.is_ok()).count();
    eprintln!("scan: {} points, {flagged} flagged, {} files in {}", result.points.len(), paths.len(), dir.display());
    Ok(())
}

/// Executes a parsed command line.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::SimulateOdmr(a) => simulate(cli, RecordKind::Odmr, a),
        Command::SimulatePrecession(a) => simulate(cli, RecordKind::Precession, a),
        Command::SimulateEcho(a) => simulate(cli, RecordKind::Echo, a),
        Command::Fit(a) => fit(cli, a),
        Command::Invert(a) => invert(cli, a),
        Command::Disambiguate => run_disambiguate(cli),
        Command::Sensitivity(a) => sensitivity(cli, a),
        Command::Scan => scan(cli),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("nvmag: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("usage: nvmag [--config PATH] [--seed N] [--out PATH] [--format csv|json] <COMMAND>");
            }
            e.exit_code()
        }
    }
}
