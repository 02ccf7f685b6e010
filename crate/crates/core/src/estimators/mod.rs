//! Parameter estimation from measurement records.
//!
//! All fits go through [`nlls_solve`], a damped Gauss–Newton solver that
//! reports 1σ uncertainties from the local curvature.

mod echo;
mod nlls;
mod odmr;
mod precession;

use thiserror::Error;

use crate::signal_synth::RecordKind;

pub use echo::{fit_echo, EchoCurve, ECHO_PARAMS};
pub use nlls::{nlls_solve, CurveModel, FitFlag, FitResult, NllsOptions, ParamTable};
pub use odmr::{find_two_dips, fit_odmr_doublet, noise_mad, Dip, OdmrDoublet, ODMR_PARAMS};
pub use precession::{
    fit_precession, fit_precession_frequency, periodogram, DampedCosine, FrequencyGrid, PRECESSION_PARAMS,
};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("{points} data points cannot determine {params} parameters")]
    InsufficientData { points: usize, params: usize },
    #[error("initial value missing for parameter '{0}'")]
    MissingParameter(String),
    #[error("non-finite input")]
    NonFinite,
    #[error("Jacobian is singular")]
    SingularJacobian,
    #[error("no convergence within the iteration budget")]
    MaxIterations(Box<FitResult>),
    #[error("expected a {expected:?} record, got {got:?}")]
    WrongKind { expected: RecordKind, got: RecordKind },
    #[error("peak search found {found} dip(s), need two")]
    PeakSearchFailed { found: usize },
    #[error("periodogram peak at grid edge ({frequency} MHz); widen the search range")]
    GridTooCoarse { frequency: f64 },
    #[error("frequency grid must satisfy 0 < min < max with positive step")]
    InvalidGrid,
    #[error("trace span {span} μs covers only {periods:.2} periods of the lowest grid frequency")]
    InsufficientSpan { span: f64, periods: f64 },
    #[error("initial parameters out of bounds: {0}")]
    InitOutOfBounds(String),
}
