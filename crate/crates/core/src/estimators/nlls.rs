use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::FitError;
use crate::signal_synth::MeasurementRecord;

/// Named parameter values, in model order.
pub type ParamTable = IndexMap<String, f64>;

/// A parametric curve y = f(x; p).
pub trait CurveModel {
    fn param_names(&self) -> &[&'static str];

    fn eval(&self, x: f64, params: &[f64]) -> f64;

    /// ∂f/∂p at `x`. The default uses central differences.
    fn gradient(&self, x: f64, params: &[f64], grad: &mut [f64]) {
        let mut p = params.to_vec();
        for (k, g) in grad.iter_mut().enumerate() {
            let h = 1e-7 * params[k].abs().max(1e-7);
            p[k] = params[k] + h;
            let up = self.eval(x, &p);
            p[k] = params[k] - h;
            let down = self.eval(x, &p);
            p[k] = params[k];
            *g = (up - down) / (2.0 * h);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "flag", content = "param", rename_all = "snake_case")]
pub enum FitFlag {
    /// Iteration budget exhausted; the result is the best point found.
    MaxIterations,
    /// The data carry no information on this parameter (zero Jacobian column).
    Unidentifiable(String),
    /// 1σ uncertainty exceeds the magnitude of the estimate.
    PoorlyDetermined(String),
}

/// Estimates with 1σ uncertainties and fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ParamTable,
    pub sigmas: ParamTable,
    /// Euclidean norm of the residual vector.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<FitFlag>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> f64 {
        self.params[name]
    }

    pub fn sigma(&self, name: &str) -> f64 {
        self.sigmas[name]
    }

    pub fn is_flagged(&self, name: &str) -> bool {
        self.flags.iter().any(|f| match f {
            FitFlag::Unidentifiable(p) | FitFlag::PoorlyDetermined(p) => p == name,
            FitFlag::MaxIterations => false,
        })
    }
}

#[derive(Debug, Clone)]
pub struct NllsOptions {
    /// Inclusive (lower, upper) per parameter; parameters without an entry are free.
    pub bounds: IndexMap<String, (f64, f64)>,
    /// Parameters held at their initial value.
    pub fixed: Vec<String>,
    pub max_iterations: usize,
    /// Relative parameter change below which the fit has converged.
    pub xtol: f64,
    /// Gradient max-norm below which the fit has converged.
    pub gtol: f64,
    /// Initial damping relative to the normal-matrix diagonal.
    pub initial_damping: f64,
}

impl Default for NllsOptions {
    fn default() -> Self {
        Self {
            bounds: IndexMap::new(),
            fixed: Vec::new(),
            max_iterations: 500,
            xtol: 1e-10,
            gtol: 1e-12,
            initial_damping: 1e-3,
        }
    }
}

impl NllsOptions {
    pub fn bound(mut self, name: &str, lower: f64, upper: f64) -> Self {
        self.bounds.insert(name.to_string(), (lower, upper));
        self
    }

    pub fn fix(mut self, name: &str) -> Self {
        self.fixed.push(name.to_string());
        self
    }
}

const DAMPING_UP: f64 = 10.0;
const DAMPING_DOWN: f64 = 10.0;
const DAMPING_MAX: f64 = 1e32;
/// Columns with norm below this fraction of the largest are treated as empty.
const COLUMN_RANK_TOL: f64 = 1e-10;

struct Problem<'a, M: CurveModel + ?Sized> {
    model: &'a M,
    x: &'a [f64],
    y: &'a [f64],
    free: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl<M: CurveModel + ?Sized> Problem<'_, M> {
    fn residuals(&self, p: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.x.len(), self.x.iter().zip(self.y).map(|(&x, &y)| y - self.model.eval(x, p)))
    }

    /// Jacobian of the model (not the residual) over the free parameters.
    fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        let mut grad = vec![0.0; p.len()];
        let mut j = DMatrix::zeros(self.x.len(), self.free.len());
        for (row, &x) in self.x.iter().enumerate() {
            self.model.gradient(x, p, &mut grad);
            for (col, &k) in self.free.iter().enumerate() {
                j[(row, col)] = grad[k];
            }
        }
        j
    }

    fn project(&self, p: &mut [f64]) {
        for ((v, lo), hi) in p.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

/// Damped Gauss–Newton (Levenberg–Marquardt) least squares.
///
/// Minimizes Σ (y − f(x; p))² over the free parameters. The damping term is
/// λ·diag(JᵀJ), multiplied by ten after a rejected step and divided by ten
/// after an accepted one. Uncertainties are the square roots of the diagonal
/// of (JᵀJ)⁻¹ scaled by the residual variance SSR/(n − p).
pub fn nlls_solve<M: CurveModel + ?Sized>(
    model: &M,
    data: &MeasurementRecord,
    init: &ParamTable,
    opts: &NllsOptions,
) -> Result<FitResult, FitError> {
    let names = model.param_names();
    let mut p: Vec<f64> = names
        .iter()
        .map(|n| init.get(*n).copied().ok_or_else(|| FitError::MissingParameter(n.to_string())))
        .collect::<Result<_, _>>()?;
    if p.iter().any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite);
    }
    if data.values.iter().chain(&data.axis).any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite);
    }
    let free: Vec<usize> = (0..names.len()).filter(|&k| !opts.fixed.iter().any(|f| f == names[k])).collect();
    let n = data.len();
    if n <= free.len() {
        return Err(FitError::InsufficientData { points: n, params: free.len() });
    }
    let (lower, upper): (Vec<f64>, Vec<f64>) =
        names.iter().map(|n| opts.bounds.get(*n).copied().unwrap_or((f64::NEG_INFINITY, f64::INFINITY))).unzip();
    let problem = Problem { model, x: &data.axis, y: &data.values, free, lower, upper };
    problem.project(&mut p);

    let mut r = problem.residuals(&p);
    let mut ssr = r.norm_squared();
    let mut jac = problem.jacobian(&p);
    if jac.iter().all(|v| *v == 0.0) && ssr > 0.0 {
        return Err(FitError::SingularJacobian);
    }
    let mut lambda = opts.initial_damping;
    let mut iterations = 0;
    let mut converged = false;

    'outer: loop {
        let grad = jac.transpose() * &r;
        if grad.amax() < opts.gtol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        let normal = jac.transpose() * &jac;
        let diag: Vec<f64> =
            (0..normal.nrows()).map(|k| if normal[(k, k)] > 0.0 { normal[(k, k)] } else { 1.0 }).collect();
        loop {
            let mut damped = normal.clone();
            for (k, d) in diag.iter().enumerate() {
                damped[(k, k)] += lambda * d;
            }
            let step = damped.clone().cholesky().map(|c| c.solve(&grad)).or_else(|| damped.lu().solve(&grad));
            let Some(step) = step else {
                lambda *= DAMPING_UP;
                if lambda > DAMPING_MAX {
                    return Err(FitError::SingularJacobian);
                }
                continue;
            };
            let mut trial = p.clone();
            for (col, &k) in problem.free.iter().enumerate() {
                trial[k] += step[col];
            }
            problem.project(&mut trial);
            let rel_change =
                problem.free.iter().map(|&k| (trial[k] - p[k]).abs() / (p[k].abs() + 1e-12)).fold(0.0, f64::max);
            let trial_r = problem.residuals(&trial);
            let trial_ssr = trial_r.norm_squared();
            if trial_ssr.is_finite() && trial_ssr <= ssr {
                let improved = trial_ssr < ssr;
                p = trial;
                r = trial_r;
                ssr = trial_ssr;
                jac = problem.jacobian(&p);
                lambda = (lambda / DAMPING_DOWN).max(1e-15);
                if improved {
                    iterations += 1;
                }
                if rel_change < opts.xtol || !improved {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            if rel_change < opts.xtol {
                // The damped step has shrunk below resolution without improving.
                converged = true;
                break 'outer;
            }
            lambda *= DAMPING_UP;
            if lambda > DAMPING_MAX {
                converged = true;
                break 'outer;
            }
        }
    }

    let mut flags = Vec::new();
    if !converged {
        flags.push(FitFlag::MaxIterations);
    }
    let sigma_free = covariance_sigmas(&jac, ssr, n);
    let mut params = ParamTable::new();
    let mut sigmas = ParamTable::new();
    for (k, name) in names.iter().enumerate() {
        params.insert(name.to_string(), p[k]);
        let sigma = problem.free.iter().position(|&f| f == k).map_or(0.0, |col| sigma_free[col]);
        sigmas.insert(name.to_string(), sigma);
        if sigma.is_infinite() {
            flags.push(FitFlag::Unidentifiable(name.to_string()));
        } else if sigma > p[k].abs() {
            flags.push(FitFlag::PoorlyDetermined(name.to_string()));
        }
    }
    Ok(FitResult { params, sigmas, residual_norm: ssr.sqrt(), converged, iterations, flags })
}

/// 1σ from the diagonal of (JᵀJ)⁻¹·SSR/(n − p). Empty columns get infinity.
fn covariance_sigmas(jac: &DMatrix<f64>, ssr: f64, n: usize) -> Vec<f64> {
    let cols = jac.ncols();
    let norms: Vec<f64> = (0..cols).map(|c| jac.column(c).norm()).collect();
    let max_norm = norms.iter().copied().fold(0.0, f64::max);
    let live: Vec<usize> = (0..cols).filter(|&c| norms[c] > COLUMN_RANK_TOL * max_norm).collect();
    let mut out = vec![f64::INFINITY; cols];
    if live.is_empty() {
        return out;
    }
    let reduced = jac.select_columns(&live);
    let normal = reduced.transpose() * &reduced;
    let Some(inv) = normal.clone().cholesky().map(|c| c.inverse()).or_else(|| normal.try_inverse()) else {
        return out;
    };
    let variance = ssr / (n - cols) as f64;
    for (i, &c) in live.iter().enumerate() {
        let v = inv[(i, i)] * variance;
        out[c] = if v >= 0.0 { v.sqrt() } else { f64::INFINITY };
    }
    out
}
