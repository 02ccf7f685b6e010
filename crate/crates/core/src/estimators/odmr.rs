use super::nlls::{nlls_solve, CurveModel, FitResult, NllsOptions, ParamTable};
use super::FitError;
use crate::signal_synth::{lorentzian, MeasurementRecord, RecordKind};

/// Two Lorentzian dips on a flat baseline:
/// baseline − contrast·(L(f; c1, w) + L(f; c2, w)).
pub struct OdmrDoublet;

pub const ODMR_PARAMS: [&str; 5] = ["c1", "c2", "linewidth", "contrast", "baseline"];

impl CurveModel for OdmrDoublet {
    fn param_names(&self) -> &[&'static str] {
        &ODMR_PARAMS
    }

    fn eval(&self, f: f64, p: &[f64]) -> f64 {
        p[4] - p[3] * (lorentzian(f, p[0], p[2]) + lorentzian(f, p[1], p[2]))
    }

    fn gradient(&self, f: f64, p: &[f64], grad: &mut [f64]) {
        let (w, contrast) = (p[2], p[3]);
        let parts = |c: f64| {
            let u = 2.0 * (f - c) / w;
            let q = 1.0 + u * u;
            let l = 1.0 / q;
            let dl_dc = 4.0 * u / (w * q * q);
            let dl_dw = 2.0 * u * u / (w * q * q);
            (l, dl_dc, dl_dw)
        };
        let (l1, dc1, dw1) = parts(p[0]);
        let (l2, dc2, dw2) = parts(p[1]);
        grad[0] = -contrast * dc1;
        grad[1] = -contrast * dc2;
        grad[2] = -contrast * (dw1 + dw2);
        grad[3] = -(l1 + l2);
        grad[4] = 1.0;
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Gaussian-equivalent noise level from the median absolute deviation of
/// first differences.
pub fn noise_mad(values: &[f64]) -> f64 {
    if values.len() < 3 {
        return 0.0;
    }
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let m = median(diffs.clone());
    let mad = median(diffs.iter().map(|d| (d - m).abs()).collect());
    1.4826 * mad / std::f64::consts::SQRT_2
}

fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[((v.len() - 1) as f64 * q).round() as usize]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dip {
    pub index: usize,
    pub depth: f64,
}

/// Finds the two deepest well-separated local minima below
/// baseline − 2·noise. Two minima count as separate only if the signal
/// between them rises at least 2·noise above the shallower one.
pub fn find_two_dips(values: &[f64]) -> Result<(f64, f64, [Dip; 2]), FitError> {
    let n = values.len();
    if n < 5 {
        return Err(FitError::PeakSearchFailed { found: 0 });
    }
    let noise = noise_mad(values);
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 2).min(n - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let baseline = quantile(values, 0.9);
    let threshold = baseline - 2.0 * noise;
    let mut candidates: Vec<Dip> = (1..n - 1)
        .filter(|&i| smooth[i] <= smooth[i - 1] && smooth[i] < smooth[i + 1] && smooth[i] < threshold)
        .map(|i| Dip { index: i, depth: baseline - smooth[i] })
        .collect();
    candidates.sort_by(|a, b| b.depth.total_cmp(&a.depth));

    let mut picked: Vec<Dip> = Vec::new();
    for cand in candidates {
        let separated = picked.iter().all(|p| {
            let (lo, hi) = if p.index < cand.index { (p.index, cand.index) } else { (cand.index, p.index) };
            let ridge = smooth[lo..=hi].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let shallower = smooth[p.index].max(smooth[cand.index]);
            ridge - shallower > 2.0 * noise
        });
        if separated {
            picked.push(cand);
        }
        if picked.len() == 2 {
            break;
        }
    }
    if picked.len() < 2 {
        return Err(FitError::PeakSearchFailed { found: picked.len() });
    }
    picked.sort_by_key(|d| d.index);
    Ok((baseline, noise, [picked[0], picked[1]]))
}

/// Full width at half depth of the dip at `index`, by walking outwards.
fn half_depth_width(axis: &[f64], values: &[f64], index: usize, baseline: f64) -> Option<f64> {
    let half = baseline - 0.5 * (baseline - values[index]);
    let left = (0..index).rev().find(|&i| values[i] >= half)?;
    let right = (index + 1..values.len()).find(|&i| values[i] >= half)?;
    Some(axis[right] - axis[left])
}

/// Fits two Lorentzian dips. Returns c1 < c2.
pub fn fit_odmr_doublet(rec: &MeasurementRecord) -> Result<FitResult, FitError> {
    if rec.kind != RecordKind::Odmr {
        return Err(FitError::WrongKind { expected: RecordKind::Odmr, got: rec.kind });
    }
    let (baseline, _noise, dips) = find_two_dips(&rec.values)?;
    let spacing = (rec.axis[rec.len() - 1] - rec.axis[0]) / (rec.len() - 1) as f64;
    let separation = rec.axis[dips[1].index] - rec.axis[dips[0].index];
    let width = half_depth_width(&rec.axis, &rec.values, dips[0].index, baseline)
        .unwrap_or(4.0 * spacing)
        .clamp(2.0 * spacing, separation.max(2.0 * spacing));
    let depth = 0.5 * (dips[0].depth + dips[1].depth);

    let mut init = ParamTable::new();
    init.insert("c1".into(), rec.axis[dips[0].index]);
    init.insert("c2".into(), rec.axis[dips[1].index]);
    init.insert("linewidth".into(), width);
    init.insert("contrast".into(), depth.max(1e-6 * baseline.abs()));
    init.insert("baseline".into(), baseline);
    let opts = NllsOptions::default().bound("linewidth", 1e-9 * spacing, f64::INFINITY);
    let mut fit = nlls_solve(&OdmrDoublet, rec, &init, &opts)?;
    if fit.params["c1"] > fit.params["c2"] {
        for table in [&mut fit.params, &mut fit.sigmas] {
            let c1 = table["c1"];
            table["c1"] = table["c2"];
            table["c2"] = c1;
        }
    }
    Ok(fit)
}
