//! Convergence-order and drift-scaling studies.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrators::{MethodSpec, SolverConfig};
use crate::matrix::{vec_amax_r, RVector};
use crate::system::{derive_oscillatory, ConservativeSystem};

use super::runner::step_count;

/// Drift maxima below this are treated as roundoff; no exponent is fitted.
/// Per-step rounding accumulates to a few 1e-11 over the longest runs used
/// here, while genuine O(h) drift sits orders of magnitude higher.
pub const ROUNDOFF_DRIFT_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceStudy {
    pub h: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of log(error) against log(h).
    pub order: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftScalingStudy {
    pub h: Vec<f64>,
    pub max_relerr_h: Vec<f64>,
    pub max_relerr_k: Vec<f64>,
    /// Fitted scaling exponents of max drift against h; `None` when the
    /// drift sits at roundoff and a fit would be meaningless.
    pub exponent_h: Option<f64>,
    pub exponent_k: Option<f64>,
}

fn validate_h_list(h_list: &[f64], t_end: f64) -> Result<()> {
    if h_list.len() < 3 {
        return Err(Error::config("need at least 3 step sizes"));
    }
    for win in h_list.windows(2) {
        if !(win[1] < win[0]) {
            return Err(Error::config("step sizes must be strictly decreasing"));
        }
    }
    for &h in h_list {
        step_count(h, t_end)?;
    }
    Ok(())
}

fn integrate_to(
    spec: &MethodSpec,
    sys: &ConservativeSystem,
    y0: &RVector,
    h: f64,
    n: u64,
    cfg: &SolverConfig,
) -> Result<RVector> {
    let osc = derive_oscillatory(sys)?;
    let stepper = spec.instantiate(&osc, h)?;
    let mut y = y0.clone();
    for step in 1..=n {
        y = stepper
            .step(&y, cfg)
            .map_err(|e| Error::StepFailed {
                step,
                source: Box::new(e),
            })?
            .y;
    }
    Ok(y)
}

fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.max(1e-300).ln()).collect();
    let xbar = lx.iter().sum::<f64>() / n;
    let ybar = ly.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..lx.len() {
        num += (lx[i] - xbar) * (ly[i] - ybar);
        den += (lx[i] - xbar) * (lx[i] - xbar);
    }
    num / den
}

/// Global-error convergence study: integrates to `t_end` for each step size,
/// measures the max-norm error against a reference computed with the *same*
/// method at `min(h)/100`, and fits the order as the log-log slope.
pub fn convergence_study(
    sys: &ConservativeSystem,
    y0: &RVector,
    spec: &MethodSpec,
    h_list: &[f64],
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<ConvergenceStudy> {
    validate_h_list(h_list, t_end)?;
    let h_min = *h_list.last().unwrap();
    let h_ref = h_min / 100.0;
    let n_ref = step_count(h_min, t_end)? * 100;
    let reference = integrate_to(spec, sys, y0, h_ref, n_ref, cfg)?;

    let mut errors = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let n = step_count(h, t_end)?;
        let y = integrate_to(spec, sys, y0, h, n, cfg)?;
        errors.push(vec_amax_r(&(y - &reference)));
    }
    let order = loglog_slope(h_list, &errors);
    Ok(ConvergenceStudy {
        h: h_list.to_vec(),
        errors,
        order,
    })
}

/// Maximum relative energy drift per step size, with the fitted scaling
/// exponent of drift against h. The maxima are taken over every step.
pub fn drift_scaling_study(
    sys: &ConservativeSystem,
    y0: &RVector,
    spec: &MethodSpec,
    h_list: &[f64],
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<DriftScalingStudy> {
    validate_h_list(h_list, t_end)?;
    let osc = derive_oscillatory(sys)?;
    let h0 = sys.energy(y0);
    let k0 = sys.kinetic(y0);
    let dh = if h0 == 0.0 { 1.0 } else { h0.abs() };
    let dk = if k0 == 0.0 { 1.0 } else { k0.abs() };

    let mut max_h = Vec::with_capacity(h_list.len());
    let mut max_k = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let n = step_count(h, t_end)?;
        let stepper = spec.instantiate(&osc, h)?;
        let mut y = y0.clone();
        let mut mh = 0.0_f64;
        let mut mk = 0.0_f64;
        for step in 1..=n {
            y = stepper
                .step(&y, cfg)
                .map_err(|e| Error::StepFailed {
                    step,
                    source: Box::new(e),
                })?
                .y;
            mh = mh.max((sys.energy(&y) - h0).abs() / dh);
            mk = mk.max((sys.kinetic(&y) - k0).abs() / dk);
        }
        max_h.push(mh);
        max_k.push(mk);
    }

    let fit = |vals: &[f64]| -> Option<f64> {
        if vals.iter().all(|&v| v <= ROUNDOFF_DRIFT_FLOOR) {
            None
        } else {
            Some(loglog_slope(h_list, vals))
        }
    };
    Ok(DriftScalingStudy {
        h: h_list.to_vec(),
        max_relerr_h: max_h.clone(),
        max_relerr_k: max_k.clone(),
        exponent_h: fit(&max_h),
        exponent_k: fit(&max_k),
    })
}
