//! Long-run drift driver and reference solutions.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::config::{Coordinates, ExperimentConfig, SamplingConfig};
use crate::integrators::{MethodSpec, SolverConfig};
use crate::matrix::{vec_amax_r, RVector};
use crate::system::{derive_oscillatory, transform_state, ConservativeSystem};

/// Relative error series of the conserved quantities along one run.
///
/// `t` is strictly increasing and every entry is an integer multiple of the
/// step size; index 0 is the initial state, so `relerr_*[0] == 0`.
/// `runmax_*` carries the running maximum of the relative errors over *all*
/// steps up to each sample time (not just the sampled ones).
#[derive(Debug, Clone)]
pub struct DriftSeries {
    pub t: Vec<f64>,
    pub energy: Vec<f64>,
    pub kinetic: Vec<f64>,
    pub relerr_h: Vec<f64>,
    pub relerr_k: Vec<f64>,
    pub runmax_h: Vec<f64>,
    pub runmax_k: Vec<f64>,
    pub meta: DriftMeta,
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftMeta {
    pub method: String,
    pub problem: String,
    pub h: f64,
    pub t_end: f64,
    pub steps: u64,
    pub energy0: f64,
    pub kinetic0: f64,
    /// Maxima over every step of the run.
    pub max_relerr_h: f64,
    pub max_relerr_k: f64,
    pub wall_seconds: f64,
    pub iterations: IterationStats,
    /// Echo of the config that produced this series.
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IterationStats {
    pub min: u32,
    pub max: u32,
    pub mean: f64,
    pub median: f64,
}

impl IterationStats {
    fn from_counts(counts: &mut [u32]) -> Self {
        if counts.is_empty() {
            return Self {
                min: 0,
                max: 0,
                mean: 0.0,
                median: 0.0,
            };
        }
        counts.sort_unstable();
        let n = counts.len();
        let median = if n % 2 == 1 {
            counts[n / 2] as f64
        } else {
            0.5 * (counts[n / 2 - 1] as f64 + counts[n / 2] as f64)
        };
        Self {
            min: counts[0],
            max: counts[n - 1],
            mean: counts.iter().map(|&c| c as f64).sum::<f64>() / n as f64,
            median,
        }
    }
}

/// Denominator for relative errors; absolute error when the reference is 0.
fn rel_denom(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.abs()
    }
}

/// Number of steps implied by `(h, T)`; `T` must be an integer multiple of `h`.
pub fn step_count(h: f64, t_end: f64) -> Result<u64> {
    let n = (t_end / h).round();
    if n < 1.0 || !n.is_finite() {
        return Err(Error::config(format!("T={t_end} too short for h={h}")));
    }
    if (n * h - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::config(format!(
            "T={t_end} is not an integer multiple of h={h}"
        )));
    }
    Ok(n as u64)
}

/// Sample step indices for a run of `n` steps, always including 0 and `n`.
fn sample_indices(sampling: SamplingConfig, h: f64, n: u64) -> Vec<u64> {
    let mut idx = vec![0_u64];
    match sampling {
        SamplingConfig::Stride { stride } => {
            let mut k = stride as u64;
            while k < n {
                idx.push(k);
                k += stride as u64;
            }
            idx.push(n);
        }
        SamplingConfig::Log { samples } => {
            let lo = h.ln();
            let hi = (n as f64 * h).ln();
            let m = samples.max(2);
            for j in 0..m {
                let t = (lo + (hi - lo) * j as f64 / (m - 1) as f64).exp();
                let k = (t / h).round().clamp(1.0, n as f64) as u64;
                idx.push(k);
            }
            idx.push(n);
        }
    }
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// Fixed-step integration of a configured experiment, recording energy and
/// kinetic-energy drift at the sampling schedule. Deterministic for a given
/// config.
pub fn run_long(cfg: &ExperimentConfig) -> Result<DriftSeries> {
    cfg.validate()?;
    let (sys, y0) = cfg.build_problem()?;
    let osc = derive_oscillatory(&sys)?;
    let spec = cfg.method_spec(&osc)?;
    let n = step_count(cfg.h, cfg.t_end)?;
    let schedule = sample_indices(cfg.sampling, cfg.h, n);

    let h0 = sys.energy(&y0);
    let k0 = sys.kinetic(&y0);
    let (dh, dk) = (rel_denom(h0), rel_denom(k0));

    let mut t = Vec::with_capacity(schedule.len());
    let mut energy = Vec::with_capacity(schedule.len());
    let mut kinetic = Vec::with_capacity(schedule.len());
    let mut relerr_h = Vec::with_capacity(schedule.len());
    let mut relerr_k = Vec::with_capacity(schedule.len());
    let mut runmax_h_col = Vec::with_capacity(schedule.len());
    let mut runmax_k_col = Vec::with_capacity(schedule.len());
    let mut iteration_counts: Vec<u32> = Vec::with_capacity(n as usize);

    let mut runmax_h = 0.0_f64;
    let mut runmax_k = 0.0_f64;
    let started = Instant::now();

    let mut record = |step: u64, hv: f64, kv: f64, rmh: f64, rmk: f64| {
        t.push(step as f64 * cfg.h);
        energy.push(hv);
        kinetic.push(kv);
        relerr_h.push((hv - h0).abs() / dh);
        relerr_k.push((kv - k0).abs() / dk);
        runmax_h_col.push(rmh);
        runmax_k_col.push(rmk);
    };
    record(0, h0, k0, 0.0, 0.0);
    let mut next_sample = 1_usize;

    match cfg.coordinates {
        Coordinates::Original => {
            let stepper = spec.instantiate(&osc, cfg.h)?;
            let mut y = y0.clone();
            for step in 1..=n {
                let out = stepper
                    .step(&y, &cfg.solver)
                    .map_err(|e| Error::StepFailed {
                        step,
                        source: Box::new(e),
                    })?;
                y = out.y;
                iteration_counts.push(out.iterations);
                let hv = sys.energy(&y);
                let kv = sys.kinetic(&y);
                runmax_h = runmax_h.max((hv - h0).abs() / dh);
                runmax_k = runmax_k.max((kv - k0).abs() / dk);
                if next_sample < schedule.len() && schedule[next_sample] == step {
                    record(step, hv, kv, runmax_h, runmax_k);
                    next_sample += 1;
                }
            }
        }
        Coordinates::Transformed => {
            let stepper = spec.instantiate_transformed(&osc, cfg.h)?;
            let mut ytil = transform_state(&osc, &y0);
            for step in 1..=n {
                let (next, iters) =
                    stepper
                        .step(&ytil, &cfg.solver)
                        .map_err(|e| Error::StepFailed {
                            step,
                            source: Box::new(e),
                        })?;
                ytil = next;
                iteration_counts.push(iters);
                let y = crate::system::inverse_transform_real(&osc, &ytil);
                let hv = sys.energy(&y);
                let kv = sys.kinetic(&y);
                runmax_h = runmax_h.max((hv - h0).abs() / dh);
                runmax_k = runmax_k.max((kv - k0).abs() / dk);
                if next_sample < schedule.len() && schedule[next_sample] == step {
                    record(step, hv, kv, runmax_h, runmax_k);
                    next_sample += 1;
                }
            }
        }
    }

    let wall_seconds = started.elapsed().as_secs_f64();
    let meta = DriftMeta {
        method: cfg.method_label(),
        problem: cfg.problem_label().to_string(),
        h: cfg.h,
        t_end: cfg.t_end,
        steps: n,
        energy0: h0,
        kinetic0: k0,
        max_relerr_h: runmax_h,
        max_relerr_k: runmax_k,
        wall_seconds,
        iterations: IterationStats::from_counts(&mut iteration_counts),
        config: cfg.clone(),
    };

    Ok(DriftSeries {
        t,
        energy,
        kinetic,
        relerr_h,
        relerr_k,
        runmax_h: runmax_h_col,
        runmax_k: runmax_k_col,
        meta,
    })
}

/// CSV with the pinned header and 17 significant digits per value.
pub fn write_csv(series: &DriftSeries, mut w: impl Write) -> Result<()> {
    writeln!(w, "t,H,K,relerr_H,relerr_K")?;
    for i in 0..series.t.len() {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            series.t[i],
            series.energy[i],
            series.kinetic[i],
            series.relerr_h[i],
            series.relerr_k[i]
        )?;
    }
    Ok(())
}

pub fn csv_string(series: &DriftSeries) -> String {
    let mut buf = Vec::new();
    write_csv(series, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("csv is ascii")
}

/// Least-squares slope of `values` against `t` restricted to `t > transient`.
pub fn least_squares_slope(t: &[f64], values: &[f64], transient: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(values.iter())
        .filter(|(&ti, _)| ti > transient)
        .map(|(&ti, &vi)| (ti, vi))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let tbar = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let vbar = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (ti, vi) in pts {
        num += (ti - tbar) * (vi - vbar);
        den += (ti - tbar) * (ti - tbar);
    }
    if den == 0.0 {
        None
    } else {
        Some(num / den)
    }
}

/// Secular drift slope of the energy error: least-squares slope of the
/// post-transient running maximum of `relerr_H` against time.
///
/// The running maximum isolates the envelope: a bounded oscillation saturates
/// it (slope ~ 0) while genuine secular drift keeps pushing it up, so the
/// estimator discriminates the two regardless of the oscillation amplitude.
pub fn secular_slope_h(series: &DriftSeries, transient: f64) -> Option<f64> {
    least_squares_slope(&series.t, &series.runmax_h, transient)
}

pub fn secular_slope_k(series: &DriftSeries, transient: f64) -> Option<f64> {
    least_squares_slope(&series.t, &series.runmax_k, transient)
}

/// Reference solution by step halving: integrates with EI-T, doubling the
/// step count until two successive halvings agree to `tol` in the max norm,
/// then returns the finest solution.
pub fn reference_solution(
    sys: &ConservativeSystem,
    y0: &RVector,
    t_end: f64,
    tol: f64,
) -> Result<RVector> {
    if tol < 1e-12 {
        return Err(Error::invalid(format!("tolerance {tol} below 1e-12")));
    }
    if t_end == 0.0 {
        return Ok(y0.clone());
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::invalid(format!("bad final time {t_end}")));
    }
    let osc = derive_oscillatory(sys)?;
    let cfg = SolverConfig::default();

    let run = |n: u64| -> Result<RVector> {
        let h = t_end / n as f64;
        let stepper = MethodSpec::EiT.instantiate(&osc, h)?;
        let mut y = y0.clone();
        for step in 1..=n {
            y = stepper
                .step(&y, &cfg)
                .map_err(|e| Error::StepFailed {
                    step,
                    source: Box::new(e),
                })?
                .y;
        }
        Ok(y)
    };

    let mut n = 2_u64;
    let mut current = run(n)?;
    let mut agreements = 0;
    let mut best = f64::INFINITY;
    for _ in 0..20 {
        n *= 2;
        let finer = run(n)?;
        let diff = vec_amax_r(&(&finer - &current));
        best = best.min(diff);
        current = finer;
        if diff <= tol {
            agreements += 1;
            if agreements >= 2 {
                return Ok(current);
            }
        } else {
            agreements = 0;
        }
    }
    Err(Error::ToleranceNotReached { achieved: best })
}
