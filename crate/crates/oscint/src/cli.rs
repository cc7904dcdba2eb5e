//! Command-line driver.
//!
//! Exit codes: 0 on success, 1 on configuration errors, 2 on numerical
//! failures.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{
    check_assumptions, fit_modal_amplitudes, AssumptionParams, AssumptionReport, FrequencyBasis,
    MultiIndex,
};
use crate::error::{Error, Result};
use crate::harness::{
    config::build_oscillatory, convergence_study, drift_scaling_study, run_long, secular_slope_h,
    secular_slope_k, write_csv, DriftMeta, ExperimentConfig,
};
use crate::integrators::{
    check_symmetry_numeric, is_symplectic_eio, MethodSpec, SolverConfig,
    SYMMETRY_CLASSIFICATION_FACTOR,
};
use crate::system::{derive_oscillatory, transform_state};

#[derive(Debug, Parser)]
#[command(
    name = "oscint",
    about = "Exponential-integrator benchmarks for highly oscillatory conservative systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment config and write the drift series as CSV.
    Run {
        /// JSON experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path; overrides the config's `output`, stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the sampling schedule with N log-spaced samples.
        #[arg(long)]
        log_samples: Option<usize>,
    },
    /// Run a list of configs (JSON array), one CSV per config plus a summary.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Concurrent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Summary JSON path; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override every config's sampling with N log-spaced samples.
        #[arg(long)]
        log_samples: Option<usize>,
    },
    /// Convergence-order study against a fine-step reference.
    Converge(StudyArgs),
    /// Scaling of the maximum energy drift with the step size.
    DriftScaling(StudyArgs),
    /// Structural predicates and assumption checks for one method, as JSON.
    Check {
        #[arg(long)]
        method: String,
        #[arg(long)]
        problem: String,
        #[arg(long, default_value_t = 0.5)]
        h: f64,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 1e4)]
        omega: f64,
        /// Initial-energy bound of the assumption check.
        #[arg(long, default_value_t = 10.0)]
        e_bound: f64,
        #[arg(long, default_value_t = 1.0)]
        c0: f64,
        /// Non-resonance constant c.
        #[arg(long, default_value_t = 0.1)]
        c: f64,
        /// Non-resonance truncation order N.
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Modal amplitude diagnostic on a resolved-regime run, as JSON.
    FitModes {
        #[arg(long, default_value = "wind")]
        problem: String,
        #[arg(long, default_value = "EI-T")]
        method: String,
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
        #[arg(long = "T", default_value_t = 0.1)]
        t: f64,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 1e4)]
        omega: f64,
        /// Fit window length in samples.
        #[arg(long, default_value_t = 64)]
        window: usize,
        /// Largest harmonic order fitted.
        #[arg(long, default_value_t = 3)]
        kmax: i64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct StudyArgs {
    #[arg(long)]
    method: String,
    #[arg(long, default_value = "wind")]
    problem: String,
    /// Comma-separated decreasing step sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    h: Vec<f64>,
    #[arg(long = "T")]
    t: f64,
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value_t = 1e4)]
    omega: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            log_samples,
        } => cmd_run(&config, out.as_deref(), log_samples),
        Command::Sweep {
            config,
            jobs,
            out,
            log_samples,
        } => cmd_sweep(&config, jobs, out.as_deref(), log_samples),
        Command::Converge(args) => cmd_converge(&args),
        Command::DriftScaling(args) => cmd_drift_scaling(&args),
        Command::Check {
            method,
            problem,
            h,
            eps,
            r,
            omega,
            e_bound,
            c0,
            c,
            order,
            out,
        } => cmd_check(
            &method,
            &problem,
            h,
            eps,
            r,
            omega,
            e_bound,
            c0,
            c,
            order,
            out.as_deref(),
        ),
        Command::FitModes {
            problem,
            method,
            h,
            t,
            eps,
            r,
            omega,
            window,
            kmax,
            out,
        } => cmd_fit_modes(
            &problem,
            &method,
            h,
            t,
            eps,
            r,
            omega,
            window,
            kmax,
            out.as_deref(),
        ),
    }
}

fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text)
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))
}

fn write_or_stdout(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => {
            fs::write(p, contents)?;
        }
        None => {
            print!("{contents}");
            std::io::stdout().flush()?;
        }
    }
    Ok(())
}

fn cmd_run(config_path: &Path, out: Option<&Path>, log_samples: Option<usize>) -> Result<()> {
    let mut cfg = read_config(config_path)?;
    if let Some(samples) = log_samples {
        cfg.sampling = crate::harness::SamplingConfig::Log { samples };
        cfg.validate()?;
    }
    let series = run_long(&cfg)?;
    let target: Option<PathBuf> = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.as_ref().map(PathBuf::from));
    match &target {
        Some(p) => {
            let file = fs::File::create(p)?;
            write_csv(&series, std::io::BufWriter::new(file))?;
        }
        None => {
            let stdout = std::io::stdout();
            write_csv(&series, stdout.lock())?;
        }
    }
    eprintln!(
        "{} on {}: {} steps, max relerr_H {:.3e}, max relerr_K {:.3e}, median iters {}, {:.2}s",
        series.meta.method,
        series.meta.problem,
        series.meta.steps,
        series.meta.max_relerr_h,
        series.meta.max_relerr_k,
        series.meta.iterations.median,
        series.meta.wall_seconds
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct RunSummary {
    index: usize,
    output: Option<String>,
    meta: DriftMeta,
    secular_slope_h: Option<f64>,
    secular_slope_k: Option<f64>,
}

fn cmd_sweep(
    config_path: &Path,
    jobs: usize,
    out: Option<&Path>,
    log_samples: Option<usize>,
) -> Result<()> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| Error::config(format!("{}: {e}", config_path.display())))?;
    let mut configs: Vec<ExperimentConfig> = serde_json::from_str(&text).map_err(|e| {
        Error::config(format!(
            "{}: expected a JSON array of configs: {e}",
            config_path.display()
        ))
    })?;
    if let Some(samples) = log_samples {
        for cfg in &mut configs {
            cfg.sampling = crate::harness::SamplingConfig::Log { samples };
        }
    }
    for (i, cfg) in configs.iter().enumerate() {
        cfg.validate()
            .map_err(|e| Error::config(format!("{} [{i}]: {e}", config_path.display())))?;
    }

    let jobs = jobs.max(1).min(configs.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunSummary>>>> =
        Mutex::new((0..configs.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= configs.len() {
                    break;
                }
                let cfg = &configs[i];
                let outcome = (|| -> Result<RunSummary> {
                    let series = run_long(cfg)?;
                    let output = cfg
                        .output
                        .clone()
                        .unwrap_or_else(|| format!("sweep_run_{i}.csv"));
                    let file = fs::File::create(&output)?;
                    write_csv(&series, std::io::BufWriter::new(file))?;
                    let transient = transient_cutoff(cfg.t_end);
                    Ok(RunSummary {
                        index: i,
                        output: Some(output),
                        secular_slope_h: secular_slope_h(&series, transient),
                        secular_slope_k: secular_slope_k(&series, transient),
                        meta: series.meta,
                    })
                })();
                results.lock().unwrap()[i] = Some(outcome);
            });
        }
    });

    let results = results.into_inner().unwrap();
    let mut summaries = Vec::new();
    let mut saw_numerical = false;
    let mut failures = 0_usize;
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Some(Ok(s)) => summaries.push(s),
            Some(Err(e)) => {
                eprintln!("config {} [{i}]: {e}", config_path.display());
                saw_numerical |= e.is_numerical();
                failures += 1;
            }
            None => unreachable!("worker skipped a config"),
        }
    }
    let json = serde_json::to_string_pretty(&summaries)?;
    write_or_stdout(out, &(json + "\n"))?;
    if failures == 0 {
        Ok(())
    } else {
        Err(Error::SweepFailed {
            failures,
            numerical: saw_numerical,
        })
    }
}

/// Post-transient window start used for secular-slope summaries.
fn transient_cutoff(t_end: f64) -> f64 {
    (0.001 * t_end).min(1e3)
}

fn study_problem(args: &StudyArgs) -> Result<ExperimentConfig> {
    let problem = match args.problem.as_str() {
        "wind" => crate::harness::ProblemConfig::Wind {
            r: args.r,
            eps: args.eps,
            y0: None,
        },
        "harmonic" => crate::harness::ProblemConfig::Harmonic {
            omega: args.omega,
            y0: None,
        },
        other => return Err(Error::config(format!("unknown problem {other:?}"))),
    };
    Ok(ExperimentConfig {
        problem,
        method: crate::harness::MethodConfig::Name(args.method.clone()),
        h: *args
            .h
            .first()
            .ok_or_else(|| Error::config("need at least one h"))?,
        t_end: args.t,
        sampling: Default::default(),
        solver: SolverConfig::default(),
        output: None,
        seed: 0,
        coordinates: Default::default(),
    })
}

fn cmd_converge(args: &StudyArgs) -> Result<()> {
    let cfg = study_problem(args)?;
    let (sys, osc, y0) = build_oscillatory(&cfg)?;
    let spec = cfg.method_spec(&osc)?;
    let study = convergence_study(&sys, &y0, &spec, &args.h, args.t, &SolverConfig::default())?;
    let mut table = String::from("h,global_error\n");
    for (h, e) in study.h.iter().zip(study.errors.iter()) {
        table.push_str(&format!("{h:.6e},{e:.6e}\n"));
    }
    table.push_str(&format!("fitted_order,{:.4}\n", study.order));
    print!("{table}");
    if let Some(out) = &args.out {
        fs::write(out, serde_json::to_string_pretty(&study)? + "\n")?;
    }
    Ok(())
}

fn cmd_drift_scaling(args: &StudyArgs) -> Result<()> {
    let cfg = study_problem(args)?;
    let (sys, osc, y0) = build_oscillatory(&cfg)?;
    let spec = cfg.method_spec(&osc)?;
    let study = drift_scaling_study(&sys, &y0, &spec, &args.h, args.t, &SolverConfig::default())?;
    let mut table = String::from("h,max_relerr_H,max_relerr_K\n");
    for i in 0..study.h.len() {
        table.push_str(&format!(
            "{:.6e},{:.6e},{:.6e}\n",
            study.h[i], study.max_relerr_h[i], study.max_relerr_k[i]
        ));
    }
    match study.exponent_h {
        Some(p) => table.push_str(&format!("fitted_exponent_H,{p:.4}\n")),
        None => table.push_str("fitted_exponent_H,roundoff\n"),
    }
    match study.exponent_k {
        Some(p) => table.push_str(&format!("fitted_exponent_K,{p:.4}\n")),
        None => table.push_str("fitted_exponent_K,roundoff\n"),
    }
    print!("{table}");
    if let Some(out) = &args.out {
        fs::write(out, serde_json::to_string_pretty(&study)? + "\n")?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct CheckReport {
    method: String,
    problem: String,
    h: f64,
    eps: f64,
    claims: Option<crate::integrators::MethodClaims>,
    /// Satisfies the one-stage symplecticity coefficient condition; absent
    /// for methods that are not one-stage EI-O schemes.
    symplectic_rev_cond: Option<bool>,
    symmetry_residual: f64,
    symmetric_numeric: bool,
    symmetry_threshold: f64,
    assumptions: AssumptionReport,
}

#[allow(clippy::too_many_arguments)]
fn cmd_check(
    method: &str,
    problem: &str,
    h: f64,
    eps: f64,
    r: f64,
    omega: f64,
    e_bound: f64,
    c0: f64,
    c: f64,
    order: usize,
    out: Option<&Path>,
) -> Result<()> {
    let (sys, y0) = match problem {
        "wind" => (
            crate::harness::problems::wind_problem(r, eps)?,
            crate::harness::problems::wind_initial_state(eps),
        ),
        "harmonic" => (
            crate::harness::problems::harmonic_problem(omega)?,
            crate::harness::problems::harmonic_initial_state(),
        ),
        other => return Err(Error::config(format!("unknown problem {other:?}"))),
    };
    let osc = derive_oscillatory(&sys)?;
    let spec = MethodSpec::by_name(method)?;
    let solver = SolverConfig::default();

    let (claims, symplectic_rev_cond) = match &spec {
        MethodSpec::Eio(m) => (
            Some(m.claims),
            Some(is_symplectic_eio(m, osc.dec(), h, 1e-10)?),
        ),
        MethodSpec::EiT => (
            Some(crate::integrators::MethodClaims {
                symmetric: true,
                reversible: true,
                symplectic: false,
            }),
            None,
        ),
        MethodSpec::General(_) => (None, None),
    };
    let symmetry_residual = check_symmetry_numeric(&spec, &osc, h, &y0, &solver)?;
    let threshold = SYMMETRY_CLASSIFICATION_FACTOR * solver.tol;

    let params = AssumptionParams {
        e_bound,
        c0,
        c,
        order,
        ..Default::default()
    };
    let assumptions = check_assumptions(&sys, &y0, h, &params)?;

    let report = CheckReport {
        method: method.to_string(),
        problem: problem.to_string(),
        h,
        eps: sys.eps(),
        claims,
        symplectic_rev_cond,
        symmetry_residual,
        symmetric_numeric: symmetry_residual <= threshold,
        symmetry_threshold: threshold,
        assumptions,
    };
    write_or_stdout(out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ModeReport {
    problem: String,
    method: String,
    h: f64,
    t_end: f64,
    window: (f64, f64),
    residual: f64,
    modes: Vec<ModeRow>,
    /// Max amplitude per harmonic order 1..=kmax.
    amplitude_by_order: Vec<f64>,
    hierarchy_nonincreasing: bool,
}

#[derive(Debug, Serialize)]
struct ModeRow {
    k: MultiIndex,
    frequency: f64,
    amplitude_abs: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit_modes(
    problem: &str,
    method: &str,
    h: f64,
    t_end: f64,
    eps: f64,
    r: f64,
    omega: f64,
    window: usize,
    kmax: i64,
    out: Option<&Path>,
) -> Result<()> {
    let (sys, y0) = match problem {
        "wind" => (
            crate::harness::problems::wind_problem(r, eps)?,
            crate::harness::problems::wind_initial_state(eps),
        ),
        "harmonic" => (
            crate::harness::problems::harmonic_problem(omega)?,
            crate::harness::problems::harmonic_initial_state(),
        ),
        other => return Err(Error::config(format!("unknown problem {other:?}"))),
    };
    if kmax < 1 {
        return Err(Error::config("kmax must be at least 1"));
    }
    let osc = derive_oscillatory(&sys)?;
    let basis = FrequencyBasis::from_system(&sys)?
        .ok_or_else(|| Error::config("problem has no oscillatory frequencies"))?;
    if basis.len() != 1 {
        return Err(Error::config(
            "mode fitting currently expects a single-frequency problem",
        ));
    }
    let spec = MethodSpec::by_name(method)?;
    let solver = SolverConfig::default();
    let n = crate::harness::runner::step_count(h, t_end)?;
    let stepper = spec.instantiate(&osc, h)?;

    let mut times = Vec::with_capacity(n as usize + 1);
    let mut states = Vec::with_capacity(n as usize + 1);
    let mut y = y0.clone();
    times.push(0.0);
    states.push(transform_state(&osc, &y));
    for step in 1..=n {
        y = stepper
            .step(&y, &solver)
            .map_err(|e| Error::StepFailed {
                step,
                source: Box::new(e),
            })?
            .y;
        times.push(step as f64 * h);
        states.push(transform_state(&osc, &y));
    }

    let mut kset: Vec<MultiIndex> = vec![vec![0]];
    for k in 1..=kmax {
        kset.push(vec![k]);
        kset.push(vec![-k]);
    }
    let start = states.len().saturating_sub(window).min(states.len() / 2);
    let fit = fit_modal_amplitudes(&times, &states, &basis, &kset, start..start + window)?;

    let modes: Vec<ModeRow> = kset
        .iter()
        .enumerate()
        .map(|(m, k)| ModeRow {
            k: k.clone(),
            frequency: fit.frequencies[m],
            amplitude_abs: fit.amplitudes.iter().map(|comp| comp[m].norm()).collect(),
        })
        .collect();
    let amplitude_by_order: Vec<f64> = (1..=kmax as u64)
        .map(|ord| fit.amplitude_for_order(ord).unwrap_or(0.0))
        .collect();
    let hierarchy_nonincreasing = amplitude_by_order.windows(2).all(|w| w[1] <= w[0]);

    let report = ModeReport {
        problem: problem.to_string(),
        method: method.to_string(),
        h,
        t_end,
        window: fit.window,
        residual: fit.residual,
        modes,
        amplitude_by_order,
        hierarchy_nonincreasing,
    };
    write_or_stdout(out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(())
}
