//! One-step maps: fixed-point stage solves and the step operators.
//!
//! All matrix functions of `h O` are evaluated once when a stepper is built
//! and cached; long fixed-step runs then only pay for matrix-vector products
//! and nonlinearity evaluations.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{
    complexify_vec, real_part_checked, vec_amax_c, vec_amax_r, CMatrix, CVector, RMatrix, RVector,
};
use crate::system::{Nonlinearity, OscillatorySystem};

use super::method::{table1_method, CoeffFn, EIOMethod, Tableau};

/// Imaginary residue allowed when realizing spectrally evaluated operators
/// of a real generator as real matrices.
const REAL_OPERATOR_TOL: f64 = 1e-9;

/// Damping kicks in after this many non-contracting fixed-point iterations.
const DAMPING_PATIENCE: u32 = 20;

/// A method is declared symmetric when the forward-backward residual stays
/// below this multiple of the solver tolerance.
pub const SYMMETRY_CLASSIFICATION_FACTOR: f64 = 100.0;

/// Fixed-point stage solver settings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Relative tolerance on the iterate update.
    pub tol: f64,
    /// Iteration cap per solve.
    pub max_iter: u32,
    /// Abort when the iterate norm exceeds `divergence_guard * (1 + ||y||)`.
    pub divergence_guard: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            max_iter: 100,
            divergence_guard: 1e6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::invalid("solver tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("solver max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub y: RVector,
    pub iterations: u32,
}

/// A one-step method by name/coefficients, instantiable for any generator
/// and step size.
#[derive(Debug, Clone)]
pub enum MethodSpec {
    EiT,
    Eio(EIOMethod),
    General(Tableau),
}

impl MethodSpec {
    pub fn by_name(name: &str) -> Result<Self> {
        if name == "EI-T" {
            Ok(MethodSpec::EiT)
        } else {
            Ok(MethodSpec::Eio(table1_method(name)?))
        }
    }

    pub fn label(&self) -> String {
        match self {
            MethodSpec::EiT => "EI-T".into(),
            MethodSpec::Eio(m) => m.label.clone(),
            MethodSpec::General(t) => format!("custom-{}-stage", t.stages()),
        }
    }

    /// Evaluate and cache all operators for stepping `y' = O y + g(y)` with
    /// step size `h` in original (real) coordinates.
    pub fn instantiate(&self, osc: &OscillatorySystem, h: f64) -> Result<Stepper> {
        if !h.is_finite() || h == 0.0 {
            return Err(Error::invalid(format!(
                "step size must be nonzero, got {h}"
            )));
        }
        let dec = osc.dec();
        let real = |c: &CoeffFn| -> Result<RMatrix> {
            real_part_checked(&c.eval(dec, h)?, REAL_OPERATOR_TOL)
        };
        let exp_full = CoeffFn::ScaledExp {
            scale: 1.0,
            rate: 1.0,
        };
        let kind = match self {
            MethodSpec::EiT => StepperKind::EiT {
                exp_h: real(&exp_full)?,
            },
            MethodSpec::Eio(m) => StepperKind::Eio {
                c1: m.c1,
                exp_h: real(&exp_full)?,
                exp_c1: real(&CoeffFn::ScaledExp {
                    scale: 1.0,
                    rate: m.c1,
                })?,
                a11: real(&m.a11)?,
                b1: real(&m.b1)?,
            },
            MethodSpec::General(tab) => {
                tab.validate()?;
                let s = tab.stages();
                let mut exp_c = Vec::with_capacity(s);
                for &ci in &tab.c {
                    exp_c.push(real(&CoeffFn::ScaledExp {
                        scale: 1.0,
                        rate: ci,
                    })?);
                }
                let mut a = Vec::with_capacity(s);
                for row in &tab.a {
                    let mut arow = Vec::with_capacity(s);
                    for entry in row {
                        arow.push(match entry {
                            CoeffFn::Const(s) if *s == 0.0 => None,
                            other => Some(real(other)?),
                        });
                    }
                    a.push(arow);
                }
                let mut b = Vec::with_capacity(s);
                for entry in &tab.b {
                    b.push(real(entry)?);
                }
                StepperKind::General {
                    c: tab.c.clone(),
                    exp_h: real(&exp_full)?,
                    exp_c,
                    a,
                    b,
                }
            }
        };
        Ok(Stepper {
            h,
            g: osc.g_fn(),
            kind,
        })
    }

    /// Diagonal instantiation for stepping the transformed system
    /// `ytil' = i L ytil + P^H g(P ytil)` in eigencoordinates.
    pub fn instantiate_transformed(
        &self,
        osc: &OscillatorySystem,
        h: f64,
    ) -> Result<TransformedStepper> {
        if !h.is_finite() || h == 0.0 {
            return Err(Error::invalid(format!(
                "step size must be nonzero, got {h}"
            )));
        }
        let lambda = osc.dec().lambda();
        let diag = |c: &CoeffFn| -> Result<CVector> {
            let vals: Vec<Complex64> = lambda
                .iter()
                .map(|&l| c.scalar(Complex64::new(0.0, h * l)))
                .collect();
            if vals.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::NonFiniteMatrix);
            }
            Ok(CVector::from_vec(vals))
        };
        let exp_full = CoeffFn::ScaledExp {
            scale: 1.0,
            rate: 1.0,
        };
        let kind = match self {
            MethodSpec::EiT => TransformedKind::EiT {
                exp_h: diag(&exp_full)?,
            },
            MethodSpec::Eio(m) => TransformedKind::Eio {
                c1: m.c1,
                exp_h: diag(&exp_full)?,
                exp_c1: diag(&CoeffFn::ScaledExp {
                    scale: 1.0,
                    rate: m.c1,
                })?,
                a11: diag(&m.a11)?,
                b1: diag(&m.b1)?,
            },
            MethodSpec::General(tab) => {
                tab.validate()?;
                let mut exp_c = Vec::new();
                for &ci in &tab.c {
                    exp_c.push(diag(&CoeffFn::ScaledExp {
                        scale: 1.0,
                        rate: ci,
                    })?);
                }
                let mut a = Vec::new();
                for row in &tab.a {
                    let mut arow = Vec::new();
                    for entry in row {
                        arow.push(match entry {
                            CoeffFn::Const(s) if *s == 0.0 => None,
                            other => Some(diag(other)?),
                        });
                    }
                    a.push(arow);
                }
                let mut b = Vec::new();
                for entry in &tab.b {
                    b.push(diag(entry)?);
                }
                TransformedKind::General {
                    c: tab.c.clone(),
                    exp_h: diag(&exp_full)?,
                    exp_c,
                    a,
                    b,
                }
            }
        };
        Ok(TransformedStepper {
            h,
            p: osc.dec().p().clone(),
            g: osc.g_fn(),
            kind,
        })
    }
}

/// One step of EI-T: solves
/// `y1 = e^{hO} y + (h/2) (g(y1) + e^{hO} g(y))` by fixed-point iteration
/// from the exponential-Euler predictor.
pub fn step_ei_t(
    osc: &OscillatorySystem,
    h: f64,
    y: &RVector,
    cfg: &SolverConfig,
) -> Result<RVector> {
    Ok(MethodSpec::EiT.instantiate(osc, h)?.step(y, cfg)?.y)
}

/// One step of a one-stage implicit method: stage
/// `Y = e^{c1 hO} y + h a11(hO) g(Y)`, result
/// `y1 = e^{hO} y + h b1(hO) g(Y)`.
pub fn step_ei_o(
    method: &EIOMethod,
    osc: &OscillatorySystem,
    h: f64,
    y: &RVector,
    cfg: &SolverConfig,
) -> Result<RVector> {
    Ok(MethodSpec::Eio(method.clone())
        .instantiate(osc, h)?
        .step(y, cfg)?
        .y)
}

/// One step of a general s-stage exponential integrator.
pub fn step_general(
    tab: &Tableau,
    osc: &OscillatorySystem,
    h: f64,
    y: &RVector,
    cfg: &SolverConfig,
) -> Result<RVector> {
    Ok(MethodSpec::General(tab.clone())
        .instantiate(osc, h)?
        .step(y, cfg)?
        .y)
}

/// Numeric test of the defining symmetry property: steps forward with `h`,
/// backward with `-h`, and returns the relative return residual
/// `||Phi_{-h}(Phi_h(y)) - y|| / max(1, ||y||)`.
pub fn check_symmetry_numeric(
    method: &MethodSpec,
    osc: &OscillatorySystem,
    h: f64,
    y: &RVector,
    cfg: &SolverConfig,
) -> Result<f64> {
    let forward = method.instantiate(osc, h)?.step(y, cfg)?;
    let back = method.instantiate(osc, -h)?.step(&forward.y, cfg)?;
    Ok(vec_amax_r(&(back.y - y)) / vec_amax_r(y).max(1.0))
}

/// Symmetry classification at the threshold `100 * cfg.tol`.
pub fn is_symmetric_numeric(
    method: &MethodSpec,
    osc: &OscillatorySystem,
    h: f64,
    y: &RVector,
    cfg: &SolverConfig,
) -> Result<bool> {
    let residual = check_symmetry_numeric(method, osc, h, y, cfg)?;
    Ok(residual <= SYMMETRY_CLASSIFICATION_FACTOR * cfg.tol)
}

/// Cached operators for one (method, h, generator) triple.
#[derive(Clone)]
pub struct Stepper {
    h: f64,
    g: Nonlinearity,
    kind: StepperKind,
}

impl std::fmt::Debug for Stepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stepper")
            .field("h", &self.h)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
enum StepperKind {
    EiT {
        exp_h: RMatrix,
    },
    Eio {
        c1: f64,
        exp_h: RMatrix,
        exp_c1: RMatrix,
        a11: RMatrix,
        b1: RMatrix,
    },
    General {
        c: Vec<f64>,
        exp_h: RMatrix,
        exp_c: Vec<RMatrix>,
        a: Vec<Vec<Option<RMatrix>>>,
        b: Vec<RMatrix>,
    },
}

impl Stepper {
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn step(&self, y: &RVector, cfg: &SolverConfig) -> Result<StepOutcome> {
        cfg.validate()?;
        let h = self.h;
        let guard = cfg.divergence_guard * (1.0 + vec_amax_r(y));
        match &self.kind {
            StepperKind::EiT { exp_h } => {
                let gy = (self.g)(y);
                let base = exp_h * y + exp_h * &gy * (0.5 * h);
                let predictor = exp_h * (y + &gy * h);
                let (sol, iterations) = solve_fixed_point(
                    vec![predictor],
                    |xs| vec![&base + (self.g)(&xs[0]) * (0.5 * h)],
                    guard,
                    cfg,
                )?;
                Ok(StepOutcome {
                    y: sol.into_iter().next().unwrap(),
                    iterations,
                })
            }
            StepperKind::Eio {
                c1,
                exp_h,
                exp_c1,
                a11,
                b1,
            } => {
                let gy = (self.g)(y);
                let base = exp_c1 * y;
                let predictor = exp_c1 * (y + &gy * (c1 * h));
                let (sol, iterations) = solve_fixed_point(
                    vec![predictor],
                    |xs| vec![&base + a11 * (self.g)(&xs[0]) * h],
                    guard,
                    cfg,
                )?;
                let stage = &sol[0];
                let y1 = exp_h * y + b1 * (self.g)(stage) * h;
                Ok(StepOutcome { y: y1, iterations })
            }
            StepperKind::General {
                c,
                exp_h,
                exp_c,
                a,
                b,
            } => {
                let s = c.len();
                let gy = (self.g)(y);
                let bases: Vec<RVector> = (0..s).map(|i| &exp_c[i] * y).collect();
                let predictors: Vec<RVector> =
                    (0..s).map(|i| &exp_c[i] * (y + &gy * (c[i] * h))).collect();
                let (stages, iterations) = solve_fixed_point(
                    predictors,
                    |xs| {
                        let gs: Vec<RVector> = xs.iter().map(|x| (self.g)(x)).collect();
                        (0..s)
                            .map(|i| {
                                let mut acc = bases[i].clone();
                                for (j, gj) in gs.iter().enumerate() {
                                    if let Some(aij) = &a[i][j] {
                                        acc += aij * gj * h;
                                    }
                                }
                                acc
                            })
                            .collect()
                    },
                    guard,
                    cfg,
                )?;
                let mut y1 = exp_h * y;
                for (i, stage) in stages.iter().enumerate() {
                    y1 += &b[i] * (self.g)(stage) * h;
                }
                Ok(StepOutcome { y: y1, iterations })
            }
        }
    }
}

/// Damped fixed-point iteration on a block of vectors.
///
/// Undamped by default; a damping factor of 0.5 engages after
/// `DAMPING_PATIENCE` non-contracting iterations.
fn solve_fixed_point(
    initial: Vec<RVector>,
    f: impl Fn(&[RVector]) -> Vec<RVector>,
    guard: f64,
    cfg: &SolverConfig,
) -> Result<(Vec<RVector>, u32)> {
    let mut x = initial;
    let mut prev_delta = f64::INFINITY;
    let mut non_contracting = 0_u32;
    let mut damped = false;
    for iter in 1..=cfg.max_iter {
        let fx = f(&x);
        let next: Vec<RVector> = if damped {
            x.iter()
                .zip(fx.iter())
                .map(|(old, new)| old * 0.5 + new * 0.5)
                .collect()
        } else {
            fx
        };
        let delta = x
            .iter()
            .zip(next.iter())
            .map(|(old, new)| vec_amax_r(&(new - old)))
            .fold(0.0_f64, f64::max);
        let scale = next.iter().map(vec_amax_r).fold(0.0_f64, f64::max);
        if !delta.is_finite() || scale > guard {
            return Err(Error::FixedPointDiverged {
                iterations: iter,
                residual: delta,
            });
        }
        x = next;
        if delta <= cfg.tol * scale.max(1.0) {
            return Ok((x, iter));
        }
        if delta >= prev_delta {
            non_contracting += 1;
            if non_contracting >= DAMPING_PATIENCE {
                damped = true;
            }
        }
        prev_delta = delta;
    }
    Err(Error::FixedPointDiverged {
        iterations: cfg.max_iter,
        residual: prev_delta,
    })
}

/// Stepper for the transformed (diagonalized) system; states are complex.
#[derive(Clone)]
pub struct TransformedStepper {
    h: f64,
    p: CMatrix,
    g: Nonlinearity,
    kind: TransformedKind,
}

impl std::fmt::Debug for TransformedStepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransformedStepper")
            .field("h", &self.h)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
enum TransformedKind {
    EiT {
        exp_h: CVector,
    },
    Eio {
        c1: f64,
        exp_h: CVector,
        exp_c1: CVector,
        a11: CVector,
        b1: CVector,
    },
    General {
        c: Vec<f64>,
        exp_h: CVector,
        exp_c: Vec<CVector>,
        a: Vec<Vec<Option<CVector>>>,
        b: Vec<CVector>,
    },
}

impl TransformedStepper {
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Nonlinearity in eigencoordinates: `P^H g(Re(P ytil))`.
    fn g_tilde(&self, ytil: &CVector) -> CVector {
        let y = (&self.p * ytil).map(|z| z.re);
        self.p.adjoint() * complexify_vec(&(self.g)(&y))
    }

    pub fn step(&self, ytil: &CVector, cfg: &SolverConfig) -> Result<(CVector, u32)> {
        cfg.validate()?;
        let h = self.h;
        let guard = cfg.divergence_guard * (1.0 + vec_amax_c(ytil));
        let scale_h = Complex64::new(h, 0.0);
        match &self.kind {
            TransformedKind::EiT { exp_h } => {
                let gy = self.g_tilde(ytil);
                let base = exp_h.component_mul(ytil) + exp_h.component_mul(&gy) * (0.5 * scale_h);
                let predictor = exp_h.component_mul(&(ytil + &gy * scale_h));
                let (sol, iters) = solve_fixed_point_c(
                    predictor,
                    |x| &base + self.g_tilde(x) * (0.5 * scale_h),
                    guard,
                    cfg,
                )?;
                Ok((sol, iters))
            }
            TransformedKind::Eio {
                c1,
                exp_h,
                exp_c1,
                a11,
                b1,
            } => {
                let gy = self.g_tilde(ytil);
                let base = exp_c1.component_mul(ytil);
                let predictor = exp_c1.component_mul(&(ytil + &gy * Complex64::new(c1 * h, 0.0)));
                let (stage, iters) = solve_fixed_point_c(
                    predictor,
                    |x| &base + a11.component_mul(&self.g_tilde(x)) * scale_h,
                    guard,
                    cfg,
                )?;
                let y1 =
                    exp_h.component_mul(ytil) + b1.component_mul(&self.g_tilde(&stage)) * scale_h;
                Ok((y1, iters))
            }
            TransformedKind::General {
                c,
                exp_h,
                exp_c,
                a,
                b,
            } => {
                let s = c.len();
                let gy = self.g_tilde(ytil);
                let predictors: Vec<CVector> = (0..s)
                    .map(|i| exp_c[i].component_mul(&(ytil + &gy * Complex64::new(c[i] * h, 0.0))))
                    .collect();
                let bases: Vec<CVector> = (0..s).map(|i| exp_c[i].component_mul(ytil)).collect();
                let (stages, iterations) = solve_fixed_point_c_multi(
                    predictors,
                    |xs| {
                        let gs: Vec<CVector> = xs.iter().map(|x| self.g_tilde(x)).collect();
                        (0..s)
                            .map(|i| {
                                let mut acc = bases[i].clone();
                                for (j, gj) in gs.iter().enumerate() {
                                    if let Some(aij) = &a[i][j] {
                                        acc += aij.component_mul(gj) * scale_h;
                                    }
                                }
                                acc
                            })
                            .collect()
                    },
                    guard,
                    cfg,
                )?;
                let mut y1 = exp_h.component_mul(ytil);
                for (i, stage) in stages.iter().enumerate() {
                    y1 += b[i].component_mul(&self.g_tilde(stage)) * scale_h;
                }
                Ok((y1, iterations))
            }
        }
    }
}

/// Complex single-vector fixed point (mirrors `solve_fixed_point`).
fn solve_fixed_point_c(
    initial: CVector,
    f: impl Fn(&CVector) -> CVector,
    guard: f64,
    cfg: &SolverConfig,
) -> Result<(CVector, u32)> {
    let (sol, iters) = solve_fixed_point_c_multi(vec![initial], |xs| vec![f(&xs[0])], guard, cfg)?;
    Ok((sol.into_iter().next().unwrap(), iters))
}

/// Complex multi-vector fixed point (mirrors `solve_fixed_point`).
fn solve_fixed_point_c_multi(
    initial: Vec<CVector>,
    f: impl Fn(&[CVector]) -> Vec<CVector>,
    guard: f64,
    cfg: &SolverConfig,
) -> Result<(Vec<CVector>, u32)> {
    let mut x = initial;
    let mut prev_delta = f64::INFINITY;
    let mut non_contracting = 0_u32;
    let mut damped = false;
    for iter in 1..=cfg.max_iter {
        let fx = f(&x);
        let next: Vec<CVector> = if damped {
            x.iter()
                .zip(fx.iter())
                .map(|(old, new)| (old + new) * Complex64::new(0.5, 0.0))
                .collect()
        } else {
            fx
        };
        let delta = x
            .iter()
            .zip(next.iter())
            .map(|(old, new)| vec_amax_c(&(new - old)))
            .fold(0.0_f64, f64::max);
        let scale = next.iter().map(vec_amax_c).fold(0.0_f64, f64::max);
        if !delta.is_finite() || scale > guard {
            return Err(Error::FixedPointDiverged {
                iterations: iter,
                residual: delta,
            });
        }
        x = next;
        if delta <= cfg.tol * scale.max(1.0) {
            return Ok((x, iter));
        }
        if delta >= prev_delta {
            non_contracting += 1;
            if non_contracting >= DAMPING_PATIENCE {
                damped = true;
            }
        }
        prev_delta = delta;
    }
    Err(Error::FixedPointDiverged {
        iterations: cfg.max_iter,
        residual: prev_delta,
    })
}
