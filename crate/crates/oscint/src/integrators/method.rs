//! Method definitions: coefficient functions, tableaus, the EI-O family.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{all_finite_c, CMatrix};
use crate::spectral::{matfun, phi1_scalar, SpectralDecomposition};

/// Scalar coefficient function of `h O`, evaluated spectrally into a matrix.
///
/// Every coefficient appearing in the methods here is a scalar analytic
/// function of the generator; the closed forms get dedicated variants so
/// tableaus stay inspectable, and `Custom` covers anything else.
#[derive(Clone)]
pub enum CoeffFn {
    /// `scale * I`
    Const(f64),
    /// `scale * exp(rate * h O)`
    ScaledExp { scale: f64, rate: f64 },
    /// `scale * phi1(rate * h O)`
    ScaledPhi1 { scale: f64, rate: f64 },
    /// Arbitrary scalar function of the eigenvalues of `h O`.
    Custom(Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>),
}

impl fmt::Debug for CoeffFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoeffFn::Const(s) => write!(f, "{s} I"),
            CoeffFn::ScaledExp { scale, rate } => write!(f, "{scale} exp({rate} hO)"),
            CoeffFn::ScaledPhi1 { scale, rate } => write!(f, "{scale} phi1({rate} hO)"),
            CoeffFn::Custom(_) => write!(f, "custom(hO)"),
        }
    }
}

impl CoeffFn {
    pub fn zero() -> Self {
        CoeffFn::Const(0.0)
    }

    /// Value at a scalar eigenvalue `z` of `h O`.
    pub fn scalar(&self, z: Complex64) -> Complex64 {
        match self {
            CoeffFn::Const(s) => Complex64::new(*s, 0.0),
            CoeffFn::ScaledExp { scale, rate } => (z * *rate).exp() * *scale,
            CoeffFn::ScaledPhi1 { scale, rate } => phi1_scalar(z * *rate) * *scale,
            CoeffFn::Custom(f) => f(z),
        }
    }

    /// Evaluate as a matrix function of `h O` through the decomposition of `O`.
    pub fn eval(&self, dec: &SpectralDecomposition, h: f64) -> Result<CMatrix> {
        let m = matfun(|z| self.scalar(z), &dec.scaled(h))?;
        if !all_finite_c(&m) {
            return Err(Error::NonFiniteMatrix);
        }
        Ok(m)
    }
}

/// Whether the method claims the structural properties listed for it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct MethodClaims {
    pub symmetric: bool,
    pub reversible: bool,
    pub symplectic: bool,
}

/// Butcher tableau of an s-stage exponential integrator: abscissae `c`,
/// stage coefficients `a[i][j]` and weights `b[i]`, all functions of `h O`.
#[derive(Debug, Clone)]
pub struct Tableau {
    pub c: Vec<f64>,
    pub a: Vec<Vec<CoeffFn>>,
    pub b: Vec<CoeffFn>,
}

impl Tableau {
    pub fn stages(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.c.len();
        if s == 0 {
            return Err(Error::invalid("tableau must have at least one stage"));
        }
        if self.a.len() != s || self.b.len() != s || self.a.iter().any(|row| row.len() != s) {
            return Err(Error::invalid(format!(
                "inconsistent tableau dimensions for {s} stages"
            )));
        }
        if self.c.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            return Err(Error::invalid("abscissae must lie in [0, 1]"));
        }
        Ok(())
    }

    /// The two-stage tableau equivalent to the EI-T scheme.
    pub fn ei_t() -> Self {
        Tableau {
            c: vec![0.0, 1.0],
            a: vec![
                vec![CoeffFn::zero(), CoeffFn::zero()],
                vec![
                    CoeffFn::ScaledExp {
                        scale: 0.5,
                        rate: 1.0,
                    },
                    CoeffFn::Const(0.5),
                ],
            ],
            b: vec![
                CoeffFn::ScaledExp {
                    scale: 0.5,
                    rate: 1.0,
                },
                CoeffFn::Const(0.5),
            ],
        }
    }
}

/// One-stage implicit exponential integrator `(c1, a11(hO), b1(hO))`.
#[derive(Debug, Clone)]
pub struct EIOMethod {
    pub c1: f64,
    pub a11: CoeffFn,
    pub b1: CoeffFn,
    pub label: String,
    pub claims: MethodClaims,
}

/// The five named one-stage methods with their claimed properties.
pub fn table1_method(name: &str) -> Result<EIOMethod> {
    let m = match name {
        "EI-O1" => EIOMethod {
            c1: 0.5,
            a11: CoeffFn::Const(0.5),
            b1: CoeffFn::ScaledExp {
                scale: 1.0,
                rate: 0.5,
            },
            label: "EI-O1".into(),
            claims: MethodClaims {
                symmetric: true,
                reversible: true,
                symplectic: true,
            },
        },
        "EI-O2" => EIOMethod {
            c1: 0.5,
            a11: CoeffFn::Const(0.5),
            b1: CoeffFn::ScaledPhi1 {
                scale: 1.0,
                rate: 1.0,
            },
            label: "EI-O2".into(),
            claims: MethodClaims {
                symmetric: false,
                reversible: false,
                symplectic: false,
            },
        },
        "EI-O3" => EIOMethod {
            c1: 2.0 / 3.0,
            a11: CoeffFn::Const(0.5),
            b1: CoeffFn::ScaledExp {
                scale: 1.0,
                rate: 1.0 / 3.0,
            },
            label: "EI-O3".into(),
            claims: MethodClaims {
                symmetric: false,
                reversible: false,
                symplectic: true,
            },
        },
        "EI-O4" => EIOMethod {
            c1: 0.5,
            // a11 = b1(hO/2)/2 with b1 = phi1, i.e. phi1(hO/2)/2.
            a11: CoeffFn::ScaledPhi1 {
                scale: 0.5,
                rate: 0.5,
            },
            b1: CoeffFn::ScaledPhi1 {
                scale: 1.0,
                rate: 1.0,
            },
            label: "EI-O4".into(),
            claims: MethodClaims {
                symmetric: true,
                reversible: true,
                symplectic: false,
            },
        },
        "EI-O5" => EIOMethod {
            c1: 0.5,
            a11: CoeffFn::Const(1.0 / 3.0),
            b1: CoeffFn::ScaledExp {
                scale: 2.0 / 3.0,
                rate: 0.5,
            },
            label: "EI-O5".into(),
            claims: MethodClaims {
                symmetric: false,
                reversible: false,
                symplectic: true,
            },
        },
        other => {
            return Err(Error::UnknownMethod {
                name: other.to_string(),
            })
        }
    };
    Ok(m)
}

pub const TABLE1_NAMES: [&str; 5] = ["EI-O1", "EI-O2", "EI-O3", "EI-O4", "EI-O5"];

/// Classical RK symplecticity condition `b_i a_ij + b_j a_ji - b_i b_j = 0`.
pub fn rk_is_symplectic(rk_a: &[Vec<f64>], rk_b: &[f64], tol: f64) -> bool {
    rk_symplecticity_residual(rk_a, rk_b) <= tol
}

pub fn rk_symplecticity_residual(rk_a: &[Vec<f64>], rk_b: &[f64]) -> f64 {
    let s = rk_b.len();
    let mut worst = 0.0_f64;
    for i in 0..s {
        for j in 0..s {
            let m = rk_b[i] * rk_a[i][j] + rk_b[j] * rk_a[j][i] - rk_b[i] * rk_b[j];
            worst = worst.max(m.abs());
        }
    }
    worst
}

/// Lift a symplectic classical RK method to an exponential integrator:
/// `a_ij(hO) = a_ij exp((c_i - c_j) hO)`, `b_i(hO) = b_i exp((1 - c_i) hO)`.
///
/// The resulting integrator is symplectic. Rejects RK input that fails the
/// symplecticity condition. The decomposition is used to confirm the lifted
/// coefficients evaluate to finite matrices for this generator.
pub fn build_symplectic_ei(
    rk_c: &[f64],
    rk_a: &[Vec<f64>],
    rk_b: &[f64],
    dec: &SpectralDecomposition,
) -> Result<Tableau> {
    let s = rk_c.len();
    if rk_a.len() != s || rk_b.len() != s || rk_a.iter().any(|r| r.len() != s) {
        return Err(Error::invalid("inconsistent RK coefficient dimensions"));
    }
    let residual = rk_symplecticity_residual(rk_a, rk_b);
    if residual > 1e-12 {
        return Err(Error::NotSymplecticRK { residual });
    }
    let a = (0..s)
        .map(|i| {
            (0..s)
                .map(|j| {
                    if rk_a[i][j] == 0.0 {
                        CoeffFn::zero()
                    } else {
                        CoeffFn::ScaledExp {
                            scale: rk_a[i][j],
                            rate: rk_c[i] - rk_c[j],
                        }
                    }
                })
                .collect()
        })
        .collect();
    let b = (0..s)
        .map(|i| CoeffFn::ScaledExp {
            scale: rk_b[i],
            rate: 1.0 - rk_c[i],
        })
        .collect();
    let tab = Tableau {
        c: rk_c.to_vec(),
        a,
        b,
    };
    tab.validate()?;
    for row in &tab.a {
        for entry in row {
            entry.eval(dec, 1.0)?;
        }
    }
    for entry in &tab.b {
        entry.eval(dec, 1.0)?;
    }
    Ok(tab)
}
