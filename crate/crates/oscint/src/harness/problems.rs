//! Problem library.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matrix::{RMatrix, RVector};
use crate::system::{ConservativeSystem, Gradient, Potential};

/// Averaged wind-induced oscillation system at detuning angle pi/2:
/// `Q = [[0,-1],[1,0]]`, quadratic form `(r/eps) I`, and
/// `V = -(x1 x2^2 - x1^3/3)/2`, so that
/// `H = (r/(2 eps))(x1^2 + x2^2) + V` and the nonlinearity is
/// `g = (x1 x2, (x1^2 - x2^2)/2)`.
pub fn wind_problem(r: f64, eps: f64) -> Result<ConservativeSystem> {
    if !(r > 0.0) || !(eps > 0.0) {
        return Err(Error::invalid(format!(
            "wind problem needs r > 0 and eps > 0, got r={r}, eps={eps}"
        )));
    }
    let q = RMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let m = RMatrix::identity(2, 2) * r;
    let v: Potential = Arc::new(|y: &RVector| {
        let (x1, x2) = (y[0], y[1]);
        -0.5 * (x1 * x2 * x2 - x1 * x1 * x1 / 3.0)
    });
    let grad_v: Gradient = Arc::new(|y: &RVector| {
        let (x1, x2) = (y[0], y[1]);
        RVector::from_row_slice(&[0.5 * (x1 * x1 - x2 * x2), -x1 * x2])
    });
    ConservativeSystem::new(q, m, eps, v, grad_v)
}

/// Default initial state for the wind problem: `(1.1 sqrt(eps), sqrt(eps))`.
pub fn wind_initial_state(eps: f64) -> RVector {
    RVector::from_row_slice(&[1.1 * eps.sqrt(), eps.sqrt()])
}

/// Pure linear oscillator: `V = 0`, generator eigenvalues `+-i omega`.
/// Useful for exactness tests since every exponential integrator reproduces
/// the flow to roundoff.
pub fn harmonic_problem(omega: f64) -> Result<ConservativeSystem> {
    if !(omega > 0.0) {
        return Err(Error::invalid(format!(
            "harmonic problem needs omega > 0, got {omega}"
        )));
    }
    let q = RMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let m = RMatrix::identity(2, 2) * omega;
    let v: Potential = Arc::new(|_| 0.0);
    let grad_v: Gradient = Arc::new(|y: &RVector| RVector::zeros(y.len()));
    ConservativeSystem::new(q, m, 1.0, v, grad_v)
}

pub fn harmonic_initial_state() -> RVector {
    RVector::from_row_slice(&[1.0, 0.0])
}
