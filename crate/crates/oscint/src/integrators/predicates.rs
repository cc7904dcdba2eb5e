//! Structural predicates on one-stage methods.

use crate::error::Result;
use crate::matrix::{amax_c, CMatrix};
use crate::spectral::SpectralDecomposition;

use super::method::{CoeffFn, EIOMethod};

/// Symplecticity condition for a one-stage implicit exponential integrator:
/// `a11(hO)` must be a constant multiple of the identity, `abar * I`, and
/// `b1(hO) = 2 abar exp((1 - c1) hO)`, both checked numerically at the given
/// `(dec, h)` to relative tolerance `tol`.
///
/// This reports "satisfies the coefficient condition", nothing wider: a
/// non-constant `a11` is rejected regardless of `b1`.
pub fn is_symplectic_eio(
    m: &EIOMethod,
    dec: &SpectralDecomposition,
    h: f64,
    tol: f64,
) -> Result<bool> {
    let a = m.a11.eval(dec, h)?;
    let abar = a[(0, 0)].re;
    let n = a.nrows();
    let ident = CMatrix::identity(n, n);
    let a_residual = amax_c(&(&a - &ident * num_complex::Complex64::new(abar, 0.0)));
    if a_residual > tol * amax_c(&a).max(1.0) {
        return Ok(false);
    }
    let b = m.b1.eval(dec, h)?;
    let expected = CoeffFn::ScaledExp {
        scale: 2.0 * abar,
        rate: 1.0 - m.c1,
    }
    .eval(dec, h)?;
    let b_residual = amax_c(&(&b - &expected));
    Ok(b_residual <= tol * amax_c(&b).max(1.0))
}
