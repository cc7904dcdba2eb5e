//! Dense matrix and vector aliases plus small norm helpers.
//!
//! Real matrices are the imaginary-part-zero special case of the complex
//! ones; converting between the two is explicit via [`complexify`] and
//! [`real_part_checked`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type RMatrix = DMatrix<f64>;
pub type CMatrix = DMatrix<Complex64>;
pub type RVector = DVector<f64>;
pub type CVector = DVector<Complex64>;

/// Largest entry modulus; the max norm used by all the `||.||_inf` tolerances.
pub fn amax_c(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn amax_r(m: &RMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn vec_amax_r(v: &RVector) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn vec_amax_c(v: &CVector) -> f64 {
    v.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn all_finite_c(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn all_finite_r(m: &RMatrix) -> bool {
    m.iter().all(|x| x.is_finite())
}

pub fn complexify(m: &RMatrix) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn complexify_vec(v: &RVector) -> CVector {
    v.map(|x| Complex64::new(x, 0.0))
}

/// Drop the imaginary part of a matrix that is real up to roundoff.
///
/// Spectral evaluation of a real-analytic function on a real skew-symmetric
/// generator returns a real matrix with O(machine eps) imaginary residue;
/// anything larger means the coefficient function is genuinely complex on
/// this operator and cannot drive a real-state integrator.
pub fn real_part_checked(m: &CMatrix, rel_tol: f64) -> Result<RMatrix> {
    let scale = amax_c(m).max(1.0);
    let residual = m.iter().fold(0.0_f64, |acc, z| acc.max(z.im.abs()));
    if residual > rel_tol * scale {
        return Err(Error::NotRealOperator { residual });
    }
    Ok(m.map(|z| z.re))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_part_checked_accepts_small_residue() {
        let m = CMatrix::from_fn(2, 2, |i, j| Complex64::new((i + j) as f64, 1e-14));
        let r = real_part_checked(&m, 1e-10).unwrap();
        assert_eq!(r[(1, 1)], 2.0);
    }

    #[test]
    fn real_part_checked_rejects_complex() {
        let m = CMatrix::from_element(2, 2, Complex64::new(0.0, 0.5));
        assert!(matches!(
            real_part_checked(&m, 1e-10),
            Err(Error::NotRealOperator { .. })
        ));
    }
}
