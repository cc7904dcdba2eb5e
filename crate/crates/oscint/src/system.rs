//! Conservative systems and their oscillatory form.
//!
//! A [`ConservativeSystem`] is `y' = Q grad H(y)` with skew-symmetric `Q` and
//! `H(y) = y^T (M/eps) y / 2 + V(y)`; `H` is a first integral and the
//! quadratic part `K` is the kinetic energy. Splitting off the stiff linear
//! part gives the oscillatory form `y' = O y + g(y)` with `O = Q M / eps`
//! and `g = Q grad V`, which is what the exponential integrators consume.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matrix::{
    all_finite_r, amax_r, complexify, complexify_vec, vec_amax_r, CVector, RMatrix, RVector,
};
use crate::spectral::{eig_skew_hermitian, SpectralDecomposition};

/// Tolerance used by the structural checks at construction.
pub const STRUCTURE_TOL: f64 = 1e-12;

/// Tolerance for the finite-difference validation of the supplied gradient.
pub const GRADIENT_CHECK_TOL: f64 = 1e-5;

pub type Potential = Arc<dyn Fn(&RVector) -> f64 + Send + Sync>;
pub type Gradient = Arc<dyn Fn(&RVector) -> RVector + Send + Sync>;
pub type Nonlinearity = Arc<dyn Fn(&RVector) -> RVector + Send + Sync>;

/// Conservative system `(Q, M, eps, V, grad V)`.
#[derive(Clone)]
pub struct ConservativeSystem {
    dim: usize,
    q: RMatrix,
    m: RMatrix,
    eps: f64,
    v: Potential,
    grad_v: Gradient,
}

impl fmt::Debug for ConservativeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConservativeSystem")
            .field("dim", &self.dim)
            .field("eps", &self.eps)
            .finish_non_exhaustive()
    }
}

impl ConservativeSystem {
    /// Validates the structural invariants: `Q` skew-symmetric, `M`
    /// symmetric, `eps > 0`, and `grad V` consistent with central finite
    /// differences of `V` at a handful of sample points.
    pub fn new(q: RMatrix, m: RMatrix, eps: f64, v: Potential, grad_v: Gradient) -> Result<Self> {
        let dim = q.nrows();
        if dim == 0 || q.ncols() != dim || m.nrows() != dim || m.ncols() != dim {
            return Err(Error::InvalidSystem {
                reason: format!(
                    "Q and M must be square of equal size, got {}x{} and {}x{}",
                    q.nrows(),
                    q.ncols(),
                    m.nrows(),
                    m.ncols()
                ),
            });
        }
        if !all_finite_r(&q) || !all_finite_r(&m) || !eps.is_finite() {
            return Err(Error::InvalidSystem {
                reason: "non-finite entries in Q, M or eps".into(),
            });
        }
        if eps <= 0.0 {
            return Err(Error::InvalidSystem {
                reason: format!("eps must be positive, got {eps}"),
            });
        }
        let skew = amax_r(&(&q + q.transpose()));
        if skew > STRUCTURE_TOL * amax_r(&q).max(1.0) {
            return Err(Error::InvalidSystem {
                reason: format!("Q is not skew-symmetric (residual {skew:.3e})"),
            });
        }
        let sym = amax_r(&(&m - m.transpose()));
        if sym > STRUCTURE_TOL * amax_r(&m).max(1.0) {
            return Err(Error::InvalidSystem {
                reason: format!("M is not symmetric (residual {sym:.3e})"),
            });
        }

        let sys = Self {
            dim,
            q,
            m,
            eps,
            v,
            grad_v,
        };
        sys.check_gradient()?;
        Ok(sys)
    }

    fn check_gradient(&self) -> Result<()> {
        for y in gradient_sample_points(self.dim) {
            let analytic = (self.grad_v)(&y);
            if analytic.len() != self.dim {
                return Err(Error::InvalidSystem {
                    reason: format!(
                        "grad V returned length {} for dimension {}",
                        analytic.len(),
                        self.dim
                    ),
                });
            }
            let fd = central_difference(&*self.v, &y);
            let err = vec_amax_r(&(analytic - fd));
            if err > GRADIENT_CHECK_TOL {
                return Err(Error::InvalidSystem {
                    reason: format!("grad V disagrees with finite differences of V ({err:.3e})"),
                });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn q(&self) -> &RMatrix {
        &self.q
    }

    pub fn m(&self) -> &RMatrix {
        &self.m
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn potential(&self, y: &RVector) -> f64 {
        (self.v)(y)
    }

    pub fn grad_potential(&self, y: &RVector) -> RVector {
        (self.grad_v)(y)
    }

    /// Total energy `H(y) = y^T (M/eps) y / 2 + V(y)`.
    pub fn energy(&self, y: &RVector) -> f64 {
        self.kinetic(y) + (self.v)(y)
    }

    /// Kinetic energy `K(y) = y^T (M/eps) y / 2`.
    pub fn kinetic(&self, y: &RVector) -> f64 {
        0.5 * (y.transpose() * &self.m * y)[(0, 0)] / self.eps
    }

    /// Gradient of the total energy, `(M/eps) y + grad V(y)`.
    pub fn grad_energy(&self, y: &RVector) -> RVector {
        &self.m * y / self.eps + (self.grad_v)(y)
    }
}

/// Central finite differences with step `1e-6 * max(1, ||y||)`.
pub fn central_difference(v: &(dyn Fn(&RVector) -> f64 + Send + Sync), y: &RVector) -> RVector {
    let step = 1e-6 * vec_amax_r(y).max(1.0);
    let mut grad = RVector::zeros(y.len());
    let mut probe = y.clone();
    for i in 0..y.len() {
        probe[i] = y[i] + step;
        let plus = v(&probe);
        probe[i] = y[i] - step;
        let minus = v(&probe);
        probe[i] = y[i];
        grad[i] = (plus - minus) / (2.0 * step);
    }
    grad
}

fn gradient_sample_points(dim: usize) -> Vec<RVector> {
    let mut points = vec![RVector::zeros(dim), RVector::from_element(dim, 0.3)];
    points.push(RVector::from_fn(
        dim,
        |i, _| {
            if i % 2 == 0 {
                0.45
            } else {
                -0.45
            }
        },
    ));
    points.push(RVector::from_fn(dim, |i, _| 0.1 + 0.05 * i as f64));
    points
}

/// The oscillatory form `y' = O y + g(y)` with spectral data for `O`.
#[derive(Clone)]
pub struct OscillatorySystem {
    omega: RMatrix,
    g: Nonlinearity,
    dec: SpectralDecomposition,
}

impl fmt::Debug for OscillatorySystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OscillatorySystem")
            .field("dim", &self.omega.nrows())
            .finish_non_exhaustive()
    }
}

impl OscillatorySystem {
    /// Build from an explicit generator and nonlinearity. `omega` must be
    /// skew-symmetric (checked through the eigendecomposition).
    pub fn from_parts(omega: RMatrix, g: Nonlinearity) -> Result<Self> {
        let dec = eig_skew_hermitian(&complexify(&omega), STRUCTURE_TOL)?;
        Ok(Self { omega, g, dec })
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }

    pub fn omega(&self) -> &RMatrix {
        &self.omega
    }

    pub fn dec(&self) -> &SpectralDecomposition {
        &self.dec
    }

    /// Transformed frequencies; equal to the stored eigenvalue vector since
    /// the generator already carries the `1/eps` factor.
    pub fn omega_tilde(&self) -> &nalgebra::DVector<f64> {
        self.dec.lambda()
    }

    pub fn g(&self, y: &RVector) -> RVector {
        (self.g)(y)
    }

    pub fn g_fn(&self) -> Nonlinearity {
        Arc::clone(&self.g)
    }

    /// Kinetic energy of a transformed state through the Hermitian form with
    /// `|L|`. For states `P^H y` with real `y` this equals `K(y)` whenever
    /// the mass matrix is positive semidefinite.
    pub fn transformed_kinetic(&self, ytil: &CVector) -> f64 {
        0.5 * self
            .dec
            .lambda()
            .iter()
            .zip(ytil.iter())
            .map(|(&l, z)| l.abs() * z.norm_sqr())
            .sum::<f64>()
    }
}

/// Derive the oscillatory form `O = Q M / eps`, `g = Q grad V`.
pub fn derive_oscillatory(sys: &ConservativeSystem) -> Result<OscillatorySystem> {
    let omega = sys.q() * sys.m() / sys.eps();
    let q = sys.q().clone();
    let grad_v = sys.grad_v.clone();
    let g: Nonlinearity = Arc::new(move |y: &RVector| &q * grad_v(y));
    OscillatorySystem::from_parts(omega, g)
}

/// Change of variable to eigencoordinates: `ytil = P^H y`.
pub fn transform_state(osc: &OscillatorySystem, y: &RVector) -> CVector {
    osc.dec().p().adjoint() * complexify_vec(y)
}

/// Inverse change of variable: `y = P ytil` (complex in general).
pub fn inverse_transform(osc: &OscillatorySystem, ytil: &CVector) -> CVector {
    osc.dec().p() * ytil
}

/// Real part of the inverse transform; valid for states that remain in the
/// image of real vectors up to roundoff.
pub fn inverse_transform_real(osc: &OscillatorySystem, ytil: &CVector) -> RVector {
    let full = inverse_transform(osc, ytil);
    full.map(|z| z.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::problems::{wind_initial_state, wind_problem};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn wind_energy_at_default_state() {
        let eps = 1e-4;
        let sys = wind_problem(1.0, eps).unwrap();
        let y0 = wind_initial_state(eps);
        assert_relative_eq!(sys.kinetic(&y0), 1.105, max_relative = 1e-13);
        // V(y0) = -eps^{3/2} (1.1 - 1.331/3) / 2
        let v_expected = -0.5 * eps.powf(1.5) * (1.1 - 1.331 / 3.0);
        assert_relative_eq!(sys.potential(&y0), v_expected, max_relative = 1e-12);
        assert_relative_eq!(sys.energy(&y0), 1.105 + v_expected, max_relative = 1e-13);
        assert_relative_eq!(sys.energy(&y0), 1.1049996718, max_relative = 1e-9);
    }

    #[test]
    fn zero_state_energy_is_potential() {
        let sys = wind_problem(1.0, 1e-4).unwrap();
        let zero = RVector::zeros(2);
        assert_eq!(sys.kinetic(&zero), 0.0);
        assert_eq!(sys.energy(&zero), sys.potential(&zero));
    }

    #[test]
    fn quadratic_form_example() {
        // V = 0, M = I, eps = 1, y = (3,4) -> H = 12.5
        let v: Potential = Arc::new(|_| 0.0);
        let g: Gradient = Arc::new(|y: &RVector| RVector::zeros(y.len()));
        let q = RMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let sys = ConservativeSystem::new(q, RMatrix::identity(2, 2), 1.0, v, g).unwrap();
        let y = RVector::from_row_slice(&[3.0, 4.0]);
        assert_relative_eq!(sys.energy(&y), 12.5, max_relative = 1e-15);
    }

    #[test]
    fn energy_minus_kinetic_is_potential() {
        let sys = wind_problem(1.0, 1e-4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let y = RVector::from_fn(2, |_, _| rng.gen_range(-0.05..0.05));
            let diff = sys.energy(&y) - sys.kinetic(&y);
            // Absolute floor covers the cancellation of the large kinetic part.
            assert_relative_eq!(
                diff,
                sys.potential(&y),
                max_relative = 1e-12,
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn rejects_non_skew_q() {
        let v: Potential = Arc::new(|_| 0.0);
        let g: Gradient = Arc::new(|y: &RVector| RVector::zeros(y.len()));
        let res =
            ConservativeSystem::new(RMatrix::identity(2, 2), RMatrix::identity(2, 2), 1.0, v, g);
        assert!(matches!(res, Err(Error::InvalidSystem { .. })));
    }

    #[test]
    fn rejects_bad_gradient() {
        let v: Potential = Arc::new(|y: &RVector| y[0] * y[0]);
        let g: Gradient = Arc::new(|y: &RVector| RVector::from_element(y.len(), 7.0));
        let q = RMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let res = ConservativeSystem::new(q, RMatrix::identity(2, 2), 1.0, v, g);
        assert!(matches!(res, Err(Error::InvalidSystem { .. })));
    }

    #[test]
    fn wind_oscillatory_form() {
        let eps = 1e-4;
        let sys = wind_problem(1.0, eps).unwrap();
        let osc = derive_oscillatory(&sys).unwrap();
        let expected = RMatrix::from_row_slice(2, 2, &[0.0, -1e4, 1e4, 0.0]);
        assert!(amax_r(&(osc.omega() - expected)) < 1e-12 * 1e4);

        // The stated nonlinearity, checked against Q * (finite differences of V).
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let y = RVector::from_fn(2, |_, _| rng.gen_range(-0.5..0.5));
            let g = osc.g(&y);
            assert_relative_eq!(g[0], y[0] * y[1], epsilon = 1e-12);
            assert_relative_eq!(g[1], 0.5 * (y[0] * y[0] - y[1] * y[1]), epsilon = 1e-12);
            let fd = central_difference(&|p: &RVector| sys.potential(p), &y);
            let qfd = sys.q() * fd;
            assert!(vec_amax_r(&(g - qfd)) < 1e-8);
        }
    }

    #[test]
    fn non_commuting_mass_matrix_is_rejected_at_derivation() {
        // Q skew and M symmetric pass construction, but QM is skew only when
        // they commute; here QM = [[0,-2],[1,0]].
        let v: Potential = Arc::new(|_| 0.0);
        let g: Gradient = Arc::new(|y: &RVector| RVector::zeros(y.len()));
        let q = RMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let m = RMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let sys = ConservativeSystem::new(q, m, 1.0, v, g).unwrap();
        assert!(matches!(
            derive_oscillatory(&sys),
            Err(Error::NotSkewHermitian { .. })
        ));
    }

    #[test]
    fn zero_q_gives_zero_omega_and_g() {
        let v: Potential = Arc::new(|y: &RVector| y[0].powi(3));
        let g: Gradient =
            Arc::new(|y: &RVector| RVector::from_row_slice(&[3.0 * y[0] * y[0], 0.0]));
        let sys = ConservativeSystem::new(RMatrix::zeros(2, 2), RMatrix::identity(2, 2), 1.0, v, g)
            .unwrap();
        let osc = derive_oscillatory(&sys).unwrap();
        assert_eq!(amax_r(osc.omega()), 0.0);
        let y = RVector::from_row_slice(&[2.0, 1.0]);
        assert_eq!(vec_amax_r(&osc.g(&y)), 0.0);
    }

    #[test]
    fn eps_scaling_scales_omega() {
        let sys1 = wind_problem(1.0, 1e-2).unwrap();
        let sys2 = wind_problem(1.0, 2e-2).unwrap();
        let o1 = derive_oscillatory(&sys1).unwrap();
        let o2 = derive_oscillatory(&sys2).unwrap();
        assert!(amax_r(&(o1.omega() - o2.omega() * 2.0)) < 1e-12 * amax_r(o1.omega()));
    }

    #[test]
    fn exact_vector_field_conserves_energy() {
        // dH/dt = grad H . (Q grad H) = 0 by skewness.
        let sys = wind_problem(1.0, 1e-4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let y = RVector::from_fn(2, |_, _| rng.gen_range(-0.02..0.02));
            let grad = sys.grad_energy(&y);
            let field = sys.q() * &grad;
            let derivative = grad.dot(&field).abs();
            assert!(derivative <= 1e-10 * grad.norm_squared().max(1e-300));
        }
    }

    #[test]
    fn kinetic_invariant_under_linear_flow() {
        let sys = wind_problem(1.0, 1e-3).unwrap();
        let osc = derive_oscillatory(&sys).unwrap();
        let e = crate::spectral::exp_matrix(osc.dec(), 0.37).unwrap();
        let e = crate::matrix::real_part_checked(&e, 1e-10).unwrap();
        let y = wind_initial_state(1e-3);
        let k0 = sys.kinetic(&y);
        let k1 = sys.kinetic(&(&e * &y));
        assert_relative_eq!(k0, k1, max_relative = 1e-10);
    }

    #[test]
    fn identity_basis_transform_is_identity() {
        // Zero generator decomposes with P = I, so ytil = y.
        let v: Potential = Arc::new(|_| 0.0);
        let g: Gradient = Arc::new(|y: &RVector| RVector::zeros(y.len()));
        let sys = ConservativeSystem::new(RMatrix::zeros(3, 3), RMatrix::identity(3, 3), 1.0, v, g)
            .unwrap();
        let osc = derive_oscillatory(&sys).unwrap();
        let y = RVector::from_row_slice(&[1.0, -2.0, 0.5]);
        let ytil = transform_state(&osc, &y);
        for i in 0..3 {
            assert_eq!(ytil[i].re, y[i]);
            assert_eq!(ytil[i].im, 0.0);
        }
    }

    #[test]
    fn transform_round_trip_and_isometry() {
        let sys = wind_problem(1.0, 1e-4).unwrap();
        let osc = derive_oscillatory(&sys).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let y = RVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            let ytil = transform_state(&osc, &y);
            let back = inverse_transform_real(&osc, &ytil);
            assert!(vec_amax_r(&(&back - &y)) < 1e-12);
            assert_relative_eq!(ytil.norm(), y.norm(), epsilon = 1e-12);
        }
    }

    #[test]
    fn transformed_energy_matches_original() {
        let eps = 1e-4;
        let sys = wind_problem(1.0, eps).unwrap();
        let osc = derive_oscillatory(&sys).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..20 {
            let y = RVector::from_fn(2, |_, _| rng.gen_range(-0.02..0.02));
            let ytil = transform_state(&osc, &y);
            let h_tilde = osc.transformed_kinetic(&ytil)
                + sys.potential(&inverse_transform_real(&osc, &ytil));
            assert_relative_eq!(h_tilde, sys.energy(&y), max_relative = 1e-10);
        }
    }
}
