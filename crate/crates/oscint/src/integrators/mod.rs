//! One-step exponential integrators.
//!
//! `y' = O y + g(y)` is advanced by methods that propagate the linear part
//! exactly through `exp(h O)` and treat only `g` approximately:
//!
//! * EI-T, the symmetric scheme
//!   `y1 = e^{hO} y + (h/2)(g(y1) + e^{hO} g(y))`;
//! * the EI-O family of one-stage implicit methods `(c1, a11(hO), b1(hO))`,
//!   including the five named coefficient sets of [`table1_method`];
//! * arbitrary s-stage tableaus, including symplectic ones lifted from
//!   classical RK coefficients by [`build_symplectic_ei`].
//!
//! Implicit stages are solved by damped fixed-point iteration; in the
//! intended regime (small nonlinearity against a stiff skew generator) the
//! stage map is strongly contractive and converges in a handful of
//! iterations from the exponential-Euler predictor.

mod method;
mod predicates;
mod stepping;

pub use method::{
    build_symplectic_ei, rk_is_symplectic, rk_symplecticity_residual, table1_method, CoeffFn,
    EIOMethod, MethodClaims, Tableau, TABLE1_NAMES,
};
pub use predicates::is_symplectic_eio;
pub use stepping::{
    check_symmetry_numeric, is_symmetric_numeric, step_ei_o, step_ei_t, step_general, MethodSpec,
    SolverConfig, StepOutcome, Stepper, TransformedStepper, SYMMETRY_CLASSIFICATION_FACTOR,
};
