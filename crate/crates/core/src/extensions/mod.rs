//! Reductions from `R` and `R^N` to the unit interval, and phase-only
//! orthogonalization of complex families.

pub mod orthogonal;
pub mod real_line;

pub use orthogonal::{
    inner_products, orthogonalize, orthogonalize_real_line, ComplexRealLineFunction,
    Orthogonalization, RealLineOrthogonalization,
};
pub use real_line::{
    integrate_real_line, logistic, marginalize, phase_pushforward, to_unit_interval,
    to_unit_interval_l2, MultiFunction, PushedPhase, RealLineFunction,
};
