//! Smooth, compactly supported phases `g` on `(0, 1)` for which every integral
//! `∫ f_j(x) e^{i g(x)} dx` of a finite family of real functions vanishes.
//!
//! The construction runs in stages:
//!
//! 1. [`func`] decides where the family is linearly independent and picks the
//!    split point.
//! 2. [`partition`] solves the classical alternating-sign breakpoint system on
//!    both sides of the split.
//! 3. [`phase`] turns the two partitions into a four-level step phase and
//!    replaces every jump by a flat C-infinity ramp.
//! 4. [`corrector`] adds a bump-basis correction and Newton-solves the
//!    perturbed system back to zero.
//! 5. [`driver`] ties these together, recursing on subintervals when the family
//!    is dependent on both sides of every split point.
//!
//! [`extensions`] carries the real-line reductions and the phase-only
//! orthogonalization of complex function families.

// `!(x > 0.0)` is the NaN-rejecting form throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corrector;
pub mod driver;
pub mod error;
pub mod extensions;
pub mod func;
mod jet;
pub mod oracles;
pub mod partition;
pub mod phase;
pub mod quadrature;

pub use nalgebra;
pub use num_complex::{self, Complex64};

pub use corrector::{Bump, CorrectionBasis};
pub use driver::{
    realify, solve_annihilating_phase, verify, CaseKind, ComplexFunction, SolveOptions, SolveReport,
};
pub use error::{Error, Result};
pub use func::{DependenceBounds, FunctionSet, FunctionSpec};
pub use partition::{Partition, PartitionOptions};
pub use phase::{Phase, Segment, SegmentKind, SmoothPhase, StepPhase};
pub use quadrature::QuadratureOptions;
