//! Operator theory on the quantum annulus, made computable.
//!
//! The crate models the dense subalgebra of the quantum annulus (finite
//! Fourier sums `Σ Vⁿ aₙ(L)` with eventually constant coefficients), the
//! covariant derivation `δ(a) = [Vβ(L), a]`, its implementation `D` between
//! two weighted GNS spaces `H_w → H_{w'}`, the Fourier-mode operators `Dₙ`
//! with their explicit inverse kernels `Qₙ`, and the estimates showing that
//! `Qₙ` are Hilbert–Schmidt.
//!
//! Module map:
//!
//! * [`lattice`]: weights, windows and vectors on `ℤ` with closed-form tails.
//! * [`algebra`]: eventually constant coefficients, algebra elements, `δ`.
//! * [`modes`]: `Dₙ`, the kernels of `Qₙ` in log space and exact arithmetic.
//! * [`operator`]: the assembled `D`, truncations, SVD and block Dirac checks.
//! * [`bounds`]: lemma sweeps, `‖Qₙ‖_HS` with certified tails, region bounds.
//! * [`sample`]: seeded random generators shared by tests and the CLI.
//! * [`report`]: CSV and JSON emitters.

// `!(x < y)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod bounds;
pub mod error;
pub mod lattice;
pub mod modes;
pub mod operator;
pub mod report;
pub mod sample;
pub mod sum;

pub use algebra::{AlgebraElement, BetaFunction, CoeffFunction, EventuallyConstant};
pub use bounds::{BoundReport, Certified, HsNorm};
pub use error::{Error, Result};
pub use lattice::{Admissibility, NormEstimate, NormKind, TailPoly, TailVector, WeightKind, WeightParams, Window};
pub use modes::{KernelValue, ModeOperatorSpec, QnImage, Roundtrip};
pub use operator::{BlockDirac, FourierVector, TruncatedOperator};

/// Complex scalar used for coefficient data.
pub type C64 = num_complex::Complex64;
