//! Gain/phase feedback stability analysis for MIMO LTI systems.
//!
//! The crate combines the two classical frequency-domain views of a square
//! transfer matrix: its gains (singular values) and its phases (the angles of
//! the diagonal unitary factor in a sectorial decomposition). On top of the
//! matrix primitives it provides:
//!
//! - [`matnum`]: complex dense linear algebra, sectoriality classification and
//!   matrix phases;
//! - [`sdpkit`]: a small semidefinite-programming layer (Hermitian LMIs over
//!   scalar and Hermitian matrix variables), backed by Clarabel through a
//!   complex-to-real embedding;
//! - [`dwshell`]: Davis-Wielandt shell computations — `r`-sectoriality,
//!   gain-constrained phase sectors and phase-constrained gains — plus a
//!   sampling oracle used for validation;
//! - [`lti`]: state-space machinery, indented frequency contours, frequency
//!   sweeps and closed-loop construction;
//! - [`stability`]: matrix invertibility tests and the feedback stability
//!   checkers that mix gain and phase conditions;
//! - [`kyp`]: generalized-KYP linear matrix inequalities and the triple-LMI
//!   certificate for "phases bounded below a cut-off frequency, gain bounded
//!   above it".

use openblas_src as _;

mod error;

pub mod dwshell;
pub mod kyp;
pub mod lti;
pub mod matnum;
pub mod sdpkit;
pub mod stability;

pub use error::{Error, Result};
pub use matnum::ComplexMatrix;
