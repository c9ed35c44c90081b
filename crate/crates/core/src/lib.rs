//! Verification toolkit for Hardy and Hardy-Rellich inequalities obtained by
//! factorizing differential expressions on homogeneous group models.
//!
//! The crate has two arms:
//!
//! * an exact arm — differential operators applied through rational jet
//!   arithmetic, used to check every operator expansion identity at random
//!   rational points with no tolerance at all;
//! * a numerical arm — deterministic tensor Gauss–Legendre quadrature over the
//!   supports of smooth compactly supported test fields, used to certify the
//!   inequality catalog (deficit ≥ 0 up to quadrature error) and to probe the
//!   sharp constants with extremizing families.
//!
//! Group models are concrete: ℝⁿ with diagonal dilations (isotropic or
//! anisotropic quasi-norms) and the Heisenberg group ℍₙ.

pub mod error;
pub mod expr;
pub mod field;
pub mod functional;
pub mod group;
pub mod identity;
pub mod ineq;
pub mod jet;
pub mod optim;
pub mod op;
pub mod quad;
pub mod radial;
pub mod report;
pub mod sharp;
pub mod scalar;

pub use error::CoreError;
pub use expr::{CExpr, Expr};
pub use field::ScalarField;
pub use ineq::{DeficitReport, Params};
pub use group::{DilationStructure, GroupModel, QuasiNormSpec};
pub use jet::{Jet, JetShape};
pub use op::OpExpr;
pub use quad::QuadSpec;
