//! Moment kernels of finitely supported random operator families, their
//! truncated isometric dilations, and a mean-square functional calculus.
//!
//! The pipeline: enumerate words over a d-letter alphabet, assemble the
//! block moment kernel of an operator family, certify positivity and shift
//! domination, factor it (Kolmogorov/GNS), build the shift operators and a
//! truncated isometric dilation on a finite Fock layer, then run realization,
//! saturation, equality-case, and functional-calculus checks against
//! independent tolerances.

pub mod calculus;
pub mod dilation;
pub mod ensemble;
pub mod error;
pub mod fock;
pub mod gns;
pub mod kernel;
pub mod linalg;
pub mod ncpoly;
pub mod pipeline;
pub mod words;

pub use dilation::DilationModel;
pub use ensemble::{OperatorEnsemble, RandomOperator};
pub use error::{Error, Result};
pub use gns::GnsModel;
pub use kernel::BlockKernel;
pub use linalg::{CMatrix, CVector};
pub use ncpoly::{parse_ncpoly, NcPoly, Side};
pub use words::{Word, WordTable};
