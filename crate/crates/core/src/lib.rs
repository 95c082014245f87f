//! Iterated completely positive maps acting on operator-valued positive
//! definite kernels.
//!
//! Every iterated kernel `K_w` can be computed two ways: directly, by
//! applying the Kraus maps blockwise ([`channels::iterate_kernel`]), and
//! through a compressed model on the Kolmogorov feature space
//! ([`model::compressed_gram`]). Statements that depend on the model being
//! contractive are gated on a computed [`model::Certificate`].

pub mod asymptotics;
pub mod channels;
pub mod cli;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod matrix;
pub mod model;
pub mod random;
pub mod randomdyn;
pub mod rn;

pub use channels::{CPMap, MapSet, Word};
pub use error::{Error, Result};
pub use kernels::{KolmogorovFactor, PDKernel, PointId};
pub use matrix::{c64, ComplexMatrix, C64};
pub use model::{Certificate, LiftSet, LiftedFamily};
