//! Gapped cyclic filtered A∞ algebras over truncated Novikov rings.

pub mod ainf;
pub mod deform;
pub mod graded;
pub mod linalg;
pub mod model;
pub mod novikov;
pub mod poly;
pub mod random;
pub mod report;
pub mod transfer;
pub mod isotopy;
pub mod trees;

pub use ainf::{AinfMorphism, FilteredAinfAlgebra};
pub use deform::{BoundingData, DivisorCoeff, DivisorPairingData};
pub use graded::{GradedSpace, MultiOp, OpFamily, OpKind, Pairing};
pub use isotopy::{PseudoIsotopy, PseudoIsotopy2};
pub use linalg::Mat;
pub use novikov::{DiscreteMonoid, MonoidElement, NovikovScalar, Q};
pub use poly::{PiecewisePoly, UPoly};
pub use report::{Report, Violation};
pub use trees::{RibbonTree, Tree};

/// Environment variable capping the worker threads used by internal parallelism.
pub const THREADS_ENV: &str = "CAINF_THREADS";

/// Sizes the global rayon pool from `CAINF_THREADS` when it is set to a positive integer.
/// Returns the thread count applied, if any. Results never depend on the setting.
pub fn configure_threads() -> Option<usize> {
    let n: usize = std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok().map(|_| n)
}
