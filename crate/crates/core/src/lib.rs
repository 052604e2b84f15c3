//! Self-supervised learning under (approximate) conditional independence:
//! closed-form pretext and downstream estimators, conditional-independence
//! diagnostics, the conditional-expectation operator and its ACE solver,
//! a topic-model instantiation, and a reproducible simulation harness.

pub mod ace;
pub mod ci;
pub mod error;
pub mod generators;
pub mod harness;
pub mod joint_file;
pub mod linalg;
pub mod parallel;
pub mod rng;
pub mod selfcheck;
pub mod ssl;
pub mod topic;

pub use error::{Error, Result};
pub use linalg::{CovarianceBlocks, DenseMatrix, DenseVector};
pub use parallel::Execution;
