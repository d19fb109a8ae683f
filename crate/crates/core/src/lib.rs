//! Sparse linear contextual bandits with variational-Bayes Thompson sampling.
//!
//! The crate is organised around the loop a learner runs every round:
//!
//! * [`env`] draws a set of `K` context vectors, scores the chosen arm and
//!   keeps the regret accounting.
//! * [`vb`] holds the spike-and-slab prior with a Laplace slab, its
//!   mean-field variational posterior fitted by coordinate ascent, and the
//!   prior-scale schedules.
//! * [`policies`] implements the agents (VB Thompson sampling plus the
//!   linear and lasso baselines) and the episode runner.
//! * [`sparse_linear`] provides the lasso / ridge / logistic-lasso solvers
//!   the baselines and the VB initialisation rely on.
//! * [`diagnostics`] computes the design-matrix quantities that govern the
//!   regret analysis: sparse Riesz eigenvalues, compatibility numbers,
//!   the transfer inequality, margin exponents and contraction traces.
//!
//! A longer narrative lives in the `book/` directory of the repository; its
//! code listings are compiled as doc-tests of this crate.

pub mod diagnostics;
pub mod env;
mod error;
pub(crate) mod linalg;
#[cfg(feature = "oracle")]
pub mod oracle;
pub mod policies;
pub mod sparse_linear;
pub mod vb;

pub use error::{Error, Result};
pub use linalg::{argmax, dot, ColumnDesign};

use rand::SeedableRng;

/// Random stream used by every stochastic operation in the crate.
///
/// ChaCha8 keeps streams stable across platforms and `rand` releases, which
/// the byte-for-byte determinism of experiment traces relies on.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Build a [`SimRng`] from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/environment.md")]
    mod environment {}
    #[doc = include_str!("../../../book/src/prior.md")]
    mod prior {}
    #[doc = include_str!("../../../book/src/cavi.md")]
    mod cavi {}
    #[doc = include_str!("../../../book/src/policies.md")]
    mod policies {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/lasso.md")]
    mod lasso {}
}
