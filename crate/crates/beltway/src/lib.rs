//! Recovery of point configurations in R^n, up to orthogonal transformation,
//! from second-moment data: the unordered multiset of triples
//! (|v_i|^2, |v_j|^2, <v_i, v_j>) of a binary delta-function.
//!
//! The crate provides:
//! - a forward model ([`forward`]): moments from configurations, distance
//!   extraction, Gram-space noise, reproducible sampling;
//! - Cayley-Menger pre-processing ([`preprocess`]) that bounds each unknown
//!   inner product by the two positive roots of a tetrahedron polynomial;
//! - three assembly engines ([`assemble`]): exact recovery with an isolated
//!   point, recovery when all points share a sphere, and a noise-tolerant
//!   variant driven by Eckart-Young distances;
//! - a brute-force oracle ([`oracle`]) that enumerates symmetric
//!   rearrangements, tests Gram equivalence and certifies uniqueness on
//!   small instances;
//! - self-contained small-matrix numerics ([`linalg`]) and deterministic
//!   splittable randomness ([`rng`]).

pub mod assemble;
pub mod error;
pub mod forward;
pub mod io;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod preprocess;
pub mod rng;

pub use assemble::{assemble_exact, assemble_noisy, assemble_sphere, Mode, RecoveryResult};
pub use error::{Error, Result};
pub use forward::{add_gram_noise, distances_from_moment, sample_config, second_moment};
pub use model::{GramMatrix, PointConfig, SecondMoment, Triple};
pub use oracle::{are_equivalent, census, enumerate_rearrangements, uniqueness_certificate};
