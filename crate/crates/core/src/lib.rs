//! Ownership verification for embedding models that survives rotation,
//! scaling and translation of the output space.
//!
//! A suspect model's embeddings are aligned to the victim's by a similarity
//! transform (sphere fit for scale, Kabsch for rotation and offset). The
//! aligned suspect is then scored against the victim and against clean
//! reference models, and a one-sample t-test decides whether the suspect is
//! unusually close to the victim.

// `!(x <= tol)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacksim;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod linalg;
pub mod stats;
pub mod synth;
pub mod verifier;
pub mod wmvuln;

pub use error::{Error, Result};
pub use estimator::{align, apply_alignment, AlignmentEstimate, SphereFit};
pub use geometry::{PointCloud, RotationMatrix, RstOrder, RstParams};
pub use verifier::{verify, Verdict, VerificationReport};
