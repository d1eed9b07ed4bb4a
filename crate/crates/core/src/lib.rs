//! Double-indexed permutation statistics `Q = Σ_{i,j} w(i,j,π(i),π(j))`.
//!
//! The crate decomposes a statistic into linear, degenerate and constant
//! parts, computes the constants entering its concentration bounds, evaluates
//! those bounds and checks them against exact or simulated null laws.

pub mod bounds;
pub mod constants;
pub mod error;
pub mod gen;
pub mod linalg;
pub mod numeric;
pub mod perm;
pub mod stats;
pub mod tensor;
pub mod verify;

pub use bounds::{BoundValue, KParameter, KSource, TailCurve};
pub use constants::{BoundConstants, CorollaryConstants, Interval, Method};
pub use error::{DipsError, Result};
pub use linalg::{Matrix, OpNorm};
pub use perm::{Permutation, RngSeed, SplitBijection};
pub use stats::{Sample, ScoreKind, ScorePair};
pub use tensor::{Decomposition, IndexSplit, Slots, Tensor4};
pub use verify::{Status, VerificationReport};
