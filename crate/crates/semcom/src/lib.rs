//! Goal-oriented semantic communication toolkit.
//!
//! The crate bundles the pieces of a communication chain that transmits
//! task-relevant representations instead of raw symbols:
//!
//! - [`topo`]: triangulations and glued cell complexes over images, with
//!   Laplacian eigen-dictionaries and the sparse-approximation frontier that
//!   compares representation spaces.
//! - [`ib`]: linear-Gaussian bottleneck encoders trading representation
//!   complexity `I(X; T)` against end-to-end estimation error over a noisy
//!   link, plus the trade-off frontier across the weight `beta`.
//! - [`adapt`]: a slot-by-slot controller that picks transmit power, clock
//!   rates and `beta` to minimize average energy under accuracy and delay
//!   constraints, using virtual queues.
//! - [`channel`]: PSNR-parameterized additive-noise links with static or
//!   per-slot random severity.
//! - [`glvm`]: a latent-variable codec trained with the channel in the loop
//!   whose latent dimension can shrink per slot without retraining, plus a
//!   receiver-side classifier.
//! - [`data`]: IDX dataset ingestion and synthetic sources.

pub mod adapt;
pub mod channel;
pub mod data;
pub mod error;
pub mod glvm;
pub mod ib;
pub mod topo;

pub use error::{Error, Result};
