//! Fingerprinting of discrete-action reinforcement-learning policies with
//! non-transferable universal adversarial masks.
//!
//! The crate is organized around the lifecycle of an ownership claim:
//!
//! - [`envlab`] — small deterministic environments with a bounded-tensor
//!   observation contract.
//! - [`policylab`] — training, persistence and serving of DQN / A2C / PPO
//!   policies with white-box (scores, input gradients) and black-box
//!   (actions only) access levels.
//! - [`maskforge`] — generation of universal adversarial masks that fool the
//!   victim policy but do not transfer to independently trained policies,
//!   plus the fooling-rate / action-agreement / non-transferability metrics.
//! - [`verdict`] — the verifier: windowed action-agreement voting against a
//!   suspected black-box policy, utility impact of verification, and ROC
//!   threshold sweeps.
//! - [`redteam`] — model-modification and evasion attacks an adversary could
//!   run against the scheme, with the matching utility-impact metric.
//! - [`uapbase`] — a minimum-distance universal-perturbation baseline for
//!   comparison against the sign-gradient masks.
//! - [`harness`] — experiment configuration, seeded pipelines, sweeps, cost
//!   accounting and artifact persistence.
//!
//! All numeric code is generic over the scalar type through [`Scalar`];
//! `f32` is the default for pipelines and `f64` is used where finite
//! difference checks need the extra precision.

pub mod envlab;
pub mod error;
pub mod harness;
pub mod maskforge;
pub mod policylab;
pub mod redteam;
pub mod scalar;
pub mod seed;
pub mod uapbase;
pub mod verdict;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default scalar used by the command-line pipelines.
pub type F = f32;

/// Concrete aliases for the most commonly handled artifact types.
pub type Trace32 = envlab::EpisodeTrace<f32>;
pub type Trace64 = envlab::EpisodeTrace<f64>;
