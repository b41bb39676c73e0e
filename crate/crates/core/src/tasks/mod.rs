//! Concrete learning tasks: halfplanes on a circle, the FHE-augmented
//! variant of the circle task, and the exactly-d-ones class over a finite
//! domain.

pub mod circle;
pub mod crypto;
pub mod dones;

pub use circle::{band_sampler, circle_task, ArcBand, CirclePoint, HalfplaneHypothesis};
pub use crypto::{crypto_task, CryptoSample, CryptoTask, Payload};
pub use dones::{dones_task, DOnesHypothesis, DOnesTask, TrainingSummary};
