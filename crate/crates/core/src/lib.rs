//! Self-localization of fixed roadside radar sensors.
//!
//! The pipeline recovers the global pose of a static radar in three steps:
//!
//! 1. [`coarse`]: accumulate moving radar returns and register them to the
//!    road surface cloud with point-to-point ICP, giving `T_coarse`.
//! 2. [`eot`]: track vehicles in the flattened frame with a Gaussian-process
//!    extended object tracker and label their measurements by driving
//!    behavior (left turn, right turn, straight).
//! 3. [`sicp`]: register the labeled trajectory cloud to the labeled road
//!    cloud built by [`laneletmap`], giving `T_fine`.
//!
//! The final pose is `T_utm = T_fine · T_coarse` ([`geometry::compose_final`]).
//! [`sim`] generates synthetic scenarios with ground truth for closed-loop
//! testing.

pub mod coarse;
pub mod eot;
pub mod error;
pub mod geometry;
pub mod laneletmap;
pub mod sicp;
pub mod sim;

pub use error::{Error, Result};
