//! Real-time privacy mechanisms for eye-tracking gaze streams, with the
//! tooling to measure what they cost and what they protect.

pub mod attacks;
pub mod error;
pub mod gaze;
pub mod identify;
pub mod io;
pub mod mechanisms;
pub mod rng;
pub mod sweep;
pub mod synth;
pub mod utility;

pub use error::{Error, Result};
pub use gaze::{GazeSample, GazeStream, Segment};
pub use mechanisms::{privatize_stream, MechanismConfig};
