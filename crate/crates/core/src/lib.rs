//! Numerical laboratory for simultaneous information and energy transmission
//! when the receiver's energy-harvesting function is only known through
//! samples.
//!
//! The crate is organised bottom-up:
//!
//! * [`funcspace`]: the smoothness class, dense-grid functions, regular-design
//!   sampling and the adversarial bump construction.
//! * [`reconstruct`]: spline interpolation, lower/upper envelopes of the set of
//!   admissible functions, and local polynomial regression.
//! * [`channel`]: discrete channels on a grid of `[0, 1]`, mutual information
//!   and expected harvested energy.
//! * [`capacity`]: Blahut–Arimoto based capacity-energy and energy-capacity
//!   solvers and tradeoff sweeps.
//! * [`multicast`]: max-min multicast capacity with per-node energy
//!   requirements.
//! * [`jscc`]: rate-distortion, energy-distortion curves and projection losses.
//! * [`experiments`]: loss sweeps over the number of samples, slope fitting and
//!   report emission.
//! * [`scenario`]: JSON scenario files and the dispatcher behind the CLI.
//!
//! Information is measured in bits throughout.

pub mod capacity;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod funcspace;
pub mod jscc;
pub mod multicast;
pub mod reconstruct;
pub mod scenario;

pub use error::{Result, SietError};
