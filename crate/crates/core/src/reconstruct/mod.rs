//! Reconstruction of a function from its regular-design samples.

mod envelope;
mod local_poly;
mod spline;

pub use envelope::{band_margin, calibration_constant, lower_envelope, EnvelopePair, EnvelopeSide};
pub use local_poly::{
    local_poly_fit, local_poly_fit_with_diagnostics, FitDiagnostics, FitEvent, KernelKind, KernelSpec, LocalPoly,
    DEFAULT_BANDWIDTH_ALPHA, MAX_CONDITION,
};
pub use spline::{spline_fit, spline_interpolate, Spline};
