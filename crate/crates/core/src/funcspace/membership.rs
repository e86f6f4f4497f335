use serde::Serialize;

use super::{GridFunction, SmoothnessClass};
use crate::error::{Result, SietError};

/// Relative slack on the derivative bound; finite differences inflate
/// estimates at grid scale.
pub const MEMBERSHIP_SLACK: f64 = 0.05;

#[derive(Clone, Debug, Serialize)]
pub struct MembershipReport {
    /// Estimated `max |f^(k)|` for `k = 0..=lambda`.
    pub max_abs_derivative: Vec<f64>,
    pub bound: f64,
    pub slack: f64,
    pub member: bool,
}

/// Numerical audit of class membership: the `k`-th derivative is estimated
/// by the `k`-th difference quotient over every stencil of the grid.
pub fn membership_check(f: &GridFunction, cls: &SmoothnessClass) -> Result<MembershipReport> {
    let lambda = cls.lambda() as usize;
    let n = f.grid_size();
    if n < 10 * (lambda + 1) {
        return Err(SietError::param(
            "grid_size",
            format!("need at least {} nodes for lambda = {lambda}, got {n}", 10 * (lambda + 1)),
        ));
    }
    let inv_h = (n - 1) as f64;
    let mut diffs = f.values().to_vec();
    let mut max_abs_derivative = Vec::with_capacity(lambda + 1);
    for k in 0..=lambda {
        if k > 0 {
            diffs = diffs.windows(2).map(|w| (w[1] - w[0]) * inv_h).collect();
        }
        max_abs_derivative.push(diffs.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
    }
    let limit = cls.k_bound() * (1.0 + MEMBERSHIP_SLACK);
    let member = max_abs_derivative.iter().all(|&d| d <= limit);
    Ok(MembershipReport {
        max_abs_derivative,
        bound: cls.k_bound(),
        slack: MEMBERSHIP_SLACK,
        member,
    })
}
