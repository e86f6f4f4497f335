//! The instances the desk-scale experiments run on.

use std::f64::consts::PI;

use crate::capacity::{unconstrained_capacity, SolverOptions};
use crate::channel::{make_circular, DiscreteChannel};
use crate::error::Result;
use crate::funcspace::{GridFunction, SmoothnessClass, DEFAULT_GRID_SIZE};
use crate::jscc::SourceModel;
use crate::multicast::{energy_at_inputs, max_min_capacity, MulticastOptions, MulticastProblem};

/// Input letters of the desk channel. Odd, so that no input other than 0
/// and 1/2 lands on the dyadic sample lattices `i / (m - 1)`.
pub const DESK_LETTERS: usize = 63;

/// Circular channel on `DESK_LETTERS` letters whose noise spreads over about
/// a third of a letter: its capacity achiever is continuous and
/// non-vanishing, and its capacity-energy curve is Lipschitz.
pub fn desk_channel() -> Result<DiscreteChannel> {
    desk_channel_with_noise(0.3)
}

/// Same grid with noise std `letters / DESK_LETTERS`.
pub fn desk_channel_with_noise(letters: f64) -> Result<DiscreteChannel> {
    make_circular(DESK_LETTERS, DESK_LETTERS, letters / DESK_LETTERS as f64)
}

/// `offset + scale K sin(2 pi (x + phase)) / (2 pi)^lambda`: every
/// derivative up to order `lambda` is at most `scale K`.
pub fn smooth_harvester(cls: &SmoothnessClass, offset: f64, scale: f64, phase: f64) -> Result<GridFunction> {
    let amp = scale * cls.k_bound() / (2.0 * PI).powi(cls.lambda() as i32);
    GridFunction::from_fn(DEFAULT_GRID_SIZE, move |x: f64| offset + amp * (2.0 * PI * (x + phase)).sin())
}

/// The default harvester: offset 1/2, scale 0.9, no phase.
pub fn desk_harvester(cls: &SmoothnessClass) -> Result<GridFunction> {
    smooth_harvester(cls, 0.5, 0.9, 0.0)
}

/// Uniform source on `n` points of `[0, 1]` with three reproduction
/// letters whose distortion columns are phase-shifted sinusoids in the class.
pub fn sinusoid_source(cls: &SmoothnessClass, n: usize) -> Result<SourceModel> {
    let cols = (0..3)
        .map(|j| smooth_harvester(cls, 0.5, 0.9, -(j as f64) / 3.0))
        .collect::<Result<Vec<_>>>()?;
    SourceModel::discretized(n, |_| 1.0, vec!["a".into(), "b".into(), "c".into()], cols)
}

/// Two receivers of the desk grid with different noise (0.3 and 0.6 of a
/// letter) and different harvesters (sine and cosine). Each requirement
/// sits `energy_fraction` of the way from the energy the max-min capacity
/// achiever delivers to the node's peak.
pub fn two_node_problem(cls: &SmoothnessClass, energy_fraction: f64) -> Result<MulticastProblem> {
    let chans = vec![desk_channel()?, desk_channel_with_noise(0.6)?];
    let hs = vec![desk_harvester(cls)?, smooth_harvester(cls, 0.5, 0.9, 0.25)?];
    let cap = max_min_capacity(&chans, &MulticastOptions::default())?;
    let reqs = hs
        .iter()
        .map(|h| {
            let e: f64 = energy_at_inputs(&chans[0], h).iter().zip(cap.p.probs()).map(|(a, p)| a * p).sum();
            let peak = chans[0].inputs().iter().map(|&x| h.eval(x)).fold(f64::NEG_INFINITY, f64::max);
            e + energy_fraction * (peak - e)
        })
        .collect();
    MulticastProblem::new(chans, hs, reqs)
}

/// Unconstrained capacity in bits with default tolerances.
pub fn capacity_of(ch: &DiscreteChannel) -> Result<f64> {
    Ok(unconstrained_capacity(ch, &SolverOptions::default())?.0)
}
