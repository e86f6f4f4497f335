//! Loss experiments across the number of samples `m`: every sweep runs its
//! `(m, trial)` tasks on the rayon pool, assembles results in `(m, trial)`
//! order and fits log-log slopes.

pub mod instances;
mod report;
mod sweeps;

pub use report::{config_digest, fit_slope, LossReport, SlopeFit, LOSS_FLOOR};
pub use sweeps::{
    distortion_loss_sweep, energy_loss_lower_bound, energy_loss_sweep, info_loss_sweep, jscc_loss_sweep,
    multicast_loss_sweep, reconstruction_sweep, task_seed, ChannelFamily, LowerBoundConfig,
    SampleMode, SweepConfig,
};

/// `m = 9, 17, ..., 257`.
pub fn desk_m_list() -> Vec<usize> {
    vec![9, 17, 33, 65, 129, 257]
}
