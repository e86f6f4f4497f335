//! A harvesting function whose samples cannot reveal where its energy is:
//! constant `beta = M` against `M (1 - bump)` on a channel on which the
//! design inputs are useless. The projection loss stays bounded away from
//! zero however many samples are taken.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{distortion_range, jscc_loss, CurveOptions, ProjectionDirection, SourceModel};
use crate::capacity::SolverOptions;
use crate::channel::make_adversarial_mod;
use crate::error::{Result, SietError};
use crate::experiments::{config_digest, LossReport};
use crate::funcspace::{BumpConstruction, RealFunction, SmoothnessClass};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CounterexampleConfig {
    pub m_list: Vec<usize>,
    pub lambda: u32,
    pub k_bound: f64,
    /// The constant `M`.
    pub amplitude: f64,
    /// Bump height as a fraction of what the class allows.
    pub bump_scale: f64,
    /// With `false` the estimate equals the truth (a sanity baseline).
    pub use_bump: bool,
    pub n_out: usize,
    pub concentration: f64,
    pub kappa: f64,
    pub n_points: usize,
    pub direction: ProjectionDirection,
    /// Defaults to a three-letter source with Hamming distortion.
    pub source: Option<SourceModel>,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self {
            m_list: vec![9, 33, 129],
            lambda: 1,
            k_bound: 1.0,
            amplitude: 1.0,
            bump_scale: 1.0,
            use_bump: true,
            n_out: 64,
            concentration: 100.0,
            kappa: 1.0,
            n_points: 33,
            direction: ProjectionDirection::default(),
            source: None,
        }
    }
}

/// Three equiprobable-ish letters at `0, 1/2, 1`, Hamming distortion.
pub fn hamming_source() -> SourceModel {
    let rows = (0..3)
        .map(|i| (0..3).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
        .collect();
    SourceModel::new(
        vec![0.0, 0.5, 1.0],
        vec![0.5, 0.3, 0.2],
        vec!["a".into(), "b".into(), "c".into()],
        rows,
    )
    .expect("valid built-in source")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub report: LossReport,
    /// Smallest loss over `m`.
    pub floor: f64,
    /// `D_max - D_min` of the source.
    pub predicted_floor: f64,
    /// `(max - min) / max` of the losses over `m`.
    pub relative_variation: f64,
    /// Whether every true curve collapsed to a single point.
    pub true_degenerate: bool,
}

pub fn counterexample_scenario(cfg: &CounterexampleConfig) -> Result<CounterexampleReport> {
    let cls = SmoothnessClass::new(cfg.lambda, cfg.k_bound)?;
    if cfg.m_list.is_empty() || cfg.m_list.iter().any(|&m| m < 2) {
        return Err(SietError::param("m_list", "need at least one m >= 2"));
    }
    if !(cfg.amplitude > 0.0 && cfg.amplitude.is_finite()) {
        return Err(SietError::param("amplitude", "must be positive"));
    }
    if cfg.amplitude * cfg.bump_scale > 1.0 {
        // M (1 - f) has derivatives up to M K bump_scale.
        return Err(SietError::param("bump_scale", "amplitude * bump_scale must be <= 1 to stay in the class"));
    }
    let src = cfg.source.clone().unwrap_or_else(hamming_source);
    let (d_min, d_max) = distortion_range(&src);
    let opts = CurveOptions {
        n_points: cfg.n_points,
        kappa: cfg.kappa,
        solver: SolverOptions::default(),
    };
    let digest = config_digest(&("counterexample", cfg))?;
    let m_amp = cfg.amplitude;
    let rows: Vec<Result<_>> = cfg
        .m_list
        .par_iter()
        .map(|&m| {
            let ch = make_adversarial_mod(m, 2 * m - 1, cfg.n_out, cfg.concentration)?;
            let bump = BumpConstruction::new(m, &cls, cfg.bump_scale)?;
            let beta = |_: f64| m_amp;
            let use_bump = cfg.use_bump;
            let beta_hat = |x: f64| if use_bump { m_amp * (1.0 - bump.eval(x)) } else { m_amp };
            jscc_loss((&beta, &src), (&beta_hat, &src), &ch, &opts, cfg.direction)
        })
        .collect();
    let mut report = LossReport::new("counterexample", cfg.m_list.clone(), digest);
    let mut losses = Vec::new();
    let mut true_degenerate = true;
    for (m, row) in cfg.m_list.iter().zip(rows) {
        match row {
            Ok(l) => {
                true_degenerate &= l.true_curve.degenerate;
                report
                    .curves
                    .insert(format!("true_m{m}"), l.true_curve.points.iter().map(|&(b, d)| [b, d]).collect());
                report
                    .curves
                    .insert(format!("est_m{m}"), l.est_curve.points.iter().map(|&(b, d)| [b, d]).collect());
                losses.push(Some(l.loss));
            }
            Err(e) => {
                report.failures.push(format!("m = {m}: {e}"));
                losses.push(None);
            }
        }
    }
    let ok: Vec<f64> = losses.iter().flatten().copied().collect();
    if ok.is_empty() {
        return Err(SietError::Numerical(format!("every m failed: {:?}", report.failures)));
    }
    let lo = ok.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ok.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    report.add_series("jscc_loss", losses, false);
    report.notes.push(format!("predicted floor D_max - D_min = {}", d_max - d_min));
    Ok(CounterexampleReport {
        report,
        floor: lo,
        predicted_floor: d_max - d_min,
        relative_variation: if hi > 0.0 { (hi - lo) / hi } else { 0.0 },
        true_degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_is_the_distortion_range() {
        let r = counterexample_scenario(&CounterexampleConfig {
            m_list: vec![9, 17],
            n_points: 9,
            ..Default::default()
        })
        .unwrap();
        assert!(r.true_degenerate);
        assert!(r.report.failures.is_empty());
        assert!((r.floor - r.predicted_floor).abs() < 1e-6, "{} vs {}", r.floor, r.predicted_floor);
        assert!(r.relative_variation < 1e-6);
    }

    #[test]
    fn without_bump_no_loss() {
        let r = counterexample_scenario(&CounterexampleConfig {
            m_list: vec![9],
            n_points: 5,
            use_bump: false,
            ..Default::default()
        })
        .unwrap();
        assert!(r.floor.abs() < 1e-9);
    }
}
