//! Energy-distortion tradeoff curves and `l1` projection losses.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{distortion_rate, SourceModel};
use crate::capacity::{capacity_energy, energy_capacity, unconstrained_capacity, SolverOptions};
use crate::channel::DiscreteChannel;
use crate::error::{Result, SietError};
use crate::funcspace::RealFunction;

/// Pareto-optimal `(energy, distortion)` pairs, sorted by energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyDistortionCurve {
    pub points: Vec<(f64, f64)>,
    pub degenerate: bool,
    pub kappa: f64,
}

impl EnergyDistortionCurve {
    /// A curve from explicit points; they are sorted and pruned to the
    /// Pareto front.
    pub fn from_points(mut points: Vec<(f64, f64)>, kappa: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(SietError::param("points", "curve needs at least one point"));
        }
        if points.iter().any(|(b, d)| !b.is_finite() || !d.is_finite()) {
            return Err(SietError::param("points", "must be finite"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let pruned = pareto(&points);
        Ok(Self {
            degenerate: pruned.len() == 1,
            points: pruned,
            kappa,
        })
    }

    /// Largest amount by which distortion decreases with energy, or energy
    /// fails to increase strictly.
    pub fn monotonicity_violation(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| f64::max(w[0].1 - w[1].1, if w[1].0 > w[0].0 { 0.0 } else { f64::INFINITY }))
            .fold(0.0, f64::max)
    }

    /// Largest excess of a point over the chord of its neighbours.
    pub fn convexity_violation(&self) -> f64 {
        self.points
            .windows(3)
            .map(|w| {
                let t = (w[1].0 - w[0].0) / (w[2].0 - w[0].0);
                w[1].1 - ((1.0 - t) * w[0].1 + t * w[2].1)
            })
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("b,distortion\n");
        for (b, d) in &self.points {
            out.push_str(&format!("{b},{d}\n"));
        }
        out
    }

    fn bbox_diag(&self, other: Option<&Self>) -> f64 {
        let pts = self.points.iter().chain(other.into_iter().flat_map(|o| o.points.iter()));
        let (mut b0, mut b1, mut d0, mut d1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (b, d) in pts {
            b0 = b0.min(*b);
            b1 = b1.max(*b);
            d0 = d0.min(*d);
            d1 = d1.max(*d);
        }
        ((b1 - b0).powi(2) + (d1 - d0).powi(2)).sqrt()
    }
}

/// Keep points no other point dominates (more energy and no more
/// distortion). Input must be sorted by energy.
fn pareto(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut keep = Vec::new();
    let mut best_after = f64::INFINITY;
    for &(b, d) in points.iter().rev() {
        if keep.last().is_some_and(|&(kb, _): &(f64, f64)| kb == b) {
            continue;
        }
        if d < best_after {
            keep.push((b, d));
            best_after = d;
        }
    }
    keep.reverse();
    keep
}

/// Settings for [`energy_distortion_curve`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveOptions {
    pub n_points: usize,
    pub kappa: f64,
    pub solver: SolverOptions,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self {
            n_points: 33,
            kappa: 1.0,
            solver: SolverOptions::default(),
        }
    }
}

/// `pi(beta, d)` under separation: for energies `b` on an even grid between
/// the energy of the most energetic capacity achiever and `max beta`, the
/// channel supports `C_beta(b)` bits per use, i.e. `C_beta(b) / kappa` bits
/// per source symbol, and the source code reaches `D(C_beta(b) / kappa)`.
pub fn energy_distortion_curve(
    src: &SourceModel,
    ch: &DiscreteChannel,
    beta: &(impl RealFunction + Sync + ?Sized),
    opts: &CurveOptions,
) -> Result<EnergyDistortionCurve> {
    if !(opts.kappa > 0.0 && opts.kappa.is_finite()) {
        return Err(SietError::param("kappa", format!("must be positive, got {}", opts.kappa)));
    }
    if opts.n_points < 2 {
        return Err(SietError::param("n_points", "need at least 2 points"));
    }
    let (cmax, _) = unconstrained_capacity(ch, &opts.solver)?;
    let bmax = ch.inputs().iter().map(|&x| beta.eval(x)).fold(f64::NEG_INFINITY, f64::max);
    let bmin = ch.inputs().iter().map(|&x| beta.eval(x)).fold(f64::INFINITY, f64::min);
    let tol = opts.solver.rel_tol_energy * (bmax - bmin).max(f64::MIN_POSITIVE);
    let b_lo = energy_capacity(ch, beta, cmax, &opts.solver)?.energy;
    if b_lo >= bmax - tol {
        // The energy requirement never binds below capacity.
        let d = distortion_rate(src, cmax / opts.kappa)?;
        return EnergyDistortionCurve::from_points(vec![(bmax, d)], opts.kappa);
    }
    let bs: Vec<f64> = (0..opts.n_points)
        .map(|i| b_lo + (bmax - b_lo) * i as f64 / (opts.n_points - 1) as f64)
        .collect();
    let pts: Vec<(f64, f64)> = bs
        .par_iter()
        .map(|&b| {
            let r = capacity_energy(ch, beta, b.min(bmax), &opts.solver)?.rate;
            Ok((b, distortion_rate(src, (r / opts.kappa).max(0.0))?))
        })
        .collect::<Result<_>>()?;
    EnergyDistortionCurve::from_points(pts, opts.kappa)
}

/// `l1` projection of a point onto a curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub point: (f64, f64),
    pub distance: f64,
}

/// Exact `l1` projection onto the piecewise-linear curve through the
/// curve's points. Along a segment the `l1` distance is convex and
/// piecewise linear in the segment parameter, so its minimum sits at an
/// endpoint or where one coordinate matches; ties go to smaller energy.
pub fn l1_project(pt: (f64, f64), curve: &EnergyDistortionCurve) -> Projection {
    let dist = |q: (f64, f64)| (q.0 - pt.0).abs() + (q.1 - pt.1).abs();
    let mut best = Projection {
        point: curve.points[0],
        distance: dist(curve.points[0]),
    };
    let better = |d: f64, best: f64| d < best - 1e-15 * (1.0 + best.abs());
    for w in curve.points.windows(2) {
        let (p0, p1) = (w[0], w[1]);
        let (db, dd) = (p1.0 - p0.0, p1.1 - p0.1);
        let mut ts = vec![0.0, 1.0];
        if db != 0.0 {
            ts.push((pt.0 - p0.0) / db);
        }
        if dd != 0.0 {
            ts.push((pt.1 - p0.1) / dd);
        }
        let mut ts: Vec<f64> = ts.into_iter().map(|t| t.clamp(0.0, 1.0)).collect();
        ts.sort_by(f64::total_cmp);
        for t in ts {
            let q = (p0.0 + t * db, p0.1 + t * dd);
            let d = dist(q);
            if better(d, best.distance) {
                best = Projection { point: q, distance: d };
            }
        }
    }
    best
}

/// Which curve's points are projected onto the other.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionDirection {
    /// Points of the estimated curve onto the true curve.
    #[default]
    EstimatedOntoTrue,
    TrueOntoEstimated,
}

/// `sup` over the points of `from` (a piecewise-linear continuum) of the
/// `l1` distance to `onto`. Segments are densified at 1e-3 of the joint
/// bounding-box diagonal, then refined tenfold around the maximiser.
pub fn curve_distance(from: &EnergyDistortionCurve, onto: &EnergyDistortionCurve) -> f64 {
    let diag = from.bbox_diag(Some(onto));
    let step = if diag > 0.0 { 1e-3 * diag } else { 1.0 };
    let mut best = (l1_project(from.points[0], onto).distance, 0usize, 0.0f64);
    let seg_len = |w: &[(f64, f64)]| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
    let at = |i: usize, t: f64| {
        let (p0, p1) = (from.points[i], from.points[i + 1]);
        (p0.0 + t * (p1.0 - p0.0), p0.1 + t * (p1.1 - p0.1))
    };
    for (i, w) in from.points.windows(2).enumerate() {
        let k = ((seg_len(w) / step).ceil() as usize).max(1);
        for j in 0..=k {
            let t = j as f64 / k as f64;
            let d = l1_project(at(i, t), onto).distance;
            if d > best.0 {
                best = (d, i, t);
            }
        }
    }
    if from.points.len() >= 2 {
        let (_, i, t) = best;
        let k = ((seg_len(&from.points[i..i + 2]) / step).ceil() as usize).max(1);
        let h = 1.0 / k as f64;
        for j in -10i32..=10 {
            let tt = (t + j as f64 * h / 10.0).clamp(0.0, 1.0);
            best.0 = best.0.max(l1_project(at(i, tt), onto).distance);
        }
    }
    best.0
}

/// The end-to-end loss between the curves of the true and estimated
/// (harvester, distortion) pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JsccLoss {
    pub loss: f64,
    pub true_curve: EnergyDistortionCurve,
    pub est_curve: EnergyDistortionCurve,
}

pub fn jscc_loss(
    true_pair: (&(impl RealFunction + Sync + ?Sized), &SourceModel),
    est_pair: (&(impl RealFunction + Sync + ?Sized), &SourceModel),
    ch: &DiscreteChannel,
    opts: &CurveOptions,
    direction: ProjectionDirection,
) -> Result<JsccLoss> {
    let true_curve = energy_distortion_curve(true_pair.1, ch, true_pair.0, opts)?;
    let est_curve = energy_distortion_curve(est_pair.1, ch, est_pair.0, opts)?;
    let loss = match direction {
        ProjectionDirection::EstimatedOntoTrue => curve_distance(&est_curve, &true_curve),
        ProjectionDirection::TrueOntoEstimated => curve_distance(&true_curve, &est_curve),
    };
    Ok(JsccLoss {
        loss,
        true_curve,
        est_curve,
    })
}
