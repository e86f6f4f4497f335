use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{capacity_energy, OperatingPoint, SolverOptions};
use crate::channel::{DiscreteChannel, InputDistribution};
use crate::error::{Result, SietError};
use crate::funcspace::RealFunction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    CapacityEnergy,
    EnergyCapacity,
    EnergyDistortion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub b: f64,
    /// Bits; `NaN`-free: infeasible points carry 0.
    pub rate: f64,
    pub feasible: bool,
    pub p: Option<InputDistribution>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    pub kind: CurveKind,
    pub points: Vec<CurvePoint>,
    pub feasible_range: (f64, f64),
}

impl TradeoffCurve {
    fn feasible(&self) -> impl Iterator<Item = &CurvePoint> {
        self.points.iter().filter(|p| p.feasible)
    }

    /// Largest increase of the rate between consecutive feasible points.
    pub fn monotonicity_violation(&self) -> f64 {
        let pts: Vec<&CurvePoint> = self.feasible().collect();
        pts.windows(2).map(|w| w[1].rate - w[0].rate).fold(0.0, f64::max)
    }

    /// Largest shortfall of `r(b_i)` below the mean of its neighbours over
    /// consecutive feasible triples (the curve is swept on an even grid).
    pub fn concavity_violation(&self) -> f64 {
        let pts: Vec<&CurvePoint> = self.feasible().collect();
        pts.windows(3)
            .map(|w| 0.5 * (w[0].rate + w[2].rate) - w[1].rate)
            .fold(0.0, f64::max)
    }

    pub fn is_monotone(&self, tol: f64) -> bool {
        self.monotonicity_violation() <= tol
    }

    pub fn is_midpoint_concave(&self, tol: f64) -> bool {
        self.concavity_violation() <= tol
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("b,rate,feasible\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.b, p.rate, p.feasible));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn to_point(b: f64, r: Result<OperatingPoint>) -> Result<CurvePoint> {
    match r {
        Ok(op) => Ok(CurvePoint {
            b,
            rate: op.rate,
            feasible: true,
            p: Some(op.p),
        }),
        Err(e) if e.is_infeasible() => Ok(CurvePoint {
            b,
            rate: 0.0,
            feasible: false,
            p: None,
        }),
        Err(e) => Err(e),
    }
}

/// `C_f(b)` at each requested `b`, solved independently (in parallel) so the
/// result does not depend on the order of `bs`.
pub fn sweep_points(
    ch: &DiscreteChannel,
    f: &(impl RealFunction + Sync + ?Sized),
    bs: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<CurvePoint>> {
    bs.par_iter()
        .map(|&b| to_point(b, capacity_energy(ch, f, b, opts)))
        .collect()
}

/// Capacity-energy curve on `n_points` even steps of `[0, max f]`.
pub fn sweep_curve(
    ch: &DiscreteChannel,
    f: &(impl RealFunction + Sync + ?Sized),
    n_points: usize,
    opts: &SolverOptions,
) -> Result<TradeoffCurve> {
    if n_points < 3 {
        return Err(SietError::param("n_points", format!("need at least 3, got {n_points}")));
    }
    let fmax = ch.inputs().iter().map(|&x| f.eval(x)).fold(f64::NEG_INFINITY, f64::max);
    let top = fmax.max(0.0);
    let bs: Vec<f64> = (0..n_points).map(|i| top * i as f64 / (n_points - 1) as f64).collect();
    let points = sweep_points(ch, f, &bs, opts)?;
    Ok(TradeoffCurve {
        kind: CurveKind::CapacityEnergy,
        points,
        feasible_range: (0.0, fmax),
    })
}
