//! End-to-end source-channel quantities: rate-distortion with sampled
//! distortion measures, energy-distortion curves under separation and the
//! projection losses between true and estimated curves.

mod counterexample;
mod curve;
mod rd;

pub use counterexample::{counterexample_scenario, hamming_source, CounterexampleConfig, CounterexampleReport};
pub use curve::{
    curve_distance, energy_distortion_curve, jscc_loss, l1_project, CurveOptions, EnergyDistortionCurve, JsccLoss,
    Projection, ProjectionDirection,
};
pub use rd::{distortion_range, distortion_rate, distortion_rate_point, rate_distortion, rd_curve, RdPoint};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SietError};
use crate::funcspace::{sample_regular, GridFunction, RealFunction, SmoothnessClass};
use crate::reconstruct::{local_poly_fit, lower_envelope, spline_interpolate, EnvelopePair, KernelSpec};

/// A discretised source on `[0, 1]` with a distortion measure towards a
/// finite reproduction alphabet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SourceRepr", into = "SourceRepr")]
pub struct SourceModel {
    points: Vec<f64>,
    pmf: Vec<f64>,
    repro: Vec<String>,
    /// Row-major `|S| x |S_hat|`.
    distortion: Vec<f64>,
    /// The columns `d(., s_hat)` as functions, when known.
    columns: Option<Vec<GridFunction>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceRepr {
    points: Vec<f64>,
    pmf: Vec<f64>,
    repro: Vec<String>,
    distortion: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    columns: Option<Vec<GridFunction>>,
}

impl TryFrom<SourceRepr> for SourceModel {
    type Error = SietError;
    fn try_from(r: SourceRepr) -> Result<Self> {
        let mut m = SourceModel::new(r.points, r.pmf, r.repro, r.distortion)?;
        if let Some(cols) = r.columns {
            if cols.len() != m.n_repro() {
                return Err(SietError::param("columns", "one column function per reproduction letter"));
            }
            m.columns = Some(cols);
        }
        Ok(m)
    }
}

impl From<SourceModel> for SourceRepr {
    fn from(m: SourceModel) -> Self {
        let nr = m.repro.len();
        SourceRepr {
            distortion: m.distortion.chunks(nr).map(|c| c.to_vec()).collect(),
            points: m.points,
            pmf: m.pmf,
            repro: m.repro,
            columns: m.columns,
        }
    }
}

impl SourceModel {
    pub fn new(points: Vec<f64>, pmf: Vec<f64>, repro: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let ns = points.len();
        if ns == 0 || repro.is_empty() {
            return Err(SietError::param("source", "need at least one source and one reproduction letter"));
        }
        if pmf.len() != ns || rows.len() != ns {
            return Err(SietError::param("pmf/distortion", format!("need {ns} entries, one per source point")));
        }
        if points.iter().any(|x| !(0.0..=1.0).contains(x)) || points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SietError::param("points", "must be strictly increasing in [0, 1]"));
        }
        if pmf.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(SietError::param("pmf", "entries must be finite and >= 0"));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(SietError::param("pmf", format!("must sum to 1, sums to {total}")));
        }
        let pmf = pmf.into_iter().map(|p| p / total).collect();
        let nr = repro.len();
        if rows.iter().any(|r| r.len() != nr) {
            return Err(SietError::param("distortion", format!("every row needs {nr} entries")));
        }
        let distortion: Vec<f64> = rows.into_iter().flatten().collect();
        if distortion.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(SietError::param("distortion", "entries must be finite and >= 0"));
        }
        Ok(Self {
            points,
            pmf,
            repro,
            distortion,
            columns: None,
        })
    }

    /// Model whose distortion matrix is `columns` evaluated at `points`.
    pub fn from_columns(points: Vec<f64>, pmf: Vec<f64>, repro: Vec<String>, columns: Vec<GridFunction>) -> Result<Self> {
        if columns.len() != repro.len() {
            return Err(SietError::param("columns", "one column function per reproduction letter"));
        }
        let rows = points.iter().map(|&s| columns.iter().map(|c| c.eval(s)).collect()).collect();
        let mut m = Self::new(points, pmf, repro, rows)?;
        m.columns = Some(columns);
        Ok(m)
    }

    /// `n` evenly spaced source points with probabilities proportional to
    /// `density`.
    pub fn discretized(n: usize, density: impl Fn(f64) -> f64, repro: Vec<String>, columns: Vec<GridFunction>) -> Result<Self> {
        if n < 2 {
            return Err(SietError::param("n", "need at least 2 source points"));
        }
        let points: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let w: Vec<f64> = points.iter().map(|&x| density(x)).collect();
        let total: f64 = w.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(SietError::param("density", "must have positive finite mass"));
        }
        Self::from_columns(points, w.into_iter().map(|v| v / total).collect(), repro, columns)
    }

    /// Same source with another distortion matrix given by functions; values
    /// are clamped at zero since distortions are non-negative.
    pub fn with_column_functions(&self, columns: &[&dyn RealFunction]) -> Result<Self> {
        if columns.len() != self.n_repro() {
            return Err(SietError::param("columns", "one column function per reproduction letter"));
        }
        let rows = self
            .points
            .iter()
            .map(|&s| columns.iter().map(|c| c.eval(s).max(0.0)).collect())
            .collect();
        Self::new(self.points.clone(), self.pmf.clone(), self.repro.clone(), rows)
    }

    pub fn n_source(&self) -> usize {
        self.points.len()
    }

    pub fn n_repro(&self) -> usize {
        self.repro.len()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn repro(&self) -> &[String] {
        &self.repro
    }

    pub fn distortion(&self) -> &[f64] {
        &self.distortion
    }

    pub fn row(&self, s: usize) -> &[f64] {
        let nr = self.n_repro();
        &self.distortion[s * nr..(s + 1) * nr]
    }

    pub fn columns(&self) -> Option<&[GridFunction]> {
        self.columns.as_deref()
    }

    /// `H(S)` in bits.
    pub fn entropy(&self) -> f64 {
        -self.pmf.iter().filter(|p| **p > 0.0).map(|p| p * p.log2()).sum::<f64>()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// How the distortion columns are recovered from their samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DistortionEstimate {
    /// Worst case over every admissible column: the upper envelope.
    Envelope,
    /// Spline through noiseless samples.
    Spline,
    /// Local polynomial fit to samples with Gaussian noise `sigma`.
    LocalPoly { sigma: f64, seed: u64, kernel: KernelSpec },
}

/// Sample every distortion column at `m` regular points and rebuild the
/// source model from the reconstruction.
pub fn sampled_distortion(
    src: &SourceModel,
    cls: &SmoothnessClass,
    m: usize,
    est: &DistortionEstimate,
) -> Result<SourceModel> {
    let cols = src
        .columns()
        .ok_or_else(|| SietError::InvalidInput("source model has no column functions to sample".into()))?;
    let mut rebuilt: Vec<Box<dyn RealFunction>> = Vec::with_capacity(cols.len());
    let mut envelopes: Vec<EnvelopePair> = Vec::new();
    for (j, col) in cols.iter().enumerate() {
        match est {
            DistortionEstimate::Envelope => {
                let s = sample_regular(col, m, 0.0, 0)?;
                envelopes.push(lower_envelope(&s, cls)?);
            }
            DistortionEstimate::Spline => {
                let s = sample_regular(col, m, 0.0, 0)?;
                rebuilt.push(Box::new(spline_interpolate(&s, cls)?));
            }
            DistortionEstimate::LocalPoly { sigma, seed, kernel } => {
                let s = sample_regular(col, m, *sigma, seed.wrapping_add(j as u64))?;
                rebuilt.push(Box::new(local_poly_fit(&s, cls, kernel)?));
            }
        }
    }
    if !envelopes.is_empty() {
        let sides: Vec<_> = envelopes.iter().map(|e| e.upper_exact()).collect();
        let refs: Vec<&dyn RealFunction> = sides.iter().map(|s| s as &dyn RealFunction).collect();
        return src.with_column_functions(&refs);
    }
    let refs: Vec<&dyn RealFunction> = rebuilt.iter().map(|b| b.as_ref()).collect();
    src.with_column_functions(&refs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hamming_binary(p1: f64) -> SourceModel {
        SourceModel::new(
            vec![0.0, 1.0],
            vec![1.0 - p1, p1],
            vec!["0".into(), "1".into()],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap()
    }

    fn hb(p: f64) -> f64 {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }

    #[test]
    fn binary_hamming_matches_closed_form() {
        let src = hamming_binary(0.5);
        for dd in [0.05, 0.1, 0.25, 0.4] {
            let pt = rate_distortion(&src, dd, 1e-9).unwrap();
            assert!((pt.rate - (1.0 - hb(dd))).abs() < 1e-6, "dd {dd}: {}", pt.rate);
            assert!((pt.distortion - dd).abs() < 1e-9);
        }
        assert_eq!(rate_distortion(&src, 0.5, 1e-9).unwrap().rate, 0.0);
        let zero = rate_distortion(&src, 0.0, 1e-9).unwrap();
        assert!((zero.rate - 1.0).abs() < 1e-9);
    }

    #[test]
    fn distortion_rate_inverts_rate_distortion() {
        let src = hamming_binary(0.3);
        for r in [0.0, 0.1, 0.4, 0.8, 2.0] {
            let d = distortion_rate(&src, r).unwrap();
            let back = rate_distortion(&src, d, 1e-9).unwrap();
            assert!(back.rate <= r + 1e-5, "r {r}: d {d} back {}", back.rate);
        }
        assert!((distortion_rate(&src, 0.0).unwrap() - 0.3).abs() < 1e-12);
        assert!(distortion_rate(&src, hb(0.3) + 0.01).unwrap().abs() < 1e-12);
    }

    #[test]
    fn below_minimum_distortion_is_infeasible() {
        let src = SourceModel::new(
            vec![0.0, 1.0],
            vec![0.5, 0.5],
            vec!["a".into()],
            vec![vec![0.2], vec![0.4]],
        )
        .unwrap();
        assert!(rate_distortion(&src, 0.1, 1e-9).unwrap_err().is_infeasible());
        assert_eq!(rate_distortion(&src, 0.3, 1e-9).unwrap().rate, 0.0);
    }

    #[test]
    fn json_round_trip() {
        let cols = vec![
            GridFunction::from_fn(65, |x: f64| x * x).unwrap(),
            GridFunction::from_fn(65, |x: f64| (1.0 - x) * (1.0 - x)).unwrap(),
        ];
        let src = SourceModel::discretized(17, |_| 1.0, vec!["lo".into(), "hi".into()], cols).unwrap();
        let back = SourceModel::from_json(&src.to_json().unwrap()).unwrap();
        assert_eq!(back, src);
        assert!(SourceModel::from_json(r#"{"points":[0.0],"pmf":[1.0],"repro":["a"],"distortion":[[-1.0]]}"#).is_err());
    }

    #[test]
    fn envelope_estimate_dominates_truth() {
        let cols = vec![
            GridFunction::from_fn(2049, |x: f64| 0.5 + 0.4 * (2.0 * std::f64::consts::PI * x).sin() / 6.3).unwrap(),
            GridFunction::from_fn(2049, |x: f64| 0.3 * x).unwrap(),
        ];
        let src = SourceModel::discretized(33, |_| 1.0, vec!["a".into(), "b".into()], cols).unwrap();
        let cls = SmoothnessClass::new(1, 1.0).unwrap();
        let est = sampled_distortion(&src, &cls, 9, &DistortionEstimate::Envelope).unwrap();
        for (a, b) in est.distortion().iter().zip(src.distortion()) {
            assert!(*a >= b - 1e-12);
        }
        for r in [0.1, 0.3] {
            assert!(distortion_rate(&est, r).unwrap() >= distortion_rate(&src, r).unwrap() - 1e-9);
        }
    }
}
