//! Function spaces on `[0, 1]`: the smoothness class, dense-grid functions,
//! regular-design sampling and the bump construction used for lower bounds.

mod bump;
mod membership;
mod sampling;

pub use bump::{bump_function, BumpConstruction};
pub use membership::{membership_check, MembershipReport, MEMBERSHIP_SLACK};
pub use sampling::{ingest_measurements, sample_function, sample_regular, NoiseLaw, SampledFunction};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SietError};

/// Default number of nodes of the shared evaluation grid.
pub const DEFAULT_GRID_SIZE: usize = 2049;

/// The ball of functions on `[0, 1]` whose derivatives of order `0..=lambda`
/// are all bounded by `k_bound` in sup norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessClass {
    lambda: u32,
    k_bound: f64,
}

impl SmoothnessClass {
    pub fn new(lambda: u32, k_bound: f64) -> Result<Self> {
        if lambda < 1 {
            return Err(SietError::param("lambda", "smoothness order must be >= 1"));
        }
        if !(k_bound > 0.0 && k_bound.is_finite()) {
            return Err(SietError::param("k_bound", format!("must be positive and finite, got {k_bound}")));
        }
        Ok(Self { lambda, k_bound })
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    pub fn k_bound(&self) -> f64 {
        self.k_bound
    }

    /// Noiseless reconstruction rate exponent `lambda`.
    pub fn noiseless_rate(&self) -> f64 {
        self.lambda as f64
    }

    /// Noisy-sample loss rate exponent `(lambda + 1) / (2 lambda + 3)`.
    pub fn noisy_rate(&self) -> f64 {
        let l = self.lambda as f64;
        (l + 1.0) / (2.0 * l + 3.0)
    }
}

/// Anything that can be evaluated pointwise on `[0, 1]`.
pub trait RealFunction {
    fn eval(&self, x: f64) -> f64;

    fn eval_many(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

impl<F: Fn(f64) -> f64> RealFunction for F {
    fn eval(&self, x: f64) -> f64 {
        self(x)
    }
}

/// A function on `[0, 1]` stored at the nodes `j / (N - 1)` and evaluated
/// piecewise-linearly in between.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridFunctionRepr", into = "GridFunctionRepr")]
pub struct GridFunction {
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFunctionRepr {
    values: Vec<f64>,
}

impl TryFrom<GridFunctionRepr> for GridFunction {
    type Error = SietError;
    fn try_from(r: GridFunctionRepr) -> Result<Self> {
        GridFunction::new(r.values)
    }
}

impl From<GridFunction> for GridFunctionRepr {
    fn from(g: GridFunction) -> Self {
        GridFunctionRepr { values: g.values }
    }
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(SietError::param("grid_size", format!("need at least 2 nodes, got {}", values.len())));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(SietError::InvalidInput(format!("non-finite value at node {j}")));
        }
        Ok(Self { values })
    }

    /// Tabulates `f` on an `n`-node grid.
    pub fn from_fn(n: usize, f: impl RealFunction) -> Result<Self> {
        if n < 2 {
            return Err(SietError::param("grid_size", format!("need at least 2 nodes, got {n}")));
        }
        let denom = (n - 1) as f64;
        Self::new((0..n).map(|j| f.eval(j as f64 / denom)).collect())
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::from_fn(n, move |_| c)
    }

    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.values.len() - 1) as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 / (self.values.len() - 1) as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let denom = (self.values.len() - 1) as f64;
        (0..self.values.len()).map(move |j| j as f64 / denom)
    }

    /// Piecewise-linear evaluation; `x` is clamped to `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let s = x.clamp(0.0, 1.0) * (n - 1) as f64;
        let j = (s.floor() as usize).min(n - 2);
        let t = s - j as f64;
        if t == 0.0 {
            return self.values[j];
        }
        (1.0 - t) * self.values[j] + t * self.values[j + 1]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two functions on the same grid.
    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if other.grid_size() != self.grid_size() {
            return Err(SietError::InvalidInput(format!(
                "grid sizes differ: {} vs {}",
                self.grid_size(),
                other.grid_size()
            )));
        }
        Self::new(self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Reflects the function about `x = 1/2`.
    pub fn reflect(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self { values }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,value\n");
        for (x, v) in self.nodes().zip(&self.values) {
            out.push_str(&format!("{x},{v}\n"));
        }
        out
    }

    /// Parses the `x,value` CSV emitted by [`GridFunction::to_csv`]. The
    /// abscissae must be the regular nodes `j / (N - 1)`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = sampling::read_xy_csv(text, true)?;
        let n = rows.len();
        if n < 2 {
            return Err(SietError::param("grid_size", format!("need at least 2 rows, got {n}")));
        }
        for (j, &(x, _)) in rows.iter().enumerate() {
            let expected = j as f64 / (n - 1) as f64;
            if (x - expected).abs() > 1e-9 {
                return Err(SietError::Parse {
                    line: j + 2,
                    msg: format!("x = {x} is not the regular node {expected}"),
                });
            }
        }
        Self::new(rows.into_iter().map(|(_, v)| v).collect())
    }
}

impl RealFunction for GridFunction {
    fn eval(&self, x: f64) -> f64 {
        GridFunction::eval(self, x)
    }
}

/// `L_q` norm by trapezoidal quadrature; `q = f64::INFINITY` gives the max of
/// the absolute node values.
pub fn lq_norm(f: &GridFunction, q: f64) -> Result<f64> {
    if q.is_nan() || q < 1.0 {
        return Err(SietError::param("q", format!("norm index must be >= 1, got {q}")));
    }
    let v = f.values();
    if q.is_infinite() {
        return Ok(v.iter().fold(0.0, |m, x| m.max(x.abs())));
    }
    let n = v.len();
    let h = f.step();
    let inner: f64 = v
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            w * x.abs().powf(q)
        })
        .sum();
    Ok((h * inner).powf(1.0 / q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_validation() {
        assert!(SmoothnessClass::new(0, 1.0).is_err());
        assert!(SmoothnessClass::new(1, 0.0).is_err());
        assert!(SmoothnessClass::new(1, f64::NAN).is_err());
        let c = SmoothnessClass::new(1, 2.0).unwrap();
        assert!((c.noisy_rate() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn norms_of_simple_functions() {
        let one = GridFunction::constant(DEFAULT_GRID_SIZE, 1.0).unwrap();
        assert!((lq_norm(&one, 2.0).unwrap() - 1.0).abs() < 1e-12);
        let zero = GridFunction::constant(DEFAULT_GRID_SIZE, 0.0).unwrap();
        assert_eq!(lq_norm(&zero, f64::INFINITY).unwrap(), 0.0);
        let id = GridFunction::from_fn(1001, |x: f64| x).unwrap();
        assert!((lq_norm(&id, 1.0).unwrap() - 0.5).abs() < 1e-6);
        assert!(lq_norm(&id, 0.5).is_err());
    }

    #[test]
    fn grid_eval_is_exact_at_nodes_and_linear_between() {
        let g = GridFunction::from_fn(5, |x: f64| x * x).unwrap();
        for (j, x) in g.nodes().enumerate() {
            assert_eq!(g.eval(x), g.values()[j]);
        }
        let mid = 0.5 * (g.values()[1] + g.values()[2]);
        assert!((g.eval(0.375) - mid).abs() < 1e-15);
        assert_eq!(g.eval(-3.0), 0.0);
        assert_eq!(g.eval(7.0), 1.0);
    }

    #[test]
    fn grid_rejects_bad_values() {
        assert!(GridFunction::new(vec![1.0]).is_err());
        assert!(GridFunction::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn grid_csv_round_trip() {
        let g = GridFunction::from_fn(9, |x: f64| (3.0 * x).sin()).unwrap();
        let back = GridFunction::from_csv(&g.to_csv()).unwrap();
        assert_eq!(g, back);
        assert!(GridFunction::from_csv("x,value\n0,1\n0.3,2\n").is_err());
    }

    #[test]
    fn grid_json_validates() {
        let g: std::result::Result<GridFunction, _> = serde_json::from_str(r#"{"values":[1.0]}"#);
        assert!(g.is_err());
        let g: GridFunction = serde_json::from_str(r#"{"values":[1.0, 2.0]}"#).unwrap();
        assert_eq!(g.grid_size(), 2);
    }
}
