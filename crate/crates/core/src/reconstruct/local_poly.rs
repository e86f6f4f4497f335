use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SietError};
use crate::funcspace::{GridFunction, RealFunction, SampledFunction, SmoothnessClass};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    #[default]
    Epanechnikov,
    Triangular,
    Boxcar,
}

impl KernelKind {
    /// Kernel weight at `u`, zero outside `[-1, 1]`.
    pub fn weight(self, u: f64) -> f64 {
        let a = u.abs();
        if a > 1.0 {
            return 0.0;
        }
        match self {
            KernelKind::Epanechnikov => 0.75 * (1.0 - u * u),
            KernelKind::Triangular => 1.0 - a,
            KernelKind::Boxcar => 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(default)]
    pub kind: KernelKind,
    #[serde(default = "default_alpha")]
    pub bandwidth_alpha: f64,
}

/// With `alpha = 1` the window is so wide at desk-scale `m` that smoothing
/// bias dominates and the observed MSE rate stalls near `m^-0.5`.
pub const DEFAULT_BANDWIDTH_ALPHA: f64 = 0.5;

fn default_alpha() -> f64 {
    DEFAULT_BANDWIDTH_ALPHA
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            kind: KernelKind::Epanechnikov,
            bandwidth_alpha: DEFAULT_BANDWIDTH_ALPHA,
        }
    }
}

impl KernelSpec {
    /// `h = alpha m^(-1 / (2 lambda + 3))`.
    pub fn bandwidth(&self, m: usize, cls: &SmoothnessClass) -> f64 {
        self.bandwidth_alpha * (m as f64).powf(-1.0 / (2.0 * cls.lambda() as f64 + 3.0))
    }
}

/// Condition number above which the normal equations are regularised.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum FitEvent {
    /// The window held fewer than `lambda + 1` weighted samples; `h` was
    /// doubled until it did.
    Widened { x: f64, bandwidth: f64 },
    /// Ridge term `rho = 1e-8 trace` added to an ill-conditioned system.
    Ridge { x: f64, condition: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub events: Vec<FitEvent>,
}

impl FitDiagnostics {
    pub fn is_clean(&self) -> bool {
        self.events.is_empty()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { events })
    }
}

/// Local polynomial regression of order `lambda` on regular-design samples.
#[derive(Clone, Debug)]
pub struct LocalPoly {
    values: Vec<f64>,
    order: usize,
    bandwidth: f64,
    kernel: KernelKind,
}

impl LocalPoly {
    pub fn new(s: &SampledFunction, cls: &SmoothnessClass, kern: &KernelSpec) -> Result<Self> {
        let order = cls.lambda() as usize;
        if s.m() < 2 * (order + 1) {
            return Err(SietError::InsufficientSamples {
                need: 2 * (order + 1),
                got: s.m(),
            });
        }
        if !(kern.bandwidth_alpha > 0.0 && kern.bandwidth_alpha.is_finite()) {
            return Err(SietError::param(
                "bandwidth_alpha",
                format!("must be positive, got {}", kern.bandwidth_alpha),
            ));
        }
        Ok(Self {
            values: s.values().to_vec(),
            order,
            bandwidth: kern.bandwidth(s.m(), cls),
            kernel: kern.kind,
        })
    }

    /// Fits with an explicit bandwidth and polynomial order.
    pub fn with_bandwidth(values: &[f64], order: usize, bandwidth: f64, kernel: KernelKind) -> Result<Self> {
        if values.len() < order + 1 || values.len() < 2 {
            return Err(SietError::InsufficientSamples {
                need: (order + 1).max(2),
                got: values.len(),
            });
        }
        if !(bandwidth > 0.0) {
            return Err(SietError::param("bandwidth", format!("must be positive, got {bandwidth}")));
        }
        Ok(Self {
            values: values.to_vec(),
            order,
            bandwidth,
            kernel,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Estimate at `x` plus any diagnostic raised on the way.
    pub fn eval_with_events(&self, x: f64) -> (f64, Vec<FitEvent>) {
        let m = self.values.len();
        let denom = (m - 1) as f64;
        let p = self.order + 1;
        let mut events = Vec::new();
        let mut h = self.bandwidth;
        loop {
            // Indices whose abscissa lies strictly inside the kernel support
            // (the endpoints of the support carry zero weight for the
            // tapered kernels, so they are excluded uniformly).
            let lo = (((x - h) * denom).floor().max(-1.0) + 1.0) as usize;
            let hi = (((x + h) * denom).ceil().min(m as f64) as usize).saturating_sub(1);
            let window: Vec<usize> = (lo..=hi.min(m - 1))
                .filter(|&i| {
                    let u = (i as f64 / denom - x) / h;
                    u.abs() < 1.0 && self.kernel.weight(u) > 0.0
                })
                .collect();
            if window.len() < p {
                h *= 2.0;
                events.push(FitEvent::Widened { x, bandwidth: h });
                if h > 64.0 {
                    // Unreachable for m >= order + 1, kept as a guard.
                    return (f64::NAN, events);
                }
                continue;
            }
            let scale = window
                .iter()
                .map(|&i| (i as f64 / denom - x).abs())
                .fold(0.0, f64::max)
                .max(f64::MIN_POSITIVE);
            let mut moments = vec![0.0; 2 * p - 1];
            let mut rhs = vec![0.0; p];
            for &i in &window {
                let d = i as f64 / denom - x;
                let w = self.kernel.weight(d / h);
                let u = d / scale;
                let mut pw = w;
                for (k, mk) in moments.iter_mut().enumerate() {
                    *mk += pw;
                    if k < p {
                        rhs[k] += pw * self.values[i];
                    }
                    pw *= u;
                }
            }
            let mut a = DMatrix::from_fn(p, p, |r, c| moments[r + c]);
            let b = DVector::from_column_slice(&rhs);
            let cond = condition_number(&a);
            if !(cond <= MAX_CONDITION) {
                let rho = 1e-8 * a.trace();
                for d in 0..p {
                    a[(d, d)] += rho;
                }
                events.push(FitEvent::Ridge { x, condition: cond });
            }
            let est = match a.clone().cholesky() {
                Some(ch) => ch.solve(&b)[0],
                None => a.lu().solve(&b).map_or(f64::NAN, |v| v[0]),
            };
            return (est, events);
        }
    }

    pub fn to_grid_with_diagnostics(&self, n: usize) -> Result<(GridFunction, FitDiagnostics)> {
        let denom = (n - 1).max(1) as f64;
        let fits: Vec<(f64, Vec<FitEvent>)> = (0..n)
            .into_par_iter()
            .map(|j| self.eval_with_events(j as f64 / denom))
            .collect();
        let mut events = Vec::new();
        let mut values = Vec::with_capacity(n);
        for (v, ev) in fits {
            values.push(v);
            events.extend(ev);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SietError::Numerical("local polynomial fit produced a non-finite value".into()));
        }
        Ok((GridFunction::new(values)?, FitDiagnostics { events }))
    }
}

impl RealFunction for LocalPoly {
    fn eval(&self, x: f64) -> f64 {
        self.eval_with_events(x).0
    }
}

fn condition_number(a: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(a.clone());
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v.abs());
        hi = hi.max(v.abs());
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Local polynomial estimate on the default dense grid, with diagnostics.
pub fn local_poly_fit_with_diagnostics(
    s: &SampledFunction,
    cls: &SmoothnessClass,
    kern: &KernelSpec,
) -> Result<(GridFunction, FitDiagnostics)> {
    LocalPoly::new(s, cls, kern)?.to_grid_with_diagnostics(crate::funcspace::DEFAULT_GRID_SIZE)
}

pub fn local_poly_fit(s: &SampledFunction, cls: &SmoothnessClass, kern: &KernelSpec) -> Result<GridFunction> {
    local_poly_fit_with_diagnostics(s, cls, kern).map(|(g, _)| g)
}
