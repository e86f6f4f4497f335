use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SietError};
use crate::funcspace::{GridFunction, RealFunction, SampledFunction, SmoothnessClass};

/// A B-spline interpolant in the basis of a clamped knot vector.
#[derive(Clone, Debug)]
pub struct Spline {
    degree: usize,
    knots: Vec<f64>,
    coeffs: Vec<f64>,
}

impl Spline {
    /// Interpolates `(xs[i], ys[i])` with a spline of the given degree and
    /// not-a-knot end conditions: for odd degree the interior knots are the
    /// data points minus `(degree + 1) / 2` at each end, for even degree the
    /// midpoints between consecutive data points minus `degree / 2` at each
    /// end. `xs` must be strictly increasing.
    pub fn interpolate(xs: &[f64], ys: &[f64], degree: usize) -> Result<Self> {
        let n = xs.len();
        if ys.len() != n {
            return Err(SietError::InvalidInput(format!("{n} abscissae but {} values", ys.len())));
        }
        if n < degree + 1 {
            return Err(SietError::InsufficientSamples { need: degree + 1, got: n });
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SietError::InvalidInput("abscissae must be strictly increasing".into()));
        }
        let knots = not_a_knot_knots(xs, degree);
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut basis = vec![0.0; degree + 1];
        for (i, &x) in xs.iter().enumerate() {
            let span = find_span(&knots, degree, x);
            basis_funs(&knots, degree, span, x, &mut basis);
            for (r, b) in basis.iter().enumerate() {
                a[(i, span - degree + r)] = *b;
            }
        }
        let coeffs = a
            .lu()
            .solve(&DVector::from_column_slice(ys))
            .ok_or_else(|| SietError::Numerical("singular spline collocation matrix".into()))?;
        Ok(Self {
            degree,
            knots,
            coeffs: coeffs.iter().copied().collect(),
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Evaluates the `order`-th derivative at `x`; `x` is clamped to the
    /// spline's domain.
    pub fn derivative(&self, x: f64, order: usize) -> f64 {
        if order > self.degree {
            return 0.0;
        }
        let k = self.degree;
        let lo = self.knots[0];
        let hi = self.knots[self.knots.len() - 1];
        let x = x.clamp(lo, hi);
        let span = find_span(&self.knots, k, x);
        // de Boor on the local control points, differentiating first.
        let mut d: Vec<f64> = (0..=k).map(|j| self.coeffs[span - k + j]).collect();
        for r in 1..=order {
            for j in (r..=k).rev() {
                let i = span - k + j;
                let denom = self.knots[i + k + 1 - r] - self.knots[i];
                d[j] = if denom > 0.0 { (k + 1 - r) as f64 * (d[j] - d[j - 1]) / denom } else { 0.0 };
            }
        }
        for r in (order + 1)..=k {
            for j in (r..=k).rev() {
                let i = span - k + j;
                let denom = self.knots[i + k + 1 - r] - self.knots[i];
                let alpha = if denom > 0.0 { (x - self.knots[i]) / denom } else { 0.0 };
                d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j];
            }
        }
        d[k]
    }

    pub fn to_grid(&self, n: usize) -> Result<GridFunction> {
        GridFunction::from_fn(n, |x| self.eval(x))
    }
}

impl RealFunction for Spline {
    fn eval(&self, x: f64) -> f64 {
        self.derivative(x, 0)
    }
}

fn not_a_knot_knots(xs: &[f64], k: usize) -> Vec<f64> {
    let n = xs.len();
    let (a, b) = (xs[0], xs[n - 1]);
    let mut t = vec![a; k + 1];
    if k % 2 == 1 {
        let k2 = (k + 1) / 2;
        t.extend_from_slice(&xs[k2..n - k2]);
    } else {
        let k2 = k / 2;
        let mids: Vec<f64> = xs.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        t.extend_from_slice(&mids[k2..mids.len() - k2]);
    }
    t.extend(std::iter::repeat_n(b, k + 1));
    t
}

/// Index `i` with `t[i] <= x < t[i+1]`, using the last non-empty interval at
/// the right end.
fn find_span(t: &[f64], k: usize, x: f64) -> usize {
    let n_basis = t.len() - k - 1;
    if x >= t[n_basis] {
        return n_basis - 1;
    }
    if x <= t[k] {
        return k;
    }
    // first index with t[idx] > x, minus one
    t.partition_point(|&v| v <= x) - 1
}

/// Non-zero basis functions `N_{span-k..=span}` at `x` (Cox–de Boor).
fn basis_funs(t: &[f64], k: usize, span: usize, x: f64, out: &mut [f64]) {
    let mut left = vec![0.0; k + 1];
    let mut right = vec![0.0; k + 1];
    out[0] = 1.0;
    for j in 1..=k {
        left[j] = x - t[span + 1 - j];
        right[j] = t[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
}

/// The degree-`lambda` not-a-knot spline through noiseless samples.
pub fn spline_fit(s: &SampledFunction, cls: &SmoothnessClass) -> Result<Spline> {
    if !s.is_noiseless() {
        return Err(SietError::InvalidInput(
            "spline interpolation needs noiseless samples; use local polynomial regression".into(),
        ));
    }
    let degree = cls.lambda() as usize;
    if s.m() < degree + 1 {
        return Err(SietError::InsufficientSamples { need: degree + 1, got: s.m() });
    }
    Spline::interpolate(s.xs(), s.values(), degree)
}

/// Spline reconstruction tabulated on the default dense grid.
pub fn spline_interpolate(s: &SampledFunction, cls: &SmoothnessClass) -> Result<GridFunction> {
    spline_fit(s, cls)?.to_grid(crate::funcspace::DEFAULT_GRID_SIZE)
}
