use super::{GridFunction, RealFunction, SmoothnessClass};
use crate::error::{Result, SietError};

/// Periodic bump train that vanishes at every regular design point.
///
/// `f(x) = A (m-1)^(-lambda) phi(frac((m-1) x))` with the template
/// `phi(u) = 4^(lambda+1) (u (1-u))^(lambda+1)`, whose first `lambda`
/// derivatives vanish at `u = 0` and `u = 1`, so the train is `C^lambda`.
/// Because `(m-1)^(k-lambda) <= 1` for `k <= lambda`, every derivative of
/// order `k <= lambda` is bounded by `A max|phi^(k)|`, and `A` is chosen to
/// make that at most `K * amplitude_scale`.
#[derive(Clone, Debug)]
pub struct BumpConstruction {
    m: usize,
    lambda: u32,
    amplitude: f64,
    template: Vec<f64>,
    template_integral: f64,
}

impl BumpConstruction {
    pub fn new(m: usize, cls: &SmoothnessClass, amplitude_scale: f64) -> Result<Self> {
        if m < 2 {
            return Err(SietError::param("m", format!("need at least 2 samples, got {m}")));
        }
        if !(amplitude_scale > 0.0 && amplitude_scale <= 1.0) {
            return Err(SietError::param(
                "amplitude_scale",
                format!("must lie in (0, 1], got {amplitude_scale}"),
            ));
        }
        let lambda = cls.lambda();
        let template = template_coefficients(lambda);
        let mut max_deriv: f64 = 0.0;
        let mut poly = template.clone();
        for _ in 0..=lambda {
            max_deriv = max_deriv.max(max_abs_on_unit(&poly));
            poly = derivative(&poly);
        }
        let amplitude = cls.k_bound() * amplitude_scale / max_deriv;
        let template_integral = template.iter().enumerate().map(|(k, c)| c / (k + 1) as f64).sum();
        Ok(Self {
            m,
            lambda,
            amplitude,
            template,
            template_integral,
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// The constant `c'` with `||f||_1 = c' (m-1)^(-lambda) >= c' m^(-lambda)`.
    pub fn l1_constant(&self) -> f64 {
        self.amplitude * self.template_integral
    }

    /// Exact `||f||_1`.
    pub fn l1_norm(&self) -> f64 {
        self.l1_constant() * ((self.m - 1) as f64).powi(-(self.lambda as i32))
    }

    /// Exact `||f||_inf`, attained at the cell midpoints.
    pub fn sup_norm(&self) -> f64 {
        self.amplitude * ((self.m - 1) as f64).powi(-(self.lambda as i32))
    }

    pub fn to_grid(&self, n: usize) -> Result<GridFunction> {
        GridFunction::from_fn(n, |x| self.eval(x))
    }
}

impl RealFunction for BumpConstruction {
    fn eval(&self, x: f64) -> f64 {
        let cells = (self.m - 1) as f64;
        let s = x.clamp(0.0, 1.0) * cells;
        let u = s - s.floor();
        self.amplitude * cells.powi(-(self.lambda as i32)) * horner(&self.template, u)
    }
}

/// The bump train on the default grid, with its `c'` constant.
pub fn bump_function(m: usize, cls: &SmoothnessClass, amplitude_scale: f64) -> Result<(GridFunction, f64)> {
    let b = BumpConstruction::new(m, cls, amplitude_scale)?;
    Ok((b.to_grid(super::DEFAULT_GRID_SIZE)?, b.l1_constant()))
}

/// Coefficients (ascending powers) of `4^p (u - u^2)^p`, `p = lambda + 1`.
fn template_coefficients(lambda: u32) -> Vec<f64> {
    let p = (lambda + 1) as usize;
    let mut coeffs = vec![0.0; 2 * p + 1];
    let mut binom = 1.0;
    let scale = 4f64.powi(p as i32);
    for k in 0..=p {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        coeffs[p + k] = scale * sign * binom;
        binom = binom * (p - k) as f64 / (k + 1) as f64;
    }
    coeffs
}

fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, v)| k as f64 * v).collect()
}

fn horner(c: &[f64], u: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * u + v)
}

fn max_abs_on_unit(c: &[f64]) -> f64 {
    const N: usize = 20_000;
    let m = (0..=N).map(|i| horner(c, i as f64 / N as f64).abs()).fold(0.0, f64::max);
    // Guard against missing the true maximum between probe points.
    m * (1.0 + 1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{lq_norm, membership_check};

    #[test]
    fn template_is_normalised() {
        for lambda in 1..=4 {
            let c = template_coefficients(lambda);
            assert!((horner(&c, 0.5) - 1.0).abs() < 1e-12);
            assert_eq!(horner(&c, 0.0), 0.0);
            assert!(horner(&c, 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn vanishes_on_the_design() {
        for lambda in 1..=3 {
            let cls = SmoothnessClass::new(lambda, 1.0).unwrap();
            for m in [2, 5, 9, 17, 100, 129] {
                let b = BumpConstruction::new(m, &cls, 1.0).unwrap();
                let worst = (0..m)
                    .map(|i| b.eval(i as f64 / (m - 1) as f64).abs())
                    .fold(0.0, f64::max);
                assert!(worst <= 1e-12, "lambda={lambda} m={m}: {worst}");
            }
        }
    }

    #[test]
    fn nonnegative_everywhere() {
        let cls = SmoothnessClass::new(2, 3.0).unwrap();
        let (g, c) = bump_function(33, &cls, 0.5).unwrap();
        assert!(g.min() >= -1e-12);
        assert!(c > 0.0);
    }

    #[test]
    fn l1_norm_decays_like_m_to_minus_lambda() {
        let cls = SmoothnessClass::new(1, 1.0).unwrap();
        let ms = [17usize, 33, 65, 129];
        let pts: Vec<(f64, f64)> = ms
            .iter()
            .map(|&m| {
                let (g, _) = bump_function(m, &cls, 1.0).unwrap();
                ((m as f64).ln(), lq_norm(&g, 1.0).unwrap().ln())
            })
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        assert!((slope + 1.0).abs() <= 0.1, "slope {slope}");
    }

    #[test]
    fn quadrature_agrees_with_exact_l1() {
        let cls = SmoothnessClass::new(2, 1.0).unwrap();
        let b = BumpConstruction::new(9, &cls, 1.0).unwrap();
        let g = b.to_grid(8193).unwrap();
        let q = lq_norm(&g, 1.0).unwrap();
        assert!((q - b.l1_norm()).abs() < 1e-6 * b.l1_norm().max(1e-12));
        assert!(b.l1_norm() >= b.l1_constant() * 9f64.powi(-2));
    }

    #[test]
    fn bump_is_in_the_class() {
        for lambda in 1..=3 {
            let cls = SmoothnessClass::new(lambda, 1.0).unwrap();
            for m in [9, 17, 33] {
                let (g, _) = bump_function(m, &cls, 1.0).unwrap();
                let report = membership_check(&g, &cls).unwrap();
                assert!(report.member, "lambda={lambda} m={m}: {report:?}");
            }
        }
    }

    #[test]
    fn rejects_bad_scale() {
        let cls = SmoothnessClass::new(1, 1.0).unwrap();
        assert!(BumpConstruction::new(9, &cls, 0.0).is_err());
        assert!(BumpConstruction::new(9, &cls, 1.5).is_err());
        assert!(BumpConstruction::new(1, &cls, 1.0).is_err());
    }
}
