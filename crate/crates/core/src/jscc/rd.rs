//! Rate-distortion via Blahut–Arimoto with slope bisection.

use serde::{Deserialize, Serialize};

use super::SourceModel;
use crate::error::{Result, SietError};

const LN2: f64 = std::f64::consts::LN_2;
const GAP_TOL: f64 = 1e-12;
const MAX_ITER: usize = 50_000;

/// A point on the rate-distortion curve with its test channel
/// `Q(s_hat | s)`, row-major `|S| x |S_hat|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    /// Bits.
    pub rate: f64,
    pub distortion: f64,
    pub kernel: Vec<f64>,
}

pub(crate) struct Kernel {
    q: Vec<f64>,
    rate: f64,
    dist: f64,
}

pub(crate) struct RdSolver<'a> {
    src: &'a SourceModel,
    row_min: Vec<f64>,
    pub d_min: f64,
    pub d_max: f64,
    best_letter: usize,
    scale: f64,
}

impl<'a> RdSolver<'a> {
    pub fn new(src: &'a SourceModel) -> Self {
        let (ns, nr) = (src.n_source(), src.n_repro());
        let row_min: Vec<f64> = (0..ns)
            .map(|s| src.row(s).iter().copied().fold(f64::INFINITY, f64::min))
            .collect();
        let d_min = src.pmf().iter().zip(&row_min).map(|(p, d)| p * d).sum();
        let col_mean: Vec<f64> = (0..nr)
            .map(|j| (0..ns).map(|s| src.pmf()[s] * src.row(s)[j]).sum())
            .collect();
        let (best_letter, d_max) = col_mean
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty reproduction alphabet");
        let dmax_all = src.distortion().iter().copied().fold(0.0, f64::max);
        Self {
            src,
            row_min,
            d_min,
            d_max,
            best_letter,
            scale: dmax_all.max(f64::MIN_POSITIVE),
        }
    }

    fn measure(&self, q: Vec<f64>) -> Kernel {
        let (ns, nr) = (self.src.n_source(), self.src.n_repro());
        let p = self.src.pmf();
        let mut r = vec![0.0; nr];
        for s in 0..ns {
            for j in 0..nr {
                r[j] += p[s] * q[s * nr + j];
            }
        }
        let mut rate = 0.0;
        let mut dist = 0.0;
        for s in 0..ns {
            let row = self.src.row(s);
            for j in 0..nr {
                let v = q[s * nr + j];
                if v > 0.0 {
                    rate += p[s] * v * (v / r[j]).ln();
                    dist += p[s] * v * row[j];
                }
            }
        }
        Kernel {
            q,
            rate: rate.max(0.0),
            dist,
        }
    }

    /// Alternating minimisation for fixed weights `e(s, s_hat)`.
    fn iterate(&self, e: &[f64], r0: &[f64]) -> Kernel {
        let (ns, nr) = (self.src.n_source(), self.src.n_repro());
        let p = self.src.pmf();
        let mut r = r0.to_vec();
        let mut z = vec![0.0; ns];
        for _ in 0..MAX_ITER {
            for s in 0..ns {
                z[s] = (0..nr).map(|j| r[j] * e[s * nr + j]).sum();
            }
            let mut c = vec![0.0; nr];
            for s in 0..ns {
                if z[s] > 0.0 {
                    let w = p[s] / z[s];
                    for j in 0..nr {
                        c[j] += w * e[s * nr + j];
                    }
                }
            }
            let gap = c.iter().map(|v| v.ln()).fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for j in 0..nr {
                r[j] *= c[j];
                total += r[j];
            }
            for v in &mut r {
                *v /= total;
            }
            if gap < GAP_TOL {
                break;
            }
        }
        let mut q = vec![0.0; ns * nr];
        for s in 0..ns {
            let zs: f64 = (0..nr).map(|j| r[j] * e[s * nr + j]).sum();
            for j in 0..nr {
                q[s * nr + j] = if zs > 0.0 { r[j] * e[s * nr + j] / zs } else { 0.0 };
            }
        }
        self.measure(q)
    }

    fn uniform(&self) -> Vec<f64> {
        let nr = self.src.n_repro();
        vec![1.0 / nr as f64; nr]
    }

    /// Optimum of `I + beta E[d]` (`beta` in nats per unit distortion).
    pub fn at_slope(&self, beta: f64, r0: &[f64]) -> Kernel {
        let (ns, nr) = (self.src.n_source(), self.src.n_repro());
        let mut e = vec![0.0; ns * nr];
        for s in 0..ns {
            let row = self.src.row(s);
            for j in 0..nr {
                e[s * nr + j] = (-beta * (row[j] - self.row_min[s])).exp();
            }
        }
        self.iterate(&e, r0)
    }

    /// The zero-slack limit: kernels supported on each row's minimisers.
    pub fn at_min_distortion(&self) -> Kernel {
        let (ns, nr) = (self.src.n_source(), self.src.n_repro());
        let tie = 1e-12 * self.scale;
        let mut e = vec![0.0; ns * nr];
        for s in 0..ns {
            let row = self.src.row(s);
            for j in 0..nr {
                if row[j] <= self.row_min[s] + tie {
                    e[s * nr + j] = 1.0;
                }
            }
        }
        self.iterate(&e, &self.uniform())
    }

    pub fn constant(&self) -> Kernel {
        let (ns, nr) = (self.src.n_source(), self.src.n_repro());
        let mut q = vec![0.0; ns * nr];
        for s in 0..ns {
            q[s * nr + self.best_letter] = 1.0;
        }
        self.measure(q)
    }

    fn r_of(&self, k: &Kernel) -> Vec<f64> {
        let (ns, nr) = (self.src.n_source(), self.src.n_repro());
        let mut r = vec![1e-300; nr];
        for s in 0..ns {
            for j in 0..nr {
                r[j] += self.src.pmf()[s] * k.q[s * nr + j];
            }
        }
        r
    }

    fn mix(&self, a: &Kernel, b: &Kernel, t: f64) -> Kernel {
        self.measure(a.q.iter().zip(&b.q).map(|(x, y)| t * x + (1.0 - t) * y).collect())
    }

    /// Bracket the slope so `lo` has distortion above `target` and `hi`
    /// below, by the predicate `above(k)`.
    fn bracket(&self, above: impl Fn(&Kernel) -> bool) -> Result<(Kernel, Kernel)> {
        let mut beta_hi = 1.0 / self.scale;
        let mut lo = self.constant();
        let mut hi = self.at_slope(beta_hi, &self.uniform());
        let mut guard = 0;
        while above(&hi) {
            lo = hi;
            beta_hi *= 2.0;
            guard += 1;
            if guard > 80 {
                return Err(SietError::Numerical("rate-distortion slope search diverged".into()));
            }
            hi = self.at_slope(beta_hi, &self.r_of(&lo));
        }
        let mut beta_lo = beta_hi / 2.0;
        if guard == 0 {
            beta_lo = 0.0;
        }
        for _ in 0..200 {
            if beta_hi - beta_lo <= 1e-13 * beta_hi {
                break;
            }
            let mid = 0.5 * (beta_lo + beta_hi);
            let k = self.at_slope(mid, &self.r_of(&hi));
            if above(&k) {
                beta_lo = mid;
                lo = k;
            } else {
                beta_hi = mid;
                hi = k;
            }
            if (lo.dist - hi.dist).abs() <= 1e-13 * self.scale {
                break;
            }
        }
        Ok((lo, hi))
    }
}

fn point(k: Kernel) -> RdPoint {
    RdPoint {
        rate: k.rate / LN2,
        distortion: k.dist,
        kernel: k.q,
    }
}

/// `R(D) = min { I(S; S_hat) : E d(S, S_hat) <= D }` in bits.
pub fn rate_distortion(src: &SourceModel, dd: f64, tol: f64) -> Result<RdPoint> {
    if !(dd >= 0.0 && dd.is_finite()) {
        return Err(SietError::param("dd", format!("distortion must be finite and >= 0, got {dd}")));
    }
    if !(tol > 0.0) {
        return Err(SietError::param("tol", "must be positive"));
    }
    let sol = RdSolver::new(src);
    if dd >= sol.d_max {
        return Ok(point(sol.constant()));
    }
    if dd < sol.d_min - tol {
        return Err(SietError::Infeasible(format!(
            "distortion {dd} is below the minimum {}",
            sol.d_min
        )));
    }
    if dd <= sol.d_min + 1e-12 * sol.scale {
        return Ok(point(sol.at_min_distortion()));
    }
    let (lo, hi) = sol.bracket(|k| k.dist > dd)?;
    // Mixing the bracketing test channels hits `dd` exactly; rate is convex
    // along the mixture so this is an upper bound that is tight on linear
    // stretches of R(D) and within the bracket width elsewhere.
    let t = if lo.dist > hi.dist {
        ((dd - hi.dist) / (lo.dist - hi.dist)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(point(sol.mix(&lo, &hi, t)))
}

/// `D(R) = min { E d : I(S; S_hat) <= R }` for `r` in bits.
pub fn distortion_rate(src: &SourceModel, r: f64) -> Result<f64> {
    Ok(distortion_rate_point(src, r)?.distortion)
}

pub fn distortion_rate_point(src: &SourceModel, r: f64) -> Result<RdPoint> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(SietError::param("r", format!("rate must be finite and >= 0, got {r}")));
    }
    let sol = RdSolver::new(src);
    if r == 0.0 {
        return Ok(point(sol.constant()));
    }
    let floor = sol.at_min_distortion();
    if r * LN2 >= floor.rate {
        return Ok(point(floor));
    }
    let r_nats = r * LN2;
    let (lo, hi) = sol.bracket(|k| k.rate < r_nats)?;
    if hi.rate <= r_nats {
        return Ok(point(hi));
    }
    // Rate is convex along the mixture from `lo` (below r) to `hi` (above):
    // the admissible weights on `hi` form an interval [0, t*].
    let (mut a, mut c) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (a + c);
        if sol.mix(&hi, &lo, mid).rate <= r_nats {
            a = mid;
        } else {
            c = mid;
        }
        if c - a < 1e-15 {
            break;
        }
    }
    Ok(point(sol.mix(&hi, &lo, a)))
}

/// Minimum and zero-rate distortions `(D_min, D_max)`.
pub fn distortion_range(src: &SourceModel) -> (f64, f64) {
    let sol = RdSolver::new(src);
    (sol.d_min, sol.d_max)
}

/// `R(D)` sampled at `n` evenly spaced distortions in `[D_min, D_max]`.
pub fn rd_curve(src: &SourceModel, n: usize, tol: f64) -> Result<Vec<RdPoint>> {
    if n < 2 {
        return Err(SietError::param("n", "need at least 2 points"));
    }
    let (lo, hi) = distortion_range(src);
    (0..n)
        .map(|i| rate_distortion(src, lo + (hi - lo) * i as f64 / (n - 1) as f64, tol))
        .collect()
}
