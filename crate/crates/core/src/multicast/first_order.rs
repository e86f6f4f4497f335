//! First-order cross-checks: projected subgradient on the max-min objective
//! and projected gradient on its log-sum-exp smoothing.

use crate::channel::DiscreteChannel;
use crate::error::{Result, SietError};

use super::barrier::dot;

const LN2: f64 = std::f64::consts::LN_2;

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Dykstra's alternating projections onto the simplex intersected with the
/// half-spaces `a_k . p >= b_k`. The result lies on the simplex exactly and
/// violates each half-space by at most `tol` (relative to `|a_k|`).
pub fn project_polytope(v: &[f64], halfspaces: &[(Vec<f64>, f64)], tol: f64, max_cycles: usize) -> Vec<f64> {
    if halfspaces.is_empty() {
        return project_simplex(v);
    }
    let n = v.len();
    let sets = halfspaces.len() + 1;
    let mut x = v.to_vec();
    let mut incr = vec![vec![0.0; n]; sets];
    for _ in 0..max_cycles {
        let start = x.clone();
        for (k, inc) in incr.iter_mut().enumerate() {
            let y: Vec<f64> = x.iter().zip(inc.iter()).map(|(a, b)| a + b).collect();
            let proj = if k == 0 {
                project_simplex(&y)
            } else {
                let (a, b) = &halfspaces[k - 1];
                let gap = b - dot(a, &y);
                let nn = dot(a, a);
                if gap > 0.0 && nn > 0.0 {
                    y.iter().zip(a).map(|(yi, ai)| yi + gap / nn * ai).collect()
                } else {
                    y.clone()
                }
            };
            for i in 0..n {
                inc[i] = y[i] - proj[i];
            }
            x = proj;
        }
        let moved = x.iter().zip(&start).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let worst = halfspaces
            .iter()
            .map(|(a, b)| (b - dot(a, &x)) / dot(a, a).sqrt().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        if moved < tol && worst < tol {
            break;
        }
    }
    // The last projection in each cycle is onto a half-space; finish on the
    // simplex so the output is always a distribution.
    project_simplex(&x)
}

/// Gradient of `I(p)` in bits per input letter.
fn mi_gradient(ch: &DiscreteChannel, p: &[f64]) -> (f64, Vec<f64>) {
    let q: Vec<f64> = ch.output_dist(p).into_iter().map(|v| v.max(1e-300)).collect();
    let d = ch.divergences(&q);
    let i = p.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>().max(0.0) / LN2;
    (i, d.into_iter().map(|v| (v - 1.0) / LN2).collect())
}

fn normalised(g: &[f64]) -> Vec<f64> {
    // Only the component tangent to the simplex matters.
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    let t: Vec<f64> = g.iter().map(|v| v - mean).collect();
    let norm = dot(&t, &t).sqrt();
    if norm > 0.0 {
        t.into_iter().map(|v| v / norm).collect()
    } else {
        t
    }
}

pub(crate) struct FirstOrderSettings {
    pub max_iter: usize,
    pub window: usize,
    pub tol: f64,
    pub feas_tol: f64,
}

/// Projected subgradient ascent on `min_l I_l(p)` over the energy polytope
/// with steps `1/sqrt(t)` along the active node's normalised gradient.
/// Returns the best iterate and its value in bits.
pub(crate) fn subgradient_max_min(
    chans: &[&DiscreteChannel],
    halfspaces: &[(Vec<f64>, f64)],
    set: &FirstOrderSettings,
) -> (Vec<f64>, f64) {
    let n = chans[0].n_inputs();
    let proj = |v: &[f64]| project_polytope(v, halfspaces, set.feas_tol, 10_000);
    let mut p = proj(&vec![1.0 / n as f64; n]);
    let mut best = (p.clone(), f64::NEG_INFINITY);
    let mut history = Vec::with_capacity(set.max_iter);
    for t in 1..=set.max_iter {
        let evals: Vec<(f64, Vec<f64>)> = chans.iter().map(|c| mi_gradient(c, &p)).collect();
        let (active, value) = evals
            .iter()
            .enumerate()
            .map(|(l, e)| (l, e.0))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one node");
        if value > best.1 {
            best = (p.clone(), value);
        }
        history.push(best.1);
        if t > set.window && best.1 - history[t - 1 - set.window] < set.tol {
            break;
        }
        let dir = normalised(&evals[active].1);
        let step = 1.0 / (t as f64).sqrt();
        let cand: Vec<f64> = p.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
        p = proj(&cand);
    }
    best
}

/// Switching subgradient method for `max a . p` subject to `I_l(p) >= r`:
/// step along the most violated rate's gradient when infeasible, along `a`
/// otherwise. Returns the best iterate meeting the rates to `feas_tol`.
pub(crate) fn subgradient_max_energy(
    chans: &[&DiscreteChannel],
    energy: &[f64],
    r_bits: f64,
    set: &FirstOrderSettings,
) -> Result<(Vec<f64>, f64)> {
    let n = energy.len();
    let mut p = vec![1.0 / n as f64; n];
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut history: Vec<f64> = Vec::with_capacity(set.max_iter);
    let a_dir = normalised(energy);
    for t in 1..=set.max_iter {
        let evals: Vec<(f64, Vec<f64>)> = chans.iter().map(|c| mi_gradient(c, &p)).collect();
        let (active, value) = evals
            .iter()
            .enumerate()
            .map(|(l, e)| (l, e.0))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one node");
        let e = dot(energy, &p);
        let feasible = value >= r_bits - set.feas_tol;
        if feasible && best.as_ref().is_none_or(|b| e > b.1) {
            best = Some((p.clone(), e));
        }
        history.push(best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1));
        if t > set.window && history[t - 1] - history[t - 1 - set.window] < set.tol && history[t - 1].is_finite() {
            break;
        }
        let dir = if feasible { a_dir.clone() } else { normalised(&evals[active].1) };
        let step = 1.0 / (t as f64).sqrt();
        let cand: Vec<f64> = p.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
        p = project_simplex(&cand);
    }
    best.ok_or_else(|| SietError::Infeasible(format!("no iterate reached rate {r_bits} bits")))
}

/// Projected gradient ascent on `-T ln sum_l exp(-I_l / T)`, which lies
/// within `T ln L` below `min_l I_l`. Returns the final iterate and its
/// exact max-min value.
pub(crate) fn smoothed_max_min(
    chans: &[&DiscreteChannel],
    halfspaces: &[(Vec<f64>, f64)],
    temperature: f64,
    set: &FirstOrderSettings,
) -> (Vec<f64>, f64) {
    let n = chans[0].n_inputs();
    let proj = |v: &[f64]| project_polytope(v, halfspaces, set.feas_tol, 10_000);
    let smooth = |p: &[f64]| -> (f64, Vec<f64>, f64) {
        let evals: Vec<(f64, Vec<f64>)> = chans.iter().map(|c| mi_gradient(c, p)).collect();
        let lo = evals.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = evals.iter().map(|e| (-(e.0 - lo) / temperature).exp()).collect();
        let z: f64 = w.iter().sum();
        let value = lo - temperature * z.ln();
        let mut grad = vec![0.0; n];
        for (wl, e) in w.iter().zip(&evals) {
            for (g, d) in grad.iter_mut().zip(&e.1) {
                *g += wl / z * d;
            }
        }
        (value, grad, lo)
    };
    let mut p = proj(&vec![1.0 / n as f64; n]);
    let (mut f, mut g, _) = smooth(&p);
    let mut step = 1.0;
    for _ in 0..set.max_iter {
        let mut moved = 0.0;
        let mut accepted = false;
        while step > 1e-12 {
            let cand = proj(&p.iter().zip(&g).map(|(a, b)| a + step * b).collect::<Vec<_>>());
            let diff: Vec<f64> = cand.iter().zip(&p).map(|(a, b)| a - b).collect();
            let (fc, gc, _) = smooth(&cand);
            if fc >= f + dot(&g, &diff) - dot(&diff, &diff) / (2.0 * step) - 1e-15 {
                moved = dot(&diff, &diff).sqrt();
                p = cand;
                f = fc;
                g = gc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || moved < set.tol * 1e-3 {
            break;
        }
        step *= 1.5;
    }
    let (_, _, lo) = smooth(&p);
    (p, lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn simplex_projection_cases() {
        assert_eq!(project_simplex(&[0.2, 0.3, 0.5]), vec![0.2, 0.3, 0.5]);
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_simplex(&[1.0, 1.0]);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn polytope_projection_meets_halfspace() {
        let a = vec![0.0, 0.5, 1.0];
        let p = project_polytope(&[1.0, 0.0, 0.0], &[(a.clone(), 0.6)], 1e-12, 10_000);
        assert!(dot(&a, &p) >= 0.6 - 1e-9);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Closest point: brute force over a fine grid of the simplex.
        let d = |q: &[f64]| (q[0] - 1.0).powi(2) + q[1] * q[1] + q[2] * q[2];
        let mut best = f64::INFINITY;
        for i in 0..=400 {
            for j in 0..=(400 - i) {
                let q = [i as f64 / 400.0, j as f64 / 400.0, (400 - i - j) as f64 / 400.0];
                if dot(&a, &q) >= 0.6 {
                    best = best.min(d(&q));
                }
            }
        }
        assert!(d(&p) <= best + 1e-6, "{} vs {best}", d(&p));
    }

    proptest! {
        #[test]
        fn simplex_projection_is_a_distribution_and_idempotent(v in proptest::collection::vec(-3.0f64..3.0, 1..12)) {
            let p = project_simplex(&v);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|x| *x >= 0.0));
            let again = project_simplex(&p);
            for (a, b) in p.iter().zip(&again) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
