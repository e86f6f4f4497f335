//! Brute-force references for the solvers: exhaustive search over a simplex
//! grid, written without touching the crate's own information routines.

#![allow(dead_code)]

use siet::channel::DiscreteChannel;
use siet::jscc::SourceModel;

/// Grid resolution used by the oracles (step 1/500 = 0.002).
pub const STEPS: usize = 500;

fn xlog2x(v: f64) -> f64 {
    if v > 0.0 {
        v * v.log2()
    } else {
        0.0
    }
}

pub fn entropy_bits(q: &[f64]) -> f64 {
    -q.iter().map(|&v| xlog2x(v)).sum::<f64>()
}

/// Channel matrix rows, copied out so the oracle never calls back into
/// the solver code.
pub struct Rows {
    pub w: Vec<Vec<f64>>,
    h_rows: Vec<f64>,
}

impl Rows {
    pub fn of(ch: &DiscreteChannel) -> Self {
        let w: Vec<Vec<f64>> = (0..ch.n_inputs()).map(|i| ch.row(i).to_vec()).collect();
        let h_rows = w.iter().map(|r| entropy_bits(r)).collect();
        Rows { w, h_rows }
    }

    /// `I(X; Y)` in bits, as `H(Y) - H(Y | X)`.
    pub fn mi_bits(&self, p: &[f64]) -> f64 {
        let n_out = self.w[0].len();
        let mut q = vec![0.0; n_out];
        let mut cond = 0.0;
        for (x, &px) in p.iter().enumerate() {
            if px == 0.0 {
                continue;
            }
            cond += px * self.h_rows[x];
            for (qy, wy) in q.iter_mut().zip(&self.w[x]) {
                *qy += px * wy;
            }
        }
        (entropy_bits(&q) - cond).max(0.0)
    }
}

/// Visits every `p` with entries in `{0, 1/steps, ..., 1}` summing to one.
pub fn for_each_simplex_point(n: usize, steps: usize, mut visit: impl FnMut(&[f64])) {
    fn rec(i: usize, left: usize, steps: usize, p: &mut Vec<f64>, visit: &mut dyn FnMut(&[f64])) {
        let n = p.len();
        if i + 1 == n {
            p[i] = left as f64 / steps as f64;
            visit(p);
            return;
        }
        for k in 0..=left {
            p[i] = k as f64 / steps as f64;
            rec(i + 1, left - k, steps, p, visit);
        }
    }
    let mut p = vec![0.0; n];
    rec(0, steps, steps, &mut p, &mut visit);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Grid maxima of `I` subject to `E[f] >= b` and of `E[f]` subject to
/// `I >= r`, from a single pass.
pub fn single_user(ch: &DiscreteChannel, f: &[f64], b: f64, r: f64) -> (f64, f64) {
    let rows = Rows::of(ch);
    let (mut best_i, mut best_e) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for_each_simplex_point(ch.n_inputs(), STEPS, |p| {
        let e = dot(p, f);
        let i = rows.mi_bits(p);
        if e >= b && i > best_i {
            best_i = i;
        }
        if i >= r && e > best_e {
            best_e = e;
        }
    });
    (best_i, best_e)
}

/// Grid maximum of `min_l I_l` subject to `E[f_l] >= b_l` for every node.
pub fn multicast(chans: &[&DiscreteChannel], fs: &[Vec<f64>], bs: &[f64]) -> f64 {
    let rows: Vec<Rows> = chans.iter().map(|c| Rows::of(c)).collect();
    let mut best = f64::NEG_INFINITY;
    for_each_simplex_point(chans[0].n_inputs(), STEPS, |p| {
        if fs.iter().zip(bs).any(|(f, &b)| dot(p, f) < b) {
            return;
        }
        let v = rows.iter().map(|r| r.mi_bits(p)).fold(f64::INFINITY, f64::min);
        best = best.max(v);
    });
    best
}

/// Mutual information in bits of the test channel `kernel` (row-major
/// `|S| x |S_hat|`) under the source pmf.
pub fn kernel_mi_bits(src: &SourceModel, kernel: &[f64]) -> f64 {
    let nr = src.n_repro();
    let mut q = vec![0.0; nr];
    let mut cond = 0.0;
    for (s, &ps) in src.pmf().iter().enumerate() {
        let row = &kernel[s * nr..(s + 1) * nr];
        cond += ps * entropy_bits(row);
        for (qy, w) in q.iter_mut().zip(row) {
            *qy += ps * w;
        }
    }
    (entropy_bits(&q) - cond).max(0.0)
}

pub fn kernel_distortion(src: &SourceModel, kernel: &[f64]) -> f64 {
    let nr = src.n_repro();
    src.pmf()
        .iter()
        .enumerate()
        .map(|(s, &ps)| ps * dot(&kernel[s * nr..(s + 1) * nr], src.row(s)))
        .sum()
}

/// Grid minimum of `I(S; S_hat)` over binary-reproduction test channels
/// with `E d <= dd`. Each source letter's row is `(w, 1 - w)` with `w` on
/// the grid.
pub fn rate_distortion_binary(src: &SourceModel, dd: f64) -> f64 {
    assert_eq!(src.n_repro(), 2);
    let ns = src.n_source();
    let pmf = src.pmf().to_vec();
    let ws: Vec<f64> = (0..=STEPS).map(|k| k as f64 / STEPS as f64).collect();
    // Per-letter conditional entropy and distortion at each grid value.
    let h: Vec<f64> = ws.iter().map(|&w| -(xlog2x(w) + xlog2x(1.0 - w))).collect();
    let d: Vec<Vec<f64>> = (0..ns)
        .map(|s| {
            let row = src.row(s);
            ws.iter().map(|&w| w * row[0] + (1.0 - w) * row[1]).collect()
        })
        .collect();
    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; ns];
    loop {
        let mut dist = 0.0;
        let mut q = 0.0;
        let mut cond = 0.0;
        for s in 0..ns {
            let k = idx[s];
            dist += pmf[s] * d[s][k];
            q += pmf[s] * ws[k];
            cond += pmf[s] * h[k];
        }
        if dist <= dd {
            let i = -(xlog2x(q) + xlog2x(1.0 - q)) - cond;
            best = best.min(i.max(0.0));
        }
        // Odometer increment.
        let mut s = 0;
        loop {
            if s == ns {
                return best;
            }
            idx[s] += 1;
            if idx[s] <= STEPS {
                break;
            }
            idx[s] = 0;
            s += 1;
        }
    }
}
