//! Log-barrier interior-point method for programs of the form
//!
//! ```text
//! maximise   c . p + c_s s
//! subject to I_l(p) - r_l [- s] > 0      (mutual information, nats)
//!            a_k . p - b_k [- s] > 0
//!            p > 0,  sum p = 1
//! ```
//!
//! where the slack `s` enters only the constraints that ask for it. Both the
//! max-min rate (maximise `s` under `I_l(p) - s > 0`) and the max-energy
//! problems fit this form, and so does the Phase-I feasibility search.

use nalgebra::{DMatrix, DVector};

use crate::channel::DiscreteChannel;
use crate::error::{Result, SietError};

pub(crate) struct RateCon<'a> {
    pub ch: &'a DiscreteChannel,
    pub rhs: f64,
    pub uses_s: bool,
}

pub(crate) struct LinCon {
    pub a: Vec<f64>,
    pub rhs: f64,
    pub uses_s: bool,
}

pub(crate) struct Program<'a> {
    pub n: usize,
    pub rates: Vec<RateCon<'a>>,
    pub lins: Vec<LinCon>,
    pub obj_p: Vec<f64>,
    pub obj_s: f64,
}

/// Outcome of Phase I: a point and the largest uniform slack found.
pub(crate) struct Interior {
    pub p: Vec<f64>,
    pub slack: f64,
}

const MU_GROWTH: f64 = 20.0;
const NEWTON_EPS: f64 = 1e-11;
const MAX_NEWTON: usize = 200;

struct Eval {
    /// Constraint values without the slack term.
    raw: Vec<f64>,
    /// Per-rate-constraint divergences and output distributions.
    div: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
}

impl<'a> Program<'a> {
    fn has_s(&self) -> bool {
        self.obj_s != 0.0 || self.rates.iter().any(|c| c.uses_s) || self.lins.iter().any(|c| c.uses_s)
    }

    fn n_cons(&self) -> usize {
        self.rates.len() + self.lins.len()
    }

    fn evaluate(&self, p: &[f64]) -> Eval {
        let mut raw = Vec::with_capacity(self.n_cons());
        let mut div = Vec::with_capacity(self.rates.len());
        let mut q = Vec::with_capacity(self.rates.len());
        for c in &self.rates {
            let qy = c.ch.output_dist(p);
            let d = c.ch.divergences(&qy);
            let i: f64 = p.iter().zip(&d).map(|(a, b)| a * b).sum();
            raw.push(i - c.rhs);
            div.push(d);
            q.push(qy);
        }
        for c in &self.lins {
            raw.push(dot(&c.a, p) - c.rhs);
        }
        Eval { raw, div, q }
    }

    fn uses_s(&self, i: usize) -> bool {
        if i < self.rates.len() {
            self.rates[i].uses_s
        } else {
            self.lins[i - self.rates.len()].uses_s
        }
    }

    /// Constraint slacks `g_i` at `(p, s)`; `None` outside the domain.
    fn slacks(&self, ev: &Eval, s: f64) -> Option<Vec<f64>> {
        let g: Vec<f64> = (0..self.n_cons())
            .map(|i| if self.uses_s(i) { ev.raw[i] - s } else { ev.raw[i] })
            .collect();
        g.iter().all(|v| *v > 0.0 && v.is_finite()).then_some(g)
    }

    fn barrier(&self, p: &[f64], s: f64, tau: f64) -> Option<f64> {
        if p.iter().any(|v| !(*v > 0.0)) {
            return None;
        }
        let ev = self.evaluate(p);
        let g = self.slacks(&ev, s)?;
        let obj = dot(&self.obj_p, p) + self.obj_s * s;
        Some(-tau * obj - g.iter().map(|v| v.ln()).sum::<f64>() - p.iter().map(|v| v.ln()).sum::<f64>())
    }

    /// Newton direction for the centring problem at `tau`; returns the step
    /// and the squared Newton decrement.
    fn newton_step(&self, p: &[f64], s: f64, tau: f64) -> Result<(Vec<f64>, f64, f64)> {
        let n = self.n;
        let has_s = self.has_s();
        let d = n + has_s as usize;
        let ev = self.evaluate(p);
        let g = self
            .slacks(&ev, s)
            .ok_or_else(|| SietError::Numerical("barrier iterate left the domain".into()))?;
        let mut h = DMatrix::<f64>::zeros(d, d);
        let mut grad = DVector::<f64>::zeros(d);
        for x in 0..n {
            grad[x] = -tau * self.obj_p[x] - 1.0 / p[x];
            h[(x, x)] += 1.0 / (p[x] * p[x]);
        }
        if has_s {
            grad[n] = -tau * self.obj_s;
        }
        let mut cg = DVector::<f64>::zeros(d);
        for (i, gi) in g.iter().enumerate() {
            cg.fill(0.0);
            if i < self.rates.len() {
                for x in 0..n {
                    cg[x] = ev.div[i][x] - 1.0;
                }
                // -Hess(I) = W diag(1/q) W^T, positive semidefinite.
                let ch = self.rates[i].ch;
                let qy = &ev.q[i];
                let cols: Vec<usize> = (0..qy.len()).filter(|&y| qy[y] > 0.0).collect();
                let mut m = DMatrix::<f64>::zeros(n, cols.len());
                for x in 0..n {
                    let row = ch.row(x);
                    for (k, &y) in cols.iter().enumerate() {
                        m[(x, k)] = row[y] / qy[y].sqrt();
                    }
                }
                let whw = &m * m.transpose();
                for a in 0..n {
                    for b in 0..n {
                        h[(a, b)] += whw[(a, b)] / gi;
                    }
                }
            } else {
                let c = &self.lins[i - self.rates.len()];
                for x in 0..n {
                    cg[x] = c.a[x];
                }
            }
            if self.uses_s(i) {
                cg[n] = -1.0;
            }
            grad -= &cg / *gi;
            h.ger(1.0 / (gi * gi), &cg, &cg, 1.0);
        }
        // Equality-constrained Newton system with symmetric diagonal scaling.
        let scale: Vec<f64> = (0..d).map(|i| 1.0 / h[(i, i)].max(f64::MIN_POSITIVE).sqrt()).collect();
        let mut kkt = DMatrix::<f64>::zeros(d + 1, d + 1);
        let mut rhs = DVector::<f64>::zeros(d + 1);
        for i in 0..d {
            for j in 0..d {
                kkt[(i, j)] = h[(i, j)] * scale[i] * scale[j];
            }
            rhs[i] = -grad[i] * scale[i];
        }
        for x in 0..n {
            kkt[(x, d)] = scale[x];
            kkt[(d, x)] = scale[x];
        }
        let sol = kkt
            .lu()
            .solve(&rhs)
            .filter(|v| v.iter().all(|t| t.is_finite()))
            .ok_or_else(|| SietError::Numerical("singular Newton system".into()))?;
        let dz: Vec<f64> = (0..d).map(|i| sol[i] * scale[i]).collect();
        let dec: f64 = -(0..d).map(|i| grad[i] * dz[i]).sum::<f64>();
        let ds = if has_s { dz[n] } else { 0.0 };
        Ok((dz[..n].to_vec(), ds, dec))
    }

    /// Minimise the barrier at fixed `tau` from a strictly feasible point.
    fn centre(&self, p: &mut Vec<f64>, s: &mut f64, tau: f64, stop: &dyn Fn(&[f64], f64) -> bool) -> Result<bool> {
        let n = self.n;
        for _ in 0..MAX_NEWTON {
            if stop(p, *s) {
                return Ok(true);
            }
            let (dp, ds, dec) = self.newton_step(p, *s, tau)?;
            if !(dec >= 0.0) || dec / 2.0 <= NEWTON_EPS {
                break;
            }
            let f0 = self.barrier(p, *s, tau).expect("iterate is feasible");
            let mut alpha = 1.0;
            // Largest step keeping p positive, then backtrack on the barrier.
            for x in 0..n {
                if dp[x] < 0.0 {
                    alpha = f64::min(alpha, -0.99 * p[x] / dp[x]);
                }
            }
            let mut accepted = false;
            while alpha > 1e-14 {
                let mut cand: Vec<f64> = (0..n).map(|x| p[x] + alpha * dp[x]).collect();
                // Renormalise before testing so the accepted point is the one checked.
                let total: f64 = cand.iter().sum();
                cand.iter_mut().for_each(|v| *v /= total);
                let sc = *s + alpha * ds;
                if let Some(f1) = self.barrier(&cand, sc, tau) {
                    if f1 <= f0 - 0.25 * alpha * dec + 1e-13 * f0.abs() {
                        *p = cand;
                        *s = sc;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Ok(stop(p, *s))
    }

    /// Run the barrier method from a strictly feasible `(p, s)`. `gap` is
    /// the target suboptimality in objective units. `stop` ends the run
    /// early (used by Phase I once the slack turns positive).
    fn run(&self, p: &mut Vec<f64>, s: &mut f64, gap: f64, stop: &dyn Fn(&[f64], f64) -> bool) -> Result<bool> {
        let m = (self.n + self.n_cons()) as f64;
        let mut tau = 1.0;
        loop {
            if self.centre(p, s, tau, stop)? {
                return Ok(true);
            }
            if m / tau < gap {
                return Ok(false);
            }
            tau *= MU_GROWTH;
        }
    }

    /// Phase I: maximise a slack shared by every constraint.
    pub fn find_interior(&self, gap: f64) -> Result<Interior> {
        let n = self.n;
        let mut p = vec![1.0 / n as f64; n];
        if self.n_cons() == 0 {
            return Ok(Interior { p, slack: f64::INFINITY });
        }
        let phase1 = Program {
            n,
            rates: self
                .rates
                .iter()
                .map(|c| RateCon {
                    ch: c.ch,
                    rhs: c.rhs,
                    uses_s: true,
                })
                .collect(),
            lins: self
                .lins
                .iter()
                .map(|c| LinCon {
                    a: c.a.clone(),
                    rhs: c.rhs,
                    uses_s: true,
                })
                .collect(),
            obj_p: vec![0.0; n],
            obj_s: 1.0,
        };
        let ev = phase1.evaluate(&p);
        let min_raw = ev.raw.iter().copied().fold(f64::INFINITY, f64::min);
        if min_raw > 0.0 {
            return Ok(Interior { p, slack: min_raw });
        }
        let mut s = min_raw - 1.0;
        let margin = |p: &[f64]| phase1.evaluate(p).raw.iter().copied().fold(f64::INFINITY, f64::min);
        let stop = |p: &[f64], _s: f64| margin(p) > 0.0;
        phase1.run(&mut p, &mut s, gap, &stop)?;
        let slack = margin(&p);
        Ok(Interior { p, slack })
    }

    /// Phase II from a strictly feasible `p`.
    pub fn solve_from(&self, mut p: Vec<f64>, gap: f64) -> Result<(Vec<f64>, f64)> {
        let ev = self.evaluate(&p);
        let mut s = 0.0;
        if self.has_s() {
            let tight = (0..self.n_cons())
                .filter(|&i| self.uses_s(i))
                .map(|i| ev.raw[i])
                .fold(f64::INFINITY, f64::min);
            s = if tight.is_finite() { tight - 1.0 } else { 0.0 };
        }
        if self.slacks(&ev, s).is_none() {
            return Err(SietError::Numerical("Phase II start is not strictly feasible".into()));
        }
        self.run(&mut p, &mut s, gap, &|_, _| false)?;
        Ok((p, s))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
