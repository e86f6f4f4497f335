//! Capacity-energy and energy-capacity solvers.
//!
//! The energy requirement is a lower bound `E[f(X)] >= b`, so the Lagrangian
//! tilts the Blahut–Arimoto update towards letters with large `f`: for a
//! multiplier `mu >= 0` the iteration maximises `I(p) + mu E_p[f]`. Every
//! tilted optimum lies on the concave tradeoff curve; the solvers search
//! `mu` for the two tilted optima that bracket the requested energy (or
//! rate) and mix them so the constraint holds exactly.

mod ba;
mod curve;

pub use ba::{tilted_ba, BaRun};
pub use curve::{sweep_curve, sweep_points, CurveKind, CurvePoint, TradeoffCurve};

use serde::{Deserialize, Serialize};

use crate::channel::{DiscreteChannel, InputDistribution};
use crate::error::{Result, SietError};
use crate::funcspace::RealFunction;
use crate::reconstruct::EnvelopePair;

const LN2: f64 = std::f64::consts::LN_2;

/// Tolerances shared by the solvers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Stop Blahut–Arimoto when the upper and lower bounds differ by less
    /// than this many nats.
    pub ba_gap: f64,
    pub max_iter: usize,
    /// Rate tolerance in bits.
    pub tol_rate: f64,
    /// Energy tolerance relative to the range of `f`.
    pub rel_tol_energy: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            ba_gap: 1e-12,
            max_iter: 200_000,
            tol_rate: 1e-6,
            rel_tol_energy: 1e-7,
        }
    }
}

impl SolverOptions {
    /// Options whose Blahut–Arimoto gap matches a capacity tolerance in bits.
    pub fn with_capacity_tol(tol_bits: f64) -> Self {
        Self {
            ba_gap: tol_bits * LN2,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.ba_gap > 0.0) || !(self.tol_rate > 0.0) || !(self.rel_tol_energy > 0.0) || self.max_iter == 0 {
            return Err(SietError::param("tol", "solver tolerances must be positive"));
        }
        Ok(())
    }
}

/// A solution: rate in bits, expected energy and the achieving distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub rate: f64,
    pub energy: f64,
    pub p: InputDistribution,
}

/// `max_p I(X; Y)` in bits with an achieving distribution.
pub fn unconstrained_capacity(ch: &DiscreteChannel, opts: &SolverOptions) -> Result<(f64, InputDistribution)> {
    opts.validate()?;
    let n = ch.n_inputs();
    let run = tilted_ba(ch, &vec![0.0; n], &vec![1.0 / n as f64; n], opts.ba_gap, opts.max_iter);
    let p = InputDistribution::for_channel(ch, run.p)?;
    let rate = ch.mutual_information_nats(p.probs()) / LN2;
    Ok((rate, p))
}

struct Tilted {
    mu: f64,
    p: Vec<f64>,
    rate: f64,
    energy: f64,
}

/// Problem data shared by the two solvers.
struct Instance<'a> {
    ch: &'a DiscreteChannel,
    fx: Vec<f64>,
    fmax: f64,
    range: f64,
    opts: SolverOptions,
}

impl<'a> Instance<'a> {
    fn new(ch: &'a DiscreteChannel, f: &(impl RealFunction + ?Sized), opts: &SolverOptions) -> Result<Self> {
        opts.validate()?;
        let fx: Vec<f64> = ch.inputs().iter().map(|&x| f.eval(x)).collect();
        if fx.iter().any(|v| !v.is_finite()) {
            return Err(SietError::InvalidInput("harvesting function is not finite on the inputs".into()));
        }
        let fmax = fx.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let fmin = fx.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self {
            ch,
            fx,
            fmax,
            range: fmax - fmin,
            opts: *opts,
        })
    }

    fn tol_b(&self) -> f64 {
        self.opts.rel_tol_energy * self.range.max(f64::MIN_POSITIVE)
    }

    fn energy(&self, p: &[f64]) -> f64 {
        p.iter().zip(&self.fx).map(|(a, b)| a * b).sum()
    }

    fn rate(&self, p: &[f64]) -> f64 {
        self.ch.mutual_information_nats(p) / LN2
    }

    fn solve(&self, mu: f64, warm: &[f64]) -> Tilted {
        let n = warm.len();
        // Energies are shifted by their max so the tilt stays bounded.
        let tilt: Vec<f64> = self.fx.iter().map(|v| mu * (v - self.fmax)).collect();
        let p0: Vec<f64> = warm.iter().map(|v| 0.5 * v + 0.5 / n as f64).collect();
        let run = tilted_ba(self.ch, &tilt, &p0, self.opts.ba_gap, self.opts.max_iter);
        Tilted {
            mu,
            rate: self.rate(&run.p),
            energy: self.energy(&run.p),
            p: run.p,
        }
    }

    fn point(&self, p: Vec<f64>) -> Result<OperatingPoint> {
        let p = InputDistribution::for_channel(self.ch, p)?;
        Ok(OperatingPoint {
            rate: self.rate(p.probs()),
            energy: self.energy(p.probs()),
            p,
        })
    }

    /// `D(W(.|x) || q_p)` in nats for every input.
    fn divergences_at(&self, p: &[f64]) -> Vec<f64> {
        let q: Vec<f64> = self.ch.output_dist(p).into_iter().map(|v| v.max(f64::MIN_POSITIVE)).collect();
        self.ch.divergences(&q)
    }

    /// Upper bound on `C(b)` in nats from weak duality: for every `p` and
    /// `mu >= 0`, `C(b) <= max_x [D(W(.|x) || q_p) + mu (f(x) - b)]`;
    /// minimised over `mu` in `[mu_lo, mu_hi]`.
    fn rate_bound(&self, p: &[f64], b: f64, mu_lo: f64, mu_hi: f64) -> f64 {
        let d = self.divergences_at(p);
        let g = |mu: f64| {
            d.iter()
                .zip(&self.fx)
                .map(|(di, fi)| di + mu * (fi - b))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        golden_min(g, mu_lo, mu_hi)
    }

    /// Upper bound on `B(r)` (`r` in nats): for every `p` and `mu > 0`,
    /// `B(r) <= (max_x [D(W(.|x) || q_p) + mu f(x)] - r) / mu`.
    fn energy_bound(&self, p: &[f64], r: f64, mu_lo: f64, mu_hi: f64) -> f64 {
        let d = self.divergences_at(p);
        let g = |mu: f64| {
            let top = d
                .iter()
                .zip(&self.fx)
                .map(|(di, fi)| di + mu * (fi - self.fmax))
                .fold(f64::NEG_INFINITY, f64::max);
            (top - r) / mu + self.fmax
        };
        golden_min(g, mu_lo.max(1e-6 * mu_hi), mu_hi)
    }

    /// The mixture of `lo` (rate >= r) and `hi` with the least weight on `lo`
    /// that still meets `r`; `I` is concave along the mixture.
    fn rate_mix(&self, lo: &Tilted, hi: &Tilted, r: f64) -> Vec<f64> {
        if self.rate(&lo.p) < r {
            return lo.p.clone();
        }
        let (mut a, mut c) = (0.0f64, 1.0f64);
        for _ in 0..100 {
            let mid = 0.5 * (a + c);
            if self.rate(&mix(&lo.p, &hi.p, mid)) >= r {
                c = mid;
            } else {
                a = mid;
            }
            if c - a < 1e-15 {
                break;
            }
        }
        mix(&lo.p, &hi.p, c)
    }

    /// Capacity of the sub-channel on `{x : f(x) >= fmax - slack}`, padded
    /// back to the full input set.
    fn top_set_capacity(&self, slack: f64) -> Result<OperatingPoint> {
        let keep: Vec<usize> = (0..self.fx.len()).filter(|&i| self.fx[i] >= self.fmax - slack).collect();
        let sub = self.ch.restrict(&keep)?;
        let (_, ps) = unconstrained_capacity(&sub, &self.opts)?;
        let mut p = vec![0.0; self.fx.len()];
        for (&i, &v) in keep.iter().zip(ps.probs()) {
            p[i] = v;
        }
        self.point(p)
    }

    /// Finds multipliers `lo < hi` with `h(lo) < 0 <= h(hi)` for a
    /// non-decreasing `h`, narrowing by the Illinois rule with bisection
    /// safeguards until `|h| <= tol_h` at one end, `certified(lo, hi)` holds
    /// or the bracket collapses.
    fn bracket(
        &self,
        mut lo: Tilted,
        mut hi: Tilted,
        h: impl Fn(&Tilted) -> f64,
        tol_h: f64,
        certified: impl Fn(&Tilted, &Tilted) -> bool,
    ) -> (Tilted, Tilted) {
        let (mut h_lo, mut h_hi) = (h(&lo), h(&hi));
        let (mut raw_lo, mut raw_hi) = (h_lo, h_hi);
        let mut side = 0i8;
        let mut stalls = 0;
        for _ in 0..200 {
            if raw_hi <= tol_h || -raw_lo <= tol_h || certified(&lo, &hi) {
                break;
            }
            if hi.mu - lo.mu <= 1e-14 * hi.mu.max(1e-300) {
                break;
            }
            let mut mu = if h_hi > h_lo {
                lo.mu - h_lo * (hi.mu - lo.mu) / (h_hi - h_lo)
            } else {
                f64::NAN
            };
            stalls += 1;
            if !(mu > lo.mu && mu < hi.mu) || stalls > 4 {
                mu = 0.5 * (lo.mu + hi.mu);
                stalls = 0;
            }
            let warm = if mu - lo.mu < hi.mu - mu { lo.p.clone() } else { hi.p.clone() };
            let t = self.solve(mu, &warm);
            let ht = h(&t);
            if ht >= 0.0 {
                hi = t;
                h_hi = ht;
                raw_hi = ht;
                if side == 1 {
                    h_lo *= 0.5;
                }
                side = 1;
            } else {
                lo = t;
                h_lo = ht;
                raw_lo = ht;
                if side == -1 {
                    h_hi *= 0.5;
                }
                side = -1;
            }
        }
        (lo, hi)
    }
}

/// Golden-section minimum of `g` on `[a, b]`, never above the endpoint
/// values. Any evaluation is a valid bound, so the search need not be exact.
fn golden_min(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut best = g(a).min(g(b));
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - r * (b - a), a + r * (b - a));
    let (mut g1, mut g2) = (g(x1), g(x2));
    for _ in 0..80 {
        if g1 <= g2 {
            b = x2;
            x2 = x1;
            g2 = g1;
            x1 = b - r * (b - a);
            g1 = g(x1);
        } else {
            a = x1;
            x1 = x2;
            g1 = g2;
            x2 = a + r * (b - a);
            g2 = g(x2);
        }
        best = best.min(g1).min(g2);
    }
    best
}

fn mix(a: &[f64], b: &[f64], alpha: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| alpha * x + (1.0 - alpha) * y).collect()
}

/// `C_f(b) = max { I(X; Y) : E[f(X)] >= b }` in bits.
pub fn capacity_energy(
    ch: &DiscreteChannel,
    f: &(impl RealFunction + ?Sized),
    b: f64,
    opts: &SolverOptions,
) -> Result<OperatingPoint> {
    if !b.is_finite() {
        return Err(SietError::param("b", "energy requirement must be finite"));
    }
    let inst = Instance::new(ch, f, opts)?;
    let tol_b = inst.tol_b();
    if b > inst.fmax + tol_b {
        return Err(SietError::Infeasible(format!(
            "energy requirement {b} exceeds max f = {}",
            inst.fmax
        )));
    }
    let n = ch.n_inputs();
    let uniform = vec![1.0 / n as f64; n];
    let free = inst.solve(0.0, &uniform);
    if b <= free.energy {
        return inst.point(free.p);
    }
    if b >= inst.fmax - tol_b {
        return inst.top_set_capacity(tol_b);
    }
    let mut mu_hi = 1.0 / inst.range.max(f64::MIN_POSITIVE);
    let mut hi = inst.solve(mu_hi, &free.p);
    let mut lo_start = free;
    while hi.energy < b {
        lo_start = hi;
        if mu_hi > 1e12 / inst.range.max(f64::MIN_POSITIVE) {
            // Saturated: only the top letters remain.
            return inst.top_set_capacity(tol_b);
        }
        mu_hi *= 2.0;
        hi = inst.solve(mu_hi, &lo_start.p);
    }
    let tol_nats = 0.1 * opts.tol_rate * LN2;
    let energy_mix = |lo: &Tilted, hi: &Tilted| {
        let alpha = if hi.energy > lo.energy {
            ((hi.energy - b) / (hi.energy - lo.energy)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        mix(&lo.p, &hi.p, alpha)
    };
    // Near a kink or along a linear stretch of the curve the multipliers of
    // the two ends converge slowly; stop as soon as the mixture is certified.
    let (lo, hi) = inst.bracket(lo_start, hi, |t| t.energy - b, 1e-3 * tol_b, |lo, hi| {
        let p = energy_mix(lo, hi);
        inst.rate_bound(&p, b, lo.mu, hi.mu) - inst.ch.mutual_information_nats(&p) <= tol_nats
    });
    inst.point(energy_mix(&lo, &hi))
}

/// `B_f(r) = max { E[f(X)] : I(X; Y) >= r }`.
pub fn energy_capacity(
    ch: &DiscreteChannel,
    f: &(impl RealFunction + ?Sized),
    r: f64,
    opts: &SolverOptions,
) -> Result<OperatingPoint> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(SietError::param("r", format!("rate must be finite and >= 0, got {r}")));
    }
    let inst = Instance::new(ch, f, opts)?;
    let n = ch.n_inputs();
    if r == 0.0 {
        let best = (0..n).find(|&i| inst.fx[i] == inst.fmax).expect("non-empty channel");
        let mut p = vec![0.0; n];
        p[best] = 1.0;
        return inst.point(p);
    }
    let uniform = vec![1.0 / n as f64; n];
    let free = inst.solve(0.0, &uniform);
    let tol_r = opts.tol_rate;
    if r > free.rate + tol_r {
        return Err(SietError::Infeasible(format!(
            "rate {r} exceeds the capacity {}",
            free.rate
        )));
    }
    if inst.range == 0.0 {
        return inst.point(free.p);
    }
    if r >= free.rate - tol_r {
        // Energy-greediest capacity achiever: the vanishing-tilt limit.
        let tiny = inst.solve(1e-9 / inst.range, &free.p);
        let t = if tiny.rate >= r - tol_r { tiny } else { free };
        return inst.point(t.p);
    }
    let top = inst.top_set_capacity(inst.tol_b() * 1e-3)?;
    if top.rate >= r {
        return Ok(top);
    }
    let mut mu_hi = 1.0 / inst.range;
    let mut hi = inst.solve(mu_hi, &free.p);
    let mut lo_start = free;
    while hi.rate >= r {
        mu_hi *= 2.0;
        if mu_hi > 1e12 / inst.range {
            return Err(SietError::Numerical("multiplier search did not bracket the rate".into()));
        }
        lo_start = hi;
        hi = inst.solve(mu_hi, &lo_start.p);
    }
    let tol_e = 0.1 * inst.tol_b();
    let (lo, hi) = inst.bracket(lo_start, hi, |t| r - t.rate, 1e-3 * tol_r, |lo, hi| {
        let p = inst.rate_mix(lo, hi, r);
        inst.energy_bound(&p, r * LN2, lo.mu, hi.mu) - inst.energy(&p) <= tol_e
    });
    inst.point(inst.rate_mix(&lo, &hi, r))
}

/// Capacity under the requirement that every admissible harvesting function
/// delivers `b`, evaluated against the envelope's lower side.
pub fn capacity_energy_set(
    ch: &DiscreteChannel,
    env: &EnvelopePair,
    b: f64,
    opts: &SolverOptions,
) -> Result<OperatingPoint> {
    capacity_energy(ch, &env.lower_exact(), b, opts)
}

/// Guaranteed energy at rate `r` for every admissible harvesting function.
pub fn energy_capacity_set(
    ch: &DiscreteChannel,
    env: &EnvelopePair,
    r: f64,
    opts: &SolverOptions,
) -> Result<OperatingPoint> {
    energy_capacity(ch, &env.lower_exact(), r, opts)
}
