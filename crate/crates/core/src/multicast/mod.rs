//! Max-min multicast: one transmitter, `L` receivers with their own channels,
//! harvesting functions and energy requirements, all decoding the same
//! message.
//!
//! The default solver is a log-barrier interior-point method with a Phase-I
//! feasibility search; it reaches ~1e-10 bits, which the loss sweeps need
//! because the losses themselves shrink to ~1e-4. Projected subgradient and
//! a log-sum-exp smoothed ascent are kept as independent cross-checks.

mod barrier;
mod first_order;

pub use first_order::{project_polytope, project_simplex};

use serde::{Deserialize, Serialize};

use crate::channel::{DiscreteChannel, InputDistribution};
use crate::error::{Result, SietError};
use crate::funcspace::{GridFunction, RealFunction};
use barrier::{dot, LinCon, Program, RateCon};
use first_order::FirstOrderSettings;

const LN2: f64 = std::f64::consts::LN_2;

/// Receivers sharing one input grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemRepr", into = "ProblemRepr")]
pub struct MulticastProblem {
    channels: Vec<DiscreteChannel>,
    harvesters: Vec<GridFunction>,
    requirements: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemRepr {
    channels: Vec<DiscreteChannel>,
    harvesters: Vec<GridFunction>,
    requirements: Vec<f64>,
}

impl TryFrom<ProblemRepr> for MulticastProblem {
    type Error = SietError;
    fn try_from(r: ProblemRepr) -> Result<Self> {
        MulticastProblem::new(r.channels, r.harvesters, r.requirements)
    }
}

impl From<MulticastProblem> for ProblemRepr {
    fn from(p: MulticastProblem) -> Self {
        ProblemRepr {
            channels: p.channels,
            harvesters: p.harvesters,
            requirements: p.requirements,
        }
    }
}

impl MulticastProblem {
    pub fn new(channels: Vec<DiscreteChannel>, harvesters: Vec<GridFunction>, requirements: Vec<f64>) -> Result<Self> {
        if channels.is_empty() {
            return Err(SietError::param("channels", "need at least one node"));
        }
        if harvesters.len() != channels.len() || requirements.len() != channels.len() {
            return Err(SietError::param(
                "harvesters/requirements",
                format!(
                    "{} channels but {} harvesters and {} requirements",
                    channels.len(),
                    harvesters.len(),
                    requirements.len()
                ),
            ));
        }
        if channels.iter().any(|c| c.inputs() != channels[0].inputs()) {
            return Err(SietError::param("channels", "all channels must share one input grid"));
        }
        if requirements.iter().any(|b| !b.is_finite()) {
            return Err(SietError::param("requirements", "must be finite"));
        }
        Ok(Self {
            channels,
            harvesters,
            requirements,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn n_nodes(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[DiscreteChannel] {
        &self.channels
    }

    pub fn harvesters(&self) -> &[GridFunction] {
        &self.harvesters
    }

    pub fn requirements(&self) -> &[f64] {
        &self.requirements
    }

    /// Each node's harvesting function evaluated at the shared inputs.
    pub fn energy_table(&self) -> Vec<Vec<f64>> {
        self.harvesters.iter().map(|h| energy_at_inputs(&self.channels[0], h)).collect()
    }

    pub fn with_requirements(&self, requirements: Vec<f64>) -> Result<Self> {
        Self::new(self.channels.clone(), self.harvesters.clone(), requirements)
    }
}

/// `f` evaluated at a channel's input points.
pub fn energy_at_inputs(ch: &DiscreteChannel, f: &(impl RealFunction + ?Sized)) -> Vec<f64> {
    ch.inputs().iter().map(|&x| f.eval(x)).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MulticastMethod {
    #[default]
    Barrier,
    Subgradient,
    Smoothed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MulticastOptions {
    pub method: MulticastMethod,
    /// Barrier: target suboptimality in bits. First-order methods: stop when
    /// the best value gains less than this over `window` iterations.
    pub tol: f64,
    /// Allowed violation of a constraint the problem only meets on its
    /// boundary, in bits or in units of the harvester's magnitude.
    pub feas_tol: f64,
    pub max_iter: usize,
    pub window: usize,
    /// Smoothing temperature in bits.
    pub temperature: f64,
}

impl Default for MulticastOptions {
    fn default() -> Self {
        Self {
            method: MulticastMethod::Barrier,
            tol: 1e-10,
            feas_tol: 1e-9,
            max_iter: 100_000,
            window: 100,
            temperature: 1e-3,
        }
    }
}

impl MulticastOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.feas_tol > 0.0 && self.temperature > 0.0) || self.max_iter == 0 || self.window == 0 {
            return Err(SietError::param("multicast options", "tolerances and iteration limits must be positive"));
        }
        Ok(())
    }

    fn first_order(&self) -> FirstOrderSettings {
        FirstOrderSettings {
            max_iter: self.max_iter,
            window: self.window,
            tol: self.tol,
            feas_tol: self.feas_tol,
        }
    }
}

/// A multicast operating point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MulticastSolution {
    /// `min_l I(X; Y_l)` in bits.
    pub rate: f64,
    pub rates: Vec<f64>,
    pub energies: Vec<f64>,
    pub p: InputDistribution,
}

fn solution(chans: &[DiscreteChannel], energies: &[Vec<f64>], p: Vec<f64>) -> Result<MulticastSolution> {
    let p = InputDistribution::for_channel(&chans[0], p)?;
    let rates: Vec<f64> = chans.iter().map(|c| c.mutual_information_nats(p.probs()) / LN2).collect();
    let rate = rates.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(MulticastSolution {
        rate,
        rates,
        energies: energies.iter().map(|a| dot(a, p.probs())).collect(),
        p,
    })
}

fn check_tables(chans: &[DiscreteChannel], energies: &[Vec<f64>]) -> Result<()> {
    if chans.is_empty() {
        return Err(SietError::param("channels", "need at least one node"));
    }
    let n = chans[0].n_inputs();
    if chans.iter().any(|c| c.inputs() != chans[0].inputs()) {
        return Err(SietError::param("channels", "all channels must share one input grid"));
    }
    if energies.iter().any(|a| a.len() != n || a.iter().any(|v| !v.is_finite())) {
        return Err(SietError::param("energies", format!("need finite values at all {n} inputs")));
    }
    Ok(())
}

/// Scale of an energy vector, used to make constraints dimensionless.
fn scale_of(a: &[f64]) -> f64 {
    let s = a.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// `max_p min_l I_l(p)` subject to `a_l . p >= b_l`, with the harvesters
/// given by their values at the inputs.
pub fn max_min_rate(
    chans: &[DiscreteChannel],
    energies: &[Vec<f64>],
    reqs: &[f64],
    opts: &MulticastOptions,
) -> Result<MulticastSolution> {
    opts.validate()?;
    check_tables(chans, energies)?;
    if reqs.len() != energies.len() {
        return Err(SietError::param("requirements", "one requirement per harvester"));
    }
    let n = chans[0].n_inputs();
    // Requirements every distribution meets are dropped.
    let mut lins: Vec<LinCon> = energies
        .iter()
        .zip(reqs)
        .filter(|(a, b)| a.iter().copied().fold(f64::INFINITY, f64::min) < **b)
        .map(|(a, b)| {
            let s = scale_of(a);
            LinCon {
                a: a.iter().map(|v| v / s).collect(),
                rhs: b / s,
                uses_s: false,
            }
        })
        .collect();
    let feas = Program {
        n,
        rates: vec![],
        lins: lins
            .iter()
            .map(|c| LinCon {
                a: c.a.clone(),
                rhs: c.rhs,
                uses_s: false,
            })
            .collect(),
        obj_p: vec![0.0; n],
        obj_s: 0.0,
    };
    let start = feas.find_interior(0.1 * opts.feas_tol)?;
    if start.slack <= -opts.feas_tol {
        return Err(SietError::Infeasible(format!(
            "energy requirements cannot be met together (best uniform slack {:.3e})",
            start.slack
        )));
    }
    if start.slack <= 0.0 {
        // Requirements met only on the boundary: relax within tolerance.
        let relax = -start.slack + 0.5 * opts.feas_tol;
        for c in &mut lins {
            c.rhs -= relax;
        }
    }
    let hs: Vec<(Vec<f64>, f64)> = lins.iter().map(|c| (c.a.clone(), c.rhs)).collect();
    let refs: Vec<&DiscreteChannel> = chans.iter().collect();
    let p = match opts.method {
        MulticastMethod::Barrier => {
            let prog = Program {
                n,
                rates: chans
                    .iter()
                    .map(|ch| RateCon {
                        ch,
                        rhs: 0.0,
                        uses_s: true,
                    })
                    .collect(),
                lins,
                obj_p: vec![0.0; n],
                obj_s: 1.0,
            };
            prog.solve_from(start.p, opts.tol * LN2)?.0
        }
        MulticastMethod::Subgradient => first_order::subgradient_max_min(&refs, &hs, &opts.first_order()).0,
        MulticastMethod::Smoothed => first_order::smoothed_max_min(&refs, &hs, opts.temperature, &opts.first_order()).0,
    };
    solution(chans, energies, p)
}

/// `max_p a_node . p` subject to `I_l(p) >= r` for every node. Other nodes'
/// energy requirements do not enter.
pub fn max_node_energy(
    chans: &[DiscreteChannel],
    energies: &[Vec<f64>],
    node: usize,
    r: f64,
    opts: &MulticastOptions,
) -> Result<MulticastSolution> {
    opts.validate()?;
    check_tables(chans, energies)?;
    if node >= energies.len() {
        return Err(SietError::param("node", format!("{node} is not below {}", energies.len())));
    }
    if !(r.is_finite() && r >= 0.0) {
        return Err(SietError::param("r", format!("rate must be finite and >= 0, got {r}")));
    }
    let n = chans[0].n_inputs();
    let a = &energies[node];
    if r == 0.0 {
        let amax = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let best = a.iter().position(|v| *v == amax).expect("non-empty");
        let mut p = vec![0.0; n];
        p[best] = 1.0;
        return solution(chans, energies, p);
    }
    let refs: Vec<&DiscreteChannel> = chans.iter().collect();
    if opts.method == MulticastMethod::Subgradient {
        let (p, _) = first_order::subgradient_max_energy(&refs, a, r, &opts.first_order())?;
        return solution(chans, energies, p);
    }
    if opts.method == MulticastMethod::Smoothed {
        return Err(SietError::param("method", "the smoothed variant only solves the max-min rate"));
    }
    let s = scale_of(a);
    let mut rates: Vec<RateCon> = chans
        .iter()
        .map(|ch| RateCon {
            ch,
            rhs: r * LN2,
            uses_s: false,
        })
        .collect();
    let feas = Program {
        n,
        rates: chans
            .iter()
            .map(|ch| RateCon {
                ch,
                rhs: r * LN2,
                uses_s: false,
            })
            .collect(),
        lins: vec![],
        obj_p: vec![0.0; n],
        obj_s: 0.0,
    };
    let tol_nats = opts.feas_tol * LN2;
    let start = feas.find_interior(0.1 * tol_nats)?;
    if start.slack <= -tol_nats {
        return Err(SietError::Infeasible(format!(
            "rate {r} bits exceeds the max-min capacity (short by {:.3e} bits)",
            -start.slack / LN2
        )));
    }
    if start.slack <= 0.0 {
        let relax = -start.slack + 0.5 * tol_nats;
        for c in &mut rates {
            c.rhs -= relax;
        }
    }
    let prog = Program {
        n,
        rates,
        lins: vec![],
        obj_p: a.iter().map(|v| v / s).collect(),
        obj_s: 0.0,
    };
    let (p, _) = prog.solve_from(start.p, opts.tol)?;
    solution(chans, energies, p)
}

/// `C^MC(B)` in bits with an achieving distribution.
pub fn multicast_capacity(prob: &MulticastProblem, tol: f64) -> Result<(f64, InputDistribution)> {
    let opts = MulticastOptions {
        tol,
        ..MulticastOptions::default()
    };
    let sol = multicast_capacity_with(prob, &opts)?;
    Ok((sol.rate, sol.p))
}

pub fn multicast_capacity_with(prob: &MulticastProblem, opts: &MulticastOptions) -> Result<MulticastSolution> {
    max_min_rate(&prob.channels, &prob.energy_table(), &prob.requirements, opts)
}

/// `B^(node)(r)`: the most energy node `node` can harvest while every node
/// decodes at rate `r`.
pub fn multicast_energy(prob: &MulticastProblem, r: f64, node: usize) -> Result<f64> {
    let sol = multicast_energy_with(prob, r, node, &MulticastOptions::default())?;
    Ok(sol.energies[node])
}

pub fn multicast_energy_with(
    prob: &MulticastProblem,
    r: f64,
    node: usize,
    opts: &MulticastOptions,
) -> Result<MulticastSolution> {
    max_node_energy(&prob.channels, &prob.energy_table(), node, r, opts)
}

/// `max_p min_l I_l(p)` without energy requirements, in bits.
pub fn max_min_capacity(chans: &[DiscreteChannel], opts: &MulticastOptions) -> Result<MulticastSolution> {
    let n = chans.first().map_or(0, |c| c.n_inputs());
    let zeros = vec![vec![0.0; n]; chans.len()];
    max_min_rate(chans, &zeros, &vec![0.0; chans.len()], opts)
}
