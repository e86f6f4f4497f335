//! Discrete channels whose inputs are points of `[0, 1]`.

mod builders;

pub use builders::{
    make_adversarial_mod, make_awgn_peak, make_bsc, make_circular, make_identity, make_random,
};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SietError};
use crate::funcspace::RealFunction;

const ROW_SUM_TOL: f64 = 1e-12;

/// Row-stochastic transition matrix `W(y|x)` on an input grid of `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelRepr", into = "ChannelRepr")]
pub struct DiscreteChannel {
    inputs: Vec<f64>,
    outputs: Vec<String>,
    w: Vec<f64>,
    /// `sum_y W ln W` per row.
    neg_entropy: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelRepr {
    inputs: Vec<f64>,
    outputs: Vec<String>,
    matrix: Vec<Vec<f64>>,
}

impl TryFrom<ChannelRepr> for DiscreteChannel {
    type Error = SietError;
    fn try_from(r: ChannelRepr) -> Result<Self> {
        DiscreteChannel::from_rows(r.inputs, r.outputs, r.matrix)
    }
}

impl From<DiscreteChannel> for ChannelRepr {
    fn from(c: DiscreteChannel) -> Self {
        let matrix = (0..c.n_inputs()).map(|i| c.row(i).to_vec()).collect();
        ChannelRepr {
            inputs: c.inputs,
            outputs: c.outputs,
            matrix,
        }
    }
}

fn default_labels(o: usize) -> Vec<String> {
    (0..o).map(|j| format!("y{j}")).collect()
}

impl DiscreteChannel {
    /// Validates and wraps a row-major `n x o` matrix.
    pub fn new(inputs: Vec<f64>, outputs: Vec<String>, w: Vec<f64>) -> Result<Self> {
        let n = inputs.len();
        let o = outputs.len();
        if n == 0 || o == 0 {
            return Err(SietError::InvalidInput("channel needs at least one input and one output".into()));
        }
        if w.len() != n * o {
            return Err(SietError::InvalidInput(format!(
                "matrix has {} entries, expected {n} x {o}",
                w.len()
            )));
        }
        if inputs.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(SietError::InvalidInput("channel inputs must lie in [0, 1]".into()));
        }
        if inputs.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(SietError::InvalidInput("channel inputs must be strictly increasing".into()));
        }
        let mut neg_entropy = Vec::with_capacity(n);
        for (i, row) in w.chunks(o).enumerate() {
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(SietError::InvalidInput(format!("row {i} has a negative or non-finite entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL * o.max(1) as f64 {
                return Err(SietError::InvalidInput(format!("row {i} sums to {s}, not 1")));
            }
            neg_entropy.push(row.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum());
        }
        Ok(Self {
            inputs,
            outputs,
            w,
            neg_entropy,
        })
    }

    pub fn from_rows(inputs: Vec<f64>, outputs: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let o = outputs.len();
        if let Some(i) = rows.iter().position(|r| r.len() != o) {
            return Err(SietError::InvalidInput(format!("row {i} does not have {o} entries")));
        }
        Self::new(inputs, outputs, rows.concat())
    }

    /// Normalises each row of a nonnegative matrix and wraps it with default
    /// output labels.
    pub fn from_weights(inputs: Vec<f64>, o: usize, mut w: Vec<f64>) -> Result<Self> {
        if o == 0 || w.len() != inputs.len() * o {
            return Err(SietError::InvalidInput("weight matrix has the wrong shape".into()));
        }
        for row in w.chunks_mut(o) {
            let s: f64 = row.iter().sum();
            if !(s > 0.0 && s.is_finite()) {
                return Err(SietError::InvalidInput("weight row has no positive mass".into()));
            }
            row.iter_mut().for_each(|v| *v /= s);
        }
        Self::new(inputs, default_labels(o), w)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let o = self.outputs.len();
        &self.w[i * o..(i + 1) * o]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.w
    }

    /// `sum_y W(y|x) ln W(y|x)` for each input.
    pub fn row_neg_entropy(&self) -> &[f64] {
        &self.neg_entropy
    }

    /// Output distribution `q = p W`.
    pub fn output_dist(&self, p: &[f64]) -> Vec<f64> {
        let o = self.n_outputs();
        let mut q = vec![0.0; o];
        for (i, &pi) in p.iter().enumerate() {
            if pi > 0.0 {
                for (qy, w) in q.iter_mut().zip(self.row(i)) {
                    *qy += pi * w;
                }
            }
        }
        q
    }

    /// `D(W(.|x) || q)` in nats for every input.
    pub fn divergences(&self, q: &[f64]) -> Vec<f64> {
        let ln_q: Vec<f64> = q.iter().map(|v| if *v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).collect();
        (0..self.n_inputs())
            .map(|i| {
                let cross: f64 = self
                    .row(i)
                    .iter()
                    .zip(&ln_q)
                    .filter(|(w, _)| **w > 0.0)
                    .map(|(w, l)| w * l)
                    .sum();
                self.neg_entropy[i] - cross
            })
            .collect()
    }

    /// Mutual information in nats for a raw probability vector.
    pub fn mutual_information_nats(&self, p: &[f64]) -> f64 {
        let q = self.output_dist(p);
        let d = self.divergences(&q);
        p.iter().zip(&d).filter(|(pi, _)| **pi > 0.0).map(|(pi, di)| pi * di).sum::<f64>().max(0.0)
    }

    /// Channel restricted to a subset of its inputs.
    pub fn restrict(&self, keep: &[usize]) -> Result<Self> {
        let inputs = keep.iter().map(|&i| self.inputs[i]).collect();
        let w = keep.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Self::new(inputs, self.outputs.clone(), w)
    }
}

/// A probability vector over a channel's input points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistRepr", into = "DistRepr")]
pub struct InputDistribution {
    points: Vec<f64>,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistRepr {
    points: Vec<f64>,
    probs: Vec<f64>,
}

impl TryFrom<DistRepr> for InputDistribution {
    type Error = SietError;
    fn try_from(r: DistRepr) -> Result<Self> {
        InputDistribution::new(r.points, r.probs)
    }
}

impl From<InputDistribution> for DistRepr {
    fn from(d: InputDistribution) -> Self {
        DistRepr {
            points: d.points,
            probs: d.probs,
        }
    }
}

impl InputDistribution {
    pub fn new(points: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if points.len() != probs.len() || probs.is_empty() {
            return Err(SietError::InvalidInput("points and probabilities must be non-empty and aligned".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(SietError::InvalidInput("probabilities must be finite and nonnegative".into()));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-12 * probs.len().max(1) as f64 {
            return Err(SietError::InvalidInput(format!("probabilities sum to {s}, not 1")));
        }
        Ok(Self { points, probs })
    }

    /// Renormalises a nonnegative vector to sum exactly to one (up to
    /// rounding) for the given channel.
    pub fn for_channel(ch: &DiscreteChannel, mut probs: Vec<f64>) -> Result<Self> {
        if probs.len() != ch.n_inputs() {
            return Err(SietError::param(
                "p",
                format!("length {} does not match {} channel inputs", probs.len(), ch.n_inputs()),
            ));
        }
        for p in probs.iter_mut() {
            if *p < 0.0 && *p > -1e-15 {
                *p = 0.0;
            }
        }
        let s: f64 = probs.iter().sum();
        if s > 0.0 {
            probs.iter_mut().for_each(|p| *p /= s);
        }
        Self::new(ch.inputs.clone(), probs)
    }

    pub fn uniform(ch: &DiscreteChannel) -> Self {
        let n = ch.n_inputs();
        Self {
            points: ch.inputs.clone(),
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(ch: &DiscreteChannel, index: usize) -> Result<Self> {
        if index >= ch.n_inputs() {
            return Err(SietError::param("index", format!("{index} out of range")));
        }
        let mut probs = vec![0.0; ch.n_inputs()];
        probs[index] = 1.0;
        Self::new(ch.inputs.clone(), probs)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `alpha self + (1 - alpha) other` on the same support.
    pub fn mix(&self, other: &Self, alpha: f64) -> Result<Self> {
        if self.points != other.points {
            return Err(SietError::InvalidInput("mixing distributions on different supports".into()));
        }
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect();
        Ok(Self {
            points: self.points.clone(),
            probs,
        })
    }
}

fn check_dims(p: &InputDistribution, ch: &DiscreteChannel) -> Result<()> {
    if p.len() != ch.n_inputs() {
        return Err(SietError::param(
            "p",
            format!("length {} does not match {} channel inputs", p.len(), ch.n_inputs()),
        ));
    }
    Ok(())
}

/// `I(X; Y)` in bits.
pub fn mutual_information(p: &InputDistribution, ch: &DiscreteChannel) -> Result<f64> {
    check_dims(p, ch)?;
    Ok(ch.mutual_information_nats(p.probs()) / std::f64::consts::LN_2)
}

/// `E_p[f(X)]` with `f` evaluated at the distribution's points.
pub fn expected_energy(p: &InputDistribution, f: &(impl RealFunction + ?Sized)) -> f64 {
    p.points.iter().zip(&p.probs).map(|(&x, &pi)| pi * f.eval(x)).sum()
}
