use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

use super::DiscreteChannel;
use crate::error::{Result, SietError};

fn grid(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// Standard normal CDF, accurate in both tails.
fn phi(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Binary symmetric channel on inputs `{0, 1}`.
pub fn make_bsc(crossover: f64) -> Result<DiscreteChannel> {
    if !(0.0..=1.0).contains(&crossover) {
        return Err(SietError::param("crossover", format!("must lie in [0, 1], got {crossover}")));
    }
    let e = crossover;
    DiscreteChannel::new(vec![0.0, 1.0], vec!["0".into(), "1".into()], vec![1.0 - e, e, e, 1.0 - e])
}

/// Noiseless channel on `n` evenly spaced inputs.
pub fn make_identity(n: usize) -> Result<DiscreteChannel> {
    if n == 0 {
        return Err(SietError::param("n", "need at least one input"));
    }
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        w[i * n + i] = 1.0;
    }
    DiscreteChannel::new(grid(n), (0..n).map(|j| format!("y{j}")).collect(), w)
}

/// Amplitude-constrained Gaussian channel `Y = X + Z`, inputs evenly spaced
/// on `[0, 1]`, output quantised into `n_out` equal bins of
/// `[-4 sigma, 1 + 4 sigma]` whose two edge bins also absorb the tails.
pub fn make_awgn_peak(n_in: usize, n_out: usize, noise_std: f64) -> Result<DiscreteChannel> {
    if n_in < 2 || n_out < 2 {
        return Err(SietError::param("n_in/n_out", "need at least 2 inputs and 2 outputs"));
    }
    if !(noise_std > 0.0 && noise_std.is_finite()) {
        return Err(SietError::param("noise_std", format!("must be positive, got {noise_std}")));
    }
    let lo = -4.0 * noise_std;
    let width = (1.0 + 8.0 * noise_std) / n_out as f64;
    let inputs = grid(n_in);
    let mut w = Vec::with_capacity(n_in * n_out);
    for &x in &inputs {
        for j in 0..n_out {
            let a = if j == 0 { f64::NEG_INFINITY } else { lo + j as f64 * width };
            let b = if j + 1 == n_out {
                f64::INFINITY
            } else {
                lo + (j + 1) as f64 * width
            };
            let (za, zb) = ((a - x) / noise_std, (b - x) / noise_std);
            // Difference of upper tails is more accurate on the right.
            let mass = if za > 0.0 { phi(-za) - phi(-zb) } else { phi(zb) - phi(za) };
            w.push(mass.max(0.0));
        }
    }
    DiscreteChannel::from_weights(inputs, n_out, w)
}

/// Circular channel `Y = (X + Z) mod 1` with Gaussian `Z`, inputs `j / n`
/// for `j = 0..n`, output quantised into `n_out` equal circular bins
/// centred on `j / n_out`.
pub fn make_circular(n_in: usize, n_out: usize, noise_std: f64) -> Result<DiscreteChannel> {
    if n_in < 1 || n_out < 2 {
        return Err(SietError::param("n_in/n_out", "need at least 1 input and 2 outputs"));
    }
    if !(noise_std > 0.0 && noise_std.is_finite()) {
        return Err(SietError::param("noise_std", format!("must be positive, got {noise_std}")));
    }
    let inputs: Vec<f64> = (0..n_in).map(|j| j as f64 / n_in as f64).collect();
    let wraps = (8.0 * noise_std).ceil() as i64 + 1;
    let mut w = Vec::with_capacity(n_in * n_out);
    for &x in &inputs {
        for j in 0..n_out {
            let (a, b) = ((j as f64 - 0.5) / n_out as f64, (j as f64 + 0.5) / n_out as f64);
            let mut mass = 0.0;
            for k in -wraps..=wraps {
                let za = (a + k as f64 - x) / noise_std;
                let zb = (b + k as f64 - x) / noise_std;
                mass += if za > 0.0 { phi(-za) - phi(-zb) } else { phi(zb) - phi(za) };
            }
            w.push(mass.max(0.0));
        }
    }
    DiscreteChannel::from_weights(inputs, n_out, w)
}

/// CDF of the triangular law on `[-w, w]`.
fn tri_cdf(z: f64, w: f64) -> f64 {
    if z <= -w {
        0.0
    } else if z <= 0.0 {
        (z + w) * (z + w) / (2.0 * w * w)
    } else if z < w {
        1.0 - (w - z) * (w - z) / (2.0 * w * w)
    } else {
        1.0
    }
}

/// Additive mod-1 channel whose noise is exactly uniform at the `m` design
/// points and a wrapped triangle of half-width `1 / (1 + concentration rho)`
/// elsewhere, with `rho = 2 (m - 1) dist(x, design)` in `[0, 1]`. A
/// triangle of half-width 1 wraps to the uniform law, so the family is
/// continuous away from the design but the design inputs alone convey
/// nothing. Inputs are `i / (n_in - 1)`; `n_in - 1` must be a multiple of
/// `m - 1` so every design point is an input, and `n_in >= 2m - 1` so
/// there are as many off-design inputs.
pub fn make_adversarial_mod(m: usize, n_in: usize, n_out: usize, concentration: f64) -> Result<DiscreteChannel> {
    if m < 2 {
        return Err(SietError::param("m", format!("need at least 2 samples, got {m}")));
    }
    if n_in < 2 * m - 1 || (n_in - 1) % (m - 1) != 0 {
        return Err(SietError::param(
            "n_in",
            format!("need n_in >= 2m - 1 with (n_in - 1) divisible by m - 1, got n_in = {n_in}, m = {m}"),
        ));
    }
    if n_out < 2 {
        return Err(SietError::param("n_out", "need at least 2 outputs"));
    }
    if !(concentration > 0.0 && concentration.is_finite()) {
        return Err(SietError::param("concentration", format!("must be positive, got {concentration}")));
    }
    let inputs = grid(n_in);
    let stride = (n_in - 1) / (m - 1);
    let mut w = Vec::with_capacity(n_in * n_out);
    for (i, &x) in inputs.iter().enumerate() {
        let off = i % stride;
        let steps = off.min(stride - off);
        // dist to the design is steps / (n_in - 1); rho normalises it by the
        // half-spacing 1 / (2 (m - 1)).
        let rho = 2.0 * (m - 1) as f64 * steps as f64 / (n_in - 1) as f64;
        if steps == 0 {
            w.extend(std::iter::repeat_n(1.0 / n_out as f64, n_out));
            continue;
        }
        let half = 1.0 / (1.0 + concentration * rho);
        for j in 0..n_out {
            let (a, b) = ((j as f64 - 0.5) / n_out as f64, (j as f64 + 0.5) / n_out as f64);
            let mut mass = 0.0;
            for k in -2i32..=2 {
                mass += tri_cdf(b + k as f64 - x, half) - tri_cdf(a + k as f64 - x, half);
            }
            w.push(mass.max(0.0));
        }
    }
    DiscreteChannel::from_weights(inputs, n_out, w)
}

/// Channel with i.i.d. uniform entries, rows normalised; inputs evenly
/// spaced on `[0, 1]`.
pub fn make_random(n_in: usize, n_out: usize, seed: u64) -> Result<DiscreteChannel> {
    if n_in < 1 || n_out < 1 {
        return Err(SietError::param("n_in/n_out", "need at least one input and output"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = (0..n_in * n_out).map(|_| rng.random::<f64>() + 1e-3).collect();
    DiscreteChannel::from_weights(grid(n_in), n_out, w)
}
