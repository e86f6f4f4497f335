use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::{GridFunction, RealFunction};
use crate::error::{Result, SietError};

/// Law of the additive measurement noise. Both laws have mean zero and
/// standard deviation `sigma`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLaw {
    #[default]
    Gaussian,
    Uniform,
}

/// Samples `(i / (m - 1), t_i)` of a function on the regular fixed design.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledFunction {
    xs: Vec<f64>,
    values: Vec<f64>,
    noise_sigma: f64,
    seed: Option<u64>,
}

pub(crate) fn regular_design(m: usize) -> Vec<f64> {
    let denom = (m - 1) as f64;
    (0..m).map(|i| i as f64 / denom).collect()
}

impl SampledFunction {
    /// Wraps values observed on the regular design. `seed` must be given
    /// exactly when `noise_sigma > 0`.
    pub fn new(values: Vec<f64>, noise_sigma: f64, seed: Option<u64>) -> Result<Self> {
        let m = values.len();
        if m < 2 {
            return Err(SietError::param("m", format!("need at least 2 samples, got {m}")));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(SietError::param("sigma", format!("must be finite and >= 0, got {noise_sigma}")));
        }
        if (noise_sigma > 0.0) != seed.is_some() {
            return Err(SietError::InvalidInput(
                "a seed is recorded exactly when the samples are noisy".into(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SietError::InvalidInput(format!("non-finite sample value at index {i}")));
        }
        Ok(Self {
            xs: regular_design(m),
            values,
            noise_sigma,
            seed,
        })
    }

    pub fn m(&self) -> usize {
        self.xs.len()
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn is_noiseless(&self) -> bool {
        self.noise_sigma == 0.0
    }

    /// Samples of `x -> f(1 - x)`.
    pub fn reflect(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self {
            xs: self.xs.clone(),
            values,
            noise_sigma: self.noise_sigma,
            seed: self.seed,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(seed) = self.seed {
            out.push_str(&format!("# sigma={} seed={}\n", self.noise_sigma, seed));
        }
        out.push_str("x,value\n");
        for (x, v) in self.xs.iter().zip(&self.values) {
            out.push_str(&format!("{x},{v}\n"));
        }
        out
    }

    /// Parses the format written by [`SampledFunction::to_csv`]: an optional
    /// `# sigma=<s> seed=<n>` line, an `x,value` header and one row per design
    /// point in order.
    pub fn from_csv(text: &str) -> Result<Self> {
        let (sigma, seed) = parse_metadata(text)?;
        let rows = read_xy_csv(text, true)?;
        let m = rows.len();
        if m < 2 {
            return Err(SietError::param("m", format!("need at least 2 samples, got {m}")));
        }
        let design = regular_design(m);
        for (i, (&(x, _), &expected)) in rows.iter().zip(&design).enumerate() {
            if (x - expected).abs() > 1e-9 {
                return Err(SietError::Parse {
                    line: i + 2,
                    msg: format!("x = {x} is not the design point {expected}"),
                });
            }
        }
        Self::new(rows.into_iter().map(|(_, v)| v).collect(), sigma, seed)
    }
}

fn parse_metadata(text: &str) -> Result<(f64, Option<u64>)> {
    let Some(first) = text.lines().next() else {
        return Ok((0.0, None));
    };
    let Some(rest) = first.trim_start().strip_prefix('#') else {
        return Ok((0.0, None));
    };
    let mut sigma = 0.0;
    let mut seed = None;
    for token in rest.split_whitespace() {
        let (key, value) = token.split_once('=').ok_or_else(|| SietError::Parse {
            line: 1,
            msg: format!("metadata token `{token}` is not key=value"),
        })?;
        let bad = |msg: String| SietError::Parse { line: 1, msg };
        match key {
            "sigma" => sigma = value.parse().map_err(|e| bad(format!("sigma: {e}")))?,
            "seed" => seed = Some(value.parse().map_err(|e| bad(format!("seed: {e}")))?),
            _ => return Err(bad(format!("unknown metadata key `{key}`"))),
        }
    }
    Ok((sigma, seed))
}

/// Reads two numeric columns. With `require_header`, the first non-comment
/// record must be exactly `x,value`; otherwise a non-numeric first record is
/// skipped as a header.
pub(crate) fn read_xy_csv(text: &str, require_header: bool) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 2 {
            return Err(SietError::Parse {
                line,
                msg: format!("expected 2 columns, found {}", record.len()),
            });
        }
        if first {
            first = false;
            let is_header = &record[0] == "x" && &record[1] == "value";
            if require_header {
                if !is_header {
                    return Err(SietError::Parse {
                        line,
                        msg: "expected header `x,value`".into(),
                    });
                }
                continue;
            }
            if record[0].parse::<f64>().is_err() {
                continue;
            }
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| SietError::Parse {
                    line,
                    msg: format!("`{s}` is not a finite number"),
                })
        };
        rows.push((parse(&record[0])?, parse(&record[1])?));
    }
    if first && require_header {
        return Err(SietError::Parse {
            line: 1,
            msg: "missing header `x,value`".into(),
        });
    }
    Ok(rows)
}

/// Samples `f` on the regular `m`-point design and adds i.i.d. noise of
/// standard deviation `sigma` drawn from a generator seeded with `seed`.
pub fn sample_function(
    f: &(impl RealFunction + ?Sized),
    m: usize,
    sigma: f64,
    seed: u64,
    law: NoiseLaw,
) -> Result<SampledFunction> {
    if m < 2 {
        return Err(SietError::param("m", format!("need at least 2 samples, got {m}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(SietError::param("sigma", format!("must be finite and >= 0, got {sigma}")));
    }
    let xs = regular_design(m);
    let mut values: Vec<f64> = xs.iter().map(|&x| f.eval(x)).collect();
    if sigma == 0.0 {
        return SampledFunction::new(values, 0.0, None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match law {
        NoiseLaw::Gaussian => {
            let normal = Normal::new(0.0, sigma).expect("sigma validated");
            for v in &mut values {
                *v += normal.sample(&mut rng);
            }
        }
        NoiseLaw::Uniform => {
            let half = sigma * 3f64.sqrt();
            let uniform = Uniform::new_inclusive(-half, half).expect("sigma validated");
            for v in &mut values {
                *v += uniform.sample(&mut rng);
            }
        }
    }
    SampledFunction::new(values, sigma, Some(seed))
}

/// Regular-design samples of a grid function with Gaussian noise.
pub fn sample_regular(f: &GridFunction, m: usize, sigma: f64, seed: u64) -> Result<SampledFunction> {
    sample_function(f, m, sigma, seed, NoiseLaw::Gaussian)
}

/// Turns an arbitrary two-column measurement table (for example input power
/// against harvested power from a circuit simulation) into regular-design
/// samples: rows are sorted, the abscissa range is mapped affinely onto
/// `[0, 1]`, and if the points are not evenly spaced the values are linearly
/// interpolated onto as many regular points as there are rows. A header row
/// is optional.
pub fn ingest_measurements(text: &str) -> Result<SampledFunction> {
    let mut rows = read_xy_csv(text, false)?;
    if rows.len() < 2 {
        return Err(SietError::InsufficientSamples { need: 2, got: rows.len() });
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    if rows.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(SietError::InvalidInput("duplicate abscissa in measurements".into()));
    }
    let (lo, hi) = (rows[0].0, rows[rows.len() - 1].0);
    let scaled: Vec<(f64, f64)> = rows.iter().map(|&(x, v)| ((x - lo) / (hi - lo), v)).collect();
    let m = scaled.len();
    let design = regular_design(m);
    let values = design
        .iter()
        .map(|&x| {
            let k = scaled.partition_point(|&(sx, _)| sx <= x).clamp(1, m - 1);
            let (x0, v0) = scaled[k - 1];
            let (x1, v1) = scaled[k];
            let t = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
            (1.0 - t) * v0 + t * v1
        })
        .collect();
    SampledFunction::new(values, 0.0, None)
}
