//! Loss reports: per-m series, log-log slope fits and file emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SietError};

/// Losses at or below this are treated as numerically zero by the fits.
pub const LOSS_FLOOR: f64 = 1e-12;
const BOOTSTRAP_RESAMPLES: usize = 1000;
const BOOTSTRAP_SEED: u64 = 0x51e7_b007;

/// Least-squares fit of `ln loss = a + slope ln m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% pairs-bootstrap interval for the slope.
    pub ci: [f64; 2],
    pub n_points: usize,
}

fn ols(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Log-log slope of `losses` against `m_values`, skipping missing entries
/// and losses at or below [`LOSS_FLOOR`].
pub fn fit_slope(m_values: &[usize], losses: &[Option<f64>]) -> Result<SlopeFit> {
    if m_values.len() != losses.len() {
        return Err(SietError::InvalidInput(format!(
            "{} m values but {} losses",
            m_values.len(),
            losses.len()
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = m_values
        .iter()
        .zip(losses)
        .filter_map(|(&m, l)| match l {
            Some(v) if *v > LOSS_FLOOR && v.is_finite() && m > 0 => Some(((m as f64).ln(), v.ln())),
            _ => None,
        })
        .unzip();
    if xs.len() < 4 {
        return Err(SietError::InsufficientData(format!(
            "slope fit needs at least 4 losses above {LOSS_FLOOR}, got {}",
            xs.len()
        )));
    }
    let (slope, intercept) =
        ols(&xs, &ys).ok_or_else(|| SietError::InsufficientData("all usable points share one m".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    let n = xs.len();
    let mut slopes = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let (mut bx, mut by) = (vec![0.0; n], vec![0.0; n]);
    while slopes.len() < BOOTSTRAP_RESAMPLES {
        for k in 0..n {
            let i = rng.random_range(0..n);
            bx[k] = xs[i];
            by[k] = ys[i];
        }
        // Resamples with a single distinct abscissa carry no slope.
        if let Some((s, _)) = ols(&bx, &by) {
            slopes.push(s);
        }
    }
    slopes.sort_by(f64::total_cmp);
    let q = |p: f64| slopes[((p * (slopes.len() - 1) as f64).round() as usize).min(slopes.len() - 1)];
    Ok(SlopeFit {
        slope,
        intercept,
        ci: [q(0.025), q(0.975)],
        n_points: n,
    })
}

/// SHA-256 of the JSON serialisation of `value`, as lowercase hex.
pub fn config_digest(value: &impl Serialize) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub experiment: String,
    pub m_values: Vec<usize>,
    /// Loss name -> one entry per m; `None` where the computation failed.
    pub losses: BTreeMap<String, Vec<Option<f64>>>,
    /// Slope per fitted key; `None` when the fit had too few points.
    pub fitted_slope: BTreeMap<String, Option<f64>>,
    pub slope_ci: BTreeMap<String, Option<[f64; 2]>>,
    pub failures: Vec<String>,
    pub notes: Vec<String>,
    pub config_digest: String,
    /// Auxiliary `(x, y)` series written as `curve_<key>.dat`.
    #[serde(default)]
    pub curves: BTreeMap<String, Vec<[f64; 2]>>,
}

impl LossReport {
    pub fn new(experiment: &str, m_values: Vec<usize>, config_digest: String) -> Self {
        Self {
            experiment: experiment.to_string(),
            m_values,
            losses: BTreeMap::new(),
            fitted_slope: BTreeMap::new(),
            slope_ci: BTreeMap::new(),
            failures: Vec::new(),
            notes: Vec::new(),
            config_digest,
            curves: BTreeMap::new(),
        }
    }

    /// Adds a series; when `fit` is set its slope is fitted too.
    pub fn add_series(&mut self, key: &str, values: Vec<Option<f64>>, fit: bool) {
        if fit {
            match fit_slope(&self.m_values, &values) {
                Ok(f) => {
                    self.fitted_slope.insert(key.to_string(), Some(f.slope));
                    self.slope_ci.insert(key.to_string(), Some(f.ci));
                }
                Err(e) => {
                    self.fitted_slope.insert(key.to_string(), None);
                    self.slope_ci.insert(key.to_string(), None);
                    self.notes.push(format!("{key}: no slope ({e})"));
                }
            }
        }
        self.losses.insert(key.to_string(), values);
    }

    pub fn series(&self, key: &str) -> Option<&[Option<f64>]> {
        self.losses.get(key).map(|v| v.as_slice())
    }

    /// Series with failures as an error.
    pub fn values(&self, key: &str) -> Result<Vec<f64>> {
        let s = self
            .series(key)
            .ok_or_else(|| SietError::InvalidInput(format!("report has no series `{key}`")))?;
        s.iter()
            .zip(&self.m_values)
            .map(|(v, m)| v.ok_or_else(|| SietError::Numerical(format!("`{key}` failed at m = {m}"))))
            .collect()
    }

    pub fn slope(&self, key: &str) -> Option<f64> {
        self.fitted_slope.get(key).copied().flatten()
    }

    /// `m` followed by one column per series; failures are empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m");
        for k in self.losses.keys() {
            out.push(',');
            out.push_str(k);
        }
        out.push('\n');
        for (i, m) in self.m_values.iter().enumerate() {
            let _ = write!(out, "{m}");
            for v in self.losses.values() {
                out.push(',');
                if let Some(x) = v[i] {
                    let _ = write!(out, "{x:e}");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Writes `report.csv`, `report.json`, one `curve_<key>.dat` per loss
    /// series (`m loss`) and one per auxiliary curve.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.csv"), self.to_csv())?;
        std::fs::write(dir.join("report.json"), self.to_json()? + "\n")?;
        for (k, v) in &self.losses {
            let mut s = format!("# m {k}\n");
            for (m, x) in self.m_values.iter().zip(v) {
                if let Some(x) = x {
                    let _ = writeln!(s, "{m} {x:e}");
                }
            }
            std::fs::write(dir.join(format!("curve_{}.dat", file_key(k))), s)?;
        }
        for (k, pts) in &self.curves {
            let mut s = format!("# {k}\n");
            for [x, y] in pts {
                let _ = writeln!(s, "{x:e} {y:e}");
            }
            std::fs::write(dir.join(format!("curve_{}.dat", file_key(k))), s)?;
        }
        Ok(())
    }
}

fn file_key(k: &str) -> String {
    k.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn ms() -> Vec<usize> {
        vec![9, 17, 33, 65, 129, 257]
    }

    #[test]
    fn exact_power_law() {
        let l: Vec<_> = ms().iter().map(|&m| Some(3.0 * (m as f64).powi(-2))).collect();
        let f = fit_slope(&ms(), &l).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-9);
        assert!((f.ci[0] + 2.0).abs() < 1e-9 && (f.ci[1] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn constant_losses() {
        let l = vec![Some(0.3); 6];
        assert!(fit_slope(&ms(), &l).unwrap().slope.abs() < 1e-9);
    }

    #[test]
    fn too_few_points() {
        let l = vec![Some(1.0), Some(0.5), None, Some(0.0), Some(1e-13), Some(0.1)];
        assert!(matches!(fit_slope(&ms(), &l), Err(SietError::InsufficientData(_))));
    }

    #[test]
    fn noisy_power_law_mostly_within_band() {
        let mut inside = 0;
        for seed in 0..200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l: Vec<_> = ms()
                .iter()
                .map(|&m| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    Some(2.0 / m as f64 * (1.0 + 0.05 * z))
                })
                .collect();
            let s = fit_slope(&ms(), &l).unwrap().slope;
            if (-1.15..=-0.85).contains(&s) {
                inside += 1;
            }
        }
        assert!(inside >= 190, "{inside}/200");
    }

    #[test]
    fn emission_is_deterministic() {
        let mut r = LossReport::new("t", ms(), config_digest(&("t", 1)).unwrap());
        r.add_series("a", ms().iter().map(|&m| Some(1.0 / m as f64)).collect(), true);
        r.add_series("b", vec![None, Some(1.0), Some(2.0), None, Some(0.5), Some(0.25)], false);
        r.curves.insert("pi true".into(), vec![[0.0, 1.0], [1.0, 0.5]]);
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        r.write_to(d1.path()).unwrap();
        r.clone().write_to(d2.path()).unwrap();
        for f in ["report.csv", "report.json", "curve_a.dat", "curve_b.dat", "curve_pi_true.dat"] {
            assert_eq!(
                std::fs::read(d1.path().join(f)).unwrap(),
                std::fs::read(d2.path().join(f)).unwrap()
            );
        }
        let back = LossReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(r.to_csv().starts_with("m,a,b\n9,"));
    }
}
