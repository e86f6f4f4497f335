//! Scenario files: a JSON object naming a command and its parameters. A
//! scenario is resolved (per-command defaults filled in, every referenced
//! file loaded and every parameter validated) before anything is written;
//! the run then goes to `<out>/<command>-<digest prefix>` together with a
//! copy of the resolved configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::capacity::{
    capacity_energy, energy_capacity, sweep_curve, unconstrained_capacity, OperatingPoint, SolverOptions,
};
use crate::channel::{
    make_adversarial_mod, make_awgn_peak, make_bsc, make_circular, make_identity, make_random, DiscreteChannel,
};
use crate::error::{Result, SietError};
use crate::experiments::instances::{desk_channel, sinusoid_source, smooth_harvester, two_node_problem};
use crate::experiments::{
    config_digest, energy_loss_lower_bound, energy_loss_sweep, info_loss_sweep, jscc_loss_sweep, multicast_loss_sweep,
    reconstruction_sweep, ChannelFamily, LossReport, LowerBoundConfig, SampleMode, SweepConfig,
};
use crate::funcspace::{ingest_measurements, GridFunction, SampledFunction, SmoothnessClass, DEFAULT_GRID_SIZE};
use crate::jscc::{
    counterexample_scenario, hamming_source, CounterexampleConfig, CurveOptions, ProjectionDirection, SourceModel,
};
use crate::multicast::{max_min_capacity, multicast_capacity_with, MulticastOptions, MulticastProblem};
use crate::reconstruct::{local_poly_fit_with_diagnostics, spline_interpolate, KernelSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Reconstruct,
    Capacity,
    SweepEnergyLoss,
    SweepInfoLoss,
    LowerBound,
    Multicast,
    Jscc,
    Counterexample,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Reconstruct,
        Command::Capacity,
        Command::SweepEnergyLoss,
        Command::SweepInfoLoss,
        Command::LowerBound,
        Command::Multicast,
        Command::Jscc,
        Command::Counterexample,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Reconstruct => "reconstruct",
            Command::Capacity => "capacity",
            Command::SweepEnergyLoss => "sweep-energy-loss",
            Command::SweepInfoLoss => "sweep-info-loss",
            Command::LowerBound => "lower-bound",
            Command::Multicast => "multicast",
            Command::Jscc => "jscc",
            Command::Counterexample => "counterexample",
        }
    }

    /// Parameter keys the command reads; anything else is rejected.
    pub fn keys(self) -> &'static [&'static str] {
        const NOISE: [&str; 7] = ["lambda", "k_bound", "m_list", "sigma", "trials", "seed", "kernel"];
        match self {
            Command::Reconstruct => &[
                "lambda", "k_bound", "m_list", "sigma", "trials", "seed", "kernel", "harvester", "samples",
                "measurements",
            ],
            Command::Capacity => &["channel", "harvester", "energy", "rate", "n_points", "solver", "lambda", "k_bound"],
            Command::SweepEnergyLoss => &[
                NOISE[0], NOISE[1], NOISE[2], NOISE[3], NOISE[4], NOISE[5], NOISE[6], "channel", "harvester", "rate",
                "rate_fraction", "adversarial_scale", "solver",
            ],
            Command::SweepInfoLoss => &[
                NOISE[0], NOISE[1], NOISE[2], NOISE[3], NOISE[4], NOISE[5], NOISE[6], "channel", "harvester", "energy",
                "energy_fraction", "solver",
            ],
            Command::LowerBound => &[
                "lambda", "k_bound", "m_list", "channel", "rate", "rate_fraction", "amplitude", "bump_scale",
                "use_bump", "solver",
            ],
            Command::Multicast => &[
                NOISE[0], NOISE[1], NOISE[2], NOISE[3], NOISE[4], NOISE[5], NOISE[6], "problem", "rate",
                "rate_fraction",
            ],
            Command::Jscc => &[
                NOISE[0], NOISE[1], NOISE[2], NOISE[3], NOISE[4], NOISE[5], NOISE[6], "channel", "harvester",
                "source", "kappa", "n_points", "direction", "solver",
            ],
            Command::Counterexample => &[
                "lambda", "k_bound", "m_list", "amplitude", "bump_scale", "use_bump", "n_out", "concentration",
                "kappa", "n_points", "direction", "source",
            ],
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = SietError;
    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| SietError::InvalidInput(format!("unknown command `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChannelSpec {
    /// Circular channel on 63 letters, noise a third of a letter.
    Desk,
    Bsc {
        crossover: f64,
    },
    Identity {
        n: usize,
    },
    AwgnPeak {
        n_in: usize,
        n_out: usize,
        noise_std: f64,
    },
    Circular {
        n_in: usize,
        n_out: usize,
        noise_std: f64,
    },
    /// The mod-1 channel built for one `m`: inputs `j / (2m - 2)`.
    Adversarial {
        m: usize,
        n_out: usize,
        concentration: f64,
    },
    /// Information sweeps only: the adversarial channel rebuilt for each `m`.
    AdversarialFamily {
        n_out: usize,
        concentration: f64,
    },
    Random {
        n_in: usize,
        n_out: usize,
        seed: u64,
    },
    /// Channel JSON.
    File {
        path: PathBuf,
    },
    Inline {
        channel: DiscreteChannel,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HarvesterSpec {
    /// `offset + scale K sin(2 pi (x + phase)) / (2 pi)^lambda`.
    Smooth {
        #[serde(default = "half")]
        offset: f64,
        #[serde(default = "nine_tenths")]
        scale: f64,
        #[serde(default)]
        phase: f64,
    },
    Constant {
        value: f64,
    },
    Linear {
        slope: f64,
        intercept: f64,
    },
    /// Dense-grid CSV `x,value`.
    File {
        path: PathBuf,
    },
}

fn half() -> f64 {
    0.5
}

fn nine_tenths() -> f64 {
    0.9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceSpec {
    /// Uniform over `n` points, three sinusoidal distortion columns.
    Sinusoid { n: usize },
    /// Three letters with Hamming distortion.
    Hamming,
    /// Source JSON.
    File { path: PathBuf },
    Inline { source: SourceModel },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Two desk receivers with different noise and harvesters.
    TwoNode { energy_fraction: f64 },
    /// Multicast problem JSON.
    File { path: PathBuf },
}

/// Every key any command reads. Unset keys take the command's default on
/// resolution.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Parameters {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_list: Option<Vec<usize>>,
    /// Noise std of the samples; absent or 0 means noiseless.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub harvester: Option<HarvesterSpec>,
    /// Bits per channel use.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    /// Rate as a fraction of the (max-min) capacity; ignored when `rate`
    /// is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    /// Energy as a fraction of the way from the capacity achiever's energy
    /// to the harvester's peak; ignored when `energy` is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adversarial_scale: Option<f64>,
    /// Regular-design samples CSV.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<PathBuf>,
    /// Free-form measurement CSV, rescaled onto a regular design.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measurements: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<ProjectionDirection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bump_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub use_bump: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_out: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concentration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverOptions>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub command: Command,
    #[serde(default)]
    pub parameters: Parameters,
}

impl ScenarioConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            parameters: Parameters::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `overrides` replace entries of `parameters` (flags win over the
    /// file); each value is JSON.
    pub fn with_overrides(&self, overrides: &BTreeMap<String, Value>) -> Result<Self> {
        let mut v = serde_json::to_value(self)?;
        let params = v
            .get_mut("parameters")
            .and_then(Value::as_object_mut)
            .expect("parameters serialize to an object");
        for (k, val) in overrides {
            params.insert(k.clone(), val.clone());
        }
        Ok(serde_json::from_value(v)?)
    }

    /// Fill in the command's defaults and reject keys it does not read.
    pub fn resolve(&self) -> Result<Self> {
        let set = serde_json::to_value(&self.parameters)?;
        let allowed = self.command.keys();
        if let Some(k) = set.as_object().and_then(|o| o.keys().find(|k| !allowed.contains(&k.as_str()))) {
            return Err(SietError::InvalidInput(format!(
                "parameter `{k}` is not used by command `{}`",
                self.command
            )));
        }
        let mut p = self.parameters.clone();
        let c = self.command;
        let uses = |k: &str| allowed.contains(&k);
        let noisy = p.sigma.is_some_and(|s| s != 0.0);
        if uses("lambda") {
            p.lambda.get_or_insert(1);
            p.k_bound.get_or_insert(1.0);
        }
        if uses("m_list") {
            p.m_list.get_or_insert_with(|| match c {
                Command::Counterexample => vec![9, 33, 129],
                _ => crate::experiments::desk_m_list(),
            });
        }
        if noisy {
            p.trials.get_or_insert(200);
            p.seed.get_or_insert(0);
            p.kernel.get_or_insert_with(KernelSpec::default);
        }
        if uses("channel") {
            p.channel.get_or_insert(ChannelSpec::Desk);
        }
        let needs_harvester = match c {
            Command::Capacity => p.energy.is_some() || p.rate.is_some() || p.n_points.is_some(),
            Command::Reconstruct => p.samples.is_none() && p.measurements.is_none(),
            _ => uses("harvester"),
        };
        if needs_harvester {
            p.harvester.get_or_insert(HarvesterSpec::Smooth {
                offset: 0.5,
                scale: 0.9,
                phase: 0.0,
            });
        }
        if uses("rate_fraction") && p.rate.is_none() {
            p.rate_fraction.get_or_insert(match c {
                Command::LowerBound | Command::Multicast => 0.9,
                _ => 0.5,
            });
        }
        if uses("energy_fraction") && p.energy.is_none() {
            p.energy_fraction.get_or_insert(0.35);
        }
        match c {
            Command::Multicast => {
                p.problem.get_or_insert(ProblemSpec::TwoNode { energy_fraction: 0.3 });
            }
            Command::Jscc => {
                p.source.get_or_insert(SourceSpec::Sinusoid { n: 11 });
                p.kappa.get_or_insert(4.0);
                p.n_points.get_or_insert(33);
                p.direction.get_or_insert_with(ProjectionDirection::default);
            }
            Command::Counterexample => {
                let d = CounterexampleConfig::default();
                p.amplitude.get_or_insert(d.amplitude);
                p.bump_scale.get_or_insert(d.bump_scale);
                p.use_bump.get_or_insert(d.use_bump);
                p.n_out.get_or_insert(d.n_out);
                p.concentration.get_or_insert(d.concentration);
                p.kappa.get_or_insert(d.kappa);
                p.n_points.get_or_insert(d.n_points);
                p.direction.get_or_insert(d.direction);
            }
            Command::LowerBound => {
                let d = LowerBoundConfig::default();
                p.amplitude.get_or_insert(d.amplitude);
                p.bump_scale.get_or_insert(d.bump_scale);
                p.use_bump.get_or_insert(d.use_bump);
            }
            _ => {}
        }
        if uses("solver") && (c != Command::Capacity || p.solver.is_some()) {
            p.solver.get_or_insert_with(SolverOptions::default);
        }
        Ok(Self { command: c, parameters: p })
    }
}

/// Exit status for a failed run: 2 for invalid configuration or input, 3
/// when the problem is infeasible, 4 for numerical or I/O failures.
pub fn exit_code(e: &SietError) -> u8 {
    match e {
        SietError::Infeasible(_) => 3,
        SietError::Numerical(_) | SietError::Io(_) => 4,
        _ => 2,
    }
}

/// Everything a run needs, loaded and validated.
struct Prepared {
    config: ScenarioConfig,
    digest: String,
    cls: Option<SmoothnessClass>,
    channel: Option<ChannelFamily>,
    harvester: Option<GridFunction>,
    samples: Option<SampledFunction>,
    problem: Option<MulticastProblem>,
    source: Option<SourceModel>,
    sweep: Option<SweepConfig>,
}

fn read(base: &Path, path: &Path) -> Result<String> {
    let full = if path.is_absolute() { path.to_path_buf() } else { base.join(path) };
    fs::read_to_string(&full)
        .map_err(|e| SietError::InvalidInput(format!("cannot read `{}`: {e}", full.display())))
}

fn build_channel(spec: &ChannelSpec, base: &Path, files: &mut Vec<String>) -> Result<ChannelFamily> {
    let ch = match spec {
        ChannelSpec::Desk => desk_channel()?,
        ChannelSpec::Bsc { crossover } => make_bsc(*crossover)?,
        ChannelSpec::Identity { n } => make_identity(*n)?,
        ChannelSpec::AwgnPeak { n_in, n_out, noise_std } => make_awgn_peak(*n_in, *n_out, *noise_std)?,
        ChannelSpec::Circular { n_in, n_out, noise_std } => make_circular(*n_in, *n_out, *noise_std)?,
        ChannelSpec::Adversarial { m, n_out, concentration } => {
            if *m < 2 {
                return Err(SietError::param("channel.m", "must be at least 2"));
            }
            make_adversarial_mod(*m, 2 * m - 1, *n_out, *concentration)?
        }
        ChannelSpec::AdversarialFamily { n_out, concentration } => {
            // Validate the parameters on the smallest instance.
            make_adversarial_mod(2, 3, *n_out, *concentration)?;
            return Ok(ChannelFamily::Adversarial {
                n_out: *n_out,
                concentration: *concentration,
            });
        }
        ChannelSpec::Random { n_in, n_out, seed } => make_random(*n_in, *n_out, *seed)?,
        ChannelSpec::File { path } => {
            let text = read(base, path)?;
            files.push(text.clone());
            DiscreteChannel::from_json(&text)?
        }
        ChannelSpec::Inline { channel } => channel.clone(),
    };
    Ok(ch.into())
}

fn build_harvester(
    spec: &HarvesterSpec,
    cls: Option<&SmoothnessClass>,
    base: &Path,
    files: &mut Vec<String>,
) -> Result<GridFunction> {
    match spec {
        HarvesterSpec::Smooth { offset, scale, phase } => {
            let unit = SmoothnessClass::new(1, 1.0)?;
            smooth_harvester(cls.unwrap_or(&unit), *offset, *scale, *phase)
        }
        HarvesterSpec::Constant { value } => GridFunction::constant(DEFAULT_GRID_SIZE, *value),
        HarvesterSpec::Linear { slope, intercept } => {
            let (a, b) = (*slope, *intercept);
            GridFunction::from_fn(DEFAULT_GRID_SIZE, move |x: f64| a * x + b)
        }
        HarvesterSpec::File { path } => {
            let text = read(base, path)?;
            files.push(text.clone());
            GridFunction::from_csv(&text)
        }
    }
}

fn fraction(name: &'static str, v: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(SietError::param(name, format!("must lie in [0, 1], got {v}")))
    }
}

fn prepare(config: &ScenarioConfig, base: &Path) -> Result<Prepared> {
    let config = config.resolve()?;
    let p = &config.parameters;
    let mut files = Vec::new();
    let cls = match (p.lambda, p.k_bound) {
        (Some(l), Some(k)) => Some(SmoothnessClass::new(l, k)?),
        _ => None,
    };
    let channel = p.channel.as_ref().map(|s| build_channel(s, base, &mut files)).transpose()?;
    if matches!(channel, Some(ChannelFamily::Adversarial { .. })) && config.command != Command::SweepInfoLoss {
        return Err(SietError::param("channel", "the adversarial family is only meaningful for sweep-info-loss"));
    }
    let harvester = p
        .harvester
        .as_ref()
        .map(|s| build_harvester(s, cls.as_ref(), base, &mut files))
        .transpose()?;
    let samples = match (&p.samples, &p.measurements) {
        (Some(_), Some(_)) => return Err(SietError::param("samples", "give either samples or measurements")),
        (Some(path), None) => {
            let text = read(base, path)?;
            files.push(text.clone());
            Some(SampledFunction::from_csv(&text)?)
        }
        (None, Some(path)) => {
            let text = read(base, path)?;
            files.push(text.clone());
            Some(ingest_measurements(&text)?)
        }
        (None, None) => None,
    };
    let problem = match &p.problem {
        Some(ProblemSpec::TwoNode { energy_fraction }) => {
            Some(two_node_problem(cls.as_ref().expect("multicast reads lambda"), fraction("problem.energy_fraction", *energy_fraction)?)?)
        }
        Some(ProblemSpec::File { path }) => {
            let text = read(base, path)?;
            files.push(text.clone());
            Some(MulticastProblem::from_json(&text)?)
        }
        None => None,
    };
    let source = match &p.source {
        Some(SourceSpec::Sinusoid { n }) => Some(sinusoid_source(cls.as_ref().expect("jscc reads lambda"), *n)?),
        Some(SourceSpec::Hamming) => Some(hamming_source()),
        Some(SourceSpec::File { path }) => {
            let text = read(base, path)?;
            files.push(text.clone());
            Some(SourceModel::from_json(&text)?)
        }
        Some(SourceSpec::Inline { source }) => Some(source.clone()),
        None => None,
    };
    if let Some(f) = p.rate_fraction {
        fraction("rate_fraction", f)?;
    }
    if let Some(f) = p.energy_fraction {
        fraction("energy_fraction", f)?;
    }
    if let Some(r) = p.rate {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(SietError::param("rate", format!("must be finite and >= 0, got {r}")));
        }
    }
    if let Some(b) = p.energy {
        if !b.is_finite() {
            return Err(SietError::param("energy", "must be finite"));
        }
    }
    if let Some(k) = p.kappa {
        if !(k > 0.0 && k.is_finite()) {
            return Err(SietError::param("kappa", format!("must be positive, got {k}")));
        }
    }
    if let Some(sigma) = p.sigma {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(SietError::param("sigma", format!("must be finite and >= 0, got {sigma}")));
        }
    }
    let sweep = match &p.m_list {
        Some(m_list) if config.command != Command::Counterexample && config.command != Command::LowerBound => {
            let mode = match p.sigma {
                Some(sigma) if sigma > 0.0 => SampleMode::Noisy {
                    sigma,
                    trials: p.trials.expect("resolved"),
                    seed: p.seed.expect("resolved"),
                    kernel: p.kernel.expect("resolved"),
                },
                _ => SampleMode::Noiseless,
            };
            let cfg = SweepConfig {
                m_list: m_list.clone(),
                mode,
                solver: p.solver.unwrap_or_default(),
                adversarial_scale: p.adversarial_scale,
            };
            cfg.validate()?;
            Some(cfg)
        }
        _ => None,
    };
    if let Some(kernel) = &p.kernel {
        if !(kernel.bandwidth_alpha > 0.0 && kernel.bandwidth_alpha.is_finite()) {
            return Err(SietError::param("kernel.bandwidth_alpha", "must be positive"));
        }
    }
    let file_digests = files.iter().map(config_digest).collect::<Result<Vec<_>>>()?;
    let digest = config_digest(&(&config, file_digests))?;
    Ok(Prepared {
        config,
        digest,
        cls,
        channel,
        harvester,
        samples,
        problem,
        source,
        sweep,
    })
}

/// What a completed run produced.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub digest: String,
    /// One-line summary for standard output.
    pub summary: String,
}

/// Resolve and validate `config` (paths relative to `base`), then run it
/// into a fresh directory under `out`. Nothing is written when validation
/// fails.
pub fn run(config: &ScenarioConfig, base: &Path, out: &Path) -> Result<RunOutcome> {
    let prep = prepare(config, base)?;
    let run_dir = out.join(format!("{}-{}", prep.config.command, &prep.digest[..16]));
    fs::create_dir_all(&run_dir)?;
    fs::write(run_dir.join("config.json"), prep.config.to_json()? + "\n")?;
    let summary = execute(&prep, &run_dir)?;
    fs::write(run_dir.join("summary.txt"), format!("{summary}\n"))?;
    Ok(RunOutcome {
        run_dir,
        digest: prep.digest,
        summary,
    })
}

/// Only validation: the resolved configuration and its digest.
pub fn check(config: &ScenarioConfig, base: &Path) -> Result<(ScenarioConfig, String)> {
    let prep = prepare(config, base)?;
    Ok((prep.config, prep.digest))
}

fn slope_summary(report: &LossReport, key: &str) -> String {
    match (report.fitted_slope.get(key).copied().flatten(), report.slope_ci.get(key).copied().flatten()) {
        (Some(s), Some([lo, hi])) => format!("{key} slope {s:.3} (95% CI [{lo:.3}, {hi:.3}])"),
        (Some(s), None) => format!("{key} slope {s:.3}"),
        _ => format!("{key}: no slope"),
    }
}

fn primary_key(report: &LossReport, prefix: &str) -> String {
    report
        .losses
        .keys()
        .find(|k| k.starts_with(prefix) && !k.ends_with("_se"))
        .cloned()
        .unwrap_or_else(|| prefix.to_string())
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

fn execute(prep: &Prepared, dir: &Path) -> Result<String> {
    let p = &prep.config.parameters;
    let cmd = prep.config.command;
    let solver = p.solver.unwrap_or_default();
    let fixed = || -> &DiscreteChannel {
        match prep.channel.as_ref().expect("command reads a channel") {
            ChannelFamily::Fixed { channel } => channel,
            ChannelFamily::Adversarial { .. } => unreachable!("rejected in prepare"),
        }
    };
    let rate_of = |cmax: f64| p.rate.unwrap_or_else(|| p.rate_fraction.expect("resolved") * cmax);
    match cmd {
        Command::Reconstruct => {
            let cls = prep.cls.as_ref().expect("resolved");
            if let Some(s) = &prep.samples {
                let (g, how) = if s.is_noiseless() {
                    (spline_interpolate(s, cls)?, "spline")
                } else {
                    let (g, diag) = local_poly_fit_with_diagnostics(s, cls, &p.kernel.unwrap_or_default())?;
                    fs::write(dir.join("diagnostics.jsonl"), diag.to_jsonl()?)?;
                    (g, "local polynomial")
                };
                fs::write(dir.join("reconstruction.csv"), g.to_csv())?;
                return Ok(format!(
                    "reconstruct: {how} from m={} samples, range [{:.4}, {:.4}]",
                    s.m(),
                    g.min(),
                    g.max()
                ));
            }
            let report = reconstruction_sweep(prep.harvester.as_ref().expect("resolved"), cls, prep.sweep.as_ref().expect("resolved"))?;
            report.write_to(dir)?;
            let key = if report.losses.contains_key("sup_mse") { "sup_mse" } else { "sup_error" };
            Ok(format!("reconstruct: {}", slope_summary(&report, key)))
        }
        Command::Capacity => {
            let ch = fixed();
            let (cmax, p_cap) = unconstrained_capacity(ch, &solver)?;
            let summary;
            match (&prep.harvester, p.energy, p.rate) {
                (Some(f), Some(b), None) => {
                    let op = capacity_energy(ch, f, b, &solver)?;
                    write_json(&dir.join("result.json"), &op)?;
                    summary = format!("capacity-energy C(b={b}) = {:.4} bits (C_max {cmax:.4})", op.rate);
                }
                (Some(f), None, Some(r)) => {
                    let op = energy_capacity(ch, f, r, &solver)?;
                    write_json(&dir.join("result.json"), &op)?;
                    summary = format!("energy-capacity B(r={r}) = {:.6} (C_max {cmax:.4} bits)", op.energy);
                }
                (_, Some(_), Some(_)) => {
                    return Err(SietError::param("energy", "give either energy or rate, not both"));
                }
                _ => {
                    let energy = prep.harvester.as_ref().map(|f| crate::channel::expected_energy(&p_cap, f));
                    let op = OperatingPoint {
                        rate: cmax,
                        energy: energy.unwrap_or(0.0),
                        p: p_cap,
                    };
                    write_json(&dir.join("result.json"), &op)?;
                    summary = format!("capacity {cmax:.4} bits");
                }
            }
            if let (Some(f), Some(n)) = (&prep.harvester, p.n_points) {
                let curve = sweep_curve(ch, f, n, &solver)?;
                fs::write(dir.join("curve.csv"), curve.to_csv())?;
                fs::write(dir.join("curve.json"), curve.to_json()? + "\n")?;
            }
            Ok(summary)
        }
        Command::SweepEnergyLoss => {
            let ch = fixed();
            let cmax = unconstrained_capacity(ch, &solver)?.0;
            let report = energy_loss_sweep(
                ch,
                prep.harvester.as_ref().expect("resolved"),
                prep.cls.as_ref().expect("resolved"),
                rate_of(cmax),
                prep.sweep.as_ref().expect("resolved"),
            )?;
            report.write_to(dir)?;
            Ok(format!("sweep-energy-loss: {}", slope_summary(&report, &primary_key(&report, "delta_e"))))
        }
        Command::SweepInfoLoss => {
            let fam = prep.channel.as_ref().expect("resolved");
            let beta = prep.harvester.as_ref().expect("resolved");
            let b = match (p.energy, fam) {
                (Some(b), _) => b,
                (None, ChannelFamily::Fixed { channel }) => {
                    let (cmax, _) = unconstrained_capacity(channel, &solver)?;
                    let lo = energy_capacity(channel, beta, cmax, &solver)?.energy;
                    let peak = channel.inputs().iter().map(|&x| beta.eval(x)).fold(f64::NEG_INFINITY, f64::max);
                    lo + p.energy_fraction.expect("resolved") * (peak - lo)
                }
                (None, ChannelFamily::Adversarial { .. }) => {
                    return Err(SietError::param("energy", "the adversarial family needs an absolute energy"));
                }
            };
            let report = info_loss_sweep(fam, beta, prep.cls.as_ref().expect("resolved"), b, prep.sweep.as_ref().expect("resolved"))?;
            report.write_to(dir)?;
            Ok(format!("sweep-info-loss: b={b:.6}, {}", slope_summary(&report, &primary_key(&report, "delta_i"))))
        }
        Command::LowerBound => {
            let ch = fixed();
            let cmax = unconstrained_capacity(ch, &solver)?.0;
            let cfg = LowerBoundConfig {
                m_list: p.m_list.clone().expect("resolved"),
                amplitude: p.amplitude.expect("resolved"),
                bump_scale: p.bump_scale.expect("resolved"),
                use_bump: p.use_bump.expect("resolved"),
                solver,
            };
            let report = energy_loss_lower_bound(ch, prep.cls.as_ref().expect("resolved"), rate_of(cmax), &cfg)?;
            report.write_to(dir)?;
            Ok(format!("lower-bound: {}", slope_summary(&report, "delta_e_prime")))
        }
        Command::Multicast => {
            let prob = prep.problem.as_ref().expect("resolved");
            let opts = MulticastOptions::default();
            let sol = multicast_capacity_with(prob, &opts)?;
            write_json(&dir.join("solution.json"), &sol)?;
            let cmc = max_min_capacity(prob.channels(), &opts)?.rate;
            let report = multicast_loss_sweep(
                prob,
                prep.cls.as_ref().expect("resolved"),
                rate_of(cmc),
                prep.sweep.as_ref().expect("resolved"),
                &opts,
            )?;
            report.write_to(dir)?;
            Ok(format!(
                "multicast: capacity {:.4} bits, {}",
                sol.rate,
                slope_summary(&report, &primary_key(&report, "delta_e_mc"))
            ))
        }
        Command::Jscc => {
            let curve = CurveOptions {
                n_points: p.n_points.expect("resolved"),
                kappa: p.kappa.expect("resolved"),
                solver,
            };
            let report = jscc_loss_sweep(
                prep.source.as_ref().expect("resolved"),
                fixed(),
                prep.harvester.as_ref().expect("resolved"),
                prep.cls.as_ref().expect("resolved"),
                prep.sweep.as_ref().expect("resolved"),
                &curve,
                p.direction.expect("resolved"),
            )?;
            report.write_to(dir)?;
            Ok(format!("jscc: {}", slope_summary(&report, &primary_key(&report, "delta_jscc"))))
        }
        Command::Counterexample => {
            let cfg = CounterexampleConfig {
                m_list: p.m_list.clone().expect("resolved"),
                lambda: p.lambda.expect("resolved"),
                k_bound: p.k_bound.expect("resolved"),
                amplitude: p.amplitude.expect("resolved"),
                bump_scale: p.bump_scale.expect("resolved"),
                use_bump: p.use_bump.expect("resolved"),
                n_out: p.n_out.expect("resolved"),
                concentration: p.concentration.expect("resolved"),
                kappa: p.kappa.expect("resolved"),
                n_points: p.n_points.expect("resolved"),
                direction: p.direction.expect("resolved"),
                source: prep.source.clone(),
            };
            let out = counterexample_scenario(&cfg)?;
            out.report.write_to(dir)?;
            write_json(
                &dir.join("floor.json"),
                &serde_json::json!({
                    "floor": out.floor,
                    "predicted_floor": out.predicted_floor,
                    "relative_variation": out.relative_variation,
                    "true_degenerate": out.true_degenerate,
                }),
            )?;
            Ok(format!(
                "counterexample: loss floor {:.4} (D_max - D_min {:.4}), relative variation {:.1}%",
                out.floor,
                out.predicted_floor,
                100.0 * out.relative_variation
            ))
        }
    }
}
