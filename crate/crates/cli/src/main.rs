use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use siet::scenario::{self, Command, ScenarioConfig};
use siet::SietError;

/// Sampled-harvester information/energy experiments.
#[derive(Parser, Debug)]
#[command(name = "siet", version, about)]
struct Cli {
    /// Scenario JSON; flags override its parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed of the Monte-Carlo trials.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory under which the run directory is created.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Validate and print the resolved configuration without running.
    #[arg(long, global = true)]
    check: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Fit samples, or sweep reconstruction error over m.
    Reconstruct(Overrides),
    /// Unconstrained, energy-constrained or rate-constrained capacity.
    Capacity(Overrides),
    /// Energy loss of designing from samples, over m.
    SweepEnergyLoss(Overrides),
    /// Information loss of designing from samples, over m.
    SweepInfoLoss(Overrides),
    /// Bump-pair lower bound on the energy loss.
    LowerBound(Overrides),
    /// Max-min multicast capacity and multicast losses.
    Multicast(Overrides),
    /// Energy-distortion curve projection loss.
    Jscc(Overrides),
    /// Constant harvester against its bumpy estimate.
    Counterexample(Overrides),
    /// Run whatever command the --config file names.
    Run(Overrides),
}

#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long)]
    lambda: Option<u32>,
    #[arg(long)]
    k_bound: Option<f64>,
    /// Comma-separated sample counts.
    #[arg(long, value_delimiter = ',')]
    m_list: Option<Vec<usize>>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    rate_fraction: Option<f64>,
    #[arg(long)]
    energy: Option<f64>,
    #[arg(long)]
    energy_fraction: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    n_points: Option<usize>,
    /// Channel spec as JSON, e.g. '{"kind":"bsc","crossover":0.11}'.
    #[arg(long)]
    channel: Option<String>,
    /// Harvester spec as JSON.
    #[arg(long)]
    harvester: Option<String>,
    /// Any other parameter: `key=<json>`.
    #[arg(long = "set", value_name = "KEY=JSON")]
    set: Vec<String>,
}

impl Overrides {
    fn to_map(&self, seed: Option<u64>) -> Result<BTreeMap<String, Value>, String> {
        let mut m = BTreeMap::new();
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| format!("`--set {kv}`: expected key=value"))?;
            // Bare words are taken as strings.
            let v = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
            m.insert(k.to_string(), v);
        }
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("lambda", self.lambda.map(|v| json!(v)));
        put("k_bound", self.k_bound.map(|v| json!(v)));
        put("m_list", self.m_list.as_ref().map(|v| json!(v)));
        put("sigma", self.sigma.map(|v| json!(v)));
        put("trials", self.trials.map(|v| json!(v)));
        put("rate", self.rate.map(|v| json!(v)));
        put("rate_fraction", self.rate_fraction.map(|v| json!(v)));
        put("energy", self.energy.map(|v| json!(v)));
        put("energy_fraction", self.energy_fraction.map(|v| json!(v)));
        put("kappa", self.kappa.map(|v| json!(v)));
        put("n_points", self.n_points.map(|v| json!(v)));
        put("seed", seed.map(|v| json!(v)));
        for (k, text) in [("channel", &self.channel), ("harvester", &self.harvester)] {
            if let Some(t) = text {
                let v = serde_json::from_str(t).map_err(|e| format!("`--{k}`: {e}"))?;
                m.insert(k.to_string(), v);
            }
        }
        Ok(m)
    }
}

fn fail(kind: &str, code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "exit_code": code, "message": message.to_string() }));
    ExitCode::from(code)
}

fn kind_of(code: u8) -> &'static str {
    match code {
        2 => "validation",
        3 => "infeasible",
        _ => "numerical",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("validation", 2, e.to_string().trim_end()),
    };
    let (command, ov) = match &cli.command {
        Cmd::Reconstruct(o) => (Some(Command::Reconstruct), o),
        Cmd::Capacity(o) => (Some(Command::Capacity), o),
        Cmd::SweepEnergyLoss(o) => (Some(Command::SweepEnergyLoss), o),
        Cmd::SweepInfoLoss(o) => (Some(Command::SweepInfoLoss), o),
        Cmd::LowerBound(o) => (Some(Command::LowerBound), o),
        Cmd::Multicast(o) => (Some(Command::Multicast), o),
        Cmd::Jscc(o) => (Some(Command::Jscc), o),
        Cmd::Counterexample(o) => (Some(Command::Counterexample), o),
        Cmd::Run(o) => (None, o),
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return fail("validation", 2, "`--threads` must be positive");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail("numerical", 4, e);
        }
    }
    let (base, config) = match &cli.config {
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => return fail("validation", 2, format!("cannot read `{}`: {e}", path.display())),
            };
            let cfg = match ScenarioConfig::from_json(&text) {
                Ok(c) => c,
                Err(e) => return fail("validation", 2, e),
            };
            if let Some(c) = command {
                if c != cfg.command {
                    return fail(
                        "validation",
                        2,
                        format!("`command`: the config file says `{}` but `{c}` was requested", cfg.command),
                    );
                }
            }
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (base, cfg)
        }
        None => match command {
            Some(c) => (PathBuf::from("."), ScenarioConfig::new(c)),
            None => return fail("validation", 2, "`run` needs --config"),
        },
    };
    let overrides = match ov.to_map(cli.seed) {
        Ok(m) => m,
        Err(e) => return fail("validation", 2, e),
    };
    let config = match config.with_overrides(&overrides) {
        Ok(c) => c,
        Err(e) => return fail("validation", 2, e),
    };
    if cli.check {
        return match scenario::check(&config, &base) {
            Ok((resolved, digest)) => {
                println!("{}", json!({ "digest": digest, "config": resolved }));
                ExitCode::SUCCESS
            }
            Err(e) => report(&e),
        };
    }
    match scenario::run(&config, &base, &cli.out) {
        Ok(out) => {
            println!("{} [{}]", out.summary, out.run_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => report(&e),
    }
}

fn report(e: &SietError) -> ExitCode {
    let code = scenario::exit_code(e);
    fail(kind_of(code), code, e)
}
