use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::Failure;

pub const CONFIG_SCHEMA: &str = "sympinf.config/1";

#[derive(Debug, Parser)]
#[command(
    name = "sympinf",
    version,
    about = "Truncated symplectic group experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Algebraic identity and property suites.
    Check(Common),
    /// Embed a circle diffeomorphism and report predicates and decay.
    Embed(Common),
    /// The symplectic operator outside the image of the embedding.
    Counterexample(Common),
    /// Drift matrix of a covariance, with the oracle comparison.
    Drift(Common),
    /// Simulate the group valued Brownian motion.
    Simulate(Common),
    /// Monte-Carlo mean of X_T against exp(TD/2).
    Meanflow(Common),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Check(_) => "check",
            Self::Embed(_) => "embed",
            Self::Counterexample(_) => "counterexample",
            Self::Drift(_) => "drift",
            Self::Simulate(_) => "simulate",
            Self::Meanflow(_) => "meanflow",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Self::Check(c)
            | Self::Embed(c)
            | Self::Counterexample(c)
            | Self::Drift(c)
            | Self::Simulate(c)
            | Self::Meanflow(c) => c,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Truncation order N.
    #[arg(long)]
    pub n: Option<usize>,
    /// Sample grid size M.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Time horizon T.
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Points on the image curve.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Stepping scheme.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Covariance spec (JSON).
    #[arg(long)]
    pub cov: Option<PathBuf>,
    /// Diffeomorphism coefficients (JSON).
    #[arg(long)]
    pub diffeo: Option<PathBuf>,
    /// Output directory; files in it are never overwritten.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Tolerance override, `name=value`; repeatable.
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    pub tol: Vec<String>,
}

/// Fully resolved and validated parameters of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema: String,
    pub command: String,
    pub n: usize,
    pub grid: usize,
    pub dt: f64,
    pub t: f64,
    pub paths: usize,
    pub seed: u64,
    pub samples: usize,
    pub scheme: String,
    pub cov: Option<PathBuf>,
    pub diffeo: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub tolerances: BTreeMap<String, f64>,
}

/// Tolerance names each command understands, with defaults.
pub fn default_tolerances(command: &str) -> BTreeMap<String, f64> {
    let pairs: &[(&str, f64)] = match command {
        "check" => &[
            ("identities", 1e-10),
            ("basis", 1e-12),
            ("projection", 1e-12),
            ("counterexample", 1e-12),
            ("vector-fields", 1e-12),
            ("drift", 1e-12),
            ("trace", 1e-12),
        ],
        "embed" => &[("omega", 1e-6)],
        "counterexample" => &[("symplectic", 1e-12), ("ellipse", 1e-10)],
        "drift" => &[("oracle", 1e-12)],
        "simulate" => &[("defect", f64::MAX)],
        "meanflow" => &[("band", 3.0)],
        _ => &[],
    };
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Validation(msg.into())
}

impl RunConfig {
    pub fn resolve(cmd: &Command) -> Result<Self, Failure> {
        let c = cmd.common();
        let name = cmd.name();
        let n_default = match name {
            "embed" => 16,
            "counterexample" | "meanflow" => 4,
            _ => 8,
        };
        let n = c.n.unwrap_or(n_default);
        let mut tolerances = default_tolerances(name);
        for spec in &c.tol {
            let (k, v) = spec
                .split_once('=')
                .ok_or_else(|| invalid(format!("tolerance `{spec}` is not name=value")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| invalid(format!("tolerance `{spec}` has a non-numeric value")))?;
            let slot = tolerances
                .get_mut(k.trim())
                .ok_or_else(|| invalid(format!("unknown tolerance `{}` for {name}", k.trim())))?;
            *slot = v;
        }
        let cfg = Self {
            schema: CONFIG_SCHEMA.to_string(),
            command: name.to_string(),
            n,
            grid: c.grid.unwrap_or(8 * n),
            dt: c.dt.unwrap_or(1e-3),
            t: c.t.unwrap_or(1.0),
            paths: c
                .paths
                .unwrap_or(if name == "meanflow" { 1024 } else { 64 }),
            seed: c.seed.unwrap_or(42),
            samples: c.samples.unwrap_or(360),
            scheme: c
                .scheme
                .clone()
                .unwrap_or_else(|| sympinf::sde::DEFAULT_SCHEME.to_string()),
            cov: c.cov.clone(),
            diffeo: c.diffeo.clone(),
            out: c.out.clone(),
            tolerances,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        if self.n == 0 {
            return Err(invalid("--n must be at least 1"));
        }
        if self.grid < 4 * self.n {
            return Err(invalid(format!(
                "--grid {} is below 4N = {}",
                self.grid,
                4 * self.n
            )));
        }
        for (name, v) in [("--dt", self.dt), ("--t", self.t)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!(
                    "{name} must be a positive number, got {v}"
                )));
            }
        }
        if self.dt > self.t {
            return Err(invalid(format!("--dt {} exceeds --t {}", self.dt, self.t)));
        }
        if self.paths == 0 {
            return Err(invalid("--paths must be at least 1"));
        }
        if self.samples == 0 {
            return Err(invalid("--samples must be at least 1"));
        }
        for (k, v) in &self.tolerances {
            if v.is_nan() || *v < 0.0 {
                return Err(invalid(format!("tolerance {k} must be non-negative")));
            }
        }
        Ok(())
    }

    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances[name]
    }
}
