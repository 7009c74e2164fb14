//! `key = value` run configuration. Blank lines and `#` comments are
//! ignored; there are no sections. Unknown keys are rejected.

use crate::error::{CliError, Result};
use proxnewton_core::baselines::FirstOrderConfig;
use proxnewton_core::problems::ToyProblemParams;
use proxnewton_core::proxnewton::SolverConfig;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ProxNewton,
    ProxGrad,
    Fista,
}

impl FromStr for Method {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proxnewton" => Ok(Method::ProxNewton),
            "proxgrad" => Ok(Method::ProxGrad),
            "fista" => Ok(Method::Fista),
            _ => Err(CliError::Config(format!("unknown method `{s}` (proxnewton, proxgrad, fista)"))),
        }
    }
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ProxNewton => "proxnewton",
            Method::ProxGrad => "proxgrad",
            Method::Fista => "fista",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Toy,
    QuadL1,
    Soss,
}

impl FromStr for ProblemKind {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toy" => Ok(ProblemKind::Toy),
            "quadl1" => Ok(ProblemKind::QuadL1),
            "soss" => Ok(ProblemKind::Soss),
            _ => Err(CliError::Config(format!("unknown problem `{s}` (toy, quadl1, soss)"))),
        }
    }
}

/// Random quadratic + ℓ¹ instance parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadL1Params {
    pub n: usize,
    pub kappa1: f64,
    pub kappa2: f64,
    pub l1_weight: f64,
}

impl Default for QuadL1Params {
    fn default() -> Self {
        Self { n: 50, kappa1: 0.5, kappa2: 0.0, l1_weight: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub problem: ProblemKind,
    pub toy: ToyProblemParams,
    pub quadl1: QuadL1Params,
    /// κ of the equivalent shifted problem `f − (κ/2)‖·‖², g + (κ/2)‖·‖²`.
    pub shift: f64,
    pub solver: SolverConfig,
    pub initial_step_scale: f64,
    pub max_iter: usize,
    pub table_levels: Vec<u32>,
    pub table_alphas: Vec<f64>,
    pub soss_case: String,
    pub soss_max_j: u32,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: Method::ProxNewton,
            problem: ProblemKind::Toy,
            toy: ToyProblemParams::default(),
            quadl1: QuadL1Params::default(),
            shift: 0.0,
            solver: SolverConfig::default(),
            initial_step_scale: 1.0,
            max_iter: 1_000_000,
            table_levels: vec![4],
            table_alphas: vec![0.0, 40.0, 80.0],
            soss_case: "max_sq".into(),
            soss_max_j: 40,
            seed: 1,
            output: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| CliError::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Config(format!("bad value `{value}` for `{key}`"))),
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!("line {}: expected `key = value`", lineno + 1)));
            };
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let s = &mut self.solver;
        let inner = &mut s.subsolver;
        match key {
            "method" => self.method = v.parse()?,
            "problem" => self.problem = v.parse()?,
            "alpha" => self.toy.alpha = parse(key, v)?,
            "beta" => self.toy.beta = parse(key, v)?,
            "c" => self.toy.c = parse(key, v)?,
            "rho" => self.toy.rho = parse(key, v)?,
            "refinements" => self.toy.refinement_level = parse(key, v)?,
            "n" => self.quadl1.n = parse(key, v)?,
            "kappa1" => self.quadl1.kappa1 = parse(key, v)?,
            "kappa2" => self.quadl1.kappa2 = parse(key, v)?,
            "l1_weight" => self.quadl1.l1_weight = parse(key, v)?,
            "shift" => self.shift = parse(key, v)?,
            "gamma" => s.gamma = parse(key, v)?,
            "epsilon" => s.epsilon = parse(key, v)?,
            "lambda_tol" => s.lambda_tol = parse(key, v)?,
            "omega0" => s.omega0 = parse(key, v)?,
            "omega_init" => s.omega_init = parse(key, v)?,
            "increase_factor" => s.increase_factor = parse(key, v)?,
            "mbar" => s.mbar = parse(key, v)?,
            "max_outer" => s.max_outer = parse(key, v)?,
            "count_rejected" => s.count_rejected_trials = parse_bool(key, v)?,
            "inner_energy_tol" => inner.energy_tol = parse(key, v)?,
            "inner_correction_tol" => inner.correction_tol = parse(key, v)?,
            "inner_max_cycles" => inner.max_cycles = parse(key, v)?,
            "line_search_shrink" => inner.line_search_shrink = parse(key, v)?,
            "initial_step_scale" => self.initial_step_scale = parse(key, v)?,
            "max_iter" => self.max_iter = parse(key, v)?,
            "table_refinements" => self.table_levels = parse_list(key, v)?,
            "table_alphas" => self.table_alphas = parse_list(key, v)?,
            "case" => self.soss_case = v.to_string(),
            "max_j" => self.soss_max_j = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "output" => self.output = Some(PathBuf::from(v)),
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.first_order().validate()?;
        if self.problem == ProblemKind::Toy {
            self.toy.validate()?;
            if !(1..=12).contains(&self.toy.refinement_level) {
                return Err(CliError::Config("refinements must be in 1..=12".into()));
            }
        }
        if self.table_levels.is_empty() || self.table_alphas.is_empty() {
            return Err(CliError::Config("table lists must not be empty".into()));
        }
        if self.quadl1.n == 0 {
            return Err(CliError::Config("n must be positive".into()));
        }
        if !(1..=60).contains(&self.soss_max_j) {
            return Err(CliError::Config("max_j must be in 1..=60".into()));
        }
        Ok(())
    }

    /// First-order settings derived from the shared solver keys.
    pub fn first_order(&self) -> FirstOrderConfig {
        let s: &SolverConfig = &self.solver;
        FirstOrderConfig {
            initial_step_scale: self.initial_step_scale,
            backtracking_shrink: 1.0 / s.increase_factor,
            max_iter: self.max_iter,
            stop_step_norm: s.epsilon,
            gamma: s.gamma,
            omega0: s.omega0,
            mbar: s.mbar,
            subsolver: s.subsolver,
        }
    }
}
