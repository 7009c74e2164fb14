//! The `solve`, `table` and `soss` verbs.

use crate::config::{Method, ProblemKind, RunConfig};
use crate::error::{CliError, Result};
use proxnewton_core::baselines::{fista_solve, prox_gradient_solve};
use proxnewton_core::hilbert::{assemble_inner_product, Mesh, PrimalVector};
use proxnewton_core::objective::CompositeProblem;
use proxnewton_core::problems::{make_quadratic_l1, make_toy_problem, soss_case, soss_table, ToyProblemParams, SOSS_CASES};
use proxnewton_core::proxnewton::{solve, SolveResult};
use rayon::prelude::*;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const HISTORY_HEADER: [&str; 8] =
    ["k", "omega", "accepted", "step_norm_X", "lambda", "F", "consecutive_accepts", "stationarity_residual"];

pub fn toy_problem(params: &ToyProblemParams) -> Result<CompositeProblem> {
    params.validate()?;
    let mesh = std::sync::Arc::new(Mesh::unit_square(params.refinement_level)?);
    let ip = std::sync::Arc::new(assemble_inner_product(&mesh)?);
    Ok(make_toy_problem(params, mesh, ip)?)
}

pub fn build_problem(cfg: &RunConfig) -> Result<CompositeProblem> {
    let p = match cfg.problem {
        ProblemKind::Toy => toy_problem(&cfg.toy)?,
        ProblemKind::QuadL1 => {
            let q = &cfg.quadl1;
            make_quadratic_l1(q.n, cfg.seed, q.kappa1, q.kappa2, &[q.l1_weight])?.problem
        }
        ProblemKind::Soss => {
            return Err(CliError::Config("problem = soss is run with the `soss` verb".into()));
        }
    };
    Ok(p.shift(cfg.shift))
}

/// Runs the configured method from `x = 0`.
pub fn run_method(cfg: &RunConfig, p: &CompositeProblem) -> Result<SolveResult> {
    let x0 = PrimalVector::zeros(p.dim());
    let result = match cfg.method {
        Method::ProxNewton => solve(p, &x0, &cfg.solver)?,
        Method::ProxGrad => prox_gradient_solve(p, &x0, &cfg.first_order())?,
        Method::Fista => fista_solve(p, &x0, &cfg.first_order())?,
    };
    Ok(result)
}

pub fn write_history<W: Write>(out: W, result: &SolveResult) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HISTORY_HEADER)?;
    for r in &result.history {
        w.write_record([
            r.k.to_string(),
            r.omega.to_string(),
            u8::from(r.accepted).to_string(),
            r.step_norm.to_string(),
            r.lambda.to_string(),
            r.f_value.to_string(),
            r.consecutive_accepts.to_string(),
            r.stationarity_residual.to_string(),
        ])?;
    }
    w.flush()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_history_file(path: &Path, result: &SolveResult) -> Result<()> {
    let file = create(path)?;
    write_history(file, result).map_err(|e| CliError::io(path, e))
}

/// `status=… N=… accepted=… trials=… final_F=… final_stationarity=… initial_F=…`
pub fn summary_line(method: Method, result: &SolveResult) -> String {
    format!(
        "method={} status={} N={} accepted={} trials={} final_F={} final_stationarity={} initial_F={}",
        method.as_str(),
        result.status.as_str(),
        result.iteration_count(),
        result.accepted_count(),
        result.trial_count(),
        result.final_f(),
        result.final_stationarity(),
        result.initial_f,
    )
}

pub struct SolveOutcome {
    pub result: SolveResult,
    pub summary: String,
}

/// Solves, writes the history CSV (if an output path is set) and returns the
/// summary. A non-converged run is reported as a solver error after the
/// history has been written.
pub fn run_solve(cfg: &RunConfig) -> Result<SolveOutcome> {
    let p = build_problem(cfg)?;
    let result = run_method(cfg, &p)?;
    if let Some(path) = &cfg.output {
        write_history_file(path, &result)?;
    }
    let summary = summary_line(cfg.method, &result);
    Ok(SolveOutcome { result, summary })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Count(usize),
    Fail(String),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Count(n) => write!(f, "{n}"),
            Cell::Fail(_) => f.write_str("FAIL"),
        }
    }
}

pub struct Grid {
    pub levels: Vec<u32>,
    pub alphas: Vec<f64>,
    /// Row-major: `cells[i * alphas.len() + j]` for `(levels[i], alphas[j])`.
    pub cells: Vec<Cell>,
}

impl Grid {
    pub fn cell(&self, level_idx: usize, alpha_idx: usize) -> &Cell {
        &self.cells[level_idx * self.alphas.len() + alpha_idx]
    }

    /// Tab separated, one row per mesh size `h = 2^-L`, one column per α.
    pub fn render(&self) -> String {
        let mut s = String::from("h");
        for a in &self.alphas {
            s.push_str(&format!("\talpha={a}"));
        }
        s.push('\n');
        for (i, l) in self.levels.iter().enumerate() {
            s.push_str(&format!("2^-{l}"));
            for j in 0..self.alphas.len() {
                s.push_str(&format!("\t{}", self.cell(i, j)));
            }
            s.push('\n');
        }
        s
    }
}

/// Per-cell history file name inside the cells directory.
pub fn cell_file_name(level: u32, alpha: f64) -> String {
    format!("L{level}_alpha{alpha}.csv")
}

/// Directory holding the per-cell histories for a grid written to `output`.
pub fn cells_dir(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "grid".into());
    output.with_file_name(format!("{stem}_cells"))
}

/// Runs every `(level, α)` toy cell in parallel. Failures become `FAIL`
/// cells; the grid itself always completes.
pub fn run_table(cfg: &RunConfig) -> Result<Grid> {
    let cells_dir = cfg.output.as_deref().map(cells_dir);
    let pairs: Vec<(u32, f64)> =
        cfg.table_levels.iter().flat_map(|&l| cfg.table_alphas.iter().map(move |&a| (l, a))).collect();
    let cells = pairs
        .par_iter()
        .map(|&(level, alpha)| {
            let mut cell_cfg = cfg.clone();
            cell_cfg.problem = ProblemKind::Toy;
            cell_cfg.toy.alpha = alpha;
            cell_cfg.toy.refinement_level = level;
            cell_cfg.output = cells_dir.as_ref().map(|d| d.join(cell_file_name(level, alpha)));
            match run_solve(&cell_cfg) {
                Ok(out) if out.result.status.is_converged() => Cell::Count(out.result.iteration_count()),
                Ok(out) => Cell::Fail(out.summary),
                Err(e) => Cell::Fail(e.to_string()),
            }
        })
        .collect();
    let grid = Grid { levels: cfg.table_levels.clone(), alphas: cfg.table_alphas.clone(), cells };
    if let Some(path) = &cfg.output {
        let mut f = create(path)?;
        f.write_all(grid.render().as_bytes()).and_then(|_| f.flush()).map_err(|e| CliError::io(path, e))?;
    }
    Ok(grid)
}

/// `j,xi,second_order_ratio,semismooth_ratio` for `ξ = 2^-j`.
pub fn run_soss(cfg: &RunConfig) -> Result<String> {
    let case = soss_case(&cfg.soss_case).ok_or_else(|| {
        CliError::Config(format!("unknown case `{}` (one of {})", cfg.soss_case, SOSS_CASES.join(", ")))
    })?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Config(e.to_string());
    w.write_record(["j", "xi", "second_order_ratio", "semismooth_ratio"]).map_err(io)?;
    for row in soss_table(&case, cfg.soss_max_j) {
        w.write_record([
            row.j.to_string(),
            row.xi.to_string(),
            row.second_order_ratio.to_string(),
            row.semismooth_ratio.to_string(),
        ])
        .map_err(io)?;
    }
    let text = String::from_utf8(w.into_inner().map_err(|e| CliError::Config(e.to_string()))?)
        .expect("csv output is utf-8");
    if let Some(path) = &cfg.output {
        let mut f = create(path)?;
        f.write_all(text.as_bytes()).and_then(|_| f.flush()).map_err(|e| CliError::io(path, e))?;
    }
    Ok(text)
}
