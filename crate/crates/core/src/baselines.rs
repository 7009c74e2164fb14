//! First-order comparison methods: proximal gradient with the X-metric and
//! the ω-schedule of the Newton solver, and FISTA with backtracking on the
//! metric scaling `L`.

use crate::error::{Error, Result};
use crate::hilbert::PrimalVector;
use crate::objective::{stationarity_residual_with, CompositeProblem, SecondOrderForm};
use crate::proxnewton::{
    damped_step, run_damped, DriverOptions, IterationRecord, SolveResult, SolveStatus, SolverConfig,
};
use crate::subsolver::{scaled_prox, ProxSubproblem, SubsolverConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderConfig {
    /// Initial `ω` (proximal gradient) or `L` (FISTA).
    pub initial_step_scale: f64,
    /// Step multiplier on a failed test; `ω` and `L` grow by its inverse.
    pub backtracking_shrink: f64,
    pub max_iter: usize,
    pub stop_step_norm: f64,
    pub gamma: f64,
    pub omega0: f64,
    pub mbar: f64,
    pub subsolver: SubsolverConfig,
}

impl Default for FirstOrderConfig {
    fn default() -> Self {
        Self {
            initial_step_scale: 1.0,
            backtracking_shrink: 0.5,
            max_iter: 1_000_000,
            stop_step_norm: 1e-8,
            gamma: 0.5,
            omega0: 1e-3,
            mbar: 1e6,
            subsolver: SubsolverConfig::default(),
        }
    }
}

impl FirstOrderConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.initial_step_scale > 0.0
            && self.backtracking_shrink > 0.0
            && self.backtracking_shrink < 1.0
            && self.max_iter > 0
            && self.stop_step_norm > 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid first-order configuration {self:?}")));
        }
        self.subsolver.validate()
    }

    fn damped(&self) -> SolverConfig {
        SolverConfig {
            gamma: self.gamma,
            epsilon: self.stop_step_norm,
            lambda_tol: 0.0,
            omega0: self.omega0,
            omega_init: self.initial_step_scale,
            increase_factor: 1.0 / self.backtracking_shrink,
            mbar: self.mbar,
            max_outer: self.max_iter,
            count_rejected_trials: false,
            subsolver: self.subsolver,
        }
    }
}

/// Proximal gradient: the damped subproblem with `H_x` dropped,
/// `δ = argmin f'(x)δ + (ω/2)‖δ‖²_X + g(x + δ) − g(x)`.
pub fn prox_gradient_solve(p: &CompositeProblem, x0: &PrimalVector, cfg: &FirstOrderConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let opts = DriverOptions { second_order: false, use_lambda_stop: false, max_accepted: cfg.max_iter };
    run_damped(p, x0, &cfg.damped(), &opts)
}

/// One proximal gradient step `δ(ω)` at `x`.
pub fn prox_gradient_step(
    p: &CompositeProblem,
    x: &PrimalVector,
    omega: f64,
    cfg: &SubsolverConfig,
) -> Result<PrimalVector> {
    damped_step(p, &p.local_model(x)?, omega, false, cfg)
}

/// `t_{k+1} = (1 + √(1 + 4t_k²)) / 2`
pub fn fista_momentum(t: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
}

/// FISTA in the X-metric. Each prox is the scaled prox with `H̃ = L·R`; `L`
/// is doubled (for the default shrink) until
/// `f(x₊) ≤ f(y) + f'(y)(x₊ − y) + (L/2)‖x₊ − y‖²_X`. Failed backtracking
/// trials are logged as rejected rows.
pub fn fista_solve(p: &CompositeProblem, x0: &PrimalVector, cfg: &FirstOrderConfig) -> Result<SolveResult> {
    cfg.validate()?;
    if !p.nonsmooth().is_convex() {
        return Err(Error::Config("FISTA requires a convex nonsmooth part".into()));
    }
    let ip = p.inner_product();
    let grow = 1.0 / cfg.backtracking_shrink;
    let initial_f = p.eval_f_total(x0)?;
    let mut x_prev = x0.clone();
    let mut y = x0.clone();
    let mut t = 1.0;
    let mut lip = cfg.initial_step_scale;
    let mut history = Vec::new();
    let mut accepted = 0usize;
    let mut f_current = initial_f;

    let status = loop {
        if accepted >= cfg.max_iter {
            break SolveStatus::MaxIter;
        }
        let model = p.local_model(&y)?;
        // backtracking on L at the extrapolated point y
        let (x_next, dx, lambda) = loop {
            let k = history.len();
            let operator = SecondOrderForm::zero(p.dim()).add_metric(lip, ip)?;
            let phi = operator.apply(&y)?.sub(&model.gradient);
            let sp = ProxSubproblem::new(operator, phi, p.nonsmooth(), ip)?;
            let candidate = scaled_prox(&sp, Some(&y), &cfg.subsolver)?.y;
            let dx = candidate.sub(&y);
            let step_sq = ip.matrix().quadratic(&dx)?;
            // f(x₊) ≤ f(y) + f'(y)(x₊ − y) + (L/2)‖x₊ − y‖², as a change from f(y)
            let predicted = model.gradient.apply(&dx) + 0.5 * lip * step_sq;
            let actual = p.smooth().value_change(&y, &dx).unwrap_or(f64::INFINITY);
            if actual <= predicted {
                let lambda = model.lambda_with(p, &dx, lip, false)?;
                break (candidate, dx, lambda);
            }
            history.push(IterationRecord {
                k,
                omega: lip,
                step_norm: step_sq.max(0.0).sqrt(),
                lambda: f64::NAN,
                f_value: f_current,
                accepted: false,
                consecutive_accepts: 0,
                stationarity_residual: f64::NAN,
            });
            lip *= grow;
            if lip > crate::proxnewton::OMEGA_CEILING {
                return Ok(SolveResult {
                    x_final: x_prev,
                    status: SolveStatus::SubproblemFailure,
                    initial_f,
                    history,
                    count_rejected_trials: false,
                });
            }
        };

        accepted += 1;
        let step_norm = ip.norm_primal(&dx)?;
        f_current = p.eval_f_total(&x_next)?;
        let residual = stationarity_residual_with(p, &model, &dx, lip, false).unwrap_or(f64::NAN);
        history.push(IterationRecord {
            k: history.len(),
            omega: lip,
            step_norm,
            lambda,
            f_value: f_current,
            accepted: true,
            consecutive_accepts: accepted,
            stationarity_residual: residual,
        });
        if (1.0 + lip) * step_norm < cfg.stop_step_norm {
            x_prev = x_next;
            break SolveStatus::ConvergedStepNorm;
        }
        let t_next = fista_momentum(t);
        y = x_next.add_scaled((t - 1.0) / t_next, &x_next.sub(&x_prev));
        x_prev = x_next;
        t = t_next;
    };

    Ok(SolveResult { x_final: x_prev, status, initial_f, history, count_rejected_trials: false })
}
