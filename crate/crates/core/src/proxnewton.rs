//! Globalized proximal Newton iteration.
//!
//! Each trial step minimizes the regularized model
//! `λ_ω(δ) = f'(x)δ + ½H_x(δ, δ) + (ω/2)‖δ‖²_X + g(x + δ) − g(x)`,
//! which is the scaled prox `P_g^{H_x+ωR}((H_x + ωR)x − f'(x)) − x`. A step is
//! accepted on sufficient decrease `F(x + δ) ≤ F(x) + γλ_ω(δ)` together with
//! `‖δ‖²_X ≤ −M̄λ_ω(δ)`; `ω` is doubled on rejection and shrunk by `2^(−n)`
//! after `n` consecutive acceptances, snapping to zero below `ω₀`.

use crate::error::{Error, Result};
use crate::hilbert::PrimalVector;
use crate::objective::{stationarity_residual, stationarity_residual_with, CompositeProblem, LocalModel, SecondOrderForm};
use crate::subsolver::{scaled_prox, ProxSubproblem, SubsolverConfig};

/// Trial steps are abandoned once `ω` exceeds this bound.
pub const OMEGA_CEILING: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub gamma: f64,
    /// Stop once `(1 + ω)‖Δx(ω)‖_X < epsilon`.
    pub epsilon: f64,
    /// Stop once an admissible step has `|λ_ω| < lambda_tol`.
    pub lambda_tol: f64,
    pub omega0: f64,
    pub omega_init: f64,
    pub increase_factor: f64,
    pub mbar: f64,
    /// Cap on accepted iterations.
    pub max_outer: usize,
    /// Report rejected trials in `iteration_count` too.
    pub count_rejected_trials: bool,
    pub subsolver: SubsolverConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            epsilon: 1e-8,
            lambda_tol: 1e-14,
            omega0: 1e-3,
            omega_init: 1.0,
            increase_factor: 2.0,
            mbar: 1e6,
            max_outer: 500,
            count_rejected_trials: false,
            subsolver: SubsolverConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.gamma > 0.0 && self.gamma < 1.0, "gamma must lie in (0, 1)"),
            (self.epsilon > 0.0, "epsilon must be positive"),
            (self.lambda_tol >= 0.0, "lambda_tol must be non-negative"),
            (self.omega0 > 0.0, "omega0 must be positive"),
            (self.omega_init >= 0.0, "omega_init must be non-negative"),
            (self.increase_factor > 1.0, "increase_factor must exceed 1"),
            (self.mbar > 0.0, "mbar must be positive"),
            (self.max_outer > 0, "max_outer must be positive"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Config(msg.into()));
            }
        }
        self.subsolver.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// Trial index, counting rejected trials.
    pub k: usize,
    pub omega: f64,
    pub step_norm: f64,
    pub lambda: f64,
    /// `F` at the iterate after this trial (unchanged on rejection).
    pub f_value: f64,
    pub accepted: bool,
    pub consecutive_accepts: usize,
    pub stationarity_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    ConvergedStepNorm,
    ConvergedLambda,
    MaxIter,
    SubproblemFailure,
}

impl SolveStatus {
    pub fn is_converged(self) -> bool {
        matches!(self, Self::ConvergedStepNorm | Self::ConvergedLambda)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ConvergedStepNorm => "converged_step_norm",
            Self::ConvergedLambda => "converged_lambda",
            Self::MaxIter => "max_iter",
            Self::SubproblemFailure => "subproblem_failure",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x_final: PrimalVector,
    pub status: SolveStatus,
    pub initial_f: f64,
    pub history: Vec<IterationRecord>,
    pub count_rejected_trials: bool,
}

impl SolveResult {
    pub fn accepted_count(&self) -> usize {
        self.history.iter().filter(|r| r.accepted).count()
    }

    pub fn trial_count(&self) -> usize {
        self.history.len()
    }

    /// Headline iteration count; accepted steps unless configured otherwise.
    pub fn iteration_count(&self) -> usize {
        if self.count_rejected_trials {
            self.trial_count()
        } else {
            self.accepted_count()
        }
    }

    pub fn final_f(&self) -> f64 {
        self.history.last().map_or(self.initial_f, |r| r.f_value)
    }

    pub fn final_stationarity(&self) -> f64 {
        self.history
            .iter()
            .rev()
            .find(|r| r.accepted)
            .map_or(f64::NAN, |r| r.stationarity_residual)
    }

    pub fn accepted(&self) -> impl Iterator<Item = &IterationRecord> {
        self.history.iter().filter(|r| r.accepted)
    }
}

/// Damped step `Δx(ω)` from a precomputed local model. With
/// `second_order = false` the bilinear form is dropped (proximal gradient).
pub(crate) fn damped_step(
    p: &CompositeProblem,
    model: &LocalModel,
    omega: f64,
    second_order: bool,
    cfg: &SubsolverConfig,
) -> Result<PrimalVector> {
    let ip = p.inner_product();
    let base = if second_order { model.hessian.clone() } else { SecondOrderForm::zero(p.dim()) };
    let operator = base.add_metric(omega, ip)?;
    let phi = operator.apply(&model.x)?.sub(&model.gradient);
    let sp = ProxSubproblem::new(operator, phi, p.nonsmooth(), ip)?;
    let y = scaled_prox(&sp, Some(&model.x), cfg)?.y;
    Ok(y.sub(&model.x))
}

/// `Δx(ω) = P_g^{H_x+ωR}((H_x + ωR)x − f'(x)) − x`
pub fn trial_step(
    p: &CompositeProblem,
    x: &PrimalVector,
    omega: f64,
    cfg: &SubsolverConfig,
) -> Result<PrimalVector> {
    damped_step(p, &p.local_model(x)?, omega, true, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Acceptance {
    Accept,
    Reject,
}

/// Decision from already evaluated quantities. `f_change` is
/// `F(x + δx) − F(x)`; `None` means the trial point could not be evaluated.
pub fn accept_from_values(f_change: Option<f64>, lambda: f64, step_norm: f64, cfg: &SolverConfig) -> Acceptance {
    let Some(f_change) = f_change else { return Acceptance::Reject };
    if step_norm == 0.0 && lambda == 0.0 {
        return Acceptance::Accept;
    }
    let bounded = step_norm * step_norm <= -cfg.mbar * lambda;
    let decrease = f_change <= cfg.gamma * lambda;
    if bounded && decrease && f_change.is_finite() {
        Acceptance::Accept
    } else {
        Acceptance::Reject
    }
}

/// Sufficient decrease and step-bound test for `δx` at `x`.
pub fn accept_test(
    p: &CompositeProblem,
    x: &PrimalVector,
    dx: &PrimalVector,
    omega: f64,
    cfg: &SolverConfig,
) -> Result<Acceptance> {
    let model = p.local_model(x)?;
    let lambda = model.lambda(p, dx, omega)?;
    let step_norm = p.inner_product().norm_primal(dx)?;
    let f_change = p.eval_change(x, dx).ok();
    Ok(accept_from_values(f_change, lambda, step_norm, cfg))
}

/// Next `ω` after a trial. `consecutive_accepts` includes the current step
/// when `accepted`.
pub fn omega_update(omega: f64, accepted: bool, consecutive_accepts: usize, cfg: &SolverConfig) -> f64 {
    if accepted {
        let next = omega * 0.5f64.powi(consecutive_accepts.min(1074) as i32);
        if next < cfg.omega0 {
            0.0
        } else {
            next
        }
    } else if omega > 0.0 {
        omega * cfg.increase_factor
    } else {
        cfg.omega0
    }
}

/// `‖f'(x + Δx) − f'(x) − (H_x + ωR)Δx‖_{X*}`
pub fn stationarity(p: &CompositeProblem, x: &PrimalVector, dx: &PrimalVector, omega: f64) -> Result<f64> {
    stationarity_residual(p, &p.local_model(x)?, dx, omega)
}

pub(crate) struct DriverOptions {
    pub second_order: bool,
    pub use_lambda_stop: bool,
    pub max_accepted: usize,
}

/// Runs the proximal Newton method from `x0`.
pub fn solve(p: &CompositeProblem, x0: &PrimalVector, cfg: &SolverConfig) -> Result<SolveResult> {
    let opts = DriverOptions { second_order: true, use_lambda_stop: true, max_accepted: cfg.max_outer };
    run_damped(p, x0, cfg, &opts)
}

pub(crate) fn run_damped(
    p: &CompositeProblem,
    x0: &PrimalVector,
    cfg: &SolverConfig,
    opts: &DriverOptions,
) -> Result<SolveResult> {
    cfg.validate()?;
    let ip = p.inner_product();
    let mut model = p.local_model(x0)?;
    let initial_f = model.value();
    // tracked as a running sum of accurately evaluated changes
    let mut f_current = initial_f;
    let mut omega = cfg.omega_init;
    let mut consecutive = 0usize;
    let mut history = Vec::new();
    let mut accepted_total = 0usize;

    let status = loop {
        if accepted_total >= opts.max_accepted {
            break SolveStatus::MaxIter;
        }
        let k = history.len();
        let step = match damped_step(p, &model, omega, opts.second_order, &cfg.subsolver) {
            Ok(dx) => Some(dx),
            Err(Error::NoConvergence { .. } | Error::NonconvexSubproblem { .. } | Error::NotPositiveDefinite { .. }) => {
                None
            }
            Err(e) => return Err(e),
        };
        let Some(dx) = step else {
            consecutive = 0;
            history.push(IterationRecord {
                k,
                omega,
                step_norm: f64::NAN,
                lambda: f64::NAN,
                f_value: f_current,
                accepted: false,
                consecutive_accepts: 0,
                stationarity_residual: f64::NAN,
            });
            omega = omega_update(omega, false, 0, cfg);
            if omega > OMEGA_CEILING {
                break SolveStatus::SubproblemFailure;
            }
            continue;
        };

        let lambda = model.lambda_with(p, &dx, omega, opts.second_order)?;
        let step_norm = ip.norm_primal(&dx)?;
        let x_trial = model.x.add_scaled(1.0, &dx);
        let f_change = p.eval_change(&model.x, &dx).ok();
        let decision = accept_from_values(f_change, lambda, step_norm, cfg);
        let residual =
            stationarity_residual_with(p, &model, &dx, omega, opts.second_order).unwrap_or(f64::NAN);
        let accepted = decision == Acceptance::Accept;
        let step_converged = (1.0 + omega) * step_norm < cfg.epsilon;

        if accepted {
            consecutive += 1;
            accepted_total += 1;
        } else {
            consecutive = 0;
        }
        let omega_used = omega;
        if accepted {
            model = p.local_model(&x_trial)?;
            f_current += f_change.unwrap_or(0.0);
        }
        history.push(IterationRecord {
            k,
            omega: omega_used,
            step_norm,
            lambda,
            f_value: f_current,
            accepted,
            consecutive_accepts: consecutive,
            stationarity_residual: residual,
        });

        if step_converged {
            break SolveStatus::ConvergedStepNorm;
        }
        if accepted && opts.use_lambda_stop && lambda.abs() < cfg.lambda_tol {
            break SolveStatus::ConvergedLambda;
        }
        omega = omega_update(omega, accepted, consecutive, cfg);
        if omega > OMEGA_CEILING {
            break SolveStatus::SubproblemFailure;
        }
    };

    Ok(SolveResult {
        x_final: model.x,
        status,
        initial_f,
        history,
        count_rejected_trials: cfg.count_rejected_trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{CsrMatrix, InnerProduct};
    use crate::objective::NonsmoothPart;
    use crate::problems::QuadraticSmooth;
    use std::sync::Arc;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn omega_schedule_examples() {
        let c = cfg();
        assert_eq!(omega_update(1.0, false, 0, &c), 2.0);
        assert_eq!(omega_update(0.0, false, 0, &c), c.omega0);
        let w1 = omega_update(8.0, true, 1, &c);
        let w2 = omega_update(w1, true, 2, &c);
        let w3 = omega_update(w2, true, 3, &c);
        assert_eq!((w1, w2, w3), (4.0, 1.0, 0.125));
        assert_eq!(omega_update(1e-3, true, 1, &c), 0.0);
        assert_eq!(omega_update(0.0, true, 4, &c), 0.0);
    }

    /// `f = ½‖x‖²_X` in a non-trivial metric, `g ≡ 0`.
    fn half_norm_problem() -> CompositeProblem {
        let m = CsrMatrix::from_dense(3, &[2.0, -0.5, 0.0, -0.5, 2.0, -0.5, 0.0, -0.5, 2.0]);
        let smooth = QuadraticSmooth::new(m.clone(), vec![0.0; 3]).unwrap();
        CompositeProblem::new(
            Arc::new(smooth),
            NonsmoothPart::zero(3),
            Arc::new(InnerProduct::from_matrix(m).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn damped_step_on_half_norm() {
        let p = half_norm_problem();
        let x = PrimalVector::new(vec![1.0, -2.0, 0.5]);
        for omega in [0.0, 0.5, 3.0] {
            let dx = trial_step(&p, &x, omega, &SubsolverConfig::default()).unwrap();
            let expected = x.scale(-1.0 / (1.0 + omega));
            for (a, b) in dx.iter().zip(expected.iter()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn exact_model_is_accepted() {
        let p = half_norm_problem();
        let x = PrimalVector::new(vec![1.0, -2.0, 0.5]);
        let dx = trial_step(&p, &x, 0.0, &SubsolverConfig::default()).unwrap();
        assert_eq!(accept_test(&p, &x, &dx, 0.0, &cfg()).unwrap(), Acceptance::Accept);
        assert!(stationarity(&p, &x, &dx, 0.0).unwrap() < 1e-10);
        assert_eq!(stationarity(&p, &x, &PrimalVector::zeros(3), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn ascent_step_is_rejected() {
        let p = half_norm_problem();
        let x = PrimalVector::new(vec![1.0, -2.0, 0.5]);
        // δ = +x increases both F and λ
        assert_eq!(accept_test(&p, &x, &x, 0.0, &cfg()).unwrap(), Acceptance::Reject);
        assert_eq!(accept_from_values(None, -1.0, 1.0, &cfg()), Acceptance::Reject);
        assert_eq!(accept_from_values(Some(0.0), 0.0, 0.0, &cfg()), Acceptance::Accept);
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        assert!(SolverConfig { gamma: 1.0, ..cfg() }.validate().is_err());
        assert!(SolverConfig { increase_factor: 1.0, ..cfg() }.validate().is_err());
        assert!(SolverConfig { omega0: 0.0, ..cfg() }.validate().is_err());
    }

    #[test]
    fn solves_half_norm_to_zero() {
        let p = half_norm_problem();
        let res = solve(&p, &PrimalVector::new(vec![1.0, -2.0, 0.5]), &cfg()).unwrap();
        assert!(res.status.is_converged());
        assert!(p.inner_product().norm_primal(&res.x_final).unwrap() <= 1e-8);
    }
}
