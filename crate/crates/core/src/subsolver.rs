//! Scaled dual proximal mapping
//!
//! `P_g^H(φ) = argmin_y g(y) + ½H(y, y) − φ(y)`
//!
//! evaluated by a single-level truncated nonsmooth Newton scheme: exact
//! nonsmooth Gauss–Seidel sweeps, truncation of coordinates sitting at the
//! kink, a direct solve on the remaining coordinates and a backtracking
//! line search on the full subproblem objective. A plain coordinate-descent
//! solver is kept alongside as a reference.

use crate::error::{check_len, Error, Result};
use crate::hilbert::{BandedCholesky, CsrMatrix, DualVector, InnerProduct, PrimalVector};
use crate::objective::{NonsmoothPart, SecondOrderForm};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsolverConfig {
    pub energy_tol: f64,
    /// Bound on the X-norm of the last cycle's correction.
    pub correction_tol: f64,
    pub max_cycles: usize,
    pub line_search_shrink: f64,
}

impl Default for SubsolverConfig {
    fn default() -> Self {
        Self { energy_tol: 1e-12, correction_tol: 1e-10, max_cycles: 200, line_search_shrink: 0.5 }
    }
}

impl SubsolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.energy_tol > 0.0
            && self.correction_tol > 0.0
            && self.max_cycles > 0
            && self.line_search_shrink > 0.0
            && self.line_search_shrink < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid subsolver configuration {self:?}")))
        }
    }
}

const MAX_HALVINGS: usize = 30;

/// One instance of the prox subproblem. `operator` already contains any
/// `ωR` regularization; the quadratic part of `g` is folded in internally.
#[derive(Debug, Clone)]
pub struct ProxSubproblem<'a> {
    operator: SecondOrderForm,
    phi: DualVector,
    nonsmooth: &'a NonsmoothPart,
    ip: &'a InnerProduct,
    /// `operator + κ₂R`, the matrix the separable problem actually sees.
    effective: CsrMatrix,
}

impl<'a> ProxSubproblem<'a> {
    pub fn new(
        operator: SecondOrderForm,
        phi: DualVector,
        nonsmooth: &'a NonsmoothPart,
        ip: &'a InnerProduct,
    ) -> Result<Self> {
        let n = ip.dim();
        check_len(n, operator.dim())?;
        check_len(n, phi.len())?;
        check_len(n, nonsmooth.dim())?;
        let effective = operator.add_metric(nonsmooth.quadratic_weight(), ip)?.into_matrix();
        Ok(Self { operator, phi, nonsmooth, ip, effective })
    }

    pub fn dim(&self) -> usize {
        self.phi.len()
    }

    pub fn operator(&self) -> &SecondOrderForm {
        &self.operator
    }

    pub fn phi(&self) -> &DualVector {
        &self.phi
    }

    /// `g(y) + ½H(y, y) − φ(y)`
    pub fn objective(&self, y: &[f64]) -> f64 {
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in 0..y.len() {
            quad += y[i] * self.effective.row_dot(i, y);
            lin += self.phi[i] * y[i];
        }
        self.nonsmooth.separable_value(y) + 0.5 * quad - lin
    }

    /// `J(to) − J(from)`, evaluated through the correction `to − from` so that
    /// small changes are not lost to cancellation between large energies.
    pub fn energy_change(&self, from: &[f64], to: &[f64]) -> f64 {
        let w = self.nonsmooth.l1_weights();
        let d: Vec<f64> = to.iter().zip(from).map(|(a, b)| a - b).collect();
        let mut change = 0.0;
        for i in 0..d.len() {
            if w[i] != 0.0 {
                change += w[i] * (to[i].abs() - from[i].abs());
            }
            if d[i] != 0.0 {
                let residual = self.effective.row_dot(i, from) - self.phi[i];
                change += d[i] * (residual + 0.5 * self.effective.row_dot(i, &d));
            }
        }
        change
    }

    /// Largest violation of `φ − Hy ∈ ∂g(y)`, coordinatewise.
    pub fn first_order_residual(&self, y: &PrimalVector) -> f64 {
        let w = self.nonsmooth.l1_weights();
        (0..self.dim())
            .map(|i| {
                let r = self.phi[i] - self.effective.row_dot(i, y);
                if y[i] == 0.0 {
                    (r.abs() - w[i]).max(0.0)
                } else {
                    (r - w[i] * y[i].signum()).abs()
                }
            })
            .fold(0.0, f64::max)
    }

    fn check_diagonal(&self) -> Result<()> {
        for i in 0..self.dim() {
            if !(self.effective.diag(i) > 0.0) {
                return Err(Error::NonconvexSubproblem { index: i });
            }
        }
        Ok(())
    }

    /// One forward nonsmooth Gauss–Seidel sweep, exact in every coordinate.
    fn gauss_seidel_sweep(&self, y: &mut [f64]) {
        let w = self.nonsmooth.l1_weights();
        for i in 0..y.len() {
            let a = self.effective.diag(i);
            let b = self.phi[i] - self.effective.row_dot(i, y) + a * y[i];
            y[i] = soft_threshold(b, w[i]) / a;
        }
    }
}

/// `sign(v)·max(|v| − t, 0)`; returns an exact zero inside the threshold.
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct ProxSolution {
    pub y: PrimalVector,
    pub cycles: usize,
    /// Subproblem objective at the start and after every cycle.
    pub objectives: Vec<f64>,
}

/// Evaluates the scaled prox starting from `start` (zero if `None`).
pub fn scaled_prox(
    sp: &ProxSubproblem<'_>,
    start: Option<&PrimalVector>,
    cfg: &SubsolverConfig,
) -> Result<ProxSolution> {
    let n = sp.dim();
    let mut y = match start {
        Some(s) => {
            check_len(n, s.len())?;
            s.to_vec()
        }
        None => vec![0.0; n],
    };
    sp.check_diagonal()?;
    let w = sp.nonsmooth.l1_weights();
    let mut energy = sp.objective(&y);
    let mut objectives = vec![energy];

    for cycle in 1..=cfg.max_cycles {
        let previous = y.clone();
        sp.gauss_seidel_sweep(&mut y);

        let free: Vec<usize> = (0..n).filter(|&i| y[i] != 0.0).collect();
        if !free.is_empty() {
            let rhs: Vec<f64> = free
                .iter()
                .map(|&i| sp.phi[i] - sp.effective.row_dot(i, &y) - w[i] * y[i].signum())
                .collect();
            let reduced = sp.effective.principal_submatrix(&free);
            let chol = BandedCholesky::factor(&reduced).map_err(|e| match e {
                Error::NotPositiveDefinite { pivot, .. } => {
                    Error::NonconvexSubproblem { index: free[pivot] }
                }
                other => other,
            })?;
            let direction = chol.solve(&rhs)?;
            let mut step = 1.0;
            let mut candidate = y.clone();
            for _ in 0..=MAX_HALVINGS {
                for (k, &i) in free.iter().enumerate() {
                    candidate[i] = y[i] + step * direction[k];
                }
                if sp.energy_change(&y, &candidate) < 0.0 {
                    y.copy_from_slice(&candidate);
                    break;
                }
                step *= cfg.line_search_shrink;
            }
        }

        let mut change = sp.energy_change(&previous, &y);
        if !(change <= 0.0) {
            // only reachable through rounding at the minimizer
            y.copy_from_slice(&previous);
            change = 0.0;
        }
        energy += change;
        objectives.push(energy);
        let correction: Vec<f64> = y.iter().zip(&previous).map(|(a, b)| a - b).collect();
        let correction_norm = sp.ip.norm_primal(&PrimalVector::new(correction))?;
        if -change <= cfg.energy_tol * (1.0 + energy.abs()) && correction_norm <= cfg.correction_tol {
            return Ok(ProxSolution { y: PrimalVector::new(y), cycles: cycle, objectives });
        }
    }
    Err(Error::NoConvergence { cycles: cfg.max_cycles })
}

/// Pure coordinate descent, run until a full sweep decreases the objective
/// by at most `tight_tol` and moves no coordinate by more than `1e-13`
/// (relative).
pub fn scaled_prox_reference(sp: &ProxSubproblem<'_>, tight_tol: f64) -> Result<PrimalVector> {
    const MAX_SWEEPS: usize = 1_000_000;
    sp.check_diagonal()?;
    let mut y = vec![0.0; sp.dim()];
    let mut energy = sp.objective(&y);
    for _ in 0..MAX_SWEEPS {
        let previous = y.clone();
        sp.gauss_seidel_sweep(&mut y);
        let new_energy = sp.objective(&y);
        let scale = 1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let moved = y.iter().zip(&previous).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if moved == 0.0 || (energy - new_energy <= tight_tol && moved <= 1e-13 * scale) {
            return Ok(PrimalVector::new(y));
        }
        energy = new_energy;
    }
    Err(Error::IterationCap { cap: MAX_SWEEPS })
}
