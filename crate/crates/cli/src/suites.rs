//! Property suites behind the `proptest` verb. Every suite is seeded and
//! returns a report instead of panicking, so the runner can print one line
//! per suite.

use crate::runs::toy_problem;
use proxnewton_core::baselines::{prox_gradient_solve, FirstOrderConfig};
use proxnewton_core::hilbert::{DualVector, Mesh, PrimalVector};
use proxnewton_core::objective::{CompositeProblem, SecondOrderForm};
use proxnewton_core::problems::{
    make_quadratic_l1, soss_case, soss_chain_check, soss_table, QuadraticL1, SmoothScalar, ToyProblemParams,
};
use proxnewton_core::proxnewton::{solve, trial_step, SolveResult, SolverConfig};
use proxnewton_core::subsolver::{scaled_prox, scaled_prox_reference, ProxSubproblem, SubsolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl SuiteReport {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }

    fn error(name: &'static str, e: impl std::fmt::Display) -> Self {
        Self::new(name, false, format!("error: {e}"))
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

type Res<T> = std::result::Result<T, proxnewton_core::Error>;

fn primal(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> PrimalVector {
    PrimalVector::new((0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect())
}

fn dual(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DualVector {
    DualVector::new((0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect())
}

/// Random strongly convex instance: `κ₁ ∈ [0.05, 1]`, `κ₂ ∈ [0, 0.5]`,
/// ℓ¹ weights in `[0, 1]`.
fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> Res<QuadraticL1> {
    let kappa1 = rng.gen_range(0.05..1.0);
    let kappa2 = rng.gen_range(0.0..0.5);
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    make_quadratic_l1(n, rng.gen(), kappa1, kappa2, &weights)
}

fn operator(inst: &QuadraticL1) -> SecondOrderForm {
    SecondOrderForm::new(inst.smooth.matrix().clone())
}

fn prox(inst: &QuadraticL1, phi: DualVector) -> Res<PrimalVector> {
    let p = &inst.problem;
    let sp = ProxSubproblem::new(operator(inst), phi, p.nonsmooth(), p.inner_product())?;
    Ok(scaled_prox(&sp, None, &SubsolverConfig::default())?.y)
}

fn x_norm(p: &CompositeProblem, v: &PrimalVector) -> Res<f64> {
    p.inner_product().norm_primal(v)
}

/// `‖P(φ₁) − P(φ₂)‖_X ≤ (1 + 10⁻⁴)/(κ₁ + κ₂)·‖φ₁ − φ₂‖_{X*}`, one pair per
/// instance.
pub fn prox_regularity(seed: u64, instances: usize, n: usize) -> SuiteReport {
    const NAME: &str = "prox_regularity";
    let run = || -> Res<(usize, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut violations = 0;
        let mut worst = 0.0f64;
        for _ in 0..instances {
            let inst = random_instance(&mut rng, n)?;
            let ip = inst.problem.inner_product();
            let phi1 = dual(&mut rng, n, 3.0);
            let phi2 = dual(&mut rng, n, 3.0);
            let lhs = ip.norm_primal(&prox(&inst, phi1.clone())?.sub(&prox(&inst, phi2.clone())?))?;
            let rhs = ip.norm_dual(&phi1.sub(&phi2))? / inst.kappa();
            worst = worst.max(lhs / rhs);
            if lhs > (1.0 + 1e-4) * rhs {
                violations += 1;
            }
        }
        Ok((violations, worst))
    };
    match run() {
        Ok((v, worst)) => SuiteReport::new(
            NAME,
            v == 0,
            format!("{instances} instances, n={n}, {v} violations, max ratio to bound {worst:.6}"),
        ),
        Err(e) => SuiteReport::error(NAME, e),
    }
}

/// `[φ − H̃u](ξ − u) ≤ g(ξ) − g(u) − (κ₂/2)‖ξ − u‖²_X + 10⁻⁸` for `u = P(φ)`.
pub fn second_prox_inequality(seed: u64, instances: usize, n: usize) -> SuiteReport {
    const NAME: &str = "second_prox_inequality";
    let run = || -> Res<(usize, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut violations = 0;
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..instances {
            let inst = random_instance(&mut rng, n)?;
            let p = &inst.problem;
            let phi = dual(&mut rng, n, 3.0);
            let u = prox(&inst, phi.clone())?;
            for k in 0..5 {
                // mix far points with points close to u, where the inequality is tight
                let xi = if k % 2 == 0 { primal(&mut rng, n, 2.0) } else { u.add_scaled(1e-2, &primal(&mut rng, n, 1.0)) };
                let lhs = phi.sub(&operator(&inst).apply(&u)?).apply(&xi.sub(&u));
                let d = x_norm(p, &xi.sub(&u))?;
                let rhs = p.eval_g(&xi)? - p.eval_g(&u)? - 0.5 * inst.kappa2 * d * d;
                worst = worst.max(lhs - rhs);
                if lhs > rhs + 1e-8 {
                    violations += 1;
                }
            }
        }
        Ok((violations, worst))
    };
    match run() {
        Ok((v, worst)) => SuiteReport::new(
            NAME,
            v == 0,
            format!("{} pairs, {v} violations, max lhs − rhs {worst:.3e}", 5 * instances),
        ),
        Err(e) => SuiteReport::error(NAME, e),
    }
}

/// Relations between the full step `Δx` and damped steps `Δx(ω)`:
/// `‖Δx − Δx(ω)‖ ≤ (ω/κ)‖Δx(ω)‖ + tol` and
/// `‖Δx(ω)‖ ≤ ‖Δx‖ + tol ≤ (ω/κ + 1)‖Δx(ω)‖ + 2tol`.
pub fn step_relations(seed: u64, instances: usize, n: usize) -> SuiteReport {
    const NAME: &str = "step_relations";
    let tol = 1e-6;
    let omegas = [0.1, 1.0, 10.0];
    let run = || -> Res<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = SubsolverConfig::default();
        let mut violations = 0;
        for _ in 0..instances {
            let inst = random_instance(&mut rng, n)?;
            let p = &inst.problem;
            let kappa = inst.kappa();
            let x = primal(&mut rng, n, 2.0);
            let full = trial_step(p, &x, 0.0, &cfg)?;
            let full_norm = x_norm(p, &full)?;
            for &omega in &omegas {
                let damped = trial_step(p, &x, omega, &cfg)?;
                let dn = x_norm(p, &damped)?;
                let first = x_norm(p, &full.sub(&damped))? <= omega / kappa * dn + tol;
                let second = dn <= full_norm + tol && full_norm + tol <= (omega / kappa + 1.0) * dn + 2.0 * tol;
                if !(first && second) {
                    violations += 1;
                }
            }
        }
        Ok(violations)
    };
    match run() {
        Ok(v) => SuiteReport::new(
            NAME,
            v == 0,
            format!("{instances} instances × ω ∈ {{0.1, 1, 10}}, {v} violations"),
        ),
        Err(e) => SuiteReport::error(NAME, e),
    }
}

/// Damped steps of the problem and of its κ-shifted equivalent agree.
pub fn shift_invariance(seed: u64, instances: usize, n: usize, kappas: &[f64]) -> SuiteReport {
    const NAME: &str = "shift_invariance";
    let run = || -> Res<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = SubsolverConfig::default();
        let mut worst = 0.0f64;
        for _ in 0..instances {
            let inst = random_instance(&mut rng, n)?;
            let p = &inst.problem;
            let x = primal(&mut rng, n, 1.0);
            let omega = rng.gen_range(0.0..2.0);
            let base = trial_step(p, &x, omega, &cfg)?;
            for &kappa in kappas {
                let shifted = trial_step(&p.shift(kappa), &x, omega, &cfg)?;
                worst = worst.max(x_norm(p, &base.sub(&shifted))?);
            }
        }
        Ok(worst)
    };
    match run() {
        Ok(worst) => SuiteReport::new(
            NAME,
            worst <= 1e-6,
            format!("{instances} instances, κ ∈ {kappas:?}, max ‖Δ‖_X {worst:.3e}"),
        ),
        Err(e) => SuiteReport::error(NAME, e),
    }
}

/// True when no element gradient of `u + s·v`, `s ∈ [−t, t]`, reaches
/// `|∇u| = 1` (the kink of the max term) and none sits within `1e-8` of it.
fn off_kink(mesh: &Mesh, u: &PrimalVector, v: &PrimalVector, t: f64) -> bool {
    (0..mesh.elements().len()).all(|e| {
        let g = mesh.element_gradient(e, u);
        let d = mesh.element_gradient(e, v);
        let side = g[0].hypot(g[1]) - 1.0;
        let reach = t * d[0].hypot(d[1]);
        side.abs() > reach + 1e-8
    })
}

/// Central-difference checks of `f'` and `H` on the toy problem at random
/// points off the kink manifold.
pub fn toy_derivatives(seed: u64, points: usize, params: ToyProblemParams) -> SuiteReport {
    const NAME: &str = "toy_derivatives";
    let run = || -> Res<(usize, usize, f64, f64, usize)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = toy_problem(&params).map_err(|e| proxnewton_core::Error::Config(e.to_string()))?;
        let mesh = Mesh::unit_square(params.refinement_level)?;
        let f = p.smooth();
        let n = p.dim();
        let h = mesh.h();
        let (t1, t2) = (1e-5, 1e-4);
        let (mut grad_fail, mut hess_fail, mut grad_worst, mut hess_worst, mut active) = (0, 0, 0.0f64, 0.0f64, 0);
        for _ in 0..points {
            // nodal values of size ~h give element gradients of order one,
            // so both sides of |∇u| = 1 are sampled
            let (x, v) = loop {
                let x = primal(&mut rng, n, 1.2 * h);
                let v = primal(&mut rng, n, 1.0);
                if off_kink(&mesh, &x, &v, t2) {
                    break (x, v);
                }
            };
            active += (0..mesh.elements().len())
                .filter(|&e| {
                    let g = mesh.element_gradient(e, &x);
                    g[0].hypot(g[1]) > 1.0
                })
                .count();
            let fd = (f.value(&x.add_scaled(t1, &v))? - f.value(&x.add_scaled(-t1, &v))?) / (2.0 * t1);
            let dv = f.gradient(&x)?.apply(&v);
            let gerr = (dv - fd).abs() / (1.0 + dv.abs());
            grad_worst = grad_worst.max(gerr);
            if gerr > 1e-5 {
                grad_fail += 1;
            }
            let second =
                (f.value(&x.add_scaled(t2, &v))? - 2.0 * f.value(&x)? + f.value(&x.add_scaled(-t2, &v))?) / (t2 * t2);
            let hvv = f.hessian(&x)?.quadratic(&v)?;
            let herr = (hvv - second).abs() / (1.0 + hvv.abs());
            hess_worst = hess_worst.max(herr);
            if herr > 1e-3 {
                hess_fail += 1;
            }
        }
        Ok((grad_fail, hess_fail, grad_worst, hess_worst, active))
    };
    match run() {
        Ok((g, hf, gw, hw, active)) => SuiteReport::new(
            NAME,
            g == 0 && hf == 0 && active > 0,
            format!(
                "{points} points (α={}, L={}), gradient fails {g} (max rel {gw:.2e}), Hessian fails {hf} (max rel {hw:.2e}), {active} element samples past the kink",
                params.alpha, params.refinement_level
            ),
        ),
        Err(e) => SuiteReport::error(NAME, e),
    }
}

/// TNNMG prox against coordinate descent, plus first-order residual and
/// monotone objectives.
pub fn subsolver_reference(seed: u64, instances: usize, n: usize) -> SuiteReport {
    const NAME: &str = "subsolver_reference";
    let run = || -> Res<(f64, f64, bool)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut worst, mut residual, mut monotone) = (0.0f64, 0.0f64, true);
        for _ in 0..instances {
            let inst = random_instance(&mut rng, n)?;
            let p = &inst.problem;
            let sp = ProxSubproblem::new(operator(&inst), dual(&mut rng, n, 3.0), p.nonsmooth(), p.inner_product())?;
            let fast = scaled_prox(&sp, None, &SubsolverConfig::default())?;
            let slow = scaled_prox_reference(&sp, 1e-14)?;
            worst = worst.max(x_norm(p, &fast.y.sub(&slow))?);
            residual = residual.max(sp.first_order_residual(&fast.y));
            monotone &= fast.objectives.windows(2).all(|w| w[1] <= w[0]);
        }
        Ok((worst, residual, monotone))
    };
    match run() {
        Ok((worst, residual, monotone)) => SuiteReport::new(
            NAME,
            worst <= 1e-6 && residual <= 1e-8 && monotone,
            format!(
                "{instances} instances, max ‖y − y_ref‖_X {worst:.3e}, max residual {residual:.3e}, monotone {monotone}"
            ),
        ),
        Err(e) => SuiteReport::error(NAME, e),
    }
}

/// Accepted records satisfy the sufficient decrease and step-bound tests.
pub fn audit_history(result: &SolveResult, gamma: f64, mbar: f64) -> usize {
    let mut f = result.initial_f;
    let mut bad = 0;
    for r in &result.history {
        if r.accepted {
            if !(r.f_value - f <= gamma * r.lambda + 1e-10) || !(r.step_norm * r.step_norm <= -mbar * r.lambda + 1e-10) {
                bad += 1;
            }
            f = r.f_value;
        }
    }
    bad
}

/// Descent bookkeeping on proximal Newton and proximal gradient runs.
pub fn descent(seed: u64) -> SuiteReport {
    const NAME: &str = "descent";
    let run = || -> Res<(usize, usize)> {
        let cfg = SolverConfig::default();
        let fo = FirstOrderConfig::default();
        let mut problems = Vec::new();
        for alpha in [0.0, 40.0] {
            let params = ToyProblemParams { alpha, refinement_level: 3, ..Default::default() };
            problems.push(toy_problem(&params).map_err(|e| proxnewton_core::Error::Config(e.to_string()))?);
        }
        problems.push(make_quadratic_l1(40, seed, 0.2, 0.1, &[0.5])?.problem);
        let (mut runs, mut bad) = (0, 0);
        for p in &problems {
            let x0 = PrimalVector::zeros(p.dim());
            for result in [solve(p, &x0, &cfg)?, prox_gradient_solve(p, &x0, &fo)?] {
                runs += 1;
                bad += audit_history(&result, cfg.gamma, cfg.mbar);
            }
        }
        Ok((runs, bad))
    };
    match run() {
        Ok((runs, bad)) => SuiteReport::new(NAME, bad == 0, format!("{runs} runs, {bad} violating accepted rows")),
        Err(e) => SuiteReport::error(NAME, e),
    }
}

/// Second-order semi-smoothness remainders of the scalar examples.
pub fn soss() -> SuiteReport {
    const NAME: &str = "soss";
    let (Some(max_sq), Some(x3sin)) = (soss_case("max_sq"), soss_case("x3sin")) else {
        return SuiteReport::error(NAME, "missing registry case");
    };
    let max_rows = soss_table(&max_sq, 40);
    let max_zero = max_rows.iter().all(|r| r.second_order_ratio == 0.0 && r.semismooth_ratio == 0.0);
    let x3_rows = soss_table(&x3sin, 40);
    let x3_bounded = x3_rows.iter().all(|r| r.second_order_ratio <= r.xi.abs());
    let x3_not_semismooth = x3_rows.iter().any(|r| r.xi < 1e-4 && r.semismooth_ratio > 0.5);
    let chain = soss_chain_check(max_sq, SmoothScalar::sin());
    let passed = max_zero && x3_bounded && x3_not_semismooth && chain.passes;
    SuiteReport::new(
        NAME,
        passed,
        format!(
            "max_sq zero {max_zero}, x3sin ratio ≤ |ξ| {x3_bounded}, x3sin semismooth ratio > 0.5 below 1e-4 {x3_not_semismooth}, chain tail/initial {:.3e}",
            chain.tail_ratio / chain.initial_ratio
        ),
    )
}

/// All suites at their default sizes.
pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    vec![
        subsolver_reference(seed, 50, 50),
        prox_regularity(seed + 1, 100, 50),
        second_prox_inequality(seed + 2, 20, 30),
        step_relations(seed + 3, 50, 30),
        shift_invariance(seed + 4, 10, 30, &[-0.5, 0.3, 1.0]),
        toy_derivatives(seed + 5, 20, ToyProblemParams { alpha: 40.0, ..Default::default() }),
        descent(seed + 6),
        soss(),
    ]
}
