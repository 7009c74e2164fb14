//! The composite objective `F = f + g`, its local second-order model and the
//! κ-shift that moves curvature between `f` and `g`.

use crate::error::{check_len, Error, Result};
use crate::hilbert::{dot, CsrMatrix, DualVector, InnerProduct, PrimalVector};
use std::sync::Arc;

/// Symmetric bilinear form `H_x`, stored as a sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderForm(CsrMatrix);

impl SecondOrderForm {
    pub fn new(matrix: CsrMatrix) -> Self {
        Self(matrix)
    }

    pub fn zero(n: usize) -> Self {
        Self(CsrMatrix::from_triplets(n, std::iter::empty()))
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CsrMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn apply(&self, v: &PrimalVector) -> Result<DualVector> {
        Ok(DualVector::new(self.0.mul_vec(v)?))
    }

    pub fn quadratic(&self, v: &PrimalVector) -> Result<f64> {
        self.0.quadratic(v)
    }

    /// `self + s·R`
    pub fn add_metric(&self, s: f64, ip: &InnerProduct) -> Result<Self> {
        if s == 0.0 {
            return Ok(self.clone());
        }
        Ok(Self(self.0.linear_combination(1.0, ip.matrix(), s)?))
    }
}

/// Smooth part `f` with hand-coded first and second derivatives.
pub trait SmoothFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &PrimalVector) -> Result<f64>;
    fn gradient(&self, x: &PrimalVector) -> Result<DualVector>;
    /// A Newton derivative of `f'` at `x`.
    fn hessian(&self, x: &PrimalVector) -> Result<SecondOrderForm>;

    /// `f(x + δ) − f(x)`. Implementations should avoid forming the two values
    /// separately: the acceptance test compares this against model decreases
    /// far below the rounding error of `f(x)`.
    fn value_change(&self, x: &PrimalVector, dx: &PrimalVector) -> Result<f64> {
        Ok(self.value(&x.add_scaled(1.0, dx))? - self.value(x)?)
    }

    /// Lipschitz constant of `f'` in the X-norm, when known.
    fn lipschitz_estimate(&self) -> Option<f64> {
        None
    }

    /// Lower bound `κ₁` with `H_x(v, v) ≥ κ₁‖v‖²_X`, when known.
    fn kappa1_floor(&self) -> Option<f64> {
        None
    }
}

/// `g(x) = Σ lᵢ|xᵢ| + (q/2)‖x‖²_X`.
///
/// The weighted ℓ¹ part is what the lumped `c∫|u|` becomes; the quadratic
/// part carries strong convexity (and the κ-shift) in the X-metric.
#[derive(Debug, Clone, PartialEq)]
pub struct NonsmoothPart {
    l1_weights: Vec<f64>,
    quadratic_weight: f64,
}

impl NonsmoothPart {
    pub fn new(l1_weights: Vec<f64>, quadratic_weight: f64) -> Self {
        Self { l1_weights, quadratic_weight }
    }

    pub fn weighted_l1(l1_weights: Vec<f64>) -> Self {
        Self::new(l1_weights, 0.0)
    }

    pub fn zero(n: usize) -> Self {
        Self::new(vec![0.0; n], 0.0)
    }

    pub fn dim(&self) -> usize {
        self.l1_weights.len()
    }

    pub fn l1_weights(&self) -> &[f64] {
        &self.l1_weights
    }

    pub fn quadratic_weight(&self) -> f64 {
        self.quadratic_weight
    }

    /// Convexity modulus `κ₂` in the X-metric.
    pub fn kappa2(&self) -> f64 {
        self.quadratic_weight
    }

    /// `true` when every ℓ¹ weight is non-negative and `κ₂ ≥ 0`.
    pub fn is_convex(&self) -> bool {
        self.quadratic_weight >= 0.0 && self.l1_weights.iter().all(|&w| w >= 0.0)
    }

    pub fn separable_value(&self, x: &[f64]) -> f64 {
        self.l1_weights.iter().zip(x).map(|(w, v)| w * v.abs()).sum()
    }

    pub fn value(&self, x: &PrimalVector, ip: &InnerProduct) -> Result<f64> {
        check_len(self.dim(), x.len())?;
        let mut g = self.separable_value(x);
        if self.quadratic_weight != 0.0 {
            g += 0.5 * self.quadratic_weight * ip.matrix().quadratic(x)?;
        }
        Ok(g)
    }

    /// `g(x + δ) − g(x)`, summed per coordinate so that small steps are not
    /// swamped by the rounding error of `g(x)` itself.
    pub fn change(&self, x: &PrimalVector, dx: &PrimalVector, ip: &InnerProduct) -> Result<f64> {
        check_len(self.dim(), x.len())?;
        check_len(self.dim(), dx.len())?;
        let mut d: f64 = self
            .l1_weights
            .iter()
            .zip(x.iter().zip(dx.iter()))
            .map(|(w, (v, s))| w * ((v + s).abs() - v.abs()))
            .sum();
        if self.quadratic_weight != 0.0 {
            let m = ip.matrix();
            d += self.quadratic_weight * (dot(&m.mul_vec(x)?, dx) + 0.5 * m.quadratic(dx)?);
        }
        Ok(d)
    }

    pub fn shifted(&self, kappa: f64) -> Self {
        Self::new(self.l1_weights.clone(), self.quadratic_weight + kappa)
    }
}

/// `f̃ = f − (κ/2)‖·‖²_X` on top of an existing smooth part.
struct ShiftedSmooth {
    inner: Arc<dyn SmoothFunction>,
    kappa: f64,
    ip: Arc<InnerProduct>,
}

impl SmoothFunction for ShiftedSmooth {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &PrimalVector) -> Result<f64> {
        Ok(self.inner.value(x)? - 0.5 * self.kappa * self.ip.matrix().quadratic(x)?)
    }

    fn gradient(&self, x: &PrimalVector) -> Result<DualVector> {
        Ok(self.inner.gradient(x)?.add_scaled(-self.kappa, &self.ip.riesz(x)?))
    }

    fn value_change(&self, x: &PrimalVector, dx: &PrimalVector) -> Result<f64> {
        let m = self.ip.matrix();
        let cross = dot(&m.mul_vec(x)?, dx) + 0.5 * m.quadratic(dx)?;
        Ok(self.inner.value_change(x, dx)? - self.kappa * cross)
    }

    fn hessian(&self, x: &PrimalVector) -> Result<SecondOrderForm> {
        self.inner.hessian(x)?.add_metric(-self.kappa, &self.ip)
    }

    fn lipschitz_estimate(&self) -> Option<f64> {
        self.inner.lipschitz_estimate().map(|l| l - self.kappa)
    }

    fn kappa1_floor(&self) -> Option<f64> {
        self.inner.kappa1_floor().map(|k| k - self.kappa)
    }
}

#[derive(Clone)]
pub struct CompositeProblem {
    smooth: Arc<dyn SmoothFunction>,
    nonsmooth: NonsmoothPart,
    ip: Arc<InnerProduct>,
}

impl std::fmt::Debug for CompositeProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CompositeProblem")
            .field("dim", &self.dim())
            .field("nonsmooth", &self.nonsmooth)
            .finish_non_exhaustive()
    }
}

impl CompositeProblem {
    pub fn new(
        smooth: Arc<dyn SmoothFunction>,
        nonsmooth: NonsmoothPart,
        ip: Arc<InnerProduct>,
    ) -> Result<Self> {
        check_len(ip.dim(), smooth.dim())?;
        check_len(ip.dim(), nonsmooth.dim())?;
        Ok(Self { smooth, nonsmooth, ip })
    }

    pub fn dim(&self) -> usize {
        self.ip.dim()
    }

    pub fn smooth(&self) -> &dyn SmoothFunction {
        self.smooth.as_ref()
    }

    pub fn nonsmooth(&self) -> &NonsmoothPart {
        &self.nonsmooth
    }

    pub fn inner_product(&self) -> &InnerProduct {
        &self.ip
    }

    pub fn eval_f(&self, x: &PrimalVector) -> Result<f64> {
        finite(self.smooth.value(x)?, "f")
    }

    pub fn eval_g(&self, x: &PrimalVector) -> Result<f64> {
        finite(self.nonsmooth.value(x, &self.ip)?, "g")
    }

    pub fn eval_gradient(&self, x: &PrimalVector) -> Result<DualVector> {
        let d = self.smooth.gradient(x)?;
        if !d.is_finite() {
            return Err(Error::NonFinite { term: "f'" });
        }
        Ok(d)
    }

    /// `F(x + δ) − F(x)` without cancellation against `F(x)`.
    pub fn eval_change(&self, x: &PrimalVector, dx: &PrimalVector) -> Result<f64> {
        check_len(self.dim(), x.len())?;
        check_len(self.dim(), dx.len())?;
        let df = finite(self.smooth.value_change(x, dx)?, "f")?;
        finite(df + self.nonsmooth.change(x, dx, &self.ip)?, "F")
    }

    pub fn eval_f_total(&self, x: &PrimalVector) -> Result<f64> {
        finite(self.eval_f(x)? + self.eval_g(x)?, "F")
    }

    /// Builds the local model of `F` around `x`.
    pub fn local_model(&self, x: &PrimalVector) -> Result<LocalModel> {
        check_len(self.dim(), x.len())?;
        let f = self.eval_f(x)?;
        let g = self.eval_g(x)?;
        Ok(LocalModel {
            x: x.clone(),
            f,
            g,
            gradient: self.eval_gradient(x)?,
            hessian: self.smooth.hessian(x)?,
        })
    }

    /// `λ_ω(δx)` at `x`; assembles a fresh local model.
    pub fn eval_lambda(&self, x: &PrimalVector, dx: &PrimalVector, omega: f64) -> Result<f64> {
        self.local_model(x)?.lambda(self, dx, omega)
    }

    /// The equivalent problem with `f̃ = f − (κ/2)‖·‖²_X`, `g̃ = g + (κ/2)‖·‖²_X`.
    pub fn shift(&self, kappa: f64) -> CompositeProblem {
        if kappa == 0.0 {
            return self.clone();
        }
        CompositeProblem {
            smooth: Arc::new(ShiftedSmooth {
                inner: Arc::clone(&self.smooth),
                kappa,
                ip: Arc::clone(&self.ip),
            }),
            nonsmooth: self.nonsmooth.shifted(kappa),
            ip: Arc::clone(&self.ip),
        }
    }
}

/// `f`, `f'`, `H` and `g` frozen at an iterate `x`.
#[derive(Debug, Clone)]
pub struct LocalModel {
    pub x: PrimalVector,
    pub f: f64,
    pub g: f64,
    pub gradient: DualVector,
    pub hessian: SecondOrderForm,
}

impl LocalModel {
    pub fn value(&self) -> f64 {
        self.f + self.g
    }

    /// `f'(x)δ + ½H(δ, δ) + (ω/2)‖δ‖²_X + g(x + δ) − g(x)`
    pub fn lambda(&self, p: &CompositeProblem, dx: &PrimalVector, omega: f64) -> Result<f64> {
        self.lambda_with(p, dx, omega, true)
    }

    /// `λ_ω` with the `½H(δ, δ)` term optionally dropped, matching the
    /// proximal gradient subproblem.
    pub fn lambda_with(&self, p: &CompositeProblem, dx: &PrimalVector, omega: f64, second_order: bool) -> Result<f64> {
        let lin = self.gradient.apply(dx);
        let quad = if second_order { self.hessian.quadratic(dx)? } else { 0.0 };
        let reg = if omega != 0.0 { omega * p.ip.matrix().quadratic(dx)? } else { 0.0 };
        let g_change = p.nonsmooth.change(&self.x, dx, &p.ip)?;
        finite(lin + 0.5 * quad + 0.5 * reg + g_change, "lambda")
    }

    /// Row-sum bound on `‖H_x‖`; diagnostic only.
    pub fn hessian_norm_estimate(&self) -> f64 {
        self.hessian.matrix().max_row_sum()
    }
}

/// `‖f'(x + δ) − f'(x) − (H_x + ωR)δ‖_{X*}`, which bounds the distance of
/// `0` to the subdifferential of `F` at `x + δ`.
pub fn stationarity_residual(
    p: &CompositeProblem,
    model: &LocalModel,
    dx: &PrimalVector,
    omega: f64,
) -> Result<f64> {
    stationarity_residual_with(p, model, dx, omega, true)
}

/// As [`stationarity_residual`], optionally without `H_x` (for steps computed
/// from the first-order model).
pub fn stationarity_residual_with(
    p: &CompositeProblem,
    model: &LocalModel,
    dx: &PrimalVector,
    omega: f64,
    second_order: bool,
) -> Result<f64> {
    if dx.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let g_plus = p.eval_gradient(&model.x.add_scaled(1.0, dx))?;
    let mut r = g_plus.sub(&model.gradient);
    if second_order {
        r = r.sub(&model.hessian.apply(dx)?);
    }
    if omega != 0.0 {
        r = r.add_scaled(-omega, &p.ip.riesz(dx)?);
    }
    p.ip.norm_dual(&r)
}

fn finite(v: f64, term: &'static str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { term })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `f(x) = ½ xᵀAx − bᵀx`
    struct Quadratic {
        a: CsrMatrix,
        b: Vec<f64>,
    }

    impl SmoothFunction for Quadratic {
        fn dim(&self) -> usize {
            self.b.len()
        }
        fn value(&self, x: &PrimalVector) -> Result<f64> {
            Ok(0.5 * self.a.quadratic(x)? - crate::hilbert::dot(&self.b, x))
        }
        fn gradient(&self, x: &PrimalVector) -> Result<DualVector> {
            let ax = self.a.mul_vec(x)?;
            Ok(DualVector::new(ax.iter().zip(&self.b).map(|(a, b)| a - b).collect()))
        }
        fn hessian(&self, _: &PrimalVector) -> Result<SecondOrderForm> {
            Ok(SecondOrderForm::new(self.a.clone()))
        }
    }

    fn half_norm_sq_plus_l1(n: usize) -> CompositeProblem {
        CompositeProblem::new(
            Arc::new(Quadratic { a: CsrMatrix::identity(n), b: vec![0.0; n] }),
            NonsmoothPart::weighted_l1(vec![1.0; n]),
            Arc::new(InnerProduct::identity(n)),
        )
        .unwrap()
    }

    fn random_problem(rng: &mut ChaCha8Rng, n: usize) -> CompositeProblem {
        let m = CsrMatrix::from_triplets(
            n,
            (0..n).flat_map(|i| {
                let mut t = vec![(i, i, 2.0 + rng.gen_range(0.0..1.0))];
                if i + 1 < n {
                    t.extend([(i, i + 1, -0.5), (i + 1, i, -0.5)]);
                }
                t
            }),
        );
        let a = m.scaled(1.5);
        let b = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        CompositeProblem::new(
            Arc::new(Quadratic { a, b }),
            NonsmoothPart::new((0..n).map(|_| rng.gen_range(0.0..0.5)).collect(), 0.2),
            Arc::new(InnerProduct::from_matrix(m).unwrap()),
        )
        .unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> PrimalVector {
        PrimalVector::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn evaluates_quadratic_plus_l1() {
        let p = half_norm_sq_plus_l1(2);
        let x = PrimalVector::new(vec![1.0, 0.0]);
        assert_eq!(p.eval_f_total(&x).unwrap(), 1.5);
    }

    #[test]
    fn total_is_sum_of_parts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_problem(&mut rng, 12);
        for _ in 0..20 {
            let x = random_vec(&mut rng, 12);
            let total = p.eval_f_total(&x).unwrap();
            let parts = p.eval_f(&x).unwrap() + p.eval_g(&x).unwrap();
            assert!((total - parts).abs() <= 1e-12 * (1.0 + total.abs()));
        }
    }

    #[test]
    fn lambda_scalar_example() {
        // f'(x)δ = −1 with f = ½x² − x at x = 0, H = 1, δ = 1, g ≡ 0.
        let p = CompositeProblem::new(
            Arc::new(Quadratic { a: CsrMatrix::identity(1), b: vec![1.0] }),
            NonsmoothPart::zero(1),
            Arc::new(InnerProduct::identity(1)),
        )
        .unwrap();
        let x = PrimalVector::zeros(1);
        assert_eq!(p.eval_lambda(&x, &PrimalVector::new(vec![1.0]), 0.0).unwrap(), -0.5);
        assert_eq!(p.eval_lambda(&x, &PrimalVector::zeros(1), 3.0).unwrap(), 0.0);
    }

    #[test]
    fn lambda_decomposes_in_omega() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_problem(&mut rng, 10);
        for _ in 0..20 {
            let x = random_vec(&mut rng, 10);
            let dx = random_vec(&mut rng, 10);
            let omega = rng.gen_range(0.0..5.0);
            let model = p.local_model(&x).unwrap();
            let l0 = model.lambda(&p, &dx, 0.0).unwrap();
            let lw = model.lambda(&p, &dx, omega).unwrap();
            let norm2 = p.inner_product().matrix().quadratic(&dx).unwrap();
            assert!((l0 + 0.5 * omega * norm2 - lw).abs() <= 1e-12 * (1.0 + lw.abs()));
        }
    }

    #[test]
    fn shift_preserves_objective_and_moves_curvature() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_problem(&mut rng, 8);
        let q = p.shift(0.0);
        assert_eq!(q.nonsmooth(), p.nonsmooth());
        let kappa = 0.7;
        let s = p.shift(kappa);
        assert!((s.nonsmooth().kappa2() - (p.nonsmooth().kappa2() + kappa)).abs() < 1e-15);
        for _ in 0..20 {
            let x = random_vec(&mut rng, 8);
            let a = p.eval_f_total(&x).unwrap();
            let b = s.eval_f_total(&x).unwrap();
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            let h = p.smooth().hessian(&x).unwrap().into_matrix();
            let hs = s.smooth().hessian(&x).unwrap().into_matrix();
            let diff = h.linear_combination(1.0, &hs, -1.0).unwrap();
            let expected = p.inner_product().matrix().scaled(kappa);
            let err = diff.linear_combination(1.0, &expected, -1.0).unwrap();
            assert!(err.max_row_sum() < 1e-12);
        }
    }

    #[test]
    fn second_order_form_quadratic_matches_apply() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_problem(&mut rng, 9);
        let h = p.smooth().hessian(&PrimalVector::zeros(9)).unwrap();
        for _ in 0..20 {
            let v = random_vec(&mut rng, 9);
            let q = h.quadratic(&v).unwrap();
            let a = h.apply(&v).unwrap().apply(&v);
            assert!((q - a).abs() <= 1e-12 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn stationarity_residual_vanishes_for_exact_quadratics() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_problem(&mut rng, 10);
        let x = random_vec(&mut rng, 10);
        let model = p.local_model(&x).unwrap();
        assert_eq!(stationarity_residual(&p, &model, &PrimalVector::zeros(10), 1.0).unwrap(), 0.0);
        let dx = random_vec(&mut rng, 10);
        assert!(stationarity_residual(&p, &model, &dx, 0.0).unwrap() < 1e-10);
        assert!(stationarity_residual(&p, &model, &dx, 1.0).unwrap() > 1e-3);
    }

    #[test]
    fn size_mismatch_rejected_at_construction() {
        let r = CompositeProblem::new(
            Arc::new(Quadratic { a: CsrMatrix::identity(2), b: vec![0.0; 2] }),
            NonsmoothPart::zero(3),
            Arc::new(InnerProduct::identity(2)),
        );
        assert!(r.is_err());
    }
}
