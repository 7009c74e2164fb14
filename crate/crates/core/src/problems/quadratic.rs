use crate::error::{check_len, Error, Result};
use crate::hilbert::{dot, CsrMatrix, DualVector, InnerProduct, PrimalVector};
use crate::objective::{CompositeProblem, NonsmoothPart, SecondOrderForm, SmoothFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// `f(x) = ½ xᵀAx − bᵀx` with known curvature bounds in the X-metric.
#[derive(Debug, Clone)]
pub struct QuadraticSmooth {
    a: CsrMatrix,
    b: Vec<f64>,
    kappa1: Option<f64>,
    lipschitz: Option<f64>,
}

impl QuadraticSmooth {
    pub fn new(a: CsrMatrix, b: Vec<f64>) -> Result<Self> {
        check_len(a.dim(), b.len())?;
        Ok(Self { a, b, kappa1: None, lipschitz: None })
    }

    pub fn with_constants(mut self, kappa1: f64, lipschitz: f64) -> Self {
        self.kappa1 = Some(kappa1);
        self.lipschitz = Some(lipschitz);
        self
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn linear_term(&self) -> &[f64] {
        &self.b
    }
}

impl SmoothFunction for QuadraticSmooth {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &PrimalVector) -> Result<f64> {
        Ok(0.5 * self.a.quadratic(x)? - dot(&self.b, x))
    }

    fn value_change(&self, x: &PrimalVector, dx: &PrimalVector) -> Result<f64> {
        Ok(self.gradient(x)?.apply(dx) + 0.5 * self.a.quadratic(dx)?)
    }

    fn gradient(&self, x: &PrimalVector) -> Result<DualVector> {
        let mut ax = self.a.mul_vec(x)?;
        ax.iter_mut().zip(&self.b).for_each(|(v, b)| *v -= b);
        Ok(DualVector::new(ax))
    }

    fn hessian(&self, _: &PrimalVector) -> Result<SecondOrderForm> {
        Ok(SecondOrderForm::new(self.a.clone()))
    }

    fn lipschitz_estimate(&self) -> Option<f64> {
        self.lipschitz
    }

    fn kappa1_floor(&self) -> Option<f64> {
        self.kappa1
    }
}

/// A quadratic + weighted ℓ¹ instance together with its constants.
#[derive(Debug, Clone)]
pub struct QuadraticL1 {
    pub problem: CompositeProblem,
    pub smooth: Arc<QuadraticSmooth>,
    pub kappa1: f64,
    pub kappa2: f64,
    pub lipschitz: f64,
}

impl QuadraticL1 {
    /// `f = ½xᵀAx − bᵀx`, `g = Σ cᵢ|xᵢ| + (κ₂/2)‖x‖²_X` in the metric `m`.
    /// `κ₁` and `L_f` are taken as the extreme generalized eigenvalues of
    /// `(A, M)`, computed by power iteration.
    pub fn from_parts(m: CsrMatrix, a: CsrMatrix, b: Vec<f64>, l1: Vec<f64>, kappa2: f64) -> Result<Self> {
        let ip = Arc::new(InnerProduct::from_matrix(m)?);
        let lipschitz = generalized_extreme_eigenvalue(&a, &ip, false)?;
        let kappa1 = generalized_extreme_eigenvalue(&a, &ip, true)?;
        Self::assemble(ip, a, b, l1, kappa1, kappa2, lipschitz)
    }

    fn assemble(
        ip: Arc<InnerProduct>,
        a: CsrMatrix,
        b: Vec<f64>,
        l1: Vec<f64>,
        kappa1: f64,
        kappa2: f64,
        lipschitz: f64,
    ) -> Result<Self> {
        let smooth = Arc::new(QuadraticSmooth::new(a, b)?.with_constants(kappa1, lipschitz));
        let problem = CompositeProblem::new(
            Arc::clone(&smooth) as Arc<dyn SmoothFunction>,
            NonsmoothPart::new(l1, kappa2),
            ip,
        )?;
        Ok(Self { problem, smooth, kappa1, kappa2, lipschitz })
    }

    /// `κ₁ + κ₂`
    pub fn kappa(&self) -> f64 {
        self.kappa1 + self.kappa2
    }
}

/// Random metric: tridiagonal, strictly diagonally dominant SPD matrix.
fn random_metric(rng: &mut ChaCha8Rng, n: usize) -> CsrMatrix {
    let mut t = Vec::with_capacity(3 * n);
    for i in 0..n {
        t.push((i, i, 2.0 + rng.gen_range(0.0..1.0)));
        if i + 1 < n {
            let off = -0.5 * rng.gen_range(0.0..1.0);
            t.push((i, i + 1, off));
            t.push((i + 1, i, off));
        }
    }
    CsrMatrix::from_triplets(n, t)
}

/// Random instance with `A = κ₁M + GᵀG`, so `H(v, v) ≥ κ₁‖v‖²_X` holds by
/// construction. `κ₁` is reported as the constructed floor, `L_f` by power
/// iteration.
pub fn make_quadratic_l1(n: usize, seed: u64, kappa1: f64, kappa2: f64, c_weights: &[f64]) -> Result<QuadraticL1> {
    if !(kappa1 + kappa2 > 0.0) {
        return Err(Error::Config(format!("kappa1 + kappa2 must be positive, got {}", kappa1 + kappa2)));
    }
    let c: Vec<f64> = match c_weights.len() {
        1 => vec![c_weights[0]; n],
        len if len == n => c_weights.to_vec(),
        len => return Err(Error::SizeMismatch { expected: n, found: len }),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = random_metric(&mut rng, n);
    let scale = 1.0 / (n as f64).sqrt();
    let g: Vec<f64> = (0..n * n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = (0..n).map(|k| g[k * n + i] * g[k * n + j]).sum::<f64>() + kappa1 * m.get(i, j);
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    let a = CsrMatrix::from_dense(n, &a);
    let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let ip = Arc::new(InnerProduct::from_matrix(m)?);
    let lipschitz = generalized_extreme_eigenvalue(&a, &ip, false)?;
    QuadraticL1::assemble(ip, a, b, c, kappa1, kappa2, lipschitz)
}

/// Largest (or, with `smallest`, smallest) eigenvalue of `M⁻¹A` by power
/// iteration; the smallest one via a spectral shift.
fn generalized_extreme_eigenvalue(a: &CsrMatrix, ip: &InnerProduct, smallest: bool) -> Result<f64> {
    let n = a.dim();
    let largest = power_iteration(n, |v| ip.riesz_inv(&DualVector::new(a.mul_vec(v)?)), ip)?;
    if !smallest {
        return Ok(largest);
    }
    // eigenvalues of σI − M⁻¹A are σ − λ ≥ 0
    let sigma = largest;
    let top = power_iteration(
        n,
        |v| {
            let w = ip.riesz_inv(&DualVector::new(a.mul_vec(v)?))?;
            Ok(v.scale(sigma).sub(&w))
        },
        ip,
    )?;
    Ok(sigma - top)
}

fn power_iteration(
    n: usize,
    apply: impl Fn(&PrimalVector) -> Result<PrimalVector>,
    ip: &InnerProduct,
) -> Result<f64> {
    let mut v = PrimalVector::new((0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect());
    let norm = ip.norm_primal(&v)?;
    v = v.scale(1.0 / norm);
    let mut estimate = 0.0;
    for _ in 0..20_000 {
        let w = apply(&v)?;
        let next = ip.inner(&v, &w)?;
        let norm = ip.norm_primal(&w)?;
        if norm == 0.0 {
            return Ok(0.0);
        }
        v = w.scale(1.0 / norm);
        if (next - estimate).abs() <= 1e-15 * next.abs().max(1.0) {
            return Ok(next);
        }
        estimate = next;
    }
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructed_constants_bracket_rayleigh_quotients() {
        let inst = make_quadratic_l1(30, 7, 0.5, 0.1, &[0.3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        let a = inst.smooth.matrix();
        let m = inst.problem.inner_product().matrix();
        for _ in 0..1000 {
            let v: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let q = a.quadratic(&v).unwrap() / m.quadratic(&v).unwrap();
            assert!(q >= inst.kappa1 - 1e-10);
            assert!(q <= inst.lipschitz + 1e-6);
            assert!(a.quadratic(&v).unwrap() >= inst.kappa1 * m.quadratic(&v).unwrap() - 1e-10);
        }
    }

    #[test]
    fn generalized_eigenvalues_of_scaled_identity() {
        let inst = QuadraticL1::from_parts(
            CsrMatrix::diagonal(&[2.0, 4.0]),
            CsrMatrix::diagonal(&[2.0, 12.0]),
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            0.0,
        )
        .unwrap();
        assert!((inst.lipschitz - 3.0).abs() < 1e-9);
        assert!((inst.kappa1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_nonpositive_total_convexity() {
        assert!(make_quadratic_l1(4, 0, 0.0, 0.0, &[1.0]).is_err());
        assert!(make_quadratic_l1(4, 0, 1.0, 0.0, &[1.0, 2.0]).is_err());
    }
}
