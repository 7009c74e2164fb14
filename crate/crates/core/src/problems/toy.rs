use crate::error::{check_len, Error, Result};
use crate::hilbert::{CsrMatrix, DualVector, InnerProduct, Mesh, PrimalVector};
use crate::objective::{CompositeProblem, NonsmoothPart, SecondOrderForm, SmoothFunction};
use std::sync::Arc;

/// Parameters of
/// `F(u) = ∫ ½|∇u|² + α max{|∇u| − 1, 0}² + βu³ + c|u| + ρu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyProblemParams {
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    pub rho: f64,
    pub refinement_level: u32,
}

impl Default for ToyProblemParams {
    fn default() -> Self {
        Self { alpha: 0.0, beta: 40.0, c: 80.0, rho: -100.0, refinement_level: 4 }
    }
}

impl ToyProblemParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::Config(format!("c must be positive, got {}", self.c)));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be non-negative, got {}", self.alpha)));
        }
        if ![self.beta, self.rho].iter().all(|v| v.is_finite()) {
            return Err(Error::Config("beta and rho must be finite".into()));
        }
        Ok(())
    }
}

/// Smooth part of the toy functional. Gradient terms use one-point
/// quadrature (exact for P1), the `βu³ + ρu` terms vertex lumping.
pub struct ToySmooth {
    mesh: Arc<Mesh>,
    weights: Vec<f64>,
    alpha: f64,
    beta: f64,
    rho: f64,
}

impl ToySmooth {
    pub fn new(mesh: Arc<Mesh>, params: &ToyProblemParams) -> Self {
        let weights = mesh.lumped_weights();
        Self { mesh, weights, alpha: params.alpha, beta: params.beta, rho: params.rho }
    }

    /// `(|∇u| − 1)₊` and `|∇u|`
    fn excess(grad: [f64; 2]) -> (f64, f64) {
        let norm = grad[0].hypot(grad[1]);
        ((norm - 1.0).max(0.0), norm)
    }
}

impl SmoothFunction for ToySmooth {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn value(&self, u: &PrimalVector) -> Result<f64> {
        check_len(self.dim(), u.len())?;
        let mut f = 0.0;
        for e in 0..self.mesh.elements().len() {
            let (area, _) = self.mesh.element_geometry(e);
            let g = self.mesh.element_gradient(e, u);
            let (ex, _) = Self::excess(g);
            f += area * (0.5 * (g[0] * g[0] + g[1] * g[1]) + self.alpha * ex * ex);
        }
        for (w, &v) in self.weights.iter().zip(u.iter()) {
            f += w * (self.beta * v * v * v + self.rho * v);
        }
        Ok(f)
    }

    fn value_change(&self, u: &PrimalVector, du: &PrimalVector) -> Result<f64> {
        check_len(self.dim(), u.len())?;
        check_len(self.dim(), du.len())?;
        let mut change = 0.0;
        for e in 0..self.mesh.elements().len() {
            let (area, _) = self.mesh.element_geometry(e);
            let g = self.mesh.element_gradient(e, u);
            let dg = self.mesh.element_gradient(e, du);
            let cross = g[0] * dg[0] + g[1] * dg[1];
            let dd = dg[0] * dg[0] + dg[1] * dg[1];
            let mut local = cross + 0.5 * dd;
            if self.alpha != 0.0 {
                let moved = [g[0] + dg[0], g[1] + dg[1]];
                let (ex_old, norm_old) = Self::excess(g);
                let (ex_new, norm_new) = Self::excess(moved);
                let ex_diff = if ex_old > 0.0 && ex_new > 0.0 {
                    // |g + dg| − |g| without cancellation
                    (2.0 * cross + dd) / (norm_new + norm_old)
                } else {
                    ex_new - ex_old
                };
                local += self.alpha * ex_diff * (ex_new + ex_old);
            }
            change += area * local;
        }
        for (w, (&v, &d)) in self.weights.iter().zip(u.iter().zip(du.iter())) {
            change += w * d * (self.beta * (3.0 * v * v + 3.0 * v * d + d * d) + self.rho);
        }
        Ok(change)
    }

    fn gradient(&self, u: &PrimalVector) -> Result<DualVector> {
        check_len(self.dim(), u.len())?;
        let mut d: Vec<f64> =
            self.weights.iter().zip(u.iter()).map(|(w, &v)| w * (3.0 * self.beta * v * v + self.rho)).collect();
        for (e, nodes) in self.mesh.elements().iter().enumerate() {
            let (area, grads) = self.mesh.element_geometry(e);
            let g = self.mesh.element_gradient(e, u);
            let (ex, norm) = Self::excess(g);
            let s = if ex > 0.0 { 1.0 + 2.0 * self.alpha * ex / norm } else { 1.0 };
            let q = [s * g[0], s * g[1]];
            for (a, &v) in nodes.iter().enumerate() {
                if let Some(i) = self.mesh.interior_index(v) {
                    d[i] += area * (q[0] * grads[a][0] + q[1] * grads[a][1]);
                }
            }
        }
        Ok(DualVector::new(d))
    }

    fn hessian(&self, u: &PrimalVector) -> Result<SecondOrderForm> {
        check_len(self.dim(), u.len())?;
        let mut triplets = Vec::with_capacity(9 * self.mesh.elements().len() + self.dim());
        for (e, nodes) in self.mesh.elements().iter().enumerate() {
            let (area, grads) = self.mesh.element_geometry(e);
            let g = self.mesh.element_gradient(e, u);
            let (ex, norm) = Self::excess(g);
            // I + 2α[(ex/|g|)(I − n⊗n) + 1{|g| ≥ 1} n⊗n]
            let mut d = [[1.0, 0.0], [0.0, 1.0]];
            if self.alpha != 0.0 && norm >= 1.0 {
                let n = [g[0] / norm, g[1] / norm];
                let t = ex / norm;
                for r in 0..2 {
                    for c in 0..2 {
                        let nn = n[r] * n[c];
                        let id = if r == c { 1.0 } else { 0.0 };
                        d[r][c] += 2.0 * self.alpha * (t * (id - nn) + nn);
                    }
                }
            }
            for (a, &va) in nodes.iter().enumerate() {
                let Some(i) = self.mesh.interior_index(va) else { continue };
                let da = [
                    d[0][0] * grads[a][0] + d[1][0] * grads[a][1],
                    d[0][1] * grads[a][0] + d[1][1] * grads[a][1],
                ];
                for (b, &vb) in nodes.iter().enumerate() {
                    let Some(j) = self.mesh.interior_index(vb) else { continue };
                    triplets.push((i, j, area * (da[0] * grads[b][0] + da[1] * grads[b][1])));
                }
            }
        }
        for (i, (w, &v)) in self.weights.iter().zip(u.iter()).enumerate() {
            if self.beta != 0.0 {
                triplets.push((i, i, 6.0 * self.beta * w * v));
            }
        }
        Ok(SecondOrderForm::new(CsrMatrix::from_triplets(self.dim(), triplets)))
    }
}

/// Toy problem on `mesh` with `g = Σ wᵢ c |uᵢ|` (lumped weights `wᵢ`).
pub fn make_toy_problem(
    params: &ToyProblemParams,
    mesh: Arc<Mesh>,
    ip: Arc<InnerProduct>,
) -> Result<CompositeProblem> {
    params.validate()?;
    let smooth = ToySmooth::new(Arc::clone(&mesh), params);
    let l1 = smooth.weights.iter().map(|w| w * params.c).collect();
    CompositeProblem::new(Arc::new(smooth), NonsmoothPart::weighted_l1(l1), ip)
}
