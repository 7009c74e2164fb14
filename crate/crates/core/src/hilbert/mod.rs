//! Discretized Hilbert-space linear algebra: coefficient vectors, the H¹
//! inner product on P1 elements, and the Riesz map it induces.

mod cholesky;
mod mesh;
mod sparse;

pub use cholesky::BandedCholesky;
pub use mesh::Mesh;
pub use sparse::CsrMatrix;

use crate::error::{check_len, Error, Result};
use std::ops::{Deref, DerefMut};

macro_rules! coefficient_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Default)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(coefficients: Vec<f64>) -> Self {
                Self(coefficients)
            }

            pub fn zeros(n: usize) -> Self {
                Self(vec![0.0; n])
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }

            /// `self + s·other`
            pub fn add_scaled(&self, s: f64, other: &Self) -> Self {
                debug_assert_eq!(self.len(), other.len());
                Self(self.0.iter().zip(&other.0).map(|(a, b)| a + s * b).collect())
            }

            pub fn sub(&self, other: &Self) -> Self {
                self.add_scaled(-1.0, other)
            }

            pub fn scale(&self, s: f64) -> Self {
                Self(self.0.iter().map(|a| s * a).collect())
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|v| v.is_finite())
            }
        }

        impl Deref for $name {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                Self(v)
            }
        }
    };
}

coefficient_vector!(
    /// Nodal coefficients of an element of the discrete space.
    PrimalVector
);
coefficient_vector!(
    /// Coefficients of a functional; acts on primal vectors by the plain dot product.
    DualVector
);

impl DualVector {
    /// Duality pairing `φ(v)`.
    pub fn apply(&self, v: &PrimalVector) -> f64 {
        dot(self, v)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// SPD operator `M` defining `⟨u, v⟩ = uᵀ M v`, with a stored factorization
/// for the inverse Riesz map and dual norms.
#[derive(Debug, Clone)]
pub struct InnerProduct {
    matrix: CsrMatrix,
    factor: BandedCholesky,
}

impl InnerProduct {
    pub fn from_matrix(matrix: CsrMatrix) -> Result<Self> {
        let factor = BandedCholesky::factor(&matrix)?;
        Ok(Self { matrix, factor })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_matrix(CsrMatrix::identity(n)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn inner(&self, u: &PrimalVector, v: &PrimalVector) -> Result<f64> {
        check_len(self.dim(), u.len())?;
        Ok(dot(&self.riesz(v)?, u))
    }

    /// `R v = M v`
    pub fn riesz(&self, v: &PrimalVector) -> Result<DualVector> {
        Ok(DualVector::new(self.matrix.mul_vec(v)?))
    }

    /// Solves `M u = φ`.
    pub fn riesz_inv(&self, phi: &DualVector) -> Result<PrimalVector> {
        Ok(PrimalVector::new(self.factor.solve(phi)?))
    }

    pub fn norm_primal(&self, v: &PrimalVector) -> Result<f64> {
        checked_sqrt(self.matrix.quadratic(v)?)
    }

    pub fn norm_dual(&self, phi: &DualVector) -> Result<f64> {
        let u = self.factor.solve(phi)?;
        checked_sqrt(dot(phi, &u))
    }
}

fn checked_sqrt(radicand: f64) -> Result<f64> {
    if radicand < -1e-12 || radicand.is_nan() {
        return Err(Error::Internal(format!("negative squared norm {radicand:e}")));
    }
    Ok(radicand.max(0.0).sqrt())
}

fn assemble_interior(mesh: &Mesh, local: impl Fn(f64, &[[f64; 2]; 3], usize, usize) -> f64) -> CsrMatrix {
    let mut triplets = Vec::with_capacity(9 * mesh.elements().len());
    for (e, nodes) in mesh.elements().iter().enumerate() {
        let (area, grads) = mesh.element_geometry(e);
        for a in 0..3 {
            let Some(i) = mesh.interior_index(nodes[a]) else { continue };
            for b in 0..3 {
                let Some(j) = mesh.interior_index(nodes[b]) else { continue };
                triplets.push((i, j, local(area, &grads, a, b)));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.interior_count(), triplets)
}

/// P1 stiffness matrix `∫ ∇φ_i · ∇φ_j` on the interior nodes.
pub fn assemble_stiffness(mesh: &Mesh) -> CsrMatrix {
    assemble_interior(mesh, |area, g, a, b| area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]))
}

/// Consistent P1 mass matrix `∫ φ_i φ_j` on the interior nodes.
pub fn assemble_mass(mesh: &Mesh) -> CsrMatrix {
    assemble_interior(mesh, |area, _, a, b| if a == b { area / 6.0 } else { area / 12.0 })
}

/// Full H¹ inner product (stiffness + mass) with Dirichlet nodes eliminated.
pub fn assemble_inner_product(mesh: &Mesh) -> Result<InnerProduct> {
    let m = assemble_stiffness(mesh).linear_combination(1.0, &assemble_mass(mesh), 1.0)?;
    InnerProduct::from_matrix(m).map_err(|e| Error::InvalidMesh(format!("H1 factorization failed: {e}")))
}
