//! Banded Cholesky factorization `A = L Lᵀ`.
//!
//! With lexicographic node numbering the P1 operators on an `N × N` grid have
//! half-bandwidth `N`, so the factor costs `O(n N²)` and fill stays inside the
//! band. Dense matrices are the special case `bandwidth = n − 1`.

use super::sparse::CsrMatrix;
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    /// Row `i` holds `L[i, i − bw ..= i]` at offsets `0..=bw`.
    band: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for (i, j, v) in a.triplets() {
            if j <= i {
                band[i * w + (j + bw - i)] = v;
            }
        }
        for i in 0..n {
            let lo_i = i.saturating_sub(bw);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(bw));
                let mut s = band[i * w + (j + bw - i)];
                for k in lo..j {
                    s -= band[i * w + (k + bw - i)] * band[j * w + (k + bw - j)];
                }
                if i == j {
                    let scale = a.diag(i).abs().max(f64::MIN_POSITIVE);
                    if !(s > 1e-13 * scale) {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                    }
                    band[i * w + bw] = s.sqrt();
                } else {
                    band[i * w + (j + bw - i)] = s / band[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, band })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, b.len())?;
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.band[i * w + (k + bw - i)] * y[k];
            }
            y[i] = s / self.band[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n.min(i + bw + 1) {
                s -= self.band[k * w + (i + bw - k)] * y[k];
            }
            y[i] = s / self.band[i * w + bw];
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solves_dense_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 12;
        let b: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|k| b[k * n + i] * b[k * n + j]).sum::<f64>();
            }
            a[i * n + i] += 0.5;
        }
        let m = CsrMatrix::from_dense(n, &a);
        let chol = BandedCholesky::factor(&m).unwrap();
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 3.0).collect();
        let rhs = m.mul_vec(&x).unwrap();
        let sol = chol.solve(&rhs).unwrap();
        for (s, e) in sol.iter().zip(&x) {
            assert!((s - e).abs() < 1e-10);
        }
    }

    #[test]
    fn tridiagonal_band() {
        let n = 50;
        let m = CsrMatrix::from_triplets(
            n,
            (0..n).flat_map(|i| {
                let mut t = vec![(i, i, 2.0)];
                if i + 1 < n {
                    t.push((i, i + 1, -1.0));
                    t.push((i + 1, i, -1.0));
                }
                t
            }),
        );
        let chol = BandedCholesky::factor(&m).unwrap();
        let rhs = vec![1.0; n];
        let x = chol.solve(&rhs).unwrap();
        let back = m.mul_vec(&x).unwrap();
        assert!(back.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn indefinite_is_rejected() {
        let m = CsrMatrix::from_dense(2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(BandedCholesky::factor(&m), Err(Error::NotPositiveDefinite { pivot: 1, .. })));
    }
}
