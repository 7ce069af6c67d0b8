//! Cyclic Jacobi eigensolver for small complex Hermitian matrices.

use num_complex::Complex64;

/// Dense row-major square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.n + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.n + c] = v;
    }

    /// Adds `w * x x^H`.
    pub fn add_outer(&mut self, x: &[Complex64], w: f64) {
        for r in 0..self.n {
            let xr = x[r] * w;
            for c in 0..self.n {
                self.data[r * self.n + c] += xr * x[c].conj();
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// Replaces the matrix with `(A + A^H) / 2`.
    pub fn symmetrize(&mut self) {
        for r in 0..self.n {
            for c in r..self.n {
                let v = (self.get(r, c) + self.get(c, r).conj()) * 0.5;
                self.set(r, c, v);
                self.set(c, r, v.conj());
            }
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Eigen-decomposition `A = V diag(values) V^H`, eigenvalues sorted in
/// descending order (stable), `vectors[k]` the unit eigenvector of `values[k]`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<Complex64>>,
}

pub fn hermitian_eigen(a: &CMatrix) -> Eigen {
    let n = a.n;
    let mut m = a.clone();
    m.symmetrize();
    let mut v = CMatrix::identity(n);
    let scale = m.frobenius();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| m.get(r, c).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                // unitary phase on index q makes a_pq real and positive
                let d = (apq / r).conj();
                for k in 0..n {
                    let x = m.get(k, q) * d;
                    m.set(k, q, x);
                }
                for k in 0..n {
                    let x = m.get(q, k) * d.conj();
                    m.set(q, k, x);
                }
                for k in 0..n {
                    let x = v.get(k, q) * d;
                    v.set(k, q, x);
                }
                let app = m.get(p, p).re;
                let aqq = m.get(q, q).re;
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (kp, kq) = (m.get(k, p), m.get(k, q));
                    m.set(k, p, kp * c - kq * s);
                    m.set(k, q, kp * s + kq * c);
                }
                for k in 0..n {
                    let (pk, qk) = (m.get(p, k), m.get(q, k));
                    m.set(p, k, pk * c - qk * s);
                    m.set(q, k, pk * s + qk * c);
                }
                for k in 0..n {
                    let (kp, kq) = (v.get(k, p), v.get(k, q));
                    v.set(k, p, kp * c - kq * s);
                    v.set(k, q, kp * s + kq * c);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).re.total_cmp(&m.get(i, i).re));
    Eigen {
        values: order.iter().map(|&i| m.get(i, i).re).collect(),
        vectors: order.iter().map(|&i| (0..n).map(|k| v.get(k, i)).collect()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let mut a = CMatrix::zeros(n);
        for r in 0..n {
            for c in 0..n {
                a.set(r, c, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            }
        }
        a.symmetrize();
        a
    }

    #[test]
    fn reconstructs_random_hermitian_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 2, 4, 8] {
            for _ in 0..20 {
                let a = random_hermitian(n, &mut rng);
                let e = hermitian_eigen(&a);
                assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
                for r in 0..n {
                    for c in 0..n {
                        let s: Complex64 = (0..n).map(|k| e.vectors[k][r] * e.values[k] * e.vectors[k][c].conj()).sum();
                        assert!((s - a.get(r, c)).norm() < 1e-10);
                        let dot: Complex64 = (0..n).map(|k| e.vectors[r][k].conj() * e.vectors[c][k]).sum();
                        let want = if r == c { 1.0 } else { 0.0 };
                        assert!((dot - want).norm() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn identity_keeps_canonical_basis() {
        let e = hermitian_eigen(&CMatrix::identity(4));
        assert_eq!(e.values, vec![1.0; 4]);
        for (k, v) in e.vectors.iter().enumerate() {
            for (i, x) in v.iter().enumerate() {
                assert_eq!(x.re, if i == k { 1.0 } else { 0.0 });
            }
        }
    }
}
