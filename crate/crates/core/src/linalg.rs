//! Banded direct solver for the Newton and inverse-iteration systems.
//!
//! The matrices assembled here are diagonally dominant M-matrix
//! perturbations, so LU without pivoting is stable and keeps the band.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku, "({i}, {j}) outside band");
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            return 0.0;
        }
        self.data[self.slot(i, j)]
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// In-place LU factorization.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        for k in 0..n {
            let piv = self.data[self.slot(k, k)];
            if piv.abs() < f64::MIN_POSITIVE || !piv.is_finite() {
                return Err(Error::SingularMatrix(k));
            }
            let imax = (k + self.kl).min(n - 1);
            let jmax = (k + self.ku).min(n - 1);
            for i in k + 1..=imax {
                let sik = self.slot(i, k);
                let l = self.data[sik] / piv;
                if l == 0.0 {
                    continue;
                }
                self.data[sik] = l;
                for j in k + 1..=jmax {
                    let akj = self.data[self.slot(k, j)];
                    let sij = self.slot(i, j);
                    self.data[sij] -= l * akj;
                }
            }
        }
        Ok(BandLu { m: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
}

impl BandLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let a = &self.m;
        let n = a.n;
        for i in 0..n {
            let lo = i.saturating_sub(a.kl);
            let mut s = b[i];
            for j in lo..i {
                s -= a.data[a.slot(i, j)] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + a.ku).min(n - 1);
            let mut s = b[i];
            for j in i + 1..=hi {
                s -= a.data[a.slot(i, j)] * b[j];
            }
            b[i] = s / a.data[a.slot(i, i)];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tridiagonal_against_dense_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(1, 0, 0), (7, 1, 1), (40, 3, 5), (25, 6, 2)] {
            let mut a = BandMatrix::zeros(n, kl, ku);
            for i in 0..n {
                let mut off = 0.0;
                for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                    if j != i {
                        let v: f64 = rng.gen_range(-1.0..1.0);
                        off += v.abs();
                        a.set(i, j, v);
                    }
                }
                a.set(i, i, off + rng.gen_range(0.5..2.0));
            }
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let b = a.mul_vec(&x);
            let y = a.clone().factor().unwrap().solve(&b);
            for (p, q) in x.iter().zip(&y) {
                assert!((p - q).abs() < 1e-12, "{p} {q}");
            }
        }
    }

    #[test]
    fn zero_pivot_reported() {
        let a = BandMatrix::zeros(3, 1, 1);
        assert!(matches!(a.factor(), Err(Error::SingularMatrix(0))));
    }
}
