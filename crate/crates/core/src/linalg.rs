//! Small dense linear algebra used by the interior-point solver.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major square matrix.
#[derive(Debug, Clone)]
pub(crate) struct Dense<F> {
    pub n: usize,
    pub data: Vec<F>,
}

impl<F: Scalar> Dense<F> {
    pub fn zeros(n: usize) -> Self {
        Dense {
            n,
            data: vec![F::zero(); n * n],
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: F) {
        let n = self.n;
        self.data[i * n + j] = self.data[i * n + j] + v;
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: F) {
        let n = self.n;
        self.data[i * n + j] = v;
    }

    fn mul(&self, x: &[F]) -> Vec<F> {
        let n = self.n;
        (0..n)
            .map(|i| self.data[i * n..(i + 1) * n].iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }
}

/// `L D L'` factorization of a symmetric quasi-definite matrix without
/// pivoting.
///
/// The first `positive` pivots are expected positive and the rest negative.
/// A pivot that is too small or has the wrong sign is replaced by a small
/// value of the expected sign, and solves are refined against the original
/// matrix to recover the lost accuracy.
#[derive(Debug, Clone)]
pub(crate) struct Ldl<F> {
    matrix: Dense<F>,
    l: Vec<F>,
    d: Vec<F>,
    pub bumped: usize,
}

const REFINE_STEPS: usize = 3;

impl<F: Scalar> Ldl<F> {
    pub fn factor(matrix: Dense<F>, positive: usize) -> Result<Self> {
        let n = matrix.n;
        let a = &matrix.data;
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("linear system has non-finite entries".into()));
        }
        let threshold = F::epsilon().powf(F::lit(0.8));
        let bump = F::epsilon().powf(F::lit(0.4));
        let mut l = vec![F::zero(); n * n];
        let mut d = vec![F::zero(); n];
        let mut w = vec![F::zero(); n];
        let mut bumped = 0;
        for j in 0..n {
            for k in 0..j {
                w[k] = l[j * n + k] * d[k];
            }
            let lj = &l[j * n..j * n + j];
            let mut dj = a[j * n + j] - lj.iter().zip(&w[..j]).map(|(&x, &y)| x * y).sum::<F>();
            let sign = if j < positive { F::one() } else { -F::one() };
            if !(sign * dj > threshold) {
                dj = sign * bump;
                bumped += 1;
            }
            d[j] = dj;
            for i in (j + 1)..n {
                let li = &l[i * n..i * n + j];
                let s = a[i * n + j] - li.iter().zip(&w[..j]).map(|(&x, &y)| x * y).sum::<F>();
                l[i * n + j] = s / dj;
            }
        }
        Ok(Ldl {
            matrix,
            l,
            d,
            bumped,
        })
    }

    fn solve_factored(&self, b: &[F]) -> Vec<F> {
        let n = self.matrix.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: F = row.iter().zip(&x[..i]).map(|(&l, &v)| l * v).sum();
            x[i] = x[i] - s;
        }
        for (v, &d) in x.iter_mut().zip(&self.d) {
            *v = *v / d;
        }
        for i in (0..n).rev() {
            let mut s = F::zero();
            for k in (i + 1)..n {
                s = s + self.l[k * n + i] * x[k];
            }
            x[i] = x[i] - s;
        }
        x
    }

    pub fn solve(&self, b: &[F]) -> Vec<F> {
        let mut x = self.solve_factored(b);
        for _ in 0..REFINE_STEPS {
            let ax = self.matrix.mul(&x);
            let r: Vec<F> = b.iter().zip(&ax).map(|(&bi, &a)| bi - a).collect();
            let dx = self.solve_factored(&r);
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi = *xi + d;
            }
        }
        x
    }
}
