//! Linear-operator abstraction shared by the solvers.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

pub trait LinearOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `y = A x`, overwriting `y`.
    fn apply(&self, x: &[C64], y: &mut [C64]);

    fn apply_new(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.nrows()];
        self.apply(x, &mut y);
        y
    }
}

/// Dense matrix operator, mostly for small explicit systems and oracles.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    pub matrix: DMatrix<C64>,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<C64>) -> Self {
        DenseOperator { matrix }
    }

    pub fn from_real(matrix: &DMatrix<f64>) -> Self {
        DenseOperator { matrix: matrix.map(|x| C64::new(x, 0.0)) }
    }
}

impl LinearOperator for DenseOperator {
    fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let m = &self.matrix;
        y.par_iter_mut().enumerate().for_each(|(j, yj)| {
            let mut acc = C64::new(0.0, 0.0);
            for (i, xi) in x.iter().enumerate() {
                acc += m[(j, i)] * xi;
            }
            *yj = acc;
        });
    }
}

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn scale(alpha: C64, x: &mut [C64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}
