//! Krylov solvers: lowest eigenpairs (thick-restart Lanczos in Krylov–Schur
//! form with locking), Lanczos tridiagonalization, continued fractions and
//! resolvent application.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::operator::{axpy, dot, norm, scale, LinearOperator};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Debug)]
pub struct LanczosOptions {
    pub nev: usize,
    /// Residual tolerance ‖Ax − θx‖ ≤ tol·max(1, |θ|).
    pub tol: f64,
    /// Krylov basis size before a restart; `None` means max(2·nev + 10, 40).
    pub max_basis: Option<usize>,
    pub max_restarts: usize,
    pub seed: u64,
    /// Operators up to this dimension are diagonalized densely.
    pub dense_threshold: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { nev: 1, tol: 1e-8, max_basis: None, max_restarts: 200, seed: 0x5eed, dense_threshold: 64 }
    }
}

impl LanczosOptions {
    pub fn nev(nev: usize) -> Self {
        LanczosOptions { nev, ..Default::default() }
    }
}

/// Eigenpairs in ascending order of eigenvalue.
#[derive(Clone, Debug)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
    pub residuals: Vec<f64>,
    pub restarts: usize,
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    let mut v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
    let nv = norm(&v);
    scale(C64::new(1.0 / nv, 0.0), &mut v);
    v
}

/// Orthogonalizes `w` against `basis` twice; returns the accumulated overlaps.
fn orthogonalize<'a, I>(basis: I, w: &mut [C64]) -> Vec<C64>
where
    I: Iterator<Item = &'a Vec<C64>> + Clone,
{
    let mut h = vec![ZERO; basis.clone().count()];
    for _ in 0..2 {
        for (hi, v) in h.iter_mut().zip(basis.clone()) {
            let c = dot(v, w);
            axpy(-c, v, w);
            *hi += c;
        }
    }
    h
}

fn combine(basis: &[Vec<C64>], coef: impl Fn(usize) -> C64, n: usize) -> Vec<C64> {
    let mut out = vec![ZERO; n];
    for (j, v) in basis.iter().enumerate() {
        axpy(coef(j), v, &mut out);
    }
    out
}

fn hermitian_eigen(h: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let herm = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(h.nrows(), h.nrows(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn residual(op: &dyn LinearOperator, theta: f64, x: &[C64]) -> f64 {
    let mut r = op.apply_new(x);
    axpy(C64::new(-theta, 0.0), x, &mut r);
    norm(&r)
}

fn dense_eigenpairs(op: &dyn LinearOperator, nev: usize) -> Eigenpairs {
    let n = op.ncols();
    let mut m = DMatrix::from_element(n, n, ZERO);
    let mut e = vec![ZERO; n];
    for i in 0..n {
        e[i] = C64::new(1.0, 0.0);
        let col = op.apply_new(&e);
        e[i] = ZERO;
        m.set_column(i, &DVector::from_vec(col));
    }
    let (values, vecs) = hermitian_eigen(&m);
    let vectors: Vec<Vec<C64>> = (0..nev).map(|i| vecs.column(i).iter().copied().collect()).collect();
    let residuals = vectors.iter().zip(&values).map(|(x, &t)| residual(op, t, x)).collect();
    Eigenpairs { values: values[..nev].to_vec(), vectors, residuals, restarts: 0 }
}

/// One Krylov–Schur run for the `nev` lowest eigenpairs of `op` restricted
/// to the orthogonal complement of `locked`.
fn krylov_schur(
    op: &dyn LinearOperator,
    locked: &[Vec<C64>],
    nev: usize,
    opts: &LanczosOptions,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, Vec<Vec<C64>>, usize)> {
    let n = op.ncols();
    let room = n - locked.len();
    let max_basis = opts.max_basis.unwrap_or((2 * nev + 10).max(40)).max(nev + 2).min(room);
    let fresh = |rng: &mut ChaCha8Rng, basis: &[Vec<C64>]| -> Option<Vec<C64>> {
        for _ in 0..5 {
            let mut v = random_unit(rng, n);
            orthogonalize(locked.iter().chain(basis), &mut v);
            let nv = norm(&v);
            if nv > 1e-8 {
                scale(C64::new(1.0 / nv, 0.0), &mut v);
                return Some(v);
            }
        }
        None
    };
    // A V = V H + f bᵀ
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let mut h = DMatrix::from_element(0, 0, ZERO);
    let mut b: Vec<C64> = Vec::new();
    let mut f = fresh(rng, &basis).ok_or_else(|| Error::NotConverged { restarts: 0, residuals: vec![] })?;
    let mut scale_est: f64 = 1.0;
    for restart in 0..=opts.max_restarts {
        while basis.len() < max_basis {
            let mut w = op.apply_new(&f);
            let all = locked.iter().chain(&basis).chain(std::iter::once(&f));
            let coeffs = orthogonalize(all, &mut w).split_off(locked.len());
            let m = basis.len();
            let mut grown = DMatrix::from_element(m + 1, m + 1, ZERO);
            grown.view_mut((0, 0), (m, m)).copy_from(&h);
            for i in 0..m {
                // the column from A f must equal conj(b) by Hermiticity
                grown[(i, m)] = 0.5 * (coeffs[i] + b[i].conj());
                grown[(m, i)] = grown[(i, m)].conj();
            }
            grown[(m, m)] = C64::new(coeffs[m].re, 0.0);
            scale_est = scale_est.max(coeffs[m].norm());
            h = grown;
            basis.push(f);
            let beta = norm(&w);
            b = vec![ZERO; m + 1];
            if beta > 1e-12 * scale_est {
                scale(C64::new(1.0 / beta, 0.0), &mut w);
                b[m] = C64::new(beta, 0.0);
                f = w;
            } else {
                // invariant subspace: continue from a random direction
                match fresh(rng, &basis) {
                    Some(v) => f = v,
                    None => {
                        f = vec![ZERO; n];
                        break;
                    }
                }
            }
            if basis.len() >= room {
                break;
            }
        }
        let (theta, y) = hermitian_eigen(&h);
        let m = basis.len();
        let want = nev.min(m);
        let res: Vec<f64> = (0..m).map(|i| (0..m).map(|j| b[j] * y[(j, i)]).sum::<C64>().norm()).collect();
        let converged = (0..want).all(|i| res[i] <= opts.tol * theta[i].abs().max(1.0));
        if converged || m >= room {
            let vectors = (0..want).map(|i| combine(&basis, |j| y[(j, i)], n)).collect();
            return Ok((theta[..want].to_vec(), vectors, restart));
        }
        if restart == opts.max_restarts {
            return Err(Error::NotConverged { restarts: restart, residuals: res[..want].to_vec() });
        }
        let keep = (nev + (m - nev) / 2).min(m - 1).max(nev);
        let new_basis: Vec<Vec<C64>> = (0..keep).map(|i| combine(&basis, |j| y[(j, i)], n)).collect();
        b = (0..keep).map(|i| (0..m).map(|j| b[j] * y[(j, i)]).sum()).collect();
        h = DMatrix::from_fn(keep, keep, |r, c| if r == c { C64::new(theta[r], 0.0) } else { ZERO });
        basis = new_basis;
    }
    unreachable!("loop returns on the last restart")
}

/// The `nev` lowest eigenpairs of a Hermitian operator.
///
/// Degenerate levels are resolved by repeating the Krylov run in the
/// complement of the pairs found so far until no new eigenvalue appears
/// below the current `nev`-th one.
pub fn lowest_eigenpairs(op: &dyn LinearOperator, opts: &LanczosOptions) -> Result<Eigenpairs> {
    let n = op.ncols();
    if op.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: op.nrows() });
    }
    let nev = opts.nev.min(n);
    if nev == 0 {
        return Ok(Eigenpairs { values: vec![], vectors: vec![], residuals: vec![], restarts: 0 });
    }
    if n <= opts.dense_threshold {
        return Ok(dense_eigenpairs(op, nev));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked: Vec<(f64, Vec<C64>)> = Vec::new();
    let mut restarts = 0;
    loop {
        let room = n - locked.len();
        if room == 0 {
            break;
        }
        let basis: Vec<Vec<C64>> = locked.iter().map(|p| p.1.clone()).collect();
        let (values, vectors, r) = krylov_schur(op, &basis, nev.min(room), opts, &mut rng)?;
        restarts += r;
        let full = locked.len() >= nev;
        let threshold = locked.last().map_or(f64::INFINITY, |p| p.0);
        let gap = opts.tol * threshold.abs().max(1.0);
        let new_below = values.first().is_some_and(|&v| v < threshold - gap);
        if full && !new_below {
            break;
        }
        locked.extend(values.into_iter().zip(vectors));
        locked.sort_by(|a, b| a.0.total_cmp(&b.0));
        locked.truncate(nev);
    }
    let residuals = locked.iter().map(|(t, x)| residual(op, *t, x)).collect();
    let (values, vectors) = locked.into_iter().unzip();
    Ok(Eigenpairs { values, vectors, residuals, restarts })
}

/// Lanczos coefficients of a seed vector: diagonal `alpha`, off-diagonal
/// `beta` and the seed norm.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub seed_norm: f64,
}

/// Plain three-term Lanczos recursion from `seed`, at most `nsteps` steps,
/// stopping early on breakdown.
pub fn tridiagonalize(op: &dyn LinearOperator, seed: &[C64], nsteps: usize) -> Result<Tridiagonal> {
    let n = op.ncols();
    if seed.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: seed.len() });
    }
    let seed_norm = norm(seed);
    if seed_norm == 0.0 {
        return Err(Error::ZeroSeed);
    }
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut v: Vec<C64> = seed.iter().map(|x| x / seed_norm).collect();
    let mut prev = vec![ZERO; n];
    let mut w = vec![ZERO; n];
    let mut scale_est: f64 = 0.0;
    for j in 0..nsteps {
        op.apply(&v, &mut w);
        if j > 0 {
            axpy(C64::new(-beta[j - 1], 0.0), &prev, &mut w);
        }
        let a = dot(&v, &w).re;
        axpy(C64::new(-a, 0.0), &v, &mut w);
        alpha.push(a);
        let bj = norm(&w);
        scale_est = scale_est.max(a.abs()).max(bj);
        if j + 1 == nsteps || bj <= 1e-12 * scale_est.max(1.0) {
            break;
        }
        beta.push(bj);
        scale(C64::new(1.0 / bj, 0.0), &mut w);
        std::mem::swap(&mut prev, &mut v);
        std::mem::swap(&mut v, &mut w);
    }
    Ok(Tridiagonal { alpha, beta, seed_norm })
}

impl Tridiagonal {
    /// ‖seed‖² [(z − T)⁻¹]₀₀ evaluated bottom-up as a continued fraction.
    pub fn continued_fraction(&self, z: C64) -> C64 {
        let n = self.alpha.len();
        let mut g = ZERO;
        for j in (0..n).rev() {
            let tail = if j + 1 < n { self.beta[j] * self.beta[j] * g } else { ZERO };
            g = C64::new(1.0, 0.0) / (z - self.alpha[j] - tail);
        }
        g * self.seed_norm * self.seed_norm
    }

    /// Solves (z − T) y = e₀ (Thomas algorithm).
    fn solve_shifted(&self, z: C64) -> Vec<C64> {
        let n = self.alpha.len();
        let mut diag: Vec<C64> = self.alpha.iter().map(|&a| z - a).collect();
        let mut rhs = vec![ZERO; n];
        rhs[0] = C64::new(1.0, 0.0);
        for j in 1..n {
            let l = C64::new(-self.beta[j - 1], 0.0) / diag[j - 1];
            diag[j] -= l * -self.beta[j - 1];
            let r = rhs[j - 1];
            rhs[j] -= l * r;
        }
        let mut y = vec![ZERO; n];
        for j in (0..n).rev() {
            let upper = if j + 1 < n { -self.beta[j] * y[j + 1] } else { ZERO };
            y[j] = (rhs[j] - upper) / diag[j];
        }
        y
    }
}

pub fn continued_fraction(tri: &Tridiagonal, z: C64) -> C64 {
    tri.continued_fraction(z)
}

#[derive(Clone, Debug)]
pub struct ResolventOptions {
    /// Relative residual ‖b − (z − A)x‖ / ‖b‖.
    pub tol: f64,
    pub steps_per_cycle: usize,
    pub max_cycles: usize,
}

impl Default for ResolventOptions {
    fn default() -> Self {
        ResolventOptions { tol: 1e-8, steps_per_cycle: 300, max_cycles: 30 }
    }
}

/// x = (z − A)⁻¹ b for Hermitian A and Im z ≠ 0.
///
/// Each cycle runs a Lanczos recursion on the current residual, solves the
/// projected shifted system and regenerates the Lanczos vectors to form the
/// correction, so memory stays at a few vectors.
pub fn resolvent_apply(op: &dyn LinearOperator, z: C64, b: &[C64], opts: &ResolventOptions) -> Result<Vec<C64>> {
    let n = op.ncols();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: b.len() });
    }
    let bnorm = norm(b);
    let mut x = vec![ZERO; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut rnorm = bnorm;
    for cycle in 0..opts.max_cycles {
        let tri = lanczos_until(op, &r, z, opts.steps_per_cycle, opts.tol * bnorm / rnorm);
        let y = tri.solve_shifted(z);
        // second pass: x += ‖r‖ Σ y_j v_j
        let mut v: Vec<C64> = r.iter().map(|c| c / rnorm).collect();
        let mut prev = vec![ZERO; n];
        let mut w = vec![ZERO; n];
        for j in 0..y.len() {
            axpy(y[j] * rnorm, &v, &mut x);
            if j + 1 == y.len() {
                break;
            }
            op.apply(&v, &mut w);
            if j > 0 {
                axpy(C64::new(-tri.beta[j - 1], 0.0), &prev, &mut w);
            }
            axpy(C64::new(-tri.alpha[j], 0.0), &v, &mut w);
            scale(C64::new(1.0 / tri.beta[j], 0.0), &mut w);
            std::mem::swap(&mut prev, &mut v);
            std::mem::swap(&mut v, &mut w);
        }
        // true residual
        let ax = op.apply_new(&x);
        for i in 0..n {
            r[i] = b[i] - (z * x[i] - ax[i]);
        }
        rnorm = norm(&r);
        log::debug!("resolvent cycle {cycle}: relative residual {:.3e}", rnorm / bnorm);
        if rnorm <= opts.tol * bnorm {
            return Ok(x);
        }
    }
    Err(Error::SolverStalled { iterations: opts.max_cycles * opts.steps_per_cycle, residual: rnorm / bnorm })
}

/// Lanczos on `seed` until the projected shifted-system residual estimate
/// drops below `rel_tol` (relative to ‖seed‖) or `max_steps` is reached.
fn lanczos_until(op: &dyn LinearOperator, seed: &[C64], z: C64, max_steps: usize, rel_tol: f64) -> Tridiagonal {
    let n = op.ncols();
    let seed_norm = norm(seed);
    let mut tri = Tridiagonal { alpha: vec![], beta: vec![], seed_norm };
    let mut v: Vec<C64> = seed.iter().map(|c| c / seed_norm).collect();
    let mut prev = vec![ZERO; n];
    let mut w = vec![ZERO; n];
    let mut scale_est: f64 = 0.0;
    for j in 0..max_steps.min(n) {
        op.apply(&v, &mut w);
        if j > 0 {
            axpy(C64::new(-tri.beta[j - 1], 0.0), &prev, &mut w);
        }
        let a = dot(&v, &w).re;
        axpy(C64::new(-a, 0.0), &v, &mut w);
        tri.alpha.push(a);
        let bj = norm(&w);
        scale_est = scale_est.max(a.abs()).max(bj);
        if bj <= 1e-12 * scale_est.max(1.0) || j + 1 == max_steps.min(n) {
            break;
        }
        if j % 10 == 9 {
            let y = tri.solve_shifted(z);
            if bj * y[j].norm() < 0.1 * rel_tol {
                break;
            }
        }
        tri.beta.push(bj);
        scale(C64::new(1.0 / bj, 0.0), &mut w);
        std::mem::swap(&mut prev, &mut v);
        std::mem::swap(&mut v, &mut w);
    }
    tri
}
