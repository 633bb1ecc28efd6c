mod common;

use approx::assert_abs_diff_eq;
use common::*;
use hxx_core::hamiltonian::{coulomb_intra, Integral, SlaterParams};
use hxx_core::operator::{DenseOperator, LinearOperator};
use hxx_core::solvers::*;
use hxx_core::sparse::project;
use hxx_core::{Error, C64};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_hermitian(n: usize, seed: u64) -> DMatrix<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    (&a + a.adjoint()) * C64::new(0.5, 0.0)
}

fn random_unitary(n: usize, seed: u64) -> DMatrix<C64> {
    random_hermitian(n, seed).symmetric_eigen().eigenvectors
}

fn lanczos_only(nev: usize) -> LanczosOptions {
    LanczosOptions { dense_threshold: 0, ..LanczosOptions::nev(nev) }
}

#[test]
fn lowest_eigenpairs_match_dense() {
    let m = random_hermitian(300, 1);
    let expected = eigenvalues(&m);
    let op = DenseOperator::new(m);
    let got = lowest_eigenpairs(&op, &lanczos_only(8)).unwrap();
    for i in 0..8 {
        assert_abs_diff_eq!(got.values[i], expected[i], epsilon = 1e-9);
        assert!(got.residuals[i] < 1e-7);
    }
    for i in 0..8 {
        for j in 0..8 {
            let d: C64 = got.vectors[i].iter().zip(&got.vectors[j]).map(|(a, b)| a.conj() * b).sum();
            assert_abs_diff_eq!(d.norm(), if i == j { 1.0 } else { 0.0 }, epsilon = 1e-9);
        }
    }
}

#[test]
fn degenerate_levels_are_all_found() {
    let n = 200;
    let mut d: Vec<f64> = vec![-1.0; 5];
    d.extend([0.0; 3]);
    d.extend((0..n - 8).map(|k| 0.5 + k as f64 * 0.01));
    let u = random_unitary(n, 7);
    let dm = DMatrix::from_diagonal(&DVector::from_iterator(n, d.iter().map(|&x| C64::new(x, 0.0))));
    let op = DenseOperator::new(&u * dm * u.adjoint());
    let got = lowest_eigenpairs(&op, &lanczos_only(6)).unwrap();
    for i in 0..5 {
        assert_abs_diff_eq!(got.values[i], -1.0, epsilon = 1e-9);
    }
    assert_abs_diff_eq!(got.values[5], 0.0, epsilon = 1e-9);
}

#[test]
fn d4_ground_multiplet_from_sparse_operator() {
    let space = single_shell(2, 4);
    let p = SlaterParams {
        values: [(Integral::F(0), 0.0), (Integral::F(2), 10.0), (Integral::F(4), 6.0)].into_iter().collect(),
        reduc: 1.0,
    };
    let op = project(&coulomb_intra(space.layout(), 0, &p).unwrap(), &space, &space).unwrap();
    let expected = eigenvalues(&op.to_dense());
    let got = lowest_eigenpairs(&op, &lanczos_only(30)).unwrap();
    for i in 0..30 {
        assert_abs_diff_eq!(got.values[i], expected[i], epsilon = 1e-9);
    }
    assert!(got.values[..25].iter().all(|v| (v - expected[0]).abs() < 1e-9));
}

#[test]
fn nev_is_clamped_and_small_spaces_go_dense() {
    let m = random_hermitian(10, 2);
    let expected = eigenvalues(&m);
    let op = DenseOperator::new(m);
    let got = lowest_eigenpairs(&op, &LanczosOptions::nev(50)).unwrap();
    assert_eq!(got.values.len(), 10);
    let got_l = lowest_eigenpairs(&op, &lanczos_only(50)).unwrap();
    for i in 0..10 {
        assert_abs_diff_eq!(got.values[i], expected[i], epsilon = 1e-10);
        assert_abs_diff_eq!(got_l.values[i], expected[i], epsilon = 1e-9);
    }
}

#[test]
fn exhausted_restarts_report_not_converged() {
    let op = DenseOperator::new(random_hermitian(400, 3));
    let opts = LanczosOptions { max_restarts: 0, max_basis: Some(6), tol: 1e-14, ..lanczos_only(4) };
    assert!(matches!(lowest_eigenpairs(&op, &opts), Err(Error::NotConverged { .. })));
}

fn dense_green(m: &DMatrix<C64>, b: &[C64], z: C64) -> C64 {
    let n = m.nrows();
    let shifted = DMatrix::from_diagonal_element(n, n, z) - m;
    let x = shifted.lu().solve(&DVector::from_row_slice(b)).unwrap();
    DVector::from_row_slice(b).dotc(&x)
}

#[test]
fn continued_fraction_matches_dense_resolvent() {
    let m = random_hermitian(60, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let b: Vec<C64> = (0..60).map(|_| C64::new(rng.gen(), rng.gen())).collect();
    let op = DenseOperator::new(m.clone());
    let tri = tridiagonalize(&op, &b, 200).unwrap();
    for w in [-2.0, -0.3, 0.0, 0.7, 3.0] {
        let z = C64::new(w, 0.3);
        let g = continued_fraction(&tri, z);
        let g0 = dense_green(&m, &b, z);
        assert!((g - g0).norm() < 1e-8 * g0.norm(), "{g} vs {g0}");
        assert!(g.im <= 0.0);
    }
}

#[test]
fn tridiagonalize_breaks_down_on_eigenvector() {
    let m = DMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(3.0, 0.0)]));
    let op = DenseOperator::new(m);
    let tri = tridiagonalize(&op, &[C64::new(0.0, 0.0), C64::new(2.0, 0.0), C64::new(0.0, 0.0)], 10).unwrap();
    assert_eq!(tri.alpha, vec![2.0]);
    assert!(tri.beta.is_empty());
    assert_abs_diff_eq!(tri.seed_norm, 2.0);
    let g = tri.continued_fraction(C64::new(2.5, 0.1));
    assert!((g - 4.0 / C64::new(0.5, 0.1)).norm() < 1e-14);
    assert!(matches!(tridiagonalize(&op, &[C64::new(0.0, 0.0); 3], 10), Err(Error::ZeroSeed)));
    assert!(matches!(tridiagonalize(&op, &[C64::new(1.0, 0.0); 2], 10), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn resolvent_matches_dense_solve() {
    let m = random_hermitian(250, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let b: Vec<C64> = (0..250).map(|_| C64::new(rng.gen(), rng.gen())).collect();
    let op = DenseOperator::new(m.clone());
    let z = C64::new(0.4, 0.2);
    let x = resolvent_apply(&op, z, &b, &ResolventOptions::default()).unwrap();
    let shifted = DMatrix::from_diagonal_element(250, 250, z) - &m;
    let x0 = shifted.lu().solve(&DVector::from_row_slice(&b)).unwrap();
    let err: f64 = x.iter().zip(x0.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    assert!(err < 1e-6 * x0.norm(), "error {err}");
    let zero = resolvent_apply(&op, z, &vec![C64::new(0.0, 0.0); 250], &ResolventOptions::default()).unwrap();
    assert!(zero.iter().all(|v| v.norm() == 0.0));
    assert_eq!(op.nrows(), 250);
}

#[test]
fn locking_stays_orthogonal_with_large_offset_and_blocks() {
    // 30 decoupled 5x5 blocks around 400 with a near-degenerate bottom
    let n = 150;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut m = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for b in 0..30 {
        let block = random_hermitian(5, 100 + b as u64) * C64::new(20.0, 0.0);
        let shift = 400.0 + 1e-5 * rng.gen::<f64>();
        for i in 0..5 {
            for j in 0..5 {
                m[(5 * b + i, 5 * b + j)] = block[(i, j)] + if i == j { C64::new(shift, 0.0) } else { C64::new(0.0, 0.0) };
            }
        }
    }
    let expected = eigenvalues(&m);
    let got = lowest_eigenpairs(&DenseOperator::new(m), &lanczos_only(10)).unwrap();
    for i in 0..10 {
        assert_abs_diff_eq!(got.values[i], expected[i], epsilon = 1e-7);
    }
}
