//! Independent reference implementations used as test oracles: spherical
//! harmonics by quadrature and a bitmask second-quantization engine.
#![allow(dead_code)]

use std::f64::consts::PI;

use hxx_core::space::{enumerate_configurations, ConfigConstraint, HilbertSpace, ShellKind, ShellLayout};
use hxx_core::C64;
use nalgebra::DMatrix;

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Associated Legendre P_l^m(x), m >= 0, Condon–Shortley phase.
fn legendre(l: i32, m: i32, x: f64) -> f64 {
    let mut pmm = 1.0;
    let s = (1.0 - x * x).sqrt();
    for k in 0..m {
        pmm *= -((2 * k + 1) as f64) * s;
    }
    if l == m {
        return pmm;
    }
    let mut p1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return p1;
    }
    let mut p0 = pmm;
    for ll in (m + 2)..=l {
        let p2 = ((2 * ll - 1) as f64 * x * p1 - (ll + m - 1) as f64 * p0) / (ll - m) as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

pub fn ylm(l: i32, m: i32, x: f64, phi: f64) -> C64 {
    let am = m.abs();
    let norm = ((2 * l + 1) as f64 / (4.0 * PI) * factorial((l - am) as u32) / factorial((l + am) as u32)).sqrt();
    let y = C64::from_polar(norm * legendre(l, am, x), am as f64 * phi);
    if m >= 0 {
        y
    } else if am % 2 == 0 {
        y.conj()
    } else {
        -y.conj()
    }
}

pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
                break;
            }
        }
        xs[i] = x;
    }
    (xs, ws)
}

/// sqrt(4π/(2k+1)) ∫ conj(Y_{l1 m1}) Y_{k, m1-m2} Y_{l2 m2} dΩ by quadrature.
pub fn gaunt_quadrature(l1: i32, m1: i32, l2: i32, m2: i32, k: i32) -> f64 {
    let q = m1 - m2;
    if q.abs() > k {
        return 0.0;
    }
    let (xs, ws) = gauss_legendre(24);
    let nphi = 48;
    let mut acc = C64::new(0.0, 0.0);
    for (x, w) in xs.iter().zip(&ws) {
        for j in 0..nphi {
            let phi = 2.0 * PI * j as f64 / nphi as f64;
            acc += ylm(l1, m1, *x, phi).conj() * ylm(k, q, *x, phi) * ylm(l2, m2, *x, phi) * (*w * 2.0 * PI / nphi as f64);
        }
    }
    assert!(acc.im.abs() < 1e-12);
    (4.0 * PI / (2 * k + 1) as f64).sqrt() * acc.re
}

/// Spin-orbital of an atomic shell in a bitmask oracle.
#[derive(Clone, Copy, Debug)]
pub struct Orb {
    pub shell: usize,
    pub l: i32,
    pub m: i32,
    pub spin: usize,
}

/// Spin-orbital list in the same index convention as the library
/// (offset + 2·(m+l) + spin), for atomic shells only.
pub fn orbitals(ls: &[i32]) -> Vec<Orb> {
    let mut out = Vec::new();
    for (s, &l) in ls.iter().enumerate() {
        for m in -l..=l {
            for spin in 0..2 {
                out.push(Orb { shell: s, l, m, spin });
            }
        }
    }
    out
}

/// a†_a a†_b a_d a_c applied to a bitmask determinant.
pub fn apply_two_body(det: u64, a: usize, b: usize, c: usize, d: usize) -> Option<(u64, f64)> {
    let mut state = det;
    let mut sign = 1.0;
    for (p, create) in [(c, false), (d, false), (b, true), (a, true)] {
        let bit = 1u64 << p;
        if (state & bit != 0) == create {
            return None;
        }
        if (state & (bit - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        state ^= bit;
    }
    Some((state, sign))
}

/// Brute-force Coulomb matrix ½ Σ_abcd ⟨ab|g|cd⟩ a†_a a†_b a_d a_c over the
/// given determinants. `radial(k, shells of a,b,c,d)` supplies R^k.
pub fn coulomb_matrix(orbs: &[Orb], dets: &[u64], radial: &dyn Fn(i32, [usize; 4]) -> f64) -> DMatrix<f64> {
    let n = orbs.len();
    let mut v = Vec::new();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let (oa, ob, oc, od) = (orbs[a], orbs[b], orbs[c], orbs[d]);
                    if oa.spin != oc.spin || ob.spin != od.spin || oa.m + ob.m != oc.m + od.m {
                        continue;
                    }
                    let mut x = 0.0;
                    for k in 0..=6 {
                        let r = radial(k, [oa.shell, ob.shell, oc.shell, od.shell]);
                        if r == 0.0 {
                            continue;
                        }
                        x += r * gaunt_quadrature(oa.l, oa.m, oc.l, oc.m, k) * gaunt_quadrature(od.l, od.m, ob.l, ob.m, k);
                    }
                    if x.abs() > 1e-13 {
                        v.push((a, b, c, d, 0.5 * x));
                    }
                }
            }
        }
    }
    let index: std::collections::HashMap<u64, usize> = dets.iter().enumerate().map(|(i, &d)| (d, i)).collect();
    let mut h = DMatrix::zeros(dets.len(), dets.len());
    for (i, &det) in dets.iter().enumerate() {
        for &(a, b, c, d, x) in &v {
            if let Some((out, s)) = apply_two_body(det, a, b, c, d) {
                h[(index[&out], i)] += s * x;
            }
        }
    }
    h
}

/// All bitmask determinants with `counts[s]` electrons in shell s.
pub fn bitmask_dets(orbs: &[Orb], counts: &[usize]) -> Vec<u64> {
    let n = orbs.len();
    (0u64..(1 << n))
        .filter(|&d| {
            counts
                .iter()
                .enumerate()
                .all(|(s, &c)| orbs.iter().enumerate().filter(|(p, o)| o.shell == s && d >> p & 1 == 1).count() == c)
        })
        .collect()
}

pub fn eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let mut e: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e
}

pub fn eigenvalues_real(m: &DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e
}

/// Groups sorted values into (value, multiplicity) clusters.
pub fn multiplets(values: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for &v in values {
        match out.last_mut() {
            Some(last) if (v - last.0).abs() < tol => last.1 += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

pub fn single_shell(l: usize, electrons: usize) -> HilbertSpace {
    let layout = ShellLayout::new(&[("shell", ShellKind::Atomic { l })]);
    let constraint = ConfigConstraint {
        valence: 0,
        ligand: None,
        min_valence: electrons,
        nhopped: 0,
        core_occupation: vec![],
        twice_sz: None,
    };
    enumerate_configurations("single", &layout, &constraint).unwrap()
}
