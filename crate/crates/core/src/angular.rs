//! Angular-momentum algebra: Wigner 3j symbols, c^k coefficients, spherical
//! tensor matrix elements, real harmonics and their rotation matrices.
//!
//! Real harmonics of rank `l` are ordered `[m0, c1, s1, c2, s2, ...]`, i.e.
//! for d: (z², xz, yz, x²−y², xy), for p: (z, x, y), for f:
//! (z³, xz², yz², z(x²−y²), xyz, x(x²−3y²), y(3x²−y²)).

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64 as C64;

fn factorial(n: i64) -> f64 {
    debug_assert!(n >= 0);
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Wigner 3j symbol for integer arguments (Racah formula).
pub fn wigner_3j(j1: i64, j2: i64, j3: i64, m1: i64, m2: i64, m3: i64) -> f64 {
    if m1 + m2 + m3 != 0 || m1.abs() > j1 || m2.abs() > j2 || m3.abs() > j3 {
        return 0.0;
    }
    if j3 > j1 + j2 || j3 < (j1 - j2).abs() {
        return 0.0;
    }
    let delta = factorial(j1 + j2 - j3) * factorial(j1 - j2 + j3) * factorial(-j1 + j2 + j3)
        / factorial(j1 + j2 + j3 + 1);
    let pre = (factorial(j1 + m1)
        * factorial(j1 - m1)
        * factorial(j2 + m2)
        * factorial(j2 - m2)
        * factorial(j3 + m3)
        * factorial(j3 - m3))
    .sqrt();
    let kmin = 0.max(j2 - j3 - m1).max(j1 - j3 + m2);
    let kmax = (j1 + j2 - j3).min(j1 - m1).min(j2 + m2);
    let mut sum = 0.0;
    for k in kmin..=kmax {
        let denom = factorial(k)
            * factorial(j3 - j2 + k + m1)
            * factorial(j3 - j1 + k - m2)
            * factorial(j1 + j2 - j3 - k)
            * factorial(j1 - k - m1)
            * factorial(j2 - k + m2);
        sum += if k % 2 == 0 { 1.0 } else { -1.0 } / denom;
    }
    let phase = if (j1 - j2 - m3).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    phase * delta.sqrt() * pre * sum
}

/// ⟨l' m'| C^k_q |l m⟩ for the renormalized spherical harmonic C^k_q.
pub fn tensor_element(lp: usize, mp: i32, k: usize, q: i32, l: usize, m: i32) -> f64 {
    let (lp, mp, k, q, l, m) = (lp as i64, mp as i64, k as i64, q as i64, l as i64, m as i64);
    let reduced = wigner_3j(lp, k, l, 0, 0, 0);
    if reduced == 0.0 {
        return 0.0;
    }
    let phase = if mp.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    phase * (((2 * l + 1) * (2 * lp + 1)) as f64).sqrt() * reduced * wigner_3j(lp, k, l, -mp, q, m)
}

/// Condon–Shortley c^k(l1 m1, l2 m2).
pub fn gaunt_ck(l1: usize, m1: i32, l2: usize, m2: i32, k: usize) -> f64 {
    tensor_element(l1, m1, k, m1 - m2, l2, m2)
}

/// Rows: real harmonics; columns: complex harmonics m = -l..l.
/// `real_i = Σ_m U[i, m+l] Y_m`.
pub fn real_to_complex(l: usize) -> DMatrix<C64> {
    let n = 2 * l + 1;
    let li = l as i32;
    let mut u = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    let col = |m: i32| (m + li) as usize;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    u[(0, col(0))] = C64::new(1.0, 0.0);
    for mm in 1..=li {
        let sign = if mm % 2 == 0 { 1.0 } else { -1.0 };
        let c = 2 * mm as usize - 1;
        let s = 2 * mm as usize;
        u[(c, col(mm))] = C64::new(sign * r, 0.0);
        u[(c, col(-mm))] = C64::new(r, 0.0);
        u[(s, col(-mm))] = C64::new(0.0, r);
        u[(s, col(mm))] = C64::new(0.0, -sign * r);
    }
    u
}

/// Wigner small-d matrix d^l_{m'm}(β), indices shifted by l.
pub fn wigner_small_d(l: usize, beta: f64) -> DMatrix<f64> {
    let j = l as i64;
    let n = 2 * l + 1;
    let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    DMatrix::from_fn(n, n, |a, b| {
        let mp = a as i64 - j;
        let m = b as i64 - j;
        let pre = (factorial(j + mp) * factorial(j - mp) * factorial(j + m) * factorial(j - m)).sqrt();
        let smin = 0.max(m - mp);
        let smax = (j + m).min(j - mp);
        let mut sum = 0.0;
        for k in smin..=smax {
            let sign = if (mp - m + k).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let denom = factorial(j + m - k) * factorial(k) * factorial(mp - m + k) * factorial(j - mp - k);
            sum += sign * c.powi((2 * j + m - mp - 2 * k) as i32) * s.powi((mp - m + 2 * k) as i32) / denom;
        }
        pre * sum
    })
}

/// D^l_{m'm}(α, β, γ) = e^{-i m' α} d^l_{m'm}(β) e^{-i m γ}.
pub fn wigner_big_d(l: usize, alpha: f64, beta: f64, gamma: f64) -> DMatrix<C64> {
    let d = wigner_small_d(l, beta);
    let li = l as i32;
    DMatrix::from_fn(2 * l + 1, 2 * l + 1, |a, b| {
        let mp = (a as i32 - li) as f64;
        let m = (b as i32 - li) as f64;
        C64::from_polar(d[(a, b)], -(mp * alpha + m * gamma))
    })
}

/// Orientation of a bond: Euler angles (φ, θ, 0) and the Cartesian rotation
/// whose columns are the bond-frame axes x̃, ỹ, z̃ (z̃ along the bond).
#[derive(Clone, Copy, Debug)]
pub struct BondFrame {
    pub theta: f64,
    pub phi: f64,
    pub axes: Matrix3<f64>,
}

impl BondFrame {
    pub fn new(direction: &Vector3<f64>) -> Self {
        let r = direction.norm();
        let theta = (direction.z / r).clamp(-1.0, 1.0).acos();
        let phi = if direction.x.abs() + direction.y.abs() < 1e-14 * r { 0.0 } else { direction.y.atan2(direction.x) };
        let (st, ct, sp, cp) = (theta.sin(), theta.cos(), phi.sin(), phi.cos());
        #[rustfmt::skip]
        let axes = Matrix3::new(
            cp * ct, -sp, cp * st,
            sp * ct,  cp, sp * st,
            -st,     0.0, ct,
        );
        BondFrame { theta, phi, axes }
    }

    /// Column `a` holds the bond-frame real harmonic `a` expanded on the
    /// global real harmonics of rank `l`.
    pub fn real_rotation(&self, l: usize) -> DMatrix<f64> {
        real_rotation(l, self.phi, self.theta, 0.0)
    }
}

/// Real-harmonic representation of the rotation R(α, β, γ):
/// `R real_j = Σ_i M[i, j] real_i`.
pub fn real_rotation(l: usize, alpha: f64, beta: f64, gamma: f64) -> DMatrix<f64> {
    let u = real_to_complex(l);
    let d = wigner_big_d(l, alpha, beta, gamma);
    // R Y_m = Σ_m' Y_m' D[m', m]; Y_m' = Σ_i conj(U[i, m']) real_i
    let m = u.map(|z| z.conj()) * d * u.transpose();
    m.map(|z| {
        debug_assert!(z.im.abs() < 1e-10);
        z.re
    })
}

/// Real-harmonic rotation matrix for a general proper rotation, via its
/// zyz Euler angles.
pub fn real_rotation_of(l: usize, rot: &Matrix3<f64>) -> DMatrix<f64> {
    let (alpha, beta, gamma) = euler_zyz(rot);
    real_rotation(l, alpha, beta, gamma)
}

/// zyz Euler angles with R = Rz(α) Ry(β) Rz(γ).
pub fn euler_zyz(rot: &Matrix3<f64>) -> (f64, f64, f64) {
    let beta = rot[(2, 2)].clamp(-1.0, 1.0).acos();
    if beta.sin().abs() > 1e-12 {
        let alpha = rot[(1, 2)].atan2(rot[(0, 2)]);
        let gamma = rot[(2, 1)].atan2(-rot[(2, 0)]);
        (alpha, beta, gamma)
    } else if rot[(2, 2)] > 0.0 {
        (rot[(1, 0)].atan2(rot[(0, 0)]), 0.0, 0.0)
    } else {
        (rot[(1, 0)].atan2(-rot[(0, 0)]), std::f64::consts::PI, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn monopole_is_unity() {
        for l in 0..4 {
            for m in -(l as i32)..=(l as i32) {
                assert_abs_diff_eq!(gaunt_ck(l, m, l, m, 0), 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn c2_d0_d0() {
        assert_abs_diff_eq!(gaunt_ck(2, 0, 2, 0, 2), 2.0 / 7.0, epsilon = 1e-14);
    }

    #[test]
    fn triangle_and_parity_rules() {
        assert_eq!(gaunt_ck(2, 1, 2, 1, 5), 0.0);
        assert_eq!(gaunt_ck(2, 1, 2, 1, 1), 0.0);
        assert_eq!(gaunt_ck(1, 0, 2, 0, 2), 0.0);
    }

    #[test]
    fn gaunt_exchange_symmetry() {
        for (l1, l2) in [(1, 2), (2, 2), (2, 3), (0, 2)] {
            for k in 0..=(l1 + l2) {
                for m1 in -(l1 as i32)..=(l1 as i32) {
                    for m2 in -(l2 as i32)..=(l2 as i32) {
                        let sign = if (m1 - m2).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                        assert_abs_diff_eq!(
                            gaunt_ck(l1, m1, l2, m2, k),
                            sign * gaunt_ck(l2, m2, l1, m1, k),
                            epsilon = 1e-13
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn three_j_known_value() {
        // (1 1 0; 1 -1 0) = 1/sqrt(3)
        assert_abs_diff_eq!(wigner_3j(1, 1, 0, 1, -1, 0), 1.0 / 3f64.sqrt(), epsilon = 1e-14);
        // (2 2 2; 0 0 0)^2 = 2/35
        assert_abs_diff_eq!(wigner_3j(2, 2, 2, 0, 0, 0).powi(2), 2.0 / 35.0, epsilon = 1e-14);
    }

    #[test]
    fn u_is_unitary() {
        for l in 0..4 {
            let u = real_to_complex(l);
            let id = &u * u.adjoint();
            for i in 0..2 * l + 1 {
                for j in 0..2 * l + 1 {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(id[(i, j)].re, e, epsilon = 1e-14);
                    assert_abs_diff_eq!(id[(i, j)].im, 0.0, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn p_rotation_maps_z_onto_bond() {
        let n = Vector3::new(0.3, -0.5, 0.8).normalize();
        let frame = BondFrame::new(&n);
        let m1 = frame.real_rotation(1);
        // real p order (z, x, y)
        assert_abs_diff_eq!(m1[(0, 0)], n.z, epsilon = 1e-12);
        assert_abs_diff_eq!(m1[(1, 0)], n.x, epsilon = 1e-12);
        assert_abs_diff_eq!(m1[(2, 0)], n.y, epsilon = 1e-12);
        // bond-frame x̃ axis
        assert_abs_diff_eq!(m1[(1, 1)], frame.axes[(0, 0)], epsilon = 1e-12);
        assert_abs_diff_eq!(m1[(2, 1)], frame.axes[(1, 0)], epsilon = 1e-12);
        assert_abs_diff_eq!(m1[(0, 1)], frame.axes[(2, 0)], epsilon = 1e-12);
    }

    #[test]
    fn real_rotations_are_orthogonal() {
        for l in 1..4 {
            let m = real_rotation(l, 0.4, 1.1, -0.7);
            let id = &m * m.transpose();
            assert!((id - DMatrix::<f64>::identity(2 * l + 1, 2 * l + 1)).norm() < 1e-12);
        }
    }

    #[test]
    fn euler_round_trip() {
        let m = real_rotation(1, 0.4, 1.1, -0.7);
        // rebuild Cartesian from the p block: rows/cols in (z, x, y) order
        let perm = [1usize, 2, 0];
        let cart = Matrix3::from_fn(|i, j| m[(perm[i], perm[j])]);
        let (a, b, g) = euler_zyz(&cart);
        assert_abs_diff_eq!(a, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 1.1, epsilon = 1e-12);
        assert_abs_diff_eq!(g, -0.7, epsilon = 1e-12);
    }
}
