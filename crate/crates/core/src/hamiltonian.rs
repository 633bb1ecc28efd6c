//! Operator builders: Coulomb (per Slater integral), spin-orbit, exchange
//! field, ligand counter term, crystal fields, Slater–Koster hopping and the
//! dipole / quadrupole / effective-dipole transition operators.
//!
//! Every builder returns unit-strength components; parameter values are
//! applied when components are assembled.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::angular::{gaunt_ck, real_to_complex, tensor_element};
use crate::error::{Error, Result};
use crate::fock::{LadderOp, OperatorSum};
use crate::ligand::{pp_maps, BondGeometry, LigandReduction};
use crate::space::{Shell, ShellKind, ShellLayout};

const ONE: C64 = C64::new(1.0, 0.0);

/// A radial Coulomb integral: direct F^k or exchange G^k.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Integral {
    F(usize),
    G(usize),
}

impl Integral {
    pub fn rank(self) -> usize {
        match self {
            Integral::F(k) | Integral::G(k) => k,
        }
    }
}

impl fmt::Display for Integral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Integral::F(k) => write!(f, "F{k}"),
            Integral::G(k) => write!(f, "G{k}"),
        }
    }
}

/// Slater integrals in eV plus the reduction factor applied to every k > 0.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SlaterParams {
    pub values: BTreeMap<Integral, f64>,
    pub reduc: f64,
}

impl SlaterParams {
    pub fn effective(&self, integral: Integral) -> Result<f64> {
        let v = *self.values.get(&integral).ok_or_else(|| Error::MissingIntegral(integral.to_string()))?;
        Ok(if integral.rank() > 0 { v * self.reduc } else { v })
    }
}

fn atomic_l(shell: &Shell) -> Result<usize> {
    shell.l().ok_or_else(|| Error::InvalidConstraint(format!("shell '{}' is not atomic", shell.name)))
}

fn m_range(l: usize) -> std::ops::RangeInclusive<i32> {
    -(l as i32)..=(l as i32)
}

/// Integrals needed for the interaction within a shell of momentum `l`.
pub fn intra_integrals(l: usize) -> Vec<Integral> {
    (0..=l).map(|i| Integral::F(2 * i)).collect()
}

/// Integrals needed between shells of momenta `la` and `lb`.
pub fn inter_integrals(la: usize, lb: usize) -> Vec<Integral> {
    let mut out: Vec<Integral> = (0..=la.min(lb)).map(|i| Integral::F(2 * i)).collect();
    let lo = la.abs_diff(lb);
    out.extend((lo..=la + lb).step_by(2).map(Integral::G));
    out
}

/// Unit-F^k intra-shell Coulomb components,
/// ½ Σ ⟨ab|g_k|cd⟩ c†_a c†_b c_d c_c.
pub fn coulomb_intra_components(layout: &ShellLayout, shell: usize) -> Result<Vec<(Integral, OperatorSum)>> {
    let sh = layout.shell(shell);
    let l = atomic_l(sh)?;
    let mut out = Vec::new();
    for integral in intra_integrals(l) {
        let k = integral.rank();
        let mut op = OperatorSum::new();
        for ma in m_range(l) {
            for mb in m_range(l) {
                for mc in m_range(l) {
                    let md = ma + mb - mc;
                    if md.abs() > l as i32 {
                        continue;
                    }
                    let ang = gaunt_ck(l, ma, l, mc, k) * gaunt_ck(l, md, l, mb, k);
                    if ang == 0.0 {
                        continue;
                    }
                    for s1 in 0..2 {
                        for s2 in 0..2 {
                            let (a, b) = (sh.index_m(ma, s1), sh.index_m(mb, s2));
                            let (c, d) = (sh.index_m(mc, s1), sh.index_m(md, s2));
                            if a == b || c == d {
                                continue;
                            }
                            op.push(
                                C64::new(0.5 * ang, 0.0),
                                vec![LadderOp::create(a), LadderOp::create(b), LadderOp::annihilate(d), LadderOp::annihilate(c)],
                            );
                        }
                    }
                }
            }
        }
        out.push((integral, op.canonicalize()));
    }
    Ok(out)
}

/// Unit direct (F^k) and exchange (G^k) components between two shells.
pub fn coulomb_inter_components(layout: &ShellLayout, shell_a: usize, shell_b: usize) -> Result<Vec<(Integral, OperatorSum)>> {
    if shell_a == shell_b {
        return Err(Error::InvalidConstraint("inter-shell Coulomb needs distinct shells".into()));
    }
    let (sa, sb) = (layout.shell(shell_a), layout.shell(shell_b));
    let (la, lb) = (atomic_l(sa)?, atomic_l(sb)?);
    let mut out = Vec::new();
    for integral in inter_integrals(la, lb) {
        let mut op = OperatorSum::new();
        // Σ_{a,c ∈ A; b,d ∈ B} for direct, Σ_{a,d ∈ A; b,c ∈ B} for exchange
        for ma in m_range(la) {
            for mb in m_range(lb) {
                match integral {
                    Integral::F(k) => {
                        for mc in m_range(la) {
                            let md = ma + mb - mc;
                            if md.abs() > lb as i32 {
                                continue;
                            }
                            let ang = gaunt_ck(la, ma, la, mc, k) * gaunt_ck(lb, md, lb, mb, k);
                            if ang == 0.0 {
                                continue;
                            }
                            for s1 in 0..2 {
                                for s2 in 0..2 {
                                    op.push(
                                        C64::new(ang, 0.0),
                                        vec![
                                            LadderOp::create(sa.index_m(ma, s1)),
                                            LadderOp::create(sb.index_m(mb, s2)),
                                            LadderOp::annihilate(sb.index_m(md, s2)),
                                            LadderOp::annihilate(sa.index_m(mc, s1)),
                                        ],
                                    );
                                }
                            }
                        }
                    }
                    Integral::G(k) => {
                        for mc in m_range(lb) {
                            let md = ma + mb - mc;
                            if md.abs() > la as i32 {
                                continue;
                            }
                            let ang = gaunt_ck(la, ma, lb, mc, k) * gaunt_ck(la, md, lb, mb, k);
                            if ang == 0.0 {
                                continue;
                            }
                            for s1 in 0..2 {
                                for s2 in 0..2 {
                                    op.push(
                                        C64::new(ang, 0.0),
                                        vec![
                                            LadderOp::create(sa.index_m(ma, s1)),
                                            LadderOp::create(sb.index_m(mb, s2)),
                                            LadderOp::annihilate(sa.index_m(md, s2)),
                                            LadderOp::annihilate(sb.index_m(mc, s1)),
                                        ],
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
        out.push((integral, op.canonicalize()));
    }
    Ok(out)
}

fn combine(components: Vec<(Integral, OperatorSum)>, params: &SlaterParams) -> Result<OperatorSum> {
    let mut total = OperatorSum::new();
    for (integral, op) in components {
        total.add(&op.scaled(C64::new(params.effective(integral)?, 0.0)));
    }
    Ok(total.canonicalize())
}

pub fn coulomb_intra(layout: &ShellLayout, shell: usize, params: &SlaterParams) -> Result<OperatorSum> {
    combine(coulomb_intra_components(layout, shell)?, params)
}

pub fn coulomb_inter(layout: &ShellLayout, shell_a: usize, shell_b: usize, params: &SlaterParams) -> Result<OperatorSum> {
    combine(coulomb_inter_components(layout, shell_a, shell_b)?, params)
}

fn ladder_coef(l: usize, m: i32) -> f64 {
    let (l, m) = (l as f64, m as f64);
    (l * (l + 1.0) - m * (m + 1.0)).sqrt()
}

/// ζ Σ l·s over one shell (unit ζ when `zeta` = 1).
pub fn spin_orbit(layout: &ShellLayout, shell: usize, zeta: f64) -> OperatorSum {
    let sh = layout.shell(shell);
    let mut op = OperatorSum::new();
    let Some(l) = sh.l() else { return op };
    for m in m_range(l) {
        op.push_hop(C64::new(zeta * 0.5 * m as f64, 0.0), sh.index_m(m, 0), sh.index_m(m, 0));
        op.push_hop(C64::new(-zeta * 0.5 * m as f64, 0.0), sh.index_m(m, 1), sh.index_m(m, 1));
        if m < l as i32 {
            // ½ (l+ s- + l- s+)
            let c = C64::new(zeta * 0.5 * ladder_coef(l, m), 0.0);
            op.push_hop(c, sh.index_m(m + 1, 1), sh.index_m(m, 0));
            op.push_hop(c, sh.index_m(m, 0), sh.index_m(m + 1, 1));
        }
    }
    op
}

/// Spin operators of one shell (any kind).
pub fn spin_z(layout: &ShellLayout, shell: usize) -> OperatorSum {
    let sh = layout.shell(shell);
    let mut op = OperatorSum::new();
    for o in 0..sh.orbitals() {
        op.push_hop(C64::new(0.5, 0.0), sh.index(o, 0), sh.index(o, 0));
        op.push_hop(C64::new(-0.5, 0.0), sh.index(o, 1), sh.index(o, 1));
    }
    op
}

/// S+ (raising) of one shell.
pub fn spin_plus(layout: &ShellLayout, shell: usize) -> OperatorSum {
    let sh = layout.shell(shell);
    let mut op = OperatorSum::new();
    for o in 0..sh.orbitals() {
        op.push_hop(ONE, sh.index(o, 0), sh.index(o, 1));
    }
    op
}

pub fn spin_minus(layout: &ShellLayout, shell: usize) -> OperatorSum {
    spin_plus(layout, shell).adjoint()
}

pub fn orbital_z(layout: &ShellLayout, shell: usize) -> OperatorSum {
    let sh = layout.shell(shell);
    let mut op = OperatorSum::new();
    if let Some(l) = sh.l() {
        for m in m_range(l) {
            for s in 0..2 {
                op.push_hop(C64::new(m as f64, 0.0), sh.index_m(m, s), sh.index_m(m, s));
            }
        }
    }
    op
}

pub fn orbital_plus(layout: &ShellLayout, shell: usize) -> OperatorSum {
    let sh = layout.shell(shell);
    let mut op = OperatorSum::new();
    if let Some(l) = sh.l() {
        for m in m_range(l) {
            if m < l as i32 {
                for s in 0..2 {
                    op.push_hop(C64::new(ladder_coef(l, m), 0.0), sh.index_m(m + 1, s), sh.index_m(m, s));
                }
            }
        }
    }
    op
}

pub fn orbital_minus(layout: &ShellLayout, shell: usize) -> OperatorSum {
    orbital_plus(layout, shell).adjoint()
}

/// Components of an external exchange field on one shell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExchangeField {
    pub s_zero: C64,
    pub s_minus: C64,
    pub s_plus: C64,
}

impl ExchangeField {
    /// Field vector B coupled as B·S.
    pub fn from_vector(b: [f64; 3]) -> Self {
        ExchangeField {
            s_zero: C64::new(b[2], 0.0),
            s_plus: C64::new(0.5 * b[0], -0.5 * b[1]),
            s_minus: C64::new(0.5 * b[0], 0.5 * b[1]),
        }
    }
}

/// s_zero·S_z + s_minus·S_- + s_plus·S_+
pub fn exchange_field(layout: &ShellLayout, shell: usize, field: &ExchangeField) -> OperatorSum {
    let mut op = spin_z(layout, shell).scaled(field.s_zero);
    op.add(&spin_minus(layout, shell).scaled(field.s_minus));
    op.add(&spin_plus(layout, shell).scaled(field.s_plus));
    op.canonicalize()
}

/// Number operator of one shell.
pub fn number(layout: &ShellLayout, shell: usize) -> OperatorSum {
    let mut op = OperatorSum::new();
    for p in layout.shell(shell).range() {
        op.push_hop(ONE, p, p);
    }
    op
}

/// energy × ligand electron count.
pub fn counter_dl(layout: &ShellLayout, ligand: usize, energy: f64) -> OperatorSum {
    number(layout, ligand).scaled(C64::new(energy, 0.0))
}

/// Spin-diagonal one-body operator from a one-particle matrix over the real
/// harmonics of an atomic shell.
pub fn one_body_real(layout: &ShellLayout, shell: usize, h_real: &DMatrix<f64>) -> OperatorSum {
    let sh = layout.shell(shell);
    let l = sh.l().expect("real harmonics need an atomic shell");
    let u = real_to_complex(l);
    let h = u.transpose() * h_real.map(|x| C64::new(x, 0.0)) * u.map(|z| z.conj());
    let mut op = OperatorSum::new();
    for (i, mi) in m_range(l).enumerate() {
        for (j, mj) in m_range(l).enumerate() {
            for s in 0..2 {
                op.push_hop(h[(i, j)], sh.index_m(mi, s), sh.index_m(mj, s));
            }
        }
    }
    op
}

/// Bond-summed one-particle crystal-field matrices over real harmonics of
/// rank `l` (2 or 3), one per bond-frame parameter: d → [VC0, VC1],
/// f → [VC0, VC1, VC2].
pub fn crystal_field_matrices(geom: &BondGeometry, l: usize, alpha_vc: f64) -> Result<Vec<DMatrix<f64>>> {
    geom.validate()?;
    let groups: Vec<Vec<usize>> = match l {
        2 => vec![vec![0], vec![1, 2]],
        3 => vec![vec![0], vec![1, 2], vec![3, 4]],
        _ => return Err(Error::Geometry(format!("crystal field for l={l} not supported"))),
    };
    let n = 2 * l + 1;
    let mut out = vec![DMatrix::zeros(n, n); groups.len()];
    for (b, frame) in geom.frames().iter().enumerate() {
        let scale = geom.scale(b, alpha_vc);
        let rot = frame.real_rotation(l);
        for (g, orbitals) in groups.iter().enumerate() {
            for &a in orbitals {
                let col = rot.column(a);
                out[g] += col * col.transpose() * scale;
            }
        }
    }
    Ok(out)
}

/// Unit VC components of the crystal field on an atomic shell.
pub fn crystal_field_components(layout: &ShellLayout, shell: usize, geom: &BondGeometry, alpha_vc: f64) -> Result<Vec<OperatorSum>> {
    let l = atomic_l(layout.shell(shell))?;
    Ok(crystal_field_matrices(geom, l, alpha_vc)?.iter().map(|h| one_body_real(layout, shell, h)).collect())
}

/// Unit σ and π hopping operators between the d shell and the retained
/// ligand orbitals (Hermitian: both directions included).
pub fn slater_koster_hopping(
    layout: &ShellLayout,
    d_shell: usize,
    ligand: usize,
    reduction: &LigandReduction,
) -> Result<(OperatorSum, OperatorSum)> {
    let sd = layout.shell(d_shell);
    let sl = layout.shell(ligand);
    if sd.l() != Some(2) {
        return Err(Error::InvalidConstraint("hopping needs a d shell".into()));
    }
    match sl.kind {
        ShellKind::Ligand { orbitals } if orbitals == reduction.count() => {}
        _ => return Err(Error::InvalidConstraint("ligand shell does not match the reduction".into())),
    }
    let u = real_to_complex(2);
    let build = |t: &DMatrix<f64>| {
        let mut op = OperatorSum::new();
        for k in 0..reduction.count() {
            for (j, m) in m_range(2).enumerate() {
                // c_g = Σ_m conj(U[g, m]) c_m
                let coef: C64 = (0..5).map(|g| u[(g, j)].conj() * t[(k, g)]).sum();
                for s in 0..2 {
                    let (lk, dm) = (sl.index(k, s), sd.index_m(m, s));
                    op.push_hop(coef, lk, dm);
                    op.push_hop(coef.conj(), dm, lk);
                }
            }
        }
        op
    };
    Ok((build(&reduction.hop_sigma), build(&reduction.hop_pi)))
}

/// Unit-radial multipole transition components, one per q = -k..k:
/// Σ ⟨l_to m'|C^k_q|l_from m⟩ c†_{to m' s} c_{from m s}.
pub fn multipole_components(layout: &ShellLayout, from: usize, to: usize, k: usize) -> Result<Vec<OperatorSum>> {
    let (sf, st) = (layout.shell(from), layout.shell(to));
    let (lf, lt) = (atomic_l(sf)?, atomic_l(st)?);
    let allowed = match k {
        1 => lf.abs_diff(lt) == 1,
        2 => lf.abs_diff(lt) == 0 || lf.abs_diff(lt) == 2,
        _ => false,
    };
    if !allowed || from == to {
        return Err(Error::Transition(format!("rank-{k} transition {} → {} not admissible", sf.name, st.name)));
    }
    let mut out = Vec::new();
    for q in -(k as i32)..=(k as i32) {
        let mut op = OperatorSum::new();
        for mf in m_range(lf) {
            let mt = mf + q;
            if mt.abs() > lt as i32 {
                continue;
            }
            let c = tensor_element(lt, mt, k, q, lf, mf);
            for s in 0..2 {
                op.push_hop(C64::new(c, 0.0), st.index_m(mt, s), sf.index_m(mf, s));
            }
        }
        out.push(op);
    }
    Ok(out)
}

fn polarized(components: &[OperatorSum], pol: &[C64]) -> Result<OperatorSum> {
    if pol.len() != components.len() {
        return Err(Error::Transition(format!("expected {} polarization coefficients, got {}", components.len(), pol.len())));
    }
    let mut op = OperatorSum::new();
    for (c, &f) in components.iter().zip(pol) {
        op.add(&c.scaled(f));
    }
    Ok(op.canonicalize())
}

/// Dipole operator for polarization `[f(-1), f(0), f(+1)]`.
pub fn dipole_op(layout: &ShellLayout, from: usize, to: usize, pol: &[C64]) -> Result<OperatorSum> {
    polarized(&multipole_components(layout, from, to, 1)?, pol)
}

/// Quadrupole operator for polarization `[f(-2), ..., f(+2)]`.
pub fn quadrupole_op(layout: &ShellLayout, from: usize, to: usize, pol: &[C64]) -> Result<OperatorSum> {
    polarized(&multipole_components(layout, from, to, 2)?, pol)
}

/// Effective dipole core → ligand through a virtual metal p shell
/// hybridized with the ligands: `(σ, π)` unit components per q = -1, 0, 1,
/// scaled at assembly by Dips and Dipp.
pub fn effective_dipole_components(
    layout: &ShellLayout,
    core: usize,
    ligand: usize,
    geom: &BondGeometry,
    alpha_dipo: f64,
    reduction: &LigandReduction,
) -> Result<(Vec<OperatorSum>, Vec<OperatorSum>)> {
    let sc = layout.shell(core);
    let sl = layout.shell(ligand);
    let lc = atomic_l(sc)?;
    if lc != 0 && lc != 2 {
        return Err(Error::Transition("effective dipole needs an even-l core shell".into()));
    }
    let (sig, pi) = pp_maps(geom, alpha_dipo)?;
    let u1 = real_to_complex(1);
    let build = |map: &DMatrix<f64>| -> Vec<OperatorSum> {
        // ligand coordinates of each virtual real p orbital
        let proj: Vec<_> = (0..3).map(|g| reduction.project(&map.column(g).into_owned())).collect();
        (-1..=1)
            .map(|q| {
                let mut op = OperatorSum::new();
                for mc in m_range(lc) {
                    let mp = mc + q;
                    if mp.abs() > 1 {
                        continue;
                    }
                    let dip = tensor_element(1, mp, 1, q, lc, mc);
                    if dip == 0.0 {
                        continue;
                    }
                    // |p_m> = Σ_g conj(U[g, m]) |real_g>
                    for k in 0..reduction.count() {
                        let amp: C64 = (0..3).map(|g| u1[(g, (mp + 1) as usize)].conj() * proj[g][k]).sum();
                        for s in 0..2 {
                            op.push_hop(amp * dip, sl.index(k, s), sc.index_m(mc, s));
                        }
                    }
                }
                op
            })
            .collect()
    };
    Ok((build(&sig), build(&pi)))
}

/// Angular-momentum counters of one shell: S², L², 2S·L, S_z, L_z.
pub struct ShellCounters {
    pub s2: OperatorSum,
    pub l2: OperatorSum,
    pub two_sl: OperatorSum,
    pub sz: OperatorSum,
    pub lz: OperatorSum,
}

fn square(z: &OperatorSum, plus: &OperatorSum, minus: &OperatorSum) -> OperatorSum {
    let mut op = z.mul(z);
    op.add(&plus.mul(minus).scaled(C64::new(0.5, 0.0)));
    op.add(&minus.mul(plus).scaled(C64::new(0.5, 0.0)));
    op.canonicalize()
}

pub fn shell_counters(layout: &ShellLayout, shell: usize) -> ShellCounters {
    let (sz, sp, sm) = (spin_z(layout, shell), spin_plus(layout, shell), spin_minus(layout, shell));
    let (lz, lp, lm) = (orbital_z(layout, shell), orbital_plus(layout, shell), orbital_minus(layout, shell));
    let s2 = square(&sz, &sp, &sm);
    let l2 = square(&lz, &lp, &lm);
    let mut two_sl = lz.mul(&sz).scaled(C64::new(2.0, 0.0));
    two_sl.add(&lp.mul(&sm));
    two_sl.add(&lm.mul(&sp));
    ShellCounters { s2, l2, two_sl: two_sl.canonicalize(), sz, lz }
}

/// Total spin raising/lowering over all shells; S_-S_+ moves spin between
/// shells at fixed total S_z.
pub fn total_spin_flip(layout: &ShellLayout) -> OperatorSum {
    let mut sp = OperatorSum::new();
    for s in 0..layout.shells().len() {
        sp.add(&spin_plus(layout, s));
    }
    sp.adjoint().mul(&sp).canonicalize()
}

/// Every one-body excitation inside each shell.
pub fn intra_shell_mixer(layout: &ShellLayout) -> OperatorSum {
    let mut op = OperatorSum::new();
    for sh in layout.shells() {
        for a in sh.range() {
            for b in sh.range() {
                op.push_hop(ONE, a, b);
            }
        }
    }
    op
}
