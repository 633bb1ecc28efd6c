//! Second-quantization kernel: determinants as occupancy/sign bit chains,
//! fermionic ladder operators, operator sums and state vectors.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64 as C64;

use crate::bits::{parity_chain, BitChain};
use crate::error::{Error, Result};
use crate::space::HilbertSpace;

/// Amplitudes and coefficients with modulus below this are dropped.
pub const PRUNE: f64 = 1e-14;

/// A Slater determinant: occupancy chain plus its running-parity chain.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Determinant {
    val: BitChain,
    signs: BitChain,
}

impl Determinant {
    pub fn new(val: BitChain) -> Self {
        let signs = parity_chain(&val);
        Determinant { val, signs }
    }

    pub fn vacuum(width: usize) -> Self {
        Self::new(BitChain::zeros(width))
    }

    pub fn from_occupied(width: usize, positions: &[usize]) -> Self {
        Self::new(BitChain::from_positions(width, positions))
    }

    pub fn val(&self) -> &BitChain {
        &self.val
    }

    pub fn signs(&self) -> &BitChain {
        &self.signs
    }

    pub fn width(&self) -> usize {
        self.val.width()
    }

    pub fn electrons(&self) -> usize {
        self.val.count_ones() as usize
    }

    pub fn is_occupied(&self, p: usize) -> bool {
        self.val.get(p)
    }

    fn check(&self, p: usize) -> Result<()> {
        if p >= self.width() {
            Err(Error::PositionOutOfRange { position: p, width: self.width() })
        } else {
            Ok(())
        }
    }

    /// `c_p^+ |self>`: `None` when `p` is occupied, otherwise the new
    /// determinant and the sign `(-1)^(occupied states below p)`.
    pub fn create(&self, p: usize) -> Result<Option<(Determinant, i8)>> {
        self.check(p)?;
        Ok(self.create_unchecked(p))
    }

    /// `c_p |self>`.
    pub fn annihilate(&self, p: usize) -> Result<Option<(Determinant, i8)>> {
        self.check(p)?;
        Ok(self.annihilate_unchecked(p))
    }

    #[inline]
    pub(crate) fn create_unchecked(&self, p: usize) -> Option<(Determinant, i8)> {
        if self.val.get(p) {
            return None;
        }
        let sign = if self.signs.get(p) { -1 } else { 1 };
        let mut out = self.clone();
        out.val.set(p);
        out.signs.flip_above(p);
        Some((out, sign))
    }

    #[inline]
    pub(crate) fn annihilate_unchecked(&self, p: usize) -> Option<(Determinant, i8)> {
        if !self.val.get(p) {
            return None;
        }
        let sign = if self.signs.get(p) { -1 } else { 1 };
        let mut out = self.clone();
        out.val.clear(p);
        out.signs.flip_above(p);
        Some((out, sign))
    }

    #[inline]
    fn ladder_in_place(&mut self, op: LadderOp) -> Option<i8> {
        let occupied = self.val.get(op.position);
        match op.kind {
            LadderKind::Create if occupied => return None,
            LadderKind::Annihilate if !occupied => return None,
            LadderKind::Create => self.val.set(op.position),
            LadderKind::Annihilate => self.val.clear(op.position),
        }
        let sign = if self.signs.get(op.position) { -1 } else { 1 };
        self.signs.flip_above(op.position);
        Some(sign)
    }
}

impl fmt::Display for Determinant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.val)
    }
}

impl fmt::Debug for Determinant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}>", self.val)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LadderKind {
    Create,
    Annihilate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LadderOp {
    pub kind: LadderKind,
    pub position: usize,
}

impl LadderOp {
    pub fn create(position: usize) -> Self {
        LadderOp { kind: LadderKind::Create, position }
    }

    pub fn annihilate(position: usize) -> Self {
        LadderOp { kind: LadderKind::Annihilate, position }
    }

    pub fn dagger(self) -> Self {
        let kind = match self.kind {
            LadderKind::Create => LadderKind::Annihilate,
            LadderKind::Annihilate => LadderKind::Create,
        };
        LadderOp { kind, position: self.position }
    }
}

/// Coefficient times an ordered product of ladder operators, written left to
/// right and applied right to left. An empty product is the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorTerm {
    pub coefficient: C64,
    pub factors: Vec<LadderOp>,
}

impl OperatorTerm {
    /// Applies the product to a determinant; `None` if it annihilates it.
    #[inline]
    pub fn apply(&self, det: &Determinant) -> Option<(Determinant, C64)> {
        let mut out = det.clone();
        let mut sign = 1i8;
        for &op in self.factors.iter().rev() {
            sign *= out.ladder_in_place(op)?;
        }
        Some((out, self.coefficient * sign as f64))
    }
}

/// A linear combination of ladder-operator products.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OperatorSum {
    terms: Vec<OperatorTerm>,
}

impl OperatorSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: Vec<OperatorTerm>) -> Self {
        OperatorSum { terms }
    }

    pub fn terms(&self) -> &[OperatorTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn push(&mut self, coefficient: C64, factors: Vec<LadderOp>) {
        if coefficient.norm() > PRUNE {
            self.terms.push(OperatorTerm { coefficient, factors });
        }
    }

    /// `coefficient * c_a^+ c_b`
    pub fn push_hop(&mut self, coefficient: C64, a: usize, b: usize) {
        self.push(coefficient, vec![LadderOp::create(a), LadderOp::annihilate(b)]);
    }

    pub fn add(&mut self, other: &OperatorSum) {
        self.terms.extend(other.terms.iter().cloned());
    }

    pub fn scaled(&self, factor: C64) -> OperatorSum {
        let mut out = OperatorSum::new();
        for t in &self.terms {
            out.push(t.coefficient * factor, t.factors.clone());
        }
        out
    }

    /// Product `self * other` (other acts first).
    pub fn mul(&self, other: &OperatorSum) -> OperatorSum {
        let mut out = OperatorSum::new();
        for a in &self.terms {
            for b in &other.terms {
                let mut factors = a.factors.clone();
                factors.extend_from_slice(&b.factors);
                out.push(a.coefficient * b.coefficient, factors);
            }
        }
        out
    }

    pub fn adjoint(&self) -> OperatorSum {
        let terms = self
            .terms
            .iter()
            .map(|t| OperatorTerm {
                coefficient: t.coefficient.conj(),
                factors: t.factors.iter().rev().map(|op| op.dagger()).collect(),
            })
            .collect();
        OperatorSum { terms }
    }

    /// Normal-orders every term (creators first, then annihilators, each
    /// group by ascending index), merges equal products and prunes.
    pub fn canonicalize(&self) -> OperatorSum {
        let mut merged: BTreeMap<Vec<LadderOp>, C64> = BTreeMap::new();
        for t in &self.terms {
            normal_order(t.coefficient, t.factors.clone(), &mut |c, f| {
                *merged.entry(f).or_insert(C64::new(0.0, 0.0)) += c;
            });
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| c.norm() > PRUNE)
            .map(|(factors, coefficient)| OperatorTerm { coefficient, factors })
            .collect();
        OperatorSum { terms }
    }

    /// Largest coefficient difference between the canonical forms.
    pub fn distance(&self, other: &OperatorSum) -> f64 {
        let mut diff = self.clone();
        diff.add(&other.scaled(C64::new(-1.0, 0.0)));
        diff.canonicalize().terms.iter().map(|t| t.coefficient.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.distance(&self.adjoint()) <= tol
    }

    /// Visits every nonzero image of `det`, term by term.
    #[inline]
    pub fn for_each_image(&self, det: &Determinant, mut f: impl FnMut(Determinant, C64)) {
        for t in &self.terms {
            if let Some((d, c)) = t.apply(det) {
                f(d, c);
            }
        }
    }

    pub fn max_position(&self) -> Option<usize> {
        self.terms.iter().flat_map(|t| t.factors.iter().map(|f| f.position)).max()
    }
}

fn out_of_order(a: LadderOp, b: LadderOp) -> bool {
    match (a.kind, b.kind) {
        (LadderKind::Annihilate, LadderKind::Create) => true,
        (LadderKind::Create, LadderKind::Annihilate) => false,
        _ => a.position > b.position,
    }
}

fn normal_order(coef: C64, factors: Vec<LadderOp>, emit: &mut dyn FnMut(C64, Vec<LadderOp>)) {
    for k in 0..factors.len().saturating_sub(1) {
        let (a, b) = (factors[k], factors[k + 1]);
        if a == b {
            return;
        }
        if out_of_order(a, b) {
            if a.position == b.position {
                // c_p c_p^+ = 1 - c_p^+ c_p
                let mut contracted = factors.clone();
                contracted.drain(k..k + 2);
                normal_order(coef, contracted, emit);
            }
            let mut swapped = factors;
            swapped.swap(k, k + 1);
            normal_order(-coef, swapped, emit);
            return;
        }
    }
    emit(coef, factors);
}

/// Dense amplitudes over the basis of a Hilbert space.
#[derive(Clone, Debug)]
pub struct StateVector<'a> {
    space: &'a HilbertSpace,
    amplitudes: Vec<C64>,
}

impl<'a> StateVector<'a> {
    pub fn zeros(space: &'a HilbertSpace) -> Self {
        StateVector { space, amplitudes: vec![C64::new(0.0, 0.0); space.dim()] }
    }

    pub fn new(space: &'a HilbertSpace, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), actual: amplitudes.len() });
        }
        Ok(StateVector { space, amplitudes })
    }

    pub fn basis(space: &'a HilbertSpace, index: usize) -> Self {
        let mut v = Self::zeros(space);
        v.amplitudes[index] = C64::new(1.0, 0.0);
        v
    }

    pub fn space(&self) -> &'a HilbertSpace {
        self.space
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Applies `op` to `x`, expressing the result in `target`.
pub fn apply_operator<'b>(
    op: &OperatorSum,
    x: &StateVector<'_>,
    target: &'b HilbertSpace,
) -> Result<StateVector<'b>> {
    let mut out = StateVector::zeros(target);
    let basis = x.space.basis();
    for (i, &amp) in x.amplitudes.iter().enumerate() {
        if amp.norm() <= PRUNE {
            continue;
        }
        let mut escaped = None;
        op.for_each_image(&basis[i], |d, c| match target.index_of(&d) {
            Some(j) => out.amplitudes[j] += c * amp,
            None => {
                if escaped.is_none() {
                    escaped = Some(d);
                }
            }
        });
        if let Some(d) = escaped {
            return Err(Error::EscapingDeterminant { determinant: d.to_string(), space: target.name().to_string() });
        }
    }
    for a in out.amplitudes.iter_mut() {
        if a.norm() <= PRUNE {
            *a = C64::new(0.0, 0.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn det(s: &str) -> Determinant {
        Determinant::new(BitChain::parse(s).unwrap())
    }

    #[test]
    fn create_on_occupied_is_empty() {
        assert!(det("00010010").create(3).unwrap().is_none());
    }

    #[test]
    fn create_signs() {
        let (d, s) = det("00010010").create(0).unwrap().unwrap();
        assert_eq!(d.to_string(), "10010010");
        assert_eq!(s, 1);
        let (d, s) = det("00010010").create(4).unwrap().unwrap();
        assert_eq!(d.to_string(), "00011010");
        assert_eq!(s, -1);
        assert_eq!(d.signs(), &parity_chain(d.val()));
    }

    #[test]
    fn annihilate_signs() {
        assert!(det("00010010").annihilate(0).unwrap().is_none());
        let (d, s) = det("00010010").annihilate(3).unwrap().unwrap();
        assert_eq!(d.to_string(), "00000010");
        assert_eq!(s, 1);
        let (d, s) = det("00010010").annihilate(6).unwrap().unwrap();
        assert_eq!(d.to_string(), "00010000");
        assert_eq!(s, -1);
    }

    #[test]
    fn out_of_range_is_error() {
        assert!(matches!(det("0000").create(4), Err(Error::PositionOutOfRange { .. })));
        assert!(det("0000").annihilate(9).is_err());
    }

    #[test]
    fn annihilate_then_create_restores() {
        let d0 = det("0110100101");
        for p in d0.val().ones().collect::<Vec<_>>() {
            let (d1, s1) = d0.annihilate(p).unwrap().unwrap();
            let (d2, s2) = d1.create(p).unwrap().unwrap();
            assert_eq!(d2, d0);
            assert_eq!(s1 * s2, 1);
        }
    }

    #[test]
    fn adjoint_swaps_and_reverses() {
        let mut op = OperatorSum::new();
        op.push_hop(C64::new(1.0, 2.0), 3, 5);
        let adj = op.adjoint();
        assert_eq!(adj.terms()[0].coefficient, C64::new(1.0, -2.0));
        assert_eq!(adj.terms()[0].factors, vec![LadderOp::create(5), LadderOp::annihilate(3)]);
        let mut single = OperatorSum::new();
        single.push(C64::new(1.0, 0.0), vec![LadderOp::create(2)]);
        assert_eq!(single.adjoint().terms()[0].factors, vec![LadderOp::annihilate(2)]);
    }

    #[test]
    fn canonical_contraction() {
        // c_1 c_1^+ = 1 - n_1
        let mut op = OperatorSum::new();
        op.push(C64::new(1.0, 0.0), vec![LadderOp::annihilate(1), LadderOp::create(1)]);
        let c = op.canonicalize();
        assert_eq!(c.len(), 2);
        let mut expected = OperatorSum::new();
        expected.push(C64::new(1.0, 0.0), vec![]);
        expected.push(C64::new(-1.0, 0.0), vec![LadderOp::create(1), LadderOp::annihilate(1)]);
        assert!(c.distance(&expected) < 1e-15);
    }

    #[test]
    fn canonical_form_preserves_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let width = 6;
        let mut op = OperatorSum::new();
        for _ in 0..12 {
            let n = rng.gen_range(1..5);
            let f: Vec<LadderOp> = (0..n)
                .map(|_| {
                    let p = rng.gen_range(0..width);
                    if rng.gen_bool(0.5) { LadderOp::create(p) } else { LadderOp::annihilate(p) }
                })
                .collect();
            op.push(C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5), f);
        }
        let canon = op.canonicalize();
        for bits in 0..(1u32 << width) {
            let positions: Vec<usize> = (0..width).filter(|i| bits >> i & 1 == 1).collect();
            let d = Determinant::from_occupied(width, &positions);
            let mut a: BTreeMap<Determinant, C64> = BTreeMap::new();
            let mut b: BTreeMap<Determinant, C64> = BTreeMap::new();
            op.for_each_image(&d, |x, c| *a.entry(x).or_default() += c);
            canon.for_each_image(&d, |x, c| *b.entry(x).or_default() += c);
            for (k, v) in a.iter() {
                let w = b.get(k).copied().unwrap_or_default();
                assert!((v - w).norm() < 1e-12);
            }
            for (k, w) in b.iter() {
                let v = a.get(k).copied().unwrap_or_default();
                assert!((v - w).norm() < 1e-12);
            }
        }
    }

    /// Ordered-list oracle: a determinant is the sorted list of occupied
    /// indices; c_p^+ inserts p at the front and bubbles it into place.
    fn oracle_create(occ: &[usize], p: usize) -> Option<(Vec<usize>, i8)> {
        if occ.contains(&p) {
            return None;
        }
        let mut list = vec![p];
        list.extend_from_slice(occ);
        let mut sign = 1;
        let mut k = 0;
        while k + 1 < list.len() && list[k] > list[k + 1] {
            list.swap(k, k + 1);
            sign = -sign;
            k += 1;
        }
        Some((list, sign))
    }

    proptest! {
        #[test]
        fn nilpotent(bits in 0u64..(1 << 20), p in 0usize..20) {
            let positions: Vec<usize> = (0..20).filter(|i| bits >> i & 1 == 1).collect();
            let d = Determinant::from_occupied(20, &positions);
            if let Some((d1, _)) = d.create(p).unwrap() {
                prop_assert!(d1.create(p).unwrap().is_none());
            }
            if let Some((d1, _)) = d.annihilate(p).unwrap() {
                prop_assert!(d1.annihilate(p).unwrap().is_none());
            }
        }

        #[test]
        fn create_matches_reordering_oracle(bits in proptest::collection::vec(any::<bool>(), 1..140), p in 0usize..140) {
            let width = bits.len();
            let p = p % width;
            let occ: Vec<usize> = (0..width).filter(|&i| bits[i]).collect();
            let d = Determinant::from_occupied(width, &occ);
            match (d.create(p).unwrap(), oracle_create(&occ, p)) {
                (None, None) => {}
                (Some((nd, s)), Some((list, so))) => {
                    prop_assert_eq!(nd.val().ones().collect::<Vec<_>>(), list);
                    prop_assert_eq!(s, so);
                    prop_assert_eq!(nd.signs(), &parity_chain(nd.val()));
                }
                _ => prop_assert!(false, "occupancy disagreement"),
            }
        }

        #[test]
        fn creators_anticommute(bits in 0u64..(1 << 12), i in 0usize..12, j in 0usize..12) {
            prop_assume!(i != j);
            let positions: Vec<usize> = (0..12).filter(|k| bits >> k & 1 == 1).collect();
            let d = Determinant::from_occupied(12, &positions);
            let ij = d.create(j).unwrap().and_then(|(x, s)| x.create(i).unwrap().map(|(y, t)| (y, s * t)));
            let ji = d.create(i).unwrap().and_then(|(x, s)| x.create(j).unwrap().map(|(y, t)| (y, s * t)));
            match (ij, ji) {
                (None, None) => {}
                (Some((a, s)), Some((b, t))) => { prop_assert_eq!(a, b); prop_assert_eq!(s, -t); }
                _ => prop_assert!(false),
            }
        }
    }
}
