//! Bond geometry, Slater–Koster two-centre maps and the reduced ligand
//! orbital basis obtained by Gram–Schmidt on the hopping images of the d
//! orbitals.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::angular::BondFrame;
use crate::error::{Error, Result};

/// Images below this norm (after projection) are dropped.
pub const IMAGE_DROP: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct BondGeometry {
    /// Metal→ligand vectors in Angstrom.
    pub bonds: Vec<Vector3<f64>>,
    pub dref: f64,
    /// Per-bond hopping multipliers; `None` means all 1.
    pub facts_hop: Option<Vec<f64>>,
}

impl BondGeometry {
    pub fn new(bonds: Vec<Vector3<f64>>, dref: f64) -> Self {
        BondGeometry { bonds, dref, facts_hop: None }
    }

    pub fn octahedral(r: f64) -> Self {
        let bonds = vec![
            Vector3::new(-r, 0.0, 0.0),
            Vector3::new(r, 0.0, 0.0),
            Vector3::new(0.0, -r, 0.0),
            Vector3::new(0.0, r, 0.0),
            Vector3::new(0.0, 0.0, -r),
            Vector3::new(0.0, 0.0, r),
        ];
        BondGeometry::new(bonds, r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bonds.is_empty() {
            return Err(Error::Geometry("no bonds".into()));
        }
        if let Some(i) = self.bonds.iter().position(|b| !(b.norm() > 0.0)) {
            return Err(Error::Geometry(format!("bond {i} has zero length")));
        }
        if !(self.dref > 0.0) {
            return Err(Error::Geometry("DREF must be positive".into()));
        }
        if let Some(f) = &self.facts_hop {
            if f.len() != self.bonds.len() {
                return Err(Error::Geometry(format!(
                    "facts_hop has {} entries for {} bonds",
                    f.len(),
                    self.bonds.len()
                )));
            }
        }
        Ok(())
    }

    /// (R_b/DREF)^alpha
    pub fn scale(&self, bond: usize, alpha: f64) -> f64 {
        (self.bonds[bond].norm() / self.dref).powf(alpha)
    }

    pub fn hop_factor(&self, bond: usize) -> f64 {
        self.facts_hop.as_ref().map_or(1.0, |f| f[bond])
    }

    pub fn frames(&self) -> Vec<BondFrame> {
        self.bonds.iter().map(BondFrame::new).collect()
    }

    /// Number of ligand p orbitals per spin (3 per bond).
    pub fn ligand_orbitals(&self) -> usize {
        3 * self.bonds.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HybridizationParams {
    pub vs: f64,
    pub vp: f64,
    pub alpha_vsp: f64,
}

/// Unit-strength Slater–Koster maps from the global real d orbitals
/// (z², xz, yz, x²−y², xy) to the full ligand p space (bond-major,
/// x/y/z per bond): `(σ, π)`, each `3·N_b × 5`.
pub fn slater_koster_maps(geom: &BondGeometry, alpha: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    geom.validate()?;
    let nl = geom.ligand_orbitals();
    let mut sigma = DMatrix::zeros(nl, 5);
    let mut pi = DMatrix::zeros(nl, 5);
    for (b, frame) in geom.frames().iter().enumerate() {
        let s = geom.scale(b, alpha) * geom.hop_factor(b);
        let d = frame.real_rotation(2);
        for g in 0..5 {
            for c in 0..3 {
                // σ: d(z̃²) ↔ p(z̃); π: d(x̃z̃) ↔ p(x̃), d(ỹz̃) ↔ p(ỹ)
                sigma[(3 * b + c, g)] += s * frame.axes[(c, 2)] * d[(g, 0)];
                pi[(3 * b + c, g)] += s * (frame.axes[(c, 0)] * d[(g, 1)] + frame.axes[(c, 1)] * d[(g, 2)]);
            }
        }
    }
    Ok((sigma, pi))
}

/// Unit-strength p–p two-centre maps from the global real p orbitals
/// (z, x, y) of the metal to the ligand p space: `(σ, π)`, each `3·N_b × 3`.
pub fn pp_maps(geom: &BondGeometry, alpha: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    geom.validate()?;
    let nl = geom.ligand_orbitals();
    let mut sigma = DMatrix::zeros(nl, 3);
    let mut pi = DMatrix::zeros(nl, 3);
    for (b, frame) in geom.frames().iter().enumerate() {
        let s = geom.scale(b, alpha);
        let p = frame.real_rotation(1);
        for g in 0..3 {
            for c in 0..3 {
                sigma[(3 * b + c, g)] += s * frame.axes[(c, 2)] * p[(g, 0)];
                pi[(3 * b + c, g)] += s * (frame.axes[(c, 0)] * p[(g, 1)] + frame.axes[(c, 1)] * p[(g, 2)]);
            }
        }
    }
    Ok((sigma, pi))
}

/// Effective ligand orbitals plus the σ and π hopping channels expressed in
/// them (rows: effective orbitals, columns: real d orbitals).
#[derive(Clone, Debug)]
pub struct LigandReduction {
    pub effective_orbitals: Vec<DVector<f64>>,
    pub hop_sigma: DMatrix<f64>,
    pub hop_pi: DMatrix<f64>,
    /// Vs/Vp the reduction was built with.
    pub vs: f64,
    pub vp: f64,
}

impl LigandReduction {
    /// Retained orbitals per spin.
    pub fn count(&self) -> usize {
        self.effective_orbitals.len()
    }

    /// Coordinates of a full-space ligand vector in the retained basis.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.count(), self.effective_orbitals.iter().map(|e| e.dot(v)))
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.count();
        DMatrix::from_fn(n, n, |i, j| self.effective_orbitals[i].dot(&self.effective_orbitals[j]))
    }
}

/// Builds the reduced ligand basis from the hopping images of the five d
/// orbitals, Gram–Schmidt in fixed d order.
pub fn ligand_reduction(geom: &BondGeometry, hyb: &HybridizationParams) -> Result<LigandReduction> {
    let (sigma, pi) = slater_koster_maps(geom, hyb.alpha_vsp)?;
    let full = &sigma * hyb.vs + &pi * hyb.vp;
    let mut retained: Vec<DVector<f64>> = Vec::new();
    for g in 0..5 {
        let mut v: DVector<f64> = full.column(g).into_owned();
        // two passes keep the basis orthonormal to rounding
        for _ in 0..2 {
            for e in &retained {
                let c = e.dot(&v);
                v.axpy(-c, e, 1.0);
            }
        }
        let n = v.norm();
        if n >= IMAGE_DROP {
            retained.push(v / n);
        }
    }
    if retained.is_empty() {
        return Err(Error::LigandReduction("hopping images are all null (Vs = Vp = 0?)".into()));
    }
    let k = retained.len();
    let hop = |m: &DMatrix<f64>| DMatrix::from_fn(k, 5, |i, g| retained[i].dot(&m.column(g)));
    let hop_sigma = hop(&sigma);
    let hop_pi = hop(&pi);
    Ok(LigandReduction { effective_orbitals: retained, hop_sigma, hop_pi, vs: hyb.vs, vp: hyb.vp })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn hyb(vs: f64, vp: f64) -> HybridizationParams {
        HybridizationParams { vs, vp, alpha_vsp: -3.0 }
    }

    #[test]
    fn octahedral_keeps_five_orbitals() {
        let r = ligand_reduction(&BondGeometry::octahedral(1.0), &hyb(2.0, 1.0)).unwrap();
        assert_eq!(r.count(), 5);
        assert!((r.gram() - DMatrix::<f64>::identity(5, 5)).norm() < 1e-12);
    }

    #[test]
    fn single_bond_keeps_three() {
        let geom = BondGeometry::new(vec![Vector3::new(0.0, 0.0, 1.0)], 1.0);
        let r = ligand_reduction(&geom, &hyb(2.0, 1.0)).unwrap();
        assert_eq!(r.count(), 3);
        // σ couples z² to p_z with unit strength
        let (sigma, _) = slater_koster_maps(&geom, -3.0).unwrap();
        assert_abs_diff_eq!(sigma[(2, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sigma.column(0).norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_hopping_is_error() {
        let r = ligand_reduction(&BondGeometry::octahedral(1.0), &hyb(0.0, 0.0));
        assert!(matches!(r, Err(Error::LigandReduction(_))));
    }

    #[test]
    fn zero_length_bond_rejected() {
        let geom = BondGeometry::new(vec![Vector3::zeros()], 1.0);
        assert!(matches!(slater_koster_maps(&geom, -3.0), Err(Error::Geometry(_))));
    }

    #[test]
    fn power_law_scaling() {
        let near = BondGeometry::new(vec![Vector3::new(0.0, 0.0, 1.0)], 1.0);
        let far = BondGeometry::new(vec![Vector3::new(0.0, 0.0, 2.0)], 1.0);
        let (a, _) = slater_koster_maps(&near, -3.0).unwrap();
        let (b, _) = slater_koster_maps(&far, -3.0).unwrap();
        assert_abs_diff_eq!(b[(2, 0)], a[(2, 0)] / 8.0, epsilon = 1e-14);
    }
}
