//! Boltzmann ground manifolds, absorption and RIXS spectra, and ground-state
//! expectation values.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operator::{dot, norm, LinearOperator};
use crate::solvers::{lowest_eigenpairs, resolvent_apply, tridiagonalize, LanczosOptions, ResolventOptions, Tridiagonal};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    pub vector: Vec<C64>,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct GroundManifold {
    pub states: Vec<GroundState>,
    pub temp: f64,
    pub erange: f64,
    pub tolefact: f64,
}

#[derive(Clone, Debug)]
pub struct ManifoldConfig {
    pub nsearchedeigen: usize,
    pub temp: f64,
    pub erange: f64,
    pub tolefact: f64,
    pub lanczos: LanczosOptions,
}

impl GroundManifold {
    /// Keeps eigenpairs within `erange` of the lowest, weights them by
    /// exp(−(E−E₀)/temp), drops normalized weights below `tolefact` and
    /// renormalizes.
    pub fn from_eigenpairs(values: &[f64], vectors: Vec<Vec<C64>>, temp: f64, erange: f64, tolefact: f64) -> Self {
        let e0 = values.first().copied().unwrap_or(0.0);
        let mut states: Vec<GroundState> = values
            .iter()
            .zip(vectors)
            .filter(|(e, _)| **e - e0 <= erange + 1e-10)
            .map(|(e, v)| GroundState { energy: *e, vector: v, weight: (-(e - e0) / temp).exp() })
            .collect();
        let total: f64 = states.iter().map(|s| s.weight).sum();
        states.retain(|s| s.weight / total >= tolefact);
        let total: f64 = states.iter().map(|s| s.weight).sum();
        for s in &mut states {
            s.weight /= total;
        }
        GroundManifold { states, temp, erange, tolefact }
    }

    pub fn ground_energy(&self) -> f64 {
        self.states[0].energy
    }
}

pub fn ground_manifold(h: &dyn LinearOperator, cfg: &ManifoldConfig) -> Result<GroundManifold> {
    let opts = LanczosOptions { nev: cfg.nsearchedeigen, ..cfg.lanczos.clone() };
    let pairs = lowest_eigenpairs(h, &opts)?;
    Ok(GroundManifold::from_eigenpairs(&pairs.values, pairs.vectors, cfg.temp, cfg.erange, cfg.tolefact))
}

/// Energy-dependent Lorentzian half-width and axis shift.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Broadening {
    pub all1: f64,
    pub all2: f64,
    pub el2l3: f64,
    pub shift: f64,
}

impl Broadening {
    /// Half-width at a point of the shifted output axis.
    pub fn gamma(&self, e_out: f64) -> f64 {
        if e_out < self.el2l3 {
            self.all1
        } else {
            self.all2
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub npunti: usize,
    pub dxleft: f64,
    pub dxright: f64,
}

/// Uniform grid from `emin + shift + dxleft` to `emax + shift + dxright`;
/// a degenerate range falls back to a 1 eV window around its centre.
pub fn spectrum_grid(grid: &GridSpec, emin: f64, emax: f64, shift: f64) -> Vec<f64> {
    let mut lo = emin + shift + grid.dxleft;
    let mut hi = emax + shift + grid.dxright;
    if !(hi - lo > 1e-12) {
        let c = 0.5 * (lo + hi);
        lo = c - 0.5;
        hi = c + 0.5;
    }
    let n = grid.npunti.max(2);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|k| if k == n - 1 { hi } else { lo + k as f64 * step }).collect()
}

/// Energy grid plus one complex resonance array per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumResult {
    pub energies: Vec<f64>,
    pub channels: Vec<Vec<C64>>,
}

impl SpectrumResult {
    pub fn zeros(energies: Vec<f64>, nchannels: usize) -> Self {
        let n = energies.len();
        SpectrumResult { energies, channels: vec![vec![ZERO; n]; nchannels] }
    }

    /// Sum of the channels' imaginary parts at each energy.
    pub fn isotropic(&self) -> Vec<f64> {
        (0..self.energies.len()).map(|i| self.channels.iter().map(|c| c[i].im).sum()).collect()
    }

    pub fn write_to(&self, w: &mut dyn Write) -> std::io::Result<()> {
        for (i, e) in self.energies.iter().enumerate() {
            write!(w, "{e:.10e}")?;
            for c in &self.channels {
                write!(w, " {:.10e} {:.10e}", c[i].re, c[i].im)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Energy column, then (real, imag) per channel.
    pub fn write_columns(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }
}

fn ritz_extent(tri: &Tridiagonal) -> (f64, f64) {
    let n = tri.alpha.len();
    let t = DMatrix::from_fn(n, n, |r, c| {
        if r == c {
            tri.alpha[r]
        } else if r + 1 == c {
            tri.beta[r]
        } else if c + 1 == r {
            tri.beta[c]
        } else {
            0.0
        }
    });
    let e = t.symmetric_eigenvalues();
    (e.min(), e.max())
}

/// Boltzmann-averaged absorption.
///
/// For ground state n (offset δ = E_n − E₀) and channel m the seed D_m X_n
/// is tridiagonalized in the excited space, and the resonance at output
/// energy E is conj(CF(E − shift + δ + iγ(E))). Forbidden channels give zeros.
pub fn absorption(
    h_exci: &dyn LinearOperator,
    channels: &[&dyn LinearOperator],
    manifold: &GroundManifold,
    nsteps: usize,
    grid: &GridSpec,
    broadening: &Broadening,
) -> Result<SpectrumResult> {
    let e0 = manifold.ground_energy();
    let jobs: Vec<(usize, usize)> =
        (0..manifold.states.len()).flat_map(|n| (0..channels.len()).map(move |m| (n, m))).collect();
    let tris: Vec<Result<Option<Tridiagonal>>> = jobs
        .par_iter()
        .map(|&(n, m)| {
            let d = channels[m];
            if d.ncols() != manifold.states[n].vector.len() || d.nrows() != h_exci.ncols() {
                return Err(Error::DimensionMismatch { expected: h_exci.ncols(), actual: d.nrows() });
            }
            let seed = d.apply_new(&manifold.states[n].vector);
            if norm(&seed) == 0.0 {
                return Ok(None);
            }
            tridiagonalize(h_exci, &seed, nsteps).map(Some)
        })
        .collect();
    let mut tris_ok = Vec::with_capacity(tris.len());
    for t in tris {
        tris_ok.push(t?);
    }
    let (mut emin, mut emax) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&(n, _), t) in jobs.iter().zip(&tris_ok) {
        if let Some(t) = t {
            let delta = manifold.states[n].energy - e0;
            let (lo, hi) = ritz_extent(t);
            emin = emin.min(lo - delta);
            emax = emax.max(hi - delta);
        }
    }
    if !emin.is_finite() {
        emin = e0;
        emax = e0;
    }
    let energies = spectrum_grid(grid, emin, emax, broadening.shift);
    let mut result = SpectrumResult::zeros(energies, channels.len());
    for (&(n, m), t) in jobs.iter().zip(&tris_ok) {
        let Some(t) = t else { continue };
        let state = &manifold.states[n];
        let delta = state.energy - e0;
        for (k, &e) in result.energies.iter().enumerate() {
            let z = C64::new(e - broadening.shift + delta, broadening.gamma(e));
            result.channels[m][k] += t.continued_fraction(z).conj() * state.weight;
        }
    }
    Ok(result)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RixsConfig {
    pub ein: f64,
    pub eout1: f64,
    pub eout2: f64,
    pub dout: f64,
    pub gammain: f64,
    /// (γ below crossover, crossover energy, γ above crossover)
    pub gammaout: [f64; 3],
}

impl RixsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter { name: "rixs".into(), message: m.into() });
        if !(self.eout1 < self.eout2) {
            return bad("eout1 must be below eout2");
        }
        if !(self.dout > 0.0) {
            return bad("dout must be positive");
        }
        if !(self.gammain > 0.0) || !(self.gammaout[0] > 0.0) || !(self.gammaout[2] > 0.0) {
            return bad("broadenings must be positive");
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.eout2 - self.eout1) / self.dout).round() as usize + 1;
        (0..n).map(|k| self.eout1 + k as f64 * self.dout).collect()
    }

    pub fn gamma_out(&self, w: f64) -> f64 {
        if w < self.gammaout[1] {
            self.gammaout[0]
        } else {
            self.gammaout[2]
        }
    }
}

/// RIXS from the lowest ground state: v = D_out (E₀ + ein + iγ_in − H_exci)⁻¹ D_in X₀,
/// then conj(CF(ω_out + iγ_out)) of H_final seeded with v.
#[allow(clippy::too_many_arguments)]
pub fn rixs(
    h_exci: &dyn LinearOperator,
    h_final: &dyn LinearOperator,
    d_in: &dyn LinearOperator,
    d_out: &dyn LinearOperator,
    ground: (f64, &[C64]),
    nsteps: usize,
    cfg: &RixsConfig,
    resolvent: &ResolventOptions,
) -> Result<SpectrumResult> {
    cfg.validate()?;
    let energies = cfg.grid();
    let mut result = SpectrumResult::zeros(energies, 1);
    let (e0, x0) = ground;
    let seed = d_in.apply_new(x0);
    if norm(&seed) == 0.0 {
        return Ok(result);
    }
    let z = C64::new(e0 + cfg.ein, cfg.gammain);
    let inter = resolvent_apply(h_exci, z, &seed, resolvent)?;
    let v = d_out.apply_new(&inter);
    if norm(&v) == 0.0 {
        return Ok(result);
    }
    let tri = tridiagonalize(h_final, &v, nsteps)?;
    for (k, &w) in result.energies.iter().enumerate() {
        result.channels[0][k] = tri.continued_fraction(C64::new(w, cfg.gamma_out(w))).conj();
    }
    Ok(result)
}

/// Per-state expectation values: E, S², L², 2S·L, N_ligand, S_z, L_z.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Counters {
    pub energies: Vec<f64>,
    pub s2: Vec<f64>,
    pub l2: Vec<f64>,
    pub two_sl: Vec<f64>,
    pub n_ligand: Vec<f64>,
    pub sz: Vec<f64>,
    pub lz: Vec<f64>,
}

pub fn expectation(op: &dyn LinearOperator, x: &[C64]) -> f64 {
    dot(x, &op.apply_new(x)).re
}

/// `ops` in the order S², L², 2S·L, N_ligand, S_z, L_z.
pub fn counters(manifold: &GroundManifold, ops: [&dyn LinearOperator; 6]) -> Counters {
    let mut c = Counters::default();
    for s in &manifold.states {
        let v: Vec<f64> = ops.iter().map(|op| expectation(*op, &s.vector)).collect();
        c.energies.push(s.energy);
        c.s2.push(v[0]);
        c.l2.push(v[1]);
        c.two_sl.push(v[2]);
        c.n_ligand.push(v[3]);
        c.sz.push(v[4]);
        c.lz.push(v[5]);
    }
    c
}

impl Counters {
    pub fn write_to(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "# E S2 L2 2SL Nlig Sz Lz")?;
        for i in 0..self.energies.len() {
            writeln!(
                w,
                "{:.10e} {:.10e} {:.10e} {:.10e} {:.10e} {:.10e} {:.10e}",
                self.energies[i], self.s2[i], self.l2[i], self.two_sl[i], self.n_ligand[i], self.sz[i], self.lz[i]
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::DenseOperator;
    use approx::assert_abs_diff_eq;

    fn unit(n: usize, i: usize) -> Vec<C64> {
        let mut v = vec![ZERO; n];
        v[i] = C64::new(1.0, 0.0);
        v
    }

    #[test]
    fn boltzmann_weights() {
        let m = GroundManifold::from_eigenpairs(&[0.0, 0.009 * 2f64.ln()], vec![unit(2, 0), unit(2, 1)], 0.009, 0.1, 1e-6);
        assert_abs_diff_eq!(m.states[0].weight, 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.states[1].weight, 1.0 / 3.0, epsilon = 1e-12);
        let m = GroundManifold::from_eigenpairs(&[0.0, 1e-11, 0.05], vec![unit(3, 0), unit(3, 1), unit(3, 2)], 0.009, 0.0, 1e-6);
        assert_eq!(m.states.len(), 2);
        let m = GroundManifold::from_eigenpairs(&[0.0, 0.5], vec![unit(2, 0), unit(2, 1)], 0.009, 1.0, 1e-6);
        assert_eq!(m.states.len(), 1);
        assert_eq!(m.states[0].weight, 1.0);
    }

    #[test]
    fn grid_endpoints() {
        let g = spectrum_grid(&GridSpec { npunti: 2, dxleft: -0.1, dxright: 0.1 }, 1.0, 3.0, 0.5);
        assert_eq!(g, vec![1.4, 3.6]);
        let g = spectrum_grid(&GridSpec { npunti: 11, dxleft: 0.0, dxright: 0.0 }, 2.0, 2.0, 0.0);
        assert_abs_diff_eq!(g[0], 1.5);
        assert_abs_diff_eq!(g[10], 2.5);
        for w in g.windows(2) {
            assert_abs_diff_eq!(w[1] - w[0], 0.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn one_pole_lorentzian() {
        let h = DenseOperator::from_real(&DMatrix::from_row_slice(1, 1, &[2.0]));
        let d = DenseOperator::from_real(&DMatrix::from_row_slice(1, 1, &[1.0]));
        let man = GroundManifold::from_eigenpairs(&[0.0], vec![unit(1, 0)], 0.009, 0.1, 1e-6);
        let b = Broadening { all1: 0.1, all2: 0.3, el2l3: 700.0, shift: 0.5 };
        let r = absorption(&h, &[&d], &man, 10, &GridSpec { npunti: 201, dxleft: -1.0, dxright: 1.0 }, &b).unwrap();
        let peak = r.channels[0].iter().enumerate().max_by(|a, b| a.1.im.total_cmp(&b.1.im)).unwrap().0;
        assert_abs_diff_eq!(r.energies[peak], 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.channels[0][peak].im, 10.0, epsilon = 1e-10);
        assert!(r.channels[0].iter().all(|c| c.im >= 0.0));
    }

    #[test]
    fn forbidden_channel_is_zero() {
        let h = DenseOperator::from_real(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]));
        let d = DenseOperator::from_real(&DMatrix::zeros(2, 1));
        let man = GroundManifold::from_eigenpairs(&[0.0], vec![unit(1, 0)], 0.009, 0.1, 1e-6);
        let b = Broadening { all1: 0.1, all2: 0.1, el2l3: 700.0, shift: 0.0 };
        let r = absorption(&h, &[&d], &man, 10, &GridSpec { npunti: 5, dxleft: -0.1, dxright: 0.1 }, &b).unwrap();
        assert!(r.channels[0].iter().all(|c| c.norm() == 0.0));
        assert_eq!(r.energies.len(), 5);
    }

    #[test]
    fn rixs_grid_rows() {
        let cfg = RixsConfig { ein: 26.43, eout1: 630.0, eout2: 790.0, dout: 0.1, gammain: 0.2, gammaout: [0.5, 20.0, 1.0] };
        let g = cfg.grid();
        assert_eq!(g.len(), 1601);
        assert_abs_diff_eq!(g[1600], 790.0, epsilon = 1e-9);
        assert_eq!(cfg.gamma_out(19.9), 0.5);
        assert_eq!(cfg.gamma_out(20.0), 1.0);
    }

    #[test]
    fn columns_layout() {
        let r = SpectrumResult::zeros(vec![0.0, 1.0, 2.0], 3);
        let mut buf = Vec::new();
        r.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().all(|l| l.split_whitespace().count() == 7));
    }
}
