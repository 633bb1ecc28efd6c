//! Shell layouts, configuration constraints and Hilbert spaces generated by
//! seed-plus-wanderer closure or by direct enumeration.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::bits::BitChain;
use crate::error::{Error, Result};
use crate::fock::{Determinant, OperatorSum};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShellKind {
    /// Atomic shell with orbital angular momentum `l`; orbitals ordered m = -l..l.
    Atomic { l: usize },
    /// Effective ligand orbitals (spin-degenerate).
    Ligand { orbitals: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shell {
    pub name: String,
    pub kind: ShellKind,
    pub offset: usize,
}

impl Shell {
    pub fn orbitals(&self) -> usize {
        match self.kind {
            ShellKind::Atomic { l } => 2 * l + 1,
            ShellKind::Ligand { orbitals } => orbitals,
        }
    }

    /// Spin-orbital count.
    pub fn len(&self) -> usize {
        2 * self.orbitals()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }

    pub fn l(&self) -> Option<usize> {
        match self.kind {
            ShellKind::Atomic { l } => Some(l),
            ShellKind::Ligand { .. } => None,
        }
    }

    /// Spin-orbital index of orbital `orbital` (0-based) with `spin` 0 = up, 1 = down.
    pub fn index(&self, orbital: usize, spin: usize) -> usize {
        debug_assert!(orbital < self.orbitals() && spin < 2);
        self.offset + 2 * orbital + spin
    }

    /// Spin-orbital index of the complex harmonic `m` (atomic shells).
    pub fn index_m(&self, m: i32, spin: usize) -> usize {
        let l = self.l().expect("m index on ligand shell") as i32;
        self.index((m + l) as usize, spin)
    }
}

/// Ordered shells with contiguous spin-orbital ranges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShellLayout {
    shells: Vec<Shell>,
}

impl ShellLayout {
    pub fn new(shells: &[(&str, ShellKind)]) -> Self {
        let mut offset = 0;
        let shells = shells
            .iter()
            .map(|(name, kind)| {
                let s = Shell { name: name.to_string(), kind: *kind, offset };
                offset += s.len();
                s
            })
            .collect();
        ShellLayout { shells }
    }

    pub fn shells(&self) -> &[Shell] {
        &self.shells
    }

    pub fn shell(&self, i: usize) -> &Shell {
        &self.shells[i]
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.shells.iter().position(|s| s.name == name)
    }

    pub fn width(&self) -> usize {
        self.shells.last().map(|s| s.offset + s.len()).unwrap_or(0)
    }

    pub fn occupations(&self, det: &Determinant) -> Vec<usize> {
        self.shells.iter().map(|s| det.val().count_range(s.range())).collect()
    }

    /// Twice the total S_z (up minus down electrons).
    pub fn twice_sz(&self, det: &Determinant) -> i32 {
        det.val().ones().map(|p| if p % 2 == 0 { 1 } else { -1 }).sum()
    }
}

/// Which configurations a space admits.
///
/// The valence shell holds `min_valence + i` electrons and the ligand shell
/// (if any) is full minus `i`, for `i = 0..=nhopped`; core shells have fixed
/// occupations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigConstraint {
    pub valence: usize,
    pub ligand: Option<usize>,
    pub min_valence: usize,
    pub nhopped: usize,
    pub core_occupation: Vec<(usize, usize)>,
    /// Fixed total 2·S_z, when the space is spin-constrained.
    pub twice_sz: Option<i32>,
}

impl ConfigConstraint {
    /// Per-shell occupations of every admitted configuration, in order.
    pub fn configurations(&self, layout: &ShellLayout) -> Result<Vec<Vec<usize>>> {
        let nshell = layout.shells().len();
        if self.valence >= nshell || self.ligand.is_some_and(|l| l >= nshell) {
            return Err(Error::InvalidConstraint("shell index out of layout".into()));
        }
        if self.ligand.is_none() && self.nhopped > 0 {
            return Err(Error::InvalidConstraint("nhopped > 0 requires a ligand shell".into()));
        }
        let mut base = vec![0usize; nshell];
        let mut fixed = vec![false; nshell];
        for &(s, n) in &self.core_occupation {
            if s >= nshell || n > layout.shell(s).len() {
                return Err(Error::InvalidConstraint(format!("core occupation {n} invalid for shell {s}")));
            }
            base[s] = n;
            fixed[s] = true;
        }
        for (s, f) in fixed.iter().enumerate() {
            if !f && s != self.valence && Some(s) != self.ligand {
                return Err(Error::InvalidConstraint(format!(
                    "shell '{}' has no occupation rule",
                    layout.shell(s).name
                )));
            }
        }
        let mut out = Vec::new();
        for i in 0..=self.nhopped {
            let mut c = base.clone();
            c[self.valence] = self.min_valence + i;
            if c[self.valence] > layout.shell(self.valence).len() {
                continue;
            }
            if let Some(lig) = self.ligand {
                let full = layout.shell(lig).len();
                if i > full {
                    continue;
                }
                c[lig] = full - i;
            }
            out.push(c);
        }
        if out.is_empty() {
            return Err(Error::InvalidConstraint("no admissible configuration".into()));
        }
        Ok(out)
    }

    pub fn config_index(&self, layout: &ShellLayout, configs: &[Vec<usize>], det: &Determinant) -> Option<usize> {
        if let Some(sz) = self.twice_sz {
            if layout.twice_sz(det) != sz {
                return None;
            }
        }
        let occ = layout.occupations(det);
        configs.iter().position(|c| *c == occ)
    }

    /// Highest-S_z determinant of the first configuration (lowest indices
    /// filled first, up spins before down spins).
    pub fn high_spin_seed(&self, layout: &ShellLayout) -> Result<Determinant> {
        let configs = self.configurations(layout)?;
        let first = &configs[0];
        let mut positions = Vec::new();
        for (s, &n) in first.iter().enumerate() {
            let shell = layout.shell(s);
            let norb = shell.orbitals();
            let up = n.min(norb);
            positions.extend((0..up).map(|o| shell.index(o, 0)));
            positions.extend((0..n - up).map(|o| shell.index(o, 1)));
        }
        Ok(Determinant::from_occupied(layout.width(), &positions))
    }

    /// Seed determinant for expansion: the high-spin seed, with spins
    /// flipped down (lowest shells first) until the fixed S_z is met.
    pub fn seed(&self, layout: &ShellLayout) -> Result<Determinant> {
        let mut det = self.high_spin_seed(layout)?;
        let Some(target) = self.twice_sz else { return Ok(det) };
        let mut current = layout.twice_sz(&det);
        if target > current || (current - target) % 2 != 0 {
            return Err(Error::InvalidConstraint(format!("2Sz={target} unreachable from the seed (2Sz={current})")));
        }
        'flip: while current > target {
            for shell in layout.shells() {
                for o in 0..shell.orbitals() {
                    let (up, down) = (shell.index(o, 0), shell.index(o, 1));
                    if det.is_occupied(up) && !det.is_occupied(down) {
                        let mut occupied: Vec<usize> = det.val().ones().filter(|&p| p != up).collect();
                        occupied.push(down);
                        det = Determinant::from_occupied(layout.width(), &occupied);
                        current -= 2;
                        continue 'flip;
                    }
                }
            }
            return Err(Error::InvalidConstraint(format!("2Sz={target} unreachable from the seed")));
        }
        Ok(det)
    }

    pub fn max_twice_sz(&self, layout: &ShellLayout) -> Result<i32> {
        Ok(layout.twice_sz(&self.high_spin_seed(layout)?))
    }
}

/// Ordered determinant basis with index lookup.
#[derive(Clone, Debug)]
pub struct HilbertSpace {
    name: String,
    layout: ShellLayout,
    constraint: ConfigConstraint,
    basis: Vec<Determinant>,
    lookup: FxHashMap<BitChain, usize>,
    configs: Vec<Vec<usize>>,
}

impl HilbertSpace {
    /// Builds a space from an explicit basis, sorting it into the canonical
    /// order (configuration order, then lexicographic bit order).
    pub fn from_basis(
        name: &str,
        layout: ShellLayout,
        constraint: ConfigConstraint,
        basis: Vec<Determinant>,
    ) -> Result<Self> {
        let configs = constraint.configurations(&layout)?;
        let mut keyed = Vec::with_capacity(basis.len());
        for d in basis {
            if d.width() != layout.width() {
                return Err(Error::DimensionMismatch { expected: layout.width(), actual: d.width() });
            }
            let c = constraint.config_index(&layout, &configs, &d).ok_or_else(|| {
                Error::InvalidConstraint(format!("determinant {d} violates the constraint of '{name}'"))
            })?;
            keyed.push((c, d));
        }
        keyed.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.val().cmp(b.1.val())));
        keyed.dedup_by(|a, b| a.1 == b.1);
        let basis: Vec<Determinant> = keyed.into_iter().map(|(_, d)| d).collect();
        let lookup = basis.iter().enumerate().map(|(i, d)| (d.val().clone(), i)).collect();
        Ok(HilbertSpace { name: name.to_string(), layout, constraint, basis, lookup, configs })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn layout(&self) -> &ShellLayout {
        &self.layout
    }

    pub fn constraint(&self) -> &ConfigConstraint {
        &self.constraint
    }

    pub fn basis(&self) -> &[Determinant] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn index_of(&self, det: &Determinant) -> Option<usize> {
        self.lookup.get(det.val()).copied()
    }

    /// True when `det` satisfies the space constraint, whether or not it is
    /// in the basis.
    pub fn admits(&self, det: &Determinant) -> bool {
        det.width() == self.layout.width() && self.constraint.config_index(&self.layout, &self.configs, det).is_some()
    }

    /// True when the space is a spin sector, so S_z-changing operators are
    /// truncated rather than rejected on projection.
    pub fn is_spin_sector(&self) -> bool {
        self.constraint.twice_sz.is_some()
    }

    pub fn write_basis(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "#HXX-BASIS width={} dim={}", self.layout.width(), self.dim()).map_err(io)?;
        for d in &self.basis {
            writeln!(w, "{}", d.val()).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Reads a basis file; returns the determinants in file order.
pub fn read_basis(path: &Path) -> Result<Vec<Determinant>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty basis file"))?
        .map_err(|e| Error::io(path, e))?;
    let fields = header_fields(&header, "#HXX-BASIS").ok_or_else(|| Error::parse(path, 1, "bad basis header"))?;
    let get = |k: &str| -> Result<usize> {
        fields
            .iter()
            .find(|(key, _)| key == k)
            .and_then(|(_, v)| v.parse().ok())
            .ok_or_else(|| Error::parse(path, 1, format!("missing {k} in header")))
    };
    let width = get("width")?;
    let dim = get("dim")?;
    let mut out = Vec::with_capacity(dim);
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bits = BitChain::parse(line)
            .filter(|b| b.width() == width)
            .ok_or_else(|| Error::parse(path, n + 2, "malformed determinant"))?;
        out.push(Determinant::new(bits));
    }
    if out.len() != dim {
        return Err(Error::parse(path, 1, format!("header says dim={dim}, file has {}", out.len())));
    }
    Ok(out)
}

pub(crate) fn header_fields(line: &str, tag: &str) -> Option<Vec<(String, String)>> {
    let rest = line.trim().strip_prefix(tag)?;
    rest.split_whitespace()
        .map(|kv| kv.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

/// Closes `seed` under repeated application of `wanderer`, keeping only
/// determinants admitted by `constraint`.
pub fn expand(
    name: &str,
    layout: &ShellLayout,
    seed: &[Determinant],
    wanderer: &OperatorSum,
    constraint: &ConfigConstraint,
) -> Result<HilbertSpace> {
    if seed.is_empty() {
        return Err(Error::EmptySeed);
    }
    let configs = constraint.configurations(layout)?;
    let mut seen: FxHashMap<BitChain, ()> = FxHashMap::default();
    let mut basis = Vec::new();
    for d in seed {
        if constraint.config_index(layout, &configs, d).is_none() {
            return Err(Error::InvalidConstraint(format!("seed determinant {d} violates the constraint")));
        }
        if seen.insert(d.val().clone(), ()).is_none() {
            basis.push(d.clone());
        }
    }
    let mut frontier = basis.clone();
    while !frontier.is_empty() {
        let images: Vec<Vec<Determinant>> = frontier
            .par_iter()
            .map(|d| {
                let mut out = Vec::new();
                wanderer.for_each_image(d, |img, _| {
                    if constraint.config_index(layout, &configs, &img).is_some() {
                        out.push(img);
                    }
                });
                out
            })
            .collect();
        let mut next = Vec::new();
        for img in images.into_iter().flatten() {
            if seen.insert(img.val().clone(), ()).is_none() {
                basis.push(img.clone());
                next.push(img);
            }
        }
        log::debug!("expand '{name}': {} determinants, frontier {}", basis.len(), next.len());
        frontier = next;
    }
    HilbertSpace::from_basis(name, layout.clone(), constraint.clone(), basis)
}

/// All determinants of every admitted configuration.
pub fn enumerate_configurations(name: &str, layout: &ShellLayout, constraint: &ConfigConstraint) -> Result<HilbertSpace> {
    let configs = constraint.configurations(layout)?;
    let mut basis = Vec::new();
    for config in &configs {
        let per_shell: Vec<Vec<Vec<usize>>> = layout
            .shells()
            .iter()
            .zip(config)
            .map(|(shell, &n)| combinations(shell.range().collect(), n))
            .collect();
        let mut chunk = Vec::new();
        cartesian(&per_shell, &mut Vec::new(), &mut |positions| {
            let d = Determinant::from_occupied(layout.width(), positions);
            if constraint.twice_sz.is_none_or(|sz| layout.twice_sz(&d) == sz) {
                chunk.push(d);
            }
        });
        basis.extend(chunk);
    }
    HilbertSpace::from_basis(name, layout.clone(), constraint.clone(), basis)
}

fn combinations(items: Vec<usize>, k: usize) -> Vec<Vec<usize>> {
    let n = items.len();
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let Some(i) = (0..k).rev().find(|&i| idx[i] < i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn cartesian(sets: &[Vec<Vec<usize>>], acc: &mut Vec<usize>, emit: &mut dyn FnMut(&[usize])) {
    match sets.split_first() {
        None => emit(acc),
        Some((first, rest)) => {
            for choice in first {
                let len = acc.len();
                acc.extend_from_slice(choice);
                cartesian(rest, acc, emit);
                acc.truncate(len);
            }
        }
    }
}

/// Binomial coefficient.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}
