//! Case directories: the expanded bases and unit-coefficient operator
//! components written by `expand`, and the runs that read them back.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;

use crate::classes::{ExpandRequest, ExperimentClass, GeometryRecord, TransitionPlan, COUNTER_COMPONENTS};
use crate::error::{Error, Result};
use crate::operator::LinearOperator;
use crate::params::ParamSet;
use crate::solvers::{LanczosOptions, ResolventOptions};
use crate::sparse::{project_with, AssembledOp, ComponentSet, Escape, SparseOp};
use crate::space::{expand, HilbertSpace};
use crate::spectra::{
    absorption, counters, ground_manifold, rixs, Broadening, Counters, GridSpec, GroundManifold, ManifoldConfig, RixsConfig,
    SpectrumResult,
};

pub const MANIFEST: &str = "manifest.txt";
const FORMAT_VERSION: &str = "1";
const MANIFEST_TAG: &str = "#HXX-CASE";

/// Relative change of Vs/Vp above which the stored ligand basis is reported
/// as stale.
pub const VS_VP_TOLERANCE: f64 = 0.1;

/// Ordered `key = value` record describing a case directory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    entries: BTreeMap<String, String>,
}

impl Manifest {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Case(format!("manifest has no '{key}'")))
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn class(&self) -> Result<&str> {
        self.require("class")
    }

    pub fn request(&self) -> Result<ExpandRequest> {
        let parse = |k: &str| -> Result<usize> {
            self.require(k)?.parse().map_err(|_| Error::Case(format!("manifest '{k}' is not an integer")))
        };
        Ok(ExpandRequest { nmin: parse("nmin")?, nhopped: parse("nhopped")?, spinfixed: self.require("spinfixed")? == "true" })
    }

    pub fn geometry(&self) -> Result<GeometryRecord> {
        let vs_vp = match self.get("vs_vp") {
            None | Some("none") => None,
            Some(v) => Some(v.parse().map_err(|_| Error::Case("manifest 'vs_vp' is not a number".into()))?),
        };
        Ok(GeometryRecord { fingerprint: self.require("geometry")?.to_string(), vs_vp })
    }

    pub fn spaces(&self) -> Vec<(String, usize)> {
        self.entries
            .iter()
            .filter_map(|(k, v)| Some((k.strip_prefix("space.")?.to_string(), v.parse().ok()?)))
            .collect()
    }

    fn list(&self, key: &str) -> Vec<String> {
        self.get(key).map_or_else(Vec::new, |v| v.split(',').filter(|s| !s.is_empty()).map(String::from).collect())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = format!("{MANIFEST_TAG}\n");
        for (k, v) in &self.entries {
            text.push_str(&format!("{k} = {v}\n"));
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim() == MANIFEST_TAG => {}
            _ => return Err(Error::parse(path, 1, format!("expected {MANIFEST_TAG} header"))),
        }
        let mut m = Manifest::default();
        for (n, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::parse(path, n + 1, "expected key = value"))?;
            m.set(k.trim(), v.trim());
        }
        if m.get("format_version") != Some(FORMAT_VERSION) {
            return Err(Error::parse(path, 1, format!("unsupported format_version (expected {FORMAT_VERSION})")));
        }
        Ok(m)
    }
}

fn component_file(dir: &Path, space: &str, name: &str) -> PathBuf {
    dir.join(format!("comp_{space}_{name}.txt"))
}

fn transition_file(dir: &Path, from: &str, to: &str, name: &str) -> PathBuf {
    dir.join(format!("trans_{from}_{to}_{name}.txt"))
}

pub fn basis_file(dir: &Path, space: &str) -> PathBuf {
    dir.join(format!("basis_{space}.txt"))
}

/// A case held in memory: the manifest, the expanded spaces and their
/// projected components.
pub struct BuiltCase {
    pub manifest: Manifest,
    pub spaces: Vec<HilbertSpace>,
    pub data: CaseData,
}

/// Expands every space of `class` and projects all components.
pub fn build_case(class: &dyn ExperimentClass, req: &ExpandRequest, params: &ParamSet) -> Result<BuiltCase> {
    params.validate()?;
    let model = class.model(req, params)?;
    let mut manifest = Manifest::default();
    manifest.set("format_version", FORMAT_VERSION);
    manifest.set("class", class.name());
    manifest.set("nmin", req.nmin);
    manifest.set("nhopped", req.nhopped);
    manifest.set("spinfixed", req.spinfixed);
    manifest.set("width", model.layout.width());
    manifest.set("geometry", &model.geometry.fingerprint);
    manifest.set("vs_vp", model.geometry.vs_vp.map_or("none".to_string(), |v| format!("{v:?}")));
    if let Some(sz) = model.spaces[0].constraint.twice_sz {
        manifest.set("twice_sz", sz);
    }

    let mut spaces: BTreeMap<String, HilbertSpace> = BTreeMap::new();
    let mut sets = BTreeMap::new();
    for sm in &model.spaces {
        let seed = sm.constraint.seed(&model.layout)?;
        let space = expand(&sm.key, &model.layout, &[seed], &model.wanderer, &sm.constraint)?;
        log::info!("space '{}': {} determinants", sm.key, space.dim());
        let mut set = ComponentSet::new(&sm.key, &sm.key, space.dim(), space.dim());
        for (name, op) in &sm.components {
            set.insert(name, project_with(op, &space, &space, Escape::Constrained)?)?;
        }
        manifest.set(format!("space.{}", sm.key), space.dim());
        manifest.set(format!("components.{}", sm.key), names(&sm.components));
        sets.insert(sm.key.clone(), set);
        spaces.insert(sm.key.clone(), space);
    }
    let mut transitions = BTreeMap::new();
    for tm in &model.transitions {
        let (from, to) = (&spaces[&tm.from], &spaces[&tm.to]);
        let mut set = ComponentSet::new(&tm.from, &tm.to, to.dim(), from.dim());
        for (name, op) in &tm.components {
            set.insert(name, project_with(op, from, to, Escape::Constrained)?)?;
        }
        manifest.set(format!("transition.{}.{}", tm.from, tm.to), names(&tm.components));
        transitions.insert((tm.from.clone(), tm.to.clone()), set);
    }
    let order: Vec<&str> = model.spaces.iter().map(|s| s.key.as_str()).collect();
    let spaces: Vec<HilbertSpace> = order.iter().map(|k| spaces.remove(*k).expect("expanded")).collect();
    let data = CaseData { manifest: manifest.clone(), spaces: sets, transitions };
    Ok(BuiltCase { manifest, spaces, data })
}

impl BuiltCase {
    /// Writes bases, components, transitions and the manifest into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for space in &self.spaces {
            space.write_basis(&basis_file(dir, space.name()))?;
        }
        for (key, set) in &self.data.spaces {
            for (name, op) in set.iter() {
                op.write(&component_file(dir, key, name), key, key)?;
            }
        }
        for ((from, to), set) in &self.data.transitions {
            for (name, op) in set.iter() {
                op.write(&transition_file(dir, from, to, name), from, to)?;
            }
        }
        self.manifest.write(&dir.join(MANIFEST))
    }
}

/// Builds the case and writes it to `dir`. An existing case built with
/// different settings is only replaced when `force` is set.
pub fn expand_case(
    class: &dyn ExperimentClass,
    req: &ExpandRequest,
    params: &ParamSet,
    dir: &Path,
    force: bool,
) -> Result<Manifest> {
    let manifest_path = dir.join(MANIFEST);
    if manifest_path.exists() && !force {
        let old = Manifest::read(&manifest_path)?;
        if old.class()? != class.name() || old.request()? != *req {
            return Err(Error::Case(format!(
                "{} holds a different case (class {}, {:?}); use --force to replace it",
                dir.display(),
                old.class()?,
                old.request()?
            )));
        }
    }
    let built = build_case(class, req, params)?;
    built.write(dir)?;
    Ok(built.manifest)
}

fn names(named: &[(String, crate::fock::OperatorSum)]) -> String {
    named.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(",")
}

/// Operator components of a case directory, loaded into memory.
#[derive(Clone, Debug)]
pub struct CaseData {
    pub manifest: Manifest,
    pub spaces: BTreeMap<String, ComponentSet>,
    pub transitions: BTreeMap<(String, String), ComponentSet>,
}

impl CaseData {
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = Manifest::read(&dir.join(MANIFEST))?;
        let dims: BTreeMap<String, usize> = manifest.spaces().into_iter().collect();
        let read = |path: PathBuf, from: &str, to: &str| -> Result<SparseOp> {
            let (op, f, t) = SparseOp::read(&path)?;
            if f != from || t != to {
                return Err(Error::Case(format!("{} maps {f} -> {t}, expected {from} -> {to}", path.display())));
            }
            Ok(op)
        };
        let mut spaces = BTreeMap::new();
        for (key, &dim) in &dims {
            let mut set = ComponentSet::new(key, key, dim, dim);
            for name in manifest.list(&format!("components.{key}")) {
                set.insert(&name, read(component_file(dir, key, &name), key, key)?)?;
            }
            spaces.insert(key.clone(), set);
        }
        let mut transitions = BTreeMap::new();
        let keys: Vec<String> = manifest.entries.keys().filter(|k| k.starts_with("transition.")).cloned().collect();
        for k in keys {
            let mut parts = k.splitn(3, '.').skip(1);
            let (Some(from), Some(to)) = (parts.next(), parts.next()) else {
                return Err(Error::Case(format!("malformed manifest key '{k}'")));
            };
            let dim = |s: &str| dims.get(s).copied().ok_or_else(|| Error::Case(format!("transition names unknown space '{s}'")));
            let mut set = ComponentSet::new(from, to, dim(to)?, dim(from)?);
            for name in manifest.list(&k) {
                set.insert(&name, read(transition_file(dir, from, to, &name), from, to)?)?;
            }
            transitions.insert((from.to_string(), to.to_string()), set);
        }
        Ok(CaseData { manifest, spaces, transitions })
    }

    pub fn space(&self, key: &str) -> Result<&ComponentSet> {
        self.spaces.get(key).ok_or_else(|| Error::Case(format!("case has no space '{key}'")))
    }

    pub fn transition(&self, from: &str, to: &str) -> Result<&ComponentSet> {
        self.transitions
            .get(&(from.to_string(), to.to_string()))
            .ok_or_else(|| Error::Case(format!("case has no transition {from} -> {to}")))
    }

    /// Checks that the case belongs to `class` and was built with the
    /// geometry in `params`.
    pub fn check(&self, class: &dyn ExperimentClass, params: &ParamSet) -> Result<()> {
        let built = self.manifest.class()?;
        if built != class.name() {
            return Err(Error::Case(format!("case was expanded for class '{built}', parameters are for '{}'", class.name())));
        }
        let now = class.geometry(params)?;
        let then = self.manifest.geometry()?;
        if now.fingerprint != then.fingerprint {
            return Err(Error::Case(format!(
                "geometry changed since expand ({} -> {}); rerun expand",
                then.fingerprint, now.fingerprint
            )));
        }
        if let (Some(a), Some(b)) = (then.vs_vp, now.vs_vp) {
            if ((b - a) / a).abs() > VS_VP_TOLERANCE {
                log::warn!("Vs/Vp changed from {a} to {b}; the ligand basis of the case may be stale, consider rerunning expand");
            }
        }
        Ok(())
    }

    pub fn hamiltonian<'a>(&'a self, class: &dyn ExperimentClass, space: &str, params: &ParamSet) -> Result<AssembledOp<'a>> {
        self.space(space)?.assemble(&class.hamiltonian(space, params)?)
    }

    fn channels<'a>(&'a self, plan: &TransitionPlan) -> Result<Vec<AssembledOp<'a>>> {
        let set = self.transition(&plan.from, &plan.to)?;
        plan.channels.iter().map(|c| set.assemble(c)).collect()
    }
}

pub fn manifold_config(params: &ParamSet) -> Result<ManifoldConfig> {
    let nsearchedeigen = positive(params, "nsearchedeigen")?;
    Ok(ManifoldConfig {
        nsearchedeigen,
        temp: params.real("temp")?,
        erange: params.real("erange")?,
        tolefact: params.real("tolefact")?,
        lanczos: LanczosOptions::nev(nsearchedeigen),
    })
}

fn positive(params: &ParamSet, name: &str) -> Result<usize> {
    let v = params.int(name)?;
    usize::try_from(v).ok().filter(|&v| v > 0).ok_or_else(|| Error::InvalidParameter {
        name: name.into(),
        message: "must be a positive integer".into(),
    })
}

/// Boltzmann-weighted ground manifold of `space`.
pub fn ground_states(class: &dyn ExperimentClass, case: &CaseData, space: &str, params: &ParamSet) -> Result<GroundManifold> {
    let h = case.hamiltonian(class, space, params)?;
    ground_manifold(&h, &manifold_config(params)?)
}

/// Absorption spectrum; `pol` selects one polarization channel, `None`
/// gives the class's default channels.
pub fn run_spectrum(class: &dyn ExperimentClass, params: &ParamSet, case: &CaseData, pol: Option<&[C64]>) -> Result<SpectrumResult> {
    params.validate()?;
    case.check(class, params)?;
    let plan = class.absorption(params, pol)?;
    let manifold = ground_states(class, case, &plan.from, params)?;
    let h_exci = case.hamiltonian(class, &plan.to, params)?;
    let channels = case.channels(&plan)?;
    let refs: Vec<&dyn LinearOperator> = channels.iter().map(|c| c as &dyn LinearOperator).collect();
    let grid = GridSpec { npunti: positive(params, "npunti")?, dxleft: params.real("dxleft")?, dxright: params.real("dxright")? };
    let broadening = Broadening {
        all1: params.real("all1")?,
        all2: params.real("all2")?,
        el2l3: params.real("El2l3")?,
        shift: params.real("shift")?,
    };
    absorption(&h_exci, &refs, &manifold, positive(params, "NstepsTridiag")?, &grid, &broadening)
}

/// RIXS map at one incoming energy from the lowest ground state.
pub fn run_rixs(
    class: &dyn ExperimentClass,
    params: &ParamSet,
    case: &CaseData,
    cfg: &RixsConfig,
    polin: &[C64],
    polout: &[C64],
) -> Result<SpectrumResult> {
    params.validate()?;
    case.check(class, params)?;
    let plan = class.rixs(params, polin, polout)?;
    let manifold = ground_states(class, case, &plan.d_in.from, params)?;
    let h_exci = case.hamiltonian(class, &plan.d_in.to, params)?;
    let h_final = case.hamiltonian(class, &plan.d_out.to, params)?;
    let d_in = case.channels(&plan.d_in)?;
    let d_out = case.channels(&plan.d_out)?;
    let x0 = &manifold.states[0];
    rixs(
        &h_exci,
        &h_final,
        &d_in[0],
        &d_out[0],
        (x0.energy, &x0.vector),
        positive(params, "NstepsTridiag")?,
        cfg,
        &ResolventOptions::default(),
    )
}

/// Expectation values of the counter observables over the ground manifold.
pub fn run_counters(class: &dyn ExperimentClass, params: &ParamSet, case: &CaseData) -> Result<Counters> {
    params.validate()?;
    case.check(class, params)?;
    let manifold = ground_states(class, case, "base", params)?;
    let base = case.space("base")?;
    let one = C64::new(1.0, 0.0);
    let ops: Vec<AssembledOp> =
        COUNTER_COMPONENTS.iter().map(|n| base.assemble(&[(n.to_string(), one)])).collect::<Result<_>>()?;
    let refs: [&dyn LinearOperator; 6] = std::array::from_fn(|i| &ops[i] as &dyn LinearOperator);
    Ok(counters(&manifold, refs))
}
