//! Experiment classes: each one knows its shell layout, parameter schema,
//! Hamiltonian components, transition operators and how parameters map to
//! component coefficients. Classes are registered by name.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::OperatorSum;
use crate::hamiltonian::{
    coulomb_inter_components, coulomb_intra_components, counter_dl, crystal_field_components, effective_dipole_components,
    multipole_components, number, shell_counters, slater_koster_hopping, spin_minus, spin_orbit, spin_plus, spin_z,
    intra_shell_mixer, total_spin_flip,
};
use crate::ligand::{ligand_reduction, BondGeometry, HybridizationParams, LigandReduction};
use crate::params::{ParamSet, ParamSpec, ParamValue};
use crate::space::{ConfigConstraint, ShellKind, ShellLayout};

pub type Named = Vec<(String, OperatorSum)>;
/// A channel is a linear combination of named transition components.
pub type Channel = Vec<(String, C64)>;

/// Base-space components holding S², L², 2S·L, N_ligand, S_z, L_z.
pub const COUNTER_COMPONENTS: [&str; 6] = ["count_S2", "count_L2", "count_2SL", "count_Nlig", "count_Sz", "count_Lz"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExpandRequest {
    pub nmin: usize,
    pub nhopped: usize,
    pub spinfixed: bool,
}

pub struct SpaceModel {
    pub key: String,
    pub constraint: ConfigConstraint,
    pub components: Named,
}

pub struct TransitionModel {
    pub from: String,
    pub to: String,
    pub components: Named,
}

/// Geometry the case was built with.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometryRecord {
    pub fingerprint: String,
    /// Vs/Vp used for the ligand reduction.
    pub vs_vp: Option<f64>,
}

pub struct CaseModel {
    pub layout: ShellLayout,
    pub spaces: Vec<SpaceModel>,
    pub transitions: Vec<TransitionModel>,
    pub wanderer: OperatorSum,
    pub geometry: GeometryRecord,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionPlan {
    pub from: String,
    pub to: String,
    pub channels: Vec<Channel>,
}

pub struct RixsPlan {
    pub d_in: TransitionPlan,
    pub d_out: TransitionPlan,
}

pub trait ExperimentClass: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn schema(&self) -> Vec<ParamSpec>;
    fn geometry(&self, params: &ParamSet) -> Result<GeometryRecord>;
    fn model(&self, req: &ExpandRequest, params: &ParamSet) -> Result<CaseModel>;
    /// Coefficient for every Hamiltonian component of `space`.
    fn hamiltonian(&self, space: &str, params: &ParamSet) -> Result<Channel>;
    fn absorption(&self, params: &ParamSet, pol: Option<&[C64]>) -> Result<TransitionPlan>;
    fn rixs(&self, _params: &ParamSet, _polin: &[C64], _polout: &[C64]) -> Result<RixsPlan> {
        Err(Error::Transition(format!("class '{}' has no RIXS pathway", self.name())))
    }

    fn defaults(&self) -> ParamSet {
        ParamSet::defaults(self.name(), self.schema())
    }
}

#[derive(Default)]
pub struct ClassRegistry {
    classes: BTreeMap<&'static str, Box<dyn ExperimentClass>>,
}

impl ClassRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtin() -> Self {
        let mut r = Self::new();
        r.register(Box::new(TwoPThreeD));
        r.register(Box::new(Rixs));
        r.register(Box::new(DF));
        r
    }

    pub fn register(&mut self, class: Box<dyn ExperimentClass>) {
        self.classes.insert(class.name(), class);
    }

    pub fn get(&self, name: &str) -> Result<&dyn ExperimentClass> {
        self.classes.get(name).map(|c| c.as_ref()).ok_or_else(|| Error::UnknownClass(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.classes.keys().copied()
    }
}

// ---- shared recipe -------------------------------------------------------

/// Shell-level description of a class.
struct Recipe {
    shells: Vec<(&'static str, Option<usize>)>,
    valence: usize,
    ligand: Option<usize>,
    intra: Vec<(usize, &'static str)>,
    inter: Vec<(usize, usize, &'static str)>,
    spin_orbit: Vec<(usize, &'static str)>,
}

impl Recipe {
    fn layout(&self, ligand_orbitals: usize) -> ShellLayout {
        let shells: Vec<(&str, ShellKind)> = self
            .shells
            .iter()
            .map(|&(name, l)| match l {
                Some(l) => (name, ShellKind::Atomic { l }),
                None => (name, ShellKind::Ligand { orbitals: ligand_orbitals }),
            })
            .collect();
        ShellLayout::new(&shells)
    }

    fn constraint(&self, min_valence: usize, req: &ExpandRequest, core: Vec<(usize, usize)>) -> ConfigConstraint {
        ConfigConstraint {
            valence: self.valence,
            ligand: self.ligand,
            min_valence,
            nhopped: req.nhopped,
            core_occupation: core,
            twice_sz: None,
        }
    }

    /// Atomic components (Coulomb, spin-orbit, exchange field) plus counter
    /// term and counter observables.
    fn atomic_components(&self, layout: &ShellLayout) -> Result<Named> {
        let mut out = Named::new();
        for &(shell, label) in &self.intra {
            for (integral, op) in coulomb_intra_components(layout, shell)? {
                out.push((format!("{label}_{integral}"), op));
            }
        }
        for &(a, b, label) in &self.inter {
            for (integral, op) in coulomb_inter_components(layout, a, b)? {
                out.push((format!("{label}_{integral}"), op));
            }
        }
        for &(shell, label) in &self.spin_orbit {
            out.push((label.to_string(), spin_orbit(layout, shell, 1.0)));
        }
        out.push(("Sop_Zero".into(), spin_z(layout, self.valence)));
        out.push(("Sop_Minus".into(), spin_minus(layout, self.valence)));
        out.push(("Sop_Plus".into(), spin_plus(layout, self.valence)));
        if let Some(lig) = self.ligand {
            out.push(("counterDL".into(), counter_dl(layout, lig, 1.0)));
        }
        Ok(out)
    }

    fn counters(&self, layout: &ShellLayout) -> Named {
        let c = shell_counters(layout, self.valence);
        let nlig = self.ligand.map_or_else(OperatorSum::new, |l| number(layout, l));
        let ops = [c.s2, c.l2, c.two_sl, nlig, c.sz, c.lz];
        COUNTER_COMPONENTS.iter().map(|s| s.to_string()).zip(ops).collect()
    }

    fn wanderer(&self, layout: &ShellLayout, hopping: Option<&(OperatorSum, OperatorSum)>) -> OperatorSum {
        let mut w = intra_shell_mixer(layout);
        if let Some((s, p)) = hopping {
            w.add(s);
            w.add(p);
        }
        w.add(&total_spin_flip(layout));
        w.canonicalize()
    }
}

/// Coefficient of a named component for a space whose parameters carry
/// `prefix` (base_, exci_, fina_).
fn coefficient(name: &str, prefix: &str, params: &ParamSet, excited: bool) -> Result<C64> {
    let real = |v: f64| C64::new(v, 0.0);
    match name {
        "VC0" | "VC1" | "VC2" => Ok(real(params.real(name)?)),
        "Vs" | "Vp" => {
            let f = if excited { params.real("factorhopexci")? } else { 1.0 };
            Ok(real(params.real(name)? * f))
        }
        "Sop_Zero" | "Sop_Minus" | "Sop_Plus" => params.complex(&format!("{prefix}{name}")),
        _ => {
            let value = params.real(&format!("{prefix}{name}"))?;
            // Coulomb components are label_Fk / label_Gk; reduction for k > 0
            if let Some((label, integral)) = name.rsplit_once('_') {
                let k: Option<usize> = integral.strip_prefix(['F', 'G']).and_then(|k| k.parse().ok());
                if let Some(k) = k {
                    let reduc = if label == "couche1" { params.real("reduc_1")? } else { params.real("reduc_0_1")? };
                    return Ok(real(if k > 0 { value * reduc } else { value }));
                }
            }
            Ok(real(value))
        }
    }
}

fn hamiltonian_coefficients(names: &[String], prefix: &str, params: &ParamSet, excited: bool) -> Result<Channel> {
    let zero = params.complex(&format!("{prefix}Sop_Zero"))?;
    let minus = params.complex(&format!("{prefix}Sop_Minus"))?;
    let plus = params.complex(&format!("{prefix}Sop_Plus"))?;
    if zero.im.abs() > 1e-12 || (plus - minus.conj()).norm() > 1e-12 {
        return Err(Error::InvalidParameter {
            name: format!("{prefix}Sop_*"),
            message: "exchange field must be Hermitian: Sop_Zero real and Sop_Plus = conj(Sop_Minus)".into(),
        });
    }
    names.iter().map(|n| Ok((n.clone(), coefficient(n, prefix, params, excited)?))).collect()
}

fn bond_geometry(params: &ParamSet) -> Result<BondGeometry> {
    let mut g = BondGeometry::new(params.bonds("BONDS")?, params.real("DREF")?);
    g.facts_hop = if params.has("facts_hop") { params.opt_list("facts_hop")? } else { None };
    g.validate()?;
    Ok(g)
}

fn fingerprint(params: &ParamSet, names: &[&str]) -> Result<String> {
    let parts: Result<Vec<String>> = names.iter().map(|n| Ok(format!("{n}={}", params.value(n)?))).collect();
    Ok(parts?.join(";"))
}

fn reduction(params: &ParamSet, geom: &BondGeometry) -> Result<LigandReduction> {
    let hyb = HybridizationParams { vs: params.real("Vs")?, vp: params.real("Vp")?, alpha_vsp: params.real("ALPHAVSP")? };
    ligand_reduction(geom, &hyb)
}

fn vs_vp(params: &ParamSet) -> Result<Option<f64>> {
    let vp = params.real("Vp")?;
    Ok(if vp != 0.0 { Some(params.real("Vs")? / vp) } else { None })
}

fn polarized(prefix: &str, qs: std::ops::RangeInclusive<i32>, pol: &[C64]) -> Channel {
    qs.zip(pol).map(|(q, &f)| (format!("{prefix}_m{q}"), f)).collect()
}

fn per_q(prefix: &str, comps: Vec<OperatorSum>, k: i32) -> Named {
    (-k..=k).zip(comps).map(|(q, op)| (format!("{prefix}_m{q}"), op)).collect()
}

fn dipole_plan(from: &str, to: &str, prefix: &str, pol: Option<&[C64]>) -> Result<TransitionPlan> {
    let channels = match pol {
        None => (-1..=1).map(|q| vec![(format!("{prefix}_m{q}"), C64::new(1.0, 0.0))]).collect(),
        Some(p) if p.len() == 3 => vec![polarized(prefix, -1..=1, p)],
        Some(p) => return Err(Error::Transition(format!("dipole polarization needs 3 coefficients, got {}", p.len()))),
    };
    Ok(TransitionPlan { from: from.into(), to: to.into(), channels })
}

fn block(prefix: &str, rows: &[(&str, f64)]) -> Vec<ParamSpec> {
    rows.iter()
        .map(|&(name, v)| {
            let full = format!("{prefix}{name}");
            if name.starts_with("Sop_") {
                ParamSpec::complex(full, v, "exchange-field component")
            } else {
                ParamSpec::real(full, v, "")
            }
        })
        .collect()
}

fn calc_block(hybridized: bool, extra_cf: bool) -> Vec<ParamSpec> {
    let mut v = vec![
        ParamSpec::new("case", ParamValue::Text("./".into()), "case directory written by expand"),
        ParamSpec::real("reduc_1", 0.8, "Slater integral reduction, valence shell"),
        ParamSpec::real("reduc_0_1", 0.8, "Slater integral reduction, core-valence"),
        ParamSpec::real("all1", 0.1, "Lorentzian half-width below El2l3"),
        ParamSpec::real("El2l3", 700.0, "broadening crossover energy"),
        ParamSpec::real("all2", 0.1, "Lorentzian half-width above El2l3"),
        ParamSpec::real("shift", 0.0, "energy shift of the spectrum"),
        ParamSpec::int("npunti", 500, "number of spectrum points"),
        ParamSpec::real("dxleft", -0.1, "left margin of the spectrum"),
        ParamSpec::real("dxright", 0.1, "right margin of the spectrum"),
        ParamSpec::real("temp", 0.009, "Boltzmann temperature (eV)"),
        ParamSpec::real("erange", 0.1, "ground-state energy window"),
        ParamSpec::real("tolefact", 1e-6, "minimum Boltzmann weight"),
        ParamSpec::int("shift_invert", 0, "not used"),
        ParamSpec::int("nsearchedeigen", 10, "ground eigenvectors searched"),
        ParamSpec::int("NstepsTridiag", 250, "Lanczos steps for each spectrum"),
    ];
    if hybridized {
        v.push(ParamSpec::real("Vs", 2.0, "Slater-Koster sigma hopping"));
        v.push(ParamSpec::real("Vp", 1.0, "Slater-Koster pi hopping"));
    }
    v.push(ParamSpec::real("VC0", 0.2, "crystal field, sigma"));
    v.push(ParamSpec::real("VC1", 0.0, "crystal field, pi"));
    if extra_cf {
        v.push(ParamSpec::real("VC2", 0.0, "crystal field, delta"));
    }
    v.push(ParamSpec::real("DREF", 1.0, "reference bond length"));
    v.push(ParamSpec::real("ALPHAVC", -3.0, "crystal-field distance exponent"));
    if hybridized {
        v.push(ParamSpec::real("ALPHAVSP", -3.0, "hopping distance exponent"));
    }
    let oct = vec![[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0], [0.0, 0.0, 1.0]];
    v.push(ParamSpec::new("BONDS", ParamValue::Bonds(oct), "bond vectors"));
    if hybridized {
        v.push(ParamSpec::real("factorhopexci", 1.0, "hopping multiplier in excited spaces"));
        v.push(ParamSpec::new("facts_hop", ParamValue::OptList(None), "per-bond hopping factors"));
    }
    v
}

fn all_names(named: &Named) -> Vec<String> {
    named.iter().map(|(n, _)| n.clone()).collect()
}

/// Components shared by every space of a hybridized d-shell class.
struct DShellParts {
    layout: ShellLayout,
    atomic: Named,
    field: Named,
    hopping: (OperatorSum, OperatorSum),
    reduction: LigandReduction,
    geom: BondGeometry,
}

fn d_shell_parts(recipe: &Recipe, params: &ParamSet) -> Result<DShellParts> {
    let geom = bond_geometry(params)?;
    let reduction = reduction(params, &geom)?;
    let layout = recipe.layout(reduction.count());
    let atomic = recipe.atomic_components(&layout)?;
    let cf = crystal_field_components(&layout, recipe.valence, &geom, params.real("ALPHAVC")?)?;
    let hopping = slater_koster_hopping(&layout, recipe.valence, recipe.ligand.expect("hybridized"), &reduction)?;
    let mut field: Named = ["VC0", "VC1"].iter().map(|s| s.to_string()).zip(cf).collect();
    field.push(("Vs".into(), hopping.0.clone()));
    field.push(("Vp".into(), hopping.1.clone()));
    Ok(DShellParts { layout, atomic, field, hopping, reduction, geom })
}

fn space_components(parts_atomic: &Named, parts_field: &Named, counters: Option<Named>) -> Named {
    let mut out: Named = parts_atomic.iter().chain(parts_field).cloned().collect();
    if let Some(c) = counters {
        out.extend(c);
    }
    out
}

fn apply_spin(model: &mut CaseModel, req: &ExpandRequest) -> Result<()> {
    if req.spinfixed {
        let sz = model.spaces[0].constraint.max_twice_sz(&model.layout)?;
        for s in &mut model.spaces {
            s.constraint.twice_sz = Some(sz);
        }
    }
    Ok(())
}

fn space_names(model_components: &Named) -> Vec<String> {
    all_names(model_components).into_iter().filter(|n| !n.starts_with("count_")).collect()
}

fn prefix_of(space: &str) -> Result<(&'static str, bool)> {
    match space {
        "base" => Ok(("base_", false)),
        "exci" => Ok(("exci_", true)),
        "final" => Ok(("fina_", true)),
        other => Err(Error::Case(format!("unknown space '{other}'"))),
    }
}

// ---- 2p3d -----------------------------------------------------------------

/// L-edge absorption: 2p → 3d with ligand hybridization.
pub struct TwoPThreeD;

const TWO_P_THREE_D_BASE: [(&str, f64); 13] = [
    ("couche1_F0", 5.0),
    ("couche1_F2", 12.4156828106),
    ("couche1_F4", 7.81967819912),
    ("couche0_1_F0", 5.5),
    ("couche0_1_F2", 6.86721502072),
    ("couche0_1_G1", 5.02109490016),
    ("couche0_1_G3", 2.85321756768),
    ("SO_0", 6.568603656),
    ("SO_1", 0.05238772),
    ("Sop_Zero", 1e-05),
    ("Sop_Minus", 0.0),
    ("Sop_Plus", 0.0),
    ("counterDL", -4.0),
];

const TWO_P_THREE_D_EXCI: [(&str, f64); 13] = [
    ("couche1_F0", 5.0),
    ("couche1_F2", 13.1769757147),
    ("couche1_F4", 8.299507532),
    ("couche0_1_F0", 5.5),
    ("couche0_1_F2", 7.6574518),
    ("couche0_1_G1", 5.77390099368),
    ("couche0_1_G3", 3.28715525784),
    ("SO_0", 6.845918392),
    ("SO_1", 0.066403136),
    ("Sop_Zero", 1e-05),
    ("Sop_Minus", 0.0),
    ("Sop_Plus", 0.0),
    ("counterDL", -4.0),
];

fn two_p_three_d_recipe() -> Recipe {
    Recipe {
        shells: vec![("2p", Some(1)), ("3d", Some(2)), ("L", None)],
        valence: 1,
        ligand: Some(2),
        intra: vec![(1, "couche1")],
        inter: vec![(0, 1, "couche0_1")],
        spin_orbit: vec![(0, "SO_0"), (1, "SO_1")],
    }
}

const D_GEOMETRY_KEYS: [&str; 5] = ["BONDS", "DREF", "ALPHAVC", "ALPHAVSP", "facts_hop"];

impl ExperimentClass for TwoPThreeD {
    fn name(&self) -> &'static str {
        "2p3d"
    }

    fn summary(&self) -> &'static str {
        "2p -> 3d absorption with ligand hybridization (L edges)"
    }

    fn schema(&self) -> Vec<ParamSpec> {
        let mut s = block("base_", &TWO_P_THREE_D_BASE);
        s.extend(block("exci_", &TWO_P_THREE_D_EXCI));
        s.extend(calc_block(true, false));
        s
    }

    fn geometry(&self, params: &ParamSet) -> Result<GeometryRecord> {
        Ok(GeometryRecord { fingerprint: fingerprint(params, &D_GEOMETRY_KEYS)?, vs_vp: vs_vp(params)? })
    }

    fn model(&self, req: &ExpandRequest, params: &ParamSet) -> Result<CaseModel> {
        let recipe = two_p_three_d_recipe();
        let parts = d_shell_parts(&recipe, params)?;
        let layout = parts.layout.clone();
        let base = recipe.constraint(req.nmin, req, vec![(0, 6)]);
        let exci = recipe.constraint(req.nmin + 1, req, vec![(0, 5)]);
        let dip = per_q("dip", multipole_components(&layout, 0, 1, 1)?, 1);
        let mut model = CaseModel {
            wanderer: recipe.wanderer(&layout, Some(&parts.hopping)),
            spaces: vec![
                SpaceModel {
                    key: "base".into(),
                    constraint: base,
                    components: space_components(&parts.atomic, &parts.field, Some(recipe.counters(&layout))),
                },
                SpaceModel { key: "exci".into(), constraint: exci, components: space_components(&parts.atomic, &parts.field, None) },
            ],
            transitions: vec![TransitionModel { from: "base".into(), to: "exci".into(), components: dip }],
            geometry: self.geometry(params)?,
            layout,
        };
        apply_spin(&mut model, req)?;
        Ok(model)
    }

    fn hamiltonian(&self, space: &str, params: &ParamSet) -> Result<Channel> {
        let (prefix, excited) = prefix_of(space)?;
        if space == "final" {
            return Err(Error::Case("2p3d has no final space".into()));
        }
        let recipe = two_p_three_d_recipe();
        let layout = recipe.layout(1);
        let mut names = space_names(&recipe.atomic_components(&layout)?);
        names.extend(["VC0", "VC1", "Vs", "Vp"].map(String::from));
        hamiltonian_coefficients(&names, prefix, params, excited)
    }

    fn absorption(&self, _params: &ParamSet, pol: Option<&[C64]>) -> Result<TransitionPlan> {
        dipole_plan("base", "exci", "dip", pol)
    }
}

// ---- rixs -----------------------------------------------------------------

/// 1s → 3d (quadrupole or effective dipole) absorption and 1s-3p RIXS.
pub struct Rixs;

fn rixs_recipe() -> Recipe {
    Recipe {
        shells: vec![("3p", Some(1)), ("3d", Some(2)), ("1s", Some(0)), ("L", None)],
        valence: 1,
        ligand: Some(3),
        intra: vec![(1, "couche1")],
        inter: vec![(0, 1, "couche0_1"), (1, 2, "couche1_2")],
        spin_orbit: vec![(0, "SO_0"), (1, "SO_1")],
    }
}

fn rixs_block(prefix: &str, core_3p: [f64; 4], core_1s: [f64; 2], so_3p: f64) -> Vec<ParamSpec> {
    let d = if prefix == "base_" { &TWO_P_THREE_D_BASE } else { &TWO_P_THREE_D_EXCI };
    let mut rows: Vec<(&str, f64)> = d[..3].to_vec();
    rows.extend([
        ("couche0_1_F0", core_3p[0]),
        ("couche0_1_F2", core_3p[1]),
        ("couche0_1_G1", core_3p[2]),
        ("couche0_1_G3", core_3p[3]),
        ("couche1_2_F0", core_1s[0]),
        ("couche1_2_G2", core_1s[1]),
        ("SO_0", so_3p),
    ]);
    rows.extend(d[8..].iter().copied());
    block(prefix, &rows)
}

const RIXS_GEOMETRY_KEYS: [&str; 6] = ["BONDS", "DREF", "ALPHAVC", "ALPHAVSP", "facts_hop", "ALPHADIPO"];

impl ExperimentClass for Rixs {
    fn name(&self) -> &'static str {
        "rixs"
    }

    fn summary(&self) -> &'static str {
        "1s -> 3d quadrupole / effective-dipole absorption and 1s-3p RIXS"
    }

    fn schema(&self) -> Vec<ParamSpec> {
        // illustrative core-level values; the final state carries the 3p hole
        let mut s = rixs_block("base_", [5.5, 9.0, 11.0, 6.7], [5.5, 0.06], 0.8);
        s.extend(rixs_block("exci_", [5.5, 9.0, 11.0, 6.7], [5.5, 0.06], 0.8));
        s.extend(rixs_block("fina_", [5.5, 9.0, 11.0, 6.7], [5.5, 0.06], 0.8));
        s.extend(calc_block(true, false));
        s.push(ParamSpec::real("Dips", 1.0, "virtual 4p - ligand sigma hybridization"));
        s.push(ParamSpec::real("Dipp", 0.5, "virtual 4p - ligand pi hybridization"));
        s.push(ParamSpec::real("ALPHADIPO", -3.0, "4p hybridization distance exponent"));
        s
    }

    fn geometry(&self, params: &ParamSet) -> Result<GeometryRecord> {
        Ok(GeometryRecord { fingerprint: fingerprint(params, &RIXS_GEOMETRY_KEYS)?, vs_vp: vs_vp(params)? })
    }

    fn model(&self, req: &ExpandRequest, params: &ParamSet) -> Result<CaseModel> {
        let recipe = rixs_recipe();
        let parts = d_shell_parts(&recipe, params)?;
        let layout = parts.layout.clone();
        let base = recipe.constraint(req.nmin, req, vec![(0, 6), (2, 2)]);
        let exci = recipe.constraint(req.nmin + 1, req, vec![(0, 6), (2, 1)]);
        let fina = recipe.constraint(req.nmin + 1, req, vec![(0, 5), (2, 2)]);
        let mut base_exci = per_q("quad", multipole_components(&layout, 2, 1, 2)?, 2);
        let (sig, pi) =
            effective_dipole_components(&layout, 2, 3, &parts.geom, params.real("ALPHADIPO")?, &parts.reduction)?;
        base_exci.extend(per_q("edip_sigma", sig, 1));
        base_exci.extend(per_q("edip_pi", pi, 1));
        let exci_final = per_q("dip", multipole_components(&layout, 0, 2, 1)?, 1);
        let comps = |counters| space_components(&parts.atomic, &parts.field, counters);
        let mut model = CaseModel {
            wanderer: recipe.wanderer(&layout, Some(&parts.hopping)),
            spaces: vec![
                SpaceModel { key: "base".into(), constraint: base, components: comps(Some(recipe.counters(&layout))) },
                SpaceModel { key: "exci".into(), constraint: exci, components: comps(None) },
                SpaceModel { key: "final".into(), constraint: fina, components: comps(None) },
            ],
            transitions: vec![
                TransitionModel { from: "base".into(), to: "exci".into(), components: base_exci },
                TransitionModel { from: "exci".into(), to: "final".into(), components: exci_final },
            ],
            geometry: self.geometry(params)?,
            layout,
        };
        apply_spin(&mut model, req)?;
        Ok(model)
    }

    fn hamiltonian(&self, space: &str, params: &ParamSet) -> Result<Channel> {
        let (prefix, excited) = prefix_of(space)?;
        let recipe = rixs_recipe();
        let layout = recipe.layout(1);
        let mut names = space_names(&recipe.atomic_components(&layout)?);
        names.extend(["VC0", "VC1", "Vs", "Vp"].map(String::from));
        hamiltonian_coefficients(&names, prefix, params, excited)
    }

    /// No polarization: effective dipole, one channel per q. Five
    /// coefficients: quadrupole. Three: one effective-dipole channel.
    fn absorption(&self, params: &ParamSet, pol: Option<&[C64]>) -> Result<TransitionPlan> {
        let channels = match pol {
            None => (-1..=1).map(|q| effective_dipole_channel(params, q, C64::new(1.0, 0.0))).collect::<Result<_>>()?,
            Some(p) => vec![rixs_in_channel(params, p)?],
        };
        Ok(TransitionPlan { from: "base".into(), to: "exci".into(), channels })
    }

    fn rixs(&self, params: &ParamSet, polin: &[C64], polout: &[C64]) -> Result<RixsPlan> {
        if polout.len() != 3 {
            return Err(Error::Transition(format!("polarisationOut needs 3 dipole coefficients, got {}", polout.len())));
        }
        Ok(RixsPlan {
            d_in: TransitionPlan { from: "base".into(), to: "exci".into(), channels: vec![rixs_in_channel(params, polin)?] },
            d_out: TransitionPlan { from: "exci".into(), to: "final".into(), channels: vec![polarized("dip", -1..=1, polout)] },
        })
    }
}

fn effective_dipole_channel(params: &ParamSet, q: i32, f: C64) -> Result<Channel> {
    Ok(vec![
        (format!("edip_sigma_m{q}"), f * params.real("Dips")?),
        (format!("edip_pi_m{q}"), f * params.real("Dipp")?),
    ])
}

fn rixs_in_channel(params: &ParamSet, pol: &[C64]) -> Result<Channel> {
    match pol.len() {
        5 => Ok(polarized("quad", -2..=2, pol)),
        3 => {
            let mut ch = Channel::new();
            for (q, &f) in (-1..=1).zip(pol) {
                ch.extend(effective_dipole_channel(params, q, f)?);
            }
            Ok(ch)
        }
        n => Err(Error::Transition(format!("polarization needs 5 (quadrupole) or 3 (dipole) coefficients, got {n}"))),
    }
}

// ---- df -------------------------------------------------------------------

/// 3d → 4f absorption with an f-shell crystal field and no hybridization.
pub struct DF;

fn df_recipe() -> Recipe {
    Recipe {
        shells: vec![("3d", Some(2)), ("4f", Some(3))],
        valence: 1,
        ligand: None,
        intra: vec![(1, "couche1")],
        inter: vec![(0, 1, "couche0_1")],
        spin_orbit: vec![(0, "SO_0"), (1, "SO_1")],
    }
}

const DF_ATOMIC: [(&str, f64); 16] = [
    ("couche1_F0", 7.0),
    ("couche1_F2", 12.0),
    ("couche1_F4", 7.5),
    ("couche1_F6", 5.4),
    ("couche0_1_F0", 7.5),
    ("couche0_1_F2", 8.0),
    ("couche0_1_F4", 3.8),
    ("couche0_1_G1", 5.8),
    ("couche0_1_G3", 3.4),
    ("couche0_1_G5", 2.4),
    ("SO_0", 13.5),
    ("SO_1", 0.27),
    ("Sop_Zero", 1e-05),
    ("Sop_Minus", 0.0),
    ("Sop_Plus", 0.0),
    ("counterDL", 0.0),
];

const DF_GEOMETRY_KEYS: [&str; 3] = ["BONDS", "DREF", "ALPHAVC"];

impl ExperimentClass for DF {
    fn name(&self) -> &'static str {
        "df"
    }

    fn summary(&self) -> &'static str {
        "3d -> 4f absorption with f-shell crystal field (M edges of rare earths)"
    }

    fn schema(&self) -> Vec<ParamSpec> {
        let atomic = &DF_ATOMIC[..15];
        let mut s = block("base_", atomic);
        s.extend(block("exci_", atomic));
        s.extend(calc_block(false, true));
        s
    }

    fn geometry(&self, params: &ParamSet) -> Result<GeometryRecord> {
        Ok(GeometryRecord { fingerprint: fingerprint(params, &DF_GEOMETRY_KEYS)?, vs_vp: None })
    }

    fn model(&self, req: &ExpandRequest, params: &ParamSet) -> Result<CaseModel> {
        if req.nhopped > 0 {
            return Err(Error::InvalidConstraint("the df class has no ligand shell; nhopped must be 0".into()));
        }
        let recipe = df_recipe();
        let layout = recipe.layout(0);
        let geom = bond_geometry(params)?;
        let atomic = recipe.atomic_components(&layout)?;
        let cf = crystal_field_components(&layout, 1, &geom, params.real("ALPHAVC")?)?;
        let field: Named = ["VC0", "VC1", "VC2"].iter().map(|s| s.to_string()).zip(cf).collect();
        let base = recipe.constraint(req.nmin, req, vec![(0, 10)]);
        let exci = recipe.constraint(req.nmin + 1, req, vec![(0, 9)]);
        let dip = per_q("dip", multipole_components(&layout, 0, 1, 1)?, 1);
        let mut model = CaseModel {
            wanderer: recipe.wanderer(&layout, None),
            spaces: vec![
                SpaceModel {
                    key: "base".into(),
                    constraint: base,
                    components: space_components(&atomic, &field, Some(recipe.counters(&layout))),
                },
                SpaceModel { key: "exci".into(), constraint: exci, components: space_components(&atomic, &field, None) },
            ],
            transitions: vec![TransitionModel { from: "base".into(), to: "exci".into(), components: dip }],
            geometry: self.geometry(params)?,
            layout,
        };
        apply_spin(&mut model, req)?;
        Ok(model)
    }

    fn hamiltonian(&self, space: &str, params: &ParamSet) -> Result<Channel> {
        let (prefix, excited) = prefix_of(space)?;
        if space == "final" {
            return Err(Error::Case("df has no final space".into()));
        }
        let recipe = df_recipe();
        let layout = recipe.layout(0);
        let mut names = space_names(&recipe.atomic_components(&layout)?);
        names.extend(["VC0", "VC1", "VC2"].map(String::from));
        hamiltonian_coefficients(&names, prefix, params, excited)
    }

    fn absorption(&self, _params: &ParamSet, pol: Option<&[C64]>) -> Result<TransitionPlan> {
        dipole_plan("base", "exci", "dip", pol)
    }
}

/// Polarization vectors named in the help text, as [f(-1), f(0), f(+1)].
pub fn named_polarization(name: &str) -> Option<Vec<C64>> {
    let h = FRAC_1_SQRT_2;
    match name {
        "x" | "X" => Some(vec![C64::new(-h, 0.0), C64::new(0.0, 0.0), C64::new(h, 0.0)]),
        "y" | "Y" => Some(vec![C64::new(0.0, h), C64::new(0.0, 0.0), C64::new(0.0, h)]),
        "z" | "Z" => Some(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lists_builtin_classes() {
        let r = ClassRegistry::with_builtin();
        assert_eq!(r.names().collect::<Vec<_>>(), vec!["2p3d", "df", "rixs"]);
        assert!(matches!(r.get("xyz"), Err(Error::UnknownClass(_))));
    }

    #[test]
    fn reference_defaults_and_count() {
        let p = TwoPThreeD.defaults();
        assert_eq!(p.names().count(), 52);
        assert_eq!(p.real("base_SO_1").unwrap(), 0.05238772);
        assert_eq!(p.real("base_counterDL").unwrap(), -4.0);
        assert_eq!(p.real("temp").unwrap(), 0.009);
        assert_eq!(p.bonds("BONDS").unwrap().len(), 6);
        assert_eq!(p.opt_list("facts_hop").unwrap(), None);
    }

    #[test]
    fn coefficients_apply_reduction_and_factor() {
        let mut p = TwoPThreeD.defaults();
        p.set("factorhopexci", "0.5").unwrap();
        let base: BTreeMap<String, C64> = TwoPThreeD.hamiltonian("base", &p).unwrap().into_iter().collect();
        let exci: BTreeMap<String, C64> = TwoPThreeD.hamiltonian("exci", &p).unwrap().into_iter().collect();
        assert_eq!(base["couche1_F0"].re, 5.0);
        assert!((base["couche1_F2"].re - 12.4156828106 * 0.8).abs() < 1e-15);
        assert!((base["couche0_1_G1"].re - 5.02109490016 * 0.8).abs() < 1e-15);
        assert_eq!(base["Vs"].re, 2.0);
        assert_eq!(exci["Vs"].re, 1.0);
        assert_eq!(base["Sop_Zero"], C64::new(1e-5, 0.0));
        assert!(!base.contains_key("count_S2"));
    }

    #[test]
    fn polarization_shapes() {
        let p = Rixs.defaults();
        assert_eq!(Rixs.absorption(&p, None).unwrap().channels.len(), 3);
        let one = [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let plan = Rixs.absorption(&p, Some(&one)).unwrap();
        assert_eq!(plan.channels.len(), 1);
        assert_eq!(plan.channels[0][0].0, "quad_m-2");
        assert!(Rixs.rixs(&p, &one, &one[..2]).is_err());
        assert!(TwoPThreeD.absorption(&TwoPThreeD.defaults(), Some(&one)).is_err());
        assert!(TwoPThreeD.rixs(&TwoPThreeD.defaults(), &one, &one[..3]).is_err());
    }
}
