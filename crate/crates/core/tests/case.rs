use hxx_core::case::{expand_case, run_counters, run_rixs, run_spectrum, CaseData, Manifest, MANIFEST};
use hxx_core::classes::{ClassRegistry, ExpandRequest, ExperimentClass};
use hxx_core::params::ParamSet;
use hxx_core::space::{enumerate_configurations, ConfigConstraint};
use hxx_core::spectra::RixsConfig;
use hxx_core::{Error, C64};

fn registry() -> ClassRegistry {
    ClassRegistry::with_builtin()
}

fn req(nmin: usize, nhopped: usize, spinfixed: bool) -> ExpandRequest {
    ExpandRequest { nmin, nhopped, spinfixed }
}

fn set(p: &mut ParamSet, pairs: &[(&str, &str)]) {
    for (k, v) in pairs {
        p.set(k, v).unwrap();
    }
}

#[test]
fn expanded_dims_match_enumeration() {
    let reg = registry();
    let c = reg.get("2p3d").unwrap();
    let p = c.defaults();
    let dir = tempfile::tempdir().unwrap();
    let m = expand_case(c, &req(8, 2, false), &p, dir.path(), false).unwrap();
    let model = c.model(&req(8, 2, false), &p).unwrap();
    for (sm, (key, dim)) in model.spaces.iter().zip(m.spaces()) {
        assert_eq!(sm.key, key);
        let all = enumerate_configurations(&key, &model.layout, &sm.constraint).unwrap();
        assert_eq!(all.dim(), dim, "space {key}");
    }
}

#[test]
fn spinfixed_spaces_are_sz_sectors() {
    let reg = registry();
    let c = reg.get("2p3d").unwrap();
    let p = c.defaults();
    let dir = tempfile::tempdir().unwrap();
    let m = expand_case(c, &req(6, 1, true), &p, dir.path(), false).unwrap();
    assert_eq!(m.get("twice_sz"), Some("4"));
    let model = c.model(&req(6, 1, false), &p).unwrap();
    for (sm, (key, dim)) in model.spaces.iter().zip(m.spaces()) {
        let sector = ConfigConstraint { twice_sz: Some(4), ..sm.constraint.clone() };
        let all = enumerate_configurations(&key, &model.layout, &sector).unwrap();
        assert_eq!(all.dim(), dim, "space {key}");
        let full = enumerate_configurations(&key, &model.layout, &sm.constraint).unwrap();
        assert!(dim < full.dim());
    }
    // a spin sector still yields a spectrum
    let case = CaseData::load(dir.path()).unwrap();
    let s = run_spectrum(c, &p, &case, None).unwrap();
    assert!(s.isotropic().iter().all(|v| v.is_finite() && *v >= -1e-10));
}

#[test]
fn case_round_trip_is_bit_identical() {
    let reg = registry();
    let c = reg.get("rixs").unwrap();
    let p = c.defaults();
    let dir = tempfile::tempdir().unwrap();
    let written = expand_case(c, &req(8, 1, false), &p, dir.path(), false).unwrap();
    let read = Manifest::read(&dir.path().join(MANIFEST)).unwrap();
    assert_eq!(written, read);
    assert_eq!(read.request().unwrap(), req(8, 1, false));
    let a = run_spectrum(c, &p, &CaseData::load(dir.path()).unwrap(), None).unwrap();
    let b = run_spectrum(c, &p, &CaseData::load(dir.path()).unwrap(), None).unwrap();
    assert_eq!(a, b);
    // re-expanding with the same settings reproduces every file
    let before: Vec<(String, Vec<u8>)> = files(dir.path());
    expand_case(c, &req(8, 1, false), &p, dir.path(), false).unwrap();
    assert_eq!(before, files(dir.path()));
}

fn files(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn different_case_needs_force() {
    let reg = registry();
    let c = reg.get("rixs").unwrap();
    let p = c.defaults();
    let dir = tempfile::tempdir().unwrap();
    expand_case(c, &req(8, 1, false), &p, dir.path(), false).unwrap();
    assert!(matches!(expand_case(c, &req(8, 0, false), &p, dir.path(), false), Err(Error::Case(_))));
    expand_case(c, &req(8, 0, false), &p, dir.path(), true).unwrap();
}

#[test]
fn geometry_change_is_detected() {
    let reg = registry();
    let c = reg.get("rixs").unwrap();
    let mut p = c.defaults();
    let dir = tempfile::tempdir().unwrap();
    expand_case(c, &req(8, 1, false), &p, dir.path(), false).unwrap();
    let case = CaseData::load(dir.path()).unwrap();
    // hopping ratio change only warns
    set(&mut p, &[("Vs", "3.0")]);
    run_spectrum(c, &p, &case, None).unwrap();
    set(&mut p, &[("DREF", "1.1")]);
    assert!(matches!(run_spectrum(c, &p, &case, None), Err(Error::Case(_))));
    // parameters of another class
    let other = reg.get("2p3d").unwrap();
    assert!(matches!(run_spectrum(other, &other.defaults(), &case, None), Err(Error::Case(_))));
}

#[test]
fn high_spin_d5_counters() {
    let reg = registry();
    let c = reg.get("2p3d").unwrap();
    let mut p = c.defaults();
    set(&mut p, &[("base_SO_1", "0"), ("VC0", "0"), ("nsearchedeigen", "6"), ("erange", "0.01")]);
    let dir = tempfile::tempdir().unwrap();
    expand_case(c, &req(5, 0, false), &p, dir.path(), false).unwrap();
    let case = CaseData::load(dir.path()).unwrap();
    let k = run_counters(c, &p, &case).unwrap();
    // the Zeeman-split sextet: all six Sz levels lie within erange
    assert_eq!(k.energies.len(), 6);
    for i in 0..6 {
        assert!((k.s2[i] - 8.75).abs() < 1e-8, "S2 {}", k.s2[i]);
        assert!(k.l2[i].abs() < 1e-8);
        assert!((k.n_ligand[i] - 10.0).abs() < 1e-12);
    }
    let mut sz = k.sz.clone();
    sz.sort_by(f64::total_cmp);
    for (got, want) in sz.iter().zip([-2.5, -1.5, -0.5, 0.5, 1.5, 2.5]) {
        assert!((got - want).abs() < 1e-8);
    }
}

#[test]
fn d2_ground_level_spin_orbit_projection() {
    // 3F2: 2S.L = J(J+1) - L(L+1) - S(S+1) = 6 - 12 - 2
    let reg = registry();
    let c = reg.get("2p3d").unwrap();
    let mut p = c.defaults();
    set(&mut p, &[("base_SO_1", "1e-4"), ("base_Sop_Zero", "1e-8"), ("VC0", "0"), ("nsearchedeigen", "8"), ("erange", "2e-5"), ("temp", "1.0")]);
    let dir = tempfile::tempdir().unwrap();
    expand_case(c, &req(2, 0, false), &p, dir.path(), false).unwrap();
    let k = run_counters(c, &p, &CaseData::load(dir.path()).unwrap()).unwrap();
    assert_eq!(k.energies.len(), 5);
    for i in 0..5 {
        assert!((k.two_sl[i] + 8.0).abs() < 1e-3, "2SL {}", k.two_sl[i]);
        assert!((k.s2[i] - 2.0).abs() < 1e-3);
        assert!((k.l2[i] - 12.0).abs() < 1e-3);
    }
}

#[test]
fn spectrum_is_quadratic_in_polarization() {
    let reg = registry();
    let c = reg.get("df").unwrap();
    let mut p = c.defaults();
    set(&mut p, &[("npunti", "50")]);
    let dir = tempfile::tempdir().unwrap();
    expand_case(c, &req(13, 0, false), &p, dir.path(), false).unwrap();
    let case = CaseData::load(dir.path()).unwrap();
    let pol = [C64::new(0.3, 0.1), C64::new(-0.2, 0.0), C64::new(0.5, -0.4)];
    let twice: Vec<C64> = pol.iter().map(|z| z * 2.0).collect();
    let a = run_spectrum(c, &p, &case, Some(&pol)).unwrap();
    let b = run_spectrum(c, &p, &case, Some(&twice)).unwrap();
    assert_eq!(a.energies, b.energies);
    for (x, y) in a.channels[0].iter().zip(&b.channels[0]) {
        assert!((x * 4.0 - y).norm() <= 1e-10 * y.norm().max(1e-300));
    }
}

#[test]
fn rixs_runs_and_rejects_bad_polarization() {
    let reg = registry();
    let c: &dyn ExperimentClass = reg.get("rixs").unwrap();
    let mut p = c.defaults();
    set(&mut p, &[("NstepsTridiag", "60")]);
    let dir = tempfile::tempdir().unwrap();
    expand_case(c, &req(8, 1, false), &p, dir.path(), false).unwrap();
    let case = CaseData::load(dir.path()).unwrap();
    let cfg = RixsConfig { ein: 3.0, eout1: -10.0, eout2: 10.0, dout: 0.5, gammain: 0.2, gammaout: [0.5, 0.0, 1.0] };
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let quad = [one, z, z, z, one];
    let s = run_rixs(c, &p, &case, &cfg, &quad, &[z, one, z]).unwrap();
    assert_eq!(s.energies.len(), 41);
    assert!(s.channels[0].iter().all(|v| v.im >= 0.0));
    assert!(run_rixs(c, &p, &case, &cfg, &quad, &[one, z]).is_err());
}
