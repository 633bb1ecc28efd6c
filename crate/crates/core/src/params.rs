//! Named parameter sets: per-class schemas with defaults, `name = value`
//! text files and typed accessors.

use std::fmt::{self, Write as _};
use std::path::Path;

use nalgebra::Vector3;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum ParamValue {
    Real(f64),
    Complex(C64),
    Int(i64),
    Text(String),
    Bonds(Vec<[f64; 3]>),
    OptList(Option<Vec<f64>>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Real,
    Complex,
    Int,
    Text,
    Bonds,
    OptList,
}

impl ParamValue {
    pub fn kind(&self) -> ParamKind {
        match self {
            ParamValue::Real(_) => ParamKind::Real,
            ParamValue::Complex(_) => ParamKind::Complex,
            ParamValue::Int(_) => ParamKind::Int,
            ParamValue::Text(_) => ParamKind::Text,
            ParamValue::Bonds(_) => ParamKind::Bonds,
            ParamValue::OptList(_) => ParamKind::OptList,
        }
    }

    pub fn parse(kind: ParamKind, text: &str) -> std::result::Result<ParamValue, String> {
        let t = text.trim();
        match kind {
            ParamKind::Real => parse_f64(t).map(ParamValue::Real),
            ParamKind::Complex => parse_complex(t).map(ParamValue::Complex),
            ParamKind::Int => {
                let v = parse_f64(t)?;
                if v.fract() != 0.0 || v.abs() > 1e15 {
                    return Err(format!("expected an integer, got '{t}'"));
                }
                Ok(ParamValue::Int(v as i64))
            }
            ParamKind::Text => Ok(ParamValue::Text(t.trim_matches(|c| c == '"' || c == '\'').to_string())),
            ParamKind::Bonds => {
                let nums = parse_list(t)?;
                if nums.is_empty() || nums.len() % 3 != 0 {
                    return Err(format!("BONDS needs a list of 3-vectors, got {} numbers", nums.len()));
                }
                Ok(ParamValue::Bonds(nums.chunks(3).map(|c| [c[0], c[1], c[2]]).collect()))
            }
            ParamKind::OptList => {
                if t.eq_ignore_ascii_case("none") || t.is_empty() {
                    Ok(ParamValue::OptList(None))
                } else {
                    Ok(ParamValue::OptList(Some(parse_list(t)?)))
                }
            }
        }
    }
}

fn parse_f64(t: &str) -> std::result::Result<f64, String> {
    let v: f64 = t.parse().map_err(|_| format!("expected a number, got '{t}'"))?;
    if !v.is_finite() {
        return Err(format!("value '{t}' is not finite"));
    }
    Ok(v)
}

/// `x`, `(re, im)` or `re+imj` forms.
fn parse_complex(t: &str) -> std::result::Result<C64, String> {
    if let Some(inner) = t.strip_prefix('(').and_then(|s| s.strip_suffix(')')) {
        if let Some((a, b)) = inner.split_once(',') {
            return Ok(C64::new(parse_f64(a.trim())?, parse_f64(b.trim())?));
        }
        return parse_complex(inner.trim());
    }
    if let Ok(v) = parse_f64(t) {
        return Ok(C64::new(v, 0.0));
    }
    if let Some(body) = t.strip_suffix('j').or_else(|| t.strip_suffix('i')) {
        // split at the last sign that is not an exponent sign
        let bytes = body.as_bytes();
        for k in (1..bytes.len()).rev() {
            if (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
                let re = parse_f64(&body[..k])?;
                let im_text = &body[k..];
                let im = if im_text == "+" || im_text == "-" { parse_f64(&format!("{im_text}1"))? } else { parse_f64(im_text)? };
                return Ok(C64::new(re, im));
            }
        }
        return Ok(C64::new(0.0, parse_f64(if body.is_empty() { "1" } else { body })?));
    }
    Err(format!("expected a complex number, got '{t}'"))
}

fn parse_list(t: &str) -> std::result::Result<Vec<f64>, String> {
    let cleaned: String = t.chars().map(|c| if c == '[' || c == ']' || c == ',' { ' ' } else { c }).collect();
    cleaned.split_whitespace().map(parse_f64).collect()
}

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Real(v) => write!(f, "{}", fmt_f64(*v)),
            ParamValue::Complex(z) if z.im == 0.0 => write!(f, "{}", fmt_f64(z.re)),
            ParamValue::Complex(z) => write!(f, "({}, {})", fmt_f64(z.re), fmt_f64(z.im)),
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Text(s) => write!(f, "{s}"),
            ParamValue::Bonds(b) => {
                let parts: Vec<String> =
                    b.iter().map(|v| format!("[{}, {}, {}]", fmt_f64(v[0]), fmt_f64(v[1]), fmt_f64(v[2]))).collect();
                write!(f, "[{}]", parts.join(", "))
            }
            ParamValue::OptList(None) => write!(f, "None"),
            ParamValue::OptList(Some(v)) => {
                let parts: Vec<String> = v.iter().map(|x| fmt_f64(*x)).collect();
                write!(f, "[{}]", parts.join(", "))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub default: ParamValue,
    pub help: &'static str,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, default: ParamValue, help: &'static str) -> Self {
        ParamSpec { name: name.into(), default, help }
    }

    pub fn real(name: impl Into<String>, v: f64, help: &'static str) -> Self {
        Self::new(name, ParamValue::Real(v), help)
    }

    pub fn complex(name: impl Into<String>, v: f64, help: &'static str) -> Self {
        Self::new(name, ParamValue::Complex(C64::new(v, 0.0)), help)
    }

    pub fn int(name: impl Into<String>, v: i64, help: &'static str) -> Self {
        Self::new(name, ParamValue::Int(v), help)
    }
}

const HEADER: &str = "#HXX-PARAMS";

/// Ordered parameter values for one experiment class.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    class: String,
    entries: Vec<(ParamSpec, ParamValue)>,
}

impl ParamSet {
    pub fn defaults(class: &str, schema: Vec<ParamSpec>) -> Self {
        let entries = schema.into_iter().map(|s| {
            let v = s.default.clone();
            (s, v)
        });
        ParamSet { class: class.to_string(), entries: entries.collect() }
    }

    pub fn class(&self) -> &str {
        &self.class
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(s, _)| s.name.as_str())
    }

    pub fn specs(&self) -> impl Iterator<Item = &ParamSpec> {
        self.entries.iter().map(|(s, _)| s)
    }

    pub fn value(&self, name: &str) -> Result<&ParamValue> {
        self.entries
            .iter()
            .find(|(s, _)| s.name == name)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn set_value(&mut self, name: &str, value: ParamValue) -> Result<()> {
        let entry = self
            .entries
            .iter_mut()
            .find(|(s, _)| s.name == name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))?;
        if entry.0.default.kind() != value.kind() {
            return Err(Error::InvalidParameter { name: name.into(), message: format!("expected {:?}", entry.0.default.kind()) });
        }
        entry.1 = value;
        Ok(())
    }

    /// Parses `text` according to the parameter's kind and stores it.
    pub fn set(&mut self, name: &str, text: &str) -> Result<()> {
        let kind = self.value(name)?.kind();
        let v = ParamValue::parse(kind, text).map_err(|message| Error::InvalidParameter { name: name.into(), message })?;
        self.set_value(name, v)
    }

    fn typed_err(&self, name: &str, what: &str) -> Error {
        Error::InvalidParameter { name: name.into(), message: format!("not a {what} parameter") }
    }

    pub fn real(&self, name: &str) -> Result<f64> {
        match self.value(name)? {
            ParamValue::Real(v) => Ok(*v),
            ParamValue::Int(v) => Ok(*v as f64),
            _ => Err(self.typed_err(name, "real")),
        }
    }

    pub fn complex(&self, name: &str) -> Result<C64> {
        match self.value(name)? {
            ParamValue::Complex(v) => Ok(*v),
            ParamValue::Real(v) => Ok(C64::new(*v, 0.0)),
            ParamValue::Int(v) => Ok(C64::new(*v as f64, 0.0)),
            _ => Err(self.typed_err(name, "complex")),
        }
    }

    pub fn int(&self, name: &str) -> Result<i64> {
        match self.value(name)? {
            ParamValue::Int(v) => Ok(*v),
            _ => Err(self.typed_err(name, "integer")),
        }
    }

    pub fn text(&self, name: &str) -> Result<&str> {
        match self.value(name)? {
            ParamValue::Text(v) => Ok(v),
            _ => Err(self.typed_err(name, "text")),
        }
    }

    pub fn bonds(&self, name: &str) -> Result<Vec<Vector3<f64>>> {
        match self.value(name)? {
            ParamValue::Bonds(b) => Ok(b.iter().map(|v| Vector3::new(v[0], v[1], v[2])).collect()),
            _ => Err(self.typed_err(name, "bond list")),
        }
    }

    pub fn opt_list(&self, name: &str) -> Result<Option<Vec<f64>>> {
        match self.value(name)? {
            ParamValue::OptList(v) => Ok(v.clone()),
            _ => Err(self.typed_err(name, "list")),
        }
    }

    /// Checks the cross-parameter invariants of the calculation block.
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, message: &str| Err(Error::InvalidParameter { name: name.into(), message: message.into() });
        if self.has("npunti") && self.int("npunti")? < 2 {
            return bad("npunti", "must be at least 2");
        }
        if self.has("temp") && !(self.real("temp")? > 0.0) {
            return bad("temp", "must be positive");
        }
        if self.has("tolefact") {
            let t = self.real("tolefact")?;
            if !(t > 0.0 && t < 1.0) {
                return bad("tolefact", "must lie in (0, 1)");
            }
        }
        if self.has("erange") && self.real("erange")? < 0.0 {
            return bad("erange", "must be non-negative");
        }
        for name in ["nsearchedeigen", "NstepsTridiag"] {
            if self.has(name) && self.int(name)? < 1 {
                return bad(name, "must be at least 1");
            }
        }
        for name in ["all1", "all2"] {
            if self.has(name) && !(self.real(name)? > 0.0) {
                return bad(name, "broadening must be positive");
            }
        }
        if self.has("DREF") && !(self.real("DREF")? > 0.0) {
            return bad("DREF", "must be positive");
        }
        if self.has("BONDS") {
            let bonds = self.bonds("BONDS")?;
            if bonds.iter().any(|b| !(b.norm() > 0.0)) {
                return bad("BONDS", "bond vectors must be nonzero");
            }
            if let Some(f) = self.opt_list("facts_hop").ok().flatten() {
                if f.len() != bonds.len() {
                    return bad("facts_hop", "needs one factor per bond");
                }
            }
        }
        Ok(())
    }

    pub fn has(&self, name: &str) -> bool {
        self.entries.iter().any(|(s, _)| s.name == name)
    }

    /// Numbered listing in schema order.
    pub fn show(&self) -> String {
        let width = self.entries.iter().map(|(s, _)| s.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (i, (s, v)) in self.entries.iter().enumerate() {
            let _ = writeln!(out, "{:>3}) {:<width$} : {}", i + 1, s.name, v);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER} class={}\n", self.class);
        for (s, v) in &self.entries {
            let _ = writeln!(out, "{} = {}", s.name, v);
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Class named in a parameter file header, if any.
    pub fn file_class(path: &Path) -> Result<Option<String>> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(text.lines().next().and_then(|l| l.trim().strip_prefix(HEADER)).and_then(|rest| {
            rest.split_whitespace().find_map(|kv| kv.strip_prefix("class=")).map(str::to_string)
        }))
    }

    /// Starts from the schema defaults and applies every `name = value`
    /// line of the file. Unknown names are rejected.
    pub fn load(path: &Path, class: &str, schema: Vec<ParamSpec>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut set = ParamSet::defaults(class, schema);
        for (n, raw) in text.lines().enumerate() {
            let lineno = n + 1;
            let line = raw.trim();
            if let Some(rest) = line.strip_prefix(HEADER) {
                if let Some(c) = rest.split_whitespace().find_map(|kv| kv.strip_prefix("class=")) {
                    if c != class {
                        return Err(Error::parse(path, lineno, format!("file is for class '{c}', not '{class}'")));
                    }
                }
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| Error::parse(path, lineno, "expected 'name = value'"))?;
            let name = name.trim();
            match set.set(name, value) {
                Ok(()) => {}
                Err(Error::UnknownParameter(p)) => {
                    return Err(Error::parse(path, lineno, format!("unknown parameter '{p}'")));
                }
                Err(Error::InvalidParameter { name, message }) => {
                    return Err(Error::parse(path, lineno, format!("{name}: {message}")));
                }
                Err(e) => return Err(e),
            }
        }
        set.validate()?;
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Vec<ParamSpec> {
        vec![
            ParamSpec::real("a", 1.5, ""),
            ParamSpec::complex("z", 0.0, ""),
            ParamSpec::int("n", 3, ""),
            ParamSpec::new("case", ParamValue::Text("./".into()), ""),
            ParamSpec::new("BONDS", ParamValue::Bonds(vec![[1.0, 0.0, 0.0]]), ""),
            ParamSpec::new("facts_hop", ParamValue::OptList(None), ""),
        ]
    }

    #[test]
    fn complex_forms() {
        assert_eq!(parse_complex("1e-05").unwrap(), C64::new(1e-5, 0.0));
        assert_eq!(parse_complex("(0.5, -2)").unwrap(), C64::new(0.5, -2.0));
        assert_eq!(parse_complex("1+2j").unwrap(), C64::new(1.0, 2.0));
        assert_eq!(parse_complex("1e-3-2e-2j").unwrap(), C64::new(1e-3, -2e-2));
        assert_eq!(parse_complex("2j").unwrap(), C64::new(0.0, 2.0));
        assert!(parse_complex("abc").is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let mut p = ParamSet::defaults("t", schema());
        p.set("a", "0.1").unwrap();
        p.set("z", "(0.30000000000000004, -1e-300)").unwrap();
        p.set("BONDS", "[[0.1, 0.2, 0.3], [-1, 0, 2.5e-3]]").unwrap();
        p.set("facts_hop", "[1, 0.5]").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p");
        p.save(&path).unwrap();
        assert_eq!(ParamSet::file_class(&path).unwrap().as_deref(), Some("t"));
        assert_eq!(ParamSet::load(&path, "t", schema()).unwrap(), p);
    }

    #[test]
    fn unknown_and_malformed_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p");
        std::fs::write(&path, "a = 2\nbogus = 1\n").unwrap();
        assert!(matches!(ParamSet::load(&path, "t", schema()), Err(Error::Parse { line: 2, .. })));
        std::fs::write(&path, "a = x\n").unwrap();
        assert!(matches!(ParamSet::load(&path, "t", schema()), Err(Error::Parse { line: 1, .. })));
        std::fs::write(&path, "n = 2.5\n").unwrap();
        assert!(matches!(ParamSet::load(&path, "t", schema()), Err(Error::Parse { line: 1, .. })));
        std::fs::write(&path, "facts_hop = [1, 2]\n").unwrap();
        assert!(matches!(ParamSet::load(&path, "t", schema()), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn missing_keys_take_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p");
        std::fs::write(&path, "# comment\n\nn : 7\n").unwrap();
        let p = ParamSet::load(&path, "t", schema()).unwrap();
        assert_eq!(p.int("n").unwrap(), 7);
        assert_eq!(p.real("a").unwrap(), 1.5);
        assert_eq!(p.text("case").unwrap(), "./");
        assert!(p.show().contains("  3) n"));
    }
}
