use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hxx_core::case::{expand_case, run_counters, run_rixs, run_spectrum, CaseData};
use hxx_core::classes::{named_polarization, ClassRegistry, ExpandRequest, ExperimentClass};
use hxx_core::params::ParamSet;
use hxx_core::spectra::RixsConfig;
use hxx_core::C64;

#[derive(Parser)]
#[command(name = "hxx", version, about = "Exact-diagonalization multiplet engine for XAS and RIXS")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the Hilbert spaces and write all operator components
    Expand(ExpandArgs),
    /// Boltzmann-averaged absorption spectrum
    Spectrum(SpectrumArgs),
    /// RIXS spectrum at one incoming energy
    Rixs(RixsArgs),
    /// Ground-state expectation values: E, S2, L2, 2SL, Nlig, Sz, Lz
    Counters(CaseArgs),
    /// Inspect or edit a parameter file
    Params {
        #[command(subcommand)]
        action: ParamsAction,
    },
    /// List the registered experiment classes
    Classes,
}

#[derive(Args)]
struct ExpandArgs {
    /// Experiment class (2p3d, rixs, df); defaults to the class of --params
    #[arg(long)]
    class: Option<String>,
    /// Valence occupation of the base space with a full ligand shell
    #[arg(long)]
    nmin: usize,
    /// Case directory to write
    #[arg(long)]
    case: PathBuf,
    /// Maximum number of ligand holes
    #[arg(long, default_value_t = 0)]
    nhopped: usize,
    /// Restrict every space to the high-spin S_z sector of the base space
    #[arg(long)]
    spinfixed: bool,
    /// Parameter file supplying geometry and hopping (class defaults otherwise)
    #[arg(long)]
    params: Option<PathBuf>,
    /// Replace an existing case built with different settings
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct CaseArgs {
    /// Parameter file
    #[arg(long)]
    params: PathBuf,
    /// Case directory (overrides the `case` parameter)
    #[arg(long)]
    case: Option<PathBuf>,
    /// Output file (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    common: CaseArgs,
    /// Polarization coefficients, comma separated (complex as 0.5+0.5i), or x, y, z
    #[arg(long, allow_hyphen_values = true)]
    pol: Option<String>,
}

#[derive(Args)]
struct RixsArgs {
    #[command(flatten)]
    common: CaseArgs,
    /// Incoming energy above the ground state (eV)
    #[arg(long, allow_hyphen_values = true)]
    ein: f64,
    /// Outgoing grid as start:stop:step
    #[arg(long, allow_hyphen_values = true)]
    eout: String,
    /// Intermediate-state half-width
    #[arg(long)]
    gammain: f64,
    /// Final-state half-widths as low,crossover,high
    #[arg(long, allow_hyphen_values = true)]
    gammaout: String,
    /// Incoming polarization: 5 quadrupole or 3 dipole coefficients
    #[arg(long, allow_hyphen_values = true)]
    polin: String,
    /// Outgoing dipole polarization: 3 coefficients
    #[arg(long, allow_hyphen_values = true)]
    polout: String,
}

#[derive(Subcommand)]
enum ParamsAction {
    /// Print the numbered parameter listing
    Show {
        /// Parameter file
        #[arg(long)]
        params: Option<PathBuf>,
        /// Class defaults to show when no file is given
        #[arg(long)]
        class: Option<String>,
    },
    /// Change one value, creating the file from class defaults if needed
    Set {
        name: String,
        #[arg(allow_hyphen_values = true)]
        value: String,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        class: Option<String>,
    },
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli.command) {
        let closed = e
            .chain()
            .any(|c| c.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe));
        if closed {
            return;
        }
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(command: Command) -> Result<()> {
    let registry = ClassRegistry::with_builtin();
    match command {
        Command::Expand(a) => expand(&registry, a),
        Command::Spectrum(a) => {
            let (class, params, case) = open_case(&registry, &a.common)?;
            let pol = a.pol.as_deref().map(parse_polarization).transpose()?;
            let result = run_spectrum(class, &params, &case, pol.as_deref())?;
            emit(a.common.out.as_deref(), |w| result.write_to(w))
        }
        Command::Rixs(a) => {
            let (class, params, case) = open_case(&registry, &a.common)?;
            let [eout1, eout2, dout] = parse_triple(&a.eout, ':').context("--eout")?;
            let gammaout = parse_triple(&a.gammaout, ',').context("--gammaout")?;
            let cfg = RixsConfig { ein: a.ein, eout1, eout2, dout, gammain: a.gammain, gammaout };
            let polin = parse_polarization(&a.polin).context("--polin")?;
            let polout = parse_polarization(&a.polout).context("--polout")?;
            let result = run_rixs(class, &params, &case, &cfg, &polin, &polout)?;
            emit(a.common.out.as_deref(), |w| result.write_to(w))
        }
        Command::Counters(a) => {
            let (class, params, case) = open_case(&registry, &a)?;
            let counters = run_counters(class, &params, &case)?;
            emit(a.out.as_deref(), |w| counters.write_to(w))
        }
        Command::Params { action } => params(&registry, action),
        Command::Classes => {
            for name in registry.names() {
                println!("{name:<6} {}", registry.get(name)?.summary());
            }
            Ok(())
        }
    }
}

fn expand(registry: &ClassRegistry, a: ExpandArgs) -> Result<()> {
    let (class, params) = match (&a.params, &a.class) {
        (Some(path), explicit) => {
            let (class, params) = load_params(registry, path)?;
            if let Some(c) = explicit {
                if c != class.name() {
                    bail!("--class {c} does not match the class '{}' of {}", class.name(), path.display());
                }
            }
            (class, params)
        }
        (None, Some(c)) => {
            let class = registry.get(c)?;
            (class, class.defaults())
        }
        (None, None) => bail!("give --class or --params"),
    };
    let req = ExpandRequest { nmin: a.nmin, nhopped: a.nhopped, spinfixed: a.spinfixed };
    let manifest = expand_case(class, &req, &params, &a.case, a.force)?;
    for (space, dim) in manifest.spaces() {
        println!("{space}: {dim}");
    }
    Ok(())
}

fn params(registry: &ClassRegistry, action: ParamsAction) -> Result<()> {
    match action {
        ParamsAction::Show { params, class } => {
            let set = match (params, class) {
                (Some(path), _) => load_params(registry, &path)?.1,
                (None, Some(c)) => registry.get(&c)?.defaults(),
                (None, None) => bail!("give --params or --class"),
            };
            print!("{}", set.show());
            Ok(())
        }
        ParamsAction::Set { name, value, params, class } => {
            let mut set = if params.exists() {
                load_params(registry, &params)?.1
            } else {
                let c = class.ok_or_else(|| anyhow!("{} does not exist; give --class to create it", params.display()))?;
                registry.get(&c)?.defaults()
            };
            set.set(&name, &value)?;
            set.validate()?;
            set.save(&params)?;
            Ok(())
        }
    }
}

fn load_params<'r>(registry: &'r ClassRegistry, path: &Path) -> Result<(&'r dyn ExperimentClass, ParamSet)> {
    let name = ParamSet::file_class(path)?
        .ok_or_else(|| anyhow!("{} has no '#HXX-PARAMS class=...' header", path.display()))?;
    let class = registry.get(&name)?;
    let params = ParamSet::load(path, class.name(), class.schema())?;
    Ok((class, params))
}

fn open_case<'r>(registry: &'r ClassRegistry, a: &CaseArgs) -> Result<(&'r dyn ExperimentClass, ParamSet, CaseData)> {
    let (class, params) = load_params(registry, &a.params)?;
    let dir = match &a.case {
        Some(d) => d.clone(),
        None => PathBuf::from(params.text("case")?),
    };
    let case = CaseData::load(&dir).with_context(|| format!("loading case {}", dir.display()))?;
    Ok((class, params, case))
}

fn emit(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    match out {
        Some(path) => {
            let mut f = std::io::BufWriter::new(
                std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            write(&mut f).and_then(|_| f.flush()).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock).context("writing to stdout")
        }
    }
}

fn parse_polarization(text: &str) -> Result<Vec<C64>> {
    if let Some(p) = named_polarization(text.trim()) {
        return Ok(p);
    }
    text.split(',')
        .map(|s| C64::from_str(s.trim()).map_err(|_| anyhow!("bad polarization coefficient '{}'", s.trim())))
        .collect()
}

fn parse_triple(text: &str, sep: char) -> Result<[f64; 3]> {
    let v: Vec<f64> = text
        .split(sep)
        .map(|s| s.trim().parse::<f64>().map_err(|_| anyhow!("bad number '{}'", s.trim())))
        .collect::<Result<_>>()?;
    v.try_into().map_err(|v: Vec<f64>| anyhow!("expected 3 values separated by '{sep}', got {}", v.len()))
}
