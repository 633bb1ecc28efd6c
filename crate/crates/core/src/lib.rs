pub mod angular;
pub mod bits;
pub mod error;
pub mod fock;
pub mod space;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub mod ligand;
pub mod hamiltonian;
pub mod operator;
pub mod sparse;
pub mod solvers;
pub mod params;
pub mod spectra;
pub mod classes;
pub mod case;
