//! Nuclear magnetic shielding, free induction decay and NMR spectra from
//! second-order thermal molecular QED, with reconstruction of nuclear
//! densities from spectra.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod integrate;
pub mod io;
pub mod molecular;
pub mod reconstruction;
pub mod shielding;
pub mod spectrum;
pub mod spin;
pub mod units;

pub use error::{Error, Result};
