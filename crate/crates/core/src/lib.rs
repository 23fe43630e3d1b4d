//! Grid-based quantum dynamics of a diatomic molecule in non-resonant laser
//! pulses: Fourier-grid × spherical-harmonic representation, field-free
//! eigenstate library, Chebyshev and split-operator propagation, a
//! vibrationally averaged rigid-rotor reference model and the analysis of
//! the resulting wavepackets.
//!
//! All kernels work in atomic units; see [`units`] for the conversions used
//! at the interfaces.

pub mod eigen;
pub mod error;
pub mod grid;
pub mod molecule;
pub mod observables;
pub mod propagate;
pub mod pulse;
pub mod rotor;
pub mod units;

pub use error::{Error, Result};

/// Fixed 12-significant-digit formatting used for every numeric CSV field.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:.11e}")
    }
}
