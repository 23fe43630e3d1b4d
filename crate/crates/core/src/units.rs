//! Unit conversions between the external units (cm⁻¹, ps, W/cm², amu, K)
//! and the atomic units used in every kernel.
//!
//! Values are CODATA 2018.

/// Hartree in wavenumbers (cm⁻¹).
pub const HARTREE_IN_CM: f64 = 219_474.631_363_2;

/// Unified atomic mass unit in electron masses.
pub const AMU_IN_ME: f64 = 1_822.888_486_209;

/// Atomic unit of time in seconds.
pub const AU_TIME_S: f64 = 2.418_884_326_585_7e-17;

/// Picoseconds per atomic unit of time, inverted.
pub const PS_IN_AU: f64 = 1e-12 / AU_TIME_S;

/// Bohr radius in ångström.
pub const BOHR_IN_ANGSTROM: f64 = 0.529_177_210_903;

/// Boltzmann constant in cm⁻¹/K.
pub const BOLTZMANN_CM_PER_K: f64 = 0.695_034_800_9;

/// Speed of light in cm/s.
pub const SPEED_OF_LIGHT_CM_S: f64 = 2.997_924_58e10;

const SPEED_OF_LIGHT_SI: f64 = 299_792_458.0;
const VACUUM_PERMITTIVITY_SI: f64 = 8.854_187_812_8e-12;
const AU_FIELD_SI: f64 = 5.142_206_747_63e11;

/// Atomic unit of polarizability in Å³.
pub const AU_POLARIZABILITY_IN_ANGSTROM3: f64 = 0.148_184_711_4;

/// 87Rb atomic mass in amu.
pub const RB87_MASS_AMU: f64 = 86.909_180_531;

pub fn cm_to_hartree(e: f64) -> f64 {
    e / HARTREE_IN_CM
}

pub fn hartree_to_cm(e: f64) -> f64 {
    e * HARTREE_IN_CM
}

pub fn ps_to_au(t: f64) -> f64 {
    t * PS_IN_AU
}

pub fn au_to_ps(t: f64) -> f64 {
    t / PS_IN_AU
}

pub fn amu_to_me(m: f64) -> f64 {
    m * AMU_IN_ME
}

pub fn angstrom_to_bohr(r: f64) -> f64 {
    r / BOHR_IN_ANGSTROM
}

/// I/(2cε₀) in atomic units (hartree per atomic unit of polarizability) for an
/// intensity given in W/cm².
///
/// For a non-resonant field of amplitude E₀, I = cε₀E₀²/2 and the
/// cycle-averaged interaction prefactor is E₀²/4 = I/(2cε₀).
pub fn intensity_to_au(intensity_w_cm2: f64) -> f64 {
    let intensity_si = intensity_w_cm2 * 1e4;
    intensity_si / (2.0 * SPEED_OF_LIGHT_SI * VACUUM_PERMITTIVITY_SI) / (AU_FIELD_SI * AU_FIELD_SI)
}
