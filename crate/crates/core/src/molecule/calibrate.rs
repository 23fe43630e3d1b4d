//! Calibration of the built-in ⁸⁷Rb₂ a³Σᵤ⁺ model to its spectroscopic
//! targets, with the eigensolver in the loop.

use serde::{Deserialize, Serialize};

use super::{CurveSpec, MoleculeModel, RB_ATOMIC_POLARIZABILITY};
use crate::eigen::solve_radial;
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::units;

/// Exponent-function power p in a(R) = a₀ + a₁ (R^p − R_e^p)/(R^p + R_e^p).
pub const EXPONENT_POWER: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpandedMorseParameters {
    pub well_depth_cm: f64,
    pub exponent: f64,
    pub exponent_slope: f64,
    pub equilibrium: f64,
}

impl ExpandedMorseParameters {
    pub fn curve(&self) -> CurveSpec {
        CurveSpec::ExpandedMorse {
            well_depth_cm: self.well_depth_cm,
            exponent: self.exponent,
            exponent_slope: self.exponent_slope,
            power: EXPONENT_POWER,
            equilibrium: self.equilibrium,
        }
    }
}

/// Output of [`calibrate_default_model`] on the default grid.
pub(crate) const RB2_PARAMETERS: ExpandedMorseParameters = ExpandedMorseParameters {
    well_depth_cm: 234.242_083_632_084_16,
    exponent: 0.368_947_518_812_821_6,
    exponent_slope: -0.077_462_940_981_070_36,
    equilibrium: 11.485_571_407_127_317,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub grid: RadialGrid,
    /// B₀ = ħ²⟨R⁻²⟩₀/2μ in cm⁻¹.
    pub rotational_constant_cm: f64,
    /// E(ν=1, N=0) − E(0, 0) in cm⁻¹.
    pub vibrational_splitting_cm: f64,
    /// Fractional ν at which the N = 0 levels reach threshold; 40.5 puts
    /// 41 levels (ν = 0…40) below it.
    pub threshold_nu: f64,
    /// Fractional N at which the ν = 0 level reaches threshold; 153 puts the
    /// last bound even N at 152.
    pub threshold_n: f64,
    pub atomic_polarizability: f64,
    pub max_sweeps: usize,
    pub initial: ExpandedMorseParameters,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            grid: RadialGrid {
                r_min: 6.0,
                r_max: 60.0,
                n_points: 512,
            },
            rotational_constant_cm: 0.0104,
            vibrational_splitting_cm: 12.8,
            threshold_nu: 40.5,
            threshold_n: 153.0,
            atomic_polarizability: RB_ATOMIC_POLARIZABILITY,
            max_sweeps: 25,
            initial: ExpandedMorseParameters {
                well_depth_cm: 235.0,
                exponent: 0.3685,
                exponent_slope: -0.08,
                equilibrium: 11.47,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub parameters: ExpandedMorseParameters,
    pub rotational_constant_cm: f64,
    pub vibrational_splitting_cm: f64,
    pub bound_levels_n0: usize,
    pub threshold_nu: f64,
    pub threshold_n: f64,
    pub sweeps: usize,
}

struct Evaluator {
    grid: RadialGrid,
    points: Vec<f64>,
    mass: f64,
    /// Last even N known to be bound in the ν = 0 band.
    n_bracket: u32,
}

struct Levels {
    energies: Vec<f64>,
    b0: f64,
}

impl Evaluator {
    fn potential(&self, p: &ExpandedMorseParameters) -> Result<Vec<f64>> {
        let c = p.curve();
        self.points.iter().map(|&r| c.evaluate(r)).collect()
    }

    fn levels(&self, p: &ExpandedMorseParameters) -> Result<Levels> {
        let pairs = solve_radial(&self.grid, self.mass, &self.potential(p)?, 0)?;
        let dr = self.grid.spacing();
        let inv_r2: f64 = pairs[0]
            .vector
            .iter()
            .zip(&self.points)
            .map(|(f, r)| f * f / (r * r))
            .sum::<f64>()
            * dr;
        Ok(Levels {
            energies: pairs
                .iter()
                .map(|e| units::hartree_to_cm(e.energy))
                .collect(),
            b0: units::hartree_to_cm(inv_r2 / (2.0 * self.mass)),
        })
    }

    fn ground_energy(&self, v: &[f64], n: u32) -> Result<f64> {
        Ok(solve_radial(&self.grid, self.mass, v, n)?[0].energy)
    }

    /// Fractional N where E(ν = 0, N) crosses zero, interpolated linearly
    /// between the bracketing even N.
    fn threshold_n(&mut self, p: &ExpandedMorseParameters) -> Result<f64> {
        let v = self.potential(p)?;
        let mut lo = self.n_bracket;
        let mut e_lo = self.ground_energy(&v, lo)?;
        while e_lo >= 0.0 {
            if lo < 2 {
                return Err(Error::Calibration(
                    "no rotationally bound ν = 0 level".into(),
                ));
            }
            lo -= 2;
            e_lo = self.ground_energy(&v, lo)?;
        }
        let mut e_hi = self.ground_energy(&v, lo + 2)?;
        while e_hi < 0.0 {
            lo += 2;
            e_lo = e_hi;
            e_hi = self.ground_energy(&v, lo + 2)?;
            if lo > 1000 {
                return Err(Error::Calibration(
                    "ν = 0 band bound beyond N = 1000".into(),
                ));
            }
        }
        self.n_bracket = lo;
        Ok(f64::from(lo) + 2.0 * e_lo / (e_lo - e_hi))
    }
}

/// Fractional ν where the N = 0 levels reach threshold, using the linear
/// behaviour of √(−E) in ν near the top of the well.
fn threshold_nu(energies: &[f64]) -> Result<f64> {
    let nb = energies.iter().take_while(|&&e| e < 0.0).count();
    if nb < 2 {
        return Err(Error::Calibration(format!("only {nb} bound N = 0 levels")));
    }
    let a = (-energies[nb - 1]).sqrt();
    let b = (-energies[nb - 2]).sqrt();
    Ok((nb - 1) as f64 + a / (b - a))
}

fn secant(mut f: impl FnMut(f64) -> Result<f64>, x0: f64, x1: f64, tol: f64) -> Result<f64> {
    let (mut xa, mut xb) = (x0, x1);
    let mut fa = f(xa)?;
    let mut fb = f(xb)?;
    for _ in 0..40 {
        if fb.abs() < tol {
            return Ok(xb);
        }
        if fb == fa {
            break;
        }
        let next = xb - fb * (xb - xa) / (fb - fa);
        xa = xb;
        fa = fb;
        xb = next;
        fb = f(xb)?;
    }
    if fb.abs() < tol {
        Ok(xb)
    } else {
        Err(Error::Calibration(format!(
            "secant search stalled at x = {xb}, residual {fb}"
        )))
    }
}

/// Calibrates the built-in ⁸⁷Rb₂ model (expanded-Morse potential plus
/// dipole-induced-dipole polarizabilities) so that, on `options.grid`,
/// B₀, the 0→1 vibrational splitting, the number of bound N = 0 levels and
/// the last bound N of the ν = 0 band hit their targets.
///
/// Coordinate sweeps: R_e from B₀ ∝ R_e⁻², a₀ from the splitting, a₁ from
/// the N = 0 level count and D_e from the rotational census, repeated until
/// every target holds.
pub fn calibrate_default_model(
    options: &CalibrationOptions,
) -> Result<(MoleculeModel, CalibrationReport)> {
    let mass = units::amu_to_me(units::RB87_MASS_AMU / 2.0);
    let mut ev = Evaluator {
        grid: options.grid,
        points: options.grid.points(),
        mass,
        n_bracket: options.threshold_n.floor() as u32 / 2 * 2,
    };
    let mut p = options.initial;
    let target_b = options.rotational_constant_cm;
    let target_split = options.vibrational_splitting_cm;

    let mut last = None;
    for sweep in 1..=options.max_sweeps {
        let lv = ev.levels(&p)?;
        let split = lv.energies[1] - lv.energies[0];
        let nu_star = threshold_nu(&lv.energies)?;
        let n_star = ev.threshold_n(&p)?;
        let converged = (lv.b0 - target_b).abs() < 1e-7
            && (split - target_split).abs() < 1e-4
            && (nu_star - options.threshold_nu).abs() < 1e-3
            && (n_star - options.threshold_n).abs() < 1e-2;
        last = Some((lv.b0, split, nu_star, n_star));
        if converged {
            let report = CalibrationReport {
                parameters: p,
                rotational_constant_cm: lv.b0,
                vibrational_splitting_cm: split,
                bound_levels_n0: lv.energies.iter().filter(|&&e| e < 0.0).count(),
                threshold_nu: nu_star,
                threshold_n: n_star,
                sweeps: sweep,
            };
            return Ok((
                MoleculeModel::rb2_with(p, options.atomic_polarizability),
                report,
            ));
        }

        p.equilibrium *= (lv.b0 / target_b).sqrt();
        let base = p;
        p.exponent = secant(
            |a| {
                let e = ev
                    .levels(&ExpandedMorseParameters {
                        exponent: a,
                        ..base
                    })?
                    .energies;
                Ok(e[1] - e[0] - target_split)
            },
            p.exponent,
            p.exponent * 1.01,
            2e-5,
        )?;
        let base = p;
        p.exponent_slope = secant(
            |s| {
                let e = ev
                    .levels(&ExpandedMorseParameters {
                        exponent_slope: s,
                        ..base
                    })?
                    .energies;
                Ok(threshold_nu(&e)? - options.threshold_nu)
            },
            p.exponent_slope,
            p.exponent_slope + 0.004,
            2e-4,
        )?;
        let base = p;
        p.well_depth_cm = secant(
            |d| {
                Ok(ev.threshold_n(&ExpandedMorseParameters {
                    well_depth_cm: d,
                    ..base
                })? - options.threshold_n)
            },
            p.well_depth_cm,
            p.well_depth_cm + 1.0,
            2e-3,
        )?;
    }
    let (b0, split, nu_star, n_star) = last.unwrap_or_default();
    Err(Error::Calibration(format!(
        "no convergence after {} sweeps: B0 = {b0} cm⁻¹, ΔE = {split} cm⁻¹, ν* = {nu_star}, N* = {n_star}",
        options.max_sweeps
    )))
}
