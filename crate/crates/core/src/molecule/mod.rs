//! Molecular system definition: reduced mass, potential energy curve and the
//! R-dependent polarizability components.

mod calibrate;
mod spline;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

pub use calibrate::{calibrate_default_model, CalibrationOptions, CalibrationReport};
pub use spline::CubicSpline;

/// Default ground-state Rb atomic polarizability (a.u.).
pub const RB_ATOMIC_POLARIZABILITY: f64 = 319.2;

/// Which polarizability component a dipole-induced-dipole curve returns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarizabilityComponent {
    /// Δα = α∥ − α⊥ = 6α²/R³.
    Anisotropy,
    /// α⊥ = 2α − 2α²/R³.
    Perpendicular,
    /// α∥ = 2α + 4α²/R³.
    Parallel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthUnit {
    Bohr,
    Angstrom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueUnit {
    Hartree,
    Wavenumber,
    /// Polarizability in atomic units.
    AtomicUnits,
    /// Polarizability volume in Å³.
    Angstrom3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveUnits {
    pub length: LengthUnit,
    pub value: ValueUnit,
}

impl ValueUnit {
    fn to_internal(self, v: f64) -> f64 {
        match self {
            ValueUnit::Hartree | ValueUnit::AtomicUnits => v,
            ValueUnit::Wavenumber => units::cm_to_hartree(v),
            ValueUnit::Angstrom3 => v / units::AU_POLARIZABILITY_IN_ANGSTROM3,
        }
    }
}

impl LengthUnit {
    fn to_bohr(self, r: f64) -> f64 {
        match self {
            LengthUnit::Bohr => r,
            LengthUnit::Angstrom => units::angstrom_to_bohr(r),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub path: PathBuf,
    pub units: CurveUnits,
}

/// Tabulated curve in internal units (bohr, hartree or a.u. polarizability).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabulatedCurve {
    pub spline: CubicSpline,
    pub provenance: Option<Provenance>,
}

/// A one-dimensional function of the internuclear distance.
///
/// Energies are returned in hartree and polarizabilities in atomic units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveSpec {
    /// D_e (1 − e^{−a(R−R_e)})² − D_e.
    Morse {
        well_depth_cm: f64,
        exponent: f64,
        equilibrium: f64,
    },
    /// Morse form with a distance-dependent exponent
    /// a(R) = a₀ + a₁ (R^p − R_e^p)/(R^p + R_e^p).
    ExpandedMorse {
        well_depth_cm: f64,
        exponent: f64,
        exponent_slope: f64,
        power: i32,
        equilibrium: f64,
    },
    /// Dipole-induced-dipole polarizability of two identical atoms.
    DidPolarizability {
        atomic_polarizability: f64,
        component: PolarizabilityComponent,
    },
    Tabulated(TabulatedCurve),
}

impl CurveSpec {
    pub fn morse(well_depth_cm: f64, exponent: f64, equilibrium: f64) -> Result<Self> {
        if !(well_depth_cm > 0.0 && exponent > 0.0 && equilibrium > 0.0) {
            return Err(Error::Config(format!(
                "Morse parameters must be positive (D_e = {well_depth_cm}, a = {exponent}, R_e = {equilibrium})"
            )));
        }
        Ok(CurveSpec::Morse {
            well_depth_cm,
            exponent,
            equilibrium,
        })
    }

    pub fn did(atomic_polarizability: f64, component: PolarizabilityComponent) -> Self {
        CurveSpec::DidPolarizability {
            atomic_polarizability,
            component,
        }
    }

    /// Builds a tabulated curve from (R, value) pairs already in internal units.
    pub fn tabulated(r: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_table(&r, &values, None)?;
        Ok(CurveSpec::Tabulated(TabulatedCurve {
            spline: CubicSpline::natural(r, values),
            provenance: None,
        }))
    }

    /// Closed interval on which the curve may be evaluated.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            CurveSpec::Tabulated(t) => t.spline.domain(),
            _ => (f64::MIN_POSITIVE, f64::INFINITY),
        }
    }

    pub fn evaluate(&self, r: f64) -> Result<f64> {
        let (min, max) = self.domain();
        if !(r >= min && r <= max) {
            return Err(Error::Domain { r, min, max });
        }
        Ok(match self {
            CurveSpec::Morse {
                well_depth_cm,
                exponent,
                equilibrium,
            } => {
                let d = units::cm_to_hartree(*well_depth_cm);
                let x = 1.0 - (-exponent * (r - equilibrium)).exp();
                d * x * x - d
            }
            CurveSpec::ExpandedMorse {
                well_depth_cm,
                exponent,
                exponent_slope,
                power,
                equilibrium,
            } => {
                let d = units::cm_to_hartree(*well_depth_cm);
                let rp = r.powi(*power);
                let rep = equilibrium.powi(*power);
                let a = exponent + exponent_slope * (rp - rep) / (rp + rep);
                let x = 1.0 - (-a * (r - equilibrium)).exp();
                d * x * x - d
            }
            CurveSpec::DidPolarizability {
                atomic_polarizability: a,
                component,
            } => {
                let c = a * a / (r * r * r);
                match component {
                    PolarizabilityComponent::Anisotropy => 6.0 * c,
                    PolarizabilityComponent::Perpendicular => 2.0 * a - 2.0 * c,
                    PolarizabilityComponent::Parallel => 2.0 * a + 4.0 * c,
                }
            }
            CurveSpec::Tabulated(t) => t.spline.eval(r),
        })
    }
}

/// Free-function form of [`CurveSpec::evaluate`].
pub fn evaluate_curve(curve: &CurveSpec, r: f64) -> Result<f64> {
    curve.evaluate(r)
}

fn check_table(r: &[f64], values: &[f64], path: Option<&Path>) -> Result<()> {
    let fmt = |line: usize, message: String| Error::Format {
        path: path.map(Path::to_path_buf).unwrap_or_default(),
        line,
        message,
    };
    if r.len() != values.len() {
        return Err(fmt(0, "column length mismatch".into()));
    }
    if r.len() < 4 {
        return Err(fmt(0, format!("need at least 4 rows, found {}", r.len())));
    }
    for (i, w) in r.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(fmt(
                i + 2,
                format!("R not strictly increasing ({} after {})", w[1], w[0]),
            ));
        }
    }
    Ok(())
}

/// Reads a two-column (R, value) text table.
///
/// Columns may be separated by whitespace or commas; lines starting with `#`
/// and blank lines are ignored. Line numbers in errors are 1-based file lines.
pub fn load_tabulated_curve(path: impl AsRef<Path>, units: CurveUnits) -> Result<CurveSpec> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let fmt = |line: usize, message: String| Error::Format {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut r = Vec::new();
    let mut v = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        last_line = line_no;
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if fields.len() != 2 {
            return Err(fmt(
                line_no,
                format!("expected 2 columns, found {}", fields.len()),
            ));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| fmt(line_no, format!("cannot parse '{s}' as a number")))
        };
        let ri = units.length.to_bohr(parse(fields[0])?);
        let vi = units.value.to_internal(parse(fields[1])?);
        if let Some(&prev) = r.last() {
            if ri <= prev {
                let what = if ri == prev {
                    "duplicate"
                } else {
                    "decreasing"
                };
                return Err(fmt(line_no, format!("{what} R value {}", fields[0])));
            }
        }
        r.push(ri);
        v.push(vi);
    }
    if r.len() < 4 {
        return Err(fmt(
            last_line,
            format!("need at least 4 data rows, found {}", r.len()),
        ));
    }
    Ok(CurveSpec::Tabulated(TabulatedCurve {
        spline: CubicSpline::natural(r, v),
        provenance: Some(Provenance {
            path: path.to_path_buf(),
            units,
        }),
    }))
}

/// The molecular system entering the nuclear Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoleculeModel {
    pub reduced_mass_amu: f64,
    pub potential: CurveSpec,
    pub delta_alpha: CurveSpec,
    pub alpha_perp: CurveSpec,
    /// Dissociation threshold in cm⁻¹ (V(∞) = 0 convention).
    pub dissociation_threshold_cm: f64,
}

/// Model curves sampled on a set of radial points, in atomic units.
#[derive(Clone, Debug)]
pub struct SampledModel {
    pub potential: Vec<f64>,
    pub delta_alpha: Vec<f64>,
    pub alpha_perp: Vec<f64>,
}

impl MoleculeModel {
    pub fn new(
        reduced_mass_amu: f64,
        potential: CurveSpec,
        delta_alpha: CurveSpec,
        alpha_perp: CurveSpec,
    ) -> Result<Self> {
        let model = Self {
            reduced_mass_amu,
            potential,
            delta_alpha,
            alpha_perp,
            dissociation_threshold_cm: 0.0,
        };
        model.validate()?;
        Ok(model)
    }

    /// Pre-calibrated ⁸⁷Rb₂ a³Σᵤ⁺ model; [`calibrate_default_model`] reproduces
    /// these parameters from the spectroscopic targets.
    pub fn rb2_default() -> Self {
        Self::rb2_with(calibrate::RB2_PARAMETERS, RB_ATOMIC_POLARIZABILITY)
    }

    pub(crate) fn rb2_with(
        p: calibrate::ExpandedMorseParameters,
        atomic_polarizability: f64,
    ) -> Self {
        Self {
            reduced_mass_amu: units::RB87_MASS_AMU / 2.0,
            potential: p.curve(),
            delta_alpha: CurveSpec::did(atomic_polarizability, PolarizabilityComponent::Anisotropy),
            alpha_perp: CurveSpec::did(
                atomic_polarizability,
                PolarizabilityComponent::Perpendicular,
            ),
            dissociation_threshold_cm: 0.0,
        }
    }

    pub fn with_atomic_polarizability(mut self, atomic_polarizability: f64) -> Self {
        self.delta_alpha =
            CurveSpec::did(atomic_polarizability, PolarizabilityComponent::Anisotropy);
        self.alpha_perp = CurveSpec::did(
            atomic_polarizability,
            PolarizabilityComponent::Perpendicular,
        );
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reduced_mass_amu > 0.0) {
            return Err(Error::Config(format!(
                "reduced mass must be positive, got {}",
                self.reduced_mass_amu
            )));
        }
        if let CurveSpec::Tabulated(t) = &self.potential {
            let (_, r_max) = t.spline.domain();
            let v_end = units::hartree_to_cm(t.spline.eval(r_max));
            if (v_end - self.dissociation_threshold_cm).abs() > 1.0 {
                return Err(Error::Config(format!(
                    "tabulated potential ends at {v_end} cm⁻¹, expected the threshold {} cm⁻¹",
                    self.dissociation_threshold_cm
                )));
            }
        }
        Ok(())
    }

    pub fn reduced_mass_au(&self) -> f64 {
        units::amu_to_me(self.reduced_mass_amu)
    }

    pub fn dissociation_threshold_au(&self) -> f64 {
        units::cm_to_hartree(self.dissociation_threshold_cm)
    }

    /// Samples all curves at `points`, failing on any domain violation or
    /// non-finite polarizability.
    pub fn sample(&self, points: &[f64]) -> Result<SampledModel> {
        let eval = |c: &CurveSpec| -> Result<Vec<f64>> {
            points
                .iter()
                .map(|&r| {
                    let v = c.evaluate(r)?;
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::Numerical(format!("curve is not finite at R = {r}")))
                    }
                })
                .collect()
        };
        Ok(SampledModel {
            potential: eval(&self.potential)?,
            delta_alpha: eval(&self.delta_alpha)?,
            alpha_perp: eval(&self.alpha_perp)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn morse_minimum_and_limit() {
        let c = CurveSpec::morse(240.0, 0.4, 11.5).unwrap();
        let d = units::cm_to_hartree(240.0);
        assert!((c.evaluate(11.5).unwrap() + d).abs() < 1e-18);
        // a(R − R_e) = 30
        let far = c.evaluate(11.5 + 30.0 / 0.4).unwrap();
        assert!(far.abs() < 1e-10 * d);
    }

    #[test]
    fn morse_single_minimum() {
        let c = CurveSpec::morse(240.0, 0.4, 11.5).unwrap();
        let rs: Vec<f64> = (0..4000).map(|i| 5.0 + 0.01 * i as f64).collect();
        let vs: Vec<f64> = rs.iter().map(|&r| c.evaluate(r).unwrap()).collect();
        let minima: Vec<usize> = (1..vs.len() - 1)
            .filter(|&i| vs[i] < vs[i - 1] && vs[i] < vs[i + 1])
            .collect();
        assert_eq!(minima.len(), 1);
        assert!((rs[minima[0]] - 11.5).abs() < 0.011);
    }

    #[test]
    fn morse_rejects_nonpositive() {
        assert!(CurveSpec::morse(0.0, 0.4, 11.5).is_err());
        assert!(CurveSpec::morse(240.0, -0.1, 11.5).is_err());
    }

    #[test]
    fn did_anisotropy_closed_form() {
        let c = CurveSpec::did(319.2, PolarizabilityComponent::Anisotropy);
        // 6 · 319.2² / 11.5³, evaluated independently.
        let expected = 6.0 * 101_888.64 / 1_520.875;
        assert!((c.evaluate(11.5).unwrap() - expected).abs() < 1e-10);
        assert!((expected - 401.9606).abs() < 1e-3);
    }

    #[test]
    fn did_components_consistent() {
        let par = CurveSpec::did(319.2, PolarizabilityComponent::Parallel);
        let perp = CurveSpec::did(319.2, PolarizabilityComponent::Perpendicular);
        let aniso = CurveSpec::did(319.2, PolarizabilityComponent::Anisotropy);
        for &r in &[6.0, 9.5, 20.0, 60.0] {
            let d = par.evaluate(r).unwrap() - perp.evaluate(r).unwrap();
            assert!((d - aniso.evaluate(r).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn analytic_curves_reject_nonpositive_r() {
        let c = CurveSpec::did(319.2, PolarizabilityComponent::Anisotropy);
        assert!(matches!(c.evaluate(0.0), Err(Error::Domain { .. })));
        assert!(matches!(c.evaluate(-1.0), Err(Error::Domain { .. })));
    }

    fn write_table(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    const BOHR_HARTREE: CurveUnits = CurveUnits {
        length: LengthUnit::Bohr,
        value: ValueUnit::Hartree,
    };

    #[test]
    fn identity_table_exact_at_nodes() {
        let f = write_table("# identity\n1 1\n2, 2\n3\t3\n4 4\n");
        let c = load_tabulated_curve(f.path(), BOHR_HARTREE).unwrap();
        for r in [1.0, 2.0, 3.0, 4.0] {
            assert_eq!(c.evaluate(r).unwrap(), r);
        }
        match &c {
            CurveSpec::Tabulated(t) => assert_eq!(t.provenance.as_ref().unwrap().path, f.path()),
            _ => unreachable!(),
        }
    }

    #[test]
    fn decreasing_r_names_line() {
        let f = write_table("1 0\n2 0\n1.5 0\n3 0\n4 0\n");
        match load_tabulated_curve(f.path(), BOHR_HARTREE) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_short_and_garbage_rows() {
        let f = write_table("1 0\n2 0\n2 1\n3 0\n");
        assert!(matches!(
            load_tabulated_curve(f.path(), BOHR_HARTREE),
            Err(Error::Format { line: 3, .. })
        ));
        let f = write_table("1 0\n2 0\n3 0\n");
        assert!(matches!(
            load_tabulated_curve(f.path(), BOHR_HARTREE),
            Err(Error::Format { .. })
        ));
        let f = write_table("1 0\n2 zero\n3 0\n4 0\n");
        assert!(matches!(
            load_tabulated_curve(f.path(), BOHR_HARTREE),
            Err(Error::Format { line: 2, .. })
        ));
    }

    #[test]
    fn tabulated_forbids_extrapolation() {
        let c = CurveSpec::tabulated(vec![1.0, 2.0, 3.0, 4.0], vec![0.0; 4]).unwrap();
        assert!(matches!(c.evaluate(4.0 + 1e-9), Err(Error::Domain { .. })));
        assert!(matches!(c.evaluate(0.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn unit_conversion_on_load() {
        let f = write_table("1 100\n2 200\n3 300\n4 400\n");
        let units = CurveUnits {
            length: LengthUnit::Angstrom,
            value: ValueUnit::Wavenumber,
        };
        let c = load_tabulated_curve(f.path(), units).unwrap();
        let r = units::angstrom_to_bohr(2.0);
        assert!((c.evaluate(r).unwrap() - units::cm_to_hartree(200.0)).abs() < 1e-15);
    }

    /// Natural cubic spline through a 10-row Morse sampling, compared with
    /// the analytic curve at interior midpoints. Doubling the rows must cut
    /// the error by at least 8× and the coarse error must stay small.
    #[test]
    fn tabulated_morse_refinement() {
        let morse = CurveSpec::morse(240.0, 0.4, 11.5).unwrap();
        let max_mid_error = |rows: usize| {
            let (a, b) = (8.0, 26.0);
            let r: Vec<f64> = (0..rows)
                .map(|i| a + (b - a) * i as f64 / (rows - 1) as f64)
                .collect();
            let v: Vec<f64> = r.iter().map(|&x| morse.evaluate(x).unwrap()).collect();
            let t = CurveSpec::tabulated(r.clone(), v).unwrap();
            // Natural end conditions cost two orders within a few rows of
            // the ends; the interior converges as h⁴.
            r.windows(2)
                .filter(|w| w[0] > 12.0 && w[1] < 22.0)
                .map(|w| {
                    let mid = 0.5 * (w[0] + w[1]);
                    (t.evaluate(mid).unwrap() - morse.evaluate(mid).unwrap()).abs()
                })
                .fold(0.0, f64::max)
        };
        let e10 = max_mid_error(10);
        let e20 = max_mid_error(19);
        let depth = units::cm_to_hartree(240.0);
        assert!(e20 < e10 / 8.0, "e10 = {e10}, e20 = {e20}");
        assert!(e10 < 0.05 * depth, "e10 = {e10}");
    }
}
