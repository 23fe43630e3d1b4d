//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use rovib_core::grid::{ChannelSet, RadialGrid};
use rovib_core::molecule::{
    load_tabulated_curve, CurveUnits, LengthUnit, MoleculeModel, ValueUnit,
};
use rovib_core::observables::{InitialState, ThermalSpec};
use rovib_core::propagate::PropagationPlan;
use rovib_core::pulse::{match_pulses, Pulse};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Context, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Eigen-library cache; `<output_dir>/cache` when absent.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Scan tasks run in parallel either way; results are merged in key order.
    #[serde(default = "yes")]
    pub deterministic: bool,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub pulses: Vec<PulseConfig>,
    #[serde(default)]
    pub propagation: PropagationConfig,
    pub job: JobConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("rovib-output")
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Calibrated Morse-type well with dipole-induced-dipole polarizabilities.
    Builtin {
        #[serde(default)]
        atomic_polarizability: Option<f64>,
    },
    Tabulated {
        reduced_mass_amu: f64,
        potential: CurveFile,
        delta_alpha: CurveFile,
        alpha_perp: CurveFile,
    },
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Builtin {
            atomic_polarizability: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveFile {
    pub path: PathBuf,
    #[serde(default = "bohr")]
    pub length: LengthUnit,
    pub value: ValueUnit,
}

fn bohr() -> LengthUnit {
    LengthUnit::Bohr
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub n_points: usize,
    /// Highest rotational channel; channels are the even N in [|M|, n_max].
    pub n_max: u32,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            r_min: 6.0,
            r_max: 60.0,
            n_points: 512,
            n_max: 180,
        }
    }
}

impl GridConfig {
    pub fn radial(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.r_min, self.r_max, self.n_points).context(|| "grid section".into())
    }

    pub fn channels(&self, m: i32) -> Result<ChannelSet> {
        ChannelSet::even(m, self.n_max).context(|| format!("channel set for M = {m}"))
    }
}

fn beta() -> f64 {
    0.3
}
fn t0() -> f64 {
    3.0
}
fn t_c() -> f64 {
    15.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PulseConfig {
    Centrifuge {
        label: String,
        peak: f64,
        #[serde(default = "beta")]
        beta: f64,
        #[serde(default = "t0")]
        t0: f64,
        #[serde(default = "t_c")]
        t_c: f64,
        #[serde(default = "yes")]
        symmetric_rampoff: bool,
    },
    Gaussian {
        label: String,
        peak: f64,
        sigma: f64,
        t_g: f64,
    },
    /// Gaussian with the bandwidth of the given centrifuge shape, at `peak`.
    MatchedGaussian {
        label: String,
        peak: f64,
        #[serde(default = "beta")]
        beta: f64,
        #[serde(default = "t0")]
        t0: f64,
        #[serde(default = "t_c")]
        t_c: f64,
        #[serde(default = "yes")]
        symmetric_rampoff: bool,
    },
}

impl PulseConfig {
    pub fn label(&self) -> &str {
        match self {
            PulseConfig::Centrifuge { label, .. }
            | PulseConfig::Gaussian { label, .. }
            | PulseConfig::MatchedGaussian { label, .. } => label,
        }
    }

    pub fn build(&self) -> Result<Pulse> {
        let ctx = || format!("pulse '{}'", self.label());
        match *self {
            PulseConfig::Centrifuge {
                peak,
                beta,
                t0,
                t_c,
                symmetric_rampoff,
                ..
            } => centrifuge(peak, beta, t0, t_c, symmetric_rampoff).context(ctx),
            PulseConfig::Gaussian {
                peak, sigma, t_g, ..
            } => Pulse::gaussian(peak, sigma, t_g).context(ctx),
            PulseConfig::MatchedGaussian {
                peak,
                beta,
                t0,
                t_c,
                symmetric_rampoff,
                ..
            } => {
                let shape = centrifuge(1.0, beta, t0, t_c, symmetric_rampoff).context(ctx)?;
                Ok(match_pulses(&shape).context(ctx)?.with_peak(peak))
            }
        }
    }
}

fn centrifuge(
    peak: f64,
    beta: f64,
    t0: f64,
    t_c: f64,
    symmetric_rampoff: bool,
) -> rovib_core::Result<Pulse> {
    let p = Pulse::Centrifuge {
        peak,
        beta,
        t0,
        t_c,
        symmetric_rampoff,
    };
    p.validate()?;
    Ok(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationConfig {
    #[serde(default = "dt")]
    pub dt_ps: f64,
    #[serde(default = "tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub post_pulse_ps: f64,
    #[serde(default = "stride")]
    pub stride: usize,
    #[serde(default = "max_variation")]
    pub max_variation: f64,
    /// Also run the rigid rotor of the initial band.
    #[serde(default)]
    pub rigid_rotor: bool,
    /// Field-free spectral evolution of the final coefficients for this long
    /// after the run, sampled `revival_samples` times.
    #[serde(default)]
    pub revival_ps: f64,
    #[serde(default)]
    pub revival_samples: usize,
}

fn dt() -> f64 {
    1e-3
}
fn tolerance() -> f64 {
    1e-12
}
fn stride() -> usize {
    10
}
fn max_variation() -> f64 {
    0.02
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            dt_ps: dt(),
            tolerance: tolerance(),
            post_pulse_ps: 0.0,
            stride: stride(),
            max_variation: max_variation(),
            rigid_rotor: false,
            revival_ps: 0.0,
            revival_samples: 0,
        }
    }
}

impl PropagationConfig {
    pub fn plan(&self, pulse: Pulse) -> PropagationPlan {
        PropagationPlan {
            pulse,
            dt_ps: self.dt_ps,
            post_pulse_ps: self.post_pulse_ps,
            tolerance: self.tolerance,
            stride: self.stride,
            max_variation: self.max_variation,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub nu: usize,
    #[serde(default)]
    pub n: u32,
    #[serde(default)]
    pub m: i32,
}

impl From<InitialConfig> for InitialState {
    fn from(c: InitialConfig) -> Self {
        InitialState {
            nu: c.nu,
            n: c.n,
            m: c.m,
        }
    }
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { nu: 0, n: 0, m: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JobConfig {
    /// Every pulse from one initial state.
    Single {
        #[serde(default)]
        initial: InitialConfig,
    },
    /// Every pulse from (ν₀, n0, m0) for each listed ν₀.
    Nu0Scan {
        nu0: Vec<usize>,
        #[serde(default)]
        n0: u32,
        #[serde(default)]
        m0: i32,
    },
    /// For each centrifuge peak: the centrifuge (shape of the first
    /// centrifuge pulse, or the default one) and its equal-energy Gaussian,
    /// from every listed ν₀.
    IntensityScan {
        centrifuge_peaks: Vec<f64>,
        nu0: Vec<usize>,
    },
    /// Every ensemble member (N₀, |M₀|) of band ν₀ for every pulse, then the
    /// Boltzmann average of the rotational distributions.
    Thermal {
        temperature: f64,
        #[serde(default = "cutoff")]
        n_cutoff: u32,
        #[serde(default)]
        nu0: usize,
    },
    /// The refinement check on a single initial state.
    ConvergenceCheck {
        #[serde(default)]
        initial: InitialConfig,
        #[serde(default = "drift_tolerance")]
        tolerance: f64,
    },
}

fn cutoff() -> u32 {
    24
}

pub fn drift_tolerance() -> f64 {
    1e-3
}

impl JobConfig {
    pub fn name(&self) -> &'static str {
        match self {
            JobConfig::Single { .. } => "single",
            JobConfig::Nu0Scan { .. } => "nu0_scan",
            JobConfig::IntensityScan { .. } => "intensity_scan",
            JobConfig::Thermal { .. } => "thermal",
            JobConfig::ConvergenceCheck { .. } => "convergence_check",
        }
    }

    pub fn thermal_spec(&self) -> Option<ThermalSpec> {
        match *self {
            JobConfig::Thermal {
                temperature,
                n_cutoff,
                nu0,
            } => Some(ThermalSpec {
                n_cutoff,
                nu0,
                ..ThermalSpec::new(temperature)
            }),
            _ => None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config file; relative curve paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config = Self::from_toml(&text).map_err(|e| {
            CliError::Config(format!(
                "{}: {}",
                path.display(),
                e.to_string().trim_start_matches("configuration error: ")
            ))
        })?;
        if let Some(dir) = path.parent() {
            config.resolve_paths(dir);
        }
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let ModelConfig::Tabulated {
            potential,
            delta_alpha,
            alpha_perp,
            ..
        } = &mut self.model
        {
            for f in [potential, delta_alpha, alpha_perp] {
                if f.path.is_relative() {
                    f.path = base.join(&f.path);
                }
            }
        }
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir
            .clone()
            .unwrap_or_else(|| self.output_dir.join("cache"))
    }

    /// Hex SHA-256 of the canonical JSON form (defaults filled in).
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn build_model(&self) -> Result<MoleculeModel> {
        match &self.model {
            ModelConfig::Builtin {
                atomic_polarizability,
            } => {
                let m = MoleculeModel::rb2_default();
                Ok(match atomic_polarizability {
                    Some(a) => m.with_atomic_polarizability(*a),
                    None => m,
                })
            }
            ModelConfig::Tabulated {
                reduced_mass_amu,
                potential,
                delta_alpha,
                alpha_perp,
            } => {
                let load = |f: &CurveFile| {
                    load_tabulated_curve(
                        &f.path,
                        CurveUnits {
                            length: f.length,
                            value: f.value,
                        },
                    )
                    .context(|| format!("curve file {}", f.path.display()))
                };
                MoleculeModel::new(
                    *reduced_mass_amu,
                    load(potential)?,
                    load(delta_alpha)?,
                    load(alpha_perp)?,
                )
                .context(|| "model section".into())
            }
        }
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        self.grid.radial()?;
        if self.grid.n_max % 2 == 1 {
            return bad(format!("grid.n_max must be even, got {}", self.grid.n_max));
        }
        if let ModelConfig::Tabulated {
            potential,
            delta_alpha,
            alpha_perp,
            ..
        } = &self.model
        {
            for f in [potential, delta_alpha, alpha_perp] {
                if !f.path.is_file() {
                    return bad(format!("curve file {} does not exist", f.path.display()));
                }
            }
        }
        let needs_pulses = !matches!(self.job, JobConfig::IntensityScan { .. });
        if needs_pulses && self.pulses.is_empty() {
            return bad("at least one [[pulses]] entry is required".into());
        }
        let mut labels: Vec<&str> = self.pulses.iter().map(|p| p.label()).collect();
        for l in &labels {
            if l.is_empty()
                || !l
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
            {
                return bad(format!(
                    "pulse label '{l}' must be non-empty and use [A-Za-z0-9_.-]"
                ));
            }
        }
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return bad("pulse labels must be unique".into());
        }
        for p in &self.pulses {
            p.build()?;
        }
        let plan = self.propagation.plan(Pulse::default_centrifuge(1.0));
        plan.validate().context(|| "propagation section".into())?;
        if self.propagation.revival_ps < 0.0
            || (self.propagation.revival_ps > 0.0) != (self.propagation.revival_samples > 0)
        {
            return bad("revival_ps > 0 and revival_samples > 0 go together".into());
        }
        let check_initial = |i: &InitialConfig| -> Result<()> {
            if i.n % 2 == 1 || i.n < i.m.unsigned_abs() || i.n > self.grid.n_max {
                return bad(format!(
                    "initial state (ν={}, N={}, M={}) is not in the even channel set up to N = {}",
                    i.nu, i.n, i.m, self.grid.n_max
                ));
            }
            Ok(())
        };
        match &self.job {
            JobConfig::Single { initial } | JobConfig::ConvergenceCheck { initial, .. } => {
                check_initial(initial)?
            }
            JobConfig::Nu0Scan { nu0, n0, m0 } => {
                if nu0.is_empty() {
                    return bad("nu0_scan needs a non-empty nu0 list".into());
                }
                check_initial(&InitialConfig {
                    nu: 0,
                    n: *n0,
                    m: *m0,
                })?;
            }
            JobConfig::IntensityScan {
                centrifuge_peaks,
                nu0,
            } => {
                if centrifuge_peaks.is_empty() || nu0.is_empty() {
                    return bad(
                        "intensity_scan needs non-empty centrifuge_peaks and nu0 lists".into(),
                    );
                }
                if centrifuge_peaks.iter().any(|p| !(*p >= 0.0)) {
                    return bad("centrifuge peaks must be non-negative".into());
                }
            }
            JobConfig::Thermal { n_cutoff, .. } => {
                let spec = self.job.thermal_spec().expect("thermal job");
                spec.validate().context(|| "job section".into())?;
                if *n_cutoff > self.grid.n_max {
                    return bad(format!(
                        "thermal n_cutoff {} exceeds grid.n_max {}",
                        n_cutoff, self.grid.n_max
                    ));
                }
            }
        }
        if let JobConfig::ConvergenceCheck { tolerance, .. } = self.job {
            if !(tolerance > 0.0) {
                return bad("convergence tolerance must be positive".into());
            }
        }
        Ok(())
    }
}
