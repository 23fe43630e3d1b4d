//! Propagation tasks and the jobs built from them.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use rovib_core::eigen::{AveragedConstants, EigenLibrary};
use rovib_core::format_sig;
use rovib_core::grid::{GridHamiltonian, RadialGrid, Wavepacket};
use rovib_core::molecule::MoleculeModel;
use rovib_core::observables::{
    distribution_csv, project, scalar_series_csv, thermal_average, thermal_weights, InitialState,
    ProjectionTable, ScalarSample, ThermalMember, ThermalSpec,
};
use rovib_core::propagate::{propagate, PropagationPlan};
use rovib_core::pulse::{match_pulses, Pulse};
use rovib_core::rotor::{evolve_free, propagate_rotor, RotorState};
use serde::Serialize;

use crate::cache::{load_or_build, CacheOutcome};
use crate::config::{GridConfig, PropagationConfig, RunConfig};
use crate::error::{Context, Result};
use crate::manifest::OutputDir;

/// The model, grid and M = 0 library every job starts from.
pub struct Setup {
    pub model: MoleculeModel,
    pub grid: RadialGrid,
    pub grid_config: GridConfig,
    pub library: EigenLibrary,
    pub cache: CacheOutcome,
    pub cache_path: PathBuf,
}

impl Setup {
    pub fn new(config: &RunConfig, grid_config: GridConfig) -> Result<Self> {
        let model = config.build_model()?;
        let grid = grid_config.radial()?;
        let channels = grid_config.channels(0)?;
        let cache_dir = config.cache_dir();
        let (library, cache) = load_or_build(&cache_dir, &model, grid, channels)?;
        let cache_path = crate::cache::archive_path(&cache_dir, library.hash());
        Ok(Self {
            model,
            grid,
            grid_config,
            library,
            cache,
            cache_path,
        })
    }

    /// Library and Hamiltonian of the even channels N ≥ |M|.
    pub fn sector(&self, m: i32) -> Result<Sector> {
        let channels = self.grid_config.channels(m)?;
        let library = if m == 0 {
            self.library.clone()
        } else {
            self.library
                .restrict(&channels)
                .context(|| format!("library for M = {m}"))?
        };
        let hamiltonian = GridHamiltonian::new(&self.model, self.grid, channels)
            .context(|| format!("Hamiltonian for M = {m}"))?;
        // Band constants come from N = 0 and do not depend on M.
        let constants = self
            .library
            .averaged_constants()
            .context(|| "averaged constants".into())?;
        Ok(Sector {
            library,
            hamiltonian,
            constants,
        })
    }
}

pub struct Sector {
    pub library: EigenLibrary,
    pub hamiltonian: GridHamiltonian,
    pub constants: AveragedConstants,
}

/// One propagation: a pulse applied to one initial state.
#[derive(Clone, Debug)]
pub struct Task {
    pub pulse_label: String,
    pub pulse: Pulse,
    pub initial: InitialState,
}

impl Task {
    pub fn name(&self) -> String {
        let i = self.initial;
        format!("{}_nu{}_N{}_M{}", self.pulse_label, i.nu, i.n, i.m)
    }

    fn key(&self) -> (String, InitialState) {
        (self.pulse_label.clone(), self.initial)
    }
}

/// What a finished task reports back to its job.
#[derive(Clone, Debug, Serialize)]
pub struct TaskSummary {
    pub task: String,
    pub pulse: String,
    pub kind: &'static str,
    pub peak_w_cm2: f64,
    pub initial: InitialState,
    pub steps: usize,
    pub final_time_ps: f64,
    pub final_norm: f64,
    pub final_alignment: f64,
    pub norm_captured: f64,
    pub dissociation: f64,
    /// Absent when no bound population is left.
    pub mean_rotation: Option<f64>,
    pub rotor_final_alignment: Option<f64>,
    #[serde(skip)]
    pub vib: BTreeMap<usize, f64>,
    #[serde(skip)]
    pub rot: BTreeMap<u32, f64>,
}

pub fn pulse_kind(p: &Pulse) -> &'static str {
    match p {
        Pulse::Centrifuge { .. } => "centrifuge",
        Pulse::Gaussian { .. } => "gaussian",
    }
}

/// Runs `task` and writes its files below `tasks/<name>/`.
pub fn run_task(
    sector: &Sector,
    prop: &PropagationConfig,
    task: &Task,
    out: &mut OutputDir,
) -> Result<TaskSummary> {
    let name = task.name();
    let ctx = || format!("task {name}");
    let lib = &sector.library;
    let init = task.initial;
    let state = lib.state(init.nu, init.n).context(ctx)?;
    let wp0 = Wavepacket::from_channel(*lib.grid(), lib.channels().clone(), init.n, &state.vector)
        .context(ctx)?;
    let plan = prop.plan(task.pulse);

    let mut scalars = Vec::new();
    let trajectory = propagate(&wp0, &plan, &sector.hamiltonian, |record, wp| {
        let table = project(wp, lib, init)?;
        scalars.push(ScalarSample {
            time_ps: record.time_ps,
            norm: record.norm,
            alignment: record.alignment,
            dissociation: table.dissociation_probability()?,
        });
        Ok(())
    })
    .context(ctx)?;
    let table = project(&trajectory.final_state, lib, init).context(ctx)?;
    let dissociation = table.dissociation_probability().context(ctx)?;

    let dir = format!("tasks/{name}");
    let mut trace = String::from("t_ps,model,alignment\n");
    for s in &scalars {
        trace.push_str(&format!(
            "{},full,{}\n",
            format_sig(s.time_ps),
            format_sig(s.alignment)
        ));
    }
    out.write(&format!("{dir}/scalars.csv"), scalar_series_csv(&scalars))?;
    out.write(&format!("{dir}/projection_final.csv"), table.to_csv())?;
    out.write(
        &format!("{dir}/vib_distribution.csv"),
        distribution_csv(table.vib_distributions()),
    )?;
    out.write(
        &format!("{dir}/rot_distribution.csv"),
        distribution_csv(table.rot_distribution_dense()),
    )?;
    out.write(
        &format!("{dir}/rot_distribution_sparse.csv"),
        distribution_csv(table.rot_distribution_sparse()),
    )?;

    let rotor_final = if prop.rigid_rotor {
        let s0 = RotorState::pure(lib.channels().clone(), init.nu, init.n).context(ctx)?;
        let rt = propagate_rotor(&s0, &plan, &sector.constants).context(ctx)?;
        let rows: Vec<ScalarSample> = rt
            .records
            .iter()
            .map(|r| ScalarSample {
                time_ps: r.time_ps,
                norm: r.norm,
                alignment: r.alignment,
                dissociation: 0.0,
            })
            .collect();
        for r in &rows {
            trace.push_str(&format!(
                "{},rotor,{}\n",
                format_sig(r.time_ps),
                format_sig(r.alignment)
            ));
        }
        let pops = rt.final_state.populations();
        let rot = lib.channels().n_values().iter().copied().zip(pops);
        out.write(
            &format!("{dir}/rotor_scalars.csv"),
            scalar_series_csv(&rows),
        )?;
        out.write(
            &format!("{dir}/rotor_rot_distribution.csv"),
            distribution_csv(rot),
        )?;
        Some(rt.final_state)
    } else {
        None
    };

    if prop.revival_samples > 0 {
        revival_trace(&table, rotor_final.as_ref(), sector, prop, &mut trace).context(ctx)?;
    }
    out.write(&format!("{dir}/alignment_trace.csv"), trace)?;

    let summary = TaskSummary {
        task: name.clone(),
        pulse: task.pulse_label.clone(),
        kind: pulse_kind(&task.pulse),
        peak_w_cm2: task.pulse.peak(),
        initial: init,
        steps: trajectory.steps,
        final_time_ps: trajectory.final_state.time_ps,
        final_norm: trajectory.final_state.norm(),
        final_alignment: trajectory.final_state.alignment(),
        norm_captured: table.norm_captured(),
        dissociation,
        mean_rotation: table.mean_rotation().ok(),
        rotor_final_alignment: rotor_final.as_ref().map(|s| s.alignment()),
        vib: table.vib_distributions(),
        rot: table.rot_distribution_dense().into_iter().collect(),
    };
    out.write_json(&format!("{dir}/summary.json"), &summary)?;
    Ok(summary)
}

/// Post-pulse alignment from exact free evolution of the final coefficients.
fn revival_trace(
    table: &ProjectionTable,
    rotor: Option<&RotorState>,
    sector: &Sector,
    prop: &PropagationConfig,
    trace: &mut String,
) -> rovib_core::Result<()> {
    for k in 1..=prop.revival_samples {
        let dt = prop.revival_ps * k as f64 / prop.revival_samples as f64;
        let evolved = table.evolve_free(dt);
        let a = evolved.alignment(&sector.library)?;
        trace.push_str(&format!(
            "{},full,{}\n",
            format_sig(evolved.time_ps),
            format_sig(a)
        ));
        if let Some(r) = rotor {
            let e = evolve_free(r, &sector.constants, dt)?;
            trace.push_str(&format!(
                "{},rotor,{}\n",
                format_sig(e.time_ps),
                format_sig(e.alignment())
            ));
        }
    }
    Ok(())
}

/// Runs every task, in parallel, and merges outputs in key order.
pub fn run_tasks(
    setup: &Setup,
    prop: &PropagationConfig,
    tasks: &[Task],
    out: &mut OutputDir,
) -> Result<Vec<TaskSummary>> {
    let mut tasks: Vec<&Task> = tasks.iter().collect();
    tasks.sort_by_key(|t| t.key());
    let mut sectors = BTreeMap::new();
    for t in &tasks {
        if let std::collections::btree_map::Entry::Vacant(e) = sectors.entry(t.initial.m) {
            e.insert(setup.sector(t.initial.m)?);
        }
    }
    let results: Vec<Result<(TaskSummary, OutputDir)>> = tasks
        .par_iter()
        .map(|t| {
            let mut dir = out.fork();
            let s = run_task(&sectors[&t.initial.m], prop, t, &mut dir)?;
            Ok((s, dir))
        })
        .collect();
    let mut summaries = Vec::with_capacity(results.len());
    for r in results {
        let (s, dir) = r?;
        out.merge(dir);
        summaries.push(s);
    }
    Ok(summaries)
}

pub const SUMMARY_HEADER: &str =
    "task,pulse,kind,peak_w_cm2,nu0,N0,M0,mean_rotation,dissociation,final_alignment,norm_captured\n";

/// One row per task; an undefined ⟨N⟩ is left empty.
pub fn summary_csv(rows: &[TaskSummary]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    for s in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            s.task,
            s.pulse,
            s.kind,
            format_sig(s.peak_w_cm2),
            s.initial.nu,
            s.initial.n,
            s.initial.m,
            s.mean_rotation.map(format_sig).unwrap_or_default(),
            format_sig(s.dissociation),
            format_sig(s.final_alignment),
            format_sig(s.norm_captured),
        ));
    }
    out
}

fn configured_pulses(config: &RunConfig) -> Result<Vec<(String, Pulse)>> {
    config
        .pulses
        .iter()
        .map(|p| Ok((p.label().to_string(), p.build()?)))
        .collect()
}

/// Tasks of a single, ν₀-scan or intensity-scan job.
pub fn plan_tasks(config: &RunConfig) -> Result<Vec<Task>> {
    use crate::config::JobConfig as J;
    let cross = |pulses: Vec<(String, Pulse)>, initials: Vec<InitialState>| -> Vec<Task> {
        let mut v = Vec::new();
        for (label, pulse) in &pulses {
            for i in &initials {
                v.push(Task {
                    pulse_label: label.clone(),
                    pulse: *pulse,
                    initial: *i,
                });
            }
        }
        v
    };
    Ok(match &config.job {
        J::Single { initial } | J::ConvergenceCheck { initial, .. } => {
            cross(configured_pulses(config)?, vec![(*initial).into()])
        }
        J::Nu0Scan { nu0, n0, m0 } => {
            let initials = nu0
                .iter()
                .map(|&nu| InitialState { nu, n: *n0, m: *m0 })
                .collect();
            cross(configured_pulses(config)?, initials)
        }
        J::IntensityScan {
            centrifuge_peaks,
            nu0,
        } => {
            let initials: Vec<InitialState> = nu0
                .iter()
                .map(|&nu| InitialState { nu, n: 0, m: 0 })
                .collect();
            cross(intensity_pairs(config, centrifuge_peaks)?, initials)
        }
        J::Thermal { .. } => {
            return Err(crate::error::CliError::Config(
                "thermal jobs are planned from the ensemble".into(),
            ))
        }
    })
}

/// Each centrifuge peak with its fluence-matched Gaussian. The centrifuge
/// shape is that of the first configured centrifuge, or the default one.
pub fn intensity_pairs(config: &RunConfig, peaks: &[f64]) -> Result<Vec<(String, Pulse)>> {
    let shape = configured_pulses(config)?
        .into_iter()
        .map(|(_, p)| p)
        .find(|p| matches!(p, Pulse::Centrifuge { .. }))
        .unwrap_or_else(|| Pulse::default_centrifuge(1.0))
        .with_peak(1.0);
    let gaussian = match_pulses(&shape).context(|| "matching the Gaussian partner".into())?;
    let mut out = Vec::new();
    for &peak in peaks {
        out.push((format!("cp_{peak:.4e}"), shape.with_peak(peak)));
        out.push((
            format!("gp_{peak:.4e}"),
            gaussian.with_peak(gaussian.peak() * peak),
        ));
    }
    Ok(out)
}

/// Single and scan jobs.
pub fn run_propagation_job(
    config: &RunConfig,
    setup: &Setup,
    out: &mut OutputDir,
) -> Result<Vec<TaskSummary>> {
    let tasks = plan_tasks(config)?;
    let summaries = run_tasks(setup, &config.propagation, &tasks, out)?;
    out.write("scan_summary.csv", summary_csv(&summaries))?;
    Ok(summaries)
}

pub struct ThermalOutcome {
    pub members: Vec<ThermalMember>,
    pub summaries: Vec<TaskSummary>,
    /// Ensemble-averaged 𝒩(N) per pulse label.
    pub rot: BTreeMap<String, BTreeMap<u32, f64>>,
}

/// Every ensemble member for every pulse, then the weighted distributions.
pub fn run_thermal_job(
    config: &RunConfig,
    spec: &ThermalSpec,
    setup: &Setup,
    out: &mut OutputDir,
) -> Result<ThermalOutcome> {
    let members = thermal_weights(spec, &setup.library).context(|| "thermal weights".into())?;
    out.write("thermal/weights.csv", weights_csv(&members))?;
    let mut tasks = Vec::new();
    for (label, pulse) in configured_pulses(config)? {
        for m in &members {
            tasks.push(Task {
                pulse_label: label.clone(),
                pulse,
                initial: InitialState {
                    nu: spec.nu0,
                    n: m.n0,
                    m: m.m_abs as i32,
                },
            });
        }
    }
    let summaries = run_tasks(setup, &config.propagation, &tasks, out)?;
    out.write("scan_summary.csv", summary_csv(&summaries))?;

    let mut averaged = BTreeMap::new();
    let mut rows = String::from("pulse,mean_rotation,dissociation\n");
    for p in &config.pulses {
        let label = p.label();
        let mine: Vec<&TaskSummary> = summaries.iter().filter(|s| s.pulse == label).collect();
        let key = |s: &TaskSummary| (s.initial.n, s.initial.m.unsigned_abs());
        let rot: BTreeMap<(u32, u32), BTreeMap<u32, f64>> =
            mine.iter().map(|s| (key(s), s.rot.clone())).collect();
        let vib: BTreeMap<(u32, u32), BTreeMap<usize, f64>> =
            mine.iter().map(|s| (key(s), s.vib.clone())).collect();
        let rot = thermal_average(&members, &rot)
            .context(|| format!("thermal average for pulse {label}"))?;
        let vib = thermal_average(&members, &vib)
            .context(|| format!("thermal average for pulse {label}"))?;
        let diss = weighted(&members, &mine, |s| s.dissociation);
        let bound: f64 = rot.values().sum();
        let mean = if bound > 0.0 {
            format_sig(rot.iter().map(|(n, w)| f64::from(*n) * w).sum::<f64>() / bound)
        } else {
            String::new()
        };
        rows.push_str(&format!("{label},{mean},{}\n", format_sig(diss)));
        out.write(
            &format!("thermal/{label}_rot_distribution.csv"),
            distribution_csv(rot.clone()),
        )?;
        out.write(
            &format!("thermal/{label}_vib_distribution.csv"),
            distribution_csv(vib),
        )?;
        averaged.insert(label.to_string(), rot);
    }
    out.write("thermal/summary.csv", rows)?;
    Ok(ThermalOutcome {
        members,
        summaries,
        rot: averaged,
    })
}

fn weighted(
    members: &[ThermalMember],
    results: &[&TaskSummary],
    f: impl Fn(&TaskSummary) -> f64,
) -> f64 {
    members
        .iter()
        .map(|m| {
            results
                .iter()
                .find(|s| s.initial.n == m.n0 && s.initial.m.unsigned_abs() == m.m_abs)
                .map_or(0.0, |s| m.weight * f(s))
        })
        .sum()
}

pub fn weights_csv(members: &[ThermalMember]) -> String {
    let mut out = String::from("N0,M0_abs,weight\n");
    for m in members {
        out.push_str(&format!("{},{},{}\n", m.n0, m.m_abs, format_sig(m.weight)));
    }
    out
}

/// Level tables and band constants of the M = 0 library.
pub fn write_eigen_outputs(setup: &Setup, out: &mut OutputDir) -> Result<()> {
    let lib = &setup.library;
    out.write("eigen/energies.csv", lib.energy_table_csv())?;
    let constants = lib
        .averaged_constants()
        .context(|| "averaged constants".into())?;
    let mut rows =
        String::from("nu,B_cm,rotational_period_ps,delta_alpha_au,alpha_perp_au,N_max_bound\n");
    let census = lib.bound_census();
    for b in &constants.bands {
        rows.push_str(&format!(
            "{},{},{},{},{},{}\n",
            b.nu,
            format_sig(b.rotational_constant_cm()),
            format_sig(b.rotational_period_ps()),
            format_sig(b.delta_alpha),
            format_sig(b.alpha_perp),
            census.get(&b.nu).map(|n| n.to_string()).unwrap_or_default()
        ));
    }
    out.write("eigen/bands.csv", rows)?;
    Ok(())
}

/// I(t) and spectrum tables of every configured pulse.
pub fn write_pulse_outputs(config: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let mut rows = String::from("label,kind,peak_w_cm2,duration_ps,fluence,rms_width_rad_ps\n");
    for (label, pulse) in configured_pulses(config)? {
        let spectrum = pulse
            .spectrum(8192)
            .context(|| format!("spectrum of pulse {label}"))?;
        out.write(
            &format!("pulses/{label}_intensity.csv"),
            pulse.intensity_csv(config.propagation.dt_ps),
        )?;
        out.write(&format!("pulses/{label}_spectrum.csv"), spectrum.to_csv())?;
        rows.push_str(&format!(
            "{label},{},{},{},{},{}\n",
            pulse_kind(&pulse),
            format_sig(pulse.peak()),
            format_sig(pulse.duration()),
            format_sig(pulse.fluence()),
            format_sig(spectrum.rms_width)
        ));
    }
    out.write("pulses/summary.csv", rows)?;
    Ok(())
}

/// Plan of the task with the shortest pulse, used by the refinement check.
pub fn representative(config: &RunConfig) -> Result<(Task, PropagationPlan)> {
    let tasks = match &config.job {
        crate::config::JobConfig::Thermal { nu0, .. } => configured_pulses(config)?
            .into_iter()
            .map(|(pulse_label, pulse)| Task {
                pulse_label,
                pulse,
                initial: InitialState {
                    nu: *nu0,
                    n: 0,
                    m: 0,
                },
            })
            .collect(),
        _ => plan_tasks(config)?,
    };
    let task = tasks
        .into_iter()
        .min_by(|a, b| {
            a.pulse
                .duration()
                .total_cmp(&b.pulse.duration())
                .then_with(|| a.key().cmp(&b.key()))
        })
        .ok_or_else(|| crate::error::CliError::Config("no task to check".into()))?;
    let plan = config.propagation.plan(task.pulse);
    Ok((task, plan))
}
