//! Refinement check: rerun the shortest task on a finer grid, with more
//! channels and a smaller step, and compare the observables.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::config::{GridConfig, RunConfig};
use crate::error::Result;
use crate::jobs::{representative, run_task, Setup, TaskSummary};
use crate::manifest::OutputDir;

pub const EXTRA_CHANNELS: u32 = 20;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Drifts {
    /// max_ν |Δ𝒱(ν)|
    pub vibrational: f64,
    /// max_N |Δ𝒩(N)|
    pub rotational: f64,
    pub alignment: f64,
    pub dissociation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub task: String,
    pub tolerance: f64,
    pub baseline_grid: GridConfig,
    pub refined_grid: GridConfig,
    pub baseline_dt_ps: f64,
    pub refined_dt_ps: f64,
    pub drifts: Drifts,
    /// N whose weight moved the most.
    pub worst_n: Option<u32>,
    pub passed: bool,
}

impl ConvergenceReport {
    pub fn max_drift(&self) -> f64 {
        let d = &self.drifts;
        d.vibrational
            .max(d.rotational)
            .max(d.alignment)
            .max(d.dissociation)
    }
}

fn max_diff<K: Ord + Copy>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> (f64, Option<K>) {
    let mut worst = (0.0, None);
    for k in a.keys().chain(b.keys()) {
        let d = (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs();
        if d > worst.0 {
            worst = (d, Some(*k));
        }
    }
    worst
}

pub fn compare(
    base: &TaskSummary,
    fine: &TaskSummary,
    tolerance: f64,
) -> (Drifts, Option<u32>, bool) {
    let (rotational, worst_n) = max_diff(&base.rot, &fine.rot);
    let drifts = Drifts {
        vibrational: max_diff(&base.vib, &fine.vib).0,
        rotational,
        alignment: (base.final_alignment - fine.final_alignment).abs(),
        dissociation: (base.dissociation - fine.dissociation).abs(),
    };
    let worst = drifts
        .vibrational
        .max(drifts.rotational)
        .max(drifts.alignment)
        .max(drifts.dissociation);
    (drifts, worst_n, worst < tolerance)
}

/// Runs the check and writes `check/` plus `convergence.json`. Never fails
/// on drift; callers inspect `passed`.
pub fn convergence_check(
    config: &RunConfig,
    setup: &Setup,
    tolerance: f64,
    out: &mut OutputDir,
) -> Result<ConvergenceReport> {
    let (task, _) = representative(config)?;
    let base_grid = config.grid;
    let fine_grid = GridConfig {
        n_points: base_grid.n_points * 2,
        n_max: base_grid.n_max + EXTRA_CHANNELS,
        ..base_grid
    };
    let mut fine_prop = config.propagation;
    fine_prop.dt_ps /= 2.0;
    // Revival sampling is irrelevant to the comparison.
    let mut base_prop = config.propagation;
    base_prop.revival_samples = 0;
    fine_prop.revival_samples = 0;

    let base_sector = setup.sector(task.initial.m)?;
    let mut base_out = out.nested("check/baseline");
    let base = run_task(&base_sector, &base_prop, &task, &mut base_out)?;
    out.merge(base_out);

    let fine_setup = Setup::new(config, fine_grid)?;
    let fine_sector = fine_setup.sector(task.initial.m)?;
    let mut fine_out = out.nested("check/refined");
    let fine = run_task(&fine_sector, &fine_prop, &task, &mut fine_out)?;
    out.merge(fine_out);

    let (drifts, worst_n, passed) = compare(&base, &fine, tolerance);
    let report = ConvergenceReport {
        task: task.name(),
        tolerance,
        baseline_grid: base_grid,
        refined_grid: fine_grid,
        baseline_dt_ps: base_prop.dt_ps,
        refined_dt_ps: fine_prop.dt_ps,
        drifts,
        worst_n,
        passed,
    };
    out.write_json("convergence.json", &report)?;
    Ok(report)
}
