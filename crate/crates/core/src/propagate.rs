//! Time evolution of grid wavepackets.
//!
//! The pulse is sampled piecewise constant: each step holds I(t) at its
//! midpoint, and steps are halved until the intensity varies by less than
//! `max_variation · I_peak` across them. Each step then applies the exact
//! propagator of a static Hamiltonian, either by Chebyshev expansion
//! ([`ChebyshevPropagator`]) or by Strang splitting ([`SplitOperator`], the
//! cross-check).

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{GridHamiltonian, Wavepacket, Workspace};
use crate::pulse::Pulse;
use crate::units;

/// Widening applied to the Weyl bounds before scaling H into [−1, 1].
pub const WINDOW_MARGIN: f64 = 1.05;

const MAX_HALVINGS: u32 = 12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationPlan {
    pub pulse: Pulse,
    /// Largest intensity-sampling step (ps).
    pub dt_ps: f64,
    /// Field-free evolution appended after the pulse (ps).
    pub post_pulse_ps: f64,
    /// Truncation budget for the whole run; each step's Chebyshev series
    /// stops below `tolerance / steps`.
    pub tolerance: f64,
    /// Observables are recorded every `stride` steps (and at the end).
    pub stride: usize,
    /// Largest allowed |ΔI| / I_peak within one step.
    pub max_variation: f64,
}

impl PropagationPlan {
    pub fn new(pulse: Pulse) -> Self {
        Self {
            pulse,
            dt_ps: 1e-3,
            post_pulse_ps: 0.0,
            tolerance: 1e-12,
            stride: 10,
            max_variation: 0.02,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pulse.validate()?;
        if !(self.dt_ps > 0.0 && self.dt_ps.is_finite()) {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                self.dt_ps
            )));
        }
        if !(self.post_pulse_ps >= 0.0) {
            return Err(Error::Config("post-pulse time must be >= 0".into()));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1e-3) {
            return Err(Error::Config(format!(
                "chebyshev tolerance {} out of range",
                self.tolerance
            )));
        }
        if self.stride == 0 {
            return Err(Error::Config("observable stride must be >= 1".into()));
        }
        if !(self.max_variation > 0.0) {
            return Err(Error::Config(
                "max intensity variation must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Steps covering the pulse and the post-pulse interval.
    pub fn schedule(&self) -> Vec<Step> {
        let mut steps = Vec::new();
        let end = self.pulse.duration();
        let peak = self.pulse.peak();
        let mut t = 0.0;
        while t < end - 1e-12 * end {
            let mut h = self.dt_ps.min(end - t);
            let mut halvings = 0;
            while peak > 0.0
                && halvings < MAX_HALVINGS
                && self.variation(t, h) > self.max_variation * peak
            {
                h *= 0.5;
                halvings += 1;
            }
            if end - t - h < 1e-9 * self.dt_ps {
                h = end - t;
            }
            steps.push(Step {
                t_start: t,
                dt: h,
                intensity: self.pulse.intensity(t + 0.5 * h),
            });
            t += h;
        }
        let n_post = (self.post_pulse_ps / self.dt_ps).ceil() as usize;
        if n_post > 0 {
            let h = self.post_pulse_ps / n_post as f64;
            for k in 0..n_post {
                steps.push(Step {
                    t_start: end + k as f64 * h,
                    dt: h,
                    intensity: 0.0,
                });
            }
        }
        steps
    }

    fn variation(&self, t: f64, h: f64) -> f64 {
        let samples: Vec<f64> = (0..=8)
            .map(|k| self.pulse.intensity(t + h * k as f64 / 8.0))
            .collect();
        let max = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }
}

/// One piecewise-constant interval: [t_start, t_start + dt] at `intensity`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub t_start: f64,
    pub dt: f64,
    pub intensity: f64,
}

/// Spectral window (E_min, E_max) valid for every intensity up to `peak`,
/// widened by [`WINDOW_MARGIN`] about its centre.
pub fn static_bound(ham: &GridHamiltonian, peak_intensity: f64) -> (f64, f64) {
    let (lo, hi) = ham.spectral_bounds(units::intensity_to_au(peak_intensity));
    let (lo0, hi0) = ham.spectral_bounds(0.0);
    let (lo, hi) = (lo.min(lo0), hi.max(hi0));
    let centre = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo) * WINDOW_MARGIN;
    (centre - half, centre + half)
}

/// Bessel functions J_0(x) … J_{n}(x) for x ≥ 0 by Miller's backward recurrence,
/// normalized with J_0 + 2ΣJ_{2k} = 1.
pub fn bessel_j_sequence(x: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = n.max(x as usize) + 30 + (10.0 * x.cbrt()) as usize;
    let start = start + start % 2;
    let mut above = 0.0;
    let mut current = 1e-300;
    let mut norm = 0.0;
    for k in (0..=start).rev() {
        if k <= n {
            out[k] = current;
        }
        if k % 2 == 0 {
            norm += if k == 0 { current } else { 2.0 * current };
        }
        if k == 0 {
            break;
        }
        let below = 2.0 * k as f64 / x * current - above;
        above = current;
        current = below;
        if current.abs() > 1e250 {
            let s = 1e-250;
            current *= s;
            above *= s;
            norm *= s;
            out.iter_mut().for_each(|v| *v *= s);
        }
    }
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

/// exp(−iHΔt) by Chebyshev expansion of the spectrally scaled Hamiltonian.
pub struct ChebyshevPropagator<'a> {
    ham: &'a GridHamiltonian,
    window: (f64, f64),
    tolerance: f64,
    ws: Workspace,
    prev: Vec<Complex64>,
    curr: Vec<Complex64>,
    next: Vec<Complex64>,
    acc: Vec<Complex64>,
}

impl<'a> ChebyshevPropagator<'a> {
    pub fn new(ham: &'a GridHamiltonian, window: (f64, f64), tolerance: f64) -> Result<Self> {
        if !(window.1 > window.0) {
            return Err(Error::SpectralBound(format!("empty window {window:?}")));
        }
        let len = ham.len();
        let zero = Complex64::new(0.0, 0.0);
        Ok(Self {
            ham,
            window,
            tolerance,
            ws: ham.workspace(),
            prev: vec![zero; len],
            curr: vec![zero; len],
            next: vec![zero; len],
            acc: vec![zero; len],
        })
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    /// ψ ← exp(−iH(field)Δt)ψ with Δt in atomic units (may be negative).
    /// Returns the number of Chebyshev terms used.
    pub fn step(&mut self, psi: &mut [Complex64], field: f64, dt_au: f64) -> Result<usize> {
        let centre = 0.5 * (self.window.0 + self.window.1);
        let half = 0.5 * (self.window.1 - self.window.0);
        let alpha = half * dt_au.abs();
        let k_max = (alpha + 20.0 * alpha.cbrt() + 40.0).ceil() as usize;
        let bessel = bessel_j_sequence(alpha, k_max);
        let norm0: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        // (−i)^k, with the sign of Δt folded in through J_k(−x) = (−1)^k J_k(x).
        let unit = if dt_au >= 0.0 {
            Complex64::new(0.0, -1.0)
        } else {
            Complex64::new(0.0, 1.0)
        };
        let scaled = |ws: &mut Workspace, src: &[Complex64], dst: &mut [Complex64]| {
            self.ham.apply(field, src, dst, ws);
            for (d, s) in dst.iter_mut().zip(src) {
                *d = (*d - *s * centre) / half;
            }
        };

        self.prev.copy_from_slice(psi);
        for (a, p) in self.acc.iter_mut().zip(&self.prev) {
            *a = *p * bessel[0];
        }
        scaled(&mut self.ws, &self.prev, &mut self.curr);
        let mut phase = unit;
        let c1 = phase * (2.0 * bessel[1]);
        for (a, c) in self.acc.iter_mut().zip(&self.curr) {
            *a += *c * c1;
        }

        let mut terms = 2;
        for k in 2..=k_max {
            let coeff = 2.0 * bessel[k];
            if coeff.abs() < self.tolerance && k as f64 > alpha {
                break;
            }
            scaled(&mut self.ws, &self.curr, &mut self.next);
            for (n, p) in self.next.iter_mut().zip(&self.prev) {
                *n = *n * 2.0 - *p;
            }
            phase *= unit;
            let ck = phase * coeff;
            for (a, n) in self.acc.iter_mut().zip(&self.next) {
                *a += *n * ck;
            }
            if k % 8 == 0 {
                let norm: f64 = self.next.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if !(norm <= 10.0 * norm0) {
                    return Err(Error::SpectralBound(format!(
                        "Chebyshev recursion grows (|T_{k}(H)ψ| = {norm:.3e}); spectrum leaves [{:.6e}, {:.6e}]",
                        self.window.0, self.window.1
                    )));
                }
            }
            // prev ← curr, curr ← next; the old prev becomes scratch.
            std::mem::swap(&mut self.prev, &mut self.curr);
            std::mem::swap(&mut self.curr, &mut self.next);
            terms = k + 1;
        }
        let global = Complex64::from_polar(1.0, -centre * dt_au);
        for (p, a) in psi.iter_mut().zip(&self.acc) {
            *p = *a * global;
        }
        Ok(terms)
    }
}

/// Strang splitting e^{−iVΔt/2} e^{−iTΔt} e^{−iVΔt/2}, where V holds the
/// potential, centrifugal and interaction terms (tridiagonal in channels at
/// every grid point) and T is applied through the Fourier transform.
pub struct SplitOperator<'a> {
    ham: &'a GridHamiltonian,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    buffer: Vec<Complex64>,
    /// Cached (field, Δt) and the per-point half-step matrices.
    cache: Option<(f64, f64, Vec<DMatrix<Complex64>>, Vec<Complex64>)>,
    column: Vec<Complex64>,
}

impl<'a> SplitOperator<'a> {
    pub fn new(ham: &'a GridHamiltonian) -> Self {
        let n = ham.grid().n_points;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            ham,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            buffer: vec![Complex64::new(0.0, 0.0); n],
            cache: None,
            column: vec![Complex64::new(0.0, 0.0); ham.channels().len()],
        }
    }

    fn prepare(&mut self, field: f64, dt_au: f64) {
        if let Some((f, d, _, _)) = &self.cache {
            if *f == field && *d == dt_au {
                return;
            }
        }
        let ham = self.ham;
        let n = ham.grid().n_points;
        let nch = ham.channels().len();
        let mut blocks = Vec::with_capacity(n);
        for i in 0..n {
            let mut v = DMatrix::<f64>::zeros(nch, nch);
            for c in 0..nch {
                v[(c, c)] = ham.potential()[i] + ham.centrifugal(c, i)
                    - field * (ham.alpha_perp()[i] + ham.cos2_diag()[c] * ham.delta_alpha()[i]);
                if c + 1 < nch {
                    let o = -field * ham.cos2_off()[c] * ham.delta_alpha()[i];
                    v[(c, c + 1)] = o;
                    v[(c + 1, c)] = o;
                }
            }
            let eig = SymmetricEigen::new(v);
            let phases = eig
                .eigenvalues
                .map(|e| Complex64::from_polar(1.0, -0.5 * e * dt_au));
            let q = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
            let d = DMatrix::from_diagonal(&phases);
            blocks.push(&q * d * q.transpose());
        }
        let n_inv = 1.0 / n as f64;
        let kinetic = ham
            .kinetic_diag()
            .iter()
            .map(|k| Complex64::from_polar(n_inv, -k * dt_au))
            .collect();
        self.cache = Some((field, dt_au, blocks, kinetic));
    }

    fn apply_potential(&mut self, psi: &mut [Complex64]) {
        let n = self.ham.grid().n_points;
        let nch = self.ham.channels().len();
        let blocks = &self.cache.as_ref().expect("prepared").2;
        for (i, b) in blocks.iter().enumerate() {
            for c in 0..nch {
                self.column[c] = psi[c * n + i];
            }
            for r in 0..nch {
                let mut s = Complex64::new(0.0, 0.0);
                for c in 0..nch {
                    s += b[(r, c)] * self.column[c];
                }
                psi[r * n + i] = s;
            }
        }
    }

    /// ψ ← e^{−iVΔt/2} e^{−iTΔt} e^{−iVΔt/2} ψ, Δt in atomic units.
    pub fn step(&mut self, psi: &mut [Complex64], field: f64, dt_au: f64) {
        self.prepare(field, dt_au);
        self.apply_potential(psi);
        let n = self.ham.grid().n_points;
        let kinetic = &self.cache.as_ref().expect("prepared").3;
        for chunk in psi.chunks_exact_mut(n) {
            self.buffer.copy_from_slice(chunk);
            self.forward
                .process_with_scratch(&mut self.buffer, &mut self.scratch);
            for (z, k) in self.buffer.iter_mut().zip(kinetic) {
                *z *= *k;
            }
            self.inverse
                .process_with_scratch(&mut self.buffer, &mut self.scratch);
            chunk.copy_from_slice(&self.buffer);
        }
        self.apply_potential(psi);
    }
}

/// Observables sampled along a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub time_ps: f64,
    pub intensity: f64,
    pub norm: f64,
    pub alignment: f64,
}

impl Record {
    fn of(wp: &Wavepacket, intensity: f64) -> Self {
        Self {
            time_ps: wp.time_ps,
            intensity,
            norm: wp.norm(),
            alignment: wp.alignment(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub records: Vec<Record>,
    pub final_state: Wavepacket,
    pub steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Chebyshev,
    SplitOperator,
}

/// Propagates `wp0` through `plan` with the Chebyshev propagator.
///
/// `observer` sees every recorded state (every `stride` steps, plus the
/// initial and final ones) and may stop the run by returning an error.
pub fn propagate(
    wp0: &Wavepacket,
    plan: &PropagationPlan,
    ham: &GridHamiltonian,
    observer: impl FnMut(&Record, &Wavepacket) -> Result<()>,
) -> Result<Trajectory> {
    run(wp0, plan, ham, Method::Chebyshev, observer)
}

/// Same contract as [`propagate`], stepping with Strang splitting.
pub fn propagate_split_operator(
    wp0: &Wavepacket,
    plan: &PropagationPlan,
    ham: &GridHamiltonian,
    observer: impl FnMut(&Record, &Wavepacket) -> Result<()>,
) -> Result<Trajectory> {
    run(wp0, plan, ham, Method::SplitOperator, observer)
}

fn run(
    wp0: &Wavepacket,
    plan: &PropagationPlan,
    ham: &GridHamiltonian,
    method: Method,
    mut observer: impl FnMut(&Record, &Wavepacket) -> Result<()>,
) -> Result<Trajectory> {
    plan.validate()?;
    ham.check_wavepacket(wp0)?;
    let n0 = wp0.norm();
    if (n0 - 1.0).abs() > 1e-8 {
        return Err(Error::Config(format!(
            "initial wavepacket must be normalized, norm = {n0}"
        )));
    }
    let window = static_bound(ham, plan.pulse.peak());
    let steps = plan.schedule();
    // Truncation errors add up coherently over the run; split the budget.
    let per_step = plan.tolerance / steps.len().max(1) as f64;
    let mut cheb = ChebyshevPropagator::new(ham, window, per_step)?;
    let mut split = SplitOperator::new(ham);
    let mut wp = wp0.clone();
    let mut records = vec![Record::of(&wp, plan.pulse.intensity(wp.time_ps))];
    observer(&records[0], &wp)?;
    let t_origin = wp0.time_ps;
    for (k, s) in steps.iter().enumerate() {
        let field = units::intensity_to_au(s.intensity);
        let dt_au = units::ps_to_au(s.dt);
        match method {
            Method::Chebyshev => {
                cheb.step(wp.data_mut(), field, dt_au)
                    .map_err(|e| match e {
                        Error::SpectralBound(m) => Error::SpectralBound(format!("step {k}: {m}")),
                        other => other,
                    })?;
            }
            Method::SplitOperator => split.step(wp.data_mut(), field, dt_au),
        }
        wp.time_ps = t_origin + s.t_start + s.dt;
        let last = k + 1 == steps.len();
        if (k + 1) % plan.stride == 0 || last {
            let rec = Record::of(&wp, s.intensity);
            if !rec.norm.is_finite() || !rec.alignment.is_finite() {
                return Err(Error::StepFailure {
                    step: k,
                    time_ps: wp.time_ps,
                    message: "wavepacket contains NaN or infinite values".into(),
                });
            }
            observer(&rec, &wp)?;
            records.push(rec);
        }
    }
    Ok(Trajectory {
        records,
        final_state: wp,
        steps: steps.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_sum_rule_and_known_values() {
        let j = bessel_j_sequence(2.5, 30);
        // J_0(2.5), J_1(2.5) from standard tables.
        assert!((j[0] - (-0.048_383_776_468_197_99)).abs() < 1e-14);
        assert!((j[1] - 0.497_094_102_464_274_4).abs() < 1e-14);
        let s: f64 = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
        assert!((s - 1.0).abs() < 1e-14);
        let big = bessel_j_sequence(300.0, 400);
        assert!(big.iter().all(|v| v.is_finite()));
        assert!(big[399].abs() < 1e-20);
    }

    #[test]
    fn schedule_covers_pulse_and_post_pulse() {
        let mut plan = PropagationPlan::new(Pulse::default_centrifuge(1e10));
        plan.post_pulse_ps = 0.5;
        let steps = plan.schedule();
        let total: f64 = steps.iter().map(|s| s.dt).sum();
        assert!((total - 15.5).abs() < 1e-9);
        for w in steps.windows(2) {
            assert!((w[0].t_start + w[0].dt - w[1].t_start).abs() < 1e-9);
        }
    }

    #[test]
    fn schedule_refines_fast_oscillations() {
        let mut plan = PropagationPlan::new(Pulse::default_centrifuge(1.0));
        plan.dt_ps = 0.01;
        let steps = plan.schedule();
        let late = steps
            .iter()
            .filter(|s| s.t_start > 11.0)
            .map(|s| s.dt)
            .fold(1.0, f64::min);
        let early = steps
            .iter()
            .filter(|s| s.t_start < 1.0)
            .map(|s| s.dt)
            .fold(0.0, f64::max);
        assert!(late < early);
        for s in &steps {
            assert!(plan.variation(s.t_start, s.dt) <= 0.02 + 1e-12);
        }
    }

    #[test]
    fn rejects_bad_plans() {
        let mut plan = PropagationPlan::new(Pulse::default_centrifuge(1.0));
        plan.dt_ps = 0.0;
        assert!(plan.validate().is_err());
        plan.dt_ps = 1e-3;
        plan.stride = 0;
        assert!(plan.validate().is_err());
    }
}
