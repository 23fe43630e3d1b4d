//! Rigid rotor with vibrationally averaged constants, in the |N, M⟩ basis.
//!
//! H = B_ν N(N+1) − F [⟨Δα⟩_ν cos²θ + ⟨α⊥⟩_ν], propagated by short
//! iterative Lanczos over the same piecewise-constant steps as the grid
//! model.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::eigen::{AveragedConstants, BandConstants};
use crate::error::{Error, Result};
use crate::grid::{cos2_coupling, ChannelSet};
use crate::propagate::{PropagationPlan, Record};
use crate::units;

pub const DEFAULT_KRYLOV_DIMENSION: usize = 12;
pub const DEFAULT_KRYLOV_TOLERANCE: f64 = 1e-12;
const MAX_SUBDIVISION: u32 = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct RotorState {
    channels: ChannelSet,
    /// Vibrational band whose constants drive the rotor.
    pub band: usize,
    pub time_ps: f64,
    coefficients: Vec<Complex64>,
}

impl RotorState {
    /// |N, M⟩ with unit weight.
    pub fn pure(channels: ChannelSet, band: usize, n: u32) -> Result<Self> {
        let c = channels
            .index_of(n)
            .ok_or_else(|| Error::Lookup(format!("N = {n} not in rotor basis")))?;
        let mut coefficients = vec![Complex64::new(0.0, 0.0); channels.len()];
        coefficients[c] = Complex64::new(1.0, 0.0);
        Ok(Self {
            channels,
            band,
            time_ps: 0.0,
            coefficients,
        })
    }

    pub fn from_coefficients(
        channels: ChannelSet,
        band: usize,
        coefficients: Vec<Complex64>,
    ) -> Result<Self> {
        if coefficients.len() != channels.len() {
            return Err(Error::Shape(format!(
                "{} coefficients for {} rotor channels",
                coefficients.len(),
                channels.len()
            )));
        }
        Ok(Self {
            channels,
            band,
            time_ps: 0.0,
            coefficients,
        })
    }

    pub fn channels(&self) -> &ChannelSet {
        &self.channels
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coefficients
    }

    pub fn norm(&self) -> f64 {
        self.coefficients
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// |c_N|² per channel.
    pub fn populations(&self) -> Vec<f64> {
        self.coefficients.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Σ c*_N c_N' ⟨N|cos²θ|N'⟩.
    pub fn alignment(&self) -> f64 {
        rotor_alignment(self)
    }
}

pub fn rotor_alignment(state: &RotorState) -> f64 {
    let ns = state.channels.n_values();
    let m = state.channels.m();
    let c = &state.coefficients;
    let mut acc = 0.0;
    for k in 0..ns.len() {
        acc += cos2_coupling(ns[k], ns[k], m) * c[k].norm_sqr();
        if k + 1 < ns.len() {
            acc += 2.0 * cos2_coupling(ns[k], ns[k + 1], m) * (c[k].conj() * c[k + 1]).re;
        }
    }
    acc
}

/// The rotor Hamiltonian of one band on a channel set.
#[derive(Clone, Debug, PartialEq)]
pub struct RotorHamiltonian {
    channels: ChannelSet,
    constants: BandConstants,
    rotational: Vec<f64>,
    cos2_diag: Vec<f64>,
    cos2_off: Vec<f64>,
}

impl RotorHamiltonian {
    pub fn new(channels: ChannelSet, constants: BandConstants) -> Self {
        let ns = channels.n_values();
        let m = channels.m();
        let b = constants.rotational_constant;
        Self {
            rotational: ns
                .iter()
                .map(|&n| b * f64::from(n) * f64::from(n + 1))
                .collect(),
            cos2_diag: ns.iter().map(|&n| cos2_coupling(n, n, m)).collect(),
            cos2_off: ns
                .windows(2)
                .map(|w| cos2_coupling(w[0], w[1], m))
                .collect(),
            channels,
            constants,
        }
    }

    pub fn channels(&self) -> &ChannelSet {
        &self.channels
    }

    pub fn constants(&self) -> &BandConstants {
        &self.constants
    }

    /// B_ν N(N+1) in hartree, per channel.
    pub fn rotational_energies(&self) -> &[f64] {
        &self.rotational
    }

    /// out = H c for the field factor F (atomic units).
    pub fn apply(&self, field: f64, c: &[Complex64], out: &mut [Complex64]) {
        let da = self.constants.delta_alpha;
        let ap = self.constants.alpha_perp;
        let n = c.len();
        for k in 0..n {
            let mut s = c[k] * (self.rotational[k] - field * (ap + da * self.cos2_diag[k]));
            if k > 0 {
                s += c[k - 1] * (-field * da * self.cos2_off[k - 1]);
            }
            if k + 1 < n {
                s += c[k + 1] * (-field * da * self.cos2_off[k]);
            }
            out[k] = s;
        }
    }

    /// The real symmetric matrix of H at field factor F.
    pub fn dense(&self, field: f64) -> DMatrix<f64> {
        let n = self.channels.len();
        let da = self.constants.delta_alpha;
        let ap = self.constants.alpha_perp;
        let mut h = DMatrix::zeros(n, n);
        for k in 0..n {
            h[(k, k)] = self.rotational[k] - field * (ap + da * self.cos2_diag[k]);
            if k + 1 < n {
                let o = -field * da * self.cos2_off[k];
                h[(k, k + 1)] = o;
                h[(k + 1, k)] = o;
            }
        }
        h
    }
}

/// H|state⟩ for the band constants of `state.band` at `intensity` (W/cm²).
pub fn rotor_hamiltonian_apply(
    state: &RotorState,
    constants: &AveragedConstants,
    intensity: f64,
) -> Result<RotorState> {
    let band = constants.band(state.band)?;
    let ham = RotorHamiltonian::new(state.channels.clone(), *band);
    let mut out = state.clone();
    ham.apply(
        units::intensity_to_au(intensity),
        &state.coefficients,
        &mut out.coefficients,
    );
    Ok(out)
}

/// Short iterative Lanczos propagator for a [`RotorHamiltonian`].
pub struct LanczosPropagator<'a> {
    ham: &'a RotorHamiltonian,
    max_dimension: usize,
    tolerance: f64,
}

impl<'a> LanczosPropagator<'a> {
    pub fn new(ham: &'a RotorHamiltonian, max_dimension: usize, tolerance: f64) -> Self {
        Self {
            ham,
            max_dimension: max_dimension.max(2),
            tolerance,
        }
    }

    /// c ← exp(−iH(field)Δt) c, Δt in atomic units. Steps whose Krylov error
    /// estimate stays above the tolerance are subdivided.
    pub fn step(&self, c: &mut [Complex64], field: f64, dt_au: f64) -> Result<()> {
        self.step_depth(c, field, dt_au, 0)
    }

    fn step_depth(&self, c: &mut [Complex64], field: f64, dt_au: f64, depth: u32) -> Result<()> {
        match self.try_step(c, field, dt_au)? {
            Some(next) => {
                c.copy_from_slice(&next);
                Ok(())
            }
            None if depth < MAX_SUBDIVISION => {
                self.step_depth(c, field, 0.5 * dt_au, depth + 1)?;
                self.step_depth(c, field, 0.5 * dt_au, depth + 1)
            }
            None => Err(Error::Numerical(format!(
                "Lanczos step did not reach tolerance {} after {MAX_SUBDIVISION} subdivisions",
                self.tolerance
            ))),
        }
    }

    fn try_step(&self, c: &[Complex64], field: f64, dt_au: f64) -> Result<Option<Vec<Complex64>>> {
        let n = c.len();
        let beta0 = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if beta0 == 0.0 {
            return Ok(Some(c.to_vec()));
        }
        let dim_cap = self.max_dimension.min(n);
        let mut basis: Vec<Vec<Complex64>> = vec![c.iter().map(|z| z / beta0).collect()];
        let mut alphas = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut w = vec![Complex64::new(0.0, 0.0); n];
        loop {
            let j = basis.len() - 1;
            self.ham.apply(field, &basis[j], &mut w);
            let a: f64 = basis[j]
                .iter()
                .zip(&w)
                .map(|(v, x)| (v.conj() * x).re)
                .sum();
            alphas.push(a);
            for (x, v) in w.iter_mut().zip(&basis[j]) {
                *x -= v * a;
            }
            if j > 0 {
                let b = betas[j - 1];
                for (x, v) in w.iter_mut().zip(&basis[j - 1]) {
                    *x -= v * b;
                }
            }
            // Full reorthogonalization: the subspaces are tiny.
            for v in &basis {
                let p: Complex64 = v.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                for (x, y) in w.iter_mut().zip(v) {
                    *x -= y * p;
                }
            }
            let b = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let m = alphas.len();
            let coeffs = tridiagonal_exponential(&alphas, &betas, dt_au);
            let breakdown = b < 1e-14 * alphas.iter().map(|x| x.abs()).fold(1e-300, f64::max);
            // β_m |Δt| |[exp(−iT_mΔt)e₁]_m| approximates the residual norm.
            let error = b * dt_au.abs() * coeffs[m - 1].norm();
            if breakdown || m == n || error < self.tolerance {
                let mut out = vec![Complex64::new(0.0, 0.0); n];
                for (v, k) in basis.iter().zip(&coeffs) {
                    for (o, x) in out.iter_mut().zip(v) {
                        *o += x * k * beta0;
                    }
                }
                return Ok(Some(out));
            }
            if m >= dim_cap {
                return Ok(None);
            }
            betas.push(b);
            basis.push(w.iter().map(|z| z / b).collect());
        }
    }
}

/// exp(−iTΔt) e₁ for the symmetric tridiagonal T = tridiag(β, α, β).
fn tridiagonal_exponential(alphas: &[f64], betas: &[f64], dt_au: f64) -> Vec<Complex64> {
    let m = alphas.len();
    let mut t = DMatrix::zeros(m, m);
    for k in 0..m {
        t[(k, k)] = alphas[k];
        if k + 1 < m {
            t[(k, k + 1)] = betas[k];
            t[(k + 1, k)] = betas[k];
        }
    }
    let eig = SymmetricEigen::new(t);
    let q = &eig.eigenvectors;
    let phase = DVector::from_iterator(
        m,
        eig.eigenvalues
            .iter()
            .enumerate()
            .map(|(k, e)| Complex64::from_polar(1.0, -e * dt_au) * q[(0, k)]),
    );
    (0..m)
        .map(|r| (0..m).map(|k| phase[k] * q[(r, k)]).sum())
        .collect()
}

#[derive(Clone, Debug)]
pub struct RotorTrajectory {
    pub records: Vec<Record>,
    pub final_state: RotorState,
}

/// Propagates `state0` through `plan` with the constants of its band.
pub fn propagate_rotor(
    state0: &RotorState,
    plan: &PropagationPlan,
    constants: &AveragedConstants,
) -> Result<RotorTrajectory> {
    plan.validate()?;
    let n0 = state0.norm();
    if (n0 - 1.0).abs() > 1e-8 {
        return Err(Error::Config(format!(
            "initial rotor state must be normalized, norm = {n0}"
        )));
    }
    let band = constants.band(state0.band)?;
    let ham = RotorHamiltonian::new(state0.channels.clone(), *band);
    let lanczos = LanczosPropagator::new(&ham, DEFAULT_KRYLOV_DIMENSION, DEFAULT_KRYLOV_TOLERANCE);
    let steps = plan.schedule();
    let mut state = state0.clone();
    let record = |s: &RotorState, intensity: f64| Record {
        time_ps: s.time_ps,
        intensity,
        norm: s.norm(),
        alignment: s.alignment(),
    };
    let mut records = vec![record(&state, plan.pulse.intensity(0.0))];
    let origin = state0.time_ps;
    for (k, s) in steps.iter().enumerate() {
        let field = units::intensity_to_au(s.intensity);
        lanczos
            .step(&mut state.coefficients, field, units::ps_to_au(s.dt))
            .map_err(|e| Error::StepFailure {
                step: k,
                time_ps: origin + s.t_start,
                message: e.to_string(),
            })?;
        state.time_ps = origin + s.t_start + s.dt;
        if (k + 1) % plan.stride == 0 || k + 1 == steps.len() {
            let r = record(&state, s.intensity);
            if !r.norm.is_finite() {
                return Err(Error::StepFailure {
                    step: k,
                    time_ps: state.time_ps,
                    message: "rotor state contains NaN".into(),
                });
            }
            records.push(r);
        }
    }
    Ok(RotorTrajectory {
        records,
        final_state: state,
    })
}

/// Field-free evolution by the exact phases e^{−iB_ν N(N+1)t}.
pub fn evolve_free(
    state: &RotorState,
    constants: &AveragedConstants,
    t_ps: f64,
) -> Result<RotorState> {
    let band = constants.band(state.band)?;
    let t = units::ps_to_au(t_ps);
    let mut out = state.clone();
    for (c, &n) in out.coefficients.iter_mut().zip(state.channels.n_values()) {
        let e = band.rotational_constant * f64::from(n) * f64::from(n + 1);
        *c *= Complex64::from_polar(1.0, -e * t);
    }
    out.time_ps += t_ps;
    Ok(out)
}
