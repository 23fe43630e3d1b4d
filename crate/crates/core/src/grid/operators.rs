use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{cos2_coupling, ChannelSet, RadialGrid, Wavepacket};
use crate::error::{Error, Result};
use crate::molecule::MoleculeModel;
use crate::units;

/// Scratch space for [`GridHamiltonian::apply`].
pub struct Workspace {
    buffer: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

/// The nuclear Hamiltonian T_R + N²/2μR² + V(R) + H_I on a grid × channel
/// basis, with everything that does not depend on time precomputed.
///
/// The interaction enters through the field factor I/(2cε₀) in atomic units
/// (see [`units::intensity_to_au`]).
#[derive(Clone)]
pub struct GridHamiltonian {
    grid: RadialGrid,
    channels: ChannelSet,
    mass_au: f64,
    points: Vec<f64>,
    /// ħ²k²/2μ divided by n (inverse-transform normalization folded in).
    kinetic: Vec<f64>,
    potential: Vec<f64>,
    /// ħ²/(2μR²).
    inv_r2: Vec<f64>,
    rot: Vec<f64>,
    delta_alpha: Vec<f64>,
    alpha_perp: Vec<f64>,
    cos2_diag: Vec<f64>,
    cos2_off: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GridHamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridHamiltonian")
            .field("grid", &self.grid)
            .field("channels", &self.channels.len())
            .field("mass_au", &self.mass_au)
            .finish()
    }
}

impl GridHamiltonian {
    pub fn new(model: &MoleculeModel, grid: RadialGrid, channels: ChannelSet) -> Result<Self> {
        let points = grid.points();
        let sampled = model.sample(&points)?;
        Ok(Self::from_arrays(
            grid,
            channels,
            model.reduced_mass_au(),
            sampled.potential,
            sampled.delta_alpha,
            sampled.alpha_perp,
        ))
    }

    /// Builds the operator from explicit samples of V, Δα and α⊥ (atomic units).
    pub fn from_arrays(
        grid: RadialGrid,
        channels: ChannelSet,
        mass_au: f64,
        potential: Vec<f64>,
        delta_alpha: Vec<f64>,
        alpha_perp: Vec<f64>,
    ) -> Self {
        let n = grid.n_points;
        assert_eq!(potential.len(), n);
        assert_eq!(delta_alpha.len(), n);
        assert_eq!(alpha_perp.len(), n);
        let points = grid.points();
        let kinetic = grid
            .wavenumbers()
            .iter()
            .map(|k| k * k / (2.0 * mass_au) / n as f64)
            .collect();
        let inv_r2 = points
            .iter()
            .map(|r| 1.0 / (2.0 * mass_au * r * r))
            .collect();
        let ns = channels.n_values();
        let m = channels.m();
        let rot = ns
            .iter()
            .map(|&nn| f64::from(nn) * (f64::from(nn) + 1.0))
            .collect();
        let cos2_diag = ns.iter().map(|&nn| cos2_coupling(nn, nn, m)).collect();
        let cos2_off = ns
            .windows(2)
            .map(|w| cos2_coupling(w[0], w[1], m))
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Self {
            grid,
            channels,
            mass_au,
            points,
            kinetic,
            potential,
            inv_r2,
            rot,
            delta_alpha,
            alpha_perp,
            cos2_diag,
            cos2_off,
            forward,
            inverse,
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn channels(&self) -> &ChannelSet {
        &self.channels
    }

    pub fn mass_au(&self) -> f64 {
        self.mass_au
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn delta_alpha(&self) -> &[f64] {
        &self.delta_alpha
    }

    pub fn alpha_perp(&self) -> &[f64] {
        &self.alpha_perp
    }

    pub fn cos2_diag(&self) -> &[f64] {
        &self.cos2_diag
    }

    pub fn cos2_off(&self) -> &[f64] {
        &self.cos2_off
    }

    /// N(N+1)ħ²/(2μR²) for channel `c` at point `i`.
    pub fn centrifugal(&self, c: usize, i: usize) -> f64 {
        self.rot[c] * self.inv_r2[i]
    }

    /// ħ²k²/2μ in FFT order (without the transform normalization).
    pub fn kinetic_diag(&self) -> Vec<f64> {
        let n = self.grid.n_points as f64;
        self.kinetic.iter().map(|k| k * n).collect()
    }

    pub fn len(&self) -> usize {
        self.grid.n_points * self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn workspace(&self) -> Workspace {
        let n = self.grid.n_points;
        let scratch = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        Workspace {
            buffer: vec![Complex64::new(0.0, 0.0); n],
            scratch: vec![Complex64::new(0.0, 0.0); scratch],
        }
    }

    pub fn check_wavepacket(&self, wp: &Wavepacket) -> Result<()> {
        if wp.grid() != &self.grid || wp.channels() != &self.channels {
            return Err(Error::Shape(format!(
                "wavepacket ({} points × {} channels) does not match operator ({} × {})",
                wp.n_points(),
                wp.channels().len(),
                self.grid.n_points,
                self.channels.len()
            )));
        }
        Ok(())
    }

    /// out = T_R ψ, channel by channel through the Fourier transform.
    pub fn apply_kinetic(&self, psi: &[Complex64], out: &mut [Complex64], ws: &mut Workspace) {
        let n = self.grid.n_points;
        for (src, dst) in psi.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            self.kinetic_channel(src, ws);
            dst.copy_from_slice(&ws.buffer);
        }
    }

    fn kinetic_channel(&self, src: &[Complex64], ws: &mut Workspace) {
        ws.buffer.copy_from_slice(src);
        self.forward
            .process_with_scratch(&mut ws.buffer, &mut ws.scratch);
        for (z, k) in ws.buffer.iter_mut().zip(&self.kinetic) {
            *z *= *k;
        }
        self.inverse
            .process_with_scratch(&mut ws.buffer, &mut ws.scratch);
    }

    /// out = N(N+1)/(2μR²) ψ.
    pub fn apply_centrifugal(&self, psi: &[Complex64], out: &mut [Complex64]) {
        let n = self.grid.n_points;
        for (c, (src, dst)) in psi.chunks_exact(n).zip(out.chunks_exact_mut(n)).enumerate() {
            let rot = self.rot[c];
            for ((d, s), w) in dst.iter_mut().zip(src).zip(&self.inv_r2) {
                *d = *s * (rot * w);
            }
        }
    }

    /// out = −F [Δα(R) cos²θ + α⊥(R)] ψ with F = I/(2cε₀) in atomic units.
    pub fn apply_interaction(&self, field: f64, psi: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        self.accumulate_interaction(field, psi, out);
    }

    fn accumulate_interaction(&self, field: f64, psi: &[Complex64], out: &mut [Complex64]) {
        if field == 0.0 {
            return;
        }
        let n = self.grid.n_points;
        let nch = self.channels.len();
        for c in 0..nch {
            let dst = &mut out[c * n..(c + 1) * n];
            let src = &psi[c * n..(c + 1) * n];
            let d = self.cos2_diag[c];
            for i in 0..n {
                let w = -field * (self.alpha_perp[i] + d * self.delta_alpha[i]);
                dst[i] += src[i] * w;
            }
            if c > 0 {
                let o = self.cos2_off[c - 1];
                let below = &psi[(c - 1) * n..c * n];
                for i in 0..n {
                    dst[i] += below[i] * (-field * o * self.delta_alpha[i]);
                }
            }
            if c + 1 < nch {
                let o = self.cos2_off[c];
                let above = &psi[(c + 1) * n..(c + 2) * n];
                for i in 0..n {
                    dst[i] += above[i] * (-field * o * self.delta_alpha[i]);
                }
            }
        }
    }

    /// out = H ψ for the field factor `field` (atomic units).
    pub fn apply(&self, field: f64, psi: &[Complex64], out: &mut [Complex64], ws: &mut Workspace) {
        let n = self.grid.n_points;
        let nch = self.channels.len();
        debug_assert_eq!(psi.len(), n * nch);
        for c in 0..nch {
            let src = &psi[c * n..(c + 1) * n];
            self.kinetic_channel(src, ws);
            let rot = self.rot[c];
            let d = self.cos2_diag[c];
            let dst = &mut out[c * n..(c + 1) * n];
            for i in 0..n {
                let diag = self.potential[i] + rot * self.inv_r2[i]
                    - field * (self.alpha_perp[i] + d * self.delta_alpha[i]);
                dst[i] = ws.buffer[i] + src[i] * diag;
            }
            if field != 0.0 {
                if c > 0 {
                    let o = -field * self.cos2_off[c - 1];
                    let below = &psi[(c - 1) * n..c * n];
                    for i in 0..n {
                        dst[i] += below[i] * (o * self.delta_alpha[i]);
                    }
                }
                if c + 1 < nch {
                    let o = -field * self.cos2_off[c];
                    let above = &psi[(c + 1) * n..(c + 2) * n];
                    for i in 0..n {
                        dst[i] += above[i] * (o * self.delta_alpha[i]);
                    }
                }
            }
        }
    }

    /// Rigorous spectral bounds of H at the field factor `field`, from Weyl's
    /// inequality applied to T, the diagonal V + centrifugal part and the
    /// per-point interaction blocks (whose cos² factor has spectrum in [0, 1]).
    pub fn spectral_bounds(&self, field: f64) -> (f64, f64) {
        let n = self.grid.n_points;
        let t_max = self.grid.kinetic_max(self.mass_au);
        let mut d_min = f64::INFINITY;
        let mut d_max = f64::NEG_INFINITY;
        for c in 0..self.channels.len() {
            for i in 0..n {
                let v = self.potential[i] + self.centrifugal(c, i);
                d_min = d_min.min(v);
                d_max = d_max.max(v);
            }
        }
        let mut w_min = 0.0f64;
        let mut w_max = 0.0f64;
        for i in 0..n {
            let a = -field * self.alpha_perp[i];
            let b = -field * (self.alpha_perp[i] + self.delta_alpha[i]);
            w_min = w_min.min(a.min(b));
            w_max = w_max.max(a.max(b));
        }
        (d_min + w_min, t_max + d_max + w_max)
    }
}

fn wrap(wp: &Wavepacket, data: Vec<Complex64>) -> Wavepacket {
    let mut out = Wavepacket::from_data(*wp.grid(), wp.channels().clone(), data)
        .expect("same shape as input");
    out.time_ps = wp.time_ps;
    out
}

fn check_grid(wp: &Wavepacket, grid: &RadialGrid) -> Result<()> {
    if wp.grid() != grid {
        return Err(Error::Shape(format!(
            "wavepacket grid {:?} does not match {:?}",
            wp.grid(),
            grid
        )));
    }
    Ok(())
}

/// (−ħ²/2μ) ∂²/∂R² applied channel-wise; the input is left unchanged.
pub fn apply_radial_kinetic(
    wp: &Wavepacket,
    grid: &RadialGrid,
    mass_au: f64,
) -> Result<Wavepacket> {
    check_grid(wp, grid)?;
    let n = grid.n_points;
    let zeros = vec![0.0; n];
    let h = GridHamiltonian::from_arrays(
        *grid,
        wp.channels().clone(),
        mass_au,
        zeros.clone(),
        zeros.clone(),
        zeros,
    );
    let mut ws = h.workspace();
    let mut out = vec![Complex64::new(0.0, 0.0); wp.data().len()];
    h.apply_kinetic(wp.data(), &mut out, &mut ws);
    Ok(wrap(wp, out))
}

/// Scales channel N pointwise by ħ²N(N+1)/(2μR_i²).
pub fn apply_centrifugal(wp: &Wavepacket, grid: &RadialGrid, mass_au: f64) -> Result<Wavepacket> {
    check_grid(wp, grid)?;
    let n = grid.n_points;
    let zeros = vec![0.0; n];
    let h = GridHamiltonian::from_arrays(
        *grid,
        wp.channels().clone(),
        mass_au,
        zeros.clone(),
        zeros.clone(),
        zeros,
    );
    let mut out = vec![Complex64::new(0.0, 0.0); wp.data().len()];
    h.apply_centrifugal(wp.data(), &mut out);
    Ok(wrap(wp, out))
}

/// −(I/2cε₀)[Δα(R) cos²θ + α⊥(R)] ψ for an intensity in W/cm².
pub fn apply_interaction(
    wp: &Wavepacket,
    model: &MoleculeModel,
    intensity_w_cm2: f64,
) -> Result<Wavepacket> {
    if !(intensity_w_cm2 >= 0.0) {
        return Err(Error::Config(format!(
            "intensity must be non-negative, got {intensity_w_cm2}"
        )));
    }
    let points = wp.grid().points();
    let sampled = model.sample(&points)?;
    let n = wp.n_points();
    let h = GridHamiltonian::from_arrays(
        *wp.grid(),
        wp.channels().clone(),
        model.reduced_mass_au(),
        vec![0.0; n],
        sampled.delta_alpha,
        sampled.alpha_perp,
    );
    let mut out = vec![Complex64::new(0.0, 0.0); wp.data().len()];
    h.apply_interaction(units::intensity_to_au(intensity_w_cm2), wp.data(), &mut out);
    Ok(wrap(wp, out))
}
