//! Radial Fourier grid × even-N angular channel basis at fixed M.

mod operators;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use operators::{
    apply_centrifugal, apply_interaction, apply_radial_kinetic, GridHamiltonian, Workspace,
};

/// Equally spaced periodic radial grid: `points[i] = r_min + i·spacing`,
/// `spacing = (r_max − r_min)/n_points`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub n_points: usize,
}

impl RadialGrid {
    pub fn new(r_min: f64, r_max: f64, n_points: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min) {
            return Err(Error::Config(format!(
                "radial grid needs 0 < r_min < r_max, got [{r_min}, {r_max}]"
            )));
        }
        if n_points < 16 {
            return Err(Error::Config(format!(
                "radial grid needs at least 16 points, got {n_points}"
            )));
        }
        Ok(Self {
            r_min,
            r_max,
            n_points,
        })
    }

    pub fn spacing(&self) -> f64 {
        (self.r_max - self.r_min) / self.n_points as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let dr = self.spacing();
        (0..self.n_points)
            .map(|i| self.r_min + i as f64 * dr)
            .collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points as i64;
        let dk = 2.0 * std::f64::consts::PI / (self.r_max - self.r_min);
        (0..n)
            .map(|j| if j < (n + 1) / 2 { j } else { j - n })
            .map(|j| j as f64 * dk)
            .collect()
    }

    /// Largest kinetic eigenvalue ħ²k²/2μ of the grid.
    pub fn kinetic_max(&self, mass_au: f64) -> f64 {
        self.wavenumbers()
            .iter()
            .map(|k| k * k / (2.0 * mass_au))
            .fold(0.0, f64::max)
    }
}

/// Rotational channels N (even, ≥ |M|, strictly increasing) at fixed M.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelSet {
    m: i32,
    n_values: Vec<u32>,
}

impl ChannelSet {
    /// All even N with |M| ≤ N ≤ n_max.
    pub fn even(m: i32, n_max: u32) -> Result<Self> {
        let start = m.unsigned_abs().next_multiple_of(2);
        let n_values: Vec<u32> = (start..=n_max).step_by(2).collect();
        Self::from_list(m, n_values)
    }

    pub fn from_list(m: i32, n_values: Vec<u32>) -> Result<Self> {
        if n_values.is_empty() {
            return Err(Error::Config(format!(
                "no even N ≥ |M| = {} in channel set",
                m.abs()
            )));
        }
        for &n in &n_values {
            if n % 2 != 0 {
                return Err(Error::Config(format!("channel N = {n} is odd")));
            }
            if n < m.unsigned_abs() {
                return Err(Error::Config(format!(
                    "channel N = {n} is below |M| = {}",
                    m.abs()
                )));
            }
        }
        if n_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "channel N values must be strictly increasing".into(),
            ));
        }
        Ok(Self { m, n_values })
    }

    pub fn m(&self) -> i32 {
        self.m
    }

    pub fn n_values(&self) -> &[u32] {
        &self.n_values
    }

    pub fn len(&self) -> usize {
        self.n_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_values.is_empty()
    }

    pub fn n_max(&self) -> u32 {
        *self.n_values.last().expect("channel set is never empty")
    }

    pub fn index_of(&self, n: u32) -> Option<usize> {
        self.n_values.binary_search(&n).ok()
    }
}

/// ⟨N M|cos²θ|N' M⟩ for spherical harmonics. Nonzero only for N' ∈ {N, N ± 2}.
pub fn cos2_coupling(n: u32, n_prime: u32, m: i32) -> f64 {
    let m2 = f64::from(m) * f64::from(m);
    let am = m.unsigned_abs();
    if n < am || n_prime < am {
        return 0.0;
    }
    let (lo, hi) = if n <= n_prime {
        (n, n_prime)
    } else {
        (n_prime, n)
    };
    let l = f64::from(lo);
    match hi - lo {
        0 => {
            let ll = l * (l + 1.0);
            1.0 / 3.0 + 2.0 / 3.0 * (ll - 3.0 * m2) / ((2.0 * l + 3.0) * (2.0 * l - 1.0))
        }
        2 => {
            let a = ((l + 1.0) * (l + 1.0) - m2) * ((l + 2.0) * (l + 2.0) - m2);
            a.sqrt() / ((2.0 * l + 3.0) * ((2.0 * l + 1.0) * (2.0 * l + 5.0)).sqrt())
        }
        _ => 0.0,
    }
}

/// Reduced radial functions f_N(R) on the grid, one block per channel;
/// Ψ = Σ_N f_N(R)/R · Y_{N,M}.
#[derive(Clone, Debug, PartialEq)]
pub struct Wavepacket {
    grid: RadialGrid,
    channels: ChannelSet,
    pub time_ps: f64,
    data: Vec<Complex64>,
}

impl Wavepacket {
    pub fn zeros(grid: RadialGrid, channels: ChannelSet) -> Self {
        let data = vec![Complex64::new(0.0, 0.0); grid.n_points * channels.len()];
        Self {
            grid,
            channels,
            time_ps: 0.0,
            data,
        }
    }

    pub fn from_data(grid: RadialGrid, channels: ChannelSet, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.n_points * channels.len() {
            return Err(Error::Shape(format!(
                "data length {} does not match {} points × {} channels",
                data.len(),
                grid.n_points,
                channels.len()
            )));
        }
        Ok(Self {
            grid,
            channels,
            time_ps: 0.0,
            data,
        })
    }

    /// A wavepacket occupying a single channel with a real radial function.
    pub fn from_channel(
        grid: RadialGrid,
        channels: ChannelSet,
        n: u32,
        values: &[f64],
    ) -> Result<Self> {
        let c = channels
            .index_of(n)
            .ok_or_else(|| Error::Lookup(format!("channel N = {n} not in channel set")))?;
        if values.len() != grid.n_points {
            return Err(Error::Shape(format!(
                "radial function has {} points, grid has {}",
                values.len(),
                grid.n_points
            )));
        }
        let mut wp = Self::zeros(grid, channels);
        for (z, &v) in wp.channel_mut(c).iter_mut().zip(values) {
            *z = Complex64::new(v, 0.0);
        }
        Ok(wp)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn channels(&self) -> &ChannelSet {
        &self.channels
    }

    pub fn n_points(&self) -> usize {
        self.grid.n_points
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn channel(&self, c: usize) -> &[Complex64] {
        let n = self.grid.n_points;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.grid.n_points;
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Σ_N Σ_i |f_N(R_i)|² ΔR.
    pub fn norm_squared(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.spacing()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Numerical(format!(
                "cannot normalize wavepacket of norm {norm}"
            )));
        }
        let s = 1.0 / norm;
        self.data.iter_mut().for_each(|z| *z *= s);
        Ok(())
    }

    /// ⟨self|other⟩ with the grid weight.
    pub fn inner(&self, other: &Wavepacket) -> Result<Complex64> {
        self.check_compatible(other)?;
        let s: Complex64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.spacing())
    }

    pub fn check_compatible(&self, other: &Wavepacket) -> Result<()> {
        if self.grid != other.grid || self.channels != other.channels {
            return Err(Error::Shape(
                "wavepackets live on different grids or channel sets".into(),
            ));
        }
        Ok(())
    }

    /// Σ over channel pairs of radial overlaps times ⟨N|cos²θ|N'⟩.
    pub fn alignment(&self) -> f64 {
        let m = self.channels.m();
        let ns = self.channels.n_values();
        let mut acc = 0.0;
        for c in 0..ns.len() {
            let fc = self.channel(c);
            let diag: f64 = fc.iter().map(|z| z.norm_sqr()).sum();
            acc += cos2_coupling(ns[c], ns[c], m) * diag;
            if c + 1 < ns.len() {
                let off = cos2_coupling(ns[c], ns[c + 1], m);
                if off != 0.0 {
                    let cross: Complex64 = fc
                        .iter()
                        .zip(self.channel(c + 1))
                        .map(|(a, b)| a.conj() * b)
                        .sum();
                    acc += 2.0 * off * cross.re;
                }
            }
        }
        acc * self.grid.spacing()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Gauss–Legendre nodes and weights on [−1, 1] by Newton iteration.
    fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
                loop {
                    let (mut p0, mut p1) = (1.0, x);
                    for k in 2..=n {
                        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    let dx = p1 / dp;
                    x -= dx;
                    if dx.abs() < 1e-15 {
                        let w = 2.0 / ((1.0 - x * x) * dp * dp);
                        return (x, w);
                    }
                }
            })
            .collect()
    }

    /// Normalized θ-part of Y_{l,m}: ∫ Θ_lm² d(cosθ) · 2π = 1.
    fn theta_lm(l: u32, m: u32, x: f64) -> f64 {
        // Normalized associated Legendre recurrence.
        let mut pmm = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
        let s = (1.0 - x * x).sqrt();
        for k in 1..=m {
            pmm *= -s * ((2 * k + 1) as f64 / (2 * k) as f64).sqrt();
        }
        if l == m {
            return pmm;
        }
        let mut pm1 = x * ((2 * m + 3) as f64).sqrt() * pmm;
        if l == m + 1 {
            return pm1;
        }
        let mut p = 0.0;
        for ll in m + 2..=l {
            let (lf, mf) = (ll as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                .sqrt();
            p = a * (x * pm1 - b * pmm);
            pmm = pm1;
            pm1 = p;
        }
        p
    }

    fn quadrature_cos2(l: u32, lp: u32, m: u32) -> f64 {
        gauss_legendre(64)
            .iter()
            .map(|&(x, w)| {
                2.0 * std::f64::consts::PI * w * theta_lm(l, m, x) * x * x * theta_lm(lp, m, x)
            })
            .sum()
    }

    #[test]
    fn cos2_known_values() {
        assert!((cos2_coupling(0, 0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((cos2_coupling(0, 2, 0) - 2.0 / (3.0 * 5f64.sqrt())).abs() < 1e-15);
        assert_eq!(cos2_coupling(0, 4, 0), 0.0);
        assert!((cos2_coupling(2, 2, 0) - 11.0 / 21.0).abs() < 1e-15);
        assert_eq!(cos2_coupling(2, 0, 0), cos2_coupling(0, 2, 0));
    }

    #[test]
    fn cos2_matches_quadrature() {
        for m in [0u32, 1, 3, 6] {
            for l in m..=20 {
                for lp in [l, l + 2] {
                    let q = quadrature_cos2(l, lp, m);
                    let a = cos2_coupling(l, lp, m as i32);
                    assert!((q - a).abs() < 1e-12, "l={l} l'={lp} m={m}: {q} vs {a}");
                }
            }
        }
    }

    #[test]
    fn channel_set_even_only() {
        let c = ChannelSet::even(0, 10).unwrap();
        assert_eq!(c.n_values(), &[0, 2, 4, 6, 8, 10]);
        let c = ChannelSet::even(-3, 9).unwrap();
        assert_eq!(c.n_values(), &[4, 6, 8]);
        assert!(ChannelSet::from_list(0, vec![0, 3]).is_err());
        assert!(ChannelSet::from_list(2, vec![0, 2]).is_err());
        assert!(ChannelSet::from_list(0, vec![2, 0]).is_err());
        assert!(ChannelSet::even(6, 4).is_err());
    }

    #[test]
    fn grid_layout() {
        let g = RadialGrid::new(6.0, 60.0, 512).unwrap();
        let p = g.points();
        assert_eq!(p[0], 6.0);
        assert!((g.spacing() - 54.0 / 512.0).abs() < 1e-15);
        assert!((p[511] - (60.0 - g.spacing())).abs() < 1e-12);
        assert!(RadialGrid::new(0.0, 10.0, 64).is_err());
        assert!(RadialGrid::new(5.0, 4.0, 64).is_err());
        assert!(RadialGrid::new(1.0, 4.0, 8).is_err());
    }

    #[test]
    fn isotropic_alignment() {
        let g = RadialGrid::new(1.0, 9.0, 32).unwrap();
        let ch = ChannelSet::even(0, 4).unwrap();
        let f: Vec<f64> = g
            .points()
            .iter()
            .map(|r| (-(r - 5.0) * (r - 5.0)).exp())
            .collect();
        let mut wp = Wavepacket::from_channel(g, ch, 0, &f).unwrap();
        wp.normalize().unwrap();
        assert!((wp.alignment() - 1.0 / 3.0).abs() < 1e-15);
    }
}
