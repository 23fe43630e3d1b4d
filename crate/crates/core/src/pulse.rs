//! Intensity envelopes of the centrifuge-like and Gaussian pulses, their
//! fluence and envelope spectra, and the equal-bandwidth / equal-energy
//! matching between the two.
//!
//! Times are in ps, intensities in W/cm², angular frequencies in rad/ps.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format_sig;

/// Number of envelope samples used when matching bandwidths.
pub const MATCH_SAMPLES: usize = 8192;

/// Zero-padding factor applied before the envelope transform.
pub const ZERO_PADDING: usize = 4;

const FLUENCE_TOLERANCE: f64 = 1e-6;

fn default_true() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pulse {
    /// I_C⁰ · ramp(t) · sin²(βt²) on [0, t_c], with sin² ramps of length t0.
    ///
    /// The ramp-off is sin²(π(t_c − t)/2t0) by default; with
    /// `symmetric_rampoff = false` the argument is π(t_c − t)/t0, which is
    /// discontinuous at t_c − t0.
    Centrifuge {
        peak: f64,
        beta: f64,
        t0: f64,
        t_c: f64,
        #[serde(default = "default_true")]
        symmetric_rampoff: bool,
    },
    /// I_G⁰ exp(−(t − t_g)²/σ²) on [0, 2 t_g].
    Gaussian { peak: f64, sigma: f64, t_g: f64 },
}

impl Pulse {
    pub fn centrifuge(peak: f64, beta: f64, t0: f64, t_c: f64) -> Result<Self> {
        let p = Pulse::Centrifuge {
            peak,
            beta,
            t0,
            t_c,
            symmetric_rampoff: true,
        };
        p.validate()?;
        Ok(p)
    }

    /// Centrifuge with β = 0.3 ps⁻², t0 = 3 ps, t_c = 15 ps.
    pub fn default_centrifuge(peak: f64) -> Self {
        Pulse::Centrifuge {
            peak,
            beta: 0.3,
            t0: 3.0,
            t_c: 15.0,
            symmetric_rampoff: true,
        }
    }

    pub fn gaussian(peak: f64, sigma: f64, t_g: f64) -> Result<Self> {
        let p = Pulse::Gaussian { peak, sigma, t_g };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Pulse::Centrifuge {
                peak,
                beta,
                t0,
                t_c,
                ..
            } => {
                if !(peak >= 0.0 && peak.is_finite()) {
                    return Err(Error::Config(format!(
                        "peak intensity must be >= 0, got {peak}"
                    )));
                }
                if !(beta > 0.0 && t0 > 0.0 && t_c > 0.0) {
                    return Err(Error::Config(
                        "centrifuge beta, t0 and t_c must be positive".into(),
                    ));
                }
                if 2.0 * t0 > t_c {
                    return Err(Error::Config(format!(
                        "centrifuge needs 2 t0 <= t_c, got t0 = {t0}, t_c = {t_c}"
                    )));
                }
            }
            Pulse::Gaussian { peak, sigma, t_g } => {
                if !(peak >= 0.0 && peak.is_finite()) {
                    return Err(Error::Config(format!(
                        "peak intensity must be >= 0, got {peak}"
                    )));
                }
                if !(sigma > 0.0 && t_g > 0.0) {
                    return Err(Error::Config(
                        "gaussian sigma and t_g must be positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn peak(&self) -> f64 {
        match *self {
            Pulse::Centrifuge { peak, .. } | Pulse::Gaussian { peak, .. } => peak,
        }
    }

    pub fn with_peak(mut self, value: f64) -> Self {
        match &mut self {
            Pulse::Centrifuge { peak, .. } | Pulse::Gaussian { peak, .. } => *peak = value,
        }
        self
    }

    /// End of the support; the pulse starts at t = 0.
    pub fn duration(&self) -> f64 {
        match *self {
            Pulse::Centrifuge { t_c, .. } => t_c,
            Pulse::Gaussian { t_g, .. } => 2.0 * t_g,
        }
    }

    /// Instantaneous intensity, zero outside [0, duration].
    pub fn intensity(&self, t: f64) -> f64 {
        let f = self.field_envelope(t);
        f * f
    }

    /// Signed square root of the intensity: the slowly varying field
    /// amplitude whose spectrum defines the pulse bandwidth.
    ///
    /// For the centrifuge this is √ramp(t) · sin(βt²), i.e. the modulation
    /// carries the instantaneous frequency 2βt.
    pub fn field_envelope(&self, t: f64) -> f64 {
        if !(0.0..=self.duration()).contains(&t) {
            return 0.0;
        }
        match *self {
            Pulse::Centrifuge {
                peak,
                beta,
                t0,
                t_c,
                symmetric_rampoff,
            } => {
                let ramp = if t <= t0 {
                    (PI * t / (2.0 * t0)).sin()
                } else if t <= t_c - t0 {
                    1.0
                } else if symmetric_rampoff {
                    (PI * (t_c - t) / (2.0 * t0)).sin()
                } else {
                    (PI * (t_c - t) / t0).sin()
                };
                peak.sqrt() * ramp.abs() * (beta * t * t).sin()
            }
            Pulse::Gaussian { peak, sigma, t_g } => {
                let x = (t - t_g) / sigma;
                peak.sqrt() * (-0.5 * x * x).exp()
            }
        }
    }

    /// ∫ I(t) dt over the support in W·ps/cm², by adaptive Simpson
    /// quadrature on short panels (relative error well below 1e-6).
    pub fn fluence(&self) -> f64 {
        if self.peak() == 0.0 {
            return 0.0;
        }
        let end = self.duration();
        let mut breaks = vec![0.0, end];
        if let Pulse::Centrifuge { t0, t_c, .. } = *self {
            breaks = vec![0.0, t0, t_c - t0, t_c];
        }
        let f = |t: f64| self.intensity(t);
        // Panels short against the fastest modulation keep the recursion shallow.
        let panel = match *self {
            Pulse::Centrifuge { beta, t_c, .. } => 0.25 / (2.0 * beta * t_c).max(1.0),
            Pulse::Gaussian { sigma, .. } => sigma,
        };
        let scale = self.peak() * end;
        let mut total = 0.0;
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let pieces = ((b - a) / panel).ceil().max(1.0) as usize;
            let h = (b - a) / pieces as f64;
            for k in 0..pieces {
                let lo = a + k as f64 * h;
                let hi = if k + 1 == pieces { b } else { lo + h };
                total += adaptive_simpson(
                    &f,
                    lo,
                    hi,
                    FLUENCE_TOLERANCE * 1e-3 * scale / pieces as f64,
                    40,
                );
            }
        }
        total
    }

    /// Envelope spectrum from `n_samples` samples over the support.
    pub fn spectrum(&self, n_samples: usize) -> Result<Spectrum> {
        if n_samples < 1024 {
            return Err(Error::Config(format!(
                "spectrum needs at least 1024 samples, got {n_samples}"
            )));
        }
        let dt = self.duration() / (n_samples - 1) as f64;
        let samples: Vec<f64> = (0..n_samples)
            .map(|k| self.field_envelope(k as f64 * dt))
            .collect();
        Ok(envelope_spectrum(&samples, dt))
    }

    /// Tabulated I(t) on a uniform grid of spacing `dt`, as CSV.
    pub fn intensity_csv(&self, dt: f64) -> String {
        let mut out = String::from("t_ps,intensity_w_cm2\n");
        let n = (self.duration() / dt).round() as usize;
        for k in 0..=n {
            let t = (k as f64 * dt).min(self.duration());
            out.push_str(&format!(
                "{},{}\n",
                format_sig(t),
                format_sig(self.intensity(t))
            ));
        }
        out
    }
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// One-sided power spectrum of a real envelope.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    /// Angular frequencies in rad/ps, starting at 0.
    pub omega: Vec<f64>,
    /// |F(ω)|², with the non-zero bins doubled to fold in negative frequencies.
    pub density: Vec<f64>,
    /// sqrt(Σω²P / ΣP), the rms width about ω = 0.
    pub rms_width: f64,
}

impl Spectrum {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega_rad_ps,density\n");
        for (w, p) in self.omega.iter().zip(&self.density) {
            out.push_str(&format!("{},{}\n", format_sig(*w), format_sig(*p)));
        }
        out
    }
}

/// Spectrum of an arbitrary real envelope sampled with spacing `dt` (ps),
/// zero-padded by [`ZERO_PADDING`].
pub fn envelope_spectrum(samples: &[f64], dt: f64) -> Spectrum {
    let n = samples.len() * ZERO_PADDING;
    let mut buf: Vec<Complex64> = samples
        .iter()
        .map(|&x| Complex64::new(x * dt, 0.0))
        .collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let dw = 2.0 * PI / (n as f64 * dt);
    let omega: Vec<f64> = (0..=half).map(|k| k as f64 * dw).collect();
    let density: Vec<f64> = (0..=half)
        .map(|k| {
            let p = buf[k].norm_sqr();
            if k == 0 || (n % 2 == 0 && k == half) {
                p
            } else {
                2.0 * p
            }
        })
        .collect();
    let total: f64 = density.iter().sum();
    let second: f64 = omega.iter().zip(&density).map(|(w, p)| w * w * p).sum();
    let rms_width = if total > 0.0 {
        (second / total).sqrt()
    } else {
        0.0
    };
    Spectrum {
        omega,
        density,
        rms_width,
    }
}

/// Field-envelope FWHM of a Gaussian intensity exp(−t²/σ²): 2σ√(2 ln 2).
pub fn gaussian_field_fwhm(sigma: f64) -> f64 {
    2.0 * sigma * (2.0 * 2f64.ln()).sqrt()
}

/// The Gaussian partner of `centrifuge` for a given σ: centred at twice the
/// field-envelope FWHM, ending at 2 t_g, and carrying the same fluence.
pub fn gaussian_partner(centrifuge: &Pulse, sigma: f64) -> Result<Pulse> {
    centrifuge.validate()?;
    if !matches!(centrifuge, Pulse::Centrifuge { .. }) {
        return Err(Error::Config(
            "gaussian partner needs a centrifuge pulse".into(),
        ));
    }
    let t_g = 2.0 * gaussian_field_fwhm(sigma);
    let unit = Pulse::gaussian(1.0, sigma, t_g)?;
    let peak = centrifuge.fluence() / unit.fluence();
    Pulse::gaussian(peak, sigma, t_g)
}

/// Gaussian with the centrifuge's rms envelope bandwidth and fluence.
pub fn match_pulses(centrifuge: &Pulse) -> Result<Pulse> {
    centrifuge.validate()?;
    let unit_c = centrifuge.with_peak(1.0);
    let target = unit_c.spectrum(MATCH_SAMPLES)?.rms_width;
    let width = |sigma: f64| -> Result<f64> {
        let g = Pulse::gaussian(1.0, sigma, 2.0 * gaussian_field_fwhm(sigma))?;
        Ok(g.spectrum(MATCH_SAMPLES)?.rms_width - target)
    };
    let (mut lo, mut hi) = (1e-3 * centrifuge.duration(), centrifuge.duration());
    let (f_lo, f_hi) = (width(lo)?, width(hi)?);
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Calibration(format!(
            "bandwidth {target} rad/ps not bracketed by sigma in [{lo}, {hi}] ps"
        )));
    }
    // The Gaussian width decreases monotonically with σ.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if width(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * hi {
            break;
        }
    }
    gaussian_partner(centrifuge, 0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centrifuge_vanishes_at_start_and_outside() {
        let p = Pulse::default_centrifuge(1e10);
        assert_eq!(p.intensity(0.0), 0.0);
        assert_eq!(p.intensity(-1.0), 0.0);
        assert_eq!(p.intensity(15.5), 0.0);
        assert!(p.intensity(15.0).abs() < 1e-12 * 1e10);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Pulse::centrifuge(1.0, 0.3, 8.0, 15.0).is_err());
        assert!(Pulse::centrifuge(-1.0, 0.3, 3.0, 15.0).is_err());
        assert!(Pulse::gaussian(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn printed_rampoff_is_discontinuous() {
        let p = Pulse::Centrifuge {
            peak: 1.0,
            beta: 0.3,
            t0: 3.0,
            t_c: 15.0,
            symmetric_rampoff: false,
        };
        let t = 12.0;
        let before = p.intensity(t);
        let after = p.intensity(t + 1e-9);
        assert!(before > 0.1);
        assert!(after < 1e-6);
    }

    #[test]
    fn fluence_is_linear_in_peak() {
        let a = Pulse::default_centrifuge(1.0).fluence();
        let b = Pulse::default_centrifuge(3.0).fluence();
        assert!((b / a - 3.0).abs() < 1e-9);
        assert_eq!(Pulse::default_centrifuge(0.0).fluence(), 0.0);
    }

    #[test]
    fn spectrum_needs_enough_samples() {
        assert!(Pulse::default_centrifuge(1.0).spectrum(512).is_err());
    }
}
