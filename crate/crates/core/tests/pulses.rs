use rovib_core::pulse::{envelope_spectrum, gaussian_partner, match_pulses, Pulse};

fn first_minimum(omega: &[f64], density: &[f64]) -> f64 {
    for k in 1..density.len() - 1 {
        if density[k] < density[k - 1] && density[k] <= density[k + 1] {
            return omega[k];
        }
    }
    panic!("no minimum");
}

#[test]
fn centrifuge_value_inside_flat_part() {
    let p = Pulse::default_centrifuge(2.5e10);
    let expected = 2.5e10 * (0.3f64 * 49.0).sin().powi(2);
    assert!((p.intensity(7.0) - expected).abs() < 1e-12 * 2.5e10);
}

#[test]
fn centrifuge_is_continuous_at_segment_joins() {
    let p = Pulse::default_centrifuge(1.0);
    for &t in &[3.0, 12.0] {
        let eps = 1e-14;
        let jump = (p.intensity(t + eps) - p.intensity(t - eps)).abs();
        assert!(jump < 1e-12, "jump {jump} at {t}");
    }
}

#[test]
fn gaussian_fluence_matches_closed_form() {
    let p = Pulse::gaussian(3.0e11, 0.142, 0.671).unwrap();
    let exact = 3.0e11 * 0.142 * std::f64::consts::PI.sqrt();
    // The support [0, 2 t_g] cuts the tails beyond 4.7 σ (erfc(4.7) ~ 1e-11).
    assert!(((p.fluence() - exact) / exact).abs() < 1e-8);
}

#[test]
fn centrifuge_fluence_against_fine_trapezoid() {
    let p = Pulse::default_centrifuge(1.0);
    let n = 2_000_000;
    let h = 15.0 / n as f64;
    let mut sum = 0.5 * (p.intensity(0.0) + p.intensity(15.0));
    for k in 1..n {
        sum += p.intensity(k as f64 * h);
    }
    let trap = sum * h;
    assert!(((p.fluence() - trap) / trap).abs() < 1e-6);
}

#[test]
fn fluence_is_shift_invariant() {
    let a = Pulse::gaussian(1.0, 0.2, 1.0).unwrap().fluence();
    let b = Pulse::gaussian(1.0, 0.2, 1.5).unwrap().fluence();
    assert!(((a - b) / a).abs() < 1e-8);
}

#[test]
fn gaussian_time_bandwidth_product() {
    let sigma = 0.2;
    let p = Pulse::gaussian(1.0, sigma, 2.0).unwrap();
    let spec = p.spectrum(4096).unwrap();
    // Field exp(-t²/2σ²): |E|² has rms width σ/√2, so Δt·Δω = 1/2.
    let dt_rms = sigma / 2f64.sqrt();
    let product = dt_rms * spec.rms_width;
    assert!((product - 0.5).abs() < 0.01, "product {product}");
}

#[test]
fn bandwidth_is_shift_invariant() {
    let a = Pulse::gaussian(1.0, 0.2, 1.5)
        .unwrap()
        .spectrum(4096)
        .unwrap()
        .rms_width;
    let b = Pulse::gaussian(1.0, 0.2, 2.5)
        .unwrap()
        .spectrum(4096)
        .unwrap()
        .rms_width;
    assert!(((a - b) / a).abs() < 1e-6);
}

#[test]
fn centrifuge_spectrum_ends_near_final_chirp_frequency() {
    let p = Pulse::default_centrifuge(1.0);
    let spec = p.spectrum(16384).unwrap();
    // sin(βt²) has instantaneous frequency 2βt, reaching 2β t_c = 9 rad/ps.
    let w_max = 2.0 * 0.3 * 15.0;
    let total: f64 = spec.density.iter().sum();
    let beyond: f64 = spec
        .omega
        .iter()
        .zip(&spec.density)
        .filter(|(w, _)| **w > 1.15 * w_max)
        .map(|(_, p)| p)
        .sum();
    assert!(beyond / total < 1e-3, "fraction beyond {}", beyond / total);
    let band: f64 = spec
        .omega
        .iter()
        .zip(&spec.density)
        .filter(|(w, _)| **w > 0.8 * w_max && **w < w_max)
        .map(|(_, p)| p)
        .sum();
    assert!(band / total > 0.05);
}

#[test]
fn rectangle_main_lobe_scales_inversely_with_length() {
    let dt = 1e-3;
    let lobe = |t: f64| {
        let n = (t / dt) as usize;
        let spec = envelope_spectrum(&vec![1.0; n], dt);
        first_minimum(&spec.omega, &spec.density)
    };
    let (a, b) = (lobe(2.0), lobe(4.0));
    assert!((a / b - 2.0).abs() < 0.1);
    // First null of a rectangle of length T sits at 2π/T.
    assert!((a - std::f64::consts::PI).abs() / std::f64::consts::PI < 0.05);
}

#[test]
fn matched_gaussian_reproduces_reference_numbers() {
    let c = Pulse::default_centrifuge(1.0);
    let g = match_pulses(&c).unwrap();
    let Pulse::Gaussian { peak, sigma, t_g } = g else {
        panic!()
    };
    assert!((sigma - 0.142).abs() < 0.01, "sigma {sigma}");
    assert!((t_g - 0.671).abs() < 0.01, "t_g {t_g}");
    assert!((peak - 24.05).abs() / 24.05 < 0.005, "ratio {peak}");
    assert!(((g.fluence() - c.fluence()) / c.fluence()).abs() < 1e-3);
    let wc = c.spectrum(8192).unwrap().rms_width;
    let wg = g.spectrum(8192).unwrap().rms_width;
    assert!(((wc - wg) / wc).abs() < 0.01);
    let start = g.intensity(0.0) / peak;
    assert!(start > 1e-10 && start < 5e-10, "I(0)/I0 = {start}");
}

#[test]
fn matching_is_linear_in_peak() {
    let g1 = match_pulses(&Pulse::default_centrifuge(1e10)).unwrap();
    let g2 = match_pulses(&Pulse::default_centrifuge(2e10)).unwrap();
    let (
        Pulse::Gaussian {
            peak: p1,
            sigma: s1,
            ..
        },
        Pulse::Gaussian {
            peak: p2,
            sigma: s2,
            ..
        },
    ) = (g1, g2)
    else {
        panic!()
    };
    assert!((p2 / p1 - 2.0).abs() < 1e-9);
    assert!((s1 - s2).abs() < 1e-12);
}

#[test]
fn fixed_sigma_partner_matches_fluence() {
    let c = Pulse::default_centrifuge(4.158e10);
    let g = gaussian_partner(&c, 0.142).unwrap();
    assert!(((g.fluence() - c.fluence()) / c.fluence()).abs() < 1e-3);
    assert_eq!(
        g.duration(),
        2.0 * 2.0 * 2.0 * 0.142 * (2.0 * 2f64.ln()).sqrt()
    );
}

#[test]
fn printed_rampoff_carries_more_energy() {
    let printed = Pulse::Centrifuge {
        peak: 1.0,
        beta: 0.3,
        t0: 3.0,
        t_c: 15.0,
        symmetric_rampoff: false,
    };
    let a = gaussian_partner(&printed, 0.142).unwrap().peak();
    let b = gaussian_partner(&Pulse::default_centrifuge(1.0), 0.142)
        .unwrap()
        .peak();
    eprintln!("ratio printed {a}, symmetric {b}");
    assert!(a > b * 1.003);
}
