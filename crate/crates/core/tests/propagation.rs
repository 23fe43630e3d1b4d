use num_complex::Complex64;
use rovib_core::eigen::EigenLibrary;
use rovib_core::grid::{ChannelSet, GridHamiltonian, RadialGrid, Wavepacket};
use rovib_core::molecule::MoleculeModel;
use rovib_core::propagate::{
    propagate, propagate_split_operator, static_bound, ChebyshevPropagator, PropagationPlan,
    SplitOperator,
};
use rovib_core::pulse::Pulse;
use rovib_core::{units, Error};

struct Small {
    ham: GridHamiltonian,
    library: EigenLibrary,
}

/// Default molecule on 128 points × 10 channels.
fn small() -> Small {
    let model = MoleculeModel::rb2_default();
    let grid = RadialGrid::new(6.0, 30.0, 128).unwrap();
    let channels = ChannelSet::even(0, 18).unwrap();
    let ham = GridHamiltonian::new(&model, grid, channels.clone()).unwrap();
    let library = EigenLibrary::build(&model, grid, channels).unwrap();
    Small { ham, library }
}

fn eigenstate(s: &Small, nu: usize, n: u32) -> Wavepacket {
    let st = s.library.state(nu, n).unwrap();
    Wavepacket::from_channel(*s.ham.grid(), s.ham.channels().clone(), n, &st.vector).unwrap()
}

fn weak_gaussian() -> Pulse {
    Pulse::gaussian(5e10, 0.142, 0.671).unwrap()
}

fn wrapped(phase: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    phase - two_pi * (phase / two_pi).round()
}

#[test]
fn eigenstate_acquires_only_its_phase() {
    let s = small();
    let wp0 = eigenstate(&s, 3, 4);
    let mut plan = PropagationPlan::new(Pulse::gaussian(0.0, 0.142, 0.671).unwrap());
    plan.post_pulse_ps = 2.0;
    let traj = propagate(&wp0, &plan, &s.ham, |_, _| Ok(())).unwrap();
    let overlap = wp0.inner(&traj.final_state).unwrap();
    let t = units::ps_to_au(traj.final_state.time_ps);
    let expected = -s.library.energy(3, 4).unwrap() * t;
    assert!((overlap.norm() - 1.0).abs() < 1e-9);
    assert!(
        wrapped(overlap.arg() - expected).abs() < 1e-6,
        "phase error {}",
        wrapped(overlap.arg() - expected)
    );
}

#[test]
fn split_operator_eigenstate_phase() {
    let s = small();
    let wp0 = eigenstate(&s, 0, 0);
    let mut plan = PropagationPlan::new(Pulse::gaussian(0.0, 0.142, 0.671).unwrap());
    plan.post_pulse_ps = 2.0;
    plan.dt_ps = 2.5e-4;
    let traj = propagate_split_operator(&wp0, &plan, &s.ham, |_, _| Ok(())).unwrap();
    let overlap = wp0.inner(&traj.final_state).unwrap();
    let t = units::ps_to_au(traj.final_state.time_ps);
    let expected = -s.library.energy(0, 0).unwrap() * t;
    assert!((overlap.norm() - 1.0).abs() < 1e-9);
    assert!(
        wrapped(overlap.arg() - expected).abs() < 1e-6,
        "phase error {}",
        wrapped(overlap.arg() - expected)
    );
}

#[test]
fn chebyshev_and_split_operator_agree() {
    let s = small();
    let wp0 = eigenstate(&s, 0, 0);
    let mut plan = PropagationPlan::new(weak_gaussian());
    plan.stride = 20;
    plan.dt_ps = 1e-3;
    let cheb = propagate(&wp0, &plan, &s.ham, |_, _| Ok(())).unwrap();
    let split = propagate_split_operator(&wp0, &plan, &s.ham, |_, _| Ok(())).unwrap();
    let overlap = cheb.final_state.inner(&split.final_state).unwrap().norm();
    assert!(overlap > 1.0 - 1e-6, "overlap {overlap}");
    assert_eq!(cheb.records.len(), split.records.len());
    for (a, b) in cheb.records.iter().zip(&split.records) {
        assert!((a.time_ps - b.time_ps).abs() < 1e-12);
        assert!((a.alignment - b.alignment).abs() < 1e-5);
    }
    // The pulse does something measurable.
    let last = cheb.records.last().unwrap().alignment;
    assert!((last - 1.0 / 3.0).abs() > 1e-4);
}

#[test]
fn norm_is_conserved_along_a_run() {
    let s = small();
    let wp0 = eigenstate(&s, 0, 0);
    let mut plan = PropagationPlan::new(Pulse::gaussian(1e12, 0.142, 0.671).unwrap());
    plan.stride = 1;
    plan.post_pulse_ps = 0.5;
    let traj = propagate(&wp0, &plan, &s.ham, |_, _| Ok(())).unwrap();
    for r in &traj.records {
        assert!(
            (r.norm - 1.0).abs() < 1e-9,
            "norm {} at {}",
            r.norm,
            r.time_ps
        );
    }
}

#[test]
fn step_forward_then_back_returns() {
    let s = small();
    let wp0 = eigenstate(&s, 1, 2);
    let field = units::intensity_to_au(2e11);
    let window = static_bound(&s.ham, 2e11);
    let mut cheb = ChebyshevPropagator::new(&s.ham, window, 1e-12).unwrap();
    let mut psi = wp0.data().to_vec();
    let dt = units::ps_to_au(0.01);
    cheb.step(&mut psi, field, dt).unwrap();
    let moved: f64 = psi
        .iter()
        .zip(wp0.data())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>();
    assert!(moved > 1e-6);
    cheb.step(&mut psi, field, -dt).unwrap();
    let err = psi
        .iter()
        .zip(wp0.data())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        * wp0.grid().spacing();
    assert!(err.sqrt() < 1e-9);
}

#[test]
fn too_narrow_window_is_reported() {
    let s = small();
    let wp0 = eigenstate(&s, 0, 0);
    let (lo, hi) = static_bound(&s.ham, 0.0);
    let mut cheb = ChebyshevPropagator::new(&s.ham, (lo, lo + 0.01 * (hi - lo)), 1e-12).unwrap();
    let mut psi = wp0.data().to_vec();
    let dt = 200.0 / (0.005 * (hi - lo));
    match cheb.step(&mut psi, 0.0, dt) {
        Err(Error::SpectralBound(_)) => {}
        other => panic!("expected a spectral-bound error, got {other:?}"),
    }
}

#[test]
fn observer_errors_stop_the_run() {
    let s = small();
    let wp0 = eigenstate(&s, 0, 0);
    let plan = PropagationPlan::new(weak_gaussian());
    let mut seen = 0;
    let out = propagate(&wp0, &plan, &s.ham, |_, _| {
        seen += 1;
        if seen == 3 {
            Err(Error::Numerical("stop".into()))
        } else {
            Ok(())
        }
    });
    assert!(out.is_err());
    assert_eq!(seen, 3);
}

#[test]
fn rejects_unnormalized_input() {
    let s = small();
    let mut wp0 = eigenstate(&s, 0, 0);
    wp0.data_mut()[0] += Complex64::new(10.0, 0.0);
    assert!(propagate(
        &wp0,
        &PropagationPlan::new(weak_gaussian()),
        &s.ham,
        |_, _| Ok(())
    )
    .is_err());
}

fn free_packet(mass: f64) -> (GridHamiltonian, Wavepacket, f64) {
    let grid = RadialGrid::new(1.0, 201.0, 1024).unwrap();
    let channels = ChannelSet::from_list(0, vec![0]).unwrap();
    let n = grid.n_points;
    let ham = GridHamiltonian::from_arrays(
        grid,
        channels.clone(),
        mass,
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let sigma0 = 3.0;
    let values: Vec<f64> = grid
        .points()
        .iter()
        .map(|r| (-(r - 101.0) * (r - 101.0) / (4.0 * sigma0 * sigma0)).exp())
        .collect();
    let mut wp = Wavepacket::from_channel(grid, channels, 0, &values).unwrap();
    wp.normalize().unwrap();
    (ham, wp, sigma0)
}

fn variance(wp: &Wavepacket) -> f64 {
    let r = wp.grid().points();
    let dr = wp.grid().spacing();
    let p: Vec<f64> = wp.data().iter().map(|z| z.norm_sqr() * dr).collect();
    let mean: f64 = r.iter().zip(&p).map(|(x, w)| x * w).sum();
    r.iter()
        .zip(&p)
        .map(|(x, w)| (x - mean) * (x - mean) * w)
        .sum()
}

#[test]
fn free_packet_spreads_as_expected() {
    let mass = 1000.0;
    let (ham, wp0, sigma0) = free_packet(mass);
    let t_total = 2.0 * mass * sigma0 * sigma0 * 3f64.sqrt();
    let exact = sigma0 * sigma0 * (1.0 + (t_total / (2.0 * mass * sigma0 * sigma0)).powi(2));

    let mut split = SplitOperator::new(&ham);
    let mut psi = wp0.clone();
    for _ in 0..100 {
        split.step(psi.data_mut(), 0.0, t_total / 100.0);
    }
    assert!(((variance(&psi) - exact) / exact).abs() < 1e-6);
    assert!((exact / (sigma0 * sigma0) - 4.0).abs() < 1e-12);

    let window = static_bound(&ham, 0.0);
    let mut cheb = ChebyshevPropagator::new(&ham, window, 1e-12).unwrap();
    let mut psi = wp0.clone();
    for _ in 0..10 {
        cheb.step(psi.data_mut(), 0.0, t_total / 10.0).unwrap();
    }
    assert!(((variance(&psi) - exact) / exact).abs() < 1e-6);
}

#[test]
fn split_operator_is_second_order() {
    let s = small();
    let wp0 = eigenstate(&s, 0, 0);
    let pulse = Pulse::gaussian(5e11, 0.142, 0.671).unwrap();
    let run = |dt: f64| {
        let mut plan = PropagationPlan::new(pulse);
        plan.dt_ps = dt;
        plan.max_variation = 10.0;
        plan.stride = 1_000_000;
        propagate_split_operator(&wp0, &plan, &s.ham, |_, _| Ok(()))
            .unwrap()
            .final_state
    };
    let dt = 1.342 / 64.0;
    let reference = run(dt / 64.0);
    let err = |wp: &Wavepacket| {
        wp.data()
            .iter()
            .zip(reference.data())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    };
    let e1 = err(&run(dt));
    let e2 = err(&run(dt / 2.0));
    let ratio = e1 / e2;
    assert!(
        (ratio - 4.0).abs() < 0.8,
        "error ratio {ratio} ({e1:.3e} / {e2:.3e})"
    );
}

#[test]
fn window_for_constant_potential() {
    let grid = RadialGrid::new(5.0, 25.0, 64).unwrap();
    let channels = ChannelSet::from_list(0, vec![0]).unwrap();
    let c = -0.01;
    let mass = 500.0;
    let ham = GridHamiltonian::from_arrays(
        grid,
        channels,
        mass,
        vec![c; 64],
        vec![0.0; 64],
        vec![0.0; 64],
    );
    let t_max = grid.kinetic_max(mass);
    let (lo, hi) = static_bound(&ham, 1e12);
    let centre = c + 0.5 * t_max;
    let half = 0.5 * t_max * 1.05;
    assert!((lo - (centre - half)).abs() < 1e-15);
    assert!((hi - (centre + half)).abs() < 1e-15);
}

#[test]
fn window_grows_with_intensity() {
    let s = small();
    let mut prev = static_bound(&s.ham, 0.0);
    for &i in &[1e10, 1e11, 1e12, 1e13] {
        let w = static_bound(&s.ham, i);
        assert!(w.0 <= prev.0 && w.1 >= prev.1);
        prev = w;
    }
}

#[test]
fn window_contains_library_spectrum() {
    let model = MoleculeModel::rb2_default();
    let grid = RadialGrid::new(6.0, 60.0, 256).unwrap();
    let channels = ChannelSet::even(0, 180).unwrap();
    let ham = GridHamiltonian::new(&model, grid, channels.clone()).unwrap();
    let library = EigenLibrary::build(&model, grid, channels).unwrap();
    let (lo, hi) = static_bound(&ham, 0.0);
    for ch in library.channel_states() {
        for &e in &ch.energies {
            assert!(e > lo && e < hi, "E = {e} outside [{lo}, {hi}]");
        }
    }
}
