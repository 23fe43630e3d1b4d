use std::collections::BTreeMap;

use num_complex::Complex64;
use rovib_core::eigen::EigenLibrary;
use rovib_core::grid::{ChannelSet, GridHamiltonian, RadialGrid, Wavepacket};
use rovib_core::molecule::MoleculeModel;
use rovib_core::observables::{
    distribution_csv, project, scalar_series_csv, thermal_average, thermal_tail_fraction,
    thermal_weights, InitialState, ProjectionTable, ScalarSample, ThermalSpec,
};
use rovib_core::propagate::{propagate, PropagationPlan};
use rovib_core::pulse::Pulse;
use rovib_core::Error;

struct Small {
    ham: GridHamiltonian,
    library: EigenLibrary,
}

fn small() -> Small {
    let model = MoleculeModel::rb2_default();
    let grid = RadialGrid::new(6.0, 30.0, 128).unwrap();
    let channels = ChannelSet::even(0, 18).unwrap();
    let ham = GridHamiltonian::new(&model, grid, channels.clone()).unwrap();
    let library = EigenLibrary::build(&model, grid, channels).unwrap();
    Small { ham, library }
}

const GROUND: InitialState = InitialState { nu: 0, n: 0, m: 0 };

fn eigenstate(s: &Small, nu: usize, n: u32) -> Wavepacket {
    let st = s.library.state(nu, n).unwrap();
    Wavepacket::from_channel(*s.ham.grid(), s.ham.channels().clone(), n, &st.vector).unwrap()
}

/// Wavepacket Σ C φ rebuilt from a table.
fn synthesize(s: &Small, table: &ProjectionTable) -> Wavepacket {
    let mut wp = Wavepacket::zeros(*s.ham.grid(), s.ham.channels().clone());
    for (c, (proj, states)) in table
        .channels
        .iter()
        .zip(s.library.channel_states())
        .enumerate()
    {
        let out = wp.channel_mut(c);
        for (z, st) in proj.coefficients.iter().zip(&states.bound) {
            for (o, phi) in out.iter_mut().zip(&st.vector) {
                *o += z * *phi;
            }
        }
    }
    wp
}

fn kicked(s: &Small, peak: f64, post_ps: f64) -> Wavepacket {
    let mut plan = PropagationPlan::new(Pulse::gaussian(peak, 0.142, 0.671).unwrap());
    plan.post_pulse_ps = post_ps;
    propagate(&eigenstate(s, 0, 0), &plan, &s.ham, |_, _| Ok(()))
        .unwrap()
        .final_state
}

#[test]
fn eigenstate_projects_onto_itself() {
    let s = small();
    let table = project(&eigenstate(&s, 2, 6), &s.library, GROUND).unwrap();
    for (nu, n, z) in table.entries() {
        if (nu, n) == (2, 6) {
            assert!((z.norm_sqr() - 1.0).abs() < 1e-12);
        } else {
            assert!(z.norm_sqr() < 1e-12, "({nu}, {n}) has {}", z.norm_sqr());
        }
    }
    assert!(table.dissociation_probability().unwrap() < 1e-12);
    assert_eq!(table.mean_rotation().unwrap(), 6.0);
}

#[test]
fn bound_span_is_captured_completely() {
    let s = small();
    let mut table = project(&eigenstate(&s, 0, 0), &s.library, GROUND).unwrap();
    // Deterministic pseudo-random coefficients over every bound state.
    let mut k = 0.0f64;
    for c in &mut table.channels {
        for z in &mut c.coefficients {
            k += 1.0;
            *z = Complex64::new((1.3 * k).sin(), (0.7 * k).cos());
        }
    }
    let norm = table.norm_captured().sqrt();
    for c in &mut table.channels {
        for z in &mut c.coefficients {
            *z /= norm;
        }
    }
    let wp = synthesize(&s, &table);
    let back = project(&wp, &s.library, GROUND).unwrap();
    assert!((back.norm_captured() - 1.0).abs() < 1e-10);
    for ((_, _, a), (_, _, b)) in table.entries().zip(back.entries()) {
        assert!((a - b).norm() < 1e-10);
    }
}

#[test]
fn continuum_packet_is_not_fully_bound() {
    let s = small();
    // Narrow packet at short range carries high kinetic energy.
    let grid = *s.ham.grid();
    let values: Vec<f64> = grid
        .points()
        .iter()
        .map(|r| (-(r - 9.0).powi(2) / 0.08).exp())
        .collect();
    let mut wp = Wavepacket::from_channel(grid, s.ham.channels().clone(), 0, &values).unwrap();
    wp.normalize().unwrap();
    let table = project(&wp, &s.library, GROUND).unwrap();
    let captured = table.norm_captured();
    assert!(captured < 0.99 && captured > 0.0, "captured {captured}");
}

#[test]
fn distributions_sum_consistently() {
    let s = small();
    let wp = kicked(&s, 1.0e12, 0.0);
    let table = project(&wp, &s.library, GROUND).unwrap();
    let vib: f64 = table.vib_distributions().values().sum();
    let rot: f64 = table.rot_distribution_dense().iter().map(|(_, w)| w).sum();
    assert!((vib - rot).abs() < 1e-12);
    let pd = table.dissociation_probability().unwrap();
    assert!((vib + pd - 1.0).abs() < 1e-12);
    assert!((vib - table.norm_captured()).abs() < 1e-12);
    // Only even N are coupled to N = 0.
    for (n, w) in table.rot_distribution_dense() {
        if n % 2 == 1 {
            assert_eq!(w, 0.0);
        }
    }
    let sparse = table.rot_distribution_sparse();
    assert!(sparse.iter().all(|(n, w)| n % 2 == 0 && *w > 1e-10));
    assert!(sparse.len() > 2, "the kick populates several channels");
}

#[test]
fn alignment_from_coefficients_matches_the_grid() {
    let s = small();
    let wp = kicked(&s, 5.0e11, 0.3);
    let table = project(&wp, &s.library, GROUND).unwrap();
    let from_table = table.alignment(&s.library).unwrap();
    // Exact identity for the bound part of the packet.
    let bound_part = synthesize(&s, &table);
    assert!((bound_part.alignment() - from_table).abs() < 1e-10);
    // And the full packet, whose unbound part is negligible here.
    assert!(table.dissociation_probability().unwrap() < 1e-8);
    assert!(
        (wp.alignment() - from_table).abs() < 1e-6,
        "{} vs {from_table}",
        wp.alignment()
    );
    assert!(
        from_table > 1.0 / 3.0 + 1e-3,
        "the kick aligns the molecule"
    );
}

#[test]
fn free_evolution_of_coefficients_matches_the_grid() {
    let s = small();
    let wp = kicked(&s, 5.0e11, 0.0);
    let before = project(&wp, &s.library, GROUND).unwrap();
    let mut plan = PropagationPlan::new(Pulse::gaussian(0.0, 0.142, 0.671).unwrap());
    plan.post_pulse_ps = 1.0;
    let mut start = wp.clone();
    start.normalize().unwrap();
    let later = propagate(&start, &plan, &s.ham, |_, _| Ok(()))
        .unwrap()
        .final_state;
    let measured = project(&later, &s.library, GROUND).unwrap();
    let predicted = before.evolve_free(later.time_ps - wp.time_ps);
    for ((_, _, a), (_, _, b)) in measured.entries().zip(predicted.entries()) {
        assert!((a.norm() - b.norm()).abs() < 1e-8);
        assert!((a - b).norm() < 1e-6, "{a} vs {b}");
    }
    assert!((measured.time_ps - predicted.time_ps).abs() < 1e-12);
}

#[test]
fn projection_rejects_other_grids() {
    let s = small();
    let grid = RadialGrid::new(6.0, 30.0, 64).unwrap();
    let wp = Wavepacket::zeros(grid, s.ham.channels().clone());
    assert!(matches!(
        project(&wp, &s.library, GROUND),
        Err(Error::Shape(_))
    ));
}

#[test]
fn empty_and_overfull_tables_are_errors() {
    let s = small();
    let mut table = project(&eigenstate(&s, 0, 0), &s.library, GROUND).unwrap();
    for c in &mut table.channels {
        c.coefficients
            .iter_mut()
            .for_each(|z| *z = Complex64::new(0.0, 0.0));
    }
    assert!(matches!(
        table.mean_rotation(),
        Err(Error::UndefinedMean(_))
    ));
    table.channels[0].coefficients[0] = Complex64::new(1.0 + 1e-6, 0.0);
    assert!(table.dissociation_probability().is_err());
    table.channels[0].coefficients[0] = Complex64::new(1.0 + 1e-12, 0.0);
    assert_eq!(table.dissociation_probability().unwrap(), 0.0);
}

#[test]
fn csv_layouts() {
    let s = small();
    let table = project(&eigenstate(&s, 0, 2), &s.library, GROUND).unwrap();
    let csv = table.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t_ps,nu,N,re,im,weight"));
    assert_eq!(csv.lines().count(), 1 + s.library.bound_count());
    assert!(lines.all(|l| l.split(',').count() == 6));

    let d = distribution_csv(vec![(0u32, 0.5), (2, 0.5)]);
    assert!(d.starts_with("key,weight\n0,"));
    let series = scalar_series_csv(&[ScalarSample {
        time_ps: 0.0,
        norm: 1.0,
        alignment: 1.0 / 3.0,
        dissociation: 0.0,
    }]);
    assert_eq!(
        series.lines().next(),
        Some("t_ps,norm,alignment,dissociation")
    );
    assert_eq!(series.lines().count(), 2);
}

// ---------------------------------------------------------------- thermal

fn thermal_library() -> EigenLibrary {
    let model = MoleculeModel::rb2_default();
    let grid = RadialGrid::new(6.0, 40.0, 256).unwrap();
    EigenLibrary::build(&model, grid, ChannelSet::even(0, 24).unwrap()).unwrap()
}

#[test]
fn thermal_weights_of_excited_band_match_reference_values() {
    let lib = thermal_library();
    for &(t, reference) in &[(0.5, 5.9e-18), (2.0, 1.5e-6)] {
        let w = ThermalSpec::new(t).weight(&lib, 1, 0, 0).unwrap();
        assert!((w / reference - 1.0).abs() < 0.15, "T = {t}: W = {w:e}");
    }
}

#[test]
fn thermal_weights_form_a_partition_of_unity() {
    let lib = thermal_library();
    for &t in &[0.1, 0.5, 2.0, 10.0] {
        let members = thermal_weights(&ThermalSpec::new(t), &lib).unwrap();
        assert_eq!(
            members.len(),
            (0..=24u32)
                .step_by(2)
                .map(|n| n as usize + 1)
                .sum::<usize>()
        );
        let total: f64 = members.iter().map(|m| m.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // The ±M pair shares a factor 2 over M = 0.
        let w20 = members
            .iter()
            .find(|m| (m.n0, m.m_abs) == (2, 0))
            .unwrap()
            .weight;
        let w21 = members
            .iter()
            .find(|m| (m.n0, m.m_abs) == (2, 1))
            .unwrap()
            .weight;
        assert!((w21 / w20 - 2.0).abs() < 1e-14);
    }
}

#[test]
fn zero_temperature_limit_is_the_ground_state() {
    let lib = thermal_library();
    let members = thermal_weights(&ThermalSpec::new(1e-3), &lib).unwrap();
    assert!((members[0].weight - 1.0).abs() < 1e-12);
    assert!(members[1..].iter().all(|m| m.weight < 1e-12));
    assert!(ThermalSpec::new(0.0).validate().is_err());
}

#[test]
fn truncated_tail_is_small_at_two_kelvin() {
    let lib = thermal_library();
    let b0 = lib
        .averaged_constants()
        .unwrap()
        .band(0)
        .unwrap()
        .rotational_constant_cm();
    let spec = ThermalSpec::new(2.0);
    let tail = thermal_tail_fraction(2.0, b0, spec.boltzmann, spec.n_cutoff);
    assert!(tail < 0.01, "tail {tail}");
    assert!(tail > 0.0);
    // The estimate grows with temperature.
    assert!(thermal_tail_fraction(5.0, b0, spec.boltzmann, 24) > tail);
}

#[test]
fn thermal_average_weights_and_coverage() {
    let lib = thermal_library();
    let members = thermal_weights(&ThermalSpec::new(0.5), &lib).unwrap();
    let mut results: BTreeMap<(u32, u32), BTreeMap<u32, f64>> = BTreeMap::new();
    for m in &members {
        results.insert((m.n0, m.m_abs), BTreeMap::from([(m.n0, 1.0)]));
    }
    let avg = thermal_average(&members, &results).unwrap();
    let total: f64 = avg.values().sum();
    assert!((total - 1.0).abs() < 1e-12);
    // N₀ = 2 collects the five members of its level.
    let w2: f64 = members.iter().filter(|m| m.n0 == 2).map(|m| m.weight).sum();
    assert!((avg[&2] - w2).abs() < 1e-15);

    results.remove(&(4, 3));
    results.remove(&(0, 0));
    match thermal_average(&members, &results) {
        Err(Error::Coverage(missing)) => assert_eq!(missing, vec![(0, 0), (4, 3)]),
        other => panic!("expected coverage error, got {other:?}"),
    }
}
