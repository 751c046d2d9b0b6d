use mco_core::characterize::{classify_transition, synthesize_protocol};
use mco_core::paths::{decompose_stages, enumerate_paths, shrink};
use mco_core::protocol::{build_average_work_protocol, build_thermalize_once};
use mco_core::{exact_work_distribution, final_state, monte_carlo, Protocol, QubitState, Step, ThermalContext};

fn quarter() -> ThermalContext {
    ThermalContext::from_gibbs_population(1.0, 0.25).unwrap()
}

#[test]
fn protocol_file_round_trip_preserves_the_law() {
    let ctx = quarter();
    let proto = build_average_work_protocol(0.1, 0.3, ctx, 12).unwrap();
    let back = Protocol::from_json(&proto.to_json()).unwrap();
    assert_eq!(back, proto);
    let init = QubitState::new(0.1).unwrap();
    assert_eq!(
        exact_work_distribution(&proto, init).unwrap(),
        exact_work_distribution(&back, init).unwrap()
    );
}

#[test]
fn thermalize_once_from_ground() {
    let ctx = quarter();
    let proto = build_thermalize_once(ctx.e0() - 0.5, 1.0, ctx).unwrap();
    let d = exact_work_distribution(&proto, QubitState::ground()).unwrap();
    let q = ctx.gibbs_population(ctx.e0() - 0.5).unwrap();
    assert_eq!(d.len(), 2);
    assert!((d.atoms()[0].0 + 0.5).abs() < 1e-15);
    assert!((d.atoms()[0].1 - q).abs() < 1e-15);
    assert!((final_state(&proto, QubitState::ground()).p_excited() - q).abs() < 1e-15);
}

#[test]
fn monte_carlo_tracks_the_exact_mean() {
    let ctx = quarter();
    let proto = build_average_work_protocol(0.2, 0.4, ctx, 8).unwrap();
    let init = QubitState::new(0.2).unwrap();
    let exact = exact_work_distribution(&proto, init).unwrap();
    let mc = monte_carlo(&proto, init, 200_000, 3);
    assert!((mc.distribution.mean() - exact.mean()).abs() < 5.0 * mc.mean_std_error);
    assert!((mc.final_state.p_excited() - 0.4).abs() < 5.0 * mc.final_state_std_error);
}

#[test]
fn stage_free_energies_close_on_every_path() {
    let ctx = quarter();
    let proto = Protocol::checked(
        ctx,
        vec![
            Step::lt(-0.4),
            Step::pt(0.3),
            Step::lt(0.9),
            Step::pt(0.6),
            Step::lt(-0.5),
        ],
    )
    .unwrap();
    let paths = enumerate_paths(&proto).unwrap();
    assert_eq!(paths.len(), 4);
    assert!((paths.iter().map(|p| p.weight).sum::<f64>() - 1.0).abs() < 1e-15);
    for path in paths {
        let s = decompose_stages(&shrink(&path));
        assert!(s.delta_f.iter().sum::<f64>().abs() < 1e-12);
    }
}

#[test]
fn achievable_transitions_come_with_free_protocols() {
    let ctx = quarter();
    for (p_in, p_out) in [(0.6, 0.3), (0.05, 0.2), (1.0, 0.9)] {
        let c = classify_transition(p_in, p_out, &ctx).unwrap();
        let proto = synthesize_protocol(&c, p_in, p_out, &ctx).unwrap();
        let init = QubitState::new(p_in).unwrap();
        assert!((final_state(&proto, init).p_excited() - p_out).abs() < 1e-12);
        assert_eq!(exact_work_distribution(&proto, init).unwrap().prob_work_below(0.0), 0.0);
    }
}
