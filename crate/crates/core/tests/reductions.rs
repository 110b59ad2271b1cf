use std::f64::consts::PI;

use dtoda::fixtures::{self, random_physical};
use dtoda::maps::record::{parse_record, to_record};
use dtoda::maps::{parse_charge, Charge, LogMap, MapKind, MapOptions};
use dtoda::moments::{actions, actions_contour, casimir_q, casimir_q_contour, moment_mk, moment_mk_contour, moments};
use dtoda::string::{area, conserved_targets, evolve_x, newton_reconstruct, shoelace, string_defect, EvolutionState};
use dtoda::{Error, MapPair, C64};
use num_rational::Rational64;
use proptest::prelude::*;

const KINDS: [MapKind; 3] = [MapKind::Polynomial, MapKind::Rational, MapKind::Logarithmic];

fn kind() -> impl Strategy<Value = MapKind> {
    prop::sample::select(KINDS.to_vec())
}

#[test]
fn parameter_counts() {
    for order in 1..=3 {
        let p = random_physical(MapKind::Polynomial, order, 1).unwrap();
        let r = random_physical(MapKind::Rational, order, 1).unwrap();
        let l = random_physical(MapKind::Logarithmic, order, 1).unwrap();
        assert_eq!(p.dim(), 2 * order + 3);
        assert_eq!(r.dim(), 4 * order + 3);
        assert_eq!(l.dim(), 2 * order + 5);
    }
}

#[test]
fn expansion_matches_closed_form_outside_the_disk() {
    for map in [fixtures::blob(), fixtures::rational_two()] {
        let s = map.expand_z_at_infinity(-60, 1).unwrap();
        for k in 0..12 {
            let w = C64::from_polar(1.6, 0.5 * k as f64);
            assert!((s.eval(w).unwrap() - map.eval_z(w).unwrap()).norm() < 1e-10);
        }
    }
}

#[test]
fn charges_must_sum_to_zero() {
    let q = |p: i64, d: i64| Charge::new(Rational64::new(p, d), Rational64::from_integer(0));
    let w = [C64::new(0.2, 0.0), C64::new(-0.3, 0.1)];
    let bad = LogMap::new(
        C64::new(1.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
        vec![(q(1, 3), w[0]), (q(-1, 4), w[1])],
        vec![(q(1, 3), w[0].conj()), (q(-1, 3), w[1].conj())],
        1.0,
        MapOptions::formal(),
    );
    assert!(matches!(bad, Err(Error::InvalidMap(_))));
    assert_eq!(parse_charge("-3/9").unwrap(), Rational64::new(-1, 3));
}

#[test]
fn evolution_keeps_the_real_structure() {
    for map in [fixtures::blob(), fixtures::rational_one(), fixtures::log_two()] {
        for s in evolve_x(&EvolutionState::new(map, 0.0), 0.05, 20).unwrap() {
            assert!(s.map.options().real_structure);
            assert!(s.map.real_defect() < 1e-14);
        }
    }
}

#[test]
fn area_grows_at_rate_pi() {
    for map in [fixtures::blob(), fixtures::rational_one(), fixtures::log_two()] {
        let traj = evolve_x(&EvolutionState::new(map, 0.0), 0.04, 40).unwrap();
        let a0 = area(&traj[0].map, 512).unwrap();
        let last = traj.last().unwrap();
        let a1 = area(&last.map, 512).unwrap();
        assert!(((a1 - a0) / last.x - PI).abs() < 1e-6);
        let poly = shoelace(&last.map.boundary_samples(4096).unwrap());
        assert!((poly - a1).abs() < 1e-5);
    }
}

#[test]
fn real_maps_have_real_casimir_and_conjugate_pairs() {
    let m = moments(&fixtures::blob(), 3).unwrap();
    assert!(m.q.im.abs() < 1e-12);
    for (a, b) in m.m.iter().zip(&m.mbar) {
        assert!((a + b.conj()).norm() < 1e-12);
    }
    for map in [fixtures::rational_two(), fixtures::log_two()] {
        let a = actions(&map).unwrap();
        assert!(a.q.im.abs() < 1e-12);
        for (x, y) in a.i.iter().zip(&a.ibar) {
            assert!((x - y.conj()).norm() < 1e-12, "{}", map.kind().name());
        }
    }
}

#[test]
fn newton_rejects_mismatched_targets() {
    let s = EvolutionState::new(fixtures::blob(), 0.0);
    let t = conserved_targets(&s).unwrap();
    let other = fixtures::rational_one();
    assert!(newton_reconstruct(&t, 0.0, &other, 1e-12, 5).is_err());
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() < tol * (1.0 + b.norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn records_round_trip(kind in kind(), order in 1usize..4, seed in 0u64..1000) {
        let map = random_physical(kind, order, seed).unwrap();
        let back = parse_record(&to_record(&map)).unwrap();
        prop_assert_eq!(back, map);
    }

    #[test]
    fn random_maps_solve_the_string_equation(kind in kind(), order in 1usize..4, seed in 0u64..1000) {
        let map = random_physical(kind, order, seed).unwrap();
        prop_assert!(string_defect(&map).unwrap() < 1e-10);
    }

    #[test]
    fn closed_forms_match_contours(kind in prop::sample::select(vec![MapKind::Rational, MapKind::Logarithmic]),
                                   order in 1usize..3, seed in 0u64..1000) {
        let map = random_physical(kind, order, seed).unwrap();
        let a = actions(&map).unwrap();
        let b = actions_contour(&map).unwrap();
        for (x, y) in a.i.iter().chain(&a.ibar).zip(b.i.iter().chain(&b.ibar)) {
            prop_assert!(close(*x, *y, 1e-9));
        }
        prop_assert!(close(casimir_q(&map).unwrap(), casimir_q_contour(&map).unwrap(), 1e-9));
    }

    #[test]
    fn moments_match_contours(order in 1usize..4, seed in 0u64..1000, k in 1usize..5) {
        let map = random_physical(MapKind::Polynomial, order, seed).unwrap();
        let exact = moment_mk(&map, k).unwrap();
        prop_assert!(close(exact, moment_mk_contour(&map, k, 1.0).unwrap(), 1e-9));
        prop_assert!(close(casimir_q(&map).unwrap(), casimir_q_contour(&map).unwrap(), 1e-9));
    }

    #[test]
    fn conserved_quantities_do_not_drift(kind in kind(), seed in 0u64..1000) {
        let map = random_physical(kind, 2, seed).unwrap();
        let s0 = EvolutionState::new(map, 0.0);
        let t0 = conserved_targets(&s0).unwrap();
        for s in evolve_x(&s0, 0.02, 20).unwrap() {
            prop_assert!(conserved_targets(&s).unwrap().distance(&t0) < 1e-8);
        }
    }

    #[test]
    fn newton_agrees_with_the_ode(kind in kind(), seed in 0u64..1000) {
        let map = random_physical(kind, 1, seed).unwrap();
        let s0 = EvolutionState::new(map.clone(), 0.0);
        let t0 = conserved_targets(&s0).unwrap();
        let ode = evolve_x(&s0, 0.05, 25).unwrap().pop().unwrap().map;
        let rec = newton_reconstruct(&t0, 0.05, &map, 1e-13, 40).unwrap();
        let d = ode.params().iter().zip(rec.map.params()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(d < 1e-8, "{}", d);
        prop_assert_eq!(rec.map.options(), map.options());
    }
}

#[test]
fn mirror_is_an_involution() {
    for kind in KINDS {
        let m = random_physical(kind, 2, 9).unwrap();
        assert_eq!(m.mirror().mirror(), m);
        let w = C64::new(0.7, 0.9);
        let mm: MapPair = m.mirror();
        assert!((mm.eval_z(w).unwrap() - m.eval_zbar(w.inv()).unwrap()).norm() < 1e-12);
    }
}
