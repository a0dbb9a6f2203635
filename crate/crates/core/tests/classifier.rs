use evogame::classifier::{
    classify2, classify3, classify_modified, impossible_case_guard, phase_region, tarnita_favored2, Case2, Label3,
    Prediction, ProofStatus, Region2,
};
use evogame::games::{modify_game_2, CoalescenceConstants, GameMatrix, UpdateRule};
use evogame::replicator::edge_fixed_point;
use evogame::Error;
use proptest::prelude::*;

fn reference_constants() -> CoalescenceConstants {
    CoalescenceConstants::from_triples(6.0, 0.6404566, 0.325, 0.345).unwrap()
}

fn constants() -> impl Strategy<Value = CoalescenceConstants> {
    (2.0..30.0f64, 0.3..0.95f64, 0.1..1.0f64, 0.05..0.95f64).prop_map(|(kappa, p01, f1, fb)| {
        CoalescenceConstants::from_triples(kappa, p01, f1 * p01, fb * p01 * (1.0 - 1.0 / kappa)).unwrap()
    })
}

fn rule() -> impl Strategy<Value = UpdateRule> {
    prop_oneof![Just(UpdateRule::BirthDeath), Just(UpdateRule::DeathBirth)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn phase_region_agrees_with_the_modified_game(
        r in -3.0..3.0f64, s in -3.0..3.0f64, t in -3.0..3.0f64, p in -3.0..3.0f64,
        update in rule(), c in constants(),
    ) {
        let g = GameMatrix::two(r, s, t, p).unwrap();
        let direct = classify2(&modify_game_2(&g, update, &c).unwrap());
        let swept = phase_region(r, s, t, p, update, &c);
        match (direct, swept) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.case, b.verdict.case);
                prop_assert_eq!(a.region, b.verdict.region);
                if let (Some(x), Some(y)) = (a.equilibrium, b.verdict.equilibrium) {
                    prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
                }
            }
            // Both sides must call the same boundary points non-generic, up to roundoff.
            (Err(Error::NonGeneric(_)), _) | (_, Err(Error::NonGeneric(_))) => {}
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn equilibrium_present_iff_interior_case(a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64, d in -3.0..3.0f64) {
        if let Ok(v) = classify2(&GameMatrix::two(a, b, c, d).unwrap()) {
            prop_assert_eq!(v.equilibrium.is_some(), matches!(v.case, Case2::S1 | Case2::S2));
            prop_assert_eq!(v.winner.is_none(), v.case == Case2::S1);
            if let Some(u) = v.equilibrium {
                prop_assert!(u > 0.0 && u < 1.0);
            }
        }
    }

    #[test]
    fn favoured_strategy_matches_birth_death_outcome(r in -3.0..3.0f64, s in -3.0..3.0f64, t in -3.0..3.0f64, p in -3.0..3.0f64) {
        let c = reference_constants();
        let g = GameMatrix::two(r, s, t, p).unwrap();
        if let Ok(v) = classify2(&modify_game_2(&g, UpdateRule::BirthDeath, &c).unwrap()) {
            let expect = match v.case {
                Case2::S1 => v.equilibrium.unwrap() > 0.5,
                Case2::S2 => v.winner == Some(1),
                Case2::S3 => false,
                Case2::S4 => true,
            };
            prop_assume!((r + s - t - p).abs() > 1e-9);
            prop_assert_eq!(tarnita_favored2(&g, UpdateRule::BirthDeath, c.kappa).unwrap(), expect);
        }
    }

    #[test]
    fn labels_survive_cyclic_relabelling(a in prop::array::uniform3(-3.0..3.0f64), b in prop::array::uniform3(-3.0..3.0f64)) {
        let h = GameMatrix::gen33(a, b).unwrap();
        let Ok(t) = classify_modified(&h, None) else { return Ok(()) };
        for perm in [[1, 2, 0], [2, 0, 1]] {
            let u = classify_modified(&h.permuted(&perm), None).unwrap();
            prop_assert_eq!(t.label, u.label);
        }
    }

    #[test]
    fn proved_coexistence_only_for_repelling_classes(a in prop::array::uniform3(-3.0..3.0f64), b in prop::array::uniform3(-3.0..3.0f64), update in rule()) {
        let g = GameMatrix::gen33(a, b).unwrap();
        let Ok(t) = classify3(&g, update, &reference_constants()) else { return Ok(()) };
        if t.prediction == Prediction::CoexistenceProved {
            prop_assert_eq!(t.proof_status, ProofStatus::Proved);
            prop_assert!(
                matches!(t.label, Label3::L7_1 | Label3::L7_2 | Label3::L7_3) || t.acs.is_some(),
                "label {:?}", t.label
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100_000))]

    #[test]
    fn three_attracting_edges_leave_at_most_one_uninvadable(a in prop::array::uniform3(0.01..10.0f64), b in prop::array::uniform3(0.01..10.0f64)) {
        let report = impossible_case_guard(&GameMatrix::gen33(a, b).unwrap()).unwrap();
        prop_assert!(report.applicable);
        prop_assert!(report.violation.is_none(), "{:?}", report.violation);
    }
}

#[test]
fn guard_is_vacuous_without_three_attracting_edges() {
    let report = impossible_case_guard(&GameMatrix::gen33([1.0, 1.0, -1.0], [1.0, 1.0, -1.0]).unwrap()).unwrap();
    assert!(!report.applicable);
    assert!(report.violation.is_none());
}

#[test]
fn unit_alpha_games_never_hit_the_forbidden_case() {
    // With every alpha = 1, a single invadable edge would need beta_2 > 1 and beta_2 < 1 at once.
    for i in 1..40 {
        for j in 1..40 {
            for k in 1..40 {
                let b = [i as f64 / 10.0, j as f64 / 10.0, k as f64 / 10.0];
                let report = impossible_case_guard(&GameMatrix::gen33([1.0; 3], b).unwrap()).unwrap();
                assert!(report.violation.is_none(), "beta = {b:?}");
            }
        }
    }
}

#[test]
fn hawk_dove_edge_point() {
    let e = edge_fixed_point(1.0, 1.2).unwrap().unwrap();
    assert!((e.p - 1.0 / 2.2).abs() < 1e-15);
    assert!(e.attracting);
    assert!(edge_fixed_point(1.0, -1.0).unwrap().is_none());
}

#[test]
fn death_birth_prisoners_dilemma_threshold() {
    // Donation game b, c = 1: cooperators are favoured under DB iff b > kappa
    // (with the structure coefficient for kappa = 6).
    let c = reference_constants();
    for b in [2.0, 5.0, 7.0, 12.0] {
        let g = GameMatrix::two(b - 1.0, -1.0, b, 0.0).unwrap();
        assert_eq!(tarnita_favored2(&g, UpdateRule::DeathBirth, c.kappa).unwrap(), b > c.kappa, "b = {b}");
        assert!(!tarnita_favored2(&g, UpdateRule::BirthDeath, c.kappa).unwrap());
    }
}

#[test]
fn coexistence_in_a_snowdrift_game() {
    let g = GameMatrix::two(2.0, 1.0, 3.0, 0.0).unwrap();
    let v = classify2(&g).unwrap();
    assert_eq!(v.case, Case2::S1);
    assert_eq!(v.region, Region2::Coexist);
    assert!((v.equilibrium.unwrap() - 0.5).abs() < 1e-15);
}
