use evogame::cancer::*;
use evogame::classifier::{Label3, ProofStatus};
use evogame::games::SimplexPoint;
use evogame::replicator::{integrate, StepControl};
use evogame::Error;

fn spec(f: Family, p: &[(&str, f64)]) -> CancerGameSpec {
    CancerGameSpec::new(f, p).unwrap()
}

#[test]
fn myeloma_case1_mean_field_converges_to_oc_mm_point() {
    let s = spec(Family::Myeloma, &[("a", 1.0), ("b", 1.0), ("c", 2.0), ("d", 1.0), ("e", 1.0)]);
    let r = analyze_with_theta(&s, 0.0).unwrap();
    assert_eq!(r.verdict.case, "1");
    assert_eq!(r.verdict.proof_status, ProofStatus::OdeProved);
    // F = 0 makes MM weakly dominate OB, so the taxonomy alone is non-generic.
    assert_eq!(r.taxonomy.label, Label3::NonGeneric);
    let g = build(&s).unwrap();
    let u0 = SimplexPoint::new(vec![0.3, 0.3, 0.4]).unwrap();
    let tr = integrate(&g, &u0, 2000.0, &StepControl::default()).unwrap();
    let u = tr.final_state();
    // MM invades the OC,OB point, OB cannot invade the OC,MM point (b/(b+c), 0, c/(b+c)).
    assert!((u[0] - 1.0 / 3.0).abs() < 1e-3 && u[1] < 1e-3, "{u:?}");
}

#[test]
fn myeloma_letters_match_modified_game() {
    let s = spec(Family::Myeloma, &[("a", 1.0), ("b", 1.5), ("c", 2.0), ("d", 0.7), ("e", 1.2)]);
    for theta in [0.1, 0.485, 1.3] {
        let r = analyze_with_theta(&s, theta).unwrap();
        if let Some(want) = r.verdict.expected_label {
            assert_eq!(want, r.taxonomy.label, "theta {theta}");
        }
    }
}

#[test]
fn myeloma_cases_partition_sign_space() {
    let mut seen = std::collections::BTreeSet::new();
    let vals = [-1.3, -0.4, 0.5, 1.7];
    for &a in &vals {
        for &b in &vals {
            for &c in &vals {
                for &e in &vals {
                    for &d in &[0.3, 1.1] {
                        for &f in &[0.2, 0.9] {
                            let l: Letters = [("A", a), ("B", b), ("C", c), ("D", d), ("E", e), ("F", f)]
                                .iter()
                                .map(|(k, v)| (k.to_string(), *v))
                                .collect();
                            match analyze_letters(Family::Myeloma, &l) {
                                Ok(r) => {
                                    seen.insert(r.verdict.case.clone());
                                }
                                Err(Error::NonGeneric(_)) => {}
                                Err(e) => panic!("{l:?}: {e}"),
                            }
                        }
                    }
                }
            }
        }
    }
    for c in ["1", "3", "4", "5A", "5B", "6A", "6B", "7A", "7B"] {
        assert!(seen.contains(c), "case {c} never reached; saw {seen:?}");
    }
}

#[test]
fn chemical_interior_equilibrium() {
    let r = interior_eq_chemical(1.0, 4.0, 2.0, 1.0).unwrap();
    let want = [0.25, 0.5, 0.25];
    for i in 0..3 {
        assert!((r.as_slice()[i] - want[i]).abs() < 1e-12);
    }
    assert!(interior_eq_chemical(1.0, 0.5, 2.0, 1.0).is_err());
}

#[test]
fn chemical_cases_agree_with_taxonomy() {
    let mut seen = std::collections::BTreeSet::new();
    for &e in &[0.5, 1.0, 1.5] {
        for &f in &[-1.0, 0.5, 2.0, 4.0] {
            for &g in &[2.0, 3.0] {
                for &h in &[0.3, 1.2, 2.5] {
                    let s = spec(Family::Chemical, &[("e", e), ("f", f), ("g", g), ("h", h)]);
                    for theta in [0.0, 0.3] {
                        match analyze_with_theta(&s, theta) {
                            Ok(r) => {
                                seen.insert(r.verdict.case.clone());
                            }
                            Err(Error::NonGeneric(_)) => {}
                            Err(err) => panic!("{s:?} theta {theta}: {err}"),
                        }
                    }
                }
            }
        }
    }
    assert!(seen.len() >= 4, "{seen:?}");
}

#[test]
fn glycolytic_case2_is_one_stable_edge() {
    let s = spec(Family::Glycolytic, &[("c", 0.2), ("k", 0.15), ("n", 0.8)]);
    let r = analyze_with_theta(&s, 0.0).unwrap();
    assert_eq!(r.verdict.case, "2");
    assert_eq!(r.taxonomy.label, Label3::L7_3);
}

#[test]
fn glycolytic_sweep_is_consistent() {
    for &c in &[0.05, 0.2, 0.4] {
        for &k in &[-0.3, 0.05, 0.2, 0.6] {
            for &n in &[-0.2, 0.1, 0.5, 0.9] {
                let s = spec(Family::Glycolytic, &[("c", c), ("k", k), ("n", n)]);
                for theta in [0.0, 0.25, 0.8] {
                    match analyze_with_theta(&s, theta) {
                        Ok(_) | Err(Error::NonGeneric(_)) => {}
                        Err(err) => panic!("{s:?} theta {theta}: {err}"),
                    }
                }
            }
        }
    }
}

#[test]
fn stroma_sweep_is_consistent_and_reaches_cases() {
    let mut seen = std::collections::BTreeSet::new();
    for &al in &[0.1, 0.4, 0.9] {
        for &be in &[0.2, 0.45, 0.8] {
            for &ga in &[-0.5, 0.3, 0.7] {
                for &rh in &[0.0, 0.3, 1.0] {
                    let s = spec(Family::Stroma, &[("alpha", al), ("beta", be), ("gamma", ga), ("rho", rh)]);
                    for theta in [0.0, 0.3, 1.0] {
                        match analyze_with_theta(&s, theta) {
                            Ok(r) => {
                                seen.insert(r.verdict.case.clone());
                            }
                            Err(Error::NonGeneric(_)) => {}
                            Err(err) => panic!("{s:?} theta {theta}: {err}"),
                        }
                    }
                }
            }
        }
    }
    assert!(seen.contains("1") || seen.contains("2") || seen.contains("3"), "{seen:?}");
}

#[test]
fn stroma_degenerate_line_is_flagged() {
    let s = spec(Family::Stroma, &[("alpha", 0.2), ("beta", 0.4), ("gamma", 0.5), ("rho", 0.1)]);
    assert_eq!(build(&s).unwrap().get(0, 1), 0.0);
    assert!(matches!(analyze_with_theta(&s, 0.0), Err(Error::NonGeneric(_))));
}

#[test]
fn myeloma_case2_interior_saddle() {
    // c/e = 1/2 and dc/(be) = 1, so neither edge point can be invaded.
    let s = spec(Family::Myeloma, &[("a", 1.0), ("b", 1.0), ("c", 1.0), ("d", 2.0), ("e", 2.0)]);
    let r = analyze_with_theta(&s, 0.0).unwrap();
    assert_eq!(r.verdict.case, "2");
    let rho = evogame::replicator::interior_equilibrium_3(&build(&s).unwrap()).unwrap().unwrap();
    // Equal fitnesses give rho proportional to (ad, cd - be + bc, a(e - c)).
    let (a, b, c, d, e) = (1.0, 1.0, 1.0, 2.0, 2.0);
    let n = [a * d, c * d - b * e + b * c, a * (e - c)];
    let d: f64 = n.iter().sum();
    for i in 0..3 {
        assert!((rho.as_slice()[i] - n[i] / d).abs() < 1e-12, "{rho:?}");
    }
}
