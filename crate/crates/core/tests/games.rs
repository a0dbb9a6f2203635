use evogame::games::{
    modify_game_2, modify_game_3, normalize_zero_diagonal, perturbation_bd, perturbation_db, phi, phi_b, phi_d, phi_r,
    theta3, CoalescenceConstants, GameMatrix, Reaction, SimplexPoint, UpdateRule,
};
use proptest::prelude::*;

/// `u_i ((G u)_i - u.G u)` evaluated from plain rows.
fn replicator(g: &[Vec<f64>], u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let f: Vec<f64> = (0..n).map(|i| (0..n).map(|j| g[i][j] * u[j]).sum()).collect();
    let mean: f64 = (0..n).map(|i| u[i] * f[i]).sum();
    (0..n).map(|i| u[i] * (f[i] - mean)).collect()
}

fn entries(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0..5.0f64, n), n)
}

fn zero_diag3() -> impl Strategy<Value = Vec<Vec<f64>>> {
    entries(3).prop_map(|mut g| {
        for (i, row) in g.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        g
    })
}

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, n).prop_filter_map("nonzero weights", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| w.iter().map(|x| x / s).collect())
    })
}

fn game_and_point() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (2usize..=3).prop_flat_map(|n| (entries(n), simplex(n)))
}

/// Valid constants: `p2 >= 0` and `pbar2 > p01 / kappa`.
fn constants() -> impl Strategy<Value = CoalescenceConstants> {
    (2.0..30.0f64, 0.3..0.95f64, 0.1..1.0f64, 0.05..0.95f64).prop_map(|(kappa, p01, f1, fb)| {
        CoalescenceConstants::from_triples(kappa, p01, f1 * p01, fb * p01 * (1.0 - 1.0 / kappa)).unwrap()
    })
}

fn max_abs(g: &[Vec<f64>]) -> f64 {
    g.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()))
}

proptest! {
    #[test]
    fn reaction_terms_sum_to_zero((rows, u) in game_and_point(), c in constants()) {
        let g = GameMatrix::new(rows.clone()).unwrap();
        let tol = 1e-12 * max_abs(&rows).max(1.0);
        for kind in [Reaction::Replicator, Reaction::BirthDeath, Reaction::DeathBirth] {
            let s: f64 = phi(kind, &g, &u, &c).iter().sum();
            prop_assert!(s.abs() <= tol, "{kind:?}: sum {s:e}");
        }
    }

    #[test]
    fn bd_and_db_are_rescaled_replicators_of_the_modified_game(rows in zero_diag3(), c in constants(), u in simplex(3)) {
        let g = GameMatrix::new(rows.clone()).unwrap();
        for (update, scale, direct) in [
            (UpdateRule::BirthDeath, c.p1, phi_b(&g, &u, &c)),
            (UpdateRule::DeathBirth, c.pbar1, phi_d(&g, &u, &c)),
        ] {
            let th = theta3(update, &c).unwrap();
            // Modified rows built here, not through the library.
            let h: Vec<Vec<f64>> = (0..3)
                .map(|i| (0..3).map(|j| (1.0 + th) * rows[i][j] - th * rows[j][i]).collect())
                .collect();
            let lib = modify_game_3(&g, th).unwrap();
            prop_assert_eq!(lib.rows(), h.clone());
            let want = replicator(&h, &u);
            let tol = 1e-12 * max_abs(&h).max(1.0);
            for i in 0..3 {
                prop_assert!((direct[i] - scale * want[i]).abs() <= tol, "{update:?} component {i}");
            }
        }
    }

    #[test]
    fn perturbations_are_skew(rows in entries(3), c in constants(), u in simplex(3)) {
        let g = GameMatrix::new(rows).unwrap();
        for a in [perturbation_bd(&g, &c).unwrap(), perturbation_db(&g, &c).unwrap()] {
            let mut quad = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((a.get(i, j) + a.get(j, i)).abs() <= 1e-12 * a.max_abs().max(1.0));
                    quad += u[i] * a.get(i, j) * u[j];
                }
            }
            prop_assert!(quad.abs() <= 1e-12 * a.max_abs().max(1.0));
        }
    }

    #[test]
    fn zero_diagonal_normalization_keeps_the_replicator((rows, u) in game_and_point()) {
        let g = GameMatrix::new(rows.clone()).unwrap();
        let z = normalize_zero_diagonal(&g);
        prop_assert!(z.is_zero_diagonal());
        let (a, b) = (phi_r(&g, &u), phi_r(&z, &u));
        for i in 0..u.len() {
            prop_assert!((a[i] - b[i]).abs() <= 1e-12 * max_abs(&rows).max(1.0));
        }
    }

    #[test]
    fn symmetric_games_are_not_modified(x in prop::array::uniform3(-5.0..5.0f64), th in -2.0..2.0f64) {
        let g = GameMatrix::new(vec![
            vec![0.0, x[0], x[1]],
            vec![x[0], 0.0, x[2]],
            vec![x[1], x[2], 0.0],
        ]).unwrap();
        let h = modify_game_3(&g, th).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((h.get(i, j) - g.get(i, j)).abs() <= 1e-14 * (1.0 + th.abs()) * g.max_abs());
            }
        }
    }

    #[test]
    fn mean_field_constants_give_the_replicator(rows in entries(3), u in simplex(3)) {
        let g = GameMatrix::new(rows).unwrap();
        let c = CoalescenceConstants::mean_field();
        let r = phi_r(&g, &u);
        for kind in [Reaction::BirthDeath, Reaction::DeathBirth] {
            let v = phi(kind, &g, &u, &c);
            for i in 0..3 {
                prop_assert!((v[i] - r[i]).abs() <= 1e-14 * g.max_abs().max(1.0));
            }
        }
    }

    #[test]
    fn cyclic_relabelling_rotates_gen33(a in prop::array::uniform3(-5.0..5.0f64), b in prop::array::uniform3(-5.0..5.0f64)) {
        let g = GameMatrix::gen33(a, b).unwrap();
        let (a2, b2) = g.permuted(&[1, 2, 0]).alphas_betas().unwrap();
        prop_assert_eq!(a2, [a[1], a[2], a[0]]);
        prop_assert_eq!(b2, [b[1], b[2], b[0]]);
    }

    #[test]
    fn two_strategy_modification_shifts_off_diagonal(r in -5.0..5.0f64, s in -5.0..5.0f64, t in -5.0..5.0f64, p in -5.0..5.0f64, c in constants()) {
        let g = GameMatrix::two(r, s, t, p).unwrap();
        for update in [UpdateRule::BirthDeath, UpdateRule::DeathBirth] {
            let h = modify_game_2(&g, update, &c).unwrap();
            let (a, b, gm, d) = h.abcd().unwrap();
            prop_assert_eq!((a, d), (r, p));
            prop_assert!(((b - s) + (gm - t)).abs() < 1e-12);
        }
    }

    #[test]
    fn simplex_points_clamp_only_roundoff(u in simplex(3), eps in 0.0..1e-15f64) {
        let mut v = u.clone();
        let k = v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        let j = (k + 1) % 3;
        v[k] += v[j] + eps;
        v[j] = -eps;
        let p = SimplexPoint::new(v).unwrap();
        prop_assert!(p.as_slice().iter().all(|&x| x >= 0.0));
        let mut w = u;
        w[0] += 1e-9;
        prop_assert!(SimplexPoint::new(w).is_err());
    }
}

#[test]
fn vertices_are_rest_points() {
    let g = GameMatrix::new(vec![vec![0.0, 2.0, -1.0], vec![-1.0, 0.0, 2.0], vec![2.0, -1.0, 0.0]]).unwrap();
    let c = CoalescenceConstants::from_triples(6.0, 0.6404566, 0.325, 0.345).unwrap();
    for k in 0..3 {
        let mut u = vec![0.0; 3];
        u[k] = 1.0;
        for kind in [Reaction::Replicator, Reaction::BirthDeath, Reaction::DeathBirth] {
            assert_eq!(phi(kind, &g, &u, &c), vec![0.0; 3]);
        }
    }
}

#[test]
fn hawk_dove_modified_game() {
    // Hawk-Dove with V = 2, C = 3: the modification keeps the diagonal.
    let g = GameMatrix::two(-0.5, 2.0, 0.0, 1.0).unwrap();
    let c = CoalescenceConstants::from_triples(6.0, 0.6404566, 0.325, 0.345).unwrap();
    let th = c.p2 / c.p1 * (-0.5 + 2.0 - 0.0 - 1.0);
    let h = modify_game_2(&g, UpdateRule::BirthDeath, &c).unwrap();
    assert_eq!(h.rows(), vec![vec![-0.5, 2.0 + th], vec![0.0 - th, 1.0]]);
}
