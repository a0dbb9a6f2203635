use evogame::coalescence::{p_escape, Kernel};
use evogame::games::{GameMatrix, UpdateRule};
use evogame::lattice::*;
use evogame::rng::substream;

fn cfg(d: usize, l: usize, game: GameMatrix, w: f64, update: UpdateRule, u: Vec<f64>, t_max: f64) -> LatticeConfig {
    LatticeConfig {
        d,
        l,
        kernel: Kernel::nearest_neighbor(d),
        w,
        update,
        game,
        init: Init::Product { u },
        seed: 11,
        t_max,
        sample_every: t_max / 10.0,
        block_side: None,
    }
}

fn neutral2() -> GameMatrix {
    GameMatrix::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap()
}

/// Flip rates straight from the definitions: `out[y][j]` is the rate at which
/// site `y` changes to strategy `j`.
fn exact_rates(g: &Graph, game: &GameMatrix, w: f64, update: UpdateRule, s: &[u8]) -> Vec<Vec<f64>> {
    let n = game.n();
    let gbar = |a: u8, b: u8| 1.0 + w * game.get(a as usize, b as usize);
    let psi = |x: usize| {
        let (ys, ps) = g.neighbors(x);
        ys.iter().zip(ps).map(|(&y, &p)| p * gbar(s[x], s[y as usize])).sum::<f64>()
    };
    let mut out = vec![vec![0.0; n]; s.len()];
    for y in 0..s.len() {
        let (xs, ps) = g.neighbors(y);
        let total: f64 = xs.iter().zip(ps).map(|(&x, &p)| p * psi(x as usize)).sum();
        for (&x, &p) in xs.iter().zip(ps) {
            let j = s[x as usize] as usize;
            if j == s[y] as usize {
                continue;
            }
            out[y][j] += match update {
                // x fires at rate psi(x) and sends its offspring to y w.p. p
                UpdateRule::BirthDeath => p * psi(x as usize),
                UpdateRule::DeathBirth => p * psi(x as usize) / total,
            };
        }
    }
    out
}

fn check_oracle(update: UpdateRule, state: &[u8]) {
    let g = Graph::triangle();
    let game = GameMatrix::new(vec![vec![0.0, 2.0, -1.0], vec![1.0, 0.0, 3.0], vec![-2.0, 1.0, 0.0]]).unwrap();
    let w = 0.2;
    let rates = exact_rates(&g, &game, w, update, state);
    let total: f64 = rates.iter().flatten().sum();
    let rules = Rules::new(&game, w, update).unwrap();
    let mut eng = Engine::new(&g, rules, state.to_vec(), substream(5, 0)).unwrap();
    let flips = 1_000_000u64;
    let mut counts = vec![vec![0u64; 3]; 3];
    let mut done = 0;
    while done < flips {
        if let Some(f) = eng.fire() {
            counts[f.site][f.to as usize] += 1;
            done += 1;
            eng.set_state(state);
        }
    }
    for y in 0..3 {
        for j in 0..3 {
            let p = rates[y][j] / total;
            let want = p * flips as f64;
            let sd = (flips as f64 * p * (1.0 - p)).sqrt();
            let got = counts[y][j] as f64;
            assert!((got - want).abs() <= 3.0 * sd.max(1e-9), "{update} y={y} j={j}: {got} vs {want} (sd {sd})");
        }
    }
    let rate = flips as f64 / eng.time();
    let sd = total / (flips as f64).sqrt();
    assert!((rate - total).abs() <= 3.0 * sd, "{update}: total rate {rate} vs {total}");
}

#[test]
fn toy_graph_rates_bd() {
    check_oracle(UpdateRule::BirthDeath, &[0, 1, 2]);
    check_oracle(UpdateRule::BirthDeath, &[0, 0, 1]);
}

#[test]
fn toy_graph_rates_db() {
    check_oracle(UpdateRule::DeathBirth, &[0, 1, 2]);
    check_oracle(UpdateRule::DeathBirth, &[2, 0, 2]);
}

#[test]
fn same_seed_same_trace() {
    let game = GameMatrix::gen33([1.0, 2.0, 1.0], [1.0, 1.0, 0.5]).unwrap();
    let mut c = cfg(2, 10, game, 0.05, UpdateRule::DeathBirth, vec![0.3, 0.3, 0.4], 20.0);
    let a = run(&c).unwrap();
    let b = run(&c).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.state, b.state);
    c.seed += 1;
    assert_ne!(run(&c).unwrap().state.sites, a.state.sites);
}

#[test]
fn replicas_do_not_depend_on_thread_count() {
    let c = cfg(2, 8, neutral2(), 0.0, UpdateRule::BirthDeath, vec![0.5, 0.5], 10.0);
    let many = run_replicas(&c, 4).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let one = pool.install(|| run_replicas(&c, 4).unwrap());
    for (x, y) in many.iter().zip(&one) {
        assert_eq!(x.trace, y.trace);
    }
}

#[test]
fn extinct_strategies_stay_extinct() {
    let game = GameMatrix::gen33([1.0, 1.0, 1.0], [1.0, 1.0, 1.0]).unwrap();
    let c = cfg(2, 12, game, 0.1, UpdateRule::BirthDeath, vec![0.5, 0.5, 0.0], 50.0);
    let out = run(&c).unwrap();
    assert!(out.trace.frequencies.iter().all(|f| f[2] == 0.0));
    assert!(out.trace.frequencies.iter().all(|f| on_simplex(f)));
}

#[test]
fn neutral_payoffs_are_the_voter_model() {
    // With G = 0 every birth clock is accepted, so any w gives the w = 0 path.
    for update in [UpdateRule::BirthDeath, UpdateRule::DeathBirth] {
        let a = run(&cfg(2, 10, neutral2(), 0.0, update, vec![0.4, 0.6], 30.0)).unwrap();
        let b = run(&cfg(2, 10, neutral2(), 0.5, update, vec![0.4, 0.6], 30.0)).unwrap();
        assert_eq!(a.trace, b.trace);
    }
}

#[test]
fn voter_density_is_a_martingale() {
    let c = cfg(3, 8, neutral2(), 0.0, UpdateRule::BirthDeath, vec![0.3, 0.7], 40.0);
    let runs = run_replicas(&c, 100).unwrap();
    let drifts: Vec<f64> = runs
        .iter()
        .map(|r| {
            let f0 = r.trace.frequencies[0][0];
            let fs = &r.trace.frequencies[1..];
            fs.iter().map(|f| f[0] - f0).sum::<f64>() / fs.len() as f64
        })
        .collect();
    let m = drifts.iter().sum::<f64>() / 100.0;
    let sd = (drifts.iter().map(|d| (d - m).powi(2)).sum::<f64>() / 99.0).sqrt() / 10.0;
    assert!(m.abs() < 3.0 * sd, "drift {m} vs sd {sd}");
}

#[test]
fn label_swap_symmetry_of_the_voter_model() {
    let a = run_replicas(&cfg(2, 8, neutral2(), 0.0, UpdateRule::DeathBirth, vec![0.3, 0.7], 30.0), 60).unwrap();
    let mut cb = cfg(2, 8, neutral2(), 0.0, UpdateRule::DeathBirth, vec![0.7, 0.3], 30.0);
    cb.seed = 99;
    let b = run_replicas(&cb, 60).unwrap();
    let stats = |rs: &[RunOutput], k: usize| {
        let v: Vec<f64> = rs.iter().map(|r| r.trace.final_frequencies()[k]).collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        (m, var / v.len() as f64)
    };
    let (ma, va) = stats(&a, 0);
    let (mb, vb) = stats(&b, 1);
    assert!((ma - mb).abs() < 4.0 * (va + vb).sqrt(), "{ma} vs {mb}");
}

#[test]
fn block_densities() {
    let mono = LatticeState { d: 2, l: 6, strategies: 2, sites: vec![1; 36], time: 0.0, events: 0, seed: 0 };
    for b in measure_block_densities(&mono, 3).unwrap() {
        assert_eq!(b.as_slice(), &[0.0, 1.0]);
    }
    assert!(measure_block_densities(&mono, 4).is_err());

    let u = 0.3;
    let c = cfg(3, 24, neutral2(), 0.0, UpdateRule::BirthDeath, vec![u, 1.0 - u], 1e-12);
    let s = run(&c).unwrap().state;
    let blocks = measure_block_densities(&s, 4).unwrap();
    let tol = 4.0 * (u * (1.0 - u) / 64.0).sqrt();
    let inside = blocks.iter().filter(|b| (b.as_slice()[0] - u).abs() <= tol).count();
    assert!(inside as f64 >= 0.95 * blocks.len() as f64);
}

#[test]
fn block_mean_tracks_global_mean() {
    let game = GameMatrix::gen33([1.0; 3], [1.0; 3]).unwrap();
    let mut c = cfg(2, 16, game, 0.1, UpdateRule::BirthDeath, vec![1.0 / 3.0; 3], 200.0);
    c.block_side = Some(4);
    let out = run(&c).unwrap();
    let blocks = out.trace.blocks.as_ref().unwrap().last().unwrap();
    let f = out.trace.final_frequencies();
    for i in 0..3 {
        let m = blocks.iter().map(|b| b[i]).sum::<f64>() / blocks.len() as f64;
        assert!((m - f[i]).abs() < 1e-12);
    }
}

#[test]
fn snapshot_file_resumes_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.bin");
    let c = cfg(2, 8, neutral2(), 0.0, UpdateRule::BirthDeath, vec![0.5, 0.5], 5.0);
    let out = run(&c).unwrap();
    out.state.write_snapshot(&p).unwrap();
    let back = LatticeState::read_snapshot(&p).unwrap();
    assert_eq!(back, out.state);
    let mut c2 = c.clone();
    c2.init = Init::File { path: p };
    c2.t_max = 1e-12;
    assert_eq!(run(&c2).unwrap().state.sites, out.state.sites);
}

#[test]
fn rate_bound_is_enforced() {
    let game = GameMatrix::new(vec![vec![0.0, 20.0], vec![-1.0, 0.0]]).unwrap();
    assert!(cfg(2, 8, game, 0.06, UpdateRule::BirthDeath, vec![0.5, 0.5], 1.0).validate().is_err());
    let small = cfg(3, 2, neutral2(), 0.0, UpdateRule::BirthDeath, vec![0.5, 0.5], 1.0);
    assert!(small.validate().is_err());
}

#[test]
fn db_prisoners_dilemma_keeps_cooperators_when_b_over_c_exceeds_kappa() {
    let pd = |b: f64| GameMatrix::new(vec![vec![b - 1.0, -1.0], vec![b, 0.0]]).unwrap();
    let hi = run(&cfg(3, 16, pd(12.0), 0.01, UpdateRule::DeathBirth, vec![0.5, 0.5], 1500.0)).unwrap();
    assert!(hi.trace.final_frequencies()[0] > 0.05);
    let lo = run(&cfg(3, 16, pd(3.0), 0.01, UpdateRule::DeathBirth, vec![0.5, 0.5], 3000.0)).unwrap();
    assert!(lo.trace.final_frequencies()[0] < 0.01);
}

#[test]
fn voter_two_point_matches_escape_probability() {
    let k = Kernel::nearest_neighbor(3);
    let c = cfg(3, 16, neutral2(), 0.0, UpdateRule::BirthDeath, vec![0.5, 0.5], 1.0);
    let r = voter_two_point(&c, &[1, 0, 0], 0.5, 4).unwrap();
    let want = r.predicted.unwrap();
    assert!((want - p_escape(&k, &[1, 0, 0]).unwrap() * 0.25).abs() < 1e-12);
    assert!((r.value - want).abs() < 0.01 + r.halfwidth, "{r:?}");
    let zero = voter_two_point(&c, &[1, 0, 0], 0.0, 2).unwrap();
    assert_eq!(zero.value, 0.0);
    let c2 = cfg(2, 8, neutral2(), 0.0, UpdateRule::BirthDeath, vec![0.5, 0.5], 1.0);
    assert!(voter_two_point(&c2, &[1, 0], 0.5, 1).unwrap().warning.is_some());
}

#[test]
fn escape_probability_grows_with_distance() {
    let k = Kernel::nearest_neighbor(3);
    let mut prev = 0.0;
    for r in 1..=4 {
        let p = p_escape(&k, &[r, 0, 0]).unwrap();
        assert!(p > prev && p < 1.0);
        prev = p;
    }
}
