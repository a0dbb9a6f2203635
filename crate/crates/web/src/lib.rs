//! Browser bindings for the demo page in `www/`.
//!
//! Each export has a plain Rust counterpart returning `Result<_, String>` so it
//! can be exercised natively.

use evogame::classifier::{phase_region, Region2};
use evogame::games::{phi, CoalescenceConstants, GameMatrix, Reaction, SimplexPoint, UpdateRule};
use evogame::pde::{solve, wave_speed, Profile, RdeConfig};
use evogame::presets;
use evogame::replicator::{integrate_field, Domain, StepControl};
use wasm_bindgen::prelude::*;

fn constants() -> Result<CoalescenceConstants, String> {
    presets::constants("preset:paper-3d-nn").map_err(|e| e.to_string())
}

fn rule(s: &str) -> Result<UpdateRule, String> {
    s.parse().map_err(|e: evogame::Error| e.to_string())
}

fn reaction(s: &str) -> Result<Reaction, String> {
    match s {
        "R" => Ok(Reaction::Replicator),
        "B" => Ok(Reaction::BirthDeath),
        "D" => Ok(Reaction::DeathBirth),
        _ => Err(format!("unknown reaction '{s}'")),
    }
}

fn square(entries: &[f64]) -> Result<GameMatrix, String> {
    let n = (entries.len() as f64).sqrt() as usize;
    if n * n != entries.len() {
        return Err("payoff entries must form a square matrix".into());
    }
    GameMatrix::new(entries.chunks(n).map(|r| r.to_vec()).collect()).map_err(|e| e.to_string())
}

/// Region code of a phase-diagram cell.
pub fn region_code(r: Option<Region2>) -> u8 {
    match r {
        None => 0,
        Some(Region2::Coexist) => 1,
        Some(Region2::OneDominates) => 2,
        Some(Region2::TwoDominates) => 3,
        Some(Region2::Bistable1Wins) => 4,
        Some(Region2::Bistable2Wins) => 5,
    }
}

/// Row-major `n x n` grid of region codes over `S in [s0, s1]` (columns) and
/// `T in [t0, t1]` (rows, bottom to top), with `R = 1`, `P = 0`. A positive
/// `lambda` overrides `p2 / p1` under birth-death updating.
pub fn phase_grid_codes(update: &str, lambda: f64, s0: f64, s1: f64, t0: f64, t1: f64, n: usize) -> Result<Vec<u8>, String> {
    let update = rule(update)?;
    let mut c = constants()?;
    if lambda > 0.0 && update == UpdateRule::BirthDeath {
        c.p1 = c.p01 / (1.0 + 2.0 * lambda);
        c.p2 = lambda * c.p1;
    }
    if !(2..=1000).contains(&n) {
        return Err("grid size must be between 2 and 1000".into());
    }
    let at = |lo: f64, hi: f64, k: usize| lo + (hi - lo) * k as f64 / (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let r = phase_region(1.0, at(s0, s1, i), at(t0, t1, j), 0.0, update, &c).ok();
            out.push(region_code(r.map(|r| r.verdict.region)));
        }
    }
    Ok(out)
}

/// Trajectory of the reaction ODE for a 3x3 game as rows `t, u1, u2, u3`.
pub fn trajectory_rows(game: &[f64], u0: &[f64], t_max: f64, kind: &str) -> Result<Vec<f64>, String> {
    let g = square(game)?;
    if g.n() != 3 || u0.len() != 3 {
        return Err("trajectories need a 3-strategy game".into());
    }
    let kind = reaction(kind)?;
    let c = constants()?;
    let u0 = SimplexPoint::new(u0.to_vec()).map_err(|e| e.to_string())?;
    if !(t_max > 0.0 && t_max <= 1e4) {
        return Err("t_max must lie in (0, 1e4]".into());
    }
    let ctl = StepControl { rtol: 1e-8, atol: 1e-10, h_max: t_max / 200.0, stop_on_boundary: false, ..StepControl::default() };
    let tr = integrate_field(|u, o| o.copy_from_slice(&phi(kind, &g, u, &c)), u0.as_slice(), t_max, Domain::Simplex, &ctl)
        .map_err(|s| evogame::Error::from(s).to_string())?;
    Ok(tr.times.iter().zip(&tr.states).flat_map(|(t, u)| std::iter::once(*t).chain(u.iter().copied())).collect())
}

/// Front between strategy 1 (left) and strategy 2 (right) for a 2x2 game, as JSON
/// `{x0, dx, times, u1: [[...]], speed}`; `speed` is null for non-bistable reactions.
pub fn front_json(game: &[f64], kind: &str, t_max: f64) -> Result<String, String> {
    let g = square(game)?;
    if g.n() != 2 {
        return Err("fronts need a 2-strategy game".into());
    }
    if !(t_max > 0.0 && t_max <= 200.0) {
        return Err("t_max must lie in (0, 200]".into());
    }
    let cfg = RdeConfig {
        reaction: reaction(kind)?,
        game: g,
        constants: constants()?,
        sigma2: 1.0,
        length: 40.0,
        dx: 0.2,
        dt: 0.01,
        t_max,
        initial: Profile::Step { left: vec![1.0, 0.0], right: vec![0.0, 1.0], at: 20.0 },
        sample_every: Some(t_max / 40.0),
        auto_widen: false,
        settle_tol: 1e-8,
    };
    let sol = solve(&cfg).map_err(|e| e.to_string())?;
    let speed = wave_speed(&cfg).ok().map(|w| w.speed);
    let u1: Vec<Vec<f64>> = sol.profiles.iter().map(|p| p.chunks(sol.n).map(|u| u[0]).collect()).collect();
    Ok(serde_json::json!({
        "x0": sol.x0,
        "dx": sol.dx,
        "times": sol.times,
        "u1": u1,
        "speed": speed,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn phase_grid(update: &str, lambda: f64, s0: f64, s1: f64, t0: f64, t1: f64, n: usize) -> Result<Vec<u8>, JsError> {
    phase_grid_codes(update, lambda, s0, s1, t0, t1, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn trajectory(game: &[f64], u0: &[f64], t_max: f64, kind: &str) -> Result<Vec<f64>, JsError> {
    trajectory_rows(game, u0, t_max, kind).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn front(game: &[f64], kind: &str, t_max: f64) -> Result<String, JsError> {
    front_json(game, kind, t_max).map_err(|e| JsError::new(&e))
}
