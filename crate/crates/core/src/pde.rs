//! One-dimensional reaction-diffusion equation
//! `du/dt = (sigma2 / 2) u_xx + phi(u)` on an interval with no-flux ends.
//!
//! Space: centred second differences with mirrored ghost points.
//! Time: classical RK4 on the semi-discrete system.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::games::{
    perturbation_bd, perturbation_db, phi_r_into, CoalescenceConstants, GameMatrix, Reaction, SimplexPoint,
};
use crate::io::atomic_write_with;

/// `phi(u) = scale * phi_R(matrix)(u)`: every reaction kind is a rescaled
/// replicator field of `G` plus a skew-symmetric correction.
#[derive(Debug, Clone)]
pub struct EffectiveReaction {
    pub matrix: GameMatrix,
    pub scale: f64,
}

impl EffectiveReaction {
    pub fn new(kind: Reaction, g: &GameMatrix, c: &CoalescenceConstants) -> Result<Self> {
        if g.n() > 3 {
            return invalid("reaction-diffusion solver supports at most 3 strategies");
        }
        let add = |a: &GameMatrix| -> Result<GameMatrix> {
            let n = g.n();
            GameMatrix::new((0..n).map(|i| (0..n).map(|j| g.get(i, j) + a.get(i, j)).collect()).collect())
        };
        Ok(match kind {
            Reaction::Replicator => EffectiveReaction { matrix: g.clone(), scale: 1.0 },
            Reaction::BirthDeath => EffectiveReaction { matrix: add(&perturbation_bd(g, c)?)?, scale: c.p1 },
            Reaction::DeathBirth => EffectiveReaction { matrix: add(&perturbation_db(g, c)?)?, scale: c.pbar1 },
        })
    }

    #[inline]
    pub fn eval(&self, u: &[f64], out: &mut [f64]) {
        phi_r_into(&self.matrix, u, out);
        for o in out.iter_mut() {
            *o *= self.scale;
        }
    }

    /// Interior rest point of a 2-strategy reaction, as the share of strategy 1.
    pub fn ubar2(&self) -> Option<f64> {
        if self.matrix.n() != 2 {
            return None;
        }
        let m = &self.matrix;
        let num = m.get(0, 1) - m.get(1, 1);
        let den = num + m.get(1, 0) - m.get(0, 0);
        let u = num / den;
        (den != 0.0 && u > 0.0 && u < 1.0).then_some(u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    Uniform { u: Vec<f64> },
    /// `left` for `x < at`, `right` otherwise (`at` in domain units).
    Step { left: Vec<f64>, right: Vec<f64>, at: f64 },
    /// `background` plus a Gaussian bump towards `peak`.
    Bump { background: Vec<f64>, peak: Vec<f64>, center: f64, width: f64 },
    /// CSV with columns `x,u1..un`, linearly interpolated.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RdeConfig {
    pub reaction: Reaction,
    pub game: GameMatrix,
    #[serde(default = "CoalescenceConstants::mean_field")]
    pub constants: CoalescenceConstants,
    pub sigma2: f64,
    pub length: f64,
    pub dx: f64,
    pub dt: f64,
    pub t_max: f64,
    pub initial: Profile,
    /// Spacing of stored profiles and front positions; defaults to `t_max / 100`.
    #[serde(default)]
    pub sample_every: Option<f64>,
    /// Extend the domain when a front comes within 10% of an end.
    #[serde(default)]
    pub auto_widen: bool,
    /// `max |u(t_max) - u(t_max - sample)|` below which the run counts as settled.
    #[serde(default = "default_settle")]
    pub settle_tol: f64,
}

fn default_settle() -> f64 {
    1e-8
}

impl RdeConfig {
    /// Largest explicit step allowed: `0.9 dx^2 / (2 sigma2)`.
    pub fn cfl_limit(&self) -> f64 {
        0.9 * self.dx * self.dx / (2.0 * self.sigma2)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 >= 0.0) || !(self.dx > 0.0) || !(self.dt > 0.0) || !(self.t_max > 0.0) {
            return invalid("sigma2 >= 0 and positive dx, dt, t_max required");
        }
        if !(self.length > 2.0 * self.dx) {
            return invalid("domain must hold at least three grid points");
        }
        if self.sigma2 > 0.0 && self.dt > self.cfl_limit() * (1.0 + 1e-12) {
            return invalid(format!("dt = {} violates the CFL bound {}", self.dt, self.cfl_limit()));
        }
        let n = self.game.n();
        let check = |u: &Vec<f64>| -> Result<()> {
            if u.len() != n {
                return invalid("profile vector has the wrong length");
            }
            SimplexPoint::new(u.clone()).map(|_| ())
        };
        match &self.initial {
            Profile::Uniform { u } => check(u)?,
            Profile::Step { left, right, .. } => {
                check(left)?;
                check(right)?;
            }
            Profile::Bump { background, peak, width, .. } => {
                check(background)?;
                check(peak)?;
                if !(*width > 0.0) {
                    return invalid("bump width must be positive");
                }
            }
            Profile::File { .. } => {}
        }
        Ok(())
    }

    fn grid_points(&self) -> usize {
        (self.length / self.dx).round() as usize + 1
    }

    fn initial_field(&self) -> Result<Vec<f64>> {
        let n = self.game.n();
        let m = self.grid_points();
        let mut u = vec![0.0; m * n];
        let file = match &self.initial {
            Profile::File { path } => Some(read_profile_csv(path, n)?),
            _ => None,
        };
        for k in 0..m {
            let x = k as f64 * self.dx;
            let v: Vec<f64> = match &self.initial {
                Profile::Uniform { u } => u.clone(),
                Profile::Step { left, right, at } => {
                    if x < *at {
                        left.clone()
                    } else {
                        right.clone()
                    }
                }
                Profile::Bump { background, peak, center, width } => {
                    let s = (-((x - center) / width).powi(2)).exp();
                    background.iter().zip(peak).map(|(b, p)| b + s * (p - b)).collect()
                }
                Profile::File { .. } => interpolate(file.as_ref().unwrap(), x),
            };
            u[k * n..(k + 1) * n].copy_from_slice(&v);
        }
        Ok(u)
    }
}

fn read_profile_csv(path: &Path, n: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with('x')) {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Invalid(format!("profile line {} is not numeric", i + 1)))?;
        if v.len() != n + 1 {
            return invalid(format!("profile line {} needs {} columns", i + 1, n + 1));
        }
        SimplexPoint::new(v[1..].to_vec())?;
        rows.push((v[0], v[1..].to_vec()));
    }
    if rows.is_empty() {
        return invalid("profile file is empty");
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(rows)
}

fn interpolate(rows: &[(f64, Vec<f64>)], x: f64) -> Vec<f64> {
    let k = rows.partition_point(|r| r.0 <= x);
    if k == 0 {
        return rows[0].1.clone();
    }
    if k == rows.len() {
        return rows[k - 1].1.clone();
    }
    let (x0, a) = (&rows[k - 1].0, &rows[k - 1].1);
    let (x1, b) = (&rows[k].0, &rows[k].1);
    let s = (x - x0) / (x1 - x0);
    a.iter().zip(b).map(|(p, q)| p + s * (q - p)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub n: usize,
    pub dx: f64,
    /// Position of the first grid point (moves left when the domain widens).
    pub x0: f64,
    pub times: Vec<f64>,
    /// Stored profiles, each flattened point-major (`u[k * n + i]`).
    pub profiles: Vec<Vec<f64>>,
    /// Origin of each stored profile's grid.
    pub origins: Vec<f64>,
    /// Positions where `u_1 = 1/2` at each sample, if a front exists.
    pub front: Vec<Option<f64>>,
    pub max_mass_drift: f64,
    pub steps: u64,
    pub widened: usize,
    pub converged: bool,
}

impl Solution {
    pub fn final_profile(&self) -> &[f64] {
        self.profiles.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn points(&self) -> usize {
        self.final_profile().len() / self.n
    }

    /// CSV rows `t,x,u1..un` for every stored profile.
    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        write!(out, "t,x")?;
        for i in 1..=self.n {
            write!(out, ",u{i}")?;
        }
        writeln!(out)?;
        for ((t, p), x0) in self.times.iter().zip(&self.profiles).zip(&self.origins) {
            for (k, u) in p.chunks(self.n).enumerate() {
                write!(out, "{t},{}", x0 + k as f64 * self.dx)?;
                for v in u {
                    write!(out, ",{v}")?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        atomic_write_with(path, |w| self.write_csv(w))
    }
}

/// Level set `u_1 = 1/2` scanning from the left; linear interpolation.
fn front_position(u: &[f64], n: usize, x0: f64, dx: f64) -> Option<f64> {
    let m = u.len() / n;
    let above0 = u[0] >= 0.5;
    for k in 1..m {
        let (a, b) = (u[(k - 1) * n], u[k * n]);
        if (b >= 0.5) != above0 {
            let s = (0.5 - a) / (b - a);
            return Some(x0 + (k as f64 - 1.0 + s) * dx);
        }
    }
    None
}

struct Stepper {
    n: usize,
    coef: f64,
    reaction: EffectiveReaction,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Stepper {
    fn rhs(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        let m = u.len() / n;
        for k in 0..m {
            // mirrored ghosts: u[-1] = u[1], u[m] = u[m-2]
            let l = if k == 0 { 1.min(m - 1) } else { k - 1 };
            let r = if k + 1 == m { k.saturating_sub(1) } else { k + 1 };
            let (uk, o) = (&u[k * n..(k + 1) * n], &mut out[k * n..(k + 1) * n]);
            self.reaction.eval(uk, o);
            for i in 0..n {
                o[i] += self.coef * (u[l * n + i] - 2.0 * uk[i] + u[r * n + i]);
            }
        }
    }

    fn step(&mut self, u: &mut [f64], dt: f64) {
        let len = u.len();
        for k in self.k.iter_mut() {
            k.resize(len, 0.0);
        }
        self.tmp.resize(len, 0.0);
        let mut k = std::mem::take(&mut self.k);
        self.rhs(u, &mut k[0]);
        for (t, (a, b)) in self.tmp.iter_mut().zip(u.iter().zip(&k[0])) {
            *t = a + 0.5 * dt * b;
        }
        let tmp = std::mem::take(&mut self.tmp);
        self.rhs(&tmp, &mut k[1]);
        self.tmp = tmp;
        for (t, (a, b)) in self.tmp.iter_mut().zip(u.iter().zip(&k[1])) {
            *t = a + 0.5 * dt * b;
        }
        let tmp = std::mem::take(&mut self.tmp);
        self.rhs(&tmp, &mut k[2]);
        self.tmp = tmp;
        for (t, (a, b)) in self.tmp.iter_mut().zip(u.iter().zip(&k[2])) {
            *t = a + dt * b;
        }
        let tmp = std::mem::take(&mut self.tmp);
        self.rhs(&tmp, &mut k[3]);
        self.tmp = tmp;
        for j in 0..len {
            u[j] += dt / 6.0 * (k[0][j] + 2.0 * k[1][j] + 2.0 * k[2][j] + k[3][j]);
        }
        self.k = k;
    }
}

pub fn solve(cfg: &RdeConfig) -> Result<Solution> {
    cfg.validate()?;
    let n = cfg.game.n();
    let reaction = EffectiveReaction::new(cfg.reaction, &cfg.game, &cfg.constants)?;
    let mut u = cfg.initial_field()?;
    let mut st = Stepper {
        n,
        coef: cfg.sigma2 / 2.0 / (cfg.dx * cfg.dx),
        reaction,
        k: Default::default(),
        tmp: Vec::new(),
    };
    let sample = cfg.sample_every.unwrap_or(cfg.t_max / 100.0).max(cfg.dt);
    let mut sol = Solution {
        n,
        dx: cfg.dx,
        x0: 0.0,
        times: Vec::new(),
        profiles: Vec::new(),
        origins: Vec::new(),
        front: Vec::new(),
        max_mass_drift: 0.0,
        steps: 0,
        widened: 0,
        converged: false,
    };
    let store = |sol: &mut Solution, t: f64, u: &[f64]| {
        sol.times.push(t);
        sol.profiles.push(u.to_vec());
        sol.origins.push(sol.x0);
        sol.front.push(front_position(u, n, sol.x0, sol.dx));
    };
    store(&mut sol, 0.0, &u);
    let mut t = 0.0;
    let mut next_sample = sample;
    while t < cfg.t_max - 1e-12 * cfg.t_max {
        let dt = cfg.dt.min(cfg.t_max - t);
        st.step(&mut u, dt);
        t += dt;
        sol.steps += 1;
        for (k, p) in u.chunks_mut(n).enumerate() {
            let s: f64 = p.iter().sum();
            if !s.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite value at x = {} after step {} (t = {t})",
                    sol.x0 + k as f64 * cfg.dx,
                    sol.steps
                )));
            }
            sol.max_mass_drift = sol.max_mass_drift.max((s - 1.0).abs());
            for v in p.iter_mut() {
                *v = v.max(0.0);
            }
            let s: f64 = p.iter().sum();
            for v in p.iter_mut() {
                *v /= s;
            }
        }
        if cfg.auto_widen {
            widen_if_needed(&mut u, &mut sol, n, cfg.length);
        }
        if t >= next_sample - 1e-9 * sample || t >= cfg.t_max * (1.0 - 1e-12) {
            store(&mut sol, t, &u);
            next_sample += sample;
        }
    }
    if sol.times.last() != Some(&t) {
        store(&mut sol, t, &u);
    }
    let k = sol.profiles.len();
    if k >= 2 && sol.profiles[k - 1].len() == sol.profiles[k - 2].len() {
        let change = sol.profiles[k - 1].iter().zip(&sol.profiles[k - 2]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        sol.converged = change < cfg.settle_tol;
    }
    Ok(sol)
}

/// Pads the side a front is approaching by half the original length.
fn widen_if_needed(u: &mut Vec<f64>, sol: &mut Solution, n: usize, length: f64) {
    let m = u.len() / n;
    let Some(x) = front_position(u, n, sol.x0, sol.dx) else {
        return;
    };
    let span = (m - 1) as f64 * sol.dx;
    let pad = ((length / 2.0) / sol.dx).round().max(1.0) as usize;
    if x - sol.x0 < 0.1 * span {
        let first = u[..n].to_vec();
        let mut v = Vec::with_capacity(u.len() + pad * n);
        for _ in 0..pad {
            v.extend_from_slice(&first);
        }
        v.extend_from_slice(u);
        *u = v;
        sol.x0 -= pad as f64 * sol.dx;
        sol.widened += 1;
    } else if sol.x0 + span - x < 0.1 * span {
        let last = u[u.len() - n..].to_vec();
        for _ in 0..pad {
            u.extend_from_slice(&last);
        }
        sol.widened += 1;
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveSpeed {
    /// Positive when strategy 1 advances.
    pub speed: f64,
    pub samples_used: usize,
    /// Interior rest point of a 2-strategy reaction.
    pub ubar: Option<f64>,
    /// Three-strategy runs are exploratory: no theory fixes their direction.
    pub exploratory: bool,
    pub widened: usize,
}

/// Speed of the `u_1 = 1/2` level set, fitted over the second half of the run.
///
/// Expects strategy 1 on the left of the initial step.
pub fn wave_speed(cfg: &RdeConfig) -> Result<WaveSpeed> {
    let reaction = EffectiveReaction::new(cfg.reaction, &cfg.game, &cfg.constants)?;
    if cfg.game.n() == 2 {
        let m = &reaction.matrix;
        let bistable = m.get(0, 0) > m.get(1, 0) && m.get(1, 1) > m.get(0, 1);
        if !bistable {
            return invalid("wave speed needs a bistable reaction; this one has no front between two stable states");
        }
    }
    let sol = solve(cfg)?;
    let start = sol.front[0].ok_or_else(|| Error::Invalid("no front in the initial data".into()))?;
    let left_is_one = sol.profiles[0][0] >= 0.5;
    let t_half = cfg.t_max / 2.0;
    let pts: Vec<(f64, f64)> = sol
        .times
        .iter()
        .zip(&sol.front)
        .filter(|(t, _)| **t >= t_half)
        .filter_map(|(t, x)| x.map(|x| (*t, x)))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Invalid(format!(
            "front from x = {start} disappeared; the reaction is not bistable or the domain is too short"
        )));
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let mx = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mx)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(WaveSpeed {
        speed: if left_is_one { slope } else { -slope },
        samples_used: pts.len(),
        ubar: reaction.ubar2(),
        exploratory: cfg.game.n() != 2,
        widened: sol.widened,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::phi;

    #[test]
    fn effective_matrix_reproduces_reactions() {
        let g = GameMatrix::gen33([1.0, -2.0, 0.5], [0.3, 2.0, -1.0]).unwrap();
        let c = CoalescenceConstants::from_triples(6.0, 0.6594626704, 0.325, 0.345).unwrap();
        let u = [0.2, 0.5, 0.3];
        for kind in [Reaction::Replicator, Reaction::BirthDeath, Reaction::DeathBirth] {
            let e = EffectiveReaction::new(kind, &g, &c).unwrap();
            let mut out = [0.0; 3];
            e.eval(&u, &mut out);
            let want = phi(kind, &g, &u, &c);
            for i in 0..3 {
                assert!((out[i] - want[i]).abs() < 1e-14, "{kind:?}");
            }
        }
    }

    #[test]
    fn front_interpolates() {
        let u = [1.0, 0.0, 0.75, 0.25, 0.25, 0.75];
        assert!((front_position(&u, 2, 0.0, 1.0).unwrap() - 1.5).abs() < 1e-12);
    }
}
