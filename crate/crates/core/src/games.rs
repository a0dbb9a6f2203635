//! Payoff matrices, weak-selection transforms and reaction terms.
//!
//! Payoffs use the row-player convention: `G[i][j]` is what strategy `i`
//! earns against strategy `j`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const SIMPLEX_TOL: f64 = 1e-12;
const CLAMP_TOL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameFile", into = "GameFile")]
pub struct GameMatrix {
    n: usize,
    entries: Vec<f64>,
    labels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct GameFile {
    #[serde(default)]
    labels: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<GameFile> for GameMatrix {
    type Error = Error;
    fn try_from(f: GameFile) -> Result<Self> {
        let mut g = GameMatrix::new(f.rows)?;
        if !f.labels.is_empty() {
            g = g.with_labels(f.labels)?;
        }
        Ok(g)
    }
}

impl From<GameMatrix> for GameFile {
    fn from(g: GameMatrix) -> Self {
        GameFile { rows: g.rows(), labels: g.labels }
    }
}

impl GameMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if !(n == 2 || n == 3) {
            return invalid(format!("game must have 2 or 3 strategies, got {n}"));
        }
        let mut entries = Vec::with_capacity(n * n);
        for r in &rows {
            if r.len() != n {
                return invalid("game matrix must be square");
            }
            for &x in r {
                if !x.is_finite() {
                    return invalid("game matrix entries must be finite");
                }
                entries.push(x);
            }
        }
        let labels = (1..=n).map(|i| i.to_string()).collect();
        Ok(GameMatrix { n, entries, labels })
    }

    /// Two-strategy game laid out as `(alpha beta; gamma delta)`.
    pub fn two(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Result<Self> {
        Self::new(vec![vec![alpha, beta], vec![gamma, delta]])
    }

    /// Zero-diagonal three-strategy game in the cyclic layout
    /// `[[0, a3, b2], [b3, 0, a1], [a2, b1, 0]]`.
    pub fn gen33(a: [f64; 3], b: [f64; 3]) -> Result<Self> {
        Self::new(vec![
            vec![0.0, a[2], b[1]],
            vec![b[2], 0.0, a[0]],
            vec![a[1], b[0], 0.0],
        ])
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return invalid("label count must match strategy count");
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_zero_diagonal(&self) -> bool {
        (0..self.n).all(|i| self.get(i, i) == 0.0)
    }

    /// `(alpha, beta, gamma, delta)` of a two-strategy game.
    pub fn abcd(&self) -> Result<(f64, f64, f64, f64)> {
        if self.n != 2 {
            return invalid("expected a 2-strategy game");
        }
        Ok((self.get(0, 0), self.get(0, 1), self.get(1, 0), self.get(1, 1)))
    }

    /// `(alpha_1..3, beta_1..3)` of a zero-diagonal three-strategy game.
    pub fn alphas_betas(&self) -> Result<([f64; 3], [f64; 3])> {
        if self.n != 3 || !self.is_zero_diagonal() {
            return invalid("expected a zero-diagonal 3-strategy game");
        }
        let a = [self.get(1, 2), self.get(2, 0), self.get(0, 1)];
        let b = [self.get(2, 1), self.get(0, 2), self.get(1, 0)];
        Ok((a, b))
    }

    /// Reorders strategies: new strategy `k` is old strategy `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> GameMatrix {
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        let labels = perm.iter().map(|&p| self.labels[p].clone()).collect();
        GameMatrix { n, entries, labels }
    }

    fn map_entries(&self, f: impl Fn(usize, usize) -> f64) -> GameMatrix {
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = f(i, j);
            }
        }
        GameMatrix { n, entries, labels: self.labels.clone() }
    }

    /// Payoff vector `(G u)_i`.
    #[inline]
    pub fn payoffs(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += self.entries[i * n + j] * u[j];
            }
            out[i] = s;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UpdateRule {
    #[serde(rename = "bd")]
    BirthDeath,
    #[serde(rename = "db")]
    DeathBirth,
}

impl std::str::FromStr for UpdateRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bd" | "birth-death" | "birthdeath" => Ok(UpdateRule::BirthDeath),
            "db" | "death-birth" | "deathbirth" => Ok(UpdateRule::DeathBirth),
            _ => invalid(format!("unknown update rule '{s}' (expected bd or db)")),
        }
    }
}

impl std::fmt::Display for UpdateRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UpdateRule::BirthDeath => "bd",
            UpdateRule::DeathBirth => "db",
        })
    }
}

/// Coalescence probabilities that fix the weak-selection limit.
///
/// `p1 = p(0|v1|v1+v2)`, `p2 = p(0|v1,v1+v2)`, `pbar1 = p(v1|v2|v2+v3)`,
/// `pbar2 = p(v1|v2,v2+v3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoalescenceConstants {
    pub kappa: f64,
    pub p01: f64,
    pub p1: f64,
    pub p2: f64,
    pub pbar1: f64,
    pub pbar2: f64,
    /// CI half-widths in the field order above (excluding kappa); zero when exact.
    #[serde(default)]
    pub halfwidths: [f64; 5],
}

impl CoalescenceConstants {
    /// Fills `p2`, `pbar2` from the two pair-count identities.
    pub fn from_triples(kappa: f64, p01: f64, p1: f64, pbar1: f64) -> Result<Self> {
        let c = CoalescenceConstants {
            kappa,
            p01,
            p1,
            p2: (p01 - p1) / 2.0,
            pbar1,
            pbar2: (p01 * (1.0 + 1.0 / kappa) - pbar1) / 2.0,
            halfwidths: [0.0; 5],
        };
        c.validate()?;
        Ok(c)
    }

    /// No coalescence at all: every reaction term reduces to the replicator.
    pub fn mean_field() -> Self {
        CoalescenceConstants {
            kappa: f64::INFINITY,
            p01: 1.0,
            p1: 1.0,
            p2: 0.0,
            pbar1: 1.0,
            pbar2: 0.0,
            halfwidths: [0.0; 5],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [self.p01, self.p1, self.p2, self.pbar1, self.pbar2];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return invalid("coalescence probabilities must lie in [0,1]");
        }
        if !(self.kappa >= 1.0) {
            return invalid("kappa must be at least 1");
        }
        let h = &self.halfwidths;
        let tol_bd = 1e-9 + 2.0 * h[2] + h[1] + h[0];
        if (2.0 * self.p2 + self.p1 - self.p01).abs() > tol_bd {
            return invalid("constants violate 2 p2 + p1 = p01");
        }
        let k = 1.0 + 1.0 / self.kappa;
        let tol_db = 1e-9 + 2.0 * h[4] + h[3] + k * h[0];
        if (2.0 * self.pbar2 + self.pbar1 - self.p01 * k).abs() > tol_db {
            return invalid("constants violate 2 pbar2 + pbar1 = p01 (1 + 1/kappa)");
        }
        if self.kappa.is_finite() && self.pbar2 - self.p01 / self.kappa <= 0.0 {
            return invalid("constants violate pbar2 > p01 / kappa");
        }
        Ok(())
    }

    /// `p(v1|v2) / kappa`, zero in the mean-field limit.
    pub fn p01_over_kappa(&self) -> f64 {
        if self.kappa.is_finite() {
            self.p01 / self.kappa
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn new(mut u: Vec<f64>) -> Result<Self> {
        if u.is_empty() {
            return invalid("empty simplex point");
        }
        for x in u.iter_mut() {
            if !x.is_finite() || *x < -CLAMP_TOL {
                return invalid(format!("simplex component {x} out of range"));
            }
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        let s: f64 = u.iter().sum();
        if (s - 1.0).abs() > SIMPLEX_TOL {
            return invalid(format!("simplex components sum to {s}"));
        }
        Ok(SimplexPoint(u))
    }

    pub fn barycenter(n: usize) -> Self {
        SimplexPoint(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Shifts every column so the diagonal vanishes; replicator dynamics are unchanged.
pub fn normalize_zero_diagonal(g: &GameMatrix) -> GameMatrix {
    g.map_entries(|i, j| g.get(i, j) - g.get(j, j))
}

fn require_p(x: f64, name: &str) -> Result<f64> {
    if x == 0.0 || !x.is_finite() {
        Err(Error::Degenerate(format!("{name} must be nonzero")))
    } else {
        Ok(x)
    }
}

/// Scalar shift of the off-diagonal entries of a 2x2 game.
pub fn theta(update: UpdateRule, g2: &GameMatrix, c: &CoalescenceConstants) -> Result<f64> {
    let (a, b, gm, d) = g2.abcd()?;
    let s = a + b - gm - d;
    Ok(match update {
        UpdateRule::BirthDeath => c.p2 / require_p(c.p1, "p1")? * s,
        UpdateRule::DeathBirth => {
            let pb1 = require_p(c.pbar1, "pbar1")?;
            c.pbar2 / pb1 * s - c.p01_over_kappa() / pb1 * (b - gm)
        }
    })
}

/// `(alpha, beta + theta; gamma - theta, delta)`.
pub fn modify_game_2(
    g2: &GameMatrix,
    update: UpdateRule,
    c: &CoalescenceConstants,
) -> Result<GameMatrix> {
    let th = theta(update, g2, c)?;
    let (a, b, gm, d) = g2.abcd()?;
    Ok(GameMatrix::two(a, b + th, gm - th, d)?.with_labels(g2.labels.clone())?)
}

/// `H_ij = (1 + theta) G_ij - theta G_ji`.
pub fn modify_game_3(g3: &GameMatrix, theta: f64) -> Result<GameMatrix> {
    if g3.n != 3 || !g3.is_zero_diagonal() {
        return invalid("modify_game_3 needs a zero-diagonal 3-strategy game");
    }
    Ok(g3.map_entries(|i, j| (1.0 + theta) * g3.get(i, j) - theta * g3.get(j, i)))
}

pub fn theta3(update: UpdateRule, c: &CoalescenceConstants) -> Result<f64> {
    Ok(match update {
        UpdateRule::BirthDeath => c.p2 / require_p(c.p1, "p1")?,
        UpdateRule::DeathBirth => (c.pbar2 - c.p01_over_kappa()) / require_p(c.pbar1, "pbar1")?,
    })
}

/// Skew-symmetric perturbation `A_ij = (p2/p1)(G_ii + G_ij - G_ji - G_jj)`.
pub fn perturbation_bd(g: &GameMatrix, c: &CoalescenceConstants) -> Result<GameMatrix> {
    let l = c.p2 / require_p(c.p1, "p1")?;
    Ok(g.map_entries(|i, j| l * (g.get(i, i) + g.get(i, j) - g.get(j, i) - g.get(j, j))))
}

/// Death-Birth analogue of [`perturbation_bd`].
pub fn perturbation_db(g: &GameMatrix, c: &CoalescenceConstants) -> Result<GameMatrix> {
    let pb1 = require_p(c.pbar1, "pbar1")?;
    let mu = c.pbar2 / pb1;
    let nu = c.p01_over_kappa() / pb1;
    Ok(g.map_entries(|i, j| {
        mu * (g.get(i, i) + g.get(i, j) - g.get(j, i) - g.get(j, j)) - nu * (g.get(i, j) - g.get(j, i))
    }))
}

/// Replicator field `u_i ((G u)_i - u.G u)`, written into `out`.
#[inline]
pub fn phi_r_into(g: &GameMatrix, u: &[f64], out: &mut [f64]) {
    let n = g.n;
    let mut f = [0.0; 3];
    g.payoffs(u, &mut f[..n]);
    let mean: f64 = (0..n).map(|i| u[i] * f[i]).sum();
    for i in 0..n {
        out[i] = u[i] * (f[i] - mean);
    }
}

pub fn phi_r(g: &GameMatrix, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.n];
    phi_r_into(g, u, &mut out);
    out
}

fn pair_sum(g: &GameMatrix, u: &[f64], term: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let n = g.n;
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| u[i] * u[j] * term(i, j))
                .sum()
        })
        .collect()
}

/// Birth-Death reaction term.
pub fn phi_b(g: &GameMatrix, u: &[f64], c: &CoalescenceConstants) -> Vec<f64> {
    let r = phi_r(g, u);
    let s = pair_sum(g, u, |i, j| g.get(i, i) - g.get(j, i) + g.get(i, j) - g.get(j, j));
    r.iter().zip(&s).map(|(r, s)| c.p1 * r + c.p2 * s).collect()
}

/// Death-Birth reaction term.
pub fn phi_d(g: &GameMatrix, u: &[f64], c: &CoalescenceConstants) -> Vec<f64> {
    let r = phi_r(g, u);
    let s = pair_sum(g, u, |i, j| g.get(i, i) - g.get(j, i) + g.get(i, j) - g.get(j, j));
    let t = pair_sum(g, u, |i, j| g.get(i, j) - g.get(j, i));
    let k = c.p01_over_kappa();
    (0..g.n).map(|i| c.pbar1 * r[i] + c.pbar2 * s[i] - k * t[i]).collect()
}

/// Which reaction term drives the limiting dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reaction {
    #[serde(rename = "R")]
    Replicator,
    #[serde(rename = "B")]
    BirthDeath,
    #[serde(rename = "D")]
    DeathBirth,
}

pub fn phi(kind: Reaction, g: &GameMatrix, u: &[f64], c: &CoalescenceConstants) -> Vec<f64> {
    match kind {
        Reaction::Replicator => phi_r(g, u),
        Reaction::BirthDeath => phi_b(g, u, c),
        Reaction::DeathBirth => phi_d(g, u, c),
    }
}
