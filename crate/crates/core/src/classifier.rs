//! Phase classification of 2-strategy games and the taxonomy of
//! 3-strategy replicator portraits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::{
    modify_game_2, phi, theta3, modify_game_3, CoalescenceConstants, GameMatrix, Reaction, UpdateRule,
};
use crate::replicator::{acs_check, interior_equilibrium_3, interior_numerators, invasion_margin, side_pair, AcsReport};

/// Magnitudes below this are treated as exact ties.
pub const GENERIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case2 {
    S1,
    S2,
    S3,
    S4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region2 {
    Coexist,
    #[serde(rename = "1>>2")]
    OneDominates,
    #[serde(rename = "2>>1")]
    TwoDominates,
    Bistable1Wins,
    Bistable2Wins,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseVerdict2 {
    pub case: Case2,
    pub equilibrium: Option<f64>,
    /// Strategy (1 or 2) that takes over.
    pub winner: Option<u8>,
    pub region: Region2,
}

fn verdict(case: Case2, ubar: Option<f64>, one_wins_bistable: bool) -> PhaseVerdict2 {
    let (winner, region) = match case {
        Case2::S1 => (None, Region2::Coexist),
        Case2::S2 if one_wins_bistable => (Some(1), Region2::Bistable1Wins),
        Case2::S2 => (Some(2), Region2::Bistable2Wins),
        Case2::S3 => (Some(2), Region2::TwoDominates),
        Case2::S4 => (Some(1), Region2::OneDominates),
    };
    PhaseVerdict2 { case, equilibrium: ubar, winner, region }
}

fn case_from(beta_minus_delta: f64, alpha_minus_gamma: f64) -> Result<Case2> {
    if beta_minus_delta.abs() < GENERIC_TOL || alpha_minus_gamma.abs() < GENERIC_TOL {
        return Err(Error::NonGeneric(format!(
            "on a phase boundary (beta-delta = {beta_minus_delta:e}, alpha-gamma = {alpha_minus_gamma:e})"
        )));
    }
    Ok(match (beta_minus_delta > 0.0, alpha_minus_gamma < 0.0) {
        (true, true) => Case2::S1,
        (false, false) => Case2::S2,
        (false, true) => Case2::S3,
        (true, false) => Case2::S4,
    })
}

/// Case of the cubic replicator field of an (already modified) 2x2 game.
pub fn classify2(g: &GameMatrix) -> Result<PhaseVerdict2> {
    let (a, b, c, d) = g.abcd()?;
    let case = case_from(b - d, a - c)?;
    let ubar = matches!(case, Case2::S1 | Case2::S2).then(|| (b - d) / (b - d + c - a));
    // phi(1/2) = (1/4)(beta - delta + Gamma/2)
    let half = b - d + (a - b - c + d) / 2.0;
    if case == Case2::S2 && half.abs() < GENERIC_TOL {
        return Err(Error::NonGeneric("bistable with the unstable point at 1/2".into()));
    }
    Ok(verdict(case, ubar, half > 0.0))
}

/// A phase boundary `T - R* = slope (S - P*)` in the (S, T) plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub slope: f64,
    pub s0: f64,
    pub t0: f64,
}

impl Line {
    pub fn t_at(&self, s: f64) -> f64 {
        self.t0 + self.slope * (s - self.s0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseRegion {
    pub verdict: PhaseVerdict2,
    pub lambda: f64,
    pub nu: f64,
    pub p_star: f64,
    pub r_star: f64,
    /// `alpha = gamma` line.
    pub line1: Line,
    /// `beta = delta` line.
    pub line2: Line,
}

/// Locates `(R, S, T, P)` in the phase diagram of the given update rule.
pub fn phase_region(
    r: f64,
    s: f64,
    t: f64,
    p: f64,
    update: UpdateRule,
    c: &CoalescenceConstants,
) -> Result<PhaseRegion> {
    let (lambda, nu) = match update {
        UpdateRule::BirthDeath => (c.p2 / c.p1, 0.0),
        UpdateRule::DeathBirth => {
            let mu = c.pbar2 / c.pbar1;
            let nu = c.p01_over_kappa() / c.pbar1;
            (mu - nu, nu)
        }
    };
    if !(lambda.is_finite() && nu.is_finite()) || 1.0 + 2.0 * lambda == 0.0 {
        return Err(Error::Degenerate("coalescence constants give no phase diagram".into()));
    }
    let shift = nu * (r - p) / (1.0 + 2.0 * lambda);
    let (ps, rs) = (p - shift, r + shift);
    // gamma - alpha and beta - delta written through the shifted origin.
    let gamma_minus_alpha = (1.0 + lambda) * (t - rs) - lambda * (s - ps);
    let beta_minus_delta = (1.0 + lambda) * (s - ps) - lambda * (t - rs);
    let case = case_from(beta_minus_delta, -gamma_minus_alpha)?;
    let ubar = match case {
        Case2::S1 | Case2::S2 => {
            let theta = match update {
                UpdateRule::BirthDeath => lambda * (r + s - t - p),
                UpdateRule::DeathBirth => (lambda + nu) * (r + s - t - p) - nu * (s - t),
            };
            Some((s - p + theta) / (s - p + t - r))
        }
        _ => None,
    };
    let one_wins = rs - t > ps - s;
    if case == Case2::S2 && ((rs - t) - (ps - s)).abs() < GENERIC_TOL {
        return Err(Error::NonGeneric("on the bistable dividing line".into()));
    }
    Ok(PhaseRegion {
        verdict: verdict(case, ubar, one_wins),
        lambda,
        nu,
        p_star: ps,
        r_star: rs,
        line1: Line { slope: lambda / (1.0 + lambda), s0: ps, t0: rs },
        line2: Line { slope: (1.0 + lambda) / lambda, s0: ps, t0: rs },
    })
}

/// Structure coefficient of the two-strategy favoured-strategy condition.
pub fn sigma(update: UpdateRule, kappa: f64) -> Result<f64> {
    match update {
        UpdateRule::BirthDeath => Ok(1.0),
        UpdateRule::DeathBirth if kappa.is_infinite() => Ok(1.0),
        UpdateRule::DeathBirth if kappa == 1.0 => {
            Err(Error::Degenerate("sigma = (kappa+1)/(kappa-1) is undefined at kappa = 1".into()))
        }
        UpdateRule::DeathBirth => Ok((kappa + 1.0) / (kappa - 1.0)),
    }
}

/// `sigma R + S > T + sigma P`.
pub fn tarnita_favored2(g: &GameMatrix, update: UpdateRule, kappa: f64) -> Result<bool> {
    let (r, s, t, p) = g.abcd()?;
    let sg = sigma(update, kappa)?;
    Ok(sg * r + s > t + sg * p)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Favored {
    /// Reaction term at the barycenter.
    pub phi: Vec<f64>,
    pub favored: Vec<bool>,
}

/// Strategy `k` is favoured when the reaction term is positive at the barycenter.
pub fn favored_by_selection_n(g: &GameMatrix, update: UpdateRule, c: &CoalescenceConstants) -> Favored {
    let n = g.n();
    let u = vec![1.0 / n as f64; n];
    let kind = match update {
        UpdateRule::BirthDeath => Reaction::BirthDeath,
        UpdateRule::DeathBirth => Reaction::DeathBirth,
    };
    let phi = phi(kind, g, &u, c);
    let tol = 1e-12 * g.max_abs().max(1.0);
    let favored = phi.iter().map(|&x| x > tol).collect();
    Favored { phi, favored }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Attracting,
    Repelling,
    /// The first strategy of the side's pair dominates the second.
    FirstDominates,
    SecondDominates,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeReport {
    /// Index `k` of the side `u_k = 0` (1-based).
    pub side: usize,
    /// The two strategies on the side (1-based), `alpha = H[i][j]`, `beta = H[j][i]`.
    pub strategies: (usize, usize),
    pub alpha: f64,
    pub beta: f64,
    pub kind: EdgeKind,
    /// Mixed equilibrium on the side, as a full state.
    pub point: Option<Vec<f64>>,
    /// Numerator of the interior equilibrium coordinate of the missing strategy.
    pub numerator: f64,
    /// Growth rate of the missing strategy at the mixed point.
    pub invasion_margin: Option<f64>,
    pub invadable: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label3 {
    #[serde(rename = "7.1")]
    L7_1,
    #[serde(rename = "7.1A")]
    L7_1A,
    #[serde(rename = "7.2")]
    L7_2,
    #[serde(rename = "7.2A")]
    L7_2A,
    #[serde(rename = "7.2B")]
    L7_2B,
    #[serde(rename = "7.3")]
    L7_3,
    #[serde(rename = "7.3A")]
    L7_3A,
    #[serde(rename = "7.3B")]
    L7_3B,
    #[serde(rename = "7.3C")]
    L7_3C,
    #[serde(rename = "7.3D")]
    L7_3D,
    #[serde(rename = "7.4")]
    L7_4,
    #[serde(rename = "7.4A")]
    L7_4A,
    #[serde(rename = "non-generic")]
    NonGeneric,
}

impl Label3 {
    pub fn as_str(self) -> &'static str {
        match self {
            Label3::L7_1 => "7.1",
            Label3::L7_1A => "7.1A",
            Label3::L7_2 => "7.2",
            Label3::L7_2A => "7.2A",
            Label3::L7_2B => "7.2B",
            Label3::L7_3 => "7.3",
            Label3::L7_3A => "7.3A",
            Label3::L7_3B => "7.3B",
            Label3::L7_3C => "7.3C",
            Label3::L7_3D => "7.3D",
            Label3::L7_4 => "7.4",
            Label3::L7_4A => "7.4A",
            Label3::NonGeneric => "non-generic",
        }
    }

    /// Classes with a repelling-function construction.
    pub fn has_repelling_construction(self) -> bool {
        matches!(self, Label3::L7_1 | Label3::L7_2 | Label3::L7_3)
    }
}

impl std::fmt::Display for Label3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum Prediction {
    CoexistenceProved,
    /// Replicator solutions from the interior converge to `point`.
    ConvergesTo { point: Vec<f64> },
    BistableConjectured,
    CoexistenceConjectured,
    /// `strategy` (1-based) is expected to die out.
    DiesOutConjectured { strategy: usize },
    /// Replicator solutions approach the boundary.
    BoundaryApproach,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProofStatus {
    /// Spatial coexistence follows from a repelling function.
    Proved,
    /// The replicator limit is a theorem; the spatial statement is not.
    OdeProved,
    Conjectured,
    Open,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Taxonomy3 {
    pub label: Label3,
    /// Shift applied to the input game; `None` when the game came pre-modified.
    pub theta: Option<f64>,
    /// The modified game the analysis ran on.
    pub modified: Vec<Vec<f64>>,
    pub edges: Vec<EdgeReport>,
    pub stable_edges: usize,
    pub invadable_edges: usize,
    pub prediction: Prediction,
    pub proof_status: ProofStatus,
    pub interior_fp: Option<Vec<f64>>,
    pub delta: Option<f64>,
    pub acs: Option<AcsReport>,
    pub notes: Vec<String>,
}

fn edge_report(h: &GameMatrix, k: usize, num: f64) -> Result<EdgeReport> {
    let (i, j) = side_pair(k);
    let (alpha, beta) = (h.get(i, j), h.get(j, i));
    let kind = match (alpha > 0.0, beta > 0.0) {
        (true, true) => EdgeKind::Attracting,
        (false, false) => EdgeKind::Repelling,
        (true, false) => EdgeKind::FirstDominates,
        (false, true) => EdgeKind::SecondDominates,
    };
    let (point, margin) = match kind {
        EdgeKind::Attracting | EdgeKind::Repelling => {
            let s = alpha + beta;
            let mut u = vec![0.0; 3];
            u[i] = alpha / s;
            u[j] = beta / s;
            (Some(u), invasion_margin(h, k)?)
        }
        _ => (None, None),
    };
    Ok(EdgeReport {
        side: k + 1,
        strategies: (i + 1, j + 1),
        alpha,
        beta,
        kind,
        point,
        numerator: num,
        invasion_margin: margin,
        invadable: margin.map(|m| m > 0.0),
    })
}

/// `winner >> loser` on their shared side.
fn dominates(h: &GameMatrix, winner: usize, loser: usize) -> bool {
    h.get(winner, loser) > 0.0 && h.get(loser, winner) < 0.0
}

/// Classifies a zero-diagonal 3x3 game after the weak-selection modification.
pub fn classify3(g: &GameMatrix, update: UpdateRule, c: &CoalescenceConstants) -> Result<Taxonomy3> {
    let theta = theta3(update, c)?;
    let h = modify_game_3(g, theta)?;
    classify_modified(&h, Some(theta))
}

/// Taxonomy of an already modified game `h`.
pub fn classify_modified(h: &GameMatrix, theta: Option<f64>) -> Result<Taxonomy3> {
    let (a, b) = h.alphas_betas()?;
    let num = interior_numerators(a, b);
    let mut notes = Vec::new();
    let mut t = Taxonomy3 {
        label: Label3::NonGeneric,
        theta,
        modified: h.rows(),
        edges: Vec::new(),
        stable_edges: 0,
        invadable_edges: 0,
        prediction: Prediction::Undetermined,
        proof_status: ProofStatus::Open,
        interior_fp: None,
        delta: None,
        acs: None,
        notes: Vec::new(),
    };
    if a.iter().chain(&b).any(|x| x.abs() < GENERIC_TOL) {
        t.notes.push("an edge entry vanishes".into());
        return Ok(t);
    }
    t.edges = (0..3).map(|k| edge_report(h, k, num[k])).collect::<Result<_>>()?;
    if t.edges.iter().any(|e| e.invasion_margin.is_some_and(|m| m.abs() < GENERIC_TOL)) {
        t.notes.push("an invasion margin vanishes".into());
        return Ok(t);
    }
    t.interior_fp = match interior_equilibrium_3(h) {
        Ok(r) => r.map(|r| r.into_vec()),
        Err(Error::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    t.acs = acs_check(h);

    let stable: Vec<usize> = (0..3).filter(|&k| t.edges[k].kind == EdgeKind::Attracting).collect();
    let repelling: Vec<usize> = (0..3).filter(|&k| t.edges[k].kind == EdgeKind::Repelling).collect();
    t.stable_edges = stable.len();
    t.invadable_edges = stable.iter().filter(|&&k| t.edges[k].invadable == Some(true)).count();
    let point = |k: usize| t.edges[k].point.clone().expect("attracting edge has a point");
    let vertex = |v: usize| {
        let mut u = vec![0.0; 3];
        u[v] = 1.0;
        u
    };

    let (label, prediction, status) = if !repelling.is_empty() {
        for &k in &repelling {
            notes.push(format!(
                "side u{} = 0 has an unstable mixed equilibrium; no repelling function exists",
                k + 1
            ));
        }
        (Label3::L7_2B, Prediction::BistableConjectured, ProofStatus::Conjectured)
    } else {
        match stable.len() {
            3 => match t.invadable_edges {
                3 => (Label3::L7_1, Prediction::CoexistenceProved, ProofStatus::Proved),
                2 => {
                    let k = *stable.iter().find(|&&k| t.edges[k].invadable == Some(false)).unwrap();
                    (Label3::L7_1A, Prediction::ConvergesTo { point: point(k) }, ProofStatus::OdeProved)
                }
                n => {
                    return Err(Error::Numeric(format!(
                        "three stable edges with {n} invadable contradicts the invadability lemma"
                    )))
                }
            },
            2 => match t.invadable_edges {
                2 => (Label3::L7_2, Prediction::CoexistenceProved, ProofStatus::Proved),
                1 => {
                    let k = *stable.iter().find(|&&k| t.edges[k].invadable == Some(false)).unwrap();
                    (Label3::L7_2A, Prediction::ConvergesTo { point: point(k) }, ProofStatus::OdeProved)
                }
                _ => (Label3::L7_2B, Prediction::BistableConjectured, ProofStatus::Conjectured),
            },
            1 => {
                let k = stable[0];
                let (i, j) = side_pair(k);
                let over_i = dominates(h, k, i);
                let over_j = dominates(h, k, j);
                let invadable = t.edges[k].invadable == Some(true);
                match (invadable, over_i, over_j) {
                    (true, true, true) => {
                        (Label3::L7_3A, Prediction::ConvergesTo { point: vertex(k) }, ProofStatus::OdeProved)
                    }
                    (true, _, _) if over_i != over_j => {
                        (Label3::L7_3, Prediction::CoexistenceProved, ProofStatus::Proved)
                    }
                    (false, true, true) => {
                        (Label3::L7_3B, Prediction::BistableConjectured, ProofStatus::Conjectured)
                    }
                    (false, false, false) => (
                        Label3::L7_3C,
                        Prediction::DiesOutConjectured { strategy: k + 1 },
                        ProofStatus::Conjectured,
                    ),
                    (false, _, _) => (
                        Label3::L7_3D,
                        Prediction::DiesOutConjectured { strategy: k + 1 },
                        ProofStatus::Conjectured,
                    ),
                    (true, false, false) => {
                        return Err(Error::Numeric(
                            "a strategy dominated on both sides cannot invade the opposite edge".into(),
                        ))
                    }
                    _ => unreachable!(),
                }
            }
            _ => {
                let wins: Vec<usize> =
                    (0..3).map(|v| (0..3).filter(|&w| w != v && dominates(h, v, w)).count()).collect();
                if wins.iter().all(|&w| w == 1) {
                    let delta = b[0] * b[1] * b[2] + a[0] * a[1] * a[2];
                    t.delta = Some(delta);
                    if delta.abs() < GENERIC_TOL {
                        notes.push("rock-paper-scissors with a vanishing determinant: neutral cycles".into());
                        (Label3::NonGeneric, Prediction::Undetermined, ProofStatus::Open)
                    } else if delta > 0.0 {
                        (Label3::L7_4, Prediction::CoexistenceConjectured, ProofStatus::Conjectured)
                    } else {
                        (Label3::L7_4, Prediction::BoundaryApproach, ProofStatus::OdeProved)
                    }
                } else {
                    let v = wins.iter().position(|&w| w == 2).expect("acyclic tournament has a source");
                    (Label3::L7_4A, Prediction::ConvergesTo { point: vertex(v) }, ProofStatus::OdeProved)
                }
            }
        }
    };
    t.label = label;
    t.prediction = prediction;
    t.proof_status = status;
    if t.acs.is_some() && repelling.is_empty() && t.prediction != Prediction::CoexistenceProved {
        notes.push("almost constant sum: the entropy function is repelling".into());
        t.prediction = Prediction::CoexistenceProved;
        t.proof_status = ProofStatus::Proved;
    }
    t.notes = notes;
    Ok(t)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GuardReport {
    pub applicable: bool,
    pub invadable: usize,
    pub violation: Option<String>,
}

/// Checks that a game with three attracting edges has at least two invadable ones.
pub fn impossible_case_guard(h: &GameMatrix) -> Result<GuardReport> {
    let (a, b) = h.alphas_betas()?;
    if !(0..3).all(|k| a[k] > 0.0 && b[k] > 0.0) {
        return Ok(GuardReport { applicable: false, invadable: 0, violation: None });
    }
    let mut count = 0;
    for k in 0..3 {
        if invasion_margin(h, k)?.is_some_and(|m| m > 0.0) {
            count += 1;
        }
    }
    let violation = (count < 2).then(|| format!("only {count} of 3 attracting edge points are invadable"));
    Ok(GuardReport { applicable: true, invadable: count, violation })
}

/// 2x2 verdict for the modified game of `g` under the given rule.
pub fn classify2_spatial(g: &GameMatrix, update: UpdateRule, c: &CoalescenceConstants) -> Result<PhaseVerdict2> {
    classify2(&modify_game_2(g, update, c)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_table() {
        let v = classify2(&GameMatrix::two(0.0, 1.0, 1.0, 0.0).unwrap()).unwrap();
        assert_eq!((v.case, v.equilibrium), (Case2::S1, Some(0.5)));
        let v = classify2(&GameMatrix::two(1.0, 0.0, 0.0, 2.0).unwrap()).unwrap();
        assert_eq!(v.region, Region2::Bistable2Wins);
        assert!(classify2(&GameMatrix::two(1.0, 0.0, 1.0, 2.0).unwrap()).is_err());
    }

    #[test]
    fn line_through_shifted_origin() {
        let l = Line { slope: 2.0, s0: 1.0, t0: 3.0 };
        assert_eq!(l.t_at(2.0), 5.0);
    }
}
