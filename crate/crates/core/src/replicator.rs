//! Replicator dynamics: integration, equilibria, the Lotka-Volterra and
//! projective transforms, and Lyapunov weights for planar LV systems.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::games::{phi_r_into, GameMatrix, SimplexPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalFlag {
    Converged,
    MaxTime,
    BoundaryHit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub terminal: TerminalFlag,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }
}

/// Step size collapsed before reaching `t_max`.
#[derive(Debug, Clone)]
pub struct Stiffness {
    pub partial: Trajectory,
    pub step: f64,
}

impl From<Stiffness> for Error {
    fn from(s: Stiffness) -> Self {
        Error::Numeric(format!(
            "step size underflow ({:e}) at t = {}",
            s.step,
            s.partial.final_time()
        ))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct StepControl {
    pub atol: f64,
    pub rtol: f64,
    pub h0: f64,
    pub h_max: f64,
    /// Velocity threshold for the converged flag.
    pub converge_tol: f64,
    /// Consecutive accepted steps below `converge_tol`.
    pub converge_steps: usize,
    pub boundary_tol: f64,
    pub stop_on_convergence: bool,
    pub stop_on_boundary: bool,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            atol: 1e-10,
            rtol: 1e-10,
            h0: 1e-3,
            h_max: 1.0,
            converge_tol: 1e-10,
            converge_steps: 10,
            boundary_tol: 1e-12,
            stop_on_convergence: true,
            stop_on_boundary: true,
            max_steps: 10_000_000,
        }
    }
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// State space the integrator keeps the solution in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Clamp and renormalize onto the probability simplex after each step.
    Simplex,
    /// Nonnegative orthant, no renormalization.
    Orthant,
}

/// Adaptive Dormand-Prince integration of `dy/dt = field(y)`.
pub fn integrate_field<F>(
    field: F,
    y0: &[f64],
    t_max: f64,
    domain: Domain,
    ctl: &StepControl,
) -> std::result::Result<Trajectory, Stiffness>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = 0.0;
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let watched: Vec<bool> = y0.iter().map(|&x| x > ctl.boundary_tol).collect();

    let mut traj = Trajectory { times: vec![0.0], states: vec![y.clone()], terminal: TerminalFlag::MaxTime };
    field(&y, &mut k[0]);
    if inf_norm(&k[0]) == 0.0 && ctl.stop_on_convergence {
        traj.terminal = TerminalFlag::Converged;
        return Ok(traj);
    }
    let mut h = ctl.h0.min(t_max).max(f64::MIN_POSITIVE);
    let mut streak = 0usize;
    let mut steps = 0usize;

    while t < t_max {
        if steps >= ctl.max_steps {
            return Err(Stiffness { partial: traj, step: h });
        }
        steps += 1;
        let last = t + h >= t_max;
        if last {
            h = t_max - t;
        }
        for s in 1..7 {
            let (done, rest) = k.split_at_mut(s);
            for i in 0..n {
                let acc: f64 = done.iter().zip(&A[s]).map(|(kr, a)| a * kr[i]).sum();
                tmp[i] = y[i] + h * acc;
            }
            field(&tmp, &mut rest[0]);
        }
        y_new.copy_from_slice(&tmp);
        let mut err: f64 = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (r, kr) in k.iter().enumerate() {
                e += E[r] * kr[i];
            }
            let sc = ctl.atol + ctl.rtol * y[i].abs().max(y_new[i].abs());
            let r = (h * e).abs() / sc;
            // f64::max drops NaN, so test each term.
            err = if r.is_nan() || !y_new[i].is_finite() { f64::INFINITY } else { err.max(r) };
        }
        if !err.is_finite() {
            err = f64::INFINITY;
        }
        if err <= 1.0 {
            t = if last { t_max } else { t + h };
            y.copy_from_slice(&y_new);
            // The last stage is the field at y_new; reuse it unless y was projected.
            if domain == Domain::Simplex {
                renormalize(&mut y);
                field(&y, &mut k[0]);
            } else {
                let (first, rest) = k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
            }
            traj.times.push(t);
            traj.states.push(y.clone());

            if inf_norm(&k[0]) < ctl.converge_tol {
                streak += 1;
            } else {
                streak = 0;
            }
            if ctl.stop_on_convergence && streak >= ctl.converge_steps {
                traj.terminal = TerminalFlag::Converged;
                return Ok(traj);
            }
            if ctl.stop_on_boundary
                && y.iter().zip(&watched).any(|(&v, &w)| w && v < ctl.boundary_tol)
            {
                traj.terminal = TerminalFlag::BoundaryHit;
                return Ok(traj);
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(ctl.h_max);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Stiffness { partial: traj, step: h });
        }
    }
    traj.terminal = TerminalFlag::MaxTime;
    Ok(traj)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn renormalize(y: &mut [f64]) {
    for v in y.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let s: f64 = y.iter().sum();
    if s > 0.0 {
        for v in y.iter_mut() {
            *v /= s;
        }
    }
}

/// Integrates the replicator equation for `g`.
///
/// Panics if `u0` and `g` differ in dimension.
pub fn integrate(
    g: &GameMatrix,
    u0: &SimplexPoint,
    t_max: f64,
    ctl: &StepControl,
) -> std::result::Result<Trajectory, Stiffness> {
    assert_eq!(u0.as_slice().len(), g.n(), "state and game dimensions differ");
    integrate_field(|u, out| phi_r_into(g, u, out), u0.as_slice(), t_max, Domain::Simplex, ctl)
}

/// Mixed equilibrium on an edge whose zero-diagonal subgame is `(0, alpha; beta, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgePoint {
    /// Share of the first strategy.
    pub p: f64,
    /// Share of the second strategy.
    pub q: f64,
    pub attracting: bool,
    /// Common payoff of both strategies at the point.
    pub payoff: f64,
}

pub fn edge_fixed_point(alpha: f64, beta: f64) -> Result<Option<EdgePoint>> {
    if !(alpha.is_finite() && beta.is_finite()) {
        return invalid("edge entries must be finite");
    }
    if alpha == 0.0 || beta == 0.0 {
        return Err(Error::NonGeneric(format!("edge has a zero entry (alpha={alpha}, beta={beta})")));
    }
    if (alpha > 0.0) != (beta > 0.0) {
        return Ok(None);
    }
    let s = alpha + beta;
    Ok(Some(EdgePoint { p: alpha / s, q: beta / s, attracting: alpha > 0.0, payoff: alpha * beta / s }))
}

/// Strategies `(i, j)` spanning the side `u_k = 0`, in cyclic order.
pub fn side_pair(k: usize) -> (usize, usize) {
    ((k + 1) % 3, (k + 2) % 3)
}

/// Mixed point on side `u_k = 0` of a zero-diagonal 3x3 game, as a full state.
pub fn side_equilibrium(h: &GameMatrix, k: usize) -> Result<Option<(Vec<f64>, EdgePoint)>> {
    let (i, j) = side_pair(k);
    Ok(edge_fixed_point(h.get(i, j), h.get(j, i))?.map(|e| {
        let mut u = vec![0.0; 3];
        u[i] = e.p;
        u[j] = e.q;
        (u, e)
    }))
}

/// Growth rate of the missing strategy `k` at the mixed point of side `u_k = 0`.
/// Positive means `k` invades.
pub fn invasion_margin(h: &GameMatrix, k: usize) -> Result<Option<f64>> {
    Ok(side_equilibrium(h, k)?.map(|(u, e)| {
        let (i, j) = side_pair(k);
        h.get(k, i) * u[i] + h.get(k, j) * u[j] - e.payoff
    }))
}

/// Numerators of the interior equilibrium of a zero-diagonal 3x3 game.
pub fn interior_numerators(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        b[0] * b[1] + a[0] * a[2] - a[0] * b[0],
        b[1] * b[2] + a[1] * a[0] - a[1] * b[1],
        b[2] * b[0] + a[2] * a[1] - a[2] * b[2],
    ]
}

pub fn interior_equilibrium_3(h: &GameMatrix) -> Result<Option<SimplexPoint>> {
    let (a, b) = h.alphas_betas()?;
    let num = interior_numerators(a, b);
    let d: f64 = num.iter().sum();
    let scale = h.max_abs().max(f64::MIN_POSITIVE).powi(2);
    if d.abs() <= 1e-14 * scale {
        return Err(Error::Degenerate("interior equilibrium denominator vanishes".into()));
    }
    if num.iter().any(|&x| x / d <= 0.0) {
        return Ok(None);
    }
    let rho: Vec<f64> = num.iter().map(|x| x / d).collect();
    let r = crate::games::phi_r(h, &rho);
    let tol = 1e-10 * h.max_abs().max(1.0);
    if inf_norm(&r) > tol {
        return Err(Error::Numeric(format!("interior equilibrium residual {:e}", inf_norm(&r))));
    }
    Ok(Some(SimplexPoint::new(rho)?))
}

/// `dv_i/dt = v_i (r_i + (B v)_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LvSystem {
    pub r: Vec<f64>,
    pub b: Vec<Vec<f64>>,
}

impl LvSystem {
    pub fn dim(&self) -> usize {
        self.r.len()
    }

    pub fn field(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.r.len() {
            let mut s = self.r[i];
            for (j, vj) in v.iter().enumerate() {
                s += self.b[i][j] * vj;
            }
            out[i] = v[i] * s;
        }
    }

    /// Planar coefficients `(a, b, c, d, e, f)` of
    /// `x' = x(a + bx + cy)`, `y' = y(d + ex + fy)`.
    pub fn planar(&self) -> Result<[f64; 6]> {
        if self.dim() != 2 {
            return invalid("planar coefficients need a 2-dimensional system");
        }
        Ok([self.r[0], self.b[0][0], self.b[0][1], self.r[1], self.b[1][0], self.b[1][1]])
    }

    /// Interior rest point of a planar system, if positive.
    pub fn fixed_point(&self) -> Result<Option<(f64, f64)>> {
        let [a, b, c, d, e, f] = self.planar()?;
        let det = b * f - c * e;
        if det == 0.0 {
            return Err(Error::Degenerate("singular interaction matrix".into()));
        }
        let x = (c * d - a * f) / det;
        let y = (a * e - b * d) / det;
        Ok((x > 0.0 && y > 0.0).then_some((x, y)))
    }
}

/// Divide by the last coordinate: `r_i = G_in - G_nn`, `B_ij = G_ij - G_nj`.
pub fn to_lotka_volterra(g: &GameMatrix) -> LvSystem {
    let n = g.n();
    let last = n - 1;
    let r = (0..last).map(|i| g.get(i, last) - g.get(last, last)).collect();
    let b = (0..last)
        .map(|i| (0..last).map(|j| g.get(i, j) - g.get(last, j)).collect())
        .collect();
    LvSystem { r, b }
}

/// `v_i = u_i / u_n`.
pub fn simplex_to_lv(u: &[f64]) -> Vec<f64> {
    let last = u[u.len() - 1];
    u[..u.len() - 1].iter().map(|x| x / last).collect()
}

pub fn lv_to_simplex(v: &[f64]) -> Vec<f64> {
    let s = 1.0 + v.iter().sum::<f64>();
    let mut u: Vec<f64> = v.iter().map(|x| x / s).collect();
    u.push(1.0 / s);
    u
}

/// Column scaling `G_ij / m_j`.
pub fn projective_transform(g: &GameMatrix, m: &[f64]) -> Result<GameMatrix> {
    if m.len() != g.n() {
        return invalid("weight vector length must match the game");
    }
    if m.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return invalid("projective weights must be positive and finite");
    }
    let rows = (0..g.n())
        .map(|i| (0..g.n()).map(|j| g.get(i, j) / m[j]).collect())
        .collect();
    GameMatrix::new(rows)?.with_labels(g.labels().to_vec())
}

/// Image of a state under the projective map: `v_i = u_i m_i / sum_k u_k m_k`.
pub fn projective_point(u: &[f64], m: &[f64]) -> Vec<f64> {
    let s: f64 = u.iter().zip(m).map(|(a, b)| a * b).sum();
    u.iter().zip(m).map(|(a, b)| a * b / s).collect()
}

/// Weights `m` making the transformed zero-diagonal game constant sum.
/// Returns `(m, gamma)` where every pair sum of the new game equals `gamma`.
pub fn constant_sum_weights(h: &GameMatrix) -> Result<Option<(Vec<f64>, f64)>> {
    let (a, b) = h.alphas_betas()?;
    // With w = 1/m, edge k needs a_k w_{k+2} + b_k w_{k+1} = gamma.
    let mut mat = [[0.0; 3]; 3];
    for k in 0..3 {
        mat[k][(k + 2) % 3] += a[k];
        mat[k][(k + 1) % 3] += b[k];
    }
    let Some(w) = solve3(mat, [1.0; 3]) else {
        return Ok(None);
    };
    let (w, gamma) = if w.iter().all(|&x| x > 0.0) {
        (w, 1.0)
    } else if w.iter().all(|&x| x < 0.0) {
        (w.map(|x| -x), -1.0)
    } else {
        return Ok(None);
    };
    Ok(Some((w.iter().map(|x| 1.0 / x).collect(), gamma)))
}

pub(crate) fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    let scale = m.iter().flatten().fold(0.0f64, |s, x| s.max(x.abs()));
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in 0..3 {
            if row != col {
                let f = m[row][col] / m[col][col];
                for c in 0..3 {
                    m[row][c] -= f * m[col][c];
                }
                r[row] -= f * r[col];
            }
        }
    }
    Some([r[0] / m[0][0], r[1] / m[1][1], r[2] / m[2][2]])
}

/// Weights for `V = A(x - x* log x) + B(y - y* log y)` with a grid check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LvCertificate {
    pub a_weight: f64,
    pub b_weight: f64,
    /// Symmetric matrix of `dV/dt` as a form in `(x - x*, y - y*)`.
    pub quadratic_form: [[f64; 2]; 2],
    pub grid: usize,
    pub max_derivative: f64,
}

pub fn lv_lyapunov(coef: [f64; 6], x_star: f64, y_star: f64) -> Option<LvCertificate> {
    let [a, b, c, d, e, f] = coef;
    if !(b < 0.0 && f < 0.0 && b * f - c * e > 0.0 && x_star > 0.0 && y_star > 0.0) {
        return None;
    }
    let (wa, wb) = if c == 0.0 && e == 0.0 {
        (1.0, 1.0)
    } else if c * e < 0.0 {
        (e.abs(), c.abs())
    } else if c * e > 0.0 {
        (e.abs(), c.abs())
    } else if e == 0.0 {
        (2.0 * b * f / (c * c), 1.0)
    } else {
        (1.0, 2.0 * b * f / (e * e))
    };
    let cross = (wa * c + wb * e) / 2.0;
    let form = [[wa * b, cross], [cross, wb * f]];

    const GRID: usize = 100;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..GRID {
        let x = x_star / 10.0 + (10.0 * x_star - x_star / 10.0) * i as f64 / (GRID - 1) as f64;
        for j in 0..GRID {
            let y = y_star / 10.0 + (10.0 * y_star - y_star / 10.0) * j as f64 / (GRID - 1) as f64;
            let (dx, dy) = (x - x_star, y - y_star);
            if dx.abs() <= 1e-12 * x_star && dy.abs() <= 1e-12 * y_star {
                continue;
            }
            let dv = wa * dx * (a + b * x + c * y) + wb * dy * (d + e * x + f * y);
            worst = worst.max(dv);
        }
    }
    (worst < 0.0).then_some(LvCertificate {
        a_weight: wa,
        b_weight: wb,
        quadratic_form: form,
        grid: GRID,
        max_derivative: worst,
    })
}

/// Pair-sum decomposition `H_ij + H_ji = gamma + eta_ij`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcsReport {
    pub gamma: f64,
    pub max_eta: f64,
    pub rho: Vec<f64>,
}

pub fn acs_check(h: &GameMatrix) -> Option<AcsReport> {
    if h.n() != 3 || !h.is_zero_diagonal() {
        return None;
    }
    let sums = [h.get(0, 1) + h.get(1, 0), h.get(1, 2) + h.get(2, 1), h.get(0, 2) + h.get(2, 0)];
    let gamma = sums.iter().sum::<f64>() / 3.0;
    let max_eta = sums.iter().fold(0.0f64, |m, s| m.max((s - gamma).abs()));
    if !(gamma > 0.0 && max_eta < gamma / 2.0) {
        return None;
    }
    let rho = interior_equilibrium_3(h).ok().flatten()?;
    Some(AcsReport { gamma, max_eta, rho: rho.into_vec() })
}
