//! Repelling functions for three-strategy replicator equations, built from
//! corner and edge pieces and certified by evaluating their time derivative
//! on a barycentric grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::games::GameMatrix;
use crate::replicator::{acs_check, invasion_margin, side_equilibrium, side_pair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RepellingClass {
    /// Three attracting, invadable edge points.
    #[serde(rename = "7.1")]
    ThreeEdges,
    /// Two attracting invadable edge points and one dominance edge.
    #[serde(rename = "7.2")]
    TwoEdges,
    /// One attracting invadable edge point, the other two edges flowing into it.
    #[serde(rename = "7.3")]
    OneEdge,
    #[serde(rename = "acs")]
    AlmostConstantSum,
}

impl RepellingClass {
    pub fn label(self) -> &'static str {
        match self {
            RepellingClass::ThreeEdges => "7.1",
            RepellingClass::TwoEdges => "7.2",
            RepellingClass::OneEdge => "7.3",
            RepellingClass::AlmostConstantSum => "acs",
        }
    }
}

impl std::str::FromStr for RepellingClass {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim_start_matches("Ex").trim_start_matches("ex") {
            "7.1" => Ok(RepellingClass::ThreeEdges),
            "7.2" => Ok(RepellingClass::TwoEdges),
            "7.3" => Ok(RepellingClass::OneEdge),
            "acs" | "almost-constant-sum" => Ok(RepellingClass::AlmostConstantSum),
            _ => invalid(format!("unknown repelling class '{s}'")),
        }
    }
}

impl std::fmt::Display for RepellingClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyOptions {
    /// Subdivisions per simplex edge.
    pub grid_n: usize,
    /// Distance of the outermost grid points from the boundary.
    pub offset: f64,
    /// Halvings allowed per constant.
    pub halvings: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { grid_n: 400, offset: 1e-6, halvings: 20 }
    }
}

/// One building block of a composite function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// `-log((1 - u_v) / eta)` near vertex `v`.
    Corner { vertex: usize, eta: f64 },
    /// Side `u_k = 0` carrying an attracting mixed point with the given shares.
    AttractingEdge { side: usize, delta: f64, eps: f64, shares: [f64; 3] },
    /// `u_a - eps log u_k` on a side where `a` is dominated.
    Dominance { side: usize, dominated: usize, delta: f64, eps: f64 },
    /// `sum_i u_i - rho_i log u_i`.
    Entropy { rho: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub shape: Shape,
    /// The component contributes `weight * max(value, floor)`.
    pub floor: f64,
    pub weight: f64,
}

impl Shape {
    fn value(&self, u: &[f64; 3]) -> f64 {
        match *self {
            Shape::Corner { vertex, eta } => {
                let (i, j) = side_pair(vertex);
                -((u[i] + u[j]) / eta).ln()
            }
            Shape::AttractingEdge { side, delta, eps, shares } => {
                let (i, j) = side_pair(side);
                let t = |m: usize| {
                    let psi = (delta - u[m]).max(0.0).powi(2);
                    u[m] - shares[m] * (u[m] + u[side] * psi).ln()
                };
                t(i) + t(j) - eps * u[side].ln()
            }
            Shape::Dominance { side, dominated, eps, .. } => u[dominated] - eps * u[side].ln(),
            Shape::Entropy { rho } => (0..3).map(|m| u[m] - rho[m] * u[m].ln()).sum(),
        }
    }

    /// Time derivative along the replicator flow; `g` holds per-capita growth rates.
    fn derivative(&self, u: &[f64; 3], g: &[f64; 3]) -> f64 {
        match *self {
            Shape::Corner { vertex, .. } => {
                let (i, j) = side_pair(vertex);
                -(u[i] * g[i] + u[j] * g[j]) / (u[i] + u[j])
            }
            Shape::AttractingEdge { side: k, delta, eps, shares } => {
                let (i, j) = side_pair(k);
                let phi_k = u[k] * g[k];
                let t = |m: usize| {
                    let gap = (delta - u[m]).max(0.0);
                    let psi = gap * gap;
                    let phi_m = u[m] * g[m];
                    let inner = phi_m + phi_k * psi - u[k] * 2.0 * gap * phi_m;
                    phi_m - shares[m] * inner / (u[m] + u[k] * psi)
                };
                t(i) + t(j) - eps * g[k]
            }
            Shape::Dominance { side, dominated, eps, .. } => {
                u[dominated] * g[dominated] - eps * g[side]
            }
            Shape::Entropy { rho } => (0..3).map(|m| (u[m] - rho[m]) * g[m]).sum(),
        }
    }

    fn relabel(&self, perm: &[usize; 3]) -> Shape {
        let arr = |a: [f64; 3]| {
            let mut out = [0.0; 3];
            for c in 0..3 {
                out[perm[c]] = a[c];
            }
            out
        };
        match *self {
            Shape::Corner { vertex, eta } => Shape::Corner { vertex: perm[vertex], eta },
            Shape::AttractingEdge { side, delta, eps, shares } => {
                Shape::AttractingEdge { side: perm[side], delta, eps, shares: arr(shares) }
            }
            Shape::Dominance { side, dominated, delta, eps } => {
                Shape::Dominance { side: perm[side], dominated: perm[dominated], delta, eps }
            }
            Shape::Entropy { rho } => Shape::Entropy { rho: arr(rho) },
        }
    }
}

impl Component {
    fn active(&self, u: &[f64; 3]) -> bool {
        self.shape.value(u) > self.floor
    }
}

/// Grid points with the replicator growth rates precomputed.
struct Grid {
    n: usize,
    offset: f64,
    pts: Vec<[f64; 3]>,
    growth: Vec<[f64; 3]>,
}

impl Grid {
    fn new(h: &GameMatrix, n: usize, offset: f64) -> Grid {
        let scale = 1.0 - 3.0 * offset;
        let mut pts = Vec::with_capacity((n + 1) * (n + 2) / 2);
        for a in 0..=n {
            for b in 0..=(n - a) {
                let c = n - a - b;
                pts.push([a, b, c].map(|x| offset + scale * x as f64 / n as f64));
            }
        }
        let growth = pts
            .iter()
            .map(|u| {
                let mut f = [0.0; 3];
                h.payoffs(u, &mut f);
                let mean: f64 = (0..3).map(|i| u[i] * f[i]).sum();
                f.map(|x| x - mean)
            })
            .collect();
        Grid { n, offset, pts, growth }
    }

    /// Largest `f` over the points satisfying `region`, with its index and the point count.
    fn sup<R, F>(&self, region: R, f: F) -> Sup
    where
        R: Fn(&[f64; 3]) -> bool + Sync,
        F: Fn(&[f64; 3], &[f64; 3]) -> f64 + Sync,
    {
        self.sup_indexed(|i| region(&self.pts[i]), |i| f(&self.pts[i], &self.growth[i]))
    }

    fn negative<R, F>(&self, region: R, f: F) -> bool
    where
        R: Fn(&[f64; 3]) -> bool + Sync,
        F: Fn(&[f64; 3], &[f64; 3]) -> f64 + Sync,
    {
        let s = self.sup(region, f);
        s.count > 0 && s.max < 0.0
    }

    /// Largest value of `shape` on `{u_k >= delta}`.
    fn floor(&self, shape: &Shape, k: usize, delta: f64) -> f64 {
        self.sup(|u| u[k] >= delta, |u, _| shape.value(u)).max
    }

    fn composite(&self, comps: &[Component]) -> Sup {
        let parts: Vec<Evaluated> = comps.iter().map(|c| self.evaluate(c)).collect();
        self.combine(&parts.iter().zip(comps).map(|(e, c)| (e, c.weight)).collect::<Vec<_>>())
    }

    fn evaluate(&self, c: &Component) -> Evaluated {
        let (active, deriv) = self
            .pts
            .par_iter()
            .zip(&self.growth)
            .map(|(u, g)| {
                let on = c.active(u);
                (on, if on { c.shape.derivative(u, g) } else { 0.0 })
            })
            .unzip();
        Evaluated { active, deriv }
    }

    /// Composite derivative over the union of active sets, from precomputed parts.
    fn combine(&self, parts: &[(&Evaluated, f64)]) -> Sup {
        self.sup_indexed(
            |i| parts.iter().any(|(e, _)| e.active[i]),
            |i| parts.iter().map(|(e, w)| w * e.deriv[i]).sum(),
        )
    }

    fn sup_indexed<R, F>(&self, region: R, f: F) -> Sup
    where
        R: Fn(usize) -> bool + Sync,
        F: Fn(usize) -> f64 + Sync,
    {
        let (max, at, count) = (0..self.pts.len())
            .into_par_iter()
            .filter(|&i| region(i))
            .map(|i| (f(i), i, 1usize))
            .reduce(|| (f64::NEG_INFINITY, usize::MAX, 0), merge_sup);
        Sup { max, at: (count > 0).then_some(at), count }
    }
}

/// Deterministic max-reduction: ties go to the lower index.
fn merge_sup(a: (f64, usize, usize), b: (f64, usize, usize)) -> (f64, usize, usize) {
    let (m, i) = if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { (b.0, b.1) } else { (a.0, a.1) };
    (m, i, a.2 + b.2)
}

struct Evaluated {
    active: Vec<bool>,
    deriv: Vec<f64>,
}

struct Sup {
    max: f64,
    at: Option<usize>,
    count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridReport {
    pub n: usize,
    pub offset: f64,
    pub points: usize,
    /// Points where at least one component is above its floor.
    pub region_points: usize,
    pub max_derivative: f64,
    pub argmax: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepellingCertificate {
    pub class: RepellingClass,
    /// Canonical strategy `c` of the construction is strategy `permutation[c]` of the input.
    pub permutation: [usize; 3],
    /// Components in the input labelling.
    pub components: Vec<Component>,
    /// `sum weight * floor`; the function is certified on `{psi > floor}`.
    pub floor: f64,
    pub grid: GridReport,
}

impl RepellingCertificate {
    pub fn psi(&self, u: &[f64; 3]) -> f64 {
        self.components.iter().map(|c| c.weight * c.shape.value(u).max(c.floor)).sum()
    }

    /// `d psi / dt` under the replicator flow of `h`, or `None` outside the certified region.
    pub fn derivative(&self, h: &GameMatrix, u: &[f64; 3]) -> Option<f64> {
        if !self.components.iter().any(|c| c.active(u)) {
            return None;
        }
        let mut f = [0.0; 3];
        h.payoffs(u, &mut f);
        let mean: f64 = (0..3).map(|i| u[i] * f[i]).sum();
        let g = f.map(|x| x - mean);
        Some(
            self.components
                .iter()
                .filter(|c| c.active(u))
                .map(|c| c.weight * c.shape.derivative(u, &g))
                .sum(),
        )
    }

    /// Re-evaluates the certificate on its own grid.
    pub fn recheck(&self, h: &GameMatrix) -> GridReport {
        let grid = Grid::new(h, self.grid.n, self.grid.offset);
        report(&grid, &self.components)
    }

    pub fn is_valid(&self) -> bool {
        self.grid.region_points > 0 && self.grid.max_derivative < 0.0
    }
}

fn report(grid: &Grid, comps: &[Component]) -> GridReport {
    let s = grid.composite(comps);
    GridReport {
        n: grid.n,
        offset: grid.offset,
        points: grid.pts.len(),
        region_points: s.count,
        max_derivative: s.max,
        argmax: s.at.map(|i| grid.pts[i]),
    }
}

/// Why no certificate was issued.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Refusal {
    pub reason: String,
    /// Worst grid point of the last composite attempt and the derivative there.
    pub worst: Option<([f64; 3], f64)>,
}

impl std::fmt::Display for Refusal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.reason)?;
        if let Some((u, d)) = self.worst {
            write!(f, " (worst cell at u = [{:.6}, {:.6}, {:.6}], dpsi/dt = {:e})", u[0], u[1], u[2], d)?;
        }
        Ok(())
    }
}

fn refuse<T>(reason: impl Into<String>) -> std::result::Result<T, Refusal> {
    Err(Refusal { reason: reason.into(), worst: None })
}

const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [1, 2, 0], [2, 0, 1], [0, 2, 1], [2, 1, 0], [1, 0, 2]];

fn halvings(start: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..=n).map(move |k| start / 2f64.powi(k as i32))
}

/// Builds and certifies a repelling function of the given class for the
/// zero-diagonal game `h`.
pub fn build_repelling(
    h: &GameMatrix,
    class: RepellingClass,
    opts: &CertifyOptions,
) -> std::result::Result<RepellingCertificate, Refusal> {
    if h.n() != 3 || !h.is_zero_diagonal() {
        return refuse("needs a zero-diagonal 3-strategy game");
    }
    if opts.grid_n < 2 || !(opts.offset > 0.0 && 3.0 * opts.offset < 1.0) {
        return refuse("invalid grid options");
    }
    for k in 0..3 {
        match side_equilibrium(h, k) {
            Err(e) => return refuse(format!("side u{} = 0: {e}", k + 1)),
            Ok(Some((_, e))) if !e.attracting => {
                return refuse(format!(
                    "side u{} = 0 carries an unstable mixed equilibrium; no repelling function exists",
                    k + 1
                ))
            }
            _ => {}
        }
    }

    if class == RepellingClass::AlmostConstantSum {
        return entropy_certificate(h, opts);
    }

    let perm = PERMS
        .iter()
        .copied()
        .find(|p| matches_class(&h.permuted(p), class))
        .ok_or_else(|| Refusal {
            reason: format!("game does not have the edge pattern of class {class} in any labelling"),
            worst: None,
        })?;
    let hp = h.permuted(&perm);
    let grid = Grid::new(&hp, opts.grid_n, opts.offset);
    let canonical = match class {
        RepellingClass::ThreeEdges => search_three(&grid, &hp, opts.halvings)?,
        RepellingClass::TwoEdges => search_two(&grid, &hp, opts.halvings)?,
        RepellingClass::OneEdge => search_one(&grid, &hp, opts.halvings)?,
        RepellingClass::AlmostConstantSum => unreachable!(),
    };
    let components: Vec<Component> = canonical
        .iter()
        .map(|c| Component { shape: c.shape.relabel(&perm), floor: c.floor, weight: c.weight })
        .collect();
    finish(h, class, perm, components, opts)
}

fn finish(
    h: &GameMatrix,
    class: RepellingClass,
    perm: [usize; 3],
    components: Vec<Component>,
    opts: &CertifyOptions,
) -> std::result::Result<RepellingCertificate, Refusal> {
    let grid = Grid::new(h, opts.grid_n, opts.offset);
    let rep = report(&grid, &components);
    let floor = components.iter().map(|c| c.weight * c.floor).sum();
    let cert = RepellingCertificate { class, permutation: perm, components, floor, grid: rep };
    if cert.is_valid() {
        Ok(cert)
    } else {
        Err(Refusal {
            reason: "final grid check failed".into(),
            worst: cert.grid.argmax.map(|u| (u, cert.grid.max_derivative)),
        })
    }
}

fn attracting_invadable(h: &GameMatrix, k: usize) -> bool {
    let (i, j) = side_pair(k);
    h.get(i, j) > 0.0 && h.get(j, i) > 0.0 && matches!(invasion_margin(h, k), Ok(Some(m)) if m > 0.0)
}

/// Strategy `i` loses to `j` on their edge: `H_ij < 0 < H_ji`.
fn dominated_by(h: &GameMatrix, i: usize, j: usize) -> bool {
    h.get(i, j) < 0.0 && h.get(j, i) > 0.0
}

fn matches_class(h: &GameMatrix, class: RepellingClass) -> bool {
    match class {
        RepellingClass::ThreeEdges => (0..3).all(|k| attracting_invadable(h, k)),
        RepellingClass::TwoEdges => {
            attracting_invadable(h, 0)
                && attracting_invadable(h, 1)
                && (dominated_by(h, 0, 1) || dominated_by(h, 1, 0))
        }
        RepellingClass::OneEdge => {
            attracting_invadable(h, 1) && dominated_by(h, 0, 1) && dominated_by(h, 1, 2)
        }
        RepellingClass::AlmostConstantSum => false,
    }
}

fn attracting_shape(h: &GameMatrix, k: usize, delta: f64, eps: f64) -> Shape {
    let (i, j) = side_pair(k);
    let (a, b) = (h.get(i, j), h.get(j, i));
    let mut shares = [0.0; 3];
    shares[i] = a / (a + b);
    shares[j] = b / (a + b);
    Shape::AttractingEdge { side: k, delta, eps, shares }
}

fn corner_eta(grid: &Grid, v: usize, budget: usize) -> Option<f64> {
    let (i, j) = side_pair(v);
    halvings(0.5, budget).find(|&eta| {
        let shape = Shape::Corner { vertex: v, eta };
        grid.negative(|u| u[i] + u[j] < eta, |u, g| shape.derivative(u, g))
    })
}

/// Smallest-index epsilon from the halving sequence making an attracting-edge
/// function decrease on its good region.
fn attracting_eps(grid: &Grid, h: &GameMatrix, k: usize, delta: f64, budget: usize) -> Option<Shape> {
    let (i, j) = side_pair(k);
    halvings(0.5, budget).map(|eps| attracting_shape(h, k, delta, eps)).find(|shape| {
        grid.negative(
            |u| u[k] < delta && u[i] > delta && u[j] > delta,
            |u, g| shape.derivative(u, g),
        )
    })
}

/// Dominance function on side `k`; when the third strategy cannot invade the
/// dominated vertex the strip `u_b <= delta` next to it is excused.
fn dominance(
    grid: &Grid,
    h: &GameMatrix,
    k: usize,
    delta_start: f64,
    delta_budget: usize,
    eps_budget: usize,
) -> Option<Shape> {
    let (i, j) = side_pair(k);
    let (a, b) = if dominated_by(h, i, j) { (i, j) } else { (j, i) };
    let excuse = h.get(k, a) <= 0.0;
    for delta in halvings(delta_start, delta_budget) {
        for eps in halvings(0.5, eps_budget) {
            let shape = Shape::Dominance { side: k, dominated: a, delta, eps };
            let ok = grid.negative(
                |u| u[k] < delta && !(excuse && u[b] <= delta),
                |u, g| shape.derivative(u, g),
            );
            if ok {
                return Some(shape);
            }
        }
    }
    None
}

fn shape_delta(s: &Shape) -> f64 {
    match *s {
        Shape::AttractingEdge { delta, .. } | Shape::Dominance { delta, .. } => delta,
        _ => 1.0,
    }
}

fn with_floor(grid: &Grid, shape: Shape, k: usize, weight: f64) -> Component {
    let floor = grid.floor(&shape, k, shape_delta(&shape));
    Component { shape, floor, weight }
}

fn worst(grid: &Grid, s: &Sup) -> Option<([f64; 3], f64)> {
    s.at.map(|i| (grid.pts[i], s.max))
}

fn exhausted<T>(what: &str, last: Option<([f64; 3], f64)>) -> std::result::Result<T, Refusal> {
    Err(Refusal { reason: format!("constant search exhausted: {what}"), worst: last })
}

/// Tries weight vectors in order on fixed components; returns the first that certifies.
fn first_weights<I>(grid: &Grid, comps: &[Component], weights: I, last: &mut Option<([f64; 3], f64)>) -> Option<Vec<Component>>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let parts: Vec<Evaluated> = comps.iter().map(|c| grid.evaluate(c)).collect();
    for w in weights {
        let s = grid.combine(&parts.iter().zip(&w).map(|(e, &w)| (e, w)).collect::<Vec<_>>());
        if s.count > 0 && s.max < 0.0 {
            return Some(comps.iter().zip(w).map(|(c, weight)| Component { weight, ..c.clone() }).collect());
        }
        *last = worst(grid, &s);
    }
    None
}

fn search_three(grid: &Grid, h: &GameMatrix, budget: usize) -> std::result::Result<Vec<Component>, Refusal> {
    let mut etas = [0.0; 3];
    for (v, eta) in etas.iter_mut().enumerate() {
        *eta = corner_eta(grid, v, budget).ok_or_else(|| Refusal {
            reason: format!("no corner function near vertex {}", v + 1),
            worst: None,
        })?;
    }
    let corners: Vec<Component> = (0..3)
        .map(|v| Component { shape: Shape::Corner { vertex: v, eta: etas[v] }, floor: 0.0, weight: 1.0 })
        .collect();
    let start = (0.999 * etas.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0).min(0.24);
    let mut last = None;
    'delta: for delta in halvings(start, budget) {
        let mut edges = Vec::new();
        for k in 0..3 {
            match attracting_eps(grid, h, k, delta, budget) {
                Some(s) => edges.push(s),
                None => continue 'delta,
            }
        }
        let floors: Vec<Component> =
            edges.into_iter().enumerate().map(|(k, s)| with_floor(grid, s, k, 1.0)).collect();
        let mut comps = corners.clone();
        comps.extend(floors);
        let weights = halvings(1.0, budget).map(|pi| vec![1.0, 1.0, 1.0, pi, pi, pi]);
        if let Some(found) = first_weights(grid, &comps, weights, &mut last) {
            return Ok(found);
        }
    }
    exhausted("corner + three attracting edges", last)
}

fn search_two(grid: &Grid, h: &GameMatrix, budget: usize) -> std::result::Result<Vec<Component>, Refusal> {
    let eta = corner_eta(grid, 2, budget)
        .ok_or_else(|| Refusal { reason: "no corner function near vertex 3".into(), worst: None })?;
    let dom = dominance(grid, h, 2, 0.24, budget, budget)
        .ok_or_else(|| Refusal { reason: "no dominance function on side u3 = 0".into(), worst: None })?;
    let dom = with_floor(grid, dom, 2, 1.0);
    let base = vec![Component { shape: Shape::Corner { vertex: 2, eta }, floor: 0.0, weight: 1.0 }, dom.clone()];
    let start = (0.999 * eta / 2.0).min(0.999 * shape_delta(&dom.shape)).min(0.24);
    let mut last = None;
    'delta: for delta in halvings(start, budget) {
        let mut edges = Vec::new();
        for k in 0..2 {
            match attracting_eps(grid, h, k, delta, budget) {
                Some(s) => edges.push(with_floor(grid, s, k, 1.0)),
                None => continue 'delta,
            }
        }
        let mut comps = base.clone();
        comps.extend(edges);
        let weights = halvings(1.0, budget).map(|pi| vec![1.0, 1.0, pi, pi]);
        if let Some(found) = first_weights(grid, &comps, weights, &mut last) {
            return Ok(found);
        }
    }
    exhausted("corner + dominance + two attracting edges", last)
}

fn search_one(grid: &Grid, h: &GameMatrix, budget: usize) -> std::result::Result<Vec<Component>, Refusal> {
    let top = dominance(grid, h, 2, 0.24, budget, budget)
        .ok_or_else(|| Refusal { reason: "no dominance function on side u3 = 0".into(), worst: None })?;
    let top = with_floor(grid, top, 2, 1.0);
    let mut last = None;
    let start1 = (0.999 * shape_delta(&top.shape)).min(0.24);
    for d1 in halvings(start1, budget) {
        let Some(side) = dominance(grid, h, 0, d1, 0, budget) else {
            continue;
        };
        let side = with_floor(grid, side, 0, 1.0);
        let d3 = shape_delta(&top.shape);
        let start2 = (0.999 * d1.min(d3)).min(0.24);
        let Some(edge) = halvings(start2, budget).find_map(|d2| attracting_eps(grid, h, 1, d2, budget)) else {
            continue;
        };
        let edge = with_floor(grid, edge, 1, 1.0);
        let comps = [top.clone(), side, edge];
        let weights = halvings(1.0, budget)
            .flat_map(|p1| halvings(p1, budget).map(move |p2| vec![1.0, p1, p2]));
        if let Some(found) = first_weights(grid, &comps, weights, &mut last) {
            return Ok(found);
        }
    }
    exhausted("two dominance edges + attracting edge", last)
}

fn entropy_certificate(
    h: &GameMatrix,
    opts: &CertifyOptions,
) -> std::result::Result<RepellingCertificate, Refusal> {
    let Some(acs) = acs_check(h) else {
        return refuse("game is not almost constant sum with an interior equilibrium");
    };
    let rho = [acs.rho[0], acs.rho[1], acs.rho[2]];
    let shape = Shape::Entropy { rho };
    let min = shape.value(&rho);
    // Everything except the minimizer itself is in the certified region.
    let comp = Component { shape, floor: min + 1e-12, weight: 1.0 };
    finish(h, RepellingClass::AlmostConstantSum, [0, 1, 2], vec![comp], opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_labels_parse() {
        for c in [
            RepellingClass::ThreeEdges,
            RepellingClass::TwoEdges,
            RepellingClass::OneEdge,
            RepellingClass::AlmostConstantSum,
        ] {
            assert_eq!(c.label().parse::<RepellingClass>().unwrap(), c);
        }
        assert_eq!("Ex7.2".parse::<RepellingClass>().unwrap(), RepellingClass::TwoEdges);
    }

    #[test]
    fn relabel_round_trip() {
        let s = Shape::AttractingEdge { side: 1, delta: 0.1, eps: 0.2, shares: [0.3, 0.0, 0.7] };
        let p = [2, 0, 1];
        let mut inv = [0; 3];
        for c in 0..3 {
            inv[p[c]] = c;
        }
        assert_eq!(s.relabel(&p).relabel(&inv), s);
    }

    #[test]
    fn analytic_derivative_matches_finite_difference() {
        let h = GameMatrix::gen33([1.0, 2.0, 0.5], [1.5, 0.7, 1.2]).unwrap();
        let shapes = [
            Shape::Corner { vertex: 0, eta: 0.3 },
            attracting_shape(&h, 1, 0.2, 0.1),
            Shape::Dominance { side: 2, dominated: 0, delta: 0.1, eps: 0.05 },
            Shape::Entropy { rho: [0.2, 0.3, 0.5] },
        ];
        for u in [[0.1, 0.05, 0.85], [0.15, 0.02, 0.83], [0.6, 0.3, 0.1]] {
            let mut f = [0.0; 3];
            h.payoffs(&u, &mut f);
            let mean: f64 = (0..3).map(|i| u[i] * f[i]).sum();
            let g = f.map(|x| x - mean);
            let phi: Vec<f64> = (0..3).map(|i| u[i] * g[i]).collect();
            for s in &shapes {
                let dt = 1e-6;
                let fwd = [0, 1, 2].map(|i| u[i] + dt * phi[i]);
                let bwd = [0, 1, 2].map(|i| u[i] - dt * phi[i]);
                let fd = (s.value(&fwd) - s.value(&bwd)) / (2.0 * dt);
                let an = s.derivative(&u, &g);
                assert!((fd - an).abs() < 1e-6 * (1.0 + an.abs()), "{s:?} at {u:?}: {fd} vs {an}");
            }
        }
    }
}
