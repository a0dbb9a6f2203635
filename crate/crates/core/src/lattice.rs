//! Continuous-time spatial game on a torus (or any weighted graph) under
//! Birth-Death or Death-Birth updating with payoffs `1 + w G`.
//!
//! Events are generated by uniformization: every site carries a Poisson clock
//! at a common rate bound, and a firing is turned into a real transition with
//! the conditional probability the exact rates require.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coalescence::{p_escape, Kernel};
use crate::error::{invalid, Error, Result};
use crate::games::{GameMatrix, SimplexPoint, UpdateRule, SIMPLEX_TOL};
use crate::io::{atomic_write, atomic_write_with};
use crate::rng::substream;

/// Sparse neighbourhood structure: site `x` sees `y` with weight `p(y - x)`.
#[derive(Debug, Clone)]
pub struct Graph {
    row: Vec<usize>,
    nbr: Vec<u32>,
    weight: Vec<f64>,
    cum: Vec<f64>,
    uniform: bool,
}

impl Graph {
    /// Torus `Z_L^d`; site index is `sum_k x_k L^k`.
    pub fn torus(k: &Kernel, l: usize) -> Result<Graph> {
        let d = k.d();
        if l as i64 <= 2 * k.range() as i64 {
            return invalid(format!("torus side {l} must exceed twice the kernel range {}", k.range()));
        }
        let n = l.checked_pow(d as u32).filter(|&n| n <= u32::MAX as usize);
        let Some(n) = n else {
            return invalid("torus is too large");
        };
        let offs: Vec<(Vec<i32>, f64)> = k.offsets().map(|(x, p)| (x.to_vec(), p)).collect();
        let uniform = offs.iter().all(|(_, p)| *p == offs[0].1);
        let mut nbr = Vec::with_capacity(n * offs.len());
        let mut weight = Vec::with_capacity(n * offs.len());
        let mut coord = vec![0usize; d];
        for x in 0..n {
            let mut c = x;
            for slot in coord.iter_mut() {
                *slot = c % l;
                c /= l;
            }
            for (v, p) in &offs {
                let mut y = 0usize;
                for kk in (0..d).rev() {
                    let ck = (coord[kk] as i64 + v[kk] as i64).rem_euclid(l as i64) as usize;
                    y = y * l + ck;
                }
                nbr.push(y as u32);
                weight.push(*p);
            }
        }
        let deg = offs.len();
        let row = (0..=n).map(|x| x * deg).collect();
        Ok(Graph::finish(row, nbr, weight, uniform))
    }

    /// Arbitrary graph from weighted adjacency rows; each row must sum to one.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Graph> {
        let n = rows.len();
        let mut row = vec![0];
        let mut nbr = Vec::new();
        let mut weight = Vec::new();
        for (x, r) in rows.iter().enumerate() {
            let s: f64 = r.iter().map(|e| e.1).sum();
            if r.is_empty() || (s - 1.0).abs() > 1e-12 {
                return invalid(format!("row {x} weights sum to {s}"));
            }
            for &(y, p) in r {
                if y >= n || y == x || !(p > 0.0) {
                    return invalid(format!("bad edge {x} -> {y}"));
                }
                nbr.push(y as u32);
                weight.push(p);
            }
            row.push(nbr.len());
        }
        Ok(Graph::finish(row, nbr, weight, false))
    }

    /// Three sites, each seeing the other two with weight 1/2.
    pub fn triangle() -> Graph {
        Graph::from_rows(vec![vec![(1, 0.5), (2, 0.5)], vec![(0, 0.5), (2, 0.5)], vec![(0, 0.5), (1, 0.5)]])
            .expect("triangle is valid")
    }

    fn finish(row: Vec<usize>, nbr: Vec<u32>, weight: Vec<f64>, uniform: bool) -> Graph {
        let mut cum = Vec::with_capacity(weight.len());
        for x in 0..row.len() - 1 {
            let mut acc = 0.0;
            for &p in &weight[row[x]..row[x + 1]] {
                acc += p;
                cum.push(acc);
            }
        }
        Graph { row, nbr, weight, cum, uniform }
    }

    pub fn sites(&self) -> usize {
        self.row.len() - 1
    }

    pub fn neighbors(&self, x: usize) -> (&[u32], &[f64]) {
        let r = self.row[x]..self.row[x + 1];
        (&self.nbr[r.clone()], &self.weight[r])
    }

    /// Neighbour of `x` drawn from its weights using `u` in [0, 1).
    fn pick(&self, x: usize, u: f64) -> usize {
        let (a, b) = (self.row[x], self.row[x + 1]);
        let j = if self.uniform {
            ((u * (b - a) as f64) as usize).min(b - a - 1)
        } else {
            let c = &self.cum[a..b];
            let t = u * c[c.len() - 1];
            c.partition_point(|&v| v <= t).min(b - a - 1)
        };
        self.nbr[a + j] as usize
    }
}

/// Payoffs `1 + w G` and the clock rate bound they imply.
#[derive(Debug, Clone)]
pub struct Rules {
    n: usize,
    gbar: Vec<f64>,
    update: UpdateRule,
    bound: f64,
}

impl Rules {
    pub fn new(game: &GameMatrix, w: f64, update: UpdateRule) -> Result<Rules> {
        if !(w >= 0.0) || !w.is_finite() {
            return invalid("selection strength w must be nonnegative");
        }
        if w * game.max_abs() >= 1.0 {
            return invalid(format!(
                "w * max|G| = {} must be below 1 so every rate stays positive",
                w * game.max_abs()
            ));
        }
        let n = game.n();
        if n > u8::MAX as usize {
            return invalid("at most 255 strategies");
        }
        let gbar: Vec<f64> = (0..n * n).map(|k| 1.0 + w * game.get(k / n, k % n)).collect();
        let bound = match update {
            UpdateRule::BirthDeath => gbar.iter().cloned().fold(f64::MIN, f64::max),
            UpdateRule::DeathBirth => 1.0,
        };
        Ok(Rules { n, gbar, update, bound })
    }

    pub fn strategies(&self) -> usize {
        self.n
    }

    /// Clock rate per site.
    pub fn bound(&self) -> f64 {
        self.bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flip {
    pub site: usize,
    pub from: u8,
    pub to: u8,
}

pub struct Engine<'g> {
    graph: &'g Graph,
    rules: Rules,
    state: Vec<u8>,
    counts: Vec<u64>,
    time: f64,
    events: u64,
    rng: ChaCha8Rng,
}

impl<'g> Engine<'g> {
    pub fn new(graph: &'g Graph, rules: Rules, state: Vec<u8>, rng: ChaCha8Rng) -> Result<Self> {
        if state.len() != graph.sites() {
            return invalid("state length differs from the number of sites");
        }
        let mut counts = vec![0u64; rules.n];
        for &s in &state {
            match counts.get_mut(s as usize) {
                Some(c) => *c += 1,
                None => return invalid(format!("strategy {s} out of range")),
            }
        }
        Ok(Engine { graph, rules, state, counts, time: 0.0, events: 0, rng })
    }

    pub fn state(&self) -> &[u8] {
        &self.state
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    /// Replaces the configuration, keeping time and the random stream.
    pub fn set_state(&mut self, state: &[u8]) {
        self.state.copy_from_slice(state);
        self.counts.iter_mut().for_each(|c| *c = 0);
        for &s in state {
            self.counts[s as usize] += 1;
        }
    }

    /// `psi(x) = sum_y (1 + w G(xi(x), xi(y))) p(y - x)`.
    pub fn fitness(&self, x: usize) -> f64 {
        let n = self.rules.n;
        let base = self.state[x] as usize * n;
        let (ys, ps) = self.graph.neighbors(x);
        ys.iter().zip(ps).map(|(&y, &p)| p * self.rules.gbar[base + self.state[y as usize] as usize]).sum()
    }

    fn total_rate(&self) -> f64 {
        self.rules.bound * self.graph.sites() as f64
    }

    /// Waiting time to the next clock firing.
    pub fn next_wait(&mut self) -> f64 {
        let u: f64 = self.rng.gen();
        -(1.0 - u).ln() / self.total_rate()
    }

    /// Executes one clock firing at the current time; returns the change, if any.
    pub fn apply(&mut self) -> Option<Flip> {
        self.events += 1;
        let n_sites = self.graph.sites();
        let x = self.rng.gen_range(0..n_sites);
        let (target, new) = match self.rules.update {
            UpdateRule::BirthDeath => {
                let psi = self.fitness(x);
                let u: f64 = self.rng.gen();
                if u * self.rules.bound >= psi {
                    return None;
                }
                let y = self.graph.pick(x, self.rng.gen());
                (y, self.state[x])
            }
            UpdateRule::DeathBirth => {
                let (ys, ps) = self.graph.neighbors(x);
                let mut buf = [0.0f64; 64];
                let mut heap;
                let w: &mut [f64] = if ys.len() <= buf.len() {
                    &mut buf[..ys.len()]
                } else {
                    heap = vec![0.0; ys.len()];
                    &mut heap
                };
                let mut total = 0.0;
                for (k, (&y, &p)) in ys.iter().zip(ps).enumerate() {
                    total += p * self.fitness(y as usize);
                    w[k] = total;
                }
                let t = self.rng.gen::<f64>() * total;
                let k = w.partition_point(|&v| v <= t).min(ys.len() - 1);
                let y = ys[k] as usize;
                (x, self.state[y])
            }
        };
        let old = self.state[target];
        if old == new {
            return None;
        }
        self.state[target] = new;
        self.counts[old as usize] -= 1;
        self.counts[new as usize] += 1;
        Some(Flip { site: target, from: old, to: new })
    }

    /// Advances the clock and fires once.
    pub fn fire(&mut self) -> Option<Flip> {
        self.time += self.next_wait();
        self.apply()
    }

    fn fixated(&self) -> bool {
        self.counts.iter().any(|&c| c as usize == self.state.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Init {
    /// Independent sites with law `u`.
    Product { u: Vec<f64> },
    /// A cube of `strategy` with side `side` at the origin, `background` elsewhere.
    SingleBlock { strategy: usize, side: usize, background: usize },
    /// Sites read from a snapshot file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub kernel: Kernel,
    pub w: f64,
    pub update: UpdateRule,
    pub game: GameMatrix,
    pub init: Init,
    pub seed: u64,
    pub t_max: f64,
    /// Spacing of trace samples; the trace always includes `t = 0`.
    pub sample_every: f64,
    /// Side of the sub-boxes for block densities at each sample.
    #[serde(default)]
    pub block_side: Option<usize>,
}

impl LatticeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kernel.d() != self.d {
            return invalid("kernel dimension differs from d");
        }
        if self.l as i64 <= 2 * self.kernel.range() as i64 {
            return invalid("L must exceed twice the kernel range");
        }
        Rules::new(&self.game, self.w, self.update)?;
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return invalid("t_max must be positive");
        }
        if !(self.sample_every > 0.0) {
            return invalid("sample_every must be positive");
        }
        if let Some(b) = self.block_side {
            if b == 0 || self.l % b != 0 {
                return invalid("block_side must divide L");
            }
        }
        let n = self.game.n();
        match &self.init {
            Init::Product { u } => {
                if u.len() != n {
                    return invalid("initial law has wrong length");
                }
                SimplexPoint::new(u.clone())?;
            }
            Init::SingleBlock { strategy, side, background } => {
                if *strategy >= n || *background >= n || *side > self.l {
                    return invalid("single-block init out of range");
                }
            }
            Init::File { .. } => {}
        }
        Ok(())
    }

    fn sites(&self) -> usize {
        self.l.pow(self.d as u32)
    }

    fn initial_state(&self, rng: &mut ChaCha8Rng) -> Result<Vec<u8>> {
        let n_sites = self.sites();
        Ok(match &self.init {
            Init::Product { u } => {
                let mut cum = Vec::with_capacity(u.len());
                let mut acc = 0.0;
                for p in u {
                    acc += p;
                    cum.push(acc);
                }
                (0..n_sites)
                    .map(|_| {
                        let t = rng.gen::<f64>() * acc;
                        cum.partition_point(|&v| v <= t).min(u.len() - 1) as u8
                    })
                    .collect()
            }
            Init::SingleBlock { strategy, side, background } => (0..n_sites)
                .map(|x| {
                    let mut c = x;
                    let inside = (0..self.d).all(|_| {
                        let r = c % self.l;
                        c /= self.l;
                        r < *side
                    });
                    if inside { *strategy as u8 } else { *background as u8 }
                })
                .collect(),
            Init::File { path } => {
                let s = LatticeState::read_snapshot(path)?;
                if s.d != self.d || s.l != self.l {
                    return invalid("snapshot lattice differs from the configuration");
                }
                if s.strategies > self.game.n() {
                    return invalid("snapshot has more strategies than the game");
                }
                s.sites
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeState {
    pub d: usize,
    pub l: usize,
    pub strategies: usize,
    /// Strategy index (0-based) of each site.
    pub sites: Vec<u8>,
    pub time: f64,
    pub events: u64,
    pub seed: u64,
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"EVOGSNAP";
const SNAPSHOT_VERSION: u32 = 1;
const SNAPSHOT_HEADER: usize = 8 + 4 * 4 + 8 * 3;

impl LatticeState {
    /// Little-endian layout: magic, version, d, L, n, time, seed, events,
    /// then one byte per site.
    pub fn to_snapshot_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(SNAPSHOT_HEADER + self.sites.len());
        b.extend_from_slice(SNAPSHOT_MAGIC);
        for v in [SNAPSHOT_VERSION, self.d as u32, self.l as u32, self.strategies as u32] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(&self.time.to_le_bytes());
        b.extend_from_slice(&self.seed.to_le_bytes());
        b.extend_from_slice(&self.events.to_le_bytes());
        b.extend_from_slice(&self.sites);
        b
    }

    pub fn from_snapshot_bytes(b: &[u8]) -> Result<Self> {
        if b.len() < SNAPSHOT_HEADER || &b[..8] != SNAPSHOT_MAGIC {
            return invalid("not a lattice snapshot");
        }
        let u32_at = |k: usize| u32::from_le_bytes(b[k..k + 4].try_into().unwrap());
        let u64_at = |k: usize| u64::from_le_bytes(b[k..k + 8].try_into().unwrap());
        let version = u32_at(8);
        if version != SNAPSHOT_VERSION {
            return invalid(format!("unsupported snapshot version {version}"));
        }
        let (d, l, strategies) = (u32_at(12) as usize, u32_at(16) as usize, u32_at(20) as usize);
        let time = f64::from_bits(u64_at(24));
        let seed = u64_at(32);
        let events = u64_at(40);
        let n_sites = l.checked_pow(d as u32).ok_or_else(|| Error::Invalid("snapshot lattice too large".into()))?;
        let sites = &b[SNAPSHOT_HEADER..];
        if sites.len() != n_sites {
            return invalid(format!("snapshot holds {} sites, header says {n_sites}", sites.len()));
        }
        if sites.iter().any(|&s| s as usize >= strategies) {
            return invalid("snapshot site value out of range");
        }
        Ok(LatticeState { d, l, strategies, sites: sites.to_vec(), time, events, seed })
    }

    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        atomic_write(path, &self.to_snapshot_bytes())
    }

    pub fn read_snapshot(path: &Path) -> Result<Self> {
        Self::from_snapshot_bytes(&std::fs::read(path)?)
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.strategies];
        for &s in &self.sites {
            c[s as usize] += 1.0;
        }
        let n = self.sites.len() as f64;
        c.iter().map(|x| x / n).collect()
    }
}

/// Empirical strategy frequencies in each cube of side `block` (blocks in
/// the same index order as sites).
pub fn measure_block_densities(state: &LatticeState, block: usize) -> Result<Vec<SimplexPoint>> {
    block_densities(&state.sites, state.d, state.l, state.strategies, block)?
        .into_iter()
        .map(SimplexPoint::new)
        .collect()
}

fn block_densities(sites: &[u8], d: usize, l: usize, n: usize, block: usize) -> Result<Vec<Vec<f64>>> {
    if block == 0 || l % block != 0 {
        return invalid(format!("block side {block} does not divide L = {l}"));
    }
    let per = l / block;
    let n_blocks = per.pow(d as u32);
    let mut counts = vec![0u32; n_blocks * n];
    for (x, &s) in sites.iter().enumerate() {
        let (mut c, mut b, mut scale) = (x, 0usize, 1usize);
        for _ in 0..d {
            b += (c % l) / block * scale;
            c /= l;
            scale *= per;
        }
        counts[b * n + s as usize] += 1;
    }
    let vol = block.pow(d as u32) as f64;
    Ok(counts.chunks(n).map(|c| c.iter().map(|&k| k as f64 / vol).collect()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTrace {
    pub times: Vec<f64>,
    pub frequencies: Vec<Vec<f64>>,
    /// Block densities per sample, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<Vec<Vec<f64>>>>,
}

impl FrequencyTrace {
    /// Mean of the samples with `t0 <= t <= t1`.
    pub fn time_average(&self, t0: f64, t1: f64) -> Option<Vec<f64>> {
        let picked: Vec<&Vec<f64>> =
            self.times.iter().zip(&self.frequencies).filter(|(t, _)| **t >= t0 && **t <= t1).map(|(_, f)| f).collect();
        let first = picked.first()?;
        let mut m = vec![0.0; first.len()];
        for f in &picked {
            for (a, b) in m.iter_mut().zip(f.iter()) {
                *a += b;
            }
        }
        Some(m.into_iter().map(|x| x / picked.len() as f64).collect())
    }

    pub fn final_frequencies(&self) -> &[f64] {
        self.frequencies.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        let n = self.frequencies.first().map_or(0, |f| f.len());
        write!(out, "t")?;
        for i in 1..=n {
            write!(out, ",u{i}")?;
        }
        writeln!(out)?;
        for (t, f) in self.times.iter().zip(&self.frequencies) {
            write!(out, "{t}")?;
            for x in f {
                write!(out, ",{x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        atomic_write_with(path, |w| self.write_csv(w))
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: FrequencyTrace,
    pub state: LatticeState,
}

/// One run with the random stream `substream(seed, 0)`.
pub fn run(config: &LatticeConfig) -> Result<RunOutput> {
    run_stream(config, 0)
}

/// Independent replicas on streams `0..replicas`, run in parallel.
pub fn run_replicas(config: &LatticeConfig, replicas: usize) -> Result<Vec<RunOutput>> {
    (0..replicas as u64).into_par_iter().map(|r| run_stream(config, r)).collect()
}

fn run_stream(config: &LatticeConfig, stream: u64) -> Result<RunOutput> {
    config.validate()?;
    let graph = Graph::torus(&config.kernel, config.l)?;
    let rules = Rules::new(&config.game, config.w, config.update)?;
    let mut rng = substream(config.seed, stream);
    let init = config.initial_state(&mut rng)?;
    let mut eng = Engine::new(&graph, rules, init, rng)?;
    let n_sites = graph.sites() as f64;
    let n = config.game.n();
    let mut trace = FrequencyTrace {
        times: Vec::new(),
        frequencies: Vec::new(),
        blocks: config.block_side.map(|_| Vec::new()),
    };
    let n_samples = (config.t_max / config.sample_every).floor() as usize;
    let record = |eng: &Engine, t: f64, trace: &mut FrequencyTrace| -> Result<()> {
        trace.times.push(t);
        trace.frequencies.push(eng.counts().iter().map(|&c| c as f64 / n_sites).collect());
        if let (Some(b), Some(blocks)) = (config.block_side, trace.blocks.as_mut()) {
            blocks.push(block_densities(eng.state(), config.d, config.l, n, b)?);
        }
        Ok(())
    };
    let mut k = 0usize;
    let sample_time = |k: usize| k as f64 * config.sample_every;
    loop {
        if eng.fixated() {
            while k <= n_samples {
                record(&eng, sample_time(k), &mut trace)?;
                k += 1;
            }
            break;
        }
        let next = eng.time() + eng.next_wait();
        while k <= n_samples && sample_time(k) < next {
            record(&eng, sample_time(k), &mut trace)?;
            k += 1;
        }
        if next > config.t_max {
            break;
        }
        eng.time = next;
        eng.apply();
    }
    if trace.times.last().is_some_and(|&t| t < config.t_max) {
        record(&eng, config.t_max, &mut trace)?;
    }
    let state = LatticeState {
        d: config.d,
        l: config.l,
        strategies: n,
        sites: eng.state().to_vec(),
        time: config.t_max,
        events: eng.events(),
        seed: config.seed,
    };
    Ok(RunOutput { trace, state })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPoint {
    pub offset: Vec<i32>,
    pub u: f64,
    pub time: f64,
    pub replicas: usize,
    /// Mean over replicas of the fraction of sites `z` with strategy 1 at `z`
    /// and strategy 2 at `z + x`.
    pub value: f64,
    pub halfwidth: f64,
    pub p_escape: Option<f64>,
    /// `p(0|x) u (1 - u)`.
    pub predicted: Option<f64>,
    pub warning: Option<String>,
}

/// Two-point function of the voter model (`w = 0`) started from product
/// measure with density `u` of strategy 1, run to time `max(t_max, L^2)`.
pub fn voter_two_point(config: &LatticeConfig, x: &[i32], u: f64, replicas: usize) -> Result<TwoPoint> {
    if config.w != 0.0 {
        return invalid("the two-point check needs w = 0");
    }
    if config.game.n() != 2 {
        return invalid("the two-point check needs a 2-strategy game");
    }
    if x.len() != config.d {
        return invalid("offset has wrong dimension");
    }
    if !(0.0..=1.0).contains(&u) || replicas == 0 {
        return invalid("need u in [0,1] and at least one replica");
    }
    let time = config.t_max.max((config.l * config.l) as f64);
    let mut cfg = config.clone();
    cfg.init = Init::Product { u: vec![u, 1.0 - u] };
    cfg.t_max = time;
    cfg.sample_every = time;
    cfg.block_side = None;
    let (p0x, warning) = if config.d <= 2 {
        (None, Some("d <= 2: the voter model has no nontrivial stationary distribution".to_string()))
    } else {
        (Some(p_escape(&config.kernel, x)?), None)
    };
    let values: Vec<f64> = if u == 0.0 || u == 1.0 {
        vec![0.0; replicas]
    } else {
        let runs = run_replicas(&cfg, replicas)?;
        runs.iter().map(|r| pair_fraction(&r.state, x)).collect()
    };
    let m = values.iter().sum::<f64>() / replicas as f64;
    let var = if replicas > 1 {
        values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (replicas - 1) as f64
    } else {
        0.0
    };
    Ok(TwoPoint {
        offset: x.to_vec(),
        u,
        time,
        replicas,
        value: m,
        halfwidth: 1.959963984540054 * (var / replicas as f64).sqrt(),
        p_escape: p0x,
        predicted: p0x.map(|p| p * u * (1.0 - u)),
        warning,
    })
}

fn pair_fraction(s: &LatticeState, x: &[i32]) -> f64 {
    let (d, l) = (s.d, s.l);
    let mut hits = 0usize;
    for z in 0..s.sites.len() {
        if s.sites[z] != 0 {
            continue;
        }
        let (mut c, mut y, mut scale) = (z, 0usize, 1usize);
        for xk in x.iter().take(d) {
            let ck = ((c % l) as i64 + *xk as i64).rem_euclid(l as i64) as usize;
            y += ck * scale;
            c /= l;
            scale *= l;
        }
        if s.sites[y] == 1 {
            hits += 1;
        }
    }
    hits as f64 / s.sites.len() as f64
}

/// Checks a frequency vector against the simplex.
pub fn on_simplex(f: &[f64]) -> bool {
    f.iter().all(|&x| x >= -SIMPLEX_TOL) && (f.iter().sum::<f64>() - 1.0).abs() < 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_neighbours_wrap() {
        let g = Graph::torus(&Kernel::nearest_neighbor(2), 4).unwrap();
        let (ys, _) = g.neighbors(0);
        let mut v: Vec<u32> = ys.to_vec();
        v.sort();
        assert_eq!(v, vec![1, 3, 4, 12]);
    }

    #[test]
    fn snapshot_round_trip() {
        let s = LatticeState { d: 2, l: 3, strategies: 3, sites: vec![0, 1, 2, 2, 1, 0, 0, 0, 1], time: 2.5, events: 17, seed: 9 };
        let b = s.to_snapshot_bytes();
        assert_eq!(LatticeState::from_snapshot_bytes(&b).unwrap(), s);
        let mut bad = b.clone();
        bad[8] = 2;
        assert!(LatticeState::from_snapshot_bytes(&bad).is_err());
        assert!(LatticeState::from_snapshot_bytes(&b[..b.len() - 1]).is_err());
    }

    #[test]
    fn block_index_layout() {
        let sites: Vec<u8> = (0..16).map(|x| if x % 4 < 2 && x / 4 < 2 { 1 } else { 0 }).collect();
        let b = block_densities(&sites, 2, 4, 2, 2).unwrap();
        assert_eq!(b[0], vec![0.0, 1.0]);
        assert!(b[1..].iter().all(|v| v == &vec![1.0, 0.0]));
    }
}
