//! Random-walk kernels, the constants `kappa` and `chi`, and Monte Carlo
//! estimates of two- and three-walker coalescence probabilities.

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::games::CoalescenceConstants;
use crate::rng::substream;

/// Samples per RNG substream; fixed so results do not depend on thread count.
const CHUNK: u64 = 4096;
const Z95: f64 = 1.959963984540054;

/// Finite-range symmetric jump law on Z^d with `p(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelFile", into = "KernelFile")]
pub struct Kernel {
    d: usize,
    offsets: Vec<Vec<i32>>,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct KernelFile {
    d: usize,
    offsets: Vec<(Vec<i32>, f64)>,
}

impl TryFrom<KernelFile> for Kernel {
    type Error = Error;
    fn try_from(f: KernelFile) -> Result<Self> {
        Kernel::new(f.d, f.offsets)
    }
}

impl From<Kernel> for KernelFile {
    fn from(k: Kernel) -> Self {
        KernelFile { d: k.d, offsets: k.offsets.into_iter().zip(k.probs).collect() }
    }
}

impl Kernel {
    pub fn new(d: usize, offsets: Vec<(Vec<i32>, f64)>) -> Result<Self> {
        if d == 0 {
            return invalid("kernel dimension must be positive");
        }
        let mut merged: Vec<(Vec<i32>, f64)> = Vec::new();
        for (x, p) in offsets {
            if x.len() != d {
                return invalid("kernel offset has wrong dimension");
            }
            if !(p >= 0.0) || !p.is_finite() {
                return invalid("kernel weights must be nonnegative");
            }
            if p == 0.0 {
                continue;
            }
            if x.iter().all(|&c| c == 0) {
                return invalid("kernel must satisfy p(0) = 0");
            }
            match merged.iter_mut().find(|(y, _)| *y == x) {
                Some(e) => e.1 += p,
                None => merged.push((x, p)),
            }
        }
        let total: f64 = merged.iter().map(|e| e.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("kernel weights sum to {total}"));
        }
        for (x, p) in &merged {
            let neg: Vec<i32> = x.iter().map(|c| -c).collect();
            match merged.iter().find(|(y, _)| *y == neg) {
                Some((_, q)) if q == p => {}
                _ => return invalid("kernel must be symmetric: p(x) = p(-x)"),
            }
        }
        let vecs: Vec<Vec<i64>> = merged.iter().map(|(x, _)| x.iter().map(|&c| c as i64).collect()).collect();
        if lattice_index(&vecs, d) != Some(1) {
            return invalid("kernel is not irreducible (offsets do not generate Z^d)");
        }
        let (offsets, probs) = merged.into_iter().unzip();
        Ok(Kernel { d, offsets, probs })
    }

    pub fn uniform(d: usize, offsets: Vec<Vec<i32>>) -> Result<Self> {
        let m = offsets.len() as f64;
        Kernel::new(d, offsets.into_iter().map(|x| (x, 1.0 / m)).collect())
    }

    /// Uniform law on the `2d` unit vectors.
    pub fn nearest_neighbor(d: usize) -> Self {
        let mut v = Vec::new();
        for k in 0..d {
            for s in [1, -1] {
                let mut x = vec![0; d];
                x[k] = s;
                v.push(x);
            }
        }
        Kernel::uniform(d, v).expect("nearest-neighbor kernel is valid")
    }

    /// Uniform law on the `3^d - 1` points of the unit cube around the origin.
    pub fn moore(d: usize) -> Self {
        let mut v = Vec::new();
        let total = 3usize.pow(d as u32);
        for code in 0..total {
            let mut c = code;
            let x: Vec<i32> = (0..d)
                .map(|_| {
                    let r = (c % 3) as i32 - 1;
                    c /= 3;
                    r
                })
                .collect();
            if x.iter().any(|&t| t != 0) {
                v.push(x);
            }
        }
        Kernel::uniform(d, v).expect("Moore kernel is valid")
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn offsets(&self) -> impl Iterator<Item = (&[i32], f64)> {
        self.offsets.iter().map(|x| x.as_slice()).zip(self.probs.iter().cloned())
    }

    /// Largest coordinate of any offset (sup norm).
    pub fn range(&self) -> i32 {
        self.offsets.iter().flatten().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// Per-coordinate variance of one step, averaged over coordinates.
    pub fn sigma2(&self) -> f64 {
        let tr: f64 = self
            .offsets()
            .map(|(x, p)| p * x.iter().map(|&c| (c as f64).powi(2)).sum::<f64>())
            .sum();
        tr / self.d as f64
    }

    /// Characteristic function `sum_x p(x) cos(t.x)`.
    pub fn char_fn(&self, t: &[f64]) -> f64 {
        self.offsets()
            .map(|(x, p)| p * x.iter().zip(t).map(|(&c, &s)| c as f64 * s).sum::<f64>().cos())
            .sum()
    }

    fn is_uniform(&self) -> bool {
        self.probs.iter().all(|&p| p == self.probs[0])
    }
}

/// Absolute determinant of the lattice generated by `vecs` in Z^d, or `None`
/// when they span a lower-rank sublattice.
fn lattice_index(vecs: &[Vec<i64>], d: usize) -> Option<i64> {
    let mut rows: Vec<Vec<i64>> = vecs.to_vec();
    let mut det = 1i64;
    for col in 0..d {
        loop {
            let live: Vec<usize> = (0..rows.len()).filter(|&r| rows[r][col] != 0).collect();
            if live.is_empty() {
                return None;
            }
            let piv = *live.iter().min_by_key(|&&r| rows[r][col].abs()).unwrap();
            let mut done = true;
            for &r in &live {
                if r == piv {
                    continue;
                }
                let q = rows[r][col] / rows[piv][col];
                let pr = rows[piv].clone();
                for (a, b) in rows[r].iter_mut().zip(&pr) {
                    *a -= q * b;
                }
                if rows[r][col] != 0 {
                    done = false;
                }
            }
            if done {
                let pr = rows.swap_remove(piv);
                det *= pr[col].abs();
                break;
            }
        }
    }
    Some(det)
}

/// `1 / sum_x p(x) p(-x)`.
pub fn kappa(k: &Kernel) -> f64 {
    if k.is_uniform() {
        return k.probs.len() as f64;
    }
    let s: f64 = k.probs.iter().map(|p| p * p).sum();
    1.0 / s
}

/// Midpoint rule on an `n^d` grid of the torus `(-pi, pi)^d`; the grid never
/// touches `t = 0`.
fn midpoint_chi(k: &Kernel, n: usize) -> f64 {
    let d = k.d;
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let ts: Vec<f64> = (0..n).map(|j| -std::f64::consts::PI + (j as f64 + 0.5) * h).collect();
    // cos(t_j * c) for every coordinate value c appearing in an offset
    let r = k.range();
    let width = (2 * r + 1) as usize;
    let mut cosv = vec![0.0; n * width];
    let mut sinv = vec![0.0; n * width];
    for (j, &t) in ts.iter().enumerate() {
        for c in -r..=r {
            let idx = j * width + (c + r) as usize;
            cosv[idx] = (t * c as f64).cos();
            sinv[idx] = (t * c as f64).sin();
        }
    }
    let offs: Vec<(Vec<usize>, f64)> = k
        .offsets()
        .map(|(x, p)| (x.iter().map(|&c| (c + r) as usize).collect(), p))
        .collect();
    let nn = k.is_uniform() && k.len() == 2 * d && k.range() == 1;
    let outer: usize = n.pow((d - 1) as u32);
    let sum: f64 = (0..outer)
        .into_par_iter()
        .map(|code| {
            let mut idx = vec![0usize; d];
            let mut c = code;
            for slot in idx.iter_mut().skip(1) {
                *slot = c % n;
                c /= n;
            }
            let mut acc = 0.0;
            for j0 in 0..n {
                idx[0] = j0;
                let phi = if nn {
                    idx.iter().map(|&j| cosv[j * width + (1 + r) as usize]).sum::<f64>() / d as f64
                } else {
                    let mut phi = 0.0;
                    for (x, p) in &offs {
                        // real part of prod_k exp(i t_k x_k)
                        let (mut re, mut im) = (1.0, 0.0);
                        for (kk, &xi) in x.iter().enumerate() {
                            let a = idx[kk] * width + xi;
                            let (c2, s2) = (cosv[a], sinv[a]);
                            let t = re * c2 - im * s2;
                            im = re * s2 + im * c2;
                            re = t;
                        }
                        phi += p * re;
                    }
                    phi
                };
                acc += 1.0 / (1.0 - phi);
            }
            acc
        })
        .sum();
    sum / n.pow(d as u32) as f64
}

/// Result of [`chi_and_p01`], with the convergence history.
#[derive(Debug, Clone, Serialize)]
pub struct ChiResult {
    pub chi: f64,
    pub p01: f64,
    pub resolution: usize,
    pub last_change: f64,
}

/// Expected number of visits to the origin, `chi`, and `p(0|v1) = 1/chi`.
///
/// The singular midpoint sums carry an error expansion in odd powers of the
/// mesh (`h, h^3, h^5, ...`) because `1/(1-phi)` expands in even homogeneous
/// terms starting at degree -2. A Richardson table over doubling grids removes
/// those terms; doubling stops once successive extrapolants differ by less than
/// `1e-6`, or at `max_resolution`.
pub fn chi_and_p01(k: &Kernel, max_resolution: usize) -> Result<ChiResult> {
    if k.d <= 2 {
        return Err(Error::Invalid(
            "walk is recurrent in d <= 2: the voter model has no nontrivial stationary distributions".into(),
        ));
    }
    if k.d != 3 {
        return invalid("chi quadrature supports d = 3 only");
    }
    let mut n = 8usize;
    let mut table: Vec<Vec<f64>> = Vec::new();
    let mut best = f64::NAN;
    let mut change = f64::INFINITY;
    while n <= max_resolution.max(8) {
        let mut row = vec![midpoint_chi(k, n)];
        if let Some(prev) = table.last() {
            for (m, p) in prev.iter().enumerate() {
                let f = 2f64.powi(2 * m as i32 + 1);
                let r = (f * row[m] - p) / (f - 1.0);
                row.push(r);
            }
        }
        let est = *row.last().unwrap();
        if best.is_finite() {
            change = (est - best).abs();
        }
        best = est;
        table.push(row);
        if change < 1e-6 {
            break;
        }
        n *= 2;
    }
    if !best.is_finite() || best < 1.0 {
        return Err(Error::Numeric(format!("chi quadrature produced {best}")));
    }
    Ok(ChiResult { chi: best, p01: 1.0 / best, resolution: n.min(max_resolution.max(8)), last_change: change })
}

/// `(2 pi)^-d * integral of (1 - cos t.x) / (1 - phi(t))` by the midpoint rule.
/// The integrand is bounded, so plain refinement converges.
fn midpoint_green_gap(k: &Kernel, x: &[i32], n: usize) -> f64 {
    let d = k.d;
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let outer: usize = n.pow((d - 1) as u32);
    let sum: f64 = (0..outer)
        .into_par_iter()
        .map(|code| {
            let mut t = vec![0.0; d];
            let mut c = code;
            for slot in t.iter_mut().skip(1) {
                *slot = -std::f64::consts::PI + ((c % n) as f64 + 0.5) * h;
                c /= n;
            }
            let mut acc = 0.0;
            for j0 in 0..n {
                t[0] = -std::f64::consts::PI + (j0 as f64 + 0.5) * h;
                let dot: f64 = t.iter().zip(x).map(|(a, &b)| a * b as f64).sum();
                acc += (1.0 - dot.cos()) / (1.0 - k.char_fn(&t));
            }
            acc
        })
        .sum();
    sum / n.pow(d as u32) as f64
}

/// `p(0|x)`: probability that two continuous-time walks started at `0` and
/// `x` never meet, `1 - G(x)/G(0)` with `G` the Green function of the kernel.
pub fn p_escape(k: &Kernel, x: &[i32]) -> Result<f64> {
    if x.len() != k.d {
        return invalid("offset has wrong dimension");
    }
    if x.iter().all(|&c| c == 0) {
        return Ok(0.0);
    }
    let chi = chi_and_p01(k, 256)?.chi;
    let mut n = 32usize;
    let mut prev = midpoint_green_gap(k, x, n);
    loop {
        n *= 2;
        let next = midpoint_green_gap(k, x, n);
        if (next - prev).abs() < 1e-7 || n >= 256 {
            return Ok((next / chi).clamp(0.0, 1.0));
        }
        prev = next;
    }
}

/// Monte Carlo probability with a 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub halfwidth: f64,
    pub samples: u64,
    pub horizon: u64,
}

impl Estimate {
    pub fn from_count(hits: u64, samples: u64, horizon: u64) -> Self {
        let p = hits as f64 / samples as f64;
        Estimate { value: p, halfwidth: Z95 * (p * (1.0 - p) / samples as f64).sqrt(), samples, horizon }
    }

    pub fn exact(value: f64) -> Self {
        Estimate { value, halfwidth: 0.0, samples: 0, horizon: 0 }
    }

    /// Heuristic upper bound on the downward correction still owed by a
    /// finite-horizon escape estimate: a pair still apart after `n` steps is
    /// at distance about `sqrt(n)` and returns with probability `O(1/sqrt(n))`.
    pub fn horizon_bias_bound(&self) -> f64 {
        if self.horizon == 0 {
            0.0
        } else {
            1.0 / (self.horizon as f64).sqrt()
        }
    }
}

/// Samples offsets of a kernel and encodes lattice points as single `i64`s.
///
/// Coordinates are packed in 16-bit lanes; packing is linear, so sums of
/// packed vectors are packed sums and equality is exact while every
/// coordinate stays inside `(-2^15, 2^15)`.
struct PackedSampler {
    steps: Vec<i64>,
    alias: Option<(Vec<f64>, Vec<usize>)>,
    /// Uniform kernels: byte -> one step.
    single: Option<ByteTable>,
    /// Uniform kernels: byte -> change of `(x1 - x0, x2 - x0)` when one of
    /// three walkers moves.
    diffs: Option<DiffTable>,
    /// For uniform kernels with at most 6 offsets: byte -> three successive steps.
    triples: Option<TripleTable>,
}

/// Byte -> step; bytes above `limit` are rejected.
struct ByteTable {
    limit: u8,
    step: [i64; 256],
}

impl ByteTable {
    fn new(steps: &[i64]) -> Option<Self> {
        let m = steps.len();
        if m > 128 {
            return None;
        }
        let limit = (256 / m) * m;
        let mut t = ByteTable { limit: (limit - 1) as u8, step: [0; 256] };
        for b in 0..limit {
            t.step[b] = steps[b % m];
        }
        Some(t)
    }
}

struct DiffTable {
    limit: u8,
    d: [[i64; 2]; 256],
}

impl DiffTable {
    fn new(steps: &[i64]) -> Option<Self> {
        let m = steps.len() * 3;
        if m > 128 {
            return None;
        }
        let limit = (256 / m) * m;
        let mut t = DiffTable { limit: (limit - 1) as u8, d: [[0; 2]; 256] };
        for b in 0..limit {
            let r = b % m;
            let st = steps[r % steps.len()];
            t.d[b] = match r / steps.len() {
                0 => [-st, -st],
                1 => [st, 0],
                _ => [0, st],
            };
        }
        Some(t)
    }
}

/// Three iid steps per byte, stored as running partial sums.
struct TripleTable {
    limit: u8,
    sums: [[i64; 3]; 256],
}

impl TripleTable {
    fn new(steps: &[i64]) -> Option<Self> {
        let m = steps.len();
        if m * m * m > 256 {
            return None;
        }
        let limit = (256 / (m * m * m)) * m * m * m;
        let mut t = TripleTable { limit: (limit - 1) as u8, sums: [[0; 3]; 256] };
        for b in 0..limit {
            let r = b % (m * m * m);
            let (a, c, e) = (steps[r % m], steps[(r / m) % m], steps[r / (m * m)]);
            t.sums[b] = [a, a + c, a + c + e];
        }
        Some(t)
    }
}

/// Buffered random bytes.
struct Bytes<'a> {
    rng: &'a mut ChaCha8Rng,
    buf: [u8; 512],
    pos: usize,
}

impl<'a> Bytes<'a> {
    fn new(rng: &'a mut ChaCha8Rng) -> Self {
        Bytes { rng, buf: [0; 512], pos: 512 }
    }

    #[inline(always)]
    fn next(&mut self) -> u8 {
        if self.pos == self.buf.len() {
            self.rng.fill_bytes(&mut self.buf);
            self.pos = 0;
        }
        let b = self.buf[self.pos];
        self.pos += 1;
        b
    }
}

const LANE: u32 = 16;

fn pack(x: &[i32]) -> i64 {
    x.iter().enumerate().map(|(k, &c)| (c as i64) << (LANE * k as u32)).sum()
}

impl PackedSampler {
    fn new(k: &Kernel, horizon: u64) -> Result<Self> {
        if k.d > 4 {
            return invalid("walk simulation supports d <= 4");
        }
        // a start may be a sum of three steps, then `horizon` more
        if (horizon + 3).saturating_mul(k.range() as u64) >= 1 << (LANE - 1) {
            return invalid("horizon too long for packed coordinates");
        }
        let steps: Vec<i64> = k.offsets.iter().map(|x| pack(x)).collect();
        let uniform = k.is_uniform();
        let alias = if uniform { None } else { Some(build_alias(&k.probs)) };
        let single = if uniform { ByteTable::new(&steps) } else { None };
        let diffs = if uniform { DiffTable::new(&steps) } else { None };
        let triples = if uniform { TripleTable::new(&steps) } else { None };
        Ok(PackedSampler { steps, alias, single, diffs, triples })
    }

    #[inline(always)]
    fn sample(&self, src: &mut Bytes) -> i64 {
        if let Some(t) = &self.single {
            loop {
                let b = src.next();
                if b <= t.limit {
                    return t.step[b as usize];
                }
            }
        }
        let (prob, alias) = self.alias.as_ref().expect("alias table for non-uniform kernel");
        let i = src.rng.gen_range(0..self.steps.len());
        if src.rng.gen::<f64>() < prob[i] {
            self.steps[i]
        } else {
            self.steps[alias[i]]
        }
    }

    /// Change of `(x1 - x0, x2 - x0)` when a uniformly chosen walker of three moves.
    #[inline(always)]
    fn diff_step(&self, src: &mut Bytes) -> [i64; 2] {
        if let Some(t) = &self.diffs {
            loop {
                let b = src.next();
                if b <= t.limit {
                    return t.d[b as usize];
                }
            }
        }
        let w = src.rng.gen_range(0..3u32);
        let st = self.sample(src);
        match w {
            0 => [-st, -st],
            1 => [st, 0],
            _ => [0, st],
        }
    }

    /// Runs a walk from `x` for up to `steps` steps; returns the number of
    /// steps taken when it first reaches 0, or `None`.
    #[inline]
    fn hit_time(&self, mut x: i64, steps: u64, src: &mut Bytes) -> Option<u64> {
        let mut done = 0u64;
        if let Some(t) = &self.triples {
            while steps - done >= 3 {
                if src.pos == src.buf.len() {
                    src.rng.fill_bytes(&mut src.buf);
                    src.pos = 0;
                }
                let mut used = 0;
                let mut found = None;
                for &b in &src.buf[src.pos..] {
                    used += 1;
                    if b > t.limit {
                        continue;
                    }
                    let sm = &t.sums[b as usize];
                    let (h0, h1, h2) = (x + sm[0] == 0, x + sm[1] == 0, x + sm[2] == 0);
                    x += sm[2];
                    done += 3;
                    if h0 | h1 | h2 {
                        found = Some(done - 2 + (!h0) as u64 + (!h0 && !h1) as u64);
                        break;
                    }
                    if steps - done < 3 {
                        break;
                    }
                }
                src.pos += used;
                if found.is_some() {
                    return found;
                }
            }
        }
        while done < steps {
            x += self.sample(src);
            done += 1;
            if x == 0 {
                return Some(done);
            }
        }
        None
    }
}

fn build_alias(p: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let m = p.len();
    let mut prob: Vec<f64> = p.iter().map(|x| x * m as f64).collect();
    let mut alias: Vec<usize> = (0..m).collect();
    let mut small: Vec<usize> = (0..m).filter(|&i| prob[i] < 1.0).collect();
    let mut large: Vec<usize> = (0..m).filter(|&i| prob[i] >= 1.0).collect();
    while let (Some(s), Some(&l)) = (small.pop(), large.last()) {
        alias[s] = l;
        prob[l] -= 1.0 - prob[s];
        if prob[l] < 1.0 {
            large.pop();
            small.push(l);
        }
    }
    for i in large.into_iter().chain(small) {
        prob[i] = 1.0;
    }
    (prob, alias)
}

fn check_mc(samples: u64, horizon: u64) -> Result<()> {
    if horizon < 1 {
        return invalid("horizon must be at least 1");
    }
    if samples < 100 {
        return invalid("at least 100 samples are required");
    }
    Ok(())
}

/// Runs `body` over deterministic substream chunks and sums the tallies.
fn chunked<T, F>(samples: u64, seed: u64, stream_base: u64, body: F) -> T
where
    T: Send + Default + std::ops::AddAssign,
    F: Fn(&mut ChaCha8Rng, u64) -> T + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, stream_base + c);
            let len = CHUNK.min(samples - c * CHUNK);
            body(&mut rng, len)
        })
        .reduce(T::default, |mut a, b| {
            a += b;
            a
        })
}

/// Initial separation of a walker pair, as a signed sum of iid kernel steps.
///
/// `[1]` is `v1`, `[1, 1]` is `v1 + v2`, `[-1, 1, 1]` is `v2 + v3 - v1`, and
/// the empty list starts both walkers at the same site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairStart(pub Vec<i8>);

impl PairStart {
    pub fn neighbor() -> Self {
        PairStart(vec![1])
    }
}

/// Probability that two walkers started `start` apart do not meet within
/// `horizon` steps of their difference walk.
pub fn estimate_pair_escape_from(
    k: &Kernel,
    start: &PairStart,
    samples: u64,
    horizon: u64,
    seed: u64,
) -> Result<Estimate> {
    check_mc(samples, horizon)?;
    if k.d < 3 {
        return invalid("escape estimates need a transient walk (d >= 3)");
    }
    let sampler = PackedSampler::new(k, horizon)?;
    let tag = start.0.iter().fold(17u64, |h, &s| h.wrapping_mul(31).wrapping_add((s + 2) as u64));
    let escaped: u64 = chunked(samples, seed, tag << 40, |rng, len| {
        let mut src = Bytes::new(rng);
        let mut hits = 0u64;
        for _ in 0..len {
            let x: i64 = start.0.iter().map(|&s| s as i64 * sampler.sample(&mut src)).sum();
            if x == 0 {
                continue;
            }
            if sampler.hit_time(x, horizon, &mut src).is_none() {
                hits += 1;
            }
        }
        hits
    });
    Ok(Estimate::from_count(escaped, samples, horizon))
}

/// `p(0|v1)` by Monte Carlo.
pub fn estimate_pair_escape(k: &Kernel, samples: u64, horizon: u64, seed: u64) -> Result<Estimate> {
    estimate_pair_escape_from(k, &PairStart::neighbor(), samples, horizon, seed)
}

/// Starting configuration of three walkers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TripleStart {
    /// `0, v1, v1 + v2`
    BirthDeath,
    /// `v1, v2, v2 + v3`
    DeathBirth,
}

/// Terminal partition tallies of three coalescing walkers.
///
/// `together[k]` counts samples where exactly the pair not containing
/// walker `k` has coalesced (so `together[0]` is walkers 1 and 2).
/// `pair_apart[k]` independently counts samples where that same pair never
/// occupied a common site.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleCounts {
    pub samples: u64,
    pub horizon: u64,
    pub all_apart: u64,
    pub together: [u64; 3],
    pub all_one: u64,
    pub pair_apart: [u64; 3],
}

impl std::ops::AddAssign for TripleCounts {
    fn add_assign(&mut self, o: Self) {
        self.samples += o.samples;
        self.all_apart += o.all_apart;
        self.all_one += o.all_one;
        for k in 0..3 {
            self.together[k] += o.together[k];
            self.pair_apart[k] += o.pair_apart[k];
        }
    }
}

impl TripleCounts {
    fn est(&self, c: u64) -> Estimate {
        Estimate::from_count(c, self.samples, self.horizon)
    }

    /// No coalescence at all.
    pub fn p_all_apart(&self) -> Estimate {
        self.est(self.all_apart)
    }

    /// Only the pair excluding walker `k` has coalesced.
    pub fn p_pair_without(&self, k: usize) -> Estimate {
        self.est(self.together[k])
    }

    /// The pair excluding walker `k` never met.
    pub fn p_pair_apart(&self, k: usize) -> Estimate {
        self.est(self.pair_apart[k])
    }
}

/// Simulates three coalescing walks by the embedded jump chain: each event
/// moves one surviving walker chosen uniformly. `horizon` counts events.
pub fn triple_counts(
    k: &Kernel,
    start: TripleStart,
    samples: u64,
    horizon: u64,
    seed: u64,
) -> Result<TripleCounts> {
    check_mc(samples, horizon)?;
    if k.d < 3 {
        return invalid("escape estimates need a transient walk (d >= 3)");
    }
    let sampler = PackedSampler::new(k, horizon)?;
    let base = match start {
        TripleStart::BirthDeath => 1u64 << 60,
        TripleStart::DeathBirth => 2u64 << 60,
    };
    let mut out: TripleCounts = chunked(samples, seed, base, |rng, len| {
        let mut src = Bytes::new(rng);
        let mut t = TripleCounts { samples: len, ..Default::default() };
        for _ in 0..len {
            let pos = match start {
                TripleStart::BirthDeath => {
                    let a = sampler.sample(&mut src);
                    let b = sampler.sample(&mut src);
                    [0, a, a + b]
                }
                TripleStart::DeathBirth => {
                    let a = sampler.sample(&mut src);
                    let b = sampler.sample(&mut src);
                    let c = sampler.sample(&mut src);
                    [a, b, b + c]
                }
            };
            run_triple(&sampler, pos, horizon, &mut src, &mut t);
        }
        t
    });
    out.horizon = horizon;
    Ok(out)
}

#[inline]
fn run_triple(s: &PackedSampler, mut pos: [i64; 3], horizon: u64, src: &mut Bytes, t: &mut TripleCounts) {
    // met[k]: the pair excluding walker k has shared a site
    let mut met = [pos[1] == pos[2], pos[0] == pos[2], pos[0] == pos[1]];
    let mut events = 0u64;
    if !met.iter().any(|&m| m) {
        let (mut d1, mut d2) = (pos[1] - pos[0], pos[2] - pos[0]);
        match &s.diffs {
            Some(t) => {
                'outer: while events < horizon {
                    if src.pos == src.buf.len() {
                        src.rng.fill_bytes(&mut src.buf);
                        src.pos = 0;
                    }
                    let avail = &src.buf[src.pos..];
                    let mut used = 0;
                    for &b in avail {
                        used += 1;
                        if b > t.limit {
                            continue;
                        }
                        let [a, c] = t.d[b as usize];
                        d1 += a;
                        d2 += c;
                        events += 1;
                        if (d1 == 0) | (d2 == 0) | (d1 == d2) | (events == horizon) {
                            src.pos += used;
                            break 'outer;
                        }
                    }
                    src.pos += used;
                }
            }
            None => {
                while events < horizon {
                    events += 1;
                    let [a, b] = s.diff_step(src);
                    d1 += a;
                    d2 += b;
                    if d1 == 0 || d2 == 0 || d1 == d2 {
                        break;
                    }
                }
            }
        }
        met = [d1 == d2, d2 == 0, d1 == 0];
        pos = [0, d1, d2];
    }
    let merged = met.iter().filter(|&&m| m).count();
    if merged == 0 {
        t.all_apart += 1;
        for c in t.pair_apart.iter_mut() {
            *c += 1;
        }
        return;
    }
    if merged >= 2 {
        t.all_one += 1;
        return;
    }
    // exactly one pair merged; `lone` is the walker outside it
    let lone = met.iter().position(|&m| m).unwrap();
    let pair = (lone + 1) % 3;
    // two survivors: either moves with probability 1/2, and the difference
    // walk is symmetric, so each event is one step of the difference
    let hit = s.hit_time(pos[lone] - pos[pair], horizon - events, src).is_some();
    if hit {
        t.all_one += 1;
    } else {
        t.together[lone] += 1;
        // pairs containing `lone` never met
        t.pair_apart[pair] += 1;
        t.pair_apart[(lone + 2) % 3] += 1;
    }
}

/// `(p1, p2)`: no coalescence among `0, v1, v1+v2`, and only `v1, v1+v2` coalesced.
pub fn estimate_triple_bd(k: &Kernel, samples: u64, horizon: u64, seed: u64) -> Result<(Estimate, Estimate)> {
    let c = triple_counts(k, TripleStart::BirthDeath, samples, horizon, seed)?;
    Ok((c.p_all_apart(), c.p_pair_without(0)))
}

/// `(pbar1, pbar2)` for the starts `v1, v2, v2+v3`.
pub fn estimate_triple_db(k: &Kernel, samples: u64, horizon: u64, seed: u64) -> Result<(Estimate, Estimate)> {
    let c = triple_counts(k, TripleStart::DeathBirth, samples, horizon, seed)?;
    Ok((c.p_all_apart(), c.p_pair_without(0)))
}

/// Every probability entering the identity suite, each with its uncertainty.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityInputs {
    pub kappa: f64,
    /// `p(0|v1)`, `p(0|v1+v2)`, `p(v1|v2)`, `p(v1|v2+v3)`
    pub pair: [Estimate; 4],
    /// BD starts `0, v1, v1+v2`: all apart, then only the pair without walker k.
    pub bd_apart: Estimate,
    pub bd_pairs: [Estimate; 3],
    pub bd_pair_apart: [Estimate; 3],
    /// DB starts `v1, v2, v2+v3`.
    pub db_apart: Estimate,
    pub db_pairs: [Estimate; 3],
    pub db_pair_apart: [Estimate; 3],
    pub analytic: bool,
}

impl IdentityInputs {
    /// Partition probabilities implied by a set of constants.
    pub fn from_constants(c: &CoalescenceConstants) -> Self {
        let e = Estimate::exact;
        let k1 = 1.0 + 1.0 / c.kappa;
        let d02 = c.pbar2 - c.p01 / c.kappa;
        IdentityInputs {
            kappa: c.kappa,
            pair: [e(c.p01), e(c.p01), e(c.p01), e(k1 * c.p01)],
            bd_apart: e(c.p1),
            bd_pairs: [e(c.p2), e(c.p2), e(c.p2)],
            // walkers {1,2}: v2 apart; {0,2}: v1+v2 apart; {0,1}: v1 apart
            bd_pair_apart: [e(c.p01), e(c.p01), e(c.p01)],
            db_apart: e(c.pbar1),
            db_pairs: [e(c.pbar2), e(d02), e(c.pbar2)],
            db_pair_apart: [e(c.p01), e(k1 * c.p01), e(c.p01)],
            analytic: true,
        }
    }

    /// Fresh Monte Carlo estimates of every quantity.
    pub fn monte_carlo(k: &Kernel, samples: u64, horizon: u64, seed: u64) -> Result<Self> {
        let bd = triple_counts(k, TripleStart::BirthDeath, samples, horizon, seed)?;
        let db = triple_counts(k, TripleStart::DeathBirth, samples, horizon, seed)?;
        Self::from_runs(k, &bd, &db, samples, horizon, seed)
    }

    /// Reuses triple-walk tallies and adds the pair estimates.
    pub fn from_runs(
        k: &Kernel,
        bd: &TripleCounts,
        db: &TripleCounts,
        pair_samples: u64,
        horizon: u64,
        seed: u64,
    ) -> Result<Self> {
        let starts = [vec![1], vec![1, 1], vec![-1, 1], vec![-1, 1, 1]];
        let mut pair = [Estimate::exact(0.0); 4];
        for (slot, s) in pair.iter_mut().zip(starts) {
            *slot = estimate_pair_escape_from(k, &PairStart(s), pair_samples, horizon, seed)?;
        }
        Ok(IdentityInputs {
            kappa: kappa(k),
            pair,
            bd_apart: bd.p_all_apart(),
            bd_pairs: [0, 1, 2].map(|i| bd.p_pair_without(i)),
            bd_pair_apart: [0, 1, 2].map(|i| bd.p_pair_apart(i)),
            db_apart: db.p_all_apart(),
            db_pairs: [0, 1, 2].map(|i| db.p_pair_without(i)),
            db_pair_apart: [0, 1, 2].map(|i| db.p_pair_apart(i)),
            analytic: false,
        })
    }
}

/// One line of the identity report.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Linear combination `sum c_i x_i` with its combined half-width.
fn combo(terms: &[(f64, Estimate)]) -> (f64, f64) {
    let v = terms.iter().map(|(c, e)| c * e.value).sum();
    let h = terms.iter().map(|(c, e)| (c * e.halfwidth).powi(2)).sum::<f64>().sqrt();
    (v, h)
}

/// Evaluates the coalescence identities. Analytic inputs must hold to `1e-10`;
/// Monte Carlo residuals must lie within three combined half-widths.
pub fn check_identities(inp: &IdentityInputs) -> Vec<IdentityCheck> {
    let ik = 1.0 / inp.kappa;
    let [p0v1, p0v12, pv1v2, pv1v23] = inp.pair;
    let mut out = Vec::new();
    let mut push = |name: &str, terms: &[(f64, Estimate)], strict_positive: bool| {
        let (v, h) = combo(terms);
        let tol = if inp.analytic { 1e-10 } else { 3.0 * h };
        let pass = if strict_positive { v - tol > 0.0 } else { v.abs() <= tol };
        out.push(IdentityCheck { name: name.into(), residual: v, tolerance: tol, pass });
    };
    push("pair: p(0|v1) = p(0|v1+v2)", &[(1.0, p0v1), (-1.0, p0v12)], false);
    push("pair: p(0|v1) = p(v1|v2)", &[(1.0, p0v1), (-1.0, pv1v2)], false);
    push("pair: p(v1|v2+v3) = (1+1/k) p(0|v1)", &[(1.0, pv1v23), (-(1.0 + ik), p0v1)], false);
    for (label, apart, pairs, pa) in [
        ("BD", inp.bd_apart, inp.bd_pairs, inp.bd_pair_apart),
        ("DB", inp.db_apart, inp.db_pairs, inp.db_pair_apart),
    ] {
        for w in 0..3 {
            // pair excluding walker w is apart iff all apart or w is paired with one of them
            let name = format!("partition: {label} pair without walker {w}");
            let (a, b) = ((w + 1) % 3, (w + 2) % 3);
            push(&name, &[(1.0, pa[w]), (-1.0, apart), (-1.0, pairs[a]), (-1.0, pairs[b])], false);
        }
    }
    let bd = inp.bd_pairs;
    push("BD symmetry: p(0,v1|v1+v2) = p(0,v1+v2|v1)", &[(1.0, bd[2]), (-1.0, bd[1])], false);
    push("BD symmetry: p(0,v1+v2|v1) = p(v1,v1+v2|0)", &[(1.0, bd[1]), (-1.0, bd[0])], false);
    let db = inp.db_pairs;
    push("DB symmetry: p(v1,v2|v2+v3) = p(v2,v2+v3|v1)", &[(1.0, db[2]), (-1.0, db[0])], false);
    push(
        "DB symmetry: p(v2,v2+v3|v1) = p(v1,v2+v3|v2) + p01/k",
        &[(1.0, db[0]), (-1.0, db[1]), (-ik, p0v1)],
        false,
    );
    push("BD pair count: 2 p2 + p1 = p01", &[(2.0, bd[0]), (1.0, inp.bd_apart), (-1.0, p0v1)], false);
    push(
        "DB pair count: 2 pbar2 + pbar1 = p01 (1+1/k)",
        &[(2.0, db[0]), (1.0, inp.db_apart), (-(1.0 + ik), p0v1)],
        false,
    );
    push("positivity: pbar2 - p01/k > 0", &[(1.0, db[0]), (-ik, p0v1)], true);
    out
}

/// Monte Carlo constants for a kernel, with half-widths attached.
pub fn estimate_constants(
    k: &Kernel,
    p01: f64,
    samples: u64,
    horizon: u64,
    seed: u64,
) -> Result<CoalescenceConstants> {
    let bd = triple_counts(k, TripleStart::BirthDeath, samples, horizon, seed)?;
    let db = triple_counts(k, TripleStart::DeathBirth, samples, horizon, seed)?;
    let (p1, p2) = (bd.p_all_apart(), bd.p_pair_without(0));
    let (q1, q2) = (db.p_all_apart(), db.p_pair_without(0));
    Ok(CoalescenceConstants {
        kappa: kappa(k),
        p01,
        p1: p1.value,
        p2: p2.value,
        pbar1: q1.value,
        pbar2: q2.value,
        halfwidths: [0.0, p1.halfwidth, p2.halfwidth, q1.halfwidth, q2.halfwidth],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa(&Kernel::nearest_neighbor(3)), 6.0);
        assert_eq!(kappa(&Kernel::nearest_neighbor(1)), 2.0);
        let k = Kernel::new(
            2,
            vec![(vec![1, 0], 0.4), (vec![-1, 0], 0.4), (vec![0, 1], 0.1), (vec![0, -1], 0.1)],
        )
        .unwrap();
        assert!((kappa(&k) - 1.0 / 0.34).abs() < 1e-12);
    }

    #[test]
    fn kernel_invariants_enforced() {
        assert!(Kernel::new(1, vec![(vec![1], 0.7), (vec![-1], 0.3)]).is_err());
        assert!(Kernel::new(1, vec![(vec![0], 0.5), (vec![1], 0.25), (vec![-1], 0.25)]).is_err());
        assert!(Kernel::new(1, vec![(vec![2], 0.5), (vec![-2], 0.5)]).is_err());
        assert!(Kernel::new(2, vec![(vec![1, 1], 0.5), (vec![-1, -1], 0.5)]).is_err());
        assert!(Kernel::new(1, vec![(vec![2], 0.25), (vec![-2], 0.25), (vec![3], 0.25), (vec![-3], 0.25)]).is_ok());
    }

    #[test]
    fn recurrent_dimension_rejected() {
        assert!(chi_and_p01(&Kernel::nearest_neighbor(2), 64).is_err());
    }

    #[test]
    fn alias_table_reproduces_weights() {
        let p = [0.1, 0.4, 0.2, 0.3];
        let (prob, alias) = build_alias(&p);
        let mut got = [0.0; 4];
        for i in 0..4 {
            got[i] += prob[i] / 4.0;
            got[alias[i]] += (1.0 - prob[i]) / 4.0;
        }
        for i in 0..4 {
            assert!((got[i] - p[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn packing_is_linear() {
        let a = [3, -7, 12];
        let b = [-5, 2, -20];
        let s: Vec<i32> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        assert_eq!(pack(&a) + pack(&b), pack(&s));
        assert_ne!(pack(&[1, 0, 0]), pack(&[0, 1, 0]));
        assert_eq!(pack(&[-1, 1, 0]) + pack(&[1, -1, 0]), 0);
    }

    #[test]
    fn absorbing_start_never_escapes() {
        let k = Kernel::nearest_neighbor(3);
        let e = estimate_pair_escape_from(&k, &PairStart(vec![]), 1000, 10, 1).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn config_errors() {
        let k = Kernel::nearest_neighbor(3);
        assert!(estimate_pair_escape(&k, 50, 10, 1).is_err());
        assert!(estimate_pair_escape(&k, 1000, 0, 1).is_err());
    }

    #[test]
    fn published_constants_pass_identities() {
        let c = CoalescenceConstants::from_triples(6.0, 0.6404566, 0.325, 0.345).unwrap();
        let rep = check_identities(&IdentityInputs::from_constants(&c));
        assert!(rep.iter().all(|r| r.pass), "{rep:#?}");
    }

    #[test]
    fn inflated_p1_breaks_pair_count_identity() {
        let mut c = CoalescenceConstants::from_triples(6.0, 0.6404566, 0.325, 0.345).unwrap();
        c.p1 += 0.05;
        let rep = check_identities(&IdentityInputs::from_constants(&c));
        let bd = rep.iter().find(|r| r.name.starts_with("BD pair count")).unwrap();
        assert!(!bd.pass);
    }
}
