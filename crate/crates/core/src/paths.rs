//! Gaussian polygonal paths, Hausdorff distances between them, the
//! Hausdorff-interaction potential, and a Monte Carlo transfer operator on
//! sequences of paths.
//!
//! A path has vertices `q_1, .., q_L` in `R^d` and is the piecewise linear
//! curve `γ(t) = (1 - (t - n)) q_n + (t - n) q_{n+1}` for `t ∈ [n, n + 1]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::alphabet::euclidean;
use crate::error::{Error, Result};

/// Samples per segment used when a Hausdorff distance is requested without
/// an explicit resolution.
pub const DEFAULT_RESOLUTION: usize = 64;

/// Largest dimension handled by the exact segment algorithm.
const EXACT_MAX_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct PolygonalPath {
    vertices: Vec<Vec<f64>>,
}

impl PolygonalPath {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::usage("a path needs at least two vertices"));
        }
        let dim = vertices[0].len();
        if dim == 0 || vertices.iter().any(|v| v.len() != dim) {
            return Err(Error::usage("path vertices must share a positive dimension"));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::usage("path coordinates must be finite"));
        }
        Ok(Self { vertices })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    /// Zero-based vertex `q_{i+1}`.
    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.vertices[i]
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    /// `γ(t)` for `t ∈ [1, L]`; clamped outside.
    pub fn at(&self, t: f64) -> Vec<f64> {
        let last = (self.len() - 1) as f64;
        let s = (t - 1.0).clamp(0.0, last);
        let n = (s.floor() as usize).min(self.len() - 2);
        let frac = s - n as f64;
        self.vertices[n]
            .iter()
            .zip(&self.vertices[n + 1])
            .map(|(a, b)| (1.0 - frac) * a + frac * b)
            .collect()
    }

    /// Every vertex moved by `shift`.
    pub fn translated(&self, shift: &[f64]) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|v| v.iter().zip(shift).map(|(a, b)| a + b).collect())
                .collect(),
        }
    }

    fn segments(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.vertices.windows(2).map(|w| (w[0].as_slice(), w[1].as_slice()))
    }
}

/// A path whose `L` vertices are iid standard Gaussian in `R^d`.
pub fn sample_path<R: Rng + ?Sized>(dim: usize, vertices: usize, rng: &mut R) -> PolygonalPath {
    assert!(dim >= 1 && vertices >= 2, "sample_path needs d >= 1 and L >= 2");
    PolygonalPath {
        vertices: (0..vertices)
            .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
            .collect(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Euclidean distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let v = sub(b, a);
    let w = sub(p, a);
    let vv = dot(&v, &v);
    let s = if vv > 0.0 { (dot(&w, &v) / vv).clamp(0.0, 1.0) } else { 0.0 };
    p.iter()
        .zip(a)
        .zip(&v)
        .map(|((pi, ai), vi)| {
            let d = pi - ai - s * vi;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn distance_to_path(p: &[f64], path: &PolygonalPath) -> f64 {
    path.segments()
        .map(|(a, b)| point_segment_distance(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

/// Squared distance `a t² + b t + c` on `[lo, hi]`.
#[derive(Debug, Clone, Copy)]
struct Piece {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
    c: f64,
}

/// Pieces of `t ↦ |P(t) - seg|²` for `P(t) = p0 + t u`, `t ∈ [0, 1]`.
fn squared_distance_pieces(p0: &[f64], u: &[f64], b0: &[f64], b1: &[f64]) -> Vec<Piece> {
    let point_piece = |q: &[f64], lo: f64, hi: f64| {
        let w = sub(p0, q);
        Piece {
            lo,
            hi,
            a: dot(u, u),
            b: 2.0 * dot(&w, u),
            c: dot(&w, &w),
        }
    };
    let v = sub(b1, b0);
    let vv = dot(&v, &v);
    if vv == 0.0 {
        return vec![point_piece(b0, 0.0, 1.0)];
    }
    let w0 = sub(p0, b0);
    // s(t) = alpha + beta t, projection parameter before clamping
    let alpha = dot(&w0, &v) / vv;
    let beta = dot(u, &v) / vv;
    let interior = |lo: f64, hi: f64| {
        let a0 = dot(&w0, &v);
        let a1 = dot(u, &v);
        Piece {
            lo,
            hi,
            a: dot(u, u) - a1 * a1 / vv,
            b: 2.0 * (dot(&w0, u) - a0 * a1 / vv),
            c: dot(&w0, &w0) - a0 * a0 / vv,
        }
    };
    let region = |s: f64| {
        if s <= 0.0 {
            0
        } else if s >= 1.0 {
            2
        } else {
            1
        }
    };
    let mut cuts = vec![0.0, 1.0];
    if beta != 0.0 {
        for t in [-alpha / beta, (1.0 - alpha) / beta] {
            if t > 0.0 && t < 1.0 {
                cuts.push(t);
            }
        }
    }
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();
    cuts.windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            match region(alpha + beta * mid) {
                0 => point_piece(b0, w[0], w[1]),
                2 => point_piece(b1, w[0], w[1]),
                _ => interior(w[0], w[1]),
            }
        })
        .collect()
}

fn piece_at(pieces: &[Piece], t: f64) -> Piece {
    *pieces
        .iter()
        .find(|p| t >= p.lo && t <= p.hi)
        .unwrap_or(pieces.last().expect("nonempty"))
}

fn quadratic_roots(a: f64, b: f64, c: f64, out: &mut Vec<f64>) {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return;
    }
    if a.abs() <= 1e-14 * scale {
        if b != 0.0 {
            out.push(-c / b);
        }
        return;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return;
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    if q != 0.0 {
        out.push(q / a);
        out.push(c / q);
    } else {
        out.push(0.0);
    }
}

/// Directed Hausdorff distance from the image of `a` to the image of `b`,
/// maximizing the lower envelope of segment distances exactly.
fn directed_exact(a: &PolygonalPath, b: &PolygonalPath) -> f64 {
    let b_segments: Vec<_> = b.segments().collect();
    let mut best: f64 = 0.0;
    for (p0, p1) in a.segments() {
        let u = sub(p1, p0);
        let pieces: Vec<Vec<Piece>> = b_segments
            .iter()
            .map(|(b0, b1)| squared_distance_pieces(p0, &u, b0, b1))
            .collect();
        let mut candidates = vec![0.0, 1.0];
        for i in 0..pieces.len() {
            for j in (i + 1)..pieces.len() {
                let mut cuts: Vec<f64> = pieces[i]
                    .iter()
                    .chain(&pieces[j])
                    .flat_map(|p| [p.lo, p.hi])
                    .collect();
                cuts.sort_by(|x, y| x.total_cmp(y));
                cuts.dedup();
                for w in cuts.windows(2) {
                    let mid = 0.5 * (w[0] + w[1]);
                    let (pi, pj) = (piece_at(&pieces[i], mid), piece_at(&pieces[j], mid));
                    let mut roots = Vec::new();
                    quadratic_roots(pi.a - pj.a, pi.b - pj.b, pi.c - pj.c, &mut roots);
                    candidates.extend(roots.into_iter().filter(|t| *t >= w[0] && *t <= w[1]));
                }
            }
        }
        for t in candidates {
            let point: Vec<f64> = p0.iter().zip(&u).map(|(x, d)| x + t * d).collect();
            best = best.max(distance_to_path(&point, b));
        }
    }
    best
}

/// Directed distance from `resolution + 1` samples per segment of `a` to `b`.
/// Underestimates by at most (longest segment of `a`) / `resolution`.
fn directed_sampled(a: &PolygonalPath, b: &PolygonalPath, resolution: usize) -> f64 {
    let mut best: f64 = 0.0;
    for (p0, p1) in a.segments() {
        for k in 0..=resolution {
            let t = k as f64 / resolution as f64;
            let point: Vec<f64> = p0.iter().zip(p1).map(|(x, y)| x + t * (y - x)).collect();
            best = best.max(distance_to_path(&point, b));
        }
    }
    best
}

/// Hausdorff distance between the images of two paths with the same vertex
/// count. Exact in dimension ≤ 3, dense sampling at `resolution` otherwise.
pub fn hausdorff_distance(g1: &PolygonalPath, g2: &PolygonalPath, resolution: usize) -> Result<f64> {
    if g1.len() != g2.len() || g1.dim() != g2.dim() {
        return Err(Error::usage(
            "Hausdorff distance needs paths with equal vertex count and dimension",
        ));
    }
    if resolution < 2 {
        return Err(Error::usage("resolution must be at least 2 samples per segment"));
    }
    let d = if g1.dim() <= EXACT_MAX_DIM {
        directed_exact(g1, g2).max(directed_exact(g2, g1))
    } else {
        directed_sampled(g1, g2, resolution).max(directed_sampled(g2, g1, resolution))
    };
    Ok(d)
}

/// `f(γ₁, γ₂, ..) = -Σ_{n=1}^{K} J₀ rⁿ · d_H^α(γ₁, γₙ) / (1 + d_H^α(γ₁, γₙ))`.
///
/// Coordinates beyond the supplied configuration repeat its last path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPotential {
    pub j0: f64,
    pub r: f64,
    pub alpha: f64,
    pub terms: usize,
    pub resolution: usize,
}

/// Tail bound required of the truncation order.
pub const PATH_TAIL_BOUND: f64 = 1e-9;

impl PathPotential {
    /// Smallest `K` with `J₀ r^K / (1 - r) < 1e-9`.
    pub fn new(j0: f64, r: f64, alpha: f64) -> Result<Self> {
        Self::validate_params(j0, r, alpha)?;
        let mut terms = 1;
        while j0 * r.powi(terms as i32) / (1.0 - r) >= PATH_TAIL_BOUND {
            terms += 1;
        }
        Ok(Self {
            j0,
            r,
            alpha,
            terms,
            resolution: DEFAULT_RESOLUTION,
        })
    }

    pub fn with_terms(j0: f64, r: f64, alpha: f64, terms: usize) -> Result<Self> {
        Self::validate_params(j0, r, alpha)?;
        let tail = j0 * r.powi(terms as i32) / (1.0 - r);
        if tail >= PATH_TAIL_BOUND {
            return Err(Error::usage(format!(
                "K = {terms} leaves tail {tail:.3e}, need < {PATH_TAIL_BOUND:e}"
            )));
        }
        Ok(Self {
            j0,
            r,
            alpha,
            terms,
            resolution: DEFAULT_RESOLUTION,
        })
    }

    fn validate_params(j0: f64, r: f64, alpha: f64) -> Result<()> {
        if !(j0 >= 0.0 && j0.is_finite()) {
            return Err(Error::usage("J0 must be finite and nonnegative"));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::usage("r must lie in (0, 1)"));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::usage("alpha must lie in (0, 1]"));
        }
        Ok(())
    }

    /// `[-J₀ r / (1 - r), 0]`.
    pub fn bounds(&self) -> (f64, f64) {
        (-self.j0 * self.r / (1.0 - self.r), 0.0)
    }

    /// Saturating interaction `x^α / (1 + x^α)`.
    pub fn coupling(&self, distance: f64) -> f64 {
        let x = distance.powf(self.alpha);
        x / (1.0 + x)
    }

    pub fn evaluate(&self, config: &[PolygonalPath]) -> Result<f64> {
        let first = config
            .first()
            .ok_or_else(|| Error::usage("empty path configuration"))?;
        let last = config.last().expect("nonempty");
        let mut total = 0.0;
        let mut weight = 1.0;
        for n in 1..=self.terms {
            weight *= self.r;
            let other = config.get(n - 1).unwrap_or(last);
            if n == 1 {
                continue;
            }
            let d = hausdorff_distance(first, other, self.resolution)?;
            total += self.j0 * weight * self.coupling(d);
        }
        Ok(-total)
    }

    /// Coupling table `g(a, b)` over a finite set of paths, for use as the
    /// pair table of a long-range potential on that finite alphabet.
    pub fn coupling_table(&self, paths: &[PolygonalPath]) -> Result<Vec<Vec<f64>>> {
        let n = paths.len();
        let mut table = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let g = self.coupling(hausdorff_distance(&paths[i], &paths[j], self.resolution)?);
                table[i][j] = g;
                table[j][i] = g;
            }
        }
        Ok(table)
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

const MC_CHUNK: usize = 1024;

/// `ℒ_f φ(x) ≈ (1/K) Σ_k e^{f(γ_k x)} φ(γ_k x)` with `γ_k` iid Gaussian paths.
///
/// Draws are split into chunks of 1024; chunk `c` uses a ChaCha8 stream `c`
/// of the master seed, so the first `K` draws do not depend on the total.
pub fn mc_apply<F, P>(
    f: F,
    phi: P,
    x: &[PolygonalPath],
    vertices: usize,
    dim: usize,
    samples: usize,
    seed: u64,
) -> Result<McEstimate>
where
    F: Fn(&[PolygonalPath]) -> Result<f64> + Sync,
    P: Fn(&[PolygonalPath]) -> f64 + Sync,
{
    if samples < 100 {
        return Err(Error::usage("mc_apply needs at least 100 samples"));
    }
    let chunks = samples.div_ceil(MC_CHUNK);
    let partial: Vec<Result<(f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut config = Vec::with_capacity(x.len() + 1);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                config.clear();
                config.push(sample_path(dim, vertices, &mut rng));
                config.extend_from_slice(x);
                let v = f(&config)?.exp() * phi(&config);
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        location: "Monte Carlo summand".into(),
                        value: v,
                    });
                }
                s1 += v;
                s2 += v * v;
            }
            Ok((s1, s2))
        })
        .collect();
    let (mut s1, mut s2) = (0.0, 0.0);
    for p in partial {
        let (a, b) = p?;
        s1 += a;
        s2 += b;
    }
    let k = samples as f64;
    let mean = s1 / k;
    let var = ((s2 - k * mean * mean) / (k - 1.0)).max(0.0);
    Ok(McEstimate {
        value: mean,
        stderr: (var / k).sqrt(),
        samples,
    })
}

/// Euclidean distance between two vertices; exported for path reports.
pub fn vertex_distance(a: &[f64], b: &[f64]) -> f64 {
    euclidean(a, b)
}
