//! Alphabets `E` with their metrics and a priori probability measures `p`.
//!
//! Continuous alphabets are discretized by a quadrature rule; the resulting
//! node set is the [`Grid`] on which everything downstream works. Path
//! spaces have no quadrature and are integrated by seeded Monte Carlo.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::paths::{hausdorff_distance, sample_path, PolygonalPath, DEFAULT_RESOLUTION};
use crate::quadrature;

/// A point of an alphabet.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    /// Node `index` of a finite alphabet, carrying its numeric label.
    Symbol { index: usize, label: f64 },
    /// A vector in `R^d`.
    Real(Vec<f64>),
    /// An angle in `[0, 2π)`.
    Angle(f64),
    /// A polygonal path.
    Path(PolygonalPath),
}

impl Point {
    /// Scalar summary: the label, the first coordinate, or the angle.
    pub fn scalar(&self) -> f64 {
        match self {
            Point::Symbol { label, .. } => *label,
            Point::Real(v) => v[0],
            Point::Angle(theta) => *theta,
            Point::Path(path) => path.vertex(0)[0],
        }
    }
}

/// The four built-in alphabet kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Alphabet {
    Finite {
        labels: Vec<f64>,
        /// Pairwise distances; the discrete metric when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        distances: Option<Vec<Vec<f64>>>,
    },
    RealLine {
        dim: usize,
    },
    Circle,
    PathSpace {
        /// Number of vertices `L` of each path.
        vertices: usize,
        dim: usize,
    },
}

impl Alphabet {
    /// The finite alphabet `{0, 1, .., n-1}` with the discrete metric.
    pub fn symbols(n: usize) -> Self {
        Alphabet::Finite {
            labels: (0..n).map(|i| i as f64).collect(),
            distances: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Alphabet::Finite { labels, distances } => {
                if labels.is_empty() {
                    return Err(Error::usage("finite alphabet needs at least one node"));
                }
                if let Some(d) = distances {
                    let n = labels.len();
                    if d.len() != n || d.iter().any(|row| row.len() != n) {
                        return Err(Error::usage(format!(
                            "distance matrix must be {n}x{n} to match the labels"
                        )));
                    }
                    for i in 0..n {
                        if d[i][i] != 0.0 {
                            return Err(Error::usage(format!("d_E({i},{i}) must be 0")));
                        }
                        for j in 0..n {
                            let v = d[i][j];
                            if !v.is_finite() || v < 0.0 {
                                return Err(Error::usage(format!(
                                    "d_E({i},{j}) = {v} must be finite and nonnegative"
                                )));
                            }
                            if (v - d[j][i]).abs() > 1e-12 * v.max(1.0) {
                                return Err(Error::usage(format!("d_E is not symmetric at ({i},{j})")));
                            }
                            for k in 0..n {
                                if d[i][k] > d[i][j] + d[j][k] + 1e-12 {
                                    return Err(Error::usage(format!(
                                        "triangle inequality fails on ({i},{j},{k})"
                                    )));
                                }
                            }
                        }
                    }
                }
                Ok(())
            }
            Alphabet::RealLine { dim } if *dim == 0 => {
                Err(Error::usage("real-line alphabet needs dimension >= 1"))
            }
            Alphabet::PathSpace { vertices, dim } if *vertices < 2 || *dim == 0 => Err(Error::usage(
                "path-space alphabet needs at least 2 vertices and dimension >= 1",
            )),
            _ => Ok(()),
        }
    }

    /// The metric `d_E`.
    pub fn distance(&self, a: &Point, b: &Point) -> Result<f64> {
        match (self, a, b) {
            (Alphabet::Finite { distances, .. }, Point::Symbol { index: i, .. }, Point::Symbol { index: j, .. }) => {
                Ok(match distances {
                    Some(d) => d[*i][*j],
                    None => f64::from(u8::from(i != j)),
                })
            }
            (Alphabet::RealLine { .. }, Point::Real(x), Point::Real(y)) => Ok(euclidean(x, y)),
            (Alphabet::Circle, Point::Angle(x), Point::Angle(y)) => {
                let d = (x - y).rem_euclid(std::f64::consts::TAU);
                Ok(d.min(std::f64::consts::TAU - d))
            }
            (Alphabet::PathSpace { .. }, Point::Path(x), Point::Path(y)) => {
                hausdorff_distance(x, y, DEFAULT_RESOLUTION)
            }
            _ => Err(Error::usage("points do not belong to this alphabet")),
        }
    }
}

pub(crate) fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Integration backend of an a priori measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum Backend {
    /// Explicit node weights of a finite alphabet.
    Exact { weights: Vec<f64> },
    /// Tensor Gauss–Hermite rule against the standard normal, `order` nodes per dimension.
    GaussHermite { order: usize },
    /// Periodic trapezoid rule with uniform weights on the circle.
    Trapezoid { nodes: usize },
    /// Seeded Monte Carlo average over `samples` draws.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Default Gauss–Hermite order per dimension.
pub const DEFAULT_HERMITE_ORDER: usize = 21;

/// An alphabet together with the integration backend for `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriMeasure {
    pub alphabet: Alphabet,
    pub backend: Backend,
}

impl AprioriMeasure {
    pub fn new(alphabet: Alphabet, backend: Backend) -> Result<Self> {
        alphabet.validate()?;
        match (&alphabet, &backend) {
            (Alphabet::Finite { labels, .. }, Backend::Exact { weights }) => {
                if weights.len() != labels.len() {
                    return Err(Error::usage(format!(
                        "{} weights for {} nodes",
                        weights.len(),
                        labels.len()
                    )));
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return Err(Error::usage("weights must be finite and nonnegative"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::usage(format!("weights sum to {total}, expected 1")));
                }
            }
            (Alphabet::RealLine { dim }, Backend::GaussHermite { order }) => {
                if *order == 0 {
                    return Err(Error::usage("Gauss-Hermite order must be >= 1"));
                }
                let size = (*order as f64).powi(*dim as i32);
                if size > 1e6 {
                    return Err(Error::usage(format!(
                        "tensor rule with {order}^{dim} nodes is too large"
                    )));
                }
            }
            (Alphabet::Circle, Backend::Trapezoid { nodes }) if *nodes >= 1 => {}
            (_, Backend::MonteCarlo { samples, .. }) if *samples == 0 => {
                return Err(Error::usage("Monte Carlo backend needs at least one sample"));
            }
            (Alphabet::PathSpace { .. }, Backend::MonteCarlo { .. })
            | (Alphabet::RealLine { .. }, Backend::MonteCarlo { .. })
            | (Alphabet::Circle, Backend::MonteCarlo { .. }) => {}
            (a, b) => {
                return Err(Error::usage(format!(
                    "backend {b:?} is not available for alphabet {a:?}"
                )))
            }
        }
        Ok(Self { alphabet, backend })
    }

    /// Uniform measure on `{0, .., n-1}` with the discrete metric.
    pub fn uniform(n: usize) -> Self {
        Self::new(
            Alphabet::symbols(n),
            Backend::Exact {
                weights: vec![1.0 / n as f64; n],
            },
        )
        .expect("uniform measure on a nonempty alphabet")
    }

    /// Finite alphabet `{0, .., n-1}` with the given weights.
    pub fn weighted(weights: Vec<f64>) -> Result<Self> {
        Self::new(Alphabet::symbols(weights.len()), Backend::Exact { weights })
    }

    /// Standard normal on `R^dim` discretized by a tensor Gauss–Hermite rule.
    pub fn standard_normal(dim: usize, order: usize) -> Result<Self> {
        Self::new(Alphabet::RealLine { dim }, Backend::GaussHermite { order })
    }

    /// Uniform measure on the circle with `nodes` equally spaced nodes.
    pub fn circle(nodes: usize) -> Result<Self> {
        Self::new(Alphabet::Circle, Backend::Trapezoid { nodes })
    }

    /// Law of Gaussian polygonal paths, integrated by Monte Carlo.
    pub fn gaussian_paths(vertices: usize, dim: usize, samples: usize, seed: u64) -> Result<Self> {
        Self::new(
            Alphabet::PathSpace { vertices, dim },
            Backend::MonteCarlo { samples, seed },
        )
    }

    /// `∫ g dp`: a weighted node sum, or the Monte Carlo mean.
    pub fn integrate<G>(&self, g: G) -> Result<f64>
    where
        G: Fn(&Point) -> f64,
    {
        match &self.backend {
            Backend::MonteCarlo { samples, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut total = 0.0;
                for k in 0..*samples {
                    let point = self.sample(&mut rng);
                    total += check_finite(g(&point), || format!("Monte Carlo sample {k}"))?;
                }
                Ok(total / *samples as f64)
            }
            _ => {
                let grid = self.grid()?;
                let mut total = 0.0;
                for (i, point) in grid.points.iter().enumerate() {
                    let value = check_finite(g(point), || format!("node {i} ({point:?})"))?;
                    total += grid.weights[i] * value;
                }
                Ok(total)
            }
        }
    }

    /// One draw from `p`. Quadrature-backed continuous alphabets draw from the
    /// underlying continuous law, not from the nodes.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match (&self.alphabet, &self.backend) {
            (Alphabet::Finite { labels, .. }, Backend::Exact { weights }) => {
                let index = WeightedIndex::new(weights)
                    .expect("validated weights")
                    .sample(rng);
                Point::Symbol {
                    index,
                    label: labels[index],
                }
            }
            (Alphabet::RealLine { dim }, _) => {
                Point::Real((0..*dim).map(|_| rng.sample(StandardNormal)).collect())
            }
            (Alphabet::Circle, _) => Point::Angle(rng.random::<f64>() * std::f64::consts::TAU),
            (Alphabet::PathSpace { vertices, dim }, _) => Point::Path(sample_path(*dim, *vertices, rng)),
            _ => unreachable!("validated in AprioriMeasure::new"),
        }
    }

    /// Node set, weights and pairwise distances of the discretized alphabet.
    pub fn grid(&self) -> Result<Grid> {
        let (points, weights) = match (&self.alphabet, &self.backend) {
            (Alphabet::Finite { labels, .. }, Backend::Exact { weights }) => (
                labels
                    .iter()
                    .enumerate()
                    .map(|(index, &label)| Point::Symbol { index, label })
                    .collect(),
                weights.clone(),
            ),
            (Alphabet::RealLine { dim }, Backend::GaussHermite { order }) => {
                let rule = quadrature::gauss_hermite(*order);
                tensor_rule(&rule, *dim)
            }
            (Alphabet::Circle, Backend::Trapezoid { nodes }) => {
                let rule = quadrature::periodic_trapezoid(*nodes);
                (rule.nodes.into_iter().map(Point::Angle).collect(), rule.weights)
            }
            _ => {
                return Err(Error::Unsupported(
                    "Monte Carlo backends have no node grid".into(),
                ))
            }
        };
        Grid::new(&self.alphabet, points, weights)
    }
}

fn tensor_rule(rule: &quadrature::Rule, dim: usize) -> (Vec<Point>, Vec<f64>) {
    let q = rule.nodes.len();
    let total = q.pow(dim as u32);
    let mut points = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for mut index in 0..total {
        let mut coords = vec![0.0; dim];
        let mut w = 1.0;
        for slot in (0..dim).rev() {
            let k = index % q;
            index /= q;
            coords[slot] = rule.nodes[k];
            w *= rule.weights[k];
        }
        points.push(Point::Real(coords));
        weights.push(w);
    }
    (points, weights)
}

/// The discretized alphabet: nodes, weights and the distance table.
#[derive(Debug, Clone)]
pub struct Grid {
    points: Vec<Point>,
    weights: Vec<f64>,
    distances: Vec<f64>,
    clamped: Vec<f64>,
}

impl Grid {
    fn new(alphabet: &Alphabet, points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        let n = points.len();
        let mut distances = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = alphabet.distance(&points[i], &points[j])?;
                distances[i * n + j] = d;
                distances[j * n + i] = d;
            }
        }
        let clamped = distances.iter().map(|d| d.min(1.0)).collect();
        Ok(Self {
            points,
            weights,
            distances,
            clamped,
        })
    }

    /// Grid with the discrete metric and the given weights; handy in tests.
    pub fn symbols(weights: Vec<f64>) -> Result<Self> {
        AprioriMeasure::weighted(weights)?.grid()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances[i * self.len() + j]
    }

    /// `min(d_E(i, j), 1)`, the per-coordinate term of `d_X`.
    pub fn clamped_distance(&self, i: usize, j: usize) -> f64 {
        self.clamped[i * self.len() + j]
    }

    /// Node scalars (labels, first coordinates or angles).
    pub fn scalars(&self) -> Vec<f64> {
        self.points.iter().map(Point::scalar).collect()
    }
}
