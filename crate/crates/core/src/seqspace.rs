//! Finite-resolution representation of the sequence space `X = E^ℕ`.
//!
//! A point is a word of grid-node indices followed by a constant anchor
//! tail. Functions of the first `N` coordinates are stored as flat arrays
//! indexed by words in mixed-radix row-major order: `x_1` is the most
//! significant digit, so the index of `(x_1, .., x_N)` is
//! `Σ x_k n^{N-k}`. That encoding is also the on-disk word index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alphabet::Grid;
use crate::error::{Error, Result};

/// Coordinates summed explicitly by `d_X` when two tails differ; the
/// remainder `2^{-TAIL_TERMS}` is below `1e-12`.
pub const TAIL_TERMS: usize = 40;

/// Number of nodes and word length of a cylinder grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    pub nodes: usize,
    pub depth: usize,
}

impl GridShape {
    pub fn new(nodes: usize, depth: usize) -> Self {
        assert!(nodes >= 1, "grid needs at least one node");
        Self { nodes, depth }
    }

    /// Number of words, `nodes^depth`.
    pub fn len(&self) -> usize {
        self.nodes.pow(self.depth as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `n^k`.
    pub fn power(&self, k: usize) -> usize {
        self.nodes.pow(k as u32)
    }

    pub fn encode(&self, word: &[usize]) -> usize {
        debug_assert_eq!(word.len(), self.depth);
        word.iter().fold(0, |acc, &a| acc * self.nodes + a)
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut word = vec![0; self.depth];
        for slot in word.iter_mut().rev() {
            *slot = index % self.nodes;
            index /= self.nodes;
        }
        word
    }

    /// Coordinate `k` (zero-based) of the word with this index.
    pub fn digit(&self, index: usize, k: usize) -> usize {
        (index / self.power(self.depth - 1 - k)) % self.nodes
    }

    /// Index of `(a, x_1, .., x_{N-1})`.
    pub fn prepend(&self, a: usize, index: usize) -> usize {
        if self.depth == 0 {
            return 0;
        }
        a * self.power(self.depth - 1) + index / self.nodes
    }

    /// Index of `(x_2, .., x_N, anchor)`: the shift re-padded by the anchor.
    pub fn shift(&self, index: usize, anchor: usize) -> usize {
        if self.depth == 0 {
            return 0;
        }
        (index % self.power(self.depth - 1)) * self.nodes + anchor
    }

    pub fn deeper(&self) -> Self {
        Self::new(self.nodes, self.depth + 1)
    }

    /// Largest depth whose grid has at most `cap` words (at least 1).
    pub fn max_depth(nodes: usize, cap: usize) -> usize {
        let mut depth = 1;
        while (nodes as f64).powi(depth as i32 + 1) <= cap as f64 {
            depth += 1;
        }
        depth
    }
}

/// Default grid depth: 8 for two nodes, shrunk so the grid has at most
/// `10^6` words.
pub fn default_depth(nodes: usize) -> usize {
    GridShape::max_depth(nodes, 1_000_000).min(8)
}

/// A word of node indices followed by the constant tail `anchor, anchor, ..`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TruncatedPoint {
    pub word: Vec<usize>,
    pub anchor: usize,
}

impl TruncatedPoint {
    pub fn new(word: Vec<usize>, anchor: usize) -> Self {
        Self { word, anchor }
    }

    /// The constant sequence `(a, a, a, ..)` stored at depth `depth`.
    pub fn constant(a: usize, depth: usize) -> Self {
        Self::new(vec![a; depth], a)
    }

    pub fn from_index(shape: GridShape, index: usize, anchor: usize) -> Self {
        Self::new(shape.decode(index), anchor)
    }

    pub fn depth(&self) -> usize {
        self.word.len()
    }

    /// Coordinate `x_{k+1}`, reading the anchor past the word.
    pub fn coord(&self, k: usize) -> usize {
        self.word.get(k).copied().unwrap_or(self.anchor)
    }

    /// `ax` at the same depth; the last coordinate falls into the tail.
    pub fn prepend(&self, a: usize) -> Self {
        let mut word = Vec::with_capacity(self.depth());
        if self.depth() > 0 {
            word.push(a);
            word.extend_from_slice(&self.word[..self.depth() - 1]);
        }
        Self::new(word, self.anchor)
    }

    /// `ax` one coordinate deeper; nothing is dropped.
    pub fn extend_front(&self, a: usize) -> Self {
        let mut word = Vec::with_capacity(self.depth() + 1);
        word.push(a);
        word.extend_from_slice(&self.word);
        Self::new(word, self.anchor)
    }

    /// `σx`, one coordinate shorter.
    pub fn shift(&self) -> Self {
        Self::new(self.word.iter().skip(1).copied().collect(), self.anchor)
    }

    /// `σ^k x`.
    pub fn shift_by(&self, k: usize) -> Self {
        Self::new(self.word.iter().skip(k).copied().collect(), self.anchor)
    }

    /// Index of the first `shape.depth` coordinates (anchor-padded).
    pub fn index(&self, shape: GridShape) -> usize {
        (0..shape.depth).fold(0, |acc, k| acc * shape.nodes + self.coord(k))
    }

    fn check(&self, nodes: usize) -> Result<()> {
        if self.anchor >= nodes || self.word.iter().any(|&a| a >= nodes) {
            return Err(Error::usage(format!(
                "point {self:?} does not belong to an alphabet with {nodes} nodes"
            )));
        }
        Ok(())
    }
}

/// `d_X(x, y) = Σ_n 2^{-n} min(d_E(x_n, y_n), 1)`.
///
/// Coordinates are compared up to the longer word; when the anchors differ
/// the series is continued to `TAIL_TERMS` coordinates.
pub fn metric_dx(grid: &Grid, x: &TruncatedPoint, y: &TruncatedPoint) -> Result<f64> {
    x.check(grid.len())?;
    y.check(grid.len())?;
    let mut terms = x.depth().max(y.depth());
    if x.anchor != y.anchor {
        terms = terms.max(TAIL_TERMS);
    }
    let mut total = 0.0;
    let mut weight = 1.0;
    for k in 0..terms {
        weight *= 0.5;
        total += weight * grid.clamped_distance(x.coord(k), y.coord(k));
    }
    Ok(total)
}

/// `d̄ = min(1, 4 C_f d_X^α)` from a precomputed `d_X`, zero on the diagonal.
pub fn dbar_from_dx(dx: f64, c_f: f64, alpha: f64) -> f64 {
    if dx == 0.0 {
        0.0
    } else {
        (4.0 * c_f * dx.powf(alpha)).min(1.0)
    }
}

/// The capped Hölder metric `d̄(x, y)`.
pub fn metric_dbar(
    grid: &Grid,
    x: &TruncatedPoint,
    y: &TruncatedPoint,
    c_f: f64,
    alpha: f64,
) -> Result<f64> {
    if !(c_f > 0.0) || !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::usage("d̄ needs C_f > 0 and alpha in (0, 1]"));
    }
    Ok(dbar_from_dx(metric_dx(grid, x, y)?, c_f, alpha))
}

/// Values of a cylinder function of the first `depth` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub shape: GridShape,
    pub values: Vec<f64>,
    pub holder_alpha: f64,
    #[serde(default)]
    pub seminorm_hint: Option<f64>,
}

impl GridFunction {
    pub fn new(shape: GridShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::usage(format!(
                "{} values for a grid of {} words",
                values.len(),
                shape.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                location: format!("grid word {i}"),
                value: values[i],
            });
        }
        Ok(Self {
            shape,
            values,
            holder_alpha: 1.0,
            seminorm_hint: None,
        })
    }

    pub fn constant(shape: GridShape, c: f64) -> Self {
        Self {
            shape,
            values: vec![c; shape.len()],
            holder_alpha: 1.0,
            seminorm_hint: Some(0.0),
        }
    }

    /// Tabulate `g` at every word of the grid.
    pub fn from_fn(shape: GridShape, g: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let values = (0..shape.len()).map(|i| g(&shape.decode(i))).collect();
        Self::new(shape, values)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.holder_alpha = alpha;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.shape.depth
    }

    /// Value at a point, reading only its first `depth` coordinates.
    pub fn at(&self, x: &TruncatedPoint) -> f64 {
        self.values[x.index(self.shape)]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, g: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.shape, self.values.iter().map(|&v| g(v)).collect())
            .map(|f| f.with_alpha(self.holder_alpha))
    }

    /// Pointwise combination of two functions on the same grid.
    pub fn zip_with(&self, other: &Self, g: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::usage("grid functions live on different grids"));
        }
        Self::new(
            self.shape,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| g(a, b))
                .collect(),
        )
    }

    /// The same function viewed on words one coordinate longer.
    pub fn lift(&self) -> Self {
        let shape = self.shape.deeper();
        let values = (0..shape.len()).map(|i| self.values[i / shape.nodes]).collect();
        Self {
            shape,
            values,
            holder_alpha: self.holder_alpha,
            seminorm_hint: self.seminorm_hint,
        }
    }

    /// Lift repeatedly until the grid has `depth` coordinates.
    pub fn lift_to(&self, depth: usize) -> Self {
        let mut f = self.clone();
        while f.depth() < depth {
            f = f.lift();
        }
        f
    }

    /// Restrict to `depth - 1` coordinates by fixing the last one to `anchor`.
    pub fn restrict(&self, anchor: usize) -> Result<Self> {
        if self.depth() == 0 {
            return Err(Error::usage("cannot restrict a depth-0 function"));
        }
        let shape = GridShape::new(self.shape.nodes, self.depth() - 1);
        let values = (0..shape.len())
            .map(|i| self.values[i * shape.nodes + anchor])
            .collect();
        Ok(Self {
            shape,
            values,
            holder_alpha: self.holder_alpha,
            seminorm_hint: None,
        })
    }

    /// Smallest depth `M` such that the values do not depend on coordinates
    /// past `M`, up to `tol` relative to the sup norm.
    pub fn effective_depth(&self, tol: f64) -> usize {
        let scale = self.sup_norm().max(f64::MIN_POSITIVE);
        let n = self.shape.nodes;
        for m in 0..self.depth() {
            let block = self.shape.power(self.depth() - m);
            let independent = self.values.chunks(block).all(|chunk| {
                let first = chunk[0];
                chunk.iter().all(|v| (v - first).abs() <= tol * scale)
            });
            if independent {
                return m;
            }
            let _ = n;
        }
        self.depth()
    }

    /// CSV with a commented header: `# depth=N,nodes=n,alpha=α`, then
    /// `word_index,value` rows with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# depth={},nodes={},alpha={}\nword_index,value\n",
            self.shape.depth,
            self.shape.nodes,
            fmt_f64(self.holder_alpha)
        );
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i},{}\n", fmt_f64(*v)));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .ok_or_else(|| Error::usage("missing grid-function header"))?;
        let mut depth = None;
        let mut nodes = None;
        let mut alpha = 1.0;
        for field in header.split(',') {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::usage(format!("bad header field {field}")))?;
            let bad = |_| Error::usage(format!("bad header value {value}"));
            match key {
                "depth" => depth = Some(value.parse::<usize>().map_err(bad)?),
                "nodes" => nodes = Some(value.parse::<usize>().map_err(bad)?),
                "alpha" => alpha = value.parse::<f64>().map_err(|_| Error::usage("bad alpha"))?,
                _ => {}
            }
        }
        let shape = GridShape::new(
            nodes.ok_or_else(|| Error::usage("header lacks nodes"))?,
            depth.ok_or_else(|| Error::usage("header lacks depth"))?,
        );
        if lines.next() != Some("word_index,value") {
            return Err(Error::usage("missing column header"));
        }
        let mut values = vec![f64::NAN; shape.len()];
        for line in lines.filter(|l| !l.is_empty()) {
            let (i, v) = line
                .split_once(',')
                .ok_or_else(|| Error::usage(format!("bad row {line}")))?;
            let i: usize = i.parse().map_err(|_| Error::usage(format!("bad index {i}")))?;
            let v: f64 = v.parse().map_err(|_| Error::usage(format!("bad value {v}")))?;
            *values
                .get_mut(i)
                .ok_or_else(|| Error::usage(format!("index {i} out of range")))? = v;
        }
        Ok(Self::new(shape, values)?.with_alpha(alpha))
    }
}

/// Fixed numeric formatting: 17 significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Per-coordinate weights `2^{-k}` times clamped distances, for fast `d_X`
/// between words of one grid sharing an anchor.
pub(crate) fn grid_dx(grid: &Grid, shape: GridShape, i: usize, j: usize) -> f64 {
    let mut total = 0.0;
    let mut weight = 1.0;
    let (mut a, mut b) = (i, j);
    let mut digits = Vec::with_capacity(shape.depth);
    for _ in 0..shape.depth {
        digits.push((a % shape.nodes, b % shape.nodes));
        a /= shape.nodes;
        b /= shape.nodes;
    }
    for (x, y) in digits.into_iter().rev() {
        weight *= 0.5;
        total += weight * grid.clamped_distance(x, y);
    }
    total
}

/// Lower bound on `D_α(f)` from grid pairs: exhaustive when the grid has at
/// most `probe_budget` unordered pairs, otherwise `probe_budget` seeded
/// random pairs. Random probing with a larger budget visits a superset of
/// the pairs of a smaller one, so the estimate never decreases in the budget.
pub fn holder_seminorm_estimate(
    grid: &Grid,
    f: &GridFunction,
    alpha: f64,
    probe_budget: usize,
    seed: u64,
) -> Result<f64> {
    if probe_budget == 0 {
        return Err(Error::usage("probe budget must be at least 1"));
    }
    if f.shape.nodes != grid.len() {
        return Err(Error::usage("grid function and alphabet disagree on node count"));
    }
    let len = f.len();
    let pairs = len * len.saturating_sub(1) / 2;
    let ratio = |i: usize, j: usize| {
        let dx = grid_dx(grid, f.shape, i, j);
        if dx == 0.0 {
            0.0
        } else {
            (f.values[i] - f.values[j]).abs() / dx.powf(alpha)
        }
    };
    let mut best: f64 = 0.0;
    if pairs <= probe_budget {
        for i in 0..len {
            for j in (i + 1)..len {
                best = best.max(ratio(i, j));
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..probe_budget {
            let i = rng.random_range(0..len);
            let j = rng.random_range(0..len);
            best = best.max(ratio(i, j));
        }
    }
    Ok(best)
}
