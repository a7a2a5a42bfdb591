//! Potentials on the sequence space.
//!
//! A [`Potential`] is evaluated on [`TruncatedPoint`]s. Built-in families are
//! constants, cylinder tables (first coordinate, two coordinates, or any
//! tabulated depth), the long-range family
//! `f(x) = -Σ_{n≥1} J₀ rⁿ g(x₁, xₙ)`, and linear combinations of these.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alphabet::Grid;
use crate::error::{check_finite, Error, Result};
use crate::seqspace::{self, GridFunction, GridShape, TruncatedPoint};

#[derive(Debug, Clone)]
enum Kind {
    Constant(f64),
    Cylinder(GridFunction),
    LongRange {
        j0: f64,
        r: f64,
        nodes: usize,
        table: Vec<f64>,
    },
    Combination {
        offset: f64,
        terms: Vec<(f64, Potential)>,
    },
}

/// A bounded potential together with its declared Hölder exponent and sup bound.
#[derive(Debug, Clone)]
pub struct Potential {
    kind: Kind,
    alpha: f64,
    sup_bound: f64,
    name: String,
}

impl Potential {
    pub fn constant(c: f64) -> Self {
        Self {
            kind: Kind::Constant(c),
            alpha: 1.0,
            sup_bound: c.abs(),
            name: "constant".into(),
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// A tabulated cylinder potential; its depth is the table's depth.
    pub fn cylinder(table: GridFunction) -> Self {
        let alpha = table.holder_alpha;
        Self {
            sup_bound: table.sup_norm(),
            kind: Kind::Cylinder(table),
            alpha,
            name: "cylinder".into(),
        }
    }

    /// `f(x) = c_{x₁}`.
    pub fn first_coordinate(table: Vec<f64>) -> Result<Self> {
        let shape = GridShape::new(table.len().max(1), 1);
        let mut f = Self::cylinder(GridFunction::new(shape, table)?);
        f.name = "first_coordinate".into();
        Ok(f)
    }

    /// `f(x) = A(x₁, x₂)`; rows index `x₁`.
    pub fn two_coordinate(table: Vec<Vec<f64>>) -> Result<Self> {
        let n = table.len();
        if n == 0 || table.iter().any(|row| row.len() != n) {
            return Err(Error::usage("two-coordinate table must be square and nonempty"));
        }
        let values = table.into_iter().flatten().collect();
        let mut f = Self::cylinder(GridFunction::new(GridShape::new(n, 2), values)?);
        f.name = "two_coordinate".into();
        Ok(f)
    }

    /// `f(x) = -Σ_{n≥1} J₀ rⁿ g(x₁, xₙ)` with `g` given as an `n × n` table.
    pub fn long_range(j0: f64, r: f64, table: Vec<Vec<f64>>) -> Result<Self> {
        let nodes = table.len();
        if nodes == 0 || table.iter().any(|row| row.len() != nodes) {
            return Err(Error::usage("coupling table must be square and nonempty"));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::usage("long-range decay r must lie in (0, 1)"));
        }
        if !j0.is_finite() {
            return Err(Error::usage("J0 must be finite"));
        }
        let table: Vec<f64> = table.into_iter().flatten().collect();
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("coupling table has non-finite entries"));
        }
        let gmax = table.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(Self {
            kind: Kind::LongRange {
                j0,
                r,
                nodes,
                table,
            },
            alpha: (-r.log2()).min(1.0),
            sup_bound: j0.abs() * r / (1.0 - r) * gmax,
            name: "long_range".into(),
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    /// Number of coordinates the potential reads; `None` for long-range terms.
    pub fn declared_depth(&self) -> Option<usize> {
        match &self.kind {
            Kind::Constant(_) => Some(0),
            Kind::Cylinder(t) => Some(t.depth()),
            Kind::LongRange { .. } => None,
            Kind::Combination { terms, .. } => terms
                .iter()
                .try_fold(0, |d, (_, f)| f.declared_depth().map(|e| d.max(e))),
        }
    }

    /// Node count the potential is tied to; `None` when it works on any alphabet.
    pub fn nodes(&self) -> Option<usize> {
        match &self.kind {
            Kind::Constant(_) => None,
            Kind::Cylinder(t) => Some(t.shape.nodes),
            Kind::LongRange { nodes, .. } => Some(*nodes),
            Kind::Combination { terms, .. } => terms.iter().find_map(|(_, f)| f.nodes()),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.declared_depth() == Some(0)
    }

    /// `β f`.
    pub fn scaled(&self, beta: f64) -> Self {
        let kind = match &self.kind {
            Kind::Constant(c) => Kind::Constant(beta * c),
            Kind::Cylinder(t) => {
                let mut t = t.clone();
                t.values.iter_mut().for_each(|v| *v *= beta);
                t.seminorm_hint = t.seminorm_hint.map(|s| s * beta.abs());
                Kind::Cylinder(t)
            }
            Kind::LongRange {
                j0,
                r,
                nodes,
                table,
            } => Kind::LongRange {
                j0: beta * j0,
                r: *r,
                nodes: *nodes,
                table: table.clone(),
            },
            Kind::Combination { offset, terms } => Kind::Combination {
                offset: beta * offset,
                terms: terms.iter().map(|(c, f)| (beta * c, f.clone())).collect(),
            },
        };
        Self {
            kind,
            alpha: self.alpha,
            sup_bound: beta.abs() * self.sup_bound,
            name: format!("{}*{}", beta, self.name),
        }
    }

    /// `f + c`.
    pub fn plus_constant(&self, c: f64) -> Self {
        let kind = match &self.kind {
            Kind::Constant(v) => Kind::Constant(v + c),
            Kind::Cylinder(t) => {
                let mut t = t.clone();
                t.values.iter_mut().for_each(|v| *v += c);
                Kind::Cylinder(t)
            }
            Kind::Combination { offset, terms } => Kind::Combination {
                offset: offset + c,
                terms: terms.clone(),
            },
            Kind::LongRange { .. } => Kind::Combination {
                offset: c,
                terms: vec![(1.0, self.clone())],
            },
        };
        Self {
            kind,
            alpha: self.alpha,
            sup_bound: self.sup_bound + c.abs(),
            name: format!("{}+{}", self.name, c),
        }
    }

    /// `a f + b g`.
    pub fn combine(a: f64, f: &Potential, b: f64, g: &Potential) -> Result<Self> {
        if let (Some(n), Some(m)) = (f.nodes(), g.nodes()) {
            if n != m {
                return Err(Error::usage("potentials live on different alphabets"));
            }
        }
        Ok(Self {
            kind: Kind::Combination {
                offset: 0.0,
                terms: vec![(a, f.clone()), (b, g.clone())],
            },
            alpha: f.alpha.min(g.alpha),
            sup_bound: a.abs() * f.sup_bound + b.abs() * g.sup_bound,
            name: format!("{a}*{}+{b}*{}", f.name, g.name),
        })
    }

    fn check_nodes(&self, x: &TruncatedPoint) -> Result<()> {
        if let Some(n) = self.nodes() {
            if x.anchor >= n || x.word.iter().any(|&a| a >= n) {
                return Err(Error::usage(format!(
                    "point {x:?} is outside the {n}-node alphabet of potential {}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    fn eval_unchecked(&self, x: &TruncatedPoint) -> f64 {
        match &self.kind {
            Kind::Constant(c) => *c,
            Kind::Cylinder(t) => t.at(x),
            Kind::LongRange {
                j0,
                r,
                nodes,
                table,
            } => {
                let first = x.coord(0);
                let row = &table[first * nodes..(first + 1) * nodes];
                let depth = x.depth().max(1);
                let mut total = 0.0;
                let mut weight = 1.0;
                for k in 0..depth {
                    weight *= r;
                    total += weight * row[x.coord(k)];
                }
                // constant tail: Σ_{n>depth} rⁿ g(x₁, anchor)
                total += weight * r / (1.0 - r) * row[x.anchor];
                -j0 * total
            }
            Kind::Combination { offset, terms } => {
                offset + terms.iter().map(|(c, f)| c * f.eval_unchecked(x)).sum::<f64>()
            }
        }
    }

    /// `f(x)`, reading the anchor tail beyond the stored word.
    pub fn evaluate(&self, x: &TruncatedPoint) -> Result<f64> {
        self.check_nodes(x)?;
        check_finite(self.eval_unchecked(x), || format!("potential {} at {x:?}", self.name))
    }

    /// `f_n(x) = Σ_{k<n} f(σᵏ x)`.
    pub fn birkhoff_sum(&self, x: &TruncatedPoint, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::usage("Birkhoff sums need n ≥ 1"));
        }
        self.check_nodes(x)?;
        let total: f64 = (0..n).map(|k| self.eval_unchecked(&x.shift_by(k))).sum();
        check_finite(total, || format!("Birkhoff sum of {} at {x:?}", self.name))
    }

    /// Values at every word of `shape`, each padded by the anchor tail.
    pub fn tabulate(&self, shape: GridShape, anchor: usize) -> Result<GridFunction> {
        if let Some(n) = self.nodes() {
            if n != shape.nodes {
                return Err(Error::usage(format!(
                    "potential {} has {n} nodes, grid has {}",
                    self.name, shape.nodes
                )));
            }
        }
        if anchor >= shape.nodes {
            return Err(Error::usage("anchor outside the alphabet"));
        }
        let values: Vec<f64> = match &self.kind {
            Kind::Constant(c) => vec![*c; shape.len()],
            Kind::Cylinder(t) if t.depth() <= shape.depth => {
                let stride = shape.power(shape.depth - t.depth());
                (0..shape.len()).map(|i| t.values[i / stride]).collect()
            }
            Kind::Cylinder(t) => {
                let extra = t.depth() - shape.depth;
                let suffix = (0..extra).fold(0, |acc, _| acc * shape.nodes + anchor);
                let scale = shape.power(extra);
                (0..shape.len()).map(|i| t.values[i * scale + suffix]).collect()
            }
            Kind::Combination { offset, terms } => {
                let mut acc = vec![*offset; shape.len()];
                for (c, f) in terms {
                    let part = f.tabulate(shape, anchor)?;
                    acc.iter_mut().zip(&part.values).for_each(|(a, v)| *a += c * v);
                }
                acc
            }
            Kind::LongRange { .. } => (0..shape.len())
                .into_par_iter()
                .map(|i| self.eval_unchecked(&TruncatedPoint::from_index(shape, i, anchor)))
                .collect(),
        };
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                location: format!("potential {} at word {i}", self.name),
                value: values[i],
            });
        }
        Ok(GridFunction::new(shape, values)?.with_alpha(self.alpha))
    }

    /// The cylinder potential `x ↦ f(x₁, .., x_M, anchor, anchor, ..)`.
    pub fn truncate_depth(&self, nodes: usize, depth: usize, anchor: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::usage("truncation depth must be at least 1"));
        }
        if self.is_constant() {
            return Ok(self.clone());
        }
        let table = self.tabulate(GridShape::new(nodes, depth), anchor)?;
        Ok(Self {
            sup_bound: self.sup_bound,
            alpha: self.alpha,
            name: self.name.clone(),
            kind: Kind::Cylinder(table),
        })
    }

    /// Largest `|f|` over `probes` random points of the given depth.
    pub fn probe_sup(&self, nodes: usize, depth: usize, probes: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best: f64 = 0.0;
        for _ in 0..probes {
            let word = (0..depth).map(|_| rng.random_range(0..nodes)).collect();
            let x = TruncatedPoint::new(word, rng.random_range(0..nodes));
            best = best.max(self.evaluate(&x)?.abs());
        }
        Ok(best)
    }

    /// Lower estimate of `D_α(f)` on the depth-`depth` grid.
    pub fn holder_seminorm_estimate(
        &self,
        grid: &Grid,
        depth: usize,
        anchor: usize,
        probe_budget: usize,
        seed: u64,
    ) -> Result<f64> {
        let table = self.tabulate(GridShape::new(grid.len(), depth), anchor)?;
        seqspace::holder_seminorm_estimate(grid, &table, self.alpha, probe_budget, seed)
    }

    /// Empirical distortion constant: the largest
    /// `|1 - e^{f_n(ay) - f_n(ax)}| / d_X(x, y)^α` over distinct words
    /// `x, y` of length `depth` and words `a` of length `1..=max_word`.
    pub fn distortion_constant(
        &self,
        grid: &Grid,
        depth: usize,
        anchor: usize,
        max_word: usize,
    ) -> Result<f64> {
        let shape = GridShape::new(grid.len(), depth);
        let n = grid.len();
        // sums[x][j] = f_k(a x) for every prefix a, all lengths flattened
        let prefixes: Vec<Vec<usize>> = (1..=max_word)
            .flat_map(|k| {
                let s = GridShape::new(n, k);
                (0..s.len()).map(move |i| s.decode(i))
            })
            .collect();
        let sums: Vec<Vec<f64>> = (0..shape.len())
            .into_par_iter()
            .map(|i| {
                let x = shape.decode(i);
                prefixes
                    .iter()
                    .map(|a| {
                        let mut word = a.clone();
                        word.extend_from_slice(&x);
                        let point = TruncatedPoint::new(word, anchor);
                        self.birkhoff_sum(&point, a.len())
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let best = (0..shape.len())
            .into_par_iter()
            .map(|i| {
                let mut best: f64 = 0.0;
                for j in (i + 1)..shape.len() {
                    let dx = seqspace::grid_dx(grid, shape, i, j);
                    if dx == 0.0 {
                        continue;
                    }
                    let scale = dx.powf(self.alpha);
                    for (sx, sy) in sums[i].iter().zip(&sums[j]) {
                        let a = (1.0 - (sy - sx).exp()).abs();
                        let b = (1.0 - (sx - sy).exp()).abs();
                        best = best.max(a.max(b) / scale);
                    }
                }
                best
            })
            .reduce(|| 0.0, f64::max);
        Ok(best)
    }
}

/// Potential families accepted in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Constant {
        c: f64,
    },
    /// `f(x) = table[x₁]`.
    FirstCoordinate {
        table: Vec<f64>,
    },
    /// `f(x) = Σ_k coeffs[k] s(x₁)^k` where `s` is the node scalar.
    FirstCoordinatePoly {
        coeffs: Vec<f64>,
    },
    /// `f(x) = table[x₁][x₂]`.
    TwoCoordinate {
        table: Vec<Vec<f64>>,
    },
    /// `f(x) = -Σ J₀ rⁿ g(x₁, xₙ)`; `g` defaults to `min(d_E, 1)`.
    LongRange {
        j0: f64,
        r: f64,
        #[serde(default)]
        table: Option<Vec<Vec<f64>>>,
    },
}

impl PotentialSpec {
    pub fn build(&self, grid: &Grid) -> Result<Potential> {
        let n = grid.len();
        let check_len = |len: usize| {
            if len != n {
                Err(Error::usage(format!("potential table has {len} rows, alphabet has {n} nodes")))
            } else {
                Ok(())
            }
        };
        match self {
            PotentialSpec::Constant { c } => {
                check_finite(*c, || "constant potential".into())?;
                Ok(Potential::constant(*c))
            }
            PotentialSpec::FirstCoordinate { table } => {
                check_len(table.len())?;
                Potential::first_coordinate(table.clone())
            }
            PotentialSpec::FirstCoordinatePoly { coeffs } => {
                let values = grid
                    .scalars()
                    .iter()
                    .map(|s| coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c))
                    .collect();
                Ok(Potential::first_coordinate(values)?.named("first_coordinate_poly"))
            }
            PotentialSpec::TwoCoordinate { table } => {
                check_len(table.len())?;
                Potential::two_coordinate(table.clone())
            }
            PotentialSpec::LongRange { j0, r, table } => {
                let table = match table {
                    Some(t) => {
                        check_len(t.len())?;
                        t.clone()
                    }
                    None => (0..n)
                        .map(|i| (0..n).map(|j| grid.clamped_distance(i, j)).collect())
                        .collect(),
                };
                Potential::long_range(*j0, *r, table)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ln3() -> f64 {
        3f64.ln()
    }

    fn point(word: &[usize]) -> TruncatedPoint {
        TruncatedPoint::new(word.to_vec(), 0)
    }

    #[test]
    fn evaluate_examples() {
        let c = Potential::constant(0.7);
        assert_eq!(c.evaluate(&point(&[1, 0, 1])).unwrap(), 0.7);
        let f = Potential::first_coordinate(vec![0.0, ln3()]).unwrap();
        assert!((f.evaluate(&point(&[1, 0])).unwrap() - 1.0986122886681098).abs() < 1e-15);
        let lr = Potential::long_range(1.0, 0.5, vec![vec![1.0; 2]; 2]).unwrap();
        assert!((lr.evaluate(&point(&[0, 1, 1])).unwrap() + 1.0).abs() < 1e-15);
        assert!(lr.declared_depth().is_none());
    }

    #[test]
    fn foreign_points_rejected() {
        let f = Potential::first_coordinate(vec![0.0, 1.0]).unwrap();
        assert!(matches!(f.evaluate(&point(&[2])), Err(Error::Usage(_))));
    }

    #[test]
    fn birkhoff_examples() {
        let c = Potential::constant(0.3);
        assert!((c.birkhoff_sum(&point(&[0, 1]), 5).unwrap() - 1.5).abs() < 1e-15);
        let f = Potential::first_coordinate(vec![0.0, ln3()]).unwrap();
        assert!((f.birkhoff_sum(&point(&[0, 1, 0]), 2).unwrap() - ln3()).abs() < 1e-15);
    }

    #[test]
    fn truncation_examples() {
        let f = Potential::two_coordinate(vec![vec![0.0, 2f64.ln()], vec![ln3(), 0.0]]).unwrap();
        let t = f.truncate_depth(2, 4, 0).unwrap();
        let shape = GridShape::new(2, 5);
        assert_eq!(f.tabulate(shape, 1).unwrap().values, t.tabulate(shape, 1).unwrap().values);

        let lr = Potential::long_range(1.0, 0.5, vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let shape = GridShape::new(2, 10);
        for m in 1..6 {
            let t = lr.truncate_depth(2, m, 0).unwrap();
            let exact = lr.tabulate(shape, 1).unwrap();
            let approx = t.tabulate(shape, 1).unwrap();
            let err = exact
                .values
                .iter()
                .zip(&approx.values)
                .fold(0.0f64, |e, (a, b)| e.max((a - b).abs()));
            assert!(err <= 0.5f64.powi(m as i32) + 1e-15, "M={m} err={err}");
        }

        let c = Potential::constant(-2.0);
        assert_eq!(c.truncate_depth(3, 4, 0).unwrap().evaluate(&point(&[2, 1])).unwrap(), -2.0);
    }

    #[test]
    fn truncation_is_idempotent() {
        let lr = Potential::long_range(0.8, 0.6, vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let once = lr.truncate_depth(2, 5, 0).unwrap();
        let twice = once.truncate_depth(2, 5, 0).unwrap();
        let shape = GridShape::new(2, 7);
        assert_eq!(once.tabulate(shape, 0).unwrap().values, twice.tabulate(shape, 0).unwrap().values);
    }

    #[test]
    fn sup_bounds_dominate_probes() {
        let grid = Grid::symbols(vec![0.2, 0.3, 0.5]).unwrap();
        let specs = [
            PotentialSpec::Constant { c: -1.5 },
            PotentialSpec::FirstCoordinate { table: vec![0.1, -2.0, 0.4] },
            PotentialSpec::FirstCoordinatePoly { coeffs: vec![0.5, -0.25, 0.1] },
            PotentialSpec::TwoCoordinate {
                table: vec![vec![0.0, 1.0, -1.0], vec![0.3, 0.2, 0.1], vec![-0.7, 0.0, 2.5]],
            },
            PotentialSpec::LongRange { j0: 1.3, r: 0.4, table: None },
        ];
        for spec in specs {
            let f = spec.build(&grid).unwrap();
            let probed = f.probe_sup(3, 12, 10_000, 5).unwrap();
            assert!(probed <= f.sup_bound() + 1e-12, "{spec:?}: {probed} > {}", f.sup_bound());
        }
    }

    #[test]
    fn spec_round_trip() {
        let spec = PotentialSpec::TwoCoordinate {
            table: vec![vec![0.0, 2f64.ln()], vec![ln3(), 0.0]],
        };
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"family\":\"two_coordinate\""));
        let back: PotentialSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn polynomial_family_uses_node_scalars() {
        let grid = crate::alphabet::AprioriMeasure::standard_normal(1, 5).unwrap().grid().unwrap();
        let f = PotentialSpec::FirstCoordinatePoly { coeffs: vec![0.0, 0.0, -1.0] }
            .build(&grid)
            .unwrap();
        let s = grid.scalars();
        for (i, &x) in s.iter().enumerate() {
            assert!((f.evaluate(&TruncatedPoint::constant(i, 1)).unwrap() + x * x).abs() < 1e-15);
        }
    }

    #[test]
    fn distortion_of_first_coordinate_is_zero() {
        let grid = Grid::symbols(vec![0.5, 0.5]).unwrap();
        let f = Potential::first_coordinate(vec![0.0, ln3()]).unwrap();
        assert_eq!(f.distortion_constant(&grid, 3, 0, 3).unwrap(), 0.0);
        let g = Potential::two_coordinate(vec![vec![0.0, 2f64.ln()], vec![ln3(), 0.0]]).unwrap();
        assert!(g.distortion_constant(&grid, 3, 0, 3).unwrap() > 0.0);
    }

    fn arb_word() -> impl Strategy<Value = Vec<usize>> {
        proptest::collection::vec(0usize..3, 0..12)
    }

    proptest! {
        #[test]
        fn cocycle_identity(word in arb_word(), anchor in 0usize..3, m in 1usize..6, n in 1usize..6) {
            let grid = Grid::symbols(vec![0.2, 0.3, 0.5]).unwrap();
            let f = PotentialSpec::LongRange { j0: 0.9, r: 0.5, table: None }.build(&grid).unwrap();
            let x = TruncatedPoint::new(word, anchor);
            let lhs = f.birkhoff_sum(&x, m + n).unwrap();
            let rhs = f.birkhoff_sum(&x, n).unwrap() + f.birkhoff_sum(&x.shift_by(n), m).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }

        #[test]
        fn scaling_and_offsets(beta in -3.0f64..3.0, c in -2.0f64..2.0, word in arb_word()) {
            let f = Potential::two_coordinate(vec![
                vec![0.1, -0.4, 0.2], vec![1.0, 0.0, -0.3], vec![0.5, 0.5, 0.0],
            ]).unwrap();
            let x = TruncatedPoint::new(word, 1);
            let v = f.evaluate(&x).unwrap();
            prop_assert!((f.scaled(beta).evaluate(&x).unwrap() - beta * v).abs() < 1e-12);
            prop_assert!((f.plus_constant(c).evaluate(&x).unwrap() - v - c).abs() < 1e-12);
            let g = Potential::combine(beta, &f, 1.0 - beta, &Potential::zero()).unwrap();
            prop_assert!((g.evaluate(&x).unwrap() - beta * v).abs() < 1e-12);
        }
    }
}
