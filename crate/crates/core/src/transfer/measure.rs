use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqspace::{fmt_f64, GridFunction, GridShape, TruncatedPoint};

/// Weighted atoms on the words of one grid, all sharing an anchor tail.
///
/// Atoms are kept sorted by word index with duplicates merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    shape: GridShape,
    anchor: usize,
    atoms: Vec<(usize, f64)>,
    total_mass: f64,
}

impl DiscreteMeasure {
    pub fn new(shape: GridShape, anchor: usize, mut atoms: Vec<(usize, f64)>) -> Result<Self> {
        if anchor >= shape.nodes {
            return Err(Error::usage("anchor outside the alphabet"));
        }
        for &(i, w) in &atoms {
            if i >= shape.len() {
                return Err(Error::usage(format!("atom word {i} outside a grid of {}", shape.len())));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::usage(format!("atom {i} has weight {w}")));
            }
        }
        atoms.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(atoms.len());
        for (i, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += w,
                _ => merged.push((i, w)),
            }
        }
        let total_mass = merged.iter().map(|a| a.1).sum();
        Ok(Self {
            shape,
            anchor,
            atoms: merged,
            total_mass,
        })
    }

    /// Atoms from a dense weight vector over every word; zeros are dropped.
    pub fn from_dense(shape: GridShape, anchor: usize, weights: &[f64]) -> Result<Self> {
        if weights.len() != shape.len() {
            return Err(Error::usage("dense weights do not match the grid"));
        }
        let atoms = weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(i, &w)| (i, w))
            .collect();
        Self::new(shape, anchor, atoms)
    }

    pub fn dirac(shape: GridShape, anchor: usize, word: usize) -> Result<Self> {
        Self::new(shape, anchor, vec![(word, 1.0)])
    }

    /// The product measure with one-site law `marginal`, restricted to words.
    pub fn product(shape: GridShape, anchor: usize, marginal: &[f64]) -> Result<Self> {
        if marginal.len() != shape.nodes {
            return Err(Error::usage("marginal length differs from the node count"));
        }
        let weights: Vec<f64> = (0..shape.len())
            .map(|i| shape.decode(i).iter().map(|&a| marginal[a]).product())
            .collect();
        Self::from_dense(shape, anchor, &weights)
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    pub fn atoms(&self) -> &[(usize, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn points(&self) -> Vec<(TruncatedPoint, f64)> {
        self.atoms
            .iter()
            .map(|&(i, w)| (TruncatedPoint::from_index(self.shape, i, self.anchor), w))
            .collect()
    }

    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.shape.len()];
        for &(i, w) in &self.atoms {
            out[i] = w;
        }
        out
    }

    pub fn is_probability(&self, tol: f64) -> bool {
        (self.total_mass - 1.0).abs() <= tol
    }

    pub fn normalized(&self) -> Result<Self> {
        if !(self.total_mass > 0.0) {
            return Err(Error::Degenerate("cannot normalize a zero measure".into()));
        }
        let atoms = self
            .atoms
            .iter()
            .map(|&(i, w)| (i, w / self.total_mass))
            .collect();
        Self::new(self.shape, self.anchor, atoms)
    }

    /// `∫ φ dμ`. Shallower functions are read on word prefixes; deeper ones
    /// on anchor-padded words.
    pub fn integrate(&self, phi: &GridFunction) -> Result<f64> {
        if phi.shape.nodes != self.shape.nodes {
            return Err(Error::usage("function and measure disagree on node count"));
        }
        let (fd, md) = (phi.depth(), self.shape.depth);
        let index: Box<dyn Fn(usize) -> usize> = if fd <= md {
            let stride = self.shape.power(md - fd);
            Box::new(move |i| i / stride)
        } else {
            let extra = fd - md;
            let suffix = (0..extra).fold(0, |acc, _| acc * self.shape.nodes + self.anchor);
            let scale = self.shape.power(extra);
            Box::new(move |i| i * scale + suffix)
        };
        Ok(self.atoms.iter().map(|&(i, w)| w * phi.values[index(i)]).sum())
    }

    /// Law of coordinate `k` (zero-based).
    pub fn marginal(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.shape.nodes];
        for &(i, w) in &self.atoms {
            let a = if k < self.shape.depth {
                self.shape.digit(i, k)
            } else {
                self.anchor
            };
            out[a] += w;
        }
        out
    }

    /// Mass of the cylinder `[prefix]`.
    pub fn cylinder(&self, prefix: &[usize]) -> f64 {
        self.atoms
            .iter()
            .filter(|&&(i, _)| {
                prefix.iter().enumerate().all(|(k, &a)| {
                    let digit = if k < self.shape.depth {
                        self.shape.digit(i, k)
                    } else {
                        self.anchor
                    };
                    digit == a
                })
            })
            .map(|a| a.1)
            .sum()
    }

    /// Push forward to the first `depth` coordinates.
    pub fn project(&self, depth: usize) -> Result<Self> {
        if depth > self.shape.depth {
            return Err(Error::usage("cannot project to a deeper grid"));
        }
        let shape = GridShape::new(self.shape.nodes, depth);
        let stride = self.shape.power(self.shape.depth - depth);
        Self::new(
            shape,
            self.anchor,
            self.atoms.iter().map(|&(i, w)| (i / stride, w)).collect(),
        )
    }

    /// Keep the `cap` heaviest atoms (ties go to the smaller word index),
    /// rescale them to the original mass, and return the discarded mass.
    pub fn prune(&mut self, cap: usize) -> f64 {
        if self.atoms.len() <= cap {
            return 0.0;
        }
        let mut order: Vec<usize> = (0..self.atoms.len()).collect();
        order.sort_by(|&a, &b| {
            self.atoms[b]
                .1
                .total_cmp(&self.atoms[a].1)
                .then(self.atoms[a].0.cmp(&self.atoms[b].0))
        });
        let mut kept: Vec<(usize, f64)> = order[..cap].iter().map(|&k| self.atoms[k]).collect();
        kept.sort_by_key(|a| a.0);
        let kept_mass: f64 = kept.iter().map(|a| a.1).sum();
        let pruned = self.total_mass - kept_mass;
        if kept_mass > 0.0 {
            let scale = self.total_mass / kept_mass;
            kept.iter_mut().for_each(|a| a.1 *= scale);
        }
        self.atoms = kept;
        pruned
    }

    /// `Σ |μ(x) - ν(x)| / 2` on a shared grid.
    pub fn tv_distance(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        let (mut i, mut j) = (0, 0);
        let mut total = 0.0;
        let (a, b) = (&self.atoms, &other.atoms);
        while i < a.len() || j < b.len() {
            match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) if x.0 == y.0 => {
                    total += (x.1 - y.1).abs();
                    i += 1;
                    j += 1;
                }
                (Some(x), Some(y)) if x.0 < y.0 => {
                    total += x.1;
                    i += 1;
                }
                (Some(_), Some(y)) => {
                    total += y.1;
                    j += 1;
                }
                (Some(x), None) => {
                    total += x.1;
                    i += 1;
                }
                (None, Some(y)) => {
                    total += y.1;
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        Ok(0.5 * total)
    }

    pub(crate) fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape || self.anchor != other.anchor {
            return Err(Error::usage(format!(
                "measures live on different grids ({:?}/{} vs {:?}/{})",
                self.shape, self.anchor, other.shape, other.anchor
            )));
        }
        Ok(())
    }

    /// `# depth=N,nodes=n,anchor=a` then `word_index,weight` rows.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# depth={},nodes={},anchor={}\nword_index,weight\n",
            self.shape.depth, self.shape.nodes, self.anchor
        );
        for &(i, w) in &self.atoms {
            out.push_str(&format!("{i},{}\n", fmt_f64(w)));
        }
        out
    }
}
