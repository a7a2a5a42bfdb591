use rayon::prelude::*;

use super::measure::DiscreteMeasure;
use crate::alphabet::Grid;
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::seqspace::{GridFunction, GridShape};

/// Largest log-scale at which `e^shift` is still comfortably finite.
const MAX_LOG_SCALE: f64 = 700.0;

/// Grids below this size are processed serially.
const PAR_MIN: usize = 4096;

/// The Ruelle operator restricted to depth-`N` cylinder functions.
///
/// `f` is tabulated on words of length `N + 1` (anchor tail beyond), which
/// makes the restriction exact whenever `f` reads at most `N + 1`
/// coordinates. The kernel is stored as `w_a e^{f(ax) - s}` with the
/// log-shift `s = max f` kept apart, so arbitrarily large potentials never
/// overflow inside the iteration.
#[derive(Debug, Clone)]
pub struct Operator {
    grid: Grid,
    shape: GridShape,
    anchor: usize,
    table: GridFunction,
    kernel: Vec<f64>,
    log_shift: f64,
}

/// Result of one dual step.
#[derive(Debug, Clone)]
pub struct DualStep {
    pub measure: DiscreteMeasure,
    pub pruned_mass: f64,
}

impl Operator {
    pub fn new(f: &Potential, grid: &Grid, depth: usize, anchor: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::usage("operator depth must be at least 1"));
        }
        let shape = GridShape::new(grid.len(), depth);
        let table = f.tabulate(shape.deeper(), anchor)?;
        let log_shift = table.max();
        let stride = shape.len();
        let kernel = table
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| grid.weight(i / stride) * (v - log_shift).exp())
            .collect();
        Ok(Self {
            grid: grid.clone(),
            shape,
            anchor,
            table,
            kernel,
            log_shift,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    /// `f` on words of length `N + 1`.
    pub fn potential_table(&self) -> &GridFunction {
        &self.table
    }

    /// `s` in `ℒ_f = e^s ℒ̃`.
    pub fn log_shift(&self) -> f64 {
        self.log_shift
    }

    /// Index of the constant word `(a₀, .., a₀)`.
    pub fn anchor_word(&self) -> usize {
        (0..self.shape.depth).fold(0, |acc, _| acc * self.shape.nodes + self.anchor)
    }

    fn check(&self, phi: &GridFunction) -> Result<()> {
        if phi.shape != self.shape {
            return Err(Error::usage(format!(
                "function on {:?} given to an operator on {:?}",
                phi.shape, self.shape
            )));
        }
        Ok(())
    }

    fn scale(&self) -> Result<f64> {
        if self.log_shift > MAX_LOG_SCALE {
            return Err(Error::Overflow {
                max_value: self.log_shift,
            });
        }
        Ok(self.log_shift.exp())
    }

    /// `e^{-s} ℒ_f φ` on raw values.
    pub(crate) fn apply_shifted(&self, phi: &[f64]) -> Vec<f64> {
        let n = self.shape.nodes;
        let stride = self.shape.len();
        let value = |x: usize| {
            (0..n)
                .map(|a| self.kernel[a * stride + x] * phi[self.shape.prepend(a, x)])
                .sum::<f64>()
        };
        if stride >= PAR_MIN {
            (0..stride).into_par_iter().map(value).collect()
        } else {
            (0..stride).map(value).collect()
        }
    }

    /// `e^{-s} ℒ*_f μ` on dense weights.
    pub(crate) fn dual_shifted(&self, mu: &[f64]) -> Vec<f64> {
        let n = self.shape.nodes;
        let stride = self.shape.len();
        let head = self.shape.power(self.shape.depth - 1);
        // y = prepend(a, x) exactly when a = y₁ and x = (y₂..y_N, b)
        let value = |y: usize| {
            let a = y / head;
            let base = (y % head) * n;
            (0..n)
                .map(|b| self.kernel[a * stride + base + b] * mu[base + b])
                .sum::<f64>()
        };
        if stride >= PAR_MIN {
            (0..stride).into_par_iter().map(value).collect()
        } else {
            (0..stride).map(value).collect()
        }
    }

    /// `ℒ_f φ(x) = Σ_a w_a e^{f(ax)} φ(ax)`.
    pub fn apply(&self, phi: &GridFunction) -> Result<GridFunction> {
        self.check(phi)?;
        let scale = self.scale()?;
        let values = self.apply_shifted(&phi.values);
        GridFunction::new(self.shape, values.into_iter().map(|v| v * scale).collect())
            .map(|g| g.with_alpha(phi.holder_alpha))
    }

    /// `ℒⁿ_f φ`.
    pub fn apply_n(&self, phi: &GridFunction, n: usize) -> Result<GridFunction> {
        self.check(phi)?;
        let mut out = phi.clone();
        for _ in 0..n {
            out = self.apply(&out)?;
        }
        Ok(out)
    }

    fn apply_n_shifted(&self, phi: &[f64], n: usize) -> Vec<f64> {
        let mut out = phi.to_vec();
        for _ in 0..n {
            out = self.apply_shifted(&out);
        }
        out
    }

    /// `P^m_n φ = ℒ^m(φ ℒⁿ1) / ℒ^{m+n}1`. The shift cancels, so this never
    /// overflows.
    pub fn pmn_apply(&self, phi: &GridFunction, m: usize, n: usize) -> Result<GridFunction> {
        self.check(phi)?;
        if m == 0 {
            return Err(Error::usage("P^m_n needs m ≥ 1"));
        }
        let ones = vec![1.0; self.shape.len()];
        let ln1 = self.apply_n_shifted(&ones, n);
        let weighted: Vec<f64> = phi.values.iter().zip(&ln1).map(|(p, l)| p * l).collect();
        let numerator = self.apply_n_shifted(&weighted, m);
        let denominator = self.apply_n_shifted(&ln1, m);
        let values = numerator
            .iter()
            .zip(&denominator)
            .map(|(a, b)| {
                assert!(*b > 0.0, "ℒ^(m+n)1 vanished on the grid");
                a / b
            })
            .collect();
        GridFunction::new(self.shape, values)
    }

    /// `ℒ*_f μ`: each atom `δ_x` becomes `Σ_a w_a e^{f(ax)} δ_{ax}`; atoms are
    /// merged by word, then pruned to the `cap` heaviest.
    pub fn dual_apply(&self, mu: &DiscreteMeasure, cap: usize) -> Result<DualStep> {
        self.check_measure(mu)?;
        if cap < self.shape.nodes {
            return Err(Error::usage("atom cap must be at least the node count"));
        }
        let scale = self.scale()?;
        let out: Vec<f64> = self
            .dual_shifted(&mu.dense())
            .into_iter()
            .map(|w| w * scale)
            .collect();
        let mut measure = DiscreteMeasure::from_dense(self.shape, self.anchor, &out)?;
        let pruned_mass = measure.prune(cap);
        Ok(DualStep {
            measure,
            pruned_mass,
        })
    }

    pub(crate) fn check_measure(&self, mu: &DiscreteMeasure) -> Result<()> {
        if mu.shape() != self.shape || mu.anchor() != self.anchor {
            return Err(Error::usage(format!(
                "measure on {:?}/{} given to an operator on {:?}/{}",
                mu.shape(),
                mu.anchor(),
                self.shape,
                self.anchor
            )));
        }
        Ok(())
    }

    /// `e^{-s} ℒ*_f μ` kept at depth `N + 1`, so the new first coordinate
    /// is added without dropping the last one. Integrates depth-`(N+1)`
    /// functions exactly: `⟨lift μ, ψ⟩ = e^{-s} ⟨μ, ℒ_f ψ⟩` for such `ψ`.
    pub(crate) fn lift_shifted(&self, mu: &DiscreteMeasure, factor: f64) -> Result<DiscreteMeasure> {
        self.check_measure(mu)?;
        let stride = self.shape.len();
        let atoms = mu
            .atoms()
            .iter()
            .flat_map(|&(x, w)| {
                (0..self.shape.nodes).map(move |a| (a * stride + x, factor * w * self.kernel[a * stride + x]))
            })
            .filter(|a| a.1 > 0.0)
            .collect();
        DiscreteMeasure::new(self.shape.deeper(), self.anchor, atoms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::AprioriMeasure;
    use crate::seqspace::TruncatedPoint;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn two_coordinate() -> Potential {
        Potential::two_coordinate(vec![vec![0.0, 2f64.ln()], vec![3f64.ln(), 0.0]]).unwrap()
    }

    fn binary() -> Grid {
        Grid::symbols(vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn apply_examples() {
        let g = binary();
        let shape = GridShape::new(2, 3);
        let one = GridFunction::constant(shape, 1.0);
        let zero = Operator::new(&Potential::zero(), &g, 3, 0).unwrap();
        assert!(zero.apply(&one).unwrap().values.iter().all(|&v| v == 1.0));

        let f = Potential::first_coordinate(vec![0.0, 3f64.ln()]).unwrap();
        let op = Operator::new(&f, &g, 3, 0).unwrap();
        for v in op.apply(&one).unwrap().values {
            assert_relative_eq!(v, 2.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn gaussian_example() {
        // ∫ e^{-a²} dN(0,1) = 3^{-1/2}; the q-point rule errs by about 4e-7 at
        // q = 21 and 4e-13 at q = 41
        for (order, tol) in [(21, 1e-6), (41, 1e-12)] {
            let grid = AprioriMeasure::standard_normal(1, order).unwrap().grid().unwrap();
            let f = crate::potential::PotentialSpec::FirstCoordinatePoly { coeffs: vec![0.0, 0.0, -1.0] }
                .build(&grid)
                .unwrap();
            let op = Operator::new(&f, &grid, 1, order / 2).unwrap();
            let out = op.apply(&GridFunction::constant(op.shape(), 1.0)).unwrap();
            for v in out.values {
                assert!((v - 3f64.sqrt().recip()).abs() < tol, "q={order}: {v}");
            }
        }
    }

    #[test]
    fn apply_n_matches_matrix_power() {
        let g = binary();
        let op = Operator::new(&two_coordinate(), &g, 4, 0).unwrap();
        let m = [[0.5, 1.5], [1.0, 0.5]];
        let mut v = [1.0, 1.0];
        let one = GridFunction::constant(op.shape(), 1.0);
        for n in 1..=6 {
            v = [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]];
            let out = op.apply_n(&one, n).unwrap();
            for (i, val) in out.values.iter().enumerate() {
                let x1 = op.shape().digit(i, 0);
                assert_relative_eq!(*val, v[x1], max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn apply_n_matches_direct_sum() {
        let grid = Grid::symbols(vec![0.2, 0.3, 0.5]).unwrap();
        let f = crate::potential::PotentialSpec::TwoCoordinate {
            table: vec![vec![0.1, -0.3, 0.7], vec![0.0, 0.4, -1.0], vec![0.2, 0.2, 0.5]],
        }
        .build(&grid)
        .unwrap();
        let depth = 3;
        let op = Operator::new(&f, &grid, depth, 1).unwrap();
        let phi = GridFunction::from_fn(op.shape(), |w| (w[0] as f64 - 0.5 * w[2] as f64).sin()).unwrap();
        let n = 3;
        let iterated = op.apply_n(&phi, n).unwrap();
        let words = GridShape::new(3, n);
        for x in 0..op.shape().len() {
            let xw = op.shape().decode(x);
            let mut direct = 0.0;
            for a in 0..words.len() {
                let aw = words.decode(a);
                let mut full = aw.clone();
                full.extend_from_slice(&xw);
                let point = TruncatedPoint::new(full.clone(), 1);
                let weight: f64 = aw.iter().map(|&s| grid.weight(s)).product();
                let fn_sum = f.birkhoff_sum(&point, n).unwrap();
                direct += weight * fn_sum.exp() * phi.values[op.shape().encode(&full[..depth])];
            }
            assert_relative_eq!(iterated.values[x], direct, max_relative = 1e-10);
        }
    }

    #[test]
    fn pmn_examples() {
        let g = binary();
        let op = Operator::new(&two_coordinate(), &g, 4, 0).unwrap();
        let one = GridFunction::constant(op.shape(), 1.0);
        for (m, n) in [(1, 0), (2, 3), (3, 1)] {
            for v in op.pmn_apply(&one, m, n).unwrap().values {
                assert!((v - 1.0).abs() <= 1e-12);
            }
        }
        let zero = Operator::new(&Potential::zero(), &g, 4, 0).unwrap();
        let phi = GridFunction::from_fn(op.shape(), |w| w[1] as f64 + 0.5 * w[3] as f64).unwrap();
        assert_eq!(zero.pmn_apply(&phi, 2, 3).unwrap().values, zero.apply_n(&phi, 2).unwrap().values);
    }

    #[test]
    fn pmn_composition_law() {
        let g = binary();
        let op = Operator::new(&two_coordinate(), &g, 5, 0).unwrap();
        let phi = GridFunction::from_fn(op.shape(), |w| (1 + w[0] + 2 * w[2] + w[4]) as f64).unwrap();
        for m in 1..=3 {
            for k in 1..=3 {
                for l in 0..=3 {
                    let lhs = op.pmn_apply(&op.pmn_apply(&phi, k, l).unwrap(), m, k + l).unwrap();
                    let rhs = op.pmn_apply(&phi, k + m, l).unwrap();
                    for (a, b) in lhs.values.iter().zip(&rhs.values) {
                        assert!((a - b).abs() <= 1e-12, "m={m} k={k} l={l}: {a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn dual_examples() {
        let g = binary();
        let zero = Operator::new(&Potential::zero(), &g, 3, 0).unwrap();
        let x = 0b011;
        let delta = DiscreteMeasure::dirac(zero.shape(), 0, x).unwrap();
        let step = zero.dual_apply(&delta, 64).unwrap();
        assert_eq!(step.measure.atoms(), &[(0b001, 0.5), (0b101, 0.5)]);

        let op = Operator::new(&two_coordinate(), &g, 3, 0).unwrap();
        let mu = DiscreteMeasure::new(op.shape(), 0, vec![(1, 0.3), (4, 0.2), (6, 0.5)]).unwrap();
        let out = op.dual_apply(&mu, 64).unwrap();
        let l1 = op.apply(&GridFunction::constant(op.shape(), 1.0)).unwrap();
        assert!((out.measure.total_mass() - mu.integrate(&l1).unwrap()).abs() < 1e-12);
        assert_eq!(out.pruned_mass, 0.0);
    }

    #[test]
    fn overflow_is_reported() {
        let g = binary();
        let op = Operator::new(&Potential::first_coordinate(vec![0.0, 800.0]).unwrap(), &g, 2, 0).unwrap();
        let one = GridFunction::constant(op.shape(), 1.0);
        assert!(matches!(op.apply(&one), Err(Error::Overflow { .. })));
        // the shifted form stays finite
        assert!(op.apply_shifted(&one.values).iter().all(|v| v.is_finite()));
    }

    proptest! {
        #[test]
        fn duality_identity(
            phi in proptest::collection::vec(-1.0f64..1.0, 16),
            mu in proptest::collection::vec(0.0f64..1.0, 16),
        ) {
            let g = binary();
            let op = Operator::new(&two_coordinate(), &g, 4, 0).unwrap();
            let phi = GridFunction::new(op.shape(), phi).unwrap();
            let mu = DiscreteMeasure::from_dense(op.shape(), 0, &mu).unwrap();
            let lhs = op.dual_apply(&mu, 1 << 10).unwrap().measure.integrate(&phi).unwrap();
            let rhs = mu.integrate(&op.apply(&phi).unwrap()).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10);
        }

        #[test]
        fn positivity_and_scaling(
            phi in proptest::collection::vec(0.0f64..1.0, 8),
            bump in proptest::collection::vec(0.0f64..1.0, 8),
            c in -3.0f64..3.0,
        ) {
            let g = binary();
            let f = two_coordinate();
            let op = Operator::new(&f, &g, 3, 0).unwrap();
            let shifted = Operator::new(&f.plus_constant(c), &g, 3, 0).unwrap();
            let phi = GridFunction::new(op.shape(), phi).unwrap();
            let psi = GridFunction::new(op.shape(), phi.values.iter().zip(&bump).map(|(a, b)| a + b).collect()).unwrap();
            let lp = op.apply(&phi).unwrap();
            let lq = op.apply(&psi).unwrap();
            for (a, b) in lp.values.iter().zip(&lq.values) {
                prop_assert!(*a >= 0.0 && a <= b);
            }
            let ls = shifted.apply(&phi).unwrap();
            for (a, b) in lp.values.iter().zip(&ls.values) {
                prop_assert!((c.exp() * a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }

        #[test]
        fn lift_integrates_deep_functions(psi in proptest::collection::vec(-1.0f64..1.0, 16)) {
            let g = binary();
            let op = Operator::new(&two_coordinate(), &g, 3, 0).unwrap();
            let mu = DiscreteMeasure::new(op.shape(), 0, vec![(0, 0.4), (5, 0.6)]).unwrap();
            let psi = GridFunction::new(op.shape().deeper(), psi).unwrap();
            let lifted = op.lift_shifted(&mu, 1.0).unwrap();
            // ℒψ for a depth-(N+1) ψ, evaluated by hand
            let stride = op.shape().len();
            let direct: f64 = mu.atoms().iter().map(|&(x, w)| {
                w * (0..2).map(|a| op.kernel[a * stride + x] * psi.values[a * stride + x]).sum::<f64>()
            }).sum();
            prop_assert!((lifted.integrate(&psi).unwrap() - direct).abs() < 1e-14);
        }
    }
}
