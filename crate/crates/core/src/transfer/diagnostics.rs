use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::eigen::EigenTriple;
use super::operator::Operator;
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::seqspace::{holder_seminorm_estimate, GridFunction, GridShape};

/// Entries at or below this are treated as exact zeros in geometric fits.
pub const FIT_FLOOR: f64 = 1e-14;

/// `count` deterministic cylinder test functions on `shape`: indicators of
/// one- and two-symbol cylinders first, then seeded tables with values in
/// `[-1, 1]` that read progressively more coordinates.
pub fn test_functions(shape: GridShape, count: usize) -> Vec<GridFunction> {
    let n = shape.nodes;
    let mut out = Vec::with_capacity(count);
    for a in 0..n {
        if out.len() == count / 4 {
            break;
        }
        out.push(GridFunction::from_fn(shape, |w| f64::from(w[0] == a)).expect("finite"));
    }
    if shape.depth >= 2 {
        for ab in 0..n * n {
            if out.len() == count / 2 {
                break;
            }
            let (a, b) = (ab / n, ab % n);
            out.push(GridFunction::from_fn(shape, |w| f64::from(w[0] == a && w[1] == b)).expect("finite"));
        }
    }
    let mut k = 0u64;
    while out.len() < count {
        let depth = 1 + (k as usize % shape.depth);
        let small = GridShape::new(n, depth);
        let mut rng = ChaCha8Rng::seed_from_u64(0x7e57 + k);
        let table: Vec<f64> = (0..small.len()).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let stride = shape.power(shape.depth - depth);
        out.push(GridFunction::new(shape, (0..shape.len()).map(|i| table[i / stride]).collect()).expect("finite"));
        k += 1;
    }
    out
}

/// Least-squares fit of `log y = log C + n log s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometricFit {
    pub s_hat: f64,
    pub c_hat: f64,
    pub r2: f64,
    pub points: usize,
    /// Fewer than two entries above [`FIT_FLOOR`].
    pub degenerate: bool,
}

impl GeometricFit {
    fn degenerate(points: usize) -> Self {
        Self {
            s_hat: 0.0,
            c_hat: 0.0,
            r2: 0.0,
            points,
            degenerate: true,
        }
    }
}

/// Fit `y ≈ C sⁿ` over the pairs with `y > FIT_FLOOR`.
pub fn fit_geometric(points: &[(f64, f64)]) -> GeometricFit {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.1 > FIT_FLOOR && p.1.is_finite())
        .map(|&(n, y)| (n, y.ln()))
        .collect();
    let k = usable.len();
    if k < 2 {
        return GeometricFit::degenerate(k);
    }
    let kf = k as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / kf;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / kf;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = usable.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return GeometricFit::degenerate(k);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = usable
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    GeometricFit {
        s_hat: slope.exp(),
        c_hat: intercept.exp(),
        r2,
        points: k,
        degenerate: false,
    }
}

/// Errors `eₙ = ‖ℒⁿ1 / (λⁿ h) - 1‖∞` and the geometric fit over `n_min..=n_max`.
#[derive(Debug, Clone, Serialize)]
pub struct GapEstimate {
    pub errors: Vec<f64>,
    /// `s_hat`, `r2`, and `c_hat` as the `C` in `2 C sⁿ`.
    pub fit: GeometricFit,
}

pub fn spectral_gap_estimate(triple: &EigenTriple, n_min: usize, n_max: usize) -> Result<GapEstimate> {
    if n_min == 0 || n_max < n_min {
        return Err(Error::usage("need 1 ≤ n_min ≤ n_max"));
    }
    let op = &triple.operator;
    let lambda = triple.lambda_shifted();
    let mut phi = vec![1.0; op.shape().len()];
    let mut errors = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        phi = op.apply_shifted(&phi).into_iter().map(|v| v / lambda).collect();
        let e = phi
            .iter()
            .zip(&triple.h.values)
            .fold(0.0f64, |m, (p, h)| m.max((p / h - 1.0).abs()));
        errors.push(e);
    }
    let points: Vec<(f64, f64)> = (n_min..=n_max).map(|n| (n as f64, errors[n - 1])).collect();
    let mut fit = fit_geometric(&points);
    fit.c_hat *= 0.5;
    Ok(GapEstimate { errors, fit })
}

/// `‖Qⁿφ - Πφ‖∞ + D̂_α(Qⁿφ - Πφ)` for `n = 1..=n_max`, where
/// `Qφ = ℒ(hφ)/(λh)` and `Πφ = ν(hφ)`.
#[derive(Debug, Clone, Serialize)]
pub struct QDecay {
    pub entries: Vec<f64>,
    pub projection: f64,
    /// `max(|ΠQφ - Πφ|, ‖QΠφ - Πφ‖∞)`.
    pub commutation_residual: f64,
}

impl EigenTriple {
    /// `Qφ` on raw values.
    fn q_apply(&self, phi: &[f64]) -> Vec<f64> {
        let lambda = self.lambda_shifted();
        let weighted: Vec<f64> = phi.iter().zip(&self.h.values).map(|(p, h)| p * h).collect();
        self.operator
            .apply_shifted(&weighted)
            .iter()
            .zip(&self.h.values)
            .map(|(v, h)| v / (lambda * h))
            .collect()
    }

    /// `Πφ = ∫ φ h dν`.
    pub fn projection(&self, phi: &GridFunction) -> Result<f64> {
        let weighted = phi.zip_with(&self.h, |a, b| a * b)?;
        self.nu.integrate(&weighted)
    }
}

pub fn qnorm_decay(
    triple: &EigenTriple,
    phi: &GridFunction,
    n_max: usize,
    alpha: f64,
    probe_budget: usize,
) -> Result<QDecay> {
    let shape = triple.operator.shape();
    if phi.shape != shape {
        return Err(Error::usage("test function does not live on the eigen grid"));
    }
    let grid = triple.operator.grid();
    let projection = triple.projection(phi)?;

    let q_phi = GridFunction::new(shape, triple.q_apply(&phi.values))?;
    let pi_q = triple.projection(&q_phi)?;
    let q_pi = triple.q_apply(&vec![projection; shape.len()]);
    let commutation_residual = q_pi
        .iter()
        .fold((pi_q - projection).abs(), |m, v| m.max((v - projection).abs()));

    let mut current = phi.values.clone();
    let mut entries = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        current = triple.q_apply(&current);
        let diff = GridFunction::new(shape, current.iter().map(|v| v - projection).collect())?;
        let semi = holder_seminorm_estimate(grid, &diff, alpha, probe_budget, 0)?;
        entries.push(diff.sup_norm() + semi);
    }
    Ok(QDecay {
        entries,
        projection,
        commutation_residual,
    })
}

/// `f̄ = f + log h - log h∘σ - log λ` together with its audit.
#[derive(Debug, Clone)]
pub struct NormalizedPotential {
    pub fbar: Potential,
    /// Number of coordinates `f̄` reads.
    pub depth: usize,
    /// Number of coordinates `h` reads (to 1e-12 relative).
    pub h_depth: usize,
    pub log_lambda: f64,
    /// `‖ℒ_{f̄}1 - 1‖∞` on the eigen grid.
    pub residual: f64,
}

/// Tolerance on `‖ℒ_{f̄}1 - 1‖∞`.
pub const NORMALIZATION_TOL: f64 = 1e-8;

pub fn normalize_potential(f: &Potential, triple: &EigenTriple) -> Result<NormalizedPotential> {
    let op = &triple.operator;
    let shape = op.shape();
    let anchor = op.anchor();
    let h_depth = triple.h.effective_depth(1e-12);
    let f_depth = f.declared_depth().map_or(shape.depth + 1, |d| d.min(shape.depth + 1));
    let depth = f_depth.max(if h_depth == 0 { 0 } else { h_depth + 1 }).max(1);

    let mut h = triple.h.clone();
    while h.depth() > h_depth {
        h = h.restrict(anchor)?;
    }
    let table_shape = GridShape::new(shape.nodes, depth);
    let f_table = f.tabulate(table_shape, anchor)?;
    let values: Vec<f64> = (0..table_shape.len())
        .map(|i| {
            let mut v = f_table.values[i] - triple.log_lambda;
            if h_depth > 0 {
                let head = table_shape.power(depth - h_depth);
                let x = i / head;
                let sx = (i % table_shape.power(depth - 1)) / table_shape.power(depth - 1 - h_depth);
                v += h.values[x].ln() - h.values[sx].ln();
            }
            v
        })
        .collect();
    let fbar = Potential::cylinder(GridFunction::new(table_shape, values)?.with_alpha(f.alpha()))
        .named(format!("normalized {}", f.name()));

    let check = Operator::new(&fbar, op.grid(), shape.depth, anchor)?;
    let scale = check.log_shift().exp();
    let l1 = check.apply_shifted(&vec![1.0; shape.len()]);
    let (worst, residual) = l1
        .iter()
        .map(|v| (v * scale - 1.0).abs())
        .enumerate()
        .fold((0, 0.0f64), |acc, (i, r)| if r > acc.1 { (i, r) } else { acc });
    if residual > NORMALIZATION_TOL {
        return Err(Error::Residual {
            what: "normalization ℒ_f̄1 = 1".into(),
            residual,
            tolerance: NORMALIZATION_TOL,
            location: format!("word {:?}", shape.decode(worst)),
        });
    }
    Ok(NormalizedPotential {
        fbar,
        depth,
        h_depth,
        log_lambda: triple.log_lambda,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Grid;
    use crate::seqspace::TruncatedPoint;
    use crate::transfer::eigen::{eigen_triple, SolveConfig};

    fn binary() -> Grid {
        Grid::symbols(vec![0.5, 0.5]).unwrap()
    }

    fn two_coordinate() -> Potential {
        Potential::two_coordinate(vec![vec![0.0, 2f64.ln()], vec![3f64.ln(), 0.0]]).unwrap()
    }

    #[test]
    fn dictionary_is_deterministic() {
        let shape = GridShape::new(2, 4);
        let a = test_functions(shape, 20);
        assert_eq!(a.len(), 20);
        assert_eq!(a, test_functions(shape, 20));
    }

    #[test]
    fn fit_recovers_exact_geometric() {
        let points: Vec<(f64, f64)> = (1..10).map(|n| (n as f64, 3.0 * 0.4f64.powi(n))).collect();
        let fit = fit_geometric(&points);
        assert!((fit.s_hat - 0.4).abs() < 1e-12 && (fit.c_hat - 3.0).abs() < 1e-10);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!(fit_geometric(&[(1.0, 0.0), (2.0, 0.0)]).degenerate);
    }

    #[test]
    fn gap_examples() {
        let g = binary();
        let cfg = SolveConfig::new(6);
        let zero = eigen_triple(&Potential::zero(), &g, &cfg).unwrap();
        assert!(spectral_gap_estimate(&zero, 1, 10).unwrap().fit.degenerate);
        let first = eigen_triple(&Potential::first_coordinate(vec![0.0, 3f64.ln()]).unwrap(), &g, &cfg).unwrap();
        assert!(spectral_gap_estimate(&first, 1, 10).unwrap().fit.degenerate);
        let t = eigen_triple(&two_coordinate(), &g, &cfg).unwrap();
        let gap = spectral_gap_estimate(&t, 2, 14).unwrap();
        let oracle = (0.5 - 1.5f64.sqrt()).abs() / (0.5 + 1.5f64.sqrt());
        assert!((gap.fit.s_hat - oracle).abs() < 0.02, "{}", gap.fit.s_hat);
        assert!(gap.fit.r2 > 0.99);
    }

    #[test]
    fn q_decay_examples() {
        let g = binary();
        let cfg = SolveConfig::new(5);
        let t = eigen_triple(&two_coordinate(), &g, &cfg).unwrap();
        let one = GridFunction::constant(t.operator.shape(), 1.0);
        let d = qnorm_decay(&t, &one, 6, 1.0, 1 << 20).unwrap();
        assert!(d.entries.iter().all(|&e| e <= 1e-12));

        let zero = eigen_triple(&Potential::zero(), &g, &cfg).unwrap();
        let centered = GridFunction::from_fn(zero.operator.shape(), |w| w[0] as f64 - 0.5).unwrap();
        let d = qnorm_decay(&zero, &centered, 4, 1.0, 1 << 20).unwrap();
        assert!(d.entries.iter().all(|&e| e <= 1e-15), "{:?}", d.entries);

        let ind = GridFunction::from_fn(t.operator.shape(), |w| f64::from(w[0] == 0)).unwrap();
        let d = qnorm_decay(&t, &ind, 10, 1.0, 1 << 20).unwrap();
        let ratio = d.entries[8] / d.entries[7];
        let oracle = (0.5 - 1.5f64.sqrt()).abs() / (0.5 + 1.5f64.sqrt());
        assert!((ratio - oracle).abs() < 0.05, "{ratio}");
        assert!(d.commutation_residual < 1e-9);
    }

    #[test]
    fn normalization_examples() {
        let g = binary();
        let cfg = SolveConfig::new(5);
        for f in [Potential::zero(), Potential::constant(1.7)] {
            let t = eigen_triple(&f, &g, &cfg).unwrap();
            let n = normalize_potential(&f, &t).unwrap();
            assert!(n.fbar.tabulate(GridShape::new(2, 3), 0).unwrap().sup_norm() < 1e-14);
        }
        let f = Potential::first_coordinate(vec![0.0, 3f64.ln()]).unwrap();
        let n = normalize_potential(&f, &eigen_triple(&f, &g, &cfg).unwrap()).unwrap();
        assert_eq!(n.depth, 1);
        let x = TruncatedPoint::new(vec![1, 0], 0);
        assert!((n.fbar.evaluate(&x).unwrap() - (3f64.ln() - 2f64.ln())).abs() < 1e-12);

        let f = two_coordinate();
        let n = normalize_potential(&f, &eigen_triple(&f, &g, &cfg).unwrap()).unwrap();
        assert_eq!((n.depth, n.h_depth), (2, 1));
        assert!(n.residual < 1e-12);
    }

    #[test]
    fn long_range_normalizes() {
        let g = Grid::symbols(vec![0.3, 0.7]).unwrap();
        let f = Potential::long_range(1.0, 0.5, vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let t = eigen_triple(&f, &g, &SolveConfig::new(7)).unwrap();
        let n = normalize_potential(&f, &t).unwrap();
        assert_eq!(n.depth, 8);
        assert!(n.residual < 1e-9);
    }
}
