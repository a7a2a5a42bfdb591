use serde::{Deserialize, Serialize};

use super::diagnostics::test_functions;
use super::measure::DiscreteMeasure;
use super::operator::Operator;
use crate::alphabet::Grid;
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::seqspace::{default_depth, GridFunction};

/// Grid and iteration settings shared by every solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub depth: usize,
    #[serde(default)]
    pub anchor: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_atom_cap")]
    pub atom_cap: usize,
}

fn default_tol() -> f64 {
    1e-12
}

fn default_max_iter() -> usize {
    10_000
}

fn default_atom_cap() -> usize {
    4096
}

impl SolveConfig {
    pub fn new(depth: usize) -> Self {
        Self {
            depth,
            anchor: 0,
            tol: default_tol(),
            max_iter: default_max_iter(),
            atom_cap: default_atom_cap(),
        }
    }

    /// Default depth for an alphabet of `nodes` grid points.
    pub fn for_nodes(nodes: usize) -> Self {
        Self::new(default_depth(nodes))
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self, nodes: usize) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::usage("depth must be at least 1"));
        }
        if (nodes as f64).powi(self.depth as i32 + 1) > 2e7 {
            return Err(Error::usage(format!(
                "depth {} is too large for {nodes} nodes (kernel exceeds 2e7 entries)",
                self.depth
            )));
        }
        if self.anchor >= nodes {
            return Err(Error::usage("anchor is not a grid node"));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::usage("tol must lie in (0, 1)"));
        }
        if self.max_iter == 0 {
            return Err(Error::usage("max_iter must be positive"));
        }
        if self.atom_cap < nodes {
            return Err(Error::usage("atom_cap must be at least the node count"));
        }
        Ok(())
    }
}

/// Perron data `(λ, h, ν)` of `ℒ_f` on the grid.
#[derive(Debug, Clone)]
pub struct EigenTriple {
    pub log_lambda: f64,
    /// `e^{log λ}`; infinite when it does not fit in an f64.
    pub lambda: f64,
    /// Eigenfunction, normalized so that `ν(h) = 1`.
    pub h: GridFunction,
    /// Conformal probability measure at the grid depth.
    pub nu: DiscreteMeasure,
    /// `‖ℒh - λh‖∞ / (λ ‖h‖∞)`.
    pub eigen_residual: f64,
    /// `max_φ |⟨ν, ℒφ⟩/λ - ⟨ν, φ⟩| / ‖φ‖∞` over the test dictionary.
    pub conformality_residual: f64,
    pub iterations: usize,
    pub dual_iterations: usize,
    /// Contraction rate read off the Collatz–Wielandt bracket widths.
    pub s_estimate: f64,
    /// `(1/n) log ‖ℒⁿφ₀‖∞` at the final iteration.
    pub log_lambda_crosscheck: f64,
    /// Mass discarded by atom pruning in the last dual step.
    pub pruned_mass: f64,
    /// Relative bracket widths, one per primal iteration.
    pub history: Vec<f64>,
    pub operator: Operator,
}

impl EigenTriple {
    /// `λ` divided by the operator's stored scale.
    pub(crate) fn lambda_shifted(&self) -> f64 {
        (self.log_lambda - self.operator.log_shift()).exp()
    }
}

/// Solve for the Perron triple of `f` on `grid`.
pub fn eigen_triple(f: &Potential, grid: &Grid, cfg: &SolveConfig) -> Result<EigenTriple> {
    cfg.validate(grid.len())?;
    let op = Operator::new(f, grid, cfg.depth, cfg.anchor)?;
    solve(op, cfg, None)
}

/// As [`eigen_triple`], starting the power iteration from `warm`.
pub fn eigen_triple_warm(
    f: &Potential,
    grid: &Grid,
    cfg: &SolveConfig,
    warm: Option<&GridFunction>,
) -> Result<EigenTriple> {
    cfg.validate(grid.len())?;
    let op = Operator::new(f, grid, cfg.depth, cfg.anchor)?;
    solve(op, cfg, warm)
}

fn rate_from_history(history: &[f64]) -> f64 {
    let usable: Vec<f64> = history
        .iter()
        .copied()
        .take_while(|&w| w > 1e-13)
        .collect();
    if usable.len() < 3 {
        return 0.0;
    }
    let k = usable.len() - 1;
    let lo = k.saturating_sub(5);
    (usable[k] / usable[lo]).powf(1.0 / (k - lo) as f64).min(1.0)
}

/// Power iteration for `h` with a Collatz–Wielandt bracket, then dual
/// iteration for `ν`.
pub fn solve(op: Operator, cfg: &SolveConfig, warm: Option<&GridFunction>) -> Result<EigenTriple> {
    let len = op.shape().len();
    let mut phi: Vec<f64> = match warm {
        Some(w) if w.shape == op.shape() && w.values.iter().all(|&v| v > 0.0) => {
            let m = w.max();
            w.values.iter().map(|v| v / m).collect()
        }
        Some(_) => return Err(Error::usage("warm start must be positive on the operator grid")),
        None => vec![1.0; len],
    };

    let mut history = Vec::new();
    let mut log_norms = 0.0;
    let mut lambda = None;
    for k in 1..=cfg.max_iter {
        let psi = op.apply_shifted(&phi);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (p, q) in psi.iter().zip(&phi) {
            let r = p / q;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let norm = psi.iter().fold(0.0f64, |m, &v| m.max(v));
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NonFinite {
                location: format!("power iteration step {k}"),
                value: norm,
            });
        }
        log_norms += norm.ln();
        let width = (hi - lo) / hi;
        history.push(width);
        phi = psi.into_iter().map(|v| v / norm).collect();
        if let Some(i) = phi.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::Degenerate(format!(
                "eigenfunction underflowed at word {i}; the grid is too coarse for this potential scale"
            )));
        }
        if width < cfg.tol {
            lambda = Some((0.5 * (lo + hi), k));
            break;
        }
    }
    let Some((lambda_shifted, iterations)) = lambda else {
        let last = history.last().copied().unwrap_or(f64::NAN);
        return Err(Error::Convergence {
            iterations: cfg.max_iter,
            last,
            tolerance: cfg.tol,
            history,
        });
    };

    // dual iteration from the constant anchor word
    let mut nu = vec![0.0; len];
    nu[op.anchor_word()] = 1.0;
    let mut dual_iterations = 0;
    let mut pruned_mass = 0.0;
    let mut dual_history = Vec::new();
    let mut converged = false;
    for k in 1..=cfg.max_iter {
        let mut next = op.dual_shifted(&nu);
        let mass: f64 = next.iter().sum();
        next.iter_mut().for_each(|w| *w /= mass);
        pruned_mass = 0.0;
        if next.iter().filter(|&&w| w > 0.0).count() > cfg.atom_cap {
            let mut m = DiscreteMeasure::from_dense(op.shape(), op.anchor(), &next)?;
            pruned_mass = m.prune(cfg.atom_cap);
            next = m.dense();
        }
        let tv = 0.5 * next.iter().zip(&nu).map(|(a, b)| (a - b).abs()).sum::<f64>();
        dual_history.push(tv);
        nu = next;
        dual_iterations = k;
        if tv < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence {
            iterations: cfg.max_iter,
            last: dual_history.last().copied().unwrap_or(f64::NAN),
            tolerance: cfg.tol,
            history: dual_history,
        });
    }
    let nu = DiscreteMeasure::from_dense(op.shape(), op.anchor(), &nu)?.normalized()?;

    let pairing: f64 = nu.atoms().iter().map(|&(i, w)| w * phi[i]).sum();
    let h_values: Vec<f64> = phi.iter().map(|v| v / pairing).collect();
    let h = GridFunction::new(op.shape(), h_values)?;

    let lh = op.apply_shifted(&h.values);
    let eigen_residual = lh
        .iter()
        .zip(&h.values)
        .fold(0.0f64, |m, (a, b)| m.max((a - lambda_shifted * b).abs()))
        / (lambda_shifted * h.sup_norm());

    let conformality_residual = conformality(&op, &nu, lambda_shifted)?;

    let log_lambda = op.log_shift() + lambda_shifted.ln();
    Ok(EigenTriple {
        log_lambda,
        lambda: log_lambda.exp(),
        h,
        nu,
        eigen_residual,
        conformality_residual,
        iterations,
        dual_iterations,
        s_estimate: rate_from_history(&history),
        log_lambda_crosscheck: op.log_shift() + log_norms / iterations as f64,
        pruned_mass,
        history,
        operator: op,
    })
}

fn conformality(op: &Operator, nu: &DiscreteMeasure, lambda_shifted: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for phi in test_functions(op.shape(), 20) {
        let lphi = GridFunction::new(op.shape(), op.apply_shifted(&phi.values))?;
        let lhs = nu.integrate(&lphi)? / lambda_shifted;
        let rhs = nu.integrate(&phi)?;
        worst = worst.max((lhs - rhs).abs() / phi.sup_norm().max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}
