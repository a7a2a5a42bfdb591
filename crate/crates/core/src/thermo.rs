//! Pressure, entropy and equilibrium states.
//!
//! For Hölder `f` the equilibrium state is `μ_f = h ν` and its entropy is
//! `-⟨μ_f, f̄⟩` with `f̄` the normalized potential. Entropy of any other
//! measure is only available as an upper estimate
//! `min_g -⟨μ, g⟩ + log λ_g` over a finite dictionary of potentials.

use rayon::prelude::*;
use serde::Serialize;

use crate::alphabet::Grid;
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::seqspace::{GridFunction, GridShape};
use crate::transfer::{
    eigen_triple, eigen_triple_warm, normalize_potential, test_functions, DiscreteMeasure, EigenTriple,
    NormalizedPotential, SolveConfig,
};

/// Tolerance on the shift-invariance residual of an equilibrium state.
pub const INVARIANCE_TOL: f64 = 1e-8;

/// Size of the invariance test dictionary.
pub const INVARIANCE_TESTS: usize = 20;

/// `P(f) = log λ_f`.
pub fn pressure(f: &Potential, grid: &Grid, cfg: &SolveConfig) -> Result<f64> {
    Ok(eigen_triple(f, grid, cfg)?.log_lambda)
}

/// `max_k |⟨μ, g_k∘σ⟩ - ⟨μ, g_k⟩|` over the cylinder test dictionary, and
/// the index of the worst `g_k`. Test functions read one coordinate fewer
/// than the measure so that `g∘σ` is integrated exactly.
pub fn invariance_residual(mu: &DiscreteMeasure) -> Result<(f64, usize)> {
    let shape = mu.shape();
    if shape.depth < 2 {
        return Err(Error::usage("invariance checks need measures of depth ≥ 2"));
    }
    let small = GridShape::new(shape.nodes, shape.depth - 1);
    let mut worst = (0.0, 0);
    for (k, g) in test_functions(small, INVARIANCE_TESTS).iter().enumerate() {
        let tail = small.len();
        let shifted = GridFunction::new(shape, (0..shape.len()).map(|y| g.values[y % tail]).collect())?;
        let r = (mu.integrate(&shifted)? - mu.integrate(g)?).abs();
        if r > worst.0 {
            worst = (r, k);
        }
    }
    Ok(worst)
}

/// `μ_f = hν` with its thermodynamic bookkeeping.
#[derive(Debug, Clone)]
pub struct EquilibriumState {
    /// `μ_f` on words one coordinate deeper than the eigen grid.
    pub measure: DiscreteMeasure,
    /// `h^v(μ_f) = -⟨μ_f, f̄⟩`.
    pub entropy: f64,
    /// `log λ_f`.
    pub pressure: f64,
    /// `⟨μ_f, f⟩`.
    pub potential_integral: f64,
    pub invariance_residual: f64,
    /// `|entropy + potential_integral - pressure|`.
    pub variational_gap: f64,
    pub normalized: NormalizedPotential,
    pub triple: EigenTriple,
}

pub fn equilibrium_state(f: &Potential, grid: &Grid, cfg: &SolveConfig) -> Result<EquilibriumState> {
    equilibrium_from_triple(f, eigen_triple(f, grid, cfg)?)
}

/// Equilibrium state from an already solved triple of `f`.
pub fn equilibrium_from_triple(f: &Potential, triple: EigenTriple) -> Result<EquilibriumState> {
    let op = &triple.operator;
    let shape = op.shape();
    let lifted = op.lift_shifted(&triple.nu, 1.0 / triple.lambda_shifted())?;
    let stride = shape.nodes;
    let atoms = lifted
        .atoms()
        .iter()
        .map(|&(y, w)| (y, w * triple.h.values[y / stride]))
        .collect();
    let measure = DiscreteMeasure::new(shape.deeper(), op.anchor(), atoms)?.normalized()?;

    let normalized = normalize_potential(f, &triple)?;
    let deep = shape.deeper();
    let fbar = normalized.fbar.tabulate(deep, op.anchor())?;
    let entropy = -measure.integrate(&fbar)?;
    let potential_integral = measure.integrate(op.potential_table())?;
    let (invariance, worst) = invariance_residual(&measure)?;
    if invariance > INVARIANCE_TOL {
        return Err(Error::Residual {
            what: "shift invariance of μ_f".into(),
            residual: invariance,
            tolerance: INVARIANCE_TOL,
            location: format!("test function {worst}"),
        });
    }
    Ok(EquilibriumState {
        measure,
        entropy,
        pressure: triple.log_lambda,
        potential_integral,
        invariance_residual: invariance,
        variational_gap: (entropy + potential_integral - triple.log_lambda).abs(),
        normalized,
        triple,
    })
}

/// One potential of an entropy dictionary, tabulated on the measure grid.
#[derive(Debug, Clone)]
pub struct DictionaryEntry {
    pub name: String,
    pub table: GridFunction,
    pub log_lambda: f64,
}

/// Potentials with solved pressures, used to bound entropies from above.
#[derive(Debug, Clone, Default)]
pub struct EntropyDictionary {
    pub entries: Vec<DictionaryEntry>,
}

/// `min_g -⟨μ, g⟩ + log λ_g` and the minimizing entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyEstimate {
    pub value: f64,
    pub argmin: String,
}

impl EntropyDictionary {
    /// Solve every potential (in parallel) on the grid of `cfg`.
    pub fn build(potentials: &[Potential], grid: &Grid, cfg: &SolveConfig) -> Result<Self> {
        let entries = potentials
            .par_iter()
            .map(|g| {
                let t = eigen_triple(g, grid, cfg)?;
                Ok(DictionaryEntry {
                    name: g.name().to_string(),
                    table: t.operator.potential_table().clone(),
                    log_lambda: t.log_lambda,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { entries })
    }

    pub fn extend(&mut self, other: EntropyDictionary) {
        self.entries.extend(other.entries);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn estimate(&self, mu: &DiscreteMeasure) -> Result<EntropyEstimate> {
        let mut best = EntropyEstimate {
            value: f64::INFINITY,
            argmin: String::new(),
        };
        if self.entries.is_empty() {
            return Err(Error::usage("entropy dictionary is empty"));
        }
        for e in &self.entries {
            let v = -mu.integrate(&e.table)? + e.log_lambda;
            if v < best.value {
                best = EntropyEstimate {
                    value: v,
                    argmin: e.name.clone(),
                };
            }
        }
        Ok(best)
    }
}

/// `min_g -⟨μ, g⟩ + log λ_g` over `dictionary`.
pub fn entropy_upper_estimate(
    mu: &DiscreteMeasure,
    dictionary: &[Potential],
    grid: &Grid,
    cfg: &SolveConfig,
) -> Result<EntropyEstimate> {
    EntropyDictionary::build(dictionary, grid, cfg)?.estimate(mu)
}

#[derive(Debug, Clone, Serialize)]
pub struct VariationalRow {
    pub candidate: String,
    pub entropy_estimate: f64,
    pub entropy_argmin: String,
    pub integral: f64,
    /// `P(f) - entropy_estimate - integral`.
    pub deficit: f64,
    pub invariance_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariationalReport {
    pub pressure: f64,
    pub rows: Vec<VariationalRow>,
}

impl VariationalReport {
    pub fn min_deficit(&self) -> f64 {
        self.rows.iter().map(|r| r.deficit).fold(f64::INFINITY, f64::min)
    }
}

/// Check `h^v_est(μ) + ⟨μ, f⟩ ≤ P(f)` for each candidate. The dictionary
/// always contains `f` and `0` besides `extra`.
pub fn variational_check(
    f: &Potential,
    candidates: &[(String, DiscreteMeasure)],
    extra: &[Potential],
    grid: &Grid,
    cfg: &SolveConfig,
) -> Result<VariationalReport> {
    let mut potentials = vec![f.clone(), Potential::zero().named("zero")];
    potentials.extend_from_slice(extra);
    let dictionary = EntropyDictionary::build(&potentials, grid, cfg)?;
    let pressure = dictionary.entries[0].log_lambda;
    let f_table = &dictionary.entries[0].table;
    let rows = candidates
        .par_iter()
        .map(|(name, mu)| {
            let est = dictionary.estimate(mu)?;
            let integral = mu.integrate(f_table)?;
            Ok(VariationalRow {
                candidate: name.clone(),
                entropy_estimate: est.value,
                entropy_argmin: est.argmin,
                integral,
                deficit: pressure - est.value - integral,
                invariance_residual: invariance_residual(mu)?.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VariationalReport { pressure, rows })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvexityRow {
    pub t: f64,
    pub pressure: f64,
    /// `t P(f) + (1 - t) P(g)`.
    pub chord: f64,
    /// `chord - pressure`; nonnegative for a convex pressure.
    pub slack: f64,
}

/// `P(t f + (1 - t) g)` against the chord at each `t`.
pub fn pressure_convexity_probe(
    f: &Potential,
    g: &Potential,
    ts: &[f64],
    grid: &Grid,
    cfg: &SolveConfig,
) -> Result<Vec<ConvexityRow>> {
    if let Some(t) = ts.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::usage(format!("convexity parameter {t} outside [0, 1]")));
    }
    let pf = pressure(f, grid, cfg)?;
    let pg = pressure(g, grid, cfg)?;
    ts.par_iter()
        .map(|&t| {
            let p = pressure(&Potential::combine(t, f, 1.0 - t, g)?, grid, cfg)?;
            let chord = t * pf + (1.0 - t) * pg;
            Ok(ConvexityRow {
                t,
                pressure: p,
                chord,
                slack: chord - p,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct BetaRow {
    pub beta: f64,
    pub log_lambda: f64,
    /// `⟨μ_{βf}, f⟩`.
    pub mean_f: f64,
    pub entropy: f64,
    /// One-site marginal of `μ_{βf}`.
    pub marginal: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BetaScan {
    pub rows: Vec<BetaRow>,
    /// Last `⟨f⟩`, the estimate of `max ∫ f dμ` over invariant measures.
    pub m_estimate: f64,
    /// `(β, message)` of the first failed solve; the table stops there.
    pub failure: Option<(f64, String)>,
}

/// Equilibrium states of `βf` along ascending `betas`, warm-starting each
/// solve from the previous eigenfunction.
pub fn beta_scan(f: &Potential, betas: &[f64], grid: &Grid, cfg: &SolveConfig) -> Result<BetaScan> {
    if betas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::usage("betas must be strictly ascending"));
    }
    let mut rows = Vec::with_capacity(betas.len());
    let mut warm: Option<GridFunction> = None;
    let mut failure = None;
    for &beta in betas {
        let scaled = f.scaled(beta);
        let state = eigen_triple_warm(&scaled, grid, cfg, warm.as_ref())
            .and_then(|t| equilibrium_from_triple(&scaled, t));
        match state {
            Ok(state) => {
                let table = f.tabulate(state.measure.shape(), cfg.anchor)?;
                rows.push(BetaRow {
                    beta,
                    log_lambda: state.pressure,
                    mean_f: state.measure.integrate(&table)?,
                    entropy: state.entropy,
                    marginal: state.measure.marginal(0),
                    iterations: state.triple.iterations,
                });
                warm = Some(state.triple.h);
            }
            Err(e) => {
                failure = Some((beta, e.to_string()));
                break;
            }
        }
    }
    let m_estimate = rows.last().map_or(f64::NAN, |r| r.mean_f);
    Ok(BetaScan {
        rows,
        m_estimate,
        failure,
    })
}
