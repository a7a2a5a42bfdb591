//! Markov chains driven by normalized potentials.
//!
//! A normalized `f̄` (`ℒ_{f̄}1 = 1`) defines the kernel
//! `P(x, ·) = Σ_a w_a e^{f̄(ax)} δ_{ax}`. States are depth-`N` windows: a step
//! prepends the drawn symbol and drops the oldest coordinate. When `f̄` reads
//! more than two coordinates the first coordinate alone is not Markov, so
//! everything here is labelled by the window depth.
//!
//! Random streams: trace `i` of a run with master seed `s` uses ChaCha8
//! seeded with `s` on stream `i`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::alphabet::Grid;
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::seqspace::{fmt_f64, GridShape, TruncatedPoint};
use crate::transfer::{
    eigen_triple, fit_geometric, normalize_potential, solve, wasserstein, DiscreteMeasure, GeometricFit, Operator,
    SolveConfig, NORMALIZATION_TOL,
};

/// Floor on the metric constant used for Wasserstein distances.
pub const METRIC_FLOOR: f64 = 0.25;

/// Default autocovariance truncation.
pub const DEFAULT_LAG_MAX: usize = 50;

/// Random generator of trace `stream` under master seed `seed`.
pub fn trace_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Transition kernel of a normalized potential on a depth-`N` grid.
#[derive(Debug, Clone)]
pub struct Kernel {
    fbar: Potential,
    op: Operator,
    /// Row-major `P(x, a)` at `x * n + a`, renormalized per row.
    probs: Vec<f64>,
    cumulative: Vec<f64>,
    normalization_residual: f64,
    stationary: DiscreteMeasure,
    stationary_cumulative: Vec<f64>,
    metric_constant: f64,
}

/// Kernel of `fbar`, which must already satisfy `ℒ_{f̄}1 = 1`.
pub fn build_kernel(fbar: &Potential, grid: &Grid, cfg: &SolveConfig) -> Result<Kernel> {
    cfg.validate(grid.len())?;
    let op = Operator::new(fbar, grid, cfg.depth, cfg.anchor)?;
    let shape = op.shape();
    let n = shape.nodes;
    let stride = shape.len();
    let table = &op.potential_table().values;

    let mut probs = vec![0.0; stride * n];
    let mut residual: f64 = 0.0;
    let mut worst = 0;
    for x in 0..stride {
        let row = &mut probs[x * n..(x + 1) * n];
        for (a, p) in row.iter_mut().enumerate() {
            *p = grid.weight(a) * table[a * stride + x].exp();
        }
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > residual {
            residual = (total - 1.0).abs();
            worst = x;
        }
        row.iter_mut().for_each(|p| *p /= total);
    }
    if !(residual <= NORMALIZATION_TOL) {
        return Err(Error::Residual {
            what: "kernel normalization ‖ℒ_f 1 - 1‖∞ (apply normalize_potential first)".into(),
            residual,
            tolerance: NORMALIZATION_TOL,
            location: format!("state {:?}", shape.decode(worst)),
        });
    }
    let cumulative = probs
        .chunks(n)
        .flat_map(|row| {
            let mut acc = 0.0;
            row.iter()
                .map(move |p| {
                    acc += p;
                    acc
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let triple = solve(op.clone(), cfg, None)?;
    let stationary = triple.nu;
    let mut acc = 0.0;
    let stationary_cumulative = stationary
        .atoms()
        .iter()
        .map(|a| {
            acc += a.1;
            acc
        })
        .collect();

    let audit_depth = GridShape::max_depth(n, 256).clamp(1, cfg.depth);
    let max_word = GridShape::max_depth(n, 64).max(1);
    let distortion = fbar.distortion_constant(grid, audit_depth, cfg.anchor, max_word)?;

    Ok(Kernel {
        fbar: fbar.clone(),
        op,
        probs,
        cumulative,
        normalization_residual: residual,
        stationary,
        stationary_cumulative,
        metric_constant: distortion.max(METRIC_FLOOR),
    })
}

/// Normalize `f` and build its kernel.
pub fn normalized_kernel(f: &Potential, grid: &Grid, cfg: &SolveConfig) -> Result<Kernel> {
    let triple = eigen_triple(f, grid, cfg)?;
    let normalized = normalize_potential(f, &triple)?;
    build_kernel(&normalized.fbar, grid, cfg)
}

impl Kernel {
    pub fn fbar(&self) -> &Potential {
        &self.fbar
    }

    pub fn grid(&self) -> &Grid {
        self.op.grid()
    }

    pub fn shape(&self) -> GridShape {
        self.op.shape()
    }

    pub fn anchor(&self) -> usize {
        self.op.anchor()
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn normalization_residual(&self) -> f64 {
        self.normalization_residual
    }

    /// The stationary (conformal) measure `ν` of `f̄`.
    pub fn stationary(&self) -> &DiscreteMeasure {
        &self.stationary
    }

    /// `c` in the ground metric `min(1, 4c d_X^α)`: the audited distortion
    /// constant of `f̄`, floored at [`METRIC_FLOOR`].
    pub fn metric_constant(&self) -> f64 {
        self.metric_constant
    }

    /// `P(x, ·)` over next symbols, for the state with word index `x`.
    pub fn row(&self, x: usize) -> &[f64] {
        let n = self.shape().nodes;
        &self.probs[x * n..(x + 1) * n]
    }

    /// One step from the state with word index `x`.
    pub fn step_index<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> usize {
        let n = self.shape().nodes;
        let row = &self.cumulative[x * n..(x + 1) * n];
        let u: f64 = rng.random();
        let a = row.partition_point(|&c| c <= u).min(n - 1);
        self.shape().prepend(a, x)
    }

    /// Draw `a` from `P(x, ·)` and return `ax` (same window depth).
    pub fn step_sample<R: Rng + ?Sized>(&self, x: &TruncatedPoint, rng: &mut R) -> TruncatedPoint {
        let shape = self.shape();
        TruncatedPoint::from_index(shape, self.step_index(x.index(shape), rng), self.anchor())
    }

    /// A state drawn from the atoms of `ν`.
    pub fn sample_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let atoms = self.stationary.atoms();
        let total = *self.stationary_cumulative.last().unwrap_or(&1.0);
        let u: f64 = rng.random::<f64>() * total;
        let k = self
            .stationary_cumulative
            .partition_point(|&c| c <= u)
            .min(atoms.len() - 1);
        atoms[k].0
    }

    /// `(ℒ_{f̄}^m)^* μ`.
    pub fn push_forward(&self, mu: &DiscreteMeasure, m: usize, atom_cap: usize) -> Result<DiscreteMeasure> {
        let mut current = mu.clone();
        for _ in 0..m {
            current = self.op.dual_apply(&current, atom_cap)?.measure;
        }
        Ok(current)
    }

    /// Wasserstein distance under the kernel's ground metric.
    pub fn distance(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
        wasserstein(self.grid(), mu, nu, self.metric_constant, self.fbar.alpha())
    }

    fn check_state(&self, x: &TruncatedPoint) -> Result<usize> {
        let n = self.shape().nodes;
        if x.anchor >= n || x.word.iter().any(|&a| a >= n) {
            return Err(Error::usage(format!("state {x:?} is not on a grid with {n} nodes")));
        }
        Ok(x.index(self.shape()))
    }
}

/// `Φ_0, .., Φ_n` as word indices of a depth-`N` window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainTrace {
    pub shape: GridShape,
    pub anchor: usize,
    pub seed: u64,
    pub stream: u64,
    pub states: Vec<usize>,
}

impl ChainTrace {
    /// Number of steps `n` (there are `n + 1` states).
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn points(&self) -> Vec<TruncatedPoint> {
        self.states
            .iter()
            .map(|&x| TruncatedPoint::from_index(self.shape, x, self.anchor))
            .collect()
    }

    /// First coordinate of every state.
    pub fn first_symbols(&self) -> Vec<usize> {
        self.states.iter().map(|&x| self.shape.digit(x, 0)).collect()
    }

    /// `step,word_index,word` with the word's symbols joined by `-`.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# depth={},nodes={},seed={},stream={}\nstep,word_index,word\n",
            self.shape.depth, self.shape.nodes, self.seed, self.stream
        );
        for (k, &x) in self.states.iter().enumerate() {
            let word: Vec<String> = self.shape.decode(x).iter().map(|a| a.to_string()).collect();
            out.push_str(&format!("{k},{x},{}\n", word.join("-")));
        }
        out
    }
}

fn run_chain(kernel: &Kernel, x0: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut states = Vec::with_capacity(n + 1);
    states.push(x0);
    let mut x = x0;
    for _ in 0..n {
        x = kernel.step_index(x, rng);
        states.push(x);
    }
    states
}

/// `n` steps from `x0` on stream 0 of `seed`.
pub fn simulate_chain(kernel: &Kernel, x0: &TruncatedPoint, n: usize, seed: u64) -> Result<ChainTrace> {
    if n == 0 {
        return Err(Error::usage("chain length must be at least 1"));
    }
    let start = kernel.check_state(x0)?;
    let mut rng = trace_rng(seed, 0);
    Ok(ChainTrace {
        shape: kernel.shape(),
        anchor: kernel.anchor(),
        seed,
        stream: 0,
        states: run_chain(kernel, start, n, &mut rng),
    })
}

/// `n` steps from a `ν`-distributed start, on stream `stream` of `seed`.
pub fn simulate_stationary(kernel: &Kernel, n: usize, seed: u64, stream: u64) -> Result<ChainTrace> {
    if n == 0 {
        return Err(Error::usage("chain length must be at least 1"));
    }
    let mut rng = trace_rng(seed, stream);
    let start = kernel.sample_stationary(&mut rng);
    Ok(ChainTrace {
        shape: kernel.shape(),
        anchor: kernel.anchor(),
        seed,
        stream,
        states: run_chain(kernel, start, n, &mut rng),
    })
}

/// `πP = π` for `π = ν∘π₁⁻¹` on singletons of the alphabet.
#[derive(Debug, Clone, Serialize)]
pub struct StationaryReport {
    pub pi: Vec<f64>,
    /// `transition[b][a] = P(x, a)` for any `x` with `x₁ = b`.
    pub transition: Vec<Vec<f64>>,
    pub residual: f64,
}

/// Only meaningful when `f̄` depends on the first two coordinates.
pub fn stationary_marginal_check(kernel: &Kernel) -> Result<StationaryReport> {
    match kernel.fbar.declared_depth() {
        Some(d) if d <= 2 => {}
        other => {
            return Err(Error::Unsupported(format!(
                "stationary marginal check needs f̄ that depends on the first two coordinates only \
                 (f̄ reads {} coordinates)",
                other.map_or("infinitely many".to_string(), |d| d.to_string())
            )))
        }
    }
    let shape = kernel.shape();
    let n = shape.nodes;
    let head = shape.power(shape.depth - 1);
    let transition: Vec<Vec<f64>> = (0..n).map(|b| kernel.row(b * head).to_vec()).collect();
    let pi = kernel.stationary.marginal(0);
    let residual = (0..n)
        .map(|a| ((0..n).map(|b| pi[b] * transition[b][a]).sum::<f64>() - pi[a]).abs())
        .fold(0.0, f64::max);
    Ok(StationaryReport {
        pi,
        transition,
        residual,
    })
}

/// Distances `d(Pⁿ(x, ·), ν)` and their pooled geometric fit.
#[derive(Debug, Clone, Serialize)]
pub struct ErgodicityFit {
    /// One row per start, entry `n - 1` for step `n`.
    pub distances: Vec<Vec<f64>>,
    /// First `n` used by the fit.
    pub fit_from: usize,
    pub fit: GeometricFit,
    /// Largest increase `d_{n+1} - d_n` seen (0 when nonincreasing).
    pub max_increase: f64,
    pub metric_constant: f64,
    pub alpha: f64,
    pub pruned_mass: f64,
}

/// Fit from `n = max(N, 1)`, where `N` is the window depth; earlier steps
/// still carry the start word.
pub fn geometric_ergodicity_fit(
    kernel: &Kernel,
    starts: &[TruncatedPoint],
    n_max: usize,
    atom_cap: usize,
) -> Result<ErgodicityFit> {
    if starts.is_empty() || n_max == 0 {
        return Err(Error::usage("ergodicity fit needs at least one start and n_max ≥ 1"));
    }
    let shape = kernel.shape();
    let indices = starts.iter().map(|x| kernel.check_state(x)).collect::<Result<Vec<_>>>()?;
    let nu = kernel.stationary.normalized()?;
    let rows = indices
        .par_iter()
        .map(|&x| {
            let mut mu = DiscreteMeasure::dirac(shape, kernel.anchor(), x)?;
            let mut row = Vec::with_capacity(n_max);
            let mut pruned: f64 = 0.0;
            for _ in 0..n_max {
                let step = kernel.op.dual_apply(&mu, atom_cap)?;
                pruned = pruned.max(step.pruned_mass);
                mu = step.measure.normalized()?;
                row.push(kernel.distance(&mu, &nu)?);
            }
            Ok((row, pruned))
        })
        .collect::<Result<Vec<_>>>()?;
    let fit_from = shape.depth.clamp(1, n_max);
    let points: Vec<(f64, f64)> = rows
        .iter()
        .flat_map(|(row, _)| (fit_from..=n_max).map(move |n| (n as f64, row[n - 1])))
        .collect();
    let max_increase = rows
        .iter()
        .flat_map(|(row, _)| row.windows(2).map(|w| w[1] - w[0]))
        .fold(0.0, f64::max);
    let mut fit = fit_geometric(&points);
    if points.iter().all(|p| p.1 < 1e-13) {
        fit.degenerate = true;
    }
    Ok(ErgodicityFit {
        distances: rows.iter().map(|r| r.0.clone()).collect(),
        fit_from,
        fit,
        max_increase,
        metric_constant: kernel.metric_constant,
        alpha: kernel.fbar.alpha(),
        pruned_mass: rows.iter().map(|r| r.1).fold(0.0, f64::max),
    })
}

/// `t̂ = max d((ℒ^m)^*μ, (ℒ^m)^*μ̃) / d(μ, μ̃)` over the pairs.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    /// `None` for pairs skipped because `d(μ, μ̃) < 1e-12`.
    pub ratios: Vec<Option<f64>>,
    pub t_hat: f64,
    pub contracting: bool,
    pub skipped: usize,
}

pub fn operator_contraction_estimate(
    kernel: &Kernel,
    pairs: &[(DiscreteMeasure, DiscreteMeasure)],
    m: usize,
    atom_cap: usize,
) -> Result<ContractionReport> {
    if m == 0 {
        return Err(Error::usage("contraction exponent m must be at least 1"));
    }
    let ratios = pairs
        .par_iter()
        .map(|(mu, nu)| {
            let before = kernel.distance(mu, nu)?;
            if before < 1e-12 {
                return Ok(None);
            }
            let a = kernel.push_forward(mu, m, atom_cap)?.normalized()?;
            let b = kernel.push_forward(nu, m, atom_cap)?.normalized()?;
            Ok(Some(kernel.distance(&a, &b)? / before))
        })
        .collect::<Result<Vec<_>>>()?;
    let skipped = ratios.iter().filter(|r| r.is_none()).count();
    let t_hat = ratios.iter().flatten().fold(0.0, |m: f64, &r| m.max(r));
    Ok(ContractionReport {
        contracting: skipped < ratios.len() && t_hat < 1.0,
        ratios,
        t_hat,
        skipped,
    })
}

/// `count` pairs of random probability measures with `support` atoms each.
pub fn random_pairs(
    shape: GridShape,
    anchor: usize,
    count: usize,
    support: usize,
    seed: u64,
) -> Result<Vec<(DiscreteMeasure, DiscreteMeasure)>> {
    let mut rng = trace_rng(seed, 0);
    let draw = |rng: &mut ChaCha8Rng| {
        let atoms = (0..support)
            .map(|_| (rng.random_range(0..shape.len()), rng.random::<f64>() + 0.05))
            .collect();
        DiscreteMeasure::new(shape, anchor, atoms)?.normalized()
    };
    (0..count).map(|_| Ok((draw(&mut rng)?, draw(&mut rng)?))).collect()
}

/// Centered observable `ξ - ν(ξ)` on the kernel's window.
fn centered_values(kernel: &Kernel, xi: &Potential) -> Result<(Vec<f64>, f64)> {
    let table = xi.tabulate(kernel.shape(), kernel.anchor())?;
    let mean = kernel.stationary.normalized()?.integrate(&table)?;
    Ok((table.values.iter().map(|v| v - mean).collect(), mean))
}

/// Long-run variance estimates of `S_n(ξ) = Σ_{k=1}^n ξ(Φ_k)`.
#[derive(Debug, Clone, Serialize)]
pub struct CltVariance {
    /// `ν(ξ)`, subtracted before summing.
    pub mean: f64,
    /// Empirical autocovariances `γ_0..γ_lag_max`.
    pub autocovariances: Vec<f64>,
    /// `γ_0 + 2 Σ (1 - k/(L+1)) γ_k`.
    pub autocovariance_estimate: f64,
    /// `(1/n) E[S_n²]` over the traces.
    pub direct_estimate: f64,
    /// The value to use: the autocovariance estimate unless it is negative.
    pub s2: f64,
    pub warning: Option<String>,
}

pub fn clt_variance(
    kernel: &Kernel,
    xi: &Potential,
    lag_max: usize,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<CltVariance> {
    if n <= lag_max || samples == 0 {
        return Err(Error::usage("clt_variance needs n > lag_max and samples ≥ 1"));
    }
    let (values, mean) = centered_values(kernel, xi)?;
    let per_trace = (0..samples as u64)
        .into_par_iter()
        .map(|stream| {
            let trace = simulate_stationary(kernel, n, seed, stream)?;
            let v: Vec<f64> = trace.states[1..].iter().map(|&x| values[x]).collect();
            let mut sums = vec![0.0; lag_max + 1];
            for (k, s) in sums.iter_mut().enumerate() {
                *s = v[..n - k].iter().zip(&v[k..]).map(|(a, b)| a * b).sum();
            }
            Ok((v.iter().sum::<f64>(), sums))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut gamma = vec![0.0; lag_max + 1];
    let mut square = 0.0;
    for (s, sums) in &per_trace {
        square += s * s;
        for (g, v) in gamma.iter_mut().zip(sums) {
            *g += v;
        }
    }
    for (k, g) in gamma.iter_mut().enumerate() {
        *g /= (samples * (n - k)) as f64;
    }
    let bartlett = gamma[0]
        + 2.0
            * (1..=lag_max)
                .map(|k| (1.0 - k as f64 / (lag_max + 1) as f64) * gamma[k])
                .sum::<f64>();
    let direct = square / (samples * n) as f64;
    let (s2, warning) = if bartlett < 0.0 {
        (
            direct,
            Some(format!("autocovariance estimate {bartlett:.3e} is negative; using the direct estimate")),
        )
    } else {
        (bartlett, None)
    };
    Ok(CltVariance {
        mean,
        autocovariances: gamma,
        autocovariance_estimate: bartlett,
        direct_estimate: direct,
        s2,
        warning,
    })
}

/// KS distance between the sample and `N(0, sd²)`.
pub fn ks_statistic(sample: &[f64], sd: f64) -> Result<f64> {
    let normal = Normal::new(0.0, sd).map_err(|e| Error::usage(format!("normal law: {e}")))?;
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    Ok(sorted.iter().enumerate().fold(0.0, |d: f64, (i, &z)| {
        let c = normal.cdf(z);
        d.max(((i + 1) as f64 / m - c).abs()).max((c - i as f64 / m).abs())
    }))
}

/// Declared pass bar `max(0.02, 1.36/√samples + 2/√n)`.
pub fn ks_threshold(n: usize, samples: usize) -> f64 {
    (1.36 / (samples as f64).sqrt() + 2.0 / (n as f64).sqrt()).max(0.02)
}

#[derive(Debug, Clone, Serialize)]
pub struct CltCheck {
    pub n: usize,
    pub samples: usize,
    pub s2: f64,
    pub ks_stat: f64,
    pub threshold: f64,
    pub pass: bool,
    /// `S_n(ξ)/√n` per trace, in trace order.
    pub normalized_sums: Vec<f64>,
}

/// KS test of `S_n(ξ)/√n` over `samples` stationary traces against
/// `N(0, s2)`, with `s2` from [`clt_variance`].
pub fn clt_check(
    kernel: &Kernel,
    xi: &Potential,
    n: usize,
    samples: usize,
    seed: u64,
    s2: f64,
) -> Result<CltCheck> {
    if !(s2 > 1e-12) {
        return Err(Error::Degenerate(format!(
            "asymptotic variance {s2:.3e} is zero; check clt_variance (ξ may be a coboundary)"
        )));
    }
    if n == 0 || samples < 2 {
        return Err(Error::usage("clt_check needs n ≥ 1 and samples ≥ 2"));
    }
    let (values, _) = centered_values(kernel, xi)?;
    let root = (n as f64).sqrt();
    let normalized_sums = (0..samples as u64)
        .into_par_iter()
        .map(|stream| {
            let trace = simulate_stationary(kernel, n, seed, stream)?;
            Ok(trace.states[1..].iter().map(|&x| values[x]).sum::<f64>() / root)
        })
        .collect::<Result<Vec<_>>>()?;
    let ks_stat = ks_statistic(&normalized_sums, s2.sqrt())?;
    let threshold = ks_threshold(n, samples);
    Ok(CltCheck {
        n,
        samples,
        s2,
        ks_stat,
        threshold,
        pass: ks_stat <= threshold,
        normalized_sums,
    })
}

impl CltCheck {
    /// `bin_left,bin_right,count` over `bins` equal bins spanning the sample.
    pub fn histogram_csv(&self, bins: usize) -> String {
        let lo = self.normalized_sums.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.normalized_sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let bins = bins.max(1);
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut counts = vec![0usize; bins];
        for &z in &self.normalized_sums {
            counts[(((z - lo) / width) as usize).min(bins - 1)] += 1;
        }
        let mut out = String::from("bin_left,bin_right,count\n");
        for (k, c) in counts.iter().enumerate() {
            let left = lo + k as f64 * width;
            out.push_str(&format!("{},{},{c}\n", fmt_f64(left), fmt_f64(left + width)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary() -> Grid {
        Grid::symbols(vec![0.5, 0.5]).unwrap()
    }

    fn two() -> Potential {
        Potential::two_coordinate(vec![vec![0.0, 2f64.ln()], vec![3f64.ln(), 0.0]]).unwrap()
    }

    fn first_coord_xi() -> Potential {
        Potential::first_coordinate(vec![-0.5, 0.5]).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let g = binary();
        let cfg = SolveConfig::new(4);
        let k = build_kernel(&Potential::zero(), &g, &cfg).unwrap();
        assert!((0..16).all(|x| k.row(x) == [0.5, 0.5]));

        let cbar = Potential::first_coordinate(vec![-(2f64.ln()), 3f64.ln() - 2f64.ln()]).unwrap();
        let k = build_kernel(&cbar, &g, &cfg).unwrap();
        for x in 0..16 {
            assert!((k.row(x)[0] - 0.25).abs() < 1e-15 && (k.row(x)[1] - 0.75).abs() < 1e-15);
        }

        let err = build_kernel(&two(), &g, &cfg).unwrap_err();
        assert!(matches!(err, Error::Residual { .. }) && err.to_string().contains("normalize"));
    }

    #[test]
    fn transition_frequencies() {
        let g = binary();
        let k = normalized_kernel(&two(), &g, &SolveConfig::new(3)).unwrap();
        let trace = simulate_chain(&k, &TruncatedPoint::constant(0, 3), 100_000, 9).unwrap();
        assert_eq!(trace.states.len(), 100_001);
        let s = trace.first_symbols();
        let mut counts = [[0usize; 2]; 2];
        for w in s.windows(2) {
            counts[w[0]][w[1]] += 1;
        }
        let head = k.shape().power(2);
        for b in 0..2 {
            let total = (counts[b][0] + counts[b][1]) as f64;
            for a in 0..2 {
                assert!((counts[b][a] as f64 / total - k.row(b * head)[a]).abs() < 0.01);
            }
        }
        let again = simulate_chain(&k, &TruncatedPoint::constant(0, 3), 100_000, 9).unwrap();
        assert_eq!(trace, again);
        let pts = trace.points();
        assert!(pts.windows(2).all(|w| w[1] == w[0].prepend(w[1].coord(0))));
    }

    #[test]
    fn stationary_marginals() {
        let g = binary();
        let cbar = Potential::first_coordinate(vec![-(2f64.ln()), 3f64.ln() - 2f64.ln()]).unwrap();
        let k = build_kernel(&cbar, &g, &SolveConfig::new(4)).unwrap();
        let trace = simulate_stationary(&k, 100_000, 3, 0).unwrap();
        let ones = trace.first_symbols().iter().filter(|&&a| a == 1).count() as f64;
        assert!((ones / 100_001.0 - 0.75).abs() < 0.01);

        let report = stationary_marginal_check(&k).unwrap();
        assert!(report.residual < 1e-12);

        // left Perron vector of the row-stochastic 2×2 matrix
        let k = normalized_kernel(&two(), &g, &SolveConfig::new(4)).unwrap();
        let report = stationary_marginal_check(&k).unwrap();
        let t = &report.transition;
        let pi0 = t[1][0] / (t[0][1] + t[1][0]);
        assert!(report.residual <= 1e-8);
        assert!((report.pi[0] - pi0).abs() < 1e-8);

        let deep = Potential::cylinder(
            crate::seqspace::GridFunction::from_fn(GridShape::new(2, 3), |w| 0.1 * w[2] as f64).unwrap(),
        );
        let k = normalized_kernel(&deep, &g, &SolveConfig::new(4)).unwrap();
        assert!(matches!(stationary_marginal_check(&k), Err(Error::Unsupported(_))));
    }

    #[test]
    fn ergodicity_examples() {
        let g = binary();
        let k = build_kernel(&Potential::zero(), &g, &SolveConfig::new(4)).unwrap();
        let fit = geometric_ergodicity_fit(&k, &[TruncatedPoint::constant(1, 4)], 8, 4096).unwrap();
        assert!(fit.distances[0][3..].iter().all(|&d| d < 1e-13));
        assert!(fit.fit.degenerate);

        let k = normalized_kernel(&two(), &g, &SolveConfig::new(4)).unwrap();
        let starts = [TruncatedPoint::constant(0, 4), TruncatedPoint::constant(1, 4)];
        let fit = geometric_ergodicity_fit(&k, &starts, 14, 4096).unwrap();
        let lambda = 0.5 + 1.5f64.sqrt();
        let ratio = (1.5f64.sqrt() - 0.5) / lambda;
        assert!((fit.fit.s_hat - ratio).abs() < 0.05, "{}", fit.fit.s_hat);
        assert!(fit.fit.r2 >= 0.99);
        assert!(fit.max_increase <= 1e-9);
    }

    #[test]
    fn contraction_examples() {
        let g = binary();
        let shape = GridShape::new(2, 4);
        let k = build_kernel(&Potential::zero(), &g, &SolveConfig::new(4)).unwrap();
        let a = DiscreteMeasure::dirac(shape, 0, shape.encode(&[0, 0, 0, 0])).unwrap();
        let b = DiscreteMeasure::dirac(shape, 0, shape.encode(&[0, 1, 0, 0])).unwrap();
        let r = operator_contraction_estimate(&k, &[(a.clone(), a.clone()), (a, b)], 1, 4096).unwrap();
        assert_eq!(r.skipped, 1);
        assert!(r.t_hat <= 0.5 + 1e-12);

        let k = normalized_kernel(&two(), &g, &SolveConfig::new(4)).unwrap();
        let pairs = random_pairs(shape, 0, 20, 5, 11).unwrap();
        let r = operator_contraction_estimate(&k, &pairs, 4, 4096).unwrap();
        assert!(r.contracting && r.t_hat < 1.0);
    }

    #[test]
    fn clt_variance_examples() {
        let g = binary();
        let k = build_kernel(&Potential::zero(), &g, &SolveConfig::new(3)).unwrap();
        let v = clt_variance(&k, &first_coord_xi(), 50, 1000, 400, 5).unwrap();
        assert!((v.s2 - 0.25).abs() < 0.01, "{v:?}");
        assert!((v.direct_estimate - 0.25).abs() < 0.03);

        let v = clt_variance(&k, &Potential::zero(), 10, 200, 50, 5).unwrap();
        assert_eq!(v.s2, 0.0);

        // ξ = g - g∘σ with g the first coordinate
        let cob = Potential::cylinder(
            crate::seqspace::GridFunction::from_fn(GridShape::new(2, 2), |w| w[0] as f64 - w[1] as f64).unwrap(),
        );
        let v = clt_variance(&k, &cob, 50, 1000, 200, 5).unwrap();
        assert!(v.s2 <= 0.02 && v.direct_estimate <= 0.02, "{v:?}");
    }

    #[test]
    fn clt_check_examples() {
        let g = binary();
        let k = build_kernel(&Potential::zero(), &g, &SolveConfig::new(3)).unwrap();
        assert!(matches!(
            clt_check(&k, &Potential::zero(), 100, 100, 1, 0.0),
            Err(Error::Degenerate(_))
        ));
        let a = clt_check(&k, &first_coord_xi(), 400, 2000, 7, 0.25).unwrap();
        let b = clt_check(&k, &first_coord_xi(), 400, 2000, 7, 0.25).unwrap();
        assert_eq!(a.ks_stat, b.ks_stat);
        assert!(a.pass);
        assert!(a.histogram_csv(10).lines().count() == 11);
    }

    #[test]
    fn ks_statistic_examples() {
        assert!((ks_statistic(&[0.0], 1.0).unwrap() - 0.5).abs() < 1e-15);
        let quantiles: Vec<f64> = (1..1000)
            .map(|i| {
                let n = Normal::new(0.0, 2.0).unwrap();
                n.inverse_cdf(i as f64 / 1000.0)
            })
            .collect();
        assert!(ks_statistic(&quantiles, 2.0).unwrap() < 2e-3);
        assert_eq!(ks_threshold(1000, 10_000), 1.36 / 100.0 + 2.0 / 1000f64.sqrt());
    }

    #[test]
    fn trace_csv() {
        let g = binary();
        let k = build_kernel(&Potential::zero(), &g, &SolveConfig::new(2)).unwrap();
        let t = simulate_chain(&k, &TruncatedPoint::constant(1, 2), 3, 1).unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("# depth=2,nodes=2,seed=1,stream=0\nstep,word_index,word\n0,3,1-1\n"));
        assert_eq!(csv.lines().count(), 6);
    }
}
