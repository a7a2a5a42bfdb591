use rand::Rng;
use serde_json::json;

use ruelle::alphabet::Grid;
use ruelle::markov::{
    clt_check, clt_variance, geometric_ergodicity_fit, normalized_kernel, operator_contraction_estimate,
    random_pairs, simulate_chain, simulate_stationary, stationary_marginal_check, trace_rng, Kernel,
};
use ruelle::paths::{hausdorff_distance, mc_apply, point_segment_distance, sample_path, PathPotential, PolygonalPath};
use ruelle::potential::{Potential, PotentialSpec};
use ruelle::seqspace::{fmt_f64, GridShape, TruncatedPoint};
use ruelle::thermo::{beta_scan, equilibrium_from_triple, pressure_convexity_probe, variational_check};
use ruelle::transfer::{eigen_triple, spectral_gap_estimate, DiscreteMeasure, EigenTriple};

use crate::config::RunConfig;
use crate::{Command, Failure, Outcome};

pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome, Failure> {
    match command {
        Command::Eigen => eigen(cfg),
        Command::Pressure => pressure(cfg),
        Command::Equilibrium => equilibrium(cfg),
        Command::Betascan => betascan(cfg),
        Command::MarkovSim => markov_sim(cfg),
        Command::Ergodicity => ergodicity(cfg),
        Command::Clt => clt(cfg),
        Command::Convexity => convexity(cfg),
        Command::PathsDemo => paths_demo(cfg),
    }
}

/// Solve and hold the result to `residual_tol`.
fn solve(cfg: &RunConfig, f: &Potential, grid: &Grid) -> Result<EigenTriple, Failure> {
    let triple = eigen_triple(f, grid, cfg.solver()?)?;
    let worst = triple.eigen_residual.max(triple.conformality_residual);
    if worst > cfg.residual_tol {
        return Err(Failure::Convergence {
            message: format!(
                "eigen residual {:.3e} / conformality residual {:.3e} exceed residual_tol {:.1e}",
                triple.eigen_residual, triple.conformality_residual, cfg.residual_tol
            ),
            history: triple.history,
        });
    }
    Ok(triple)
}

fn csv(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = format!("{header}\n");
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn marginal_csv(marginal: &[f64]) -> String {
    csv(
        "symbol,mass",
        marginal.iter().enumerate().map(|(a, m)| vec![a.to_string(), fmt_f64(*m)]),
    )
}

fn triple_summary(t: &EigenTriple) -> serde_json::Value {
    json!({
        "log_lambda": t.log_lambda,
        "lambda": t.lambda,
        "eigen_residual": t.eigen_residual,
        "conformality_residual": t.conformality_residual,
        "iterations": t.iterations,
        "dual_iterations": t.dual_iterations,
        "s_estimate": t.s_estimate,
        "log_lambda_crosscheck": t.log_lambda_crosscheck,
        "pruned_mass": t.pruned_mass,
        "h_min": t.h.min(),
        "h_max": t.h.max(),
        "nu_marginal": t.nu.marginal(0),
    })
}

fn eigen(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let grid = cfg.grid()?;
    let f = cfg.potential(&grid)?;
    let triple = solve(cfg, &f, &grid)?;
    let n_max = cfg.params.n_max.max(2);
    let gap = spectral_gap_estimate(&triple, 2, n_max)?;
    let history = csv(
        "iteration,bracket_width",
        triple
            .history
            .iter()
            .enumerate()
            .map(|(k, w)| vec![(k + 1).to_string(), fmt_f64(*w)]),
    );
    let gap_csv = csv(
        "n,error",
        gap.errors
            .iter()
            .enumerate()
            .map(|(k, e)| vec![(k + 1).to_string(), fmt_f64(*e)]),
    );
    Ok(Outcome {
        results: json!({ "triple": triple_summary(&triple), "spectral_gap": gap.fit }),
        files: vec![
            ("eigenfunction.csv".into(), triple.h.to_csv()),
            ("conformal_measure.csv".into(), triple.nu.to_csv()),
            ("history.csv".into(), history),
            ("spectral_gap.csv".into(), gap_csv),
        ],
    })
}

fn pressure(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let grid = cfg.grid()?;
    let f = cfg.potential(&grid)?;
    let t = solve(cfg, &f, &grid)?;
    let table = csv(
        "log_lambda,lambda,eigen_residual,conformality_residual",
        [vec![
            fmt_f64(t.log_lambda),
            fmt_f64(t.lambda),
            fmt_f64(t.eigen_residual),
            fmt_f64(t.conformality_residual),
        ]],
    );
    Ok(Outcome {
        results: json!({ "pressure": t.log_lambda, "lambda": t.lambda }),
        files: vec![("pressure.csv".into(), table)],
    })
}

/// Non-equilibrium candidates on `shape` and the dictionary entries that
/// make their entropy estimates sharp.
fn candidates(grid: &Grid, shape: GridShape, anchor: usize) -> Result<(Vec<(String, DiscreteMeasure)>, Vec<Potential>), Failure> {
    let n = grid.len();
    let mut out = Vec::new();
    let mut dictionary = Vec::new();
    let diracs: Vec<usize> = if n <= 8 { (0..n).collect() } else { vec![0, n - 1] };
    for a in diracs {
        let word = shape.encode(&vec![a; shape.depth]);
        out.push((format!("dirac_{a}"), DiscreteMeasure::dirac(shape, anchor, word)?));
    }
    let marginals: Vec<(String, Vec<f64>)> = if n == 2 {
        [0.1, 0.3, 0.5, 0.7, 0.9]
            .iter()
            .map(|q| (format!("bernoulli_{q}"), vec![1.0 - q, *q]))
            .collect()
    } else {
        vec![("product_apriori".into(), grid.weights().to_vec())]
    };
    for (name, q) in marginals {
        out.push((name.clone(), DiscreteMeasure::product(shape, anchor, &q)?));
        if q.iter().all(|&x| x > 0.0) && grid.weights().iter().all(|&w| w > 0.0) {
            let table = q.iter().zip(grid.weights()).map(|(q, p)| (q / p).ln()).collect();
            dictionary.push(Potential::first_coordinate(table)?.named(format!("log_density_{name}")));
        }
    }
    Ok((out, dictionary))
}

fn equilibrium(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let grid = cfg.grid()?;
    let f = cfg.potential(&grid)?;
    let solver = cfg.solver()?;
    let state = equilibrium_from_triple(&f, solve(cfg, &f, &grid)?)?;
    let (mut cands, mut extra) = candidates(&grid, state.measure.shape(), solver.anchor)?;
    cands.insert(0, ("equilibrium".into(), state.measure.clone()));
    for beta in [0.5, 2.0] {
        extra.push(f.scaled(beta).named(format!("beta_{beta}")));
    }
    let report = variational_check(&f, &cands, &extra, &grid, solver)?;
    let rows = report.rows.iter().map(|r| {
        vec![
            r.candidate.clone(),
            fmt_f64(r.entropy_estimate),
            r.entropy_argmin.clone(),
            fmt_f64(r.integral),
            fmt_f64(r.deficit),
            fmt_f64(r.invariance_residual),
        ]
    });
    let variational = csv(
        "candidate,entropy_estimate,entropy_argmin,integral,deficit,invariance_residual",
        rows,
    );
    Ok(Outcome {
        results: json!({
            "pressure": state.pressure,
            "entropy": state.entropy,
            "potential_integral": state.potential_integral,
            "variational_gap": state.variational_gap,
            "invariance_residual": state.invariance_residual,
            "normalization_residual": state.normalized.residual,
            "fbar_depth": state.normalized.depth,
            "min_deficit": report.min_deficit(),
            "triple": triple_summary(&state.triple),
        }),
        files: vec![
            ("equilibrium_measure.csv".into(), state.measure.to_csv()),
            ("marginal.csv".into(), marginal_csv(&state.measure.marginal(0))),
            ("variational.csv".into(), variational),
        ],
    })
}

fn betascan(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let grid = cfg.grid()?;
    let f = cfg.potential(&grid)?;
    let scan = beta_scan(&f, &cfg.params.betas, &grid, cfg.solver()?)?;
    let mut header = String::from("beta,log_lambda,mean_f,entropy,iterations");
    for a in 0..grid.len() {
        header.push_str(&format!(",marginal_{a}"));
    }
    let rows = scan.rows.iter().map(|r| {
        let mut row = vec![
            fmt_f64(r.beta),
            fmt_f64(r.log_lambda),
            fmt_f64(r.mean_f),
            fmt_f64(r.entropy),
            r.iterations.to_string(),
        ];
        row.extend(r.marginal.iter().map(|m| fmt_f64(*m)));
        row
    });
    Ok(Outcome {
        results: json!({ "m_estimate": scan.m_estimate, "failure": scan.failure }),
        files: vec![("betascan.csv".into(), csv(&header, rows))],
    })
}

fn kernel(cfg: &RunConfig) -> Result<(Grid, Kernel), Failure> {
    let grid = cfg.grid()?;
    let f = cfg.potential(&grid)?;
    let k = normalized_kernel(&f, &grid, cfg.solver()?)?;
    Ok((grid, k))
}

fn point(k: &Kernel, word: &[usize]) -> TruncatedPoint {
    let depth = k.shape().depth;
    let mut w: Vec<usize> = word.iter().copied().take(depth).collect();
    w.resize(depth, k.anchor());
    TruncatedPoint::new(w, k.anchor())
}

fn markov_sim(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let (grid, k) = kernel(cfg)?;
    let p = &cfg.params;
    let trace = match &p.start {
        Some(word) => simulate_chain(&k, &point(&k, word), p.steps, cfg.seed)?,
        None => simulate_stationary(&k, p.steps, cfg.seed, 0)?,
    };
    let mut counts = vec![0usize; grid.len()];
    for a in trace.first_symbols() {
        counts[a] += 1;
    }
    let total = trace.states.len() as f64;
    let stationary = k.stationary().marginal(0);
    let marginal = csv(
        "symbol,empirical,stationary",
        counts
            .iter()
            .zip(&stationary)
            .enumerate()
            .map(|(a, (c, s))| vec![a.to_string(), fmt_f64(*c as f64 / total), fmt_f64(*s)]),
    );
    Ok(Outcome {
        results: json!({
            "steps": trace.steps(),
            "window_depth": k.shape().depth,
            "normalization_residual": k.normalization_residual(),
            "stationary_start": p.start.is_none(),
        }),
        files: vec![("trace.csv".into(), trace.to_csv()), ("marginal.csv".into(), marginal)],
    })
}

fn ergodicity(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let (grid, k) = kernel(cfg)?;
    let p = &cfg.params;
    let solver = cfg.solver()?;
    let starts: Vec<TruncatedPoint> = match &p.starts {
        Some(words) => words.iter().map(|w| point(&k, w)).collect(),
        None => (0..grid.len().min(4))
            .map(|a| TruncatedPoint::new(vec![a; k.shape().depth], k.anchor()))
            .collect(),
    };
    let fit = geometric_ergodicity_fit(&k, &starts, p.n_max, solver.atom_cap)?;
    let pairs = random_pairs(k.shape(), k.anchor(), p.contraction_pairs, p.contraction_support, cfg.seed)?;
    let contraction = operator_contraction_estimate(&k, &pairs, p.contraction_m, solver.atom_cap)?;
    let stationary = stationary_marginal_check(&k).ok();

    let distances = csv(
        "start,n,distance",
        fit.distances.iter().enumerate().flat_map(|(s, row)| {
            row.iter()
                .enumerate()
                .map(move |(n, d)| vec![s.to_string(), (n + 1).to_string(), fmt_f64(*d)])
        }),
    );
    let ratios = csv(
        "pair,ratio",
        contraction
            .ratios
            .iter()
            .enumerate()
            .map(|(i, r)| vec![i.to_string(), r.map(fmt_f64).unwrap_or_default()]),
    );
    Ok(Outcome {
        results: json!({
            "window_depth": k.shape().depth,
            "fit": fit.fit,
            "fit_from": fit.fit_from,
            "max_increase": fit.max_increase,
            "metric_constant": fit.metric_constant,
            "alpha": fit.alpha,
            "pruned_mass": fit.pruned_mass,
            "contraction": {
                "m": p.contraction_m,
                "t_hat": contraction.t_hat,
                "contracting": contraction.contracting,
                "skipped": contraction.skipped,
            },
            "stationary_marginal": stationary,
        }),
        files: vec![
            ("ergodicity.csv".into(), distances),
            ("contraction.csv".into(), ratios),
        ],
    })
}

fn clt(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let (grid, k) = kernel(cfg)?;
    let p = &cfg.params;
    let xi = match &p.xi {
        Some(spec) => spec.build(&grid)?,
        None => PotentialSpec::FirstCoordinatePoly { coeffs: vec![0.0, 1.0] }.build(&grid)?,
    };
    let var = clt_variance(&k, &xi, p.lag_max, p.variance_n, p.variance_samples, cfg.seed)?;
    let check = clt_check(&k, &xi, p.n, p.samples, cfg.seed, var.s2)?;
    let mut rate = Vec::new();
    for &n in &p.rate_ns {
        let c = clt_check(&k, &xi, n, p.samples, cfg.seed, var.s2)?;
        rate.push(vec![
            n.to_string(),
            fmt_f64(c.ks_stat),
            fmt_f64(c.ks_stat * (n as f64).sqrt()),
            fmt_f64(c.threshold),
        ]);
    }
    let mut files = vec![
        (
            "clt_sums.csv".to_string(),
            csv(
                "trace,normalized_sum",
                check
                    .normalized_sums
                    .iter()
                    .enumerate()
                    .map(|(i, z)| vec![i.to_string(), fmt_f64(*z)]),
            ),
        ),
        ("clt_histogram.csv".into(), check.histogram_csv(p.histogram_bins)),
        (
            "autocovariance.csv".into(),
            csv(
                "lag,gamma",
                var.autocovariances
                    .iter()
                    .enumerate()
                    .map(|(l, g)| vec![l.to_string(), fmt_f64(*g)]),
            ),
        ),
    ];
    if !rate.is_empty() {
        files.push(("clt_rate.csv".into(), csv("n,ks_stat,ks_sqrt_n,threshold", rate)));
    }
    Ok(Outcome {
        results: json!({
            "window_depth": k.shape().depth,
            "xi_mean": var.mean,
            "s2": var.s2,
            "s2_autocovariance": var.autocovariance_estimate,
            "s2_direct": var.direct_estimate,
            "warning": var.warning,
            "ks_stat": check.ks_stat,
            "threshold": check.threshold,
            "pass": check.pass,
        }),
        files,
    })
}

fn convexity(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let grid = cfg.grid()?;
    let f = cfg.potential(&grid)?;
    let g = match &cfg.params.other {
        Some(spec) => spec.build(&grid)?,
        None => Potential::zero(),
    };
    let rows = pressure_convexity_probe(&f, &g, &cfg.params.ts, &grid, cfg.solver()?)?;
    let min_slack = rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
    let table = csv(
        "t,pressure,chord,slack",
        rows.iter()
            .map(|r| vec![fmt_f64(r.t), fmt_f64(r.pressure), fmt_f64(r.chord), fmt_f64(r.slack)]),
    );
    Ok(Outcome {
        results: json!({ "min_slack": min_slack }),
        files: vec![("convexity.csv".into(), table)],
    })
}

/// Directed Hausdorff distance from `a` to `b` by sampling `a` densely.
fn dense_directed(a: &PolygonalPath, b: &PolygonalPath, resolution: usize) -> f64 {
    let mut best: f64 = 0.0;
    for w in a.vertices().windows(2) {
        for k in 0..=resolution {
            let t = k as f64 / resolution as f64;
            let p: Vec<f64> = w[0].iter().zip(&w[1]).map(|(x, y)| x + t * (y - x)).collect();
            let d = b
                .vertices()
                .windows(2)
                .map(|s| point_segment_distance(&p, &s[0], &s[1]))
                .fold(f64::INFINITY, f64::min);
            best = best.max(d);
        }
    }
    best
}

fn paths_demo(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let p = &cfg.params.paths;
    if p.vertices < 2 || p.dim == 0 || p.config_len == 0 || p.dense_resolution < 2 {
        return Err(Failure::Validation(
            "paths needs vertices ≥ 2, dim ≥ 1, config_len ≥ 1 and dense_resolution ≥ 2".into(),
        ));
    }
    let potential = PathPotential::new(p.j0, p.r, p.alpha)?;
    let mut rng = trace_rng(cfg.seed, 0);

    let mut hausdorff_rows = Vec::with_capacity(p.pairs);
    let mut worst_hausdorff: f64 = 0.0;
    for i in 0..p.pairs {
        let a = sample_path(p.dim, p.vertices, &mut rng);
        let b = sample_path(p.dim, p.vertices, &mut rng);
        let exact = hausdorff_distance(&a, &b, p.dense_resolution)?;
        let dense = dense_directed(&a, &b, p.dense_resolution).max(dense_directed(&b, &a, p.dense_resolution));
        worst_hausdorff = worst_hausdorff.max((exact - dense).abs());
        hausdorff_rows.push(vec![i.to_string(), fmt_f64(exact), fmt_f64(dense), fmt_f64((exact - dense).abs())]);
    }

    let (lo, hi) = potential.bounds();
    let mut potential_rows = Vec::with_capacity(p.configurations);
    let (mut bound_violations, mut worst_translation) = (0usize, 0.0f64);
    for i in 0..p.configurations {
        let config: Vec<PolygonalPath> = (0..p.config_len).map(|_| sample_path(p.dim, p.vertices, &mut rng)).collect();
        let shift: Vec<f64> = (0..p.dim).map(|_| 10.0 * (rng.random::<f64>() - 0.5)).collect();
        let moved: Vec<PolygonalPath> = config.iter().map(|g| g.translated(&shift)).collect();
        let value = potential.evaluate(&config)?;
        let translated = potential.evaluate(&moved)?;
        if value < lo - 1e-12 || value > hi + 1e-12 {
            bound_violations += 1;
        }
        worst_translation = worst_translation.max((value - translated).abs());
        potential_rows.push(vec![i.to_string(), fmt_f64(value), fmt_f64(translated)]);
    }

    let x: Vec<PolygonalPath> = (0..p.config_len).map(|_| sample_path(p.dim, p.vertices, &mut rng)).collect();
    let mut mc_rows = Vec::new();
    for &samples in &p.mc_samples {
        let est = mc_apply(|c| potential.evaluate(c), |_| 1.0, &x, p.vertices, p.dim, samples, cfg.seed)?;
        mc_rows.push(vec![samples.to_string(), fmt_f64(est.value), fmt_f64(est.stderr)]);
    }

    Ok(Outcome {
        results: json!({
            "terms": potential.terms,
            "bounds": [lo, hi],
            "max_hausdorff_discrepancy": worst_hausdorff,
            "bound_violations": bound_violations,
            "max_translation_change": worst_translation,
        }),
        files: vec![
            ("hausdorff.csv".into(), csv("pair,exact,dense,abs_error", hausdorff_rows)),
            ("path_potential.csv".into(), csv("config,value,translated_value", potential_rows)),
            ("mc_apply.csv".into(), csv("samples,value,stderr", mc_rows)),
        ],
    })
}
