use proptest::prelude::*;

use ruelle::alphabet::{AprioriMeasure, Grid};
use ruelle::markov::normalized_kernel;
use ruelle::paths::{hausdorff_distance, PolygonalPath};
use ruelle::potential::Potential;
use ruelle::seqspace::{GridFunction, GridShape};
use ruelle::thermo::{beta_scan, equilibrium_state, pressure};
use ruelle::transfer::{eigen_triple, wasserstein, DiscreteMeasure, Operator, SolveConfig};

fn grid(weights: &[f64]) -> Grid {
    AprioriMeasure::weighted(weights.to_vec()).unwrap().grid().unwrap()
}

fn table2() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.5..1.5f64, 2), 2)
}

fn weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.1..1.0f64, 2..=3).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

fn measure(shape: GridShape) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((0..shape.len(), 0.05..1.0f64), 1..=5)
        .prop_map(move |atoms| DiscreteMeasure::new(shape, 0, atoms).unwrap().normalized().unwrap())
}

fn path() -> impl Strategy<Value = PolygonalPath> {
    prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 2), 4)
        .prop_map(|v| PolygonalPath::new(v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn words_round_trip(nodes in 1usize..5, depth in 1usize..6, seed in any::<usize>()) {
        let shape = GridShape::new(nodes, depth);
        let i = seed % shape.len();
        let w = shape.decode(i);
        prop_assert_eq!(shape.encode(&w), i);
        for a in 0..nodes {
            let p = shape.prepend(a, i);
            prop_assert_eq!(shape.digit(p, 0), a);
            // Shifting a prepended word gives back the word with its last
            // coordinate replaced by the anchor.
            prop_assert_eq!(shape.shift(p, 0), (i / nodes) * nodes);
        }
    }

    #[test]
    fn operator_is_positive_and_linear(t in table2(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let g = grid(&[0.5, 0.5]);
        let op = Operator::new(&Potential::two_coordinate(t).unwrap(), &g, 4, 0).unwrap();
        let shape = op.shape();
        let phi = GridFunction::from_fn(shape, |w| 1.0 + w[0] as f64 + 0.5 * w[2] as f64).unwrap();
        let psi = GridFunction::from_fn(shape, |w| (w[1] as f64 - 0.5) * w[3] as f64).unwrap();
        let lp = op.apply(&phi).unwrap();
        prop_assert!(lp.values.iter().all(|&v| v > 0.0));
        let combo = phi.zip_with(&psi, |x, y| a * x + b * y).unwrap();
        let lhs = op.apply(&combo).unwrap();
        let lq = op.apply(&psi).unwrap();
        for i in 0..shape.len() {
            let rhs = a * lp.values[i] + b * lq.values[i];
            prop_assert!((lhs.values[i] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn pressure_shifts_with_constants(t in table2(), c in -5.0..5.0f64) {
        let g = grid(&[0.5, 0.5]);
        let cfg = SolveConfig::new(5);
        let f = Potential::two_coordinate(t).unwrap();
        let p = pressure(&f, &g, &cfg).unwrap();
        let q = pressure(&f.plus_constant(c), &g, &cfg).unwrap();
        prop_assert!((q - p - c).abs() < 1e-10);
        // P(f) lies between the extreme values of f.
        prop_assert!(p >= f.tabulate(GridShape::new(2, 2), 0).unwrap().min() - 1e-12);
    }

    #[test]
    fn equilibrium_states_are_invariant_probabilities(t in table2(), w in weights()) {
        let n = w.len();
        let table: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| t[i % 2][j % 2]).collect()).collect();
        let g = grid(&w);
        let f = Potential::two_coordinate(table).unwrap();
        let st = equilibrium_state(&f, &g, &SolveConfig::new(4)).unwrap();
        prop_assert!(st.measure.is_probability(1e-12));
        prop_assert!(st.invariance_residual < 1e-9);
        prop_assert!(st.entropy <= 1e-12);
        prop_assert!(st.variational_gap < 1e-9);
        prop_assert!(st.normalized.residual < 1e-10);
    }

    #[test]
    fn mean_potential_grows_with_beta(t in table2()) {
        // d/dβ P(βf) = ⟨μ_{βf}, f⟩ and P is convex in β.
        let f = Potential::two_coordinate(t).unwrap();
        let betas = [0.0, 0.5, 1.0, 2.0, 4.0];
        let cfg = SolveConfig { max_iter: 200_000, ..SolveConfig::new(4) };
        let scan = beta_scan(&f, &betas, &grid(&[0.5, 0.5]), &cfg).unwrap();
        prop_assert!(scan.failure.is_none(), "{:?}", scan.failure);
        for w in scan.rows.windows(2) {
            prop_assert!(w[1].mean_f >= w[0].mean_f - 1e-10);
            prop_assert!(w[1].log_lambda - w[0].log_lambda >= (w[1].beta - w[0].beta) * w[0].mean_f - 1e-10);
        }
    }

    #[test]
    fn conformal_measure_is_fixed_by_the_kernel(t in table2()) {
        let g = grid(&[0.3, 0.7]);
        let f = Potential::two_coordinate(t).unwrap();
        let k = normalized_kernel(&f, &g, &SolveConfig::new(4)).unwrap();
        let shape = k.shape();
        let nu = k.stationary().dense();
        let mut pushed = vec![0.0; shape.len()];
        for x in 0..shape.len() {
            let row = k.row(x);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (a, p) in row.iter().enumerate() {
                pushed[shape.prepend(a, x)] += nu[x] * p;
            }
        }
        let worst = pushed.iter().zip(&nu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(worst < 1e-9, "worst {worst}");
    }

    #[test]
    fn wasserstein_is_symmetric_and_below_total_variation(
        mu in measure(GridShape::new(2, 4)),
        nu in measure(GridShape::new(2, 4)),
        c in 0.1..2.0f64,
        alpha in 0.2..1.0f64,
    ) {
        let g = grid(&[0.5, 0.5]);
        let ab = wasserstein(&g, &mu, &nu, c, alpha).unwrap();
        let ba = wasserstein(&g, &nu, &mu, c, alpha).unwrap();
        prop_assert!((ab - ba).abs() < 1e-10);
        prop_assert!(ab <= mu.tv_distance(&nu).unwrap() + 1e-12);
        prop_assert!(ab >= -1e-15);
    }

    #[test]
    fn hausdorff_is_a_metric(a in path(), b in path(), c in path(), dx in -4.0..4.0f64) {
        let d = |x: &PolygonalPath, y: &PolygonalPath| hausdorff_distance(x, y, 64).unwrap();
        prop_assert!(d(&a, &a) < 1e-12);
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-12);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        let (sa, sb) = (a.translated(&[dx, -dx]), b.translated(&[dx, -dx]));
        prop_assert!((d(&sa, &sb) - d(&a, &b)).abs() < 1e-9);
    }
}

#[test]
fn product_measure_has_product_cylinders() {
    let shape = GridShape::new(3, 4);
    let m = DiscreteMeasure::product(shape, 0, &[0.2, 0.3, 0.5]).unwrap();
    let p = [0.2, 0.3, 0.5];
    assert!((m.cylinder(&[2, 0, 1]) - 0.5 * 0.2 * 0.3).abs() < 1e-15);
    for k in 0..4 {
        let marginal = m.marginal(k);
        for a in 0..3 {
            assert!((marginal[a] - p[a]).abs() < 1e-15);
        }
    }
}

#[test]
fn eigen_triple_for_weighted_first_coordinate() {
    // ℒ1 = Σ w_a e^{c_a} is constant, so h ≡ 1 and ν([a]) ∝ w_a e^{c_a}.
    let w = [0.2, 0.3, 0.5];
    let c = [0.4, -1.0, 0.1];
    let g = grid(&w);
    let t = eigen_triple(&Potential::first_coordinate(c.to_vec()).unwrap(), &g, &SolveConfig::new(4)).unwrap();
    let z: f64 = w.iter().zip(&c).map(|(a, b)| a * b.exp()).sum();
    assert!((t.lambda - z).abs() < 1e-12);
    for a in 0..3 {
        assert!((t.nu.cylinder(&[a]) - w[a] * c[a].exp() / z).abs() < 1e-12);
    }
    assert!(t.h.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
}
