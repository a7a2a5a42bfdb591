//! Gauss–Hermite rules for the standard normal weight.
//!
//! Nodes come from the Golub–Welsch eigenproblem for the probabilists'
//! Hermite recurrence and are then polished with Newton steps on the
//! orthonormal polynomial. Weights use the Christoffel formula
//! `w_i = 1 / sum_{k<q} p_k(x_i)^2`, which sums to one for the normal law.

use nalgebra::{DMatrix, SymmetricEigen};

/// A one-dimensional quadrature rule: nodes and probability weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Orthonormal Hermite values `p_0(x), .., p_{q}(x)` for the N(0,1) weight.
fn orthonormal_hermite(x: f64, q: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(q + 1);
    p.push(1.0);
    if q == 0 {
        return p;
    }
    p.push(x);
    for k in 1..q {
        let next = (x * p[k] - (k as f64).sqrt() * p[k - 1]) / ((k + 1) as f64).sqrt();
        p.push(next);
    }
    p
}

/// Gauss–Hermite rule of order `q` (exact for polynomials of degree `2q - 1`).
pub fn gauss_hermite(order: usize) -> Rule {
    assert!(order >= 1, "quadrature order must be positive");
    if order == 1 {
        return Rule {
            nodes: vec![0.0],
            weights: vec![1.0],
        };
    }
    let mut jacobi = DMatrix::<f64>::zeros(order, order);
    for k in 1..order {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    for x in nodes.iter_mut() {
        for _ in 0..8 {
            let p = orthonormal_hermite(*x, order);
            let derivative = (order as f64).sqrt() * p[order - 1];
            if derivative == 0.0 {
                break;
            }
            let step = p[order] / derivative;
            *x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
    }
    // the rule is symmetric; enforce it exactly
    let q = order;
    for i in 0..q / 2 {
        let m = 0.5 * (nodes[q - 1 - i] - nodes[i]);
        nodes[i] = -m;
        nodes[q - 1 - i] = m;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }

    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let p = orthonormal_hermite(x, order - 1);
            1.0 / p.iter().map(|v| v * v).sum::<f64>()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Rule { nodes, weights }
}

/// Equally spaced nodes on `[0, 2π)` with uniform weights.
pub fn periodic_trapezoid(nodes: usize) -> Rule {
    assert!(nodes >= 1, "trapezoid rule needs at least one node");
    let step = std::f64::consts::TAU / nodes as f64;
    Rule {
        nodes: (0..nodes).map(|i| i as f64 * step).collect(),
        weights: vec![1.0 / nodes as f64; nodes],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal_moment(k: u32) -> f64 {
        if k % 2 == 1 {
            0.0
        } else {
            // (k-1)!!
            (1..k).step_by(2).map(|j| j as f64).product()
        }
    }

    #[test]
    fn weights_sum_to_one() {
        for q in [1, 2, 3, 5, 10, 21, 40] {
            let rule = gauss_hermite(q);
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "q={q}");
            assert!(rule.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn exact_through_degree_2q_minus_1() {
        for q in [3usize, 7, 21] {
            let rule = gauss_hermite(q);
            for k in 0..(2 * q as u32) {
                let approx: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, w)| w * x.powi(k as i32))
                    .sum();
                let exact = normal_moment(k);
                // odd moments cancel pairwise, so rounding scales with E|X|^k
                let scale: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, w)| w * x.abs().powi(k as i32))
                    .sum::<f64>()
                    .max(1.0);
                assert!(
                    (approx - exact).abs() <= 1e-10 * scale,
                    "q={q} k={k} approx={approx} exact={exact}"
                );
            }
        }
    }

    #[test]
    fn trapezoid_is_uniform() {
        let rule = periodic_trapezoid(8);
        assert_eq!(rule.nodes.len(), 8);
        assert!((rule.nodes[4] - std::f64::consts::PI).abs() < 1e-15);
        assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
