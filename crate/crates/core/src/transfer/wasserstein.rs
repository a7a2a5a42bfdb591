//! Exact optimal transport between finitely supported measures.
//!
//! The transportation problem is solved with the primal simplex method on
//! spanning-tree bases (the MODI / stepping-stone scheme): a northwest-corner
//! start, row and column potentials kept on a rooted basis tree, block-search
//! pricing, and cycle pivots along the tree path.

use super::measure::DiscreteMeasure;
use crate::alphabet::Grid;
use crate::error::{Error, Result};
use crate::seqspace::{dbar_from_dx, grid_dx};

/// Largest support accepted on either side.
pub const MAX_SUPPORT: usize = 5000;

/// Optimal plan of a transportation problem.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub cost: f64,
    /// Basic cells `(row, column, flow)`, including degenerate zero flows.
    pub flows: Vec<(usize, usize, f64)>,
    pub pivots: usize,
}

/// Minimize `Σ c_ij x_ij` over `x ≥ 0` with row sums `supply` and column
/// sums `demand`; `cost` is row-major `m × n`.
pub fn transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportPlan> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Err(Error::usage("transport needs nonempty supports"));
    }
    if cost.len() != m * n {
        return Err(Error::usage("cost matrix has the wrong size"));
    }
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    if (total_s - total_d).abs() > 1e-9 * total_s.max(1.0) {
        return Err(Error::usage(format!("unbalanced transport: {total_s} vs {total_d}")));
    }

    // northwest corner: m + n - 1 cells forming a staircase tree
    let mut cells: Vec<(usize, usize)> = Vec::with_capacity(m + n - 1);
    let mut flow: Vec<f64> = Vec::with_capacity(m + n - 1);
    let (mut s, mut d) = (supply.to_vec(), demand.to_vec());
    let (mut i, mut j) = (0, 0);
    loop {
        let q = s[i].min(d[j]).max(0.0);
        cells.push((i, j));
        flow.push(q);
        s[i] -= q;
        d[j] -= q;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if j == n - 1 || (i < m - 1 && s[i] <= d[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }

    // Basis tree rooted at row 0: parent links, depths and node potentials
    // (`pot[r] + pot[m + c] = cost` on basic cells). A pivot only re-hangs
    // the subtree cut off by the leaving cell.
    let nodes = m + n;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for (k, &(r, c)) in cells.iter().enumerate() {
        adj[r].push(k);
        adj[m + c].push(k);
    }
    let mut parent = vec![usize::MAX; nodes];
    let mut pedge = vec![usize::MAX; nodes];
    let mut depth = vec![0usize; nodes];
    let mut pot = vec![0.0; nodes];
    let mut stack = Vec::with_capacity(nodes);

    let hang = |root: usize,
                cells: &[(usize, usize)],
                adj: &[Vec<usize>],
                parent: &mut [usize],
                pedge: &mut [usize],
                depth: &mut [usize],
                pot: &mut [f64],
                stack: &mut Vec<usize>| {
        stack.clear();
        stack.push(root);
        while let Some(node) = stack.pop() {
            for &k in &adj[node] {
                if k == pedge[node] {
                    continue;
                }
                let (r, c) = cells[k];
                let next = if node == r { m + c } else { r };
                parent[next] = node;
                pedge[next] = k;
                depth[next] = depth[node] + 1;
                pot[next] = cost[r * n + c] - pot[node];
                stack.push(next);
            }
        }
    };
    hang(0, &cells, &adj, &mut parent, &mut pedge, &mut depth, &mut pot, &mut stack);

    let max_cost = cost.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
    let eps = 1e-13 * max_cost.max(1.0);
    let block = ((m * n) as f64).sqrt().ceil().max(64.0) as usize;
    let pivot_cap = 50 * (m + n) * (m + n) + 10_000;
    let mut cursor = 0usize;
    let mut pivots = 0usize;
    let (mut up_row, mut up_col) = (Vec::new(), Vec::new());

    loop {
        // block pricing
        let total = m * n;
        let mut best = (-eps, usize::MAX);
        let mut scanned = 0;
        while scanned < total {
            let end = (scanned + block).min(total);
            for _ in scanned..end {
                let (r, c) = (cursor / n, cursor % n);
                let rc = cost[cursor] - pot[r] - pot[m + c];
                if rc < best.0 {
                    best = (rc, cursor);
                }
                cursor += 1;
                if cursor == total {
                    cursor = 0;
                }
            }
            scanned = end;
            if best.1 != usize::MAX {
                break;
            }
        }
        if best.1 == usize::MAX {
            break;
        }
        pivots += 1;
        if pivots > pivot_cap {
            return Err(Error::Convergence {
                iterations: pivots,
                last: best.0,
                tolerance: eps,
                history: Vec::new(),
            });
        }
        let (er, ec) = (best.1 / n, best.1 % n);

        // cycle: column ec up to the common ancestor, then down to row er
        up_row.clear();
        up_col.clear();
        let (mut x, mut y) = (er, m + ec);
        while x != y {
            if depth[x] >= depth[y] {
                up_row.push(pedge[x]);
                x = parent[x];
            } else {
                up_col.push(pedge[y]);
                y = parent[y];
            }
        }
        let path = up_col.iter().chain(up_row.iter().rev());
        // signs alternate -, +, -, ... starting at column ec
        let mut theta = f64::INFINITY;
        let mut leave = (usize::MAX, false);
        for (pos, &k) in path.clone().enumerate() {
            if pos % 2 == 0 && flow[k] < theta {
                theta = flow[k];
                leave = (k, pos < up_col.len());
            }
        }
        for (pos, &k) in path.enumerate() {
            if pos % 2 == 0 {
                flow[k] -= theta;
            } else {
                flow[k] += theta;
            }
        }
        let (leave, on_col_side) = leave;
        let (lr, lc) = cells[leave];
        adj[lr].retain(|&k| k != leave);
        adj[m + lc].retain(|&k| k != leave);
        cells[leave] = (er, ec);
        flow[leave] = theta;
        adj[er].push(leave);
        adj[m + ec].push(leave);

        // the side holding the leaving cell is re-hung from the other end
        let (inner, outer) = if on_col_side { (m + ec, er) } else { (er, m + ec) };
        parent[inner] = outer;
        pedge[inner] = leave;
        depth[inner] = depth[outer] + 1;
        pot[inner] = cost[er * n + ec] - pot[outer];
        hang(inner, &cells, &adj, &mut parent, &mut pedge, &mut depth, &mut pot, &mut stack);
    }

    let cost_value = cells
        .iter()
        .zip(&flow)
        .map(|(&(r, c), &x)| cost[r * n + c] * x)
        .sum();
    Ok(TransportPlan {
        cost: cost_value,
        flows: cells.iter().zip(&flow).map(|(&(r, c), &x)| (r, c, x)).collect(),
        pivots,
    })
}

/// Optimal transport cost between two probability measures on the same
/// grid under the ground metric `d̄ = min(1, 4 C_f d_X^α)`.
pub fn wasserstein(
    grid: &Grid,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    c_f: f64,
    alpha: f64,
) -> Result<f64> {
    mu.check_compatible(nu)?;
    if grid.len() != mu.shape().nodes {
        return Err(Error::usage("grid and measures disagree on node count"));
    }
    if !(c_f > 0.0) || !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::usage("Wasserstein needs C_f > 0 and alpha in (0, 1]"));
    }
    for (name, m) in [("first", mu), ("second", nu)] {
        if !m.is_probability(1e-10) {
            return Err(Error::usage(format!(
                "{name} measure has mass {}, not a probability",
                m.total_mass()
            )));
        }
    }
    let support = |m: &DiscreteMeasure| -> Vec<(usize, f64)> {
        m.atoms().iter().copied().filter(|a| a.1 > 0.0).collect()
    };
    let (a, b) = (support(mu), support(nu));
    if a.len() > MAX_SUPPORT || b.len() > MAX_SUPPORT {
        return Err(Error::usage(format!(
            "supports of {} and {} atoms exceed {MAX_SUPPORT}",
            a.len(),
            b.len()
        )));
    }
    // d̄ is a metric, so W₁ only sees μ - ν: shared mass stays in place.
    let (mut excess, mut deficit) = (Vec::new(), Vec::new());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let (x, diff) = match (a.get(i), b.get(j)) {
            (Some(&(x, wx)), Some(&(y, wy))) if x == y => {
                i += 1;
                j += 1;
                (x, wx - wy)
            }
            (Some(&(x, wx)), Some(&(y, _))) if x < y => {
                i += 1;
                (x, wx)
            }
            (Some(&(x, wx)), None) => {
                i += 1;
                (x, wx)
            }
            (_, Some(&(y, wy))) => {
                j += 1;
                (y, -wy)
            }
            (None, None) => unreachable!(),
        };
        if diff > 0.0 {
            excess.push((x, diff));
        } else if diff < 0.0 {
            deficit.push((x, -diff));
        }
    }
    if excess.is_empty() || deficit.is_empty() {
        return Ok(0.0);
    }
    let shape = mu.shape();
    let mut cost = Vec::with_capacity(excess.len() * deficit.len());
    for &(x, _) in &excess {
        for &(y, _) in &deficit {
            cost.push(dbar_from_dx(grid_dx(grid, shape, x, y), c_f, alpha));
        }
    }
    let supply: Vec<f64> = excess.iter().map(|p| p.1).collect();
    let mut demand: Vec<f64> = deficit.iter().map(|p| p.1).collect();
    // rebalance rounding so both sides carry the same mass
    let ratio = supply.iter().sum::<f64>() / demand.iter().sum::<f64>();
    demand.iter_mut().for_each(|w| *w *= ratio);
    Ok(transport(&supply, &demand, &cost)?.cost.max(0.0))
}
