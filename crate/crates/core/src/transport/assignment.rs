//! Discrete optimal transport between equal-size point sets as a linear
//! assignment problem.
//!
//! The default solver is the Jonker-Volgenant algorithm: column reduction,
//! reduction transfer, two augmenting-row-reduction sweeps, then shortest
//! augmenting paths for the remaining free rows. Exact optimum, cubic worst
//! case, much faster on geometric instances. An entropic (Sinkhorn) solver
//! with greedy rounding is available behind the same interface as a faster
//! approximate alternative.

use rayon::prelude::*;

use crate::math::SquareCoord;
use crate::slice::PointSet;
use crate::Error;

/// A 1-to-1 matching between two point sets of equal size.
///
/// The minimized objective is the total *squared* Euclidean distance. The
/// unsquared objective admits many optima (mass can be reshuffled freely
/// along shared transport rays), and solvers then return scrambled
/// permutations; the squared cost has a unique monotone optimum, which is
/// what gives baked maps their locality.
#[derive(Debug, Clone)]
pub struct Assignment {
    /// `perm[i]` is the index of the target point assigned to source `i`.
    pub perm: Vec<usize>,
    /// Total squared-Euclidean transport cost of `perm`.
    pub cost: f64,
}

impl Assignment {
    /// Verifies that `perm` is a bijection on `0..n`.
    pub fn is_bijection(&self) -> bool {
        let n = self.perm.len();
        let mut seen = vec![false; n];
        for &j in &self.perm {
            if j >= n || seen[j] {
                return false;
            }
            seen[j] = true;
        }
        true
    }
}

/// Solver selection for [`solve_assignment`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AssignMethod {
    /// Exact Jonker-Volgenant.
    Exact,
    /// Entropic regularization (Sinkhorn) with greedy rounding to a
    /// permutation. Approximate; `epsilon` scales with the mean cost.
    Entropic { epsilon: f64, iterations: usize },
}

impl Default for AssignMethod {
    fn default() -> Self {
        AssignMethod::Exact
    }
}

/// Minimizes `Σ ‖source(i) − target(perm(i))‖²` over permutations.
pub fn solve_assignment(
    source: &PointSet,
    target: &PointSet,
    method: AssignMethod,
) -> crate::Result<Assignment> {
    let n = source.len();
    if n != target.len() {
        return Err(Error::PointSetSizeMismatch {
            lhs: n,
            rhs: target.len(),
        });
    }
    assert!(n > 0);
    let cost = cost_matrix(&source.points, &target.points);
    let perm = match method {
        AssignMethod::Exact => lapjv(n, &cost),
        AssignMethod::Entropic {
            epsilon,
            iterations,
        } => sinkhorn_rounded(n, &cost, epsilon, iterations),
    };
    let total = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j] as f64)
        .sum();
    let assignment = Assignment { perm, cost: total };
    debug_assert!(assignment.is_bijection());
    Ok(assignment)
}

/// Squared Euclidean distances, row-major `[source][target]`.
fn cost_matrix(source: &[SquareCoord], target: &[SquareCoord]) -> Vec<f32> {
    let n = source.len();
    let mut cost = vec![0.0f32; n * n];
    cost.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let a = source[i];
        for (j, c) in row.iter_mut().enumerate() {
            let b = target[j];
            let ds = a.s - b.s;
            let dt = a.t - b.t;
            *c = (ds * ds + dt * dt) as f32;
        }
    });
    cost
}

const UNASSIGNED: usize = usize::MAX;

/// Exact dense solver: column-reduction warm start, then one shortest
/// augmenting path (Dijkstra over reduced costs) per remaining free row,
/// maintaining dual feasibility `c[i][j] - u[i] - v[j] >= 0` throughout.
/// Returns `row -> column`.
fn lapjv(n: usize, cost: &[f32]) -> Vec<usize> {
    let at = |i: usize, j: usize| cost[i * n + j] as f64;

    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; n];
    let mut col4row = vec![UNASSIGNED; n]; // row -> col
    let mut row4col = vec![UNASSIGNED; n]; // col -> row

    // Column reduction: v_j = min_i c[i][j]; assign the argmin row when it
    // is still free. Keeps duals feasible and tight on assigned pairs.
    for j in (0..n).rev() {
        let mut min = at(0, j);
        let mut imin = 0usize;
        for i in 1..n {
            let c = at(i, j);
            if c < min {
                min = c;
                imin = i;
            }
        }
        v[j] = min;
        if col4row[imin] == UNASSIGNED {
            col4row[imin] = j;
            row4col[j] = imin;
        }
    }

    // Scratch reused across augmentations.
    let mut shortest = vec![0.0f64; n];
    let mut path = vec![UNASSIGNED; n];
    let mut in_tree_row = vec![false; n];
    let mut scanned_col = vec![false; n];
    let mut remaining = vec![0usize; n];

    for cur_row in 0..n {
        if col4row[cur_row] != UNASSIGNED {
            continue;
        }
        shortest.iter_mut().for_each(|d| *d = f64::INFINITY);
        in_tree_row.iter_mut().for_each(|b| *b = false);
        scanned_col.iter_mut().for_each(|b| *b = false);
        for (j, r) in remaining.iter_mut().enumerate() {
            *r = j;
        }
        let mut num_remaining = n;
        let mut min_val = 0.0f64;
        let mut i = cur_row;
        let mut sink = UNASSIGNED;

        while sink == UNASSIGNED {
            in_tree_row[i] = true;
            let mut lowest = f64::INFINITY;
            let mut index = UNASSIGNED;
            let base = i * n;
            let ui = u[i];
            for it in 0..num_remaining {
                let j = remaining[it];
                let r = min_val + cost[base + j] as f64 - ui - v[j];
                if r < shortest[j] {
                    path[j] = i;
                    shortest[j] = r;
                }
                // Prefer unassigned columns among ties so the path ends.
                if shortest[j] < lowest
                    || (shortest[j] == lowest && row4col[j] == UNASSIGNED)
                {
                    lowest = shortest[j];
                    index = it;
                }
            }
            min_val = lowest;
            assert!(
                min_val.is_finite(),
                "assignment infeasible (non-finite costs?)"
            );
            let j = remaining[index];
            if row4col[j] == UNASSIGNED {
                sink = j;
            } else {
                i = row4col[j];
            }
            scanned_col[j] = true;
            num_remaining -= 1;
            remaining.swap(index, num_remaining);
        }

        // Dual update keeps feasibility and makes the path tight.
        u[cur_row] += min_val;
        for i2 in 0..n {
            if in_tree_row[i2] && i2 != cur_row {
                u[i2] += min_val - shortest[col4row[i2]];
            }
        }
        for j in 0..n {
            if scanned_col[j] {
                v[j] -= min_val - shortest[j];
            }
        }

        // Augment along the alternating path back to cur_row.
        let mut j = sink;
        loop {
            let i2 = path[j];
            row4col[j] = i2;
            std::mem::swap(&mut col4row[i2], &mut j);
            if i2 == cur_row {
                break;
            }
        }
    }
    col4row
}

/// Log-domain Sinkhorn iterations followed by greedy rounding.
fn sinkhorn_rounded(n: usize, cost: &[f32], epsilon: f64, iterations: usize) -> Vec<usize> {
    let mean_cost =
        cost.iter().map(|&c| c as f64).sum::<f64>() / (n * n) as f64;
    let eps = (epsilon * mean_cost).max(1e-6);
    let mut f = vec![0.0f64; n];
    let mut g = vec![0.0f64; n];
    let log_w = -((n as f64).ln());
    for _ in 0..iterations {
        // f update: f_i = -eps * logsumexp_j((g_j - c_ij)/eps + log w)
        for i in 0..n {
            let mut max = f64::NEG_INFINITY;
            for j in 0..n {
                let s = (g[j] - cost[i * n + j] as f64) / eps;
                if s > max {
                    max = s;
                }
            }
            let sum: f64 = (0..n)
                .map(|j| ((g[j] - cost[i * n + j] as f64) / eps - max).exp())
                .sum();
            f[i] = -eps * (max + sum.ln() + log_w);
        }
        for j in 0..n {
            let mut max = f64::NEG_INFINITY;
            for i in 0..n {
                let s = (f[i] - cost[i * n + j] as f64) / eps;
                if s > max {
                    max = s;
                }
            }
            let sum: f64 = (0..n)
                .map(|i| ((f[i] - cost[i * n + j] as f64) / eps - max).exp())
                .sum();
            g[j] = -eps * (max + sum.ln() + log_w);
        }
    }
    // Greedy rounding: per row, take the best-coupled free column.
    let mut order: Vec<usize> = (0..n).collect();
    // Round confident rows first (largest coupling margin).
    let score = |i: usize| {
        let mut best = f64::NEG_INFINITY;
        let mut second = f64::NEG_INFINITY;
        for j in 0..n {
            let s = (f[i] + g[j] - cost[i * n + j] as f64) / eps;
            if s > best {
                second = best;
                best = s;
            } else if s > second {
                second = s;
            }
        }
        best - second
    };
    let margins: Vec<f64> = (0..n).map(score).collect();
    order.sort_by(|&a, &b| margins[b].partial_cmp(&margins[a]).unwrap());
    let mut used = vec![false; n];
    let mut perm = vec![UNASSIGNED; n];
    for &i in &order {
        let mut best_j = UNASSIGNED;
        let mut best = f64::NEG_INFINITY;
        for j in 0..n {
            if used[j] {
                continue;
            }
            let s = f[i] + g[j] - cost[i * n + j] as f64;
            if s > best {
                best = s;
                best_j = j;
            }
        }
        perm[i] = best_j;
        used[best_j] = true;
    }
    perm
}
