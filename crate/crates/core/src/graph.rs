//! Threshold-filtered stock graphs and the power-law threshold criterion.
//!
//! An edge (i, j) exists iff |C_ij| >= rho for i != j; the signed correlation
//! is kept as the edge weight. All tickers stay as nodes, including isolated
//! ones, so component and resilience denominators use the full node count.

use crate::error::{Error, Result};
use crate::linalg::gauss_solve;
use crate::returns::CorrelationMatrix;

/// Weighted undirected graph over tickers.
#[derive(Debug, Clone)]
pub struct StockGraph {
    pub nodes: Vec<String>,
    /// Unordered edges stored as (i, j, weight) with i < j.
    pub edges: Vec<(usize, usize, f64)>,
    pub threshold: f64,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl StockGraph {
    pub fn from_edges(nodes: Vec<String>, edges: Vec<(usize, usize, f64)>, threshold: f64) -> Self {
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for &(i, j, w) in &edges {
            debug_assert!(i < j && j < nodes.len());
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }
        for list in adjacency.iter_mut() {
            list.sort_by_key(|&(n, _)| n);
        }
        StockGraph {
            nodes,
            edges,
            threshold,
            adjacency,
        }
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    pub fn degree_of(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }
}

/// Keeps edge (i, j) iff |C_ij| >= rho, preserving signed weights.
pub fn threshold_adjacency(corr: &CorrelationMatrix, rho: f64) -> StockGraph {
    let n = corr.n();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let w = corr.value(i, j);
            if w.abs() >= rho {
                edges.push((i, j, w));
            }
        }
    }
    StockGraph::from_edges(corr.tickers.clone(), edges, rho)
}

/// Outcome of the threshold scan.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ThresholdSelection {
    pub rho: f64,
    /// True when no grid point satisfied the convexity criterion and the
    /// default 0.9 was used instead.
    pub fallback: bool,
}

/// Log-binned degree histogram: bins [2^b, 2^(b+1)) over positive degrees.
/// Returns (ln bin-center, ln count) for populated bins.
fn log_binned_degree_points(degrees: &[usize]) -> Vec<(f64, f64)> {
    let max_deg = degrees.iter().copied().max().unwrap_or(0);
    if max_deg == 0 {
        return Vec::new();
    }
    let n_bins = (max_deg as f64).log2().floor() as usize + 1;
    let mut counts = vec![0usize; n_bins];
    for &d in degrees {
        if d > 0 {
            counts[(d as f64).log2().floor() as usize] += 1;
        }
    }
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(b, &c)| {
            let lo = (1u64 << b) as f64;
            let hi = (1u64 << (b + 1)) as f64;
            ((lo * hi).sqrt().ln(), (c as f64).ln())
        })
        .collect()
}

/// Least-squares quadratic coefficient of y = a2 x^2 + a1 x + a0.
fn quadratic_coefficient(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::input("need at least 3 points for a quadratic fit"));
    }
    let mut xtx = [0.0; 9];
    let mut xty = [0.0; 3];
    for &(x, y) in points {
        let basis = [1.0, x, x * x];
        for r in 0..3 {
            for c in 0..3 {
                xtx[r * 3 + c] += basis[r] * basis[c];
            }
            xty[r] += basis[r] * y;
        }
    }
    let coef = gauss_solve(&mut xtx, &mut xty, 3)?;
    Ok(coef[2])
}

/// Scans rho over [0.5, 0.99] and returns the smallest grid point whose
/// log-log binned degree histogram has a non-negative quadratic coefficient
/// (a convex, power-law-like tail). Falls back to 0.9 with a flag when no
/// grid point qualifies.
pub fn select_threshold(corr: &CorrelationMatrix, grid_step: f64) -> Result<ThresholdSelection> {
    if corr.n() < 10 {
        return Err(Error::input(
            "threshold selection needs at least 10 tickers",
        ));
    }
    if !(grid_step > 0.0) {
        return Err(Error::input("grid_step must be positive"));
    }
    let steps = ((0.99 - 0.5) / grid_step).round() as usize;
    for k in 0..=steps {
        let rho = 0.5 + k as f64 * grid_step;
        if rho > 0.99 + 1e-12 {
            break;
        }
        let graph = threshold_adjacency(corr, rho);
        let degrees: Vec<usize> = (0..graph.n()).map(|i| graph.degree_of(i)).collect();
        let points = log_binned_degree_points(&degrees);
        if points.len() < 3 {
            continue;
        }
        if let Ok(a2) = quadratic_coefficient(&points) {
            if a2 >= 0.0 {
                return Ok(ThresholdSelection {
                    rho,
                    fallback: false,
                });
            }
        }
    }
    Ok(ThresholdSelection {
        rho: 0.9,
        fallback: true,
    })
}
