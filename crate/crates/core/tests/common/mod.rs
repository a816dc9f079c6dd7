//! Independent reference implementations ("oracles") used only by the
//! acceptance suite. Everything here is implemented with different
//! algorithms than the library (Floyd–Warshall instead of BFS, matrix-power
//! path counting instead of Brandes, Jacobi sweeps instead of power
//! iteration, quadrature instead of continued fractions, QR instead of
//! Cholesky) so agreement is meaningful.

#![allow(dead_code)]

use marketnet_core::graph::StockGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// graph generators
// ---------------------------------------------------------------------------

pub fn random_graph(n: usize, p: f64, seed: u64) -> StockGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < p {
                let w: f64 = rng.gen_range(0.1..1.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
                edges.push((i, j, w));
            }
        }
    }
    StockGraph::from_edges((0..n).map(|i| format!("N{i}")).collect(), edges, 0.0)
}

/// Connected graph: random spanning tree plus extra random edges.
pub fn random_connected_graph(n: usize, extra_p: f64, seed: u64) -> StockGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    let mut present = vec![false; n * n];
    for v in 1..n {
        let u = rng.gen_range(0..v);
        edges.push((u, v, rng.gen_range(0.1..1.0)));
        present[u * n + v] = true;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if !present[i * n + j] && rng.gen::<f64>() < extra_p {
                edges.push((i, j, rng.gen_range(0.1..1.0)));
            }
        }
    }
    StockGraph::from_edges((0..n).map(|i| format!("N{i}")).collect(), edges, 0.0)
}

// ---------------------------------------------------------------------------
// shortest-path oracles
// ---------------------------------------------------------------------------

/// All-pairs hop distances by Floyd–Warshall; `None` = unreachable.
pub fn floyd_warshall(g: &StockGraph) -> Vec<Vec<Option<usize>>> {
    let n = g.n();
    const INF: usize = usize::MAX / 4;
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(i, j, _) in &g.edges {
        d[i][j] = 1;
        d[j][i] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d.into_iter()
        .map(|row| {
            row.into_iter()
                .map(|v| if v >= INF { None } else { Some(v) })
                .collect()
        })
        .collect()
}

pub fn closeness_oracle(g: &StockGraph) -> Vec<f64> {
    let dist = floyd_warshall(g);
    (0..g.n())
        .map(|u| {
            let total: usize = dist[u].iter().flatten().sum();
            if total == 0 {
                0.0
            } else {
                1.0 / total as f64
            }
        })
        .collect()
}

/// Shortest-path counts via adjacency-matrix powers: the number of shortest
/// s→t paths equals the number of length-d(s,t) walks from s to t.
fn shortest_path_counts(g: &StockGraph, dist: &[Vec<Option<usize>>]) -> Vec<Vec<f64>> {
    let n = g.n();
    let mut adj = vec![0.0f64; n * n];
    for &(i, j, _) in &g.edges {
        adj[i * n + j] = 1.0;
        adj[j * n + i] = 1.0;
    }
    let max_d = dist
        .iter()
        .flatten()
        .flatten()
        .copied()
        .max()
        .unwrap_or(0);
    // powers[k] = A^k
    let mut powers: Vec<Vec<f64>> = Vec::with_capacity(max_d + 1);
    let mut ident = vec![0.0f64; n * n];
    for i in 0..n {
        ident[i * n + i] = 1.0;
    }
    powers.push(ident);
    for k in 1..=max_d {
        let prev = &powers[k - 1];
        let mut next = vec![0.0f64; n * n];
        for i in 0..n {
            for l in 0..n {
                let a = prev[i * n + l];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    next[i * n + j] += a * adj[l * n + j];
                }
            }
        }
        powers.push(next);
    }
    let mut sigma = vec![vec![0.0f64; n]; n];
    for s in 0..n {
        for t in 0..n {
            if let Some(d) = dist[s][t] {
                sigma[s][t] = powers[d][s * n + t];
            }
        }
    }
    sigma
}

/// Betweenness from the pair-dependency definition:
/// c(v) = Σ_{s<t, v∉{s,t}} σ_st(v)/σ_st with σ_st(v) = σ_sv σ_vt when
/// d(s,v)+d(v,t)=d(s,t).
pub fn betweenness_oracle(g: &StockGraph) -> Vec<f64> {
    let n = g.n();
    let dist = floyd_warshall(g);
    let sigma = shortest_path_counts(g, &dist);
    let mut c = vec![0.0; n];
    for s in 0..n {
        for t in (s + 1)..n {
            let dst = match dist[s][t] {
                Some(d) => d,
                None => continue,
            };
            for v in 0..n {
                if v == s || v == t {
                    continue;
                }
                if let (Some(dsv), Some(dvt)) = (dist[s][v], dist[v][t]) {
                    if dsv + dvt == dst {
                        c[v] += sigma[s][v] * sigma[v][t] / sigma[s][t];
                    }
                }
            }
        }
    }
    c
}

// ---------------------------------------------------------------------------
// local-structure oracles
// ---------------------------------------------------------------------------

/// Weight-aware clustering from the dense matrices:
/// c_i = 1/(s_i (k_i−1)) Σ_{j≠h} (|w_ij|+|w_ih|)/2 · a_ij a_ih a_jh.
pub fn clustering_oracle(g: &StockGraph) -> Vec<f64> {
    let n = g.n();
    let mut w = vec![0.0f64; n * n];
    for &(i, j, weight) in &g.edges {
        w[i * n + j] = weight.abs();
        w[j * n + i] = weight.abs();
    }
    (0..n)
        .map(|i| {
            let k = (0..n).filter(|&j| w[i * n + j] > 0.0).count();
            if k < 2 {
                return 0.0;
            }
            let strength: f64 = (0..n).map(|j| w[i * n + j]).sum();
            let mut sum = 0.0;
            for j in 0..n {
                for h in 0..n {
                    if j != h && w[i * n + j] > 0.0 && w[i * n + h] > 0.0 && w[j * n + h] > 0.0 {
                        sum += (w[i * n + j] + w[i * n + h]) / 2.0;
                    }
                }
            }
            sum / (strength * (k - 1) as f64)
        })
        .collect()
}

/// Modularity from the pairwise definition:
/// Q = (1/2m) Σ_{uv} (A_uv − k_u k_v / 2m) δ(c_u, c_v).
pub fn modularity_oracle(g: &StockGraph, assignments: &[usize]) -> f64 {
    let n = g.n();
    let m = g.edge_count() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let mut adj = vec![0.0f64; n * n];
    for &(i, j, _) in &g.edges {
        adj[i * n + j] = 1.0;
        adj[j * n + i] = 1.0;
    }
    let deg: Vec<f64> = (0..n).map(|i| (0..n).map(|j| adj[i * n + j]).sum()).collect();
    let mut q = 0.0;
    for u in 0..n {
        for v in 0..n {
            if assignments[u] == assignments[v] {
                q += adj[u * n + v] - deg[u] * deg[v] / (2.0 * m);
            }
        }
    }
    q / (2.0 * m)
}

/// Largest connected component via union-find.
pub fn largest_component_oracle(g: &StockGraph) -> usize {
    let n = g.n();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    for &(i, j, _) in &g.edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
        }
    }
    let mut counts = vec![0usize; n];
    for x in 0..n {
        let r = find(&mut parent, x);
        counts[r] += 1;
    }
    counts.into_iter().max().unwrap_or(0)
}

/// Scripted resilience: remove ⌊f·n⌋ nodes by (degree desc, index asc),
/// rebuild, and measure the surviving giant component against the original
/// node count.
pub fn resilience_oracle(g: &StockGraph, f: f64) -> f64 {
    let n = g.n();
    if n == 0 {
        return 0.0;
    }
    let n_remove = ((f * n as f64).floor() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| g.degree_of(b).cmp(&g.degree_of(a)).then(a.cmp(&b)));
    let removed: Vec<bool> = {
        let mut flags = vec![false; n];
        for &v in order.iter().take(n_remove) {
            flags[v] = true;
        }
        flags
    };
    let kept: Vec<usize> = (0..n).filter(|&v| !removed[v]).collect();
    if kept.is_empty() {
        return 0.0;
    }
    let index_of: Vec<Option<usize>> = {
        let mut map = vec![None; n];
        for (new, &old) in kept.iter().enumerate() {
            map[old] = Some(new);
        }
        map
    };
    let sub_edges: Vec<(usize, usize, f64)> = g
        .edges
        .iter()
        .filter_map(|&(i, j, w)| match (index_of[i], index_of[j]) {
            (Some(a), Some(b)) => Some((a.min(b), a.max(b), w)),
            _ => None,
        })
        .collect();
    let sub = StockGraph::from_edges(
        kept.iter().map(|v| format!("N{v}")).collect(),
        sub_edges,
        g.threshold,
    );
    largest_component_oracle(&sub) as f64 / n as f64
}

// ---------------------------------------------------------------------------
// dense symmetric eigensolver (Jacobi rotations)
// ---------------------------------------------------------------------------

/// Returns (eigenvalues, eigenvectors) with eigenvectors stored column-major
/// (column k belongs to eigenvalue k), unsorted.
pub fn jacobi_eigen(matrix: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = matrix.to_vec();
    let mut v = vec![0.0f64; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _ in 0..200 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (2.0 * apq).atan2(a[q * n + q] - a[p * n + p]);
                let (s, c) = theta.sin_cos();
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eigenvalues: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    (eigenvalues, v)
}

/// Dominant eigenpair (largest eigenvalue, unit eigenvector with
/// non-negative orientation by largest-magnitude entry).
pub fn dominant_eigenpair(matrix: &[f64], n: usize) -> (f64, Vec<f64>) {
    let (vals, vecs) = jacobi_eigen(matrix, n);
    let k = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    let mut vec: Vec<f64> = (0..n).map(|i| vecs[i * n + k]).collect();
    let pivot = vec
        .iter()
        .cloned()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap();
    if pivot < 0.0 {
        for x in vec.iter_mut() {
            *x = -*x;
        }
    }
    (vals[k], vec)
}

// ---------------------------------------------------------------------------
// F-distribution tail via adaptive quadrature
// ---------------------------------------------------------------------------

/// ln Γ via the Spouge approximation (independent of the library's Lanczos).
fn spouge_ln_gamma(z: f64) -> f64 {
    const A: usize = 15;
    let mut acc = (2.0 * std::f64::consts::PI).sqrt();
    let mut factorial = 1.0f64;
    for k in 1..A {
        let kf = k as f64;
        if k > 1 {
            factorial *= -(kf - 1.0);
        }
        let c = (A as f64 - kf).powf(kf - 0.5) * (A as f64 - kf).exp() / factorial;
        acc += c / (z - 1.0 + kf);
    }
    (z - 0.5) * (z - 1.0 + A as f64).ln() - (z - 1.0 + A as f64) + acc.ln()
}

fn f_log_density(x: f64, d1: f64, d2: f64) -> f64 {
    let ln_b = spouge_ln_gamma(d1 / 2.0) + spouge_ln_gamma(d2 / 2.0)
        - spouge_ln_gamma((d1 + d2) / 2.0);
    0.5 * (d1 * (d1 * x).ln() + d2 * d2.ln() - (d1 + d2) * (d1 * x + d2).ln()) - x.ln() - ln_b
}

fn adaptive_simpson<F: Fn(f64) -> f64 + Copy>(
    f: F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

/// Upper-tail P(F > f0) by integrating the density over [f0, ∞) after the
/// substitution x = 1/u, which maps the tail to the bounded interval
/// (0, 1/f0] with an integrand vanishing at 0 for d2 > 2.
pub fn f_tail_quadrature(f0: f64, d1: usize, d2: usize) -> f64 {
    assert!(f0 > 0.0 && d2 > 2);
    let (d1f, d2f) = (d1 as f64, d2 as f64);
    let g = move |u: f64| {
        if u <= 0.0 {
            0.0
        } else {
            (f_log_density(1.0 / u, d1f, d2f) - 2.0 * u.ln()).exp()
        }
    };
    let (a, b) = (0.0, 1.0 / f0);
    let (fa, fb) = (g(a), g(b));
    let m = 0.5 * (a + b);
    let fm = g(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    adaptive_simpson(g, a, b, fa, fm, fb, whole, 1e-10, 60).clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// least squares via modified Gram–Schmidt QR
// ---------------------------------------------------------------------------

/// Least-squares solve of X b = y; returns (coefficients, SSR).
pub fn qr_least_squares(x: &[f64], n_rows: usize, n_cols: usize, y: &[f64]) -> (Vec<f64>, f64) {
    // columns of Q, built in place
    let mut q: Vec<Vec<f64>> = (0..n_cols)
        .map(|c| (0..n_rows).map(|r| x[r * n_cols + c]).collect())
        .collect();
    let mut r = vec![0.0f64; n_cols * n_cols];
    for j in 0..n_cols {
        for i in 0..j {
            let dot: f64 = (0..n_rows).map(|k| q[i][k] * q[j][k]).sum();
            r[i * n_cols + j] = dot;
            for k in 0..n_rows {
                q[j][k] -= dot * q[i][k];
            }
        }
        let norm: f64 = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        r[j * n_cols + j] = norm;
        if norm > 1e-12 {
            for v in q[j].iter_mut() {
                *v /= norm;
            }
        }
    }
    // back-substitution on R b = Qᵀ y
    let qty: Vec<f64> = (0..n_cols)
        .map(|j| (0..n_rows).map(|k| q[j][k] * y[k]).sum())
        .collect();
    let mut b = vec![0.0f64; n_cols];
    for j in (0..n_cols).rev() {
        let mut acc = qty[j];
        for k in (j + 1)..n_cols {
            acc -= r[j * n_cols + k] * b[k];
        }
        b[j] = if r[j * n_cols + j].abs() > 1e-12 {
            acc / r[j * n_cols + j]
        } else {
            0.0
        };
    }
    let ssr: f64 = (0..n_rows)
        .map(|row| {
            let pred: f64 = (0..n_cols).map(|c| x[row * n_cols + c] * b[c]).sum();
            (y[row] - pred) * (y[row] - pred)
        })
        .sum();
    (b, ssr)
}
