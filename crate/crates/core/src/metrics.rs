//! Node-level centralities, community detection, and global structure
//! measures of a stock graph.
//!
//! Path-based measures (closeness, betweenness) use unweighted hop
//! distances. Weight magnitudes enter only the Barrat clustering
//! coefficient, where |w| keeps the coefficient in [0, 1] even with
//! negative correlation weights.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::StockGraph;
use crate::returns::{max_eigenvalue, CorrelationMatrix, ReturnMatrix};

/// Community assignment: ids are 0..count-1, every node assigned once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub assignments: Vec<usize>,
    pub count: usize,
}

impl Partition {
    pub fn singletons(n: usize) -> Self {
        Partition {
            assignments: (0..n).collect(),
            count: n,
        }
    }
}

/// The global per-window feature vector plus the market log-return.
#[derive(Debug, Clone, Serialize)]
pub struct GlobalFeatures {
    pub p90_degree: f64,
    pub mean_closeness: f64,
    pub mean_betweenness: f64,
    pub mean_eigenvector: f64,
    pub mean_clustering: f64,
    pub max_eigenvalue: f64,
    pub community_stability: f64,
    pub largest_component: f64,
    pub resilience: f64,
    pub market_log_return: f64,
}

impl GlobalFeatures {
    /// Column order used in the features CSV and in Granger scans.
    pub const NETWORK_COLUMNS: [&'static str; 9] = [
        "p90_degree",
        "mean_closeness",
        "mean_betweenness",
        "mean_eigenvector",
        "mean_clustering",
        "max_eigenvalue",
        "community_stability",
        "largest_component",
        "resilience",
    ];

    pub fn network_values(&self) -> [f64; 9] {
        [
            self.p90_degree,
            self.mean_closeness,
            self.mean_betweenness,
            self.mean_eigenvector,
            self.mean_clustering,
            self.max_eigenvalue,
            self.community_stability,
            self.largest_component,
            self.resilience,
        ]
    }
}

/// k_i = number of incident edges.
pub fn degree(g: &StockGraph) -> Vec<usize> {
    (0..g.n()).map(|i| g.degree_of(i)).collect()
}

/// k_i / (n - 1); zero for a single-node graph.
pub fn degree_centrality(g: &StockGraph) -> Vec<f64> {
    let n = g.n();
    if n <= 1 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| g.degree_of(i) as f64 / (n - 1) as f64)
        .collect()
}

fn bfs_distances(g: &StockGraph, source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.n()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for &(v, _) in g.neighbors(u) {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// C_C(u) = 1 / sum of hop distances to nodes reachable from u;
/// isolated nodes get 0.
pub fn closeness(g: &StockGraph) -> Vec<f64> {
    (0..g.n())
        .map(|u| {
            let total: usize = bfs_distances(g, u).iter().flatten().sum();
            if total == 0 {
                0.0
            } else {
                1.0 / total as f64
            }
        })
        .collect()
}

/// Unnormalized betweenness over unordered pairs, Brandes' accumulation on
/// unweighted shortest paths.
pub fn betweenness(g: &StockGraph) -> Vec<f64> {
    let n = g.n();
    let mut centrality = vec![0.0; n];
    for s in 0..n {
        let mut stack = Vec::with_capacity(n);
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![0.0f64; n];
        let mut dist = vec![-1i64; n];
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            stack.push(u);
            for &(v, _) in g.neighbors(u) {
                if dist[v] < 0 {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
                if dist[v] == dist[u] + 1 {
                    sigma[v] += sigma[u];
                    preds[v].push(u);
                }
            }
        }
        let mut delta = vec![0.0f64; n];
        while let Some(w) = stack.pop() {
            for &u in &preds[w] {
                delta[u] += sigma[u] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                centrality[w] += delta[w];
            }
        }
    }
    // each unordered pair was counted from both endpoints
    for c in centrality.iter_mut() {
        *c /= 2.0;
    }
    centrality
}

/// Principal eigenvector of the 0/1 adjacency by power iteration; entries
/// are non-negative with unit L2 norm. The boolean is true when the plain
/// iteration failed to converge (e.g. bipartite oscillation) and the shifted
/// matrix A + I was used instead.
pub fn eigenvector_centrality(g: &StockGraph) -> Result<(Vec<f64>, bool)> {
    if g.edge_count() == 0 {
        return Err(Error::input(
            "eigenvector centrality undefined on an edgeless graph",
        ));
    }
    match power_iterate(g, 0.0) {
        Some(x) => Ok((x, false)),
        None => match power_iterate(g, 1.0) {
            Some(x) => Ok((x, true)),
            None => Err(Error::NonConvergence {
                iterations: 1000,
                residual: f64::NAN,
            }),
        },
    }
}

fn power_iterate(g: &StockGraph, shift: f64) -> Option<Vec<f64>> {
    let n = g.n();
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..1000 {
        let mut y = vec![0.0; n];
        for u in 0..n {
            let mut acc = shift * x[u];
            for &(v, _) in g.neighbors(u) {
                acc += x[v];
            }
            y[u] = acc;
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return None;
        }
        for yi in y.iter_mut() {
            *yi /= norm;
        }
        let diff: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        x = y;
        if diff <= 1e-10 {
            for v in x.iter_mut() {
                *v = v.abs();
            }
            return Some(x);
        }
    }
    None
}

/// Barrat weighted clustering with |w|; nodes of degree < 2 get 0.
pub fn weighted_clustering(g: &StockGraph) -> Vec<f64> {
    let n = g.n();
    let mut adj = vec![false; n * n];
    for &(i, j, _) in &g.edges {
        adj[i * n + j] = true;
        adj[j * n + i] = true;
    }
    (0..n)
        .map(|i| {
            let neigh = g.neighbors(i);
            let k = neigh.len();
            if k < 2 {
                return 0.0;
            }
            let strength: f64 = neigh.iter().map(|&(_, w)| w.abs()).sum();
            if strength == 0.0 {
                return 0.0;
            }
            let mut sum = 0.0;
            for &(j, wij) in neigh {
                for &(h, wih) in neigh {
                    if j != h && adj[j * n + h] {
                        sum += (wij.abs() + wih.abs()) / 2.0;
                    }
                }
            }
            sum / (strength * (k - 1) as f64)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Louvain community detection
// ---------------------------------------------------------------------------

struct LevelGraph {
    adj: Vec<Vec<(usize, f64)>>,
    self_loops: Vec<f64>,
    total_weight: f64, // m: sum of edge weights, self-loops counted once
}

impl LevelGraph {
    fn from_stock_graph(g: &StockGraph) -> Self {
        let adj = (0..g.n())
            .map(|u| g.neighbors(u).iter().map(|&(v, _)| (v, 1.0)).collect())
            .collect();
        LevelGraph {
            adj,
            self_loops: vec![0.0; g.n()],
            total_weight: g.edge_count() as f64,
        }
    }

    fn n(&self) -> usize {
        self.adj.len()
    }

    fn weighted_degree(&self, u: usize) -> f64 {
        self.adj[u].iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * self.self_loops[u]
    }
}

/// One local-move phase. Returns the community of each node and whether any
/// node moved.
fn local_moves(graph: &LevelGraph, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
    let n = graph.n();
    let two_m = 2.0 * graph.total_weight;
    let mut community: Vec<usize> = (0..n).collect();
    let mut comm_total: Vec<f64> = (0..n).map(|u| graph.weighted_degree(u)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut any_moved = false;
    loop {
        let mut moved = false;
        for &u in &order {
            let ku = graph.weighted_degree(u);
            let cu = community[u];
            // weight from u to each neighboring community
            let mut links: Vec<(usize, f64)> = Vec::new();
            for &(v, w) in &graph.adj[u] {
                let cv = community[v];
                match links.iter_mut().find(|(c, _)| *c == cv) {
                    Some(entry) => entry.1 += w,
                    None => links.push((cv, w)),
                }
            }
            comm_total[cu] -= ku;
            let w_own = links
                .iter()
                .find(|(c, _)| *c == cu)
                .map(|&(_, w)| w)
                .unwrap_or(0.0);
            let base_gain = w_own - comm_total[cu] * ku / two_m;
            let mut best = (cu, base_gain);
            for &(c, w) in &links {
                if c == cu {
                    continue;
                }
                let gain = w - comm_total[c] * ku / two_m;
                if gain > best.1 + 1e-12 {
                    best = (c, gain);
                }
            }
            comm_total[best.0] += ku;
            if best.0 != cu {
                community[u] = best.0;
                moved = true;
                any_moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    (community, any_moved)
}

fn renumber(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let mut out = Vec::with_capacity(labels.len());
    for &l in labels {
        let next = map.len();
        out.push(*map.entry(l).or_insert(next));
    }
    let count = map.len();
    (out, count)
}

fn aggregate(graph: &LevelGraph, community: &[usize], count: usize) -> LevelGraph {
    let mut self_loops = vec![0.0; count];
    let mut maps: Vec<std::collections::HashMap<usize, f64>> =
        vec![std::collections::HashMap::new(); count];
    for u in 0..graph.n() {
        self_loops[community[u]] += graph.self_loops[u];
        for &(v, w) in &graph.adj[u] {
            if v < u {
                continue; // each undirected edge once
            }
            let (cu, cv) = (community[u], community[v]);
            if cu == cv {
                self_loops[cu] += w;
            } else {
                *maps[cu].entry(cv).or_insert(0.0) += w;
                *maps[cv].entry(cu).or_insert(0.0) += w;
            }
        }
    }
    let adj = maps
        .into_iter()
        .map(|m| {
            let mut v: Vec<(usize, f64)> = m.into_iter().collect();
            v.sort_by_key(|&(c, _)| c);
            v
        })
        .collect();
    LevelGraph {
        adj,
        self_loops,
        total_weight: graph.total_weight,
    }
}

/// Two-phase Louvain on the 0/1 adjacency; node visit order is shuffled by
/// the seed. An edgeless graph yields singleton communities.
pub fn louvain_partition(g: &StockGraph, seed: u64) -> Partition {
    let n = g.n();
    if g.edge_count() == 0 {
        return Partition::singletons(n);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graph = LevelGraph::from_stock_graph(g);
    // membership[i] = current super-node of original node i
    let mut membership: Vec<usize> = (0..n).collect();
    loop {
        let (community, moved) = local_moves(&graph, &mut rng);
        if !moved {
            break;
        }
        let (community, count) = renumber(&community);
        for m in membership.iter_mut() {
            *m = community[*m];
        }
        graph = aggregate(&graph, &community, count);
    }
    let (assignments, count) = renumber(&membership);
    let partition = Partition { assignments, count };
    // guard: never return a partition below the singleton baseline
    let singles = Partition::singletons(n);
    if modularity(g, &partition).unwrap_or(f64::NEG_INFINITY)
        < modularity(g, &singles).unwrap_or(f64::NEG_INFINITY)
    {
        return singles;
    }
    partition
}

/// Q = (1/2m) sum_ij (A_ij - k_i k_j / 2m) delta(c_i, c_j) on the 0/1
/// adjacency; defined as 0 for an edgeless graph.
pub fn modularity(g: &StockGraph, p: &Partition) -> Result<f64> {
    if p.assignments.len() != g.n() {
        return Err(Error::input("partition does not cover all nodes"));
    }
    if let Some(&max) = p.assignments.iter().max() {
        if max >= p.count {
            return Err(Error::input("partition id out of range"));
        }
    }
    let m = g.edge_count() as f64;
    if m == 0.0 {
        return Ok(0.0);
    }
    let mut intra = vec![0.0f64; p.count];
    let mut degree_sum = vec![0.0f64; p.count];
    for u in 0..g.n() {
        degree_sum[p.assignments[u]] += g.degree_of(u) as f64;
    }
    for &(i, j, _) in &g.edges {
        if p.assignments[i] == p.assignments[j] {
            intra[p.assignments[i]] += 1.0;
        }
    }
    Ok((0..p.count)
        .map(|c| intra[c] / m - (degree_sum[c] / (2.0 * m)).powi(2))
        .sum())
}

/// Size of the largest connected component (BFS).
pub fn largest_component(g: &StockGraph) -> usize {
    let n = g.n();
    if n == 0 {
        return 0;
    }
    let mut seen = vec![false; n];
    let mut best = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut size = 0;
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(u) = queue.pop_front() {
            size += 1;
            for &(v, _) in g.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        best = best.max(size);
    }
    best
}

/// R(f): remove floor(f*|V|) nodes in descending degree order (ties by node
/// index), then |largest remaining component| / original |V|.
pub fn resilience(g: &StockGraph, f: f64) -> f64 {
    let n = g.n();
    if n == 0 {
        return 0.0;
    }
    let remove_count = (f * n as f64).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| g.degree_of(b).cmp(&g.degree_of(a)).then(a.cmp(&b)));
    let mut removed = vec![false; n];
    for &u in order.iter().take(remove_count) {
        removed[u] = true;
    }
    let survivors: Vec<usize> = (0..n).filter(|&u| !removed[u]).collect();
    let index_of: std::collections::HashMap<usize, usize> = survivors
        .iter()
        .enumerate()
        .map(|(new, &old)| (old, new))
        .collect();
    let mut edges = Vec::new();
    for &(i, j, w) in &g.edges {
        if let (Some(&ni), Some(&nj)) = (index_of.get(&i), index_of.get(&j)) {
            edges.push((ni.min(nj), ni.max(nj), w));
        }
    }
    let sub = StockGraph::from_edges(
        survivors.iter().map(|&u| g.nodes[u].clone()).collect(),
        edges,
        g.threshold,
    );
    largest_component(&sub) as f64 / n as f64
}

/// Linear-interpolation percentile of a sorted slice, q in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Mean degree of nodes at or above the 90th percentile of the degree
/// distribution.
pub fn p90_degree(degrees: &[usize]) -> f64 {
    if degrees.is_empty() {
        return 0.0;
    }
    let mut sorted: Vec<f64> = degrees.iter().map(|&d| d as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let threshold = percentile(&sorted, 0.9);
    let top: Vec<f64> = sorted.iter().copied().filter(|&d| d >= threshold).collect();
    top.iter().sum::<f64>() / top.len() as f64
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Assembles the per-window global feature vector.
pub fn global_features(
    g: &StockGraph,
    corr: &CorrelationMatrix,
    returns: &ReturnMatrix,
    seed: u64,
    resilience_f: f64,
) -> Result<GlobalFeatures> {
    let degrees = degree(g);
    let eig = if g.edge_count() == 0 {
        vec![0.0; g.n()]
    } else {
        eigenvector_centrality(g)?.0
    };
    let partition = louvain_partition(g, seed);
    let market_log_return = mean(
        &(0..returns.n_tickers())
            .map(|i| returns.mean_return(i))
            .collect::<Vec<_>>(),
    );
    Ok(GlobalFeatures {
        p90_degree: p90_degree(&degrees),
        mean_closeness: mean(&closeness(g)),
        mean_betweenness: mean(&betweenness(g)),
        mean_eigenvector: mean(&eig),
        mean_clustering: mean(&weighted_clustering(g)),
        max_eigenvalue: max_eigenvalue(corr)?,
        community_stability: modularity(g, &partition)?,
        largest_component: largest_component(g) as f64,
        resilience: resilience(g, resilience_f),
        market_log_return,
    })
}
