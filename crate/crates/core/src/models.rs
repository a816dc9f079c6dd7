//! The five regression models: linear baseline, random forest, gradient
//! boosting, the random-forest baseline, and the R²-weighted average.
//!
//! Forest and boosting canonicalize row order (lexicographic sort on
//! feature vector + target) before training, so fitted models depend only on
//! the row multiset and the seed, not on pooling order.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::causality::ols_fit;
use crate::error::{Error, Result};

/// Binary CART regression tree; leaves predict the mean training target.
#[derive(Debug, Clone)]
pub enum TreeNode {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, row: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf(v) => *v,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
        }
    }
}

struct TreeParams {
    max_depth: Option<usize>,
    min_samples_leaf: usize,
    max_features: Option<usize>,
}

struct TrainingView<'a> {
    x: &'a [f64],
    n_cols: usize,
    y: &'a [f64],
}

impl TrainingView<'_> {
    #[inline]
    fn value(&self, row: usize, col: usize) -> f64 {
        self.x[row * self.n_cols + col]
    }
}

fn leaf_mean(view: &TrainingView, rows: &[usize]) -> f64 {
    rows.iter().map(|&r| view.y[r]).sum::<f64>() / rows.len() as f64
}

/// Best split over the candidate features: minimizes the summed child SSE,
/// ties broken by (lower column index, lower threshold). Split points are
/// midpoints of consecutive distinct sorted feature values.
fn best_split(
    view: &TrainingView,
    rows: &[usize],
    features: &[usize],
    min_samples_leaf: usize,
) -> Option<(usize, f64, f64)> {
    let n = rows.len();
    if n < 2 * min_samples_leaf {
        return None;
    }
    let total_sum: f64 = rows.iter().map(|&r| view.y[r]).sum();
    let mut best: Option<(usize, f64, f64)> = None;

    for &feature in features {
        let mut order: Vec<usize> = rows.to_vec();
        order.sort_by(|&a, &b| view.value(a, feature).total_cmp(&view.value(b, feature)));

        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        let total_sq: f64 = rows.iter().map(|&r| view.y[r] * view.y[r]).sum();
        for (i, &r) in order.iter().enumerate().take(n - 1) {
            left_sum += view.y[r];
            left_sq += view.y[r] * view.y[r];
            let left_n = i + 1;
            let right_n = n - left_n;
            if left_n < min_samples_leaf || right_n < min_samples_leaf {
                continue;
            }
            let here = view.value(r, feature);
            let next = view.value(order[i + 1], feature);
            if next <= here {
                continue; // identical values cannot be separated
            }
            let threshold = 0.5 * (here + next);
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let sse = (left_sq - left_sum * left_sum / left_n as f64)
                + (right_sq - right_sum * right_sum / right_n as f64);
            let better = match best {
                None => true,
                Some((bf, bt, bs)) => {
                    sse < bs - 1e-12
                        || ((sse - bs).abs() <= 1e-12
                            && (feature < bf || (feature == bf && threshold < bt)))
                }
            };
            if better {
                best = Some((feature, threshold, sse));
            }
        }
    }
    best
}

fn grow_tree(
    view: &TrainingView,
    rows: &[usize],
    depth: usize,
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> TreeNode {
    let mean = leaf_mean(view, rows);
    if let Some(max_depth) = params.max_depth {
        if depth >= max_depth {
            return TreeNode::Leaf(mean);
        }
    }
    if rows.len() < 2 * params.min_samples_leaf {
        return TreeNode::Leaf(mean);
    }
    if rows.iter().all(|&r| view.y[r] == view.y[rows[0]]) {
        return TreeNode::Leaf(mean);
    }

    let all_features: Vec<usize> = (0..view.n_cols).collect();
    let candidates: Vec<usize> = match params.max_features {
        Some(m) if m < view.n_cols => {
            let mut pool = all_features;
            pool.shuffle(rng);
            let mut chosen: Vec<usize> = pool.into_iter().take(m).collect();
            chosen.sort_unstable();
            chosen
        }
        _ => all_features,
    };

    match best_split(view, rows, &candidates, params.min_samples_leaf) {
        None => TreeNode::Leaf(mean),
        Some((feature, threshold, _)) => {
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                .iter()
                .partition(|&&r| view.value(r, feature) <= threshold);
            if left_rows.is_empty() || right_rows.is_empty() {
                return TreeNode::Leaf(mean);
            }
            TreeNode::Split {
                feature,
                threshold,
                left: Box::new(grow_tree(view, &left_rows, depth + 1, params, rng)),
                right: Box::new(grow_tree(view, &right_rows, depth + 1, params, rng)),
            }
        }
    }
}

/// Hyperparameters echoed into reports.
#[derive(Debug, Clone, Serialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            min_samples_leaf: 5,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoostingParams {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for BoostingParams {
    fn default() -> Self {
        BoostingParams {
            n_stages: 100,
            learning_rate: 0.1,
            max_depth: 3,
            seed: 42,
        }
    }
}

/// A fitted regression model; prediction is deterministic given the inputs.
#[derive(Debug, Clone)]
pub enum Model {
    Linear {
        coefficients: Vec<f64>,
        /// True when every regressor was constant and only the intercept
        /// was fit.
        constant_inputs: bool,
    },
    Forest {
        trees: Vec<TreeNode>,
    },
    Boosted {
        base: f64,
        learning_rate: f64,
        trees: Vec<TreeNode>,
    },
}

impl Model {
    pub fn predict(&self, row: &[f64]) -> f64 {
        match self {
            Model::Linear {
                coefficients,
                constant_inputs,
            } => {
                if *constant_inputs {
                    coefficients[0]
                } else {
                    coefficients[0]
                        + row
                            .iter()
                            .zip(&coefficients[1..])
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                }
            }
            Model::Forest { trees } => {
                trees.iter().map(|t| t.predict(row)).sum::<f64>() / trees.len() as f64
            }
            Model::Boosted {
                base,
                learning_rate,
                trees,
            } => base + learning_rate * trees.iter().map(|t| t.predict(row)).sum::<f64>(),
        }
    }

    pub fn predict_all(&self, x: &[f64], n_rows: usize, n_cols: usize) -> Vec<f64> {
        (0..n_rows)
            .map(|r| self.predict(&x[r * n_cols..(r + 1) * n_cols]))
            .collect()
    }
}

/// Intercept + least-squares slopes. Constant regressors collapse to an
/// intercept-only fit with a flag.
pub fn fit_linear(x: &[f64], n_rows: usize, n_cols: usize, y: &[f64]) -> Result<Model> {
    if n_rows < 2 {
        return Err(Error::input("linear fit needs at least 2 rows"));
    }
    let constant = (0..n_cols).all(|c| {
        let first = x[c];
        (1..n_rows).all(|r| x[r * n_cols + c] == first)
    });
    if n_cols == 0 || constant {
        let mean = y.iter().sum::<f64>() / n_rows as f64;
        return Ok(Model::Linear {
            coefficients: vec![mean],
            constant_inputs: true,
        });
    }
    let mut design = Vec::with_capacity(n_rows * (n_cols + 1));
    for r in 0..n_rows {
        design.push(1.0);
        design.extend_from_slice(&x[r * n_cols..(r + 1) * n_cols]);
    }
    let (coefficients, _) = ols_fit(&design, n_rows, n_cols + 1, y)?;
    Ok(Model::Linear {
        coefficients,
        constant_inputs: false,
    })
}

/// Lexicographic canonical order over (feature vector, target).
fn canonical_order(x: &[f64], n_rows: usize, n_cols: usize, y: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.sort_by(|&a, &b| {
        let ra = &x[a * n_cols..(a + 1) * n_cols];
        let rb = &x[b * n_cols..(b + 1) * n_cols];
        for (va, vb) in ra.iter().zip(rb) {
            match va.total_cmp(vb) {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        y[a].total_cmp(&y[b])
    });
    order
}

fn reorder(x: &[f64], n_cols: usize, y: &[f64], order: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(order.len() * n_cols);
    let mut ys = Vec::with_capacity(order.len());
    for &r in order {
        xs.extend_from_slice(&x[r * n_cols..(r + 1) * n_cols]);
        ys.push(y[r]);
    }
    (xs, ys)
}

fn tree_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Bagged CART forest with sqrt(d) feature subsampling per split.
pub fn fit_random_forest(
    x: &[f64],
    n_rows: usize,
    n_cols: usize,
    y: &[f64],
    params: &ForestParams,
) -> Result<Model> {
    if n_cols == 0 {
        return Err(Error::input("random forest needs at least one feature"));
    }
    if n_rows < 2 * params.min_samples_leaf {
        return Err(Error::input(format!(
            "random forest needs at least {} rows",
            2 * params.min_samples_leaf
        )));
    }
    let order = canonical_order(x, n_rows, n_cols, y);
    let (xs, ys) = reorder(x, n_cols, y, &order);
    let view = TrainingView {
        x: &xs,
        n_cols,
        y: &ys,
    };
    let max_features = ((n_cols as f64).sqrt().ceil() as usize).max(1);
    let tree_params = TreeParams {
        max_depth: None,
        min_samples_leaf: params.min_samples_leaf,
        max_features: Some(max_features),
    };
    let trees: Vec<TreeNode> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(params.seed, t));
            let rows: Vec<usize> = (0..n_rows).map(|_| rng.gen_range(0..n_rows)).collect();
            grow_tree(&view, &rows, 0, &tree_params, &mut rng)
        })
        .collect();
    Ok(Model::Forest { trees })
}

/// Squared-loss gradient boosting: F0 = mean(y), each stage fits a
/// depth-bounded tree to the residuals.
pub fn fit_gradient_boosting(
    x: &[f64],
    n_rows: usize,
    n_cols: usize,
    y: &[f64],
    params: &BoostingParams,
) -> Result<Model> {
    if n_rows < 4 {
        return Err(Error::input("gradient boosting needs at least 4 rows"));
    }
    if n_cols == 0 {
        return Err(Error::input("gradient boosting needs at least one feature"));
    }
    let order = canonical_order(x, n_rows, n_cols, y);
    let (xs, ys) = reorder(x, n_cols, y, &order);
    let base = ys.iter().sum::<f64>() / n_rows as f64;
    let tree_params = TreeParams {
        max_depth: Some(params.max_depth),
        min_samples_leaf: 1,
        max_features: None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut predictions = vec![base; n_rows];
    let mut trees = Vec::with_capacity(params.n_stages);
    let all_rows: Vec<usize> = (0..n_rows).collect();
    for _ in 0..params.n_stages {
        let residuals: Vec<f64> = ys
            .iter()
            .zip(&predictions)
            .map(|(t, p)| t - p)
            .collect();
        let view = TrainingView {
            x: &xs,
            n_cols,
            y: &residuals,
        };
        let tree = grow_tree(&view, &all_rows, 0, &tree_params, &mut rng);
        for (r, pred) in predictions.iter_mut().enumerate() {
            *pred += params.learning_rate * tree.predict(&xs[r * n_cols..(r + 1) * n_cols]);
        }
        trees.push(tree);
    }
    Ok(Model::Boosted {
        base,
        learning_rate: params.learning_rate,
        trees,
    })
}

/// Combines two prediction vectors with weights max(r2, 0); falls back to
/// an even split when both clamp to zero.
pub fn weighted_average(pred_a: &[f64], r2_a: f64, pred_b: &[f64], r2_b: f64) -> Vec<f64> {
    debug_assert_eq!(pred_a.len(), pred_b.len());
    let (mut wa, mut wb) = (r2_a.max(0.0), r2_b.max(0.0));
    if wa == 0.0 && wb == 0.0 {
        wa = 0.5;
        wb = 0.5;
    }
    pred_a
        .iter()
        .zip(pred_b)
        .map(|(a, b)| (wa * a + wb * b) / (wa + wb))
        .collect()
}
