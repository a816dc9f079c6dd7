//! Forecasting dataset assembly: rolling-mean smoothing, lag construction,
//! pooling across stocks, correlation-based feature selection, and the
//! train/test stock split.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{percentile, GlobalFeatures};

/// Per-stock per-window network measures.
#[derive(Debug, Clone, Copy, Default)]
pub struct StockFeatures {
    pub log_return: f64,
    pub degree_centrality: f64,
    pub closeness: f64,
    pub betweenness: f64,
    pub eigenvector: f64,
    pub clustering: f64,
}

/// Per-stock series of individual measures plus the shared global vector,
/// both indexed by window.
#[derive(Debug, Clone)]
pub struct FeatureSeries {
    pub tickers: Vec<String>,
    /// stock[s][w]
    pub stock: Vec<Vec<StockFeatures>>,
    /// global[w]
    pub global: Vec<GlobalFeatures>,
}

impl FeatureSeries {
    pub fn n_windows(&self) -> usize {
        self.global.len()
    }
}

const STOCK_VARIABLES: [&str; 6] = [
    "log_return",
    "degree_centrality",
    "closeness",
    "betweenness",
    "eigenvector",
    "clustering",
];

/// Names of all candidate variables, stock-level first then global.
pub fn variable_names() -> Vec<String> {
    STOCK_VARIABLES
        .iter()
        .map(|s| s.to_string())
        .chain(
            GlobalFeatures::NETWORK_COLUMNS
                .iter()
                .map(|s| s.to_string()),
        )
        .collect()
}

fn stock_variable_series(fs: &FeatureSeries, stock: usize, var: usize) -> Vec<f64> {
    let pick = |f: &StockFeatures| match var {
        0 => f.log_return,
        1 => f.degree_centrality,
        2 => f.closeness,
        3 => f.betweenness,
        4 => f.eigenvector,
        5 => f.clustering,
        _ => unreachable!(),
    };
    fs.stock[stock].iter().map(pick).collect()
}

/// Pooled design matrix of lagged smoothed variables.
#[derive(Debug, Clone)]
pub struct ForecastDataset {
    pub columns: Vec<String>,
    x: Vec<f64>,
    pub n_rows: usize,
    pub n_cols: usize,
    pub target: Vec<f64>,
    /// Stock index of each pooled row.
    pub row_stock: Vec<usize>,
    pub tickers: Vec<String>,
    /// Per-stock train flag; set by [`ForecastDataset::apply_split`].
    pub train_stock: Vec<bool>,
    pub smoothing_window: usize,
    pub n_lags: usize,
}

impl ForecastDataset {
    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.x[row * self.n_cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.x[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn apply_split(&mut self, test_tickers: &[String]) {
        self.train_stock = self
            .tickers
            .iter()
            .map(|t| !test_tickers.contains(t))
            .collect();
    }

    pub fn train_rows(&self) -> Vec<usize> {
        (0..self.n_rows)
            .filter(|&r| self.train_stock[self.row_stock[r]])
            .collect()
    }

    /// New dataset keeping only the named columns, in their original order.
    pub fn with_columns(&self, keep: &[usize]) -> ForecastDataset {
        let mut x = Vec::with_capacity(self.n_rows * keep.len());
        for r in 0..self.n_rows {
            for &c in keep {
                x.push(self.value(r, c));
            }
        }
        ForecastDataset {
            columns: keep.iter().map(|&c| self.columns[c].clone()).collect(),
            x,
            n_rows: self.n_rows,
            n_cols: keep.len(),
            target: self.target.clone(),
            row_stock: self.row_stock.clone(),
            tickers: self.tickers.clone(),
            train_stock: self.train_stock.clone(),
            smoothing_window: self.smoothing_window,
            n_lags: self.n_lags,
        }
    }
}

/// Trailing rolling mean: out[t] = mean(series[t-W+1..=t]), defined for
/// t >= W-1; earlier entries are dropped.
pub fn rolling_mean(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::input("rolling window must be positive"));
    }
    if window > series.len() {
        return Err(Error::input(format!(
            "rolling window {} exceeds series length {}",
            window,
            series.len()
        )));
    }
    Ok((window - 1..series.len())
        .map(|t| series[t + 1 - window..=t].iter().sum::<f64>() / window as f64)
        .collect())
}

/// W = max(1, floor(0.10 * n_obs)).
pub fn choose_window(n_obs: usize) -> usize {
    ((n_obs as f64 * 0.10).floor() as usize).max(1)
}

/// Smooths every variable (including the target), builds `var_k` lag columns
/// for k = 1..=n_lags, trims the first n_lags smoothed rows per stock, and
/// pools stocks in ticker order.
pub fn make_lagged(fs: &FeatureSeries, window: usize, n_lags: usize) -> Result<ForecastDataset> {
    let n_obs = fs.n_windows();
    if n_lags == 0 {
        return Err(Error::input("n_lags must be at least 1"));
    }
    if n_obs + 1 < window + n_lags + 2 {
        return Err(Error::input(format!(
            "need n_obs - (W-1) - n_lags >= 2: n_obs={n_obs}, W={window}, n_lags={n_lags}"
        )));
    }
    let names = variable_names();
    let n_vars = names.len();
    let mut columns = Vec::with_capacity(n_vars * n_lags);
    for name in &names {
        for k in 1..=n_lags {
            columns.push(format!("{name}_{k}"));
        }
    }

    let global_series: Vec<Vec<f64>> = (0..GlobalFeatures::NETWORK_COLUMNS.len())
        .map(|g| fs.global.iter().map(|w| w.network_values()[g]).collect())
        .collect();

    let rows_per_stock = n_obs - (window - 1) - n_lags;
    let n_stocks = fs.tickers.len();
    let n_cols = columns.len();
    let mut x = Vec::with_capacity(n_stocks * rows_per_stock * n_cols);
    let mut target = Vec::with_capacity(n_stocks * rows_per_stock);
    let mut row_stock = Vec::with_capacity(n_stocks * rows_per_stock);

    for s in 0..n_stocks {
        let mut smoothed: Vec<Vec<f64>> = Vec::with_capacity(n_vars);
        for v in 0..STOCK_VARIABLES.len() {
            smoothed.push(rolling_mean(&stock_variable_series(fs, s, v), window)?);
        }
        for g in &global_series {
            smoothed.push(rolling_mean(g, window)?);
        }
        let smoothed_len = smoothed[0].len();
        for t in n_lags..smoothed_len {
            for series in &smoothed {
                for k in 1..=n_lags {
                    x.push(series[t - k]);
                }
            }
            target.push(smoothed[0][t]); // smoothed log return
            row_stock.push(s);
        }
    }

    Ok(ForecastDataset {
        columns,
        x,
        n_rows: target.len(),
        n_cols,
        target,
        row_stock,
        tickers: fs.tickers.clone(),
        train_stock: vec![true; n_stocks],
        smoothing_window: window,
        n_lags,
    })
}

/// Seeded shuffle split into disjoint, exhaustive train/test ticker sets.
/// The test set holds max(1, round(test_fraction * n)) tickers.
pub fn split_stocks(
    tickers: &[String],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>)> {
    if tickers.len() < 2 {
        return Err(Error::input("need at least 2 tickers to split"));
    }
    let n = tickers.len();
    let n_test = (((test_fraction * n as f64).round() as usize).max(1)).min(n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let test: Vec<String> = order[..n_test].iter().map(|&i| tickers[i].clone()).collect();
    let train: Vec<String> = order[n_test..].iter().map(|&i| tickers[i].clone()).collect();
    Ok((train, test))
}

/// One row of the selection report, mirroring the selected-variables tables.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionEntry {
    pub rank: usize,
    pub column: String,
    pub abs_correlation: f64,
}

/// Absolute Pearson correlation of each column with the target over the
/// training rows; keeps columns strictly above the 65th percentile
/// (linear interpolation) of the |corr| values.
pub fn select_features(ds: &ForecastDataset) -> Result<(ForecastDataset, Vec<SelectionEntry>)> {
    let rows = ds.train_rows();
    if rows.is_empty() {
        return Err(Error::input("no training rows for feature selection"));
    }
    let n = rows.len() as f64;
    let ty: Vec<f64> = rows.iter().map(|&r| ds.target[r]).collect();
    let my = ty.iter().sum::<f64>() / n;
    let vy: f64 = ty.iter().map(|v| (v - my) * (v - my)).sum();

    let mut corrs = Vec::with_capacity(ds.n_cols);
    for c in 0..ds.n_cols {
        let col: Vec<f64> = rows.iter().map(|&r| ds.value(r, c)).collect();
        let mx = col.iter().sum::<f64>() / n;
        let vx: f64 = col.iter().map(|v| (v - mx) * (v - mx)).sum();
        let corr = if vx <= 0.0 || vy <= 0.0 {
            0.0
        } else {
            let cov: f64 = col
                .iter()
                .zip(&ty)
                .map(|(x, y)| (x - mx) * (y - my))
                .sum();
            (cov / (vx.sqrt() * vy.sqrt())).abs()
        };
        corrs.push(corr);
    }

    let mut sorted = corrs.clone();
    sorted.sort_by(f64::total_cmp);
    let threshold = percentile(&sorted, 0.65);
    let keep: Vec<usize> = (0..ds.n_cols).filter(|&c| corrs[c] > threshold).collect();

    let mut ranked: Vec<usize> = keep.clone();
    ranked.sort_by(|&a, &b| corrs[b].total_cmp(&corrs[a]).then(a.cmp(&b)));
    let report = ranked
        .iter()
        .enumerate()
        .map(|(i, &c)| SelectionEntry {
            rank: i + 1,
            column: ds.columns[c].clone(),
            abs_correlation: corrs[c],
        })
        .collect();

    Ok((ds.with_columns(&keep), report))
}
