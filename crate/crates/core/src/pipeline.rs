//! End-to-end orchestration: per-window network construction and metric
//! extraction, and the full forecasting run shared by the CLI and the
//! integration tests.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::{
    choose_window, make_lagged, select_features, split_stocks, FeatureSeries, ForecastDataset,
    SelectionEntry, StockFeatures,
};
use crate::graph::{select_threshold, threshold_adjacency, StockGraph, ThresholdSelection};
use crate::ingest::PricePanel;
use crate::metrics::{
    betweenness, closeness, degree_centrality, eigenvector_centrality, global_features,
    louvain_partition, weighted_clustering, Partition,
};
use crate::models::{
    fit_gradient_boosting, fit_linear, fit_random_forest, weighted_average, BoostingParams,
    ForestParams, Model,
};
use crate::returns::{correlation_matrix, log_returns, CorrelationMatrix};
use crate::scoring::{mae, r2_score, summarize, ForecastReport, StockScore};

/// Settings for per-window graph construction.
#[derive(Debug, Clone, Serialize)]
pub struct NetworkConfig {
    /// Fixed correlation threshold; `None` scans for one per window.
    pub rho: Option<f64>,
    /// Grid resolution of the threshold scan.
    pub grid_step: f64,
    /// Fraction of nodes removed in the resilience measure.
    pub resilience_f: f64,
    /// Seed for community detection.
    pub louvain_seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            rho: None,
            grid_step: 0.005,
            resilience_f: 0.1,
            louvain_seed: 42,
        }
    }
}

/// Everything computed for one time window.
pub struct WindowComputation {
    pub graph: StockGraph,
    pub correlation: CorrelationMatrix,
    pub threshold: ThresholdSelection,
    pub partition: Partition,
    pub stock: Vec<StockFeatures>,
    pub global: crate::metrics::GlobalFeatures,
}

/// Per-window provenance kept alongside the feature series.
#[derive(Debug, Clone, Serialize)]
pub struct WindowSummary {
    pub window: usize,
    pub rho: f64,
    pub rho_fallback: bool,
    pub edge_count: usize,
}

/// Runs returns → correlation → threshold → graph → metrics on one window.
pub fn compute_window(panel: &PricePanel, config: &NetworkConfig) -> Result<WindowComputation> {
    let returns = log_returns(panel)?;
    let correlation = correlation_matrix(&returns)?;
    let threshold = match config.rho {
        Some(rho) => ThresholdSelection {
            rho,
            fallback: false,
        },
        None => select_threshold(&correlation, config.grid_step)?,
    };
    let graph = threshold_adjacency(&correlation, threshold.rho);

    let deg = degree_centrality(&graph);
    let clo = closeness(&graph);
    let bet = betweenness(&graph);
    let eig = if graph.edge_count() == 0 {
        vec![0.0; graph.n()]
    } else {
        eigenvector_centrality(&graph)?.0
    };
    let clu = weighted_clustering(&graph);
    let stock: Vec<StockFeatures> = (0..graph.n())
        .map(|i| StockFeatures {
            log_return: returns.mean_return(i),
            degree_centrality: deg[i],
            closeness: clo[i],
            betweenness: bet[i],
            eigenvector: eig[i],
            clustering: clu[i],
        })
        .collect();

    let partition = louvain_partition(&graph, config.louvain_seed);
    let global = global_features(
        &graph,
        &correlation,
        &returns,
        config.louvain_seed,
        config.resilience_f,
    )?;

    Ok(WindowComputation {
        graph,
        correlation,
        threshold,
        partition,
        stock,
        global,
    })
}

/// Computes all windows in parallel and assembles the time-aligned series.
/// Every window must contain the same tickers in the same order.
pub fn compute_feature_series(
    windows: &[PricePanel],
    config: &NetworkConfig,
) -> Result<(FeatureSeries, Vec<WindowSummary>)> {
    if windows.is_empty() {
        return Err(Error::input("no windows to compute"));
    }
    let tickers = windows[0].tickers.clone();
    for (i, w) in windows.iter().enumerate() {
        if w.tickers != tickers {
            return Err(Error::input(format!(
                "window {i} has a different ticker set"
            )));
        }
    }

    let computed: Vec<WindowComputation> = windows
        .par_iter()
        .enumerate()
        .map(|(i, panel)| {
            compute_window(panel, config)
                .map_err(|e| Error::input(format!("window {i}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;

    let n_stocks = tickers.len();
    let mut stock: Vec<Vec<StockFeatures>> = vec![Vec::with_capacity(computed.len()); n_stocks];
    let mut global = Vec::with_capacity(computed.len());
    let mut summaries = Vec::with_capacity(computed.len());
    for (w, comp) in computed.into_iter().enumerate() {
        for (s, feats) in comp.stock.iter().enumerate() {
            stock[s].push(*feats);
        }
        global.push(comp.global);
        summaries.push(WindowSummary {
            window: w,
            rho: comp.threshold.rho,
            rho_fallback: comp.threshold.fallback,
            edge_count: comp.graph.edge_count(),
        });
    }

    Ok((
        FeatureSeries {
            tickers,
            stock,
            global,
        },
        summaries,
    ))
}

/// Settings for the forecasting run.
#[derive(Debug, Clone, Serialize)]
pub struct ForecastConfig {
    pub n_lags: usize,
    /// Override for the smoothing window; `None` uses 10% of the window
    /// count.
    pub smooth_window: Option<usize>,
    pub test_fraction: f64,
    pub split_seed: u64,
    pub forest: ForestParams,
    pub boosting: BoostingParams,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            n_lags: 5,
            smooth_window: None,
            test_fraction: 0.15,
            split_seed: 0,
            forest: ForestParams::default(),
            boosting: BoostingParams::default(),
        }
    }
}

/// Forecast outcome: the scored report plus the ranked selection table.
pub struct ForecastOutcome {
    pub report: ForecastReport,
    pub selection: Vec<SelectionEntry>,
    pub test_tickers: Vec<String>,
}

fn rows_matrix(ds: &ForecastDataset, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(rows.len() * ds.n_cols);
    let mut y = Vec::with_capacity(rows.len());
    for &r in rows {
        x.extend_from_slice(ds.row(r));
        y.push(ds.target[r]);
    }
    (x, y)
}

/// Validation R² of a model fit on the first 80% of the training rows and
/// evaluated on the last 20%; undefined or negative scores clamp to 0 when
/// combined downstream.
fn validation_r2<F>(ds: &ForecastDataset, train: &[usize], fit: F) -> Result<f64>
where
    F: Fn(&[f64], usize, usize, &[f64]) -> Result<Model>,
{
    let cut = (train.len() * 4) / 5;
    if cut == 0 || cut == train.len() {
        return Err(Error::input(
            "too few training rows for a validation split",
        ));
    }
    let (fit_rows, val_rows) = train.split_at(cut);
    let (xf, yf) = rows_matrix(ds, fit_rows);
    let (xv, yv) = rows_matrix(ds, val_rows);
    let model = fit(&xf, fit_rows.len(), ds.n_cols, &yf)?;
    let preds = model.predict_all(&xv, val_rows.len(), ds.n_cols);
    Ok(r2_score(&yv, &preds).unwrap_or(0.0))
}

/// Full forecasting run: smooth, lag, split, select, fit the five models,
/// and score every test stock.
pub fn run_forecast(fs: &FeatureSeries, config: &ForecastConfig) -> Result<ForecastOutcome> {
    let window = config
        .smooth_window
        .unwrap_or_else(|| choose_window(fs.n_windows()));
    let mut ds = make_lagged(fs, window, config.n_lags)?;
    let (_, test_tickers) = split_stocks(&ds.tickers, config.test_fraction, config.split_seed)?;
    ds.apply_split(&test_tickers);

    let (selected, selection) = select_features(&ds)?;

    // LRbase regresses on the lag-1 log return only, selection aside.
    let lr_cols = vec![ds
        .column_index("log_return_1")
        .expect("log_return_1 column always exists")];
    let lr_ds = ds.with_columns(&lr_cols);

    // RFRbase uses the log-return lags that survived selection, or falls
    // back to lag 1 when none did.
    let mut base_cols: Vec<usize> = ds
        .columns
        .iter()
        .enumerate()
        .filter(|(_, name)| {
            name.starts_with("log_return_")
                && selected.columns.iter().any(|c| c == *name)
        })
        .map(|(c, _)| c)
        .collect();
    if base_cols.is_empty() {
        base_cols = lr_cols.clone();
    }
    let base_ds = ds.with_columns(&base_cols);

    let train = selected.train_rows();
    if train.len() < 2 {
        return Err(Error::input("too few training rows"));
    }

    let (x_sel, y_sel) = rows_matrix(&selected, &train);
    let (x_lr, y_lr) = rows_matrix(&lr_ds, &train);
    let (x_base, y_base) = rows_matrix(&base_ds, &train);

    let rfr = fit_random_forest(&x_sel, train.len(), selected.n_cols, &y_sel, &config.forest)
        .map_err(|e| Error::input(format!("RFR fit: {e}")))?;
    let gbr = fit_gradient_boosting(&x_sel, train.len(), selected.n_cols, &y_sel, &config.boosting)
        .map_err(|e| Error::input(format!("GBR fit: {e}")))?;
    let lrbase = fit_linear(&x_lr, train.len(), 1, &y_lr)
        .map_err(|e| Error::input(format!("LRbase fit: {e}")))?;
    let rfrbase = fit_random_forest(&x_base, train.len(), base_ds.n_cols, &y_base, &config.forest)
        .map_err(|e| Error::input(format!("RFRbase fit: {e}")))?;

    let rfr_val = validation_r2(&selected, &train, |x, r, c, y| {
        fit_random_forest(x, r, c, y, &config.forest)
    })
    .map_err(|e| Error::input(format!("wA validation (RFR): {e}")))?;
    let gbr_val = validation_r2(&selected, &train, |x, r, c, y| {
        fit_gradient_boosting(x, r, c, y, &config.boosting)
    })
    .map_err(|e| Error::input(format!("wA validation (GBR): {e}")))?;

    let mut scores = Vec::new();
    let mut sorted_tests = test_tickers.clone();
    sorted_tests.sort();
    for ticker in &sorted_tests {
        let s = ds.tickers.iter().position(|t| t == ticker).unwrap();
        let rows: Vec<usize> = (0..ds.n_rows).filter(|&r| ds.row_stock[r] == s).collect();
        let (xs, truth) = rows_matrix(&selected, &rows);
        let (xl, _) = rows_matrix(&lr_ds, &rows);
        let (xb, _) = rows_matrix(&base_ds, &rows);

        let p_rfr = rfr.predict_all(&xs, rows.len(), selected.n_cols);
        let p_gbr = gbr.predict_all(&xs, rows.len(), selected.n_cols);
        let p_lr = lrbase.predict_all(&xl, rows.len(), 1);
        let p_base = rfrbase.predict_all(&xb, rows.len(), base_ds.n_cols);
        let p_wa = weighted_average(&p_rfr, rfr_val, &p_gbr, gbr_val);

        for (model, preds) in [
            ("RFR", &p_rfr),
            ("LRbase", &p_lr),
            ("GBR", &p_gbr),
            ("wA", &p_wa),
            ("RFRbase", &p_base),
        ] {
            scores.push(StockScore {
                ticker: ticker.clone(),
                model: model.to_string(),
                r2: r2_score(&truth, preds),
                mae: mae(&truth, preds),
            });
        }
    }

    let config_echo = serde_json::json!({
        "smoothing_window": window,
        "n_lags": config.n_lags,
        "test_fraction": config.test_fraction,
        "split_seed": config.split_seed,
        "forest": config.forest,
        "boosting": config.boosting,
        "validation_r2": {"RFR": rfr_val, "GBR": gbr_val},
        "median": "linear interpolation",
    });

    Ok(ForecastOutcome {
        report: summarize(scores, config_echo),
        selection,
        test_tickers: sorted_tests,
    })
}
