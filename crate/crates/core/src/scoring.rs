//! Per-stock prediction scoring (R², MAE), model medians, improvement
//! ratios, and distribution histograms for the forecast report.

use std::collections::BTreeMap;

use serde::Serialize;

/// Model identifiers, in the report's canonical order.
pub const MODEL_NAMES: [&str; 5] = ["RFR", "LRbase", "GBR", "wA", "RFRbase"];

/// Coefficient of determination; `None` when the truth has zero variance
/// (the score is undefined and the stock is excluded from summaries).
pub fn r2_score(y_true: &[f64], y_pred: &[f64]) -> Option<f64> {
    assert_eq!(y_true.len(), y_pred.len());
    assert!(!y_true.is_empty());
    let n = y_true.len() as f64;
    let mean = y_true.iter().sum::<f64>() / n;
    let ss_tot: f64 = y_true.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot <= 0.0 {
        return None;
    }
    let ss_res: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    Some(1.0 - ss_res / ss_tot)
}

/// Mean absolute error.
pub fn mae(y_true: &[f64], y_pred: &[f64]) -> f64 {
    assert_eq!(y_true.len(), y_pred.len());
    assert!(!y_true.is_empty());
    y_true
        .iter()
        .zip(y_pred)
        .map(|(y, p)| (y - p).abs())
        .sum::<f64>()
        / y_true.len() as f64
}

/// Scores for one test stock under one model.
#[derive(Debug, Clone, Serialize)]
pub struct StockScore {
    pub ticker: String,
    pub model: String,
    /// None when the stock's realized targets were constant.
    pub r2: Option<f64>,
    pub mae: f64,
}

/// Median with linear interpolation between the middle order statistics.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// One histogram bin [lo, hi) (the last bin is closed on the right).
#[derive(Debug, Clone, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width histogram over the value range; a degenerate range yields a
/// single bin holding everything.
pub fn histogram(values: &[f64], n_bins: usize) -> Vec<HistogramBin> {
    assert!(n_bins > 0);
    if values.is_empty() {
        return Vec::new();
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    if hi <= lo {
        return vec![HistogramBin {
            lo,
            hi,
            count: values.len(),
        }];
    }
    let width = (hi - lo) / n_bins as f64;
    let mut bins: Vec<HistogramBin> = (0..n_bins)
        .map(|b| HistogramBin {
            lo: lo + b as f64 * width,
            hi: lo + (b + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for &v in values {
        let idx = (((v - lo) / width) as usize).min(n_bins - 1);
        bins[idx].count += 1;
    }
    bins
}

/// Aggregate per-model scores.
#[derive(Debug, Clone, Serialize)]
pub struct ModelSummary {
    pub model: String,
    pub median_r2: f64,
    pub median_mae: f64,
    /// Stocks whose constant targets made R² undefined.
    pub excluded_stocks: usize,
    pub r2_histogram: Vec<HistogramBin>,
    pub mae_histogram: Vec<HistogramBin>,
}

/// Full forecast evaluation: per-stock scores, per-model summaries, the
/// improvement of RFR over the better-scoring baseline, and the run
/// configuration echoed for reproducibility.
#[derive(Debug, Clone, Serialize)]
pub struct ForecastReport {
    pub scores: Vec<StockScore>,
    pub summaries: Vec<ModelSummary>,
    /// Name of the better baseline (LRbase or RFRbase) by median R².
    pub baseline_model: String,
    /// median_R2(RFR) / median_R2(baseline) − 1; None when the baseline
    /// median is not positive (the ratio is meaningless).
    pub improvement_ratio: Option<f64>,
    pub config: serde_json::Value,
}

const HISTOGRAM_BINS: usize = 20;

/// Builds the report from per-stock scores. Panics if any model named in
/// `MODEL_NAMES` has no scored stock.
pub fn summarize(scores: Vec<StockScore>, config: serde_json::Value) -> ForecastReport {
    let mut by_model: BTreeMap<&str, (Vec<f64>, Vec<f64>, usize)> = BTreeMap::new();
    for score in &scores {
        let entry = by_model
            .entry(score.model.as_str())
            .or_insert_with(|| (Vec::new(), Vec::new(), 0));
        match score.r2 {
            Some(r2) => entry.0.push(r2),
            None => entry.2 += 1,
        }
        entry.1.push(score.mae);
    }

    let mut summaries = Vec::new();
    for model in MODEL_NAMES {
        let (r2s, maes, excluded) = by_model
            .get(model)
            .unwrap_or_else(|| panic!("no scores for model {model}"));
        assert!(!r2s.is_empty(), "all stocks excluded for model {model}");
        summaries.push(ModelSummary {
            model: model.to_string(),
            median_r2: median(r2s),
            median_mae: median(maes),
            excluded_stocks: *excluded,
            r2_histogram: histogram(r2s, HISTOGRAM_BINS),
            mae_histogram: histogram(maes, HISTOGRAM_BINS),
        });
    }

    let median_of = |name: &str| {
        summaries
            .iter()
            .find(|s| s.model == name)
            .map(|s| s.median_r2)
            .unwrap()
    };
    let (lr, rfr_base) = (median_of("LRbase"), median_of("RFRbase"));
    let (baseline_model, baseline_median) = if lr >= rfr_base {
        ("LRbase".to_string(), lr)
    } else {
        ("RFRbase".to_string(), rfr_base)
    };
    let improvement_ratio = if baseline_median > 0.0 {
        Some(median_of("RFR") / baseline_median - 1.0)
    } else {
        None
    };

    ForecastReport {
        scores,
        summaries,
        baseline_model,
        improvement_ratio,
        config,
    }
}
