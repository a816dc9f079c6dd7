//! Bivariate Granger causality with the SSR F-test over a lag range.
//!
//! For each lag q, a restricted model (intercept + q own lags of the target)
//! is compared against an unrestricted model that adds q lags of the
//! candidate series. F = ((SSR_r - SSR_u)/q) / (SSR_u/(n - 2q - 1)), with
//! the p-value from the F upper tail. Only the SSR F-test is implemented.

use serde::Serialize;

use crate::dist::f_pvalue;
use crate::error::{Error, Result};
use crate::linalg::cholesky_solve;

/// Per-lag test record.
#[derive(Debug, Clone, Serialize)]
pub struct LagResult {
    pub lag: usize,
    pub f: f64,
    pub p: f64,
    /// True when SSR_u collapsed to zero and p was pinned to 0.
    pub degenerate: bool,
}

/// Result of a bivariate Granger test for one candidate variable.
#[derive(Debug, Clone, Serialize)]
pub struct GrangerResult {
    pub variable: String,
    pub lags: Vec<LagResult>,
    /// Lag with the smallest p-value (smallest lag wins ties).
    pub best_lag: usize,
    /// Sample length of the input series.
    pub n_obs: usize,
}

/// Entry of a full feature scan; untestable features carry no result.
#[derive(Debug, Clone, Serialize)]
pub struct GrangerScanEntry {
    pub variable: String,
    pub best_lag: Option<usize>,
    pub f: Option<f64>,
    pub p: Option<f64>,
    pub significant: bool,
    pub untestable: bool,
}

/// Least squares via normal equations, returning coefficients and the sum of
/// squared residuals. `x` is row-major n_rows x n_cols and must include an
/// intercept column. A ridge jitter of 1e-10 is applied once if the plain
/// normal equations are singular.
pub fn ols_fit(x: &[f64], n_rows: usize, n_cols: usize, y: &[f64]) -> Result<(Vec<f64>, f64)> {
    if n_rows <= n_cols {
        return Err(Error::input(format!(
            "OLS needs more rows ({n_rows}) than columns ({n_cols})"
        )));
    }
    debug_assert_eq!(x.len(), n_rows * n_cols);
    debug_assert_eq!(y.len(), n_rows);

    let mut xtx = vec![0.0; n_cols * n_cols];
    let mut xty = vec![0.0; n_cols];
    for r in 0..n_rows {
        let row = &x[r * n_cols..(r + 1) * n_cols];
        for i in 0..n_cols {
            xty[i] += row[i] * y[r];
            for j in i..n_cols {
                xtx[i * n_cols + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..n_cols {
        for j in 0..i {
            xtx[i * n_cols + j] = xtx[j * n_cols + i];
        }
    }

    let coef = match cholesky_solve(&xtx, &xty, n_cols) {
        Ok(c) => c,
        Err(_) => {
            let mut jittered = xtx.clone();
            for i in 0..n_cols {
                jittered[i * n_cols + i] += 1e-10;
            }
            cholesky_solve(&jittered, &xty, n_cols)
                .map_err(|_| Error::numeric("design matrix rank-deficient beyond jitter rescue"))?
        }
    };

    let mut ssr = 0.0;
    for r in 0..n_rows {
        let row = &x[r * n_cols..(r + 1) * n_cols];
        let fit: f64 = row.iter().zip(&coef).map(|(a, b)| a * b).sum();
        let resid = y[r] - fit;
        ssr += resid * resid;
    }
    Ok((coef, ssr))
}

/// Bivariate Granger test of "x causes y" for lags 1..=max_lag.
pub fn granger_test(x: &[f64], y: &[f64], max_lag: usize) -> Result<GrangerResult> {
    if x.len() != y.len() {
        return Err(Error::input("series lengths differ"));
    }
    if max_lag == 0 {
        return Err(Error::input("max_lag must be at least 1"));
    }
    let len = y.len();
    if len <= 3 * max_lag + 3 {
        return Err(Error::input(format!(
            "series length {len} too short for max_lag {max_lag} (needs > {})",
            3 * max_lag + 3
        )));
    }

    let mut lags = Vec::with_capacity(max_lag);
    for q in 1..=max_lag {
        let n = len - q;
        let restricted_cols = 1 + q;
        let unrestricted_cols = 1 + 2 * q;

        let mut xr = Vec::with_capacity(n * restricted_cols);
        let mut xu = Vec::with_capacity(n * unrestricted_cols);
        let mut target = Vec::with_capacity(n);
        for t in q..len {
            target.push(y[t]);
            xr.push(1.0);
            xu.push(1.0);
            for k in 1..=q {
                xr.push(y[t - k]);
                xu.push(y[t - k]);
            }
            for k in 1..=q {
                xu.push(x[t - k]);
            }
        }

        let (_, ssr_r) = ols_fit(&xr, n, restricted_cols, &target)?;
        let (_, ssr_u) = ols_fit(&xu, n, unrestricted_cols, &target)?;
        let df = n - 2 * q - 1;
        let degenerate = ssr_u <= 1e-300;
        let (f, p) = if degenerate {
            (f64::INFINITY, 0.0)
        } else {
            let f = ((ssr_r - ssr_u).max(0.0) / q as f64) / (ssr_u / df as f64);
            (f, f_pvalue(f, q, df))
        };
        lags.push(LagResult {
            lag: q,
            f,
            p,
            degenerate,
        });
    }

    let best_lag = lags
        .iter()
        .min_by(|a, b| a.p.partial_cmp(&b.p).unwrap().then(a.lag.cmp(&b.lag)))
        .map(|r| r.lag)
        .unwrap();
    Ok(GrangerResult {
        variable: String::new(),
        lags,
        best_lag,
        n_obs: len,
    })
}

fn variance(series: &[f64]) -> f64 {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// One Granger test per named feature against the target, reported in
/// variable-name order. Constant features are marked untestable.
pub fn scan_all(
    features: &[(String, Vec<f64>)],
    target: &[f64],
    max_lag: usize,
) -> Result<Vec<GrangerScanEntry>> {
    let mut entries = Vec::with_capacity(features.len());
    for (name, series) in features {
        if variance(series) <= 0.0 {
            entries.push(GrangerScanEntry {
                variable: name.clone(),
                best_lag: None,
                f: None,
                p: None,
                significant: false,
                untestable: true,
            });
            continue;
        }
        let result = granger_test(series, target, max_lag)?;
        let best = result
            .lags
            .iter()
            .find(|l| l.lag == result.best_lag)
            .unwrap();
        entries.push(GrangerScanEntry {
            variable: name.clone(),
            best_lag: Some(best.lag),
            f: Some(best.f),
            p: Some(best.p),
            significant: best.p < 0.05,
            untestable: false,
        });
    }
    entries.sort_by(|a, b| a.variable.cmp(&b.variable));
    Ok(entries)
}
