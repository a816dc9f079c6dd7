//! Log-returns, the per-window Pearson correlation matrix, and its largest
//! eigenvalue.
//!
//! Moments are population (1/N) moments over the window; the 1/N vs 1/(N-1)
//! choice cancels in the Pearson ratio. Constant-price tickers stay in the
//! matrix with zeroed correlations so index alignment with the graph holds.

use crate::error::{Error, Result};
use crate::ingest::PricePanel;

/// Matrix of log-returns, one row fewer than the source panel.
#[derive(Debug, Clone)]
pub struct ReturnMatrix {
    pub tickers: Vec<String>,
    values: Vec<f64>,
    n_rows: usize,
}

impl ReturnMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_tickers(&self) -> usize {
        self.tickers.len()
    }

    #[inline]
    pub fn value(&self, row: usize, ticker: usize) -> f64 {
        self.values[row * self.tickers.len() + ticker]
    }

    pub fn column(&self, ticker: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.value(r, ticker)).collect()
    }

    /// Mean log-return of one ticker over the window.
    pub fn mean_return(&self, ticker: usize) -> f64 {
        self.column(ticker).iter().sum::<f64>() / self.n_rows as f64
    }
}

/// Symmetric Pearson correlation matrix of log-returns with unit diagonal.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub tickers: Vec<String>,
    values: Vec<f64>,
    /// Population standard deviation per ticker over the window.
    pub stdevs: Vec<f64>,
    /// Tickers whose returns had zero variance; their correlations are 0.
    pub degenerate: Vec<bool>,
}

impl CorrelationMatrix {
    pub fn n(&self) -> usize {
        self.tickers.len()
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.tickers.len() + j]
    }

    /// Builds a matrix directly from entries; used by synthetic constructions.
    pub fn from_values(tickers: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = tickers.len();
        if values.len() != n * n {
            return Err(Error::input("correlation matrix shape mismatch"));
        }
        for i in 0..n {
            for j in 0..n {
                if (values[i * n + j] - values[j * n + i]).abs() > 1e-12 {
                    return Err(Error::input("correlation matrix not symmetric"));
                }
            }
        }
        Ok(CorrelationMatrix {
            tickers,
            values,
            stdevs: vec![1.0; n],
            degenerate: vec![false; n],
        })
    }
}

/// values[t][i] = ln(P_i(t+1)) - ln(P_i(t)).
pub fn log_returns(panel: &PricePanel) -> Result<ReturnMatrix> {
    if panel.n_rows() < 2 {
        return Err(Error::input("panel needs at least 2 timestamps"));
    }
    let n = panel.n_tickers();
    let n_rows = panel.n_rows() - 1;
    let mut values = Vec::with_capacity(n_rows * n);
    for t in 0..n_rows {
        for i in 0..n {
            let a = panel.price(t, i);
            let b = panel.price(t + 1, i);
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::input(format!(
                    "non-positive price for ticker {} at row {}",
                    panel.tickers[i], t
                )));
            }
            values.push(b.ln() - a.ln());
        }
    }
    Ok(ReturnMatrix {
        tickers: panel.tickers.clone(),
        values,
        n_rows,
    })
}

/// C_ij = (<r_i r_j> - <r_i><r_j>) / (sigma_i sigma_j) with 1/N moments.
pub fn correlation_matrix(returns: &ReturnMatrix) -> Result<CorrelationMatrix> {
    let n = returns.n_tickers();
    let rows = returns.n_rows();
    if rows < 2 {
        return Err(Error::input("correlation needs at least 2 return rows"));
    }
    let inv = 1.0 / rows as f64;
    let mut means = vec![0.0; n];
    for t in 0..rows {
        for i in 0..n {
            means[i] += returns.value(t, i);
        }
    }
    for m in means.iter_mut() {
        *m *= inv;
    }
    let mut stdevs = vec![0.0; n];
    for t in 0..rows {
        for i in 0..n {
            let d = returns.value(t, i) - means[i];
            stdevs[i] += d * d;
        }
    }
    let degenerate: Vec<bool> = stdevs.iter().map(|&v| v <= 0.0).collect();
    for s in stdevs.iter_mut() {
        *s = (*s * inv).sqrt();
    }

    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let c = if degenerate[i] || degenerate[j] {
                0.0
            } else {
                let mut cov = 0.0;
                for t in 0..rows {
                    cov += (returns.value(t, i) - means[i]) * (returns.value(t, j) - means[j]);
                }
                (cov * inv) / (stdevs[i] * stdevs[j])
            };
            values[i * n + j] = c;
            values[j * n + i] = c;
        }
    }
    Ok(CorrelationMatrix {
        tickers: returns.tickers.clone(),
        values,
        stdevs,
        degenerate,
    })
}

/// Largest eigenvalue of the correlation matrix by power iteration with a
/// deterministic all-ones start vector. Relative tolerance 1e-10, at most
/// 10000 iterations.
pub fn max_eigenvalue(corr: &CorrelationMatrix) -> Result<f64> {
    let n = corr.n();
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for iter in 0..10_000 {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += corr.value(i, j) * x[j];
            }
            y[i] = acc;
        }
        let next = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::numeric("power iteration hit the zero vector"));
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
        let residual = (next - lambda).abs();
        if iter > 0 && residual <= 1e-10 * next.abs().max(1.0) {
            return Ok(next);
        }
        lambda = next;
    }
    Err(Error::NonConvergence {
        iterations: 10_000,
        residual: f64::NAN,
    })
}
