//! Loading, cleaning, and windowing of raw closing-price panels.
//!
//! Input CSV schema: first column `timestamp` (ISO-8601), one column per
//! ticker afterwards. The optional sector file is a two-column CSV
//! `ticker,sector`. Missing or non-numeric price cells are carried as NaN
//! until [`clean_and_align`] drops the affected tickers.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};

use crate::error::{Error, Result};

/// Aligned matrix of closing prices: tickers × timestamps.
///
/// Prices are stored row-major, one row per timestamp. After cleaning every
/// cell is finite and positive; before cleaning absent cells are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    pub tickers: Vec<String>,
    pub timestamps: Vec<NaiveDateTime>,
    prices: Vec<f64>,
    pub sectors: BTreeMap<String, String>,
}

impl PricePanel {
    pub fn new(
        tickers: Vec<String>,
        timestamps: Vec<NaiveDateTime>,
        prices: Vec<f64>,
        sectors: BTreeMap<String, String>,
    ) -> Result<Self> {
        if prices.len() != tickers.len() * timestamps.len() {
            return Err(Error::input(format!(
                "price matrix has {} cells, expected {} rows x {} tickers",
                prices.len(),
                timestamps.len(),
                tickers.len()
            )));
        }
        for pair in timestamps.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::input(format!(
                    "timestamps not strictly increasing at {}",
                    pair[1]
                )));
            }
        }
        Ok(PricePanel {
            tickers,
            timestamps,
            prices,
            sectors,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn n_tickers(&self) -> usize {
        self.tickers.len()
    }

    #[inline]
    pub fn price(&self, row: usize, ticker: usize) -> f64 {
        self.prices[row * self.tickers.len() + ticker]
    }

    pub fn sector(&self, ticker: &str) -> &str {
        self.sectors.get(ticker).map(String::as_str).unwrap_or("UNKNOWN")
    }

    /// Column of prices for one ticker, in time order.
    pub fn column(&self, ticker: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|r| self.price(r, ticker)).collect()
    }
}

fn parse_instant(raw: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    if let Ok(dt) = NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S") {
        return Some(dt);
    }
    if let Ok(dt) = NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S") {
        return Some(dt);
    }
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(raw) {
        return Some(dt.naive_utc());
    }
    if let Ok(d) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        return d.and_hms_opt(0, 0, 0);
    }
    None
}

/// Loads a raw price panel from CSV. Non-numeric price cells are kept as NaN;
/// unparsable timestamps and duplicate ticker columns are hard errors.
pub fn load_prices(path: &Path, sector_path: Option<&Path>) -> Result<PricePanel> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() || headers.get(0).map(str::trim) != Some("timestamp") {
        return Err(Error::input("missing timestamp column"));
    }
    let tickers: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
    if tickers.is_empty() {
        return Err(Error::input("no ticker columns in header"));
    }
    {
        let mut seen = std::collections::BTreeSet::new();
        for t in &tickers {
            if !seen.insert(t.as_str()) {
                return Err(Error::input(format!("duplicate ticker column '{t}'")));
            }
        }
    }

    let mut timestamps = Vec::new();
    let mut prices = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = idx + 2; // 1-based, after the header
        let ts_raw = record.get(0).unwrap_or("");
        let ts = parse_instant(ts_raw)
            .ok_or_else(|| Error::input(format!("unparsable timestamp '{ts_raw}' at row {row_no}")))?;
        if let Some(last) = timestamps.last() {
            if ts <= *last {
                return Err(Error::input(format!(
                    "timestamps not strictly increasing at row {row_no}"
                )));
            }
        }
        timestamps.push(ts);
        for col in 0..tickers.len() {
            let cell = record.get(col + 1).unwrap_or("").trim();
            prices.push(cell.parse::<f64>().unwrap_or(f64::NAN));
        }
    }

    let sectors = match sector_path {
        Some(p) => load_sectors(p)?,
        None => BTreeMap::new(),
    };

    PricePanel::new(tickers, timestamps, prices, sectors)
}

fn load_sectors(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut map = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let ticker = record.get(0).unwrap_or("").trim().to_string();
        if ticker.is_empty() || ticker.eq_ignore_ascii_case("ticker") {
            continue;
        }
        let sector = record.get(1).unwrap_or("UNKNOWN").trim().to_string();
        map.insert(ticker, sector);
    }
    Ok(map)
}

/// Drops every ticker with at least one absent or non-positive price over the
/// full range. Returns the surviving panel and the dropped tickers.
pub fn clean_and_align(raw: &PricePanel) -> Result<(PricePanel, Vec<String>)> {
    let n_rows = raw.n_rows();
    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    for (i, ticker) in raw.tickers.iter().enumerate() {
        let ok = (0..n_rows).all(|r| {
            let p = raw.price(r, i);
            p.is_finite() && p > 0.0
        });
        if ok {
            keep.push(i);
        } else {
            dropped.push(ticker.clone());
        }
    }
    if keep.is_empty() {
        return Err(Error::input("no ticker survives cleaning"));
    }
    let tickers: Vec<String> = keep.iter().map(|&i| raw.tickers[i].clone()).collect();
    let mut prices = Vec::with_capacity(n_rows * keep.len());
    for r in 0..n_rows {
        for &i in &keep {
            prices.push(raw.price(r, i));
        }
    }
    let panel = PricePanel::new(tickers, raw.timestamps.clone(), prices, raw.sectors.clone())?;
    Ok((panel, dropped))
}

fn slice_panel(panel: &PricePanel, start: usize, end: usize) -> PricePanel {
    let n = panel.n_tickers();
    PricePanel {
        tickers: panel.tickers.clone(),
        timestamps: panel.timestamps[start..end].to_vec(),
        prices: panel.prices[start * n..end * n].to_vec(),
        sectors: panel.sectors.clone(),
    }
}

/// Consecutive non-overlapping windows of `window_len` rows, in time order.
/// A trailing remainder shorter than `window_len` is discarded.
pub fn split_windows(panel: &PricePanel, window_len: usize) -> Result<Vec<PricePanel>> {
    if window_len < 3 {
        return Err(Error::input("window_len must be at least 3"));
    }
    if window_len > panel.n_rows() {
        return Err(Error::input(format!(
            "window_len {} exceeds panel length {}",
            window_len,
            panel.n_rows()
        )));
    }
    let count = panel.n_rows() / window_len;
    Ok((0..count)
        .map(|w| slice_panel(panel, w * window_len, (w + 1) * window_len))
        .collect())
}

/// Groups rows by calendar year of their timestamp. Years with fewer than
/// 3 rows are discarded (a correlation needs at least two returns).
pub fn split_calendar_years(panel: &PricePanel) -> Result<Vec<PricePanel>> {
    use chrono::Datelike;
    if panel.n_rows() == 0 {
        return Err(Error::input("empty panel"));
    }
    let mut windows = Vec::new();
    let mut start = 0;
    for r in 1..=panel.n_rows() {
        let boundary =
            r == panel.n_rows() || panel.timestamps[r].year() != panel.timestamps[start].year();
        if boundary {
            if r - start >= 3 {
                windows.push(slice_panel(panel, start, r));
            }
            start = r;
        }
    }
    if windows.is_empty() {
        return Err(Error::input("no calendar year holds at least 3 rows"));
    }
    Ok(windows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn toy_panel(prices: &[&[f64]], tickers: &[&str]) -> PricePanel {
        let timestamps: Vec<NaiveDateTime> = (0..prices.len())
            .map(|i| {
                NaiveDate::from_ymd_opt(2020, 1, 1)
                    .unwrap()
                    .and_hms_opt(0, 0, 0)
                    .unwrap()
                    + chrono::Duration::days(i as i64)
            })
            .collect();
        let flat: Vec<f64> = prices.iter().flat_map(|r| r.iter().copied()).collect();
        PricePanel::new(
            tickers.iter().map(|s| s.to_string()).collect(),
            timestamps,
            flat,
            BTreeMap::new(),
        )
        .unwrap()
    }

    #[test]
    fn loads_complete_csv() {
        let f = write_csv(
            "timestamp,AAA,BBB,CCC\n\
             2020-01-01,1,2,3\n2020-01-02,1.1,2.1,3.1\n2020-01-03,1.2,2.2,3.2\n\
             2020-01-06,1.3,2.3,3.3\n2020-01-07,1.4,2.4,3.4\n",
        );
        let panel = load_prices(f.path(), None).unwrap();
        assert_eq!(panel.n_rows(), 5);
        assert_eq!(panel.n_tickers(), 3);
        assert_eq!(panel.price(4, 2), 3.4);
    }

    #[test]
    fn empty_cell_becomes_absent() {
        let f = write_csv("timestamp,AAA,BBB\n2020-01-01,1,\n2020-01-02,2,3\n2020-01-03,3,4\n");
        let panel = load_prices(f.path(), None).unwrap();
        assert!(panel.price(0, 1).is_nan());
        assert_eq!(panel.price(1, 1), 3.0);
    }

    #[test]
    fn missing_timestamp_column_is_error() {
        let f = write_csv("date,AAA\n2020-01-01,1\n");
        let err = load_prices(f.path(), None).unwrap_err();
        assert!(err.to_string().contains("missing timestamp column"));
    }

    #[test]
    fn duplicate_ticker_is_error() {
        let f = write_csv("timestamp,AAA,AAA\n2020-01-01,1,2\n");
        assert!(load_prices(f.path(), None).is_err());
    }

    #[test]
    fn unparsable_timestamp_names_row() {
        let f = write_csv("timestamp,AAA\n2020-01-01,1\nnot-a-date,2\n");
        let err = load_prices(f.path(), None).unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
    }

    #[test]
    fn non_increasing_timestamps_rejected() {
        let f = write_csv("timestamp,AAA\n2020-01-02,1\n2020-01-01,2\n");
        assert!(load_prices(f.path(), None).is_err());
    }

    #[test]
    fn sectors_default_unknown() {
        let f = write_csv("timestamp,AAA\n2020-01-01,1\n");
        let s = write_csv("ticker,sector\nBBB,Tech\n");
        let panel = load_prices(f.path(), Some(s.path())).unwrap();
        assert_eq!(panel.sector("AAA"), "UNKNOWN");
        assert_eq!(panel.sector("BBB"), "Tech");
    }

    #[test]
    fn clean_is_noop_on_complete_panel() {
        let panel = toy_panel(&[&[1.0, 2.0], &[1.1, 2.1]], &["A", "B"]);
        let (cleaned, dropped) = clean_and_align(&panel).unwrap();
        assert!(dropped.is_empty());
        assert_eq!(cleaned, panel);
    }

    #[test]
    fn clean_drops_gappy_ticker() {
        let panel = toy_panel(
            &[&[1.0, 2.0, 3.0], &[1.1, f64::NAN, 3.1], &[1.2, 2.2, 3.2]],
            &["A", "B", "C"],
        );
        let (cleaned, dropped) = clean_and_align(&panel).unwrap();
        assert_eq!(cleaned.tickers, vec!["A", "C"]);
        assert_eq!(dropped, vec!["B"]);
        assert_eq!(cleaned.price(1, 1), 3.1);
    }

    #[test]
    fn clean_drops_non_positive_prices() {
        let panel = toy_panel(&[&[1.0, -2.0], &[1.1, 2.1]], &["A", "B"]);
        let (cleaned, dropped) = clean_and_align(&panel).unwrap();
        assert_eq!(cleaned.tickers, vec!["A"]);
        assert_eq!(dropped, vec!["B"]);
    }

    #[test]
    fn clean_errors_when_nothing_survives() {
        let panel = toy_panel(&[&[f64::NAN]], &["A"]);
        assert!(clean_and_align(&panel).is_err());
    }

    #[test]
    fn windows_discard_trailing_remainder() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0 + i as f64]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let panel = toy_panel(&refs, &["A"]);
        let windows = split_windows(&panel, 3).unwrap();
        assert_eq!(windows.len(), 3);
        // concatenating windows reproduces a prefix of the panel
        let mut concat = Vec::new();
        for w in &windows {
            for r in 0..w.n_rows() {
                concat.push(w.price(r, 0));
            }
        }
        let prefix: Vec<f64> = (0..9).map(|r| panel.price(r, 0)).collect();
        assert_eq!(concat, prefix);
    }

    #[test]
    fn window_len_bounds_enforced() {
        let panel = toy_panel(&[&[1.0], &[2.0], &[3.0]], &["A"]);
        assert!(split_windows(&panel, 2).is_err());
        assert!(split_windows(&panel, 4).is_err());
        assert_eq!(split_windows(&panel, 3).unwrap().len(), 1);
    }

    #[test]
    fn calendar_year_grouping() {
        let timestamps: Vec<NaiveDateTime> = [
            (2019, 10, 1),
            (2019, 11, 1),
            (2019, 12, 1),
            (2020, 1, 1),
            (2020, 2, 1),
            (2020, 3, 1),
            (2020, 4, 1),
            (2021, 1, 1), // lone 2021 row is discarded
        ]
        .iter()
        .map(|&(y, m, d)| {
            NaiveDate::from_ymd_opt(y, m, d)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap()
        })
        .collect();
        let prices: Vec<f64> = (0..8).map(|i| 1.0 + i as f64).collect();
        let panel =
            PricePanel::new(vec!["A".into()], timestamps, prices, BTreeMap::new()).unwrap();
        let windows = split_calendar_years(&panel).unwrap();
        assert_eq!(windows.len(), 2);
        assert_eq!(windows[0].n_rows(), 3);
        assert_eq!(windows[1].n_rows(), 4);
    }

    #[test]
    fn cleaning_monotonicity() {
        // adding an absent cell never increases the surviving set
        let full = toy_panel(&[&[1.0, 2.0], &[1.1, 2.1], &[1.2, 2.2]], &["A", "B"]);
        let gapped = toy_panel(&[&[1.0, 2.0], &[1.1, f64::NAN], &[1.2, 2.2]], &["A", "B"]);
        let (c1, _) = clean_and_align(&full).unwrap();
        let (c2, _) = clean_and_align(&gapped).unwrap();
        assert!(c2.tickers.iter().all(|t| c1.tickers.contains(t)));
    }
}
