//! `marketnet`: build correlation networks from stock closing prices,
//! extract per-window network measures, test lead-lag relationships, and
//! forecast returns from lagged network features.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use marketnet_core::causality::scan_all;
use marketnet_core::features::FeatureSeries;
use marketnet_core::ingest::{
    clean_and_align, load_prices, split_calendar_years, split_windows, PricePanel,
};
use marketnet_core::metrics::GlobalFeatures;
use marketnet_core::models::{BoostingParams, ForestParams};
use marketnet_core::pipeline::{
    compute_feature_series, compute_window, run_forecast, ForecastConfig, NetworkConfig,
    WindowSummary,
};

#[derive(Parser)]
#[command(name = "marketnet", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build per-window networks and write the global feature series
    Network(NetworkArgs),
    /// Lead-lag F-tests of each feature column against the market return
    Granger(GrangerArgs),
    /// Train and score the forecasting models on lagged network features
    Forecast(ForecastArgs),
    /// Write per-window graphs as node-link JSON
    ExportGraph(ExportGraphArgs),
    /// Run network, granger, and forecast in one pass
    Report(ReportArgs),
}

/// Parameter presets: `long` mirrors multi-year daily panels (yearly-scale
/// windows, 5 lags), `short` mirrors intraday panels (14-row windows, 12
/// lags).
#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Long,
    Short,
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Closing-price CSV: a `timestamp` column plus one column per ticker
    #[arg(long)]
    prices: PathBuf,
    /// Optional `ticker,sector` CSV
    #[arg(long)]
    sectors: Option<PathBuf>,
    /// Parameter preset
    #[arg(long, value_enum, default_value_t = Mode::Long)]
    mode: Mode,
    /// Window length in rows (overrides the mode default)
    #[arg(long)]
    window_len: Option<usize>,
    /// Group windows by calendar year instead of fixed length
    #[arg(long)]
    calendar_years: bool,
    /// Correlation threshold: a number in (0, 1] or "auto"
    #[arg(long, default_value = "auto")]
    rho: String,
    /// Fraction of nodes removed in the resilience measure
    #[arg(long, default_value_t = 0.1)]
    resilience_f: f64,
    /// Seed for community detection and model fitting
    #[arg(long, default_value_t = 42)]
    model_seed: u64,
    /// Output directory (created if missing)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NetworkArgs {
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Args)]
struct GrangerArgs {
    /// Feature CSV produced by the `network` subcommand
    #[arg(long)]
    features: PathBuf,
    /// Preset controlling the default maximum lag
    #[arg(long, value_enum, default_value_t = Mode::Long)]
    mode: Mode,
    /// Maximum lag to scan (overrides the mode default of 5/12)
    #[arg(long)]
    max_lag: Option<usize>,
    /// Output directory (created if missing)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ForecastArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Number of lags per variable (overrides the mode default of 5/12)
    #[arg(long)]
    nlag: Option<usize>,
    /// Rolling-mean window (default: 10% of the window count)
    #[arg(long)]
    smooth_w: Option<usize>,
    /// Fraction of stocks held out for testing
    #[arg(long, default_value_t = 0.15)]
    test_frac: f64,
    /// Seed for the train/test stock split
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExportGraphArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Export only this window index (default: all windows)
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    nlag: Option<usize>,
    #[arg(long)]
    smooth_w: Option<usize>,
    #[arg(long, default_value_t = 0.15)]
    test_frac: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_lag: Option<usize>,
}

fn main() -> Result<()> {
    if let Ok(v) = std::env::var("MARKETNET_THREADS") {
        let n: usize = v
            .parse()
            .context("MARKETNET_THREADS must be a positive integer")?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .ok();
    }
    match Cli::parse().command {
        Command::Network(args) => cmd_network(&args.input).map(|_| ()),
        Command::Granger(args) => cmd_granger(&args),
        Command::Forecast(args) => cmd_forecast(&args),
        Command::ExportGraph(args) => cmd_export_graph(&args),
        Command::Report(args) => cmd_report(&args),
    }
}

// ---------------------------------------------------------------------------
// shared plumbing
// ---------------------------------------------------------------------------

impl Mode {
    fn default_n_lags(self) -> usize {
        match self {
            Mode::Long => 5,
            Mode::Short => 12,
        }
    }
}

/// Everything that shaped a run, echoed verbatim into each artifact.
#[derive(Serialize, Clone)]
struct EffectiveConfig {
    version: String,
    prices: String,
    sectors: Option<String>,
    mode: Mode,
    window_len: Option<usize>,
    calendar_years: bool,
    rho: String,
    resilience_f: f64,
    model_seed: u64,
    n_windows: usize,
    n_tickers: usize,
}

fn effective_config(args: &InputArgs, n_windows: usize, n_tickers: usize) -> EffectiveConfig {
    EffectiveConfig {
        version: env!("CARGO_PKG_VERSION").to_string(),
        prices: args.prices.display().to_string(),
        sectors: args.sectors.as_ref().map(|p| p.display().to_string()),
        mode: args.mode,
        window_len: args.window_len,
        calendar_years: args.calendar_years,
        rho: args.rho.clone(),
        resilience_f: args.resilience_f,
        model_seed: args.model_seed,
        n_windows,
        n_tickers,
    }
}

fn parse_rho(raw: &str) -> Result<Option<f64>> {
    if raw == "auto" {
        return Ok(None);
    }
    let rho: f64 = raw
        .parse()
        .with_context(|| format!("--rho must be a number or \"auto\", got {raw:?}"))?;
    if !(0.0 < rho && rho <= 1.0) {
        bail!("--rho must lie in (0, 1], got {rho}");
    }
    Ok(Some(rho))
}

fn network_config(args: &InputArgs) -> Result<NetworkConfig> {
    Ok(NetworkConfig {
        rho: parse_rho(&args.rho)?,
        resilience_f: args.resilience_f,
        louvain_seed: args.model_seed,
        ..Default::default()
    })
}

fn load_panel(args: &InputArgs) -> Result<(PricePanel, Vec<String>)> {
    let raw = load_prices(&args.prices, args.sectors.as_deref())
        .with_context(|| format!("reading {}", args.prices.display()))?;
    let (panel, dropped) = clean_and_align(&raw).context("cleaning price panel")?;
    Ok((panel, dropped))
}

fn build_windows(panel: &PricePanel, args: &InputArgs) -> Result<Vec<PricePanel>> {
    if args.calendar_years {
        return Ok(split_calendar_years(panel)?);
    }
    let window_len = match (args.window_len, args.mode) {
        (Some(len), _) => len,
        (None, Mode::Short) => 14,
        // yearly-scale windows: aim for about 30 of them
        (None, Mode::Long) => (panel.n_rows() / 30).max(3),
    };
    Ok(split_windows(panel, window_len)?)
}

/// Atomic write: temp file in the target directory, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn config_comment_lines(config: &EffectiveConfig) -> String {
    format!(
        "# marketnet v{} mode={} rho={} resilience_f={} model_seed={} \
         window_len={:?} calendar_years={} windows={} tickers={}\n",
        config.version,
        serde_json::to_value(config.mode).unwrap().as_str().unwrap(),
        config.rho,
        config.resilience_f,
        config.model_seed,
        config.window_len,
        config.calendar_years,
        config.n_windows,
        config.n_tickers,
    )
}

// ---------------------------------------------------------------------------
// network
// ---------------------------------------------------------------------------

struct NetworkRun {
    features: FeatureSeries,
    config: EffectiveConfig,
}

fn cmd_network(args: &InputArgs) -> Result<NetworkRun> {
    fs::create_dir_all(&args.out)?;
    let (panel, dropped) = load_panel(args)?;
    let windows = build_windows(&panel, args)?;
    let net_config = network_config(args)?;
    let (features, summaries) =
        compute_feature_series(&windows, &net_config).context("computing feature series")?;
    let config = effective_config(args, summaries.len(), panel.n_tickers());

    write_atomic(
        &args.out.join("dropped_tickers.txt"),
        (dropped.join("\n") + "\n").as_bytes(),
    )?;
    write_features_csv(&args.out.join("features.csv"), &features, &config)?;
    write_windows_csv(&args.out.join("windows.csv"), &summaries, &config)?;
    write_json(&args.out.join("run_config.json"), &config)?;

    Ok(NetworkRun { features, config })
}

fn write_features_csv(
    path: &Path,
    features: &FeatureSeries,
    config: &EffectiveConfig,
) -> Result<()> {
    let mut out = config_comment_lines(config).into_bytes();
    {
        let mut writer = csv::Writer::from_writer(&mut out);
        let mut header = vec!["window".to_string()];
        header.extend(GlobalFeatures::NETWORK_COLUMNS.iter().map(|s| s.to_string()));
        header.push("market_log_return".to_string());
        writer.write_record(&header)?;
        for (w, global) in features.global.iter().enumerate() {
            let mut record = vec![w.to_string()];
            record.extend(global.network_values().iter().map(|v| format!("{v:.12e}")));
            record.push(format!("{:.12e}", global.market_log_return));
            writer.write_record(&record)?;
        }
        writer.flush()?;
    }
    write_atomic(path, &out)
}

fn write_windows_csv(
    path: &Path,
    summaries: &[WindowSummary],
    config: &EffectiveConfig,
) -> Result<()> {
    let mut out = config_comment_lines(config).into_bytes();
    {
        let mut writer = csv::Writer::from_writer(&mut out);
        writer.write_record(["window", "rho", "rho_fallback", "edge_count"])?;
        for s in summaries {
            writer.write_record([
                s.window.to_string(),
                format!("{:.6}", s.rho),
                s.rho_fallback.to_string(),
                s.edge_count.to_string(),
            ])?;
        }
        writer.flush()?;
    }
    write_atomic(path, &out)
}

// ---------------------------------------------------------------------------
// granger
// ---------------------------------------------------------------------------

fn cmd_granger(args: &GrangerArgs) -> Result<()> {
    fs::create_dir_all(&args.out)?;
    let max_lag = args.max_lag.unwrap_or_else(|| args.mode.default_n_lags());
    let (columns, rows) = read_features_csv(&args.features)?;
    let target_idx = columns
        .iter()
        .position(|c| c == "market_log_return")
        .context("features CSV lacks a market_log_return column")?;
    let target: Vec<f64> = rows.iter().map(|r| r[target_idx]).collect();
    let features: Vec<(String, Vec<f64>)> = columns
        .iter()
        .enumerate()
        .filter(|(i, name)| *i != target_idx && *name != "window")
        .map(|(i, name)| (name.clone(), rows.iter().map(|r| r[i]).collect()))
        .collect();
    let entries = scan_all(&features, &target, max_lag).context("Granger scan")?;

    #[derive(Serialize)]
    struct GrangerReport<'a> {
        version: &'a str,
        features_csv: String,
        max_lag: usize,
        n_obs: usize,
        entries: Vec<marketnet_core::causality::GrangerScanEntry>,
    }
    write_json(
        &args.out.join("granger.json"),
        &GrangerReport {
            version: env!("CARGO_PKG_VERSION"),
            features_csv: args.features.display().to_string(),
            max_lag,
            n_obs: target.len(),
            entries,
        },
    )
}

fn read_features_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let columns: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row: Vec<f64> = record
            .iter()
            .map(|cell| cell.parse::<f64>().context("non-numeric feature cell"))
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("features CSV has no data rows");
    }
    Ok((columns, rows))
}

// ---------------------------------------------------------------------------
// forecast
// ---------------------------------------------------------------------------

fn forecast_config(args: &ForecastArgs) -> ForecastConfig {
    ForecastConfig {
        n_lags: args.nlag.unwrap_or_else(|| args.input.mode.default_n_lags()),
        smooth_window: args.smooth_w,
        test_fraction: args.test_frac,
        split_seed: args.seed,
        forest: ForestParams {
            seed: args.input.model_seed,
            ..Default::default()
        },
        boosting: BoostingParams {
            seed: args.input.model_seed,
            ..Default::default()
        },
    }
}

fn cmd_forecast(args: &ForecastArgs) -> Result<()> {
    let run = cmd_network(&args.input)?;
    run_and_write_forecast(&run, &forecast_config(args), &args.input.out)
}

fn run_and_write_forecast(
    run: &NetworkRun,
    config: &ForecastConfig,
    out: &Path,
) -> Result<()> {
    let outcome = run_forecast(&run.features, config).context("forecast")?;

    #[derive(Serialize)]
    struct ForecastArtifact<'a> {
        run: &'a EffectiveConfig,
        test_tickers: &'a [String],
        report: &'a marketnet_core::scoring::ForecastReport,
    }
    write_json(
        &out.join("forecast_report.json"),
        &ForecastArtifact {
            run: &run.config,
            test_tickers: &outcome.test_tickers,
            report: &outcome.report,
        },
    )?;

    // ranked selected features
    let mut sel = config_comment_lines(&run.config).into_bytes();
    {
        let mut writer = csv::Writer::from_writer(&mut sel);
        writer.write_record(["rank", "column", "abs_correlation"])?;
        for e in &outcome.selection {
            writer.write_record([
                e.rank.to_string(),
                e.column.clone(),
                format!("{:.6}", e.abs_correlation),
            ])?;
        }
        writer.flush()?;
    }
    write_atomic(&out.join("selection.csv"), &sel)?;

    // per-stock scores
    let mut sc = config_comment_lines(&run.config).into_bytes();
    {
        let mut writer = csv::Writer::from_writer(&mut sc);
        writer.write_record(["ticker", "model", "r2", "mae"])?;
        for s in &outcome.report.scores {
            writer.write_record([
                s.ticker.clone(),
                s.model.clone(),
                s.r2.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}")),
                format!("{:.6}", s.mae),
            ])?;
        }
        writer.flush()?;
    }
    write_atomic(&out.join("scores.csv"), &sc)?;

    // score-distribution bins for external plotting
    let mut hist = config_comment_lines(&run.config).into_bytes();
    {
        let mut writer = csv::Writer::from_writer(&mut hist);
        writer.write_record(["model", "metric", "lo", "hi", "count"])?;
        for summary in &outcome.report.summaries {
            for (metric, bins) in [("r2", &summary.r2_histogram), ("mae", &summary.mae_histogram)]
            {
                for b in bins {
                    writer.write_record([
                        summary.model.clone(),
                        metric.to_string(),
                        format!("{:.6}", b.lo),
                        format!("{:.6}", b.hi),
                        b.count.to_string(),
                    ])?;
                }
            }
        }
        writer.flush()?;
    }
    write_atomic(&out.join("histogram.csv"), &hist)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// export-graph
// ---------------------------------------------------------------------------

fn cmd_export_graph(args: &ExportGraphArgs) -> Result<()> {
    fs::create_dir_all(&args.input.out)?;
    let (panel, _) = load_panel(&args.input)?;
    let windows = build_windows(&panel, &args.input)?;
    let net_config = network_config(&args.input)?;
    let config = effective_config(&args.input, windows.len(), panel.n_tickers());

    let indices: Vec<usize> = match args.window {
        Some(i) => {
            if i >= windows.len() {
                bail!("--window {i} out of range: {} windows", windows.len());
            }
            vec![i]
        }
        None => (0..windows.len()).collect(),
    };

    #[derive(Serialize)]
    struct Node<'a> {
        id: &'a str,
        sector: &'a str,
        degree: usize,
        eigenvector_centrality: f64,
        community_id: usize,
    }
    #[derive(Serialize)]
    struct Edge<'a> {
        source: &'a str,
        target: &'a str,
        weight: f64,
    }
    #[derive(Serialize)]
    struct GraphExport<'a> {
        run: &'a EffectiveConfig,
        window: usize,
        rho: f64,
        rho_fallback: bool,
        nodes: Vec<Node<'a>>,
        edges: Vec<Edge<'a>>,
    }

    for i in indices {
        let comp = compute_window(&windows[i], &net_config)
            .with_context(|| format!("window {i}"))?;
        let nodes: Vec<Node> = (0..comp.graph.n())
            .map(|v| Node {
                id: &comp.graph.nodes[v],
                sector: panel.sector(&comp.graph.nodes[v]),
                degree: comp.graph.degree_of(v),
                eigenvector_centrality: comp.stock[v].eigenvector,
                community_id: comp.partition.assignments[v],
            })
            .collect();
        let edges: Vec<Edge> = comp
            .graph
            .edges
            .iter()
            .map(|&(a, b, w)| Edge {
                source: &comp.graph.nodes[a],
                target: &comp.graph.nodes[b],
                weight: w,
            })
            .collect();
        write_json(
            &args.input.out.join(format!("graph_window_{i}.json")),
            &GraphExport {
                run: &config,
                window: i,
                rho: comp.threshold.rho,
                rho_fallback: comp.threshold.fallback,
                nodes,
                edges,
            },
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// report (everything in one pass)
// ---------------------------------------------------------------------------

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let run = cmd_network(&args.input)?;

    let max_lag = args.max_lag.unwrap_or_else(|| args.input.mode.default_n_lags());
    let target: Vec<f64> = run
        .features
        .global
        .iter()
        .map(|g| g.market_log_return)
        .collect();
    let features: Vec<(String, Vec<f64>)> = GlobalFeatures::NETWORK_COLUMNS
        .iter()
        .enumerate()
        .map(|(c, name)| {
            (
                name.to_string(),
                run.features
                    .global
                    .iter()
                    .map(|g| g.network_values()[c])
                    .collect(),
            )
        })
        .collect();
    match scan_all(&features, &target, max_lag) {
        Ok(entries) => {
            #[derive(Serialize)]
            struct GrangerReport<'a> {
                run: &'a EffectiveConfig,
                max_lag: usize,
                n_obs: usize,
                entries: Vec<marketnet_core::causality::GrangerScanEntry>,
            }
            write_json(
                &args.input.out.join("granger.json"),
                &GrangerReport {
                    run: &run.config,
                    max_lag,
                    n_obs: target.len(),
                    entries,
                },
            )?;
        }
        Err(e) => eprintln!("skipping Granger scan: {e}"),
    }

    let forecast_args = ForecastArgs {
        input: args.input.clone(),
        nlag: args.nlag,
        smooth_w: args.smooth_w,
        test_frac: args.test_frac,
        seed: args.seed,
    };
    run_and_write_forecast(&run, &forecast_config(&forecast_args), &args.input.out)
}
