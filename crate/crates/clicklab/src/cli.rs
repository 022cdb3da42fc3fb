//! Operator entry points: run an experiment sweep, run the oracle suite, and
//! reshape results into figure-ready CSVs.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or
//! arguments. All randomness flows from the config's master seed, and no
//! command writes outside its output directory.

use crate::harness::{run_experiment, ExperimentConfig};
use crate::oracle::{default_suite, write_report_csv, OracleSuiteConfig};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config or arguments; maps to exit code 2.
    #[error("{0}")]
    Config(String),
    /// Failure while running or writing; maps to exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Declares what one run produced; CSVs are byte-identical across reruns of
/// the same config hash and seed, the manifest's timestamps are not.
#[derive(Debug, serde::Serialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub config_sha256: String,
    pub master_seed: u64,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
    pub outputs: Vec<String>,
}

fn now_unix_s() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn read_config_bytes(path: &Path) -> Result<(Vec<u8>, String), CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    Ok((bytes, hex::encode(digest)))
}

fn parse_config<T: serde::de::DeserializeOwned>(bytes: &[u8], path: &Path) -> Result<T, CliError> {
    serde_json::from_slice(bytes).map_err(|e| {
        CliError::Config(format!(
            "invalid config {}: {e} (line {}, column {})",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

fn with_thread_pool<T: Send>(
    threads: usize,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if threads > 0 {
        builder = builder.num_threads(threads);
    }
    let pool = builder.build().map_err(runtime)?;
    Ok(pool.install(f))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn finish_manifest(
    out_dir: &Path,
    config_sha256: String,
    master_seed: u64,
    started: u64,
    outputs: Vec<PathBuf>,
) -> Result<(), CliError> {
    let manifest = RunManifest {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256,
        master_seed,
        started_unix_s: started,
        finished_unix_s: now_unix_s(),
        outputs: outputs
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
    };
    let path = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(runtime)?;
    write_file(&path, text.as_bytes())
}

/// Run a full experiment sweep and write results, summary, diagnostics, and
/// a manifest into `out_dir`.
pub fn cmd_run(
    config_path: &Path,
    out_dir: &Path,
    threads: usize,
    quiet: bool,
) -> Result<(), CliError> {
    let started = now_unix_s();
    let (bytes, sha) = read_config_bytes(config_path)?;
    let config: ExperimentConfig = parse_config(&bytes, config_path)?;
    config
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    fs::create_dir_all(out_dir).map_err(runtime)?;
    if !quiet {
        eprintln!(
            "running sweep: {} exponents x {} train sizes x {} replications, {} features",
            config.exponents.len(),
            config.train_sizes.len(),
            config.replications,
            config.features.len()
        );
    }
    let report = with_thread_pool(threads, || run_experiment(&config))?
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let results_path = out_dir.join("results.csv");
    let summary_path = out_dir.join("summary.csv");
    let diagnostics_path = out_dir.join("diagnostics.csv");
    let mut buf = Vec::new();
    report.write_results_csv(&mut buf).map_err(runtime)?;
    write_file(&results_path, &buf)?;
    buf.clear();
    report.write_summary_csv(&mut buf).map_err(runtime)?;
    write_file(&summary_path, &buf)?;
    buf.clear();
    report.write_diagnostics_csv(&mut buf).map_err(runtime)?;
    write_file(&diagnostics_path, &buf)?;
    if !quiet {
        eprintln!("wrote {}", results_path.display());
    }
    finish_manifest(
        out_dir,
        sha,
        config.master_seed,
        started,
        vec![results_path, summary_path, diagnostics_path],
    )
}

/// Run the oracle claim suite and write its report into `out_dir`.
pub fn cmd_oracle(
    config_path: &Path,
    out_dir: &Path,
    threads: usize,
    quiet: bool,
) -> Result<(), CliError> {
    let started = now_unix_s();
    let (bytes, sha) = read_config_bytes(config_path)?;
    let config: OracleSuiteConfig = parse_config(&bytes, config_path)?;
    config
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    fs::create_dir_all(out_dir).map_err(runtime)?;
    if !quiet {
        eprintln!(
            "running oracle suite: {} replications per claim",
            config.replications
        );
    }
    let rows = with_thread_pool(threads, || default_suite(&config))?
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let report_path = out_dir.join("oracle_report.csv");
    let mut buf = Vec::new();
    write_report_csv(&rows, &mut buf).map_err(runtime)?;
    write_file(&report_path, &buf)?;
    if !quiet {
        for row in &rows {
            eprintln!("{}: {}", row.claim, row.status.as_str());
        }
    }
    finish_manifest(out_dir, sha, config.master_seed, started, vec![report_path])
}

/// The figure-shaped extracts `cmd_plotdata` can emit.
///
/// Performance figures are tidy `x,feature,mean,sd` tables:
/// - `fig1`: x = train size; true relevance, proxy, IPW-CTR (exponent 0.5)
/// - `fig2`: x = train size; CTR vs IPW-CTR (exponent 0.5)
/// - `fig3`: x = exponent; CTR vs IPW-CTR (train size 10,000)
/// - `fig4`: x = train size; Empirical-CTR vs CTR and IPW-CTR (exponent 0.5)
/// - `fig5`: x = train size; the four weighting variants (exponent 0.5)
/// - `fig7`: x = exponent; IPW-CTR vs IPW-COEC (train size 10,000)
///
/// `fig6` is the per-replication document-level correlation between IPW-CTR
/// and IPW-COEC at exponent 0.5, train size 10,000, read from the
/// diagnostics table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum FigureAxis {
    TrainSize,
    Exponent,
}

struct FigureSpec {
    axis: FigureAxis,
    /// Fixed exponent (for train-size figures) or fixed train size.
    fixed_exponent: f64,
    fixed_train_size: usize,
    series: &'static [&'static str],
}

fn figure_spec(figure: Figure) -> FigureSpec {
    let (axis, series): (FigureAxis, &'static [&'static str]) = match figure {
        Figure::Fig1 => (
            FigureAxis::TrainSize,
            &["TRUE_RELEVANCE", "PROXY", "IPW_CTR"],
        ),
        Figure::Fig2 => (FigureAxis::TrainSize, &["CTR", "IPW_CTR"]),
        Figure::Fig3 => (FigureAxis::Exponent, &["CTR", "IPW_CTR"]),
        Figure::Fig4 => (
            FigureAxis::TrainSize,
            &["EMPIRICAL_CTR", "CTR", "IPW_CTR"],
        ),
        Figure::Fig5 => (
            FigureAxis::TrainSize,
            &["IPW_CTR", "IPW_COEC", "EMPIRICAL_CTR", "COEC"],
        ),
        Figure::Fig6 => (FigureAxis::TrainSize, &[]),
        Figure::Fig7 => (FigureAxis::Exponent, &["IPW_CTR", "IPW_COEC"]),
    };
    FigureSpec {
        axis,
        fixed_exponent: 0.5,
        fixed_train_size: 10_000,
        series,
    }
}

#[derive(Debug, Clone)]
struct SummaryRow {
    exponent: f64,
    train_size: usize,
    feature: String,
    mean: f64,
    sd: f64,
}

fn results_dir(results_path: &Path) -> PathBuf {
    if results_path.is_dir() {
        results_path.to_path_buf()
    } else {
        results_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

fn read_summary(dir: &Path) -> Result<Vec<SummaryRow>, CliError> {
    let path = dir.join("summary.csv");
    let mut reader = csv::Reader::from_path(&path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(runtime)?;
        rows.push(SummaryRow {
            exponent: record[0].parse().map_err(runtime)?,
            train_size: record[1].parse().map_err(runtime)?,
            feature: record[2].to_string(),
            mean: record[3].parse().map_err(runtime)?,
            sd: record[4].parse().map_err(runtime)?,
        });
    }
    Ok(rows)
}

/// Reshape a finished run's outputs into the tidy CSV for one figure.
///
/// `results_path` may be the run's output directory or any file inside it;
/// the summary and diagnostics tables are located beside it. Missing sweep
/// coverage is a config error naming the absent cells.
pub fn cmd_plotdata(results_path: &Path, figure: Figure, out_path: &Path) -> Result<(), CliError> {
    let dir = results_dir(results_path);
    if figure == Figure::Fig6 {
        return plot_fig6(&dir, out_path);
    }
    let spec = figure_spec(figure);
    let rows = read_summary(&dir)?;
    let mut out = Vec::new();
    let mut missing = Vec::new();
    match spec.axis {
        FigureAxis::TrainSize => {
            let mut train_sizes: Vec<usize> = rows
                .iter()
                .filter(|r| r.exponent == spec.fixed_exponent)
                .map(|r| r.train_size)
                .collect();
            train_sizes.sort_unstable();
            train_sizes.dedup();
            if train_sizes.is_empty() {
                missing.push(format!("exponent={}", spec.fixed_exponent));
            }
            writeln!(
                out,
                "train_size,feature,mean_clicks_per_search,sd_clicks_per_search"
            )
            .map_err(runtime)?;
            for &t in &train_sizes {
                for &feature in spec.series {
                    match rows.iter().find(|r| {
                        r.exponent == spec.fixed_exponent
                            && r.train_size == t
                            && r.feature == feature
                    }) {
                        Some(r) => writeln!(out, "{t},{feature},{},{}", r.mean, r.sd)
                            .map_err(runtime)?,
                        None => missing.push(format!(
                            "exponent={},train_size={t},feature={feature}",
                            spec.fixed_exponent
                        )),
                    }
                }
            }
        }
        FigureAxis::Exponent => {
            let mut exponents: Vec<f64> = rows
                .iter()
                .filter(|r| r.train_size == spec.fixed_train_size)
                .map(|r| r.exponent)
                .collect();
            exponents.sort_by(f64::total_cmp);
            exponents.dedup();
            if exponents.is_empty() {
                missing.push(format!("train_size={}", spec.fixed_train_size));
            }
            writeln!(
                out,
                "exponent,feature,mean_clicks_per_search,sd_clicks_per_search"
            )
            .map_err(runtime)?;
            for &e in &exponents {
                for &feature in spec.series {
                    match rows.iter().find(|r| {
                        r.exponent == e
                            && r.train_size == spec.fixed_train_size
                            && r.feature == feature
                    }) {
                        Some(r) => writeln!(out, "{e},{feature},{},{}", r.mean, r.sd)
                            .map_err(runtime)?,
                        None => missing.push(format!(
                            "exponent={e},train_size={},feature={feature}",
                            spec.fixed_train_size
                        )),
                    }
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(CliError::Config(format!(
            "results do not cover the cells needed for the figure: {}",
            missing.join("; ")
        )));
    }
    write_file(out_path, &out)
}

fn plot_fig6(dir: &Path, out_path: &Path) -> Result<(), CliError> {
    let path = dir.join("diagnostics.csv");
    let mut reader = csv::Reader::from_path(&path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let spec = figure_spec(Figure::Fig6);
    let mut out = Vec::new();
    writeln!(out, "replication,corr_ipwctr_ipwcoec").map_err(runtime)?;
    let mut found = 0;
    for record in reader.records() {
        let record = record.map_err(runtime)?;
        let exponent: f64 = record[0].parse().map_err(runtime)?;
        let train_size: usize = record[1].parse().map_err(runtime)?;
        if exponent == spec.fixed_exponent && train_size == spec.fixed_train_size {
            writeln!(out, "{},{}", &record[2], &record[3]).map_err(runtime)?;
            found += 1;
        }
    }
    if found == 0 {
        return Err(CliError::Config(format!(
            "results do not cover the cells needed for the figure: exponent={},train_size={}",
            spec.fixed_exponent, spec.fixed_train_size
        )));
    }
    write_file(out_path, &out)
}

/// Byte-level comparison helper exposed for determinism checks.
pub fn files_identical(a: &Path, b: &Path) -> Result<bool, CliError> {
    let fa = fs::read(a).map_err(runtime)?;
    let fb = fs::read(b).map_err(runtime)?;
    Ok(fa == fb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_map_by_error_class() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Runtime("x".into()).exit_code(), 1);
    }

    #[test]
    fn figure_specs_name_known_features() {
        for figure in [
            Figure::Fig1,
            Figure::Fig2,
            Figure::Fig3,
            Figure::Fig4,
            Figure::Fig5,
            Figure::Fig7,
        ] {
            let spec = figure_spec(figure);
            assert!(!spec.series.is_empty());
        }
    }
}
