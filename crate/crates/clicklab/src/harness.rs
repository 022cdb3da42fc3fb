//! End-to-end experiment loop: proxy-ranked training, feature tables,
//! feature-ranked test phases, replication, and parameter sweeps.
//!
//! One replication of one parameter cell generates a fresh world, ranks the
//! training stream by the proxy, simulates clicks, computes every click
//! feature per document, then replays one shared test stream once per
//! configured feature and counts clicks. Replications and cells are
//! independent jobs; all randomness flows from the master seed through
//! derived sub-streams, so any parallel schedule produces identical reports.

use crate::behavior::{simulate_clicks, BehaviorError, RankedList};
use crate::features::{self, FeatureError, FeatureKind, FeatureValue};
use crate::log::{ClickLog, DocId, LogError};
use crate::position::{empirical_propensities, PositionBiasCurve, PositionError, PropensityVector};
use crate::seed::derive_seed;
use crate::stats::{mean_sd, pearson};
use crate::world::{generate_search_stream, generate_world, GenConfig, SearchRequest, World, WorldError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Position(#[from] PositionError),
    #[error(transparent)]
    Behavior(#[from] BehaviorError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// What a click feature scores when a document has no training impressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ColdStartPolicy {
    /// Score 0: below every positive-valued document, random among peers.
    #[default]
    Zero,
    /// Fall back to the document's proxy value.
    ProxyFallback,
}

/// Full sweep specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub gen: GenConfig,
    pub train_sizes: Vec<usize>,
    pub test_size: usize,
    pub exponents: Vec<f64>,
    pub replications: usize,
    pub features: Vec<FeatureKind>,
    pub cold_start_policy: ColdStartPolicy,
    pub clip_floor: f64,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            gen: GenConfig::default(),
            train_sizes: vec![1_000, 3_000, 10_000, 30_000, 100_000],
            test_size: 100_000,
            exponents: vec![0.25, 0.5, 1.0, 2.0],
            replications: 10,
            features: FeatureKind::ALL.to_vec(),
            cold_start_policy: ColdStartPolicy::Zero,
            clip_floor: 0.1,
            master_seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.gen.validate()?;
        if self.replications == 0 {
            return Err(HarnessError::InvalidConfig("replications must be >= 1".into()));
        }
        if self.test_size == 0 {
            return Err(HarnessError::InvalidConfig("test_size must be >= 1".into()));
        }
        if self.features.is_empty() {
            return Err(HarnessError::InvalidConfig("feature list is empty".into()));
        }
        if self.train_sizes.is_empty() {
            return Err(HarnessError::InvalidConfig("train_sizes is empty".into()));
        }
        if self.exponents.is_empty() {
            return Err(HarnessError::InvalidConfig("exponents is empty".into()));
        }
        for &x in &self.exponents {
            if !x.is_finite() || x < 0.0 {
                return Err(HarnessError::InvalidConfig(format!(
                    "exponent {x} must be a finite nonnegative real"
                )));
            }
        }
        if !(self.clip_floor > 0.0 && self.clip_floor <= 1.0) {
            return Err(HarnessError::InvalidConfig(format!(
                "clip_floor {} outside (0, 1]",
                self.clip_floor
            )));
        }
        Ok(())
    }
}

/// Per-document values of every click feature over one training log.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    n_docs: usize,
    values: HashMap<FeatureKind, Vec<FeatureValue>>,
    /// Filled empirical weights used for Empirical-CTR and COEC, if any
    /// training data existed.
    pub theta_hat: Option<PropensityVector>,
    /// Positions whose empirical weight was substituted (missing or zero).
    pub theta_hat_substitutions: usize,
}

impl FeatureTable {
    /// An all-missing table for `n_docs` documents.
    pub fn empty(n_docs: usize) -> Self {
        let values = FeatureKind::CLICK_FEATURES
            .iter()
            .map(|&k| (k, vec![FeatureValue::Missing; n_docs]))
            .collect();
        Self {
            n_docs,
            values,
            theta_hat: None,
            theta_hat_substitutions: 0,
        }
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn get(&self, kind: FeatureKind, doc: DocId) -> FeatureValue {
        self.values
            .get(&kind)
            .and_then(|v| v.get(doc.0 as usize))
            .copied()
            .unwrap_or(FeatureValue::Missing)
    }

    /// Paired non-missing values of two features across documents.
    pub fn paired_values(&self, a: FeatureKind, b: FeatureKind) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..self.n_docs {
            let doc = DocId(i as u32);
            if let (Some(x), Some(y)) = (self.get(a, doc).value(), self.get(b, doc).value()) {
                xs.push(x);
                ys.push(y);
            }
        }
        (xs, ys)
    }
}

/// Compute every click feature for every document in the log.
///
/// Empirical weights come from the log itself; positions that are missing or
/// zero there are substituted with the nearest shallower usable value so the
/// table stays total (the substitution count is reported on the table).
pub fn compute_feature_table(
    log: &ClickLog,
    curve: &PositionBiasCurve,
    clip_floor: f64,
    n_docs: usize,
) -> Result<FeatureTable, HarnessError> {
    let mut table = FeatureTable::empty(n_docs);
    if log.is_empty() {
        return Ok(table);
    }
    let theta = curve.true_propensity_vector();
    let (theta_hat, substitutions) = empirical_propensities(log)?.fill_unusable_from_shallower();
    let stats = log.aggregate();
    for (doc, s) in &stats {
        let idx = doc.0 as usize;
        if idx >= n_docs {
            return Err(HarnessError::InvalidConfig(format!(
                "log references document {doc:?} outside the world of {n_docs} docs"
            )));
        }
        let values: [(FeatureKind, FeatureValue); 7] = [
            (FeatureKind::Ctr, features::ctr(s)),
            (FeatureKind::IpwCtr, features::ipw_ctr(s, &theta)?),
            (FeatureKind::EmpiricalCtr, features::empirical_ctr(s, &theta_hat)?),
            (FeatureKind::Snips, features::snips(s, &theta)?),
            (FeatureKind::Coec, features::coec(s, &theta_hat)?),
            (FeatureKind::IpwCoec, features::ipw_coec(s, &theta)?),
            (
                FeatureKind::ClippedIpwCtr,
                features::clipped_ipw_ctr(s, &theta, clip_floor)?,
            ),
        ];
        for (kind, v) in values {
            table.values.get_mut(&kind).expect("all click kinds present")[idx] = v;
        }
    }
    table.theta_hat = Some(theta_hat);
    table.theta_hat_substitutions = substitutions;
    Ok(table)
}

/// Resolve one ranking score per document for `feature`.
///
/// Click features read the table and apply the cold-start policy to missing
/// documents; the proxy and true-relevance baselines read the world.
pub fn feature_scores(
    feature: FeatureKind,
    table: &FeatureTable,
    world: &World,
    policy: ColdStartPolicy,
) -> Vec<f64> {
    match feature {
        FeatureKind::TrueRelevance => world.documents.iter().map(|d| d.relevance).collect(),
        FeatureKind::Proxy => world.documents.iter().map(|d| d.proxy).collect(),
        kind => (0..world.n_docs())
            .map(|i| {
                let doc = DocId(i as u32);
                match table.get(kind, doc) {
                    FeatureValue::Present(v) => {
                        debug_assert!(v.is_finite());
                        v
                    }
                    FeatureValue::Missing => match policy {
                        ColdStartPolicy::Zero => 0.0,
                        ColdStartPolicy::ProxyFallback => world.documents[i].proxy,
                    },
                }
            })
            .collect(),
    }
}

/// Order the candidates by score, descending; ties are broken by a uniform
/// random permutation drawn from `tie_seed`.
pub fn rank_by_feature(request: &SearchRequest, scores: &[f64], tie_seed: u64) -> RankedList {
    let mut rng = ChaCha8Rng::seed_from_u64(tie_seed);
    let mut keyed: Vec<(f64, u64, DocId)> = request
        .candidate_doc_ids
        .iter()
        .map(|&d| (scores[d.0 as usize], rng.random::<u64>(), d))
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    RankedList {
        search_id: request.search_id,
        entries: keyed.into_iter().map(|(_, _, d)| d).collect(),
    }
}

// Stream tags for the per-phase sub-seeds.
const TAG_STREAM: u64 = 0;
const TAG_SIM: u64 = 1;
const TAG_TIE: u64 = 0;
const TAG_CLICK: u64 = 1;

/// Rank `n_train` searches by the proxy, simulate clicks, and return the log.
pub fn run_training_phase(
    world: &World,
    n_train: usize,
    max_results: u32,
    curve: &PositionBiasCurve,
    seed: u64,
) -> Result<ClickLog, HarnessError> {
    let stream = generate_search_stream(world, n_train, max_results, derive_seed(seed, TAG_STREAM));
    let sim_seed = derive_seed(seed, TAG_SIM);
    let proxy_scores: Vec<f64> = world.documents.iter().map(|d| d.proxy).collect();
    let mut log = ClickLog::new();
    for req in &stream {
        let search_seed = derive_seed(sim_seed, req.search_id.0);
        let ranked = rank_by_feature(req, &proxy_scores, derive_seed(search_seed, TAG_TIE));
        let records = simulate_clicks(&ranked, world, curve, derive_seed(search_seed, TAG_CLICK))?;
        log.append_search(records)?;
    }
    Ok(log)
}

/// Replay the shared test stream ranked by `feature` and return
/// clicks-per-search.
pub fn run_test_phase(
    world: &World,
    feature: FeatureKind,
    table: &FeatureTable,
    test_stream: &[SearchRequest],
    curve: &PositionBiasCurve,
    policy: ColdStartPolicy,
    seed: u64,
) -> Result<f64, HarnessError> {
    let scores = feature_scores(feature, table, world, policy);
    let mut total_clicks = 0u64;
    for req in test_stream {
        let search_seed = derive_seed(seed, req.search_id.0);
        let ranked = rank_by_feature(req, &scores, derive_seed(search_seed, TAG_TIE));
        let records = simulate_clicks(&ranked, world, curve, derive_seed(search_seed, TAG_CLICK))?;
        total_clicks += records.iter().filter(|r| r.click).count() as u64;
    }
    Ok(total_clicks as f64 / test_stream.len() as f64)
}

/// Mean test-phase performance of one feature in one parameter cell.
#[derive(Debug, Clone)]
pub struct PerformanceCell {
    pub exponent: f64,
    pub train_size: usize,
    pub feature: FeatureKind,
    /// Clicks-per-search, one entry per replication.
    pub clicks_per_search: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

/// Per-replication document-level correlation between IPW-CTR and IPW-COEC.
#[derive(Debug, Clone, Copy)]
pub struct CorrelationDiagnostic {
    pub exponent: f64,
    pub train_size: usize,
    pub replication: usize,
    pub corr_ipwctr_ipwcoec: f64,
}

/// Averaged sweep results plus diagnostics.
#[derive(Debug, Clone)]
pub struct PerformanceReport {
    pub cells: Vec<PerformanceCell>,
    pub diagnostics: Vec<CorrelationDiagnostic>,
}

impl PerformanceReport {
    pub fn cell(&self, exponent: f64, train_size: usize, feature: FeatureKind) -> Option<&PerformanceCell> {
        self.cells.iter().find(|c| {
            c.exponent.to_bits() == exponent.to_bits()
                && c.train_size == train_size
                && c.feature == feature
        })
    }

    /// `exponent,train_size,feature,replication,clicks_per_search`
    pub fn write_results_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "exponent,train_size,feature,replication,clicks_per_search")?;
        for cell in &self.cells {
            for (rep, v) in cell.clicks_per_search.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    cell.exponent, cell.train_size, cell.feature, rep, v
                )?;
            }
        }
        Ok(())
    }

    /// `exponent,train_size,feature,mean_clicks_per_search,sd_clicks_per_search`
    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "exponent,train_size,feature,mean_clicks_per_search,sd_clicks_per_search"
        )?;
        for cell in &self.cells {
            writeln!(
                w,
                "{},{},{},{},{}",
                cell.exponent, cell.train_size, cell.feature, cell.mean, cell.sd
            )?;
        }
        Ok(())
    }

    /// `exponent,train_size,replication,corr_ipwctr_ipwcoec`
    pub fn write_diagnostics_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "exponent,train_size,replication,corr_ipwctr_ipwcoec")?;
        for d in &self.diagnostics {
            writeln!(
                w,
                "{},{},{},{}",
                d.exponent, d.train_size, d.replication, d.corr_ipwctr_ipwcoec
            )?;
        }
        Ok(())
    }
}

struct JobOutput {
    per_feature: Vec<f64>,
    corr: f64,
}

// Cell-level stream tags.
const TAG_WORLD: u64 = 1;
const TAG_TRAIN: u64 = 2;
const TAG_TEST_STREAM: u64 = 3;
const TAG_TEST_SIM: u64 = 4;

/// The seed of one (exponent, train size, replication) job, keyed by values
/// rather than sweep indices so a cell's results do not depend on which other
/// cells run alongside it.
fn cell_seed(master: u64, exponent: f64, train_size: usize, replication: usize) -> u64 {
    derive_seed(
        derive_seed(derive_seed(master, exponent.to_bits()), train_size as u64),
        replication as u64,
    )
}

fn run_cell(
    config: &ExperimentConfig,
    exponent: f64,
    train_size: usize,
    replication: usize,
) -> Result<JobOutput, HarnessError> {
    let seed = cell_seed(config.master_seed, exponent, train_size, replication);
    let world = generate_world(&GenConfig {
        seed: derive_seed(seed, TAG_WORLD),
        ..config.gen
    })?;
    let curve = PositionBiasCurve::new(exponent, config.gen.max_results)?;
    let log = run_training_phase(
        &world,
        train_size,
        config.gen.max_results,
        &curve,
        derive_seed(seed, TAG_TRAIN),
    )?;
    let table = compute_feature_table(&log, &curve, config.clip_floor, world.n_docs())?;
    let test_stream = generate_search_stream(
        &world,
        config.test_size,
        config.gen.max_results,
        derive_seed(seed, TAG_TEST_STREAM),
    );
    let test_sim = derive_seed(seed, TAG_TEST_SIM);
    let per_feature = config
        .features
        .iter()
        .map(|&feature| {
            run_test_phase(
                &world,
                feature,
                &table,
                &test_stream,
                &curve,
                config.cold_start_policy,
                derive_seed(test_sim, feature.stable_id()),
            )
        })
        .collect::<Result<Vec<f64>, HarnessError>>()?;
    let (xs, ys) = table.paired_values(FeatureKind::IpwCtr, FeatureKind::IpwCoec);
    let corr = pearson(&xs, &ys).unwrap_or(f64::NAN);
    Ok(JobOutput { per_feature, corr })
}

/// Run the full sweep: every (exponent, train size) cell times `replications`,
/// a fresh world per job, one shared test stream per job replayed once per
/// feature. Jobs run in parallel; output order is deterministic.
pub fn run_experiment(config: &ExperimentConfig) -> Result<PerformanceReport, HarnessError> {
    config.validate()?;
    let mut jobs = Vec::new();
    for &exponent in &config.exponents {
        for &train_size in &config.train_sizes {
            for replication in 0..config.replications {
                jobs.push((exponent, train_size, replication));
            }
        }
    }
    let outputs: Result<Vec<JobOutput>, HarnessError> = jobs
        .par_iter()
        .map(|&(e, t, r)| run_cell(config, e, t, r))
        .collect();
    let outputs = outputs?;

    let job_index = |ei: usize, ti: usize, rep: usize| {
        (ei * config.train_sizes.len() + ti) * config.replications + rep
    };
    let mut cells = Vec::new();
    let mut diagnostics = Vec::new();
    for (ei, &exponent) in config.exponents.iter().enumerate() {
        for (ti, &train_size) in config.train_sizes.iter().enumerate() {
            for (fi, &feature) in config.features.iter().enumerate() {
                let clicks_per_search: Vec<f64> = (0..config.replications)
                    .map(|rep| outputs[job_index(ei, ti, rep)].per_feature[fi])
                    .collect();
                debug_assert!(clicks_per_search
                    .iter()
                    .all(|&v| v >= 0.0 && v <= config.gen.max_results as f64));
                let (mean, sd) = mean_sd(&clicks_per_search);
                cells.push(PerformanceCell {
                    exponent,
                    train_size,
                    feature,
                    clicks_per_search,
                    mean,
                    sd,
                });
            }
            for rep in 0..config.replications {
                diagnostics.push(CorrelationDiagnostic {
                    exponent,
                    train_size,
                    replication: rep,
                    corr_ipwctr_ipwcoec: outputs[job_index(ei, ti, rep)].corr,
                });
            }
        }
    }
    Ok(PerformanceReport { cells, diagnostics })
}
