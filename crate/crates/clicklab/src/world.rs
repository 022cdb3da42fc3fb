//! Synthetic search universe: clusters, documents, and search streams.
//!
//! A world is a set of non-overlapping clusters whose sizes follow an
//! exponential distribution (rounded, floored at one document). Each document
//! carries a latent relevance drawn uniformly from (0, 1) and an observable
//! proxy equal to relevance plus Gaussian noise. Searches pick a cluster
//! uniformly at random — search volume is unrelated to cluster size — and
//! then draw up to `max_results` candidate documents from it without
//! replacement.

use crate::log::{DocId, SearchId};
use crate::stats::pearson;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("need at least two documents, world has {0}")]
    InsufficientData(usize),
    #[error("world is inconsistent: {0}")]
    Inconsistent(String),
}

/// Parameters of world generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenConfig {
    pub n_clusters: u32,
    pub mean_cluster_size: f64,
    pub max_results: u32,
    pub proxy_noise_sd: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_clusters: 100,
            mean_cluster_size: 100.0,
            max_results: 10,
            proxy_noise_sd: 0.2,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        if self.n_clusters == 0 {
            return Err(WorldError::InvalidConfig("n_clusters must be >= 1".into()));
        }
        if !(self.mean_cluster_size >= 1.0) {
            return Err(WorldError::InvalidConfig(
                "mean_cluster_size must be >= 1".into(),
            ));
        }
        if self.max_results == 0 {
            return Err(WorldError::InvalidConfig("max_results must be >= 1".into()));
        }
        if !(self.proxy_noise_sd >= 0.0) || !self.proxy_noise_sd.is_finite() {
            return Err(WorldError::InvalidConfig(
                "proxy_noise_sd must be a finite nonnegative real".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClusterId(pub u32);

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub doc_id: DocId,
    pub cluster_id: ClusterId,
    /// Latent click probability in (0, 1); hidden from the ranker.
    pub relevance: f64,
    /// Observable score correlated with relevance.
    pub proxy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub cluster_id: ClusterId,
    pub doc_ids: Vec<DocId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub clusters: Vec<Cluster>,
    /// Dense: `documents[i].doc_id == DocId(i)`.
    pub documents: Vec<Document>,
}

impl World {
    pub fn n_docs(&self) -> usize {
        self.documents.len()
    }

    pub fn document(&self, doc_id: DocId) -> Option<&Document> {
        self.documents.get(doc_id.0 as usize)
    }

    /// Check the partition invariant: clusters are nonempty, disjoint, and
    /// cover every document exactly once.
    pub fn validate(&self) -> Result<(), WorldError> {
        let mut seen = vec![false; self.documents.len()];
        for cluster in &self.clusters {
            if cluster.doc_ids.is_empty() {
                return Err(WorldError::Inconsistent(format!(
                    "cluster {:?} is empty",
                    cluster.cluster_id
                )));
            }
            for &d in &cluster.doc_ids {
                let i = d.0 as usize;
                if i >= seen.len() || seen[i] {
                    return Err(WorldError::Inconsistent(format!(
                        "document {d:?} missing or repeated"
                    )));
                }
                seen[i] = true;
                if self.documents[i].cluster_id != cluster.cluster_id {
                    return Err(WorldError::Inconsistent(format!(
                        "document {d:?} disagrees about its cluster"
                    )));
                }
            }
        }
        if !seen.iter().all(|&s| s) {
            return Err(WorldError::Inconsistent(
                "some documents belong to no cluster".into(),
            ));
        }
        Ok(())
    }

    /// Write the world as CSV: `doc_id,cluster_id,relevance,proxy`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "doc_id,cluster_id,relevance,proxy")?;
        for d in &self.documents {
            writeln!(
                w,
                "{},{},{},{}",
                d.doc_id.0, d.cluster_id.0, d.relevance, d.proxy
            )?;
        }
        Ok(())
    }
}

/// Generate a world from the config; fully determined by `config.seed`.
///
/// Cluster sizes are `max(1, round(Exp(mean_cluster_size)))`; relevance is
/// uniform on (0, 1); proxy is relevance plus `Normal(0, proxy_noise_sd)`.
pub fn generate_world(config: &GenConfig) -> Result<World, WorldError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let size_dist = Exp::new(1.0 / config.mean_cluster_size)
        .map_err(|e| WorldError::InvalidConfig(e.to_string()))?;
    let noise_dist = Normal::new(0.0, config.proxy_noise_sd)
        .map_err(|e| WorldError::InvalidConfig(e.to_string()))?;
    let mut clusters = Vec::with_capacity(config.n_clusters as usize);
    let mut documents = Vec::new();
    for c in 0..config.n_clusters {
        let cluster_id = ClusterId(c);
        let size = (size_dist.sample(&mut rng).round() as i64).max(1) as usize;
        let mut doc_ids = Vec::with_capacity(size);
        for _ in 0..size {
            let doc_id = DocId(documents.len() as u32);
            let relevance = loop {
                let r = rng.random::<f64>();
                if r > 0.0 {
                    break r;
                }
            };
            let proxy = relevance + noise_dist.sample(&mut rng);
            documents.push(Document {
                doc_id,
                cluster_id,
                relevance,
                proxy,
            });
            doc_ids.push(doc_id);
        }
        clusters.push(Cluster {
            cluster_id,
            doc_ids,
        });
    }
    Ok(World {
        clusters,
        documents,
    })
}

/// One search request: a cluster and its candidate documents.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchRequest {
    pub search_id: SearchId,
    pub cluster_id: ClusterId,
    pub candidate_doc_ids: Vec<DocId>,
}

/// Generate `n_searches` requests; deterministic given `seed`.
///
/// Each search picks a cluster uniformly, then `min(max_results, cluster
/// size)` distinct candidates uniformly without replacement, so search volume
/// per cluster is unrelated to cluster size.
pub fn generate_search_stream(
    world: &World,
    n_searches: usize,
    max_results: u32,
    seed: u64,
) -> Vec<SearchRequest> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stream = Vec::with_capacity(n_searches);
    for s in 0..n_searches {
        let cluster = &world.clusters[rng.random_range(0..world.clusters.len())];
        let k = (max_results as usize).min(cluster.doc_ids.len());
        let picks = rand::seq::index::sample(&mut rng, cluster.doc_ids.len(), k);
        let candidate_doc_ids = picks.into_iter().map(|i| cluster.doc_ids[i]).collect();
        stream.push(SearchRequest {
            search_id: SearchId(s as u64),
            cluster_id: cluster.cluster_id,
            candidate_doc_ids,
        });
    }
    stream
}

/// Pearson correlation between proxy and relevance over all documents.
pub fn proxy_relevance_correlation(world: &World) -> Result<f64, WorldError> {
    if world.documents.len() < 2 {
        return Err(WorldError::InsufficientData(world.documents.len()));
    }
    let relevance: Vec<f64> = world.documents.iter().map(|d| d.relevance).collect();
    let proxy: Vec<f64> = world.documents.iter().map(|d| d.proxy).collect();
    // Zero noise makes proxy == relevance; pearson is exactly 1 there.
    Ok(pearson(&proxy, &relevance).unwrap_or(0.0))
}
