//! Logged search records and per-document aggregation.
//!
//! A [`Record`] is one (search, document, position, propensity, click) tuple;
//! a [`ClickLog`] is the ordered collection of records for a whole phase.
//! [`DocumentStats`] collapses a document's records into per-position
//! impression and click counts, which is all the feature estimators need.

use crate::position::PositionBiasCurve;
use std::collections::{HashMap, HashSet};
use std::io::{self, Write};
use thiserror::Error;

/// Identifier of one search (one issued query and its result list).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SearchId(pub u64);

/// Identifier of one document; dense indices into the generated world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DocId(pub u32);

#[derive(Debug, Error, PartialEq)]
pub enum LogError {
    #[error("record batch is empty")]
    EmptyBatch,
    #[error("records in one batch must share a search id (saw {0:?} and {1:?})")]
    MixedSearchIds(SearchId, SearchId),
    #[error("document {0:?} appears twice in search {1:?}")]
    DuplicateDoc(DocId, SearchId),
    #[error("position {0} appears twice in search {1:?}")]
    DuplicatePosition(u32, SearchId),
    #[error("search {0:?} was already appended")]
    DuplicateSearch(SearchId),
    #[error("record position {position} outside curve range 1..={max_position}")]
    PositionOutOfRange { position: u32, max_position: u32 },
}

/// One logged impression: the atom of training data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub search_id: SearchId,
    pub doc_id: DocId,
    /// 1-based display position.
    pub position: u32,
    /// True examination probability at `position`, stored at logging time.
    pub propensity: f64,
    pub click: bool,
}

impl Record {
    /// Build a record whose propensity is the curve evaluated at `position`,
    /// so the logging-time invariant holds by construction.
    pub fn new(
        search_id: SearchId,
        doc_id: DocId,
        position: u32,
        click: bool,
        curve: &PositionBiasCurve,
    ) -> Result<Self, LogError> {
        let propensity =
            curve
                .propensity_at(position)
                .map_err(|_| LogError::PositionOutOfRange {
                    position,
                    max_position: curve.max_position(),
                })?;
        Ok(Self {
            search_id,
            doc_id,
            position,
            propensity,
            click,
        })
    }
}

/// An append-only log of records, one batch per search.
#[derive(Debug, Clone, Default)]
pub struct ClickLog {
    records: Vec<Record>,
    seen_searches: HashSet<SearchId>,
}

impl ClickLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn total_clicks(&self) -> u64 {
        self.records.iter().map(|r| u64::from(r.click)).sum()
    }

    /// Append the records of one search.
    ///
    /// The batch must be nonempty, share one search id, and contain each
    /// document and position at most once. A search id can be appended only
    /// once, which keeps the per-search uniqueness invariants over the whole
    /// log. Records are stored sorted by position, so iteration order is
    /// search order then position.
    pub fn append_search(&mut self, mut records: Vec<Record>) -> Result<(), LogError> {
        let first = records.first().ok_or(LogError::EmptyBatch)?;
        let search_id = first.search_id;
        if self.seen_searches.contains(&search_id) {
            return Err(LogError::DuplicateSearch(search_id));
        }
        let mut docs = HashSet::with_capacity(records.len());
        let mut positions = HashSet::with_capacity(records.len());
        for r in &records {
            if r.search_id != search_id {
                return Err(LogError::MixedSearchIds(search_id, r.search_id));
            }
            if !docs.insert(r.doc_id) {
                return Err(LogError::DuplicateDoc(r.doc_id, search_id));
            }
            if !positions.insert(r.position) {
                return Err(LogError::DuplicatePosition(r.position, search_id));
            }
        }
        records.sort_by_key(|r| r.position);
        self.seen_searches.insert(search_id);
        self.records.extend(records);
        Ok(())
    }

    /// Collapse the log into per-document statistics.
    ///
    /// The result is order-invariant: only per-position counts survive.
    pub fn aggregate(&self) -> HashMap<DocId, DocumentStats> {
        let mut stats: HashMap<DocId, DocumentStats> = HashMap::new();
        for r in &self.records {
            stats
                .entry(r.doc_id)
                .or_insert_with(|| DocumentStats::new(r.doc_id))
                .add_impression(r.position, r.click);
        }
        stats
    }

    /// Write the log as CSV: `search_id,doc_id,position,propensity,click`,
    /// rows in search order then position.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "search_id,doc_id,position,propensity,click")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.search_id.0,
                r.doc_id.0,
                r.position,
                r.propensity,
                u8::from(r.click)
            )?;
        }
        Ok(())
    }
}

/// Per-document aggregation: impressions and clicks by position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentStats {
    doc_id: DocId,
    /// Index 0 holds position 1; sized to the deepest occupied position.
    impressions_by_position: Vec<u32>,
    clicks_by_position: Vec<u32>,
    total_impressions: u64,
    total_clicks: u64,
}

impl DocumentStats {
    pub fn new(doc_id: DocId) -> Self {
        Self {
            doc_id,
            impressions_by_position: Vec::new(),
            clicks_by_position: Vec::new(),
            total_impressions: 0,
            total_clicks: 0,
        }
    }

    /// Convenience constructor from `(position, clicked)` pairs.
    pub fn from_impressions(doc_id: DocId, impressions: &[(u32, bool)]) -> Self {
        let mut s = Self::new(doc_id);
        for &(pos, click) in impressions {
            s.add_impression(pos, click);
        }
        s
    }

    pub fn add_impression(&mut self, position: u32, clicked: bool) {
        assert!(position >= 1, "positions are 1-based");
        let idx = position as usize - 1;
        if idx >= self.impressions_by_position.len() {
            self.impressions_by_position.resize(idx + 1, 0);
            self.clicks_by_position.resize(idx + 1, 0);
        }
        self.impressions_by_position[idx] += 1;
        self.clicks_by_position[idx] += u32::from(clicked);
        self.total_impressions += 1;
        self.total_clicks += u64::from(clicked);
    }

    /// A copy with one extra impression at `position`.
    pub fn with_impression(&self, position: u32, clicked: bool) -> Self {
        let mut s = self.clone();
        s.add_impression(position, clicked);
        s
    }

    pub fn doc_id(&self) -> DocId {
        self.doc_id
    }

    pub fn total_impressions(&self) -> u64 {
        self.total_impressions
    }

    pub fn total_clicks(&self) -> u64 {
        self.total_clicks
    }

    pub fn impressions_at(&self, position: u32) -> u32 {
        self.impressions_by_position
            .get(position as usize - 1)
            .copied()
            .unwrap_or(0)
    }

    pub fn clicks_at(&self, position: u32) -> u32 {
        self.clicks_by_position
            .get(position as usize - 1)
            .copied()
            .unwrap_or(0)
    }

    /// Positions with at least one impression, as `(position, n_k, chi_k)`.
    pub fn occupied_positions(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        self.impressions_by_position
            .iter()
            .zip(&self.clicks_by_position)
            .enumerate()
            .filter(|(_, (&n, _))| n > 0)
            .map(|(i, (&n, &c))| (i as u32 + 1, n, c))
    }

    /// Check the internal count invariants; used by tests.
    pub fn validate(&self) -> bool {
        let n: u64 = self.impressions_by_position.iter().map(|&x| u64::from(x)).sum();
        let c: u64 = self.clicks_by_position.iter().map(|&x| u64::from(x)).sum();
        n == self.total_impressions
            && c == self.total_clicks
            && self
                .impressions_by_position
                .iter()
                .zip(&self.clicks_by_position)
                .all(|(&n, &c)| c <= n)
    }
}
