//! Position-based click simulation over a ranked result list.
//!
//! Each entry is examined with probability `theta_position` and judged
//! relevant with probability equal to the document's latent relevance,
//! independently of every other entry; a click requires both. There is no
//! cascade: examination depends on position alone.

use crate::log::{DocId, Record, SearchId};
use crate::position::PositionBiasCurve;
use crate::world::World;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BehaviorError {
    #[error("document {0:?} does not exist in the world")]
    UnknownDoc(DocId),
    #[error("ranked list of length {len} exceeds curve positions 1..={max_position}")]
    ListTooLong { len: usize, max_position: u32 },
}

/// An ordered result list; entry `i` sits at position `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub search_id: SearchId,
    pub entries: Vec<DocId>,
}

impl RankedList {
    pub fn position_of(&self, doc: DocId) -> Option<u32> {
        self.entries.iter().position(|&d| d == doc).map(|i| i as u32 + 1)
    }
}

/// Simulate one user's clicks over a ranked list; deterministic given `seed`.
///
/// Emits one record per entry, in position order, with the true propensity
/// attached at logging time.
pub fn simulate_clicks(
    list: &RankedList,
    world: &World,
    curve: &PositionBiasCurve,
    seed: u64,
) -> Result<Vec<Record>, BehaviorError> {
    if list.entries.len() > curve.max_position() as usize {
        return Err(BehaviorError::ListTooLong {
            len: list.entries.len(),
            max_position: curve.max_position(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(list.entries.len());
    for (i, &doc_id) in list.entries.iter().enumerate() {
        let position = i as u32 + 1;
        let doc = world
            .document(doc_id)
            .ok_or(BehaviorError::UnknownDoc(doc_id))?;
        let propensity = curve
            .propensity_at(position)
            .expect("position within checked range");
        let examined = rng.random::<f64>() < propensity;
        let relevant = rng.random::<f64>() < doc.relevance;
        records.push(Record {
            search_id: list.search_id,
            doc_id,
            position,
            propensity,
            click: examined && relevant,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::pearson;
    use crate::world::{Cluster, ClusterId, Document};

    /// A hand-built world of `n` documents with the given relevances.
    fn world_with_relevances(relevances: &[f64]) -> World {
        let documents: Vec<Document> = relevances
            .iter()
            .enumerate()
            .map(|(i, &r)| Document {
                doc_id: DocId(i as u32),
                cluster_id: ClusterId(0),
                relevance: r,
                proxy: r,
            })
            .collect();
        World {
            clusters: vec![Cluster {
                cluster_id: ClusterId(0),
                doc_ids: documents.iter().map(|d| d.doc_id).collect(),
            }],
            documents,
        }
    }

    fn list(n: u32) -> RankedList {
        RankedList {
            search_id: SearchId(0),
            entries: (0..n).map(DocId).collect(),
        }
    }

    #[test]
    fn certain_relevance_and_examination_always_clicks() {
        // relevance = 1 is outside the generated range but legal in a
        // hand-built world; with x = 0 every entry must click.
        let world = world_with_relevances(&[1.0; 5]);
        let curve = PositionBiasCurve::new(0.0, 10).unwrap();
        for seed in 0..20 {
            let records = simulate_clicks(&list(5), &world, &curve, seed).unwrap();
            assert!(records.iter().all(|r| r.click));
        }
    }

    #[test]
    fn zero_relevance_never_clicks() {
        let world = world_with_relevances(&[0.0; 5]);
        let curve = PositionBiasCurve::new(0.5, 10).unwrap();
        for seed in 0..20 {
            let records = simulate_clicks(&list(5), &world, &curve, seed).unwrap();
            assert!(records.iter().all(|r| !r.click));
        }
    }

    #[test]
    fn unknown_document_is_an_error() {
        let world = world_with_relevances(&[0.5]);
        let curve = PositionBiasCurve::new(0.5, 10).unwrap();
        let bad = RankedList {
            search_id: SearchId(0),
            entries: vec![DocId(7)],
        };
        assert_eq!(
            simulate_clicks(&bad, &world, &curve, 0),
            Err(BehaviorError::UnknownDoc(DocId(7)))
        );
    }

    #[test]
    fn list_longer_than_curve_is_an_error() {
        let world = world_with_relevances(&[0.5; 12]);
        let curve = PositionBiasCurve::new(0.5, 10).unwrap();
        assert_eq!(
            simulate_clicks(&list(12), &world, &curve, 0),
            Err(BehaviorError::ListTooLong {
                len: 12,
                max_position: 10
            })
        );
    }

    #[test]
    fn records_carry_positions_and_propensities() {
        let world = world_with_relevances(&[0.5; 4]);
        let curve = PositionBiasCurve::new(0.5, 10).unwrap();
        let records = simulate_clicks(&list(4), &world, &curve, 3).unwrap();
        assert_eq!(records.len(), 4);
        for (i, r) in records.iter().enumerate() {
            assert_eq!(r.position, i as u32 + 1);
            assert_eq!(r.propensity, curve.propensity_at(r.position).unwrap());
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let world = world_with_relevances(&[0.3, 0.6, 0.9]);
        let curve = PositionBiasCurve::new(0.5, 10).unwrap();
        let a = simulate_clicks(&list(3), &world, &curve, 42).unwrap();
        let b = simulate_clicks(&list(3), &world, &curve, 42).unwrap();
        assert_eq!(a, b);
    }

    /// Observed click rate of one document held at one position.
    fn click_rate(relevance: f64, position: u32, x: f64, trials: u64, base_seed: u64) -> f64 {
        let mut pad = vec![0.2; position as usize];
        pad[position as usize - 1] = relevance;
        let world = world_with_relevances(&pad);
        let curve = PositionBiasCurve::new(x, 10).unwrap();
        let l = list(position);
        let mut clicks = 0u64;
        for t in 0..trials {
            let records = simulate_clicks(&l, &world, &curve, base_seed ^ t).unwrap();
            clicks += u64::from(records[position as usize - 1].click);
        }
        clicks as f64 / trials as f64
    }

    #[test]
    fn click_rate_separates_into_relevance_times_propensity() {
        // Three grid points at x = 0.5; tolerance is 3 binomial stderrs.
        let trials = 40_000;
        for (r, k) in [(0.5, 4u32), (0.2, 1), (0.8, 9)] {
            let theta = (k as f64).powf(-0.5);
            let expected = r * theta;
            let observed = click_rate(r, k, 0.5, trials, 1000 + k as u64);
            let stderr = (expected * (1.0 - expected) / trials as f64).sqrt();
            assert!(
                (observed - expected).abs() <= 3.0 * stderr,
                "r={r} k={k}: observed {observed} expected {expected} stderr {stderr}"
            );
        }
    }

    #[test]
    fn within_list_clicks_are_uncorrelated() {
        // Two equal-relevance entries; their click indicators should show no
        // correlation beyond Monte Carlo noise (no cascade).
        let world = world_with_relevances(&[0.5, 0.5]);
        let curve = PositionBiasCurve::new(0.5, 10).unwrap();
        let l = list(2);
        let trials = 40_000;
        let mut a = Vec::with_capacity(trials);
        let mut b = Vec::with_capacity(trials);
        for t in 0..trials as u64 {
            let records = simulate_clicks(&l, &world, &curve, 5_000_000 + t).unwrap();
            a.push(f64::from(u8::from(records[0].click)));
            b.push(f64::from(u8::from(records[1].click)));
        }
        let corr = pearson(&a, &b).unwrap();
        // stderr of a sample correlation near zero is ~ 1/sqrt(n).
        let bound = 3.0 / (trials as f64).sqrt();
        assert!(corr.abs() <= bound, "correlation {corr} exceeds {bound}");
    }
}
