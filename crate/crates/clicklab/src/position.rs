//! Position bias: true propensity curves and empirical per-position click rates.
//!
//! The true curve is `theta_k = k^(-x)` for positions `k = 1..=max_position`,
//! so the first position is always examined (`theta_1 = 1`) and deeper
//! positions decay with the exponent `x`. Empirical propensities are the
//! observed click rates by position over a whole click log; they confound
//! examination with the relevance ordering induced by the ranker, which is
//! exactly the failure mode the estimators in [`crate::features`] probe.

use crate::log::ClickLog;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PositionError {
    #[error("position {position} out of range 1..={max_position}")]
    OutOfRange { position: u32, max_position: u32 },
    #[error("empty click log has no empirical propensities")]
    EmptyLog,
    #[error("propensity {value} at position {position} outside the permitted range")]
    InvalidPropensity { position: u32, value: f64 },
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
}

/// The true examination curve `theta_k = k^(-exponent)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionBiasCurve {
    exponent: f64,
    max_position: u32,
}

impl PositionBiasCurve {
    pub fn new(exponent: f64, max_position: u32) -> Result<Self, PositionError> {
        if !exponent.is_finite() || exponent < 0.0 {
            return Err(PositionError::InvalidCurve(format!(
                "exponent must be a finite nonnegative real, got {exponent}"
            )));
        }
        if max_position == 0 {
            return Err(PositionError::InvalidCurve(
                "max_position must be at least 1".to_string(),
            ));
        }
        Ok(Self {
            exponent,
            max_position,
        })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn max_position(&self) -> u32 {
        self.max_position
    }

    /// Examination probability at `position` (1-based).
    pub fn propensity_at(&self, position: u32) -> Result<f64, PositionError> {
        if position == 0 || position > self.max_position {
            return Err(PositionError::OutOfRange {
                position,
                max_position: self.max_position,
            });
        }
        Ok((position as f64).powf(-self.exponent))
    }

    /// The full curve as a vector over positions `1..=max_position`.
    pub fn true_propensity_vector(&self) -> PropensityVector {
        let values = (1..=self.max_position)
            .map(|k| Some((k as f64).powf(-self.exponent)))
            .collect();
        PropensityVector { values }
    }
}

/// Per-position weights, indexed by position `1..=max_position`.
///
/// Holds either a true curve (every entry present, in `(0, 1]`) or empirical
/// estimates, where a position that was never observed is explicitly missing
/// and a position observed with zero clicks is `0.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityVector {
    values: Vec<Option<f64>>,
}

impl PropensityVector {
    /// Build a true-curve vector; every value must lie in `(0, 1]`.
    pub fn from_true(values: Vec<f64>) -> Result<Self, PositionError> {
        for (i, &v) in values.iter().enumerate() {
            if !(v > 0.0 && v <= 1.0) {
                return Err(PositionError::InvalidPropensity {
                    position: i as u32 + 1,
                    value: v,
                });
            }
        }
        Ok(Self {
            values: values.into_iter().map(Some).collect(),
        })
    }

    /// Build an empirical vector; present values must lie in `[0, 1]`.
    pub fn from_empirical(values: Vec<Option<f64>>) -> Result<Self, PositionError> {
        for (i, v) in values.iter().enumerate() {
            if let Some(v) = v {
                if !(*v >= 0.0 && *v <= 1.0) {
                    return Err(PositionError::InvalidPropensity {
                        position: i as u32 + 1,
                        value: *v,
                    });
                }
            }
        }
        Ok(Self { values })
    }

    pub fn max_position(&self) -> u32 {
        self.values.len() as u32
    }

    /// Weight at `position` (1-based); `None` if out of range or missing.
    pub fn get(&self, position: u32) -> Option<f64> {
        if position == 0 {
            return None;
        }
        self.values.get(position as usize - 1).copied().flatten()
    }

    pub fn is_missing(&self, position: u32) -> bool {
        self.get(position).is_none()
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    /// Replace entries unusable as inverse weights (missing or zero) with the
    /// nearest shallower usable value, falling back to the nearest deeper one.
    ///
    /// If no position has a positive weight at all (a log with zero clicks),
    /// every entry becomes `1.0`; the features computed from such a log are
    /// zero regardless of weighting. Returns the filled vector and the number
    /// of substituted positions.
    pub fn fill_unusable_from_shallower(&self) -> (Self, usize) {
        let n = self.values.len();
        let mut filled = vec![None; n];
        let mut substitutions = 0;
        let mut last_usable: Option<f64> = None;
        for i in 0..n {
            match self.values[i] {
                Some(v) if v > 0.0 => {
                    filled[i] = Some(v);
                    last_usable = Some(v);
                }
                _ => {
                    substitutions += 1;
                    filled[i] = last_usable;
                }
            }
        }
        // Leading unusable positions inherit the first usable value below them.
        let mut next_usable: Option<f64> = None;
        for i in (0..n).rev() {
            match filled[i] {
                Some(v) => next_usable = Some(v),
                None => filled[i] = next_usable,
            }
        }
        let values = filled
            .into_iter()
            .map(|v| Some(v.unwrap_or(1.0)))
            .collect();
        (Self { values }, substitutions)
    }
}

/// Observed click rate at each position over the whole log.
///
/// Element `k` is clicks-at-`k` divided by impressions-at-`k`; positions with
/// no impressions are reported as missing rather than zero. The vector length
/// is the deepest position present in the log.
pub fn empirical_propensities(log: &ClickLog) -> Result<PropensityVector, PositionError> {
    if log.is_empty() {
        return Err(PositionError::EmptyLog);
    }
    let max_pos = log
        .records()
        .iter()
        .map(|r| r.position)
        .max()
        .expect("nonempty log") as usize;
    let mut impressions = vec![0u64; max_pos];
    let mut clicks = vec![0u64; max_pos];
    for r in log.records() {
        let i = r.position as usize - 1;
        impressions[i] += 1;
        clicks[i] += u64::from(r.click);
    }
    let values = impressions
        .iter()
        .zip(&clicks)
        .map(|(&n, &c)| {
            if n == 0 {
                None
            } else {
                Some(c as f64 / n as f64)
            }
        })
        .collect();
    Ok(PropensityVector { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log::{ClickLog, DocId, Record, SearchId};

    fn curve(x: f64, max: u32) -> PositionBiasCurve {
        PositionBiasCurve::new(x, max).unwrap()
    }

    #[test]
    fn propensity_values_at_exact_points() {
        let c = curve(0.5, 10);
        assert_eq!(c.propensity_at(1).unwrap(), 1.0);
        assert_eq!(c.propensity_at(4).unwrap(), 0.5);
        assert!((c.propensity_at(9).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn propensity_out_of_range() {
        let c = curve(0.5, 10);
        assert_eq!(
            c.propensity_at(0),
            Err(PositionError::OutOfRange {
                position: 0,
                max_position: 10
            })
        );
        assert_eq!(
            c.propensity_at(11),
            Err(PositionError::OutOfRange {
                position: 11,
                max_position: 10
            })
        );
    }

    #[test]
    fn true_vector_matches_pointwise_evaluation() {
        let c = curve(0.5, 4);
        let v = c.true_propensity_vector();
        assert_eq!(v.max_position(), 4);
        for k in 1..=4 {
            assert_eq!(v.get(k).unwrap(), c.propensity_at(k).unwrap());
        }
        assert_eq!(v.get(1).unwrap(), 1.0);
        assert!((v.get(2).unwrap() - 0.7071067811865476).abs() < 1e-15);
        assert!((v.get(3).unwrap() - 0.5773502691896258).abs() < 1e-15);
        assert_eq!(v.get(4).unwrap(), 0.5);
    }

    #[test]
    fn zero_exponent_means_no_bias() {
        let v = curve(0.0, 3).true_propensity_vector();
        assert_eq!(v.values(), &[Some(1.0), Some(1.0), Some(1.0)]);
        let v = curve(1.0, 2).true_propensity_vector();
        assert_eq!(v.values(), &[Some(1.0), Some(0.5)]);
    }

    #[test]
    fn curve_rejects_bad_parameters() {
        assert!(PositionBiasCurve::new(-0.1, 10).is_err());
        assert!(PositionBiasCurve::new(f64::NAN, 10).is_err());
        assert!(PositionBiasCurve::new(0.5, 0).is_err());
    }

    #[test]
    fn repeated_evaluation_is_bit_identical() {
        let c = curve(0.37, 10);
        for k in 1..=10 {
            let a = c.propensity_at(k).unwrap();
            let b = c.propensity_at(k).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    fn log_from(batches: Vec<Vec<(u32, u32, bool)>>) -> ClickLog {
        // (doc, position, click) triples per search; x = 0 curve keeps the
        // recorded propensity at 1 regardless of position.
        let c = curve(0.0, 16);
        let mut log = ClickLog::new();
        for (sid, batch) in batches.into_iter().enumerate() {
            let records = batch
                .into_iter()
                .map(|(doc, pos, click)| {
                    Record::new(SearchId(sid as u64), DocId(doc), pos, click, &c).unwrap()
                })
                .collect();
            log.append_search(records).unwrap();
        }
        log
    }

    #[test]
    fn empirical_rates_are_direct_ratios() {
        // 4 impressions at position 1 (2 clicks), 4 at position 2 (1 click).
        let log = log_from(vec![
            vec![(0, 1, true), (1, 2, false)],
            vec![(2, 1, true), (3, 2, false)],
            vec![(4, 1, false), (5, 2, true)],
            vec![(6, 1, false), (7, 2, false)],
        ]);
        let v = empirical_propensities(&log).unwrap();
        assert_eq!(v.get(1), Some(0.5));
        assert_eq!(v.get(2), Some(0.25));
    }

    #[test]
    fn unobserved_positions_are_missing_not_zero() {
        let log = log_from(vec![vec![(0, 1, true), (1, 2, false), (2, 4, false)]]);
        let v = empirical_propensities(&log).unwrap();
        assert_eq!(v.max_position(), 4);
        assert!(v.is_missing(3));
        assert_eq!(v.get(4), Some(0.0));
    }

    #[test]
    fn empty_log_is_an_error() {
        let log = ClickLog::new();
        assert_eq!(empirical_propensities(&log), Err(PositionError::EmptyLog));
    }

    #[test]
    fn fill_substitutes_missing_and_zero_positions() {
        let v = PropensityVector::from_empirical(vec![
            Some(0.8),
            None,
            Some(0.0),
            Some(0.4),
            None,
        ])
        .unwrap();
        let (filled, substitutions) = v.fill_unusable_from_shallower();
        assert_eq!(substitutions, 3);
        assert_eq!(
            filled.values(),
            &[Some(0.8), Some(0.8), Some(0.8), Some(0.4), Some(0.4)]
        );
    }

    #[test]
    fn fill_leading_gap_takes_first_deeper_value() {
        let v = PropensityVector::from_empirical(vec![None, Some(0.0), Some(0.3)]).unwrap();
        let (filled, substitutions) = v.fill_unusable_from_shallower();
        assert_eq!(substitutions, 2);
        assert_eq!(filled.values(), &[Some(0.3), Some(0.3), Some(0.3)]);
    }

    #[test]
    fn fill_degenerate_all_unusable_becomes_unit_weights() {
        let v = PropensityVector::from_empirical(vec![Some(0.0), None]).unwrap();
        let (filled, substitutions) = v.fill_unusable_from_shallower();
        assert_eq!(substitutions, 2);
        assert_eq!(filled.values(), &[Some(1.0), Some(1.0)]);
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            /// theta_1 = 1, every value in (0, 1], nonincreasing in position.
            #[test]
            fn curve_shape(x in 0.0f64..4.0, max in 1u32..40) {
                let c = curve(x, max);
                let mut prev = f64::INFINITY;
                for k in 1..=max {
                    let v = c.propensity_at(k).unwrap();
                    prop_assert!(v > 0.0 && v <= 1.0);
                    prop_assert!(v <= prev);
                    prev = v;
                }
                prop_assert_eq!(c.propensity_at(1).unwrap(), 1.0);
            }

            /// Filling never leaves a nonpositive or missing entry behind.
            #[test]
            fn fill_is_total_and_positive(raw in proptest::collection::vec(
                proptest::option::of(0.0f64..1.0), 1..20)) {
                let v = PropensityVector::from_empirical(raw).unwrap();
                let (filled, _) = v.fill_unusable_from_shallower();
                for k in 1..=filled.max_position() {
                    let w = filled.get(k).unwrap();
                    prop_assert!(w > 0.0 && w <= 1.0);
                }
            }
        }
    }
}
