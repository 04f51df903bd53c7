//! Single-entity measures and top-K period queries.
//!
//! Every measure is answered from the stored counts of one posting and its
//! period slice. A value is `None` exactly when the measure's denominator is
//! zero: `|C_i|` for the popularity family, `|C_{e,i}|` for the averages and
//! controversiality.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::EntityIndex;
use crate::timeline::{self, Period, Timestamp};

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("period {period} has granularity {found}, index is built per {expected}")]
    GranularityMismatch {
        period: Period,
        found: timeline::Granularity,
        expected: timeline::Granularity,
    },
    #[error("unknown measure `{0}`")]
    UnknownMeasure(String),
    #[error("unknown direction `{0}` (expected high or low)")]
    UnknownDirection(String),
    #[error("k must be at least 1")]
    ZeroK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    PopularityC,
    PopularityU,
    PopularityCu,
    Attitude,
    Sentimentality,
    Controversiality,
}

impl Measure {
    pub const ALL: [Measure; 6] = [
        Self::PopularityC,
        Self::PopularityU,
        Self::PopularityCu,
        Self::Attitude,
        Self::Sentimentality,
        Self::Controversiality,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::PopularityC => "popularity_c",
            Self::PopularityU => "popularity_u",
            Self::PopularityCu => "popularity_cu",
            Self::Attitude => "attitude",
            Self::Sentimentality => "sentimentality",
            Self::Controversiality => "controversiality",
        }
    }

    /// Closed value range of the measure.
    pub fn range(&self) -> (f64, f64) {
        match self {
            Self::Attitude => (-4.0, 4.0),
            Self::Sentimentality => (0.0, 8.0),
            _ => (0.0, 1.0),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| MeasureError::UnknownMeasure(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    High,
    Low,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::High => "high",
            Self::Low => "low",
        }
    }
}

impl FromStr for Direction {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "high" => Ok(Self::High),
            "low" => Ok(Self::Low),
            other => Err(MeasureError::UnknownDirection(other.to_string())),
        }
    }
}

/// One `(entity, period)` sample of a measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurePoint {
    pub entity: String,
    pub period: Period,
    pub measure: Measure,
    pub value: Option<f64>,
    /// Texts mentioning the entity in the period.
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedPeriods {
    pub entity: String,
    pub measure: Measure,
    pub direction: Direction,
    pub k: usize,
    /// `(period, value, support)`, best first.
    pub periods: Vec<(Period, f64, u64)>,
}

/// Controversiality from raw counts: strong-attitude coverage times the
/// positive/negative balance. Zero when there are no strong texts.
pub fn controversiality_from_counts(
    text_count: u64,
    strong_pos: u64,
    strong_neg: u64,
) -> Option<f64> {
    if text_count == 0 {
        return None;
    }
    let max = strong_pos.max(strong_neg);
    if max == 0 {
        return Some(0.0);
    }
    let coverage = (strong_pos + strong_neg) as f64 / text_count as f64;
    Some(coverage * (strong_pos.min(strong_neg) as f64 / max as f64))
}

fn check_period(index: &EntityIndex, period: &Period) -> Result<(), MeasureError> {
    if period.granularity() != index.granularity() {
        return Err(MeasureError::GranularityMismatch {
            period: *period,
            found: period.granularity(),
            expected: index.granularity(),
        });
    }
    Ok(())
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Evaluates one measure for `(entity, period)`.
pub fn evaluate(
    index: &EntityIndex,
    entity: &str,
    period: &Period,
    measure: Measure,
) -> Result<MeasurePoint, MeasureError> {
    check_period(index, period)?;
    let slice = index.slice(period);
    let posting = index.posting(entity, period);
    let (text_total, user_total) = slice.map_or((0, 0), |s| (s.text_total, s.user_total));
    let texts = posting.map_or(0, |p| p.text_count);
    let users = posting.map_or(0, |p| p.user_count);
    let value = match measure {
        Measure::PopularityC => ratio(texts, text_total),
        Measure::PopularityU => ratio(users, user_total),
        Measure::PopularityCu => ratio(texts, text_total)
            .zip(ratio(users, user_total))
            .map(|(c, u)| c * u),
        Measure::Attitude => posting.map(|p| p.attitude_sum as f64 / p.text_count as f64),
        Measure::Sentimentality => {
            posting.map(|p| p.sentimentality_sum as f64 / p.text_count as f64)
        }
        Measure::Controversiality => posting.and_then(|p| {
            controversiality_from_counts(p.text_count, p.strong_pos_count, p.strong_neg_count)
        }),
    };
    Ok(MeasurePoint {
        entity: entity.to_string(),
        period: *period,
        measure,
        value,
        support: texts,
    })
}

pub fn popularity_c(
    index: &EntityIndex,
    entity: &str,
    period: &Period,
) -> Result<MeasurePoint, MeasureError> {
    evaluate(index, entity, period, Measure::PopularityC)
}

pub fn popularity_u(
    index: &EntityIndex,
    entity: &str,
    period: &Period,
) -> Result<MeasurePoint, MeasureError> {
    evaluate(index, entity, period, Measure::PopularityU)
}

pub fn popularity_cu(
    index: &EntityIndex,
    entity: &str,
    period: &Period,
) -> Result<MeasurePoint, MeasureError> {
    evaluate(index, entity, period, Measure::PopularityCu)
}

pub fn attitude(
    index: &EntityIndex,
    entity: &str,
    period: &Period,
) -> Result<MeasurePoint, MeasureError> {
    evaluate(index, entity, period, Measure::Attitude)
}

pub fn sentimentality(
    index: &EntityIndex,
    entity: &str,
    period: &Period,
) -> Result<MeasurePoint, MeasureError> {
    evaluate(index, entity, period, Measure::Sentimentality)
}

/// Uses the strong-attitude threshold the index was built with.
pub fn controversiality(
    index: &EntityIndex,
    entity: &str,
    period: &Period,
) -> Result<MeasurePoint, MeasureError> {
    evaluate(index, entity, period, Measure::Controversiality)
}

/// One point per period of the index granularity intersecting
/// `[start, end)`, chronological, undefined points included.
pub fn series(
    index: &EntityIndex,
    entity: &str,
    start: Timestamp,
    end: Timestamp,
    measure: Measure,
) -> Vec<MeasurePoint> {
    timeline::enumerate(start, end, index.granularity())
        .iter()
        .map(|p| evaluate(index, entity, p, measure).expect("enumerated at index granularity"))
        .collect()
}

/// Ranking order for period lists: extreme value first, earlier period on
/// ties.
pub fn period_order(direction: Direction, a: (&Period, f64), b: (&Period, f64)) -> Ordering {
    let by_value = match direction {
        Direction::High => b.1.total_cmp(&a.1),
        Direction::Low => a.1.total_cmp(&b.1),
    };
    by_value.then_with(|| a.0.cmp(b.0))
}

/// The `k` defined periods with the highest (or lowest) values.
///
/// Per-period scores are independent, so the best size-`k` subset by summed
/// score is exactly the `k` individually best periods.
pub fn top_k_periods(
    index: &EntityIndex,
    entity: &str,
    start: Timestamp,
    end: Timestamp,
    measure: Measure,
    k: usize,
    direction: Direction,
) -> Result<RankedPeriods, MeasureError> {
    if k == 0 {
        return Err(MeasureError::ZeroK);
    }
    let mut defined: Vec<(Period, f64, u64)> = series(index, entity, start, end, measure)
        .into_iter()
        .filter_map(|p| p.value.map(|v| (p.period, v, p.support)))
        .collect();
    defined.sort_by(|a, b| period_order(direction, (&a.0, a.1), (&b.0, b.1)));
    defined.truncate(k);
    Ok(RankedPeriods {
        entity: entity.to_string(),
        measure,
        direction,
        k,
        periods: defined,
    })
}
