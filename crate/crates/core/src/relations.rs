//! Entity-to-entity connectedness and k-Networks.
//!
//! Direct connectedness of `e` to `e'` is the share of `e`'s texts that also
//! mention `e'`; it is deliberately asymmetric. Indirect connectedness is the
//! share of `e`'s co-mentioned entities that are also co-mentioned with `e'`.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{EntityId, EntityIndex, EntityPosting};
use crate::timeline::{Granularity, Period};

#[derive(Debug, Error, PartialEq)]
pub enum RelationError {
    #[error("an entity cannot be related to itself (`{0}`)")]
    SelfRelation(String),
    #[error("entity set is empty")]
    EmptySet,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("strong attitude threshold {0} outside [0, 4]")]
    DeltaOutOfRange(f64),
    #[error("min_support must be at least 1")]
    ZeroSupport,
    #[error("period {period} has granularity {found}, index is built per {expected}")]
    GranularityMismatch {
        period: Period,
        found: Granularity,
        expected: Granularity,
    },
    #[error("unknown network variant `{0}` (expected plain, positive or negative)")]
    UnknownVariant(String),
}

/// How neighbor sets are formed for indirect connectedness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NeighborMode {
    /// Both query entities are removed from both neighbor sets.
    #[default]
    ExcludeQueryPair,
    /// Neighbor sets are the plain unions of entities over each entity's
    /// texts, so each set contains its own entity.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkVariant {
    Plain,
    Positive,
    Negative,
}

impl NetworkVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Plain => "plain",
            Self::Positive => "positive",
            Self::Negative => "negative",
        }
    }
}

impl fmt::Display for NetworkVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NetworkVariant {
    type Err = RelationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain" => Ok(Self::Plain),
            "positive" => Ok(Self::Positive),
            "negative" => Ok(Self::Negative),
            other => Err(RelationError::UnknownVariant(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkEntry {
    pub entity: String,
    /// Direct connectedness of the query entity to this one.
    pub score: f64,
    /// Texts mentioning both entities.
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedNetwork {
    pub entity: String,
    pub period: Period,
    pub variant: NetworkVariant,
    pub delta: Option<f64>,
    pub min_support: Option<u64>,
    pub entries: Vec<NetworkEntry>,
}

fn check(index: &EntityIndex, e: &str, other: &str, period: &Period) -> Result<(), RelationError> {
    if period.granularity() != index.granularity() {
        return Err(RelationError::GranularityMismatch {
            period: *period,
            found: period.granularity(),
            expected: index.granularity(),
        });
    }
    if e == other {
        return Err(RelationError::SelfRelation(e.to_string()));
    }
    Ok(())
}

fn pair_count(index: &EntityIndex, posting: &EntityPosting, other: &str) -> u64 {
    index
        .entity_id(other)
        .and_then(|id| posting.pair(id))
        .map_or(0, |c| c.pair_text_count)
}

/// `|C_e ∩ C_e'| / |C_e|`; `None` when `e` has no texts in the period.
pub fn direct_connectedness(
    index: &EntityIndex,
    e: &str,
    other: &str,
    period: &Period,
) -> Result<Option<f64>, RelationError> {
    check(index, e, other, period)?;
    Ok(index
        .posting(e, period)
        .map(|p| pair_count(index, p, other) as f64 / p.text_count as f64))
}

fn neighbors(index: &EntityIndex, entity: &str, period: &Period) -> BTreeSet<EntityId> {
    index
        .posting(entity, period)
        .map(|p| p.neighbor_entities().collect())
        .unwrap_or_default()
}

/// Overlap of the two neighbor sets normalized by the size of `e`'s set;
/// `None` when `e`'s neighbor set is empty.
pub fn indirect_connectedness(
    index: &EntityIndex,
    e: &str,
    other: &str,
    period: &Period,
    mode: NeighborMode,
) -> Result<Option<f64>, RelationError> {
    check(index, e, other, period)?;
    let mut ne = neighbors(index, e, period);
    let mut no = neighbors(index, other, period);
    if mode == NeighborMode::ExcludeQueryPair {
        for id in [index.entity_id(e), index.entity_id(other)]
            .into_iter()
            .flatten()
        {
            ne.remove(&id);
            no.remove(&id);
        }
    }
    if ne.is_empty() {
        return Ok(None);
    }
    Ok(Some(ne.intersection(&no).count() as f64 / ne.len() as f64))
}

/// Mean direct connectedness of `e` to each member of `set`.
pub fn connectedness_to_set(
    index: &EntityIndex,
    e: &str,
    set: &[&str],
    period: &Period,
) -> Result<Option<f64>, RelationError> {
    if set.is_empty() {
        return Err(RelationError::EmptySet);
    }
    let mut sum = 0.0;
    for other in set {
        match direct_connectedness(index, e, other, period)? {
            Some(v) => sum += v,
            None => return Ok(None),
        }
    }
    Ok(Some(sum / set.len() as f64))
}

/// Network ranking: score descending, then shared-text count descending,
/// then entity id ascending.
pub fn network_order(a: (f64, u64, &str), b: (f64, u64, &str)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then(b.1.cmp(&a.1))
        .then_with(|| a.2.cmp(b.2))
}

fn rank(
    index: &EntityIndex,
    e: &str,
    period: &Period,
    k: usize,
    keep: impl Fn(u64, i64) -> bool,
) -> Result<Vec<NetworkEntry>, RelationError> {
    if k == 0 {
        return Err(RelationError::ZeroK);
    }
    if period.granularity() != index.granularity() {
        return Err(RelationError::GranularityMismatch {
            period: *period,
            found: period.granularity(),
            expected: index.granularity(),
        });
    }
    let Some(posting) = index.posting(e, period) else {
        return Ok(Vec::new());
    };
    let total = posting.text_count as f64;
    // Entity ids follow identifier order, so (count desc, id asc) is the full
    // tie-break; scores share one denominator.
    let mut candidates: Vec<(u64, EntityId)> = posting
        .cooccur
        .iter()
        .filter(|c| keep(c.pair_text_count, c.pair_attitude_sum))
        .map(|c| (c.pair_text_count, c.entity))
        .collect();
    let by_rank = |a: &(u64, EntityId), b: &(u64, EntityId)| b.0.cmp(&a.0).then(a.1.cmp(&b.1));
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, by_rank);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(by_rank);
    Ok(candidates
        .into_iter()
        .map(|(n, id)| NetworkEntry {
            entity: index.entity_name(id).to_string(),
            score: n as f64 / total,
            support: n,
        })
        .collect())
}

/// The `k` co-mentioned entities with the highest direct connectedness.
pub fn k_network(
    index: &EntityIndex,
    e: &str,
    period: &Period,
    k: usize,
) -> Result<RankedNetwork, RelationError> {
    let entries = rank(index, e, period, k, |_, _| true)?;
    Ok(RankedNetwork {
        entity: e.to_string(),
        period: *period,
        variant: NetworkVariant::Plain,
        delta: None,
        min_support: None,
        entries,
    })
}

/// Whether a mean pair attitude qualifies for the signed network. Thresholds
/// are closed; at `delta == 0` a mean of exactly zero is positive only.
pub fn qualifies(mean_attitude: f64, sign: Sign, delta: f64) -> bool {
    let positive = mean_attitude >= delta;
    match sign {
        Sign::Positive => positive,
        Sign::Negative => !positive && mean_attitude <= -delta,
    }
}

/// k-Network restricted to co-entities whose mean attitude over shared texts
/// clears the signed threshold and whose shared-text count is at least
/// `min_support`.
pub fn signed_k_network(
    index: &EntityIndex,
    e: &str,
    period: &Period,
    k: usize,
    sign: Sign,
    delta: f64,
    min_support: u64,
) -> Result<RankedNetwork, RelationError> {
    if !(0.0..=4.0).contains(&delta) {
        return Err(RelationError::DeltaOutOfRange(delta));
    }
    if min_support == 0 {
        return Err(RelationError::ZeroSupport);
    }
    let variant = match sign {
        Sign::Positive => NetworkVariant::Positive,
        Sign::Negative => NetworkVariant::Negative,
    };
    let entries = rank(index, e, period, k, |n, sum| {
        n >= min_support && qualifies(sum as f64 / n as f64, sign, delta)
    })?;
    Ok(RankedNetwork {
        entity: e.to_string(),
        period: *period,
        variant,
        delta: Some(delta),
        min_support: Some(min_support),
        entries,
    })
}

/// Dispatches on the variant; `delta` and `min_support` only apply to the
/// signed variants.
pub fn network(
    index: &EntityIndex,
    e: &str,
    period: &Period,
    k: usize,
    variant: NetworkVariant,
    delta: f64,
    min_support: u64,
) -> Result<RankedNetwork, RelationError> {
    match variant {
        NetworkVariant::Plain => k_network(index, e, period, k),
        NetworkVariant::Positive => {
            signed_k_network(index, e, period, k, Sign::Positive, delta, min_support)
        }
        NetworkVariant::Negative => {
            signed_k_network(index, e, period, k, Sign::Negative, delta, min_support)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AnnotatedText, Corpus, EntityMention, SentimentScores};
    use crate::index::IndexConfig;
    use crate::timeline::{assign, parse_timestamp};

    fn july() -> Period {
        assign(
            parse_timestamp("2015-07-01T00:00:00Z").unwrap(),
            Granularity::Month,
        )
    }

    fn index(texts: &[(&[&str], i64, i64)]) -> EntityIndex {
        let base = july().start();
        let records = texts
            .iter()
            .enumerate()
            .map(|(i, (es, p, n))| AnnotatedText {
                text_id: format!("t{i}"),
                user_id: format!("u{}", i % 3),
                timestamp: base + i as i64,
                mentions: es
                    .iter()
                    .map(|e| EntityMention {
                        entity_id: e.to_string(),
                        confidence: 0.0,
                    })
                    .collect(),
                sentiment: SentimentScores::new(*p, *n).unwrap(),
                text: None,
            })
            .collect();
        EntityIndex::build(
            &Corpus::from_records(records).unwrap(),
            &IndexConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn direct_is_asymmetric() {
        let mut texts: Vec<(&[&str], i64, i64)> = Vec::new();
        texts.extend(std::iter::repeat_n((&["X", "Y"][..], 1, -1), 9));
        texts.push((&["X"], 1, -1));
        texts.extend(std::iter::repeat_n((&["Y"][..], 1, -1), 91));
        let idx = index(&texts);
        assert_eq!(
            direct_connectedness(&idx, "X", "Y", &july()).unwrap(),
            Some(0.9)
        );
        assert_eq!(
            direct_connectedness(&idx, "Y", "X", &july()).unwrap(),
            Some(0.09)
        );
        assert_eq!(
            direct_connectedness(&idx, "X", "Q", &july()).unwrap(),
            Some(0.0)
        );
        assert_eq!(direct_connectedness(&idx, "Q", "X", &july()).unwrap(), None);
        assert_eq!(
            direct_connectedness(&idx, "X", "X", &july()).unwrap_err(),
            RelationError::SelfRelation("X".into())
        );
    }

    #[test]
    fn containment_gives_one() {
        let idx = index(&[(&["X", "Y"], 1, -1), (&["X", "Y", "Z"], 1, -1)]);
        assert_eq!(
            direct_connectedness(&idx, "X", "Y", &july()).unwrap(),
            Some(1.0)
        );
    }

    #[test]
    fn indirect_examples() {
        let idx = index(&[
            (&["E", "A", "B", "C"], 1, -1),
            (&["F", "B", "C", "D"], 1, -1),
        ]);
        let p = july();
        let v = indirect_connectedness(&idx, "E", "F", &p, NeighborMode::ExcludeQueryPair).unwrap();
        assert_eq!(v, Some(2.0 / 3.0));
        // Literal union: N_E = {E,A,B,C}, N_F = {F,B,C,D}.
        let v = indirect_connectedness(&idx, "E", "F", &p, NeighborMode::Literal).unwrap();
        assert_eq!(v, Some(0.5));

        let disjoint = index(&[(&["E", "A"], 1, -1), (&["F", "B"], 1, -1)]);
        assert_eq!(
            indirect_connectedness(&disjoint, "E", "F", &p, NeighborMode::ExcludeQueryPair)
                .unwrap(),
            Some(0.0)
        );
        let contained = index(&[(&["E", "A"], 1, -1), (&["F", "A", "B"], 1, -1)]);
        assert_eq!(
            indirect_connectedness(&contained, "E", "F", &p, NeighborMode::ExcludeQueryPair)
                .unwrap(),
            Some(1.0)
        );
        // Only co-mentioned with F: nothing left after removal.
        let lonely = index(&[(&["E", "F"], 1, -1)]);
        assert_eq!(
            indirect_connectedness(&lonely, "E", "F", &p, NeighborMode::ExcludeQueryPair).unwrap(),
            None
        );
    }

    #[test]
    fn set_connectedness() {
        // E in 5 texts: A in 1, B in 2.
        let idx = index(&[
            (&["E", "A", "B"], 1, -1),
            (&["E", "B"], 1, -1),
            (&["E"], 1, -1),
            (&["E"], 1, -1),
            (&["E"], 1, -1),
        ]);
        let p = july();
        let v = connectedness_to_set(&idx, "E", &["A", "B"], &p)
            .unwrap()
            .unwrap();
        assert!((v - 0.3).abs() < 1e-15);
        assert_eq!(
            connectedness_to_set(&idx, "E", &["B"], &p).unwrap(),
            Some(0.4)
        );
        assert_eq!(
            connectedness_to_set(&idx, "E", &["Q", "R"], &p).unwrap(),
            Some(0.0)
        );
        assert_eq!(
            connectedness_to_set(&idx, "E", &[], &p).unwrap_err(),
            RelationError::EmptySet
        );
        assert!(connectedness_to_set(&idx, "E", &["A", "E"], &p).is_err());
    }

    #[test]
    fn k_network_ranking() {
        let idx = index(&[
            (&["E", "A", "B", "C", "D", "F"], 1, -1),
            (&["E", "A", "B", "C", "D"], 1, -1),
            (&["E", "A", "B", "C"], 1, -1),
            (&["E", "A", "B"], 1, -1),
            (&["E", "A"], 1, -1),
        ]);
        let p = july();
        let net = k_network(&idx, "E", &p, 3).unwrap();
        let names: Vec<&str> = net.entries.iter().map(|e| e.entity.as_str()).collect();
        assert_eq!(names, ["A", "B", "C"]);
        assert_eq!(net.entries[0].score, 1.0);
        assert_eq!(net.entries[2].support, 3);
        let one = k_network(&idx, "E", &p, 1).unwrap();
        assert_eq!(one.entries.len(), 1);
        assert_eq!(one.entries[0].entity, "A");
        assert!(k_network(&idx, "Z", &p, 3).unwrap().entries.is_empty());
        assert_eq!(
            k_network(&idx, "E", &p, 0).unwrap_err(),
            RelationError::ZeroK
        );
        assert_eq!(k_network(&idx, "E", &p, 50).unwrap().entries.len(), 5);
    }

    #[test]
    fn ties_break_by_entity_id() {
        let idx = index(&[(&["E", "c", "a", "b"], 1, -1)]);
        let net = k_network(&idx, "E", &july(), 2).unwrap();
        let names: Vec<&str> = net.entries.iter().map(|e| e.entity.as_str()).collect();
        assert_eq!(names, ["a", "b"]);
    }

    #[test]
    fn signed_candidates() {
        // Mean pair attitudes: P = +2.5, M = +1.0, N = -3.0.
        let idx = index(&[
            (&["E", "P"], 4, -1),
            (&["E", "P"], 3, -1),
            (&["E", "M"], 2, -1),
            (&["E", "N"], 1, -4),
        ]);
        let p = july();
        let pos = signed_k_network(&idx, "E", &p, 10, Sign::Positive, 2.0, 1).unwrap();
        let names: Vec<&str> = pos.entries.iter().map(|e| e.entity.as_str()).collect();
        assert_eq!(names, ["P"]);
        let neg = signed_k_network(&idx, "E", &p, 10, Sign::Negative, 2.0, 1).unwrap();
        let names: Vec<&str> = neg.entries.iter().map(|e| e.entity.as_str()).collect();
        assert_eq!(names, ["N"]);
        let zero = signed_k_network(&idx, "E", &p, 10, Sign::Positive, 0.0, 1).unwrap();
        assert_eq!(zero.entries.len(), 2);
        let supported = signed_k_network(&idx, "E", &p, 10, Sign::Positive, 2.0, 3).unwrap();
        assert!(supported.entries.is_empty());
        assert!(signed_k_network(&idx, "E", &p, 10, Sign::Positive, 4.5, 1).is_err());
        assert!(signed_k_network(&idx, "E", &p, 10, Sign::Positive, 2.0, 0).is_err());
    }

    #[test]
    fn boundary_rule() {
        assert!(qualifies(2.0, Sign::Positive, 2.0));
        assert!(qualifies(-2.0, Sign::Negative, 2.0));
        assert!(!qualifies(1.99, Sign::Positive, 2.0));
        assert!(qualifies(0.0, Sign::Positive, 0.0));
        assert!(!qualifies(0.0, Sign::Negative, 0.0));
    }
}
