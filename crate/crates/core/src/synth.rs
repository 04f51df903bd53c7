//! Deterministic synthetic archives with planted structure.
//!
//! A [`ScenarioSpec`] describes a window, an entity roster with per-period
//! rates, a user pool and a list of planted events. [`generate`] emits corpus
//! rows plus a [`Manifest`] recording what was planted, so tests can check
//! that each event is recovered by the matching query.
//!
//! All randomness comes from [`SplitMix64`] and is consumed in a fixed order,
//! so the same spec always yields byte-identical output.

use std::collections::HashSet;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, AnnotatedText, EntityMention, SentimentScores};
use crate::spam::Label;
use crate::timeline::{self, Granularity, Period};

/// SplitMix64 (Steele, Lea & Flood 2014).
///
/// `state += 0x9E3779B97F4A7C15`, then the output is `state` mixed by
/// `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9; z = (z ^ (z >> 27)) *
/// 0x94D049BB133111EB; z ^ (z >> 31)` with wrapping 64-bit arithmetic.
/// Floats take the top 53 bits; bounded integers use the high word of a
/// 64x64 multiply.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[0, n)`; `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Uniform in `[lo, hi]`.
    pub fn range_i64(&mut self, lo: i64, hi: i64) -> i64 {
        lo + self.below((hi - lo + 1) as u64) as i64
    }

    /// `floor(rate)` plus one more with probability `fract(rate)`.
    pub fn count(&mut self, rate: f64) -> u64 {
        let whole = rate.floor();
        let extra = self.next_f64() < rate - whole;
        whole as u64 + extra as u64
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowSpec {
    /// `YYYY`, `YYYY-MM` or `YYYY-MM-DD`; the window starts where this begins.
    pub start: String,
    /// Exclusive; the window ends where this begins.
    pub end: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntitySpec {
    pub id: String,
    /// Expected texts per period.
    #[serde(default)]
    pub rate: f64,
    /// Optional per-period override, one entry per period of the window.
    #[serde(default)]
    pub rates: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentSpread {
    /// Attitudes in `[-1, 1]`; never strong at the default threshold.
    #[default]
    Mild,
    /// Positive and negative strengths uniform over their full ranges.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairSign {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PlantedEvent {
    /// Multiplies the entity's rate in one period.
    PopularitySpike {
        entity: String,
        period: String,
        factor: f64,
    },
    /// Adds texts about the entity split evenly between attitude +4 and -4.
    ControversyBurst {
        entity: String,
        period: String,
        texts: u64,
    },
    /// Adds texts mentioning both entities with mild sentiment; every period
    /// when `period` is absent.
    PairLink {
        entity: String,
        other: String,
        #[serde(default)]
        period: Option<String>,
        texts: u64,
    },
    /// Adds texts mentioning both entities with attitude +3 or -3.
    SignedPair {
        entity: String,
        other: String,
        period: String,
        texts: u64,
        sign: PairSign,
    },
    /// Adds spam texts; every period when `period` is absent.
    SpamBlock {
        #[serde(default)]
        period: Option<String>,
        texts: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub window: WindowSpec,
    #[serde(default = "default_granularity")]
    pub granularity: Granularity,
    pub users: u64,
    /// Texts per period that mention no entity.
    #[serde(default)]
    pub background_rate: f64,
    #[serde(default)]
    pub entities: Vec<EntitySpec>,
    /// Upper bound on roster entities per regular text; extra mentions are
    /// drawn uniformly from the roster.
    #[serde(default = "default_max_mentions")]
    pub max_mentions: u64,
    #[serde(default)]
    pub sentiment: SentimentSpread,
    /// Emit the optional raw-text column. Implied by any spam block.
    #[serde(default)]
    pub with_text: bool,
    #[serde(default)]
    pub events: Vec<PlantedEvent>,
}

fn default_granularity() -> Granularity {
    Granularity::Month
}

fn default_max_mentions() -> u64 {
    1
}

#[derive(Debug, Error, PartialEq)]
#[error("{field}: {message}")]
pub struct SynthError {
    pub field: String,
    pub message: String,
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> SynthError {
    SynthError {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entity: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other: Option<String>,
    /// `YYYY-MM-DD/YYYY-MM-DD`; absent for window-wide events.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign: Option<PairSign>,
    pub planted_texts: u64,
    /// The query that should recover the event.
    pub expect: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub granularity: Granularity,
    pub record_count: u64,
    pub spam_count: u64,
    pub expectations: Vec<Expectation>,
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub records: Vec<AnnotatedText>,
    /// Text ids of planted spam.
    pub spam_ids: HashSet<String>,
    pub manifest: Manifest,
}

impl Generated {
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        corpus::write_records(w, &self.records)
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("records are utf-8")
    }
}

const SPAM_WORDS: usize = 50;
const HAM_WORDS: usize = 50;

/// Word lists shared by the labeled-corpus and spam-block generators.
/// `overlap` is the share of each class vocabulary drawn from a common pool.
pub struct Vocabulary {
    spam: Vec<String>,
    ham: Vec<String>,
}

impl Vocabulary {
    pub fn new(overlap: f64) -> Self {
        let shared = ((SPAM_WORDS as f64) * overlap.clamp(0.0, 1.0)).round() as usize;
        let pool =
            |prefix: &str, n: usize| (0..n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>();
        let common = pool("word", shared);
        let mut spam = pool("deal", SPAM_WORDS - shared);
        spam.extend(common.iter().cloned());
        let mut ham = pool("note", HAM_WORDS - shared);
        ham.extend(common);
        Self { spam, ham }
    }

    pub fn sentence(&self, label: Label, rng: &mut SplitMix64) -> String {
        let words = match label {
            Label::Spam => &self.spam,
            Label::Ham => &self.ham,
        };
        let n = rng.range_i64(6, 12) as usize;
        (0..n)
            .map(|_| words[rng.below(words.len() as u64) as usize].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Labeled `(text, label)` documents for spam-filter training and testing.
pub fn labeled_corpus(
    seed: u64,
    docs: usize,
    overlap: f64,
    spam_fraction: f64,
) -> Vec<(String, Label)> {
    let vocab = Vocabulary::new(overlap);
    let mut rng = SplitMix64::new(seed);
    (0..docs)
        .map(|_| {
            let label = if rng.next_f64() < spam_fraction {
                Label::Spam
            } else {
                Label::Ham
            };
            (vocab.sentence(label, &mut rng), label)
        })
        .collect()
}

fn event_period(
    periods: &[Period],
    raw: &str,
    g: Granularity,
    field: &str,
) -> Result<usize, SynthError> {
    let (start, _) = timeline::parse_period_arg(raw).map_err(|e| invalid(field, e.to_string()))?;
    let p = timeline::assign(start, g);
    periods
        .iter()
        .position(|q| *q == p)
        .ok_or_else(|| invalid(field, format!("period {p} lies outside the window")))
}

fn check_rate(v: f64, field: &str) -> Result<(), SynthError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(field, "must be a finite number >= 0"))
    }
}

struct Resolved {
    periods: Vec<Period>,
    // Per event: the period indices it applies to.
    event_periods: Vec<Vec<usize>>,
}

fn validate(spec: &ScenarioSpec) -> Result<Resolved, SynthError> {
    let (start, _) = timeline::parse_period_arg(&spec.window.start)
        .map_err(|e| invalid("window.start", e.to_string()))?;
    let (end, _) = timeline::parse_period_arg(&spec.window.end)
        .map_err(|e| invalid("window.end", e.to_string()))?;
    if start >= end {
        return Err(invalid("window", "start must precede end"));
    }
    let periods = timeline::enumerate(start, end, spec.granularity);
    check_rate(spec.background_rate, "background_rate")?;
    if spec.max_mentions == 0 {
        return Err(invalid("max_mentions", "must be at least 1"));
    }
    let mut ids = HashSet::new();
    for (i, e) in spec.entities.iter().enumerate() {
        if e.id.is_empty() {
            return Err(invalid(format!("entities[{i}].id"), "must not be empty"));
        }
        if !ids.insert(e.id.as_str()) {
            return Err(invalid(
                format!("entities[{i}].id"),
                format!("duplicate id `{}`", e.id),
            ));
        }
        check_rate(e.rate, &format!("entities[{i}].rate"))?;
        if let Some(rates) = &e.rates {
            if rates.len() != periods.len() {
                return Err(invalid(
                    format!("entities[{i}].rates"),
                    format!(
                        "expected {} entries (one per period), found {}",
                        periods.len(),
                        rates.len()
                    ),
                ));
            }
            for (j, r) in rates.iter().enumerate() {
                check_rate(*r, &format!("entities[{i}].rates[{j}]"))?;
            }
        }
    }
    let g = spec.granularity;
    let all: Vec<usize> = (0..periods.len()).collect();
    let mut event_periods = Vec::with_capacity(spec.events.len());
    for (i, ev) in spec.events.iter().enumerate() {
        let f = |name: &str| format!("events[{i}].{name}");
        let nonempty = |v: &str, name: &str| {
            if v.is_empty() {
                Err(invalid(f(name), "must not be empty"))
            } else {
                Ok(())
            }
        };
        let resolved = match ev {
            PlantedEvent::PopularitySpike {
                entity,
                period,
                factor,
            } => {
                if !ids.contains(entity.as_str()) {
                    return Err(invalid(
                        f("entity"),
                        format!("`{entity}` is not in the roster"),
                    ));
                }
                check_rate(*factor, &f("factor"))?;
                vec![event_period(&periods, period, g, &f("period"))?]
            }
            PlantedEvent::ControversyBurst { entity, period, .. } => {
                nonempty(entity, "entity")?;
                vec![event_period(&periods, period, g, &f("period"))?]
            }
            PlantedEvent::PairLink {
                entity,
                other,
                period,
                ..
            } => {
                nonempty(entity, "entity")?;
                nonempty(other, "other")?;
                if entity == other {
                    return Err(invalid(f("other"), "must differ from entity"));
                }
                match period {
                    Some(p) => vec![event_period(&periods, p, g, &f("period"))?],
                    None => all.clone(),
                }
            }
            PlantedEvent::SignedPair {
                entity,
                other,
                period,
                ..
            } => {
                nonempty(entity, "entity")?;
                nonempty(other, "other")?;
                if entity == other {
                    return Err(invalid(f("other"), "must differ from entity"));
                }
                vec![event_period(&periods, period, g, &f("period"))?]
            }
            PlantedEvent::SpamBlock { period, .. } => match period {
                Some(p) => vec![event_period(&periods, p, g, &f("period"))?],
                None => all.clone(),
            },
        };
        event_periods.push(resolved);
    }
    let produces = spec.background_rate > 0.0
        || spec
            .entities
            .iter()
            .any(|e| e.rate > 0.0 || e.rates.as_ref().is_some_and(|r| r.iter().any(|&x| x > 0.0)))
        || !spec.events.is_empty();
    if produces && spec.users == 0 {
        return Err(invalid(
            "users",
            "must be at least 1 when texts are generated",
        ));
    }
    Ok(Resolved {
        periods,
        event_periods,
    })
}

struct Emitter<'a> {
    spec: &'a ScenarioSpec,
    rng: SplitMix64,
    vocab: Vocabulary,
    with_text: bool,
    records: Vec<AnnotatedText>,
    spam_ids: HashSet<String>,
}

impl Emitter<'_> {
    fn sentiment(&mut self) -> SentimentScores {
        let (p, n) = match self.spec.sentiment {
            SentimentSpread::Mild => (self.rng.range_i64(1, 2), self.rng.range_i64(-2, -1)),
            SentimentSpread::Full => (self.rng.range_i64(1, 5), self.rng.range_i64(-5, -1)),
        };
        SentimentScores::new(p, n).expect("drawn in range")
    }

    fn mention(&mut self, id: &str) -> EntityMention {
        let confidence = -(self.rng.below(500) as f64) / 100.0;
        EntityMention {
            entity_id: id.to_string(),
            confidence,
        }
    }

    fn emit(
        &mut self,
        period: &Period,
        entities: &[&str],
        sentiment: SentimentScores,
        label: Label,
    ) {
        let n = self.records.len();
        let timestamp =
            period.start() + self.rng.below((period.end() - period.start()) as u64) as i64;
        let user = self.rng.below(self.spec.users);
        let mut mentions: Vec<EntityMention> = Vec::with_capacity(entities.len());
        for e in entities {
            if !mentions.iter().any(|m| m.entity_id == *e) {
                let m = self.mention(e);
                mentions.push(m);
            }
        }
        let text = self
            .with_text
            .then(|| self.vocab.sentence(label, &mut self.rng));
        let text_id = format!("s{}-{n}", self.spec.seed);
        if label == Label::Spam {
            self.spam_ids.insert(text_id.clone());
        }
        self.records.push(AnnotatedText {
            text_id,
            user_id: format!("user{user}"),
            timestamp,
            mentions,
            sentiment,
            text,
        });
    }
}

/// Generates the corpus and manifest for `spec`.
pub fn generate(spec: &ScenarioSpec) -> Result<Generated, SynthError> {
    let resolved = validate(spec)?;
    let with_text = spec.with_text
        || spec
            .events
            .iter()
            .any(|e| matches!(e, PlantedEvent::SpamBlock { .. }));
    let mut em = Emitter {
        spec,
        rng: SplitMix64::new(spec.seed),
        vocab: Vocabulary::new(0.2),
        with_text,
        records: Vec::new(),
        spam_ids: HashSet::new(),
    };
    let roster: Vec<&str> = spec.entities.iter().map(|e| e.id.as_str()).collect();

    for (pi, period) in resolved.periods.iter().enumerate() {
        for _ in 0..em.rng.count(spec.background_rate) {
            let s = em.sentiment();
            em.emit(period, &[], s, Label::Ham);
        }
        for e in &spec.entities {
            let mut rate = e.rates.as_ref().map_or(e.rate, |r| r[pi]);
            for (ev, ps) in spec.events.iter().zip(&resolved.event_periods) {
                if let PlantedEvent::PopularitySpike { entity, factor, .. } = ev {
                    if *entity == e.id && ps.contains(&pi) {
                        rate *= factor;
                    }
                }
            }
            for _ in 0..em.rng.count(rate) {
                let extra = em.rng.below(spec.max_mentions);
                let mut mentioned = vec![e.id.as_str()];
                for _ in 0..extra {
                    mentioned.push(roster[em.rng.below(roster.len() as u64) as usize]);
                }
                let s = em.sentiment();
                em.emit(period, &mentioned, s, Label::Ham);
            }
        }
        for (ev, ps) in spec.events.iter().zip(&resolved.event_periods) {
            if !ps.contains(&pi) {
                continue;
            }
            match ev {
                PlantedEvent::PopularitySpike { .. } => {}
                PlantedEvent::ControversyBurst { entity, texts, .. } => {
                    for i in 0..*texts {
                        let s = if i % 2 == 0 {
                            SentimentScores::new(5, -1)
                        } else {
                            SentimentScores::new(1, -5)
                        };
                        em.emit(period, &[entity], s.unwrap(), Label::Ham);
                    }
                }
                PlantedEvent::PairLink {
                    entity,
                    other,
                    texts,
                    ..
                } => {
                    for _ in 0..*texts {
                        let s = em.sentiment();
                        em.emit(period, &[entity, other], s, Label::Ham);
                    }
                }
                PlantedEvent::SignedPair {
                    entity,
                    other,
                    texts,
                    sign,
                    ..
                } => {
                    let s = match sign {
                        PairSign::Positive => SentimentScores::new(4, -1),
                        PairSign::Negative => SentimentScores::new(1, -4),
                    }
                    .unwrap();
                    for _ in 0..*texts {
                        em.emit(period, &[entity, other], s, Label::Ham);
                    }
                }
                PlantedEvent::SpamBlock { texts, .. } => {
                    for _ in 0..*texts {
                        let mentioned: Vec<&str> = if roster.is_empty() {
                            Vec::new()
                        } else {
                            vec![roster[em.rng.below(roster.len() as u64) as usize]]
                        };
                        let s = em.sentiment();
                        em.emit(period, &mentioned, s, Label::Spam);
                    }
                }
            }
        }
    }

    let expectations = spec
        .events
        .iter()
        .zip(&resolved.event_periods)
        .map(|(ev, ps)| {
            let period = (ps.len() == 1).then(|| resolved.periods[ps[0]].to_string());
            let window_wide = ps.len() as u64;
            match ev {
                PlantedEvent::PopularitySpike { entity, .. } => Expectation {
                    kind: "popularity-spike".into(),
                    entity: Some(entity.clone()),
                    other: None,
                    period,
                    sign: None,
                    planted_texts: 0,
                    expect: "top-1 high popularity_cu period".into(),
                },
                PlantedEvent::ControversyBurst { entity, texts, .. } => Expectation {
                    kind: "controversy-burst".into(),
                    entity: Some(entity.clone()),
                    other: None,
                    period,
                    sign: None,
                    planted_texts: *texts,
                    expect: "ranked among the top high controversiality periods".into(),
                },
                PlantedEvent::PairLink {
                    entity,
                    other,
                    texts,
                    ..
                } => Expectation {
                    kind: "pair-link".into(),
                    entity: Some(entity.clone()),
                    other: Some(other.clone()),
                    period,
                    sign: None,
                    planted_texts: texts * window_wide,
                    expect: "other appears in the entity's k-network".into(),
                },
                PlantedEvent::SignedPair {
                    entity,
                    other,
                    texts,
                    sign,
                    ..
                } => Expectation {
                    kind: "signed-pair".into(),
                    entity: Some(entity.clone()),
                    other: Some(other.clone()),
                    period,
                    sign: Some(*sign),
                    planted_texts: *texts,
                    expect: "other appears in the matching signed k-network only".into(),
                },
                PlantedEvent::SpamBlock { texts, .. } => Expectation {
                    kind: "spam-block".into(),
                    entity: None,
                    other: None,
                    period,
                    sign: None,
                    planted_texts: texts * window_wide,
                    expect: "removed by the spam filter".into(),
                },
            }
        })
        .collect();

    let manifest = Manifest {
        seed: spec.seed,
        granularity: spec.granularity,
        record_count: em.records.len() as u64,
        spam_count: em.spam_ids.len() as u64,
        expectations,
    };
    Ok(Generated {
        records: em.records,
        spam_ids: em.spam_ids,
        manifest,
    })
}
