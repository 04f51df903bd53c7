//! Archive record model, CSV schema and validated ingestion.
//!
//! One row per short text:
//!
//! ```text
//! text_id,user_id,timestamp,mentions,positive,negative[,text]
//! t1,u9,2016-10-03T14:00:00Z,"dbp:Donald_Trump:-2.1;dbp:Iraq_War:-2.8",1,-3
//! ```
//!
//! `mentions` is a `;`-separated list of `entity_id:confidence` pairs. The
//! confidence is everything after the last `:`, so identifiers may contain
//! colons; `%` and `;` inside identifiers are percent-escaped. The optional
//! seventh column carries raw text and is only needed by the spam filter.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeline::{self, Granularity, Period, Timestamp};

const ENTITY_ESCAPES: &AsciiSet = &CONTROLS.add(b'%').add(b';');

const BASE_FIELDS: usize = 6;
const PARSE_CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityMention {
    pub entity_id: String,
    /// Linker confidence; unbounded, higher is more confident.
    pub confidence: f64,
}

/// Dual sentiment strengths: positive in `1..=5`, negative in `-5..=-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SentimentScores {
    positive: i8,
    negative: i8,
}

impl SentimentScores {
    pub const NEUTRAL: SentimentScores = SentimentScores {
        positive: 1,
        negative: -1,
    };

    pub fn new(positive: i64, negative: i64) -> Option<Self> {
        ((1..=5).contains(&positive) && (-5..=-1).contains(&negative)).then_some(Self {
            positive: positive as i8,
            negative: negative as i8,
        })
    }

    pub fn positive(&self) -> i32 {
        self.positive as i32
    }

    pub fn negative(&self) -> i32 {
        self.negative as i32
    }

    /// `positive + negative`, in `[-4, 4]`.
    pub fn attitude(&self) -> i32 {
        self.positive() + self.negative()
    }

    /// `positive - negative - 2`, in `[0, 8]`.
    pub fn sentimentality(&self) -> i32 {
        self.positive() - self.negative() - 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedText {
    pub text_id: String,
    pub user_id: String,
    pub timestamp: Timestamp,
    /// Duplicate-free by `entity_id`.
    pub mentions: Vec<EntityMention>,
    pub sentiment: SentimentScores,
    pub text: Option<String>,
}

impl AnnotatedText {
    pub fn attitude(&self) -> i32 {
        self.sentiment.attitude()
    }

    pub fn sentimentality(&self) -> i32 {
        self.sentiment.sentimentality()
    }

    pub fn mentions_entity(&self, entity: &str) -> bool {
        self.mentions.iter().any(|m| m.entity_id == entity)
    }
}

/// Attitude of a single text as a real number.
pub fn derive_attitude(text: &AnnotatedText) -> f64 {
    text.attitude() as f64
}

/// Sentimentality of a single text as a real number.
pub fn derive_sentimentality(text: &AnnotatedText) -> f64 {
    text.sentimentality() as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RejectReason {
    #[error("wrong field count: expected 6 or 7, found {0}")]
    WrongFieldCount(usize),
    #[error("empty {0}")]
    EmptyField(&'static str),
    #[error("bad timestamp `{0}`")]
    BadTimestamp(String),
    #[error("malformed sentiment value `{0}`")]
    MalformedSentiment(String),
    #[error("sentiment out of range")]
    SentimentOutOfRange,
    #[error("malformed mention list: {0}")]
    MalformedMentions(String),
    #[error("duplicate text id `{0}`")]
    DuplicateTextId(String),
    #[error("invalid utf-8")]
    InvalidUtf8,
}

/// A row that failed validation. Rows are numbered from 1.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("row {row}: {reason}")]
pub struct Rejection {
    pub row: u64,
    pub reason: RejectReason,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error reading {what}: {source}")]
    Io {
        what: String,
        #[source]
        source: io::Error,
    },
    #[error("unreadable source at line {line}, byte {byte}: {message}")]
    Unreadable {
        line: u64,
        byte: u64,
        message: String,
    },
    #[error("duplicate text id `{0}`")]
    DuplicateTextId(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub record_count: u64,
    pub rejected_count: u64,
    pub distinct_users: u64,
    /// `[min, max]` timestamp; absent for an empty corpus.
    #[serde(with = "time_span_serde")]
    pub time_span: Option<(Timestamp, Timestamp)>,
}

mod time_span_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        v: &Option<(Timestamp, Timestamp)>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        v.map(|(a, b)| [timeline::format_timestamp(a), timeline::format_timestamp(b)])
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Option<(Timestamp, Timestamp)>, D::Error> {
        let raw: Option<[String; 2]> = Option::deserialize(d)?;
        raw.map(
            |[a, b]| match (timeline::parse_timestamp(&a), timeline::parse_timestamp(&b)) {
                (Some(a), Some(b)) => Ok((a, b)),
                _ => Err(serde::de::Error::custom("bad time_span")),
            },
        )
        .transpose()
    }
}

/// Validated, immutable set of records sorted by `(timestamp, text_id)`.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    records: Vec<AnnotatedText>,
}

impl Corpus {
    /// Builds a corpus from already-validated records, rejecting duplicate
    /// text ids.
    pub fn from_records(mut records: Vec<AnnotatedText>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.text_id.as_str()) {
                return Err(CorpusError::DuplicateTextId(r.text_id.clone()));
            }
        }
        records
            .par_sort_unstable_by(|a, b| (a.timestamp, &a.text_id).cmp(&(b.timestamp, &b.text_id)));
        Ok(Self { records })
    }

    pub fn records(&self) -> &[AnnotatedText] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Whether any record carries the optional raw text column.
    pub fn has_text(&self) -> bool {
        self.records.iter().any(|r| r.text.is_some())
    }

    /// Consecutive record runs per period, chronological.
    pub fn partitions(&self, g: Granularity) -> Vec<(Period, &[AnnotatedText])> {
        let mut out = Vec::new();
        let mut rest = self.records.as_slice();
        while let Some(first) = rest.first() {
            let period = timeline::assign(first.timestamp, g);
            let n = rest.partition_point(|r| r.timestamp < period.end());
            out.push((period, &rest[..n]));
            rest = &rest[n..];
        }
        out
    }

    pub fn stats(&self, rejected_count: u64) -> CorpusStats {
        let users: HashSet<&str> = self.records.iter().map(|r| r.user_id.as_str()).collect();
        CorpusStats {
            record_count: self.records.len() as u64,
            rejected_count,
            distinct_users: users.len() as u64,
            time_span: self
                .records
                .first()
                .zip(self.records.last())
                .map(|(a, b)| (a.timestamp, b.timestamp)),
        }
    }

    pub fn into_records(self) -> Vec<AnnotatedText> {
        self.records
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    /// Mentions with confidence below this are dropped; the record is kept.
    pub min_confidence: Option<f64>,
}

#[derive(Debug)]
pub struct Ingested {
    pub corpus: Corpus,
    pub stats: CorpusStats,
    pub rejections: Vec<Rejection>,
}

fn split_mention(part: &str) -> Result<EntityMention, RejectReason> {
    let malformed = |why: &str| RejectReason::MalformedMentions(format!("{why} in `{part}`"));
    let (raw_id, raw_conf) = part
        .rsplit_once(':')
        .ok_or_else(|| malformed("missing confidence"))?;
    let confidence: f64 = raw_conf
        .trim()
        .parse()
        .map_err(|_| malformed("bad confidence"))?;
    if !confidence.is_finite() {
        return Err(malformed("non-finite confidence"));
    }
    let entity_id = percent_decode_str(raw_id)
        .decode_utf8()
        .map_err(|_| malformed("invalid escape"))?
        .into_owned();
    if entity_id.is_empty() {
        return Err(malformed("empty entity id"));
    }
    Ok(EntityMention {
        entity_id,
        confidence,
    })
}

/// Parses a mention list, collapsing repeated entities to the highest
/// confidence and keeping first-seen order.
pub fn parse_mentions(field: &str) -> Result<Vec<EntityMention>, RejectReason> {
    let mut out: Vec<EntityMention> = Vec::new();
    let mut pos: HashMap<String, usize> = HashMap::new();
    if field.is_empty() {
        return Ok(out);
    }
    for part in field.split(';') {
        let m = split_mention(part)?;
        match pos.get(&m.entity_id) {
            Some(&i) => {
                if m.confidence > out[i].confidence {
                    out[i].confidence = m.confidence;
                }
            }
            None => {
                pos.insert(m.entity_id.clone(), out.len());
                out.push(m);
            }
        }
    }
    Ok(out)
}

fn parse_sentiment(raw: &str) -> Result<i64, RejectReason> {
    raw.trim()
        .parse::<i64>()
        .map_err(|_| RejectReason::MalformedSentiment(raw.to_string()))
}

fn parse_fields(fields: &csv::StringRecord) -> Result<AnnotatedText, RejectReason> {
    if fields.len() != BASE_FIELDS && fields.len() != BASE_FIELDS + 1 {
        return Err(RejectReason::WrongFieldCount(fields.len()));
    }
    let text_id = &fields[0];
    let user_id = &fields[1];
    if text_id.is_empty() {
        return Err(RejectReason::EmptyField("text_id"));
    }
    if user_id.is_empty() {
        return Err(RejectReason::EmptyField("user_id"));
    }
    let timestamp = timeline::parse_timestamp(fields[2].trim())
        .ok_or_else(|| RejectReason::BadTimestamp(fields[2].to_string()))?;
    let mentions = parse_mentions(&fields[3])?;
    let positive = parse_sentiment(&fields[4])?;
    let negative = parse_sentiment(&fields[5])?;
    let sentiment =
        SentimentScores::new(positive, negative).ok_or(RejectReason::SentimentOutOfRange)?;
    Ok(AnnotatedText {
        text_id: text_id.to_string(),
        user_id: user_id.to_string(),
        timestamp,
        mentions,
        sentiment,
        text: fields.get(BASE_FIELDS).map(str::to_string),
    })
}

fn csv_reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source)
}

/// Parses one CSV row. `row` is only used to label a rejection.
pub fn parse_record(line: &str, row: u64) -> Result<AnnotatedText, Rejection> {
    let reject = |reason| Rejection { row, reason };
    let mut reader = csv_reader(line.as_bytes());
    let mut record = csv::StringRecord::new();
    match reader.read_record(&mut record) {
        Ok(true) => {}
        Ok(false) => return Err(reject(RejectReason::WrongFieldCount(0))),
        Err(_) => return Err(reject(RejectReason::InvalidUtf8)),
    }
    let parsed = parse_fields(&record).map_err(reject)?;
    // A second physical record means the line held more than one row.
    match reader.read_record(&mut record) {
        Ok(false) => Ok(parsed),
        _ => Err(reject(RejectReason::WrongFieldCount(BASE_FIELDS * 2))),
    }
}

fn is_header(record: &csv::StringRecord) -> bool {
    record.get(0) == Some("text_id") && record.get(2) == Some("timestamp")
}

enum RawRow {
    Fields(u64, csv::StringRecord),
    Broken(u64, RejectReason),
}

fn parse_chunk(chunk: &mut Vec<RawRow>, out: &mut Vec<(u64, Result<AnnotatedText, RejectReason>)>) {
    let parsed: Vec<_> = chunk
        .par_drain(..)
        .map(|raw| match raw {
            RawRow::Fields(row, rec) => (row, parse_fields(&rec)),
            RawRow::Broken(row, reason) => (row, Err(reason)),
        })
        .collect();
    out.extend(parsed);
}

fn apply_threshold(record: &mut AnnotatedText, min_confidence: Option<f64>) {
    if let Some(min) = min_confidence {
        record.mentions.retain(|m| m.confidence >= min);
    }
}

/// Reads a whole CSV source. Malformed rows are collected as rejections;
/// only an unreadable source aborts. A leading header row is skipped.
pub fn ingest<R: Read>(source: R, opts: &IngestOptions) -> Result<Ingested, CorpusError> {
    let mut reader = csv_reader(source);
    let mut raw = Vec::with_capacity(PARSE_CHUNK);
    let mut parsed = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut first = true;
    loop {
        let line = reader.position().line();
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let row = record.position().map_or(line, |p| p.line());
                if first && is_header(&record) {
                    first = false;
                    continue;
                }
                raw.push(RawRow::Fields(row, record.clone()));
            }
            Err(e) => match e.kind() {
                csv::ErrorKind::Utf8 { pos, .. } => {
                    let row = pos.as_ref().map_or(line, |p| p.line());
                    raw.push(RawRow::Broken(row, RejectReason::InvalidUtf8));
                }
                _ => {
                    let pos = e
                        .position()
                        .cloned()
                        .unwrap_or_else(|| reader.position().clone());
                    return Err(CorpusError::Unreadable {
                        line: pos.line(),
                        byte: pos.byte(),
                        message: e.to_string(),
                    });
                }
            },
        }
        first = false;
        if raw.len() >= PARSE_CHUNK {
            parse_chunk(&mut raw, &mut parsed);
        }
    }
    parse_chunk(&mut raw, &mut parsed);

    let mut records = Vec::with_capacity(parsed.len());
    let mut rejections = Vec::new();
    let mut seen: HashSet<String> = HashSet::with_capacity(parsed.len());
    for (row, item) in parsed {
        match item {
            Ok(mut r) => {
                if !seen.insert(r.text_id.clone()) {
                    rejections.push(Rejection {
                        row,
                        reason: RejectReason::DuplicateTextId(r.text_id),
                    });
                    continue;
                }
                apply_threshold(&mut r, opts.min_confidence);
                records.push(r);
            }
            Err(reason) => rejections.push(Rejection { row, reason }),
        }
    }
    drop(seen);

    let corpus = Corpus::from_records(records)?;
    let stats = corpus.stats(rejections.len() as u64);
    Ok(Ingested {
        corpus,
        stats,
        rejections,
    })
}

/// Opens a file for ingestion, decompressing `.gz` transparently.
pub fn open_source(path: &Path) -> Result<Box<dyn Read + Send>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        what: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::with_capacity(1 << 20, file);
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("gz"))
    {
        Ok(Box::new(MultiGzDecoder::new(reader)))
    } else {
        Ok(Box::new(reader))
    }
}

pub fn ingest_path(path: &Path, opts: &IngestOptions) -> Result<Ingested, CorpusError> {
    ingest(open_source(path)?, opts)
}

fn needs_quotes(s: &str) -> bool {
    s.bytes().any(|b| matches!(b, b',' | b'"' | b'\n' | b'\r'))
}

fn push_field(out: &mut String, s: &str, always_quote: bool) {
    if always_quote || needs_quotes(s) {
        out.push('"');
        out.push_str(&s.replace('"', "\"\""));
        out.push('"');
    } else {
        out.push_str(s);
    }
}

/// Encodes a mention list in canonical form.
pub fn format_mentions(mentions: &[EntityMention]) -> String {
    let mut out = String::new();
    for (i, m) in mentions.iter().enumerate() {
        if i > 0 {
            out.push(';');
        }
        out.extend(utf8_percent_encode(&m.entity_id, ENTITY_ESCAPES));
        out.push(':');
        out.push_str(&m.confidence.to_string());
    }
    out
}

/// Canonical CSV row without line terminator. The mention field is always
/// quoted; other fields only when they contain separators or quotes.
pub fn serialize_record(r: &AnnotatedText) -> String {
    let mut out = String::with_capacity(64);
    push_field(&mut out, &r.text_id, false);
    out.push(',');
    push_field(&mut out, &r.user_id, false);
    out.push(',');
    out.push_str(&timeline::format_timestamp(r.timestamp));
    out.push(',');
    push_field(&mut out, &format_mentions(&r.mentions), true);
    out.push(',');
    out.push_str(&r.sentiment.positive().to_string());
    out.push(',');
    out.push_str(&r.sentiment.negative().to_string());
    if let Some(text) = &r.text {
        out.push(',');
        push_field(&mut out, text, false);
    }
    out
}

pub fn write_records<'a, W: Write>(
    mut w: W,
    records: impl IntoIterator<Item = &'a AnnotatedText>,
) -> io::Result<()> {
    for r in records {
        w.write_all(serialize_record(r).as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Side report of rejected rows as `row,reason`.
pub fn write_rejections<W: Write>(w: W, rejections: &[Rejection]) -> io::Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["row", "reason"])?;
    for r in rejections {
        csv.write_record([r.row.to_string(), r.reason.to_string()])?;
    }
    csv.flush()
}

impl fmt::Display for SentimentScores {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(+{}, {})", self.positive, self.negative)
    }
}
