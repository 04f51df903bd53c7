//! Time-partitioned entity index.
//!
//! For every period of the build granularity the index keeps a
//! [`PeriodSlice`] (all texts, all users) and, per mentioned entity, an
//! [`EntityPosting`] holding every count and sum the measures need: text and
//! user counts, attitude and sentimentality sums, strong positive/negative
//! counts at the build threshold, and sparse co-occurrence statistics.
//!
//! Entity ids are interned into a lexicographically sorted dictionary, so
//! ordering by [`EntityId`] is ordering by identifier string.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{AnnotatedText, Corpus};
use crate::distinct::{UserCounter, UserCounting};
use crate::timeline::{Granularity, Period};

pub const MAGIC: &[u8; 4] = b"EPX1";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PeriodSlice {
    #[serde(serialize_with = "crate::export::period_str")]
    pub period: Period,
    pub text_total: u64,
    pub user_total: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoOccurrence {
    pub entity: EntityId,
    pub pair_text_count: u64,
    pub pair_attitude_sum: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityPosting {
    pub entity: EntityId,
    pub text_count: u64,
    pub user_count: u64,
    pub attitude_sum: i64,
    pub sentimentality_sum: i64,
    pub strong_pos_count: u64,
    pub strong_neg_count: u64,
    /// Sorted by entity id; never contains `entity` itself.
    pub cooccur: Vec<CoOccurrence>,
}

impl EntityPosting {
    pub fn pair(&self, other: EntityId) -> Option<&CoOccurrence> {
        self.cooccur
            .binary_search_by_key(&other, |c| c.entity)
            .ok()
            .map(|i| &self.cooccur[i])
    }

    /// Every entity appearing in a text that mentions this one, including
    /// the entity itself.
    pub fn neighbor_entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        std::iter::once(self.entity).chain(self.cooccur.iter().map(|c| c.entity))
    }
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("strong attitude threshold {0} outside [0, 4]")]
    DeltaOutOfRange(f64),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("not an index file (bad magic)")]
    BadMagic,
    #[error("unsupported index format version {0}")]
    UnsupportedVersion(u16),
    #[error("index file truncated")]
    Truncated,
    #[error("checksum mismatch in {0}")]
    ChecksumMismatch(&'static str),
    #[error("corrupt index: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexConfig {
    pub granularity: Granularity,
    /// Strong attitude threshold in `[0, 4]`.
    pub delta: f64,
    pub user_counting: UserCounting,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            granularity: Granularity::Month,
            delta: 2.0,
            user_counting: UserCounting::Exact,
        }
    }
}

/// Classifies a text attitude against `delta`. A text is strongly positive
/// when `attitude >= delta` and strongly negative when `attitude <= -delta`;
/// at `delta == 0` a neutral text counts as positive only.
pub fn strong_class(attitude: i32, delta: f64) -> (bool, bool) {
    let a = attitude as f64;
    let pos = a >= delta;
    (pos, !pos && a <= -delta)
}

#[derive(Debug, Clone)]
pub struct EntityIndex {
    granularity: Granularity,
    delta: f64,
    user_counting: UserCounting,
    dictionary: Vec<String>,
    slices: Vec<PeriodSlice>,
    // Parallel to `slices`, each sorted by entity id.
    postings: Vec<Vec<EntityPosting>>,
}

#[derive(Default)]
struct Accumulator {
    text_count: u64,
    users: UserCounter,
    attitude_sum: i64,
    sentimentality_sum: i64,
    strong_pos: u64,
    strong_neg: u64,
    cooccur: HashMap<u32, (u64, i64)>,
}

fn build_partition(
    period: Period,
    records: &[AnnotatedText],
    entity_ids: &HashMap<&str, u32>,
    user_ids: &HashMap<&str, u32>,
    config: &IndexConfig,
) -> (PeriodSlice, Vec<EntityPosting>) {
    let mut acc: HashMap<u32, Accumulator> = HashMap::new();
    let mut users = HashSet::new();
    let mut ids = Vec::new();
    for r in records {
        let user = user_ids[r.user_id.as_str()];
        users.insert(user);
        let attitude = r.attitude();
        let sentimentality = r.sentimentality() as i64;
        let (pos, neg) = strong_class(attitude, config.delta);
        ids.clear();
        ids.extend(r.mentions.iter().map(|m| entity_ids[m.entity_id.as_str()]));
        for (i, &e) in ids.iter().enumerate() {
            let a = acc.entry(e).or_default();
            a.text_count += 1;
            a.users.insert(user, config.user_counting);
            a.attitude_sum += attitude as i64;
            a.sentimentality_sum += sentimentality;
            a.strong_pos += pos as u64;
            a.strong_neg += neg as u64;
            for (j, &f) in ids.iter().enumerate() {
                if i != j {
                    let c = a.cooccur.entry(f).or_default();
                    c.0 += 1;
                    c.1 += attitude as i64;
                }
            }
        }
    }
    let mut postings: Vec<EntityPosting> = acc
        .into_iter()
        .map(|(e, a)| {
            let mut cooccur: Vec<CoOccurrence> = a
                .cooccur
                .into_iter()
                .map(|(f, (n, s))| CoOccurrence {
                    entity: EntityId(f),
                    pair_text_count: n,
                    pair_attitude_sum: s,
                })
                .collect();
            cooccur.sort_unstable_by_key(|c| c.entity);
            EntityPosting {
                entity: EntityId(e),
                text_count: a.text_count,
                // Sketch estimates may overshoot; a count never exceeds its texts.
                user_count: a.users.count().min(a.text_count),
                attitude_sum: a.attitude_sum,
                sentimentality_sum: a.sentimentality_sum,
                strong_pos_count: a.strong_pos,
                strong_neg_count: a.strong_neg,
                cooccur,
            }
        })
        .collect();
    postings.sort_unstable_by_key(|p| p.entity);
    let slice = PeriodSlice {
        period,
        text_total: records.len() as u64,
        user_total: users.len() as u64,
    };
    (slice, postings)
}

impl EntityIndex {
    /// Builds the index in one pass per period; periods are processed in
    /// parallel.
    pub fn build(corpus: &Corpus, config: &IndexConfig) -> Result<Self, IndexError> {
        if !(0.0..=4.0).contains(&config.delta) {
            return Err(IndexError::DeltaOutOfRange(config.delta));
        }
        let records = corpus.records();
        let mut dictionary: Vec<&str> = records
            .par_iter()
            .flat_map_iter(|r| r.mentions.iter().map(|m| m.entity_id.as_str()))
            .collect::<HashSet<&str>>()
            .into_iter()
            .collect();
        dictionary.par_sort_unstable();
        let entity_ids: HashMap<&str, u32> = dictionary
            .iter()
            .enumerate()
            .map(|(i, &s)| (s, i as u32))
            .collect();
        let mut user_ids: HashMap<&str, u32> = HashMap::new();
        for r in records {
            let next = user_ids.len() as u32;
            user_ids.entry(r.user_id.as_str()).or_insert(next);
        }

        let (slices, postings): (Vec<_>, Vec<_>) = corpus
            .partitions(config.granularity)
            .into_par_iter()
            .map(|(period, part)| build_partition(period, part, &entity_ids, &user_ids, config))
            .unzip();

        Ok(Self {
            granularity: config.granularity,
            delta: config.delta,
            user_counting: config.user_counting,
            dictionary: dictionary.into_iter().map(str::to_string).collect(),
            slices,
            postings,
        })
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn user_counting(&self) -> UserCounting {
        self.user_counting
    }

    pub fn entity_count(&self) -> usize {
        self.dictionary.len()
    }

    pub fn entities(&self) -> impl Iterator<Item = &str> {
        self.dictionary.iter().map(String::as_str)
    }

    pub fn entity_id(&self, entity: &str) -> Option<EntityId> {
        self.dictionary
            .binary_search_by(|s| s.as_str().cmp(entity))
            .ok()
            .map(|i| EntityId(i as u32))
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        &self.dictionary[id.0 as usize]
    }

    pub fn slices(&self) -> &[PeriodSlice] {
        &self.slices
    }

    fn slice_pos(&self, period: &Period) -> Option<usize> {
        if period.granularity() != self.granularity {
            return None;
        }
        self.slices
            .binary_search_by_key(&period.start(), |s| s.period.start())
            .ok()
    }

    /// Slice for `period`; absent when no text falls in it.
    pub fn slice(&self, period: &Period) -> Option<&PeriodSlice> {
        self.slice_pos(period).map(|i| &self.slices[i])
    }

    pub fn postings_in(&self, period: &Period) -> &[EntityPosting] {
        self.slice_pos(period).map_or(&[], |i| &self.postings[i])
    }

    pub fn posting_by_id(&self, id: EntityId, period: &Period) -> Option<&EntityPosting> {
        let list = self.postings_in(period);
        list.binary_search_by_key(&id, |p| p.entity)
            .ok()
            .map(|i| &list[i])
    }

    /// Stored posting for `(entity, period)`; absent when no text in the
    /// period mentions the entity.
    pub fn posting(&self, entity: &str, period: &Period) -> Option<&EntityPosting> {
        self.posting_by_id(self.entity_id(entity)?, period)
    }

    pub fn posting_count(&self) -> usize {
        self.postings.iter().map(Vec::len).sum()
    }

    pub fn pair_count(&self) -> usize {
        self.postings
            .iter()
            .flatten()
            .map(|p| p.cooccur.len())
            .sum()
    }

    pub fn text_count(&self) -> u64 {
        self.slices.iter().map(|s| s.text_total).sum()
    }
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

const SECTION_META: u32 = 1;
const SECTION_DICT: u32 = 2;
const SECTION_SLICES: u32 = 3;
const SECTION_POSTINGS: u32 = 4;
const SECTION_NAMES: [(u32, &str); 4] = [
    (SECTION_META, "meta"),
    (SECTION_DICT, "dictionary"),
    (SECTION_SLICES, "slices"),
    (SECTION_POSTINGS, "postings"),
];
const SECTION_ENTRY_LEN: usize = 4 + 8 + 8 + 4;
const FLAG_SKETCH: u16 = 1;

fn section_name(kind: u32) -> &'static str {
    SECTION_NAMES
        .iter()
        .find(|(k, _)| *k == kind)
        .map_or("unknown", |(_, n)| n)
}

#[derive(Default)]
struct Enc(Vec<u8>);

impl Enc {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn i64(&mut self, v: i64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, n: usize) {
        self.u32(u32::try_from(n).expect("section element count fits in u32"));
    }
}

struct Dec<'a> {
    buf: &'a [u8],
}

impl<'a> Dec<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        if self.buf.len() < n {
            return Err(IndexError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }
    fn u8(&mut self) -> Result<u8, IndexError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, IndexError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn i64(&mut self) -> Result<i64, IndexError> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn count(&mut self, min_item_len: usize) -> Result<usize, IndexError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(min_item_len) > self.buf.len() {
            return Err(IndexError::Truncated);
        }
        Ok(n)
    }
    fn finish(self, what: &str) -> Result<(), IndexError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(IndexError::Corrupt(format!(
                "trailing bytes in {what} section"
            )))
        }
    }
}

fn corrupt(msg: impl Into<String>) -> IndexError {
    IndexError::Corrupt(msg.into())
}

#[derive(Debug, Clone, Serialize)]
pub struct SectionInfo {
    pub name: &'static str,
    pub offset: u64,
    pub bytes: u64,
    pub crc32: u32,
}

/// Summary of an index file as reported by `epx inspect`.
#[derive(Debug, Clone, Serialize)]
pub struct IndexSummary {
    pub format: &'static str,
    pub version: u16,
    pub file_bytes: u64,
    pub granularity: Granularity,
    pub delta: f64,
    pub user_counting: &'static str,
    pub entities: usize,
    pub periods: usize,
    pub postings: usize,
    pub cooccurrence_pairs: usize,
    pub texts: u64,
    pub first_period: Option<String>,
    pub last_period: Option<String>,
    pub sections: Vec<SectionInfo>,
}

impl EntityIndex {
    fn encode_sections(&self) -> Vec<(u32, Vec<u8>)> {
        let mut meta = Enc::default();
        meta.u8(self.granularity.code());
        meta.u64(self.delta.to_bits());

        let mut dict = Enc::default();
        dict.len(self.dictionary.len());
        for s in &self.dictionary {
            dict.len(s.len());
            dict.0.extend_from_slice(s.as_bytes());
        }

        let mut slices = Enc::default();
        slices.len(self.slices.len());
        for s in &self.slices {
            slices.i64(s.period.start());
            slices.i64(s.period.end());
            slices.u64(s.text_total);
            slices.u64(s.user_total);
        }

        let mut postings = Enc::default();
        for list in &self.postings {
            postings.len(list.len());
            for p in list {
                postings.u32(p.entity.0);
                postings.u64(p.text_count);
                postings.u64(p.user_count);
                postings.i64(p.attitude_sum);
                postings.i64(p.sentimentality_sum);
                postings.u64(p.strong_pos_count);
                postings.u64(p.strong_neg_count);
                postings.len(p.cooccur.len());
                for c in &p.cooccur {
                    postings.u32(c.entity.0);
                    postings.u64(c.pair_text_count);
                    postings.i64(c.pair_attitude_sum);
                }
            }
        }
        vec![
            (SECTION_META, meta.0),
            (SECTION_DICT, dict.0),
            (SECTION_SLICES, slices.0),
            (SECTION_POSTINGS, postings.0),
        ]
    }

    /// Serializes the index into the `EPX1` container.
    ///
    /// Layout (little-endian): magic, `u16` version, `u16` flags, `u32`
    /// section count, one `(u32 kind, u64 offset, u64 len, u32 crc32)` entry
    /// per section, a `u32` crc32 of everything before it, then the section
    /// bodies.
    pub fn to_bytes(&self) -> Vec<u8> {
        let sections = self.encode_sections();
        let header_len = 4 + 2 + 2 + 4 + sections.len() * SECTION_ENTRY_LEN + 4;
        let mut out = Enc::default();
        out.0.extend_from_slice(MAGIC);
        out.u16(FORMAT_VERSION);
        out.u16(if self.user_counting == UserCounting::Sketch {
            FLAG_SKETCH
        } else {
            0
        });
        out.len(sections.len());
        let mut offset = header_len as u64;
        for (kind, body) in &sections {
            out.u32(*kind);
            out.u64(offset);
            out.u64(body.len() as u64);
            out.u32(crc32fast::hash(body));
            offset += body.len() as u64;
        }
        let header_crc = crc32fast::hash(&out.0);
        out.u32(header_crc);
        for (_, body) in sections {
            out.0.extend_from_slice(&body);
        }
        out.0
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&self.to_bytes())?;
        w.flush()
    }

    /// Writes the index via a temporary file renamed into place.
    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        crate::export::write_atomic(path, |w| self.write_to(w)).map_err(|source| IndexError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        let bytes = fs::read(path).map_err(|source| IndexError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    pub fn inspect(path: &Path) -> Result<IndexSummary, IndexError> {
        let bytes = fs::read(path).map_err(|source| IndexError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let index = Self::from_bytes(&bytes)?;
        let (version, _, table) = read_header(&bytes)?;
        Ok(IndexSummary {
            format: "EPX1",
            version,
            file_bytes: bytes.len() as u64,
            granularity: index.granularity,
            delta: index.delta,
            user_counting: index.user_counting.as_str(),
            entities: index.entity_count(),
            periods: index.slices.len(),
            postings: index.posting_count(),
            cooccurrence_pairs: index.pair_count(),
            texts: index.text_count(),
            first_period: index.slices.first().map(|s| s.period.to_string()),
            last_period: index.slices.last().map(|s| s.period.to_string()),
            sections: table
                .into_iter()
                .map(|(kind, offset, len, crc)| SectionInfo {
                    name: section_name(kind),
                    offset,
                    bytes: len,
                    crc32: crc,
                })
                .collect(),
        })
    }

    /// Decodes and fully validates an `EPX1` container. Any inconsistency is
    /// an error; no partially decoded index is ever returned.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        let (_, flags, table) = read_header(bytes)?;
        let mut bodies: HashMap<u32, &[u8]> = HashMap::new();
        for (kind, offset, len, crc) in table {
            let end = offset.checked_add(len).ok_or(IndexError::Truncated)?;
            if end > bytes.len() as u64 {
                return Err(IndexError::Truncated);
            }
            let body = &bytes[offset as usize..end as usize];
            if crc32fast::hash(body) != crc {
                return Err(IndexError::ChecksumMismatch(section_name(kind)));
            }
            if bodies.insert(kind, body).is_some() {
                return Err(corrupt(format!("duplicate {} section", section_name(kind))));
            }
        }
        let section = |kind: u32| {
            bodies
                .get(&kind)
                .map(|b| Dec { buf: b })
                .ok_or_else(|| corrupt(format!("missing {} section", section_name(kind))))
        };

        let mut meta = section(SECTION_META)?;
        let granularity =
            Granularity::from_code(meta.u8()?).ok_or_else(|| corrupt("bad granularity"))?;
        let delta = f64::from_bits(meta.u64()?);
        meta.finish("meta")?;
        if !(0.0..=4.0).contains(&delta) {
            return Err(corrupt("delta outside [0, 4]"));
        }
        let user_counting = if flags & FLAG_SKETCH != 0 {
            UserCounting::Sketch
        } else {
            UserCounting::Exact
        };

        let mut dict = section(SECTION_DICT)?;
        let n = dict.count(4)?;
        let mut dictionary = Vec::with_capacity(n);
        for _ in 0..n {
            let len = dict.u32()? as usize;
            let s = std::str::from_utf8(dict.take(len)?)
                .map_err(|_| corrupt("dictionary entry is not utf-8"))?;
            if dictionary
                .last()
                .is_some_and(|prev: &String| prev.as_str() >= s)
                || s.is_empty()
            {
                return Err(corrupt("dictionary not strictly sorted"));
            }
            dictionary.push(s.to_string());
        }
        dict.finish("dictionary")?;

        let mut sl = section(SECTION_SLICES)?;
        let n = sl.count(32)?;
        let mut slices: Vec<PeriodSlice> = Vec::with_capacity(n);
        for _ in 0..n {
            let (start, end) = (sl.i64()?, sl.i64()?);
            let period = Period::from_bounds(start, end, granularity)
                .ok_or_else(|| corrupt("slice is not a calendar period"))?;
            let slice = PeriodSlice {
                period,
                text_total: sl.u64()?,
                user_total: sl.u64()?,
            };
            if slice.user_total > slice.text_total {
                return Err(corrupt("slice user total exceeds text total"));
            }
            if slices.last().is_some_and(|p| p.period >= period) {
                return Err(corrupt("slices not sorted"));
            }
            slices.push(slice);
        }
        sl.finish("slices")?;

        let entity_limit = dictionary.len() as u32;
        let mut pd = section(SECTION_POSTINGS)?;
        let mut postings = Vec::with_capacity(slices.len());
        for slice in &slices {
            let n = pd.count(56)?;
            let mut list: Vec<EntityPosting> = Vec::with_capacity(n);
            for _ in 0..n {
                let entity = EntityId(pd.u32()?);
                let mut p = EntityPosting {
                    entity,
                    text_count: pd.u64()?,
                    user_count: pd.u64()?,
                    attitude_sum: pd.i64()?,
                    sentimentality_sum: pd.i64()?,
                    strong_pos_count: pd.u64()?,
                    strong_neg_count: pd.u64()?,
                    cooccur: Vec::new(),
                };
                let m = pd.count(20)?;
                p.cooccur.reserve(m);
                for _ in 0..m {
                    let c = CoOccurrence {
                        entity: EntityId(pd.u32()?),
                        pair_text_count: pd.u64()?,
                        pair_attitude_sum: pd.i64()?,
                    };
                    let ordered = p.cooccur.last().is_none_or(|prev| prev.entity < c.entity);
                    if c.entity.0 >= entity_limit || c.entity == entity || !ordered {
                        return Err(corrupt("bad co-occurrence entry"));
                    }
                    if c.pair_text_count == 0 || c.pair_text_count > p.text_count {
                        return Err(corrupt("co-occurrence count out of range"));
                    }
                    p.cooccur.push(c);
                }
                let t = p.text_count as i64;
                let valid = entity.0 < entity_limit
                    && list.last().is_none_or(|prev| prev.entity < entity)
                    && p.text_count > 0
                    && p.text_count <= slice.text_total
                    && p.user_count <= p.text_count
                    && p.strong_pos_count + p.strong_neg_count <= p.text_count
                    && (-4 * t..=4 * t).contains(&p.attitude_sum)
                    && (0..=8 * t).contains(&p.sentimentality_sum);
                if !valid {
                    return Err(corrupt(format!("invalid posting in {}", slice.period)));
                }
                list.push(p);
            }
            postings.push(list);
        }
        pd.finish("postings")?;

        Ok(Self {
            granularity,
            delta,
            user_counting,
            dictionary,
            slices,
            postings,
        })
    }
}

type SectionTable = Vec<(u32, u64, u64, u32)>;

fn read_header(bytes: &[u8]) -> Result<(u16, u16, SectionTable), IndexError> {
    if bytes.len() < 4 {
        return Err(if MAGIC.starts_with(bytes) {
            IndexError::Truncated
        } else {
            IndexError::BadMagic
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(IndexError::BadMagic);
    }
    let mut d = Dec { buf: &bytes[4..] };
    let version = d.u16()?;
    if version != FORMAT_VERSION {
        return Err(IndexError::UnsupportedVersion(version));
    }
    let flags = d.u16()?;
    let n = d.count(SECTION_ENTRY_LEN)?;
    let mut table = Vec::with_capacity(n);
    for _ in 0..n {
        table.push((d.u32()?, d.u64()?, d.u64()?, d.u32()?));
    }
    let header_len = bytes.len() - d.buf.len();
    let crc = d.u32()?;
    if crc32fast::hash(&bytes[..header_len]) != crc {
        return Err(IndexError::ChecksumMismatch("header"));
    }
    Ok((version, flags, table))
}
