//! CSV and JSON renderings of query results, plus atomic file output.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serializer;
use serde_json::{json, Value};

use crate::index::EntityIndex;
use crate::measures::{MeasurePoint, RankedPeriods};
use crate::relations::RankedNetwork;
use crate::timeline::{format_timestamp, Period};

pub(crate) fn period_str<S: Serializer>(p: &Period, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(p)
}

/// Writes `path` through a temporary file in the same directory, renamed
/// into place once `f` succeeds. Readers never see a partial file.
pub fn write_atomic<F>(path: &Path, f: F) -> io::Result<()>
where
    F: FnOnce(&mut BufWriter<&mut File>) -> io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        f(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

fn date(t: i64) -> String {
    format_timestamp(t)[..10].to_string()
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// `entity,period_start,period_end,measure,value,support`; null values are empty.
pub fn series_csv<W: Write>(w: W, points: &[MeasurePoint]) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "entity",
        "period_start",
        "period_end",
        "measure",
        "value",
        "support",
    ])
    .map_err(csv_err)?;
    for p in points {
        out.write_record([
            p.entity.clone(),
            date(p.period.start()),
            date(p.period.end()),
            p.measure.to_string(),
            p.value.map(num).unwrap_or_default(),
            p.support.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()
}

pub fn series_json(points: &[MeasurePoint]) -> Value {
    Value::Array(
        points
            .iter()
            .map(|p| {
                json!({
                    "entity": p.entity,
                    "period_start": date(p.period.start()),
                    "period_end": date(p.period.end()),
                    "measure": p.measure.to_string(),
                    "value": p.value,
                    "support": p.support,
                })
            })
            .collect(),
    )
}

/// `rank,period_start,period_end,value,support`.
pub fn top_k_csv<W: Write>(w: W, ranked: &RankedPeriods) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["rank", "period_start", "period_end", "value", "support"])
        .map_err(csv_err)?;
    for (i, (p, v, n)) in ranked.periods.iter().enumerate() {
        out.write_record([
            (i + 1).to_string(),
            date(p.start()),
            date(p.end()),
            num(*v),
            n.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()
}

pub fn top_k_json(ranked: &RankedPeriods) -> Value {
    json!({
        "entity": ranked.entity,
        "measure": ranked.measure.to_string(),
        "direction": ranked.direction.as_str(),
        "k": ranked.k,
        "periods": ranked.periods.iter().enumerate().map(|(i, (p, v, n))| json!({
            "rank": i + 1,
            "period_start": date(p.start()),
            "period_end": date(p.end()),
            "value": v,
            "support": n,
        })).collect::<Vec<_>>(),
    })
}

/// `rank,entity,score,support`.
pub fn network_csv<W: Write>(w: W, net: &RankedNetwork) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["rank", "entity", "score", "support"])
        .map_err(csv_err)?;
    for (i, e) in net.entries.iter().enumerate() {
        out.write_record([
            (i + 1).to_string(),
            e.entity.clone(),
            num(e.score),
            e.support.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()
}

pub fn network_json(net: &RankedNetwork) -> Value {
    json!({
        "entity": net.entity,
        "period_start": date(net.period.start()),
        "period_end": date(net.period.end()),
        "variant": net.variant.as_str(),
        "delta": net.delta,
        "min_support": net.min_support,
        "entries": net.entries.iter().enumerate().map(|(i, e)| json!({
            "rank": i + 1,
            "entity": e.entity,
            "score": e.score,
            "support": e.support,
        })).collect::<Vec<_>>(),
    })
}

/// Nodes (`entity,text_count`) and directed edges
/// (`source,target,pair_count,score`) of every co-occurrence in `period`.
pub fn graph_csv<W: Write, V: Write>(
    index: &EntityIndex,
    period: &Period,
    nodes: W,
    edges: V,
) -> io::Result<()> {
    let mut n = csv::Writer::from_writer(nodes);
    let mut e = csv::Writer::from_writer(edges);
    n.write_record(["entity", "text_count"]).map_err(csv_err)?;
    e.write_record(["source", "target", "pair_count", "score"])
        .map_err(csv_err)?;
    for posting in index.postings_in(period) {
        let source = index.entity_name(posting.entity);
        n.write_record([source, &posting.text_count.to_string()])
            .map_err(csv_err)?;
        for c in &posting.cooccur {
            let score = c.pair_text_count as f64 / posting.text_count as f64;
            e.write_record([
                source,
                index.entity_name(c.entity),
                &c.pair_text_count.to_string(),
                &num(score),
            ])
            .map_err(csv_err)?;
        }
    }
    n.flush()?;
    e.flush()
}
