//! Naive full-scan reference implementations and shared fixtures.
//!
//! Nothing here touches the index. Records are bucketed by calendar fields
//! straight from chrono, and every quantity is recomputed from raw texts.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use chrono::{DateTime, Datelike};
use entity_pulse::corpus::{AnnotatedText, Corpus};
use entity_pulse::index::{EntityIndex, IndexConfig};
use entity_pulse::measures::{self, Direction, Measure};
use entity_pulse::relations::{self, NeighborMode, NetworkVariant};
use entity_pulse::synth::{
    self, EntitySpec, PairSign, PlantedEvent, ScenarioSpec, SentimentSpread, SplitMix64, WindowSpec,
};
use entity_pulse::timeline::{Granularity, Period};

pub const TOL: f64 = 1e-12;

fn month_key(ts: i64) -> (i32, u32) {
    let d = DateTime::from_timestamp(ts, 0).unwrap();
    (d.year(), d.month())
}

/// Monthly reference over raw records.
pub struct Oracle<'a> {
    by_month: BTreeMap<(i32, u32), Vec<&'a AnnotatedText>>,
    pub delta: f64,
}

fn mentions(t: &AnnotatedText, e: &str) -> bool {
    t.mentions.iter().any(|m| m.entity_id == e)
}

fn phi(t: &AnnotatedText) -> i64 {
    t.sentiment.positive() as i64 + t.sentiment.negative() as i64
}

fn psi(t: &AnnotatedText) -> i64 {
    t.sentiment.positive() as i64 - t.sentiment.negative() as i64 - 2
}

impl<'a> Oracle<'a> {
    pub fn new(records: &'a [AnnotatedText], delta: f64) -> Self {
        let mut by_month: BTreeMap<_, Vec<_>> = BTreeMap::new();
        for r in records {
            by_month.entry(month_key(r.timestamp)).or_default().push(r);
        }
        Self { by_month, delta }
    }

    fn texts(&self, p: &Period) -> &[&'a AnnotatedText] {
        assert_eq!(p.granularity(), Granularity::Month);
        let d = p.start_date();
        self.by_month
            .get(&(d.year(), d.month()))
            .map_or(&[], |v| v.as_slice())
    }

    fn texts_of(&self, e: &str, p: &Period) -> Vec<&'a AnnotatedText> {
        self.texts(p)
            .iter()
            .copied()
            .filter(|t| mentions(t, e))
            .collect()
    }

    pub fn measure(&self, e: &str, p: &Period, m: Measure) -> Option<f64> {
        let all = self.texts(p);
        let mine = self.texts_of(e, p);
        let users = |ts: &[&AnnotatedText]| {
            ts.iter()
                .map(|t| t.user_id.as_str())
                .collect::<HashSet<_>>()
                .len()
        };
        let pop_c = (!all.is_empty()).then(|| mine.len() as f64 / all.len() as f64);
        let pop_u = (!all.is_empty()).then(|| users(&mine) as f64 / users(all) as f64);
        let n = mine.len() as i64;
        match m {
            Measure::PopularityC => pop_c,
            Measure::PopularityU => pop_u,
            Measure::PopularityCu => pop_c.zip(pop_u).map(|(a, b)| a * b),
            Measure::Attitude => {
                (n > 0).then(|| mine.iter().map(|t| phi(t)).sum::<i64>() as f64 / n as f64)
            }
            Measure::Sentimentality => {
                (n > 0).then(|| mine.iter().map(|t| psi(t)).sum::<i64>() as f64 / n as f64)
            }
            Measure::Controversiality => {
                if n == 0 {
                    return None;
                }
                let pos = mine.iter().filter(|t| phi(t) as f64 >= self.delta).count();
                let neg = mine
                    .iter()
                    .filter(|t| (phi(t) as f64) < self.delta && phi(t) as f64 <= -self.delta)
                    .count();
                let (lo, hi) = (pos.min(neg), pos.max(neg));
                if hi == 0 {
                    Some(0.0)
                } else {
                    Some((pos + neg) as f64 / n as f64 * (lo as f64 / hi as f64))
                }
            }
        }
    }

    pub fn pair(&self, e: &str, o: &str, p: &Period) -> (u64, i64) {
        let both: Vec<_> = self
            .texts_of(e, p)
            .into_iter()
            .filter(|t| mentions(t, o))
            .collect();
        (both.len() as u64, both.iter().map(|t| phi(t)).sum())
    }

    pub fn direct(&self, e: &str, o: &str, p: &Period) -> Option<f64> {
        let n = self.texts_of(e, p).len();
        (n > 0).then(|| self.pair(e, o, p).0 as f64 / n as f64)
    }

    fn neighbor_set(&self, e: &str, p: &Period) -> BTreeSet<String> {
        self.texts_of(e, p)
            .iter()
            .flat_map(|t| t.mentions.iter().map(|m| m.entity_id.clone()))
            .collect()
    }

    pub fn indirect(&self, e: &str, o: &str, p: &Period, mode: NeighborMode) -> Option<f64> {
        let mut ne = self.neighbor_set(e, p);
        let mut no = self.neighbor_set(o, p);
        if mode == NeighborMode::ExcludeQueryPair {
            for x in [e, o] {
                ne.remove(x);
                no.remove(x);
            }
        }
        (!ne.is_empty()).then(|| ne.intersection(&no).count() as f64 / ne.len() as f64)
    }

    pub fn to_set(&self, e: &str, set: &[&str], p: &Period) -> Option<f64> {
        let mut sum = 0.0;
        for o in set {
            sum += self.direct(e, o, p)?;
        }
        Some(sum / set.len() as f64)
    }

    /// Every co-mentioned entity passing the variant filter, as
    /// `(entity, score, support)`.
    pub fn candidates(
        &self,
        e: &str,
        p: &Period,
        variant: NetworkVariant,
        delta: f64,
        min_support: u64,
    ) -> Vec<(String, f64, u64)> {
        let mine = self.texts_of(e, p);
        let others: BTreeSet<&str> = mine
            .iter()
            .flat_map(|t| t.mentions.iter().map(|m| m.entity_id.as_str()))
            .filter(|x| *x != e)
            .collect();
        others
            .into_iter()
            .filter_map(|o| {
                let (n, sum) = self.pair(e, o, p);
                let mean = sum as f64 / n as f64;
                let keep = match variant {
                    NetworkVariant::Plain => true,
                    NetworkVariant::Positive => n >= min_support && mean >= delta,
                    NetworkVariant::Negative => n >= min_support && mean < delta && mean <= -delta,
                };
                keep.then(|| (o.to_string(), n as f64 / mine.len() as f64, n))
            })
            .collect()
    }

    /// Ranked network by a plain sort of all candidates.
    pub fn network(
        &self,
        e: &str,
        p: &Period,
        k: usize,
        variant: NetworkVariant,
        delta: f64,
        min_support: u64,
    ) -> Vec<(String, f64, u64)> {
        let mut c = self.candidates(e, p, variant, delta, min_support);
        c.sort_by(|a, b| b.1.total_cmp(&a.1).then(b.2.cmp(&a.2)).then(a.0.cmp(&b.0)));
        c.truncate(k);
        c
    }
}

/// All size-`k` index subsets of `0..n`.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Best size-`k` subset by summed score, searched exhaustively. Items are
/// `(score, tie_key)`; among equal sums the subset whose members are better
/// under `better` element-wise (in rank order) wins. Returns members in
/// rank order.
pub fn exhaustive_best<T: Clone>(
    items: &[T],
    k: usize,
    score: impl Fn(&T) -> f64,
    better: impl Fn(&T, &T) -> std::cmp::Ordering,
) -> Vec<T> {
    let k = k.min(items.len());
    let ranked = |s: &[usize]| {
        let mut v: Vec<T> = s.iter().map(|&i| items[i].clone()).collect();
        v.sort_by(&better);
        v
    };
    let mut best: Option<(f64, Vec<T>)> = None;
    for s in subsets(items.len(), k) {
        let sum: f64 = s.iter().map(|&i| score(&items[i])).sum();
        let members = ranked(&s);
        let replace = match &best {
            None => true,
            // Equal multisets summed in different orders may differ in the
            // last bit, so sums this close count as tied.
            Some((bs, bm)) => match (sum - bs).abs() <= 1e-9 {
                false => sum > *bs,
                true => {
                    members
                        .iter()
                        .zip(bm)
                        .map(|(a, b)| better(a, b))
                        .find(|o| o.is_ne())
                        == Some(std::cmp::Ordering::Less)
                }
            },
        };
        if replace {
            best = Some((sum, members));
        }
    }
    best.map(|(_, m)| m).unwrap_or_default()
}

pub fn months(year: i32) -> Vec<Period> {
    let start =
        entity_pulse::timeline::parse_timestamp(&format!("{year}-01-01T00:00:00Z")).unwrap();
    let end =
        entity_pulse::timeline::parse_timestamp(&format!("{}-01-01T00:00:00Z", year + 1)).unwrap();
    entity_pulse::timeline::enumerate(start, end, Granularity::Month)
}

pub fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() <= TOL,
        _ => false,
    }
}

pub const DELTAS: [f64; 6] = [0.0, 0.5, 1.0, 2.0, 3.0, 4.0];

/// A random 12-month scenario within the oracle bounds: at most 10k texts,
/// 100 entities and 20 users.
pub fn random_spec(seed: u64) -> ScenarioSpec {
    let mut r = SplitMix64::new(seed ^ 0xA5A5_5A5A);
    let n_entities = 1 + r.below(100) as usize;
    let budget = 150.0 + r.next_f64() * 500.0;
    let entities: Vec<EntitySpec> = (0..n_entities)
        .map(|i| {
            let skewed = r.next_f64().powi(2) * 2.0 * budget / n_entities as f64;
            let rates = (r.below(3) == 0).then(|| {
                (0..12)
                    .map(|_| {
                        if r.below(4) == 0 {
                            0.0
                        } else {
                            r.next_f64() * skewed * 2.0
                        }
                    })
                    .collect()
            });
            EntitySpec {
                // Mixed prefixes exercise dictionary ordering.
                id: if i % 3 == 0 {
                    format!("dbp:E{i}")
                } else {
                    format!("e{i:02}")
                },
                rate: skewed,
                rates,
            }
        })
        .collect();
    let pick = |r: &mut SplitMix64| entities[r.below(entities.len() as u64) as usize].id.clone();
    let month = |r: &mut SplitMix64| format!("2015-{:02}", 1 + r.below(12));
    let mut events = Vec::new();
    for _ in 0..r.below(4) {
        let e = pick(&mut r);
        let o = pick(&mut r);
        let ev = match r.below(3) {
            0 => PlantedEvent::ControversyBurst {
                entity: e,
                period: month(&mut r),
                texts: 1 + r.below(20),
            },
            1 if e != o => PlantedEvent::SignedPair {
                entity: e,
                other: o,
                period: month(&mut r),
                texts: 1 + r.below(15),
                sign: if r.below(2) == 0 {
                    PairSign::Positive
                } else {
                    PairSign::Negative
                },
            },
            _ if e != o => PlantedEvent::PairLink {
                entity: e,
                other: o,
                period: None,
                texts: 1 + r.below(5),
            },
            _ => continue,
        };
        events.push(ev);
    }
    ScenarioSpec {
        seed,
        window: WindowSpec {
            start: "2015-01".into(),
            end: "2016-01".into(),
        },
        granularity: Granularity::Month,
        users: 1 + r.below(20),
        background_rate: r.next_f64() * 40.0,
        entities,
        max_mentions: 1 + r.below(4),
        sentiment: SentimentSpread::Full,
        with_text: false,
        events,
    }
}

pub struct Fixture {
    pub records: Vec<AnnotatedText>,
    pub entities: Vec<String>,
    pub delta: f64,
    pub index: EntityIndex,
}

pub fn random_fixture(seed: u64) -> Fixture {
    let spec = random_spec(seed);
    let records = synth::generate(&spec).unwrap().records;
    assert!(
        records.len() <= 10_000,
        "fixture too large: {}",
        records.len()
    );
    let delta = DELTAS[(seed % DELTAS.len() as u64) as usize];
    let corpus = Corpus::from_records(records.clone()).unwrap();
    let index = EntityIndex::build(
        &corpus,
        &IndexConfig {
            delta,
            ..IndexConfig::default()
        },
    )
    .unwrap();
    let mut entities: Vec<String> = spec.entities.iter().map(|e| e.id.clone()).collect();
    entities.push("absent-entity".into());
    Fixture {
        records,
        entities,
        delta,
        index,
    }
}

/// Compares every measure, top-K query, relation and network variant of
/// `index` against the oracle. Returns the number of comparisons made.
pub fn check_against_oracle(fx: &Fixture, index: &EntityIndex) -> Result<u64, String> {
    let oracle = Oracle::new(&fx.records, fx.delta);
    let periods = months(2015);
    let (start, end) = (periods[0].start(), periods[11].end());
    let mut checks = 0u64;
    for e in &fx.entities {
        for m in Measure::ALL {
            let series: Vec<Option<f64>> =
                periods.iter().map(|p| oracle.measure(e, p, m)).collect();
            for (p, want) in periods.iter().zip(&series) {
                let want = *want;
                let got = measures::evaluate(index, e, p, m)
                    .map_err(|x| x.to_string())?
                    .value;
                if !close(got, want) {
                    return Err(format!("{m} of {e} in {p}: index {got:?}, oracle {want:?}"));
                }
                checks += 1;
            }
            for dir in [Direction::High, Direction::Low] {
                for k in [1, 3, 12] {
                    let got = measures::top_k_periods(index, e, start, end, m, k, dir)
                        .map_err(|x| x.to_string())?;
                    let mut want: Vec<(Period, f64)> = periods
                        .iter()
                        .zip(&series)
                        .filter_map(|(p, v)| v.map(|v| (*p, v)))
                        .collect();
                    want.sort_by(|a, b| {
                        match dir {
                            Direction::High => b.1.total_cmp(&a.1),
                            Direction::Low => a.1.total_cmp(&b.1),
                        }
                        .then(a.0.cmp(&b.0))
                    });
                    want.truncate(k);
                    let same = got.periods.len() == want.len()
                        && got
                            .periods
                            .iter()
                            .zip(&want)
                            .all(|(g, w)| g.0 == w.0 && (g.1 - w.1).abs() <= TOL);
                    if !same {
                        return Err(format!(
                            "top-{k} {dir:?} {m} of {e}: index {:?}, oracle {want:?}",
                            got.periods
                        ));
                    }
                    checks += 1;
                }
            }
        }
    }
    // Relations and networks over a bounded sample of entity pairs.
    let sample: Vec<&String> = fx.entities.iter().take(25).collect();
    for p in &periods {
        for e in &sample {
            for o in &sample {
                if e == o {
                    continue;
                }
                let got =
                    relations::direct_connectedness(index, e, o, p).map_err(|x| x.to_string())?;
                if !close(got, oracle.direct(e, o, p)) {
                    return Err(format!(
                        "direct {e}->{o} in {p}: {got:?} vs {:?}",
                        oracle.direct(e, o, p)
                    ));
                }
                for mode in [NeighborMode::ExcludeQueryPair, NeighborMode::Literal] {
                    let got = relations::indirect_connectedness(index, e, o, p, mode)
                        .map_err(|x| x.to_string())?;
                    if !close(got, oracle.indirect(e, o, p, mode)) {
                        return Err(format!("indirect {mode:?} {e}->{o} in {p}: {got:?}"));
                    }
                }
                checks += 3;
            }
            let set: Vec<&str> = sample
                .iter()
                .filter(|x| *x != e)
                .take(3)
                .map(|s| s.as_str())
                .collect();
            if !set.is_empty() {
                let got = relations::connectedness_to_set(index, e, &set, p)
                    .map_err(|x| x.to_string())?;
                if !close(got, oracle.to_set(e, &set, p)) {
                    return Err(format!("set connectedness of {e} in {p}: {got:?}"));
                }
                checks += 1;
            }
        }
        for e in &fx.entities {
            for variant in [
                NetworkVariant::Plain,
                NetworkVariant::Positive,
                NetworkVariant::Negative,
            ] {
                for (k, delta, support) in
                    [(3, fx.delta, 1), (10, 2.0, 1), (100, 0.0, 2), (5, 3.0, 1)]
                {
                    let got = relations::network(index, e, p, k, variant, delta, support)
                        .map_err(|x| x.to_string())?;
                    let want = oracle.network(e, p, k, variant, delta, support);
                    let same = got.entries.len() == want.len()
                        && got.entries.iter().zip(&want).all(|(g, w)| {
                            g.entity == w.0 && (g.score - w.1).abs() <= TOL && g.support == w.2
                        });
                    if !same {
                        return Err(format!("{variant} network of {e} in {p} (k={k}, delta={delta}): {:?} vs {want:?}", got.entries));
                    }
                    checks += 1;
                }
            }
        }
    }
    // Integer counts stored in the index.
    for p in &periods {
        let slice_total = index.slice(p).map_or(0, |s| s.text_total);
        let naive = fx
            .records
            .iter()
            .filter(|r| p.contains(r.timestamp))
            .count() as u64;
        if slice_total != naive {
            return Err(format!("text total in {p}: {slice_total} vs {naive}"));
        }
        for posting in index.postings_in(p) {
            let name = index.entity_name(posting.entity);
            let mine = oracle.texts_of(name, p);
            if posting.text_count != mine.len() as u64
                || posting.attitude_sum != mine.iter().map(|t| phi(t)).sum::<i64>()
                || posting.sentimentality_sum != mine.iter().map(|t| psi(t)).sum::<i64>()
            {
                return Err(format!("posting counts for {name} in {p}"));
            }
            for c in &posting.cooccur {
                let (n, sum) = oracle.pair(name, index.entity_name(c.entity), p);
                if (c.pair_text_count, c.pair_attitude_sum) != (n, sum) {
                    return Err(format!(
                        "pair counts {name}/{} in {p}",
                        index.entity_name(c.entity)
                    ));
                }
            }
            checks += 1;
        }
    }
    Ok(checks)
}

/// Top-K periods and k-networks against exhaustive subset search, on a small
/// fixture with at most 8 periods and 8 candidates. Returns comparisons made.
pub fn check_exhaustive_argmax(seed: u64) -> Result<u64, String> {
    let mut r = SplitMix64::new(seed);
    let n_entities = 2 + r.below(8) as usize;
    let mut spec = random_spec(seed);
    spec.window = WindowSpec {
        start: "2015-01".into(),
        end: "2015-09".into(),
    };
    spec.users = 1 + r.below(5);
    spec.background_rate = r.next_f64() * 5.0;
    spec.max_mentions = 1 + r.below(5);
    spec.events.clear();
    spec.entities.clear();
    for i in 0..n_entities {
        // Small integer rates make tied values common.
        spec.entities.push(EntitySpec {
            id: format!("x{i}"),
            rate: r.below(4) as f64,
            rates: None,
        });
    }
    let records = synth::generate(&spec).unwrap().records;
    let corpus = Corpus::from_records(records.clone()).unwrap();
    let index = EntityIndex::build(&corpus, &IndexConfig::default()).unwrap();
    let oracle = Oracle::new(&records, 2.0);
    let periods = &months(2015)[..8];
    let (start, end) = (periods[0].start(), periods[7].end());
    let mut checks = 0;
    for e in spec.entities.iter().map(|e| e.id.as_str()) {
        for m in Measure::ALL {
            for dir in [Direction::High, Direction::Low] {
                let items: Vec<(Period, f64)> = periods
                    .iter()
                    .filter_map(|p| oracle.measure(e, p, m).map(|v| (*p, v)))
                    .collect();
                for k in 1..=3 {
                    let sign = if dir == Direction::High { 1.0 } else { -1.0 };
                    let want = exhaustive_best(
                        &items,
                        k,
                        |x| sign * x.1,
                        |a, b| measures::period_order(dir, (&a.0, a.1), (&b.0, b.1)),
                    );
                    let got = measures::top_k_periods(&index, e, start, end, m, k, dir)
                        .map_err(|x| x.to_string())?;
                    let got: Vec<(Period, f64)> = got.periods.iter().map(|x| (x.0, x.1)).collect();
                    if got.len() != want.len()
                        || got
                            .iter()
                            .zip(&want)
                            .any(|(g, w)| g.0 != w.0 || (g.1 - w.1).abs() > TOL)
                    {
                        return Err(format!(
                            "top-{k} {dir:?} {m} of {e}: {got:?} vs exhaustive {want:?}"
                        ));
                    }
                    checks += 1;
                }
            }
        }
        for p in periods {
            for variant in [
                NetworkVariant::Plain,
                NetworkVariant::Positive,
                NetworkVariant::Negative,
            ] {
                let items = oracle.candidates(e, p, variant, 1.0, 1);
                for k in 1..=3 {
                    let want = exhaustive_best(
                        &items,
                        k,
                        |x| x.1,
                        |a, b| relations::network_order((a.1, a.2, &a.0), (b.1, b.2, &b.0)),
                    );
                    let got = relations::network(&index, e, p, k, variant, 1.0, 1)
                        .map_err(|x| x.to_string())?;
                    if got.entries.len() != want.len()
                        || got.entries.iter().zip(&want).any(|(g, w)| g.entity != w.0)
                    {
                        return Err(format!(
                            "{variant} {k}-network of {e} in {p}: {:?} vs {want:?}",
                            got.entries
                        ));
                    }
                    checks += 1;
                }
            }
        }
    }
    Ok(checks)
}

/// Monthly 2015 scenario with a July popularity spike, two controversy
/// bursts, signed partners, a recurring pair link and spam blocks.
pub fn planted_spec() -> ScenarioSpec {
    let mut entities = vec![
        EntitySpec {
            id: "dbp:Alexis_Tsipras".into(),
            rate: 20.0,
            rates: None,
        },
        EntitySpec {
            id: "dbp:Greek_referendum".into(),
            rate: 20.0,
            rates: None,
        },
        EntitySpec {
            id: "dbp:Angela_Merkel".into(),
            rate: 15.0,
            rates: None,
        },
        EntitySpec {
            id: "dbp:Yanis_Varoufakis".into(),
            rate: 15.0,
            rates: None,
        },
    ];
    for i in 0..20 {
        entities.push(EntitySpec {
            id: format!("dbp:Filler_{i}"),
            rate: 15.0,
            rates: None,
        });
    }
    let ev = |json: &str| serde_json::from_str::<PlantedEvent>(json).unwrap();
    ScenarioSpec {
        seed: 2015,
        window: WindowSpec {
            start: "2015-01".into(),
            end: "2016-01".into(),
        },
        granularity: Granularity::Month,
        users: 200,
        background_rate: 100.0,
        entities,
        max_mentions: 2,
        sentiment: SentimentSpread::Mild,
        with_text: true,
        events: vec![
            ev(
                r#"{"kind": "popularity-spike", "entity": "dbp:Alexis_Tsipras", "period": "2015-07", "factor": 10}"#,
            ),
            ev(
                r#"{"kind": "controversy-burst", "entity": "dbp:Greek_referendum", "period": "2015-03", "texts": 40}"#,
            ),
            ev(
                r#"{"kind": "controversy-burst", "entity": "dbp:Greek_referendum", "period": "2015-09", "texts": 40}"#,
            ),
            ev(
                r#"{"kind": "signed-pair", "entity": "dbp:Alexis_Tsipras", "other": "dbp:Angela_Merkel", "period": "2015-07", "texts": 40, "sign": "negative"}"#,
            ),
            ev(
                r#"{"kind": "signed-pair", "entity": "dbp:Alexis_Tsipras", "other": "dbp:Yanis_Varoufakis", "period": "2015-07", "texts": 40, "sign": "positive"}"#,
            ),
            ev(
                r#"{"kind": "pair-link", "entity": "dbp:Greek_referendum", "other": "dbp:Filler_3", "texts": 15}"#,
            ),
            ev(r#"{"kind": "spam-block", "texts": 50}"#),
        ],
    }
}

fn period_of(label: &str) -> Period {
    Period::parse(label, Granularity::Month).unwrap()
}

/// Verifies every manifest expectation except spam blocks against `index`.
/// Returns the number of expectations checked.
pub fn check_planted(manifest: &synth::Manifest, index: &EntityIndex) -> Result<usize, String> {
    let ms = months(2015);
    let (start, end) = (ms[0].start(), ms[11].end());
    let mut checked = 0;
    for x in &manifest.expectations {
        let e = x.entity.as_deref().unwrap_or_default();
        match x.kind.as_str() {
            "popularity-spike" => {
                let top = measures::top_k_periods(
                    index,
                    e,
                    start,
                    end,
                    Measure::PopularityCu,
                    1,
                    Direction::High,
                )
                .unwrap();
                let want = period_of(x.period.as_deref().unwrap());
                if top.periods.first().map(|p| p.0) != Some(want) {
                    return Err(format!(
                        "spike of {e}: top period {:?}, planted {want}",
                        top.periods.first()
                    ));
                }
            }
            "controversy-burst" => {
                let bursts: BTreeSet<Period> = manifest
                    .expectations
                    .iter()
                    .filter(|y| y.kind == "controversy-burst" && y.entity == x.entity)
                    .map(|y| period_of(y.period.as_deref().unwrap()))
                    .collect();
                let top = measures::top_k_periods(
                    index,
                    e,
                    start,
                    end,
                    Measure::Controversiality,
                    bursts.len(),
                    Direction::High,
                )
                .unwrap();
                let got: BTreeSet<Period> = top.periods.iter().map(|p| p.0).collect();
                if got != bursts {
                    return Err(format!("bursts of {e}: top {got:?}, planted {bursts:?}"));
                }
            }
            "signed-pair" => {
                let p = period_of(x.period.as_deref().unwrap());
                let o = x.other.as_deref().unwrap();
                let (want, other) = match x.sign.unwrap() {
                    PairSign::Positive => (NetworkVariant::Positive, NetworkVariant::Negative),
                    PairSign::Negative => (NetworkVariant::Negative, NetworkVariant::Positive),
                };
                let has = |v| {
                    relations::network(index, e, &p, 5, v, 2.0, 1)
                        .unwrap()
                        .entries
                        .iter()
                        .any(|n| n.entity == o)
                };
                if !has(want) || has(other) {
                    return Err(format!(
                        "signed pair {e}/{o}: in {want}: {}, in {other}: {}",
                        has(want),
                        has(other)
                    ));
                }
            }
            "pair-link" => {
                let o = x.other.as_deref().unwrap();
                let periods = match &x.period {
                    Some(p) => vec![period_of(p)],
                    None => ms.clone(),
                };
                for p in periods {
                    let net = relations::k_network(index, e, &p, 10).unwrap();
                    if !net.entries.iter().any(|n| n.entity == o) {
                        return Err(format!(
                            "pair link {e}/{o} missing from the 10-network in {p}"
                        ));
                    }
                }
            }
            _ => continue,
        }
        checked += 1;
    }
    Ok(checked)
}

pub struct SpamReport {
    pub accuracy: f64,
    pub worst_posterior_gap: f64,
    pub planted: u64,
    pub removed: u64,
    pub removed_planted: u64,
}

/// Trains on 80% of the labeled corpus, scores the rest, then filters the
/// planted fixture.
pub fn spam_report() -> SpamReport {
    use entity_pulse::spam::{self, NbModel};
    let docs = synth::labeled_corpus(11, 1000, 0.2, 0.5);
    let (train, test) = docs.split_at(800);
    let model = NbModel::train(train, 1.0).unwrap();
    let correct = test
        .iter()
        .filter(|(t, l)| model.classify(t).label == *l)
        .count();
    let worst_posterior_gap = docs
        .iter()
        .map(|(t, _)| {
            let c = model.classify(t);
            (c.spam_posterior + c.ham_posterior - 1.0).abs()
        })
        .fold(0.0, f64::max);
    let generated = synth::generate(&planted_spec()).unwrap();
    let corpus = Corpus::from_records(generated.records.clone()).unwrap();
    let outcome = spam::filter_corpus(&corpus, &model).unwrap();
    let kept: HashSet<&str> = outcome
        .corpus
        .records()
        .iter()
        .map(|r| r.text_id.as_str())
        .collect();
    let removed_planted = generated
        .spam_ids
        .iter()
        .filter(|id| !kept.contains(id.as_str()))
        .count() as u64;
    SpamReport {
        accuracy: correct as f64 / test.len() as f64,
        worst_posterior_gap,
        planted: generated.manifest.spam_count,
        removed: outcome.removed_count,
        removed_planted,
    }
}

/// Saves and reloads a fixture index, then checks the copy against the
/// oracle and the original byte for byte.
pub fn check_round_trip(fx: &Fixture) -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("fixture.epx");
    fx.index.save(&path).map_err(|e| e.to_string())?;
    let loaded = EntityIndex::load(&path).map_err(|e| e.to_string())?;
    if loaded.to_bytes() != fx.index.to_bytes() {
        return Err("reloaded index serializes differently".into());
    }
    check_against_oracle(fx, &loaded).map(|_| ())
}

/// Flips one bit at `stride`-spaced offsets and truncates at every
/// `stride`-spaced length; every damaged file must fail to load.
pub fn check_corruption(fx: &Fixture, stride: usize) -> Result<usize, String> {
    let bytes = fx.index.to_bytes();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("damaged.epx");
    let mut cases = 0;
    let mut offsets: Vec<usize> = (0..bytes.len().min(64)).collect();
    offsets.extend((64..bytes.len()).step_by(stride));
    for &i in &offsets {
        let mut damaged = bytes.clone();
        damaged[i] ^= 1 << (i % 8);
        if EntityIndex::from_bytes(&damaged).is_ok() {
            return Err(format!("bit flip at byte {i} went undetected"));
        }
        cases += 1;
    }
    for len in (0..bytes.len()).step_by(stride) {
        std::fs::write(&path, &bytes[..len]).map_err(|e| e.to_string())?;
        if EntityIndex::load(&path).is_ok() {
            return Err(format!("truncation to {len} bytes went undetected"));
        }
        cases += 1;
    }
    Ok(cases)
}
