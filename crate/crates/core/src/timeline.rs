//! Calendar periods and granularities.
//!
//! All instants are UTC Unix seconds. A [`Period`] is a half-open interval
//! `[start, end)` spanning exactly one calendar unit of its [`Granularity`].
//! Weeks follow ISO-8601 and start on Monday.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// UTC instant with second precision.
pub type Timestamp = i64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TimelineError {
    #[error("unknown granularity `{0}` (expected day, week, month or year)")]
    UnknownGranularity(String),
    #[error("invalid period argument `{0}` (expected YYYY, YYYY-MM or YYYY-MM-DD)")]
    BadPeriodArg(String),
    #[error("invalid period `{0}` (expected YYYY-MM-DD/YYYY-MM-DD)")]
    BadPeriod(String),
    #[error("instant out of supported range")]
    OutOfRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Day,
    Week,
    Month,
    Year,
}

impl Granularity {
    pub const ALL: [Granularity; 4] = [Self::Day, Self::Week, Self::Month, Self::Year];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Day => "day",
            Self::Week => "week",
            Self::Month => "month",
            Self::Year => "year",
        }
    }

    pub(crate) fn code(&self) -> u8 {
        match self {
            Self::Day => 0,
            Self::Week => 1,
            Self::Month => 2,
            Self::Year => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Granularity {
    type Err = TimelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "day" => Ok(Self::Day),
            "week" => Ok(Self::Week),
            "month" => Ok(Self::Month),
            "year" => Ok(Self::Year),
            other => Err(TimelineError::UnknownGranularity(other.to_string())),
        }
    }
}

/// One calendar unit `[start, end)`.
///
/// Ordering is chronological; periods of one granularity never overlap, so
/// comparing by start is a total order within a granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Period {
    start: Timestamp,
    end: Timestamp,
    granularity: Granularity,
}

impl Period {
    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn end(&self) -> Timestamp {
        self.end
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t < self.end
    }

    /// The period immediately after this one.
    pub fn next(&self) -> Period {
        assign(self.end, self.granularity)
    }

    pub fn start_date(&self) -> NaiveDate {
        to_datetime(self.start).date_naive()
    }

    pub fn end_date(&self) -> NaiveDate {
        to_datetime(self.end).date_naive()
    }

    /// Rebuilds a period from stored bounds, checking that they really are a
    /// calendar unit of `granularity`.
    pub fn from_bounds(
        start: Timestamp,
        end: Timestamp,
        granularity: Granularity,
    ) -> Option<Period> {
        if !(MIN_TS..=MAX_TS).contains(&start) {
            return None;
        }
        let p = assign(start, granularity);
        (p.start == start && p.end == end).then_some(p)
    }

    /// Parses the `YYYY-MM-DD/YYYY-MM-DD` rendering.
    pub fn parse(s: &str, granularity: Granularity) -> Result<Period, TimelineError> {
        let bad = || TimelineError::BadPeriod(s.to_string());
        let (a, b) = s.split_once('/').ok_or_else(bad)?;
        let start = NaiveDate::parse_from_str(a, "%Y-%m-%d").map_err(|_| bad())?;
        let end = NaiveDate::parse_from_str(b, "%Y-%m-%d").map_err(|_| bad())?;
        Period::from_bounds(date_start(start), date_start(end), granularity).ok_or_else(bad)
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}",
            self.start_date().format("%Y-%m-%d"),
            self.end_date().format("%Y-%m-%d")
        )
    }
}

// Keeps every computed period boundary inside chrono's representable range.
const MIN_TS: Timestamp = -62_135_596_800; // 0001-01-01
const MAX_TS: Timestamp = 253_402_300_799; // 9999-12-31T23:59:59

fn to_datetime(t: Timestamp) -> DateTime<Utc> {
    DateTime::from_timestamp(t.clamp(MIN_TS, MAX_TS), 0).expect("timestamp clamped into range")
}

fn date_start(d: NaiveDate) -> Timestamp {
    NaiveDateTime::new(d, NaiveTime::MIN).and_utc().timestamp()
}

fn first_of_month(year: i32, month: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(year, month, 1).expect("valid first of month")
}

/// Returns the unique period of granularity `g` containing `t`.
///
/// Instants outside years 1..=9999 are clamped into that range.
pub fn assign(t: Timestamp, g: Granularity) -> Period {
    let date = to_datetime(t).date_naive();
    let (start, end) = match g {
        Granularity::Day => (date, date + Duration::days(1)),
        Granularity::Week => {
            let monday = date - Duration::days(date.weekday().num_days_from_monday() as i64);
            (monday, monday + Duration::days(7))
        }
        Granularity::Month => {
            let start = first_of_month(date.year(), date.month());
            let end = if date.month() == 12 {
                first_of_month(date.year() + 1, 1)
            } else {
                first_of_month(date.year(), date.month() + 1)
            };
            (start, end)
        }
        Granularity::Year => (
            first_of_month(date.year(), 1),
            first_of_month(date.year() + 1, 1),
        ),
    };
    Period {
        start: date_start(start),
        end: date_start(end),
        granularity: g,
    }
}

/// All periods of granularity `g` intersecting `[start, end)`, in
/// chronological order. Periods that only partially overlap are included
/// whole. An empty window yields an empty list.
pub fn enumerate(start: Timestamp, end: Timestamp, g: Granularity) -> Vec<Period> {
    let mut out = Vec::new();
    if start >= end {
        return out;
    }
    let mut p = assign(start, g);
    while p.start < end {
        out.push(p);
        if p.end > MAX_TS {
            break;
        }
        p = p.next();
    }
    out
}

/// Parses `YYYY`, `YYYY-MM` or `YYYY-MM-DD` and returns the calendar span it
/// denotes as `[start, end)`.
pub fn parse_period_arg(arg: &str) -> Result<(Timestamp, Timestamp), TimelineError> {
    let bad = || TimelineError::BadPeriodArg(arg.to_string());
    let parts: Vec<&str> = arg.split('-').collect();
    let num = |s: &str, len: usize| -> Result<u32, TimelineError> {
        if s.len() != len || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        s.parse().map_err(|_| bad())
    };
    let (date, g) = match parts.as_slice() {
        [y] => (
            NaiveDate::from_ymd_opt(num(y, 4)? as i32, 1, 1),
            Granularity::Year,
        ),
        [y, m] => (
            NaiveDate::from_ymd_opt(num(y, 4)? as i32, num(m, 2)?, 1),
            Granularity::Month,
        ),
        [y, m, d] => (
            NaiveDate::from_ymd_opt(num(y, 4)? as i32, num(m, 2)?, num(d, 2)?),
            Granularity::Day,
        ),
        _ => return Err(bad()),
    };
    let p = assign(date_start(date.ok_or_else(bad)?), g);
    Ok((p.start, p.end))
}

/// Parses an ISO-8601 / RFC-3339 instant and converts it to UTC seconds,
/// truncating any fractional part. A bare `YYYY-MM-DDTHH:MM:SS` (or with a
/// space separator) is read as UTC.
pub fn parse_timestamp(s: &str) -> Option<Timestamp> {
    let t = if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        dt.timestamp()
    } else {
        NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f")
            .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f"))
            .ok()?
            .and_utc()
            .timestamp()
    };
    (MIN_TS..=MAX_TS).contains(&t).then_some(t)
}

/// Canonical `YYYY-MM-DDTHH:MM:SSZ` rendering.
pub fn format_timestamp(t: Timestamp) -> String {
    to_datetime(t).format("%Y-%m-%dT%H:%M:%SZ").to_string()
}
