// SPDX-License-Identifier: Apache-2.0

//! Domain types shared by every stage of an audit, plus the timestamp
//! normalization and UTC formatting helpers.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Sentinel committer identity used when the export carries no name.
pub const NO_NAME: &str = "(no name)";

/// Valid range for a recorded timezone offset, in minutes (±18h).
pub const TZ_OFFSET_RANGE: std::ops::RangeInclusive<i32> = -1080..=1080;

const SECS_PER_DAY: i64 = 86_400;

/// A commit instant in whole seconds since the Unix epoch (UTC).
///
/// The timezone offset is kept for reference only; comparisons use
/// `epoch_seconds` alone.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Timestamp {
    pub epoch_seconds: i64,
    pub tz_offset_minutes: i32,
}

impl Timestamp {
    pub const fn utc(epoch_seconds: i64) -> Self {
        Timestamp {
            epoch_seconds,
            tz_offset_minutes: 0,
        }
    }

    pub const fn with_offset(epoch_seconds: i64, tz_offset_minutes: i32) -> Self {
        Timestamp {
            epoch_seconds,
            tz_offset_minutes,
        }
    }
}

impl PartialEq for Timestamp {
    fn eq(&self, other: &Self) -> bool {
        self.epoch_seconds == other.epoch_seconds
    }
}

impl Eq for Timestamp {}

impl PartialOrd for Timestamp {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Timestamp {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.epoch_seconds.cmp(&other.epoch_seconds)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_utc(*self))
    }
}

/// Resolution of a raw integer timestamp as found in an export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TimeUnit {
    #[default]
    #[serde(rename = "s")]
    Seconds,
    #[serde(rename = "ms")]
    Milliseconds,
    #[serde(rename = "us")]
    Microseconds,
}

impl TimeUnit {
    pub const fn factor(self) -> i64 {
        match self {
            TimeUnit::Seconds => 1,
            TimeUnit::Milliseconds => 1_000,
            TimeUnit::Microseconds => 1_000_000,
        }
    }
}

/// Converts a raw integer in `unit` to whole seconds, flooring toward
/// negative infinity so sub-second negative values land on the earlier second.
pub fn normalize_timestamp(raw: i64, unit: TimeUnit, tz_offset_minutes: i32) -> Timestamp {
    Timestamp {
        epoch_seconds: raw.div_euclid(unit.factor()),
        tz_offset_minutes,
    }
}

/// Formats as `YYYY-MM-DD HH:MM:SS UTC` on the proleptic Gregorian calendar.
pub fn format_utc(ts: Timestamp) -> String {
    let days = ts.epoch_seconds.div_euclid(SECS_PER_DAY);
    let secs = ts.epoch_seconds.rem_euclid(SECS_PER_DAY);
    let (year, month, day) = civil_from_days(days);
    let year = if year < 0 {
        format!("-{:04}", -year)
    } else {
        format!("{year:04}")
    };
    format!(
        "{year}-{month:02}-{day:02} {:02}:{:02}:{:02} UTC",
        secs / 3600,
        (secs / 60) % 60,
        secs % 60
    )
}

/// Parses the output of [`format_utc`] back into a timestamp.
pub fn parse_utc(text: &str) -> Option<Timestamp> {
    let rest = text.strip_suffix(" UTC")?;
    let (date, time) = rest.split_once(' ')?;
    let (negative, date) = match date.strip_prefix('-') {
        Some(d) => (true, d),
        None => (false, date),
    };
    let mut dparts = date.splitn(3, '-');
    let year: i64 = dparts.next()?.parse().ok()?;
    let month: u32 = dparts.next()?.parse().ok()?;
    let day: u32 = dparts.next()?.parse().ok()?;
    let year = if negative { -year } else { year };
    let mut tparts = time.splitn(3, ':');
    let h: i64 = tparts.next()?.parse().ok()?;
    let m: i64 = tparts.next()?.parse().ok()?;
    let s: i64 = tparts.next()?.parse().ok()?;
    if !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month) {
        return None;
    }
    if !(0..24).contains(&h) || !(0..60).contains(&m) || !(0..60).contains(&s) {
        return None;
    }
    let days = days_from_civil(year, month, day);
    Some(Timestamp::utc(days * SECS_PER_DAY + h * 3600 + m * 60 + s))
}

/// Parses an ISO-8601 instant as accepted on the command line: a full
/// RFC 3339 timestamp, a naive `YYYY-MM-DDTHH:MM:SS` (taken as UTC), or a
/// bare `YYYY-MM-DD` (midnight UTC).
pub fn parse_iso8601(text: &str) -> Option<Timestamp> {
    use chrono::{DateTime, NaiveDate, NaiveDateTime};

    let text = text.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        let offset = dt.offset().local_minus_utc() / 60;
        return Some(Timestamp::with_offset(dt.timestamp(), offset));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(text, fmt) {
            return Some(Timestamp::utc(dt.and_utc().timestamp()));
        }
    }
    NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| Timestamp::utc(dt.and_utc().timestamp()))
}

fn is_leap(year: i64) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

fn days_in_month(year: i64, month: u32) -> u32 {
    match month {
        2 if is_leap(year) => 29,
        2 => 28,
        4 | 6 | 9 | 11 => 30,
        _ => 31,
    }
}

// Day-number <-> civil date conversions over 400-year eras.
fn civil_from_days(days: i64) -> (i64, u32, u32) {
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let month = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    let year = yoe + era * 400 + i64::from(month <= 2);
    (year, month, day)
}

fn days_from_civil(year: i64, month: u32, day: u32) -> i64 {
    let y = if month <= 2 { year - 1 } else { year };
    let era = y.div_euclid(400);
    let yoe = y.rem_euclid(400);
    let m = i64::from(month);
    let mp = if m > 2 { m - 3 } else { m + 9 };
    let doy = (153 * mp + 2) / 5 + i64::from(day) - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

/// Whether a forge marked the commit as signed by itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verified {
    True,
    False,
    #[default]
    Unknown,
}

impl From<Option<bool>> for Verified {
    fn from(v: Option<bool>) -> Self {
        match v {
            Some(true) => Verified::True,
            Some(false) => Verified::False,
            None => Verified::Unknown,
        }
    }
}

impl Verified {
    pub fn as_option(self) -> Option<bool> {
        match self {
            Verified::True => Some(true),
            Verified::False => Some(false),
            Verified::Unknown => None,
        }
    }
}

/// One commit as seen by the auditor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitRecord {
    pub hash: String,
    pub repo_id: String,
    pub parents: Vec<String>,
    pub author_date: Timestamp,
    pub committer_date: Timestamp,
    pub author_id: String,
    pub committer_id: String,
    pub message: String,
    pub verified: Verified,
    pub stars: Option<u64>,
}

/// Which of the two Git timestamps an analysis orders by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DateField {
    #[default]
    Committer,
    Author,
}

impl CommitRecord {
    pub fn date(&self, field: DateField) -> Timestamp {
        match field {
            DateField::Committer => self.committer_date,
            DateField::Author => self.author_date,
        }
    }
}

/// Maps empty, whitespace-only and sentinel identities onto [`NO_NAME`].
pub fn canonical_identity(id: &str) -> &str {
    let trimmed = id.trim();
    if trimmed.is_empty() || trimmed == NO_NAME {
        NO_NAME
    } else {
        trimmed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    Old,
    Future,
    OutOfOrderLinear,
    OutOfOrderParent,
    ToolSignature,
    VerifiedMismatch,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 6] = [
        AnomalyKind::Old,
        AnomalyKind::Future,
        AnomalyKind::OutOfOrderLinear,
        AnomalyKind::OutOfOrderParent,
        AnomalyKind::ToolSignature,
        AnomalyKind::VerifiedMismatch,
    ];

    pub fn is_out_of_order(self) -> bool {
        matches!(
            self,
            AnomalyKind::OutOfOrderLinear | AnomalyKind::OutOfOrderParent
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AnomalyKind::Old => "old",
            AnomalyKind::Future => "future",
            AnomalyKind::OutOfOrderLinear => "out_of_order_linear",
            AnomalyKind::OutOfOrderParent => "out_of_order_parent",
            AnomalyKind::ToolSignature => "tool_signature",
            AnomalyKind::VerifiedMismatch => "verified_mismatch",
        }
    }
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A flagged commit.
///
/// `delta_seconds` is set only for the out-of-order kinds and holds
/// `parent - child` (or `previous - current` for the linear walk).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Anomaly {
    pub repo_id: String,
    pub commit_hash: String,
    pub kind: AnomalyKind,
    pub evidence: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_seconds: Option<i64>,
}

impl Anomaly {
    pub fn new(kind: AnomalyKind, record: &CommitRecord, evidence: impl Into<String>) -> Self {
        Anomaly {
            repo_id: record.repo_id.clone(),
            commit_hash: record.hash.clone(),
            kind,
            evidence: evidence.into(),
            delta_seconds: None,
        }
    }

    pub fn with_delta(mut self, delta: i64) -> Self {
        self.delta_seconds = Some(delta);
        self
    }
}

/// Sorts anomalies into the canonical report order (repo, hash, kind, evidence).
pub fn sort_anomalies(anomalies: &mut [Anomaly]) {
    anomalies.sort();
}

/// Describes a mined dataset: its name, freeze instant and member repositories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    #[serde(with = "iso_timestamp")]
    pub snapshot_date: Timestamp,
    #[serde(default)]
    pub repos: Vec<String>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ManifestError {
    #[error("snapshot date must be after the epoch, got {0}")]
    SnapshotNotPositive(Timestamp),
    #[error("repository {0} listed more than once")]
    DuplicateRepo(String),
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<(), ManifestError> {
        if self.snapshot_date.epoch_seconds <= 0 {
            return Err(ManifestError::SnapshotNotPositive(self.snapshot_date));
        }
        let mut seen = std::collections::HashSet::new();
        for repo in &self.repos {
            if !seen.insert(repo) {
                return Err(ManifestError::DuplicateRepo(repo.clone()));
            }
        }
        Ok(())
    }
}

/// Serde adapter storing a [`Timestamp`] as an ISO-8601 string, accepting
/// plain integers (epoch seconds) on input.
pub mod iso_timestamp {
    use super::{parse_iso8601, Timestamp};
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &Timestamp, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_rfc3339(*ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Timestamp, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(secs) => Ok(Timestamp::utc(secs)),
            Raw::Text(t) => parse_iso8601(&t)
                .ok_or_else(|| de::Error::custom(format!("invalid ISO-8601 instant `{t}`"))),
        }
    }

    /// `YYYY-MM-DDTHH:MM:SSZ`, derived from the UTC formatter.
    pub fn to_rfc3339(ts: Timestamp) -> String {
        let s = super::format_utc(ts);
        let body = s.trim_end_matches(" UTC");
        format!("{}Z", body.replacen(' ', "T", 1))
    }
}
