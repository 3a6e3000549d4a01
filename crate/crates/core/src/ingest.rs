// SPDX-License-Identifier: Apache-2.0

//! Reading commit exports, dropping duplicate hashes, and rebuilding
//! changesets from per-file histories.
//!
//! Two input formats are supported:
//!
//! * `ndjson`: one JSON object per line (see [`NdjsonRecord`]).
//! * `gitlog`: the output of
//!   `git log --format='%H%x1f%P%x1f%ct%x1f%cI%x1f%at%x1f%aI%x1f%cn%x1f%an%x1f%B%x00'`,
//!   i.e. eight 0x1F-separated header fields followed by the raw message,
//!   each record terminated by a NUL byte. The instant comes from the epoch
//!   fields; `%cI` / `%aI` only supply the offset, and bare `+HHMM` or
//!   `+HH:MM` offsets are accepted in their place.

use std::collections::{HashMap, HashSet};
use std::io::{self, BufRead, Read};

use serde::{Deserialize, Serialize};

use crate::model::{
    normalize_timestamp, CommitRecord, TimeUnit, Timestamp, Verified, NO_NAME, TZ_OFFSET_RANGE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    #[default]
    Ndjson,
    Gitlog,
}

impl std::str::FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ndjson" => Ok(InputFormat::Ndjson),
            "gitlog" => Ok(InputFormat::Gitlog),
            other => Err(format!("unknown input format `{other}`")),
        }
    }
}

/// The wire shape of one NDJSON line. Also used for stub metadata documents
/// and for the sanitized output of the filter command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NdjsonRecord {
    pub hash: String,
    pub repo: String,
    pub parents: Vec<String>,
    pub author_date: i64,
    pub committer_date: i64,
    #[serde(default)]
    pub date_unit: TimeUnit,
    pub author: String,
    pub committer: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verified: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stars: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tz_offset_min: Option<i32>,
}

impl NdjsonRecord {
    /// Canonical (seconds-resolution) wire form of a record.
    pub fn from_record(r: &CommitRecord) -> Self {
        let tz = r.committer_date.tz_offset_minutes;
        NdjsonRecord {
            hash: r.hash.clone(),
            repo: r.repo_id.clone(),
            parents: r.parents.clone(),
            author_date: r.author_date.epoch_seconds,
            committer_date: r.committer_date.epoch_seconds,
            date_unit: TimeUnit::Seconds,
            author: r.author_id.clone(),
            committer: r.committer_id.clone(),
            message: r.message.clone(),
            verified: r.verified.as_option(),
            stars: r.stars,
            tz_offset_min: (tz != 0).then_some(tz),
        }
    }

    pub fn into_record(self) -> Result<CommitRecord, String> {
        let tz = self.tz_offset_min.unwrap_or(0);
        if !TZ_OFFSET_RANGE.contains(&tz) {
            return Err(format!("tz_offset_min {tz} outside ±1080"));
        }
        let hash = canonical_hash(&self.hash)?;
        if self.repo.trim().is_empty() {
            return Err("empty repo".into());
        }
        let parents = canonical_parents(&hash, &self.parents)?;
        Ok(CommitRecord {
            hash,
            repo_id: self.repo,
            parents,
            author_date: normalize_timestamp(self.author_date, self.date_unit, tz),
            committer_date: normalize_timestamp(self.committer_date, self.date_unit, tz),
            author_id: self.author,
            committer_id: committer_or_sentinel(self.committer),
            message: self.message,
            verified: Verified::from(self.verified),
            stars: self.stars,
        })
    }
}

/// A record that could not be parsed. Line numbers are 1-based; for the
/// `gitlog` format they count NUL-terminated records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("record {line_number}: {reason}")]
pub struct MalformedRecord {
    pub line_number: usize,
    pub reason: String,
}

#[derive(Debug, Default, Clone)]
pub struct ParseOutcome {
    pub records: Vec<CommitRecord>,
    pub errors: Vec<MalformedRecord>,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Repository id assigned to `gitlog` records (that format has no repo field).
    pub repo_id: Option<String>,
}

pub const DEFAULT_GITLOG_REPO: &str = "local";

/// Parses a commit export. Malformed records are skipped and reported in
/// [`ParseOutcome::errors`]; only I/O failures abort the stream.
pub fn parse_commit_stream<R: Read>(
    input: R,
    format: InputFormat,
    opts: &ParseOptions,
) -> io::Result<ParseOutcome> {
    match format {
        InputFormat::Ndjson => parse_ndjson(io::BufReader::new(input)),
        InputFormat::Gitlog => parse_gitlog(io::BufReader::new(input), opts),
    }
}

fn parse_ndjson<R: BufRead>(mut input: R) -> io::Result<ParseOutcome> {
    let mut out = ParseOutcome::default();
    let mut buf = Vec::new();
    let mut line_number = 0;
    loop {
        buf.clear();
        if input.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_number += 1;
        let line = match std::str::from_utf8(&buf) {
            Ok(l) => l.trim(),
            Err(e) => {
                out.errors.push(MalformedRecord {
                    line_number,
                    reason: format!("invalid UTF-8: {e}"),
                });
                continue;
            }
        };
        if line.is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<NdjsonRecord>(line)
            .map_err(|e| e.to_string())
            .and_then(NdjsonRecord::into_record);
        match parsed {
            Ok(r) => out.records.push(r),
            Err(reason) => out.errors.push(MalformedRecord {
                line_number,
                reason,
            }),
        }
    }
    Ok(out)
}

fn parse_gitlog<R: BufRead>(mut input: R, opts: &ParseOptions) -> io::Result<ParseOutcome> {
    let repo = opts
        .repo_id
        .clone()
        .unwrap_or_else(|| DEFAULT_GITLOG_REPO.to_string());
    let mut out = ParseOutcome::default();
    let mut buf = Vec::new();
    let mut record_number = 0;
    loop {
        buf.clear();
        if input.read_until(0, &mut buf)? == 0 {
            break;
        }
        if buf.last() == Some(&0) {
            buf.pop();
        }
        // git separates formatted records with a newline after the NUL.
        let start = buf.iter().position(|b| !b"\r\n".contains(b)).unwrap_or(buf.len());
        let raw = &buf[start..];
        if raw.is_empty() {
            continue;
        }
        record_number += 1;
        match parse_gitlog_record(raw, &repo) {
            Ok(r) => out.records.push(r),
            Err(reason) => out.errors.push(MalformedRecord {
                line_number: record_number,
                reason,
            }),
        }
    }
    Ok(out)
}

fn parse_gitlog_record(raw: &[u8], repo: &str) -> Result<CommitRecord, String> {
    let text = std::str::from_utf8(raw).map_err(|e| format!("invalid UTF-8: {e}"))?;
    let fields: Vec<&str> = text.splitn(9, '\x1f').collect();
    if fields.len() != 9 {
        return Err(format!("expected 9 fields, found {}", fields.len()));
    }
    let hash = canonical_hash(fields[0])?;
    let parents: Vec<String> = fields[1].split_whitespace().map(str::to_owned).collect();
    let parents = canonical_parents(&hash, &parents)?;
    let committer_epoch: i64 = parse_int(fields[2], "committer epoch")?;
    let committer_tz = parse_git_tz(fields[3])?;
    let author_epoch: i64 = parse_int(fields[4], "author epoch")?;
    let author_tz = parse_git_tz(fields[5])?;
    Ok(CommitRecord {
        hash,
        repo_id: repo.to_owned(),
        parents,
        author_date: Timestamp::with_offset(author_epoch, author_tz),
        committer_date: Timestamp::with_offset(committer_epoch, committer_tz),
        author_id: fields[7].to_owned(),
        committer_id: committer_or_sentinel(fields[6].to_owned()),
        message: fields[8].trim_end_matches('\n').to_owned(),
        verified: Verified::Unknown,
        stars: None,
    })
}

fn parse_int(s: &str, what: &str) -> Result<i64, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("{what} `{s}` is not an integer"))
}

/// Offset in minutes from `+0130`, `-05:00`, or the tail of a strict ISO
/// date such as `2020-01-02T00:00:00+02:00` (what `%cI` prints).
fn parse_git_tz(s: &str) -> Result<i32, String> {
    let s = s.trim();
    let bad = || format!("timezone `{s}` is not an offset like +HHMM or an ISO 8601 date");
    let mut tail = s;
    if s.contains('T') {
        if s.ends_with('Z') {
            return Ok(0);
        }
        tail = s.get(s.len().saturating_sub(6)..).ok_or_else(bad)?;
    }
    let compact = match tail.len() {
        6 if tail.as_bytes()[3] == b':' => format!("{}{}", &tail[..3], &tail[4..]),
        _ => tail.to_owned(),
    };
    let (sign, digits) = match compact.as_bytes().first() {
        Some(b'+') => (1, &compact[1..]),
        Some(b'-') => (-1, &compact[1..]),
        _ => return Err(bad()),
    };
    if digits.len() != 4 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let hours: i32 = digits[..2].parse().map_err(|_| bad())?;
    let minutes: i32 = digits[2..].parse().map_err(|_| bad())?;
    let total = sign * (hours * 60 + minutes);
    if minutes >= 60 || !TZ_OFFSET_RANGE.contains(&total) {
        return Err(bad());
    }
    Ok(total)
}

fn committer_or_sentinel(id: String) -> String {
    if id.trim().is_empty() {
        NO_NAME.to_owned()
    } else {
        id
    }
}

/// Accepts a 40-hex Git object id (lowercased on output) or a mangled
/// Subversion revision `r<N>@<repo>`.
pub fn canonical_hash(hash: &str) -> Result<String, String> {
    if hash.len() == 40 && hash.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Ok(hash.to_ascii_lowercase());
    }
    if let Some(rest) = hash.strip_prefix('r') {
        if let Some((rev, repo)) = rest.split_once('@') {
            if !rev.is_empty() && rev.bytes().all(|b| b.is_ascii_digit()) && !repo.is_empty() {
                return Ok(hash.to_owned());
            }
        }
    }
    Err(format!(
        "hash `{hash}` is neither 40 hex characters nor r<N>@<repo>"
    ))
}

fn canonical_parents(hash: &str, parents: &[String]) -> Result<Vec<String>, String> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(parents.len());
    for p in parents {
        let p = canonical_hash(p).map_err(|e| format!("parent: {e}"))?;
        if p == hash {
            return Err("commit lists itself as a parent".into());
        }
        if !seen.insert(p.clone()) {
            return Err(format!("parent {p} listed twice"));
        }
        out.push(p);
    }
    Ok(out)
}

/// Two records shared a hash but disagreed on the committer date.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("duplicate hash {hash} with differing committer dates ({kept} kept, {dropped} dropped)")]
pub struct DuplicateHashConflict {
    pub hash: String,
    pub kept: i64,
    pub dropped: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupReport {
    pub total_in: usize,
    pub unique_out: usize,
    /// `(hash, occurrence_count)` for every hash seen more than once, in
    /// order of first appearance.
    pub duplicate_hashes: Vec<(String, usize)>,
    pub conflicts: Vec<DuplicateHashConflict>,
}

impl DedupReport {
    pub fn dropped(&self) -> usize {
        self.duplicate_hashes.iter().map(|(_, n)| n - 1).sum()
    }
}

/// Keeps the first record for each hash, preserving input order.
pub fn deduplicate(records: Vec<CommitRecord>) -> (Vec<CommitRecord>, DedupReport) {
    let total_in = records.len();
    let mut first_seen: HashMap<String, (usize, i64)> = HashMap::new();
    let mut counts: Vec<(String, usize)> = Vec::new();
    let mut conflicts = Vec::new();
    let mut unique = Vec::with_capacity(records.len());

    for r in records {
        match first_seen.get(&r.hash) {
            Some(&(slot, kept)) => {
                counts[slot].1 += 1;
                if kept != r.committer_date.epoch_seconds {
                    conflicts.push(DuplicateHashConflict {
                        hash: r.hash.clone(),
                        kept,
                        dropped: r.committer_date.epoch_seconds,
                    });
                }
            }
            None => {
                first_seen.insert(r.hash.clone(), (counts.len(), r.committer_date.epoch_seconds));
                counts.push((r.hash.clone(), 1));
                unique.push(r);
            }
        }
    }

    let report = DedupReport {
        total_in,
        unique_out: unique.len(),
        duplicate_hashes: counts.into_iter().filter(|(_, n)| *n > 1).collect(),
        conflicts,
    };
    (unique, report)
}

/// One file-level change from a per-file version control system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChange {
    pub repo_id: String,
    pub path: String,
    pub author_id: String,
    pub timestamp: Timestamp,
    pub log: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Changeset {
    pub repo_id: String,
    pub author_id: String,
    pub changes: Vec<FileChange>,
    pub start: Timestamp,
    pub end: Timestamp,
}

/// Default coalescence window: three minutes.
pub const DEFAULT_COALESCE_WINDOW: i64 = 180;

/// Groups same-author changes into changesets. A change joins the author's
/// open changeset when it lands within `window_seconds` of that changeset's
/// latest change; otherwise it opens a new one.
pub fn coalesce_changesets(mut changes: Vec<FileChange>, window_seconds: i64) -> Vec<Changeset> {
    changes.sort_by(|a, b| {
        a.author_id
            .cmp(&b.author_id)
            .then(a.timestamp.epoch_seconds.cmp(&b.timestamp.epoch_seconds))
    });

    let mut out: Vec<Changeset> = Vec::new();
    for change in changes {
        let joins = out.last().is_some_and(|cs| {
            cs.author_id == change.author_id
                && change.timestamp.epoch_seconds - cs.end.epoch_seconds <= window_seconds
        });
        if joins {
            let cs = out.last_mut().expect("checked above");
            cs.end = change.timestamp;
            cs.changes.push(change);
        } else {
            out.push(Changeset {
                repo_id: change.repo_id.clone(),
                author_id: change.author_id.clone(),
                start: change.timestamp,
                end: change.timestamp,
                changes: vec![change],
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn hex(c: char) -> String {
        std::iter::repeat_n(c, 40).collect()
    }

    fn ndjson_line(hash: &str, parents: &[&str], committer: i64) -> String {
        serde_json::json!({
            "hash": hash, "repo": "o/r", "parents": parents,
            "author_date": committer, "committer_date": committer,
            "author": "a", "committer": "c", "message": "m"
        })
        .to_string()
    }

    fn parse(text: &str) -> ParseOutcome {
        parse_commit_stream(text.as_bytes(), InputFormat::Ndjson, &ParseOptions::default()).unwrap()
    }

    #[test]
    fn single_ndjson_record() {
        let out = parse(&ndjson_line(&hex('a'), &[], 100));
        assert!(out.errors.is_empty());
        assert_eq!(out.records.len(), 1);
        let r = &out.records[0];
        assert_eq!(r.committer_date.epoch_seconds, 100);
        assert_eq!(r.verified, Verified::Unknown);
        assert_eq!(r.stars, None);
    }

    #[test]
    fn short_hash_is_malformed_and_stream_continues() {
        let short: String = hex('a')[..39].to_string();
        let text = format!(
            "{}\n{}\n",
            ndjson_line(&short, &[], 1),
            ndjson_line(&hex('b'), &[], 2)
        );
        let out = parse(&text);
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.errors.len(), 1);
        assert_eq!(out.errors[0].line_number, 1);
    }

    #[test]
    fn duplicates_survive_parsing() {
        let text = [
            ndjson_line(&hex('a'), &[], 1),
            ndjson_line(&hex('b'), &[], 2),
            ndjson_line(&hex('a'), &[], 1),
        ]
        .join("\n");
        assert_eq!(parse(&text).records.len(), 3);
    }

    #[test]
    fn units_offsets_and_optional_fields() {
        let line = serde_json::json!({
            "hash": hex('A'), "repo": "o/r", "parents": [hex('b')],
            "author_date": -2_044_178_335_000_000i64, "committer_date": 1_000_000_000_000i64,
            "date_unit": "us", "author": "a", "committer": "  ", "message": "m",
            "verified": true, "stars": 12, "tz_offset_min": -300
        })
        .to_string();
        let out = parse(&line);
        let r = &out.records[0];
        assert_eq!(r.hash, hex('a'));
        assert_eq!(r.author_date.epoch_seconds, -2_044_178_335);
        assert_eq!(r.committer_date.epoch_seconds, 1_000_000);
        assert_eq!(r.committer_date.tz_offset_minutes, -300);
        assert_eq!(r.committer_id, NO_NAME);
        assert_eq!(r.verified, Verified::True);
        assert_eq!(r.stars, Some(12));
    }

    #[test]
    fn rejects_bad_parents_and_offsets() {
        let self_parent = ndjson_line(&hex('a'), &[&hex('a')], 1);
        let dup_parent = ndjson_line(&hex('a'), &[&hex('b'), &hex('b')], 1);
        let bad_tz = serde_json::json!({
            "hash": hex('c'), "repo": "o/r", "parents": [], "author_date": 1,
            "committer_date": 1, "author": "a", "committer": "c", "message": "",
            "tz_offset_min": 2000
        })
        .to_string();
        let out = parse(&[self_parent, dup_parent, bad_tz, "{not json".into()].join("\n"));
        assert!(out.records.is_empty());
        assert_eq!(out.errors.len(), 4);
    }

    #[test]
    fn svn_revision_ids() {
        assert_eq!(canonical_hash("r42@proj").unwrap(), "r42@proj");
        assert!(canonical_hash("r@proj").is_err());
        assert!(canonical_hash("r42@").is_err());
    }

    #[test]
    fn gitlog_records() {
        let a = hex('a');
        let b = hex('b');
        let text = format!(
            "{a}\x1f\x1f100\x1f+0100\x1f90\x1f-0030\x1fCarol\x1fAlice\x1finitial\n\nbody\n\0\n\
             {b}\x1f{a}\x1f200\x1f+0000\x1f200\x1f+0000\x1f\x1fBob\x1fsecond\n\0\n"
        );
        let opts = ParseOptions {
            repo_id: Some("me/proj".into()),
        };
        let out = parse_commit_stream(text.as_bytes(), InputFormat::Gitlog, &opts).unwrap();
        assert!(out.errors.is_empty(), "{:?}", out.errors);
        assert_eq!(out.records.len(), 2);
        let first = &out.records[0];
        assert_eq!(first.repo_id, "me/proj");
        assert_eq!(first.committer_date, Timestamp::utc(100));
        assert_eq!(first.committer_date.tz_offset_minutes, 60);
        assert_eq!(first.author_date.tz_offset_minutes, -30);
        assert_eq!(first.committer_id, "Carol");
        assert_eq!(first.author_id, "Alice");
        assert_eq!(first.message, "initial\n\nbody");
        assert_eq!(out.records[1].parents, vec![a]);
        assert_eq!(out.records[1].committer_id, NO_NAME);
    }

    #[test]
    fn gitlog_malformed_record_is_skipped() {
        let text = format!("{}\x1f\x1fnope\0{}\x1f\x1f1\x1f+0000\x1f1\x1f+0000\x1fc\x1fa\x1fm\0", hex('a'), hex('b'));
        let out = parse_commit_stream(text.as_bytes(), InputFormat::Gitlog, &ParseOptions::default()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].repo_id, DEFAULT_GITLOG_REPO);
        assert_eq!(out.errors[0].line_number, 1);
    }

    #[test]
    fn git_tz_parsing() {
        assert_eq!(parse_git_tz("+0530"), Ok(330));
        assert_eq!(parse_git_tz("-1200"), Ok(-720));
        assert!(parse_git_tz("0530").is_err());
        assert!(parse_git_tz("+0560").is_err());
        assert!(parse_git_tz("+1900").is_err());
        assert_eq!(parse_git_tz("+05:30"), Ok(330));
        assert_eq!(parse_git_tz("2020-01-02T00:00:00-03:00"), Ok(-180));
        assert_eq!(parse_git_tz("2020-01-02T00:00:00Z"), Ok(0));
        assert!(parse_git_tz("2020-01-02T00:00:00").is_err());
    }

    fn rec(c: char, date: i64) -> CommitRecord {
        CommitRecord {
            hash: hex(c),
            repo_id: "o/r".into(),
            parents: vec![],
            author_date: Timestamp::utc(date),
            committer_date: Timestamp::utc(date),
            author_id: "a".into(),
            committer_id: "c".into(),
            message: String::new(),
            verified: Verified::Unknown,
            stars: None,
        }
    }

    #[test]
    fn dedup_keeps_first() {
        let (out, report) = deduplicate(vec![rec('a', 1), rec('b', 2), rec('a', 1)]);
        assert_eq!(out, vec![rec('a', 1), rec('b', 2)]);
        assert_eq!(report.total_in, 3);
        assert_eq!(report.unique_out, 2);
        assert_eq!(report.duplicate_hashes, vec![(hex('a'), 2)]);
        assert!(report.conflicts.is_empty());
    }

    #[test]
    fn dedup_identity_on_unique() {
        let input = vec![rec('a', 1), rec('b', 2)];
        let (out, report) = deduplicate(input.clone());
        assert_eq!(out, input);
        assert!(report.duplicate_hashes.is_empty());
    }

    #[test]
    fn dedup_ten_with_four_copies() {
        let mut input: Vec<_> = "bcdefg".chars().map(|c| rec(c, 1)).collect();
        input.extend(std::iter::repeat_n(rec('a', 5), 4));
        assert_eq!(input.len(), 10);
        // Oracle: distinct hashes counted with a set.
        let expected: HashSet<_> = input.iter().map(|r| r.hash.clone()).collect();
        let (_, report) = deduplicate(input);
        assert_eq!(report.unique_out, expected.len());
        assert_eq!(report.unique_out, 7);
        assert_eq!(report.total_in, report.unique_out + report.dropped());
    }

    #[test]
    fn dedup_reports_conflicts() {
        let (out, report) = deduplicate(vec![rec('a', 1), rec('a', 9)]);
        assert_eq!(out[0].committer_date.epoch_seconds, 1);
        assert_eq!(
            report.conflicts,
            vec![DuplicateHashConflict {
                hash: hex('a'),
                kept: 1,
                dropped: 9
            }]
        );
    }

    fn change(author: &str, ts: i64) -> FileChange {
        FileChange {
            repo_id: "cvs/proj".into(),
            path: format!("f{ts}.c"),
            author_id: author.into(),
            timestamp: Timestamp::utc(ts),
            log: String::new(),
        }
    }

    // Independent grouping oracle: split each author's sorted timestamps
    // wherever consecutive gaps exceed the window.
    fn group_oracle(changes: &[FileChange], window: i64) -> Vec<Vec<i64>> {
        let mut by_author: std::collections::BTreeMap<&str, Vec<i64>> = Default::default();
        for c in changes {
            by_author.entry(&c.author_id).or_default().push(c.timestamp.epoch_seconds);
        }
        let mut groups = Vec::new();
        for (_, mut ts) in by_author {
            ts.sort();
            let mut cur = vec![ts[0]];
            for w in ts.windows(2) {
                if w[1] - w[0] > window {
                    groups.push(std::mem::take(&mut cur));
                }
                cur.push(w[1]);
            }
            groups.push(cur);
        }
        groups
    }

    fn stamps(sets: &[Changeset]) -> Vec<Vec<i64>> {
        sets.iter()
            .map(|cs| cs.changes.iter().map(|c| c.timestamp.epoch_seconds).collect())
            .collect()
    }

    #[test]
    fn coalesce_examples() {
        let input = vec![change("u", 0), change("u", 100), change("u", 200)];
        let sets = coalesce_changesets(input.clone(), DEFAULT_COALESCE_WINDOW);
        assert_eq!(sets.len(), 1);
        assert_eq!(stamps(&sets), group_oracle(&input, 180));
        assert_eq!(sets[0].start, Timestamp::utc(0));
        assert_eq!(sets[0].end, Timestamp::utc(200));

        assert_eq!(coalesce_changesets(vec![change("u", 0), change("u", 181)], 180).len(), 2);
        assert_eq!(coalesce_changesets(vec![change("u", 0), change("u", 180)], 180).len(), 1);
        assert_eq!(coalesce_changesets(vec![change("u", 5), change("v", 5)], 180).len(), 2);
    }

    #[test]
    fn zero_window_merges_only_equal_times() {
        let sets = coalesce_changesets(vec![change("u", 5), change("u", 5), change("u", 6)], 0);
        assert_eq!(stamps(&sets), vec![vec![5, 5], vec![6]]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_changes() -> impl Strategy<Value = Vec<FileChange>> {
            prop::collection::vec((0..3u8, 0i64..2_000), 1..40).prop_map(|v| {
                v.into_iter()
                    .map(|(a, t)| change(&format!("dev{a}"), t))
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn coalesce_partitions_and_matches_oracle(changes in arb_changes(), window in 0i64..400) {
                let sets = coalesce_changesets(changes.clone(), window);
                let total: usize = sets.iter().map(|s| s.changes.len()).sum();
                prop_assert_eq!(total, changes.len());
                for s in &sets {
                    prop_assert!(s.changes.iter().all(|c| c.author_id == s.author_id));
                    prop_assert!(s.changes.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
                }
                prop_assert_eq!(stamps(&sets), group_oracle(&changes, window));
            }

            #[test]
            fn dedup_idempotent(picks in prop::collection::vec(0usize..6, 0..30)) {
                let pool: Vec<CommitRecord> = "abcdef".chars().enumerate().map(|(i, c)| rec(c, i as i64)).collect();
                let input: Vec<_> = picks.iter().map(|&i| pool[i].clone()).collect();
                let (once, report) = deduplicate(input);
                prop_assert_eq!(report.total_in, report.unique_out + report.dropped());
                let (twice, second) = deduplicate(once.clone());
                prop_assert_eq!(once, twice);
                prop_assert!(second.duplicate_hashes.is_empty());
            }
        }
    }
}
