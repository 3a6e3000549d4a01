// SPDX-License-Identifier: Apache-2.0

//! Timestamp anomaly detectors.
//!
//! The old/future/linear detectors mirror a single pass over a
//! topologically ordered history: a commit is *old* when dated strictly
//! before the old cutoff, *future* when dated strictly after the dataset
//! snapshot, and *linearly out of order* when strictly older than the commit
//! visited just before it (skipped when either message mentions "merge").
//! The parent detector checks real parent edges instead of the linearization.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::graph::CommitGraph;
use crate::model::{format_utc, Anomaly, AnomalyKind, CommitRecord, DateField, Timestamp, Verified};

/// 1990-11-19T00:00:00Z, the release of CVS 1.0.
pub const DEFAULT_OLD_CUTOFF: Timestamp = Timestamp::utc(658_972_800);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DetectError {
    #[error("the future detector needs a dataset snapshot date")]
    MissingSnapshotDate,
    #[error("old cutoff {old} must be before future cutoff {future}")]
    InvalidCutoffs { old: Timestamp, future: Timestamp },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorConfig {
    #[serde(with = "crate::model::iso_timestamp")]
    pub old_cutoff: Timestamp,
    #[serde(default, with = "opt_iso")]
    pub future_cutoff: Option<Timestamp>,
    pub exclude_merges: bool,
    pub date_field: DateField,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            old_cutoff: DEFAULT_OLD_CUTOFF,
            future_cutoff: None,
            exclude_merges: true,
            date_field: DateField::Committer,
        }
    }
}

impl DetectorConfig {
    pub fn with_snapshot(snapshot: Timestamp) -> Self {
        DetectorConfig {
            future_cutoff: Some(snapshot),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), DetectError> {
        match self.future_cutoff {
            Some(future) if self.old_cutoff >= future => Err(DetectError::InvalidCutoffs {
                old: self.old_cutoff,
                future,
            }),
            _ => Ok(()),
        }
    }
}

mod opt_iso {
    use crate::model::{iso_timestamp, Timestamp};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &Option<Timestamp>, s: S) -> Result<S::Ok, S::Error> {
        match ts {
            Some(t) => s.serialize_some(&iso_timestamp::to_rfc3339(*t)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Timestamp>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "iso_timestamp")] Timestamp);
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

fn field_name(field: DateField) -> &'static str {
    match field {
        DateField::Committer => "committer",
        DateField::Author => "author",
    }
}

fn short(hash: &str) -> &str {
    &hash[..hash.len().min(12)]
}

pub fn detect_old<'a>(
    records: impl IntoIterator<Item = &'a CommitRecord>,
    cfg: &DetectorConfig,
) -> Vec<Anomaly> {
    records
        .into_iter()
        .filter(|r| r.date(cfg.date_field) < cfg.old_cutoff)
        .map(|r| {
            Anomaly::new(
                AnomalyKind::Old,
                r,
                format!(
                    "{} date {} is before {}",
                    field_name(cfg.date_field),
                    format_utc(r.date(cfg.date_field)),
                    format_utc(cfg.old_cutoff)
                ),
            )
        })
        .collect()
}

pub fn detect_future<'a>(
    records: impl IntoIterator<Item = &'a CommitRecord>,
    cfg: &DetectorConfig,
) -> Result<Vec<Anomaly>, DetectError> {
    let cutoff = cfg.future_cutoff.ok_or(DetectError::MissingSnapshotDate)?;
    Ok(records
        .into_iter()
        .filter(|r| r.date(cfg.date_field) > cutoff)
        .map(|r| {
            Anomaly::new(
                AnomalyKind::Future,
                r,
                format!(
                    "{} date {} is after the snapshot {}",
                    field_name(cfg.date_field),
                    format_utc(r.date(cfg.date_field)),
                    format_utc(cutoff)
                ),
            )
        })
        .collect())
}

/// Substring match on the lowercased message, exactly as the original
/// query did. "submerged" therefore counts as a merge.
pub fn is_merge_message(message: &str) -> bool {
    message.to_lowercase().contains("merge")
}

fn merge_excluded(cfg: &DetectorConfig, a: &CommitRecord, b: &CommitRecord) -> bool {
    cfg.exclude_merges && (is_merge_message(&a.message) || is_merge_message(&b.message))
}

/// Walks `ordered` (a topological order of one repository) comparing each
/// commit with the one visited before it.
pub fn detect_out_of_order_linear<'a>(
    ordered: impl IntoIterator<Item = &'a CommitRecord>,
    cfg: &DetectorConfig,
) -> Vec<Anomaly> {
    let mut out = Vec::new();
    let mut previous: Option<&CommitRecord> = None;
    for r in ordered {
        if let Some(prev) = previous {
            let (cur_date, prev_date) = (r.date(cfg.date_field), prev.date(cfg.date_field));
            if cur_date < prev_date && !merge_excluded(cfg, r, prev) {
                let delta = prev_date.epoch_seconds - cur_date.epoch_seconds;
                out.push(
                    Anomaly::new(
                        AnomalyKind::OutOfOrderLinear,
                        r,
                        format!(
                            "{} date {} is older than preceding commit {} ({})",
                            field_name(cfg.date_field),
                            format_utc(cur_date),
                            short(&prev.hash),
                            format_utc(prev_date)
                        ),
                    )
                    .with_delta(delta),
                );
            }
        }
        previous = Some(r);
    }
    out
}

/// Builds the anomaly for a child given its dates and the newest offending
/// parent. Shared with the verification step so both routes report alike.
pub(crate) fn out_of_order_parent_anomaly(
    child: &CommitRecord,
    child_date: Timestamp,
    parent_hash: &str,
    parent_date: Timestamp,
    field: DateField,
) -> Anomaly {
    let delta = parent_date.epoch_seconds - child_date.epoch_seconds;
    Anomaly::new(
        AnomalyKind::OutOfOrderParent,
        child,
        format!(
            "parent {} {} date {} is {}s newer than the commit",
            short(parent_hash),
            field_name(field),
            format_utc(parent_date),
            delta
        ),
    )
    .with_delta(delta)
}

/// One anomaly per child having at least one strictly newer parent; the
/// reported delta is the largest over its offending parents.
pub fn detect_out_of_order_parents(graph: &CommitGraph, cfg: &DetectorConfig) -> Vec<Anomaly> {
    let mut out = Vec::new();
    for (hash, parents) in &graph.edges {
        let child = &graph.nodes[hash];
        let child_date = child.date(cfg.date_field);
        let worst = parents
            .iter()
            .map(|p| &graph.nodes[p])
            .filter(|p| p.date(cfg.date_field) > child_date && !merge_excluded(cfg, child, p))
            .max_by(|a, b| {
                a.date(cfg.date_field)
                    .cmp(&b.date(cfg.date_field))
                    .then_with(|| b.hash.cmp(&a.hash))
            });
        if let Some(parent) = worst {
            out.push(out_of_order_parent_anomaly(
                child,
                child_date,
                &parent.hash,
                parent.date(cfg.date_field),
                cfg.date_field,
            ));
        }
    }
    out
}

/// Message markers left behind by migration, review and mirroring tools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ToolSignature {
    GitSvnId,
    ChangeId,
    ReviewedBy,
    RebaseSource,
    Hg,
    Moe,
}

impl ToolSignature {
    pub const ALL: [ToolSignature; 6] = [
        ToolSignature::GitSvnId,
        ToolSignature::ChangeId,
        ToolSignature::ReviewedBy,
        ToolSignature::RebaseSource,
        ToolSignature::Hg,
        ToolSignature::Moe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ToolSignature::GitSvnId => "git-svn-id",
            ToolSignature::ChangeId => "Change-Id",
            ToolSignature::ReviewedBy => "Reviewed-by",
            ToolSignature::RebaseSource => "rebase_source",
            ToolSignature::Hg => "hg",
            ToolSignature::Moe => "MOE",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn matches(self, message: &str) -> bool {
        // Word boundaries are ASCII letters/digits only, so `MOE_MIGRATED_REVID`
        // and `hg-git` match while `highway` does not.
        static HG: LazyLock<Regex> =
            LazyLock::new(|| Regex::new(r"(?i)(?:^|[^a-z0-9])hg(?:$|[^a-z0-9])").unwrap());
        static MOE: LazyLock<Regex> =
            LazyLock::new(|| Regex::new(r"(?i)(?:^|[^a-z0-9])moe(?:$|[^a-z0-9])").unwrap());
        match self {
            ToolSignature::GitSvnId => message.contains("git-svn-id:"),
            ToolSignature::ChangeId => message.contains("Change-Id:"),
            ToolSignature::ReviewedBy => message.contains("Reviewed-by:"),
            ToolSignature::RebaseSource => message.contains("rebase_source:"),
            ToolSignature::Hg => HG.is_match(message),
            ToolSignature::Moe => MOE.is_match(message),
        }
    }
}

pub fn find_signatures(message: &str) -> Vec<ToolSignature> {
    ToolSignature::ALL
        .into_iter()
        .filter(|s| s.matches(message))
        .collect()
}

/// One anomaly per (record, signature) match; the evidence is the
/// signature's name.
pub fn detect_tool_signatures<'a>(
    records: impl IntoIterator<Item = &'a CommitRecord>,
) -> Vec<Anomaly> {
    records
        .into_iter()
        .flat_map(|r| {
            find_signatures(&r.message)
                .into_iter()
                .map(move |s| Anomaly::new(AnomalyKind::ToolSignature, r, s.name()))
        })
        .collect()
}

/// Flags edges where a forge-signed child is older than an unsigned parent:
/// the forge clock and the author's clock disagree.
pub fn detect_verified_mismatch(graph: &CommitGraph, field: DateField) -> Vec<Anomaly> {
    graph
        .edge_pairs()
        .filter(|(c, p)| {
            c.verified == Verified::True
                && p.verified == Verified::False
                && p.date(field) > c.date(field)
        })
        .map(|(c, p)| {
            Anomaly::new(
                AnomalyKind::VerifiedMismatch,
                c,
                format!(
                    "verified commit at {} is older than unverified parent {} at {}",
                    format_utc(c.date(field)),
                    short(&p.hash),
                    format_utc(p.date(field))
                ),
            )
        })
        .collect()
}

/// Hashes flagged in both lists, unique and sorted.
pub fn intersect_anomalies(a: &[Anomaly], b: &[Anomaly]) -> Vec<String> {
    let left: BTreeSet<&str> = a.iter().map(|x| x.commit_hash.as_str()).collect();
    let right: BTreeSet<&str> = b.iter().map(|x| x.commit_hash.as_str()).collect();
    left.intersection(&right).map(|s| s.to_string()).collect()
}
