// SPDX-License-Identifier: Apache-2.0

//! Cleaning policies. Each filter partitions its input into retained and
//! removed commits and returns a [`RemovalLedger`] accounting for both.
//!
//! Policies are declared in a TOML file as an ordered `[[policy]]` array:
//!
//! ```toml
//! [[policy]]
//! kind = "min_timestamp"
//! min_ts = 1
//!
//! [[policy]]
//! kind = "before_date"
//! cutoff = "2014-01-01T00:00:00Z"
//!
//! [[policy]]
//! kind = "drop_out_of_order"
//! scope = "project"
//! ```

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::detect::{detect_out_of_order_parents, DetectorConfig};
use crate::graph::{build_graphs, GraphError};
use crate::model::{iso_timestamp, CommitRecord, DateField, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    #[default]
    Commit,
    Project,
}

fn one() -> i64 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterPolicy {
    MinTimestamp {
        #[serde(default = "one")]
        min_ts: i64,
    },
    BeforeDate {
        #[serde(with = "iso_timestamp")]
        cutoff: Timestamp,
    },
    ProjectBlocklist {
        blocklist: BTreeSet<String>,
    },
    DropOutOfOrder {
        #[serde(default)]
        scope: Scope,
    },
    MinStars {
        min_stars: u64,
    },
    TopKStars {
        k: usize,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum FilterError {
    #[error("invalid policy parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("cannot read policy file: {0}")]
    Parse(#[from] toml::de::Error),
}

impl FilterPolicy {
    pub fn validate(&self) -> Result<(), FilterError> {
        match self {
            FilterPolicy::TopKStars { k: 0 } => {
                Err(FilterError::InvalidParams("top_k_stars needs k >= 1".into()))
            }
            _ => Ok(()),
        }
    }
}

/// The contents of a policy file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFile {
    #[serde(default, rename = "policy")]
    pub policies: Vec<FilterPolicy>,
}

impl PolicyFile {
    pub fn from_toml(text: &str) -> Result<Self, FilterError> {
        let file: PolicyFile = toml::from_str(text)?;
        for p in &file.policies {
            p.validate()?;
        }
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("policies always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalLedger {
    pub policy: FilterPolicy,
    pub input_commits: usize,
    pub removed_commits: usize,
    pub retained_commits: usize,
    /// Repositories present in the input with no commit retained.
    pub removed_projects: usize,
    /// Repositories without star metadata (counted as zero stars). Only
    /// reported by the star-based policies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repos_missing_stars: Option<usize>,
}

impl RemovalLedger {
    pub fn removed_fraction(&self) -> f64 {
        if self.input_commits == 0 {
            0.0
        } else {
            self.removed_commits as f64 / self.input_commits as f64
        }
    }
}

fn partition(
    records: Vec<CommitRecord>,
    policy: FilterPolicy,
    keep: impl Fn(&CommitRecord) -> bool,
) -> (Vec<CommitRecord>, RemovalLedger) {
    let input_commits = records.len();
    let repos_in: BTreeSet<String> = records.iter().map(|r| r.repo_id.clone()).collect();
    let retained: Vec<CommitRecord> = records.into_iter().filter(|r| keep(r)).collect();
    let repos_out: HashSet<&str> = retained.iter().map(|r| r.repo_id.as_str()).collect();
    let ledger = RemovalLedger {
        policy,
        input_commits,
        removed_commits: input_commits - retained.len(),
        retained_commits: retained.len(),
        removed_projects: repos_in.iter().filter(|r| !repos_out.contains(r.as_str())).count(),
        repos_missing_stars: None,
    };
    (retained, ledger)
}

/// Drops commits dated strictly before `min_ts` (epoch seconds).
pub fn filter_min_timestamp(
    records: Vec<CommitRecord>,
    min_ts: i64,
    field: DateField,
) -> (Vec<CommitRecord>, RemovalLedger) {
    partition(records, FilterPolicy::MinTimestamp { min_ts }, |r| {
        r.date(field).epoch_seconds >= min_ts
    })
}

/// Drops commits dated strictly before `cutoff`; a commit at the cutoff survives.
pub fn filter_before_date(
    records: Vec<CommitRecord>,
    cutoff: Timestamp,
    field: DateField,
) -> (Vec<CommitRecord>, RemovalLedger) {
    partition(records, FilterPolicy::BeforeDate { cutoff }, |r| {
        r.date(field) >= cutoff
    })
}

pub fn filter_blocklist(
    records: Vec<CommitRecord>,
    blocklist: &BTreeSet<String>,
) -> (Vec<CommitRecord>, RemovalLedger) {
    let policy = FilterPolicy::ProjectBlocklist {
        blocklist: blocklist.clone(),
    };
    partition(records, policy, |r| !blocklist.contains(&r.repo_id))
}

/// Drops commits having a strictly newer parent (`Scope::Commit`) or every
/// commit of a repository containing one (`Scope::Project`). Anomalies are
/// recomputed from `records`.
pub fn filter_out_of_order(
    records: Vec<CommitRecord>,
    scope: Scope,
    cfg: &DetectorConfig,
) -> Result<(Vec<CommitRecord>, RemovalLedger), FilterError> {
    let graphs = build_graphs(records.clone())?;
    let mut bad_commits: HashSet<(String, String)> = HashSet::new();
    let mut bad_repos: HashSet<String> = HashSet::new();
    for g in &graphs {
        for a in detect_out_of_order_parents(g, cfg) {
            bad_repos.insert(a.repo_id.clone());
            bad_commits.insert((a.repo_id, a.commit_hash));
        }
    }
    let policy = FilterPolicy::DropOutOfOrder { scope };
    Ok(partition(records, policy, |r| match scope {
        Scope::Commit => !bad_commits.contains(&(r.repo_id.clone(), r.hash.clone())),
        Scope::Project => !bad_repos.contains(&r.repo_id),
    }))
}

/// Star count per repository (largest value seen on any of its records).
pub fn repo_stars(records: &[CommitRecord]) -> BTreeMap<String, Option<u64>> {
    let mut out: BTreeMap<String, Option<u64>> = BTreeMap::new();
    for r in records {
        let slot = out.entry(r.repo_id.clone()).or_default();
        *slot = (*slot).max(r.stars);
    }
    out
}

fn missing_stars(stars: &BTreeMap<String, Option<u64>>) -> usize {
    stars.values().filter(|s| s.is_none()).count()
}

/// Keeps repositories with at least `min_stars` stars; missing counts are 0.
pub fn filter_by_stars(
    records: Vec<CommitRecord>,
    min_stars: u64,
) -> (Vec<CommitRecord>, RemovalLedger) {
    let stars = repo_stars(&records);
    let (kept, mut ledger) = partition(records, FilterPolicy::MinStars { min_stars }, |r| {
        stars[&r.repo_id].unwrap_or(0) >= min_stars
    });
    ledger.repos_missing_stars = Some(missing_stars(&stars));
    (kept, ledger)
}

/// The `k` most-starred repositories, ties broken by ascending repo id.
pub fn select_top_k_by_stars(repos: &[(String, u64)], k: usize) -> BTreeSet<String> {
    let mut sorted: Vec<&(String, u64)> = repos.iter().collect();
    sorted.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    sorted.into_iter().take(k).map(|(r, _)| r.clone()).collect()
}

pub fn filter_top_k_stars(
    records: Vec<CommitRecord>,
    k: usize,
) -> Result<(Vec<CommitRecord>, RemovalLedger), FilterError> {
    let policy = FilterPolicy::TopKStars { k };
    policy.validate()?;
    let stars = repo_stars(&records);
    let pairs: Vec<(String, u64)> = stars
        .iter()
        .map(|(r, s)| (r.clone(), s.unwrap_or(0)))
        .collect();
    let top = select_top_k_by_stars(&pairs, k);
    let (kept, mut ledger) = partition(records, policy, |r| top.contains(&r.repo_id));
    ledger.repos_missing_stars = Some(missing_stars(&stars));
    Ok((kept, ledger))
}

/// Applies one policy. `cfg` supplies the date field and, for out-of-order
/// filtering, the detector settings.
pub fn apply_policy(
    records: Vec<CommitRecord>,
    policy: &FilterPolicy,
    cfg: &DetectorConfig,
) -> Result<(Vec<CommitRecord>, RemovalLedger), FilterError> {
    policy.validate()?;
    Ok(match policy {
        FilterPolicy::MinTimestamp { min_ts } => {
            filter_min_timestamp(records, *min_ts, cfg.date_field)
        }
        FilterPolicy::BeforeDate { cutoff } => filter_before_date(records, *cutoff, cfg.date_field),
        FilterPolicy::ProjectBlocklist { blocklist } => filter_blocklist(records, blocklist),
        FilterPolicy::DropOutOfOrder { scope } => filter_out_of_order(records, *scope, cfg)?,
        FilterPolicy::MinStars { min_stars } => filter_by_stars(records, *min_stars),
        FilterPolicy::TopKStars { k } => filter_top_k_stars(records, *k)?,
    })
}

/// Applies policies in order, returning one ledger per policy.
pub fn apply_policies(
    mut records: Vec<CommitRecord>,
    policies: &[FilterPolicy],
    cfg: &DetectorConfig,
) -> Result<(Vec<CommitRecord>, Vec<RemovalLedger>), FilterError> {
    let mut ledgers = Vec::with_capacity(policies.len());
    for p in policies {
        let (kept, ledger) = apply_policy(records, p, cfg)?;
        records = kept;
        ledgers.push(ledger);
    }
    Ok((records, ledgers))
}
