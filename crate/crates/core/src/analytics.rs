// SPDX-License-Identifier: Apache-2.0

//! Aggregate tables over detected anomalies.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::model::{canonical_identity, Anomaly, AnomalyKind, CommitRecord};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("no values to aggregate")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindSummary {
    pub commits: usize,
    pub projects: usize,
}

/// Distinct commits and repositories per anomaly kind, plus totals across
/// all kinds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub by_kind: BTreeMap<AnomalyKind, KindSummary>,
    pub total: KindSummary,
}

pub fn summarize(anomalies: &[Anomaly]) -> Summary {
    let mut commits: BTreeMap<AnomalyKind, HashSet<(&str, &str)>> = BTreeMap::new();
    let mut projects: BTreeMap<AnomalyKind, HashSet<&str>> = BTreeMap::new();
    let mut all_commits = HashSet::new();
    let mut all_projects = HashSet::new();
    for a in anomalies {
        let key = (a.repo_id.as_str(), a.commit_hash.as_str());
        commits.entry(a.kind).or_default().insert(key);
        projects.entry(a.kind).or_default().insert(&a.repo_id);
        all_commits.insert(key);
        all_projects.insert(a.repo_id.as_str());
    }
    let by_kind = AnomalyKind::ALL
        .into_iter()
        .map(|k| {
            let s = KindSummary {
                commits: commits.get(&k).map_or(0, HashSet::len),
                projects: projects.get(&k).map_or(0, HashSet::len),
            };
            (k, s)
        })
        .collect();
    Summary {
        by_kind,
        total: KindSummary {
            commits: all_commits.len(),
            projects: all_projects.len(),
        },
    }
}

/// Summary statistics of parent-minus-child deltas, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaStats {
    pub n: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
}

/// Quantile by linear interpolation between closest ranks on sorted data
/// (position `q * (n - 1)`).
pub fn quantile(sorted: &[i64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] as f64 + frac * (sorted[hi] - sorted[lo]) as f64
}

pub fn delta_statistics(deltas: &[i64]) -> Result<DeltaStats, AnalyticsError> {
    if deltas.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    let mut sorted = deltas.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let sum: i128 = sorted.iter().map(|&d| i128::from(d)).sum();
    let mean = sum as f64 / n as f64;
    let var = sorted
        .iter()
        .map(|&d| {
            let e = d as f64 - mean;
            e * e
        })
        .sum::<f64>()
        / n as f64;
    Ok(DeltaStats {
        n,
        mean,
        std: var.sqrt(),
        min: sorted[0] as f64,
        p25: quantile(&sorted, 0.25),
        p50: quantile(&sorted, 0.5),
        p75: quantile(&sorted, 0.75),
        max: sorted[n - 1] as f64,
    })
}

/// Upper bounds of the histogram buckets in seconds. A month is 30 days and
/// a year 365 days; the last bucket is unbounded.
pub const HISTOGRAM_BOUNDS: [(Option<i64>, &str); 11] = [
    (Some(30), "<=30s"),
    (Some(60), "<=1m"),
    (Some(300), "<=5m"),
    (Some(1_800), "<=30m"),
    (Some(3_600), "<=1h"),
    (Some(21_600), "<=6h"),
    (Some(86_400), "<=1d"),
    (Some(604_800), "<=1w"),
    (Some(2_592_000), "<=30d"),
    (Some(31_536_000), "<=1y"),
    (None, ">1y"),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBucket {
    pub label: String,
    /// Inclusive upper bound; `None` for the unbounded last bucket.
    pub upper_bound_seconds: Option<i64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaHistogram {
    pub buckets: Vec<HistogramBucket>,
}

impl DeltaHistogram {
    pub fn total(&self) -> usize {
        self.buckets.iter().map(|b| b.count).sum()
    }
}

/// Index of the first bucket whose bound the delta does not exceed.
pub fn bucket_index(delta: i64) -> usize {
    HISTOGRAM_BOUNDS
        .iter()
        .position(|(bound, _)| bound.is_none_or(|b| delta <= b))
        .expect("last bucket is unbounded")
}

pub fn delta_histogram(deltas: &[i64]) -> Result<DeltaHistogram, AnalyticsError> {
    if deltas.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    let mut counts = [0usize; 11];
    for &d in deltas {
        counts[bucket_index(d)] += 1;
    }
    Ok(DeltaHistogram {
        buckets: HISTOGRAM_BOUNDS
            .iter()
            .zip(counts)
            .map(|((bound, label), count)| HistogramBucket {
                label: (*label).to_string(),
                upper_bound_seconds: *bound,
                count,
            })
            .collect(),
    })
}

/// English stop words (the common 179-word list used by NLP toolkits).
pub const STOPWORDS: &[&str] = &[
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've",
    "you'll", "you'd", "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself",
    "she", "she's", "her", "hers", "herself", "it", "it's", "its", "itself", "they", "them",
    "their", "theirs", "themselves", "what", "which", "who", "whom", "this", "that", "that'll",
    "these", "those", "am", "is", "are", "was", "were", "be", "been", "being", "have", "has",
    "had", "having", "do", "does", "did", "doing", "a", "an", "the", "and", "but", "if", "or",
    "because", "as", "until", "while", "of", "at", "by", "for", "with", "about", "against",
    "between", "into", "through", "during", "before", "after", "above", "below", "to", "from",
    "up", "down", "in", "out", "on", "off", "over", "under", "again", "further", "then", "once",
    "here", "there", "when", "where", "why", "how", "all", "any", "both", "each", "few", "more",
    "most", "other", "some", "such", "no", "nor", "not", "only", "own", "same", "so", "than",
    "too", "very", "s", "t", "can", "will", "just", "don", "don't", "should", "should've", "now",
    "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren", "aren't", "couldn", "couldn't", "didn",
    "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn", "hasn't", "haven", "haven't", "isn",
    "isn't", "ma", "mightn", "mightn't", "mustn", "mustn't", "needn", "needn't", "shan",
    "shan't", "shouldn", "shouldn't", "wasn", "wasn't", "weren", "weren't", "won", "won't",
    "wouldn", "wouldn't",
];

fn ends_with_any(word: &str, suffixes: &[&str]) -> bool {
    suffixes.iter().any(|s| word.ends_with(s))
}

/// Suffix-stripping stemmer. At most one rule applies, tried in order:
///
/// | rule | condition on what remains | example |
/// |------|---------------------------|---------|
/// | `-ing` → ``  | ≥ 3 chars | updating → updat |
/// | `-ed` → ``   | ≥ 3 chars | fixed → fix |
/// | `-ies` → `i` | ≥ 2 chars | libraries → librari |
/// | `-es` → ``   | ≥ 3 chars, ends in s, x, z, ch or sh | fixes → fix |
/// | `-s` → ``    | ≥ 3 chars, not ending in s | tests → test |
///
/// Afterwards a final `y` preceded by a consonant becomes `i`
/// (copy → copi) when at least two characters precede it.
pub fn stem(word: &str) -> String {
    let chars = |s: &str| s.chars().count();
    let mut w = word.to_string();
    if let Some(base) = w.strip_suffix("ing").filter(|b| chars(b) >= 3) {
        w = base.to_string();
    } else if let Some(base) = w.strip_suffix("ed").filter(|b| chars(b) >= 3) {
        w = base.to_string();
    } else if let Some(base) = w.strip_suffix("ies").filter(|b| chars(b) >= 2) {
        w = format!("{base}i");
    } else if let Some(base) = w
        .strip_suffix("es")
        .filter(|b| chars(b) >= 3 && ends_with_any(b, &["s", "x", "z", "ch", "sh"]))
    {
        w = base.to_string();
    } else if let Some(base) = w
        .strip_suffix('s')
        .filter(|b| chars(b) >= 3 && !b.ends_with('s'))
    {
        w = base.to_string();
    }
    let cs: Vec<char> = w.chars().collect();
    if cs.len() >= 3 && cs[cs.len() - 1] == 'y' && !"aeiouy".contains(cs[cs.len() - 2]) {
        w.pop();
        w.push('i');
    }
    w
}

/// Frequent tokens, sorted by count descending then token ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenTable {
    pub rows: Vec<(String, usize)>,
}

impl TokenTable {
    pub fn top(&self, n: usize) -> TokenTable {
        TokenTable {
            rows: self.rows.iter().take(n).cloned().collect(),
        }
    }
}

pub fn tokenize(message: &str) -> impl Iterator<Item = String> + '_ {
    static STOP: std::sync::LazyLock<HashSet<&'static str>> =
        std::sync::LazyLock::new(|| STOPWORDS.iter().copied().collect());
    message
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !STOP.contains(t.as_str()))
        .map(|t| stem(&t))
}

/// Token counts over `messages`, skipping entirely any message containing
/// one of `exclude_terms` (case-insensitive).
pub fn token_frequency<S: AsRef<str>>(
    messages: &[S],
    exclude_terms: &BTreeSet<String>,
) -> TokenTable {
    let excluded: Vec<String> = exclude_terms.iter().map(|t| t.to_lowercase()).collect();
    let mut counts: HashMap<String, usize> = HashMap::new();
    for m in messages {
        let lower = m.as_ref().to_lowercase();
        if excluded.iter().any(|t| lower.contains(t.as_str())) {
            continue;
        }
        for token in tokenize(&lower) {
            *counts.entry(token).or_default() += 1;
        }
    }
    TokenTable {
        rows: ranked(counts),
    }
}

fn ranked(counts: HashMap<String, usize>) -> Vec<(String, usize)> {
    let mut rows: Vec<(String, usize)> = counts.into_iter().collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    rows
}

fn distinct_commits(anomalies: &[Anomaly]) -> BTreeSet<(&str, &str)> {
    anomalies
        .iter()
        .map(|a| (a.repo_id.as_str(), a.commit_hash.as_str()))
        .collect()
}

/// Committers of the flagged commits, counted once per commit. Empty,
/// blank and `(no name)` identities are grouped together.
pub fn top_committers(
    anomalies: &[Anomaly],
    records: &[CommitRecord],
    k: usize,
) -> Vec<(String, usize)> {
    let by_key: HashMap<(&str, &str), &CommitRecord> = records
        .iter()
        .map(|r| ((r.repo_id.as_str(), r.hash.as_str()), r))
        .collect();
    let mut counts: HashMap<String, usize> = HashMap::new();
    for key in distinct_commits(anomalies) {
        if let Some(r) = by_key.get(&key) {
            *counts
                .entry(canonical_identity(&r.committer_id).to_string())
                .or_default() += 1;
        }
    }
    let mut rows = ranked(counts);
    rows.truncate(k);
    rows
}

/// Repositories with the most flagged commits.
pub fn top_projects(anomalies: &[Anomaly], k: usize) -> Vec<(String, usize)> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for (repo, _) in distinct_commits(anomalies) {
        *counts.entry(repo.to_string()).or_default() += 1;
    }
    let mut rows = ranked(counts);
    rows.truncate(k);
    rows
}

/// Normalizes `Owner/Repo.git`, `https://host/Owner/Repo/` etc. to `owner/repo`.
pub fn canonical_repo_id(id: &str) -> String {
    let mut s = id.trim().to_lowercase();
    if let Some((_, rest)) = s.split_once("://") {
        let segments: Vec<&str> = rest.split('/').filter(|p| !p.is_empty()).collect();
        s = segments[segments.len().saturating_sub(2).max(1).min(segments.len())..].join("/");
    }
    let s = s.trim_end_matches('/');
    s.strip_suffix(".git").unwrap_or(s).to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectIntersection {
    pub left: usize,
    pub right: usize,
    pub common: BTreeSet<String>,
}

pub fn intersect_projects<'a>(
    a: impl IntoIterator<Item = &'a str>,
    b: impl IntoIterator<Item = &'a str>,
) -> ProjectIntersection {
    let left: BTreeSet<String> = a.into_iter().map(canonical_repo_id).collect();
    let right: BTreeSet<String> = b.into_iter().map(canonical_repo_id).collect();
    ProjectIntersection {
        left: left.len(),
        right: right.len(),
        common: left.intersection(&right).cloned().collect(),
    }
}
