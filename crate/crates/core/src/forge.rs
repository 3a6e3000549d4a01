// SPDX-License-Identifier: Apache-2.0

//! Commit metadata lookup against a forge API, an archive fallback, a local
//! NDJSON cache and offline stub directories, used to re-check linear
//! out-of-order candidates against their true parents.
//!
//! Sources are tried in the configured order and the first answer wins.
//! Network answers are appended to the local cache (when one is configured)
//! so that a repeated run performs no requests.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::detect::{is_merge_message, out_of_order_parent_anomaly, DetectorConfig};
use crate::ingest::NdjsonRecord;
use crate::model::{parse_iso8601, Anomaly, CommitRecord, Timestamp, Verified};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    PrimaryForge,
    ArchiveFallback,
    LocalCache,
    FileStub,
}

/// One place commit metadata can come from. For the HTTP kinds `endpoint`
/// is a URL template with `{repo}` and `{hash}` placeholders; for the local
/// kinds it is a path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataSource {
    pub kind: SourceKind,
    pub endpoint: String,
    /// Name of the environment variable holding an API token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
}

pub const GITHUB_COMMIT_TEMPLATE: &str = "https://api.github.com/repos/{repo}/commits/{hash}";
pub const SWH_REVISION_TEMPLATE: &str =
    "https://archive.softwareheritage.org/api/1/revision/{hash}/";

fn default_workers() -> usize {
    4
}

fn default_attempts() -> u32 {
    5
}

fn default_timeout() -> u64 {
    30
}

/// Contents of a `--sources` file.
///
/// ```toml
/// workers = 4
///
/// [[source]]
/// kind = "local_cache"
/// endpoint = "cache.ndjson"
///
/// [[source]]
/// kind = "primary_forge"
/// endpoint = "https://api.github.com/repos/{repo}/commits/{hash}"
/// auth_env = "GITHUB_TOKEN"
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourcesConfig {
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(rename = "source", default)]
    pub sources: Vec<MetadataSource>,
}

impl Default for SourcesConfig {
    fn default() -> Self {
        SourcesConfig {
            workers: default_workers(),
            max_attempts: default_attempts(),
            timeout_secs: default_timeout(),
            sources: Vec::new(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ForgeError {
    #[error("no metadata sources configured")]
    NoSources,
    #[error("cannot read sources config: {0}")]
    Config(#[from] toml::de::Error),
    #[error("cache {path}: {source}")]
    Cache {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl SourcesConfig {
    pub fn from_toml(text: &str) -> Result<Self, ForgeError> {
        let cfg: SourcesConfig = toml::from_str(text)?;
        if cfg.sources.is_empty() {
            return Err(ForgeError::NoSources);
        }
        Ok(cfg)
    }

    /// Resolves relative local paths against `base` (the config file's directory).
    pub fn resolve_paths(&mut self, base: &Path) {
        for s in &mut self.sources {
            if matches!(s.kind, SourceKind::LocalCache | SourceKind::FileStub) {
                let p = Path::new(&s.endpoint);
                if p.is_relative() {
                    s.endpoint = base.join(p).to_string_lossy().into_owned();
                }
            }
        }
    }
}

/// Why a single source could not answer.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FetchError {
    #[error("rate limited, retry after {0:?}")]
    RateLimited(Duration),
    #[error("not found")]
    NotFound,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("undecodable response: {0}")]
    Decode(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    /// Server retry hint in seconds, from `Retry-After` or the rate-limit
    /// reset header.
    pub retry_after: Option<u64>,
    pub rate_limit_exhausted: bool,
    pub body: String,
}

pub trait HttpClient: Send + Sync {
    fn get(&self, url: &str, token: Option<&str>) -> Result<HttpResponse, String>;
}

pub struct UreqClient {
    agent: ureq::Agent,
}

impl UreqClient {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .user_agent(concat!("gitclock/", env!("CARGO_PKG_VERSION")))
            .build();
        UreqClient {
            agent: config.into(),
        }
    }
}

impl HttpClient for UreqClient {
    fn get(&self, url: &str, token: Option<&str>) -> Result<HttpResponse, String> {
        let mut req = self.agent.get(url).header("Accept", "application/json");
        if let Some(t) = token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req.call().map_err(|e| e.to_string())?;
        let header = |name: &str| {
            resp.headers()
                .get(name)
                .and_then(|v| v.to_str().ok())
                .map(str::to_owned)
        };
        let retry_after = header("retry-after")
            .and_then(|v| v.trim().parse::<u64>().ok())
            .or_else(|| {
                let reset: i64 = header("x-ratelimit-reset")?.trim().parse().ok()?;
                let now = chrono::Utc::now().timestamp();
                Some(reset.saturating_sub(now).max(0) as u64)
            });
        let rate_limit_exhausted = header("x-ratelimit-remaining").as_deref() == Some("0");
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| e.to_string())?;
        Ok(HttpResponse {
            status,
            retry_after,
            rate_limit_exhausted,
            body,
        })
    }
}

/// Commit metadata as fetched from a source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitMetadata {
    pub record: CommitRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationStatus {
    ConfirmedOnForge,
    ConfirmedOnArchive,
    Unverifiable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationOutcome {
    pub commit_hash: String,
    pub repo_id: String,
    pub status: VerificationStatus,
    pub verified_flag: Verified,
    pub parents: Vec<String>,
    /// The source that answered, `None` when unverifiable.
    pub source: Option<SourceKind>,
    #[serde(skip)]
    pub record: Option<CommitRecord>,
}

impl VerificationOutcome {
    fn unverifiable(repo_id: &str, hash: &str) -> Self {
        VerificationOutcome {
            commit_hash: hash.to_owned(),
            repo_id: repo_id.to_owned(),
            status: VerificationStatus::Unverifiable,
            verified_flag: Verified::Unknown,
            parents: Vec::new(),
            source: None,
            record: None,
        }
    }

    fn confirmed(status: VerificationStatus, source: SourceKind, record: CommitRecord) -> Self {
        VerificationOutcome {
            commit_hash: record.hash.clone(),
            repo_id: record.repo_id.clone(),
            status,
            verified_flag: record.verified,
            parents: record.parents.clone(),
            source: Some(source),
            record: Some(record),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    repo: String,
    hash: String,
    status: VerificationStatus,
    record: NdjsonRecord,
}

#[derive(Debug, Deserialize)]
struct GhCommit {
    sha: String,
    #[serde(default)]
    parents: Vec<GhParent>,
    commit: GhCommitBody,
}

#[derive(Debug, Deserialize)]
struct GhParent {
    sha: String,
}

#[derive(Debug, Deserialize)]
struct GhCommitBody {
    author: Option<GhPerson>,
    committer: Option<GhPerson>,
    #[serde(default)]
    message: String,
    verification: Option<GhVerification>,
}

#[derive(Debug, Deserialize)]
struct GhPerson {
    #[serde(default)]
    name: String,
    date: String,
}

#[derive(Debug, Deserialize)]
struct GhVerification {
    verified: bool,
}

#[derive(Debug, Deserialize)]
struct SwhRevision {
    id: String,
    #[serde(default)]
    parents: Vec<SwhParent>,
    date: serde_json::Value,
    committer_date: serde_json::Value,
    #[serde(default)]
    message: Option<String>,
    author: Option<SwhPerson>,
    committer: Option<SwhPerson>,
}

#[derive(Debug, Deserialize)]
struct SwhParent {
    id: String,
}

#[derive(Debug, Deserialize)]
struct SwhPerson {
    #[serde(default)]
    fullname: Option<String>,
    #[serde(default)]
    name: Option<String>,
}

fn iso(text: &str) -> Result<Timestamp, FetchError> {
    parse_iso8601(text).ok_or_else(|| FetchError::Decode(format!("bad date `{text}`")))
}

// Archive dates come either as ISO strings or as
// `{"timestamp": {"seconds": N}, "offset": M}` objects.
fn swh_date(v: &serde_json::Value) -> Result<Timestamp, FetchError> {
    match v {
        serde_json::Value::String(s) => iso(s),
        serde_json::Value::Object(o) => {
            let secs = o
                .get("timestamp")
                .and_then(|t| t.get("seconds").or(Some(t)))
                .and_then(serde_json::Value::as_i64)
                .ok_or_else(|| FetchError::Decode("date without timestamp".into()))?;
            let offset = o.get("offset").and_then(serde_json::Value::as_i64).unwrap_or(0);
            Ok(Timestamp::with_offset(secs, offset as i32))
        }
        _ => Err(FetchError::Decode("unsupported date value".into())),
    }
}

fn record_from(
    repo: &str,
    hash: String,
    parents: Vec<String>,
    dates: (Timestamp, Timestamp),
    ids: (String, String),
    message: String,
    verified: Verified,
) -> CommitRecord {
    CommitRecord {
        hash: hash.to_ascii_lowercase(),
        repo_id: repo.to_owned(),
        parents: parents.into_iter().map(|p| p.to_ascii_lowercase()).collect(),
        author_date: dates.0,
        committer_date: dates.1,
        author_id: ids.0,
        committer_id: crate::model::canonical_identity(&ids.1).to_owned(),
        message,
        verified,
        stars: None,
    }
}

pub fn parse_forge_document(repo: &str, body: &str) -> Result<CommitRecord, FetchError> {
    let doc: GhCommit = serde_json::from_str(body).map_err(|e| FetchError::Decode(e.to_string()))?;
    let committer = doc
        .commit
        .committer
        .ok_or_else(|| FetchError::Decode("missing committer".into()))?;
    let author = doc.commit.author;
    let committer_date = iso(&committer.date)?;
    let author_date = match &author {
        Some(a) => iso(&a.date)?,
        None => committer_date,
    };
    Ok(record_from(
        repo,
        doc.sha,
        doc.parents.into_iter().map(|p| p.sha).collect(),
        (author_date, committer_date),
        (author.map(|a| a.name).unwrap_or_default(), committer.name),
        doc.commit.message,
        Verified::from(doc.commit.verification.map(|v| v.verified)),
    ))
}

/// Archive revisions carry no forge signature, so `verified` is unknown.
pub fn parse_archive_document(repo: &str, body: &str) -> Result<CommitRecord, FetchError> {
    let doc: SwhRevision =
        serde_json::from_str(body).map_err(|e| FetchError::Decode(e.to_string()))?;
    let person = |p: Option<SwhPerson>| {
        p.and_then(|p| p.name.or(p.fullname)).unwrap_or_default()
    };
    Ok(record_from(
        repo,
        doc.id,
        doc.parents.into_iter().map(|p| p.id).collect(),
        (swh_date(&doc.date)?, swh_date(&doc.committer_date)?),
        (person(doc.author), person(doc.committer)),
        doc.message.unwrap_or_default(),
        Verified::Unknown,
    ))
}

fn expand(template: &str, repo: &str, hash: &str) -> String {
    template.replace("{repo}", repo).replace("{hash}", hash)
}

/// Backoff between attempts against a rate-limited source: the first wait
/// is the server's hint, each later one doubles it.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub default_hint: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            default_hint: Duration::from_secs(1),
            max_delay: Duration::from_secs(3600),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, hint: Duration, attempt: u32) -> Duration {
        hint.saturating_mul(2u32.saturating_pow(attempt)).min(self.max_delay)
    }
}

pub type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

/// Shared pause shared by all workers talking to one rate-limited source.
#[derive(Default)]
struct RateGate {
    blocked_until: Mutex<Option<Instant>>,
}

impl RateGate {
    fn wait(&self, sleep: &Sleeper) {
        let until = *self.blocked_until.lock().expect("gate lock");
        if let Some(until) = until {
            let now = Instant::now();
            if until > now {
                sleep(until - now);
            }
        }
    }

    fn block_for(&self, d: Duration) {
        let mut slot = self.blocked_until.lock().expect("gate lock");
        let until = Instant::now() + d;
        if slot.is_none_or(|u| u < until) {
            *slot = Some(until);
        }
    }
}

/// Counters describing what a client did; used for reporting and for
/// deciding whether any source was reachable.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchStats {
    pub network_requests: usize,
    pub transport_failures: usize,
    pub rate_limited: usize,
    pub cache_hits: usize,
}

type CacheKey = (String, String);

pub struct MetadataClient {
    sources: Vec<MetadataSource>,
    http: Arc<dyn HttpClient>,
    retry: RetryPolicy,
    sleep: Sleeper,
    gates: Vec<RateGate>,
    cache: Mutex<HashMap<CacheKey, (VerificationStatus, CommitRecord)>>,
    cache_file: Option<Mutex<File>>,
    network_requests: AtomicUsize,
    transport_failures: AtomicUsize,
    rate_limited: AtomicUsize,
    cache_hits: AtomicUsize,
}

impl MetadataClient {
    pub fn new(sources: Vec<MetadataSource>, http: Arc<dyn HttpClient>) -> Result<Self, ForgeError> {
        if sources.is_empty() {
            return Err(ForgeError::NoSources);
        }
        let mut cache = HashMap::new();
        let mut cache_file = None;
        if let Some(src) = sources.iter().find(|s| s.kind == SourceKind::LocalCache) {
            let path = PathBuf::from(&src.endpoint);
            let err = |source| ForgeError::Cache {
                path: path.clone(),
                source,
            };
            if path.exists() {
                let reader = BufReader::new(File::open(&path).map_err(err)?);
                for line in reader.lines() {
                    let line = line.map_err(err)?;
                    // Torn or foreign lines are ignored; the cache is advisory.
                    let Ok(entry) = serde_json::from_str::<CacheLine>(&line) else {
                        continue;
                    };
                    if let Ok(rec) = entry.record.into_record() {
                        cache.insert((entry.repo, entry.hash), (entry.status, rec));
                    }
                }
            }
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(err)?;
            cache_file = Some(Mutex::new(file));
        }
        let gates = sources.iter().map(|_| RateGate::default()).collect();
        Ok(MetadataClient {
            sources,
            http,
            retry: RetryPolicy::default(),
            sleep: Arc::new(std::thread::sleep),
            gates,
            cache: Mutex::new(cache),
            cache_file,
            network_requests: AtomicUsize::new(0),
            transport_failures: AtomicUsize::new(0),
            rate_limited: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
        })
    }

    pub fn from_config(cfg: &SourcesConfig) -> Result<Self, ForgeError> {
        let http = Arc::new(UreqClient::new(Duration::from_secs(cfg.timeout_secs)));
        let mut client = MetadataClient::new(cfg.sources.clone(), http)?;
        client.retry.max_attempts = cfg.max_attempts.max(1);
        Ok(client)
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_sleeper(mut self, sleep: Sleeper) -> Self {
        self.sleep = sleep;
        self
    }

    pub fn stats(&self) -> FetchStats {
        FetchStats {
            network_requests: self.network_requests.load(Ordering::SeqCst),
            transport_failures: self.transport_failures.load(Ordering::SeqCst),
            rate_limited: self.rate_limited.load(Ordering::SeqCst),
            cache_hits: self.cache_hits.load(Ordering::SeqCst),
        }
    }

    /// True when a local source exists or at least one network request got
    /// an HTTP response.
    pub fn any_source_reachable(&self) -> bool {
        let local = self.sources.iter().any(|s| match s.kind {
            SourceKind::FileStub => Path::new(&s.endpoint).is_dir(),
            SourceKind::LocalCache => true,
            _ => false,
        });
        let stats = self.stats();
        local || stats.network_requests > stats.transport_failures || stats.network_requests == 0
    }

    /// Looks `hash` up in each source in order; the first answer wins.
    pub fn fetch_commit_metadata(&self, repo_id: &str, hash: &str) -> VerificationOutcome {
        let key = (repo_id.to_owned(), hash.to_owned());
        if let Some((status, rec)) = self.cache.lock().expect("cache lock").get(&key).cloned() {
            self.cache_hits.fetch_add(1, Ordering::SeqCst);
            return VerificationOutcome::confirmed(status, SourceKind::LocalCache, rec);
        }
        for (i, source) in self.sources.iter().enumerate() {
            let answer = match source.kind {
                SourceKind::LocalCache => continue,
                SourceKind::FileStub => self
                    .fetch_stub(source, repo_id, hash)
                    .map(|r| (VerificationStatus::ConfirmedOnForge, r)),
                SourceKind::PrimaryForge => self
                    .fetch_http(i, source, repo_id, hash, parse_forge_document)
                    .map(|r| (VerificationStatus::ConfirmedOnForge, r)),
                SourceKind::ArchiveFallback => self
                    .fetch_http(i, source, repo_id, hash, parse_archive_document)
                    .map(|r| (VerificationStatus::ConfirmedOnArchive, r)),
            };
            match answer {
                Ok((status, rec)) => {
                    if matches!(source.kind, SourceKind::PrimaryForge | SourceKind::ArchiveFallback) {
                        self.remember(key, status, &rec);
                    }
                    return VerificationOutcome::confirmed(status, source.kind, rec);
                }
                Err(e) => {
                    log::debug!("{:?} could not answer {repo_id}@{hash}: {e}", source.kind);
                }
            }
        }
        VerificationOutcome::unverifiable(repo_id, hash)
    }

    fn remember(&self, key: CacheKey, status: VerificationStatus, rec: &CommitRecord) {
        if let Some(file) = &self.cache_file {
            let line = CacheLine {
                repo: key.0.clone(),
                hash: key.1.clone(),
                status,
                record: NdjsonRecord::from_record(rec),
            };
            let mut text = serde_json::to_string(&line).expect("cache line serializes");
            text.push('\n');
            let mut f = file.lock().expect("cache file lock");
            if let Err(e) = f.write_all(text.as_bytes()).and_then(|_| f.flush()) {
                log::warn!("cannot append to metadata cache: {e}");
            }
        }
        self.cache
            .lock()
            .expect("cache lock")
            .insert(key, (status, rec.clone()));
    }

    fn fetch_stub(&self, source: &MetadataSource, repo: &str, hash: &str) -> Result<CommitRecord, FetchError> {
        let path = Path::new(&source.endpoint).join(format!("{hash}.json"));
        let text = std::fs::read_to_string(&path).map_err(|_| FetchError::NotFound)?;
        let doc: NdjsonRecord =
            serde_json::from_str(&text).map_err(|e| FetchError::Decode(e.to_string()))?;
        if doc.repo != repo {
            return Err(FetchError::NotFound);
        }
        doc.into_record().map_err(FetchError::Decode)
    }

    fn fetch_http(
        &self,
        index: usize,
        source: &MetadataSource,
        repo: &str,
        hash: &str,
        parse: fn(&str, &str) -> Result<CommitRecord, FetchError>,
    ) -> Result<CommitRecord, FetchError> {
        let url = expand(&source.endpoint, repo, hash);
        let token = source
            .auth_env
            .as_deref()
            .and_then(|name| std::env::var(name).ok());
        let gate = &self.gates[index];
        let mut last = FetchError::NotFound;
        for attempt in 0..self.retry.max_attempts {
            gate.wait(&self.sleep);
            match self.request(&url, token.as_deref()) {
                Ok(body) => return parse(repo, &body),
                Err(FetchError::RateLimited(hint)) => {
                    self.rate_limited.fetch_add(1, Ordering::SeqCst);
                    let delay = self.retry.delay(hint, attempt);
                    log::info!("rate limited by {url}; backing off {delay:?}");
                    gate.block_for(delay);
                    last = FetchError::RateLimited(hint);
                }
                Err(e) => return Err(e),
            }
        }
        // Exhausted retries count as "not here" for this source.
        log::warn!("giving up on {url} after {} attempts: {last}", self.retry.max_attempts);
        Err(FetchError::NotFound)
    }

    fn request(&self, url: &str, token: Option<&str>) -> Result<String, FetchError> {
        self.network_requests.fetch_add(1, Ordering::SeqCst);
        let resp = self.http.get(url, token).map_err(|e| {
            self.transport_failures.fetch_add(1, Ordering::SeqCst);
            FetchError::Transport(e)
        })?;
        let hint = || {
            resp.retry_after
                .map(Duration::from_secs)
                .unwrap_or(self.retry.default_hint)
        };
        match resp.status {
            200..=299 => Ok(resp.body),
            429 => Err(FetchError::RateLimited(hint())),
            403 if resp.rate_limit_exhausted => Err(FetchError::RateLimited(hint())),
            404 | 410 | 422 => Err(FetchError::NotFound),
            s => Err(FetchError::Transport(format!("HTTP {s}"))),
        }
    }
}

/// Per-status counts over the candidates of one verification batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationAccounting {
    pub total: usize,
    pub confirmed_on_forge: usize,
    pub confirmed_on_archive: usize,
    pub unverifiable: usize,
    /// Candidates with at least one strictly newer parent.
    pub confirmed_out_of_order: usize,
    /// Candidates whose parents all turned out older or equal.
    pub rejected_in_order: usize,
}

impl VerificationAccounting {
    /// `(forge, archive, unverifiable)` as percentages of the input.
    pub fn percentages(&self) -> (f64, f64, f64) {
        if self.total == 0 {
            return (0.0, 0.0, 0.0);
        }
        let pct = |n: usize| 100.0 * n as f64 / self.total as f64;
        (
            pct(self.confirmed_on_forge),
            pct(self.confirmed_on_archive),
            pct(self.unverifiable),
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub confirmed: Vec<Anomaly>,
    pub dropped: Vec<Anomaly>,
    pub accounting: VerificationAccounting,
    pub outcomes: Vec<VerificationOutcome>,
}

enum Verdict {
    Confirmed(Anomaly),
    InOrder,
    Unverifiable,
}

fn check_candidate(
    candidate: &Anomaly,
    known: &HashMap<(&str, &str), &CommitRecord>,
    client: &MetadataClient,
    cfg: &DetectorConfig,
) -> (VerificationOutcome, Verdict) {
    let outcome = client.fetch_commit_metadata(&candidate.repo_id, &candidate.commit_hash);
    let Some(child) = outcome.record.clone() else {
        return (outcome, Verdict::Unverifiable);
    };
    let child_date = child.date(cfg.date_field);
    let mut worst: Option<(Timestamp, String)> = None;
    for parent_hash in &child.parents {
        let fetched = client.fetch_commit_metadata(&child.repo_id, parent_hash);
        let parent = match fetched.record {
            Some(r) => r,
            None => match known.get(&(child.repo_id.as_str(), parent_hash.as_str())) {
                Some(r) => (*r).clone(),
                None => continue,
            },
        };
        let excluded = cfg.exclude_merges
            && (is_merge_message(&child.message) || is_merge_message(&parent.message));
        let parent_date = parent.date(cfg.date_field);
        if parent_date > child_date && !excluded {
            // Newest parent wins; among equals, the smaller hash.
            let better = match &worst {
                None => true,
                Some((d, h)) => parent_date > *d || (parent_date == *d && parent.hash < *h),
            };
            if better {
                worst = Some((parent_date, parent.hash.clone()));
            }
        }
    }
    let verdict = match worst {
        Some((parent_date, parent_hash)) => Verdict::Confirmed(out_of_order_parent_anomaly(
            &child,
            child_date,
            &parent_hash,
            parent_date,
            cfg.date_field,
        )),
        None => Verdict::InOrder,
    };
    (outcome, verdict)
}

/// Re-checks linear out-of-order candidates against their true parents.
///
/// A candidate is confirmed when at least one fetched parent is strictly
/// newer (after merge exclusion, if enabled). Candidates whose metadata
/// cannot be found anywhere are dropped and counted as unverifiable;
/// `records` supplies parent dates the sources do not know.
pub fn verify_anomalies(
    anomalies: &[Anomaly],
    records: &[CommitRecord],
    client: &MetadataClient,
    cfg: &DetectorConfig,
    workers: usize,
) -> VerificationResult {
    let known: HashMap<(&str, &str), &CommitRecord> = records
        .iter()
        .map(|r| ((r.repo_id.as_str(), r.hash.as_str()), r))
        .collect();

    let slots: Vec<Mutex<Option<(VerificationOutcome, Verdict)>>> =
        anomalies.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, anomalies.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(candidate) = anomalies.get(i) else {
                    break;
                };
                let result = check_candidate(candidate, &known, client, cfg);
                *slots[i].lock().expect("slot lock") = Some(result);
            });
        }
    });

    let mut result = VerificationResult::default();
    result.accounting.total = anomalies.len();
    for (candidate, slot) in anomalies.iter().zip(slots) {
        let (outcome, verdict) = slot
            .into_inner()
            .expect("slot lock")
            .expect("every candidate checked");
        match outcome.status {
            VerificationStatus::ConfirmedOnForge => result.accounting.confirmed_on_forge += 1,
            VerificationStatus::ConfirmedOnArchive => result.accounting.confirmed_on_archive += 1,
            VerificationStatus::Unverifiable => result.accounting.unverifiable += 1,
        }
        match verdict {
            Verdict::Confirmed(a) => {
                result.accounting.confirmed_out_of_order += 1;
                result.confirmed.push(a);
            }
            Verdict::InOrder => {
                result.accounting.rejected_in_order += 1;
                result.dropped.push(candidate.clone());
            }
            Verdict::Unverifiable => result.dropped.push(candidate.clone()),
        }
        result.outcomes.push(outcome);
    }
    result.confirmed.sort();
    result.dropped.sort();
    result
}

/// Writes one stub document per record into `dir`, named `<hash>.json`.
pub fn write_stub_directory(dir: &Path, records: &[CommitRecord]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for r in records {
        let doc = serde_json::to_string_pretty(&NdjsonRecord::from_record(r))
            .expect("record serializes");
        std::fs::write(dir.join(format!("{}.json", r.hash)), doc)?;
    }
    Ok(())
}
