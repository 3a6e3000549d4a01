// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use gitclock::ingest::NdjsonRecord;
use gitclock::model::{CommitRecord, Timestamp, Verified};
use rand::seq::SliceRandom;
use rand::Rng;

/// A 40-hex-digit hash unique per (repo index, commit index).
pub fn hash(repo: usize, i: usize) -> String {
    format!("{repo:020x}{i:020x}")
}

pub fn record(repo: &str, hash: &str, parents: &[String], date: i64, message: &str) -> CommitRecord {
    CommitRecord {
        hash: hash.to_string(),
        repo_id: repo.to_string(),
        parents: parents.to_vec(),
        author_date: Timestamp::utc(date),
        committer_date: Timestamp::utc(date),
        author_id: format!("author-{}", &hash[36..]),
        committer_id: format!("dev{}", date.rem_euclid(5)),
        message: message.to_string(),
        verified: Verified::Unknown,
        stars: None,
    }
}

const WORDS: &[&str] = &[
    "fix", "update", "add", "remove", "refactor", "tests", "docs", "build", "release", "cleanup",
];

/// A random DAG: each commit takes up to three parents among earlier
/// commits. Dates come from a small range so ties are common; some
/// messages mention merges.
pub fn random_dag(rng: &mut impl Rng, repo_index: usize, n: usize) -> Vec<CommitRecord> {
    let repo = format!("org/repo{repo_index}");
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut parents = Vec::new();
        if i > 0 {
            let k = rng.random_range(0..=3.min(i));
            for _ in 0..k {
                let p = hash(repo_index, rng.random_range(0..i));
                if !parents.contains(&p) {
                    parents.push(p);
                }
            }
        }
        let date = 1_000_000_000 + rng.random_range(0..40) * 60;
        let message = if rng.random_bool(0.15) {
            format!("Merge branch '{}'", WORDS[rng.random_range(0..WORDS.len())])
        } else {
            format!("{} {}", WORDS[rng.random_range(0..WORDS.len())], WORDS[rng.random_range(0..WORDS.len())])
        };
        out.push(record(&repo, &hash(repo_index, i), &parents, date, &message));
    }
    out.shuffle(rng);
    out
}

pub fn to_ndjson(records: &[CommitRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(&NdjsonRecord::from_record(r)).unwrap() + "\n")
        .collect()
}

/// Runs the CLI in-process, returning (exit code, stdout, stderr).
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["gitclock"];
    argv.extend_from_slice(args);
    let code = gitclock::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}
