// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;
use std::time::{Duration, Instant};

use gitclock::analytics::{delta_histogram, delta_statistics};
use gitclock::detect::{
    detect_future, detect_old, detect_out_of_order_linear, detect_out_of_order_parents,
    find_signatures, is_merge_message, DetectorConfig, ToolSignature,
};
use gitclock::filter::{apply_policy, filter_min_timestamp, FilterPolicy, Scope};
use gitclock::forge::{
    verify_anomalies, write_stub_directory, MetadataClient, MetadataSource, SourceKind, UreqClient,
};
use gitclock::graph::{build_graph, build_graphs, ordered_records};
use gitclock::ingest::deduplicate;
use gitclock::model::{
    format_utc, normalize_timestamp, Anomaly, CommitRecord, DateField, TimeUnit,
    Timestamp,
};
use gitclock::report::without_generated_at;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{cli, hash, random_dag, record, to_ndjson};

type Outcome = Result<String, String>;

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

// 1. Point checks on known old timestamps.
fn timestamp_point_checks() -> Outcome {
    let start = Instant::now();
    let t1905 = normalize_timestamp(-2_044_178_335_000_000, TimeUnit::Microseconds, 0);
    let s1905 = format_utc(t1905);
    check(s1905 == "1905-03-23 12:41:05 UTC", format!("-2044178335 s formatted as {s1905}"))?;
    let t = normalize_timestamp(1_000_000_000_000, TimeUnit::Microseconds, 0);
    check(t.epoch_seconds == 1_000_000, "10^12 us is not 10^6 s")?;
    let s = format_utc(t);
    check(s.starts_with("1970-01-12"), format!("10^6 s formatted as {s}"))?;
    check(s == "1970-01-12 13:46:40 UTC", format!("10^6 s formatted as {s}"))?;
    let epoch = record("o/r", &hash(0, 0), &[], 0, "x");
    let flagged = detect_old([&epoch], &DetectorConfig::default());
    check(flagged.len() == 1, "epoch 0 not flagged old under the default cutoff")?;
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("{s1905}; {s}; epoch 0 flagged; {elapsed:?}"))
}

/// Brute force over every edge of the raw records: child -> largest
/// parent-minus-child delta over strictly newer, non-merge-excluded parents.
fn brute_force_parents(records: &[CommitRecord], cfg: &DetectorConfig) -> BTreeMap<String, i64> {
    let mut expected = BTreeMap::new();
    for child in records {
        for p in &child.parents {
            let Some(parent) = records.iter().find(|r| &r.hash == p) else {
                continue;
            };
            let excluded = cfg.exclude_merges
                && (child.message.to_lowercase().contains("merge")
                    || parent.message.to_lowercase().contains("merge"));
            let delta = parent.committer_date.epoch_seconds - child.committer_date.epoch_seconds;
            if delta > 0 && !excluded {
                let e = expected.entry(child.hash.clone()).or_insert(delta);
                *e = (*e).max(delta);
            }
        }
    }
    expected
}

fn as_map(anomalies: &[Anomaly]) -> BTreeMap<String, i64> {
    anomalies
        .iter()
        .map(|a| (a.commit_hash.clone(), a.delta_seconds.unwrap()))
        .collect()
}

// 2. Parent detector against a brute-force edge scan.
fn detector_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut flagged = 0;
    for i in 0..1_000 {
        let n = rng.random_range(1..=50);
        let recs = random_dag(&mut rng, i, n);
        let cfg = DetectorConfig {
            exclude_merges: rng.random_bool(0.5),
            ..Default::default()
        };
        let got = detect_out_of_order_parents(&build_graph(recs.clone()).unwrap(), &cfg);
        check(got.len() == as_map(&got).len(), format!("fixture {i}: duplicate children"))?;
        let expected = brute_force_parents(&recs, &cfg);
        check(as_map(&got) == expected, format!("fixture {i}: detector disagrees with the edge scan"))?;
        flagged += expected.len();
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!("1000 DAGs, {flagged} flagged commits, all equal; {elapsed:?}"))
}

fn stub_client(dir: &std::path::Path) -> MetadataClient {
    let source = MetadataSource {
        kind: SourceKind::FileStub,
        endpoint: dir.to_string_lossy().into_owned(),
        auth_env: None,
    };
    MetadataClient::new(vec![source], Arc::new(UreqClient::new(Duration::from_secs(1)))).unwrap()
}

fn two_stage(records: &[CommitRecord], cfg: &DetectorConfig) -> (Vec<Anomaly>, Vec<Anomaly>, usize) {
    let dir = tempfile::tempdir().unwrap();
    write_stub_directory(dir.path(), records).unwrap();
    let client = stub_client(dir.path());
    let mut linear = Vec::new();
    let mut direct = Vec::new();
    for g in build_graphs(records.to_vec()).unwrap() {
        linear.extend(detect_out_of_order_linear(ordered_records(&g), cfg));
        direct.extend(detect_out_of_order_parents(&g, cfg));
    }
    direct.sort();
    let result = verify_anomalies(&linear, records, &client, cfg, 4);
    assert_eq!(client.stats().network_requests, 0);
    (result.confirmed, direct, linear.len())
}

// 3. Linear detection + verification against stubs equals direct parent detection.
fn two_stage_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = DetectorConfig::default();

    // Linear histories with a merge-shaped tail per repository.
    let mut records = Vec::new();
    for r in 0..40 {
        let repo = format!("chain/{r}");
        let len = rng.random_range(2..30);
        for i in 0..len {
            let parents = if i == 0 { vec![] } else { vec![hash(r, i - 1)] };
            let date = 1_400_000_000 + rng.random_range(0..200) * 3_600;
            records.push(record(&repo, &hash(r, i), &parents, date, "change"));
        }
        // Two branches off the tip joined by a commit older than one side.
        let tip = hash(r, len - 1);
        records.push(record(&repo, &hash(r, 100), std::slice::from_ref(&tip), 1_500_000_000, "side a"));
        records.push(record(&repo, &hash(r, 101), &[tip], 1_499_000_000, "side b"));
        records.push(record(&repo, &hash(r, 102), &[hash(r, 100), hash(r, 101)], 1_499_500_000, "combine"));
    }
    records.shuffle(&mut rng);
    let (confirmed, direct, candidates) = two_stage(&records, &cfg);
    check(!direct.is_empty(), "fixture has no out-of-order commits")?;
    check(
        confirmed == direct,
        format!("verified {} != direct {}", confirmed.len(), direct.len()),
    )?;

    // On arbitrary DAGs the linear walk can miss a child whose newer parent
    // was not visited just before it, so only inclusion holds there.
    let mut subset_checked = 0;
    for i in 0..100 {
        let n = rng.random_range(1..=30);
        let recs = random_dag(&mut rng, 1_000 + i, n);
        let (confirmed, direct, _) = two_stage(&recs, &cfg);
        let direct: BTreeSet<Anomaly> = direct.into_iter().collect();
        check(
            confirmed.iter().all(|a| direct.contains(a)),
            format!("random DAG {i}: verified anomaly missing from direct detection"),
        )?;
        subset_checked += 1;
    }
    Ok(format!(
        "{candidates} linear candidates -> {} confirmed = direct; inclusion held on {subset_checked} random DAGs",
        confirmed.len()
    ))
}

fn write(dir: &std::path::Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn linear_count(report: &str) -> u64 {
    let doc: serde_json::Value = serde_json::from_str(report).unwrap();
    doc["summary"]["by_kind"]["out_of_order_linear"]["commits"].as_u64().unwrap()
}

// 4. Merge exclusion in the linear walk, toggled from the command line.
fn merge_exclusion() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut lines = Vec::new();
    for (i, msg) in ["Merge branch 'dev'", "MERGE pull request", "merged upstream"].iter().enumerate() {
        let parent = record("o/r", &hash(i, 0), &[], 2_000, msg);
        let child = record("o/r", &hash(i, 1), std::slice::from_ref(&parent.hash), 1_000, "fix");
        let path = write(dir.path(), &format!("f{i}.ndjson"), &to_ndjson(&[parent, child]));
        let (code, excluded, _) = cli(&["scan", &path, "--detectors", "ooo"]);
        check(code == 0, format!("`{msg}`: exit {code} with merges excluded"))?;
        check(linear_count(&excluded) == 0, format!("`{msg}`: flagged with merges excluded"))?;
        let (code, included, _) = cli(&["scan", &path, "--detectors", "ooo", "--include-merges"]);
        check(code == 1, format!("`{msg}`: exit {code} with --include-merges"))?;
        check(linear_count(&included) == 1, format!("`{msg}`: not flagged exactly once with --include-merges"))?;
        lines.push(msg.to_string());
    }
    // Either side of the pair triggers the exclusion.
    let parent = record("o/r", &hash(9, 0), &[], 2_000, "fix");
    let child = record("o/r", &hash(9, 1), std::slice::from_ref(&parent.hash), 1_000, "Merge remote-tracking branch");
    let path = write(dir.path(), "child.ndjson", &to_ndjson(&[parent, child]));
    check(linear_count(&cli(&["scan", &path, "--detectors", "ooo"]).1) == 0, "child-side merge not excluded")?;
    check(
        linear_count(&cli(&["scan", &path, "--detectors", "ooo", "--include-merges"]).1) == 1,
        "child-side merge not flagged with --include-merges",
    )?;
    Ok(format!("0 excluded / 1 included for {} parent-side and 1 child-side fixtures", lines.len()))
}

// 5. Strict comparisons at every cutoff.
fn boundary_contracts() -> Outcome {
    let snapshot = Timestamp::utc(1_572_480_000);
    let cfg = DetectorConfig::with_snapshot(snapshot);
    let old = cfg.old_cutoff.epoch_seconds;
    let at_old = record("o/r", &hash(0, 0), &[], old, "x");
    let before_old = record("o/r", &hash(0, 1), &[], old - 1, "x");
    check(detect_old([&at_old], &cfg).is_empty(), "commit at the old cutoff flagged")?;
    check(detect_old([&before_old], &cfg).len() == 1, "commit 1 s before the old cutoff not flagged")?;

    let at_future = record("o/r", &hash(0, 2), &[], snapshot.epoch_seconds, "x");
    let after_future = record("o/r", &hash(0, 3), &[], snapshot.epoch_seconds + 1, "x");
    check(detect_future([&at_future], &cfg).unwrap().is_empty(), "commit at the snapshot flagged")?;
    check(detect_future([&after_future], &cfg).unwrap().len() == 1, "commit 1 s after the snapshot not flagged")?;

    let p = record("o/r", &hash(1, 0), &[], 1_500_000_000, "x");
    let equal = record("o/r", &hash(1, 1), std::slice::from_ref(&p.hash), 1_500_000_000, "x");
    let g = build_graph(vec![p.clone(), equal]).unwrap();
    check(detect_out_of_order_parents(&g, &cfg).is_empty(), "equal-time parent edge flagged")?;
    check(detect_out_of_order_linear(ordered_records(&g), &cfg).is_empty(), "equal-time linear pair flagged")?;
    let older = record("o/r", &hash(1, 1), std::slice::from_ref(&p.hash), 1_499_999_999, "x");
    let g = build_graph(vec![p, older]).unwrap();
    check(detect_out_of_order_parents(&g, &cfg).len() == 1, "1 s older child not flagged")?;

    // Same contracts through the filters.
    let (kept, _) = filter_min_timestamp(vec![record("o/r", &hash(2, 0), &[], 1, "x")], 1, DateField::Committer);
    check(kept.len() == 1, "min_timestamp removed a commit at the threshold")?;
    Ok("cutoffs and equal timestamps never flagged; one second past each is".into())
}

fn policies(rng: &mut impl Rng, repos: &[String]) -> Vec<FilterPolicy> {
    vec![
        FilterPolicy::MinTimestamp { min_ts: 1_000_000_000 + rng.random_range(0..40) * 60 },
        FilterPolicy::BeforeDate {
            cutoff: Timestamp::utc(1_000_000_000 + rng.random_range(0..40) * 60),
        },
        FilterPolicy::ProjectBlocklist {
            blocklist: repos.iter().filter(|_| rng.random_bool(0.3)).cloned().collect(),
        },
        FilterPolicy::DropOutOfOrder { scope: Scope::Commit },
        FilterPolicy::DropOutOfOrder { scope: Scope::Project },
        FilterPolicy::MinStars { min_stars: rng.random_range(0..100) },
        FilterPolicy::TopKStars { k: rng.random_range(1..4) },
    ]
}

fn parent_anomalies(records: &[CommitRecord], cfg: &DetectorConfig) -> usize {
    build_graphs(records.to_vec())
        .unwrap()
        .iter()
        .map(|g| detect_out_of_order_parents(g, cfg).len())
        .sum()
}

// 6. Ledger balance for every policy, and the out-of-order fixed point.
fn filter_ledger_balance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut ledgers = 0;
    for f in 0..200 {
        let mut records = Vec::new();
        let mut repos = Vec::new();
        for r in 0..rng.random_range(1..5) {
            let mut dag = { let n = rng.random_range(1..25); random_dag(&mut rng, f * 10 + r, n) };
            let stars = rng.random_bool(0.8).then(|| rng.random_range(0..200));
            for c in &mut dag {
                c.stars = stars;
            }
            repos.push(dag[0].repo_id.clone());
            records.extend(dag);
        }
        let cfg = DetectorConfig {
            exclude_merges: rng.random_bool(0.5),
            ..Default::default()
        };
        for policy in policies(&mut rng, &repos) {
            let (kept, ledger) = apply_policy(records.clone(), &policy, &cfg).unwrap();
            check(
                ledger.removed_commits + ledger.retained_commits == ledger.input_commits
                    && ledger.input_commits == records.len()
                    && ledger.retained_commits == kept.len(),
                format!("fixture {f}: ledger does not balance for {policy:?}"),
            )?;
            ledgers += 1;
            if policy == (FilterPolicy::DropOutOfOrder { scope: Scope::Commit }) {
                let left = parent_anomalies(&kept, &cfg);
                check(left == 0, format!("fixture {f}: {left} out-of-order commits after filtering"))?;
            }
        }
    }

    // The same fixed point through scan | filter | scan.
    let dir = tempfile::tempdir().unwrap();
    let mut records = Vec::new();
    for r in 0..5 {
        records.extend(random_dag(&mut rng, 9_000 + r, 40));
    }
    let input = write(dir.path(), "in.ndjson", &to_ndjson(&records));
    let policy = write(dir.path(), "p.toml", "[[policy]]\nkind = \"drop_out_of_order\"\nscope = \"commit\"\n");
    let out = dir.path().join("clean.ndjson").to_string_lossy().into_owned();
    let (before, report, _) = cli(&["scan", &input, "--detectors", "ooo"]);
    let flagged_before = serde_json::from_str::<serde_json::Value>(&report).unwrap()["summary"]["by_kind"]
        ["out_of_order_parent"]["commits"]
        .as_u64()
        .unwrap();
    let (code, _, _) = cli(&["filter", &input, "--policy-file", &policy, "-o", &out]);
    check(code == 0, format!("filter exited {code}"))?;
    let (_, report, _) = cli(&["scan", &out, "--detectors", "ooo"]);
    let flagged_after = serde_json::from_str::<serde_json::Value>(&report).unwrap()["summary"]["by_kind"]
        ["out_of_order_parent"]["commits"]
        .as_u64()
        .unwrap();
    check(before == 1 && flagged_before > 0, "CLI fixture has no out-of-order commits")?;
    check(flagged_after == 0, format!("{flagged_after} out-of-order commits after scan|filter|scan"))?;
    Ok(format!("{ledgers} ledgers balanced; fixed point held (CLI: {flagged_before} -> 0)"))
}

/// Every row of the old-timestamp table: (count, raw microseconds).
const OLD_TIMESTAMPS: &[(usize, i64)] = &[
    (1, -2_044_178_335_000_000),
    (3576, 0),
    (1, 730_000_000),
    (1, 956_000_000),
    (1, 1_585_000_000),
    (1, 1_601_000_000),
    (1, 1_627_000_000),
    (1, 3_495_000_000),
    (1, 3_523_000_000),
    (1, 7_403_000_000),
    (1, 7_558_000_000),
    (1, 7_923_000_000),
    (1, 88_210_000_000),
    (2, 88_211_000_000),
    (3, 88_212_000_000),
    (2, 88_213_000_000),
    (1, 127_771_000_000),
    (1, 179_895_000_000),
    (1, 255_447_000_000),
    (11, 1_000_000_000_000),
    (1, 315_772_873_000_000),
    (1, 566_635_987_000_000),
    (1, 589_770_257_000_000),
];

// 7. Share of old commits removed by the "timestamp < 1" filter.
fn min_timestamp_efficacy() -> Outcome {
    let mut records = Vec::new();
    for &(count, micros) in OLD_TIMESTAMPS {
        for _ in 0..count {
            let i = records.len();
            let mut r = record(&format!("java/p{}", i % 51), &hash(7, i), &[], 0, "import");
            r.committer_date = normalize_timestamp(micros, TimeUnit::Microseconds, 0);
            r.author_date = r.committer_date;
            records.push(r);
        }
    }
    check(records.len() == 3612, format!("fixture has {} commits", records.len()))?;
    let old = detect_old(&records, &DetectorConfig::default());
    check(old.len() == 3612, format!("{} of 3612 flagged old", old.len()))?;
    let flagged: Vec<CommitRecord> = records
        .into_iter()
        .filter(|r| old.iter().any(|a| a.commit_hash == r.hash))
        .collect();
    let (_, ledger) = filter_min_timestamp(flagged, 1, DateField::Committer);
    let pct = 100.0 * ledger.removed_fraction();
    let detail = format!("{} of {} removed = {pct:.3}%", ledger.removed_commits, ledger.input_commits);
    check(pct >= 98.0, format!("{detail}, below 98%"))?;
    check(
        (pct - 98.0).abs() <= 1.0,
        format!("{detail}, outside 98% +/- 1 point (off by {:.3} points)", (pct - 98.0).abs() - 1.0),
    )?;
    Ok(detail)
}

fn sorted_median(v: &[i64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_unstable();
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2] as f64
    } else {
        (s[n / 2 - 1] as f64 + s[n / 2] as f64) / 2.0
    }
}

// 8. Histogram sums and the median against a sort-based oracle.
fn histogram_stats_integrity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..1_000 {
        let n = rng.random_range(1..300);
        let v: Vec<i64> = (0..n)
            .map(|_| match rng.random_range(0..3) {
                0 => rng.random_range(1..100),
                1 => rng.random_range(1..40_000_000),
                _ => rng.random_range(-1_000_000_000_000..1_000_000_000_000),
            })
            .collect();
        let h = delta_histogram(&v).unwrap();
        check(h.total() == v.len(), format!("vector {i}: histogram sums to {} not {}", h.total(), v.len()))?;
        let got = delta_statistics(&v).unwrap().p50;
        let want = sorted_median(&v);
        let tol = 1e-9 * want.abs().max(1.0);
        check((got - want).abs() <= tol, format!("vector {i}: median {got} vs oracle {want}"))?;
    }
    // Histogram over detector output sums to the anomaly count.
    let recs = random_dag(&mut rng, 1, 50);
    let found = detect_out_of_order_parents(&build_graph(recs).unwrap(), &DetectorConfig::default());
    let deltas: Vec<i64> = found.iter().filter_map(|a| a.delta_seconds).collect();
    if !deltas.is_empty() {
        check(delta_histogram(&deltas).unwrap().total() == found.len(), "histogram != anomaly count")?;
    }
    Ok("1000 vectors: sums exact, medians within 1e-9".into())
}

// 9. Byte-identical scan and stats output for reordered input.
fn determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut records = Vec::new();
    for r in 0..12 {
        records.extend({ let n = rng.random_range(5..40); random_dag(&mut rng, r, n) });
    }
    for r in records.iter_mut().step_by(17) {
        r.committer_date = Timestamp::utc(0);
        r.message.push_str("\n\ngit-svn-id: svn://example/trunk@1 abc");
    }
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.ndjson").to_string_lossy().into_owned();
    let mut outputs = Vec::new();
    for run in 0..3 {
        // Runs 0 and 1 read the same permutation, run 2 a different one.
        if run != 1 {
            records.shuffle(&mut rng);
            std::fs::write(&input, to_ndjson(&records)).unwrap();
        }
        let report = dir.path().join(format!("r{run}.json"));
        let report = report.to_string_lossy().into_owned();
        let (code, _, _) = cli(&[
            "scan", &input, "--snapshot-date", "2019-10-31", "--report", &report, "--workers", "3",
        ]);
        check(code == 1, format!("scan exited {code}"))?;
        let stats = dir.path().join(format!("s{run}.json")).to_string_lossy().into_owned();
        let (code, _, _) = cli(&["stats", &report, "-o", &stats]);
        check(code == 0, format!("stats exited {code}"))?;
        outputs.push((
            without_generated_at(&std::fs::read_to_string(&report).unwrap()),
            without_generated_at(&std::fs::read_to_string(&stats).unwrap()),
        ));
    }
    check(outputs[0] == outputs[1], "same input, different reports")?;
    check(outputs[0] == outputs[2], "shuffled input, different reports")?;
    Ok(format!("3 runs identical ({} report bytes)", outputs[0].0.len()))
}

// 10. Dedup removes nothing on a second pass and accounts for every drop.
fn dedup_idempotence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut planted_total = 0;
    for f in 0..200 {
        let base = { let n = rng.random_range(1..40); random_dag(&mut rng, f, n) };
        let mut records = base.clone();
        let mut planted = 0;
        for _ in 0..rng.random_range(0..20) {
            let mut dup = base[rng.random_range(0..base.len())].clone();
            if rng.random_bool(0.3) {
                dup.committer_date = Timestamp::utc(dup.committer_date.epoch_seconds + 1);
            }
            records.insert(rng.random_range(0..=records.len()), dup);
            planted += 1;
        }
        let (once, report) = deduplicate(records.clone());
        check(once.len() == base.len(), format!("fixture {f}: {} unique, expected {}", once.len(), base.len()))?;
        check(
            report.total_in == records.len()
                && report.unique_out + report.dropped() == report.total_in
                && report.dropped() == planted,
            format!("fixture {f}: dedup ledger does not balance"),
        )?;
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for r in &records {
            *counts.entry(&r.hash).or_default() += 1;
        }
        let dup_hashes: BTreeSet<(&str, usize)> = counts.into_iter().filter(|(_, n)| *n > 1).collect();
        let reported: BTreeSet<(&str, usize)> =
            report.duplicate_hashes.iter().map(|(h, n)| (h.as_str(), *n)).collect();
        check(dup_hashes == reported, format!("fixture {f}: duplicate list differs from count oracle"))?;
        // The kept copy is the first occurrence.
        for r in &once {
            let first = records.iter().find(|x| x.hash == r.hash).unwrap();
            check(first == r, format!("fixture {f}: kept a later duplicate"))?;
        }
        let (twice, second) = deduplicate(once.clone());
        check(twice == once && second.dropped() == 0, format!("fixture {f}: second pass removed records"))?;
        planted_total += planted;
    }
    Ok(format!("200 fixtures, {planted_total} planted duplicates accounted for"))
}

// 11. Signature recall on planted footers and silence on clean messages.
fn signature_recall() -> Outcome {
    let planted: &[(&str, ToolSignature)] = &[
        ("Import trunk\n\ngit-svn-id: https://svn.example.org/repo/trunk@1234 6f1e-4a", ToolSignature::GitSvnId),
        ("Fix NPE in parser\n\nChange-Id: I8f2a9c0d4e5b6a7f8c9d0e1f2a3b4c5d6e7f8a9b", ToolSignature::ChangeId),
        ("Tidy docs\n\nReviewed-by: Jane Doe <jane@example.org>", ToolSignature::ReviewedBy),
        ("Bug 123 - crash\n\n--HG--\nextra : rebase_source : abc\nrebase_source: 0123abcd", ToolSignature::RebaseSource),
        ("Convert from hg repository", ToolSignature::Hg),
        ("imported from hg-git mirror", ToolSignature::Hg),
        ("[HG] sync", ToolSignature::Hg),
        ("Internal change\n\nMOE_MIGRATED_REVID=12345678", ToolSignature::Moe),
        ("Project import generated by Copybara / MOE.", ToolSignature::Moe),
    ];
    let mut found = 0;
    for (msg, sig) in planted {
        check(find_signatures(msg).contains(sig), format!("{} missed in {msg:?}", sig.name()))?;
        found += 1;
    }
    for sig in ToolSignature::ALL {
        check(planted.iter().any(|(_, s)| *s == sig), format!("{} not planted", sig.name()))?;
    }

    let traps = [
        "Take the highway exit",
        "thoughts on the change",
        "Moebius strip renderer",
        "reviewed by the team",
        "rebase source branch",
        "git svn id mapping",
        "change-id handling in lowercase",
        "Shghai typo fix",
        "Merge branch 'moetools'",
        "chg: bump version",
    ];
    let words = ["fix", "add", "update", "remove", "docs", "tests", "build", "highway", "thought", "phone"];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut clean: Vec<String> = traps.iter().map(|s| s.to_string()).collect();
    while clean.len() < 100 {
        let n = rng.random_range(2..8);
        let msg: Vec<&str> = (0..n).map(|_| words[rng.random_range(0..words.len())]).collect();
        clean.push(msg.join(" "));
    }
    let hits: Vec<&String> = clean.iter().filter(|m| !find_signatures(m).is_empty()).collect();
    check(hits.is_empty(), format!("false positives: {hits:?}"))?;
    check(!is_merge_message("highway"), "sanity")?;
    Ok(format!("{found}/{} planted found, 0 hits on {} clean messages", planted.len(), clean.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("timestamp point checks", timestamp_point_checks),
        ("detector oracle equivalence", detector_oracle_equivalence),
        ("two-stage pipeline equivalence", two_stage_equivalence),
        ("merge-exclusion semantics", merge_exclusion),
        ("boundary contracts", boundary_contracts),
        ("filter ledger balance and fixed point", filter_ledger_balance),
        ("min-timestamp efficacy", min_timestamp_efficacy),
        ("histogram and stats integrity", histogram_stats_integrity),
        ("determinism", determinism),
        ("dedup idempotence", dedup_idempotence),
        ("signature recall", signature_recall),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(run)
            .unwrap_or_else(|_| Err("panicked".to_string()));
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
