// SPDX-License-Identifier: Apache-2.0

//! Per-repository commit DAG with a deterministic topological order.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use crate::model::CommitRecord;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("commit graph contains a cycle through {}", .0.join(" -> "))]
    CycleDetected(Vec<String>),
    #[error("records from several repositories given to one graph ({0} and {1})")]
    MixedRepositories(String, String),
    #[error("hash {0} appears twice; deduplicate first")]
    DuplicateHash(String),
}

#[derive(Debug, Clone)]
pub struct CommitGraph {
    pub repo_id: String,
    pub nodes: BTreeMap<String, CommitRecord>,
    /// child -> parents that resolve to nodes, in the child's parent order.
    pub edges: BTreeMap<String, Vec<String>>,
    /// `(child, missing parent)` pairs.
    pub dangling_parents: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParentDelta {
    pub child_hash: String,
    pub parent_hash: String,
    /// `parent.committer - child.committer`; positive means the parent is newer.
    pub delta_seconds: i64,
}

/// Builds the DAG for one repository. Missing parents are recorded, not fatal.
pub fn build_graph(records: Vec<CommitRecord>) -> Result<CommitGraph, GraphError> {
    let repo_id = records.first().map(|r| r.repo_id.clone()).unwrap_or_default();
    let mut nodes = BTreeMap::new();
    for r in records {
        if r.repo_id != repo_id {
            return Err(GraphError::MixedRepositories(repo_id, r.repo_id));
        }
        if nodes.contains_key(&r.hash) {
            return Err(GraphError::DuplicateHash(r.hash));
        }
        nodes.insert(r.hash.clone(), r);
    }

    let mut edges = BTreeMap::new();
    let mut dangling_parents = Vec::new();
    for (hash, r) in &nodes {
        let mut resolved = Vec::with_capacity(r.parents.len());
        for p in &r.parents {
            if nodes.contains_key(p) {
                resolved.push(p.clone());
            } else {
                dangling_parents.push((hash.clone(), p.clone()));
            }
        }
        edges.insert(hash.clone(), resolved);
    }

    let graph = CommitGraph {
        repo_id,
        nodes,
        edges,
        dangling_parents,
    };
    if let Some(cycle) = graph.find_cycle() {
        return Err(GraphError::CycleDetected(cycle));
    }
    Ok(graph)
}

/// Splits a mixed dataset by repository and builds one graph each, ordered
/// by repository id.
pub fn build_graphs(records: Vec<CommitRecord>) -> Result<Vec<CommitGraph>, GraphError> {
    let mut by_repo: BTreeMap<String, Vec<CommitRecord>> = BTreeMap::new();
    for r in records {
        by_repo.entry(r.repo_id.clone()).or_default().push(r);
    }
    by_repo.into_values().map(build_graph).collect()
}

impl CommitGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.values().map(Vec::len).sum()
    }

    /// Resolvable `(child, parent)` pairs.
    pub fn edge_pairs(&self) -> impl Iterator<Item = (&CommitRecord, &CommitRecord)> {
        self.edges.iter().flat_map(move |(child, parents)| {
            let c = &self.nodes[child];
            parents.iter().map(move |p| (c, &self.nodes[p]))
        })
    }

    fn children(&self) -> HashMap<&str, Vec<&str>> {
        let mut children: HashMap<&str, Vec<&str>> = HashMap::new();
        for (child, parents) in &self.edges {
            for p in parents {
                children.entry(p.as_str()).or_default().push(child.as_str());
            }
        }
        children
    }

    // Iterative three-colour DFS over child -> parent edges.
    fn find_cycle(&self) -> Option<Vec<String>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let mut mark: HashMap<&str, Mark> =
            self.nodes.keys().map(|k| (k.as_str(), Mark::New)).collect();
        for start in self.nodes.keys() {
            if mark[start.as_str()] != Mark::New {
                continue;
            }
            let mut stack: Vec<(&str, usize)> = vec![(start.as_str(), 0)];
            mark.insert(start.as_str(), Mark::Active);
            while let Some(top) = stack.last_mut() {
                let node = top.0;
                let parents = &self.edges[node];
                if top.1 < parents.len() {
                    let p = parents[top.1].as_str();
                    top.1 += 1;
                    match mark[p] {
                        Mark::New => {
                            mark.insert(p, Mark::Active);
                            stack.push((p, 0));
                        }
                        Mark::Active => {
                            let pos = stack.iter().position(|(n, _)| *n == p).expect("on stack");
                            let mut cycle: Vec<String> =
                                stack[pos..].iter().map(|(n, _)| n.to_string()).collect();
                            cycle.push(p.to_string());
                            return Some(cycle);
                        }
                        Mark::Done => {}
                    }
                } else {
                    mark.insert(node, Mark::Done);
                    stack.pop();
                }
            }
        }
        None
    }
}

/// Kahn's algorithm; among ready commits the one with the smallest
/// `(committer_date, hash)` goes first.
pub fn topological_order(graph: &CommitGraph) -> Vec<String> {
    let children = graph.children();
    let mut pending: HashMap<&str, usize> = graph
        .edges
        .iter()
        .map(|(c, ps)| (c.as_str(), ps.len()))
        .collect();
    let mut ready: BinaryHeap<Reverse<(i64, &str)>> = pending
        .iter()
        .filter(|(_, n)| **n == 0)
        .map(|(h, _)| Reverse((graph.nodes[*h].committer_date.epoch_seconds, *h)))
        .collect();

    let mut order = Vec::with_capacity(graph.len());
    while let Some(Reverse((_, hash))) = ready.pop() {
        order.push(hash.to_string());
        for &child in children.get(hash).map(Vec::as_slice).unwrap_or_default() {
            let n = pending.get_mut(child).expect("child is a node");
            *n -= 1;
            if *n == 0 {
                ready.push(Reverse((graph.nodes[child].committer_date.epoch_seconds, child)));
            }
        }
    }
    debug_assert_eq!(order.len(), graph.len(), "graph is acyclic by construction");
    order
}

/// The records of `graph` in [`topological_order`].
pub fn ordered_records(graph: &CommitGraph) -> Vec<&CommitRecord> {
    topological_order(graph)
        .iter()
        .map(|h| &graph.nodes[h])
        .collect()
}

/// Committer-date difference for every resolvable edge.
pub fn parent_deltas(graph: &CommitGraph) -> Vec<ParentDelta> {
    graph
        .edge_pairs()
        .map(|(child, parent)| ParentDelta {
            child_hash: child.hash.clone(),
            parent_hash: parent.hash.clone(),
            delta_seconds: parent.committer_date.epoch_seconds - child.committer_date.epoch_seconds,
        })
        .collect()
}
