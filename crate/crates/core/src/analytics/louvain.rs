//! Two-phase Louvain community detection on weighted modularity.
//!
//! Phase one moves single nodes to the neighbouring community with the best
//! modularity gain until a full pass changes nothing; phase two collapses
//! each community into a super-node (internal weight kept as a self-loop)
//! and repeats on the smaller graph. Node visiting order is the ascending
//! label order shuffled by a caller-supplied seed, so a `(graph, seed)` pair
//! always yields the same partition. A few restarts are run from the same
//! seeded stream and the highest-modularity result kept, since a
//! single greedy pass can settle well below the optimum on small graphs.
//! Once the levels converge, node moves are retried on the original graph
//! from the final partition before aggregating again. The best partition is
//! then perturbed (a random quarter of nodes reassigned) and re-optimised
//! until a run of perturbations brings no gain.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicBool, Ordering};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Partition, WeightedGraph};

use super::AnalyticsError;

const GAIN_EPS: f64 = 1e-12;
const RESTARTS: usize = 4;
const MAX_PERTURBATIONS: usize = 256;
const PATIENCE: usize = 96;
const MAX_REFINEMENTS: usize = 32;

/// Newman weighted modularity of `partition` over `graph`.
pub fn modularity(graph: &WeightedGraph, partition: &Partition) -> Result<f64, AnalyticsError> {
    let m = graph.total_weight();
    if m <= 0.0 {
        return Err(AnalyticsError::UndefinedModularity);
    }
    for n in graph.nodes() {
        if !partition.assignment.contains_key(n) {
            return Err(AnalyticsError::UnassignedNode(n.to_string()));
        }
    }
    let mut internal: BTreeMap<usize, f64> = BTreeMap::new();
    let mut degree: BTreeMap<usize, f64> = BTreeMap::new();
    for (a, b, w) in graph.edges() {
        let (ca, cb) = (partition.assignment[a], partition.assignment[b]);
        if ca == cb {
            *internal.entry(ca).or_default() += w;
        }
        *degree.entry(ca).or_default() += w;
        *degree.entry(cb).or_default() += w;
    }
    let two_m = 2.0 * m;
    let q = degree
        .iter()
        .map(|(c, d)| internal.get(c).copied().unwrap_or(0.0) / m - (d / two_m).powi(2))
        .sum();
    Ok(q)
}

/// Raised when a cancellable run observes its cancel flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("community detection cancelled")]
pub struct Cancelled;

/// Runs Louvain with a fixed seed. An edgeless graph yields singleton
/// communities with modularity 0.
pub fn louvain(graph: &WeightedGraph, seed: u64) -> Partition {
    let never = AtomicBool::new(false);
    louvain_cancellable(graph, seed, &never).expect("never cancelled")
}

/// As [`louvain`], checking `cancel` between node passes.
pub fn louvain_cancellable(graph: &WeightedGraph, seed: u64, cancel: &AtomicBool) -> Result<Partition, Cancelled> {
    let labels: Vec<&str> = graph.nodes().collect();
    let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    let mut base = Level::new(labels.len());
    for (a, b, w) in graph.edges() {
        base.add_edge(index[a], index[b], w);
    }
    let n = labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut best = base.optimise((0..n).collect(), &mut rng, cancel)?;
    let mut best_q = base.quality(&best);
    let mut consider = |candidate: Vec<usize>, best: &mut Vec<usize>| {
        let q = base.quality(&candidate);
        let better = q > best_q + GAIN_EPS;
        if better {
            *best = candidate;
            best_q = q;
        }
        better
    };
    for _ in 1..RESTARTS {
        let candidate = base.optimise((0..n).collect(), &mut rng, cancel)?;
        consider(candidate, &mut best);
    }
    let mut stale = 0;
    for _ in 0..MAX_PERTURBATIONS {
        if stale == PATIENCE {
            break;
        }
        let candidate = base.optimise(perturb(&best, &mut rng), &mut rng, cancel)?;
        stale = if consider(candidate, &mut best) { 0 } else { stale + 1 };
    }

    // ids by first appearance in label order
    let mut relabel: HashMap<usize, usize> = HashMap::new();
    let assignment: BTreeMap<String, usize> = labels
        .iter()
        .zip(&best)
        .map(|(l, c)| {
            let next = relabel.len();
            (l.to_string(), *relabel.entry(*c).or_insert(next))
        })
        .collect();
    let mut partition = Partition { assignment, modularity: 0.0 };
    partition.modularity = modularity(graph, &partition).unwrap_or(0.0);
    Ok(partition)
}

/// Moves a random quarter of the nodes to a random community, possibly a
/// fresh one.
fn perturb(membership: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = membership.len();
    let used: BTreeSet<usize> = membership.iter().copied().collect();
    let mut choices: Vec<usize> = used.iter().copied().collect();
    if let Some(fresh) = (0..n).find(|c| !used.contains(c)) {
        choices.push(fresh);
    }
    membership
        .iter()
        .map(|&c| if rng.gen_bool(0.25) { *choices.choose(rng).unwrap_or(&c) } else { c })
        .collect()
}

struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    self_loops: Vec<f64>,
    degree: Vec<f64>,
}

impl Level {
    fn new(n: usize) -> Self {
        Level { adj: vec![Vec::new(); n], self_loops: vec![0.0; n], degree: vec![0.0; n] }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    /// Full Louvain from `membership`: node moves then aggregation until no
    /// level moves, then node moves on this level again from the result.
    fn optimise(
        &self,
        mut membership: Vec<usize>,
        rng: &mut ChaCha8Rng,
        cancel: &AtomicBool,
    ) -> Result<Vec<usize>, Cancelled> {
        for _ in 0..MAX_REFINEMENTS {
            let (moved, community) = self.local_moving(membership.clone(), rng, cancel)?;
            if !moved {
                break;
            }
            let (mut level, renumber) = self.aggregate(&community);
            membership = community.iter().map(|c| renumber[*c]).collect();
            loop {
                let (moved, community) = level.local_moving((0..level.len()).collect(), rng, cancel)?;
                if !moved {
                    break;
                }
                let (next, renumber) = level.aggregate(&community);
                for m in membership.iter_mut() {
                    *m = renumber[community[*m]];
                }
                level = next;
            }
        }
        Ok(membership)
    }

    fn quality(&self, community: &[usize]) -> f64 {
        let two_m: f64 = self.degree.iter().sum();
        if two_m <= 0.0 {
            return 0.0;
        }
        let mut internal = vec![0.0f64; self.len()];
        let mut tot = vec![0.0f64; self.len()];
        for i in 0..self.len() {
            let c = community[i];
            tot[c] += self.degree[i];
            internal[c] += 2.0 * self.self_loops[i];
            for &(j, w) in &self.adj[i] {
                if community[j] == c {
                    internal[c] += w;
                }
            }
        }
        internal.iter().zip(&tot).map(|(i, t)| i / two_m - (t / two_m).powi(2)).sum()
    }

    fn add_edge(&mut self, a: usize, b: usize, w: f64) {
        if a == b {
            self.self_loops[a] += w;
            self.degree[a] += 2.0 * w;
        } else {
            self.adj[a].push((b, w));
            self.adj[b].push((a, w));
            self.degree[a] += w;
            self.degree[b] += w;
        }
    }

    /// Greedy single-node moves starting from `community` (ids below `len`).
    fn local_moving(
        &self,
        mut community: Vec<usize>,
        rng: &mut ChaCha8Rng,
        cancel: &AtomicBool,
    ) -> Result<(bool, Vec<usize>), Cancelled> {
        let n = self.len();
        let two_m: f64 = self.degree.iter().sum();
        if two_m <= 0.0 {
            return Ok((false, community));
        }
        let mut tot = vec![0.0f64; n];
        let mut size = vec![0usize; n];
        for (i, c) in community.iter().enumerate() {
            tot[*c] += self.degree[i];
            size[*c] += 1;
        }
        let mut empty: BTreeSet<usize> = (0..n).filter(|c| size[*c] == 0).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);

        let mut links = vec![0.0f64; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut any_move = false;
        loop {
            if cancel.load(Ordering::Relaxed) {
                return Err(Cancelled);
            }
            let mut moved = false;
            for &i in &order {
                let ci = community[i];
                let ki = self.degree[i];
                for &(j, w) in &self.adj[i] {
                    let cj = community[j];
                    if links[cj] == 0.0 {
                        touched.push(cj);
                    }
                    links[cj] += w;
                }
                tot[ci] -= ki;
                size[ci] -= 1;
                let mut best = ci;
                let mut best_gain = links[ci] - tot[ci] * ki / two_m;
                touched.sort_unstable();
                for &c in &touched {
                    let gain = links[c] - tot[c] * ki / two_m;
                    if gain > best_gain + GAIN_EPS {
                        best = c;
                        best_gain = gain;
                    }
                }
                // splitting off alone scores zero
                if size[ci] > 0 && 0.0 > best_gain + GAIN_EPS {
                    if let Some(&c) = empty.iter().next() {
                        best = c;
                    }
                }
                tot[best] += ki;
                size[best] += 1;
                if best != ci {
                    community[i] = best;
                    empty.remove(&best);
                    if size[ci] == 0 {
                        empty.insert(ci);
                    }
                    moved = true;
                }
                for c in touched.drain(..) {
                    links[c] = 0.0;
                }
            }
            if !moved {
                break;
            }
            any_move = true;
        }
        Ok((any_move, community))
    }

    /// Collapses communities into nodes; returns the new level and the map
    /// from old community id to new node id.
    fn aggregate(&self, community: &[usize]) -> (Level, Vec<usize>) {
        let mut renumber = vec![usize::MAX; self.len()];
        let mut k = 0;
        for &c in community {
            if renumber[c] == usize::MAX {
                renumber[c] = k;
                k += 1;
            }
        }
        let mut next = Level::new(k);
        let mut weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for i in 0..self.len() {
            let ci = renumber[community[i]];
            if self.self_loops[i] > 0.0 {
                *weights.entry((ci, ci)).or_default() += self.self_loops[i];
            }
            for &(j, w) in &self.adj[i] {
                // each undirected edge appears twice in adjacency lists
                if i < j {
                    let cj = renumber[community[j]];
                    let key = if ci <= cj { (ci, cj) } else { (cj, ci) };
                    *weights.entry(key).or_default() += w;
                }
            }
        }
        for ((a, b), w) in weights {
            next.add_edge(a, b, w);
        }
        (next, renumber)
    }
}
