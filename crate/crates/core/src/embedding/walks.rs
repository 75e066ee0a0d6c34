use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EmbeddingError;
use crate::kg::KnowledgeGraph;

/// Undirected, unweighted view of a graph used for walking. Neighbour lists are sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkGraph {
    ids: Vec<String>,
    neighbors: Vec<Vec<usize>>,
}

impl WalkGraph {
    pub fn from_edges(ids: Vec<String>, edges: &[(usize, usize)]) -> Self {
        let mut neighbors = vec![Vec::new(); ids.len()];
        for &(a, b) in edges {
            if a == b {
                continue;
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Self { ids, neighbors }
    }

    /// Collapses parallel and reverse relations into a single undirected edge.
    pub fn from_knowledge_graph(graph: &KnowledgeGraph) -> Self {
        let ids: Vec<String> = graph.entities().map(|e| e.id.as_str().to_string()).collect();
        let index = |id: &str| ids.binary_search_by(|probe| probe.as_str().cmp(id)).ok();
        let edges: Vec<(usize, usize)> = graph
            .relations()
            .filter_map(|r| Some((index(r.subject.as_str())?, index(r.object.as_str())?)))
            .collect();
        Self::from_edges(ids, &edges)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    /// Return parameter: weight 1/p for stepping back to the previous node.
    pub p: f64,
    /// In-out parameter: weight 1/q for moving away from the previous node.
    pub q: f64,
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            p: 1.0,
            q: 1.0,
            walks_per_node: 10,
            walk_length: 40,
            seed: 42,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        let ok = self.p.is_finite()
            && self.p > 0.0
            && self.q.is_finite()
            && self.q > 0.0
            && self.walks_per_node >= 1
            && self.walk_length >= 1;
        if ok {
            Ok(())
        } else {
            Err(EmbeddingError::InvalidConfig(format!("{self:?}")))
        }
    }
}

/// Walks as index sequences into `ids`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkCorpus {
    pub ids: Vec<String>,
    pub walks: Vec<Vec<u32>>,
}

impl WalkCorpus {
    pub fn walk_ids(&self, walk: usize) -> Vec<&str> {
        self.walks[walk]
            .iter()
            .map(|&i| self.ids[i as usize].as_str())
            .collect()
    }
}

/// Draws the next node of a second-order walk.
///
/// With no previous node the step is uniform over neighbours. Otherwise each
/// candidate `x` gets weight `1/p` if it is the previous node, `1` if it is
/// adjacent to the previous node and `1/q` otherwise.
pub fn next_step<R: Rng>(
    graph: &WalkGraph,
    previous: Option<usize>,
    current: usize,
    p: f64,
    q: f64,
    rng: &mut R,
) -> Option<usize> {
    let candidates = graph.neighbors(current);
    if candidates.is_empty() {
        return None;
    }
    let Some(prev) = previous else {
        return Some(candidates[rng.gen_range(0..candidates.len())]);
    };
    let weight = |x: usize| {
        if x == prev {
            1.0 / p
        } else if graph.has_edge(x, prev) {
            1.0
        } else {
            1.0 / q
        }
    };
    let total: f64 = candidates.iter().map(|&x| weight(x)).sum();
    let mut draw = rng.gen::<f64>() * total;
    for &x in candidates {
        draw -= weight(x);
        if draw < 0.0 {
            return Some(x);
        }
    }
    candidates.last().copied()
}

pub(crate) fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in *part {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn walk_seed(global: u64, node_id: &str, walk_index: usize) -> u64 {
    fnv1a(&[
        &global.to_le_bytes(),
        node_id.as_bytes(),
        &(walk_index as u64).to_le_bytes(),
    ])
}

/// `walks_per_node` walks from every node, ordered by walk round then node index.
/// Each walk has its own seeded generator, so the parallel result is reproducible.
pub fn generate_walks(graph: &WalkGraph, config: &WalkConfig) -> Result<WalkCorpus, EmbeddingError> {
    config.validate()?;
    if graph.is_empty() {
        return Err(EmbeddingError::EmptyGraph);
    }
    let jobs: Vec<(usize, usize)> = (0..config.walks_per_node)
        .flat_map(|round| (0..graph.len()).map(move |node| (round, node)))
        .collect();
    let walks = jobs
        .par_iter()
        .map(|&(round, start)| {
            let mut rng = ChaCha8Rng::seed_from_u64(walk_seed(config.seed, &graph.ids[start], round));
            let mut walk = Vec::with_capacity(config.walk_length);
            walk.push(start as u32);
            let mut previous = None;
            let mut current = start;
            while walk.len() < config.walk_length {
                match next_step(graph, previous, current, config.p, config.q, &mut rng) {
                    Some(next) => {
                        walk.push(next as u32);
                        previous = Some(current);
                        current = next;
                    }
                    None => break,
                }
            }
            walk
        })
        .collect();
    Ok(WalkCorpus {
        ids: graph.ids.clone(),
        walks,
    })
}
