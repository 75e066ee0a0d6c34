use std::cmp::Reverse;
use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{Entity, EntityId, EntityType, KgError, KnowledgeGraph, Relation, RelationId};

/// Closed subgraph around a focus entity: every relation has both endpoints present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subgraph {
    pub focus: EntityId,
    pub entities: BTreeMap<EntityId, Entity>,
    /// Hop distance of each retained entity from the focus.
    pub distances: BTreeMap<EntityId, usize>,
    pub relations: BTreeMap<RelationId, Relation>,
}

impl Subgraph {
    pub fn contains(&self, id: &EntityId) -> bool {
        self.entities.contains_key(id)
    }

    pub fn incident<'a>(&'a self, id: &'a EntityId) -> impl Iterator<Item = &'a Relation> + 'a {
        self.relations.values().filter(move |r| r.touches(id))
    }

    pub fn entities_of_type<'a>(
        &'a self,
        entity_type: &'a EntityType,
    ) -> impl Iterator<Item = &'a Entity> + 'a {
        self.entities
            .values()
            .filter(move |e| &e.entity_type == entity_type)
    }

    /// All literature PMIDs cited by the subgraph's relations, sorted and unique.
    pub fn pmids(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .relations
            .values()
            .flat_map(|r| r.pmids().map(str::to_string))
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

impl KnowledgeGraph {
    /// Breadth-first neighbourhood of `focus` up to `hops`, ignoring edge direction.
    ///
    /// When more than `max_nodes` entities are reachable, entities are kept in
    /// order of (hop distance, provenance count descending, id) and the induced
    /// subgraph over the kept set is returned.
    pub fn neighborhood(
        &self,
        focus: &EntityId,
        hops: usize,
        max_nodes: usize,
    ) -> Result<Subgraph, KgError> {
        if !self.entities.contains_key(focus) {
            return Err(KgError::UnknownEntity(focus.clone()));
        }
        let max_nodes = max_nodes.max(1);

        let mut distances: BTreeMap<EntityId, usize> = BTreeMap::new();
        distances.insert(focus.clone(), 0);
        let mut queue = VecDeque::from([focus.clone()]);
        while let Some(current) = queue.pop_front() {
            let d = distances[&current];
            if d == hops {
                continue;
            }
            for next in self.neighbors(&current) {
                if !distances.contains_key(next) {
                    distances.insert(next.clone(), d + 1);
                    queue.push_back(next.clone());
                }
            }
        }

        if distances.len() > max_nodes {
            let mut ranked: Vec<(usize, Reverse<usize>, EntityId)> = distances
                .iter()
                .map(|(id, &d)| (d, Reverse(self.provenance_count(id)), id.clone()))
                .collect();
            ranked.sort();
            ranked.truncate(max_nodes);
            distances = ranked.into_iter().map(|(d, _, id)| (id, d)).collect();
        }

        let entities = distances
            .keys()
            .map(|id| (id.clone(), self.entities[id].clone()))
            .collect();
        let mut relations = BTreeMap::new();
        for id in distances.keys() {
            for r in self.incident(id) {
                if distances.contains_key(&r.subject) && distances.contains_key(&r.object) {
                    relations.entry(r.id.clone()).or_insert_with(|| r.clone());
                }
            }
        }
        Ok(Subgraph {
            focus: focus.clone(),
            entities,
            distances,
            relations,
        })
    }
}
