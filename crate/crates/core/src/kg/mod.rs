//! Typed, provenance-aware knowledge graph.
//!
//! Entities are keyed by `(normalized name, type)` and merged through aliases.
//! Relations are keyed by their `(subject, label, object)` triple, so repeated
//! evidence for the same triple unions provenance instead of adding a parallel
//! edge. The graph is built by one writer and then shared read-only behind an
//! `Arc`; see [`cache::GraphCache`].

pub mod cache;
mod neighborhood;
pub mod snapshot;
mod vocab;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use neighborhood::Subgraph;
pub use vocab::{RelationType, Vocabulary};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KgError {
    #[error("entity name must not be empty")]
    EmptyName,
    #[error("'{name}' already exists as {existing} but was upserted as {requested}")]
    TypeConflict {
        name: String,
        existing: EntityId,
        requested: EntityId,
    },
    #[error("alias '{alias}' of {entity} already names {other}")]
    AliasConflict {
        alias: String,
        entity: EntityId,
        other: EntityId,
    },
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("unknown relation label '{0}'")]
    UnknownRelationLabel(String),
    #[error("self-loop on {0}")]
    SelfLoop(EntityId),
    #[error("relation needs at least one provenance record")]
    MissingProvenance,
    #[error("invalid provenance: {0}")]
    InvalidProvenance(String),
    #[error("vocabulary: {0}")]
    Vocabulary(String),
    #[error("invalid entity type label '{0}'")]
    InvalidEntityType(String),
}

/// Lowercases, trims and collapses internal whitespace.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityType {
    Gene,
    Drug,
    Disease,
    Pathway,
    Variant,
    Outcome,
    Other(String),
}

impl EntityType {
    pub fn parse(label: &str) -> Result<Self, KgError> {
        let norm = normalize_name(label);
        Ok(match norm.as_str() {
            "" => return Err(KgError::InvalidEntityType(label.to_string())),
            "gene" => EntityType::Gene,
            "drug" => EntityType::Drug,
            "disease" => EntityType::Disease,
            "pathway" => EntityType::Pathway,
            "variant" => EntityType::Variant,
            "outcome" => EntityType::Outcome,
            _ => EntityType::Other(norm),
        })
    }

    pub fn as_str(&self) -> &str {
        match self {
            EntityType::Gene => "gene",
            EntityType::Drug => "drug",
            EntityType::Disease => "disease",
            EntityType::Pathway => "pathway",
            EntityType::Variant => "variant",
            EntityType::Outcome => "outcome",
            EntityType::Other(label) => label,
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for EntityType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EntityType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        EntityType::parse(&raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(String);

impl EntityId {
    fn for_entity(entity_type: &EntityType, normalized: &str) -> Self {
        EntityId(format!("{}:{}", entity_type.as_str(), normalized))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(String);

impl RelationId {
    fn for_triple(subject: &EntityId, label: &RelationType, object: &EntityId) -> Self {
        let mut h = Sha256::new();
        h.update(subject.as_str().as_bytes());
        h.update([0x1f]);
        h.update(label.as_str().as_bytes());
        h.update([0x1f]);
        h.update(object.as_str().as_bytes());
        RelationId(hex::encode(&h.finalize()[..8]))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub name: String,
    pub entity_type: EntityType,
    pub aliases: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Origin {
    CuratedSource { source_id: String },
    Literature { pmid: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub origin: Origin,
    pub confidence: f64,
}

impl Provenance {
    pub fn curated(source_id: impl Into<String>) -> Self {
        Self {
            origin: Origin::CuratedSource {
                source_id: source_id.into(),
            },
            confidence: 1.0,
        }
    }

    pub fn literature(pmid: impl Into<String>, confidence: f64) -> Self {
        Self {
            origin: Origin::Literature { pmid: pmid.into() },
            confidence,
        }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn pmid(&self) -> Option<&str> {
        match &self.origin {
            Origin::Literature { pmid } => Some(pmid),
            Origin::CuratedSource { .. } => None,
        }
    }

    fn validate(&self) -> Result<(), KgError> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(KgError::InvalidProvenance(format!(
                "confidence {} outside [0, 1]",
                self.confidence
            )));
        }
        match &self.origin {
            Origin::Literature { pmid } => {
                if pmid.is_empty() || !pmid.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(KgError::InvalidProvenance(format!("bad pmid '{pmid}'")));
                }
            }
            Origin::CuratedSource { source_id } => {
                if source_id.is_empty() {
                    return Err(KgError::InvalidProvenance("empty source id".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub id: RelationId,
    pub subject: EntityId,
    pub relation_type: RelationType,
    pub object: EntityId,
    pub provenance: Vec<Provenance>,
}

impl Relation {
    pub fn other_end(&self, id: &EntityId) -> &EntityId {
        if &self.subject == id {
            &self.object
        } else {
            &self.subject
        }
    }

    pub fn touches(&self, id: &EntityId) -> bool {
        &self.subject == id || &self.object == id
    }

    pub fn pmids(&self) -> impl Iterator<Item = &str> {
        self.provenance.iter().filter_map(Provenance::pmid)
    }

    // Sorted by origin; a repeated origin keeps its highest confidence.
    fn merge_provenance(&mut self, incoming: &[Provenance]) {
        for p in incoming {
            match self
                .provenance
                .binary_search_by(|existing| existing.origin.cmp(&p.origin))
            {
                Ok(idx) => {
                    let slot = &mut self.provenance[idx];
                    slot.confidence = slot.confidence.max(p.confidence);
                }
                Err(idx) => self.provenance.insert(idx, p.clone()),
            }
        }
    }
}

/// Abstract text kept alongside the graph so literature provenance can be shown as snippets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub pmid: String,
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    vocabulary: Vocabulary,
    entities: BTreeMap<EntityId, Entity>,
    relations: BTreeMap<RelationId, Relation>,
    adjacency: BTreeMap<EntityId, BTreeSet<RelationId>>,
    name_index: BTreeMap<String, EntityId>,
    documents: BTreeMap<String, Document>,
}

impl Default for KnowledgeGraph {
    fn default() -> Self {
        Self::new(Vocabulary::default())
    }
}

impl KnowledgeGraph {
    pub fn new(vocabulary: Vocabulary) -> Self {
        Self {
            vocabulary,
            entities: BTreeMap::new(),
            relations: BTreeMap::new(),
            adjacency: BTreeMap::new(),
            name_index: BTreeMap::new(),
            documents: BTreeMap::new(),
        }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.values()
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.documents.values()
    }

    pub fn entity(&self, id: &EntityId) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn relation(&self, id: &RelationId) -> Option<&Relation> {
        self.relations.get(id)
    }

    pub fn document(&self, pmid: &str) -> Option<&Document> {
        self.documents.get(pmid)
    }

    /// Case-insensitive lookup over names and aliases.
    pub fn resolve(&self, name: &str) -> Option<&Entity> {
        self.name_index
            .get(&normalize_name(name))
            .and_then(|id| self.entities.get(id))
    }

    pub fn name_keys(&self) -> impl Iterator<Item = &str> {
        self.name_index.keys().map(String::as_str)
    }

    pub fn incident(&self, id: &EntityId) -> impl Iterator<Item = &Relation> {
        self.adjacency
            .get(id)
            .into_iter()
            .flatten()
            .filter_map(|rid| self.relations.get(rid))
    }

    pub fn degree(&self, id: &EntityId) -> usize {
        self.adjacency.get(id).map_or(0, BTreeSet::len)
    }

    /// Distinct neighbours, ignoring edge direction.
    pub fn neighbors(&self, id: &EntityId) -> BTreeSet<&EntityId> {
        self.incident(id).map(|r| r.other_end(id)).collect()
    }

    /// Inserts a new entity or merges into the one already known under `name`
    /// (or, failing that, under any of `aliases`).
    pub fn upsert_entity<I, S>(
        &mut self,
        name: &str,
        entity_type: EntityType,
        aliases: I,
    ) -> Result<EntityId, KgError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let key = normalize_name(name);
        if key.is_empty() {
            return Err(KgError::EmptyName);
        }
        let mut incoming: Vec<String> = vec![name.trim().to_string()];
        incoming.extend(
            aliases
                .into_iter()
                .map(|a| a.as_ref().trim().to_string())
                .filter(|a| !a.is_empty()),
        );

        let existing = self.name_index.get(&key).cloned().or_else(|| {
            incoming[1..]
                .iter()
                .find_map(|a| self.name_index.get(&normalize_name(a)).cloned())
                .filter(|id| self.entities[id].entity_type == entity_type)
        });

        let target = match existing {
            Some(id) => {
                let current = &self.entities[&id];
                if current.entity_type != entity_type {
                    return Err(KgError::TypeConflict {
                        name: name.to_string(),
                        existing: id,
                        requested: EntityId::for_entity(&entity_type, &key),
                    });
                }
                id
            }
            None => EntityId::for_entity(&entity_type, &key),
        };

        for alias in &incoming {
            if let Some(other) = self.name_index.get(&normalize_name(alias)) {
                if other != &target {
                    return Err(KgError::AliasConflict {
                        alias: alias.clone(),
                        entity: target,
                        other: other.clone(),
                    });
                }
            }
        }

        let entity = self
            .entities
            .entry(target.clone())
            .or_insert_with(|| Entity {
                id: target.clone(),
                name: incoming[0].clone(),
                entity_type,
                aliases: BTreeSet::new(),
            });
        for alias in incoming {
            self.name_index
                .insert(normalize_name(&alias), target.clone());
            entity.aliases.insert(alias);
        }
        self.adjacency.entry(target.clone()).or_default();
        Ok(target)
    }

    pub fn upsert_relation(
        &mut self,
        subject: &EntityId,
        relation_label: &str,
        object: &EntityId,
        provenance: Vec<Provenance>,
    ) -> Result<RelationId, KgError> {
        for end in [subject, object] {
            if !self.entities.contains_key(end) {
                return Err(KgError::UnknownEntity(end.clone()));
            }
        }
        let relation_type = self.vocabulary.relation_type(relation_label)?;
        if subject == object {
            return Err(KgError::SelfLoop(subject.clone()));
        }
        if provenance.is_empty() {
            return Err(KgError::MissingProvenance);
        }
        for p in &provenance {
            p.validate()?;
        }

        let id = RelationId::for_triple(subject, &relation_type, object);
        let relation = self.relations.entry(id.clone()).or_insert_with(|| Relation {
            id: id.clone(),
            subject: subject.clone(),
            relation_type,
            object: object.clone(),
            provenance: Vec::new(),
        });
        relation.merge_provenance(&provenance);
        self.adjacency
            .entry(subject.clone())
            .or_default()
            .insert(id.clone());
        self.adjacency
            .entry(object.clone())
            .or_default()
            .insert(id.clone());
        Ok(id)
    }

    pub fn add_document(&mut self, doc: Document) {
        self.documents.insert(doc.pmid.clone(), doc);
    }

    /// Total provenance records over an entity's incident relations.
    pub fn provenance_count(&self, id: &EntityId) -> usize {
        self.incident(id).map(|r| r.provenance.len()).sum()
    }

    /// Full consistency check: endpoints, derived indexes and entity invariants.
    pub fn audit(&self) -> Result<(), Vec<String>> {
        let mut issues = Vec::new();
        let mut adjacency: BTreeMap<EntityId, BTreeSet<RelationId>> = self
            .entities
            .keys()
            .map(|id| (id.clone(), BTreeSet::new()))
            .collect();
        for (rid, r) in &self.relations {
            if &r.id != rid {
                issues.push(format!("relation keyed {rid} has id {}", r.id));
            }
            if r.subject == r.object {
                issues.push(format!("relation {rid} is a self-loop"));
            }
            if r.provenance.is_empty() {
                issues.push(format!("relation {rid} has no provenance"));
            }
            if !self.vocabulary.contains(r.relation_type.as_str()) {
                issues.push(format!("relation {rid} label {} not in vocabulary", r.relation_type));
            }
            for end in [&r.subject, &r.object] {
                match adjacency.get_mut(end) {
                    Some(set) => {
                        set.insert(rid.clone());
                    }
                    None => issues.push(format!("relation {rid} endpoint {end} missing")),
                }
            }
        }
        if adjacency != self.adjacency {
            issues.push("adjacency index differs from a full rebuild".into());
        }
        let mut names = BTreeMap::new();
        for (id, e) in &self.entities {
            if &e.id != id {
                issues.push(format!("entity keyed {id} has id {}", e.id));
            }
            if e.name.trim().is_empty() {
                issues.push(format!("entity {id} has an empty name"));
            }
            if !e.aliases.contains(&e.name) {
                issues.push(format!("entity {id} name missing from aliases"));
            }
            for alias in &e.aliases {
                names.insert(normalize_name(alias), id.clone());
            }
        }
        if names != self.name_index {
            issues.push("name index differs from a full rebuild".into());
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }

    pub(crate) fn from_parts(
        vocabulary: Vocabulary,
        entities: Vec<Entity>,
        relations: Vec<Relation>,
        documents: Vec<Document>,
    ) -> Result<Self, KgError> {
        let mut g = KnowledgeGraph::new(vocabulary);
        for e in entities {
            for alias in &e.aliases {
                g.name_index.insert(normalize_name(alias), e.id.clone());
            }
            g.adjacency.entry(e.id.clone()).or_default();
            g.entities.insert(e.id.clone(), e);
        }
        for r in relations {
            for end in [&r.subject, &r.object] {
                g.adjacency
                    .get_mut(end)
                    .ok_or_else(|| KgError::UnknownEntity(end.clone()))?
                    .insert(r.id.clone());
            }
            g.vocabulary.relation_type(r.relation_type.as_str())?;
            g.relations.insert(r.id.clone(), r);
        }
        for d in documents {
            g.add_document(d);
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph() -> KnowledgeGraph {
        KnowledgeGraph::default()
    }

    #[test]
    fn upsert_is_idempotent_and_case_insensitive() {
        let mut g = graph();
        let a = g.upsert_entity("EGFR", EntityType::Gene, ["ERBB1"]).unwrap();
        let b = g.upsert_entity("EGFR", EntityType::Gene, None::<&str>).unwrap();
        let c = g.upsert_entity("egfr", EntityType::Gene, None::<&str>).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(g.entity_count(), 1);
        assert_eq!(g.entity(&a).unwrap().name, "EGFR");
        assert!(g.resolve("erbb1").is_some());
        g.audit().unwrap();
    }

    #[test]
    fn type_mismatch_is_a_conflict_carrying_both_ids() {
        let mut g = graph();
        let gene = g.upsert_entity("EGFR", EntityType::Gene, None::<&str>).unwrap();
        let err = g.upsert_entity("EGFR", EntityType::Drug, None::<&str>).unwrap_err();
        // oracle: linear scan of the name index for the same key with another type
        let clash = g
            .name_index
            .iter()
            .find(|(k, id)| k.as_str() == "egfr" && g.entities[*id].entity_type != EntityType::Drug)
            .map(|(_, id)| id.clone());
        assert_eq!(clash, Some(gene.clone()));
        match err {
            KgError::TypeConflict {
                existing, requested, ..
            } => {
                assert_eq!(existing, gene);
                assert_eq!(requested.as_str(), "drug:egfr");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(g.entity_count(), 1);
    }

    #[test]
    fn alias_merges_into_existing_entity() {
        let mut g = graph();
        let osi = g.upsert_entity("Osimertinib", EntityType::Drug, None::<&str>).unwrap();
        let azd = g
            .upsert_entity("AZD9291", EntityType::Drug, ["Osimertinib"])
            .unwrap();
        assert_eq!(osi, azd);
        assert_eq!(g.resolve("azd9291").unwrap().id, osi);
    }

    #[test]
    fn alias_pointing_elsewhere_is_rejected_without_mutation() {
        let mut g = graph();
        g.upsert_entity("EGFR", EntityType::Gene, None::<&str>).unwrap();
        g.upsert_entity("KRAS", EntityType::Gene, None::<&str>).unwrap();
        let before = g.clone();
        let err = g.upsert_entity("EGFR", EntityType::Gene, ["KRAS"]).unwrap_err();
        assert!(matches!(err, KgError::AliasConflict { .. }));
        assert_eq!(g, before);
    }

    #[test]
    fn empty_name_is_rejected() {
        assert_eq!(
            graph().upsert_entity("  ", EntityType::Gene, None::<&str>),
            Err(KgError::EmptyName)
        );
    }

    #[test]
    fn repeated_triple_unions_provenance() {
        let mut g = graph();
        let drug = g.upsert_entity("Afatinib", EntityType::Drug, None::<&str>).unwrap();
        let gene = g.upsert_entity("EGFR", EntityType::Gene, None::<&str>).unwrap();
        let r1 = g
            .upsert_relation(&drug, "inhibits", &gene, vec![Provenance::literature("111", 0.9)])
            .unwrap();
        let r2 = g
            .upsert_relation(&drug, "inhibits", &gene, vec![Provenance::literature("222", 0.8)])
            .unwrap();
        assert_eq!(r1, r2);
        assert_eq!(g.relation_count(), 1);
        let pmids: Vec<_> = g.relation(&r1).unwrap().pmids().collect();
        assert_eq!(pmids, ["111", "222"]);
        g.audit().unwrap();
    }

    #[test]
    fn duplicate_origin_keeps_highest_confidence() {
        let mut g = graph();
        let a = g.upsert_entity("A", EntityType::Drug, None::<&str>).unwrap();
        let b = g.upsert_entity("B", EntityType::Gene, None::<&str>).unwrap();
        let r = g
            .upsert_relation(&a, "targets", &b, vec![Provenance::literature("5", 0.4)])
            .unwrap();
        g.upsert_relation(&a, "targets", &b, vec![Provenance::literature("5", 0.7)])
            .unwrap();
        let rel = g.relation(&r).unwrap();
        assert_eq!(rel.provenance.len(), 1);
        assert_eq!(rel.provenance[0].confidence, 0.7);
    }

    #[test]
    fn relation_errors() {
        let mut g = graph();
        let a = g.upsert_entity("A", EntityType::Drug, None::<&str>).unwrap();
        let b = g.upsert_entity("B", EntityType::Gene, None::<&str>).unwrap();
        let p = || vec![Provenance::curated("drug_targets")];
        assert_eq!(
            g.upsert_relation(&a, "inhibits", &a, p()),
            Err(KgError::SelfLoop(a.clone()))
        );
        // oracle: the label is simply absent from the vocabulary
        assert!(!g.vocabulary().labels().iter().any(|l| l == "potentiates"));
        assert_eq!(
            g.upsert_relation(&a, "potentiates", &b, p()),
            Err(KgError::UnknownRelationLabel("potentiates".into()))
        );
        let ghost = EntityId::from("gene:ghost");
        assert_eq!(
            g.upsert_relation(&a, "targets", &ghost, p()),
            Err(KgError::UnknownEntity(ghost))
        );
        assert_eq!(
            g.upsert_relation(&a, "targets", &b, vec![]),
            Err(KgError::MissingProvenance)
        );
        assert!(matches!(
            g.upsert_relation(&a, "targets", &b, vec![Provenance::literature("12a", 1.0)]),
            Err(KgError::InvalidProvenance(_))
        ));
        assert_eq!(g.relation_count(), 0);
    }

    #[test]
    fn entity_type_labels_round_trip() {
        for t in ["gene", "drug", "disease", "pathway", "variant", "outcome"] {
            assert_eq!(EntityType::parse(t).unwrap().as_str(), t);
        }
        assert_eq!(
            EntityType::parse("Cell Line").unwrap(),
            EntityType::Other("cell line".into())
        );
        assert!(EntityType::parse(" ").is_err());
    }
}
