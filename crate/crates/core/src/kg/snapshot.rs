//! Line-delimited graph snapshot: a header record, then entities, relations and documents.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::cache::GraphCacheKey;
use super::{Document, Entity, KgError, KnowledgeGraph, Relation, Vocabulary};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("snapshot schema version {found} is not supported (expected {SCHEMA_VERSION})")]
    Version { found: u32 },
    #[error("snapshot has no header record")]
    MissingHeader,
    #[error(transparent)]
    Graph(#[from] KgError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Header {
        schema_version: u32,
        key: GraphCacheKey,
        vocabulary: Vec<String>,
    },
    Entity(Entity),
    Relation(Relation),
    Document(Document),
}

pub fn encode(graph: &KnowledgeGraph, key: &GraphCacheKey) -> Vec<u8> {
    let mut out = Vec::new();
    let mut push = |rec: &Record| {
        serde_json::to_writer(&mut out, rec).expect("snapshot records serialize");
        out.push(b'\n');
    };
    push(&Record::Header {
        schema_version: SCHEMA_VERSION,
        key: key.clone(),
        vocabulary: graph.vocabulary().labels().to_vec(),
    });
    for e in graph.entities() {
        push(&Record::Entity(e.clone()));
    }
    for r in graph.relations() {
        push(&Record::Relation(r.clone()));
    }
    for d in graph.documents() {
        push(&Record::Document(d.clone()));
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<(GraphCacheKey, KnowledgeGraph), SnapshotError> {
    let text = std::str::from_utf8(bytes).map_err(|e| SnapshotError::Malformed {
        line: 0,
        message: e.to_string(),
    })?;
    let mut header = None;
    let (mut entities, mut relations, mut documents) = (Vec::new(), Vec::new(), Vec::new());
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(line).map_err(|e| SnapshotError::Malformed {
            line: idx + 1,
            message: e.to_string(),
        })?;
        match rec {
            Record::Header {
                schema_version,
                key,
                vocabulary,
            } => {
                if idx != 0 {
                    return Err(SnapshotError::Malformed {
                        line: idx + 1,
                        message: "header must be the first record".into(),
                    });
                }
                if schema_version != SCHEMA_VERSION {
                    return Err(SnapshotError::Version {
                        found: schema_version,
                    });
                }
                let vocab = Vocabulary::parse(&vocabulary.join("\n"))?;
                header = Some((key, vocab));
            }
            Record::Entity(e) => entities.push(e),
            Record::Relation(r) => relations.push(r),
            Record::Document(d) => documents.push(d),
        }
    }
    let (key, vocab) = header.ok_or(SnapshotError::MissingHeader)?;
    let graph = KnowledgeGraph::from_parts(vocab, entities, relations, documents)?;
    Ok((key, graph))
}

/// Hex SHA-256 of the encoded snapshot; stable for equal graphs.
pub fn snapshot_hash(graph: &KnowledgeGraph, key: &GraphCacheKey) -> String {
    hex::encode(Sha256::digest(encode(graph, key)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{EntityType, Provenance};

    fn key() -> GraphCacheKey {
        GraphCacheKey::new("EGFR", "Breast Invasive Carcinoma", 50, ["pathways", "drug_targets"], "v1")
    }

    fn sample() -> KnowledgeGraph {
        let mut g = KnowledgeGraph::default();
        let d = g.upsert_entity("Afatinib", EntityType::Drug, ["BIBW2992"]).unwrap();
        let e = g.upsert_entity("EGFR", EntityType::Gene, None::<&str>).unwrap();
        g.upsert_relation(
            &d,
            "inhibits",
            &e,
            vec![Provenance::curated("drug_targets"), Provenance::literature("123", 0.8)],
        )
        .unwrap();
        g.add_document(Document {
            pmid: "123".into(),
            title: "t".into(),
            text: "Afatinib inhibits EGFR.".into(),
        });
        g
    }

    #[test]
    fn decode_inverts_encode_byte_for_byte() {
        let g = sample();
        let bytes = encode(&g, &key());
        let (k, back) = decode(&bytes).unwrap();
        assert_eq!(k, key());
        assert_eq!(back, g);
        assert_eq!(encode(&back, &k), bytes);
        back.audit().unwrap();
    }

    #[test]
    fn header_comes_first() {
        let text = String::from_utf8(encode(&sample(), &key())).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.starts_with(r#"{"record":"header","schema_version":1"#));
    }

    #[test]
    fn malformed_and_versioned_inputs_are_rejected() {
        assert!(matches!(decode(b"not json\n"), Err(SnapshotError::Malformed { line: 1, .. })));
        assert!(matches!(decode(b""), Err(SnapshotError::MissingHeader)));
        let bumped = String::from_utf8(encode(&sample(), &key()))
            .unwrap()
            .replacen("\"schema_version\":1", "\"schema_version\":9", 1);
        assert!(matches!(decode(bumped.as_bytes()), Err(SnapshotError::Version { found: 9 })));
    }
}
