use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{EmbeddingError, TrainConfig, WalkConfig};

const MAGIC: &[u8; 8] = b"CDHYEMB1";

/// Node vectors keyed by node id, sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    fingerprint: String,
    ids: Vec<String>,
    vectors: Vec<f32>,
}

impl EmbeddingTable {
    pub(crate) fn new(dim: usize, mut rows: Vec<(String, Vec<f32>)>) -> Self {
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        let ids = rows.iter().map(|(id, _)| id.clone()).collect();
        let vectors = rows.into_iter().flat_map(|(_, v)| v).collect();
        Self {
            dim,
            fingerprint: String::new(),
            ids,
            vectors,
        }
    }

    pub fn with_fingerprint(mut self, fingerprint: impl Into<String>) -> Self {
        self.fingerprint = fingerprint.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
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

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        let idx = self.ids.binary_search_by(|probe| probe.as_str().cmp(id)).ok()?;
        Some(&self.vectors[idx * self.dim..(idx + 1) * self.dim])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids
            .iter()
            .map(String::as_str)
            .zip(self.vectors.chunks_exact(self.dim.max(1)))
    }

    pub fn all_finite(&self) -> bool {
        self.vectors.iter().all(|x| x.is_finite())
    }

    /// The `k` nodes most cosine-similar to `id`, excluding `id` itself and
    /// anything rejected by `candidate`. Ties are broken by node id.
    pub fn top_k_similar(
        &self,
        id: &str,
        k: usize,
        candidate: impl Fn(&str) -> bool,
    ) -> Result<Vec<(String, f64)>, EmbeddingError> {
        let query = self
            .get(id)
            .ok_or_else(|| EmbeddingError::UnknownNode(id.to_string()))?;
        if k == 0 {
            return Err(EmbeddingError::InvalidConfig("k must be at least 1".into()));
        }
        let mut scored = Vec::new();
        for (other, v) in self.iter() {
            if other == id || !candidate(other) {
                continue;
            }
            match cosine(query, v) {
                Ok(sim) => scored.push((other.to_string(), sim)),
                Err(EmbeddingError::ZeroVector) if v.iter().all(|x| *x == 0.0) => continue,
                Err(e) => return Err(e),
            }
        }
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored)
    }

    /// Binary layout: magic, dim (u32), fingerprint (u32 length + bytes), row
    /// count (u32), then per row the id (u32 length + bytes) and `dim`
    /// little-endian f32 values.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.vectors.len() * 4 + self.ids.len() * 24);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        put_str(&mut out, &self.fingerprint);
        out.extend_from_slice(&(self.ids.len() as u32).to_le_bytes());
        for (id, v) in self.iter() {
            put_str(&mut out, id);
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, EmbeddingError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(EmbeddingError::Format("bad magic".into()));
        }
        let dim = r.u32()? as usize;
        let fingerprint = r.string()?;
        let rows = r.u32()? as usize;
        let mut ids = Vec::with_capacity(rows);
        let mut vectors = Vec::with_capacity(rows * dim);
        for _ in 0..rows {
            ids.push(r.string()?);
            for _ in 0..dim {
                let raw: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
                vectors.push(f32::from_le_bytes(raw));
            }
        }
        if r.pos != bytes.len() {
            return Err(EmbeddingError::Format("trailing bytes".into()));
        }
        if ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EmbeddingError::Format("ids not sorted".into()));
        }
        Ok(Self {
            dim,
            fingerprint,
            ids,
            vectors,
        })
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], EmbeddingError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| EmbeddingError::Format("truncated table".into()))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, EmbeddingError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn string(&mut self) -> Result<String, EmbeddingError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| EmbeddingError::Format(e.to_string()))
    }
}

/// Cosine similarity, computed in f64 and clamped to [-1, 1].
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64, EmbeddingError> {
    if u.len() != v.len() {
        return Err(EmbeddingError::DimensionMismatch(u.len(), v.len()));
    }
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (f64::from(a), f64::from(b));
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Serialize)]
struct FingerprintInput<'a> {
    walk: &'a WalkConfig,
    train: &'a TrainConfig,
    snapshot: &'a str,
}

/// Identifies a table by the configs that produced it and the graph snapshot hash.
pub fn fingerprint(walk: &WalkConfig, train: &TrainConfig, snapshot_hash: &str) -> String {
    let input = serde_json::to_vec(&FingerprintInput {
        walk,
        train,
        snapshot: snapshot_hash,
    })
    .expect("fingerprint input serializes");
    hex::encode(Sha256::digest(input))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EmbeddingTable {
        EmbeddingTable::new(
            2,
            vec![
                ("c".into(), vec![0.0, 1.0]),
                ("a".into(), vec![1.0, 0.0]),
                ("b".into(), vec![1.0, 1.0]),
                ("d".into(), vec![-1.0, 0.0]),
            ],
        )
        .with_fingerprint("fp")
    }

    #[test]
    fn cosine_closed_forms() {
        let v = [0.3f32, -0.7, 2.0];
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        // 4 / (sqrt5 * sqrt5)
        assert!((cosine(&[1.0, 2.0], &[2.0, 1.0]).unwrap() - 0.8).abs() < 1e-12);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(EmbeddingError::ZeroVector)));
        assert!(matches!(
            cosine(&[1.0], &[1.0, 0.0]),
            Err(EmbeddingError::DimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn top_k_ranks_by_similarity_then_id() {
        let t = table();
        let got = t.top_k_similar("a", 10, |_| true).unwrap();
        let names: Vec<_> = got.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(names, ["b", "c", "d"]);
        assert!(got.windows(2).all(|w| w[0].1 >= w[1].1));
        let filtered = t.top_k_similar("a", 5, |id| id != "b").unwrap();
        assert_eq!(filtered[0].0, "c");
        assert!(matches!(t.top_k_similar("zz", 1, |_| true), Err(EmbeddingError::UnknownNode(_))));
    }

    #[test]
    fn encoding_round_trips() {
        let t = table();
        let bytes = t.encode();
        let back = EmbeddingTable::decode(&bytes).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.ids(), ["a", "b", "c", "d"]);
        assert!(EmbeddingTable::decode(&bytes[..bytes.len() - 1]).is_err());
    }
}
