use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RankingError;

/// Environment variable naming the synergy CSV.
pub const SYNERGY_ENV: &str = "CODHY_SYNERGY_TABLE";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynergyRecord {
    pub drug_a: String,
    pub drug_b: String,
    pub max_synergy: f64,
    pub min_synergy: f64,
    pub n_observations: usize,
}

/// Reported synergy scores keyed by unordered drug pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynergyTable {
    records: BTreeMap<(String, String), SynergyRecord>,
}

fn key(a: &str, b: &str) -> (String, String) {
    let (a, b) = (a.trim().to_lowercase(), b.trim().to_lowercase());
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl SynergyTable {
    /// Rows of `drug_a,drug_b,synergy_score`; a header row with those names is optional.
    pub fn parse(text: &str) -> Result<Self, RankingError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut table = Self::default();
        for (idx, row) in reader.records().enumerate() {
            let row = row.map_err(|e| RankingError::Synergy {
                line: e.position().map_or(idx + 1, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = row.position().map_or(idx + 1, |p| p.line() as usize);
            let bad = |message: String| RankingError::Synergy { line, message };
            if row.len() != 3 {
                return Err(bad(format!("expected 3 fields, found {}", row.len())));
            }
            if idx == 0 && row[0].eq_ignore_ascii_case("drug_a") && row[2].eq_ignore_ascii_case("synergy_score") {
                continue;
            }
            let (a, b) = (&row[0], &row[1]);
            if a.is_empty() || b.is_empty() {
                return Err(bad("empty drug name".into()));
            }
            let score: f64 = row[2]
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| bad(format!("synergy score '{}' is not a number", &row[2])))?;
            table.add(a, b, score);
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, RankingError> {
        let text = std::fs::read_to_string(path).map_err(|e| RankingError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The table named by [`SYNERGY_ENV`], or an empty table when unset.
    pub fn from_env() -> Result<Self, RankingError> {
        match std::env::var(SYNERGY_ENV) {
            Ok(p) if !p.trim().is_empty() => Self::load(Path::new(p.trim())),
            _ => Ok(Self::default()),
        }
    }

    pub fn add(&mut self, a: &str, b: &str, score: f64) {
        let k = key(a, b);
        let (da, db) = if a.trim().to_lowercase() <= b.trim().to_lowercase() {
            (a.trim(), b.trim())
        } else {
            (b.trim(), a.trim())
        };
        self.records
            .entry(k)
            .and_modify(|r| {
                r.max_synergy = r.max_synergy.max(score);
                r.min_synergy = r.min_synergy.min(score);
                r.n_observations += 1;
            })
            .or_insert_with(|| SynergyRecord {
                drug_a: da.to_string(),
                drug_b: db.to_string(),
                max_synergy: score,
                min_synergy: score,
                n_observations: 1,
            });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn lookup(&self, a: &str, b: &str) -> Option<&SynergyRecord> {
        self.records.get(&key(a, b))
    }
}
