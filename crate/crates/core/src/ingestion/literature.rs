use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use chrono::{DateTime, NaiveDate, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::Gazetteer;
use crate::kg::Document;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Abstract {
    pub pmid: String,
    pub title: String,
    pub text: String,
    pub published: Option<NaiveDate>,
    pub retrieved_at: DateTime<Utc>,
}

impl Abstract {
    pub fn to_document(&self) -> Document {
        Document {
            pmid: self.pmid.clone(),
            title: self.title.clone(),
            text: self.text.clone(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LiteratureError {
    #[error("literature endpoint unreachable: {message}")]
    Transport { message: String, retryable: bool },
    #[error("malformed literature response: {message}")]
    Parse { message: String, raw: String },
}

impl LiteratureError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, LiteratureError::Transport { retryable: true, .. })
    }
}

/// Two-step search/fetch literature service.
pub trait LiteratureClient: Send + Sync {
    fn id(&self) -> &str;
    /// Ids matching `query`, most recent first, at most `max`.
    fn search(&self, query: &str, max: usize) -> Result<Vec<String>, LiteratureError>;
    fn fetch(&self, pmids: &[String]) -> Result<Vec<Abstract>, LiteratureError>;
}

/// Quotes a term as a phrase, dropping embedded quotes.
/// A phrase restricted to title and abstract.
pub fn quote_term(term: &str) -> String {
    format!("\"{}\"[tiab]", term.replace('"', "").trim())
}

/// `"{biomarker}"[tiab] AND "{cancer_type}"[tiab]`.
pub fn literature_query(biomarker: &str, cancer_type: &str) -> String {
    format!("{} AND {}", quote_term(biomarker), quote_term(cancer_type))
}

fn pmid_number(pmid: &str) -> u64 {
    pmid.parse().unwrap_or(0)
}

/// Orders by publication date then pmid, both descending; undated records sort last.
pub(crate) fn sort_by_recency(records: &mut [Abstract]) {
    records.sort_by(|a, b| {
        b.published
            .cmp(&a.published)
            .then_with(|| pmid_number(&b.pmid).cmp(&pmid_number(&a.pmid)))
            .then_with(|| b.pmid.cmp(&a.pmid))
    });
}

/// Retrieves at most `n` abstracts for the run's query, most recent first.
pub fn fetch_literature(
    biomarker: &str,
    cancer_type: &str,
    n: usize,
    client: &dyn LiteratureClient,
) -> Result<Vec<Abstract>, LiteratureError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let ids = client.search(&literature_query(biomarker, cancer_type), n)?;
    if ids.is_empty() {
        return Ok(Vec::new());
    }
    let mut records = client.fetch(&ids)?;
    let mut seen = HashSet::new();
    records.retain(|r| !r.pmid.is_empty() && seen.insert(r.pmid.clone()));
    sort_by_recency(&mut records);
    records.truncate(n);
    Ok(records)
}

/// Line-delimited fixture record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiteratureRecord {
    pub pmid: String,
    pub title: String,
    pub text: String,
    #[serde(default)]
    pub published: Option<NaiveDate>,
}

/// Offline literature index over fixture records.
///
/// A query is a conjunction of quoted phrases; a record matches when every
/// phrase (or one of its synonyms) occurs in its title or text, ignoring case.
#[derive(Debug, Default)]
pub struct FixtureLiterature {
    records: Vec<LiteratureRecord>,
    synonyms: BTreeMap<String, BTreeSet<String>>,
    calls: AtomicUsize,
}

impl FixtureLiterature {
    pub fn new(records: Vec<LiteratureRecord>) -> Self {
        Self {
            records,
            ..Default::default()
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self, LiteratureError> {
        let raw = std::fs::read_to_string(path).map_err(|e| LiteratureError::Transport {
            message: format!("{}: {e}", path.display()),
            retryable: false,
        })?;
        let mut records = Vec::new();
        for (idx, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: LiteratureRecord = serde_json::from_str(line).map_err(|e| LiteratureError::Parse {
                message: format!("line {}: {e}", idx + 1),
                raw: line.to_string(),
            })?;
            records.push(rec);
        }
        Ok(Self::new(records))
    }

    /// Lets a query term also match the other surface forms of its canonical entity.
    pub fn with_synonyms(mut self, gazetteer: &Gazetteer) -> Self {
        let mut groups: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for canonical in gazetteer.canonical_names() {
            let mut forms: BTreeSet<String> = gazetteer.aliases_of(canonical).map(str::to_lowercase).collect();
            forms.insert(canonical.to_lowercase());
            for f in &forms {
                groups.entry(f.clone()).or_default().extend(forms.iter().cloned());
            }
        }
        self.synonyms = groups;
        self
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Search and fetch calls served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn matches(&self, rec: &LiteratureRecord, terms: &[String]) -> bool {
        let hay = format!("{} {}", rec.title, rec.text).to_lowercase();
        terms.iter().all(|t| match self.synonyms.get(t) {
            Some(forms) => forms.iter().any(|f| contains_phrase(&hay, f)),
            None => contains_phrase(&hay, t),
        })
    }
}

// Substring match that does not start or end inside a word ("ATM" is not in "treatment").
fn contains_phrase(hay: &str, needle: &str) -> bool {
    let word = |c: Option<char>| c.is_some_and(char::is_alphanumeric);
    hay.match_indices(needle).any(|(i, m)| {
        !word(hay[..i].chars().next_back()) && !word(hay[i + m.len()..].chars().next())
    })
}

fn query_terms(query: &str) -> Vec<String> {
    let re = Regex::new(r#""([^"]+)""#).expect("static regex");
    re.captures_iter(query)
        .map(|c| c[1].trim().to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

impl LiteratureClient for FixtureLiterature {
    fn id(&self) -> &str {
        "fixture"
    }

    fn search(&self, query: &str, max: usize) -> Result<Vec<String>, LiteratureError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let terms = query_terms(query);
        if terms.is_empty() {
            return Err(LiteratureError::Parse {
                message: "query has no quoted terms".into(),
                raw: query.to_string(),
            });
        }
        let mut hits: Vec<Abstract> = self
            .records
            .iter()
            .filter(|r| self.matches(r, &terms))
            .map(|r| to_abstract(r, Utc::now()))
            .collect();
        sort_by_recency(&mut hits);
        Ok(hits.into_iter().take(max).map(|a| a.pmid).collect())
    }

    fn fetch(&self, pmids: &[String]) -> Result<Vec<Abstract>, LiteratureError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = Utc::now();
        Ok(pmids
            .iter()
            .filter_map(|p| self.records.iter().find(|r| &r.pmid == p))
            .map(|r| to_abstract(r, now))
            .collect())
    }
}

fn to_abstract(r: &LiteratureRecord, now: DateTime<Utc>) -> Abstract {
    Abstract {
        pmid: r.pmid.clone(),
        title: r.title.clone(),
        text: r.text.clone(),
        published: r.published,
        retrieved_at: now,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(pmid: &str, text: &str, published: Option<&str>) -> LiteratureRecord {
        LiteratureRecord {
            pmid: pmid.into(),
            title: String::new(),
            text: text.into(),
            published: published.map(|d| d.parse().unwrap()),
        }
    }

    fn index() -> FixtureLiterature {
        FixtureLiterature::new(vec![
            rec("101", "EGFR in breast invasive carcinoma", Some("2020-01-01")),
            rec("102", "egfr and Breast Invasive Carcinoma cohort", Some("2023-05-01")),
            rec("99", "EGFR, breast invasive carcinoma, undated", None),
            rec("103", "EGFR in lung cancer", Some("2024-01-01")),
        ])
    }

    #[test]
    fn zero_requested_means_no_calls() {
        let lit = index();
        assert!(fetch_literature("EGFR", "Breast Invasive Carcinoma", 0, &lit).unwrap().is_empty());
        assert_eq!(lit.calls(), 0);
    }

    #[test]
    fn returns_what_exists_newest_first() {
        let lit = index();
        let got = fetch_literature("EGFR", "Breast Invasive Carcinoma", 50, &lit).unwrap();
        // grep oracle: records containing both phrases
        let want = lit
            .records
            .iter()
            .filter(|r| {
                let t = r.text.to_lowercase();
                t.contains("egfr") && t.contains("breast invasive carcinoma")
            })
            .count();
        assert_eq!(got.len(), want);
        let ids: Vec<_> = got.iter().map(|a| a.pmid.as_str()).collect();
        assert_eq!(ids, ["102", "101", "99"]);
        let capped = fetch_literature("EGFR", "Breast Invasive Carcinoma", 2, &lit).unwrap();
        assert_eq!(capped.len(), 2);
    }

    #[test]
    fn synonyms_widen_matching() {
        let g = Gazetteer::parse("Breast Invasive Carcinoma\tBreast Invasive Carcinoma\tdisease\nbreast cancer\tBreast Invasive Carcinoma\tdisease\n").unwrap();
        let lit = FixtureLiterature::new(vec![rec("5", "EGFR in breast cancer", None)]).with_synonyms(&g);
        assert_eq!(lit.search(&literature_query("EGFR", "Breast Invasive Carcinoma"), 10).unwrap(), ["5"]);
    }

    #[test]
    fn phrases_respect_word_edges() {
        assert!(!contains_phrase("standard treatment", "atm"));
        assert!(contains_phrase("loss of atm, and", "atm"));
        assert!(contains_phrase("egfr-mutant", "egfr"));
    }

    #[test]
    fn query_template_quotes_terms() {
        assert_eq!(literature_query("EGFR", "Lung \"Squamous\""), "\"EGFR\"[tiab] AND \"Lung Squamous\"[tiab]");
        assert_eq!(query_terms("\"a\" AND \"b c\""), ["a", "b c"]);
    }
}
