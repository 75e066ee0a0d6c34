use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use chrono::{NaiveDate, Utc};
use quick_xml::events::Event;
use quick_xml::Reader;
use reqwest::blocking::Client;
use reqwest::{StatusCode, Url};
use serde::Deserialize;

use super::literature::{Abstract, LiteratureClient, LiteratureError};

pub const DEFAULT_BASE_URL: &str = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils";

/// Blocking token bucket shared by every request of one client.
#[derive(Debug)]
pub struct TokenBucket {
    rate: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(rate_per_sec: f64, capacity: f64) -> Self {
        assert!(rate_per_sec > 0.0 && capacity >= 1.0);
        Self {
            rate: rate_per_sec,
            capacity,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Waits until a token is available and takes it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut st = self.state.lock().expect("bucket lock");
                let now = Instant::now();
                let refill = now.duration_since(st.1).as_secs_f64() * self.rate;
                st.0 = (st.0 + refill).min(self.capacity);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                (1.0 - st.0) / self.rate
            };
            thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

#[derive(Debug, Clone)]
pub struct EutilsConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub requests_per_second: f64,
    pub max_retries: u32,
    /// First backoff delay; doubles on each retry.
    pub backoff: Duration,
    pub timeout: Duration,
}

impl Default for EutilsConfig {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_BASE_URL.into(),
            api_key: None,
            requests_per_second: 3.0,
            max_retries: 4,
            backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(30),
        }
    }
}

impl EutilsConfig {
    /// Defaults overridden by `CODHY_LIT_BASE_URL` and `CODHY_API_KEY`.
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        if let Ok(url) = std::env::var("CODHY_LIT_BASE_URL") {
            if !url.trim().is_empty() {
                cfg.base_url = url.trim().trim_end_matches('/').to_string();
            }
        }
        cfg.api_key = std::env::var("CODHY_API_KEY").ok().filter(|k| !k.trim().is_empty());
        cfg
    }
}

/// Client for the public E-utilities search (JSON) and fetch (XML) endpoints.
pub struct EutilsClient {
    cfg: EutilsConfig,
    http: Client,
    bucket: TokenBucket,
}

#[derive(Deserialize)]
struct SearchEnvelope {
    esearchresult: SearchResult,
}

#[derive(Deserialize)]
struct SearchResult {
    idlist: Vec<String>,
}

impl EutilsClient {
    pub fn new(cfg: EutilsConfig) -> Result<Self, LiteratureError> {
        let http = Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| LiteratureError::Transport {
                message: e.to_string(),
                retryable: false,
            })?;
        let bucket = TokenBucket::new(cfg.requests_per_second, cfg.requests_per_second.max(1.0));
        Ok(Self { cfg, http, bucket })
    }

    fn endpoint(&self, tool: &str, params: &[(&str, String)]) -> Result<Url, LiteratureError> {
        let mut all: Vec<(&str, String)> = params.to_vec();
        if let Some(key) = &self.cfg.api_key {
            all.push(("api_key", key.clone()));
        }
        Url::parse_with_params(&format!("{}/{tool}", self.cfg.base_url), &all).map_err(|e| {
            LiteratureError::Transport {
                message: format!("bad base url: {e}"),
                retryable: false,
            }
        })
    }

    // Rate-limited GET with exponential backoff on 429, 5xx and connection failures.
    fn get(&self, url: Url) -> Result<String, LiteratureError> {
        let mut delay = self.cfg.backoff;
        let mut last = String::new();
        for attempt in 0..=self.cfg.max_retries {
            if attempt > 0 {
                tracing::warn!(%url, attempt, error = %last, "retrying literature request");
                thread::sleep(delay);
                delay *= 2;
            }
            self.bucket.acquire();
            match self.http.get(url.clone()).send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        return resp.text().map_err(|e| LiteratureError::Transport {
                            message: e.to_string(),
                            retryable: true,
                        });
                    }
                    if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
                        last = format!("HTTP {status}");
                        continue;
                    }
                    return Err(LiteratureError::Transport {
                        message: format!("HTTP {status}"),
                        retryable: false,
                    });
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(LiteratureError::Transport {
            message: format!("gave up after {} attempts: {last}", self.cfg.max_retries + 1),
            retryable: true,
        })
    }
}

impl LiteratureClient for EutilsClient {
    fn id(&self) -> &str {
        "eutils"
    }

    fn search(&self, query: &str, max: usize) -> Result<Vec<String>, LiteratureError> {
        let url = self.endpoint(
            "esearch.fcgi",
            &[
                ("db", "pubmed".into()),
                ("retmode", "json".into()),
                ("sort", "pub_date".into()),
                ("retmax", max.to_string()),
                ("term", query.to_string()),
            ],
        )?;
        let body = self.get(url)?;
        parse_search(&body)
    }

    fn fetch(&self, pmids: &[String]) -> Result<Vec<Abstract>, LiteratureError> {
        if pmids.is_empty() {
            return Ok(Vec::new());
        }
        let url = self.endpoint(
            "efetch.fcgi",
            &[
                ("db", "pubmed".into()),
                ("retmode", "xml".into()),
                ("id", pmids.join(",")),
            ],
        )?;
        let body = self.get(url)?;
        parse_fetch(&body)
    }
}

pub(crate) fn parse_search(body: &str) -> Result<Vec<String>, LiteratureError> {
    let env: SearchEnvelope = serde_json::from_str(body).map_err(|e| LiteratureError::Parse {
        message: e.to_string(),
        raw: body.to_string(),
    })?;
    Ok(env.esearchresult.idlist)
}

fn month_number(m: &str) -> Option<u32> {
    const NAMES: [&str; 12] = ["jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"];
    m.parse().ok().or_else(|| {
        let lower = m.to_lowercase();
        NAMES.iter().position(|n| lower.starts_with(n)).map(|i| i as u32 + 1)
    })
}

#[derive(Default)]
struct Partial {
    pmid: String,
    title: String,
    text: Vec<String>,
    year: Option<i32>,
    month: Option<u32>,
    day: Option<u32>,
}

/// Parses a PubmedArticleSet document into abstracts.
pub(crate) fn parse_fetch(body: &str) -> Result<Vec<Abstract>, LiteratureError> {
    let bad = |message: String| LiteratureError::Parse {
        message,
        raw: body.to_string(),
    };
    let mut reader = Reader::from_str(body);
    reader.config_mut().trim_text(true);
    let now = Utc::now();
    let mut path: Vec<String> = Vec::new();
    let mut cur: Option<Partial> = None;
    let mut out = Vec::new();
    let mut saw_root = false;
    loop {
        match reader.read_event().map_err(|e| bad(e.to_string()))? {
            Event::Start(e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                if name == "PubmedArticleSet" {
                    saw_root = true;
                }
                if name == "PubmedArticle" {
                    cur = Some(Partial::default());
                }
                if name == "AbstractText" {
                    if let Some(p) = cur.as_mut() {
                        p.text.push(String::new());
                    }
                }
                path.push(name);
            }
            Event::End(_) => {
                let name = path.pop().unwrap_or_default();
                if name == "PubmedArticle" {
                    let p = cur.take().expect("open article");
                    if p.pmid.is_empty() {
                        return Err(bad("article without PMID".into()));
                    }
                    let published = p
                        .year
                        .and_then(|y| NaiveDate::from_ymd_opt(y, p.month.unwrap_or(1), p.day.unwrap_or(1)));
                    out.push(Abstract {
                        pmid: p.pmid,
                        title: p.title.trim().to_string(),
                        text: p.text.iter().map(|t| t.trim()).filter(|t| !t.is_empty()).collect::<Vec<_>>().join(" "),
                        published,
                        retrieved_at: now,
                    });
                }
            }
            Event::Empty(e) => {
                if e.name().as_ref() == b"PubmedArticleSet" {
                    saw_root = true;
                }
            }
            Event::Text(t) => {
                let text = t.unescape().map_err(|e| bad(e.to_string()))?.into_owned();
                let Some(p) = cur.as_mut() else { continue };
                let leaf = path.last().map(String::as_str).unwrap_or("");
                let parent = path.len().checked_sub(2).map(|i| path[i].as_str()).unwrap_or("");
                let in_pubdate = path.iter().any(|s| s == "PubDate");
                match leaf {
                    "PMID" if parent == "MedlineCitation" && p.pmid.is_empty() => p.pmid = text.trim().to_string(),
                    "Year" if in_pubdate => p.year = text.trim().parse().ok(),
                    "Month" if in_pubdate => p.month = month_number(text.trim()),
                    "Day" if in_pubdate => p.day = text.trim().parse().ok(),
                    "MedlineDate" if in_pubdate && p.year.is_none() => {
                        p.year = text.get(..4).and_then(|y| y.parse().ok())
                    }
                    _ => {
                        if path.iter().any(|s| s == "ArticleTitle") {
                            if !p.title.is_empty() {
                                p.title.push(' ');
                            }
                            p.title.push_str(&text);
                        } else if path.iter().any(|s| s == "AbstractText") {
                            if let Some(last) = p.text.last_mut() {
                                if !last.is_empty() {
                                    last.push(' ');
                                }
                                last.push_str(&text);
                            }
                        }
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !saw_root {
        return Err(bad("missing PubmedArticleSet root".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const XML: &str = r#"<?xml version="1.0"?>
<PubmedArticleSet>
 <PubmedArticle>
  <MedlineCitation>
   <PMID Version="1">32547705</PMID>
   <Article>
    <Journal><JournalIssue><PubDate><Year>2020</Year><Month>Jun</Month><Day>16</Day></PubDate></JournalIssue></Journal>
    <ArticleTitle>Lapatinib with <i>AZD9291</i> &amp; more</ArticleTitle>
    <Abstract>
     <AbstractText Label="BACKGROUND">First part.</AbstractText>
     <AbstractText Label="RESULTS">Second part.</AbstractText>
    </Abstract>
   </Article>
   <CommentsCorrectionsList><CommentsCorrections><PMID>1111</PMID></CommentsCorrections></CommentsCorrectionsList>
  </MedlineCitation>
 </PubmedArticle>
</PubmedArticleSet>"#;

    #[test]
    fn parses_fetch_xml() {
        let got = parse_fetch(XML).unwrap();
        assert_eq!(got.len(), 1);
        let a = &got[0];
        assert_eq!(a.pmid, "32547705");
        assert_eq!(a.title, "Lapatinib with AZD9291 & more");
        assert_eq!(a.text, "First part. Second part.");
        assert_eq!(a.published, NaiveDate::from_ymd_opt(2020, 6, 16));
    }

    #[test]
    fn malformed_payloads_carry_raw_body() {
        match parse_search("{\"oops\": 1}") {
            Err(LiteratureError::Parse { raw, .. }) => assert_eq!(raw, "{\"oops\": 1}"),
            other => panic!("{other:?}"),
        }
        assert!(parse_fetch("<html>nope</html>").is_err());
        assert!(matches!(parse_fetch("<PubmedArticleSet><PubmedArticle></Wrong>"), Err(LiteratureError::Parse { .. })));
    }

    #[test]
    fn search_ids_parse() {
        let ids = parse_search(r#"{"header":{},"esearchresult":{"count":"2","idlist":["2","1"]}}"#).unwrap();
        assert_eq!(ids, ["2", "1"]);
    }

    #[test]
    fn bucket_spaces_requests() {
        let b = TokenBucket::new(50.0, 1.0);
        let t = Instant::now();
        for _ in 0..6 {
            b.acquire();
        }
        // one token up front, then five refills at 20 ms each
        assert!(t.elapsed() >= Duration::from_millis(90), "{:?}", t.elapsed());
    }
}
