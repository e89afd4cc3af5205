//! Per-sense document collections.
//!
//! A sense's query is resolved through a [`SourceConfig`]: either a local
//! directory of text/HTML files, scanned in path order and filtered with the
//! exact query semantics, or a remote JSON search endpoint whose result URLs
//! are fetched in full.
//!
//! Remote protocol: `GET <endpoint>?q=<rendered query>` returns a JSON array of
//! result URLs in rank order; each URL is then fetched with a plain `GET`. When
//! `api_key_env` names an environment variable its value is sent as a bearer
//! token with the search request.
//!
//! Collections are persisted as
//! `collections/<lemma>#<pos>/<sense_no>/manifest` (one JSON object per
//! document) plus `<doc_id>.txt` bodies and a `query` file.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::{read_to_string, sha256_hex, write_atomic};
use crate::lexicon::{CueSources, Lexicon, Pos, SenseId};
use crate::querygen::{build_query, extract_cuewords, render_query, BooleanQuery, DocIndex};
use crate::signature::tokenize;

/// Timestamp recorded for documents read from a local corpus.
pub const LOCAL_TIMESTAMP: &str = "1970-01-01T00:00:00Z";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub uri: String,
    pub text: String,
    pub retrieved_at: String,
}

impl Document {
    pub fn local(doc_id: impl Into<String>, uri: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            doc_id: doc_id.into(),
            uri: uri.into(),
            text: text.into(),
            retrieved_at: LOCAL_TIMESTAMP.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DocumentCollection {
    pub sense: SenseId,
    pub documents: Vec<Document>,
    pub query_rendered: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Local,
    Remote,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceConfig {
    pub kind: SourceKind,
    /// Corpus directory for `local`, search endpoint URL for `remote`.
    pub root_or_endpoint: String,
    pub max_docs: usize,
    pub concurrency: usize,
    /// Per request, in seconds.
    pub timeout: f64,
    pub retries: u32,
    pub api_key_env: Option<String>,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            kind: SourceKind::Local,
            root_or_endpoint: "corpus".into(),
            max_docs: 100,
            concurrency: 4,
            timeout: 30.0,
            retries: 2,
            api_key_env: None,
        }
    }
}

impl SourceConfig {
    pub fn local(root: impl Into<String>) -> Self {
        SourceConfig {
            root_or_endpoint: root.into(),
            ..SourceConfig::default()
        }
    }

    pub fn remote(endpoint: impl Into<String>) -> Self {
        SourceConfig {
            kind: SourceKind::Remote,
            root_or_endpoint: endpoint.into(),
            ..SourceConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_docs == 0 {
            return Err(Error::Config("max_docs must be at least 1".into()));
        }
        if self.concurrency == 0 {
            return Err(Error::Config("concurrency must be at least 1".into()));
        }
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(Error::Config("timeout must be a positive number of seconds".into()));
        }
        if self.root_or_endpoint.is_empty() {
            return Err(Error::Config("missing corpus root or endpoint".into()));
        }
        Ok(())
    }
}

/// Removes markup tags and comments and decodes character entities.
pub fn strip_markup(html: &str) -> String {
    let mut out = String::with_capacity(html.len());
    let mut rest = html;
    while let Some(start) = rest.find('<') {
        out.push_str(&rest[..start]);
        let after = &rest[start..];
        let end = if after.starts_with("<!--") {
            after.find("-->").map(|e| e + 3)
        } else {
            after.find('>').map(|e| e + 1)
        };
        match end {
            Some(e) => {
                out.push(' ');
                rest = &after[e..];
            }
            None => {
                rest = "";
            }
        }
    }
    out.push_str(rest);
    decode_entities(&out)
}

const NAMED_ENTITIES: &[(&str, char)] = &[
    ("amp", '&'), ("lt", '<'), ("gt", '>'), ("quot", '"'), ("apos", '\''), ("nbsp", '\u{a0}'),
    ("copy", '©'), ("reg", '®'), ("trade", '™'), ("hellip", '…'), ("mdash", '—'), ("ndash", '–'),
    ("lsquo", '‘'), ("rsquo", '’'), ("ldquo", '“'), ("rdquo", '”'), ("laquo", '«'), ("raquo", '»'),
    ("middot", '·'), ("bull", '•'), ("deg", '°'), ("euro", '€'), ("pound", '£'), ("yen", '¥'),
    ("cent", '¢'), ("sect", '§'), ("para", '¶'), ("times", '×'), ("divide", '÷'),
    ("aacute", 'á'), ("eacute", 'é'), ("iacute", 'í'), ("oacute", 'ó'), ("uacute", 'ú'),
    ("agrave", 'à'), ("egrave", 'è'), ("ntilde", 'ñ'), ("uuml", 'ü'), ("ouml", 'ö'), ("auml", 'ä'),
    ("ccedil", 'ç'), ("szlig", 'ß'),
];

/// Decodes numeric references and the common named entities; anything else is left as is.
fn decode_entities(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let after = &rest[amp + 1..];
        let decoded = after.find(';').filter(|&semi| semi <= 10).and_then(|semi| {
            let name = &after[..semi];
            let ch = if let Some(num) = name.strip_prefix('#') {
                let code = match num.strip_prefix(['x', 'X']) {
                    Some(hex) => u32::from_str_radix(hex, 16).ok(),
                    None => num.parse::<u32>().ok(),
                };
                code.and_then(char::from_u32)
            } else {
                NAMED_ENTITIES.iter().find(|(n, _)| *n == name).map(|&(_, c)| c)
            };
            ch.map(|c| (c, semi))
        });
        match decoded {
            Some((c, semi)) => {
                out.push(c);
                rest = &after[semi + 1..];
            }
            None => {
                out.push('&');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn is_markup_path(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("html" | "htm" | "xhtml")
    )
}

fn doc_id_for(rel: &str) -> String {
    rel.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

/// A local directory loaded once and indexed for repeated queries.
pub struct LocalCorpus {
    docs: Vec<(Document, DocIndex)>,
}

impl LocalCorpus {
    pub fn load(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        if !root.is_dir() {
            return Err(Error::Config(format!("corpus root {} is not a directory", root.display())));
        }
        let mut docs = Vec::new();
        let mut ids = HashSet::new();
        for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
            let entry = entry.map_err(|e| Error::Config(format!("walking {}: {e}", root.display())))?;
            if !entry.file_type().is_file() {
                continue;
            }
            let path = entry.path();
            let rel = path
                .strip_prefix(root)
                .unwrap_or(path)
                .to_string_lossy()
                .replace('\\', "/");
            if rel.split('/').any(|part| part.starts_with('.')) {
                continue;
            }
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            let raw = String::from_utf8_lossy(&bytes);
            let text = if is_markup_path(path) { strip_markup(&raw) } else { raw.into_owned() };
            let mut doc_id = doc_id_for(&rel);
            while !ids.insert(doc_id.clone()) {
                doc_id.push('_');
            }
            let index = DocIndex::new(&tokenize(&text));
            docs.push((Document::local(doc_id, rel, text), index));
        }
        Ok(LocalCorpus { docs })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.docs.iter().map(|(d, _)| d)
    }

    /// Matching documents in path order, at most `max_docs`.
    pub fn search(&self, q: &BooleanQuery, max_docs: usize) -> Vec<Document> {
        self.docs
            .iter()
            .filter(|(_, idx)| idx.eval(&q.root))
            .take(max_docs)
            .map(|(d, _)| d.clone())
            .collect()
    }
}

/// Runs `f` over `items` with at most `limit` calls in flight, keeping input order.
pub(crate) fn bounded_map<T: Sync, R: Send>(
    items: &[T],
    limit: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..limit.max(1).min(items.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                results.lock().expect("results lock")[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every item processed"))
        .collect()
}

/// Client for the generic JSON search protocol.
pub struct RemoteClient {
    agent: ureq::Agent,
    endpoint: String,
    api_key: Option<String>,
    retries: u32,
    concurrency: usize,
    max_docs: usize,
}

impl RemoteClient {
    pub fn new(src: &SourceConfig) -> Result<Self> {
        src.validate()?;
        let api_key = match &src.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                Error::Config(format!("environment variable {var} (api key) is not set"))
            })?),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(src.timeout)))
            .build()
            .into();
        Ok(RemoteClient {
            agent,
            endpoint: src.root_or_endpoint.clone(),
            api_key,
            retries: src.retries,
            concurrency: src.concurrency,
            max_docs: src.max_docs,
        })
    }

    fn with_retries<T>(&self, uri: &str, op: impl Fn() -> std::result::Result<T, String>) -> Result<T> {
        let mut last = String::new();
        for attempt in 0..=self.retries {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) => {
                    if attempt < self.retries {
                        warn!("attempt {} for {uri} failed: {e}", attempt + 1);
                    }
                    last = e;
                }
            }
        }
        Err(Error::Transport {
            uri: uri.to_string(),
            message: format!("{last} (after {} attempts)", self.retries + 1),
        })
    }

    /// Result URLs for a rendered query, deduplicated, rank order kept.
    pub fn result_urls(&self, query: &str) -> Result<Vec<String>> {
        let urls: Vec<String> = self.with_retries(&self.endpoint, || {
            let mut req = self.agent.get(&self.endpoint).query("q", query);
            if let Some(key) = &self.api_key {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
            let mut resp = req.call().map_err(|e| e.to_string())?;
            let body = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
            serde_json::from_str::<Vec<String>>(&body).map_err(|e| format!("bad search response: {e}"))
        })?;
        let mut seen = HashSet::new();
        Ok(urls
            .into_iter()
            .filter(|u| seen.insert(u.clone()))
            .take(self.max_docs)
            .collect())
    }

    pub fn fetch(&self, uri: &str) -> Result<Document> {
        let body = self.with_retries(uri, || {
            let mut resp = self.agent.get(uri).call().map_err(|e| e.to_string())?;
            resp.body_mut().read_to_string().map_err(|e| e.to_string())
        })?;
        Ok(Document {
            doc_id: sha256_hex(uri.as_bytes())[..16].to_string(),
            uri: uri.to_string(),
            text: strip_markup(&body),
            retrieved_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        })
    }

    pub fn search(&self, q: &BooleanQuery) -> Result<DocumentCollection> {
        let rendered = render_query(q);
        let urls = self.result_urls(&rendered)?;
        let documents = bounded_map(&urls, self.concurrency, |u| self.fetch(u))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(DocumentCollection {
            sense: q.target.clone(),
            documents,
            query_rendered: rendered,
        })
    }
}

pub fn search(src: &SourceConfig, q: &BooleanQuery) -> Result<DocumentCollection> {
    src.validate()?;
    match src.kind {
        SourceKind::Local => {
            let corpus = LocalCorpus::load(&src.root_or_endpoint)?;
            Ok(DocumentCollection {
                sense: q.target.clone(),
                documents: corpus.search(q, src.max_docs),
                query_rendered: render_query(q),
            })
        }
        SourceKind::Remote => RemoteClient::new(src)?.search(q),
    }
}

/// A sense that produced no collection, and why.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedSense {
    pub sense: SenseId,
    pub reason: String,
}

#[derive(Debug)]
pub struct FetchOutcome {
    pub collections: BTreeMap<SenseId, DocumentCollection>,
    pub skipped: Vec<SkippedSense>,
}

/// One collection per sense whose query could be built and searched.
/// Failures are recorded per sense; it is an error only when no sense succeeds.
pub fn fetch_collections(
    lex: &Lexicon,
    lemma: &str,
    pos: Pos,
    src: &SourceConfig,
    sources: &CueSources,
) -> Result<FetchOutcome> {
    src.validate()?;
    let map = extract_cuewords(lex, lemma, pos, sources)?;
    let mut skipped = Vec::new();
    let mut queries = Vec::new();
    for sense in map.per_sense.keys() {
        match build_query(&map, sense) {
            Ok(q) => queries.push(q),
            Err(e) => {
                warn!("skipping {sense}: {e}");
                skipped.push(SkippedSense {
                    sense: sense.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    let mut outcome = fetch_queries(&queries, src)?;
    outcome.skipped.extend(skipped);
    outcome.skipped.sort_by(|a, b| a.sense.cmp(&b.sense));
    if outcome.collections.is_empty() {
        let reasons: Vec<String> = outcome.skipped.iter().map(|s| format!("{}: {}", s.sense, s.reason)).collect();
        return Err(Error::Config(format!(
            "no collection could be built for {lemma}#{pos}: {}",
            reasons.join("; ")
        )));
    }
    Ok(outcome)
}

/// Runs prebuilt queries against a source, at most `src.concurrency` at a time.
/// Per-query failures are recorded as skipped senses.
pub fn fetch_queries(queries: &[BooleanQuery], src: &SourceConfig) -> Result<FetchOutcome> {
    src.validate()?;
    let mut skipped = Vec::new();
    let results: Vec<Result<DocumentCollection>> = match src.kind {
        SourceKind::Local => {
            let corpus = LocalCorpus::load(&src.root_or_endpoint)?;
            bounded_map(queries, src.concurrency, |q| {
                Ok(DocumentCollection {
                    sense: q.target.clone(),
                    documents: corpus.search(q, src.max_docs),
                    query_rendered: render_query(q),
                })
            })
        }
        SourceKind::Remote => {
            let client = RemoteClient::new(src)?;
            bounded_map(queries, src.concurrency, |q| client.search(q))
        }
    };
    let mut collections = BTreeMap::new();
    for (q, r) in queries.iter().zip(results) {
        match r {
            Ok(c) => {
                collections.insert(q.target.clone(), c);
            }
            Err(e) => {
                warn!("search for {} failed: {e}", q.target);
                skipped.push(SkippedSense {
                    sense: q.target.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    skipped.sort_by(|a, b| a.sense.cmp(&b.sense));
    Ok(FetchOutcome {
        collections,
        skipped,
    })
}

#[derive(Serialize, Deserialize)]
struct ManifestLine {
    doc_id: String,
    uri: String,
    retrieved_at: String,
    sha256: String,
}

/// `<root>/<lemma>#<pos>/<sense_no>`
pub fn collection_dir(root: &Path, sense: &SenseId) -> PathBuf {
    root.join(sense.word().to_string()).join(sense.sense_no.to_string())
}

/// Serialized manifest of a collection (also used as a content fingerprint).
pub fn render_manifest(c: &DocumentCollection) -> String {
    let mut out = String::new();
    for d in &c.documents {
        let line = ManifestLine {
            doc_id: d.doc_id.clone(),
            uri: d.uri.clone(),
            retrieved_at: d.retrieved_at.clone(),
            sha256: sha256_hex(d.text.as_bytes()),
        };
        out.push_str(&serde_json::to_string(&line).expect("manifest line serializes"));
        out.push('\n');
    }
    out
}

/// Writes bodies first and the manifest last, each through a temp-then-rename.
pub fn save_collection(c: &DocumentCollection, root: &Path) -> Result<PathBuf> {
    let dir = collection_dir(root, &c.sense);
    let mut ids = HashSet::new();
    for d in &c.documents {
        if !ids.insert(d.doc_id.as_str()) {
            return Err(Error::Input(format!("duplicate doc_id {} in {}", d.doc_id, c.sense)));
        }
        write_atomic(&dir.join(format!("{}.txt", d.doc_id)), d.text.as_bytes())?;
    }
    write_atomic(&dir.join("query"), c.query_rendered.as_bytes())?;
    write_atomic(&dir.join("manifest"), render_manifest(c).as_bytes())?;
    Ok(dir)
}

pub fn load_collection(root: &Path, sense: &SenseId) -> Result<DocumentCollection> {
    let dir = collection_dir(root, sense);
    let manifest_path = dir.join("manifest");
    let manifest = read_to_string(&manifest_path)?;
    let query_path = dir.join("query");
    let query_rendered = if query_path.exists() { read_to_string(&query_path)? } else { String::new() };
    let mut documents = Vec::new();
    for (i, line) in manifest.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let m: ManifestLine = serde_json::from_str(line)
            .map_err(|e| Error::format(i + 1, format!("{}: {e}", manifest_path.display())))?;
        let text = read_to_string(&dir.join(format!("{}.txt", m.doc_id)))?;
        if sha256_hex(text.as_bytes()) != m.sha256 {
            return Err(Error::format(i + 1, format!("checksum mismatch for {} in {}", m.doc_id, dir.display())));
        }
        documents.push(Document {
            doc_id: m.doc_id,
            uri: m.uri,
            text,
            retrieved_at: m.retrieved_at,
        });
    }
    Ok(DocumentCollection {
        sense: sense.clone(),
        documents,
        query_rendered,
    })
}

pub fn store_roundtrip(c: &DocumentCollection, dir: &Path) -> Result<DocumentCollection> {
    save_collection(c, dir)?;
    load_collection(dir, &c.sense)
}
