//! Stage orchestration with content-hash caching.
//!
//! Stages run in a fixed order: queries, fetch, signatures, cluster, wsd,
//! eval. Each stage reads its inputs from the output directory (or the
//! configured lexicon and corpus), writes its artifacts through
//! temp-then-rename, and records a hash of its inputs together with hashes of
//! what it wrote. A later run with the same input hash and intact outputs skips
//! the stage.
//!
//! Layout under `output_dir`:
//!
//! ```text
//! queries/<word>.txt, <word>.jsonl
//! collections/<word>/<n>/...           one directory per sense
//! signatures/<word>/<n>.sig, <n>.freq
//! hierarchy/<word>.dend, <word>.json, <word>.<level>.part, <word>/<members>.sig
//! predictions/<method>.jsonl
//! report.txt, report.csv, report.jsonl
//! run-manifest.json, config.json, .cache/, .lock
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::json;
use walkdir::WalkDir;

use crate::cluster::{agglomerate, granularity_levels, Dendrogram, Level, Linkage};
use crate::error::{Error, Result};
use crate::evalharness::{
    load_corpus, parse_predictions, predict_all, render_predictions, render_report, report_from_predictions,
    EvalInputs, Method, Prediction, ReportFormat, TaggedInstance,
};
use crate::fsutil::{read_to_string, sha256_hex, write_atomic};
use crate::lexicon::{load_lexicon, CueSource, CueSources, Lexicon, SenseId, WordKey};
use crate::querygen::{build_query, extract_cuewords, parse_query, render_query_file, render_query_manifest, BooleanQuery};
use crate::retrieval::{fetch_queries, load_collection, save_collection, SourceConfig, SourceKind};
use crate::signature::{chi2_signatures, frequency_vector, ContingencyTable, FrequencyVector, TopicId, TopicSignature};
use crate::wsd::{cluster_id, cluster_signatures_from_vectors, ClusterSignatures, DEFAULT_WINDOW};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Queries,
    Fetch,
    Signatures,
    Cluster,
    Wsd,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Queries,
        Stage::Fetch,
        Stage::Signatures,
        Stage::Cluster,
        Stage::Wsd,
        Stage::Eval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Queries => "queries",
            Stage::Fetch => "fetch",
            Stage::Signatures => "signatures",
            Stage::Cluster => "cluster",
            Stage::Wsd => "wsd",
            Stage::Eval => "eval",
        }
    }

    /// Paths under the output directory that belong to this stage.
    fn owned(self) -> &'static [&'static str] {
        match self {
            Stage::Queries => &["queries"],
            Stage::Fetch => &["collections"],
            Stage::Signatures => &["signatures"],
            Stage::Cluster => &["hierarchy"],
            Stage::Wsd => &["predictions"],
            Stage::Eval => &["report.txt", "report.csv", "report.jsonl"],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub lexicon_path: PathBuf,
    /// Sense-tagged corpus; needed by `wsd` and `eval`.
    pub corpus_path: Option<PathBuf>,
    pub source: SourceConfig,
    pub sources: Vec<CueSource>,
    pub gloss_nouns_only: bool,
    pub window: usize,
    pub linkage: Linkage,
    pub levels: Vec<Level>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub methods: Vec<Method>,
    /// `lemma#pos` words to process; empty means the corpus lemmas, or every
    /// lexicon word when there is no corpus.
    pub targets: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            lexicon_path: "lexicon.lex".into(),
            corpus_path: None,
            source: SourceConfig::default(),
            sources: CueSource::ALL.to_vec(),
            gloss_nouns_only: false,
            window: DEFAULT_WINDOW,
            linkage: Linkage::Single,
            levels: Level::NAMED.to_vec(),
            seed: 42,
            output_dir: "out".into(),
            methods: Method::ALL.to_vec(),
            targets: Vec::new(),
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad configuration: {e}")))
    }

    /// Reads a configuration file; relative paths in it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = PipelineConfig::parse(&read_to_string(path)?)?;
        let abs = std::path::absolute(path).map_err(|e| Error::io(path, e))?;
        cfg.rebase(abs.parent().unwrap_or(Path::new("/")));
        Ok(cfg)
    }

    pub fn rebase(&mut self, base: &Path) {
        let fix = |p: &Path| if p.is_relative() { base.join(p) } else { p.to_path_buf() };
        self.lexicon_path = fix(&self.lexicon_path);
        self.corpus_path = self.corpus_path.as_deref().map(fix);
        self.output_dir = fix(&self.output_dir);
        if self.source.kind == SourceKind::Local {
            self.source.root_or_endpoint = fix(Path::new(&self.source.root_or_endpoint)).to_string_lossy().into_owned();
        }
    }

    pub fn render(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable config") + "\n"
    }

    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("serializable config").as_bytes())
    }

    pub fn cue_sources(&self) -> CueSources {
        CueSources {
            gloss_nouns_only: self.gloss_nouns_only,
            ..CueSources::only(self.sources.iter().copied())
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.window.is_multiple_of(2) {
            return Err(Error::Config(format!("window {} must be even", self.window)));
        }
        if self.levels.is_empty() {
            return Err(Error::Config("no levels requested".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".into()));
        }
        if self.sources.is_empty() {
            return Err(Error::Config("no cueword sources selected".into()));
        }
        self.source.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub cached: bool,
    pub input_key: String,
    pub millis: u128,
    pub outputs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub stages: Vec<StageRecord>,
    pub started_at: String,
    pub finished_at: String,
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    input_key: String,
    outputs: BTreeMap<String, String>,
}

/// Exclusive ownership of an output directory for the lifetime of a run.
struct OutputLock(PathBuf);

impl OutputLock {
    fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(".lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                use std::io::Write;
                let _ = writeln!(f, "{}", std::process::id());
                Ok(OutputLock(path))
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "{} is locked by another run (remove {} if that run is gone)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn is_hidden(name: &std::ffi::OsStr) -> bool {
    name.to_string_lossy().starts_with('.')
}

/// Content hash of a file, or of every non-hidden file below a directory
/// together with its relative path.
pub fn hash_path(path: &Path) -> Result<String> {
    if path.is_file() {
        return Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?));
    }
    if !path.is_dir() {
        return Ok("absent".into());
    }
    let mut listing = String::new();
    for entry in WalkDir::new(path)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !is_hidden(e.file_name()))
    {
        let entry = entry.map_err(|e| Error::Config(format!("cannot walk {}: {e}", path.display())))?;
        if entry.file_type().is_file() {
            let rel = entry.path().strip_prefix(path).expect("inside root");
            let bytes = fs::read(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
            listing.push_str(&format!("{}\t{}\n", rel.to_string_lossy(), sha256_hex(&bytes)));
        }
    }
    Ok(sha256_hex(listing.as_bytes()))
}

fn word_file(word: &WordKey) -> String {
    word.to_string()
}

pub fn method_file(m: Method) -> String {
    format!("{}.jsonl", m.name())
}

pub fn members_file(members: &[u32]) -> String {
    let parts: Vec<String> = members.iter().map(u32::to_string).collect();
    format!("{}.sig", parts.join("+"))
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    out: PathBuf,
    force: bool,
    lex: Lexicon,
    targets: Vec<WordKey>,
}

fn prerequisite(stage: Stage, artifact: &Path) -> Error {
    Error::Prerequisite {
        stage: stage.name().into(),
        artifact: artifact.display().to_string(),
    }
}

fn require(stage: Stage, path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(prerequisite(stage, path))
    }
}

fn read_sense_list(path: &Path) -> Result<Vec<SenseId>> {
    read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::parse)
        .collect()
}

fn render_sense_list<'a>(senses: impl IntoIterator<Item = &'a SenseId>) -> String {
    senses.into_iter().map(|s| format!("{s}\n")).collect()
}

#[derive(Serialize, Deserialize)]
struct QueryLine {
    sense: SenseId,
    query: String,
}

impl Run<'_> {
    fn dir(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn corpus(&self, stage: Stage) -> Result<Vec<TaggedInstance>> {
        let path = self
            .cfg
            .corpus_path
            .as_ref()
            .ok_or_else(|| Error::Config(format!("stage `{stage}` needs corpus_path")))?;
        require(stage, path)?;
        let targets: BTreeSet<&WordKey> = self.targets.iter().collect();
        Ok(load_corpus(path)?.into_iter().filter(|i| targets.contains(&i.word())).collect())
    }

    fn input_key(&self, stage: Stage) -> Result<String> {
        let h = |p: PathBuf| hash_path(&p);
        let cfg = self.cfg;
        let targets: Vec<String> = self.targets.iter().map(|t| t.to_string()).collect();
        let corpus = match &cfg.corpus_path {
            Some(p) => hash_path(p)?,
            None => "none".into(),
        };
        let value = match stage {
            Stage::Queries => json!({
                "lexicon": hash_path(&cfg.lexicon_path)?,
                "sources": cfg.sources,
                "gloss_nouns_only": cfg.gloss_nouns_only,
                "targets": targets,
            }),
            Stage::Fetch => {
                let local = match cfg.source.kind {
                    SourceKind::Local => hash_path(Path::new(&cfg.source.root_or_endpoint))?,
                    SourceKind::Remote => "remote".into(),
                };
                json!({ "queries": h(self.dir("queries"))?, "source": cfg.source, "local": local })
            }
            Stage::Signatures => json!({ "collections": h(self.dir("collections"))? }),
            Stage::Cluster => json!({ "signatures": h(self.dir("signatures"))?, "linkage": cfg.linkage }),
            Stage::Wsd => json!({
                "signatures": h(self.dir("signatures"))?,
                "hierarchy": h(self.dir("hierarchy"))?,
                "lexicon": hash_path(&cfg.lexicon_path)?,
                "corpus": corpus,
                "window": cfg.window,
                "methods": cfg.methods,
                "targets": targets,
            }),
            Stage::Eval => json!({
                "predictions": h(self.dir("predictions"))?,
                "hierarchy": h(self.dir("hierarchy"))?,
                "lexicon": hash_path(&cfg.lexicon_path)?,
                "corpus": corpus,
                "methods": cfg.methods,
                "levels": cfg.levels,
                "targets": targets,
            }),
        };
        let text = serde_json::to_string(&json!({ "stage": stage.name(), "inputs": value })).expect("json");
        Ok(sha256_hex(text.as_bytes()))
    }

    fn cache_path(&self, stage: Stage) -> PathBuf {
        self.out.join(".cache").join(format!("{}.json", stage.name()))
    }

    fn cache_hit(&self, stage: Stage, key: &str) -> bool {
        if self.force {
            return false;
        }
        let Ok(text) = fs::read_to_string(self.cache_path(stage)) else {
            return false;
        };
        let Ok(record) = serde_json::from_str::<CacheRecord>(&text) else {
            return false;
        };
        record.input_key == key
            && record.outputs.iter().all(|(rel, sha)| {
                fs::read(self.out.join(rel)).is_ok_and(|bytes| sha256_hex(&bytes) == *sha)
            })
    }

    /// Deletes files of the stage's directories that this run did not write.
    fn remove_stale(&self, stage: Stage, written: &BTreeSet<PathBuf>) -> Result<()> {
        for owned in stage.owned() {
            let root = self.out.join(owned);
            if root.is_file() && !written.contains(&root) {
                fs::remove_file(&root).map_err(|e| Error::io(&root, e))?;
            }
            if !root.is_dir() {
                continue;
            }
            for entry in WalkDir::new(&root).into_iter().filter_map(|e| e.ok()) {
                if entry.file_type().is_file() && !written.contains(entry.path()) {
                    fs::remove_file(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
                }
            }
        }
        Ok(())
    }

    fn run_stage(&self, stage: Stage) -> Result<StageRecord> {
        let start = Instant::now();
        let key = self.input_key(stage)?;
        if self.cache_hit(stage, &key) {
            info!("{stage}: up to date");
            return Ok(StageRecord {
                stage: stage.name().into(),
                cached: true,
                input_key: key,
                millis: start.elapsed().as_millis(),
                outputs: 0,
            });
        }
        info!("{stage}: running");
        let written = match stage {
            Stage::Queries => self.queries(),
            Stage::Fetch => self.fetch(),
            Stage::Signatures => self.signatures(),
            Stage::Cluster => self.cluster(),
            Stage::Wsd => self.wsd(),
            Stage::Eval => self.eval(),
        }
        .map_err(|e| match e {
            Error::Prerequisite { .. } | Error::Stage { .. } => e,
            other => Error::Stage {
                stage: stage.name().into(),
                source: Box::new(other),
            },
        })?;
        let written: BTreeSet<PathBuf> = written.into_iter().collect();
        self.remove_stale(stage, &written)?;
        let mut outputs = BTreeMap::new();
        for path in &written {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            let rel = path.strip_prefix(&self.out).expect("output inside output_dir");
            outputs.insert(rel.to_string_lossy().into_owned(), sha256_hex(&bytes));
        }
        let record = CacheRecord {
            input_key: key.clone(),
            outputs,
        };
        let n = record.outputs.len();
        write_atomic(
            &self.cache_path(stage),
            serde_json::to_string_pretty(&record).expect("json").as_bytes(),
        )?;
        Ok(StageRecord {
            stage: stage.name().into(),
            cached: false,
            input_key: key,
            millis: start.elapsed().as_millis(),
            outputs: n,
        })
    }

    fn write(&self, written: &mut Vec<PathBuf>, path: PathBuf, bytes: &[u8]) -> Result<()> {
        write_atomic(&path, bytes)?;
        written.push(path);
        Ok(())
    }

    fn queries(&self) -> Result<Vec<PathBuf>> {
        let dir = self.dir("queries");
        let sources = self.cfg.cue_sources();
        let mut written = Vec::new();
        for word in &self.targets {
            let map = extract_cuewords(&self.lex, &word.lemma, word.pos, &sources)?;
            let mut queries = Vec::new();
            for sense in map.per_sense.keys() {
                match build_query(&map, sense) {
                    Ok(q) => queries.push(q),
                    Err(e @ Error::UnbuildableQuery { .. }) => warn!("{e}"),
                    Err(e) => return Err(e),
                }
            }
            let name = word_file(word);
            self.write(&mut written, dir.join(format!("{name}.txt")), render_query_file(&queries).as_bytes())?;
            self.write(
                &mut written,
                dir.join(format!("{name}.jsonl")),
                render_query_manifest(&queries).as_bytes(),
            )?;
        }
        Ok(written)
    }

    fn load_queries(&self, word: &WordKey) -> Result<Vec<BooleanQuery>> {
        let path = self.dir("queries").join(format!("{}.jsonl", word_file(word)));
        require(Stage::Fetch, &path)?;
        read_to_string(&path)?
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                let line: QueryLine = serde_json::from_str(l).map_err(|e| Error::format(i + 1, e.to_string()))?;
                Ok(BooleanQuery {
                    target: line.sense,
                    root: parse_query(&line.query)?,
                })
            })
            .collect()
    }

    fn fetch(&self) -> Result<Vec<PathBuf>> {
        let root = self.dir("collections");
        let mut written = Vec::new();
        for word in &self.targets {
            let queries = self.load_queries(word)?;
            let outcome = fetch_queries(&queries, &self.cfg.source)?;
            if outcome.collections.is_empty() {
                warn!("no collection fetched for {word}");
            }
            for c in outcome.collections.values() {
                let dir = save_collection(c, &root)?;
                for d in &c.documents {
                    written.push(dir.join(format!("{}.txt", d.doc_id)));
                }
                written.push(dir.join("query"));
                written.push(dir.join("manifest"));
            }
            let word_dir = root.join(word_file(word));
            self.write(
                &mut written,
                word_dir.join("senses"),
                render_sense_list(outcome.collections.keys()).as_bytes(),
            )?;
            let skipped: String = outcome
                .skipped
                .iter()
                .map(|s| serde_json::to_string(s).expect("json") + "\n")
                .collect();
            self.write(&mut written, word_dir.join("skipped.jsonl"), skipped.as_bytes())?;
        }
        Ok(written)
    }

    fn signatures(&self) -> Result<Vec<PathBuf>> {
        let root = self.dir("collections");
        let out = self.dir("signatures");
        let mut written = Vec::new();
        for word in &self.targets {
            let list = root.join(word_file(word)).join("senses");
            require(Stage::Signatures, &list)?;
            let senses = read_sense_list(&list)?;
            let dir = out.join(word_file(word));
            let vectors = senses
                .iter()
                .map(|s| Ok(frequency_vector(&load_collection(&root, s)?)))
                .collect::<Result<Vec<FrequencyVector>>>()?;
            let table = ContingencyTable::new(vectors.clone());
            if table.grand_total() == 0 {
                warn!("{word}: every collection is empty, no signatures");
            } else {
                for (sense, (v, sig)) in senses.iter().zip(vectors.iter().zip(chi2_signatures(&table)?)) {
                    self.write(&mut written, dir.join(format!("{}.freq", sense.sense_no)), v.render().as_bytes())?;
                    self.write(&mut written, dir.join(format!("{}.sig", sense.sense_no)), sig.render().as_bytes())?;
                }
            }
            let kept: Vec<&SenseId> = if table.grand_total() == 0 { Vec::new() } else { senses.iter().collect() };
            self.write(&mut written, dir.join("senses"), render_sense_list(kept).as_bytes())?;
        }
        Ok(written)
    }

    fn load_vectors(&self, stage: Stage, word: &WordKey) -> Result<Vec<FrequencyVector>> {
        let dir = self.dir("signatures").join(word_file(word));
        let list = dir.join("senses");
        require(stage, &list)?;
        read_sense_list(&list)?
            .iter()
            .map(|s| FrequencyVector::parse(&read_to_string(&dir.join(format!("{}.freq", s.sense_no)))?))
            .collect()
    }

    fn load_signatures(&self, stage: Stage, word: &WordKey) -> Result<BTreeMap<SenseId, TopicSignature>> {
        let dir = self.dir("signatures").join(word_file(word));
        let list = dir.join("senses");
        require(stage, &list)?;
        read_sense_list(&list)?
            .into_iter()
            .map(|s| {
                let sig = TopicSignature::parse(&read_to_string(&dir.join(format!("{}.sig", s.sense_no)))?)?;
                Ok((s, sig))
            })
            .collect()
    }

    fn cluster(&self) -> Result<Vec<PathBuf>> {
        let out = self.dir("hierarchy");
        let mut written = Vec::new();
        for word in &self.targets {
            let vectors: Vec<FrequencyVector> = self
                .load_vectors(Stage::Cluster, word)?
                .into_iter()
                .filter(|v| {
                    if v.is_empty() {
                        warn!("{}: empty collection left out of clustering", v.owner);
                    }
                    !v.is_empty()
                })
                .collect();
            if vectors.len() < 2 {
                warn!("{word}: fewer than two non-empty collections, no hierarchy");
                continue;
            }
            let d = agglomerate(&vectors, self.cfg.linkage)?;
            let name = word_file(word);
            self.write(&mut written, out.join(format!("{name}.dend")), (d.render_nested() + "\n").as_bytes())?;
            self.write(&mut written, out.join(format!("{name}.json")), d.render_manifest().as_bytes())?;
            for (level, part) in granularity_levels(&d) {
                self.write(&mut written, out.join(format!("{name}.{level}.part")), part.render().as_bytes())?;
            }
            let by_sense: BTreeMap<SenseId, FrequencyVector> = vectors
                .into_iter()
                .map(|v| match &v.owner {
                    TopicId::Sense(s) => (s.clone(), v.clone()),
                    TopicId::Cluster(_) => unreachable!("sense vectors"),
                })
                .collect();
            for (id, sig) in cluster_signatures_from_vectors(&by_sense, &d)? {
                self.write(&mut written, out.join(&name).join(members_file(&id.members)), sig.render().as_bytes())?;
            }
        }
        Ok(written)
    }

    fn load_hierarchy(&self, word: &WordKey) -> Result<Option<(Dendrogram, ClusterSignatures)>> {
        let dir = self.dir("hierarchy");
        let manifest = dir.join(format!("{}.json", word_file(word)));
        if !manifest.exists() {
            return Ok(None);
        }
        let d = Dendrogram::parse_manifest(&read_to_string(&manifest)?)?;
        let mut sigs = ClusterSignatures::new();
        for node in d.internal_nodes_top_down() {
            let (l, r) = d.children(node).expect("internal node");
            for child in [l, r] {
                let id = cluster_id(&d, child);
                let path = dir.join(word_file(word)).join(members_file(&id.members));
                require(Stage::Wsd, &path)?;
                sigs.insert(id, TopicSignature::parse(&read_to_string(&path)?)?);
            }
        }
        Ok(Some((d, sigs)))
    }

    fn eval_inputs(&self, stage: Stage, need_sigs: bool) -> Result<EvalInputs> {
        let mut inputs = EvalInputs::new(self.cfg.window);
        inputs.lexicon = Some(self.lex.clone());
        for word in &self.targets {
            if need_sigs {
                inputs.signatures.insert(word.clone(), self.load_signatures(stage, word)?);
            }
            if let Some((d, cs)) = self.load_hierarchy(word)? {
                inputs.dendrograms.insert(word.clone(), d);
                inputs.cluster_signatures.insert(word.clone(), cs);
            }
        }
        Ok(inputs)
    }

    fn wsd(&self) -> Result<Vec<PathBuf>> {
        let corpus = self.corpus(Stage::Wsd)?;
        let need_sigs = self
            .cfg
            .methods
            .iter()
            .any(|m| matches!(m, Method::Sign | Method::HierOrig | Method::HierNew));
        if need_sigs {
            require(Stage::Wsd, &self.dir("signatures"))?;
        }
        let inputs = self.eval_inputs(Stage::Wsd, need_sigs)?;
        let predictions = predict_all(&corpus, &inputs, &self.cfg.methods).map_err(|e| restage(e, Stage::Wsd))?;
        let mut by_method: BTreeMap<Method, Vec<Prediction>> = BTreeMap::new();
        for p in predictions {
            by_method.entry(p.method).or_default().push(p);
        }
        let dir = self.dir("predictions");
        let mut written = Vec::new();
        for m in self.cfg.methods.iter().filter(|&&m| m != Method::Ran) {
            let preds = by_method.remove(m).unwrap_or_default();
            self.write(&mut written, dir.join(method_file(*m)), render_predictions(&preds).as_bytes())?;
        }
        Ok(written)
    }

    fn eval(&self) -> Result<Vec<PathBuf>> {
        let corpus = self.corpus(Stage::Eval)?;
        let mut predictions = Vec::new();
        for m in self.cfg.methods.iter().filter(|&&m| m != Method::Ran) {
            let path = self.dir("predictions").join(method_file(*m));
            require(Stage::Eval, &path)?;
            predictions.extend(parse_predictions(&read_to_string(&path)?)?);
        }
        let inputs = self.eval_inputs(Stage::Eval, false)?;
        let report = report_from_predictions(&corpus, &predictions, &inputs, &self.cfg.methods, &self.cfg.levels)
            .map_err(|e| restage(e, Stage::Eval))?;
        let mut written = Vec::new();
        for (file, format) in [
            ("report.txt", ReportFormat::Table),
            ("report.csv", ReportFormat::Csv),
            ("report.jsonl", ReportFormat::JsonLines),
        ] {
            self.write(&mut written, self.out.join(file), render_report(&report, format).as_bytes())?;
        }
        Ok(written)
    }
}

fn restage(e: Error, stage: Stage) -> Error {
    match e {
        Error::Prerequisite { artifact, .. } => Error::Prerequisite {
            stage: stage.name().into(),
            artifact,
        },
        other => other,
    }
}

fn resolve_targets(cfg: &PipelineConfig, lex: &Lexicon) -> Result<Vec<WordKey>> {
    let words: BTreeSet<WordKey> = if !cfg.targets.is_empty() {
        cfg.targets.iter().map(|t| t.parse()).collect::<Result<_>>()?
    } else if let Some(path) = cfg.corpus_path.as_ref().filter(|p| p.exists()) {
        load_corpus(path)?.iter().map(TaggedInstance::word).collect()
    } else {
        lex.words().cloned().collect()
    };
    for w in &words {
        if lex.senses_of(&w.lemma, w.pos).is_empty() {
            return Err(Error::Config(format!("target {w} is not in the lexicon")));
        }
    }
    Ok(words.into_iter().collect())
}

/// Runs the requested stages in dependency order and writes the run manifest.
pub fn run_pipeline(cfg: &PipelineConfig, stages: &[Stage], force: bool) -> Result<RunManifest> {
    cfg.validate()?;
    let started_at = chrono::Utc::now().to_rfc3339();
    let out = cfg.output_dir.clone();
    let _lock = OutputLock::acquire(&out)?;
    let lex = load_lexicon(&cfg.lexicon_path)?;
    let targets = resolve_targets(cfg, &lex)?;
    let run = Run {
        cfg,
        out: out.clone(),
        force,
        lex,
        targets,
    };
    write_atomic(&out.join("config.json"), cfg.render().as_bytes())?;
    let mut order: Vec<Stage> = stages.to_vec();
    order.sort();
    order.dedup();
    let mut records = Vec::new();
    for stage in order {
        records.push(run.run_stage(stage)?);
    }
    let mut inputs = BTreeMap::new();
    inputs.insert("lexicon".to_string(), hash_path(&cfg.lexicon_path)?);
    if let Some(p) = &cfg.corpus_path {
        inputs.insert("corpus".to_string(), hash_path(p)?);
    }
    if cfg.source.kind == SourceKind::Local {
        inputs.insert("documents".to_string(), hash_path(Path::new(&cfg.source.root_or_endpoint))?);
    }
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.hash(),
        inputs,
        stages: records,
        started_at,
        finished_at: chrono::Utc::now().to_rfc3339(),
    };
    write_atomic(
        &out.join("run-manifest.json"),
        (serde_json::to_string_pretty(&manifest).expect("json") + "\n").as_bytes(),
    )?;
    Ok(manifest)
}
