//! Precision reports over a sense-tagged corpus.
//!
//! Precision is the number of correct tags divided by the number of
//! occurrences; abstentions are not possible, undecided windows count as a
//! normal prediction of the lowest sense. At a clustered level a prediction is
//! correct when it falls in the same cluster as the gold sense. The random
//! baseline at a level with `k` clusters is `1/k`. Overall figures are
//! micro-averaged; a macro average is reported separately.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{granularity_levels, level_clusters, Dendrogram, Level, Partition};
use crate::error::{Error, Result};
use crate::fsutil::{fixed, read_to_string};
use crate::lexicon::{Lexicon, Pos, SenseId, WordKey};
use crate::signature::TopicSignature;
use crate::wsd::{
    disambiguate, extract_context, hier_disambiguate_combined, hier_disambiguate_new, wordlist_signature,
    ClusterSignatures, SenseScore, WordlistMode,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaggedInstance {
    pub instance_id: String,
    pub tokens: Vec<String>,
    pub target_index: usize,
    pub lemma: String,
    pub pos: Pos,
    pub gold: SenseId,
}

impl TaggedInstance {
    pub fn word(&self) -> WordKey {
        WordKey::new(self.lemma.clone(), self.pos)
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceRecord {
    instance_id: String,
    tokens: Vec<String>,
    target_index: usize,
    lemma: String,
    pos: Pos,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold_sense_no: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold: Option<SenseId>,
}

fn instance_from_record(r: InstanceRecord) -> std::result::Result<TaggedInstance, String> {
    if r.instance_id.is_empty() {
        return Err("empty instance_id".into());
    }
    if r.target_index >= r.tokens.len() {
        return Err(format!(
            "target_index {} outside {} tokens",
            r.target_index,
            r.tokens.len()
        ));
    }
    let gold = match (r.gold, r.gold_sense_no) {
        (Some(g), Some(n)) if g.sense_no != n => {
            return Err(format!("gold {g} disagrees with gold_sense_no {n}"));
        }
        (Some(g), _) => g,
        (None, Some(n)) => SenseId::new(r.lemma.clone(), r.pos, n).map_err(|e| e.to_string())?,
        (None, None) => return Err("missing gold_sense_no".into()),
    };
    if gold.lemma != r.lemma || gold.pos != r.pos {
        return Err(format!("gold {gold} does not belong to {}#{}", r.lemma, r.pos));
    }
    Ok(TaggedInstance {
        instance_id: r.instance_id,
        tokens: r.tokens,
        target_index: r.target_index,
        lemma: r.lemma,
        pos: r.pos,
        gold,
    })
}

/// One JSON object per line; blank lines are skipped.
pub fn parse_corpus(text: &str) -> Result<Vec<TaggedInstance>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: InstanceRecord =
            serde_json::from_str(line).map_err(|e| Error::format(i + 1, e.to_string()))?;
        let inst = instance_from_record(record).map_err(|m| Error::format(i + 1, m))?;
        if !seen.insert(inst.instance_id.clone()) {
            return Err(Error::format(i + 1, format!("duplicate instance_id `{}`", inst.instance_id)));
        }
        out.push(inst);
    }
    Ok(out)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<TaggedInstance>> {
    parse_corpus(&read_to_string(path.as_ref())?)
}

pub fn render_corpus(instances: &[TaggedInstance]) -> String {
    let mut out = String::new();
    for inst in instances {
        let record = InstanceRecord {
            instance_id: inst.instance_id.clone(),
            tokens: inst.tokens.clone(),
            target_index: inst.target_index,
            lemma: inst.lemma.clone(),
            pos: inst.pos,
            gold_sense_no: Some(inst.gold.sense_no),
            gold: None,
        };
        out.push_str(&serde_json::to_string(&record).expect("serializable record"));
        out.push('\n');
    }
    out
}

/// Expected precision of a uniform random choice among `n` senses.
pub fn random_baseline(n_senses: usize) -> Result<f64> {
    if n_senses == 0 {
        return Err(Error::Range("random baseline needs at least one sense".into()));
    }
    Ok(1.0 / n_senses as f64)
}

/// Fraction of instances whose prediction matches gold, or shares its cluster
/// when a partition is given. Empty input gives 0.
pub fn precision(
    predictions: &BTreeMap<String, SenseId>,
    gold: &BTreeMap<String, SenseId>,
    partition: Option<&Partition>,
) -> Result<f64> {
    let (correct, total) = correct_count(predictions, gold, partition)?;
    Ok(if total == 0 { 0.0 } else { correct as f64 / total as f64 })
}

fn correct_count(
    predictions: &BTreeMap<String, SenseId>,
    gold: &BTreeMap<String, SenseId>,
    partition: Option<&Partition>,
) -> Result<(u64, u64)> {
    if predictions.len() != gold.len() || predictions.keys().zip(gold.keys()).any(|(a, b)| a != b) {
        let missing = gold.keys().find(|k| !predictions.contains_key(*k));
        let extra = predictions.keys().find(|k| !gold.contains_key(*k));
        return Err(Error::Input(format!(
            "prediction and gold instance sets differ (first missing: {missing:?}, first extra: {extra:?})"
        )));
    }
    let correct = predictions
        .iter()
        .filter(|(id, p)| {
            let g = &gold[*id];
            match partition {
                Some(part) => part.same_cluster(p, g),
                None => *p == g,
            }
        })
        .count();
    Ok((correct as u64, gold.len() as u64))
}

/// Disambiguation methods in report column order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Ran,
    Syn,
    SynDef,
    SynAll,
    Sign,
    HierOrig,
    HierNew,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Ran,
        Method::Syn,
        Method::SynDef,
        Method::SynAll,
        Method::Sign,
        Method::HierOrig,
        Method::HierNew,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ran => "Ran",
            Method::Syn => "Syn",
            Method::SynDef => "S+def",
            Method::SynAll => "S+all",
            Method::Sign => "Sign",
            Method::HierOrig => "Hier-Orig",
            Method::HierNew => "Hier-New",
        }
    }

    fn wordlist_mode(self) -> Option<WordlistMode> {
        match self {
            Method::Syn => Some(WordlistMode::Syn),
            Method::SynDef => Some(WordlistMode::SynDef),
            Method::SynAll => Some(WordlistMode::SynAll),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Correct tags (expected correct for the random baseline) out of a total.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Score {
    pub correct: f64,
    pub total: u64,
}

impl Score {
    pub fn precision(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct / self.total as f64
        }
    }
}

pub type CellKey = (Level, Method);

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub word: String,
    pub n_senses: usize,
    pub n_occurrences: u64,
    /// Absent keys are printed as `-`.
    pub cells: BTreeMap<CellKey, Score>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    pub levels: Vec<Level>,
    pub methods: Vec<Method>,
    pub rows: Vec<ReportRow>,
}

pub const OVERALL_LABEL: &str = "Overall";
pub const MACRO_LABEL: &str = "Macro (extra)";

impl EvaluationReport {
    pub fn new(mut levels: Vec<Level>, mut methods: Vec<Method>) -> Self {
        levels.sort();
        levels.dedup();
        methods.sort();
        methods.dedup();
        EvaluationReport {
            levels,
            methods,
            rows: Vec::new(),
        }
    }

    pub fn columns(&self) -> Vec<CellKey> {
        self.levels
            .iter()
            .flat_map(|&l| self.methods.iter().map(move |&m| (l, m)))
            .collect()
    }

    /// Pooled counts over all rows; a cell is absent when no row has it.
    pub fn overall(&self) -> ReportRow {
        let mut cells: BTreeMap<CellKey, Score> = BTreeMap::new();
        for row in &self.rows {
            for (key, s) in &row.cells {
                let acc = cells.entry(*key).or_default();
                acc.correct += s.correct;
                acc.total += s.total;
            }
        }
        ReportRow {
            word: OVERALL_LABEL.into(),
            n_senses: self.rows.iter().map(|r| r.n_senses).sum(),
            n_occurrences: self.rows.iter().map(|r| r.n_occurrences).sum(),
            cells,
        }
    }

    /// Unweighted mean of the per-row precisions.
    pub fn macro_average(&self) -> BTreeMap<CellKey, f64> {
        let mut sums: BTreeMap<CellKey, (f64, usize)> = BTreeMap::new();
        for row in &self.rows {
            for (key, s) in &row.cells {
                let acc = sums.entry(*key).or_default();
                acc.0 += s.precision();
                acc.1 += 1;
            }
        }
        sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
    }

    pub fn precision(&self, word: &str, level: Level, method: Method) -> Option<f64> {
        let row = if word == OVERALL_LABEL {
            self.overall()
        } else {
            self.rows.iter().find(|r| r.word == word)?.clone()
        };
        row.cells.get(&(level, method)).map(Score::precision)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
    JsonLines,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "csv" => Ok(ReportFormat::Csv),
            "json-lines" | "jsonl" => Ok(ReportFormat::JsonLines),
            _ => Err(Error::Config(format!("unknown report format `{s}`"))),
        }
    }
}

fn column_name(report: &EvaluationReport, (level, method): CellKey) -> String {
    if report.levels.len() == 1 && level == Level::Fine {
        method.name().to_string()
    } else {
        format!("{level}:{method}")
    }
}

fn header(report: &EvaluationReport) -> Vec<String> {
    let mut h = vec!["Word".to_string(), "#s".to_string(), "#occ".to_string()];
    h.extend(report.columns().into_iter().map(|c| column_name(report, c)));
    h
}

fn cell_text(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |p| fixed(p, 2))
}

fn text_rows(report: &EvaluationReport) -> Vec<Vec<String>> {
    let columns = report.columns();
    let line = |row: &ReportRow| -> Vec<String> {
        let mut out = vec![row.word.clone(), row.n_senses.to_string(), row.n_occurrences.to_string()];
        out.extend(columns.iter().map(|k| cell_text(row.cells.get(k).map(Score::precision))));
        out
    };
    let mut lines: Vec<Vec<String>> = report.rows.iter().map(line).collect();
    if !report.rows.is_empty() {
        lines.push(line(&report.overall()));
        let macro_avg = report.macro_average();
        let mut m = vec![MACRO_LABEL.to_string(), String::new(), String::new()];
        m.extend(columns.iter().map(|k| cell_text(macro_avg.get(k).copied())));
        lines.push(m);
    }
    lines
}

#[derive(Serialize)]
struct JsonRow<'a> {
    word: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_senses: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_occurrences: Option<u64>,
    precision: BTreeMap<String, f64>,
}

/// `table` is fixed width with 2-decimal values and `-` for absent cells.
pub fn render_report(report: &EvaluationReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Table => {
            let mut lines = vec![header(report)];
            lines.extend(text_rows(report));
            let widths: Vec<usize> = (0..lines[0].len())
                .map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
                .collect();
            let mut out = String::new();
            for line in lines {
                let cells: Vec<String> = line
                    .iter()
                    .enumerate()
                    .map(|(c, v)| {
                        if c == 0 {
                            format!("{v:<w$}", w = widths[c])
                        } else {
                            format!("{v:>w$}", w = widths[c])
                        }
                    })
                    .collect();
                out.push_str(cells.join("  ").trim_end());
                out.push('\n');
            }
            out
        }
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
            w.write_record(header(report)).expect("in-memory csv");
            for line in text_rows(report) {
                w.write_record(line).expect("in-memory csv");
            }
            String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
        }
        ReportFormat::JsonLines => {
            let columns = report.columns();
            let named = |cells: &BTreeMap<CellKey, f64>| -> BTreeMap<String, f64> {
                columns
                    .iter()
                    .filter_map(|k| cells.get(k).map(|v| (format!("{}:{}", k.0, k.1), *v)))
                    .collect()
            };
            let mut out = String::new();
            let mut push = |row: JsonRow| {
                out.push_str(&serde_json::to_string(&row).expect("serializable row"));
                out.push('\n');
            };
            let rows = report.rows.iter().cloned().chain((!report.rows.is_empty()).then(|| report.overall()));
            for row in rows {
                let precisions = row.cells.iter().map(|(k, s)| (*k, s.precision())).collect();
                push(JsonRow {
                    word: &row.word,
                    n_senses: Some(row.n_senses),
                    n_occurrences: Some(row.n_occurrences),
                    precision: named(&precisions),
                });
            }
            if !report.rows.is_empty() {
                push(JsonRow {
                    word: MACRO_LABEL,
                    n_senses: None,
                    n_occurrences: None,
                    precision: named(&report.macro_average()),
                });
            }
            out
        }
    }
}

/// Artifacts the methods draw on, keyed by word.
#[derive(Clone, Debug, Default)]
pub struct EvalInputs {
    pub lexicon: Option<Lexicon>,
    pub signatures: BTreeMap<WordKey, BTreeMap<SenseId, TopicSignature>>,
    pub dendrograms: BTreeMap<WordKey, Dendrogram>,
    pub cluster_signatures: BTreeMap<WordKey, ClusterSignatures>,
    pub window: usize,
}

impl EvalInputs {
    pub fn new(window: usize) -> Self {
        EvalInputs {
            window,
            ..Default::default()
        }
    }

    fn n_senses(&self, word: &WordKey) -> Option<usize> {
        if let Some(lex) = &self.lexicon {
            let n = lex.senses_of(&word.lemma, word.pos).len();
            if n > 0 {
                return Some(n);
            }
        }
        self.signatures
            .get(word)
            .map(BTreeMap::len)
            .or_else(|| self.dendrograms.get(word).map(Dendrogram::len))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub instance_id: String,
    pub lemma: String,
    pub method: Method,
    pub gold: SenseId,
    pub chosen: SenseId,
    pub decided: bool,
    pub scores: BTreeMap<SenseId, f64>,
}

pub fn render_predictions(predictions: &[Prediction]) -> String {
    let mut out = String::new();
    for p in predictions {
        out.push_str(&serde_json::to_string(p).expect("serializable prediction"));
        out.push('\n');
    }
    out
}

pub fn parse_predictions(text: &str) -> Result<Vec<Prediction>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::format(i + 1, e.to_string())))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub report: EvaluationReport,
    pub predictions: Vec<Prediction>,
}

fn missing(artifact: String) -> Error {
    Error::Prerequisite {
        stage: "eval".into(),
        artifact,
    }
}

type Wordlists = BTreeMap<(WordKey, Method), BTreeMap<SenseId, TopicSignature>>;

fn build_wordlists(corpus_words: &BTreeSet<WordKey>, inputs: &EvalInputs, methods: &[Method]) -> Result<Wordlists> {
    let mut out = Wordlists::new();
    for &m in methods {
        let Some(mode) = m.wordlist_mode() else { continue };
        let lex = inputs
            .lexicon
            .as_ref()
            .ok_or_else(|| missing(format!("lexicon (needed by {m})")))?;
        for word in corpus_words {
            let sigs = lex
                .senses_of(&word.lemma, word.pos)
                .into_iter()
                .map(|id| Ok((id.clone(), wordlist_signature(lex, &id, mode)?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            out.insert((word.clone(), m), sigs);
        }
    }
    Ok(out)
}

/// Runs one method on one instance. `Ran` has no per-instance prediction.
pub fn predict(
    inst: &TaggedInstance,
    method: Method,
    inputs: &EvalInputs,
    wordlists: Option<&BTreeMap<SenseId, TopicSignature>>,
) -> Result<Option<SenseScore>> {
    let word = inst.word();
    let w = extract_context(&inst.tokens, inst.target_index, inputs.window)?;
    let sigs = || {
        inputs
            .signatures
            .get(&word)
            .ok_or_else(|| missing(format!("signatures for {word} (needed by {method})")))
    };
    let dendrogram = || {
        inputs
            .dendrograms
            .get(&word)
            .ok_or_else(|| missing(format!("dendrogram for {word} (needed by {method})")))
    };
    let score = match method {
        Method::Ran => return Ok(None),
        Method::Syn | Method::SynDef | Method::SynAll => {
            let lists = wordlists.ok_or_else(|| missing(format!("word lists for {word} (needed by {method})")))?;
            disambiguate(&w.lowercased(), lists)?
        }
        Method::Sign => disambiguate(&w, sigs()?)?,
        Method::HierOrig => hier_disambiguate_combined(&w, dendrogram()?, sigs()?)?,
        Method::HierNew => {
            let cs = inputs
                .cluster_signatures
                .get(&word)
                .ok_or_else(|| missing(format!("cluster signatures for {word} (needed by {method})")))?;
            hier_disambiguate_new(&w, dendrogram()?, cs)?
        }
    };
    Ok(Some(score))
}

fn level_partition(
    inputs: &EvalInputs,
    word: &WordKey,
    level: Level,
    n_senses: usize,
) -> Result<Option<Option<Partition>>> {
    // Outer None: level absent for this word. Inner None: exact match.
    if level_clusters(level, n_senses).is_none() {
        return Ok(None);
    }
    if level == Level::Fine {
        return Ok(Some(None));
    }
    let d = inputs
        .dendrograms
        .get(word)
        .ok_or_else(|| missing(format!("dendrogram for {word} (needed by level {level})")))?;
    let part = match level {
        Level::Custom(k) => d.cut(k)?,
        named => match granularity_levels(d).remove(&named) {
            Some(p) => p,
            None => return Ok(None),
        },
    };
    Ok(Some(Some(part)))
}

fn row_labels(words: &BTreeSet<WordKey>) -> BTreeMap<WordKey, String> {
    let mut lemma_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for w in words {
        *lemma_counts.entry(&w.lemma).or_default() += 1;
    }
    words
        .iter()
        .map(|w| {
            let label = if lemma_counts[w.lemma.as_str()] > 1 {
                w.to_string()
            } else {
                w.lemma.clone()
            };
            (w.clone(), label)
        })
        .collect()
}

fn group_by_word(corpus: &[TaggedInstance]) -> BTreeMap<WordKey, Vec<&TaggedInstance>> {
    let mut by_word: BTreeMap<WordKey, Vec<&TaggedInstance>> = BTreeMap::new();
    for inst in corpus {
        by_word.entry(inst.word()).or_default().push(inst);
    }
    by_word
}

/// Runs every predicting method on every instance. Instances are processed in
/// parallel; output is ordered by method, word, then corpus order.
pub fn predict_all(corpus: &[TaggedInstance], inputs: &EvalInputs, methods: &[Method]) -> Result<Vec<Prediction>> {
    let mut methods: Vec<Method> = methods.iter().copied().filter(|&m| m != Method::Ran).collect();
    methods.sort();
    methods.dedup();
    let by_word = group_by_word(corpus);
    let words: BTreeSet<WordKey> = by_word.keys().cloned().collect();
    let wordlists = build_wordlists(&words, inputs, &methods)?;
    let mut predictions = Vec::new();
    for &method in &methods {
        for (word, instances) in &by_word {
            let lists = wordlists.get(&(word.clone(), method));
            let scored = instances
                .par_iter()
                .map(|inst| predict(inst, method, inputs, lists).map(|s| s.expect("predicting method")))
                .collect::<Result<Vec<SenseScore>>>()?;
            predictions.extend(instances.iter().zip(scored).map(|(inst, s)| Prediction {
                instance_id: inst.instance_id.clone(),
                lemma: inst.lemma.clone(),
                method,
                gold: inst.gold.clone(),
                chosen: s.chosen,
                decided: s.decided,
                scores: s.scores,
            }));
        }
    }
    Ok(predictions)
}

/// Tabulates precision per word, method and level from stored predictions.
/// Only the lexicon (for sense counts) and dendrograms (for clustered levels)
/// of `inputs` are consulted.
pub fn report_from_predictions(
    corpus: &[TaggedInstance],
    predictions: &[Prediction],
    inputs: &EvalInputs,
    methods: &[Method],
    levels: &[Level],
) -> Result<EvaluationReport> {
    let mut report = EvaluationReport::new(levels.to_vec(), methods.to_vec());
    if report.levels.is_empty() || report.methods.is_empty() {
        return Err(Error::Config("evaluation needs at least one level and one method".into()));
    }
    let mut chosen_by: BTreeMap<(Method, &str), &SenseId> = BTreeMap::new();
    for p in predictions {
        chosen_by.insert((p.method, p.instance_id.as_str()), &p.chosen);
    }
    let by_word = group_by_word(corpus);
    let labels = row_labels(&by_word.keys().cloned().collect());
    for (word, instances) in &by_word {
        let n_senses = inputs
            .n_senses(word)
            .ok_or_else(|| missing(format!("sense inventory for {word}")))?;
        if let Some(lex) = &inputs.lexicon {
            if let Some(bad) = instances.iter().find(|i| lex.get(&i.gold).is_err()) {
                return Err(Error::Input(format!(
                    "instance {} has gold {} which is not in the lexicon",
                    bad.instance_id, bad.gold
                )));
            }
        }
        let gold: BTreeMap<String, SenseId> =
            instances.iter().map(|i| (i.instance_id.clone(), i.gold.clone())).collect();
        let partitions = report
            .levels
            .iter()
            .map(|&l| Ok((l, level_partition(inputs, word, l, n_senses)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut row = ReportRow {
            word: labels[word].clone(),
            n_senses,
            n_occurrences: instances.len() as u64,
            cells: BTreeMap::new(),
        };
        for &method in &report.methods {
            let chosen: Option<BTreeMap<String, SenseId>> = if method == Method::Ran {
                None
            } else {
                let map = instances
                    .iter()
                    .map(|i| {
                        chosen_by
                            .get(&(method, i.instance_id.as_str()))
                            .map(|s| (i.instance_id.clone(), (*s).clone()))
                            .ok_or_else(|| missing(format!("{method} prediction for instance {}", i.instance_id)))
                    })
                    .collect::<Result<_>>()?;
                Some(map)
            };
            for (level, part) in &partitions {
                let Some(part) = part else { continue };
                let score = match &chosen {
                    None => {
                        let k = level_clusters(*level, n_senses).expect("present level");
                        Score {
                            correct: instances.len() as f64 * random_baseline(k)?,
                            total: instances.len() as u64,
                        }
                    }
                    Some(chosen) => {
                        let (correct, total) = correct_count(chosen, &gold, part.as_ref())?;
                        Score {
                            correct: correct as f64,
                            total,
                        }
                    }
                };
                row.cells.insert((*level, method), score);
            }
        }
        report.rows.push(row);
    }
    Ok(report)
}

/// Predictions and report in one go.
pub fn evaluate(
    corpus: &[TaggedInstance],
    inputs: &EvalInputs,
    methods: &[Method],
    levels: &[Level],
) -> Result<Evaluation> {
    let predictions = predict_all(corpus, inputs, methods)?;
    let report = report_from_predictions(corpus, &predictions, inputs, methods, levels)?;
    Ok(Evaluation { report, predictions })
}
