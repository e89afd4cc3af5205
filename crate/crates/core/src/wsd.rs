//! Window-based disambiguation.
//!
//! An occurrence is disambiguated by summing, for each sense, the signature
//! weights of the words in a window around it and picking the sense with the
//! largest sum. Ties, and windows with no evidence at all, go to the lowest
//! sense number; the latter are flagged as undecided.
//!
//! Two hierarchy-aware variants walk a sense dendrogram from the root:
//! [`hier_disambiguate_combined`] sums the original per-sense scores of each
//! branch, [`hier_disambiguate_new`] scores each branch with a signature built
//! from the merged collections of its senses.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cluster::Dendrogram;
use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, SenseId};
use crate::retrieval::DocumentCollection;
use crate::signature::{
    chi2_signature, frequency_vector, ClusterId, ContingencyTable, FrequencyVector, TopicSignature,
};
use crate::stopwords::content_words;

pub const DEFAULT_WINDOW: usize = 100;

/// Bag of context tokens around one occurrence, target excluded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContextWindow {
    pub tokens: Vec<String>,
    pub width: usize,
}

impl ContextWindow {
    pub fn new(tokens: Vec<String>, width: usize) -> Self {
        ContextWindow { tokens, width }
    }

    pub fn lowercased(&self) -> ContextWindow {
        ContextWindow {
            tokens: self.tokens.iter().map(|t| t.to_lowercase()).collect(),
            width: self.width,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Up to `width / 2` tokens on each side of `target_index`.
pub fn extract_context<S: AsRef<str>>(
    tokens: &[S],
    target_index: usize,
    width: usize,
) -> Result<ContextWindow> {
    if target_index >= tokens.len() {
        return Err(Error::Range(format!(
            "target index {target_index} outside {} tokens",
            tokens.len()
        )));
    }
    if !width.is_multiple_of(2) {
        return Err(Error::Range(format!("window width {width} must be even")));
    }
    let half = width / 2;
    let start = target_index.saturating_sub(half);
    let end = (target_index + 1 + half).min(tokens.len());
    let bag = tokens[start..target_index]
        .iter()
        .chain(&tokens[target_index + 1..end])
        .map(|t| t.as_ref().to_owned())
        .collect();
    Ok(ContextWindow::new(bag, width))
}

/// Sum of the signature weights of every context token, per occurrence.
pub fn score_sense(w: &ContextWindow, s: &TopicSignature) -> f64 {
    w.tokens.iter().map(|t| s.weight(t)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SenseScore {
    pub scores: BTreeMap<SenseId, f64>,
    pub chosen: SenseId,
    /// False when there was no evidence for any sense.
    pub decided: bool,
}

fn argmax_lowest(scores: &BTreeMap<SenseId, f64>) -> Option<SenseId> {
    let mut best: Option<(&SenseId, f64)> = None;
    for (id, &s) in scores {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((id, s));
        }
    }
    best.map(|(id, _)| id.clone())
}

pub fn disambiguate(w: &ContextWindow, sigs: &BTreeMap<SenseId, TopicSignature>) -> Result<SenseScore> {
    let scores: BTreeMap<SenseId, f64> = sigs.iter().map(|(id, s)| (id.clone(), score_sense(w, s))).collect();
    let chosen = argmax_lowest(&scores).ok_or_else(|| Error::Config("no signatures to disambiguate with".into()))?;
    let decided = scores.values().any(|&s| s > 0.0);
    Ok(SenseScore {
        scores,
        chosen,
        decided,
    })
}

/// WordNet-derived word lists used as baselines in place of signatures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WordlistMode {
    /// Synonyms.
    Syn,
    /// Synonyms plus gloss and example content words.
    SynDef,
    /// The above plus hyponyms, hypernyms and meronyms.
    SynAll,
}

impl fmt::Display for WordlistMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WordlistMode::Syn => "Syn",
            WordlistMode::SynDef => "S+def",
            WordlistMode::SynAll => "S+all",
        })
    }
}

impl FromStr for WordlistMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Syn" | "syn" => Ok(WordlistMode::Syn),
            "S+def" | "s+def" => Ok(WordlistMode::SynDef),
            "S+all" | "s+all" => Ok(WordlistMode::SynAll),
            _ => Err(Error::Config(format!("unknown word list mode `{s}`"))),
        }
    }
}

/// Unit-weight, lowercase word list for a sense. Multiword entries contribute
/// their individual content words; the target lemma is left out.
pub fn wordlist_signature(lex: &Lexicon, id: &SenseId, mode: WordlistMode) -> Result<TopicSignature> {
    let entry = lex.get(id)?;
    let mut texts: Vec<&String> = entry.synonyms.iter().collect();
    if mode >= WordlistMode::SynDef {
        texts.push(&entry.gloss);
        texts.extend(&entry.examples);
    }
    if mode >= WordlistMode::SynAll {
        texts.extend(&entry.hyponyms);
        texts.extend(&entry.hypernyms);
        texts.extend(&entry.meronyms);
    }
    let lemma_words: BTreeSet<String> = content_words(&id.word().surface()).into_iter().collect();
    let words: BTreeSet<String> = texts
        .into_iter()
        .flat_map(|t| content_words(t))
        .filter(|w| !lemma_words.contains(w))
        .collect();
    Ok(TopicSignature::new(id.clone(), words.into_iter().map(|w| (w, 1.0))))
}

fn lowest_sense(d: &Dendrogram, node: usize) -> u32 {
    d.member_senses(node)
        .iter()
        .map(|s| s.sense_no)
        .min()
        .unwrap_or(u32::MAX)
}

/// Picks the child with the larger score; equal scores go to the branch holding
/// the lowest sense number.
fn pick_branch(d: &Dendrogram, (l, r): (usize, usize), sl: f64, sr: f64) -> usize {
    if sr > sl || (sr == sl && lowest_sense(d, r) < lowest_sense(d, l)) {
        r
    } else {
        l
    }
}

/// Root-to-leaf descent comparing the summed per-sense scores of each branch.
pub fn hier_disambiguate_combined(
    w: &ContextWindow,
    d: &Dendrogram,
    sigs: &BTreeMap<SenseId, TopicSignature>,
) -> Result<SenseScore> {
    if let Some(missing) = d.leaves().iter().find(|l| !sigs.contains_key(*l)) {
        return Err(Error::Config(format!("no signature for dendrogram leaf {missing}")));
    }
    let flat = disambiguate(w, sigs)?;
    let branch_sum = |node: usize| -> f64 { d.member_senses(node).iter().map(|s| flat.scores[s]).sum() };
    let mut node = d.root();
    while let Some(children) = d.children(node) {
        node = pick_branch(d, children, branch_sum(children.0), branch_sum(children.1));
    }
    Ok(SenseScore {
        chosen: d.leaves()[node].clone(),
        decided: flat.decided,
        scores: flat.scores,
    })
}

/// Signatures of every child cluster of every internal node, each contrasted
/// with its sibling.
pub type ClusterSignatures = BTreeMap<ClusterId, TopicSignature>;

pub fn cluster_id(d: &Dendrogram, node: usize) -> ClusterId {
    ClusterId::new(
        d.word(),
        d.member_senses(node).iter().map(|s| s.sense_no).collect(),
    )
}

pub fn build_cluster_signatures(
    collections: &BTreeMap<SenseId, DocumentCollection>,
    d: &Dendrogram,
) -> Result<ClusterSignatures> {
    let vectors: BTreeMap<SenseId, FrequencyVector> = collections
        .iter()
        .map(|(id, c)| (id.clone(), frequency_vector(c)))
        .collect();
    cluster_signatures_from_vectors(&vectors, d)
}

pub fn cluster_signatures_from_vectors(
    vectors: &BTreeMap<SenseId, FrequencyVector>,
    d: &Dendrogram,
) -> Result<ClusterSignatures> {
    if let Some(missing) = d.leaves().iter().find(|l| !vectors.contains_key(*l)) {
        return Err(Error::Config(format!("no collection for dendrogram leaf {missing}")));
    }
    let merged = |node: usize| -> FrequencyVector {
        let mut v = FrequencyVector::new(cluster_id(d, node));
        for s in d.member_senses(node) {
            v.absorb(&vectors[&s]);
        }
        v
    };
    let mut out = ClusterSignatures::new();
    for node in d.internal_nodes_top_down() {
        let (l, r) = d.children(node).expect("internal node");
        let table = ContingencyTable::new(vec![merged(l), merged(r)]);
        if table.grand_total() == 0 {
            return Err(Error::Degenerate(format!("empty collections under node {}", cluster_id(d, node))));
        }
        for (i, child) in [l, r].into_iter().enumerate() {
            out.insert(cluster_id(d, child), chi2_signature(&table, i)?);
        }
    }
    Ok(out)
}

/// Root-to-leaf descent scoring each branch with its own cluster signature.
pub fn hier_disambiguate_new(
    w: &ContextWindow,
    d: &Dendrogram,
    cluster_sigs: &ClusterSignatures,
) -> Result<SenseScore> {
    let sig_of = |node: usize| -> Result<&TopicSignature> {
        let id = cluster_id(d, node);
        cluster_sigs
            .get(&id)
            .ok_or_else(|| Error::Config(format!("no cluster signature for {id}")))
    };
    for node in d.internal_nodes_top_down() {
        let (l, r) = d.children(node).expect("internal node");
        sig_of(l)?;
        sig_of(r)?;
    }
    let mut node = d.root();
    let mut all_blank = true;
    while let Some((l, r)) = d.children(node) {
        let (sl, sr) = (score_sense(w, sig_of(l)?), score_sense(w, sig_of(r)?));
        if sl != 0.0 || sr != 0.0 {
            all_blank = false;
        }
        node = pick_branch(d, (l, r), sl, sr);
    }
    let scores = (0..d.len())
        .map(|leaf| Ok((d.leaves()[leaf].clone(), score_sense(w, sig_of(leaf)?))))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(SenseScore {
        scores,
        chosen: d.leaves()[node].clone(),
        decided: !all_blank,
    })
}
