//! Frequency vectors and chi-square style topic signatures.
//!
//! Each sense of a word owns one document collection. Counting every token of a
//! collection gives a frequency vector; stacking the vectors of all senses of a
//! word gives a contingency table whose rows are senses. For row `i` and word
//! `j` the expected count is
//!
//! ```text
//! m[i][j] = rowtotal[i] * coltotal[j] / grandtotal
//! ```
//!
//! and the signature weight is the relative over-representation
//! `(freq[i][j] - m[i][j]) / m[i][j]` when `freq > m`, zero otherwise. Words
//! with zero weight are not stored. The other rows of the table act as the
//! contrast set.
//!
//! Tokens are counted exactly as they appear: no case folding, no stemming, no
//! stopword removal.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fsutil::fixed;
use crate::lexicon::{SenseId, WordKey};
use crate::retrieval::DocumentCollection;

/// Splits on whitespace and trims punctuation from both ends of each piece.
/// Internal punctuation survives, so `anything.com`, `man-child` and `o'clock`
/// stay whole. Case is preserved.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|piece| piece.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// A group of senses of one word, identified by its member sense numbers.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClusterId {
    pub word: WordKey,
    /// Sorted, non-empty.
    pub members: Vec<u32>,
}

impl ClusterId {
    pub fn new(word: WordKey, mut members: Vec<u32>) -> Self {
        members.sort_unstable();
        members.dedup();
        ClusterId { word, members }
    }

    pub fn lowest(&self) -> u32 {
        self.members[0]
    }
}

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let members: Vec<String> = self.members.iter().map(u32::to_string).collect();
        write!(f, "{}#[{}]", self.word, members.join("+"))
    }
}

/// The owner of a frequency vector or signature: a sense or a cluster of senses.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TopicId {
    Sense(SenseId),
    Cluster(ClusterId),
}

impl fmt::Display for TopicId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopicId::Sense(s) => s.fmt(f),
            TopicId::Cluster(c) => c.fmt(f),
        }
    }
}

impl FromStr for TopicId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (word, last) = s
            .rsplit_once('#')
            .ok_or_else(|| Error::format(0, format!("bad topic id `{s}`")))?;
        if let Some(inner) = last.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let members = inner
                .split('+')
                .map(|m| {
                    m.parse::<u32>()
                        .ok()
                        .filter(|&n| n > 0)
                        .ok_or_else(|| Error::format(0, format!("bad cluster member in `{s}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TopicId::Cluster(ClusterId::new(word.parse()?, members)))
        } else {
            Ok(TopicId::Sense(s.parse()?))
        }
    }
}

impl From<SenseId> for TopicId {
    fn from(s: SenseId) -> Self {
        TopicId::Sense(s)
    }
}

impl From<ClusterId> for TopicId {
    fn from(c: ClusterId) -> Self {
        TopicId::Cluster(c)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrequencyVector {
    pub owner: TopicId,
    counts: BTreeMap<String, u64>,
    total: u64,
}

impl FrequencyVector {
    pub fn new(owner: impl Into<TopicId>) -> Self {
        FrequencyVector {
            owner: owner.into(),
            counts: BTreeMap::new(),
            total: 0,
        }
    }

    /// Zero counts are dropped.
    pub fn from_counts<S: Into<String>>(
        owner: impl Into<TopicId>,
        counts: impl IntoIterator<Item = (S, u64)>,
    ) -> Self {
        let mut v = FrequencyVector::new(owner);
        for (w, c) in counts {
            v.add(w, c);
        }
        v
    }

    pub fn add(&mut self, word: impl Into<String>, count: u64) {
        if count == 0 {
            return;
        }
        *self.counts.entry(word.into()).or_insert(0) += count;
        self.total += count;
    }

    pub fn add_tokens<S: AsRef<str>>(&mut self, tokens: impl IntoIterator<Item = S>) {
        for t in tokens {
            self.add(t.as_ref(), 1);
        }
    }

    /// Adds every count of `other` into `self`.
    pub fn absorb(&mut self, other: &FrequencyVector) {
        for (w, &c) in &other.counts {
            self.add(w.clone(), c);
        }
    }

    pub fn get(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Words in byte order with their counts.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(w, &c)| (w.as_str(), c))
    }

    /// `#topic <id>` header, then `word<TAB>count` in word order.
    pub fn render(&self) -> String {
        let mut out = format!("#topic {}\n", self.owner);
        for (w, c) in self.iter() {
            out.push_str(w);
            out.push('\t');
            out.push_str(&c.to_string());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (owner, body) = parse_header(text)?;
        let mut v = FrequencyVector::new(owner);
        for (line_no, word, value) in body {
            let count = value
                .parse::<u64>()
                .map_err(|_| Error::format(line_no, format!("bad count `{value}`")))?;
            v.add(word, count);
        }
        Ok(v)
    }
}

type Body<'a> = Vec<(usize, &'a str, &'a str)>;

fn parse_header(text: &str) -> Result<(TopicId, Body<'_>)> {
    let mut lines = text.lines().enumerate();
    let owner = match lines.next() {
        Some((_, l)) => l
            .strip_prefix("#topic ")
            .ok_or_else(|| Error::format(1, "missing `#topic` header"))?
            .parse()
            .map_err(|e: Error| Error::format(1, e.to_string()))?,
        None => return Err(Error::format(1, "missing `#topic` header")),
    };
    let mut body = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let (w, v) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(i + 1, "expected `word<TAB>value`"))?;
        body.push((i + 1, w, v));
    }
    Ok((owner, body))
}

/// Counts every token of every document in the collection.
pub fn frequency_vector(c: &DocumentCollection) -> FrequencyVector {
    let mut v = FrequencyVector::new(c.sense.clone());
    for doc in &c.documents {
        v.add_tokens(tokenize(&doc.text));
    }
    v
}

/// Rows are the frequency vectors of sibling topics (senses of one word, or the
/// children of one dendrogram node).
#[derive(Clone, Debug)]
pub struct ContingencyTable {
    rows: Vec<FrequencyVector>,
    column_totals: BTreeMap<String, u64>,
    grand_total: u64,
}

impl ContingencyTable {
    pub fn new(rows: Vec<FrequencyVector>) -> Self {
        let mut column_totals: BTreeMap<String, u64> = BTreeMap::new();
        for row in &rows {
            for (w, c) in row.iter() {
                *column_totals.entry(w.to_owned()).or_insert(0) += c;
            }
        }
        let grand_total = rows.iter().map(FrequencyVector::total).sum();
        ContingencyTable {
            rows,
            column_totals,
            grand_total,
        }
    }

    pub fn rows(&self) -> &[FrequencyVector] {
        &self.rows
    }

    pub fn column_total(&self, word: &str) -> u64 {
        self.column_totals.get(word).copied().unwrap_or(0)
    }

    pub fn column_totals(&self) -> &BTreeMap<String, u64> {
        &self.column_totals
    }

    pub fn grand_total(&self) -> u64 {
        self.grand_total
    }
}

/// Expected count of every column word in every row: `rowtotal * coltotal / grandtotal`.
pub fn expected_means(t: &ContingencyTable) -> Result<Vec<BTreeMap<String, f64>>> {
    if t.grand_total == 0 {
        return Err(Error::Degenerate("contingency table has no counts".into()));
    }
    let grand = t.grand_total as f64;
    Ok(t.rows
        .iter()
        .map(|row| {
            let r = row.total() as f64;
            t.column_totals
                .iter()
                .map(|(w, &c)| (w.clone(), r * c as f64 / grand))
                .collect()
        })
        .collect())
}

/// Signature of row `i` against the other rows of the table.
///
/// The weight is evaluated as `(f*G - r*C) / (r*C)` in integer arithmetic up to
/// the final division, which equals `(f - m) / m` and is exactly invariant
/// under scaling every cell by the same factor.
pub fn chi2_signature(t: &ContingencyTable, i: usize) -> Result<TopicSignature> {
    if t.grand_total == 0 {
        return Err(Error::Degenerate("contingency table has no counts".into()));
    }
    let row = t
        .rows
        .get(i)
        .ok_or_else(|| Error::Range(format!("row {i} of a {}-row table", t.rows.len())))?;
    let grand = t.grand_total as i128;
    let r = row.total() as i128;
    let mut entries = Vec::new();
    for (word, f) in row.iter() {
        let c = t.column_total(word) as i128;
        let excess = f as i128 * grand - r * c;
        if excess > 0 {
            entries.push((word.to_owned(), excess as f64 / (r * c) as f64));
        }
    }
    let mut sig = TopicSignature::new(row.owner.clone(), entries);
    sig.degenerate_contrast = t.rows.len() < 2;
    Ok(sig)
}

/// Signatures for every row of the table, in row order.
pub fn chi2_signatures(t: &ContingencyTable) -> Result<Vec<TopicSignature>> {
    (0..t.rows.len()).map(|i| chi2_signature(t, i)).collect()
}

/// Weighted related words of a topic, heaviest first, ties by word.
#[derive(Clone, Debug)]
pub struct TopicSignature {
    pub topic: TopicId,
    entries: Vec<(String, f64)>,
    lookup: HashMap<String, f64>,
    /// Set when the table had a single row, so nothing could be contrasted.
    pub degenerate_contrast: bool,
}

impl PartialEq for TopicSignature {
    fn eq(&self, other: &Self) -> bool {
        self.topic == other.topic && self.entries == other.entries
    }
}

impl TopicSignature {
    /// Drops non-positive weights, collapses duplicate words (keeping the larger
    /// weight) and sorts into canonical order.
    pub fn new(topic: impl Into<TopicId>, entries: impl IntoIterator<Item = (String, f64)>) -> Self {
        let mut lookup: HashMap<String, f64> = HashMap::new();
        for (w, s) in entries {
            if s > 0.0 {
                let slot = lookup.entry(w).or_insert(s);
                if s > *slot {
                    *slot = s;
                }
            }
        }
        let mut entries: Vec<(String, f64)> =
            lookup.iter().map(|(w, &s)| (w.clone(), s)).collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        TopicSignature {
            topic: topic.into(),
            entries,
            lookup,
            degenerate_contrast: false,
        }
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Zero for words not in the signature.
    pub fn weight(&self, word: &str) -> f64 {
        self.lookup.get(word).copied().unwrap_or(0.0)
    }

    /// Every weight multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> TopicSignature {
        TopicSignature::new(
            self.topic.clone(),
            self.entries.iter().map(|(w, s)| (w.clone(), s * factor)),
        )
    }

    /// `#topic <id>` header then `word<TAB>weight`, weights with six decimals.
    pub fn render(&self) -> String {
        let mut out = format!("#topic {}\n", self.topic);
        for (w, s) in &self.entries {
            out.push_str(w);
            out.push('\t');
            out.push_str(&fixed(*s, 6));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (topic, body) = parse_header(text)?;
        let mut entries = Vec::with_capacity(body.len());
        for (line_no, word, value) in body {
            let weight = value
                .parse::<f64>()
                .ok()
                .filter(|w| w.is_finite() && *w >= 0.0)
                .ok_or_else(|| Error::format(line_no, format!("bad weight `{value}`")))?;
            entries.push((word.to_owned(), weight));
        }
        Ok(TopicSignature::new(topic, entries))
    }
}

/// The first `min(k, len)` entries in canonical order.
pub fn top_k(s: &TopicSignature, k: usize) -> Result<TopicSignature> {
    if k == 0 {
        return Err(Error::Range("top_k needs k >= 1".into()));
    }
    Ok(TopicSignature::new(
        s.topic.clone(),
        s.entries.iter().take(k).cloned(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::Pos;
    use crate::retrieval::Document;

    fn sense(n: u32) -> SenseId {
        SenseId::new("boy", Pos::Noun, n).unwrap()
    }

    fn worked_table() -> ContingencyTable {
        ContingencyTable::new(vec![
            FrequencyVector::from_counts(sense(1), [("x", 3), ("y", 1)]),
            FrequencyVector::from_counts(sense(2), [("x", 1), ("y", 3)]),
        ])
    }

    #[test]
    fn tokenize_keeps_case_and_internal_punctuation() {
        assert_eq!(tokenize("Boy boy boy."), vec!["Boy", "boy", "boy"]);
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \n\t ").is_empty());
        assert_eq!(
            tokenize("visit anything.com today"),
            vec!["visit", "anything.com", "today"]
        );
        assert_eq!(
            tokenize("(the man-child's) -- \"o'clock\"!"),
            vec!["the", "man-child's", "o'clock"]
        );
        assert_ne!(tokenize("Child"), tokenize("child"));
    }

    #[test]
    fn frequency_vector_counts() {
        let c = DocumentCollection {
            sense: sense(1),
            query_rendered: String::new(),
            documents: vec![Document::local("d1", "d1.txt", "a a b"), Document::local("d2", "d2.txt", "b c")],
        };
        let v = frequency_vector(&c);
        assert_eq!(v.get("a"), 2);
        assert_eq!(v.get("b"), 2);
        assert_eq!(v.get("c"), 1);
        assert_eq!(v.total(), 5);
        let empty = DocumentCollection {
            sense: sense(1),
            query_rendered: String::new(),
            documents: vec![],
        };
        assert_eq!(frequency_vector(&empty).total(), 0);
        assert!(frequency_vector(&empty).is_empty());
    }

    #[test]
    fn zero_counts_not_stored() {
        let v = FrequencyVector::from_counts(sense(1), [("x", 0), ("y", 2)]);
        assert_eq!(v.len(), 1);
        assert_eq!(v.total(), 2);
    }

    #[test]
    fn expected_means_worked_example() {
        let m = expected_means(&worked_table()).unwrap();
        for row in &m {
            for v in row.values() {
                assert_eq!(*v, 2.0);
            }
        }
    }

    #[test]
    fn expected_means_single_row_is_identity() {
        let t = ContingencyTable::new(vec![FrequencyVector::from_counts(
            sense(1),
            [("x", 3), ("y", 5), ("z", 1)],
        )]);
        let m = expected_means(&t).unwrap();
        assert_eq!(m[0]["x"], 3.0);
        assert_eq!(m[0]["y"], 5.0);
        assert_eq!(m[0]["z"], 1.0);
    }

    #[test]
    fn expected_means_uniform() {
        let t = ContingencyTable::new(
            (1..=3)
                .map(|i| FrequencyVector::from_counts(sense(i), [("a", 4), ("b", 4)]))
                .collect(),
        );
        for row in expected_means(&t).unwrap() {
            assert!(row.values().all(|&v| v == 4.0));
        }
    }

    #[test]
    fn expected_means_rejects_empty_table() {
        let t = ContingencyTable::new(vec![FrequencyVector::new(sense(1))]);
        assert!(matches!(expected_means(&t), Err(Error::Degenerate(_))));
        assert!(matches!(chi2_signature(&t, 0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn chi2_worked_example() {
        let sig = chi2_signature(&worked_table(), 0).unwrap();
        assert_eq!(sig.entries(), &[("x".to_string(), 0.5)]);
        let sig = chi2_signature(&worked_table(), 1).unwrap();
        assert_eq!(sig.entries(), &[("y".to_string(), 0.5)]);
        assert!(chi2_signature(&worked_table(), 2).is_err());
    }

    #[test]
    fn chi2_uniform_and_absent_words() {
        let t = ContingencyTable::new(vec![
            FrequencyVector::from_counts(sense(1), [("a", 2), ("b", 2)]),
            FrequencyVector::from_counts(sense(2), [("a", 2), ("b", 2)]),
        ]);
        assert!(chi2_signatures(&t).unwrap().iter().all(TopicSignature::is_empty));

        let t = ContingencyTable::new(vec![
            FrequencyVector::from_counts(sense(1), [("a", 2)]),
            FrequencyVector::from_counts(sense(2), [("a", 1), ("b", 7)]),
        ]);
        assert_eq!(chi2_signature(&t, 0).unwrap().weight("b"), 0.0);
    }

    #[test]
    fn chi2_single_row_flags_degenerate_contrast() {
        let t = ContingencyTable::new(vec![FrequencyVector::from_counts(sense(1), [("a", 2)])]);
        let sig = chi2_signature(&t, 0).unwrap();
        assert!(sig.is_empty());
        assert!(sig.degenerate_contrast);
        assert!(!chi2_signature(&worked_table(), 0).unwrap().degenerate_contrast);
    }

    #[test]
    fn canonical_order_breaks_ties_by_word() {
        let sig = TopicSignature::new(
            sense(1),
            [("b".to_string(), 1.0), ("a".to_string(), 1.0), ("c".to_string(), 2.0), ("z".to_string(), 0.0)],
        );
        let words: Vec<&str> = sig.entries().iter().map(|(w, _)| w.as_str()).collect();
        assert_eq!(words, vec!["c", "a", "b"]);
    }

    #[test]
    fn top_k_behaviour() {
        let sig = chi2_signature(&worked_table(), 0).unwrap();
        assert_eq!(top_k(&sig, 1).unwrap(), sig);
        assert_eq!(top_k(&sig, 10).unwrap(), sig);
        assert!(top_k(&sig, 0).is_err());
        let big = TopicSignature::new(sense(1), (0..40).map(|i| (format!("w{i:02}"), 40.0 - i as f64)));
        let shown = top_k(&big, 22).unwrap();
        assert_eq!(shown.len(), 22);
        assert_eq!(top_k(&shown, 22).unwrap(), shown);
        assert_eq!(shown.entries()[0].0, "w00");
    }

    #[test]
    fn signature_file_format() {
        let sig = TopicSignature::new(sense(1), [("x".to_string(), 0.5), ("y".to_string(), 1.0 / 3.0)]);
        let text = sig.render();
        assert_eq!(text, "#topic boy#n#1\nx\t0.500000\ny\t0.333333\n");
        let back = TopicSignature::parse(&text).unwrap();
        assert_eq!(back.topic, sig.topic);
        assert_eq!(back.render(), text);
        assert!(TopicSignature::parse("x\t1.0\n").is_err());
        assert!(TopicSignature::parse("#topic boy#n#1\nx 1.0\n").is_err());
    }

    #[test]
    fn frequency_file_round_trip() {
        let v = FrequencyVector::from_counts(sense(2), [("Child", 3), ("child", 4)]);
        let text = v.render();
        assert_eq!(text, "#topic boy#n#2\nChild\t3\nchild\t4\n");
        assert_eq!(FrequencyVector::parse(&text).unwrap(), v);
    }

    #[test]
    fn topic_id_round_trip() {
        let c = ClusterId::new(WordKey::new("boy", Pos::Noun), vec![3, 1, 2]);
        let id = TopicId::Cluster(c);
        assert_eq!(id.to_string(), "boy#n#[1+2+3]");
        assert_eq!(id.to_string().parse::<TopicId>().unwrap(), id);
        let s: TopicId = "boy#n#4".parse().unwrap();
        assert_eq!(s, TopicId::Sense(sense(4)));
        assert!("boy#n#[0]".parse::<TopicId>().is_err());
    }
}
