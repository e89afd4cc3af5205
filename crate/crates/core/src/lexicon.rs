//! WordNet-style sense inventory.
//!
//! The lexicon is read from a line-delimited exchange format: every non-blank
//! line is one JSON object describing one sense,
//!
//! ```text
//! {"id":"boy#n#1","synonyms":["male child","boy","child"],"gloss":"a youthful male person",
//!  "hypernyms":["male","male person"],"hyponyms":["altar boy","ball boy"]}
//! ```
//!
//! with the optional keys `synonyms`, `examples`, `hypernyms`, `hyponyms`,
//! `sisters`, `meronyms`, `holonyms`, `attributes` and `gloss_nouns`. Missing
//! keys are empty lists. Once loaded a [`Lexicon`] is immutable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stopwords::content_words;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pos {
    #[serde(rename = "n")]
    Noun,
    #[serde(rename = "v")]
    Verb,
    #[serde(rename = "a")]
    Adjective,
    #[serde(rename = "r")]
    Adverb,
}

impl Pos {
    pub fn tag(self) -> &'static str {
        match self {
            Pos::Noun => "n",
            Pos::Verb => "v",
            Pos::Adjective => "a",
            Pos::Adverb => "r",
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Pos {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(Pos::Noun),
            "v" => Ok(Pos::Verb),
            "a" => Ok(Pos::Adjective),
            "r" => Ok(Pos::Adverb),
            other => Err(Error::format(0, format!("unknown part of speech `{other}`"))),
        }
    }
}

/// `lemma#pos#sense_no`, e.g. `boy#n#1`. Orders by lemma, then pos, then sense number.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SenseId {
    pub lemma: String,
    pub pos: Pos,
    pub sense_no: u32,
}

impl SenseId {
    pub fn new(lemma: impl Into<String>, pos: Pos, sense_no: u32) -> Result<Self> {
        let lemma = lemma.into();
        validate_lemma(&lemma)?;
        if sense_no == 0 {
            return Err(Error::format(0, "sense numbers start at 1"));
        }
        Ok(SenseId {
            lemma,
            pos,
            sense_no,
        })
    }

    /// The `(lemma, pos)` pair this sense belongs to.
    pub fn word(&self) -> WordKey {
        WordKey {
            lemma: self.lemma.clone(),
            pos: self.pos,
        }
    }
}

pub(crate) fn validate_lemma(lemma: &str) -> Result<()> {
    if lemma.is_empty() {
        return Err(Error::format(0, "empty lemma"));
    }
    if lemma
        .chars()
        .any(|c| c == '#' || c == '/' || c == '\\' || c.is_whitespace() || c.is_uppercase())
    {
        return Err(Error::format(
            0,
            format!("lemma `{lemma}` must be lowercase without whitespace, `#` or path separators"),
        ));
    }
    Ok(())
}

impl fmt::Display for SenseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}#{}", self.lemma, self.pos, self.sense_no)
    }
}

impl FromStr for SenseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.rsplitn(3, '#');
        let (Some(no), Some(pos), Some(lemma)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::format(0, format!("bad sense id `{s}`")));
        };
        let sense_no = no
            .parse::<u32>()
            .map_err(|_| Error::format(0, format!("bad sense number in `{s}`")))?;
        SenseId::new(lemma, pos.parse()?, sense_no)
    }
}

impl Serialize for SenseId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SenseId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A `(lemma, pos)` pair: the unit that owns a set of senses.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WordKey {
    pub lemma: String,
    pub pos: Pos,
}

impl WordKey {
    pub fn new(lemma: impl Into<String>, pos: Pos) -> Self {
        WordKey {
            lemma: lemma.into(),
            pos,
        }
    }

    pub fn sense(&self, sense_no: u32) -> SenseId {
        SenseId {
            lemma: self.lemma.clone(),
            pos: self.pos,
            sense_no,
        }
    }

    /// The lemma as running text: WordNet-style underscores become spaces.
    pub fn surface(&self) -> String {
        self.lemma.replace('_', " ")
    }
}

impl fmt::Display for WordKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.lemma, self.pos)
    }
}

impl FromStr for WordKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (lemma, pos) = s
            .rsplit_once('#')
            .ok_or_else(|| Error::format(0, format!("bad word key `{s}`")))?;
        validate_lemma(lemma)?;
        Ok(WordKey::new(lemma, pos.parse()?))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SenseEntry {
    pub id: SenseId,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub synonyms: Vec<String>,
    pub gloss: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub examples: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hypernyms: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hyponyms: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sisters: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub meronyms: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub holonyms: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attributes: Vec<String>,
    /// Optional noun whitelist for gloss/example cuewords.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gloss_nouns: Option<Vec<String>>,
}

impl SenseEntry {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.gloss.trim().is_empty() {
            return Err(format!("{}: empty gloss", self.id));
        }
        for (name, list) in self.relation_lists() {
            if list.iter().any(|s| s.trim().is_empty()) {
                return Err(format!("{}: empty string in `{name}`", self.id));
            }
        }
        Ok(())
    }

    fn relation_lists(&self) -> [(&'static str, &Vec<String>); 7] {
        [
            ("synonyms", &self.synonyms),
            ("hypernyms", &self.hypernyms),
            ("hyponyms", &self.hyponyms),
            ("sisters", &self.sisters),
            ("meronyms", &self.meronyms),
            ("holonyms", &self.holonyms),
            ("attributes", &self.attributes),
        ]
    }

    fn phrases(&self, source: CueSource) -> &[String] {
        match source {
            CueSource::Synonyms => &self.synonyms,
            CueSource::Hypernyms => &self.hypernyms,
            CueSource::Hyponyms => &self.hyponyms,
            CueSource::Sisters => &self.sisters,
            CueSource::Meronyms => &self.meronyms,
            CueSource::Holonyms => &self.holonyms,
            CueSource::Attributes => &self.attributes,
            CueSource::Gloss | CueSource::Examples => &[],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<SenseId, SenseEntry>,
    index: BTreeMap<WordKey, Vec<SenseId>>,
}

impl Lexicon {
    /// Builds a lexicon from entries, checking duplicate ids and gapless numbering.
    pub fn from_entries(entries: impl IntoIterator<Item = SenseEntry>) -> Result<Self> {
        let mut lex = Lexicon::default();
        for entry in entries {
            lex.insert(entry, 0)?;
        }
        lex.finish()?;
        Ok(lex)
    }

    fn insert(&mut self, entry: SenseEntry, line: usize) -> Result<()> {
        entry.validate().map_err(|m| Error::format(line, m))?;
        let id = entry.id.clone();
        if self.entries.contains_key(&id) {
            return Err(Error::format(line, format!("duplicate sense id {id}")));
        }
        self.index.entry(id.word()).or_default().push(id.clone());
        self.entries.insert(id, entry);
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        for (word, ids) in self.index.iter_mut() {
            ids.sort();
            for (i, id) in ids.iter().enumerate() {
                if id.sense_no as usize != i + 1 {
                    return Err(Error::format(
                        0,
                        format!(
                            "gap in sense numbering for {word}: expected sense {} but found {}",
                            i + 1,
                            id.sense_no
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = Lexicon::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: SenseEntry = serde_json::from_str(line)
                .map_err(|e| Error::format(i + 1, format!("unreadable record: {e}")))?;
            lex.insert(entry, i + 1)?;
        }
        lex.finish()?;
        Ok(lex)
    }

    /// One record per line in sense order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for ids in self.index.values() {
            for id in ids {
                out.push_str(&serde_json::to_string(&self.entries[id]).expect("entry serializes"));
                out.push('\n');
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, id: &SenseId) -> Result<&SenseEntry> {
        self.entries
            .get(id)
            .ok_or_else(|| Error::UnknownSense(id.clone()))
    }

    pub fn words(&self) -> impl Iterator<Item = &WordKey> {
        self.index.keys()
    }

    pub fn entries(&self) -> impl Iterator<Item = &SenseEntry> {
        self.index.values().flatten().map(|id| &self.entries[id])
    }

    /// Senses of `lemma` in sense-number order; empty when the lemma is absent.
    pub fn senses_of(&self, lemma: &str, pos: Pos) -> Vec<SenseId> {
        self.index
            .get(&WordKey::new(lemma, pos))
            .cloned()
            .unwrap_or_default()
    }

    /// Union of the selected information sources for one sense.
    ///
    /// Relation entries and synonyms are kept as whole (possibly multiword)
    /// phrases; gloss and examples contribute their content words. Everything is
    /// lowercased and the target lemma itself is never returned.
    pub fn raw_cuewords(&self, id: &SenseId, sources: &CueSources) -> Result<BTreeSet<String>> {
        let entry = self.get(id)?;
        let lemma = WordKey::new(id.lemma.clone(), id.pos).surface();
        let mut out = BTreeSet::new();
        for &source in &sources.sources {
            match source {
                CueSource::Gloss | CueSource::Examples => {
                    let texts: Vec<&str> = if source == CueSource::Gloss {
                        vec![entry.gloss.as_str()]
                    } else {
                        entry.examples.iter().map(String::as_str).collect()
                    };
                    let whitelist: Option<BTreeSet<String>> = match (&entry.gloss_nouns, sources.gloss_nouns_only) {
                        (Some(nouns), true) => Some(nouns.iter().map(|n| n.to_lowercase()).collect()),
                        _ => None,
                    };
                    for text in texts {
                        for word in content_words(text) {
                            if whitelist.as_ref().is_none_or(|w| w.contains(&word)) {
                                out.insert(word);
                            }
                        }
                    }
                }
                _ => {
                    for phrase in entry.phrases(source) {
                        out.insert(normalize_phrase(phrase));
                    }
                }
            }
        }
        out.remove(&lemma);
        out.remove("");
        Ok(out)
    }
}

/// Lowercase, single-space separated form of a relation entry.
pub fn normalize_phrase(phrase: &str) -> String {
    phrase
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Lexicon> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Lexicon::parse(&text)
}

pub fn save_lexicon(lex: &Lexicon, path: impl AsRef<Path>) -> Result<()> {
    crate::fsutil::write_atomic(path.as_ref(), lex.render().as_bytes())
}

/// Information sources a cueword can be drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CueSource {
    Synonyms,
    Gloss,
    Examples,
    Hypernyms,
    Hyponyms,
    Sisters,
    Meronyms,
    Holonyms,
    Attributes,
}

impl CueSource {
    pub const ALL: [CueSource; 9] = [
        CueSource::Synonyms,
        CueSource::Gloss,
        CueSource::Examples,
        CueSource::Hypernyms,
        CueSource::Hyponyms,
        CueSource::Sisters,
        CueSource::Meronyms,
        CueSource::Holonyms,
        CueSource::Attributes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CueSource::Synonyms => "synonyms",
            CueSource::Gloss => "gloss",
            CueSource::Examples => "examples",
            CueSource::Hypernyms => "hypernyms",
            CueSource::Hyponyms => "hyponyms",
            CueSource::Sisters => "sisters",
            CueSource::Meronyms => "meronyms",
            CueSource::Holonyms => "holonyms",
            CueSource::Attributes => "attributes",
        }
    }
}

impl FromStr for CueSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CueSource::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown cueword source `{s}`")))
    }
}

/// A subset of [`CueSource`] plus the noun-whitelist switch for gloss words.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueSources {
    pub sources: BTreeSet<CueSource>,
    /// Restrict gloss/example words to the record's `gloss_nouns` when it has one.
    #[serde(default)]
    pub gloss_nouns_only: bool,
}

impl CueSources {
    pub fn all() -> Self {
        CueSources {
            sources: CueSource::ALL.into_iter().collect(),
            gloss_nouns_only: false,
        }
    }

    pub fn only(sources: impl IntoIterator<Item = CueSource>) -> Self {
        CueSources {
            sources: sources.into_iter().collect(),
            gloss_nouns_only: false,
        }
    }
}

impl Default for CueSources {
    fn default() -> Self {
        CueSources::all()
    }
}

impl FromStr for CueSources {
    type Err = Error;

    /// Comma separated source names, or `all`.
    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "all" {
            return Ok(CueSources::all());
        }
        let sources = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(str::parse)
            .collect::<Result<BTreeSet<_>>>()?;
        Ok(CueSources {
            sources,
            gloss_nouns_only: false,
        })
    }
}
