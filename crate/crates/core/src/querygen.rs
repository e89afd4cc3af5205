//! Boolean retrieval queries built from per-sense cuewords.
//!
//! The query for sense `i` of word `x` asks for documents that contain `x`,
//! at least one cueword of sense `i`, and none of the cuewords of the other
//! senses:
//!
//! ```text
//! (x AND (cue_i1 OR cue_i2 ...) AND NOT (cue_j1 OR ... OR cue_k1 ...))
//! ```
//!
//! A cueword listed under more than one sense is dropped from all of them.
//!
//! Surface syntax: every group is parenthesized, operators are uppercase
//! `AND`, `OR`, `AND NOT`; multiword phrases go in single quotes (with `\'`
//! and `\\` escapes), single words are bare. [`parse_query`] accepts exactly
//! what [`render_node`] produces.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::lexicon::{CueSources, Lexicon, Pos, SenseId, WordKey};
use crate::signature::tokenize;

/// Cuewords per sense after conflict filtering.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CuewordMap {
    pub word: WordKey,
    pub per_sense: BTreeMap<SenseId, BTreeSet<String>>,
}

impl CuewordMap {
    pub fn get(&self, sense: &SenseId) -> Option<&BTreeSet<String>> {
        self.per_sense.get(sense)
    }
}

pub fn extract_cuewords(
    lex: &Lexicon,
    lemma: &str,
    pos: Pos,
    sources: &CueSources,
) -> Result<CuewordMap> {
    let senses = lex.senses_of(lemma, pos);
    if senses.is_empty() {
        return Err(Error::Input(format!("no senses for {lemma}#{pos}")));
    }
    let mut raw = BTreeMap::new();
    for id in senses {
        let cues = lex.raw_cuewords(&id, sources)?;
        raw.insert(id, cues);
    }
    Ok(discard_shared(WordKey::new(lemma, pos), raw))
}

/// Removes the target lemma and every phrase present under two or more senses.
pub fn discard_shared(word: WordKey, raw: BTreeMap<SenseId, BTreeSet<String>>) -> CuewordMap {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for cues in raw.values() {
        for c in cues {
            *seen.entry(c.as_str()).or_insert(0) += 1;
        }
    }
    let shared: BTreeSet<String> = seen
        .into_iter()
        .filter(|&(_, n)| n > 1)
        .map(|(c, _)| c.to_owned())
        .collect();
    let lemma = word.surface();
    let per_sense = raw
        .into_iter()
        .map(|(id, cues)| {
            let kept = cues
                .into_iter()
                .filter(|c| !shared.contains(c) && *c != lemma)
                .collect();
            (id, kept)
        })
        .collect();
    CuewordMap { word, per_sense }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QueryNode {
    /// Contiguous words, compared case-insensitively. Never empty.
    Phrase(Vec<String>),
    /// At least two children.
    And(Vec<QueryNode>),
    /// At least one child.
    Or(Vec<QueryNode>),
    Not(Box<QueryNode>),
}

impl QueryNode {
    /// A phrase from free text, tokenized the same way documents are and lowercased.
    pub fn phrase(text: &str) -> Option<QueryNode> {
        let words: Vec<String> = tokenize(text).into_iter().map(|w| w.to_lowercase()).collect();
        (!words.is_empty()).then_some(QueryNode::Phrase(words))
    }

    pub fn is_valid(&self) -> bool {
        match self {
            QueryNode::Phrase(words) => {
                !words.is_empty()
                    && words
                        .iter()
                        .all(|w| !w.is_empty() && !w.chars().any(char::is_whitespace))
            }
            QueryNode::And(cs) => cs.len() >= 2 && cs.iter().all(QueryNode::is_valid),
            QueryNode::Or(cs) => !cs.is_empty() && cs.iter().all(QueryNode::is_valid),
            QueryNode::Not(c) => c.is_valid(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BooleanQuery {
    pub target: SenseId,
    pub root: QueryNode,
}

/// Or node over the phrases of a cueword set, deduplicated and sorted.
fn or_of(cues: &BTreeSet<String>) -> Option<QueryNode> {
    let phrases: BTreeSet<QueryNode> = cues.iter().filter_map(|c| QueryNode::phrase(c)).collect();
    (!phrases.is_empty()).then(|| QueryNode::Or(phrases.into_iter().collect()))
}

pub fn build_query(map: &CuewordMap, target: &SenseId) -> Result<BooleanQuery> {
    let own = map
        .get(target)
        .ok_or_else(|| Error::UnknownSense(target.clone()))?;
    let own = or_of(own).ok_or_else(|| Error::UnbuildableQuery {
        sense: target.clone(),
    })?;
    let lemma = QueryNode::phrase(&map.word.surface())
        .ok_or_else(|| Error::Input(format!("lemma {} has no tokens", map.word)))?;
    let negatives: BTreeSet<String> = map
        .per_sense
        .iter()
        .filter(|(id, _)| *id != target)
        .flat_map(|(_, cues)| cues.iter().cloned())
        .collect();
    let mut children = vec![lemma, own];
    if let Some(neg) = or_of(&negatives) {
        children.push(QueryNode::Not(Box::new(neg)));
    }
    Ok(BooleanQuery {
        target: target.clone(),
        root: QueryNode::And(children),
    })
}

pub fn render_query(q: &BooleanQuery) -> String {
    render_node(&q.root)
}

pub fn render_node(node: &QueryNode) -> String {
    let mut out = String::new();
    write_node(&mut out, node);
    out
}

fn write_node(out: &mut String, node: &QueryNode) {
    match node {
        QueryNode::Phrase(words) => write_phrase(out, words),
        QueryNode::Or(children) => {
            out.push('(');
            for (i, c) in children.iter().enumerate() {
                if i > 0 {
                    out.push_str(" OR ");
                }
                write_node(out, c);
            }
            out.push(')');
        }
        QueryNode::And(children) => {
            out.push('(');
            for (i, c) in children.iter().enumerate() {
                match (i, c) {
                    (0, QueryNode::Not(inner)) => {
                        out.push_str("NOT ");
                        write_node(out, inner);
                    }
                    (0, c) => write_node(out, c),
                    (_, QueryNode::Not(inner)) => {
                        out.push_str(" AND NOT ");
                        write_node(out, inner);
                    }
                    (_, c) => {
                        out.push_str(" AND ");
                        write_node(out, c);
                    }
                }
            }
            out.push(')');
        }
        QueryNode::Not(inner) => {
            out.push_str("(NOT ");
            write_node(out, inner);
            out.push(')');
        }
    }
}

fn needs_quotes(word: &str) -> bool {
    matches!(word, "AND" | "OR" | "NOT")
        || word.starts_with('\'')
        || word.chars().any(|c| matches!(c, '(' | ')' | '\\') || c.is_whitespace())
}

fn write_phrase(out: &mut String, words: &[String]) {
    if words.len() == 1 && !needs_quotes(&words[0]) {
        out.push_str(&words[0]);
        return;
    }
    out.push('\'');
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        for ch in w.chars() {
            if ch == '\'' || ch == '\\' {
                out.push('\\');
            }
            out.push(ch);
        }
    }
    out.push('\'');
}

#[derive(Debug, PartialEq)]
enum Tok {
    Open,
    Close,
    And,
    Or,
    Not,
    Phrase(Vec<String>),
}

fn lex_query(s: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = s.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '(' {
            toks.push(Tok::Open);
            i += 1;
        } else if c == ')' {
            toks.push(Tok::Close);
            i += 1;
        } else if c == '\'' {
            i += 1;
            let mut text = String::new();
            loop {
                match chars.get(i) {
                    None => return Err(Error::format(0, "unterminated quoted phrase")),
                    Some('\\') => {
                        let escaped = chars
                            .get(i + 1)
                            .ok_or_else(|| Error::format(0, "dangling escape"))?;
                        text.push(*escaped);
                        i += 2;
                    }
                    Some('\'') => {
                        i += 1;
                        break;
                    }
                    Some(&ch) => {
                        text.push(ch);
                        i += 1;
                    }
                }
            }
            let words: Vec<String> = text.split(' ').map(str::to_owned).collect();
            if words.iter().any(String::is_empty) {
                return Err(Error::format(0, format!("bad quoted phrase `{text}`")));
            }
            toks.push(Tok::Phrase(words));
        } else {
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() && chars[i] != '(' && chars[i] != ')' {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            toks.push(match word.as_str() {
                "AND" => Tok::And,
                "OR" => Tok::Or,
                "NOT" => Tok::Not,
                _ => Tok::Phrase(vec![word]),
            });
        }
    }
    Ok(toks)
}

/// Parses the rendered query grammar back into a tree.
pub fn parse_query(s: &str) -> Result<QueryNode> {
    let toks = lex_query(s)?;
    let mut pos = 0;
    let node = parse_atom(&toks, &mut pos)?;
    if pos != toks.len() {
        return Err(Error::format(0, "trailing input after query"));
    }
    Ok(node)
}

fn parse_atom(toks: &[Tok], pos: &mut usize) -> Result<QueryNode> {
    match toks.get(*pos) {
        Some(Tok::Phrase(words)) => {
            *pos += 1;
            Ok(QueryNode::Phrase(words.clone()))
        }
        Some(Tok::Open) => {
            *pos += 1;
            parse_group(toks, pos)
        }
        other => Err(Error::format(0, format!("expected phrase or `(`, found {other:?}"))),
    }
}

#[derive(PartialEq)]
enum Joiner {
    And,
    Or,
}

fn parse_group(toks: &[Tok], pos: &mut usize) -> Result<QueryNode> {
    let mut items: Vec<(bool, QueryNode)> = Vec::new();
    let mut joiner: Option<Joiner> = None;
    let negated = if toks.get(*pos) == Some(&Tok::Not) {
        *pos += 1;
        true
    } else {
        false
    };
    items.push((negated, parse_atom(toks, pos)?));
    loop {
        let (op, negated) = match toks.get(*pos) {
            Some(Tok::Close) => {
                *pos += 1;
                break;
            }
            Some(Tok::And) if toks.get(*pos + 1) == Some(&Tok::Not) => {
                *pos += 2;
                (Joiner::And, true)
            }
            Some(Tok::And) => {
                *pos += 1;
                (Joiner::And, false)
            }
            Some(Tok::Or) => {
                *pos += 1;
                (Joiner::Or, false)
            }
            other => return Err(Error::format(0, format!("expected operator or `)`, found {other:?}"))),
        };
        match &joiner {
            Some(j) if *j != op => return Err(Error::format(0, "mixed AND/OR in one group")),
            _ => joiner = Some(op),
        }
        items.push((negated, parse_atom(toks, pos)?));
    }
    match joiner {
        None => {
            let (negated, node) = items.pop().expect("one item");
            Ok(if negated {
                QueryNode::Not(Box::new(node))
            } else {
                QueryNode::Or(vec![node])
            })
        }
        Some(Joiner::Or) => {
            if items[0].0 {
                return Err(Error::format(0, "NOT cannot open an OR group"));
            }
            Ok(QueryNode::Or(items.into_iter().map(|(_, n)| n).collect()))
        }
        Some(Joiner::And) => Ok(QueryNode::And(
            items
                .into_iter()
                .map(|(neg, n)| if neg { QueryNode::Not(Box::new(n)) } else { n })
                .collect(),
        )),
    }
}

/// Positional index of a tokenized document, keyed by lowercased token.
pub struct DocIndex {
    positions: HashMap<String, Vec<usize>>,
}

impl DocIndex {
    pub fn new<S: AsRef<str>>(tokens: &[S]) -> Self {
        let mut positions: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, t) in tokens.iter().enumerate() {
            positions.entry(t.as_ref().to_lowercase()).or_default().push(i);
        }
        DocIndex { positions }
    }

    fn at(&self, word: &str, position: usize) -> bool {
        self.positions
            .get(word)
            .is_some_and(|ps| ps.binary_search(&position).is_ok())
    }

    pub fn contains_phrase(&self, words: &[String]) -> bool {
        let lowered: Vec<String> = words.iter().map(|w| w.to_lowercase()).collect();
        let Some(starts) = lowered.first().and_then(|w| self.positions.get(w)) else {
            return false;
        };
        starts.iter().any(|&p| {
            lowered[1..]
                .iter()
                .enumerate()
                .all(|(k, w)| self.at(w, p + k + 1))
        })
    }

    pub fn eval(&self, node: &QueryNode) -> bool {
        match node {
            QueryNode::Phrase(words) => self.contains_phrase(words),
            QueryNode::And(cs) => cs.iter().all(|c| self.eval(c)),
            QueryNode::Or(cs) => cs.iter().any(|c| self.eval(c)),
            QueryNode::Not(c) => !self.eval(c),
        }
    }
}

/// Evaluates the query over a tokenized document.
pub fn eval_query<S: AsRef<str>>(q: &BooleanQuery, doc_tokens: &[S]) -> bool {
    DocIndex::new(doc_tokens).eval(&q.root)
}

/// Query file body: one rendered query per line.
pub fn render_query_file(queries: &[BooleanQuery]) -> String {
    let mut out = String::new();
    for q in queries {
        let _ = writeln!(out, "{}", render_query(q));
    }
    out
}

/// Sidecar manifest: `{"sense":..., "query":...}` per line, aligned with the query file.
pub fn render_query_manifest(queries: &[BooleanQuery]) -> String {
    let mut out = String::new();
    for q in queries {
        let line = serde_json::json!({ "sense": q.target.to_string(), "query": render_query(q) });
        let _ = writeln!(out, "{line}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boy() -> Lexicon {
        Lexicon::parse(include_str!("../fixtures/boy.lex")).unwrap()
    }

    fn id(s: &str) -> SenseId {
        s.parse().unwrap()
    }

    fn phrase(s: &str) -> QueryNode {
        QueryNode::phrase(s).unwrap()
    }

    #[test]
    fn shared_cueword_dropped_everywhere() {
        let lex = Lexicon::parse(
            "{\"id\":\"w#n#1\",\"gloss\":\"g\",\"hypernyms\":[\"x\",\"a\"]}\n{\"id\":\"w#n#2\",\"gloss\":\"h\",\"hypernyms\":[\"x\",\"b\"]}",
        )
        .unwrap();
        let map = extract_cuewords(&lex, "w", Pos::Noun, &CueSources::all()).unwrap();
        assert!(!map.get(&id("w#n#1")).unwrap().contains("x"));
        assert!(!map.get(&id("w#n#2")).unwrap().contains("x"));
        assert!(map.get(&id("w#n#1")).unwrap().contains("a"));
    }

    #[test]
    fn all_shared_leaves_empty_sets() {
        let lex = Lexicon::parse(
            "{\"id\":\"w#n#1\",\"gloss\":\"same words\"}\n{\"id\":\"w#n#2\",\"gloss\":\"same words\"}",
        )
        .unwrap();
        let map = extract_cuewords(&lex, "w", Pos::Noun, &CueSources::all()).unwrap();
        assert!(map.per_sense.values().all(BTreeSet::is_empty));
        assert!(matches!(
            build_query(&map, &id("w#n#1")),
            Err(Error::UnbuildableQuery { .. })
        ));
    }

    #[test]
    fn unknown_lemma_is_input_error() {
        assert!(extract_cuewords(&boy(), "girl", Pos::Noun, &CueSources::all()).is_err());
    }

    #[test]
    fn boy_cuewords() {
        let map = extract_cuewords(&boy(), "boy", Pos::Noun, &CueSources::all()).unwrap();
        assert!(map.get(&id("boy#n#1")).unwrap().contains("altar boy"));
        for n in 2..=4 {
            assert!(!map.get(&id(&format!("boy#n#{n}"))).unwrap().contains("altar boy"));
        }
        // shared between senses: man, male, adult male
        for set in map.per_sense.values() {
            assert!(!set.contains("man") && !set.contains("male") && !set.contains("adult male"));
            assert!(!set.contains("boy"));
        }
    }

    #[test]
    fn boy_query_shape() {
        let map = extract_cuewords(&boy(), "boy", Pos::Noun, &CueSources::all()).unwrap();
        let q = build_query(&map, &id("boy#n#1")).unwrap();
        let QueryNode::And(children) = &q.root else { panic!() };
        assert_eq!(children.len(), 3);
        assert_eq!(children[0], phrase("boy"));
        assert!(matches!(&children[2], QueryNode::Not(inner) if matches!(**inner, QueryNode::Or(_))));
        let text = render_query(&q);
        assert!(text.starts_with("(boy AND ("), "{text}");
        assert!(text.contains("'altar boy' OR 'ball boy'"), "{text}");
        assert!(text.contains("'male person'"), "{text}");
        assert!(text.contains(") AND NOT ("), "{text}");
        assert!(text.contains("'broth of a boy'"), "{text}");
        assert!(text.contains("'mama\\'s boy'"), "{text}");
        assert!(text.contains(" OR son OR ") || text.contains("(son OR ") || text.contains(" OR son)"), "{text}");
        assert!(text.ends_with("))"), "{text}");
        assert_eq!(parse_query(&text).unwrap(), q.root);
    }

    #[test]
    fn or_children_sorted() {
        let map = extract_cuewords(&boy(), "boy", Pos::Noun, &CueSources::all()).unwrap();
        let q = build_query(&map, &id("boy#n#3")).unwrap();
        let QueryNode::And(children) = &q.root else { panic!() };
        for c in &children[1..] {
            let or = match c {
                QueryNode::Not(inner) => inner.as_ref(),
                other => other,
            };
            let QueryNode::Or(items) = or else { panic!() };
            assert!(items.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn single_sense_has_no_not_arm() {
        let map = CuewordMap {
            word: WordKey::new("w", Pos::Noun),
            per_sense: [(id("w#n#1"), ["a".to_string()].into_iter().collect())].into_iter().collect(),
        };
        let q = build_query(&map, &id("w#n#1")).unwrap();
        assert_eq!(q.root, QueryNode::And(vec![phrase("w"), QueryNode::Or(vec![phrase("a")])]));
        assert_eq!(render_query(&q), "(w AND (a))");
    }

    #[test]
    fn render_examples() {
        let node = QueryNode::And(vec![phrase("boy"), QueryNode::Or(vec![phrase("altar boy")])]);
        assert_eq!(render_node(&node), "(boy AND ('altar boy'))");
        assert_eq!(parse_query("(boy AND ('altar boy'))").unwrap(), node);
        let not_first = QueryNode::And(vec![QueryNode::Not(Box::new(phrase("a"))), phrase("b")]);
        assert_eq!(render_node(&not_first), "(NOT a AND b)");
        assert_eq!(parse_query("(NOT a AND b)").unwrap(), not_first);
        let lone_not = QueryNode::Not(Box::new(phrase("a")));
        assert_eq!(render_node(&lone_not), "(NOT a)");
        let keyword = QueryNode::Phrase(vec!["AND".into()]);
        assert_eq!(render_node(&keyword), "'AND'");
        assert_eq!(parse_query("'AND'").unwrap(), keyword);
    }

    #[test]
    fn parse_errors() {
        for bad in ["", "(a", "(a AND b OR c)", "(a AND)", "'open", "(NOT a OR b)", "a b", ")"] {
            assert!(parse_query(bad).is_err(), "{bad:?} parsed");
        }
    }

    #[test]
    fn eval_examples() {
        let map = extract_cuewords(&boy(), "boy", Pos::Noun, &CueSources::all()).unwrap();
        let q = build_query(&map, &id("boy#n#1")).unwrap();
        assert!(eval_query(&q, &tokenize("the altar boy sang")));
        assert!(eval_query(&q, &tokenize("The Altar Boy sang")));
        assert!(!eval_query(&q, &tokenize("the altar boy sang to his son")));
        assert!(!eval_query(&q, &tokenize("altar of the boy")));
        let man = BooleanQuery {
            target: id("boy#n#1"),
            root: QueryNode::And(vec![
                phrase("boy"),
                QueryNode::Or(vec![phrase("altar boy")]),
                QueryNode::Not(Box::new(QueryNode::Or(vec![phrase("man")]))),
            ]),
        };
        assert!(!eval_query(&man, &tokenize("an altar boy and a man")));
    }

    #[test]
    fn query_files() {
        let map = extract_cuewords(&boy(), "boy", Pos::Noun, &CueSources::all()).unwrap();
        let qs: Vec<_> = map.per_sense.keys().map(|s| build_query(&map, s).unwrap()).collect();
        let body = render_query_file(&qs);
        let manifest = render_query_manifest(&qs);
        assert_eq!(body.lines().count(), 4);
        for (line, m) in body.lines().zip(manifest.lines()) {
            let v: serde_json::Value = serde_json::from_str(m).unwrap();
            assert_eq!(v["query"], line);
        }
    }
}
