//! Seeded synthetic fixture: a small lexicon for one ambiguous noun, a local
//! document corpus whose documents satisfy the per-sense queries, and a
//! sense-tagged corpus drawn from the same per-sense vocabularies.
//!
//! Each sense owns a block of pseudo-words; neighbouring senses share part of
//! their blocks, so vocabularies overlap partially. Tagged contexts never
//! contain cuewords, which keeps the word-list baselines near chance.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalharness::{render_corpus, TaggedInstance};
use crate::fsutil::write_atomic;
use crate::lexicon::{CueSources, Lexicon, Pos, SenseEntry, SenseId};
use crate::querygen::{build_query, eval_query, extract_cuewords, BooleanQuery};
use crate::signature::tokenize;

pub const LEMMA: &str = "crane";

const FILLER: [&str; 16] = [
    "the", "of", "and", "to", "in", "is", "was", "for", "on", "with", "as", "by", "at", "from", "that", "it",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    /// 2 or 3.
    pub senses: usize,
    pub docs_per_sense: usize,
    pub noise_docs: usize,
    pub instances: usize,
    pub doc_len: usize,
    /// Tokens on each side of the target in a tagged instance.
    pub context_half: usize,
    /// Pseudo-words per sense block.
    pub block: usize,
    /// Pseudo-words shared by neighbouring blocks.
    pub overlap: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 42,
            senses: 2,
            docs_per_sense: 50,
            noise_docs: 10,
            instances: 200,
            doc_len: 150,
            context_half: 60,
            block: 40,
            overlap: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub spec: SynthSpec,
    pub lemma: String,
    pub pos: Pos,
    pub documents: usize,
    pub instances: usize,
    pub gold_counts: BTreeMap<SenseId, usize>,
    pub lexicon: String,
    pub corpus_dir: String,
    pub tagged: String,
}

pub struct SynthFixture {
    pub lexicon: Lexicon,
    /// Relative path and text of each document.
    pub documents: Vec<(String, String)>,
    pub instances: Vec<TaggedInstance>,
    pub manifest: SynthManifest,
}

pub struct SynthPaths {
    pub lexicon: PathBuf,
    pub corpus_dir: PathBuf,
    pub tagged: PathBuf,
    pub manifest: PathBuf,
}

fn sense_entries() -> Vec<SenseEntry> {
    let entry = |n: u32, gloss: &str, hypernyms: &[&str], hyponyms: &[&str]| SenseEntry {
        id: SenseId::new(LEMMA, Pos::Noun, n).expect("valid id"),
        synonyms: vec![LEMMA.into()],
        gloss: gloss.into(),
        examples: Vec::new(),
        hypernyms: hypernyms.iter().map(|s| s.to_string()).collect(),
        hyponyms: hyponyms.iter().map(|s| s.to_string()).collect(),
        sisters: Vec::new(),
        meronyms: Vec::new(),
        holonyms: Vec::new(),
        attributes: Vec::new(),
        gloss_nouns: None,
    };
    vec![
        entry(
            1,
            "large long-necked wading bird of marshes and plains",
            &["wading bird", "wader"],
            &["whooping crane", "sandhill crane"],
        ),
        entry(
            2,
            "lifting machine that moves heavy objects with a cable",
            &["lifting device"],
            &["davit", "derrick", "gantry crane"],
        ),
        entry(
            3,
            "camera mount on a boom used in film production",
            &["camera mount"],
            &["jib", "dolly crane"],
        ),
    ]
}

/// Deterministic pronounceable pseudo-word for an index.
fn pseudo_word(i: usize) -> String {
    const C: &[u8] = b"bdfgklmnprstvz";
    const V: &[u8] = b"aeiou";
    let mut s = String::new();
    let mut x = i;
    for _ in 0..3 {
        s.push(C[x % C.len()] as char);
        x /= C.len();
        s.push(V[x % V.len()] as char);
        x /= V.len();
    }
    s.push('x');
    s
}

fn vocabulary(spec: &SynthSpec, sense: usize) -> Vec<String> {
    let stride = spec.block - spec.overlap;
    (sense * stride..sense * stride + spec.block).map(pseudo_word).collect()
}

fn sample_tokens(rng: &mut ChaCha8Rng, vocab: &[String], n: usize) -> Vec<String> {
    (0..n)
        .map(|_| {
            if rng.random_bool(0.3) {
                FILLER[rng.random_range(0..FILLER.len())].to_string()
            } else {
                vocab[rng.random_range(0..vocab.len())].clone()
            }
        })
        .collect()
}

fn insert_at_random(rng: &mut ChaCha8Rng, tokens: &mut Vec<String>, words: &[String]) {
    let at = rng.random_range(0..=tokens.len());
    tokens.splice(at..at, words.iter().cloned());
}

pub fn generate(spec: &SynthSpec) -> Result<SynthFixture> {
    if !(2..=3).contains(&spec.senses) {
        return Err(Error::Config(format!("synthetic fixture supports 2 or 3 senses, not {}", spec.senses)));
    }
    if spec.overlap >= spec.block || spec.block == 0 {
        return Err(Error::Config("overlap must be smaller than the block size".into()));
    }
    let lexicon = Lexicon::from_entries(sense_entries().into_iter().take(spec.senses))?;
    let map = extract_cuewords(&lexicon, LEMMA, Pos::Noun, &CueSources::all())?;
    let queries = lexicon
        .senses_of(LEMMA, Pos::Noun)
        .iter()
        .map(|id| build_query(&map, id))
        .collect::<Result<Vec<BooleanQuery>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let target = vec![LEMMA.to_string()];

    let mut documents = Vec::new();
    for (s, q) in queries.iter().enumerate() {
        let vocab = vocabulary(spec, s);
        let cues: Vec<Vec<String>> = map.per_sense[&q.target].iter().map(|c| tokenize(c)).collect();
        for d in 0..spec.docs_per_sense {
            let mut tokens = sample_tokens(&mut rng, &vocab, spec.doc_len);
            insert_at_random(&mut rng, &mut tokens, &target);
            insert_at_random(&mut rng, &mut tokens, &target);
            let cue = &cues[rng.random_range(0..cues.len())];
            insert_at_random(&mut rng, &mut tokens, cue);
            if !eval_query(q, &tokens) {
                return Err(Error::Degenerate(format!("generated document does not match the {} query", q.target)));
            }
            let text = tokens.join(" ");
            if d % 10 == 9 {
                let html = format!("<html><head><title>{LEMMA}</title></head><body><p>{text}</p></body></html>\n");
                documents.push((format!("sense{}/doc{d:03}.html", s + 1), html));
            } else {
                documents.push((format!("sense{}/doc{d:03}.txt", s + 1), text + "\n"));
            }
        }
    }
    // noise: no target word, or cuewords of every sense at once
    let all_vocab: Vec<String> = (0..spec.senses).flat_map(|s| vocabulary(spec, s)).collect();
    for d in 0..spec.noise_docs {
        let mut tokens = sample_tokens(&mut rng, &all_vocab, spec.doc_len);
        if d % 2 == 0 {
            insert_at_random(&mut rng, &mut tokens, &target);
            for cues in map.per_sense.values() {
                let first = cues.iter().next().expect("non-empty cueword set");
                insert_at_random(&mut rng, &mut tokens, &tokenize(first));
            }
        }
        if queries.iter().any(|q| eval_query(q, &tokens)) {
            return Err(Error::Degenerate("noise document matches a query".into()));
        }
        documents.push((format!("noise/doc{d:03}.txt"), tokens.join(" ") + "\n"));
    }

    let senses = lexicon.senses_of(LEMMA, Pos::Noun);
    let mut instances = Vec::new();
    let mut gold_counts: BTreeMap<SenseId, usize> = senses.iter().map(|s| (s.clone(), 0)).collect();
    for i in 0..spec.instances {
        let s = i % spec.senses;
        let vocab = vocabulary(spec, s);
        let left = rng.random_range(spec.context_half / 2..=spec.context_half);
        let mut tokens = sample_tokens(&mut rng, &vocab, left);
        tokens.push(LEMMA.into());
        tokens.extend(sample_tokens(&mut rng, &vocab, spec.context_half));
        *gold_counts.get_mut(&senses[s]).expect("known sense") += 1;
        instances.push(TaggedInstance {
            instance_id: format!("{LEMMA}.{i:04}"),
            tokens,
            target_index: left,
            lemma: LEMMA.into(),
            pos: Pos::Noun,
            gold: senses[s].clone(),
        });
    }

    let manifest = SynthManifest {
        spec: spec.clone(),
        lemma: LEMMA.into(),
        pos: Pos::Noun,
        documents: documents.len(),
        instances: instances.len(),
        gold_counts,
        lexicon: "lexicon.lex".into(),
        corpus_dir: "corpus".into(),
        tagged: "tagged.jsonl".into(),
    };
    Ok(SynthFixture {
        lexicon,
        documents,
        instances,
        manifest,
    })
}

impl SynthFixture {
    pub fn write(&self, dir: &Path) -> Result<SynthPaths> {
        let paths = SynthPaths {
            lexicon: dir.join(&self.manifest.lexicon),
            corpus_dir: dir.join(&self.manifest.corpus_dir),
            tagged: dir.join(&self.manifest.tagged),
            manifest: dir.join("manifest.json"),
        };
        write_atomic(&paths.lexicon, self.lexicon.render().as_bytes())?;
        for (rel, text) in &self.documents {
            write_atomic(&paths.corpus_dir.join(rel), text.as_bytes())?;
        }
        write_atomic(&paths.tagged, render_corpus(&self.instances).as_bytes())?;
        let manifest = serde_json::to_string_pretty(&self.manifest).expect("serializable manifest") + "\n";
        write_atomic(&paths.manifest, manifest.as_bytes())?;
        Ok(paths)
    }
}
