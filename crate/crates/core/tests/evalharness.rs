mod common;

use std::collections::BTreeMap;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topicsig::cluster::{merge_steps, Dendrogram, Level, Linkage};
use topicsig::evalharness::{
    parse_corpus, parse_predictions, precision, random_baseline, render_corpus, render_predictions, render_report,
    report_from_predictions, EvalInputs, Method, Prediction, ReportFormat, TaggedInstance,
};
use topicsig::lexicon::{Pos, SenseId};

struct World {
    corpus: Vec<TaggedInstance>,
    predictions: Vec<Prediction>,
    inputs: EvalInputs,
}

/// Several words with random dendrograms, gold tags and Sign predictions.
fn world(seed: u64) -> World {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = EvalInputs::new(100);
    let mut corpus = Vec::new();
    let mut predictions = Vec::new();
    for w in 0..r.random_range(1..=4) {
        let lemma = format!("w{w}");
        let n = r.random_range(2..=6);
        let leaves: Vec<SenseId> = (1..=n as u32).map(|k| sense(&lemma, k)).collect();
        let d = Dendrogram::new(leaves.clone(), merge_steps(&random_matrix(&mut r, n), Linkage::Single), None).unwrap();
        inputs.dendrograms.insert(word(&lemma), d);
        for i in 0..r.random_range(1..=25) {
            let id = format!("{lemma}.{i}");
            let gold = leaves[r.random_range(0..n)].clone();
            let chosen = leaves[r.random_range(0..n)].clone();
            corpus.push(TaggedInstance {
                instance_id: id.clone(),
                tokens: vec![lemma.clone()],
                target_index: 0,
                lemma: lemma.clone(),
                pos: Pos::Noun,
                gold: gold.clone(),
            });
            predictions.push(Prediction {
                instance_id: id,
                lemma: lemma.clone(),
                method: Method::Sign,
                gold,
                chosen,
                decided: true,
                scores: BTreeMap::new(),
            });
        }
    }
    World {
        corpus,
        predictions,
        inputs,
    }
}

proptest! {
    #[test]
    fn coarser_levels_never_score_lower(seed in any::<u64>()) {
        let w = world(seed);
        let levels = [Level::Fine, Level::Medium, Level::Coarse];
        let report = report_from_predictions(&w.corpus, &w.predictions, &w.inputs, &[Method::Sign, Method::Ran], &levels).unwrap();
        for row in &report.rows {
            for m in [Method::Sign, Method::Ran] {
                let p = |l: Level| report.precision(&row.word, l, m);
                let fine = p(Level::Fine).unwrap();
                let coarse = p(Level::Coarse).unwrap();
                prop_assert!(coarse >= fine);
                if let Some(medium) = p(Level::Medium) {
                    prop_assert!(medium >= fine && coarse >= medium);
                }
            }
        }
    }

    #[test]
    fn overall_is_the_pooled_precision(seed in any::<u64>()) {
        let w = world(seed);
        let report = report_from_predictions(&w.corpus, &w.predictions, &w.inputs, &[Method::Sign], &[Level::Fine]).unwrap();
        let pred: BTreeMap<String, SenseId> = w.predictions.iter().map(|p| (p.instance_id.clone(), p.chosen.clone())).collect();
        let gold: BTreeMap<String, SenseId> = w.corpus.iter().map(|i| (i.instance_id.clone(), i.gold.clone())).collect();
        let pooled = precision(&pred, &gold, None).unwrap();
        let overall = report.overall().cells[&(Level::Fine, Method::Sign)].precision();
        prop_assert!((overall - pooled).abs() <= 1e-12);
        let occurrences: u64 = report.rows.iter().map(|r| r.n_occurrences).sum();
        prop_assert_eq!(occurrences as usize, w.corpus.len());
    }

    #[test]
    fn random_baseline_times_senses_is_one(n in 1usize..500) {
        prop_assert!((random_baseline(n).unwrap() * n as f64 - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn corpus_and_predictions_round_trip(seed in any::<u64>()) {
        let w = world(seed);
        prop_assert_eq!(parse_corpus(&render_corpus(&w.corpus)).unwrap(), w.corpus);
        prop_assert_eq!(parse_predictions(&render_predictions(&w.predictions)).unwrap(), w.predictions);
    }
}

#[test]
fn report_formats_agree_on_values() {
    let w = world(9);
    let report =
        report_from_predictions(&w.corpus, &w.predictions, &w.inputs, &[Method::Sign], &[Level::Fine, Level::Coarse])
            .unwrap();
    let csv = render_report(&report, ReportFormat::Csv);
    assert!(csv.contains("\r\n"));
    let mut rows = csv::Reader::from_reader(csv.as_bytes());
    let header = rows.headers().unwrap().clone();
    let col = header.iter().position(|h| h == "fine:Sign").unwrap();
    let jsonl = render_report(&report, ReportFormat::JsonLines);
    for (record, line) in rows.records().zip(jsonl.lines()) {
        let record = record.unwrap();
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(record[0], v["word"]);
        let from_csv: f64 = record[col].parse().unwrap();
        assert!((from_csv - v["precision"]["fine:Sign"].as_f64().unwrap()).abs() <= 0.005);
    }
    let table = render_report(&report, ReportFormat::Table);
    assert!(table.lines().next().unwrap().starts_with("Word"));
    assert!(table.lines().any(|l| l.starts_with("Overall")));
    assert!(table.lines().any(|l| l.starts_with("Macro (extra)")));
}

#[test]
fn mismatched_keys_are_input_errors() {
    let gold = BTreeMap::from([("a".to_string(), sense("x", 1))]);
    let pred = BTreeMap::from([("b".to_string(), sense("x", 1))]);
    assert_eq!(precision(&pred, &gold, None).unwrap_err().exit_code(), 5);
    assert_eq!(random_baseline(0).unwrap_err().exit_code(), 5);
}
