//! Independent reference implementations used as oracles by the test targets.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topicsig::cluster::{Dendrogram, Linkage};
use topicsig::lexicon::{Pos, SenseId, WordKey};
use topicsig::querygen::QueryNode;
use topicsig::signature::FrequencyVector;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sense(lemma: &str, n: u32) -> SenseId {
    SenseId::new(lemma, Pos::Noun, n).unwrap()
}

pub fn word(lemma: &str) -> WordKey {
    WordKey::new(lemma, Pos::Noun)
}

/// Plain dense-matrix computation of the signature weights of every row:
/// expected = row total * column total / grand total; weight = (f - e) / e
/// where f > e. Zero weights are left out.
pub fn brute_force_weights(rows: &[BTreeMap<String, u64>]) -> Vec<BTreeMap<String, f64>> {
    let words: BTreeSet<&String> = rows.iter().flat_map(|r| r.keys()).collect();
    let row_totals: Vec<f64> = rows.iter().map(|r| r.values().sum::<u64>() as f64).collect();
    let grand: f64 = row_totals.iter().sum();
    let mut out = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let mut weights = BTreeMap::new();
        for &w in &words {
            let col: f64 = rows.iter().map(|r| *r.get(w).unwrap_or(&0) as f64).sum();
            let expected = row_totals[i] * col / grand;
            let f = *row.get(w).unwrap_or(&0) as f64;
            if f > expected {
                weights.insert(w.clone(), (f - expected) / expected);
            }
        }
        out.push(weights);
    }
    out
}

/// Random table: `senses` rows over `words` columns, counts in `0..=max`.
/// At least one cell is non-zero.
pub fn random_table(r: &mut ChaCha8Rng, senses: usize, words: usize, max: u64) -> Vec<BTreeMap<String, u64>> {
    loop {
        let rows: Vec<BTreeMap<String, u64>> = (0..senses)
            .map(|_| {
                (0..words)
                    .map(|j| (format!("w{j}"), r.random_range(0..=max)))
                    .filter(|&(_, c)| c > 0)
                    .collect()
            })
            .collect();
        if rows.iter().any(|row| !row.is_empty()) {
            return rows;
        }
    }
}

pub fn vectors_of(lemma: &str, rows: &[BTreeMap<String, u64>]) -> Vec<FrequencyVector> {
    rows.iter()
        .enumerate()
        .map(|(i, row)| FrequencyVector::from_counts(sense(lemma, i as u32 + 1), row.iter().map(|(w, &c)| (w.clone(), c))))
        .collect()
}

/// Case-insensitive linear scan evaluation of a query tree.
pub fn scan_eval(node: &QueryNode, tokens: &[String]) -> bool {
    match node {
        QueryNode::Phrase(words) => {
            let lower: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
            let k = words.len();
            k <= lower.len() && (0..=lower.len() - k).any(|i| lower[i..i + k] == words[..])
        }
        QueryNode::And(cs) => cs.iter().all(|c| scan_eval(c, tokens)),
        QueryNode::Or(cs) => cs.iter().any(|c| scan_eval(c, tokens)),
        QueryNode::Not(c) => !scan_eval(c, tokens),
    }
}

/// Heights of a minimum spanning tree (Prim), ascending.
pub fn mst_heights(d: &[Vec<f64>]) -> Vec<f64> {
    let n = d.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    best[0] = 0.0;
    let mut edges = Vec::new();
    for step in 0..n {
        let u = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| best[a].total_cmp(&best[b]))
            .unwrap();
        in_tree[u] = true;
        if step > 0 {
            edges.push(best[u]);
        }
        for v in 0..n {
            if !in_tree[v] && d[u][v] < best[v] {
                best[v] = d[u][v];
            }
        }
    }
    edges.sort_by(f64::total_cmp);
    edges
}

/// A merge of the naive clustering: the two member sets and the height.
#[derive(Clone, Debug)]
pub struct NaiveMerge {
    pub left: BTreeSet<usize>,
    pub right: BTreeSet<usize>,
    pub height: f64,
}

/// Bilinear form sum_a sum_b p[a] q[b] m[a][b].
fn bilinear(p: &[f64], q: &[f64], m: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for (a, pa) in p.iter().enumerate() {
        if *pa == 0.0 {
            continue;
        }
        for (b, qb) in q.iter().enumerate() {
            s += pa * qb * m[a][b];
        }
    }
    s
}

/// Agglomeration recomputing every cluster distance from the original matrix
/// at each step.
///
/// Single and complete use the min and max over member pairs. Median keeps
/// each cluster as a weight vector over leaves (the merged vector is the mean
/// of its children's) and uses `F(P,Q) - F(P,P)/2 - F(Q,Q)/2` with `F` the
/// bilinear form over `d`. Ward uses the same form over `d²` with uniform
/// member weights, scaled by `2|P||Q|/(|P|+|Q|)`; heights are its square root.
pub fn naive_agglomerate(d: &[Vec<f64>], linkage: Linkage) -> Vec<NaiveMerge> {
    let n = d.len();
    let d2: Vec<Vec<f64>> = d.iter().map(|r| r.iter().map(|x| x * x).collect()).collect();
    let unit = |i: usize| -> Vec<f64> { (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect() };
    // members, weight vector
    let mut clusters: Vec<(BTreeSet<usize>, Vec<f64>)> = (0..n).map(|i| (BTreeSet::from([i]), unit(i))).collect();
    let dist = |p: &(BTreeSet<usize>, Vec<f64>), q: &(BTreeSet<usize>, Vec<f64>)| -> f64 {
        match linkage {
            Linkage::Single => p.0.iter().flat_map(|&a| q.0.iter().map(move |&b| d[a][b])).fold(f64::INFINITY, f64::min),
            Linkage::Complete => p.0.iter().flat_map(|&a| q.0.iter().map(move |&b| d[a][b])).fold(0.0, f64::max),
            Linkage::Median => bilinear(&p.1, &q.1, d) - 0.5 * bilinear(&p.1, &p.1, d) - 0.5 * bilinear(&q.1, &q.1, d),
            Linkage::Ward => {
                let uniform = |s: &BTreeSet<usize>| -> Vec<f64> {
                    (0..n).map(|i| if s.contains(&i) { 1.0 / s.len() as f64 } else { 0.0 }).collect()
                };
                let (wp, wq) = (uniform(&p.0), uniform(&q.0));
                let (np, nq) = (p.0.len() as f64, q.0.len() as f64);
                2.0 * np * nq / (np + nq)
                    * (bilinear(&wp, &wq, &d2) - 0.5 * bilinear(&wp, &wp, &d2) - 0.5 * bilinear(&wq, &wq, &d2))
            }
        }
    };
    let mut merges = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let (la, lb) = (*clusters[a].0.first().unwrap(), *clusters[b].0.first().unwrap());
                let (lo, hi) = if la < lb { (a, b) } else { (b, a) };
                let key = (dist(&clusters[a], &clusters[b]), la.min(lb), la.max(lb));
                if best.is_none_or(|(bd, bl, bh, _, _)| key.0 < bd || (key.0 == bd && (key.1, key.2) < (bl, bh))) {
                    best = Some((key.0, key.1, key.2, lo, hi));
                }
            }
        }
        let (h, _, _, lo, hi) = best.unwrap();
        let (left, right) = (clusters[lo].clone(), clusters[hi].clone());
        let weights: Vec<f64> = left.1.iter().zip(&right.1).map(|(x, y)| 0.5 * (x + y)).collect();
        let members: BTreeSet<usize> = left.0.union(&right.0).copied().collect();
        merges.push(NaiveMerge {
            left: left.0,
            right: right.0,
            height: if linkage == Linkage::Ward { h.max(0.0).sqrt() } else { h },
        });
        clusters[lo] = (members, weights);
        clusters.remove(hi);
    }
    merges
}

/// Random symmetric matrix with zero diagonal and entries in (0, 1).
#[allow(clippy::needless_range_loop)]
pub fn random_matrix(r: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let x = r.random_range(0.001..1.0);
            d[i][j] = x;
            d[j][i] = x;
        }
    }
    d
}

/// Leaf sets of a dendrogram's merges, in merge order.
pub fn merge_sets(d: &Dendrogram) -> Vec<(BTreeSet<usize>, BTreeSet<usize>)> {
    d.merges()
        .iter()
        .map(|m| (d.members(m.left).into_iter().collect(), d.members(m.right).into_iter().collect()))
        .collect()
}

/// Enumerates every root-to-leaf path and returns the one an exhaustive
/// comparison of branch totals selects: at each node the child with the larger
/// total wins, ties to the child holding the lowest sense number.
pub fn exhaustive_descent(d: &Dendrogram, branch_total: &dyn Fn(usize) -> f64) -> usize {
    fn paths(d: &Dendrogram, node: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        prefix.push(node);
        match d.children(node) {
            None => out.push(prefix.clone()),
            Some((l, r)) => {
                paths(d, l, prefix, out);
                paths(d, r, prefix, out);
            }
        }
        prefix.pop();
    }
    let mut all = Vec::new();
    paths(d, d.root(), &mut Vec::new(), &mut all);
    let lowest = |node: usize| d.member_senses(node).iter().map(|s| s.sense_no).min().unwrap();
    let valid = all.into_iter().filter(|path| {
        path.windows(2).all(|w| {
            let (l, r) = d.children(w[0]).unwrap();
            let other = if w[1] == l { r } else { l };
            let (mine, theirs) = (branch_total(w[1]), branch_total(other));
            mine > theirs || (mine == theirs && lowest(w[1]) < lowest(other))
        })
    });
    let chosen: Vec<Vec<usize>> = valid.collect();
    assert_eq!(chosen.len(), 1, "exactly one consistent path");
    *chosen[0].last().unwrap()
}

pub const QUERY_VOCAB: [&str; 6] = ["alpha", "beta", "gamma", "delta", "eps", "zeta"];

pub fn random_phrase(r: &mut ChaCha8Rng) -> QueryNode {
    let k = r.random_range(1..=3);
    QueryNode::Phrase((0..k).map(|_| QUERY_VOCAB[r.random_range(0..QUERY_VOCAB.len())].to_string()).collect())
}

/// Random well-formed query tree of at most `depth` operator levels.
pub fn random_query_node(r: &mut ChaCha8Rng, depth: usize) -> QueryNode {
    if depth == 0 || r.random_bool(0.3) {
        return random_phrase(r);
    }
    match r.random_range(0..3) {
        0 => QueryNode::And((0..r.random_range(2..=3)).map(|_| random_query_node(r, depth - 1)).collect()),
        1 => QueryNode::Or((0..r.random_range(1..=3)).map(|_| random_query_node(r, depth - 1)).collect()),
        _ => QueryNode::Not(Box::new(random_query_node(r, depth - 1))),
    }
}

/// Random document over the query vocabulary, some tokens upper-cased.
pub fn random_doc(r: &mut ChaCha8Rng, max_len: usize) -> Vec<String> {
    let len = r.random_range(0..=max_len);
    (0..len)
        .map(|_| {
            let w = QUERY_VOCAB[r.random_range(0..QUERY_VOCAB.len())];
            if r.random_bool(0.3) {
                w.to_uppercase()
            } else {
                w.to_string()
            }
        })
        .collect()
}
