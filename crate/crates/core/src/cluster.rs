//! Binary agglomerative clustering of the senses of one word.
//!
//! Each sense is represented by the aggregate frequency vector of its whole
//! collection; the distance between two senses is `1 - cosine`. Cluster
//! distances are maintained with the Lance–Williams recurrence:
//!
//! | linkage  | update of d(k, a∪b)                                          |
//! |----------|--------------------------------------------------------------|
//! | single   | min(d(k,a), d(k,b))                                          |
//! | complete | max(d(k,a), d(k,b))                                          |
//! | median   | d(k,a)/2 + d(k,b)/2 - d(a,b)/4                               |
//! | ward     | ((nk+na)d(k,a) + (nk+nb)d(k,b) - nk d(a,b)) / (na+nb+nk), on d² |
//!
//! Ward heights are reported as the square root of the merged squared
//! distance. Equal distances are resolved in favour of the pair whose lowest
//! leaf index is smallest, then the pair whose other lowest leaf is smallest.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::fixed;
use crate::lexicon::{SenseId, WordKey};
use crate::signature::{FrequencyVector, TopicId};

pub fn cosine_similarity(u: &FrequencyVector, v: &FrequencyVector) -> Result<f64> {
    if u.total() == 0 || v.total() == 0 {
        return Err(Error::Degenerate(format!(
            "cosine undefined for an empty vector ({} / {})",
            u.owner, v.owner
        )));
    }
    let (small, large) = if u.len() <= v.len() { (u, v) } else { (v, u) };
    let dot: f64 = small
        .iter()
        .map(|(w, c)| c as f64 * large.get(w) as f64)
        .sum();
    let norm = |x: &FrequencyVector| x.iter().map(|(_, c)| (c as f64).powi(2)).sum::<f64>().sqrt();
    Ok((dot / (norm(u) * norm(v))).clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Single,
    Complete,
    Median,
    Ward,
}

impl Linkage {
    pub const ALL: [Linkage; 4] = [Linkage::Single, Linkage::Complete, Linkage::Median, Linkage::Ward];

    pub fn name(self) -> &'static str {
        match self {
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Median => "median",
            Linkage::Ward => "ward",
        }
    }
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" | "slink" => Ok(Linkage::Single),
            "complete" | "clink" => Ok(Linkage::Complete),
            "median" => Ok(Linkage::Median),
            "ward" => Ok(Linkage::Ward),
            _ => Err(Error::Config(format!("unknown linkage `{s}`"))),
        }
    }
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One merge step. Nodes `0..n` are leaves; merge `k` creates node `n + k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Child containing the lower leaf index.
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    /// `1 - distance`, clamped to [0, 1].
    pub similarity: f64,
    pub size: usize,
    /// The merge height is below the previous one (possible under median linkage).
    #[serde(default)]
    pub inversion: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dendrogram {
    leaves: Vec<SenseId>,
    merges: Vec<Merge>,
    linkage: Option<Linkage>,
}

/// Merge steps over a symmetric distance matrix.
pub fn merge_steps(dist: &[Vec<f64>], linkage: Linkage) -> Vec<Merge> {
    let n = dist.len();
    let squared = linkage == Linkage::Ward;
    // Per active slot: node id, lowest leaf, size.
    let mut active: Vec<(usize, usize, usize)> = (0..n).map(|i| (i, i, 1)).collect();
    let mut d: Vec<Vec<f64>> = dist
        .iter()
        .map(|row| row.iter().map(|&x| if squared { x * x } else { x }).collect())
        .collect();
    let mut merges: Vec<Merge> = Vec::with_capacity(n.saturating_sub(1));
    while active.len() > 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for a in 0..active.len() {
            for b in a + 1..active.len() {
                let (lo, hi) = if active[a].1 < active[b].1 { (a, b) } else { (b, a) };
                let key = (d[a][b], active[lo].1, active[hi].1);
                let better = match best {
                    None => true,
                    Some((bd, bl, bh, _, _)) => {
                        key.0 < bd || (key.0 == bd && (key.1, key.2) < (bl, bh))
                    }
                };
                if better {
                    best = Some((key.0, key.1, key.2, lo, hi));
                }
            }
        }
        let (dab, _, _, lo, hi) = best.expect("at least one pair");
        let (na, nb) = (active[lo].2, active[hi].2);
        let mut row = vec![0.0; active.len()];
        for k in 0..active.len() {
            if k == lo || k == hi {
                continue;
            }
            let (dka, dkb, nk) = (d[k][lo], d[k][hi], active[k].2 as f64);
            row[k] = match linkage {
                Linkage::Single => dka.min(dkb),
                Linkage::Complete => dka.max(dkb),
                Linkage::Median => 0.5 * dka + 0.5 * dkb - 0.25 * dab,
                Linkage::Ward => {
                    ((nk + na as f64) * dka + (nk + nb as f64) * dkb - nk * dab)
                        / (na as f64 + nb as f64 + nk)
                }
            };
        }
        let height = if squared { dab.max(0.0).sqrt() } else { dab };
        let inversion = merges.last().is_some_and(|m| height < m.distance);
        let node = n + merges.len();
        merges.push(Merge {
            left: active[lo].0,
            right: active[hi].0,
            distance: height,
            similarity: (1.0 - height).clamp(0.0, 1.0),
            size: na + nb,
            inversion,
        });
        // new cluster takes slot `lo`; slot `hi` is removed
        active[lo] = (node, active[lo].1.min(active[hi].1), na + nb);
        for k in 0..active.len() {
            if k != lo && k != hi {
                d[lo][k] = row[k];
                d[k][lo] = row[k];
            }
        }
        d[lo][lo] = 0.0;
        active.remove(hi);
        d.remove(hi);
        for r in d.iter_mut() {
            r.remove(hi);
        }
    }
    merges
}

/// Pairwise `1 - cosine` distances.
pub fn distance_matrix(vectors: &[FrequencyVector]) -> Result<Vec<Vec<f64>>> {
    let n = vectors.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let x = 1.0 - cosine_similarity(&vectors[i], &vectors[j])?;
            d[i][j] = x;
            d[j][i] = x;
        }
    }
    Ok(d)
}

/// Clusters the senses of one word. Leaf `i` is `vectors[i]`, whose owner must be a sense.
pub fn agglomerate(vectors: &[FrequencyVector], linkage: Linkage) -> Result<Dendrogram> {
    if vectors.len() < 2 {
        return Err(Error::Degenerate(format!(
            "clustering needs at least 2 senses, got {}",
            vectors.len()
        )));
    }
    let leaves = vectors
        .iter()
        .map(|v| match &v.owner {
            TopicId::Sense(s) => Ok(s.clone()),
            other => Err(Error::Input(format!("cannot cluster non-sense vector {other}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let dist = distance_matrix(vectors)?;
    Dendrogram::new(leaves, merge_steps(&dist, linkage), Some(linkage))
}

/// How many clusters a partition has, by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Fine,
    Medium,
    Coarse,
    Custom(usize),
}

impl Level {
    pub const NAMED: [Level; 3] = [Level::Fine, Level::Medium, Level::Coarse];
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Fine => f.write_str("fine"),
            Level::Medium => f.write_str("medium"),
            Level::Coarse => f.write_str("coarse"),
            Level::Custom(k) => write!(f, "k{k}"),
        }
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fine" => Ok(Level::Fine),
            "medium" => Ok(Level::Medium),
            "coarse" => Ok(Level::Coarse),
            other => other
                .strip_prefix('k')
                .and_then(|k| k.parse().ok())
                .filter(|&k| k > 0)
                .map(Level::Custom)
                .ok_or_else(|| Error::Config(format!("unknown level `{s}`"))),
        }
    }
}

impl Serialize for Level {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Level {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    /// Disjoint, covering, each sorted; ordered by lowest member.
    pub clusters: Vec<BTreeSet<SenseId>>,
    pub level: Level,
}

impl Partition {
    pub fn singletons(senses: impl IntoIterator<Item = SenseId>) -> Self {
        let clusters: Vec<BTreeSet<SenseId>> = senses.into_iter().map(|s| BTreeSet::from([s])).collect();
        Partition {
            level: Level::Custom(clusters.len()),
            clusters,
        }
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn cluster_of(&self, sense: &SenseId) -> Option<usize> {
        self.clusters.iter().position(|c| c.contains(sense))
    }

    /// Senses in different clusters never share one; senses outside the
    /// partition only match themselves.
    pub fn same_cluster(&self, a: &SenseId, b: &SenseId) -> bool {
        a == b || matches!((self.cluster_of(a), self.cluster_of(b)), (Some(x), Some(y)) if x == y)
    }

    /// Every cluster of `self` lies inside one cluster of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.clusters.iter().all(|c| {
            coarser
                .clusters
                .iter()
                .any(|big| c.iter().all(|s| big.contains(s)))
        })
    }

    /// One line per cluster, comma separated sense numbers.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.clusters {
            let nos: Vec<String> = c.iter().map(|s| s.sense_no.to_string()).collect();
            out.push_str(&nos.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct DendrogramManifest {
    word: String,
    linkage: Option<Linkage>,
    leaves: Vec<SenseId>,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn new(leaves: Vec<SenseId>, merges: Vec<Merge>, linkage: Option<Linkage>) -> Result<Self> {
        let n = leaves.len();
        if n < 2 {
            return Err(Error::Degenerate("a dendrogram needs at least 2 leaves".into()));
        }
        let word = leaves[0].word();
        if leaves.iter().any(|l| l.word() != word) {
            return Err(Error::Input("dendrogram leaves must be senses of one word".into()));
        }
        if merges.len() != n - 1 {
            return Err(Error::Input(format!("{n} leaves need {} merges, got {}", n - 1, merges.len())));
        }
        let mut used = vec![false; 2 * n - 1];
        for (k, m) in merges.iter().enumerate() {
            for child in [m.left, m.right] {
                if child >= n + k || used[child] {
                    return Err(Error::Input(format!("merge {k} refers to invalid node {child}")));
                }
                used[child] = true;
            }
        }
        Ok(Dendrogram {
            leaves,
            merges,
            linkage,
        })
    }

    pub fn leaves(&self) -> &[SenseId] {
        &self.leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn linkage(&self) -> Option<Linkage> {
        self.linkage
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn word(&self) -> WordKey {
        self.leaves[0].word()
    }

    pub fn root(&self) -> usize {
        2 * self.leaves.len() - 2
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node < self.leaves.len()
    }

    pub fn children(&self, node: usize) -> Option<(usize, usize)> {
        node.checked_sub(self.leaves.len())
            .and_then(|k| self.merges.get(k))
            .map(|m| (m.left, m.right))
    }

    /// Leaf indices under `node`, ascending.
    pub fn members(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            match self.children(x) {
                Some((l, r)) => {
                    stack.push(l);
                    stack.push(r);
                }
                None => out.push(x),
            }
        }
        out.sort_unstable();
        out
    }

    pub fn member_senses(&self, node: usize) -> Vec<SenseId> {
        self.members(node).into_iter().map(|i| self.leaves[i].clone()).collect()
    }

    /// Leaf index of a sense.
    pub fn leaf_of(&self, sense: &SenseId) -> Option<usize> {
        self.leaves.iter().position(|l| l == sense)
    }

    /// Internal nodes, root first, each before its descendants.
    pub fn internal_nodes_top_down(&self) -> Vec<usize> {
        (self.leaves.len()..=self.root()).rev().collect()
    }

    pub fn inversions(&self) -> usize {
        self.merges.iter().filter(|m| m.inversion).count()
    }

    /// `k` clusters: the merges after the first `n - k` are undone.
    pub fn cut(&self, k: usize) -> Result<Partition> {
        let n = self.leaves.len();
        if k == 0 || k > n {
            return Err(Error::Range(format!("cannot cut {n} senses into {k} clusters")));
        }
        let mut owner: Vec<usize> = (0..n).collect();
        let mut groups: BTreeMap<usize, Vec<usize>> = (0..n).map(|i| (i, vec![i])).collect();
        let mut node_group: Vec<usize> = (0..n).collect();
        for (step, m) in self.merges.iter().take(n - k).enumerate() {
            let (gl, gr) = (node_group[m.left], node_group[m.right]);
            let moved = groups.remove(&gr).expect("group exists");
            for &leaf in &moved {
                owner[leaf] = gl;
            }
            groups.get_mut(&gl).expect("group exists").extend(moved);
            node_group.push(gl);
            debug_assert_eq!(node_group.len(), n + step + 1);
        }
        let mut clusters: Vec<BTreeSet<SenseId>> = groups
            .into_values()
            .map(|g| g.into_iter().map(|i| self.leaves[i].clone()).collect())
            .collect();
        clusters.sort_by(|a, b| a.first().cmp(&b.first()));
        let level = if k == n {
            Level::Fine
        } else {
            Level::Custom(k)
        };
        Ok(Partition { clusters, level })
    }

    /// Nested form, e.g. `(((1,3):0.650000,2):0.550000,4):0.460000`, leaves by sense number.
    pub fn render_nested(&self) -> String {
        fn go(d: &Dendrogram, node: usize, out: &mut String) {
            match d.children(node) {
                None => out.push_str(&d.leaves[node].sense_no.to_string()),
                Some((l, r)) => {
                    out.push('(');
                    go(d, l, out);
                    out.push(',');
                    go(d, r, out);
                    out.push_str("):");
                    let m = &d.merges[node - d.leaves.len()];
                    out.push_str(&fixed(m.similarity, 6));
                }
            }
        }
        let mut out = String::new();
        go(self, self.root(), &mut out);
        out
    }

    /// Reads the nested form for the senses of `word`. Leaves are numbered by
    /// sense; merges are ordered by descending similarity with children first.
    pub fn parse_nested(text: &str, word: &WordKey) -> Result<Self> {
        enum Tree {
            Leaf(u32),
            Node(Box<Tree>, Box<Tree>, f64),
        }
        fn parse(chars: &[char], i: &mut usize) -> Result<Tree> {
            let bad = |msg: &str| Error::format(0, format!("bad dendrogram: {msg}"));
            if chars.get(*i) == Some(&'(') {
                *i += 1;
                let l = parse(chars, i)?;
                if chars.get(*i) != Some(&',') {
                    return Err(bad("expected `,`"));
                }
                *i += 1;
                let r = parse(chars, i)?;
                if chars.get(*i) != Some(&')') || chars.get(*i + 1) != Some(&':') {
                    return Err(bad("expected `):`"));
                }
                *i += 2;
                let start = *i;
                while *i < chars.len() && (chars[*i].is_ascii_digit() || matches!(chars[*i], '.' | '-' | 'e' | 'E' | '+')) {
                    *i += 1;
                }
                let s: String = chars[start..*i].iter().collect();
                let sim = s.parse::<f64>().map_err(|_| bad("bad similarity"))?;
                Ok(Tree::Node(Box::new(l), Box::new(r), sim))
            } else {
                let start = *i;
                while *i < chars.len() && chars[*i].is_ascii_digit() {
                    *i += 1;
                }
                let s: String = chars[start..*i].iter().collect();
                s.parse::<u32>().map(Tree::Leaf).map_err(|_| bad("bad leaf"))
            }
        }
        let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
        let mut i = 0;
        let tree = parse(&chars, &mut i)?;
        if i != chars.len() {
            return Err(Error::format(0, "trailing input after dendrogram"));
        }
        // collect leaves and internal nodes
        struct Flat {
            leaves: Vec<u32>,
            nodes: Vec<(usize, usize, f64)>, // children as temp ids: leaves 0.., internal 1000000+
        }
        const INNER: usize = usize::MAX / 2;
        fn flatten(t: &Tree, f: &mut Flat) -> usize {
            match t {
                Tree::Leaf(no) => {
                    f.leaves.push(*no);
                    f.leaves.len() - 1
                }
                Tree::Node(l, r, s) => {
                    let a = flatten(l, f);
                    let b = flatten(r, f);
                    f.nodes.push((a, b, *s));
                    INNER + f.nodes.len() - 1
                }
            }
        }
        let mut flat = Flat { leaves: vec![], nodes: vec![] };
        flatten(&tree, &mut flat);
        let mut order: Vec<usize> = (0..flat.leaves.len()).collect();
        order.sort_by_key(|&i| flat.leaves[i]);
        let mut sorted_nos: Vec<u32> = flat.leaves.clone();
        sorted_nos.sort_unstable();
        sorted_nos.dedup();
        if sorted_nos.len() != flat.leaves.len() {
            return Err(Error::format(0, "repeated leaf in dendrogram"));
        }
        // leaf temp id -> leaf index in sense order
        let mut leaf_index = vec![0; flat.leaves.len()];
        for (rank, &tmp) in order.iter().enumerate() {
            leaf_index[tmp] = rank;
        }
        let leaves: Vec<SenseId> = sorted_nos.iter().map(|&no| word.sense(no)).collect();
        let n = leaves.len();
        // emit merges: ready nodes with highest similarity first
        let mut emitted: Vec<Option<usize>> = vec![None; flat.nodes.len()];
        let mut merges = Vec::new();
        let resolve = |id: usize, emitted: &[Option<usize>]| -> Option<usize> {
            if id >= INNER { emitted[id - INNER] } else { Some(leaf_index[id]) }
        };
        while merges.len() < flat.nodes.len() {
            let mut pick: Option<usize> = None;
            for (k, &(a, b, s)) in flat.nodes.iter().enumerate() {
                if emitted[k].is_some() || resolve(a, &emitted).is_none() || resolve(b, &emitted).is_none() {
                    continue;
                }
                if pick.is_none_or(|p| s > flat.nodes[p].2) {
                    pick = Some(k);
                }
            }
            let k = pick.expect("some node is ready");
            let (a, b, s) = flat.nodes[k];
            let (ra, rb) = (resolve(a, &emitted).unwrap(), resolve(b, &emitted).unwrap());
            emitted[k] = Some(n + merges.len());
            merges.push((ra, rb, s));
        }
        let mut built: Vec<Merge> = Vec::with_capacity(merges.len());
        let mut lowest: Vec<usize> = (0..n).collect();
        let mut sizes: Vec<usize> = vec![1; n];
        for (a, b, s) in merges {
            let (left, right) = if lowest[a] <= lowest[b] { (a, b) } else { (b, a) };
            lowest.push(lowest[a].min(lowest[b]));
            sizes.push(sizes[a] + sizes[b]);
            let distance = 1.0 - s;
            let inversion = built.last().is_some_and(|m| distance < m.distance);
            built.push(Merge {
                left,
                right,
                distance,
                similarity: s,
                size: sizes[a] + sizes[b],
                inversion,
            });
        }
        Dendrogram::new(leaves, built, None)
    }

    /// JSON manifest: leaves and merges in step order.
    pub fn render_manifest(&self) -> String {
        let m = DendrogramManifest {
            word: self.word().to_string(),
            linkage: self.linkage,
            leaves: self.leaves.clone(),
            merges: self.merges.clone(),
        };
        let mut s = serde_json::to_string_pretty(&m).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn parse_manifest(text: &str) -> Result<Self> {
        let m: DendrogramManifest =
            serde_json::from_str(text).map_err(|e| Error::format(0, format!("dendrogram manifest: {e}")))?;
        Dendrogram::new(m.leaves, m.merges, m.linkage)
    }
}

/// Fine = every sense apart; coarse = two clusters; medium = n-1 clusters,
/// present only when that differs from coarse (n-1 > 2).
pub fn granularity_levels(d: &Dendrogram) -> BTreeMap<Level, Partition> {
    let n = d.len();
    let mut out = BTreeMap::new();
    let mut add = |level: Level, k: usize| {
        if let Ok(mut p) = d.cut(k) {
            p.level = level;
            out.insert(level, p);
        }
    };
    add(Level::Fine, n);
    if n >= 4 {
        add(Level::Medium, n - 1);
    }
    add(Level::Coarse, 2);
    out
}

/// Cluster count of a level for `n` senses; `None` when the level is absent.
pub fn level_clusters(level: Level, n: usize) -> Option<usize> {
    match level {
        Level::Fine => Some(n),
        Level::Medium => (n >= 4).then(|| n - 1),
        Level::Coarse => (n >= 2).then_some(2),
        Level::Custom(k) => (k >= 1 && k <= n).then_some(k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::Pos;

    fn sense(n: u32) -> SenseId {
        SenseId::new("boy", Pos::Noun, n).unwrap()
    }

    fn vec_of(n: u32, counts: &[(&str, u64)]) -> FrequencyVector {
        FrequencyVector::from_counts(sense(n), counts.iter().map(|&(w, c)| (w, c)))
    }

    #[test]
    fn cosine_examples() {
        let u = vec_of(1, &[("a", 1), ("b", 1)]);
        let v = vec_of(2, &[("a", 1)]);
        assert!((cosine_similarity(&u, &u).unwrap() - 1.0).abs() < 1e-12);
        assert!((cosine_similarity(&u, &v).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(cosine_similarity(&u, &v).unwrap(), cosine_similarity(&v, &u).unwrap());
        let w = vec_of(3, &[("z", 4)]);
        assert_eq!(cosine_similarity(&u, &w).unwrap(), 0.0);
        let zero = FrequencyVector::new(sense(4));
        assert!(matches!(cosine_similarity(&u, &zero), Err(Error::Degenerate(_))));
    }

    #[test]
    fn two_senses_one_merge() {
        let vs = [vec_of(1, &[("a", 1), ("b", 1)]), vec_of(2, &[("a", 1)])];
        for l in Linkage::ALL {
            let d = agglomerate(&vs, l).unwrap();
            assert_eq!(d.merges().len(), 1);
            assert!((d.merges()[0].similarity - 0.5f64.sqrt()).abs() < 1e-12, "{l}");
        }
    }

    #[test]
    fn needs_two_vectors() {
        assert!(matches!(
            agglomerate(&[vec_of(1, &[("a", 1)])], Linkage::Single),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn chain_single_vs_complete() {
        let dist = vec![
            vec![0.0, 0.1, 0.9],
            vec![0.1, 0.0, 0.2],
            vec![0.9, 0.2, 0.0],
        ];
        let single = merge_steps(&dist, Linkage::Single);
        assert_eq!((single[0].left, single[0].right, single[0].distance), (0, 1, 0.1));
        assert_eq!(single[1].distance, 0.2);
        let complete = merge_steps(&dist, Linkage::Complete);
        assert_eq!(complete[1].distance, 0.9);
        assert_eq!((complete[1].left, complete[1].right), (3, 2));
    }

    #[test]
    fn ties_prefer_lowest_leaves() {
        let dist = vec![
            vec![0.0, 0.5, 0.5, 0.5],
            vec![0.5, 0.0, 0.5, 0.5],
            vec![0.5, 0.5, 0.0, 0.5],
            vec![0.5, 0.5, 0.5, 0.0],
        ];
        let m = merge_steps(&dist, Linkage::Single);
        assert_eq!((m[0].left, m[0].right), (0, 1));
        assert_eq!((m[1].left, m[1].right), (4, 2));
        assert_eq!((m[2].left, m[2].right), (5, 3));
    }

    #[test]
    fn median_inversion_recorded() {
        // a,b close; c sits so that the median update undercuts the first height
        let dist = vec![
            vec![0.0, 0.6, 0.61],
            vec![0.6, 0.0, 0.61],
            vec![0.61, 0.61, 0.0],
        ];
        let m = merge_steps(&dist, Linkage::Median);
        assert!((m[1].distance - (0.61 - 0.15)).abs() < 1e-12);
        assert!(m[1].inversion);
    }

    #[test]
    fn cut_bounds() {
        let d = Dendrogram::parse_nested("(((1,3):0.65,2):0.55,4):0.46", &WordKey::new("boy", Pos::Noun)).unwrap();
        assert_eq!(d.cut(4).unwrap().len(), 4);
        assert_eq!(d.cut(1).unwrap().clusters, vec![(1..=4).map(sense).collect::<BTreeSet<_>>()]);
        let two = d.cut(2).unwrap();
        assert_eq!(two.clusters[0], [1, 2, 3].map(sense).into_iter().collect());
        assert_eq!(two.clusters[1], [4].map(sense).into_iter().collect());
        let three = d.cut(3).unwrap();
        assert_eq!(three.clusters[0], [1, 3].map(sense).into_iter().collect());
        assert!(d.cut(0).is_err());
        assert!(d.cut(5).is_err());
        assert!(d.cut(3).unwrap().refines(&two));
    }

    #[test]
    fn nested_round_trip() {
        let word = WordKey::new("boy", Pos::Noun);
        let d = Dendrogram::parse_nested("(((1,3):0.65,2):0.55,4):0.46", &word).unwrap();
        assert_eq!(d.render_nested(), "(((1,3):0.650000,2):0.550000,4):0.460000");
        assert_eq!(Dendrogram::parse_nested(&d.render_nested(), &word).unwrap(), d);
        assert_eq!(Dendrogram::parse_manifest(&d.render_manifest()).unwrap(), d);
        assert!(Dendrogram::parse_nested("((1,2):0.5,2):0.4", &word).is_err());
        assert!(Dendrogram::parse_nested("(1,2)", &word).is_err());
    }

    #[test]
    fn levels() {
        let word = WordKey::new("boy", Pos::Noun);
        let boy = Dendrogram::parse_nested("(((1,3):0.65,2):0.55,4):0.46", &word).unwrap();
        let lv = granularity_levels(&boy);
        assert_eq!(lv[&Level::Fine].len(), 4);
        assert_eq!(lv[&Level::Medium].len(), 3);
        assert_eq!(lv[&Level::Coarse].len(), 2);
        let church = Dendrogram::parse_nested("((1,2):0.6,3):0.4", &word).unwrap();
        let lv = granularity_levels(&church);
        assert!(!lv.contains_key(&Level::Medium));
        assert_eq!(lv[&Level::Coarse].len(), 2);
        let pair = Dendrogram::parse_nested("(1,2):0.6", &word).unwrap();
        let lv = granularity_levels(&pair);
        assert_eq!(lv[&Level::Fine].len(), 2);
        assert_eq!(lv[&Level::Coarse].len(), 2);
        assert!(!lv.contains_key(&Level::Medium));
        assert_eq!(level_clusters(Level::Medium, 3), None);
        assert_eq!(level_clusters(Level::Medium, 4), Some(3));
    }

    #[test]
    fn partition_file() {
        let word = WordKey::new("boy", Pos::Noun);
        let d = Dendrogram::parse_nested("(((1,3):0.65,2):0.55,4):0.46", &word).unwrap();
        assert_eq!(d.cut(3).unwrap().render(), "1,3\n2\n4\n");
    }

    #[test]
    fn level_names() {
        for s in ["fine", "medium", "coarse", "k3"] {
            assert_eq!(s.parse::<Level>().unwrap().to_string(), s);
        }
        assert!("k0".parse::<Level>().is_err());
    }
}
