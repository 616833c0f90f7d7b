//! Redundancy quantification over human-labeled similarity data: maximal
//! similar sets (maximal cliques), minimum set cover, and the byte-level
//! fixed-chunk deduplication baseline.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Read;

use sha2::{Digest, Sha256};

use crate::error::{CoreError, Result};

/// One labeled unordered pair with per-labeler scores on the 0..5 scale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRecord {
    pub item_a: String,
    pub item_b: String,
    pub scores: Vec<u8>,
}

/// Items as vertices, edges as human-labeled "similar" pairs.
#[derive(Debug, Clone)]
pub struct SimilarityGraph {
    /// Sorted item ids; index order is the canonical item order.
    items: Vec<String>,
    adj: Vec<Vec<bool>>,
}

impl SimilarityGraph {
    pub fn new(items: impl IntoIterator<Item = String>) -> Self {
        let mut items: Vec<String> = items.into_iter().collect();
        items.sort();
        items.dedup();
        let n = items.len();
        SimilarityGraph { items, adj: vec![vec![false; n]; n] }
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.items.binary_search_by(|x| x.as_str().cmp(id)).ok()
    }

    pub fn add_edge_by_index(&mut self, a: usize, b: usize) {
        if a != b {
            self.adj[a][b] = true;
            self.adj[b][a] = true;
        }
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a][b]
    }

    pub fn edges(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for a in 0..self.len() {
            for b in a + 1..self.len() {
                if self.adj[a][b] {
                    out.push((self.items[a].clone(), self.items[b].clone()));
                }
            }
        }
        out
    }
}

/// Builds the similarity graph: edge iff the mean labeler score is >= 3.
pub fn aggregate_labels(records: &[LabelRecord], items: &[String]) -> Result<SimilarityGraph> {
    let mut graph = SimilarityGraph::new(items.iter().cloned());
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    for rec in records {
        if rec.item_a == rec.item_b {
            return Err(CoreError::Invalid(format!("self-pair label for {}", rec.item_a)));
        }
        if rec.scores.is_empty() {
            return Err(CoreError::Invalid(format!(
                "empty score list for pair ({}, {})",
                rec.item_a, rec.item_b
            )));
        }
        if let Some(bad) = rec.scores.iter().find(|s| **s > 5) {
            return Err(CoreError::Invalid(format!(
                "score {bad} outside 0..5 for pair ({}, {})",
                rec.item_a, rec.item_b
            )));
        }
        let a = graph
            .index_of(&rec.item_a)
            .ok_or_else(|| CoreError::Invalid(format!("unknown item {}", rec.item_a)))?;
        let b = graph
            .index_of(&rec.item_b)
            .ok_or_else(|| CoreError::Invalid(format!("unknown item {}", rec.item_b)))?;
        let key = (a.min(b), a.max(b));
        if !seen.insert(key) {
            return Err(CoreError::Invalid(format!(
                "duplicate label for pair ({}, {})",
                rec.item_a, rec.item_b
            )));
        }
        let mean = rec.scores.iter().map(|s| *s as f64).sum::<f64>() / rec.scores.len() as f64;
        if mean >= 3.0 {
            graph.add_edge_by_index(a, b);
        }
    }
    Ok(graph)
}

/// All maximal cliques (including singletons for isolated items), each set
/// sorted, list sorted: canonical order-independent output.
pub fn maximal_similar_sets(graph: &SimilarityGraph) -> Vec<Vec<String>> {
    let n = graph.len();
    let mut cliques: Vec<Vec<usize>> = Vec::new();
    let mut r = Vec::new();
    let p: Vec<usize> = (0..n).collect();
    bron_kerbosch(graph, &mut r, p, Vec::new(), &mut cliques);
    let mut out: Vec<Vec<String>> = cliques
        .into_iter()
        .map(|c| {
            let mut ids: Vec<String> = c.iter().map(|&i| graph.items()[i].clone()).collect();
            ids.sort();
            ids
        })
        .collect();
    out.sort();
    out
}

fn bron_kerbosch(
    g: &SimilarityGraph,
    r: &mut Vec<usize>,
    p: Vec<usize>,
    x: Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if p.is_empty() && x.is_empty() {
        let mut clique = r.clone();
        clique.sort_unstable();
        out.push(clique);
        return;
    }
    // pivot: vertex in P union X with the most neighbors in P
    let pivot = p
        .iter()
        .chain(x.iter())
        .copied()
        .max_by_key(|&u| p.iter().filter(|&&v| g.has_edge(u, v)).count())
        .unwrap();
    let candidates: Vec<usize> = p.iter().copied().filter(|&v| !g.has_edge(pivot, v)).collect();
    let mut p = p;
    let mut x = x;
    for v in candidates {
        let next_p: Vec<usize> = p.iter().copied().filter(|&u| g.has_edge(v, u)).collect();
        let next_x: Vec<usize> = x.iter().copied().filter(|&u| g.has_edge(v, u)).collect();
        r.push(v);
        bron_kerbosch(g, r, next_p, next_x, out);
        r.pop();
        p.retain(|&u| u != v);
        x.push(v);
    }
}

/// Maximal similar sets, the cover, and the derived redundancy fraction.
#[derive(Debug, Clone)]
pub struct SimilarSetCover {
    pub maximal_sets: Vec<Vec<String>>,
    pub cover: Vec<String>,
    pub redundancy: f64,
    /// True when the cover is provably minimum (exact search); false when
    /// the greedy approximation was used.
    pub exact: bool,
}

/// Cutoff above which the exact branch-and-bound is abandoned for greedy.
pub const EXACT_COVER_LIMIT: usize = 25;

/// Picks a hitting set over the maximal sets: exact minimum for small item
/// counts, greedy (most uncovered sets hit, ties by lowest id) above the
/// cutoff. Redundancy = 1 - |cover| / |items|.
pub fn min_set_cover(sets: &[Vec<String>], items: &[String]) -> SimilarSetCover {
    let (sorted_items, masks) = index_sets(sets, items);

    let (cover_idx, exact) = if sorted_items.len() <= EXACT_COVER_LIMIT {
        (exact_cover(&masks, sorted_items.len()), true)
    } else {
        (greedy_cover(&masks, sorted_items.len()), false)
    };

    let cover: Vec<String> = cover_idx.iter().map(|&i| sorted_items[i].clone()).collect();
    let redundancy = if sorted_items.is_empty() {
        0.0
    } else {
        1.0 - cover.len() as f64 / sorted_items.len() as f64
    };
    SimilarSetCover { maximal_sets: sets.to_vec(), cover, redundancy, exact }
}

/// Greedy hitting set over the same inputs as `min_set_cover`, regardless of
/// instance size. Exposed so the approximation can be compared against the
/// exact solver.
pub fn greedy_set_cover(sets: &[Vec<String>], items: &[String]) -> Vec<String> {
    let (sorted_items, masks) = index_sets(sets, items);
    greedy_cover(&masks, sorted_items.len())
        .into_iter()
        .map(|i| sorted_items[i].clone())
        .collect()
}

/// Dedups/sorts the item universe and converts sets to index form, adding a
/// singleton set for every item no set mentions.
fn index_sets(sets: &[Vec<String>], items: &[String]) -> (Vec<String>, Vec<BTreeSet<usize>>) {
    let mut sorted_items: Vec<String> = items.to_vec();
    sorted_items.sort();
    sorted_items.dedup();
    let index: BTreeMap<&str, usize> =
        sorted_items.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();

    let mut masks: Vec<BTreeSet<usize>> = sets
        .iter()
        .map(|s| s.iter().filter_map(|id| index.get(id.as_str()).copied()).collect())
        .filter(|m: &BTreeSet<usize>| !m.is_empty())
        .collect();
    // items outside every set still need covering
    let covered_somewhere: BTreeSet<usize> = masks.iter().flatten().copied().collect();
    for i in 0..sorted_items.len() {
        if !covered_somewhere.contains(&i) {
            masks.push(BTreeSet::from([i]));
        }
    }
    (sorted_items, masks)
}

fn greedy_cover(sets: &[BTreeSet<usize>], n_items: usize) -> Vec<usize> {
    let mut uncovered: Vec<bool> = vec![true; sets.len()];
    let mut remaining = sets.len();
    let mut cover = Vec::new();
    while remaining > 0 {
        let mut best_item = usize::MAX;
        let mut best_hits = 0usize;
        for item in 0..n_items {
            let hits = sets
                .iter()
                .zip(&uncovered)
                .filter(|(s, u)| **u && s.contains(&item))
                .count();
            if hits > best_hits {
                best_hits = hits;
                best_item = item;
            }
        }
        if best_item == usize::MAX {
            break; // unhittable leftover; cannot happen with nonempty sets
        }
        cover.push(best_item);
        for (i, s) in sets.iter().enumerate() {
            if uncovered[i] && s.contains(&best_item) {
                uncovered[i] = false;
                remaining -= 1;
            }
        }
    }
    cover.sort_unstable();
    cover
}

/// Branch-and-bound minimum hitting set; items fit in a u32 bitmask.
fn exact_cover(sets: &[BTreeSet<usize>], n_items: usize) -> Vec<usize> {
    let masks: Vec<u32> = sets
        .iter()
        .map(|s| s.iter().fold(0u32, |m, &i| m | (1 << i)))
        .collect();
    // seed the bound with the greedy solution so pruning starts tight
    let greedy = greedy_cover(sets, n_items);
    let mut best_size = greedy.len() + 1;
    let mut best: Option<u32> = Some(greedy.iter().fold(0u32, |m, &i| m | (1 << i)));
    search(&masks, 0, 0, &mut best, &mut best_size);
    let mask = best.unwrap_or(0);
    (0..n_items).filter(|i| mask & (1 << i) != 0).collect()
}

fn search(
    masks: &[u32],
    chosen: u32,
    chosen_count: usize,
    best: &mut Option<u32>,
    best_size: &mut usize,
) {
    // find an unhit set
    let unhit = masks.iter().find(|&&m| m & chosen == 0);
    let Some(&set) = unhit else {
        if chosen_count < *best_size {
            *best_size = chosen_count;
            *best = Some(chosen);
        }
        return;
    };
    if chosen_count + 1 >= *best_size {
        return; // cannot improve
    }
    let mut bits = set;
    while bits != 0 {
        let item = bits.trailing_zeros();
        bits &= bits - 1;
        search(masks, chosen | (1 << item), chosen_count + 1, best, best_size);
    }
}

/// Fraction of bytes whose fixed-size chunk digest was already seen earlier
/// in stream order. The final partial chunk of each blob is kept.
pub fn chunk_dedup_ratio(blobs: &[impl AsRef<[u8]>], chunk_size: usize) -> Result<f64> {
    if chunk_size < 16 {
        return Err(CoreError::Invalid(format!("chunk_size {chunk_size} < 16")));
    }
    let mut seen: HashSet<[u8; 32]> = HashSet::new();
    let mut total: u64 = 0;
    let mut duplicate: u64 = 0;
    for blob in blobs {
        for chunk in blob.as_ref().chunks(chunk_size) {
            total += chunk.len() as u64;
            let digest: [u8; 32] = Sha256::digest(chunk).into();
            if !seen.insert(digest) {
                duplicate += chunk.len() as u64;
            }
        }
    }
    if total == 0 {
        return Ok(0.0);
    }
    Ok(duplicate as f64 / total as f64)
}

/// Reads a label CSV with header `item_a,item_b,score1,...` (any number of
/// score columns >= 1).
pub fn read_label_csv<R: Read>(reader: R) -> Result<Vec<LabelRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() < 3 {
            return Err(CoreError::Invalid(format!("label row too short: {row:?}")));
        }
        let scores: Vec<u8> = row
            .iter()
            .skip(2)
            .map(|s| {
                s.trim()
                    .parse::<u8>()
                    .map_err(|_| CoreError::Invalid(format!("bad score `{s}`")))
            })
            .collect::<Result<_>>()?;
        out.push(LabelRecord {
            item_a: row[0].trim().to_string(),
            item_b: row[1].trim().to_string(),
            scores,
        });
    }
    Ok(out)
}

/// Items manifest: one id per line, blank lines skipped.
pub fn read_items_manifest<R: Read>(mut reader: R) -> Result<Vec<String>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}
