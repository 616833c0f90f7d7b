//! Similarity scores, the probabilistic FP/FN oracle used by the simulator,
//! and the staged detection pipeline with cost accounting.

use std::collections::BTreeMap;
use std::io::Read;

use crate::config::MessageRecord;
use crate::error::{CoreError, Result};
use crate::phash::PHash64;
use crate::rng::keyed_unit;

/// Scene-descriptor feature vector (supplied externally, not extracted).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(CoreError::Invalid("feature vector needs length >= 2".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Invalid("feature vector entries must be finite".into()));
        }
        Ok(FeatureVector { values })
    }
}

/// Per-item metadata available to the pipeline. Only `item_id` is mandatory;
/// a stage whose inputs are missing is skipped.
#[derive(Debug, Clone, Default)]
pub struct ItemMeta {
    pub item_id: String,
    pub geo: Option<(f64, f64)>,
    pub timestamp: Option<f64>,
    pub phash: Option<PHash64>,
    pub gist: Option<FeatureVector>,
    /// Pairwise SIFT match counts keyed by the other item's id: (m, m').
    pub sift_matches: BTreeMap<String, (u32, u32)>,
}

impl ItemMeta {
    pub fn new(item_id: impl Into<String>) -> Self {
        ItemMeta { item_id: item_id.into(), ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Similar,
    NotSimilar,
    Uncertain,
}

/// Which pipeline stage produced a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    MetadataGate,
    Gist,
    PHash,
    Sift,
    /// Every stage fell through (missing features); treated as NotSimilar.
    Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub verdict: Verdict,
    pub stage: Stage,
    pub cost_units: f64,
}

/// Normalized per-comparison costs, in units of one pHash comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub c_phash: f64,
    pub c_gist: f64,
    pub c_sift: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel { c_phash: 1.0, c_gist: 50.0, c_sift: 150.0 }
    }
}

/// Pearson correlation of the two vectors, in [-1, 1].
pub fn gist_similarity(v1: &FeatureVector, v2: &FeatureVector) -> Result<f64> {
    let a = &v1.values;
    let b = &v2.values;
    if a.len() != b.len() {
        return Err(CoreError::Invalid(format!(
            "feature length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(CoreError::Invalid("undefined score: constant feature vector".into()));
    }
    Ok((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}

/// S_sift = m'/m when the m > 8 gate passes; None when no decision is
/// possible (the pair is treated NotSimilar downstream).
pub fn sift_similarity(m_matched: u32, m_refined: u32) -> Result<Option<f64>> {
    if m_refined > m_matched {
        return Err(CoreError::Invalid(format!(
            "refined matches {m_refined} exceed matched {m_matched}"
        )));
    }
    if m_matched <= 8 {
        return Ok(None);
    }
    Ok(Some(m_refined as f64 / m_matched as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleVerdict {
    Similar,
    NotSimilar,
}

/// Ground-truth-with-mistakes detector. The random draw is a pure function
/// of (seed, unordered msg_id pair): every re-encounter of the same pair
/// anywhere in the network yields the identical verdict.
pub fn oracle_decide(a: &MessageRecord, b: &MessageRecord, fp: f64, fnr: f64, seed: u64) -> OracleVerdict {
    let truly_similar = a.cluster_id == b.cluster_id;
    let u = keyed_unit(seed, a.msg_id, b.msg_id);
    if truly_similar {
        if u < fnr {
            OracleVerdict::NotSimilar
        } else {
            OracleVerdict::Similar
        }
    } else if u < fp {
        OracleVerdict::Similar
    } else {
        OracleVerdict::NotSimilar
    }
}

/// Stage thresholds: GIST asserts non-similarity below `t_gist`, pHash
/// asserts similarity above `t_ph`, SIFT arbitrates above `t_sift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub t_gist: f64,
    pub t_ph: u32,
    pub t_sift: f64,
}

/// Metadata gate limits: pairs farther apart in space or time than these are
/// NotSimilar at zero algorithmic cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gates {
    pub max_distance_m: f64,
    pub max_age_s: f64,
}

impl Default for Gates {
    fn default() -> Self {
        Gates { max_distance_m: 100.0, max_age_s: 3600.0 }
    }
}

/// One staged comparison of `candidate` against a single buffered item.
pub fn pipeline_decide_pair(
    candidate: &ItemMeta,
    buffered: &ItemMeta,
    thresholds: Thresholds,
    gates: Gates,
    cost: &CostModel,
) -> Decision {
    let mut cost_units = 0.0;

    // (a) metadata gate, zero algorithmic cost
    if let (Some((ax, ay)), Some((bx, by))) = (candidate.geo, buffered.geo) {
        let d = ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt();
        if d > gates.max_distance_m {
            return Decision { verdict: Verdict::NotSimilar, stage: Stage::MetadataGate, cost_units };
        }
    }
    if let (Some(ta), Some(tb)) = (candidate.timestamp, buffered.timestamp) {
        if (ta - tb).abs() > gates.max_age_s {
            return Decision { verdict: Verdict::NotSimilar, stage: Stage::MetadataGate, cost_units };
        }
    }

    // (b) GIST: only ever asserts non-similarity
    if let (Some(va), Some(vb)) = (&candidate.gist, &buffered.gist) {
        if let Ok(s) = gist_similarity(va, vb) {
            cost_units += cost.c_gist;
            if s < thresholds.t_gist {
                return Decision { verdict: Verdict::NotSimilar, stage: Stage::Gist, cost_units };
            }
        }
    }

    // (c) pHash: only ever asserts similarity
    if let (Some(pa), Some(pb)) = (candidate.phash, buffered.phash) {
        cost_units += cost.c_phash;
        if crate::phash::phash_similarity(pa, pb) > thresholds.t_ph {
            return Decision { verdict: Verdict::Similar, stage: Stage::PHash, cost_units };
        }
    }

    // (d) SIFT: final arbiter
    if let Some(&(m, m_ref)) = candidate
        .sift_matches
        .get(&buffered.item_id)
        .or_else(|| buffered.sift_matches.get(&candidate.item_id))
    {
        cost_units += cost.c_sift;
        let verdict = match sift_similarity(m, m_ref) {
            Ok(Some(s)) if s > thresholds.t_sift => Verdict::Similar,
            _ => Verdict::NotSimilar,
        };
        return Decision { verdict, stage: Stage::Sift, cost_units };
    }

    // every stage fell through: conservative non-similarity
    Decision { verdict: Verdict::NotSimilar, stage: Stage::Exhausted, cost_units }
}

/// Compares a candidate against every buffered item. Aggregate verdict is
/// Similar iff any buffered item yields Similar.
pub fn pipeline_decide(
    candidate: &ItemMeta,
    buffered: &[ItemMeta],
    thresholds: Thresholds,
    gates: Gates,
    cost: &CostModel,
) -> (Vec<Decision>, Verdict, f64) {
    let decisions: Vec<Decision> = buffered
        .iter()
        .map(|b| pipeline_decide_pair(candidate, b, thresholds, gates, cost))
        .collect();
    let total_cost = decisions.iter().map(|d| d.cost_units).sum();
    let verdict = if decisions.iter().any(|d| d.verdict == Verdict::Similar) {
        Verdict::Similar
    } else {
        Verdict::NotSimilar
    };
    (decisions, verdict, total_cost)
}

/// Average pipeline cost (N1*c_gist + N2*c_phash + N3*c_sift) / N1 for the
/// GIST, pHash, SIFT stage order.
pub fn pipeline_avg_cost(n1: u64, n2: u64, n3: u64, cost: &CostModel) -> Result<f64> {
    if n1 == 0 {
        return Err(CoreError::Invalid("no comparisons entered the pipeline".into()));
    }
    if n2 > n1 || n3 > n2 {
        return Err(CoreError::Invalid(format!(
            "stage counts must be non-increasing: {n1}, {n2}, {n3}"
        )));
    }
    Ok((n1 as f64 * cost.c_gist + n2 as f64 * cost.c_phash + n3 as f64 * cost.c_sift) / n1 as f64)
}

/// Feature-vector CSV: `item_id,v1,...,vk`.
pub fn read_feature_csv<R: Read>(reader: R) -> Result<BTreeMap<String, FeatureVector>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let mut out = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() < 3 {
            return Err(CoreError::Invalid(format!("feature row too short: {row:?}")));
        }
        let values: Vec<f64> = row
            .iter()
            .skip(1)
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| CoreError::Invalid(format!("bad value `{s}`")))
            })
            .collect::<Result<_>>()?;
        out.insert(row[0].trim().to_string(), FeatureVector::new(values)?);
    }
    Ok(out)
}

/// Pairwise SIFT match CSV: `item_a,item_b,m,m_prime`.
pub fn read_sift_csv<R: Read>(reader: R) -> Result<Vec<(String, String, u32, u32)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() < 4 {
            return Err(CoreError::Invalid(format!("sift row too short: {row:?}")));
        }
        let m: u32 =
            row[2].trim().parse().map_err(|_| CoreError::Invalid(format!("bad m `{}`", &row[2])))?;
        let mp: u32 = row[3]
            .trim()
            .parse()
            .map_err(|_| CoreError::Invalid(format!("bad m_prime `{}`", &row[3])))?;
        out.push((row[0].trim().to_string(), row[1].trim().to_string(), m, mp));
    }
    Ok(out)
}

/// Metadata CSV: `item_id,lat,lon,timestamp`; empty fields stay unset.
pub fn read_metadata_csv<R: Read>(reader: R) -> Result<BTreeMap<String, ItemMeta>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let mut out = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        if row.is_empty() {
            continue;
        }
        let id = row[0].trim().to_string();
        let mut meta = ItemMeta::new(id.clone());
        let get = |i: usize| row.get(i).map(str::trim).filter(|s| !s.is_empty());
        if let (Some(lat), Some(lon)) = (get(1), get(2)) {
            let lat: f64 =
                lat.parse().map_err(|_| CoreError::Invalid(format!("bad lat `{lat}`")))?;
            let lon: f64 =
                lon.parse().map_err(|_| CoreError::Invalid(format!("bad lon `{lon}`")))?;
            meta.geo = Some((lat, lon));
        }
        if let Some(ts) = get(3) {
            meta.timestamp =
                Some(ts.parse().map_err(|_| CoreError::Invalid(format!("bad timestamp `{ts}`")))?);
        }
        out.insert(id, meta);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(id: u64, cluster: u64) -> MessageRecord {
        MessageRecord { msg_id: id, cluster_id: cluster, owner: 0, created_at: 0.0, size: 300_000 }
    }

    #[test]
    fn gist_examples() {
        let v1 = FeatureVector::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((gist_similarity(&v1, &v1).unwrap() - 1.0).abs() < 1e-12);
        let neg = FeatureVector::new(v1.values.iter().map(|x| -x).collect()).unwrap();
        assert!((gist_similarity(&v1, &neg).unwrap() + 1.0).abs() < 1e-12);
        let v2 = FeatureVector::new(vec![1.0, 2.0, 3.0, 5.0]).unwrap();
        assert!((gist_similarity(&v1, &v2).unwrap() - 0.9827).abs() < 1e-4);
        let flat = FeatureVector::new(vec![2.0, 2.0, 2.0]).unwrap();
        assert!(gist_similarity(&v1, &flat).is_err());
    }

    #[test]
    fn sift_examples() {
        assert_eq!(sift_similarity(100, 100).unwrap(), Some(1.0));
        assert_eq!(sift_similarity(8, 8).unwrap(), None);
        assert_eq!(sift_similarity(40, 10).unwrap(), Some(0.25));
        assert!(sift_similarity(5, 6).is_err());
    }

    #[test]
    fn oracle_perfect() {
        let a = msg(1, 7);
        let b = msg(2, 7);
        let c = msg(3, 9);
        assert_eq!(oracle_decide(&a, &b, 0.0, 0.0, 1), OracleVerdict::Similar);
        assert_eq!(oracle_decide(&a, &c, 0.0, 0.0, 1), OracleVerdict::NotSimilar);
    }

    #[test]
    fn oracle_rates_and_replay_stability() {
        let fp = 0.01;
        let fnr = 0.30;
        let seed = 99;
        let n = 100_000u64;
        let mut fp_hits = 0u64;
        let mut fn_hits = 0u64;
        for i in 0..n {
            let a = msg(2 * i, i);
            let sim = msg(2 * i + 1, i); // same cluster
            let dis = msg(2 * i + 1, i + n); // different cluster
            if oracle_decide(&a, &sim, fp, fnr, seed) == OracleVerdict::NotSimilar {
                fn_hits += 1;
            }
            if oracle_decide(&a, &dis, fp, fnr, seed) == OracleVerdict::Similar {
                fp_hits += 1;
            }
        }
        let fp_rate = fp_hits as f64 / n as f64;
        let fn_rate = fn_hits as f64 / n as f64;
        assert!((fp_rate - fp).abs() < 0.005, "fp {fp_rate}");
        assert!((fn_rate - fnr).abs() < 0.005, "fn {fn_rate}");
        // replay stability
        let a = msg(1, 3);
        let b = msg(2, 3);
        let first = oracle_decide(&a, &b, fp, fnr, seed);
        for _ in 0..100 {
            assert_eq!(oracle_decide(&a, &b, fp, fnr, seed), first);
            assert_eq!(oracle_decide(&b, &a, fp, fnr, seed), first);
        }
    }

    fn meta_with(
        id: &str,
        geo: Option<(f64, f64)>,
        gist: Option<Vec<f64>>,
        phash: Option<u64>,
    ) -> ItemMeta {
        let mut m = ItemMeta::new(id);
        m.geo = geo;
        m.gist = gist.map(|v| FeatureVector::new(v).unwrap());
        m.phash = phash.map(|bits| PHash64 { bits });
        m
    }

    fn thresholds() -> Thresholds {
        Thresholds { t_gist: 0.5, t_ph: 60, t_sift: 0.5 }
    }

    #[test]
    fn metadata_gate_short_circuits_at_zero_cost() {
        let cand = meta_with("c", Some((0.0, 0.0)), None, None);
        let buffered = vec![
            meta_with("b1", Some((10_000.0, 0.0)), None, None),
            meta_with("b2", Some((0.0, 10_000.0)), None, None),
        ];
        let gates = Gates { max_distance_m: 100.0, max_age_s: 3600.0 };
        let (decisions, verdict, cost) =
            pipeline_decide(&cand, &buffered, thresholds(), gates, &CostModel::default());
        assert_eq!(verdict, Verdict::NotSimilar);
        assert_eq!(cost, 0.0);
        assert!(decisions.iter().all(|d| d.stage == Stage::MetadataGate));
    }

    #[test]
    fn gist_rejects_all_costs_gist_only() {
        let cand = meta_with("c", None, Some(vec![1.0, 2.0, 3.0, 4.0]), None);
        let buffered: Vec<ItemMeta> = (0..3)
            .map(|i| meta_with(&format!("b{i}"), None, Some(vec![4.0, 3.0, 2.0, 1.0]), None))
            .collect();
        let (_, verdict, cost) = pipeline_decide(
            &cand,
            &buffered,
            thresholds(),
            Gates::default(),
            &CostModel::default(),
        );
        assert_eq!(verdict, Verdict::NotSimilar);
        assert_eq!(cost, 3.0 * 50.0);
    }

    #[test]
    fn phash_fast_path_skips_sift() {
        let mut cand = meta_with("c", None, Some(vec![1.0, 2.0, 3.0, 4.0]), Some(0xffff));
        cand.sift_matches.insert("b0".into(), (100, 100));
        let buffered =
            vec![meta_with("b0", None, Some(vec![1.1, 2.0, 3.1, 4.0]), Some(0xffff))];
        let (decisions, verdict, cost) = pipeline_decide(
            &cand,
            &buffered,
            thresholds(),
            Gates::default(),
            &CostModel::default(),
        );
        assert_eq!(verdict, Verdict::Similar);
        assert_eq!(decisions[0].stage, Stage::PHash);
        assert_eq!(cost, 50.0 + 1.0);
    }

    #[test]
    fn avg_cost_examples() {
        let cm = CostModel::default();
        assert_eq!(pipeline_avg_cost(100, 0, 0, &cm).unwrap(), 50.0);
        assert_eq!(pipeline_avg_cost(100, 100, 100, &cm).unwrap(), 201.0);
        assert!((pipeline_avg_cost(100, 60, 30, &cm).unwrap() - 95.6).abs() < 1e-12);
        assert!(pipeline_avg_cost(0, 0, 0, &cm).is_err());
    }

    #[test]
    fn avg_cost_monotone_in_later_stages() {
        let cm = CostModel::default();
        let base = pipeline_avg_cost(100, 50, 20, &cm).unwrap();
        assert!(pipeline_avg_cost(100, 60, 20, &cm).unwrap() > base);
        assert!(pipeline_avg_cost(100, 50, 30, &cm).unwrap() > base);
    }
}
