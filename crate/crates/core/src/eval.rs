//! Confusion rates, ROC sweeps, threshold calibration, and pipeline-vs-
//! singleton comparison reports against ground-truth labels.

use crate::detectors::CostModel;
use crate::error::{CoreError, Result};

/// A scored pair with its ground-truth label.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub item_a: String,
    pub item_b: String,
    pub score: f64,
    pub similar: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfusionRates {
    /// Similar verdicts among truly-dissimilar pairs; None when no
    /// dissimilar pairs exist (undefined, not zero).
    pub fp_rate: Option<f64>,
    /// NotSimilar verdicts among truly-similar pairs; None when no similar
    /// pairs exist.
    pub fn_rate: Option<f64>,
}

/// `flagged[i]` is the detector's Similar verdict for pair i, `labels[i]`
/// the ground truth.
pub fn confusion_rates(flagged: &[bool], labels: &[bool]) -> Result<ConfusionRates> {
    if flagged.len() != labels.len() {
        return Err(CoreError::Invalid(format!(
            "verdicts ({}) do not cover labels ({})",
            flagged.len(),
            labels.len()
        )));
    }
    let mut sim = 0u64;
    let mut dis = 0u64;
    let mut fp = 0u64;
    let mut fnc = 0u64;
    for (&f, &l) in flagged.iter().zip(labels) {
        if l {
            sim += 1;
            if !f {
                fnc += 1;
            }
        } else {
            dis += 1;
            if f {
                fp += 1;
            }
        }
    }
    Ok(ConfusionRates {
        fp_rate: (dis > 0).then(|| fp as f64 / dis as f64),
        fn_rate: (sim > 0).then(|| fnc as f64 / sim as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fp_rate: f64,
    pub tp_rate: f64,
}

/// Points sorted by threshold; verdict is Similar iff score > threshold
/// (higher score means more similar).
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    /// Trapezoidal area under the (fp, tp) curve.
    pub fn auc(&self) -> f64 {
        let mut pts: Vec<(f64, f64)> =
            self.points.iter().map(|p| (p.fp_rate, p.tp_rate)).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut area = 0.0;
        for w in pts.windows(2) {
            area += (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0;
        }
        area
    }
}

/// Sweeps thresholds at every distinct score plus the two infinite
/// sentinels.
pub fn roc_sweep(pairs: &[ScoredPair]) -> Result<RocCurve> {
    let n_sim = pairs.iter().filter(|p| p.similar).count() as f64;
    let n_dis = pairs.len() as f64 - n_sim;
    if n_sim == 0.0 || n_dis == 0.0 {
        return Err(CoreError::Invalid(
            "roc_sweep needs at least one similar and one dissimilar pair".into(),
        ));
    }
    let mut thresholds: Vec<f64> = pairs.iter().map(|p| p.score).collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();
    thresholds.insert(0, f64::NEG_INFINITY);
    thresholds.push(f64::INFINITY);

    // one pass per curve via sorted scores and suffix counts
    let mut scored: Vec<(f64, bool)> = pairs.iter().map(|p| (p.score, p.similar)).collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let points = thresholds
        .into_iter()
        .map(|t| {
            let idx = scored.partition_point(|&(s, _)| s <= t);
            let tp = scored[idx..].iter().filter(|&&(_, l)| l).count() as f64;
            let fp = (scored.len() - idx) as f64 - tp;
            RocPoint { threshold: t, fp_rate: fp / n_dis, tp_rate: tp / n_sim }
        })
        .collect();
    Ok(RocCurve { points })
}

/// Calibration target: cap one error rate, optimize the other.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CalibrationTarget {
    /// fp_rate <= x, maximizing tp (loosest threshold).
    MaxFp(f64),
    /// fn_rate <= x, minimizing fp.
    MaxFn(f64),
}

/// Picks a threshold meeting the target on the calibration set. Errors carry
/// the best achievable rate when the target cannot be met.
pub fn calibrate_threshold(pairs: &[ScoredPair], target: CalibrationTarget) -> Result<f64> {
    let curve = roc_sweep(pairs)?;
    match target {
        CalibrationTarget::MaxFp(x) => {
            // thresholds ascend; fp_rate descends: first feasible = loosest
            let feasible = curve.points.iter().find(|p| p.fp_rate <= x);
            match feasible {
                Some(p) => Ok(p.threshold),
                None => {
                    let best =
                        curve.points.iter().map(|p| p.fp_rate).fold(f64::INFINITY, f64::min);
                    Err(CoreError::Invalid(format!(
                        "fp target {x} unattainable; best achievable {best}"
                    )))
                }
            }
        }
        CalibrationTarget::MaxFn(x) => {
            let feasible: Vec<&RocPoint> =
                curve.points.iter().filter(|p| 1.0 - p.tp_rate <= x).collect();
            if feasible.is_empty() {
                let best = curve
                    .points
                    .iter()
                    .map(|p| 1.0 - p.tp_rate)
                    .fold(f64::INFINITY, f64::min);
                return Err(CoreError::Invalid(format!(
                    "fn target {x} unattainable; best achievable {best}"
                )));
            }
            let min_fp =
                feasible.iter().map(|p| p.fp_rate).fold(f64::INFINITY, f64::min);
            // deterministic tie-break toward the lower threshold
            let pick = feasible.iter().find(|p| p.fp_rate == min_fp).unwrap();
            Ok(pick.threshold)
        }
    }
}

/// Per-pair inputs for the three methods; any score may be missing.
#[derive(Debug, Clone, Default)]
pub struct MethodScores {
    pub item_a: String,
    pub item_b: String,
    pub similar: bool,
    pub gist: Option<f64>,
    pub phash_similarity: Option<u32>,
    pub sift: Option<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub fp_rate: Option<f64>,
    pub fn_rate: Option<f64>,
    pub normalized_cost: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub rows: Vec<ReportRow>,
    /// Comparisons entering each pipeline stage (executed, not skipped).
    pub stage_counts: (u64, u64, u64),
    /// Pair universe the report was computed over.
    pub pair_universe: usize,
}

/// Pipeline verdict for one pair given stage thresholds; also reports which
/// stages executed (gist, phash, sift).
fn pipeline_pair_verdict(
    p: &MethodScores,
    t_gist: f64,
    t_ph: u32,
    t_sift: f64,
) -> (bool, [bool; 3]) {
    let mut executed = [false; 3];
    if let Some(g) = p.gist {
        executed[0] = true;
        if g < t_gist {
            return (false, executed);
        }
    }
    if let Some(s) = p.phash_similarity {
        executed[1] = true;
        if s > t_ph {
            return (true, executed);
        }
    }
    if let Some((m, mp)) = p.sift {
        executed[2] = true;
        let similar = m > 8 && mp as f64 / m as f64 > t_sift;
        return (similar, executed);
    }
    (false, executed)
}

/// Table rows for the three singleton methods and the staged pipeline.
pub fn pipeline_report(
    pairs: &[MethodScores],
    t_gist: f64,
    t_ph: u32,
    t_sift: f64,
    cost: &CostModel,
) -> Result<PipelineReport> {
    if pairs.is_empty() {
        return Err(CoreError::Invalid("pipeline_report needs at least one pair".into()));
    }
    let labels: Vec<bool> = pairs.iter().map(|p| p.similar).collect();

    let gist_verdicts: Vec<bool> =
        pairs.iter().map(|p| p.gist.map(|g| g > t_gist).unwrap_or(false)).collect();
    let phash_verdicts: Vec<bool> = pairs
        .iter()
        .map(|p| p.phash_similarity.map(|s| s > t_ph).unwrap_or(false))
        .collect();
    let sift_verdicts: Vec<bool> = pairs
        .iter()
        .map(|p| {
            p.sift
                .map(|(m, mp)| m > 8 && mp as f64 / m as f64 > t_sift)
                .unwrap_or(false)
        })
        .collect();

    let mut n_exec = [0u64; 3];
    let pipeline_verdicts: Vec<bool> = pairs
        .iter()
        .map(|p| {
            let (v, executed) = pipeline_pair_verdict(p, t_gist, t_ph, t_sift);
            for (n, e) in n_exec.iter_mut().zip(executed) {
                *n += e as u64;
            }
            v
        })
        .collect();

    let n1 = pairs.len() as f64;
    let pipeline_cost = (n_exec[0] as f64 * cost.c_gist
        + n_exec[1] as f64 * cost.c_phash
        + n_exec[2] as f64 * cost.c_sift)
        / n1;

    let row = |method: &str, verdicts: &[bool], c: f64| -> Result<ReportRow> {
        let rates = confusion_rates(verdicts, &labels)?;
        Ok(ReportRow {
            method: method.to_string(),
            fp_rate: rates.fp_rate,
            fn_rate: rates.fn_rate,
            normalized_cost: c,
        })
    };
    let rows = vec![
        row("phash", &phash_verdicts, cost.c_phash)?,
        row("gist", &gist_verdicts, cost.c_gist)?,
        row("sift", &sift_verdicts, cost.c_sift)?,
        row("pipeline", &pipeline_verdicts, pipeline_cost)?,
    ];
    Ok(PipelineReport {
        rows,
        stage_counts: (n_exec[0], n_exec[1], n_exec[2]),
        pair_universe: pairs.len(),
    })
}
