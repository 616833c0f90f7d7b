//! Delivery statistics, CARE vs non-RE paired comparison, and the
//! plot-ready CSV writers.

use std::io::Write;

use crate::config::ScenarioConfig;
use crate::error::{CoreError, Result};
use crate::mobility::MapGraph;
use crate::rng::{substream, Stream};
use crate::sim::{build_map, run_sim, Delivery, DetectorKind, DropCounters, RouterKind, RunOutput};
use crate::workload::{generate_schedule, WorkloadSchedule};

/// Distinct clusters with at least one delivery by `up_to_tick` (inclusive).
pub fn unique_delivered(deliveries: &[Delivery], up_to_tick: u64) -> usize {
    let mut clusters: Vec<u64> = deliveries
        .iter()
        .filter(|d| d.tick <= up_to_tick)
        .map(|d| d.cluster_id)
        .collect();
    clusters.sort_unstable();
    clusters.dedup();
    clusters.len()
}

/// 100·(U_CARE − U_nonRE)/U_nonRE; undefined when the baseline is zero.
pub fn improvement(u_care: usize, u_nonre: usize) -> Option<f64> {
    if u_nonre == 0 {
        return None;
    }
    Some(100.0 * (u_care as f64 - u_nonre as f64) / u_nonre as f64)
}

/// Empirical CDF points over delivered-message latencies, plus the median
/// (mid-pair mean for even counts).
pub fn latency_cdf(deliveries: &[Delivery]) -> Result<(Vec<(f64, f64)>, f64)> {
    if deliveries.is_empty() {
        return Err(CoreError::Invalid("latency CDF of an empty delivery log".into()));
    }
    let mut lats: Vec<f64> = deliveries.iter().map(|d| d.latency).collect();
    lats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = lats.len();
    let median = if n % 2 == 1 {
        lats[n / 2]
    } else {
        (lats[n / 2 - 1] + lats[n / 2]) / 2.0
    };
    let mut points = Vec::new();
    let mut i = 0;
    while i < n {
        let v = lats[i];
        let mut j = i;
        while j < n && lats[j] == v {
            j += 1;
        }
        points.push((v, j as f64 / n as f64));
        i = j;
    }
    Ok((points, median))
}

/// First-delivery-per-cluster latencies: the unique-information view.
pub fn unique_latencies(deliveries: &[Delivery]) -> Vec<Delivery> {
    let mut sorted: Vec<&Delivery> = deliveries.iter().collect();
    sorted.sort_by_key(|d| (d.tick, d.msg_id));
    let mut seen = std::collections::BTreeSet::new();
    sorted.into_iter().filter(|d| seen.insert(d.cluster_id)).copied().collect()
}

#[derive(Debug, Clone)]
pub struct PairedOutcome {
    pub care: RunOutput,
    pub nonre: RunOutput,
    pub u_care: usize,
    pub u_nonre: usize,
    pub improvement: Option<f64>,
    pub schedule: WorkloadSchedule,
}

impl PairedOutcome {
    pub fn drops(&self) -> (DropCounters, DropCounters) {
        (self.care.drops, self.nonre.drops)
    }
}

/// Runs CARE and plain epidemic on the identical workload and mobility
/// draws; only the admission policy differs.
pub fn paired_run(cfg: &ScenarioConfig, detector: DetectorKind) -> Result<PairedOutcome> {
    let map = build_map(cfg)?;
    paired_run_on(cfg, &map, detector)
}

pub fn paired_run_on(
    cfg: &ScenarioConfig,
    map: &MapGraph,
    detector: DetectorKind,
) -> Result<PairedOutcome> {
    let mut wrng = substream(cfg.rng_seed, Stream::Workload);
    let schedule = generate_schedule(cfg, &mut wrng)?;
    let care = run_sim(cfg, map, &schedule, RouterKind::Care(detector))?;
    let nonre = run_sim(cfg, map, &schedule, RouterKind::Epidemic)?;
    let horizon = u64::MAX;
    let u_care = unique_delivered(&care.deliveries, horizon);
    let u_nonre = unique_delivered(&nonre.deliveries, horizon);
    Ok(PairedOutcome {
        improvement: improvement(u_care, u_nonre),
        u_care,
        u_nonre,
        care,
        nonre,
        schedule,
    })
}

/// unique_over_time.csv: tick,count,router (one row per delivery step).
pub fn write_unique_over_time_csv<W: Write>(w: W, outcome: &PairedOutcome) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["tick", "count", "router"])?;
    for run in [&outcome.care, &outcome.nonre] {
        let mut seen = std::collections::BTreeSet::new();
        let mut count = 0usize;
        let mut sorted = run.deliveries.clone();
        sorted.sort_by_key(|d| (d.tick, d.msg_id));
        for d in &sorted {
            if seen.insert(d.cluster_id) {
                count += 1;
                wtr.write_record([
                    d.tick.to_string(),
                    count.to_string(),
                    run.router.label().to_string(),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// latency_cdf.csv: latency,fraction,router.
pub fn write_latency_cdf_csv<W: Write>(w: W, outcome: &PairedOutcome) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["latency", "fraction", "router"])?;
    for run in [&outcome.care, &outcome.nonre] {
        if run.deliveries.is_empty() {
            continue;
        }
        let (points, _) = latency_cdf(&run.deliveries)?;
        for (lat, frac) in points {
            wtr.write_record([
                lat.to_string(),
                frac.to_string(),
                run.router.label().to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// summary.csv row: seed, R_sim, pr_disaster, U_care, U_nonre, improvement,
/// drops_care, drops_nonre. `append` skips the header.
pub fn write_summary_csv<W: Write>(
    w: W,
    cfg: &ScenarioConfig,
    outcome: &PairedOutcome,
    append: bool,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    if !append {
        wtr.write_record([
            "seed",
            "r_sim",
            "pr_disaster",
            "u_care",
            "u_nonre",
            "improvement",
            "drops_care",
            "drops_nonre",
        ])?;
    }
    wtr.write_record([
        cfg.rng_seed.to_string(),
        cfg.target_redundancy_rsim.to_string(),
        cfg.pr_disaster.to_string(),
        outcome.u_care.to_string(),
        outcome.u_nonre.to_string(),
        outcome.improvement.map_or_else(|| "undefined".to_string(), |v| v.to_string()),
        outcome.care.drops.capacity.to_string(),
        outcome.nonre.drops.capacity.to_string(),
    ])?;
    wtr.flush()?;
    Ok(())
}
