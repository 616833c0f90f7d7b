//! Message-schedule generation with a controlled redundancy fraction and
//! temporal locality of the redundant copies.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::config::{MessageRecord, OwnerMode, ScenarioConfig};
use crate::error::{CoreError, Result};

/// Half-width of the window a redundant copy's time is redrawn in,
/// centered on its seed message's time.
pub const LOCALITY_WINDOW_S: f64 = 20.0;

#[derive(Debug, Clone)]
pub struct WorkloadSchedule {
    /// Time-sorted; `created_at` is the generation time.
    pub entries: Vec<MessageRecord>,
    pub realized_redundancy: f64,
}

/// 1 − (#distinct cluster ids) / (#entries); 0.0 for an empty schedule.
pub fn realized_redundancy(entries: &[MessageRecord]) -> f64 {
    if entries.is_empty() {
        return 0.0;
    }
    let mut clusters: Vec<u64> = entries.iter().map(|m| m.cluster_id).collect();
    clusters.sort_unstable();
    clusters.dedup();
    1.0 - clusters.len() as f64 / entries.len() as f64
}

/// Builds the schedule: one message every G seconds at a uniform-random
/// person, then round(R_sim·N) entries converted into redundant copies of
/// uniform-random seed entries, redrawn within ±20 s of the seed and
/// reassigned to a uniform-random person.
pub fn generate_schedule<R: Rng>(cfg: &ScenarioConfig, rng: &mut R) -> Result<WorkloadSchedule> {
    let n = cfg.message_count() as usize;
    if n == 0 {
        return Err(CoreError::Invalid("duration_t / gen_interval_g yields no messages".into()));
    }
    if cfg.n_people == 0 {
        return Err(CoreError::Invalid("n_people must be positive".into()));
    }
    let n_redundant = (cfg.target_redundancy_rsim * n as f64).round() as usize;
    if n_redundant >= n {
        return Err(CoreError::Invalid(format!(
            "target_redundancy_rsim {} leaves no seed messages for n = {n}",
            cfg.target_redundancy_rsim
        )));
    }

    // first pass: unique messages on the G-second cadence
    let mut entries: Vec<MessageRecord> = (0..n as u64)
        .map(|k| MessageRecord {
            msg_id: k,
            cluster_id: k,
            owner: rng.gen_range(0..cfg.n_people),
            created_at: k as f64 * cfg.gen_interval_g,
            size: cfg.message_size,
        })
        .collect();

    // second pass: convert a random subset into redundant copies
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let converted = &order[..n_redundant];
    let mut is_seed = vec![true; n];
    for &i in converted {
        is_seed[i] = false;
    }
    let seeds: Vec<usize> = (0..n).filter(|&i| is_seed[i]).collect();
    for &i in converted {
        let seed_idx = seeds[rng.gen_range(0..seeds.len())];
        let seed_time = seed_idx as f64 * cfg.gen_interval_g;
        entries[i].cluster_id = entries[seed_idx].cluster_id;
        entries[i].owner = match cfg.owner_mode {
            OwnerMode::Random => rng.gen_range(0..cfg.n_people),
            OwnerMode::SameAsSeed => entries[seed_idx].owner,
        };
        entries[i].created_at = rng
            .gen_range(seed_time - LOCALITY_WINDOW_S..=seed_time + LOCALITY_WINDOW_S)
            .clamp(0.0, cfg.duration_t);
    }

    entries.sort_by(|a, b| {
        a.created_at.partial_cmp(&b.created_at).unwrap().then(a.msg_id.cmp(&b.msg_id))
    });
    let realized = realized_redundancy(&entries);
    debug_assert!((realized - cfg.target_redundancy_rsim).abs() <= 1.0 / n as f64 + 1e-12);
    Ok(WorkloadSchedule { entries, realized_redundancy: realized })
}

/// CSV export: time,owner,msg_id,cluster_id,size.
pub fn write_schedule_csv<W: Write>(w: W, schedule: &WorkloadSchedule) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["time", "owner", "msg_id", "cluster_id", "size"])?;
    for m in &schedule.entries {
        wtr.write_record([
            m.created_at.to_string(),
            m.owner.to_string(),
            m.msg_id.to_string(),
            m.cluster_id.to_string(),
            m.size.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_schedule_csv<R: Read>(r: R) -> Result<WorkloadSchedule> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() < 5 {
            return Err(CoreError::Invalid(format!("short schedule row: {rec:?}")));
        }
        let field = |i: usize| rec.get(i).unwrap().trim();
        entries.push(MessageRecord {
            created_at: field(0)
                .parse()
                .map_err(|_| CoreError::Invalid(format!("bad time `{}`", field(0))))?,
            owner: field(1)
                .parse()
                .map_err(|_| CoreError::Invalid(format!("bad owner `{}`", field(1))))?,
            msg_id: field(2)
                .parse()
                .map_err(|_| CoreError::Invalid(format!("bad msg_id `{}`", field(2))))?,
            cluster_id: field(3)
                .parse()
                .map_err(|_| CoreError::Invalid(format!("bad cluster_id `{}`", field(3))))?,
            size: field(4)
                .parse()
                .map_err(|_| CoreError::Invalid(format!("bad size `{}`", field(4))))?,
        });
    }
    entries.sort_by(|a, b| {
        a.created_at.partial_cmp(&b.created_at).unwrap().then(a.msg_id.cmp(&b.msg_id))
    });
    let realized = realized_redundancy(&entries);
    Ok(WorkloadSchedule { entries, realized_redundancy: realized })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    fn cfg_with(n: usize, r: f64) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.gen_interval_g = 30.0;
        cfg.duration_t = n as f64 * 30.0;
        cfg.target_redundancy_rsim = r;
        cfg
    }

    #[test]
    fn zero_redundancy_all_singletons() {
        let cfg = cfg_with(100, 0.0);
        let mut rng = substream(1, Stream::Workload);
        let s = generate_schedule(&cfg, &mut rng).unwrap();
        assert_eq!(s.entries.len(), 100);
        assert_eq!(s.realized_redundancy, 0.0);
        let mut ids: Vec<u64> = s.entries.iter().map(|m| m.cluster_id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 100);
    }

    #[test]
    fn ten_entries_r03_gives_seven_clusters() {
        let cfg = cfg_with(10, 0.3);
        let mut rng = substream(2, Stream::Workload);
        let s = generate_schedule(&cfg, &mut rng).unwrap();
        assert_eq!(s.entries.len(), 10);
        let mut clusters: Vec<u64> = s.entries.iter().map(|m| m.cluster_id).collect();
        clusters.sort_unstable();
        clusters.dedup();
        assert_eq!(clusters.len(), 7);
        assert!((s.realized_redundancy - 0.3).abs() < 1e-12);
    }

    #[test]
    fn redundant_copies_stay_near_their_seed() {
        let cfg = cfg_with(600, 0.4);
        let mut rng = substream(3, Stream::Workload);
        let s = generate_schedule(&cfg, &mut rng).unwrap();
        // seed of each cluster = the member whose msg_id "owns" the
        // cluster id (first pass sets cluster_id = msg_id)
        for m in &s.entries {
            if m.msg_id == m.cluster_id {
                continue;
            }
            let seed_time = m.cluster_id as f64 * cfg.gen_interval_g;
            let lo = (seed_time - LOCALITY_WINDOW_S).max(0.0);
            let hi = (seed_time + LOCALITY_WINDOW_S).min(cfg.duration_t);
            assert!(
                m.created_at >= lo && m.created_at <= hi,
                "copy {} at {} outside [{lo}, {hi}]",
                m.msg_id,
                m.created_at
            );
        }
    }

    #[test]
    fn realized_within_one_over_n() {
        for (n, r) in [(600, 0.2), (600, 0.3), (600, 0.6), (97, 0.45)] {
            let cfg = cfg_with(n, r);
            let mut rng = substream(n as u64, Stream::Workload);
            let s = generate_schedule(&cfg, &mut rng).unwrap();
            assert!(
                (s.realized_redundancy - r).abs() <= 1.0 / n as f64 + 1e-12,
                "n={n} r={r} realized={}",
                s.realized_redundancy
            );
        }
    }

    #[test]
    fn no_seeds_left_is_an_error() {
        let cfg = cfg_with(10, 0.99);
        let mut rng = substream(4, Stream::Workload);
        assert!(generate_schedule(&cfg, &mut rng).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = cfg_with(200, 0.3);
        let a = generate_schedule(&cfg, &mut substream(9, Stream::Workload)).unwrap();
        let b = generate_schedule(&cfg, &mut substream(9, Stream::Workload)).unwrap();
        assert_eq!(a.entries, b.entries);
        let c = generate_schedule(&cfg, &mut substream(10, Stream::Workload)).unwrap();
        assert_ne!(a.entries, c.entries);
    }

    #[test]
    fn csv_round_trip() {
        let cfg = cfg_with(50, 0.3);
        let s = generate_schedule(&cfg, &mut substream(5, Stream::Workload)).unwrap();
        let mut buf = Vec::new();
        write_schedule_csv(&mut buf, &s).unwrap();
        let back = read_schedule_csv(&buf[..]).unwrap();
        assert_eq!(back.entries, s.entries);
        assert_eq!(back.realized_redundancy, s.realized_redundancy);
    }

    #[test]
    fn matches_set_cover_redundancy() {
        use crate::redundancy::{maximal_similar_sets, min_set_cover, SimilarityGraph};
        let cfg = cfg_with(20, 0.4);
        let s = generate_schedule(&cfg, &mut substream(7, Stream::Workload)).unwrap();
        let items: Vec<String> = s.entries.iter().map(|m| format!("m{:03}", m.msg_id)).collect();
        let mut graph = SimilarityGraph::new(items.clone());
        for (i, a) in s.entries.iter().enumerate() {
            for b in s.entries.iter().skip(i + 1) {
                if a.cluster_id == b.cluster_id {
                    let ia = graph.index_of(&format!("m{:03}", a.msg_id)).unwrap();
                    let ib = graph.index_of(&format!("m{:03}", b.msg_id)).unwrap();
                    graph.add_edge_by_index(ia, ib);
                }
            }
        }
        let sets = maximal_similar_sets(&graph);
        let cover = min_set_cover(&sets, graph.items());
        assert!((cover.redundancy - s.realized_redundancy).abs() < 1e-12);
    }
}
