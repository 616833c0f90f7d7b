//! Deterministic time-stepped DTN engine: disaster-area mobility, contact
//! detection, bandwidth-limited epidemic exchange, and the CARE admission
//! policy on top of it.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::Rng;

use crate::config::{MessageRecord, ScenarioConfig};
use crate::detectors::{oracle_decide, OracleVerdict};
use crate::error::{CoreError, Result};
use crate::mobility::{
    contacts_now, generate_grid_map, pedestrian_tick, vehicle_tick, MapGraph, MobilityState,
};
use crate::rng::{substream, Stream};
use crate::routing::{admit_care, admit_epidemic, Admission, NodeBuffer};
use crate::workload::WorkloadSchedule;

/// Pair detector driving CARE admission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectorKind {
    /// Ground-truth cluster comparison perturbed by FP/FN rates; verdicts
    /// are replay-stable per (seed, pair).
    Oracle { fp: f64, fnr: f64 },
    /// Degenerate detector; makes CARE behave exactly like plain epidemic.
    AlwaysNotSimilar,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RouterKind {
    Epidemic,
    Care(DetectorKind),
}

impl RouterKind {
    pub fn label(&self) -> &'static str {
        match self {
            RouterKind::Epidemic => "nonre",
            RouterKind::Care(_) => "care",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Gen,
    Send,
    Deliver,
    DropCapacity,
    RejectDup,
    RejectRedundant,
    RejectFp,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Gen => "gen",
            EventKind::Send => "send",
            EventKind::Deliver => "deliver",
            EventKind::DropCapacity => "drop_capacity",
            EventKind::RejectDup => "reject_dup",
            EventKind::RejectRedundant => "reject_redundant",
            EventKind::RejectFp => "reject_fp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRow {
    pub tick: u64,
    pub event: EventKind,
    pub node: usize,
    pub msg_id: u64,
    pub cluster_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delivery {
    pub tick: u64,
    pub msg_id: u64,
    pub cluster_id: u64,
    /// Delivery time minus creation time, seconds.
    pub latency: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DropCounters {
    pub capacity: u64,
    pub duplicate: u64,
    pub redundant: u64,
    pub false_positive: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub router: RouterKind,
    pub events: Vec<EventRow>,
    pub deliveries: Vec<Delivery>,
    pub drops: DropCounters,
    /// Fraction of ticks the vehicle spent inside the disaster region.
    pub disaster_time_fraction: f64,
    pub total_generated: usize,
    /// Messages still buffered network-wide when the run ended.
    pub final_buffered: usize,
}

/// Loads the configured map file or generates the default grid with a
/// corridor out to the gateway.
pub fn build_map(cfg: &ScenarioConfig) -> Result<MapGraph> {
    let map = if !cfg.map_file.is_empty() {
        let file = std::fs::File::open(&cfg.map_file)?;
        MapGraph::read_from(file)?
    } else {
        let [x0, y0, x1, y1] = cfg.disaster_region;
        if x0 != 0.0 || y0 != 0.0 {
            return Err(CoreError::Invalid(
                "generated maps require the disaster region anchored at (0,0)".into(),
            ));
        }
        generate_grid_map(x1, y1, cfg.grid_spacing_m, Some(cfg.gateway_position))?
    };
    if !map.is_connected() {
        return Err(CoreError::Invalid("map graph is disconnected".into()));
    }
    Ok(map)
}

/// One directed in-flight transfer plus the ids already offered on this
/// contact (rejected offers are not re-sent while the contact lasts).
struct LinkState {
    in_flight: Option<(MessageRecord, f64)>, // (message, bytes_sent)
    offered: BTreeSet<u64>,
    /// Buffer versions (src, dst) when the last candidate scan came up
    /// empty; the scan is skipped until either buffer changes.
    idle_at: Option<(u64, u64)>,
}

impl LinkState {
    fn new() -> Self {
        LinkState { in_flight: None, offered: BTreeSet::new(), idle_at: None }
    }
}

/// Runs one simulation. The schedule is produced by the caller so CARE and
/// non-RE runs can share it verbatim; mobility draws come from a dedicated
/// sub-stream so the router choice cannot perturb trajectories.
pub fn run_sim(
    cfg: &ScenarioConfig,
    map: &MapGraph,
    schedule: &WorkloadSchedule,
    router: RouterKind,
) -> Result<RunOutput> {
    let specs = cfg.node_specs()?;
    let n_nodes = specs.len();
    let gateway = cfg.gateway_id();
    let vehicle = cfg.vehicle_id();
    let region = map.vertices_in_rect(cfg.disaster_region);
    if region.is_empty() {
        return Err(CoreError::Invalid("disaster region contains no map vertices".into()));
    }
    let gateway_vertex = map.nearest_vertex(cfg.gateway_position[0], cfg.gateway_position[1]);
    let dt = cfg.dt;
    if dt <= 0.0 {
        return Err(CoreError::Invalid("dt must be positive".into()));
    }

    let mut mob_rng = substream(cfg.rng_seed, Stream::Mobility);
    let detector_seed = crate::rng::mix64(cfg.rng_seed ^ Stream::Detector.tag());

    // initial placement: people scattered over region vertices with
    // staggered pause timers; the vehicle starts at the gateway
    let mut mobility: Vec<MobilityState> = Vec::with_capacity(n_nodes);
    for id in 0..cfg.n_people {
        let v = region[mob_rng.gen_range(0..region.len())];
        let pause = mob_rng.gen_range(0.0..=cfg.pedestrian_pause);
        mobility.push(MobilityState::at_vertex(id, v, pause));
    }
    mobility.push(MobilityState::at_vertex(vehicle, gateway_vertex, 0.0));
    mobility.push(MobilityState::at_vertex(gateway, gateway_vertex, f64::INFINITY));

    let mut buffers: Vec<NodeBuffer> =
        specs.iter().map(|s| NodeBuffer::new(s.buffer_capacity)).collect();

    // Metadata gate: redundant copies are planted within window_w of their
    // seed, so true pairs are never more than 2*window_w apart in creation
    // time. Pairs outside the gate are NotSimilar without consulting the
    // detector, which keeps false positives confined to temporally local
    // candidates instead of the whole buffer.
    let gate_s = 2.0 * cfg.window_w;
    let similar = move |a: &MessageRecord, b: &MessageRecord| -> bool {
        match router {
            RouterKind::Epidemic | RouterKind::Care(DetectorKind::AlwaysNotSimilar) => false,
            RouterKind::Care(DetectorKind::Oracle { fp, fnr }) => {
                (a.created_at - b.created_at).abs() <= gate_s
                    && oracle_decide(a, b, fp, fnr, detector_seed) == OracleVerdict::Similar
            }
        }
    };

    let mut events: Vec<EventRow> = Vec::new();
    let mut deliveries: Vec<Delivery> = Vec::new();
    let mut delivered_ids: BTreeSet<u64> = BTreeSet::new();
    let mut drops = DropCounters::default();
    let mut links: BTreeMap<(usize, usize), LinkState> = BTreeMap::new();
    let mut contacts: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut next_entry = 0usize;
    let mut vehicle_in_region_ticks = 0u64;

    let n_ticks = (cfg.duration_t / dt).ceil() as u64;
    let created_at: BTreeMap<u64, f64> =
        schedule.entries.iter().map(|m| (m.msg_id, m.created_at)).collect();

    for tick in 0..=n_ticks {
        let now = tick as f64 * dt;

        // 1. mobility, in node-id order
        for id in 0..cfg.n_people {
            pedestrian_tick(&mut mobility[id], map, &region, cfg, &mut mob_rng, dt);
        }
        vehicle_tick(
            &mut mobility[vehicle],
            map,
            &region,
            gateway_vertex,
            cfg,
            &mut mob_rng,
            dt,
        );
        let positions: Vec<(f64, f64)> = mobility.iter().map(|m| m.position(map)).collect();
        if cfg.in_disaster_region(positions[vehicle].0, positions[vehicle].1) {
            vehicle_in_region_ticks += 1;
        }

        // 2. contact transitions; ended contacts abort both directions
        let now_contacts = contacts_now(&positions, &specs);
        for &(a, b) in contacts.difference(&now_contacts) {
            links.remove(&(a, b));
            links.remove(&(b, a));
        }
        for &(a, b) in now_contacts.difference(&contacts) {
            links.insert((a, b), LinkState::new());
            links.insert((b, a), LinkState::new());
        }
        contacts = now_contacts;

        // 3. message generation at the owner
        while next_entry < schedule.entries.len()
            && schedule.entries[next_entry].created_at <= now
        {
            let msg = schedule.entries[next_entry].clone();
            next_entry += 1;
            events.push(EventRow {
                tick,
                event: EventKind::Gen,
                node: msg.owner,
                msg_id: msg.msg_id,
                cluster_id: msg.cluster_id,
            });
            let owner = msg.owner;
            let outcome = admit_at(
                &mut buffers[owner],
                msg,
                owner == gateway,
                router,
                &similar,
            );
            record_admission(
                tick,
                owner,
                outcome,
                &mut events,
                &mut drops,
                &mut deliveries,
                &mut delivered_ids,
                owner == gateway,
                now,
                &created_at,
            );
        }

        // 4. transfers: per directed link, serialized messages against a
        //    per-tick byte budget
        let pairs: Vec<(usize, usize)> = contacts.iter().copied().collect();
        for (a, b) in pairs {
            for (src, dst) in [(a, b), (b, a)] {
                let rate = specs[src].link_rate.min(specs[dst].link_rate);
                let mut budget = rate * dt / 8.0;
                loop {
                    let link = links.get_mut(&(src, dst)).expect("live contact has a link");
                    if link.in_flight.is_none() {
                        let versions = (buffers[src].version(), buffers[dst].version());
                        if link.idle_at == Some(versions) {
                            break; // nothing new since the last empty scan
                        }
                        // oldest buffered message the peer lacks and that
                        // was not yet offered on this contact
                        let next = buffers[src]
                            .iter()
                            .find(|m| {
                                !buffers[dst].contains(m.msg_id)
                                    && !link.offered.contains(&m.msg_id)
                            })
                            .cloned();
                        match next {
                            Some(m) => {
                                link.offered.insert(m.msg_id);
                                events.push(EventRow {
                                    tick,
                                    event: EventKind::Send,
                                    node: src,
                                    msg_id: m.msg_id,
                                    cluster_id: m.cluster_id,
                                });
                                link.in_flight = Some((m, 0.0));
                            }
                            None => {
                                link.idle_at = Some(versions);
                                break;
                            }
                        }
                    }
                    if budget <= 0.0 {
                        break;
                    }
                    let (msg, sent) = link.in_flight.as_mut().unwrap();
                    let need = msg.size as f64 - *sent;
                    let take = need.min(budget);
                    *sent += take;
                    budget -= take;
                    if *sent + 1e-9 < msg.size as f64 {
                        break; // budget exhausted mid-message
                    }
                    let (msg, _) = link.in_flight.take().unwrap();
                    let outcome =
                        admit_at(&mut buffers[dst], msg, dst == gateway, router, &similar);
                    record_admission(
                        tick,
                        dst,
                        outcome,
                        &mut events,
                        &mut drops,
                        &mut deliveries,
                        &mut delivered_ids,
                        dst == gateway,
                        now,
                        &created_at,
                    );
                }
            }
        }
    }

    let final_buffered = buffers.iter().map(|b| b.len()).sum();
    Ok(RunOutput {
        router,
        events,
        deliveries,
        drops,
        disaster_time_fraction: vehicle_in_region_ticks as f64 / (n_ticks + 1) as f64,
        total_generated: schedule.entries.len(),
        final_buffered,
    })
}

/// Admission dispatch: the gateway always runs plain epidemic admission
/// (delivery point), other nodes follow the configured router.
fn admit_at(
    buffer: &mut NodeBuffer,
    msg: MessageRecord,
    is_gateway: bool,
    router: RouterKind,
    similar: &impl Fn(&MessageRecord, &MessageRecord) -> bool,
) -> (u64, u64, Admission) {
    let (id, cluster) = (msg.msg_id, msg.cluster_id);
    let adm = if is_gateway {
        admit_epidemic(buffer, msg)
    } else {
        match router {
            RouterKind::Epidemic => admit_epidemic(buffer, msg),
            RouterKind::Care(_) => admit_care(buffer, msg, similar),
        }
    };
    (id, cluster, adm)
}

#[allow(clippy::too_many_arguments)]
fn record_admission(
    tick: u64,
    node: usize,
    (msg_id, cluster_id, adm): (u64, u64, Admission),
    events: &mut Vec<EventRow>,
    drops: &mut DropCounters,
    deliveries: &mut Vec<Delivery>,
    delivered_ids: &mut BTreeSet<u64>,
    is_gateway: bool,
    now: f64,
    created_at: &BTreeMap<u64, f64>,
) {
    let mut push = |event, m, c| events.push(EventRow { tick, event, node, msg_id: m, cluster_id: c });
    match adm {
        Admission::Accepted | Admission::AcceptedWithDrops(_) => {
            if let Admission::AcceptedWithDrops(ref dropped) = adm {
                for d in dropped {
                    drops.capacity += 1;
                    push(EventKind::DropCapacity, d.msg_id, d.cluster_id);
                }
            }
            if is_gateway && delivered_ids.insert(msg_id) {
                push(EventKind::Deliver, msg_id, cluster_id);
                let latency = now - created_at.get(&msg_id).copied().unwrap_or(now);
                deliveries.push(Delivery { tick, msg_id, cluster_id, latency: latency.max(0.0) });
            }
        }
        Admission::RejectedDuplicate => {
            drops.duplicate += 1;
            push(EventKind::RejectDup, msg_id, cluster_id);
        }
        Admission::RejectedRedundant => {
            drops.redundant += 1;
            push(EventKind::RejectRedundant, msg_id, cluster_id);
        }
        Admission::RejectedFalsePositive => {
            drops.false_positive += 1;
            push(EventKind::RejectFp, msg_id, cluster_id);
        }
        Admission::RejectedTooLarge => {
            drops.capacity += 1;
            push(EventKind::DropCapacity, msg_id, cluster_id);
        }
    }
}

/// Event log CSV: tick,event,node,msg_id,cluster_id.
pub fn write_event_csv<W: Write>(w: W, events: &[EventRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["tick", "event", "node", "msg_id", "cluster_id"])?;
    for e in events {
        wtr.write_record([
            e.tick.to_string(),
            e.event.as_str().to_string(),
            e.node.to_string(),
            e.msg_id.to_string(),
            e.cluster_id.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
