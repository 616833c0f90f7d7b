//! Road-graph map, point-of-interest pedestrian movement, rescue-vehicle
//! shuttle behavior, and range-based contact detection.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};

use rand::Rng;

use crate::config::{NodeSpec, ScenarioConfig};
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

/// Connected road graph; vertices indexed 0..n.
#[derive(Debug, Clone)]
pub struct MapGraph {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<(usize, usize, f64)>,
    adj: Vec<Vec<(usize, f64)>>,
}

impl MapGraph {
    pub fn new(vertices: Vec<Vertex>, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let n = vertices.len();
        for (i, v) in vertices.iter().enumerate() {
            if v.id != i {
                return Err(CoreError::Invalid(format!(
                    "vertex ids must be contiguous; found {} at index {i}",
                    v.id
                )));
            }
        }
        let mut adj = vec![Vec::new(); n];
        for &(a, b, len) in &edges {
            if a >= n || b >= n || a == b {
                return Err(CoreError::Invalid(format!("bad edge ({a}, {b})")));
            }
            if len <= 0.0 {
                return Err(CoreError::Invalid(format!("edge ({a}, {b}) length {len} <= 0")));
            }
            let va = vertices[a];
            let vb = vertices[b];
            let euclid = ((va.x - vb.x).powi(2) + (va.y - vb.y).powi(2)).sqrt();
            if len < euclid - 1e-6 {
                return Err(CoreError::Invalid(format!(
                    "edge ({a}, {b}) shorter than straight-line distance"
                )));
            }
            adj[a].push((b, len));
            adj[b].push((a, len));
        }
        for nbrs in &mut adj {
            nbrs.sort_by(|x, y| x.0.cmp(&y.0));
        }
        Ok(MapGraph { vertices, edges, adj })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adj[v]
    }

    pub fn edge_length(&self, a: usize, b: usize) -> Option<f64> {
        self.adj[a].iter().find(|(n, _)| *n == b).map(|(_, l)| *l)
    }

    /// Flood-fill connectivity check.
    pub fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &(n, _) in self.neighbors(v) {
                if !seen[n] {
                    seen[n] = true;
                    count += 1;
                    stack.push(n);
                }
            }
        }
        count == self.len()
    }

    pub fn nearest_vertex(&self, x: f64, y: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for v in &self.vertices {
            let d = (v.x - x).powi(2) + (v.y - y).powi(2);
            if d < best_d {
                best_d = d;
                best = v.id;
            }
        }
        best
    }

    /// Ids of vertices inside the rectangle [x0,y0,x1,y1].
    pub fn vertices_in_rect(&self, rect: [f64; 4]) -> Vec<usize> {
        let [x0, y0, x1, y1] = rect;
        self.vertices
            .iter()
            .filter(|v| v.x >= x0 && v.x <= x1 && v.y >= y0 && v.y <= y1)
            .map(|v| v.id)
            .collect()
    }

    /// Serializes to the map file format.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "vertices {}", self.len())?;
        writeln!(w, "edges {}", self.edges.len())?;
        for v in &self.vertices {
            writeln!(w, "{} {} {}", v.id, v.x, v.y)?;
        }
        for &(a, b, len) in &self.edges {
            writeln!(w, "{a} {b} {len}")?;
        }
        Ok(())
    }

    /// Parses the map file format: `vertices n` / `edges m` header lines,
    /// then `id x y` lines, then `a b length` lines.
    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let reader = BufReader::new(r);
        let mut lines = reader.lines();
        let mut next_line = || -> Result<String> {
            loop {
                match lines.next() {
                    Some(l) => {
                        let l = l?;
                        if !l.trim().is_empty() {
                            return Ok(l);
                        }
                    }
                    None => return Err(CoreError::Invalid("truncated map file".into())),
                }
            }
        };
        let header = |line: &str, kind: &str| -> Result<usize> {
            let mut parts = line.split_whitespace();
            if parts.next() != Some(kind) {
                return Err(CoreError::Invalid(format!("expected `{kind} n` header")));
            }
            parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| CoreError::Invalid(format!("bad `{kind}` count")))
        };
        let n = header(&next_line()?, "vertices")?;
        let m = header(&next_line()?, "edges")?;
        let mut vertices = Vec::with_capacity(n);
        for _ in 0..n {
            let line = next_line()?;
            let mut p = line.split_whitespace();
            let id: usize = p.next().and_then(|s| s.parse().ok()).ok_or_else(|| {
                CoreError::Invalid(format!("bad vertex line `{line}`"))
            })?;
            let x: f64 = p.next().and_then(|s| s.parse().ok()).ok_or_else(|| {
                CoreError::Invalid(format!("bad vertex line `{line}`"))
            })?;
            let y: f64 = p.next().and_then(|s| s.parse().ok()).ok_or_else(|| {
                CoreError::Invalid(format!("bad vertex line `{line}`"))
            })?;
            vertices.push(Vertex { id, x, y });
        }
        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            let line = next_line()?;
            let mut p = line.split_whitespace();
            let a: usize = p.next().and_then(|s| s.parse().ok()).ok_or_else(|| {
                CoreError::Invalid(format!("bad edge line `{line}`"))
            })?;
            let b: usize = p.next().and_then(|s| s.parse().ok()).ok_or_else(|| {
                CoreError::Invalid(format!("bad edge line `{line}`"))
            })?;
            let len: f64 = p.next().and_then(|s| s.parse().ok()).ok_or_else(|| {
                CoreError::Invalid(format!("bad edge line `{line}`"))
            })?;
            edges.push((a, b, len));
        }
        MapGraph::new(vertices, edges)
    }
}

/// Rectangular road lattice with 4-neighbor edges, plus a straight corridor
/// of vertices from the lattice to the gateway position when one is given.
pub fn generate_grid_map(
    width_m: f64,
    height_m: f64,
    spacing_m: f64,
    gateway: Option<[f64; 2]>,
) -> Result<MapGraph> {
    if width_m <= 0.0 || height_m <= 0.0 || spacing_m <= 0.0 {
        return Err(CoreError::Invalid("degenerate grid dimensions".into()));
    }
    let divides = |dim: f64| (dim / spacing_m - (dim / spacing_m).round()).abs() < 1e-9;
    if !divides(width_m) || !divides(height_m) {
        return Err(CoreError::Invalid(format!(
            "spacing {spacing_m} does not divide {width_m} x {height_m}"
        )));
    }
    let nx = (width_m / spacing_m).round() as usize + 1;
    let ny = (height_m / spacing_m).round() as usize + 1;
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            vertices.push(Vertex {
                id: j * nx + i,
                x: i as f64 * spacing_m,
                y: j as f64 * spacing_m,
            });
        }
    }
    let mut edges = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let v = j * nx + i;
            if i + 1 < nx {
                edges.push((v, v + 1, spacing_m));
            }
            if j + 1 < ny {
                edges.push((v, v + nx, spacing_m));
            }
        }
    }
    if let Some([gx, gy]) = gateway {
        // corridor from the nearest lattice vertex straight to the gateway
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for v in &vertices {
            let d = (v.x - gx).powi(2) + (v.y - gy).powi(2);
            if d < best_d {
                best_d = d;
                best = v.id;
            }
        }
        let (sx, sy) = (vertices[best].x, vertices[best].y);
        let total = ((gx - sx).powi(2) + (gy - sy).powi(2)).sqrt();
        if total > 0.0 {
            let steps = (total / spacing_m).floor() as usize;
            let mut prev = best;
            let mut prev_pos = (sx, sy);
            for k in 1..=steps {
                let f = k as f64 * spacing_m / total;
                if (1.0 - f) * total < 1e-9 {
                    break; // lands on the gateway itself
                }
                let pos = (sx + (gx - sx) * f, sy + (gy - sy) * f);
                let id = vertices.len();
                vertices.push(Vertex { id, x: pos.0, y: pos.1 });
                let len = ((pos.0 - prev_pos.0).powi(2) + (pos.1 - prev_pos.1).powi(2)).sqrt();
                edges.push((prev, id, len));
                prev = id;
                prev_pos = pos;
            }
            let id = vertices.len();
            vertices.push(Vertex { id, x: gx, y: gy });
            let len = ((gx - prev_pos.0).powi(2) + (gy - prev_pos.1).powi(2)).sqrt();
            edges.push((prev, id, len));
        }
    }
    MapGraph::new(vertices, edges)
}

/// Shortest path by total edge length; among equal-length paths the
/// lexicographically smallest vertex sequence wins.
pub fn shortest_path(map: &MapGraph, from: usize, to: usize) -> Result<Vec<usize>> {
    if from >= map.len() || to >= map.len() {
        return Err(CoreError::Invalid(format!("vertex out of range: {from} or {to}")));
    }
    if from == to {
        return Ok(vec![from]);
    }
    // Dijkstra from the target gives distance-to-go; a greedy forward walk
    // that always picks the smallest feasible vertex id is then the
    // lexicographically smallest shortest path.
    let dist = dijkstra(map, to);
    if !dist[from].is_finite() {
        return Err(CoreError::Invalid(format!("no path from {from} to {to}")));
    }
    let mut path = vec![from];
    let mut cur = from;
    while cur != to {
        let tol = 1e-9 * (1.0 + dist[from]);
        let next = map
            .neighbors(cur)
            .iter()
            .find(|&&(n, len)| (dist[n] + len - dist[cur]).abs() <= tol)
            .map(|&(n, _)| n)
            .ok_or_else(|| CoreError::Invalid("shortest-path reconstruction failed".into()))?;
        path.push(next);
        cur = next;
    }
    Ok(path)
}

fn dijkstra(map: &MapGraph, source: usize) -> Vec<f64> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let mut dist = vec![f64::INFINITY; map.len()];
    dist[source] = 0.0;
    let mut heap: BinaryHeap<(Reverse<ordered>, usize)> = BinaryHeap::new();
    heap.push((Reverse(ordered(0.0)), source));
    while let Some((Reverse(d), v)) = heap.pop() {
        if d.0 > dist[v] {
            continue;
        }
        for &(n, len) in map.neighbors(v) {
            let nd = dist[v] + len;
            if nd < dist[n] {
                dist[n] = nd;
                heap.push((Reverse(ordered(nd)), n));
            }
        }
    }
    dist
}

/// Total-order wrapper for finite path lengths.
#[derive(PartialEq, PartialOrd)]
#[allow(non_camel_case_types)]
struct ordered(f64);

impl Eq for ordered {}
#[allow(clippy::derive_ord_xor_partial_ord)]
impl Ord for ordered {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.partial_cmp(other).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Moving,
    Paused,
}

/// Movement state for one node: a path being traversed and a pause timer.
#[derive(Debug, Clone)]
pub struct MobilityState {
    pub node_id: usize,
    /// Path vertex sequence; `leg` indexes the edge currently being walked.
    pub path: Vec<usize>,
    pub leg: usize,
    /// Meters progressed along the current edge.
    pub progress: f64,
    pub phase: Phase,
    pub phase_timer: f64,
    /// Speed for the current trip, m/s.
    pub speed: f64,
    /// Vehicle only: whether the current destination is in the disaster region.
    pub heading_to_disaster: bool,
}

impl MobilityState {
    pub fn at_vertex(node_id: usize, vertex: usize, initial_pause: f64) -> Self {
        MobilityState {
            node_id,
            path: vec![vertex],
            leg: 0,
            progress: 0.0,
            phase: Phase::Paused,
            phase_timer: initial_pause,
            speed: 0.0,
            heading_to_disaster: false,
        }
    }

    pub fn current_vertex(&self) -> usize {
        self.path[self.leg.min(self.path.len() - 1)]
    }

    pub fn destination(&self) -> usize {
        *self.path.last().unwrap()
    }

    /// Interpolated map position.
    pub fn position(&self, map: &MapGraph) -> (f64, f64) {
        if self.leg + 1 >= self.path.len() {
            let v = map.vertices[self.destination()];
            return (v.x, v.y);
        }
        let a = map.vertices[self.path[self.leg]];
        let b = map.vertices[self.path[self.leg + 1]];
        let len = map.edge_length(a.id, b.id).unwrap_or(0.0);
        let f = if len > 0.0 { (self.progress / len).clamp(0.0, 1.0) } else { 1.0 };
        (a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f)
    }

    fn arrived(&self) -> bool {
        self.leg + 1 >= self.path.len()
    }

    /// Advances along the path; returns true on arrival at the destination.
    fn advance(&mut self, map: &MapGraph, dt: f64) -> bool {
        let mut remaining = self.speed * dt;
        while remaining > 0.0 && !self.arrived() {
            let a = self.path[self.leg];
            let b = self.path[self.leg + 1];
            let len = map.edge_length(a, b).expect("path edges exist");
            let left = len - self.progress;
            if remaining >= left {
                remaining -= left;
                self.leg += 1;
                self.progress = 0.0;
            } else {
                self.progress += remaining;
                remaining = 0.0;
            }
        }
        self.arrived()
    }
}

/// One time step of point-of-interest pedestrian movement: walk, pause
/// 5 minutes on arrival, pick a fresh uniform destination in the disaster
/// region with a fresh uniform speed.
pub fn pedestrian_tick<R: Rng>(
    state: &mut MobilityState,
    map: &MapGraph,
    region_vertices: &[usize],
    cfg: &ScenarioConfig,
    rng: &mut R,
    dt: f64,
) {
    match state.phase {
        Phase::Moving => {
            if state.advance(map, dt) {
                state.phase = Phase::Paused;
                state.phase_timer = cfg.pedestrian_pause;
            }
        }
        Phase::Paused => {
            state.phase_timer -= dt;
            if state.phase_timer <= 0.0 {
                let dest = region_vertices[rng.gen_range(0..region_vertices.len())];
                let [lo, hi] = cfg.pedestrian_speed_ms();
                state.speed = rng.gen_range(lo..=hi);
                state.path = shortest_path(map, state.destination(), dest)
                    .expect("region vertices are connected");
                state.leg = 0;
                state.progress = 0.0;
                state.phase = Phase::Moving;
            }
        }
    }
}

/// One time step of the rescue-vehicle shuttle: the next destination is a
/// uniform disaster-region vertex with probability pr_disaster, else the
/// gateway; waits are 5-10 minutes in the region and the configured dwell
/// at the gateway. The destination draw ignores the current location.
pub fn vehicle_tick<R: Rng>(
    state: &mut MobilityState,
    map: &MapGraph,
    region_vertices: &[usize],
    gateway_vertex: usize,
    cfg: &ScenarioConfig,
    rng: &mut R,
    dt: f64,
) {
    match state.phase {
        Phase::Moving => {
            if state.advance(map, dt) {
                state.phase = Phase::Paused;
                state.phase_timer = if state.heading_to_disaster {
                    rng.gen_range(cfg.vehicle_wait[0]..=cfg.vehicle_wait[1])
                } else {
                    cfg.gateway_dwell
                };
            }
        }
        Phase::Paused => {
            state.phase_timer -= dt;
            if state.phase_timer <= 0.0 {
                let to_disaster = rng.gen_range(0.0..1.0) < cfg.pr_disaster;
                let dest = if to_disaster {
                    region_vertices[rng.gen_range(0..region_vertices.len())]
                } else {
                    gateway_vertex
                };
                let [lo, hi] = cfg.vehicle_speed_ms();
                state.speed = rng.gen_range(lo..=hi);
                state.heading_to_disaster = to_disaster;
                state.path = shortest_path(map, state.destination(), dest)
                    .expect("map is connected");
                state.leg = 0;
                state.progress = 0.0;
                state.phase = Phase::Moving;
            }
        }
    }
}

/// Pairs currently in contact: Euclidean distance <= min of the two radio
/// ranges. Uses a uniform grid bucket index; the brute-force pair scan is
/// the test oracle.
pub fn contacts_now(positions: &[(f64, f64)], specs: &[NodeSpec]) -> BTreeSet<(usize, usize)> {
    let n = positions.len();
    let max_range = specs.iter().map(|s| s.radio_range).fold(0.0f64, f64::max);
    let mut out = BTreeSet::new();
    if n == 0 || max_range <= 0.0 {
        return out;
    }
    let cell = max_range;
    let key = |p: (f64, f64)| ((p.0 / cell).floor() as i64, (p.1 / cell).floor() as i64);
    let mut buckets: std::collections::HashMap<(i64, i64), Vec<usize>> =
        std::collections::HashMap::new();
    for (i, &p) in positions.iter().enumerate() {
        buckets.entry(key(p)).or_default().push(i);
    }
    for (i, &p) in positions.iter().enumerate() {
        let (cx, cy) = key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(others) = buckets.get(&(cx + dx, cy + dy)) else { continue };
                for &j in others {
                    if j <= i {
                        continue;
                    }
                    let q = positions[j];
                    let range = specs[i].radio_range.min(specs[j].radio_range);
                    let d2 = (p.0 - q.0).powi(2) + (p.1 - q.1).powi(2);
                    if d2 <= range * range {
                        out.insert((i, j));
                    }
                }
            }
        }
    }
    out
}

/// Contact transitions between two ticks.
pub fn contact_deltas(
    prev: &BTreeSet<(usize, usize)>,
    now: &BTreeSet<(usize, usize)>,
) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let started = now.difference(prev).copied().collect();
    let ended = prev.difference(now).copied().collect();
    (started, ended)
}
