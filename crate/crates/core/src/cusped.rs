//! Combinatorial horoballs and the cusped space obtained by gluing one onto
//! every peripheral coset that meets the Cayley ball.
//!
//! Vertex ids: `0..ball.len()` are Cayley-ball vertices (level 0). Horoball
//! `h` with base size `m` owns ids `offset + (n-1)·m + j` for levels
//! `n = 1..=D` over its `j`-th base point.

use std::collections::{HashMap, VecDeque};
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::cayley::{write_edge_list, CayleyBall, FlaggedDistance, DEFAULT_VERTEX_BUDGET};
use crate::error::{Error, Result};
use crate::graph::{Csr, DistanceField};
use crate::group::{coset_members, CosetId, Presentation, Word};

pub type VertexId = u32;

/// Horoballs whose base has fewer points than this are reported as low-confidence.
pub const LOW_CONFIDENCE_BASE: usize = 3;

const DEFAULT_FIELD_CACHE: usize = 192;

/// A combinatorial horoball over an abstract finite metric space, with
/// levels `0..=D`. Vertex `(x, n)` has id `n·|base| + x`.
#[derive(Clone, Debug)]
pub struct HoroballGraph {
    base_len: usize,
    depth: u32,
    graph: Csr,
}

fn validate_metric(metric: &[Vec<u64>]) -> Result<()> {
    let n = metric.len();
    if n == 0 {
        return Err(Error::InvalidMetric("empty base".into()));
    }
    for (i, row) in metric.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidMetric(format!("row {i} has {} entries, expected {n}", row.len())));
        }
        if row[i] != 0 {
            return Err(Error::InvalidMetric(format!("nonzero diagonal at {i}")));
        }
        for j in 0..n {
            if row[j] != metric[j][i] {
                return Err(Error::InvalidMetric(format!("asymmetric at ({i}, {j})")));
            }
            if i != j && row[j] == 0 {
                return Err(Error::InvalidMetric(format!("zero off-diagonal at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Horizontal edges `(x, y)` with `x < y` at `level`: present iff `0 < d(x,y) ≤ 2^level`.
fn horizontal_pairs(metric: impl Fn(usize, usize) -> u64, n: usize, level: u32) -> Vec<(usize, usize)> {
    let reach = 1u64.checked_shl(level).unwrap_or(u64::MAX);
    let mut out = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            let d = metric(x, y);
            if d > 0 && d <= reach {
                out.push((x, y));
            }
        }
    }
    out
}

/// Builds the combinatorial horoball on `metric` truncated at depth `depth`.
pub fn build_horoball(metric: &[Vec<u64>], depth: u32) -> Result<HoroballGraph> {
    if depth < 1 {
        return Err(Error::InvalidDepth(depth));
    }
    validate_metric(metric)?;
    let m = metric.len();
    let id = |x: usize, n: u32| (n as usize * m + x) as u32;
    let mut edges = Vec::new();
    for n in 0..=depth {
        for x in 0..m {
            if n < depth {
                edges.push((id(x, n), id(x, n + 1)));
            }
        }
        for (x, y) in horizontal_pairs(|x, y| metric[x][y], m, n) {
            edges.push((id(x, n), id(y, n)));
        }
    }
    Ok(HoroballGraph { base_len: m, depth, graph: Csr::from_edges(m * (depth as usize + 1), &edges) })
}

impl HoroballGraph {
    pub fn id(&self, x: usize, level: u32) -> u32 {
        (level as usize * self.base_len + x) as u32
    }

    pub fn graph(&self) -> &Csr {
        &self.graph
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        self.graph.neighbors(a).binary_search(&b).is_ok()
    }

    /// Distance between `(x, level)` and `(y, level)` using horizontal edges only.
    pub fn horizontal_distance(&self, x: usize, y: usize, level: u32) -> Option<u32> {
        let (s, t) = (self.id(x, level), self.id(y, level));
        let mut seen = vec![false; self.base_len];
        let mut queue = VecDeque::from([(s, 0u32)]);
        seen[x] = true;
        while let Some((u, d)) = queue.pop_front() {
            if u == t {
                return Some(d);
            }
            for &v in self.graph.neighbors(u) {
                let lv = v as usize / self.base_len;
                let xv = v as usize % self.base_len;
                if lv == level as usize && !seen[xv] {
                    seen[xv] = true;
                    queue.push_back((v, d + 1));
                }
            }
        }
        None
    }

    /// Full BFS distance in the truncated horoball.
    pub fn distance(&self, a: u32, b: u32) -> u32 {
        self.graph.bfs(a).get(b)
    }
}

/// A horoball glued onto one peripheral coset.
#[derive(Clone, Debug, Serialize)]
pub struct Horoball {
    pub coset: CosetId,
    /// Ball vertex ids of `coset ∩ ball`, sorted by exponent.
    pub base: Vec<VertexId>,
    /// `base[j] = representative · h^exponents[j]`.
    pub exponents: Vec<i64>,
    pub depth: u32,
    #[serde(skip)]
    offset: u32,
    pub low_confidence: bool,
}

impl Horoball {
    pub fn base_len(&self) -> usize {
        self.base.len()
    }

    /// Vertex `(base[j], level)`; level 0 is the ball vertex itself.
    pub fn vertex(&self, j: usize, level: u32) -> VertexId {
        if level == 0 {
            self.base[j]
        } else {
            self.offset + (level - 1) * self.base.len() as u32 + j as u32
        }
    }

    /// Deepest vertex above the representative (exponent 0).
    pub fn deep_vertex(&self) -> VertexId {
        let j = self.exponents.iter().position(|&e| e == 0).unwrap_or(0);
        self.vertex(j, self.depth)
    }

    pub fn owns(&self, v: VertexId) -> bool {
        self.base.contains(&v)
            || (v >= self.offset && v < self.offset + self.depth * self.base.len() as u32)
    }

    /// Position of ball vertex `v` in the base.
    pub fn base_index(&self, v: VertexId) -> Option<usize> {
        self.base.iter().position(|&b| b == v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexKind {
    Base(VertexId),
    Horo { horoball: usize, base: VertexId, level: u32 },
}

struct FieldCache {
    map: HashMap<VertexId, Arc<DistanceField>>,
    order: VecDeque<VertexId>,
    capacity: usize,
}

/// The cusped space `X^h`: Cayley ball plus truncated horoballs.
pub struct CuspedSpace {
    presentation: Presentation,
    ball: CayleyBall,
    depth: u32,
    horoballs: Vec<Horoball>,
    /// Per peripheral, the horoball index of each ball vertex.
    membership: Vec<Vec<u32>>,
    graph: Csr,
    frontier: Vec<VertexId>,
    is_frontier: Vec<bool>,
    cache: Mutex<FieldCache>,
}

impl std::fmt::Debug for CuspedSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CuspedSpace")
            .field("radius", &self.ball.radius())
            .field("depth", &self.depth)
            .field("vertices", &self.len())
            .field("horoballs", &self.horoballs.len())
            .finish()
    }
}

/// Directed acyclic graph of all shortest paths between two vertices.
#[derive(Clone, Debug)]
pub struct GeodesicDag {
    pub source: VertexId,
    pub target: VertexId,
    pub length: u32,
    /// `layers[k]` holds the DAG vertices at distance `k` from the source.
    pub layers: Vec<Vec<VertexId>>,
    successors: HashMap<VertexId, Vec<VertexId>>,
}

impl GeodesicDag {
    pub fn contains(&self, v: VertexId) -> bool {
        self.successors.contains_key(&v)
    }

    pub fn successors(&self, v: VertexId) -> &[VertexId] {
        self.successors.get(&v).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.layers.iter().flatten().copied()
    }

    pub fn width(&self) -> usize {
        self.layers.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Number of distinct geodesics, saturating.
    pub fn path_count(&self) -> u64 {
        let mut count: HashMap<VertexId, u64> = HashMap::new();
        count.insert(self.target, 1);
        for layer in self.layers.iter().rev().skip(1) {
            for &v in layer {
                let c = self.successors(v).iter().fold(0u64, |acc, s| acc.saturating_add(count[s]));
                count.insert(v, c);
            }
        }
        count[&self.source]
    }
}

/// First and last vertices of `path` lying in `set`.
pub fn entry_exit_on_set(
    path: &[VertexId],
    set: impl Fn(VertexId) -> bool,
) -> (Option<VertexId>, Option<VertexId>) {
    let entry = path.iter().copied().find(|&v| set(v));
    let exit = path.iter().rev().copied().find(|&v| set(v));
    (entry, exit)
}

/// Depth large enough that every coset∩ball is joined at the top level:
/// `⌈log₂(max base diameter)⌉ + 1`.
pub fn default_depth(ball: &CayleyBall, p: &Presentation) -> Result<u32> {
    let mut diameter = 1u64;
    for i in 0..p.peripherals().len() {
        let h = p.cyclic_generator(i)?;
        let span = coset_members(&Word::identity(), h, ball.radius());
        let lo = span.first().map(|x| x.0).unwrap_or(0);
        let hi = span.last().map(|x| x.0).unwrap_or(0);
        diameter = diameter.max((hi - lo).unsigned_abs() * h.len() as u64);
    }
    Ok(64 - (diameter.max(1) - 1).leading_zeros() + 1)
}

impl CuspedSpace {
    pub fn build(ball: CayleyBall, p: &Presentation, depth: u32) -> Result<Self> {
        Self::build_with_budget(ball, p, depth, DEFAULT_VERTEX_BUDGET)
    }

    pub fn build_with_budget(ball: CayleyBall, p: &Presentation, depth: u32, budget: u64) -> Result<Self> {
        if depth < 1 {
            return Err(Error::InvalidDepth(depth));
        }
        if p.rank() != ball.rank() {
            return Err(Error::PresentationMismatch(format!(
                "ball has rank {}, presentation rank {}",
                ball.rank(),
                p.rank()
            )));
        }
        let n_ball = ball.len();
        let projected = n_ball as u64 * (1 + depth as u64 * p.peripherals().len() as u64);
        if projected > budget {
            return Err(Error::BudgetExceeded { projected, budget });
        }
        let radius = ball.radius();
        let mut horoballs = Vec::new();
        let mut membership = Vec::new();
        let mut next_id = n_ball as u32;
        for peripheral in 0..p.peripherals().len() {
            let h = p.cyclic_generator(peripheral)?;
            let mut owner = vec![u32::MAX; n_ball];
            for v in 0..n_ball {
                if owner[v] != u32::MAX {
                    continue;
                }
                // Shortlex id order: the first unassigned member is the representative.
                let rep = ball.word(v as u32).clone();
                let members = coset_members(&rep, h, radius);
                let mut base = Vec::with_capacity(members.len());
                let mut exponents = Vec::with_capacity(members.len());
                for (e, w) in members {
                    let id = ball.vertex(&w).ok_or_else(|| {
                        Error::Truncation(format!("coset {rep}⟨{h}⟩: member {w} missing from ball"))
                    })?;
                    base.push(id);
                    exponents.push(e);
                }
                let index = horoballs.len() as u32;
                for &b in &base {
                    owner[b as usize] = index;
                }
                let m = base.len() as u32;
                horoballs.push(Horoball {
                    coset: CosetId { peripheral_index: peripheral, representative: rep },
                    low_confidence: base.len() < LOW_CONFIDENCE_BASE,
                    base,
                    exponents,
                    depth,
                    offset: next_id,
                });
                next_id += m * depth;
            }
            membership.push(owner);
        }

        let mut edges: Vec<(u32, u32)> = ball.adjacency().edges().collect();
        for hb in &horoballs {
            let hlen = p.cyclic_generator(hb.coset.peripheral_index)?.len() as u64;
            let metric = |x: usize, y: usize| (hb.exponents[x] - hb.exponents[y]).unsigned_abs() * hlen;
            for n in 0..=depth {
                for j in 0..hb.base.len() {
                    if n < depth {
                        edges.push((hb.vertex(j, n), hb.vertex(j, n + 1)));
                    }
                }
                for (x, y) in horizontal_pairs(metric, hb.base.len(), n) {
                    edges.push((hb.vertex(x, n), hb.vertex(y, n)));
                }
            }
        }
        let total = next_id as usize;
        let graph = Csr::from_edges(total, &edges);

        let mut is_frontier = vec![false; total];
        for &s in ball.sphere() {
            is_frontier[s as usize] = true;
        }
        for hb in &horoballs {
            for j in 0..hb.base.len() {
                is_frontier[hb.vertex(j, depth) as usize] = true;
            }
        }
        let frontier = (0..total as u32).filter(|&v| is_frontier[v as usize]).collect();

        Ok(CuspedSpace {
            presentation: p.clone(),
            ball,
            depth,
            horoballs,
            membership,
            graph,
            frontier,
            is_frontier,
            cache: Mutex::new(FieldCache {
                map: HashMap::new(),
                order: VecDeque::new(),
                capacity: DEFAULT_FIELD_CACHE,
            }),
        })
    }

    /// Convenience: build ball and space with the default depth if `depth` is `None`.
    pub fn from_presentation(p: &Presentation, radius: usize, depth: Option<u32>) -> Result<Self> {
        let ball = CayleyBall::build(p, radius)?;
        let depth = match depth {
            Some(d) => d,
            None => default_depth(&ball, p)?,
        };
        CuspedSpace::build(ball, p, depth)
    }

    pub fn set_cache_capacity(&self, capacity: usize) {
        let mut c = self.cache.lock().unwrap();
        c.capacity = capacity.max(1);
        while c.order.len() > c.capacity {
            let old = c.order.pop_front().unwrap();
            c.map.remove(&old);
        }
    }

    pub fn presentation(&self) -> &Presentation {
        &self.presentation
    }

    pub fn ball(&self) -> &CayleyBall {
        &self.ball
    }

    pub fn radius(&self) -> usize {
        self.ball.radius()
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.graph.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }

    pub fn graph(&self) -> &Csr {
        &self.graph
    }

    pub fn horoballs(&self) -> &[Horoball] {
        &self.horoballs
    }

    pub fn frontier(&self) -> &[VertexId] {
        &self.frontier
    }

    pub fn is_frontier(&self, v: VertexId) -> bool {
        self.is_frontier[v as usize]
    }

    pub fn is_base(&self, v: VertexId) -> bool {
        (v as usize) < self.ball.len()
    }

    pub fn kind(&self, v: VertexId) -> VertexKind {
        if self.is_base(v) {
            return VertexKind::Base(v);
        }
        let h = self.horoballs.partition_point(|hb| hb.offset <= v) - 1;
        let hb = &self.horoballs[h];
        let rel = v - hb.offset;
        let m = hb.base.len() as u32;
        VertexKind::Horo { horoball: h, base: hb.base[(rel % m) as usize], level: rel / m + 1 }
    }

    pub fn level(&self, v: VertexId) -> u32 {
        match self.kind(v) {
            VertexKind::Base(_) => 0,
            VertexKind::Horo { level, .. } => level,
        }
    }

    /// The group element under `v` (the vertex itself on level 0).
    pub fn base_vertex(&self, v: VertexId) -> VertexId {
        match self.kind(v) {
            VertexKind::Base(b) => b,
            VertexKind::Horo { base, .. } => base,
        }
    }

    pub fn base_word(&self, v: VertexId) -> &Word {
        self.ball.word(self.base_vertex(v))
    }

    pub fn vertex_of_word(&self, w: &Word) -> Option<VertexId> {
        self.ball.vertex(w)
    }

    /// Horoball glued to the coset of ball vertex `v` under `peripheral`.
    pub fn horoball_of(&self, peripheral: usize, v: VertexId) -> Option<usize> {
        self.membership.get(peripheral).map(|m| m[v as usize] as usize)
    }

    pub fn horoball_by_coset(&self, coset: &CosetId) -> Option<usize> {
        let v = self.ball.vertex(&coset.representative)?;
        let h = self.horoball_of(coset.peripheral_index, v)?;
        (self.horoballs[h].coset == *coset).then_some(h)
    }

    /// Coset id of ball vertex `v` under `peripheral`.
    pub fn coset_of(&self, peripheral: usize, v: VertexId) -> Option<&CosetId> {
        self.horoball_of(peripheral, v).map(|h| &self.horoballs[h].coset)
    }

    /// Word-metric distance between the group elements under two vertices.
    pub fn group_distance(&self, u: VertexId, v: VertexId) -> usize {
        self.base_word(u).distance(self.base_word(v))
    }

    /// BFS field from `v`, memoized.
    pub fn field(&self, v: VertexId) -> Arc<DistanceField> {
        if let Some(f) = self.cache.lock().unwrap().map.get(&v) {
            return Arc::clone(f);
        }
        let f = Arc::new(self.graph.bfs(v));
        let mut c = self.cache.lock().unwrap();
        if let std::collections::hash_map::Entry::Vacant(e) = c.map.entry(v) {
            e.insert(Arc::clone(&f));
            c.order.push_back(v);
            while c.order.len() > c.capacity {
                let old = c.order.pop_front().unwrap();
                c.map.remove(&old);
            }
        }
        f
    }

    pub fn field_of_set(&self, sources: &[VertexId]) -> DistanceField {
        self.graph.bfs_multi(sources)
    }

    /// Exact shortest-path length in the truncated graph, flagged when some
    /// shortest path passes through the outer sphere or the deepest level at
    /// an interior point of the path.
    pub fn dist(&self, u: VertexId, v: VertexId) -> FlaggedDistance {
        if u == v {
            return FlaggedDistance { value: 0, suspect: false };
        }
        let fu = self.field(u);
        let fv = self.field(v);
        let value = fu.get(v);
        let suspect = self
            .frontier
            .iter()
            .any(|&w| w != u && w != v && fu.get(w) + fv.get(w) == value);
        FlaggedDistance { value, suspect }
    }

    /// Distance value only.
    pub fn d(&self, u: VertexId, v: VertexId) -> u32 {
        if u == v {
            0
        } else {
            self.field(u.min(v)).get(u.max(v))
        }
    }

    /// Canonical geodesic from `u` to `v`. The path is grown from the larger
    /// id towards the smaller one, stepping to the smallest-id predecessor, so
    /// `geodesic(v, u)` is the reverse of `geodesic(u, v)`.
    pub fn geodesic(&self, u: VertexId, v: VertexId) -> Vec<VertexId> {
        if u == v {
            return vec![u];
        }
        let (root, other) = (u.min(v), u.max(v));
        let mut path = self.field(root).descend(&self.graph, other);
        if path[0] != u {
            path.reverse();
        }
        path
    }

    pub fn all_geodesics_dag(&self, u: VertexId, v: VertexId) -> GeodesicDag {
        let fu = self.field(u);
        let fv = self.field(v);
        let length = fu.get(v);
        let mut layers = vec![Vec::new(); length as usize + 1];
        let mut members = Vec::new();
        for w in 0..self.len() as u32 {
            let (a, b) = (fu.get(w), fv.get(w));
            if a + b == length {
                layers[a as usize].push(w);
                members.push(w);
            }
        }
        let mut successors = HashMap::with_capacity(members.len());
        for &w in &members {
            let next: Vec<u32> = self
                .graph
                .neighbors(w)
                .iter()
                .copied()
                .filter(|&x| fu.get(x) == fu.get(w) + 1 && fu.get(x) + fv.get(x) == length)
                .collect();
            successors.insert(w, next);
        }
        GeodesicDag { source: u, target: v, length, layers, successors }
    }

    /// JSON manifest describing the space.
    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "R": self.radius(),
            "D": self.depth,
            "vertex_count": self.len(),
            "ball_vertex_count": self.ball.len(),
            "edge_count": self.graph.edge_count(),
            "presentation": self.presentation.to_json(),
            "horoballs": self.horoballs.iter().map(|h| serde_json::json!({
                "peripheral": h.coset.peripheral_index,
                "representative": h.coset.representative.to_string(),
                "base_size": h.base.len(),
                "first_vertex": h.offset,
                "low_confidence": h.low_confidence,
            })).collect::<Vec<_>>(),
        })
    }

    pub fn write_edge_list(&self, out: &mut impl Write) -> Result<()> {
        write_edge_list(&self.graph, out)
    }

    /// Writes the manifest to `path` and the edge list to `path` + `.edges`.
    pub fn export(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.manifest())?)?;
        let mut edge_path = path.as_os_str().to_owned();
        edge_path.push(".edges");
        let mut f = std::io::BufWriter::new(std::fs::File::create(edge_path)?);
        self.write_edge_list(&mut f)?;
        f.flush()?;
        Ok(())
    }
}
