//! Quasi-centers, cross-ratios, relative cross-ratios, exit points and the
//! projection/visibility probes built on them.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cusped::{CuspedSpace, VertexId};
use crate::error::{Error, Result};
use crate::graph::{DistanceField, UNREACHED};
use crate::group::CosetId;
use crate::value::{ExtendedValue, HalfInt};

/// Anything that can stand at the end of a side: a vertex, or a proxy for an
/// ideal point realized by a vertex.
pub trait Endpoint {
    fn realization(&self) -> VertexId;

    /// Ideal endpoints get their side ends trimmed before side distances are
    /// measured.
    fn is_ideal(&self) -> bool {
        false
    }
}

impl Endpoint for VertexId {
    fn realization(&self) -> VertexId {
        *self
    }
}

/// A vertex standing in for an ideal point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ideal(pub VertexId);

impl Endpoint for Ideal {
    fn realization(&self) -> VertexId {
        self.0
    }

    fn is_ideal(&self) -> bool {
        true
    }
}

/// Parameters of the localized quasi-center search, derived from δ̂.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CenterSearch {
    pub delta: u32,
}

impl CenterSearch {
    pub fn new(delta: u32) -> Self {
        CenterSearch { delta }
    }

    /// Candidates lie within `11δ̂ + 1` of the side `[a,c]`.
    pub fn radius(&self) -> u32 {
        11 * self.delta + 1
    }

    /// Vertices cut from a side at each ideal end.
    pub fn trim(&self) -> usize {
        self.delta as usize
    }
}

/// Canonical geodesic between two endpoints with `trim` vertices removed at
/// each ideal end (never emptier than the middle vertex).
pub fn side<P: Endpoint + ?Sized, Q: Endpoint + ?Sized>(
    cs: &CuspedSpace,
    p: &P,
    q: &Q,
    trim: usize,
) -> Vec<VertexId> {
    let path = cs.geodesic(p.realization(), q.realization());
    let n = path.len();
    let lo = if p.is_ideal() { trim } else { 0 };
    let hi = if q.is_ideal() { trim } else { 0 };
    if lo + hi >= n {
        return vec![path[n / 2]];
    }
    path[lo..n - hi].to_vec()
}

/// The three sides `[a,b]`, `[b,c]`, `[a,c]` of a triangle with their
/// distance fields.
pub struct TriangleSides {
    pub sides: [Vec<VertexId>; 3],
    fields: [DistanceField; 3],
}

impl TriangleSides {
    pub fn new<A, B, C>(cs: &CuspedSpace, a: &A, b: &B, c: &C, trim: usize) -> Self
    where
        A: Endpoint + ?Sized,
        B: Endpoint + ?Sized,
        C: Endpoint + ?Sized,
    {
        let sides = [side(cs, a, b, trim), side(cs, b, c, trim), side(cs, a, c, trim)];
        let fields = [
            cs.field_of_set(&sides[0]),
            cs.field_of_set(&sides[1]),
            cs.field_of_set(&sides[2]),
        ];
        TriangleSides { sides, fields }
    }

    /// `f_abc(z)`: the largest distance from `z` to a side.
    pub fn f(&self, z: VertexId) -> u32 {
        self.fields.iter().map(|f| f.get(z)).max().unwrap_or(0)
    }

    /// Distance from `z` to side `[a,c]`.
    pub fn dist_to_ac(&self, z: VertexId) -> u32 {
        self.fields[2].get(z)
    }
}

/// `f_abc(z)` on untrimmed canonical sides.
pub fn f_abc(cs: &CuspedSpace, a: VertexId, b: VertexId, c: VertexId, z: VertexId) -> u32 {
    TriangleSides::new(cs, &a, &b, &c, 0).f(z)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct QuasiCenter {
    pub vertex: VertexId,
    pub f_value: u32,
    pub candidates: usize,
}

/// Quasi-projection of `b` onto `[a,c]`: the minimizer of `f_abc` among
/// vertices near `[a,c]`, least id (hence shortlex-least in the ball) on ties.
pub fn quasi_projection<A, B, C>(cs: &CuspedSpace, a: &A, b: &B, c: &C, search: CenterSearch) -> Result<QuasiCenter>
where
    A: Endpoint + ?Sized,
    B: Endpoint + ?Sized,
    C: Endpoint + ?Sized,
{
    let (ra, rb, rc) = (a.realization(), b.realization(), c.realization());
    if ra == rc {
        return Err(Error::Precondition(format!("quasi-projection onto a degenerate side at {ra}")));
    }
    let tri = TriangleSides::new(cs, a, b, c, search.trim());
    if rb == ra || rb == rc || cs.geodesic(ra, rc).contains(&rb) {
        return Ok(QuasiCenter { vertex: rb, f_value: tri.f(rb), candidates: 1 });
    }
    quasi_center_of(cs, &tri, search.radius())
}

pub(crate) fn quasi_center_of(cs: &CuspedSpace, tri: &TriangleSides, radius: u32) -> Result<QuasiCenter> {
    let mut best: Option<(u32, VertexId)> = None;
    let mut candidates = 0;
    for z in 0..cs.len() as VertexId {
        if tri.dist_to_ac(z) > radius {
            continue;
        }
        candidates += 1;
        let key = (tri.f(z), z);
        if best.is_none_or(|b| key < b) {
            best = Some(key);
        }
    }
    let (f_value, vertex) =
        best.ok_or_else(|| Error::InvariantViolation("empty quasi-center candidate set".into()))?;
    Ok(QuasiCenter { vertex, f_value, candidates })
}

/// `½{d(a,d) − d(d,c) + d(b,c) − d(a,b)}` with no coincidence handling.
pub fn raw_cross_ratio(cs: &CuspedSpace, a: VertexId, b: VertexId, c: VertexId, d: VertexId) -> HalfInt {
    let s = cs.d(a, d) as i64 - cs.d(d, c) as i64 + cs.d(b, c) as i64 - cs.d(a, b) as i64;
    HalfInt::half_of(s)
}

/// `[a,b,c,d]`, with `+∞` when `a=b` or `c=d` and `−∞` when `b=c` or `a=d`.
pub fn cross_ratio<E: Endpoint + ?Sized>(cs: &CuspedSpace, a: &E, b: &E, c: &E, d: &E) -> Result<ExtendedValue> {
    let (a, b, c, d) = (a.realization(), b.realization(), c.realization(), d.realization());
    if a == c || b == d {
        return Err(Error::UndefinedTuple(format!("[{a},{b},{c},{d}] needs a≠c and b≠d")));
    }
    if a == b || c == d {
        return Ok(ExtendedValue::PosInf);
    }
    if b == c || a == d {
        return Ok(ExtendedValue::NegInf);
    }
    Ok(ExtendedValue::Finite(raw_cross_ratio(cs, a, b, c, d)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RelativeCrossRatio {
    /// `[x,y,w,z]` with `z`, `w` the horoball entry points of `[x, c]`, `[y, c]`.
    pub r_estimate: ExtendedValue,
    /// Distance from the quasi-center of `(a, c, b)` to the coset.
    pub center_estimate: u32,
    pub entry_a: VertexId,
    pub entry_b: VertexId,
    pub center: VertexId,
}

/// Both estimators of the relative cross-ratio `[a,b,c]` for a parabolic `c`.
pub fn relative_cross_ratio<A, B>(
    cs: &CuspedSpace,
    a: &A,
    b: &B,
    c: &CosetId,
    search: CenterSearch,
) -> Result<RelativeCrossRatio>
where
    A: Endpoint + ?Sized,
    B: Endpoint + ?Sized,
{
    let hb = cs
        .horoball_by_coset(c)
        .map(|h| &cs.horoballs()[h])
        .ok_or_else(|| Error::InvalidProxy(format!("no horoball for coset {}", c.representative)))?;
    let (x, y) = (a.realization(), b.realization());
    if x == y {
        return Err(Error::Precondition(format!("relative cross-ratio needs distinct proxies, got {x} twice")));
    }
    if hb.owns(x) || hb.owns(y) {
        return Err(Error::InvalidProxy(format!(
            "proxy realized inside the horoball of {}",
            c.representative
        )));
    }
    let deep = hb.deep_vertex();
    let entry = |from: VertexId| -> Result<VertexId> {
        cs.geodesic(from, deep)
            .into_iter()
            .find(|&v| hb.owns(v))
            .ok_or_else(|| Error::InvariantViolation("geodesic to a deep vertex misses its horoball".into()))
    };
    let (z, w) = (entry(x)?, entry(y)?);
    let r = raw_cross_ratio(cs, x, y, w, z);
    let center = quasi_projection(cs, a, &Ideal(deep), b, search)?.vertex;
    let center_estimate = cs.field_of_set(&hb.base).get(center);
    Ok(RelativeCrossRatio { r_estimate: ExtendedValue::Finite(r), center_estimate, entry_a: z, entry_b: w, center })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExitPointSet {
    pub coset: CosetId,
    pub target: VertexId,
    /// Sorted ball vertex ids.
    pub vertices: Vec<VertexId>,
    /// Word-metric diameter.
    pub diameter: usize,
}

/// Last coset vertices of the geodesics from the deep vertex over `a` to `b`.
pub fn exit_point_set<B: Endpoint + ?Sized>(cs: &CuspedSpace, a: &CosetId, b: &B) -> Result<ExitPointSet> {
    let hb = cs
        .horoball_by_coset(a)
        .map(|h| &cs.horoballs()[h])
        .ok_or_else(|| Error::InvalidProxy(format!("no horoball for coset {}", a.representative)))?;
    let y = b.realization();
    if hb.owns(y) {
        return Err(Error::Precondition(format!(
            "target {y} lies in the horoball of {}",
            a.representative
        )));
    }
    let dag = cs.all_geodesics_dag(hb.deep_vertex(), y);
    let in_coset = |v: VertexId| hb.base.contains(&v);
    // reach[v]: some geodesic continues from v to the target avoiding the coset.
    let mut reach = std::collections::HashMap::new();
    reach.insert(y, true);
    let mut vertices = Vec::new();
    for layer in dag.layers.iter().rev().skip(1) {
        for &v in layer {
            let onward = dag.successors(v).iter().any(|s| !in_coset(*s) && reach[s]);
            reach.insert(v, onward);
            if onward && in_coset(v) {
                vertices.push(v);
            }
        }
    }
    if vertices.is_empty() {
        return Err(Error::InvariantViolation(format!(
            "no geodesic from coset {} to {y} leaves through the coset",
            a.representative
        )));
    }
    vertices.sort_unstable();
    let mut diameter = 0;
    for (i, &u) in vertices.iter().enumerate() {
        for &v in &vertices[i + 1..] {
            diameter = diameter.max(cs.group_distance(u, v));
        }
    }
    Ok(ExitPointSet { coset: a.clone(), target: y, vertices, diameter })
}

/// The chosen exit point: the shortlex-least member of the exit set.
pub fn exit_point<B: Endpoint + ?Sized>(cs: &CuspedSpace, a: &CosetId, b: &B) -> Result<VertexId> {
    Ok(exit_point_set(cs, a, b)?.vertices[0])
}

/// Path vertex nearest to `x`, least index on ties.
pub fn nearest_point_projection(cs: &CuspedSpace, x: VertexId, path: &[VertexId]) -> Result<VertexId> {
    if path.is_empty() {
        return Err(Error::Precondition("projection onto an empty path".into()));
    }
    let f = cs.field(x);
    let (_, i) = path.iter().enumerate().map(|(i, &v)| (f.get(v), i)).min().unwrap();
    Ok(path[i])
}

/// For every vertex, the distance to `path` and the least index of a nearest
/// path vertex — the nearest-point projection of the whole space in one BFS.
pub fn projection_labels(cs: &CuspedSpace, path: &[VertexId]) -> (Vec<u16>, Vec<u32>) {
    let g = cs.graph();
    let mut dist = vec![UNREACHED; g.len()];
    let mut label = vec![u32::MAX; g.len()];
    let mut queue = VecDeque::new();
    for (i, &v) in path.iter().enumerate() {
        if dist[v as usize] == UNREACHED {
            dist[v as usize] = 0;
            label[v as usize] = i as u32;
            queue.push_back(v);
        }
    }
    // Level-synchronous: every vertex at level k+1 sees all its level-k
    // neighbours before it is expanded, so the minimum label is final.
    while let Some(v) = queue.pop_front() {
        let (dv, lv) = (dist[v as usize], label[v as usize]);
        for &w in g.neighbors(v) {
            let w = w as usize;
            if dist[w] == UNREACHED {
                dist[w] = dv + 1;
                label[w] = lv;
                queue.push_back(w as u32);
            } else if dist[w] == dv + 1 && lv < label[w] {
                label[w] = lv;
            }
        }
    }
    (dist, label)
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeResult {
    pub max_diameter: usize,
    pub samples: usize,
    pub diameters: Vec<usize>,
}

fn sampling_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// From sampled sources outside a horoball, the word-metric diameter of the
/// entry points of geodesics to the deep vertices over every base point.
pub fn visual_boundedness_probe(cs: &CuspedSpace, horoball: usize, n_samples: usize, seed: u64) -> Result<ProbeResult> {
    let hb = cs
        .horoballs()
        .get(horoball)
        .ok_or_else(|| Error::Precondition(format!("no horoball with index {horoball}")))?;
    let targets: Vec<VertexId> = (0..hb.base_len()).map(|j| hb.vertex(j, hb.depth)).collect();
    let mut rng = sampling_rng(seed, 3);
    let mut diameters = Vec::with_capacity(n_samples);
    for _ in 0..100 * n_samples + 100 {
        if diameters.len() == n_samples {
            break;
        }
        let x = rng.gen_range(0..cs.len() as VertexId);
        if hb.owns(x) {
            continue;
        }
        let entries: Vec<VertexId> = targets
            .iter()
            .map(|&t| cs.geodesic(x, t).into_iter().find(|&v| hb.owns(v)).expect("target lies in the horoball"))
            .collect();
        let mut diam = 0;
        for (i, &u) in entries.iter().enumerate() {
            for &v in &entries[i + 1..] {
                diam = diam.max(cs.group_distance(u, v));
            }
        }
        diameters.push(diam);
    }
    if diameters.len() < n_samples {
        return Err(Error::SamplingStarved { wanted: n_samples, achieved: diameters.len() });
    }
    Ok(ProbeResult { max_diameter: diameters.iter().copied().max().unwrap_or(0), samples: n_samples, diameters })
}

/// Diameter of the nearest-point projection of a geodesic `α` onto a geodesic
/// `γ`, over sampled pairs where `α` stays farther than `p_radius` from `γ`.
/// The diameter is measured along `γ` (index span), which is exact since `γ`
/// is geodesic. Each sampled `γ` gets one labelled BFS; `α`'s endpoints are
/// then drawn from the vertices already known to be far from it.
pub fn bounded_projection_probe(cs: &CuspedSpace, n_samples: usize, p_radius: u32, seed: u64) -> Result<ProbeResult> {
    const PER_GAMMA: usize = 4;
    let mut rng = sampling_rng(seed, 4);
    let n = cs.len() as VertexId;
    let mut diameters = Vec::with_capacity(n_samples);
    for _ in 0..20 * n_samples + 20 {
        if diameters.len() == n_samples {
            break;
        }
        let (u1, v1) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if u1 == v1 {
            continue;
        }
        let gamma = cs.geodesic(u1, v1);
        let (dist, label) = projection_labels(cs, &gamma);
        let far: Vec<VertexId> = (0..n).filter(|&v| dist[v as usize] as u32 > p_radius).collect();
        if far.len() < 2 {
            continue;
        }
        let mut found = 0;
        for _ in 0..4 * PER_GAMMA {
            if found == PER_GAMMA || diameters.len() == n_samples {
                break;
            }
            let (u2, v2) = (far[rng.gen_range(0..far.len())], far[rng.gen_range(0..far.len())]);
            if u2 == v2 {
                continue;
            }
            let alpha = cs.geodesic(u2, v2);
            if alpha.iter().any(|&v| dist[v as usize] as u32 <= p_radius) {
                continue;
            }
            let lo = alpha.iter().map(|&v| label[v as usize]).min().unwrap();
            let hi = alpha.iter().map(|&v| label[v as usize]).max().unwrap();
            diameters.push((hi - lo) as usize);
            found += 1;
        }
    }
    if diameters.len() < n_samples {
        return Err(Error::SamplingStarved { wanted: n_samples, achieved: diameters.len() });
    }
    Ok(ProbeResult { max_diameter: diameters.iter().copied().max().unwrap_or(0), samples: n_samples, diameters })
}
