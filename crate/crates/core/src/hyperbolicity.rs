//! Gromov products and slim/thin measurements of geodesic triangles.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cusped::{CuspedSpace, VertexId};
use crate::error::{Error, Result};
use crate::value::HalfInt;

/// `(a, b)_p = ½(d(a,p) + d(b,p) − d(a,b))`.
pub fn gromov_product(cs: &CuspedSpace, a: VertexId, b: VertexId, p: VertexId) -> HalfInt {
    let sum = cs.d(a, p) as i64 + cs.d(b, p) as i64 - cs.d(a, b) as i64;
    HalfInt::half_of(sum)
}

#[derive(Clone, Debug, Serialize)]
pub struct TriangleMeasurement {
    pub a: VertexId,
    pub b: VertexId,
    pub c: VertexId,
    /// Canonical sides `[a,b]`, `[b,c]`, `[c,a]`, oriented as named.
    pub sides: [Vec<VertexId>; 3],
    pub slimness: u32,
    /// Internal point on `[b,c]`.
    pub i_a: VertexId,
    /// Internal point on `[c,a]`.
    pub i_b: VertexId,
    /// Internal point on `[a,b]`.
    pub i_c: VertexId,
    pub thinness: u32,
}

fn side_distance(cs: &CuspedSpace, x: VertexId, y: VertexId) -> u32 {
    cs.graph().local_distance(x, y, 48).unwrap_or_else(|| cs.d(x, y))
}

/// Largest distance from a point of `side` to the union of `others`.
fn side_excess(cs: &CuspedSpace, side: &[VertexId], others: [&[VertexId]; 2]) -> u32 {
    let mut sources: Vec<VertexId> = others.concat();
    sources.sort_unstable();
    sources.dedup();
    let field = cs.field_of_set(&sources);
    side.iter().map(|&v| field.get(v)).max().unwrap_or(0)
}

/// Measures slimness and thinness of the canonical triangle on `a, b, c`.
pub fn measure_triangle(cs: &CuspedSpace, a: VertexId, b: VertexId, c: VertexId) -> Result<TriangleMeasurement> {
    if a == b || b == c || a == c {
        return Err(Error::Precondition(format!("triangle vertices must be distinct: {a}, {b}, {c}")));
    }
    let ab = cs.geodesic(a, b);
    let bc = cs.geodesic(b, c);
    let ca = cs.geodesic(c, a);
    let slimness = side_excess(cs, &ab, [&bc, &ca])
        .max(side_excess(cs, &bc, [&ab, &ca]))
        .max(side_excess(cs, &ca, [&ab, &bc]));

    let (lab, lbc, lca) = (ab.len() - 1, bc.len() - 1, ca.len() - 1);
    let at_a = gromov_product(cs, b, c, a).floor().max(0) as usize;
    let at_b = gromov_product(cs, a, c, b).floor().max(0) as usize;
    let at_c = gromov_product(cs, a, b, c).floor().max(0) as usize;
    let i_c = ab[at_a.min(lab)];
    let i_b = ca[lca - at_a.min(lca)];
    let i_a = bc[at_b.min(lbc)];

    let mut thinness = 0;
    for t in 0..=at_a.min(lab).min(lca) {
        thinness = thinness.max(side_distance(cs, ab[t], ca[lca - t]));
    }
    for t in 0..=at_b.min(lab).min(lbc) {
        thinness = thinness.max(side_distance(cs, ab[lab - t], bc[t]));
    }
    for t in 0..=at_c.min(lbc).min(lca) {
        thinness = thinness.max(side_distance(cs, bc[lbc - t], ca[t]));
    }

    Ok(TriangleMeasurement { a, b, c, sides: [ab, bc, ca], slimness, i_a, i_b, i_c, thinness })
}

/// One sampled triangle, as written to the per-triangle CSV.
#[derive(Clone, Debug, Serialize)]
pub struct TriangleRecord {
    pub a: VertexId,
    pub b: VertexId,
    pub c: VertexId,
    pub slimness: u32,
    pub thinness: u32,
    pub flags: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeltaEstimate {
    pub samples: usize,
    pub max_slimness: u32,
    pub max_thinness: u32,
    /// slimness value → count.
    pub histogram: BTreeMap<u32, usize>,
    /// Fraction of separated candidate triples rejected for truncation flags.
    pub flag_fraction: f64,
    #[serde(skip)]
    pub triangles: Vec<TriangleRecord>,
}

impl DeltaEstimate {
    /// The working δ̂ used by downstream searches.
    pub fn delta(&self) -> u32 {
        self.max_slimness
    }
}

/// Vertices over the inner half-ball: words of length at most `⌈R/2⌉` and the
/// horoball columns above them. Triangles with corners near the outer sphere
/// are almost always truncation-flagged, so sampling starts here.
pub fn sampling_core(cs: &CuspedSpace) -> Vec<VertexId> {
    let inner = cs.radius().div_ceil(2);
    (0..cs.len() as VertexId)
        .filter(|&v| cs.base_word(v).len() <= inner)
        .collect()
}

/// Samples `n_samples` triangles with corners in [`sampling_core`], pairwise
/// separation at least `min_separation` and unflagged sides; deterministic in
/// `seed`.
pub fn estimate_delta(cs: &CuspedSpace, n_samples: usize, min_separation: u32, seed: u64) -> Result<DeltaEstimate> {
    if n_samples == 0 {
        return Err(Error::Precondition("n_samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let core = sampling_core(cs);
    let n = core.len();
    let max_attempts = 200 * n_samples + 1000;
    let mut triangles = Vec::with_capacity(n_samples);
    let (mut separated, mut flagged) = (0usize, 0usize);
    for _ in 0..max_attempts {
        if triangles.len() == n_samples {
            break;
        }
        let t = [core[rng.gen_range(0..n)], core[rng.gen_range(0..n)], core[rng.gen_range(0..n)]];
        let pairs = [(t[0], t[1]), (t[1], t[2]), (t[0], t[2])];
        if pairs.iter().any(|&(u, v)| u == v || cs.d(u, v) < min_separation) {
            continue;
        }
        separated += 1;
        if pairs.iter().any(|&(u, v)| cs.dist(u, v).suspect) {
            flagged += 1;
            continue;
        }
        let m = measure_triangle(cs, t[0], t[1], t[2])?;
        triangles.push(TriangleRecord {
            a: m.a,
            b: m.b,
            c: m.c,
            slimness: m.slimness,
            thinness: m.thinness,
            flags: 0,
        });
    }
    if triangles.len() < n_samples {
        return Err(Error::SamplingStarved { wanted: n_samples, achieved: triangles.len() });
    }
    let mut histogram = BTreeMap::new();
    for t in &triangles {
        *histogram.entry(t.slimness).or_insert(0) += 1;
    }
    Ok(DeltaEstimate {
        samples: triangles.len(),
        max_slimness: triangles.iter().map(|t| t.slimness).max().unwrap_or(0),
        max_thinness: triangles.iter().map(|t| t.thinness).max().unwrap_or(0),
        histogram,
        flag_fraction: if separated == 0 { 0.0 } else { flagged as f64 / separated as f64 },
        triangles,
    })
}
