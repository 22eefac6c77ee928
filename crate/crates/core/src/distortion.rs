//! Distortion of cross-ratios, relative cross-ratios and exit points under a
//! boundary map, and the reconstruction of a group map from boundary data.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coarse::{cross_ratio, exit_point, quasi_projection, relative_cross_ratio, CenterSearch};
use crate::cusped::{CuspedSpace, VertexId};
use crate::error::{Error, Result};
use crate::group::{distance_to_coset, Generator, Word};
use crate::morphism::{induced_proxy_map, GeneratorMap};
use crate::proxy::{sample_proxies, BoundaryProxy};

/// A space together with the quasi-center search scale measured on it.
#[derive(Clone, Copy, Debug)]
pub struct Space<'a> {
    pub cs: &'a CuspedSpace,
    pub search: CenterSearch,
}

impl<'a> Space<'a> {
    pub fn new(cs: &'a CuspedSpace, delta: u32) -> Self {
        Space { cs, search: CenterSearch::new(delta) }
    }
}

/// `y ≤ A·x + B` over a point cloud.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct DistortionFit {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub max_residual: f64,
}

/// Least-squares slope (clamped at 0), then the smallest intercept that puts
/// every point on or under the line.
pub fn fit_affine_envelope(points: &[(f64, f64)]) -> Result<DistortionFit> {
    if points.is_empty() {
        return Err(Error::Precondition("cannot fit an empty point cloud".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let a = if sxx > 0.0 { (sxy / sxx).max(0.0) } else { 0.0 };
    let mut b = points.iter().map(|&(x, y)| y - a * x).fold(0.0, f64::max);
    // Guard against rounding: the envelope must dominate exactly.
    for &(x, y) in points {
        while a * x + b < y {
            b = f64::from_bits(b.to_bits() + 1);
        }
    }
    let max_residual = points.iter().map(|&(x, y)| y - (a * x + b)).fold(0.0, f64::max);
    Ok(DistortionFit { a, b, n: points.len(), max_residual })
}

/// Proxy pool parameters shared by the distortion experiments.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PoolOptions {
    pub size: usize,
    pub parabolic_fraction: f64,
    pub threshold: u32,
}

/// A sampled proxy and its image.
#[derive(Clone, Debug, Serialize)]
pub struct MappedProxy {
    pub source: BoundaryProxy,
    pub image: BoundaryProxy,
}

/// Samples a pool in `X` and maps it to `Y`, dropping proxies whose image is
/// short or coincides with an earlier image.
pub fn mapped_pool(map: &GeneratorMap, x: Space, y: Space, pool: PoolOptions, seed: u64) -> Result<(Vec<MappedProxy>, usize)> {
    let sample = sample_proxies(x.cs, pool.size, pool.parabolic_fraction, pool.threshold, seed)?;
    let mut out: Vec<MappedProxy> = Vec::with_capacity(sample.proxies.len());
    let mut dropped = 0;
    for p in sample.proxies {
        match induced_proxy_map(map, x.cs, y.cs, &p) {
            Ok(image) if out.iter().all(|m| m.image.realization() != image.realization()) => {
                out.push(MappedProxy { source: p, image })
            }
            Ok(_) | Err(Error::ShortImage(_)) => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((out, dropped))
}

#[derive(Clone, Debug, Serialize)]
pub struct CloudPoint {
    /// Proxies of the tuple in the source space, as word strings.
    pub tuple: Vec<String>,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DistortionOutcome {
    /// Envelope of `y` against `x`.
    pub forward: DistortionFit,
    /// Envelope of `x` against `y`: the fit for the inverse map.
    pub inverse: DistortionFit,
    pub points: Vec<CloudPoint>,
    pub pool: usize,
    pub dropped: usize,
    pub skipped: usize,
}

fn outcome(points: Vec<CloudPoint>, pool: usize, dropped: usize, skipped: usize) -> Result<DistortionOutcome> {
    let forward = fit_affine_envelope(&points.iter().map(|p| (p.x, p.y)).collect::<Vec<_>>())?;
    let inverse = fit_affine_envelope(&points.iter().map(|p| (p.y, p.x)).collect::<Vec<_>>())?;
    Ok(DistortionOutcome { forward, inverse, points, pool, dropped, skipped })
}

/// Draws up to `n` distinct index tuples, each from its own stream.
fn distinct_tuples(
    n: usize,
    seed: u64,
    stream: u64,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> Option<Vec<usize>>,
) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    for _ in 0..50 * n + 100 {
        if out.len() == n {
            break;
        }
        if let Some(t) = draw(&mut rng) {
            if seen.insert(t.clone()) {
                out.push(t);
            }
        }
    }
    out
}

fn distinct_indices(rng: &mut ChaCha8Rng, len: usize, k: usize) -> Option<Vec<usize>> {
    if len < k {
        return None;
    }
    let mut t = Vec::with_capacity(k);
    while t.len() < k {
        let i = rng.gen_range(0..len);
        if !t.contains(&i) {
            t.push(i);
        }
    }
    Some(t)
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Precondition("sample count must be at least 1".into()));
    }
    Ok(())
}

/// Absolute cross-ratios of sampled 4-tuples before and after the map.
pub fn qm_distortion_experiment(
    map: &GeneratorMap,
    x: Space,
    y: Space,
    n: usize,
    seed: u64,
    pool: PoolOptions,
) -> Result<DistortionOutcome> {
    check_count(n)?;
    let (mapped, dropped) = mapped_pool(map, x, y, pool, seed)?;
    let tuples = distinct_tuples(n, seed, 11, |rng| distinct_indices(rng, mapped.len(), 4));
    if tuples.len() < n {
        return Err(Error::SamplingStarved { wanted: n, achieved: tuples.len() });
    }
    let mut points = Vec::with_capacity(n);
    for t in tuples {
        let src: Vec<&BoundaryProxy> = t.iter().map(|&i| &mapped[i].source).collect();
        let img: Vec<&BoundaryProxy> = t.iter().map(|&i| &mapped[i].image).collect();
        let cx = cross_ratio(x.cs, src[0], src[1], src[2], src[3])?.abs().to_f64();
        let cy = cross_ratio(y.cs, img[0], img[1], img[2], img[3])?.abs().to_f64();
        points.push(CloudPoint { tuple: src.iter().map(|p| p.to_string()).collect(), x: cx, y: cy });
    }
    outcome(points, mapped.len(), dropped, 0)
}

/// `center_estimate` of the relative cross-ratio `[a,b,c]`; `c` must be parabolic.
pub fn relative_estimate(space: Space, a: &BoundaryProxy, b: &BoundaryProxy, c: &BoundaryProxy) -> Result<u32> {
    let coset = c
        .coset()
        .ok_or_else(|| Error::Precondition(format!("third proxy {c} is not parabolic")))?;
    Ok(relative_cross_ratio(space.cs, a, b, coset, space.search)?.center_estimate)
}

/// Relative cross-ratios of sampled triples `(a, b, c)` with `c` parabolic.
pub fn relative_qm_experiment(
    map: &GeneratorMap,
    x: Space,
    y: Space,
    n: usize,
    seed: u64,
    pool: PoolOptions,
) -> Result<DistortionOutcome> {
    check_count(n)?;
    let (mapped, dropped) = mapped_pool(map, x, y, pool, seed)?;
    let parabolic: Vec<usize> = (0..mapped.len()).filter(|&i| mapped[i].source.is_parabolic()).collect();
    let tuples = distinct_tuples(4 * n, seed, 12, |rng| {
        if parabolic.is_empty() {
            return None;
        }
        let c = parabolic[rng.gen_range(0..parabolic.len())];
        let ab = distinct_indices(rng, mapped.len(), 2)?;
        (!ab.contains(&c)).then(|| vec![ab[0], ab[1], c])
    });
    let mut points = Vec::with_capacity(n);
    let mut skipped = 0;
    for t in tuples {
        if points.len() == n {
            break;
        }
        let [a, b, c] = [&mapped[t[0]], &mapped[t[1]], &mapped[t[2]]];
        let pair = relative_estimate(x, &a.source, &b.source, &c.source)
            .and_then(|ex| Ok((ex, relative_estimate(y, &a.image, &b.image, &c.image)?)));
        match pair {
            Ok((ex, ey)) => points.push(CloudPoint {
                tuple: vec![a.source.to_string(), b.source.to_string(), c.source.to_string()],
                x: ex as f64,
                y: ey as f64,
            }),
            Err(Error::InvalidProxy(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if points.len() < n {
        return Err(Error::SamplingStarved { wanted: n, achieved: points.len() });
    }
    outcome(points, mapped.len(), dropped, skipped)
}

/// Exit points of sampled pairs `(a, b)`, `a` parabolic, compared pairwise.
pub fn exit_distortion_experiment(
    map: &GeneratorMap,
    x: Space,
    y: Space,
    n: usize,
    seed: u64,
    pool: PoolOptions,
) -> Result<DistortionOutcome> {
    check_count(n)?;
    let (mapped, dropped) = mapped_pool(map, x, y, pool, seed)?;
    let mut pairs = Vec::new();
    for (i, m) in mapped.iter().enumerate() {
        if m.source.is_parabolic() {
            pairs.extend((0..mapped.len()).filter(|&j| j != i).map(|j| (i, j)));
        }
    }
    let mut exits: HashMap<(usize, usize), Option<(VertexId, VertexId)>> = HashMap::new();
    let mut exit_of = |i: usize, j: usize| -> Result<Option<(VertexId, VertexId)>> {
        if let Some(e) = exits.get(&(i, j)) {
            return Ok(*e);
        }
        let (a, b) = (&mapped[i], &mapped[j]);
        let ex = exit_point(x.cs, a.source.coset().expect("parabolic"), &b.source);
        let ey = exit_point(y.cs, a.image.coset().expect("images of parabolics are parabolic"), &b.image);
        let e = match (ex, ey) {
            (Ok(u), Ok(v)) => Some((u, v)),
            (Err(Error::Precondition(_)), _) | (_, Err(Error::Precondition(_))) => None,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        exits.insert((i, j), e);
        Ok(e)
    };
    let tuples = distinct_tuples(4 * n, seed, 13, |rng| {
        if pairs.is_empty() {
            return None;
        }
        Some(vec![rng.gen_range(0..pairs.len()), rng.gen_range(0..pairs.len())])
    });
    let mut points = Vec::with_capacity(n);
    let mut skipped = 0;
    for t in tuples {
        if points.len() == n {
            break;
        }
        let (p, q) = (pairs[t[0]], pairs[t[1]]);
        match (exit_of(p.0, p.1)?, exit_of(q.0, q.1)?) {
            (Some((u1, v1)), Some((u2, v2))) => points.push(CloudPoint {
                tuple: [p.0, p.1, q.0, q.1].iter().map(|&i| mapped[i].source.to_string()).collect(),
                x: x.cs.group_distance(u1, u2) as f64,
                y: y.cs.group_distance(v1, v2) as f64,
            }),
            _ => skipped += 1,
        }
    }
    if points.len() < n {
        return Err(Error::SamplingStarved { wanted: n, achieved: points.len() });
    }
    outcome(points, mapped.len(), dropped, skipped)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReconstructMode {
    Centers,
    Exits,
}

/// A boundary map on proxies.
pub type ProxyMap<'m> = dyn Fn(&BoundaryProxy) -> Result<BoundaryProxy> + 'm;

/// The map on proxies induced by a generator map.
pub fn induced<'m>(map: &'m GeneratorMap, x: &'m CuspedSpace, y: &'m CuspedSpace) -> Box<ProxyMap<'m>> {
    Box::new(move |p| induced_proxy_map(map, x, y, p))
}

/// Ball vertices of word length at most `radius`.
pub fn interior_vertices(cs: &CuspedSpace, radius: usize) -> Vec<VertexId> {
    (0..cs.ball().len() as VertexId).take_while(|&v| cs.base_word(v).len() <= radius).collect()
}

/// The letters that extend `v` without cancellation, in code order.
fn directions(cs: &CuspedSpace, v: &Word) -> Vec<Generator> {
    cs.presentation().generators().filter(|&g| v.last() != Some(g.inverse())).collect()
}

fn ray(cs: &CuspedSpace, v: &Word, g: Generator) -> Result<BoundaryProxy> {
    let mut letters = v.letters().to_vec();
    letters.resize(cs.radius(), g);
    BoundaryProxy::conical(cs, Word::reduced(letters))
}

/// Proxy tuples anchored at a vertex: three rays (centers) or the vertex's
/// coset with one ray (exits).
fn anchored_tuples(cs: &CuspedSpace, v: &Word, mode: ReconstructMode) -> Result<Vec<Vec<BoundaryProxy>>> {
    if v.len() >= cs.radius() {
        return Ok(vec![]);
    }
    let dirs = directions(cs, v);
    match mode {
        ReconstructMode::Centers => {
            if dirs.len() < 3 {
                return Ok(vec![]);
            }
            Ok(vec![dirs[..3].iter().map(|&g| ray(cs, v, g)).collect::<Result<Vec<_>>>()?])
        }
        ReconstructMode::Exits => {
            if cs.presentation().peripherals().is_empty() {
                return Err(Error::Precondition("exit reconstruction needs a peripheral subgroup".into()));
            }
            let vid = cs.vertex_of_word(v).expect("anchor lies in the ball");
            let coset = BoundaryProxy::parabolic(cs, cs.coset_of(0, vid).expect("ball vertex").clone())?;
            dirs.iter().map(|&g| Ok(vec![coset.clone(), ray(cs, v, g)?])).collect()
        }
    }
}

/// The point a tuple determines: quasi-center of a triple, or exit point of a pair.
fn tuple_point(space: Space, tuple: &[BoundaryProxy], mode: ReconstructMode) -> Result<VertexId> {
    match mode {
        ReconstructMode::Centers => {
            Ok(quasi_projection(space.cs, &tuple[0], &tuple[1], &tuple[2], space.search)?.vertex)
        }
        ReconstructMode::Exits => exit_point(
            space.cs,
            tuple[0].coset().ok_or_else(|| Error::Precondition("exit tuple needs a parabolic first entry".into()))?,
            &tuple[1],
        ),
    }
}

fn point_distance(space: Space, mode: ReconstructMode, p: VertexId, x: VertexId) -> u32 {
    match mode {
        ReconstructMode::Centers => space.cs.d(p, x),
        ReconstructMode::Exits => space.cs.group_distance(p, x) as u32,
    }
}

/// Coarse-onto radius: the largest, over interior vertices, of the distance
/// to the point of the tuple anchored at the vertex itself.
pub fn coverage_radius(space: Space, interior: &[VertexId], mode: ReconstructMode) -> Result<u32> {
    let mut worst = 0;
    for &x in interior {
        let w = space.cs.base_word(x).clone();
        let best = anchored_tuples(space.cs, &w, mode)?
            .iter()
            .filter_map(|t| tuple_point(space, t, mode).ok())
            .map(|p| point_distance(space, mode, p, x))
            .min()
            .ok_or_else(|| Error::CoverageGap(format!("no anchored tuple at {w}")))?;
        worst = worst.max(best);
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct ReconstructedPoint {
    pub x: Word,
    pub image: Word,
    /// Ring radius at which a qualifying tuple was found.
    pub ring: usize,
    pub reference: Option<Word>,
    pub distance: Option<usize>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct QiConstants {
    pub lambda: f64,
    pub epsilon: f64,
    pub pairs: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Reconstruction {
    pub mode: ReconstructMode,
    pub coverage_radius: u32,
    pub points: Vec<ReconstructedPoint>,
    /// Largest distance to the reference map, when one is given.
    pub round_trip: Option<usize>,
    pub qi: QiConstants,
    /// Largest distance from an image of a coset vertex to the matched coset.
    pub cusp: Option<usize>,
}

#[derive(Clone, Copy, Debug)]
pub struct ReconstructOptions<'m> {
    pub mode: ReconstructMode,
    pub interior_radius: usize,
    pub coverage_radius: u32,
    pub reference: Option<&'m GeneratorMap>,
}

/// All reduced words of length `r` in code order.
fn words_of_length(rank: u8, r: usize) -> Vec<Word> {
    let mut layer = vec![Word::identity()];
    for _ in 0..r {
        layer = layer
            .iter()
            .flat_map(|w| {
                (0..2 * rank)
                    .map(Generator::from_code)
                    .filter(move |g| w.last() != Some(g.inverse()))
                    .map(move |g| w.times(g))
            })
            .collect();
    }
    layer
}

/// Builds `Φf` on interior ball vertices: for each `x`, the first tuple
/// anchored in rings around `x` whose point lies within the coverage radius
/// is pushed through `f`, and the image point's group element is taken.
pub fn reconstruct_qi(f: &ProxyMap, x: Space, y: Space, opts: ReconstructOptions) -> Result<Reconstruction> {
    let interior = interior_vertices(x.cs, opts.interior_radius);
    let cap = (2 * opts.coverage_radius).max(1) as usize;
    let rank = x.cs.presentation().rank();
    let mut points = Vec::with_capacity(interior.len());
    for &xv in &interior {
        let xw = x.cs.base_word(xv).clone();
        let mut found = None;
        'rings: for r in 0..=cap {
            for s in words_of_length(rank, r) {
                let v = xw.mul(&s);
                if v.len() >= x.cs.radius() || v.distance(&xw) != r {
                    continue;
                }
                for tuple in anchored_tuples(x.cs, &v, opts.mode)? {
                    let Ok(p) = tuple_point(x, &tuple, opts.mode) else { continue };
                    if point_distance(x, opts.mode, p, xv) > opts.coverage_radius {
                        continue;
                    }
                    let Ok(images) = tuple.iter().map(f).collect::<Result<Vec<_>>>() else { continue };
                    let Ok(q) = tuple_point(y, &images, opts.mode) else { continue };
                    found = Some((y.cs.base_word(q).clone(), r));
                    break 'rings;
                }
            }
        }
        let (image, ring) =
            found.ok_or_else(|| Error::CoverageGap(format!("no tuple within {} of {xw}", opts.coverage_radius)))?;
        let reference = opts.reference.map(|m| m.apply(&xw));
        let distance = reference.as_ref().map(|r| r.distance(&image));
        points.push(ReconstructedPoint { x: xw, image, ring, reference, distance });
    }

    let mut d1d2 = Vec::new();
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            d1d2.push((p.x.distance(&q.x) as f64, p.image.distance(&q.image) as f64));
        }
    }
    let qi = if d1d2.is_empty() {
        QiConstants { lambda: 1.0, epsilon: 0.0, pairs: 0 }
    } else {
        let fwd = fit_affine_envelope(&d1d2)?;
        let back = fit_affine_envelope(&d1d2.iter().map(|&(a, b)| (b, a)).collect::<Vec<_>>())?;
        let lambda = fwd.a.max(back.a).max(1.0);
        let epsilon = d1d2
            .iter()
            .map(|&(a, b)| (b - lambda * a).max(a - lambda * b))
            .fold(0.0, f64::max);
        QiConstants { lambda, epsilon, pairs: d1d2.len() }
    };

    let cusp = match opts.reference {
        Some(m) => {
            let mut worst = 0;
            for p in &points {
                for (i, _) in x.cs.presentation().peripherals().iter().enumerate() {
                    let xv = x.cs.vertex_of_word(&p.x).expect("interior vertex");
                    let coset = x.cs.coset_of(i, xv).expect("ball vertex");
                    let pm = m.peripheral_match(i)?;
                    let h = m.target().cyclic_generator(pm.dst)?;
                    let g = m.hom(&coset.representative).mul(&pm.conjugator);
                    worst = worst.max(distance_to_coset(&p.image, &g, h));
                }
            }
            Some(worst)
        }
        None => None,
    };
    let round_trip = opts.reference.map(|_| points.iter().filter_map(|p| p.distance).max().unwrap_or(0));
    Ok(Reconstruction { mode: opts.mode, coverage_radius: opts.coverage_radius, points, round_trip, qi, cusp })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Presentation;
    use crate::morphism::dehn_twist_map;
    use proptest::prelude::*;

    #[test]
    fn envelope_examples() {
        let f = fit_affine_envelope(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]).unwrap();
        assert_eq!((f.a, f.b, f.n), (1.0, 0.0, 3));
        let f = fit_affine_envelope(&[(0.0, 1.0)]).unwrap();
        assert_eq!((f.a, f.b), (0.0, 1.0));
        // Slope: Σ(x−2)(y−5/3) / Σ(x−2)² = 8/8; residuals y − x are 0, −1, 0.
        let f = fit_affine_envelope(&[(0.0, 0.0), (2.0, 1.0), (4.0, 4.0)]).unwrap();
        assert_eq!((f.a, f.b), (1.0, 0.0));
        assert!(fit_affine_envelope(&[]).is_err());
    }

    #[test]
    fn negative_slope_is_clamped() {
        let f = fit_affine_envelope(&[(0.0, 3.0), (3.0, 0.0)]).unwrap();
        assert_eq!((f.a, f.b), (0.0, 3.0));
    }

    proptest! {
        #[test]
        fn envelope_dominates_every_point(pts in prop::collection::vec((0.0f64..50.0, 0.0f64..50.0), 1..40)) {
            let f = fit_affine_envelope(&pts).unwrap();
            prop_assert!(f.a >= 0.0 && f.b >= 0.0);
            prop_assert_eq!(f.max_residual, 0.0);
            for &(x, y) in &pts {
                prop_assert!(y <= f.a * x + f.b);
            }
        }
    }

    fn torus(radius: usize, depth: u32) -> CuspedSpace {
        CuspedSpace::from_presentation(&Presentation::punctured_torus(), radius, Some(depth)).unwrap()
    }

    const POOL: PoolOptions = PoolOptions { size: 16, parabolic_fraction: 0.3, threshold: 1 };

    #[test]
    fn identity_map_has_unit_distortion() {
        let cs = torus(6, 3);
        let s = Space::new(&cs, 1);
        let id = GeneratorMap::identity(cs.presentation());
        let qm = qm_distortion_experiment(&id, s, s, 40, 3, POOL).unwrap();
        assert!(qm.points.iter().all(|p| p.x == p.y));
        assert!(qm.forward.a <= 1.0 + 1e-9 && qm.forward.b <= 1e-9, "{:?}", qm.forward);
        let ex = exit_distortion_experiment(&id, s, s, 40, 3, POOL).unwrap();
        assert!(ex.points.iter().all(|p| p.x == p.y));
        let rel = relative_qm_experiment(&id, s, s, 20, 3, POOL).unwrap();
        assert!(rel.points.iter().all(|p| p.x == p.y));
        assert!(matches!(qm_distortion_experiment(&id, s, s, 0, 3, POOL), Err(Error::Precondition(_))));
    }

    #[test]
    fn experiments_are_deterministic() {
        let cs = torus(6, 3);
        let s = Space::new(&cs, 1);
        let t = dehn_twist_map(cs.presentation()).unwrap();
        let a = qm_distortion_experiment(&t, s, s, 30, 9, POOL).unwrap();
        let b = qm_distortion_experiment(&t, s, s, 30, 9, POOL).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn same_pair_contributes_zero_distance() {
        let cs = torus(6, 3);
        let coset = cs.coset_of(0, 0).unwrap().clone();
        let b = BoundaryProxy::conical(&cs, "bbbbbb".parse().unwrap()).unwrap();
        let e1 = exit_point(&cs, &coset, &b).unwrap();
        let e2 = exit_point(&cs, &coset, &b).unwrap();
        assert_eq!(cs.group_distance(e1, e2), 0);
    }

    #[test]
    fn relative_estimate_needs_parabolic_third_entry() {
        let cs = torus(6, 3);
        let p = |s: &str| BoundaryProxy::conical(&cs, s.parse().unwrap()).unwrap();
        let err = relative_estimate(Space::new(&cs, 1), &p("aaaaaa"), &p("bbbbbb"), &p("AAAAAA")).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn identity_reconstruction_is_the_identity() {
        let cs = torus(6, 3);
        let s = Space::new(&cs, 1);
        let id = GeneratorMap::identity(cs.presentation());
        let f = induced(&id, &cs, &cs);
        for mode in [ReconstructMode::Centers, ReconstructMode::Exits] {
            let interior = interior_vertices(&cs, 1);
            let r_hat = coverage_radius(s, &interior, mode).unwrap();
            let opts = ReconstructOptions { mode, interior_radius: 1, coverage_radius: r_hat, reference: Some(&id) };
            let rec = reconstruct_qi(&*f, s, s, opts).unwrap();
            assert_eq!(rec.points.len(), 5);
            assert_eq!(rec.points[0].x, Word::identity());
            assert_eq!(rec.points[0].image, Word::identity(), "{mode:?}");
            assert!(rec.round_trip.unwrap() as u32 <= 2 * r_hat, "{mode:?}: {rec:?}");
        }
    }

    #[test]
    fn twist_reconstruction_tracks_the_twist() {
        let cs = torus(6, 3);
        let s = Space::new(&cs, 1);
        let t = dehn_twist_map(cs.presentation()).unwrap();
        let f = induced(&t, &cs, &cs);
        let interior = interior_vertices(&cs, 1);
        let r_hat = coverage_radius(s, &interior, ReconstructMode::Centers).unwrap();
        let opts =
            ReconstructOptions { mode: ReconstructMode::Centers, interior_radius: 1, coverage_radius: r_hat, reference: Some(&t) };
        let rec = reconstruct_qi(&*f, s, s, opts).unwrap();
        assert!(rec.round_trip.unwrap() <= 3, "{rec:?}");
        assert!(rec.qi.lambda.is_finite() && rec.qi.epsilon.is_finite());
    }

    #[test]
    fn words_of_length_counts() {
        assert_eq!(words_of_length(2, 0).len(), 1);
        assert_eq!(words_of_length(2, 1).len(), 4);
        assert_eq!(words_of_length(2, 3).len(), 36);
    }

    #[test]
    fn missing_coverage_is_reported() {
        // A map on proxies that rejects everything leaves every vertex uncovered.
        let cs = torus(5, 2);
        let s = Space::new(&cs, 1);
        let reject: Box<ProxyMap> = Box::new(|p| Err(Error::ShortImage(p.to_string())));
        let opts =
            ReconstructOptions { mode: ReconstructMode::Centers, interior_radius: 0, coverage_radius: 0, reference: None };
        assert!(matches!(reconstruct_qi(&*reject, s, s, opts), Err(Error::CoverageGap(_))));
    }
}
