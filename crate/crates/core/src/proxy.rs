//! Finite stand-ins for boundary points: conical directions on the outer
//! sphere and parabolic points marked by their coset.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coarse::{CenterSearch, Endpoint};
use crate::cusped::{CuspedSpace, VertexId};
use crate::error::{Error, Result};
use crate::group::{CosetId, Generator, Word};
use crate::value::HalfInt;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProxyKind {
    /// A sphere word of length R.
    Conical { word: Word },
    Parabolic { coset: CosetId },
}

/// A proxy together with the vertex that stands for it: the sphere vertex,
/// or the deepest horoball vertex over the coset representative.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct BoundaryProxy {
    #[serde(flatten)]
    pub kind: ProxyKind,
    #[serde(skip)]
    realization: VertexId,
}

impl Endpoint for BoundaryProxy {
    fn realization(&self) -> VertexId {
        self.realization
    }

    fn is_ideal(&self) -> bool {
        true
    }
}

impl fmt::Display for BoundaryProxy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ProxyKind::Conical { word } => write!(f, "c:{word}"),
            ProxyKind::Parabolic { coset } => write!(f, "p{}:{}", coset.peripheral_index, coset.representative),
        }
    }
}

impl BoundaryProxy {
    pub fn conical(cs: &CuspedSpace, word: Word) -> Result<Self> {
        if word.len() != cs.radius() {
            return Err(Error::InvalidProxy(format!("conical word {word} is not on the radius-{} sphere", cs.radius())));
        }
        let realization = cs
            .vertex_of_word(&word)
            .ok_or_else(|| Error::InvalidProxy(format!("word {word} is outside the ball")))?;
        Ok(BoundaryProxy { kind: ProxyKind::Conical { word }, realization })
    }

    pub fn parabolic(cs: &CuspedSpace, coset: CosetId) -> Result<Self> {
        let h = cs
            .horoball_by_coset(&coset)
            .ok_or_else(|| Error::InvalidProxy(format!("no horoball for coset {}", coset.representative)))?;
        let realization = cs.horoballs()[h].deep_vertex();
        Ok(BoundaryProxy { kind: ProxyKind::Parabolic { coset }, realization })
    }

    pub fn from_kind(cs: &CuspedSpace, kind: ProxyKind) -> Result<Self> {
        match kind {
            ProxyKind::Conical { word } => Self::conical(cs, word),
            ProxyKind::Parabolic { coset } => Self::parabolic(cs, coset),
        }
    }

    pub fn realization(&self) -> VertexId {
        self.realization
    }

    pub fn is_parabolic(&self) -> bool {
        matches!(self.kind, ProxyKind::Parabolic { .. })
    }

    pub fn coset(&self) -> Option<&CosetId> {
        match &self.kind {
            ProxyKind::Parabolic { coset } => Some(coset),
            ProxyKind::Conical { .. } => None,
        }
    }

    /// The sphere word, or the coset representative.
    pub fn word(&self) -> &Word {
        match &self.kind {
            ProxyKind::Conical { word } => word,
            ProxyKind::Parabolic { coset } => &coset.representative,
        }
    }

    /// The corresponding proxy in a space of another radius over the same
    /// presentation: conical words are cut to the smaller sphere or extended
    /// by repeating their last letter; cosets are kept.
    pub fn transfer(&self, target: &CuspedSpace) -> Result<Self> {
        match &self.kind {
            ProxyKind::Conical { word } => {
                let r = target.radius();
                let moved = if word.len() >= r {
                    word.prefix(r)
                } else {
                    let last = word
                        .last()
                        .ok_or_else(|| Error::Extension("the empty word has no direction".into()))?;
                    let mut letters = word.letters().to_vec();
                    letters.resize(r, last);
                    Word::reduced(letters)
                };
                Self::conical(target, moved).map_err(|e| Error::Extension(e.to_string()))
            }
            ProxyKind::Parabolic { coset } => {
                Self::parabolic(target, coset.clone()).map_err(|e| Error::Extension(e.to_string()))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProxySample {
    pub proxies: Vec<BoundaryProxy>,
    /// Pairwise Gromov products at ε.
    pub products: Vec<Vec<HalfInt>>,
    pub threshold: u32,
}

pub fn random_reduced_word(rng: &mut impl Rng, rank: u8, len: usize) -> Word {
    let mut letters: Vec<Generator> = Vec::with_capacity(len);
    let codes = 2 * rank;
    while letters.len() < len {
        let g = Generator::from_code(rng.gen_range(0..codes));
        if letters.last().is_none_or(|&l| l != g.inverse()) {
            letters.push(g);
        }
    }
    Word::reduced(letters)
}

/// Default separation threshold `⌊R/3⌋`.
pub fn default_threshold(radius: usize) -> u32 {
    (radius / 3) as u32
}

/// Samples `count` proxies with pairwise Gromov products at ε at most
/// `threshold`. Each candidate draws from its own random stream, so the
/// candidate sequence for a seed does not depend on the radius beyond the
/// word length.
pub fn sample_proxies(
    cs: &CuspedSpace,
    count: usize,
    parabolic_fraction: f64,
    threshold: u32,
    seed: u64,
) -> Result<ProxySample> {
    if 2 * threshold as usize >= cs.radius() {
        return Err(Error::Precondition(format!(
            "threshold {threshold} must be below R/2 = {}",
            cs.radius() as f64 / 2.0
        )));
    }
    if !(0.0..=1.0).contains(&parabolic_fraction) {
        return Err(Error::Precondition(format!("parabolic fraction {parabolic_fraction} outside [0,1]")));
    }
    let rank = cs.presentation().rank();
    let peripherals = cs.presentation().peripherals().len();
    let to_origin = cs.field(0);
    let mut proxies: Vec<BoundaryProxy> = Vec::with_capacity(count);
    let mut products: Vec<Vec<HalfInt>> = Vec::with_capacity(count);
    let attempts = 100 * count as u64 + 200;
    for idx in 0..attempts {
        if proxies.len() == count {
            break;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(idx);
        let candidate = if peripherals > 0 && rng.gen_bool(parabolic_fraction) {
            let i = rng.gen_range(0..peripherals);
            let len = rng.gen_range(0..=3.min(cs.radius()));
            let g = random_reduced_word(&mut rng, rank, len);
            let v = cs.vertex_of_word(&g).expect("short words lie in the ball");
            let coset = cs.coset_of(i, v).expect("every coset meeting the ball has a horoball").clone();
            BoundaryProxy::parabolic(cs, coset)?
        } else {
            BoundaryProxy::conical(cs, random_reduced_word(&mut rng, rank, cs.radius()))?
        };
        let p = candidate.realization;
        if proxies.iter().any(|q| q.realization == p) {
            continue;
        }
        let fp = cs.graph().bfs(p);
        let row: Vec<HalfInt> = proxies
            .iter()
            .map(|q| {
                let s = fp.get(0) as i64 + to_origin.get(q.realization) as i64 - fp.get(q.realization) as i64;
                HalfInt::half_of(s)
            })
            .collect();
        if row.iter().any(|&x| x > HalfInt::from_int(threshold as i64)) {
            continue;
        }
        for (i, &x) in row.iter().enumerate() {
            products[i].push(x);
        }
        let mut own = row;
        own.push(HalfInt::from_int(fp.get(0) as i64));
        products.push(own);
        proxies.push(candidate);
    }
    if proxies.len() < count {
        return Err(Error::SamplingStarved { wanted: count, achieved: proxies.len() });
    }
    Ok(ProxySample { proxies, products, threshold })
}

#[derive(Clone, Debug, Serialize)]
pub struct ProxyPath {
    pub vertices: Vec<VertexId>,
    /// Vertices at each end excluded from invariant measurements.
    pub trim: usize,
}

impl ProxyPath {
    /// The measured middle of the path (never empty).
    pub fn core(&self) -> &[VertexId] {
        let n = self.vertices.len();
        if 2 * self.trim >= n {
            &self.vertices[n / 2..n / 2 + 1]
        } else {
            &self.vertices[self.trim..n - self.trim]
        }
    }
}

/// Canonical geodesic between the realizations of two proxies.
pub fn proxy_geodesic(cs: &CuspedSpace, p: &BoundaryProxy, q: &BoundaryProxy, search: CenterSearch) -> Result<ProxyPath> {
    if p.realization == q.realization || p.kind == q.kind {
        return Err(Error::DegeneratePair(format!("{p} and {q} coincide")));
    }
    Ok(ProxyPath { vertices: cs.geodesic(p.realization, q.realization), trim: search.trim() })
}

#[derive(Clone, Debug, Serialize)]
pub struct DriftReport {
    pub max_drift: f64,
    pub drifts: Vec<f64>,
    pub small_values: Vec<f64>,
    pub large_values: Vec<f64>,
}

/// Evaluates a quantity on proxy tuples of the smaller space and on their
/// extensions to the larger one, reporting the largest change.
pub fn stabilization_check<F>(
    small: &CuspedSpace,
    large: &CuspedSpace,
    tuples: &[Vec<BoundaryProxy>],
    evaluator: F,
) -> Result<DriftReport>
where
    F: Fn(&CuspedSpace, &[BoundaryProxy]) -> Result<f64>,
{
    if small.presentation() != large.presentation() {
        return Err(Error::PresentationMismatch("stabilization needs one presentation".into()));
    }
    if small.radius() >= large.radius() {
        return Err(Error::Precondition(format!(
            "radii must increase: {} then {}",
            small.radius(),
            large.radius()
        )));
    }
    let mut report = DriftReport { max_drift: 0.0, drifts: vec![], small_values: vec![], large_values: vec![] };
    for tuple in tuples {
        let extended = tuple.iter().map(|p| p.transfer(large)).collect::<Result<Vec<_>>>()?;
        let s = evaluator(small, tuple)?;
        let l = evaluator(large, &extended)?;
        let drift = (l - s).abs();
        report.max_drift = report.max_drift.max(drift);
        report.drifts.push(drift);
        report.small_values.push(s);
        report.large_values.push(l);
    }
    Ok(report)
}
