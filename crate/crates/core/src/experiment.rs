//! Config-driven experiments: each kind measures one family of invariants on
//! a cusped space and emits a JSON report plus a CSV point cloud.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coarse::{
    bounded_projection_probe, cross_ratio, exit_point_set, quasi_projection, relative_cross_ratio,
    visual_boundedness_probe, RelativeCrossRatio,
};
use crate::cusped::CuspedSpace;
use crate::distortion::{
    coverage_radius, exit_distortion_experiment, fit_affine_envelope, induced, interior_vertices,
    qm_distortion_experiment, reconstruct_qi, relative_qm_experiment, DistortionFit, DistortionOutcome,
    PoolOptions, ReconstructMode, ReconstructOptions, Space,
};
use crate::error::{Error, Result};
use crate::group::Presentation;
use crate::hyperbolicity::estimate_delta;
use crate::ledger::{ConstantsLedger, LedgerEntry};
use crate::morphism::{dehn_twist_map, GeneratorMap};
use crate::proxy::{default_threshold, sample_proxies, BoundaryProxy};
use crate::value::{ExtendedValue, HalfInt};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Delta,
    CrossRatio,
    OneOfThree,
    RelativeCr,
    ExitSets,
    Qm,
    RelativeQm,
    ExitDistortion,
    Reconstruct,
    Stability,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Delta => "delta",
            ExperimentKind::CrossRatio => "cross-ratio",
            ExperimentKind::OneOfThree => "one-of-three",
            ExperimentKind::RelativeCr => "relative-cr",
            ExperimentKind::ExitSets => "exit-sets",
            ExperimentKind::Qm => "qm",
            ExperimentKind::RelativeQm => "relative-qm",
            ExperimentKind::ExitDistortion => "exit-distortion",
            ExperimentKind::Reconstruct => "reconstruct",
            ExperimentKind::Stability => "stability",
        }
    }

    fn needs_map(self) -> bool {
        matches!(
            self,
            ExperimentKind::Qm | ExperimentKind::RelativeQm | ExperimentKind::ExitDistortion | ExperimentKind::Reconstruct
        )
    }
}

/// Drift allowed between two runs before `compare_runs` flags it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub constant: f64,
    pub slope: f64,
    pub intercept: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { constant: 2.0, slope: 0.5, intercept: 4.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: ExperimentKind,
    /// Presentation JSON file; the punctured torus `F(a,b)` with `⟨abAB⟩` when absent.
    pub presentation: Option<PathBuf>,
    #[serde(rename = "R")]
    pub radius: usize,
    /// Horoball depth; derived from the ball when absent.
    #[serde(rename = "D")]
    pub depth: Option<u32>,
    pub seed: u64,
    pub samples: usize,
    pub delta_samples: usize,
    pub min_separation: u32,
    /// Fixes δ̂ instead of estimating it.
    pub delta: Option<u32>,
    pub pool_size: usize,
    pub parabolic_fraction: f64,
    /// Proxy separation threshold; `⌊R/3⌋` when absent.
    pub threshold: Option<u32>,
    /// Map file, or one of the built-in maps `identity` and `dehn-twist`.
    pub map: Option<String>,
    pub reconstruct_mode: ReconstructMode,
    /// Interior radius for reconstruction; `⌊R/4⌋` when absent.
    pub interior_radius: Option<usize>,
    pub probe_samples: usize,
    /// Neighbourhood radius for the bounded projection probe; `δ̂ + 1` when absent.
    pub projection_radius: Option<u32>,
    /// Experiment rerun by a stability run.
    pub stability_kind: Option<ExperimentKind>,
    /// Larger radius of a stability run; `R + 2` when absent.
    pub compare_radius: Option<usize>,
    pub tolerances: Tolerances,
    pub output_dir: Option<PathBuf>,
    /// Writes the space manifest here, and its edge list next to it.
    pub export_space: Option<PathBuf>,
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            kind: ExperimentKind::Delta,
            presentation: None,
            radius: 8,
            depth: None,
            seed: 1,
            samples: 300,
            delta_samples: 500,
            min_separation: 3,
            delta: None,
            pool_size: 24,
            parabolic_fraction: 0.3,
            threshold: None,
            map: None,
            reconstruct_mode: ReconstructMode::Centers,
            interior_radius: None,
            probe_samples: 40,
            projection_radius: None,
            stability_kind: None,
            compare_radius: None,
            tolerances: Tolerances::default(),
            output_dir: None,
            export_space: None,
            jobs: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn load_presentation(&self) -> Result<Presentation> {
        match &self.presentation {
            Some(p) => Presentation::load(p),
            None => Ok(Presentation::punctured_torus()),
        }
    }

    pub fn load_map(&self, p: &Presentation) -> Result<GeneratorMap> {
        match self.map.as_deref() {
            None => Err(Error::Parse(format!("experiment {} needs a map file", self.kind.name()))),
            Some("identity") => Ok(GeneratorMap::identity(p)),
            Some("dehn-twist") => dehn_twist_map(p),
            Some(path) => GeneratorMap::load(Path::new(path), p.clone(), p.clone()),
        }
    }

    fn validate(&self, p: &Presentation) -> Result<()> {
        if !p.peripherals().is_empty() && self.radius < 4 {
            return Err(Error::Precondition(format!("cusped experiments need R ≥ 4, got {}", self.radius)));
        }
        if self.samples == 0 || self.delta_samples == 0 || self.probe_samples == 0 {
            return Err(Error::Precondition("sample counts must be at least 1".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Precondition("jobs must be at least 1".into()));
        }
        Ok(())
    }

    fn pool(&self) -> PoolOptions {
        PoolOptions {
            size: self.pool_size,
            parabolic_fraction: self.parabolic_fraction,
            threshold: self.threshold.unwrap_or_else(|| default_threshold(self.radius)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceSummary {
    #[serde(rename = "R")]
    pub radius: usize,
    #[serde(rename = "D")]
    pub depth: u32,
    pub vertices: usize,
    pub edges: usize,
    pub horoballs: usize,
    pub presentation: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub space: SpaceSummary,
    pub delta: u32,
    pub ledger: ConstantsLedger,
    pub fits: BTreeMap<String, DistortionFit>,
    pub metrics: BTreeMap<String, f64>,
    pub rows: usize,
    pub points_file: Option<String>,
    pub flag_fraction: f64,
    pub wall_clock_seconds: f64,
}

impl Report {
    /// The report as JSON with the wall-clock field zeroed, for reproducibility checks.
    pub fn canonical_json(&self) -> String {
        let mut r = self.clone();
        r.wall_clock_seconds = 0.0;
        serde_json::to_string(&r).expect("report serializes")
    }
}

/// A CSV point cloud.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shared state of one run on one space.
pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub cs: &'a CuspedSpace,
    pub delta: u32,
    ledger: ConstantsLedger,
}

impl<'a> Context<'a> {
    pub fn space(&self) -> Space<'a> {
        Space::new(self.cs, self.delta)
    }

    fn record(&mut self, name: &str, max: f64, samples: usize) -> Result<()> {
        self.ledger.record(LedgerEntry {
            name: name.into(),
            max,
            samples: samples as u64,
            radius: self.cs.radius(),
            depth: self.cs.depth(),
            seed: self.cfg.seed,
        })
    }
}

struct KindOutput {
    fits: BTreeMap<String, DistortionFit>,
    metrics: BTreeMap<String, f64>,
    table: Table,
}

/// Applies `f` to every item on `jobs` worker threads, returning results in
/// item order.
pub fn par_map<T: Sync, R: Send>(jobs: usize, items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if jobs <= 1 || items.len() < 2 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<_>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

pub fn build_space(cfg: &ExperimentConfig, radius: usize) -> Result<CuspedSpace> {
    CuspedSpace::from_presentation(&cfg.load_presentation()?, radius, cfg.depth)
}

/// Distinct ordered index tuples of `k` distinct entries below `len`.
fn index_tuples(len: usize, k: usize, n: usize, seed: u64, stream: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    if len < k {
        return out;
    }
    for _ in 0..50 * n + 100 {
        if out.len() == n {
            break;
        }
        let mut t = Vec::with_capacity(k);
        while t.len() < k {
            let i = rng.gen_range(0..len);
            if !t.contains(&i) {
                t.push(i);
            }
        }
        if seen.insert(t.clone()) {
            out.push(t);
        }
    }
    out
}

/// Every ordered tuple of `k` distinct pool indices accepted by `keep`, in a
/// seeded random order.
fn shuffled_tuples(pool: &[BoundaryProxy], k: usize, seed: u64, stream: u64, keep: impl Fn(&[usize]) -> bool) -> Vec<Vec<usize>> {
    let mut all = Vec::new();
    let mut t = Vec::with_capacity(k);
    fn extend(len: usize, k: usize, t: &mut Vec<usize>, all: &mut Vec<Vec<usize>>, keep: &dyn Fn(&[usize]) -> bool) {
        if t.len() == k {
            if keep(t) {
                all.push(t.clone());
            }
            return;
        }
        for i in 0..len {
            if !t.contains(&i) {
                t.push(i);
                extend(len, k, t, all, keep);
                t.pop();
            }
        }
    }
    extend(pool.len(), k, &mut t, &mut all, &keep);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    all.shuffle(&mut rng);
    all
}

/// One sampled quadruple of proxies.
#[derive(Clone, Debug, Serialize)]
pub struct QuadRecord {
    pub tuple: [String; 4],
    pub cross_ratio: ExtendedValue,
    /// `d(p_abc, q_acd)`.
    pub center_distance: u32,
    pub f_abc: u32,
    pub f_acd: u32,
    /// `min(|[a,b,c,d]|, |[a,c,b,d]|, |[c,a,b,d]|)`.
    pub min_three: f64,
}

impl QuadRecord {
    pub fn discrepancy(&self) -> f64 {
        (self.cross_ratio.abs().to_f64() - self.center_distance as f64).abs()
    }
}

pub fn proxy_pool(ctx: &Context) -> Result<Vec<BoundaryProxy>> {
    pool_of_size(ctx, ctx.cfg.pool_size)
}

fn pool_of_size(ctx: &Context, size: usize) -> Result<Vec<BoundaryProxy>> {
    let pool = ctx.cfg.pool();
    Ok(sample_proxies(ctx.cs, size, pool.parabolic_fraction, pool.threshold, ctx.cfg.seed)?.proxies)
}

/// Smallest pool, no smaller than configured, with at least `pairs` ordered
/// (parabolic, other) pairs.
fn pool_size_for_pairs(cfg: &ExperimentConfig, pairs: usize) -> usize {
    let mut s = cfg.pool_size.max(2);
    while ((cfg.parabolic_fraction * s as f64).floor() as usize) * (s - 1) < pairs && s < 10 * pairs + 10 {
        s += 1;
    }
    s
}

/// Cross-ratios and quasi-center distances of `n` quadruples from the pool.
pub fn quadruple_records(ctx: &Context, pool: &[BoundaryProxy], n: usize) -> Result<Vec<QuadRecord>> {
    let tuples = index_tuples(pool.len(), 4, n, ctx.cfg.seed, 21);
    if tuples.len() < n {
        return Err(Error::SamplingStarved { wanted: n, achieved: tuples.len() });
    }
    let search = ctx.space().search;
    let cs = ctx.cs;
    par_map(ctx.cfg.jobs, &tuples, |t| {
        let [a, b, c, d] = [&pool[t[0]], &pool[t[1]], &pool[t[2]], &pool[t[3]]];
        let cr = cross_ratio(cs, a, b, c, d)?;
        let p = quasi_projection(cs, a, b, c, search)?;
        let q = quasi_projection(cs, a, d, c, search)?;
        let min_three = [cr, cross_ratio(cs, a, c, b, d)?, cross_ratio(cs, c, a, b, d)?]
            .iter()
            .map(|x| x.abs().to_f64())
            .fold(f64::INFINITY, f64::min);
        Ok(QuadRecord {
            tuple: [a.to_string(), b.to_string(), c.to_string(), d.to_string()],
            cross_ratio: cr,
            center_distance: cs.d(p.vertex, q.vertex),
            f_abc: p.f_value,
            f_acd: q.f_value,
            min_three,
        })
    })
    .into_iter()
    .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RelativeRecord {
    pub tuple: [String; 3],
    pub value: RelativeCrossRatio,
}

/// Relative cross-ratios `[a,b,c]` of triples from the pool with `c` parabolic;
/// triples with a proxy inside `c`'s horoball are skipped.
pub fn relative_records(ctx: &Context, pool: &[BoundaryProxy], n: usize) -> Result<Vec<RelativeRecord>> {
    let tuples = shuffled_tuples(pool, 3, ctx.cfg.seed, 22, |t| pool[t[2]].is_parabolic());
    let search = ctx.space().search;
    let cs = ctx.cs;
    let mut out = Vec::with_capacity(n);
    for batch in tuples.chunks(n.max(1)) {
        let results = par_map(ctx.cfg.jobs, batch, |t| {
            let [a, b, c] = [&pool[t[0]], &pool[t[1]], &pool[t[2]]];
            match relative_cross_ratio(cs, a, b, c.coset().expect("filtered"), search) {
                Ok(value) => Ok(Some(RelativeRecord { tuple: [a.to_string(), b.to_string(), c.to_string()], value })),
                Err(Error::InvalidProxy(_)) => Ok(None),
                Err(e) => Err(e),
            }
        });
        for r in results {
            if out.len() < n {
                if let Some(rec) = r? {
                    out.push(rec);
                }
            }
        }
        if out.len() == n {
            break;
        }
    }
    if out.len() < n {
        return Err(Error::SamplingStarved { wanted: n, achieved: out.len() });
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct ExitRecord {
    pub pair: [String; 2],
    pub exit_point: String,
    pub size: usize,
    pub diameter: usize,
}

/// Exit-point sets of every pair `(a, b)` from the pool with `a` parabolic;
/// at least `n` must succeed.
pub fn exit_records(ctx: &Context, pool: &[BoundaryProxy], n: usize) -> Result<Vec<ExitRecord>> {
    let tuples = shuffled_tuples(pool, 2, ctx.cfg.seed, 23, |t| pool[t[0]].is_parabolic());
    let cs = ctx.cs;
    let mut out = Vec::with_capacity(n);
    for t in tuples {
        let (a, b) = (&pool[t[0]], &pool[t[1]]);
        match exit_point_set(cs, a.coset().expect("filtered"), b) {
            Ok(set) => out.push(ExitRecord {
                pair: [a.to_string(), b.to_string()],
                exit_point: cs.base_word(set.vertices[0]).to_string(),
                size: set.vertices.len(),
                diameter: set.diameter,
            }),
            Err(Error::Precondition(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    if out.len() < n {
        return Err(Error::SamplingStarved { wanted: n, achieved: out.len() });
    }
    Ok(out)
}

/// Half-integer-valued measurements in the `.0`/`.5` CSV form.
fn fmt_half(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "+inf".into() } else { "-inf".into() };
    }
    HalfInt::from_twice((2.0 * x).round() as i64).to_string()
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

fn run_kind(ctx: &mut Context, kind: ExperimentKind) -> Result<KindOutput> {
    let cfg = ctx.cfg;
    let n = cfg.samples;
    let mut fits = BTreeMap::new();
    let mut metrics = BTreeMap::new();
    let table = match kind {
        ExperimentKind::Delta => {
            // The estimate itself is run once per space in `execute`.
            Table::new(&["a", "b", "c", "slimness", "thinness", "flags"])
        }
        ExperimentKind::CrossRatio | ExperimentKind::OneOfThree => {
            let pool = proxy_pool(ctx)?;
            let recs = quadruple_records(ctx, &pool, n)?;
            if kind == ExperimentKind::CrossRatio {
                ctx.record("C5", max_of(recs.iter().map(QuadRecord::discrepancy)), recs.len())?;
                let f_max = recs.iter().map(|r| r.f_abc.max(r.f_acd)).max().unwrap_or(0);
                ctx.record("center_f", f_max as f64, 2 * recs.len())?;
            } else {
                ctx.record("C6", max_of(recs.iter().map(|r| r.min_three)), recs.len())?;
            }
            let mut t = Table::new(&["a", "b", "c", "d", "cross_ratio", "center_distance", "discrepancy", "f_abc", "f_acd", "min_three"]);
            for r in &recs {
                let mut row = r.tuple.to_vec();
                row.extend([
                    r.cross_ratio.to_string(),
                    r.center_distance.to_string(),
                    fmt_half(r.discrepancy()),
                    r.f_abc.to_string(),
                    r.f_acd.to_string(),
                    fmt_half(r.min_three),
                ]);
                t.rows.push(row);
            }
            t
        }
        ExperimentKind::RelativeCr => {
            let pool = proxy_pool(ctx)?;
            let recs = relative_records(ctx, &pool, n)?;
            let pts: Vec<(f64, f64)> = recs
                .iter()
                .map(|r| (r.value.r_estimate.abs().to_f64(), r.value.center_estimate as f64))
                .collect();
            let fwd = fit_affine_envelope(&pts)?;
            let back = fit_affine_envelope(&pts.iter().map(|&(x, y)| (y, x)).collect::<Vec<_>>())?;
            ctx.record("C8", fwd.b.max(back.b), recs.len())?;
            fits.insert("r_to_center".into(), fwd);
            fits.insert("center_to_r".into(), back);

            let h = ctx.cs.horoball_of(0, 0).ok_or_else(|| Error::Precondition("no peripheral subgroup".into()))?;
            let k3 = visual_boundedness_probe(ctx.cs, h, cfg.probe_samples, cfg.seed)?;
            ctx.record("K3", k3.max_diameter as f64, k3.samples)?;
            let p = cfg.projection_radius.unwrap_or(ctx.delta + 1);
            let k1 = bounded_projection_probe(ctx.cs, cfg.probe_samples, p, cfg.seed)?;
            ctx.record("K1", k1.max_diameter as f64, k1.samples)?;
            metrics.insert("projection_radius".into(), p as f64);

            let mut t = Table::new(&["a", "b", "c", "r_estimate", "center_estimate", "entry_a", "entry_b", "center"]);
            for r in &recs {
                let mut row = r.tuple.to_vec();
                row.extend([
                    r.value.r_estimate.to_string(),
                    r.value.center_estimate.to_string(),
                    ctx.cs.base_word(r.value.entry_a).to_string(),
                    ctx.cs.base_word(r.value.entry_b).to_string(),
                    r.value.center.to_string(),
                ]);
                t.rows.push(row);
            }
            t
        }
        ExperimentKind::ExitSets => {
            // Parabolic draws are random, so grow the pool until enough pairs exist.
            let mut size = pool_size_for_pairs(cfg, n);
            let recs = loop {
                let pool = pool_of_size(ctx, size)?;
                match exit_records(ctx, &pool, n) {
                    Err(Error::SamplingStarved { .. }) if size < 4 * pool_size_for_pairs(cfg, n) => size += size / 4,
                    r => break r?,
                }
            };
            metrics.insert("pool".into(), size as f64);
            ctx.record("C1", max_of(recs.iter().map(|r| r.diameter as f64)), recs.len())?;
            let mut t = Table::new(&["a", "b", "exit_point", "set_size", "diameter"]);
            for r in &recs {
                let mut row = r.pair.to_vec();
                row.extend([r.exit_point.clone(), r.size.to_string(), r.diameter.to_string()]);
                t.rows.push(row);
            }
            t
        }
        ExperimentKind::Qm | ExperimentKind::RelativeQm | ExperimentKind::ExitDistortion => {
            let map = cfg.load_map(ctx.cs.presentation())?;
            let s = ctx.space();
            let out: DistortionOutcome = match kind {
                ExperimentKind::Qm => qm_distortion_experiment(&map, s, s, n, cfg.seed, cfg.pool())?,
                ExperimentKind::RelativeQm => relative_qm_experiment(&map, s, s, n, cfg.seed, cfg.pool())?,
                _ => exit_distortion_experiment(&map, s, s, n, cfg.seed, cfg.pool())?,
            };
            fits.insert("forward".into(), out.forward);
            fits.insert("inverse".into(), out.inverse);
            metrics.insert("pool".into(), out.pool as f64);
            metrics.insert("dropped".into(), out.dropped as f64);
            metrics.insert("skipped".into(), out.skipped as f64);
            let mut t = Table::new(&["tuple", "x", "y"]);
            for p in &out.points {
                t.rows.push(vec![p.tuple.join(" "), fmt_half(p.x), fmt_half(p.y)]);
            }
            t
        }
        ExperimentKind::Reconstruct => {
            let map = cfg.load_map(ctx.cs.presentation())?;
            let s = ctx.space();
            let mode = cfg.reconstruct_mode;
            let interior_radius = cfg.interior_radius.unwrap_or(ctx.cs.radius() / 4);
            let interior = interior_vertices(ctx.cs, interior_radius);
            let r_hat = coverage_radius(s, &interior, mode)?;
            ctx.record("R_hat", r_hat as f64, interior.len())?;
            let f = induced(&map, ctx.cs, ctx.cs);
            let rec = reconstruct_qi(
                &*f,
                s,
                s,
                ReconstructOptions { mode, interior_radius, coverage_radius: r_hat, reference: Some(&map) },
            )?;
            let d_hat = rec.round_trip.unwrap_or(0);
            ctx.record("D_hat", d_hat as f64, rec.points.len())?;
            ctx.record("K_cusp", rec.cusp.unwrap_or(0) as f64, rec.points.len())?;
            metrics.insert("lambda".into(), rec.qi.lambda);
            metrics.insert("epsilon".into(), rec.qi.epsilon);
            metrics.insert("qi_pairs".into(), rec.qi.pairs as f64);
            metrics.insert("interior_radius".into(), interior_radius as f64);
            let mut t = Table::new(&["x", "image", "reference", "distance", "ring"]);
            for p in &rec.points {
                t.rows.push(vec![
                    p.x.to_string(),
                    p.image.to_string(),
                    p.reference.as_ref().map(|w| w.to_string()).unwrap_or_default(),
                    p.distance.map(|d| d.to_string()).unwrap_or_default(),
                    p.ring.to_string(),
                ]);
            }
            t
        }
        ExperimentKind::Stability => unreachable!("stability runs are composed in execute"),
    };
    Ok(KindOutput { fits, metrics, table })
}

/// Runs an experiment without writing files.
pub fn execute(cfg: &ExperimentConfig) -> Result<(Report, Table)> {
    let started = Instant::now();
    let p = cfg.load_presentation()?;
    cfg.validate(&p)?;
    if cfg.kind.needs_map() {
        cfg.load_map(&p)?;
    }
    if cfg.kind == ExperimentKind::Stability {
        return execute_stability(cfg, started);
    }
    let cs = build_space(cfg, cfg.radius)?;
    if let Some(path) = &cfg.export_space {
        cs.export(path)?;
    }
    let (report, table) = execute_on(cfg, &cs, cfg.kind)?;
    Ok((Report { wall_clock_seconds: started.elapsed().as_secs_f64(), ..report }, table))
}

/// Runs one experiment kind on an already built space.
pub fn execute_on(cfg: &ExperimentConfig, cs: &CuspedSpace, kind: ExperimentKind) -> Result<(Report, Table)> {
    let mut ledger = ConstantsLedger::new();
    let mut delta_table = None;
    let mut flag_fraction = 0.0;
    let delta = match cfg.delta {
        Some(d) if kind != ExperimentKind::Delta => d,
        _ => {
            let est = estimate_delta(cs, cfg.delta_samples, cfg.min_separation, cfg.seed)?;
            for (name, value) in [("delta", est.max_slimness), ("thinness", est.max_thinness)] {
                ledger.record(LedgerEntry {
                    name: name.into(),
                    max: value as f64,
                    samples: est.samples as u64,
                    radius: cs.radius(),
                    depth: cs.depth(),
                    seed: cfg.seed,
                })?;
            }
            flag_fraction = est.flag_fraction;
            let mut t = Table::new(&["a", "b", "c", "slimness", "thinness", "flags"]);
            for tr in &est.triangles {
                t.rows.push(
                    [tr.a, tr.b, tr.c, tr.slimness, tr.thinness, tr.flags].iter().map(|v| v.to_string()).collect(),
                );
            }
            delta_table = Some(t);
            est.max_slimness
        }
    };
    let mut ctx = Context { cfg, cs, delta, ledger };
    let out = run_kind(&mut ctx, kind)?;
    let table = if kind == ExperimentKind::Delta { delta_table.expect("estimated above") } else { out.table };
    let report = Report {
        name: cfg.name.clone(),
        kind,
        config: cfg.clone(),
        space: summary(cs),
        delta,
        ledger: ctx.ledger,
        fits: out.fits,
        metrics: out.metrics,
        rows: table.rows.len(),
        points_file: None,
        flag_fraction,
        wall_clock_seconds: 0.0,
    };
    Ok((report, table))
}

fn summary(cs: &CuspedSpace) -> SpaceSummary {
    SpaceSummary {
        radius: cs.radius(),
        depth: cs.depth(),
        vertices: cs.len(),
        edges: cs.graph().edge_count(),
        horoballs: cs.horoballs().len(),
        presentation: cs.presentation().to_json(),
    }
}

fn execute_stability(cfg: &ExperimentConfig, started: Instant) -> Result<(Report, Table)> {
    let inner = cfg
        .stability_kind
        .ok_or_else(|| Error::Parse("stability runs need stability_kind".into()))?;
    if inner == ExperimentKind::Stability {
        return Err(Error::Parse("stability_kind cannot be stability".into()));
    }
    let large_radius = cfg.compare_radius.unwrap_or(cfg.radius + 2);
    if large_radius <= cfg.radius {
        return Err(Error::Precondition(format!("compare_radius {large_radius} must exceed R = {}", cfg.radius)));
    }
    let small_cs = build_space(cfg, cfg.radius)?;
    let (small, _) = execute_on(cfg, &small_cs, inner)?;
    drop(small_cs);
    let large_cfg = ExperimentConfig { radius: large_radius, ..cfg.clone() };
    let large_cs = build_space(&large_cfg, large_radius)?;
    if let Some(path) = &cfg.export_space {
        large_cs.export(path)?;
    }
    let (large, _) = execute_on(&large_cfg, &large_cs, inner)?;
    let drift = compare_runs(&small, &large)?;

    let mut ledger = small.ledger.clone();
    ledger.merge(&large.ledger);
    let mut fits = BTreeMap::new();
    for (k, v) in &small.fits {
        fits.insert(format!("{k}@R{}", cfg.radius), *v);
    }
    for (k, v) in &large.fits {
        fits.insert(format!("{k}@R{large_radius}"), *v);
    }
    let mut metrics = BTreeMap::new();
    metrics.insert("max_constant_drift".into(), drift.max_constant_drift);
    metrics.insert("exceeded".into(), if drift.exceeded { 1.0 } else { 0.0 });
    let mut table = Table::new(&["quantity", "a", "b", "drift", "tolerance", "exceeded"]);
    for r in &drift.rows {
        table.rows.push(vec![
            r.quantity.clone(),
            r.a.to_string(),
            r.b.to_string(),
            r.drift.to_string(),
            r.tolerance.to_string(),
            r.exceeded.to_string(),
        ]);
    }
    let report = Report {
        name: cfg.name.clone(),
        kind: ExperimentKind::Stability,
        config: cfg.clone(),
        space: large.space.clone(),
        delta: small.delta.max(large.delta),
        ledger,
        fits,
        metrics,
        rows: table.rows.len(),
        points_file: None,
        flag_fraction: small.flag_fraction.max(large.flag_fraction),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    Ok((report, table))
}

/// Runs an experiment and writes `<name>.report.json` and `<name>.points.csv`
/// into the output directory, when one is configured.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    let (mut report, table) = execute(cfg)?;
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir)?;
        let points = format!("{}.points.csv", cfg.name);
        table.write(&dir.join(&points))?;
        report.points_file = Some(points);
        std::fs::write(dir.join(format!("{}.report.json", cfg.name)), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}

pub fn load_report(path: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read report {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("report {}: {e}", path.display())))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub quantity: String,
    pub a: f64,
    pub b: f64,
    pub drift: f64,
    pub tolerance: f64,
    pub exceeded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftSummary {
    pub rows: Vec<DriftRow>,
    pub max_constant_drift: f64,
    pub exceeded: bool,
}

/// Per-constant and per-fit drift between two reports of the same kind.
pub fn compare_runs(a: &Report, b: &Report) -> Result<DriftSummary> {
    if a.kind != b.kind {
        return Err(Error::KindMismatch(a.kind.name().into(), b.kind.name().into()));
    }
    if a.space.presentation != b.space.presentation {
        return Err(Error::PresentationMismatch("reports come from different presentations".into()));
    }
    let tol = a.config.tolerances;
    let mut rows = Vec::new();
    let mut push = |quantity: String, x: f64, y: f64, tolerance: f64| {
        let drift = (x - y).abs();
        rows.push(DriftRow { quantity, a: x, b: y, drift, tolerance, exceeded: drift > tolerance });
    };
    let names: std::collections::BTreeSet<&str> = a.ledger.entries().map(|e| e.name.as_str()).collect();
    for name in names {
        if let (Some(x), Some(y)) = (a.ledger.get(name), b.ledger.get(name)) {
            push(name.to_string(), x.max, y.max, tol.constant);
        }
    }
    for (k, fa) in &a.fits {
        if let Some(fb) = b.fits.get(k) {
            push(format!("{k}.A"), fa.a, fb.a, tol.slope);
            push(format!("{k}.B"), fa.b, fb.b, tol.intercept);
        }
    }
    let max_constant_drift = rows
        .iter()
        .filter(|r| !r.quantity.contains('.'))
        .map(|r| r.drift)
        .fold(0.0, f64::max);
    let exceeded = rows.iter().any(|r| r.exceeded);
    Ok(DriftSummary { rows, max_constant_drift, exceeded })
}
