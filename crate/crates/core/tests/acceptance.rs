//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! they run sequentially in one test so the timings are not skewed by
//! sibling tests sharing the CPU.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use horolab_core::coarse::{quasi_projection, CenterSearch};
use horolab_core::cusped::build_horoball;
use horolab_core::distortion::ReconstructMode;
use horolab_core::experiment::{build_space, execute_on, ExperimentConfig, ExperimentKind, Report};
use horolab_core::hyperbolicity::{estimate_delta, gromov_product};
use horolab_core::{CuspedSpace, HalfInt, Presentation, Word};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CONSTANT_DRIFT: f64 = 2.0;
const SLOPE_DRIFT: f64 = 0.5;
const INTERCEPT_DRIFT: f64 = 4.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Cusped punctured-torus spaces and their δ̂, built once per (R, D).
struct Lab {
    spaces: HashMap<(usize, u32), (CuspedSpace, u32)>,
    reports: HashMap<(ExperimentKind, usize, u32, String, ReconstructMode), Report>,
}

impl Lab {
    fn new() -> Self {
        Lab { spaces: HashMap::new(), reports: HashMap::new() }
    }

    fn base(radius: usize, depth: u32) -> ExperimentConfig {
        ExperimentConfig { radius, depth: Some(depth), threshold: Some(2), seed: 1, ..Default::default() }
    }

    fn space(&mut self, radius: usize, depth: u32) -> &(CuspedSpace, u32) {
        self.spaces.entry((radius, depth)).or_insert_with(|| {
            let cfg = Self::base(radius, depth);
            let cs = build_space(&cfg, radius).unwrap();
            let delta = estimate_delta(&cs, cfg.delta_samples, cfg.min_separation, cfg.seed).unwrap().delta();
            (cs, delta)
        })
    }

    fn delta(&mut self, radius: usize) -> u32 {
        self.space(radius, 4).1
    }

    fn run(&mut self, kind: ExperimentKind, radius: usize, depth: u32, samples: usize, map: &str, mode: ReconstructMode) -> Report {
        let key = (kind, radius, depth, map.to_string(), mode);
        if let Some(r) = self.reports.get(&key) {
            return r.clone();
        }
        let (cs, delta) = self.space(radius, depth);
        let cfg = ExperimentConfig {
            kind,
            samples,
            delta: Some(*delta),
            map: (!map.is_empty()).then(|| map.to_string()),
            reconstruct_mode: mode,
            ..Self::base(radius, depth)
        };
        let (report, _) = execute_on(&cfg, cs, kind).unwrap();
        self.reports.insert(key, report.clone());
        report
    }

    fn simple(&mut self, kind: ExperimentKind, radius: usize, samples: usize) -> Report {
        self.run(kind, radius, 4, samples, "", ReconstructMode::Centers)
    }
}

fn constant(r: &Report, name: &str) -> f64 {
    r.ledger.get(name).unwrap_or_else(|| panic!("{name} missing from ledger")).max
}

fn horoball_law() -> Outcome {
    let metric: Vec<Vec<u64>> = (0..33i64).map(|i| (0..33i64).map(|j| (i - j).unsigned_abs()).collect()).collect();
    let hb = build_horoball(&metric, 7).unwrap();
    let mut checked = 0;
    for k in 0..=5u32 {
        let d = 1usize << k;
        for x in 0..33 - d {
            for n in 0..=7u32 {
                let expected = if n <= k { 1u32 << (k - n) } else { 1 };
                if hb.horizontal_distance(x, x + d, n) != Some(expected) {
                    return outcome(false, format!("pair ({x},{}) at level {n}", x + d));
                }
                checked += 1;
            }
        }
    }
    outcome(true, format!("{checked} (pair, level) checks exact"))
}

fn tree_ground_truth() -> Outcome {
    let p = Presentation::free(2).unwrap();
    let cs = CuspedSpace::from_presentation(&p, 8, Some(1)).unwrap();
    let est = estimate_delta(&cs, 1000, 3, 7).unwrap();
    if est.delta() != 0 || est.samples != 1000 {
        return outcome(false, format!("δ̂ = {} over {} triangles", est.delta(), est.samples));
    }

    let words: Vec<Word> = (0..cs.len() as u32).map(|v| cs.base_word(v).clone()).collect();
    let on_geodesic = |m: &Word, a: &Word, b: &Word| m.distance(a) + m.distance(b) == a.distance(b);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let search = CenterSearch::new(0);
    for _ in 0..200 {
        let [a, b, c] = [0; 3].map(|_| rng.gen_range(0..cs.len() as u32));
        let median: Vec<u32> = (0..words.len() as u32)
            .filter(|&m| {
                let w = &words[m as usize];
                let [wa, wb, wc] = [a, b, c].map(|x| &words[x as usize]);
                on_geodesic(w, wa, wb) && on_geodesic(w, wb, wc) && on_geodesic(w, wa, wc)
            })
            .collect();
        let center = quasi_projection(&cs, &a, &b, &c, search).unwrap().vertex;
        if median != [center] {
            return outcome(false, format!("triple ({a},{b},{c}): center {center}, medians {median:?}"));
        }
    }

    let inner: Vec<u32> = (0..cs.len() as u32).filter(|&v| words[v as usize].len() <= 4).collect();
    let mut products = 0;
    for &a in &inner {
        for &b in &inner {
            let expected = HalfInt::from_int(words[a as usize].common_prefix_len(&words[b as usize]) as i64);
            if gromov_product(&cs, a, b, 0) != expected {
                return outcome(false, format!("Gromov product ({a},{b})"));
            }
            products += 1;
        }
    }
    outcome(true, format!("δ̂ = 0 on 1000 triangles; 200 medians; {products} Gromov products"))
}

fn drift_outcome(name: &str, small: f64, large: f64, tolerance: f64) -> Outcome {
    let drift = (small - large).abs();
    outcome(drift <= tolerance, format!("{name}: R=8 {small}, R=10 {large}, drift {drift} (≤ {tolerance})"))
}

fn stable_constant(lab: &mut Lab, kind: ExperimentKind, name: &str, samples: usize) -> Outcome {
    let small = lab.simple(kind, 8, samples);
    let large = lab.simple(kind, 10, samples);
    drift_outcome(name, constant(&small, name), constant(&large, name), CONSTANT_DRIFT)
}

fn relative_cross_ratio(lab: &mut Lab) -> Outcome {
    let small = lab.simple(ExperimentKind::RelativeCr, 8, 300);
    let large = lab.simple(ExperimentKind::RelativeCr, 10, 300);
    let mut notes = Vec::new();
    let mut pass = true;
    for key in ["r_to_center", "center_to_r"] {
        let (a, b) = (small.fits[key], large.fits[key]);
        let drift = (a.b - b.b).abs();
        pass &= drift <= INTERCEPT_DRIFT && a.max_residual <= 1e-9 && b.max_residual <= 1e-9;
        notes.push(format!("{key}: B {:.3} → {:.3}", a.b, b.b));
    }
    outcome(pass, notes.join("; "))
}

fn exit_sets(lab: &mut Lab) -> Outcome {
    let mut values = Vec::new();
    for radius in [8, 10] {
        for depth in [3, 4] {
            let r = lab.run(ExperimentKind::ExitSets, radius, depth, 300, "", ReconstructMode::Centers);
            values.push(((radius, depth), constant(&r, "C1")));
        }
    }
    let lo = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let hi = values.iter().map(|v| v.1).fold(0.0, f64::max);
    outcome(hi - lo <= CONSTANT_DRIFT, format!("Ĉ₁ over (R,D): {values:?}"))
}

fn fits_stable(small: &Report, large: &Report, keys: &[&str], notes: &mut Vec<String>) -> bool {
    let mut pass = true;
    for &key in keys {
        let (a, b) = (small.fits[key], large.fits[key]);
        pass &= (a.a - b.a).abs() <= SLOPE_DRIFT && (a.b - b.b).abs() <= INTERCEPT_DRIFT;
        pass &= a.max_residual <= 1e-9 && b.max_residual <= 1e-9;
        notes.push(format!("{key} ({:.2},{:.2})→({:.2},{:.2})", a.a, a.b, b.a, b.b));
    }
    pass
}

fn identity_fit(r: &Report, bound: f64, notes: &mut Vec<String>) -> bool {
    let mut pass = true;
    for key in ["forward", "inverse"] {
        let f = r.fits[key];
        pass &= f.a <= 1.1 && f.b <= bound;
        notes.push(format!("id {key} ({:.2},{:.2})", f.a, f.b));
    }
    pass
}

fn map_run(lab: &mut Lab, kind: ExperimentKind, radius: usize, samples: usize, map: &str) -> Report {
    lab.run(kind, radius, 4, samples, map, ReconstructMode::Centers)
}

fn quasi_mobius(lab: &mut Lab) -> Outcome {
    let small = map_run(lab, ExperimentKind::Qm, 8, 400, "dehn-twist");
    let large = map_run(lab, ExperimentKind::Qm, 10, 400, "dehn-twist");
    let mut notes = Vec::new();
    let mut pass = fits_stable(&small, &large, &["forward", "inverse"], &mut notes);
    let delta = lab.delta(8) as f64;
    pass &= identity_fit(&map_run(lab, ExperimentKind::Qm, 8, 400, "identity"), 2.0 * delta, &mut notes);
    outcome(pass, notes.join("; "))
}

fn relative_quasi_mobius(lab: &mut Lab) -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let c1 = constant(&lab.simple(ExperimentKind::ExitSets, 8, 300), "C1");
    let bound = (2.0 * lab.delta(8) as f64).max(c1);
    for kind in [ExperimentKind::RelativeQm, ExperimentKind::ExitDistortion] {
        let small = map_run(lab, kind, 8, 300, "dehn-twist");
        let large = map_run(lab, kind, 10, 300, "dehn-twist");
        notes.push(format!("{}:", kind.name()));
        pass &= fits_stable(&small, &large, &["forward", "inverse"], &mut notes);
        pass &= identity_fit(&map_run(lab, kind, 8, 300, "identity"), bound, &mut notes);
    }
    outcome(pass, notes.join(" "))
}

fn reconstruction(lab: &mut Lab) -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for mode in [ReconstructMode::Centers, ReconstructMode::Exits] {
        let [small, large] = [8, 10].map(|r| lab.run(ExperimentKind::Reconstruct, r, 4, 300, "dehn-twist", mode));
        let (d8, d10) = (constant(&small, "D_hat"), constant(&large, "D_hat"));
        let finite = [&small, &large]
            .iter()
            .all(|r| r.metrics["lambda"].is_finite() && r.metrics["epsilon"].is_finite() && r.metrics["qi_pairs"] > 0.0);
        pass &= (d8 - d10).abs() <= CONSTANT_DRIFT && finite;
        notes.push(format!(
            "{mode:?}: D̂ {d8}→{d10}, (λ̂,ε̂) = ({:.2},{:.2})",
            large.metrics["lambda"], large.metrics["epsilon"]
        ));
    }
    outcome(pass, notes.join("; "))
}

fn probes(lab: &mut Lab) -> Outcome {
    let small = lab.simple(ExperimentKind::RelativeCr, 8, 300);
    let large = lab.simple(ExperimentKind::RelativeCr, 10, 300);
    let k3 = drift_outcome("K̂₃", constant(&small, "K3"), constant(&large, "K3"), CONSTANT_DRIFT);
    let k1 = drift_outcome("K̂₁", constant(&small, "K1"), constant(&large, "K1"), CONSTANT_DRIFT);
    outcome(k3.pass && k1.pass, format!("{}; {}", k3.detail, k1.detail))
}

fn determinism() -> Outcome {
    let kinds = [
        (ExperimentKind::Delta, None),
        (ExperimentKind::CrossRatio, None),
        (ExperimentKind::OneOfThree, None),
        (ExperimentKind::RelativeCr, None),
        (ExperimentKind::ExitSets, None),
        (ExperimentKind::Qm, Some("dehn-twist")),
        (ExperimentKind::RelativeQm, Some("dehn-twist")),
        (ExperimentKind::ExitDistortion, Some("dehn-twist")),
        (ExperimentKind::Reconstruct, Some("dehn-twist")),
    ];
    let cfg = ExperimentConfig { radius: 6, depth: Some(3), samples: 40, delta_samples: 60, probe_samples: 10, ..Default::default() };
    let cs = build_space(&cfg, 6).unwrap();
    for (kind, map) in kinds {
        let cfg = ExperimentConfig { kind, map: map.map(String::from), ..cfg.clone() };
        let (a, ta) = execute_on(&cfg, &cs, kind).unwrap();
        let fresh = build_space(&cfg, 6).unwrap();
        let (b, tb) = execute_on(&cfg, &fresh, kind).unwrap();
        if a.canonical_json() != b.canonical_json() || ta != tb {
            return outcome(false, format!("{} differs between runs", kind.name()));
        }
    }
    outcome(true, format!("{} experiment kinds reproduce report and point cloud", kinds.len()))
}

#[test]
fn acceptance_criteria() {
    let mut lab = Lab::new();
    type Check<'a> = Box<dyn FnMut(&mut Lab) -> Outcome + 'a>;
    let criteria: Vec<(&str, Option<Duration>, Check)> = vec![
        ("horoball law", Some(Duration::from_secs(1)), Box::new(|_| horoball_law())),
        ("tree ground truth", Some(Duration::from_secs(30)), Box::new(|_| tree_ground_truth())),
        (
            "cross-ratio vs quasi-centers",
            Some(Duration::from_secs(300)),
            Box::new(|lab| stable_constant(lab, ExperimentKind::CrossRatio, "C5", 500)),
        ),
        ("one of three cross-ratios", None, Box::new(|lab| stable_constant(lab, ExperimentKind::OneOfThree, "C6", 500))),
        ("relative cross-ratio", None, Box::new(relative_cross_ratio)),
        ("exit-set boundedness", None, Box::new(exit_sets)),
        ("quasi-Möbius distortion", None, Box::new(quasi_mobius)),
        ("relative quasi-Möbius and exit distortion", None, Box::new(relative_quasi_mobius)),
        ("reconstruction round trip", Some(Duration::from_secs(600)), Box::new(reconstruction)),
        ("visual boundedness and bounded projection", None, Box::new(probes)),
        ("determinism", None, Box::new(|_| determinism())),
    ];
    let mut failures = Vec::new();
    for (i, (name, limit, mut check)) in criteria.into_iter().enumerate() {
        let started = Instant::now();
        let out = check(&mut lab);
        let elapsed = started.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let pass = out.pass && in_time;
        let limit_note = limit.map(|l| format!(" (limit {}s)", l.as_secs())).unwrap_or_default();
        println!(
            "criterion {:>2} {}: {name} — {} [{:.1}s{limit_note}]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64()
        );
        if !pass {
            failures.push(i + 1);
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
