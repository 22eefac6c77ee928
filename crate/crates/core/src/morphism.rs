//! Group maps given on generators, and what they induce on cusps and on
//! boundary proxies.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cusped::CuspedSpace;
use crate::error::{Error, Result};
use crate::group::{coset_members, distance_to_coset, CosetId, Generator, Presentation, Word};
use crate::proxy::{BoundaryProxy, ProxyKind};

/// How a source peripheral generator `h` lands in the target:
/// `φ(h) = c · h'^power · c⁻¹` with `h'` the generator of target peripheral `dst`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeripheralMatch {
    pub src: usize,
    pub dst: usize,
    pub power: i64,
    #[serde(default)]
    pub conjugator: Word,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorMap {
    source: Presentation,
    target: Presentation,
    images: Vec<Word>,
    matches: Vec<PeripheralMatch>,
    /// Right multiplier: `apply(w) = φ(w)·t`, a bounded perturbation of φ.
    translation: Word,
}

#[derive(Serialize, Deserialize)]
struct MapFile {
    images: BTreeMap<char, Word>,
    #[serde(default)]
    peripheral_match: Vec<PeripheralMatch>,
    #[serde(default)]
    translation: Word,
}

impl GeneratorMap {
    pub fn new(
        source: Presentation,
        target: Presentation,
        images: Vec<Word>,
        matches: Vec<PeripheralMatch>,
    ) -> Result<Self> {
        if images.len() != source.rank() as usize {
            return Err(Error::UnsupportedMap(format!(
                "{} images for {} source generators",
                images.len(),
                source.rank()
            )));
        }
        for w in &images {
            target.check_word(w)?;
        }
        let map = GeneratorMap { source, target, images, matches, translation: Word::identity() };
        for m in &map.matches {
            map.check_match(m)?;
        }
        Ok(map)
    }

    fn check_match(&self, m: &PeripheralMatch) -> Result<()> {
        let h = self
            .source
            .peripherals()
            .get(m.src)
            .ok_or_else(|| Error::Correspondence(format!("no source peripheral {}", m.src)))?;
        if h.len() != 1 {
            return Err(Error::UnsupportedPeripheral(format!("source peripheral {} is not cyclic", m.src)));
        }
        let target_h = self.target.cyclic_generator(m.dst).map_err(|_| {
            Error::Correspondence(format!("no cyclic target peripheral {}", m.dst))
        })?;
        self.target.check_word(&m.conjugator)?;
        let expected = m.conjugator.mul(&target_h.pow(m.power)).mul(&m.conjugator.inverse());
        let got = self.hom(&h[0]);
        if m.power == 0 || got != expected {
            return Err(Error::Correspondence(format!(
                "peripheral {} maps to {got}, not to {expected}",
                m.src
            )));
        }
        Ok(())
    }

    /// Reads the JSON map file format `{"images": {"a": "a", "b": "ba"}, "peripheral_match": [...]}`.
    pub fn from_json(text: &str, source: Presentation, target: Presentation) -> Result<Self> {
        let file: MapFile = serde_json::from_str(text)?;
        let mut images = Vec::with_capacity(source.rank() as usize);
        for i in 0..source.rank() {
            let letter = Generator::new(i, false).to_char();
            let image = file
                .images
                .get(&letter)
                .ok_or_else(|| Error::Parse(format!("map file has no image for generator {letter}")))?;
            images.push(image.clone());
        }
        if file.images.len() != source.rank() as usize {
            return Err(Error::Parse(format!("map file has images for letters outside rank {}", source.rank())));
        }
        let map = Self::new(source, target, images, file.peripheral_match)?;
        map.with_translation(file.translation)
    }

    pub fn load(path: &Path, source: Presentation, target: Presentation) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read map file {}: {e}", path.display())))?;
        Self::from_json(&text, source, target)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let images: BTreeMap<char, Word> = self
            .images
            .iter()
            .enumerate()
            .map(|(i, w)| (Generator::new(i as u8, false).to_char(), w.clone()))
            .collect();
        serde_json::to_value(MapFile {
            images,
            peripheral_match: self.matches.clone(),
            translation: self.translation.clone(),
        })
        .expect("map serializes")
    }

    pub fn identity(p: &Presentation) -> Self {
        let images = (0..p.rank()).map(|i| Word::reduced([Generator::new(i, false)])).collect();
        let matches = (0..p.peripherals().len())
            .map(|i| PeripheralMatch { src: i, dst: i, power: 1, conjugator: Word::identity() })
            .collect();
        Self::new(p.clone(), p.clone(), images, matches).expect("the identity is a valid map")
    }

    pub fn with_translation(mut self, t: Word) -> Result<Self> {
        self.target.check_word(&t)?;
        self.translation = t;
        Ok(self)
    }

    pub fn source(&self) -> &Presentation {
        &self.source
    }

    pub fn target(&self) -> &Presentation {
        &self.target
    }

    pub fn images(&self) -> &[Word] {
        &self.images
    }

    pub fn matches(&self) -> &[PeripheralMatch] {
        &self.matches
    }

    pub fn translation(&self) -> &Word {
        &self.translation
    }

    pub fn peripheral_match(&self, src: usize) -> Result<&PeripheralMatch> {
        self.matches
            .iter()
            .find(|m| m.src == src)
            .ok_or_else(|| Error::Correspondence(format!("source peripheral {src} has no match")))
    }

    /// The homomorphic part `φ(w)`.
    pub fn hom(&self, w: &Word) -> Word {
        let letters = w.letters().iter().flat_map(|g| {
            let image = &self.images[g.index() as usize];
            if g.is_inverse() {
                image.inverse().letters().to_vec()
            } else {
                image.letters().to_vec()
            }
        });
        Word::reduced(letters)
    }

    /// `φ(w)·t`, freely reduced.
    pub fn apply(&self, w: &Word) -> Word {
        self.hom(w).mul(&self.translation)
    }

    /// `self ∘ first`.
    pub fn compose(&self, first: &GeneratorMap) -> Result<GeneratorMap> {
        if first.target != self.source {
            return Err(Error::PresentationMismatch("composition needs matching presentations".into()));
        }
        let images = first.images.iter().map(|w| self.hom(w)).collect();
        let mut matches = Vec::new();
        for m1 in &first.matches {
            if let Ok(m2) = self.peripheral_match(m1.dst) {
                matches.push(PeripheralMatch {
                    src: m1.src,
                    dst: m2.dst,
                    power: m1.power * m2.power,
                    conjugator: self.hom(&m1.conjugator).mul(&m2.conjugator),
                });
            }
        }
        let map = GeneratorMap::new(first.source.clone(), self.target.clone(), images, matches)?;
        map.with_translation(self.hom(&first.translation).mul(&self.translation))
    }
}

/// The transvection `a ↦ a, b ↦ b·aᵏ` on the punctured torus group.
pub fn dehn_twist_power(p: &Presentation, k: i64) -> Result<GeneratorMap> {
    if *p != Presentation::punctured_torus() {
        return Err(Error::UnsupportedMap(
            "the Dehn twist is defined for F(a,b) with peripheral ⟨abAB⟩".into(),
        ));
    }
    let a: Word = "a".parse().expect("letter");
    let b: Word = "b".parse().expect("letter");
    let images = vec![a.clone(), b.mul(&a.pow(k))];
    let matches = vec![PeripheralMatch { src: 0, dst: 0, power: 1, conjugator: Word::identity() }];
    GeneratorMap::new(p.clone(), p.clone(), images, matches)
}

/// `a ↦ a, b ↦ ba`.
pub fn dehn_twist_map(p: &Presentation) -> Result<GeneratorMap> {
    dehn_twist_power(p, 1)
}

#[derive(Clone, Debug, Serialize)]
pub struct CosetDistance {
    pub coset: CosetId,
    /// `φ(rep)·c`, a member of the matched target coset.
    pub matched: Word,
    pub max_distance: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CuspPreservationReport {
    pub per_coset: Vec<CosetDistance>,
    pub max: usize,
}

/// For every peripheral coset meeting the source ball, the largest word
/// distance from an image of one of its ball vertices to the matched coset.
pub fn cusp_preservation_report(
    map: &GeneratorMap,
    cs_x: &CuspedSpace,
    cs_y: &CuspedSpace,
) -> Result<CuspPreservationReport> {
    if cs_x.presentation() != map.source() || cs_y.presentation() != map.target() {
        return Err(Error::PresentationMismatch("spaces do not match the map".into()));
    }
    let mut per_coset = Vec::with_capacity(cs_x.horoballs().len());
    let mut max = 0;
    for hb in cs_x.horoballs() {
        let m = map.peripheral_match(hb.coset.peripheral_index)?;
        let h = map.target().cyclic_generator(m.dst)?;
        let g = map.hom(&hb.coset.representative).mul(&m.conjugator);
        let worst = hb
            .base
            .iter()
            .map(|&v| distance_to_coset(&map.apply(cs_x.base_word(v)), &g, h))
            .max()
            .unwrap_or(0);
        max = max.max(worst);
        per_coset.push(CosetDistance { coset: hb.coset.clone(), matched: g, max_distance: worst });
    }
    Ok(CuspPreservationReport { per_coset, max })
}

/// The boundary map induced on proxies. A conical word is read as the ray
/// that continues in its last letter; its image is cut at the target sphere.
pub fn induced_proxy_map(
    map: &GeneratorMap,
    cs_x: &CuspedSpace,
    cs_y: &CuspedSpace,
    p: &BoundaryProxy,
) -> Result<BoundaryProxy> {
    let ry = cs_y.radius();
    match &p.kind {
        ProxyKind::Conical { word } => {
            let last = word.last().ok_or_else(|| Error::InvalidProxy("empty conical word".into()))?;
            let mut letters = word.letters().to_vec();
            letters.resize(word.len() + ry, last);
            let image = map.apply(&Word::reduced(letters));
            if image.len() < ry {
                return Err(Error::ShortImage(format!("{p} maps to {image}, shorter than R = {ry}")));
            }
            BoundaryProxy::conical(cs_y, image.prefix(ry))
        }
        ProxyKind::Parabolic { coset } => {
            if cs_x.horoball_by_coset(coset).is_none() {
                return Err(Error::InvalidProxy(format!("{p} has no horoball in the source space")));
            }
            let m = map.peripheral_match(coset.peripheral_index)?;
            let h = map.target().cyclic_generator(m.dst)?;
            let g = map.hom(&coset.representative).mul(&m.conjugator);
            let (_, member) = coset_members(&g, h, ry)
                .into_iter()
                .next()
                .ok_or_else(|| Error::ShortImage(format!("coset {g}⟨{h}⟩ misses the target ball")))?;
            let v = cs_y.vertex_of_word(&member).expect("member lies in the ball");
            let image = cs_y.coset_of(m.dst, v).expect("every coset meeting the ball has a horoball").clone();
            BoundaryProxy::parabolic(cs_y, image)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::coset_id;
    use proptest::prelude::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn torus() -> Presentation {
        Presentation::punctured_torus()
    }

    #[test]
    fn dehn_twist_fixes_the_commutator() {
        let t = dehn_twist_map(&torus()).unwrap();
        assert_eq!(t.apply(&w("abAB")), w("abAB"));
        assert_eq!(t.apply(&w("b")), w("ba"));
        assert_eq!(t.apply(&Word::identity()), Word::identity());
        for k in -3..=3 {
            let c = w("abAB").pow(k);
            assert_eq!(t.apply(&c), c);
        }
    }

    #[test]
    fn iterated_twist_and_inverse() {
        let p = torus();
        let t = dehn_twist_map(&p).unwrap();
        let t2 = t.compose(&t).unwrap();
        assert_eq!(t2.apply(&w("b")), w("baa"));
        assert_eq!(t2, dehn_twist_power(&p, 2).unwrap());
        let inv = dehn_twist_power(&p, -1).unwrap();
        assert_eq!(inv.compose(&t).unwrap(), GeneratorMap::identity(&p));
        assert_eq!(t.compose(&inv).unwrap(), GeneratorMap::identity(&p));
    }

    #[test]
    fn identity_map_is_the_identity() {
        let id = GeneratorMap::identity(&torus());
        for s in ["", "a", "abAB", "BBaab"] {
            assert_eq!(id.apply(&w(s)), w(s));
        }
    }

    #[test]
    fn twist_needs_the_punctured_torus() {
        let err = dehn_twist_map(&Presentation::free(2).unwrap()).unwrap_err();
        assert!(matches!(err, Error::UnsupportedMap(_)));
    }

    #[test]
    fn bad_peripheral_match_is_rejected() {
        let p = torus();
        let images = vec![w("b"), w("a")];
        let matches = vec![PeripheralMatch { src: 0, dst: 0, power: 1, conjugator: Word::identity() }];
        // a↔b sends abAB to baBA = (abAB)⁻¹, so power 1 is wrong and power −1 is right.
        assert!(matches!(
            GeneratorMap::new(p.clone(), p.clone(), images.clone(), matches),
            Err(Error::Correspondence(_))
        ));
        let matches = vec![PeripheralMatch { src: 0, dst: 0, power: -1, conjugator: Word::identity() }];
        assert!(GeneratorMap::new(p.clone(), p, images, matches).is_ok());
    }

    #[test]
    fn map_file_round_trip() {
        let p = torus();
        let text = r#"{"images": {"a": "a", "b": "ba"}, "peripheral_match": [{"src": 0, "dst": 0, "power": 1, "conjugator": ""}]}"#;
        let m = GeneratorMap::from_json(text, p.clone(), p.clone()).unwrap();
        assert_eq!(m, dehn_twist_map(&p).unwrap());
        let again = GeneratorMap::from_json(&m.to_json().to_string(), p.clone(), p.clone()).unwrap();
        assert_eq!(again, m);
        assert!(matches!(GeneratorMap::from_json(r#"{"images": {"a": "a"}}"#, p.clone(), p), Err(Error::Parse(_))));
    }

    proptest! {
        #[test]
        fn apply_is_a_homomorphism(u in "[aAbB]{0,12}", v in "[aAbB]{0,12}") {
            let t = dehn_twist_map(&torus()).unwrap();
            let (u, v) = (w(&u), w(&v));
            prop_assert_eq!(t.apply(&u.mul(&v)), t.apply(&u).mul(&t.apply(&v)));
        }
    }

    fn spaces(radius: usize) -> CuspedSpace {
        CuspedSpace::from_presentation(&torus(), radius, Some(3)).unwrap()
    }

    #[test]
    fn cusp_preservation_examples() {
        let cs = spaces(6);
        let id = GeneratorMap::identity(&torus());
        assert_eq!(cusp_preservation_report(&id, &cs, &cs).unwrap().max, 0);

        let t = dehn_twist_map(&torus()).unwrap();
        let report = cusp_preservation_report(&t, &cs, &cs).unwrap();
        let identity_coset = report.per_coset.iter().find(|c| c.coset.representative.is_empty()).unwrap();
        assert_eq!(identity_coset.max_distance, 0);
        // Membership oracle: images of [a,b]^k are [a,b]^k.
        for k in -1..=1 {
            assert_eq!(w("abAB").pow(k).exponent_in(&w("abAB")), Some(k));
        }

        for g in ["a", "bA", "abb"] {
            let shifted = id.clone().with_translation(w(g)).unwrap();
            let r = cusp_preservation_report(&shifted, &cs, &cs).unwrap();
            assert!(r.max <= g.len(), "{g}: {}", r.max);
        }
    }

    #[test]
    fn unmatched_peripheral_is_a_correspondence_error() {
        let p = torus();
        let m = GeneratorMap::new(p.clone(), p.clone(), vec![w("a"), w("b")], vec![]).unwrap();
        let cs = spaces(4);
        assert!(matches!(cusp_preservation_report(&m, &cs, &cs), Err(Error::Correspondence(_))));
    }

    #[test]
    fn induced_proxy_map_examples() {
        let cs = spaces(6);
        let t = dehn_twist_map(&torus()).unwrap();
        let identity = BoundaryProxy::parabolic(&cs, cs.coset_of(0, 0).unwrap().clone()).unwrap();
        assert_eq!(induced_proxy_map(&t, &cs, &cs, &identity).unwrap(), identity);

        let a = BoundaryProxy::conical(&cs, w("aaaaaa")).unwrap();
        assert_eq!(induced_proxy_map(&t, &cs, &cs, &a).unwrap().word(), &w("aaaaaa"));
        let b = BoundaryProxy::conical(&cs, w("bbbbbb")).unwrap();
        assert_eq!(induced_proxy_map(&t, &cs, &cs, &b).unwrap().word(), &w("bababa"));

        // The coset of b maps to the coset of φ(b) = ba.
        let vb = cs.vertex_of_word(&w("b")).unwrap();
        let pb = BoundaryProxy::parabolic(&cs, cs.coset_of(0, vb).unwrap().clone()).unwrap();
        let image = induced_proxy_map(&t, &cs, &cs, &pb).unwrap();
        assert_eq!(image.coset(), Some(&coset_id(&torus(), &w("ba"), 0, 6).unwrap()));
    }

    #[test]
    fn collapsing_map_gives_short_images() {
        let p = Presentation::free(2).unwrap();
        let kill = GeneratorMap::new(p.clone(), p.clone(), vec![w("a"), Word::identity()], vec![]).unwrap();
        let cs = CuspedSpace::from_presentation(&p, 4, Some(1)).unwrap();
        let q = BoundaryProxy::conical(&cs, w("bbbb")).unwrap();
        assert!(matches!(induced_proxy_map(&kill, &cs, &cs, &q), Err(Error::ShortImage(_))));
    }
}
