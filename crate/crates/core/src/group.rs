//! Free-group words, cyclic peripheral subgroups and their left cosets.
//!
//! Letters are encoded as ASCII: lowercase `a..z` are generators, uppercase
//! `A..Z` their inverses. Shortlex order uses `a < A < b < B < …`.

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Generator(u8);

impl Generator {
    pub fn new(index: u8, inverse: bool) -> Self {
        Generator(index * 2 + inverse as u8)
    }

    pub fn index(self) -> u8 {
        self.0 / 2
    }

    pub fn is_inverse(self) -> bool {
        self.0 % 2 == 1
    }

    pub fn inverse(self) -> Self {
        Generator(self.0 ^ 1)
    }

    /// Position in the shortlex alphabet `a, A, b, B, …`.
    pub fn code(self) -> u8 {
        self.0
    }

    pub fn from_code(code: u8) -> Self {
        Generator(code)
    }

    pub fn from_char(c: char) -> Result<Self> {
        match c {
            'a'..='z' => Ok(Generator::new(c as u8 - b'a', false)),
            'A'..='Z' => Ok(Generator::new(c as u8 - b'A', true)),
            _ => Err(Error::Parse(format!("invalid letter {c:?}"))),
        }
    }

    pub fn to_char(self) -> char {
        let base = if self.is_inverse() { b'A' } else { b'a' };
        (base + self.index()) as char
    }
}

/// A freely reduced word; the empty word is the identity.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Word(Vec<Generator>);

fn push_reduced(buf: &mut Vec<Generator>, g: Generator) {
    if buf.last() == Some(&g.inverse()) {
        buf.pop();
    } else {
        buf.push(g);
    }
}

impl Word {
    pub fn identity() -> Self {
        Word(Vec::new())
    }

    /// Freely reduces an arbitrary letter sequence. Does not check the rank.
    pub fn reduced(letters: impl IntoIterator<Item = Generator>) -> Self {
        let mut buf = Vec::new();
        for g in letters {
            push_reduced(&mut buf, g);
        }
        Word(buf)
    }

    /// Wraps letters already known to be reduced.
    pub(crate) fn from_reduced_unchecked(letters: Vec<Generator>) -> Self {
        debug_assert!(letters.windows(2).all(|w| w[0] != w[1].inverse()));
        Word(letters)
    }

    pub fn letters(&self) -> &[Generator] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<Generator> {
        self.0.last().copied()
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|g| g.inverse()).collect())
    }

    pub fn mul(&self, rhs: &Word) -> Word {
        let mut buf = self.0.clone();
        for &g in &rhs.0 {
            push_reduced(&mut buf, g);
        }
        Word(buf)
    }

    /// Appends one letter, reducing.
    pub fn times(&self, g: Generator) -> Word {
        let mut buf = self.0.clone();
        push_reduced(&mut buf, g);
        Word(buf)
    }

    pub fn pow(&self, k: i64) -> Word {
        let base = if k < 0 { self.inverse() } else { self.clone() };
        (0..k.unsigned_abs()).fold(Word::identity(), |acc, _| acc.mul(&base))
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n.min(self.0.len())].to_vec())
    }

    /// Length of the longest common prefix.
    pub fn common_prefix_len(&self, other: &Word) -> usize {
        self.0.iter().zip(&other.0).take_while(|(a, b)| a == b).count()
    }

    /// Word-metric distance `|u⁻¹v|` in the free group.
    pub fn distance(&self, other: &Word) -> usize {
        let c = self.common_prefix_len(other);
        self.len() + other.len() - 2 * c
    }

    pub fn max_index(&self) -> Option<u8> {
        self.0.iter().map(|g| g.index()).max()
    }

    /// Splits `self = c·k·c⁻¹` with `k` cyclically reduced; returns `(|c|, |k|)`.
    pub fn cyclic_core(&self) -> (usize, usize) {
        let n = self.0.len();
        let mut c = 0;
        while 2 * c + 1 < n && self.0[c] == self.0[n - 1 - c].inverse() {
            c += 1;
        }
        (c, n - 2 * c)
    }

    /// Returns `k` with `self = h^k`, if any.
    pub fn exponent_in(&self, h: &Word) -> Option<i64> {
        if self.is_empty() {
            return Some(0);
        }
        let (c, core) = h.cyclic_core();
        if core == 0 || self.len() < 2 * c || !(self.len() - 2 * c).is_multiple_of(core) {
            return None;
        }
        let k = ((self.len() - 2 * c) / core) as i64;
        [k, -k].into_iter().find(|&e| &h.pow(e) == self)
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        for g in &self.0 {
            write!(f, "{}", g.to_char())?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;

    /// Parses the letter encoding. The empty string is `ε`.
    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(Generator::from_char)
            .collect::<Result<Vec<_>>>()?;
        Ok(Word::reduced(letters))
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let text: String = self.0.iter().map(|g| g.to_char()).collect();
        s.serialize_str(&text)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Reduces `letters`, checking each generator against `rank`.
pub fn reduce(letters: &[Generator], rank: u8) -> Result<Word> {
    if let Some(g) = letters.iter().find(|g| g.index() >= rank) {
        return Err(Error::PresentationMismatch(format!(
            "generator {} out of range for rank {rank}",
            g.to_char()
        )));
    }
    Ok(Word::reduced(letters.iter().copied()))
}

pub fn multiply(u: &Word, v: &Word) -> Word {
    u.mul(v)
}

/// A free group of finite rank with a list of cyclic peripheral subgroups.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Presentation {
    rank: u8,
    peripherals: Vec<Vec<Word>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PeripheralSpec {
    One(String),
    Many(Vec<String>),
}

#[derive(Deserialize)]
struct PresentationFile {
    rank: u8,
    #[serde(default)]
    peripherals: Vec<PeripheralSpec>,
}

impl Presentation {
    pub fn new(rank: u8, peripherals: Vec<Vec<Word>>) -> Result<Self> {
        if rank == 0 || rank > 26 {
            return Err(Error::PresentationMismatch(format!("rank {rank} outside 1..=26")));
        }
        for (i, gens) in peripherals.iter().enumerate() {
            if gens.is_empty() {
                return Err(Error::PresentationMismatch(format!("peripheral {i} has no generators")));
            }
            for w in gens {
                if w.is_empty() {
                    return Err(Error::PresentationMismatch(format!(
                        "peripheral {i} has a trivial generator"
                    )));
                }
                if w.max_index().is_some_and(|m| m >= rank) {
                    return Err(Error::PresentationMismatch(format!(
                        "peripheral generator {w} uses a letter outside rank {rank}"
                    )));
                }
            }
        }
        Ok(Presentation { rank, peripherals })
    }

    /// `F(rank)` with no peripheral structure.
    pub fn free(rank: u8) -> Result<Self> {
        Presentation::new(rank, Vec::new())
    }

    /// `F(a,b)` relative to `⟨aba⁻¹b⁻¹⟩`.
    pub fn punctured_torus() -> Self {
        Presentation::new(2, vec![vec!["abAB".parse().unwrap()]]).unwrap()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PresentationFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("presentation: {e}")))?;
        let peripherals = file
            .peripherals
            .into_iter()
            .map(|spec| {
                let gens = match spec {
                    PeripheralSpec::One(s) => vec![s],
                    PeripheralSpec::Many(v) => v,
                };
                gens.iter().map(|s| s.parse()).collect::<Result<Vec<Word>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Presentation::new(file.rank, peripherals)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Presentation::from_json(&text)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "rank": self.rank,
            "peripherals": self.peripherals.iter()
                .map(|g| g.iter().map(|w| w.to_string()).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        })
    }

    pub fn rank(&self) -> u8 {
        self.rank
    }

    pub fn peripherals(&self) -> &[Vec<Word>] {
        &self.peripherals
    }

    /// The single generator of a cyclic peripheral.
    pub fn cyclic_generator(&self, peripheral: usize) -> Result<&Word> {
        match self.peripherals.get(peripheral).map(|g| g.as_slice()) {
            Some([h]) => Ok(h),
            Some(gens) => Err(Error::UnsupportedPeripheral(format!(
                "peripheral {peripheral} has {} generators; only cyclic peripherals have a membership test",
                gens.len()
            ))),
            None => Err(Error::PresentationMismatch(format!("no peripheral {peripheral}"))),
        }
    }

    pub fn generators(&self) -> impl Iterator<Item = Generator> {
        (0..self.rank * 2).map(Generator::from_code)
    }

    pub fn check_word(&self, w: &Word) -> Result<()> {
        match w.max_index() {
            Some(m) if m >= self.rank => Err(Error::PresentationMismatch(format!(
                "word {w} uses a letter outside rank {}",
                self.rank
            ))),
            _ => Ok(()),
        }
    }
}

/// Left coset `g·H_i`, named by its shortlex-least member inside the ball.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CosetId {
    pub peripheral_index: usize,
    pub representative: Word,
}

/// Members `(i, g·hⁱ)` of `g⟨h⟩` of length at most `radius`, by increasing `i`.
pub fn coset_members(g: &Word, h: &Word, radius: usize) -> Vec<(i64, Word)> {
    let (_, core) = h.cyclic_core();
    let bound = ((g.len() + radius) / core.max(1) + 1) as i64;
    let step = h.clone();
    let back = h.inverse();
    let mut out = Vec::new();
    let mut w = g.mul(&back.pow(bound));
    for i in -bound..=bound {
        if w.len() <= radius {
            out.push((i, w.clone()));
        }
        w = w.mul(&step);
    }
    out
}

/// Identifies the coset of `g` under peripheral `peripheral` among words of
/// length at most `radius`.
pub fn coset_id(p: &Presentation, g: &Word, peripheral: usize, radius: usize) -> Result<CosetId> {
    p.check_word(g)?;
    let h = p.cyclic_generator(peripheral)?;
    if g.len() > radius {
        return Err(Error::Precondition(format!("{g} lies outside the radius-{radius} ball")));
    }
    let representative = coset_members(g, h, radius)
        .into_iter()
        .map(|(_, w)| w)
        .min()
        .ok_or_else(|| Error::Internal("coset misses its own element".into()))?;
    Ok(CosetId { peripheral_index: peripheral, representative })
}

/// Word-metric distance from `v` to the coset `g⟨h⟩`.
pub fn distance_to_coset(v: &Word, g: &Word, h: &Word) -> usize {
    let x = v.inverse().mul(g);
    let (_, core) = h.cyclic_core();
    let bound = (2 * x.len() / core.max(1) + 2) as i64;
    (-bound..=bound).map(|i| x.mul(&h.pow(i)).len()).min().unwrap_or(x.len())
}
