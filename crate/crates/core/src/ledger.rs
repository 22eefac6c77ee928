//! Accumulator for empirical constants, keyed by name and space parameters.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub name: String,
    pub max: f64,
    pub samples: u64,
    #[serde(rename = "R")]
    pub radius: usize,
    #[serde(rename = "D")]
    pub depth: u32,
    pub seed: u64,
}

/// Merging keeps the larger maximum, adds sample counts and keeps the smaller
/// seed, so it is commutative and associative.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConstantsLedger {
    entries: BTreeMap<(String, usize, u32), LedgerEntry>,
}

impl ConstantsLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, entry: LedgerEntry) -> Result<()> {
        if !entry.max.is_finite() || entry.max < 0.0 {
            return Err(Error::InvariantViolation(format!(
                "constant {} must be finite and nonnegative, got {}",
                entry.name, entry.max
            )));
        }
        let key = (entry.name.clone(), entry.radius, entry.depth);
        match self.entries.get_mut(&key) {
            Some(e) => {
                e.max = e.max.max(entry.max);
                e.samples += entry.samples;
                e.seed = e.seed.min(entry.seed);
            }
            None => {
                self.entries.insert(key, entry);
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConstantsLedger) {
        for e in other.entries.values() {
            self.record(e.clone()).expect("entries were validated on insertion");
        }
    }

    /// The entry for `name`, if only one space was measured; otherwise the
    /// largest maximum over all spaces.
    pub fn get(&self, name: &str) -> Option<&LedgerEntry> {
        self.entries
            .values()
            .filter(|e| e.name == name)
            .max_by(|a, b| a.max.total_cmp(&b.max))
    }

    pub fn entries(&self) -> impl Iterator<Item = &LedgerEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Serialize for ConstantsLedger {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.entries.values())
    }
}

impl<'de> Deserialize<'de> for ConstantsLedger {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let list = Vec::<LedgerEntry>::deserialize(d)?;
        let mut ledger = ConstantsLedger::new();
        for e in list {
            ledger.record(e).map_err(serde::de::Error::custom)?;
        }
        Ok(ledger)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entry(name: &str, max: f64, samples: u64, radius: usize, seed: u64) -> LedgerEntry {
        LedgerEntry { name: name.into(), max, samples, radius, depth: 4, seed }
    }

    #[test]
    fn record_accumulates() {
        let mut l = ConstantsLedger::new();
        l.record(entry("delta", 1.0, 100, 8, 5)).unwrap();
        l.record(entry("delta", 2.0, 50, 8, 3)).unwrap();
        l.record(entry("delta", 1.0, 10, 10, 3)).unwrap();
        assert_eq!(l.len(), 2);
        let e = l.entries().next().unwrap();
        assert_eq!((e.max, e.samples, e.seed), (2.0, 150, 3));
        assert_eq!(l.get("delta").unwrap().max, 2.0);
        assert!(l.record(entry("C1", f64::INFINITY, 1, 8, 0)).is_err());
        assert!(l.record(entry("C1", -1.0, 1, 8, 0)).is_err());
    }

    #[test]
    fn json_is_one_object_per_constant() {
        let mut l = ConstantsLedger::new();
        l.record(entry("K3", 2.0, 40, 8, 1)).unwrap();
        let json = serde_json::to_value(&l).unwrap();
        assert_eq!(
            json,
            serde_json::json!([{"name": "K3", "max": 2.0, "samples": 40, "R": 8, "D": 4, "seed": 1}])
        );
        let back: ConstantsLedger = serde_json::from_value(json).unwrap();
        assert_eq!(back, l);
    }

    fn arb_ledger() -> impl Strategy<Value = ConstantsLedger> {
        prop::collection::vec(
            (prop::sample::select(vec!["delta", "C1", "K3"]), 0u32..20, 1u64..50, prop::sample::select(vec![8usize, 10]), 0u64..5),
            0..6,
        )
        .prop_map(|items| {
            let mut l = ConstantsLedger::new();
            for (n, m, s, r, seed) in items {
                l.record(entry(n, m as f64, s, r, seed)).unwrap();
            }
            l
        })
    }

    proptest! {
        #[test]
        fn merge_is_commutative_and_associative(a in arb_ledger(), b in arb_ledger(), c in arb_ledger()) {
            let mut ab = a.clone();
            ab.merge(&b);
            let mut ba = b.clone();
            ba.merge(&a);
            prop_assert_eq!(&ab, &ba);
            let mut ab_c = ab.clone();
            ab_c.merge(&c);
            let mut bc = b.clone();
            bc.merge(&c);
            let mut a_bc = a.clone();
            a_bc.merge(&bc);
            prop_assert_eq!(ab_c, a_bc);
        }
    }
}
