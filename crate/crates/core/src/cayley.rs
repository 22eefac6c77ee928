//! The radius-R ball of the Cayley graph of a free group.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Csr;
use crate::group::{Presentation, Word};

/// Default cap on materialized vertices (ball plus horoball levels).
pub const DEFAULT_VERTEX_BUDGET: u64 = 6_000_000;

/// A distance that may be an artifact of truncation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlaggedDistance {
    pub value: u32,
    pub suspect: bool,
}

/// Words of length at most `radius`, indexed in shortlex order (which is the
/// BFS insertion order from ε when generators are expanded as `a, A, b, B, …`).
#[derive(Clone, Debug)]
pub struct CayleyBall {
    radius: usize,
    rank: u8,
    vertices: Vec<Word>,
    index: HashMap<Word, u32>,
    adjacency: Csr,
    sphere: Vec<u32>,
}

/// `1 + 2k((2k−1)^R − 1)/(2k−2)` for rank `k ≥ 2`; `2R + 1` for rank 1.
pub fn projected_ball_size(rank: u8, radius: usize) -> u64 {
    let k = rank as u64;
    if k == 1 {
        return 2 * radius as u64 + 1;
    }
    let branch = 2 * k - 1;
    let mut count = 1u64;
    let mut sphere = 2 * k;
    for _ in 0..radius {
        count = count.saturating_add(sphere);
        sphere = sphere.saturating_mul(branch);
    }
    count
}

impl CayleyBall {
    pub fn build(p: &Presentation, radius: usize) -> Result<Self> {
        Self::build_with_budget(p, radius, DEFAULT_VERTEX_BUDGET)
    }

    pub fn build_with_budget(p: &Presentation, radius: usize, budget: u64) -> Result<Self> {
        if radius < 1 {
            return Err(Error::Precondition("ball radius must be at least 1".into()));
        }
        if p.rank() < 2 {
            return Err(Error::Precondition("ball construction needs rank at least 2".into()));
        }
        let projected = projected_ball_size(p.rank(), radius);
        if projected > budget {
            return Err(Error::BudgetExceeded { projected, budget });
        }
        let mut vertices = Vec::with_capacity(projected as usize);
        let mut index = HashMap::with_capacity(projected as usize);
        let mut edges = Vec::with_capacity(projected as usize);
        vertices.push(Word::identity());
        index.insert(Word::identity(), 0u32);
        let mut head = 0usize;
        while head < vertices.len() {
            let parent = vertices[head].clone();
            if parent.len() < radius {
                for g in p.generators() {
                    if parent.last() == Some(g.inverse()) {
                        continue;
                    }
                    let mut letters = parent.letters().to_vec();
                    letters.push(g);
                    let child = Word::from_reduced_unchecked(letters);
                    let id = vertices.len() as u32;
                    index.insert(child.clone(), id);
                    vertices.push(child);
                    edges.push((head as u32, id));
                }
            }
            head += 1;
        }
        let adjacency = Csr::from_edges(vertices.len(), &edges);
        let sphere = vertices
            .iter()
            .enumerate()
            .filter(|(_, w)| w.len() == radius)
            .map(|(i, _)| i as u32)
            .collect();
        Ok(CayleyBall { radius, rank: p.rank(), vertices, index, adjacency, sphere })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn rank(&self) -> u8 {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn word(&self, v: u32) -> &Word {
        &self.vertices[v as usize]
    }

    pub fn words(&self) -> &[Word] {
        &self.vertices
    }

    pub fn vertex(&self, w: &Word) -> Option<u32> {
        self.index.get(w).copied()
    }

    pub fn contains(&self, w: &Word) -> bool {
        self.index.contains_key(w)
    }

    pub fn sphere(&self) -> &[u32] {
        &self.sphere
    }

    pub fn adjacency(&self) -> &Csr {
        &self.adjacency
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.edge_count()
    }

    /// BFS distance inside the ball. Suspect whenever `|u| + |v| > R`, since
    /// then the ball alone cannot certify that no shorter path leaves it.
    pub fn graph_distance(&self, u: u32, v: u32) -> FlaggedDistance {
        let value = self
            .adjacency
            .local_distance(u, v, u32::MAX)
            .expect("the ball is connected");
        let suspect = self.word(u).len() + self.word(v).len() > self.radius;
        FlaggedDistance { value, suspect }
    }

    /// Edge list: a header line with the vertex count, then `u v` per edge.
    pub fn write_edge_list(&self, out: &mut impl Write) -> Result<()> {
        write_edge_list(&self.adjacency, out)
    }

    pub fn export_edge_list(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_edge_list(&mut f)
    }
}

pub(crate) fn write_edge_list(g: &Csr, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{}", g.len())?;
    for (u, v) in g.edges() {
        writeln!(out, "{u} {v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn f2() -> Presentation {
        Presentation::free(2).unwrap()
    }

    #[test]
    fn small_ball_counts() {
        let b1 = CayleyBall::build(&f2(), 1).unwrap();
        assert_eq!(b1.len(), 5);
        assert_eq!(b1.edge_count(), 4);
        // 1 + 4 + 12, cross-checked against brute-force enumeration below.
        let b2 = CayleyBall::build(&f2(), 2).unwrap();
        assert_eq!(b2.len(), 17);
        let f4 = Presentation::free(4).unwrap();
        assert_eq!(CayleyBall::build(&f4, 1).unwrap().len(), 9);
    }

    #[test]
    fn growth_formula_matches_enumeration() {
        // Oracle: enumerate all letter strings of length ≤ R and keep reduced ones.
        for (rank, radius) in [(2u8, 3usize), (2, 4), (3, 3)] {
            let p = Presentation::free(rank).unwrap();
            let mut count = 0u64;
            let gens: Vec<_> = p.generators().collect();
            let mut layer: Vec<Vec<u8>> = vec![vec![]];
            for _ in 0..=radius {
                count += layer
                    .iter()
                    .filter(|s| s.windows(2).all(|x| x[0] != (x[1] ^ 1)))
                    .count() as u64;
                layer = layer
                    .iter()
                    .flat_map(|s| gens.iter().map(move |g| [s.as_slice(), &[g.code()]].concat()))
                    .collect();
            }
            assert_eq!(projected_ball_size(rank, radius), count);
            assert_eq!(CayleyBall::build(&p, radius).unwrap().len() as u64, count);
        }
    }

    #[test]
    fn vertices_are_shortlex_sorted_and_identity_first() {
        let b = CayleyBall::build(&f2(), 3).unwrap();
        assert_eq!(b.word(0), &Word::identity());
        assert!(b.words().windows(2).all(|x| x[0] < x[1]));
    }

    #[test]
    fn interior_degree_is_twice_rank() {
        let b = CayleyBall::build(&f2(), 4).unwrap();
        for v in 0..b.len() as u32 {
            let expected = if b.word(v).len() < 4 { 4 } else { 1 };
            assert_eq!(b.adjacency().degree(v), expected);
        }
    }

    #[test]
    fn distance_examples() {
        let b = CayleyBall::build(&f2(), 4).unwrap();
        let id = |s: &str| b.vertex(&w(s)).unwrap();
        assert_eq!(b.graph_distance(id(""), id("ab")).value, 2);
        let d = b.graph_distance(id("a"), id("b"));
        assert_eq!((d.value, d.suspect), (2, false));
        let d = b.graph_distance(id("aaaa"), id("bbbb"));
        assert_eq!((d.value, d.suspect), (8, true));
    }

    #[test]
    fn tree_distance_equals_reduced_length() {
        let b = CayleyBall::build(&f2(), 4).unwrap();
        for u in (0..b.len() as u32).step_by(7) {
            for v in (0..b.len() as u32).step_by(5) {
                let (wu, wv) = (b.word(u), b.word(v));
                if wu.len() + wv.len() <= 4 {
                    let d = b.graph_distance(u, v);
                    assert!(!d.suspect);
                    assert_eq!(d.value as usize, wu.inverse().mul(wv).len());
                }
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let err = CayleyBall::build_with_budget(&f2(), 6, 100).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { projected: 1457, budget: 100 }));
    }

    #[test]
    fn edge_list_export() {
        let b = CayleyBall::build(&f2(), 1).unwrap();
        let mut buf = Vec::new();
        b.write_edge_list(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "5\n0 1\n0 2\n0 3\n0 4\n");
    }
}
