//! Compressed adjacency and breadth-first search on unit-length graphs.

use std::collections::{HashMap, VecDeque};

/// Sentinel for unreachable vertices in a [`DistanceField`].
pub const UNREACHED: u16 = u16::MAX;

/// Undirected graph in compressed sparse row form. Neighbor lists are sorted.
#[derive(Clone, Debug, Default)]
pub struct Csr {
    offsets: Vec<u32>,
    targets: Vec<u32>,
}

impl Csr {
    /// Builds from an undirected edge list; duplicates and loops are dropped.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Self {
        let mut degree = vec![0u32; n];
        for &(u, v) in edges {
            if u != v {
                degree[u as usize] += 1;
                degree[v as usize] += 1;
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0u32);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut targets = vec![0u32; *offsets.last().unwrap() as usize];
        for &(u, v) in edges {
            if u != v {
                targets[fill[u as usize] as usize] = v;
                fill[u as usize] += 1;
                targets[fill[v as usize] as usize] = u;
                fill[v as usize] += 1;
            }
        }
        for i in 0..n {
            let (s, e) = (offsets[i] as usize, offsets[i + 1] as usize);
            targets[s..e].sort_unstable();
        }
        let mut csr = Csr { offsets, targets };
        csr.dedup();
        csr
    }

    fn dedup(&mut self) {
        let n = self.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::with_capacity(self.targets.len());
        offsets.push(0);
        for i in 0..n {
            let mut last = None;
            for &t in self.neighbors(i as u32) {
                if last != Some(t) {
                    targets.push(t);
                    last = Some(t);
                }
            }
            offsets.push(targets.len() as u32);
        }
        self.offsets = offsets;
        self.targets = targets;
    }

    pub fn len(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        let v = v as usize;
        &self.targets[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    pub fn degree(&self, v: u32) -> usize {
        self.neighbors(v).len()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.len() as u32)
            .flat_map(move |u| self.neighbors(u).iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    pub fn bfs(&self, source: u32) -> DistanceField {
        self.bfs_multi(std::slice::from_ref(&source))
    }

    /// Distance to the nearest of `sources`.
    pub fn bfs_multi(&self, sources: &[u32]) -> DistanceField {
        let mut dist = vec![UNREACHED; self.len()];
        let mut queue = VecDeque::with_capacity(1024);
        for &s in sources {
            if dist[s as usize] != 0 {
                dist[s as usize] = 0;
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize] + 1;
            for &v in self.neighbors(u) {
                let slot = &mut dist[v as usize];
                if *slot == UNREACHED {
                    *slot = du;
                    queue.push_back(v);
                }
            }
        }
        DistanceField { dist }
    }

    /// Exact distance by a BFS that stops once `target` is reached or `cap`
    /// levels have been explored. Cheap for nearby pairs.
    pub fn local_distance(&self, source: u32, target: u32, cap: u32) -> Option<u32> {
        if source == target {
            return Some(0);
        }
        let mut seen: HashMap<u32, u32> = HashMap::new();
        seen.insert(source, 0);
        let mut frontier = vec![source];
        let mut depth = 0;
        while !frontier.is_empty() && depth < cap {
            depth += 1;
            let mut next = Vec::new();
            for u in frontier {
                for &v in self.neighbors(u) {
                    if v == target {
                        return Some(depth);
                    }
                    if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(v) {
                        e.insert(depth);
                        next.push(v);
                    }
                }
            }
            frontier = next;
        }
        None
    }
}

/// Distances from a source set to every vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistanceField {
    dist: Vec<u16>,
}

impl DistanceField {
    pub fn get(&self, v: u32) -> u32 {
        self.dist[v as usize] as u32
    }

    pub fn reached(&self, v: u32) -> bool {
        self.dist[v as usize] != UNREACHED
    }

    pub fn as_slice(&self) -> &[u16] {
        &self.dist
    }

    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }

    /// Pointwise minimum, i.e. the field of the union of both source sets.
    pub fn min_with(&self, other: &DistanceField) -> DistanceField {
        DistanceField { dist: self.dist.iter().zip(&other.dist).map(|(a, b)| *a.min(b)).collect() }
    }

    /// Canonical shortest path from `from` back to this field's source set:
    /// each step moves to the smallest-id neighbor one level closer.
    pub fn descend(&self, graph: &Csr, from: u32) -> Vec<u32> {
        let mut path = vec![from];
        let mut cur = from;
        while self.get(cur) > 0 {
            let want = self.dist[cur as usize] - 1;
            cur = *graph
                .neighbors(cur)
                .iter()
                .find(|&&v| self.dist[v as usize] == want)
                .expect("BFS field has a predecessor at every positive level");
            path.push(cur);
        }
        path
    }
}
