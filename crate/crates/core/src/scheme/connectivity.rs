use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ScanScheme;
use crate::error::{PtychoError, Result};
use crate::grid::PixelSet;

/// Overlap count of one unordered shift pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairOverlap {
    pub i: usize,
    pub j: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityReport {
    /// Nonzero overlaps `|M^i ∩ M^j ∩ supp|`, `i < j`.
    pub edge_overlaps: Vec<PairOverlap>,
    /// Largest `s` for which the pair graph with edges of weight `>= s` is
    /// connected; `None` for a single-shift scheme.
    pub strength: Option<usize>,
    /// `strength >= 2`.
    pub s_connected: bool,
    pub connected_at: BTreeMap<usize, bool>,
    #[serde(skip)]
    shifts: usize,
}

impl ConnectivityReport {
    pub fn overlap(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.edge_overlaps
            .iter()
            .find(|e| e.i == a && e.j == b)
            .map_or(0, |e| e.count)
    }

    /// Whether the graph with edges of weight at least `s` is connected.
    pub fn is_connected_at(&self, s: usize) -> bool {
        let mut uf = UnionFind::new(self.shifts);
        for e in &self.edge_overlaps {
            if e.count >= s {
                uf.union(e.i, e.j);
            }
        }
        uf.components == 1
    }

    pub fn query(&mut self, s: usize) -> bool {
        let c = self.is_connected_at(s);
        self.connected_at.insert(s, c);
        c
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
    pub components: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n], components: n }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        self.components -= 1;
        true
    }
}

fn bitset(set: &PixelSet, words: usize) -> Vec<u64> {
    let grid = set.grid();
    let mut bits = vec![0u64; words];
    for p in set.iter() {
        let k = grid.linear(*p);
        bits[k / 64] |= 1 << (k % 64);
    }
    bits
}

/// Pairwise support overlaps of the blocks and the bottleneck of a maximum
/// spanning tree (Kruskal).
pub fn connectivity(scheme: &ScanScheme, support: &PixelSet) -> Result<ConnectivityReport> {
    if scheme.is_empty() {
        return Err(PtychoError::InvalidScheme("empty scheme".into()));
    }
    let grid = scheme.grid();
    let words = (grid.n * grid.n).div_ceil(64);
    let blocks = scheme.blocks()?;
    let supp = bitset(support, words);
    let masked: Vec<Vec<u64>> = blocks
        .iter()
        .map(|b| bitset(b, words).iter().zip(&supp).map(|(x, y)| x & y).collect())
        .collect();

    let mut covered = vec![0u64; words];
    for b in &masked {
        for (c, x) in covered.iter_mut().zip(b) {
            *c |= x;
        }
    }
    if covered != supp {
        return Err(PtychoError::InvalidParameter(
            "support is not contained in the union of the blocks".into(),
        ));
    }

    let q = scheme.len();
    let mut edges: Vec<PairOverlap> = (0..q)
        .into_par_iter()
        .flat_map_iter(|i| {
            let masked = &masked;
            (i + 1..q).filter_map(move |j| {
                let count: u32 = masked[i].iter().zip(&masked[j]).map(|(a, b)| (a & b).count_ones()).sum();
                (count > 0).then_some(PairOverlap { i, j, count: count as usize })
            })
        })
        .collect();

    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by(|&a, &b| edges[b].count.cmp(&edges[a].count).then(a.cmp(&b)));
    let mut uf = UnionFind::new(q);
    let mut bottleneck = usize::MAX;
    for &k in &order {
        let e = edges[k];
        if uf.union(e.i, e.j) {
            bottleneck = bottleneck.min(e.count);
        }
        if uf.components == 1 {
            break;
        }
    }
    let strength = if q == 1 {
        None
    } else if uf.components > 1 {
        Some(0)
    } else {
        Some(bottleneck)
    };
    edges.sort_by_key(|e| (e.i, e.j));
    Ok(ConnectivityReport {
        edge_overlaps: edges,
        strength,
        s_connected: strength.map_or(true, |s| s >= 2),
        connected_at: BTreeMap::new(),
        shifts: q,
    })
}
