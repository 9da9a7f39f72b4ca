use serde::{Deserialize, Serialize};

use crate::error::{PtychoError, Result};
use crate::grid::{PixelSet, Point, Shift};

/// Monotone lattice path from `(p1, -p2)` to `(0, 0)`: every step moves one
/// coordinate one unit toward zero. Vertex `(i, j)` stands for the vector
/// `i s1 + j s2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticePath {
    pub vertices: Vec<Point>,
}

impl LatticePath {
    pub fn start(&self) -> Point {
        self.vertices[0]
    }

    pub fn len(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// For every edge, the endpoint with the smaller coordinate along the
    /// edge's axis (the left or lower end).
    pub fn anchor_points(&self) -> Vec<Point> {
        self.vertices
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                if a[0] != b[0] {
                    if a[0] < b[0] { a } else { b }
                } else if a[1] < b[1] {
                    a
                } else {
                    b
                }
            })
            .collect()
    }

    /// Vectors `i s1 + j s2` of the anchor points.
    pub fn anchor_vectors(&self, s1: Point, s2: Point) -> Vec<Point> {
        self.anchor_points()
            .into_iter()
            .map(|[i, j]| [i * s1[0] + j * s2[0], i * s1[1] + j * s2[1]])
            .collect()
    }
}

/// All monotone paths from `(p1, -p2)` to the origin, in a fixed order:
/// at each vertex the step in the second coordinate is tried first.
/// Signed `p1`, `p2` are accepted; there are `binom(|p1|+|p2|, |p1|)` paths.
pub fn enumerate_paths(p1: i64, p2: i64) -> Result<Vec<LatticePath>> {
    if p1 == 0 && p2 == 0 {
        return Err(PtychoError::InvalidParameter("p1 and p2 cannot both be zero".into()));
    }
    let mut out = Vec::new();
    let mut cur = vec![[p1, -p2]];
    walk(&mut cur, &mut out);
    Ok(out)
}

fn walk(cur: &mut Vec<Point>, out: &mut Vec<LatticePath>) {
    let v = *cur.last().unwrap();
    if v == [0, 0] {
        out.push(LatticePath { vertices: cur.clone() });
        return;
    }
    if v[1] != 0 {
        cur.push([v[0], v[1] - v[1].signum()]);
        walk(cur, out);
        cur.pop();
    }
    if v[0] != 0 {
        cur.push([v[0] - v[0].signum(), v[1]]);
        walk(cur, out);
        cur.pop();
    }
}

/// Intersection over the path's edges of `base - v`, `v` the anchor vector
/// of the edge.
pub fn validity_set(path: &LatticePath, s1: Shift, s2: Shift, base_block: &PixelSet) -> PixelSet {
    let mut acc: Option<PixelSet> = None;
    for v in path.anchor_vectors(s1.0, s2.0) {
        let moved = base_block.translate([-v[0], -v[1]]);
        acc = Some(match acc {
            None => moved,
            Some(a) => a.intersection(&moved),
        });
    }
    acc.unwrap_or_else(|| base_block.clone())
}
