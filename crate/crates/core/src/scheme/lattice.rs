//! Hermite normal form of integer lattices in Z^2, with the unimodular
//! transform that expresses each basis row through the generators.

use crate::error::{PtychoError, Result};
use crate::grid::Point;

/// Row-style Hermite form of the lattice generated by a list of vectors.
///
/// `basis[0] = (h11, h12)` and `basis[1] = (0, h22)` with `h11, h22 > 0` and
/// `0 <= h12 < h22` when the lattice has rank 2. `coeffs[r]` expresses
/// `basis[r]` as an integer combination of the generators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HermiteForm {
    pub rank: usize,
    pub basis: Vec<Point>,
    pub coeffs: Vec<Vec<i64>>,
}

impl HermiteForm {
    /// Index `[Z^2 : L]`; `None` for rank below 2.
    pub fn index(&self) -> Option<u64> {
        (self.rank == 2).then(|| (self.basis[0][0] * self.basis[1][1]) as u64)
    }

    pub fn is_full(&self) -> bool {
        self.index() == Some(1)
    }
}

#[derive(Clone)]
struct Row {
    v: [i128; 2],
    c: Vec<i128>,
}

fn ck(x: Option<i128>) -> Result<i128> {
    x.ok_or(PtychoError::Overflow)
}

/// `a*x + b*y` for rows.
fn combine(a: i128, x: &Row, b: i128, y: &Row) -> Result<Row> {
    let mut v = [0i128; 2];
    for k in 0..2 {
        v[k] = ck(ck(a.checked_mul(x.v[k]))?.checked_add(ck(b.checked_mul(y.v[k]))?))?;
    }
    let c = x
        .c
        .iter()
        .zip(&y.c)
        .map(|(&p, &q)| ck(ck(a.checked_mul(p))?.checked_add(ck(b.checked_mul(q))?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Row { v, c })
}

/// `(g, u, v)` with `g = u*x + v*y = gcd(x, y) >= 0`.
fn ext_gcd(x: i128, y: i128) -> (i128, i128, i128) {
    let (mut r0, mut r1) = (x, y);
    let (mut s0, mut s1) = (1i128, 0i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 < 0 {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

/// Eliminate column `col` from all rows but one; returns the pivot row, if
/// any row has a nonzero entry there, and the remaining rows.
fn eliminate(rows: Vec<Row>, col: usize) -> Result<(Option<Row>, Vec<Row>)> {
    let mut pivot: Option<Row> = None;
    let mut rest = Vec::new();
    for row in rows {
        if row.v[col] == 0 {
            rest.push(row);
            continue;
        }
        match pivot.take() {
            None => pivot = Some(row),
            Some(p) => {
                let (x, y) = (p.v[col], row.v[col]);
                let (g, u, v) = ext_gcd(x, y);
                let new_p = combine(u, &p, v, &row)?;
                let zeroed = combine(y / g, &p, -(x / g), &row)?;
                debug_assert_eq!(zeroed.v[col], 0);
                pivot = Some(new_p);
                if zeroed.v != [0, 0] {
                    rest.push(zeroed);
                }
            }
        }
    }
    Ok((pivot, rest))
}

fn to_i64(x: i128) -> Result<i64> {
    i64::try_from(x).map_err(|_| PtychoError::Overflow)
}

pub fn hermite_normal_form(vectors: &[Point]) -> Result<HermiteForm> {
    let k = vectors.len();
    let rows: Vec<Row> = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut c = vec![0i128; k];
            c[i] = 1;
            Row { v: [v[0] as i128, v[1] as i128], c }
        })
        .collect();
    let (p0, rest) = eliminate(rows, 0)?;
    let (p1, _) = eliminate(rest, 1)?;
    let mut basis_rows: Vec<Row> = Vec::new();
    let mut p0 = p0;
    let mut p1 = p1;
    if let Some(r) = p0.as_mut() {
        if r.v[0] < 0 {
            *r = combine(-1, r, 0, r)?;
        }
    }
    if let Some(r) = p1.as_mut() {
        if r.v[1] < 0 {
            *r = combine(-1, r, 0, r)?;
        }
    }
    if let (Some(a), Some(b)) = (p0.as_mut(), p1.as_ref()) {
        let q = a.v[1].div_euclid(b.v[1]);
        *a = combine(1, a, -q, b)?;
    }
    basis_rows.extend(p0);
    basis_rows.extend(p1);
    let rank = basis_rows.len();
    let basis = basis_rows
        .iter()
        .map(|r| Ok([to_i64(r.v[0])?, to_i64(r.v[1])?]))
        .collect::<Result<Vec<_>>>()?;
    let coeffs = basis_rows
        .iter()
        .map(|r| r.c.iter().map(|&x| to_i64(x)).collect())
        .collect::<Result<Vec<_>>>()?;
    Ok(HermiteForm { rank, basis, coeffs })
}

/// `[Z^2 : L]` of the lattice spanned by `vectors`; `None` if rank < 2.
pub fn lattice_index(vectors: &[Point]) -> Result<Option<u64>> {
    Ok(hermite_normal_form(vectors)?.index())
}
