//! First homology of the flag complex truncated at dimension two: vertices
//! are elements, edges incident pairs, 2-cells the pennants (incidence
//! triangles).

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::HomotopyError;
use crate::pregeo::Pregeometry;

/// Largest boundary matrix (edges × pennants) handled densely.
const MAX_ENTRIES: usize = 40_000_000;

/// `Z^rank ⊕ Z/t₁ ⊕ … ⊕ Z/t_k` with `t₁ | t₂ | …`, all `tᵢ > 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct H1 {
    pub rank: usize,
    pub torsion: Vec<String>,
    pub vertices: usize,
    pub edges: usize,
    pub pennants: usize,
}

impl H1 {
    pub fn is_trivial(&self) -> bool {
        self.rank == 0 && self.torsion.is_empty()
    }
}

trait Ring: Clone + PartialEq {
    fn from_i64(x: i64) -> Self;
    fn is_zero(&self) -> bool;
    fn abs_cmp_key(&self) -> BigInt;
    fn checked_sub_mul(&self, q: &Self, b: &Self) -> Option<Self>;
    fn div_floor_rem(&self, b: &Self) -> Self;
    fn to_big(&self) -> BigInt;
}

impl Ring for i64 {
    fn from_i64(x: i64) -> Self {
        x
    }
    fn is_zero(&self) -> bool {
        *self == 0
    }
    fn abs_cmp_key(&self) -> BigInt {
        BigInt::from(*self).abs()
    }
    fn checked_sub_mul(&self, q: &Self, b: &Self) -> Option<Self> {
        self.checked_sub(q.checked_mul(*b)?)
    }
    fn div_floor_rem(&self, b: &Self) -> Self {
        self.div_euclid(*b)
    }
    fn to_big(&self) -> BigInt {
        BigInt::from(*self)
    }
}

impl Ring for BigInt {
    fn from_i64(x: i64) -> Self {
        BigInt::from(x)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn abs_cmp_key(&self) -> BigInt {
        self.abs()
    }
    fn checked_sub_mul(&self, q: &Self, b: &Self) -> Option<Self> {
        Some(self - q * b)
    }
    fn div_floor_rem(&self, b: &Self) -> Self {
        num_integer_div_floor(self, b)
    }
    fn to_big(&self) -> BigInt {
        self.clone()
    }
}

fn num_integer_div_floor(a: &BigInt, b: &BigInt) -> BigInt {
    let (q, r) = (a / b, a % b);
    if !Zero::is_zero(&r) && (r.is_negative() != b.is_negative()) {
        q - BigInt::one()
    } else {
        q
    }
}

/// Diagonalises by unimodular row and column operations; returns the nonzero
/// diagonal entries, or `None` on overflow.
fn diagonalize<T: Ring>(rows: usize, cols: usize, mut m: Vec<T>) -> Option<Vec<BigInt>> {
    let at = |r: usize, c: usize| r * cols + c;
    let mut diag = Vec::new();
    let mut t = 0;
    while t < rows.min(cols) {
        // pivot: least nonzero |entry| in the remaining block
        let mut best: Option<(BigInt, usize, usize)> = None;
        for r in t..rows {
            for c in t..cols {
                let v = &m[at(r, c)];
                if !v.is_zero() {
                    let k = v.abs_cmp_key();
                    if best.as_ref().is_none_or(|b| k < b.0) {
                        let one = k.is_one();
                        best = Some((k, r, c));
                        if one {
                            break;
                        }
                    }
                }
            }
            if best.as_ref().is_some_and(|b| b.0.is_one()) {
                break;
            }
        }
        let Some((_, pr, pc)) = best else { break };
        if pr != t {
            for c in 0..cols {
                m.swap(at(pr, c), at(t, c));
            }
        }
        if pc != t {
            for r in 0..rows {
                m.swap(at(r, pc), at(r, t));
            }
        }
        let mut clean = true;
        let p = m[at(t, t)].clone();
        for r in t + 1..rows {
            let v = m[at(r, t)].clone();
            if v.is_zero() {
                continue;
            }
            let q = v.div_floor_rem(&p);
            for c in t..cols {
                let nv = m[at(r, c)].checked_sub_mul(&q, &m[at(t, c)])?;
                m[at(r, c)] = nv;
            }
            if !m[at(r, t)].is_zero() {
                clean = false;
            }
        }
        for c in t + 1..cols {
            let v = m[at(t, c)].clone();
            if v.is_zero() {
                continue;
            }
            let q = v.div_floor_rem(&p);
            for r in t..rows {
                let nv = m[at(r, c)].checked_sub_mul(&q, &m[at(r, t)])?;
                m[at(r, c)] = nv;
            }
            if !m[at(t, c)].is_zero() {
                clean = false;
            }
        }
        if clean {
            diag.push(p.to_big().abs());
            t += 1;
        }
    }
    Some(diag)
}

fn gcd(a: &BigInt, b: &BigInt) -> BigInt {
    let (mut a, mut b) = (a.abs(), b.abs());
    while !Zero::is_zero(&b) {
        let r = &a % &b;
        a = b;
        b = r;
    }
    a
}

/// Invariant factors (including 1s) of an integer matrix given by rows.
pub fn smith_invariants(rows: usize, cols: usize, entries: &[i64]) -> Vec<BigInt> {
    let diag = diagonalize::<i64>(rows, cols, entries.to_vec()).unwrap_or_else(|| {
        diagonalize::<BigInt>(rows, cols, entries.iter().map(|&x| BigInt::from_i64(x)).collect())
            .expect("big integers do not overflow")
    });
    // normalise the diagonal into a divisibility chain
    let mut d = diag;
    for i in 0..d.len() {
        for j in i + 1..d.len() {
            let g = gcd(&d[i], &d[j]);
            if Zero::is_zero(&g) {
                continue;
            }
            let l = &d[i] / &g * &d[j];
            d[i] = g;
            d[j] = l;
        }
    }
    d
}

fn components(n: usize, edges: &[(u32, u32)]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut c = n;
    for &(a, b) in edges {
        let (x, y) = (find(&mut parent, a as usize), find(&mut parent, b as usize));
        if x != y {
            parent[x] = y;
            c -= 1;
        }
    }
    c
}

/// `H₁` of the 2-complex (elements, incident pairs, pennants), computed by
/// Smith normal form of the pennant boundary map.
pub fn homology_h1(g: &Pregeometry) -> Result<H1, HomotopyError> {
    let n = g.len();
    let mut edges: Vec<(u32, u32)> = Vec::new();
    for x in 0..n as u32 {
        for &y in g.neighbors(x) {
            if x < y {
                edges.push((x, y));
            }
        }
    }
    let eidx: HashMap<(u32, u32), usize> = edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let mut pennants: Vec<[u32; 3]> = Vec::new();
    for &(x, y) in &edges {
        for &z in g.neighbors(y) {
            if z > y && g.incident(x, z) {
                pennants.push([x, y, z]);
            }
        }
    }
    let (rows, cols) = (edges.len(), pennants.len());
    if rows.saturating_mul(cols) > MAX_ENTRIES {
        return Err(HomotopyError::TooLarge(format!("{rows} edges × {cols} pennants")));
    }
    let mut m = vec![0i64; rows * cols];
    for (j, &[x, y, z]) in pennants.iter().enumerate() {
        m[eidx[&(y, z)] * cols + j] += 1;
        m[eidx[&(x, z)] * cols + j] -= 1;
        m[eidx[&(x, y)] * cols + j] += 1;
    }
    let inv = smith_invariants(rows, cols, &m);
    let rank_d2 = inv.len();
    let rank_d1 = n - components(n, &edges);
    let rank = rows - rank_d1 - rank_d2;
    let torsion = inv.iter().filter(|d| !d.is_one()).map(|d| d.to_string()).collect();
    Ok(H1 { rank, torsion, vertices: n, edges: rows, pennants: cols })
}
