//! Prime fields of odd order and exact linear algebra over them.
//!
//! Field elements are plain `u32` residues in `[0, q)`. Every canonical form in
//! the crate (subspace keys, matrix group elements) relies on least
//! nonnegative representatives.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GfError {
    #[error("{0} is not prime")]
    NonPrime(u32),
    #[error("field order {0} has characteristic 2")]
    EvenCharacteristic(u32),
    #[error("field order {0} is too large (limit 65521)")]
    TooLarge(u32),
    #[error("the square class of zero is undefined")]
    ZeroInput,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is singular")]
    Singular,
}

/// The prime field `F_q`, `q` an odd prime.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Field {
    q: u32,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}", self.q)
    }
}

impl TryFrom<u32> for Field {
    type Error = GfError;
    fn try_from(q: u32) -> Result<Self, GfError> {
        Field::new(q)
    }
}

impl From<Field> for u32 {
    fn from(f: Field) -> u32 {
        f.q
    }
}

fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u32;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl Field {
    pub fn new(q: u32) -> Result<Self, GfError> {
        if q % 2 == 0 {
            return Err(GfError::EvenCharacteristic(q));
        }
        if !is_prime(q) {
            return Err(GfError::NonPrime(q));
        }
        if q > 65521 {
            return Err(GfError::TooLarge(q));
        }
        Ok(Field { q })
    }

    #[inline]
    pub fn order(self) -> u32 {
        self.q
    }

    /// `q mod 4`, either 1 or 3.
    #[inline]
    pub fn q_mod4(self) -> u32 {
        self.q % 4
    }

    #[inline]
    pub fn reduce(self, a: i64) -> u32 {
        a.rem_euclid(self.q as i64) as u32
    }

    #[inline]
    pub fn add(self, a: u32, b: u32) -> u32 {
        let s = a + b;
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(self, a: u32, b: u32) -> u32 {
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }

    #[inline]
    pub fn neg(self, a: u32) -> u32 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    #[inline]
    pub fn mul(self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.q as u64) as u32
    }

    pub fn pow(self, mut a: u32, mut e: u64) -> u32 {
        let mut r = 1u32;
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(r, a);
            }
            a = self.mul(a, a);
            e >>= 1;
        }
        r
    }

    /// Multiplicative inverse. Panics on zero.
    pub fn inv(self, a: u32) -> u32 {
        assert!(a % self.q != 0, "inverse of zero in {:?}", self);
        self.pow(a, (self.q - 2) as u64)
    }

    /// Euler's criterion.
    pub fn is_square(self, a: u32) -> Result<bool, GfError> {
        let a = a % self.q;
        if a == 0 {
            return Err(GfError::ZeroInput);
        }
        Ok(self.pow(a, ((self.q - 1) / 2) as u64) == 1)
    }

    /// `+1` for nonzero squares, `-1` for nonsquares, `0` for zero.
    pub fn legendre(self, a: u32) -> i32 {
        match self.is_square(a) {
            Err(_) => 0,
            Ok(true) => 1,
            Ok(false) => -1,
        }
    }

    /// Smallest nonsquare residue.
    pub fn least_nonsquare(self) -> u32 {
        (2..self.q)
            .find(|&a| !self.is_square(a).unwrap())
            .expect("odd prime fields have nonsquares")
    }

    pub fn elements(self) -> impl Iterator<Item = u32> {
        0..self.q
    }
}

/// Dense matrix over `F_q`, row-major.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<u32>,
}

impl Matrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zero(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self, GfError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|x| x.len() != c) {
            return Err(GfError::DimensionMismatch("ragged rows".into()));
        }
        Ok(Matrix { rows: r, cols: c, data: rows.concat() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> u32) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u32) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn mul(&self, other: &Matrix, f: Field) -> Result<Matrix, GfError> {
        if self.cols != other.rows {
            return Err(GfError::DimensionMismatch(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let q = f.order() as u64;
        let mut out = Matrix::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = 0u64;
                for k in 0..self.cols {
                    acc += self.get(i, k) as u64 * other.get(k, j) as u64;
                }
                out.set(i, j, (acc % q) as u32);
            }
        }
        Ok(out)
    }

    /// Row vector times matrix: `v M`.
    pub fn apply_row(&self, v: &[u32], f: Field) -> Vec<u32> {
        let q = f.order() as u64;
        (0..self.cols)
            .map(|j| {
                let acc: u64 = (0..self.rows).map(|k| v[k] as u64 * self.get(k, j) as u64).sum();
                (acc % q) as u32
            })
            .collect()
    }

    /// Matrix times column vector: `M v`.
    pub fn apply_col(&self, v: &[u32], f: Field) -> Vec<u32> {
        let q = f.order() as u64;
        (0..self.rows)
            .map(|i| {
                let acc: u64 = (0..self.cols).map(|k| self.get(i, k) as u64 * v[k] as u64).sum();
                (acc % q) as u32
            })
            .collect()
    }

    /// In-place reduced row echelon form; returns the pivot columns.
    pub fn rref_in_place(&mut self, f: Field) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| self.get(i, c) != 0) else {
                continue;
            };
            if p != r {
                for j in 0..self.cols {
                    self.data.swap(p * self.cols + j, r * self.cols + j);
                }
            }
            let inv = f.inv(self.get(r, c));
            for j in c..self.cols {
                let v = f.mul(self.get(r, j), inv);
                self.set(r, j, v);
            }
            for i in 0..self.rows {
                if i == r {
                    continue;
                }
                let factor = self.get(i, c);
                if factor == 0 {
                    continue;
                }
                for j in c..self.cols {
                    let v = f.sub(self.get(i, j), f.mul(factor, self.get(r, j)));
                    self.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self, f: Field) -> usize {
        self.clone().rref_in_place(f).len()
    }

    pub fn det(&self, f: Field) -> Result<u32, GfError> {
        if self.rows != self.cols {
            return Err(GfError::DimensionMismatch("det of non-square matrix".into()));
        }
        let n = self.rows;
        let mut m = self.clone();
        let mut det = 1u32;
        for c in 0..n {
            let Some(p) = (c..n).find(|&i| m.get(i, c) != 0) else {
                return Ok(0);
            };
            if p != c {
                for j in 0..n {
                    m.data.swap(p * n + j, c * n + j);
                }
                det = f.neg(det);
            }
            let pv = m.get(c, c);
            det = f.mul(det, pv);
            let inv = f.inv(pv);
            for i in c + 1..n {
                let factor = f.mul(m.get(i, c), inv);
                if factor == 0 {
                    continue;
                }
                for j in c..n {
                    let v = f.sub(m.get(i, j), f.mul(factor, m.get(c, j)));
                    m.set(i, j, v);
                }
            }
        }
        Ok(det)
    }

    pub fn inverse(&self, f: Field) -> Result<Matrix, GfError> {
        if self.rows != self.cols {
            return Err(GfError::DimensionMismatch("inverse of non-square matrix".into()));
        }
        let n = self.rows;
        let mut aug = Matrix::from_fn(n, 2 * n, |i, j| {
            if j < n {
                self.get(i, j)
            } else if j - n == i {
                1
            } else {
                0
            }
        });
        let piv = aug.rref_in_place(f);
        if piv.len() < n || piv[n - 1] != n - 1 {
            return Err(GfError::Singular);
        }
        Ok(Matrix::from_fn(n, n, |i, j| aug.get(i, n + j)))
    }

    /// Basis of the right kernel `{x : M x = 0}` in reduced row echelon form.
    pub fn kernel(&self, f: Field) -> Vec<Vec<u32>> {
        let mut m = self.clone();
        let pivots = m.rref_in_place(f);
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        let mut basis: Vec<Vec<u32>> = free
            .iter()
            .map(|&fc| {
                let mut v = vec![0u32; self.cols];
                v[fc] = 1;
                for (r, &pc) in pivots.iter().enumerate() {
                    v[pc] = f.neg(m.get(r, fc));
                }
                v
            })
            .collect();
        if !basis.is_empty() {
            let mut k = Matrix::from_rows(&basis).expect("uniform rows");
            let kp = k.rref_in_place(f);
            basis = (0..kp.len()).map(|i| k.row(i).to_vec()).collect();
        }
        basis
    }
}

/// Affine solution set of `M x = b`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionSet {
    /// `None` when the system is inconsistent.
    pub particular: Option<Vec<u32>>,
    /// Kernel basis of `M`, in reduced row echelon form.
    pub kernel: Vec<Vec<u32>>,
}

impl SolutionSet {
    pub fn is_consistent(&self) -> bool {
        self.particular.is_some()
    }
}

pub fn solve_linear(m: &Matrix, b: &[u32], f: Field) -> Result<SolutionSet, GfError> {
    if b.len() != m.rows {
        return Err(GfError::DimensionMismatch(format!(
            "{} rows vs rhs of length {}",
            m.rows,
            b.len()
        )));
    }
    let n = m.cols;
    let mut aug = Matrix::from_fn(m.rows, n + 1, |i, j| if j < n { m.get(i, j) } else { b[i] % f.order() });
    let pivots = aug.rref_in_place(f);
    let kernel = m.kernel(f);
    if pivots.last() == Some(&n) {
        return Ok(SolutionSet { particular: None, kernel });
    }
    let mut x = vec![0u32; n];
    for (r, &pc) in pivots.iter().enumerate() {
        x[pc] = aug.get(r, n);
    }
    Ok(SolutionSet { particular: Some(x), kernel })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_field_examples() {
        assert_eq!(Field::new(7).unwrap().order(), 7);
        assert_eq!(Field::new(11).unwrap().order(), 11);
        assert_eq!(Field::new(4), Err(GfError::EvenCharacteristic(4)));
        assert_eq!(Field::new(2), Err(GfError::EvenCharacteristic(2)));
        assert_eq!(Field::new(9), Err(GfError::NonPrime(9)));
        assert_eq!(Field::new(1), Err(GfError::NonPrime(1)));
    }

    #[test]
    fn square_examples() {
        let f13 = Field::new(13).unwrap();
        assert!(f13.is_square(4).unwrap());
        // squares mod 7 are {1, 2, 4}
        let f7 = Field::new(7).unwrap();
        assert!(!f7.is_square(3).unwrap());
        // squares mod 11 are {1, 3, 4, 5, 9}
        let f11 = Field::new(11).unwrap();
        assert!(!f11.is_square(2).unwrap());
        assert_eq!(f11.is_square(0), Err(GfError::ZeroInput));
    }

    fn brute_squares(f: Field) -> Vec<bool> {
        let mut sq = vec![false; f.order() as usize];
        for x in 1..f.order() {
            sq[f.mul(x, x) as usize] = true;
        }
        sq
    }

    #[test]
    fn square_classes_exhaustive_up_to_97() {
        for q in (3..=97).filter(|&q| is_prime(q) && q % 2 == 1) {
            let f = Field::new(q).unwrap();
            let sq = brute_squares(f);
            let count = (1..q).filter(|&a| f.is_square(a).unwrap()).count();
            assert_eq!(count as u32, (q - 1) / 2, "q={q}");
            for a in 1..q {
                assert_eq!(f.is_square(a).unwrap(), sq[a as usize], "q={q} a={a}");
                for b in 1..q {
                    let ab = f.mul(a, b);
                    assert_eq!(
                        f.is_square(ab).unwrap(),
                        f.is_square(a).unwrap() == f.is_square(b).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn solve_examples() {
        let f = Field::new(5).unwrap();
        let id = Matrix::identity(3);
        let s = solve_linear(&id, &[1, 2, 3], f).unwrap();
        assert_eq!(s.particular, Some(vec![1, 2, 3]));
        assert!(s.kernel.is_empty());

        let z = Matrix::zero(2, 2);
        let s = solve_linear(&z, &[0, 0], f).unwrap();
        assert_eq!(s.particular, Some(vec![0, 0]));
        assert_eq!(s.kernel, vec![vec![1, 0], vec![0, 1]]);

        let m = Matrix::from_rows(&[vec![1, 2], vec![2, 4]]).unwrap();
        let s = solve_linear(&m, &[0, 0], f).unwrap();
        // enumerating all 25 vectors, the solutions are the multiples of (3, 1)
        let mut sols = vec![];
        for x in 0..5 {
            for y in 0..5 {
                if (x + 2 * y) % 5 == 0 && (2 * x + 4 * y) % 5 == 0 {
                    sols.push((x, y));
                }
            }
        }
        assert_eq!(sols.len(), 5);
        assert!(sols.contains(&(3, 1)));
        // RREF basis normalises the pivot to 1: (1, 2) spans the same line as (3, 1)
        assert_eq!(s.kernel.len(), 1);
        let k = &s.kernel[0];
        assert!(sols.contains(&(k[0], k[1])));
        assert_eq!(f.mul(k[0], 1), f.mul(3, k[1]));

        let s = solve_linear(&z, &[1, 0], f).unwrap();
        assert!(!s.is_consistent());
    }

    #[test]
    fn det_and_inverse() {
        let f = Field::new(7).unwrap();
        let m = Matrix::from_rows(&[vec![1, 2, 0], vec![3, 1, 4], vec![0, 5, 6]]).unwrap();
        let inv = m.inverse(f).unwrap();
        assert_eq!(m.mul(&inv, f).unwrap(), Matrix::identity(3));
        let d = m.det(f).unwrap();
        // 1*(6-20) - 2*(18-0) + 0 = -50 = 6 mod 7
        assert_eq!(d, f.reduce(-50));
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn solve_matches_exhaustive(q in prop::sample::select(vec![3u32, 5, 7]),
                                    entries in prop::collection::vec(0u32..7, 12)) {
            let f = Field::new(q).unwrap();
            let m = Matrix::from_fn(3, 3, |i, j| entries[i * 3 + j] % q);
            let b: Vec<u32> = entries[9..12].iter().map(|x| x % q).collect();
            let s = solve_linear(&m, &b, f).unwrap();
            let mut count = 0usize;
            for x0 in 0..q { for x1 in 0..q { for x2 in 0..q {
                let x = [x0, x1, x2];
                if m.apply_col(&x, f) == b { count += 1; }
            }}}
            match &s.particular {
                None => prop_assert_eq!(count, 0),
                Some(p) => {
                    prop_assert_eq!(&m.apply_col(p, f), &b);
                    prop_assert_eq!(count, (q as usize).pow(s.kernel.len() as u32));
                    for k in &s.kernel {
                        prop_assert!(m.apply_col(k, f).iter().all(|&v| v == 0));
                    }
                }
            }
        }
    }
}
