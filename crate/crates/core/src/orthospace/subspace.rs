use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gf::{Field, Matrix};

use super::OrthError;

/// A linear subspace of `F_q^d`, stored as its canonical reduced row echelon
/// basis. Equality and hashing are equality of the canonical matrices.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Subspace {
    ambient: usize,
    dim: usize,
    rows: Box<[u32]>,
}

impl fmt::Debug for Subspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<")?;
        for i in 0..self.dim {
            if i > 0 {
                write!(f, ",")?;
            }
            let r: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            write!(f, "({})", r.join(" "))?;
        }
        write!(f, ">")
    }
}

impl Subspace {
    pub fn zero(ambient: usize) -> Self {
        Subspace { ambient, dim: 0, rows: Box::new([]) }
    }

    pub fn whole(ambient: usize) -> Self {
        let m = Matrix::identity(ambient);
        Subspace { ambient, dim: ambient, rows: m.data.into_boxed_slice() }
    }

    /// Span of the given vectors (each of length `ambient`).
    pub fn span<V: AsRef<[u32]>>(field: Field, ambient: usize, vectors: &[V]) -> Result<Self, OrthError> {
        let mut data = Vec::with_capacity(vectors.len() * ambient);
        for v in vectors {
            let v = v.as_ref();
            if v.len() != ambient {
                return Err(OrthError::DimensionMismatch(format!(
                    "vector of length {} in ambient dimension {}",
                    v.len(),
                    ambient
                )));
            }
            data.extend(v.iter().map(|x| x % field.order()));
        }
        Ok(Self::from_matrix(field, Matrix { rows: vectors.len(), cols: ambient, data }))
    }

    fn from_matrix(field: Field, mut m: Matrix) -> Self {
        let ambient = m.cols;
        let dim = m.rref_in_place(field).len();
        m.data.truncate(dim * ambient);
        Subspace { ambient, dim, rows: m.data.into_boxed_slice() }
    }

    /// The projective point spanned by a nonzero vector, normalised so that its
    /// first nonzero coordinate is 1.
    pub fn point(field: Field, v: &[u32]) -> Result<Self, OrthError> {
        let Some(lead) = v.iter().position(|&x| x % field.order() != 0) else {
            return Err(OrthError::ZeroVector);
        };
        let inv = field.inv(v[lead] % field.order());
        let rows: Vec<u32> = v.iter().map(|&x| field.mul(x % field.order(), inv)).collect();
        Ok(Subspace { ambient: v.len(), dim: 1, rows: rows.into_boxed_slice() })
    }

    #[inline]
    pub fn ambient(&self) -> usize {
        self.ambient
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        &self.rows[i * self.ambient..(i + 1) * self.ambient]
    }

    pub fn basis(&self) -> Vec<Vec<u32>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn matrix(&self) -> Matrix {
        Matrix { rows: self.dim, cols: self.ambient, data: self.rows.to_vec() }
    }

    /// For a point, its normalised spanning vector.
    pub fn vector(&self) -> &[u32] {
        debug_assert_eq!(self.dim, 1);
        self.row(0)
    }

    fn check_ambient(&self, other: &Subspace) -> Result<(), OrthError> {
        if self.ambient != other.ambient {
            return Err(OrthError::DimensionMismatch(format!(
                "ambient dimensions {} and {}",
                self.ambient, other.ambient
            )));
        }
        Ok(())
    }

    pub fn join(&self, other: &Subspace, field: Field) -> Result<Subspace, OrthError> {
        self.check_ambient(other)?;
        let mut data = self.rows.to_vec();
        data.extend_from_slice(&other.rows);
        Ok(Self::from_matrix(field, Matrix { rows: self.dim + other.dim, cols: self.ambient, data }))
    }

    /// Join with a single vector.
    pub fn join_vector(&self, v: &[u32], field: Field) -> Subspace {
        let mut data = self.rows.to_vec();
        data.extend_from_slice(v);
        Self::from_matrix(field, Matrix { rows: self.dim + 1, cols: self.ambient, data })
    }

    /// Whether `v` lies in this subspace. Uses the RREF pivots directly.
    pub fn contains_vector(&self, v: &[u32], field: Field) -> bool {
        let mut w: Vec<u32> = v.iter().map(|x| x % field.order()).collect();
        for i in 0..self.dim {
            let r = self.row(i);
            let pc = r.iter().position(|&x| x != 0).expect("rref rows are nonzero");
            let c = w[pc];
            if c != 0 {
                for j in 0..self.ambient {
                    w[j] = field.sub(w[j], field.mul(c, r[j]));
                }
            }
        }
        w.iter().all(|&x| x == 0)
    }

    /// `other ⊆ self`.
    pub fn contains(&self, other: &Subspace, field: Field) -> bool {
        other.dim <= self.dim && (0..other.dim).all(|i| self.contains_vector(other.row(i), field))
    }

    pub fn intersect(&self, other: &Subspace, field: Field) -> Result<Subspace, OrthError> {
        self.check_ambient(other)?;
        // x = a A = b B  <=>  (a, -b) [A; B] = 0
        let (a, b) = (self.dim, other.dim);
        if a == 0 || b == 0 {
            return Ok(Subspace::zero(self.ambient));
        }
        let stacked = Matrix::from_fn(self.ambient, a + b, |j, i| {
            if i < a {
                self.row(i)[j]
            } else {
                field.neg(other.row(i - a)[j])
            }
        });
        let kernel = stacked.kernel(field);
        let vectors: Vec<Vec<u32>> = kernel
            .iter()
            .map(|k| {
                let mut v = vec![0u32; self.ambient];
                for i in 0..a {
                    if k[i] == 0 {
                        continue;
                    }
                    for j in 0..self.ambient {
                        v[j] = field.add(v[j], field.mul(k[i], self.row(i)[j]));
                    }
                }
                v
            })
            .collect();
        Subspace::span(field, self.ambient, &vectors)
    }

    /// Image under the linear map `v ↦ g v` (column convention).
    pub fn transform(&self, g: &Matrix, field: Field) -> Subspace {
        let vectors: Vec<Vec<u32>> = (0..self.dim).map(|i| g.apply_col(self.row(i), field)).collect();
        Subspace::span(field, self.ambient, &vectors).expect("dimensions agree")
    }

    /// All vectors of the subspace as linear combinations `c · basis`.
    pub fn combine(&self, coeffs: &[u32], field: Field) -> Vec<u32> {
        let mut v = vec![0u32; self.ambient];
        for (i, &c) in coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for (j, x) in self.row(i).iter().enumerate() {
                v[j] = field.add(v[j], field.mul(c, *x));
            }
        }
        v
    }

    /// The projective points of this subspace, in a fixed order.
    pub fn points(&self, field: Field) -> Vec<Subspace> {
        let mut out = Vec::new();
        for coeffs in projective_coords(field, self.dim) {
            let v = self.combine(&coeffs, field);
            out.push(Subspace::point(field, &v).expect("nonzero combination"));
        }
        out.sort();
        out
    }

    /// All subspaces of dimension `k` contained in this one.
    pub fn subspaces(&self, k: usize, field: Field) -> Vec<Subspace> {
        enumerate_subspaces(field, self.dim, k)
            .into_iter()
            .map(|s| {
                let vectors: Vec<Vec<u32>> = (0..s.dim).map(|i| self.combine(s.row(i), field)).collect();
                Subspace::span(field, self.ambient, &vectors).expect("dimensions agree")
            })
            .collect()
    }

    /// Uniformly random `k`-subspace of `F_q^d`.
    pub fn random<R: Rng>(field: Field, ambient: usize, k: usize, rng: &mut R) -> Subspace {
        loop {
            let vectors: Vec<Vec<u32>> = (0..k)
                .map(|_| (0..ambient).map(|_| rng.gen_range(0..field.order())).collect())
                .collect();
            let s = Subspace::span(field, ambient, &vectors).expect("dimensions agree");
            if s.dim == k {
                return s;
            }
        }
    }

    /// Uniformly random `k`-subspace containing `self`.
    pub fn random_superspace<R: Rng>(&self, field: Field, k: usize, rng: &mut R) -> Subspace {
        assert!(k >= self.dim && k <= self.ambient);
        loop {
            let mut s = self.clone();
            for _ in self.dim..k {
                let v: Vec<u32> = (0..self.ambient).map(|_| rng.gen_range(0..field.order())).collect();
                s = s.join_vector(&v, field);
            }
            if s.dim == k {
                return s;
            }
        }
    }

    /// Uniformly random point of this subspace.
    pub fn random_point<R: Rng>(&self, field: Field, rng: &mut R) -> Subspace {
        loop {
            let c: Vec<u32> = (0..self.dim).map(|_| rng.gen_range(0..field.order())).collect();
            if c.iter().all(|&x| x == 0) {
                continue;
            }
            return Subspace::point(field, &self.combine(&c, field)).expect("nonzero");
        }
    }
}

/// Normalised coordinate vectors of the projective space of dimension `k-1`
/// (first nonzero entry 1), in lexicographic order of the leading position.
pub fn projective_coords(field: Field, k: usize) -> Vec<Vec<u32>> {
    let q = field.order();
    let mut out = Vec::new();
    for lead in 0..k {
        let tail = k - lead - 1;
        let count = (q as usize).pow(tail as u32);
        for idx in 0..count {
            let mut v = vec![0u32; k];
            v[lead] = 1;
            let mut x = idx;
            for j in (lead + 1..k).rev() {
                v[j] = (x % q as usize) as u32;
                x /= q as usize;
            }
            out.push(v);
        }
    }
    out
}

/// Every `k`-dimensional subspace of `F_q^d`, enumerated directly as RREF
/// matrices (one per pivot pattern and free-entry assignment).
pub fn enumerate_subspaces(field: Field, ambient: usize, k: usize) -> Vec<Subspace> {
    let mut out = Vec::new();
    if k > ambient {
        return out;
    }
    if k == 0 {
        return vec![Subspace::zero(ambient)];
    }
    let q = field.order() as usize;
    let mut pivots: Vec<usize> = (0..k).collect();
    loop {
        // free positions: (row i, column c) with c > pivot[i] and c not a pivot
        let free: Vec<(usize, usize)> = (0..k)
            .flat_map(|i| {
                let pv = &pivots;
                (pv[i] + 1..ambient).filter(move |c| !pv.contains(c)).map(move |c| (i, c))
            })
            .collect();
        let total = q.pow(free.len() as u32);
        for idx in 0..total {
            let mut data = vec![0u32; k * ambient];
            for (i, &p) in pivots.iter().enumerate() {
                data[i * ambient + p] = 1;
            }
            let mut x = idx;
            for &(i, c) in &free {
                data[i * ambient + c] = (x % q) as u32;
                x /= q;
            }
            out.push(Subspace { ambient, dim: k, rows: data.into_boxed_slice() });
        }
        // next pivot combination
        let mut i = k;
        loop {
            if i == 0 {
                out.sort();
                return out;
            }
            i -= 1;
            if pivots[i] < ambient - k + i {
                pivots[i] += 1;
                for j in i + 1..k {
                    pivots[j] = pivots[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Gaussian binomial coefficient `[d choose k]_q`.
pub fn gaussian_binomial(q: u64, d: u32, k: u32) -> u64 {
    if k > d {
        return 0;
    }
    let mut num = 1u128;
    let mut den = 1u128;
    for i in 0..k {
        num *= (q as u128).pow(d - i) - 1;
        den *= (q as u128).pow(i + 1) - 1;
    }
    (num / den) as u64
}
