//! Orthogonal spaces over prime fields: nondegenerate symmetric forms,
//! subspaces, the two isometry classes (`+`/`−`) of nondegenerate subspaces,
//! and the geometry of nondegenerate proper subspaces with its hall-restricted
//! variants.

mod geometry;
mod subspace;
mod verify;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf::{Field, GfError, Matrix};

pub use geometry::{Hall, Label, MaterializedOrth, OrthGeometry};
pub use subspace::{enumerate_subspaces, gaussian_binomial, projective_coords, Subspace};
pub use verify::{
    random_line_count_config, verify_diameter, verify_elliptic_line_counts, verify_pointline, LineCountConfig,
    LineCountReport, PointLineReport, SweepMode,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrthError {
    #[error(transparent)]
    Field(#[from] GfError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("gram matrix is not symmetric")]
    NotSymmetric,
    #[error("form is degenerate")]
    DegenerateForm,
    #[error("ambient dimension too small: need at least 2, got {0}")]
    AmbientTooSmall(usize),
    #[error("subspace is degenerate")]
    DegenerateSubspace,
    #[error("expected a subspace of dimension {expected}, got {got}")]
    WrongDimension { expected: usize, got: usize },
    #[error("zero vector does not span a point")]
    ZeroVector,
    #[error("hall cannot be realised: {0}")]
    UnrealizableHall(String),
    #[error("configuration violates precondition: {0}")]
    ConfigViolatesPrecondition(String),
    #[error("collinearity graph is disconnected")]
    DisconnectedGraph,
}

/// The two isometry classes of nondegenerate quadratic spaces over `F_q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TypeSign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl TypeSign {
    pub fn flip(self) -> Self {
        match self {
            TypeSign::Plus => TypeSign::Minus,
            TypeSign::Minus => TypeSign::Plus,
        }
    }

    fn times(self, other: TypeSign) -> TypeSign {
        if self == other {
            TypeSign::Plus
        } else {
            TypeSign::Minus
        }
    }

    pub fn symbol(self) -> char {
        match self {
            TypeSign::Plus => '+',
            TypeSign::Minus => '-',
        }
    }
}

impl fmt::Display for TypeSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LineClass {
    Hyperbolic,
    Elliptic,
}

/// Sign of a nondegenerate quadratic space of dimension `d` whose Gram
/// determinant is `disc`.
///
/// With `e = ⌊d/2⌋`, put `s = χ((−1)^e · disc)`. The space is `+` iff `s = 1`,
/// except for odd `d` with `q ≡ 3 (mod 4)`, where it is `+` iff `s = −1`.
/// The zero space is `+`.
pub fn sign_from_discriminant(field: Field, d: usize, disc: u32) -> Result<TypeSign, OrthError> {
    if d == 0 {
        return Ok(TypeSign::Plus);
    }
    if disc == 0 {
        return Err(OrthError::DegenerateSubspace);
    }
    let e = d / 2;
    let x = if e % 2 == 1 { field.neg(disc) } else { disc };
    let square = field.is_square(x)?;
    let plus = if d % 2 == 1 && field.q_mod4() == 3 { !square } else { square };
    Ok(if plus { TypeSign::Plus } else { TypeSign::Minus })
}

/// Predicted sign of an orthogonal direct sum of spaces of signs `s1`, `s2`
/// and dimensions `d1`, `d2`.
pub fn compose_types(s1: TypeSign, d1: usize, s2: TypeSign, d2: usize, q: u32) -> TypeSign {
    if q % 4 == 3 && d1 % 2 == 1 && d2 % 2 == 1 {
        s1.times(s2).flip()
    } else {
        s1.times(s2)
    }
}

/// Nondegenerate symmetric bilinear form on `F_q^d`, `d ≥ 2`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BilinearForm {
    field: Field,
    gram: Matrix,
}

impl BilinearForm {
    pub fn new(field: Field, gram: Matrix) -> Result<Self, OrthError> {
        if gram.rows != gram.cols {
            return Err(OrthError::DimensionMismatch(format!("gram is {}x{}", gram.rows, gram.cols)));
        }
        if gram.rows < 2 {
            return Err(OrthError::AmbientTooSmall(gram.rows));
        }
        let mut g = gram;
        for x in g.data.iter_mut() {
            *x %= field.order();
        }
        if g != g.transpose() {
            return Err(OrthError::NotSymmetric);
        }
        if g.det(field)? == 0 {
            return Err(OrthError::DegenerateForm);
        }
        Ok(BilinearForm { field, gram: g })
    }

    /// The fixed representative of the requested sign used by the `"plus"` /
    /// `"minus"` configuration shorthand: `diag(1, …, 1, δ)` where `δ` is 1 if
    /// the identity form already has that sign and the least nonsquare of
    /// `F_q` otherwise.
    pub fn standard(field: Field, dim: usize, sign: TypeSign) -> Result<Self, OrthError> {
        if dim < 2 {
            return Err(OrthError::AmbientTooSmall(dim));
        }
        let identity = BilinearForm::new(field, Matrix::identity(dim))?;
        if identity.sign() == sign {
            return Ok(identity);
        }
        let mut g = Matrix::identity(dim);
        g.set(dim - 1, dim - 1, field.least_nonsquare());
        BilinearForm::new(field, g)
    }

    #[inline]
    pub fn field(&self) -> Field {
        self.field
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.gram.rows
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    /// `(u, v) = uᵀ G v`.
    pub fn eval(&self, u: &[u32], v: &[u32]) -> u32 {
        let f = self.field;
        let d = self.dim();
        let mut acc = 0u64;
        let q = f.order() as u64;
        for i in 0..d {
            if u[i] == 0 {
                continue;
            }
            let row = self.gram.row(i);
            let mut s = 0u64;
            for j in 0..d {
                s += row[j] as u64 * v[j] as u64;
            }
            acc = (acc + (s % q) * u[i] as u64) % q;
        }
        acc as u32
    }

    #[inline]
    pub fn norm(&self, v: &[u32]) -> u32 {
        self.eval(v, v)
    }

    /// Sign of the whole space.
    pub fn sign(&self) -> TypeSign {
        sign_from_discriminant(self.field, self.dim(), self.gram.det(self.field).expect("square"))
            .expect("nondegenerate form")
    }

    /// Gram matrix of the canonical basis of `a`.
    pub fn restricted_gram(&self, a: &Subspace) -> Matrix {
        let k = a.dim();
        Matrix::from_fn(k, k, |i, j| self.eval(a.row(i), a.row(j)))
    }

    pub fn perp(&self, a: &Subspace) -> Subspace {
        let f = self.field;
        if a.dim() == 0 {
            return Subspace::whole(self.dim());
        }
        // rows of a·G are the linear functionals v ↦ (a_i, v)
        let functionals = Matrix::from_fn(a.dim(), self.dim(), |i, j| {
            let mut s = 0u32;
            for k in 0..self.dim() {
                s = f.add(s, f.mul(a.row(i)[k], self.gram.get(k, j)));
            }
            s
        });
        Subspace::span(f, self.dim(), &functionals.kernel(f)).expect("dimensions agree")
    }

    pub fn radical(&self, a: &Subspace) -> Subspace {
        a.intersect(&self.perp(a), self.field).expect("same ambient")
    }

    pub fn is_nondegenerate(&self, a: &Subspace) -> bool {
        a.dim() == 0 || self.restricted_gram(a).det(self.field).expect("square") != 0
    }

    /// Sign of a nondegenerate subspace.
    pub fn classify(&self, a: &Subspace) -> Result<TypeSign, OrthError> {
        let det = self.restricted_gram(a).det(self.field)?;
        sign_from_discriminant(self.field, a.dim(), det)
    }

    /// `(dimension, sign)` of `a`, or `None` if `a` is degenerate.
    pub fn label(&self, a: &Subspace) -> Option<Label> {
        let det = self.restricted_gram(a).det(self.field).ok()?;
        let sign = sign_from_discriminant(self.field, a.dim(), det).ok()?;
        Some(Label { dim: a.dim(), sign })
    }

    /// Sign of a nondegenerate point; cheaper than the general path.
    pub fn point_sign(&self, p: &Subspace) -> Option<TypeSign> {
        let n = self.norm(p.vector());
        sign_from_discriminant(self.field, 1, n).ok()
    }

    pub fn line_class(&self, l: &Subspace) -> Result<LineClass, OrthError> {
        if l.dim() != 2 {
            return Err(OrthError::WrongDimension { expected: 2, got: l.dim() });
        }
        match self.classify(l)? {
            TypeSign::Plus => Ok(LineClass::Hyperbolic),
            TypeSign::Minus => Ok(LineClass::Elliptic),
        }
    }

    /// Whether `g` preserves the form: `gᵀ G g = G`.
    pub fn is_isometry(&self, g: &Matrix) -> bool {
        let f = self.field;
        let Ok(gg) = g.transpose().mul(&self.gram, f).and_then(|m| m.mul(g, f)) else {
            return false;
        };
        gg == self.gram
    }

    /// Matrix of the reflection in the nonsingular vector `v`:
    /// `x ↦ x − 2 (x,v)/(v,v) · v`.
    pub fn reflection(&self, v: &[u32]) -> Result<Matrix, OrthError> {
        let f = self.field;
        let n = self.norm(v);
        if n == 0 {
            return Err(OrthError::DegenerateSubspace);
        }
        let c = f.mul(2, f.inv(n));
        let d = self.dim();
        // column j is the image of e_j; (e_j, v) = (G v)_j
        let gv = self.gram.apply_col(v, f);
        Ok(Matrix::from_fn(d, d, |i, j| {
            let id = if i == j { 1 } else { 0 };
            f.sub(id, f.mul(c, f.mul(gv[j], v[i])))
        }))
    }
}
