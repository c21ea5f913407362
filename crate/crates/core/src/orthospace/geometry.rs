use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gf::Field;
use crate::pregeo::Pregeometry;

use super::{enumerate_subspaces, BilinearForm, OrthError, Subspace, TypeSign};

/// `(dimension, sign)` class of a nondegenerate subspace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Label {
    pub dim: usize,
    pub sign: TypeSign,
}

impl Label {
    pub fn new(dim: usize, sign: TypeSign) -> Self {
        Label { dim, sign }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.dim, self.sign)
    }
}

/// The label list of a hall `W`; at most one entry per `(dim, sign)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Hall {
    pub entries: Vec<Label>,
}

impl Hall {
    pub fn new(entries: Vec<Label>) -> Self {
        Hall { entries }
    }

    /// `{p+, p−, l−, π±, U+, U₁+, …}`: both point classes, a negative line,
    /// the plane of sign `plane`, and positive spaces of every dimension from
    /// 4 up to `n`.
    pub fn standard(n: usize, plane: TypeSign) -> Self {
        let mut e = vec![
            Label::new(1, TypeSign::Plus),
            Label::new(1, TypeSign::Minus),
            Label::new(2, TypeSign::Minus),
            Label::new(3, plane),
        ];
        for d in 4..=n {
            e.push(Label::new(d, TypeSign::Plus));
        }
        Hall { entries: e }
    }

    /// The rank-3 hall `{p+, p−, l−, π+, π−}`.
    pub fn rank3_both_planes() -> Self {
        Hall {
            entries: vec![
                Label::new(1, TypeSign::Plus),
                Label::new(1, TypeSign::Minus),
                Label::new(2, TypeSign::Minus),
                Label::new(3, TypeSign::Plus),
                Label::new(3, TypeSign::Minus),
            ],
        }
    }

    /// Every class of every proper dimension.
    pub fn everything(n: usize) -> Self {
        Hall {
            entries: (1..=n)
                .flat_map(|d| [Label::new(d, TypeSign::Plus), Label::new(d, TypeSign::Minus)])
                .collect(),
        }
    }

    fn validate(&self, n: usize) -> Result<(), OrthError> {
        let mut seen = BTreeSet::new();
        for l in &self.entries {
            if l.dim == 0 || l.dim > n {
                return Err(OrthError::UnrealizableHall(format!("dimension {} outside 1..={n}", l.dim)));
            }
            if !seen.insert(*l) {
                return Err(OrthError::UnrealizableHall(format!("class {l} listed twice")));
            }
        }
        Ok(())
    }

    pub fn types(&self) -> BTreeSet<usize> {
        self.entries.iter().map(|l| l.dim).collect()
    }
}

/// The geometry on nondegenerate proper subspaces of `(V, f)` whose label is
/// in an admissible set. Membership is decided by label; nothing is
/// materialised unless asked for.
#[derive(Debug)]
pub struct OrthGeometry {
    form: BilinearForm,
    labels: BTreeSet<Label>,
    hall: Option<Vec<Subspace>>,
    points: OnceLock<Vec<Subspace>>,
}

impl Clone for OrthGeometry {
    fn clone(&self) -> Self {
        OrthGeometry {
            form: self.form.clone(),
            labels: self.labels.clone(),
            hall: self.hall.clone(),
            points: OnceLock::new(),
        }
    }
}

impl OrthGeometry {
    /// All nondegenerate proper subspaces.
    pub fn full(form: BilinearForm) -> Self {
        let n = form.dim() - 1;
        let labels = Hall::everything(n).entries.into_iter().collect();
        OrthGeometry { form, labels, hall: None, points: OnceLock::new() }
    }

    /// Subspaces whose label occurs in `labels`; every listed class must be
    /// nonempty. No hall is realised.
    pub fn with_labels(form: BilinearForm, labels: &Hall) -> Result<Self, OrthError> {
        let n = form.dim() - 1;
        labels.validate(n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0x4c42_4c53);
        let f = form.field();
        for &l in &labels.entries {
            // a class is nonempty iff some subspace carries the label; random
            // subspaces hit each nonempty class with probability bounded below
            let found = (0..20_000).any(|_| form.label(&Subspace::random(f, form.dim(), l.dim, &mut rng)) == Some(l));
            if !found {
                return Err(OrthError::UnrealizableHall(format!("class {l} is empty")));
            }
        }
        Ok(OrthGeometry {
            form,
            labels: labels.entries.iter().copied().collect(),
            hall: None,
            points: OnceLock::new(),
        })
    }

    /// Subspaces whose label occurs in `hall`, after realising the hall as
    /// concrete pairwise-incident subspaces.
    pub fn with_hall(form: BilinearForm, hall: &Hall) -> Result<Self, OrthError> {
        let n = form.dim() - 1;
        hall.validate(n)?;
        let w = realize_hall(&form, hall)?;
        Ok(OrthGeometry {
            form,
            labels: hall.entries.iter().copied().collect(),
            hall: Some(w),
            points: OnceLock::new(),
        })
    }

    pub fn form(&self) -> &BilinearForm {
        &self.form
    }

    pub fn field(&self) -> Field {
        self.form.field()
    }

    /// Rank parameter `n`: the ambient space has dimension `n + 1`.
    pub fn n(&self) -> usize {
        self.form.dim() - 1
    }

    pub fn ambient(&self) -> usize {
        self.form.dim()
    }

    pub fn labels(&self) -> &BTreeSet<Label> {
        &self.labels
    }

    pub fn types(&self) -> BTreeSet<usize> {
        self.labels.iter().map(|l| l.dim).collect()
    }

    /// A concrete hall `W` (same order as the defining label list).
    pub fn hall_elements(&self) -> Option<&[Subspace]> {
        self.hall.as_deref()
    }

    pub fn admits(&self, label: Label) -> bool {
        self.labels.contains(&label)
    }

    /// The label of `u` if `u` is an element.
    pub fn element_label(&self, u: &Subspace) -> Option<Label> {
        if u.dim() == 0 || u.dim() >= self.ambient() {
            return None;
        }
        let l = if u.dim() == 1 {
            Label::new(1, self.form.point_sign(u)?)
        } else {
            self.form.label(u)?
        };
        self.labels.contains(&l).then_some(l)
    }

    pub fn is_element(&self, u: &Subspace) -> bool {
        self.element_label(u).is_some()
    }

    /// Symmetrised containment (the caller guarantees both are elements).
    pub fn incident(&self, a: &Subspace, b: &Subspace) -> bool {
        let f = self.field();
        if a.dim() <= b.dim() {
            b.contains(a, f)
        } else {
            a.contains(b, f)
        }
    }

    /// Points of the geometry, sorted by canonical key.
    pub fn points(&self) -> &[Subspace] {
        self.points.get_or_init(|| {
            let f = self.field();
            Subspace::whole(self.ambient())
                .points(f)
                .into_iter()
                .filter(|p| self.is_element(p))
                .collect()
        })
    }

    /// Whether two distinct points span a line of the geometry.
    pub fn collinear(&self, a: &Subspace, b: &Subspace) -> bool {
        a != b && self.is_element(&a.join(b, self.field()).expect("same ambient"))
    }

    /// Elements of a given dimension, in canonical order.
    pub fn elements_of_dim(&self, k: usize) -> Vec<Subspace> {
        if k == 1 {
            return self.points().to_vec();
        }
        if !self.types().contains(&k) {
            return Vec::new();
        }
        enumerate_subspaces(self.field(), self.ambient(), k)
            .into_iter()
            .filter(|u| self.is_element(u))
            .collect()
    }

    /// Builds the explicit pregeometry: ids are assigned in order of
    /// (dimension, canonical key); the type of an element is its dimension.
    pub fn materialize(&self) -> MaterializedOrth {
        let f = self.field();
        let types: Vec<usize> = self.types().into_iter().collect();
        let mut elements = Vec::new();
        for &k in &types {
            elements.extend(self.elements_of_dim(k));
        }
        let index: HashMap<Subspace, u32> =
            elements.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect();
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); elements.len()];
        for (i, b) in elements.iter().enumerate() {
            for &k in types.iter().filter(|&&k| k < b.dim()) {
                let subs = if k == 1 { b.points(f) } else { b.subspaces(k, f) };
                for s in subs {
                    if let Some(&j) = index.get(&s) {
                        adj[i].push(j);
                        adj[j as usize].push(i as u32);
                    }
                }
            }
        }
        let typ: Vec<u32> = elements.iter().map(|s| s.dim() as u32).collect();
        let labels: Vec<String> = elements
            .iter()
            .map(|s| format!("{}{:?}", self.element_label(s).expect("element"), s))
            .collect();
        let geometry = Pregeometry::from_adjacency(typ, labels, adj).expect("containment satisfies (Pre)");
        MaterializedOrth { geometry, elements, index }
    }
}

/// An [`OrthGeometry`] turned into an explicit [`Pregeometry`], together with
/// the translation between ids and subspaces.
#[derive(Clone, Debug)]
pub struct MaterializedOrth {
    pub geometry: Pregeometry,
    pub elements: Vec<Subspace>,
    pub index: HashMap<Subspace, u32>,
}

impl MaterializedOrth {
    pub fn id(&self, s: &Subspace) -> Option<u32> {
        self.index.get(s).copied()
    }
}

/// Finds pairwise-incident subspaces with the requested labels.
///
/// Every element of a hall contains every element of smaller dimension, so the
/// search proceeds dimension by dimension: the candidates at dimension `d` are
/// superspaces of the span of everything chosen below. Candidates come from a
/// fixed-seed generator; the search backtracks within a bounded budget.
fn realize_hall(form: &BilinearForm, hall: &Hall) -> Result<Vec<Subspace>, OrthError> {
    let mut levels: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut dims: Vec<usize> = hall.types().into_iter().collect();
    dims.sort();
    for d in dims {
        let idx = (0..hall.entries.len()).filter(|&i| hall.entries[i].dim == d).collect();
        levels.push((d, idx));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x4841_4c4c);
    let mut chosen: Vec<Option<Subspace>> = vec![None; hall.entries.len()];
    let mut budget = 200_000usize;
    let ambient = form.dim();
    if search(form, hall, &levels, 0, &Subspace::zero(ambient), &mut chosen, &mut rng, &mut budget) {
        Ok(chosen.into_iter().map(|s| s.expect("filled")).collect())
    } else {
        Err(OrthError::UnrealizableHall(format!(
            "no pairwise incident subspaces with labels {:?}",
            hall.entries.iter().map(|l| l.to_string()).collect::<Vec<_>>()
        )))
    }
}

#[allow(clippy::too_many_arguments)]
fn search(
    form: &BilinearForm,
    hall: &Hall,
    levels: &[(usize, Vec<usize>)],
    level: usize,
    below: &Subspace,
    chosen: &mut [Option<Subspace>],
    rng: &mut ChaCha8Rng,
    budget: &mut usize,
) -> bool {
    let Some((d, idx)) = levels.get(level) else {
        return true;
    };
    let f = form.field();
    if below.dim() > *d || (idx.len() > 1 && below.dim() == *d) {
        return false;
    }
    const TRIES: usize = 24;
    let mut candidates: Vec<Vec<Subspace>> = Vec::new();
    for &i in idx {
        let want = hall.entries[i];
        let mut c: Vec<Subspace> = Vec::new();
        for _ in 0..TRIES * 8 {
            if *budget == 0 {
                return false;
            }
            *budget -= 1;
            let s = below.random_superspace(f, *d, rng);
            if form.label(&s) == Some(want) && !c.contains(&s) {
                c.push(s);
                if c.len() == TRIES {
                    break;
                }
            }
            if below.dim() == *d {
                break;
            }
        }
        if c.is_empty() {
            return false;
        }
        candidates.push(c);
    }
    // try combinations (at most two entries per dimension)
    let combos: Vec<Vec<&Subspace>> = match candidates.len() {
        1 => candidates[0].iter().map(|s| vec![s]).collect(),
        2 => candidates[0]
            .iter()
            .flat_map(|a| candidates[1].iter().filter(move |b| *b != a).map(move |b| vec![a, b]))
            .take(TRIES * 4)
            .collect(),
        _ => unreachable!("labels are distinct, so at most two per dimension"),
    };
    for combo in combos {
        let mut span = below.clone();
        for (k, s) in combo.iter().enumerate() {
            chosen[idx[k]] = Some((*s).clone());
            span = span.join(s, f).expect("same ambient");
        }
        if search(form, hall, levels, level + 1, &span, chosen, rng, budget) {
            return true;
        }
        if *budget == 0 {
            break;
        }
    }
    for &i in idx {
        chosen[i] = None;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::Field;

    fn form(q: u32, dim: usize, s: TypeSign) -> BilinearForm {
        BilinearForm::standard(Field::new(q).unwrap(), dim, s).unwrap()
    }

    #[test]
    fn element_count_n2_q3_matches_enumeration() {
        let form = form(3, 3, TypeSign::Plus);
        let f = form.field();
        let g = OrthGeometry::full(form.clone());
        let m = g.materialize();
        let oracle = (1..=2)
            .flat_map(|k| enumerate_subspaces(f, 3, k))
            .filter(|s| {
                // nondegenerate iff Gram determinant of any basis is nonzero
                let b = s.basis();
                let k = b.len();
                let gram = crate::gf::Matrix::from_fn(k, k, |i, j| form.eval(&b[i], &b[j]));
                gram.det(f).unwrap() != 0
            })
            .count();
        assert_eq!(m.geometry.len(), oracle);
        assert!(m.geometry.is_geometry().ok);
    }

    #[test]
    fn full_geometries_are_geometries() {
        for (q, d) in [(3u32, 3usize), (5, 3), (3, 4), (5, 4)] {
            for s in [TypeSign::Plus, TypeSign::Minus] {
                let m = OrthGeometry::full(form(q, d, s)).materialize();
                let check = m.geometry.is_geometry();
                assert!(check.ok, "q={q} d={d} witness {:?}", check.witness);
            }
        }
    }

    #[test]
    fn hall_realisation() {
        let form4 = form(11, 5, TypeSign::Plus);
        for plane in [TypeSign::Plus, TypeSign::Minus] {
            let g = OrthGeometry::with_hall(form4.clone(), &Hall::standard(4, plane)).unwrap();
            let w = g.hall_elements().unwrap();
            assert_eq!(w.len(), 5);
            for a in w {
                assert!(g.is_element(a));
                for b in w {
                    if a.dim() != b.dim() {
                        assert!(g.incident(a, b));
                    }
                }
            }
        }
        let form3 = form(5, 4, TypeSign::Minus);
        let g = OrthGeometry::with_hall(form3, &Hall::rank3_both_planes()).unwrap();
        assert_eq!(g.hall_elements().unwrap().len(), 5);
    }

    #[test]
    fn contradictory_hall_rejected() {
        // two lines would both have to be the span of the two points
        let h = Hall::new(vec![
            Label::new(1, TypeSign::Plus),
            Label::new(1, TypeSign::Minus),
            Label::new(2, TypeSign::Minus),
            Label::new(2, TypeSign::Plus),
        ]);
        assert!(matches!(
            OrthGeometry::with_hall(form(7, 4, TypeSign::Plus), &h),
            Err(OrthError::UnrealizableHall(_))
        ));
        let dup = Hall::new(vec![Label::new(1, TypeSign::Plus), Label::new(1, TypeSign::Plus)]);
        assert!(OrthGeometry::with_hall(form(7, 4, TypeSign::Plus), &dup).is_err());
    }

    #[test]
    fn everything_hall_recovers_full_geometry() {
        let f = form(3, 4, TypeSign::Minus);
        let full = OrthGeometry::full(f.clone()).materialize();
        let all = OrthGeometry::with_labels(f, &Hall::everything(3)).unwrap().materialize();
        assert_eq!(full.elements, all.elements);
        assert_eq!(full.geometry, all.geometry);
    }

    #[test]
    fn residue_of_point_is_smaller_orthogonal_geometry() {
        let form4 = form(5, 4, TypeSign::Plus);
        let f = form4.field();
        let g = OrthGeometry::full(form4.clone());
        let m = g.materialize();
        let x = g.points()[0].clone();
        let xid = m.id(&x).unwrap();
        let (res, ids) = m.geometry.residue(&[xid]).unwrap();
        // the induced form on x^⊥
        let perp = form4.perp(&x);
        let b = perp.basis();
        let gram = crate::gf::Matrix::from_fn(3, 3, |i, j| form4.eval(&b[i], &b[j]));
        let small = OrthGeometry::full(BilinearForm::new(f, gram).unwrap()).materialize();
        assert_eq!(res.len(), small.geometry.len());
        // U ↦ U ∩ x^⊥, written in coordinates of the basis of x^⊥
        let coords = |u: &Subspace| -> Subspace {
            let w = u.intersect(&perp, f).unwrap();
            let vs: Vec<Vec<u32>> = w
                .basis()
                .iter()
                .map(|v| {
                    let m = crate::gf::Matrix::from_fn(4, 3, |r, c| b[c][r]);
                    crate::gf::solve_linear(&m, v, f).unwrap().particular.unwrap()
                })
                .collect();
            Subspace::span(f, 3, &vs).unwrap()
        };
        let map: Vec<u32> = ids
            .iter()
            .map(|&id| small.id(&coords(&m.elements[id as usize])).expect("maps to an element"))
            .collect();
        assert!(res.is_isomorphism_to(&small.geometry, &map, |t| t - 1));
    }
}
