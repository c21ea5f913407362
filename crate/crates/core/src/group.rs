//! Finite groups given by generators: permutations, and matrices over `F_q`
//! acting on column vectors. Order and membership go through a faithful
//! permutation image ("shadow") and a Schreier–Sims stabiliser chain.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::hash::Hash;
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf::{Field, Matrix};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("permutation is not a bijection of 0..{0}")]
    NotAPermutation(usize),
    #[error("generators act on different degrees")]
    DegreeMismatch,
    #[error("matrix is not invertible")]
    Singular,
    #[error("group has more than {0} elements")]
    TooLarge(usize),
    #[error("point outside the action domain")]
    DomainError,
    #[error("orbit-stabiliser check failed: |orbit| = {orbit}, |stab| = {stab}, |G| = {group}")]
    OrderMismatch { orbit: usize, stab: u128, group: u128 },
}

/// Elements of a group acting on the left: `a.compose(b)` is "first `b`, then
/// `a`".
pub trait GroupElem: Clone + Eq + Hash + Ord + fmt::Debug + Send + Sync + 'static {
    fn compose(&self, other: &Self) -> Self;
    fn inverse(&self) -> Self;
    fn is_identity(&self) -> bool;
    /// A faithful permutation image, on a domain that depends only on the
    /// group the element lives in.
    fn shadow(&self) -> Perm;
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Perm(Vec<u32>);

impl fmt::Debug for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "()");
        }
        let mut seen = vec![false; self.0.len()];
        for s in 0..self.0.len() {
            if seen[s] || self.0[s] as usize == s {
                continue;
            }
            write!(f, "(")?;
            let mut x = s;
            let mut first = true;
            while !seen[x] {
                seen[x] = true;
                if !first {
                    write!(f, " ")?;
                }
                write!(f, "{x}")?;
                first = false;
                x = self.0[x] as usize;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl Perm {
    pub fn identity(n: usize) -> Self {
        Perm((0..n as u32).collect())
    }

    pub fn from_images(images: Vec<u32>) -> Result<Self, GroupError> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &x in &images {
            if x as usize >= n || std::mem::replace(&mut seen[x as usize], true) {
                return Err(GroupError::NotAPermutation(n));
            }
        }
        Ok(Perm(images))
    }

    /// Product of disjoint (or not) cycles, applied right to left.
    pub fn from_cycles(n: usize, cycles: &[&[u32]]) -> Self {
        let mut p = Perm::identity(n);
        for c in cycles.iter().rev() {
            let mut img: Vec<u32> = (0..n as u32).collect();
            for (i, &x) in c.iter().enumerate() {
                img[x as usize] = c[(i + 1) % c.len()];
            }
            p = Perm(img).compose(&p);
        }
        p
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn image(&self, x: u32) -> u32 {
        self.0[x as usize]
    }

    pub fn images(&self) -> &[u32] {
        &self.0
    }

    pub fn first_moved(&self) -> Option<u32> {
        self.0.iter().enumerate().find(|(i, &x)| *i as u32 != x).map(|(i, _)| i as u32)
    }

    pub fn order(&self) -> u64 {
        let mut o = 1u64;
        let mut seen = vec![false; self.0.len()];
        for s in 0..self.0.len() {
            let mut len = 0u64;
            let mut x = s;
            while !seen[x] {
                seen[x] = true;
                x = self.0[x] as usize;
                len += 1;
            }
            if len > 0 {
                o = num_lcm(o, len);
            }
        }
        o
    }
}

fn num_lcm(a: u64, b: u64) -> u64 {
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

impl GroupElem for Perm {
    fn compose(&self, other: &Self) -> Self {
        Perm(other.0.iter().map(|&x| self.0[x as usize]).collect())
    }

    fn inverse(&self) -> Self {
        let mut inv = vec![0u32; self.0.len()];
        for (i, &x) in self.0.iter().enumerate() {
            inv[x as usize] = i as u32;
        }
        Perm(inv)
    }

    fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &x)| i as u32 == x)
    }

    fn shadow(&self) -> Perm {
        self.clone()
    }
}

/// An invertible matrix over `F_q`, acting on column vectors.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatElem {
    pub field: Field,
    pub m: Matrix,
}

impl fmt::Debug for MatElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.m.to_rows())
    }
}

impl MatElem {
    pub fn new(field: Field, m: Matrix) -> Result<Self, GroupError> {
        if m.rows != m.cols || m.det(field).map_err(|_| GroupError::Singular)? == 0 {
            return Err(GroupError::Singular);
        }
        Ok(MatElem { field, m })
    }

    pub fn identity(field: Field, d: usize) -> Self {
        MatElem { field, m: Matrix::identity(d) }
    }

    pub fn apply(&self, v: &[u32]) -> Vec<u32> {
        self.m.apply_col(v, self.field)
    }

    pub fn det(&self) -> u32 {
        self.m.det(self.field).expect("square")
    }
}

/// Index of a vector of `F_q^d` in the shadow domain.
pub fn vector_index(v: &[u32], q: u32) -> u32 {
    v.iter().rev().fold(0u32, |acc, &x| acc * q + x)
}

pub fn index_vector(mut i: u32, q: u32, d: usize) -> Vec<u32> {
    let mut v = vec![0; d];
    for x in v.iter_mut() {
        *x = i % q;
        i /= q;
    }
    v
}

impl GroupElem for MatElem {
    fn compose(&self, other: &Self) -> Self {
        MatElem { field: self.field, m: self.m.mul(&other.m, self.field).expect("same size") }
    }

    fn inverse(&self) -> Self {
        MatElem { field: self.field, m: self.m.inverse(self.field).expect("invertible") }
    }

    fn is_identity(&self) -> bool {
        self.m == Matrix::identity(self.m.rows)
    }

    /// The action on all `q^d` vectors.
    fn shadow(&self) -> Perm {
        let q = self.field.order();
        let d = self.m.rows;
        let n = (q as usize).pow(d as u32);
        let mut img = vec![0u32; n];
        for (i, slot) in img.iter_mut().enumerate() {
            let v = index_vector(i as u32, q, d);
            *slot = vector_index(&self.apply(&v), q);
        }
        Perm(img)
    }
}

struct Level {
    base: u32,
    /// `transversal[β]` maps the base point to `β`.
    transversal: Vec<Option<Perm>>,
    orbit: Vec<u32>,
}

/// Base and strong generating set of a permutation group.
pub struct StabChain {
    degree: usize,
    strong: Vec<Perm>,
    levels: Vec<Level>,
}

impl StabChain {
    pub fn new(degree: usize, gens: &[Perm]) -> Self {
        let mut chain = StabChain { degree, strong: Vec::new(), levels: Vec::new() };
        for g in gens {
            if !g.is_identity() {
                chain.strong.push(g.clone());
            }
        }
        for i in 0..chain.strong.len() {
            let g = chain.strong[i].clone();
            chain.ensure_moved(&g);
        }
        for l in 0..chain.levels.len() {
            chain.recompute(l);
        }
        chain.complete();
        chain
    }

    fn base_prefix_fixed(&self, g: &Perm, upto: usize) -> bool {
        self.levels[..upto].iter().all(|l| g.image(l.base) == l.base)
    }

    /// Extends the base until `g` moves some base point.
    fn ensure_moved(&mut self, g: &Perm) {
        if self.base_prefix_fixed(g, self.levels.len()) {
            let b = g.first_moved().expect("non-identity");
            self.levels.push(Level { base: b, transversal: Vec::new(), orbit: Vec::new() });
        }
    }

    fn recompute(&mut self, l: usize) {
        let gens: Vec<Perm> = self.strong.iter().filter(|g| self.base_prefix_fixed(g, l)).cloned().collect();
        let base = self.levels[l].base;
        let mut transversal: Vec<Option<Perm>> = vec![None; self.degree];
        transversal[base as usize] = Some(Perm::identity(self.degree));
        let mut orbit = vec![base];
        let mut i = 0;
        while i < orbit.len() {
            let b = orbit[i];
            let u = transversal[b as usize].clone().expect("in orbit");
            for s in &gens {
                let c = s.image(b);
                if transversal[c as usize].is_none() {
                    transversal[c as usize] = Some(s.compose(&u));
                    orbit.push(c);
                }
            }
            i += 1;
        }
        self.levels[l].transversal = transversal;
        self.levels[l].orbit = orbit;
    }

    /// Sifts `g` through levels `from..`; returns the residue and the level
    /// at which sifting stopped (`levels.len()` if it went all the way).
    fn sift(&self, g: &Perm, from: usize) -> (Perm, usize) {
        let mut h = g.clone();
        for l in from..self.levels.len() {
            let b = h.image(self.levels[l].base);
            match &self.levels[l].transversal[b as usize] {
                Some(u) => h = u.inverse().compose(&h),
                None => return (h, l),
            }
        }
        let n = self.levels.len();
        (h, n)
    }

    fn complete(&mut self) {
        let mut i = self.levels.len() as isize - 1;
        while i >= 0 {
            let l = i as usize;
            self.recompute(l);
            let gens: Vec<Perm> = self.strong.iter().filter(|g| self.base_prefix_fixed(g, l)).cloned().collect();
            let orbit = self.levels[l].orbit.clone();
            let mut added = None;
            'scan: for &b in &orbit {
                let ub = self.levels[l].transversal[b as usize].clone().expect("orbit");
                for s in &gens {
                    let sb = s.image(b);
                    let usb = self.levels[l].transversal[sb as usize].as_ref().expect("closed orbit");
                    let h = usb.inverse().compose(&s.compose(&ub));
                    let (r, j) = self.sift(&h, l + 1);
                    if !r.is_identity() {
                        added = Some((r, j));
                        break 'scan;
                    }
                }
            }
            match added {
                Some((r, j)) => {
                    self.strong.push(r.clone());
                    if j == self.levels.len() {
                        self.ensure_moved(&r);
                    }
                    for k in l + 1..=j.min(self.levels.len() - 1) {
                        self.recompute(k);
                    }
                    i = j.min(self.levels.len() - 1) as isize;
                }
                None => i -= 1,
            }
        }
    }

    pub fn order(&self) -> u128 {
        self.levels.iter().map(|l| l.orbit.len() as u128).product()
    }

    pub fn contains(&self, g: &Perm) -> bool {
        if g.degree() != self.degree {
            return false;
        }
        let (r, j) = self.sift(g, 0);
        j == self.levels.len() && r.is_identity()
    }

    pub fn base(&self) -> Vec<u32> {
        self.levels.iter().map(|l| l.base).collect()
    }

    pub fn strong_generators(&self) -> &[Perm] {
        &self.strong
    }
}

/// A finite group by generators, with lazily built order/membership data.
pub struct GroupSpec<E: GroupElem> {
    identity: E,
    gens: Vec<E>,
    chain: OnceLock<StabChain>,
}

impl<E: GroupElem> Clone for GroupSpec<E> {
    fn clone(&self) -> Self {
        GroupSpec { identity: self.identity.clone(), gens: self.gens.clone(), chain: OnceLock::new() }
    }
}

impl<E: GroupElem> fmt::Debug for GroupSpec<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupSpec").field("gens", &self.gens).finish()
    }
}

impl<E: GroupElem> GroupSpec<E> {
    pub fn new(identity: E, gens: Vec<E>) -> Self {
        let gens = gens.into_iter().filter(|g| !g.is_identity()).collect();
        GroupSpec { identity, gens, chain: OnceLock::new() }
    }

    pub fn identity(&self) -> &E {
        &self.identity
    }

    pub fn generators(&self) -> &[E] {
        &self.gens
    }

    pub fn chain(&self) -> &StabChain {
        self.chain.get_or_init(|| {
            let degree = self.identity.shadow().degree();
            let shadows: Vec<Perm> = self.gens.iter().map(GroupElem::shadow).collect();
            StabChain::new(degree, &shadows)
        })
    }

    pub fn order(&self) -> u128 {
        self.chain().order()
    }

    pub fn contains(&self, g: &E) -> bool {
        self.chain().contains(&g.shadow())
    }

    /// All elements, by closure under right multiplication by generators.
    pub fn elements(&self, cap: usize) -> Result<Vec<E>, GroupError> {
        let mut seen: HashSet<E> = HashSet::new();
        let mut out = vec![self.identity.clone()];
        seen.insert(self.identity.clone());
        let mut i = 0;
        while i < out.len() {
            for s in &self.gens {
                let h = out[i].compose(s);
                if seen.insert(h.clone()) {
                    out.push(h);
                    if out.len() > cap {
                        return Err(GroupError::TooLarge(cap));
                    }
                }
            }
            i += 1;
        }
        out.sort();
        Ok(out)
    }

    /// Product of a random word in the generators (not uniform; used for
    /// spot checks).
    pub fn random_word<R: Rng>(&self, len: usize, rng: &mut R) -> E {
        let mut g = self.identity.clone();
        if self.gens.is_empty() {
            return g;
        }
        for _ in 0..len {
            let s = &self.gens[rng.gen_range(0..self.gens.len())];
            g = if rng.gen_bool(0.5) { g.compose(s) } else { g.compose(&s.inverse()) };
        }
        g
    }

    /// Subgroup generated by `gens` (same identity).
    pub fn subgroup(&self, gens: Vec<E>) -> GroupSpec<E> {
        GroupSpec::new(self.identity.clone(), gens)
    }
}

/// An orbit with, for each point, a group element carrying the base point to
/// it.
#[derive(Clone, Debug)]
pub struct Orbit<E, P> {
    pub points: Vec<P>,
    pub index: HashMap<P, usize>,
    pub reps: Vec<E>,
}

impl<E, P: Hash + Eq> Orbit<E, P> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, p: &P) -> bool {
        self.index.contains_key(p)
    }
}

pub fn orbit<E, P, A>(group: &GroupSpec<E>, x: &P, act: A) -> Orbit<E, P>
where
    E: GroupElem,
    P: Clone + Eq + Hash,
    A: Fn(&E, &P) -> P,
{
    let mut points = vec![x.clone()];
    let mut reps = vec![group.identity().clone()];
    let mut index = HashMap::from([(x.clone(), 0usize)]);
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for s in group.generators() {
            let y = act(s, &points[i]);
            if !index.contains_key(&y) {
                index.insert(y.clone(), points.len());
                reps.push(s.compose(&reps[i]));
                points.push(y);
                queue.push_back(points.len() - 1);
            }
        }
    }
    Orbit { points, index, reps }
}

/// Stabiliser of `x`, generated by a sufficient subset of the Schreier
/// generators. The orbit–stabiliser relation is checked before returning.
pub fn stabilizer<E, P, A>(group: &GroupSpec<E>, x: &P, act: A) -> Result<(GroupSpec<E>, Orbit<E, P>), GroupError>
where
    E: GroupElem,
    P: Clone + Eq + Hash,
    A: Fn(&E, &P) -> P,
{
    let orb = orbit(group, x, &act);
    let target = group.order() / orb.len() as u128;
    let degree = group.identity().shadow().degree();
    let mut accepted: Vec<E> = Vec::new();
    let mut chain = StabChain::new(degree, &[]);
    'outer: for (i, p) in orb.points.iter().enumerate() {
        for s in group.generators() {
            if chain.order() == target {
                break 'outer;
            }
            let y = act(s, p);
            let j = orb.index[&y];
            let h = orb.reps[j].inverse().compose(&s.compose(&orb.reps[i]));
            if h.is_identity() {
                continue;
            }
            let sh = h.shadow();
            if !chain.contains(&sh) {
                accepted.push(h);
                let shadows: Vec<Perm> = accepted.iter().map(GroupElem::shadow).collect();
                chain = StabChain::new(degree, &shadows);
            }
        }
    }
    if chain.order() != target {
        return Err(GroupError::OrderMismatch { orbit: orb.len(), stab: chain.order(), group: group.order() });
    }
    let stab = group.subgroup(accepted);
    let _ = stab.chain.set(chain);
    Ok((stab, orb))
}

/// The symmetric group on `n` points, by a transposition and an `n`-cycle.
pub fn symmetric_group(n: usize) -> GroupSpec<Perm> {
    let mut gens = Vec::new();
    if n >= 2 {
        gens.push(Perm::from_cycles(n, &[&[0, 1]]));
        let cyc: Vec<u32> = (0..n as u32).collect();
        gens.push(Perm::from_cycles(n, &[&cyc]));
    }
    GroupSpec::new(Perm::identity(n), gens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::Field;
    use proptest::prelude::*;

    #[test]
    fn symmetric_group_orders() {
        for n in 1..=7usize {
            let g = symmetric_group(n);
            let expect: u128 = (1..=n as u128).product();
            assert_eq!(g.order(), expect);
            if n <= 5 {
                assert_eq!(g.elements(1000).unwrap().len() as u128, expect);
            }
        }
    }

    #[test]
    fn s4_point_stabilizer() {
        let g = symmetric_group(4);
        let (stab, orb) = stabilizer(&g, &0u32, |p: &Perm, x: &u32| p.image(*x)).unwrap();
        assert_eq!(orb.len(), 4);
        assert_eq!(stab.order(), 6);
        assert!(stab.generators().iter().all(|s| s.image(0) == 0));
        // oracle: count elements fixing 0
        let fixing = g.elements(100).unwrap().iter().filter(|p| p.image(0) == 0).count();
        assert_eq!(fixing, 6);
    }

    #[test]
    fn fixed_point_orbit() {
        let g = GroupSpec::new(Perm::identity(5), vec![Perm::from_cycles(5, &[&[0, 1, 2]])]);
        let (stab, orb) = stabilizer(&g, &4u32, |p: &Perm, x: &u32| p.image(*x)).unwrap();
        assert_eq!(orb.len(), 1);
        assert_eq!(stab.order(), 3);
    }

    #[test]
    fn membership() {
        let a4 = GroupSpec::new(
            Perm::identity(4),
            vec![Perm::from_cycles(4, &[&[0, 1, 2]]), Perm::from_cycles(4, &[&[1, 2, 3]])],
        );
        assert_eq!(a4.order(), 12);
        assert!(a4.contains(&Perm::from_cycles(4, &[&[0, 1], &[2, 3]])));
        assert!(!a4.contains(&Perm::from_cycles(4, &[&[0, 1]])));
    }

    #[test]
    fn matrix_group_order() {
        // GL_2(F_3) has order 48
        let f = Field::new(3).unwrap();
        let a = MatElem::new(f, Matrix::from_rows(&[vec![1, 1], vec![0, 1]]).unwrap()).unwrap();
        let b = MatElem::new(f, Matrix::from_rows(&[vec![0, 1], vec![2, 0]]).unwrap()).unwrap();
        let c = MatElem::new(f, Matrix::from_rows(&[vec![2, 0], vec![0, 1]]).unwrap()).unwrap();
        let g = GroupSpec::new(MatElem::identity(f, 2), vec![a, b, c]);
        assert_eq!(g.order(), 48);
        assert_eq!(g.elements(100).unwrap().len(), 48);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn chain_order_matches_enumeration(seed in any::<u64>(), k in 1usize..4) {
            let mut rng = crate::rng(seed);
            let n = 6;
            let gens: Vec<Perm> = (0..k).map(|_| {
                let mut v: Vec<u32> = (0..n as u32).collect();
                use rand::seq::SliceRandom;
                v.shuffle(&mut rng);
                Perm::from_images(v).unwrap()
            }).collect();
            let g = GroupSpec::new(Perm::identity(n), gens);
            let els = g.elements(1000).unwrap();
            prop_assert_eq!(g.order(), els.len() as u128);
            for e in &els { prop_assert!(g.contains(e)); }
            let (stab, orb) = stabilizer(&g, &0u32, |p: &Perm, x: &u32| p.image(*x)).unwrap();
            prop_assert_eq!(orb.len() as u128 * stab.order(), g.order());
        }
    }
}
