//! Coset enumeration (HLT strategy with coincidence processing) for finitely
//! presented groups.
//!
//! Words are sequences of nonzero integers: `k` stands for the `k`-th
//! generator (1-based) and `-k` for its inverse.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group::Perm;

pub type Word = Vec<i32>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TcError {
    #[error("coset enumeration exceeded {0} cosets")]
    CapExceeded(usize),
    #[error("word uses letter {0} outside the generators")]
    InvalidLetter(i32),
}

pub const DEFAULT_COSET_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presentation {
    pub generators: Vec<String>,
    pub relators: Vec<Word>,
}

impl Presentation {
    pub fn new(generators: Vec<String>, relators: Vec<Word>) -> Self {
        Presentation { generators, relators }
    }

    /// Generators named `g1, g2, …`.
    pub fn with_count(n: usize, relators: Vec<Word>) -> Self {
        Presentation { generators: (1..=n).map(|i| format!("g{i}")).collect(), relators }
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    fn check(&self, w: &[i32]) -> Result<(), TcError> {
        match w.iter().find(|&&l| l == 0 || l.unsigned_abs() as usize > self.rank()) {
            Some(&l) => Err(TcError::InvalidLetter(l)),
            None => Ok(()),
        }
    }
}

/// Free reduction of a word.
pub fn free_reduce(w: &[i32]) -> Word {
    let mut out: Word = Vec::with_capacity(w.len());
    for &l in w {
        if out.last() == Some(&-l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

pub fn invert(w: &[i32]) -> Word {
    w.iter().rev().map(|&l| -l).collect()
}

/// Cyclic free reduction: free reduction followed by stripping letters that
/// cancel around the end.
pub fn cyclic_reduce(w: &[i32]) -> Word {
    let mut r = free_reduce(w);
    while r.len() >= 2 && r[0] == -r[r.len() - 1] {
        r.pop();
        r.remove(0);
    }
    r
}

/// A presentation after eliminating generators through short relators, with each original generator expressed in the new ones.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Simplified {
    pub presentation: Presentation,
    /// `images[k]` is the word for original generator `k + 1`.
    pub images: Vec<Word>,
}

impl Simplified {
    /// Rewrites a word over the original generators.
    pub fn rewrite(&self, w: &[i32]) -> Word {
        let mut out = Vec::new();
        for &l in w {
            let img = &self.images[l.unsigned_abs() as usize - 1];
            if l > 0 {
                out.extend_from_slice(img);
            } else {
                out.extend(invert(img));
            }
        }
        free_reduce(&out)
    }
}

/// Repeatedly uses relators of length at most three in which a generator `g`
/// occurs once to eliminate `g`, then renumbers the survivors in order.
pub fn simplify_presentation(pres: &Presentation) -> Simplified {
    let n = pres.rank();
    let mut subst: Vec<Option<Word>> = vec![None; n];
    fn expand(subst: &[Option<Word>], w: &[i32]) -> Word {
        let mut out = Vec::with_capacity(w.len());
        for &l in w {
            match &subst[l.unsigned_abs() as usize - 1] {
                None => out.push(l),
                Some(img) => {
                    let e = expand(subst, img);
                    if l > 0 {
                        out.extend(e);
                    } else {
                        out.extend(invert(&e));
                    }
                }
            }
        }
        free_reduce(&out)
    }
    // position of a letter whose generator occurs exactly once
    fn once(w: &[i32]) -> Option<usize> {
        (0..w.len()).find(|&i| w.iter().filter(|l| l.unsigned_abs() == w[i].unsigned_abs()).count() == 1)
    }
    let mut rels: Vec<Word> = pres.relators.clone();
    loop {
        let mut changed = false;
        let mut kept = Vec::with_capacity(rels.len());
        for r in &rels {
            let w = cyclic_reduce(&expand(&subst, r));
            match w.len() {
                0 => changed = true,
                1 => {
                    subst[w[0].unsigned_abs() as usize - 1] = Some(Vec::new());
                    changed = true;
                }
                2 | 3 if once(&w).is_some() => {
                    // g r = 1  ⇒  g = r⁻¹
                    let i = once(&w).unwrap();
                    let g = w[i];
                    let rest: Word = w[i + 1..].iter().chain(&w[..i]).copied().collect();
                    let img = if g > 0 { invert(&rest) } else { rest };
                    subst[g.unsigned_abs() as usize - 1] = Some(img);
                    changed = true;
                }
                _ => kept.push(w),
            }
        }
        rels = kept;
        if !changed {
            break;
        }
    }
    let mut new_id = vec![0i32; n];
    let mut names = Vec::new();
    for k in 0..n {
        if subst[k].is_none() {
            names.push(pres.generators[k].clone());
            new_id[k] = names.len() as i32;
        }
    }
    let renumber = |w: &Word| -> Word { w.iter().map(|&l| l.signum() * new_id[l.unsigned_abs() as usize - 1]).collect() };
    let images = (1..=n as i32).map(|g| renumber(&expand(&subst, &[g]))).collect();
    let mut relators: Vec<Word> = rels.iter().map(renumber).collect();
    relators.sort();
    relators.dedup();
    Simplified { presentation: Presentation::new(names, relators), images }
}

const UNDEF: u32 = u32::MAX;

#[inline]
fn col(letter: i32) -> usize {
    if letter > 0 {
        2 * (letter as usize - 1)
    } else {
        2 * ((-letter) as usize - 1) + 1
    }
}

/// A complete, standardised coset table: coset `0` is the subgroup, and the
/// remaining cosets are numbered in order of first appearance when rows are
/// read in order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CosetTable {
    pub generators: usize,
    cosets: usize,
    table: Vec<u32>,
}

impl CosetTable {
    pub fn index(&self) -> usize {
        self.cosets
    }

    /// Image of coset `c` under a letter.
    pub fn act(&self, c: u32, letter: i32) -> u32 {
        self.table[c as usize * 2 * self.generators + col(letter)]
    }

    pub fn act_word(&self, c: u32, w: &[i32]) -> u32 {
        w.iter().fold(c, |c, &l| self.act(c, l))
    }

    /// The action of generator `k` (1-based) on cosets, `c ↦ c·g_k`.
    pub fn generator_perm(&self, k: usize) -> Perm {
        Perm::from_images((0..self.index() as u32).map(|c| self.act(c, k as i32)).collect())
            .expect("complete coset tables give permutations")
    }

    /// A word `w` with `0·w = c`, for every coset, shortest in BFS order.
    pub fn transversal(&self) -> Vec<Word> {
        let n = self.index();
        let mut words: Vec<Option<Word>> = vec![None; n];
        words[0] = Some(Vec::new());
        let mut queue = std::collections::VecDeque::from([0u32]);
        while let Some(c) = queue.pop_front() {
            for g in 1..=self.generators as i32 {
                for l in [g, -g] {
                    let d = self.act(c, l) as usize;
                    if words[d].is_none() {
                        let mut w = words[c as usize].clone().expect("visited");
                        w.push(l);
                        words[d] = Some(w);
                        queue.push_back(d as u32);
                    }
                }
            }
        }
        words.into_iter().map(|w| w.expect("coset tables are transitive")).collect()
    }
}

struct Enumerator {
    width: usize,
    table: Vec<u32>,
    parent: Vec<u32>,
    live: usize,
    cap: usize,
    queue: Vec<u32>,
}

impl Enumerator {
    fn new(gens: usize, cap: usize) -> Self {
        let width = 2 * gens;
        Enumerator { width, table: vec![UNDEF; width], parent: vec![0], live: 1, cap, queue: Vec::new() }
    }

    #[inline]
    fn get(&self, c: u32, x: usize) -> u32 {
        self.table[c as usize * self.width + x]
    }

    #[inline]
    fn set(&mut self, c: u32, x: usize, d: u32) {
        self.table[c as usize * self.width + x] = d;
    }

    fn is_live(&self, c: u32) -> bool {
        self.parent[c as usize] == c
    }

    fn define(&mut self, c: u32, x: usize) -> Result<(), TcError> {
        if self.parent.len() >= self.cap {
            return Err(TcError::CapExceeded(self.cap));
        }
        let d = self.parent.len() as u32;
        self.parent.push(d);
        self.table.extend(std::iter::repeat(UNDEF).take(self.width));
        self.live += 1;
        self.set(c, x, d);
        self.set(d, x ^ 1, c);
        Ok(())
    }

    fn rep(&mut self, c: u32) -> u32 {
        let mut r = c;
        while self.parent[r as usize] != r {
            r = self.parent[r as usize];
        }
        let mut k = c;
        while self.parent[k as usize] != r {
            let next = self.parent[k as usize];
            self.parent[k as usize] = r;
            k = next;
        }
        r
    }

    fn merge(&mut self, k: u32, l: u32) {
        let (a, b) = (self.rep(k), self.rep(l));
        if a == b {
            return;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.parent[hi as usize] = lo;
        self.live -= 1;
        self.queue.push(hi);
    }

    fn coincidence(&mut self, a: u32, b: u32) {
        self.queue.clear();
        self.merge(a, b);
        let mut i = 0;
        while i < self.queue.len() {
            let g = self.queue[i];
            i += 1;
            for x in 0..self.width {
                let d = self.get(g, x);
                if d == UNDEF {
                    continue;
                }
                self.set(d, x ^ 1, UNDEF);
                let mu = self.rep(g);
                let nu = self.rep(d);
                let mx = self.get(mu, x);
                if mx != UNDEF {
                    self.merge(nu, mx);
                } else {
                    let nx = self.get(nu, x ^ 1);
                    if nx != UNDEF {
                        self.merge(mu, nx);
                    } else {
                        self.set(mu, x, nu);
                        self.set(nu, x ^ 1, mu);
                    }
                }
            }
        }
    }

    fn scan_and_fill(&mut self, c: u32, w: &[usize]) -> Result<(), TcError> {
        if w.is_empty() {
            return Ok(());
        }
        let mut f = c;
        let mut b = c;
        let mut i = 0usize;
        let mut j = w.len() as isize - 1;
        loop {
            while (i as isize) <= j && self.get(f, w[i]) != UNDEF {
                f = self.get(f, w[i]);
                i += 1;
            }
            if (i as isize) > j {
                if f != b {
                    self.coincidence(f, b);
                }
                return Ok(());
            }
            while j >= i as isize && self.get(b, w[j as usize] ^ 1) != UNDEF {
                b = self.get(b, w[j as usize] ^ 1);
                j -= 1;
            }
            if j < i as isize {
                self.coincidence(f, b);
                return Ok(());
            } else if j == i as isize {
                self.set(f, w[i], b);
                self.set(b, w[i] ^ 1, f);
                return Ok(());
            } else {
                self.define(f, w[i])?;
            }
        }
    }

    fn standardize(mut self) -> Vec<u32> {
        let n = self.parent.len();
        for c in 0..n as u32 {
            if !self.is_live(c) {
                continue;
            }
            for x in 0..self.width {
                let d = self.get(c, x);
                let r = self.rep(d);
                self.set(c, x, r);
            }
        }
        let mut new_id = vec![UNDEF; n];
        let mut order = vec![0u32];
        new_id[0] = 0;
        let mut k = 0;
        while k < order.len() {
            let c = order[k];
            for x in 0..self.width {
                let d = self.get(c, x);
                if new_id[d as usize] == UNDEF {
                    new_id[d as usize] = order.len() as u32;
                    order.push(d);
                }
            }
            k += 1;
        }
        let mut out = Vec::with_capacity(order.len() * self.width);
        for &c in &order {
            for x in 0..self.width {
                out.push(new_id[self.get(c, x) as usize]);
            }
        }
        out
    }
}

/// Enumerates the cosets of `⟨subgroup⟩` in the presented group, defining at
/// most `cap` cosets in total.
pub fn enumerate(pres: &Presentation, subgroup: &[Word], cap: usize) -> Result<CosetTable, TcError> {
    for w in pres.relators.iter().chain(subgroup) {
        pres.check(w)?;
    }
    let to_cols = |w: &Word| -> Vec<usize> { free_reduce(w).into_iter().map(col).collect() };
    let rels: Vec<Vec<usize>> = pres.relators.iter().map(to_cols).filter(|w| !w.is_empty()).collect();
    let subs: Vec<Vec<usize>> = subgroup.iter().map(to_cols).collect();
    let mut e = Enumerator::new(pres.rank(), cap.max(1));
    for w in &subs {
        e.scan_and_fill(0, w)?;
    }
    let mut c = 0u32;
    while (c as usize) < e.parent.len() {
        for r in &rels {
            if !e.is_live(c) {
                break;
            }
            e.scan_and_fill(c, r)?;
        }
        if e.is_live(c) {
            for x in 0..e.width {
                if e.get(c, x) == UNDEF {
                    e.define(c, x)?;
                }
            }
        }
        c += 1;
    }
    debug_assert!(e.live >= 1);
    let cosets = e.live;
    let table = e.standardize();
    Ok(CosetTable { generators: pres.rank(), cosets, table })
}

/// Order of the presented group, if enumeration over the trivial subgroup
/// closes within `cap` cosets.
pub fn group_order(pres: &Presentation, cap: usize) -> Result<usize, TcError> {
    Ok(enumerate(pres, &[], cap)?.index())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupSpec;
    use proptest::prelude::*;

    fn pow(w: &[i32], k: usize) -> Word {
        w.iter().cycle().take(w.len() * k).copied().collect()
    }

    fn coxeter(m: &[[usize; 3]; 3]) -> Presentation {
        let mut rels = Vec::new();
        for i in 0..3 {
            for j in i..3 {
                let w = if i == j { vec![i as i32 + 1] } else { vec![i as i32 + 1, j as i32 + 1] };
                rels.push(pow(&w, if i == j { 2 } else { m[i][j] }));
            }
        }
        Presentation::with_count(3, rels)
    }

    #[test]
    fn small_groups() {
        let s3 = Presentation::with_count(2, vec![vec![1, 1], vec![2, 2, 2], vec![1, 2, 1, 2]]);
        assert_eq!(group_order(&s3, 1000).unwrap(), 6);
        assert_eq!(enumerate(&s3, &[vec![1]], 1000).unwrap().index(), 3);
        // A_3 Coxeter group is S_4; B_3 has order 48; H_3 has order 120
        assert_eq!(group_order(&coxeter(&[[1, 3, 2], [3, 1, 3], [2, 3, 1]]), 10_000).unwrap(), 24);
        assert_eq!(group_order(&coxeter(&[[1, 4, 2], [4, 1, 3], [2, 3, 1]]), 10_000).unwrap(), 48);
        assert_eq!(group_order(&coxeter(&[[1, 5, 2], [5, 1, 3], [2, 3, 1]]), 10_000).unwrap(), 120);
    }

    #[test]
    fn infinite_group_hits_cap() {
        let z = Presentation::with_count(1, vec![]);
        assert_eq!(group_order(&z, 500), Err(TcError::CapExceeded(500)));
        // the affine triangle group (3,3,3) is infinite
        let t = coxeter(&[[1, 3, 3], [3, 1, 3], [3, 3, 1]]);
        assert_eq!(group_order(&t, 5000), Err(TcError::CapExceeded(5000)));
    }

    #[test]
    fn invalid_letters() {
        let p = Presentation::with_count(1, vec![vec![2]]);
        assert_eq!(group_order(&p, 10), Err(TcError::InvalidLetter(2)));
    }

    #[test]
    fn generator_perms_satisfy_relators_and_match_order() {
        let p = coxeter(&[[1, 4, 2], [4, 1, 3], [2, 3, 1]]);
        let t = enumerate(&p, &[], 10_000).unwrap();
        let n = t.index() as u32;
        for r in &p.relators {
            assert!((0..n).all(|c| t.act_word(c, r) == c));
        }
        // the regular representation: the generated permutation group has order n
        let gens: Vec<_> = (1..=3).map(|k| t.generator_perm(k)).collect();
        let g = GroupSpec::new(crate::group::Perm::identity(n as usize), gens);
        assert_eq!(g.order(), n as u128);
        let tr = t.transversal();
        assert!(tr.iter().enumerate().all(|(c, w)| t.act_word(0, w) == c as u32));
    }

    proptest! {
        #[test]
        fn abelian_products(m in 1usize..12, n in 1usize..12) {
            let p = Presentation::with_count(2, vec![vec![1; m], vec![2; n], vec![1, 2, -1, -2]]);
            prop_assert_eq!(group_order(&p, 10_000).unwrap(), m * n);
            let sub = enumerate(&p, &[vec![1]], 10_000).unwrap();
            prop_assert_eq!(sub.index(), n);
        }

        #[test]
        fn dihedral(n in 2usize..30) {
            let p = Presentation::with_count(2, vec![vec![1, 1], vec![2; n], vec![1, 2, 1, 2]]);
            prop_assert_eq!(group_order(&p, 10_000).unwrap(), 2 * n);
        }

        #[test]
        fn simplification_preserves_order(m in 2usize..9) {
            // dihedral group with redundant generators c = ab, d = c⁻¹
            let p = Presentation::with_count(4, vec![
                vec![1, 1], vec![2; m], vec![1, 2, 1, 2], vec![3, -2, -1], vec![4, 3],
            ]);
            let s = simplify_presentation(&p);
            prop_assert!(s.presentation.rank() <= 2);
            prop_assert_eq!(group_order(&s.presentation, 10_000).unwrap(), 2 * m);
            let t = enumerate(&s.presentation, &[], 10_000).unwrap();
            for r in &p.relators {
                prop_assert_eq!(t.act_word(0, &s.rewrite(r)), 0);
            }
        }

        #[test]
        fn free_reduce_is_idempotent(w in prop::collection::vec(prop::sample::select(vec![-2, -1, 1, 2]), 0..20)) {
            let r = free_reduce(&w);
            prop_assert_eq!(free_reduce(&r), r.clone());
            prop_assert!(free_reduce(&[w.clone(), invert(&w)].concat()).is_empty());
        }
    }
}
