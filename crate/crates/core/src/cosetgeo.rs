//! Coset pregeometries, sketches, reconstruction of a geometry from its
//! sketch, transitivity levels, orbit geometries, and generators for special
//! orthogonal groups.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf::Matrix;
use crate::group::{stabilizer, GroupElem, GroupError, GroupSpec, MatElem, Perm};
use crate::orthospace::{BilinearForm, MaterializedOrth, TypeSign};
use crate::pregeo::{PregeoError, Pregeometry};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CosetError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Pregeo(#[from] PregeoError),
    #[error("coset space has more than {0} elements")]
    IndexTooLarge(usize),
    #[error("generator of subgroup {0} is not in the group")]
    NotASubgroup(String),
    #[error("not a set of orbit representatives: {0}")]
    NotRepresentatives(String),
    #[error("hypothesis ({0}) failed: {1}")]
    HypothesisFailed(String, String),
    #[error("reconstruction map is not an isomorphism: {0}")]
    NotIsomorphic(String),
    #[error("generators do not act by automorphisms: {0}")]
    NotAnAction(String),
    #[error("not a flag: {0:?}")]
    NotAChamber(Vec<u32>),
}

pub const DEFAULT_INDEX_CAP: usize = 1_000_000;
const SUBGROUP_ELEMENT_CAP: usize = 2_000_000;

/// One member `G^{t,i}` of a subgroup family: type `i`, tag `t`.
#[derive(Clone, Debug)]
pub struct SubgroupMember<E: GroupElem> {
    pub typ: u32,
    pub tag: String,
    pub group: GroupSpec<E>,
}

/// A coset pregeometry with, for each element, its member index and a coset
/// representative.
#[derive(Clone, Debug)]
pub struct CosetPregeometry<E: GroupElem> {
    pub geometry: Pregeometry,
    pub member: Vec<usize>,
    pub reps: Vec<E>,
    keys: Vec<HashMap<E, u32>>,
    subgroup_elements: Vec<Vec<E>>,
}

impl<E: GroupElem> CosetPregeometry<E> {
    /// The element `aH` for `H` the `m`-th member.
    pub fn coset_of(&self, m: usize, a: &E) -> u32 {
        let key = min_rep(a, &self.subgroup_elements[m]);
        self.keys[m][&key]
    }

    /// Left multiplication by `g`, as a permutation of the elements.
    pub fn left_action(&self, g: &E) -> Perm {
        let images = (0..self.geometry.len())
            .map(|x| self.coset_of(self.member[x], &g.compose(&self.reps[x])))
            .collect();
        Perm::from_images(images).expect("left multiplication permutes cosets")
    }
}

/// Canonical representative of `aH`: the least `a·h`.
fn min_rep<E: GroupElem>(a: &E, h: &[E]) -> E {
    h.iter().map(|x| a.compose(x)).min().expect("subgroup is nonempty")
}

/// The coset pregeometry: elements `gG^{t,i}`, incident iff the cosets meet
/// and either their types differ or they are the same coset.
pub fn coset_pregeometry<E: GroupElem>(
    g: &GroupSpec<E>,
    fam: &[SubgroupMember<E>],
    cap: usize,
) -> Result<CosetPregeometry<E>, CosetError> {
    let mut subgroup_elements = Vec::new();
    for m in fam {
        if let Some(bad) = m.group.generators().iter().find(|s| !g.contains(s)) {
            let _ = bad;
            return Err(CosetError::NotASubgroup(m.tag.clone()));
        }
        subgroup_elements.push(m.group.elements(SUBGROUP_ELEMENT_CAP)?);
    }
    let mut typ = Vec::new();
    let mut labels = Vec::new();
    let mut member = Vec::new();
    let mut reps: Vec<E> = Vec::new();
    let mut keys: Vec<HashMap<E, u32>> = Vec::new();
    for (mi, m) in fam.iter().enumerate() {
        let hs = &subgroup_elements[mi];
        let mut local: HashMap<E, u32> = HashMap::new();
        let start = reps.len();
        let id_key = min_rep(g.identity(), hs);
        local.insert(id_key, start as u32);
        reps.push(g.identity().clone());
        let mut i = start;
        while i < reps.len() {
            for s in g.generators() {
                let b = s.compose(&reps[i]);
                let k = min_rep(&b, hs);
                if !local.contains_key(&k) {
                    if reps.len() - start >= cap {
                        return Err(CosetError::IndexTooLarge(cap));
                    }
                    local.insert(k, reps.len() as u32);
                    reps.push(b);
                }
            }
            i += 1;
        }
        for j in start..reps.len() {
            typ.push(m.typ);
            labels.push(format!("{}#{}", m.tag, j - start));
            member.push(mi);
        }
        keys.push(local);
    }
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); reps.len()];
    for x in 0..reps.len() {
        let mx = member[x];
        for (my, other) in fam.iter().enumerate() {
            if my <= mx || other.typ == fam[mx].typ {
                continue;
            }
            let mut hit = BTreeSet::new();
            for h in &subgroup_elements[mx] {
                let k = min_rep(&reps[x].compose(h), &subgroup_elements[my]);
                hit.insert(keys[my][&k]);
            }
            for y in hit {
                adj[x].push(y);
                adj[y as usize].push(x as u32);
            }
        }
    }
    let geometry = Pregeometry::from_adjacency(typ, labels, adj)?;
    Ok(CosetPregeometry { geometry, member, reps, keys, subgroup_elements })
}

/// Whether the members generate `g`.
pub fn connectivity_criterion<E: GroupElem>(g: &GroupSpec<E>, fam: &[SubgroupMember<E>]) -> bool {
    let gens: Vec<E> = fam.iter().flat_map(|m| m.group.generators().iter().cloned()).collect();
    g.subgroup(gens).order() == g.order()
}

/// A group acting on the element ids of a pregeometry.
#[derive(Clone)]
pub struct GeomAction<E: GroupElem> {
    pub group: GroupSpec<E>,
    act: Arc<dyn Fn(&E, u32) -> u32 + Send + Sync>,
}

impl<E: GroupElem> std::fmt::Debug for GeomAction<E> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeomAction").field("group", &self.group).finish()
    }
}

impl GeomAction<Perm> {
    /// Permutations of the element ids themselves.
    pub fn on_ids(group: GroupSpec<Perm>) -> Self {
        GeomAction { group, act: Arc::new(|p: &Perm, x: u32| p.image(x)) }
    }
}

impl GeomAction<MatElem> {
    /// Matrices acting on the subspaces of a materialised orthogonal geometry.
    pub fn on_subspaces(group: GroupSpec<MatElem>, geo: &MaterializedOrth) -> Self {
        let elements = geo.elements.clone();
        let index = geo.index.clone();
        GeomAction {
            group,
            act: Arc::new(move |g: &MatElem, x: u32| {
                let s = elements[x as usize].transform(&g.m, g.field);
                *index.get(&s).expect("isometries of determinant 1 preserve the element set")
            }),
        }
    }
}

impl<E: GroupElem> GeomAction<E> {
    pub fn new(group: GroupSpec<E>, act: impl Fn(&E, u32) -> u32 + Send + Sync + 'static) -> Self {
        GeomAction { group, act: Arc::new(act) }
    }

    #[inline]
    pub fn act(&self, g: &E, x: u32) -> u32 {
        (self.act)(g, x)
    }

    /// Generators as permutations of `0..n`.
    pub fn generator_perms(&self, n: usize) -> Vec<Perm> {
        self.group
            .generators()
            .iter()
            .map(|s| Perm::from_images((0..n as u32).map(|x| self.act(s, x)).collect()).expect("bijection"))
            .collect()
    }

    pub fn orbit_of(&self, x: u32) -> Vec<u32> {
        let mut o = crate::group::orbit(&self.group, &x, |g, y| self.act(g, *y)).points;
        o.sort();
        o
    }

    pub fn stabilizer_of(&self, x: u32) -> Result<GroupSpec<E>, GroupError> {
        Ok(stabilizer(&self.group, &x, |g, y| self.act(g, *y))?.0)
    }

    /// Pointwise stabiliser of a set of elements.
    pub fn stabilizer_of_all(&self, xs: &[u32]) -> Result<GroupSpec<E>, GroupError> {
        let mut h = self.group.clone();
        for &x in xs {
            h = stabilizer(&h, &x, |g, y| self.act(g, *y))?.0;
        }
        Ok(h)
    }
}

/// Checks that every generator permutes the elements preserving types and
/// incidence.
pub fn check_automorphisms<E: GroupElem>(g: &Pregeometry, action: &GeomAction<E>) -> Result<Vec<Perm>, CosetError> {
    let n = g.len();
    let mut perms = Vec::new();
    for (i, s) in action.group.generators().iter().enumerate() {
        let images: Vec<u32> = (0..n as u32).map(|x| action.act(s, x)).collect();
        let p = Perm::from_images(images).map_err(|_| CosetError::NotAnAction(format!("generator {i} is not a bijection")))?;
        for x in 0..n as u32 {
            if g.typ(p.image(x)) != g.typ(x) {
                return Err(CosetError::NotAnAction(format!("generator {i} changes the type of {x}")));
            }
            if g.neighbors(x).iter().any(|&y| !g.incident(p.image(x), p.image(y))) {
                return Err(CosetError::NotAnAction(format!("generator {i} breaks an incidence at {x}")));
            }
        }
        perms.push(p);
    }
    Ok(perms)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitivityLevel {
    Vertex,
    Incidence,
    Pennant,
    Chamber,
    Flag,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeOrbits {
    pub types: Vec<u32>,
    pub flags: usize,
    pub orbits: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitivityReport {
    pub level: TransitivityLevel,
    pub per_type: Vec<TypeOrbits>,
    pub transitive: bool,
}

fn subsets_of_size(types: &[u32], k: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    fn rec(types: &[u32], k: usize, start: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..types.len() {
            cur.push(types[i]);
            rec(types, k, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(types, k, 0, &mut Vec::new(), &mut out);
    out
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Orbit counts of the group on flags of each type set relevant to `level`.
/// Type sets with no flags are reported with zero orbits and do not count
/// against transitivity.
pub fn transitivity_check<E: GroupElem>(
    g: &Pregeometry,
    action: &GeomAction<E>,
    level: TransitivityLevel,
) -> Result<TransitivityReport, CosetError> {
    let perms = check_automorphisms(g, action)?;
    let r = g.rank();
    let sizes: Vec<usize> = match level {
        TransitivityLevel::Vertex => vec![1],
        TransitivityLevel::Incidence => vec![2],
        TransitivityLevel::Pennant => vec![3],
        TransitivityLevel::Chamber => vec![r],
        TransitivityLevel::Flag => (1..=r).collect(),
    };
    let mut per_type = Vec::new();
    for k in sizes.into_iter().filter(|&k| k <= r && k > 0) {
        for ts in subsets_of_size(g.types(), k) {
            let flags = g.flags_of_types(&ts, usize::MAX).expect("uncapped");
            let index: HashMap<&[u32], usize> = flags.iter().enumerate().map(|(i, f)| (f.as_slice(), i)).collect();
            let mut parent: Vec<usize> = (0..flags.len()).collect();
            for p in &perms {
                for (i, f) in flags.iter().enumerate() {
                    let img: Vec<u32> = f.iter().map(|&x| p.image(x)).collect();
                    let j = index[img.as_slice()];
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a] = b;
                    }
                }
            }
            let orbits = (0..flags.len()).filter(|&i| find(&mut parent, i) == i).count();
            per_type.push(TypeOrbits { types: ts, flags: flags.len(), orbits });
        }
    }
    let transitive = per_type.iter().all(|t| t.orbits <= 1);
    Ok(TransitivityReport { level, per_type, transitive })
}

/// The sub-pregeometry on the union of the orbits of the elements of `v`.
pub fn orbit_geometry<E: GroupElem>(
    g: &Pregeometry,
    action: &GeomAction<E>,
    v: &[u32],
) -> Result<(Pregeometry, Vec<u32>), CosetError> {
    if !g.is_flag(v) {
        return Err(CosetError::NotAChamber(v.to_vec()));
    }
    let mut ids: BTreeSet<u32> = BTreeSet::new();
    for &x in v {
        ids.extend(action.orbit_of(x));
    }
    let ids: Vec<u32> = ids.into_iter().collect();
    Ok(g.induced(&ids))
}

/// A sketch: the coset pregeometry on stabilisers of orbit representatives.
#[derive(Clone, Debug)]
pub struct Sketch<E: GroupElem> {
    pub coset: CosetPregeometry<E>,
    /// The representatives `W`, in member order.
    pub reps: Vec<u32>,
}

/// Builds the sketch after checking that `w` meets every orbit exactly once.
pub fn sketch<E: GroupElem>(
    g: &Pregeometry,
    action: &GeomAction<E>,
    w: &[u32],
    cap: usize,
) -> Result<Sketch<E>, CosetError> {
    let mut owner: Vec<Option<u32>> = vec![None; g.len()];
    for &x in w {
        if x as usize >= g.len() {
            return Err(CosetError::NotRepresentatives(format!("{x} is not an element")));
        }
        for y in action.orbit_of(x) {
            if let Some(prev) = owner[y as usize] {
                return Err(CosetError::NotRepresentatives(format!("{prev} and {x} lie in one orbit")));
            }
            owner[y as usize] = Some(x);
        }
    }
    if let Some(miss) = owner.iter().position(Option::is_none) {
        return Err(CosetError::NotRepresentatives(format!("the orbit of {miss} is missed")));
    }
    let mut fam = Vec::new();
    for &x in w {
        fam.push(SubgroupMember { typ: g.typ(x), tag: g.label(x).to_string(), group: action.stabilizer_of(x)? });
    }
    let coset = coset_pregeometry(&action.group, &fam, cap)?;
    Ok(Sketch { coset, reps: w.to_vec() })
}

/// Outcome of reconstructing a geometry from its sketch.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StroppelReport {
    pub elements: usize,
    pub incidences: usize,
    pub chambers_checked: usize,
    /// `map[x]` is the image of sketch element `x` in the geometry.
    pub map: Vec<u32>,
    pub type_mismatches: usize,
    pub incidence_mismatches: usize,
    pub equivariance_mismatches: usize,
}

impl StroppelReport {
    pub fn isomorphism(&self) -> bool {
        self.type_mismatches == 0 && self.incidence_mismatches == 0 && self.equivariance_mismatches == 0
    }
}

/// Chambers of `g` contained in `w`.
fn chambers_in(g: &Pregeometry, w: &[u32]) -> Vec<Vec<u32>> {
    let (sub, ids) = g.induced(w);
    sub.flags_of_types(g.types(), usize::MAX)
        .expect("uncapped")
        .into_iter()
        .map(|f| f.iter().map(|&x| ids[x as usize]).collect())
        .collect()
}

/// Checks the two hypotheses (hall; incidence-transitive orbit geometry for
/// every chamber inside `w`), builds the sketch and verifies that
/// `aG_w ↦ a·w` is a type-, incidence- and action-preserving bijection.
pub fn stroppel_reconstruct<E: GroupElem>(
    g: &Pregeometry,
    action: &GeomAction<E>,
    w: &[u32],
    cap: usize,
) -> Result<StroppelReport, CosetError> {
    if !g.is_hall(w) {
        return Err(CosetError::HypothesisFailed("i".into(), "W is not a hall".into()));
    }
    let chambers = chambers_in(g, w);
    for v in &chambers {
        let (og, ids) = orbit_geometry(g, action, v)?;
        let sub_action = restrict_action(action, &ids, g.len());
        let rep = transitivity_check(&og, &sub_action, TransitivityLevel::Incidence)?;
        if !rep.transitive {
            return Err(CosetError::HypothesisFailed(
                "ii".into(),
                format!("orbit geometry of {v:?} is not incidence-transitive"),
            ));
        }
    }
    let sk = sketch(g, action, w, cap)?;
    let cg = &sk.coset;
    let n = cg.geometry.len();
    if n != g.len() {
        return Err(CosetError::NotIsomorphic(format!("{n} cosets for {} elements", g.len())));
    }
    let map: Vec<u32> = (0..n).map(|x| action.act(&cg.reps[x], sk.reps[cg.member[x]])).collect();
    let mut hit = vec![false; n];
    for &y in &map {
        if std::mem::replace(&mut hit[y as usize], true) {
            return Err(CosetError::NotIsomorphic(format!("element {y} is hit twice")));
        }
    }
    let mut report = StroppelReport {
        elements: n,
        incidences: cg.geometry.incidence_count(),
        chambers_checked: chambers.len(),
        map: map.clone(),
        type_mismatches: 0,
        incidence_mismatches: 0,
        equivariance_mismatches: 0,
    };
    for x in 0..n as u32 {
        if cg.geometry.typ(x) != g.typ(map[x as usize]) {
            report.type_mismatches += 1;
        }
        let mut mine: Vec<u32> = cg.geometry.neighbors(x).iter().map(|&y| map[y as usize]).collect();
        mine.sort_unstable();
        if mine != g.neighbors(map[x as usize]) {
            report.incidence_mismatches += 1;
        }
    }
    for s in action.group.generators() {
        let p = cg.left_action(s);
        for x in 0..n as u32 {
            if map[p.image(x) as usize] != action.act(s, map[x as usize]) {
                report.equivariance_mismatches += 1;
            }
        }
    }
    Ok(report)
}

/// The action restricted to an invariant subset `ids` (sorted), re-indexed.
pub fn restrict_action<E: GroupElem>(
    action: &GeomAction<E>,
    ids: &[u32],
    n: usize,
) -> GeomAction<E> {
    let mut pos = vec![u32::MAX; n];
    for (i, &x) in ids.iter().enumerate() {
        pos[x as usize] = i as u32;
    }
    let ids = ids.to_vec();
    let inner = action.clone();
    GeomAction::new(action.group.clone(), move |g: &E, x: u32| pos[inner.act(g, ids[x as usize]) as usize])
}

/// Order of `SO_d(F_q, f)` for a form of the given sign.
pub fn so_order(q: u32, d: usize, sign: TypeSign) -> u128 {
    let q = q as u128;
    let m = (d / 2) as u32;
    let prod = |k: u32| (1..=k).map(|i| q.pow(2 * i) - 1).product::<u128>();
    if d % 2 == 1 {
        q.pow(m * m) * prod(m)
    } else {
        let eps: i128 = if sign == TypeSign::Plus { 1 } else { -1 };
        q.pow(m * (m - 1)) * ((q.pow(m) as i128 - eps) as u128) * prod(m - 1)
    }
}

/// Largest shadow degree for which generator sets are reduced and verified
/// against the order formula.
const SO_VERIFY_DEGREE: usize = 20_000;

/// Generators of `SO(f)` as products `r_{u₀} r_u` of reflections, where the
/// `u` run over nonsingular vectors with entries in `{0, 1}` in
/// lexicographic order and `u₀` is the first of them. When the permutation
/// shadow is small enough the list is pruned to those generators that enlarge
/// the group, and the final order is checked against the order formula.
pub fn so_generators(form: &BilinearForm) -> Result<GroupSpec<MatElem>, GroupError> {
    let f = form.field();
    let d = form.dim();
    let mut vs: Vec<Vec<u32>> = Vec::new();
    for mask in 1u32..(1 << d) {
        let v: Vec<u32> = (0..d).rev().map(|i| (mask >> i) & 1).collect();
        if form.norm(&v) != 0 {
            vs.push(v);
        }
    }
    vs.sort();
    let r0 = form.reflection(&vs[0]).expect("nonsingular");
    let cands: Vec<MatElem> = vs[1..]
        .iter()
        .map(|u| {
            let m = r0.mul(&form.reflection(u).expect("nonsingular"), f).expect("square");
            MatElem { field: f, m }
        })
        .filter(|g| !g.is_identity())
        .collect();
    let identity = MatElem::identity(f, d);
    let degree = (f.order() as usize).pow(d as u32);
    if degree > SO_VERIFY_DEGREE {
        return Ok(GroupSpec::new(identity, cands));
    }
    let target = so_order(f.order(), d, form.sign());
    let mut kept: Vec<MatElem> = Vec::new();
    let mut order = 1u128;
    for c in cands {
        let trial = GroupSpec::new(identity.clone(), kept.iter().cloned().chain([c.clone()]).collect());
        if trial.order() > order {
            order = trial.order();
            kept.push(c);
        }
        if order == target {
            break;
        }
    }
    if order != target {
        return Err(GroupError::OrderMismatch { orbit: 0, stab: order, group: target });
    }
    Ok(GroupSpec::new(identity, kept))
}

/// Elementwise check that `g` is an isometry of determinant 1.
pub fn is_special_isometry(form: &BilinearForm, g: &Matrix) -> bool {
    form.is_isometry(g) && g.det(form.field()).ok() == Some(1)
}

/// Cyclic subgroups of a small group, each given by one generator (the least
/// element generating it), deduplicated.
pub fn cyclic_subgroups<E: GroupElem>(g: &GroupSpec<E>, cap: usize) -> Result<Vec<GroupSpec<E>>, GroupError> {
    let mut seen: BTreeMap<Vec<E>, E> = BTreeMap::new();
    for x in g.elements(cap)? {
        let els = g.subgroup(vec![x.clone()]).elements(cap)?;
        seen.entry(els).or_insert(x);
    }
    Ok(seen.into_values().map(|x| g.subgroup(vec![x])).collect())
}
