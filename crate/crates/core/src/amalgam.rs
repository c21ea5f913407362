//! Amalgams of finite groups and their completions.
//!
//! An amalgam is a family of groups arranged in levels `0..=n` together with
//! injective homomorphisms (identifications) from level `i` to level `i + 1`.
//! Its universal completion is presented by one generator per element and
//! the multiplication tables plus the identifications; orders are computed by
//! coset enumeration. Amalgams of parabolics of a group acting on a
//! pregeometry feed the pipelines for Tits' lemma, the shape-reduction
//! theorem and the fundamental cover.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cosetgeo::{
    coset_pregeometry, orbit_geometry, restrict_action, transitivity_check, CosetError, GeomAction, SubgroupMember,
    TransitivityLevel,
};
use crate::group::{GroupElem, GroupError, GroupSpec, Perm};
use crate::homotopy::{covering_check, homology_h1, simple_connectivity, CoveringReport, Verdict, H1};
use crate::pregeo::{PregeoError, Pregeometry};
use crate::todd_coxeter::{enumerate, free_reduce, invert, simplify_presentation, Presentation, TcError, Word};

/// Default cap on `|⊔𝒜|` and on member group orders.
pub const DEFAULT_UNION_CAP: usize = 2_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AmalgamError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Tc(#[from] TcError),
    #[error(transparent)]
    Coset(#[from] CosetError),
    #[error(transparent)]
    Pregeo(#[from] PregeoError),
    #[error("identification {from} → {to} is not a monomorphism: {reason}")]
    NotAMonomorphism { from: usize, to: usize, reason: String },
    #[error("member {0} does not embed into a group of the top level")]
    Unreachable(usize),
    #[error("invalid index data: {0}")]
    InvalidIndex(String),
    #[error("disjoint union has {size} elements, cap is {cap}")]
    TooLarge { size: usize, cap: usize },
    #[error("hypothesis ({0}) failed: {1}")]
    HypothesisFailed(String, String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("residue of the flag {flag:?} is not verified simply connected")]
    ResidueNotVerified { flag: Vec<u32>, report: Box<ShapeReport> },
    #[error("not a shape: {0}")]
    InvalidShape(String),
}

// ------------------------------------------------------------------- amalgams

/// One group `G_{j,i}` of an amalgam, with its elements listed explicitly
/// (identity first).
#[derive(Clone, Debug)]
pub struct Member<E: GroupElem> {
    pub name: String,
    pub level: usize,
    pub elements: Vec<E>,
    /// Indices of a generating set.
    pub generators: Vec<u32>,
    index: HashMap<E, u32>,
}

impl<E: GroupElem> Member<E> {
    pub fn from_group(name: impl Into<String>, level: usize, g: &GroupSpec<E>, cap: usize) -> Result<Self, AmalgamError> {
        let mut elements = g.elements(cap)?;
        let id = elements.iter().position(GroupElem::is_identity).expect("groups contain the identity");
        elements.swap(0, id);
        let index: HashMap<E, u32> = elements.iter().enumerate().map(|(i, e)| (e.clone(), i as u32)).collect();
        let mut generators: Vec<u32> = g.generators().iter().map(|s| index[s]).collect();
        generators.sort_unstable();
        generators.dedup();
        Ok(Member { name: name.into(), level, elements, generators, index })
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn index_of(&self, e: &E) -> Option<u32> {
        self.index.get(e).copied()
    }

    pub fn mul(&self, x: u32, y: u32) -> u32 {
        self.index[&self.elements[x as usize].compose(&self.elements[y as usize])]
    }

    /// A word for every element in the generators (1-based positions in
    /// [`Member::generators`]), shortest first.
    pub fn words(&self) -> Vec<Word> {
        let mut words: Vec<Option<Word>> = vec![None; self.order()];
        words[0] = Some(Vec::new());
        let mut queue = VecDeque::from([0u32]);
        while let Some(x) = queue.pop_front() {
            for (j, &s) in self.generators.iter().enumerate() {
                let y = self.mul(x, s) as usize;
                if words[y].is_none() {
                    let mut w = words[x as usize].clone().expect("visited");
                    w.push(j as i32 + 1);
                    words[y] = Some(w);
                    queue.push_back(y as u32);
                }
            }
        }
        words.into_iter().map(|w| w.expect("generators generate")).collect()
    }
}

/// An injective homomorphism from member `from` (level `i`) to member `to`
/// (level `i + 1`), as an element map.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Identification {
    pub from: usize,
    pub to: usize,
    pub map: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct Amalgam<E: GroupElem> {
    pub members: Vec<Member<E>>,
    pub identifications: Vec<Identification>,
}

impl<E: GroupElem> Amalgam<E> {
    /// Checks levels, that every identification is a monomorphism, and that
    /// every member embeds into a member of the top level.
    pub fn new(members: Vec<Member<E>>, identifications: Vec<Identification>) -> Result<Self, AmalgamError> {
        if members.is_empty() {
            return Err(AmalgamError::InvalidIndex("no groups".into()));
        }
        for id in &identifications {
            let (Some(a), Some(b)) = (members.get(id.from), members.get(id.to)) else {
                return Err(AmalgamError::InvalidIndex(format!("identification {} → {} names no group", id.from, id.to)));
            };
            if a.level + 1 != b.level {
                return Err(AmalgamError::InvalidIndex(format!(
                    "identification {} → {} joins levels {} and {}",
                    id.from, id.to, a.level, b.level
                )));
            }
            let bad = |reason: String| AmalgamError::NotAMonomorphism { from: id.from, to: id.to, reason };
            if id.map.len() != a.order() || id.map.iter().any(|&y| y as usize >= b.order()) {
                return Err(bad("map does not go between the element sets".into()));
            }
            if id.map.iter().collect::<HashSet<_>>().len() != id.map.len() {
                return Err(bad("not injective".into()));
            }
            for x in 0..a.order() as u32 {
                for &s in &a.generators {
                    if id.map[a.mul(x, s) as usize] != b.mul(id.map[x as usize], id.map[s as usize]) {
                        return Err(bad(format!("products of elements {x} and {s} are not preserved")));
                    }
                }
            }
        }
        let top = members.iter().map(|m| m.level).max().expect("nonempty");
        let mut up: Vec<Vec<usize>> = vec![Vec::new(); members.len()];
        for id in &identifications {
            up[id.from].push(id.to);
        }
        for start in 0..members.len() {
            let mut stack = vec![start];
            let mut seen = vec![false; members.len()];
            let mut ok = false;
            while let Some(m) = stack.pop() {
                if members[m].level == top {
                    ok = true;
                    break;
                }
                for &t in &up[m] {
                    if !std::mem::replace(&mut seen[t], true) {
                        stack.push(t);
                    }
                }
            }
            if !ok {
                return Err(AmalgamError::Unreachable(start));
            }
        }
        Ok(Amalgam { members, identifications })
    }

    /// The identification determined by images of the generators of
    /// `members[from]` (in order) in `members[to]`.
    pub fn identify_by_generators(
        members: &[Member<E>],
        from: usize,
        to: usize,
        images: &[E],
    ) -> Result<Identification, AmalgamError> {
        let bad = |reason: String| AmalgamError::NotAMonomorphism { from, to, reason };
        let (a, b) = (&members[from], &members[to]);
        if images.len() != a.generators.len() {
            return Err(bad(format!("{} images for {} generators", images.len(), a.generators.len())));
        }
        let img: Vec<u32> = images
            .iter()
            .map(|e| b.index_of(e).ok_or_else(|| bad(format!("{e:?} is not in {}", b.name))))
            .collect::<Result<_, _>>()?;
        let mut map: Vec<Option<u32>> = vec![None; a.order()];
        map[0] = Some(0);
        let mut queue = VecDeque::from([0u32]);
        while let Some(x) = queue.pop_front() {
            let fx = map[x as usize].expect("visited");
            for (j, &s) in a.generators.iter().enumerate() {
                let y = a.mul(x, s) as usize;
                let fy = b.mul(fx, img[j]);
                match map[y] {
                    None => {
                        map[y] = Some(fy);
                        queue.push_back(y as u32);
                    }
                    Some(old) if old != fy => return Err(bad("generator images do not extend to a homomorphism".into())),
                    Some(_) => {}
                }
            }
        }
        Ok(Identification { from, to, map: map.into_iter().map(|x| x.expect("generators generate")).collect() })
    }

    pub fn top_level(&self) -> usize {
        self.members.iter().map(|m| m.level).max().expect("nonempty")
    }

    /// `|⊔𝒜|`.
    pub fn union_size(&self) -> usize {
        self.members.iter().map(Member::order).sum()
    }
}

// ------------------------------------------------------ universal completion

/// A presentation of `𝒰(𝒜)` with the image of every member element.
#[derive(Clone, Debug)]
pub struct UniversalPresentation {
    /// Generators are the chosen generators of the members; relators come
    /// from the Cayley graphs of the members and from the identifications
    /// of generators. It is Tietze-equivalent to the presentation on all
    /// of `⊔𝒜`.
    pub presentation: Presentation,
    /// `|⊔𝒜|`, the generator count of the full presentation.
    pub union_size: usize,
    /// Relation counts of the full presentation: multiplication-table
    /// relations and identification relations.
    pub s1: usize,
    pub s2: usize,
    /// `words[m][x]` is the image of element `x` of member `m`.
    pub words: Vec<Vec<Word>>,
    /// Member and element of every generator.
    pub sources: Vec<(usize, u32)>,
}

fn check_union<E: GroupElem>(a: &Amalgam<E>, cap: usize) -> Result<(), AmalgamError> {
    let size = a.union_size();
    if size > cap {
        return Err(AmalgamError::TooLarge { size, cap });
    }
    Ok(())
}

pub fn universal_completion_presentation<E: GroupElem>(
    a: &Amalgam<E>,
    cap: usize,
) -> Result<UniversalPresentation, AmalgamError> {
    check_union(a, cap)?;
    let mut names = Vec::new();
    let mut sources = Vec::new();
    let mut offsets = Vec::new();
    for (m, mem) in a.members.iter().enumerate() {
        offsets.push(names.len() as i32);
        for (j, &s) in mem.generators.iter().enumerate() {
            names.push(format!("{}.{}", mem.name, j + 1));
            sources.push((m, s));
        }
    }
    let mut words = Vec::new();
    for (m, mem) in a.members.iter().enumerate() {
        let local = mem.words();
        words.push(local.into_iter().map(|w| w.iter().map(|&l| l + offsets[m]).collect()).collect::<Vec<Word>>());
    }
    let mut relators = Vec::new();
    for (m, mem) in a.members.iter().enumerate() {
        for x in 0..mem.order() as u32 {
            for (j, &s) in mem.generators.iter().enumerate() {
                let y = mem.mul(x, s);
                let mut r = words[m][x as usize].clone();
                r.push(offsets[m] + j as i32 + 1);
                r.extend(invert(&words[m][y as usize]));
                let r = free_reduce(&r);
                if !r.is_empty() {
                    relators.push(r);
                }
            }
        }
    }
    for id in &a.identifications {
        for (j, &s) in a.members[id.from].generators.iter().enumerate() {
            let mut r = vec![offsets[id.from] + j as i32 + 1];
            r.extend(invert(&words[id.to][id.map[s as usize] as usize]));
            relators.push(free_reduce(&r));
        }
    }
    relators.sort();
    relators.dedup();
    Ok(UniversalPresentation {
        presentation: Presentation::new(names, relators),
        union_size: a.union_size(),
        s1: a.members.iter().map(|m| m.order() * m.order()).sum(),
        s2: a.identifications.iter().map(|id| id.map.len()).sum(),
        words,
        sources,
    })
}

/// The presentation with one generator `u_x` per element of `⊔𝒜`, relators
/// `u_x u_y u_z⁻¹` for `xy = z` and `u_x u_y⁻¹` for `φ(x) = y`.
pub fn raw_universal_presentation<E: GroupElem>(a: &Amalgam<E>, cap: usize) -> Result<Presentation, AmalgamError> {
    check_union(a, cap)?;
    let mut offsets = Vec::new();
    let mut names = Vec::new();
    for mem in &a.members {
        offsets.push(names.len() as i32);
        names.extend((0..mem.order()).map(|x| format!("u[{}:{x}]", mem.name)));
    }
    let u = |m: usize, x: u32| offsets[m] + x as i32 + 1;
    let mut relators = Vec::new();
    for (m, mem) in a.members.iter().enumerate() {
        for x in 0..mem.order() as u32 {
            for y in 0..mem.order() as u32 {
                relators.push(vec![u(m, x), u(m, y), -u(m, mem.mul(x, y))]);
            }
        }
    }
    for id in &a.identifications {
        for (x, &y) in id.map.iter().enumerate() {
            relators.push(vec![u(id.from, x as u32), -u(id.to, y)]);
        }
    }
    Ok(Presentation::new(names, relators))
}

/// `|𝒰(𝒜)|` by coset enumeration over the trivial subgroup.
pub fn universal_order<E: GroupElem>(a: &Amalgam<E>, cap: usize) -> Result<usize, AmalgamError> {
    let p = universal_completion_presentation(a, DEFAULT_UNION_CAP)?;
    let s = simplify_presentation(&p.presentation);
    Ok(enumerate(&s.presentation, &[], cap)?.index())
}

/// `𝒰(𝒜)` as a permutation group (its regular representation) with the
/// canonical map `ψ` on every member.
#[derive(Clone, Debug)]
pub struct UniversalCompletion {
    pub order: usize,
    pub group: GroupSpec<Perm>,
    /// `psi[m][x]` is the image of element `x` of member `m`.
    pub psi: Vec<Vec<Perm>>,
    /// Member and element of every generator of `group`.
    pub sources: Vec<(usize, u32)>,
}

pub fn universal_completion<E: GroupElem>(a: &Amalgam<E>, cap: usize) -> Result<UniversalCompletion, AmalgamError> {
    let p = universal_completion_presentation(a, DEFAULT_UNION_CAP)?;
    let s = simplify_presentation(&p.presentation);
    let table = enumerate(&s.presentation, &[], cap)?;
    let order = table.index();
    // right action c ↦ c·g turned into a left action by inverting
    let gens: Vec<Perm> = (1..=s.presentation.rank()).map(|k| table.generator_perm(k).inverse()).collect();
    let id = Perm::identity(order);
    let of_word = |w: &Word| -> Perm {
        s.rewrite(w).iter().fold(id.clone(), |acc, &l| {
            let g = &gens[l.unsigned_abs() as usize - 1];
            acc.compose(&if l > 0 { g.clone() } else { g.inverse() })
        })
    };
    let psi = p.words.iter().map(|ws| ws.iter().map(of_word).collect()).collect();
    // surviving generators are the original generators whose image is a single letter
    let sources = (1..=s.presentation.rank() as i32)
        .map(|k| {
            let orig = s.images.iter().position(|w| w == &vec![k]).expect("survivors map to themselves");
            p.sources[orig]
        })
        .collect();
    Ok(UniversalCompletion { order, group: GroupSpec::new(id, gens), psi, sources })
}

// ---------------------------------------------------------------- completions

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionVerdict {
    /// Each member maps homomorphically into the target.
    pub homomorphisms: bool,
    /// The maps agree along every identification.
    pub compatible: bool,
    /// The image generates the target.
    pub generates: bool,
    pub completion: bool,
    /// Injective on every member.
    pub faithful: bool,
    pub witness: Option<String>,
}

/// Checks whether `map` (`map[m][x]` the image of element `x` of member
/// `m`) is a completion of the amalgam in `target`, and whether it is
/// faithful. Compatibility is checked along single identifications, which
/// forces agreement along all composites.
pub fn completion_check<E: GroupElem, F: GroupElem>(a: &Amalgam<E>, target: &GroupSpec<F>, map: &[Vec<F>]) -> CompletionVerdict {
    let mut v = CompletionVerdict {
        homomorphisms: true,
        compatible: true,
        generates: true,
        completion: false,
        faithful: true,
        witness: None,
    };
    let note = |v: &mut CompletionVerdict, s: String| {
        v.witness.get_or_insert(s);
    };
    if map.len() != a.members.len() || map.iter().zip(&a.members).any(|(m, g)| m.len() != g.order()) {
        v.homomorphisms = false;
        note(&mut v, "map does not cover every member element".into());
        return v;
    }
    for (m, mem) in a.members.iter().enumerate() {
        let img = &map[m];
        if let Some(x) = img.iter().position(|y| !target.contains(y)) {
            v.homomorphisms = false;
            note(&mut v, format!("image of element {x} of {} is not in the target", mem.name));
            continue;
        }
        'member: for x in 0..mem.order() as u32 {
            for &s in &mem.generators {
                if img[mem.mul(x, s) as usize] != img[x as usize].compose(&img[s as usize]) {
                    v.homomorphisms = false;
                    note(&mut v, format!("{} is not mapped homomorphically", mem.name));
                    break 'member;
                }
            }
        }
        if img.iter().collect::<HashSet<_>>().len() != img.len() {
            v.faithful = false;
        }
    }
    for id in &a.identifications {
        if (0..id.map.len()).any(|x| map[id.to][id.map[x] as usize] != map[id.from][x]) {
            v.compatible = false;
            note(&mut v, format!("identification {} → {} is not respected", id.from, id.to));
        }
    }
    let gens: Vec<F> = map.iter().flatten().cloned().collect();
    if v.homomorphisms && target.subgroup(gens).order() != target.order() {
        v.generates = false;
        note(&mut v, "image does not generate the target".into());
    }
    v.completion = v.homomorphisms && v.compatible && v.generates;
    v.faithful &= v.homomorphisms;
    v
}

// -------------------------------------------------------------------- shapes

/// All nonempty flags of `g` contained in `w`, each sorted, ordered by size
/// and then lexicographically.
pub fn flags_within(g: &Pregeometry, w: &[u32]) -> Vec<Vec<u32>> {
    let mut w: Vec<u32> = w.to_vec();
    w.sort_unstable();
    let mut out = Vec::new();
    for mask in 1u64..(1u64 << w.len()) {
        let s: Vec<u32> = (0..w.len()).filter(|&i| mask >> i & 1 == 1).map(|i| w[i]).collect();
        if g.is_flag(&s) {
            out.push(s);
        }
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

/// A family of nonempty flags inside `W` closed under passing to flags
/// containing them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub w: Vec<u32>,
    flags: BTreeSet<Vec<u32>>,
}

impl Shape {
    pub fn new(g: &Pregeometry, w: &[u32], flags: impl IntoIterator<Item = Vec<u32>>) -> Result<Self, AmalgamError> {
        let all = flags_within(g, w);
        let mut set = BTreeSet::new();
        for mut u in flags {
            u.sort_unstable();
            if !all.contains(&u) {
                return Err(AmalgamError::InvalidShape(format!("{u:?} is not a nonempty flag inside W")));
            }
            set.insert(u);
        }
        for u in &set {
            if let Some(sup) = all.iter().find(|v| v.len() > u.len() && u.iter().all(|x| v.contains(x)) && !set.contains(*v)) {
                return Err(AmalgamError::InvalidShape(format!("{u:?} is in the shape but {sup:?} is not")));
            }
        }
        let mut w = w.to_vec();
        w.sort_unstable();
        Ok(Shape { w, flags: set })
    }

    /// Every nonempty flag inside `W`.
    pub fn all(g: &Pregeometry, w: &[u32]) -> Self {
        Shape::new(g, w, flags_within(g, w)).expect("all flags are closed")
    }

    /// Flags whose residue has rank at most `k`: the parabolics of rank at
    /// most `k`.
    pub fn rank_at_most(g: &Pregeometry, w: &[u32], k: usize) -> Self {
        let n = g.rank();
        Shape::new(g, w, flags_within(g, w).into_iter().filter(|u| u.len() + k >= n)).expect("upward closed")
    }

    pub fn contains(&self, u: &[u32]) -> bool {
        let mut u = u.to_vec();
        u.sort_unstable();
        self.flags.contains(&u)
    }

    pub fn flags(&self) -> impl Iterator<Item = &Vec<u32>> {
        self.flags.iter()
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    /// The shape without `u`; fails if a subflag of something left would be
    /// needed.
    pub fn without(&self, g: &Pregeometry, u: &[u32]) -> Result<Self, AmalgamError> {
        let mut u = u.to_vec();
        u.sort_unstable();
        Shape::new(g, &self.w, self.flags.iter().filter(|v| **v != u).cloned())
    }
}

// ------------------------------------------------------ amalgams of parabolics

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

impl HypothesisCheck {
    fn new(name: &str, ok: bool, detail: impl Into<String>) -> Self {
        HypothesisCheck { name: name.into(), ok, detail: detail.into() }
    }
}

fn require(checks: &[HypothesisCheck]) -> Result<(), AmalgamError> {
    match checks.iter().find(|c| !c.ok) {
        Some(c) => Err(AmalgamError::HypothesisFailed(c.name.clone(), c.detail.clone())),
        None => Ok(()),
    }
}

/// Chambers of `g` made of elements of `w`.
fn chambers_within(g: &Pregeometry, w: &[u32]) -> Vec<Vec<u32>> {
    flags_within(g, w).into_iter().filter(|u| u.len() == g.rank()).collect()
}

/// `W` is a hall, and for every chamber inside `W` the orbit pregeometry is
/// transitive at each requested level.
fn orbit_hypotheses<E: GroupElem>(
    g: &Pregeometry,
    action: &GeomAction<E>,
    w: &[u32],
    levels: &[TransitivityLevel],
) -> Result<Vec<HypothesisCheck>, AmalgamError> {
    let mut checks = vec![HypothesisCheck::new("i", g.is_hall(w), "W meets every type and is a lounge")];
    let chambers = chambers_within(g, w);
    checks.push(HypothesisCheck::new("chambers", !chambers.is_empty(), format!("{} chambers inside W", chambers.len())));
    for &level in levels {
        let mut bad = Vec::new();
        for v in &chambers {
            let (og, ids) = orbit_geometry(g, action, v)?;
            let sub = restrict_action(action, &ids, g.len());
            if !transitivity_check(&og, &sub, level)?.transitive {
                bad.push(v.clone());
            }
        }
        let detail = if bad.is_empty() {
            format!("orbit pregeometries of all {} chambers are {level:?}-transitive", chambers.len())
        } else {
            format!("orbit pregeometries of {bad:?} are not {level:?}-transitive")
        };
        checks.push(HypothesisCheck::new("ii", bad.is_empty(), detail));
    }
    Ok(checks)
}

/// The amalgam `(G_U)_{U ∈ 𝒲}` of flag stabilisers with the inclusions
/// `G_{U′} → G_U` for `U ⊂ U′`, `|U′| = |U| + 1`.
#[derive(Clone, Debug)]
pub struct ParabolicAmalgam<E: GroupElem> {
    pub amalgam: Amalgam<E>,
    /// `flags[m]` is the flag whose stabiliser is member `m`.
    pub flags: Vec<Vec<u32>>,
    pub hypotheses: Vec<HypothesisCheck>,
}

impl<E: GroupElem> ParabolicAmalgam<E> {
    pub fn member_of(&self, u: &[u32]) -> Option<usize> {
        let mut u = u.to_vec();
        u.sort_unstable();
        self.flags.iter().position(|f| *f == u)
    }
}

pub fn amalgam_of_parabolics<E: GroupElem>(
    g: &Pregeometry,
    action: &GeomAction<E>,
    w: &[u32],
    shape: &Shape,
    cap: usize,
) -> Result<ParabolicAmalgam<E>, AmalgamError> {
    let hypotheses = orbit_hypotheses(g, action, w, &[TransitivityLevel::Incidence])?;
    require(&hypotheses)?;
    build_parabolics(g, action, shape, cap, hypotheses)
}

fn build_parabolics<E: GroupElem>(
    g: &Pregeometry,
    action: &GeomAction<E>,
    shape: &Shape,
    cap: usize,
    hypotheses: Vec<HypothesisCheck>,
) -> Result<ParabolicAmalgam<E>, AmalgamError> {
    if shape.is_empty() {
        return Err(AmalgamError::InvalidShape("empty shape".into()));
    }
    let flags: Vec<Vec<u32>> = shape.flags().cloned().collect();
    let maxsize = flags.iter().map(Vec::len).max().expect("nonempty");
    let mut members = Vec::new();
    for u in &flags {
        let stab = action.stabilizer_of_all(u)?;
        let name = u.iter().map(|&x| g.label(x)).collect::<Vec<_>>().join("+");
        members.push(Member::from_group(format!("G[{name}]"), maxsize - u.len(), &stab, cap)?);
    }
    let mut identifications = Vec::new();
    for (i, big) in flags.iter().enumerate() {
        for (j, small) in flags.iter().enumerate() {
            if big.len() == small.len() + 1 && small.iter().all(|x| big.contains(x)) {
                let (a, b) = (&members[i], &members[j]);
                let map = a
                    .elements
                    .iter()
                    .map(|e| b.index_of(e).expect("stabiliser of a larger flag is a subgroup"))
                    .collect();
                identifications.push(Identification { from: i, to: j, map });
            }
        }
    }
    Ok(ParabolicAmalgam { amalgam: Amalgam::new(members, identifications)?, flags, hypotheses })
}

// --------------------------------------------------------------- Tits' lemma

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conclusion {
    /// `𝒰(𝒜) → G` is an isomorphism.
    Isomorphism,
    NotIsomorphism,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TitsVerdict {
    pub hypotheses: Vec<HypothesisCheck>,
    /// `enumeration` or `certificates`.
    pub method: String,
    pub group_order: u128,
    pub universal_order: Option<usize>,
    pub h1: Option<H1>,
    pub simply_connected: Option<bool>,
    pub conclusion: Conclusion,
}

/// Simple-connectivity evidence gathered outside the enumeration route.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateEvidence {
    pub h1_trivial: Option<bool>,
    pub certificates_verified: usize,
    pub certificates_failed: usize,
    pub search_exhausted: usize,
}

/// Tits' lemma at toy scale: checks the hypotheses, enumerates `𝒰(𝒜)` for
/// the amalgam of all parabolics and compares its order with `|G|`.
pub fn tits_verify<E: GroupElem>(
    g: &Pregeometry,
    action: &GeomAction<E>,
    w: &[u32],
    cap: usize,
) -> Result<TitsVerdict, AmalgamError> {
    if g.rank() < 3 {
        return Err(AmalgamError::HypothesisFailed("rank".into(), format!("rank {} is below three", g.rank())));
    }
    let mut hypotheses =
        orbit_hypotheses(g, action, w, &[TransitivityLevel::Incidence, TransitivityLevel::Pennant])?;
    hypotheses.push(HypothesisCheck::new("connected", g.is_connected(), "incidence graph is connected"));
    require(&hypotheses)?;
    let pa = build_parabolics(g, action, &Shape::all(g, w), cap, hypotheses.clone())?;
    let group_order = action.group.order();
    let universal = match universal_order(&pa.amalgam, cap) {
        Ok(n) => n,
        Err(AmalgamError::Tc(TcError::CapExceeded(c))) => {
            return Err(AmalgamError::Inconclusive(format!("coset enumeration exceeded {c} cosets and no certificates were supplied")))
        }
        Err(e) => return Err(e),
    };
    if universal as u128 % group_order != 0 {
        return Err(AmalgamError::HypothesisFailed(
            "completion".into(),
            format!("|𝒰| = {universal} is not a multiple of |G| = {group_order}"),
        ));
    }
    let h1 = homology_h1(g).ok();
    let h1_nontrivial = h1.as_ref().is_some_and(|h| !h.is_trivial());
    // a nontrivial H1 rules out simple connectivity whatever the orders say
    let iso = universal as u128 == group_order && !h1_nontrivial;
    Ok(TitsVerdict {
        hypotheses,
        method: "enumeration".into(),
        group_order,
        universal_order: Some(universal),
        h1,
        simply_connected: Some(iso),
        conclusion: if iso { Conclusion::Isomorphism } else { Conclusion::NotIsomorphism },
    })
}

/// Tits' lemma at certificate scale: the conclusion follows from the stated
/// hypotheses and simple-connectivity evidence. A nontrivial `H₁` is
/// decisive against; sampled certificates only support the conclusion.
pub fn tits_from_evidence(hypotheses: Vec<HypothesisCheck>, group_order: u128, evidence: &CertificateEvidence) -> TitsVerdict {
    let hyp_ok = hypotheses.iter().all(|h| h.ok);
    let clean = evidence.certificates_failed == 0 && evidence.search_exhausted == 0 && evidence.certificates_verified > 0;
    let (simply_connected, conclusion) = if evidence.h1_trivial == Some(false) {
        (Some(false), Conclusion::NotIsomorphism)
    } else if hyp_ok && clean {
        (Some(true), Conclusion::Isomorphism)
    } else {
        (None, Conclusion::Inconclusive)
    };
    TitsVerdict {
        hypotheses,
        method: "certificates".into(),
        group_order,
        universal_order: None,
        h1: None,
        simply_connected,
        conclusion,
    }
}

// ----------------------------------------------------------- shape reduction

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeStep {
    /// The flag taken out of the shape (empty for the whole geometry).
    pub removed: Vec<u32>,
    pub residue_rank: usize,
    pub verdict: Verdict,
    pub method: String,
    /// `|𝒰(𝒜_𝒲)|` for the shape after this step, when enumerable.
    pub universal_order: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub hypotheses: Vec<HypothesisCheck>,
    pub group_order: u128,
    pub steps: Vec<ShapeStep>,
    pub final_shape: Vec<Vec<u32>>,
    pub conclusion: Conclusion,
}

/// Removes the flags of `2^W ∖ 𝒲` from the full shape smallest first
/// (keeping every intermediate family closed), checking before each removal
/// that the residue of the flag is simply connected and recording
/// `|𝒰(𝒜_𝒲)|` along the way.
pub fn shape_reduction_verify<E: GroupElem>(
    g: &Pregeometry,
    action: &GeomAction<E>,
    w: &[u32],
    target: &Shape,
    cap: usize,
) -> Result<ShapeReport, AmalgamError> {
    let hypotheses = orbit_hypotheses(g, action, w, &[TransitivityLevel::Flag])?;
    require(&hypotheses)?;
    let group_order = action.group.order();
    let mut removals: Vec<Vec<u32>> = vec![Vec::new()];
    removals.extend(flags_within(g, w).into_iter().filter(|u| !target.contains(u)));
    let mut current = Shape::all(g, w);
    let mut report = ShapeReport {
        hypotheses: hypotheses.clone(),
        group_order,
        steps: Vec::new(),
        final_shape: Vec::new(),
        conclusion: Conclusion::Inconclusive,
    };
    for u in removals {
        let residue = if u.is_empty() { g.clone() } else { g.residue(&u)?.0 };
        let sc = simple_connectivity(&residue, cap);
        if sc.verdict != Verdict::Verified {
            report.final_shape = current.flags().cloned().collect();
            report.steps.push(ShapeStep {
                removed: u.clone(),
                residue_rank: residue.rank(),
                verdict: sc.verdict,
                method: sc.method,
                universal_order: None,
            });
            return Err(AmalgamError::ResidueNotVerified { flag: u, report: Box::new(report) });
        }
        if !u.is_empty() {
            current = current.without(g, &u)?;
        }
        let pa = build_parabolics(g, action, &current, cap, hypotheses.clone())?;
        let order = match universal_order(&pa.amalgam, cap) {
            Ok(n) => Some(n),
            Err(AmalgamError::Tc(TcError::CapExceeded(_))) => None,
            Err(e) => return Err(e),
        };
        report.steps.push(ShapeStep {
            removed: u,
            residue_rank: residue.rank(),
            verdict: sc.verdict,
            method: sc.method,
            universal_order: order,
        });
    }
    report.final_shape = current.flags().cloned().collect();
    report.conclusion = match report.steps.last().and_then(|s| s.universal_order) {
        Some(n) if n as u128 == group_order => Conclusion::Isomorphism,
        Some(_) => Conclusion::NotIsomorphism,
        None => Conclusion::Inconclusive,
    };
    Ok(report)
}

// ------------------------------------------------------------------ covering

/// An element of a direct product; the diagonal subgroup generated by pairs
/// `(ψ(x), x)` is a copy of `𝒰(𝒜)` carrying its map onto `G`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pair<A, B>(pub A, pub B);

impl<A: GroupElem, B: GroupElem> GroupElem for Pair<A, B> {
    fn compose(&self, other: &Self) -> Self {
        Pair(self.0.compose(&other.0), self.1.compose(&other.1))
    }

    fn inverse(&self) -> Self {
        Pair(self.0.inverse(), self.1.inverse())
    }

    fn is_identity(&self) -> bool {
        self.0.is_identity() && self.1.is_identity()
    }

    fn shadow(&self) -> Perm {
        let a = self.0.shadow();
        let b = self.1.shadow();
        let shift = a.degree() as u32;
        let images = a.images().iter().copied().chain(b.images().iter().map(|&y| y + shift)).collect();
        Perm::from_images(images).expect("disjoint union of permutations")
    }
}

#[derive(Clone, Debug)]
pub struct CoverReport {
    pub universal_order: usize,
    pub group_order: u128,
    /// `|𝒰(𝒜)| / |G|`.
    pub index: usize,
    pub geometry: Pregeometry,
    /// Cover element ↦ element of `g`.
    pub map: Vec<u32>,
    pub covering: CoveringReport,
}

impl CoverReport {
    pub fn is_isomorphism(&self) -> bool {
        self.index == 1 && self.covering.ok
    }
}

/// The coset pregeometry of `𝒰(𝒜)` over the images of the maximal
/// parabolics `G_w`, `w ∈ W`, and its map `aĜ_w ↦ π(a)·w` onto `g`.
pub fn build_cover_geometry<E: GroupElem>(
    pa: &ParabolicAmalgam<E>,
    g: &Pregeometry,
    action: &GeomAction<E>,
    w: &[u32],
    cap: usize,
) -> Result<CoverReport, AmalgamError> {
    let uc = universal_completion(&pa.amalgam, cap)?;
    let elem = |(m, x): (usize, u32)| pa.amalgam.members[m].elements[x as usize].clone();
    let gens: Vec<Pair<Perm, E>> = uc
        .group
        .generators()
        .iter()
        .zip(&uc.sources)
        .map(|(p, &src)| Pair(p.clone(), elem(src)))
        .collect();
    let diag = GroupSpec::new(Pair(Perm::identity(uc.order), action.group.identity().clone()), gens);
    if diag.order() != uc.order as u128 {
        return Err(AmalgamError::HypothesisFailed(
            "completion".into(),
            "the parabolics do not map compatibly into G".into(),
        ));
    }
    let mut fam = Vec::new();
    for &x in w {
        let m = pa
            .member_of(&[x])
            .ok_or_else(|| AmalgamError::InvalidShape(format!("the shape lacks the maximal parabolic of {x}")))?;
        let mem = &pa.amalgam.members[m];
        let sub: Vec<Pair<Perm, E>> =
            mem.generators.iter().map(|&s| Pair(uc.psi[m][s as usize].clone(), mem.elements[s as usize].clone())).collect();
        fam.push(SubgroupMember { typ: g.typ(x), tag: g.label(x).to_string(), group: diag.subgroup(sub) });
    }
    let cg = coset_pregeometry(&diag, &fam, cap)?;
    let map: Vec<u32> = (0..cg.geometry.len()).map(|c| action.act(&cg.reps[c].1, w[cg.member[c]])).collect();
    let covering = covering_check(&cg.geometry, g, &map);
    let group_order = action.group.order();
    Ok(CoverReport {
        universal_order: uc.order,
        group_order,
        index: (uc.order as u128 / group_order) as usize,
        geometry: cg.geometry,
        map,
        covering,
    })
}

// ---------------------------------------------------------- serialised input

/// A permutation group given by generator images.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupDecl {
    pub name: String,
    pub level: usize,
    pub degree: usize,
    pub generators: Vec<Vec<u32>>,
}

/// An identification given by the images of the generators of `from`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentificationDecl {
    pub from: String,
    pub to: String,
    pub images: Vec<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmalgamSpec {
    pub groups: Vec<GroupDecl>,
    pub identifications: Vec<IdentificationDecl>,
}

impl AmalgamSpec {
    pub fn build(&self, cap: usize) -> Result<Amalgam<Perm>, AmalgamError> {
        let mut members = Vec::new();
        let mut gens_of = Vec::new();
        for d in &self.groups {
            let gens = d.generators.iter().map(|g| Perm::from_images(g.clone())).collect::<Result<Vec<_>, _>>()?;
            if gens.iter().any(|g| g.degree() != d.degree) {
                return Err(AmalgamError::InvalidIndex(format!("generator of {} has the wrong degree", d.name)));
            }
            let spec = GroupSpec::new(Perm::identity(d.degree), gens.clone());
            members.push(Member::from_group(d.name.clone(), d.level, &spec, cap)?);
            gens_of.push(gens);
        }
        let find = |n: &str| {
            self.groups
                .iter()
                .position(|d| d.name == n)
                .ok_or_else(|| AmalgamError::InvalidIndex(format!("unknown group {n}")))
        };
        let mut ids = Vec::new();
        for d in &self.identifications {
            let (from, to) = (find(&d.from)?, find(&d.to)?);
            let images = d.images.iter().map(|g| Perm::from_images(g.clone())).collect::<Result<Vec<_>, _>>()?;
            if images.len() != gens_of[from].len() {
                return Err(AmalgamError::NotAMonomorphism { from, to, reason: "one image per declared generator".into() });
            }
            // images are given for the declared generators; re-index to the
            // member's generating set
            let mem = &members[from];
            let by_decl: HashMap<&Perm, &Perm> = gens_of[from].iter().zip(&images).collect();
            let ordered: Vec<Perm> = mem
                .generators
                .iter()
                .map(|&s| (*by_decl.get(&mem.elements[s as usize]).expect("generators are declared")).clone())
                .collect();
            ids.push(Amalgam::identify_by_generators(&members, from, to, &ordered)?);
        }
        Amalgam::new(members, ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::group::symmetric_group;
    use crate::todd_coxeter::group_order;
    use proptest::prelude::*;

    fn cyclic(n: u32) -> GroupSpec<Perm> {
        let gen: Vec<u32> = (0..n).map(|i| (i + 1) % n).collect();
        GroupSpec::new(Perm::identity(n as usize), vec![Perm::from_images(gen).unwrap()])
    }

    fn gen_of(g: &GroupSpec<Perm>) -> Perm {
        g.generators()[0].clone()
    }

    /// Two level-one groups glued along a common level-zero group.
    fn amalgamated(h: &GroupSpec<Perm>, a: &GroupSpec<Perm>, b: &GroupSpec<Perm>, ia: Perm, ib: Perm) -> Amalgam<Perm> {
        let members = vec![
            Member::from_group("H", 0, h, 1000).unwrap(),
            Member::from_group("A", 1, a, 1000).unwrap(),
            Member::from_group("B", 1, b, 1000).unwrap(),
        ];
        let x = Amalgam::identify_by_generators(&members, 0, 1, &[ia]).unwrap();
        let y = Amalgam::identify_by_generators(&members, 0, 2, &[ib]).unwrap();
        Amalgam::new(members, vec![x, y]).unwrap()
    }

    #[test]
    fn single_group_presents_itself() {
        let s3 = symmetric_group(3);
        let a = Amalgam::new(vec![Member::from_group("S3", 0, &s3, 100).unwrap()], vec![]).unwrap();
        assert_eq!(universal_order(&a, 1000).unwrap(), 6);
        let raw = raw_universal_presentation(&a, 100).unwrap();
        assert_eq!(raw.rank(), 6);
        assert_eq!(group_order(&simplify_presentation(&raw).presentation, 1000).unwrap(), 6);
    }

    #[test]
    fn amalgamated_product_over_a_common_subgroup() {
        // Z₆ glued to itself along all of Z₆ collapses to Z₆
        let z6 = cyclic(6);
        let g = gen_of(&z6);
        let a = amalgamated(&z6, &z6, &z6, g.clone(), g.clone());
        assert_eq!(universal_order(&a, 1000).unwrap(), 6);
        let p = universal_completion_presentation(&a, 1000).unwrap();
        assert_eq!(p.union_size, 18);
        assert_eq!(p.s1, 3 * 36);
        assert_eq!(p.s2, 12);
        // Z₂ * Z₃ is infinite: enumeration cannot close
        let z2 = cyclic(2);
        let triv = GroupSpec::new(Perm::identity(1), vec![]);
        let m = vec![
            Member::from_group("1", 0, &triv, 10).unwrap(),
            Member::from_group("A", 1, &z2, 10).unwrap(),
            Member::from_group("B", 1, &cyclic(3), 10).unwrap(),
        ];
        let ids = vec![
            Identification { from: 0, to: 1, map: vec![0] },
            Identification { from: 0, to: 2, map: vec![0] },
        ];
        let free = Amalgam::new(m, ids).unwrap();
        assert!(matches!(universal_order(&free, 5000), Err(AmalgamError::Tc(TcError::CapExceeded(_)))));
    }

    #[test]
    fn collapsing_amalgam() {
        // two copies of Z₃ sent into two Z₃'s, once by x ↦ x and once by
        // x ↦ x²: the generator is identified with its own square
        let z3 = cyclic(3);
        let g = gen_of(&z3);
        let members = vec![
            Member::from_group("H1", 0, &z3, 10).unwrap(),
            Member::from_group("H2", 0, &z3, 10).unwrap(),
            Member::from_group("G", 1, &z3, 10).unwrap(),
            Member::from_group("G'", 1, &z3, 10).unwrap(),
        ];
        let sq = g.compose(&g);
        let ids = vec![
            Amalgam::identify_by_generators(&members, 0, 2, &[g.clone()]).unwrap(),
            Amalgam::identify_by_generators(&members, 1, 2, &[sq]).unwrap(),
            Amalgam::identify_by_generators(&members, 0, 3, &[g.clone()]).unwrap(),
            Amalgam::identify_by_generators(&members, 1, 3, &[g]).unwrap(),
        ];
        let a = Amalgam::new(members, ids).unwrap();
        assert_eq!(universal_order(&a, 100).unwrap(), 1);
    }

    #[test]
    fn invalid_identifications_are_rejected() {
        let z3 = cyclic(3);
        let z6 = cyclic(6);
        let members =
            vec![Member::from_group("H", 0, &z3, 10).unwrap(), Member::from_group("G", 1, &z6, 10).unwrap()];
        // a generator of order 3 cannot go to one of order 6
        let g6 = gen_of(&z6);
        assert!(matches!(
            Amalgam::identify_by_generators(&members, 0, 1, &[g6]),
            Err(AmalgamError::NotAMonomorphism { .. })
        ));
        let bad = Identification { from: 0, to: 1, map: vec![0, 0, 0] };
        assert!(Amalgam::new(members.clone(), vec![bad]).is_err());
        // a level-0 group with nowhere to go
        let lone = vec![members[0].clone(), members[1].clone(), Member::from_group("K", 0, &z3, 10).unwrap()];
        let ok = Amalgam::identify_by_generators(&lone, 0, 1, &[gen_of(&z6).compose(&gen_of(&z6))]).unwrap();
        assert!(matches!(Amalgam::new(lone, vec![ok]), Err(AmalgamError::Unreachable(2))));
    }

    fn tetra() -> (Pregeometry, GeomAction<Perm>, Vec<u32>) {
        let t = fixtures::tetrahedron();
        let act = GeomAction::on_ids(fixtures::tetrahedron_group());
        let ch = t.chambers()[0].clone();
        (t, act, ch)
    }

    #[test]
    fn tetrahedron_parabolics() {
        let (t, act, ch) = tetra();
        let pa = amalgam_of_parabolics(&t, &act, &ch, &Shape::all(&t, &ch), 1000).unwrap();
        assert_eq!(pa.amalgam.members.len(), 7);
        let orders: BTreeSet<usize> = pa.amalgam.members.iter().map(Member::order).collect();
        assert!(orders.contains(&1) && orders.contains(&6));
        assert_eq!(universal_order(&pa.amalgam, 10_000).unwrap(), 24);
        let p = universal_completion_presentation(&pa.amalgam, 10_000).unwrap();
        assert!(p.union_size <= 24 * 7);
        // the identity embedding into S₄ is a faithful completion
        let map: Vec<Vec<Perm>> = pa.amalgam.members.iter().map(|m| m.elements.clone()).collect();
        let v = completion_check(&pa.amalgam, &act.group, &map);
        assert!(v.completion && v.faithful, "{v:?}");
        // so is the universal completion itself
        let uc = universal_completion(&pa.amalgam, 10_000).unwrap();
        let v = completion_check(&pa.amalgam, &uc.group, &uc.psi);
        assert!(v.completion && v.faithful, "{v:?}");
    }

    #[test]
    fn completion_failures() {
        let (t, act, ch) = tetra();
        let pa = amalgam_of_parabolics(&t, &act, &ch, &Shape::all(&t, &ch), 1000).unwrap();
        let id = act.group.identity().clone();
        // trivial map: a completion of nothing, not generating
        let trivial: Vec<Vec<Perm>> = pa.amalgam.members.iter().map(|m| vec![id.clone(); m.order()]).collect();
        let v = completion_check(&pa.amalgam, &act.group, &trivial);
        assert!(v.homomorphisms && v.compatible && !v.generates && !v.completion && !v.faithful);
        // the sign map onto Z₂ is a completion that is not faithful
        let z2 = cyclic(2);
        // parity of the action on the four vertices, by inversion count
        let sign = |p: &Perm| {
            let im = &p.images()[..4];
            let inv = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).filter(|&(i, j)| im[i] > im[j]).count();
            if inv % 2 == 1 {
                gen_of(&z2)
            } else {
                Perm::identity(2)
            }
        };
        let signs: Vec<Vec<Perm>> = pa.amalgam.members.iter().map(|m| m.elements.iter().map(sign).collect()).collect();
        let v = completion_check(&pa.amalgam, &z2, &signs);
        assert!(v.completion && !v.faithful, "{v:?}");
    }

    #[test]
    fn tits_on_tetrahedron_and_rank_two() {
        let (t, act, ch) = tetra();
        let v = tits_verify(&t, &act, &ch, 100_000).unwrap();
        assert_eq!(v.universal_order, Some(24));
        assert_eq!(v.conclusion, Conclusion::Isomorphism);
        assert!(v.hypotheses.iter().all(|h| h.ok));
        let h = fixtures::hexagon();
        let ha = GeomAction::on_ids(GroupSpec::new(Perm::identity(h.len()), vec![]));
        let hc = h.chambers()[0].clone();
        assert!(matches!(tits_verify(&h, &ha, &hc, 1000), Err(AmalgamError::HypothesisFailed(..))));
    }

    #[test]
    fn hemi_octahedron_cover_has_index_two() {
        let (ho, grp) = fixtures::hemi_octahedron();
        let act = GeomAction::on_ids(grp);
        let ch = ho.chambers()[0].clone();
        let v = tits_verify(&ho, &act, &ch, 100_000).unwrap();
        assert_eq!(v.universal_order, Some(48));
        assert_eq!(v.conclusion, Conclusion::NotIsomorphism);
        let pa = amalgam_of_parabolics(&ho, &act, &ch, &Shape::all(&ho, &ch), 1000).unwrap();
        let c = build_cover_geometry(&pa, &ho, &act, &ch, 100_000).unwrap();
        assert_eq!(c.index, 2);
        assert!(c.covering.ok, "{:?}", c.covering);
        assert_eq!(c.geometry.len(), 2 * ho.len());
        assert!(c.geometry.is_connected());
    }

    #[test]
    fn tetrahedron_cover_is_an_isomorphism() {
        let (t, act, ch) = tetra();
        let pa = amalgam_of_parabolics(&t, &act, &ch, &Shape::all(&t, &ch), 1000).unwrap();
        let c = build_cover_geometry(&pa, &t, &act, &ch, 100_000).unwrap();
        assert!(c.is_isomorphism());
        assert_eq!(c.geometry.len(), 14);
    }

    #[test]
    fn shapes() {
        let (t, _, ch) = tetra();
        let all = Shape::all(&t, &ch);
        assert_eq!(all.len(), 7);
        assert_eq!(Shape::rank_at_most(&t, &ch, 2), all);
        assert_eq!(Shape::rank_at_most(&t, &ch, 1).len(), 4);
        assert!(Shape::new(&t, &ch, vec![vec![ch[0]]]).is_err());
        assert!(all.without(&t, &ch).is_err());
        assert!(all.without(&t, &[ch[0]]).is_ok());
    }

    #[test]
    fn shape_reduction_on_tetrahedron() {
        let (t, act, ch) = tetra();
        let r = shape_reduction_verify(&t, &act, &ch, &Shape::all(&t, &ch), 100_000).unwrap();
        assert_eq!(r.steps.len(), 1);
        assert_eq!(r.steps[0].universal_order, Some(24));
        assert_eq!(r.conclusion, Conclusion::Isomorphism);
        let target = Shape::rank_at_most(&t, &ch, 1);
        match shape_reduction_verify(&t, &act, &ch, &target, 100_000) {
            Err(AmalgamError::ResidueNotVerified { flag, report }) => {
                assert_eq!(flag.len(), 1);
                assert_eq!(report.steps[0].universal_order, Some(24));
                assert_eq!(report.steps.last().unwrap().verdict, Verdict::NotSimplyConnected);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn spec_round_trip() {
        let spec = AmalgamSpec {
            groups: vec![
                GroupDecl { name: "H".into(), level: 0, degree: 3, generators: vec![vec![1, 2, 0]] },
                GroupDecl { name: "A".into(), level: 1, degree: 3, generators: vec![vec![1, 2, 0], vec![1, 0, 2]] },
            ],
            identifications: vec![IdentificationDecl { from: "H".into(), to: "A".into(), images: vec![vec![1, 2, 0]] }],
        };
        let json = serde_json::to_string(&spec).unwrap();
        let back: AmalgamSpec = serde_json::from_str(&json).unwrap();
        let a = back.build(100).unwrap();
        assert_eq!(universal_order(&a, 100).unwrap(), 6);
    }

    fn s4() -> Vec<Perm> {
        symmetric_group(4).elements(100).unwrap()
    }

    fn inclusion(members: &[Member<Perm>], from: usize, to: usize) -> Identification {
        let map = members[from].elements.iter().map(|e| members[to].index_of(e).unwrap()).collect();
        Identification { from, to, map }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn universal_completion_covers_every_completion(
            a in proptest::collection::vec(0usize..24, 1..3),
            b in proptest::collection::vec(0usize..24, 1..3),
            h in 0usize..24,
        ) {
            let all = s4();
            let id = Perm::identity(4);
            let ga = GroupSpec::new(id.clone(), a.iter().map(|&i| all[i].clone()).collect());
            let gb = GroupSpec::new(id.clone(), b.iter().map(|&i| all[i].clone()).collect());
            let common: Vec<Perm> = all.iter().filter(|p| ga.contains(p) && gb.contains(p)).cloned().collect();
            let gh = GroupSpec::new(id.clone(), vec![common[h % common.len()].clone()]);
            let members = vec![
                Member::from_group("H", 0, &gh, 100).unwrap(),
                Member::from_group("A", 1, &ga, 100).unwrap(),
                Member::from_group("B", 1, &gb, 100).unwrap(),
            ];
            let ids = vec![inclusion(&members, 0, 1), inclusion(&members, 0, 2)];
            let am = Amalgam::new(members, ids).unwrap();
            let uc = match universal_completion(&am, 20_000) {
                Ok(uc) => uc,
                // amalgamated products over small subgroups are often infinite
                Err(AmalgamError::Tc(TcError::CapExceeded(_))) => return Ok(()),
                Err(e) => panic!("{e}"),
            };
            let v = completion_check(&am, &uc.group, &uc.psi);
            prop_assert!(v.completion && v.faithful, "{:?}", v);
            prop_assert_eq!(uc.group.order(), uc.order as u128);
            // the inclusions form a faithful completion in ⟨A, B⟩, a quotient of 𝒰
            let target = GroupSpec::new(id, ga.generators().iter().chain(gb.generators()).cloned().collect());
            let incl: Vec<Vec<Perm>> = am.members.iter().map(|m| m.elements.clone()).collect();
            let v = completion_check(&am, &target, &incl);
            prop_assert!(v.completion && v.faithful, "{:?}", v);
            prop_assert_eq!(uc.order as u128 % target.order(), 0);
        }

        #[test]
        fn single_top_group_is_its_own_completion(g in proptest::collection::vec(0usize..24, 1..3), h in 0usize..24, k in 0usize..24) {
            let all = s4();
            let id = Perm::identity(4);
            let gg = GroupSpec::new(id.clone(), g.iter().map(|&i| all[i].clone()).collect());
            let inside: Vec<Perm> = all.iter().filter(|p| gg.contains(p)).cloned().collect();
            let sub = |i: usize| GroupSpec::new(id.clone(), vec![inside[i % inside.len()].clone()]);
            let members = vec![
                Member::from_group("H", 0, &sub(h), 100).unwrap(),
                Member::from_group("K", 0, &sub(k), 100).unwrap(),
                Member::from_group("G", 1, &gg, 100).unwrap(),
            ];
            let ids = vec![inclusion(&members, 0, 2), inclusion(&members, 1, 2)];
            let am = Amalgam::new(members, ids).unwrap();
            prop_assert_eq!(universal_order(&am, 10_000).unwrap() as u128, gg.order());
        }

        #[test]
        fn nontrivial_h1_is_never_an_isomorphism(
            verified in 0usize..500,
            failed in 0usize..3,
            exhausted in 0usize..3,
            hyp in proptest::bool::ANY,
        ) {
            let hypotheses = vec![HypothesisCheck::new("i", hyp, "")];
            let ev = CertificateEvidence {
                h1_trivial: Some(false),
                certificates_verified: verified,
                certificates_failed: failed,
                search_exhausted: exhausted,
            };
            let v = tits_from_evidence(hypotheses.clone(), 24, &ev);
            prop_assert_eq!(v.conclusion, Conclusion::NotIsomorphism);
            let ev = CertificateEvidence { h1_trivial: None, ..ev };
            let v = tits_from_evidence(hypotheses, 24, &ev);
            let clean = hyp && failed == 0 && exhausted == 0 && verified > 0;
            prop_assert_eq!(v.conclusion == Conclusion::Isomorphism, clean);
        }
    }
}
