//! Pregeometries: typed elements with a symmetric, reflexive incidence in
//! which distinct elements of equal type are never incident.
//!
//! Elements carry dense `u32` ids. Incidence is stored as sorted adjacency
//! lists without the reflexive loops, so `incident(x, y)` is a binary search.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PregeoError {
    #[error("element {0} out of range")]
    InvalidElement(u32),
    #[error("elements {0} and {1} have equal type but are incident")]
    EqualTypeIncident(u32, u32),
    #[error("incidence is not symmetric at ({0}, {1})")]
    NotSymmetric(u32, u32),
    #[error("label and type lists have different lengths")]
    LengthMismatch,
    #[error("not a flag: {0:?}")]
    NotAFlag(Vec<u32>),
    #[error("type sets overlap in {0:?}")]
    TypeClash(Vec<u32>),
    #[error("diagram precondition failed: {0}")]
    DiagramPreconditionFailed(String),
    #[error("malformed pregeometry json: {0}")]
    Json(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pregeometry {
    types: Vec<u32>,
    typ: Vec<u32>,
    labels: Vec<String>,
    adj: Vec<Vec<u32>>,
}

/// Result of the (Geo) check: a maximal flag that is not a chamber, if any.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeometryCheck {
    pub ok: bool,
    pub witness: Option<Vec<u32>>,
}

/// Basic diagram: an undirected graph on the type set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagram {
    pub types: Vec<u32>,
    pub edges: BTreeSet<(u32, u32)>,
    /// True if some cotype was sampled rather than exhausted.
    pub sampled: bool,
}

impl Diagram {
    pub fn neighbors(&self, t: u32) -> Vec<u32> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == t {
                    Some(b)
                } else if b == t {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    /// The edges form the path `t₁ – t₂ – … – t_r` in increasing type order.
    pub fn is_linear(&self) -> bool {
        let expected: BTreeSet<(u32, u32)> = self.types.windows(2).map(|w| (w[0], w[1])).collect();
        self.edges == expected
    }

    /// Connected components of the diagram, each sorted.
    pub fn components(&self) -> Vec<Vec<u32>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &t in &self.types {
            if seen.contains(&t) {
                continue;
            }
            let mut comp = vec![t];
            seen.insert(t);
            let mut i = 0;
            while i < comp.len() {
                for u in self.neighbors(comp[i]) {
                    if seen.insert(u) {
                        comp.push(u);
                    }
                }
                i += 1;
            }
            comp.sort();
            out.push(comp);
        }
        out
    }
}

/// Enumeration threshold for cotype flags before [`Pregeometry::basic_diagram`]
/// falls back to sampling.
pub const DIAGRAM_EXHAUSTIVE_LIMIT: usize = 100_000;
const DIAGRAM_SAMPLES: usize = 4_000;

/// A simple undirected graph on `vertices` (element ids), indexed densely.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    pub vertices: Vec<u32>,
    pub adj: Vec<Vec<u32>>,
}

impl Graph {
    pub fn distances_from(&self, s: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.adj.len()];
        dist[s] = Some(0);
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].expect("visited");
            for &v in &self.adj[u] {
                if dist[v as usize].is_none() {
                    dist[v as usize] = Some(d + 1);
                    queue.push_back(v as usize);
                }
            }
        }
        dist
    }

    /// Largest distance, or `None` if the graph is disconnected.
    pub fn diameter(&self) -> Option<usize> {
        let mut best = 0;
        for s in 0..self.adj.len() {
            for d in self.distances_from(s) {
                best = best.max(d?);
            }
        }
        Some(best)
    }

    pub fn is_connected(&self) -> bool {
        self.adj.is_empty() || self.distances_from(0).iter().all(Option::is_some)
    }
}

#[derive(Serialize, Deserialize)]
struct JsonElement {
    id: u32,
    typ: u32,
    label: String,
}

#[derive(Serialize, Deserialize)]
struct JsonPregeometry {
    types: Vec<u32>,
    elements: Vec<JsonElement>,
    incidences: Vec<[u32; 2]>,
}

impl Serialize for Pregeometry {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let elements = (0..self.len() as u32)
            .map(|i| JsonElement { id: i, typ: self.typ(i), label: self.label(i).to_string() })
            .collect();
        let incidences = (0..self.len() as u32)
            .flat_map(|i| self.adj[i as usize].iter().filter(move |&&j| j > i).map(move |&j| [i, j]))
            .collect();
        JsonPregeometry { types: self.types.clone(), elements, incidences }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pregeometry {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = JsonPregeometry::deserialize(d)?;
        let mut els = raw.elements;
        els.sort_by_key(|e| e.id);
        if els.iter().enumerate().any(|(i, e)| e.id != i as u32) {
            return Err(serde::de::Error::custom("element ids must be 0..len"));
        }
        let typ: Vec<u32> = els.iter().map(|e| e.typ).collect();
        let labels = els.into_iter().map(|e| e.label).collect();
        let pairs: Vec<(u32, u32)> = raw.incidences.iter().map(|p| (p[0], p[1])).collect();
        let g = Pregeometry::new(typ, labels, &pairs).map_err(serde::de::Error::custom)?;
        if !raw.types.is_empty() && raw.types != g.types {
            return Err(serde::de::Error::custom("declared types differ from the types in use"));
        }
        Ok(g)
    }
}

impl Pregeometry {
    pub fn empty() -> Self {
        Pregeometry { types: Vec::new(), typ: Vec::new(), labels: Vec::new(), adj: Vec::new() }
    }

    /// Builds from a list of incident pairs (either order, duplicates allowed;
    /// pairs `(x, x)` are ignored).
    pub fn new(typ: Vec<u32>, labels: Vec<String>, incidences: &[(u32, u32)]) -> Result<Self, PregeoError> {
        let n = typ.len();
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in incidences {
            for x in [a, b] {
                if x as usize >= n {
                    return Err(PregeoError::InvalidElement(x));
                }
            }
            if a != b {
                adj[a as usize].push(b);
                adj[b as usize].push(a);
            }
        }
        Self::from_adjacency(typ, labels, adj)
    }

    /// Builds from adjacency lists, which must be symmetric.
    pub fn from_adjacency(typ: Vec<u32>, labels: Vec<String>, mut adj: Vec<Vec<u32>>) -> Result<Self, PregeoError> {
        if labels.len() != typ.len() || adj.len() != typ.len() {
            return Err(PregeoError::LengthMismatch);
        }
        let n = typ.len();
        for (x, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            list.retain(|&y| y as usize != x);
            if let Some(&y) = list.iter().find(|&&y| y as usize >= n) {
                return Err(PregeoError::InvalidElement(y));
            }
        }
        for x in 0..n {
            for &y in &adj[x] {
                if typ[x] == typ[y as usize] {
                    return Err(PregeoError::EqualTypeIncident(x as u32, y));
                }
                if adj[y as usize].binary_search(&(x as u32)).is_err() {
                    return Err(PregeoError::NotSymmetric(x as u32, y));
                }
            }
        }
        let types: Vec<u32> = typ.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        Ok(Pregeometry { types, typ, labels, adj })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.typ.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.typ.is_empty()
    }

    pub fn types(&self) -> &[u32] {
        &self.types
    }

    pub fn rank(&self) -> usize {
        self.types.len()
    }

    #[inline]
    pub fn typ(&self, x: u32) -> u32 {
        self.typ[x as usize]
    }

    pub fn label(&self, x: u32) -> &str {
        &self.labels[x as usize]
    }

    /// Incident elements other than `x` itself, sorted.
    #[inline]
    pub fn neighbors(&self, x: u32) -> &[u32] {
        &self.adj[x as usize]
    }

    #[inline]
    pub fn incident(&self, x: u32, y: u32) -> bool {
        x == y || self.adj[x as usize].binary_search(&y).is_ok()
    }

    pub fn elements_of_type(&self, t: u32) -> Vec<u32> {
        (0..self.len() as u32).filter(|&x| self.typ(x) == t).collect()
    }

    pub fn incidence_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn is_flag(&self, f: &[u32]) -> bool {
        f.iter().all(|&x| (x as usize) < self.len())
            && f.iter().enumerate().all(|(i, &x)| f[i + 1..].iter().all(|&y| x != y && self.incident(x, y)))
    }

    /// Elements `y ∉ f` incident with every element of `f`.
    pub fn common_neighbors(&self, f: &[u32]) -> Vec<u32> {
        let Some((&first, rest)) = f.split_first() else {
            return (0..self.len() as u32).collect();
        };
        let mut out: Vec<u32> = self.neighbors(first).to_vec();
        for &x in rest {
            out.retain(|&y| y != x && self.incident(x, y));
        }
        out
    }

    /// Visits every flag (including the empty flag) as an id-increasing list.
    pub fn for_each_flag(&self, mut visit: impl FnMut(&[u32])) {
        fn rec(g: &Pregeometry, flag: &mut Vec<u32>, cands: &[u32], visit: &mut dyn FnMut(&[u32])) {
            visit(flag);
            for (i, &c) in cands.iter().enumerate() {
                flag.push(c);
                let next: Vec<u32> = cands[i + 1..].iter().copied().filter(|&d| g.incident(c, d)).collect();
                rec(g, flag, &next, visit);
                flag.pop();
            }
        }
        let all: Vec<u32> = (0..self.len() as u32).collect();
        rec(self, &mut Vec::new(), &all, &mut visit);
    }

    /// All flags with exactly the given type set, each listed in the order of
    /// `types`. Stops early (returning `None`) once `cap` flags were found.
    pub fn flags_of_types(&self, types: &[u32], cap: usize) -> Option<Vec<Vec<u32>>> {
        let mut out = Vec::new();
        let mut flag = Vec::new();
        fn rec(
            g: &Pregeometry,
            types: &[u32],
            flag: &mut Vec<u32>,
            out: &mut Vec<Vec<u32>>,
            cap: usize,
        ) -> bool {
            if flag.len() == types.len() {
                out.push(flag.clone());
                return out.len() <= cap;
            }
            let t = types[flag.len()];
            let cands: Vec<u32> = match flag.first() {
                None => g.elements_of_type(t),
                Some(&x) => g.neighbors(x).iter().copied().filter(|&y| g.typ(y) == t).collect(),
            };
            for c in cands {
                if flag.iter().all(|&x| g.incident(x, c)) {
                    flag.push(c);
                    let go = rec(g, types, flag, out, cap);
                    flag.pop();
                    if !go {
                        return false;
                    }
                }
            }
            true
        }
        if rec(self, types, &mut flag, &mut out, cap) {
            Some(out)
        } else {
            None
        }
    }

    pub fn chambers(&self) -> Vec<Vec<u32>> {
        self.flags_of_types(&self.types.clone(), usize::MAX).expect("uncapped")
    }

    /// A uniformly-ish random flag of the given type set, by random extension
    /// with restarts. Returns `None` if no such flag is found.
    pub fn random_flag_of_types<R: Rng>(&self, types: &[u32], rng: &mut R) -> Option<Vec<u32>> {
        for _ in 0..1000 {
            let mut flag: Vec<u32> = Vec::new();
            let mut ok = true;
            for &t in types {
                let cands: Vec<u32> = if flag.is_empty() {
                    self.elements_of_type(t)
                } else {
                    self.common_neighbors(&flag).into_iter().filter(|&y| self.typ(y) == t).collect()
                };
                match cands.choose(rng) {
                    Some(&c) => flag.push(c),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                return Some(flag);
            }
        }
        None
    }

    /// (Geo): every maximal flag is a chamber.
    pub fn is_geometry(&self) -> GeometryCheck {
        let rank = self.rank();
        let mut witness = None;
        fn rec(
            g: &Pregeometry,
            flag: &mut Vec<u32>,
            ext: Vec<u32>,
            rank: usize,
            witness: &mut Option<Vec<u32>>,
        ) {
            if witness.is_some() {
                return;
            }
            if ext.is_empty() {
                if flag.len() < rank {
                    *witness = Some(flag.clone());
                }
                return;
            }
            // extend only by larger ids to enumerate each flag once
            let last = flag.last().copied();
            for &c in &ext {
                if last.is_some_and(|l| c < l) {
                    continue;
                }
                let next: Vec<u32> = ext.iter().copied().filter(|&d| d != c && g.incident(c, d)).collect();
                // a flag whose extensions all have smaller ids was visited before
                flag.push(c);
                rec(g, flag, next, rank, witness);
                flag.pop();
            }
        }
        let all: Vec<u32> = (0..self.len() as u32).collect();
        if rank > 0 {
            rec(self, &mut Vec::new(), all, rank, &mut witness);
        }
        GeometryCheck { ok: witness.is_none(), witness }
    }

    /// Sub-pregeometry on `ids` (in the given order); returns the parent ids.
    pub fn induced(&self, ids: &[u32]) -> (Pregeometry, Vec<u32>) {
        let mut pos = vec![u32::MAX; self.len()];
        for (i, &x) in ids.iter().enumerate() {
            pos[x as usize] = i as u32;
        }
        let adj = ids
            .iter()
            .map(|&x| self.neighbors(x).iter().filter_map(|&y| (pos[y as usize] != u32::MAX).then(|| pos[y as usize])).collect())
            .collect();
        let typ = ids.iter().map(|&x| self.typ(x)).collect();
        let labels = ids.iter().map(|&x| self.labels[x as usize].clone()).collect();
        (Pregeometry::from_adjacency(typ, labels, adj).expect("restriction keeps (Pre)"), ids.to_vec())
    }

    /// Residue of a flag, with the parent id of every residue element.
    pub fn residue(&self, flag: &[u32]) -> Result<(Pregeometry, Vec<u32>), PregeoError> {
        if !self.is_flag(flag) {
            return Err(PregeoError::NotAFlag(flag.to_vec()));
        }
        let ftypes: BTreeSet<u32> = flag.iter().map(|&x| self.typ(x)).collect();
        let ids: Vec<u32> = self
            .common_neighbors(flag)
            .into_iter()
            .filter(|&y| !ftypes.contains(&self.typ(y)))
            .collect();
        Ok(self.induced(&ids))
    }

    /// Truncation to the types in `j`.
    pub fn truncate(&self, j: &[u32]) -> (Pregeometry, Vec<u32>) {
        let ids: Vec<u32> = (0..self.len() as u32).filter(|&x| j.contains(&self.typ(x))).collect();
        self.induced(&ids)
    }

    /// Union with full incidence between the two parts; ids of `other` are
    /// shifted by `self.len()`.
    pub fn direct_sum(&self, other: &Pregeometry) -> Result<Pregeometry, PregeoError> {
        let clash: Vec<u32> = self.types.iter().copied().filter(|t| other.types.contains(t)).collect();
        if !clash.is_empty() {
            return Err(PregeoError::TypeClash(clash));
        }
        let n = self.len() as u32;
        let m = other.len() as u32;
        let mut adj: Vec<Vec<u32>> = Vec::with_capacity((n + m) as usize);
        for x in 0..n {
            let mut l = self.neighbors(x).to_vec();
            l.extend(n..n + m);
            adj.push(l);
        }
        for y in 0..m {
            let mut l: Vec<u32> = (0..n).collect();
            l.extend(other.neighbors(y).iter().map(|z| z + n));
            adj.push(l);
        }
        let typ = self.typ.iter().chain(other.typ.iter()).copied().collect();
        let labels = self.labels.iter().chain(other.labels.iter()).cloned().collect();
        Pregeometry::from_adjacency(typ, labels, adj)
    }

    pub fn is_connected(&self) -> bool {
        if self.is_empty() {
            return true;
        }
        Graph { vertices: (0..self.len() as u32).collect(), adj: self.adj.clone() }.is_connected()
    }

    /// Whether some element of type `i` and some element of type `j` in the
    /// residue of `flag` are not incident.
    fn residue_has_nonincident_pair(&self, flag: &[u32], i: u32, j: u32) -> bool {
        let common = self.common_neighbors(flag);
        let ri: Vec<u32> = common.iter().copied().filter(|&x| self.typ(x) == i).collect();
        let rj: Vec<u32> = common.iter().copied().filter(|&x| self.typ(x) == j).collect();
        ri.iter().any(|&x| rj.iter().any(|&y| !self.incident(x, y)))
    }

    /// The basic diagram; cotypes with more than
    /// [`DIAGRAM_EXHAUSTIVE_LIMIT`] flags are sampled with a fixed seed.
    pub fn basic_diagram(&self) -> Diagram {
        let mut edges = BTreeSet::new();
        let mut sampled = false;
        let mut rng = crate::rng(0xd1a9);
        for (a, &i) in self.types.iter().enumerate() {
            for &j in &self.types[a + 1..] {
                let cotype: Vec<u32> = self.types.iter().copied().filter(|&t| t != i && t != j).collect();
                let found = match self.flags_of_types(&cotype, DIAGRAM_EXHAUSTIVE_LIMIT) {
                    Some(flags) => flags.iter().any(|f| self.residue_has_nonincident_pair(f, i, j)),
                    None => {
                        sampled = true;
                        (0..DIAGRAM_SAMPLES).any(|_| {
                            self.random_flag_of_types(&cotype, &mut rng)
                                .is_some_and(|f| self.residue_has_nonincident_pair(&f, i, j))
                        })
                    }
                };
                if found {
                    edges.insert((i, j));
                }
            }
        }
        Diagram { types: self.types.clone(), edges, sampled }
    }

    /// Collinearity graph, with the smallest type as points and its unique
    /// basic-diagram neighbour as lines.
    pub fn collinearity_graph(&self) -> Result<Graph, PregeoError> {
        let Some(&pt) = self.types.first() else {
            return Err(PregeoError::DiagramPreconditionFailed("empty type set".into()));
        };
        let nb = self.basic_diagram().neighbors(pt);
        if nb.len() != 1 {
            return Err(PregeoError::DiagramPreconditionFailed(format!(
                "type {pt} has {} neighbours in the basic diagram",
                nb.len()
            )));
        }
        Ok(self.collinearity_graph_with(pt, nb[0]))
    }

    /// Points of type `pt` adjacent when incident with a common element of
    /// type `lt`.
    pub fn collinearity_graph_with(&self, pt: u32, lt: u32) -> Graph {
        let vertices = self.elements_of_type(pt);
        let mut index = BTreeMap::new();
        for (i, &v) in vertices.iter().enumerate() {
            index.insert(v, i as u32);
        }
        let mut adj: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); vertices.len()];
        for l in self.elements_of_type(lt) {
            let on: Vec<u32> = self.neighbors(l).iter().filter_map(|y| index.get(y).copied()).collect();
            for &a in &on {
                for &b in &on {
                    if a != b {
                        adj[a as usize].insert(b);
                    }
                }
            }
        }
        Graph { vertices, adj: adj.into_iter().map(|s| s.into_iter().collect()).collect() }
    }

    /// Every pair of elements of distinct types in `s` is incident.
    pub fn is_lounge(&self, s: &[u32]) -> bool {
        s.iter().all(|&x| (x as usize) < self.len())
            && s.iter()
                .enumerate()
                .all(|(i, &x)| s[i + 1..].iter().all(|&y| self.typ(x) == self.typ(y) || self.incident(x, y)))
    }

    pub fn is_hall(&self, s: &[u32]) -> bool {
        let ts: BTreeSet<u32> = s.iter().filter(|&&x| (x as usize) < self.len()).map(|&x| self.typ(x)).collect();
        self.is_lounge(s) && ts.into_iter().collect::<Vec<_>>() == self.types
    }

    /// Whether `map` (indexed by ids of `self`) is an isomorphism onto
    /// `other`, with `type_map` translating type ids.
    pub fn is_isomorphism_to(&self, other: &Pregeometry, map: &[u32], type_map: impl Fn(u32) -> u32) -> bool {
        if map.len() != self.len() || other.len() != self.len() {
            return false;
        }
        let mut hit = vec![false; other.len()];
        for &y in map {
            if y as usize >= other.len() || std::mem::replace(&mut hit[y as usize], true) {
                return false;
            }
        }
        (0..self.len() as u32).all(|x| type_map(self.typ(x)) == other.typ(map[x as usize]))
            && self.incidence_count() == other.incidence_count()
            && (0..self.len() as u32)
                .all(|x| self.neighbors(x).iter().all(|&y| other.incident(map[x as usize], map[y as usize])))
    }

    /// Same pregeometry with ids permuted: element `x` gets id `perm[x]`.
    pub fn relabel(&self, perm: &[u32]) -> Pregeometry {
        let n = self.len();
        let mut typ = vec![0; n];
        let mut labels = vec![String::new(); n];
        let mut adj = vec![Vec::new(); n];
        for x in 0..n {
            let y = perm[x] as usize;
            typ[y] = self.typ[x];
            labels[y] = self.labels[x].clone();
            adj[y] = self.adj[x].iter().map(|&z| perm[z as usize]).collect();
        }
        Pregeometry::from_adjacency(typ, labels, adj).expect("relabelling keeps (Pre)")
    }

    /// Incidence graph as a [`Graph`] on all elements.
    pub fn incidence_graph(&self) -> Graph {
        Graph { vertices: (0..self.len() as u32).collect(), adj: self.adj.clone() }
    }
}
