//! Cycles, elementary homotopies and replayable null-homotopy certificates.
//!
//! A cycle is a closed walk `x₀, x₁, …, x_k = x₀` in the incidence graph in
//! which consecutive elements are incident or equal. Three kinds of move
//! relate cycles, each insertable or deletable at a position `i`:
//!
//! * repetition: `… x … ↔ … x x …`
//! * return: `… x … ↔ … x y x …`
//! * triangle: `… x … ↔ … x y z x …` with `x, y, z` pairwise incident
//!
//! A certificate lists such moves; replaying them must turn the initial cycle
//! into the trivial cycle `(x₀)` (or into a stated target cycle). Vertices
//! are generic so that the same machinery serves explicit pregeometries
//! (`u32` ids) and the implicit orthogonal geometries (subspaces).

mod cover;
mod h1;
pub mod orth;

pub use cover::{
    covering_check, fundamental_cover, pi1_presentation, simple_connectivity, CoveringReport, FundamentalCover,
    Pi1Presentation, SimpleConnectivity, Verdict,
};
pub use h1::{homology_h1, smith_invariants, H1};

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Debug;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pregeo::{PregeoError, Pregeometry};
use crate::todd_coxeter::TcError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HomotopyError {
    #[error("not a cycle: {0}")]
    NotACycle(String),
    #[error("cycle is not geometric: {0}")]
    NotGeometric(String),
    #[error("move {index} is illegal: {reason}")]
    IllegalMove { index: usize, reason: String },
    #[error("hypothesis failed: {0}")]
    HypothesisFailed(String),
    #[error("search exhausted: {0}")]
    SearchExhausted(String),
    #[error("reached the hyperbolic-complement case with two elliptic lines: {0}")]
    CaseIIEncountered(String),
    #[error("no transporting isometry: {0}")]
    TransporterNotFound(String),
    #[error("complex too large: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Tc(#[from] TcError),
    #[error(transparent)]
    Pregeo(#[from] PregeoError),
}

/// Incidence data needed to replay moves.
pub trait CycleSpace<V> {
    fn is_element(&self, v: &V) -> bool;
    /// Incidence of two elements; equal elements count as incident.
    fn incident(&self, a: &V, b: &V) -> bool;
    fn typ(&self, v: &V) -> u32;
}

/// Extra structure used to push a cycle onto points and lines.
pub trait PointLineSpace<V>: CycleSpace<V> {
    fn point_type(&self) -> u32;
    fn line_type(&self) -> u32;
    /// Some point incident with every element of `flag`, chosen
    /// deterministically.
    fn point_of_flag(&self, flag: &[&V]) -> Option<V>;
    /// A path `p, ℓ₁, x₁, …, q` of points and lines, all incident with `y`.
    fn path_in(&self, y: &V, p: &V, q: &V) -> Option<Vec<V>>;
}

impl CycleSpace<u32> for Pregeometry {
    fn is_element(&self, v: &u32) -> bool {
        (*v as usize) < self.len()
    }

    fn incident(&self, a: &u32, b: &u32) -> bool {
        a == b || Pregeometry::incident(self, *a, *b)
    }

    fn typ(&self, v: &u32) -> u32 {
        Pregeometry::typ(self, *v)
    }
}

impl PointLineSpace<u32> for Pregeometry {
    fn point_type(&self) -> u32 {
        self.types()[0]
    }

    fn line_type(&self) -> u32 {
        self.types()[1]
    }

    fn point_of_flag(&self, flag: &[&u32]) -> Option<u32> {
        let pt = self.point_type();
        if let Some(&&p) = flag.iter().find(|x| Pregeometry::typ(self, ***x) == pt) {
            return flag.iter().all(|&&y| CycleSpace::incident(self, &p, &y)).then_some(p);
        }
        let ids: Vec<u32> = flag.iter().map(|&&x| x).collect();
        self.common_neighbors(&ids).into_iter().find(|&y| Pregeometry::typ(self, y) == pt)
    }

    fn path_in(&self, y: &u32, p: &u32, q: &u32) -> Option<Vec<u32>> {
        let (pt, lt) = (self.point_type(), self.line_type());
        let inside = |x: u32| CycleSpace::incident(self, &x, y);
        let mut prev: HashMap<u32, (u32, u32)> = HashMap::new();
        let mut queue = VecDeque::from([*p]);
        let mut seen = BTreeSet::from([*p]);
        while let Some(a) = queue.pop_front() {
            if a == *q {
                let mut path = vec![a];
                let mut cur = a;
                while let Some(&(l, b)) = prev.get(&cur) {
                    path.push(l);
                    path.push(b);
                    cur = b;
                }
                path.reverse();
                return Some(path);
            }
            for &l in self.neighbors(a) {
                if Pregeometry::typ(self, l) != lt || !inside(l) {
                    continue;
                }
                for &b in self.neighbors(l) {
                    if Pregeometry::typ(self, b) == pt && inside(b) && seen.insert(b) {
                        prev.insert(b, (l, a));
                        queue.push_back(b);
                    }
                }
            }
        }
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Repetition,
    Return,
    Triangle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Insert,
    Delete,
}

/// One elementary homotopy applied at cycle position `pos`; `verts` are the
/// vertices inserted after (or deleted from after) position `pos`, without
/// the closing repeat of `x`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move<V> {
    pub kind: MoveKind,
    pub dir: Direction,
    pub pos: usize,
    pub verts: Vec<V>,
}

impl<V> Move<V> {
    pub fn map<W>(&self, f: impl Fn(&V) -> W) -> Move<W> {
        Move { kind: self.kind, dir: self.dir, pos: self.pos, verts: self.verts.iter().map(f).collect() }
    }
}

/// A cycle, a move list and the cycle the moves must produce; `target`
/// absent means the trivial cycle `(base)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate<V> {
    pub base: V,
    pub cycle: Vec<V>,
    pub moves: Vec<Move<V>>,
    #[serde(default = "Option::default", skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<V>>,
}

impl<V: Clone> Certificate<V> {
    /// The certificate with `f` applied to every vertex; valid again whenever
    /// `f` is an automorphism.
    pub fn transport<W>(&self, f: impl Fn(&V) -> W) -> Certificate<W> {
        Certificate {
            base: f(&self.base),
            cycle: self.cycle.iter().map(&f).collect(),
            moves: self.moves.iter().map(|m| m.map(&f)).collect(),
            target: self.target.as_ref().map(|t| t.iter().map(&f).collect()),
        }
    }

    pub fn final_cycle(&self) -> Vec<V> {
        self.target.clone().unwrap_or_else(|| vec![self.base.clone()])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verification {
    pub ok: bool,
    pub moves_replayed: usize,
    pub failed_move: Option<usize>,
    pub reason: Option<String>,
}

fn check_cycle<V: PartialEq + Debug, S: CycleSpace<V> + ?Sized>(space: &S, c: &[V]) -> Result<(), String> {
    if c.is_empty() {
        return Err("empty cycle".into());
    }
    if c.first() != c.last() {
        return Err("cycle is not closed".into());
    }
    if let Some(x) = c.iter().find(|x| !space.is_element(x)) {
        return Err(format!("{x:?} is not an element"));
    }
    if let Some(i) = (0..c.len() - 1).find(|&i| !space.incident(&c[i], &c[i + 1])) {
        return Err(format!("positions {i} and {} are not incident", i + 1));
    }
    Ok(())
}

/// Applies one move in place.
pub fn apply_move<V, S>(space: &S, c: &mut Vec<V>, m: &Move<V>) -> Result<(), String>
where
    V: Clone + PartialEq + Debug,
    S: CycleSpace<V> + ?Sized,
{
    let i = m.pos;
    if i >= c.len() {
        return Err(format!("position {i} outside a cycle of length {}", c.len()));
    }
    let x = c[i].clone();
    let need = match m.kind {
        MoveKind::Repetition => 0,
        MoveKind::Return => 1,
        MoveKind::Triangle => 2,
    };
    if m.verts.len() != need.max(1) && !(m.kind == MoveKind::Repetition && m.verts.len() == 1) {
        return Err(format!("{:?} move needs {} vertices", m.kind, need.max(1)));
    }
    if let Some(v) = m.verts.iter().find(|v| !space.is_element(v)) {
        return Err(format!("{v:?} is not an element"));
    }
    let window = |c: &Vec<V>, len: usize| -> Result<Vec<V>, String> {
        c.get(i + 1..=i + len).map(|s| s.to_vec()).ok_or_else(|| "deleted window runs past the end".to_string())
    };
    match (m.kind, m.dir) {
        (MoveKind::Repetition, Direction::Insert) => {
            if m.verts[0] != x {
                return Err("repeated vertex differs from the vertex at pos".into());
            }
            c.insert(i + 1, x);
        }
        (MoveKind::Repetition, Direction::Delete) => {
            if window(c, 1)? != [x.clone()] || m.verts[0] != x {
                return Err("no repetition at pos".into());
            }
            c.remove(i + 1);
        }
        (MoveKind::Return, Direction::Insert) => {
            let y = &m.verts[0];
            if !space.incident(&x, y) {
                return Err("returned-to vertex is not incident".into());
            }
            c.splice(i + 1..i + 1, [y.clone(), x]);
        }
        (MoveKind::Return, Direction::Delete) => {
            if window(c, 2)? != [m.verts[0].clone(), x] {
                return Err("no return at pos".into());
            }
            c.drain(i + 1..=i + 2);
        }
        (MoveKind::Triangle, dir) => {
            let (y, z) = (&m.verts[0], &m.verts[1]);
            if !(space.incident(&x, y) && space.incident(y, z) && space.incident(z, &x)) {
                return Err("triangle vertices are not pairwise incident".into());
            }
            if dir == Direction::Insert {
                c.splice(i + 1..i + 1, [y.clone(), z.clone(), x]);
            } else {
                if window(c, 3)? != [y.clone(), z.clone(), x] {
                    return Err("no triangle at pos".into());
                }
                c.drain(i + 1..=i + 3);
            }
        }
    }
    Ok(())
}

/// Replays a certificate against a space.
pub fn verify_certificate<V, S>(cert: &Certificate<V>, space: &S) -> Verification
where
    V: Clone + PartialEq + Debug,
    S: CycleSpace<V> + ?Sized,
{
    let fail = |at: Option<usize>, n: usize, r: String| Verification {
        ok: false,
        moves_replayed: n,
        failed_move: at,
        reason: Some(r),
    };
    if cert.cycle.first() != Some(&cert.base) {
        return fail(None, 0, "cycle does not start at the base".into());
    }
    if let Err(e) = check_cycle(space, &cert.cycle) {
        return fail(None, 0, e);
    }
    let mut c = cert.cycle.clone();
    for (k, m) in cert.moves.iter().enumerate() {
        if let Err(e) = apply_move(space, &mut c, m) {
            return fail(Some(k), k, e);
        }
    }
    if c != cert.final_cycle() {
        return fail(None, cert.moves.len(), format!("replay ends in a cycle of length {}", c.len()));
    }
    Verification { ok: true, moves_replayed: cert.moves.len(), failed_move: None, reason: None }
}

/// Records moves while transforming a cycle.
pub struct Builder<'a, V, S: ?Sized> {
    space: &'a S,
    initial: Vec<V>,
    pub cycle: Vec<V>,
    pub moves: Vec<Move<V>>,
}

impl<'a, V, S> Builder<'a, V, S>
where
    V: Clone + PartialEq + Debug,
    S: CycleSpace<V> + ?Sized,
{
    pub fn new(space: &'a S, cycle: Vec<V>) -> Result<Self, HomotopyError> {
        check_cycle(space, &cycle).map_err(HomotopyError::NotACycle)?;
        Ok(Builder { space, initial: cycle.clone(), cycle, moves: Vec::new() })
    }

    pub fn apply(&mut self, m: Move<V>) -> Result<(), HomotopyError> {
        apply_move(self.space, &mut self.cycle, &m)
            .map_err(|reason| HomotopyError::IllegalMove { index: self.moves.len(), reason })?;
        self.moves.push(m);
        Ok(())
    }

    fn mv(&mut self, kind: MoveKind, dir: Direction, pos: usize, verts: Vec<V>) -> Result<(), HomotopyError> {
        self.apply(Move { kind, dir, pos, verts })
    }

    /// Deletes repetitions and returns until none are left.
    pub fn simplify(&mut self) -> Result<(), HomotopyError> {
        let mut i = 0;
        while i + 1 < self.cycle.len() {
            if self.cycle[i] == self.cycle[i + 1] {
                let x = self.cycle[i].clone();
                self.mv(MoveKind::Repetition, Direction::Delete, i, vec![x])?;
                i = i.saturating_sub(1);
            } else if i + 2 < self.cycle.len() && self.cycle[i] == self.cycle[i + 2] {
                let y = self.cycle[i + 1].clone();
                self.mv(MoveKind::Return, Direction::Delete, i, vec![y])?;
                i = i.saturating_sub(2);
            } else {
                i += 1;
            }
        }
        Ok(())
    }

    /// Inserts `path, reverse(path)` at `pos` by nested returns; `path[0]`
    /// must be the vertex at `pos`.
    pub fn insert_backtrack(&mut self, pos: usize, path: &[V]) -> Result<(), HomotopyError> {
        debug_assert_eq!(path.first(), self.cycle.get(pos));
        for t in 1..path.len() {
            self.mv(MoveKind::Return, Direction::Insert, pos + t - 1, vec![path[t].clone()])?;
        }
        Ok(())
    }

    /// Replays a null-homotopy of the loop occupying positions
    /// `pos..pos + sub.cycle.len()`.
    pub fn splice(&mut self, pos: usize, sub: &Certificate<V>) -> Result<(), HomotopyError> {
        if self.cycle.get(pos..pos + sub.cycle.len()) != Some(&sub.cycle[..]) || sub.target.is_some() {
            return Err(HomotopyError::NotACycle("sub-certificate does not match the cycle".into()));
        }
        for m in &sub.moves {
            let mut m = m.clone();
            m.pos += pos;
            self.apply(m)?;
        }
        Ok(())
    }

    /// Replaces the segment `cycle[i..=j]` by `path` (same end points), using
    /// a null-homotopy `sub` of the loop `cycle[i..=j] + reverse(path)[1..]`
    /// based at `cycle[i]`.
    pub fn replace_segment(&mut self, i: usize, j: usize, path: &[V], sub: &Certificate<V>) -> Result<(), HomotopyError> {
        if path.first() != self.cycle.get(i) || path.last() != self.cycle.get(j) {
            return Err(HomotopyError::NotACycle("replacement path has the wrong end points".into()));
        }
        let rev: Vec<V> = path.iter().rev().cloned().collect();
        self.insert_backtrack(j, &rev)?;
        self.splice(i, sub)
    }

    /// The loop that [`Builder::replace_segment`] needs certified.
    pub fn segment_loop(&self, i: usize, j: usize, path: &[V]) -> Vec<V> {
        let mut l = self.cycle[i..=j].to_vec();
        l.extend(path.iter().rev().skip(1).cloned());
        l
    }

    /// Contracts the loop at positions `pos..` (it must be a loop based at
    /// `cycle[pos]` running to the end of the cycle) through `apex`.
    pub fn fan(&mut self, apex: &V) -> Result<(), HomotopyError> {
        self.simplify()?;
        if let Some(v) = self.cycle.iter().find(|v| !self.space.incident(v, apex)) {
            return Err(HomotopyError::NotGeometric(format!("{v:?} is not incident with the apex")));
        }
        if self.cycle.len() == 1 {
            return Ok(());
        }
        // x₀ x₁ … → x₀ a x₁ …
        let x1 = self.cycle[1].clone();
        self.mv(MoveKind::Triangle, Direction::Insert, 0, vec![apex.clone(), x1.clone()])?;
        self.mv(MoveKind::Return, Direction::Delete, 2, vec![self.cycle[3].clone()])?;
        // x₀ a x y … → x₀ a y …
        while self.cycle.len() > 3 {
            let (x, y) = (self.cycle[2].clone(), self.cycle[3].clone());
            self.mv(MoveKind::Return, Direction::Insert, 3, vec![apex.clone()])?;
            self.mv(MoveKind::Triangle, Direction::Delete, 1, vec![x, y])?;
        }
        let a = self.cycle[1].clone();
        self.mv(MoveKind::Return, Direction::Delete, 0, vec![a])
    }

    pub fn finish(self) -> Result<Certificate<V>, HomotopyError> {
        let base = self.initial[0].clone();
        let target = (self.cycle != [base.clone()]).then(|| self.cycle.clone());
        let cert = Certificate { base, cycle: self.initial, moves: self.moves, target };
        let v = verify_certificate(&cert, self.space);
        if !v.ok {
            return Err(HomotopyError::IllegalMove {
                index: v.failed_move.unwrap_or(usize::MAX),
                reason: v.reason.unwrap_or_default(),
            });
        }
        Ok(cert)
    }

    /// Like [`Builder::finish`] but insists on the trivial cycle.
    pub fn finish_null(self) -> Result<Certificate<V>, HomotopyError> {
        if self.cycle.len() != 1 {
            return Err(HomotopyError::SearchExhausted(format!(
                "cycle of length {} left after all moves",
                self.cycle.len()
            )));
        }
        self.finish()
    }
}

/// Contracts a cycle all of whose vertices are incident with `apex`.
pub fn fan_certificate<V, S>(space: &S, cycle: Vec<V>, apex: &V) -> Result<Certificate<V>, HomotopyError>
where
    V: Clone + PartialEq + Debug,
    S: CycleSpace<V> + ?Sized,
{
    let mut b = Builder::new(space, cycle)?;
    b.fan(apex)?;
    b.finish_null()
}

/// Checks the hypotheses under which cycles can be pushed onto points and
/// lines: a linear diagram, connected point-line graphs in residues of
/// elements of maximal type, and residues with disconnected diagrams being
/// direct sums.
pub fn check_reduction_hypotheses(g: &Pregeometry) -> Result<(), HomotopyError> {
    let diagram = g.basic_diagram();
    if !diagram.is_linear() {
        return Err(HomotopyError::HypothesisFailed("diagram is not linear".into()));
    }
    if g.rank() < 2 {
        return Err(HomotopyError::HypothesisFailed("rank below two".into()));
    }
    let top = *g.types().last().expect("rank ≥ 2");
    for x in 0..g.len() as u32 {
        let (r, _) = g.residue(&[x])?;
        if r.rank() >= 2 && g.typ(x) == top {
            let pt = r.types()[0];
            let lt = r.types()[1];
            if !r.collinearity_graph_with(pt, lt).is_connected() {
                return Err(HomotopyError::HypothesisFailed(format!("point-line graph of the residue of {x} is disconnected")));
            }
        }
        if r.rank() >= 2 {
            let comps = r.basic_diagram().components();
            if comps.len() > 1 {
                for (a, ca) in comps.iter().enumerate() {
                    for cb in &comps[a + 1..] {
                        for u in (0..r.len() as u32).filter(|&u| ca.contains(&r.typ(u))) {
                            for v in (0..r.len() as u32).filter(|&v| cb.contains(&r.typ(v))) {
                                if !r.incident(u, v) {
                                    return Err(HomotopyError::HypothesisFailed(format!(
                                        "residue of {x} has a disconnected diagram but is not a direct sum"
                                    )));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Pushes the cycle in `b` (based at a point or a line) onto points and
/// lines. Every vertex `xᵢ` gets a spoke to a point `pᵢ`; the stretch between
/// consecutive spokes lies in the residue of the larger of `xᵢ, xᵢ₊₁` and is
/// replaced by a point-line path inside it, contracted by a fan.
pub fn reduce_in_builder<V, S>(b: &mut Builder<'_, V, S>) -> Result<(), HomotopyError>
where
    V: Clone + PartialEq + Debug,
    S: PointLineSpace<V> + ?Sized,
{
    b.simplify()?;
    let space = b.space;
    let (pt, lt) = (space.point_type(), space.line_type());
    let c = b.cycle.clone();
    if c.len() == 1 {
        return Ok(());
    }
    let base_type = space.typ(&c[0]);
    if base_type != pt && base_type != lt {
        return Err(HomotopyError::HypothesisFailed("cycle must be based at a point or a line".into()));
    }
    if c.iter().all(|x| space.typ(x) == pt || space.typ(x) == lt) {
        return Ok(());
    }
    let k = c.len() - 1;
    // bigger[i]: the element of the edge (xᵢ, xᵢ₊₁) whose residue holds the stretch
    let bigger = |i: usize| -> usize {
        if space.typ(&c[i]) >= space.typ(&c[i + 1]) {
            i
        } else {
            i + 1
        }
    };
    let mut p: Vec<V> = Vec::with_capacity(k);
    for i in 0..k {
        let mut flag = vec![&c[i]];
        if i > 0 && bigger(i - 1) == i - 1 {
            flag.push(&c[i - 1]);
        }
        if i == 0 && bigger(k - 1) == k - 1 {
            flag.push(&c[k - 1]);
        }
        if bigger(i) == i + 1 {
            flag.push(&c[i + 1]);
        }
        let pi = space
            .point_of_flag(&flag)
            .ok_or_else(|| HomotopyError::HypothesisFailed(format!("no point on the flag at position {i}")))?;
        p.push(pi);
    }
    // spokes, back to front so that earlier positions stay put
    for i in (0..k).rev() {
        if c[i] != p[i] {
            b.mv(MoveKind::Return, Direction::Insert, i, vec![p[i].clone()])?;
        }
    }
    // tips: positions of the pᵢ
    let mut tips = Vec::with_capacity(k + 1);
    let mut pos = 0;
    for i in 0..k {
        if c[i] != p[i] {
            pos += 1;
        }
        tips.push(pos);
        pos += if c[i] != p[i] { 2 } else { 1 };
    }
    let end = b.cycle.len() - 1;
    for i in (0..k).rev() {
        let y = &c[bigger(i)];
        let from = tips[i];
        let (to, goal) = if i + 1 < k { (tips[i + 1], p[i + 1].clone()) } else { (end, c[0].clone()) };
        let target_point = if i + 1 < k { p[i + 1].clone() } else { p[0].clone() };
        let mut path = space
            .path_in(y, &p[i], &target_point)
            .ok_or_else(|| HomotopyError::HypothesisFailed(format!("points of {y:?} are not connected")))?;
        if i + 1 == k && goal != target_point {
            path.push(goal);
        }
        let lp = b.segment_loop(from, to, &path);
        let sub = fan_certificate(space, lp, y)?;
        b.replace_segment(from, to, &path, &sub)?;
    }
    b.simplify()
}

/// Point-line reduction of a cycle based at a point or a line, after
/// checking the hypotheses on `g`. Returns the reduced cycle and the
/// certificate leading to it.
pub fn reduce_to_point_line(g: &Pregeometry, cycle: Vec<u32>) -> Result<(Vec<u32>, Certificate<u32>), HomotopyError> {
    check_reduction_hypotheses(g)?;
    let mut b = Builder::new(g, cycle)?;
    reduce_in_builder(&mut b)?;
    let reduced = b.cycle.clone();
    Ok((reduced, b.finish()?))
}

/// A null-homotopy of a cycle in an explicit pregeometry, found by breadth
/// first search over contractions through common neighbours; intended for
/// small fixtures.
pub fn contract_by_fans(g: &Pregeometry, cycle: Vec<u32>) -> Result<Certificate<u32>, HomotopyError> {
    let mut b = Builder::new(g, cycle)?;
    b.simplify()?;
    let all: Vec<u32> = b.cycle.clone();
    let common = g.common_neighbors(&all.iter().copied().collect::<BTreeSet<_>>().into_iter().collect::<Vec<_>>());
    let apex = all
        .iter()
        .copied()
        .find(|&a| all.iter().all(|&v| CycleSpace::incident(g, &a, &v)))
        .or(common.first().copied())
        .ok_or_else(|| HomotopyError::NotGeometric("no element is incident with the whole cycle".into()))?;
    b.fan(&apex)?;
    b.finish_null()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    fn tri(g: &Pregeometry) -> Vec<u32> {
        let ch = g.chambers()[0].clone();
        vec![ch[0], ch[1], ch[2], ch[0]]
    }

    #[test]
    fn trivial_and_triangle() {
        let t = fixtures::tetrahedron();
        let c = Certificate { base: 0u32, cycle: vec![0], moves: vec![], target: None };
        assert!(verify_certificate(&c, &t).ok);
        let cyc = tri(&t);
        let m = Move { kind: MoveKind::Triangle, dir: Direction::Delete, pos: 0, verts: vec![cyc[1], cyc[2]] };
        let c = Certificate { base: cyc[0], cycle: cyc.clone(), moves: vec![m], target: None };
        assert!(verify_certificate(&c, &t).ok);
    }

    #[test]
    fn illegal_moves_are_rejected() {
        let t = fixtures::tetrahedron();
        // vertices 0 and 1 are not incident
        let m = Move { kind: MoveKind::Return, dir: Direction::Insert, pos: 0, verts: vec![1u32] };
        let c = Certificate { base: 0, cycle: vec![0], moves: vec![m], target: Some(vec![0, 1, 0]) };
        let v = verify_certificate(&c, &t);
        assert!(!v.ok);
        assert_eq!(v.failed_move, Some(0));
        let bad = Certificate { base: 0u32, cycle: vec![0, 1, 0], moves: vec![], target: None };
        assert!(!verify_certificate(&bad, &t).ok);
    }

    #[test]
    fn fan_in_residue() {
        let t = fixtures::tetrahedron();
        // face 10 = {0,1,2}: pentagon-free but a hexagon in its residue
        let (r, ids) = t.residue(&[10]).unwrap();
        let verts: Vec<u32> = (0..r.len() as u32).map(|x| ids[x as usize]).collect();
        let v: Vec<u32> = verts.iter().copied().filter(|&x| t.typ(x) == 1).collect();
        let e: Vec<u32> = verts.iter().copied().filter(|&x| t.typ(x) == 2).collect();
        let edge = |a: u32, b: u32| *e.iter().find(|&&x| t.incident(x, a) && t.incident(x, b)).unwrap();
        let cyc = vec![v[0], edge(v[0], v[1]), v[1], edge(v[1], v[2]), v[2], edge(v[2], v[0]), v[0]];
        let c = fan_certificate(&t, cyc.clone(), &10).unwrap();
        assert!(verify_certificate(&c, &t).ok);
        assert!(c.moves.len() <= 3 * (cyc.len() - 1));
        assert!(matches!(fan_certificate(&t, cyc, &11), Err(HomotopyError::NotGeometric(_))));
    }

    #[test]
    fn reduction_on_pg32() {
        let g = fixtures::pg32();
        // a cycle through two planes: p – π₁ – ℓ – π₂ – p
        let pts = g.elements_of_type(1);
        let p = pts[0];
        let planes: Vec<u32> = g.neighbors(p).iter().copied().filter(|&x| g.typ(x) == 3).collect();
        let (a, b) = (planes[0], planes[1]);
        let l = *g.common_neighbors(&[a, b]).iter().find(|&&x| g.typ(x) == 2).unwrap();
        let cyc = vec![p, a, l, b, p];
        let (red, cert) = reduce_to_point_line(&g, cyc).unwrap();
        assert!(red.iter().all(|&x| g.typ(x) <= 2));
        assert!(verify_certificate(&cert, &g).ok);
        assert_eq!(cert.final_cycle(), red);
    }

    #[test]
    fn reduction_rejects_nonlinear_diagram() {
        // the rank-2 digon (direct sum of two rank-1 geometries) has no edge
        let mut pairs = Vec::new();
        for a in 0..2u32 {
            for b in 2..4u32 {
                pairs.push((a, b));
            }
        }
        let g = Pregeometry::new(vec![1, 1, 2, 2], vec![String::new(); 4], &pairs).unwrap();
        let direct = g.direct_sum(&Pregeometry::new(vec![3], vec![String::new()], &[]).unwrap()).unwrap();
        assert!(matches!(
            reduce_to_point_line(&direct, vec![0, 2, 0]),
            Err(HomotopyError::HypothesisFailed(_))
        ));
    }

    proptest! {
        #[test]
        fn transport_by_automorphisms(seed in 0u64..200) {
            use rand::Rng as _;
            let t = fixtures::tetrahedron();
            let grp = fixtures::tetrahedron_group();
            let mut rng = crate::rng(seed);
            let ch = t.chambers();
            let f = &ch[rng.gen_range(0..ch.len())];
            let cyc = vec![f[0], f[1], f[2], f[0]];
            let c = fan_certificate(&t, cyc, &f[2]).unwrap();
            let g = grp.random_word(6, &mut rng);
            let moved = c.transport(|&x| g.image(x));
            prop_assert!(verify_certificate(&moved, &t).ok);
        }
    }
}
