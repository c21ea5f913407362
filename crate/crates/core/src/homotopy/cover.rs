//! Coverings, the fundamental group of the incidence complex and the
//! fundamental cover at toy scale.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{homology_h1, HomotopyError, H1};
use crate::pregeo::Pregeometry;
use crate::todd_coxeter::{enumerate, simplify_presentation, Presentation, Simplified, TcError, Word};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoveringReport {
    pub ok: bool,
    pub witness: Option<String>,
}

impl CoveringReport {
    fn fail(w: String) -> Self {
        CoveringReport { ok: false, witness: Some(w) }
    }
}

/// Checks that `map` (indexed by source ids) preserves types and incidence,
/// is surjective, and restricts to an isomorphism from the residue of every
/// source element onto the residue of its image.
pub fn covering_check(source: &Pregeometry, target: &Pregeometry, map: &[u32]) -> CoveringReport {
    if map.len() != source.len() {
        return CoveringReport::fail(format!("map has {} entries for {} elements", map.len(), source.len()));
    }
    if let Some(x) = map.iter().position(|&y| y as usize >= target.len()) {
        return CoveringReport::fail(format!("image of {x} is not an element"));
    }
    let mut hit = vec![false; target.len()];
    for &y in map {
        hit[y as usize] = true;
    }
    if let Some(y) = hit.iter().position(|h| !h) {
        return CoveringReport::fail(format!("element {y} is not covered"));
    }
    for x in 0..source.len() as u32 {
        let fx = map[x as usize];
        if source.typ(x) != target.typ(fx) {
            return CoveringReport::fail(format!("type of {x} is not preserved"));
        }
        let mut imgs: Vec<u32> = source.neighbors(x).iter().map(|&y| map[y as usize]).collect();
        imgs.sort_unstable();
        let before = imgs.len();
        imgs.dedup();
        if imgs.len() != before {
            return CoveringReport::fail(format!("residue of {x} is not mapped injectively"));
        }
        if imgs != target.neighbors(fx) {
            return CoveringReport::fail(format!("residue of {x} does not map onto the residue of {fx}"));
        }
        let nb = source.neighbors(x);
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if source.incident(a, b) != target.incident(map[a as usize], map[b as usize]) {
                    return CoveringReport::fail(format!("incidence of {a}, {b} in the residue of {x} is not preserved"));
                }
            }
        }
    }
    CoveringReport { ok: true, witness: None }
}

/// A presentation of `π₁` of the incidence complex: one generator per edge
/// outside a breadth-first spanning tree, one relator per pennant.
#[derive(Clone, Debug)]
pub struct Pi1Presentation {
    pub presentation: Presentation,
    /// Word of each oriented edge `(u, v)`, `u < v`; empty on tree edges.
    pub edge_words: HashMap<(u32, u32), Word>,
}

impl Pi1Presentation {
    pub fn edge_word(&self, u: u32, v: u32) -> Word {
        if u < v {
            self.edge_words[&(u, v)].clone()
        } else {
            crate::todd_coxeter::invert(&self.edge_words[&(v, u)])
        }
    }
}

pub fn pi1_presentation(g: &Pregeometry, base: u32) -> Result<Pi1Presentation, HomotopyError> {
    if !g.is_connected() {
        return Err(HomotopyError::HypothesisFailed("geometry is not connected".into()));
    }
    let n = g.len();
    let mut tree_parent: Vec<Option<u32>> = vec![None; n];
    let mut seen = vec![false; n];
    seen[base as usize] = true;
    let mut queue = VecDeque::from([base]);
    while let Some(x) = queue.pop_front() {
        for &y in g.neighbors(x) {
            if !seen[y as usize] {
                seen[y as usize] = true;
                tree_parent[y as usize] = Some(x);
                queue.push_back(y);
            }
        }
    }
    let mut edge_words = HashMap::new();
    let mut names = Vec::new();
    for x in 0..n as u32 {
        for &y in g.neighbors(x) {
            if x < y {
                let tree = tree_parent[y as usize] == Some(x) || tree_parent[x as usize] == Some(y);
                let w = if tree {
                    Vec::new()
                } else {
                    names.push(format!("e{x}_{y}"));
                    vec![names.len() as i32]
                };
                edge_words.insert((x, y), w);
            }
        }
    }
    let mut p = Pi1Presentation { presentation: Presentation::new(names, Vec::new()), edge_words };
    let mut relators = Vec::new();
    for x in 0..n as u32 {
        for &y in g.neighbors(x).iter().filter(|&&y| y > x) {
            for &z in g.neighbors(y).iter().filter(|&&z| z > y) {
                if g.incident(x, z) {
                    let w: Word = [p.edge_word(x, y), p.edge_word(y, z), p.edge_word(z, x)].concat();
                    if !w.is_empty() {
                        relators.push(w);
                    }
                }
            }
        }
    }
    p.presentation.relators = relators;
    Ok(p)
}

#[derive(Clone, Debug)]
pub struct FundamentalCover {
    pub geometry: Pregeometry,
    /// Cover element ↦ element of the base geometry.
    pub map: Vec<u32>,
    pub pi1_order: usize,
}

impl FundamentalCover {
    pub fn is_isomorphism(&self) -> bool {
        self.pi1_order == 1
    }
}

/// The universal cover: elements `(x, γ)` for `γ ∈ π₁`, with `(u, γ)` incident
/// to `(v, γ·w(u,v))`. Needs `π₁` to enumerate within `cap` cosets.
pub fn fundamental_cover(g: &Pregeometry, base: u32, cap: usize) -> Result<FundamentalCover, HomotopyError> {
    let p = pi1_presentation(g, base)?;
    let s: Simplified = simplify_presentation(&p.presentation);
    let table = enumerate(&s.presentation, &[], cap)?;
    let order = table.index();
    let n = g.len();
    if n.saturating_mul(order) > cap {
        return Err(HomotopyError::Tc(TcError::CapExceeded(cap)));
    }
    let id = |x: u32, c: u32| x * order as u32 + c;
    let mut pairs = Vec::new();
    for u in 0..n as u32 {
        for &v in g.neighbors(u).iter().filter(|&&v| v > u) {
            let w = s.rewrite(&p.edge_word(u, v));
            for c in 0..order as u32 {
                pairs.push((id(u, c), id(v, table.act_word(c, &w))));
            }
        }
    }
    let typ = (0..n as u32).flat_map(|u| std::iter::repeat(g.typ(u)).take(order)).collect();
    let labels = (0..n as u32).flat_map(|u| (0..order).map(move |c| format!("{u}.{c}"))).collect();
    let geometry = Pregeometry::new(typ, labels, &pairs)?;
    let map = (0..n as u32).flat_map(|u| std::iter::repeat(u).take(order)).collect();
    Ok(FundamentalCover { geometry, map, pi1_order: order })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Verified,
    NotSimplyConnected,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimpleConnectivity {
    pub verdict: Verdict,
    pub method: String,
    pub h1: Option<H1>,
    pub pi1_order: Option<usize>,
}

/// Decides simple connectivity of a small geometry: the direct-sum criterion
/// first, then `H₁`, then the order of `π₁` by coset enumeration.
pub fn simple_connectivity(g: &Pregeometry, cap: usize) -> SimpleConnectivity {
    let mk = |verdict, method: &str, h1, pi1_order| SimpleConnectivity { verdict, method: method.into(), h1, pi1_order };
    if g.is_empty() || !g.is_connected() {
        return mk(Verdict::NotSimplyConnected, "disconnected", None, None);
    }
    if g.rank() >= 2 {
        let comps = g.basic_diagram().components();
        if comps.len() > 1 {
            let (g1, _) = g.truncate(&comps[0]);
            let direct_sum = (0..g.len() as u32).all(|u| {
                (0..g.len() as u32).all(|v| comps[0].contains(&g.typ(u)) == comps[0].contains(&g.typ(v)) || g.incident(u, v))
            });
            if direct_sum && ((g1.rank() >= 2 && g1.is_connected()) || comps.iter().any(|c| c.len() >= 2 && g.truncate(c).0.is_connected())) {
                return mk(Verdict::Verified, "direct sum with a connected summand of rank at least two", None, None);
            }
        }
    }
    let h1 = homology_h1(g).ok();
    if h1.as_ref().is_some_and(|h| !h.is_trivial()) {
        return mk(Verdict::NotSimplyConnected, "nontrivial H1", h1, None);
    }
    match fundamental_cover(g, 0, cap) {
        Ok(c) if c.pi1_order == 1 => mk(Verdict::Verified, "trivial fundamental group", h1, Some(1)),
        Ok(c) => mk(Verdict::NotSimplyConnected, "nontrivial fundamental group", h1, Some(c.pi1_order)),
        Err(_) => mk(Verdict::Unknown, "fundamental group not enumerated within the cap", h1, None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn identity_and_double_cover() {
        let h = fixtures::hexagon();
        let id: Vec<u32> = (0..h.len() as u32).collect();
        assert!(covering_check(&h, &h, &id).ok);
        let d = fixtures::polygon(6);
        let map: Vec<u32> = (0..12u32).map(|x| if x < 6 { x % 3 } else { 3 + (x - 6) % 3 }).collect();
        assert!(covering_check(&d, &h, &map).ok, "{:?}", covering_check(&d, &h, &map));
    }

    #[test]
    fn collapsing_quotient_is_not_a_covering() {
        let h = fixtures::polygon(4);
        let t = fixtures::polygon(2);
        // folds the octagon: two lines through p1 land on the same line
        let map = vec![0, 1, 0, 1, 2, 2, 3, 3];
        let r = covering_check(&h, &t, &map);
        assert!(!r.ok);
        assert!(r.witness.is_some());
    }

    #[test]
    fn fundamental_covers() {
        let t = fixtures::tetrahedron();
        let c = fundamental_cover(&t, 0, 100_000).unwrap();
        assert!(c.is_isomorphism(), "{}", c.pi1_order);
        assert_eq!(c.geometry.len(), 14);
        assert!(covering_check(&c.geometry, &t, &c.map).ok);
        assert!(matches!(fundamental_cover(&fixtures::hexagon(), 0, 10_000), Err(HomotopyError::Tc(TcError::CapExceeded(_)))));
        let (ho, _) = fixtures::hemi_octahedron();
        let c = fundamental_cover(&ho, 0, 100_000).unwrap();
        assert_eq!(c.pi1_order, 2);
        assert!(covering_check(&c.geometry, &ho, &c.map).ok);
        assert!(c.geometry.is_connected());
        let p = fundamental_cover(&fixtures::pg32(), 0, 1_000_000).unwrap();
        assert!(p.is_isomorphism());
    }

    #[test]
    fn simple_connectivity_verdicts() {
        assert_eq!(simple_connectivity(&fixtures::tetrahedron(), 100_000).verdict, Verdict::Verified);
        assert_eq!(simple_connectivity(&fixtures::hexagon(), 10_000).verdict, Verdict::NotSimplyConnected);
        let (ho, _) = fixtures::hemi_octahedron();
        assert_eq!(simple_connectivity(&ho, 10_000).verdict, Verdict::NotSimplyConnected);
    }
}
