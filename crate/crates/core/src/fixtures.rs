//! Small named geometries with known structure, used in tests, the CLI and the
//! acceptance suite. Types are numbered from 1.

use std::collections::HashMap;

use crate::group::{GroupSpec, Perm};
use crate::pregeo::Pregeometry;

/// Pregeometry on subsets of a ground set, typed by size, with containment
/// as incidence.
fn subset_geometry(sets: &[Vec<u32>], name: impl Fn(&[u32]) -> String) -> Pregeometry {
    let typ: Vec<u32> = sets.iter().map(|s| s.len() as u32).collect();
    let labels = sets.iter().map(|s| name(s)).collect();
    let mut pairs = Vec::new();
    for (i, a) in sets.iter().enumerate() {
        for (j, b) in sets.iter().enumerate() {
            if a.len() < b.len() && a.iter().all(|x| b.contains(x)) {
                pairs.push((i as u32, j as u32));
            }
        }
    }
    Pregeometry::new(typ, labels, &pairs).expect("containment of distinct-size sets")
}

fn k_subsets(n: u32, k: usize) -> Vec<Vec<u32>> {
    fn rec(start: u32, n: u32, k: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for x in start..n {
            cur.push(x);
            rec(x + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Vertices, edges and faces of the tetrahedron (types 1, 2, 3): the nonempty
/// proper subsets of `{0,1,2,3}`. Ids: vertices 0–3, edges 4–9, faces 10–13.
pub fn tetrahedron() -> Pregeometry {
    let sets: Vec<Vec<u32>> = (1..=3).flat_map(|k| k_subsets(4, k)).collect();
    subset_geometry(&sets, |s| {
        let tag = ["v", "e", "f"][s.len() - 1];
        format!("{tag}{}", s.iter().map(u32::to_string).collect::<String>())
    })
}

/// `S₄` acting on the tetrahedron, as permutations of its 14 element ids.
pub fn tetrahedron_group() -> GroupSpec<Perm> {
    let sets: Vec<Vec<u32>> = (1..=3).flat_map(|k| k_subsets(4, k)).collect();
    let index: HashMap<Vec<u32>, u32> = sets.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect();
    let induced = |p: &[u32]| -> Perm {
        let images = sets
            .iter()
            .map(|s| {
                let mut t: Vec<u32> = s.iter().map(|&x| p[x as usize]).collect();
                t.sort();
                index[&t]
            })
            .collect();
        Perm::from_images(images).expect("bijection")
    };
    GroupSpec::new(Perm::identity(sets.len()), vec![induced(&[1, 0, 2, 3]), induced(&[1, 2, 3, 0])])
}

/// Nonzero vectors of `F_2^d` as bitmasks, and `k`-subspaces as sorted lists
/// of their nonzero vectors.
fn binary_subspaces(d: u32, k: u32) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = Vec::new();
    let n = 1u32 << d;
    // span every k-tuple; deduplicate
    fn span(gens: &[u32]) -> Vec<u32> {
        let mut s = vec![0u32];
        for &g in gens {
            let add: Vec<u32> = s.iter().map(|x| x ^ g).collect();
            for a in add {
                if !s.contains(&a) {
                    s.push(a);
                }
            }
        }
        s.retain(|&x| x != 0);
        s.sort();
        s
    }
    fn rec(start: u32, n: u32, k: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() as u32 == k {
            let s = span(cur);
            if s.len() as u32 == (1 << k) - 1 && !out.contains(&s) {
                out.push(s);
            }
            return;
        }
        for x in start..n {
            cur.push(x);
            rec(x + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(1, n, k, &mut Vec::new(), &mut out);
    out.sort();
    out
}

fn binary_projective(d: u32) -> Pregeometry {
    let sets: Vec<Vec<u32>> = (1..d).flat_map(|k| binary_subspaces(d, k)).collect();
    // sizes 1, 3, 7 ↦ types 1, 2, 3
    let typ_of = |len: usize| (len + 1).trailing_zeros();
    let typ: Vec<u32> = sets.iter().map(|s| typ_of(s.len())).collect();
    let labels = sets.iter().map(|s| format!("{}{:?}", typ_of(s.len()), s)).collect();
    let mut pairs = Vec::new();
    for (i, a) in sets.iter().enumerate() {
        for (j, b) in sets.iter().enumerate() {
            if a.len() < b.len() && a.iter().all(|x| b.contains(x)) {
                pairs.push((i as u32, j as u32));
            }
        }
    }
    Pregeometry::new(typ, labels, &pairs).expect("subspace containment")
}

/// The Fano plane PG(2,2): 7 points (type 1), 7 lines (type 2).
pub fn pg22() -> Pregeometry {
    binary_projective(3)
}

/// PG(3,2): 15 points, 35 lines, 15 planes.
pub fn pg32() -> Pregeometry {
    binary_projective(4)
}

/// Rank-2 geometry whose incidence graph is a `2k`-cycle: `k` points and `k`
/// lines, line `i` through points `i` and `i+1`.
pub fn polygon(k: u32) -> Pregeometry {
    let typ: Vec<u32> = (0..2 * k).map(|i| if i < k { 1 } else { 2 }).collect();
    let labels = (0..2 * k).map(|i| if i < k { format!("p{i}") } else { format!("l{}", i - k) }).collect();
    let pairs: Vec<(u32, u32)> = (0..k).flat_map(|i| [(i, k + i), ((i + 1) % k, k + i)]).collect();
    Pregeometry::new(typ, labels, &pairs).expect("polygon")
}

/// The rank-2 geometry whose incidence graph is a hexagon.
pub fn hexagon() -> Pregeometry {
    polygon(3)
}

/// Signed unit vectors `±e_i` encoded as `2i + (sign bit)`.
type SignedVertex = u32;

fn neg(v: SignedVertex) -> SignedVertex {
    v ^ 1
}

/// The octahedron's faces: choose one signed vertex per axis.
fn octa_sets() -> Vec<Vec<SignedVertex>> {
    let mut sets = Vec::new();
    for v in 0..6u32 {
        sets.push(vec![v]);
    }
    for a in 0..6u32 {
        for b in a + 1..6 {
            if a / 2 != b / 2 {
                sets.push(vec![a, b]);
            }
        }
    }
    for s0 in 0..2 {
        for s1 in 0..2 {
            for s2 in 0..2 {
                sets.push(vec![s0, 2 + s1, 4 + s2]);
            }
        }
    }
    sets
}

fn normalise(s: &[SignedVertex], antipodal: bool) -> Vec<SignedVertex> {
    let mut a: Vec<u32> = s.to_vec();
    a.sort();
    if antipodal {
        let mut b: Vec<u32> = s.iter().map(|&x| neg(x)).collect();
        b.sort();
        if b < a {
            return b;
        }
    }
    a
}

/// Signed permutations of the three axes acting on signed vertices.
fn b3_generators() -> Vec<Vec<u32>> {
    let signed = |perm: [u32; 3], flip: [bool; 3]| -> Vec<u32> {
        (0..6u32).map(|v| 2 * perm[(v / 2) as usize] + ((v & 1) ^ flip[(v / 2) as usize] as u32)).collect()
    };
    vec![
        signed([1, 0, 2], [false; 3]),
        signed([1, 2, 0], [false; 3]),
        signed([0, 1, 2], [true, false, false]),
    ]
}

fn octa_like(antipodal: bool) -> (Pregeometry, GroupSpec<Perm>) {
    let mut sets: Vec<Vec<u32>> = octa_sets().iter().map(|s| normalise(s, antipodal)).collect();
    sets.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    sets.dedup();
    let index: HashMap<Vec<u32>, u32> = sets.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect();
    let typ: Vec<u32> = sets.iter().map(|s| s.len() as u32).collect();
    let name = |v: u32| format!("{}{}", if v & 1 == 1 { "-" } else { "+" }, v / 2);
    let labels = sets.iter().map(|s| s.iter().map(|&v| name(v)).collect::<Vec<_>>().join("")).collect();
    // a ⊆ b up to the antipodal identification
    let mut pairs = Vec::new();
    for (i, a) in sets.iter().enumerate() {
        for (j, b) in sets.iter().enumerate() {
            if a.len() >= b.len() {
                continue;
            }
            let inside = |a: &[u32]| a.iter().all(|x| b.contains(x));
            let flipped: Vec<u32> = a.iter().map(|&x| neg(x)).collect();
            if inside(a) || (antipodal && inside(&flipped)) {
                pairs.push((i as u32, j as u32));
            }
        }
    }
    let g = Pregeometry::new(typ, labels, &pairs).expect("octahedron incidence");
    let gens = b3_generators()
        .into_iter()
        .map(|p| {
            let images = sets
                .iter()
                .map(|s| {
                    let t: Vec<u32> = s.iter().map(|&v| p[v as usize]).collect();
                    index[&normalise(&t, antipodal)]
                })
                .collect();
            Perm::from_images(images).expect("bijection")
        })
        .collect();
    (g, GroupSpec::new(Perm::identity(sets.len()), gens))
}

/// The octahedron (6 vertices, 12 edges, 8 faces) with the hyperoctahedral
/// group of order 48.
pub fn octahedron() -> (Pregeometry, GroupSpec<Perm>) {
    octa_like(false)
}

/// The octahedron modulo the antipodal map (3 vertices, 6 edges, 4 faces),
/// with the induced action of order 24. It is a 2-fold quotient of
/// [`octahedron`].
pub fn hemi_octahedron() -> (Pregeometry, GroupSpec<Perm>) {
    octa_like(true)
}
