//! Parabolic amalgams of small orthogonal geometries, checked against
//! orbit counts computed by breadth-first search.

use std::collections::{BTreeSet, VecDeque};

use orthogeo::amalgam::{amalgam_of_parabolics, Shape};
use orthogeo::cosetgeo::{sketch, so_generators, GeomAction};
use orthogeo::gf::Field;
use orthogeo::group::Perm;
use orthogeo::orthospace::{BilinearForm, Hall, OrthGeometry, TypeSign};
use orthogeo::pregeo::Pregeometry;

/// Size of the orbit of a flag (as a set) under the group generated by `gens`.
fn flag_orbit_size(gens: &[Perm], flag: &[u32]) -> usize {
    let start: BTreeSet<u32> = flag.iter().copied().collect();
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    while let Some(f) = queue.pop_front() {
        for g in gens {
            let img: BTreeSet<u32> = f.iter().map(|&x| g.image(x)).collect();
            if seen.insert(img.clone()) {
                queue.push_back(img);
            }
        }
    }
    seen.len()
}

/// Nonempty subsets of `w` that are pairwise incident.
fn flags_by_brute_force(g: &Pregeometry, w: &[u32]) -> usize {
    (1u32..1 << w.len())
        .filter(|mask| {
            let sub: Vec<u32> = (0..w.len()).filter(|i| mask >> i & 1 == 1).map(|i| w[i]).collect();
            sub.iter().enumerate().all(|(i, &a)| sub[i + 1..].iter().all(|&b| g.incident(a, b)))
        })
        .count()
}

#[test]
fn rank_three_hall_gives_eleven_parabolics() {
    let form = BilinearForm::standard(Field::new(5).unwrap(), 4, TypeSign::Plus).unwrap();
    let geo = OrthGeometry::with_hall(form, &Hall::standard(3, TypeSign::Plus)).unwrap();
    let m = geo.materialize();
    let w: Vec<u32> = geo.hall_elements().unwrap().iter().map(|s| m.id(s).unwrap()).collect();
    assert_eq!(w.len(), 4);

    let act = GeomAction::on_subspaces(so_generators(geo.form()).unwrap(), &m);
    let pa = amalgam_of_parabolics(&m.geometry, &act, &w, &Shape::all(&m.geometry, &w), 1_000_000).unwrap();
    assert_eq!(pa.amalgam.members.len(), 11);
    assert_eq!(pa.amalgam.members.len(), flags_by_brute_force(&m.geometry, &w));

    let order = act.group.order();
    let gens = act.generator_perms(m.geometry.len());
    for (flag, member) in pa.flags.iter().zip(&pa.amalgam.members) {
        let orbit = flag_orbit_size(&gens, flag) as u128;
        assert_eq!(member.order() as u128 * orbit, order, "flag {flag:?}");
    }

    // two of the four hall elements are points, in different orbits
    let points: Vec<u32> = w.iter().copied().filter(|&x| geo.element_label(&m.elements[x as usize]).unwrap().dim == 1).collect();
    assert_eq!(points.len(), 2);
    assert!(pa.member_of(&[points[0]]).is_some() && pa.member_of(&[points[1]]).is_some());
    assert!(!act.orbit_of(points[0]).contains(&points[1]));
}

#[test]
fn rank_four_hall_geometry_has_linear_diagram() {
    let form = BilinearForm::standard(Field::new(5).unwrap(), 5, TypeSign::Plus).unwrap();
    let geo = OrthGeometry::with_hall(form, &Hall::standard(4, TypeSign::Plus)).unwrap();
    let m = geo.materialize();
    let d = m.geometry.basic_diagram();
    // F_5^5 has proper subspaces of dimension 1..=4
    assert_eq!(d.types, vec![1, 2, 3, 4]);
    assert!(d.is_linear(), "edges {:?}", d.edges);
    assert_eq!(d.edges.iter().copied().collect::<Vec<_>>(), vec![(1, 2), (2, 3), (3, 4)]);
}

#[test]
fn sketch_of_rank_three_hall_geometry_has_five_vertex_classes() {
    let form = BilinearForm::standard(Field::new(5).unwrap(), 4, TypeSign::Minus).unwrap();
    let geo = OrthGeometry::with_hall(form, &Hall::rank3_both_planes()).unwrap();
    let m = geo.materialize();
    let w: Vec<u32> = geo.hall_elements().unwrap().iter().map(|s| m.id(s).unwrap()).collect();
    assert_eq!(w.len(), 5);
    let act = GeomAction::on_subspaces(so_generators(geo.form()).unwrap(), &m);
    let sk = sketch(&m.geometry, &act, &w, 1_000_000).unwrap();
    assert_eq!(sk.coset.geometry.len(), m.geometry.len());
    let classes: BTreeSet<usize> = sk.coset.member.iter().copied().collect();
    assert_eq!(classes.len(), 5);
}
