//! Null-homotopy certificates in the orthogonal geometries `(𝒢_A^orth)^W`.
//!
//! Vertices are subspaces. A based cycle is first moved onto a point, pushed
//! onto points and elliptic lines, and the resulting polygon of the
//! collinearity graph is cut into triangles, quadrangles and pentagons, each
//! decomposed further until every piece lies in a single element and is
//! contracted by a fan. Every certificate is replayed before it is returned.

use std::collections::{BTreeSet, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    fan_certificate, reduce_in_builder, Builder, Certificate, CycleSpace, Direction, HomotopyError, Move, MoveKind,
    PointLineSpace,
};
use crate::gf::{Field, Matrix};
use crate::orthospace::{OrthGeometry, Subspace, TypeSign};

/// Recursion bound for triangle decompositions.
const MAX_TRIANGLE_DEPTH: usize = 6;

impl CycleSpace<Subspace> for OrthGeometry {
    fn is_element(&self, v: &Subspace) -> bool {
        v.ambient() == self.ambient() && OrthGeometry::is_element(self, v)
    }

    fn incident(&self, a: &Subspace, b: &Subspace) -> bool {
        a == b || OrthGeometry::incident(self, a, b)
    }

    fn typ(&self, v: &Subspace) -> u32 {
        v.dim() as u32
    }
}

impl PointLineSpace<Subspace> for OrthGeometry {
    fn point_type(&self) -> u32 {
        1
    }

    fn line_type(&self) -> u32 {
        2
    }

    fn point_of_flag(&self, flag: &[&Subspace]) -> Option<Subspace> {
        let f = self.field();
        let smallest = flag.iter().min_by_key(|s| s.dim())?;
        let inside = |p: &Subspace| flag.iter().all(|s| s.contains(p, f));
        if smallest.dim() == 1 {
            return inside(smallest).then(|| (*smallest).clone());
        }
        smallest.points(f).into_iter().find(|p| OrthGeometry::is_element(self, p) && inside(p))
    }

    fn path_in(&self, y: &Subspace, p: &Subspace, q: &Subspace) -> Option<Vec<Subspace>> {
        let f = self.field();
        if !(y.contains(p, f) && y.contains(q, f)) {
            return None;
        }
        if p == q {
            return Some(vec![p.clone()]);
        }
        let join = |a: &Subspace, b: &Subspace| a.join(b, f).expect("same ambient");
        if self.collinear(p, q) {
            return Some(vec![p.clone(), join(p, q), q.clone()]);
        }
        let pts: Vec<Subspace> = y.points(f).into_iter().filter(|z| OrthGeometry::is_element(self, z)).collect();
        if let Some(z) = pts.iter().find(|z| self.collinear(p, z) && self.collinear(z, q)) {
            return Some(vec![p.clone(), join(p, z), z.clone(), join(z, q), q.clone()]);
        }
        // breadth-first search in the collinearity graph of the residue
        let mut prev: HashMap<Subspace, Subspace> = HashMap::new();
        let mut queue = VecDeque::from([p.clone()]);
        let mut seen = BTreeSet::from([p.clone()]);
        while let Some(a) = queue.pop_front() {
            if &a == q {
                let mut pp = vec![a.clone()];
                let mut cur = a;
                while let Some(b) = prev.get(&cur) {
                    pp.push(b.clone());
                    cur = b.clone();
                }
                pp.reverse();
                return Some(point_path(f, &pp));
            }
            for z in &pts {
                if !seen.contains(z) && self.collinear(&a, z) {
                    seen.insert(z.clone());
                    prev.insert(z.clone(), a.clone());
                    queue.push_back(z.clone());
                }
            }
        }
        None
    }
}

fn join(f: Field, a: &Subspace, b: &Subspace) -> Subspace {
    a.join(b, f).expect("same ambient")
}

/// `p₀, p₀p₁, p₁, …, p_k`.
fn point_path(f: Field, pts: &[Subspace]) -> Vec<Subspace> {
    let mut out = Vec::with_capacity(2 * pts.len());
    for (i, p) in pts.iter().enumerate() {
        if i > 0 {
            out.push(join(f, &pts[i - 1], p));
        }
        out.push(p.clone());
    }
    out
}

/// The closed point-line cycle through `pts` and back to `pts[0]`.
pub fn polygon_cycle(f: Field, pts: &[Subspace]) -> Vec<Subspace> {
    let mut closed = pts.to_vec();
    closed.push(pts[0].clone());
    point_path(f, &closed)
}

/// Points of a point-line cycle starting at a point, without the closing
/// repeat.
fn polygon_points(c: &[Subspace]) -> Vec<Subspace> {
    c.iter().step_by(2).take((c.len() - 1) / 2).cloned().collect()
}

/// Unit vectors completing the echelon basis of `s` to a basis of the
/// ambient space.
fn complement(s: &Subspace, f: Field) -> Subspace {
    let pivots: BTreeSet<usize> = (0..s.dim())
        .map(|i| s.row(i).iter().position(|&x| x != 0).expect("echelon rows are nonzero"))
        .collect();
    let vectors: Vec<Vec<u32>> = (0..s.ambient())
        .filter(|j| !pivots.contains(j))
        .map(|j| (0..s.ambient()).map(|k| u32::from(k == j)).collect())
        .collect();
    Subspace::span(f, s.ambient(), &vectors).expect("dimensions agree")
}

/// Which branch of the decomposition handled each piece.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertStats {
    /// Triangles lying in a single element.
    pub triangle_geometric: usize,
    /// Apex in the polar of a four-space through the span.
    pub triangle_perp_apex: usize,
    /// Apex in the polar of a side.
    pub triangle_tangent_apex: usize,
    /// Degenerate plane in dimension four, certified by transport.
    pub triangle_dim4: usize,
    /// Apex found only by the exhaustive scan over all points.
    pub triangle_scan_apex: usize,
    pub quadrangle_meeting: usize,
    pub quadrangle_radical2: usize,
    pub quadrangle_radical1: usize,
    pub quadrangle_negative: usize,
    pub quadrangle_positive: usize,
    pub quadrangle_fan: usize,
    pub pentagons: usize,
    pub chords: usize,
    pub reductions: usize,
}

/// Builds certificates for cycles of one orthogonal geometry.
pub struct OrthCertifier<'g> {
    g: &'g OrthGeometry,
    f: Field,
    pub stats: CertStats,
}

type Cert = Certificate<Subspace>;

impl<'g> OrthCertifier<'g> {
    pub fn new(g: &'g OrthGeometry) -> Self {
        OrthCertifier { g, f: g.field(), stats: CertStats::default() }
    }

    pub fn geometry(&self) -> &OrthGeometry {
        self.g
    }

    fn line(&self, a: &Subspace, b: &Subspace) -> Subspace {
        join(self.f, a, b)
    }

    fn span(&self, vs: &[&Subspace]) -> Subspace {
        vs[1..].iter().fold(vs[0].clone(), |s, v| join(self.f, &s, v))
    }

    fn collinear(&self, a: &Subspace, b: &Subspace) -> bool {
        self.g.collinear(a, b)
    }

    /// An element containing `s`, smallest dimension first.
    pub fn container(&self, s: &Subspace) -> Option<Subspace> {
        if OrthGeometry::is_element(self.g, s) {
            return Some(s.clone());
        }
        let amb = self.g.ambient();
        if s.dim() + 1 >= amb {
            return None;
        }
        let w = complement(s, self.f);
        for k in 1..amb - s.dim() {
            let subs = if k == 1 { w.points(self.f) } else { w.subspaces(k, self.f) };
            for u in subs {
                let x = join(self.f, s, &u);
                if OrthGeometry::is_element(self.g, &x) {
                    return Some(x);
                }
            }
        }
        None
    }

    fn tri_loop(&self, a: &Subspace, b: &Subspace, c: &Subspace) -> Vec<Subspace> {
        polygon_cycle(self.f, &[a.clone(), b.clone(), c.clone()])
    }

    fn check_points(&self, pts: &[&Subspace]) -> Result<(), HomotopyError> {
        for (i, p) in pts.iter().enumerate() {
            if p.dim() != 1 || !OrthGeometry::is_element(self.g, p) {
                return Err(HomotopyError::NotGeometric(format!("{p:?} is not a point of the geometry")));
            }
            let q = pts[(i + 1) % pts.len()];
            if p != &q && !self.collinear(p, q) {
                return Err(HomotopyError::NotGeometric(format!("{p:?} and {q:?} are not collinear")));
            }
        }
        Ok(())
    }

    // ---------------------------------------------------------------- triangles

    /// Certificate for the point-line triangle `a, ab, b, bc, c, ca, a`.
    pub fn certify_triangle(&mut self, a: &Subspace, b: &Subspace, c: &Subspace) -> Result<Cert, HomotopyError> {
        self.check_points(&[a, b, c])?;
        if a == b || b == c || c == a {
            let mut bld = Builder::new(self.g, self.degenerate_loop(&[a, b, c]))?;
            bld.simplify()?;
            return bld.finish_null();
        }
        self.triangle(a, b, c, 0)
    }

    fn degenerate_loop(&self, pts: &[&Subspace]) -> Vec<Subspace> {
        let mut out = vec![pts[0].clone()];
        for i in 0..pts.len() {
            let (p, q) = (pts[i], pts[(i + 1) % pts.len()]);
            if p != q {
                out.push(self.line(p, q));
            } else {
                out.push(p.clone());
            }
            out.push(q.clone());
        }
        out
    }

    fn triangle(&mut self, a: &Subspace, b: &Subspace, c: &Subspace, depth: usize) -> Result<Cert, HomotopyError> {
        if depth > MAX_TRIANGLE_DEPTH {
            return Err(HomotopyError::SearchExhausted(format!("triangle decomposition deeper than {MAX_TRIANGLE_DEPTH}")));
        }
        let lp = self.tri_loop(a, b, c);
        let s = self.span(&[a, b, c]);
        if let Some(x) = self.container(&s) {
            self.stats.triangle_geometric += 1;
            return fan_certificate(self.g, lp, &x);
        }
        let rad = self.g.form().radical(&s);
        if s.dim() != 3 || rad.dim() != 1 {
            // a nondegenerate span without a containing element: only an apex helps
            return self.scan_apex(a, b, c, depth);
        }
        if self.g.ambient() == 4 {
            return match self.triangle_dim4(a, b, c, &rad) {
                Err(HomotopyError::SearchExhausted(_) | HomotopyError::TransporterNotFound(_)) => self.scan_apex(a, b, c, depth),
                r => r,
            };
        }
        // cheap candidates first: polars of four-spaces through the span,
        // then polars of the sides
        let form = self.g.form();
        let cands = self.perp_apex_candidates(&s);
        if let Some(p) = cands.into_iter().find(|p| self.is_apex(a, b, c, p)) {
            self.stats.triangle_perp_apex += 1;
            return self.cone(a, b, c, &p, depth);
        }
        for (u, v) in [(a, b), (b, c), (c, a)] {
            let cands = form.perp(&self.line(u, v)).points(self.f);
            if let Some(p) = cands.into_iter().find(|p| self.is_apex(a, b, c, p)) {
                self.stats.triangle_tangent_apex += 1;
                return self.cone(a, b, c, &p, depth);
            }
        }
        self.scan_apex(a, b, c, depth)
    }

    fn perp_apex_candidates(&self, s: &Subspace) -> Vec<Subspace> {
        let form = self.g.form();
        let mut out = Vec::new();
        for u in complement(s, self.f).points(self.f) {
            let x = join(self.f, s, &u);
            if x.dim() + 1 > self.g.ambient() || !form.is_nondegenerate(&x) {
                continue;
            }
            out.extend(form.perp(&x).points(self.f));
        }
        out
    }

    /// `p` is a point collinear with `a, b, c` such that each of the three
    /// triangles through `p` lies in an element.
    fn is_apex(&self, a: &Subspace, b: &Subspace, c: &Subspace, p: &Subspace) -> bool {
        if p == a || p == b || p == c || !OrthGeometry::is_element(self.g, p) {
            return false;
        }
        if ![a, b, c].iter().all(|v| self.collinear(v, p)) {
            return false;
        }
        [(a, b), (b, c), (c, a)].iter().all(|(u, v)| self.container(&self.span(&[u, v, p])).is_some())
    }

    fn scan_apex(&mut self, a: &Subspace, b: &Subspace, c: &Subspace, depth: usize) -> Result<Cert, HomotopyError> {
        let p = self.g.points().iter().find(|p| self.is_apex(a, b, c, p)).cloned();
        match p {
            Some(p) => {
                self.stats.triangle_scan_apex += 1;
                self.cone(a, b, c, &p, depth)
            }
            None => Err(HomotopyError::SearchExhausted(format!("no apex for the triangle {a:?}, {b:?}, {c:?}"))),
        }
    }

    /// Replaces each side `uv` of the triangle by `u p v`, certifying each
    /// triangle `u, v, p`.
    fn cone(&mut self, a: &Subspace, b: &Subspace, c: &Subspace, p: &Subspace, depth: usize) -> Result<Cert, HomotopyError> {
        let mut bld = Builder::new(self.g, self.tri_loop(a, b, c))?;
        for (u, v) in [(a, b), (b, c), (c, a)] {
            let sub = self.triangle(u, v, p, depth + 1)?;
            replace_edge(&mut bld, self.f, u, v, p, &sub)?;
        }
        bld.simplify()?;
        bld.finish_null()
    }

    /// Triangles in a degenerate plane of a four-dimensional space: certify
    /// a moved triangle `a, b, c′` through an apex `d`, then carry the
    /// certificate to `a, b, c` by an isometry of determinant one fixing `a`
    /// and `b`.
    pub fn certify_triangle_dim4(&mut self, a: &Subspace, b: &Subspace, c: &Subspace) -> Result<Cert, HomotopyError> {
        self.check_points(&[a, b, c])?;
        let s = self.span(&[a, b, c]);
        let rad = self.g.form().radical(&s);
        if s.dim() != 3 || rad.dim() != 1 {
            return self.certify_triangle(a, b, c);
        }
        self.triangle_dim4(a, b, c, &rad)
    }

    fn triangle_dim4(&mut self, a: &Subspace, b: &Subspace, c: &Subspace, p: &Subspace) -> Result<Cert, HomotopyError> {
        let (f, form) = (self.f, self.g.form());
        let singular = |s: &Subspace| -> Vec<Subspace> {
            s.points(f).into_iter().filter(|x| form.norm(x.vector()) == 0).collect()
        };
        // the second degenerate plane through a line xc
        let other_plane = |x: &Subspace| -> Option<Subspace> {
            let l = join(f, x, c);
            singular(&form.perp(&l)).into_iter().find(|s| s != p).map(|s| join(f, &l, &s))
        };
        let (Some(pi_ac), Some(pi_bc)) = (other_plane(a), other_plane(b)) else {
            return Err(HomotopyError::SearchExhausted("no second degenerate plane through a side".into()));
        };
        let l = pi_ac.intersect(&pi_bc, f).map_err(|e| HomotopyError::SearchExhausted(e.to_string()))?;
        if l.dim() != 2 {
            return Err(HomotopyError::SearchExhausted("the two degenerate planes do not meet in a line".into()));
        }
        let geometric = |u: &Subspace, v: &Subspace, w: &Subspace| self.container(&self.span(&[u, v, w])).is_some();
        let d = l.points(f).into_iter().find(|d| {
            d != c
                && OrthGeometry::is_element(self.g, d)
                && self.collinear(a, d)
                && self.collinear(b, d)
                && geometric(a, b, d)
        });
        let Some(d) = d else {
            return Err(HomotopyError::SearchExhausted("no auxiliary point on the common line".into()));
        };
        // c′ = c + t·p
        let cv = c.vector();
        let pv = p.vector();
        let cprime = (1..f.order()).map(|t| {
            let v: Vec<u32> = cv.iter().zip(pv).map(|(&x, &y)| f.add(x, f.mul(t, y))).collect();
            (t, Subspace::point(f, &v).expect("nonzero"), v)
        });
        let mut choice = None;
        for (t, c2, v) in cprime {
            let ok = !join(f, a, b).contains(&c2, f)
                && OrthGeometry::is_element(self.g, &c2)
                && self.collinear(a, &c2)
                && self.collinear(b, &c2)
                && self.collinear(&d, &c2)
                && geometric(a, &d, &c2)
                && geometric(b, &d, &c2);
            if ok {
                choice = Some((t, c2, v));
                break;
            }
        }
        let Some((t, c2, c2v)) = choice else {
            return Err(HomotopyError::SearchExhausted("no moved third vertex on the line through the radical".into()));
        };
        let g = self.transporter(a, b, p, cv, &c2v, t)?;
        let moved = self.cone(a, b, &c2, &d, 0)?;
        let cert = moved.transport(|s| s.transform(&g, f));
        if cert.cycle != self.tri_loop(a, b, c) {
            return Err(HomotopyError::TransporterNotFound("transported cycle differs from the triangle".into()));
        }
        let v = super::verify_certificate(&cert, self.g);
        if !v.ok {
            return Err(HomotopyError::TransporterNotFound(v.reason.unwrap_or_default()));
        }
        self.stats.triangle_dim4 += 1;
        Ok(cert)
    }

    /// The isometry that is the identity on `⟨a, b⟩` and scales the singular
    /// basis `p, p*` of `⟨a, b⟩^⊥` by `λ, λ⁻¹`, with `λ` chosen so that
    /// `c′ = c + t p` goes to `c`.
    fn transporter(&self, a: &Subspace, b: &Subspace, p: &Subspace, c: &[u32], c2: &[u32], t: u32) -> Result<Matrix, HomotopyError> {
        let (f, form) = (self.f, self.g.form());
        let nf = |m: &str| HomotopyError::TransporterNotFound(m.into());
        let m = form.perp(&join(f, a, b));
        let pstar = m
            .points(f)
            .into_iter()
            .find(|x| x != p && form.norm(x.vector()) == 0)
            .ok_or_else(|| nf("the complement of the fixed line is not hyperbolic"))?;
        let pv = p.vector().to_vec();
        let k = form.eval(&pv, pstar.vector());
        if k == 0 {
            return Err(nf("singular basis is not a hyperbolic pair"));
        }
        let kinv = f.inv(k);
        let psv: Vec<u32> = pstar.vector().iter().map(|&x| f.mul(x, kinv)).collect();
        let basis = [a.vector().to_vec(), b.vector().to_vec(), pv.clone(), psv.clone()];
        let bm = Matrix::from_fn(4, 4, |i, j| basis[j][i]);
        let binv = bm.inverse(f).map_err(|_| nf("basis is singular"))?;
        let coords = binv.apply_col(c, f);
        let u = coords[2];
        let denom = f.add(u, t);
        if u == 0 || denom == 0 {
            return Err(nf("third vertex lies on the fixed line"));
        }
        let lambda = f.mul(u, f.inv(denom));
        let img = [
            basis[0].clone(),
            basis[1].clone(),
            pv.iter().map(|&x| f.mul(x, lambda)).collect::<Vec<_>>(),
            psv.iter().map(|&x| f.mul(x, f.inv(lambda))).collect::<Vec<_>>(),
        ];
        let im = Matrix::from_fn(4, 4, |i, j| img[j][i]);
        let g = im.mul(&binv, f).map_err(|_| nf("dimension mismatch"))?;
        if !form.is_isometry(&g) || g.det(f).ok() != Some(1) {
            return Err(nf("constructed map is not a special isometry"));
        }
        if g.apply_col(c2, f) != c {
            return Err(nf("constructed map does not carry the moved vertex back"));
        }
        Ok(g)
    }

    // -------------------------------------------------------------- quadrangles

    /// Certificate for the point-line quadrangle through `a, b, c, d`.
    pub fn certify_quadrangle(&mut self, pts: [&Subspace; 4]) -> Result<Cert, HomotopyError> {
        self.check_points(&pts)?;
        let owned: Vec<Subspace> = pts.iter().map(|p| (*p).clone()).collect();
        if owned.windows(2).any(|w| w[0] == w[1]) || owned[3] == owned[0] {
            return self.certify_polygon(self.degenerate_loop(&pts));
        }
        self.certify_polygon(polygon_cycle(self.f, &owned))
    }

    fn quadrangle(&mut self, cyc: Vec<Subspace>) -> Result<Cert, HomotopyError> {
        let f = self.f;
        let pts = polygon_points(&cyc);
        let (a, b, c, d) = (&pts[0], &pts[1], &pts[2], &pts[3]);
        let mut bld = Builder::new(self.g, cyc.clone())?;
        let l = self.line(a, b);
        let m = self.line(c, d);
        let s = join(f, &l, &m);
        if s.dim() == 3 {
            let e = l.intersect(&m, f).expect("same ambient");
            self.stats.quadrangle_meeting += 1;
            if &e != b && &e != c {
                let sub = self.triangle(b, c, &e, 0)?;
                replace_edge(&mut bld, f, b, c, &e, &sub)?;
            }
            return self.finish_with_rest(bld);
        }
        let form = self.g.form();
        let rad = form.radical(&s);
        match rad.dim() {
            2 => {
                if !OrthGeometry::is_element(self.g, &l) {
                    return Err(HomotopyError::CaseIIEncountered(format!("{l:?}, {m:?}")));
                }
                self.stats.quadrangle_radical2 += 1;
            }
            1 => self.stats.quadrangle_radical1 += 1,
            0 => {
                if form.classify(&s).ok() == Some(TypeSign::Minus) {
                    self.stats.quadrangle_negative += 1;
                } else {
                    self.stats.quadrangle_positive += 1;
                }
                if OrthGeometry::is_element(self.g, &s) {
                    self.stats.quadrangle_fan += 1;
                    bld.fan(&s)?;
                    return bld.finish_null();
                }
            }
            _ => return Err(HomotopyError::NotGeometric("sides of the quadrangle are degenerate".into())),
        }
        let path = self.transversal_path(&l, &m, b, a).ok_or_else(|| {
            HomotopyError::SearchExhausted("points of the opposite sides are not connected by elliptic transversals".into())
        })?;
        // sweep the front transversal from bc to da
        let (mut u, mut v) = (b.clone(), c.clone());
        for z in &path[1..] {
            if z == &u || z == &v {
                continue;
            }
            let sub = self.triangle(&u, &v, z, 0)?;
            replace_edge(&mut bld, f, &u, &v, z, &sub)?;
            bld.simplify()?;
            if l.contains(z, f) {
                u = z.clone();
            } else {
                v = z.clone();
            }
        }
        self.finish_with_rest(bld)
    }

    /// Breadth-first path from `from` to `to` alternating between points of
    /// `l` and `m`, consecutive points spanning elliptic lines.
    fn transversal_path(&self, l: &Subspace, m: &Subspace, from: &Subspace, to: &Subspace) -> Option<Vec<Subspace>> {
        let lp = l.points(self.f);
        let mp = m.points(self.f);
        let nodes: Vec<Subspace> = lp.iter().chain(&mp).cloned().collect();
        let nl = lp.len();
        let idx = |x: &Subspace| nodes.iter().position(|y| y == x);
        let (s, t) = (idx(from)?, idx(to)?);
        let mut prev = vec![usize::MAX; nodes.len()];
        prev[s] = s;
        let mut queue = VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            if x == t {
                let mut out = vec![nodes[x].clone()];
                let mut cur = x;
                while prev[cur] != cur {
                    cur = prev[cur];
                    out.push(nodes[cur].clone());
                }
                out.reverse();
                return Some(out);
            }
            let others = if x < nl { nl..nodes.len() } else { 0..nl };
            for y in others {
                if prev[y] == usize::MAX && self.collinear(&nodes[x], &nodes[y]) {
                    prev[y] = x;
                    queue.push_back(y);
                }
            }
        }
        None
    }

    /// Certifies whatever polygon is left in `bld` and closes it.
    fn finish_with_rest(&mut self, mut bld: Builder<'g, Subspace, OrthGeometry>) -> Result<Cert, HomotopyError> {
        bld.simplify()?;
        if bld.cycle.len() > 1 {
            let sub = self.certify_polygon(bld.cycle.clone())?;
            bld.splice(0, &sub)?;
        }
        bld.finish_null()
    }

    // ---------------------------------------------------------------- pentagons

    /// Certificate for the point-line pentagon through the five points.
    pub fn certify_pentagon(&mut self, pts: [&Subspace; 5]) -> Result<Cert, HomotopyError> {
        self.check_points(&pts)?;
        let owned: Vec<Subspace> = pts.iter().map(|p| (*p).clone()).collect();
        if (0..5).any(|i| owned[i] == owned[(i + 1) % 5]) {
            return self.certify_polygon(self.degenerate_loop(&pts));
        }
        self.certify_polygon(polygon_cycle(self.f, &owned))
    }

    fn pentagon(&mut self, cyc: Vec<Subspace>) -> Result<Cert, HomotopyError> {
        let f = self.f;
        let pts = polygon_points(&cyc);
        let (a, c, d) = (&pts[0], &pts[2], &pts[3]);
        let l = self.line(c, d);
        let mut cands: Vec<Subspace> = l.points(f).into_iter().filter(|x| x != c && x != d).collect();
        cands.push(c.clone());
        cands.push(d.clone());
        let fp = cands
            .into_iter()
            .find(|x| self.collinear(a, x))
            .ok_or_else(|| HomotopyError::SearchExhausted("no elliptic line through a meets cd".into()))?;
        self.stats.pentagons += 1;
        let mut bld = Builder::new(self.g, cyc)?;
        let target = if &fp != c && &fp != d {
            bld.apply(Move { kind: MoveKind::Return, dir: Direction::Insert, pos: 5, verts: vec![fp.clone()] })?;
            6
        } else if &fp == c {
            4
        } else {
            6
        };
        self.chord(&mut bld, target)?;
        self.finish_with_rest(bld)
    }

    /// Replaces `cycle[0..=j]` by a direct chord `p₀ – cycle[j]`,
    /// certifying the cut-off polygon.
    fn chord(&mut self, bld: &mut Builder<'g, Subspace, OrthGeometry>, j: usize) -> Result<(), HomotopyError> {
        let path = point_path(self.f, &[bld.cycle[0].clone(), bld.cycle[j].clone()]);
        let lp = bld.segment_loop(0, j, &path);
        let sub = self.certify_polygon(lp)?;
        self.stats.chords += 1;
        bld.replace_segment(0, j, &path, &sub)?;
        bld.simplify()
    }

    /// Polygons with six or more points: cut off a quadrangle or pentagon at
    /// the base and continue with the rest.
    fn long_polygon(&mut self, cyc: Vec<Subspace>) -> Result<Cert, HomotopyError> {
        let f = self.f;
        let pts = polygon_points(&cyc);
        let mut bld = Builder::new(self.g, cyc)?;
        let p0 = &pts[0];
        if self.collinear(p0, &pts[3]) {
            self.chord(&mut bld, 6)?;
        } else if self.collinear(p0, &pts[4]) {
            self.chord(&mut bld, 8)?;
        } else {
            // a point z on p₃p₄ collinear with p₀ replaces p₃, p₄'s neighbour
            let l = self.line(&pts[3], &pts[4]);
            let z = l.points(f).into_iter().find(|z| z != &pts[3] && z != &pts[4] && self.collinear(p0, z));
            match z {
                Some(z) => {
                    bld.apply(Move { kind: MoveKind::Return, dir: Direction::Insert, pos: 7, verts: vec![z.clone()] })?;
                    self.chord(&mut bld, 8)?;
                }
                None => {
                    let z = self
                        .g
                        .points()
                        .iter()
                        .find(|z| self.collinear(p0, z) && self.collinear(z, &pts[3]))
                        .cloned()
                        .ok_or_else(|| HomotopyError::SearchExhausted("collinearity graph has diameter above two".into()))?;
                    let path = point_path(f, &[p0.clone(), z, pts[3].clone()]);
                    let lp = bld.segment_loop(0, 6, &path);
                    let sub = self.certify_polygon(lp)?;
                    self.stats.chords += 1;
                    bld.replace_segment(0, 6, &path, &sub)?;
                    bld.simplify()?;
                }
            }
        }
        self.finish_with_rest(bld)
    }

    // ----------------------------------------------------------------- polygons

    /// Certificate for a closed point-line cycle based at a point.
    pub fn certify_polygon(&mut self, cyc: Vec<Subspace>) -> Result<Cert, HomotopyError> {
        let mut bld = Builder::new(self.g, cyc)?;
        if bld.cycle[0].dim() != 1 || bld.cycle.iter().any(|x| x.dim() > 2) {
            return Err(HomotopyError::NotACycle("expected a point-line cycle based at a point".into()));
        }
        bld.simplify()?;
        let c = bld.cycle.clone();
        if c.len() == 1 {
            return bld.finish_null();
        }
        let k = (c.len() - 1) / 2;
        let sub = if c[1] == c[c.len() - 2] {
            // the base sits inside a side: restart from the next point
            let rot = rotated_loop(&c, 2);
            let inner = self.certify_polygon(rot)?;
            rotate(self.g, c, 2, &inner)?
        } else {
            match k {
                3 => {
                    let p = polygon_points(&c);
                    self.triangle(&p[0], &p[1], &p[2], 0)?
                }
                4 => self.quadrangle(c)?,
                5 => self.pentagon(c)?,
                _ => self.long_polygon(c)?,
            }
        };
        bld.splice(0, &sub)?;
        bld.finish_null()
    }

    /// Certificate for any closed cycle of the geometry.
    pub fn certify_cycle(&mut self, cycle: Vec<Subspace>) -> Result<Cert, HomotopyError> {
        let mut bld = Builder::new(self.g, cycle)?;
        bld.simplify()?;
        if bld.cycle.len() == 1 {
            return bld.finish_null();
        }
        let base = bld.cycle[0].clone();
        if base.dim() == 1 {
            let sub = self.point_based(bld.cycle.clone())?;
            bld.splice(0, &sub)?;
            return bld.finish_null();
        }
        let p0 = self
            .g
            .point_of_flag(&[&base])
            .ok_or_else(|| HomotopyError::HypothesisFailed(format!("{base:?} contains no point")))?;
        bld.apply(Move { kind: MoveKind::Return, dir: Direction::Insert, pos: 0, verts: vec![p0.clone()] })?;
        let last = bld.cycle.len() - 1;
        bld.apply(Move { kind: MoveKind::Return, dir: Direction::Insert, pos: last, verts: vec![p0] })?;
        let inner = bld.cycle[1..bld.cycle.len() - 1].to_vec();
        let sub = self.point_based(inner)?;
        bld.splice(1, &sub)?;
        bld.simplify()?;
        bld.finish_null()
    }

    /// Pushes a cycle based at a point or line onto points and lines; returns
    /// the reduced cycle and the certificate connecting the two.
    pub fn reduce_to_point_line(&mut self, cycle: Vec<Subspace>) -> Result<(Vec<Subspace>, Cert), HomotopyError> {
        let mut bld = Builder::new(self.g, cycle)?;
        if bld.cycle[0].dim() > 2 {
            return Err(HomotopyError::HypothesisFailed("cycle must be based at a point or a line".into()));
        }
        reduce_in_builder(&mut bld)?;
        let reduced = bld.cycle.clone();
        Ok((reduced, bld.finish()?))
    }

    fn point_based(&mut self, cycle: Vec<Subspace>) -> Result<Cert, HomotopyError> {
        let mut bld = Builder::new(self.g, cycle)?;
        if bld.cycle.iter().any(|x| x.dim() > 2) {
            self.stats.reductions += 1;
        }
        reduce_in_builder(&mut bld)?;
        bld.simplify()?;
        if bld.cycle.len() > 1 {
            let sub = self.certify_polygon(bld.cycle.clone())?;
            bld.splice(0, &sub)?;
        }
        bld.finish_null()
    }
}

/// Replaces the side `u → v` of the point-line cycle in `bld` by `u → w → v`
/// using a certificate for the triangle `u, v, w` based at `u`.
fn replace_edge(
    bld: &mut Builder<'_, Subspace, OrthGeometry>,
    f: Field,
    u: &Subspace,
    v: &Subspace,
    w: &Subspace,
    sub: &Cert,
) -> Result<(), HomotopyError> {
    let c = &bld.cycle;
    let i = (0..c.len().saturating_sub(2))
        .step_by(2)
        .find(|&i| &c[i] == u && &c[i + 2] == v)
        .ok_or_else(|| HomotopyError::NotACycle(format!("side {u:?} → {v:?} not found")))?;
    let path = point_path(f, &[u.clone(), w.clone(), v.clone()]);
    bld.replace_segment(i, i + 2, &path, sub)
}

/// The loop `c` started at position `r`.
fn rotated_loop<V: Clone>(c: &[V], r: usize) -> Vec<V> {
    let n = c.len() - 1;
    let mut out = c[r..=n].to_vec();
    out.extend_from_slice(&c[1..=r]);
    out
}

/// A certificate for the loop `c` from a certificate `sub` of the same loop
/// started at position `r`.
fn rotate(g: &OrthGeometry, c: Vec<Subspace>, r: usize, sub: &Cert) -> Result<Cert, HomotopyError> {
    let n = c.len() - 1;
    let head = c[..=r].to_vec();
    let mut bld = Builder::new(g, c)?;
    bld.insert_backtrack(n, &head)?;
    bld.splice(r, sub)?;
    bld.simplify()?;
    bld.finish_null()
}

// ---------------------------------------------------------------- random input

/// A uniformly random point of the geometry.
pub fn random_point<R: Rng>(g: &OrthGeometry, rng: &mut R) -> Subspace {
    g.points().choose(rng).expect("geometry has points").clone()
}

/// A random point collinear with `p`.
pub fn random_neighbor<R: Rng>(g: &OrthGeometry, p: &Subspace, rng: &mut R) -> Subspace {
    loop {
        let z = random_point(g, rng);
        if g.collinear(p, &z) {
            return z;
        }
    }
}

/// A random point collinear with both `p` and `q`.
fn random_common_neighbor<R: Rng>(g: &OrthGeometry, p: &Subspace, q: &Subspace, rng: &mut R) -> Option<Subspace> {
    (0..20_000).map(|_| random_point(g, rng)).find(|z| g.collinear(p, z) && g.collinear(z, q))
}

/// Random triangle of pairwise collinear points not on a common line; with
/// `degenerate` the three points span a degenerate plane.
pub fn random_triangle<R: Rng>(g: &OrthGeometry, degenerate: bool, rng: &mut R) -> [Subspace; 3] {
    let f = g.field();
    let form = g.form();
    loop {
        let a = random_point(g, rng);
        let b = random_neighbor(g, &a, rng);
        let ab = join(f, &a, &b);
        let c = if degenerate {
            let polar = form.perp(&ab);
            let sing: Vec<Subspace> = polar.points(f).into_iter().filter(|x| form.norm(x.vector()) == 0).collect();
            let Some(w) = sing.choose(rng) else { continue };
            let plane = join(f, &ab, w);
            let pts: Vec<Subspace> = plane.points(f).into_iter().filter(|x| !ab.contains(x, f) && x != w).collect();
            let Some(c) = pts.choose(rng) else { continue };
            c.clone()
        } else {
            match random_common_neighbor(g, &a, &b, rng) {
                Some(c) => c,
                None => continue,
            }
        };
        if ab.contains(&c, f) || !g.collinear(&a, &c) || !g.collinear(&b, &c) {
            continue;
        }
        return [a, b, c];
    }
}

/// Random closed walk of `k ≥ 3` points in the collinearity graph with
/// distinct consecutive points and no three consecutive points on a line.
pub fn random_polygon<R: Rng>(g: &OrthGeometry, k: usize, rng: &mut R) -> Vec<Subspace> {
    let f = g.field();
    'outer: loop {
        let mut pts = vec![random_point(g, rng)];
        while pts.len() < k - 1 {
            let last = pts.last().expect("nonempty").clone();
            let z = random_neighbor(g, &last, rng);
            if pts.len() >= 2 && join(f, &pts[pts.len() - 2], &last).contains(&z, f) {
                continue;
            }
            pts.push(z);
        }
        let Some(z) = random_common_neighbor(g, pts.last().expect("nonempty"), &pts[0], rng) else { continue };
        pts.push(z);
        for i in 0..k {
            let (x, y, w) = (&pts[i], &pts[(i + 1) % k], &pts[(i + 2) % k]);
            if x == y || join(f, x, y).contains(w, f) {
                continue 'outer;
            }
        }
        return pts;
    }
}

/// A random cycle of length at most `2k`: a random `k`-gon in which some
/// points between two lines are replaced by elements of higher type
/// containing both lines, started at a random position.
pub fn random_cycle<R: Rng>(g: &OrthGeometry, k: usize, rng: &mut R) -> Vec<Subspace> {
    let f = g.field();
    let cert = OrthCertifier::new(g);
    let pts = random_polygon(g, k, rng);
    let mut c = polygon_cycle(f, &pts);
    let n = c.len() - 1;
    for i in (2..n).step_by(2) {
        if rng.gen_bool(0.5) {
            if let Some(x) = cert.container(&join(f, &c[i - 1], &c[i + 1])) {
                if x.dim() > 2 {
                    c[i] = x;
                }
            }
        }
    }
    let r = rng.gen_range(0..n);
    rotated_loop(&c, r)
}
