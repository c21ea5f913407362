use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::pregeo::{Pregeometry, PregeoError};

use super::{BilinearForm, LineClass, OrthError, OrthGeometry, Subspace, TypeSign};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepMode {
    Exhaustive,
    Sampled { samples: usize, seed: u64 },
}

/// Outcome of the point–line sweep: for each instance (point `a`, line `l`,
/// `a ∉ l`), the number of points of `l` not collinear with `a`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointLineReport {
    pub q: u32,
    pub n: usize,
    pub instances: u64,
    pub max_noncollinear: usize,
    pub min_collinear: usize,
    /// Instances with more than two non-collinear points.
    pub violations: u64,
    /// `noncollinear count → number of instances`.
    pub histogram: BTreeMap<usize, u64>,
}

impl PointLineReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.instances > 0
    }
}

/// `⟨a, x⟩` is a nondegenerate line, using the 2×2 Gram determinant.
fn spans_nondegenerate_line(form: &BilinearForm, a: &[u32], x: &[u32]) -> bool {
    let f = form.field();
    let det = f.sub(f.mul(form.norm(a), form.norm(x)), f.mul(form.eval(a, x), form.eval(a, x)));
    det != 0
}

fn count_noncollinear(form: &BilinearForm, a: &Subspace, line_points: &[Subspace]) -> (usize, usize) {
    let collinear =
        line_points.iter().filter(|x| spans_nondegenerate_line(form, a.vector(), x.vector())).count();
    (line_points.len() - collinear, collinear)
}

/// Counts, for points `a` and lines `l` of the full orthogonal geometry with
/// `a ∉ l`, the points of `l` that are not collinear with `a`.
pub fn verify_pointline(form: &BilinearForm, mode: SweepMode) -> PointLineReport {
    let f = form.field();
    let geo = OrthGeometry::full(form.clone());
    let mut report = PointLineReport {
        q: f.order(),
        n: form.dim() - 1,
        instances: 0,
        max_noncollinear: 0,
        min_collinear: usize::MAX,
        violations: 0,
        histogram: BTreeMap::new(),
    };
    let record = |non: usize, col: usize, r: &mut PointLineReport| {
        r.instances += 1;
        r.max_noncollinear = r.max_noncollinear.max(non);
        r.min_collinear = r.min_collinear.min(col);
        if non > 2 {
            r.violations += 1;
        }
        *r.histogram.entry(non).or_default() += 1;
    };
    match mode {
        SweepMode::Exhaustive => {
            let points = geo.points().to_vec();
            for l in geo.elements_of_dim(2) {
                let on_l: Vec<Subspace> =
                    l.points(f).into_iter().filter(|p| form.norm(p.vector()) != 0).collect();
                for a in &points {
                    if l.contains(a, f) {
                        continue;
                    }
                    let (non, col) = count_noncollinear(form, a, &on_l);
                    record(non, col, &mut report);
                }
            }
        }
        SweepMode::Sampled { samples, seed } => {
            let mut rng = crate::rng(seed);
            let points = geo.points();
            while report.instances < samples as u64 {
                let a = &points[rng.gen_range(0..points.len())];
                let l = Subspace::random(f, form.dim(), 2, &mut rng);
                if !form.is_nondegenerate(&l) || l.contains(a, f) {
                    continue;
                }
                let on_l: Vec<Subspace> =
                    l.points(f).into_iter().filter(|p| form.norm(p.vector()) != 0).collect();
                let (non, col) = count_noncollinear(form, a, &on_l);
                record(non, col, &mut report);
            }
        }
    }
    if report.instances == 0 {
        report.min_collinear = 0;
    }
    report
}

/// Diameter of the collinearity graph of a geometry; the geometry must have a
/// point type with a unique neighbour in its basic diagram.
pub fn verify_diameter(geometry: &Pregeometry) -> Result<usize, OrthError> {
    let graph = geometry.collinearity_graph().map_err(|e| match e {
        PregeoError::DiagramPreconditionFailed(s) => OrthError::ConfigViolatesPrecondition(s),
        other => OrthError::ConfigViolatesPrecondition(other.to_string()),
    })?;
    graph.diameter().ok_or(OrthError::DisconnectedGraph)
}

/// A point `p`, an elliptic line `l` and a hyperbolic line `m` with `⟨p,l⟩`
/// and `⟨p,m⟩` nondegenerate planes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineCountConfig {
    pub p: Subspace,
    pub l: Subspace,
    pub m: Subspace,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineCountReport {
    pub q: u32,
    /// Elliptic lines through `p` meeting `l` in a nondegenerate point.
    pub elliptic: usize,
    /// Hyperbolic lines through `p` meeting `m` in a nondegenerate point.
    pub hyperbolic: usize,
    pub elliptic_bound: usize,
    pub hyperbolic_bound: usize,
    /// Positive points of `p^⊥ ∩ ⟨p,l⟩` (reported, not asserted).
    pub positive_in_perp_l: usize,
}

impl LineCountReport {
    pub fn passed(&self) -> bool {
        self.elliptic >= self.elliptic_bound && self.hyperbolic >= self.hyperbolic_bound
    }
}

fn check_config(form: &BilinearForm, cfg: &LineCountConfig) -> Result<(), OrthError> {
    let f = form.field();
    let bad = |s: &str| Err(OrthError::ConfigViolatesPrecondition(s.to_string()));
    if cfg.p.dim() != 1 || form.norm(cfg.p.vector()) == 0 {
        return bad("p must be a nondegenerate point");
    }
    if cfg.l.dim() != 2 || !form.is_nondegenerate(&cfg.l) || form.line_class(&cfg.l)? != LineClass::Elliptic {
        return bad("l must be an elliptic line");
    }
    if cfg.m.dim() != 2 || !form.is_nondegenerate(&cfg.m) || form.line_class(&cfg.m)? != LineClass::Hyperbolic {
        return bad("m must be a hyperbolic line");
    }
    for (x, name) in [(&cfg.l, "l"), (&cfg.m, "m")] {
        let plane = x.join(&cfg.p, f)?;
        if plane.dim() != 3 || !form.is_nondegenerate(&plane) {
            return Err(OrthError::ConfigViolatesPrecondition(format!("<p,{name}> must be a nondegenerate plane")));
        }
    }
    Ok(())
}

/// Exact counts for a single configuration, with the lower bounds
/// `(q−1)/2` (elliptic) and `(q−5)/2` (hyperbolic, clamped at 0).
pub fn verify_elliptic_line_counts(form: &BilinearForm, cfg: &LineCountConfig) -> Result<LineCountReport, OrthError> {
    check_config(form, cfg)?;
    let f = form.field();
    let q = f.order();
    let count = |line: &Subspace, want: TypeSign| -> Result<usize, OrthError> {
        let mut c = 0;
        for x in line.points(f) {
            if form.norm(x.vector()) == 0 {
                continue;
            }
            let through = x.join(&cfg.p, f)?;
            if form.label(&through).map(|l| l.sign) == Some(want) {
                c += 1;
            }
        }
        Ok(c)
    };
    let elliptic = count(&cfg.l, TypeSign::Minus)?;
    let hyperbolic = count(&cfg.m, TypeSign::Plus)?;
    let w = form.perp(&cfg.p).intersect(&cfg.l.join(&cfg.p, f)?, f)?;
    let positive_in_perp_l =
        w.points(f).iter().filter(|x| form.point_sign(x) == Some(TypeSign::Plus)).count();
    Ok(LineCountReport {
        q,
        elliptic,
        hyperbolic,
        elliptic_bound: ((q - 1) / 2) as usize,
        hyperbolic_bound: (q.saturating_sub(5) / 2) as usize,
        positive_in_perp_l,
    })
}

/// Rejection-samples a valid configuration.
pub fn random_line_count_config<R: Rng>(form: &BilinearForm, rng: &mut R) -> LineCountConfig {
    let f = form.field();
    let d = form.dim();
    let p = loop {
        let p = Subspace::whole(d).random_point(f, rng);
        if form.norm(p.vector()) != 0 {
            break p;
        }
    };
    let mut pick = |class: LineClass| loop {
        let l = Subspace::random(f, d, 2, rng);
        if !form.is_nondegenerate(&l) || form.line_class(&l) != Ok(class) {
            continue;
        }
        let plane = l.join(&p, f).expect("same ambient");
        if plane.dim() == 3 && form.is_nondegenerate(&plane) {
            break l;
        }
    };
    let l = pick(LineClass::Elliptic);
    let m = pick(LineClass::Hyperbolic);
    LineCountConfig { p, l, m }
}
