use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use orthogeo::amalgam::{
    amalgam_of_parabolics, build_cover_geometry, shape_reduction_verify, tits_from_evidence, tits_verify,
    universal_completion_presentation, universal_order, AmalgamError, CertificateEvidence, Conclusion, HypothesisCheck,
    Shape,
};
use orthogeo::cosetgeo::{so_generators, so_order, GeomAction};
use orthogeo::group::GroupElem;
use orthogeo::homotopy::orth::{polygon_cycle, random_cycle, random_polygon, random_triangle, CertStats, OrthCertifier};
use orthogeo::homotopy::{verify_certificate, Certificate, HomotopyError};
use orthogeo::orthospace::{
    compose_types, gaussian_binomial, random_line_count_config, verify_diameter, verify_elliptic_line_counts,
    verify_pointline, MaterializedOrth, OrthGeometry, Subspace, SweepMode,
};
use orthogeo::pregeo::Pregeometry;
use orthogeo::todd_coxeter::{simplify_presentation, TcError};

use crate::config::{
    AmalgamAction, AmalgamConfig, CycleShape, GeometryConfig, Lemma, OrthConfig, RunConfig, ShapeConfig,
};
use crate::{CliError, Outcome, SCHEMA};

/// Settings shared by every command after flags override the config.
pub struct Ctx<'a> {
    pub config: &'a RunConfig,
    pub seed: u64,
    pub cap: usize,
    pub exhaustive: bool,
}

pub type CmdResult = Result<(Value, Outcome), CliError>;

fn pass_if(ok: bool) -> Outcome {
    if ok {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

/// Upper bound for the element count of an orthogonal geometry, checked
/// against the cap before anything is materialised.
fn materialize(cfg: &OrthConfig, geo: &OrthGeometry, cap: usize) -> Result<MaterializedOrth, CliError> {
    let d = (cfg.n + 1) as u32;
    let bound: u64 = geo.types().iter().map(|&k| gaussian_binomial(cfg.q as u64, d, k as u32)).sum();
    if bound > cap as u64 {
        return Err(CliError::Cap(format!("geometry may have {bound} elements; cap is {cap}")));
    }
    Ok(geo.materialize())
}

// --------------------------------------------------------------------- build

pub fn build(ctx: &Ctx) -> CmdResult {
    let gc = ctx.config.geometry()?;
    let (geometry, by_class) = match gc {
        GeometryConfig::Orth(cfg) => {
            let geo = cfg.geometry()?;
            let m = materialize(cfg, &geo, ctx.cap)?;
            let mut by_class: BTreeMap<String, usize> = BTreeMap::new();
            for s in &m.elements {
                let label = geo.element_label(s).expect("materialised elements carry labels");
                *by_class.entry(label.to_string()).or_default() += 1;
            }
            (m.geometry, Some(by_class))
        }
        other => (other.explicit()?.geometry, None),
    };
    let mut by_type: BTreeMap<u32, usize> = BTreeMap::new();
    for x in 0..geometry.len() as u32 {
        *by_type.entry(geometry.typ(x)).or_default() += 1;
    }
    let body = json!({
        "elements": geometry.len(),
        "incidences": geometry.incidence_count(),
        "rank": geometry.rank(),
        "by_type": by_type,
        "by_class": by_class,
        "geometry": geometry,
    });
    Ok((body, Outcome::Pass))
}

// -------------------------------------------------------------------- verify

pub fn verify(ctx: &Ctx, lemma: Lemma) -> CmdResult {
    let vc = &ctx.config.verify;
    let gc = ctx.config.geometry()?;
    let orth = match gc {
        GeometryConfig::Orth(c) => Some(c),
        _ => None,
    };
    let need_orth = || orth.ok_or_else(|| CliError::Config(format!("{lemma:?} needs an orthogonal geometry")));
    match lemma {
        Lemma::Pointline => {
            let form = need_orth()?.form()?;
            let mode = if ctx.exhaustive || vc.exhaustive {
                SweepMode::Exhaustive
            } else {
                SweepMode::Sampled { samples: vc.samples, seed: ctx.seed }
            };
            let r = verify_pointline(&form, mode);
            let ok = r.passed();
            Ok((json!({ "lemma": "pointline", "mode": mode, "report": r }), pass_if(ok)))
        }
        Lemma::Diameter => {
            let geometry = match orth {
                Some(cfg) => materialize(cfg, &cfg.geometry()?, ctx.cap)?.geometry,
                None => gc.explicit()?.geometry,
            };
            let d = verify_diameter(&geometry).map_err(|e| CliError::Failed(e.to_string()))?;
            Ok((json!({ "lemma": "diameter", "diameter": d, "expected": vc.diameter }), pass_if(d == vc.diameter)))
        }
        Lemma::Linecounts => {
            let form = need_orth()?.form()?;
            let mut rng = orthogeo::rng(ctx.seed);
            let mut failures = Vec::new();
            let (mut min_e, mut min_h) = (usize::MAX, usize::MAX);
            let mut bounds = (0, 0);
            for i in 0..vc.samples {
                let cfg = random_line_count_config(&form, &mut rng);
                let r = verify_elliptic_line_counts(&form, &cfg).map_err(|e| CliError::Failed(e.to_string()))?;
                min_e = min_e.min(r.elliptic);
                min_h = min_h.min(r.hyperbolic);
                bounds = (r.elliptic_bound, r.hyperbolic_bound);
                if !r.passed() {
                    failures.push(json!({ "instance": i, "config": cfg, "report": r }));
                }
            }
            let ok = failures.is_empty() && vc.samples > 0;
            let body = json!({
                "lemma": "linecounts",
                "configs": vc.samples,
                "min_elliptic": min_e,
                "min_hyperbolic": min_h,
                "elliptic_bound": bounds.0,
                "hyperbolic_bound": bounds.1,
                "failures": failures,
            });
            Ok((body, pass_if(ok)))
        }
        Lemma::Typerules => typerules(ctx, &need_orth()?.form()?),
        Lemma::Geometryaxioms => {
            let geometry = match orth {
                Some(cfg) => materialize(cfg, &cfg.geometry()?, ctx.cap)?.geometry,
                None => gc.explicit()?.geometry,
            };
            let check = geometry.is_geometry();
            let connected = geometry.is_connected();
            let ok = check.ok && connected;
            Ok((json!({ "lemma": "geometryaxioms", "geo": check, "connected": connected }), pass_if(ok)))
        }
    }
}

/// Compares the predicted sign of `A ⊥ B` with the classified sign on random
/// orthogonal pairs of nondegenerate subspaces.
fn typerules(ctx: &Ctx, form: &orthogeo::orthospace::BilinearForm) -> CmdResult {
    let f = form.field();
    let q = f.order();
    let d = form.dim();
    let mut rng = orthogeo::rng(ctx.seed);
    // (dim A parity, dim B parity) → (checked, mismatches)
    let mut tally: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut mismatches = Vec::new();
    let mut done = 0;
    while done < ctx.config.verify.samples {
        let k = rng.gen_range(1..d);
        let a = Subspace::random(f, d, k, &mut rng);
        if !form.is_nondegenerate(&a) {
            continue;
        }
        let perp = form.perp(&a);
        let m = rng.gen_range(1..=perp.dim());
        let pts: Vec<Vec<u32>> = (0..m).map(|_| perp.random_point(f, &mut rng).vector().to_vec()).collect();
        let b = Subspace::span(f, d, &pts).map_err(|e| CliError::Failed(e.to_string()))?;
        if b.dim() != m || !form.is_nondegenerate(&b) {
            continue;
        }
        let sum = a.join(&b, f).map_err(|e| CliError::Failed(e.to_string()))?;
        let classify = |s: &Subspace| form.classify(s).map_err(|e| CliError::Failed(e.to_string()));
        let (sa, sb, ss) = (classify(&a)?, classify(&b)?, classify(&sum)?);
        let predicted = compose_types(sa, k, sb, m, q);
        let entry = tally.entry(format!("{}{}", k % 2, m % 2)).or_default();
        entry.0 += 1;
        if predicted != ss {
            entry.1 += 1;
            mismatches.push(json!({ "a": a, "b": b, "predicted": predicted, "actual": ss }));
        }
        done += 1;
    }
    let ok = mismatches.is_empty() && done > 0;
    let tally: BTreeMap<String, Value> =
        tally.into_iter().map(|(k, (n, bad))| (k, json!({ "checked": n, "mismatches": bad }))).collect();
    let body = json!({
        "lemma": "typerules",
        "q": q,
        "q_mod_4": q % 4,
        "samples": done,
        "by_parity": tally,
        "mismatches": mismatches,
    });
    Ok((body, pass_if(ok)))
}

// ------------------------------------------------------------------- certify

/// A certificate together with what is needed to rebuild its geometry.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateFile {
    pub schema: String,
    pub geometry: GeometryConfig,
    pub certificate: Value,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CertifyTally {
    pub instances: usize,
    pub verified: usize,
    pub failed: usize,
    pub search_exhausted: usize,
    pub truncated: bool,
    pub by_shape: BTreeMap<String, usize>,
    pub failures: Vec<Value>,
    pub stats: CertStats,
}

impl CertifyTally {
    pub fn outcome(&self) -> Outcome {
        if self.search_exhausted > 0 {
            Outcome::SearchExhausted
        } else if self.failed > 0 || self.verified == 0 {
            Outcome::Fail
        } else {
            Outcome::Pass
        }
    }
}

/// Instances to certify, each a closed cycle of subspaces.
fn instances(ctx: &Ctx, geo: &OrthGeometry) -> Result<(Vec<(String, Vec<Subspace>)>, bool), CliError> {
    let cc = &ctx.config.certify;
    let f = geo.field();
    if let Some(path) = &cc.file {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cycles: Vec<Vec<Subspace>> =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        return Ok((cycles.into_iter().map(|c| ("file".to_string(), c)).collect(), false));
    }
    if ctx.exhaustive {
        // every triangle of pairwise collinear points off a common line, up
        // to the cap
        let pts = geo.points();
        let mut out = Vec::new();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if !geo.collinear(&pts[i], &pts[j]) {
                    continue;
                }
                let line = pts[i].join(&pts[j], f).expect("same ambient");
                for k in j + 1..pts.len() {
                    if geo.collinear(&pts[i], &pts[k]) && geo.collinear(&pts[j], &pts[k]) && !line.contains(&pts[k], f) {
                        if out.len() == ctx.cap {
                            return Ok((out, true));
                        }
                        out.push(("triangle".to_string(), polygon_cycle(f, &[pts[i].clone(), pts[j].clone(), pts[k].clone()])));
                    }
                }
            }
        }
        return Ok((out, false));
    }
    let mut rng = orthogeo::rng(ctx.seed);
    let mut out = Vec::new();
    for &shape in &cc.shapes {
        for i in 0..cc.count {
            let cycle = match shape {
                // alternate spans of dimension three: nondegenerate and degenerate
                CycleShape::Triangle => polygon_cycle(f, &random_triangle(geo, i % 2 == 1, &mut rng)),
                CycleShape::Quadrangle => polygon_cycle(f, &random_polygon(geo, 4, &mut rng)),
                CycleShape::Pentagon => polygon_cycle(f, &random_polygon(geo, 5, &mut rng)),
                CycleShape::Cycle => {
                    let k = rng.gen_range(3..=cc.max_polygon.max(3));
                    random_cycle(geo, k, &mut rng)
                }
            };
            out.push((format!("{shape:?}").to_lowercase(), cycle));
        }
    }
    Ok((out, false))
}

/// Certifies, self-verifies and optionally writes every instance.
pub fn run_certificates(ctx: &Ctx, cfg: &OrthConfig, out_dir: Option<&Path>) -> Result<CertifyTally, CliError> {
    if cfg.q < 9 {
        return Err(CliError::Config(format!("the certificate procedures need q ≥ 9, got q = {}", cfg.q)));
    }
    let geo = cfg.geometry()?;
    let (todo, truncated) = instances(ctx, &geo)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut certifier = OrthCertifier::new(&geo);
    let mut tally = CertifyTally { truncated, ..CertifyTally::default() };
    for (i, (shape, cycle)) in todo.into_iter().enumerate() {
        tally.instances += 1;
        *tally.by_shape.entry(shape.clone()).or_default() += 1;
        let result = match shape.as_str() {
            "triangle" => certifier.certify_triangle(&cycle[0], &cycle[2], &cycle[4]),
            "quadrangle" | "pentagon" => certifier.certify_polygon(cycle.clone()),
            _ => certifier.certify_cycle(cycle.clone()),
        };
        match result {
            Ok(cert) => {
                let v = verify_certificate(&cert, &geo);
                if v.ok {
                    tally.verified += 1;
                } else {
                    tally.failed += 1;
                    tally.failures.push(json!({ "instance": i, "shape": shape, "cycle": cycle, "replay": v }));
                }
                if let Some(dir) = out_dir {
                    let file = CertificateFile {
                        schema: SCHEMA.into(),
                        geometry: GeometryConfig::Orth(cfg.clone()),
                        certificate: serde_json::to_value(&cert).expect("certificates serialise"),
                    };
                    let path = dir.join(format!("cert-{i:05}.json"));
                    let text = serde_json::to_string(&file).expect("certificates serialise");
                    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
                }
            }
            Err(e) => {
                if matches!(e, HomotopyError::SearchExhausted(_)) {
                    tally.search_exhausted += 1;
                } else {
                    tally.failed += 1;
                }
                tally.failures.push(json!({ "instance": i, "shape": shape, "cycle": cycle, "error": e.to_string() }));
            }
        }
    }
    tally.stats = certifier.stats.clone();
    Ok(tally)
}

pub fn certify(ctx: &Ctx, out_dir: Option<&Path>) -> CmdResult {
    let GeometryConfig::Orth(cfg) = ctx.config.geometry()? else {
        return Err(CliError::Config("certify needs an orthogonal geometry".into()));
    };
    let tally = run_certificates(ctx, cfg, out_dir)?;
    let outcome = tally.outcome();
    Ok((json!({ "certificates": tally }), outcome))
}

// -------------------------------------------------------------------- replay

fn replay_one(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: CertificateFile =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| CliError::Config(format!("{}: certificate: {e}", path.display()));
    let v = match &file.geometry {
        GeometryConfig::Orth(cfg) => {
            let cert: Certificate<Subspace> = serde_json::from_value(file.certificate).map_err(bad)?;
            verify_certificate(&cert, &cfg.geometry()?)
        }
        other => {
            let cert: Certificate<u32> = serde_json::from_value(file.certificate).map_err(bad)?;
            verify_certificate(&cert, &other.explicit()?.geometry)
        }
    };
    Ok(json!({ "file": path.display().to_string(), "replay": v }))
}

pub fn replay(files: &[impl AsRef<Path>]) -> CmdResult {
    if files.is_empty() {
        return Err(CliError::Config("no certificate files given".into()));
    }
    let mut results = Vec::new();
    let mut ok = true;
    for f in files {
        let r = replay_one(f.as_ref())?;
        ok &= r["replay"]["ok"].as_bool() == Some(true);
        results.push(r);
    }
    Ok((json!({ "replayed": results.len(), "results": results }), pass_if(ok)))
}

// ------------------------------------------------------------------- amalgam

impl From<AmalgamError> for CliError {
    fn from(e: AmalgamError) -> Self {
        use orthogeo::group::GroupError;
        match e {
            AmalgamError::Tc(TcError::CapExceeded(_))
            | AmalgamError::TooLarge { .. }
            | AmalgamError::Inconclusive(_)
            | AmalgamError::Group(GroupError::TooLarge(_)) => CliError::Cap(e.to_string()),
            AmalgamError::InvalidShape(_)
            | AmalgamError::InvalidIndex(_)
            | AmalgamError::NotAMonomorphism { .. }
            | AmalgamError::Unreachable(_) => CliError::Config(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

fn conclusion_outcome(c: Conclusion) -> Outcome {
    match c {
        Conclusion::Isomorphism => Outcome::Pass,
        Conclusion::NotIsomorphism => Outcome::Fail,
        Conclusion::Inconclusive => Outcome::Cap,
    }
}

fn shape_of(g: &Pregeometry, w: &[u32], cfg: &ShapeConfig) -> Result<Shape, CliError> {
    Ok(match cfg {
        ShapeConfig::All => Shape::all(g, w),
        ShapeConfig::RankAtMost(k) => Shape::rank_at_most(g, w, *k),
        ShapeConfig::Flags(flags) => {
            let mut out = Vec::new();
            for fl in flags {
                let ids = fl
                    .iter()
                    .map(|&p| w.get(p).copied().ok_or_else(|| CliError::Config(format!("hall has no position {p}"))))
                    .collect::<Result<Vec<u32>, _>>()?;
                out.push(ids);
            }
            Shape::new(g, w, out)?
        }
    })
}

fn presentation_report(p: &orthogeo::amalgam::UniversalPresentation) -> Value {
    let s = simplify_presentation(&p.presentation);
    json!({
        "union_size": p.union_size,
        "multiplication_relations": p.s1,
        "identification_relations": p.s2,
        "generators": p.presentation.generators,
        "relators": p.presentation.relators,
        "simplified": s.presentation,
    })
}

fn with_action<E: GroupElem>(
    action: AmalgamAction,
    g: &Pregeometry,
    act: &GeomAction<E>,
    w: &[u32],
    cfg: &AmalgamConfig,
    cap: usize,
) -> CmdResult {
    let labels: Vec<&str> = w.iter().map(|&x| g.label(x)).collect();
    let group_order = act.group.order();
    match action {
        AmalgamAction::Present | AmalgamAction::Enumerate => {
            let shape = shape_of(g, w, &cfg.shape)?;
            let pa = amalgam_of_parabolics(g, act, w, &shape, cap)?;
            let orders: Vec<Value> = pa
                .flags
                .iter()
                .zip(&pa.amalgam.members)
                .map(|(f, m)| json!({ "flag": f, "name": m.name, "level": m.level, "order": m.order() }))
                .collect();
            let mut body = json!({ "hall": labels, "group_order": group_order, "parabolics": orders });
            if action == AmalgamAction::Present {
                let p = universal_completion_presentation(&pa.amalgam, cap)?;
                body["presentation"] = presentation_report(&p);
            } else {
                let u = universal_order(&pa.amalgam, cap)?;
                body["universal_order"] = json!(u);
                body["index"] = json!(u as u128 / group_order);
            }
            Ok((body, Outcome::Pass))
        }
        AmalgamAction::Tits => {
            let v = tits_verify(g, act, w, cap)?;
            let outcome = conclusion_outcome(v.conclusion);
            Ok((json!({ "hall": labels, "tits": v }), outcome))
        }
        AmalgamAction::ShapeReduce => {
            let shape = shape_of(g, w, &cfg.shape)?;
            match shape_reduction_verify(g, act, w, &shape, cap) {
                Ok(r) => {
                    let outcome = conclusion_outcome(r.conclusion);
                    Ok((json!({ "hall": labels, "shape_reduction": r, "stopped_at": null }), outcome))
                }
                Err(AmalgamError::ResidueNotVerified { flag, report }) => {
                    Ok((json!({ "hall": labels, "shape_reduction": report, "stopped_at": flag }), Outcome::Fail))
                }
                Err(e) => Err(e.into()),
            }
        }
        AmalgamAction::Cover => {
            let pa = amalgam_of_parabolics(g, act, w, &Shape::all(g, w), cap)?;
            let c = build_cover_geometry(&pa, g, act, w, cap)?;
            let body = json!({
                "hall": labels,
                "universal_order": c.universal_order,
                "group_order": c.group_order,
                "index": c.index,
                "cover_elements": c.geometry.len(),
                "covering": c.covering,
                "isomorphism": c.is_isomorphism(),
            });
            Ok((body, pass_if(c.covering.ok)))
        }
    }
}

/// Tits' lemma for an orthogonal geometry too large to enumerate: the
/// verdict rests on a batch of replayed certificates.
fn tits_by_certificates(ctx: &Ctx, cfg: &OrthConfig) -> CmdResult {
    let form = cfg.form()?;
    let mut cc = ctx.config.clone();
    cc.certify.shapes = vec![CycleShape::Triangle, CycleShape::Quadrangle, CycleShape::Pentagon, CycleShape::Cycle];
    cc.certify.count = ctx.config.amalgam.certificates;
    let sub = Ctx { config: &cc, seed: ctx.seed, cap: ctx.cap, exhaustive: false };
    let tally = run_certificates(&sub, cfg, None)?;
    let in_range = cfg.q >= 9 && cfg.n >= 3;
    let note = if in_range {
        "standing assumption for q ≥ 9 and n ≥ 3; not machine-checked at this size"
    } else {
        "outside q ≥ 9, n ≥ 3"
    };
    let hypotheses = ["rank", "i", "ii", "connected"].iter().map(|h| HypothesisCheck {
        name: h.to_string(),
        ok: in_range,
        detail: note.into(),
    });
    let evidence = CertificateEvidence {
        h1_trivial: None,
        certificates_verified: tally.verified,
        certificates_failed: tally.failed,
        search_exhausted: tally.search_exhausted,
    };
    let v = tits_from_evidence(hypotheses.collect(), so_order(cfg.q, cfg.n + 1, form.sign()), &evidence);
    let outcome = if tally.search_exhausted > 0 { Outcome::SearchExhausted } else { conclusion_outcome(v.conclusion) };
    Ok((json!({ "tits": v, "certificates": tally }), outcome))
}

pub fn amalgam(ctx: &Ctx, action: AmalgamAction) -> CmdResult {
    let ac = &ctx.config.amalgam;
    if let Some(spec) = &ac.spec {
        let a = spec.build(ctx.cap)?;
        return match action {
            AmalgamAction::Present => {
                let p = universal_completion_presentation(&a, ctx.cap)?;
                Ok((json!({ "presentation": presentation_report(&p) }), Outcome::Pass))
            }
            AmalgamAction::Enumerate => Ok((json!({ "universal_order": universal_order(&a, ctx.cap)? }), Outcome::Pass)),
            _ => Err(CliError::Config(format!("{action:?} needs a geometry with a group, not an explicit amalgam"))),
        };
    }
    match ctx.config.geometry()? {
        GeometryConfig::Orth(cfg) => {
            let geo = cfg.geometry_with_hall()?;
            let m = match materialize(cfg, &geo, ctx.cap) {
                Ok(m) => m,
                Err(CliError::Cap(_)) if action == AmalgamAction::Tits => return tits_by_certificates(ctx, cfg),
                Err(e) => return Err(e),
            };
            let group = so_generators(geo.form()).map_err(|e| CliError::Failed(e.to_string()))?;
            let act = GeomAction::on_subspaces(group, &m);
            let w: Vec<u32> = geo
                .hall_elements()
                .expect("hall is realised")
                .iter()
                .map(|s| m.id(s).expect("hall elements are elements"))
                .collect();
            with_action(action, &m.geometry, &act, &w, ac, ctx.cap)
        }
        other => {
            let ex = other.explicit()?;
            let group = ex.group.ok_or_else(|| CliError::Config("this geometry comes without a group".into()))?;
            let w = ex.geometry.chambers().into_iter().next().ok_or_else(|| CliError::Config("no chamber".into()))?;
            with_action(action, &ex.geometry, &GeomAction::on_ids(group), &w, ac, ctx.cap)
        }
    }
}
