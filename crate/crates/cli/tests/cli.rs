use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;

use serde_json::{json, Value};

fn orthogeo(args: &[&str]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_orthogeo")).args(args).output().expect("binary runs");
    let code = out.status.code().expect("exit code");
    let report = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (code, report)
}

fn write_config(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

/// Reduced row echelon form mod `p`; returns the nonzero rows.
fn rref(mut m: Vec<Vec<u32>>, p: u32) -> Vec<Vec<u32>> {
    let inv = |a: u32| (1..p).find(|&b| a * b % p == 1).unwrap();
    let cols = m[0].len();
    let mut r = 0;
    for c in 0..cols {
        let Some(piv) = (r..m.len()).find(|&i| m[i][c] != 0) else { continue };
        m.swap(r, piv);
        let s = inv(m[r][c]);
        for x in m[r].iter_mut() {
            *x = *x * s % p;
        }
        for i in 0..m.len() {
            if i != r && m[i][c] != 0 {
                let t = m[i][c];
                for j in 0..cols {
                    m[i][j] = (m[i][j] + p * p - t * m[r][j] % p) % p;
                }
            }
        }
        r += 1;
    }
    m.truncate(r);
    m
}

fn det(mut m: Vec<Vec<u32>>, p: u32) -> u32 {
    let n = m.len();
    let inv = |a: u32| (1..p).find(|&b| a * b % p == 1).unwrap();
    let mut d = 1;
    for c in 0..n {
        let Some(piv) = (c..n).find(|&i| m[i][c] != 0) else { return 0 };
        if piv != c {
            m.swap(piv, c);
            d = (p - d) % p;
        }
        d = d * m[c][c] % p;
        let s = inv(m[c][c]);
        for i in c + 1..n {
            let t = m[i][c] * s % p;
            for j in c..n {
                m[i][j] = (m[i][j] + p * p - t * m[c][j] % p) % p;
            }
        }
    }
    d
}

/// Nondegenerate `k`-subspaces of `F_p^d` under the dot product, by
/// spanning every `k`-tuple of projective points.
fn brute_nondegenerate(p: u32, d: usize, k: usize) -> usize {
    let mut pts = Vec::new();
    for i in 1..p.pow(d as u32) {
        let v: Vec<u32> = (0..d).map(|j| i / p.pow(j as u32) % p).collect();
        if v.iter().find(|&&x| x != 0) == Some(&1) {
            pts.push(v);
        }
    }
    let mut seen = BTreeSet::new();
    let mut idx = vec![0usize; k];
    loop {
        let rows = rref(idx.iter().map(|&i| pts[i].clone()).collect(), p);
        if rows.len() == k {
            seen.insert(rows);
        }
        let mut j = k;
        loop {
            if j == 0 {
                let dot = |a: &[u32], b: &[u32]| a.iter().zip(b).map(|(x, y)| x * y).sum::<u32>() % p;
                return seen.iter().filter(|b| det(b.iter().map(|x| b.iter().map(|y| dot(x, y)).collect()).collect(), p) != 0).count();
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < pts.len() {
                for t in j + 1..k {
                    idx[t] = idx[j];
                }
                break;
            }
            idx[j] = 0;
        }
    }
}

#[test]
fn build_counts_match_brute_force() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "o.json", &json!({ "geometry": { "kind": "orth", "q": 5, "n": 3 } }));
    let (code, r) = orthogeo(&["build", "--config", &cfg]);
    assert_eq!(code, 0);
    for k in 1..=3u32 {
        assert_eq!(r["by_type"][k.to_string()].as_u64().unwrap() as usize, brute_nondegenerate(5, 4, k as usize), "dim {k}");
    }
    assert_eq!(r["elements"], r["geometry"]["elements"].as_array().unwrap().len());
    // restricting the labels keeps exactly the listed classes
    let cfg = write_config(
        dir.path(),
        "y.json",
        &json!({ "geometry": { "kind": "orth", "q": 5, "n": 3, "hall": "both_planes" } }),
    );
    let (code, y) = orthogeo(&["build", "--config", &cfg]);
    assert_eq!(code, 0);
    let classes: Vec<&String> = y["by_class"].as_object().unwrap().keys().collect();
    assert_eq!(classes, ["1+", "1-", "2-", "3+", "3-"]);
    for c in classes {
        assert_eq!(y["by_class"][c], r["by_class"][c]);
    }
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad_gram = write_config(
        dir.path(),
        "g.json",
        &json!({ "geometry": { "kind": "orth", "q": 5, "n": 2, "gram": [[1, 0, 0], [0, 1, 0], [0, 0, 0]] } }),
    );
    let (code, r) = orthogeo(&["build", "--config", &bad_gram]);
    assert_eq!(code, 2);
    assert_eq!(r["status"], "config_error");
    let p = dir.path().join("broken.json");
    std::fs::write(&p, "{\n  \"geometry\": {\n    \"kind\": \"orth\",\n    \"q\": 5,,\n").unwrap();
    let (code, r) = orthogeo(&["build", "--config", p.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(r["error"].as_str().unwrap().contains("line 4"), "{r}");
    let ok = write_config(dir.path(), "o.json", &json!({ "geometry": { "kind": "orth", "q": 5, "n": 2 } }));
    assert_eq!(orthogeo(&["verify", "--config", &ok, "--lemma", "nonsense"]).0, 2);
    assert_eq!(orthogeo(&["certify", "--config", &ok]).0, 2, "q below the certificate range");
}

#[test]
fn verify_lemmas() {
    let dir = tempfile::tempdir().unwrap();
    let o52 = write_config(dir.path(), "a.json", &json!({ "geometry": { "kind": "orth", "q": 5, "n": 2 } }));
    let (code, r) = orthogeo(&["verify", "--config", &o52, "--lemma", "pointline", "--exhaustive"]);
    assert_eq!(code, 0);
    assert_eq!(r["mode"], "Exhaustive");
    assert_eq!(r["report"]["violations"], 0);
    let o53 = write_config(dir.path(), "b.json", &json!({ "geometry": { "kind": "orth", "q": 5, "n": 3 } }));
    let (code, r) = orthogeo(&["verify", "--config", &o53, "--lemma", "diameter"]);
    assert_eq!((code, r["diameter"].as_u64()), (0, Some(2)));
    let (code, _) = orthogeo(&["verify", "--config", &o53, "--lemma", "geometryaxioms"]);
    assert_eq!(code, 0);
    for q in [7, 13] {
        let c = write_config(dir.path(), "t.json", &json!({ "geometry": { "kind": "orth", "q": q, "n": 4 }, "verify": { "samples": 300 } }));
        let (code, r) = orthogeo(&["verify", "--config", &c, "--lemma", "typerules"]);
        assert_eq!(code, 0, "{r}");
        assert_eq!(r["q_mod_4"], q % 4);
        assert_eq!(r["by_parity"]["11"]["mismatches"], 0);
    }
    let c = write_config(dir.path(), "l.json", &json!({ "geometry": { "kind": "orth", "q": 11, "n": 3 }, "verify": { "samples": 50 } }));
    let (code, r) = orthogeo(&["verify", "--config", &c, "--lemma", "linecounts"]);
    assert_eq!(code, 0);
    assert!(r["min_elliptic"].as_u64() >= r["elliptic_bound"].as_u64());
}

#[test]
fn certificates_are_emitted_replayed_and_tamper_evident() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &json!({ "geometry": { "kind": "orth", "q": 11, "n": 4, "hall": "standard+" }, "certify": { "count": 100 } }),
    );
    let out = dir.path().join("certs");
    let (code, _) = orthogeo(&["certify", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "5"]);
    assert_eq!(code, 0);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["certificates"]["verified"], 100);
    let first = out.join("cert-00000.json");
    let (code, r) = orthogeo(&["replay", first.to_str().unwrap(), out.join("cert-00099.json").to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(r["replayed"], 2);

    let mut cert: Value = serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();
    let moves = cert["certificate"]["moves"].as_array_mut().unwrap();
    let last = moves.len() - 1;
    moves.remove(last);
    let tampered = dir.path().join("tampered.json");
    std::fs::write(&tampered, cert.to_string()).unwrap();
    let (code, r) = orthogeo(&["certify", "--replay", tampered.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(r["results"][0]["replay"]["ok"], false);
}

#[test]
fn pentagon_batch_q13() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "p.json",
        &json!({ "geometry": { "kind": "orth", "q": 13, "n": 4, "hall": "standard+" },
                 "certify": { "shapes": ["pentagon"], "count": 20 } }),
    );
    let (code, r) = orthogeo(&["certify", "--config", &cfg]);
    assert_eq!(code, 0);
    assert_eq!(r["certificates"]["verified"], 20);
}

#[test]
fn identical_seed_gives_identical_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &json!({ "geometry": { "kind": "orth", "q": 11, "n": 3, "sign": "-", "hall": "both_planes" },
                 "certify": { "shapes": ["triangle", "cycle"], "count": 5 }, "seed": 9 }),
    );
    let run = |name: &str| {
        let out = dir.path().join(name);
        assert_eq!(orthogeo(&["certify", "--config", &cfg, "--out", out.to_str().unwrap()]).0, 0);
        let mut files: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        files.iter().map(|f| std::fs::read(f).unwrap()).collect::<Vec<_>>()
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a.len(), 11);
    assert_eq!(a, b);
}

#[test]
fn amalgam_audits() {
    let dir = tempfile::tempdir().unwrap();
    let tet = write_config(dir.path(), "t.json", &json!({ "geometry": { "kind": "fixture", "name": "tetrahedron" } }));
    let (code, r) = orthogeo(&["amalgam", "--config", &tet, "--action", "tits"]);
    assert_eq!(code, 0);
    assert_eq!(r["tits"]["universal_order"], 24);
    assert_eq!(r["tits"]["conclusion"], "isomorphism");
    let (code, r) = orthogeo(&["amalgam", "--config", &tet, "--action", "present"]);
    assert_eq!(code, 0);
    assert_eq!(r["parabolics"].as_array().unwrap().len(), 7);

    let chain = write_config(
        dir.path(),
        "s.json",
        &json!({ "geometry": { "kind": "fixture", "name": "tetrahedron" }, "amalgam": { "shape": { "rank_at_most": 1 } } }),
    );
    let (code, r) = orthogeo(&["amalgam", "--config", &chain, "--action", "shape-reduce"]);
    assert_eq!(code, 1);
    let steps = r["shape_reduction"]["steps"].as_array().unwrap();
    assert_eq!(steps[0]["universal_order"], 24);
    assert_eq!(steps.last().unwrap()["verdict"], "not_simply_connected");

    let hemi = write_config(dir.path(), "h.json", &json!({ "geometry": { "kind": "fixture", "name": "hemi_octahedron" } }));
    let (code, r) = orthogeo(&["amalgam", "--config", &hemi, "--action", "cover"]);
    assert_eq!((code, r["index"].as_u64(), r["isomorphism"].as_bool()), (0, Some(2), Some(false)));
    assert_eq!(orthogeo(&["amalgam", "--config", &hemi, "--action", "tits", "--cap", "10"]).0, 4);

    let orth = write_config(
        dir.path(),
        "o.json",
        &json!({ "geometry": { "kind": "orth", "q": 11, "n": 4, "hall": "standard+" }, "amalgam": { "certificates": 10 } }),
    );
    let (code, r) = orthogeo(&["amalgam", "--config", &orth, "--action", "tits"]);
    assert_eq!(code, 0);
    assert_eq!(r["tits"]["method"], "certificates");
    assert_eq!(r["tits"]["conclusion"], "isomorphism");

    let spec = write_config(
        dir.path(),
        "a.json",
        &json!({ "amalgam": { "spec": {
            "groups": [
                { "name": "H", "level": 0, "degree": 3, "generators": [[1, 0, 2]] },
                { "name": "A", "level": 1, "degree": 3, "generators": [[1, 0, 2], [0, 2, 1]] }
            ],
            "identifications": [ { "from": "H", "to": "A", "images": [[1, 0, 2]] } ]
        } } }),
    );
    let (code, r) = orthogeo(&["amalgam", "--config", &spec, "--action", "enumerate"]);
    assert_eq!((code, r["universal_order"].as_u64()), (0, Some(6)));
}
