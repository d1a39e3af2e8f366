//! Statistics kernel against values from an independent implementation
//! (see `data/gen_reference.py`).

use std::fs;
use std::path::PathBuf;

use serde::Deserialize;
use sleepmine::stats::{reg_inc_beta, welch_t};

fn data(name: &str) -> String {
    fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)).unwrap()
}

#[derive(Deserialize)]
struct WelchCase {
    a: Vec<f64>,
    b: Vec<f64>,
    t: f64,
    df: f64,
    p: f64,
    p_hp: f64,
}

#[derive(Deserialize)]
struct BetaCase {
    x: f64,
    a: f64,
    b: f64,
    v: f64,
}

#[test]
fn welch_matches_reference() {
    let cases: Vec<WelchCase> = serde_json::from_str(&data("welch_reference.json")).unwrap();
    assert_eq!(cases.len(), 100);
    for (i, c) in cases.iter().enumerate() {
        let r = welch_t(&c.a, &c.b).unwrap();
        assert!((r.t - c.t).abs() <= 1e-9, "case {i}: t {} vs {}", r.t, c.t);
        assert!((r.df - c.df).abs() <= 1e-9, "case {i}: df {} vs {}", r.df, c.df);
        assert!((r.p - c.p).abs() <= 1e-9, "case {i}: p {} vs {}", r.p, c.p);
        assert!((r.p - c.p_hp).abs() <= 1e-12, "case {i}: p {} vs {}", r.p, c.p_hp);
        assert_eq!((r.n_a, r.n_b), (c.a.len(), c.b.len()));
    }
}

#[test]
fn incomplete_beta_matches_reference() {
    let cases: Vec<BetaCase> = serde_json::from_str(&data("inc_beta_reference.json")).unwrap();
    for c in cases {
        let v = reg_inc_beta(c.x, c.a, c.b).unwrap();
        assert!((v - c.v).abs() <= 1e-12, "I_{}({}, {}) = {v}, want {}", c.x, c.a, c.b, c.v);
    }
}
