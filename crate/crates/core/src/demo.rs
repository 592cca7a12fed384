//! Demo connections and bigons shared by tests, the acceptance suite and the shipped configs.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::algebra2group::{MatrixCrossedModule, MatrixFamily};
use crate::dsl::parse;
use crate::forms::{BField, Coefficients, TwoConnection};
use crate::geometry::{Chart, DslMap, Map};

/// Bigon coordinates in the `(x1, x2)` plane, `u` the homotopy and `v` the path parameter.
pub const PLANE_BIGONS: [(&str, [&str; 2]); 6] = [
    ("lens", ["v", "0.6*u*sin(pi*v)"]),
    ("tilted", ["0.8*v", "0.5*v + 0.4*u*sin(pi*v)"]),
    ("wave", ["v + 0.1*u*sin(2*pi*v)", "0.5*u*sin(pi*v)^2"]),
    ("crescent", ["v - 0.5", "0.15*(u*u + u)*sin(pi*v) - 0.2"]),
    ("arc", ["cos(pi*v/2)*(0.5 + 0.2*u*sin(pi*v))", "sin(pi*v/2)*(0.5 + 0.2*u*sin(pi*v))"]),
    ("dip", ["0.7*v", "-0.3*u*sin(pi*v)*(1 + 0.5*v)"]),
];

/// Boundary-fixing reparameterizations of the unit square, as `(u, v)` maps.
pub const THIN_REPARAMETERIZATIONS: [(&str, [&str; 2]); 5] = [
    ("quadratic homotopy", ["u*u", "v"]),
    ("wobbled path", ["u", "v + 0.1*sin(2*pi*v)"]),
    ("sheared homotopy", ["u + 0.3*u*(1 - u)*v", "v"]),
    ("eased path", ["u", "v*v*(3 - 2*v)"]),
    ("mixed", ["u", "v + 0.15*sin(pi*v)*u*(1 - u)"]),
];

pub fn reparameterizations() -> Vec<(&'static str, Map)> {
    THIN_REPARAMETERIZATIONS
        .iter()
        .map(|(name, c)| {
            let exprs = c.iter().map(|s| parse(s).expect("reparameterization parses")).collect();
            let m: Map = Arc::new(DslMap::new(2, exprs).expect("reparameterization arity"));
            (*name, m)
        })
        .collect()
}

/// Third coordinate appended in three-dimensional charts.
pub const LIFT: &str = "0.25*u*sin(pi*v)";

pub fn bigon_sources(dim: usize) -> Vec<(&'static str, Vec<String>)> {
    PLANE_BIGONS
        .iter()
        .map(|(name, c)| {
            let mut v: Vec<String> = c.iter().map(|s| s.to_string()).collect();
            if dim == 3 {
                v.push(LIFT.to_string());
            }
            (*name, v)
        })
        .collect()
}

pub fn bigons(dim: usize) -> Vec<(&'static str, Map)> {
    bigon_sources(dim)
        .into_iter()
        .map(|(name, src)| {
            let exprs = src.iter().map(|s| parse(s).expect("demo bigon parses")).collect();
            let m: Map = Arc::new(DslMap::new(2, exprs).expect("demo bigon arity"));
            (name, m)
        })
        .collect()
}

/// `a` coefficients and the extra `b` part, as DSL strings.
pub struct DemoSource {
    pub dim: usize,
    pub a: Vec<Vec<&'static str>>,
    pub b: BSource,
}

pub enum BSource {
    FakeFlat(Vec<Vec<&'static str>>),
    Explicit(Vec<Vec<&'static str>>),
}

pub fn source(family: MatrixFamily) -> DemoSource {
    use alloc::vec;
    match family {
        MatrixFamily::Su2IdConj => DemoSource {
            dim: 2,
            a: vec![vec!["0.6*x2", "0.3", "0.2*x1*x2"], vec!["0.1", "-0.5*x1", "0.4 + 0.3*x1*x1"]],
            b: BSource::FakeFlat(vec![vec!["0", "0", "0"]]),
        },
        MatrixFamily::U1Id => DemoSource {
            dim: 2,
            a: vec![vec!["-0.35*x2"], vec!["0.35*x1"]],
            b: BSource::FakeFlat(vec![vec!["0"]]),
        },
        MatrixFamily::U1Trivial => DemoSource {
            dim: 3,
            a: vec![vec!["0.2*x2"], vec!["0.2*x1"], vec!["0"]],
            b: BSource::Explicit(vec![vec!["0.5"], vec!["x1"], vec!["-x3"]]),
        },
        MatrixFamily::U2ToPu2 => DemoSource {
            dim: 3,
            a: vec![
                vec!["0.4*x2", "0.2", "0.1*x3"],
                vec!["0", "0.3*x1*x3", "-0.2"],
                vec!["0.1*x1", "0", "0.5*x2"],
            ],
            b: BSource::FakeFlat(vec![vec!["0", "0", "0", "x3*x3"], vec!["0", "0", "0", "0"], vec!["0", "0", "0", "x1"]]),
        },
    }
}

fn coeffs(rows: &[Vec<&str>]) -> Vec<Coefficients> {
    rows.iter().map(|r| Coefficients::new(r.iter().map(|s| parse(s).expect("demo field parses")).collect())).collect()
}

pub fn connection(family: MatrixFamily) -> TwoConnection {
    let src = source(family);
    let cm = Arc::new(MatrixCrossedModule::new(family));
    let b = match &src.b {
        BSource::FakeFlat(e) => BField::FakeFlat { extra: coeffs(e) },
        BSource::Explicit(e) => BField::Dsl(coeffs(e)),
    };
    TwoConnection::new(Chart::new(src.dim), cm, coeffs(&src.a), b).expect("demo connection is well formed")
}
