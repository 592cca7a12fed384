use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use twogauge_core::algebra2group::*;
use twogauge_core::dsl::{parse, BinOp, Expr, Func, Var};
use twogauge_core::forms::{DslOneForm, ExpField, Side};
use twogauge_core::geometry::{reverse_path, straight_path, DslMap, Map};
use twogauge_core::matrix::CMat;
use twogauge_core::morphisms::OneMorphism;
use twogauge_core::transport::path_ordered_exp;
use twogauge_core::{demo, forms::Coefficients};

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0.0f64..100.0).prop_map(Expr::Num),
        Just(Expr::Pi),
        (0usize..3).prop_map(|i| Expr::Var(Var::X(i))),
        Just(Expr::Var(Var::U)),
        Just(Expr::Var(Var::T)),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        let op = prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div), Just(BinOp::Pow)];
        let func = prop_oneof![Just(Func::Sin), Just(Func::Exp), Just(Func::Sqrt), Just(Func::Tanh), Just(Func::Log)];
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (op, inner.clone(), inner.clone()).prop_map(|(o, l, r)| Expr::Bin(o, Box::new(l), Box::new(r))),
            (func, inner).prop_map(|(f, e)| Expr::Call(f, Box::new(e))),
        ]
    })
}

const MATRIX_FAMILIES: [MatrixFamily; 2] = [MatrixFamily::Su2IdConj, MatrixFamily::U2ToPu2];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printed_expressions_parse_back(e in expr()) {
        let text = e.to_string();
        prop_assert_eq!(parse(&text).unwrap(), e);
    }

    #[test]
    fn crossed_module_axioms_hold_pointwise(seed in any::<u64>(), which in 0usize..2) {
        let cm = MatrixCrossedModule::new(MATRIX_FAMILIES[which]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, h, h2) = (cm.sample_g(&mut rng), cm.sample_h(&mut rng), cm.sample_h(&mut rng));
        let equivariance = cm.t(&CrossedModule::alpha(&cm, &g, &h)).dist(&(&(&g * &cm.t(&h)) * &g.adjoint()));
        let peiffer = CrossedModule::alpha(&cm, &cm.t(&h), &h2).dist(&(&(&h * &h2) * &h.adjoint()));
        prop_assert!(equivariance <= 1e-9 && peiffer <= 1e-9, "{equivariance:e} {peiffer:e}");
    }

    #[test]
    fn interchange_law(seed in any::<u64>(), which in 0usize..2) {
        let cm = MatrixCrossedModule::new(MATRIX_FAMILIES[which]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cell = |g: Option<CMat>| {
            let g = g.unwrap_or_else(|| cm.sample_g(&mut rng));
            TwoGroupElement::new(g, cm.sample_h(&mut rng))
        };
        let x1 = cell(None);
        let y1 = cell(Some(target(&cm, &x1)));
        let x2 = cell(None);
        let y2 = cell(Some(target(&cm, &x2)));
        let lhs = two_group_multiply(&cm, &two_group_compose(&cm, &y1, &x1).unwrap(), &two_group_compose(&cm, &y2, &x2).unwrap()).unwrap();
        let rhs = two_group_compose(&cm, &two_group_multiply(&cm, &y1, &y2).unwrap(), &two_group_multiply(&cm, &x1, &x2).unwrap()).unwrap();
        prop_assert!(lhs.g.dist(&rhs.g) <= 1e-9 && lhs.h.dist(&rhs.h) <= 1e-9);
    }

    #[test]
    fn exp_log_round_trip(c in prop::array::uniform3(-1.0f64..1.0)) {
        let cm = MatrixCrossedModule::new(MatrixFamily::Su2IdConj);
        let x = cm.g_alg().from_coords(&c);
        let back = cm.log_g(&cm.exp_g(&x)).unwrap();
        prop_assert!(back.dist(&x) <= 1e-10);
    }
}

fn coeff_strategy(dim: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec((-1.0f64..1.0, 0usize..2, -1.0f64..1.0), dim)
        .prop_map(|v| v.into_iter().map(|(a, i, b)| format!("{a} + {b}*x{}", i + 1)).collect())
}

fn morphism(cm: &Arc<MatrixCrossedModule>, g: &[String], phi: &[Vec<String>]) -> OneMorphism {
    let co = |v: &[String]| Coefficients::new(v.iter().map(|s| parse(s).unwrap()).collect());
    let gf = ExpField::new(cm.clone(), Side::G, co(g), 2).unwrap();
    let pf = DslOneForm::new(cm.h_alg(), phi.iter().map(|r| co(r)).collect(), 2).unwrap();
    OneMorphism::new(cm.clone(), Arc::new(gf), Arc::new(pf))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn one_morphism_composition_associates(
        gs in prop::collection::vec(coeff_strategy(3), 3),
        phis in prop::collection::vec(prop::collection::vec(coeff_strategy(3), 2), 3),
        x in prop::array::uniform2(-1.0f64..1.0),
    ) {
        let cm = Arc::new(MatrixCrossedModule::new(MatrixFamily::Su2IdConj));
        let m: Vec<OneMorphism> = (0..3).map(|i| morphism(&cm, &gs[i], &phis[i])).collect();
        let left = m[2].after(&m[1]).after(&m[0]);
        let right = m[2].after(&m[1].after(&m[0]));
        prop_assert!(left.g.value(&x).dist(&right.g.value(&x)) <= 1e-9);
        for (a, b) in left.phi.components(&x).iter().zip(right.phi.components(&x)) {
            prop_assert!(a.dist(&b) <= 1e-9);
        }
        prop_assert!(cm.g_group().membership_defect(&left.g.value(&x)) <= 1e-10);
    }

    #[test]
    fn reversed_path_inverts_transport(a in prop::array::uniform2(-0.8f64..0.8), b in prop::array::uniform2(-0.8f64..0.8), bend in -0.5f64..0.5) {
        let conn = demo::connection(MatrixFamily::Su2IdConj);
        let src = [format!("{} + ({})*u", a[0], b[0] - a[0]), format!("{} + ({})*u + {bend}*sin(pi*u)", a[1], b[1] - a[1])];
        let path: Map = Arc::new(DslMap::new(1, src.iter().map(|s| parse(s).unwrap()).collect()).unwrap());
        let there = path_ordered_exp(&conn, &path, 32).unwrap().value;
        let back = path_ordered_exp(&conn, &reverse_path(&path), 32).unwrap().value;
        prop_assert!((&back * &there).dist(&CMat::identity(2)) <= 1e-9);
        let straight = path_ordered_exp(&conn, &straight_path(&a, &b), 32).unwrap();
        prop_assert!(straight.group_defect <= 1e-10);
    }
}
