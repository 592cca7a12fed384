//! Gauge 1-morphisms `(g, φ)` and 2-morphisms `a` between 2-connections on a chart.
//!
//! A 1-morphism is stored by its section values: the bundle map is
//! `F(x, k) = (x, g(x)⁻¹·k)` and `φ` is an `𝔥`-valued 1-form. The transformed
//! connection is
//! `a' = Ad_{g⁻¹}(a + dg·g⁻¹ + t_*φ)`,
//! `b' = (α_{g⁻¹})_*(b + dφ + [φ ∧ φ] + α_*(a ∧ φ))`.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::algebra2group::MatrixCrossedModule;
use crate::forms::{
    bundle_form_a, one_form_on, pairs, ConnectionField, FnGroupField, FnOneForm, GroupField, OneFormField,
    ProductField,
};
use crate::geometry::{bigon_source, bigon_target, Chart, Map};
use crate::matrix::CMat;
use crate::transport::{
    lift_frames_dense, magnus_left, path_ordered_exp, surface_transport, BasePoint, DefectReport, TransportError,
    MIN_STEPS,
};

pub type SharedConnection = Arc<dyn ConnectionField>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MorphismError {
    #[error("the second connection is not the gauge transform of the first (defect {0:e})")]
    MismatchedConnections(f64),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// A gauge 1-morphism `(g, φ)`.
#[derive(Clone)]
pub struct OneMorphism {
    cm: Arc<MatrixCrossedModule>,
    pub g: Arc<dyn GroupField>,
    pub phi: Arc<dyn OneFormField>,
}

impl OneMorphism {
    pub fn new(cm: Arc<MatrixCrossedModule>, g: Arc<dyn GroupField>, phi: Arc<dyn OneFormField>) -> Self {
        OneMorphism { cm, g, phi }
    }

    pub fn identity(cm: Arc<MatrixCrossedModule>, dim: usize) -> Self {
        let id = cm.g_identity();
        let zero = cm.h_alg().zero();
        OneMorphism {
            cm,
            g: Arc::new(FnGroupField(move |_: &[f64]| id.clone())),
            phi: Arc::new(FnOneForm(move |_: &[f64]| alloc::vec![zero.clone(); dim])),
        }
    }

    pub fn module(&self) -> &Arc<MatrixCrossedModule> {
        &self.cm
    }

    /// `self ∘ first`: transform by `first`, then by `self`.
    ///
    /// The composite is `(g_first·g_self, φ_first + (α_{g_first})_* φ_self)`.
    pub fn after(&self, first: &OneMorphism) -> OneMorphism {
        let (cm, g1, p1, p2) = (self.cm.clone(), first.g.clone(), first.phi.clone(), self.phi.clone());
        let phi = FnOneForm(move |x: &[f64]| {
            let g = g1.value(x);
            p1.components(x).iter().zip(p2.components(x)).map(|(a, b)| a + &cm.alpha_group_star(&g, &b)).collect()
        });
        OneMorphism { cm: self.cm.clone(), g: Arc::new(ProductField(first.g.clone(), self.g.clone())), phi: Arc::new(phi) }
    }

    /// Fibre image of a bundle point.
    pub fn on_point(&self, p: &BasePoint) -> BasePoint {
        BasePoint::new(p.x.clone(), &self.g.value(&p.x).adjoint() * &p.g)
    }

    /// Worst distance of `g(x)` from the group over a grid.
    pub fn group_defect(&self, grid: &[Vec<f64>]) -> f64 {
        grid.iter().map(|x| self.cm.g_group().membership_defect(&self.g.value(x))).fold(0.0, f64::max)
    }

    /// As a morphism of the fibre 2-torsor over `x`: left multiplication by `g(x)⁻¹`.
    pub fn fibre_morphism(&self, x: &[f64], from: u32, to: u32) -> crate::torsor2::TorsorMorphism<CMat> {
        crate::torsor2::TorsorMorphism { from, to, image_of_base: self.g.value(x).adjoint() }
    }
}

/// A 2-morphism: an `H`-valued field `a`. It runs from `apply_twomorphism(m, a)` back to `m`.
#[derive(Clone)]
pub struct TwoMorphismA {
    pub a: Arc<dyn GroupField>,
}

impl TwoMorphismA {
    pub fn new(a: Arc<dyn GroupField>) -> Self {
        TwoMorphismA { a }
    }

    /// Pointwise product `next·self`, the composite of applying `self` and then `next`.
    pub fn then(&self, next: &TwoMorphismA) -> TwoMorphismA {
        TwoMorphismA { a: Arc::new(ProductField(next.a.clone(), self.a.clone())) }
    }

    pub fn group_defect(&self, cm: &MatrixCrossedModule, grid: &[Vec<f64>]) -> f64 {
        grid.iter().map(|x| cm.h_group().membership_defect(&self.a.value(x))).fold(0.0, f64::max)
    }

    /// Horizontal composite with `other` across the first 1-morphism `m1`: `a·(α_{g₁})(a_other)`.
    pub fn horizontal(&self, cm: Arc<MatrixCrossedModule>, m1: &OneMorphism, other: &TwoMorphismA) -> TwoMorphismA {
        let (a1, a2, g1) = (self.a.clone(), other.a.clone(), m1.g.clone());
        TwoMorphismA {
            a: Arc::new(FnGroupField(move |x: &[f64]| &a1.value(x) * &cm.alpha(&g1.value(x), &a2.value(x)))),
        }
    }
}

/// The connection `(a', b')` obtained from a base connection by a 1-morphism.
pub struct GaugeTransformed {
    base: SharedConnection,
    m: OneMorphism,
}

impl GaugeTransformed {
    pub fn morphism(&self) -> &OneMorphism {
        &self.m
    }
}

impl ConnectionField for GaugeTransformed {
    fn chart(&self) -> &Chart {
        self.base.chart()
    }
    fn module(&self) -> &Arc<MatrixCrossedModule> {
        self.base.module()
    }
    fn a(&self, x: &[f64]) -> Vec<CMat> {
        let cm = self.module();
        let g = self.m.g.value(x);
        let gi = g.adjoint();
        let dg = self.m.g.partials(x);
        let phi = self.m.phi.components(x);
        self.base
            .a(x)
            .iter()
            .enumerate()
            .map(|(k, ak)| {
                let inner = &(ak + &(&dg[k] * &gi)) + &cm.t_star(&phi[k]);
                &(&gi * &inner) * &g
            })
            .collect()
    }
    fn b(&self, x: &[f64]) -> Vec<CMat> {
        let cm = self.module();
        let d = self.chart().dim;
        let gi = self.m.g.value(x).adjoint();
        let phi = self.m.phi.components(x);
        let dphi = self.m.phi.partials(x);
        let a = self.base.a(x);
        let b = self.base.b(x);
        pairs(d)
            .into_iter()
            .zip(b)
            .map(|((k, l), bkl)| {
                let mut v = &bkl + &(&dphi[k][l] - &dphi[l][k]);
                v = &v + &CMat::commutator(&phi[k], &phi[l]);
                v = &v + &(&cm.alpha_star(&a[k], &phi[l]) - &cm.alpha_star(&a[l], &phi[k]));
                cm.alpha_group_star(&gi, &v)
            })
            .collect()
    }
}

pub fn gauge_transform(conn: SharedConnection, m: &OneMorphism) -> GaugeTransformed {
    GaugeTransformed { base: conn, m: m.clone() }
}

/// `ρ_H(γ)(p)`: solves `ρ' = −(α_{(g(t)g₀)⁻¹})_* φ(γ')·ρ` along the horizontal lift `g(t)g₀` of `γ`.
pub fn rho_from_phi<C: ConnectionField + ?Sized>(conn: &C, m: &OneMorphism, path: &Map, p: &BasePoint, steps: usize) -> Result<CMat, TransportError> {
    if steps < MIN_STEPS {
        return Err(TransportError::TooFewSteps { min: MIN_STEPS, got: steps });
    }
    let start = path.eval(&[0.0]);
    if start.iter().zip(&p.x).any(|(a, b)| (a - b).abs() > 1e-9) {
        return Err(TransportError::BasepointMismatch { start });
    }
    let cm = conn.module();
    let sampler = |t: f64| (path.eval(&[t]), path.jacobian(&[t]));
    let (_, gauss) = lift_frames_dense(conn, &sampler, steps)?;
    let dt = 1.0 / steps as f64;
    let nodes = [0.5 - 0.288_675_134_594_812_9, 0.5 + 0.288_675_134_594_812_9];
    let mut rho = cm.h_identity();
    for (j, frames) in gauss.iter().enumerate() {
        let gen = |i: usize| {
            let t = (j as f64 + nodes[i]) * dt;
            let (x, v) = sampler(t);
            let phi = one_form_on(&m.phi.components(&x), &v);
            cm.alpha_group_star(&(&frames[i] * &p.g).adjoint(), &phi).scale_re(-1.0)
        };
        rho = &magnus_left(&gen(0), &gen(1), dt) * &rho;
        if !rho.is_finite() {
            return Err(TransportError::NonFinite { at: alloc::vec![j as f64 * dt] });
        }
    }
    Ok(cm.h_group().project(&rho).unwrap_or(rho))
}

/// Naturality of 1-transport under a gauge 1-morphism:
/// `tra_{a'}(γ)(F(p)) = F(tra_a(γ)(p))·t(ρ_H(γ)(p))`, compared on fibre elements.
pub fn verify_gauge_naturality(conn: &SharedConnection, m: &OneMorphism, path: &Map, p: &BasePoint, steps: usize) -> Result<DefectReport, TransportError> {
    let transformed = gauge_transform(conn.clone(), m);
    let cm = conn.module();
    let fp = m.on_point(p);
    let lhs = &path_ordered_exp(&transformed, path, steps)?.value * &fp.g;
    let end = path.eval(&[1.0]);
    let moved = &path_ordered_exp(conn.as_ref(), path, steps)?.value * &p.g;
    let rho = rho_from_phi(conn.as_ref(), m, path, p, steps)?;
    let rhs = &(&m.g.value(&end).adjoint() * &moved) * &cm.t(&rho);
    let defect = lhs.dist(&rhs);
    Ok(DefectReport { lhs, rhs, defect, steps, order: None })
}

/// Compatibility of 2-transport with a 1-morphism:
/// `ρ_H(γ_src)(p)·tra'²_H(Σ, F(p)) = tra²_H(Σ, p)·ρ_H(γ_tgt)(p)`.
pub fn verify_onemorphism_compat(
    conn: &SharedConnection,
    transformed: &dyn ConnectionField,
    m: &OneMorphism,
    bigon: &Map,
    p: &BasePoint,
    steps: usize,
) -> Result<DefectReport, MorphismError> {
    let expected = gauge_transform(conn.clone(), m);
    let mut mismatch: f64 = 0.0;
    for (s, t) in [(0.25, 0.5), (0.5, 0.25), (0.75, 0.75)] {
        let x = bigon.eval(&[s, t]);
        for (u, v) in expected.a(&x).iter().zip(transformed.a(&x)) {
            mismatch = mismatch.max(u.dist(&v));
        }
    }
    if mismatch > 1e-6 {
        return Err(MorphismError::MismatchedConnections(mismatch));
    }
    let h = surface_transport(conn.as_ref(), bigon, p, steps, steps)?.h;
    let h_prime = surface_transport(transformed, bigon, &m.on_point(p), steps, steps)?.h;
    let rho_src = rho_from_phi(conn.as_ref(), m, &bigon_source(bigon), p, steps)?;
    let rho_tgt = rho_from_phi(conn.as_ref(), m, &bigon_target(bigon), p, steps)?;
    let lhs = &rho_src * &h_prime;
    let rhs = &h * &rho_tgt;
    let defect = lhs.dist(&rhs);
    Ok(DefectReport { lhs, rhs, defect, steps, order: None })
}

/// Worst defect of `F*A' = A + t_*((α_{k⁻¹})_* φ)` over grid points, fibre points `k`, and
/// tangents `(e_j, k·ξ)`.
pub fn verify_pullback_a(conn: &SharedConnection, m: &OneMorphism, grid: &[Vec<f64>], fibre: &[CMat], xi: &CMat) -> f64 {
    let transformed = gauge_transform(conn.clone(), m);
    let cm = conn.module();
    let d = conn.chart().dim;
    let mut worst: f64 = 0.0;
    for x in grid {
        let g = m.g.value(x);
        let gi = g.adjoint();
        let dg = m.g.partials(x);
        let phi = m.phi.components(x);
        for k in fibre {
            for j in 0..d {
                let mut v = alloc::vec![0.0; d];
                v[j] = 1.0;
                let k_dot = k * xi;
                // d/dε of g(x + εe_j)⁻¹·k·exp(εξ)
                let pushed = &(&(&(&gi * &dg[j]) * &gi) * k).scale_re(-1.0) + &(&gi * &k_dot);
                let lhs = bundle_form_a(&transformed, x, &(&gi * k), &v, &pushed);
                let base = bundle_form_a(conn.as_ref(), x, k, &v, &k_dot);
                let rhs = &base + &cm.t_star(&cm.alpha_group_star(&k.adjoint(), &phi[j]));
                worst = worst.max(lhs.dist(&rhs));
            }
        }
    }
    worst
}

/// Which variant of the `φ` update under a 2-morphism to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoMorphismForm {
    /// `φ' = Ad_a φ − (δα_a)(A)·a⁻¹ − da·a⁻¹`.
    Definition,
    /// `φ' = Ad_a φ − (δα_a)(A)·a⁻¹ + da·a⁻¹`.
    Lemma,
}

/// The 1-morphism `(t(a)·g, φ')` reached from `m` through the 2-morphism `a`.
pub fn apply_twomorphism(conn: &SharedConnection, m: &OneMorphism, a: &TwoMorphismA, form: TwoMorphismForm) -> OneMorphism {
    let cm = m.module().clone();
    let (af, cm1) = (a.a.clone(), cm.clone());
    let ta: Arc<dyn GroupField> = Arc::new(FnGroupField(move |x: &[f64]| cm1.t(&af.value(x))));
    let (af, phi, base) = (a.a.clone(), m.phi.clone(), conn.clone());
    let cm2 = cm.clone();
    let sign = match form {
        TwoMorphismForm::Definition => -1.0,
        TwoMorphismForm::Lemma => 1.0,
    };
    let new_phi = FnOneForm(move |x: &[f64]| {
        let av = af.value(x);
        let ai = av.adjoint();
        let da = af.partials(x);
        let conn_a = base.a(x);
        phi.components(x)
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let mut out = &(&av * p) * &ai;
                out = &out - &(&cm2.delta_alpha(&av, &conn_a[k]) * &ai);
                out.axpy(sign, &(&da[k] * &ai));
                out
            })
            .collect()
    });
    OneMorphism { cm, g: Arc::new(ProductField(ta, m.g.clone())), phi: Arc::new(new_phi) }
}

/// Worst difference between the connections produced by two 1-morphisms over a grid.
pub fn target_connection_defect(conn: &SharedConnection, m1: &OneMorphism, m2: &OneMorphism, grid: &[Vec<f64>]) -> f64 {
    let (c1, c2) = (gauge_transform(conn.clone(), m1), gauge_transform(conn.clone(), m2));
    let mut worst: f64 = 0.0;
    for x in grid {
        for (u, v) in c1.a(x).iter().zip(c2.a(x)) {
            worst = worst.max(u.dist(&v));
        }
        for (u, v) in c1.b(x).iter().zip(c2.b(x)) {
            worst = worst.max(u.dist(&v));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra2group::{su2_basis, MatrixFamily};
    use crate::dsl::parse;
    use crate::forms::{fake_flatness_residual, grid, BField, Coefficients, DslOneForm, ExpField, Side, TwoConnection};
    use crate::geometry::{straight_path, DslMap};
    use crate::matrix::{c, C64};

    fn co(src: &[&str]) -> Coefficients {
        Coefficients::new(src.iter().map(|s| parse(s).unwrap()).collect())
    }

    fn su2_setup() -> (SharedConnection, OneMorphism) {
        let cm = Arc::new(MatrixCrossedModule::new(MatrixFamily::Su2IdConj));
        let conn = TwoConnection::new(
            Chart::new(2),
            cm.clone(),
            alloc::vec![co(&["0.6*x2", "0.3", "0.2*x1*x2"]), co(&["0.1", "-0.5*x1", "0.4 + 0.3*x1*x1"])],
            BField::FakeFlat { extra: alloc::vec![Coefficients::zero(3)] },
        )
        .unwrap();
        let g = ExpField::new(cm.clone(), Side::G, co(&["0.3*x1", "0.2*x2*x2", "0.5 - 0.1*x1*x2"]), 2).unwrap();
        let phi = DslOneForm::new(cm.h_alg(), alloc::vec![co(&["0.2*x2", "0.1", "0"]), co(&["0", "0.3*x1", "-0.2"])], 2).unwrap();
        (Arc::new(conn), OneMorphism::new(cm, Arc::new(g), Arc::new(phi)))
    }

    #[test]
    fn identity_morphism_fixes_connection() {
        let (conn, m) = su2_setup();
        let id = OneMorphism::identity(m.module().clone(), 2);
        let t = gauge_transform(conn.clone(), &id);
        let x = [0.3, 0.4];
        for (u, v) in t.a(&x).iter().zip(conn.a(&x)) {
            assert!(u.dist(&v) < 1e-15);
        }
        for (u, v) in t.b(&x).iter().zip(conn.b(&x)) {
            assert!(u.dist(&v) < 1e-12);
        }
    }

    #[test]
    fn gauge_preserves_fake_flatness_and_composes() {
        let (conn, m) = su2_setup();
        let t = gauge_transform(conn.clone(), &m);
        let pts = grid(&[(-0.5, 0.5), (-0.5, 0.5)], 4);
        assert!(fake_flatness_residual(&t, &pts).max < 1e-7);
        let cm = m.module().clone();
        let g2 = ExpField::new(cm.clone(), Side::G, co(&["x2", "0", "0.2"]), 2).unwrap();
        let phi2 = DslOneForm::new(cm.h_alg(), alloc::vec![co(&["0", "0", "x1"]), co(&["0.1", "0", "0"])], 2).unwrap();
        let m2 = OneMorphism::new(cm, Arc::new(g2), Arc::new(phi2));
        let twice: SharedConnection = Arc::new(gauge_transform(Arc::new(t), &m2));
        let once = gauge_transform(conn, &m2.after(&m));
        for x in &pts {
            for (u, v) in twice.a(x).iter().zip(once.a(x)) {
                assert!(u.dist(&v) < 1e-9);
            }
            for (u, v) in twice.b(x).iter().zip(once.b(x)) {
                assert!(u.dist(&v) < 1e-7);
            }
        }
    }

    #[test]
    fn abelian_gauge_term() {
        let cm = Arc::new(MatrixCrossedModule::new(MatrixFamily::U1Id));
        let conn: SharedConnection = Arc::new(
            TwoConnection::new(Chart::new(2), cm.clone(), alloc::vec![co(&["x2"]), co(&["0"])], BField::Dsl(alloc::vec![co(&["0.5"])])).unwrap(),
        );
        let g = ExpField::new(cm.clone(), Side::G, co(&["x1*x1*x2"]), 2).unwrap();
        let m = OneMorphism::new(cm.clone(), Arc::new(g), Arc::new(DslOneForm::zero(cm.h_alg(), 2)));
        let t = gauge_transform(conn, &m);
        let x = [0.4, -0.3];
        let a = t.a(&x);
        let expect = [CMat::scalar(c(0.0, x[1] + 2.0 * x[0] * x[1])), CMat::scalar(c(0.0, x[0] * x[0]))];
        assert!(a[0].dist(&expect[0]) < 1e-8 && a[1].dist(&expect[1]) < 1e-8);
    }

    #[test]
    fn abelian_rho_is_a_line_integral() {
        let cm = Arc::new(MatrixCrossedModule::new(MatrixFamily::U1Id));
        let conn = TwoConnection::new(Chart::new(2), cm.clone(), alloc::vec![co(&["x2"]), co(&["1"])], BField::Dsl(alloc::vec![co(&["0"])])).unwrap();
        let phi = DslOneForm::new(cm.h_alg(), alloc::vec![co(&["0.8"]), co(&["0"])], 2).unwrap();
        let m = OneMorphism::new(cm.clone(), Arc::new(ExpField::identity(cm.clone(), Side::G)), Arc::new(phi));
        let p = BasePoint::new(alloc::vec![0.0, 0.0], cm.g_identity());
        let rho = rho_from_phi(&conn, &m, &straight_path(&[0.0, 0.0], &[1.5, 0.0]), &p, 16).unwrap();
        assert!(rho.dist(&CMat::scalar(C64::from_polar(1.0, -1.2))) < 1e-9);
    }

    #[test]
    fn nonabelian_naturality_and_compat() {
        let (conn, m) = su2_setup();
        let cm = m.module().clone();
        let p = BasePoint::new(alloc::vec![0.0, 0.0], cm.exp_g(&su2_basis()[1].scale_re(0.3)));
        let path: Map = Arc::new(DslMap::new(1, alloc::vec![parse("u").unwrap(), parse("sin(2*u)/2").unwrap()]).unwrap());
        let nat = verify_gauge_naturality(&conn, &m, &path, &p, 64).unwrap();
        assert!(nat.defect < 1e-6, "naturality {}", nat.defect);
        let bigon: Map = Arc::new(DslMap::new(2, alloc::vec![parse("v").unwrap(), parse("u*sin(pi*v)").unwrap()]).unwrap());
        let t = gauge_transform(conn.clone(), &m);
        let rep = verify_onemorphism_compat(&conn, &t, &m, &bigon, &p, 48).unwrap();
        assert!(rep.defect < 1e-6, "compat {}", rep.defect);
        let pts = grid(&[(-0.5, 0.5), (-0.5, 0.5)], 3);
        let fibre = [cm.g_identity(), p.g.clone()];
        assert!(verify_pullback_a(&conn, &m, &pts, &fibre, &su2_basis()[2]) < 1e-7);
    }

    #[test]
    fn definition_form_keeps_the_target_connection() {
        let (conn, m) = su2_setup();
        let cm = m.module().clone();
        let a = TwoMorphismA::new(Arc::new(ExpField::new(cm.clone(), Side::H, co(&["0.4*x2", "0.1", "0.3*x1"]), 2).unwrap()));
        let pts = grid(&[(-0.5, 0.5), (-0.5, 0.5)], 3);
        let def = apply_twomorphism(&conn, &m, &a, TwoMorphismForm::Definition);
        let lem = apply_twomorphism(&conn, &m, &a, TwoMorphismForm::Lemma);
        assert!(target_connection_defect(&conn, &m, &def, &pts) < 1e-7);
        assert!(target_connection_defect(&conn, &m, &lem, &pts) > 1e-3);
    }

    #[test]
    fn two_morphisms_compose_pointwise() {
        let (conn, m) = su2_setup();
        let cm = m.module().clone();
        let a1 = TwoMorphismA::new(Arc::new(ExpField::new(cm.clone(), Side::H, co(&["0.4*x2", "0.1", "0"]), 2).unwrap()));
        let a2 = TwoMorphismA::new(Arc::new(ExpField::new(cm.clone(), Side::H, co(&["0", "x1", "0.2"]), 2).unwrap()));
        let step = apply_twomorphism(&conn, &apply_twomorphism(&conn, &m, &a1, TwoMorphismForm::Definition), &a2, TwoMorphismForm::Definition);
        let direct = apply_twomorphism(&conn, &m, &a1.then(&a2), TwoMorphismForm::Definition);
        for x in grid(&[(-0.5, 0.5), (-0.5, 0.5)], 3) {
            assert!(step.g.value(&x).dist(&direct.g.value(&x)) < 1e-12);
            for (u, v) in step.phi.components(&x).iter().zip(direct.phi.components(&x)) {
                assert!(u.dist(&v) < 1e-7);
            }
        }
    }

    #[test]
    fn horizontal_composite_matches_fibre_torsors() {
        use crate::torsor2::{horizontal_compose_eta_h, horizontal_alternative_at, EtaH, Torsor2};
        let (conn, m1) = su2_setup();
        let cm = m1.module().clone();
        let g2 = ExpField::new(cm.clone(), Side::G, co(&["0.2", "x1", "-0.3*x2"]), 2).unwrap();
        let m2 = OneMorphism::new(cm.clone(), Arc::new(g2), Arc::new(DslOneForm::zero(cm.h_alg(), 2)));
        let a1 = TwoMorphismA::new(Arc::new(ExpField::new(cm.clone(), Side::H, co(&["0.4*x2", "0.1", "0"]), 2).unwrap()));
        let a2 = TwoMorphismA::new(Arc::new(ExpField::new(cm.clone(), Side::H, co(&["0", "x1", "0.2"]), 2).unwrap()));
        let comp = a1.horizontal(cm.clone(), &m1, &a2);
        let m1p = apply_twomorphism(&conn, &m1, &a1, TwoMorphismForm::Definition);
        let m2p = apply_twomorphism(&conn, &m2, &a2, TwoMorphismForm::Definition);
        let whole = apply_twomorphism(&conn, &m2.after(&m1), &comp, TwoMorphismForm::Definition);
        for x in grid(&[(-0.5, 0.5), (-0.5, 0.5)], 3) {
            let eta1 = EtaH { from: m1p.fibre_morphism(&x, 0, 1), to: m1.fibre_morphism(&x, 0, 1), at_base: a1.a.value(&x) };
            let eta2 = EtaH { from: m2p.fibre_morphism(&x, 1, 2), to: m2.fibre_morphism(&x, 1, 2), at_base: a2.a.value(&x) };
            let law = horizontal_compose_eta_h(cm.as_ref(), Torsor2::new(0), &eta1, &eta2).unwrap();
            assert!(law.at_base.dist(&comp.a.value(&x)) < 1e-12);
            let base = Torsor2::new(0).base(cm.as_ref());
            let alt = horizontal_alternative_at(cm.as_ref(), &eta1, &eta2, &base);
            assert!(cm.t(&alt).dist(&cm.t(&law.at_base)) < 1e-9);
            assert!(whole.g.value(&x).dist(&m2p.after(&m1p).g.value(&x)) < 1e-12);
        }
    }

    #[test]
    fn rho_is_functorial_under_concatenation() {
        use crate::geometry::concat_paths;
        let (conn, m) = su2_setup();
        let cm = m.module().clone();
        let p = BasePoint::new(alloc::vec![0.0, 0.0], cm.exp_g(&su2_basis()[0].scale_re(0.7)));
        let first = straight_path(&[0.0, 0.0], &[0.5, 0.2]);
        let second = straight_path(&[0.5, 0.2], &[0.3, 0.6]);
        let whole = concat_paths(&first, &second).unwrap();
        let n = 128;
        let moved = BasePoint::new(alloc::vec![0.5, 0.2], &path_ordered_exp(conn.as_ref(), &first, n).unwrap().value * &p.g);
        let r1 = rho_from_phi(conn.as_ref(), &m, &first, &p, n).unwrap();
        let r2 = rho_from_phi(conn.as_ref(), &m, &second, &moved, n).unwrap();
        let r = rho_from_phi(conn.as_ref(), &m, &whole, &p, 2 * n).unwrap();
        assert!(r.dist(&(&r2 * &r1)) < 1e-7, "{}", r.dist(&(&r2 * &r1)));
    }
}
