//! Local 2-connection data on a chart: the 1-form `a`, the 2-form `b`, their
//! curvatures, and matrix-valued coefficient fields built from DSL expressions.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::algebra2group::MatrixCrossedModule;
use crate::dsl::{Bindings, Expr};
use crate::geometry::Chart;
use crate::lie2algebra::LieAlgebra;
use crate::matrix::CMat;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormsError {
    #[error("point {0:?} lies outside the chart")]
    OutsideChart(Vec<f64>),
    #[error("expected {expected} coefficient expressions for {what}, got {actual}")]
    Shape { what: &'static str, expected: usize, actual: usize },
    #[error("coefficient for {what} uses coordinate x{index} but the chart has dimension {dim}")]
    Coordinate { what: &'static str, index: usize, dim: usize },
    #[error("this crossed module has no section of t_*, so b cannot be derived from the curvature")]
    NoSection,
    #[error("charts do not overlap")]
    EmptyOverlap,
    #[error("non-finite field value at {0:?}")]
    NonFinite(Vec<f64>),
}

/// Which half of the crossed module a field takes values in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    G,
    H,
}

fn algebra(cm: &MatrixCrossedModule, side: Side) -> &LieAlgebra {
    match side {
        Side::G => cm.g_alg(),
        Side::H => cm.h_alg(),
    }
}

/// Index pairs `k < l` in storage order.
pub fn pairs(d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for k in 0..d {
        for l in k + 1..d {
            out.push((k, l));
        }
    }
    out
}

/// Index triples `k < l < m` in storage order.
pub fn triples(d: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for k in 0..d {
        for l in k + 1..d {
            for m in l + 1..d {
                out.push((k, l, m));
            }
        }
    }
    out
}

/// Storage slot of the pair `(k, l)`, `k < l`.
pub fn pair_index(d: usize, k: usize, l: usize) -> usize {
    debug_assert!(k < l && l < d);
    k * d - k * (k + 1) / 2 + (l - k - 1)
}

/// Fourth-order central partial derivatives of a matrix field.
pub fn fd_partials(f: &dyn Fn(&[f64]) -> CMat, x: &[f64], h: f64) -> Vec<CMat> {
    let mut q = x.to_vec();
    (0..x.len())
        .map(|k| {
            let mut at = |o: f64| {
                q[k] = x[k] + o;
                let v = f(&q);
                q[k] = x[k];
                v
            };
            let (m2, m1, p1, p2) = (at(-2.0 * h), at(-h), at(h), at(2.0 * h));
            let mut d = &(&m2 - &p2) + &(&p1 - &m1).scale_re(8.0);
            d = d.scale_re(1.0 / (12.0 * h));
            d
        })
        .collect()
}

/// Fourth-order central partials of a list-valued field, indexed `[direction][component]`.
pub fn fd_partials_vec(f: &dyn Fn(&[f64]) -> Vec<CMat>, x: &[f64], h: f64) -> Vec<Vec<CMat>> {
    let mut q = x.to_vec();
    (0..x.len())
        .map(|k| {
            let mut at = |o: f64| {
                q[k] = x[k] + o;
                let v = f(&q);
                q[k] = x[k];
                v
            };
            let (m2, m1, p1, p2) = (at(-2.0 * h), at(-h), at(h), at(2.0 * h));
            (0..m2.len())
                .map(|i| (&(&m2[i] - &p2[i]) + &(&p1[i] - &m1[i]).scale_re(8.0)).scale_re(1.0 / (12.0 * h)))
                .collect()
        })
        .collect()
}

/// [`fd_partials_vec`] with one Richardson level: `(16 D_h − D_{2h}) / 15`.
pub fn fd_partials_vec_refined(f: &dyn Fn(&[f64]) -> Vec<CMat>, x: &[f64], h: f64) -> Vec<Vec<CMat>> {
    let fine = fd_partials_vec(f, x, h);
    let coarse = fd_partials_vec(f, x, 2.0 * h);
    fine.iter()
        .zip(&coarse)
        .map(|(fr, cr)| fr.iter().zip(cr).map(|(a, b)| (&a.scale_re(16.0) - b).scale_re(1.0 / 15.0)).collect())
        .collect()
}

/// Evaluate a 2-form stored by pairs on `(X, Y)`.
pub fn two_form_on(values: &[CMat], d: usize, x: &[f64], y: &[f64]) -> CMat {
    let mut out = CMat::zeros(values.first().map(|v| v.n()).unwrap_or(1));
    for (i, (k, l)) in pairs(d).into_iter().enumerate() {
        out.axpy(x[k] * y[l] - x[l] * y[k], &values[i]);
    }
    out
}

/// Evaluate a 1-form stored by coordinate on `X`.
pub fn one_form_on(values: &[CMat], x: &[f64]) -> CMat {
    let mut out = CMat::zeros(values.first().map(|v| v.n()).unwrap_or(1));
    for (v, &c) in values.iter().zip(x) {
        out.axpy(c, v);
    }
    out
}

/// Evaluate a 3-form stored by triples on `(X, Y, Z)`.
pub fn three_form_on(values: &[CMat], d: usize, x: &[f64], y: &[f64], z: &[f64]) -> CMat {
    let mut out = CMat::zeros(values.first().map(|v| v.n()).unwrap_or(1));
    for (i, (k, l, m)) in triples(d).into_iter().enumerate() {
        let det = x[k] * (y[l] * z[m] - y[m] * z[l]) - x[l] * (y[k] * z[m] - y[m] * z[k])
            + x[m] * (y[k] * z[l] - y[l] * z[k]);
        out.axpy(det, &values[i]);
    }
    out
}

/// Scalar DSL coefficients against a Lie-algebra basis.
#[derive(Debug, Clone)]
pub struct Coefficients {
    exprs: Vec<Expr>,
}

impl Coefficients {
    pub fn new(exprs: Vec<Expr>) -> Self {
        Coefficients { exprs }
    }

    pub fn zero(n: usize) -> Self {
        Coefficients { exprs: vec![Expr::Num(0.0); n] }
    }

    pub fn exprs(&self) -> &[Expr] {
        &self.exprs
    }

    fn check(&self, what: &'static str, alg: &LieAlgebra, dim: usize) -> Result<(), FormsError> {
        if self.exprs.len() != alg.dim() {
            return Err(FormsError::Shape { what, expected: alg.dim(), actual: self.exprs.len() });
        }
        for e in &self.exprs {
            let n = e.coordinate_arity();
            if n > dim {
                return Err(FormsError::Coordinate { what, index: n, dim });
            }
        }
        Ok(())
    }

    fn eval(&self, alg: &LieAlgebra, x: &[f64]) -> CMat {
        let b = Bindings::coords(x);
        let c: Vec<f64> = self.exprs.iter().map(|e| e.eval_or_nan(&b)).collect();
        alg.from_coords(&c)
    }
}

/// A group-valued field on a chart.
pub trait GroupField: Send + Sync {
    fn value(&self, x: &[f64]) -> CMat;
    fn partials(&self, x: &[f64]) -> Vec<CMat> {
        fd_partials(&|y| self.value(y), x, 1e-3)
    }
}

/// A Lie-algebra-valued 1-form on a chart, stored by coordinate.
pub trait OneFormField: Send + Sync {
    fn components(&self, x: &[f64]) -> Vec<CMat>;
    /// `∂_j φ_k`, indexed `[j][k]`.
    fn partials(&self, x: &[f64]) -> Vec<Vec<CMat>> {
        fd_partials_vec(&|y| self.components(y), x, 1e-3)
    }
}

/// `x ↦ exp(Σ_j λ_j(x) E_j)` in `G` or `H`.
pub struct ExpField {
    cm: Arc<MatrixCrossedModule>,
    side: Side,
    coeffs: Coefficients,
}

impl ExpField {
    pub fn new(cm: Arc<MatrixCrossedModule>, side: Side, coeffs: Coefficients, dim: usize) -> Result<Self, FormsError> {
        coeffs.check("group field", algebra(&cm, side), dim)?;
        Ok(ExpField { cm, side, coeffs })
    }

    pub fn identity(cm: Arc<MatrixCrossedModule>, side: Side) -> Self {
        let n = algebra(&cm, side).dim();
        ExpField { cm, side, coeffs: Coefficients::zero(n) }
    }

    pub fn generator(&self, x: &[f64]) -> CMat {
        self.coeffs.eval(algebra(&self.cm, self.side), x)
    }
}

impl GroupField for ExpField {
    fn value(&self, x: &[f64]) -> CMat {
        let xi = self.generator(x);
        match self.side {
            Side::G => self.cm.exp_g(&xi),
            Side::H => self.cm.exp_h(&xi),
        }
    }
}

/// Pointwise product `f₁(x)·f₂(x)`.
pub struct ProductField(pub Arc<dyn GroupField>, pub Arc<dyn GroupField>);

impl GroupField for ProductField {
    fn value(&self, x: &[f64]) -> CMat {
        &self.0.value(x) * &self.1.value(x)
    }
    fn partials(&self, x: &[f64]) -> Vec<CMat> {
        let (a, b) = (self.0.value(x), self.1.value(x));
        let (da, db) = (self.0.partials(x), self.1.partials(x));
        da.iter().zip(&db).map(|(p, q)| &(p * &b) + &(&a * q)).collect()
    }
}

/// Group field given by a closure.
pub struct FnGroupField<F>(pub F);

impl<F: Fn(&[f64]) -> CMat + Send + Sync> GroupField for FnGroupField<F> {
    fn value(&self, x: &[f64]) -> CMat {
        (self.0)(x)
    }
}

/// 1-form with DSL coefficients `[coordinate][basis]`.
pub struct DslOneForm {
    alg: LieAlgebra,
    coeffs: Vec<Coefficients>,
}

impl DslOneForm {
    pub fn new(alg: &LieAlgebra, coeffs: Vec<Coefficients>, dim: usize) -> Result<Self, FormsError> {
        if coeffs.len() != dim {
            return Err(FormsError::Shape { what: "1-form", expected: dim, actual: coeffs.len() });
        }
        for c in &coeffs {
            c.check("1-form", alg, dim)?;
        }
        Ok(DslOneForm { alg: alg.clone(), coeffs })
    }

    pub fn zero(alg: &LieAlgebra, dim: usize) -> Self {
        DslOneForm { alg: alg.clone(), coeffs: vec![Coefficients::zero(alg.dim()); dim] }
    }
}

impl OneFormField for DslOneForm {
    fn components(&self, x: &[f64]) -> Vec<CMat> {
        self.coeffs.iter().map(|c| c.eval(&self.alg, x)).collect()
    }
}

/// 1-form given by a closure.
pub struct FnOneForm<F>(pub F);

impl<F: Fn(&[f64]) -> Vec<CMat> + Send + Sync> OneFormField for FnOneForm<F> {
    fn components(&self, x: &[f64]) -> Vec<CMat> {
        (self.0)(x)
    }
}

/// Local 2-connection data evaluated pointwise.
pub trait ConnectionField: Send + Sync {
    fn chart(&self) -> &Chart;
    fn module(&self) -> &Arc<MatrixCrossedModule>;
    /// `a_k(x)`, one `𝔤` element per coordinate.
    fn a(&self, x: &[f64]) -> Vec<CMat>;
    /// `b_kl(x)` for `k < l` in [`pairs`] order.
    fn b(&self, x: &[f64]) -> Vec<CMat>;

    fn fd_step(&self) -> f64 {
        1e-3 * self.chart().scale()
    }

    /// `∂_j a_k`, indexed `[j][k]`.
    fn a_partials(&self, x: &[f64]) -> Vec<Vec<CMat>> {
        fd_partials_vec(&|y| self.a(y), x, self.fd_step())
    }

    /// `∂_j b_p`, indexed `[j][pair]`.
    fn b_partials(&self, x: &[f64]) -> Vec<Vec<CMat>> {
        fd_partials_vec(&|y| self.b(y), x, self.fd_step())
    }
}

/// `F_kl = ∂_k a_l − ∂_l a_k + [a_k, a_l]` for `k < l`.
pub fn curvature<C: ConnectionField + ?Sized>(conn: &C, x: &[f64]) -> Vec<CMat> {
    let d = conn.chart().dim;
    let a = conn.a(x);
    let da = conn.a_partials(x);
    pairs(d)
        .into_iter()
        .map(|(k, l)| &(&da[k][l] - &da[l][k]) + &CMat::commutator(&a[k], &a[l]))
        .collect()
}

fn check_point<C: ConnectionField + ?Sized>(conn: &C, x: &[f64]) -> Result<(), FormsError> {
    if conn.chart().contains(x) {
        Ok(())
    } else {
        Err(FormsError::OutsideChart(x.to_vec()))
    }
}

/// `F_a(X, Y)` at `x`.
pub fn curvature_f<C: ConnectionField + ?Sized>(conn: &C, x: &[f64], v: &[f64], w: &[f64]) -> Result<CMat, FormsError> {
    check_point(conn, x)?;
    Ok(two_form_on(&curvature(conn, x), conn.chart().dim, v, w))
}

/// Max-norm of `t_*b − F_a` over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub max: f64,
    pub at: Vec<f64>,
    pub tolerance: f64,
}

impl ResidualReport {
    pub fn pass(&self) -> bool {
        self.max <= self.tolerance
    }
}

pub const FAKE_FLAT_TOL: f64 = 1e-8;

pub fn fake_flatness_residual<C: ConnectionField + ?Sized>(conn: &C, grid: &[Vec<f64>]) -> ResidualReport {
    let cm = conn.module();
    let mut rep = ResidualReport { max: 0.0, at: Vec::new(), tolerance: FAKE_FLAT_TOL };
    for x in grid {
        let f = curvature(conn, x);
        let b = conn.b(x);
        let r = f.iter().zip(&b).map(|(f, b)| (&cm.t_star(b) - f).norm_max()).fold(0.0, f64::max);
        let r = if r.is_nan() { f64::INFINITY } else { r };
        if r > rep.max || rep.at.is_empty() {
            rep.max = rep.max.max(r);
            rep.at = x.clone();
        }
    }
    rep
}

/// `K_klm = ∂_k b_lm + ∂_l b_mk + ∂_m b_kl + α_*(a_k, b_lm) + α_*(a_l, b_mk) + α_*(a_m, b_kl)`.
pub fn three_curvature<C: ConnectionField + ?Sized>(conn: &C, x: &[f64]) -> Vec<CMat> {
    let d = conn.chart().dim;
    let cm = conn.module();
    let a = conn.a(x);
    let b = conn.b(x);
    let db = conn.b_partials(x);
    let bp = |k: usize, l: usize| pair_index(d, k, l);
    triples(d)
        .into_iter()
        .map(|(k, l, m)| {
            // b_mk = −b_km
            let mut out = &db[k][bp(l, m)] - &db[l][bp(k, m)];
            out = &out + &db[m][bp(k, l)];
            out = &out + &cm.alpha_star(&a[k], &b[bp(l, m)]);
            out = &out - &cm.alpha_star(&a[l], &b[bp(k, m)]);
            &out + &cm.alpha_star(&a[m], &b[bp(k, l)])
        })
        .collect()
}

/// Orthogonal projection of an `𝔥` element onto `ker t_*`, in basis coordinates.
pub fn project_kernel(cm: &MatrixCrossedModule, xi: &CMat) -> CMat {
    let h = cm.h_alg();
    let g = cm.g_alg();
    let n = h.dim();
    // rows of t_* in 𝔥 coordinates span the orthogonal complement of the kernel
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for i in 0..g.dim() {
        let mut row: Vec<f64> = (0..n).map(|j| g.coords(&cm.t_star(&h.basis()[j]))[i]).collect();
        for r in &rows {
            let dot: f64 = row.iter().zip(r).map(|(a, b)| a * b).sum();
            for (x, y) in row.iter_mut().zip(r) {
                *x -= dot * y;
            }
        }
        let norm = libm::sqrt(row.iter().map(|x| x * x).sum::<f64>());
        if norm > 1e-12 {
            rows.push(row.into_iter().map(|x| x / norm).collect());
        }
    }
    let mut c = h.coords(xi);
    for r in &rows {
        let dot: f64 = c.iter().zip(r).map(|(a, b)| a * b).sum();
        for (x, y) in c.iter_mut().zip(r) {
            *x -= dot * y;
        }
    }
    h.from_coords(&c)
}

/// Value of the 3-curvature on three tangents, with its Bianchi residual.
#[derive(Debug, Clone)]
pub struct ThreeCurvature {
    /// Projection onto `ker t_*`.
    pub value: CMat,
    pub raw: CMat,
    /// `‖t_* K‖`.
    pub bianchi_defect: f64,
    pub fake_flat: bool,
}

pub const BIANCHI_TOL: f64 = 1e-7;

pub fn three_curvature_k<C: ConnectionField + ?Sized>(
    conn: &C,
    x: &[f64],
    v: &[f64],
    w: &[f64],
    z: &[f64],
) -> Result<ThreeCurvature, FormsError> {
    check_point(conn, x)?;
    let cm = conn.module();
    let d = conn.chart().dim;
    if d < 3 {
        let zero = cm.h_alg().zero();
        return Ok(ThreeCurvature { value: zero.clone(), raw: zero, bianchi_defect: 0.0, fake_flat: true });
    }
    let raw = three_form_on(&three_curvature(conn, x), d, v, w, z);
    let bianchi_defect = cm.t_star(&raw).norm_max();
    let fake_flat = fake_flatness_residual(conn, &[x.to_vec()]).pass();
    Ok(ThreeCurvature { value: project_kernel(cm, &raw), raw, bianchi_defect, fake_flat })
}

/// Bundle-level `B` at `(x, g)` on horizontal lifts of `X, Y`: `(α_{g⁻¹})_* b_x(X, Y)`.
pub fn bundle_form_b<C: ConnectionField + ?Sized>(conn: &C, x: &[f64], g: &CMat, v: &[f64], w: &[f64]) -> CMat {
    let cm = conn.module();
    let gi = g.adjoint();
    cm.alpha_group_star(&gi, &two_form_on(&conn.b(x), conn.chart().dim, v, w))
}

/// Bundle-level `A` at `(x, g)` on a tangent `(X, g·ξ)`: `Ad_{g⁻¹} a_x(X) + ξ`.
pub fn bundle_form_a<C: ConnectionField + ?Sized>(conn: &C, x: &[f64], g: &CMat, v: &[f64], g_dot: &CMat) -> CMat {
    let gi = g.adjoint();
    &(&(&gi * &one_form_on(&conn.a(x), v)) * g) + &(&gi * g_dot)
}

/// How `b` is specified.
pub enum BField {
    /// Independent DSL coefficients per pair.
    Dsl(Vec<Coefficients>),
    /// `section(F_a) + extra`, fake-flat whenever `extra` lies in `ker t_*`.
    FakeFlat { extra: Vec<Coefficients> },
}

/// A 2-connection with DSL coefficient fields.
pub struct TwoConnection {
    chart: Chart,
    cm: Arc<MatrixCrossedModule>,
    a: Vec<Coefficients>,
    b: BField,
    refined: bool,
}

impl TwoConnection {
    pub fn new(chart: Chart, cm: Arc<MatrixCrossedModule>, a: Vec<Coefficients>, b: BField) -> Result<Self, FormsError> {
        let d = chart.dim;
        if a.len() != d {
            return Err(FormsError::Shape { what: "a", expected: d, actual: a.len() });
        }
        for c in &a {
            c.check("a", cm.g_alg(), d)?;
        }
        let np = d * (d - 1) / 2;
        let bs = match &b {
            BField::Dsl(v) => v,
            BField::FakeFlat { extra } => {
                if cm.section(&cm.g_alg().zero()).is_none() {
                    return Err(FormsError::NoSection);
                }
                extra
            }
        };
        if bs.len() != np {
            return Err(FormsError::Shape { what: "b", expected: np, actual: bs.len() });
        }
        for c in bs {
            c.check("b", cm.h_alg(), d)?;
        }
        Ok(TwoConnection { chart, cm, a, b, refined: false })
    }

    /// Use one Richardson level on top of the fourth-order derivative stencil.
    pub fn with_richardson(mut self, on: bool) -> Self {
        self.refined = on;
        self
    }

    pub fn is_declared_fake_flat(&self) -> bool {
        matches!(self.b, BField::FakeFlat { .. })
    }
}

impl ConnectionField for TwoConnection {
    fn chart(&self) -> &Chart {
        &self.chart
    }
    fn module(&self) -> &Arc<MatrixCrossedModule> {
        &self.cm
    }
    fn a(&self, x: &[f64]) -> Vec<CMat> {
        self.a.iter().map(|c| c.eval(self.cm.g_alg(), x)).collect()
    }
    fn a_partials(&self, x: &[f64]) -> Vec<Vec<CMat>> {
        if self.refined {
            fd_partials_vec_refined(&|y| self.a(y), x, self.fd_step())
        } else {
            fd_partials_vec(&|y| self.a(y), x, self.fd_step())
        }
    }
    fn b_partials(&self, x: &[f64]) -> Vec<Vec<CMat>> {
        if self.refined {
            fd_partials_vec_refined(&|y| self.b(y), x, self.fd_step())
        } else {
            fd_partials_vec(&|y| self.b(y), x, self.fd_step())
        }
    }
    fn b(&self, x: &[f64]) -> Vec<CMat> {
        match &self.b {
            BField::Dsl(v) => v.iter().map(|c| c.eval(self.cm.h_alg(), x)).collect(),
            BField::FakeFlat { extra } => curvature(self, x)
                .iter()
                .zip(extra)
                .map(|(f, e)| {
                    let s = self.cm.section(f).expect("checked at construction");
                    &s + &e.eval(self.cm.h_alg(), x)
                })
                .collect(),
        }
    }
}

/// Connection given by closures, mostly for tests and oracles.
pub struct FnConnection<A, B> {
    pub chart: Chart,
    pub cm: Arc<MatrixCrossedModule>,
    pub a: A,
    pub b: B,
}

impl<A, B> ConnectionField for FnConnection<A, B>
where
    A: Fn(&[f64]) -> Vec<CMat> + Send + Sync,
    B: Fn(&[f64]) -> Vec<CMat> + Send + Sync,
{
    fn chart(&self) -> &Chart {
        &self.chart
    }
    fn module(&self) -> &Arc<MatrixCrossedModule> {
        &self.cm
    }
    fn a(&self, x: &[f64]) -> Vec<CMat> {
        (self.a)(x)
    }
    fn b(&self, x: &[f64]) -> Vec<CMat> {
        (self.b)(x)
    }
}

/// Transition function between two trivializations over their overlap.
pub struct TransitionData {
    pub overlap: Vec<(f64, f64)>,
    pub g: Box<dyn GroupField>,
}

impl TransitionData {
    /// `g_ij` on the intersection of two bounded charts.
    pub fn new(chart_i: &Chart, chart_j: &Chart, g: Box<dyn GroupField>) -> Result<Self, FormsError> {
        let full = |c: &Chart| c.bounds.clone().unwrap_or_else(|| vec![(f64::NEG_INFINITY, f64::INFINITY); c.dim]);
        let (bi, bj) = (full(chart_i), full(chart_j));
        if bi.len() != bj.len() {
            return Err(FormsError::EmptyOverlap);
        }
        let overlap: Vec<(f64, f64)> = bi.iter().zip(&bj).map(|(a, b)| (a.0.max(b.0), a.1.min(b.1))).collect();
        if overlap.iter().any(|(lo, hi)| lo >= hi) {
            return Err(FormsError::EmptyOverlap);
        }
        Ok(TransitionData { overlap, g })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.overlap).all(|(v, (lo, hi))| v >= lo && v <= hi)
    }
}

/// Worst gluing defects over the grid points lying in the overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDataReport {
    pub a_defect: f64,
    pub b_defect: f64,
    pub group_defect: f64,
    pub points: usize,
    pub tolerance: f64,
}

impl LocalDataReport {
    pub fn pass(&self) -> bool {
        self.points > 0 && self.a_defect <= self.tolerance && self.b_defect <= self.tolerance && self.group_defect <= 1e-10
    }
}

/// Checks `a_i = g⁻¹ a_j g + g⁻¹ dg` and `b_i = (α_{g⁻¹})_* b_j` with `g = g_ij`.
pub fn check_local_data<C1, C2>(conn_i: &C1, conn_j: &C2, td: &TransitionData, grid: &[Vec<f64>]) -> Result<LocalDataReport, FormsError>
where
    C1: ConnectionField + ?Sized,
    C2: ConnectionField + ?Sized,
{
    let cm = conn_i.module();
    let d = conn_i.chart().dim;
    let mut rep = LocalDataReport { a_defect: 0.0, b_defect: 0.0, group_defect: 0.0, points: 0, tolerance: 1e-7 };
    for x in grid.iter().filter(|x| td.contains(x)) {
        rep.points += 1;
        let g = td.g.value(x);
        let gi = g.adjoint();
        rep.group_defect = rep.group_defect.max(cm.g_group().membership_defect(&g));
        let dg = td.g.partials(x);
        let (ai, aj) = (conn_i.a(x), conn_j.a(x));
        for k in 0..d {
            let expect = &(&(&gi * &aj[k]) * &g) + &(&gi * &dg[k]);
            rep.a_defect = rep.a_defect.max(ai[k].dist(&expect));
        }
        let (bi, bj) = (conn_i.b(x), conn_j.b(x));
        for (p, q) in bi.iter().zip(&bj) {
            rep.b_defect = rep.b_defect.max(p.dist(&cm.alpha_group_star(&gi, q)));
        }
    }
    if rep.points == 0 {
        return Err(FormsError::EmptyOverlap);
    }
    Ok(rep)
}

/// Regular grid with `n` points per axis over a box.
pub fn grid(bounds: &[(f64, f64)], n: usize) -> Vec<Vec<f64>> {
    let d = bounds.len();
    let total = n.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            (0..d)
                .map(|k| {
                    let i = idx % n;
                    idx /= n;
                    let (lo, hi) = bounds[k];
                    if n == 1 {
                        0.5 * (lo + hi)
                    } else {
                        lo + (hi - lo) * i as f64 / (n - 1) as f64
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra2group::{su2_basis, MatrixFamily};
    use crate::dsl::parse;
    use crate::matrix::c;

    fn coeffs(src: &[&str]) -> Coefficients {
        Coefficients::new(src.iter().map(|s| parse(s).unwrap()).collect())
    }

    fn module(f: MatrixFamily) -> Arc<MatrixCrossedModule> {
        Arc::new(MatrixCrossedModule::new(f))
    }

    #[test]
    fn richardson_sharpens_partials() {
        let cm = module(MatrixFamily::U1Id);
        let build = || TwoConnection::new(Chart::new(2), cm.clone(), vec![coeffs(&["sin(5*x1)"]), coeffs(&["0"])], BField::Dsl(vec![coeffs(&["0"])])).unwrap();
        let x = [0.3, 0.1];
        let exact = CMat::scalar(c(0.0, 5.0 * libm::cos(1.5)));
        let plain = build().a_partials(&x)[0][0].dist(&exact);
        let refined = build().with_richardson(true).a_partials(&x)[0][0].dist(&exact);
        assert!(refined < plain / 100.0, "{plain:e} vs {refined:e}");
    }

    #[test]
    fn abelian_curvature_of_x_dy() {
        let cm = module(MatrixFamily::U1Id);
        let conn = TwoConnection::new(Chart::new(2), cm, vec![coeffs(&["0"]), coeffs(&["x1"])], BField::FakeFlat { extra: vec![coeffs(&["0"])] })
            .unwrap();
        let f = curvature_f(&conn, &[0.3, -0.2], &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!(f.dist(&CMat::scalar(c(0.0, 1.0))) < 1e-8);
        let r = fake_flatness_residual(&conn, &grid(&[(-1.0, 1.0), (-1.0, 1.0)], 5));
        assert!(r.pass(), "{:?}", r);
    }

    #[test]
    fn constant_su2_curvature_is_a_bracket() {
        let cm = module(MatrixFamily::Su2IdConj);
        let eps = 0.3;
        let e = su2_basis();
        let a = vec![coeffs(&["0.3", "0", "0"]), coeffs(&["0", "0.3", "0"])];
        let conn = TwoConnection::new(Chart::new(2), cm, a, BField::Dsl(vec![Coefficients::zero(3)])).unwrap();
        let f = curvature_f(&conn, &[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        let expect = CMat::commutator(&e[0], &e[1]).scale_re(eps * eps);
        assert!(f.dist(&expect) < 1e-8);
        // b = 0 is not fake-flat here
        let r = fake_flatness_residual(&conn, &[vec![0.0, 0.0]]);
        assert!((r.max - expect.norm_max()).abs() < 1e-8);
    }

    #[test]
    fn abelian_three_curvature() {
        let cm = module(MatrixFamily::U1Trivial);
        let conn = TwoConnection::new(
            Chart::new(3),
            cm,
            vec![coeffs(&["0"]), coeffs(&["0"]), coeffs(&["0"])],
            BField::Dsl(vec![coeffs(&["x3"]), coeffs(&["0"]), coeffs(&["0"])]),
        )
        .unwrap();
        let k = three_curvature_k(&conn, &[0.1, 0.2, 0.3], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]).unwrap();
        assert!(k.value.dist(&CMat::scalar(c(0.0, 1.0))) < 1e-8);
        assert!(k.bianchi_defect < 1e-12);
    }

    #[test]
    fn u2_trace_part_is_the_only_three_curvature() {
        let cm = module(MatrixFamily::U2ToPu2);
        let a = vec![
            coeffs(&["0.4*x2", "0.2", "0.1*x3"]),
            coeffs(&["0", "0.3*x1*x3", "-0.2"]),
            coeffs(&["0.1*x1", "0", "0.5*x2"]),
        ];
        let extra = vec![coeffs(&["0", "0", "0", "x3*x3"]), coeffs(&["0", "0", "0", "0"]), coeffs(&["0", "0", "0", "x1"])];
        let conn = TwoConnection::new(Chart::new(3), cm.clone(), a, BField::FakeFlat { extra }).unwrap();
        let x = [0.2, -0.1, 0.4];
        assert!(fake_flatness_residual(&conn, &[x.to_vec()]).pass());
        let k = three_curvature_k(&conn, &x, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]).unwrap();
        // d(x3² dx1∧dx2 + x1 dx2∧dx3) = (2 x3 + 1) dx1∧dx2∧dx3
        let e4 = CMat::identity(2).scale(c(0.0, 1.0));
        assert!(k.bianchi_defect < 1e-7, "{}", k.bianchi_defect);
        assert!(k.raw.dist(&e4.scale_re(2.0 * x[2] + 1.0)) < 1e-7, "{:?}", k.raw);
    }

    #[test]
    fn bundle_b_is_equivariant() {
        let cm = module(MatrixFamily::Su2IdConj);
        let a = vec![coeffs(&["x2", "0", "0.2"]), coeffs(&["0", "x1", "0"])];
        let conn = TwoConnection::new(Chart::new(2), cm.clone(), a, BField::FakeFlat { extra: vec![Coefficients::zero(3)] }).unwrap();
        let x = [0.3, 0.7];
        let (v, w) = ([1.0, 0.0], [0.0, 1.0]);
        let id = cm.g_identity();
        assert!(bundle_form_b(&conn, &x, &id, &v, &w).dist(&two_form_on(&conn.b(&x), 2, &v, &w)) < 1e-15);
        let g = cm.exp_g(&su2_basis()[0]);
        let g0 = cm.exp_g(&su2_basis()[2].scale_re(0.4));
        let direct = &(&g.adjoint() * &two_form_on(&conn.b(&x), 2, &v, &w)) * &g;
        assert!(bundle_form_b(&conn, &x, &g, &v, &w).dist(&direct) < 1e-10);
        let lhs = bundle_form_b(&conn, &x, &(&g * &g0), &v, &w);
        let rhs = cm.alpha_group_star(&g0.adjoint(), &bundle_form_b(&conn, &x, &g, &v, &w));
        assert!(lhs.dist(&rhs) < 1e-10);
    }

    #[test]
    fn abelian_gluing() {
        let cm = module(MatrixFamily::U1Id);
        let chart_i = Chart::with_bounds(2, vec![(-1.0, 0.5), (-1.0, 1.0)]);
        let chart_j = Chart::with_bounds(2, vec![(-0.5, 1.0), (-1.0, 1.0)]);
        let conn_j = TwoConnection::new(chart_j.clone(), cm.clone(), vec![coeffs(&["x2"]), coeffs(&["0"])], BField::Dsl(vec![coeffs(&["1"])])).unwrap();
        // λ = x1 x2: a_i = a_j + i dλ
        let conn_i = TwoConnection::new(
            chart_i.clone(),
            cm.clone(),
            vec![coeffs(&["x2 + x2"]), coeffs(&["x1"])],
            BField::Dsl(vec![coeffs(&["1"])]),
        )
        .unwrap();
        let g = ExpField::new(cm.clone(), Side::G, coeffs(&["x1*x2"]), 2).unwrap();
        let td = TransitionData::new(&chart_i, &chart_j, Box::new(g)).unwrap();
        let rep = check_local_data(&conn_i, &conn_j, &td, &grid(&[(-1.0, 1.0), (-1.0, 1.0)], 9)).unwrap();
        assert!(rep.pass(), "{:?}", rep);
        let disjoint = Chart::with_bounds(2, vec![(2.0, 3.0), (-1.0, 1.0)]);
        assert!(TransitionData::new(&chart_i, &disjoint, Box::new(ExpField::identity(cm, Side::G))).is_err());
    }

    #[test]
    fn curvature_fd_converges_at_fourth_order() {
        let cm = module(MatrixFamily::U1Id);
        let conn = TwoConnection::new(Chart::new(2), cm, vec![coeffs(&["0"]), coeffs(&["sin(3*x1)"])], BField::Dsl(vec![coeffs(&["0"])])).unwrap();
        let exact = 3.0 * libm::cos(3.0 * 0.4);
        let err = |h: f64| {
            let d = fd_partials(&|y| conn.a(y).swap_remove(1), &[0.4, 0.0], h);
            (d[0].get(0, 0).im - exact).abs()
        };
        assert!(err(0.04) / err(0.02) >= 12.0);
    }
}
