//! Parallel transport along paths and surfaces.
//!
//! Paths are integrated with a fourth-order Magnus stepper (two Gauss nodes per
//! step). Surface transport integrates, for each `s`, the `b`-field over the
//! slice `Γ(s, ·)` with composite Simpson, conjugated back to the base point by
//! the horizontal-lift frame of that slice; the resulting `𝔥`-valued curve
//! drives the same stepper in `s`.
//!
//! Conventions:
//! - 1-transport solves `g' = −a(γ')·g`, `g(0) = e`; the lift at `(x₀, g₀)` is `(γ, g·g₀)`.
//! - 2-transport solves `h' = −h·β(s)` with
//!   `β(s) = ∫₀¹ (α_{(g_s(t)g₀)⁻¹})_* b(∂_sΓ, ∂_tΓ) dt`,
//!   which gives `t(h) = tra(Γ₁)(p) : tra(Γ₀)(p)` for fake-flat data.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::forms::{
    curvature, fake_flatness_residual, one_form_on, project_kernel, three_curvature, three_form_on, two_form_on,
    ConnectionField, Side,
};
use crate::geometry::{
    affine_push, canonical_bigon_scaled, compose_bigons_vertical, reverse_bigon, straight_path, Chart, FnMap,
    GeometryError, Map, ParamMap,
};
use crate::matrix::{CMat, MatrixError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransportError {
    #[error("at least {min} steps are required, got {got}")]
    TooFewSteps { min: usize, got: usize },
    #[error("Simpson quadrature needs an even number of steps, got {0}")]
    OddSteps(usize),
    #[error("non-finite value while integrating at parameter {at:?}")]
    NonFinite { at: Vec<f64> },
    #[error("path starts at {start:?}, not at the base point")]
    BasepointMismatch { start: Vec<f64> },
    #[error("boundary mismatch: {what} differs by {mismatch:e}")]
    Boundary { what: &'static str, mismatch: f64 },
    #[error("observed convergence order {order:.2} is below {min}")]
    Accuracy { order: f64, min: f64 },
    #[error("finite-difference step {0:e} is too small")]
    StepUnderflow(f64),
    #[error("stencil leaves the chart at {0:?}")]
    OutsideChart(Vec<f64>),
    #[error("sampled 2-holonomies are nontrivial but the sampled 3-curvature spans nothing")]
    DegenerateSampling,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

type Result<T> = core::result::Result<T, TransportError>;

pub const MIN_STEPS: usize = 8;

/// A point `(x, g)` of the trivial bundle `M × G`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasePoint {
    pub x: Vec<f64>,
    pub g: CMat,
}

impl BasePoint {
    pub fn new(x: Vec<f64>, g: CMat) -> Self {
        BasePoint { x, g }
    }

    pub fn at_identity<C: ConnectionField + ?Sized>(conn: &C, x: Vec<f64>) -> Self {
        BasePoint { x, g: conn.module().g_identity() }
    }
}

/// Outcome of a 1-transport.
#[derive(Debug, Clone)]
pub struct TransportResult {
    /// `g(1)` with `tra(γ)(x₀, g₀) = (γ(1), g(1)·g₀)`.
    pub value: CMat,
    pub steps: usize,
    pub group_defect: f64,
    pub order: Option<f64>,
}

/// Outcome of a 2-transport.
#[derive(Debug, Clone)]
pub struct SurfaceResult {
    /// The `H` component of the 2-transport at `p`.
    pub h: CMat,
    /// Fibre element of `tra(Γ₀)(p)`.
    pub source: CMat,
    /// Fibre element of `tra(Γ₁)(p)`.
    pub target: CMat,
    pub steps_s: usize,
    pub steps_t: usize,
    pub group_defect: f64,
    /// Worst `‖t_*b − F_a‖` over a sample of the surface.
    pub fake_flat_residual: f64,
    pub order: Option<f64>,
}

impl SurfaceResult {
    /// `tra(Γ₁)(p) : tra(Γ₀)(p)`.
    pub fn boundary_quotient(&self) -> CMat {
        &self.source.adjoint() * &self.target
    }
}

const GAUSS_LO: f64 = 0.5 - 0.288_675_134_594_812_9;
const GAUSS_HI: f64 = 0.5 + 0.288_675_134_594_812_9;
const SQRT3_12: f64 = 0.144_337_567_297_406_43;

/// One fourth-order Magnus step for `Y' = A(t)·Y`: returns `exp(Ω)` with `Y₁ = exp(Ω)·Y₀`.
pub fn magnus_left(a1: &CMat, a2: &CMat, dt: f64) -> CMat {
    let mut om = (a1 + a2).scale_re(0.5 * dt);
    om.axpy(SQRT3_12 * dt * dt, &CMat::commutator(a2, a1));
    om.exp()
}

/// One fourth-order Magnus step for `Y' = Y·B(t)`: returns `exp(Ω)` with `Y₁ = Y₀·exp(Ω)`.
pub fn magnus_right(b1: &CMat, b2: &CMat, dt: f64) -> CMat {
    let mut om = (b1 + b2).scale_re(0.5 * dt);
    om.axpy(SQRT3_12 * dt * dt, &CMat::commutator(b1, b2));
    om.exp()
}

/// Point and velocity of a path at a parameter.
pub type PathSample<'a> = &'a dyn Fn(f64) -> (Vec<f64>, Vec<f64>);

fn path_sampler(path: &Map) -> impl Fn(f64) -> (Vec<f64>, Vec<f64>) + '_ {
    move |t| (path.eval(&[t]), path.jacobian(&[t]))
}

/// Sample of the slice `t ↦ Γ(s, t)` with its `t`-velocity.
fn slice_sampler(bigon: &Map, s: f64) -> impl Fn(f64) -> (Vec<f64>, Vec<f64>) + '_ {
    move |t| {
        let x = bigon.eval(&[s, t]);
        let j = bigon.jacobian(&[s, t]);
        (x, j.chunks(2).map(|r| r[1]).collect())
    }
}

fn finite_or(m: &CMat, at: &[f64]) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(TransportError::NonFinite { at: at.to_vec() })
    }
}

fn minus_a<C: ConnectionField + ?Sized>(conn: &C, x: &[f64], v: &[f64]) -> CMat {
    one_form_on(&conn.a(x), v).scale_re(-1.0)
}

/// Magnus step of `g' = −a(γ')g` over `[t, t + dt]`.
fn lift_step<C: ConnectionField + ?Sized>(conn: &C, path: PathSample<'_>, t: f64, dt: f64) -> Result<CMat> {
    let (x1, v1) = path(t + GAUSS_LO * dt);
    let (x2, v2) = path(t + GAUSS_HI * dt);
    let step = magnus_left(&minus_a(conn, &x1, &v1), &minus_a(conn, &x2, &v2), dt);
    finite_or(&step, &[t])?;
    Ok(step)
}

/// Lift frames `g(t_j)` at `t_j = j/steps`, `j = 0..=steps`.
pub fn lift_frames<C: ConnectionField + ?Sized>(conn: &C, path: PathSample<'_>, steps: usize) -> Result<Vec<CMat>> {
    let dt = 1.0 / steps as f64;
    let mut frames = Vec::with_capacity(steps + 1);
    let mut g = conn.module().g_identity();
    frames.push(g.clone());
    for j in 0..steps {
        g = &lift_step(conn, path, j as f64 * dt, dt)? * &g;
        frames.push(g.clone());
    }
    Ok(frames)
}

/// Lift frames at step nodes together with the frames at both Gauss nodes of every step.
pub fn lift_frames_dense<C: ConnectionField + ?Sized>(
    conn: &C,
    path: PathSample<'_>,
    steps: usize,
) -> Result<(Vec<CMat>, Vec<[CMat; 2]>)> {
    let dt = 1.0 / steps as f64;
    let mut nodes = Vec::with_capacity(steps + 1);
    let mut gauss = Vec::with_capacity(steps);
    let mut g = conn.module().g_identity();
    nodes.push(g.clone());
    for j in 0..steps {
        let t = j as f64 * dt;
        let lo = &lift_step(conn, path, t, GAUSS_LO * dt)? * &g;
        let hi = &lift_step(conn, path, t, GAUSS_HI * dt)? * &g;
        gauss.push([lo, hi]);
        g = &lift_step(conn, path, t, dt)? * &g;
        nodes.push(g.clone());
    }
    Ok((nodes, gauss))
}

fn check_steps(steps: usize) -> Result<()> {
    if steps < MIN_STEPS {
        return Err(TransportError::TooFewSteps { min: MIN_STEPS, got: steps });
    }
    Ok(())
}

fn project_g<C: ConnectionField + ?Sized>(conn: &C, g: &CMat) -> (CMat, f64) {
    let grp = conn.module().g_group();
    let p = grp.project(g).unwrap_or_else(|_| g.clone());
    let defect = grp.membership_defect(&p);
    (p, defect)
}

/// Path-ordered exponential along `γ`.
pub fn path_ordered_exp<C: ConnectionField + ?Sized>(conn: &C, path: &Map, steps: usize) -> Result<TransportResult> {
    check_steps(steps)?;
    let frames = lift_frames(conn, &path_sampler(path), steps)?;
    let (value, group_defect) = project_g(conn, frames.last().expect("nonempty"));
    Ok(TransportResult { value, steps, group_defect, order: None })
}

/// Same as [`path_ordered_exp`] with an order estimate from runs at `steps/2` and `steps/4`.
pub fn path_ordered_exp_with_order<C: ConnectionField + ?Sized>(conn: &C, path: &Map, steps: usize) -> Result<TransportResult> {
    let mut r = path_ordered_exp(conn, path, steps)?;
    if steps >= 4 * MIN_STEPS {
        let half = path_ordered_exp(conn, path, steps / 2)?.value;
        let quarter = path_ordered_exp(conn, path, steps / 4)?.value;
        r.order = order_of(quarter.dist(&half), half.dist(&r.value));
    }
    Ok(r)
}

/// Observed order from two successive defects under step halving.
pub fn order_of(coarse: f64, fine: f64) -> Option<f64> {
    if coarse < NOISE_FLOOR || fine < NOISE_FLOOR {
        None
    } else {
        Some(libm::log2(coarse / fine))
    }
}

/// Defects below this are treated as round-off.
pub const NOISE_FLOOR: f64 = 1e-13;

/// Sampled horizontal lift of a path.
#[derive(Debug, Clone)]
pub struct HorizontalLift {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub frames: Vec<CMat>,
    /// Worst `‖A(lift velocity)‖` over interior samples, with the velocity from finite differences of the lift.
    pub connection_defect: f64,
}

pub fn horizontal_lift<C: ConnectionField + ?Sized>(conn: &C, path: &Map, p: &BasePoint, steps: usize) -> Result<HorizontalLift> {
    check_steps(steps)?;
    let start = path.eval(&[0.0]);
    if start.iter().zip(&p.x).any(|(a, b)| (a - b).abs() > 1e-9) {
        return Err(TransportError::BasepointMismatch { start });
    }
    let sampler = path_sampler(path);
    let frames: Vec<CMat> = lift_frames(conn, &sampler, steps)?.into_iter().map(|g| &g * &p.g).collect();
    let dt = 1.0 / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|j| j as f64 * dt).collect();
    let points: Vec<Vec<f64>> = times.iter().map(|&t| path.eval(&[t])).collect();
    let mut defect: f64 = 0.0;
    for j in 2..steps.saturating_sub(1) {
        let g_dot = (&(&frames[j - 2] - &frames[j + 2]) + &(&frames[j + 1] - &frames[j - 1]).scale_re(8.0)).scale_re(1.0 / (12.0 * dt));
        let v = path.jacobian(&[times[j]]);
        let a = crate::forms::bundle_form_a(conn, &points[j], &frames[j], &v, &g_dot);
        defect = defect.max(a.norm_max());
    }
    Ok(HorizontalLift { times, points, frames, connection_defect: defect })
}

/// Integrand of an ordered surface integral: `(x, frame, ∂_sΓ, ∂_tΓ) ↦ algebra element`.
pub type SurfaceIntegrand<'a> = &'a dyn Fn(&[f64], &CMat, &[f64], &[f64]) -> CMat;

fn simpson_weight(j: usize, n: usize) -> f64 {
    if j == 0 || j == n {
        1.0
    } else if j % 2 == 1 {
        4.0
    } else {
        2.0
    }
}

/// `∫₀¹ integrand(Γ(s,t), g_s(t)·g₀, ∂_sΓ, ∂_tΓ) dt` by composite Simpson.
fn slice_integral<C: ConnectionField + ?Sized>(
    conn: &C,
    bigon: &Map,
    s: f64,
    g0: &CMat,
    steps_t: usize,
    f: SurfaceIntegrand<'_>,
) -> Result<CMat> {
    let frames = lift_frames(conn, &slice_sampler(bigon, s), steps_t)?;
    let h = 1.0 / steps_t as f64;
    let mut acc: Option<CMat> = None;
    for (j, frame) in frames.iter().enumerate() {
        let t = j as f64 * h;
        let x = bigon.eval(&[s, t]);
        let jac = bigon.jacobian(&[s, t]);
        let ds: Vec<f64> = jac.chunks(2).map(|r| r[0]).collect();
        let dt: Vec<f64> = jac.chunks(2).map(|r| r[1]).collect();
        let val = f(&x, &(frame * g0), &ds, &dt);
        finite_or(&val, &[s, t])?;
        match &mut acc {
            Some(a) => a.axpy(simpson_weight(j, steps_t) * h / 3.0, &val),
            None => acc = Some(val.scale_re(simpson_weight(j, steps_t) * h / 3.0)),
        }
    }
    Ok(acc.expect("at least one node"))
}

/// Solves `y' = −y·β(s)`, `β(s) = slice_integral(s)`, returning `(y(1), source frame, target frame)`.
fn ordered_surface_integral<C: ConnectionField + ?Sized>(
    conn: &C,
    bigon: &Map,
    p: &BasePoint,
    steps_s: usize,
    steps_t: usize,
    f: SurfaceIntegrand<'_>,
    side: Side,
) -> Result<(CMat, CMat, CMat)> {
    check_steps(steps_s)?;
    check_steps(steps_t)?;
    if steps_t % 2 == 1 {
        return Err(TransportError::OddSteps(steps_t));
    }
    if bigon.arity() != 2 {
        return Err(GeometryError::Arity { expected: 2, actual: bigon.arity() }.into());
    }
    let start = bigon.eval(&[0.0, 0.0]);
    if start.iter().zip(&p.x).any(|(a, b)| (a - b).abs() > 1e-9) {
        return Err(TransportError::BasepointMismatch { start });
    }
    let cm = conn.module();
    let mut y = match side {
        Side::G => cm.g_identity(),
        Side::H => cm.h_identity(),
    };
    let ds = 1.0 / steps_s as f64;
    for i in 0..steps_s {
        let s = i as f64 * ds;
        let b1 = slice_integral(conn, bigon, s + GAUSS_LO * ds, &p.g, steps_t, f)?.scale_re(-1.0);
        let b2 = slice_integral(conn, bigon, s + GAUSS_HI * ds, &p.g, steps_t, f)?.scale_re(-1.0);
        y = &y * &magnus_right(&b1, &b2, ds);
    }
    let src = lift_frames(conn, &slice_sampler(bigon, 0.0), steps_t)?.pop().expect("nonempty");
    let tgt = lift_frames(conn, &slice_sampler(bigon, 1.0), steps_t)?.pop().expect("nonempty");
    Ok((y, &src * &p.g, &tgt * &p.g))
}

fn surface_fake_flat_residual<C: ConnectionField + ?Sized>(conn: &C, bigon: &Map) -> f64 {
    let pts: Vec<Vec<f64>> = (0..5).flat_map(|i| (0..5).map(move |j| (i, j))).map(|(i, j)| bigon.eval(&[i as f64 / 4.0, j as f64 / 4.0])).collect();
    fake_flatness_residual(conn, &pts).max
}

/// 2-transport of `(a, b)` along a bigon at `p`.
pub fn surface_transport<C: ConnectionField + ?Sized>(
    conn: &C,
    bigon: &Map,
    p: &BasePoint,
    steps_s: usize,
    steps_t: usize,
) -> Result<SurfaceResult> {
    let cm = conn.module().clone();
    let d = conn.chart().dim;
    let integrand = move |x: &[f64], frame: &CMat, ds: &[f64], dt: &[f64]| {
        cm.alpha_group_star(&frame.adjoint(), &two_form_on(&conn.b(x), d, ds, dt))
    };
    let (h, source, target) = ordered_surface_integral(conn, bigon, p, steps_s, steps_t, &integrand, Side::H)?;
    let grp = conn.module().h_group();
    let h = grp.project(&h).unwrap_or(h);
    let group_defect = grp.membership_defect(&h);
    let (source, d1) = project_g(conn, &source);
    let (target, d2) = project_g(conn, &target);
    Ok(SurfaceResult {
        h,
        source,
        target,
        steps_s,
        steps_t,
        group_defect: group_defect.max(d1).max(d2),
        fake_flat_residual: surface_fake_flat_residual(conn, bigon),
        order: None,
    })
}

/// [`surface_transport`] with an order estimate from runs at half and quarter resolution.
///
/// Fails with [`TransportError::Accuracy`] when the observed order is below 1.5.
pub fn surface_transport_with_order<C: ConnectionField + ?Sized>(
    conn: &C,
    bigon: &Map,
    p: &BasePoint,
    steps: usize,
) -> Result<SurfaceResult> {
    let mut r = surface_transport(conn, bigon, p, steps, steps)?;
    if steps >= 4 * MIN_STEPS && steps % 8 == 0 {
        let half = surface_transport(conn, bigon, p, steps / 2, steps / 2)?.h;
        let quarter = surface_transport(conn, bigon, p, steps / 4, steps / 4)?.h;
        r.order = order_of(quarter.dist(&half), half.dist(&r.h));
        if let Some(order) = r.order {
            if order < 1.5 {
                return Err(TransportError::Accuracy { order, min: 1.5 });
            }
        }
    }
    Ok(r)
}

/// Defect between two sides of an identity at one resolution.
#[derive(Debug, Clone)]
pub struct DefectReport {
    pub lhs: CMat,
    pub rhs: CMat,
    pub defect: f64,
    pub steps: usize,
    pub order: Option<f64>,
}

/// Compares `tra(Γ₁)(p) : tra(Γ₀)(p)` with the ordered integral of the curvature over `Γ`.
pub fn verify_nonabelian_stokes<C: ConnectionField + ?Sized>(conn: &C, bigon: &Map, p: &BasePoint, steps: usize) -> Result<DefectReport> {
    let run = |n: usize| -> Result<(CMat, CMat)> {
        let d = conn.chart().dim;
        let integrand = |x: &[f64], frame: &CMat, ds: &[f64], dt: &[f64]| {
            let f = two_form_on(&curvature(conn, x), d, ds, dt);
            &(&frame.adjoint() * &f) * frame
        };
        let (rhs, src, tgt) = ordered_surface_integral(conn, bigon, p, n, n, &integrand, Side::G)?;
        Ok((&src.adjoint() * &tgt, rhs))
    };
    let (lhs, rhs) = run(steps)?;
    let defect = lhs.dist(&rhs);
    let order = if steps >= 2 * MIN_STEPS && steps % 4 == 0 {
        let (l2, r2) = run(steps / 2)?;
        order_of(l2.dist(&r2), defect)
    } else {
        None
    };
    Ok(DefectReport { lhs, rhs, defect, steps, order })
}

fn max_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Checks that every bigon of the cube runs between the same two paths.
pub fn check_cube_boundary(cube: &Map) -> Result<()> {
    if cube.arity() != 3 {
        return Err(GeometryError::Arity { expected: 3, actual: cube.arity() }.into());
    }
    let n = 9;
    let g = |k: usize| k as f64 / (n - 1) as f64;
    let (x00, x01) = (cube.eval(&[0.0, 0.0, 0.0]), cube.eval(&[0.0, 0.0, 1.0]));
    for i in 0..n {
        for j in 0..n {
            let (u, r) = (g(i), g(j));
            let checks: [(&'static str, f64); 4] = [
                ("source path", max_dist(&cube.eval(&[u, 0.0, r]), &cube.eval(&[0.0, 0.0, r]))),
                ("target path", max_dist(&cube.eval(&[u, 1.0, r]), &cube.eval(&[0.0, 1.0, r]))),
                ("start point", max_dist(&cube.eval(&[u, r, 0.0]), &x00)),
                ("end point", max_dist(&cube.eval(&[u, r, 1.0]), &x01)),
            ];
            for (what, m) in checks {
                if m > 1e-9 {
                    return Err(TransportError::Boundary { what, mismatch: m });
                }
            }
        }
    }
    Ok(())
}

fn cube_slice(cube: &Map, u: f64) -> Map {
    crate::geometry::slice(cube, 0, u)
}

/// `∫_{I³} (α_{frame⁻¹})_* K(∂_u c, ∂_s c, ∂_t c)`, projected onto `ker t_*`, by Simpson in all three directions.
pub fn cube_integral_k<C: ConnectionField + ?Sized>(conn: &C, cube: &Map, p: &BasePoint, steps: usize) -> Result<CMat> {
    if steps % 2 == 1 {
        return Err(TransportError::OddSteps(steps));
    }
    let cm = conn.module();
    let d = conn.chart().dim;
    let h = 1.0 / steps as f64;
    let mut acc = cm.h_alg().zero();
    for i in 0..=steps {
        let u = i as f64 * h;
        let bigon = cube_slice(cube, u);
        for j in 0..=steps {
            let s = j as f64 * h;
            let frames = lift_frames(conn, &slice_sampler(&bigon, s), steps)?;
            for (k, frame) in frames.iter().enumerate() {
                let t = k as f64 * h;
                let x = cube.eval(&[u, s, t]);
                let jac = cube.jacobian(&[u, s, t]);
                let col = |c: usize| -> Vec<f64> { jac.chunks(3).map(|r| r[c]).collect() };
                let kv = three_form_on(&three_curvature(conn, &x), d, &col(0), &col(1), &col(2));
                let kv = cm.alpha_group_star(&(frame * &p.g).adjoint(), &project_kernel(cm, &kv));
                finite_or(&kv, &[u, s, t])?;
                let w = simpson_weight(i, steps) * simpson_weight(j, steps) * simpson_weight(k, steps) * { let c = h / 3.0; c * c * c };
                acc.axpy(w, &kv);
            }
        }
    }
    Ok(acc)
}

/// Compares `tra²(Σ₀)⁻¹·tra²(Σ₁)` with `exp(−∫ c*K)` for a cube `c` between bigons `Σ₀, Σ₁`.
pub fn verify_higher_stokes<C: ConnectionField + ?Sized>(conn: &C, cube: &Map, p: &BasePoint, steps: usize) -> Result<DefectReport> {
    check_cube_boundary(cube)?;
    let cm = conn.module();
    let h0 = surface_transport(conn, &cube_slice(cube, 0.0), p, steps, steps)?.h;
    let h1 = surface_transport(conn, &cube_slice(cube, 1.0), p, steps, steps)?.h;
    let lhs = &h0.adjoint() * &h1;
    let rhs = cm.exp_h(&cube_integral_k(conn, cube, p, steps)?.scale_re(-1.0));
    let defect = lhs.dist(&rhs);
    Ok(DefectReport { lhs, rhs, defect, steps, order: None })
}

/// Recovers `Ad_{g₀⁻¹} a_x(X)` from a 1-transport oracle by central differences along `x + τX`.
///
/// The oracle returns the fibre element of `tra(γ)(p)`.
pub fn reconstruct_a(oracle: &dyn Fn(&Map) -> Result<CMat>, p: &BasePoint, v: &[f64], delta: f64) -> Result<CMat> {
    if !(delta >= 1e-8) {
        return Err(TransportError::StepUnderflow(delta));
    }
    let gi = p.g.adjoint();
    let seg = |tau: f64| -> Result<CMat> {
        let end: Vec<f64> = p.x.iter().zip(v).map(|(x, d)| x + tau * d).collect();
        Ok(&gi * &oracle(&straight_path(&p.x, &end))?)
    };
    let central = |h: f64| -> Result<CMat> { Ok((&seg(h)? - &seg(-h)?).scale_re(1.0 / (2.0 * h))) };
    let (d1, d2) = (central(delta)?, central(2.0 * delta)?);
    Ok((&d1.scale_re(4.0) - &d2).scale_re(-1.0 / 3.0))
}

/// The bigon in the plane `x + span(X, Y)` from `x → x+sX → x+sX+tY` to `x → x+tY → x+sX+tY`.
pub fn chart_canonical_bigon(x: &[f64], v: &[f64], w: &[f64], s: f64, t: f64) -> Map {
    let e1: Vec<f64> = v.iter().map(|c| s * c).collect();
    let e2: Vec<f64> = w.iter().map(|c| t * c).collect();
    affine_push(Arc::new(canonical_bigon_scaled(1.0, 1.0)), x, &e1, &e2)
}

/// Recovers `(α_{g₀⁻¹})_* b_x(X, Y)` from a 2-transport oracle by a mixed central stencil on canonical bigons.
pub fn reconstruct_b(
    oracle: &dyn Fn(&Map) -> Result<CMat>,
    chart: &Chart,
    p: &BasePoint,
    v: &[f64],
    w: &[f64],
    delta: f64,
) -> Result<CMat> {
    if !(delta >= 1e-8) {
        return Err(TransportError::StepUnderflow(delta));
    }
    for (a, b) in [(2.0, 2.0), (2.0, -2.0), (-2.0, 2.0), (-2.0, -2.0)] {
        let corner: Vec<f64> = (0..p.x.len()).map(|i| p.x[i] + delta * (a * v[i] + b * w[i])).collect();
        if !chart.contains(&corner) {
            return Err(TransportError::OutsideChart(corner));
        }
    }
    let h = |s: f64, t: f64| oracle(&chart_canonical_bigon(&p.x, v, w, s, t));
    let mixed = |d: f64| -> Result<CMat> {
        let sum = &(&h(d, d)? - &h(d, -d)?) + &(&h(-d, -d)? - &h(-d, d)?);
        Ok(sum.scale_re(1.0 / (4.0 * d * d)))
    };
    let (m1, m2) = (mixed(delta)?, mixed(2.0 * delta)?);
    Ok((&m1.scale_re(4.0) - &m2).scale_re(1.0 / 3.0))
}

/// 2-holonomy of a bigon whose source and target share endpoints.
#[derive(Debug, Clone)]
pub struct Holonomy2 {
    pub h: CMat,
    /// Worst pointwise distance between source and target paths.
    pub path_gap: f64,
    /// `‖t(h) − e‖`, reported when source and target coincide.
    pub kernel_defect: Option<f64>,
}

pub fn holonomy2_h<C: ConnectionField + ?Sized>(conn: &C, bigon: &Map, p: &BasePoint, steps: usize) -> Result<Holonomy2> {
    let ends = |u: f64| (bigon.eval(&[u, 0.0]), bigon.eval(&[u, 1.0]));
    let (s0, s1) = ends(0.0);
    let (t0, t1) = ends(1.0);
    let m = max_dist(&s0, &t0).max(max_dist(&s1, &t1));
    if m > 1e-9 {
        return Err(TransportError::Boundary { what: "bigon endpoints", mismatch: m });
    }
    if max_dist(&s0, &p.x) > 1e-9 {
        return Err(TransportError::BasepointMismatch { start: s0 });
    }
    let path_gap = (0..=32).map(|k| k as f64 / 32.0).map(|t| max_dist(&bigon.eval(&[0.0, t]), &bigon.eval(&[1.0, t]))).fold(0.0, f64::max);
    let h = surface_transport(conn, bigon, p, steps, steps)?.h;
    let cm = conn.module();
    let kernel_defect = if path_gap <= 1e-9 { Some(cm.t(&h).dist(&cm.g_identity())) } else { None };
    Ok(Holonomy2 { h, path_gap, kernel_defect })
}

/// Sampling inputs for the Ambrose–Singer check.
pub struct AmbroseSingerInput {
    /// End points of straight paths from the base point along which `K` is sampled and probed.
    pub sample_points: Vec<Vec<f64>>,
    /// Cubes whose end bigons give reduced 2-holonomies.
    pub cubes: Vec<Map>,
    pub steps: usize,
    /// Edge length of the probe cubes.
    pub probe_size: f64,
}

#[derive(Debug, Clone)]
pub struct AmbroseSingerReport {
    pub span_dim: usize,
    pub k_samples: Vec<CMat>,
    pub reduced_holonomies: Vec<CMat>,
    /// Worst distance from a sampled `log` 2-holonomy to the span of the `K` samples.
    pub containment_residual: f64,
    /// Worst distance between probed and sampled `K` values, relative to `1 + ‖K‖`.
    pub probe_defect: f64,
    /// Worst `‖hol − e‖`.
    pub identity_defect: f64,
}

fn orthonormal_span(vectors: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut r = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = r.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in r.iter_mut().zip(b) {
                    *x -= dot * y;
                }
            }
        }
        let n = libm::sqrt(r.iter().map(|x| x * x).sum::<f64>());
        if n > tol {
            basis.push(r.into_iter().map(|x| x / n).collect());
        }
    }
    basis
}

fn residual_to_span(v: &[f64], basis: &[Vec<f64>]) -> f64 {
    let mut r = v.to_vec();
    for b in basis {
        let dot: f64 = r.iter().zip(b).map(|(x, y)| x * y).sum();
        for (x, y) in r.iter_mut().zip(b) {
            *x -= dot * y;
        }
    }
    libm::sqrt(r.iter().map(|x| x * x).sum::<f64>())
}

/// Probe cube at `x` spanned by the first three axes: bigons `x + ε·(canonical bigon) + w·ε·bump·e₃`.
fn probe_cube(x: &[f64], eps: f64) -> Map {
    let d = x.len();
    let x = x.to_vec();
    let unit = canonical_bigon_scaled(1.0, 1.0);
    Arc::new(FnMap::new(3, d, move |p| {
        let q = unit.eval(&p[1..3]);
        let bump = libm::sin(core::f64::consts::PI * p[1]) * 4.0 * p[2] * (1.0 - p[2]);
        let mut out = x.clone();
        out[0] += eps * q[0];
        out[1] += eps * q[1];
        out[2] += eps * p[0] * bump;
        out
    }))
}

/// `∫ bump · det(∂_sΓ, ∂_tΓ)` for the unit canonical bigon, so the probe cube has volume `ε³` times this.
fn probe_volume_factor() -> f64 {
    let unit = canonical_bigon_scaled(1.0, 1.0);
    let n = 2000;
    let h = 1.0 / n as f64;
    let mut acc = 0.0;
    for j in 0..=n {
        let t = j as f64 * h;
        let jac = unit.jacobian(&[0.5, t]);
        // the determinant does not depend on s for this filling
        let det = jac[0] * jac[3] - jac[1] * jac[2];
        acc += simpson_weight(j, n) * h / 3.0 * det * 4.0 * t * (1.0 - t);
    }
    acc * 2.0 / core::f64::consts::PI
}

/// Higher Ambrose–Singer check: reduced 2-holonomies lie in the span of transported `K` values,
/// and small probe cubes reproduce those values.
pub fn ambrose_singer_check<C: ConnectionField + ?Sized>(conn: &C, p: &BasePoint, input: &AmbroseSingerInput) -> Result<AmbroseSingerReport> {
    let cm = conn.module();
    let h_alg = cm.h_alg();
    let d = conn.chart().dim;
    let mut k_samples = Vec::new();
    let mut frames = Vec::new();
    for x in &input.sample_points {
        let g = &path_ordered_exp(conn, &straight_path(&p.x, x), input.steps)?.value * &p.g;
        let ks = three_curvature(conn, x);
        for k in &ks {
            k_samples.push(cm.alpha_group_star(&g.adjoint(), &project_kernel(cm, k)));
        }
        frames.push(g);
    }
    let scale = k_samples.iter().map(|k| k.norm_max()).fold(0.0, f64::max);
    let coords: Vec<Vec<f64>> = k_samples.iter().map(|k| h_alg.coords(k)).collect();
    let basis = orthonormal_span(&coords, 1e-9 * scale.max(1.0));

    let mut reduced = Vec::new();
    let mut containment: f64 = 0.0;
    let mut identity_defect: f64 = 0.0;
    for cube in &input.cubes {
        check_cube_boundary(cube)?;
        let loop_bigon = compose_bigons_vertical(&cube_slice(cube, 0.0), &reverse_bigon(&cube_slice(cube, 1.0)))?;
        let hol = holonomy2_h(conn, &loop_bigon, p, input.steps)?;
        identity_defect = identity_defect.max(hol.h.dist(&cm.h_identity()));
        // unprojected, so any component off ker t counts against containment
        let log = cm.log_h(&hol.h)?;
        containment = containment.max(residual_to_span(&h_alg.coords(&log), &basis));
        reduced.push(hol.h);
    }
    if basis.is_empty() && identity_defect > 1e-7 {
        return Err(TransportError::DegenerateSampling);
    }

    let mut probe_defect: f64 = 0.0;
    if d >= 3 {
        let vol = probe_volume_factor();
        let probe = |x: &[f64], g: &CMat, eps: f64| -> Result<CMat> {
            let r = higher_holonomy(conn, &probe_cube(x, eps), &BasePoint::new(x.to_vec(), g.clone()), input.steps)?;
            Ok(project_kernel(cm, &cm.log_h(&r)?).scale_re(-1.0 / (vol * eps * eps * eps)))
        };
        for (i, (x, g)) in input.sample_points.iter().zip(&frames).enumerate() {
            let eps = input.probe_size;
            let p1 = probe(x, g, eps)?;
            let p2 = probe(x, g, eps / 2.0)?;
            let est = &p2.scale_re(2.0) - &p1;
            let expect = &k_samples[i * (d * (d - 1) * (d - 2) / 6)];
            probe_defect = probe_defect.max(est.dist(expect) / (1.0 + expect.norm_max()));
        }
    }
    Ok(AmbroseSingerReport {
        span_dim: basis.len(),
        k_samples,
        reduced_holonomies: reduced,
        containment_residual: containment,
        probe_defect,
        identity_defect,
    })
}

/// `tra²(Σ₀)⁻¹·tra²(Σ₁)` for the end bigons of a cube.
pub fn higher_holonomy<C: ConnectionField + ?Sized>(conn: &C, cube: &Map, p: &BasePoint, steps: usize) -> Result<CMat> {
    let h0 = surface_transport(conn, &cube_slice(cube, 0.0), p, steps, steps)?.h;
    let h1 = surface_transport(conn, &cube_slice(cube, 1.0), p, steps, steps)?.h;
    Ok(&h0.adjoint() * &h1)
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub steps: usize,
    pub defect: f64,
    pub order: Option<f64>,
}

/// Runs `defect(n)` for `n = base·2^k`, `k = 0..=halvings`, with orders from successive rows.
pub fn convergence_table<E>(base: usize, halvings: usize, mut defect: impl FnMut(usize) -> core::result::Result<f64, E>) -> core::result::Result<Vec<ConvergenceRow>, E> {
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for k in 0..=halvings {
        let n = base << k;
        let e = defect(n)?;
        let order = rows.last().and_then(|r| order_of(r.defect, e));
        rows.push(ConvergenceRow { steps: n, defect: e, order });
    }
    Ok(rows)
}

/// Self-convergence table: the defect at `n` is the distance to the result at `n/2`.
pub fn self_convergence_table<E>(base: usize, halvings: usize, mut value: impl FnMut(usize) -> core::result::Result<CMat, E>) -> core::result::Result<Vec<ConvergenceRow>, E> {
    let mut prev = value(base)?;
    convergence_table(base * 2, halvings, |n| {
        let v = value(n)?;
        let e = v.dist(&prev);
        prev = v;
        Ok(e)
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::algebra2group::{su2_basis, MatrixCrossedModule, MatrixFamily};
    use crate::dsl::parse;
    use crate::forms::{BField, Coefficients, TwoConnection};
    use crate::geometry::{canonical_bigon, DslMap};
    use crate::matrix::c;

    fn co(src: &[&str]) -> Coefficients {
        Coefficients::new(src.iter().map(|s| parse(s).unwrap()).collect())
    }

    fn conn(family: MatrixFamily, d: usize, a: &[&[&str]], b: BField) -> TwoConnection {
        let cm = Arc::new(MatrixCrossedModule::new(family));
        TwoConnection::new(Chart::new(d), cm, a.iter().map(|r| co(r)).collect(), b).unwrap()
    }

    fn path(comps: &[&str]) -> Map {
        Arc::new(DslMap::new(1, comps.iter().map(|s| parse(s).unwrap()).collect()).unwrap())
    }

    fn bigon(comps: &[&str]) -> Map {
        Arc::new(DslMap::new(2, comps.iter().map(|s| parse(s).unwrap()).collect()).unwrap())
    }

    fn su2_poly() -> TwoConnection {
        conn(
            MatrixFamily::Su2IdConj,
            2,
            &[&["0.6*x2", "0.3", "0.2*x1*x2"], &["0.1", "-0.5*x1", "0.4 + 0.3*x1*x1"]],
            BField::FakeFlat { extra: vec![Coefficients::zero(3)] },
        )
    }

    #[test]
    fn zero_connection_transports_trivially() {
        let cn = conn(MatrixFamily::Su2IdConj, 2, &[&["0", "0", "0"], &["0", "0", "0"]], BField::Dsl(vec![Coefficients::zero(3)]));
        let r = path_ordered_exp(&cn, &path(&["cos(u)", "u*u"]), 16).unwrap();
        assert!(r.value.dist(&CMat::identity(2)) < 1e-15);
        assert!(matches!(path_ordered_exp(&cn, &path(&["u", "u"]), 4), Err(TransportError::TooFewSteps { .. })));
    }

    #[test]
    fn abelian_line_transport() {
        let cn = conn(MatrixFamily::U1Id, 2, &[&["0.7"], &["0"]], BField::Dsl(vec![Coefficients::zero(1)]));
        let r = path_ordered_exp(&cn, &straight_path(&[0.0, 0.0], &[2.0, 0.0]), 16).unwrap();
        let expect = CMat::scalar(C64::from_polar(1.0, -1.4));
        assert!(r.value.dist(&expect) < 1e-10);
    }

    use crate::matrix::C64;

    #[test]
    fn constant_su2_transport() {
        let cn = conn(MatrixFamily::Su2IdConj, 2, &[&["0.3", "0.2", "-0.1"], &["0.5", "-0.4", "0.25"]], BField::Dsl(vec![Coefficients::zero(3)]));
        let r = path_ordered_exp(&cn, &straight_path(&[0.1, 0.2], &[1.1, -0.8]), 16).unwrap();
        let a = cn.a(&[0.0, 0.0]);
        let gen = &a[0] - &a[1];
        assert!(r.value.dist(&gen.scale_re(-1.0).exp()) < 1e-9);
    }

    #[test]
    fn path_stepper_is_fourth_order() {
        let cn = su2_poly();
        let r = path_ordered_exp_with_order(&cn, &path(&["cos(2*u)", "sin(3*u)"]), 128).unwrap();
        assert!(r.order.unwrap() >= 3.8, "{:?}", r.order);
        assert!(r.group_defect < 1e-10);
    }

    #[test]
    fn lift_is_horizontal() {
        let cn = su2_poly();
        let g0 = cn.module().exp_g(&su2_basis()[1].scale_re(0.7));
        let lift = horizontal_lift(&cn, &path(&["u", "sin(2*u)"]), &BasePoint::new(vec![0.0, 0.0], g0), 256).unwrap();
        assert!(lift.connection_defect < 1e-6, "{}", lift.connection_defect);
    }

    #[test]
    fn abelian_surface_transport_matches_area_integral() {
        // a = c x dy, b = c dx∧dy; the canonical filling of the unit square sweeps signed area −1
        let cn = conn(MatrixFamily::U1Id, 2, &[&["0"], &["1.3*x1"]], BField::Dsl(vec![co(&["1.3"])]));
        let p = BasePoint::at_identity(&cn, vec![0.0, 0.0]);
        let r = surface_transport(&cn, &canonical_bigon(1.0, 1.0).unwrap(), &p, 64, 64).unwrap();
        let expect = CMat::scalar(C64::from_polar(1.0, 1.3));
        assert!(r.h.dist(&expect) < 1e-8, "{:?}", r.h);
        assert!(r.boundary_quotient().dist(&r.h) < 1e-8);
    }

    #[test]
    fn fake_flat_target_identity_su2() {
        let cn = su2_poly();
        let p = BasePoint::new(vec![0.0, 0.0], cn.module().exp_g(&su2_basis()[0].scale_re(0.4)));
        let b = bigon(&["v", "u*sin(pi*v)"]);
        let r = surface_transport(&cn, &b, &p, 48, 48).unwrap();
        let d = cn.module().t(&r.h).dist(&r.boundary_quotient());
        assert!(d < 1e-6, "{}", d);
        assert!(r.fake_flat_residual < 1e-8);
    }

    #[test]
    fn abelian_stokes() {
        let cn = conn(MatrixFamily::U1Id, 2, &[&["-x2*x2"], &["x1*x2"]], BField::FakeFlat { extra: vec![Coefficients::zero(1)] });
        let p = BasePoint::at_identity(&cn, vec![0.0, 0.0]);
        let rep = verify_nonabelian_stokes(&cn, &bigon(&["v", "u*sin(pi*v)"]), &p, 64).unwrap();
        assert!(rep.defect < 1e-8, "{}", rep.defect);
    }

    #[test]
    fn su2_stokes_converges() {
        let cn = su2_poly();
        let p = BasePoint::at_identity(&cn, vec![0.0, 0.0]);
        let quarter = bigon(&["v*cos(pi/2*(u+(1-u)*v))", "v*sin(pi/2*(u+(1-u)*v))"]);
        let rep = verify_nonabelian_stokes(&cn, &quarter, &p, 64).unwrap();
        assert!(rep.defect < 1e-6, "{}", rep.defect);
        assert!(rep.order.map_or(true, |o| o >= 3.5), "{:?}", rep.order);
    }

    #[test]
    fn reconstruct_round_trips() {
        let cn = su2_poly();
        let x = vec![0.3, -0.2];
        let g0 = cn.module().exp_g(&su2_basis()[2].scale_re(0.9));
        let p = BasePoint::new(x.clone(), g0.clone());
        let oracle_a = |path: &Map| -> Result<CMat> { Ok(&path_ordered_exp(&cn, path, 8)?.value * &g0) };
        let v = [0.6, 0.8];
        let a = reconstruct_a(&oracle_a, &p, &v, 1e-3).unwrap();
        let expect = &(&g0.adjoint() * &one_form_on(&cn.a(&x), &v)) * &g0;
        assert!(a.dist(&expect) < 1e-6, "{}", a.dist(&expect));

        let oracle_b = |sigma: &Map| -> Result<CMat> { Ok(surface_transport(&cn, sigma, &p, 8, 8)?.h) };
        let w = [-0.3, 1.0];
        let b = reconstruct_b(&oracle_b, cn.chart(), &p, &v, &w, 1e-3).unwrap();
        let expect = crate::forms::bundle_form_b(&cn, &x, &g0, &v, &w);
        assert!(b.dist(&expect) < 1e-4 * (1.0 + expect.norm_max()), "{}", b.dist(&expect));
    }

    #[test]
    fn abelian_higher_stokes() {
        let cn = conn(
            MatrixFamily::U1Trivial,
            3,
            &[&["0"], &["0"], &["0"]],
            BField::Dsl(vec![co(&["x3 + x1*x3"]), co(&["0"]), co(&["0"])]),
        );
        let p = BasePoint::at_identity(&cn, vec![0.0, 0.0, 0.0]);
        let cube: Map = Arc::new(
            DslMap::new(3, ["w", "v*sin(pi*w)", "u*sin(pi*v)*sin(pi*w)"].iter().map(|s| parse(s).unwrap()).collect()).unwrap(),
        );
        let rep = verify_higher_stokes(&cn, &cube, &p, 32).unwrap();
        assert!(rep.defect < 1e-6, "{}", rep.defect);
        assert!(rep.lhs.dist(&CMat::identity(1)) > 1e-2);
    }

    #[test]
    fn identity_bigon_has_trivial_holonomy() {
        let cn = su2_poly();
        let p = BasePoint::at_identity(&cn, vec![0.0, 0.0]);
        let b = crate::geometry::identity_bigon(&path(&["u", "u*u"]));
        let hol = holonomy2_h(&cn, &b, &p, 16).unwrap();
        assert!(hol.h.dist(&CMat::identity(2)) < 1e-12);
        assert!(hol.kernel_defect.unwrap() < 1e-12);
    }

    #[test]
    fn tables_report_orders() {
        let rows = convergence_table::<()>(8, 2, |n| Ok(1.0 / (n as f64).powi(4))).unwrap();
        assert_eq!(rows.len(), 3);
        assert!((rows[2].order.unwrap() - 4.0).abs() < 1e-12);
        let _ = c(0.0, 0.0);
    }
}
