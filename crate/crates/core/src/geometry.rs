//! Paths, bigons and cubes in a coordinate chart, as maps `I^m → R^d`.
//!
//! Parameter order: for a bigon `(u, v)` is (homotopy, path); for a cube
//! `(u, v, w)` is (homotopy of bigons, bigon homotopy, path).

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::dsl::{Bindings, Expr, Var};

/// Default step for finite-difference partial derivatives.
pub const FD_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("endpoint mismatch: {mismatch:e}")]
    EndpointMismatch { mismatch: f64 },
    #[error("boundary mismatch: max-norm {mismatch:e} at parameter {at:?}")]
    BoundaryMismatch { mismatch: f64, at: Vec<f64> },
    #[error("expected a map of arity {expected}, got {actual}")]
    Arity { expected: usize, actual: usize },
    #[error("maps land in charts of different dimension ({0} vs {1})")]
    Dimension(usize, usize),
    #[error("argument {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("reparameterization does not fix the boundary: {reason}")]
    NotBoundaryFixing { reason: &'static str },
    #[error("expression uses variable {0} which is not a parameter of this map")]
    BadVariable(alloc::string::String),
}

/// A coordinate chart `R^d`, optionally restricted to a box.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub dim: usize,
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl Chart {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "chart dimension must be positive");
        Chart { dim, bounds: None }
    }

    pub fn with_bounds(dim: usize, bounds: Vec<(f64, f64)>) -> Self {
        assert_eq!(bounds.len(), dim);
        Chart { dim, bounds: Some(bounds) }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim
            && match &self.bounds {
                None => x.iter().all(|v| v.is_finite()),
                Some(b) => x.iter().zip(b).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi),
            }
    }

    /// Characteristic length used to scale finite-difference steps.
    pub fn scale(&self) -> f64 {
        match &self.bounds {
            None => 1.0,
            Some(b) => b.iter().map(|(lo, hi)| hi - lo).fold(0.0, f64::max).max(1e-300),
        }
    }
}

/// A smooth map from the unit cube `I^m` into a chart.
pub trait ParamMap: Send + Sync {
    fn arity(&self) -> usize;
    fn dim(&self) -> usize;
    fn eval(&self, p: &[f64]) -> Vec<f64>;

    /// Row-major `dim × arity` Jacobian; column `j` is `∂_j`.
    fn jacobian(&self, p: &[f64]) -> Vec<f64> {
        fd_jacobian(self, p, FD_STEP)
    }
}

pub type Map = Arc<dyn ParamMap>;

/// Fourth-order finite-difference Jacobian. One-sided stencils are used within
/// two steps of the unit-cube boundary so every evaluation stays inside `I^m`.
pub fn fd_jacobian<M: ParamMap + ?Sized>(map: &M, p: &[f64], h: f64) -> Vec<f64> {
    let (m, d) = (map.arity(), map.dim());
    let mut jac = vec![0.0; d * m];
    let mut q = p.to_vec();
    for j in 0..m {
        let x = p[j];
        let mut at = |offset: f64| {
            q[j] = x + offset;
            let v = map.eval(&q);
            q[j] = x;
            v
        };
        let col: Vec<f64> = if x - 2.0 * h >= 0.0 && x + 2.0 * h <= 1.0 {
            let (a, b, c, e) = (at(-2.0 * h), at(-h), at(h), at(2.0 * h));
            (0..d).map(|i| (a[i] - 8.0 * b[i] + 8.0 * c[i] - e[i]) / (12.0 * h)).collect()
        } else {
            let s = if x - 2.0 * h < 0.0 { 1.0 } else { -1.0 };
            let f: Vec<Vec<f64>> = (0..5).map(|k| at(s * k as f64 * h)).collect();
            (0..d)
                .map(|i| s * (-25.0 * f[0][i] + 48.0 * f[1][i] - 36.0 * f[2][i] + 16.0 * f[3][i] - 3.0 * f[4][i]) / (12.0 * h))
                .collect()
        };
        for i in 0..d {
            jac[i * m + j] = col[i];
        }
    }
    jac
}

/// Map given by DSL component expressions in `u, v, w`.
#[derive(Debug, Clone)]
pub struct DslMap {
    arity: usize,
    components: Vec<Expr>,
}

impl DslMap {
    pub fn new(arity: usize, components: Vec<Expr>) -> Result<Self, GeometryError> {
        let allowed = [Var::U, Var::V, Var::W];
        for e in &components {
            if let Some(v) = e.first_var_outside(&|v| allowed[..arity].contains(&v)) {
                return Err(GeometryError::BadVariable(alloc::format!("{}", v)));
            }
        }
        Ok(DslMap { arity, components })
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }
}

impl ParamMap for DslMap {
    fn arity(&self) -> usize {
        self.arity
    }
    fn dim(&self) -> usize {
        self.components.len()
    }
    fn eval(&self, p: &[f64]) -> Vec<f64> {
        let b = Bindings::params(p);
        self.components.iter().map(|e| e.eval_or_nan(&b)).collect()
    }
}

type EvalFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Map given by closures, with an optional analytic Jacobian.
pub struct FnMap {
    arity: usize,
    dim: usize,
    f: Box<EvalFn>,
    jac: Option<Box<EvalFn>>,
}

impl FnMap {
    pub fn new(arity: usize, dim: usize, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        FnMap { arity, dim, f: Box::new(f), jac: None }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.jac = Some(Box::new(jac));
        self
    }
}

impl ParamMap for FnMap {
    fn arity(&self) -> usize {
        self.arity
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, p: &[f64]) -> Vec<f64> {
        (self.f)(p)
    }
    fn jacobian(&self, p: &[f64]) -> Vec<f64> {
        match &self.jac {
            Some(j) => j(p),
            None => fd_jacobian(self, p, FD_STEP),
        }
    }
}

/// Straight segment `a → b`.
pub fn straight_path(a: &[f64], b: &[f64]) -> Map {
    let (a, b) = (a.to_vec(), b.to_vec());
    let d = a.len();
    let diff: Vec<f64> = b.iter().zip(&a).map(|(x, y)| x - y).collect();
    let diff2 = diff.clone();
    Arc::new(
        FnMap::new(1, d, move |p| a.iter().zip(&diff).map(|(x, dx)| x + p[0] * dx).collect())
            .with_jacobian(move |_| diff2.clone()),
    )
}

/// Constant map of any arity.
pub fn constant_map(arity: usize, x: &[f64]) -> Map {
    let x = x.to_vec();
    let d = x.len();
    Arc::new(FnMap::new(arity, d, move |_| x.clone()).with_jacobian(move |_| vec![0.0; d * arity]))
}

/// `exp(-1/x)` for `x > 0`, else 0.
fn flat(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        libm::exp(-1.0 / x)
    }
}

fn flat_prime(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        flat(x) / (x * x)
    }
}

/// Smooth step: 0 on `(-∞, 0]`, 1 on `[1, ∞)`, all derivatives vanish at both ends.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let (a, b) = (flat(x), flat(1.0 - x));
    a / (a + b)
}

pub fn smooth_step_prime(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let (a, b) = (flat(x), flat(1.0 - x));
    let (da, db) = (flat_prime(x), -flat_prime(1.0 - x));
    (da * b - a * db) / ((a + b) * (a + b))
}

/// Width of the flat zones at each end of a smoothed parameter interval.
pub const BUMP_WIDTH: f64 = 0.1;

/// Reparameterization of `[0, 1]` that is constant on `[0, w]` and `[1 − w, 1]`.
pub fn sitting(x: f64) -> f64 {
    smooth_step((x - BUMP_WIDTH) / (1.0 - 2.0 * BUMP_WIDTH))
}

pub fn sitting_prime(x: f64) -> f64 {
    smooth_step_prime((x - BUMP_WIDTH) / (1.0 - 2.0 * BUMP_WIDTH)) / (1.0 - 2.0 * BUMP_WIDTH)
}

/// Split a parameter in `[0, 1]` at one half: returns (second half?, inner parameter, d inner / d outer).
fn halve(x: f64) -> (bool, f64, f64) {
    if x <= 0.5 {
        (false, sitting(2.0 * x), 2.0 * sitting_prime(2.0 * x))
    } else {
        (true, sitting(2.0 * x - 1.0), 2.0 * sitting_prime(2.0 * x - 1.0))
    }
}

fn max_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Two maps glued along parameter `axis`, with the sitting reparameterization on each half.
struct Glued {
    first: Map,
    second: Map,
    axis: usize,
}

impl ParamMap for Glued {
    fn arity(&self) -> usize {
        self.first.arity()
    }
    fn dim(&self) -> usize {
        self.first.dim()
    }
    fn eval(&self, p: &[f64]) -> Vec<f64> {
        let (second, inner, _) = halve(p[self.axis]);
        let mut q = p.to_vec();
        q[self.axis] = inner;
        if second {
            self.second.eval(&q)
        } else {
            self.first.eval(&q)
        }
    }
    fn jacobian(&self, p: &[f64]) -> Vec<f64> {
        let (second, inner, scale) = halve(p[self.axis]);
        let mut q = p.to_vec();
        q[self.axis] = inner;
        let mut jac = if second { self.second.jacobian(&q) } else { self.first.jacobian(&q) };
        let m = self.arity();
        for i in 0..self.dim() {
            jac[i * m + self.axis] *= scale;
        }
        jac
    }
}

fn check_pair(a: &Map, b: &Map, arity: usize) -> Result<(), GeometryError> {
    for m in [a, b] {
        if m.arity() != arity {
            return Err(GeometryError::Arity { expected: arity, actual: m.arity() });
        }
    }
    if a.dim() != b.dim() {
        return Err(GeometryError::Dimension(a.dim(), b.dim()));
    }
    Ok(())
}

const BOUNDARY_TOL: f64 = 1e-9;
const BOUNDARY_SAMPLES: usize = 33;

fn worst_boundary(f: impl Fn(f64) -> (f64, Vec<f64>)) -> Result<(), GeometryError> {
    let (mismatch, at) = (0..BOUNDARY_SAMPLES)
        .map(|k| f(k as f64 / (BOUNDARY_SAMPLES - 1) as f64))
        .fold((0.0, Vec::new()), |best, cur| if cur.0 > best.0 { cur } else { best });
    if mismatch > BOUNDARY_TOL {
        return Err(GeometryError::BoundaryMismatch { mismatch, at });
    }
    Ok(())
}

/// `γ' ∘ γ`: first `γ`, then `γ'`.
pub fn concat_paths(first: &Map, second: &Map) -> Result<Map, GeometryError> {
    check_pair(first, second, 1)?;
    let mismatch = max_dist(&first.eval(&[1.0]), &second.eval(&[0.0]));
    if mismatch > BOUNDARY_TOL {
        return Err(GeometryError::EndpointMismatch { mismatch });
    }
    Ok(Arc::new(Glued { first: first.clone(), second: second.clone(), axis: 0 }))
}

/// Stack `Σ: γ₀ ⇒ γ₁` and `Σ': γ₁ ⇒ γ₂` in the homotopy direction.
pub fn compose_bigons_vertical(lower: &Map, upper: &Map) -> Result<Map, GeometryError> {
    check_pair(lower, upper, 2)?;
    worst_boundary(|t| (max_dist(&lower.eval(&[1.0, t]), &upper.eval(&[0.0, t])), vec![1.0, t]))?;
    Ok(Arc::new(Glued { first: lower.clone(), second: upper.clone(), axis: 0 }))
}

/// Concatenate `Σ` then `Σ'` in the path direction.
pub fn compose_bigons_horizontal(left: &Map, right: &Map) -> Result<Map, GeometryError> {
    check_pair(left, right, 2)?;
    worst_boundary(|s| (max_dist(&left.eval(&[s, 1.0]), &right.eval(&[s, 0.0])), vec![s, 1.0]))?;
    Ok(Arc::new(Glued { first: left.clone(), second: right.clone(), axis: 1 }))
}

/// Precompose every parameter with [`sitting`], making the map locally constant near the faces.
pub fn with_sitting_instants(map: &Map) -> Map {
    let m = map.arity();
    let phi = FnMap::new(m, m, |p| p.iter().map(|&x| sitting(x)).collect()).with_jacobian(move |p| {
        let mut j = vec![0.0; m * m];
        for i in 0..m {
            j[i * m + i] = sitting_prime(p[i]);
        }
        j
    });
    Arc::new(Reparam { inner: map.clone(), phi: Arc::new(phi) })
}

/// Reverse along one parameter (`x ↦ 1 − x`).
struct Flipped {
    inner: Map,
    axis: usize,
}

impl ParamMap for Flipped {
    fn arity(&self) -> usize {
        self.inner.arity()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, p: &[f64]) -> Vec<f64> {
        let mut q = p.to_vec();
        q[self.axis] = 1.0 - q[self.axis];
        self.inner.eval(&q)
    }
    fn jacobian(&self, p: &[f64]) -> Vec<f64> {
        let mut q = p.to_vec();
        q[self.axis] = 1.0 - q[self.axis];
        let mut j = self.inner.jacobian(&q);
        let m = self.arity();
        for i in 0..self.dim() {
            j[i * m + self.axis] = -j[i * m + self.axis];
        }
        j
    }
}

/// Reverse a path.
pub fn reverse_path(path: &Map) -> Map {
    Arc::new(Flipped { inner: path.clone(), axis: 0 })
}

/// The inverse 2-cell of a bigon: swap source and target.
pub fn reverse_bigon(bigon: &Map) -> Map {
    Arc::new(Flipped { inner: bigon.clone(), axis: 0 })
}

/// Identity bigon on a path.
pub fn identity_bigon(path: &Map) -> Map {
    let p = path.clone();
    let p2 = path.clone();
    let d = path.dim();
    Arc::new(FnMap::new(2, d, move |x| p.eval(&x[1..2])).with_jacobian(move |x| {
        let j = p2.jacobian(&x[1..2]);
        let mut out = vec![0.0; d * 2];
        for i in 0..d {
            out[i * 2 + 1] = j[i];
        }
        out
    }))
}

/// Restriction of a map with one parameter frozen.
struct Slice {
    inner: Map,
    axis: usize,
    value: f64,
}

impl Slice {
    fn lift(&self, p: &[f64]) -> Vec<f64> {
        let mut q = Vec::with_capacity(p.len() + 1);
        q.extend_from_slice(&p[..self.axis]);
        q.push(self.value);
        q.extend_from_slice(&p[self.axis..]);
        q
    }
}

impl ParamMap for Slice {
    fn arity(&self) -> usize {
        self.inner.arity() - 1
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, p: &[f64]) -> Vec<f64> {
        self.inner.eval(&self.lift(p))
    }
    fn jacobian(&self, p: &[f64]) -> Vec<f64> {
        let full = self.inner.jacobian(&self.lift(p));
        let (m, d) = (self.inner.arity(), self.dim());
        let mut out = Vec::with_capacity(d * (m - 1));
        for i in 0..d {
            for j in 0..m {
                if j != self.axis {
                    out.push(full[i * m + j]);
                }
            }
        }
        out
    }
}

/// Freeze parameter `axis` at `value`.
pub fn slice(map: &Map, axis: usize, value: f64) -> Map {
    Arc::new(Slice { inner: map.clone(), axis, value })
}

/// Source path `Σ(0, ·)` of a bigon.
pub fn bigon_source(bigon: &Map) -> Map {
    slice(bigon, 0, 0.0)
}

/// Target path `Σ(1, ·)` of a bigon.
pub fn bigon_target(bigon: &Map) -> Map {
    slice(bigon, 0, 1.0)
}

/// Precomposition `Σ ∘ φ`.
struct Reparam {
    inner: Map,
    phi: Map,
}

impl ParamMap for Reparam {
    fn arity(&self) -> usize {
        self.phi.arity()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, p: &[f64]) -> Vec<f64> {
        self.inner.eval(&clamp_unit(self.phi.eval(p)))
    }
    fn jacobian(&self, p: &[f64]) -> Vec<f64> {
        let q = clamp_unit(self.phi.eval(p));
        let outer = self.inner.jacobian(&q);
        let inner = self.phi.jacobian(p);
        let (d, m) = (self.dim(), self.arity());
        let mut out = vec![0.0; d * m];
        for i in 0..d {
            for j in 0..m {
                out[i * m + j] = (0..m).map(|k| outer[i * m + k] * inner[k * m + j]).sum();
            }
        }
        out
    }
}

fn clamp_unit(mut q: Vec<f64>) -> Vec<f64> {
    for x in &mut q {
        *x = x.clamp(0.0, 1.0);
    }
    q
}

/// `Σ ∘ φ` for a reparameterization `φ: I^m → I^m` that fixes the boundary structure:
/// paths keep their endpoints; bigons keep their source, target and endpoint edges.
pub fn reparameterize(map: &Map, phi: &Map) -> Result<Map, GeometryError> {
    let m = map.arity();
    if phi.arity() != m || phi.dim() != m {
        return Err(GeometryError::Arity { expected: m, actual: phi.arity() });
    }
    let n = BOUNDARY_SAMPLES;
    let tol = 1e-12;
    let grid = |k: usize| k as f64 / (n - 1) as f64;
    match m {
        1 => {
            if phi.eval(&[0.0])[0].abs() > tol || (phi.eval(&[1.0])[0] - 1.0).abs() > tol {
                return Err(GeometryError::NotBoundaryFixing { reason: "endpoints move" });
            }
            for k in 0..n {
                if phi.jacobian(&[grid(k)])[0] < -tol {
                    return Err(GeometryError::NotBoundaryFixing { reason: "orientation reversed" });
                }
            }
        }
        _ => {
            // every face x_j ∈ {0, 1} is carried into itself
            let faces = if m == 2 { n } else { n * n };
            for j in 0..m {
                let free: Vec<usize> = (0..m).filter(|&i| i != j).collect();
                for end in [0.0, 1.0] {
                    for k in 0..faces {
                        let mut p = vec![end; m];
                        p[free[0]] = grid(k % n);
                        if let Some(&f) = free.get(1) {
                            p[f] = grid(k / n);
                        }
                        if (phi.eval(&p)[j] - end).abs() > tol {
                            return Err(GeometryError::NotBoundaryFixing { reason: "a boundary face moves" });
                        }
                    }
                }
            }
            for k in 1..n - 1 {
                for l in 1..n - 1 {
                    let mut p = vec![grid(l); m];
                    p[0] = grid(k);
                    if det(&phi.jacobian(&p), m) <= 0.0 {
                        return Err(GeometryError::NotBoundaryFixing { reason: "orientation reversed" });
                    }
                }
            }
        }
    }
    Ok(Arc::new(Reparam { inner: map.clone(), phi: phi.clone() }))
}

fn det(j: &[f64], m: usize) -> f64 {
    match m {
        1 => j[0],
        2 => j[0] * j[3] - j[1] * j[2],
        _ => {
            j[0] * (j[4] * j[8] - j[5] * j[7]) - j[1] * (j[3] * j[8] - j[5] * j[6]) + j[2] * (j[3] * j[7] - j[4] * j[6])
        }
    }
}

/// The square-filling bigon in `I²` from the L-path `(0,0) → (s,0) → (s,t)` to the reversed-L path
/// `(0,0) → (0,t) → (s,t)`, filling `[0,s]×[0,t]`.
pub fn canonical_bigon(s: f64, t: f64) -> Result<Map, GeometryError> {
    for x in [s, t] {
        if !(0.0..=1.0).contains(&x) {
            return Err(GeometryError::OutOfRange(x));
        }
    }
    Ok(Arc::new(canonical_bigon_scaled(s, t)))
}

/// Same as [`canonical_bigon`] without the range check (used with negative scales by reconstruction).
pub fn canonical_bigon_scaled(s: f64, t: f64) -> FnMap {
    FnMap::new(2, 2, move |p| {
        let (l, r) = l_paths(p[1]);
        let u = p[0];
        vec![s * ((1.0 - u) * l.0 + u * r.0), t * ((1.0 - u) * l.1 + u * r.1)]
    })
    .with_jacobian(move |p| {
        let (l, r) = l_paths(p[1]);
        let (dl, dr) = l_paths_prime(p[1]);
        let u = p[0];
        vec![
            s * (r.0 - l.0),
            s * ((1.0 - u) * dl.0 + u * dr.0),
            t * (r.1 - l.1),
            t * ((1.0 - u) * dl.1 + u * dr.1),
        ]
    })
}

/// Cubic easing `[0,1] → [0,1]` with zero speed at both ends.
fn ease(x: f64) -> f64 {
    x * x * (3.0 - 2.0 * x)
}

fn ease_prime(x: f64) -> f64 {
    6.0 * x * (1.0 - x)
}

/// Unit L-path and reversed L-path in `I²`; both stop at the corner at `v = 1/2`.
fn l_paths(v: f64) -> ((f64, f64), (f64, f64)) {
    if v <= 0.5 {
        let a = ease(2.0 * v);
        ((a, 0.0), (0.0, a))
    } else {
        let a = ease(2.0 * v - 1.0);
        ((1.0, a), (a, 1.0))
    }
}

fn l_paths_prime(v: f64) -> ((f64, f64), (f64, f64)) {
    if v <= 0.5 {
        let a = 2.0 * ease_prime(2.0 * v);
        ((a, 0.0), (0.0, a))
    } else {
        let a = 2.0 * ease_prime(2.0 * v - 1.0);
        ((0.0, a), (a, 0.0))
    }
}

/// Push a map into a chart through an affine plane: `x + a·p₀ X + b·p₁ Y`, applied to a map in `R²`.
pub fn affine_push(inner: Map, origin: &[f64], e1: &[f64], e2: &[f64]) -> Map {
    let (o, a, b) = (origin.to_vec(), e1.to_vec(), e2.to_vec());
    let (a2, b2) = (a.clone(), b.clone());
    let d = o.len();
    let m = inner.arity();
    let inner2 = inner.clone();
    Arc::new(
        FnMap::new(m, d, move |p| {
            let q = inner.eval(p);
            (0..d).map(|i| o[i] + q[0] * a[i] + q[1] * b[i]).collect()
        })
        .with_jacobian(move |p| {
            let j = inner2.jacobian(p);
            let mut out = vec![0.0; d * m];
            for i in 0..d {
                for k in 0..m {
                    out[i * m + k] = a2[i] * j[k] + b2[i] * j[m + k];
                }
            }
            out
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    fn dsl(arity: usize, comps: &[&str]) -> Map {
        Arc::new(DslMap::new(arity, comps.iter().map(|s| parse(s).unwrap()).collect()).unwrap())
    }

    #[test]
    fn smooth_step_is_flat_at_the_ends() {
        assert_eq!(smooth_step(0.0), 0.0);
        assert_eq!(smooth_step(1.0), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        assert!(smooth_step_prime(1e-3) < 1e-300);
        let h = 1e-6;
        for x in [0.2, 0.5, 0.7] {
            let fd = (smooth_step(x + h) - smooth_step(x - h)) / (2.0 * h);
            assert!((fd - smooth_step_prime(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn concatenated_segments_pass_through_the_corner() {
        let a = straight_path(&[0.0, 0.0], &[1.0, 0.0]);
        let b = straight_path(&[1.0, 0.0], &[1.0, 1.0]);
        let c = concat_paths(&a, &b).unwrap();
        assert_eq!(c.eval(&[0.0]), vec![0.0, 0.0]);
        assert_eq!(c.eval(&[0.5]), vec![1.0, 0.0]);
        assert_eq!(c.eval(&[1.0]), vec![1.0, 1.0]);
        let q = c.eval(&[0.25]);
        assert!((q[0] - 0.5).abs() < 1e-12 && q[1] == 0.0);
        assert!(c.jacobian(&[0.5]).iter().all(|x| x.abs() < 1e-300));
    }

    #[test]
    fn concat_rejects_gaps() {
        let a = straight_path(&[0.0], &[1.0]);
        let b = straight_path(&[1.1], &[2.0]);
        assert!(matches!(concat_paths(&a, &b), Err(GeometryError::EndpointMismatch { .. })));
    }

    #[test]
    fn vertical_rejects_mismatched_boundary() {
        let a = dsl(2, &["v", "u*sin(pi*v)"]);
        let b = dsl(2, &["v", "(u+0.5)*sin(pi*v)"]);
        match compose_bigons_vertical(&a, &b) {
            Err(GeometryError::BoundaryMismatch { mismatch, .. }) => assert!((mismatch - 0.5).abs() < 1e-12),
            other => panic!("{:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn dsl_jacobian_converges_at_fourth_order() {
        let m = DslMap::new(2, vec![parse("sin(2*u)*exp(v)").unwrap()]).unwrap();
        let exact = |u: f64, v: f64| [2.0 * libm::cos(2.0 * u) * libm::exp(v), libm::sin(2.0 * u) * libm::exp(v)];
        for p in [[0.3, 0.6], [0.01, 0.99]] {
            let e1 = fd_jacobian(&m, &p, 1e-2);
            let e2 = fd_jacobian(&m, &p, 5e-3);
            let ex = exact(p[0], p[1]);
            let err1 = (e1[0] - ex[0]).abs().max((e1[1] - ex[1]).abs());
            let err2 = (e2[0] - ex[0]).abs().max((e2[1] - ex[1]).abs());
            let order = libm::log2(err1 / err2);
            assert!(order > 3.9, "order {} at {:?}", order, p);
        }
    }

    #[test]
    fn canonical_bigon_corners_and_image() {
        let b = canonical_bigon(0.7, 0.4).unwrap();
        assert_eq!(b.eval(&[0.0, 0.5]), vec![0.7, 0.0]);
        assert_eq!(b.eval(&[1.0, 0.5]), vec![0.0, 0.4]);
        for u in [0.0, 0.3, 1.0] {
            assert_eq!(b.eval(&[u, 0.0]), vec![0.0, 0.0]);
            assert_eq!(b.eval(&[u, 1.0]), vec![0.7, 0.4]);
        }
        let z = canonical_bigon(0.0, 0.0).unwrap();
        assert_eq!(z.eval(&[0.4, 0.6]), vec![0.0, 0.0]);
        assert!(canonical_bigon(1.2, 0.0).is_err());
    }

    #[test]
    fn reparameterization_checks() {
        let path = dsl(1, &["u", "u*u"]);
        let ok = dsl(1, &["(1-cos(pi*u))/2"]);
        let r = reparameterize(&path, &ok).unwrap();
        assert!((r.eval(&[0.5])[0] - 0.5).abs() < 1e-15);
        let bad = dsl(1, &["u/2"]);
        assert!(reparameterize(&path, &bad).is_err());
        let bigon = dsl(2, &["v", "u*sin(pi*v)"]);
        assert!(reparameterize(&bigon, &dsl(2, &["u^2", "v"])).is_ok());
        assert!(reparameterize(&bigon, &dsl(2, &["u", "v/2"])).is_err());
        assert!(reparameterize(&bigon, &dsl(2, &["1-u", "v"])).is_err());
    }

    #[test]
    fn slices_and_reversal() {
        let b = dsl(2, &["v", "u*sin(pi*v)"]);
        let src = bigon_source(&b);
        let tgt = bigon_target(&b);
        assert_eq!(src.eval(&[0.5]), vec![0.5, 0.0]);
        assert!((tgt.eval(&[0.5])[1] - 1.0).abs() < 1e-15);
        let rev = reverse_bigon(&b);
        assert!((rev.eval(&[0.0, 0.5])[1] - 1.0).abs() < 1e-15);
        let j = src.jacobian(&[0.3]);
        assert!((j[0] - 1.0).abs() < 1e-10 && j[1].abs() < 1e-10);
    }
}
