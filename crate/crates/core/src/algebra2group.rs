//! Crossed modules `(G, H, t, α)` and the strict 2-group `G⋉H` they define.
//!
//! Two backends: finite groups given by multiplication tables, and a registry
//! of matrix Lie crossed modules with closed-form `t` and `α`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;

use rand::{Rng, RngCore};

use crate::lie2algebra::LieAlgebra;
use crate::matrix::{c, CMat, MatrixError, C64};
use crate::sampling::{rng, SamplePlan};

/// Malformed group or crossed-module tables.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StructureError {
    #[error("{table}: row {row} has {len} entries, expected {expected}")]
    RowLength { table: &'static str, row: usize, len: usize, expected: usize },
    #[error("{table}: entry at row {row}, column {col} is {value}, out of range 0..{order}")]
    OutOfRange { table: &'static str, row: usize, col: usize, value: usize, order: usize },
    #[error("{table}: row {row}, column {col} repeats an element (not a Latin square)")]
    NotLatin { table: &'static str, row: usize, col: usize },
    #[error("{table}: no two-sided identity")]
    NoIdentity { table: &'static str },
    #[error("{table}: not associative at ({a}, {b}, {c})")]
    NotAssociative { table: &'static str, a: usize, b: usize, c: usize },
    #[error("{table}: table is empty")]
    Empty { table: &'static str },
    #[error("exhaustive sampling requested for a continuum group")]
    NotEnumerable,
}

/// Errors from 2-group arithmetic.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TwoGroupError {
    #[error("element does not belong to this crossed module: {0}")]
    Domain(String),
    #[error("not composable: source of the outer cell differs from the target of the inner cell by {mismatch:e}")]
    NotComposable { mismatch: f64 },
}

/// Finite group as a multiplication table over `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteGroup {
    table: Vec<Vec<usize>>,
    identity: usize,
    inverse: Vec<usize>,
}

impl FiniteGroup {
    pub fn new(table: Vec<Vec<usize>>) -> Result<Self, StructureError> {
        Self::with_name(table, "group")
    }

    pub fn with_name(table: Vec<Vec<usize>>, name: &'static str) -> Result<Self, StructureError> {
        let n = table.len();
        if n == 0 {
            return Err(StructureError::Empty { table: name });
        }
        for (r, row) in table.iter().enumerate() {
            if row.len() != n {
                return Err(StructureError::RowLength { table: name, row: r, len: row.len(), expected: n });
            }
            let mut seen = vec![false; n];
            for (col, &v) in row.iter().enumerate() {
                if v >= n {
                    return Err(StructureError::OutOfRange { table: name, row: r, col, value: v, order: n });
                }
                if seen[v] {
                    return Err(StructureError::NotLatin { table: name, row: r, col });
                }
                seen[v] = true;
            }
        }
        for col in 0..n {
            let mut seen = vec![false; n];
            for (r, row) in table.iter().enumerate() {
                if seen[row[col]] {
                    return Err(StructureError::NotLatin { table: name, row: r, col });
                }
                seen[row[col]] = true;
            }
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|x| table[e][x] == x && table[x][e] == x))
            .ok_or(StructureError::NoIdentity { table: name })?;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if table[table[a][b]][c] != table[a][table[b][c]] {
                        return Err(StructureError::NotAssociative { table: name, a, b, c });
                    }
                }
            }
        }
        let inverse = (0..n).map(|a| (0..n).find(|&b| table[a][b] == identity).expect("Latin square")).collect();
        Ok(FiniteGroup { table, identity, inverse })
    }

    /// Cyclic group `Z_n` with addition mod n.
    pub fn cyclic(n: usize) -> Self {
        let table = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        Self::new(table).expect("cyclic table is a group")
    }

    pub fn order(&self) -> usize {
        self.table.len()
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    #[inline]
    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a][b]
    }

    #[inline]
    pub fn inv(&self, a: usize) -> usize {
        self.inverse[a]
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.table
    }
}

/// Interface shared by both backends; used by the 2-group and torsor layers.
pub trait CrossedModule {
    type G: Clone + Debug;
    type H: Clone + Debug;

    fn g_id(&self) -> Self::G;
    fn g_mul(&self, a: &Self::G, b: &Self::G) -> Self::G;
    fn g_inv(&self, a: &Self::G) -> Self::G;
    fn h_id(&self) -> Self::H;
    fn h_mul(&self, a: &Self::H, b: &Self::H) -> Self::H;
    fn h_inv(&self, a: &Self::H) -> Self::H;
    fn t(&self, h: &Self::H) -> Self::G;
    fn alpha(&self, g: &Self::G, h: &Self::H) -> Self::H;

    /// Distances; zero means equal for the finite backend.
    fn g_dist(&self, a: &Self::G, b: &Self::G) -> f64;
    fn h_dist(&self, a: &Self::H, b: &Self::H) -> f64;
    /// Equality tolerance: exact for finite, `1e-9` for matrix.
    fn tolerance(&self) -> f64;

    fn g_valid(&self, g: &Self::G) -> bool;
    fn h_valid(&self, h: &Self::H) -> bool;

    /// All elements, if finite.
    fn all_g(&self) -> Option<Vec<Self::G>>;
    fn all_h(&self) -> Option<Vec<Self::H>>;
    fn sample_g(&self, rng: &mut dyn RngCore) -> Self::G;
    fn sample_h(&self, rng: &mut dyn RngCore) -> Self::H;
    /// Elements of `ker t` to test centrality against.
    fn kernel_elements(&self, rng: &mut dyn RngCore, count: usize) -> Vec<Self::H>;

    /// Some `h` with `t(h) = g`, if one is known.
    fn t_preimage(&self, g: &Self::G) -> Option<Self::H> {
        self.all_h()?.into_iter().find(|h| self.g_dist(&self.t(h), g) <= self.tolerance())
    }

    fn describe_g(&self, g: &Self::G) -> String {
        format!("{:?}", g)
    }
    fn describe_h(&self, h: &Self::H) -> String {
        format!("{:?}", h)
    }
}

/// Finite crossed module given by tables; `alpha[g][h]` is `α_g(h)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteCrossedModule {
    g: FiniteGroup,
    h: FiniteGroup,
    t: Vec<usize>,
    alpha: Vec<Vec<usize>>,
}

impl FiniteCrossedModule {
    /// Validates shapes and ranges only; the axioms are checked by [`check_crossed_module`].
    pub fn new(g: FiniteGroup, h: FiniteGroup, t: Vec<usize>, alpha: Vec<Vec<usize>>) -> Result<Self, StructureError> {
        let (ng, nh) = (g.order(), h.order());
        if t.len() != nh {
            return Err(StructureError::RowLength { table: "t", row: 0, len: t.len(), expected: nh });
        }
        for (col, &v) in t.iter().enumerate() {
            if v >= ng {
                return Err(StructureError::OutOfRange { table: "t", row: 0, col, value: v, order: ng });
            }
        }
        if alpha.len() != ng {
            return Err(StructureError::RowLength { table: "alpha", row: alpha.len(), len: alpha.len(), expected: ng });
        }
        for (row, r) in alpha.iter().enumerate() {
            if r.len() != nh {
                return Err(StructureError::RowLength { table: "alpha", row, len: r.len(), expected: nh });
            }
            for (col, &v) in r.iter().enumerate() {
                if v >= nh {
                    return Err(StructureError::OutOfRange { table: "alpha", row, col, value: v, order: nh });
                }
            }
        }
        Ok(FiniteCrossedModule { g, h, t, alpha })
    }

    /// `t ≡ e`, `α` trivial.
    pub fn trivial(g: FiniteGroup, h: FiniteGroup) -> Self {
        let t = vec![g.identity(); h.order()];
        let alpha = (0..g.order()).map(|_| (0..h.order()).collect()).collect();
        Self::new(g, h, t, alpha).expect("trivial crossed module is well formed")
    }

    /// `G = H`, `t = id`, `α` = conjugation.
    pub fn identity_conjugation(g: FiniteGroup) -> Self {
        let n = g.order();
        let t = (0..n).collect();
        let alpha = (0..n).map(|a| (0..n).map(|b| g.mul(g.mul(a, b), g.inv(a))).collect()).collect();
        Self::new(g.clone(), g, t, alpha).expect("conjugation crossed module is well formed")
    }

    pub fn g_group(&self) -> &FiniteGroup {
        &self.g
    }

    pub fn h_group(&self) -> &FiniteGroup {
        &self.h
    }

    pub fn t_table(&self) -> &[usize] {
        &self.t
    }

    pub fn alpha_table(&self) -> &[Vec<usize>] {
        &self.alpha
    }
}

impl CrossedModule for FiniteCrossedModule {
    type G = usize;
    type H = usize;

    fn g_id(&self) -> usize {
        self.g.identity()
    }
    fn g_mul(&self, a: &usize, b: &usize) -> usize {
        self.g.mul(*a, *b)
    }
    fn g_inv(&self, a: &usize) -> usize {
        self.g.inv(*a)
    }
    fn h_id(&self) -> usize {
        self.h.identity()
    }
    fn h_mul(&self, a: &usize, b: &usize) -> usize {
        self.h.mul(*a, *b)
    }
    fn h_inv(&self, a: &usize) -> usize {
        self.h.inv(*a)
    }
    fn t(&self, h: &usize) -> usize {
        self.t[*h]
    }
    fn alpha(&self, g: &usize, h: &usize) -> usize {
        self.alpha[*g][*h]
    }
    fn g_dist(&self, a: &usize, b: &usize) -> f64 {
        if a == b {
            0.0
        } else {
            1.0
        }
    }
    fn h_dist(&self, a: &usize, b: &usize) -> f64 {
        if a == b {
            0.0
        } else {
            1.0
        }
    }
    fn tolerance(&self) -> f64 {
        0.0
    }
    fn g_valid(&self, g: &usize) -> bool {
        *g < self.g.order()
    }
    fn h_valid(&self, h: &usize) -> bool {
        *h < self.h.order()
    }
    fn all_g(&self) -> Option<Vec<usize>> {
        Some((0..self.g.order()).collect())
    }
    fn all_h(&self) -> Option<Vec<usize>> {
        Some((0..self.h.order()).collect())
    }
    fn sample_g(&self, rng: &mut dyn RngCore) -> usize {
        rng.gen_range(0..self.g.order())
    }
    fn sample_h(&self, rng: &mut dyn RngCore) -> usize {
        rng.gen_range(0..self.h.order())
    }
    fn kernel_elements(&self, _rng: &mut dyn RngCore, _count: usize) -> Vec<usize> {
        (0..self.h.order()).filter(|&h| self.t[h] == self.g.identity()).collect()
    }
}

/// Matrix group kinds used by the registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixGroup {
    Unitary(usize),
    SpecialUnitary(usize),
    SpecialOrthogonal(usize),
}

impl MatrixGroup {
    pub fn size(self) -> usize {
        match self {
            MatrixGroup::Unitary(n) | MatrixGroup::SpecialUnitary(n) | MatrixGroup::SpecialOrthogonal(n) => n,
        }
    }

    pub fn is_real(self) -> bool {
        matches!(self, MatrixGroup::SpecialOrthogonal(_))
    }

    /// Max-norm violation of the membership predicate.
    pub fn membership_defect(self, m: &CMat) -> f64 {
        let n = self.size();
        if m.n() != n || !m.is_finite() {
            return f64::INFINITY;
        }
        let mut d = (&(&m.adjoint() * m) - &CMat::identity(n)).norm_max();
        match self {
            MatrixGroup::Unitary(_) => {}
            MatrixGroup::SpecialUnitary(_) => d = d.max((m.det() - c(1.0, 0.0)).norm()),
            MatrixGroup::SpecialOrthogonal(_) => {
                d = d.max((m.det() - c(1.0, 0.0)).norm()).max(m.imag_max());
            }
        }
        d
    }

    /// Nearest group element (polar factor, then determinant fix).
    pub fn project(self, m: &CMat) -> Result<CMat, MatrixError> {
        let n = self.size();
        if n == 1 {
            let z = m.get(0, 0);
            let r = z.norm();
            if r == 0.0 || !r.is_finite() {
                return Err(MatrixError::Singular);
            }
            return Ok(CMat::scalar(z / r));
        }
        let u = m.polar_unitary()?;
        match self {
            MatrixGroup::SpecialUnitary(_) => {
                let theta = u.det().arg();
                Ok(u.scale(C64::from_polar(1.0, -theta / n as f64)))
            }
            _ => Ok(u),
        }
    }
}

/// Registered matrix crossed modules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFamily {
    /// `G = H = SU(2)`, `t = id`, `α` = conjugation.
    Su2IdConj,
    /// `G = H = U(1)`, `t = id`, `α` trivial.
    U1Id,
    /// `G = H = U(1)`, `t ≡ 1`, `α` trivial.
    U1Trivial,
    /// `H = U(2)`, `G = PU(2) ≅ SO(3)`, `t` = adjoint map, `α` = conjugation by an SU(2) lift.
    U2ToPu2,
}

impl MatrixFamily {
    pub const ALL: [MatrixFamily; 4] =
        [MatrixFamily::Su2IdConj, MatrixFamily::U1Id, MatrixFamily::U1Trivial, MatrixFamily::U2ToPu2];

    pub fn name(self) -> &'static str {
        match self {
            MatrixFamily::Su2IdConj => "su2_id_conj",
            MatrixFamily::U1Id => "u1_id",
            MatrixFamily::U1Trivial => "u1_trivial",
            MatrixFamily::U2ToPu2 => "u2_to_pu2",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        MatrixFamily::ALL.iter().copied().find(|f| f.name() == name)
    }
}

/// Pauli matrices.
pub fn pauli() -> [CMat; 3] {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    [
        CMat::from_vec(2, vec![z, one, one, z]),
        CMat::from_vec(2, vec![z, -i, i, z]),
        CMat::from_vec(2, vec![one, z, z, -one]),
    ]
}

/// `e_k = -i σ_k`, so that `[e_1, e_2] = 2 e_3`.
pub fn su2_basis() -> Vec<CMat> {
    pauli().iter().map(|s| s.scale(c(0.0, -1.0))).collect()
}

/// Coordinates of the traceless part of a 2×2 matrix in the `e_k` basis.
fn su2_coords(x: &CMat) -> [f64; 3] {
    let s = pauli();
    let mut out = [0.0; 3];
    for k in 0..3 {
        out[k] = ((&s[k] * x).trace() * c(0.0, 0.5)).re;
    }
    out
}

/// Adjoint action of a 2×2 unitary on su(2), as a real 3×3 matrix in the `e_k` basis.
pub fn adjoint_so3(h: &CMat) -> CMat {
    let basis = su2_basis();
    let hinv = h.adjoint();
    let mut data = [0.0; 9];
    for k in 0..3 {
        let img = &(h * &basis[k]) * &hinv;
        let col = su2_coords(&img);
        for l in 0..3 {
            data[l * 3 + k] = col[l];
        }
    }
    CMat::from_real(3, &data)
}

/// An SU(2) element whose adjoint action is the rotation `r` (defined up to sign).
pub fn su2_lift(r: &CMat) -> CMat {
    let m = |i: usize, j: usize| r.get(i, j).re;
    let tr = m(0, 0) + m(1, 1) + m(2, 2);
    let (w, x, y, z);
    if tr > 0.0 {
        let s = libm::sqrt(tr + 1.0) * 2.0;
        w = 0.25 * s;
        x = (m(2, 1) - m(1, 2)) / s;
        y = (m(0, 2) - m(2, 0)) / s;
        z = (m(1, 0) - m(0, 1)) / s;
    } else if m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2) {
        let s = libm::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2)) * 2.0;
        w = (m(2, 1) - m(1, 2)) / s;
        x = 0.25 * s;
        y = (m(0, 1) + m(1, 0)) / s;
        z = (m(0, 2) + m(2, 0)) / s;
    } else if m(1, 1) > m(2, 2) {
        let s = libm::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2)) * 2.0;
        w = (m(0, 2) - m(2, 0)) / s;
        x = (m(0, 1) + m(1, 0)) / s;
        y = 0.25 * s;
        z = (m(1, 2) + m(2, 1)) / s;
    } else {
        let s = libm::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1)) * 2.0;
        w = (m(1, 0) - m(0, 1)) / s;
        x = (m(0, 2) + m(2, 0)) / s;
        y = (m(1, 2) + m(2, 1)) / s;
        z = 0.25 * s;
    }
    let norm = libm::sqrt(w * w + x * x + y * y + z * z);
    let e = su2_basis();
    let mut q = CMat::identity(2).scale_re(w / norm);
    q.axpy(x / norm, &e[0]);
    q.axpy(y / norm, &e[1]);
    q.axpy(z / norm, &e[2]);
    q
}

fn random_su2(rng: &mut dyn RngCore) -> CMat {
    loop {
        let q: [f64; 4] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let r2: f64 = q.iter().map(|v| v * v).sum();
        if r2 > 1e-4 && r2 <= 1.0 {
            let r = libm::sqrt(r2);
            let e = su2_basis();
            let mut m = CMat::identity(2).scale_re(q[0] / r);
            for k in 0..3 {
                m.axpy(q[k + 1] / r, &e[k]);
            }
            return m;
        }
    }
}

fn random_phase(rng: &mut dyn RngCore) -> C64 {
    C64::from_polar(1.0, rng.gen_range(-core::f64::consts::PI..core::f64::consts::PI))
}

/// A registered matrix crossed module with its Lie 2-algebra data.
#[derive(Debug, Clone)]
pub struct MatrixCrossedModule {
    family: MatrixFamily,
    g_group: MatrixGroup,
    h_group: MatrixGroup,
    g_alg: LieAlgebra,
    h_alg: LieAlgebra,
}

impl MatrixCrossedModule {
    pub fn new(family: MatrixFamily) -> Self {
        let i1 = CMat::scalar(c(0.0, 1.0));
        let (g_group, h_group, g_basis, h_basis) = match family {
            MatrixFamily::Su2IdConj => {
                (MatrixGroup::SpecialUnitary(2), MatrixGroup::SpecialUnitary(2), su2_basis(), su2_basis())
            }
            MatrixFamily::U1Id | MatrixFamily::U1Trivial => {
                (MatrixGroup::Unitary(1), MatrixGroup::Unitary(1), vec![i1.clone()], vec![i1])
            }
            MatrixFamily::U2ToPu2 => {
                let mut h = su2_basis();
                h.push(CMat::identity(2).scale(c(0.0, 1.0)));
                let g = su2_basis().iter().map(|e| ad_so3(e)).collect();
                (MatrixGroup::SpecialOrthogonal(3), MatrixGroup::Unitary(2), g, h)
            }
        };
        MatrixCrossedModule { family, g_group, h_group, g_alg: LieAlgebra::new(g_basis), h_alg: LieAlgebra::new(h_basis) }
    }

    pub fn family(&self) -> MatrixFamily {
        self.family
    }

    pub fn g_group(&self) -> MatrixGroup {
        self.g_group
    }

    pub fn h_group(&self) -> MatrixGroup {
        self.h_group
    }

    pub fn g_alg(&self) -> &LieAlgebra {
        &self.g_alg
    }

    pub fn h_alg(&self) -> &LieAlgebra {
        &self.h_alg
    }

    /// The matrix `α_g` conjugates by, or `None` when `α` is trivial.
    fn conj_lift(&self, g: &CMat) -> Option<CMat> {
        match self.family {
            MatrixFamily::Su2IdConj => Some(g.clone()),
            MatrixFamily::U2ToPu2 => Some(su2_lift(g)),
            MatrixFamily::U1Id | MatrixFamily::U1Trivial => None,
        }
    }

    /// Infinitesimal version of [`Self::conj_lift`]: the generator conjugation uses for `X ∈ 𝔤`.
    fn conj_generator(&self, x: &CMat) -> Option<CMat> {
        match self.family {
            MatrixFamily::Su2IdConj => Some(x.clone()),
            MatrixFamily::U2ToPu2 => {
                let k = self.g_alg.coords(x);
                Some(su2_basis_combination(&k))
            }
            MatrixFamily::U1Id | MatrixFamily::U1Trivial => None,
        }
    }

    /// A right inverse of `t_*` where one exists: `t_*(section(X)) = X`.
    pub fn section(&self, x: &CMat) -> Option<CMat> {
        match self.family {
            MatrixFamily::Su2IdConj | MatrixFamily::U1Id => Some(x.clone()),
            MatrixFamily::U2ToPu2 => self.conj_generator(x),
            MatrixFamily::U1Trivial => None,
        }
    }

    pub fn t(&self, h: &CMat) -> CMat {
        match self.family {
            MatrixFamily::Su2IdConj | MatrixFamily::U1Id => h.clone(),
            MatrixFamily::U1Trivial => CMat::identity(1),
            MatrixFamily::U2ToPu2 => adjoint_so3(h),
        }
    }

    pub fn alpha(&self, g: &CMat, h: &CMat) -> CMat {
        match self.conj_lift(g) {
            Some(l) => &(&l * h) * &l.adjoint(),
            None => h.clone(),
        }
    }

    pub fn t_star(&self, xi: &CMat) -> CMat {
        match self.family {
            MatrixFamily::Su2IdConj | MatrixFamily::U1Id => xi.clone(),
            MatrixFamily::U1Trivial => CMat::zeros(1),
            MatrixFamily::U2ToPu2 => ad_so3(xi),
        }
    }

    /// `α_*(X, η)`.
    pub fn alpha_star(&self, x: &CMat, eta: &CMat) -> CMat {
        match self.conj_generator(x) {
            Some(xh) => CMat::commutator(&xh, eta),
            None => CMat::zeros(self.h_alg.matrix_size()),
        }
    }

    /// `(α_g)_* η`, the derivative of `α_g` at the identity.
    pub fn alpha_group_star(&self, g: &CMat, eta: &CMat) -> CMat {
        self.alpha(g, eta)
    }

    /// `d/dε α_{exp(εX)}(h)` at `ε = 0`.
    pub fn delta_alpha(&self, h: &CMat, x: &CMat) -> CMat {
        match self.conj_generator(x) {
            Some(xh) => &(&xh * h) - &(h * &xh),
            None => CMat::zeros(self.h_alg.matrix_size()),
        }
    }

    pub fn g_identity(&self) -> CMat {
        CMat::identity(self.g_group.size())
    }

    pub fn h_identity(&self) -> CMat {
        CMat::identity(self.h_group.size())
    }

    pub fn exp_g(&self, x: &CMat) -> CMat {
        let e = x.exp();
        self.g_group.project(&e).unwrap_or(e)
    }

    pub fn exp_h(&self, xi: &CMat) -> CMat {
        let e = xi.exp();
        self.h_group.project(&e).unwrap_or(e)
    }

    pub fn log_g(&self, g: &CMat) -> Result<CMat, MatrixError> {
        principal_log(g)
    }

    pub fn log_h(&self, h: &CMat) -> Result<CMat, MatrixError> {
        principal_log(h)
    }

    pub fn sample_g_alg(&self, rng: &mut dyn RngCore, scale: f64) -> CMat {
        let k: Vec<f64> = (0..self.g_alg.dim()).map(|_| rng.gen_range(-scale..scale)).collect();
        self.g_alg.from_coords(&k)
    }

    pub fn sample_h_alg(&self, rng: &mut dyn RngCore, scale: f64) -> CMat {
        let k: Vec<f64> = (0..self.h_alg.dim()).map(|_| rng.gen_range(-scale..scale)).collect();
        self.h_alg.from_coords(&k)
    }
}

fn su2_basis_combination(k: &[f64]) -> CMat {
    let e = su2_basis();
    let mut m = CMat::zeros(2);
    for (b, &x) in e.iter().zip(k) {
        m.axpy(x, b);
    }
    m
}

/// `ad(X)` on su(2) in the `e_k` basis, as a real 3×3 matrix.
fn ad_so3(x: &CMat) -> CMat {
    let basis = su2_basis();
    let mut data = [0.0; 9];
    for k in 0..3 {
        let col = su2_coords(&CMat::commutator(x, &basis[k]));
        for l in 0..3 {
            data[l * 3 + k] = col[l];
        }
    }
    CMat::from_real(3, &data)
}

fn principal_log(g: &CMat) -> Result<CMat, MatrixError> {
    let l = g.log()?;
    let radius = l.norm_spectral();
    if radius >= core::f64::consts::PI - 1e-9 {
        return Err(MatrixError::Branch { radius });
    }
    Ok(l)
}

impl CrossedModule for MatrixCrossedModule {
    type G = CMat;
    type H = CMat;

    fn g_id(&self) -> CMat {
        self.g_identity()
    }
    fn g_mul(&self, a: &CMat, b: &CMat) -> CMat {
        a * b
    }
    fn g_inv(&self, a: &CMat) -> CMat {
        a.adjoint()
    }
    fn h_id(&self) -> CMat {
        self.h_identity()
    }
    fn h_mul(&self, a: &CMat, b: &CMat) -> CMat {
        a * b
    }
    fn h_inv(&self, a: &CMat) -> CMat {
        a.adjoint()
    }
    fn t(&self, h: &CMat) -> CMat {
        MatrixCrossedModule::t(self, h)
    }
    fn alpha(&self, g: &CMat, h: &CMat) -> CMat {
        MatrixCrossedModule::alpha(self, g, h)
    }
    fn g_dist(&self, a: &CMat, b: &CMat) -> f64 {
        a.dist(b)
    }
    fn h_dist(&self, a: &CMat, b: &CMat) -> f64 {
        a.dist(b)
    }
    fn tolerance(&self) -> f64 {
        1e-9
    }
    fn g_valid(&self, g: &CMat) -> bool {
        self.g_group.membership_defect(g) <= 1e-10
    }
    fn h_valid(&self, h: &CMat) -> bool {
        self.h_group.membership_defect(h) <= 1e-10
    }
    fn all_g(&self) -> Option<Vec<CMat>> {
        None
    }
    fn all_h(&self) -> Option<Vec<CMat>> {
        None
    }
    fn sample_g(&self, rng: &mut dyn RngCore) -> CMat {
        match self.family {
            MatrixFamily::Su2IdConj => random_su2(rng),
            MatrixFamily::U1Id | MatrixFamily::U1Trivial => CMat::scalar(random_phase(rng)),
            MatrixFamily::U2ToPu2 => adjoint_so3(&random_su2(rng)),
        }
    }
    fn sample_h(&self, rng: &mut dyn RngCore) -> CMat {
        match self.family {
            MatrixFamily::Su2IdConj => random_su2(rng),
            MatrixFamily::U1Id | MatrixFamily::U1Trivial => CMat::scalar(random_phase(rng)),
            MatrixFamily::U2ToPu2 => random_su2(rng).scale(random_phase(rng)),
        }
    }
    fn t_preimage(&self, g: &CMat) -> Option<CMat> {
        match self.family {
            MatrixFamily::Su2IdConj | MatrixFamily::U1Id => Some(g.clone()),
            MatrixFamily::U2ToPu2 => Some(su2_lift(g)),
            MatrixFamily::U1Trivial => (g.dist(&self.g_identity()) <= 1e-9).then(|| self.h_identity()),
        }
    }
    fn kernel_elements(&self, rng: &mut dyn RngCore, count: usize) -> Vec<CMat> {
        match self.family {
            MatrixFamily::Su2IdConj | MatrixFamily::U1Id => vec![self.h_identity()],
            MatrixFamily::U1Trivial => (0..count).map(|_| CMat::scalar(random_phase(rng))).collect(),
            MatrixFamily::U2ToPu2 => (0..count).map(|_| CMat::identity(2).scale(random_phase(rng))).collect(),
        }
    }
}

/// An element `(g, h)` of `G⋉H`: a 2-cell from `g` to `t(h)·g`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoGroupElement<G, H> {
    pub g: G,
    pub h: H,
}

impl<G: Clone, H: Clone> TwoGroupElement<G, H> {
    pub fn new(g: G, h: H) -> Self {
        TwoGroupElement { g, h }
    }
}

pub type Cell<C> = TwoGroupElement<<C as CrossedModule>::G, <C as CrossedModule>::H>;

pub fn source<C: CrossedModule>(_cm: &C, x: &Cell<C>) -> C::G {
    x.g.clone()
}

pub fn target<C: CrossedModule>(cm: &C, x: &Cell<C>) -> C::G {
    cm.g_mul(&cm.t(&x.h), &x.g)
}

/// Identity 2-cell `(g, e)`.
pub fn identity_cell<C: CrossedModule>(cm: &C, g: &C::G) -> Cell<C> {
    TwoGroupElement::new(g.clone(), cm.h_id())
}

fn check_member<C: CrossedModule>(cm: &C, x: &Cell<C>) -> Result<(), TwoGroupError> {
    if !cm.g_valid(&x.g) {
        return Err(TwoGroupError::Domain(format!("g = {}", cm.describe_g(&x.g))));
    }
    if !cm.h_valid(&x.h) {
        return Err(TwoGroupError::Domain(format!("h = {}", cm.describe_h(&x.h))));
    }
    Ok(())
}

/// `(g,h)·(g',h') = (gg', h α_g(h'))`.
pub fn two_group_multiply<C: CrossedModule>(cm: &C, x: &Cell<C>, y: &Cell<C>) -> Result<Cell<C>, TwoGroupError> {
    check_member(cm, x)?;
    check_member(cm, y)?;
    Ok(mul_unchecked(cm, x, y))
}

pub(crate) fn mul_unchecked<C: CrossedModule>(cm: &C, x: &Cell<C>, y: &Cell<C>) -> Cell<C> {
    TwoGroupElement::new(cm.g_mul(&x.g, &y.g), cm.h_mul(&x.h, &cm.alpha(&x.g, &y.h)))
}

/// `(t(h)g, h') ∘ (g, h) = (g, h'h)`.
pub fn two_group_compose<C: CrossedModule>(cm: &C, y: &Cell<C>, x: &Cell<C>) -> Result<Cell<C>, TwoGroupError> {
    check_member(cm, x)?;
    check_member(cm, y)?;
    compose_unchecked(cm, y, x)
}

pub(crate) fn compose_unchecked<C: CrossedModule>(cm: &C, y: &Cell<C>, x: &Cell<C>) -> Result<Cell<C>, TwoGroupError> {
    let mismatch = cm.g_dist(&y.g, &target(cm, x));
    if mismatch > cm.tolerance() {
        return Err(TwoGroupError::NotComposable { mismatch });
    }
    Ok(TwoGroupElement::new(x.g.clone(), cm.h_mul(&y.h, &x.h)))
}

/// Inverse for the group product: `(g⁻¹, α_{g⁻¹}(h⁻¹))`.
pub fn multiplicative_inverse<C: CrossedModule>(cm: &C, x: &Cell<C>) -> Cell<C> {
    let gi = cm.g_inv(&x.g);
    let hi = cm.alpha(&gi, &cm.h_inv(&x.h));
    TwoGroupElement::new(gi, hi)
}

/// Inverse for composition: `(t(h)g, h⁻¹)`.
pub fn compositional_inverse<C: CrossedModule>(cm: &C, x: &Cell<C>) -> Cell<C> {
    TwoGroupElement::new(target(cm, x), cm.h_inv(&x.h))
}

/// `1_{t(h)}·h' ∘ h = h'·h`.
pub fn whisker_scalar<C: CrossedModule>(cm: &C, h: &C::H, h2: &C::H) -> C::H {
    cm.h_mul(h2, h)
}

/// One axiom with its worst defect and the first failing sample.
#[derive(Debug, Clone, PartialEq)]
pub struct AxiomCheck {
    pub name: &'static str,
    pub max_defect: f64,
    pub samples: usize,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub checks: Vec<AxiomCheck>,
    pub tolerance: f64,
}

impl AxiomReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.max_defect <= self.tolerance)
    }

    pub fn check(&self, name: &str) -> Option<&AxiomCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Tally {
    name: &'static str,
    max: f64,
    n: usize,
    witness: Option<String>,
    tol: f64,
}

impl Tally {
    fn new(name: &'static str, tol: f64) -> Self {
        Tally { name, max: 0.0, n: 0, witness: None, tol }
    }

    fn record(&mut self, defect: f64, witness: impl FnOnce() -> String) {
        self.n += 1;
        if defect > self.tol && self.witness.is_none() {
            self.witness = Some(witness());
        }
        if defect > self.max || defect.is_nan() {
            self.max = if defect.is_nan() { f64::INFINITY } else { defect };
        }
    }

    fn finish(self) -> AxiomCheck {
        AxiomCheck { name: self.name, max_defect: self.max, samples: self.n, witness: self.witness }
    }
}

fn pairs<C: CrossedModule, A: Clone, B: Clone>(
    all_a: Option<Vec<A>>,
    all_b: Option<Vec<B>>,
    plan: SamplePlan,
    sample_a: impl Fn(&mut dyn RngCore) -> A,
    sample_b: impl Fn(&mut dyn RngCore) -> B,
    salt: u64,
) -> Result<Vec<(A, B)>, StructureError> {
    match plan {
        SamplePlan::Exhaustive => {
            let (a, b) = (all_a.ok_or(StructureError::NotEnumerable)?, all_b.ok_or(StructureError::NotEnumerable)?);
            let mut out = Vec::with_capacity(a.len() * b.len());
            for x in &a {
                for y in &b {
                    out.push((x.clone(), y.clone()));
                }
            }
            Ok(out)
        }
        SamplePlan::Random { count, seed } => {
            let mut r = rng(seed ^ salt);
            Ok((0..count).map(|_| (sample_a(&mut r), sample_b(&mut r))).collect())
        }
    }
}

/// Check every crossed-module axiom over `plan`.
pub fn check_crossed_module<C: CrossedModule>(cm: &C, plan: SamplePlan) -> Result<AxiomReport, StructureError> {
    let tol = cm.tolerance();
    let gh = pairs::<C, _, _>(cm.all_g(), cm.all_h(), plan, |r| cm.sample_g(r), |r| cm.sample_h(r), 0x11)?;
    let hh = pairs::<C, _, _>(cm.all_h(), cm.all_h(), plan, |r| cm.sample_h(r), |r| cm.sample_h(r), 0x22)?;
    let gg = pairs::<C, _, _>(cm.all_g(), cm.all_g(), plan, |r| cm.sample_g(r), |r| cm.sample_g(r), 0x33)?;

    let mut equivariance = Tally::new("t_equivariance", tol);
    let mut alpha_hom = Tally::new("alpha_automorphism", tol);
    for (g, h) in &gh {
        let lhs = cm.t(&cm.alpha(g, h));
        let rhs = cm.g_mul(&cm.g_mul(g, &cm.t(h)), &cm.g_inv(g));
        equivariance.record(cm.g_dist(&lhs, &rhs), || format!("g={}, h={}", cm.describe_g(g), cm.describe_h(h)));
        // α_g(h)α_g(h⁻¹) = e
        let d = cm.h_dist(&cm.h_mul(&cm.alpha(g, h), &cm.alpha(g, &cm.h_inv(h))), &cm.h_id());
        alpha_hom.record(d, || format!("g={}, h={}", cm.describe_g(g), cm.describe_h(h)));
    }

    let mut peiffer = Tally::new("peiffer", tol);
    let mut t_hom = Tally::new("t_homomorphism", tol);
    for (h, h2) in &hh {
        let lhs = cm.alpha(&cm.t(h), h2);
        let rhs = cm.h_mul(&cm.h_mul(h, h2), &cm.h_inv(h));
        peiffer.record(cm.h_dist(&lhs, &rhs), || format!("h={}, h'={}", cm.describe_h(h), cm.describe_h(h2)));
        let d = cm.g_dist(&cm.t(&cm.h_mul(h, h2)), &cm.g_mul(&cm.t(h), &cm.t(h2)));
        t_hom.record(d, || format!("h={}, h'={}", cm.describe_h(h), cm.describe_h(h2)));
        // α_g additive in h: α_g(hh') = α_g(h)α_g(h')
        let g = cm.t(h2);
        let d = cm.h_dist(&cm.alpha(&g, &cm.h_mul(h, h2)), &cm.h_mul(&cm.alpha(&g, h), &cm.alpha(&g, h2)));
        alpha_hom.record(d, || format!("g=t({}), h={}", cm.describe_h(h2), cm.describe_h(h)));
    }

    for (g, g2) in &gg {
        // α_{gg'} = α_g α_{g'} on a probe element
        let mut r = rng(0x44);
        let probe = cm.sample_h(&mut r);
        let lhs = cm.alpha(&cm.g_mul(g, g2), &probe);
        let rhs = cm.alpha(g, &cm.alpha(g2, &probe));
        alpha_hom.record(cm.h_dist(&lhs, &rhs), || format!("g={}, g'={}", cm.describe_g(g), cm.describe_g(g2)));
    }

    let mut central = Tally::new("ker_t_central", tol);
    let mut r = rng(match plan {
        SamplePlan::Random { seed, .. } => seed ^ 0x55,
        SamplePlan::Exhaustive => 0x55,
    });
    let count = match plan {
        SamplePlan::Random { count, .. } => count,
        SamplePlan::Exhaustive => 0,
    };
    let kernel = cm.kernel_elements(&mut r, count.max(1));
    let others: Vec<C::H> = match cm.all_h() {
        Some(all) => all,
        None => (0..count.max(1)).map(|_| cm.sample_h(&mut r)).collect(),
    };
    for k in &kernel {
        central.record(cm.g_dist(&cm.t(k), &cm.g_id()), || format!("kernel sample {} not in ker t", cm.describe_h(k)));
        for h in &others {
            let d = cm.h_dist(&cm.h_mul(k, h), &cm.h_mul(h, k));
            central.record(d, || format!("k={}, h={}", cm.describe_h(k), cm.describe_h(h)));
        }
    }

    Ok(AxiomReport {
        checks: vec![equivariance.finish(), peiffer.finish(), t_hom.finish(), central.finish(), alpha_hom.finish()],
        tolerance: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z2_z3() -> FiniteCrossedModule {
        FiniteCrossedModule::trivial(FiniteGroup::cyclic(2), FiniteGroup::cyclic(3))
    }

    fn z2_z4_inversion() -> FiniteCrossedModule {
        let g = FiniteGroup::cyclic(2);
        let h = FiniteGroup::cyclic(4);
        let t = (0..4).map(|x| x % 2).collect();
        let alpha = vec![(0..4).collect(), (0..4).map(|x| (4 - x) % 4).collect()];
        FiniteCrossedModule::new(g, h, t, alpha).unwrap()
    }

    #[test]
    fn trivial_module_passes_exactly() {
        let r = check_crossed_module(&z2_z3(), SamplePlan::Exhaustive).unwrap();
        assert!(r.pass());
        assert!(r.checks.iter().all(|c| c.max_defect == 0.0));
    }

    #[test]
    fn inversion_counterexample_fails_peiffer_at_one_one() {
        let r = check_crossed_module(&z2_z4_inversion(), SamplePlan::Exhaustive).unwrap();
        assert!(!r.pass());
        let p = r.check("peiffer").unwrap();
        assert!(p.max_defect > 0.0);
        assert_eq!(p.witness.as_deref(), Some("h=1, h'=1"));
        assert_eq!(r.check("t_equivariance").unwrap().max_defect, 0.0);
    }

    #[test]
    fn malformed_tables_name_the_cell() {
        let err = FiniteGroup::new(vec![vec![0, 1], vec![1, 1]]).unwrap_err();
        assert_eq!(err, StructureError::NotLatin { table: "group", row: 1, col: 1 });
        let err = FiniteGroup::new(vec![vec![0, 1], vec![1, 2]]).unwrap_err();
        assert!(matches!(err, StructureError::OutOfRange { row: 1, col: 1, .. }));
    }

    #[test]
    fn finite_multiply_and_compose() {
        let cm = z2_z3();
        let x = TwoGroupElement::new(1, 2);
        let y = TwoGroupElement::new(1, 1);
        assert_eq!(two_group_multiply(&cm, &x, &y).unwrap(), TwoGroupElement::new(0, 0));
        assert_eq!(two_group_compose(&cm, &x, &y).unwrap(), TwoGroupElement::new(1, 0));
        let e = TwoGroupElement::new(0, 0);
        assert_eq!(two_group_multiply(&cm, &e, &x).unwrap(), x);
        assert!(matches!(two_group_multiply(&cm, &TwoGroupElement::new(2, 0), &x), Err(TwoGroupError::Domain(_))));
    }

    #[test]
    fn whisker_is_product() {
        let cm = z2_z3();
        assert_eq!(whisker_scalar(&cm, &1, &2), 0);
        assert_eq!(whisker_scalar(&cm, &1, &0), 1);
    }

    #[test]
    fn matrix_families_pass_axioms() {
        for fam in MatrixFamily::ALL {
            let cm = MatrixCrossedModule::new(fam);
            let r = check_crossed_module(&cm, SamplePlan::random(200, 7)).unwrap();
            assert!(r.pass(), "{:?}: {:?}", fam, r);
        }
    }

    #[test]
    fn lift_inverts_adjoint() {
        let mut r = rng(3);
        let cm = MatrixCrossedModule::new(MatrixFamily::U2ToPu2);
        for _ in 0..200 {
            let g = cm.sample_g(&mut r);
            assert!(adjoint_so3(&su2_lift(&g)).dist(&g) < 1e-12);
            assert!(cm.g_group().membership_defect(&g) < 1e-12);
        }
    }

    #[test]
    fn section_inverts_t_star() {
        let cm = MatrixCrossedModule::new(MatrixFamily::U2ToPu2);
        let mut r = rng(5);
        for _ in 0..20 {
            let x = cm.sample_g_alg(&mut r, 1.0);
            assert!(cm.t_star(&cm.section(&x).unwrap()).dist(&x) < 1e-14);
        }
    }

    #[test]
    fn matrix_compose_checks_composability() {
        let cm = MatrixCrossedModule::new(MatrixFamily::Su2IdConj);
        let mut r = rng(9);
        let (g, h, h2) = (cm.sample_g(&mut r), cm.sample_h(&mut r), cm.sample_h(&mut r));
        let x = TwoGroupElement::new(g.clone(), h.clone());
        let bad = TwoGroupElement::new(g.clone(), h2.clone());
        assert!(matches!(two_group_compose(&cm, &bad, &x), Err(TwoGroupError::NotComposable { .. })));
        let y = TwoGroupElement::new(target(&cm, &x), h2.clone());
        let yx = two_group_compose(&cm, &y, &x).unwrap();
        assert!(yx.h.dist(&whisker_scalar(&cm, &h, &h2)) < 1e-12);
        // (g,h)·(g⁻¹,e) = (e,h)
        let prod = two_group_multiply(&cm, &x, &TwoGroupElement::new(g.adjoint(), cm.h_identity())).unwrap();
        assert!(prod.g.dist(&cm.g_identity()) < 1e-12 && prod.h.dist(&h) < 1e-15);
    }
}
