//! Infinitesimal crossed modules: basis-indexed matrix Lie algebras, the maps
//! `t_*` and `α_*`, the semidirect bracket, and the exp/log bridge.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::algebra2group::MatrixCrossedModule;
use crate::matrix::{CMat, MatrixError};

/// A real Lie algebra of complex matrices with a fixed basis.
#[derive(Debug, Clone)]
pub struct LieAlgebra {
    n: usize,
    basis: Vec<CMat>,
    gram_inv: Vec<f64>,
    structure: Vec<f64>,
}

impl LieAlgebra {
    /// Basis matrices must be linearly independent over the reals and closed under commutators.
    pub fn new(basis: Vec<CMat>) -> Self {
        let dim = basis.len();
        let n = basis.first().map(|b| b.n()).unwrap_or(1);
        let mut gram = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                gram[i * dim + j] = CMat::inner(&basis[i], &basis[j]);
            }
        }
        let gram_inv = invert_real(dim, &gram).expect("basis is linearly independent");
        let mut alg = LieAlgebra { n, basis, gram_inv, structure: Vec::new() };
        let mut structure = vec![0.0; dim * dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let br = CMat::commutator(&alg.basis[i], &alg.basis[j]);
                let coords = alg.coords(&br);
                for k in 0..dim {
                    structure[(i * dim + j) * dim + k] = coords[k];
                }
            }
        }
        alg.structure = structure;
        alg
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Side length of the matrices.
    pub fn matrix_size(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> &[CMat] {
        &self.basis
    }

    /// Structure constant `c_ij^k` with `[e_i, e_j] = Σ_k c_ij^k e_k`.
    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> f64 {
        let d = self.dim();
        self.structure[(i * d + j) * d + k]
    }

    pub fn zero(&self) -> CMat {
        CMat::zeros(self.n)
    }

    /// Coordinates of `x` in the basis (orthogonal projection if `x` is outside the span).
    pub fn coords(&self, x: &CMat) -> Vec<f64> {
        let d = self.dim();
        let rhs: Vec<f64> = self.basis.iter().map(|b| CMat::inner(b, x)).collect();
        (0..d).map(|i| (0..d).map(|j| self.gram_inv[i * d + j] * rhs[j]).sum()).collect()
    }

    pub fn from_coords(&self, c: &[f64]) -> CMat {
        let mut m = CMat::zeros(self.n);
        for (b, &x) in self.basis.iter().zip(c) {
            if x != 0.0 {
                m.axpy(x, b);
            }
        }
        m
    }

    /// Distance from `x` to the span of the basis.
    pub fn membership_defect(&self, x: &CMat) -> f64 {
        x.dist(&self.from_coords(&self.coords(x)))
    }

    pub fn bracket(&self, x: &CMat, y: &CMat) -> CMat {
        CMat::commutator(x, y)
    }

    /// Max defect of antisymmetry and Jacobi on all basis triples, computed from the structure constants.
    pub fn basis_law_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    worst = worst.max((self.structure_constant(i, j, k) + self.structure_constant(j, i, k)).abs());
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for m in 0..d {
                        // [[e_i,e_j],e_k] + cyclic, component m
                        let mut s = 0.0;
                        for l in 0..d {
                            s += self.structure_constant(i, j, l) * self.structure_constant(l, k, m)
                                + self.structure_constant(j, k, l) * self.structure_constant(l, i, m)
                                + self.structure_constant(k, i, l) * self.structure_constant(l, j, m);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }
}

fn invert_real(n: usize, a: &[f64]) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let mut p = col;
        for r in col + 1..n {
            if m[r * n + col].abs() > m[p * n + col].abs() {
                p = r;
            }
        }
        if m[p * n + col].abs() < 1e-14 {
            return None;
        }
        for j in 0..n {
            m.swap(col * n + j, p * n + j);
            inv.swap(col * n + j, p * n + j);
        }
        let piv = m[col * n + col];
        for j in 0..n {
            m[col * n + j] /= piv;
            inv[col * n + j] /= piv;
        }
        for r in 0..n {
            if r != col {
                let f = m[r * n + col];
                if f != 0.0 {
                    for j in 0..n {
                        m[r * n + j] -= f * m[col * n + j];
                        inv[r * n + j] -= f * inv[col * n + j];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Element `X + ξ` of `𝔤 ⊕ 𝔥`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiElement {
    pub g: CMat,
    pub h: CMat,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Lie2Error {
    #[error("dimension mismatch: expected {expected}x{expected} matrices, got {actual}x{actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// The Lie 2-algebra of a matrix crossed module.
#[derive(Debug, Clone, Copy)]
pub struct LieTwoAlgebra<'a> {
    cm: &'a MatrixCrossedModule,
}

/// One named check with its worst observed defect.
#[derive(Debug, Clone, PartialEq)]
pub struct LawCheck {
    pub name: String,
    pub defect: f64,
    pub tolerance: f64,
}

impl LawCheck {
    pub fn pass(&self) -> bool {
        self.defect <= self.tolerance
    }
}

impl<'a> LieTwoAlgebra<'a> {
    pub fn new(cm: &'a MatrixCrossedModule) -> Self {
        LieTwoAlgebra { cm }
    }

    pub fn g_alg(&self) -> &'a LieAlgebra {
        self.cm.g_alg()
    }

    pub fn h_alg(&self) -> &'a LieAlgebra {
        self.cm.h_alg()
    }

    pub fn t_star(&self, xi: &CMat) -> CMat {
        self.cm.t_star(xi)
    }

    pub fn alpha_star(&self, x: &CMat, eta: &CMat) -> CMat {
        self.cm.alpha_star(x, eta)
    }

    fn check_dims(&self, e: &SemiElement) -> Result<(), Lie2Error> {
        let (gn, hn) = (self.g_alg().matrix_size(), self.h_alg().matrix_size());
        if e.g.n() != gn {
            return Err(Lie2Error::DimensionMismatch { expected: gn, actual: e.g.n() });
        }
        if e.h.n() != hn {
            return Err(Lie2Error::DimensionMismatch { expected: hn, actual: e.h.n() });
        }
        Ok(())
    }

    /// `[X+ξ, Y+η] = [X,Y] + α_*(X,η) − α_*(Y,ξ) + [ξ,η]`.
    pub fn semidirect_bracket(&self, x: &SemiElement, y: &SemiElement) -> Result<SemiElement, Lie2Error> {
        self.check_dims(x)?;
        self.check_dims(y)?;
        let g = CMat::commutator(&x.g, &y.g);
        let mut h = CMat::commutator(&x.h, &y.h);
        h = &h + &self.alpha_star(&x.g, &y.h);
        h = &h - &self.alpha_star(&y.g, &x.h);
        Ok(SemiElement { g, h })
    }

    /// Structural checks on basis pairs plus finite-difference consistency with the group maps.
    pub fn validate(&self) -> Vec<LawCheck> {
        let g = self.g_alg();
        let h = self.h_alg();
        let mut out = Vec::new();

        let laws = g.basis_law_defect().max(h.basis_law_defect());
        out.push(LawCheck { name: "antisymmetry_jacobi".into(), defect: laws, tolerance: 1e-10 });

        let mut hom: f64 = 0.0;
        let mut peiffer: f64 = 0.0;
        for a in h.basis() {
            for b in h.basis() {
                let lhs = self.t_star(&CMat::commutator(a, b));
                let rhs = CMat::commutator(&self.t_star(a), &self.t_star(b));
                hom = hom.max(lhs.dist(&rhs));
                peiffer = peiffer.max(self.alpha_star(&self.t_star(a), b).dist(&CMat::commutator(a, b)));
            }
        }
        out.push(LawCheck { name: "t_star_homomorphism".into(), defect: hom, tolerance: 1e-9 });
        out.push(LawCheck { name: "infinitesimal_peiffer".into(), defect: peiffer, tolerance: 1e-9 });

        // central differences of the group maps
        let eps = 1e-4;
        let mut t_fd: f64 = 0.0;
        for xi in h.basis() {
            let plus = self.cm.t(&xi.scale_re(eps).exp());
            let minus = self.cm.t(&xi.scale_re(-eps).exp());
            let fd = (&plus - &minus).scale_re(0.5 / eps);
            t_fd = t_fd.max(fd.dist(&self.t_star(xi)));
        }
        out.push(LawCheck { name: "t_star_matches_group_map".into(), defect: t_fd, tolerance: 1e-6 });

        let mut a_fd: f64 = 0.0;
        for x in g.basis() {
            for eta in h.basis() {
                let plus = self.cm.alpha(&x.scale_re(eps).exp(), eta);
                let minus = self.cm.alpha(&x.scale_re(-eps).exp(), eta);
                let fd = (&plus - &minus).scale_re(0.5 / eps);
                a_fd = a_fd.max(fd.dist(&self.alpha_star(x, eta)));
            }
        }
        out.push(LawCheck { name: "alpha_star_matches_group_map".into(), defect: a_fd, tolerance: 1e-6 });
        out
    }

    pub fn exp_g(&self, x: &CMat) -> CMat {
        self.cm.exp_g(x)
    }

    pub fn exp_h(&self, xi: &CMat) -> CMat {
        self.cm.exp_h(xi)
    }

    pub fn log_g(&self, g: &CMat) -> Result<CMat, MatrixError> {
        self.cm.log_g(g)
    }

    pub fn log_h(&self, h: &CMat) -> Result<CMat, MatrixError> {
        self.cm.log_h(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra2group::MatrixFamily;
    use crate::matrix::c;

    #[test]
    fn su2_structure_constants() {
        let cm = MatrixCrossedModule::new(MatrixFamily::Su2IdConj);
        let g = cm.g_alg();
        // [e1, e2] = 2 e3
        assert!((g.structure_constant(0, 1, 2) - 2.0).abs() < 1e-15);
        assert!(g.structure_constant(0, 1, 0).abs() < 1e-15);
        assert!(g.basis_law_defect() < 1e-12);
    }

    #[test]
    fn mixed_bracket_is_alpha_star() {
        let cm = MatrixCrossedModule::new(MatrixFamily::Su2IdConj);
        let l2 = LieTwoAlgebra::new(&cm);
        let e = cm.g_alg().basis();
        let z = CMat::zeros(2);
        let x = SemiElement { g: e[0].clone(), h: z.clone() };
        let y = SemiElement { g: z.clone(), h: e[1].clone() };
        let br = l2.semidirect_bracket(&x, &y).unwrap();
        assert!(br.g.norm_max() < 1e-15);
        assert!(br.h.dist(&e[2].scale_re(2.0)) < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let cm = MatrixCrossedModule::new(MatrixFamily::Su2IdConj);
        let l2 = LieTwoAlgebra::new(&cm);
        let bad = SemiElement { g: CMat::zeros(3), h: CMat::zeros(2) };
        let ok = SemiElement { g: CMat::zeros(2), h: CMat::zeros(2) };
        assert!(matches!(l2.semidirect_bracket(&bad, &ok), Err(Lie2Error::DimensionMismatch { .. })));
    }

    #[test]
    fn u1_exp_quarter_turn() {
        let cm = MatrixCrossedModule::new(MatrixFamily::U1Id);
        let g = cm.exp_g(&CMat::scalar(c(0.0, core::f64::consts::FRAC_PI_2)));
        assert!((g.get(0, 0) - c(0.0, 1.0)).norm() < 1e-15);
        assert!(cm.exp_g(&CMat::zeros(1)).dist(&CMat::identity(1)) == 0.0);
    }

    #[test]
    fn validation_passes_for_every_family() {
        for fam in MatrixFamily::ALL {
            let cm = MatrixCrossedModule::new(fam);
            for check in LieTwoAlgebra::new(&cm).validate() {
                assert!(check.pass(), "{:?}: {} = {:e}", fam, check.name, check.defect);
            }
        }
    }
}
