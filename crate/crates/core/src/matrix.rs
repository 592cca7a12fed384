//! Small dense complex matrices and the matrix functions the integrators need.
//!
//! Every group in the registry is at most 3×3, so storage is a flat row-major
//! `Vec` and all algorithms are the textbook dense ones.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

/// Complex scalar used throughout.
pub type C64 = Complex64;

/// Shorthand for a complex number.
#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Error from a matrix function.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatrixError {
    /// Matrix is singular to working precision.
    #[error("matrix is singular")]
    Singular,
    /// Logarithm requested outside the principal branch.
    #[error("logarithm outside the principal branch (spectral radius {radius:.6} >= pi)")]
    Branch { radius: f64 },
    /// Iteration did not converge.
    #[error("{what} did not converge")]
    NoConvergence { what: &'static str },
}

/// Square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMat {
    n: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CMat{}[", self.n)?;
        for i in 0..self.n {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.n {
                let z = self.get(i, j);
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{:.6}{:+.6}i", z.re, z.im)?;
            }
        }
        write!(f, "]")
    }
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat { n, data: vec![C64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    /// 1×1 matrix holding `z`.
    pub fn scalar(z: C64) -> Self {
        CMat { n: 1, data: vec![z] }
    }

    /// Build from row-major entries. Panics if the length is not n².
    pub fn from_vec(n: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), n * n, "expected {} entries", n * n);
        CMat { n, data }
    }

    pub fn from_real(n: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), n * n, "expected {} entries", n * n);
        CMat { n, data: data.iter().map(|&x| C64::new(x, 0.0)).collect() }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, z: C64) {
        self.data[i * self.n + j] = z;
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn scale(&self, z: C64) -> Self {
        CMat { n: self.n, data: self.data.iter().map(|&a| a * z).collect() }
    }

    pub fn scale_re(&self, x: f64) -> Self {
        CMat { n: self.n, data: self.data.iter().map(|&a| a * x).collect() }
    }

    /// `self += x * other`
    pub fn axpy(&mut self, x: f64, other: &CMat) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b * x;
        }
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[j * n + i] = self.data[i * n + j];
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// `[a, b] = ab - ba`
    pub fn commutator(a: &CMat, b: &CMat) -> CMat {
        &(a * b) - &(b * a)
    }

    /// Largest absolute entry.
    pub fn norm_max(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Maximum column sum.
    pub fn norm_one(&self) -> f64 {
        let n = self.n;
        (0..n)
            .map(|j| (0..n).map(|i| self.get(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_fro(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|z| z.norm_sqr()).sum::<f64>())
    }

    /// Max-norm distance.
    pub fn dist(&self, other: &CMat) -> f64 {
        (self - other).norm_max()
    }

    /// Largest absolute imaginary part of any entry.
    pub fn imag_max(&self) -> f64 {
        self.data.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Real inner product `Re tr(a^† b)`.
    pub fn inner(a: &CMat, b: &CMat) -> f64 {
        a.data.iter().zip(b.data.iter()).map(|(x, y)| (x.conj() * y).re).sum()
    }

    fn lu(&self) -> Option<(Vec<C64>, Vec<usize>, f64)> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = self.norm_max().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].norm();
            for i in (k + 1)..n {
                let v = a[i * n + k].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-300 || best <= scale * 1e-15 {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = a[k * n + k];
            for i in (k + 1)..n {
                let f = a[i * n + k] / pivot;
                a[i * n + k] = f;
                for j in (k + 1)..n {
                    let t = a[k * n + j];
                    a[i * n + j] -= f * t;
                }
            }
        }
        Some((a, perm, sign))
    }

    pub fn det(&self) -> C64 {
        match self.lu() {
            None => C64::new(0.0, 0.0),
            Some((a, _, sign)) => {
                let n = self.n;
                (0..n).map(|i| a[i * n + i]).fold(C64::new(sign, 0.0), |acc, z| acc * z)
            }
        }
    }

    pub fn inverse(&self) -> Result<CMat, MatrixError> {
        let n = self.n;
        let (lu, perm, _) = self.lu().ok_or(MatrixError::Singular)?;
        let mut inv = CMat::zeros(n);
        for col in 0..n {
            let mut x: Vec<C64> = (0..n)
                .map(|i| if perm[i] == col { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
                .collect();
            for i in 0..n {
                for k in 0..i {
                    let t = lu[i * n + k] * x[k];
                    x[i] -= t;
                }
            }
            for i in (0..n).rev() {
                for k in (i + 1)..n {
                    let t = lu[i * n + k] * x[k];
                    x[i] -= t;
                }
                x[i] /= lu[i * n + i];
            }
            for i in 0..n {
                inv.data[i * n + col] = x[i];
            }
        }
        Ok(inv)
    }

    /// Matrix exponential: scaling and squaring around a diagonal [6/6] Padé approximant.
    pub fn exp(&self) -> CMat {
        let n = self.n;
        let norm = self.norm_one();
        let mut s = 0u32;
        if norm > 0.5 {
            s = libm::ceil(libm::log2(norm / 0.5)) as u32;
        }
        let x = self.scale_re(libm::ldexp(1.0, -(s as i32)));
        const Q: usize = 6;
        let mut coef = [0.0f64; Q + 1];
        coef[0] = 1.0;
        for k in 1..=Q {
            coef[k] = coef[k - 1] * ((Q + 1 - k) as f64) / ((k * (2 * Q + 1 - k)) as f64);
        }
        let mut num = CMat::identity(n);
        let mut den = CMat::identity(n);
        let mut pow = CMat::identity(n);
        for (k, &ck) in coef.iter().enumerate().skip(1) {
            pow = &pow * &x;
            num.axpy(ck, &pow);
            den.axpy(if k % 2 == 0 { ck } else { -ck }, &pow);
        }
        let mut r = &den.inverse().expect("Pade denominator is well conditioned") * &num;
        for _ in 0..s {
            r = &r * &r;
        }
        r
    }

    /// Principal square root by the Denman–Beavers iteration.
    pub fn sqrt(&self) -> Result<CMat, MatrixError> {
        let n = self.n;
        let mut y = self.clone();
        let mut z = CMat::identity(n);
        for _ in 0..100 {
            let yi = y.inverse()?;
            let zi = z.inverse()?;
            let y_next = (&y + &zi).scale_re(0.5);
            let z_next = (&z + &yi).scale_re(0.5);
            let delta = y_next.dist(&y);
            y = y_next;
            z = z_next;
            if delta <= 1e-15 * y.norm_max().max(1.0) {
                return Ok(y);
            }
        }
        Err(MatrixError::NoConvergence { what: "matrix square root" })
    }

    /// Principal logarithm by inverse scaling and squaring.
    pub fn log(&self) -> Result<CMat, MatrixError> {
        let n = self.n;
        let id = CMat::identity(n);
        let mut x = self.clone();
        let mut k = 0i32;
        while x.dist(&id) > 0.25 {
            x = x.sqrt()?;
            k += 1;
            if k > 60 {
                return Err(MatrixError::NoConvergence { what: "matrix logarithm" });
            }
        }
        // log X = 2 atanh(Z), Z = (X - I)(X + I)^{-1}
        let zmat = &(&x - &id) * &(&x + &id).inverse()?;
        let z2 = &zmat * &zmat;
        let mut term = zmat.clone();
        let mut acc = zmat.clone();
        for j in 1..40 {
            term = &term * &z2;
            let denom = (2 * j + 1) as f64;
            acc.axpy(1.0 / denom, &term);
            if term.norm_max() / denom < 1e-18 {
                break;
            }
        }
        Ok(acc.scale_re(libm::ldexp(2.0, k)))
    }

    /// Spectral norm estimate for small matrices (power iteration on `A^† A`).
    pub fn norm_spectral(&self) -> f64 {
        let n = self.n;
        let ata = &self.adjoint() * self;
        let mut best: f64 = 0.0;
        for start in 0..=n {
            let mut v: Vec<C64> = (0..n)
                .map(|i| {
                    if start == n || i == start {
                        C64::new(1.0 + 0.1 * i as f64, 0.05 * i as f64)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
                .collect();
            let mut lambda = 0.0;
            for _ in 0..200 {
                let w: Vec<C64> = (0..n).map(|i| (0..n).map(|j| ata.get(i, j) * v[j]).sum()).collect();
                let norm = libm::sqrt(w.iter().map(|z| z.norm_sqr()).sum::<f64>());
                if norm == 0.0 {
                    break;
                }
                let next = norm;
                v = w.into_iter().map(|z| z / norm).collect();
                if (next - lambda).abs() <= 1e-15 * next {
                    lambda = next;
                    break;
                }
                lambda = next;
            }
            best = best.max(libm::sqrt(lambda));
        }
        best
    }

    /// Nearest unitary matrix (polar factor) by Newton's iteration `X <- (X + X^{-†}) / 2`.
    /// Real input stays real.
    pub fn polar_unitary(&self) -> Result<CMat, MatrixError> {
        let n = self.n;
        let id = CMat::identity(n);
        let mut x = self.clone();
        for _ in 0..50 {
            if (&(&x.adjoint() * &x) - &id).norm_max() <= 1e-15 {
                return Ok(x);
            }
            let xi = x.inverse()?.adjoint();
            x = (&x + &xi).scale_re(0.5);
        }
        if (&(&x.adjoint() * &x) - &id).norm_max() <= 1e-13 {
            return Ok(x);
        }
        Err(MatrixError::NoConvergence { what: "polar projection" })
    }
}

impl<'a> Add<&'a CMat> for &'a CMat {
    type Output = CMat;
    fn add(self, rhs: &'a CMat) -> CMat {
        debug_assert_eq!(self.n, rhs.n);
        CMat { n: self.n, data: self.data.iter().zip(rhs.data.iter()).map(|(a, b)| a + b).collect() }
    }
}

impl<'a> Sub<&'a CMat> for &'a CMat {
    type Output = CMat;
    fn sub(self, rhs: &'a CMat) -> CMat {
        debug_assert_eq!(self.n, rhs.n);
        CMat { n: self.n, data: self.data.iter().zip(rhs.data.iter()).map(|(a, b)| a - b).collect() }
    }
}

impl<'a> Mul<&'a CMat> for &'a CMat {
    type Output = CMat;
    fn mul(self, rhs: &'a CMat) -> CMat {
        let n = self.n;
        debug_assert_eq!(n, rhs.n);
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl Neg for &CMat {
    type Output = CMat;
    fn neg(self) -> CMat {
        self.scale_re(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rot(theta: f64) -> CMat {
        let (s, co) = (libm::sin(theta), libm::cos(theta));
        CMat::from_real(2, &[co, -s, s, co])
    }

    #[test]
    fn exp_of_rotation_generator() {
        let gen = CMat::from_real(2, &[0.0, -1.3, 1.3, 0.0]);
        assert!(gen.exp().dist(&rot(1.3)) < 1e-14);
        let big = gen.scale_re(7.0);
        assert!(big.exp().dist(&rot(9.1)) < 1e-12);
    }

    #[test]
    fn exp_scalar() {
        let m = CMat::scalar(c(0.0, core::f64::consts::FRAC_PI_2));
        assert!((m.exp().get(0, 0) - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn log_inverts_exp() {
        let x = CMat::from_vec(2, vec![c(0.0, 0.7), c(0.3, -0.2), c(-0.3, -0.2), c(0.0, -0.4)]);
        let l = x.exp().log().unwrap();
        assert!(l.dist(&x) < 1e-13, "{:?}", l);
    }

    #[test]
    fn log_of_minus_one_is_a_branch_problem() {
        assert!(CMat::scalar(c(-1.0, 0.0)).log().is_err());
    }

    #[test]
    fn inverse_and_det() {
        let m = CMat::from_real(3, &[2.0, 1.0, 0.0, 0.0, 3.0, 1.0, 1.0, 0.0, 1.0]);
        let inv = m.inverse().unwrap();
        assert!((&m * &inv).dist(&CMat::identity(3)) < 1e-15);
        assert!((m.det() - c(7.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn polar_recovers_rotation() {
        let mut r = rot(0.4);
        r.set(0, 0, r.get(0, 0) + c(1e-6, 0.0));
        let u = r.polar_unitary().unwrap();
        assert!(u.dist(&rot(0.4)) < 1e-6);
        assert_eq!(u.imag_max(), 0.0);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = CMat::from_vec(2, vec![c(0.0, 2.5), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        assert!((m.norm_spectral() - 2.5).abs() < 1e-12);
    }
}
