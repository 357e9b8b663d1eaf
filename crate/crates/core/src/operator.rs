//! Matrices of operators on the truncated H_ω.
//!
//! Entries are `A_{m,n} = (A ẽ_n, ẽ_m)_ω` in the ω-orthonormal basis, with
//! rows and columns laid out by [`crate::fourier::pos`]. The four involutions
//! act entrywise:
//!
//! ```text
//! (Ā)_{m,n}   = conj(A_{-m,-n})
//! (A†)_{m,n}  = conj(A_{n,m})
//! (Aᵀ)_{m,n}  = A_{-n,-m}
//! (A#)_{m,n}  = sgn(mn) A_{-n,-m}
//! ```

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::{modes, omega_scale, pos, sgn, FourierVector, I};

pub type CMatrix = DMatrix<Complex64>;

/// Condition estimate above which [`Operator::invert_checked`] flags the inverse.
pub const ILL_CONDITIONED: f64 = 1e12;

/// Square matrix indexed by the nonzero modes `-N..-1, 1..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    n_trunc: usize,
    entries: CMatrix,
}

/// Operators are called symplectic once they pass [`Operator::predicates`].
pub type SymplecticOperator = Operator;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Involution {
    Bar,
    Dagger,
    Transpose,
    Sharp,
}

impl Involution {
    pub const ALL: [Involution; 4] = [Self::Bar, Self::Dagger, Self::Transpose, Self::Sharp];

    pub fn name(self) -> &'static str {
        match self {
            Self::Bar => "bar",
            Self::Dagger => "dagger",
            Self::Transpose => "transpose",
            Self::Sharp => "sharp",
        }
    }
}

impl FromStr for Involution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "involution",
                name: s.to_string(),
            })
    }
}

impl fmt::Display for Involution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The blocks `a = π⁺Aπ⁺`, `b = π⁺Aπ⁻`, `c = π⁻Aπ⁺`, `d = π⁻Aπ⁻`.
///
/// Each block is `N×N`; positive modes are indexed `1..=N` as rows/cols
/// `0..N` and negative modes `-1..=-N` likewise, so `b[(i, j)]` is
/// `A_{i+1, -(j+1)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockView {
    pub a: CMatrix,
    pub b: CMatrix,
    pub c: CMatrix,
    pub d: CMatrix,
}

impl BlockView {
    pub fn assemble(&self) -> Operator {
        let n = self.a.nrows();
        let mut op = Operator::zeros(n);
        for i in 0..n {
            let p = i as i64 + 1;
            for j in 0..n {
                let q = j as i64 + 1;
                op.set(p, q, self.a[(i, j)]);
                op.set(p, -q, self.b[(i, j)]);
                op.set(-p, q, self.c[(i, j)]);
                op.set(-p, -q, self.d[(i, j)]);
            }
        }
        op
    }

    /// Block-wise product, `[[a b][c d]] · [[a' b'][c' d']]`.
    pub fn multiply(&self, rhs: &BlockView) -> BlockView {
        BlockView {
            a: &self.a * &rhs.a + &self.b * &rhs.c,
            b: &self.a * &rhs.b + &self.b * &rhs.d,
            c: &self.c * &rhs.a + &self.d * &rhs.c,
            d: &self.c * &rhs.b + &self.d * &rhs.d,
        }
    }
}

/// A boolean verdict together with the residual that produced it.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Check {
    pub pass: bool,
    pub residual: f64,
}

impl Check {
    pub fn new(residual: f64, tol: f64) -> Self {
        Self {
            pass: residual.is_finite() && residual <= tol,
            residual,
        }
    }

    pub fn and(self, other: Check) -> Check {
        Check {
            pass: self.pass && other.pass,
            residual: self.residual.max(other.residual),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Predicates {
    /// `A = Ā`.
    pub is_real: Check,
    /// `AᵀJA = J`.
    pub preserves_omega: Check,
    /// Preserves ω and `AJAᵀ = J`.
    pub is_invertible_symplectic: Check,
    /// `A = Ā` and `A#A = AA# = I`.
    pub is_symplectic: Check,
}

impl Predicates {
    pub fn all_pass(&self) -> bool {
        self.is_real.pass
            && self.preserves_omega.pass
            && self.is_invertible_symplectic.pass
            && self.is_symplectic.pass
    }
}

#[derive(Debug, Clone)]
pub struct InverseReport {
    pub inverse: Operator,
    /// 1-norm condition estimate `‖A‖₁ ‖A⁻¹‖₁`.
    pub condition: f64,
    pub ill_conditioned: bool,
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn one_norm(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl Operator {
    pub fn zeros(n_trunc: usize) -> Self {
        Self {
            n_trunc,
            entries: CMatrix::zeros(2 * n_trunc, 2 * n_trunc),
        }
    }

    pub fn identity(n_trunc: usize) -> Self {
        Self {
            n_trunc,
            entries: CMatrix::identity(2 * n_trunc, 2 * n_trunc),
        }
    }

    pub fn from_matrix(entries: CMatrix) -> Result<Self> {
        let dim = entries.nrows();
        if dim == 0 || !dim.is_multiple_of(2) || entries.ncols() != dim {
            return Err(Error::InvalidParameter(format!(
                "operator matrix must be square with even positive size, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self {
            n_trunc: dim / 2,
            entries,
        })
    }

    /// Builds an operator entrywise from `f(m, n)`.
    pub fn from_fn(n_trunc: usize, mut f: impl FnMut(i64, i64) -> Complex64) -> Self {
        let mut op = Self::zeros(n_trunc);
        for m in modes(n_trunc) {
            for n in modes(n_trunc) {
                op.set(m, n, f(m, n));
            }
        }
        op
    }

    /// Diagonal operator with entry `f(m)` at `(m, m)`.
    pub fn diagonal(n_trunc: usize, f: impl Fn(i64) -> Complex64) -> Self {
        let mut op = Self::zeros(n_trunc);
        for m in modes(n_trunc) {
            op.set(m, m, f(m));
        }
        op
    }

    /// The Hilbert transform, `J_{m,n} = i sgn(m) δ_{mn}`.
    pub fn hilbert_j(n_trunc: usize) -> Self {
        Self::diagonal(n_trunc, |m| I * sgn(m))
    }

    pub fn n_trunc(&self) -> usize {
        self.n_trunc
    }

    pub fn dim(&self) -> usize {
        2 * self.n_trunc
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    #[inline]
    pub fn get(&self, m: i64, n: i64) -> Complex64 {
        self.entries[(pos(m, self.n_trunc), pos(n, self.n_trunc))]
    }

    #[inline]
    pub fn set(&mut self, m: i64, n: i64, value: Complex64) {
        let (i, j) = (pos(m, self.n_trunc), pos(n, self.n_trunc));
        self.entries[(i, j)] = value;
    }

    #[inline]
    pub fn add_at(&mut self, m: i64, n: i64, value: Complex64) {
        let (i, j) = (pos(m, self.n_trunc), pos(n, self.n_trunc));
        self.entries[(i, j)] += value;
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n_trunc: self.n_trunc,
            entries: &self.entries * Complex64::new(s, 0.0),
        }
    }

    pub fn involution(&self, kind: Involution) -> Self {
        match kind {
            Involution::Bar => self.bar(),
            Involution::Dagger => self.dagger(),
            Involution::Transpose => self.transpose(),
            Involution::Sharp => self.sharp(),
        }
    }

    pub fn bar(&self) -> Self {
        Self::from_fn(self.n_trunc, |m, n| self.get(-m, -n).conj())
    }

    pub fn dagger(&self) -> Self {
        Self {
            n_trunc: self.n_trunc,
            entries: self.entries.adjoint(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n_trunc, |m, n| self.get(-n, -m))
    }

    pub fn sharp(&self) -> Self {
        Self::from_fn(self.n_trunc, |m, n| sgn(m * n) * self.get(-n, -m))
    }

    pub fn blocks(&self) -> BlockView {
        let n = self.n_trunc;
        let block = |sr: i64, sc: i64| {
            CMatrix::from_fn(n, n, |i, j| {
                self.get(sr * (i as i64 + 1), sc * (j as i64 + 1))
            })
        };
        BlockView {
            a: block(1, 1),
            b: block(1, -1),
            c: block(-1, 1),
            d: block(-1, -1),
        }
    }

    /// `‖A‖₂`: Hilbert–Schmidt norm of the block `b = π⁺Aπ⁻` only.
    pub fn norm2(&self) -> f64 {
        self.blocks().b.norm()
    }

    /// Hilbert–Schmidt (Frobenius) norm of the whole matrix.
    pub fn hs_norm(&self) -> f64 {
        self.entries.norm()
    }

    /// Real Hilbert–Schmidt inner product `Re Tr(A B†)`.
    pub fn hs_inner(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (a * b.conj()).re)
            .sum()
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> f64 {
        self.entries
            .clone()
            .singular_values()
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.entries)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        max_abs(&(&self.entries - &other.entries))
    }

    /// Largest entry difference over the interior block `|m|, |n| <= k`.
    pub fn max_abs_diff_interior(&self, other: &Self, k: usize) -> f64 {
        self.restrict(k).max_abs_diff(&other.restrict(k))
    }

    /// Compression to the modes `|m| <= k`.
    pub fn restrict(&self, k: usize) -> Self {
        assert!(
            k >= 1 && k <= self.n_trunc,
            "interior size {k} out of range"
        );
        Self::from_fn(k, |m, n| self.get(m, n))
    }

    /// Action on ω-basis coordinates.
    pub fn apply(&self, coords: &[Complex64]) -> Vec<Complex64> {
        let v = nalgebra::DVector::from_column_slice(coords);
        (&self.entries * v).iter().copied().collect()
    }

    /// Action on a function given in exponential-basis coefficients.
    pub fn apply_fn(&self, u: &FourierVector) -> Result<FourierVector> {
        if u.n_trunc() != self.n_trunc {
            return Err(Error::TruncationMismatch(u.n_trunc(), self.n_trunc));
        }
        let out = self.apply(&u.to_omega_basis());
        FourierVector::from_omega_coords(self.n_trunc, &out)
    }

    pub fn compose(&self, rhs: &Self) -> Result<Self> {
        if self.n_trunc != rhs.n_trunc {
            return Err(Error::TruncationMismatch(self.n_trunc, rhs.n_trunc));
        }
        Ok(Self {
            n_trunc: self.n_trunc,
            entries: &self.entries * &rhs.entries,
        })
    }

    /// Dense LU inverse with partial pivoting.
    pub fn invert(&self) -> Result<Self> {
        Ok(self.invert_checked()?.inverse)
    }

    pub fn invert_checked(&self) -> Result<InverseReport> {
        let lu = self.entries.clone().lu();
        let inv = lu.try_inverse().ok_or(Error::Singular)?;
        if inv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Singular);
        }
        let condition = one_norm(&self.entries) * one_norm(&inv);
        Ok(InverseReport {
            inverse: Self {
                n_trunc: self.n_trunc,
                entries: inv,
            },
            condition,
            ill_conditioned: condition > ILL_CONDITIONED,
        })
    }

    /// `max |A_{m,n} - conj(A_{-m,-n})|`.
    pub fn reality_residual(&self) -> f64 {
        self.max_abs_diff(&self.bar())
    }

    /// `‖AᵀJA - J‖_∞` (entrywise max).
    pub fn omega_residual(&self) -> f64 {
        let j = Self::hilbert_j(self.n_trunc);
        let lhs = &self.transpose().entries * &j.entries * &self.entries;
        max_abs(&(lhs - &j.entries))
    }

    /// `‖AJAᵀ - J‖_∞`.
    pub fn co_omega_residual(&self) -> f64 {
        let j = Self::hilbert_j(self.n_trunc);
        let lhs = &self.entries * &j.entries * &self.transpose().entries;
        max_abs(&(lhs - &j.entries))
    }

    /// `max(‖A#A - I‖_∞, ‖AA# - I‖_∞)`.
    pub fn sharp_residual(&self) -> f64 {
        let s = self.sharp();
        let id = CMatrix::identity(self.dim(), self.dim());
        let left = max_abs(&(&s.entries * &self.entries - &id));
        let right = max_abs(&(&self.entries * &s.entries - &id));
        left.max(right)
    }

    /// Residual of `Σ_k sgn(mk) A_{k,m} conj(A_{k,n}) = δ_{mn}` (column form).
    pub fn column_entry_residual(&self) -> f64 {
        let n = self.n_trunc;
        let mut worst: f64 = 0.0;
        for m in modes(n) {
            for q in modes(n) {
                let s: Complex64 = modes(n)
                    .map(|k| sgn(m * k) * self.get(k, m) * self.get(k, q).conj())
                    .sum();
                let want = if m == q { 1.0 } else { 0.0 };
                worst = worst.max((s - want).norm());
            }
        }
        worst
    }

    /// Residual of `Σ_k sgn(mk) A_{m,k} conj(A_{n,k}) = δ_{mn}` (row form).
    pub fn row_entry_residual(&self) -> f64 {
        let n = self.n_trunc;
        let mut worst: f64 = 0.0;
        for m in modes(n) {
            for q in modes(n) {
                let s: Complex64 = modes(n)
                    .map(|k| sgn(m * k) * self.get(m, k) * self.get(q, k).conj())
                    .sum();
                let want = if m == q { 1.0 } else { 0.0 };
                worst = worst.max((s - want).norm());
            }
        }
        worst
    }

    pub fn predicates(&self, tol: f64) -> Predicates {
        let is_real = Check::new(self.reality_residual(), tol);
        let preserves_omega = Check::new(self.omega_residual(), tol);
        let is_invertible_symplectic =
            preserves_omega.and(Check::new(self.co_omega_residual(), tol));
        let is_symplectic = is_real.and(Check::new(self.sharp_residual(), tol));
        Predicates {
            is_real,
            preserves_omega,
            is_invertible_symplectic,
            is_symplectic,
        }
    }

    /// Predicates evaluated on the compression to `|m|, |n| <= k` of the
    /// products `AᵀJA`, `A#A`, ...; the sums over the inner index still run
    /// over the full truncation.
    pub fn interior_predicates(&self, k: usize, tol: f64) -> Predicates {
        let j = Self::hilbert_j(self.n_trunc);
        let id = Self::identity(self.n_trunc);
        let wrap = |m: CMatrix| Operator {
            n_trunc: self.n_trunc,
            entries: m,
        };
        let t = self.transpose();
        let s = self.sharp();
        let omega = wrap(&t.entries * &j.entries * &self.entries).max_abs_diff_interior(&j, k);
        let co = wrap(&self.entries * &j.entries * &t.entries).max_abs_diff_interior(&j, k);
        let left = wrap(&s.entries * &self.entries).max_abs_diff_interior(&id, k);
        let right = wrap(&self.entries * &s.entries).max_abs_diff_interior(&id, k);
        let is_real = Check::new(self.restrict(k).reality_residual(), tol);
        let preserves_omega = Check::new(omega, tol);
        Predicates {
            is_real,
            preserves_omega,
            is_invertible_symplectic: preserves_omega.and(Check::new(co, tol)),
            is_symplectic: is_real.and(Check::new(left.max(right), tol)),
        }
    }

    /// Matrix exponential.
    pub fn exp(&self) -> Self {
        Self {
            n_trunc: self.n_trunc,
            entries: self.entries.clone().exp(),
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;

    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.n_trunc, rhs.n_trunc, "truncation mismatch");
        Operator {
            n_trunc: self.n_trunc,
            entries: &self.entries * &rhs.entries,
        }
    }
}

impl Add for &Operator {
    type Output = Operator;

    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.n_trunc, rhs.n_trunc, "truncation mismatch");
        Operator {
            n_trunc: self.n_trunc,
            entries: &self.entries + &rhs.entries,
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;

    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.n_trunc, rhs.n_trunc, "truncation mismatch");
        Operator {
            n_trunc: self.n_trunc,
            entries: &self.entries - &rhs.entries,
        }
    }
}

/// Matrix of the ω-basis coordinate change applied to exponential-basis
/// matrices: `f(n) B_{n,m} / f(m)`.
pub(crate) fn from_exp_basis(n_trunc: usize, f: impl Fn(i64, i64) -> Complex64) -> Operator {
    Operator::from_fn(n_trunc, |n, m| omega_scale(n) * f(n, m) / omega_scale(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeo::counterexample_operator;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_is_fixed_by_every_involution() {
        let id = Operator::identity(3);
        for k in Involution::ALL {
            assert_eq!(id.involution(k), id);
        }
    }

    #[test]
    fn unknown_involution_name() {
        assert!("flip".parse::<Involution>().is_err());
        assert_eq!("sharp".parse::<Involution>().unwrap(), Involution::Sharp);
    }

    #[test]
    fn sharp_of_j_is_minus_j() {
        let j = Operator::hilbert_j(4);
        assert_abs_diff_eq!(j.sharp().max_abs_diff(&j.scale(-1.0)), 0.0);
        assert_abs_diff_eq!(
            (&j * &j).max_abs_diff(&Operator::identity(4).scale(-1.0)),
            0.0
        );
    }

    #[test]
    fn counterexample_sharp_entries() {
        let a = counterexample_operator(3);
        let s = a.sharp();
        assert_abs_diff_eq!((s.get(1, 1) - c(2f64.sqrt(), 0.0)).norm(), 0.0);
        assert_abs_diff_eq!((s.get(1, -1) - c(0.0, -1.0)).norm(), 0.0);
    }

    #[test]
    fn counterexample_blocks_and_norm() {
        let a = counterexample_operator(3);
        let bl = a.blocks();
        assert_eq!(bl.b[(0, 0)], I);
        assert_eq!(bl.b.iter().filter(|z| z.norm() > 0.0).count(), 1);
        assert_eq!(bl.assemble(), a);
        assert_abs_diff_eq!(a.norm2(), 1.0, epsilon = 1e-15);
        assert_eq!(Operator::identity(3).norm2(), 0.0);
    }

    #[test]
    fn identity_blocks() {
        let bl = Operator::identity(2).blocks();
        assert_eq!(bl.a, CMatrix::identity(2, 2));
        assert_eq!(bl.d, CMatrix::identity(2, 2));
        assert_eq!(bl.b, CMatrix::zeros(2, 2));
        assert_eq!(bl.c, CMatrix::zeros(2, 2));
    }

    #[test]
    fn counterexample_is_symplectic_and_has_the_stated_inverse() {
        let a = counterexample_operator(4);
        let p = a.predicates(1e-14);
        assert!(p.all_pass(), "{p:?}");
        let b = a.invert().unwrap();
        let r2 = 2f64.sqrt();
        assert_abs_diff_eq!((b.get(1, 1) - c(r2, 0.0)).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((b.get(-1, -1) - c(r2, 0.0)).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((b.get(1, -1) - c(0.0, -1.0)).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((b.get(-1, 1) - c(0.0, 1.0)).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b.max_abs_diff(&a.sharp()), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn counterexample_maps_e1_to_an_ellipse_combination() {
        let a = counterexample_operator(2);
        let e1 = FourierVector::basis_omega(2, 1);
        let out = a.apply_fn(&e1).unwrap().to_omega_basis();
        assert_abs_diff_eq!(
            (out[pos(1, 2)] - c(2f64.sqrt(), 0.0)).norm(),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            (out[pos(-1, 2)] - c(0.0, -1.0)).norm(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn doubled_identity_is_real_but_not_symplectic() {
        let a = Operator::identity(3).scale(2.0);
        let p = a.predicates(1e-10);
        assert!(p.is_real.pass);
        assert!(!p.preserves_omega.pass);
        assert_abs_diff_eq!(p.preserves_omega.residual, 3.0, epsilon = 1e-14);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        assert!(matches!(Operator::zeros(2).invert(), Err(Error::Singular)));
    }

    #[test]
    fn inverse_of_random_matrix() {
        let a = Operator::from_fn(3, |m, n| {
            c((m * 7 + n * 3) as f64 * 0.1, (m - n) as f64 * 0.05)
                + if m == n { c(3.0, 0.0) } else { c(0.0, 0.0) }
        });
        let rep = a.invert_checked().unwrap();
        assert!(!rep.ill_conditioned);
        let prod = &a * &rep.inverse;
        assert!(prod.max_abs_diff(&Operator::identity(3)) < 1e-12);
    }

    #[test]
    fn restrict_keeps_interior_entries() {
        let a = Operator::from_fn(4, |m, n| c(m as f64, n as f64));
        let r = a.restrict(2);
        assert_eq!(r.n_trunc(), 2);
        assert_eq!(r.get(-2, 1), c(-2.0, 1.0));
    }
}
