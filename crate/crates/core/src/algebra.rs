//! The truncated Lie algebra sp_HS: membership, the canonical orthonormal
//! basis, the covariance `Q` and the drift matrix `D`.
//!
//! Generators are the matrix units `e^{Re}_{mn} = E_{mn}` and
//! `e^{Im}_{mn} = i E_{mn}`. Their image under
//! `E ↦ ½(E + Ē - E^# - Ē^#)` lies in sp_HS; two generators have parallel
//! images when they are related by `(m,n) ↔ (n,m)` or `(m,n) ↔ (-m,-n)`,
//! so the basis keeps one representative per class.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{modes, pos, I};
use crate::operator::{Check, Operator};

pub const SP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenKind {
    Re,
    Im,
}

impl GenKind {
    fn unit(self) -> Complex64 {
        match self {
            Self::Re => Complex64::new(1.0, 0.0),
            Self::Im => I,
        }
    }
}

impl FromStr for GenKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "re" => Ok(Self::Re),
            "im" => Ok(Self::Im),
            _ => Err(Error::Unknown {
                kind: "generator tag",
                name: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for GenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Re => "re",
            Self::Im => "im",
        })
    }
}

/// A generator `e^{kind}_{m,n}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Generator {
    pub kind: GenKind,
    pub m: i64,
    pub n: i64,
}

impl Generator {
    pub fn new(kind: GenKind, m: i64, n: i64) -> Self {
        Self { kind, m, n }
    }

    /// The matrix unit, as an operator.
    pub fn matrix(&self, n_trunc: usize) -> Result<Operator> {
        self.check(n_trunc)?;
        let mut e = Operator::zeros(n_trunc);
        e.set(self.m, self.n, self.kind.unit());
        Ok(e)
    }

    /// Representative of the class of generators with parallel images.
    /// Fails for `e^{Re}_{mm}` and `e^{Re}_{-m,-m}`, whose image is zero.
    pub fn canonical(&self) -> Result<Self> {
        let (mut m, mut n) = (self.m, self.n);
        if m == 0 || n == 0 {
            return Err(Error::BadMode(if m == 0 { m } else { n }));
        }
        if m < 0 {
            m = -m;
            n = -n;
        }
        if n > 0 {
            if m > n {
                std::mem::swap(&mut m, &mut n);
            }
            if m == n && self.kind == GenKind::Re {
                return Err(Error::InvalidParameter(format!(
                    "generator re({}, {}) has zero image",
                    self.m, self.n
                )));
            }
        } else if m > -n {
            (m, n) = (-n, -m);
        }
        Ok(Self::new(self.kind, m, n))
    }

    /// Mode weight `|m||n|` used by the default covariance.
    pub fn weight(&self) -> f64 {
        (self.m.unsigned_abs() * self.n.unsigned_abs()) as f64
    }

    fn check(&self, n_trunc: usize) -> Result<()> {
        for k in [self.m, self.n] {
            if k == 0 || k.unsigned_abs() as usize > n_trunc {
                return Err(Error::BadMode(k));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},{})", self.kind, self.m, self.n)
    }
}

/// `½(E + Ē - E^# - Ē^#)`, the generator formula extended linearly. Equal to
/// twice the orthogonal projection [`project_pi`].
pub fn generator_image(e: &Operator) -> Operator {
    let bar = e.bar();
    let s = &(e + &bar) - &(&e.sharp() + &bar.sharp());
    s.scale(0.5)
}

/// Orthogonal projection onto sp_HS for the real inner product
/// `Re Tr(X Y†)`.
pub fn project_pi(e: &Operator) -> SpElement {
    SpElement(generator_image(e).scale(0.5))
}

/// Residuals of the sp_HS conditions `A = Ā` and `A + A^# = 0`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpCheck {
    pub pass: bool,
    pub reality: f64,
    pub skew: f64,
}

impl SpCheck {
    pub fn residual(&self) -> f64 {
        self.reality + self.skew
    }
}

pub fn is_in_sp(a: &Operator, tol: f64) -> SpCheck {
    let reality = a.reality_residual();
    let skew = (a + &a.sharp()).max_abs();
    SpCheck {
        pass: Check::new(reality + skew, tol).pass,
        reality,
        skew,
    }
}

/// An element of the truncated sp_HS.
#[derive(Debug, Clone, PartialEq)]
pub struct SpElement(Operator);

impl SpElement {
    pub fn new(a: Operator, tol: f64) -> Result<Self> {
        let c = is_in_sp(&a, tol);
        if !c.pass {
            return Err(Error::InvalidParameter(format!(
                "matrix is not in sp (residual {:.3e})",
                c.residual()
            )));
        }
        Ok(Self(a))
    }

    pub fn zeros(n_trunc: usize) -> Self {
        Self(Operator::zeros(n_trunc))
    }

    /// `Σ c_i ξ_i` over the canonical basis.
    pub fn from_coords(basis: &CanonicalBasis, coords: &[f64]) -> Self {
        assert_eq!(coords.len(), basis.len());
        let mut a = Operator::zeros(basis.n_trunc());
        for (xi, &c) in basis.iter().zip(coords) {
            xi.add_scaled_to(&mut a, c);
        }
        Self(a)
    }

    pub fn as_operator(&self) -> &Operator {
        &self.0
    }

    pub fn into_operator(self) -> Operator {
        self.0
    }

    pub fn bracket(&self, other: &Self) -> Self {
        Self(&(&self.0 * &other.0) - &(&other.0 * &self.0))
    }
}

/// Unit-norm element `ξ` of the canonical basis.
#[derive(Debug, Clone)]
pub struct CanonicalBasisElement {
    pub tag: Generator,
    /// Nonzero entries of `ξ`.
    entries: Vec<(i64, i64, Complex64)>,
    n_trunc: usize,
}

impl CanonicalBasisElement {
    fn from_generator(tag: Generator, n_trunc: usize) -> Self {
        let img = generator_image(&tag.matrix(n_trunc).expect("tag within truncation"));
        let norm = img.hs_norm();
        let entries = modes(n_trunc)
            .flat_map(|m| modes(n_trunc).map(move |n| (m, n)))
            .filter_map(|(m, n)| {
                let z = img.get(m, n);
                (z.norm() > 0.0).then(|| (m, n, z / norm))
            })
            .collect();
        Self {
            tag,
            entries,
            n_trunc,
        }
    }

    pub fn matrix(&self) -> Operator {
        let mut a = Operator::zeros(self.n_trunc);
        self.add_scaled_to(&mut a, 1.0);
        a
    }

    pub fn entries(&self) -> &[(i64, i64, Complex64)] {
        &self.entries
    }

    pub fn add_scaled_to(&self, a: &mut Operator, s: f64) {
        for &(m, n, z) in &self.entries {
            a.add_at(m, n, z * s);
        }
    }

    /// `ξ²`, which is diagonal; returned as the diagonal indexed by `pos`.
    fn square_diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; 2 * self.n_trunc];
        for &(m, k, z) in &self.entries {
            for &(k2, n, w) in &self.entries {
                if k2 == k && n == m {
                    d[pos(m, self.n_trunc)] += (z * w).re;
                }
            }
        }
        d
    }
}

/// Orthonormal basis of the truncated sp_HS, in a fixed order: a-block
/// `Re` pairs `0<m<n`, a-block `Im` pairs `0<m<=n`, then b-block `Re` and
/// `Im` pairs `m>0`, `n<0`, `m<=|n|`.
#[derive(Debug, Clone)]
pub struct CanonicalBasis {
    n_trunc: usize,
    elements: Vec<CanonicalBasisElement>,
}

impl CanonicalBasis {
    pub fn n_trunc(&self) -> usize {
        self.n_trunc
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, CanonicalBasisElement> {
        self.elements.iter()
    }

    pub fn get(&self, i: usize) -> &CanonicalBasisElement {
        &self.elements[i]
    }

    pub fn tags(&self) -> impl Iterator<Item = Generator> + '_ {
        self.elements.iter().map(|e| e.tag)
    }

    pub fn index_of(&self, tag: &Generator) -> Option<usize> {
        let c = tag.canonical().ok()?;
        self.elements.iter().position(|e| e.tag == c)
    }

    /// Coordinates `⟨A, ξ⟩` of `A` in the basis.
    pub fn coords(&self, a: &Operator) -> Vec<f64> {
        self.elements
            .iter()
            .map(|xi| {
                xi.entries
                    .iter()
                    .map(|&(m, n, z)| (a.get(m, n) * z.conj()).re)
                    .sum()
            })
            .collect()
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn gram_residual(&self) -> f64 {
        let mats: Vec<Operator> = self.elements.iter().map(|e| e.matrix()).collect();
        (0..mats.len())
            .into_par_iter()
            .map(|i| {
                (0..mats.len())
                    .map(|j| {
                        let want = if i == j { 1.0 } else { 0.0 };
                        (mats[i].hs_inner(&mats[j]) - want).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }
}

pub fn canonical_tags(n_trunc: usize) -> Vec<Generator> {
    let n = n_trunc as i64;
    let mut tags = Vec::with_capacity(n_trunc * (2 * n_trunc + 1));
    for m in 1..=n {
        for k in m + 1..=n {
            tags.push(Generator::new(GenKind::Re, m, k));
        }
    }
    for m in 1..=n {
        for k in m..=n {
            tags.push(Generator::new(GenKind::Im, m, k));
        }
    }
    for kind in [GenKind::Re, GenKind::Im] {
        for m in 1..=n {
            for k in m..=n {
                tags.push(Generator::new(kind, m, -k));
            }
        }
    }
    tags
}

pub fn canonical_basis(n_trunc: usize) -> Result<CanonicalBasis> {
    if n_trunc == 0 {
        return Err(Error::ZeroTruncation);
    }
    let elements = canonical_tags(n_trunc)
        .into_par_iter()
        .map(|t| CanonicalBasisElement::from_generator(t, n_trunc))
        .collect();
    Ok(CanonicalBasis { n_trunc, elements })
}

/// `dim_ℝ sp(2N) = N(2N+1)`.
pub fn sp_dimension(n_trunc: usize) -> usize {
    n_trunc * (2 * n_trunc + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceOverride {
    pub tag: GenKind,
    pub m: i64,
    pub n: i64,
    pub q: f64,
}

/// Diagonal covariance in the canonical basis:
/// `q(ξ) = c (|m||n|)^{-p}` unless overridden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default)]
    pub overrides: Vec<CovarianceOverride>,
}

fn default_p() -> f64 {
    2.0
}

fn default_c() -> f64 {
    1.0
}

impl Default for CovarianceSpec {
    fn default() -> Self {
        Self {
            p: default_p(),
            c: default_c(),
            overrides: Vec::new(),
        }
    }
}

impl CovarianceSpec {
    pub fn zero() -> Self {
        Self {
            p: 0.0,
            c: 0.0,
            overrides: Vec::new(),
        }
    }

    pub fn uniform(q: f64) -> Self {
        Self {
            p: 0.0,
            c: q,
            overrides: Vec::new(),
        }
    }

    /// `q = value` on a single generator class, zero elsewhere.
    pub fn single(tag: Generator, value: f64) -> Self {
        Self {
            p: 0.0,
            c: 0.0,
            overrides: vec![CovarianceOverride {
                tag: tag.kind,
                m: tag.m,
                n: tag.n,
                q: value,
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.p.is_finite() || !self.c.is_finite() {
            return Err(Error::NonFinite("covariance spec".into()));
        }
        if self.c < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "covariance scale c = {} < 0",
                self.c
            )));
        }
        for o in &self.overrides {
            if !o.q.is_finite() {
                return Err(Error::NonFinite("covariance override".into()));
            }
            if o.q < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "covariance override {}({},{}) = {} < 0",
                    o.tag, o.m, o.n, o.q
                )));
            }
            Generator::new(o.tag, o.m, o.n).canonical()?;
        }
        Ok(())
    }

    /// `q(ξ)` for each element of the basis, in basis order.
    pub fn weights(&self, basis: &CanonicalBasis) -> Result<Vec<f64>> {
        self.validate()?;
        let mut q: Vec<f64> = basis
            .tags()
            .map(|t| {
                if self.c == 0.0 {
                    0.0
                } else {
                    self.c * t.weight().powf(-self.p)
                }
            })
            .collect();
        for o in &self.overrides {
            let g = Generator::new(o.tag, o.m, o.n);
            if let Some(i) = basis.index_of(&g) {
                q[i] = o.q;
            } else if g.check(basis.n_trunc()).is_err() {
                // overrides outside the truncation are ignored
            } else {
                return Err(Error::InvalidParameter(format!("no basis element for {g}")));
            }
        }
        Ok(q)
    }

    pub fn trace(&self, basis: &CanonicalBasis) -> Result<f64> {
        Ok(self.weights(basis)?.iter().sum())
    }
}

/// Real diagonal drift, `D_m` stored at `pos(m)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftMatrix {
    pub n_trunc: usize,
    pub diag: Vec<f64>,
}

impl DriftMatrix {
    pub fn get(&self, m: i64) -> f64 {
        self.diag[pos(m, self.n_trunc)]
    }

    pub fn to_operator(&self) -> Operator {
        Operator::diagonal(self.n_trunc, |m| Complex64::new(self.get(m), 0.0))
    }

    /// `max |D_m - D_{-m}|`.
    pub fn symmetry_residual(&self) -> f64 {
        (1..=self.n_trunc as i64)
            .map(|m| (self.get(m) - self.get(-m)).abs())
            .fold(0.0, f64::max)
    }

    pub fn rows(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        modes(self.n_trunc).map(move |m| (m, self.get(m)))
    }

    pub fn max_abs(&self) -> f64 {
        self.diag.iter().fold(0.0, |a, d| a.max(d.abs()))
    }
}

/// `D = -Σ q(ξ) ξ ξ^# = Σ q(ξ) ξ²`, accumulated from the diagonal of each
/// `ξ²` in basis order.
pub fn drift_d(q: &CovarianceSpec, basis: &CanonicalBasis) -> Result<DriftMatrix> {
    let w = q.weights(basis)?;
    let parts: Vec<Vec<f64>> = basis
        .elements
        .par_iter()
        .map(|xi| xi.square_diagonal())
        .collect();
    let mut diag = vec![0.0; 2 * basis.n_trunc];
    for (qi, d) in w.iter().zip(&parts) {
        if *qi != 0.0 {
            for (acc, v) in diag.iter_mut().zip(d) {
                *acc += qi * v;
            }
        }
    }
    Ok(DriftMatrix {
        n_trunc: basis.n_trunc,
        diag,
    })
}

/// `Σ (√q ξ)(√q ξ)^#` by dense matrix products.
pub fn sum_xi_oracle(q: &CovarianceSpec, basis: &CanonicalBasis) -> Result<Operator> {
    let w = q.weights(basis)?;
    let terms: Vec<Operator> = basis
        .elements
        .par_iter()
        .zip(w.par_iter())
        .map(|(xi, &qi)| {
            let s = xi.matrix().scale(qi.sqrt());
            &s * &s.sharp()
        })
        .collect();
    Ok(terms
        .iter()
        .fold(Operator::zeros(basis.n_trunc), |acc, t| &acc + t))
}

/// The closed diagonal formula
/// `D_m = -¼ sgn(m) Σ_k sgn(k) [Q^{Re}_{mk} + Q^{Im}_{mk}]`, with `Q_{mk}`
/// read as the weight of the class containing `(m,k)`.
pub fn drift_formula(q: &CovarianceSpec, basis: &CanonicalBasis) -> Result<DriftMatrix> {
    let w = q.weights(basis)?;
    let n = basis.n_trunc;
    let weight = |g: Generator| -> f64 { basis.index_of(&g).map_or(0.0, |i| w[i]) };
    let diag = modes(n)
        .map(|m| {
            let s: f64 = modes(n)
                .map(|k| {
                    let sk = if k > 0 { 1.0 } else { -1.0 };
                    sk * (weight(Generator::new(GenKind::Re, m, k))
                        + weight(Generator::new(GenKind::Im, m, k)))
                })
                .sum();
            -0.25 * if m > 0 { 1.0 } else { -1.0 } * s
        })
        .collect();
    Ok(DriftMatrix { n_trunc: n, diag })
}

/// Comparison of [`drift_d`] with [`drift_formula`].
#[derive(Debug, Clone, Serialize)]
pub struct DriftComparison {
    pub max_abs_diff: f64,
    /// Least-squares `λ` in `formula ≈ λ D`; `None` when `D = 0`.
    pub fitted_ratio: Option<f64>,
    /// Residual of the best proportional fit.
    pub fit_residual: f64,
}

pub fn compare_drift(d: &DriftMatrix, formula: &DriftMatrix) -> DriftComparison {
    let dd: f64 = d.diag.iter().map(|x| x * x).sum();
    let df: f64 = d.diag.iter().zip(&formula.diag).map(|(a, b)| a * b).sum();
    let max_abs_diff = d
        .diag
        .iter()
        .zip(&formula.diag)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let lambda = (dd > 0.0).then(|| df / dd);
    let l = lambda.unwrap_or(0.0);
    let fit_residual = d
        .diag
        .iter()
        .zip(&formula.diag)
        .map(|(a, b)| (b - l * a).abs())
        .fold(0.0, f64::max);
    DriftComparison {
        max_abs_diff,
        fitted_ratio: lambda,
        fit_residual,
    }
}
