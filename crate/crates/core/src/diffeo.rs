//! Circle diffeomorphisms, their action on H and the embedding into the
//! symplectic group.
//!
//! A diffeomorphism `g` is stored through a lift `g: ℝ → ℝ` with
//! `g(θ + 2π) = g(θ) + 2π`. It acts on functions by
//! `(g.u)(θ) = u(g⁻¹(θ)) - mean`, so in the exponential basis its matrix is
//!
//! ```text
//! I_{n,m} = (1/2π) ∫ e^{i m g⁻¹(θ) - i n θ} dθ
//! ```
//!
//! and in the ω-basis `Φ(g)_{n,m} = f(n) I_{n,m} / f(m)`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{
    analyze, check_grid, dft, dft_bin, grid_points, modes, sgn, synthesize, FourierVector,
    SampleGrid, I,
};
use crate::operator::{from_exp_basis, Operator};

/// Oversampling required for the embedding and the action on functions.
pub const EMBED_OVERSAMPLING: usize = 8;
/// Lower bound on `min g'` accepted by [`Diffeo::new`].
pub const MIN_DERIVATIVE: f64 = 1e-6;
const VALIDATION_POINTS_PER_MODE: usize = 256;
const INVERSE_TOL: f64 = 1e-13;

/// An orientation preserving circle map given by its lift.
pub trait CircleMap: Send + Sync {
    fn eval(&self, theta: f64) -> f64;

    fn derivative(&self, theta: f64) -> f64;

    /// `g⁻¹(θ)`, solved by safeguarded Newton iteration.
    fn inverse(&self, theta: f64) -> Result<f64> {
        invert_lift(self, theta)
    }
}

/// `θ ↦ θ + s + Σ_k (a_k cos kθ + b_k sin kθ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diffeo {
    #[serde(default)]
    shift: f64,
    #[serde(default)]
    a: Vec<f64>,
    #[serde(default)]
    b: Vec<f64>,
    #[serde(skip)]
    min_derivative: f64,
}

impl Diffeo {
    /// Validated trigonometric perturbation of the identity; `a[k-1]` and
    /// `b[k-1]` are the coefficients of `cos kθ` and `sin kθ`.
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        Self::with_shift(0.0, a, b)
    }

    pub fn with_shift(shift: f64, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if !shift.is_finite() || a.iter().chain(&b).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("diffeomorphism coefficients".into()));
        }
        let mut d = Self {
            shift,
            a,
            b,
            min_derivative: 0.0,
        };
        d.min_derivative = d.scan_min_derivative();
        if d.min_derivative <= MIN_DERIVATIVE {
            return Err(Error::NotOrientationPreserving(d.min_derivative));
        }
        Ok(d)
    }

    pub fn identity() -> Self {
        Self {
            shift: 0.0,
            a: Vec::new(),
            b: Vec::new(),
            min_derivative: 1.0,
        }
    }

    pub fn rotation(alpha: f64) -> Self {
        Self {
            shift: alpha,
            ..Self::identity()
        }
    }

    /// Re-runs validation, e.g. after deserialization.
    pub fn validated(self) -> Result<Self> {
        Self::with_shift(self.shift, self.a, self.b)
    }

    pub fn degree(&self) -> usize {
        self.a.len().max(self.b.len())
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn cos_coeffs(&self) -> &[f64] {
        &self.a
    }

    pub fn sin_coeffs(&self) -> &[f64] {
        &self.b
    }

    /// Minimum of `g'` over the validation grid.
    pub fn min_derivative(&self) -> f64 {
        self.min_derivative
    }

    /// Largest coefficient distance to another diffeomorphism.
    pub fn coeff_distance(&self, other: &Self) -> f64 {
        let k = self.degree().max(other.degree());
        let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
        (0..k)
            .map(|i| {
                (at(&self.a, i) - at(&other.a, i))
                    .abs()
                    .max((at(&self.b, i) - at(&other.b, i)).abs())
            })
            .fold((self.shift - other.shift).abs(), f64::max)
    }

    fn scan_min_derivative(&self) -> f64 {
        let points = VALIDATION_POINTS_PER_MODE * self.degree().max(1) * 4;
        grid_points(points)
            .map(|t| self.derivative(t))
            .fold(f64::INFINITY, f64::min)
    }
}

impl CircleMap for Diffeo {
    fn eval(&self, theta: f64) -> f64 {
        let mut s = theta + self.shift;
        for (k, &c) in self.a.iter().enumerate() {
            s += c * ((k + 1) as f64 * theta).cos();
        }
        for (k, &c) in self.b.iter().enumerate() {
            s += c * ((k + 1) as f64 * theta).sin();
        }
        s
    }

    fn derivative(&self, theta: f64) -> f64 {
        let mut s = 1.0;
        for (k, &c) in self.a.iter().enumerate() {
            let kk = (k + 1) as f64;
            s -= c * kk * (kk * theta).sin();
        }
        for (k, &c) in self.b.iter().enumerate() {
            let kk = (k + 1) as f64;
            s += c * kk * (kk * theta).cos();
        }
        s
    }
}

/// `outer ∘ inner`.
pub struct Compose<'a> {
    pub outer: &'a dyn CircleMap,
    pub inner: &'a dyn CircleMap,
}

impl<'a> Compose<'a> {
    pub fn new(outer: &'a dyn CircleMap, inner: &'a dyn CircleMap) -> Self {
        Self { outer, inner }
    }
}

impl CircleMap for Compose<'_> {
    fn eval(&self, theta: f64) -> f64 {
        self.outer.eval(self.inner.eval(theta))
    }

    fn derivative(&self, theta: f64) -> f64 {
        self.outer.derivative(self.inner.eval(theta)) * self.inner.derivative(theta)
    }

    fn inverse(&self, theta: f64) -> Result<f64> {
        self.inner.inverse(self.outer.inverse(theta)?)
    }
}

fn invert_lift<G: CircleMap + ?Sized>(g: &G, theta: f64) -> Result<f64> {
    // Bracket: start from [θ-π, θ+π] and widen by whole turns if needed.
    let mut lo = theta - PI;
    let mut hi = theta + PI;
    let mut widen = 0;
    while g.eval(lo) > theta {
        lo -= TAU;
        widen += 1;
        if widen > 64 {
            return Err(Error::InverseDiverged(theta));
        }
    }
    while g.eval(hi) < theta {
        hi += TAU;
        widen += 1;
        if widen > 64 {
            return Err(Error::InverseDiverged(theta));
        }
    }
    let mut x = 2.0 * theta - g.eval(theta);
    if !(lo..=hi).contains(&x) {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let r = g.eval(x) - theta;
        if r.abs() <= INVERSE_TOL {
            return Ok(x);
        }
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = g.derivative(x);
        let newton = x - r / d;
        x = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * theta.abs().max(1.0) {
            return Ok(x);
        }
    }
    Err(Error::InverseDiverged(theta))
}

/// `g⁻¹` at each of the given points.
pub fn invert_diffeo(g: &dyn CircleMap, thetas: &[f64]) -> Result<Vec<f64>> {
    thetas.iter().map(|&t| g.inverse(t)).collect()
}

fn inverse_on_grid(g: &dyn CircleMap, grid: usize) -> Result<Vec<f64>> {
    grid_points(grid).map(|t| g.inverse(t)).collect()
}

/// `g.u = u ∘ g⁻¹ - mean`, re-analyzed to the modes of `u`.
pub fn act_on_function(g: &dyn CircleMap, u: &FourierVector, grid: usize) -> Result<FourierVector> {
    let n = u.n_trunc();
    check_grid(grid, n, EMBED_OVERSAMPLING)?;
    let pre = inverse_on_grid(g, grid)?;
    let samples = pre
        .iter()
        .map(|&x| {
            u.iter()
                .map(|(m, c)| c * Complex64::from_polar(1.0, m as f64 * x))
                .sum()
        })
        .collect();
    analyze(&SampleGrid::new(samples), n)
}

/// Exponential-basis matrix of the action, kept with the full DFT spectrum
/// of each column so that sums over `n` can extend past the truncation.
#[derive(Debug, Clone)]
pub struct IMatrix {
    n_trunc: usize,
    grid: usize,
    /// Column `pos(m)` holds the length-`grid` spectrum of `e^{i m g⁻¹(θ)}`.
    columns: Vec<Vec<Complex64>>,
}

impl IMatrix {
    pub fn n_trunc(&self) -> usize {
        self.n_trunc
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    /// `I_{n,m}`; valid for `|n| < grid/2`.
    pub fn get(&self, n: i64, m: i64) -> Complex64 {
        let col = &self.columns[crate::fourier::pos(m, self.n_trunc)];
        dft_bin(col, n)
    }

    /// Largest resolved mode, `grid/2 - 1`.
    pub fn max_resolved(&self) -> i64 {
        self.grid as i64 / 2 - 1
    }

    /// Restriction to `0 < |n|, |m| <= N` as a matrix in exponential
    /// coordinates (row `n`, column `m`).
    pub fn to_exp_matrix(&self) -> Operator {
        Operator::from_fn(self.n_trunc, |n, m| self.get(n, m))
    }
}

pub fn i_matrix(g: &dyn CircleMap, n_trunc: usize, grid: usize) -> Result<IMatrix> {
    check_grid(grid, n_trunc, EMBED_OVERSAMPLING)?;
    let pre = inverse_on_grid(g, grid)?;
    let columns = modes(n_trunc)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|m| {
            let samples: Vec<Complex64> = pre
                .iter()
                .map(|&x| Complex64::from_polar(1.0, m as f64 * x))
                .collect();
            dft(&samples)
        })
        .collect();
    Ok(IMatrix {
        n_trunc,
        grid,
        columns,
    })
}

/// `Φ(g)` in the ω-basis.
pub fn embed(g: &dyn CircleMap, n_trunc: usize, grid: usize) -> Result<Operator> {
    let im = i_matrix(g, n_trunc, grid)?;
    Ok(from_exp_basis(n_trunc, |n, m| im.get(n, m)))
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayRow {
    pub m: i64,
    /// `S_m = Σ_{n≠0} |n| |I_{n,m}|²`.
    pub s_m: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub n_trunc: usize,
    pub grid: usize,
    pub rows: Vec<DecayRow>,
    /// `max_m S_m / |m|`.
    pub max_ratio: f64,
    /// `Σ_{n>0, m<0} |n| |I_{n,m}|²`, the square of `‖Φ‖₂`.
    pub upper_corner: f64,
    /// `Σ_{n<0, m>0} |n| |I_{n,m}|²`.
    pub lower_corner: f64,
}

/// Column sums over every resolved `n` (up to `grid/2 - 1`), columns
/// restricted to `|m| <= N`.
pub fn decay_report(g: &dyn CircleMap, n_trunc: usize, grid: usize) -> Result<DecayReport> {
    let im = i_matrix(g, n_trunc, grid)?;
    let top = im.max_resolved();
    let mut rows = Vec::with_capacity(2 * n_trunc);
    let mut upper = 0.0;
    let mut lower = 0.0;
    for m in modes(n_trunc) {
        let mut s_m = 0.0;
        for n in (-top..=top).filter(|&n| n != 0) {
            let w = n.unsigned_abs() as f64 * im.get(n, m).norm_sqr();
            s_m += w;
            if n > 0 && m < 0 {
                upper += w;
            } else if n < 0 && m > 0 {
                lower += w;
            }
        }
        rows.push(DecayRow {
            m,
            s_m,
            ratio: s_m / m.unsigned_abs() as f64,
        });
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(DecayReport {
        n_trunc,
        grid,
        rows,
        max_ratio,
        upper_corner: upper,
        lower_corner: lower,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorFieldKind {
    /// `cos lθ`, `l >= 0`.
    Cos(u32),
    /// `sin kθ`, `k >= 1`.
    Sin(u32),
}

impl FromStr for VectorFieldKind {
    type Err = Error;

    /// Parses `cos<l>` or `sin<k>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Unknown {
            kind: "vector field",
            name: s.to_string(),
        };
        let (head, tail) = s.split_at(s.len().min(3));
        let order: u32 = tail.parse().map_err(|_| bad())?;
        match head {
            "cos" => Ok(Self::Cos(order)),
            "sin" if order >= 1 => Ok(Self::Sin(order)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for VectorFieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Cos(l) => write!(f, "cos{l}"),
            Self::Sin(k) => write!(f, "sin{k}"),
        }
    }
}

fn s_table(m: i64, n: i64) -> Complex64 {
    match (m > 0, n > 0) {
        (true, true) => -I,
        (false, false) => I,
        _ => Complex64::new(1.0, 0.0),
    }
}

fn delta(a: i64, b: i64) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// ω-basis matrix of the infinitesimal action of `cos lθ` or `sin kθ`.
pub fn vector_field_matrix(kind: VectorFieldKind, n_trunc: usize) -> Result<Operator> {
    if let VectorFieldKind::Sin(0) = kind {
        return Err(Error::Unknown {
            kind: "vector field",
            name: "sin0".into(),
        });
    }
    Ok(Operator::from_fn(n_trunc, |m, n| {
        let amp = 0.5 * ((m * n).unsigned_abs() as f64).sqrt();
        match kind {
            VectorFieldKind::Cos(l) => {
                let l = l as i64;
                s_table(m, n) * amp * (delta(m - n, l) + delta(n - m, l))
            }
            VectorFieldKind::Sin(k) => {
                let k = k as i64;
                s_table(m, n) * (-I) * amp * (delta(m - n, k) - delta(n - m, k))
            }
        }
    }))
}

/// Real trigonometric vector field `X(θ) = a_0 + Σ (a_k cos kθ + b_k sin kθ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    mean: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl VectorField {
    pub fn new(mean: f64, cos: Vec<f64>, sin: Vec<f64>) -> Self {
        Self { mean, cos, sin }
    }

    pub fn basis(kind: VectorFieldKind) -> Self {
        match kind {
            VectorFieldKind::Cos(0) => Self::new(1.0, vec![], vec![]),
            VectorFieldKind::Cos(l) => {
                let mut cos = vec![0.0; l as usize];
                cos[l as usize - 1] = 1.0;
                Self::new(0.0, cos, vec![])
            }
            VectorFieldKind::Sin(k) => {
                let mut sin = vec![0.0; k as usize];
                sin[k as usize - 1] = 1.0;
                Self::new(0.0, vec![], sin)
            }
        }
    }

    /// Field with the given mean and fluctuation; the fluctuation must be the
    /// coefficient vector of a real-valued function.
    pub fn from_fourier(mean: f64, fluct: &FourierVector) -> Result<Self> {
        let res = fluct.reality_residual();
        if res > 1e-12 {
            return Err(Error::ComplexField(res));
        }
        let n = fluct.n_trunc();
        let mut cos = vec![0.0; n];
        let mut sin = vec![0.0; n];
        for k in 1..=n as i64 {
            let c = fluct.coeff(k);
            cos[k as usize - 1] = 2.0 * c.re;
            sin[k as usize - 1] = -2.0 * c.im;
        }
        Ok(Self::new(mean, cos, sin))
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let mut s = self.mean;
        for (k, c) in self.cos.iter().enumerate() {
            s += c * ((k + 1) as f64 * theta).cos();
        }
        for (k, c) in self.sin.iter().enumerate() {
            s += c * ((k + 1) as f64 * theta).sin();
        }
        s
    }

    /// Exponential-basis coefficient of mode `k` (any integer).
    fn coeff(&self, k: i64) -> Complex64 {
        if k == 0 {
            return Complex64::new(self.mean, 0.0);
        }
        let i = k.unsigned_abs() as usize - 1;
        let a = self.cos.get(i).copied().unwrap_or(0.0);
        let b = self.sin.get(i).copied().unwrap_or(0.0);
        Complex64::new(a, -sgn(k) * b) * 0.5
    }

    fn degree(&self) -> i64 {
        self.cos.len().max(self.sin.len()) as i64
    }
}

/// Infinitesimal action `X.u = -u'X` with the mean removed, truncated to the
/// modes of `u`.
pub fn lie_action(x: &VectorField, u: &FourierVector) -> FourierVector {
    let n = u.n_trunc();
    let du = u.derivative();
    let deg = x.degree();
    let mut out = FourierVector::zeros(n);
    for p in modes(n) {
        let s: Complex64 = du
            .iter()
            .filter(|(m, _)| (p - m).abs() <= deg)
            .map(|(m, c)| c * x.coeff(p - m))
            .sum();
        out.set(p, -s);
    }
    out
}

/// Symplectic operator outside the image of the embedding: identity except
/// `A_{1,1} = A_{-1,-1} = √2`, `A_{1,-1} = i`, `A_{-1,1} = -i`.
pub fn counterexample_operator(n_trunc: usize) -> Operator {
    assert!(n_trunc >= 1);
    let r2 = Complex64::new(2f64.sqrt(), 0.0);
    let mut a = Operator::identity(n_trunc);
    a.set(1, 1, r2);
    a.set(-1, -1, r2);
    a.set(1, -1, I);
    a.set(-1, 1, -I);
    a
}

/// Image points of `A ẽ_1` for the counterexample operator, sampled on a
/// uniform grid. The curve is the ellipse with semi-axes `√2 - 1` (real)
/// and `√2 + 1` (imaginary).
pub fn counterexample_image(n_trunc: usize, samples: usize) -> Result<Vec<Complex64>> {
    let a = counterexample_operator(n_trunc);
    let image = a.apply_fn(&FourierVector::basis_omega(n_trunc, 1))?;
    let grid = samples.max(4 * n_trunc);
    let pts = synthesize(&image, grid)?.into_samples();
    if grid == samples {
        Ok(pts)
    } else {
        Ok(grid_points(samples)
            .map(|t| {
                image
                    .iter()
                    .map(|(m, c)| c * Complex64::from_polar(1.0, m as f64 * t))
                    .sum()
            })
            .collect())
    }
}
