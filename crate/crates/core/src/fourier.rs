//! Truncated Fourier analysis on the circle.
//!
//! Functions are mean-zero trigonometric polynomials with modes
//! `0 < |m| <= N`. Coefficients are stored in the exponential basis
//! `ê_m = e^{imθ}`; array slot `pos(m)` puts the negative modes first:
//!
//! ```text
//! pos(m) = m + N      for m < 0   (-N .. -1  ->  0 .. N-1)
//! pos(m) = m + N - 1  for m > 0   ( 1 ..  N  ->  N .. 2N-1)
//! ```
//!
//! The H^{1/2} structure uses the symplectic form
//! `ω(u, v) = (1/2π) ∫ u v' dθ`, the Hilbert transform `J ê_m = i sgn(m) ê_m`
//! and the inner product `(u, v)_ω = -ω(u, J v̄) = Σ |m| û(m) conj(v̂(m))`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Minimum oversampling factor of a sample grid relative to the truncation.
pub const MIN_OVERSAMPLING: usize = 4;

/// A nonzero Fourier mode inside a truncation of order `n_trunc`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex(i64);

impl ModeIndex {
    pub fn new(m: i64, n_trunc: usize) -> Result<Self> {
        if m == 0 || m.unsigned_abs() as usize > n_trunc {
            return Err(Error::BadMode(m));
        }
        Ok(Self(m))
    }

    pub fn get(self) -> i64 {
        self.0
    }

    pub fn pos(self, n_trunc: usize) -> usize {
        pos(self.0, n_trunc)
    }
}

/// Array slot of mode `m`. Panics on `m = 0` or `|m| > n_trunc`.
#[inline]
pub fn pos(m: i64, n_trunc: usize) -> usize {
    let n = n_trunc as i64;
    assert!(
        m != 0 && m.abs() <= n,
        "mode {m} outside truncation {n_trunc}"
    );
    if m < 0 {
        (m + n) as usize
    } else {
        (m + n - 1) as usize
    }
}

/// Inverse of [`pos`].
#[inline]
pub fn mode_at(p: usize, n_trunc: usize) -> i64 {
    let n = n_trunc as i64;
    let p = p as i64;
    if p < n {
        p - n
    } else {
        p - n + 1
    }
}

/// Modes in slot order: `-N, ..., -1, 1, ..., N`.
pub fn modes(n_trunc: usize) -> impl Iterator<Item = i64> + Clone {
    let n = n_trunc as i64;
    (-n..=n).filter(|&m| m != 0)
}

#[inline]
pub fn sgn(m: i64) -> f64 {
    if m > 0 {
        1.0
    } else if m < 0 {
        -1.0
    } else {
        0.0
    }
}

/// Coordinate scaling between the exponential and the ω-orthonormal basis:
/// `ũ(m) = f(m) û(m)` with `f(m) = √m` for `m > 0` and `i√|m|` for `m < 0`.
#[inline]
pub fn omega_scale(m: i64) -> Complex64 {
    let r = (m.unsigned_abs() as f64).sqrt();
    if m > 0 {
        Complex64::new(r, 0.0)
    } else {
        Complex64::new(0.0, r)
    }
}

/// Uniform samples `θ_j = 2πj/M` of a complex function on the circle.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    samples: Vec<Complex64>,
}

impl SampleGrid {
    pub fn new(samples: Vec<Complex64>) -> Self {
        Self { samples }
    }

    pub fn from_fn(len: usize, f: impl Fn(f64) -> Complex64) -> Self {
        Self {
            samples: grid_points(len).map(f).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    /// Trapezoid mean `(1/M) Σ s_j`, exact for trigonometric polynomials of
    /// degree below `M`.
    pub fn mean(&self) -> Complex64 {
        self.samples.iter().sum::<Complex64>() / self.samples.len() as f64
    }
}

pub fn grid_points(len: usize) -> impl Iterator<Item = f64> {
    (0..len).map(move |j| 2.0 * PI * j as f64 / len as f64)
}

pub(crate) fn check_grid(grid: usize, n_trunc: usize, factor: usize) -> Result<()> {
    if n_trunc == 0 {
        return Err(Error::ZeroTruncation);
    }
    let required = factor * n_trunc;
    if grid < required {
        return Err(Error::GridTooSmall {
            grid,
            n_trunc,
            required,
        });
    }
    Ok(())
}

/// Forward DFT scaled by `1/M`, i.e. `c_k = (1/M) Σ_j s_j e^{-2πijk/M}`.
pub(crate) fn dft(samples: &[Complex64]) -> Vec<Complex64> {
    let len = samples.len();
    let mut buf = samples.to_vec();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let scale = 1.0 / len as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

/// Coefficient of mode `m` inside a length-`M` DFT output.
#[inline]
pub(crate) fn dft_bin(spectrum: &[Complex64], m: i64) -> Complex64 {
    let len = spectrum.len() as i64;
    spectrum[m.rem_euclid(len) as usize]
}

/// Truncated element of H_ω in exponential-basis coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierVector {
    n_trunc: usize,
    coeffs: Vec<Complex64>,
}

impl FourierVector {
    pub fn zeros(n_trunc: usize) -> Self {
        Self {
            n_trunc,
            coeffs: vec![Complex64::default(); 2 * n_trunc],
        }
    }

    pub fn from_coeffs(n_trunc: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if n_trunc == 0 {
            return Err(Error::ZeroTruncation);
        }
        if coeffs.len() != 2 * n_trunc {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficients, got {}",
                2 * n_trunc,
                coeffs.len()
            )));
        }
        Ok(Self { n_trunc, coeffs })
    }

    /// Single exponential `ê_m`.
    pub fn basis_exp(n_trunc: usize, m: i64) -> Self {
        let mut v = Self::zeros(n_trunc);
        v.coeffs[pos(m, n_trunc)] = Complex64::new(1.0, 0.0);
        v
    }

    /// ω-orthonormal basis vector `ẽ_m = ê_m / f(m)`.
    pub fn basis_omega(n_trunc: usize, m: i64) -> Self {
        let mut v = Self::zeros(n_trunc);
        v.coeffs[pos(m, n_trunc)] = omega_scale(m).inv();
        v
    }

    /// Inverse of [`Self::to_omega_basis`].
    pub fn from_omega_coords(n_trunc: usize, coords: &[Complex64]) -> Result<Self> {
        if coords.len() != 2 * n_trunc {
            return Err(Error::InvalidParameter(format!(
                "expected {} ω-coordinates, got {}",
                2 * n_trunc,
                coords.len()
            )));
        }
        let coeffs = modes(n_trunc)
            .zip(coords)
            .map(|(m, c)| c / omega_scale(m))
            .collect();
        Self::from_coeffs(n_trunc, coeffs)
    }

    pub fn n_trunc(&self) -> usize {
        self.n_trunc
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, m: i64) -> Complex64 {
        self.coeffs[pos(m, self.n_trunc)]
    }

    pub fn set(&mut self, m: i64, value: Complex64) {
        let p = pos(m, self.n_trunc);
        self.coeffs[p] = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        modes(self.n_trunc).zip(self.coeffs.iter().copied())
    }

    /// Samples `u(θ_j)` on a uniform grid.
    pub fn synthesize(&self, grid: usize) -> Result<SampleGrid> {
        synthesize(self, grid)
    }

    /// Coefficients of the pointwise complex conjugate: `conj(û(-m))`.
    pub fn conj_fn(&self) -> Self {
        let mut out = Self::zeros(self.n_trunc);
        for (m, c) in self.iter() {
            out.set(-m, c.conj());
        }
        out
    }

    /// Coefficients of `u'`: `i m û(m)`.
    pub fn derivative(&self) -> Self {
        let coeffs = self.iter().map(|(m, c)| I * m as f64 * c).collect();
        Self {
            n_trunc: self.n_trunc,
            coeffs,
        }
    }

    /// Largest violation of `û(-m) = conj(û(m))`.
    pub fn reality_residual(&self) -> f64 {
        self.iter()
            .map(|(m, c)| (self.coeff(-m) - c.conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.reality_residual() <= tol
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            n_trunc: self.n_trunc,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_trunc(self, other)?;
        Ok(Self {
            n_trunc: self.n_trunc,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Coordinates `ũ(m) = (u, ẽ_m)_ω` in the ω-orthonormal basis.
    pub fn to_omega_basis(&self) -> Vec<Complex64> {
        self.iter().map(|(m, c)| omega_scale(m) * c).collect()
    }
}

fn same_trunc(u: &FourierVector, v: &FourierVector) -> Result<()> {
    if u.n_trunc != v.n_trunc {
        return Err(Error::TruncationMismatch(u.n_trunc, v.n_trunc));
    }
    Ok(())
}

/// `û(m) = (1/M) Σ_j s_j e^{-imθ_j}` for `0 < |m| <= N`; the mean is dropped.
pub fn analyze(samples: &SampleGrid, n_trunc: usize) -> Result<FourierVector> {
    check_grid(samples.len(), n_trunc, MIN_OVERSAMPLING)?;
    let spectrum = dft(samples.samples());
    let coeffs = modes(n_trunc).map(|m| dft_bin(&spectrum, m)).collect();
    FourierVector::from_coeffs(n_trunc, coeffs)
}

/// `s_j = Σ_m û(m) e^{imθ_j}`.
pub fn synthesize(u: &FourierVector, grid: usize) -> Result<SampleGrid> {
    check_grid(grid, u.n_trunc, MIN_OVERSAMPLING)?;
    let mut buf = vec![Complex64::default(); grid];
    for (m, c) in u.iter() {
        buf[m.rem_euclid(grid as i64) as usize] += c;
    }
    FftPlanner::new().plan_fft_inverse(grid).process(&mut buf);
    Ok(SampleGrid::new(buf))
}

/// Hilbert transform: `û(m) ↦ i sgn(m) û(m)`.
pub fn hilbert_j(u: &FourierVector) -> FourierVector {
    let coeffs = u.iter().map(|(m, c)| I * sgn(m) * c).collect();
    FourierVector {
        n_trunc: u.n_trunc,
        coeffs,
    }
}

/// `ω(u, v) = (1/2π) ∫ u v' dθ = -i Σ_m m û(m) v̂(-m)`.
pub fn omega(u: &FourierVector, v: &FourierVector) -> Result<Complex64> {
    same_trunc(u, v)?;
    let s: Complex64 = u.iter().map(|(m, c)| m as f64 * c * v.coeff(-m)).sum();
    Ok(-I * s)
}

/// `ω(u, v)` by trapezoid quadrature of `u v'` on an `M`-point grid.
/// Exact when `M > 2N`; used to cross-check the coefficient formula.
pub fn omega_quadrature(u: &FourierVector, v: &FourierVector, grid: usize) -> Result<Complex64> {
    same_trunc(u, v)?;
    let us = synthesize(u, grid)?;
    let dvs = synthesize(&v.derivative(), grid)?;
    let prod: Vec<Complex64> = us
        .samples()
        .iter()
        .zip(dvs.samples())
        .map(|(a, b)| a * b)
        .collect();
    Ok(SampleGrid::new(prod).mean())
}

/// `(u, v)_ω = -ω(u, J v̄)`, linear in `u` and conjugate-linear in `v`.
pub fn inner_omega(u: &FourierVector, v: &FourierVector) -> Result<Complex64> {
    same_trunc(u, v)?;
    Ok(u.iter()
        .map(|(m, c)| m.unsigned_abs() as f64 * c * v.coeff(m).conj())
        .sum())
}

/// `‖u‖_ω = (Σ |m| |û(m)|²)^{1/2}`.
pub fn norm_omega(u: &FourierVector) -> f64 {
    u.iter()
        .map(|(m, c)| m.unsigned_abs() as f64 * c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn to_omega_basis(u: &FourierVector) -> Vec<Complex64> {
    u.to_omega_basis()
}
