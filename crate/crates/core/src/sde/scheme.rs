use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::CMatrix;

/// One step of a scheme for `dX = X dW + ½ X D dt` (or its Stratonovich
/// form `δX = X δW`). `drift` is the diagonal of `D`.
pub trait Stepper: Send + Sync {
    fn name(&self) -> &'static str;

    fn step(&self, x: &CMatrix, dw: &CMatrix, drift: &[f64], dt: f64) -> Result<CMatrix>;
}

pub(crate) fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// `X D` for diagonal `D`.
pub(crate) fn times_diag(x: &CMatrix, d: &[f64]) -> CMatrix {
    let mut out = x.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= Complex64::new(d[j], 0.0);
    }
    out
}

/// Explicit Euler–Maruyama on the Itô form:
/// `X' = X + X ΔW + ½ X D dt`.
pub struct EulerMaruyama;

impl Stepper for EulerMaruyama {
    fn name(&self) -> &'static str {
        "euler-maruyama"
    }

    fn step(&self, x: &CMatrix, dw: &CMatrix, drift: &[f64], dt: f64) -> Result<CMatrix> {
        let mut g = dw.clone();
        for (i, d) in drift.iter().enumerate() {
            g[(i, i)] += Complex64::new(1.0 + 0.5 * d * dt, 0.0);
        }
        Ok(x * g)
    }
}

/// Midpoint rule on the Stratonovich form `X' = X + ½(X + X') ΔW`, solved
/// by a fixed number of fixed-point sweeps.
pub struct StratonovichMidpoint {
    pub iterations: usize,
}

impl Default for StratonovichMidpoint {
    fn default() -> Self {
        Self { iterations: 3 }
    }
}

impl Stepper for StratonovichMidpoint {
    fn name(&self) -> &'static str {
        "stratonovich-midpoint"
    }

    fn step(&self, x: &CMatrix, dw: &CMatrix, _drift: &[f64], _dt: f64) -> Result<CMatrix> {
        let mut next = x + x * dw;
        for _ in 0..self.iterations {
            let mid = (x + &next) * Complex64::new(0.5, 0.0);
            next = x + mid * dw;
        }
        Ok(next)
    }
}

/// Exact solution of the midpoint equation:
/// `X' = X (I + ΔW/2)(I - ΔW/2)⁻¹`, symplectic for `ΔW` in sp.
pub struct Cayley;

impl Stepper for Cayley {
    fn name(&self) -> &'static str {
        "cayley"
    }

    fn step(&self, x: &CMatrix, dw: &CMatrix, _drift: &[f64], _dt: f64) -> Result<CMatrix> {
        let half = dw * Complex64::new(0.5, 0.0);
        let id = identity(dw.nrows());
        let minus = (&id - &half).lu().try_inverse().ok_or(Error::Singular)?;
        Ok(x * (id + half) * minus)
    }
}

/// Stepping schemes by name.
pub struct SchemeRegistry {
    schemes: BTreeMap<&'static str, Box<dyn Stepper>>,
}

impl SchemeRegistry {
    pub fn empty() -> Self {
        Self {
            schemes: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, s: Box<dyn Stepper>) {
        self.schemes.insert(s.name(), s);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Stepper> {
        self.schemes
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::Unknown {
                kind: "scheme",
                name: name.to_string(),
            })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.schemes.keys().copied()
    }
}

impl Default for SchemeRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(EulerMaruyama));
        r.register(Box::new(StratonovichMidpoint::default()));
        r.register(Box::new(Cayley));
        r
    }
}

pub const DEFAULT_SCHEME: &str = "euler-maruyama";
