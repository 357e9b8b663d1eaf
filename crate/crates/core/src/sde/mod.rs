//! Brownian motion on the truncated sp_HS and the group valued process
//! `X_t = I + Y_t` solving `dX = X dW + ½ X D dt`.

mod rng;
mod scheme;

pub use rng::RngStream;
pub use scheme::{
    Cayley, EulerMaruyama, SchemeRegistry, Stepper, StratonovichMidpoint, DEFAULT_SCHEME,
};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{
    canonical_basis, drift_d, CanonicalBasis, CovarianceSpec, DriftMatrix, SpElement,
};
use crate::error::{Error, Result};
use crate::fourier::pos;
use crate::operator::{CMatrix, Operator};
use scheme::{identity, times_diag};

pub const SUMMARY_SCHEMA: &str = "sympinf.simulate.summary/1";

/// Entries recorded along each path.
pub const RECORDED_ENTRIES: [(i64, i64); 3] = [(1, 1), (1, -1), (-1, -1)];

/// `A^#` on a raw matrix in `pos` layout.
pub fn sharp_matrix(a: &CMatrix) -> CMatrix {
    let dim = a.nrows();
    let half = dim / 2;
    CMatrix::from_fn(dim, dim, |p, q| {
        let v = a[(dim - 1 - q, dim - 1 - p)];
        if (p < half) == (q < half) {
            v
        } else {
            -v
        }
    })
}

fn defect_matrix(x: &CMatrix) -> f64 {
    let s = sharp_matrix(x);
    let id = identity(x.nrows());
    let left = (&s * x - &id).norm();
    let right = (x * &s - &id).norm();
    left.max(right)
}

/// `max(‖X^#X - I‖_HS, ‖XX^# - I‖_HS)`.
pub fn defect(x: &Operator) -> f64 {
    defect_matrix(x.matrix())
}

/// Canonical basis with covariance weights and the drift.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    basis: CanonicalBasis,
    q: Vec<f64>,
    drift: DriftMatrix,
    /// `(row, col, value)` in `pos` layout, per basis element.
    sparse: Vec<Vec<(usize, usize, Complex64)>>,
}

impl NoiseModel {
    pub fn new(n_trunc: usize, cov: &CovarianceSpec) -> Result<Self> {
        let basis = canonical_basis(n_trunc)?;
        let q = cov.weights(&basis)?;
        let drift = drift_d(cov, &basis)?;
        let sparse = basis
            .iter()
            .map(|xi| {
                xi.entries()
                    .iter()
                    .map(|&(m, n, z)| (pos(m, n_trunc), pos(n, n_trunc), z))
                    .collect()
            })
            .collect();
        Ok(Self {
            basis,
            q,
            drift,
            sparse,
        })
    }

    pub fn n_trunc(&self) -> usize {
        self.basis.n_trunc()
    }

    pub fn basis(&self) -> &CanonicalBasis {
        &self.basis
    }

    pub fn weights(&self) -> &[f64] {
        &self.q
    }

    pub fn drift(&self) -> &DriftMatrix {
        &self.drift
    }

    pub fn trace_q(&self) -> f64 {
        self.q.iter().sum()
    }

    /// `ΔW = Σ √(q dt) ζ ξ` written into `out`. One normal is drawn per
    /// basis element, including those with `q = 0`.
    fn increment_into(&self, dt: f64, rng: &mut RngStream, out: &mut CMatrix) {
        out.fill(Complex64::default());
        for (entries, &q) in self.sparse.iter().zip(&self.q) {
            let z = rng.normal();
            if q == 0.0 {
                continue;
            }
            let s = (q * dt).sqrt() * z;
            for &(i, j, v) in entries {
                out[(i, j)] += v * s;
            }
        }
    }

    fn new_increment(&self) -> CMatrix {
        let d = 2 * self.n_trunc();
        CMatrix::zeros(d, d)
    }

    pub fn brownian_increment(&self, dt: f64, rng: &mut RngStream) -> Result<SpElement> {
        check_positive("dt", dt)?;
        let mut m = self.new_increment();
        self.increment_into(dt, rng, &mut m);
        SpElement::new(Operator::from_matrix(m)?, f64::INFINITY)
    }

    /// `exp(t D / 2)`, diagonal.
    pub fn expected_mean(&self, t: f64) -> Operator {
        Operator::diagonal(self.n_trunc(), |m| {
            Complex64::new((0.5 * t * self.drift.get(m)).exp(), 0.0)
        })
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::NonFinite(name.to_string()));
    }
    if v <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )));
    }
    Ok(())
}

/// Number of steps of size `dt` covering `[0, t]`; `t/dt` must be an
/// integer up to rounding.
pub fn step_count(t: f64, dt: f64) -> Result<usize> {
    check_positive("t", t)?;
    check_positive("dt", dt)?;
    if dt > t {
        return Err(Error::InvalidParameter(format!(
            "dt = {dt} exceeds horizon t = {t}"
        )));
    }
    let j = (t / dt).round();
    if ((j * dt - t) / t).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "horizon t = {t} is not a whole number of steps dt = {dt}"
        )));
    }
    Ok(j as usize)
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub t: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub scheme: String,
    /// Record time, defect and entries every this many steps (and at `T`).
    pub record_every: usize,
    pub record_increments: bool,
}

impl SimConfig {
    pub fn new(t: f64, dt: f64, n_paths: usize, seed: u64) -> Self {
        Self {
            t,
            dt,
            n_paths,
            seed,
            scheme: DEFAULT_SCHEME.to_string(),
            record_every: 1,
            record_increments: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdePath {
    pub stream: u64,
    pub times: Vec<f64>,
    pub defects: Vec<f64>,
    /// Values of [`RECORDED_ENTRIES`] at each recorded time.
    pub entries: Vec<[Complex64; 3]>,
    pub max_defect: f64,
    pub final_state: Operator,
    pub increments: Option<Vec<Operator>>,
}

impl SdePath {
    pub fn final_defect(&self) -> f64 {
        *self
            .defects
            .last()
            .expect("path has at least the initial record")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimSummary {
    pub schema: &'static str,
    pub scheme: String,
    pub seed: u64,
    pub n_trunc: usize,
    pub dt: f64,
    pub t: f64,
    pub n_paths: usize,
    pub steps: usize,
    pub max_defect: f64,
    pub mean_defect: f64,
    pub mean_flow_residual: f64,
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub paths: Vec<SdePath>,
    pub summary: SimSummary,
    pub mean_state: Operator,
}

fn record(x: &CMatrix, n: usize) -> [Complex64; 3] {
    RECORDED_ENTRIES.map(|(a, b)| x[(pos(a, n), pos(b, n))])
}

fn run_path(
    model: &NoiseModel,
    stepper: &dyn Stepper,
    cfg: &SimConfig,
    steps: usize,
    stream: u64,
) -> Result<SdePath> {
    let n = model.n_trunc();
    let mut rng = RngStream::new(cfg.seed, stream);
    let mut x = identity(2 * n);
    let mut dw = model.new_increment();
    let every = cfg.record_every.max(1);
    let mut times = vec![0.0];
    let mut defects = vec![0.0];
    let mut entries = vec![record(&x, n)];
    let mut max_defect: f64 = 0.0;
    let mut incs = cfg.record_increments.then(Vec::new);
    for j in 1..=steps {
        model.increment_into(cfg.dt, &mut rng, &mut dw);
        x = stepper.step(&x, &dw, &model.drift.diag, cfg.dt)?;
        if let Some(v) = incs.as_mut() {
            v.push(Operator::from_matrix(dw.clone())?);
        }
        let d = defect_matrix(&x);
        max_defect = max_defect.max(d);
        if j % every == 0 || j == steps {
            times.push(j as f64 * cfg.dt);
            defects.push(d);
            entries.push(record(&x, n));
        }
    }
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite(format!("state of path {stream}")));
    }
    Ok(SdePath {
        stream,
        times,
        defects,
        entries,
        max_defect,
        final_state: Operator::from_matrix(x)?,
        increments: incs,
    })
}

/// Independent paths, one [`RngStream`] per path index; the summary is
/// reduced in path order so results do not depend on scheduling.
pub fn simulate(
    model: &NoiseModel,
    cfg: &SimConfig,
    registry: &SchemeRegistry,
) -> Result<SimResult> {
    let steps = step_count(cfg.t, cfg.dt)?;
    if cfg.n_paths == 0 {
        return Err(Error::InvalidParameter(
            "number of paths must be positive".into(),
        ));
    }
    let stepper = registry.get(&cfg.scheme)?;
    let paths = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|s| run_path(model, stepper, cfg, steps, s))
        .collect::<Result<Vec<_>>>()?;
    let n = model.n_trunc();
    let mut sum = CMatrix::zeros(2 * n, 2 * n);
    for p in &paths {
        sum += p.final_state.matrix();
    }
    let mean_state = Operator::from_matrix(sum / Complex64::new(paths.len() as f64, 0.0))?;
    let summary = SimSummary {
        schema: SUMMARY_SCHEMA,
        scheme: stepper.name().to_string(),
        seed: cfg.seed,
        n_trunc: n,
        dt: cfg.dt,
        t: cfg.t,
        n_paths: cfg.n_paths,
        steps,
        max_defect: paths.iter().map(|p| p.max_defect).fold(0.0, f64::max),
        mean_defect: paths.iter().map(|p| p.final_defect()).sum::<f64>() / paths.len() as f64,
        mean_flow_residual: mean_state.max_abs_diff(&model.expected_mean(cfg.t)),
    };
    Ok(SimResult {
        paths,
        summary,
        mean_state,
    })
}

/// Monte-Carlo mean of `X_T` against `exp(TD/2)`.
#[derive(Debug, Clone, Serialize)]
pub struct MeanFlowReport {
    pub n_paths: usize,
    pub t: f64,
    pub max_abs_diff: f64,
    /// `max |mean - exp(TD/2)| / (σ/√n)` over entries.
    pub max_z: f64,
    pub worst_entry: (i64, i64),
    pub band: f64,
    pub pass: bool,
}

pub fn mean_flow_report(model: &NoiseModel, result: &SimResult, band: f64) -> MeanFlowReport {
    let n = model.n_trunc();
    let target = model.expected_mean(result.summary.t);
    let np = result.paths.len() as f64;
    let mut max_z: f64 = 0.0;
    let mut worst = (1, 1);
    let mut pass = true;
    for m in crate::fourier::modes(n) {
        for k in crate::fourier::modes(n) {
            let mean = result.mean_state.get(m, k);
            let var = result
                .paths
                .iter()
                .map(|p| (p.final_state.get(m, k) - mean).norm_sqr())
                .sum::<f64>()
                / (np - 1.0).max(1.0);
            let se = (var / np).sqrt();
            let diff = (mean - target.get(m, k)).norm();
            if diff > band * se + 1e-12 {
                pass = false;
            }
            let z = if se > 0.0 {
                diff / se
            } else if diff > 1e-12 {
                f64::INFINITY
            } else {
                0.0
            };
            if z > max_z {
                max_z = z;
                worst = (m, k);
            }
        }
    }
    MeanFlowReport {
        n_paths: result.paths.len(),
        t: result.summary.t,
        max_abs_diff: result.mean_state.max_abs_diff(&target),
        max_z,
        worst_entry: worst,
        band,
        pass,
    }
}

/// Defects of the same Brownian paths integrated at several step sizes.
#[derive(Debug, Clone, Serialize)]
pub struct CoupledLevel {
    pub dt: f64,
    pub final_defects: Vec<f64>,
    pub max_defects: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoupledReport {
    pub levels: Vec<CoupledLevel>,
}

impl CoupledReport {
    /// Fraction of paths whose defect at `T` is strictly smaller at level
    /// `fine` than at level `coarse`.
    pub fn decrease_fraction(&self, coarse: usize, fine: usize) -> f64 {
        let a = &self.levels[coarse].final_defects;
        let b = &self.levels[fine].final_defects;
        a.iter().zip(b).filter(|(c, f)| f < c).count() as f64 / a.len() as f64
    }

    /// Median of coarse/fine final defect ratios.
    pub fn median_ratio(&self, coarse: usize, fine: usize) -> f64 {
        let mut r: Vec<f64> = self.levels[coarse]
            .final_defects
            .iter()
            .zip(&self.levels[fine].final_defects)
            .map(|(c, f)| c / f)
            .collect();
        r.sort_by(f64::total_cmp);
        let k = r.len();
        if k % 2 == 1 {
            r[k / 2]
        } else {
            0.5 * (r[k / 2 - 1] + r[k / 2])
        }
    }
}

/// Runs every step size in `dts` on the same Brownian path: the increment
/// of a coarse step is the sum of the finest increments it covers. Every
/// `dt` must be a whole multiple of the smallest.
pub fn simulate_coupled(
    model: &NoiseModel,
    scheme: &dyn Stepper,
    t: f64,
    dts: &[f64],
    seed: u64,
    n_paths: usize,
) -> Result<CoupledReport> {
    let fine = dts.iter().copied().fold(f64::INFINITY, f64::min);
    let steps = step_count(t, fine)?;
    let ratios = dts
        .iter()
        .map(|&dt| {
            step_count(t, dt)?;
            let r = (dt / fine).round();
            if ((r * fine - dt) / dt).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "dt = {dt} is not a multiple of {fine}"
                )));
            }
            Ok(r as usize)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = model.n_trunc();
    let per_path = (0..n_paths as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = RngStream::new(seed, s);
            let mut dw = model.new_increment();
            let mut xs: Vec<CMatrix> = dts.iter().map(|_| identity(2 * n)).collect();
            let mut acc: Vec<CMatrix> = dts.iter().map(|_| model.new_increment()).collect();
            let mut maxd = vec![0.0f64; dts.len()];
            for j in 1..=steps {
                model.increment_into(fine, &mut rng, &mut dw);
                for l in 0..dts.len() {
                    acc[l] += &dw;
                    if j % ratios[l] == 0 {
                        xs[l] = scheme.step(&xs[l], &acc[l], &model.drift.diag, dts[l])?;
                        acc[l].fill(Complex64::default());
                        maxd[l] = maxd[l].max(defect_matrix(&xs[l]));
                    }
                }
            }
            let finals: Vec<f64> = xs.iter().map(defect_matrix).collect();
            Ok((finals, maxd))
        })
        .collect::<Result<Vec<_>>>()?;
    let levels = dts
        .iter()
        .enumerate()
        .map(|(l, &dt)| CoupledLevel {
            dt,
            final_defects: per_path.iter().map(|(f, _)| f[l]).collect(),
            max_defects: per_path.iter().map(|(_, m)| m[l]).collect(),
        })
        .collect();
    Ok(CoupledReport { levels })
}

/// Re-runs a path's increments through the Euler recursion for `Y` and the
/// independent recursion `S' = S + ΔW^#(I+S) + ½ D^#(I+S) dt`, returning
/// `max_j max|S_j - Y_j^#|`.
pub fn sharp_path_consistency(model: &NoiseModel, increments: &[Operator], dt: f64) -> f64 {
    let n = model.n_trunc();
    let id = identity(2 * n);
    let d = &model.drift.diag;
    let d_sharp = sharp_matrix(&model.drift.to_operator().into_matrix());
    let half_dt = Complex64::new(0.5 * dt, 0.0);
    let mut y = CMatrix::zeros(2 * n, 2 * n);
    let mut s = CMatrix::zeros(2 * n, 2 * n);
    let mut worst: f64 = 0.0;
    for inc in increments {
        let w = inc.matrix();
        let iy = &id + &y;
        y = &y + &iy * w + times_diag(&iy, d) * half_dt;
        let is = &id + &s;
        s = &s + sharp_matrix(w) * &is + &d_sharp * &is * half_dt;
        let r = (&s - sharp_matrix(&y))
            .iter()
            .fold(0.0f64, |a, z| a.max(z.norm()));
        worst = worst.max(r);
    }
    worst
}

/// `|B(Y)|²_{L²₀} = Σ q(ξ) ‖(I+Y)ξ‖²_HS`.
pub fn l20_norm_sq(model: &NoiseModel, y: &Operator) -> f64 {
    let iy = &Operator::identity(model.n_trunc()) + y;
    weighted_image_sq(model, &iy)
}

pub fn l20_norm(model: &NoiseModel, y: &Operator) -> f64 {
    l20_norm_sq(model, y).sqrt()
}

/// `Σ q(ξ) ‖Mξ‖²_HS`.
fn weighted_image_sq(model: &NoiseModel, m: &Operator) -> f64 {
    let a = m.matrix();
    let dim = a.nrows();
    model
        .sparse
        .iter()
        .zip(&model.q)
        .filter(|(_, &q)| q != 0.0)
        .map(|(xi, &q)| {
            let mut prod = CMatrix::zeros(dim, dim);
            for &(i, j, v) in xi {
                for r in 0..dim {
                    prod[(r, j)] += a[(r, i)] * v;
                }
            }
            q * prod.norm_squared()
        })
        .sum()
}

/// Numerical check of the Lipschitz and linear growth conditions on the
/// diffusion `B(Y) = (I+Y)·` and the drift `F(Y) = ½(I+Y)D`.
#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    pub samples: usize,
    pub trace_q: f64,
    pub max_xi_op: f64,
    /// `√(Tr Q) max‖ξ‖_op`.
    pub c1: f64,
    /// `2 Tr Q max(1, max‖ξ‖²_op)`.
    pub k1: f64,
    /// `½‖D‖_op`.
    pub c2: f64,
    /// `½ max(‖D‖²_HS, ‖D‖²_op)`.
    pub k2: f64,
    pub diffusion_lipschitz: f64,
    pub diffusion_growth: f64,
    pub drift_lipschitz: f64,
    pub drift_growth: f64,
    pub pass: bool,
}

/// Observed ratios are `observed / bound`; each must be at most one.
pub fn lipschitz_report(model: &NoiseModel, samples: usize, seed: u64) -> Result<LipschitzReport> {
    let n = model.n_trunc();
    let trace_q = model.trace_q();
    let max_xi_op = model
        .basis
        .iter()
        .map(|xi| xi.matrix().op_norm())
        .fold(0.0, f64::max);
    let d = model.drift.to_operator();
    let d_op = model.drift.max_abs();
    let d_hs = d.hs_norm();
    let c1 = trace_q.sqrt() * max_xi_op;
    let k1 = 2.0 * trace_q * max_xi_op.powi(2).max(1.0);
    let c2 = 0.5 * d_op;
    let k2 = 0.5 * d_hs.powi(2).max(d_op.powi(2));
    let ratio = |num: f64, den: f64| {
        if den > 0.0 {
            num / den
        } else if num > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    };
    let mut rng = RngStream::new(seed, 0);
    let mut out = [0.0f64; 4];
    for _ in 0..samples {
        let scale = rng.uniform(0.01, 3.0);
        let mut rand_op =
            || Operator::from_fn(n, |_, _| Complex64::new(rng.normal(), rng.normal()) * scale);
        let y1 = rand_op();
        let y2 = rand_op();
        let diff = &y1 - &y2;
        let dn = diff.hs_norm();
        out[0] = out[0].max(ratio(weighted_image_sq(model, &diff).sqrt(), c1 * dn));
        let y1n = y1.hs_norm();
        out[1] = out[1].max(ratio(l20_norm_sq(model, &y1), k1 * (1.0 + y1n * y1n)));
        out[2] = out[2].max(ratio(0.5 * (&diff * &d).hs_norm(), c2 * dn));
        let f = (&(&Operator::identity(n) + &y1) * &d).scale(0.5);
        out[3] = out[3].max(ratio(f.hs_norm().powi(2), k2 * (1.0 + y1n * y1n)));
    }
    let tol = 1.0 + 1e-12;
    Ok(LipschitzReport {
        samples,
        trace_q,
        max_xi_op,
        c1,
        k1,
        c2,
        k2,
        diffusion_lipschitz: out[0],
        diffusion_growth: out[1],
        drift_lipschitz: out[2],
        drift_growth: out[3],
        pass: out.iter().all(|r| *r <= tol),
    })
}

/// Largest relative gap `|Tr(GΦΦ*) - Tr(Φ*GΦ)|` over random `G: n×n`,
/// `Φ: n×k`.
pub fn trace_identity_residual(n: usize, k: usize, trials: usize, seed: u64) -> f64 {
    let mut rng = RngStream::new(seed, 1);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let mut rnd =
            |r, c| CMatrix::from_fn(r, c, |_, _| Complex64::new(rng.normal(), rng.normal()));
        let g = rnd(n, n);
        let phi = rnd(n, k);
        let lhs = (&g * &phi * phi.adjoint()).trace();
        let rhs = (phi.adjoint() * &g * &phi).trace();
        worst = worst.max((lhs - rhs).norm() / lhs.norm().max(1.0));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::is_in_sp;
    use crate::diffeo::counterexample_operator;
    use approx::assert_abs_diff_eq;

    fn model(n: usize) -> NoiseModel {
        NoiseModel::new(n, &CovarianceSpec::default()).unwrap()
    }

    #[test]
    fn sharp_matrix_matches_operator_sharp() {
        let a = Operator::from_fn(3, |m, n| Complex64::new(m as f64, (n * n) as f64 + 0.5));
        assert_eq!(sharp_matrix(a.matrix()), a.sharp().into_matrix());
    }

    #[test]
    fn defect_examples() {
        assert_eq!(defect(&Operator::identity(4)), 0.0);
        assert!(defect(&counterexample_operator(4)) < 1e-14);
        let m = model(3);
        let xi = m.basis().get(4).matrix();
        let d3 = defect(&(&Operator::identity(3) + &xi.scale(1e-3)));
        let d4 = defect(&(&Operator::identity(3) + &xi.scale(1e-4)));
        assert!(d3 < 1e-5);
        assert_abs_diff_eq!(d3 / d4, 100.0, epsilon = 1e-3);
    }

    #[test]
    fn zero_covariance_increment_and_path() {
        let m = NoiseModel::new(3, &CovarianceSpec::zero()).unwrap();
        let mut rng = RngStream::new(1, 0);
        assert_eq!(
            m.brownian_increment(0.1, &mut rng)
                .unwrap()
                .as_operator()
                .max_abs(),
            0.0
        );
        let r = simulate(
            &m,
            &SimConfig::new(1.0, 0.1, 4, 9),
            &SchemeRegistry::default(),
        )
        .unwrap();
        for p in &r.paths {
            assert_eq!(p.final_state, Operator::identity(3));
            assert_eq!(p.max_defect, 0.0);
        }
    }

    #[test]
    fn increments_are_in_sp() {
        let m = model(4);
        let mut rng = RngStream::new(5, 2);
        for _ in 0..20 {
            let w = m.brownian_increment(0.01, &mut rng).unwrap();
            assert!(is_in_sp(w.as_operator(), 1e-12).pass);
        }
        assert!(m.brownian_increment(0.0, &mut rng).is_err());
    }

    #[test]
    fn step_count_validation() {
        assert_eq!(step_count(1.0, 1e-3).unwrap(), 1000);
        assert!(step_count(1.0, 0.3).is_err());
        assert!(step_count(1.0, 2.0).is_err());
        assert!(step_count(-1.0, 0.1).is_err());
    }

    #[test]
    fn one_euler_step_from_identity() {
        let m = model(3);
        let mut rng = RngStream::new(11, 0);
        let w = m
            .brownian_increment(1e-2, &mut rng)
            .unwrap()
            .into_operator();
        let x = EulerMaruyama
            .step(&identity(6), w.matrix(), &m.drift().diag, 1e-2)
            .unwrap();
        let want = &(&Operator::identity(3) + &w) + &m.drift().to_operator().scale(0.5e-2);
        assert!((Operator::from_matrix(x).unwrap().max_abs_diff(&want)) < 1e-15);
    }

    #[test]
    fn cayley_is_exactly_symplectic() {
        let m = model(4);
        let mut cfg = SimConfig::new(0.5, 0.05, 3, 2);
        cfg.scheme = "cayley".into();
        let r = simulate(&m, &cfg, &SchemeRegistry::default()).unwrap();
        assert!(r.summary.max_defect < 1e-12, "{}", r.summary.max_defect);
    }

    #[test]
    fn deterministic_limit_of_euler() {
        let m = model(3);
        let mut x = identity(6);
        let zero = m.new_increment();
        let dt = 1e-4;
        for _ in 0..10_000 {
            x = EulerMaruyama.step(&x, &zero, &m.drift().diag, dt).unwrap();
        }
        let x = Operator::from_matrix(x).unwrap();
        assert!(x.max_abs_diff(&m.expected_mean(1.0)) < 1e-4);
    }

    #[test]
    fn simulate_is_reproducible() {
        let m = model(3);
        let cfg = SimConfig::new(0.1, 0.01, 6, 42);
        let reg = SchemeRegistry::default();
        let a = simulate(&m, &cfg, &reg).unwrap();
        let b = simulate(&m, &cfg, &reg).unwrap();
        assert_eq!(
            serde_json::to_string(&a.summary).unwrap(),
            serde_json::to_string(&b.summary).unwrap()
        );
        assert_eq!(a.mean_state, b.mean_state);
    }

    #[test]
    fn sharp_consistency_one_step_and_path() {
        let m = model(4);
        let mut cfg = SimConfig::new(0.1, 1e-3, 1, 8);
        cfg.record_increments = true;
        let r = simulate(&m, &cfg, &SchemeRegistry::default()).unwrap();
        let incs = r.paths[0].increments.as_ref().unwrap();
        assert!(sharp_path_consistency(&m, &incs[..1], 1e-3) <= 1e-12);
        assert!(sharp_path_consistency(&m, incs, 1e-3) <= 1e-10);
    }

    #[test]
    fn l20_at_zero_is_trace() {
        let m = model(3);
        assert_abs_diff_eq!(
            l20_norm_sq(&m, &Operator::zeros(3)),
            m.trace_q(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn lipschitz_and_trace_identity() {
        let r = lipschitz_report(&model(3), 30, 1).unwrap();
        assert!(r.pass, "{r:?}");
        assert_abs_diff_eq!(r.max_xi_op, 0.5f64.sqrt(), epsilon = 1e-12);
        assert!(trace_identity_residual(6, 4, 20, 3) < 1e-12);
    }

    #[test]
    fn coupled_levels_share_the_path() {
        let m = model(2);
        let r = simulate_coupled(&m, &Cayley, 0.2, &[0.02, 0.01], 4, 3).unwrap();
        assert_eq!(r.levels.len(), 2);
        assert!(simulate_coupled(&m, &Cayley, 0.2, &[0.03, 0.01], 4, 3).is_err());
        // a single level matches simulate
        let one = simulate_coupled(&m, &EulerMaruyama, 0.2, &[0.01], 4, 3).unwrap();
        let s = simulate(
            &m,
            &SimConfig::new(0.2, 0.01, 3, 4),
            &SchemeRegistry::default(),
        )
        .unwrap();
        for (p, d) in s.paths.iter().zip(&one.levels[0].final_defects) {
            assert_eq!(p.final_defect(), *d);
        }
    }
}
