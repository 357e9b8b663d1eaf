use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use sympinf::algebra::{
    canonical_basis, compare_drift, drift_d, drift_formula, is_in_sp, project_pi, sp_dimension,
    sum_xi_oracle, CovarianceSpec,
};
use sympinf::diffeo::{
    counterexample_image, counterexample_operator, decay_report, embed, vector_field_matrix,
    Diffeo, VectorFieldKind,
};
use sympinf::fourier::{hilbert_j, inner_omega, modes, omega, FourierVector};
use sympinf::io;
use sympinf::operator::{Involution, Operator};
use sympinf::sde::{
    mean_flow_report, simulate, step_count, trace_identity_residual, NoiseModel, RngStream,
    SchemeRegistry, SimConfig, RECORDED_ENTRIES,
};

use crate::{Failure, Output, RunConfig};

pub(crate) struct Report {
    pub body: Value,
    pub failures: Vec<String>,
}

impl Report {
    fn new(body: Value) -> Self {
        Self {
            body,
            failures: Vec::new(),
        }
    }

    fn require(&mut self, pass: bool, what: impl Into<String>) {
        if !pass {
            self.failures.push(what.into());
        }
    }
}

pub(crate) fn dispatch(cfg: &RunConfig, out: &Output) -> Result<Report, Failure> {
    match cfg.command.as_str() {
        "check" => check(cfg),
        "embed" => embed_cmd(cfg, out),
        "counterexample" => counterexample(cfg, out),
        "drift" => drift(cfg, out),
        "simulate" => simulate_cmd(cfg, out),
        "meanflow" => meanflow(cfg, out),
        other => Err(Failure::Validation(format!("unknown command `{other}`"))),
    }
}

fn covariance(cfg: &RunConfig) -> Result<CovarianceSpec, Failure> {
    Ok(match &cfg.cov {
        Some(p) => io::load_covariance(p)?,
        None => CovarianceSpec::default(),
    })
}

#[derive(Serialize)]
struct CheckLine {
    name: &'static str,
    residual: f64,
    tol: f64,
    pass: bool,
}

fn random_op(n: usize, rng: &mut RngStream) -> Operator {
    Operator::from_fn(n, |_, _| Complex64::new(rng.normal(), rng.normal()))
}

fn random_vector(n: usize, rng: &mut RngStream) -> FourierVector {
    let mut u = FourierVector::zeros(n);
    for m in modes(n) {
        u.set(m, Complex64::new(rng.normal(), rng.normal()));
    }
    u
}

fn check(cfg: &RunConfig) -> Result<Report, Failure> {
    let n = cfg.n;
    let mut rng = RngStream::new(cfg.seed, 0);
    let mut lines = Vec::new();
    let mut line = |name: &'static str, residual: f64| {
        let tol = cfg.tol(name);
        lines.push(CheckLine {
            name,
            residual,
            tol,
            pass: residual <= tol,
        });
    };

    let mut worst: f64 = 0.0;
    let j = Operator::hilbert_j(n);
    worst = worst.max((&(&j * &j) + &Operator::identity(n)).max_abs());
    for _ in 0..100 {
        let a = random_op(n, &mut rng);
        let b = random_op(n, &mut rng);
        for inv in Involution::ALL {
            worst = worst.max(a.involution(inv).involution(inv).max_abs_diff(&a));
        }
        worst = worst.max((&a * &b).sharp().max_abs_diff(&(&b.sharp() * &a.sharp())));
        let u = random_vector(n, &mut rng);
        let v = random_vector(n, &mut rng);
        worst = worst.max((omega(&u, &v)? + omega(&v, &u)?).norm());
        let direct: f64 = u
            .iter()
            .map(|(m, c)| m.unsigned_abs() as f64 * c.norm_sqr())
            .sum();
        worst = worst.max((inner_omega(&u, &u)? - direct).norm() / direct.max(1.0));
        worst = worst.max(
            hilbert_j(&hilbert_j(&u))
                .add(&u)?
                .coeffs()
                .iter()
                .fold(0.0, |a, z| a.max(z.norm())),
        );
    }
    line("identities", worst);

    let basis = canonical_basis(n)?;
    let count_gap = (basis.len() as f64 - sp_dimension(n) as f64).abs();
    line("basis", basis.gram_residual() + count_gap);

    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let e = random_op(n, &mut rng);
        let f = random_op(n, &mut rng);
        let pe = project_pi(&e).into_operator();
        let pf = project_pi(&f).into_operator();
        worst = worst.max(project_pi(&pe).as_operator().max_abs_diff(&pe));
        worst = worst.max((pe.hs_inner(&f) - e.hs_inner(&pf)).abs());
        worst = worst.max(is_in_sp(&pe, 0.0).residual());
    }
    line("projection", worst);

    let a = counterexample_operator(n);
    line("counterexample", a.reality_residual() + a.sharp_residual());

    let mut worst: f64 = 0.0;
    for l in 0..=4u32.min(2 * n as u32) {
        let mut kinds = vec![VectorFieldKind::Cos(l)];
        if l > 0 {
            kinds.push(VectorFieldKind::Sin(l));
        }
        for k in kinds {
            worst = worst.max(is_in_sp(&vector_field_matrix(k, n)?, 0.0).residual());
        }
    }
    line("vector-fields", worst);

    let q = CovarianceSpec::default();
    let d = drift_d(&q, &basis)?;
    line(
        "drift",
        (&d.to_operator() + &sum_xi_oracle(&q, &basis)?).max_abs(),
    );
    line("trace", trace_identity_residual(2 * n, n, 20, cfg.seed));

    let mut report = Report::new(json!({
        "schema": "sympinf.check/1",
        "n_trunc": n,
        "seed": cfg.seed,
        "checks": lines,
    }));
    for l in &lines {
        report.require(
            l.pass,
            format!("{} residual {:.3e} > {:.1e}", l.name, l.residual, l.tol),
        );
    }
    Ok(report)
}

fn embed_cmd(cfg: &RunConfig, out: &Output) -> Result<Report, Failure> {
    let g = match &cfg.diffeo {
        Some(p) => io::load_diffeo(p)?,
        None => Diffeo::new(vec![], vec![0.3])?,
    };
    let a = embed(&g, cfg.n, cfg.grid)?;
    let decay = decay_report(&g, cfg.n, cfg.grid)?;
    let interior = (cfg.n / 4).max(1);
    let tol = cfg.tol("omega");
    let inner = a.interior_predicates(interior, tol);
    if let Some(p) = out.path("matrix.json") {
        io::save_matrix_json(&p, &a)?;
    }
    if let Some(p) = out.path("decay.csv") {
        io::save_table_csv(
            &p,
            &["m", "S_m", "ratio"],
            decay.rows.iter().map(|r| vec![r.m as f64, r.s_m, r.ratio]),
        )?;
    }
    let mut report = Report::new(json!({
        "schema": "sympinf.embed/1",
        "n_trunc": cfg.n,
        "grid": cfg.grid,
        "min_derivative": g.min_derivative(),
        "norm2": a.norm2(),
        "interior": interior,
        "interior_predicates": inner,
        "full_predicates": a.predicates(tol),
        "decay": {
            "max_ratio": decay.max_ratio,
            "upper_corner": decay.upper_corner,
            "lower_corner": decay.lower_corner,
        },
    }));
    report.require(
        inner.preserves_omega.pass,
        format!(
            "interior preserves_omega residual {:.3e}",
            inner.preserves_omega.residual
        ),
    );
    report.require(
        inner.is_real.pass,
        format!("interior reality residual {:.3e}", inner.is_real.residual),
    );
    Ok(report)
}

fn counterexample(cfg: &RunConfig, out: &Output) -> Result<Report, Failure> {
    let a = counterexample_operator(cfg.n);
    let pts = counterexample_image(cfg.n, cfg.samples)?;
    let r2 = 2f64.sqrt();
    let moduli = pts.iter().map(|z| z.norm());
    let lo = moduli.clone().fold(f64::INFINITY, f64::min);
    let hi = moduli.fold(0.0, f64::max);
    let on_ellipse = pts
        .iter()
        .map(|z| ((z.re / (r2 - 1.0)).powi(2) + (z.im / (r2 + 1.0)).powi(2) - 1.0).abs())
        .fold(0.0, f64::max);
    if let Some(p) = out.path("ellipse.csv") {
        io::save_table_csv(&p, &["x", "y"], pts.iter().map(|z| vec![z.re, z.im]))?;
    }
    if let Some(p) = out.path("matrix.json") {
        io::save_matrix_json(&p, &a)?;
    }
    let preds = a.predicates(cfg.tol("symplectic"));
    let etol = cfg.tol("ellipse");
    let modulus_gap = (lo - (r2 - 1.0)).abs().max((hi - (r2 + 1.0)).abs());
    let mut report = Report::new(json!({
        "schema": "sympinf.counterexample/1",
        "n_trunc": cfg.n,
        "samples": cfg.samples,
        "predicates": preds,
        "min_modulus": lo,
        "max_modulus": hi,
        "ellipse_residual": on_ellipse,
    }));
    report.require(preds.is_symplectic.pass, "counterexample is not symplectic");
    // the sampled extrema are exact only when the samples hit θ = 0, π/2
    report.require(
        on_ellipse <= etol && (!cfg.samples.is_multiple_of(4) || modulus_gap <= etol),
        format!(
            "image off the ellipse by {:.3e}",
            on_ellipse.max(modulus_gap)
        ),
    );
    Ok(report)
}

fn drift(cfg: &RunConfig, out: &Output) -> Result<Report, Failure> {
    let q = covariance(cfg)?;
    let basis = canonical_basis(cfg.n)?;
    let d = drift_d(&q, &basis)?;
    let oracle = sum_xi_oracle(&q, &basis)?;
    let residual = (&d.to_operator() + &oracle).max_abs();
    let formula = drift_formula(&q, &basis)?;
    let cmp = compare_drift(&d, &formula);
    if let Some(p) = out.path("drift.csv") {
        io::save_drift_csv(&p, &d)?;
    }
    let tol = cfg.tol("oracle");
    let mut report = Report::new(json!({
        "schema": "sympinf.drift/1",
        "n_trunc": cfg.n,
        "trace_q": q.trace(&basis)?,
        "drift": d.rows().map(|(m, v)| json!([m, v])).collect::<Vec<_>>(),
        "oracle_residual": residual,
        "symmetry_residual": d.symmetry_residual(),
        "diagonal_formula": cmp,
    }));
    report.require(
        residual <= tol,
        format!("drift differs from oracle by {residual:.3e}"),
    );
    report.require(d.symmetry_residual() <= tol, "drift is not even in m");
    Ok(report)
}

fn run_simulation(
    cfg: &RunConfig,
    record_increments: bool,
) -> Result<(NoiseModel, sympinf::sde::SimResult), Failure> {
    let model = NoiseModel::new(cfg.n, &covariance(cfg)?)?;
    let steps = step_count(cfg.t, cfg.dt)?;
    let sim = SimConfig {
        t: cfg.t,
        dt: cfg.dt,
        n_paths: cfg.paths,
        seed: cfg.seed,
        scheme: cfg.scheme.clone(),
        record_every: (steps / 1000).max(1),
        record_increments,
    };
    let res = simulate(&model, &sim, &SchemeRegistry::default())?;
    Ok((model, res))
}

fn simulate_cmd(cfg: &RunConfig, out: &Output) -> Result<Report, Failure> {
    let (_, res) = run_simulation(cfg, false)?;
    out.json("summary.json", &res.summary)?;
    if let Some(dir) = out.path("paths") {
        std::fs::create_dir_all(&dir).map_err(sympinf::Error::from)?;
        let mut header = vec!["t".to_string(), "defect".to_string()];
        for (m, k) in RECORDED_ENTRIES {
            header.push(format!("re_x({m};{k})"));
            header.push(format!("im_x({m};{k})"));
        }
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        for p in &res.paths {
            let rows = p
                .times
                .iter()
                .zip(&p.defects)
                .zip(&p.entries)
                .map(|((t, d), e)| {
                    let mut r = vec![*t, *d];
                    for z in e {
                        r.push(z.re);
                        r.push(z.im);
                    }
                    r
                });
            io::save_table_csv(
                &dir.join(format!("path_{:05}.csv", p.stream)),
                &header,
                rows,
            )?;
        }
    }
    let tol = cfg.tol("defect");
    let mut report = Report::new(serde_json::to_value(&res.summary).expect("summary serializes"));
    report.require(
        res.summary.max_defect <= tol,
        format!("max defect {:.3e} > {tol:.1e}", res.summary.max_defect),
    );
    Ok(report)
}

fn meanflow(cfg: &RunConfig, out: &Output) -> Result<Report, Failure> {
    let (model, res) = run_simulation(cfg, false)?;
    let mf = mean_flow_report(&model, &res, cfg.tol("band"));
    if let Some(p) = out.path("mean.csv") {
        let target = model.expected_mean(cfg.t);
        let n = cfg.n;
        let rows = modes(n).flat_map(|m| {
            let target = &target;
            let mean = &res.mean_state;
            modes(n).map(move |k| {
                let z = mean.get(m, k);
                vec![m as f64, k as f64, z.re, z.im, target.get(m, k).re]
            })
        });
        io::save_table_csv(&p, &["m", "n", "mean_re", "mean_im", "expected"], rows)?;
    }
    let mut report = Report::new(json!({
        "schema": "sympinf.meanflow/1",
        "summary": res.summary,
        "meanflow": mf,
    }));
    report.require(
        mf.pass,
        format!(
            "mean flow outside {}σ bands (max z {:.2})",
            mf.band, mf.max_z
        ),
    );
    Ok(report)
}
