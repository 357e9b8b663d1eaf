//! Flat-file formats.
//!
//! Object-shaped JSON files carry a `schema` field naming format and
//! version. Inputs may omit it; if present it must match. Vectors are the
//! exception: they are stored as a bare array of `[m, re, im]` triples.
//! Every writer refuses to overwrite an existing file.

use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::algebra::{CovarianceSpec, DriftMatrix};
use crate::diffeo::Diffeo;
use crate::error::{Error, Result};
use crate::fourier::{modes, FourierVector};
use crate::operator::{CMatrix, Operator};

pub const MATRIX_SCHEMA: &str = "sympinf.matrix/1";
pub const DIFFEO_SCHEMA: &str = "sympinf.diffeo/1";
pub const COVARIANCE_SCHEMA: &str = "sympinf.covariance/1";

/// Opens `path` for writing, failing if it already exists.
pub fn create_new(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        OpenOptions::new().write(true).create_new(true).open(path)?,
    ))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create_new(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn check_schema(found: Option<&str>, expected: &str) -> Result<()> {
    match found {
        Some(s) if s != expected => Err(Error::Schema {
            expected: expected.to_string(),
            found: s.to_string(),
        }),
        _ => Ok(()),
    }
}

fn finite(z: Complex64, what: &str) -> Result<Complex64> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

fn vector_from_triples(triples: &[(i64, f64, f64)]) -> Result<FourierVector> {
    let n = triples
        .iter()
        .map(|t| t.0.unsigned_abs() as usize)
        .max()
        .unwrap_or(0);
    if n == 0 {
        return Err(Error::ZeroTruncation);
    }
    let mut u = FourierVector::zeros(n);
    for &(m, re, im) in triples {
        if m == 0 {
            return Err(Error::BadMode(0));
        }
        u.set(
            m,
            finite(Complex64::new(re, im), &format!("vector entry {m}"))?,
        );
    }
    Ok(u)
}

fn vector_triples(u: &FourierVector) -> Vec<(i64, f64, f64)> {
    u.iter().map(|(m, z)| (m, z.re, z.im)).collect()
}

pub fn save_vector_json(path: &Path, u: &FourierVector) -> Result<()> {
    write_json(path, &vector_triples(u))
}

/// Truncation order is the largest `|m|`; missing modes are zero.
pub fn load_vector_json(path: &Path) -> Result<FourierVector> {
    let t: Vec<(i64, f64, f64)> = read_json(path)?;
    vector_from_triples(&t)
}

pub fn save_vector_csv(path: &Path, u: &FourierVector) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_new(path)?);
    w.write_record(["m", "re", "im"])?;
    for (m, re, im) in vector_triples(u) {
        w.serialize((m, re, im))?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_vector_csv(path: &Path) -> Result<FourierVector> {
    let mut r = csv::Reader::from_path(path)?;
    let t = r
        .deserialize::<(i64, f64, f64)>()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    vector_from_triples(&t)
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schema: Option<String>,
    n_trunc: usize,
    /// Row-major `[re, im]`, rows and columns in mode order
    /// `-N..-1, 1..N`.
    entries: Vec<[f64; 2]>,
}

pub fn save_matrix_json(path: &Path, a: &Operator) -> Result<()> {
    let d = a.dim();
    let m = a.matrix();
    let entries = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| [m[(i, j)].re, m[(i, j)].im])
        .collect();
    write_json(
        path,
        &MatrixFile {
            schema: Some(MATRIX_SCHEMA.to_string()),
            n_trunc: a.n_trunc(),
            entries,
        },
    )
}

pub fn load_matrix_json(path: &Path) -> Result<Operator> {
    let f: MatrixFile = read_json(path)?;
    check_schema(f.schema.as_deref(), MATRIX_SCHEMA)?;
    if f.n_trunc == 0 {
        return Err(Error::ZeroTruncation);
    }
    let d = 2 * f.n_trunc;
    if f.entries.len() != d * d {
        return Err(Error::InvalidParameter(format!(
            "matrix file has {} entries, expected {}",
            f.entries.len(),
            d * d
        )));
    }
    let mut m = CMatrix::zeros(d, d);
    for (k, [re, im]) in f.entries.into_iter().enumerate() {
        let (i, j) = (k / d, k % d);
        m[(i, j)] = finite(Complex64::new(re, im), &format!("matrix entry ({i}, {j})"))?;
    }
    Operator::from_matrix(m)
}

/// Long format `m, n, re, im`.
pub fn save_matrix_csv(path: &Path, a: &Operator) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_new(path)?);
    w.write_record(["m", "n", "re", "im"])?;
    let n = a.n_trunc();
    for m in modes(n) {
        for k in modes(n) {
            let z = a.get(m, k);
            w.serialize((m, k, z.re, z.im))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct DiffeoFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schema: Option<String>,
    #[serde(default)]
    a: Vec<f64>,
    #[serde(default)]
    b: Vec<f64>,
    #[serde(default)]
    shift: f64,
}

pub fn load_diffeo(path: &Path) -> Result<Diffeo> {
    let f: DiffeoFile = read_json(path)?;
    check_schema(f.schema.as_deref(), DIFFEO_SCHEMA)?;
    Diffeo::with_shift(f.shift, f.a, f.b)
}

pub fn save_diffeo(path: &Path, g: &Diffeo) -> Result<()> {
    write_json(
        path,
        &DiffeoFile {
            schema: Some(DIFFEO_SCHEMA.to_string()),
            a: g.cos_coeffs().to_vec(),
            b: g.sin_coeffs().to_vec(),
            shift: g.shift(),
        },
    )
}

#[derive(Serialize, Deserialize)]
struct CovarianceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schema: Option<String>,
    #[serde(flatten)]
    spec: CovarianceSpec,
}

pub fn load_covariance(path: &Path) -> Result<CovarianceSpec> {
    let f: CovarianceFile = read_json(path)?;
    check_schema(f.schema.as_deref(), COVARIANCE_SCHEMA)?;
    f.spec.validate()?;
    Ok(f.spec)
}

pub fn save_covariance(path: &Path, q: &CovarianceSpec) -> Result<()> {
    write_json(
        path,
        &CovarianceFile {
            schema: Some(COVARIANCE_SCHEMA.to_string()),
            spec: q.clone(),
        },
    )
}

/// `m, D_m`.
pub fn save_drift_csv(path: &Path, d: &DriftMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_new(path)?);
    w.write_record(["m", "D_m"])?;
    for (m, v) in d.rows() {
        w.serialize((m, v))?;
    }
    w.flush()?;
    Ok(())
}

/// Header row followed by numeric rows.
pub fn save_table_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_new(path)?);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
