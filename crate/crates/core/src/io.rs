//! Flat-file formats. Floats are written in shortest round-trip form, so
//! every writer/reader pair is lossless.
//!
//! - spectra CSV: `class,n,s,sigma2,seed,rep,index,value`, one row per reduced eigenvalue
//! - matrix JSON: `{label, n, s, entries: [[re, im], ...]}` in row-major order
//! - curve CSV: `x,pdf,cdf`
//! - grid measure CSV: `x_lo,x_hi,mass`

use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::ensembles::ClassLabel;
use crate::equilibrium::DensityCurve;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::ratefn::GridMeasure;
use crate::sampler::SampleBatch;
use crate::structure::{validate, StructuredMatrix};

pub const SPECTRA_HEADER: &str = "class,n,s,sigma2,seed,rep,index,value";
pub const CURVE_HEADER: &str = "x,pdf,cdf";
pub const GRID_HEADER: &str = "x_lo,x_hi,mass";

fn io_err(e: std::io::Error) -> Error {
    Error::Parse(format!("i/o: {e}"))
}

fn num<T: std::str::FromStr>(field: &str, what: &str, line: usize) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad {what} `{field}`")))
}

fn data_lines<R: BufRead>(reader: R, header: &str) -> Result<Vec<(usize, String)>> {
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim() == header => {}
        Some((_, Ok(h))) => return Err(Error::Parse(format!("expected header `{header}`, got `{h}`"))),
        Some((_, Err(e))) => return Err(io_err(e)),
        None => return Err(Error::Parse("empty file".into())),
    }
    let mut out = Vec::new();
    for (i, l) in lines {
        let l = l.map_err(io_err)?;
        if !l.trim().is_empty() {
            out.push((i + 1, l));
        }
    }
    Ok(out)
}

fn split<const K: usize>(line: &str, no: usize) -> Result<[&str; K]> {
    let parts: Vec<&str> = line.split(',').collect();
    parts
        .try_into()
        .map_err(|p: Vec<&str>| Error::Parse(format!("line {no}: expected {K} fields, got {}", p.len())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub class: ClassLabel,
    pub n: usize,
    pub s: Option<usize>,
    pub sigma2: f64,
    pub seed: u64,
    pub rep: usize,
    pub index: usize,
    pub value: f64,
}

/// Rows for a batch and its reduced spectra (in replicate order).
pub fn spectrum_rows(batch: &SampleBatch, reduced: &[Vec<f64>]) -> Vec<SpectrumRow> {
    let e = &batch.ensemble;
    reduced
        .iter()
        .enumerate()
        .flat_map(|(rep, values)| {
            values.iter().enumerate().map(move |(index, &value)| SpectrumRow {
                class: e.label(),
                n: e.n,
                s: e.s,
                sigma2: e.sigma2,
                seed: batch.master_seed,
                rep,
                index,
                value,
            })
        })
        .collect()
}

pub fn write_spectra_csv<W: Write>(mut w: W, rows: &[SpectrumRow]) -> Result<()> {
    writeln!(w, "{SPECTRA_HEADER}").map_err(io_err)?;
    for r in rows {
        let s = r.s.map(|s| s.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{:?},{},{},{},{:?}",
            r.class, r.n, s, r.sigma2, r.seed, r.rep, r.index, r.value
        )
        .map_err(io_err)?;
    }
    Ok(())
}

pub fn read_spectra_csv<R: BufRead>(r: R) -> Result<Vec<SpectrumRow>> {
    data_lines(r, SPECTRA_HEADER)?
        .into_iter()
        .map(|(no, l)| {
            let [class, n, s, sigma2, seed, rep, index, value] = split::<8>(&l, no)?;
            Ok(SpectrumRow {
                class: class.parse()?,
                n: num(n, "n", no)?,
                s: if s.trim().is_empty() { None } else { Some(num(s, "s", no)?) },
                sigma2: num(sigma2, "sigma2", no)?,
                seed: num(seed, "seed", no)?,
                rep: num(rep, "rep", no)?,
                index: num(index, "index", no)?,
                value: num(value, "value", no)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MatrixJson {
    label: ClassLabel,
    n: usize,
    s: Option<usize>,
    entries: Vec<[f64; 2]>,
}

impl From<&StructuredMatrix> for MatrixJson {
    fn from(m: &StructuredMatrix) -> Self {
        MatrixJson {
            label: m.label,
            n: m.n,
            s: m.s,
            entries: m.entries.as_slice().iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

pub fn matrix_to_json(m: &StructuredMatrix) -> Result<String> {
    serde_json::to_string(&MatrixJson::from(m)).map_err(|e| Error::Parse(e.to_string()))
}

pub fn matrices_to_json(ms: &[StructuredMatrix]) -> Result<String> {
    let v: Vec<MatrixJson> = ms.iter().map(MatrixJson::from).collect();
    serde_json::to_string_pretty(&v).map_err(|e| Error::Parse(e.to_string()))
}

fn from_json_matrix(j: MatrixJson) -> Result<StructuredMatrix> {
    let dim = j.label.spec().ambient_dim(j.n);
    let data = j.entries.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
    if j.entries.len() != dim * dim {
        return Err(Error::Parse(format!(
            "{} entries for a {dim}x{dim} matrix",
            j.entries.len()
        )));
    }
    let m = StructuredMatrix::from_entries(j.label, j.n, j.s, CMatrix::from_row_major(dim, data)?);
    validate(&m).map_err(Error::StructureViolation)?;
    Ok(m)
}

pub fn matrix_from_json(s: &str) -> Result<StructuredMatrix> {
    from_json_matrix(serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?)
}

pub fn matrices_from_json(s: &str) -> Result<Vec<StructuredMatrix>> {
    let v: Vec<MatrixJson> = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
    v.into_iter().map(from_json_matrix).collect()
}

pub fn write_curve_csv<W: Write>(mut w: W, curve: &DensityCurve, m: usize) -> Result<()> {
    writeln!(w, "{CURVE_HEADER}").map_err(io_err)?;
    for (x, pdf, cdf) in curve.grid(m) {
        writeln!(w, "{x:?},{pdf:?},{cdf:?}").map_err(io_err)?;
    }
    Ok(())
}

pub fn read_curve_csv<R: BufRead>(r: R) -> Result<Vec<(f64, f64, f64)>> {
    data_lines(r, CURVE_HEADER)?
        .into_iter()
        .map(|(no, l)| {
            let [x, pdf, cdf] = split::<3>(&l, no)?;
            Ok((num(x, "x", no)?, num(pdf, "pdf", no)?, num(cdf, "cdf", no)?))
        })
        .collect()
}

pub fn write_grid_csv<W: Write>(mut w: W, mu: &GridMeasure) -> Result<()> {
    writeln!(w, "{GRID_HEADER}").map_err(io_err)?;
    for (k, m) in mu.masses.iter().enumerate() {
        writeln!(w, "{:?},{:?},{m:?}", mu.edge(k), mu.edge(k + 1)).map_err(io_err)?;
    }
    Ok(())
}

/// Reads a grid measure; cells must be contiguous and of equal width.
pub fn read_grid_csv<R: BufRead>(r: R) -> Result<GridMeasure> {
    let rows: Vec<(f64, f64, f64)> = data_lines(r, GRID_HEADER)?
        .into_iter()
        .map(|(no, l)| {
            let [a, b, m] = split::<3>(&l, no)?;
            Ok((num(a, "x_lo", no)?, num(b, "x_hi", no)?, num(m, "mass", no)?))
        })
        .collect::<Result<_>>()?;
    let (Some(first), Some(last)) = (rows.first(), rows.last()) else {
        return Err(Error::EmptyInput);
    };
    let (lo, hi) = (first.0, last.1);
    let h = (hi - lo) / rows.len() as f64;
    let tol = 1e-9 * h.abs().max(hi.abs()).max(lo.abs()).max(1.0);
    for (k, row) in rows.iter().enumerate() {
        if (row.0 - (lo + k as f64 * h)).abs() > tol || (row.1 - row.0 - h).abs() > tol {
            return Err(Error::Parse(format!("cell {k} does not lie on a uniform grid over [{lo}, {hi}]")));
        }
    }
    let masses: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let total: f64 = masses.iter().sum();
    if (total - 1.0).abs() <= 1e-12 && masses.iter().all(|m| *m >= 0.0) && lo < hi {
        Ok(GridMeasure { lo, hi, masses })
    } else {
        GridMeasure::new(lo, hi, masses)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))
}

pub fn from_json<T: DeserializeOwned>(s: &str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::make_ensemble;
    use crate::equilibrium::{equilibrium_for, laguerre_minimizer};
    use crate::experiments::{convergence_experiment, SRule};
    use crate::ratefn::grid_from_curve;
    use crate::sampler::sample;
    use crate::spectra::batch_reduced;

    #[test]
    fn spectra_round_trip() {
        for (label, n, s) in [(ClassLabel::AI, 2, None), (ClassLabel::BDI, 5, Some(2))] {
            let e = make_ensemble(label, n, s, 0.5).unwrap();
            let batch = sample(&e, 1, 3).unwrap();
            let rows = spectrum_rows(&batch, &batch_reduced(&batch).unwrap());
            assert_eq!(rows.len(), 3 * e.p());
            let mut buf = Vec::new();
            write_spectra_csv(&mut buf, &rows).unwrap();
            assert_eq!(read_spectra_csv(buf.as_slice()).unwrap(), rows);
        }
    }

    #[test]
    fn matrix_round_trip() {
        for label in ClassLabel::ALL {
            let (n, s) = match label {
                ClassLabel::DIIIOdd => (3, None),
                l if l.is_chiral() => (5, Some(2)),
                _ => (4, None),
            };
            let e = make_ensemble(label, n, s, 1.0).unwrap();
            let batch = sample(&e, 7, 2).unwrap();
            let one = matrix_to_json(&batch.matrices[0]).unwrap();
            assert_eq!(matrix_from_json(&one).unwrap(), batch.matrices[0]);
            let all = matrices_to_json(&batch.matrices).unwrap();
            assert_eq!(matrices_from_json(&all).unwrap(), batch.matrices);
        }
        let bad = r#"{"label":"AI","n":1,"s":null,"entries":[[0.0,1.0]]}"#;
        assert!(matches!(matrix_from_json(bad), Err(Error::StructureViolation(_))));
    }

    #[test]
    fn curve_round_trip_includes_singular_endpoint() {
        let c = laguerre_minimizer(0.0, 1.0).unwrap();
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &c, 64).unwrap();
        let back = read_curve_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 64);
        assert_eq!(back[0].1, f64::INFINITY);
        assert_eq!(back, c.grid(64));
    }

    #[test]
    fn grid_round_trip() {
        let e = make_ensemble(ClassLabel::D, 6, None, 1.0).unwrap();
        let mu = grid_from_curve(&equilibrium_for(&e).unwrap(), 100).unwrap();
        let mut buf = Vec::new();
        write_grid_csv(&mut buf, &mu).unwrap();
        assert_eq!(read_grid_csv(buf.as_slice()).unwrap(), mu);
        let ragged = "x_lo,x_hi,mass\n0,1,0.5\n1,3,0.5\n";
        assert!(read_grid_csv(ragged.as_bytes()).is_err());
        assert!(read_grid_csv("x,pdf,cdf\n".as_bytes()).is_err());
    }

    #[test]
    fn report_json_round_trip() {
        let r = convergence_experiment(ClassLabel::CI, 1.0, &[4, 8], SRule::NotChiral, 3, 5, true).unwrap();
        let back: crate::experiments::ConvergenceReport = from_json(&to_json(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
