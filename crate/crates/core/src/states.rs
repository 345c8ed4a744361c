//! Pure states and density matrices, with their file formats.
//!
//! JSON matrices are `{"N": n, "entries": [[re, im], ...]}` in row-major
//! order; pure states are `{"amplitudes": [[re, im], ...]}`. CSV matrices
//! have one row per line, written `re,im,re,im,...`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NORM_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: Vec<Complex64>,
}

impl PureState {
    /// Requires unit norm within `1e-12`.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if amplitudes.is_empty() || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidParameter(format!("state norm^2 is {norm}, expected 1")));
        }
        Ok(PureState { amplitudes })
    }

    pub fn normalized(mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if amplitudes.is_empty() || !norm.is_finite() || norm <= 0.0 {
            return Err(Error::InvalidParameter("cannot normalise a zero vector".into()));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Ok(PureState { amplitudes })
    }

    pub fn basis(n: usize, j: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n];
        amplitudes[j] = Complex64::new(1.0, 0.0);
        PureState { amplitudes }
    }

    pub fn uniform(n: usize) -> Self {
        PureState {
            amplitudes: vec![Complex64::new(1.0 / (n as f64).sqrt(), 0.0); n],
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Complex64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    pub fn density(&self) -> DensityMatrix {
        let n = self.dim();
        let m = DMatrix::from_fn(n, n, |i, j| self.amplitudes[i] * self.amplitudes[j].conj());
        DensityMatrix { m }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct File {
            amplitudes: Vec<[f64; 2]>,
        }
        let file: File = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        PureState::new(file.amplitudes.iter().map(|p| Complex64::new(p[0], p[1])).collect())
    }

    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.amplitudes.iter().map(|a| [a.re, a.im]).collect()
    }
}

pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: DMatrix<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    #[serde(rename = "N")]
    n: usize,
    entries: Vec<[f64; 2]>,
}

impl DensityMatrix {
    /// Validates Hermiticity and unit trace (`1e-12`) and positivity
    /// (eigenvalues `>= -1e-10`).
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        let n = m.nrows();
        if n == 0 || m.ncols() != n {
            return Err(Error::InvalidDensity("matrix must be square and non-empty".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if (m[(i, j)] - m[(j, i)].conj()).norm() > NORM_TOL {
                    return Err(Error::InvalidDensity(format!("not Hermitian at ({i},{j})")));
                }
            }
        }
        let trace: Complex64 = (0..n).map(|i| m[(i, i)]).sum();
        if (trace - 1.0).norm() > NORM_TOL {
            return Err(Error::InvalidDensity(format!("trace is {trace}")));
        }
        let min = SymmetricEigen::new(m.clone()).eigenvalues.min();
        if min < -PSD_TOL {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min}")));
        }
        Ok(DensityMatrix { m })
    }

    pub fn maximally_mixed(n: usize) -> Self {
        DensityMatrix {
            m: DMatrix::from_diagonal_element(n, n, Complex64::new(1.0 / n as f64, 0.0)),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    /// `<phi|rho|phi>`, real for Hermitian `rho`.
    pub fn expectation(&self, phi: &[Complex64]) -> f64 {
        hermitian_form(&self.m, phi)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: MatrixFile = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        if file.entries.len() != file.n * file.n {
            return Err(Error::Parse(format!(
                "expected {} entries, found {}",
                file.n * file.n,
                file.entries.len()
            )));
        }
        DensityMatrix::new(DMatrix::from_row_iterator(
            file.n,
            file.n,
            file.entries.iter().map(|p| Complex64::new(p[0], p[1])),
        ))
    }

    pub fn from_csv_str(s: &str) -> Result<Self> {
        let rows: Vec<Vec<f64>> = s
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.split(',')
                    .map(|x| x.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != 2 * n) {
            return Err(Error::Parse(format!("each of the {n} rows needs {} numbers", 2 * n)));
        }
        DensityMatrix::new(DMatrix::from_fn(n, n, |i, j| {
            Complex64::new(rows[i][2 * j], rows[i][2 * j + 1])
        }))
    }

    /// Reads JSON, falling back to CSV, or a pure state file.
    pub fn parse(s: &str) -> Result<Self> {
        if s.trim_start().starts_with('{') {
            if s.contains("\"amplitudes\"") {
                return Ok(PureState::from_json_str(s)?.density());
            }
            DensityMatrix::from_json_str(s)
        } else {
            DensityMatrix::from_csv_str(s)
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let n = self.dim();
        let entries = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| [self.m[(i, j)].re, self.m[(i, j)].im])
            .collect();
        serde_json::to_value(MatrixFile { n, entries }).expect("plain data serialises")
    }
}

pub fn hermitian_form(m: &DMatrix<Complex64>, phi: &[Complex64]) -> f64 {
    let n = phi.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let mut row = Complex64::new(0.0, 0.0);
        for j in 0..n {
            row += m[(i, j)] * phi[j];
        }
        acc += phi[i].conj() * row;
    }
    acc.re
}

/// Frobenius norm `sqrt(sum |a_kl|^2)`.
pub fn frobenius(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
