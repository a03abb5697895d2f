use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Eigenvalues of a state matrix with their modal quantities, sorted by
/// decreasing real part. Conjugate pairs are adjacent, positive imaginary
/// part first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenReport {
    pub eigenvalues: Vec<Complex64>,
    /// `-re / |λ|` per eigenvalue; 1 for a zero eigenvalue.
    pub damping_ratios: Vec<f64>,
    /// `|im| / 2π` per eigenvalue, Hz.
    pub frequencies_hz: Vec<f64>,
    /// Least-damped oscillatory pair, positive imaginary part.
    pub dominant: Option<Complex64>,
}

impl EigenReport {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Oscillatory eigenvalues with positive imaginary part.
    pub fn oscillatory(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.eigenvalues.iter().copied().filter(|l| l.im > 0.0)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["re", "im", "freq_Hz", "damping_ratio"])?;
        for ((l, z), f) in self.eigenvalues.iter().zip(&self.damping_ratios).zip(&self.frequencies_hz) {
            w.write_record([l.re, l.im, *f, *z].map(|v| format!("{v:?}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// Imaginary parts below this fraction of the spectral scale count as real.
const REAL_TOLERANCE: f64 = 1e-9;

pub fn eigenmodes(a: &DMatrix<f64>) -> Result<EigenReport> {
    if !a.is_square() {
        return Err(Error::Contract(format!("state matrix is {}x{}, not square", a.nrows(), a.ncols())));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("state matrix has non-finite entries".into()));
    }
    let n = a.nrows();
    let raw = faer::Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)])
        .eigenvalues()
        .map_err(|e| Error::Analysis(format!("eigen-decomposition failed: {e:?}")))?;
    let scale = raw.iter().fold(1.0_f64, |m, l| m.max(l.norm()));
    let mut eigenvalues: Vec<Complex64> = raw
        .iter()
        .map(|l| {
            if l.im.abs() <= REAL_TOLERANCE * scale {
                Complex64::new(l.re, 0.0)
            } else {
                Complex64::new(l.re, l.im)
            }
        })
        .collect();
    eigenvalues.sort_by(|p, q| q.re.total_cmp(&p.re).then(q.im.total_cmp(&p.im)));
    let damping_ratios = eigenvalues
        .iter()
        .map(|l| if l.norm() == 0.0 { 1.0 } else { -l.re / l.norm() })
        .collect();
    let frequencies_hz = eigenvalues.iter().map(|l| l.im.abs() / std::f64::consts::TAU).collect();
    let dominant = eigenvalues.iter().copied().find(|l| l.im > 0.0);
    Ok(EigenReport {
        eigenvalues,
        damping_ratios,
        frequencies_hz,
        dominant,
    })
}

/// `|λ - target| / |target|`.
pub fn relative_distance(value: Complex64, target: Complex64) -> f64 {
    (value - target).norm() / target.norm()
}
