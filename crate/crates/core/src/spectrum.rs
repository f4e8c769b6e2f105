//! Correlation matrices of normalized returns and their eigenspectra.

use std::io::Write;

use crate::error::{Error, Result};
use crate::ingest::CurrencyCode;
use crate::linalg::jacobi_eigen;
use crate::returns::ReturnPanel;

/// Symmetry tolerance for matrices handed to the eigensolver.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Default residual tolerance for eigenpairs (scaled by N).
pub const EIGEN_TOL: f64 = 1e-10;
/// Eigenvalues below this count as zero modes.
pub const ZERO_MODE_THRESHOLD: f64 = 1e-8;

/// `C = (1/T) M M^T` over N normalized series of length T.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    base: CurrencyCode,
    currencies: Vec<CurrencyCode>,
    samples: usize,
    entries: Vec<f64>,
}

impl CorrelationMatrix {
    /// Wraps an explicit row-major matrix, e.g. for analytic targets.
    pub fn from_entries(
        base: CurrencyCode,
        currencies: Vec<CurrencyCode>,
        samples: usize,
        entries: Vec<f64>,
    ) -> Result<Self> {
        let n = currencies.len();
        if entries.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "{} entries for a {n} x {n} matrix",
                entries.len()
            )));
        }
        Ok(CorrelationMatrix {
            base,
            currencies,
            samples,
            entries,
        })
    }

    pub fn base(&self) -> CurrencyCode {
        self.base
    }

    pub fn currencies(&self) -> &[CurrencyCode] {
        &self.currencies
    }

    pub fn size(&self) -> usize {
        self.currencies.len()
    }

    /// Length T of the series the matrix was estimated from.
    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size() + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..self.size()).map(|i| self.get(i, i)).sum()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.size();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Builds the correlation matrix of a normalized panel.
pub fn correlation_matrix(panel: &ReturnPanel) -> Result<CorrelationMatrix> {
    if !panel.is_normalized() {
        return Err(Error::NotNormalized(panel.base()));
    }
    let t = panel.samples();
    if t < 2 {
        return Err(Error::TooFewDates {
            needed: 2,
            found: t,
        });
    }
    let n = panel.series();
    let rows = panel.rows();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let dot: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
            let c = dot / t as f64;
            entries[i * n + j] = c;
            entries[j * n + i] = c;
        }
    }
    Ok(CorrelationMatrix {
        base: panel.base(),
        currencies: panel.currencies().to_vec(),
        samples: t,
        entries,
    })
}

/// Sorted eigenvalues of a correlation matrix and the markers derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub base: CurrencyCode,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Column-wise eigenvectors matching `eigenvalues`.
    pub eigenvectors: Vec<f64>,
    pub lambda_max: f64,
    /// Second largest eigenvalue; absent for a 1 x 1 matrix.
    pub lambda_second: Option<f64>,
    pub zero_mode_count: usize,
    /// Upper edge of the random (Wishart) spectrum for the same T and N.
    pub lambda_rm: f64,
    /// T / N.
    pub q: f64,
    pub max_residual: f64,
}

impl Spectrum {
    pub fn size(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        let n = self.size();
        (0..n).map(|i| self.eigenvectors[i * n + k]).collect()
    }
}

/// Full eigendecomposition; each pair satisfies `||Cv - lambda v|| <= tol * N`.
pub fn eigen(c: &CorrelationMatrix, tol: f64) -> Result<Spectrum> {
    let n = c.size();
    if n == 0 {
        return Err(Error::InvalidParameter("empty correlation matrix".into()));
    }
    let asym = c.max_asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::Asymmetric(asym));
    }
    let decomposition = jacobi_eigen(c.entries(), n)?;
    let max_residual = decomposition.max_residual(c.entries());
    if max_residual > tol * n as f64 {
        return Err(Error::NoConvergence {
            sweeps: decomposition.sweeps,
            residual: max_residual,
        });
    }
    let values = decomposition.values;
    let zero_mode_count = count_below(&values, ZERO_MODE_THRESHOLD);
    Ok(Spectrum {
        base: c.base(),
        lambda_max: values[0],
        lambda_second: values.get(1).copied(),
        zero_mode_count,
        lambda_rm: rmt_bound(c.samples(), n),
        q: c.samples() as f64 / n as f64,
        eigenvalues: values,
        eigenvectors: decomposition.vectors,
        max_residual,
    })
}

/// Largest eigenvalue expected for a purely random T x N matrix:
/// `1 + 1/Q + 2/sqrt(Q)` with `Q = T/N`.
pub fn rmt_bound(samples: usize, series: usize) -> f64 {
    assert!(samples > 0 && series > 0, "T and N must be positive");
    let r = series as f64 / samples as f64;
    1.0 + r + 2.0 * r.sqrt()
}

/// Number of eigenvalues below `threshold`.
pub fn zero_modes(spectrum: &Spectrum, threshold: f64) -> usize {
    count_below(&spectrum.eigenvalues, threshold)
}

fn count_below(values: &[f64], threshold: f64) -> usize {
    values.iter().filter(|&&v| v < threshold).count()
}

/// Spectrum CSV: `base,rank,eigenvalue` rows (rank 1 = largest), followed by
/// summary rows whose rank column names the quantity.
pub fn write_spectrum<W: Write>(spectrum: &Spectrum, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["base", "rank", "eigenvalue"])?;
    let base = spectrum.base.to_string();
    for (k, v) in spectrum.eigenvalues.iter().enumerate() {
        w.write_record([base.as_str(), &(k + 1).to_string(), &format!("{v:.12e}")])?;
    }
    let second = spectrum
        .lambda_second
        .map(|v| format!("{v:.12e}"))
        .unwrap_or_default();
    w.write_record([
        base.as_str(),
        "lambda_max",
        &format!("{:.12e}", spectrum.lambda_max),
    ])?;
    w.write_record([base.as_str(), "lambda_second", &second])?;
    w.write_record([
        base.as_str(),
        "zero_mode_count",
        &spectrum.zero_mode_count.to_string(),
    ])?;
    w.write_record([
        base.as_str(),
        "lambda_rm",
        &format!("{:.12e}", spectrum.lambda_rm),
    ])?;
    w.flush()?;
    Ok(())
}
