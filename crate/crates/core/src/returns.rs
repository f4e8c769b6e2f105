//! Log-returns, re-expression in another base currency, and normalization.

use std::io::Write;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::ingest::{CurrencyCode, RatePanel};

/// Log-returns of every column of a rate panel, still quoted in the panel's
/// own quote currency.
#[derive(Debug, Clone, PartialEq)]
pub struct RawReturns {
    quote: CurrencyCode,
    currencies: Vec<CurrencyCode>,
    /// End date of each return interval.
    dates: Vec<NaiveDate>,
    values: Vec<Vec<f64>>,
    lag: usize,
}

impl RawReturns {
    pub fn quote(&self) -> CurrencyCode {
        self.quote
    }

    pub fn currencies(&self) -> &[CurrencyCode] {
        &self.currencies
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn row(&self, currency: usize) -> &[f64] {
        &self.values[currency]
    }

    pub fn rows_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.values
    }

    pub fn index_of(&self, code: CurrencyCode) -> Option<usize> {
        self.currencies.iter().position(|c| *c == code)
    }

    /// Valid rebase targets: the columns, plus the quote when it is a real currency.
    pub fn targets(&self) -> Vec<CurrencyCode> {
        let mut t = self.currencies.clone();
        if !self.quote.is_numeraire() {
            t.push(self.quote);
        }
        t
    }
}

/// `G(t) = ln x(t + lag) - ln x(t)` for every column of a rectangular panel.
pub fn log_returns(panel: &RatePanel, lag: usize) -> Result<RawReturns> {
    if lag == 0 {
        return Err(Error::InvalidParameter("return lag must be positive".into()));
    }
    let n_dates = panel.dates().len();
    if n_dates < lag + 1 {
        return Err(Error::TooFewDates {
            needed: lag + 1,
            found: n_dates,
        });
    }
    let rows = panel.dense_rows()?;
    let values = rows
        .iter()
        .map(|row| {
            let logs: Vec<f64> = row.iter().map(|x| x.ln()).collect();
            (lag..n_dates).map(|t| logs[t] - logs[t - lag]).collect()
        })
        .collect();
    Ok(RawReturns {
        quote: panel.quote(),
        currencies: panel.currencies().to_vec(),
        dates: panel.dates()[lag..].to_vec(),
        values,
        lag,
    })
}

/// Return series of all currencies but one, expressed in that one (the base).
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    base: CurrencyCode,
    currencies: Vec<CurrencyCode>,
    dates: Vec<NaiveDate>,
    values: Vec<Vec<f64>>,
    normalized: bool,
}

impl ReturnPanel {
    /// Unnormalized panel from explicit rows. Every row must have one value per date.
    pub fn from_rows(
        base: CurrencyCode,
        currencies: Vec<CurrencyCode>,
        dates: Vec<NaiveDate>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if currencies.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "{} rows for {} currencies",
                values.len(),
                currencies.len()
            )));
        }
        if currencies.contains(&base) {
            return Err(Error::InvalidParameter(format!(
                "base {base} listed among its own series"
            )));
        }
        if let Some((c, _)) = currencies
            .iter()
            .zip(&values)
            .find(|(_, row)| row.len() != dates.len())
        {
            return Err(Error::InvalidParameter(format!(
                "{c}: row length differs from {} dates",
                dates.len()
            )));
        }
        Ok(ReturnPanel {
            base,
            currencies,
            dates,
            values,
            normalized: false,
        })
    }

    pub fn base(&self) -> CurrencyCode {
        self.base
    }

    pub fn currencies(&self) -> &[CurrencyCode] {
        &self.currencies
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn row(&self, currency: usize) -> &[f64] {
        &self.values[currency]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn index_of(&self, code: CurrencyCode) -> Option<usize> {
        self.currencies.iter().position(|c| *c == code)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Number of series (N).
    pub fn series(&self) -> usize {
        self.currencies.len()
    }

    /// Number of time points (T).
    pub fn samples(&self) -> usize {
        self.dates.len()
    }

    /// Drops the listed currencies, keeping the remaining order.
    pub fn without(&self, drop: &[CurrencyCode]) -> ReturnPanel {
        let (currencies, values) = self
            .currencies
            .iter()
            .zip(&self.values)
            .filter(|(c, _)| !drop.contains(c))
            .map(|(c, v)| (*c, v.clone()))
            .unzip();
        ReturnPanel {
            base: self.base,
            currencies,
            dates: self.dates.clone(),
            values,
            normalized: self.normalized,
        }
    }
}

/// Re-expresses raw returns in the currency `target` using
/// `G_A^X = G_A^R - G_X^R`. The quote currency R enters as the series
/// `-G_X^R` unless it is the abstract numeraire, which is not a market node.
pub fn rebase(raw: &RawReturns, target: CurrencyCode) -> Result<ReturnPanel> {
    if target == raw.quote {
        return Ok(ReturnPanel {
            base: target,
            currencies: raw.currencies.clone(),
            dates: raw.dates.clone(),
            values: raw.values.clone(),
            normalized: false,
        });
    }
    let x = raw.index_of(target).ok_or(Error::UnknownCurrency(target))?;
    let gx = &raw.values[x];
    let mut currencies = Vec::with_capacity(raw.currencies.len());
    let mut values = Vec::with_capacity(raw.currencies.len());
    for (i, (code, row)) in raw.currencies.iter().zip(&raw.values).enumerate() {
        if i == x {
            continue;
        }
        currencies.push(*code);
        values.push(row.iter().zip(gx).map(|(a, b)| a - b).collect());
    }
    if !raw.quote.is_numeraire() {
        currencies.push(raw.quote);
        values.push(gx.iter().map(|g| -g).collect());
    }
    Ok(ReturnPanel {
        base: target,
        currencies,
        dates: raw.dates.clone(),
        values,
        normalized: false,
    })
}

/// Shifts and scales each row to zero mean and unit variance, with the
/// variance taken over T (not T - 1) so that correlation diagonals are exactly one.
pub fn normalize(panel: &ReturnPanel) -> Result<ReturnPanel> {
    let t = panel.samples();
    if t == 0 {
        return Err(Error::TooFewDates {
            needed: 1,
            found: 0,
        });
    }
    let mut values = Vec::with_capacity(panel.values.len());
    for (code, row) in panel.currencies.iter().zip(&panel.values) {
        let mean = row.iter().sum::<f64>() / t as f64;
        let centered: Vec<f64> = row.iter().map(|g| g - mean).collect();
        let var = centered.iter().map(|g| g * g).sum::<f64>() / t as f64;
        let scale = row.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if !(var > 0.0) || var.sqrt() <= scale * 1e-13 {
            return Err(Error::ZeroVariance(*code));
        }
        let sd = var.sqrt();
        values.push(centered.iter().map(|g| g / sd).collect());
    }
    Ok(ReturnPanel {
        base: panel.base,
        currencies: panel.currencies.clone(),
        dates: panel.dates.clone(),
        values,
        normalized: true,
    })
}

/// Writes a panel as CSV, one row per currency: `currency,<date1>,<date2>,...`.
pub fn write_returns<W: Write>(panel: &ReturnPanel, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["currency".to_string()];
    header.extend(panel.dates.iter().map(|d| d.format("%Y-%m-%d").to_string()));
    w.write_record(&header)?;
    for (code, row) in panel.currencies.iter().zip(&panel.values) {
        let mut rec = vec![code.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
