//! Exchange-rate panel ingestion: parsing, date synchronization and
//! removal of isolated jumps from return series.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Three-letter uppercase currency identifier (ISO 4217 style, metals included).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CurrencyCode([u8; 3]);

impl CurrencyCode {
    /// ISO 4217 "no currency". Marks a panel whose prices are quoted in an
    /// abstract numeraire rather than in a real currency.
    pub const NUMERAIRE: CurrencyCode = CurrencyCode(*b"XXX");

    pub fn new(code: &str) -> Result<Self> {
        let bytes = code.as_bytes();
        if bytes.len() != 3 || !bytes.iter().all(u8::is_ascii_uppercase) {
            return Err(Error::InvalidCode(code.to_string()));
        }
        Ok(CurrencyCode([bytes[0], bytes[1], bytes[2]]))
    }

    pub fn as_str(&self) -> &str {
        // always ASCII by construction
        std::str::from_utf8(&self.0).unwrap()
    }

    pub fn is_numeraire(&self) -> bool {
        *self == Self::NUMERAIRE
    }
}

impl FromStr for CurrencyCode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CurrencyCode::new(s)
    }
}

impl TryFrom<String> for CurrencyCode {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        CurrencyCode::new(&s)
    }
}

impl From<CurrencyCode> for String {
    fn from(c: CurrencyCode) -> String {
        c.as_str().to_string()
    }
}

impl fmt::Display for CurrencyCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for CurrencyCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Liquidity class of a currency, from majors (A*) down to centrally fixed (C).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LiquidityGroup {
    #[serde(rename = "A*", alias = "AStar")]
    AStar,
    A,
    B,
    C,
}

impl LiquidityGroup {
    pub const ALL: [LiquidityGroup; 4] = [
        LiquidityGroup::AStar,
        LiquidityGroup::A,
        LiquidityGroup::B,
        LiquidityGroup::C,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            LiquidityGroup::AStar => "A*",
            LiquidityGroup::A => "A",
            LiquidityGroup::B => "B",
            LiquidityGroup::C => "C",
        }
    }
}

impl fmt::Display for LiquidityGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Assignment of currencies to liquidity groups. A code belongs to at most one group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupConfig {
    members: BTreeMap<LiquidityGroup, Vec<CurrencyCode>>,
    lookup: BTreeMap<CurrencyCode, LiquidityGroup>,
}

const DEFAULT_GROUPS: &str = include_str!("../data/groups.json");

impl GroupConfig {
    pub fn new(members: BTreeMap<LiquidityGroup, Vec<CurrencyCode>>) -> Result<Self> {
        let mut lookup = BTreeMap::new();
        for (group, codes) in &members {
            for code in codes {
                if let Some(prev) = lookup.insert(*code, *group) {
                    return Err(Error::GroupConfig(format!(
                        "{code} assigned to both {prev} and {group}"
                    )));
                }
            }
        }
        Ok(GroupConfig { members, lookup })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let members: BTreeMap<LiquidityGroup, Vec<CurrencyCode>> = serde_json::from_str(text)?;
        Self::new(members)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.members)?)
    }

    /// The shipped four-group assignment of the 60 reference currencies.
    pub fn default_groups() -> Self {
        Self::from_json(DEFAULT_GROUPS).expect("shipped group config is valid")
    }

    pub fn group_of(&self, code: CurrencyCode) -> Option<LiquidityGroup> {
        self.lookup.get(&code).copied()
    }

    pub fn members(&self, group: LiquidityGroup) -> &[CurrencyCode] {
        self.members.get(&group).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All configured codes, in group order then listing order.
    pub fn codes(&self) -> impl Iterator<Item = CurrencyCode> + '_ {
        self.members.values().flatten().copied()
    }
}

/// Date-indexed price matrix, `prices[currency][date]`, in units of the quote
/// currency per unit of each column currency. Cells may be missing until the
/// panel has been synchronized.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePanel {
    quote: CurrencyCode,
    currencies: Vec<CurrencyCode>,
    dates: Vec<NaiveDate>,
    prices: Vec<Vec<Option<f64>>>,
}

impl RatePanel {
    /// Builds a panel, checking ordering, uniqueness and positivity. Dates
    /// must be strictly increasing.
    pub fn new(
        quote: CurrencyCode,
        currencies: Vec<CurrencyCode>,
        dates: Vec<NaiveDate>,
        prices: Vec<Vec<Option<f64>>>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &currencies {
            if !seen.insert(*c) {
                return Err(Error::DuplicateCurrency(*c));
            }
        }
        if seen.contains(&quote) {
            return Err(Error::QuoteIsColumn(quote));
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::DuplicateDate(w[1]));
            }
        }
        if prices.len() != currencies.len() {
            return Err(Error::InvalidParameter(format!(
                "{} price rows for {} currencies",
                prices.len(),
                currencies.len()
            )));
        }
        for (code, row) in currencies.iter().zip(&prices) {
            if row.len() != dates.len() {
                return Err(Error::InvalidParameter(format!(
                    "{code}: {} prices for {} dates",
                    row.len(),
                    dates.len()
                )));
            }
            for (t, p) in row.iter().enumerate() {
                if let Some(v) = *p {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(Error::NonPositivePrice {
                            line: t as u64 + 2,
                            code: *code,
                            value: v,
                        });
                    }
                }
            }
        }
        Ok(RatePanel {
            quote,
            currencies,
            dates,
            prices,
        })
    }

    /// Fully populated panel from dense rows.
    pub fn from_dense(
        quote: CurrencyCode,
        currencies: Vec<CurrencyCode>,
        dates: Vec<NaiveDate>,
        prices: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let prices = prices
            .into_iter()
            .map(|row| row.into_iter().map(Some).collect())
            .collect();
        Self::new(quote, currencies, dates, prices)
    }

    /// Declares the currency the prices are quoted in.
    pub fn with_quote(mut self, quote: CurrencyCode) -> Result<Self> {
        if self.currencies.contains(&quote) {
            return Err(Error::QuoteIsColumn(quote));
        }
        self.quote = quote;
        Ok(self)
    }

    pub fn quote(&self) -> CurrencyCode {
        self.quote
    }

    pub fn currencies(&self) -> &[CurrencyCode] {
        &self.currencies
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn price(&self, currency: usize, date: usize) -> Option<f64> {
        self.prices[currency][date]
    }

    pub fn row(&self, currency: usize) -> &[Option<f64>] {
        &self.prices[currency]
    }

    pub fn index_of(&self, code: CurrencyCode) -> Option<usize> {
        self.currencies.iter().position(|c| *c == code)
    }

    /// Keeps the first `n` currency columns.
    pub fn take_columns(&self, n: usize) -> Result<RatePanel> {
        if n > self.currencies.len() {
            return Err(Error::InvalidParameter(format!(
                "cannot keep {n} of {} columns",
                self.currencies.len()
            )));
        }
        Ok(RatePanel {
            quote: self.quote,
            currencies: self.currencies[..n].to_vec(),
            dates: self.dates.clone(),
            prices: self.prices[..n].to_vec(),
        })
    }

    pub fn is_rectangular(&self) -> bool {
        self.prices.iter().all(|row| row.iter().all(Option::is_some))
    }

    /// Every currency of the market: the columns plus the quote currency when
    /// it is a real currency.
    pub fn market(&self) -> Vec<CurrencyCode> {
        let mut all = self.currencies.clone();
        if !self.quote.is_numeraire() {
            all.push(self.quote);
        }
        all
    }

    /// Dense rows; fails naming the first currency with a gap.
    pub fn dense_rows(&self) -> Result<Vec<Vec<f64>>> {
        self.currencies
            .iter()
            .zip(&self.prices)
            .map(|(code, row)| {
                row.iter()
                    .map(|p| p.ok_or(Error::NotRectangular(*code)))
                    .collect()
            })
            .collect()
    }
}

/// Parses a panel CSV: header `date,CODE1,CODE2,...`, ISO dates, decimal
/// prices, empty cells for missing values. Rows are sorted by date.
pub fn parse_rates<R: Read>(source: R) -> Result<RatePanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let mut records = reader.records();

    let header = match records.next() {
        Some(rec) => rec?,
        None => return Err(Error::MalformedHeader("empty input".into())),
    };
    let first = header.get(0).unwrap_or("");
    if !first.eq_ignore_ascii_case("date") {
        return Err(Error::MalformedHeader(format!(
            "first column must be `date`, found {first:?}"
        )));
    }
    if header.len() < 2 {
        return Err(Error::MalformedHeader("no currency columns".into()));
    }
    let mut currencies = Vec::with_capacity(header.len() - 1);
    let mut seen = HashSet::new();
    for field in header.iter().skip(1) {
        let code = CurrencyCode::new(field)
            .map_err(|_| Error::MalformedHeader(format!("invalid currency code {field:?}")))?;
        if !seen.insert(code) {
            return Err(Error::DuplicateCurrency(code));
        }
        currencies.push(code);
    }

    let width = currencies.len() + 1;
    let mut rows: Vec<(NaiveDate, Vec<Option<f64>>)> = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != width {
            return Err(Error::RaggedRow {
                line,
                expected: width,
                found: rec.len(),
            });
        }
        let raw_date = &rec[0];
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| Error::BadDate {
            line,
            value: raw_date.to_string(),
        })?;
        let mut values = Vec::with_capacity(currencies.len());
        for (code, cell) in currencies.iter().zip(rec.iter().skip(1)) {
            if cell.is_empty() {
                values.push(None);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::BadPrice {
                line,
                code: *code,
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::BadPrice {
                    line,
                    code: *code,
                    value: cell.to_string(),
                });
            }
            if v <= 0.0 {
                return Err(Error::NonPositivePrice {
                    line,
                    code: *code,
                    value: v,
                });
            }
            values.push(Some(v));
        }
        rows.push((date, values));
    }

    rows.sort_by_key(|(d, _)| *d);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::DuplicateDate(w[0].0));
        }
    }

    let dates = rows.iter().map(|(d, _)| *d).collect();
    let mut prices = vec![Vec::with_capacity(rows.len()); currencies.len()];
    for (_, values) in rows {
        for (col, v) in prices.iter_mut().zip(values) {
            col.push(v);
        }
    }
    RatePanel::new(CurrencyCode::NUMERAIRE, currencies, dates, prices)
}

/// Writes a panel in the format read by [`parse_rates`]. Prices use the
/// shortest representation that parses back to the same `f64`.
pub fn write_rates<W: Write>(panel: &RatePanel, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["date".to_string()];
    header.extend(panel.currencies.iter().map(|c| c.to_string()));
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for (t, date) in panel.dates.iter().enumerate() {
        record.clear();
        record.push(date.format("%Y-%m-%d").to_string());
        for row in &panel.prices {
            record.push(row[t].map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Keeps only the dates on which every currency is quoted.
pub fn synchronize(panel: &RatePanel) -> Result<RatePanel> {
    let keep: Vec<usize> = (0..panel.dates.len())
        .filter(|&t| panel.prices.iter().all(|row| row[t].is_some()))
        .collect();
    if keep.len() < 2 {
        return Err(Error::TooFewDates {
            needed: 2,
            found: keep.len(),
        });
    }
    let dates = keep.iter().map(|&t| panel.dates[t]).collect();
    let prices = panel
        .prices
        .iter()
        .map(|row| keep.iter().map(|&t| row[t]).collect())
        .collect();
    Ok(RatePanel {
        quote: panel.quote,
        currencies: panel.currencies.clone(),
        dates,
        prices,
    })
}

/// Result of cleaning one return series.
#[derive(Debug, Clone, PartialEq)]
pub struct Despiked {
    pub cleaned: Vec<f64>,
    pub removed: usize,
    /// Sample standard deviation used for the cut.
    pub sigma: f64,
    /// Set when the series has zero variance; such a series is passed through unchanged.
    pub zero_variance: bool,
}

impl Despiked {
    pub fn removed_fraction(&self) -> f64 {
        if self.cleaned.is_empty() {
            0.0
        } else {
            self.removed as f64 / self.cleaned.len() as f64
        }
    }
}

/// Sample standard deviation (divisor n - 1).
pub fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Replaces every return with `|g| > threshold * sigma` by zero, where sigma
/// is the sample standard deviation of the untouched series.
pub fn despike(returns: &[f64], threshold: f64) -> Result<Despiked> {
    if returns.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            found: returns.len(),
        });
    }
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "despike threshold must be positive, got {threshold}"
        )));
    }
    let sigma = sample_std(returns);
    if sigma == 0.0 {
        return Ok(Despiked {
            cleaned: returns.to_vec(),
            removed: 0,
            sigma,
            zero_variance: true,
        });
    }
    Ok(despike_with_sigma(returns, sigma, threshold))
}

/// Cut at a fixed, externally supplied sigma.
pub fn despike_with_sigma(returns: &[f64], sigma: f64, threshold: f64) -> Despiked {
    let limit = threshold * sigma;
    let mut removed = 0;
    let cleaned = returns
        .iter()
        .map(|&g| {
            if g.abs() > limit {
                removed += 1;
                0.0
            } else {
                g
            }
        })
        .collect();
    Despiked {
        cleaned,
        removed,
        sigma,
        zero_variance: false,
    }
}

/// Codes that appear in the panel but not in the group config.
pub fn unassigned(panel: &RatePanel, groups: &GroupConfig) -> BTreeSet<CurrencyCode> {
    panel
        .market()
        .into_iter()
        .filter(|c| groups.group_of(*c).is_none())
        .collect()
}
