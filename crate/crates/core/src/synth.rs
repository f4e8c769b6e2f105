//! Synthetic rate panels with known correlation structure, and the degree
//! sequence of the deterministic hierarchical network.
//!
//! All randomness comes from ChaCha8 seeded with `seed_from_u64`. Uniforms
//! take the top 53 bits of each `u64` output, and normals are produced in
//! pairs by the Box-Muller transform, so a panel is fully determined by its
//! parameters and seed.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::{CurrencyCode, GroupConfig, RatePanel};

/// Daily log-return scale of generated series.
pub const DAILY_VOL: f64 = 0.006;
/// Default geometric decay of factor loadings per hierarchy level.
pub const DEFAULT_DECAY: f64 = 0.5;

/// Seeded standard-normal stream (ChaCha8 + Box-Muller).
pub struct NormalStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        NormalStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let phi = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * phi.sin());
        r * phi.cos()
    }
}

/// `n` distinct codes: the 60 reference currencies first, then `QAA`, `QAB`, ...
pub fn synthetic_codes(n: usize) -> Result<Vec<CurrencyCode>> {
    let mut codes: Vec<CurrencyCode> = GroupConfig::default_groups().codes().take(n).collect();
    let mut extra = (b'A'..=b'Z').flat_map(|a| (b'A'..=b'Z').map(move |b| [b'Q', a, b]));
    while codes.len() < n {
        match extra.next() {
            Some(bytes) => codes.push(CurrencyCode::new(std::str::from_utf8(&bytes).unwrap())?),
            None => {
                return Err(Error::InvalidParameter(format!(
                    "cannot name {n} synthetic currencies"
                )))
            }
        }
    }
    Ok(codes)
}

/// `count` consecutive weekdays starting at 1998-12-01.
pub fn trading_days(count: usize) -> Vec<NaiveDate> {
    let mut d = NaiveDate::from_ymd_opt(1998, 12, 1).unwrap();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

/// Turns per-currency log-return rows (length T - 1) into a price panel of T dates.
fn panel_from_returns(returns: Vec<Vec<f64>>, starts: Vec<f64>) -> Result<RatePanel> {
    let n = returns.len();
    let t = returns.first().map_or(0, |r| r.len()) + 1;
    let prices = returns
        .into_iter()
        .zip(starts)
        .map(|(row, start)| {
            let mut level = start.ln();
            let mut out = Vec::with_capacity(t);
            out.push(start);
            for g in row {
                level += g;
                out.push(level.exp());
            }
            out
        })
        .collect();
    RatePanel::from_dense(
        CurrencyCode::NUMERAIRE,
        synthetic_codes(n)?,
        trading_days(t),
        prices,
    )
}

fn check_shape(n: usize, t: usize) -> Result<()> {
    if n < 2 || t < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 currencies and 2 dates, got {n} x {t}"
        )));
    }
    Ok(())
}

fn start_levels(stream: &mut NormalStream, n: usize) -> Vec<f64> {
    (0..n).map(|_| (0.5 * stream.normal()).exp()).collect()
}

/// `n` independent geometric random walks of `t` dates.
pub fn random_walk_panel(n: usize, t: usize, seed: u64) -> Result<RatePanel> {
    check_shape(n, t)?;
    let mut stream = NormalStream::new(seed);
    let starts = start_levels(&mut stream, n);
    let mut returns = vec![Vec::with_capacity(t - 1); n];
    for _ in 1..t {
        for row in returns.iter_mut() {
            row.push(DAILY_VOL * stream.normal());
        }
    }
    panel_from_returns(returns, starts)
}

/// Equicorrelated one-factor panel: every pair of return series has population
/// correlation `rho`.
pub fn one_factor_panel(n: usize, rho: f64, t: usize, seed: u64) -> Result<RatePanel> {
    check_shape(n, t)?;
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!(
            "factor correlation must lie in [0, 1), got {rho}"
        )));
    }
    let (load, idio) = (rho.sqrt(), (1.0 - rho).sqrt());
    let mut stream = NormalStream::new(seed);
    let starts = start_levels(&mut stream, n);
    let mut returns = vec![Vec::with_capacity(t - 1); n];
    for _ in 1..t {
        let f = stream.normal();
        for row in returns.iter_mut() {
            row.push(DAILY_VOL * (load * f + idio * stream.normal()));
        }
    }
    panel_from_returns(returns, starts)
}

/// Nested-factor model: a tree with `branching` children per node and
/// `levels` levels below the root; each leaf is one currency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierarchySpec {
    pub branching: usize,
    pub levels: usize,
    /// Correlation of two leaves under the same deepest node when `noise_scale = 1`.
    pub intra_block_corr: f64,
    /// Idiosyncratic noise standard deviation, relative to the unit-noise case.
    pub noise_scale: f64,
    /// Loading ratio between consecutive levels (root has the largest loading).
    pub decay: f64,
    pub seed: u64,
}

impl HierarchySpec {
    pub fn new(branching: usize, levels: usize, intra_block_corr: f64, seed: u64) -> Self {
        HierarchySpec {
            branching,
            levels,
            intra_block_corr,
            noise_scale: 1.0,
            decay: DEFAULT_DECAY,
            seed,
        }
    }

    pub fn leaves(&self) -> usize {
        self.branching.pow(self.levels as u32)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.branching < 2 {
            return bad(format!("branching must be >= 2, got {}", self.branching));
        }
        if self.levels < 1 {
            return bad("levels must be >= 1".into());
        }
        if !(self.intra_block_corr > 0.0 && self.intra_block_corr < 1.0) {
            return bad(format!(
                "intra-block correlation must lie in (0, 1), got {}",
                self.intra_block_corr
            ));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return bad(format!("noise scale must be positive, got {}", self.noise_scale));
        }
        if !(self.decay > 0.0 && self.decay.is_finite()) {
            return bad(format!("loading decay must be positive, got {}", self.decay));
        }
        if self
            .branching
            .checked_pow(self.levels as u32)
            .map_or(true, |n| n > 100_000)
        {
            return bad("hierarchy too large".into());
        }
        Ok(())
    }

    /// Loadings of the root (index 0) down to the deepest shared node.
    pub fn loadings(&self) -> Vec<f64> {
        let rho = self.intra_block_corr;
        let systematic = rho / (1.0 - rho);
        let weights: Vec<f64> = (0..self.levels).map(|l| self.decay.powi(l as i32)).collect();
        let norm: f64 = weights.iter().map(|w| w * w).sum();
        weights
            .iter()
            .map(|w| w * (systematic / norm).sqrt())
            .collect()
    }

    /// Depth of the deepest common ancestor of leaves `i` and `j` (0 = root only).
    pub fn shared_depth(&self, i: usize, j: usize) -> usize {
        let m = self.branching;
        let mut depth = 0;
        for level in 1..self.levels {
            let span = m.pow((self.levels - level) as u32);
            if i / span == j / span {
                depth = level;
            } else {
                break;
            }
        }
        depth
    }

    /// Population correlation matrix of the leaf returns (row-major).
    pub fn target_correlation(&self) -> Vec<f64> {
        let n = self.leaves();
        let load = self.loadings();
        let cum: Vec<f64> = load
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w * w;
                Some(*acc)
            })
            .collect();
        let total = cum[cum.len() - 1] + self.noise_scale * self.noise_scale;
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                c[i * n + j] = if i == j {
                    1.0
                } else {
                    cum[self.shared_depth(i, j)] / total
                };
            }
        }
        c
    }
}

/// Panel of `spec.leaves()` currencies whose returns follow the nested-factor model.
pub fn hierarchical_panel(spec: &HierarchySpec, t: usize) -> Result<RatePanel> {
    spec.validate()?;
    let n = spec.leaves();
    check_shape(n, t)?;
    let load = spec.loadings();
    let m = spec.branching;
    let mut stream = NormalStream::new(spec.seed);
    let starts = start_levels(&mut stream, n);
    let mut returns = vec![Vec::with_capacity(t - 1); n];
    let mut factors: Vec<Vec<f64>> = (0..spec.levels).map(|l| vec![0.0; m.pow(l as u32)]).collect();
    for _ in 1..t {
        for level in factors.iter_mut() {
            for f in level.iter_mut() {
                *f = stream.normal();
            }
        }
        for (i, row) in returns.iter_mut().enumerate() {
            let mut g = 0.0;
            for (l, w) in load.iter().enumerate() {
                let node = i / m.pow((spec.levels - l) as u32);
                g += w * factors[l][node];
            }
            g += spec.noise_scale * stream.normal();
            row.push(DAILY_VOL * g);
        }
    }
    panel_from_returns(returns, starts)
}

/// Degree sequence of the deterministic hierarchical network: an M-clique
/// whose first node is the hub; each further level makes M - 1 copies of the
/// current network and links the new hub to every peripheral (never-hub)
/// node of the copies. Node 0 is the top hub.
pub fn deterministic_hierarchy_degrees(m: usize, levels: usize) -> Result<Vec<usize>> {
    if m < 3 || levels < 1 {
        return Err(Error::InvalidParameter(format!(
            "hierarchy needs M >= 3 and L >= 1, got M = {m}, L = {levels}"
        )));
    }
    if m.checked_pow(levels as u32).map_or(true, |n| n > 10_000_000) {
        return Err(Error::InvalidParameter("hierarchy too large".into()));
    }
    let mut degrees = vec![m - 1; m];
    let mut peripheral: Vec<usize> = (1..m).collect();
    for _ in 1..levels {
        let size = degrees.len();
        let mut next = degrees.clone();
        let mut next_peripheral = Vec::with_capacity(peripheral.len() * (m - 1));
        for copy in 1..m {
            next.extend_from_slice(&degrees);
            next_peripheral.extend(peripheral.iter().map(|p| p + copy * size));
        }
        for &p in &next_peripheral {
            next[p] += 1;
        }
        next[0] += next_peripheral.len();
        degrees = next;
        peripheral = next_peripheral;
    }
    Ok(degrees)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_stream_moments() {
        let mut s = NormalStream::new(1);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| s.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.01);
    }

    #[test]
    fn codes_are_distinct_and_named() {
        let codes = synthetic_codes(70).unwrap();
        let set: std::collections::BTreeSet<_> = codes.iter().collect();
        assert_eq!(set.len(), 70);
        assert_eq!(codes[0].as_str(), "USD");
        assert_eq!(codes[60].as_str(), "QAA");
    }

    #[test]
    fn trading_days_skip_weekends() {
        let d = trading_days(10);
        assert!(d.iter().all(|x| !matches!(x.weekday(), Weekday::Sat | Weekday::Sun)));
        assert!(d.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn triangle_fixture() {
        assert_eq!(deterministic_hierarchy_degrees(3, 1).unwrap(), vec![2, 2, 2]);
    }

    #[test]
    fn hub_dominates_second_level() {
        let d = deterministic_hierarchy_degrees(5, 2).unwrap();
        assert_eq!(d.len(), 25);
        assert_eq!(d[0], 4 + 16);
        assert!(d[1..].iter().all(|&k| k < d[0]));
        // handshake: 5 cliques of 10 edges plus 16 hub links
        assert_eq!(d.iter().sum::<usize>(), 2 * (5 * 10 + 16));
    }

    #[test]
    fn hub_tail_follows_model_exponent() {
        // the hubs alone trace F(K) ~ K^-(ln M / ln(M-1))
        let (m, levels) = (5usize, 6usize);
        let d = deterministic_hierarchy_degrees(m, levels).unwrap();
        let n = d.len() as f64;
        let mut hubs: Vec<usize> = d.iter().copied().filter(|&k| k >= 4 * (m - 1)).collect();
        hubs.sort_unstable();
        hubs.dedup();
        let pts: Vec<(f64, f64)> = hubs
            .iter()
            .map(|&h| {
                let f = d.iter().filter(|&&k| k >= h).count() as f64 / n;
                ((h as f64).ln(), f.ln())
            })
            .collect();
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        let expected = (m as f64).ln() / ((m - 1) as f64).ln();
        assert!((-slope - expected).abs() / expected < 0.05, "slope {slope}");
    }

    #[test]
    fn spec_validation() {
        assert!(HierarchySpec::new(1, 2, 0.5, 0).validate().is_err());
        assert!(HierarchySpec::new(3, 0, 0.5, 0).validate().is_err());
        assert!(HierarchySpec::new(3, 2, 1.0, 0).validate().is_err());
        let mut s = HierarchySpec::new(3, 2, 0.5, 0);
        s.noise_scale = 0.0;
        assert!(s.validate().is_err());
        assert!(hierarchical_panel(&s, 10).is_err());
    }

    #[test]
    fn target_correlation_is_nested() {
        let spec = HierarchySpec::new(3, 3, 0.8, 0);
        let c = spec.target_correlation();
        let n = spec.leaves();
        // leaves 0 and 1 share the deepest node, 0 and 3 only the first level, 0 and 9 only the root
        assert!((c[1] - 0.8).abs() < 1e-12);
        assert!(c[3] < c[1] && c[9] < c[3] && c[9] > 0.0);
        assert_eq!(c[n + 1], 1.0);
    }
}
