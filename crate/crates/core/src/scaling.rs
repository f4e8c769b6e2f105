//! Power-law fits of cumulative degree distributions, the hierarchical-model
//! exponent, and the sweep over base currencies that produces per-base reports.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{despike, CurrencyCode, GroupConfig, LiquidityGroup, RatePanel};
use crate::msttree::{build_mst, degree_distribution, distance_matrix, DegreeDistribution, SpanningTree};
use crate::returns::{log_returns, normalize, rebase, RawReturns};
use crate::spectrum::{correlation_matrix, eigen, rmt_bound, Spectrum, EIGEN_TOL};

/// Exponent search interval for `F(K) = c K^-alpha`.
pub const ALPHA_RANGE: (f64, f64) = (0.01, 10.0);
/// Exponent search interval for `alpha = a (lambda - lambda_rm)^-beta`.
pub const BETA_RANGE: (f64, f64) = (-5.0, 5.0);
const GRID_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FitMode {
    /// Amplitude and exponent both free.
    TwoParameter,
    /// Amplitude pinned to 1, exponent free.
    UnitAmplitude,
}

impl FromStr for FitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two" | "two-param" => Ok(FitMode::TwoParameter),
            "unit" | "unit-amplitude" => Ok(FitMode::UnitAmplitude),
            other => Err(Error::InvalidParameter(format!("unknown fit mode {other:?}"))),
        }
    }
}

/// Least-squares power fit in linear scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerFit {
    pub alpha: f64,
    pub amplitude: f64,
    /// Standard error of alpha from the linearized covariance at the optimum.
    pub delta_alpha: f64,
    /// `delta_alpha / alpha`.
    pub rel_err: f64,
    pub sse: f64,
    pub points_used: usize,
}

#[derive(Debug, Clone, Copy)]
struct CurveFit {
    amplitude: f64,
    exponent: f64,
    sse: f64,
    exponent_variance: f64,
}

fn model_sse(xs: &[f64], ys: &[f64], amplitude: f64, exponent: f64) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - amplitude * x.powf(-exponent);
            r * r
        })
        .sum()
}

/// Optimal amplitude for a fixed exponent, and the resulting SSE.
fn profile(xs: &[f64], ys: &[f64], exponent: f64, mode: FitMode) -> (f64, f64) {
    let amplitude = match mode {
        FitMode::UnitAmplitude => 1.0,
        FitMode::TwoParameter => {
            let (mut num, mut den) = (0.0, 0.0);
            for (x, y) in xs.iter().zip(ys) {
                let b = x.powf(-exponent);
                num += y * b;
                den += b * b;
            }
            num / den
        }
    };
    (amplitude, model_sse(xs, ys, amplitude, exponent))
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-14 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

/// Fits `y = a x^-p` by least squares in linear scale: a dense grid over p
/// with the amplitude profiled out, golden-section refinement around the
/// best grid cell, then Gauss-Newton polishing on both parameters.
fn fit_curve(xs: &[f64], ys: &[f64], range: (f64, f64), mode: FitMode) -> Result<CurveFit> {
    let params = match mode {
        FitMode::TwoParameter => 2,
        FitMode::UnitAmplitude => 1,
    };
    let step = (range.1 - range.0) / (GRID_POINTS - 1) as f64;
    let grid = |k: usize| range.0 + step * k as f64;
    let mut best = (0usize, f64::INFINITY);
    for k in 0..GRID_POINTS {
        let (_, sse) = profile(xs, ys, grid(k), mode);
        if sse < best.1 {
            best = (k, sse);
        }
    }
    let k = best.0;
    let lo = grid(k.saturating_sub(1));
    let hi = grid((k + 1).min(GRID_POINTS - 1));
    let mut exponent = golden_section(|p| profile(xs, ys, p, mode).1, lo, hi);
    let (mut amplitude, mut sse) = profile(xs, ys, exponent, mode);
    if best.1 < sse {
        exponent = grid(k);
        (amplitude, sse) = profile(xs, ys, exponent, mode);
    }

    // Gauss-Newton polish with step halving; only improvements are kept.
    for _ in 0..50 {
        let (mut jaa, mut jap, mut jpp, mut ga, mut gp) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(ys) {
            let b = x.powf(-exponent);
            let r = y - amplitude * b;
            let da = b;
            let dp = -amplitude * b * x.ln();
            jaa += da * da;
            jap += da * dp;
            jpp += dp * dp;
            ga += da * r;
            gp += dp * r;
        }
        let (delta_a, delta_p) = match mode {
            FitMode::TwoParameter => {
                let det = jaa * jpp - jap * jap;
                if det.abs() <= f64::MIN_POSITIVE {
                    break;
                }
                ((jpp * ga - jap * gp) / det, (jaa * gp - jap * ga) / det)
            }
            FitMode::UnitAmplitude => {
                if jpp <= f64::MIN_POSITIVE {
                    break;
                }
                (0.0, gp / jpp)
            }
        };
        let mut scale = 1.0;
        let mut improved = false;
        while scale > 1e-6 {
            let a = amplitude + scale * delta_a;
            let p = exponent + scale * delta_p;
            let s = model_sse(xs, ys, a, p);
            if s < sse {
                amplitude = a;
                exponent = p;
                sse = s;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            break;
        }
    }

    let edge = 2.0 * step;
    if exponent <= range.0 + edge || exponent >= range.1 - edge {
        return Err(Error::DegenerateFit(format!(
            "exponent {exponent} at the edge of the search range [{}, {}]",
            range.0, range.1
        )));
    }
    if !(amplitude > 0.0) || !amplitude.is_finite() {
        return Err(Error::DegenerateFit(format!("amplitude {amplitude}")));
    }

    let (mut jaa, mut jap, mut jpp) = (0.0, 0.0, 0.0);
    for x in xs {
        let b = x.powf(-exponent);
        let dp = -amplitude * b * x.ln();
        jaa += b * b;
        jap += b * dp;
        jpp += dp * dp;
    }
    let inv_pp = match mode {
        FitMode::TwoParameter => {
            let det = jaa * jpp - jap * jap;
            if det <= 0.0 {
                return Err(Error::DegenerateFit("singular normal matrix".into()));
            }
            jaa / det
        }
        FitMode::UnitAmplitude => {
            if jpp <= 0.0 {
                return Err(Error::DegenerateFit("singular normal matrix".into()));
            }
            1.0 / jpp
        }
    };
    let dof = xs.len().saturating_sub(params).max(1);
    let s2 = sse / dof as f64;
    Ok(CurveFit {
        amplitude,
        exponent,
        sse,
        exponent_variance: s2 * inv_pp,
    })
}

/// Power fit on explicit `(K, F)` points.
pub fn fit_power_points(points: &[(f64, f64)], mode: FitMode) -> Result<PowerFit> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            found: points.len(),
        });
    }
    if let Some(&(k, f)) = points
        .iter()
        .find(|(k, f)| !(k.is_finite() && *k > 0.0 && f.is_finite()))
    {
        return Err(Error::InvalidParameter(format!("invalid point ({k}, {f})")));
    }
    // canonical order makes the result independent of input order
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let (xs, ys): (Vec<f64>, Vec<f64>) = sorted.into_iter().unzip();
    let fit = fit_curve(&xs, &ys, ALPHA_RANGE, mode)?;
    let delta_alpha = fit.exponent_variance.max(0.0).sqrt();
    Ok(PowerFit {
        alpha: fit.exponent,
        amplitude: fit.amplitude,
        delta_alpha,
        rel_err: delta_alpha / fit.exponent,
        sse: fit.sse,
        points_used: xs.len(),
    })
}

/// Fits `F(K) = c K^-alpha` over the occupied degrees of a distribution.
pub fn fit_power(dist: &DegreeDistribution, mode: FitMode) -> Result<PowerFit> {
    fit_power_points(&dist.occupied(), mode)
}

/// Replication factor `M = <K> + 1 = 2(N-1)/N + 1` of a tree with N nodes and
/// the hierarchical-model exponent `ln M / ln(M - 1)`.
pub fn hierarchical_exponent(nodes: usize) -> Result<(f64, f64)> {
    if nodes < 3 {
        return Err(Error::InvalidParameter(format!(
            "hierarchical exponent needs N >= 3, got {nodes}"
        )));
    }
    let n = nodes as f64;
    let m = 2.0 * (n - 1.0) / n + 1.0;
    Ok((m, m.ln() / (m - 1.0).ln()))
}

/// `alpha = prefactor * (lambda_max - lambda_rm)^-beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaFit {
    pub beta: f64,
    pub prefactor: f64,
    pub lambda_rm: f64,
    pub sse: f64,
}

impl BetaFit {
    pub fn predict(&self, lambda_max: f64) -> f64 {
        self.prefactor * (lambda_max - self.lambda_rm).powf(-self.beta)
    }
}

/// Least-squares fit of alpha against lambda_max over `(lambda_max, alpha)` points.
pub fn fit_beta(points: &[(f64, f64)], lambda_rm: f64) -> Result<BetaFit> {
    if points.len() < 5 {
        return Err(Error::TooFewPoints {
            needed: 5,
            found: points.len(),
        });
    }
    for (index, &(lambda_max, _)) in points.iter().enumerate() {
        if !(lambda_max > lambda_rm) {
            return Err(Error::BelowRandomBound {
                index,
                lambda_max,
                lambda_rm,
            });
        }
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let xs: Vec<f64> = sorted.iter().map(|(l, _)| l - lambda_rm).collect();
    let ys: Vec<f64> = sorted.iter().map(|(_, a)| *a).collect();
    let fit = fit_curve(&xs, &ys, BETA_RANGE, FitMode::TwoParameter)?;
    Ok(BetaFit {
        beta: fit.exponent,
        prefactor: fit.amplitude,
        lambda_rm,
        sse: fit.sse,
    })
}

/// One row of the per-base table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaseReport {
    pub base: CurrencyCode,
    pub group: Option<LiquidityGroup>,
    pub fit: PowerFit,
    pub lambda_max: f64,
    pub zero_modes: usize,
}

/// Everything computed for one base currency.
#[derive(Debug, Clone)]
pub struct BaseAnalysis {
    pub report: BaseReport,
    pub spectrum: Spectrum,
    pub tree: SpanningTree,
    pub distribution: DegreeDistribution,
    pub series: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseFailure {
    pub base: CurrencyCode,
    pub group: Option<LiquidityGroup>,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub enum BaseOutcome {
    Done(Box<BaseAnalysis>),
    Failed(BaseFailure),
}

impl BaseOutcome {
    pub fn base(&self) -> CurrencyCode {
        match self {
            BaseOutcome::Done(a) => a.report.base,
            BaseOutcome::Failed(f) => f.base,
        }
    }
}

/// Unweighted means over the successful bases of one group (or of all bases).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupAverage {
    /// `None` for the all-currency row.
    pub group: Option<LiquidityGroup>,
    pub members: usize,
    pub alpha: f64,
    pub delta_alpha: f64,
    pub rel_err: f64,
    pub lambda_max: f64,
}

impl GroupAverage {
    pub fn label(&self) -> &'static str {
        self.group.map_or("all", |g| g.tag())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DespikeSummary {
    pub removed: usize,
    pub points: usize,
    pub zero_variance: Vec<CurrencyCode>,
}

impl DespikeSummary {
    pub fn fraction(&self) -> f64 {
        if self.points == 0 {
            0.0
        } else {
            self.removed as f64 / self.points as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseSelection {
    All,
    One(CurrencyCode),
}

impl FromStr for BaseSelection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            Ok(BaseSelection::All)
        } else {
            Ok(BaseSelection::One(CurrencyCode::new(s)?))
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub groups: GroupConfig,
    /// Jumps above this many sample standard deviations are zeroed; `None` disables despiking.
    pub despike_sigma: Option<f64>,
    pub fit_mode: FitMode,
    pub lag: usize,
    pub bases: BaseSelection,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            groups: GroupConfig::default_groups(),
            despike_sigma: Some(5.0),
            fit_mode: FitMode::TwoParameter,
            lag: 1,
            bases: BaseSelection::All,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub outcomes: Vec<BaseOutcome>,
    pub averages: Vec<GroupAverage>,
    pub beta: std::result::Result<BetaFit, String>,
    pub despike: DespikeSummary,
}

impl SweepReport {
    pub fn analyses(&self) -> impl Iterator<Item = &BaseAnalysis> {
        self.outcomes.iter().filter_map(|o| match o {
            BaseOutcome::Done(a) => Some(a.as_ref()),
            BaseOutcome::Failed(_) => None,
        })
    }

    pub fn failures(&self) -> impl Iterator<Item = &BaseFailure> {
        self.outcomes.iter().filter_map(|o| match o {
            BaseOutcome::Failed(f) => Some(f),
            BaseOutcome::Done(_) => None,
        })
    }

    pub fn reports(&self) -> Vec<BaseReport> {
        self.analyses().map(|a| a.report.clone()).collect()
    }

    /// `(lambda_max, alpha)` of every successful base.
    pub fn scatter(&self) -> Vec<(f64, f64)> {
        self.analyses()
            .map(|a| (a.report.lambda_max, a.report.fit.alpha))
            .collect()
    }
}

/// Rebase, normalize, correlate, diagonalize, build the tree and fit F(K) for one base.
pub fn analyze_base(
    raw: &RawReturns,
    base: CurrencyCode,
    group: Option<LiquidityGroup>,
    mode: FitMode,
) -> Result<BaseAnalysis> {
    let panel = normalize(&rebase(raw, base)?)?;
    let corr = correlation_matrix(&panel)?;
    let spectrum = eigen(&corr, EIGEN_TOL)?;
    let tree = build_mst(&distance_matrix(&corr)?)?;
    let distribution = degree_distribution(&tree);
    let fit = fit_power(&distribution, mode)?;
    Ok(BaseAnalysis {
        report: BaseReport {
            base,
            group,
            fit,
            lambda_max: spectrum.lambda_max,
            zero_modes: spectrum.zero_mode_count,
        },
        spectrum,
        tree,
        distribution,
        series: panel.series(),
        samples: panel.samples(),
    })
}

/// Despikes raw returns in place, series by series.
pub fn despike_returns(raw: &mut RawReturns, threshold: f64) -> Result<DespikeSummary> {
    let codes = raw.currencies().to_vec();
    let mut summary = DespikeSummary::default();
    for (code, row) in codes.iter().zip(raw.rows_mut()) {
        let out = despike(row, threshold)?;
        summary.removed += out.removed;
        summary.points += row.len();
        if out.zero_variance {
            summary.zero_variance.push(*code);
        }
        *row = out.cleaned;
    }
    Ok(summary)
}

fn averages(outcomes: &[BaseOutcome]) -> Vec<GroupAverage> {
    let reports: Vec<&BaseReport> = outcomes
        .iter()
        .filter_map(|o| match o {
            BaseOutcome::Done(a) => Some(&a.report),
            BaseOutcome::Failed(_) => None,
        })
        .collect();
    let mean = |group: Option<LiquidityGroup>, rows: Vec<&&BaseReport>| -> Option<GroupAverage> {
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        let avg = |f: fn(&BaseReport) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
        Some(GroupAverage {
            group,
            members: rows.len(),
            alpha: avg(|r| r.fit.alpha),
            delta_alpha: avg(|r| r.fit.delta_alpha),
            rel_err: avg(|r| r.fit.rel_err),
            lambda_max: avg(|r| r.lambda_max),
        })
    };
    let mut out: Vec<GroupAverage> = LiquidityGroup::ALL
        .iter()
        .filter_map(|&g| {
            mean(
                Some(g),
                reports.iter().filter(|r| r.group == Some(g)).collect(),
            )
        })
        .collect();
    out.extend(mean(None, reports.iter().collect()));
    out
}

/// Runs the per-base pipeline for every selected base of a synchronized panel.
/// Failing bases are recorded and do not stop the sweep.
pub fn sweep_report(panel: &RatePanel, config: &SweepConfig) -> Result<SweepReport> {
    let mut raw = log_returns(panel, config.lag)?;
    let despike = match config.despike_sigma {
        Some(threshold) => despike_returns(&mut raw, threshold)?,
        None => DespikeSummary::default(),
    };
    let targets = match config.bases {
        BaseSelection::All => raw.targets(),
        BaseSelection::One(code) => {
            if !raw.targets().contains(&code) {
                return Err(Error::UnknownCurrency(code));
            }
            vec![code]
        }
    };

    let outcomes: Vec<BaseOutcome> = targets
        .par_iter()
        .map(|&base| {
            let group = config.groups.group_of(base);
            match analyze_base(&raw, base, group, config.fit_mode) {
                Ok(a) => BaseOutcome::Done(Box::new(a)),
                Err(e) => BaseOutcome::Failed(BaseFailure {
                    base,
                    group,
                    reason: e.to_string(),
                }),
            }
        })
        .collect();

    let averages = averages(&outcomes);
    let points: Vec<(f64, f64)> = outcomes
        .iter()
        .filter_map(|o| match o {
            BaseOutcome::Done(a) => Some((a.report.lambda_max, a.report.fit.alpha)),
            BaseOutcome::Failed(_) => None,
        })
        .collect();
    let beta = match outcomes.iter().find_map(|o| match o {
        BaseOutcome::Done(a) => Some((a.samples, a.series)),
        BaseOutcome::Failed(_) => None,
    }) {
        Some((t, n)) => fit_beta(&points, rmt_bound(t, n)).map_err(|e| e.to_string()),
        None => Err("no successful base".to_string()),
    };

    Ok(SweepReport {
        outcomes,
        averages,
        beta,
        despike,
    })
}

fn group_label(group: Option<LiquidityGroup>) -> &'static str {
    group.map_or("-", |g| g.tag())
}

/// Report CSV: `base,group,alpha,delta_alpha,rel_err_pct,lambda_max,zero_modes`,
/// one row per base (numeric fields empty for failed bases), then one
/// `average,<group>` row per group present and `average,all`.
pub fn write_report<W: Write>(report: &SweepReport, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "base",
        "group",
        "alpha",
        "delta_alpha",
        "rel_err_pct",
        "lambda_max",
        "zero_modes",
    ])?;
    for outcome in &report.outcomes {
        match outcome {
            BaseOutcome::Done(a) => {
                let r = &a.report;
                w.write_record([
                    r.base.to_string(),
                    group_label(r.group).to_string(),
                    format!("{:.6}", r.fit.alpha),
                    format!("{:.6}", r.fit.delta_alpha),
                    format!("{:.4}", 100.0 * r.fit.rel_err),
                    format!("{:.6}", r.lambda_max),
                    r.zero_modes.to_string(),
                ])?;
            }
            BaseOutcome::Failed(f) => {
                w.write_record([
                    f.base.to_string(),
                    group_label(f.group).to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ])?;
            }
        }
    }
    for avg in &report.averages {
        w.write_record([
            "average".to_string(),
            avg.label().to_string(),
            format!("{:.6}", avg.alpha),
            format!("{:.6}", avg.delta_alpha),
            format!("{:.4}", 100.0 * avg.rel_err),
            format!("{:.6}", avg.lambda_max),
            String::new(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Samples of the fitted curve used for plotting.
pub const CURVE_SAMPLES: usize = 50;

/// Scatter CSV: `base,group,lambda_max,alpha` per base, followed by
/// `fit,curve,<lambda>,<alpha>` samples of the fitted curve when one exists.
pub fn write_scatter<W: Write>(report: &SweepReport, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["base", "group", "lambda_max", "alpha"])?;
    for a in report.analyses() {
        let r = &a.report;
        w.write_record([
            r.base.to_string(),
            group_label(r.group).to_string(),
            format!("{:.6}", r.lambda_max),
            format!("{:.6}", r.fit.alpha),
        ])?;
    }
    if let Ok(beta) = &report.beta {
        let lambdas: Vec<f64> = report.scatter().iter().map(|p| p.0).collect();
        let lo = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for k in 0..CURVE_SAMPLES {
            let l = lo + (hi - lo) * k as f64 / (CURVE_SAMPLES - 1) as f64;
            w.write_record([
                "fit".to_string(),
                "curve".to_string(),
                format!("{l:.6}"),
                format!("{:.6}", beta.predict(l)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
