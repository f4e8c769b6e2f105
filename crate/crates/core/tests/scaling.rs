mod common;

use fxmst::ingest::{CurrencyCode, LiquidityGroup, RatePanel};
use fxmst::msttree::degree_distribution;
use fxmst::returns::log_returns;
use fxmst::scaling::{
    analyze_base, fit_beta, fit_power, fit_power_points, hierarchical_exponent, sweep_report,
    FitMode, SweepConfig,
};
use fxmst::synth::{hierarchical_panel, random_walk_panel, HierarchySpec, NormalStream};
use proptest::prelude::*;

fn sse(points: &[(f64, f64)], c: f64, a: f64) -> f64 {
    points.iter().map(|(k, f)| (f - c * k.powf(-a)).powi(2)).sum()
}

/// Dense (c, alpha) grid, then two successively finer grids around the best cell.
fn grid_oracle(points: &[(f64, f64)]) -> (f64, f64) {
    let (mut c_lo, mut c_hi, mut a_lo, mut a_hi) = (0.1, 3.0, 0.05, 6.0);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for _ in 0..4 {
        let steps = 300;
        for i in 0..=steps {
            let c = c_lo + (c_hi - c_lo) * i as f64 / steps as f64;
            for j in 0..=steps {
                let a = a_lo + (a_hi - a_lo) * j as f64 / steps as f64;
                let s = sse(points, c, a);
                if s < best.0 {
                    best = (s, c, a);
                }
            }
        }
        let (dc, da) = ((c_hi - c_lo) / 30.0, (a_hi - a_lo) / 30.0);
        (c_lo, c_hi, a_lo, a_hi) = (best.1 - dc, best.1 + dc, best.2 - da, best.2 + da);
    }
    (best.1, best.2)
}

#[test]
fn hierarchical_tree_fit_agrees_with_grid_search() {
    let mut checked = 0;
    for seed in 0..5 {
        let spec = HierarchySpec::new(4, 3, 0.5, seed);
        let panel = hierarchical_panel(&spec, 600).unwrap().take_columns(59).unwrap();
        let raw = log_returns(&panel, 1).unwrap();
        let target = raw.targets()[0];
        let a = match analyze_base(&raw, target, None, FitMode::TwoParameter) {
            Ok(a) => a,
            Err(_) => continue,
        };
        let points = a.distribution.occupied();
        let (c, alpha) = grid_oracle(&points);
        let fit = a.report.fit;
        assert!(fit.sse <= sse(&points, c, alpha) + 1e-12);
        assert!(
            (fit.alpha - alpha).abs() <= fit.delta_alpha.max(1e-6),
            "{} vs oracle {alpha} (delta {})",
            fit.alpha,
            fit.delta_alpha
        );
        checked += 1;
    }
    assert!(checked >= 3);
}

#[test]
fn beta_with_zero_bound_matches_log_log_regression() {
    let pts: Vec<(f64, f64)> = (1..=12)
        .map(|i| {
            let l = 1.5 + 0.7 * i as f64;
            (l, 2.3 * l.powf(-0.37))
        })
        .collect();
    let fit = fit_beta(&pts, 0.0).unwrap();
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let intercept = my - slope * mx;
    assert!((fit.beta + slope).abs() < 1e-6);
    assert!((fit.prefactor - intercept.exp()).abs() < 1e-6);
}

#[test]
fn delta_alpha_shrinks_with_replication() {
    let ks: Vec<f64> = (1..=8).map(|k| k as f64).collect();
    let mean_delta = |reps: usize| -> f64 {
        let mut total = 0.0;
        for seed in 0..40 {
            let mut s = NormalStream::new(seed * 7 + reps as u64);
            let pts: Vec<(f64, f64)> = (0..reps)
                .flat_map(|_| ks.iter().map(|&k| (k, 0.9 * k.powf(-1.4))).collect::<Vec<_>>())
                .map(|(k, f)| (k, f + 0.01 * s.normal()))
                .collect();
            total += fit_power_points(&pts, FitMode::TwoParameter).unwrap().delta_alpha;
        }
        total / 40.0
    };
    let ratio = mean_delta(1) / mean_delta(16);
    assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");
}

#[test]
fn hierarchical_exponent_decreases_toward_limit() {
    let limit = 3f64.ln() / 2f64.ln();
    let mut prev = f64::INFINITY;
    let mut prev_m = 0.0;
    for n in 3..500 {
        let (m, a) = hierarchical_exponent(n).unwrap();
        assert!(a < prev && a > limit);
        assert!(m > prev_m && m < 3.0);
        prev = a;
        prev_m = m;
    }
    let (m, a) = hierarchical_exponent(10_000_000).unwrap();
    assert!((m - 3.0).abs() < 1e-6);
    assert!((a - limit).abs() < 1e-6);
}

#[test]
fn sweep_over_sixty_currencies_reports_every_base() {
    let panel = random_walk_panel(60, 400, 8).unwrap();
    let report = sweep_report(&panel, &SweepConfig::default()).unwrap();
    assert_eq!(report.outcomes.len(), 60);
    let done = report.analyses().count();
    assert_eq!(done + report.failures().count(), 60);
    assert!(done >= 50, "{} failures", 60 - done);
    let labels: Vec<&str> = report.averages.iter().map(|a| a.label()).collect();
    assert_eq!(labels, ["A*", "A", "B", "C", "all"]);
    assert_eq!(report.averages[4].members, done);
    for a in report.analyses() {
        assert_eq!(a.series, 59);
        assert_eq!(a.samples, 399);
    }
}

#[test]
fn pegged_currency_and_its_quote_fail_alone() {
    // 31 independent walks; the last one becomes the quote currency
    let walk = random_walk_panel(31, 300, 4).unwrap();
    let mut cs = walk.currencies().to_vec();
    let quote = cs.pop().unwrap();
    let mut rows = walk.dense_rows().unwrap();
    let quote_prices = rows.pop().unwrap();
    for row in rows.iter_mut() {
        for (p, q) in row.iter_mut().zip(&quote_prices) {
            *p /= q;
        }
    }
    rows[3] = vec![1.25; quote_prices.len()];
    let panel = RatePanel::from_dense(quote, cs.clone(), walk.dates().to_vec(), rows).unwrap();
    let report = sweep_report(&panel, &SweepConfig::default()).unwrap();
    assert_eq!(report.outcomes.len(), 31);
    assert_eq!(report.despike.zero_variance, [cs[3]]);
    // a peg is symmetric: the pegged currency and its quote are flagged, nothing else
    let mut failed: Vec<CurrencyCode> = report.failures().map(|f| f.base).collect();
    failed.sort();
    let mut expected = vec![cs[3], quote];
    expected.sort();
    assert_eq!(failed, expected);
    for f in report.failures() {
        assert!(f.reason.contains("variance"), "{}", f.reason);
    }
    let f = report.failures().find(|f| f.base == cs[3]).unwrap();
    assert_eq!(f.group, Some(LiquidityGroup::AStar));
    assert_eq!(report.analyses().count(), 29);
}

#[test]
fn unit_mode_pins_the_amplitude() {
    let panel = random_walk_panel(30, 300, 1).unwrap();
    let raw = log_returns(&panel, 1).unwrap();
    let a = analyze_base(&raw, raw.targets()[0], None, FitMode::UnitAmplitude).unwrap();
    assert_eq!(a.report.fit.amplitude, 1.0);
    let again = fit_power(&degree_distribution(&a.tree), FitMode::UnitAmplitude).unwrap();
    assert_eq!(again, a.report.fit);
}

proptest! {
    #[test]
    fn exact_power_law_is_recovered(c in 0.1f64..10.0, alpha in 0.5f64..3.0, kmax in 5usize..15) {
        let pts: Vec<(f64, f64)> = (1..=kmax).map(|k| (k as f64, c * (k as f64).powf(-alpha))).collect();
        let fit = fit_power_points(&pts, FitMode::TwoParameter).unwrap();
        prop_assert!((fit.alpha - alpha).abs() < 1e-6, "alpha {} vs {}", fit.alpha, alpha);
        prop_assert!((fit.amplitude - c).abs() < 1e-6 * c.max(1.0));
    }

    #[test]
    fn fit_ignores_point_order(
        noise in prop::collection::vec(-0.02f64..0.02, 8),
        perm in Just((0..8usize).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let pts: Vec<(f64, f64)> = (1..=8)
            .map(|k| (k as f64, (k as f64).powf(-1.3) + noise[k - 1]))
            .collect();
        let shuffled: Vec<(f64, f64)> = perm.iter().map(|&i| pts[i]).collect();
        let a = fit_power_points(&pts, FitMode::TwoParameter).unwrap();
        let b = fit_power_points(&shuffled, FitMode::TwoParameter).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn beta_of_a_sweep_matches_grid_search() {
    let spec = HierarchySpec::new(4, 3, 0.6, 12);
    let panel = hierarchical_panel(&spec, 1658).unwrap().take_columns(60).unwrap();
    let report = sweep_report(&panel, &SweepConfig::default()).unwrap();
    let beta = report.beta.as_ref().expect("beta fit");
    let pts = report.scatter();
    let cost = |a: f64, b: f64| -> f64 {
        pts.iter()
            .map(|(l, y)| (y - a * (l - beta.lambda_rm).powf(-b)).powi(2))
            .sum()
    };
    // amplitude profiled out in closed form, beta on a fine grid
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=200_000 {
        let b = -5.0 + 10.0 * i as f64 / 200_000.0;
        let (mut num, mut den) = (0.0, 0.0);
        for (l, y) in &pts {
            let x = (l - beta.lambda_rm).powf(-b);
            num += y * x;
            den += x * x;
        }
        let s = cost(num / den, b);
        if s < best.0 {
            best = (s, b);
        }
    }
    assert!(beta.sse <= best.0 + 1e-12);
    assert!((beta.beta - best.1).abs() < 1e-3, "{} vs {}", beta.beta, best.1);
}
