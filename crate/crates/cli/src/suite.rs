//! Reference-value suite: every published number the library reproduces,
//! checked against its tolerance.
//!
//! Rational values are compared exactly through rational arithmetic, so they
//! pass at any tolerance, including zero. Irrational closed forms use the
//! `tolerance` option. Values that are only quoted to a few digits, limits
//! approached at finite parameters, and simulated values carry their own
//! fixed rules.

use std::io::Write;

use cloudprice_core::bounds::{
    fleet_bound, h0_fleet_eval_tail, h_corner_min, h_value, harmonic, harmonic_family_equal_r,
    harmonic_family_shared, one_length_fleet_bound, rho, rho_unbounded, rho_unbounded_value,
    rho_value, tight_bimodal_instance,
};
use cloudprice_core::optimize::{best_single_from_multi, optimize_flat, optimize_multi};
use cloudprice_core::sim::simulate;
use cloudprice_core::steady::{single_server_flat_metrics, single_server_metrics};
use cloudprice_core::{
    Fleet, FleetMode, JobMix, PriceSchedule, SearchConfig, SimConfig, SimModel, ValueDistribution,
};
use num_rational::Ratio;

use crate::commands::CliError;

type Q = Ratio<i64>;

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub filter: Option<String>,
    pub tolerance: f64,
    pub seed: u64,
    pub horizon: u64,
    pub replications: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            filter: None,
            tolerance: 1e-9,
            seed: 0,
            horizon: 1_000_000,
            replications: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    /// Exact rational equality.
    Exact,
    /// Within the suite tolerance.
    Closed,
    /// Within a fixed tolerance stated with the check.
    Fixed,
    /// At least the expected value.
    AtLeast,
    /// Within three standard errors of a simulation.
    Simulated,
}

impl Rule {
    fn name(self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Closed => "closed",
            Self::Fixed => "fixed",
            Self::AtLeast => "at-least",
            Self::Simulated => "3se",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub rule: Rule,
    pub expected: f64,
    pub actual: f64,
    /// Allowed absolute error (zero for exact and at-least checks).
    pub tolerance: f64,
    pub passed: bool,
}

type Run = fn(&SuiteOptions) -> Vec<CheckResult>;

fn closed(name: &'static str, actual: f64, expected: f64, o: &SuiteOptions) -> CheckResult {
    CheckResult {
        name,
        rule: Rule::Closed,
        expected,
        actual,
        tolerance: o.tolerance,
        passed: (actual - expected).abs() <= o.tolerance,
    }
}

fn fixed(name: &'static str, actual: f64, expected: f64, tolerance: f64) -> CheckResult {
    CheckResult {
        name,
        rule: Rule::Fixed,
        expected,
        actual,
        tolerance,
        passed: (actual - expected).abs() <= tolerance,
    }
}

fn at_least(name: &'static str, actual: f64, floor: f64) -> CheckResult {
    CheckResult {
        name,
        rule: Rule::AtLeast,
        expected: floor,
        actual,
        tolerance: 0.0,
        passed: actual >= floor,
    }
}

fn to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// `exact` is the rational computation; `float` is the library's f64 path,
/// which must agree to within rounding.
fn exact(name: &'static str, exact: Q, expected: Q, float: f64) -> CheckResult {
    let e = to_f64(expected);
    CheckResult {
        name,
        rule: Rule::Exact,
        expected: e,
        actual: float,
        tolerance: 0.0,
        passed: exact == expected && (float - e).abs() <= 1e-12,
    }
}

fn warmup() -> (JobMix, ValueDistribution) {
    (
        JobMix::new(vec![1, 2], vec![0.5, 0.5]).unwrap(),
        ValueDistribution::uniform(0.0, 1.0).unwrap(),
    )
}

fn cw(prices: &[f64]) -> f64 {
    let (m, u) = warmup();
    single_server_metrics(&m, &u, prices).unwrap().welfare_per_step
}

fn cr(prices: &[f64]) -> f64 {
    let (m, u) = warmup();
    single_server_metrics(&m, &u, prices).unwrap().revenue_per_step
}

fn cw_flat(p: f64) -> f64 {
    let (m, u) = warmup();
    single_server_flat_metrics(&m, &u, p).unwrap().welfare_per_step
}

fn cr_flat(p: f64) -> f64 {
    let (m, u) = warmup();
    single_server_flat_metrics(&m, &u, p).unwrap().revenue_per_step
}

fn thirds(a3: u32) -> JobMix {
    JobMix::new(vec![2, 3, a3], vec![1.0 / 3.0; 3]).unwrap()
}

fn h_thirds(a3: u32, b: [i64; 3]) -> (Q, f64) {
    let q = h_value(&[2, 3, a3], &[Q::new(1, 3); 3], &b.map(Q::from_integer));
    let f = h_value(&[2, 3, a3], &[1.0 / 3.0; 3], &b.map(|x| x as f64));
    (q, f)
}

fn rho_exact(a: u32, b: u32) -> (Q, f64) {
    let half = Q::new(1, 2);
    (rho_value(a, b, half, half), rho(a, b, 0.5, 0.5).unwrap())
}

// Argmax locations are flat to first order, so they are only resolved to
// about the square root of machine precision.
const ARGMAX_TOL: f64 = 1e-6;

const CHECKS: &[(&str, Run)] = &[
    ("values/uniform-partial-expectation", |o| {
        let u = ValueDistribution::uniform(0.0, 1.0).unwrap();
        vec![
            closed("values/uniform-partial-expectation", u.partial_expectation(0.0), 0.5, o),
            closed("values/uniform-partial-expectation-0.3", u.partial_expectation(0.3), (1.0 - 0.09) / 2.0, o),
        ]
    }),
    ("closed-form/welfare-zero-price", |o| {
        vec![closed("closed-form/welfare-zero-price", cw_flat(0.0), 0.5, o)]
    }),
    ("closed-form/welfare-flat-optimum", |o| {
        let p = 3.0 - 2.0 * 2f64.sqrt();
        vec![closed("closed-form/welfare-flat-optimum", cw_flat(p), 9.0 - 6.0 * 2f64.sqrt(), o)]
    }),
    ("closed-form/welfare-two-price", |o| {
        let p2 = 3.0 - 7.5f64.sqrt();
        vec![closed("closed-form/welfare-two-price", cw(&[0.0, p2]), 6.0 - 30f64.sqrt(), o)]
    }),
    ("closed-form/revenue-flat-optimum", |o| {
        let p = 3.0 - 6f64.sqrt();
        vec![closed("closed-form/revenue-flat-optimum", cr_flat(p), 15.0 - 6.0 * 6f64.sqrt(), o)]
    }),
    ("closed-form/revenue-two-price", |o| {
        let p2 = 3.0 - (47.0f64 / 8.0).sqrt();
        vec![closed("closed-form/revenue-two-price", cr(&[0.5, p2]), 10.0 - 94f64.sqrt(), o)]
    }),
    ("closed-form/revenue-half-price", |o| {
        vec![closed("closed-form/revenue-half-price", cr_flat(0.5), 0.3, o)]
    }),
    ("optimize/flat-welfare", |o| {
        let (m, u) = warmup();
        let r = optimize_flat(&m, &u, 1.0, &SearchConfig::default()).unwrap();
        vec![
            closed("optimize/flat-welfare-value", r.objective_value, 9.0 - 6.0 * 2f64.sqrt(), o),
            fixed("optimize/flat-welfare-price", r.schedule.prices()[0], 3.0 - 2.0 * 2f64.sqrt(), ARGMAX_TOL),
        ]
    }),
    ("optimize/flat-revenue", |o| {
        let (m, u) = warmup();
        let r = optimize_flat(&m, &u, 0.0, &SearchConfig::default()).unwrap();
        vec![
            closed("optimize/flat-revenue-value", r.objective_value, 15.0 - 6.0 * 6f64.sqrt(), o),
            fixed("optimize/flat-revenue-price", r.schedule.prices()[0], 3.0 - 6f64.sqrt(), ARGMAX_TOL),
        ]
    }),
    ("optimize/multi-welfare", |o| {
        let (m, u) = warmup();
        let r = optimize_multi(&m, &u, 1.0, &SearchConfig::default()).unwrap();
        let p = r.schedule.prices();
        vec![
            closed("optimize/multi-welfare-value", r.objective_value, 6.0 - 30f64.sqrt(), o),
            fixed("optimize/multi-welfare-price-short", p[0], 0.0, ARGMAX_TOL),
            fixed("optimize/multi-welfare-price-long", p[1], 3.0 - 7.5f64.sqrt(), ARGMAX_TOL),
        ]
    }),
    ("optimize/multi-revenue", |o| {
        let (m, u) = warmup();
        let r = optimize_multi(&m, &u, 0.0, &SearchConfig::default()).unwrap();
        let p = r.schedule.prices();
        vec![
            closed("optimize/multi-revenue-value", r.objective_value, 10.0 - 94f64.sqrt(), o),
            fixed("optimize/multi-revenue-price-short", p[0], 0.5, ARGMAX_TOL),
            fixed("optimize/multi-revenue-price-long", p[1], 3.0 - (47.0f64 / 8.0).sqrt(), ARGMAX_TOL),
        ]
    }),
    ("single-from-multi/welfare", |_| {
        let (m, u) = warmup();
        let s = best_single_from_multi(&m, &u, &[0.0, 3.0 - 7.5f64.sqrt()], 1.0).unwrap();
        // quoted to three decimals
        vec![
            fixed("single-from-multi/welfare-value", s.flat_value, 0.510, 5e-4),
            fixed("single-from-multi/welfare-index", s.index as f64, 1.0, 0.0),
        ]
    }),
    ("single-from-multi/revenue", |_| {
        let (m, u) = warmup();
        let p2 = 3.0 - (47.0f64 / 8.0).sqrt();
        let s = best_single_from_multi(&m, &u, &[0.5, p2], 0.0).unwrap();
        vec![
            fixed("single-from-multi/revenue-long-price", cr_flat(p2), 0.302, 5e-4),
            fixed("single-from-multi/revenue-short-price", cr_flat(0.5), 0.3, 1e-12),
            fixed("single-from-multi/revenue-value", s.flat_value, 0.302, 5e-4),
        ]
    }),
    ("rho/1-2", |_| {
        let (q, f) = rho_exact(1, 2);
        vec![exact("rho/1-2", q, Q::new(6, 7), f)]
    }),
    ("rho/1-3", |_| {
        let (q, f) = rho_exact(1, 3);
        vec![exact("rho/1-3", q, Q::new(4, 5), f)]
    }),
    ("rho/2-3", |_| {
        let (q, f) = rho_exact(2, 3);
        vec![exact("rho/2-3", q, Q::new(15, 16), f)]
    }),
    ("rho/unbounded", |_| {
        (1..=4)
            .map(|a| {
                let q = rho_unbounded_value(a, Q::new(1, 2));
                let f = rho_unbounded(a, 0.5).unwrap();
                exact("rho/unbounded-half", q, Q::new(i64::from(a) + 1, i64::from(a) + 2), f)
            })
            .collect()
    }),
    ("rho/long-second-length", |_| {
        [0.2, 0.5, 0.9]
            .map(|r1| {
                let far = rho(1, 1_000_000, r1, 1.0 - r1).unwrap();
                fixed("rho/long-second-length", far, 1.0 / (1.0 + r1), 1e-5)
            })
            .to_vec()
    }),
    ("h/2-3-6", |_| {
        let (q, f) = h_thirds(6, [0, 1, 1]);
        let c = h_corner_min(&thirds(6)).unwrap();
        vec![
            exact("h/2-3-6", q, Q::new(44, 49), f),
            fixed("h/2-3-6-corner-min", c.value, 44.0 / 49.0, 1e-12),
            fixed("h/2-3-6-witness-b2", c.witness.unwrap()[1], 1.0, 0.0),
        ]
    }),
    ("h/2-3-7", |_| {
        let (q0, f0) = h_thirds(7, [0, 0, 1]);
        let (q1, f1) = h_thirds(7, [0, 1, 1]);
        let c = h_corner_min(&thirds(7)).unwrap();
        vec![
            exact("h/2-3-7-b2-low", q0, Q::new(8, 9), f0),
            exact("h/2-3-7-b2-high", q1, Q::new(8, 9), f1),
            fixed("h/2-3-7-corner-min", c.value, 8.0 / 9.0, 1e-12),
        ]
    }),
    ("h/2-3-8", |_| {
        let (q, f) = h_thirds(8, [0, 0, 1]);
        let c = h_corner_min(&thirds(8)).unwrap();
        vec![
            exact("h/2-3-8", q, Q::new(78, 89), f),
            fixed("h/2-3-8-corner-min", c.value, 78.0 / 89.0, 1e-12),
            fixed("h/2-3-8-witness-b2", c.witness.unwrap()[1], 0.0, 0.0),
        ]
    }),
    ("h/constant-vector", |_| {
        let half = Q::new(1, 2);
        let q = h_value(&[2, 3, 6], &[Q::new(1, 3); 3], &[half; 3]);
        let f = h_value(&[2, 3, 6], &[1.0 / 3.0; 3], &[0.5; 3]);
        vec![exact("h/constant-vector", q, Q::from_integer(1), f)]
    }),
    ("fleet/lengths-bounded", |_| {
        // lengths at most c = 4 keep every load within a factor 4 of R
        let c = 4.0f64;
        let fleet = Fleet::new(
            vec![
                JobMix::single(1, 0.5).unwrap(),
                JobMix::new(vec![2, 4], vec![0.25, 0.25]).unwrap(),
                JobMix::single(4, 0.5).unwrap(),
            ],
            FleetMode::EqualR,
        )
        .unwrap();
        let b = fleet_bound(&fleet).unwrap().value;
        vec![at_least("fleet/lengths-bounded", b, (c - 1.0) / (c * c.ln()))]
    }),
    ("fleet/rates-bounded", |_| {
        // arrival probabilities at least c = 0.3
        let c = 0.3f64;
        let fleet = Fleet::new(
            [0.3, 0.55, 0.9].iter().map(|&r| JobMix::single(5, r).unwrap()).collect(),
            FleetMode::SharedLength,
        )
        .unwrap();
        let b = one_length_fleet_bound(&fleet).unwrap().value;
        vec![at_least("fleet/rates-bounded", b, (c - 1.0) / c.ln())]
    }),
    ("tight/r-near-one", |_| {
        let r = 0.99f64;
        let b = (1.0 / ((1.0 - r) * (1.0 - r))).round() as u32;
        let t = tight_bimodal_instance(1, b, r, 1.0 - r, 1e-4).unwrap();
        let trajectory = (r - r * r + 1.0) / (r * r - r * r * r + 1.0 + r);
        vec![fixed("tight/r-near-one", t.realized_ratio(1.0).unwrap(), trajectory, 0.02)]
    }),
    ("tight/six-sevenths", |_| {
        let t = tight_bimodal_instance(1, 2, 0.5, 0.5, 1e-4).unwrap();
        vec![fixed("tight/six-sevenths", t.realized_ratio(1.0).unwrap(), 6.0 / 7.0, 1e-3)]
    }),
    ("h0/equal-r", |_| {
        [2, 3, 4]
            .map(|n| {
                let (loads, tails) = harmonic_family_equal_r(n, 1e3);
                let h0 = h0_fleet_eval_tail(&loads, &tails).unwrap();
                fixed("h0/equal-r", h0, harmonic(n), 1e-2)
            })
            .to_vec()
    }),
    ("h0/shared-length", |_| {
        [2, 3, 4]
            .map(|n| {
                let (loads, tails) = harmonic_family_shared(n, 1e3);
                let h0 = h0_fleet_eval_tail(&loads, &tails).unwrap();
                fixed("h0/shared-length", h0, harmonic(n), 1e-2)
            })
            .to_vec()
    }),
    ("sim/zero-price-welfare", |o| {
        let (m, u) = warmup();
        let cfg = SimConfig::new(o.horizon, o.replications, o.seed);
        let r = simulate(SimModel::Single { mix: &m, dist: &u }, &PriceSchedule::Flat(0.0), &cfg).unwrap();
        vec![CheckResult {
            name: "sim/zero-price-welfare",
            rule: Rule::Simulated,
            expected: 0.5,
            actual: r.welfare.mean,
            tolerance: 3.0 * r.welfare.se,
            passed: r.welfare.covers(0.5, 3.0),
        }]
    }),
];

/// Names of all check groups, in run order.
pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.0).collect()
}

/// `f` selects a whole group (`h`, `rho`) or, when it contains a slash,
/// every check whose name starts with it (`h/2-3`).
fn matches_filter(name: &str, f: &str) -> bool {
    if f.contains('/') {
        name.starts_with(f)
    } else {
        name.split('/').next() == Some(f)
    }
}

pub fn run_suite(o: &SuiteOptions) -> Result<Vec<CheckResult>, CliError> {
    if !(o.tolerance >= 0.0) {
        return Err(CliError::Usage(format!("tolerance {} must be nonnegative", o.tolerance)));
    }
    let selected: Vec<&(&str, Run)> = CHECKS
        .iter()
        .filter(|(name, _)| o.filter.as_deref().is_none_or(|f| matches_filter(name, f)))
        .collect();
    if selected.is_empty() {
        return Err(CliError::Usage(format!(
            "no checks match filter {:?}",
            o.filter.as_deref().unwrap_or("")
        )));
    }
    Ok(selected.iter().flat_map(|(_, run)| run(o)).collect())
}

pub fn write_results(out: &mut dyn Write, results: &[CheckResult], csv_out: bool) -> Result<(), CliError> {
    if csv_out {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["check", "rule", "expected", "actual", "abs_error", "tolerance", "passed"])?;
        for r in results {
            w.write_record([
                r.name.to_string(),
                r.rule.name().to_string(),
                r.expected.to_string(),
                r.actual.to_string(),
                (r.actual - r.expected).abs().to_string(),
                r.tolerance.to_string(),
                u8::from(r.passed).to_string(),
            ])?;
        }
        w.flush()?;
        return Ok(());
    }
    writeln!(
        out,
        "{:<42} {:>8} {:>16} {:>16} {:>10} {:>10}  result",
        "check", "rule", "expected", "actual", "abs_err", "tol"
    )?;
    for r in results {
        writeln!(
            out,
            "{:<42} {:>8} {:>16.12} {:>16.12} {:>10.2e} {:>10.2e}  {}",
            r.name,
            r.rule.name(),
            r.expected,
            r.actual,
            (r.actual - r.expected).abs(),
            r.tolerance,
            if r.passed { "PASS" } else { "FAIL" }
        )?;
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    writeln!(out, "{} checks, {} failed", results.len(), failed)?;
    Ok(())
}
