//! Price search for single servers and fleets.
//!
//! All objectives are `lambda * welfare + (1 - lambda) * revenue`. For
//! discrete value laws the search is exact: only support atoms (plus `0` and
//! a reject-all price) can be optimal. Continuous laws are scanned on a grid
//! and every promising grid optimum is polished by golden-section search.

use std::cell::RefCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::steady::{
    fleet_metrics, fleet_multi_metrics, single_server_flat_metrics, single_server_metrics,
    Fleet, JobMix,
};
use crate::values::{ValueDistribution, DEFAULT_GRID_POINTS};

/// Prices posted per time step.
#[derive(Debug, Clone, PartialEq)]
pub enum PriceSchedule {
    Flat(f64),
    PerLength(Vec<f64>),
    PerServer(Vec<f64>),
    PerServerPerLength(Vec<Vec<f64>>),
}

impl PriceSchedule {
    /// Price charged to class `class` on server `server`.
    pub fn price(&self, server: usize, class: usize) -> f64 {
        match self {
            Self::Flat(p) => *p,
            Self::PerLength(ps) => ps[class],
            Self::PerServer(ps) => ps[server],
            Self::PerServerPerLength(ps) => ps[server][class],
        }
    }

    /// Per-length prices for a single server with `n` lengths.
    pub fn for_mix(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            Self::Flat(p) => Ok(vec![*p; n]),
            Self::PerLength(ps) if ps.len() == n => Ok(ps.clone()),
            Self::PerLength(ps) => Err(Error::DimensionMismatch {
                what: "per-length prices",
                expected: n,
                got: ps.len(),
            }),
            _ => Err(Error::InvalidArgument(
                "a single server takes a flat or per-length schedule".into(),
            )),
        }
    }

    /// Per-server, per-length prices for `fleet`.
    pub fn for_fleet(&self, fleet: &Fleet) -> Result<Vec<Vec<f64>>> {
        let servers = fleet.servers();
        match self {
            Self::Flat(p) => Ok(servers.iter().map(|m| vec![*p; m.len()]).collect()),
            Self::PerServer(ps) => {
                if ps.len() != servers.len() {
                    return Err(Error::DimensionMismatch {
                        what: "per-server prices",
                        expected: servers.len(),
                        got: ps.len(),
                    });
                }
                Ok(servers.iter().zip(ps).map(|(m, p)| vec![*p; m.len()]).collect())
            }
            Self::PerServerPerLength(ps) => {
                if ps.len() != servers.len() {
                    return Err(Error::DimensionMismatch {
                        what: "per-server price lists",
                        expected: servers.len(),
                        got: ps.len(),
                    });
                }
                for (m, p) in servers.iter().zip(ps) {
                    if m.len() != p.len() {
                        return Err(Error::DimensionMismatch {
                            what: "per-length prices",
                            expected: m.len(),
                            got: p.len(),
                        });
                    }
                }
                Ok(ps.clone())
            }
            Self::PerLength(ps) => {
                // same per-length list on every server with identical length sets
                servers.iter().map(|m| Self::PerLength(ps.clone()).for_mix(m.len())).collect()
            }
        }
    }

    pub fn prices(&self) -> Vec<f64> {
        match self {
            Self::Flat(p) => vec![*p],
            Self::PerLength(ps) | Self::PerServer(ps) => ps.clone(),
            Self::PerServerPerLength(ps) => ps.iter().flatten().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMethod {
    Exhaustive,
    CoordinateAscent,
    GridRefine,
}

impl std::fmt::Display for SearchMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Exhaustive => "exhaustive",
            Self::CoordinateAscent => "coordinate-ascent",
            Self::GridRefine => "grid+refine",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Grid size for continuous price ranges.
    pub grid_points: usize,
    /// Largest number of candidate tuples searched exhaustively.
    pub exhaustive_budget: usize,
    /// Random restarts of coordinate ascent, on top of the flat-optimum start.
    pub restarts: usize,
    pub max_sweeps: usize,
    /// A sweep improving the objective by less than this ends the ascent.
    pub sweep_tol: f64,
    /// Relative bracket width at which golden-section search stops.
    pub refine_tol: f64,
    /// Local grid optima polished per one-dimensional search.
    pub refine_count: usize,
    pub seed: u64,
    /// Use coordinate ascent even when exhaustive search fits the budget.
    pub force_coordinate_ascent: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            grid_points: DEFAULT_GRID_POINTS,
            exhaustive_budget: 1_000_000,
            restarts: 8,
            max_sweeps: 200,
            sweep_tol: 1e-10,
            refine_tol: 1e-12,
            refine_count: 4,
            seed: 0,
            force_coordinate_ascent: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub schedule: PriceSchedule,
    pub objective_value: f64,
    pub lambda: f64,
    pub method: SearchMethod,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "objective weight {lambda} must lie in [0, 1]"
        )))
    }
}

/// Maximizes `f` over prices for `dist`. Ties go to the lowest price.
fn maximize_price<F>(dist: &ValueDistribution, cfg: &SearchConfig, f: F) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let grid = dist.support_candidates(cfg.grid_points);
    let values: Vec<f64> = grid.iter().map(|&p| f(p)).collect();
    let mut best = 0;
    for k in 1..values.len() {
        if values[k] > values[best] {
            best = k;
        }
    }
    let (mut best_p, mut best_v) = (grid[best], values[best]);
    if dist.is_discrete() || grid.len() < 3 {
        return (best_p, best_v);
    }

    let last = grid.len() - 1;
    let mut peaks: Vec<usize> = (0..=last)
        .filter(|&k| {
            let left = k == 0 || values[k] >= values[k - 1];
            let right = k == last || values[k] >= values[k + 1];
            left && right
        })
        .collect();
    peaks.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    peaks.truncate(cfg.refine_count.max(1));
    for k in peaks {
        let lo = grid[k.saturating_sub(1)];
        let hi = grid[(k + 1).min(last)];
        let (p, v) = golden_section_max(&f, lo, hi, cfg.refine_tol);
        if v > best_v || (v == best_v && p < best_p) {
            best_p = p;
            best_v = v;
        }
    }
    (best_p, best_v)
}

/// Golden-section search for the maximum of a unimodal function on `[lo, hi]`.
pub fn golden_section_max<F>(f: &F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if hi - lo <= tol * hi.abs().max(1.0) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn flat_objective(mix: &JobMix, dist: &ValueDistribution, lambda: f64, p: f64) -> f64 {
    single_server_flat_metrics(mix, dist, p)
        .map(|m| m.objective(lambda))
        .unwrap_or(f64::NEG_INFINITY)
}

fn multi_objective(mix: &JobMix, dist: &ValueDistribution, lambda: f64, prices: &[f64]) -> f64 {
    single_server_metrics(mix, dist, prices)
        .map(|m| m.objective(lambda))
        .unwrap_or(f64::NEG_INFINITY)
}

/// Best single price for all job lengths.
pub fn optimize_flat(
    mix: &JobMix,
    dist: &ValueDistribution,
    lambda: f64,
    cfg: &SearchConfig,
) -> Result<OptimizationResult> {
    check_lambda(lambda)?;
    let (p, _) = maximize_price(dist, cfg, |p| flat_objective(mix, dist, lambda, p));
    Ok(OptimizationResult {
        schedule: PriceSchedule::Flat(p),
        objective_value: flat_objective(mix, dist, lambda, p),
        lambda,
        method: if dist.is_discrete() {
            SearchMethod::Exhaustive
        } else {
            SearchMethod::GridRefine
        },
    })
}

/// Best price per job length.
///
/// Discrete laws whose candidate tuples fit `cfg.exhaustive_budget` are
/// searched exhaustively. Everything else uses coordinate ascent. The
/// objective is a ratio `N(p) / D(p)` of sums with one term per length, so a
/// point where no single coordinate can improve also maximizes the separable
/// `N - c D` at `c = N / D`, which makes it a global optimum whenever each
/// one-dimensional step is solved exactly.
pub fn optimize_multi(
    mix: &JobMix,
    dist: &ValueDistribution,
    lambda: f64,
    cfg: &SearchConfig,
) -> Result<OptimizationResult> {
    check_lambda(lambda)?;
    if mix.len() == 1 {
        let flat = optimize_flat(mix, dist, lambda, cfg)?;
        let PriceSchedule::Flat(p) = flat.schedule else { unreachable!() };
        return Ok(OptimizationResult {
            schedule: PriceSchedule::PerLength(vec![p]),
            ..flat
        });
    }

    let candidates = dist.support_candidates(cfg.grid_points);
    let tuples = (candidates.len() as f64).powi(mix.len() as i32);
    let (prices, method) = if dist.is_discrete()
        && !cfg.force_coordinate_ascent
        && tuples <= cfg.exhaustive_budget as f64
    {
        (
            exhaustive_multi(mix, dist, lambda, &candidates),
            SearchMethod::Exhaustive,
        )
    } else {
        (
            coordinate_ascent(mix, dist, lambda, cfg),
            SearchMethod::CoordinateAscent,
        )
    };
    let objective_value = multi_objective(mix, dist, lambda, &prices);
    Ok(OptimizationResult {
        schedule: PriceSchedule::PerLength(prices),
        objective_value,
        lambda,
        method,
    })
}

struct ClassTable {
    // per candidate: lambda-weighted numerator term and denominator reduction
    gain: Vec<f64>,
    slack: Vec<f64>,
}

fn exhaustive_multi(
    mix: &JobMix,
    dist: &ValueDistribution,
    lambda: f64,
    candidates: &[f64],
) -> Vec<f64> {
    let tables: Vec<ClassTable> = mix
        .lengths()
        .iter()
        .zip(mix.probs())
        .map(|(&a, &r)| {
            let a = a as f64;
            let gain = candidates
                .iter()
                .map(|&p| {
                    a * r
                        * (lambda * dist.partial_expectation(p)
                            + (1.0 - lambda) * dist.tail_prob(p) * p)
                })
                .collect();
            let slack = candidates
                .iter()
                .map(|&p| (a - 1.0) * r * dist.cdf_strict(p))
                .collect();
            ClassTable { gain, slack }
        })
        .collect();

    struct Search<'a> {
        tables: &'a [ClassTable],
        base: f64,
        current: Vec<usize>,
        best: Vec<usize>,
        best_value: f64,
    }

    impl Search<'_> {
        fn descend(&mut self, depth: usize, gain: f64, slack: f64) {
            if depth == self.tables.len() {
                let v = gain / (self.base - slack);
                if v > self.best_value {
                    self.best_value = v;
                    self.best.copy_from_slice(&self.current);
                }
                return;
            }
            let t = &self.tables[depth];
            for k in 0..t.gain.len() {
                self.current[depth] = k;
                self.descend(depth + 1, gain + t.gain[k], slack + t.slack[k]);
            }
        }
    }

    let n = mix.len();
    let mut search = Search {
        tables: &tables,
        base: mix.load() + mix.idle_prob(),
        current: vec![0; n],
        best: vec![0; n],
        best_value: f64::NEG_INFINITY,
    };
    search.descend(0, 0.0, 0.0);
    search.best.iter().map(|&k| candidates[k]).collect()
}

fn coordinate_ascent(
    mix: &JobMix,
    dist: &ValueDistribution,
    lambda: f64,
    cfg: &SearchConfig,
) -> Vec<f64> {
    let n = mix.len();
    let (flat_p, _) = maximize_price(dist, cfg, |p| flat_objective(mix, dist, lambda, p));
    let candidates = dist.support_candidates(cfg.grid_points);
    let lo = dist.min_support();
    let hi = dist.max_support();

    let mut starts = vec![vec![flat_p; n]];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.restarts {
        let start = (0..n)
            .map(|_| {
                if dist.is_discrete() {
                    candidates[rng.random_range(0..candidates.len())]
                } else {
                    rng.random_range(lo..=hi)
                }
            })
            .collect();
        starts.push(start);
    }

    let mut best = starts[0].clone();
    let mut best_value = multi_objective(mix, dist, lambda, &best);
    for mut prices in starts {
        let mut value = multi_objective(mix, dist, lambda, &prices);
        for _ in 0..cfg.max_sweeps {
            let before = value;
            for i in 0..n {
                let trial = RefCell::new(prices.clone());
                let (p, v) = maximize_price(dist, cfg, |p| {
                    let mut t = trial.borrow_mut();
                    t[i] = p;
                    multi_objective(mix, dist, lambda, &t)
                });
                if v > value {
                    prices[i] = p;
                    value = v;
                }
            }
            if value - before < cfg.sweep_tol {
                break;
            }
        }
        if value > best_value {
            best_value = value;
            best = prices;
        }
    }
    best
}

/// Outcome of reusing one multi-price as the single price.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleFromMulti {
    /// Index of the chosen price in the multi-price list.
    pub index: usize,
    pub price: f64,
    pub flat_value: f64,
    pub multi_value: f64,
    /// `flat_value / multi_value`, or 1 when the multi value is zero.
    pub ratio: f64,
}

/// Evaluates each per-length price as the flat price and keeps the best.
pub fn best_single_from_multi(
    mix: &JobMix,
    dist: &ValueDistribution,
    prices: &[f64],
    lambda: f64,
) -> Result<SingleFromMulti> {
    check_lambda(lambda)?;
    let multi_value = single_server_metrics(mix, dist, prices)?.objective(lambda);
    let mut best: Option<(usize, f64)> = None;
    for (i, &p) in prices.iter().enumerate() {
        let v = single_server_flat_metrics(mix, dist, p)?.objective(lambda);
        best = match best {
            Some((j, bv)) if bv > v || (bv == v && prices[j] <= p) => Some((j, bv)),
            _ => Some((i, v)),
        };
    }
    let (index, flat_value) = best.expect("mix has at least one length");
    Ok(SingleFromMulti {
        index,
        price: prices[index],
        flat_value,
        multi_value,
        ratio: if multi_value > 0.0 {
            flat_value / multi_value
        } else {
            1.0
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FleetScheme {
    /// One price shared by every server.
    Flat,
    /// One price per server.
    PerServer,
    /// One price per length on every server.
    PerServerPerLength,
}

fn fleet_objective(fleet: &Fleet, dist: &ValueDistribution, lambda: f64, prices: &[f64]) -> f64 {
    fleet_metrics(fleet, dist, prices)
        .map(|m| m.objective(lambda))
        .unwrap_or(f64::NEG_INFINITY)
}

/// Price search for a fleet. The fleet objective is a sum of per-server
/// terms, so per-server schemes decompose into independent searches.
pub fn optimize_fleet(
    fleet: &Fleet,
    dist: &ValueDistribution,
    lambda: f64,
    scheme: FleetScheme,
    cfg: &SearchConfig,
) -> Result<OptimizationResult> {
    check_lambda(lambda)?;
    let discrete_method = if dist.is_discrete() {
        SearchMethod::Exhaustive
    } else {
        SearchMethod::GridRefine
    };
    match scheme {
        FleetScheme::Flat => {
            let n = fleet.len();
            let (p, _) =
                maximize_price(dist, cfg, |p| fleet_objective(fleet, dist, lambda, &vec![p; n]));
            Ok(OptimizationResult {
                schedule: PriceSchedule::Flat(p),
                objective_value: fleet_objective(fleet, dist, lambda, &vec![p; n]),
                lambda,
                method: discrete_method,
            })
        }
        FleetScheme::PerServer => {
            let mut prices = Vec::with_capacity(fleet.len());
            for mix in fleet.servers() {
                let r = optimize_flat(mix, dist, lambda, cfg)?;
                let PriceSchedule::Flat(p) = r.schedule else { unreachable!() };
                prices.push(p);
            }
            Ok(OptimizationResult {
                objective_value: fleet_objective(fleet, dist, lambda, &prices),
                schedule: PriceSchedule::PerServer(prices),
                lambda,
                method: discrete_method,
            })
        }
        FleetScheme::PerServerPerLength => {
            let mut prices = Vec::with_capacity(fleet.len());
            let mut method = discrete_method;
            for mix in fleet.servers() {
                let r = optimize_multi(mix, dist, lambda, cfg)?;
                if r.method == SearchMethod::CoordinateAscent {
                    method = r.method;
                }
                let PriceSchedule::PerLength(p) = r.schedule else { unreachable!() };
                prices.push(p);
            }
            let objective_value = fleet_multi_metrics(fleet, dist, &prices)?.objective(lambda);
            Ok(OptimizationResult {
                schedule: PriceSchedule::PerServerPerLength(prices),
                objective_value,
                lambda,
                method,
            })
        }
    }
}

/// Evaluates each per-server price as the shared fleet price and keeps the best.
pub fn best_shared_from_per_server(
    fleet: &Fleet,
    dist: &ValueDistribution,
    prices: &[f64],
    lambda: f64,
) -> Result<SingleFromMulti> {
    check_lambda(lambda)?;
    let multi_value = fleet_metrics(fleet, dist, prices)?.objective(lambda);
    let n = fleet.len();
    let mut best: Option<(usize, f64)> = None;
    for (i, &p) in prices.iter().enumerate() {
        let v = fleet_metrics(fleet, dist, &vec![p; n])?.objective(lambda);
        best = match best {
            Some((j, bv)) if bv > v || (bv == v && prices[j] <= p) => Some((j, bv)),
            _ => Some((i, v)),
        };
    }
    let (index, flat_value) = best.expect("fleet has at least one server");
    Ok(SingleFromMulti {
        index,
        price: prices[index],
        flat_value,
        multi_value,
        ratio: if multi_value > 0.0 {
            flat_value / multi_value
        } else {
            1.0
        },
    })
}
