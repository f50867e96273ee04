//! Monte Carlo simulation of posted-price admission.
//!
//! Each step, a free server draws at most one job; the job is accepted iff its
//! value per step is at least the posted price, and an accepted job of length
//! `a` blocks the server for the current step and the next `a - 1`. Arrivals
//! at a busy server are lost. Replications run on independent ChaCha streams
//! derived from one seed, so results are reproducible bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::offline::{correlated_class_metrics, CorrelatedClassList};
use crate::optimize::PriceSchedule;
use crate::steady::{fleet_multi_metrics, single_server_metrics, Fleet, JobMix, SteadyStateMetrics};
use crate::values::ValueDistribution;

/// Normal quantile used for the two-sided 95% interval.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub horizon: u64,
    pub replications: usize,
    pub seed: u64,
    /// Leading steps excluded from the averages.
    pub warmup: u64,
}

impl SimConfig {
    /// Config with the default warmup of 1% of the horizon.
    pub fn new(horizon: u64, replications: usize, seed: u64) -> Self {
        Self {
            horizon,
            replications,
            seed,
            warmup: horizon / 100,
        }
    }

    fn validate(&self, max_length: u32) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidSimConfig("need at least one replication".into()));
        }
        if self.horizon < 10 * u64::from(max_length) {
            return Err(Error::InvalidSimConfig(format!(
                "horizon {} is shorter than 10x the longest job ({max_length})",
                self.horizon
            )));
        }
        if self.warmup >= self.horizon {
            return Err(Error::InvalidSimConfig(format!(
                "warmup {} must be below the horizon {}",
                self.warmup, self.horizon
            )));
        }
        Ok(())
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::new(1_000_000, 30, 0)
    }
}

/// What is being simulated.
#[derive(Debug, Clone, Copy)]
pub enum SimModel<'a> {
    Single {
        mix: &'a JobMix,
        dist: &'a ValueDistribution,
    },
    Fleet {
        fleet: &'a Fleet,
        dist: &'a ValueDistribution,
    },
    Correlated(&'a CorrelatedClassList),
    CorrelatedFleet(&'a [CorrelatedClassList]),
}

impl SimModel<'_> {
    fn max_length(&self) -> u32 {
        match self {
            Self::Single { mix, .. } => mix.max_length(),
            Self::Fleet { fleet, .. } => fleet.max_length(),
            Self::Correlated(c) => c.max_length(),
            Self::CorrelatedFleet(cs) => cs.iter().map(|c| c.max_length()).max().unwrap_or(1),
        }
    }

    /// Exact steady-state metrics of this model under `schedule`.
    pub fn closed_form(&self, schedule: &PriceSchedule) -> Result<SteadyStateMetrics> {
        match *self {
            Self::Single { mix, dist } => single_server_metrics(mix, dist, &schedule.for_mix(mix.len())?),
            Self::Fleet { fleet, dist } => fleet_multi_metrics(fleet, dist, &schedule.for_fleet(fleet)?),
            Self::Correlated(c) => Ok(correlated_class_metrics(c, &correlated_prices(c, schedule, 0)?)),
            Self::CorrelatedFleet(cs) => {
                let mut total = SteadyStateMetrics {
                    welfare_per_step: 0.0,
                    revenue_per_step: 0.0,
                    accept_prob: Vec::new(),
                    occupancy: 0.0,
                };
                for (j, c) in cs.iter().enumerate() {
                    let m = correlated_class_metrics(c, &correlated_prices(c, schedule, j)?);
                    total.welfare_per_step += m.welfare_per_step;
                    total.revenue_per_step += m.revenue_per_step;
                    total.occupancy += m.occupancy;
                    total.accept_prob.extend(m.accept_prob);
                }
                total.occupancy /= cs.len().max(1) as f64;
                Ok(total)
            }
        }
    }
}

fn correlated_prices(
    classes: &CorrelatedClassList,
    schedule: &PriceSchedule,
    server: usize,
) -> Result<Vec<f64>> {
    let n = classes.len();
    match schedule {
        PriceSchedule::Flat(p) => Ok(vec![*p; n]),
        PriceSchedule::PerLength(ps) if server == 0 && ps.len() == n => Ok(ps.clone()),
        PriceSchedule::PerServer(ps) if server < ps.len() => Ok(vec![ps[server]; n]),
        PriceSchedule::PerServerPerLength(ps) if server < ps.len() && ps[server].len() == n => {
            Ok(ps[server].clone())
        }
        _ => Err(Error::InvalidArgument(
            "price schedule does not match the job classes".into(),
        )),
    }
}

// One server's arrival law and prices, flattened for the hot loop.
struct ServerPlan<'a> {
    cum_probs: Vec<f64>,
    lengths: Vec<u32>,
    prices: Vec<f64>,
    values: ValueSource<'a>,
}

enum ValueSource<'a> {
    Random(&'a ValueDistribution),
    Fixed(Vec<f64>),
}

fn cumulative(probs: impl Iterator<Item = f64>) -> Vec<f64> {
    probs
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect()
}

fn plans<'a>(model: &SimModel<'a>, schedule: &PriceSchedule) -> Result<Vec<ServerPlan<'a>>> {
    let from_mix = |mix: &JobMix, dist: &'a ValueDistribution, prices: Vec<f64>| ServerPlan {
        cum_probs: cumulative(mix.probs().iter().copied()),
        lengths: mix.lengths().to_vec(),
        prices,
        values: ValueSource::Random(dist),
    };
    let from_classes = |c: &CorrelatedClassList, prices: Vec<f64>| ServerPlan {
        cum_probs: cumulative(c.classes().iter().map(|k| k.prob)),
        lengths: c.classes().iter().map(|k| k.length).collect(),
        prices,
        values: ValueSource::Fixed(c.classes().iter().map(|k| k.value).collect()),
    };
    let out = match *model {
        SimModel::Single { mix, dist } => {
            let prices = schedule.for_mix(mix.len())?;
            crate::steady::check_prices(&prices)?;
            vec![from_mix(mix, dist, prices)]
        }
        SimModel::Fleet { fleet, dist } => {
            let prices = schedule.for_fleet(fleet)?;
            for p in &prices {
                crate::steady::check_prices(p)?;
            }
            fleet
                .servers()
                .iter()
                .zip(prices)
                .map(|(m, p)| from_mix(m, dist, p))
                .collect()
        }
        SimModel::Correlated(c) => vec![from_classes(c, correlated_prices(c, schedule, 0)?)],
        SimModel::CorrelatedFleet(cs) => {
            if cs.is_empty() {
                return Err(Error::InvalidArgument("fleet has no servers".into()));
            }
            cs.iter()
                .enumerate()
                .map(|(j, c)| Ok(from_classes(c, correlated_prices(c, schedule, j)?)))
                .collect::<Result<_>>()?
        }
    };
    Ok(out)
}

/// `k` deterministic generators on disjoint ChaCha streams of one seed.
pub fn seeded_streams(seed: u64, k: usize) -> Vec<ChaCha8Rng> {
    (0..k)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            rng
        })
        .collect()
}

/// Per-step averages from one replication.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReplicationStats {
    pub welfare: f64,
    pub revenue: f64,
    /// Accepted value minus payments, per step.
    pub surplus: f64,
    pub occupancy: f64,
}

/// Mean over replications with its standard error and 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// Standard error across replications, or the batch-means error when
    /// there is only one replication.
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Batch-means standard error over blocks pooled from all replications.
    pub batch_se: f64,
}

impl Estimate {
    fn new(samples: &[f64], batch_se: f64) -> Self {
        let k = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / k;
        let se = if samples.len() > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        } else {
            batch_se
        };
        Self {
            mean,
            se,
            ci_low: mean - Z95 * se,
            ci_high: mean + Z95 * se,
            batch_se,
        }
    }

    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (value - self.mean).abs() <= k * self.se
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub welfare: Estimate,
    pub revenue: Estimate,
    pub occupancy: Estimate,
    /// Arrivals to a free server after warmup, per class (server by server).
    pub offer_counts: Vec<u64>,
    /// Accepted jobs after warmup, per class.
    pub accept_counts: Vec<u64>,
    pub replications: Vec<ReplicationStats>,
}

#[derive(Default)]
struct BlockSums {
    welfare: Vec<f64>,
    revenue: Vec<f64>,
    busy: Vec<f64>,
}

struct RepOutput {
    stats: ReplicationStats,
    offers: Vec<u64>,
    accepts: Vec<u64>,
    blocks: BlockSums,
}

fn run_replication(
    plans: &[ServerPlan<'_>],
    cfg: &SimConfig,
    block_len: u64,
    mut rng: ChaCha8Rng,
) -> RepOutput {
    let window = cfg.horizon - cfg.warmup;
    let n_blocks = window.div_ceil(block_len) as usize;
    let mut blocks = BlockSums {
        welfare: vec![0.0; n_blocks],
        revenue: vec![0.0; n_blocks],
        busy: vec![0.0; n_blocks],
    };
    let mut offers = Vec::new();
    let mut accepts = Vec::new();
    let (mut welfare, mut revenue, mut surplus, mut busy) = (0.0, 0.0, 0.0, 0u64);

    for plan in plans {
        let base = offers.len();
        offers.resize(base + plan.lengths.len(), 0);
        accepts.resize(base + plan.lengths.len(), 0);
        let mut t = 0u64;
        while t < cfg.horizon {
            let u: f64 = rng.random();
            let Some(k) = plan.cum_probs.iter().position(|&c| u < c) else {
                t += 1;
                continue;
            };
            let value = match &plan.values {
                ValueSource::Random(dist) => dist.quantile(rng.random()),
                ValueSource::Fixed(vs) => vs[k],
            };
            let counted = t >= cfg.warmup;
            if counted {
                offers[base + k] += 1;
            }
            let price = plan.prices[k];
            if value < price {
                t += 1;
                continue;
            }
            let a = u64::from(plan.lengths[k]);
            let overlap = (t + a).min(cfg.horizon).saturating_sub(t.max(cfg.warmup));
            busy += overlap;
            if counted {
                accepts[base + k] += 1;
                let af = a as f64;
                let w = af * value;
                let r = af * price;
                welfare += w;
                revenue += r;
                surplus += af * (value - price);
                let b = ((t - cfg.warmup) / block_len) as usize;
                blocks.welfare[b] += w;
                blocks.revenue[b] += r;
                blocks.busy[b] += overlap as f64;
            } else if overlap > 0 {
                blocks.busy[0] += overlap as f64;
            }
            t += a;
        }
    }

    let w = window as f64;
    RepOutput {
        stats: ReplicationStats {
            welfare: welfare / w,
            revenue: revenue / w,
            surplus: surplus / w,
            occupancy: busy as f64 / (w * plans.len() as f64),
        },
        offers,
        accepts,
        blocks,
    }
}

fn batch_se(blocks: &[f64], block_steps: &[f64]) -> f64 {
    let means: Vec<f64> = blocks.iter().zip(block_steps).map(|(s, n)| s / n).collect();
    if means.len() < 2 {
        return 0.0;
    }
    let k = means.len() as f64;
    let mean = means.iter().sum::<f64>() / k;
    let var = means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (var / k).sqrt()
}

/// Simulates `model` under `schedule`.
///
/// Rewards are credited to the step where the job is accepted. Batch-means
/// blocks are `max(100 * max_length, 1000)` steps long, which spans many
/// regenerations at the idle state.
pub fn simulate(model: SimModel<'_>, schedule: &PriceSchedule, cfg: &SimConfig) -> Result<SimResult> {
    let max_length = model.max_length();
    cfg.validate(max_length)?;
    let plans = plans(&model, schedule)?;
    let block_len = (100 * u64::from(max_length)).max(1000);

    let streams = seeded_streams(cfg.seed, cfg.replications);
    let outputs: Vec<RepOutput> = streams
        .into_par_iter()
        .map(|rng| run_replication(&plans, cfg, block_len, rng))
        .collect();

    let window = cfg.horizon - cfg.warmup;
    let steps: Vec<f64> = (0..window.div_ceil(block_len))
        .map(|b| (window - b * block_len).min(block_len) as f64)
        .collect();
    let mut pooled = BlockSums::default();
    let mut pooled_steps = Vec::new();
    let servers = plans.len() as f64;
    for o in &outputs {
        pooled.welfare.extend_from_slice(&o.blocks.welfare);
        pooled.revenue.extend_from_slice(&o.blocks.revenue);
        pooled.busy.extend(o.blocks.busy.iter().map(|b| b / servers));
        pooled_steps.extend_from_slice(&steps);
    }

    let stats: Vec<ReplicationStats> = outputs.iter().map(|o| o.stats).collect();
    let pick = |f: fn(&ReplicationStats) -> f64| stats.iter().map(f).collect::<Vec<_>>();
    let mut offer_counts = vec![0u64; outputs[0].offers.len()];
    let mut accept_counts = vec![0u64; outputs[0].accepts.len()];
    for o in &outputs {
        for (acc, x) in offer_counts.iter_mut().zip(&o.offers) {
            *acc += x;
        }
        for (acc, x) in accept_counts.iter_mut().zip(&o.accepts) {
            *acc += x;
        }
    }
    Ok(SimResult {
        welfare: Estimate::new(&pick(|s| s.welfare), batch_se(&pooled.welfare, &pooled_steps)),
        revenue: Estimate::new(&pick(|s| s.revenue), batch_se(&pooled.revenue, &pooled_steps)),
        occupancy: Estimate::new(&pick(|s| s.occupancy), batch_se(&pooled.busy, &pooled_steps)),
        offer_counts,
        accept_counts,
        replications: stats,
    })
}
