//! Offline benchmarks for the correlated model, where each job class has its
//! own length and a deterministic value per step.

use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::steady::SteadyStateMetrics;
use crate::values::ValueDistribution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JobClass {
    pub prob: f64,
    pub length: u32,
    pub value: f64,
}

/// Job classes arriving at one server; at most one job arrives per step.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedClassList {
    classes: Vec<JobClass>,
}

impl CorrelatedClassList {
    pub fn new(classes: Vec<JobClass>) -> Result<Self> {
        for (k, c) in classes.iter().enumerate() {
            if !(c.prob > 0.0 && c.prob <= 1.0) {
                return Err(Error::InvalidClasses(format!(
                    "class {k} has arrival probability {} outside (0, 1]",
                    c.prob
                )));
            }
            if c.length == 0 {
                return Err(Error::InvalidClasses(format!("class {k} has length 0")));
            }
            if !c.value.is_finite() || c.value < 0.0 {
                return Err(Error::InvalidClasses(format!(
                    "class {k} has value {} (must be finite and nonnegative)",
                    c.value
                )));
            }
        }
        let total: f64 = classes.iter().map(|c| c.prob).sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::InvalidClasses(format!(
                "arrival probabilities sum to {total}, which exceeds 1"
            )));
        }
        Ok(Self { classes })
    }

    /// Splits a continuous (or any) value law into `points` equal-probability
    /// classes per length, each carrying its quantile-midpoint value.
    pub fn discretize(
        lengths: &[u32],
        probs: &[f64],
        dist: &ValueDistribution,
        points: usize,
    ) -> Result<Self> {
        if lengths.len() != probs.len() {
            return Err(Error::DimensionMismatch {
                what: "arrival probabilities",
                expected: lengths.len(),
                got: probs.len(),
            });
        }
        let points = points.max(1);
        let mut classes = Vec::with_capacity(lengths.len() * points);
        for (&length, &prob) in lengths.iter().zip(probs) {
            for k in 0..points {
                classes.push(JobClass {
                    prob: prob / points as f64,
                    length,
                    value: dist.quantile((k as f64 + 0.5) / points as f64),
                });
            }
        }
        Self::new(classes)
    }

    pub fn classes(&self) -> &[JobClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn arrival_prob(&self) -> f64 {
        self.classes.iter().map(|c| c.prob).sum()
    }

    pub fn max_length(&self) -> u32 {
        self.classes.iter().map(|c| c.length).max().unwrap_or(1)
    }

    /// Draws the class arriving at a free server from a uniform `u`.
    pub fn class_for(&self, u: f64) -> Option<usize> {
        let mut acc = 0.0;
        for (k, c) in self.classes.iter().enumerate() {
            acc += c.prob;
            if u < acc {
                return Some(k);
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    /// Upper bound on the long-run offline welfare per step.
    pub opt: f64,
    /// Accepted jobs per step for each class.
    pub x: Vec<f64>,
}

/// Solves `max sum x_j v_j a_j` s.t. `x_j <= r_j`, `sum x_j a_j <= 1`.
///
/// This is a fractional knapsack with capacity one, item weight `a_j` and
/// value density `v_j`, so filling in order of decreasing value is exact.
/// Equal values are broken by longer length first, then input order.
pub fn expected_lp(classes: &CorrelatedClassList) -> LpSolution {
    let cs = classes.classes();
    let mut order: Vec<usize> = (0..cs.len()).collect();
    order.sort_by(|&i, &j| {
        cs[j].value
            .total_cmp(&cs[i].value)
            .then(cs[j].length.cmp(&cs[i].length))
            .then(i.cmp(&j))
    });
    let mut capacity = 1.0;
    let mut x = vec![0.0; cs.len()];
    let mut opt = 0.0;
    for j in order {
        if capacity <= 0.0 {
            break;
        }
        let a = f64::from(cs[j].length);
        let take = cs[j].prob.min(capacity / a);
        x[j] = take;
        capacity -= take * a;
        opt += take * a * cs[j].value;
    }
    LpSolution { opt, x }
}

/// The flat price `Opt / 2`.
pub fn half_opt_price(classes: &CorrelatedClassList) -> f64 {
    expected_lp(classes).opt / 2.0
}

/// Long-run welfare and revenue per step at flat price `price`.
///
/// Same renewal argument as the independent model: from a free step, class
/// `j` arrives with `r_j` and is accepted iff `v_j >= price`.
pub fn correlated_metrics(classes: &CorrelatedClassList, price: f64) -> SteadyStateMetrics {
    let prices = vec![price; classes.len()];
    correlated_class_metrics(classes, &prices)
}

/// Best flat price and its objective. Acceptance only changes at class
/// values and revenue grows between them, so zero and the class values are
/// the only candidates. Ties go to the lowest price.
pub fn optimize_correlated_flat(classes: &CorrelatedClassList, lambda: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!(
            "objective weight {lambda} must lie in [0, 1]"
        )));
    }
    let mut candidates: Vec<f64> = classes.classes().iter().map(|c| c.value).collect();
    candidates.push(0.0);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut best = (candidates[0], f64::NEG_INFINITY);
    for p in candidates {
        let v = correlated_metrics(classes, p).objective(lambda);
        if v > best.1 {
            best = (p, v);
        }
    }
    Ok(best)
}

/// [`correlated_metrics`] with one price per class.
pub fn correlated_class_metrics(classes: &CorrelatedClassList, prices: &[f64]) -> SteadyStateMetrics {
    let mut welfare = 0.0;
    let mut revenue = 0.0;
    let mut busy = 0.0;
    let mut cycle = (1.0 - classes.arrival_prob()).max(0.0);
    let mut accept_prob = Vec::with_capacity(classes.len());
    for (c, &price) in classes.classes().iter().zip(prices) {
        let a = f64::from(c.length);
        if c.value >= price {
            welfare += c.prob * a * c.value;
            revenue += c.prob * a * price;
            busy += c.prob * a;
            cycle += c.prob * a;
            accept_prob.push(1.0);
        } else {
            cycle += c.prob;
            accept_prob.push(0.0);
        }
    }
    SteadyStateMetrics {
        welfare_per_step: welfare / cycle,
        revenue_per_step: revenue / cycle,
        accept_prob,
        occupancy: busy / cycle,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FleetHalfOpt {
    /// Welfare-maximizing price among the candidates.
    pub price: f64,
    /// Index of the server whose `Opt_i / 2` was chosen.
    pub server: usize,
    /// `Opt_i / 2` for every server.
    pub candidates: Vec<f64>,
    /// Fleet welfare per step for each candidate used as the shared price.
    pub welfare: Vec<f64>,
    pub opt_sum: f64,
}

/// Computes `Opt_i / 2` on every server and keeps the candidate with the
/// highest fleet welfare when posted on all servers.
pub fn fleet_half_opt_prices(servers: &[CorrelatedClassList]) -> Result<FleetHalfOpt> {
    if servers.is_empty() {
        return Err(Error::InvalidArgument("fleet has no servers".into()));
    }
    let opts: Vec<f64> = servers.iter().map(|s| expected_lp(s).opt).collect();
    let candidates: Vec<f64> = opts.iter().map(|o| o / 2.0).collect();
    let welfare: Vec<f64> = candidates
        .iter()
        .map(|&p| {
            servers
                .iter()
                .map(|s| correlated_metrics(s, p).welfare_per_step)
                .sum()
        })
        .collect();
    let mut server = 0;
    for k in 1..welfare.len() {
        if welfare[k] > welfare[server]
            || (welfare[k] == welfare[server] && candidates[k] < candidates[server])
        {
            server = k;
        }
    }
    Ok(FleetHalfOpt {
        price: candidates[server],
        server,
        candidates,
        welfare,
        opt_sum: opts.iter().sum(),
    })
}

/// A job that arrived at a given step of a realized trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceJob {
    /// One-based arrival step.
    pub step: u64,
    pub class: usize,
    pub length: u32,
    /// Total value of the job (length times value per step).
    pub value: f64,
}

/// Samples one arrival sequence of `horizon` steps.
pub fn sample_trace<R: Rng + ?Sized>(
    classes: &CorrelatedClassList,
    horizon: u64,
    rng: &mut R,
) -> Vec<TraceJob> {
    let mut jobs = Vec::new();
    for step in 1..=horizon {
        let u: f64 = rng.random();
        if let Some(k) = classes.class_for(u) {
            let c = classes.classes()[k];
            jobs.push(TraceJob {
                step,
                class: k,
                length: c.length,
                value: f64::from(c.length) * c.value,
            });
        }
    }
    jobs
}

/// Best total value of a non-overlapping selection of jobs, per step.
///
/// A job at step `t` of length `a` occupies steps `t..t+a` and must finish by
/// `horizon`; `OPT(t) = max(OPT(t+1), value + OPT(t+a))`.
pub fn offline_dp_oracle(trace: &[TraceJob], horizon: u64) -> f64 {
    if horizon == 0 {
        return 0.0;
    }
    let t_max = horizon as usize;
    let mut arrival: Vec<Option<(u32, f64)>> = vec![None; t_max + 2];
    for job in trace {
        let t = job.step as usize;
        if (1..=t_max).contains(&t) {
            // keep the better job if a trace lists two arrivals in one step
            let better = match arrival[t] {
                Some((_, v)) => job.value > v,
                None => true,
            };
            if better {
                arrival[t] = Some((job.length, job.value));
            }
        }
    }
    let mut best = vec![0.0f64; t_max + 2];
    for t in (1..=t_max).rev() {
        let mut v = best[t + 1];
        if let Some((a, value)) = arrival[t] {
            let end = t + a as usize;
            if end <= t_max + 1 {
                v = v.max(value + best[end]);
            }
        }
        best[t] = v;
    }
    best[1] / horizon as f64
}

/// Writes a trace as comma-separated `step,class,length,value` rows.
pub fn write_trace<W: Write>(mut out: W, trace: &[TraceJob]) -> std::io::Result<()> {
    writeln!(out, "step,class,length,value")?;
    for j in trace {
        writeln!(out, "{},{},{},{}", j.step, j.class, j.length, j.value)?;
    }
    Ok(())
}

/// Reads a trace written by [`write_trace`].
pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<TraceJob>> {
    let mut jobs = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::InvalidArgument(format!("trace line {}: {e}", n + 1)))?;
        let line = line.trim();
        if line.is_empty() || (n == 0 && line.starts_with("step")) {
            continue;
        }
        let bad = |what: &str| Error::InvalidArgument(format!("trace line {}: bad {what}", n + 1));
        let mut cols = line.split(',').map(str::trim);
        let step = cols.next().and_then(|c| c.parse().ok()).ok_or_else(|| bad("step"))?;
        let class = cols.next().and_then(|c| c.parse().ok()).ok_or_else(|| bad("class"))?;
        let length: u32 = cols.next().and_then(|c| c.parse().ok()).ok_or_else(|| bad("length"))?;
        let value: f64 = cols.next().and_then(|c| c.parse().ok()).ok_or_else(|| bad("value"))?;
        if length == 0 || !value.is_finite() {
            return Err(bad("job"));
        }
        jobs.push(TraceJob {
            step,
            class,
            length,
            value,
        });
    }
    Ok(jobs)
}
