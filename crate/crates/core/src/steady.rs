//! Closed-form long-run welfare and revenue per time step.
//!
//! A free server sees a job of length `a_i` with probability `r_i` and no job
//! with probability `1 - R`. The process regenerates every time the server is
//! free, so the renewal-reward theorem gives
//!
//! ```text
//! welfare = sum_i a_i r_i E[v; v >= p_i] / (S - sum_i (a_i - 1) r_i F(p_i) + 1 - R)
//! revenue = sum_i a_i r_i (1 - F(p_i)) p_i / (same denominator)
//! ```
//!
//! with `S = sum_i a_i r_i` and `R = sum_i r_i`. The denominator is the
//! expected cycle length and is always at least one.

use crate::error::{Error, Result};
use crate::values::ValueDistribution;

const PROB_TOL: f64 = 1e-12;

/// Job lengths and arrival probabilities seen by one server.
#[derive(Debug, Clone, PartialEq)]
pub struct JobMix {
    lengths: Vec<u32>,
    probs: Vec<f64>,
}

impl JobMix {
    pub fn new(lengths: Vec<u32>, probs: Vec<f64>) -> Result<Self> {
        if lengths.is_empty() {
            return Err(Error::InvalidMix("no job lengths".into()));
        }
        if lengths.len() != probs.len() {
            return Err(Error::DimensionMismatch {
                what: "arrival probabilities",
                expected: lengths.len(),
                got: probs.len(),
            });
        }
        if let Some(k) = lengths.iter().position(|&a| a == 0) {
            return Err(Error::InvalidMix(format!("length at position {k} is zero")));
        }
        if let Some(k) = lengths.windows(2).position(|w| w[0] > w[1]) {
            return Err(Error::InvalidMix(format!(
                "lengths must be ascending ({} after {} at position {})",
                lengths[k + 1],
                lengths[k],
                k + 1
            )));
        }
        for (k, &r) in probs.iter().enumerate() {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::InvalidMix(format!(
                    "arrival probability {r} at position {k} must lie in (0, 1]"
                )));
            }
        }
        let total: f64 = probs.iter().sum();
        if total > 1.0 + PROB_TOL {
            return Err(Error::InvalidMix(format!(
                "arrival probabilities sum to {total}, which exceeds 1"
            )));
        }
        Ok(Self { lengths, probs })
    }

    /// Mix with a single job length.
    pub fn single(length: u32, prob: f64) -> Result<Self> {
        Self::new(vec![length], vec![prob])
    }

    pub fn lengths(&self) -> &[u32] {
        &self.lengths
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn max_length(&self) -> u32 {
        *self.lengths.last().unwrap()
    }

    /// Expected busy steps requested per step, `S = sum a_i r_i`.
    pub fn load(&self) -> f64 {
        self.lengths
            .iter()
            .zip(&self.probs)
            .map(|(&a, &r)| a as f64 * r)
            .sum()
    }

    /// Total arrival probability `R`.
    pub fn arrival_prob(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `1 - R`, clamped at zero against rounding.
    pub fn idle_prob(&self) -> f64 {
        let q = 1.0 - self.arrival_prob();
        if q < 0.0 && q > -PROB_TOL {
            0.0
        } else {
            q
        }
    }
}

/// Long-run per-step statistics of a priced server or fleet.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateMetrics {
    pub welfare_per_step: f64,
    pub revenue_per_step: f64,
    /// Acceptance probability of each class given it arrives to a free server.
    pub accept_prob: Vec<f64>,
    /// Fraction of busy time steps (averaged over servers for fleets).
    pub occupancy: f64,
}

impl SteadyStateMetrics {
    /// `lambda * welfare + (1 - lambda) * revenue`.
    pub fn objective(&self, lambda: f64) -> f64 {
        lambda * self.welfare_per_step + (1.0 - lambda) * self.revenue_per_step
    }
}

pub(crate) fn check_prices(prices: &[f64]) -> Result<()> {
    match prices.iter().position(|p| !p.is_finite() || *p < 0.0) {
        Some(index) => Err(Error::InvalidPrice {
            index,
            value: prices[index],
        }),
        None => Ok(()),
    }
}

/// Welfare and revenue per step with one price per job length.
pub fn single_server_metrics(
    mix: &JobMix,
    dist: &ValueDistribution,
    prices: &[f64],
) -> Result<SteadyStateMetrics> {
    if prices.len() != mix.len() {
        return Err(Error::DimensionMismatch {
            what: "prices",
            expected: mix.len(),
            got: prices.len(),
        });
    }
    check_prices(prices)?;

    let mut welfare = 0.0;
    let mut revenue = 0.0;
    let mut busy = 0.0;
    let mut rejected_slack = 0.0;
    let mut accept_prob = Vec::with_capacity(mix.len());
    for ((&a, &r), &p) in mix.lengths.iter().zip(&mix.probs).zip(prices) {
        let a = a as f64;
        let tail = dist.tail_prob(p);
        welfare += a * r * dist.partial_expectation(p);
        revenue += a * r * tail * p;
        busy += a * r * tail;
        rejected_slack += (a - 1.0) * r * dist.cdf_strict(p);
        accept_prob.push(tail);
    }
    let cycle = mix.load() - rejected_slack + mix.idle_prob();
    Ok(SteadyStateMetrics {
        welfare_per_step: welfare / cycle,
        revenue_per_step: revenue / cycle,
        accept_prob,
        occupancy: busy / cycle,
    })
}

/// Welfare and revenue per step when every length pays the same price.
pub fn single_server_flat_metrics(
    mix: &JobMix,
    dist: &ValueDistribution,
    price: f64,
) -> Result<SteadyStateMetrics> {
    check_prices(&[price])?;
    let s = mix.load();
    let r = mix.arrival_prob();
    let below = dist.cdf_strict(price);
    let tail = dist.tail_prob(price);
    let cycle = s - (s - r) * below + mix.idle_prob();
    Ok(SteadyStateMetrics {
        welfare_per_step: s * dist.partial_expectation(price) / cycle,
        revenue_per_step: s * tail * price / cycle,
        accept_prob: vec![tail; mix.len()],
        occupancy: s * tail / cycle,
    })
}

/// How the servers of a fleet relate to each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FleetMode {
    /// Every server has the same probability of receiving no job.
    EqualR,
    /// Every server receives jobs of one common length.
    SharedLength,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fleet {
    servers: Vec<JobMix>,
    mode: FleetMode,
}

impl Fleet {
    pub fn new(servers: Vec<JobMix>, mode: FleetMode) -> Result<Self> {
        if servers.is_empty() {
            return Err(Error::InvalidFleet("fleet has no servers".into()));
        }
        match mode {
            FleetMode::EqualR => {
                let r0 = servers[0].arrival_prob();
                if let Some(j) = servers
                    .iter()
                    .position(|m| (m.arrival_prob() - r0).abs() > PROB_TOL)
                {
                    return Err(Error::InvalidFleet(format!(
                        "server {j} has total arrival probability {} but server 0 has {r0}",
                        servers[j].arrival_prob()
                    )));
                }
            }
            FleetMode::SharedLength => {
                let a0 = servers[0].lengths[0];
                for (j, m) in servers.iter().enumerate() {
                    if m.len() != 1 {
                        return Err(Error::InvalidFleet(format!(
                            "server {j} has {} job lengths; shared-length fleets need exactly one",
                            m.len()
                        )));
                    }
                    if m.lengths[0] != a0 {
                        return Err(Error::InvalidFleet(format!(
                            "server {j} has length {} but server 0 has {a0}",
                            m.lengths[0]
                        )));
                    }
                }
            }
        }
        Ok(Self { servers, mode })
    }

    pub fn servers(&self) -> &[JobMix] {
        &self.servers
    }

    pub fn mode(&self) -> FleetMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.servers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.servers.is_empty()
    }

    /// Common length of a shared-length fleet.
    pub fn shared_length(&self) -> Option<u32> {
        match self.mode {
            FleetMode::SharedLength => Some(self.servers[0].lengths[0]),
            FleetMode::EqualR => None,
        }
    }

    pub fn max_length(&self) -> u32 {
        self.servers.iter().map(JobMix::max_length).max().unwrap_or(1)
    }
}

/// Fleet welfare and revenue with one price per server.
///
/// Equal-R fleets use the per-server normalised form
/// `E[v; v >= p_j] / (1 - (1 - R/S_j) F(p_j) + (1 - R)/S_j)`; shared-length
/// fleets use `a E[v; v >= p_j] / ((a - 1)(1 - F(p_j)) + 1/r_j)`.
pub fn fleet_metrics(
    fleet: &Fleet,
    dist: &ValueDistribution,
    prices: &[f64],
) -> Result<SteadyStateMetrics> {
    if prices.len() != fleet.len() {
        return Err(Error::DimensionMismatch {
            what: "per-server prices",
            expected: fleet.len(),
            got: prices.len(),
        });
    }
    check_prices(prices)?;

    let mut welfare = 0.0;
    let mut revenue = 0.0;
    let mut occupancy = 0.0;
    let mut accept_prob = Vec::with_capacity(fleet.len());
    for (mix, &p) in fleet.servers.iter().zip(prices) {
        let below = dist.cdf_strict(p);
        let tail = dist.tail_prob(p);
        let upper = dist.partial_expectation(p);
        // scale: per-step reward = scale * (per-accept-probability reward)
        let (w, rv, occ) = match fleet.mode {
            FleetMode::EqualR => {
                let s = mix.load();
                let r = mix.arrival_prob();
                let denom = 1.0 - (1.0 - r / s) * below + mix.idle_prob() / s;
                (upper / denom, tail * p / denom, tail / denom)
            }
            FleetMode::SharedLength => {
                let a = mix.lengths[0] as f64;
                let denom = (a - 1.0) * tail + 1.0 / mix.probs[0];
                (a * upper / denom, a * tail * p / denom, a * tail / denom)
            }
        };
        welfare += w;
        revenue += rv;
        occupancy += occ;
        accept_prob.push(tail);
    }
    Ok(SteadyStateMetrics {
        welfare_per_step: welfare,
        revenue_per_step: revenue,
        accept_prob,
        occupancy: occupancy / fleet.len() as f64,
    })
}

/// Fleet metrics with an individual price for every length on every server.
/// `accept_prob` lists the classes server by server.
pub fn fleet_multi_metrics(
    fleet: &Fleet,
    dist: &ValueDistribution,
    prices: &[Vec<f64>],
) -> Result<SteadyStateMetrics> {
    if prices.len() != fleet.len() {
        return Err(Error::DimensionMismatch {
            what: "per-server price lists",
            expected: fleet.len(),
            got: prices.len(),
        });
    }
    let mut total = SteadyStateMetrics {
        welfare_per_step: 0.0,
        revenue_per_step: 0.0,
        accept_prob: Vec::new(),
        occupancy: 0.0,
    };
    for (mix, p) in fleet.servers.iter().zip(prices) {
        let m = single_server_metrics(mix, dist, p)?;
        total.welfare_per_step += m.welfare_per_step;
        total.revenue_per_step += m.revenue_per_step;
        total.occupancy += m.occupancy;
        total.accept_prob.extend(m.accept_prob);
    }
    total.occupancy /= fleet.len() as f64;
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn warmup_mix() -> JobMix {
        JobMix::new(vec![1, 2], vec![0.5, 0.5]).unwrap()
    }

    fn unit_uniform() -> ValueDistribution {
        ValueDistribution::uniform(0.0, 1.0).unwrap()
    }

    #[test]
    fn two_price_closed_forms() {
        let mix = warmup_mix();
        let u = unit_uniform();
        let w = single_server_metrics(&mix, &u, &[0.0, 3.0 - (7.5f64).sqrt()]).unwrap();
        assert_abs_diff_eq!(w.welfare_per_step, 6.0 - 30f64.sqrt(), epsilon = 1e-12);
        let r = single_server_metrics(&mix, &u, &[0.5, 3.0 - (47.0f64 / 8.0).sqrt()]).unwrap();
        assert_abs_diff_eq!(r.revenue_per_step, 10.0 - 94f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn flat_closed_forms() {
        let mix = warmup_mix();
        let u = unit_uniform();
        let m = single_server_flat_metrics(&mix, &u, 3.0 - 2.0 * 2f64.sqrt()).unwrap();
        assert_abs_diff_eq!(m.welfare_per_step, 9.0 - 6.0 * 2f64.sqrt(), epsilon = 1e-12);
        let m = single_server_flat_metrics(&mix, &u, 0.0).unwrap();
        assert_abs_diff_eq!(m.welfare_per_step, 0.5, epsilon = 1e-15);
        let m = single_server_flat_metrics(&mix, &u, 3.0 - 6f64.sqrt()).unwrap();
        assert_abs_diff_eq!(m.revenue_per_step, 15.0 - 6.0 * 6f64.sqrt(), epsilon = 1e-12);
        let m = single_server_flat_metrics(&mix, &u, 0.5).unwrap();
        assert_abs_diff_eq!(m.revenue_per_step, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn flat_equals_constant_vector() {
        let mix = JobMix::new(vec![1, 3, 3, 7], vec![0.1, 0.2, 0.3, 0.15]).unwrap();
        let d = ValueDistribution::discrete(&[(0.0, 0.1), (0.4, 0.5), (2.0, 0.4)]).unwrap();
        for p in [0.0, 0.2, 0.4, 1.0, 2.0, 3.0] {
            let a = single_server_flat_metrics(&mix, &d, p).unwrap();
            let b = single_server_metrics(&mix, &d, &[p; 4]).unwrap();
            assert_abs_diff_eq!(a.welfare_per_step, b.welfare_per_step, epsilon = 1e-12);
            assert_abs_diff_eq!(a.revenue_per_step, b.revenue_per_step, epsilon = 1e-12);
            assert_abs_diff_eq!(a.occupancy, b.occupancy, epsilon = 1e-12);
        }
    }

    #[test]
    fn prices_above_support_reject_everything() {
        let mix = warmup_mix();
        let u = unit_uniform();
        let m = single_server_metrics(&mix, &u, &[1.5, 2.0]).unwrap();
        assert_eq!(m.welfare_per_step, 0.0);
        assert_eq!(m.revenue_per_step, 0.0);
        assert_eq!(m.occupancy, 0.0);
    }

    #[test]
    fn dimension_and_price_errors() {
        let mix = warmup_mix();
        let u = unit_uniform();
        assert!(matches!(
            single_server_metrics(&mix, &u, &[0.1]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            single_server_metrics(&mix, &u, &[0.1, -0.2]),
            Err(Error::InvalidPrice { index: 1, .. })
        ));
    }

    #[test]
    fn mix_validation() {
        assert!(JobMix::new(vec![1, 2], vec![0.6, 0.6]).is_err());
        assert!(JobMix::new(vec![2, 1], vec![0.5, 0.5]).is_err());
        assert!(JobMix::new(vec![0], vec![0.5]).is_err());
        assert!(JobMix::new(vec![1], vec![0.0]).is_err());
        assert!(JobMix::new(vec![1, 2], vec![0.5]).is_err());
        // rounding slack on the probability sum
        let m = JobMix::new(vec![1, 2, 3], vec![0.1, 0.2, 0.7000000000000001]).unwrap();
        assert_eq!(m.idle_prob(), 0.0);
    }

    #[test]
    fn single_length_zero_price_maximizes_welfare() {
        let mix = JobMix::single(1, 0.4).unwrap();
        let d = ValueDistribution::discrete(&[(0.5, 0.3), (1.0, 0.3), (4.0, 0.4)]).unwrap();
        let best = single_server_flat_metrics(&mix, &d, 0.0).unwrap().welfare_per_step;
        let s = mix.load();
        assert_abs_diff_eq!(best, s * d.mean() / (s + 1.0 - mix.arrival_prob()), epsilon = 1e-15);
        for p in d.support_candidates(0) {
            assert!(single_server_flat_metrics(&mix, &d, p).unwrap().welfare_per_step <= best + 1e-15);
        }
    }

    #[test]
    fn fleet_validation() {
        let a = JobMix::new(vec![1, 2], vec![0.5, 0.5]).unwrap();
        let b = JobMix::new(vec![3], vec![0.6]).unwrap();
        assert!(Fleet::new(vec![a.clone(), b.clone()], FleetMode::EqualR).is_err());
        assert!(Fleet::new(vec![a.clone()], FleetMode::SharedLength).is_err());
        let c = JobMix::new(vec![2], vec![0.6]).unwrap();
        assert!(Fleet::new(vec![b, c], FleetMode::SharedLength).is_err());
        assert!(Fleet::new(vec![], FleetMode::EqualR).is_err());
    }

    #[test]
    fn fleet_reductions() {
        let mix = JobMix::new(vec![1, 4], vec![0.3, 0.5]).unwrap();
        let u = unit_uniform();
        let one = Fleet::new(vec![mix.clone()], FleetMode::EqualR).unwrap();
        let three = Fleet::new(vec![mix.clone(); 3], FleetMode::EqualR).unwrap();
        for p in [0.0, 0.3, 0.77] {
            let single = single_server_flat_metrics(&mix, &u, p).unwrap();
            let f1 = fleet_metrics(&one, &u, &[p]).unwrap();
            let f3 = fleet_metrics(&three, &u, &[p; 3]).unwrap();
            assert_abs_diff_eq!(f1.welfare_per_step, single.welfare_per_step, epsilon = 1e-14);
            assert_abs_diff_eq!(f1.revenue_per_step, single.revenue_per_step, epsilon = 1e-14);
            assert_abs_diff_eq!(f3.welfare_per_step, 3.0 * single.welfare_per_step, epsilon = 1e-14);
            assert_abs_diff_eq!(f3.revenue_per_step, 3.0 * single.revenue_per_step, epsilon = 1e-14);
            assert_abs_diff_eq!(f3.occupancy, single.occupancy, epsilon = 1e-14);
        }
    }

    #[test]
    fn fleet_forms_match_per_server_sums() {
        let d = ValueDistribution::discrete(&[(0.1, 0.5), (0.6, 0.3), (1.0, 0.2)]).unwrap();
        let eq = Fleet::new(
            vec![
                JobMix::new(vec![1, 5], vec![0.2, 0.5]).unwrap(),
                JobMix::new(vec![2], vec![0.7]).unwrap(),
            ],
            FleetMode::EqualR,
        )
        .unwrap();
        let shared = Fleet::new(
            vec![JobMix::single(3, 0.2).unwrap(), JobMix::single(3, 0.9).unwrap()],
            FleetMode::SharedLength,
        )
        .unwrap();
        for fleet in [eq, shared] {
            for prices in [[0.0, 0.6], [0.6, 0.1], [1.0, 1.0]] {
                let f = fleet_metrics(&fleet, &d, &prices).unwrap();
                let per_length: Vec<Vec<f64>> = fleet
                    .servers()
                    .iter()
                    .zip(prices)
                    .map(|(m, p)| vec![p; m.len()])
                    .collect();
                let g = fleet_multi_metrics(&fleet, &d, &per_length).unwrap();
                assert_abs_diff_eq!(f.welfare_per_step, g.welfare_per_step, epsilon = 1e-13);
                assert_abs_diff_eq!(f.revenue_per_step, g.revenue_per_step, epsilon = 1e-13);
                assert_abs_diff_eq!(f.occupancy, g.occupancy, epsilon = 1e-13);
            }
        }
    }
}
