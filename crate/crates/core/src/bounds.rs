//! Approximation-ratio guarantees for single-price schemes.
//!
//! For one server, the worst case of (best single price among the
//! multi-prices) / (multi-price objective) reduces to minimizing
//!
//! ```text
//! h(B) = [S^2 - S sum_i (a_i - 1) r_i B_i + S (1 - R)]
//!      / [S^2 - (S - R) sum_i a_i r_i B_i + S (1 - R)]
//! ```
//!
//! over `B_i = F(p_i)` in `[0, 1]`. `h` is a ratio of affine functions in each
//! coordinate, hence monotone along each axis, and its minimum sits on a
//! corner of the unit cube with `B_1 = 0` and `B_n = 1`.

use num_traits::{FromPrimitive, Num};

use crate::error::{Error, Result};
use crate::optimize::{optimize_flat, PriceSchedule, SearchConfig};
use crate::steady::{single_server_metrics, Fleet, FleetMode, JobMix};
use crate::values::{make_bimodal, ValueDistribution};

/// Corner enumeration is capped at this many job lengths.
pub const MAX_CORNER_LENGTHS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Rho,
    Half,
    FixedProb,
    Harmonic,
    MRatio,
    OneLength,
    Composed,
    /// Minimum of `h` over the corners of the unit cube.
    Corner,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioBound {
    pub value: f64,
    pub kind: BoundKind,
    /// Corner `B` attaining the value, when one exists.
    pub witness: Option<Vec<f64>>,
}

impl RatioBound {
    fn plain(value: f64, kind: BoundKind) -> Self {
        Self {
            value,
            kind,
            witness: None,
        }
    }
}

fn lit<T: FromPrimitive>(x: u32) -> T {
    T::from_u32(x).expect("length representable")
}

/// `h(B)` over any field, so rational inputs give exact rational results.
pub fn h_value<T>(lengths: &[u32], probs: &[T], b: &[T]) -> T
where
    T: Num + Copy + FromPrimitive,
{
    let one = T::one();
    let mut s = T::zero();
    let mut r = T::zero();
    let mut waste = T::zero();
    let mut blocked = T::zero();
    for ((&a, &p), &bi) in lengths.iter().zip(probs).zip(b) {
        let a: T = lit(a);
        s = s + a * p;
        r = r + p;
        waste = waste + (a - one) * p * bi;
        blocked = blocked + a * p * bi;
    }
    let idle = s * (one - r);
    (s * s - waste * s + idle) / (s * s - blocked * (s - r) + idle)
}

/// `rho(a, b, r1, r2)` over any field.
pub fn rho_value<T>(a: u32, b: u32, r1: T, r2: T) -> T
where
    T: Num + Copy + FromPrimitive,
{
    let one = T::one();
    let a: T = lit(a);
    let b: T = lit(b);
    (a * r1 + b * r2) * (a * r1 + one - r1)
        / (a * (a - one) * r1 * r1 + a * (b - one) * r1 * r2 + a * r1 + b * r2)
}

/// `rho(a, infinity, r1, r2)` over any field.
pub fn rho_unbounded_value<T>(a: u32, r1: T) -> T
where
    T: Num + Copy + FromPrimitive,
{
    let one = T::one();
    let a: T = lit(a);
    (a * r1 + one - r1) / (a * r1 + one)
}

fn check_pair(r1: f64, r2: f64) -> Result<()> {
    if !(r1 > 0.0 && r2 > 0.0 && r1 + r2 <= 1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "need r1, r2 > 0 and r1 + r2 <= 1, got ({r1}, {r2})"
        )));
    }
    Ok(())
}

/// Tight two-length guarantee for lengths `a < b` arriving with `r1`, `r2`.
pub fn rho(a: u32, b: u32, r1: f64, r2: f64) -> Result<f64> {
    if a == 0 || a >= b {
        return Err(Error::InvalidArgument(format!(
            "rho needs 1 <= a < b, got a = {a}, b = {b}"
        )));
    }
    check_pair(r1, r2)?;
    Ok(rho_value(a, b, r1, r2))
}

/// Limit of `rho` as the long length grows without bound; independent of `r2`.
pub fn rho_unbounded(a: u32, r1: f64) -> Result<f64> {
    if a == 0 || !(r1 > 0.0 && r1 <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "rho limit needs a >= 1 and r1 in (0, 1], got ({a}, {r1})"
        )));
    }
    Ok(rho_unbounded_value(a, r1))
}

/// Lower bound `1 / (1 + r1)` on `rho` over all lengths.
pub fn fixed_prob_bound(r1: f64) -> RatioBound {
    RatioBound::plain(1.0 / (1.0 + r1), BoundKind::FixedProb)
}

pub fn h_eval(mix: &JobMix, b: &[f64]) -> Result<f64> {
    if b.len() != mix.len() {
        return Err(Error::DimensionMismatch {
            what: "corner coordinates",
            expected: mix.len(),
            got: b.len(),
        });
    }
    if let Some(k) = b.iter().position(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::InvalidArgument(format!(
            "B[{k}] = {} lies outside [0, 1]",
            b[k]
        )));
    }
    let v = h_value(mix.lengths(), mix.probs(), b);
    debug_assert!(v.is_finite() && v > 0.0);
    Ok(v)
}

/// Minimum of `h` over corners with `B_1 = 0`, `B_n = 1` and free middle
/// coordinates.
pub fn h_corner_min(mix: &JobMix) -> Result<RatioBound> {
    let n = mix.len();
    if n > MAX_CORNER_LENGTHS {
        return Err(Error::Capacity {
            what: "job lengths for corner search",
            got: n,
            limit: MAX_CORNER_LENGTHS,
        });
    }
    let lengths = mix.lengths();
    let probs = mix.probs();
    if n == 1 {
        let at0 = h_value(lengths, probs, &[0.0]);
        let at1 = h_value(lengths, probs, &[1.0]);
        let (value, b) = if at1 < at0 { (at1, 1.0) } else { (at0, 0.0) };
        return Ok(RatioBound {
            value,
            kind: BoundKind::Corner,
            witness: Some(vec![b]),
        });
    }

    let mut corner = vec![0.0; n];
    corner[n - 1] = 1.0;
    let mut best = f64::INFINITY;
    let mut witness = corner.clone();
    for mask in 0u32..(1u32 << (n - 2)) {
        for k in 0..n - 2 {
            corner[k + 1] = f64::from((mask >> k) & 1);
        }
        let v = h_value(lengths, probs, &corner);
        if v < best {
            best = v;
            witness.copy_from_slice(&corner);
        }
    }
    Ok(RatioBound {
        value: best,
        kind: BoundKind::Corner,
        witness: Some(witness),
    })
}

pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

/// `(M - 1) / (M ln M)` with its value 1 at `M = 1`.
pub fn m_ratio_term(m: f64) -> f64 {
    let x = m - 1.0;
    if x <= 0.0 {
        1.0
    } else {
        x / (m * x.ln_1p())
    }
}

fn extreme_ratio(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let hi = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    let lo = xs.fold(f64::INFINITY, f64::min);
    hi / lo
}

/// `max(1/H_n, (M-1)/(M ln M))` for equal-R fleets, `M = max S_i / S_j`.
pub fn fleet_bound(fleet: &Fleet) -> Result<RatioBound> {
    if fleet.mode() != FleetMode::EqualR {
        return Err(Error::InvalidFleet(
            "the server-load bound applies to equal-R fleets".into(),
        ));
    }
    let inv_h = 1.0 / harmonic(fleet.len());
    let m = extreme_ratio(fleet.servers().iter().map(JobMix::load));
    let mt = m_ratio_term(m);
    Ok(if mt > inv_h {
        RatioBound::plain(mt, BoundKind::MRatio)
    } else {
        RatioBound::plain(inv_h, BoundKind::Harmonic)
    })
}

/// `max(1/H_n, (M-1)/(M ln M), 1/a)` for shared-length fleets,
/// `M = max r_i / r_j`.
pub fn one_length_fleet_bound(fleet: &Fleet) -> Result<RatioBound> {
    let Some(a) = fleet.shared_length() else {
        return Err(Error::InvalidFleet(
            "the one-length bound applies to shared-length fleets".into(),
        ));
    };
    let inv_h = 1.0 / harmonic(fleet.len());
    let m = extreme_ratio(fleet.servers().iter().map(|s| s.probs()[0]));
    let value = inv_h.max(m_ratio_term(m)).max(1.0 / a as f64);
    Ok(RatioBound::plain(value, BoundKind::OneLength))
}

/// Half of [`fleet_bound`]: one price for every server and every length.
pub fn composed_bound(fleet: &Fleet) -> Result<RatioBound> {
    let inner = fleet_bound(fleet)?;
    Ok(RatioBound::plain(0.5 * inner.value, BoundKind::Composed))
}

/// Two-length instance whose single-price ratio approaches `rho`.
#[derive(Debug, Clone)]
pub struct TightInstance {
    pub mix: JobMix,
    pub dist: ValueDistribution,
    /// Per-length prices `(v1, v2)`: accept every short job, only high-value
    /// long jobs.
    pub prices: PriceSchedule,
}

impl TightInstance {
    pub fn rho(&self) -> f64 {
        let a = self.mix.lengths();
        let r = self.mix.probs();
        rho_value(a[0], a[1], r[0], r[1])
    }

    /// Best flat objective over all prices divided by the two-price objective.
    pub fn realized_ratio(&self, lambda: f64) -> Result<f64> {
        let prices = self.prices.for_mix(2)?;
        let multi = single_server_metrics(&self.mix, &self.dist, &prices)?.objective(lambda);
        let flat = optimize_flat(&self.mix, &self.dist, lambda, &SearchConfig::default())?;
        Ok(flat.objective_value / multi)
    }
}

/// Bimodal worst case: high value `1 - eps` with probability `eps`, low value
/// chosen so that `q2 v2 / (q1 v1) = 1 / (S - R)`.
pub fn tight_bimodal_instance(a: u32, b: u32, r1: f64, r2: f64, eps: f64) -> Result<TightInstance> {
    if a == 0 || a >= b {
        return Err(Error::InvalidArgument(format!(
            "tight instance needs 1 <= a < b, got a = {a}, b = {b}"
        )));
    }
    check_pair(r1, r2)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} must lie in (0, 1)")));
    }
    let mix = JobMix::new(vec![a, b], vec![r1, r2])?;
    let excess = mix.load() - mix.arrival_prob();
    if excess <= 0.0 {
        return Err(Error::InvalidArgument(
            "all lengths are 1; a single price is already optimal".into(),
        ));
    }
    let (q1, q2) = (1.0 - eps, eps);
    let high = 1.0 - eps;
    let low = q2 * high * excess / q1;
    if low >= high {
        return Err(Error::InvalidArgument(format!(
            "eps = {eps} is too large for this mix (low value {low} >= high value {high})"
        )));
    }
    let dist = make_bimodal(q2, low, high)?;
    Ok(TightInstance {
        mix,
        dist,
        prices: PriceSchedule::PerLength(vec![low, high]),
    })
}

/// Fleet parameters entering the reciprocal `h0` of the fleet `h` function.
#[derive(Debug, Clone, PartialEq)]
pub enum FleetLoads {
    /// `s_j = 1 / S_j` with common arrival probability `R`.
    EqualR { inv_loads: Vec<f64>, arrival: f64 },
    /// `R_j = 1 / r_j` with common job length `a`.
    SharedLength { inv_rates: Vec<f64>, length: f64 },
}

impl FleetLoads {
    pub fn from_fleet(fleet: &Fleet) -> Self {
        match fleet.mode() {
            FleetMode::EqualR => Self::EqualR {
                inv_loads: fleet.servers().iter().map(|m| 1.0 / m.load()).collect(),
                arrival: fleet.servers()[0].arrival_prob(),
            },
            FleetMode::SharedLength => Self::SharedLength {
                inv_rates: fleet.servers().iter().map(|m| 1.0 / m.probs()[0]).collect(),
                length: f64::from(fleet.servers()[0].lengths()[0]),
            },
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::EqualR { inv_loads, .. } => inv_loads.len(),
            Self::SharedLength { inv_rates, .. } => inv_rates.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `h0(B) = sum_j 1 / sum_i (cost_j(B_j) / cost_i(B_j))`; the fleet ratio
/// guarantee is `1 / max h0`.
pub fn h0_fleet_eval(loads: &FleetLoads, b: &[f64]) -> Result<f64> {
    let tails: Vec<f64> = b.iter().map(|x| 1.0 - x).collect();
    h0_fleet_eval_tail(loads, &tails)
}

/// [`h0_fleet_eval`] parameterised by acceptance probabilities `1 - B_j`,
/// which keeps precision when `B_j` is within rounding of one.
pub fn h0_fleet_eval_tail(loads: &FleetLoads, tails: &[f64]) -> Result<f64> {
    if tails.len() != loads.len() {
        return Err(Error::DimensionMismatch {
            what: "corner coordinates",
            expected: loads.len(),
            got: tails.len(),
        });
    }
    let mut h0 = 0.0;
    match loads {
        FleetLoads::EqualR { inv_loads, arrival } => {
            for (&sj, &tj) in inv_loads.iter().zip(tails) {
                let open = 1.0 - arrival * tj;
                let own = tj + sj * open;
                let spread: f64 = inv_loads.iter().map(|&si| own / (tj + si * open)).sum();
                h0 += 1.0 / spread;
            }
        }
        FleetLoads::SharedLength { inv_rates, length } => {
            for (&rj, &tj) in inv_rates.iter().zip(tails) {
                let busy = (length - 1.0) * tj;
                let spread: f64 = inv_rates.iter().map(|&ri| (rj + busy) / (ri + busy)).sum();
                h0 += 1.0 / spread;
            }
        }
    }
    Ok(h0)
}

/// Equal-R family with `s_j = c^{-2j}`, `1 - B_j = c^{1-2j}`, `R = 1`, along
/// which `h0` tends to `H_n` as `c` grows.
pub fn harmonic_family_equal_r(n: usize, c: f64) -> (FleetLoads, Vec<f64>) {
    let inv_loads = (1..=n).map(|j| c.powi(-2 * j as i32)).collect();
    let tails = (1..=n).map(|j| c.powi(1 - 2 * j as i32)).collect();
    (
        FleetLoads::EqualR {
            inv_loads,
            arrival: 1.0,
        },
        tails,
    )
}

/// Shared-length family with `R_j = c^{2(n-j)}` and
/// `1 - B_j = c^{2(n-j)+1} / (a - 1)` where `a - 1 = c^{2n}`.
pub fn harmonic_family_shared(n: usize, c: f64) -> (FleetLoads, Vec<f64>) {
    let scale = c.powi(2 * n as i32);
    let inv_rates = (1..=n).map(|j| c.powi(2 * (n - j) as i32)).collect();
    let tails = (1..=n)
        .map(|j| c.powi(2 * (n - j) as i32 + 1) / scale)
        .collect();
    (
        FleetLoads::SharedLength {
            inv_rates,
            length: scale + 1.0,
        },
        tails,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn thirds(a3: u32) -> JobMix {
        JobMix::new(vec![2, 3, a3], vec![1.0 / 3.0; 3]).unwrap()
    }

    #[test]
    fn rho_table() {
        assert_abs_diff_eq!(rho(1, 2, 0.5, 0.5).unwrap(), 6.0 / 7.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rho(1, 3, 0.5, 0.5).unwrap(), 4.0 / 5.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rho(2, 3, 0.5, 0.5).unwrap(), 15.0 / 16.0, epsilon = 1e-14);
        for a in 1..6 {
            let lim = rho_unbounded(a, 0.5).unwrap();
            assert_abs_diff_eq!(lim, (a as f64 + 1.0) / (a as f64 + 2.0), epsilon = 1e-14);
        }
        assert!(rho(2, 2, 0.5, 0.5).is_err());
        assert!(rho(1, 2, 0.7, 0.5).is_err());
    }

    #[test]
    fn rho_approaches_its_limit() {
        let lim = rho_unbounded(3, 0.4).unwrap();
        let far = rho(3, 1_000_000, 0.4, 0.5).unwrap();
        assert_abs_diff_eq!(far, lim, epsilon = 1e-5);
    }

    #[test]
    fn h_examples() {
        assert_abs_diff_eq!(h_eval(&thirds(6), &[0.0, 1.0, 1.0]).unwrap(), 44.0 / 49.0, epsilon = 1e-14);
        assert_abs_diff_eq!(h_eval(&thirds(8), &[0.0, 0.0, 1.0]).unwrap(), 78.0 / 89.0, epsilon = 1e-14);
        let mix = JobMix::new(vec![1, 4, 9], vec![0.2, 0.3, 0.1]).unwrap();
        for b in [0.0, 0.37, 1.0] {
            assert_abs_diff_eq!(h_eval(&mix, &[b; 3]).unwrap(), 1.0, epsilon = 1e-14);
        }
        assert!(h_eval(&mix, &[0.0, 1.0]).is_err());
        assert!(h_eval(&mix, &[0.0, 1.5, 1.0]).is_err());
    }

    #[test]
    fn corner_minima() {
        let six = h_corner_min(&thirds(6)).unwrap();
        assert_abs_diff_eq!(six.value, 44.0 / 49.0, epsilon = 1e-14);
        assert_eq!(six.witness.as_deref(), Some(&[0.0, 1.0, 1.0][..]));
        let seven = h_corner_min(&thirds(7)).unwrap();
        assert_abs_diff_eq!(seven.value, 8.0 / 9.0, epsilon = 1e-14);
        let eight = h_corner_min(&thirds(8)).unwrap();
        assert_abs_diff_eq!(eight.value, 78.0 / 89.0, epsilon = 1e-14);
        assert_eq!(eight.witness.as_deref(), Some(&[0.0, 0.0, 1.0][..]));

        let one = h_corner_min(&JobMix::single(5, 0.7).unwrap()).unwrap();
        assert_abs_diff_eq!(one.value, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn corner_capacity() {
        let mix = JobMix::new((1..=25).collect(), vec![0.01; 25]).unwrap();
        assert!(matches!(h_corner_min(&mix), Err(Error::Capacity { .. })));
    }

    #[test]
    fn fleet_bounds() {
        let m = JobMix::new(vec![1, 3], vec![0.3, 0.3]).unwrap();
        let one = Fleet::new(vec![m.clone()], FleetMode::EqualR).unwrap();
        assert_eq!(fleet_bound(&one).unwrap().value, 1.0);
        assert_eq!(composed_bound(&one).unwrap().value, 0.5);
        let twins = Fleet::new(vec![m.clone(), m], FleetMode::EqualR).unwrap();
        assert_eq!(fleet_bound(&twins).unwrap().value, 1.0);
        assert_eq!(composed_bound(&twins).unwrap().value, 0.5);
        assert!(one_length_fleet_bound(&twins).is_err());

        // n = 4, M = 8: lengths {1, 9}, R = 0.2, loads 0.22 * 2^k
        let loads = [0.22, 0.44, 0.88, 1.76];
        let mk = |s: f64| {
            let x = (1.8 - s) / 8.0;
            JobMix::new(vec![1, 9], vec![x, 0.2 - x]).unwrap()
        };
        let f = Fleet::new(loads.iter().map(|&s| mk(s)).collect(), FleetMode::EqualR).unwrap();
        let expected = 0.5 * (12.0 / 25.0f64).max(7.0 / (8.0 * 8f64.ln()));
        assert_abs_diff_eq!(composed_bound(&f).unwrap().value, expected, epsilon = 1e-12);
    }

    #[test]
    fn one_length_bounds() {
        let unit = Fleet::new(
            vec![JobMix::single(1, 0.1).unwrap(), JobMix::single(1, 0.9).unwrap()],
            FleetMode::SharedLength,
        )
        .unwrap();
        assert_eq!(one_length_fleet_bound(&unit).unwrap().value, 1.0);
        let solo = Fleet::new(vec![JobMix::single(7, 0.3).unwrap()], FleetMode::SharedLength).unwrap();
        assert_eq!(one_length_fleet_bound(&solo).unwrap().value, 1.0);
        assert!(fleet_bound(&solo).is_err());
    }

    #[test]
    fn m_ratio_limit() {
        assert_eq!(m_ratio_term(1.0), 1.0);
        assert_abs_diff_eq!(m_ratio_term(1.0 + 1e-9), 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(m_ratio_term(std::f64::consts::E), (std::f64::consts::E - 1.0) / std::f64::consts::E, epsilon = 1e-15);
    }

    #[test]
    fn tight_instance_warmup_mix() {
        let mut last_gap = f64::INFINITY;
        for eps in [1e-2, 1e-3, 1e-4] {
            let t = tight_bimodal_instance(1, 2, 0.5, 0.5, eps).unwrap();
            let gap = (t.realized_ratio(1.0).unwrap() - 6.0 / 7.0).abs();
            assert!(gap <= last_gap, "gap {gap} grew at eps {eps}");
            last_gap = gap;
        }
        assert!(last_gap < 1e-3);
        assert!(tight_bimodal_instance(1, 1, 0.5, 0.5, 0.1).is_err());
        assert!(tight_bimodal_instance(1, 2, 0.5, 0.5, 0.9).is_err());
    }

    #[test]
    fn h0_symmetric_servers() {
        let loads = FleetLoads::EqualR {
            inv_loads: vec![0.5; 3],
            arrival: 0.6,
        };
        assert_abs_diff_eq!(h0_fleet_eval(&loads, &[0.3; 3]).unwrap(), 1.0, epsilon = 1e-14);
        let shared = FleetLoads::SharedLength {
            inv_rates: vec![2.0; 4],
            length: 5.0,
        };
        assert_abs_diff_eq!(h0_fleet_eval(&shared, &[0.9; 4]).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn h0_harmonic_families() {
        for n in 2..=4 {
            let (loads, tails) = harmonic_family_equal_r(n, 1e3);
            let h0 = h0_fleet_eval_tail(&loads, &tails).unwrap();
            assert!((h0 - harmonic(n)).abs() <= 1e-2, "equal-R n={n}: {h0}");
            let (loads, tails) = harmonic_family_shared(n, 1e3);
            let h0 = h0_fleet_eval_tail(&loads, &tails).unwrap();
            assert!((h0 - harmonic(n)).abs() <= 1e-2, "shared n={n}: {h0}");
        }
    }
}
