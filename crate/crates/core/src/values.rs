//! Value-per-step distributions.
//!
//! Every distribution uses the strict cumulative distribution function
//! `F(x) = Pr[v < x]`. A job whose value equals the posted price is accepted,
//! so `1 - F(p)` is exactly the acceptance probability at price `p` and
//! [`ValueDistribution::partial_expectation`] includes atoms sitting at `p`.

use crate::error::{Error, Result};

/// Default number of grid points used to scan continuous price ranges.
pub const DEFAULT_GRID_POINTS: usize = 1024;

const WEIGHT_TOL: f64 = 1e-12;

/// Finite-support law with strictly ascending values.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrete {
    values: Vec<f64>,
    weights: Vec<f64>,
    // below[k] = sum of weights[..k]
    below: Vec<f64>,
    // at_or_above[k] = sum of weights[k..]
    at_or_above: Vec<f64>,
    // value-weighted suffix sums, same indexing as `at_or_above`
    upper_mass: Vec<f64>,
}

impl Discrete {
    pub fn new(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("discrete support is empty".into()));
        }
        let mut prev = f64::NEG_INFINITY;
        for (k, &(v, w)) in atoms.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "value {v} at atom {k} must be finite and nonnegative"
                )));
            }
            if v <= prev {
                return Err(Error::InvalidDistribution(format!(
                    "values must be strictly ascending (atom {k}: {v} after {prev})"
                )));
            }
            if !w.is_finite() || !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidDistribution(format!(
                    "weight {w} at atom {k} is not a probability"
                )));
            }
            prev = v;
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, expected 1"
            )));
        }

        let values: Vec<f64> = atoms.iter().map(|a| a.0).collect();
        let weights: Vec<f64> = atoms.iter().map(|a| a.1).collect();
        let n = values.len();
        let mut below = vec![0.0; n + 1];
        for k in 0..n {
            below[k + 1] = below[k] + weights[k];
        }
        let mut at_or_above = vec![0.0; n + 1];
        let mut upper_mass = vec![0.0; n + 1];
        for k in (0..n).rev() {
            at_or_above[k] = at_or_above[k + 1] + weights[k];
            upper_mass[k] = upper_mass[k + 1] + values[k] * weights[k];
        }
        Ok(Self {
            values,
            weights,
            below,
            at_or_above,
            upper_mass,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.weights.iter().copied())
    }

    // number of atoms strictly below x
    fn rank(&self, x: f64) -> usize {
        self.values.partition_point(|&v| v < x)
    }
}

/// Density that is linear between consecutive breakpoints and zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    dens: Vec<f64>,
    // cdf at each breakpoint
    cum: Vec<f64>,
    // E[v; v >= xs[k]]
    upper_mass: Vec<f64>,
}

impl PiecewiseLinear {
    /// Builds the law from `(x, density)` breakpoints. Densities are rescaled
    /// so the total mass is one.
    pub fn new(breakpoints: &[(f64, f64)]) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidDistribution(
                "piecewise-linear density needs at least two breakpoints".into(),
            ));
        }
        let mut prev = f64::NEG_INFINITY;
        for (k, &(x, d)) in breakpoints.iter().enumerate() {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "breakpoint {k} at {x} must be finite and nonnegative"
                )));
            }
            if x <= prev {
                return Err(Error::InvalidDistribution(format!(
                    "breakpoints must be strictly ascending (breakpoint {k})"
                )));
            }
            if !d.is_finite() || d < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "density {d} at breakpoint {k} must be finite and nonnegative"
                )));
            }
            prev = x;
        }
        let xs: Vec<f64> = breakpoints.iter().map(|b| b.0).collect();
        let raw: Vec<f64> = breakpoints.iter().map(|b| b.1).collect();
        let area: f64 = xs
            .windows(2)
            .zip(raw.windows(2))
            .map(|(x, d)| 0.5 * (x[1] - x[0]) * (d[0] + d[1]))
            .sum();
        if area <= 0.0 {
            return Err(Error::InvalidDistribution("density has zero mass".into()));
        }
        let dens: Vec<f64> = raw.iter().map(|d| d / area).collect();

        let n = xs.len();
        let mut cum = vec![0.0; n];
        for k in 0..n - 1 {
            cum[k + 1] = cum[k] + 0.5 * (xs[k + 1] - xs[k]) * (dens[k] + dens[k + 1]);
        }
        let mut upper_mass = vec![0.0; n];
        for k in (0..n - 1).rev() {
            let w = xs[k + 1] - xs[k];
            let seg = w / 6.0 * (xs[k] * (2.0 * dens[k] + dens[k + 1]) + xs[k + 1] * (dens[k] + 2.0 * dens[k + 1]));
            upper_mass[k] = upper_mass[k + 1] + seg;
        }
        Ok(Self {
            xs,
            dens,
            cum,
            upper_mass,
        })
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.dens.iter().copied())
    }

    // segment index k with xs[k] <= x < xs[k+1]; caller guarantees x inside the hull
    fn segment(&self, x: f64) -> usize {
        let k = self.xs.partition_point(|&b| b <= x);
        k.saturating_sub(1).min(self.xs.len() - 2)
    }

    fn slope(&self, k: usize) -> f64 {
        (self.dens[k + 1] - self.dens[k]) / (self.xs[k + 1] - self.xs[k])
    }

    fn cdf(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= self.xs[n - 1] {
            return 1.0;
        }
        let k = self.segment(x);
        let t = x - self.xs[k];
        (self.cum[k] + self.dens[k] * t + 0.5 * self.slope(k) * t * t).min(1.0)
    }

    fn partial_expectation(&self, p: f64) -> f64 {
        let n = self.xs.len();
        if p <= self.xs[0] {
            return self.upper_mass[0];
        }
        if p >= self.xs[n - 1] {
            return 0.0;
        }
        let k = self.segment(p);
        let s = self.slope(k);
        let x0 = self.xs[k];
        let x1 = self.xs[k + 1];
        let c = self.dens[k] - s * x0;
        let antideriv = |x: f64| 0.5 * c * x * x + s * x * x * x / 3.0;
        (antideriv(x1) - antideriv(p)).max(0.0) + self.upper_mass[k + 1]
    }

    fn quantile(&self, u: f64) -> f64 {
        let n = self.xs.len();
        // first segment whose upper cdf exceeds u
        let mut k = self.cum.partition_point(|&c| c <= u).saturating_sub(1);
        if k >= n - 1 {
            return self.xs[n - 1];
        }
        while k < n - 2 && self.cum[k + 1] - self.cum[k] <= 0.0 {
            k += 1;
        }
        let m = (u - self.cum[k]).max(0.0);
        let d0 = self.dens[k];
        let s = self.slope(k);
        let root = (d0 * d0 + 2.0 * s * m).max(0.0).sqrt();
        let denom = d0 + root;
        let t = if denom > 0.0 { 2.0 * m / denom } else { 0.0 };
        (self.xs[k] + t).min(self.xs[k + 1])
    }
}

/// Probability law of the value per time step of an arriving job.
#[derive(Debug, Clone, PartialEq)]
pub enum ValueDistribution {
    Discrete(Discrete),
    Uniform { lo: f64, hi: f64 },
    PiecewiseLinear(PiecewiseLinear),
}

impl ValueDistribution {
    pub fn discrete(atoms: &[(f64, f64)]) -> Result<Self> {
        Discrete::new(atoms).map(Self::Discrete)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo >= hi {
            return Err(Error::InvalidDistribution(format!(
                "uniform bounds need 0 <= lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self::Uniform { lo, hi })
    }

    pub fn piecewise_linear(breakpoints: &[(f64, f64)]) -> Result<Self> {
        PiecewiseLinear::new(breakpoints).map(Self::PiecewiseLinear)
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Self::Discrete(_))
    }

    /// `Pr[v < x]`.
    pub fn cdf_strict(&self, x: f64) -> f64 {
        match self {
            Self::Discrete(d) => d.below[d.rank(x)],
            Self::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::PiecewiseLinear(pl) => pl.cdf(x),
        }
    }

    /// `Pr[v >= x]`, the acceptance probability at price `x`.
    pub fn tail_prob(&self, x: f64) -> f64 {
        match self {
            Self::Discrete(d) => d.at_or_above[d.rank(x)],
            _ => 1.0 - self.cdf_strict(x),
        }
    }

    /// `E[v * 1{v >= p}]`.
    pub fn partial_expectation(&self, p: f64) -> f64 {
        match self {
            Self::Discrete(d) => d.upper_mass[d.rank(p)],
            Self::Uniform { lo, hi } => {
                let m = p.clamp(*lo, *hi);
                (hi * hi - m * m) / (2.0 * (hi - lo))
            }
            Self::PiecewiseLinear(pl) => pl.partial_expectation(p),
        }
    }

    pub fn mean(&self) -> f64 {
        self.partial_expectation(0.0)
    }

    pub fn min_support(&self) -> f64 {
        match self {
            Self::Discrete(d) => d.values[0],
            Self::Uniform { lo, .. } => *lo,
            Self::PiecewiseLinear(pl) => pl.xs[0],
        }
    }

    pub fn max_support(&self) -> f64 {
        match self {
            Self::Discrete(d) => *d.values.last().unwrap(),
            Self::Uniform { hi, .. } => *hi,
            Self::PiecewiseLinear(pl) => *pl.xs.last().unwrap(),
        }
    }

    /// Offset above the largest value that turns a price into "reject all".
    pub fn reject_offset(&self) -> f64 {
        self.max_support().max(1.0) * 1e-6
    }

    /// A price strictly above every value in the support.
    pub fn reject_price(&self) -> f64 {
        self.max_support() + self.reject_offset()
    }

    /// Inverse-CDF sample for `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Self::Discrete(d) => {
                let k = d.below[1..].partition_point(|&c| c <= u);
                d.values[k.min(d.values.len() - 1)]
            }
            Self::Uniform { lo, hi } => lo + u * (hi - lo),
            Self::PiecewiseLinear(pl) => pl.quantile(u),
        }
    }

    /// Prices worth trying when optimizing over this law.
    ///
    /// Discrete laws get `0`, every atom and one price above the support;
    /// nothing else can be optimal because the objectives are constant
    /// between atoms. Continuous laws get an evenly spaced grid of
    /// `grid_points` prices over the support hull.
    pub fn support_candidates(&self, grid_points: usize) -> Vec<f64> {
        match self {
            Self::Discrete(d) => {
                let mut out = Vec::with_capacity(d.values.len() + 2);
                if d.values[0] > 0.0 {
                    out.push(0.0);
                }
                out.extend_from_slice(&d.values);
                out.push(self.reject_price());
                out
            }
            _ => {
                let lo = self.min_support();
                let hi = self.max_support();
                let points = grid_points.max(2);
                let step = (hi - lo) / (points - 1) as f64;
                (0..points)
                    .map(|k| if k == points - 1 { hi } else { lo + step * k as f64 })
                    .collect()
            }
        }
    }
}

/// Two-point law `{(low, 1 - q_high), (high, q_high)}`.
pub fn make_bimodal(q_high: f64, low: f64, high: f64) -> Result<ValueDistribution> {
    if !(q_high > 0.0 && q_high < 1.0) {
        return Err(Error::InvalidDistribution(format!(
            "bimodal weight {q_high} must lie in (0, 1)"
        )));
    }
    if low >= high {
        return Err(Error::InvalidDistribution(format!(
            "bimodal values need low < high, got {low} >= {high}"
        )));
    }
    ValueDistribution::discrete(&[(low, 1.0 - q_high), (high, q_high)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_point() -> ValueDistribution {
        ValueDistribution::discrete(&[(0.2, 0.9), (0.9, 0.1)]).unwrap()
    }

    #[test]
    fn strict_cdf_examples() {
        let u = ValueDistribution::uniform(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(u.cdf_strict(0.3), 0.3, epsilon = 1e-15);
        let d = two_point();
        assert_eq!(d.cdf_strict(0.2), 0.0);
        assert_abs_diff_eq!(d.cdf_strict(0.9), 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(d.cdf_strict(0.900001), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn partial_expectation_examples() {
        let u = ValueDistribution::uniform(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(u.partial_expectation(0.0), 0.5, epsilon = 1e-15);
        for p in [0.1, 0.25, 0.7] {
            assert_abs_diff_eq!(u.partial_expectation(p), (1.0 - p * p) / 2.0, epsilon = 1e-15);
        }
        let d = two_point();
        assert_abs_diff_eq!(d.partial_expectation(0.9), 0.09, epsilon = 1e-15);
        assert_eq!(d.partial_expectation(0.95), 0.0);
        assert_eq!(u.partial_expectation(1.5), 0.0);
    }

    #[test]
    fn candidates() {
        let d = two_point();
        let c = d.support_candidates(DEFAULT_GRID_POINTS);
        assert_eq!(c.len(), 4);
        assert_eq!(&c[..3], &[0.0, 0.2, 0.9]);
        assert_abs_diff_eq!(c[3], 0.9 + 1e-6, epsilon = 1e-15);

        let u = ValueDistribution::uniform(0.0, 1.0).unwrap();
        assert_eq!(u.support_candidates(5), vec![0.0, 0.25, 0.5, 0.75, 1.0]);

        let single = ValueDistribution::discrete(&[(3.0, 1.0)]).unwrap();
        assert_eq!(single.support_candidates(8), vec![0.0, 3.0, 3.0 + 3e-6]);
    }

    #[test]
    fn bimodal_construction() {
        let b = make_bimodal(0.1, 0.01, 0.99).unwrap();
        let ValueDistribution::Discrete(d) = &b else { panic!() };
        assert_eq!(d.weights(), &[0.9, 0.1]);
        assert_abs_diff_eq!(b.tail_prob(0.99), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(b.partial_expectation(0.99), 0.1 * 0.99, epsilon = 1e-15);
        assert!(make_bimodal(0.1, 0.5, 0.5).is_err());
        assert!(make_bimodal(0.0, 0.1, 0.5).is_err());
    }

    #[test]
    fn rejects_bad_laws() {
        assert!(ValueDistribution::discrete(&[(0.2, 0.5), (0.1, 0.5)]).is_err());
        assert!(ValueDistribution::discrete(&[(0.2, 0.5), (0.3, 0.6)]).is_err());
        assert!(ValueDistribution::discrete(&[(-0.1, 1.0)]).is_err());
        assert!(ValueDistribution::uniform(1.0, 1.0).is_err());
        assert!(ValueDistribution::uniform(-1.0, 1.0).is_err());
        assert!(ValueDistribution::piecewise_linear(&[(0.0, 1.0)]).is_err());
        assert!(ValueDistribution::piecewise_linear(&[(0.0, 0.0), (1.0, 0.0)]).is_err());
    }

    #[test]
    fn triangular_density() {
        // density 2x on [0, 1]: F(x) = x^2, E[v; v >= p] = 2(1 - p^3)/3
        let t = ValueDistribution::piecewise_linear(&[(0.0, 0.0), (1.0, 5.0)]).unwrap();
        for x in [0.0, 0.1, 0.5, 0.93, 1.0] {
            assert_abs_diff_eq!(t.cdf_strict(x), x * x, epsilon = 1e-14);
            assert_abs_diff_eq!(t.partial_expectation(x), 2.0 * (1.0 - x * x * x) / 3.0, epsilon = 1e-14);
            assert_abs_diff_eq!(t.quantile(x * x), x, epsilon = 1e-12);
        }
    }

    #[test]
    fn piecewise_matches_uniform() {
        let pl = ValueDistribution::piecewise_linear(&[(1.0, 3.0), (2.0, 3.0), (4.0, 3.0)]).unwrap();
        let u = ValueDistribution::uniform(1.0, 4.0).unwrap();
        for k in 0..=50 {
            let x = 0.5 + k as f64 * 0.08;
            assert_abs_diff_eq!(pl.cdf_strict(x), u.cdf_strict(x), epsilon = 1e-13);
            assert_abs_diff_eq!(pl.partial_expectation(x), u.partial_expectation(x), epsilon = 1e-13);
        }
    }

    #[test]
    fn discrete_quantile_respects_weights() {
        let d = two_point();
        assert_eq!(d.quantile(0.0), 0.2);
        assert_eq!(d.quantile(0.8999), 0.2);
        assert_eq!(d.quantile(0.9), 0.9);
        assert_eq!(d.quantile(0.99999), 0.9);
    }
}
