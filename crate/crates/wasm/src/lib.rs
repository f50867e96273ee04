//! Browser bindings for three small interactive views: how welfare and
//! revenue move with a flat price, the flat-vs-two-price ratio for two job
//! lengths, and the corner lower bound for a job mix.
//!
//! The plain functions are ordinary Rust and are what the tests call; the
//! exported wrappers only convert errors to strings for JavaScript.

use cloudprice_core::bounds::{h_corner_min, tight_bimodal_instance};
use cloudprice_core::optimize::{optimize_flat, optimize_multi};
use cloudprice_core::steady::single_server_flat_metrics;
use cloudprice_core::{JobMix, SearchConfig, ValueDistribution};
use wasm_bindgen::prelude::*;

type Result<T> = std::result::Result<T, String>;

fn err(e: cloudprice_core::Error) -> String {
    e.to_string()
}

/// Welfare and revenue over a grid of flat prices, with both optima.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Curve {
    prices: Vec<f64>,
    welfare: Vec<f64>,
    revenue: Vec<f64>,
    flat_price: f64,
    flat_value: f64,
    multi_prices: Vec<f64>,
    multi_value: f64,
}

#[wasm_bindgen]
impl Curve {
    pub fn prices(&self) -> Vec<f64> {
        self.prices.clone()
    }
    pub fn welfare(&self) -> Vec<f64> {
        self.welfare.clone()
    }
    pub fn revenue(&self) -> Vec<f64> {
        self.revenue.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn flat_price(&self) -> f64 {
        self.flat_price
    }
    #[wasm_bindgen(getter)]
    pub fn flat_value(&self) -> f64 {
        self.flat_value
    }
    /// One price per job length.
    pub fn multi_prices(&self) -> Vec<f64> {
        self.multi_prices.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn multi_value(&self) -> f64 {
        self.multi_value
    }
}

/// Sweeps `points` flat prices across a uniform value law on `[lo, hi]`.
pub fn curve(lengths: &[u32], probs: &[f64], lo: f64, hi: f64, points: usize, lambda: f64) -> Result<Curve> {
    if points < 2 {
        return Err("need at least 2 points".into());
    }
    let mix = JobMix::new(lengths.to_vec(), probs.to_vec()).map_err(err)?;
    let dist = ValueDistribution::uniform(lo, hi).map_err(err)?;
    let cfg = SearchConfig::default();
    let mut c = Curve {
        prices: Vec::with_capacity(points),
        welfare: Vec::with_capacity(points),
        revenue: Vec::with_capacity(points),
        flat_price: 0.0,
        flat_value: 0.0,
        multi_prices: Vec::new(),
        multi_value: 0.0,
    };
    for i in 0..points {
        let p = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        let m = single_server_flat_metrics(&mix, &dist, p).map_err(err)?;
        c.prices.push(p);
        c.welfare.push(m.welfare_per_step);
        c.revenue.push(m.revenue_per_step);
    }
    let flat = optimize_flat(&mix, &dist, lambda, &cfg).map_err(err)?;
    c.flat_price = flat.schedule.prices()[0];
    c.flat_value = flat.objective_value;
    let multi = optimize_multi(&mix, &dist, lambda, &cfg).map_err(err)?;
    c.multi_prices = multi.schedule.prices();
    c.multi_value = multi.objective_value;
    Ok(c)
}

/// `[closed-form ratio, ratio realized by the worst-case instance]` for two
/// lengths `a < b` arriving with probabilities `r1`, `r2`.
pub fn two_lengths(a: u32, b: u32, r1: f64, r2: f64) -> Result<Vec<f64>> {
    let t = tight_bimodal_instance(a, b, r1, r2, 1e-4).map_err(err)?;
    Ok(vec![t.rho(), t.realized_ratio(1.0).map_err(err)?])
}

/// Corner lower bound for a mix: the bound followed by its witness corner.
pub fn corner(lengths: &[u32], probs: &[f64]) -> Result<Vec<f64>> {
    let mix = JobMix::new(lengths.to_vec(), probs.to_vec()).map_err(err)?;
    let b = h_corner_min(&mix).map_err(err)?;
    let mut out = vec![b.value];
    out.extend(b.witness.unwrap_or_default());
    Ok(out)
}

#[wasm_bindgen(js_name = priceCurve)]
pub fn price_curve(
    lengths: Vec<u32>,
    probs: Vec<f64>,
    lo: f64,
    hi: f64,
    points: usize,
    lambda: f64,
) -> std::result::Result<Curve, String> {
    curve(&lengths, &probs, lo, hi, points, lambda)
}

#[wasm_bindgen(js_name = twoLengthRatio)]
pub fn two_length_ratio(a: u32, b: u32, r1: f64, r2: f64) -> std::result::Result<Vec<f64>, String> {
    two_lengths(a, b, r1, r2)
}

#[wasm_bindgen(js_name = cornerBound)]
pub fn corner_bound(lengths: Vec<u32>, probs: Vec<f64>) -> std::result::Result<Vec<f64>, String> {
    corner(&lengths, &probs)
}
