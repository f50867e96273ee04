use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use cloudprice_core::bounds::{
    composed_bound, fixed_prob_bound, fleet_bound, h_corner_min, harmonic, m_ratio_term,
    one_length_fleet_bound, rho,
};
use cloudprice_core::offline::{
    correlated_metrics, expected_lp, fleet_half_opt_prices, offline_dp_oracle,
    optimize_correlated_flat, read_trace, sample_trace, write_trace,
};
use cloudprice_core::optimize::{
    best_shared_from_per_server, best_single_from_multi, optimize_flat, optimize_fleet,
    optimize_multi,
};
use cloudprice_core::sim::{seeded_streams, simulate};
use cloudprice_core::{
    CorrelatedClassList, FleetMode, FleetScheme, PriceSchedule, SearchConfig, SimResult,
    SteadyStateMetrics,
};
use clap::ValueEnum;
use thiserror::Error;

use crate::config::{ConfigError, Instance, Model};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] cloudprice_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Two-column output: free-form notes for people, `quantity,value` rows for
/// both people and CSV.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Report {
    pub notes: Vec<String>,
    pub rows: Vec<(String, f64)>,
    /// False when a checked guarantee did not hold.
    pub passed: bool,
}

impl Report {
    fn new() -> Self {
        Self {
            passed: true,
            ..Self::default()
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    fn row(&mut self, k: impl Into<String>, v: f64) {
        self.rows.push((k.into(), v));
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.rows.iter().find(|(k, _)| k == key).map(|r| r.1)
    }

    pub fn write(&self, out: &mut dyn Write, csv_out: bool) -> Result<(), CliError> {
        if csv_out {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["quantity", "value"])?;
            for (k, v) in &self.rows {
                w.write_record([k.as_str(), &v.to_string()])?;
            }
            w.flush()?;
        } else {
            for n in &self.notes {
                writeln!(out, "{n}")?;
            }
            for (k, v) in &self.rows {
                if v.fract() == 0.0 && v.abs() < 1e15 {
                    writeln!(out, "{k:<30} {v:>7}")?;
                } else {
                    writeln!(out, "{k:<30} {v:>18.10}")?;
                }
            }
        }
        Ok(())
    }
}

pub fn describe(schedule: &PriceSchedule) -> String {
    match schedule {
        PriceSchedule::Flat(p) => format!("flat {p}"),
        PriceSchedule::PerLength(ps) => format!("per-length {ps:?}"),
        PriceSchedule::PerServer(ps) => format!("per-server {ps:?}"),
        PriceSchedule::PerServerPerLength(ps) => format!("per-server-per-length {ps:?}"),
    }
}

fn metric_rows(r: &mut Report, m: &SteadyStateMetrics, lambda: f64) {
    r.row("objective", m.objective(lambda));
    r.row("lambda", lambda);
    r.row("welfare", m.welfare_per_step);
    r.row("revenue", m.revenue_per_step);
    r.row("occupancy", m.occupancy);
    for (k, q) in m.accept_prob.iter().enumerate() {
        r.row(format!("accept[{k}]"), *q);
    }
}

fn price_rows(r: &mut Report, schedule: &PriceSchedule) {
    match schedule {
        PriceSchedule::Flat(p) => r.row("price", *p),
        PriceSchedule::PerLength(ps) | PriceSchedule::PerServer(ps) => {
            for (k, p) in ps.iter().enumerate() {
                r.row(format!("price[{k}]"), *p);
            }
        }
        PriceSchedule::PerServerPerLength(ps) => {
            for (j, row) in ps.iter().enumerate() {
                for (k, p) in row.iter().enumerate() {
                    r.row(format!("price[{j}][{k}]"), *p);
                }
            }
        }
    }
}

pub fn evaluate(inst: &Instance) -> Result<Report, CliError> {
    let schedule = inst
        .schedule
        .as_ref()
        .ok_or_else(|| CliError::Usage("evaluate needs a [schedule] table".into()))?;
    let m = inst.sim_model().closed_form(schedule)?;
    let mut r = Report::new();
    r.note(format!("schedule: {}", describe(schedule)));
    metric_rows(&mut r, &m, inst.lambda);
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Scheme {
    Flat,
    Multi,
    PerServer,
    PerServerPerLength,
}

fn correlated_fleet_flat(cs: &[CorrelatedClassList], lambda: f64) -> (f64, f64) {
    let mut candidates: Vec<f64> = cs
        .iter()
        .flat_map(|c| c.classes().iter().map(|k| k.value))
        .chain(std::iter::once(0.0))
        .collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut best = (0.0, f64::NEG_INFINITY);
    for p in candidates {
        let v: f64 = cs.iter().map(|c| correlated_metrics(c, p).objective(lambda)).sum();
        if v > best.1 {
            best = (p, v);
        }
    }
    best
}

pub fn optimize(inst: &Instance, scheme: Scheme, cfg: &SearchConfig) -> Result<Report, CliError> {
    let lambda = inst.lambda;
    let mut r = Report::new();
    let wrong = |model: &str| {
        let name = scheme.to_possible_value().map(|v| v.get_name().to_string());
        CliError::Usage(format!(
            "scheme {} does not apply to {model} models",
            name.unwrap_or_default()
        ))
    };
    match (&inst.model, scheme) {
        (Model::Single(mix), Scheme::Flat | Scheme::Multi) => {
            let dist = inst.dist.as_ref().expect("validated");
            let res = if scheme == Scheme::Flat {
                optimize_flat(mix, dist, lambda, cfg)?
            } else {
                optimize_multi(mix, dist, lambda, cfg)?
            };
            r.note(format!("schedule: {}", describe(&res.schedule)));
            r.note(format!("method: {}", res.method));
            r.row("objective", res.objective_value);
            r.row("lambda", lambda);
            price_rows(&mut r, &res.schedule);
            if scheme == Scheme::Multi {
                let s = best_single_from_multi(mix, dist, &res.schedule.prices(), lambda)?;
                r.row("single_index", s.index as f64);
                r.row("single_price", s.price);
                r.row("single_value", s.flat_value);
                r.row("single_ratio", s.ratio);
            }
        }
        (Model::Fleet(fleet), Scheme::Flat | Scheme::PerServer | Scheme::PerServerPerLength) => {
            let dist = inst.dist.as_ref().expect("validated");
            let fs = match scheme {
                Scheme::Flat => FleetScheme::Flat,
                Scheme::PerServer => FleetScheme::PerServer,
                _ => FleetScheme::PerServerPerLength,
            };
            let res = optimize_fleet(fleet, dist, lambda, fs, cfg)?;
            r.note(format!("schedule: {}", describe(&res.schedule)));
            r.note(format!("method: {}", res.method));
            r.row("objective", res.objective_value);
            r.row("lambda", lambda);
            price_rows(&mut r, &res.schedule);
            if fs == FleetScheme::PerServer {
                let s = best_shared_from_per_server(fleet, dist, &res.schedule.prices(), lambda)?;
                let bound = match fleet.mode() {
                    FleetMode::EqualR => fleet_bound(fleet)?,
                    FleetMode::SharedLength => one_length_fleet_bound(fleet)?,
                };
                r.row("shared_index", s.index as f64);
                r.row("shared_price", s.price);
                r.row("shared_value", s.flat_value);
                r.row("shared_ratio", s.ratio);
                r.row("fleet_bound", bound.value);
            }
        }
        (Model::Correlated(c), Scheme::Flat) => {
            let (p, v) = optimize_correlated_flat(c, lambda)?;
            r.note(format!("schedule: flat {p}"));
            r.note("method: exhaustive");
            r.row("objective", v);
            r.row("lambda", lambda);
            r.row("price", p);
        }
        (Model::CorrelatedFleet(cs), Scheme::Flat) => {
            let (p, v) = correlated_fleet_flat(cs, lambda);
            r.note(format!("schedule: flat {p}"));
            r.note("method: exhaustive");
            r.row("objective", v);
            r.row("lambda", lambda);
            r.row("price", p);
        }
        (Model::Single(_), _) => return Err(wrong("single-server")),
        (Model::Fleet(_), _) => return Err(wrong("fleet")),
        (Model::Correlated(_), _) => return Err(wrong("correlated")),
        (Model::CorrelatedFleet(_), _) => return Err(wrong("correlated-fleet")),
    }
    Ok(r)
}

pub fn bounds(inst: &Instance) -> Result<Report, CliError> {
    let mut r = Report::new();
    match &inst.model {
        Model::Single(mix) if mix.len() == 1 => {
            r.note("one job length: a single price is optimal");
            r.row("bound", 1.0);
        }
        Model::Single(mix) => {
            if mix.len() == 2 {
                let (a, p) = (mix.lengths(), mix.probs());
                r.row("rho", rho(a[0], a[1], p[0], p[1])?);
                r.row("fixed_prob_bound", fixed_prob_bound(p[0]).value);
            }
            let corner = h_corner_min(mix)?;
            r.row("h_corner_min", corner.value);
            let witness = corner.witness.unwrap_or_default();
            r.note(format!("witness B = {witness:?}"));
            for (k, b) in witness.iter().enumerate() {
                r.row(format!("witness[{k}]"), *b);
            }
        }
        Model::Fleet(fleet) => {
            r.row("harmonic_term", 1.0 / harmonic(fleet.len()));
            match fleet.mode() {
                FleetMode::EqualR => {
                    let b = fleet_bound(fleet)?;
                    let loads: Vec<f64> = fleet.servers().iter().map(|m| m.load()).collect();
                    let m = loads.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                        / loads.iter().cloned().fold(f64::INFINITY, f64::min);
                    r.note(format!("fleet bound attained by the {:?} term", b.kind));
                    r.row("load_ratio", m);
                    r.row("m_ratio_term", m_ratio_term(m));
                    r.row("fleet_bound", b.value);
                    r.row("composed_bound", composed_bound(fleet)?.value);
                }
                FleetMode::SharedLength => {
                    let rates: Vec<f64> = fleet.servers().iter().map(|m| m.probs()[0]).collect();
                    let m = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                        / rates.iter().cloned().fold(f64::INFINITY, f64::min);
                    r.row("rate_ratio", m);
                    r.row("m_ratio_term", m_ratio_term(m));
                    r.row("inverse_length", 1.0 / f64::from(fleet.shared_length().unwrap_or(1)));
                    r.row("one_length_bound", one_length_fleet_bound(fleet)?.value);
                }
            }
        }
        Model::Correlated(_) | Model::CorrelatedFleet(_) => {
            r.note("the flat price Opt/2 keeps half of the offline optimum");
            r.row("half_opt_bound", 0.5);
        }
    }
    Ok(r)
}

/// Which prices `simulate` posts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriceChoice {
    Config,
    HalfOpt,
    Flat(f64),
}

impl std::str::FromStr for PriceChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "config" => Ok(Self::Config),
            "half-opt" => Ok(Self::HalfOpt),
            _ => s
                .parse::<f64>()
                .ok()
                .filter(|p| p.is_finite() && *p >= 0.0)
                .map(Self::Flat)
                .ok_or_else(|| format!("expected config, half-opt or a nonnegative number, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimReport {
    pub schedule: PriceSchedule,
    pub result: SimResult,
    pub closed_form: SteadyStateMetrics,
    /// `(Opt, price)` for half-Opt runs.
    pub half_opt: Option<(f64, f64)>,
    pub passed: bool,
}

pub fn simulate_cmd(inst: &Instance, price: PriceChoice) -> Result<SimReport, CliError> {
    let (schedule, half_opt) = match price {
        PriceChoice::Config => (
            inst.schedule.clone().ok_or_else(|| {
                CliError::Usage("simulate needs a [schedule] table or --price".into())
            })?,
            None,
        ),
        PriceChoice::Flat(p) => (PriceSchedule::Flat(p), None),
        PriceChoice::HalfOpt => match &inst.model {
            Model::Correlated(c) => {
                let opt = expected_lp(c).opt;
                (PriceSchedule::Flat(opt / 2.0), Some((opt, opt / 2.0)))
            }
            Model::CorrelatedFleet(cs) => {
                let h = fleet_half_opt_prices(cs)?;
                (PriceSchedule::Flat(h.price), Some((h.opt_sum, h.price)))
            }
            _ => {
                return Err(CliError::Usage(
                    "--price half-opt needs a correlated model".into(),
                ))
            }
        },
    };
    let model = inst.sim_model();
    let closed_form = model.closed_form(&schedule)?;
    let result = simulate(model, &schedule, &inst.sim)?;
    let passed = match half_opt {
        Some((opt, _)) => result.welfare.mean >= 0.5 * opt - 3.0 * result.welfare.se,
        None => true,
    };
    Ok(SimReport {
        schedule,
        result,
        closed_form,
        half_opt,
        passed,
    })
}

impl SimReport {
    fn surplus(&self) -> (f64, f64) {
        let xs: Vec<f64> = self.result.replications.iter().map(|r| r.surplus).collect();
        let k = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / k;
        let se = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
        } else {
            0.0
        };
        (mean, se)
    }

    pub fn write(&self, out: &mut dyn Write, csv_out: bool, cfg_line: &str) -> Result<(), CliError> {
        let r = &self.result;
        let cf = &self.closed_form;
        let (surplus, surplus_se) = self.surplus();
        if csv_out {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["row", "welfare", "revenue", "surplus", "occupancy"])?;
            for (k, rep) in r.replications.iter().enumerate() {
                w.write_record([
                    k.to_string(),
                    rep.welfare.to_string(),
                    rep.revenue.to_string(),
                    rep.surplus.to_string(),
                    rep.occupancy.to_string(),
                ])?;
            }
            let agg = [
                ("mean", r.welfare.mean, r.revenue.mean, surplus, r.occupancy.mean),
                ("se", r.welfare.se, r.revenue.se, surplus_se, r.occupancy.se),
                (
                    "closed_form",
                    cf.welfare_per_step,
                    cf.revenue_per_step,
                    cf.welfare_per_step - cf.revenue_per_step,
                    cf.occupancy,
                ),
            ];
            for (name, a, b, c, d) in agg {
                w.write_record([name.to_string(), a.to_string(), b.to_string(), c.to_string(), d.to_string()])?;
            }
            w.flush()?;
            return Ok(());
        }
        writeln!(out, "schedule: {}", describe(&self.schedule))?;
        writeln!(out, "{cfg_line}")?;
        writeln!(
            out,
            "{:<10} {:>14} {:>12} {:>14} {:>14} {:>14} {:>6}",
            "metric", "mean", "se", "ci_low", "ci_high", "closed_form", "in_2se"
        )?;
        let rows = [
            ("welfare", &r.welfare, cf.welfare_per_step),
            ("revenue", &r.revenue, cf.revenue_per_step),
            ("occupancy", &r.occupancy, cf.occupancy),
        ];
        for (name, e, exact) in rows {
            writeln!(
                out,
                "{:<10} {:>14.8} {:>12.3e} {:>14.8} {:>14.8} {:>14.8} {:>6}",
                name,
                e.mean,
                e.se,
                e.ci_low,
                e.ci_high,
                exact,
                if e.covers(exact, 2.0) { "yes" } else { "no" }
            )?;
        }
        writeln!(out, "{:<10} {:>14.8} {:>12.3e}", "surplus", surplus, surplus_se)?;
        if let Some((opt, price)) = self.half_opt {
            writeln!(out, "offline optimum (LP)  {opt:.10}")?;
            writeln!(out, "half-opt price        {price:.10}")?;
            writeln!(out, "welfare / optimum     {:.10}", r.welfare.mean / opt)?;
            writeln!(
                out,
                "welfare >= Opt/2 - 3se: {}",
                if self.passed { "yes" } else { "NO" }
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct OfflineOptions {
    pub horizon: u64,
    pub seed: u64,
    pub trace_in: Option<PathBuf>,
    pub trace_out: Option<PathBuf>,
}

pub fn offline(inst: &Instance, opts: &OfflineOptions) -> Result<Report, CliError> {
    let mut r = Report::new();
    match &inst.model {
        Model::Correlated(c) => {
            let lp = expected_lp(c);
            r.row("opt", lp.opt);
            for (k, x) in lp.x.iter().enumerate() {
                r.row(format!("lp_x[{k}]"), *x);
            }
            let price = lp.opt / 2.0;
            let m = correlated_metrics(c, price);
            r.row("half_opt_price", price);
            r.row("welfare", m.welfare_per_step);
            r.row("revenue", m.revenue_per_step);
            r.row("welfare_over_opt", ratio(m.welfare_per_step, lp.opt));
            r.passed = m.welfare_per_step >= 0.5 * lp.opt - 1e-12;

            let trace = match &opts.trace_in {
                Some(path) => {
                    let f = File::open(path)
                        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                    let trace = read_trace(BufReader::new(f))?;
                    if let Some(j) = trace.iter().find(|j| j.step > opts.horizon) {
                        return Err(CliError::Usage(format!(
                            "trace has a job at step {} beyond the horizon {}",
                            j.step, opts.horizon
                        )));
                    }
                    r.note(format!("trace read from {}", path.display()));
                    trace
                }
                None => {
                    let mut rng = seeded_streams(opts.seed, 1).pop().expect("one stream");
                    sample_trace(c, opts.horizon, &mut rng)
                }
            };
            if let Some(path) = &opts.trace_out {
                let f = File::create(path)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                let mut w = BufWriter::new(f);
                write_trace(&mut w, &trace)?;
                w.flush()?;
                r.note(format!("trace written to {}", path.display()));
            }
            let dp = offline_dp_oracle(&trace, opts.horizon);
            r.row("horizon", opts.horizon as f64);
            r.row("trace_jobs", trace.len() as f64);
            r.row("dp_per_step", dp);
            r.row("dp_over_opt", ratio(dp, lp.opt));
        }
        Model::CorrelatedFleet(cs) => {
            if opts.trace_in.is_some() || opts.trace_out.is_some() {
                return Err(CliError::Usage("traces are per server; use a correlated model".into()));
            }
            let h = fleet_half_opt_prices(cs)?;
            r.row("opt_sum", h.opt_sum);
            for (j, (p, w)) in h.candidates.iter().zip(&h.welfare).enumerate() {
                r.row(format!("candidate[{j}]"), *p);
                r.row(format!("candidate_welfare[{j}]"), *w);
            }
            r.row("chosen_server", h.server as f64);
            r.row("price", h.price);
            r.row("welfare", h.welfare[h.server]);
            r.row("welfare_over_opt_sum", ratio(h.welfare[h.server], h.opt_sum));
        }
        _ => {
            return Err(CliError::Usage(
                "offline needs a correlated or correlated-fleet model".into(),
            ))
        }
    }
    Ok(r)
}

fn ratio(x: f64, y: f64) -> f64 {
    if y > 0.0 {
        x / y
    } else {
        1.0
    }
}
