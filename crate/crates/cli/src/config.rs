//! Instance files: TOML with a top-level `lambda` and the tables `[model]`,
//! `[distribution]`, `[schedule]` and `[sim]`. See the README for a full
//! example.

use std::ops::Range;
use std::path::{Path, PathBuf};

use cloudprice_core::{
    CorrelatedClassList, Fleet, FleetMode, JobClass, JobMix, PriceSchedule, SimConfig, SimModel,
    ValueDistribution,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::Spanned;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {key}: {message}")]
    Invalid {
        path: PathBuf,
        line: usize,
        key: String,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Single,
    Fleet,
    Correlated,
    CorrelatedFleet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FleetModeName {
    EqualR,
    SharedLength,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionKind {
    Uniform,
    Discrete,
    PiecewiseLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Flat,
    PerLength,
    PerServer,
    PerServerPerLength,
    PerClass,
}

impl ScheduleKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Flat => "flat",
            Self::PerLength => "per-length",
            Self::PerServer => "per-server",
            Self::PerServerPerLength => "per-server-per-length",
            Self::PerClass => "per-class",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriceList {
    Flat(Vec<f64>),
    Nested(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSection {
    pub prob: Spanned<f64>,
    pub length: Spanned<u32>,
    pub value: Spanned<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Spanned<Vec<u32>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Spanned<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<Spanned<ClassSection>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: Spanned<ModelKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Spanned<FleetModeName>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Spanned<Vec<u32>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Spanned<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<Spanned<ClassSection>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub servers: Option<Vec<Spanned<ServerSection>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSection {
    pub kind: Spanned<DistributionKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<Spanned<f64>>,
    /// `[value, probability]` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Spanned<Vec<(f64, f64)>>>,
    /// `[x, density]` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<Spanned<Vec<(f64, f64)>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub kind: Spanned<ScheduleKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prices: Option<Spanned<PriceList>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<Spanned<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replications: Option<Spanned<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<Spanned<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<Spanned<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    /// Weight on welfare in `lambda * welfare + (1 - lambda) * revenue`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Spanned<f64>>,
    pub model: Spanned<ModelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<Spanned<DistributionSection>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Spanned<ScheduleSection>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<Spanned<SimSection>>,
}

/// A validated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub model: Model,
    pub dist: Option<ValueDistribution>,
    pub schedule: Option<PriceSchedule>,
    pub lambda: f64,
    pub sim: SimConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Single(JobMix),
    Fleet(Fleet),
    Correlated(CorrelatedClassList),
    CorrelatedFleet(Vec<CorrelatedClassList>),
}

impl Instance {
    /// The simulation view of this instance.
    pub fn sim_model(&self) -> SimModel<'_> {
        match &self.model {
            Model::Single(mix) => SimModel::Single {
                mix,
                dist: self.dist.as_ref().expect("validated"),
            },
            Model::Fleet(fleet) => SimModel::Fleet {
                fleet,
                dist: self.dist.as_ref().expect("validated"),
            },
            Model::Correlated(c) => SimModel::Correlated(c),
            Model::CorrelatedFleet(cs) => SimModel::CorrelatedFleet(cs),
        }
    }
}

/// Line number (1-based) of byte offset `at`.
fn line_of(src: &str, at: usize) -> usize {
    src[..at.min(src.len())].matches('\n').count() + 1
}

/// Best-effort dotted key for the text at `at`: the last table header before
/// it plus the key on its line.
fn key_path_at(src: &str, at: usize) -> String {
    let at = at.min(src.len());
    let line_start = src[..at].rfind('\n').map_or(0, |i| i + 1);
    let line = src[line_start..].lines().next().unwrap_or("");
    let key = line
        .split_once('=')
        .map(|(k, _)| k.trim().to_string())
        .filter(|k| !k.starts_with('['));
    let table = src[..line_start].lines().rev().find_map(|l| {
        let l = l.trim();
        l.starts_with('[')
            .then(|| l.trim_matches(|c| c == '[' || c == ']').trim().to_string())
    });
    match (table, key) {
        (Some(t), Some(k)) => format!("{t}.{k}"),
        (Some(t), None) => t,
        (None, Some(k)) => k,
        (None, None) => "(document)".into(),
    }
}

struct Ctx<'a> {
    src: &'a str,
    path: &'a Path,
}

impl Ctx<'_> {
    fn err(&self, span: Range<usize>, key: impl Into<String>, message: impl ToString) -> ConfigError {
        ConfigError::Invalid {
            path: self.path.to_path_buf(),
            line: line_of(self.src, span.start),
            key: key.into(),
            message: message.to_string(),
        }
    }

    fn require<'b, T>(
        &self,
        field: &'b Option<Spanned<T>>,
        owner: Range<usize>,
        key: &str,
    ) -> Result<&'b Spanned<T>, ConfigError> {
        field
            .as_ref()
            .ok_or_else(|| self.err(owner, key, "missing required key"))
    }

    fn mix(
        &self,
        owner: Range<usize>,
        prefix: &str,
        lengths: &Option<Spanned<Vec<u32>>>,
        probs: &Option<Spanned<Vec<f64>>>,
    ) -> Result<JobMix, ConfigError> {
        let lengths = self.require(lengths, owner.clone(), &format!("{prefix}.lengths"))?;
        let probs = self.require(probs, owner, &format!("{prefix}.probs"))?;
        JobMix::new(lengths.get_ref().clone(), probs.get_ref().clone()).map_err(|e| {
            let l = lengths.get_ref();
            if l.is_empty() || l.contains(&0) || l.windows(2).any(|w| w[0] > w[1]) {
                self.err(lengths.span(), format!("{prefix}.lengths"), e)
            } else {
                self.err(probs.span(), format!("{prefix}.probs"), e)
            }
        })
    }

    fn classes(
        &self,
        owner: Range<usize>,
        prefix: &str,
        classes: &Option<Vec<Spanned<ClassSection>>>,
    ) -> Result<CorrelatedClassList, ConfigError> {
        let Some(classes) = classes else {
            return Err(self.err(owner, format!("{prefix}.classes"), "missing required key"));
        };
        if classes.is_empty() {
            return Err(self.err(owner, format!("{prefix}.classes"), "needs at least one class"));
        }
        let mut out = Vec::with_capacity(classes.len());
        for (k, c) in classes.iter().enumerate() {
            let c = c.get_ref();
            let key = |f: &str| format!("{prefix}.classes[{k}].{f}");
            let class = JobClass {
                prob: *c.prob.get_ref(),
                length: *c.length.get_ref(),
                value: *c.value.get_ref(),
            };
            if CorrelatedClassList::new(vec![class]).is_err() {
                // earlier classes passed, so the error names this class
                let mut probe = out.clone();
                probe.push(class);
                let e = CorrelatedClassList::new(probe).unwrap_err();
                return Err(if !(class.prob > 0.0 && class.prob <= 1.0) {
                    self.err(c.prob.span(), key("prob"), e)
                } else if class.length == 0 {
                    self.err(c.length.span(), key("length"), e)
                } else {
                    self.err(c.value.span(), key("value"), e)
                });
            }
            out.push(class);
        }
        CorrelatedClassList::new(out)
            .map_err(|e| self.err(classes[0].get_ref().prob.span(), format!("{prefix}.classes"), e))
    }

    fn model(&self, m: &Spanned<ModelSection>) -> Result<Model, ConfigError> {
        let span = m.span();
        let m = m.get_ref();
        let unused = |present: bool, key: &str| -> Result<(), ConfigError> {
            if present {
                Err(self.err(
                    span.clone(),
                    format!("model.{key}"),
                    format!("not used by model kind {:?}", m.kind.get_ref()),
                ))
            } else {
                Ok(())
            }
        };
        match m.kind.get_ref() {
            ModelKind::Single => {
                unused(m.servers.is_some(), "servers")?;
                unused(m.classes.is_some(), "classes")?;
                unused(m.mode.is_some(), "mode")?;
                Ok(Model::Single(self.mix(span, "model", &m.lengths, &m.probs)?))
            }
            ModelKind::Correlated => {
                unused(m.servers.is_some(), "servers")?;
                unused(m.lengths.is_some(), "lengths")?;
                unused(m.probs.is_some(), "probs")?;
                unused(m.mode.is_some(), "mode")?;
                Ok(Model::Correlated(self.classes(span, "model", &m.classes)?))
            }
            ModelKind::Fleet | ModelKind::CorrelatedFleet => {
                unused(m.lengths.is_some(), "lengths")?;
                unused(m.probs.is_some(), "probs")?;
                unused(m.classes.is_some(), "classes")?;
                let servers = match &m.servers {
                    Some(s) if !s.is_empty() => s,
                    _ => return Err(self.err(span, "model.servers", "needs at least one server")),
                };
                if *m.kind.get_ref() == ModelKind::CorrelatedFleet {
                    unused(m.mode.is_some(), "mode")?;
                    let lists = servers
                        .iter()
                        .enumerate()
                        .map(|(j, s)| {
                            self.classes(s.span(), &format!("model.servers[{j}]"), &s.get_ref().classes)
                        })
                        .collect::<Result<_, _>>()?;
                    return Ok(Model::CorrelatedFleet(lists));
                }
                let mode = self.require(&m.mode, span.clone(), "model.mode")?;
                let mixes = servers
                    .iter()
                    .enumerate()
                    .map(|(j, s)| {
                        let s_ref = s.get_ref();
                        self.mix(s.span(), &format!("model.servers[{j}]"), &s_ref.lengths, &s_ref.probs)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let mode_value = match mode.get_ref() {
                    FleetModeName::EqualR => FleetMode::EqualR,
                    FleetModeName::SharedLength => FleetMode::SharedLength,
                };
                Fleet::new(mixes, mode_value)
                    .map(Model::Fleet)
                    .map_err(|e| self.err(mode.span(), "model.mode", e))
            }
        }
    }

    fn distribution(&self, d: &Spanned<DistributionSection>) -> Result<ValueDistribution, ConfigError> {
        let span = d.span();
        let d = d.get_ref();
        match d.kind.get_ref() {
            DistributionKind::Uniform => {
                let lo = self.require(&d.lo, span.clone(), "distribution.lo")?;
                let hi = self.require(&d.hi, span, "distribution.hi")?;
                ValueDistribution::uniform(*lo.get_ref(), *hi.get_ref())
                    .map_err(|e| self.err(hi.span(), "distribution.hi", e))
            }
            DistributionKind::Discrete => {
                let atoms = self.require(&d.atoms, span, "distribution.atoms")?;
                ValueDistribution::discrete(atoms.get_ref())
                    .map_err(|e| self.err(atoms.span(), "distribution.atoms", e))
            }
            DistributionKind::PiecewiseLinear => {
                let bps = self.require(&d.breakpoints, span, "distribution.breakpoints")?;
                ValueDistribution::piecewise_linear(bps.get_ref())
                    .map_err(|e| self.err(bps.span(), "distribution.breakpoints", e))
            }
        }
    }

    fn schedule(
        &self,
        s: &Spanned<ScheduleSection>,
        model: &Model,
        dist: Option<&ValueDistribution>,
    ) -> Result<PriceSchedule, ConfigError> {
        let span = s.span();
        let s = s.get_ref();
        let flat_list = |key: &str| -> Result<(Range<usize>, Vec<f64>), ConfigError> {
            let p = self.require(&s.prices, span.clone(), key)?;
            match p.get_ref() {
                PriceList::Flat(v) => Ok((p.span(), v.clone())),
                PriceList::Nested(_) => Err(self.err(p.span(), key, "expected a flat list of prices")),
            }
        };
        let (schedule, at) = match s.kind.get_ref() {
            ScheduleKind::Flat => {
                let p = self.require(&s.price, span.clone(), "schedule.price")?;
                (PriceSchedule::Flat(*p.get_ref()), (p.span(), "schedule.price"))
            }
            ScheduleKind::PerLength | ScheduleKind::PerClass => {
                let (sp, v) = flat_list("schedule.prices")?;
                (PriceSchedule::PerLength(v), (sp, "schedule.prices"))
            }
            ScheduleKind::PerServer => {
                let (sp, v) = flat_list("schedule.prices")?;
                (PriceSchedule::PerServer(v), (sp, "schedule.prices"))
            }
            ScheduleKind::PerServerPerLength => {
                let p = self.require(&s.prices, span.clone(), "schedule.prices")?;
                let nested = match p.get_ref() {
                    PriceList::Nested(v) => v.clone(),
                    PriceList::Flat(v) if v.is_empty() => Vec::new(),
                    PriceList::Flat(_) => {
                        return Err(self.err(p.span(), "schedule.prices", "expected one list of prices per server"))
                    }
                };
                (PriceSchedule::PerServerPerLength(nested), (p.span(), "schedule.prices"))
            }
        };
        let allowed: &[ScheduleKind] = match model {
            Model::Single(_) => &[ScheduleKind::Flat, ScheduleKind::PerLength],
            Model::Fleet(_) => &[ScheduleKind::Flat, ScheduleKind::PerServer, ScheduleKind::PerServerPerLength],
            Model::Correlated(_) => &[ScheduleKind::Flat, ScheduleKind::PerClass],
            Model::CorrelatedFleet(_) => &[ScheduleKind::Flat, ScheduleKind::PerServer, ScheduleKind::PerServerPerLength],
        };
        if !allowed.contains(s.kind.get_ref()) {
            return Err(self.err(
                s.kind.span(),
                "schedule.kind",
                format!(
                    "this model takes {}",
                    allowed.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
                ),
            ));
        }
        if let Some(p) = schedule.prices().into_iter().find(|p| !p.is_finite() || *p < 0.0) {
            return Err(self.err(at.0, at.1, format!("price {p} must be finite and nonnegative")));
        }
        let check = match (model, dist) {
            (Model::Single(mix), Some(dist)) => SimModel::Single { mix, dist }.closed_form(&schedule).map(drop),
            (Model::Fleet(fleet), Some(dist)) => SimModel::Fleet { fleet, dist }.closed_form(&schedule).map(drop),
            (Model::Correlated(c), _) => SimModel::Correlated(c).closed_form(&schedule).map(drop),
            (Model::CorrelatedFleet(cs), _) => SimModel::CorrelatedFleet(cs).closed_form(&schedule).map(drop),
            _ => Ok(()),
        };
        check.map_err(|e| self.err(at.0, at.1, e))?;
        Ok(schedule)
    }

    fn sim(&self, s: Option<&Spanned<SimSection>>) -> Result<SimConfig, ConfigError> {
        let mut cfg = SimConfig::default();
        let Some(s) = s else { return Ok(cfg) };
        let s = s.get_ref();
        if let Some(h) = &s.horizon {
            if *h.get_ref() == 0 {
                return Err(self.err(h.span(), "sim.horizon", "must be positive"));
            }
            cfg = SimConfig::new(*h.get_ref(), cfg.replications, cfg.seed);
        }
        if let Some(r) = &s.replications {
            if *r.get_ref() == 0 {
                return Err(self.err(r.span(), "sim.replications", "must be positive"));
            }
            cfg.replications = *r.get_ref();
        }
        if let Some(seed) = &s.seed {
            cfg.seed = *seed.get_ref();
        }
        if let Some(w) = &s.warmup {
            if *w.get_ref() >= cfg.horizon {
                return Err(self.err(w.span(), "sim.warmup", "must be below the horizon"));
            }
            cfg.warmup = *w.get_ref();
        }
        Ok(cfg)
    }
}

impl InstanceConfig {
    pub fn parse(src: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(src).map_err(|e| {
            let at = e.span().map_or(0, |s| s.start);
            ConfigError::Invalid {
                path: path.to_path_buf(),
                line: line_of(src, at),
                key: key_path_at(src, at),
                message: e.message().to_string(),
            }
        })
    }

    /// Reads, parses and validates a config file.
    pub fn load(path: &Path) -> Result<(Self, Instance), ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg = Self::parse(&src, path)?;
        let instance = cfg.validate(&src, path)?;
        Ok((cfg, instance))
    }

    /// Checks every field and builds the instance. `src` is the text the
    /// config was parsed from, used to turn spans into line numbers.
    pub fn validate(&self, src: &str, path: &Path) -> Result<Instance, ConfigError> {
        let ctx = Ctx { src, path };
        let lambda = match &self.lambda {
            Some(l) => {
                if !(0.0..=1.0).contains(l.get_ref()) {
                    return Err(ctx.err(l.span(), "lambda", "must lie in [0, 1]"));
                }
                *l.get_ref()
            }
            None => 1.0,
        };
        let model = ctx.model(&self.model)?;
        let needs_dist = matches!(model, Model::Single(_) | Model::Fleet(_));
        let dist = match (&self.distribution, needs_dist) {
            (Some(d), true) => Some(ctx.distribution(d)?),
            (None, true) => {
                return Err(ctx.err(self.model.span(), "distribution", "missing; this model needs a value distribution"))
            }
            (Some(d), false) => {
                return Err(ctx.err(d.span(), "distribution", "correlated models carry their own class values"))
            }
            (None, false) => None,
        };
        let schedule = self
            .schedule
            .as_ref()
            .map(|s| ctx.schedule(s, &model, dist.as_ref()))
            .transpose()?;
        let sim = ctx.sim(self.sim.as_ref())?;
        Ok(Instance {
            model,
            dist,
            schedule,
            lambda,
            sim,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    pub fn set_lambda(&mut self, lambda: f64) {
        self.lambda = Some(Spanned::new(0..0, lambda));
    }

    fn sim_mut(&mut self) -> &mut SimSection {
        self.sim
            .get_or_insert_with(|| Spanned::new(0..0, SimSection::default()))
            .get_mut()
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.sim_mut().seed = Some(Spanned::new(0..0, seed));
    }

    pub fn set_horizon(&mut self, horizon: u64) {
        let sim = self.sim_mut();
        sim.horizon = Some(Spanned::new(0..0, horizon));
        // keep the default warmup proportional to the new horizon
        if sim.warmup.as_ref().is_some_and(|w| *w.get_ref() >= horizon) {
            sim.warmup = None;
        }
    }

    pub fn set_replications(&mut self, reps: usize) {
        self.sim_mut().replications = Some(Spanned::new(0..0, reps));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_path_from_offset() {
        let src = "lambda = 1\n[model]\nkind = \"single\"\nprobs = [0.6, 0.6]\n";
        let at = src.find("probs").unwrap() + 3;
        assert_eq!(key_path_at(src, at), "model.probs");
        assert_eq!(line_of(src, at), 4);
        assert_eq!(key_path_at(src, 2), "lambda");
    }
}
