//! JSON scenario files and their translation into simulator configs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::MarkovChannel;
use crate::error::{check_open_probability, check_probability, Error, Result};
use crate::multicast::{AudienceChange, InfraConfig, InfraScheme};
use crate::multihop::{DualParams, Link, MultihopConfig, MultihopScheme, Session, StepRule, Topology};
use crate::sensing::SensorProfile;
use crate::video::{MulticastGroup, VideoSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Infrastructure,
    Multihop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKey {
    Gamma,
    Channels,
    Eta,
    Sensing,
    SlotLen,
}

impl SweepKey {
    pub fn name(self) -> &'static str {
        match self {
            SweepKey::Gamma => "gamma",
            SweepKey::Channels => "channels",
            SweepKey::Eta => "eta",
            SweepKey::Sensing => "sensing",
            SweepKey::SlotLen => "slot_len",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "gamma" => Ok(SweepKey::Gamma),
            "channels" => Ok(SweepKey::Channels),
            "eta" => Ok(SweepKey::Eta),
            "sensing" => Ok(SweepKey::Sensing),
            "slot_len" => Ok(SweepKey::SlotLen),
            _ => Err(Error::invalid("sweep.key", format!("unknown key `{name}`"))),
        }
    }
}

/// A sweep point: a number, or an `"epsilon:delta"` pair for sensing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Number(f64),
    Text(String),
}

impl SweepValue {
    pub fn label(&self) -> String {
        match self {
            SweepValue::Number(x) => crate::harness::report::sig6(*x),
            SweepValue::Text(s) => s.clone(),
        }
    }

    fn number(&self, key: SweepKey) -> Result<f64> {
        match self {
            SweepValue::Number(x) => Ok(*x),
            SweepValue::Text(s) => s
                .parse()
                .map_err(|_| Error::invalid(format!("sweep.{}", key.name()), format!("`{s}` is not a number"))),
        }
    }

    fn pair(&self) -> Result<(f64, f64)> {
        let text = match self {
            SweepValue::Text(s) => s.as_str(),
            SweepValue::Number(x) => {
                return Err(Error::invalid(
                    "sweep.sensing",
                    format!("{x} is not an `epsilon:delta` pair"),
                ))
            }
        };
        let bad = || Error::invalid("sweep.sensing", format!("`{text}` is not an `epsilon:delta` pair"));
        let (e, d) = text.split_once(':').ok_or_else(bad)?;
        Ok((
            e.trim().parse().map_err(|_| bad())?,
            d.trim().parse().map_err(|_| bad())?,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub key: SweepKey,
    pub values: Vec<SweepValue>,
}

/// A licensed channel, given either by its transition probabilities or by
/// its utilization and memory (`lambda - mu`). Sensing and collision
/// parameters fall back to the block defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct SensingDefaults {
    pub epsilon: f64,
    pub delta: f64,
    pub gamma: f64,
}

impl ChannelSpec {
    fn chain(&self, field: &str) -> Result<MarkovChannel> {
        match (self.lambda, self.mu, self.eta, self.memory) {
            (Some(l), Some(m), None, None) => MarkovChannel::new(l, m),
            (None, None, Some(eta), memory) => MarkovChannel::from_utilization(eta, memory.unwrap_or(0.5)),
            _ => Err(Error::invalid(
                field,
                "give either `lambda` and `mu`, or `eta` (and optionally `memory`)",
            )),
        }
    }

    fn resolve(&self, field: &str, d: &SensingDefaults) -> Result<(MarkovChannel, SensorProfile, f64)> {
        let chain = self.chain(field)?;
        let profile = SensorProfile::new(self.epsilon.unwrap_or(d.epsilon), self.delta.unwrap_or(d.delta))?;
        let gamma = self.gamma.unwrap_or(d.gamma);
        check_open_probability("gamma", gamma)?;
        Ok((chain, profile, gamma))
    }

    fn memory(&self) -> f64 {
        match (self.lambda, self.mu) {
            (Some(l), Some(m)) => l - m,
            _ => self.memory.unwrap_or(0.5),
        }
    }

    fn set_utilization(&mut self, eta: f64) {
        let memory = self.memory();
        *self = ChannelSpec {
            eta: Some(eta),
            memory: Some(memory),
            lambda: None,
            mu: None,
            ..*self
        };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub q_base: f64,
    pub beta: f64,
    pub r_base: f64,
    pub r_enh_max: f64,
    pub audience: Vec<u32>,
    pub payload: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfraSpec {
    pub channels: Vec<ChannelSpec>,
    pub epsilon: f64,
    pub delta: f64,
    pub gamma: f64,
    pub gop_len: u32,
    pub est_horizon: u32,
    pub groups: Vec<GroupSpec>,
    #[serde(default)]
    pub audience_schedule: Vec<AudienceChange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub a: usize,
    pub b: usize,
    /// Seconds.
    pub delay: f64,
    /// One loss rate per channel.
    pub loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSpec {
    pub source: usize,
    pub dest: usize,
    pub q_base: f64,
    /// dB per kb/s.
    pub beta: f64,
    /// Rate cap, kb/s.
    pub r_enh_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualSpec {
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_e0")]
    pub e0: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_step() -> f64 {
    DualParams::default().step
}
fn default_e0() -> f64 {
    DualParams::default().e0
}
fn default_max_iter() -> usize {
    DualParams::default().max_iter
}
fn default_tol() -> f64 {
    DualParams::default().tol
}
fn default_path_cap() -> usize {
    8
}
fn default_max_paths() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultihopSpec {
    pub networks: usize,
    pub channels: usize,
    /// Used for every (network, channel) unless `channel_table` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_table: Option<Vec<Vec<ChannelSpec>>>,
    pub epsilon: f64,
    pub delta: f64,
    pub gamma: f64,
    /// Number of users sensing each channel, per network.
    pub observers: Vec<Vec<u32>>,
    /// Network of each node.
    pub node_network: Vec<usize>,
    pub links: Vec<LinkSpec>,
    pub sessions: Vec<SessionSpec>,
    pub packet_bits: f64,
    /// Seconds.
    pub slot_len: f64,
    pub gop_slots: u32,
    /// Delay bound on paths, seconds.
    pub t_th: f64,
    #[serde(default = "default_path_cap")]
    pub path_cap: usize,
    #[serde(default = "default_max_paths")]
    pub max_paths: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual: Option<DualSpec>,
}

impl MultihopSpec {
    fn table(&self) -> Result<Vec<Vec<ChannelSpec>>> {
        match (&self.channel, &self.channel_table) {
            (Some(c), None) => Ok(vec![vec![c.clone(); self.channels]; self.networks]),
            (None, Some(t)) => Ok(t.clone()),
            _ => Err(Error::invalid(
                "multihop.channel",
                "give exactly one of `channel` and `channel_table`",
            )),
        }
    }

    fn for_each_channel(&mut self, mut f: impl FnMut(&mut ChannelSpec)) {
        if let Some(c) = &mut self.channel {
            f(c);
        }
        if let Some(t) = &mut self.channel_table {
            t.iter_mut().flatten().for_each(f);
        }
    }
}

fn default_seeds() -> Vec<u64> {
    (1..=10).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub mode: Mode,
    /// GoPs to simulate per replica.
    pub horizon: u32,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Schemes to compare; empty means every scheme of the mode except
    /// exhaustive search.
    #[serde(default)]
    pub schemes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infrastructure: Option<InfraSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multihop: Option<MultihopSpec>,
}

/// Reads and fully validates a scenario, including every sweep point.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
    scenario.validate()?;
    Ok(scenario)
}

/// A scheme of either mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Infra(InfraScheme),
    Multihop(MultihopScheme),
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Infra(s) => s.name(),
            Scheme::Multihop(s) => s.name(),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("horizon", "must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds", "at least one seed is required"));
        }
        self.schemes()?;
        match self.mode {
            Mode::Infrastructure if self.infrastructure.is_none() => {
                return Err(Error::invalid("infrastructure", "required in infrastructure mode"))
            }
            Mode::Multihop if self.multihop.is_none() => {
                return Err(Error::invalid("multihop", "required in multihop mode"))
            }
            _ => {}
        }
        for point in self.points()? {
            let s = self.at(point.as_ref())?;
            match self.mode {
                Mode::Infrastructure => {
                    s.infra_config()?;
                }
                Mode::Multihop => {
                    s.multihop_config()?;
                }
            }
        }
        Ok(())
    }

    pub fn schemes(&self) -> Result<Vec<Scheme>> {
        let names: Vec<String> = if self.schemes.is_empty() {
            match self.mode {
                Mode::Infrastructure => vec!["equal".into(), "sf".into(), "greedy".into()],
                Mode::Multihop => vec!["dual".into(), "sf".into(), "heuristic".into()],
            }
        } else {
            self.schemes.clone()
        };
        names
            .iter()
            .map(|n| match self.mode {
                Mode::Infrastructure => InfraScheme::parse(n).map(Scheme::Infra),
                Mode::Multihop => MultihopScheme::parse(n).map(Scheme::Multihop),
            })
            .collect()
    }

    /// Sweep points; a scenario without a sweep has a single `None` point.
    pub fn points(&self) -> Result<Vec<Option<SweepValue>>> {
        match &self.sweep {
            None => Ok(vec![None]),
            Some(s) if s.values.is_empty() => Ok(vec![None]),
            Some(s) => Ok(s.values.iter().cloned().map(Some).collect()),
        }
    }

    /// The scenario with one sweep value applied.
    pub fn at(&self, value: Option<&SweepValue>) -> Result<Scenario> {
        let mut s = self.clone();
        let (Some(sweep), Some(value)) = (&self.sweep, value) else {
            return Ok(s);
        };
        let key = sweep.key;
        let field = format!("sweep.{}", key.name());
        match key {
            SweepKey::Gamma => {
                let g = value.number(key)?;
                check_open_probability(&field, g)?;
                if let Some(i) = &mut s.infrastructure {
                    i.gamma = g;
                    i.channels.iter_mut().for_each(|c| c.gamma = None);
                }
                if let Some(m) = &mut s.multihop {
                    m.gamma = g;
                    m.for_each_channel(|c| c.gamma = None);
                }
            }
            SweepKey::Sensing => {
                let (e, d) = value.pair()?;
                check_probability(&field, e)?;
                check_probability(&field, d)?;
                if let Some(i) = &mut s.infrastructure {
                    i.epsilon = e;
                    i.delta = d;
                    i.channels.iter_mut().for_each(|c| (c.epsilon, c.delta) = (None, None));
                }
                if let Some(m) = &mut s.multihop {
                    m.epsilon = e;
                    m.delta = d;
                    m.for_each_channel(|c| (c.epsilon, c.delta) = (None, None));
                }
            }
            SweepKey::Eta => {
                let eta = value.number(key)?;
                check_probability(&field, eta)?;
                if let Some(i) = &mut s.infrastructure {
                    i.channels.iter_mut().for_each(|c| c.set_utilization(eta));
                }
                if let Some(m) = &mut s.multihop {
                    m.for_each_channel(|c| c.set_utilization(eta));
                }
            }
            SweepKey::Channels => {
                let n = value.number(key)?;
                if n < 1.0 || n.fract() != 0.0 {
                    return Err(Error::invalid(&field, format!("{n} is not a positive channel count")));
                }
                let Some(i) = &mut s.infrastructure else {
                    return Err(Error::invalid(&field, "only applies to infrastructure scenarios"));
                };
                if i.channels.is_empty() {
                    return Err(Error::invalid(
                        "infrastructure.channels",
                        "at least one channel is required",
                    ));
                }
                // Channels beyond the listed ones repeat the list.
                i.channels = (0..n as usize)
                    .map(|k| i.channels[k % i.channels.len()].clone())
                    .collect();
            }
            SweepKey::SlotLen => {
                let t = value.number(key)?;
                if !(t > 0.0) {
                    return Err(Error::invalid(&field, "slot length must be positive"));
                }
                let Some(m) = &mut s.multihop else {
                    return Err(Error::invalid(&field, "only applies to multihop scenarios"));
                };
                m.slot_len = t;
            }
        }
        s.sweep = None;
        Ok(s)
    }

    pub fn infra_config(&self) -> Result<InfraConfig> {
        let spec = self
            .infrastructure
            .as_ref()
            .ok_or_else(|| Error::invalid("infrastructure", "missing block"))?;
        let mut channels = Vec::new();
        let mut sensors = Vec::new();
        let mut gamma = Vec::new();
        for (i, c) in spec.channels.iter().enumerate() {
            let (ch, p, g) = c.resolve(
                &format!("infrastructure.channels[{i}]"),
                &SensingDefaults {
                    epsilon: spec.epsilon,
                    delta: spec.delta,
                    gamma: spec.gamma,
                },
            )?;
            channels.push(ch);
            sensors.push(p);
            gamma.push(g);
        }
        let groups = spec
            .groups
            .iter()
            .map(|g| {
                let v = VideoSource::new(g.q_base, g.beta, g.r_base, g.r_enh_max)?;
                MulticastGroup::new(v, g.audience.clone(), g.payload.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        let cfg = InfraConfig {
            channels,
            sensors,
            gamma,
            groups,
            gop_len: spec.gop_len,
            est_horizon: spec.est_horizon,
            audience_schedule: spec.audience_schedule.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn multihop_config(&self) -> Result<MultihopConfig> {
        let spec = self
            .multihop
            .as_ref()
            .ok_or_else(|| Error::invalid("multihop", "missing block"))?;
        let table = spec.table()?;
        if table.len() != spec.networks || table.iter().any(|r| r.len() != spec.channels) {
            return Err(Error::invalid(
                "multihop.channel_table",
                format!("expected {} networks of {} channels", spec.networks, spec.channels),
            ));
        }
        let mut channels = Vec::new();
        let mut sensors = Vec::new();
        let mut gamma = Vec::new();
        for (k, row) in table.iter().enumerate() {
            let mut c_row = Vec::new();
            let mut s_row = Vec::new();
            let mut g_row = Vec::new();
            for (m, c) in row.iter().enumerate() {
                let (ch, p, g) = c.resolve(
                    &format!("multihop.channel_table[{k}][{m}]"),
                    &SensingDefaults {
                        epsilon: spec.epsilon,
                        delta: spec.delta,
                        gamma: spec.gamma,
                    },
                )?;
                c_row.push(ch);
                s_row.push(p);
                g_row.push(g);
            }
            channels.push(c_row);
            sensors.push(s_row);
            gamma.push(g_row);
        }
        let links = spec
            .links
            .iter()
            .map(|l| Link {
                a: l.a,
                b: l.b,
                delay: l.delay,
                loss: l.loss.clone(),
            })
            .collect();
        let topo = Topology::new(spec.networks, spec.channels, spec.node_network.clone(), links)?;
        if !(spec.packet_bits > 0.0) {
            return Err(Error::invalid("multihop.packet_bits", "must be positive"));
        }
        let sessions = spec
            .sessions
            .iter()
            .map(|s| {
                Ok(Session {
                    source: s.source,
                    dest: s.dest,
                    video: VideoSource::new(s.q_base, s.beta, 0.0, s.r_enh_max)?,
                    packet_kb: spec.packet_bits / 1000.0,
                    slot_len: spec.slot_len,
                    gop_slots: spec.gop_slots,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let dual = match &spec.dual {
            None => DualParams::default(),
            Some(d) => {
                if !(0.0..=1.0).contains(&d.step) || !(d.e0 > 0.0) || d.max_iter == 0 || !(d.tol > 0.0) {
                    return Err(Error::invalid(
                        "multihop.dual",
                        "need step in [0, 1], e0 > 0, max_iter > 0, tol > 0",
                    ));
                }
                DualParams {
                    step: d.step,
                    e0: d.e0,
                    max_iter: d.max_iter,
                    tol: d.tol,
                    rule: StepRule::Estimated,
                }
            }
        };
        let cfg = MultihopConfig {
            topo,
            sessions,
            channels,
            sensors,
            gamma,
            observers: spec.observers.clone(),
            t_th: spec.t_th,
            path_cap: spec.path_cap,
            max_paths: spec.max_paths,
            dual,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
