//! Slot-level simulation of the base station multicasting to its groups.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{ChannelAudit, ChannelBank, ChannelKey, MarkovChannel, Occupancy};
use crate::error::{Error, Result};
use crate::multicast::budget::{base_tiles, estimate_budget, gop_budget};
use crate::multicast::fixing::sequential_fixing;
use crate::multicast::greedy::{equal_allocation, grd1_state, grd2_adjust, PlannerState};
use crate::multicast::tsa::{tsa_schedule, Layer, QueuedTile};
use crate::rng::{self, Domain};
use crate::sensing::{tx_probability, update_belief, Belief, SensingReport, SensorProfile};
use crate::video::{MulticastGroup, TileAllocation};

/// How the enhancement tiles of a GoP are partitioned among groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfraScheme {
    Equal,
    Sf,
    Greedy,
}

impl InfraScheme {
    pub fn name(self) -> &'static str {
        match self {
            InfraScheme::Equal => "equal",
            InfraScheme::Sf => "sf",
            InfraScheme::Greedy => "greedy",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "equal" => Ok(InfraScheme::Equal),
            "sf" => Ok(InfraScheme::Sf),
            "greedy" => Ok(InfraScheme::Greedy),
            _ => Err(Error::UnknownScheme {
                name: name.to_string(),
                mode: "infrastructure",
            }),
        }
    }
}

/// Audience counts of one group replaced from GoP `gop` onward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudienceChange {
    pub gop: u32,
    pub group: usize,
    pub audience: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfraConfig {
    pub channels: Vec<MarkovChannel>,
    pub sensors: Vec<SensorProfile>,
    pub gamma: Vec<f64>,
    pub groups: Vec<MulticastGroup>,
    pub gop_len: u32,
    pub est_horizon: u32,
    pub audience_schedule: Vec<AudienceChange>,
}

impl InfraConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.channels.len();
        if n == 0 {
            return Err(Error::invalid("channels", "at least one channel is required"));
        }
        if self.sensors.len() != n || self.gamma.len() != n {
            return Err(Error::invalid(
                "channels",
                "sensing and gamma must be given for every channel",
            ));
        }
        for &g in &self.gamma {
            crate::error::check_open_probability("gamma", g)?;
        }
        if self.groups.is_empty() {
            return Err(Error::invalid("groups", "at least one group is required"));
        }
        for g in &self.groups {
            g.validate()?;
        }
        if self.gop_len == 0 {
            return Err(Error::invalid("gop_len", "must be positive"));
        }
        if self.est_horizon == 0 || self.est_horizon > self.gop_len {
            return Err(Error::invalid("est_horizon", "must lie in [1, gop_len]"));
        }
        for c in &self.audience_schedule {
            let Some(g) = self.groups.get(c.group) else {
                return Err(Error::invalid(
                    "audience_schedule",
                    format!("unknown group {}", c.group),
                ));
            };
            MulticastGroup::new(g.source, c.audience.clone(), g.payload.clone())?;
        }
        Ok(())
    }
}

/// What one group received in one GoP.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupOutcome {
    pub gop: u32,
    /// Last slot of the GoP.
    pub slot: u64,
    pub group: usize,
    pub delivered_rate_kb: f64,
    /// Mean PSNR over the group's users; `None` when the base layer did not
    /// arrive in time.
    pub psnr_db: Option<f64>,
    pub utility: Option<f64>,
    /// Accesses that hit a busy channel during the GoP (all channels).
    pub collisions: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfraRun {
    pub outcomes: Vec<GroupOutcome>,
    pub audit: Vec<ChannelAudit>,
    /// Digest of the primary-user occupancy trajectory.
    pub trajectory: String,
    /// Layer-priority violations observed (should stay zero).
    pub order_violations: u64,
}

/// Stateful simulator; channels and beliefs persist across GoPs.
pub struct InfraSim {
    cfg: InfraConfig,
    scheme: InfraScheme,
    bank: ChannelBank,
    beliefs: Vec<Belief>,
    sense_rng: Vec<ChaCha8Rng>,
    access_rng: Vec<ChaCha8Rng>,
    groups: Vec<MulticastGroup>,
    gop: u32,
    audit: Vec<ChannelAudit>,
    hasher: Sha256,
    order_violations: u64,
}

impl InfraSim {
    pub fn new(cfg: InfraConfig, scheme: InfraScheme, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.channels.len();
        let bank = ChannelBank::new(
            cfg.channels.iter().enumerate().map(|(i, c)| {
                (
                    ChannelKey {
                        network: 0,
                        channel: i as u32,
                    },
                    *c,
                )
            }),
            seed,
        )?;
        let beliefs = cfg.channels.iter().map(Belief::stationary).collect();
        let sense_rng = (0..n)
            .map(|i| rng::stream(seed, Domain::Sensing, 0, i as u32))
            .collect();
        let access_rng = (0..n).map(|i| rng::stream(seed, Domain::Access, 0, i as u32)).collect();
        let groups = cfg.groups.clone();
        Ok(Self {
            cfg,
            scheme,
            bank,
            beliefs,
            sense_rng,
            access_rng,
            groups,
            gop: 0,
            audit: vec![ChannelAudit::default(); n],
            hasher: Sha256::new(),
            order_violations: 0,
        })
    }

    pub fn audit(&self) -> &[ChannelAudit] {
        &self.audit
    }

    /// Simulates one GoP window and reports each group's outcome.
    pub fn run_gop(&mut self) -> Result<Vec<GroupOutcome>> {
        for change in &self.cfg.audience_schedule {
            if change.gop == self.gop {
                self.groups[change.group].audience = change.audience.clone();
            }
        }
        let groups = self.groups.clone();
        let n = self.cfg.channels.len();
        let g_count = groups.len();
        let gop_len = self.cfg.gop_len;

        let mut base_left: Vec<u32> = groups.iter().map(base_tiles).collect();
        let fixed_plan = match self.scheme {
            InfraScheme::Equal => Some(equal_allocation(
                &groups,
                gop_budget(&self.cfg.channels, gop_len, &groups),
            )),
            InfraScheme::Sf => {
                Some(sequential_fixing(&groups, gop_budget(&self.cfg.channels, gop_len, &groups))?.alloc)
            }
            InfraScheme::Greedy => None,
        };
        let mut delivered = TileAllocation::zeros(&groups);
        let gop_te = gop_budget(&self.cfg.channels, gop_len, &groups);
        let mut planner: Option<PlannerState> = match self.scheme {
            InfraScheme::Greedy => Some(grd1_state(&groups, gop_te, gop_len, self.cfg.est_horizon)),
            _ => None,
        };
        let mut t_e_prev = gop_te;
        let stationary_idle: f64 = self.cfg.channels.iter().map(|c| 1.0 - c.utilization()).sum();
        // Cumulative enhancement ACKs at the end of the previous two slots.
        let (mut ack_1, mut ack_2) = (0.0, 0.0);
        let mut acks_total = 0.0;
        let mut last_used: Vec<Option<usize>> = vec![None; g_count];
        let mut collisions = 0u64;

        for _ in 0..gop_len {
            let t = self.bank.slot();
            let states: Vec<Occupancy> = self.bank.states().collect();
            self.hasher
                .update(states.iter().map(|s| s.is_idle() as u8).collect::<Vec<_>>());

            for i in 0..n {
                let report = SensingReport::observe(states[i], 1, &self.cfg.sensors[i], &mut self.sense_rng[i]);
                self.beliefs[i] = update_belief(self.beliefs[i], &report, &self.cfg.sensors[i], &self.cfg.channels[i])?;
            }

            let base_done = base_left.iter().all(|&b| b == 0);
            let plan: Option<TileAllocation> = match (&fixed_plan, planner.take()) {
                (Some(p), _) => Some(p.clone()),
                (None, Some(state)) if !base_done => {
                    let alloc = state.alloc.clone();
                    planner = Some(state);
                    Some(alloc)
                }
                (None, Some(mut state)) => {
                    let a: Vec<f64> = self.beliefs.iter().map(|b| b.a).collect();
                    let near = estimate_budget(&a, &self.cfg.channels, t, gop_len, self.cfg.est_horizon);
                    // Slots of this GoP past the estimation horizon count at
                    // their stationary idle rate.
                    let left = gop_len as u64 - t % gop_len as u64;
                    let beyond = left.saturating_sub(self.cfg.est_horizon as u64) as f64;
                    let t_e = near + beyond * stationary_idle;
                    state.delivered = delivered.clone();
                    for g in 0..g_count {
                        state.floor_scheme[g] = highest_used(&delivered.l[g], last_used[g]);
                    }
                    let state = grd2_adjust(state, &groups, t_e, t_e_prev, ack_1, ack_2);
                    t_e_prev = t_e;
                    let alloc = state.alloc.clone();
                    planner = Some(state);
                    Some(alloc)
                }
                (None, None) => None,
            };

            let mut offered = Vec::new();
            for i in 0..n {
                let a = self.beliefs[i].a;
                let p_tr = tx_probability(a, self.cfg.gamma[i]);
                let x: f64 = self.access_rng[i].gen();
                if x <= p_tr && p_tr > 0.0 {
                    offered.push((i, p_tr * a));
                }
            }

            let queues: Vec<Vec<QueuedTile>> = (0..g_count)
                .map(|g| {
                    head_layer_queue(
                        &groups[g],
                        base_left[g],
                        plan.as_ref().map(|p| &p.l[g][..]),
                        &delivered.l[g],
                        n,
                    )
                })
                .collect();
            let grants = tsa_schedule(&offered, &queues);

            let mut used_now: Vec<Option<usize>> = vec![None; g_count];
            for &(i, _) in &offered {
                let audit = &mut self.audit[i];
                audit.accesses += 1;
                if !states[i].is_idle() {
                    audit.collisions += 1;
                    collisions += 1;
                }
            }
            for grant in &grants {
                let g = grant.group;
                let idle = states[grant.channel].is_idle();
                // The multicast ACK (or its absence) reveals the channel state.
                let known = if idle { 1.0 } else { 0.0 };
                self.beliefs[grant.channel] = Belief {
                    a: known,
                    history_prior: self.beliefs[grant.channel].history_prior,
                };
                match grant.tile.layer {
                    Layer::Base => {
                        if idle {
                            base_left[g] -= 1;
                        }
                    }
                    Layer::Enhancement(m) => {
                        if base_left[g] > 0
                            || (0..m).any(|u| plan.as_ref().is_some_and(|p| p.l[g][u] > delivered.l[g][u]))
                        {
                            self.order_violations += 1;
                        }
                        used_now[g] = Some(used_now[g].map_or(m, |u: usize| u.max(m)));
                        if idle {
                            delivered.l[g][m] += 1;
                            acks_total += 1.0;
                        }
                    }
                }
            }
            for g in 0..g_count {
                if used_now[g].is_some() {
                    last_used[g] = used_now[g];
                }
            }
            ack_2 = ack_1;
            ack_1 = acks_total;

            for (i, s) in states.iter().enumerate() {
                self.audit[i].slots += 1;
                self.audit[i].busy += (!s.is_idle()) as u64;
            }
            self.bank.step();
        }

        let slot = self.bank.slot() - 1;
        let outcomes = groups
            .iter()
            .enumerate()
            .map(|(g, grp)| {
                let ok = base_left[g] == 0;
                GroupOutcome {
                    gop: self.gop,
                    slot,
                    group: g,
                    delivered_rate_kb: grp.rate(&delivered.l[g]),
                    psnr_db: ok.then(|| grp.mean_psnr(&delivered.l[g])),
                    utility: ok.then(|| grp.utility(&delivered.l[g])),
                    collisions,
                }
            })
            .collect();
        self.gop += 1;
        Ok(outcomes)
    }

    pub fn finish(self, outcomes: Vec<GroupOutcome>) -> InfraRun {
        let digest = self.hasher.finalize();
        InfraRun {
            outcomes,
            audit: self.audit,
            trajectory: digest.iter().take(8).map(|b| format!("{b:02x}")).collect(),
            order_violations: self.order_violations,
        }
    }
}

fn highest_used(delivered: &[u32], last: Option<usize>) -> usize {
    let top_delivered = delivered.iter().rposition(|&d| d > 0);
    match (top_delivered, last) {
        (Some(a), Some(b)) => a.max(b),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => 0,
    }
}

/// Up to `limit` tiles of the lowest layer group `g` still owes.
fn head_layer_queue(
    group: &MulticastGroup,
    base_left: u32,
    plan: Option<&[u32]>,
    delivered: &[u32],
    limit: usize,
) -> Vec<QueuedTile> {
    if base_left > 0 {
        return (1..=base_left.min(limit as u32))
            .map(|i| QueuedTile {
                layer: Layer::Base,
                ordinal: i,
                reward: f64::INFINITY,
            })
            .collect();
    }
    let Some(plan) = plan else { return Vec::new() };
    let Some(m) = (0..group.schemes()).find(|&m| plan[m] > delivered[m]) else {
        return Vec::new();
    };
    let pending = (plan[m] - delivered[m]).min(limit as u32);
    (0..pending)
        .map(|k| {
            let i = delivered[m] + k + 1;
            QueuedTile {
                layer: Layer::Enhancement(m),
                ordinal: i,
                reward: group.inc(delivered, m, i),
            }
        })
        .collect()
}

/// Runs `gops` GoPs of one scheme from one seed.
pub fn run_infrastructure(cfg: &InfraConfig, scheme: InfraScheme, seed: u64, gops: u32) -> Result<InfraRun> {
    let mut sim = InfraSim::new(cfg.clone(), scheme, seed)?;
    let mut outcomes = Vec::new();
    for _ in 0..gops {
        outcomes.extend(sim.run_gop()?);
    }
    Ok(sim.finish(outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::VideoSource;

    fn cfg(channels: Vec<MarkovChannel>, sensors: Vec<SensorProfile>) -> InfraConfig {
        let src = VideoSource::new(30.0, 0.05, 4.0, 20.0).unwrap();
        with_group(
            channels,
            sensors,
            MulticastGroup::new(src, vec![5, 3, 1], vec![1.0, 1.5, 2.0]).unwrap(),
        )
    }

    fn with_group(channels: Vec<MarkovChannel>, sensors: Vec<SensorProfile>, g: MulticastGroup) -> InfraConfig {
        let n = channels.len();
        InfraConfig {
            channels,
            sensors,
            gamma: vec![0.2; n],
            groups: vec![g.clone(), g],
            gop_len: 30,
            est_horizon: 5,
            audience_schedule: vec![],
        }
    }

    #[test]
    fn always_idle_reaches_full_rate() {
        let n = 4;
        let src = VideoSource::new(30.0, 0.05, 4.0, 20.0).unwrap();
        let g = MulticastGroup::new(src, vec![5], vec![2.0]).unwrap();
        let c = with_group(
            vec![MarkovChannel::new(1.0, 1.0).unwrap(); n],
            vec![SensorProfile::new(1e-6, 1e-6).unwrap(); n],
            g,
        );
        for scheme in [InfraScheme::Equal, InfraScheme::Sf, InfraScheme::Greedy] {
            let run = run_infrastructure(&c, scheme, 1, 2).unwrap();
            for o in &run.outcomes {
                assert!((o.delivered_rate_kb - 20.0).abs() < 1e-9, "{scheme:?} {o:?}");
                assert!((o.psnr_db.unwrap() - (30.0 + 0.05 * 20.0)).abs() < 1e-9);
                assert_eq!(o.collisions, 0);
            }
            assert_eq!(run.order_violations, 0);
        }
    }

    #[test]
    fn always_busy_delivers_nothing() {
        // The access rule still transmits with probability gamma on a
        // channel believed busy, so collisions occur but nothing arrives.
        let n = 3;
        let c = cfg(
            vec![MarkovChannel::new(0.0, 0.0).unwrap(); n],
            vec![SensorProfile::new(1e-6, 1e-6).unwrap(); n],
        );
        let run = run_infrastructure(&c, InfraScheme::Greedy, 9, 20).unwrap();
        for o in &run.outcomes {
            assert_eq!(o.delivered_rate_kb, 0.0);
            assert!(o.psnr_db.is_none());
        }
        for a in &run.audit {
            assert!(a.collision_rate() <= 0.2 + 0.05);
        }
    }

    #[test]
    fn deterministic() {
        let n = 5;
        let c = cfg(
            vec![MarkovChannel::new(0.7, 0.4).unwrap(); n],
            vec![SensorProfile::new(0.3, 0.25).unwrap(); n],
        );
        let a = run_infrastructure(&c, InfraScheme::Greedy, 42, 3).unwrap();
        let b = run_infrastructure(&c, InfraScheme::Greedy, 42, 3).unwrap();
        assert_eq!(a, b);
        let e = run_infrastructure(&c, InfraScheme::Equal, 42, 3).unwrap();
        assert_eq!(a.trajectory, e.trajectory);
    }

    #[test]
    fn scheme_names() {
        for s in [InfraScheme::Equal, InfraScheme::Sf, InfraScheme::Greedy] {
            assert_eq!(InfraScheme::parse(s.name()).unwrap(), s);
        }
        assert!(matches!(InfraScheme::parse("dual"), Err(Error::UnknownScheme { .. })));
    }
}
