//! Slot-level simulation of video sessions over the CR mesh.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{ChannelAudit, ChannelBank, ChannelKey, MarkovChannel};
use crate::error::{check_open_probability, Error, Result};
use crate::multihop::dual::{dual_path_select, DualParams};
use crate::multihop::plan::SessionPlan;
use crate::multihop::select::{brute_force_crv, centralized_sf, heuristic, BruteCaps, PathProblem};
use crate::multihop::topology::{enumerate_paths, Session, Topology};
use crate::rng::{self, Domain};
use crate::sensing::{available_channels, solve_threshold, update_belief, Belief, SensingReport, SensorProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultihopScheme {
    Dual,
    Sf,
    Heuristic,
    Brute,
}

impl MultihopScheme {
    pub fn name(self) -> &'static str {
        match self {
            MultihopScheme::Dual => "dual",
            MultihopScheme::Sf => "sf",
            MultihopScheme::Heuristic => "heuristic",
            MultihopScheme::Brute => "brute",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "dual" => Ok(MultihopScheme::Dual),
            "sf" => Ok(MultihopScheme::Sf),
            "heuristic" => Ok(MultihopScheme::Heuristic),
            "brute" => Ok(MultihopScheme::Brute),
            _ => Err(Error::UnknownScheme {
                name: name.to_string(),
                mode: "multihop",
            }),
        }
    }
}

/// Per-network, per-channel parameters are indexed `[network][channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultihopConfig {
    pub topo: Topology,
    pub sessions: Vec<Session>,
    pub channels: Vec<Vec<MarkovChannel>>,
    pub sensors: Vec<Vec<SensorProfile>>,
    pub gamma: Vec<Vec<f64>>,
    /// Number of CR users sensing each channel.
    pub observers: Vec<Vec<u32>>,
    /// Delay bound on feasible paths, seconds.
    pub t_th: f64,
    pub path_cap: usize,
    pub max_paths: u32,
    pub dual: DualParams,
}

impl MultihopConfig {
    pub fn validate(&self) -> Result<()> {
        let k = self.topo.networks;
        let m = self.topo.channels;
        let shaped = |rows: &[usize]| rows.len() == k && rows.iter().all(|&r| r == m);
        let blocks: [(&str, Vec<usize>); 4] = [
            ("channels", self.channels.iter().map(Vec::len).collect()),
            ("sensing", self.sensors.iter().map(Vec::len).collect()),
            ("gamma", self.gamma.iter().map(Vec::len).collect()),
            ("observers", self.observers.iter().map(Vec::len).collect()),
        ];
        for (field, rows) in &blocks {
            if !shaped(rows) {
                return Err(Error::invalid(*field, format!("expected {k} networks of {m} channels")));
            }
        }
        for g in self.gamma.iter().flatten() {
            check_open_probability("gamma", *g)?;
        }
        if self.sessions.is_empty() {
            return Err(Error::invalid("sessions", "at least one session is required"));
        }
        for s in &self.sessions {
            s.validate(&self.topo)?;
        }
        if !(self.t_th >= 0.0) {
            return Err(Error::invalid("t_th", "must be nonnegative"));
        }
        if self.max_paths == 0 {
            return Err(Error::invalid("max_paths", "must be positive"));
        }
        Ok(())
    }
}

/// What one session got in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: u64,
    pub session: usize,
    pub delivered_kb: f64,
    /// Set on the last slot of each GoP.
    pub psnr_db: Option<f64>,
    pub tunnels: usize,
    /// Planner objective of the whole selection this slot.
    pub objective: f64,
    pub iterations: usize,
    pub duality_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultihopRun {
    pub records: Vec<SlotRecord>,
    pub keys: Vec<ChannelKey>,
    pub audit: Vec<ChannelAudit>,
    pub trajectory: String,
}

impl MultihopRun {
    /// PSNR of every completed GoP of `session`.
    pub fn gop_psnr(&self, session: usize) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.session == session)
            .filter_map(|r| r.psnr_db)
            .collect()
    }
}

pub fn run_multihop(cfg: &MultihopConfig, scheme: MultihopScheme, seed: u64, slots: u64) -> Result<MultihopRun> {
    cfg.validate()?;
    let k_count = cfg.topo.networks;
    let m_count = cfg.topo.channels;
    let mut bank = ChannelBank::new(
        (0..k_count).flat_map(|k| {
            (0..m_count).map(move |m| {
                (
                    ChannelKey {
                        network: k as u32,
                        channel: m as u32,
                    },
                    cfg.channels[k][m],
                )
            })
        }),
        seed,
    )?;
    let idx = |k: usize, m: usize| k * m_count + m;
    let mut beliefs: Vec<Belief> = cfg.channels.iter().flatten().map(Belief::stationary).collect();
    let mut sense_rng: Vec<ChaCha8Rng> = (0..k_count * m_count)
        .map(|i| rng::stream(seed, Domain::Sensing, (i / m_count) as u32, (i % m_count) as u32))
        .collect();
    let mut loss_rng: Vec<ChaCha8Rng> = (0..cfg.sessions.len())
        .map(|l| rng::stream(seed, Domain::Loss, l as u32, 0))
        .collect();
    let paths: Vec<Vec<Vec<usize>>> = cfg
        .sessions
        .iter()
        .map(|s| enumerate_paths(&cfg.topo, s.source, s.dest, cfg.t_th, cfg.path_cap))
        .collect();

    let mut q_prev: Vec<f64> = cfg.sessions.iter().map(|s| s.video.q_base).collect();
    let mut delivered = vec![0.0; cfg.sessions.len()];
    let mut audit = vec![ChannelAudit::default(); k_count * m_count];
    let mut hasher = Sha256::new();
    let mut records = Vec::new();

    for _ in 0..slots {
        let t = bank.slot();
        let busy: Vec<bool> = bank.states().map(|s| !s.is_idle()).collect();
        hasher.update(busy.iter().map(|&b| u8::from(!b)).collect::<Vec<_>>());

        let mut a = vec![vec![0.0; m_count]; k_count];
        let mut kappa = vec![vec![0.0; m_count]; k_count];
        for k in 0..k_count {
            for m in 0..m_count {
                let i = idx(k, m);
                let profile = &cfg.sensors[k][m];
                let report = SensingReport::observe(bank.state(i), cfg.observers[k][m], profile, &mut sense_rng[i]);
                beliefs[i] = update_belief(beliefs[i], &report, profile, &cfg.channels[k][m])?;
                a[k][m] = beliefs[i].a;
                kappa[k][m] = solve_threshold(cfg.gamma[k][m], cfg.observers[k][m], profile, beliefs[i].history_prior)?;
            }
        }
        let omega: Vec<Vec<usize>> = cfg
            .topo
            .links
            .iter()
            .map(|l| {
                let (ki, kj) = (cfg.topo.node_network[l.a], cfg.topo.node_network[l.b]);
                available_channels(&a[ki], &kappa[ki], &a[kj], &kappa[kj])
            })
            .collect();

        let problem = PathProblem::build(&cfg.topo, &cfg.sessions, &paths, &omega, &q_prev, cfg.max_paths)?;
        let (y, iterations, gap) = match scheme {
            MultihopScheme::Dual => {
                let out = dual_path_select(&problem, &cfg.dual);
                let gap = out.duality_gap();
                (out.y, out.iterations, Some(gap))
            }
            MultihopScheme::Sf => (centralized_sf(&problem)?, 0, None),
            MultihopScheme::Heuristic => (heuristic(&problem), 0, None),
            MultihopScheme::Brute => (brute_force_crv(&problem, BruteCaps::default())?.0, 0, None),
        };
        let y_f: Vec<f64> = y.iter().map(|&b| f64::from(u8::from(b))).collect();
        let objective = problem.objective(&y_f);
        let plan = SessionPlan::from_selection(&problem, &y);

        let mut accessed = vec![false; k_count * m_count];
        let mut slot_kb = vec![0.0; cfg.sessions.len()];
        for (l, entry) in plan.paths.iter().enumerate() {
            let Some(p) = entry else { continue };
            for (tunnel, loss) in p.tunnels.iter().zip(&p.losses) {
                let mut collided = false;
                for (w, &m) in p.nodes.windows(2).zip(tunnel) {
                    for node in [w[0], w[1]] {
                        let i = idx(cfg.topo.node_network[node], m);
                        accessed[i] = true;
                        collided |= busy[i];
                    }
                }
                let u: f64 = loss_rng[l].gen();
                if !collided && u >= *loss {
                    slot_kb[l] += cfg.sessions[l].packet_kb;
                }
            }
        }
        for i in 0..k_count * m_count {
            audit[i].slots += 1;
            audit[i].busy += u64::from(busy[i]);
            if accessed[i] {
                audit[i].accesses += 1;
                audit[i].collisions += u64::from(busy[i]);
            }
        }

        for (l, s) in cfg.sessions.iter().enumerate() {
            delivered[l] += slot_kb[l];
            let gop_end = (t + 1) % u64::from(s.gop_slots) == 0;
            let psnr = gop_end.then(|| {
                let rate = (delivered[l] / s.gop_seconds()).min(s.video.r_enh_max);
                s.video.psnr_enhanced(rate)
            });
            if let Some(q) = psnr {
                q_prev[l] = q;
                delivered[l] = 0.0;
            }
            records.push(SlotRecord {
                slot: t,
                session: l,
                delivered_kb: slot_kb[l],
                psnr_db: psnr,
                tunnels: plan.n_tunnels(l),
                objective,
                iterations,
                duality_gap: gap,
            });
        }
        bank.step();
    }

    let digest = hasher.finalize();
    Ok(MultihopRun {
        records,
        keys: (0..bank.len()).map(|i| bank.key(i)).collect(),
        audit,
        trajectory: digest.iter().take(8).map(|b| format!("{b:02x}")).collect(),
    })
}
