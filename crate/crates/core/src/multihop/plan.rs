//! A complete routing and channel plan, and an independent checker for it.

use std::collections::BTreeSet;

use crate::multihop::select::PathProblem;
use crate::multihop::topology::{Session, Topology};

/// Route and tunnels of one session.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedPath {
    pub nodes: Vec<usize>,
    /// `tunnels[r][k]`: channel of tunnel `r` on the `k`-th link.
    pub tunnels: Vec<Vec<usize>>,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SessionPlan {
    /// One entry per session; `None` leaves the session idle.
    pub paths: Vec<Option<PlannedPath>>,
}

impl SessionPlan {
    /// Plan for the options selected in `y`.
    pub fn from_selection(problem: &PathProblem, y: &[bool]) -> Self {
        let mut paths = vec![None; problem.sessions];
        for (o, _) in problem.options.iter().zip(y).filter(|(_, &b)| b) {
            paths[o.session] = Some(PlannedPath {
                nodes: o.nodes.clone(),
                tunnels: o.schedule.tunnels.clone(),
                losses: o.schedule.losses.clone(),
            });
        }
        Self { paths }
    }

    pub fn n_tunnels(&self, session: usize) -> usize {
        self.paths[session].as_ref().map_or(0, |p| p.tunnels.len())
    }
}

/// Checks a plan against the routing and channel constraints: one channel
/// per link per tunnel, only usable channels and no channel twice on a
/// link, no channel on two consecutive links of a path, every tunnel
/// spanning the whole path, and node-disjoint paths across sessions.
pub fn validate_plan(
    topo: &Topology,
    sessions: &[Session],
    omega: &[Vec<usize>],
    plan: &SessionPlan,
    t_th: f64,
) -> Result<(), String> {
    if plan.paths.len() != sessions.len() {
        return Err(format!("{} plans for {} sessions", plan.paths.len(), sessions.len()));
    }
    let mut used_nodes: BTreeSet<usize> = BTreeSet::new();
    for (l, entry) in plan.paths.iter().enumerate() {
        let Some(p) = entry else { continue };
        let s = &sessions[l];
        if p.nodes.first() != Some(&s.source) || p.nodes.last() != Some(&s.dest) {
            return Err(format!("session {l}: path does not join its endpoints"));
        }
        let distinct: BTreeSet<usize> = p.nodes.iter().copied().collect();
        if distinct.len() != p.nodes.len() {
            return Err(format!("session {l}: path revisits a node"));
        }
        let mut links = Vec::new();
        let mut delay = 0.0;
        for w in p.nodes.windows(2) {
            let Some(id) = topo.link_between(w[0], w[1]) else {
                return Err(format!("session {l}: no link {}-{}", w[0], w[1]));
            };
            delay += topo.links[id].delay;
            links.push(id);
        }
        if delay > t_th + 1e-12 {
            return Err(format!("session {l}: delay {delay} over bound {t_th}"));
        }
        if !used_nodes.is_disjoint(&distinct) {
            return Err(format!("session {l}: shares a node with another session"));
        }
        used_nodes.extend(distinct);

        let mut per_link: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); links.len()];
        for (r, tunnel) in p.tunnels.iter().enumerate() {
            if tunnel.len() != links.len() {
                return Err(format!(
                    "session {l}: tunnel {r} covers {} of {} links",
                    tunnel.len(),
                    links.len()
                ));
            }
            for (k, &m) in tunnel.iter().enumerate() {
                if !omega[links[k]].contains(&m) {
                    return Err(format!("session {l}: channel {m} not usable on link {}", links[k]));
                }
                if !per_link[k].insert(m) {
                    return Err(format!("session {l}: channel {m} used twice on hop {k}"));
                }
            }
        }
        for k in 1..links.len() {
            if let Some(m) = per_link[k].intersection(&per_link[k - 1]).next() {
                return Err(format!(
                    "session {l}: channel {m} on consecutive hops {} and {k}",
                    k - 1
                ));
            }
        }
        if p.tunnels.len() > links.iter().map(|&id| omega[id].len()).min().unwrap_or(0) {
            return Err(format!("session {l}: more tunnels than usable channels"));
        }
    }
    Ok(())
}
