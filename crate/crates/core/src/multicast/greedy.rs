//! Greedy tile partitioning (GRD1), its per-slot refinement (GRD2), equal
//! allocation, and the exhaustive optimum used to check them.

use crate::video::{MulticastGroup, TileAllocation};

const SLACK: f64 = 1e-9;

/// Planner memory carried from slot to slot within a GoP.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerState {
    pub alloc: TileAllocation,
    /// Tiles already acknowledged; never removed by a shrink.
    pub delivered: TileAllocation,
    /// Groups still below their maximum enhancement rate.
    pub active: Vec<bool>,
    /// Lowest scheme each group may still adjust: the highest scheme it
    /// transmitted on in the previous slot.
    pub floor_scheme: Vec<usize>,
    /// Budget used in the `R / T_e` normalisation.
    pub t_e: f64,
    pub gop_len: u32,
    pub est_horizon: u32,
}

impl PlannerState {
    pub fn new(groups: &[MulticastGroup], t_e: f64, gop_len: u32, est_horizon: u32) -> Self {
        Self {
            alloc: TileAllocation::zeros(groups),
            delivered: TileAllocation::zeros(groups),
            active: vec![true; groups.len()],
            floor_scheme: vec![0; groups.len()],
            t_e,
            gop_len,
            est_horizon,
        }
    }
}

fn total_rate(groups: &[MulticastGroup]) -> f64 {
    groups.iter().map(|g| g.source.r_enh_max).sum()
}

fn normaliser(b: f64, r_total: f64, t_e: f64) -> f64 {
    b + r_total / t_e.max(1.0)
}

/// Adds tiles by best normalised gain while `sum(l) + 1 <= target` and some
/// group is active; a group whose rate cap is exceeded has the tile rolled
/// back and leaves the active set.
fn grow(
    groups: &[MulticastGroup],
    alloc: &mut TileAllocation,
    active: &mut [bool],
    floor: &[usize],
    target: f64,
    t_e: f64,
) {
    let r_total = total_rate(groups);
    while alloc.total() as f64 + 1.0 <= target + SLACK && active.iter().any(|&a| a) {
        let mut best: Option<(usize, usize, f64)> = None;
        for (g, group) in groups.iter().enumerate() {
            if !active[g] {
                continue;
            }
            let l = &alloc.l[g];
            let now = group.utility(l);
            let mut next = l.clone();
            for m in floor[g]..group.schemes() {
                next[m] += 1;
                let gain = (group.utility(&next) - now) / normaliser(group.payload[m], r_total, t_e);
                next[m] -= 1;
                if best.is_none_or(|(_, _, v)| gain > v) {
                    best = Some((g, m, gain));
                }
            }
        }
        let Some((g, m, _)) = best else { break };
        alloc.l[g][m] += 1;
        if groups[g].rate(&alloc.l[g]) > groups[g].source.r_enh_max + SLACK {
            alloc.l[g][m] -= 1;
            active[g] = false;
        }
    }
}

/// Greedy partition of `t_e` enhancement tiles.
pub fn grd1(groups: &[MulticastGroup], t_e: f64) -> TileAllocation {
    let mut alloc = TileAllocation::zeros(groups);
    if t_e <= 0.0 {
        return alloc;
    }
    let mut active = vec![true; groups.len()];
    let floor = vec![0; groups.len()];
    grow(groups, &mut alloc, &mut active, &floor, t_e, t_e);
    alloc
}

/// Starts a GoP's planner from a GRD1 allocation of `t_e` tiles.
pub fn grd1_state(groups: &[MulticastGroup], t_e: f64, gop_len: u32, est_horizon: u32) -> PlannerState {
    let mut state = PlannerState::new(groups, t_e, gop_len, est_horizon);
    if t_e > 0.0 {
        grow(
            groups,
            &mut state.alloc,
            &mut state.active,
            &state.floor_scheme.clone(),
            t_e,
            t_e,
        );
    }
    state
}

/// Per-slot correction of the allocation when the budget signal moves.
///
/// `ack_now` and `ack_prev` are the ACK terms of the previous and
/// second-previous slot. When `t_e_now + ack_now` falls below
/// `t_e_prev + ack_prev`, tiles are removed (least normalised loss first)
/// until at most `t_e_now + ack_prev` remain; when it rises, tiles are added
/// as in GRD1 while the total stays within `t_e_now + ack_now`.
pub fn grd2_adjust(
    mut state: PlannerState,
    groups: &[MulticastGroup],
    t_e_now: f64,
    t_e_prev: f64,
    ack_now: f64,
    ack_prev: f64,
) -> PlannerState {
    let now = t_e_now + ack_now;
    let prev = t_e_prev + ack_prev;
    let r_total = total_rate(groups);
    if now < prev {
        let cap = t_e_now + ack_prev;
        while state.alloc.total() as f64 > cap + SLACK {
            let mut best: Option<(usize, usize, f64)> = None;
            for (g, group) in groups.iter().enumerate() {
                let l = &state.alloc.l[g];
                let u = group.utility(l);
                let mut prev_l = l.clone();
                for m in state.floor_scheme[g]..group.schemes() {
                    if l[m] <= state.delivered.l[g][m] {
                        continue;
                    }
                    prev_l[m] -= 1;
                    let loss = (u - group.utility(&prev_l)) / normaliser(group.payload[m], r_total, t_e_now);
                    prev_l[m] += 1;
                    if best.is_none_or(|(_, _, v)| loss < v) {
                        best = Some((g, m, loss));
                    }
                }
            }
            let Some((g, m, _)) = best else { break };
            state.alloc.l[g][m] -= 1;
            state.active[g] = true;
        }
    } else if now > prev {
        let floor = state.floor_scheme.clone();
        grow(groups, &mut state.alloc, &mut state.active, &floor, now, t_e_now);
    }
    state
}

/// Splits the budget evenly across groups (remainder to the lowest
/// indices), then fills each group's share greedily.
pub fn equal_allocation(groups: &[MulticastGroup], t_e: f64) -> TileAllocation {
    let mut alloc = TileAllocation::zeros(groups);
    if groups.is_empty() || t_e < 1.0 {
        return alloc;
    }
    let tiles = (t_e + SLACK).floor() as u32;
    let g_count = groups.len() as u32;
    for (g, group) in groups.iter().enumerate() {
        let share = tiles / g_count + u32::from((g as u32) < tiles % g_count);
        let one = grd1(std::slice::from_ref(group), share as f64);
        alloc.l[g] = one.l[0].clone();
    }
    alloc
}

/// Best feasible allocation by exhaustive search, with its utility.
pub fn exhaustive_optimum(groups: &[MulticastGroup], t_e: f64) -> (TileAllocation, f64) {
    let budget = if t_e < 0.0 { 0 } else { (t_e + SLACK).floor() as u32 };
    let cells: Vec<(usize, usize)> = groups
        .iter()
        .enumerate()
        .flat_map(|(g, grp)| (0..grp.schemes()).map(move |m| (g, m)))
        .collect();
    let mut current = TileAllocation::zeros(groups);
    let mut best = (current.clone(), current.utility(groups));
    search(groups, &cells, 0, budget, &mut current, &mut best);
    best
}

fn search(
    groups: &[MulticastGroup],
    cells: &[(usize, usize)],
    idx: usize,
    left: u32,
    current: &mut TileAllocation,
    best: &mut (TileAllocation, f64),
) {
    if idx == cells.len() {
        let u = current.utility(groups);
        if u > best.1 {
            *best = (current.clone(), u);
        }
        return;
    }
    let (g, m) = cells[idx];
    for k in 0..=left {
        current.l[g][m] = k;
        if groups[g].rate(&current.l[g]) > groups[g].source.r_enh_max + SLACK {
            break;
        }
        search(groups, cells, idx + 1, left - k, current, best);
    }
    current.l[g][m] = 0;
}
