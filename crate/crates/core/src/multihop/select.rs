//! Path selection: the packing constraints over candidate paths and the
//! solvers that pick at most one path per session.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus, Relation};
use crate::multihop::schedule::{path_gain, schedule_channels, ChannelSchedule, LinkChannels};
use crate::multihop::topology::{Session, Topology};

/// A candidate path with its tunnel schedule and gain.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOption {
    pub session: usize,
    pub nodes: Vec<usize>,
    /// Usable channels on each link of the path.
    pub avail: Vec<LinkChannels>,
    pub schedule: ChannelSchedule,
    pub gain: f64,
}

/// `rows[g]` lists the options whose `y` enters packing row `g`, which
/// must sum to at most `rhs[g]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathProblem {
    pub sessions: usize,
    pub options: Vec<PathOption>,
    pub rows: Vec<Vec<usize>>,
    pub rhs: Vec<f64>,
}

impl PathProblem {
    /// Schedules every candidate path and builds the packing rows: one
    /// per session (at most `max_paths` paths) and one per node (paths of
    /// different sessions stay node-disjoint). Redundant rows are dropped.
    pub fn build(
        topo: &Topology,
        sessions: &[Session],
        paths: &[Vec<Vec<usize>>],
        omega: &[Vec<usize>],
        q_prev: &[f64],
        max_paths: u32,
    ) -> Result<Self> {
        if paths.len() != sessions.len() || q_prev.len() != sessions.len() {
            return Err(Error::invalid("paths", "one path list and one quality per session"));
        }
        if omega.len() != topo.links.len() {
            return Err(Error::invalid("omega", "one channel set per link"));
        }
        let mut options = Vec::new();
        for (l, list) in paths.iter().enumerate() {
            for nodes in list {
                let links = topo.path_links(nodes).ok_or_else(|| {
                    Error::invalid("paths", format!("session {l} path {nodes:?} leaves the topology"))
                })?;
                let avail: Vec<LinkChannels> = links
                    .iter()
                    .map(|&id| omega[id].iter().map(|&m| (m, topo.links[id].loss[m])).collect())
                    .collect();
                let schedule = schedule_channels(&avail)?;
                let gain = path_gain(&sessions[l], schedule.expected_success, q_prev[l]);
                options.push(PathOption {
                    session: l,
                    nodes: nodes.clone(),
                    avail,
                    schedule,
                    gain,
                });
            }
        }
        Ok(Self::from_options(sessions.len(), options, max_paths))
    }

    pub fn from_options(sessions: usize, options: Vec<PathOption>, max_paths: u32) -> Self {
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for l in 0..sessions {
            rows.push(
                options
                    .iter()
                    .enumerate()
                    .filter(|(_, o)| o.session == l)
                    .map(|(j, _)| j)
                    .collect(),
            );
            rhs.push(max_paths as f64);
        }
        let nodes: BTreeSet<usize> = options.iter().flat_map(|o| o.nodes.iter().copied()).collect();
        for g in nodes {
            rows.push(
                options
                    .iter()
                    .enumerate()
                    .filter(|(_, o)| o.nodes.contains(&g))
                    .map(|(j, _)| j)
                    .collect(),
            );
            rhs.push(1.0);
        }
        let (rows, rhs) = prune_rows(rows, rhs);
        Self {
            sessions,
            options,
            rows,
            rhs,
        }
    }

    pub fn gains(&self) -> Vec<f64> {
        self.options.iter().map(|o| o.gain).collect()
    }

    pub fn objective(&self, y: &[f64]) -> f64 {
        self.options.iter().zip(y).map(|(o, v)| o.gain * v).sum()
    }

    pub fn row_sum(&self, g: usize, y: &[f64]) -> f64 {
        self.rows[g].iter().map(|&j| y[j]).sum()
    }

    pub fn is_feasible(&self, y: &[f64], tol: f64) -> bool {
        y.iter().all(|&v| (-tol..=1.0 + tol).contains(&v))
            && (0..self.rows.len()).all(|g| self.row_sum(g, y) <= self.rhs[g] + tol)
    }

    /// `F_j - sum_g w_gj e_g` for every option.
    pub fn reduced_gains(&self, e: &[f64]) -> Vec<f64> {
        let mut red = self.gains();
        for (g, row) in self.rows.iter().enumerate() {
            for &j in row {
                red[j] -= e[g];
            }
        }
        red
    }

    /// Lagrangian dual function `q(e)`.
    pub fn dual_value(&self, e: &[f64]) -> f64 {
        let paths: f64 = self.reduced_gains(e).iter().map(|r| r.max(0.0)).sum();
        paths + e.iter().zip(&self.rhs).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Continuous relaxation `max F.y, W y <= rhs, 0 <= y <= 1`.
    pub fn relaxation(&self) -> LinearProgram {
        let n = self.options.len();
        let mut lp = LinearProgram::new(n);
        lp.objective = self.gains();
        lp.bounds = vec![(0.0, 1.0); n];
        for (row, &b) in self.rows.iter().zip(&self.rhs) {
            let mut coeffs = vec![0.0; n];
            for &j in row {
                coeffs[j] = 1.0;
            }
            lp.add(coeffs, Relation::Le, b);
        }
        lp
    }
}

/// Drops rows implied by the `y <= 1` bounds or by another row.
fn prune_rows(rows: Vec<Vec<usize>>, rhs: Vec<f64>) -> (Vec<Vec<usize>>, Vec<f64>) {
    let sets: Vec<BTreeSet<usize>> = rows.iter().map(|r| r.iter().copied().collect()).collect();
    let mut keep = Vec::new();
    for i in 0..sets.len() {
        if sets[i].len() as f64 <= rhs[i] {
            continue;
        }
        let implied = (0..sets.len()).any(|j| {
            if j == i || sets[j].len() as f64 <= rhs[j] || !sets[i].is_subset(&sets[j]) || rhs[i] < rhs[j] {
                return false;
            }
            // Equal rows: keep the first copy.
            sets[i] != sets[j] || rhs[i] != rhs[j] || j < i
        });
        if !implied {
            keep.push(i);
        }
    }
    (
        keep.iter().map(|&i| rows[i].clone()).collect(),
        keep.iter().map(|&i| rhs[i]).collect(),
    )
}

/// Optimal multipliers of the relaxation, from its LP dual
/// `min rhs.e + sum v  s.t.  W^T e + v >= F,  e, v >= 0`.
pub fn lp_multipliers(problem: &PathProblem) -> Result<(Vec<f64>, f64)> {
    let g_count = problem.rows.len();
    let n = problem.options.len();
    let mut lp = LinearProgram::new(g_count + n);
    for g in 0..g_count {
        lp.objective[g] = -problem.rhs[g];
    }
    for j in 0..n {
        lp.objective[g_count + j] = -1.0;
    }
    for (j, o) in problem.options.iter().enumerate() {
        let mut coeffs = vec![0.0; g_count + n];
        for (g, row) in problem.rows.iter().enumerate() {
            if row.contains(&j) {
                coeffs[g] = 1.0;
            }
        }
        coeffs[g_count + j] = 1.0;
        lp.add(coeffs, Relation::Ge, o.gain);
    }
    let s = solve_lp(&lp)?;
    if s.status != LpStatus::Optimal {
        return Err(Error::invalid("paths", "multiplier program has no optimum"));
    }
    Ok((s.x[..g_count].to_vec(), -s.objective))
}

/// Rounds the relaxation by fixing the largest fractional `y` to 1 and
/// re-solving, until no positive `y` remains unfixed.
pub fn centralized_sf(problem: &PathProblem) -> Result<Vec<bool>> {
    let n = problem.options.len();
    let mut lp = problem.relaxation();
    let mut fixed = vec![false; n];
    let gains = problem.gains();
    loop {
        let s = solve_lp(&lp)?;
        if s.status != LpStatus::Optimal {
            break;
        }
        let pick = (0..n).filter(|&j| !fixed[j]).max_by(|&a, &b| {
            s.x[a]
                .total_cmp(&s.x[b])
                .then(gains[a].total_cmp(&gains[b]))
                .then(b.cmp(&a))
        });
        let Some(j) = pick else { break };
        if s.x[j] <= 1e-9 {
            break;
        }
        fixed[j] = true;
        lp.bounds[j] = (1.0, 1.0);
        if solve_lp(&lp)?.status != LpStatus::Optimal {
            lp.bounds[j] = (0.0, 0.0);
        }
    }
    Ok((0..n).map(|j| fixed[j] && lp.bounds[j].0 == 1.0).collect())
}

/// Size limits for exhaustive search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BruteCaps {
    pub sessions: usize,
    pub paths_per_session: usize,
    pub channels_per_link: usize,
    pub hops: usize,
}

impl Default for BruteCaps {
    fn default() -> Self {
        Self {
            sessions: 3,
            paths_per_session: 3,
            channels_per_link: 4,
            hops: 4,
        }
    }
}

/// Best binary selection by enumerating every subset of options.
pub fn brute_force_crv(problem: &PathProblem, caps: BruteCaps) -> Result<(Vec<bool>, f64)> {
    if problem.sessions > caps.sessions {
        return Err(Error::InstanceTooLarge(format!("{} sessions", problem.sessions)));
    }
    for l in 0..problem.sessions {
        let count = problem.options.iter().filter(|o| o.session == l).count();
        if count > caps.paths_per_session {
            return Err(Error::InstanceTooLarge(format!("session {l} has {count} paths")));
        }
    }
    for o in &problem.options {
        if o.avail.len() > caps.hops {
            return Err(Error::InstanceTooLarge(format!("path of {} hops", o.avail.len())));
        }
        if let Some(set) = o.avail.iter().find(|s| s.len() > caps.channels_per_link) {
            return Err(Error::InstanceTooLarge(format!("link with {} channels", set.len())));
        }
    }
    let n = problem.options.len();
    let mut best = (vec![false; n], 0.0);
    let mut y = vec![0.0; n];
    for mask in 0u32..(1 << n) {
        for (j, v) in y.iter_mut().enumerate() {
            *v = f64::from((mask >> j) & 1);
        }
        if !problem.is_feasible(&y, 1e-9) {
            continue;
        }
        let obj = problem.objective(&y);
        if obj > best.1 {
            best = (y.iter().map(|&v| v > 0.5).collect(), obj);
        }
    }
    Ok(best)
}

/// Per-hop greedy: each session walks from its source, always moving to the
/// neighbour whose link has the most usable channels among its candidate
/// paths (ties to the lower node id). Sessions whose walk conflicts with
/// an earlier session's path are left idle.
pub fn heuristic(problem: &PathProblem) -> Vec<bool> {
    let n = problem.options.len();
    let mut chosen = vec![0.0; n];
    for l in 0..problem.sessions {
        let mut cands: Vec<usize> = (0..n).filter(|&j| problem.options[j].session == l).collect();
        let mut depth = 0;
        while cands.len() > 1 {
            let step = |j: usize| {
                let o = &problem.options[j];
                (
                    o.avail.get(depth).map_or(0, |s| s.len()),
                    o.nodes.get(depth + 1).copied(),
                )
            };
            let Some(next) = cands
                .iter()
                .filter_map(|&j| {
                    let (width, node) = step(j);
                    node.map(|v| (width, v))
                })
                .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
                .map(|(_, v)| v)
            else {
                break;
            };
            cands.retain(|&j| problem.options[j].nodes.get(depth + 1) == Some(&next));
            depth += 1;
            // A candidate that already reached the destination ends the walk.
            if let Some(&done) = cands.iter().find(|&&j| problem.options[j].nodes.len() == depth + 1) {
                cands = vec![done];
            }
        }
        if let Some(&j) = cands.first() {
            chosen[j] = 1.0;
            if !problem.is_feasible(&chosen, 1e-9) {
                chosen[j] = 0.0;
            }
        }
    }
    chosen.iter().map(|&v| v > 0.5).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn option(session: usize, nodes: Vec<usize>, gain: f64) -> PathOption {
        PathOption {
            session,
            avail: vec![vec![(0, 0.1)]; nodes.len() - 1],
            nodes,
            schedule: ChannelSchedule::default(),
            gain,
        }
    }

    /// Two sessions with two paths each; paths (0,0) and (1,0) share node 9.
    pub(crate) fn two_by_two() -> PathProblem {
        PathProblem::from_options(
            2,
            vec![
                option(0, vec![0, 9, 1], 1.0),
                option(0, vec![0, 5, 1], 0.4),
                option(1, vec![2, 9, 3], 0.9),
                option(1, vec![2, 6, 3], 0.5),
            ],
            1,
        )
    }

    #[test]
    fn rows_are_pruned() {
        let p = two_by_two();
        // Session rows plus the shared node; endpoint rows duplicate the
        // session rows and single-path nodes are trivial.
        assert_eq!(p.rows, vec![vec![0, 1], vec![2, 3], vec![0, 2]]);
    }

    #[test]
    fn brute_force_two_by_two() {
        let (y, obj) = brute_force_crv(&two_by_two(), BruteCaps::default()).unwrap();
        assert_eq!(y, vec![true, false, false, true]);
        assert!((obj - 1.5).abs() < 1e-12);
    }

    #[test]
    fn sf_two_by_two() {
        let p = two_by_two();
        let y = centralized_sf(&p).unwrap();
        let yf: Vec<f64> = y.iter().map(|&b| f64::from(b as u8)).collect();
        assert!(p.is_feasible(&yf, 1e-9));
        assert!((p.objective(&yf) - 1.5).abs() < 1e-9);
    }

    #[test]
    fn multipliers_close_the_gap() {
        let p = two_by_two();
        let (e, value) = lp_multipliers(&p).unwrap();
        assert!((value - 1.5).abs() < 1e-9);
        assert!((p.dual_value(&e) - 1.5).abs() < 1e-9);
    }

    #[test]
    fn brute_refuses_large() {
        let opts = (0..4).map(|h| option(0, vec![0, 10 + h, 1], 1.0)).collect();
        let p = PathProblem::from_options(1, opts, 1);
        assert!(matches!(
            brute_force_crv(&p, BruteCaps::default()),
            Err(Error::InstanceTooLarge(_))
        ));
    }

    #[test]
    fn heuristic_follows_widest_link() {
        let mut a = option(0, vec![0, 5, 1], 0.9);
        let mut b = option(0, vec![0, 6, 1], 0.1);
        a.avail[0] = vec![(0, 0.1)];
        b.avail[0] = vec![(0, 0.1), (1, 0.1)];
        let p = PathProblem::from_options(1, vec![a, b], 1);
        assert_eq!(heuristic(&p), vec![false, true]);
    }
}
