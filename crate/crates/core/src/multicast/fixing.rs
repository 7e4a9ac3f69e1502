//! Sequential fixing over a tangent-envelope LP relaxation of the
//! partition problem.

use crate::error::Result;
use crate::lp::{log_envelope, solve_lp, LinearProgram, LpStatus, Relation};
use crate::video::{MulticastGroup, TileAllocation};

pub const DEFAULT_TANGENTS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct FixingResult {
    pub alloc: TileAllocation,
    /// Optimum of the first (unfixed) relaxation; an upper bound on the
    /// best integer utility.
    pub relaxation_bound: f64,
}

/// Variables `l` in `(g, m)` order followed by one log surrogate `z` per
/// nonempty audience stratum.
struct Relaxation {
    lp: LinearProgram,
    l_index: Vec<Vec<usize>>,
}

fn relaxation(groups: &[MulticastGroup], t_e: f64, n_tangents: usize) -> Result<Relaxation> {
    let mut l_index = Vec::new();
    let mut n = 0;
    for g in groups {
        l_index.push((n..n + g.schemes()).collect::<Vec<_>>());
        n += g.schemes();
    }
    let strata: Vec<(usize, usize)> = groups
        .iter()
        .enumerate()
        .flat_map(|(gi, g)| {
            (0..g.schemes())
                .filter(move |&k| g.stratum(k) > 0.0)
                .map(move |k| (gi, k))
        })
        .collect();
    let total = n + strata.len();
    let budget = t_e.max(0.0).floor();

    let mut lp = LinearProgram::new(total);
    for (gi, g) in groups.iter().enumerate() {
        for m in 0..g.schemes() {
            let cap = (g.source.r_enh_max / g.payload[m] + 1e-9).floor().min(budget);
            lp.bounds[l_index[gi][m]] = (0.0, cap);
        }
    }
    let mut all = vec![0.0; total];
    for idx in l_index.iter().flatten() {
        all[*idx] = 1.0;
    }
    lp.add(all, Relation::Le, budget);
    for (gi, g) in groups.iter().enumerate() {
        let mut row = vec![0.0; total];
        for m in 0..g.schemes() {
            row[l_index[gi][m]] = g.payload[m];
        }
        lp.add(row, Relation::Le, g.source.r_enh_max);
    }
    for (s, &(gi, k)) in strata.iter().enumerate() {
        let g = &groups[gi];
        let z = n + s;
        let lo = g.source.q_base;
        let mut hi = g.source.q_base + g.source.beta * g.source.r_enh_max;
        if hi <= lo {
            hi = lo + 1.0;
        }
        let env = log_envelope(lo, hi, n_tangents)?;
        lp.objective[z] = g.stratum(k);
        lp.bounds[z] = (lo.ln() - 1.0, f64::INFINITY);
        for t in &env.tangents {
            // z - slope * beta * sum_{m<=k} b_m l_m <= slope * Q^b + intercept
            let mut row = vec![0.0; total];
            row[z] = 1.0;
            for m in 0..=k {
                row[l_index[gi][m]] = -t.slope * g.source.beta * g.payload[m];
            }
            lp.add(row, Relation::Le, t.slope * g.source.q_base + t.intercept);
        }
    }
    Ok(Relaxation { lp, l_index })
}

/// Solves the relaxation and the upper bound only.
pub fn relaxation_bound(groups: &[MulticastGroup], t_e: f64) -> Result<f64> {
    let r = relaxation(groups, t_e, DEFAULT_TANGENTS)?;
    let s = solve_lp(&r.lp)?;
    Ok(s.objective)
}

/// Repeatedly solves the relaxation and fixes the allocation variable that
/// sits closest to an integer, until every variable is fixed.
pub fn sequential_fixing(groups: &[MulticastGroup], t_e: f64) -> Result<FixingResult> {
    let Relaxation { mut lp, l_index } = relaxation(groups, t_e, DEFAULT_TANGENTS)?;
    let vars: Vec<usize> = l_index.iter().flatten().copied().collect();
    let mut fixed = vec![false; lp.vars()];
    let first = solve_lp(&lp)?;
    let relaxation_bound = first.objective;
    let mut sol = first;

    for _ in 0..vars.len() {
        if sol.status != LpStatus::Optimal {
            break;
        }
        let pick = vars.iter().copied().filter(|&v| !fixed[v]).min_by(|&a, &b| {
            let da = (sol.x[a] - sol.x[a].round()).abs();
            let db = (sol.x[b] - sol.x[b].round()).abs();
            da.total_cmp(&db).then(a.cmp(&b))
        });
        let Some(v) = pick else { break };
        fixed[v] = true;
        let x = sol.x[v];
        let near = x.round();
        let other = if near > x { x.floor() } else { x.ceil() };
        let saved = lp.bounds[v];
        let mut next = None;
        for value in [near, other, 0.0] {
            if value < saved.0 || value > saved.1 {
                continue;
            }
            lp.bounds[v] = (value, value);
            let s = solve_lp(&lp)?;
            if s.status == LpStatus::Optimal {
                next = Some(s);
                break;
            }
        }
        match next {
            Some(s) => sol = s,
            None => {
                lp.bounds[v] = (0.0, 0.0);
                sol = solve_lp(&lp)?;
            }
        }
    }

    let mut alloc = TileAllocation::zeros(groups);
    for (g, idx) in l_index.iter().enumerate() {
        for (m, &v) in idx.iter().enumerate() {
            alloc.l[g][m] = lp.bounds[v].0.round().max(0.0) as u32;
        }
    }
    Ok(FixingResult {
        alloc,
        relaxation_bound,
    })
}
