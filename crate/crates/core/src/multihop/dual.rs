//! Distributed path selection by dual decomposition, with the rounding of
//! the converged relaxed solution to a binary one.

use crate::multihop::select::PathProblem;

/// How the subgradient step length is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// Target the midpoint of the current primal and dual values.
    Estimated,
    /// Target a known optimal dual value.
    Known(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualParams {
    /// Local step `s` of each path's primal update.
    pub step: f64,
    /// Initial multiplier.
    pub e0: f64,
    pub max_iter: usize,
    /// Convergence threshold on the largest multiplier change.
    pub tol: f64,
    pub rule: StepRule,
}

impl Default for DualParams {
    fn default() -> Self {
        Self {
            step: 0.05,
            e0: 0.1,
            max_iter: 10_000,
            tol: 1e-6,
            rule: StepRule::Estimated,
        }
    }
}

/// How the final binary selection was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounding {
    /// Elimination over the active rows gave a binary feasible point.
    Elimination,
    /// Elimination failed; options were added greedily by relaxed value.
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualOutcome {
    pub y: Vec<bool>,
    /// Last primal iterate.
    pub relaxed: Vec<f64>,
    pub e: Vec<f64>,
    /// Multipliers after each iteration.
    pub trace: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub rounding: Rounding,
    /// Dual function value at the final multipliers.
    pub dual_value: f64,
    /// Objective of the binary selection.
    pub objective: f64,
}

impl DualOutcome {
    pub fn duality_gap(&self) -> f64 {
        (self.dual_value - self.objective).abs()
    }
}

/// Iterations without a better dual value before the step is halved.
const STALL_PATIENCE: usize = 20;

/// Runs the per-path primal updates and the multiplier updates in
/// lock-step until the multipliers settle, then rounds.
pub fn dual_path_select(problem: &PathProblem, params: &DualParams) -> DualOutcome {
    let n = problem.options.len();
    let g_count = problem.rows.len();
    let mut y = vec![0.0; n];
    let mut e = vec![params.e0; g_count];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    // The midpoint target can leave the multipliers cycling; shrink the
    // step whenever the best dual value stalls.
    let mut scale = 1.0;
    let mut best_q = f64::INFINITY;
    let mut stalled = 0;

    for _ in 0..params.max_iter {
        iterations += 1;
        let red = problem.reduced_gains(&e);
        let before = y.clone();
        for j in 0..n {
            y[j] = if red[j] > 0.0 {
                (y[j] + params.step).min(1.0)
            } else {
                (y[j] - params.step).max(0.0)
            };
        }

        // Subgradient of q at e, from the exact maximiser of each path's
        // Lagrangian term.
        let best: Vec<f64> = red.iter().map(|&r| if r > 0.0 { 1.0 } else { 0.0 }).collect();
        let grad: Vec<f64> = (0..g_count)
            .map(|g| problem.rhs[g] - problem.row_sum(g, &best))
            .collect();
        let q = problem.dual_value(&e);
        let target = match params.rule {
            StepRule::Estimated => {
                if q < best_q - 1e-12 * (1.0 + q.abs()) {
                    best_q = q;
                    stalled = 0;
                } else {
                    stalled += 1;
                    if stalled >= STALL_PATIENCE {
                        scale *= 0.5;
                        stalled = 0;
                    }
                }
                0.5 * (q + problem.objective(&y))
            }
            StepRule::Known(q_star) => q_star,
        };
        let norm: f64 = grad.iter().map(|v| v * v).sum();
        let alpha = if norm > 0.0 {
            scale * (q - target).abs() / norm
        } else {
            0.0
        };

        let mut change: f64 = 0.0;
        for g in 0..g_count {
            let next = (e[g] - alpha * grad[g]).max(0.0);
            change = change.max((next - e[g]).abs());
            e[g] = next;
        }
        trace.push(e.clone());
        if change < params.tol && y == before {
            converged = true;
            break;
        }
    }

    let (bin, rounding) = round_relaxed(problem, &e, &y);
    let bin_f: Vec<f64> = bin.iter().map(|&b| f64::from(u8::from(b))).collect();
    DualOutcome {
        objective: problem.objective(&bin_f),
        dual_value: problem.dual_value(&e),
        y: bin,
        relaxed: y,
        e,
        trace,
        iterations,
        converged,
        rounding,
    }
}

/// Most tie assignments tried before giving up on elimination.
const MAX_TIE_BITS: usize = 16;

/// Turns the settled multipliers and relaxed point into a binary selection.
///
/// Options with clearly positive reduced gain are set to 1 and clearly
/// negative ones to 0. Rows with a positive multiplier are tight at every
/// optimum, so they are imposed as equalities on the rest and solved by
/// Gauss-Jordan elimination. Free variables follow the sign of their
/// reduced objective coefficient; where that is zero either value is
/// optimal, so every such assignment is tried and the best one that makes
/// each dependent variable binary and feasible is kept.
pub fn round_relaxed(problem: &PathProblem, e: &[f64], relaxed: &[f64]) -> (Vec<bool>, Rounding) {
    let n = problem.options.len();
    let gains = problem.gains();
    let scale = gains.iter().fold(0.0f64, |a, &f| a.max(f.abs())).max(f64::MIN_POSITIVE);
    let tol = 1e-4 * scale;
    let red = problem.reduced_gains(e);

    let mut value: Vec<Option<f64>> = red
        .iter()
        .map(|&r| {
            if r > tol {
                Some(1.0)
            } else if r < -tol {
                Some(0.0)
            } else {
                None
            }
        })
        .collect();
    let open: Vec<usize> = (0..n).filter(|&j| value[j].is_none()).collect();

    // Active rows restricted to the open variables.
    let mut a: Vec<Vec<f64>> = Vec::new();
    for (g, row) in problem.rows.iter().enumerate() {
        if e[g] <= tol {
            continue;
        }
        let fixed: f64 = row.iter().filter_map(|&j| value[j]).sum();
        let mut r: Vec<f64> = open.iter().map(|j| f64::from(u8::from(row.contains(j)))).collect();
        r.push(problem.rhs[g] - fixed);
        a.push(r);
    }
    let Some((pivots, reduced)) = gauss_jordan(&mut a, open.len()) else {
        return (greedy_round(problem, relaxed), Rounding::Greedy);
    };
    let pivot_of: Vec<Option<usize>> = (0..open.len()).map(|c| pivots.iter().position(|&p| p == c)).collect();
    let free: Vec<usize> = (0..open.len()).filter(|&c| pivot_of[c].is_none()).collect();

    // y_d = b_d - sum_f a_df y_f, so the objective coefficient of y_f is
    // F_f - sum_d F_d a_df.
    let coef: Vec<f64> = free
        .iter()
        .map(|&f| {
            gains[open[f]]
                - pivots
                    .iter()
                    .enumerate()
                    .map(|(r, &d)| gains[open[d]] * reduced[r][f])
                    .sum::<f64>()
        })
        .collect();
    let ties: Vec<usize> = (0..free.len()).filter(|&i| coef[i].abs() <= tol).collect();
    if ties.len() > MAX_TIE_BITS {
        return (greedy_round(problem, relaxed), Rounding::Greedy);
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 0u32..(1u32 << ties.len()) {
        let mut yf = vec![0.0; free.len()];
        for (i, c) in coef.iter().enumerate() {
            yf[i] = if *c > tol { 1.0 } else { 0.0 };
        }
        for (b, &i) in ties.iter().enumerate() {
            yf[i] = f64::from((mask >> b) & 1);
        }
        for (i, &f) in free.iter().enumerate() {
            value[open[f]] = Some(yf[i]);
        }
        let mut ok = true;
        for (r, &d) in pivots.iter().enumerate() {
            let v = reduced[r][open.len()]
                - free
                    .iter()
                    .enumerate()
                    .map(|(i, &f)| reduced[r][f] * yf[i])
                    .sum::<f64>();
            let rounded = v.round();
            if (v - rounded).abs() > 1e-7 || !(rounded == 0.0 || rounded == 1.0) {
                ok = false;
                break;
            }
            value[open[d]] = Some(rounded);
        }
        if !ok {
            continue;
        }
        let y: Vec<f64> = value.iter().map(|v| v.unwrap_or(0.0)).collect();
        if !problem.is_feasible(&y, 1e-9) {
            continue;
        }
        let obj = problem.objective(&y);
        if best.as_ref().is_none_or(|(_, b)| obj > *b) {
            best = Some((y, obj));
        }
    }
    match best {
        Some((y, _)) => (y.iter().map(|&v| v > 0.5).collect(), Rounding::Elimination),
        None => (greedy_round(problem, relaxed), Rounding::Greedy),
    }
}

/// Reduced row echelon form of the augmented matrix `a` (`cols` variables
/// plus the right-hand side). Returns the pivot column of each nonzero row
/// and those rows, or `None` if the system is inconsistent.
fn gauss_jordan(a: &mut [Vec<f64>], cols: usize) -> Option<(Vec<usize>, Vec<Vec<f64>>)> {
    const EPS: f64 = 1e-9;
    let mut pivots = Vec::new();
    let mut row = 0;
    for c in 0..cols {
        if row == a.len() {
            break;
        }
        let Some(p) = (row..a.len()).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())) else {
            break;
        };
        if a[p][c].abs() <= EPS {
            continue;
        }
        a.swap(row, p);
        let lead = a[row][c];
        for v in a[row].iter_mut() {
            *v /= lead;
        }
        for i in 0..a.len() {
            if i != row && a[i][c].abs() > EPS {
                let factor = a[i][c];
                let pivot_row = a[row].clone();
                for (v, pv) in a[i].iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
            }
        }
        pivots.push(c);
        row += 1;
    }
    if a[row..].iter().any(|r| r[cols].abs() > 1e-7) {
        return None;
    }
    Some((pivots, a[..row].to_vec()))
}

/// Adds options in decreasing relaxed value (then gain) while feasible.
fn greedy_round(problem: &PathProblem, relaxed: &[f64]) -> Vec<bool> {
    let n = problem.options.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        relaxed[b]
            .total_cmp(&relaxed[a])
            .then(problem.options[b].gain.total_cmp(&problem.options[a].gain))
            .then(a.cmp(&b))
    });
    let mut y = vec![0.0; n];
    for j in order {
        if problem.options[j].gain <= 0.0 {
            continue;
        }
        y[j] = 1.0;
        if !problem.is_feasible(&y, 1e-9) {
            y[j] = 0.0;
        }
    }
    y.iter().map(|&v| v > 0.5).collect()
}

/// Multiplier update for one row: `[e - alpha (rhs - sum w y)]^+`.
pub fn multiplier_step(e: f64, alpha: f64, rhs: f64, load: f64) -> f64 {
    (e - alpha * (rhs - load)).max(0.0)
}
