//! Dense two-phase simplex and tangent-line envelopes of the logarithm.

use crate::error::{Error, Result};

pub const TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Maximize `objective . x` subject to `constraints` and `lo <= x <= hi`.
/// Lower bounds must be finite; upper bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LinearProgram {
    /// A program over `n` variables with zero objective and bounds `[0, inf)`.
    pub fn new(n: usize) -> Self {
        Self {
            objective: vec![0.0; n],
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vars();
        if self.bounds.len() != n {
            return Err(Error::invalid(
                "bounds",
                format!("{} bounds for {n} variables", self.bounds.len()),
            ));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("objective", "coefficients must be finite"));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n || c.coeffs.iter().any(|a| !a.is_finite()) || !c.rhs.is_finite() {
                return Err(Error::invalid("constraints", format!("row {i} is malformed")));
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !lo.is_finite() || hi.is_nan() || lo > hi {
                return Err(Error::invalid(
                    "bounds",
                    format!("variable {j} has bounds [{lo}, {hi}]"),
                ));
            }
        }
        Ok(())
    }

    /// Whether `x` satisfies every row and bound within `tol`.
    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        let bounds_ok = x
            .iter()
            .zip(&self.bounds)
            .all(|(&v, &(lo, hi))| v >= lo - tol && v <= hi + tol);
        bounds_ok
            && self.constraints.iter().all(|c| {
                let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
                match c.relation {
                    Relation::Le => lhs <= c.rhs + tol,
                    Relation::Ge => lhs >= c.rhs - tol,
                    Relation::Eq => (lhs - c.rhs).abs() <= tol,
                }
            })
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rhs[r] /= p;
        let (prow, prhs) = (self.rows[r].clone(), self.rhs[r]);
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][c];
            if f != 0.0 {
                for (v, pv) in self.rows[i].iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
                self.rhs[i] -= f * prhs;
                if self.rhs[i].abs() < 1e-13 {
                    self.rhs[i] = 0.0;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes `cost` over the current basis; columns with `allowed[j]`
    /// false never enter. Returns false when unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> bool {
        // Dantzig pricing, falling back to Bland's rule after a run of
        // degenerate pivots so cycling cannot happen.
        let mut degenerate_run = 0usize;
        loop {
            let mut d = cost.to_vec();
            for (i, &b) in self.basis.iter().enumerate() {
                let cb = cost[b];
                if cb != 0.0 {
                    for (dj, a) in d.iter_mut().zip(&self.rows[i]) {
                        *dj -= cb * a;
                    }
                }
            }
            let bland = degenerate_run > 50;
            let mut enter = None;
            let mut best = TOL;
            for j in 0..self.cols {
                if !allowed[j] || d[j] <= TOL {
                    continue;
                }
                if bland {
                    enter = Some(j);
                    break;
                }
                if d[j] > best {
                    best = d[j];
                    enter = Some(j);
                }
            }
            let Some(c) = enter else { return true };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a > TOL {
                    let ratio = self.rhs[i] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else { return false };
            degenerate_run = if ratio.abs() < 1e-12 { degenerate_run + 1 } else { 0 };
            self.pivot(r, c);
        }
    }
}

/// Solves `lp`; on `Optimal` the returned `x` is a basic (vertex) solution.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.vars();

    // Shift x = lo + x' so every variable is nonnegative; finite upper
    // bounds become rows.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for c in &lp.constraints {
        let shift: f64 = c.coeffs.iter().zip(&lp.bounds).map(|(a, (lo, _))| a * lo).sum();
        rows.push((c.coeffs.clone(), c.relation, c.rhs - shift));
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        if hi.is_finite() {
            let mut coeffs = vec![0.0; n];
            coeffs[j] = 1.0;
            rows.push((coeffs, Relation::Le, hi - lo));
        }
    }
    for row in rows.iter_mut() {
        if row.2 < 0.0 {
            row.0.iter_mut().for_each(|a| *a = -*a);
            row.2 = -row.2;
            row.1 = match row.1 {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let slack_count = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let art_count = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let cols = n + slack_count + art_count;
    let art_start = n + slack_count;
    let mut t = Tableau {
        rows: vec![vec![0.0; cols]; m],
        rhs: vec![0.0; m],
        basis: vec![0; m],
        cols,
    };
    let (mut s, mut a) = (n, art_start);
    for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        t.rows[i][..n].copy_from_slice(coeffs);
        t.rhs[i] = *rhs;
        match rel {
            Relation::Le => {
                t.rows[i][s] = 1.0;
                t.basis[i] = s;
                s += 1;
            }
            Relation::Ge => {
                t.rows[i][s] = -1.0;
                t.rows[i][a] = 1.0;
                t.basis[i] = a;
                s += 1;
                a += 1;
            }
            Relation::Eq => {
                t.rows[i][a] = 1.0;
                t.basis[i] = a;
                a += 1;
            }
        }
    }

    let unshift = |t: &Tableau| -> Vec<f64> {
        let mut x: Vec<f64> = lp.bounds.iter().map(|b| b.0).collect();
        for (i, &b) in t.basis.iter().enumerate() {
            if b < n {
                x[b] += t.rhs[i];
            }
        }
        x
    };

    if art_count > 0 {
        let mut cost = vec![0.0; cols];
        cost[art_start..].iter_mut().for_each(|c| *c = -1.0);
        let allowed = vec![true; cols];
        t.optimize(&cost, &allowed);
        let infeas: f64 = t
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= art_start)
            .map(|(i, _)| t.rhs[i])
            .sum();
        if infeas > 1e-7 {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: unshift(&t),
                objective: f64::NAN,
            });
        }
        // Drive zero-valued artificials out of the basis; rows where that is
        // impossible are redundant and dropped.
        let mut i = 0;
        while i < t.rows.len() {
            if t.basis[i] >= art_start {
                let col = (0..art_start).find(|&j| t.rows[i][j].abs() > TOL);
                match col {
                    Some(j) => {
                        t.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        t.rows.remove(i);
                        t.rhs.remove(i);
                        t.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }

    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&lp.objective);
    let allowed: Vec<bool> = (0..cols).map(|j| j < art_start).collect();
    if !t.optimize(&cost, &allowed) {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: unshift(&t),
            objective: f64::INFINITY,
        });
    }
    let x = unshift(&t);
    let objective = x.iter().zip(&lp.objective).map(|(v, c)| v * c).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
    })
}

/// A tangent line `slope * x + intercept` of `ln` touching at `point`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tangent {
    pub point: f64,
    pub slope: f64,
    pub intercept: f64,
}

impl Tangent {
    pub fn at(point: f64) -> Self {
        Self {
            point,
            slope: 1.0 / point,
            intercept: point.ln() - 1.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Piecewise-linear upper envelope of `ln` on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEnvelope {
    pub lo: f64,
    pub hi: f64,
    pub tangents: Vec<Tangent>,
}

impl LogEnvelope {
    pub fn eval(&self, x: f64) -> f64 {
        self.tangents.iter().map(|t| t.eval(x)).fold(f64::INFINITY, f64::min)
    }
}

/// Tangents at `n_tangents` evenly spaced points spanning `[lo, hi]`.
pub fn log_envelope(lo: f64, hi: f64, n_tangents: usize) -> Result<LogEnvelope> {
    if !(lo.is_finite() && lo > 0.0) {
        return Err(Error::invalid("lo", format!("{lo} must be positive")));
    }
    if !(hi.is_finite() && hi > lo) {
        return Err(Error::invalid("hi", format!("{hi} must exceed lo = {lo}")));
    }
    if n_tangents < 2 {
        return Err(Error::invalid("n_tangents", "need at least two tangents"));
    }
    let step = (hi - lo) / (n_tangents - 1) as f64;
    let tangents = (0..n_tangents)
        .map(|i| Tangent::at(if i + 1 == n_tangents { hi } else { lo + step * i as f64 }))
        .collect();
    Ok(LogEnvelope { lo, hi, tangents })
}
