//! Replicated runs over seeds, schemes and sweep points.

use rayon::prelude::*;

use crate::channel::ChannelAudit;
use crate::error::Result;
use crate::harness::report::{mean_ci95, sig6};
use crate::harness::scenario::{Mode, Scenario, Scheme};
use crate::multicast::run_infrastructure;
use crate::multihop::run_multihop;

/// Worker count override for the replica pool.
pub const WORKERS_ENV: &str = "CRVIDEO_WORKERS";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Keep per-GoP / per-slot trace rows.
    pub trace: bool,
}

/// Metrics of one (scheme, sweep point, seed) replica.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplicaRow {
    pub scheme: String,
    pub sweep_value: String,
    pub seed: u64,
    /// Mean PSNR over delivered GoPs (all groups or sessions).
    pub mean_psnr_db: Option<f64>,
    /// Utility per GoP; undelivered groups contribute nothing.
    pub utility: Option<f64>,
    /// Collisions per slot, averaged over channels.
    pub collision_rate: Option<f64>,
    pub collision_rate_max: Option<f64>,
    /// Mean planner iterations per slot (multihop dual only).
    pub iterations: Option<f64>,
    /// Group-GoPs whose base layer missed its deadline.
    pub undelivered: Option<u64>,
    pub trajectory: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Aggregate {
    pub scheme: String,
    pub sweep_value: String,
    /// Successful replicas.
    pub replicas: usize,
    pub errors: usize,
    /// (mean, 95% half-width) over replicas.
    pub psnr: Option<(f64, f64)>,
    pub utility: Option<(f64, f64)>,
    pub collision_rate: Option<f64>,
    pub collision_rate_max: Option<f64>,
    pub iterations: Option<f64>,
    pub undelivered: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Experiment {
    pub sweep_key: String,
    pub replicas: Vec<ReplicaRow>,
    /// One per (scheme, sweep point), sweep-major.
    pub aggregates: Vec<Aggregate>,
    pub trace_header: Vec<String>,
    pub trace: Vec<Vec<String>>,
}

impl Experiment {
    pub fn aggregate(&self, scheme: &str, sweep_value: &str) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.scheme == scheme && a.sweep_value == sweep_value)
    }
}

fn worker_count() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn collision_stats(audit: &[ChannelAudit]) -> (Option<f64>, Option<f64>) {
    let rates: Vec<f64> = audit.iter().map(ChannelAudit::collision_rate).collect();
    (mean(&rates), rates.iter().copied().reduce(f64::max))
}

struct Job {
    scenario: Scenario,
    scheme: Scheme,
    sweep_value: String,
    seed: u64,
}

fn run_job(job: &Job, trace: bool) -> (ReplicaRow, Vec<Vec<String>>) {
    let mut row = ReplicaRow {
        scheme: job.scheme.name().to_string(),
        sweep_value: job.sweep_value.clone(),
        seed: job.seed,
        ..ReplicaRow::default()
    };
    let result = match job.scheme {
        Scheme::Infra(s) => infra_replica(job, s, trace, &mut row),
        Scheme::Multihop(s) => multihop_replica(job, s, trace, &mut row),
    };
    match result {
        Ok(rows) => (row, rows),
        Err(e) => {
            row.error = Some(e.to_string());
            (row, Vec::new())
        }
    }
}

fn prefix(job: &Job) -> Vec<String> {
    vec![
        job.scheme.name().to_string(),
        job.sweep_value.clone(),
        job.seed.to_string(),
    ]
}

fn infra_replica(
    job: &Job,
    scheme: crate::multicast::InfraScheme,
    trace: bool,
    row: &mut ReplicaRow,
) -> Result<Vec<Vec<String>>> {
    let cfg = job.scenario.infra_config()?;
    let run = run_infrastructure(&cfg, scheme, job.seed, job.scenario.horizon)?;
    let psnr: Vec<f64> = run.outcomes.iter().filter_map(|o| o.psnr_db).collect();
    let utility: f64 = run.outcomes.iter().map(|o| o.utility.unwrap_or(0.0)).sum();
    row.mean_psnr_db = mean(&psnr);
    row.utility = Some(utility / f64::from(job.scenario.horizon));
    (row.collision_rate, row.collision_rate_max) = collision_stats(&run.audit);
    row.undelivered = Some(run.outcomes.iter().filter(|o| o.psnr_db.is_none()).count() as u64);
    row.trajectory = run.trajectory.clone();
    if !trace {
        return Ok(Vec::new());
    }
    Ok(run
        .outcomes
        .iter()
        .map(|o| {
            let mut r = prefix(job);
            r.extend([
                o.slot.to_string(),
                o.group.to_string(),
                sig6(o.delivered_rate_kb),
                o.psnr_db.map(sig6).unwrap_or_else(|| "undelivered".into()),
                o.collisions.to_string(),
                run.trajectory.clone(),
            ]);
            r
        })
        .collect())
}

fn multihop_replica(
    job: &Job,
    scheme: crate::multihop::MultihopScheme,
    trace: bool,
    row: &mut ReplicaRow,
) -> Result<Vec<Vec<String>>> {
    let cfg = job.scenario.multihop_config()?;
    let gop_slots = u64::from(cfg.sessions.iter().map(|s| s.gop_slots).max().unwrap_or(1));
    let run = run_multihop(&cfg, scheme, job.seed, u64::from(job.scenario.horizon) * gop_slots)?;
    let psnr: Vec<f64> = run.records.iter().filter_map(|r| r.psnr_db).collect();
    row.mean_psnr_db = mean(&psnr);
    row.utility = Some(psnr.iter().map(|q| q.ln()).sum::<f64>() / f64::from(job.scenario.horizon));
    (row.collision_rate, row.collision_rate_max) = collision_stats(&run.audit);
    if scheme == crate::multihop::MultihopScheme::Dual {
        let per_slot: Vec<f64> = run
            .records
            .iter()
            .filter(|r| r.session == 0)
            .map(|r| r.iterations as f64)
            .collect();
        row.iterations = mean(&per_slot);
    }
    row.trajectory = run.trajectory.clone();
    if !trace {
        return Ok(Vec::new());
    }
    Ok(run
        .records
        .iter()
        .map(|r| {
            let mut out = prefix(job);
            out.extend([
                r.slot.to_string(),
                r.session.to_string(),
                sig6(r.delivered_kb),
                r.psnr_db.map(sig6).unwrap_or_default(),
                r.iterations.to_string(),
                r.duality_gap.map(sig6).unwrap_or_default(),
            ]);
            out
        })
        .collect())
}

fn trace_header(mode: Mode) -> Vec<String> {
    let tail: &[&str] = match mode {
        Mode::Infrastructure => &[
            "slot",
            "group",
            "delivered_rate_kb",
            "psnr_db",
            "collisions",
            "trajectory",
        ],
        Mode::Multihop => &[
            "slot",
            "session",
            "delivered_kb",
            "psnr_db",
            "iterations_to_converge",
            "duality_gap",
        ],
    };
    ["scheme", "sweep_value", "seed"]
        .iter()
        .chain(tail)
        .map(|s| s.to_string())
        .collect()
}

fn aggregate(rows: &[&ReplicaRow]) -> Aggregate {
    let ok: Vec<&&ReplicaRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    let collect = |f: fn(&ReplicaRow) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
    let ci = |xs: Vec<f64>| (!xs.is_empty()).then(|| mean_ci95(&xs));
    let undelivered: Vec<u64> = ok.iter().filter_map(|r| r.undelivered).collect();
    Aggregate {
        scheme: rows[0].scheme.clone(),
        sweep_value: rows[0].sweep_value.clone(),
        replicas: ok.len(),
        errors: rows.len() - ok.len(),
        psnr: ci(collect(|r| r.mean_psnr_db)),
        utility: ci(collect(|r| r.utility)),
        collision_rate: mean(&collect(|r| r.collision_rate)),
        collision_rate_max: collect(|r| r.collision_rate_max).into_iter().reduce(f64::max),
        iterations: mean(&collect(|r| r.iterations)),
        undelivered: (!undelivered.is_empty()).then(|| undelivered.iter().sum()),
    }
}

/// Runs every scheme at every sweep point over the scenario's seeds. All
/// schemes share the same seeds, so replicas are paired. A failing replica
/// becomes an error row instead of aborting the experiment.
pub fn run_experiment(scenario: &Scenario, opts: &RunOptions) -> Result<Experiment> {
    scenario.validate()?;
    let schemes = scenario.schemes()?;
    let mut jobs = Vec::new();
    for point in scenario.points()? {
        let at = scenario.at(point.as_ref())?;
        let label = point.as_ref().map(|v| v.label()).unwrap_or_default();
        for &scheme in &schemes {
            for &seed in &scenario.seeds {
                jobs.push(Job {
                    scenario: at.clone(),
                    scheme,
                    sweep_value: label.clone(),
                    seed,
                });
            }
        }
    }

    let work = || jobs.par_iter().map(|j| run_job(j, opts.trace)).collect::<Vec<_>>();
    let results = match worker_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| crate::Error::invalid(WORKERS_ENV, e.to_string()))?
            .install(work),
        None => work(),
    };

    let mut exp = Experiment {
        sweep_key: scenario
            .sweep
            .as_ref()
            .map(|s| s.key.name().to_string())
            .unwrap_or_default(),
        trace_header: trace_header(scenario.mode),
        ..Experiment::default()
    };
    for (row, trace) in results {
        exp.replicas.push(row);
        exp.trace.extend(trace);
    }
    for chunk in exp.replicas.chunks(scenario.seeds.len()) {
        let refs: Vec<&ReplicaRow> = chunk.iter().collect();
        exp.aggregates.push(aggregate(&refs));
    }
    Ok(exp)
}

/// Aggregates of each scheme at a single point (the first sweep value, or
/// the scenario as given).
pub fn compare_schemes(scenario: &Scenario) -> Result<Vec<Aggregate>> {
    let mut single = scenario.clone();
    if let Some(first) = scenario.points()?.into_iter().next().flatten() {
        single = scenario.at(Some(&first))?;
    }
    Ok(run_experiment(&single, &RunOptions::default())?.aggregates)
}
