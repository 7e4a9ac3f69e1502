//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints its PASS/FAIL line whether or not it passes; the
//! process exits nonzero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use crvideo::channel::{ChannelBank, ChannelKey, MarkovChannel};
use crvideo::harness::{
    load_scenario, run_experiment, write_summary, write_trace, Experiment, RunOptions, Scenario, Sweep, SweepKey,
    SweepValue,
};
use crvideo::multicast::{
    expected_reward, grd1, relaxation_bound, run_infrastructure, sequential_fixing, tsa_schedule, InfraScheme,
};
use crvideo::multihop::{
    brute_force_crv, dual_path_select, heuristic, lp_multipliers, schedule_channels, BruteCaps, ChannelSchedule,
    DualParams, PathOption, PathProblem, StepRule,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BOUND: f64 = 0.393_469_340_287_366_6; // 1 - e^{-1/2}

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        ok,
        detail: detail.into(),
    }
}

fn scenario(name: &str) -> Scenario {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "scenarios", name].iter().collect();
    load_scenario(path).expect("shipped scenario loads")
}

fn as_f64(y: &[bool]) -> Vec<f64> {
    y.iter().map(|&b| f64::from(u8::from(b))).collect()
}

fn selection_is_valid(p: &PathProblem, y: &[bool]) -> bool {
    let chosen: Vec<&PathOption> = p.options.iter().zip(y).filter(|(_, &b)| b).map(|(o, _)| o).collect();
    let mut seen = std::collections::HashSet::new();
    (0..p.sessions).all(|l| chosen.iter().filter(|o| o.session == l).count() <= 1)
        && chosen.iter().flat_map(|o| o.nodes.iter()).all(|v| seen.insert(*v))
}

fn greedy_partition_bound() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut violations, mut below_on_gain, mut worst) = (0, 0, f64::INFINITY);
    let n = 250;
    for _ in 0..n {
        let (groups, t_e) = common::random_groups(&mut rng);
        let opt = common::partition_optimum(&groups, t_e);
        let got = common::partition_utility(&groups, &grd1(&groups, t_e).l);
        if got < BOUND * opt - 1e-9 {
            violations += 1;
        }
        // Reported only: the same ratio measured on the gain over the empty
        // allocation, which the log utility's large constant term hides.
        let empty: Vec<Vec<u32>> = groups.iter().map(|g| vec![0; g.payload.len()]).collect();
        let base = common::partition_utility(&groups, &empty);
        let ratio = if opt - base > 1e-12 {
            (got - base) / (opt - base)
        } else {
            1.0
        };
        worst = worst.min(ratio);
        below_on_gain += usize::from(ratio < BOUND - 1e-9);
    }
    let elapsed = start.elapsed();
    verdict(
        violations == 0 && elapsed < Duration::from_secs(10),
        format!(
            "{n} instances, {violations} violations, {elapsed:.2?} (limit 10s); on gain over empty allocation: {below_on_gain} below bound, worst ratio {worst:.4}"
        ),
    )
}

fn slot_assignment_optimal() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut mismatches = 0;
    for _ in 0..100 {
        let (channels, queues) = common::random_queues(&mut rng);
        let got = expected_reward(&tsa_schedule(&channels, &queues));
        if (got - common::assignment_optimum(&channels, &queues)).abs() > 1e-9 {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        mismatches == 0 && elapsed < Duration::from_secs(5),
        format!("100 instances, {mismatches} mismatches (tol 1e-9), {elapsed:.2?} (limit 5s)"),
    )
}

fn tunnel_schedule_optimal() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut mismatches = 0;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let links = common::random_links(&mut rng, 3);
        let got = schedule_channels(&links).unwrap().expected_success;
        let best = common::schedule_optimum(&links);
        if (got - best).abs() > 1e-9 {
            mismatches += 1;
            worst = worst.max(best - got);
        }
    }
    verdict(
        mismatches == 0,
        format!("100 instances, {mismatches} mismatches (tol 1e-9), largest shortfall {worst:.4}"),
    )
}

fn dual_matches_exhaustive() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut invalid, mut wrong, mut gap) = (0, 0, 0);
    for _ in 0..100 {
        let p = common::random_problem(&mut rng);
        let out = dual_path_select(&p, &DualParams::default());
        let opt = common::selection_optimum(&p, 1);
        let (_, brute) = brute_force_crv(&p, BruteCaps::default()).unwrap();
        if !selection_is_valid(&p, &out.y) || !p.is_feasible(&as_f64(&out.y), 0.0) {
            invalid += 1;
        }
        if (out.objective - brute).abs() > 1e-6 || (brute - opt).abs() > 1e-6 {
            wrong += 1;
        }
        if !(out.converged && out.duality_gap() <= 1e-6 * (1.0 + out.dual_value.abs())) {
            gap += 1;
        }
    }
    verdict(
        invalid + wrong + gap == 0,
        format!("100 instances: {invalid} infeasible, {wrong} objective mismatches (tol 1e-6), {gap} gap violations"),
    )
}

fn channel_stationarity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let chains: Vec<MarkovChannel> = (0..20)
        .map(|_| MarkovChannel::new(rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)).unwrap())
        .collect();
    let mut bank = ChannelBank::new(
        chains.iter().enumerate().map(|(m, c)| {
            (
                ChannelKey {
                    network: 0,
                    channel: m as u32,
                },
                *c,
            )
        }),
        7,
    )
    .unwrap();
    let slots = 1_000_000u32;
    let mut busy = vec![0u32; chains.len()];
    for _ in 0..slots {
        for (b, s) in busy.iter_mut().zip(bank.states()) {
            *b += u32::from(!s.is_idle());
        }
        bank.step();
    }
    let worst = chains
        .iter()
        .zip(&busy)
        .map(|(c, &b)| {
            let eta = (1.0 - c.lambda()) / (1.0 - c.lambda() + c.mu());
            (f64::from(b) / f64::from(slots) - eta).abs()
        })
        .fold(0.0, f64::max);
    verdict(
        worst <= 0.01,
        format!("20 channels x 1e6 slots, largest deviation {worst:.5} (limit 0.01)"),
    )
}

fn collision_contract() -> Verdict {
    let start = Instant::now();
    let sc = scenario("paper_iv.json");
    let cfg = sc.infra_config().unwrap();
    let gops = 100_000u32.div_ceil(cfg.gop_len);
    let run = run_infrastructure(&cfg, InfraScheme::Greedy, 1, gops).unwrap();
    let mut worst = f64::NEG_INFINITY;
    let mut over = 0;
    for (a, g) in run.audit.iter().zip(&cfg.gamma) {
        let excess = a.collision_rate() - g;
        worst = worst.max(excess);
        if excess > 0.02 {
            over += 1;
        }
    }
    let slots = run.audit[0].slots;
    let elapsed = start.elapsed();
    verdict(
        over == 0 && slots >= 100_000 && elapsed < Duration::from_secs(30),
        format!(
            "{slots} slots, {over} channels above gamma + 0.02, largest excess {worst:+.4}, {elapsed:.2?} (limit 30s)"
        ),
    )
}

fn sweep(sc: &Scenario, key: SweepKey, values: &[f64], scheme: &str, horizon: u32) -> Experiment {
    let mut sc = sc.clone();
    sc.horizon = horizon;
    sc.seeds = (1..=10).collect();
    sc.schemes = vec![scheme.into()];
    sc.sweep = Some(Sweep {
        key,
        values: values.iter().map(|&v| SweepValue::Number(v)).collect(),
    });
    run_experiment(&sc, &RunOptions::default()).unwrap()
}

/// Counts steps against the expected direction larger than the larger of
/// the two CI half-widths.
fn trend_breaks(exp: &Experiment, rising: bool) -> (usize, String) {
    let points: Vec<(f64, f64)> = exp.aggregates.iter().map(|a| a.psnr.unwrap()).collect();
    let breaks = points
        .windows(2)
        .filter(|w| {
            let step = if rising { w[1].0 - w[0].0 } else { w[0].0 - w[1].0 };
            step < -w[0].1.max(w[1].1)
        })
        .count();
    let text = points
        .iter()
        .map(|(m, h)| format!("{m:.3}±{h:.3}"))
        .collect::<Vec<_>>()
        .join(" ");
    (breaks, text)
}

fn trends() -> Verdict {
    let start = Instant::now();
    let iv = scenario("paper_iv.json");
    let v = scenario("paper_v.json");
    let (g, g_text) = trend_breaks(&sweep(&iv, SweepKey::Gamma, &[0.1, 0.2, 0.3], "greedy", 20), true);
    let (n, n_text) = trend_breaks(
        &sweep(&iv, SweepKey::Channels, &[3.0, 6.0, 9.0, 12.0, 15.0], "greedy", 20),
        true,
    );
    let (e, e_text) = trend_breaks(&sweep(&v, SweepKey::Eta, &[0.6, 0.7, 0.8, 0.9], "dual", 30), false);
    let elapsed = start.elapsed();
    verdict(
        g + n + e == 0 && elapsed < Duration::from_secs(300),
        format!("gamma [{g_text}] channels [{n_text}] eta [{e_text}]; {elapsed:.1?} (limit 300s)"),
    )
}

fn utility_of(exp: &Experiment, scheme: &str) -> f64 {
    exp.aggregate(scheme, "").unwrap().utility.unwrap().0
}

fn scheme_ordering() -> Verdict {
    let mut iv = scenario("paper_iv.json");
    iv.seeds = (1..=10).collect();
    iv.schemes = vec!["equal".into(), "greedy".into()];
    let infra = run_experiment(&iv, &RunOptions::default()).unwrap();
    let (equal, greedy) = (utility_of(&infra, "equal"), utility_of(&infra, "greedy"));

    let mut v = scenario("paper_v.json");
    v.seeds = (1..=10).collect();
    v.schemes = vec!["dual".into(), "sf".into(), "heuristic".into()];
    let mh = run_experiment(&v, &RunOptions::default()).unwrap();
    let (dual, sf, heur) = (
        utility_of(&mh, "dual"),
        utility_of(&mh, "sf"),
        utility_of(&mh, "heuristic"),
    );
    let paired = |exp: &Experiment| {
        let seeds = exp.replicas.iter().map(|r| r.seed).max().unwrap_or(0) as usize;
        exp.replicas.chunks(seeds).all(|c| {
            c.iter()
                .zip(&exp.replicas[..seeds])
                .all(|(a, b)| a.trajectory == b.trajectory)
        })
    };
    let ok = greedy >= equal && (dual - sf).abs() <= 0.01 * sf.abs() && sf >= heur && paired(&infra) && paired(&mh);
    verdict(
        ok,
        format!("greedy {greedy:.4} vs equal {equal:.4}; dual {dual:.5}, sf {sf:.5} (1% band), heuristic {heur:.5}"),
    )
}

fn four_row_instance() -> PathProblem {
    let opt = |session: usize, relay: usize, gain: f64| PathOption {
        session,
        nodes: vec![10 + session, relay, 20 + session],
        avail: vec![vec![(0, 0.1)]; 2],
        schedule: ChannelSchedule::default(),
        gain,
    };
    PathProblem::from_options(
        2,
        vec![opt(0, 1, 0.9), opt(0, 2, 0.6), opt(1, 1, 0.5), opt(1, 2, 0.8)],
        1,
    )
}

fn convergence_trace() -> Verdict {
    let p = four_row_instance();
    let (e_star, q_star) = lp_multipliers(&p).unwrap();
    let known = dual_path_select(
        &p,
        &DualParams {
            rule: StepRule::Known(q_star),
            ..DualParams::default()
        },
    );
    let estimated = dual_path_select(&p, &DualParams::default());
    let dist: Vec<f64> = known
        .trace
        .iter()
        .map(|e| e.iter().zip(&e_star).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .collect();
    let monotone = dist.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let ok = p.rows.len() == 4 && known.converged && estimated.converged && monotone;
    verdict(
        ok,
        format!(
            "{} rows; known-q*: {} iterations, monotone {monotone}; estimated: {} iterations, converged {}",
            p.rows.len(),
            known.iterations,
            estimated.iterations,
            estimated.converged
        ),
    )
}

fn relaxation_dominance() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut partition_breaks = 0;
    for _ in 0..50 {
        let (groups, t_e) = common::random_groups(&mut rng);
        let lp = relaxation_bound(&groups, t_e).unwrap();
        let sf = common::partition_utility(&groups, &sequential_fixing(&groups, t_e).unwrap().alloc.l);
        let opt = common::partition_optimum(&groups, t_e);
        if !(lp >= sf - 1e-9 && lp >= opt - 1e-9 && sf >= BOUND * opt - 1e-9) {
            partition_breaks += 1;
        }
    }
    let mut selection_breaks = 0;
    for _ in 0..100 {
        let p = common::random_problem(&mut rng);
        let (_, brute) = brute_force_crv(&p, BruteCaps::default()).unwrap();
        let dual = dual_path_select(&p, &DualParams::default()).objective;
        let heur = p.objective(&as_f64(&heuristic(&p)));
        if !(brute >= dual - 1e-9 && dual >= heur - 1e-9) {
            selection_breaks += 1;
        }
    }
    verdict(
        partition_breaks + selection_breaks == 0,
        format!("50 partition instances: {partition_breaks} breaks of LP >= SF >= bound*opt; 100 selection instances: {selection_breaks} breaks of brute >= dual >= heuristic"),
    )
}

fn csv_bytes(sc: &Scenario) -> (Vec<u8>, Vec<u8>) {
    let exp = run_experiment(sc, &RunOptions { trace: true }).unwrap();
    let (mut summary, mut trace) = (Vec::new(), Vec::new());
    write_summary(&exp, &mut summary).unwrap();
    write_trace(&exp, &mut trace).unwrap();
    (summary, trace)
}

fn determinism() -> Verdict {
    let mut same = true;
    let mut sizes = Vec::new();
    for name in ["paper_iv.json", "paper_v.json"] {
        let mut sc = scenario(name);
        sc.horizon = 5;
        sc.seeds = vec![1, 2, 3];
        let first = csv_bytes(&sc);
        std::env::set_var(crvideo::harness::WORKERS_ENV, "1");
        let second = csv_bytes(&sc);
        std::env::remove_var(crvideo::harness::WORKERS_ENV);
        same &= first == second;
        sizes.push(format!("{name}: {} + {} bytes", first.0.len(), first.1.len()));
    }
    verdict(
        same,
        format!(
            "summary and trace identical across runs and worker counts ({})",
            sizes.join(", ")
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("greedy partition within 1-e^-1/2 of optimum", greedy_partition_bound),
        ("slot tile assignment optimal", slot_assignment_optimal),
        ("tunnel channel schedule optimal", tunnel_schedule_optimal),
        ("dual path selection matches exhaustive search", dual_matches_exhaustive),
        ("channel busy fraction matches stationary law", channel_stationarity),
        ("per-channel collision rate within gamma + 0.02", collision_contract),
        ("PSNR trends in gamma, channel count and utilization", trends),
        ("scheme ordering on shipped scenarios", scheme_ordering),
        ("multiplier trace converges monotonically", convergence_trace),
        ("relaxation and heuristic dominance", relaxation_dominance),
        ("byte-identical CSV on rerun", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!v.ok);
        println!(
            "criterion {:>2} {}: {} ({})",
            i + 1,
            if v.ok { "PASS" } else { "FAIL" },
            name,
            v.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
