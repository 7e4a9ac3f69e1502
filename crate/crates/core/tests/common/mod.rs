//! Independent oracles and instance generators shared by integration tests.
#![allow(dead_code)]

use crvideo::multicast::{Layer, QueuedTile};
use crvideo::multihop::{ChannelSchedule, LinkChannels, PathOption, PathProblem};
use crvideo::video::{MulticastGroup, VideoSource};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

// ---- partition problem ----

pub fn random_groups(rng: &mut ChaCha8Rng) -> (Vec<MulticastGroup>, f64) {
    let g_count = rng.gen_range(1..=3);
    let groups = (0..g_count)
        .map(|_| {
            let m = rng.gen_range(1..=3);
            let mut audience: Vec<u32> = (0..m).map(|_| rng.gen_range(1..=20)).collect();
            audience.sort_unstable_by(|a, b| b.cmp(a));
            let mut payload = Vec::new();
            let mut p = 0.0;
            for _ in 0..m {
                p += rng.gen_range(0.3..2.0);
                payload.push(p);
            }
            let src = VideoSource::new(
                rng.gen_range(25.0..35.0),
                rng.gen_range(0.05..2.0),
                0.0,
                rng.gen_range(2.0..15.0),
            )
            .unwrap();
            MulticastGroup::new(src, audience, payload).unwrap()
        })
        .collect();
    (groups, f64::from(rng.gen_range(1..=6u32)))
}

/// Sum over users of ln PSNR, written out from the model definition.
pub fn partition_utility(groups: &[MulticastGroup], l: &[Vec<u32>]) -> f64 {
    let mut total = 0.0;
    for (g, grp) in groups.iter().enumerate() {
        let mut cum = 0.0;
        for k in 0..grp.payload.len() {
            cum += grp.payload[k] * f64::from(l[g][k]);
            let next = grp.audience.get(k + 1).copied().unwrap_or(0);
            let users = f64::from(grp.audience[k] - next);
            total += users * (grp.source.q_base + grp.source.beta * cum).ln();
        }
    }
    total
}

/// Best utility over all tile vectors within the budget and rate caps.
pub fn partition_optimum(groups: &[MulticastGroup], t_e: f64) -> f64 {
    let cells: Vec<(usize, usize)> = groups
        .iter()
        .enumerate()
        .flat_map(|(g, grp)| (0..grp.payload.len()).map(move |m| (g, m)))
        .collect();
    let mut l: Vec<Vec<u32>> = groups.iter().map(|g| vec![0; g.payload.len()]).collect();
    let mut best = f64::NEG_INFINITY;
    fn go(
        groups: &[MulticastGroup],
        cells: &[(usize, usize)],
        i: usize,
        left: u32,
        l: &mut Vec<Vec<u32>>,
        best: &mut f64,
    ) {
        if i == cells.len() {
            let ok = groups.iter().enumerate().all(|(g, grp)| {
                let rate: f64 = grp.payload.iter().zip(&l[g]).map(|(b, &n)| b * f64::from(n)).sum();
                rate <= grp.source.r_enh_max + 1e-9
            });
            if ok {
                *best = best.max(partition_utility(groups, l));
            }
            return;
        }
        let (g, m) = cells[i];
        for k in 0..=left {
            l[g][m] = k;
            go(groups, cells, i + 1, left - k, l, best);
        }
        l[g][m] = 0;
    }
    go(groups, &cells, 0, t_e.floor() as u32, &mut l, &mut best);
    best
}

// ---- slot scheduling ----

/// Random single-layer queues with nonincreasing rewards per group.
pub fn random_queues(rng: &mut ChaCha8Rng) -> (Vec<(usize, f64)>, Vec<Vec<QueuedTile>>) {
    let n_ch = rng.gen_range(1..=6);
    let channels = (0..n_ch).map(|c| (c, rng.gen_range(0.0..1.0))).collect();
    let groups = rng.gen_range(1..=3);
    let queues = (0..groups)
        .map(|_| {
            let len = rng.gen_range(0..=4);
            let mut rewards: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..5.0)).collect();
            rewards.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let layer = Layer::Enhancement(rng.gen_range(0..3));
            rewards
                .into_iter()
                .enumerate()
                .map(|(i, reward)| QueuedTile {
                    layer,
                    ordinal: i as u32 + 1,
                    reward,
                })
                .collect()
        })
        .collect();
    (channels, queues)
}

/// Best expected reward over every injective map from channels to queued
/// tiles (channels may stay idle) in which each group's granted tiles form
/// a prefix of its queue.
pub fn assignment_optimum(channels: &[(usize, f64)], queues: &[Vec<QueuedTile>]) -> f64 {
    let tiles: Vec<(usize, usize)> = queues
        .iter()
        .enumerate()
        .flat_map(|(g, q)| (0..q.len()).map(move |i| (g, i)))
        .collect();
    fn go(
        channels: &[(usize, f64)],
        queues: &[Vec<QueuedTile>],
        tiles: &[(usize, usize)],
        c: usize,
        used: &mut Vec<bool>,
        acc: f64,
        best: &mut f64,
    ) {
        if c == channels.len() {
            let prefix = (0..queues.len()).all(|g| {
                let taken: Vec<bool> = tiles
                    .iter()
                    .zip(used.iter())
                    .filter(|((tg, _), _)| *tg == g)
                    .map(|(_, &u)| u)
                    .collect();
                taken.windows(2).all(|w| w[0] || !w[1])
            });
            if prefix {
                *best = best.max(acc);
            }
            return;
        }
        go(channels, queues, tiles, c + 1, used, acc, best);
        for t in 0..tiles.len() {
            if !used[t] {
                let (g, i) = tiles[t];
                used[t] = true;
                go(
                    channels,
                    queues,
                    tiles,
                    c + 1,
                    used,
                    acc + channels[c].1 * queues[g][i].reward,
                    best,
                );
                used[t] = false;
            }
        }
    }
    let mut best = 0.0;
    go(
        channels,
        queues,
        &tiles,
        0,
        &mut vec![false; tiles.len()],
        0.0,
        &mut best,
    );
    best
}

// ---- tunnel scheduling ----

pub fn random_links(rng: &mut ChaCha8Rng, hops: usize) -> Vec<LinkChannels> {
    (0..hops)
        .map(|_| {
            let mut ids: Vec<usize> = (0..6).collect();
            ids.shuffle(rng);
            let c = rng.gen_range(1..=4);
            ids[..c]
                .iter()
                .map(|&i| (i, (rng.gen::<f64>() * 90.0).round() / 100.0))
                .collect()
        })
        .collect()
}

fn ordered_choices(k: usize, n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in ordered_choices(k, n - 1) {
        for i in 0..k {
            if !p.contains(&i) {
                let mut q = p.clone();
                q.push(i);
                out.push(q);
            }
        }
    }
    out
}

/// Largest expected per-slot success over every set of tunnels: each link
/// uses distinct channels, and no channel used on a link appears on either
/// neighbouring link.
pub fn schedule_optimum(avail: &[LinkChannels]) -> f64 {
    fn go(avail: &[LinkChannels], n: usize, k: usize, choice: &mut Vec<Vec<usize>>, best: &mut f64) {
        if k == avail.len() {
            let h: f64 = (0..n)
                .map(|r| {
                    (0..avail.len())
                        .map(|j| 1.0 - avail[j][choice[j][r]].1)
                        .product::<f64>()
                })
                .sum();
            *best = best.max(h);
            return;
        }
        for p in ordered_choices(avail[k].len(), n) {
            if k > 0 {
                let prev: Vec<usize> = choice[k - 1].iter().map(|&i| avail[k - 1][i].0).collect();
                if p.iter().any(|&i| prev.contains(&avail[k][i].0)) {
                    continue;
                }
            }
            choice[k] = p;
            go(avail, n, k + 1, choice, best);
        }
    }
    let max_n = avail.iter().map(Vec::len).min().unwrap_or(0);
    let mut best = 0.0;
    for n in 1..=max_n {
        go(avail, n, 0, &mut vec![vec![]; avail.len()], &mut best);
    }
    best
}

// ---- path selection ----

/// 1-3 sessions with 1-3 candidate paths each over a shared relay pool.
pub fn random_problem(rng: &mut ChaCha8Rng) -> PathProblem {
    let sessions = rng.gen_range(1..=3);
    let mut opts = Vec::new();
    for l in 0..sessions {
        for _ in 0..rng.gen_range(1..=3) {
            let hops = rng.gen_range(1..=3);
            let mut nodes = vec![100 + l];
            let mut relays: Vec<usize> = (0..6).collect();
            relays.shuffle(rng);
            nodes.extend(&relays[..hops - 1]);
            nodes.push(200 + l);
            opts.push(PathOption {
                session: l,
                avail: vec![vec![(0, 0.1)]; nodes.len() - 1],
                nodes,
                schedule: ChannelSchedule::default(),
                gain: rng.gen_range(0.01..1.0),
            });
        }
    }
    PathProblem::from_options(sessions, opts, 1)
}

/// Best total gain over subsets of options that use at most `max_paths`
/// per session and never share a node.
pub fn selection_optimum(p: &PathProblem, max_paths: usize) -> f64 {
    let n = p.options.len();
    let mut best = 0.0;
    for mask in 0u32..(1 << n) {
        let chosen: Vec<&PathOption> = (0..n).filter(|j| mask >> j & 1 == 1).map(|j| &p.options[j]).collect();
        let per_session_ok = (0..p.sessions).all(|l| chosen.iter().filter(|o| o.session == l).count() <= max_paths);
        let mut seen = std::collections::HashSet::new();
        let disjoint = chosen.iter().flat_map(|o| o.nodes.iter()).all(|v| seen.insert(*v));
        if per_session_ok && disjoint {
            best = f64::max(best, chosen.iter().map(|o| o.gain).sum());
        }
    }
    best
}
