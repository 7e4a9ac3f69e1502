//! Building amplify-and-forward tunnels along one path.

use crate::error::{Error, Result};
use crate::multihop::topology::Session;

/// Usable channels on one link as `(channel id, loss rate)`.
pub type LinkChannels = Vec<(usize, f64)>;

/// Tunnels set up along a path. `tunnels[r][k]` is the channel tunnel `r`
/// uses on the path's `k`-th link.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelSchedule {
    pub tunnels: Vec<Vec<usize>>,
    /// End-to-end loss of each tunnel.
    pub losses: Vec<f64>,
    /// Expected number of packets delivered per slot, `sum_r (1 - loss_r)`.
    pub expected_success: f64,
}

impl ChannelSchedule {
    pub fn n_tunnels(&self) -> usize {
        self.tunnels.len()
    }
}

/// End-to-end loss of a tunnel crossing links with the given loss rates.
pub fn tunnel_loss(link_losses: &[f64]) -> Result<f64> {
    if link_losses.is_empty() {
        return Err(Error::EmptyPath);
    }
    Ok(1.0 - link_losses.iter().map(|p| 1.0 - p).product::<f64>())
}

/// Gain of sending over a path with expected per-slot success `h`, given
/// the session's quality `q_prev` in the last GoP.
pub fn path_gain(session: &Session, h: f64, q_prev: f64) -> f64 {
    let rho = session.video.beta * session.packet_kb / (session.gop_seconds() * q_prev);
    (rho * h).ln_1p()
}

fn take(set: &mut LinkChannels, channel: usize) -> bool {
    match set.iter().position(|&(c, _)| c == channel) {
        Some(i) => {
            set.remove(i);
            true
        }
        None => false,
    }
}

/// Greedy tunnel construction.
///
/// Each round builds one tunnel. Links left with a single channel are
/// assigned first, walking from the source; the remaining links are then
/// served in increasing order of their best loss rate. Assigning a channel
/// removes it from both neighbouring links, since a relay cannot receive
/// and forward on the same channel. A round stops the whole procedure when
/// some link runs out of channels before the tunnel is complete.
pub fn schedule_channels(avail: &[LinkChannels]) -> Result<ChannelSchedule> {
    if avail.is_empty() {
        return Err(Error::EmptyPath);
    }
    let hops = avail.len();
    let mut left: Vec<LinkChannels> = avail.to_vec();
    let mut out = ChannelSchedule::default();

    'rounds: loop {
        let mut assigned: Vec<Option<usize>> = vec![None; hops];

        let mut k = 0;
        while k < hops {
            if assigned[k].is_some() {
                k += 1;
                continue;
            }
            match left[k].len() {
                0 => break 'rounds,
                1 => {
                    let only = left[k][0].0;
                    let back = assign(&mut left, &mut assigned, k, only);
                    if back && k > 0 {
                        k -= 1;
                    } else {
                        k += 1;
                    }
                }
                _ => k += 1,
            }
        }

        while let Some((k, channel)) = best_open(&left, &assigned) {
            assign(&mut left, &mut assigned, k, channel);
            let starved = [k.wrapping_sub(1), k + 1]
                .into_iter()
                .any(|n| n < hops && assigned[n].is_none() && left[n].is_empty());
            if starved {
                break 'rounds;
            }
        }

        let tunnel: Vec<usize> = assigned.into_iter().map(|c| c.expect("every link assigned")).collect();
        let losses: Vec<f64> = tunnel
            .iter()
            .zip(avail)
            .map(|(&c, set)| set.iter().find(|&&(id, _)| id == c).map(|&(_, p)| p).unwrap_or(1.0))
            .collect();
        let loss = tunnel_loss(&losses)?;
        out.expected_success += 1.0 - loss;
        out.losses.push(loss);
        out.tunnels.push(tunnel);
    }
    Ok(out)
}

/// Assigns `channel` on link `k` and strips it from both neighbours for
/// good: a relay cannot receive and forward on one channel in any tunnel.
/// Returns whether the previous link, still open this round, lost a channel.
fn assign(left: &mut [LinkChannels], assigned: &mut [Option<usize>], k: usize, channel: usize) -> bool {
    take(&mut left[k], channel);
    assigned[k] = Some(channel);
    let mut back = false;
    if k > 0 {
        back = take(&mut left[k - 1], channel) && assigned[k - 1].is_none();
    }
    if k + 1 < left.len() {
        take(&mut left[k + 1], channel);
    }
    back
}

/// Lowest-loss channel over all unassigned links; ties go to the earlier
/// link, then the lower channel id.
fn best_open(left: &[LinkChannels], assigned: &[Option<usize>]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for (k, set) in left.iter().enumerate() {
        if assigned[k].is_some() {
            continue;
        }
        for &(c, p) in set {
            let better = match best {
                None => true,
                Some((bk, bc, bp)) => p < bp || (p == bp && (k, c) < (bk, bc)),
            };
            if better {
                best = Some((k, c, p));
            }
        }
    }
    best.map(|(k, c, _)| (k, c))
}
