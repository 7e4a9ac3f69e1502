//! Matching queued tiles to the channels accessed in one slot.

use std::cmp::Ordering;

/// Which layer a tile belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Layer {
    Base,
    /// Enhancement sub-layer sent with scheme `m` (0-based).
    Enhancement(usize),
}

/// A tile waiting for transmission, with its utility reward if received.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueuedTile {
    pub layer: Layer,
    /// 1-based position within its layer.
    pub ordinal: u32,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileGrant {
    pub channel: usize,
    pub group: usize,
    pub tile: QueuedTile,
    pub success_prob: f64,
}

/// Base tiles outrank every enhancement tile; enhancement tiles rank by
/// reward.
fn outranks(a: &QueuedTile, b: &QueuedTile) -> bool {
    match (a.layer, b.layer) {
        (Layer::Base, Layer::Enhancement(_)) => true,
        (Layer::Enhancement(_), Layer::Base) => false,
        _ => a.reward > b.reward,
    }
}

/// Grants tiles to `channels`, given as `(channel id, success probability)`.
///
/// Channels are served in decreasing success probability; each takes the
/// group head with the largest reward. `queues[g]` lists group `g`'s
/// pending tiles in layer order; only tiles of the head's layer can be
/// granted this slot, since a layer is sent only once everything below it
/// is acknowledged.
pub fn tsa_schedule(channels: &[(usize, f64)], queues: &[Vec<QueuedTile>]) -> Vec<TileGrant> {
    let mut order: Vec<(usize, f64)> = channels.to_vec();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    let mut head = vec![0usize; queues.len()];
    let mut grants = Vec::new();
    for (channel, c) in order {
        let mut best: Option<usize> = None;
        for (g, q) in queues.iter().enumerate() {
            let Some(tile) = q.get(head[g]) else { continue };
            if tile.layer != q[0].layer {
                continue;
            }
            if best.is_none_or(|b| outranks(tile, &queues[b][head[b]])) {
                best = Some(g);
            }
        }
        let Some(g) = best else { break };
        grants.push(TileGrant {
            channel,
            group: g,
            tile: queues[g][head[g]],
            success_prob: c,
        });
        head[g] += 1;
    }
    grants
}

/// Expected utility of a set of grants.
pub fn expected_reward(grants: &[TileGrant]) -> f64 {
    grants.iter().map(|g| g.success_prob * g.tile.reward).sum()
}
