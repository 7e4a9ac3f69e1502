//! How many enhancement tiles the coming slots are expected to carry.

use crate::channel::MarkovChannel;
use crate::sensing::predict_belief;
use crate::video::MulticastGroup;

/// Expected idle tiles over the next few slots of the current GoP, from
/// the present beliefs `a` rolled forward through each channel's chain.
pub fn estimate_budget(a: &[f64], channels: &[MarkovChannel], t: u64, gop_len: u32, est_horizon: u32) -> f64 {
    let left = gop_len as u64 - t % gop_len as u64;
    let t_min = (est_horizon.saturating_sub(1) as u64).min(left) as u32;
    a.iter()
        .zip(channels)
        .map(|(&a, ch)| (0..=t_min).map(|tau| predict_belief(a, ch, tau)).sum::<f64>())
        .sum()
}

/// Tiles carrying the base layer of each group.
pub fn base_tiles(group: &MulticastGroup) -> u32 {
    (group.source.r_base / group.payload[0] - 1e-9).ceil().max(0.0) as u32
}

/// GoP-level enhancement budget: the average number of idle tiles in a GoP
/// minus the tiles the base layers need, never negative.
pub fn gop_budget(channels: &[MarkovChannel], gop_len: u32, groups: &[MulticastGroup]) -> f64 {
    let n = channels.len() as f64;
    if channels.is_empty() {
        return 0.0;
    }
    let mean_eta = channels.iter().map(|c| c.utilization()).sum::<f64>() / n;
    let base: u32 = groups.iter().map(base_tiles).sum();
    (n * gop_len as f64 * (1.0 - mean_eta) - base as f64).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::VideoSource;

    fn ch(lambda: f64, mu: f64) -> MarkovChannel {
        MarkovChannel::new(lambda, mu).unwrap()
    }

    #[test]
    fn certain_availability() {
        let c = [ch(0.8, 0.2), ch(0.8, 0.2)];
        // t_min = 4 when five slots of the horizon remain in the GoP.
        assert!(
            (estimate_budget(&[1.0, 1.0], &c, 0, 150, 5) - 2.0 * (1.0 + 0.8 + 0.68 + 0.608 + 0.5648)).abs() < 1e-12
        );
        let sure = [ch(1.0, 0.0), ch(1.0, 0.0)];
        assert!((estimate_budget(&[1.0, 1.0], &sure, 0, 150, 5) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn two_term_horizon() {
        assert!((estimate_budget(&[0.0], &[ch(0.8, 0.2)], 0, 150, 2) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn single_term_horizon() {
        assert_eq!(estimate_budget(&[0.37], &[ch(0.8, 0.2)], 17, 150, 1), 0.37);
    }

    #[test]
    fn horizon_clipped_at_gop_end() {
        let c = [ch(1.0, 0.0)];
        // One slot before the GoP boundary: t mod T_GoP = 149, t_min = 1.
        assert_eq!(estimate_budget(&[1.0], &c, 149, 150, 10), 2.0);
    }

    #[test]
    fn gop_level_budget() {
        let v = VideoSource::new(30.0, 0.1, 30.0, 600.0).unwrap();
        let g = MulticastGroup::new(v, vec![3, 2], vec![1.0, 1.5]).unwrap();
        assert_eq!(base_tiles(&g), 30);
        let c = vec![ch(0.8, 0.2); 4];
        assert!((gop_budget(&c, 100, &[g.clone(), g.clone()]) - (200.0 - 60.0)).abs() < 1e-9);
        assert_eq!(gop_budget(&c[..1], 10, &[g]), 0.0);
    }
}
