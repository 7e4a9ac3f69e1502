//! CR mesh topology, video sessions, and delay-bounded path enumeration.

use std::collections::BTreeMap;

use crate::error::{check_probability, Error, Result};
use crate::video::VideoSource;

/// An undirected link with a fixed delay and a loss rate per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub a: usize,
    pub b: usize,
    /// Seconds.
    pub delay: f64,
    pub loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub networks: usize,
    pub channels: usize,
    /// Primary network whose coverage each node lies in.
    pub node_network: Vec<usize>,
    pub links: Vec<Link>,
    index: BTreeMap<(usize, usize), usize>,
    adjacency: Vec<Vec<usize>>,
}

impl Topology {
    pub fn new(networks: usize, channels: usize, node_network: Vec<usize>, links: Vec<Link>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::invalid("channels", "at least one channel is required"));
        }
        if let Some(&k) = node_network.iter().find(|&&k| k >= networks) {
            return Err(Error::invalid(
                "node_network",
                format!("network {k} out of range 0..{networks}"),
            ));
        }
        let n = node_network.len();
        let mut index = BTreeMap::new();
        let mut adjacency = vec![Vec::new(); n];
        for (id, l) in links.iter().enumerate() {
            if l.a >= n || l.b >= n || l.a == l.b {
                return Err(Error::invalid("links", format!("link {id} joins {} and {}", l.a, l.b)));
            }
            if !l.delay.is_finite() || l.delay < 0.0 {
                return Err(Error::invalid("links", format!("link {id} has delay {}", l.delay)));
            }
            if l.loss.len() != channels {
                return Err(Error::invalid(
                    "links",
                    format!("link {id} lists {} loss rates for {channels} channels", l.loss.len()),
                ));
            }
            for &p in &l.loss {
                check_probability("loss", p)?;
            }
            let key = (l.a.min(l.b), l.a.max(l.b));
            if index.insert(key, id).is_some() {
                return Err(Error::invalid("links", format!("duplicate link {}-{}", key.0, key.1)));
            }
            adjacency[l.a].push(l.b);
            adjacency[l.b].push(l.a);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(Self {
            networks,
            channels,
            node_network,
            links,
            index,
            adjacency,
        })
    }

    pub fn nodes(&self) -> usize {
        self.node_network.len()
    }

    pub fn link_between(&self, i: usize, j: usize) -> Option<usize> {
        self.index.get(&(i.min(j), i.max(j))).copied()
    }

    /// Neighbours in ascending id order.
    pub fn neighbours(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    /// Link ids along a node sequence.
    pub fn path_links(&self, path: &[usize]) -> Option<Vec<usize>> {
        path.windows(2).map(|w| self.link_between(w[0], w[1])).collect()
    }

    pub fn path_delay(&self, path: &[usize]) -> Option<f64> {
        Some(self.path_links(path)?.iter().map(|&l| self.links[l].delay).sum())
    }
}

/// One unicast video stream across the mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub source: usize,
    pub dest: usize,
    pub video: VideoSource,
    /// Payload of one packet, kb.
    pub packet_kb: f64,
    /// Seconds.
    pub slot_len: f64,
    pub gop_slots: u32,
}

impl Session {
    pub fn validate(&self, topo: &Topology) -> Result<()> {
        if self.source >= topo.nodes() || self.dest >= topo.nodes() {
            return Err(Error::invalid(
                "sessions",
                format!("endpoint outside 0..{}", topo.nodes()),
            ));
        }
        if self.source == self.dest {
            return Err(Error::invalid("sessions", "source and destination coincide"));
        }
        self.video.validate()?;
        if !(self.packet_kb > 0.0 && self.packet_kb.is_finite()) {
            return Err(Error::invalid("packet_kb", "must be positive"));
        }
        if !(self.slot_len > 0.0 && self.slot_len.is_finite()) {
            return Err(Error::invalid("slot_len", "must be positive"));
        }
        if self.gop_slots == 0 {
            return Err(Error::invalid("gop_slots", "must be positive"));
        }
        Ok(())
    }

    /// Length of one GoP window in seconds.
    pub fn gop_seconds(&self) -> f64 {
        self.gop_slots as f64 * self.slot_len
    }
}

/// The `cap` shortest simple paths from `source` to `dest` whose total
/// delay is within `t_th`, ordered by delay, then hop count, then node ids.
pub fn enumerate_paths(topo: &Topology, source: usize, dest: usize, t_th: f64, cap: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if source == dest || source >= topo.nodes() || dest >= topo.nodes() || cap == 0 {
        return out;
    }
    let mut on_path = vec![false; topo.nodes()];
    let mut path = vec![source];
    on_path[source] = true;
    let mut found = Vec::new();
    dfs(topo, dest, t_th, 0.0, &mut path, &mut on_path, &mut found);
    found.sort_by(|(da, a), (db, b)| da.total_cmp(db).then(a.len().cmp(&b.len())).then(a.cmp(b)));
    out.extend(found.into_iter().take(cap).map(|(_, p)| p));
    out
}

fn dfs(
    topo: &Topology,
    dest: usize,
    t_th: f64,
    delay: f64,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    out: &mut Vec<(f64, Vec<usize>)>,
) {
    let here = *path.last().expect("path starts at the source");
    for &next in topo.neighbours(here) {
        if on_path[next] {
            continue;
        }
        let link = topo.link_between(here, next).expect("neighbours share a link");
        let d = delay + topo.links[link].delay;
        if d > t_th + 1e-12 {
            continue;
        }
        path.push(next);
        if next == dest {
            out.push((d, path.clone()));
        } else {
            on_path[next] = true;
            dfs(topo, dest, t_th, d, path, on_path, out);
            on_path[next] = false;
        }
        path.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, delay: f64) -> Topology {
        let links = (0..n - 1)
            .map(|i| Link {
                a: i,
                b: i + 1,
                delay,
                loss: vec![0.1],
            })
            .collect();
        Topology::new(1, 1, vec![0; n], links).unwrap()
    }

    #[test]
    fn direct_link() {
        let t = line(2, 1.0);
        assert_eq!(enumerate_paths(&t, 0, 1, 1.0, 10), vec![vec![0, 1]]);
    }

    #[test]
    fn zero_budget() {
        let t = line(3, 0.5);
        assert!(enumerate_paths(&t, 0, 2, 0.0, 10).is_empty());
    }

    #[test]
    fn cap_limits_count() {
        // Complete graph on 5 nodes has many 0->4 paths.
        let mut links = Vec::new();
        for a in 0..5 {
            for b in a + 1..5 {
                links.push(Link {
                    a,
                    b,
                    delay: 1.0,
                    loss: vec![0.0],
                });
            }
        }
        let t = Topology::new(1, 1, vec![0; 5], links).unwrap();
        let all = enumerate_paths(&t, 0, 4, 10.0, 1000);
        assert_eq!(all.len(), 16);
        // Equal link delays: shortest first, then lexicographic.
        let mut sorted = all.clone();
        sorted.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
        assert_eq!(all, sorted);
        assert_eq!(all[0], vec![0, 4]);
        assert_eq!(enumerate_paths(&t, 0, 4, 10.0, 3), all[..3].to_vec());
    }

    #[test]
    fn rejects_bad_links() {
        let bad = Link {
            a: 0,
            b: 0,
            delay: 1.0,
            loss: vec![0.1],
        };
        assert!(Topology::new(1, 1, vec![0], vec![bad]).is_err());
        let lossy = Link {
            a: 0,
            b: 1,
            delay: 1.0,
            loss: vec![1.5],
        };
        assert!(Topology::new(1, 1, vec![0, 0], vec![lossy]).is_err());
    }
}
