//! Rate-PSNR model for scalable video and the log-PSNR utilities built on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Affine rate-quality model: a stream carrying `rate` kb per GoP decodes at
/// `q_base + beta * (rate - r_base)` dB once the base layer is complete.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoSource {
    pub q_base: f64,
    pub beta: f64,
    pub r_base: f64,
    pub r_enh_max: f64,
}

impl VideoSource {
    pub fn new(q_base: f64, beta: f64, r_base: f64, r_enh_max: f64) -> Result<Self> {
        let v = Self {
            q_base,
            beta,
            r_base,
            r_enh_max,
        };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q_base.is_finite() && self.q_base > 0.0) {
            return Err(Error::invalid("q_base", format!("{} must be positive", self.q_base)));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::invalid("beta", format!("{} must be positive", self.beta)));
        }
        if !(self.r_base.is_finite() && self.r_base >= 0.0) {
            return Err(Error::invalid("r_base", format!("{} must be nonnegative", self.r_base)));
        }
        if !(self.r_enh_max.is_finite() && self.r_enh_max >= 0.0) {
            return Err(Error::invalid(
                "r_enh_max",
                format!("{} must be nonnegative", self.r_enh_max),
            ));
        }
        Ok(())
    }

    /// Extrapolated quality at zero rate.
    pub fn q0(&self) -> f64 {
        self.q_base - self.beta * self.r_base
    }

    pub fn psnr(&self, rate: f64) -> Result<f64> {
        if rate < self.r_base {
            return Err(Error::BaseLayerMissing {
                rate,
                base: self.r_base,
            });
        }
        Ok(self.q0() + self.beta * rate)
    }

    /// Quality with the base layer plus `enh` kb of enhancement.
    pub fn psnr_enhanced(&self, enh: f64) -> f64 {
        self.q_base + self.beta * enh
    }

    pub fn session_utility(&self, rate: f64) -> Result<f64> {
        Ok(self.psnr(rate)?.ln())
    }
}

/// One multicast group: a video and, for each modulation-coding scheme `m`
/// (ordered by rate), the number of users able to decode it and the payload
/// of one tile sent with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticastGroup {
    pub source: VideoSource,
    pub audience: Vec<u32>,
    pub payload: Vec<f64>,
}

impl MulticastGroup {
    pub fn new(source: VideoSource, audience: Vec<u32>, payload: Vec<f64>) -> Result<Self> {
        let g = Self {
            source,
            audience,
            payload,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        if self.audience.is_empty() || self.audience.len() != self.payload.len() {
            return Err(Error::invalid(
                "audience",
                format!(
                    "{} audience counts for {} payloads; need one per scheme",
                    self.audience.len(),
                    self.payload.len()
                ),
            ));
        }
        if self.audience.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid(
                "audience",
                "counts must be nonincreasing in the scheme index",
            ));
        }
        if self.payload.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::invalid("payload", "tile payloads must be positive"));
        }
        if self.payload.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "payload",
                "tile payloads must increase strictly with the scheme index",
            ));
        }
        Ok(())
    }

    pub fn schemes(&self) -> usize {
        self.payload.len()
    }

    /// Users decoding scheme `k` but not `k + 1`.
    pub fn stratum(&self, k: usize) -> f64 {
        let next = self.audience.get(k + 1).copied().unwrap_or(0);
        (self.audience[k] - next) as f64
    }

    /// Enhancement kb carried by `l`.
    pub fn rate(&self, l: &[u32]) -> f64 {
        l.iter().zip(&self.payload).map(|(&n, b)| n as f64 * b).sum()
    }

    /// Sum over users of the log PSNR they decode under allocation `l`.
    pub fn utility(&self, l: &[u32]) -> f64 {
        let mut cum = 0.0;
        let mut total = 0.0;
        for k in 0..self.schemes() {
            cum += self.payload[k] * l[k] as f64;
            let w = self.stratum(k);
            if w > 0.0 {
                total += w * (self.source.q_base + self.source.beta * cum).ln();
            }
        }
        total
    }

    /// Utility gained by the `i`-th tile of scheme `m` (1-based `i`),
    /// counting only the tiles of lower schemes already in `l`. It equals
    /// the exact utility difference whenever `l` holds no tiles above `m`.
    pub fn inc(&self, l: &[u32], m: usize, i: u32) -> f64 {
        let beta = self.source.beta;
        let below: f64 = (0..m).map(|u| self.payload[u] * l[u] as f64).sum();
        let base = self.source.q_base + beta * below + (i as f64 - 1.0) * beta * self.payload[m];
        let step = (beta * self.payload[m] / base).ln_1p();
        let users: f64 = (m..self.schemes()).map(|k| self.stratum(k)).sum();
        users * step
    }

    /// Mean PSNR over the group's users.
    pub fn mean_psnr(&self, l: &[u32]) -> f64 {
        let mut cum = 0.0;
        let mut total = 0.0;
        for k in 0..self.schemes() {
            cum += self.payload[k] * l[k] as f64;
            total += self.stratum(k) * self.source.psnr_enhanced(cum);
        }
        match self.audience[0] {
            0 => self.source.q_base,
            n => total / n as f64,
        }
    }
}

/// Tiles per (group, scheme).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TileAllocation {
    pub l: Vec<Vec<u32>>,
}

impl TileAllocation {
    pub fn zeros(groups: &[MulticastGroup]) -> Self {
        Self {
            l: groups.iter().map(|g| vec![0; g.schemes()]).collect(),
        }
    }

    pub fn total(&self) -> u32 {
        self.l.iter().flatten().sum()
    }

    pub fn utility(&self, groups: &[MulticastGroup]) -> f64 {
        groups.iter().zip(&self.l).map(|(g, l)| g.utility(l)).sum()
    }

    /// Budget and per-group rate caps, with a small slack for payload rounding.
    pub fn is_feasible(&self, groups: &[MulticastGroup], t_e: f64) -> bool {
        self.total() as f64 <= t_e + 1e-9
            && groups
                .iter()
                .zip(&self.l)
                .all(|(g, l)| g.rate(l) <= g.source.r_enh_max + 1e-9)
    }
}
