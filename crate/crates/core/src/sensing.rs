//! Imperfect spectrum sensing, Bayesian availability beliefs and access rules.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{MarkovChannel, Occupancy};
use crate::error::{check_open_probability, check_probability, Error, Result};

/// Per-channel sensing error rates. `epsilon` is the false-alarm
/// probability (idle reported busy), `delta` the miss-detection
/// probability (busy reported idle).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorProfile {
    pub epsilon: f64,
    pub delta: f64,
}

impl SensorProfile {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        check_open_probability("epsilon", epsilon)?;
        check_open_probability("delta", delta)?;
        Ok(Self { epsilon, delta })
    }

    /// Likelihoods of `idle_votes` idle reports out of `observers` under
    /// idle and busy hypotheses (binomial coefficients cancel).
    fn likelihoods(&self, observers: u32, idle_votes: u32) -> (f64, f64) {
        let busy_votes = (observers - idle_votes) as i32;
        let idle_votes = idle_votes as i32;
        let l_idle = (1.0 - self.epsilon).powi(idle_votes) * self.epsilon.powi(busy_votes);
        let l_busy = self.delta.powi(idle_votes) * (1.0 - self.delta).powi(busy_votes);
        (l_idle, l_busy)
    }
}

/// What the sensing users saw on one channel in one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensingReport {
    pub observers: u32,
    pub idle_votes: u32,
    /// One entry per observer, `true` meaning "reported idle".
    pub raw: Vec<bool>,
}

impl SensingReport {
    pub fn from_votes(raw: Vec<bool>) -> Self {
        let idle_votes = raw.iter().filter(|&&v| v).count() as u32;
        Self {
            observers: raw.len() as u32,
            idle_votes,
            raw,
        }
    }

    /// Each observer independently reports the true state, flipped with
    /// probability epsilon (idle) or 1 - delta (busy).
    pub fn observe<R: Rng>(truth: Occupancy, observers: u32, profile: &SensorProfile, rng: &mut R) -> Self {
        let p_idle_vote = match truth {
            Occupancy::Idle => 1.0 - profile.epsilon,
            Occupancy::Busy => profile.delta,
        };
        let raw = (0..observers).map(|_| rng.gen::<f64>() < p_idle_vote).collect();
        Self::from_votes(raw)
    }
}

/// Availability belief for one channel: the current posterior and the
/// history prior it was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub a: f64,
    pub history_prior: f64,
}

impl Belief {
    /// Starts from the stationary idle probability, as if no sensing had
    /// happened yet.
    pub fn stationary(ch: &MarkovChannel) -> Self {
        let a = 1.0 - ch.utilization();
        Self { a, history_prior: a }
    }
}

/// Beliefs for every channel of a bank, indexed like the bank.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BeliefState {
    pub beliefs: Vec<Belief>,
}

impl BeliefState {
    pub fn a(&self, idx: usize) -> f64 {
        self.beliefs[idx].a
    }
}

/// Probability the channel is idle now given only its belief last slot.
pub fn history_prior(a_prev: f64, ch: &MarkovChannel) -> f64 {
    (ch.lambda() * a_prev + ch.mu() * (1.0 - a_prev)).clamp(0.0, 1.0)
}

/// Posterior idle probability after observing `idle_votes` of `observers`.
pub fn posterior(prior_idle: f64, observers: u32, idle_votes: u32, profile: &SensorProfile) -> f64 {
    let (l_idle, l_busy) = profile.likelihoods(observers, idle_votes);
    let num = prior_idle * l_idle;
    let den = num + (1.0 - prior_idle) * l_busy;
    if den <= 0.0 {
        prior_idle
    } else {
        (num / den).clamp(0.0, 1.0)
    }
}

pub fn update_belief(
    prev: Belief,
    report: &SensingReport,
    profile: &SensorProfile,
    ch: &MarkovChannel,
) -> Result<Belief> {
    if report.idle_votes > report.observers {
        return Err(Error::invalid(
            "idle_votes",
            format!("{} idle votes from {} observers", report.idle_votes, report.observers),
        ));
    }
    check_open_probability("epsilon", profile.epsilon)?;
    check_open_probability("delta", profile.delta)?;
    let history_prior = history_prior(prev.a, ch);
    Ok(Belief {
        a: posterior(history_prior, report.observers, report.idle_votes, profile),
        history_prior,
    })
}

/// Belief `tau` slots ahead with no further sensing.
pub fn predict_belief(a_now: f64, ch: &MarkovChannel, tau: u32) -> f64 {
    let rho = ch.lambda() - ch.mu();
    if tau == 0 || rho == 1.0 {
        return a_now;
    }
    let r = rho.powi(tau as i32);
    r * a_now + ch.mu() * (1.0 - r) / (1.0 - rho)
}

/// Access probability that keeps the expected collision rate at `gamma`.
pub fn tx_probability(a: f64, gamma: f64) -> f64 {
    if a >= 1.0 {
        1.0
    } else {
        (gamma / (1.0 - a)).min(1.0)
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Probability that a busy channel is accessed under threshold `kappa`:
/// the chance that the idle-vote count lands on a value whose posterior
/// reaches `kappa`, given the channel is busy.
pub fn collision_probability(kappa: f64, observers: u32, profile: &SensorProfile, prior_idle: f64) -> f64 {
    (0..=observers)
        .filter(|&i| posterior(prior_idle, observers, i, profile) >= kappa)
        .map(|i| {
            binomial(observers, i) * (1.0 - profile.delta).powi((observers - i) as i32) * profile.delta.powi(i as i32)
        })
        .sum()
}

/// Smallest threshold whose collision probability stays within `gamma`.
///
/// The collision probability only changes at the attainable posterior
/// values, so those (plus the value just above the largest) are the only
/// candidates.
pub fn solve_threshold(gamma: f64, observers: u32, profile: &SensorProfile, prior_idle: f64) -> Result<f64> {
    check_probability("gamma", gamma)?;
    // A channel that cannot be busy cannot be collided with.
    if prior_idle >= 1.0 {
        return Ok(0.0);
    }
    let mut candidates: Vec<f64> = (0..=observers)
        .map(|i| posterior(prior_idle, observers, i, profile))
        .collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let never = candidates.last().copied().unwrap_or(1.0).next_up();
    candidates.insert(0, 0.0);
    candidates.push(never);
    Ok(candidates
        .into_iter()
        .find(|&k| collision_probability(k, observers, profile, prior_idle) <= gamma + 1e-12)
        .unwrap_or(never))
}

/// Channels usable on a link whose endpoints sit in networks with beliefs
/// `(a_i, kappa_i)` and `(a_j, kappa_j)`: both ends must clear their threshold.
pub fn available_channels(a_i: &[f64], kappa_i: &[f64], a_j: &[f64], kappa_j: &[f64]) -> Vec<usize> {
    (0..a_i.len())
        .filter(|&m| a_i[m] >= kappa_i[m] && a_j[m] >= kappa_j[m])
        .collect()
}
