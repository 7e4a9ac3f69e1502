//! Cross-layer scheduling for scalable video over cognitive radio networks.
//!
//! Licensed channels are two-state Markov chains observed through noisy
//! sensing. On top of that sit two planners: a base station multicasting
//! layered video to groups of users, and a multi-hop mesh streaming
//! several sessions over amplify-and-forward tunnels.

pub mod channel;
pub mod error;
pub mod harness;
pub mod lp;
pub mod multicast;
pub mod multihop;
pub mod rng;
pub mod sensing;
pub mod video;

pub use error::{Error, Result};
