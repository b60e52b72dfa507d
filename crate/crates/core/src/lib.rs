//! Evolution strategies and reinforcement learning over small neural
//! policies, with deterministic seed-controlled environments.
//!
//! The crate is `no_std` (with `alloc`); the `std` feature only enables
//! `std::error::Error` integration through `thiserror`.

#![no_std]

#[cfg(feature = "std")]
extern crate std;

extern crate alloc;

pub mod env;
pub mod error;
pub mod es;
pub mod exec;
pub mod math;
pub mod nn;
pub mod offpolicy;
pub mod optim;
pub mod policy;
pub mod ppo;
pub mod rl;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
