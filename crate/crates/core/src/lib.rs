//! Error-probability bounds, error exponents and a Monte Carlo simulator for random
//! multiple access over compound discrete memoryless channels.
//!
//! Each user picks a rate from a finite table without telling the receiver; the channel
//! is an unknown member of a finite family. The receiver either decodes every user or
//! reports a collision, and the operation region lists the (rate vector, channel) pairs
//! in which it promises to decode.

pub mod bound;
pub mod channel;
pub mod error;
pub mod exponent;
pub mod info;
pub mod logmath;
mod optimize;
pub mod region;
pub mod serde_float;
pub mod sim;

pub use error::{Error, Result};
