//! Channel coding and channel models.

pub mod channel;
pub mod conv;

pub use channel::{noise_sigma, transmit, ChannelError, ChannelModel, Received};
pub use conv::{ConvCode, ConvError, Observation};
