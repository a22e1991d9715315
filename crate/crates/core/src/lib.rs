pub mod beamform;
pub mod channel;
pub mod error;
pub mod harness;
pub mod numkit;
pub mod outage;
pub mod pilots;
pub mod rate;
pub mod sdp;

pub use error::{Error, Result};
