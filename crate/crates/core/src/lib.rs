//! Environment-agnostic preprocessing for massive-MIMO CSI feedback.
//!
//! Precoders are aligned across subbands by eigenspace projection, moved to
//! the angular-delay domain and cyclically shifted onto a fixed benchmark,
//! so a codec trained in a few environments sees similar inputs everywhere.

pub mod channelgen;
pub mod codec;
pub mod error;
pub mod harness;
pub mod numkit;
pub mod precoder;
pub mod standardizer;

pub use error::{Error, Result};
