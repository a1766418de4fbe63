//! Length-prefixed JSON protocol that lets external processes serve the
//! overseer and segmenter roles.

mod client;
pub mod codec;
mod messages;
mod server;

pub use client::{BridgeClient, BridgeOverseer, BridgeSegmenter, Endpoint, DEFAULT_TIMEOUT};
pub use messages::{Envelope, Message, Role, WireAnchor, WireDetection, WireImage, WirePoint, PROTOCOL_VERSION};
pub use server::{serve, ServedModels};
