//! Host access to the virtual device: protocol, server, client.

pub mod client;
pub mod protocol;
pub mod runner;
pub mod server;
pub mod ws;

pub use client::{BridgeClient, ClientError};
pub use protocol::{parse_request, Reason, Request, Response};
pub use runner::{DeviceHandle, DeviceRunner, Pacing};
pub use server::{BridgeServer, ServeOptions, DEFAULT_PORT, DEFAULT_WS_PORT};

/// Environment variable naming the bridge endpoint (`host:port`).
pub const ENDPOINT_ENV: &str = "DAQWEAR_ENDPOINT";
pub const DEFAULT_ENDPOINT: &str = "127.0.0.1:7410";
