//! Blocking client for the line protocol.

use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpStream;
use std::time::Duration;

use base64::Engine;
use serde::de::DeserializeOwned;
use serde_json::Value;
use thiserror::Error;

use super::protocol::{Event, Request, Response};
use crate::config::CorrectionReport;
use crate::logistics::{FileSource, LogisticsError};
use crate::service::{ControlMessage, DeviceState, DeviceStatus, FileEntry};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("cannot reach {endpoint}: {source}")]
    Connect {
        endpoint: String,
        #[source]
        source: io::Error,
    },
    #[error("connection: {0}")]
    Io(#[from] io::Error),
    #[error("bad response: {0}")]
    Decode(#[from] serde_json::Error),
    #[error("connection closed by device")]
    Closed,
    #[error("{reason}{}", .detail.as_ref().map(|d| format!(": {d}")).unwrap_or_default())]
    Rejected {
        reason: String,
        detail: Option<String>,
    },
}

impl ClientError {
    pub fn reason(&self) -> Option<&str> {
        match self {
            ClientError::Rejected { reason, .. } => Some(reason),
            _ => None,
        }
    }
}

pub struct BridgeClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    next_id: u64,
}

impl BridgeClient {
    pub fn connect(endpoint: &str) -> Result<Self, ClientError> {
        let connect_err = |source| ClientError::Connect {
            endpoint: endpoint.to_string(),
            source,
        };
        let stream = TcpStream::connect(endpoint).map_err(connect_err)?;
        stream.set_read_timeout(Some(Duration::from_secs(120)))?;
        stream.set_nodelay(true)?;
        Ok(Self {
            writer: stream.try_clone()?,
            reader: BufReader::new(stream),
            next_id: 1,
        })
    }

    fn read_value(&mut self) -> Result<Value, ClientError> {
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(ClientError::Closed);
        }
        Ok(serde_json::from_str(&line)?)
    }

    /// Send a request and wait for its response, skipping pushed events.
    pub fn request(&mut self, req: &Request) -> Result<Response, ClientError> {
        let id = self.next_id;
        self.next_id += 1;
        let mut value = serde_json::to_value(req)?;
        value["id"] = Value::from(id);
        let mut line = serde_json::to_vec(&value)?;
        line.push(b'\n');
        self.writer.write_all(&line)?;
        loop {
            let v = self.read_value()?;
            if v.get("event").is_some() {
                continue;
            }
            let resp: Response = serde_json::from_value(v)?;
            if resp.id.as_ref().and_then(Value::as_u64) == Some(id) {
                return Ok(resp);
            }
        }
    }

    /// Payload of a successful request.
    pub fn call<T: DeserializeOwned>(&mut self, req: &Request) -> Result<T, ClientError> {
        let resp = self.request(req)?;
        if !resp.ok {
            return Err(ClientError::Rejected {
                reason: resp.reason.unwrap_or_default(),
                detail: resp.detail,
            });
        }
        Ok(serde_json::from_value(resp.payload.unwrap_or(Value::Null))?)
    }

    pub fn status(&mut self) -> Result<DeviceStatus, ClientError> {
        self.call(&Request::Status)
    }

    pub fn push_config(&mut self, text: &str) -> Result<CorrectionReport, ClientError> {
        self.call(&Request::PushConfig {
            text: text.to_string(),
        })
    }

    pub fn list_files(&mut self) -> Result<Vec<FileEntry>, ClientError> {
        self.call(&Request::ListFiles)
    }

    pub fn pull_file(&mut self, name: &str) -> Result<Vec<u8>, ClientError> {
        let v: Value = self.call(&Request::PullFile {
            name: name.to_string(),
        })?;
        let data = v["data"].as_str().unwrap_or_default();
        base64::engine::general_purpose::STANDARD
            .decode(data)
            .map_err(|e| ClientError::Rejected {
                reason: "bad_payload".into(),
                detail: Some(e.to_string()),
            })
    }

    pub fn send(&mut self, msg: ControlMessage) -> Result<DeviceState, ClientError> {
        let v: Value = self.call(&Request::Send { msg })?;
        Ok(serde_json::from_value(v["state"].clone())?)
    }

    pub fn stream_status(&mut self, interval_ms: u64) -> Result<(), ClientError> {
        let _: Value = self.call(&Request::StreamStatus {
            interval_ms: Some(interval_ms),
        })?;
        Ok(())
    }

    /// Next pushed event on a streaming connection.
    pub fn next_event(&mut self) -> Result<Event, ClientError> {
        loop {
            let v = self.read_value()?;
            if v.get("event").is_some() {
                return Ok(serde_json::from_value(v)?);
            }
        }
    }
}

impl FileSource for BridgeClient {
    fn list(&mut self) -> Result<Vec<FileEntry>, LogisticsError> {
        self.list_files()
            .map_err(|e| LogisticsError::Source(e.to_string()))
    }

    fn fetch(&mut self, name: &str) -> Result<Vec<u8>, LogisticsError> {
        self.pull_file(name)
            .map_err(|e| LogisticsError::Source(e.to_string()))
    }
}
