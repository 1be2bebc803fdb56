//! Wire format: one JSON object per line (or per websocket text message).
//!
//! ```text
//! -> {"id":1,"op":"PULL_FILE","name":"P001_20220601_093000_D8F8_meta.txt"}
//! <- {"id":1,"ok":true,"payload":{"name":"...","size":312,"data":"<base64>"}}
//! <- {"id":1,"ok":false,"reason":"not_found"}
//! ```

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::service::ControlMessage;

/// Longest accepted request line.
pub const MAX_LINE_BYTES: usize = 16 << 20;

/// Default period of `STREAM_STATUS` events.
pub const DEFAULT_STREAM_INTERVAL_MS: u64 = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Request {
    Status,
    PushConfig {
        text: String,
    },
    ListFiles,
    PullFile {
        name: String,
    },
    Send {
        msg: ControlMessage,
    },
    StreamStatus {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interval_ms: Option<u64>,
    },
}

pub const OPS: [&str; 6] = [
    "STATUS",
    "PUSH_CONFIG",
    "LIST_FILES",
    "PULL_FILE",
    "SEND",
    "STREAM_STATUS",
];

/// Why a request was not carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reason {
    MalformedJson,
    BadRequest,
    UnknownOp,
    InvalidMessage,
    NotFound,
    LineTooLong,
    DeviceUnavailable,
    Internal,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::MalformedJson => "malformed_json",
            Reason::BadRequest => "bad_request",
            Reason::UnknownOp => "unknown_op",
            Reason::InvalidMessage => "invalid_message",
            Reason::NotFound => "not_found",
            Reason::LineTooLong => "line_too_long",
            Reason::DeviceUnavailable => "device_unavailable",
            Reason::Internal => "internal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<Value>,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Response {
    pub fn ok(id: Option<Value>, payload: Value) -> Self {
        Self {
            id,
            ok: true,
            payload: Some(payload),
            reason: None,
            detail: None,
        }
    }

    pub fn err(id: Option<Value>, reason: Reason, detail: impl Into<Option<String>>) -> Self {
        Self {
            id,
            ok: false,
            payload: None,
            reason: Some(reason.as_str().to_string()),
            detail: detail.into(),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("response serializes")
    }
}

/// A server-initiated message on a streaming connection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub event: String,
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub id: Option<Value>,
    pub reason: Reason,
    pub detail: Option<String>,
}

impl Rejection {
    pub fn into_response(self) -> Response {
        Response::err(self.id, self.reason, self.detail)
    }
}

/// Decode one request. Never panics; every input maps to a request or a
/// reasoned rejection, and a `SEND` only gets through with a valid message.
pub fn parse_request(bytes: &[u8]) -> Result<(Option<Value>, Request), Rejection> {
    let reject = |id, reason, detail: Option<String>| Rejection { id, reason, detail };
    let value: Value = serde_json::from_slice(bytes)
        .map_err(|e| reject(None, Reason::MalformedJson, Some(e.to_string())))?;
    let Value::Object(obj) = &value else {
        return Err(reject(None, Reason::BadRequest, Some("expected an object".into())));
    };
    let id = obj.get("id").cloned();
    let op = match obj.get("op") {
        Some(Value::String(op)) => op.as_str(),
        _ => return Err(reject(id, Reason::BadRequest, Some("missing op".into()))),
    };
    if !OPS.contains(&op) {
        return Err(reject(id, Reason::UnknownOp, Some(op.to_string())));
    }
    if op == "SEND" {
        let msg = obj.get("msg").cloned().unwrap_or(Value::Null);
        return match serde_json::from_value::<ControlMessage>(msg) {
            Ok(msg) if msg.is_valid() => Ok((id, Request::Send { msg })),
            Ok(_) => Err(reject(id, Reason::InvalidMessage, Some("person_id out of range".into()))),
            Err(e) => Err(reject(id, Reason::InvalidMessage, Some(e.to_string()))),
        };
    }
    match serde_json::from_value::<Request>(value.clone()) {
        Ok(req) => Ok((id, req)),
        Err(e) => Err(reject(id, Reason::BadRequest, Some(e.to_string()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_ops() {
        let (id, r) = parse_request(br#"{"id":3,"op":"STATUS"}"#).unwrap();
        assert_eq!(id, Some(Value::from(3)));
        assert_eq!(r, Request::Status);
        let (_, r) = parse_request(br#"{"op":"SEND","msg":{"type":"RESTART","person_id":7}}"#).unwrap();
        assert_eq!(
            r,
            Request::Send {
                msg: ControlMessage::Restart { person_id: 7 }
            }
        );
        let (_, r) = parse_request(br#"{"op":"STREAM_STATUS"}"#).unwrap();
        assert_eq!(r, Request::StreamStatus { interval_ms: None });
    }

    #[test]
    fn rejections() {
        let reason = |b: &[u8]| parse_request(b).unwrap_err().reason;
        assert_eq!(reason(b"not json"), Reason::MalformedJson);
        assert_eq!(reason(b"[1]"), Reason::BadRequest);
        assert_eq!(reason(br#"{"op":"FORMAT_DISK"}"#), Reason::UnknownOp);
        assert_eq!(reason(br#"{"op":"PULL_FILE"}"#), Reason::BadRequest);
        assert_eq!(
            reason(br#"{"op":"SEND","msg":{"type":"RESTART","person_id":1000}}"#),
            Reason::InvalidMessage
        );
        assert_eq!(reason(br#"{"op":"SEND","msg":{"type":"STOP"}}"#), Reason::InvalidMessage);
        let r = parse_request(br#"{"id":"a","op":"NOPE"}"#).unwrap_err();
        assert_eq!(r.id, Some(Value::from("a")));
    }

    #[test]
    fn request_round_trip() {
        for req in [
            Request::Status,
            Request::PushConfig { text: "a=b".into() },
            Request::ListFiles,
            Request::PullFile { name: "x".into() },
            Request::Send {
                msg: ControlMessage::Clean,
            },
            Request::StreamStatus {
                interval_ms: Some(100),
            },
        ] {
            let line = serde_json::to_vec(&req).unwrap();
            assert_eq!(parse_request(&line).unwrap().1, req);
        }
    }
}
