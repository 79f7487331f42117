//! Newline-delimited JSON messages between harness and backend.
//!
//! ```text
//! → {"type":"handshake"}
//! ← {"type":"info","name":..,"kind":..,"context_window":..,"version":..,"protocol":1}
//! → {"type":"score","id":7,"sentences":["..."]}
//! ← {"type":"scores","id":7,"results":[{"tokens":[{"text":..,"surprisal_bits":..,"start":..,"end":..}]}]}
//! ← {"type":"error","id":7,"message":".."}
//! ```
//!
//! Offsets are character indices into the exact request string.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Backend, BackendInfo, BackendKind, RawResult, TokenScore};
use crate::error::{Error, Result};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Request {
    Handshake,
    Score { id: u64, sentences: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Response {
    Info {
        name: String,
        kind: BackendKind,
        context_window: Option<u32>,
        version: String,
        protocol: u32,
    },
    Scores {
        id: u64,
        results: Vec<WireResult>,
    },
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WireResult {
    Tokens { tokens: Vec<TokenScore> },
    Failed { error: String },
}

impl From<RawResult> for WireResult {
    fn from(r: RawResult) -> Self {
        match r {
            Ok(tokens) => WireResult::Tokens { tokens },
            Err(error) => WireResult::Failed { error },
        }
    }
}

impl From<WireResult> for RawResult {
    fn from(r: WireResult) -> Self {
        match r {
            WireResult::Tokens { tokens } => Ok(tokens),
            WireResult::Failed { error } => Err(error),
        }
    }
}

impl Response {
    pub fn info(info: BackendInfo) -> Self {
        Response::Info {
            name: info.name,
            kind: info.kind,
            context_window: info.context_window,
            version: info.version,
            protocol: PROTOCOL_VERSION,
        }
    }

    /// Interpret an `info` reply, refusing other protocol versions.
    pub fn into_info(self) -> Result<BackendInfo> {
        match self {
            Response::Info {
                name,
                kind,
                context_window,
                version,
                protocol,
            } => {
                if protocol != PROTOCOL_VERSION {
                    return Err(Error::protocol(format!(
                        "protocol version mismatch: harness speaks {PROTOCOL_VERSION}, backend {name} speaks {protocol}"
                    )));
                }
                Ok(BackendInfo {
                    name,
                    kind,
                    context_window,
                    version,
                })
            }
            Response::Error { message, .. } => {
                Err(Error::protocol(format!("handshake refused: {message}")))
            }
            other => Err(Error::protocol(format!(
                "expected info reply, got {other:?}"
            ))),
        }
    }
}

pub fn encode<T: Serialize>(msg: &T) -> String {
    serde_json::to_string(msg).expect("protocol messages always serialize")
}

pub fn decode_response(line: &str) -> Result<Response> {
    serde_json::from_str(line.trim_end())
        .map_err(|e| Error::protocol(format!("malformed reply {:?}: {e}", truncate(line))))
}

fn truncate(s: &str) -> String {
    s.chars().take(120).collect()
}

/// Answer one request line. Never fails: problems are reported as `error`
/// messages.
pub fn handle_line(backend: &dyn Backend, line: &str) -> String {
    let request: Request = match serde_json::from_str(line.trim_end()) {
        Ok(r) => r,
        Err(e) => {
            return encode(&Response::Error {
                id: None,
                message: format!("malformed request: {e}"),
            })
        }
    };
    let response = match request {
        Request::Handshake => match backend.handshake() {
            Ok(info) => Response::info(info),
            Err(e) => Response::Error {
                id: None,
                message: e.to_string(),
            },
        },
        Request::Score { id, sentences } => match backend.score_batch(&sentences) {
            Ok(results) => Response::Scores {
                id,
                results: results.into_iter().map(WireResult::from).collect(),
            },
            Err(e) => Response::Error {
                id: Some(id),
                message: e.to_string(),
            },
        },
    };
    encode(&response)
}

/// Serve requests line by line until the reader is exhausted.
pub fn serve(backend: &dyn Backend, reader: impl BufRead, mut writer: impl Write) -> Result<()> {
    for line in reader.lines() {
        let line = line.map_err(|e| Error::transport(format!("reading request: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = handle_line(backend, &line);
        writer
            .write_all(reply.as_bytes())
            .and_then(|_| writer.write_all(b"\n"))
            .and_then(|_| writer.flush())
            .map_err(|e| Error::transport(format!("writing reply: {e}")))?;
    }
    Ok(())
}

/// Accept connections on `listener` and serve each on its own thread.
pub fn serve_tcp<B: Backend + 'static>(
    backend: std::sync::Arc<B>,
    listener: std::net::TcpListener,
) -> Result<()> {
    for stream in listener.incoming() {
        let stream = stream.map_err(|e| Error::transport(format!("accept failed: {e}")))?;
        let backend = backend.clone();
        std::thread::spawn(move || {
            let reader = match stream.try_clone() {
                Ok(s) => std::io::BufReader::new(s),
                Err(e) => {
                    log::error!("cannot clone connection: {e}");
                    return;
                }
            };
            if let Err(e) = serve(&*backend, reader, stream) {
                log::warn!("connection closed: {e}");
            }
        });
    }
    Ok(())
}
