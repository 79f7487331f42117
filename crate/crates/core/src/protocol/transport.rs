use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use super::wire::{decode_response, encode, handle_line, Request, Response};
use super::{Backend, BackendInfo, RawResult};
use crate::error::{Error, Result};

struct Conn<R, W> {
    reader: R,
    writer: W,
    /// Replies that arrived while waiting for a different id.
    pending: HashMap<u64, Response>,
}

impl<R: BufRead, W: Write> Conn<R, W> {
    fn send(&mut self, req: &Request) -> Result<()> {
        let mut line = encode(req);
        line.push('\n');
        self.writer
            .write_all(line.as_bytes())
            .and_then(|_| self.writer.flush())
            .map_err(|e| Error::transport(format!("sending request: {e}")))
    }

    fn recv(&mut self) -> Result<Response> {
        let mut line = String::new();
        loop {
            line.clear();
            let n = self
                .reader
                .read_line(&mut line)
                .map_err(|e| Error::transport(format!("reading reply: {e}")))?;
            if n == 0 {
                return Err(Error::transport("backend closed the connection"));
            }
            if !line.trim().is_empty() {
                return decode_response(&line);
            }
        }
    }

    fn await_id(&mut self, id: u64) -> Result<Vec<RawResult>> {
        let reply = match self.pending.remove(&id) {
            Some(r) => r,
            None => loop {
                match self.recv()? {
                    Response::Scores { id: got, results } if got != id => {
                        self.pending
                            .insert(got, Response::Scores { id: got, results });
                    }
                    Response::Error {
                        id: Some(got),
                        message,
                    } if got != id => {
                        self.pending.insert(
                            got,
                            Response::Error {
                                id: Some(got),
                                message,
                            },
                        );
                    }
                    other => break other,
                }
            },
        };
        match reply {
            Response::Scores { results, .. } => {
                Ok(results.into_iter().map(RawResult::from).collect())
            }
            Response::Error { message, .. } => Err(Error::protocol(format!(
                "backend error for request {id}: {message}"
            ))),
            other => Err(Error::protocol(format!(
                "expected scores for request {id}, got {other:?}"
            ))),
        }
    }
}

/// Protocol client over any line-oriented byte stream.
pub struct WireClient<R, W> {
    conn: Mutex<Conn<R, W>>,
    next_id: AtomicU64,
}

impl<R, W> WireClient<R, W>
where
    R: BufRead + Send,
    W: Write + Send,
{
    pub fn new(reader: R, writer: W) -> Self {
        Self {
            conn: Mutex::new(Conn {
                reader,
                writer,
                pending: HashMap::new(),
            }),
            next_id: AtomicU64::new(1),
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Conn<R, W>> {
        self.conn.lock().unwrap_or_else(|p| p.into_inner())
    }
}

impl<R, W> Backend for WireClient<R, W>
where
    R: BufRead + Send,
    W: Write + Send,
{
    fn handshake(&self) -> Result<BackendInfo> {
        let mut conn = self.lock();
        conn.send(&Request::Handshake)?;
        conn.recv()?.into_info()
    }

    fn score_batch(&self, sentences: &[String]) -> Result<Vec<RawResult>> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let mut conn = self.lock();
        conn.send(&Request::Score {
            id,
            sentences: sentences.to_vec(),
        })?;
        conn.await_id(id)
    }

    /// Pipelines requests: up to `jobs` are written before the first reply
    /// is awaited. Replies are matched by id, so the backend may answer out
    /// of order.
    fn score_batches(&self, batches: &[Vec<String>], jobs: usize) -> Result<Vec<Vec<RawResult>>> {
        let window = jobs.max(1);
        let mut conn = self.lock();
        let ids: Vec<u64> = batches
            .iter()
            .map(|_| self.next_id.fetch_add(1, Ordering::Relaxed))
            .collect();
        let mut out = Vec::with_capacity(batches.len());
        let mut sent = 0;
        for (i, &id) in ids.iter().enumerate() {
            while sent < batches.len() && sent < i + window {
                conn.send(&Request::Score {
                    id: ids[sent],
                    sentences: batches[sent].clone(),
                })?;
                sent += 1;
            }
            out.push(conn.await_id(id)?);
        }
        Ok(out)
    }
}

/// A backend subprocess speaking the protocol on its standard streams.
pub struct ExecBackend {
    client: WireClient<BufReader<ChildStdout>, ChildStdin>,
    child: Child,
    command: String,
}

impl ExecBackend {
    /// Spawn `command` through `sh -c`.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::transport(format!("cannot spawn {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("stdin was piped");
        let stdout = child.stdout.take().expect("stdout was piped");
        Ok(Self {
            client: WireClient::new(BufReader::new(stdout), stdin),
            child,
            command: command.to_string(),
        })
    }

    pub fn command(&self) -> &str {
        &self.command
    }
}

impl Drop for ExecBackend {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Backend for ExecBackend {
    fn handshake(&self) -> Result<BackendInfo> {
        self.client.handshake()
    }
    fn score_batch(&self, sentences: &[String]) -> Result<Vec<RawResult>> {
        self.client.score_batch(sentences)
    }
    fn score_batches(&self, batches: &[Vec<String>], jobs: usize) -> Result<Vec<Vec<RawResult>>> {
        self.client.score_batches(batches, jobs)
    }
}

/// A backend reached over TCP.
pub struct TcpBackend {
    client: WireClient<BufReader<TcpStream>, TcpStream>,
}

impl TcpBackend {
    pub fn connect(addr: &str) -> Result<Self> {
        let stream = TcpStream::connect(addr)
            .map_err(|e| Error::transport(format!("cannot connect to {addr}: {e}")))?;
        let reader = stream
            .try_clone()
            .map_err(|e| Error::transport(format!("cannot clone socket: {e}")))?;
        Ok(Self {
            client: WireClient::new(BufReader::new(reader), stream),
        })
    }
}

impl Backend for TcpBackend {
    fn handshake(&self) -> Result<BackendInfo> {
        self.client.handshake()
    }
    fn score_batch(&self, sentences: &[String]) -> Result<Vec<RawResult>> {
        self.client.score_batch(sentences)
    }
    fn score_batches(&self, batches: &[Vec<String>], jobs: usize) -> Result<Vec<Vec<RawResult>>> {
        self.client.score_batches(batches, jobs)
    }
}

/// Routes every call of an in-process backend through the wire encoding,
/// so in-process use exercises the same serialization as a transport.
pub struct Loopback<B> {
    inner: B,
    next_id: AtomicU64,
}

impl<B: Backend> Loopback<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            next_id: AtomicU64::new(1),
        }
    }

    pub fn into_inner(self) -> B {
        self.inner
    }
}

impl<B: Backend> Backend for Loopback<B> {
    fn handshake(&self) -> Result<BackendInfo> {
        let reply = handle_line(&self.inner, &encode(&Request::Handshake));
        decode_response(&reply)?.into_info()
    }

    fn score_batch(&self, sentences: &[String]) -> Result<Vec<RawResult>> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let line = encode(&Request::Score {
            id,
            sentences: sentences.to_vec(),
        });
        let reply = handle_line(&self.inner, &line);
        match decode_response(&reply)? {
            Response::Scores { id: got, results } if got == id => {
                Ok(results.into_iter().map(RawResult::from).collect())
            }
            Response::Error { message, .. } => Err(Error::protocol(format!(
                "backend error for request {id}: {message}"
            ))),
            other => Err(Error::protocol(format!("unexpected reply {other:?}"))),
        }
    }
}
