//! Line protocol between an environment and an external agent.
//!
//! ```text
//! ENV   -> AGENT  INIT <family> <T> <root>
//! ENV   -> AGENT  FEEDBACK <state> <value> CHILDREN <c1> <c2> ...
//! AGENT -> ENV    SELECT <state>
//! ENV   -> AGENT  DONE <status>
//! ```
//!
//! States travel by name (`r0d0>i1d1`, `x0y0>x1y0`). Exactly one `SELECT`
//! answers each `FEEDBACK`; after the last selection the environment sends
//! `DONE` instead of another `FEEDBACK`. Several sessions may follow each
//! other on one stream.

use std::fmt;
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::TcpStream;
use std::str::FromStr;
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use treesearch::envs::{centi, from_centi};
use treesearch::Family;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DoneStatus {
    /// The budget was spent.
    Ok,
    /// Every state was visited first.
    Exhausted,
    /// The agent selected a state outside the frontier.
    Illegal,
    Malformed,
    Timeout,
    /// The agent hung up.
    Closed,
}

impl DoneStatus {
    pub fn is_success(self) -> bool {
        matches!(self, DoneStatus::Ok | DoneStatus::Exhausted)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DoneStatus::Ok => "ok",
            DoneStatus::Exhausted => "exhausted",
            DoneStatus::Illegal => "illegal",
            DoneStatus::Malformed => "malformed",
            DoneStatus::Timeout => "timeout",
            DoneStatus::Closed => "closed",
        }
    }
}

impl FromStr for DoneStatus {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "ok" => DoneStatus::Ok,
            "exhausted" => DoneStatus::Exhausted,
            "illegal" => DoneStatus::Illegal,
            "malformed" => DoneStatus::Malformed,
            "timeout" => DoneStatus::Timeout,
            "closed" => DoneStatus::Closed,
            other => return Err(format!("unknown status `{other}`")),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProtocolMessage {
    Init {
        family: Family,
        budget: usize,
        root: String,
    },
    Feedback {
        state: String,
        /// On the 0.01 grid.
        value: f64,
        children: Vec<String>,
    },
    Select {
        state: String,
    },
    Done {
        status: DoneStatus,
    },
}

impl fmt::Display for ProtocolMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolMessage::Init {
                family,
                budget,
                root,
            } => write!(f, "INIT {} {budget} {root}", family.as_str()),
            ProtocolMessage::Feedback {
                state,
                value,
                children,
            } => {
                let c = centi(*value);
                write!(f, "FEEDBACK {state} {}.{:02} CHILDREN", c / 100, c % 100)?;
                for ch in children {
                    write!(f, " {ch}")?;
                }
                Ok(())
            }
            ProtocolMessage::Select { state } => write!(f, "SELECT {state}"),
            ProtocolMessage::Done { status } => write!(f, "DONE {}", status.as_str()),
        }
    }
}

impl FromStr for ProtocolMessage {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Malformed {
            line: line.to_string(),
            msg: msg.to_string(),
        };
        let words: Vec<&str> = line.split_whitespace().collect();
        let Some((&head, rest)) = words.split_first() else {
            return Err(bad("empty line"));
        };
        match (head, rest) {
            ("INIT", [family, budget, root]) => Ok(ProtocolMessage::Init {
                family: family.parse().map_err(|_| bad("unknown family"))?,
                budget: budget.parse().map_err(|_| bad("budget is not a number"))?,
                root: root.to_string(),
            }),
            ("FEEDBACK", [state, value, "CHILDREN", children @ ..]) => {
                let v: f64 = value.parse().map_err(|_| bad("value is not a number"))?;
                if !(0.0..=1.0).contains(&v) || from_centi(centi(v)) != v {
                    return Err(bad("value is not on the 0.01 grid in [0, 1]"));
                }
                Ok(ProtocolMessage::Feedback {
                    state: state.to_string(),
                    value: v,
                    children: children.iter().map(|c| c.to_string()).collect(),
                })
            }
            ("SELECT", [state]) => Ok(ProtocolMessage::Select {
                state: state.to_string(),
            }),
            ("DONE", [status]) => Ok(ProtocolMessage::Done {
                status: status.parse().map_err(|e: String| bad(&e))?,
            }),
            _ => Err(bad("unknown message shape")),
        }
    }
}

/// A bidirectional line channel.
pub trait Transport: Send {
    fn send(&mut self, line: &str) -> Result<()>;

    /// Next line without its terminator.
    fn recv(&mut self) -> Result<String>;
}

/// Newline-delimited text over any byte stream: pipes, stdio, TCP.
pub struct LineTransport<R, W> {
    reader: R,
    writer: W,
}

impl<R: BufRead + Send, W: Write + Send> LineTransport<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Self { reader, writer }
    }
}

impl<R: BufRead + Send, W: Write + Send> Transport for LineTransport<R, W> {
    fn send(&mut self, line: &str) -> Result<()> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        Ok(())
    }

    fn recv(&mut self) -> Result<String> {
        let mut buf = String::new();
        match self.reader.read_line(&mut buf) {
            Ok(0) => Err(Error::Closed),
            Ok(_) => Ok(buf.trim_end_matches(['\n', '\r']).to_string()),
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => Err(Error::Timeout),
            Err(e) => Err(e.into()),
        }
    }
}

pub type TcpTransport = LineTransport<BufReader<TcpStream>, TcpStream>;

/// Wraps a connected socket. `timeout` bounds every read.
pub fn tcp_transport(stream: TcpStream, timeout: Option<Duration>) -> Result<TcpTransport> {
    stream.set_read_timeout(timeout)?;
    let reader = BufReader::new(stream.try_clone()?);
    Ok(LineTransport::new(reader, stream))
}

/// In-process transport, mostly for tests and threaded agents.
pub struct ChannelTransport {
    tx: Sender<String>,
    rx: Receiver<String>,
    timeout: Duration,
}

/// Two connected ends. Each `recv` waits at most `timeout`.
pub fn channel_pair(timeout: Duration) -> (ChannelTransport, ChannelTransport) {
    let (a_tx, b_rx) = channel();
    let (b_tx, a_rx) = channel();
    (
        ChannelTransport {
            tx: a_tx,
            rx: a_rx,
            timeout,
        },
        ChannelTransport {
            tx: b_tx,
            rx: b_rx,
            timeout,
        },
    )
}

impl ChannelTransport {
    pub fn set_timeout(&mut self, timeout: Duration) {
        self.timeout = timeout;
    }
}

impl Transport for ChannelTransport {
    fn send(&mut self, line: &str) -> Result<()> {
        self.tx.send(line.to_string()).map_err(|_| Error::Closed)
    }

    fn recv(&mut self) -> Result<String> {
        match self.rx.recv_timeout(self.timeout) {
            Ok(line) => Ok(line),
            Err(RecvTimeoutError::Timeout) => Err(Error::Timeout),
            Err(RecvTimeoutError::Disconnected) => Err(Error::Closed),
        }
    }
}
